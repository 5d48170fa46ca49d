//! Scenario configuration files.
//!
//! A config is TOML with a top-level `kind` and one section per concern:
//!
//! ```toml
//! kind = "gate"
//!
//! [gate]
//! name = "H"
//! particles = 30
//! duration = 8.0
//!
//! [qubit.0]
//! eps1 = 1.0
//! eps2 = 1.0
//! gamma1 = -1.0
//! gamma2 = -59.0
//! tau = 0.0
//!
//! [pulse."tau.0"]
//! shape = "gaussian"
//! amplitude = 0.06
//! center = 4.0
//! width = 1.0
//! ```
//!
//! `[pulse."<slot>"]` tables either describe a pulse inline (see
//! [`Pulse`]) or point at a two-column text file with `file = "path"`,
//! resolved relative to the config. Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Coupling, QubitArraySpec, SingleQubitParams};
use crate::pulses::{ControlSchedule, ControlSlot, Pulse, ShapeFamily};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] crate::Error),
}

/// Default largest accepted `| ||U psi|| - 1 |`.
pub const DRIFT_TOL: f64 = 1e-9;
/// Default largest gap between the simulated `|11>` amplitude and its closed form.
pub const FIG2_ORACLE_TOL: f64 = 1e-8;

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Sector,
    Spectrum,
    Gate,
    Fig2,
    LeakageScan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateName {
    H,
    #[serde(rename = "NOT")]
    Not,
    Pphi,
    Cphi,
    Kerr,
}

impl std::str::FromStr for GateName {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "H" => Ok(GateName::H),
            "NOT" => Ok(GateName::Not),
            "Pphi" => Ok(GateName::Pphi),
            "Cphi" => Ok(GateName::Cphi),
            "Kerr" => Ok(GateName::Kerr),
            other => Err(invalid(format!("unknown gate '{other}'"))),
        }
    }
}

/// Which dynamical phase is divided out of the `|11>` trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSubtraction {
    /// `exp(-i eps t)` per qubit holding a particle, i.e. `exp(-2 i eps t)` for `|11>`.
    #[default]
    Caption,
    /// The full `exp(-3 i eps t)` of the two-particle sector.
    Derivation,
}

impl PhaseSubtraction {
    pub fn rate_multiple(&self) -> f64 {
        match self {
            PhaseSubtraction::Caption => 2.0,
            PhaseSubtraction::Derivation => 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AreaUnits {
    /// Areas are logical rotation angles; the pulse integral is `angle / sqrt(n)`.
    #[default]
    Rotation,
    /// Areas are the raw pulse integral `int tau dt`.
    Pulse,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_stride: Option<usize>,
    /// Largest accepted `| ||U psi|| - 1 |`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_tolerance: Option<f64>,
    /// Largest accepted gap to a closed-form oracle, where one applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorSection {
    pub modes: usize,
    pub particles: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub particles: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<GateName>,
    /// Particles per qubit (single-qubit gates).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<u32>,
    /// Rotation or Kerr window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    /// Window of each phase gate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_fraction: Option<f64>,
    /// `triangle` or `square` excursion of `gamma1` for `Pphi`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m1: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m2: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig2Section {
    pub m1: u32,
    pub m2: u32,
    pub eps: f64,
    #[serde(default)]
    pub subtract: PhaseSubtraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakageScanSection {
    pub particles: u32,
    pub areas: Vec<f64>,
    pub sigma_fracs: Vec<f64>,
    #[serde(default = "default_scan_duration")]
    pub duration: f64,
    #[serde(default = "one")]
    pub eps1: f64,
    #[serde(default = "one")]
    pub eps2: f64,
    #[serde(default)]
    pub area_units: AreaUnits,
    #[serde(default)]
    pub compare_step: bool,
    /// Base width of the comparison step, as a fraction of the window.
    #[serde(default = "half")]
    pub step_width_fraction: f64,
}

fn default_scan_duration() -> f64 {
    8.0
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseFile {
    pub file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PulseEntry {
    File(PulseFile),
    Inline(Pulse),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<SectorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fig2: Option<Fig2Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leakage_scan: Option<LeakageScanSection>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub qubit: BTreeMap<String, SingleQubitParams>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub coupling: BTreeMap<String, Coupling>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pulse: BTreeMap<String, PulseEntry>,
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            output: None,
            numerics: Numerics::default(),
            sector: None,
            spectrum: None,
            gate: None,
            fig2: None,
            leakage_scan: None,
            qubit: BTreeMap::new(),
            coupling: BTreeMap::new(),
            pulse: BTreeMap::new(),
        }
    }

    /// Parse without touching the filesystem; file pulses stay unresolved.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Ok(cfg)
    }

    /// Read, resolve file pulses relative to the config, and validate.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let cfg = Self::load_unvalidated(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// As [`ScenarioConfig::load`] without the final validation.
    pub fn load_unvalidated(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        cfg.resolve_files(path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    /// Replace `file = ...` pulses by their inline samples.
    pub fn resolve_files(&mut self, base_dir: &Path) -> Result<(), ConfigError> {
        for entry in self.pulse.values_mut() {
            if let PulseEntry::File(f) = entry {
                let path = base_dir.join(&f.file);
                let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io { path, source })?;
                *entry = PulseEntry::Inline(Pulse::parse_sampled(&text)?);
            }
        }
        Ok(())
    }

    /// Structural checks that do not need any numerics.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let present = [
            ("sector", self.sector.is_some(), ScenarioKind::Sector),
            ("spectrum", self.spectrum.is_some(), ScenarioKind::Spectrum),
            ("gate", self.gate.is_some(), ScenarioKind::Gate),
            ("fig2", self.fig2.is_some(), ScenarioKind::Fig2),
            ("leakage_scan", self.leakage_scan.is_some(), ScenarioKind::LeakageScan),
        ];
        for (name, is_present, kind) in present {
            if is_present && kind != self.kind {
                return Err(invalid(format!("section [{name}] does not apply to kind {:?}", self.kind)));
            }
            if !is_present && kind == self.kind {
                return Err(invalid(format!("kind {:?} requires a [{name}] section", self.kind)));
            }
        }
        if let Some(dt) = self.numerics.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(invalid(format!("numerics.dt = {dt} must be positive")));
            }
        }
        for (name, tol) in [("drift_tolerance", self.numerics.drift_tolerance), ("oracle_tolerance", self.numerics.oracle_tolerance)] {
            if let Some(x) = tol {
                if !(x.is_finite() && x >= 0.0) {
                    return Err(invalid(format!("numerics.{name} = {x} must be a non-negative number")));
                }
            }
        }
        if self.numerics.trajectory_stride == Some(0) {
            return Err(invalid("numerics.trajectory_stride must be at least 1"));
        }
        let uses_register = matches!(self.kind, ScenarioKind::Spectrum | ScenarioKind::Gate);
        if !uses_register && !(self.qubit.is_empty() && self.coupling.is_empty() && self.pulse.is_empty()) {
            return Err(invalid(format!("kind {:?} takes no qubit, coupling or pulse tables", self.kind)));
        }
        if uses_register {
            self.register()?;
            self.pulse_slots()?;
        }
        match self.kind {
            ScenarioKind::Sector => {
                let s = self.sector.as_ref().expect("checked above");
                if s.modes == 0 {
                    return Err(invalid("sector.modes must be at least 1"));
                }
            }
            ScenarioKind::Gate => self.validate_gate()?,
            ScenarioKind::Fig2 => {
                let f = self.fig2.as_ref().expect("checked above");
                if !(f.eps.is_finite() && f.eps > 0.0) {
                    return Err(invalid(format!("fig2.eps = {} must be positive", f.eps)));
                }
                if f.m1 == 0 {
                    return Err(invalid("fig2.m1 must be positive"));
                }
            }
            ScenarioKind::LeakageScan => {
                let s = self.leakage_scan.as_ref().expect("checked above");
                if s.particles == 0 {
                    return Err(invalid("leakage_scan.particles must be at least 1"));
                }
                if s.areas.is_empty() || s.sigma_fracs.is_empty() {
                    return Err(invalid("leakage_scan needs at least one area and one sigma fraction"));
                }
                if s.areas.iter().any(|a| !a.is_finite()) {
                    return Err(invalid("leakage_scan.areas must be finite"));
                }
                if s.sigma_fracs.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(invalid("leakage_scan.sigma_fracs must be positive"));
                }
                if !(s.step_width_fraction > 0.0 && s.step_width_fraction <= 1.0) {
                    return Err(invalid("leakage_scan.step_width_fraction must lie in (0, 1]"));
                }
                if !(s.duration.is_finite() && s.duration > 0.0) {
                    return Err(invalid("leakage_scan.duration must be positive"));
                }
                if !(s.eps1.is_finite() && s.eps2.is_finite() && s.eps1 + s.eps2 > 0.0) {
                    return Err(invalid("leakage_scan needs eps1 + eps2 > 0"));
                }
            }
            ScenarioKind::Spectrum => {
                if self.register()?.qubit_count() > 4 {
                    return Err(invalid("spectrum supports at most 4 qubits"));
                }
            }
        }
        Ok(())
    }

    fn validate_gate(&self) -> Result<(), ConfigError> {
        let g = self.gate.as_ref().expect("gate section present");
        let name = g.name.ok_or_else(|| invalid("gate.name is required"))?;
        let qubits = self.register()?.qubit_count();
        let single = matches!(name, GateName::H | GateName::Not | GateName::Pphi);
        let need = if single { 1 } else { 2 };
        if qubits != need {
            return Err(invalid(format!("gate {name:?} needs {need} qubit table(s), found {qubits}")));
        }
        let positive = |v: Option<f64>, what: &str| -> Result<(), ConfigError> {
            match v {
                Some(x) if !(x.is_finite() && x > 0.0) => Err(invalid(format!("gate.{what} = {x} must be positive"))),
                _ => Ok(()),
            }
        };
        positive(g.duration, "duration")?;
        positive(g.phase_duration, "phase_duration")?;
        positive(g.width_fraction, "width_fraction")?;
        if single && g.particles == Some(0) {
            return Err(invalid("gate.particles must be at least 1"));
        }
        let allowed: &[&str] = match name {
            GateName::H | GateName::Not => &["particles", "duration", "phase_duration", "shape", "width_fraction"],
            GateName::Pphi => &["particles", "phase_duration", "phi", "profile", "width_fraction"],
            GateName::Cphi => &["m1", "m2"],
            GateName::Kerr => &["duration"],
        };
        let set = [
            ("particles", g.particles.is_some()),
            ("duration", g.duration.is_some()),
            ("phase_duration", g.phase_duration.is_some()),
            ("phi", g.phi.is_some()),
            ("shape", g.shape.is_some()),
            ("width_fraction", g.width_fraction.is_some()),
            ("profile", g.profile.is_some()),
            ("m1", g.m1.is_some()),
            ("m2", g.m2.is_some()),
        ];
        for (key, is_set) in set {
            if is_set && !allowed.contains(&key) {
                return Err(invalid(format!("gate.{key} does not apply to gate {name:?}")));
            }
        }
        if name == GateName::Pphi {
            match g.phi {
                None => return Err(invalid("gate Pphi requires gate.phi")),
                Some(phi) if !phi.is_finite() => return Err(invalid("gate.phi must be finite")),
                _ => {}
            }
            if let Some(p) = &g.profile {
                if p != "triangle" && p != "square" {
                    return Err(invalid(format!("gate.profile '{p}' must be 'triangle' or 'square'")));
                }
            }
        }
        if name == GateName::Cphi && (g.m1.is_none() || g.m2.is_none()) {
            return Err(invalid("gate Cphi requires gate.m1 and gate.m2"));
        }
        if name == GateName::Cphi && !self.pulse.is_empty() {
            return Err(invalid("gate Cphi synthesizes its own constant mu; pulse tables are not accepted"));
        }
        Ok(())
    }

    /// Qubit and coupling tables as a register.
    pub fn register(&self) -> Result<QubitArraySpec, ConfigError> {
        let mut qubits = Vec::with_capacity(self.qubit.len());
        let mut keyed: Vec<(usize, SingleQubitParams)> = Vec::new();
        for (k, p) in &self.qubit {
            let idx: usize = k.parse().map_err(|_| invalid(format!("qubit table '{k}' is not an index")))?;
            keyed.push((idx, *p));
        }
        keyed.sort_by_key(|(i, _)| *i);
        for (expected, (idx, p)) in keyed.into_iter().enumerate() {
            if idx != expected {
                return Err(invalid(format!("qubit tables must be numbered 0..M-1, missing qubit {expected}")));
            }
            qubits.push(p);
        }
        if qubits.is_empty() {
            return Err(invalid("at least one [qubit.N] table is required"));
        }
        let mut spec = QubitArraySpec::new(qubits)?;
        for (k, c) in &self.coupling {
            let (i, j) = k
                .split_once('-')
                .and_then(|(i, j)| Some((i.parse::<usize>().ok()?, j.parse::<usize>().ok()?)))
                .ok_or_else(|| invalid(format!("coupling table '{k}' must look like \"i-j\"")))?;
            if spec.couplings().any(|(key, _)| key == (i.min(j), i.max(j))) {
                return Err(invalid(format!("coupling {k} is given twice")));
            }
            spec.set_coupling(i, j, *c)?;
        }
        Ok(spec)
    }

    /// Inline pulses keyed by slot. Fails on unresolved file pulses.
    pub fn pulse_slots(&self) -> Result<Vec<(ControlSlot, Pulse)>, ConfigError> {
        self.pulse
            .iter()
            .map(|(k, entry)| {
                let slot: ControlSlot = k.parse()?;
                match entry {
                    PulseEntry::Inline(p) => {
                        p.validate()?;
                        Ok((slot, p.clone()))
                    }
                    PulseEntry::File(f) => Err(invalid(format!("pulse {k} still references {}", f.file.display()))),
                }
            })
            .collect()
    }

    /// Apply the configured pulses on top of a schedule.
    pub fn overlay_pulses(&self, schedule: &mut ControlSchedule) -> Result<(), ConfigError> {
        for (slot, pulse) in self.pulse_slots()? {
            schedule.assign(slot, pulse)?;
        }
        Ok(())
    }

    /// The same config with every default spelled out.
    pub fn effective(&self) -> Self {
        let mut cfg = self.clone();
        cfg.numerics.drift_tolerance.get_or_insert(DRIFT_TOL);
        if cfg.kind == ScenarioKind::Fig2 {
            cfg.numerics.oracle_tolerance.get_or_insert(FIG2_ORACLE_TOL);
        }
        if let Some(g) = cfg.gate.as_mut() {
            match g.name {
                Some(GateName::H) | Some(GateName::Not) => {
                    g.particles.get_or_insert(1);
                    g.duration.get_or_insert(8.0);
                    g.shape.get_or_insert(ShapeFamily::Gaussian);
                    g.width_fraction.get_or_insert(0.125);
                    if g.name == Some(GateName::H) {
                        g.phase_duration.get_or_insert(1.0);
                    }
                }
                Some(GateName::Pphi) => {
                    g.particles.get_or_insert(1);
                    g.phase_duration.get_or_insert(1.0);
                    let p = g.profile.get_or_insert_with(|| "triangle".into());
                    if p == "square" {
                        g.width_fraction.get_or_insert(0.5);
                    }
                }
                Some(GateName::Kerr) => {
                    g.duration.get_or_insert(1.0);
                }
                Some(GateName::Cphi) | None => {}
            }
        }
        cfg
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}
