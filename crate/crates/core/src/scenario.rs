//! Running configured scenarios and writing their artifacts.
//!
//! Every run writes `effective_config.toml` next to its results. CSV files
//! carry a one-line header and floats in `{:.16e}`; JSON summaries use the
//! shortest round-trip representation. Reruns are byte-identical.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::json;
use thiserror::Error;

use crate::config::{AreaUnits, DRIFT_TOL, FIG2_ORACLE_TOL, ConfigError, GateName, ScenarioConfig, ScenarioKind};
use crate::fock::{enumerate_sector_capped, sector_dimension, FockSector, OccupationVector, DEFAULT_DIM_CAP};
use crate::gates::{
    compose_predicted, extract_logical_report, hadamard_sequence, simulate_single_qubit, simulate_two_qubit, synthesize_cphase,
    synthesize_kerr, synthesize_phase, synthesize_rx, unwrap_phases, wrap_2pi, GateReport, LogicalUnitary, PhaseProfile,
    ProjectedPropagator, SynthesisResult,
};
use crate::model::{build_lattice_hamiltonian, build_single_qubit_hamiltonian_on, build_two_qubit_hamiltonian, energy_levels, SingleQubitParams};
use crate::propagator::{analytic_n2_constant, check_two_level_reduction, propagate, PropagationOptions, QuantumState};
use crate::pulses::{make_area_pulse, ControlPattern, ControlSlot, ShapeFamily};
use crate::Error;

/// Environment variable overriding [`DEFAULT_DIM_CAP`].
pub const DIM_CAP_ENV: &str = "BOSELAT_DIM_CAP";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(Error),
    #[error("synthesis infeasible: {0}")]
    Infeasible(Error),
    #[error("numerical tolerance violated: {0}")]
    Tolerance(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<Error> for ScenarioError {
    fn from(e: Error) -> Self {
        match e {
            Error::QuantizationInfeasible { .. } => ScenarioError::Infeasible(e),
            other => ScenarioError::Model(other),
        }
    }
}

impl ScenarioError {
    /// Process exit status: 2 config, 3 infeasible synthesis, 4 tolerance.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(_) | ScenarioError::Model(_) | ScenarioError::Io { .. } => 2,
            ScenarioError::Infeasible(_) => 3,
            ScenarioError::Tolerance(_) => 4,
        }
    }
}

pub type ScenarioResult<T> = std::result::Result<T, ScenarioError>;

/// Sector dimension cap from [`DIM_CAP_ENV`], or the default.
pub fn dim_cap_from_env() -> ScenarioResult<usize> {
    match std::env::var(DIM_CAP_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&c| c > 0)
            .ok_or_else(|| ConfigError::Invalid(format!("{DIM_CAP_ENV}='{v}' is not a positive integer")).into()),
        Err(_) => Ok(DEFAULT_DIM_CAP),
    }
}

/// Files written by a run and a short human-readable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> ScenarioResult<Self> {
        std::fs::create_dir_all(dir).map_err(|source| ScenarioError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> ScenarioResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| ScenarioError::Io { path: path.clone(), source })?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> ScenarioResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("json values always serialize");
        text.push('\n');
        self.write(name, &text)
    }
}

/// Fixed-width float cell.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_row(cells: &[String]) -> String {
    let mut line = cells.join(",");
    line.push('\n');
    line
}

fn options(cfg: &ScenarioConfig) -> PropagationOptions {
    PropagationOptions {
        dt: cfg.numerics.dt,
        record_stride: None,
        breakpoints: Vec::new(),
    }
}

fn check_drift(cfg: &ScenarioConfig, drift: f64) -> ScenarioResult<()> {
    let tol = cfg.numerics.drift_tolerance.unwrap_or(DRIFT_TOL);
    if drift > tol {
        return Err(ScenarioError::Tolerance(format!("unitarity drift {drift:.3e} exceeds {tol:.3e}")));
    }
    Ok(())
}

fn check_capacity(modes: usize, particles: u32, cap: usize) -> ScenarioResult<()> {
    let dim = sector_dimension(modes, particles).unwrap_or(u128::MAX);
    if dim > cap as u128 {
        return Err(Error::Capacity { dimension: dim, cap }.into());
    }
    Ok(())
}

/// Validate `cfg`, run it, and write its artifacts into `out`.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path, dim_cap: usize) -> ScenarioResult<ScenarioOutcome> {
    cfg.validate()?;
    let cfg = cfg.effective();
    let mut w = Writer::new(out)?;
    w.write("effective_config.toml", &cfg.to_toml()?)?;
    let result = match cfg.kind {
        ScenarioKind::Sector => run_sector(&cfg, &mut w, dim_cap),
        ScenarioKind::Spectrum => run_spectrum(&cfg, &mut w, dim_cap),
        ScenarioKind::Gate => run_gate(&cfg, &mut w, dim_cap),
        ScenarioKind::Fig2 => run_fig2(&cfg, &mut w),
        ScenarioKind::LeakageScan => run_leakage_scan(&cfg, &mut w, dim_cap),
    };
    result.map(|summary| ScenarioOutcome { files: w.files, summary })
}

fn run_sector(cfg: &ScenarioConfig, w: &mut Writer, cap: usize) -> ScenarioResult<String> {
    let s = cfg.sector.as_ref().expect("validated");
    let sector = enumerate_sector_capped(s.modes, s.particles, cap)?;
    let mut csv = String::from("index");
    for m in 0..s.modes {
        let _ = write!(csv, ",n{m}");
    }
    csv.push('\n');
    for (k, state) in sector.basis().iter().enumerate() {
        let mut cells = vec![k.to_string()];
        cells.extend(state.occupations().iter().map(u32::to_string));
        csv.push_str(&csv_row(&cells));
    }
    w.write("sector.csv", &csv)?;
    Ok(format!("sector L={} N={}: dimension {}", s.modes, s.particles, sector.dimension()))
}

fn run_spectrum(cfg: &ScenarioConfig, w: &mut Writer, cap: usize) -> ScenarioResult<String> {
    let n = cfg.spectrum.as_ref().expect("validated").particles;
    let spec = cfg.register()?;
    let m = spec.qubit_count();
    let total = n
        .checked_mul(m as u32)
        .ok_or_else(|| ConfigError::Invalid("particle count overflows".into()))?;
    check_capacity(2 * m, total, cap)?;
    let sector = Arc::new(enumerate_sector_capped(2 * m, total, cap)?);
    let h = if m == 1 {
        build_single_qubit_hamiltonian_on(&spec.qubits()[0], &sector)?
    } else {
        build_lattice_hamiltonian(&spec, &sector)?
    };
    let eig = h.eigenvalues();
    let mut csv = String::from("index,state,diagonal_energy,eigenvalue\n");
    for (k, state) in sector.basis().iter().enumerate() {
        csv.push_str(&csv_row(&[
            k.to_string(),
            format!("\"{state}\""),
            fmt_float(h.matrix()[(k, k)].re),
            fmt_float(eig[k]),
        ]));
    }
    w.write("spectrum.csv", &csv)?;
    let mut summary = json!({
        "qubits": m,
        "particles_per_qubit": n,
        "dimension": sector.dimension(),
        "eigenvalue_min": eig.first(),
        "eigenvalue_max": eig.last(),
    });
    let mut line = format!("spectrum: {} levels in [{:.6}, {:.6}]", eig.len(), eig[0], eig[eig.len() - 1]);
    if m == 1 {
        let p = spec.qubits()[0];
        let residual = p.degeneracy_residual(n);
        summary["degeneracy_residual"] = json!(residual);
        summary["gap"] = json!(p.gap());
        if p.tau == 0.0 {
            summary["levels"] = json!(energy_levels(&p, n)?);
        }
        let _ = write!(line, ", degeneracy residual {residual:.3e}, gap {:.6}", p.gap());
    }
    w.json("spectrum_summary.json", &summary)?;
    Ok(line)
}

/// `phi = -int (E_1 - E_0) dt` for the schedule of a single-qubit phase gate.
fn scheduled_phase(s: &SynthesisResult) -> f64 {
    let n = f64::from(s.particles);
    let t = s.schedule.duration();
    let area = |slot: ControlSlot| match s.schedule.pulse(slot) {
        Some(p) => p.integral(0.0, t),
        None => slot.base_value(&s.base).unwrap_or(0.0) * t,
    };
    -(area(ControlSlot::Eps1(0)) - (2.0 * n - 1.0) * area(ControlSlot::Eps2(0)) + area(ControlSlot::Gamma1(0))
        - area(ControlSlot::Gamma2(0)))
}

fn overlay(cfg: &ScenarioConfig, s: &mut SynthesisResult, pattern: ControlPattern) -> ScenarioResult<bool> {
    if cfg.pulse.is_empty() {
        return Ok(false);
    }
    cfg.overlay_pulses(&mut s.schedule)?;
    s.schedule.validate_pattern(pattern, &s.base, Some(s.particles))?;
    Ok(true)
}

fn not_gate() -> LogicalUnitary {
    let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    LogicalUnitary::new(DMatrix::from_row_slice(2, 2, &[z, o, o, z])).expect("Pauli X is unitary")
}

fn run_gate(cfg: &ScenarioConfig, w: &mut Writer, cap: usize) -> ScenarioResult<String> {
    let g = cfg.gate.as_ref().expect("validated");
    let name = g.name.expect("validated");
    let spec = cfg.register()?;
    let opts = options(cfg);
    let eps_pair = || -> ScenarioResult<f64> {
        let (a, b) = (spec.qubits()[0].eps1, spec.qubits()[1].eps1);
        if a != b {
            return Err(ConfigError::Invalid(format!("both qubits need the same eps1, found {a} and {b}")).into());
        }
        Ok(a)
    };

    let (sequence, target) = match name {
        GateName::H | GateName::Not => {
            let n = g.particles.expect("defaulted");
            check_capacity(2, n, cap)?;
            let q = spec.qubits()[0];
            let (shape, wf, duration) = (g.shape.expect("defaulted"), g.width_fraction.expect("defaulted"), g.duration.expect("defaulted"));
            let mut seq = if name == GateName::H {
                hadamard_sequence(g.phase_duration.expect("defaulted"), duration, &q, n, shape, wf)?
            } else {
                vec![synthesize_rx(PI / 2.0, duration, shape, wf, &q, n)?]
            };
            let rx = if name == GateName::H { &mut seq[1] } else { &mut seq[0] };
            if overlay(cfg, rx, ControlPattern::Rotation)? {
                let area = rx.schedule.pulse(ControlSlot::Tau(0)).map_or(0.0, |p| p.integral(0.0, duration));
                rx.predicted = LogicalUnitary::rx(f64::from(n).sqrt() * area);
            }
            let target = if name == GateName::H { LogicalUnitary::hadamard() } else { not_gate() };
            (seq, target)
        }
        GateName::Pphi => {
            let n = g.particles.expect("defaulted");
            check_capacity(2, n, cap)?;
            let profile = match g.profile.as_deref() {
                Some("square") => PhaseProfile::Square {
                    width_fraction: g.width_fraction.expect("defaulted"),
                },
                _ => PhaseProfile::Triangle,
            };
            let phi = g.phi.expect("validated");
            let mut s = synthesize_phase(phi, g.phase_duration.expect("defaulted"), &spec.qubits()[0], n, &profile)?;
            if overlay(cfg, &mut s, ControlPattern::Phase)? {
                s.predicted = LogicalUnitary::phase(scheduled_phase(&s));
            }
            (vec![s], LogicalUnitary::phase(phi))
        }
        GateName::Cphi => {
            let s = synthesize_cphase(g.m1.expect("validated"), g.m2.expect("validated"), eps_pair()?)?;
            let target = s.predicted.clone();
            (vec![s], target)
        }
        GateName::Kerr => {
            let duration = g.duration.expect("defaulted");
            let eps = eps_pair()?;
            let chi = spec.coupling(0, 1).chi;
            let mut s = synthesize_kerr(chi, duration, eps)?;
            if overlay(cfg, &mut s, ControlPattern::Kerr)? {
                let chi_area = s.schedule.pulse(ControlSlot::Chi(0, 1)).map_or(chi * duration, |p| p.integral(0.0, duration));
                let single = -eps * duration;
                s.predicted = LogicalUnitary::diagonal(&[0.0, single, single, 2.0 * single - chi_area]);
            }
            let target = s.predicted.clone();
            (vec![s], target)
        }
    };

    let predicted = compose_predicted(&sequence)?;
    let proj: ProjectedPropagator = if sequence[0].base.qubit_count() == 1 {
        simulate_single_qubit(&sequence, &opts)?
    } else {
        simulate_two_qubit(&sequence[0], &opts)?
    };
    let report: GateReport = extract_logical_report(&proj, &target)?;
    let drift = proj.unitarity_drift();
    let predicted_fidelity = predicted.overlap(&report.realized);
    let last = sequence.last().expect("non-empty");
    let summary = json!({
        "gate": name,
        "particles": last.particles,
        "duration": sequence.iter().map(|s| s.schedule.duration()).sum::<f64>(),
        "step_count": proj.step_count,
        "unitarity_drift": drift,
        "predicted": predicted,
        "predicted_fidelity": predicted_fidelity,
        "theta_correction": last.theta_correction,
        "phi11": last.phi11,
        "quantization": last.quantization,
        "report": report,
    });
    w.json("gate_report.json", &summary)?;

    let mut csv = String::from("row,col,re,im,abs,target_re,target_im\n");
    let d = report.realized.dimension();
    for r in 0..d {
        for c in 0..d {
            let z = report.realized.matrix()[(r, c)];
            let t = target.matrix()[(r, c)];
            csv.push_str(&csv_row(&[
                r.to_string(),
                c.to_string(),
                fmt_float(z.re),
                fmt_float(z.im),
                fmt_float(z.norm()),
                fmt_float(t.re),
                fmt_float(t.im),
            ]));
        }
    }
    w.write("gate_unitary.csv", &csv)?;

    check_drift(cfg, drift)?;
    let mut line = format!(
        "gate {name:?}: fidelity {:.12}, leakage {:.3e}, drift {drift:.3e}",
        report.fidelity, report.leakage
    );
    if let Some(cp) = report.conditional_phase {
        let _ = write!(line, ", conditional phase {:.12} rad", wrap_2pi(cp));
    }
    Ok(line)
}

fn run_fig2(cfg: &ScenarioConfig, w: &mut Writer) -> ScenarioResult<String> {
    let f = cfg.fig2.as_ref().expect("validated");
    let gate = synthesize_cphase(f.m1, f.m2, f.eps)?;
    let mu = gate.schedule.pulse(ControlSlot::Mu(0, 1)).expect("constant mu").value(0.0);
    let duration = gate.schedule.duration();
    let stride = cfg.numerics.trajectory_stride.unwrap_or(1);

    let sector: Arc<FockSector> = Arc::new(enumerate_sector_capped(2, 2, DEFAULT_DIM_CAP)?);
    let psi0 = QuantumState::basis_state(sector.clone(), &OccupationVector::new(vec![1, 1]))?;
    let mut opts = options(cfg);
    opts.record_stride = Some(stride);
    let run = propagate(|_| build_two_qubit_hamiltonian(f.eps, mu, 2), &psi0, duration, &opts)?;
    let trajectory = run.trajectory.as_ref().expect("recording requested");

    // sector order is |20>, |11>, |02>; columns follow |11>, |02>, |20>
    let tracked = [("11", 1usize), ("02", 2), ("20", 0)];
    let rate = f.subtract.rate_multiple() * f.eps;
    let rotated: Vec<Vec<Complex64>> = trajectory
        .iter()
        .map(|p| {
            let frame = Complex64::from_polar(1.0, rate * p.t);
            tracked.iter().map(|&(_, k)| p.amplitudes[k] * frame).collect()
        })
        .collect();
    let phases: Vec<Vec<f64>> = (0..tracked.len())
        .map(|j| unwrap_phases(&rotated.iter().map(|row| row[j].arg()).collect::<Vec<_>>()))
        .collect();

    let mut csv = String::from("t");
    for (label, _) in tracked {
        let _ = write!(csv, ",re_{label},im_{label},abs_{label},phase_over_pi_{label}");
    }
    csv.push('\n');
    for (i, p) in trajectory.iter().enumerate() {
        let mut cells = vec![fmt_float(p.t)];
        for j in 0..tracked.len() {
            let z = rotated[i][j];
            cells.extend([fmt_float(z.re), fmt_float(z.im), fmt_float(z.norm()), fmt_float(phases[j][i] / PI)]);
        }
        csv.push_str(&csv_row(&cells));
    }
    w.write("fig2.csv", &csv)?;

    let final_amp = run.final_state.amplitudes();
    let oracle = analytic_n2_constant(f.eps, mu, duration);
    let oracle_err = (0..3).map(|k| (final_amp[k] - oracle[k]).norm()).fold(0.0, f64::max);
    let last = rotated.last().expect("endpoint recorded")[0];
    let final_phase = wrap_2pi(last.arg());
    let expected_phase = wrap_2pi(f.subtract.rate_multiple() * f.eps * duration - 3.0 * f.eps * duration + f64::from(f.m2) * PI);

    let proj = simulate_two_qubit(&gate, &options(cfg))?;
    let report = extract_logical_report(&proj, &gate.predicted)?;
    let cp = wrap_2pi(report.conditional_phase.expect("two-qubit report"));
    let phi11 = gate.phi11.expect("cphase records phi11");

    let summary = json!({
        "m1": f.m1,
        "m2": f.m2,
        "eps": f.eps,
        "mu": mu,
        "duration": duration,
        "subtraction": f.subtract,
        "subtraction_rate": rate,
        "step_count": run.step_count,
        "final_abs_11": last.norm(),
        "final_phase_11": final_phase,
        "final_phase_11_over_pi": final_phase / PI,
        "expected_final_phase_11": expected_phase,
        "phi11": phi11,
        "phi11_over_pi": phi11 / PI,
        "conditional_phase": cp,
        "conditional_phase_over_pi": cp / PI,
        "theta_correction": gate.theta_correction,
        "gate_fidelity": report.fidelity,
        "leakage": report.leakage,
        "oracle_max_error": oracle_err,
        "unitarity_drift": run.unitarity_drift.max(proj.unitarity_drift()),
    });
    w.json("fig2_summary.json", &summary)?;

    let oracle_tol = cfg.numerics.oracle_tolerance.unwrap_or(FIG2_ORACLE_TOL);
    if oracle_err > oracle_tol {
        return Err(ScenarioError::Tolerance(format!("|11> trace deviates from its closed form by {oracle_err:.3e}")));
    }
    let drift = run.unitarity_drift.max(proj.unitarity_drift());
    check_drift(cfg, drift)?;
    Ok(format!(
        "fig2 (m1={}, m2={}): |<11|psi(T)>| = {:.12}, phase/pi = {:.9}, phi11/pi = {:.9}, conditional phase/pi = {:.9}",
        f.m1,
        f.m2,
        last.norm(),
        final_phase / PI,
        phi11 / PI,
        cp / PI
    ))
}

/// Degenerate single-qubit parameters whose level energies are centered on zero.
pub fn centered_degenerate(eps1: f64, eps2: f64, n: u32) -> crate::Result<SingleQubitParams> {
    let p = SingleQubitParams::degenerate(eps1, eps2, 0.0, n);
    let levels = energy_levels(&p, n)?;
    let lo = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // adding delta to both gammas shifts every level by n delta
    let delta = -(lo + hi) / (2.0 * f64::from(n));
    Ok(SingleQubitParams::degenerate(eps1, eps2, delta, n))
}

fn run_leakage_scan(cfg: &ScenarioConfig, w: &mut Writer, cap: usize) -> ScenarioResult<String> {
    let s = cfg.leakage_scan.as_ref().expect("validated");
    check_capacity(2, s.particles, cap)?;
    let params = centered_degenerate(s.eps1, s.eps2, s.particles)?;
    let root_n = f64::from(s.particles).sqrt();
    let opts = options(cfg);

    let mut header = String::from("rotation_angle,pulse_area,sigma_frac,duration,peak_tau,gap,leakage");
    if s.compare_step {
        header.push_str(",step_peak_tau,step_leakage");
    }
    header.push('\n');
    let mut csv = header;
    let mut worst: f64 = 0.0;
    for &area in &s.areas {
        let pulse_area = match s.area_units {
            AreaUnits::Rotation => area / root_n,
            AreaUnits::Pulse => area,
        };
        for &sigma in &s.sigma_fracs {
            let pulse = make_area_pulse(ShapeFamily::Gaussian, pulse_area, s.duration, sigma)?;
            let red = check_two_level_reduction(&params, s.particles, &pulse, s.duration, &opts)?;
            check_drift(cfg, red.result.unitarity_drift)?;
            worst = worst.max(red.population_leaked);
            let mut cells = vec![
                fmt_float(pulse_area * root_n),
                fmt_float(pulse_area),
                fmt_float(sigma),
                fmt_float(s.duration),
                fmt_float(pulse.peak_abs(s.duration)),
                fmt_float(params.gap()),
                fmt_float(red.population_leaked),
            ];
            if s.compare_step {
                let step = make_area_pulse(ShapeFamily::Step, pulse_area, s.duration, s.step_width_fraction)?;
                let sr = check_two_level_reduction(&params, s.particles, &step, s.duration, &opts)?;
                cells.push(fmt_float(step.peak_abs(s.duration)));
                cells.push(fmt_float(sr.population_leaked));
            }
            csv.push_str(&csv_row(&cells));
        }
    }
    w.write("leakage_scan.csv", &csv)?;
    Ok(format!(
        "leakage scan n={}: {} runs, largest Gaussian leakage {worst:.3e}",
        s.particles,
        s.areas.len() * s.sigma_fracs.len()
    ))
}
