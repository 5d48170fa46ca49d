//! Time-dependent control parameters over a gate window `[0, T]`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{degeneracy_residual, QubitArraySpec};

/// A scalar control function of time.
///
/// Step pulses are right-continuous: the value switches exactly at `t_on`
/// and back to the baseline exactly at `t_off`. Piecewise-linear and sampled
/// pulses interpolate linearly and hold their end values outside the knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pulse {
    Constant {
        value: f64,
    },
    Step {
        value: f64,
        t_on: f64,
        t_off: f64,
        #[serde(default)]
        baseline: f64,
    },
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
        #[serde(default)]
        baseline: f64,
    },
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
    Sampled {
        grid: Vec<f64>,
        values: Vec<f64>,
    },
}

/// Families accepted by [`make_area_pulse`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    Constant,
    Step,
    Gaussian,
    Triangle,
}

impl FromStr for ShapeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "step" => Ok(Self::Step),
            "gaussian" => Ok(Self::Gaussian),
            "triangle" => Ok(Self::Triangle),
            other => Err(Error::InvalidParameter(format!("unknown shape family '{other}'"))),
        }
    }
}

fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

fn check_increasing(ts: &[f64], what: &str) -> Result<()> {
    if ts.is_empty() {
        return Err(Error::InfeasibleShape(format!("{what} is empty")));
    }
    if ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InfeasibleShape(format!("{what} is not strictly increasing")));
    }
    Ok(())
}

impl Pulse {
    pub fn constant(value: f64) -> Self {
        Pulse::Constant { value }
    }

    pub fn step(value: f64, t_on: f64, t_off: f64) -> Result<Self> {
        Self::step_on(value, t_on, t_off, 0.0)
    }

    pub fn step_on(value: f64, t_on: f64, t_off: f64, baseline: f64) -> Result<Self> {
        let p = Pulse::Step {
            value,
            t_on,
            t_off,
            baseline,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn gaussian(amplitude: f64, center: f64, width: f64, baseline: f64) -> Result<Self> {
        let p = Pulse::Gaussian {
            amplitude,
            center,
            width,
            baseline,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        let p = Pulse::PiecewiseLinear { knots };
        p.validate()?;
        Ok(p)
    }

    pub fn sampled(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let p = Pulse::Sampled { grid, values };
        p.validate()?;
        Ok(p)
    }

    /// Parse a two-column `time value` table. Blank lines and `#` comments are
    /// skipped; columns may be separated by whitespace or a comma.
    pub fn parse_sampled(text: &str) -> Result<Self> {
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::InfeasibleShape(format!(
                    "line {}: expected two columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::InfeasibleShape(format!("line {}: {e}", lineno + 1)))
            };
            grid.push(parse(cols[0])?);
            values.push(parse(cols[1])?);
        }
        Self::sampled(grid, values)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Pulse::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InfeasibleShape("constant value is not finite".into()));
                }
            }
            Pulse::Step {
                value,
                t_on,
                t_off,
                baseline,
            } => {
                if !all_finite(&[*value, *t_on, *t_off, *baseline]) {
                    return Err(Error::InfeasibleShape("step parameters are not finite".into()));
                }
                if t_on > t_off {
                    return Err(Error::InfeasibleShape(format!("step switches on at {t_on} after it switches off at {t_off}")));
                }
            }
            Pulse::Gaussian {
                amplitude,
                center,
                width,
                baseline,
            } => {
                if !all_finite(&[*amplitude, *center, *width, *baseline]) {
                    return Err(Error::InfeasibleShape("gaussian parameters are not finite".into()));
                }
                if *width <= 0.0 {
                    return Err(Error::InfeasibleShape(format!("gaussian width {width} must be positive")));
                }
            }
            Pulse::PiecewiseLinear { knots } => {
                let ts: Vec<f64> = knots.iter().map(|k| k.0).collect();
                let vs: Vec<f64> = knots.iter().map(|k| k.1).collect();
                if !all_finite(&ts) || !all_finite(&vs) {
                    return Err(Error::InfeasibleShape("knots are not finite".into()));
                }
                check_increasing(&ts, "knot list")?;
            }
            Pulse::Sampled { grid, values } => {
                if grid.len() != values.len() {
                    return Err(Error::InfeasibleShape(format!(
                        "grid has {} points but {} values",
                        grid.len(),
                        values.len()
                    )));
                }
                if !all_finite(grid) || !all_finite(values) {
                    return Err(Error::InfeasibleShape("samples are not finite".into()));
                }
                check_increasing(grid, "sample grid")?;
            }
        }
        Ok(())
    }

    /// Value at any real `t`.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Pulse::Constant { value } => *value,
            Pulse::Step {
                value,
                t_on,
                t_off,
                baseline,
            } => {
                if *t_on <= t && t < *t_off {
                    *value
                } else {
                    *baseline
                }
            }
            Pulse::Gaussian {
                amplitude,
                center,
                width,
                baseline,
            } => {
                let x = (t - center) / width;
                baseline + amplitude * (-0.5 * x * x).exp()
            }
            Pulse::PiecewiseLinear { knots } => {
                interpolate(knots.len(), |k| knots[k].0, |k| knots[k].1, t)
            }
            Pulse::Sampled { grid, values } => interpolate(grid.len(), |k| grid[k], |k| values[k], t),
        }
    }

    /// Value at `t`, which must lie in `[0, duration]`.
    pub fn sample(&self, t: f64, duration: f64) -> Result<f64> {
        if !(0.0..=duration).contains(&t) {
            return Err(Error::OutOfWindow { t, duration });
        }
        Ok(self.value(t))
    }

    /// Times where the pulse is discontinuous or has a kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Pulse::Constant { .. } | Pulse::Gaussian { .. } => Vec::new(),
            Pulse::Step { t_on, t_off, .. } => vec![*t_on, *t_off],
            Pulse::PiecewiseLinear { knots } => knots.iter().map(|k| k.0).collect(),
            Pulse::Sampled { grid, .. } => grid.clone(),
        }
    }

    /// `int_from^to pulse(t) dt`; closed form except for sampled pulses.
    pub fn integral(&self, from: f64, to: f64) -> f64 {
        if to < from {
            return -self.integral(to, from);
        }
        match self {
            Pulse::Constant { value } => value * (to - from),
            Pulse::Step {
                value,
                t_on,
                t_off,
                baseline,
            } => {
                let on = t_on.clamp(from, to);
                let off = t_off.clamp(from, to);
                baseline * (to - from) + (value - baseline) * (off - on)
            }
            Pulse::Gaussian {
                amplitude,
                center,
                width,
                baseline,
            } => baseline * (to - from) + amplitude * gaussian_area(*center, *width, from, to),
            Pulse::PiecewiseLinear { .. } => {
                // linear between consecutive breakpoints, so the trapezoid rule is exact
                let pts = self.points_within(from, to);
                pts.windows(2)
                    .map(|w| 0.5 * (w[1] - w[0]) * (self.value(w[0]) + self.value(w[1])))
                    .sum()
            }
            Pulse::Sampled { .. } => {
                let pts = self.points_within(from, to);
                pts.windows(2).map(|w| self.simpson_segment(w[0], w[1])).sum()
            }
        }
    }

    /// Mean value over `[0, duration]`.
    pub fn average(&self, duration: f64) -> f64 {
        self.integral(0.0, duration) / duration
    }

    /// `scale * pulse(t) + offset`.
    pub fn affine(&self, scale: f64, offset: f64) -> Pulse {
        match self {
            Pulse::Constant { value } => Pulse::Constant {
                value: scale * value + offset,
            },
            Pulse::Step {
                value,
                t_on,
                t_off,
                baseline,
            } => Pulse::Step {
                value: scale * value + offset,
                t_on: *t_on,
                t_off: *t_off,
                baseline: scale * baseline + offset,
            },
            Pulse::Gaussian {
                amplitude,
                center,
                width,
                baseline,
            } => Pulse::Gaussian {
                amplitude: scale * amplitude,
                center: *center,
                width: *width,
                baseline: scale * baseline + offset,
            },
            Pulse::PiecewiseLinear { knots } => Pulse::PiecewiseLinear {
                knots: knots.iter().map(|&(t, v)| (t, scale * v + offset)).collect(),
            },
            Pulse::Sampled { grid, values } => Pulse::Sampled {
                grid: grid.clone(),
                values: values.iter().map(|v| scale * v + offset).collect(),
            },
        }
    }

    /// Largest `|value|` over `[0, duration]`, exact at the pulse's extremal points.
    pub fn peak_abs(&self, duration: f64) -> f64 {
        let mut pts = self.points_within(0.0, duration);
        if let Pulse::Gaussian { center, .. } = self {
            if (0.0..=duration).contains(center) {
                pts.push(*center);
            }
        }
        pts.iter().map(|&t| self.value(t).abs()).fold(0.0, f64::max)
    }

    fn points_within(&self, from: f64, to: f64) -> Vec<f64> {
        let mut pts = vec![from];
        pts.extend(self.breakpoints().into_iter().filter(|&t| t > from && t < to));
        pts.push(to);
        pts
    }

    fn simpson_segment(&self, a: f64, b: f64) -> f64 {
        let mut panels = 2usize;
        let mut prev = simpson(|t| self.value(t), a, b, panels);
        loop {
            panels *= 2;
            let next = simpson(|t| self.value(t), a, b, panels);
            let scale = next.abs().max(f64::MIN_POSITIVE);
            if (next - prev).abs() <= 1e-12 * scale || (next - prev).abs() < 1e-300 || panels >= 1 << 20 {
                return next;
            }
            prev = next;
        }
    }
}

fn interpolate(len: usize, time: impl Fn(usize) -> f64, value: impl Fn(usize) -> f64, t: f64) -> f64 {
    if t <= time(0) {
        return value(0);
    }
    if t >= time(len - 1) {
        return value(len - 1);
    }
    // first knot strictly greater than t
    let (mut lo, mut hi) = (0usize, len - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if time(mid) <= t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (t0, t1) = (time(lo), time(hi));
    let w = (t - t0) / (t1 - t0);
    value(lo) + w * (value(hi) - value(lo))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * k as f64);
    }
    acc * h / 3.0
}

/// `int_from^to exp(-(t - center)^2 / (2 width^2)) dt`.
pub fn gaussian_area(center: f64, width: f64, from: f64, to: f64) -> f64 {
    let s = FRAC_1_SQRT_2 / width;
    let hi = (to - center) * s;
    let lo = (from - center) * s;
    // erfc keeps precision when both limits sit in the same far tail
    let diff = if lo > 0.0 {
        libm::erfc(lo) - libm::erfc(hi)
    } else if hi < 0.0 {
        libm::erfc(-hi) - libm::erfc(-lo)
    } else {
        libm::erf(hi) - libm::erf(lo)
    };
    width * (PI / 2.0).sqrt() * diff
}

/// A pulse of the given family whose integral over `[0, duration]` is `target_area`.
///
/// `width_fraction` is the Gaussian standard deviation, or the step/triangle
/// base width, as a fraction of `duration`. Every family is centered at
/// `duration / 2`; it is ignored for the constant family.
pub fn make_area_pulse(family: ShapeFamily, target_area: f64, duration: f64, width_fraction: f64) -> Result<Pulse> {
    if !target_area.is_finite() {
        return Err(Error::InvalidParameter(format!("target area {target_area} is not finite")));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidParameter(format!("duration {duration} must be positive")));
    }
    let center = 0.5 * duration;
    let width_ok = width_fraction.is_finite() && width_fraction > 0.0;
    match family {
        ShapeFamily::Constant => Ok(Pulse::constant(target_area / duration)),
        ShapeFamily::Gaussian => {
            if !width_ok {
                return Err(Error::InfeasibleShape(format!("gaussian width fraction {width_fraction} must be positive")));
            }
            let width = width_fraction * duration;
            let unit = gaussian_area(center, width, 0.0, duration);
            Pulse::gaussian(target_area / unit, center, width, 0.0)
        }
        ShapeFamily::Step | ShapeFamily::Triangle => {
            if !width_ok || width_fraction > 1.0 {
                return Err(Error::InfeasibleShape(format!("width fraction {width_fraction} must lie in (0, 1]")));
            }
            let half = 0.5 * width_fraction * duration;
            let (on, off) = (center - half, center + half);
            if family == ShapeFamily::Step {
                Pulse::step(target_area / (off - on), on, off)
            } else {
                Pulse::piecewise_linear(vec![(on, 0.0), (center, 2.0 * target_area / (off - on)), (off, 0.0)])
            }
        }
    }
}

/// One controllable parameter of a qubit register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ControlSlot {
    Eps1(usize),
    Eps2(usize),
    Gamma1(usize),
    Gamma2(usize),
    Tau(usize),
    Mu(usize, usize),
    Chi(usize, usize),
}

impl ControlSlot {
    fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            ControlSlot::Eps1(q) | ControlSlot::Eps2(q) | ControlSlot::Gamma1(q) | ControlSlot::Gamma2(q) | ControlSlot::Tau(q) => (q, None),
            ControlSlot::Mu(i, j) | ControlSlot::Chi(i, j) => (i, Some(j)),
        }
    }

    /// Constant value of this slot in `base`.
    pub fn base_value(&self, base: &QubitArraySpec) -> Option<f64> {
        match *self {
            ControlSlot::Eps1(q) => base.qubit(q).map(|p| p.eps1),
            ControlSlot::Eps2(q) => base.qubit(q).map(|p| p.eps2),
            ControlSlot::Gamma1(q) => base.qubit(q).map(|p| p.gamma1),
            ControlSlot::Gamma2(q) => base.qubit(q).map(|p| p.gamma2),
            ControlSlot::Tau(q) => base.qubit(q).map(|p| p.tau),
            ControlSlot::Mu(i, j) => (i.max(j) < base.qubit_count()).then(|| base.coupling(i, j).mu),
            ControlSlot::Chi(i, j) => (i.max(j) < base.qubit_count()).then(|| base.coupling(i, j).chi),
        }
    }

    fn write(&self, spec: &mut QubitArraySpec, value: f64) -> Result<()> {
        let missing = || Error::InconsistentLayout(format!("slot {self} is outside the register"));
        match *self {
            ControlSlot::Eps1(q) => spec.qubit_mut(q).ok_or_else(missing)?.eps1 = value,
            ControlSlot::Eps2(q) => spec.qubit_mut(q).ok_or_else(missing)?.eps2 = value,
            ControlSlot::Gamma1(q) => spec.qubit_mut(q).ok_or_else(missing)?.gamma1 = value,
            ControlSlot::Gamma2(q) => spec.qubit_mut(q).ok_or_else(missing)?.gamma2 = value,
            ControlSlot::Tau(q) => spec.qubit_mut(q).ok_or_else(missing)?.tau = value,
            ControlSlot::Mu(i, j) => spec.coupling_mut(i, j)?.mu = value,
            ControlSlot::Chi(i, j) => spec.coupling_mut(i, j)?.chi = value,
        }
        Ok(())
    }
}

impl fmt::Display for ControlSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlSlot::Eps1(q) => write!(f, "eps1.{q}"),
            ControlSlot::Eps2(q) => write!(f, "eps2.{q}"),
            ControlSlot::Gamma1(q) => write!(f, "gamma1.{q}"),
            ControlSlot::Gamma2(q) => write!(f, "gamma2.{q}"),
            ControlSlot::Tau(q) => write!(f, "tau.{q}"),
            ControlSlot::Mu(i, j) => write!(f, "mu.{i}-{j}"),
            ControlSlot::Chi(i, j) => write!(f, "chi.{i}-{j}"),
        }
    }
}

impl FromStr for ControlSlot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unknown control slot '{s}'"));
        let (name, target) = s.split_once('.').ok_or_else(bad)?;
        let qubit = |t: &str| t.parse::<usize>().map_err(|_| bad());
        let pair = |t: &str| -> Result<(usize, usize)> {
            let (i, j) = t.split_once('-').ok_or_else(bad)?;
            let (i, j) = (qubit(i)?, qubit(j)?);
            if i == j {
                return Err(bad());
            }
            Ok((i.min(j), i.max(j)))
        };
        Ok(match name {
            "eps1" => ControlSlot::Eps1(qubit(target)?),
            "eps2" => ControlSlot::Eps2(qubit(target)?),
            "gamma1" => ControlSlot::Gamma1(qubit(target)?),
            "gamma2" => ControlSlot::Gamma2(qubit(target)?),
            "tau" => ControlSlot::Tau(qubit(target)?),
            "mu" => {
                let (i, j) = pair(target)?;
                ControlSlot::Mu(i, j)
            }
            "chi" => {
                let (i, j) = pair(target)?;
                ControlSlot::Chi(i, j)
            }
            _ => return Err(bad()),
        })
    }
}

/// Which column of the control-dependence table a schedule must follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlPattern {
    /// Hadamard / x-rotation: only `tau` varies.
    Rotation,
    /// Phase shift: `tau = 0`, only `eps`/`gamma` vary, degeneracy restored at both ends.
    Phase,
    /// Controlled phase by inter-qubit tunneling: only `mu` varies.
    Tunneling,
    /// Controlled phase by Kerr coupling: only `chi` varies.
    Kerr,
}

impl ControlPattern {
    pub fn name(&self) -> &'static str {
        match self {
            ControlPattern::Rotation => "H",
            ControlPattern::Phase => "P_phi",
            ControlPattern::Tunneling => "C_phi (tunneling)",
            ControlPattern::Kerr => "C_phi (Kerr)",
        }
    }
}

/// Pulses assigned to control slots over `[0, duration]`; unassigned slots keep their base value.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    duration: f64,
    assignments: BTreeMap<ControlSlot, Pulse>,
}

impl ControlSchedule {
    pub fn new(duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidParameter(format!("schedule duration {duration} must be positive")));
        }
        Ok(Self {
            duration,
            assignments: BTreeMap::new(),
        })
    }

    pub fn with(mut self, slot: ControlSlot, pulse: Pulse) -> Result<Self> {
        self.assign(slot, pulse)?;
        Ok(self)
    }

    pub fn assign(&mut self, slot: ControlSlot, pulse: Pulse) -> Result<()> {
        pulse.validate()?;
        self.assignments.insert(slot, pulse);
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn pulse(&self, slot: ControlSlot) -> Option<&Pulse> {
        self.assignments.get(&slot)
    }

    pub fn assignments(&self) -> impl Iterator<Item = (ControlSlot, &Pulse)> {
        self.assignments.iter().map(|(&s, p)| (s, p))
    }

    /// Register parameters at time `t`.
    pub fn snapshot(&self, base: &QubitArraySpec, t: f64) -> Result<QubitArraySpec> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(Error::OutOfWindow {
                t,
                duration: self.duration,
            });
        }
        let mut spec = base.clone();
        for (slot, pulse) in &self.assignments {
            slot.write(&mut spec, pulse.value(t))?;
        }
        Ok(spec)
    }

    /// Mean of a slot over the window (its base value when unassigned).
    pub fn average(&self, slot: ControlSlot, base: &QubitArraySpec) -> Option<f64> {
        match self.assignments.get(&slot) {
            Some(p) => Some(p.average(self.duration)),
            None => slot.base_value(base),
        }
    }

    /// Sorted, deduplicated pulse breakpoints strictly inside `(0, duration)`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .assignments
            .values()
            .flat_map(|p| p.breakpoints())
            .filter(|&t| t > 0.0 && t < self.duration)
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Check the schedule and its base against the dependence table for `pattern`.
    ///
    /// `particles` is the per-qubit particle number used for the degeneracy
    /// check; pass `None` to skip it.
    pub fn validate_pattern(&self, pattern: ControlPattern, base: &QubitArraySpec, particles: Option<u32>) -> Result<()> {
        let fail = |reason: String| Error::SchedulePattern {
            gate: pattern.name(),
            reason,
        };
        for (slot, _) in self.assignments() {
            let (i, j) = slot.qubits();
            if i >= base.qubit_count() || j.is_some_and(|j| j >= base.qubit_count()) {
                return Err(fail(format!("slot {slot} is outside the register")));
            }
            let allowed = match pattern {
                ControlPattern::Rotation => matches!(slot, ControlSlot::Tau(_)),
                ControlPattern::Phase => matches!(
                    slot,
                    ControlSlot::Eps1(_) | ControlSlot::Eps2(_) | ControlSlot::Gamma1(_) | ControlSlot::Gamma2(_)
                ),
                ControlPattern::Tunneling => matches!(slot, ControlSlot::Mu(..)),
                ControlPattern::Kerr => matches!(slot, ControlSlot::Chi(..)),
            };
            if !allowed {
                return Err(fail(format!("slot {slot} may not vary")));
            }
        }

        let tau_zero = !matches!(pattern, ControlPattern::Rotation);
        if tau_zero {
            if let Some(q) = base.qubits().iter().position(|p| p.tau != 0.0) {
                return Err(fail(format!("tau on qubit {q} must be 0")));
            }
        }
        for ((i, j), c) in base.couplings() {
            let mu_allowed = pattern == ControlPattern::Tunneling;
            let chi_allowed = pattern == ControlPattern::Kerr;
            if !mu_allowed && c.mu != 0.0 {
                return Err(fail(format!("mu({i},{j}) must be 0")));
            }
            if !chi_allowed && c.chi != 0.0 {
                return Err(fail(format!("chi({i},{j}) must be 0")));
            }
        }
        if pattern == ControlPattern::Tunneling {
            for (slot, _) in self.assignments() {
                if let ControlSlot::Mu(i, j) = slot {
                    for q in [i, j] {
                        if base.qubit(q).is_some_and(|p| p.eps1 == 0.0) {
                            return Err(fail(format!("eps1 on qubit {q} must be non-zero")));
                        }
                    }
                }
            }
        }

        if let Some(n) = particles {
            for (q, p) in base.qubits().iter().enumerate() {
                let residual = degeneracy_residual(p, n);
                if residual.abs() > degeneracy_tolerance(p, n) {
                    return Err(fail(format!("qubit {q} is not degenerate (residual {residual:e})")));
                }
            }
        }

        if pattern == ControlPattern::Phase {
            for (slot, pulse) in self.assignments() {
                let want = slot.base_value(base).unwrap_or(0.0);
                for t in [0.0, self.duration] {
                    let got = pulse.value(t);
                    if (got - want).abs() > 1e-9 * want.abs().max(1.0) {
                        return Err(fail(format!("{slot} is {got} at t = {t}, boundary value is {want}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Absolute tolerance on the degeneracy residual, relative to the size of its terms.
pub fn degeneracy_tolerance(p: &crate::model::SingleQubitParams, n: u32) -> f64 {
    let scale = p.eps1.abs() + (2.0 * f64::from(n) - 1.0).abs() * p.eps2.abs() + p.gamma1.abs() + p.gamma2.abs();
    1e-12 * scale.max(1.0)
}
