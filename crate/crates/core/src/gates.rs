//! Pulse synthesis for `{H, P_phi, C_phi}` and scoring of simulated gates.
//!
//! Logical bases are `(|0>, |1>)` for one qubit and `(|00>, |01>, |10>, |11>)`
//! for two, where the digit is the `a`-mode occupation and the first digit
//! belongs to qubit 0.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{enumerate_sector, OccupationVector};
use crate::model::{
    build_lattice_hamiltonian, build_single_qubit_hamiltonian_on, build_two_qubit_sector_hamiltonian, degeneracy_residual,
    QubitArraySpec, SingleQubitParams,
};
use crate::propagator::{propagate_columns, PropagationOptions};
use crate::pulses::{degeneracy_tolerance, make_area_pulse, ControlPattern, ControlSchedule, ControlSlot, Pulse, ShapeFamily};

/// Entries below this magnitude count as vanishing when removing a global phase.
pub const VANISHING: f64 = 1e-8;

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_pi(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Wrap an angle into `[0, 2 pi)`.
pub fn wrap_2pi(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y >= 2.0 * PI {
        0.0
    } else {
        y
    }
}

/// Distance between two angles modulo `2 pi`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    wrap_pi(a - b).abs()
}

/// Continuous phase trace: each sample is moved by a multiple of `2 pi` to
/// the branch nearest its predecessor.
pub fn unwrap_phases(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    for &p in raw {
        match out.last() {
            None => out.push(p),
            Some(&prev) => out.push(prev + wrap_pi(p - prev)),
        }
    }
    out
}

/// A 2x2 or 4x4 operator on the logical basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalUnitary {
    matrix: DMatrix<Complex64>,
}

fn cz(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl LogicalUnitary {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = matrix.nrows();
        if d != matrix.ncols() || !(d == 2 || d == 4) {
            return Err(Error::DimensionMismatch {
                expected: if d <= 2 { 2 } else { 4 },
                found: matrix.ncols().max(d),
            });
        }
        Ok(Self { matrix })
    }

    pub fn identity(dimension: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dimension, dimension))
    }

    /// `(1/sqrt 2) [[1, 1], [1, -1]]`.
    pub fn hadamard() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            matrix: DMatrix::from_row_slice(2, 2, &[cz(r, 0.0), cz(r, 0.0), cz(r, 0.0), cz(-r, 0.0)]),
        }
    }

    /// `exp(-i theta sigma_x)`.
    pub fn rx(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            matrix: DMatrix::from_row_slice(2, 2, &[cz(c, 0.0), cz(0.0, -s), cz(0.0, -s), cz(c, 0.0)]),
        }
    }

    /// `diag(1, exp(i phi))`.
    pub fn phase(phi: f64) -> Self {
        Self::diagonal(&[0.0, phi])
    }

    /// `diag(1, 1, 1, exp(i phi))`.
    pub fn controlled_phase(phi: f64) -> Self {
        Self::diagonal(&[0.0, 0.0, 0.0, phi])
    }

    /// Diagonal unitary with the given phases.
    pub fn diagonal(phases: &[f64]) -> Self {
        let d = phases.len();
        let mut m = DMatrix::zeros(d, d);
        for (k, &p) in phases.iter().enumerate() {
            m[(k, k)] = Complex64::from_polar(1.0, p);
        }
        Self { matrix: m }
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn labels(&self) -> &'static [&'static str] {
        if self.dimension() == 2 {
            &["|0>", "|1>"]
        } else {
            &["|00>", "|01>", "|10>", "|11>"]
        }
    }

    /// `self * other`, i.e. `other` acts first.
    pub fn then_after(&self, other: &LogicalUnitary) -> LogicalUnitary {
        LogicalUnitary {
            matrix: &self.matrix * &other.matrix,
        }
    }

    /// Divide by the phase of the first non-vanishing entry in row-major order.
    pub fn remove_global_phase(&self) -> (LogicalUnitary, f64) {
        let d = self.dimension();
        let first = (0..d)
            .flat_map(|r| (0..d).map(move |c| (r, c)))
            .map(|rc| self.matrix[rc])
            .find(|z| z.norm() > VANISHING);
        match first {
            None => (self.clone(), 0.0),
            Some(z) => {
                let phase = z.arg();
                let rot = Complex64::from_polar(1.0, -phase);
                (
                    LogicalUnitary {
                        matrix: self.matrix.map(|x| x * rot),
                    },
                    phase,
                )
            }
        }
    }

    /// `max |U^dagger U - 1|`.
    pub fn unitarity_error(&self) -> f64 {
        let d = self.dimension();
        let g = self.matrix.adjoint() * &self.matrix - DMatrix::<Complex64>::identity(d, d);
        g.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `|tr(self^dagger other)| / dim`.
    pub fn overlap(&self, other: &LogicalUnitary) -> f64 {
        let tr: Complex64 = (self.matrix.adjoint() * &other.matrix).trace();
        tr.norm() / self.dimension() as f64
    }

    /// Largest entrywise distance after removing both global phases.
    pub fn distance_up_to_phase(&self, other: &LogicalUnitary) -> f64 {
        let (a, _) = self.remove_global_phase();
        let (b, _) = other.remove_global_phase();
        (a.matrix - b.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Undo equal single-qubit phases `P_theta (x) P_theta` on a two-qubit gate.
    pub fn strip_local_phases(&self, theta: f64) -> Result<LogicalUnitary> {
        if self.dimension() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: self.dimension(),
            });
        }
        let corr = LogicalUnitary::diagonal(&[0.0, -theta, -theta, -2.0 * theta]);
        Ok(corr.then_after(self))
    }
}

impl Serialize for LogicalUnitary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dimension();
        let rows: Vec<Vec<[f64; 2]>> = (0..d)
            .map(|r| (0..d).map(|c| [self.matrix[(r, c)].re, self.matrix[(r, c)].im]).collect())
            .collect();
        rows.serialize(s)
    }
}

/// Gate families of the universal set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    Rx,
    Phase,
    ControlledPhase,
    Kerr,
}

impl GateKind {
    pub fn pattern(&self) -> ControlPattern {
        match self {
            GateKind::Rx => ControlPattern::Rotation,
            GateKind::Phase => ControlPattern::Phase,
            GateKind::ControlledPhase => ControlPattern::Tunneling,
            GateKind::Kerr => ControlPattern::Kerr,
        }
    }
}

/// A synthesized schedule and what it should do on the logical basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub gate: GateKind,
    pub base: QubitArraySpec,
    /// Particles per qubit for single-qubit gates; two-qubit gates run on the `a` modes.
    pub particles: u32,
    pub schedule: ControlSchedule,
    pub predicted: LogicalUnitary,
    pub theta_correction: Option<f64>,
    pub phi11: Option<f64>,
    pub quantization: Option<(u32, u32)>,
}

fn check_degenerate(params: &SingleQubitParams, n: u32) -> Result<()> {
    let r = degeneracy_residual(params, n);
    if r.abs() > degeneracy_tolerance(params, n) {
        return Err(Error::DegeneracyViolated(r));
    }
    Ok(())
}

/// Tunneling pulse realizing `exp(-i theta sigma_x)` on a qubit holding `n` particles.
///
/// The logical block couples `|n;0>` and `|n;1>` with strength `sqrt(n) tau`,
/// so the pulse area is `theta / sqrt(n)`.
pub fn synthesize_rx(
    theta: f64,
    duration: f64,
    family: ShapeFamily,
    width_fraction: f64,
    baseline: &SingleQubitParams,
    n: u32,
) -> Result<SynthesisResult> {
    if n == 0 {
        return Err(Error::InvalidParameter("a rotation needs at least one particle".into()));
    }
    check_degenerate(baseline, n)?;
    if baseline.gap() <= 0.0 {
        return Err(Error::ZeroGap(baseline.gap()));
    }
    let params = SingleQubitParams { tau: 0.0, ..*baseline };
    let base = QubitArraySpec::new(vec![params])?;
    let pulse = if theta == 0.0 {
        Pulse::constant(0.0)
    } else {
        make_area_pulse(family, theta / f64::from(n).sqrt(), duration, width_fraction)?
    };
    let schedule = ControlSchedule::new(duration)?.with(ControlSlot::Tau(0), pulse)?;
    schedule.validate_pattern(ControlPattern::Rotation, &base, Some(n))?;
    Ok(SynthesisResult {
        gate: GateKind::Rx,
        base,
        particles: n,
        schedule,
        predicted: LogicalUnitary::rx(theta),
        theta_correction: None,
        phi11: None,
        quantization: None,
    })
}

/// Zero-boundary profile of the `gamma1` excursion used by [`synthesize_phase`].
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseProfile {
    /// Linear ramp up to `T/2` and back down.
    Triangle,
    /// Rectangular bump of the given width fraction, centered in the window.
    Square { width_fraction: f64 },
    /// Any integrable profile vanishing at both ends of the window.
    Custom(Pulse),
}

impl PhaseProfile {
    fn pulse(&self, duration: f64) -> Result<Pulse> {
        match self {
            PhaseProfile::Triangle => Pulse::piecewise_linear(vec![(0.0, 0.0), (0.5 * duration, 1.0), (duration, 0.0)]),
            PhaseProfile::Square { width_fraction } => make_area_pulse(ShapeFamily::Step, 1.0, duration, *width_fraction),
            PhaseProfile::Custom(p) => {
                p.validate()?;
                for t in [0.0, duration] {
                    if p.value(t) != 0.0 {
                        return Err(Error::InfeasibleShape(format!("phase profile is {} at t = {t}", p.value(t))));
                    }
                }
                Ok(p.clone())
            }
        }
    }
}

/// `gamma1` excursion realizing `diag(1, exp(i phi))` (up to a global phase).
///
/// With `exp(-iHt)` a positive offset of `E_1 - E_0` yields `exp(-i phi)`, so
/// the excursion area is `-phi`. `gamma1` starts and ends at its degenerate
/// value, which freezes the relative phase after the gate.
pub fn synthesize_phase(phi: f64, duration: f64, baseline: &SingleQubitParams, n: u32, profile: &PhaseProfile) -> Result<SynthesisResult> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidParameter(format!("duration {duration} must be positive")));
    }
    if !phi.is_finite() {
        return Err(Error::InvalidParameter(format!("phase {phi} is not finite")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("a phase gate needs at least one particle".into()));
    }
    if baseline.tau != 0.0 {
        return Err(Error::SchedulePattern {
            gate: ControlPattern::Phase.name(),
            reason: "tau must be 0".into(),
        });
    }
    check_degenerate(baseline, n)?;
    let boundary = baseline.gamma1;
    let gamma1 = if phi == 0.0 {
        Pulse::constant(boundary)
    } else {
        let shape = profile.pulse(duration)?;
        let area = shape.integral(0.0, duration);
        if area == 0.0 || !area.is_finite() {
            return Err(Error::InfeasibleShape("phase profile has zero area".into()));
        }
        shape.affine(-phi / area, boundary)
    };
    let base = QubitArraySpec::new(vec![*baseline])?;
    let schedule = ControlSchedule::new(duration)?.with(ControlSlot::Gamma1(0), gamma1)?;
    schedule.validate_pattern(ControlPattern::Phase, &base, Some(n))?;
    Ok(SynthesisResult {
        gate: GateKind::Phase,
        base,
        particles: n,
        schedule,
        predicted: LogicalUnitary::phase(phi),
        theta_correction: None,
        phi11: None,
        quantization: None,
    })
}

/// `[P_{pi/2}, Rx(pi/4), P_{pi/2}]` in time order.
pub fn hadamard_sequence(
    phase_duration: f64,
    rx_duration: f64,
    baseline: &SingleQubitParams,
    n: u32,
    family: ShapeFamily,
    width_fraction: f64,
) -> Result<Vec<SynthesisResult>> {
    let p = synthesize_phase(PI / 2.0, phase_duration, baseline, n, &PhaseProfile::Triangle)?;
    let rx = synthesize_rx(PI / 4.0, rx_duration, family, width_fraction, baseline, n)?;
    Ok(vec![p.clone(), rx, p])
}

/// Product of the predicted unitaries of a time-ordered sequence.
pub fn compose_predicted(sequence: &[SynthesisResult]) -> Result<LogicalUnitary> {
    let first = sequence
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty gate sequence".into()))?;
    let mut u = LogicalUnitary::identity(first.predicted.dimension())?;
    for s in sequence {
        if s.predicted.dimension() != u.dimension() {
            return Err(Error::DimensionMismatch {
                expected: u.dimension(),
                found: s.predicted.dimension(),
            });
        }
        u = s.predicted.then_after(&u);
    }
    Ok(u)
}

/// Constant-`mu` controlled phase satisfying `w1 T = m1 pi` and `w2 T = m2 pi`.
pub fn synthesize_cphase(m1: u32, m2: u32, eps: f64) -> Result<SynthesisResult> {
    if m1 == 0 {
        return Err(Error::InvalidParameter("m1 must be positive".into()));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must be positive")));
    }
    if u64::from(m2) <= 2 * u64::from(m1) {
        return Err(Error::QuantizationInfeasible { m1, m2 });
    }
    let (f1, f2) = (f64::from(m1), f64::from(m2));
    let ratio = f2 / f1;
    let mu = eps / (ratio * ratio - 4.0).sqrt();
    let duration = f1 * PI / mu;
    let root = (f2 * f2 - 4.0 * f1 * f1).sqrt();
    let phi11 = wrap_2pi(PI * (f2 - root));
    let theta = wrap_2pi(PI * (f1 - root));

    let qubit = SingleQubitParams::degenerate(eps, 0.0, 0.0, 1);
    let base = QubitArraySpec::new(vec![qubit, qubit])?;
    let schedule = ControlSchedule::new(duration)?.with(ControlSlot::Mu(0, 1), Pulse::constant(mu))?;
    schedule.validate_pattern(ControlPattern::Tunneling, &base, Some(1))?;
    Ok(SynthesisResult {
        gate: GateKind::ControlledPhase,
        base,
        particles: 1,
        schedule,
        predicted: LogicalUnitary::diagonal(&[0.0, theta, theta, 2.0 * theta + phi11]),
        theta_correction: Some(theta),
        phi11: Some(phi11),
        quantization: Some((m1, m2)),
    })
}

/// Constant Kerr coupling `chi` for `duration`, with `a`-mode self-interaction `eps`.
pub fn synthesize_kerr(chi: f64, duration: f64, eps: f64) -> Result<SynthesisResult> {
    if !(chi.is_finite() && eps.is_finite()) {
        return Err(Error::InvalidParameter("chi and eps must be finite".into()));
    }
    let qubit = SingleQubitParams::degenerate(eps, 0.0, 0.0, 1);
    let base = QubitArraySpec::new(vec![qubit, qubit])?;
    let schedule = ControlSchedule::new(duration)?.with(ControlSlot::Chi(0, 1), Pulse::constant(chi))?;
    schedule.validate_pattern(ControlPattern::Kerr, &base, Some(1))?;
    let single = -eps * duration;
    Ok(SynthesisResult {
        gate: GateKind::Kerr,
        base,
        particles: 1,
        schedule,
        predicted: LogicalUnitary::diagonal(&[0.0, single, single, 2.0 * single - chi * duration]),
        theta_correction: None,
        phi11: None,
        quantization: None,
    })
}

/// Propagator restricted to the computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPropagator {
    /// `<out|U|in>` for logical `in` and `out`.
    pub logical: DMatrix<Complex64>,
    /// Squared norm of each full output column.
    pub column_norms_sq: Vec<f64>,
    pub step_count: u64,
}

impl ProjectedPropagator {
    pub fn dimension(&self) -> usize {
        self.logical.nrows()
    }

    /// Population that left the computational space from input `k`.
    pub fn column_leakage(&self, k: usize) -> f64 {
        let kept: f64 = self.logical.column(k).iter().map(|z| z.norm_sqr()).sum();
        (self.column_norms_sq[k] - kept).max(0.0)
    }

    pub fn unitarity_drift(&self) -> f64 {
        self.column_norms_sq
            .iter()
            .map(|n| (n.sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn project(columns: &DMatrix<Complex64>, positions: &[usize]) -> (DMatrix<Complex64>, Vec<f64>) {
    let d = positions.len();
    let mut logical = DMatrix::zeros(d, columns.ncols());
    for (r, &p) in positions.iter().enumerate() {
        for c in 0..columns.ncols() {
            logical[(r, c)] = columns[(p, c)];
        }
    }
    let norms = columns.column_iter().map(|c| c.norm_squared()).collect();
    (logical, norms)
}

fn unit_columns(dim: usize, positions: &[usize]) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(dim, positions.len());
    for (c, &p) in positions.iter().enumerate() {
        m[(p, c)] = Complex64::new(1.0, 0.0);
    }
    m
}

fn with_breakpoints(options: &PropagationOptions, schedule: &ControlSchedule) -> PropagationOptions {
    let mut o = options.clone();
    o.breakpoints.extend(schedule.breakpoints());
    o
}

/// Run a time-ordered list of single-qubit gates on the full `n + 1` level sector.
pub fn simulate_single_qubit(sequence: &[SynthesisResult], options: &PropagationOptions) -> Result<ProjectedPropagator> {
    let first = sequence
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty gate sequence".into()))?;
    let n = first.particles;
    if n == 0 {
        return Err(Error::InvalidParameter("single-qubit simulation needs n >= 1".into()));
    }
    let sector = Arc::new(enumerate_sector(2, n)?);
    // |n;0>, |n;1> sit at positions n, n - 1
    let positions = [n as usize, n as usize - 1];
    let mut cols = unit_columns(sector.dimension(), &positions);
    let mut steps = 0;
    for gate in sequence {
        if gate.particles != n || gate.base.qubit_count() != 1 {
            return Err(Error::InconsistentLayout("sequence mixes registers".into()));
        }
        let evo = propagate_columns(
            |t| {
                let spec = gate.schedule.snapshot(&gate.base, t)?;
                build_single_qubit_hamiltonian_on(&spec.qubits()[0], &sector)
            },
            &sector,
            cols,
            gate.schedule.duration(),
            &with_breakpoints(options, &gate.schedule),
        )?;
        cols = evo.columns;
        steps += evo.step_count;
    }
    let (logical, column_norms_sq) = project(&cols, &positions);
    Ok(ProjectedPropagator {
        logical,
        column_norms_sq,
        step_count: steps,
    })
}

/// Run a two-qubit gate on the `a`-mode sectors `n = 0, 1, 2`.
pub fn simulate_two_qubit(gate: &SynthesisResult, options: &PropagationOptions) -> Result<ProjectedPropagator> {
    simulate_two_qubit_until(gate, gate.schedule.duration(), options)
}

/// As [`simulate_two_qubit`], stopping at `t_end` inside the window.
pub fn simulate_two_qubit_until(gate: &SynthesisResult, t_end: f64, options: &PropagationOptions) -> Result<ProjectedPropagator> {
    let base = &gate.base;
    if base.qubit_count() != 2 {
        return Err(Error::InconsistentLayout(format!("{} qubits, expected 2", base.qubit_count())));
    }
    let eps = base.qubits()[0].eps1;
    if base.qubits()[1].eps1 != eps {
        return Err(Error::InvalidParameter("both qubits need the same a-mode self-interaction".into()));
    }
    if !(t_end > 0.0 && t_end <= gate.schedule.duration()) {
        return Err(Error::OutOfWindow {
            t: t_end,
            duration: gate.schedule.duration(),
        });
    }
    let mut logical = DMatrix::zeros(4, 4);
    let mut norms = vec![0.0; 4];
    let mut steps = 0;
    let mut opts = with_breakpoints(options, &gate.schedule);
    opts.record_stride = None;
    // logical index = 2 q0 + q1, sector n = q0 + q1, occupation (q0, q1)
    for n in 0..=2u32 {
        let sector = Arc::new(enumerate_sector(2, n)?);
        let inputs: Vec<(usize, usize)> = (0..4usize)
            .filter(|k| (k >> 1) + (k & 1) == n as usize)
            .map(|k| {
                let occ = OccupationVector::new(vec![(k >> 1) as u32, (k & 1) as u32]);
                (k, sector.position(&occ).expect("computational state in its sector"))
            })
            .collect();
        let positions: Vec<usize> = inputs.iter().map(|&(_, p)| p).collect();
        let evo = propagate_columns(
            |t| {
                let spec = gate.schedule.snapshot(base, t)?;
                let c = spec.coupling(0, 1);
                build_two_qubit_sector_hamiltonian(eps, c.mu, c.chi, n)
            },
            &sector,
            unit_columns(sector.dimension(), &positions),
            t_end,
            &opts,
        )?;
        steps += evo.step_count;
        for (c, &(k_in, _)) in inputs.iter().enumerate() {
            norms[k_in] = evo.columns.column(c).norm_squared();
            for &(k_out, p_out) in &inputs {
                logical[(k_out, k_in)] = evo.columns[(p_out, c)];
            }
        }
    }
    Ok(ProjectedPropagator {
        logical,
        column_norms_sq: norms,
        step_count: steps,
    })
}

/// Run a schedule on the full dual-rail register with `particles` bosons per qubit.
///
/// Logical bit `q` of qubit `k` is the occupation of `a_k`; the rest sit in `b_k`.
pub fn simulate_register(
    base: &QubitArraySpec,
    schedule: &ControlSchedule,
    particles: u32,
    options: &PropagationOptions,
) -> Result<ProjectedPropagator> {
    if particles == 0 {
        return Err(Error::InvalidParameter("dual-rail qubits need at least one particle".into()));
    }
    let m = base.qubit_count();
    if m > 8 {
        return Err(Error::InvalidParameter(format!("{m} qubits is too many for a dense register simulation")));
    }
    let sector = Arc::new(enumerate_sector(2 * m, particles * m as u32)?);
    let mut positions = Vec::with_capacity(1 << m);
    for k in 0..(1usize << m) {
        let mut occ = Vec::with_capacity(2 * m);
        for q in 0..m {
            let bit = ((k >> (m - 1 - q)) & 1) as u32;
            occ.push(bit);
            occ.push(particles - bit);
        }
        positions.push(
            sector
                .position(&OccupationVector::new(occ))
                .expect("logical state lies in the register sector"),
        );
    }
    let evo = propagate_columns(
        |t| build_lattice_hamiltonian(&schedule.snapshot(base, t)?, &sector),
        &sector,
        unit_columns(sector.dimension(), &positions),
        schedule.duration(),
        &with_breakpoints(options, schedule),
    )?;
    let (logical, column_norms_sq) = project(&evo.columns, &positions);
    Ok(ProjectedPropagator {
        logical,
        column_norms_sq,
        step_count: evo.step_count,
    })
}

/// Metrics of a simulated gate against its target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateReport {
    pub realized: LogicalUnitary,
    pub target: LogicalUnitary,
    pub fidelity: f64,
    pub leakage: f64,
    pub column_leakage: Vec<f64>,
    /// Wrapped to `(-pi, pi]`; two-qubit gates only.
    pub conditional_phase: Option<f64>,
    /// Sum of the four diagonal arguments before wrapping.
    pub conditional_phase_raw: Option<f64>,
    pub global_phase_removed: f64,
}

/// Project, remove the global phase, and score against `target`.
pub fn extract_logical_report(propagator: &ProjectedPropagator, target: &LogicalUnitary) -> Result<GateReport> {
    let d = propagator.dimension();
    if d != target.dimension() || propagator.column_norms_sq.len() != d {
        return Err(Error::DimensionMismatch {
            expected: target.dimension(),
            found: d,
        });
    }
    let raw = LogicalUnitary::new(propagator.logical.clone())?;
    let (realized, global_phase_removed) = raw.remove_global_phase();
    let fidelity = target.overlap(&realized).clamp(0.0, 1.0);
    let kept: f64 = propagator.logical.iter().map(|z| z.norm_sqr()).sum();
    let leakage = (1.0 - kept / d as f64).max(0.0);
    let column_leakage = (0..d).map(|k| propagator.column_leakage(k)).collect();
    let (conditional_phase, conditional_phase_raw) = if d == 4 {
        let m = realized.matrix();
        let raw = m[(3, 3)].arg() - m[(1, 1)].arg() - m[(2, 2)].arg() + m[(0, 0)].arg();
        (Some(wrap_pi(raw)), Some(raw))
    } else {
        (None, None)
    };
    Ok(GateReport {
        realized,
        target: target.clone(),
        fidelity,
        leakage,
        column_leakage,
        conditional_phase,
        conditional_phase_raw,
        global_phase_removed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping() {
        assert_eq!(wrap_pi(PI), PI);
        assert!((wrap_pi(-PI) - PI).abs() < 1e-15);
        assert!((wrap_pi(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_2pi(-0.5) - (2.0 * PI - 0.5)).abs() < 1e-15);
        assert!(angle_distance(0.1, 0.1 + 4.0 * PI) < 1e-14);
        let trace = unwrap_phases(&[3.0, -3.0, -2.0]);
        assert!((trace[1] - (2.0 * PI - 3.0)).abs() < 1e-15);
        assert!(trace[2] > trace[1]);
    }

    #[test]
    fn not_from_rx() {
        let not = LogicalUnitary::rx(PI / 2.0);
        let scaled = not.matrix().map(|z| z * Complex64::new(0.0, 1.0));
        let x = DMatrix::from_row_slice(2, 2, &[cz(0.0, 0.0), cz(1.0, 0.0), cz(1.0, 0.0), cz(0.0, 0.0)]);
        assert!((scaled - x).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn rx_synthesis_area() {
        let base = SingleQubitParams::degenerate(1.0, 1.0, 0.0, 4);
        let s = synthesize_rx(PI / 2.0, 10.0, ShapeFamily::Gaussian, 0.125, &base, 4).unwrap();
        let area = s.schedule.pulse(ControlSlot::Tau(0)).unwrap().integral(0.0, 10.0);
        assert!((area * 2.0 - PI / 2.0).abs() < 1e-12);
        let id = synthesize_rx(0.0, 10.0, ShapeFamily::Gaussian, 0.125, &base, 4).unwrap();
        assert_eq!(id.schedule.pulse(ControlSlot::Tau(0)), Some(&Pulse::constant(0.0)));
        assert!(id.predicted.distance_up_to_phase(&LogicalUnitary::identity(2).unwrap()) < 1e-15);
        let off = SingleQubitParams { gamma1: 5.0, ..base };
        assert!(matches!(
            synthesize_rx(1.0, 1.0, ShapeFamily::Step, 0.5, &off, 4),
            Err(Error::DegeneracyViolated(_))
        ));
    }

    #[test]
    fn hadamard_composition() {
        let base = SingleQubitParams::degenerate(1.0, 1.0, 0.0, 1);
        let seq = hadamard_sequence(1.0, 5.0, &base, 1, ShapeFamily::Gaussian, 0.125).unwrap();
        let h = compose_predicted(&seq).unwrap();
        assert!(h.distance_up_to_phase(&LogicalUnitary::hadamard()) < 1e-12);
        let h2 = h.then_after(&h);
        assert!(h2.distance_up_to_phase(&LogicalUnitary::identity(2).unwrap()) < 1e-12);
        let col = h.matrix().column(0);
        assert!((col[0].norm() - col[1].norm()).abs() < 1e-15);
    }

    #[test]
    fn phase_square_bump_sign() {
        let base = SingleQubitParams::degenerate(0.5, 0.2, 0.1, 3);
        let s = synthesize_phase(0.8, 2.0, &base, 3, &PhaseProfile::Square { width_fraction: 0.5 }).unwrap();
        match s.schedule.pulse(ControlSlot::Gamma1(0)).unwrap() {
            Pulse::Step { value, baseline, t_on, t_off } => {
                // phi = -(height) * width
                assert!((-(value - baseline) * (t_off - t_on) - 0.8).abs() < 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(synthesize_phase(0.8, 0.0, &base, 3, &PhaseProfile::Triangle).is_err());
    }

    #[test]
    fn cphase_quantization() {
        let s = synthesize_cphase(2, 6, 1.0).unwrap();
        assert!((s.phi11.unwrap() / PI - (6.0 - 2.0 * 5f64.sqrt())).abs() < 1e-12);
        let mu = s.schedule.pulse(ControlSlot::Mu(0, 1)).unwrap().value(0.0);
        assert!((1.0 / mu - 5f64.sqrt()).abs() < 1e-12);
        assert!((s.schedule.duration() - 2.0 * PI / mu).abs() < 1e-12);
        let s = synthesize_cphase(1, 3, 0.7).unwrap();
        assert!((s.phi11.unwrap() - PI * (3.0 - 5f64.sqrt())).abs() < 1e-12);
        assert_eq!(synthesize_cphase(1, 2, 1.0), Err(Error::QuantizationInfeasible { m1: 1, m2: 2 }));
        assert!(synthesize_cphase(0, 3, 1.0).is_err());
        assert!(synthesize_cphase(1, 3, 0.0).is_err());
    }

    #[test]
    fn report_on_identity() {
        let p = ProjectedPropagator {
            logical: DMatrix::identity(4, 4),
            column_norms_sq: vec![1.0; 4],
            step_count: 0,
        };
        let r = extract_logical_report(&p, &LogicalUnitary::identity(4).unwrap()).unwrap();
        assert_eq!(r.fidelity, 1.0);
        assert_eq!(r.leakage, 0.0);
        assert_eq!(r.conditional_phase, Some(0.0));
        assert!(extract_logical_report(&p, &LogicalUnitary::identity(2).unwrap()).is_err());
    }

    #[test]
    fn global_phase_convention() {
        let u = LogicalUnitary::diagonal(&[0.3, 1.0]);
        let (v, ph) = u.remove_global_phase();
        assert!((ph - 0.3).abs() < 1e-15);
        assert!((v.matrix()[(0, 0)] - cz(1.0, 0.0)).norm() < 1e-15);
        // first entry vanishes: the (0, 1) entry fixes the phase
        let x = LogicalUnitary::rx(PI / 2.0);
        let (v, _) = x.remove_global_phase();
        assert!((v.matrix()[(0, 1)] - cz(1.0, 0.0)).norm() < 1e-15);
    }
}
