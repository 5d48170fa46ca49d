//! Time evolution on a single Fock sector.
//!
//! [`propagate`] splits `[0, T]` at the supplied breakpoints, steps each
//! segment on a uniform grid, and applies `exp(-i H(t_mid) dt)` per step
//! through a Hermitian eigendecomposition. Every step is exactly unitary, so
//! discretisation error shows up as phase error only. The closed forms for
//! the two-qubit `a`-mode sectors live here too and serve as oracles.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{FockSector, OccupationVector};
use crate::model::{build_single_qubit_hamiltonian_on, degeneracy_residual, max_abs, HermitianOperator, SingleQubitParams};
use crate::pulses::{degeneracy_tolerance, Pulse};

/// Default bound on `max|H| * dt`.
pub const STEP_NORM_BOUND: f64 = 0.05;
/// Norm tolerance for states.
pub const NORM_TOL: f64 = 1e-9;

const MAX_STEPS: u64 = 1 << 34;
const NORM_SCAN_POINTS: usize = 64;

/// Normalized amplitudes on a sector basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    sector: Arc<FockSector>,
    amplitudes: DVector<Complex64>,
}

impl QuantumState {
    pub fn new(sector: Arc<FockSector>, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != sector.dimension() {
            return Err(Error::DimensionMismatch {
                expected: sector.dimension(),
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { sector, amplitudes })
    }

    /// The Fock state `occupations` as a normalized vector.
    pub fn basis_state(sector: Arc<FockSector>, occupations: &OccupationVector) -> Result<Self> {
        let k = sector.position(occupations).ok_or_else(|| {
            Error::InconsistentLayout(format!(
                "{occupations} is not in the sector with {} modes and {} particles",
                sector.mode_count(),
                sector.total_particles()
            ))
        })?;
        let mut amps = DVector::zeros(sector.dimension());
        amps[k] = Complex64::new(1.0, 0.0);
        Ok(Self {
            sector,
            amplitudes: amps,
        })
    }

    pub fn sector(&self) -> &Arc<FockSector> {
        &self.sector
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, occupations: &OccupationVector) -> Option<Complex64> {
        self.sector.position(occupations).map(|k| self.amplitudes[k])
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }
}

/// Step control for [`propagate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PropagationOptions {
    /// Largest step; when `None` it follows `max|H| * dt <= 0.05`.
    pub dt: Option<f64>,
    /// Record every `stride`-th step (plus both endpoints).
    pub record_stride: Option<usize>,
    /// Times where `H(t)` may jump or kink; the grid lands on each of them.
    pub breakpoints: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub amplitudes: DVector<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub final_state: QuantumState,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
    pub unitarity_drift: f64,
    pub step_count: u64,
}

/// Several columns evolved together under the same schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnEvolution {
    pub columns: DMatrix<Complex64>,
    pub trajectory: Vec<(f64, DMatrix<Complex64>)>,
    pub step_count: u64,
}

impl ColumnEvolution {
    /// Largest `| ||column|| - 1 |`.
    pub fn unitarity_drift(&self) -> f64 {
        self.columns
            .column_iter()
            .map(|c| (c.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Evolve `psi0` from 0 to `duration`.
pub fn propagate<F>(hamiltonian_at: F, psi0: &QuantumState, duration: f64, options: &PropagationOptions) -> Result<PropagationResult>
where
    F: FnMut(f64) -> Result<HermitianOperator>,
{
    let cols = DMatrix::from_column_slice(psi0.amplitudes.len(), 1, psi0.amplitudes.as_slice());
    let evo = propagate_columns(hamiltonian_at, psi0.sector(), cols, duration, options)?;
    let amplitudes = evo.columns.column(0).into_owned();
    let unitarity_drift = (amplitudes.norm() - 1.0).abs();
    let trajectory = options.record_stride.map(|_| {
        evo.trajectory
            .iter()
            .map(|(t, m)| TrajectoryPoint {
                t: *t,
                amplitudes: m.column(0).into_owned(),
            })
            .collect()
    });
    Ok(PropagationResult {
        final_state: QuantumState {
            sector: psi0.sector.clone(),
            amplitudes,
        },
        trajectory,
        unitarity_drift,
        step_count: evo.step_count,
    })
}

/// Full propagator matrix on `sector`, assembled from the identity columns.
pub fn propagator_matrix<F>(hamiltonian_at: F, sector: &Arc<FockSector>, duration: f64, options: &PropagationOptions) -> Result<DMatrix<Complex64>>
where
    F: FnMut(f64) -> Result<HermitianOperator>,
{
    let dim = sector.dimension();
    Ok(propagate_columns(hamiltonian_at, sector, DMatrix::identity(dim, dim), duration, options)?.columns)
}

/// Evolve every column of `columns` (amplitudes on `sector`) from 0 to `duration`.
pub fn propagate_columns<F>(
    mut hamiltonian_at: F,
    sector: &Arc<FockSector>,
    columns: DMatrix<Complex64>,
    duration: f64,
    options: &PropagationOptions,
) -> Result<ColumnEvolution>
where
    F: FnMut(f64) -> Result<HermitianOperator>,
{
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidParameter(format!("duration {duration} must be positive")));
    }
    if columns.nrows() != sector.dimension() {
        return Err(Error::DimensionMismatch {
            expected: sector.dimension(),
            found: columns.nrows(),
        });
    }
    if let Some(dt) = options.dt {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::StepSizeInfeasible(format!("dt = {dt}")));
        }
    }
    let stride = options.record_stride.map(|s| s.max(1));

    let mut knots = vec![0.0];
    let mut inner: Vec<f64> = options
        .breakpoints
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < duration)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    knots.extend(inner);
    knots.push(duration);

    let mut eval = |t: f64| -> Result<DMatrix<Complex64>> {
        let h = hamiltonian_at(t)?;
        if h.sector().as_ref() != sector.as_ref() {
            return Err(Error::InconsistentLayout("hamiltonian lives on a different sector".into()));
        }
        Ok(h.into_matrix())
    };

    let mut state = columns;
    let mut trajectory = Vec::new();
    if stride.is_some() {
        trajectory.push((0.0, state.clone()));
    }
    let mut cache = StepCache::default();
    let mut total_steps: u64 = 0;

    for seg in knots.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = b - a;
        let mut bound = match options.dt {
            Some(_) => None,
            None => {
                let mut worst: f64 = 0.0;
                for k in 0..=NORM_SCAN_POINTS {
                    let t = a + len * (k as f64 + 0.5) / (NORM_SCAN_POINTS as f64 + 1.0);
                    worst = worst.max(max_abs(&eval(t)?));
                }
                Some(worst)
            }
        };
        'segment: loop {
            let steps = match (options.dt, bound) {
                (Some(dt), _) => (len / dt).ceil(),
                (None, Some(norm)) => (len * norm / STEP_NORM_BOUND).ceil(),
                (None, None) => unreachable!(),
            }
            .max(1.0);
            if !steps.is_finite() || steps > MAX_STEPS as f64 {
                return Err(Error::StepSizeInfeasible(format!("{steps} steps over a segment of length {len}")));
            }
            let steps = steps as u64;
            let dt = len / steps as f64;
            if dt <= 0.0 || a + dt == a {
                return Err(Error::StepSizeInfeasible(format!("dt = {dt} underflows at t = {a}")));
            }

            let mut local = state.clone();
            let mut local_traj = Vec::new();
            for k in 0..steps {
                let mid = a + dt * (k as f64 + 0.5);
                let h = eval(mid)?;
                if options.dt.is_none() {
                    let norm = max_abs(&h);
                    if norm * dt > STEP_NORM_BOUND * (1.0 + 1e-12) {
                        // the scan missed a peak; redo the segment with the larger bound
                        bound = Some(norm);
                        continue 'segment;
                    }
                }
                cache.apply(&h, dt, &mut local);
                let global = total_steps + k + 1;
                if let Some(s) = stride {
                    let last = k + 1 == steps;
                    if global % s as u64 == 0 || (last && b == duration) {
                        let t = if last { b } else { a + dt * (k + 1) as f64 };
                        local_traj.push((t, local.clone()));
                    }
                }
            }
            state = local;
            trajectory.extend(local_traj);
            total_steps += steps;
            break;
        }
    }

    Ok(ColumnEvolution {
        columns: state,
        trajectory,
        step_count: total_steps,
    })
}

/// Eigendecomposition of the last step Hamiltonian, reused while `H` and `dt` repeat.
#[derive(Default)]
struct StepCache {
    key: Option<(DMatrix<Complex64>, f64)>,
    step: Option<StepUnitary>,
}

enum StepUnitary {
    Diagonal { phases: Vec<Complex64> },
    Real { vectors: DMatrix<f64>, phases: Vec<Complex64> },
    Complex { vectors: DMatrix<Complex64>, phases: Vec<Complex64> },
}

impl StepCache {
    fn apply(&mut self, h: &DMatrix<Complex64>, dt: f64, cols: &mut DMatrix<Complex64>) {
        let hit = matches!(&self.key, Some((m, d)) if *d == dt && m == h);
        if !hit {
            self.step = Some(StepUnitary::new(h, dt));
            self.key = Some((h.clone(), dt));
        }
        self.step.as_ref().expect("step computed above").apply(cols);
    }
}

impl StepUnitary {
    fn new(h: &DMatrix<Complex64>, dt: f64) -> Self {
        let phase = |lambda: f64| Complex64::from_polar(1.0, -lambda * dt);
        let dim = h.nrows();
        let diagonal = (0..dim).all(|c| (0..dim).all(|r| r == c || h[(r, c)] == Complex64::new(0.0, 0.0)));
        if diagonal {
            StepUnitary::Diagonal {
                phases: h.diagonal().iter().map(|z| phase(z.re)).collect(),
            }
        } else if h.iter().all(|z| z.im == 0.0) {
            let eig = h.map(|z| z.re).symmetric_eigen();
            StepUnitary::Real {
                phases: eig.eigenvalues.iter().map(|&l| phase(l)).collect(),
                vectors: eig.eigenvectors,
            }
        } else {
            let eig = h.clone().symmetric_eigen();
            StepUnitary::Complex {
                phases: eig.eigenvalues.iter().map(|&l| phase(l)).collect(),
                vectors: eig.eigenvectors,
            }
        }
    }

    fn apply(&self, cols: &mut DMatrix<Complex64>) {
        match self {
            StepUnitary::Diagonal { phases } => {
                for (r, p) in phases.iter().enumerate() {
                    for c in 0..cols.ncols() {
                        cols[(r, c)] *= p;
                    }
                }
            }
            StepUnitary::Real { vectors, phases } => {
                let re = cols.map(|z| z.re);
                let im = cols.map(|z| z.im);
                let (pr, pi) = (vectors.tr_mul(&re), vectors.tr_mul(&im));
                let mut rot_re = pr.clone();
                let mut rot_im = pi.clone();
                for (r, p) in phases.iter().enumerate() {
                    for c in 0..cols.ncols() {
                        let z = Complex64::new(pr[(r, c)], pi[(r, c)]) * p;
                        rot_re[(r, c)] = z.re;
                        rot_im[(r, c)] = z.im;
                    }
                }
                let (nr, ni) = (vectors * rot_re, vectors * rot_im);
                for (z, (r, i)) in cols.iter_mut().zip(nr.iter().zip(ni.iter())) {
                    *z = Complex64::new(*r, *i);
                }
            }
            StepUnitary::Complex { vectors, phases } => {
                let mut proj = vectors.ad_mul(cols);
                for (r, p) in phases.iter().enumerate() {
                    for c in 0..proj.ncols() {
                        proj[(r, c)] *= p;
                    }
                }
                *cols = vectors * proj;
            }
        }
    }
}

/// `exp(-i H t)` for a time-independent operator, via its eigendecomposition.
pub fn exp_hermitian(h: &HermitianOperator, t: f64) -> DMatrix<Complex64> {
    let dim = h.matrix().nrows();
    let mut u = DMatrix::identity(dim, dim);
    StepUnitary::new(h.matrix(), t).apply(&mut u);
    u
}

/// Closed-form single-excitation propagator `exp(-i eps T) (cos w T - i sigma_x sin w T)`
/// with `w T = int_0^T mu dt`, on `(|10>, |01>)`.
pub fn analytic_n1(eps: f64, mu_pulse: &Pulse, duration: f64) -> DMatrix<Complex64> {
    let angle = mu_pulse.integral(0.0, duration);
    let global = Complex64::from_polar(1.0, -eps * duration);
    let c = global * angle.cos();
    let s = global * Complex64::new(0.0, -angle.sin());
    DMatrix::from_row_slice(2, 2, &[c, s, s, c])
}

/// Amplitudes on `(|20>, |11>, |02>)` at time `t` starting from `|11>` under constant `mu`.
pub fn analytic_n2_constant(eps: f64, mu: f64, t: f64) -> [Complex64; 3] {
    let omega = (eps * eps + 4.0 * mu * mu).sqrt();
    let global = Complex64::from_polar(1.0, -3.0 * eps * t);
    if omega == 0.0 {
        return [Complex64::new(0.0, 0.0), global, Complex64::new(0.0, 0.0)];
    }
    let (s, c) = (omega * t).sin_cos();
    let stay = global * Complex64::new(c, eps / omega * s);
    let hop = -global * Complex64::new(0.0, mu * 2f64.sqrt() / omega * s);
    [hop, stay, hop]
}

/// Outcome of a full-sector Rx run started from logical `|0>`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelReduction {
    /// Population outside `span{|n;0>, |n;1>}` at the end of the window.
    pub population_leaked: f64,
    /// Rotation angle of the computational block, `sqrt(n) int tau dt`.
    pub effective_angle: f64,
    pub result: PropagationResult,
}

/// Propagate `|n;0>` through the full `n + 1` level qubit under `tau_pulse` and
/// measure how far the dynamics leaves the two degenerate logical levels.
pub fn check_two_level_reduction(
    params: &SingleQubitParams,
    n: u32,
    tau_pulse: &Pulse,
    duration: f64,
    options: &PropagationOptions,
) -> Result<TwoLevelReduction> {
    if n == 0 {
        return Err(Error::InvalidParameter("the logical |1> needs at least one particle".into()));
    }
    let residual = degeneracy_residual(params, n);
    if residual.abs() > degeneracy_tolerance(params, n) {
        return Err(Error::DegeneracyViolated(residual));
    }
    if params.gap() <= 0.0 {
        return Err(Error::ZeroGap(params.gap()));
    }
    tau_pulse.validate()?;
    let sector = Arc::new(crate::fock::enumerate_sector(2, n)?);
    let psi0 = QuantumState::basis_state(sector.clone(), &OccupationVector::new(vec![0, n]))?;
    let mut opts = options.clone();
    opts.breakpoints.extend(tau_pulse.breakpoints());
    let result = propagate(
        |t| {
            let p = SingleQubitParams {
                tau: tau_pulse.value(t),
                ..*params
            };
            build_single_qubit_hamiltonian_on(&p, &sector)
        },
        &psi0,
        duration,
        &opts,
    )?;
    let amps = result.final_state.amplitudes();
    // |n;i> sits at position n - i
    let kept = amps[n as usize].norm_sqr() + amps[n as usize - 1].norm_sqr();
    let total = amps.norm_squared();
    Ok(TwoLevelReduction {
        population_leaked: (total - kept).max(0.0),
        effective_angle: f64::from(n).sqrt() * tau_pulse.integral(0.0, duration),
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::enumerate_sector;
    use crate::model::build_two_qubit_hamiltonian;
    use std::f64::consts::PI;

    fn zero_h(sector: &Arc<FockSector>) -> Result<HermitianOperator> {
        let d = sector.dimension();
        HermitianOperator::new(sector.clone(), DMatrix::zeros(d, d))
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let sector = Arc::new(enumerate_sector(3, 2).unwrap());
        let psi0 = QuantumState::basis_state(sector.clone(), &OccupationVector::new(vec![1, 0, 1])).unwrap();
        let r = propagate(|_| zero_h(&sector), &psi0, 3.7, &PropagationOptions::default()).unwrap();
        assert_eq!(r.final_state, psi0);
        assert_eq!(r.step_count, 1);
    }

    #[test]
    fn swap_half_period_flips_sign() {
        // eps = 0, mu T = pi: |01> -> -|01>
        let h = build_two_qubit_hamiltonian(0.0, 1.0, 1).unwrap();
        let sector = h.sector().clone();
        let psi0 = QuantumState::basis_state(sector, &OccupationVector::new(vec![0, 1])).unwrap();
        let r = propagate(|_| Ok(h.clone()), &psi0, PI, &PropagationOptions::default()).unwrap();
        let a = r.final_state.amplitudes();
        assert!((a[1] + Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(a[0].norm() < 1e-12);
        assert!(r.unitarity_drift < 1e-12);
    }

    #[test]
    fn diagonal_evolution_accumulates_phase() {
        let sector = Arc::new(enumerate_sector(2, 2).unwrap());
        let pulse = Pulse::step_on(1.5, 0.3, 0.9, 0.2).unwrap();
        let params = |t: f64| SingleQubitParams {
            eps1: 0.4,
            eps2: 0.1,
            gamma1: pulse.value(t),
            gamma2: -0.3,
            tau: 0.0,
        };
        let psi0 = QuantumState::basis_state(sector.clone(), &OccupationVector::new(vec![1, 1])).unwrap();
        let opts = PropagationOptions {
            breakpoints: pulse.breakpoints(),
            ..Default::default()
        };
        let r = propagate(|t| build_single_qubit_hamiltonian_on(&params(t), &sector), &psi0, 1.2, &opts).unwrap();
        // E_1 = eps1 + eps2 + gamma1 + gamma2, integrated exactly
        let int_e = (0.4 + 0.1 - 0.3) * 1.2 + pulse.integral(0.0, 1.2);
        let want = Complex64::from_polar(1.0, -int_e);
        let got = r.final_state.amplitudes()[1];
        assert!((got - want).norm() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn analytic_n1_examples() {
        let u = analytic_n1(0.7, &Pulse::constant(1.0), 2.0 * PI);
        let want = Complex64::from_polar(1.0, -0.7 * 2.0 * PI);
        assert!((u[(0, 0)] - want).norm() < 1e-12 && u[(0, 1)].norm() < 1e-12);
        let u = analytic_n1(0.0, &Pulse::constant(0.5), PI);
        assert!(u[(0, 0)].norm() < 1e-15);
        assert!((u[(0, 1)] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        let u = analytic_n1(0.3, &Pulse::constant(0.0), 1.0);
        assert_eq!(u[(0, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn analytic_n2_examples() {
        let a = analytic_n2_constant(0.8, 0.3, 0.0);
        assert_eq!(a[1], Complex64::new(1.0, 0.0));
        assert_eq!(a[0], Complex64::new(0.0, 0.0));
        let (eps, mu) = (1.0, 0.5);
        let omega = (eps * eps + 4.0 * mu * mu as f64).sqrt();
        let t = 3.0 * PI / omega;
        let a = analytic_n2_constant(eps, mu, t);
        let want = -Complex64::from_polar(1.0, -3.0 * eps * t);
        assert!((a[1] - want).norm() < 1e-12);
        assert!(a[0].norm() < 1e-12 && a[2].norm() < 1e-12);
    }

    #[test]
    fn two_level_reduction_without_pulse() {
        let p = SingleQubitParams::degenerate(1.0, 1.0, 0.0, 4);
        let r = check_two_level_reduction(&p, 4, &Pulse::constant(0.0), 2.0, &PropagationOptions::default()).unwrap();
        assert_eq!(r.population_leaked, 0.0);
        assert_eq!(r.effective_angle, 0.0);
    }

    #[test]
    fn two_level_reduction_errors() {
        let mut p = SingleQubitParams::degenerate(1.0, 1.0, 0.0, 4);
        let pulse = Pulse::constant(0.1);
        let opts = PropagationOptions::default();
        assert!(matches!(check_two_level_reduction(&p, 3, &pulse, 1.0, &opts), Err(Error::DegeneracyViolated(_))));
        p = SingleQubitParams::degenerate(1.0, -1.0, 0.0, 4);
        assert!(matches!(check_two_level_reduction(&p, 4, &pulse, 1.0, &opts), Err(Error::ZeroGap(_))));
    }

    #[test]
    fn bad_inputs() {
        let sector = Arc::new(enumerate_sector(2, 1).unwrap());
        let psi0 = QuantumState::basis_state(sector.clone(), &OccupationVector::new(vec![1, 0])).unwrap();
        let opts = PropagationOptions {
            dt: Some(0.0),
            ..Default::default()
        };
        assert!(matches!(propagate(|_| zero_h(&sector), &psi0, 1.0, &opts), Err(Error::StepSizeInfeasible(_))));
        let other = Arc::new(enumerate_sector(2, 2).unwrap());
        assert!(matches!(
            propagate(|_| zero_h(&other), &psi0, 1.0, &PropagationOptions::default()),
            Err(Error::InconsistentLayout(_))
        ));
        assert!(QuantumState::new(sector.clone(), DVector::from_element(2, Complex64::new(1.0, 0.0))).is_err());
        assert!(QuantumState::basis_state(sector, &OccupationVector::new(vec![2, 0])).is_err());
    }

    #[test]
    fn trajectory_has_endpoints() {
        let h = build_two_qubit_hamiltonian(1.0, 0.5, 2).unwrap();
        let psi0 = QuantumState::basis_state(h.sector().clone(), &OccupationVector::new(vec![1, 1])).unwrap();
        let opts = PropagationOptions {
            dt: Some(0.01),
            record_stride: Some(7),
            breakpoints: vec![0.5],
        };
        let r = propagate(|_| Ok(h.clone()), &psi0, 1.0, &opts).unwrap();
        let tr = r.trajectory.unwrap();
        assert_eq!(tr.first().unwrap().t, 0.0);
        assert_eq!(tr.last().unwrap().t, 1.0);
        assert!(tr.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(r.step_count, 100);
    }
}
