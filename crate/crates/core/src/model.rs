//! Hamiltonian assembly on Fock sectors.
//!
//! Energies are dimensionless with `hbar = 1`. A dual-rail qubit `q` owns the
//! mode pair `(a_q, b_q)` at global indices `(2q, 2q + 1)`; its logical value
//! is the occupation of `a_q`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{enumerate_sector, FockSector};

/// Relative Hermiticity tolerance applied to every operator.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Parameters of one dual-rail qubit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleQubitParams {
    pub eps1: f64,
    pub eps2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    #[serde(default)]
    pub tau: f64,
}

impl SingleQubitParams {
    /// Parameters with `tau = 0` and `gamma1` solved so that `E_0 = E_1` in sector `n`.
    pub fn degenerate(eps1: f64, eps2: f64, gamma2: f64, n: u32) -> Self {
        let gamma1 = gamma2 - eps1 + (2.0 * f64::from(n) - 1.0) * eps2;
        Self {
            eps1,
            eps2,
            gamma1,
            gamma2,
            tau: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.eps1, self.eps2, self.gamma1, self.gamma2, self.tau]
            .iter()
            .all(|x| x.is_finite())
    }

    /// `E_2 - E_1 = 2 (eps1 + eps2)` when the degeneracy condition holds.
    pub fn gap(&self) -> f64 {
        2.0 * (self.eps1 + self.eps2)
    }

    /// Residual of the degeneracy condition, zero iff `E_0 = E_1`.
    pub fn degeneracy_residual(&self, n: u32) -> f64 {
        degeneracy_residual(self, n)
    }
}

/// Inter-qubit couplings through the `a` modes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub chi: f64,
}

/// A register of dual-rail qubits. Each unordered pair carries at most one coupling.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QubitArraySpec {
    qubits: Vec<SingleQubitParams>,
    couplings: BTreeMap<(usize, usize), Coupling>,
}

impl QubitArraySpec {
    pub fn new(qubits: Vec<SingleQubitParams>) -> Result<Self> {
        if qubits.is_empty() {
            return Err(Error::InvalidParameter("a qubit array needs at least one qubit".into()));
        }
        if let Some(q) = qubits.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter(format!("qubit {q} has non-finite parameters")));
        }
        Ok(Self {
            qubits,
            couplings: BTreeMap::new(),
        })
    }

    /// Set the coupling for the pair `{i, j}`; the map is symmetric.
    pub fn with_coupling(mut self, i: usize, j: usize, coupling: Coupling) -> Result<Self> {
        self.set_coupling(i, j, coupling)?;
        Ok(self)
    }

    pub fn set_coupling(&mut self, i: usize, j: usize, coupling: Coupling) -> Result<()> {
        let key = pair_key(i, j, self.qubits.len())?;
        if !(coupling.mu.is_finite() && coupling.chi.is_finite()) {
            return Err(Error::InvalidParameter(format!("coupling ({i},{j}) is not finite")));
        }
        self.couplings.insert(key, coupling);
        Ok(())
    }

    pub fn qubit_count(&self) -> usize {
        self.qubits.len()
    }

    pub fn mode_count(&self) -> usize {
        2 * self.qubits.len()
    }

    pub fn qubit(&self, q: usize) -> Option<&SingleQubitParams> {
        self.qubits.get(q)
    }

    pub fn qubit_mut(&mut self, q: usize) -> Option<&mut SingleQubitParams> {
        self.qubits.get_mut(q)
    }

    pub fn qubits(&self) -> &[SingleQubitParams] {
        &self.qubits
    }

    pub fn coupling(&self, i: usize, j: usize) -> Coupling {
        let key = (i.min(j), i.max(j));
        self.couplings.get(&key).copied().unwrap_or_default()
    }

    pub fn coupling_mut(&mut self, i: usize, j: usize) -> Result<&mut Coupling> {
        let key = pair_key(i, j, self.qubits.len())?;
        Ok(self.couplings.entry(key).or_default())
    }

    pub fn couplings(&self) -> impl Iterator<Item = ((usize, usize), Coupling)> + '_ {
        self.couplings.iter().map(|(&k, &v)| (k, v))
    }

    /// Generic lattice terms for this register.
    pub fn lattice_terms(&self) -> LatticeTerms {
        let mut terms = LatticeTerms::new(self.mode_count());
        for (q, p) in self.qubits.iter().enumerate() {
            let (a, b) = (2 * q, 2 * q + 1);
            terms.density.push((a, a, p.eps1));
            terms.density.push((b, b, p.eps2));
            terms.onsite.push((a, p.gamma1));
            terms.onsite.push((b, p.gamma2));
            terms.hopping.push((a, b, Complex64::new(p.tau, 0.0)));
        }
        for (&(i, j), c) in &self.couplings {
            terms.hopping.push((2 * i, 2 * j, Complex64::new(c.mu, 0.0)));
            terms.density.push((2 * i, 2 * j, c.chi));
        }
        terms
    }
}

fn pair_key(i: usize, j: usize, qubit_count: usize) -> Result<(usize, usize)> {
    if i == j {
        return Err(Error::InconsistentLayout(format!("self-coupling on qubit {i}")));
    }
    for q in [i, j] {
        if q >= qubit_count {
            return Err(Error::InconsistentLayout(format!(
                "coupling references qubit {q} but the array has {qubit_count}"
            )));
        }
    }
    Ok((i.min(j), i.max(j)))
}

/// Terms of a generalized Bose-Hubbard Hamiltonian
///
/// `H = sum U_ij n_i n_j + sum g_i n_i + sum (t_ij c_i^dagger c_j + h.c.)`.
///
/// Density terms are taken as listed (no conjugate is added); each hopping
/// entry contributes itself and its Hermitian conjugate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatticeTerms {
    pub mode_count: usize,
    pub density: Vec<(usize, usize, f64)>,
    pub onsite: Vec<(usize, f64)>,
    pub hopping: Vec<(usize, usize, Complex64)>,
}

impl LatticeTerms {
    pub fn new(mode_count: usize) -> Self {
        Self {
            mode_count,
            ..Default::default()
        }
    }

    pub fn build(&self, sector: &Arc<FockSector>) -> Result<HermitianOperator> {
        if sector.mode_count() != self.mode_count {
            return Err(Error::InconsistentLayout(format!(
                "terms act on {} modes but the sector has {}",
                self.mode_count,
                sector.mode_count()
            )));
        }
        let dim = sector.dimension();
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (k, state) in sector.basis().iter().enumerate() {
            let occ = state.occupations();
            let mut diag = 0.0;
            for &(i, j, u) in &self.density {
                let (ni, nj) = (occupation(occ, i)?, occupation(occ, j)?);
                diag += u * (ni * nj) as f64;
            }
            for &(i, g) in &self.onsite {
                diag += g * occupation(occ, i)? as f64;
            }
            m[(k, k)] = Complex64::new(diag, 0.0);
        }
        for &(i, j, t) in &self.hopping {
            if t == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (row, col, amp) in sector.hopping_entries(i, j)? {
                m[(row, col)] += t * amp;
                m[(col, row)] += t.conj() * amp;
            }
        }
        HermitianOperator::new(sector.clone(), m)
    }
}

fn occupation(occ: &[u32], mode: usize) -> Result<u64> {
    occ.get(mode).map(|&n| u64::from(n)).ok_or(Error::IndexOutOfRange {
        index: mode,
        mode_count: occ.len(),
    })
}

/// Dense Hermitian matrix on a sector basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    sector: Arc<FockSector>,
    matrix: DMatrix<Complex64>,
}

impl HermitianOperator {
    pub fn new(sector: Arc<FockSector>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = sector.dimension();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        let deviation = hermiticity_deviation(&matrix);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NonHermitian { deviation });
        }
        Ok(Self { sector, matrix })
    }

    pub fn sector(&self) -> &Arc<FockSector> {
        &self.sector
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

pub(crate) fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max|H - H^dagger| / max|H|`, or 0 for the zero matrix.
pub fn hermiticity_deviation(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let scale = max_abs(m);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for r in 0..m.nrows() {
        for c in r..m.ncols() {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst / scale
}

/// Degeneracy residual `eps1 - (2n - 1) eps2 + gamma1 - gamma2`.
pub fn degeneracy_residual(params: &SingleQubitParams, n: u32) -> f64 {
    params.eps1 - (2.0 * f64::from(n) - 1.0) * params.eps2 + params.gamma1 - params.gamma2
}

/// Single-qubit Hamiltonian on the sector of `n` particles in the `(a, b)` pair.
pub fn build_single_qubit_hamiltonian(params: &SingleQubitParams, n: u32) -> Result<HermitianOperator> {
    let sector = Arc::new(enumerate_sector(2, n)?);
    build_single_qubit_hamiltonian_on(params, &sector)
}

pub fn build_single_qubit_hamiltonian_on(params: &SingleQubitParams, sector: &Arc<FockSector>) -> Result<HermitianOperator> {
    let spec = QubitArraySpec::new(vec![*params])?;
    spec.lattice_terms().build(sector)
}

/// Diagonal energies `E_i`, `i = 0..=n`, indexed by the `a`-mode occupation.
pub fn energy_levels(params: &SingleQubitParams, n: u32) -> Result<Vec<f64>> {
    if params.tau != 0.0 {
        return Err(Error::NonDiagonal(params.tau));
    }
    Ok((0..=u64::from(n))
        .map(|i| {
            let j = u64::from(n) - i;
            params.eps1 * (i * i) as f64 + params.eps2 * (j * j) as f64 + params.gamma1 * i as f64 + params.gamma2 * j as f64
        })
        .collect())
}

/// Two-qubit `a`-mode Hamiltonian `eps (n_i^2 + n_j^2) + mu (a_i^dagger a_j + h.c.)`
/// on the sector with `n` particles shared by the two `a` modes.
pub fn build_two_qubit_hamiltonian(eps: f64, mu: f64, n: u32) -> Result<HermitianOperator> {
    build_two_qubit_sector_hamiltonian(eps, mu, 0.0, n)
}

/// As [`build_two_qubit_hamiltonian`] plus a Kerr term `chi n_i n_j`.
pub fn build_two_qubit_sector_hamiltonian(eps: f64, mu: f64, chi: f64, n: u32) -> Result<HermitianOperator> {
    if n > 2 {
        return Err(Error::UnsupportedSector(n as usize));
    }
    let sector = Arc::new(enumerate_sector(2, n)?);
    let mut terms = LatticeTerms::new(2);
    terms.density.push((0, 0, eps));
    terms.density.push((1, 1, eps));
    terms.density.push((0, 1, chi));
    terms.hopping.push((0, 1, Complex64::new(mu, 0.0)));
    terms.build(&sector)
}

/// Full register Hamiltonian: single-qubit terms, `a`-mode tunneling and Kerr couplings.
pub fn build_lattice_hamiltonian(spec: &QubitArraySpec, sector: &Arc<FockSector>) -> Result<HermitianOperator> {
    if sector.mode_count() != spec.mode_count() {
        return Err(Error::InconsistentLayout(format!(
            "{} qubits need {} modes, sector has {}",
            spec.qubit_count(),
            spec.mode_count(),
            sector.mode_count()
        )));
    }
    spec.lattice_terms().build(sector)
}

/// Kerr gate `diag(1, 1, 1, exp(-i chi T))` on `(|00>, |01>, |10>, |11>)`.
pub fn kerr_unitary(chi: f64, duration: f64) -> Result<DMatrix<Complex64>> {
    if duration < 0.0 {
        return Err(Error::InvalidParameter(format!("duration {duration} is negative")));
    }
    let mut u = DMatrix::<Complex64>::identity(4, 4);
    u[(3, 3)] = Complex64::from_polar(1.0, -chi * duration);
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::OccupationVector;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn pure_hopping_is_sigma_x() {
        let p = SingleQubitParams {
            tau: 1.0,
            ..Default::default()
        };
        let h = build_single_qubit_hamiltonian(&p, 1).unwrap();
        assert_eq!(h.matrix(), &DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]));
    }

    #[test]
    fn diagonal_layout_two_particles() {
        let p = SingleQubitParams {
            eps1: 1.0,
            eps2: 1.0,
            ..Default::default()
        };
        let h = build_single_qubit_hamiltonian(&p, 2).unwrap();
        let diag: Vec<f64> = h.matrix().diagonal().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![4.0, 2.0, 4.0]);
        assert_eq!(energy_levels(&p, 2).unwrap(), vec![4.0, 2.0, 4.0]);
    }

    #[test]
    fn sqrt_two_off_diagonals() {
        let p = SingleQubitParams {
            tau: 0.7,
            ..Default::default()
        };
        let h = build_single_qubit_hamiltonian(&p, 2).unwrap();
        let s = 2f64.sqrt() * 0.7;
        assert!((h.matrix()[(0, 1)].re - s).abs() < 1e-15);
        assert!((h.matrix()[(1, 2)].re - s).abs() < 1e-15);
        assert_eq!(h.matrix()[(0, 2)], c(0.0));
    }

    #[test]
    fn energy_levels_reject_tunneling() {
        let p = SingleQubitParams {
            tau: 0.1,
            ..Default::default()
        };
        assert_eq!(energy_levels(&p, 3), Err(Error::NonDiagonal(0.1)));
        assert_eq!(energy_levels(&SingleQubitParams::default(), 5).unwrap(), vec![0.0; 6]);
    }

    #[test]
    fn degeneracy_solves_gamma() {
        let p = SingleQubitParams::degenerate(1.0, 1.0, 0.0, 1);
        assert_eq!(p.gamma1, 0.0);
        assert_eq!(degeneracy_residual(&p, 1), 0.0);
        let e = energy_levels(&p, 1).unwrap();
        assert_eq!(e[0], e[1]);
        assert_eq!(degeneracy_residual(&SingleQubitParams::default(), 9), 0.0);
    }

    #[test]
    fn two_qubit_blocks() {
        let h1 = build_two_qubit_hamiltonian(1.0, 0.5, 1).unwrap();
        assert_eq!(h1.matrix(), &DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.5), c(0.5), c(1.0)]));
        let h2 = build_two_qubit_hamiltonian(1.0, 1.0, 2).unwrap();
        let r = 2f64.sqrt();
        let want = DMatrix::from_row_slice(3, 3, &[c(4.0), c(r), c(0.0), c(r), c(2.0), c(r), c(0.0), c(r), c(4.0)]);
        assert!((h2.matrix() - want).iter().all(|z| z.norm() < 1e-15));
        let h0 = build_two_qubit_hamiltonian(1.0, 1.0, 0).unwrap();
        assert_eq!(h0.matrix(), &DMatrix::from_element(1, 1, c(0.0)));
        assert_eq!(build_two_qubit_hamiltonian(1.0, 1.0, 3), Err(Error::UnsupportedSector(3)));
    }

    #[test]
    fn single_qubit_lattice_matches() {
        let p = SingleQubitParams {
            eps1: 0.3,
            eps2: -0.2,
            gamma1: 1.1,
            gamma2: 0.4,
            tau: 0.25,
        };
        let spec = QubitArraySpec::new(vec![p]).unwrap();
        let sector = Arc::new(enumerate_sector(2, 4).unwrap());
        let a = build_lattice_hamiltonian(&spec, &sector).unwrap();
        let b = build_single_qubit_hamiltonian(&p, 4).unwrap();
        assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn inter_qubit_hopping_block() {
        let spec = QubitArraySpec::new(vec![SingleQubitParams::default(); 2])
            .unwrap()
            .with_coupling(0, 1, Coupling { mu: 1.0, chi: 0.0 })
            .unwrap();
        let sector = Arc::new(enumerate_sector(4, 1).unwrap());
        let h = build_lattice_hamiltonian(&spec, &sector).unwrap();
        let a1 = sector.position(&OccupationVector::new(vec![1, 0, 0, 0])).unwrap();
        let a2 = sector.position(&OccupationVector::new(vec![0, 0, 1, 0])).unwrap();
        assert_eq!(h.matrix()[(a1, a2)], c(1.0));
        assert_eq!(h.matrix()[(a2, a1)], c(1.0));
        assert_eq!(h.matrix()[(a1, a1)], c(0.0));
        let b1 = sector.position(&OccupationVector::new(vec![0, 1, 0, 0])).unwrap();
        assert_eq!(h.matrix()[(a1, b1)], c(0.0));
    }

    #[test]
    fn kerr_diagonal_contribution() {
        let spec = QubitArraySpec::new(vec![SingleQubitParams::default(); 2])
            .unwrap()
            .with_coupling(1, 0, Coupling { mu: 0.0, chi: 1.0 })
            .unwrap();
        let sector = Arc::new(enumerate_sector(4, 2).unwrap());
        let h = build_lattice_hamiltonian(&spec, &sector).unwrap();
        let k = sector.position(&OccupationVector::new(vec![1, 0, 1, 0])).unwrap();
        assert_eq!(h.matrix()[(k, k)], c(1.0));
        assert_eq!(spec.coupling(0, 1).chi, 1.0);
    }

    #[test]
    fn layout_errors() {
        let spec = QubitArraySpec::new(vec![SingleQubitParams::default(); 2]).unwrap();
        let sector = Arc::new(enumerate_sector(3, 1).unwrap());
        assert!(matches!(build_lattice_hamiltonian(&spec, &sector), Err(Error::InconsistentLayout(_))));
        assert!(matches!(spec.clone().with_coupling(1, 1, Coupling::default()), Err(Error::InconsistentLayout(_))));
        assert!(matches!(spec.with_coupling(0, 2, Coupling::default()), Err(Error::InconsistentLayout(_))));
        assert!(QubitArraySpec::new(vec![]).is_err());
    }

    #[test]
    fn kerr_unitary_values() {
        let u = kerr_unitary(1.0, std::f64::consts::PI).unwrap();
        assert!((u[(3, 3)] - c(-1.0)).norm() < 1e-15);
        assert_eq!(kerr_unitary(2.0, 0.0).unwrap(), DMatrix::identity(4, 4));
        let u = kerr_unitary(0.5, std::f64::consts::PI).unwrap();
        assert!((u[(3, 3)] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!(kerr_unitary(1.0, -1.0).is_err());
    }

    #[test]
    fn non_hermitian_rejected() {
        let sector = Arc::new(enumerate_sector(2, 1).unwrap());
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert!(matches!(HermitianOperator::new(sector.clone(), m), Err(Error::NonHermitian { .. })));
        let m = DMatrix::zeros(3, 3);
        assert!(matches!(HermitianOperator::new(sector, m), Err(Error::DimensionMismatch { .. })));
    }
}
