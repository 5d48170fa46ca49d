//! Fixed-particle-number Fock sectors over a set of bosonic modes.
//!
//! A sector holds every occupation vector over `L` modes whose entries sum
//! to `N`. Its basis is listed in lexicographically descending order, so for
//! two modes `(a, b)` the state with `i` particles in mode `a` sits at
//! position `N - i`. Every matrix in this crate is laid out in that order.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest sector dimension built unless the caller passes another cap.
pub const DEFAULT_DIM_CAP: usize = 1_000_000;

/// Occupation numbers, one per lattice mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OccupationVector(Vec<u32>);

impl OccupationVector {
    pub fn new(occupations: Vec<u32>) -> Self {
        Self(occupations)
    }

    pub fn occupations(&self) -> &[u32] {
        &self.0
    }

    pub fn mode_count(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&n| u64::from(n)).sum()
    }

    pub fn get(&self, mode: usize) -> Result<u32> {
        self.0.get(mode).copied().ok_or(Error::IndexOutOfRange {
            index: mode,
            mode_count: self.0.len(),
        })
    }
}

impl fmt::Display for OccupationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (k, n) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ">")
    }
}

/// Basis of the subspace with `total_particles` bosons spread over `mode_count` modes.
#[derive(Debug, Clone)]
pub struct FockSector {
    mode_count: usize,
    total_particles: u32,
    basis: Vec<OccupationVector>,
    index: HashMap<OccupationVector, usize>,
}

impl PartialEq for FockSector {
    fn eq(&self, other: &Self) -> bool {
        // the basis is a pure function of (L, N)
        self.mode_count == other.mode_count && self.total_particles == other.total_particles
    }
}

impl FockSector {
    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn total_particles(&self) -> u32 {
        self.total_particles
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[OccupationVector] {
        &self.basis
    }

    pub fn state(&self, position: usize) -> Option<&OccupationVector> {
        self.basis.get(position)
    }

    /// Position of `state` in the basis, if it belongs to this sector.
    pub fn position(&self, state: &OccupationVector) -> Option<usize> {
        self.index.get(state).copied()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.mode_count {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: mode,
                mode_count: self.mode_count,
            })
        }
    }

    /// Diagonal values of `n_mode` and `n_mode^2` in basis order.
    pub fn number_expectations(&self, mode: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_mode(mode)?;
        let n: Vec<f64> = self
            .basis
            .iter()
            .map(|s| f64::from(s.occupations()[mode]))
            .collect();
        let n2 = n.iter().map(|&x| x * x).collect();
        Ok((n, n2))
    }

    /// Non-zero matrix elements `(row, col, amplitude)` of `c_i^dagger c_j`.
    pub fn hopping_entries(&self, to_mode: usize, from_mode: usize) -> Result<Vec<(usize, usize, f64)>> {
        let mut entries = Vec::new();
        for (col, state) in self.basis.iter().enumerate() {
            let (image, amp) = hopping_element(state, to_mode, from_mode)?;
            if amp != 0.0 {
                let row = self.index[&image];
                entries.push((row, col, amp));
            }
        }
        Ok(entries)
    }
}

/// `C(N + L - 1, L - 1)`, or `None` on overflow.
pub fn sector_dimension(mode_count: usize, total_particles: u32) -> Option<u128> {
    if mode_count == 0 {
        return None;
    }
    let k = (mode_count - 1) as u128;
    let n = u128::from(total_particles) + k;
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for step in 0..k {
        // acc * (n - step) / (step + 1) stays integral at every step
        acc = acc.checked_mul(n - step)? / (step + 1);
    }
    Some(acc)
}

/// Enumerate the sector with the default dimension cap.
pub fn enumerate_sector(mode_count: usize, total_particles: u32) -> Result<FockSector> {
    enumerate_sector_capped(mode_count, total_particles, DEFAULT_DIM_CAP)
}

pub fn enumerate_sector_capped(mode_count: usize, total_particles: u32, cap: usize) -> Result<FockSector> {
    if mode_count == 0 {
        return Err(Error::InvalidParameter("mode_count must be at least 1".into()));
    }
    let dimension = sector_dimension(mode_count, total_particles).ok_or(Error::Capacity {
        dimension: u128::MAX,
        cap,
    })?;
    if dimension > cap as u128 {
        return Err(Error::Capacity { dimension, cap });
    }

    let mut basis = Vec::with_capacity(dimension as usize);
    let mut current = vec![0u32; mode_count];
    fill_descending(&mut current, 0, total_particles, &mut basis);
    debug_assert_eq!(basis.len() as u128, dimension);

    let index = basis
        .iter()
        .enumerate()
        .map(|(k, s)| (s.clone(), k))
        .collect();
    Ok(FockSector {
        mode_count,
        total_particles,
        basis,
        index,
    })
}

fn fill_descending(current: &mut [u32], mode: usize, remaining: u32, out: &mut Vec<OccupationVector>) {
    if mode + 1 == current.len() {
        current[mode] = remaining;
        out.push(OccupationVector(current.to_vec()));
        return;
    }
    for k in (0..=remaining).rev() {
        current[mode] = k;
        fill_descending(current, mode + 1, remaining - k, out);
    }
    current[mode] = 0;
}

/// Image of `state` under `c_i^dagger c_j` and the amplitude `sqrt((n_i + 1) n_j)`.
///
/// An empty source mode gives amplitude 0 and returns the input unchanged.
pub fn hopping_element(state: &OccupationVector, to_mode: usize, from_mode: usize) -> Result<(OccupationVector, f64)> {
    let mode_count = state.mode_count();
    for mode in [to_mode, from_mode] {
        if mode >= mode_count {
            return Err(Error::IndexOutOfRange { index: mode, mode_count });
        }
    }
    if to_mode == from_mode {
        return Err(Error::SameMode(to_mode));
    }
    let n_from = state.0[from_mode];
    if n_from == 0 {
        return Ok((state.clone(), 0.0));
    }
    let n_to = state.0[to_mode];
    let mut image = state.0.clone();
    image[from_mode] -= 1;
    image[to_mode] += 1;
    let amplitude = ((f64::from(n_to) + 1.0) * f64::from(n_from)).sqrt();
    Ok((OccupationVector(image), amplitude))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn occ(v: &[u32]) -> OccupationVector {
        OccupationVector::new(v.to_vec())
    }

    #[test]
    fn two_modes_one_particle() {
        let s = enumerate_sector(2, 1).unwrap();
        assert_eq!(s.basis(), &[occ(&[1, 0]), occ(&[0, 1])]);
    }

    #[test]
    fn thirty_particles_in_a_qubit() {
        let s = enumerate_sector(2, 30).unwrap();
        assert_eq!(s.dimension(), 31);
        // |n; i> sits at position n - i
        for i in 0..=30u32 {
            assert_eq!(s.position(&occ(&[i, 30 - i])), Some((30 - i) as usize));
        }
    }

    #[test]
    fn four_modes_two_particles() {
        let s = enumerate_sector(4, 2).unwrap();
        assert_eq!(s.dimension(), 10);
        assert_eq!(sector_dimension(4, 2), Some(10));
        assert_eq!(s.basis()[0], occ(&[2, 0, 0, 0]));
        assert_eq!(s.basis()[9], occ(&[0, 0, 0, 2]));
    }

    #[test]
    fn single_mode_and_empty_sector() {
        assert_eq!(enumerate_sector(1, 7).unwrap().basis(), &[occ(&[7])]);
        assert_eq!(enumerate_sector(3, 0).unwrap().basis(), &[occ(&[0, 0, 0])]);
        assert!(matches!(enumerate_sector(0, 1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn capacity_error() {
        let err = enumerate_sector_capped(10, 10, 1000).unwrap_err();
        assert_eq!(err, Error::Capacity { dimension: 92378, cap: 1000 });
        assert!(matches!(enumerate_sector(60, 60), Err(Error::Capacity { .. })));
    }

    #[test]
    fn hopping_examples() {
        assert_eq!(hopping_element(&occ(&[0, 1]), 0, 1).unwrap(), (occ(&[1, 0]), 1.0));
        let (img, amp) = hopping_element(&occ(&[1, 1]), 0, 1).unwrap();
        assert_eq!(img, occ(&[2, 0]));
        assert!((amp - 2f64.sqrt()).abs() < 1e-15);
        let (img, amp) = hopping_element(&occ(&[2, 0]), 1, 0).unwrap();
        assert_eq!(img, occ(&[1, 1]));
        assert!((amp - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(hopping_element(&occ(&[3, 0]), 0, 1).unwrap(), (occ(&[3, 0]), 0.0));
    }

    #[test]
    fn hopping_errors() {
        assert_eq!(
            hopping_element(&occ(&[1, 0]), 2, 0),
            Err(Error::IndexOutOfRange { index: 2, mode_count: 2 })
        );
        assert_eq!(hopping_element(&occ(&[1, 0]), 1, 1), Err(Error::SameMode(1)));
    }

    #[test]
    fn number_diagonals() {
        let s = enumerate_sector(2, 1).unwrap();
        assert_eq!(s.number_expectations(0).unwrap(), (vec![1.0, 0.0], vec![1.0, 0.0]));
        let s = enumerate_sector(2, 2).unwrap();
        let (n, n2) = s.number_expectations(0).unwrap();
        assert_eq!(n, vec![2.0, 1.0, 0.0]);
        assert_eq!(n2, vec![4.0, 1.0, 0.0]);
        assert!(s.number_expectations(2).is_err());
    }

    #[test]
    fn display() {
        assert_eq!(occ(&[1, 0, 2]).to_string(), "|1,0,2>");
    }
}
