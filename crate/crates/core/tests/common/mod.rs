//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use boselat::model::QubitArraySpec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    r.random_range(lo..hi)
}

pub fn max_entry_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `exp(-i h t)` by scaling and squaring a truncated Taylor series.
pub fn expm_minus_i(h: &CMat, t: f64) -> CMat {
    let a = h * c(0.0, -t);
    let norm: f64 = a.iter().map(|z| z.norm()).sum::<f64>().max(1e-300);
    let squarings = norm.log2().ceil().max(0.0) as i32 + 1;
    let scaled = &a * c(0.5f64.powi(squarings), 0.0);
    let n = h.nrows();
    let mut term = CMat::identity(n, n);
    let mut sum = CMat::identity(n, n);
    for k in 1..30 {
        term = &term * &scaled * c(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Classical 4th-order Runge-Kutta for `psi' = -i H(t) psi` with fixed `dt`.
pub fn rk4<F: FnMut(f64) -> CMat>(mut h: F, psi0: &CVec, duration: f64, steps: usize) -> CVec {
    let dt = duration / steps as f64;
    let mi = c(0.0, -1.0);
    let mut psi = psi0.clone();
    for k in 0..steps {
        let t = k as f64 * dt;
        let h0 = h(t);
        let hm = h(t + 0.5 * dt);
        let h1 = h(t + dt);
        let k1 = &h0 * &psi * mi;
        let k2 = &hm * (&psi + &k1 * c(0.5 * dt, 0.0)) * mi;
        let k3 = &hm * (&psi + &k2 * c(0.5 * dt, 0.0)) * mi;
        let k4 = &h1 * (&psi + &k3 * c(dt, 0.0)) * mi;
        psi += (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * c(dt / 6.0, 0.0);
    }
    psi
}

/// All occupation vectors of `total` bosons on `modes` modes, by brute force over a grid.
pub fn brute_force_states(modes: usize, total: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let base = total as u64 + 1;
    let count = base.pow(modes as u32);
    for code in 0..count {
        let mut x = code;
        let mut occ = Vec::with_capacity(modes);
        for _ in 0..modes {
            occ.push((x % base) as u32);
            x /= base;
        }
        if occ.iter().sum::<u32>() == total {
            out.push(occ);
        }
    }
    out
}

/// `c_i^dagger c_j` applied to a Fock state: `(image, amplitude)` or `None` if it vanishes.
fn hop(occ: &[u32], i: usize, j: usize) -> Option<(Vec<u32>, f64)> {
    if occ[j] == 0 {
        return None;
    }
    let mut out = occ.to_vec();
    let lower = (out[j] as f64).sqrt();
    out[j] -= 1;
    let raise = (out[i] as f64 + 1.0).sqrt();
    out[i] += 1;
    Some((out, lower * raise))
}

/// Dual-rail register Hamiltonian assembled term by term on an explicit basis.
pub fn brute_force_register(spec: &QubitArraySpec, basis: &[Vec<u32>]) -> CMat {
    let index: HashMap<&[u32], usize> = basis.iter().enumerate().map(|(k, s)| (s.as_slice(), k)).collect();
    let d = basis.len();
    let mut h = CMat::zeros(d, d);
    let add_hop = |h: &mut CMat, i: usize, j: usize, rate: f64| {
        for (col, s) in basis.iter().enumerate() {
            for (x, y) in [(i, j), (j, i)] {
                if let Some((img, amp)) = hop(s, x, y) {
                    h[(index[img.as_slice()], col)] += c(rate * amp, 0.0);
                }
            }
        }
    };
    for (q, p) in spec.qubits().iter().enumerate() {
        let (a, b) = (2 * q, 2 * q + 1);
        for (k, s) in basis.iter().enumerate() {
            let (na, nb) = (s[a] as f64, s[b] as f64);
            h[(k, k)] += c(p.eps1 * na * na + p.eps2 * nb * nb + p.gamma1 * na + p.gamma2 * nb, 0.0);
        }
        add_hop(&mut h, a, b, p.tau);
    }
    for ((i, j), cp) in spec.couplings() {
        add_hop(&mut h, 2 * i, 2 * j, cp.mu);
        for (k, s) in basis.iter().enumerate() {
            h[(k, k)] += c(cp.chi * s[2 * i] as f64 * s[2 * j] as f64, 0.0);
        }
    }
    h
}
