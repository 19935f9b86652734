//! Phase-space analysis of the motional state.
//!
//! `W(x, p) = (1/π) Tr[ρ D(α) Π D(α)†]` with `α = (x + ip)/√2` and `Π` the
//! Fock parity. Rather than exponentiating `D(α)` per grid point, the matrix
//! elements `Tr[|m⟩⟨n| D Π D†]` are generated by the Laguerre three-term
//! recursion, O(D²) per point.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{hermite_functions, HybridFockState, ModelParams};
use crate::decoherence::HybridDensity;
use crate::linalg;
use crate::C64;

/// Reduced density matrix of the oscillator over the Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionalDensity {
    pub rho: Array2<C64>,
}

impl MotionalDensity {
    pub fn pure(amps: &Array1<C64>) -> Self {
        let d = amps.len();
        Self {
            rho: Array2::from_shape_fn((d, d), |(m, n)| amps[m] * amps[n].conj()),
        }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.rho.diag().iter().map(|z| z.re).sum()
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_mn|² for Hermitian ρ
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::frobenius_norm((&self.rho - &linalg::dagger(&self.rho)).view())
    }

    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        linalg::is_positive_semidefinite(&self.rho, tol)
    }

    /// Population of the top 10% of Fock levels.
    pub fn tail_mass(&self) -> f64 {
        let d = self.dim();
        (d - d.div_ceil(10)..d).map(|n| self.rho[[n, n]].re).sum()
    }

    /// `⟨x|ρ|x⟩`
    pub fn position_density(&self, x: f64) -> f64 {
        let h = hermite_functions(x, self.dim());
        self.rho
            .outer_iter()
            .zip(&h)
            .map(|(row, hm)| row.iter().zip(&h).map(|(r, hn)| r * hn).sum::<C64>() * hm)
            .sum::<C64>()
            .re
    }
}

/// Partial trace over the coin of a pure hybrid state.
pub fn trace_out_coin(state: &HybridFockState) -> MotionalDensity {
    let mut down = MotionalDensity::pure(&state.down.amps);
    down.rho += &MotionalDensity::pure(&state.up.amps).rho;
    down
}

/// Partial trace over the coin of a hybrid density matrix.
pub fn trace_out_coin_density(rho: &HybridDensity) -> MotionalDensity {
    let sites = rho.sites();
    let m = rho.matrix();
    MotionalDensity {
        rho: Array2::from_shape_fn((sites, sites), |(i, j)| {
            m[[i, j]] + m[[sites + i, sites + j]]
        }),
    }
}

/// Sampled Wigner function; `values[[ip, ix]] = W(xs[ix], ps[ip])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Population of the top 10% of Fock levels of the input; values near
    /// the grid edge are unreliable when this exceeds the truncation budget.
    pub tail_mass: f64,
    /// Largest imaginary part discarded when taking the real value.
    pub max_imaginary: f64,
}

impl WignerGrid {
    pub fn dx(&self) -> f64 {
        spacing(&self.xs)
    }

    pub fn dp(&self) -> f64 {
        spacing(&self.ps)
    }

    /// `Σ W Δx Δp`
    pub fn riemann_sum(&self) -> f64 {
        self.values.iter().flatten().sum::<f64>() * self.dx() * self.dp()
    }

    /// `Σ_p W(x, p) Δp` for each `x` in `xs`.
    pub fn x_marginal(&self) -> Vec<f64> {
        let dp = self.dp();
        (0..self.xs.len())
            .map(|ix| self.values.iter().map(|row| row[ix]).sum::<f64>() * dp)
            .collect()
    }

    pub fn min(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(x, p)` of the largest sample.
    pub fn argmax(&self) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for (ip, row) in self.values.iter().enumerate() {
            for (ix, &w) in row.iter().enumerate() {
                if w > best.0 {
                    best = (w, self.xs[ix], self.ps[ip]);
                }
            }
        }
        (best.1, best.2)
    }
}

fn spacing(axis: &[f64]) -> f64 {
    if axis.len() < 2 {
        1.0
    } else {
        (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
    }
}

/// `n` evenly spaced points over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// The 121-point axis over `[−8, 8]` used for walk states.
pub fn default_axis() -> Vec<f64> {
    linspace(-8.0, 8.0, 121)
}

pub fn wigner_function(rho: &MotionalDensity, xs: &[f64], ps: &[f64]) -> WignerGrid {
    let tail_mass = rho.tail_mass();
    let tol = ModelParams::default().tail_tol;
    if tail_mass > tol {
        log::warn!("density has {tail_mass:.3e} in the top Fock levels; Wigner values near the grid edge are unreliable");
    }

    let rows: Vec<(Vec<f64>, f64)> = ps
        .par_iter()
        .map(|&p| {
            let mut scratch = vec![C64::new(0.0, 0.0); rho.dim()];
            let mut worst = 0.0f64;
            let row = xs
                .iter()
                .map(|&x| {
                    let w = wigner_point(
                        &rho.rho,
                        C64::new(x, p) / std::f64::consts::SQRT_2,
                        &mut scratch,
                    );
                    worst = worst.max(w.im.abs());
                    w.re
                })
                .collect();
            (row, worst)
        })
        .collect();

    let max_imaginary = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    WignerGrid {
        xs: xs.to_vec(),
        ps: ps.to_vec(),
        values: rows.into_iter().map(|r| r.0).collect(),
        tail_mass,
        max_imaginary,
    }
}

/// `Σ_{mn} ρ_{mn} W_{nm}(α)`, keeping the imaginary part so callers can see
/// what is discarded. `scratch` holds one row of the recursion.
fn wigner_point(rho: &Array2<C64>, alpha: C64, scratch: &mut [C64]) -> C64 {
    let d = rho.nrows();
    let two_a = alpha * 2.0;
    let two_a_conj = two_a.conj();
    let w = scratch;
    let sqrt: Vec<f64> = (0..d).map(|k| (k as f64).sqrt()).collect();

    w[0] = C64::new((-2.0 * alpha.norm_sqr()).exp() / std::f64::consts::PI, 0.0);
    let mut acc = rho[[0, 0]] * w[0];
    for n in 1..d {
        w[n] = two_a * w[n - 1] / sqrt[n];
        acc += rho[[0, n]] * w[n] + rho[[n, 0]] * w[n].conj();
    }
    for m in 1..d {
        let mut prev = w[m];
        w[m] = (two_a_conj * prev - sqrt[m] * w[m - 1]) / sqrt[m];
        acc += rho[[m, m]] * w[m];
        for n in m + 1..d {
            let next = (two_a * w[n - 1] - sqrt[m] * prev) / sqrt[n];
            prev = w[n];
            w[n] = next;
            acc += rho[[m, n]] * w[n] + rho[[n, m]] * w[n].conj();
        }
    }
    acc
}
