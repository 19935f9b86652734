//! Coin dephasing and mixed-state walk evolution.
//!
//! The channel is the phase flip `ρ ↦ (1−p)ρ + p (σ_z⊗I) ρ (σ_z⊗I)`,
//! applied once per step after the walk unitary. It scales the coin
//! off-diagonal blocks by `1 − 2p`, so `p = 1/2` removes every coin coherence
//! and the walk becomes the classical one.

use ndarray::{s, Array1, Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::cv::{
    bin_positions, coherent_state, operators, ring_site_alpha, FockVector, HybridFockState,
    HybridUnitary, ModelParams,
};
use crate::error::{QwalkError, Result};
use crate::linalg::{self, re};
use crate::readout::{readout_values, Protocol, ProtocolConfig, ReadoutCurve};
use crate::walk::{CoinVector, Distribution, Support};
use crate::C64;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-8;
const PSD_TOL: f64 = 1e-8;

/// Phase-flip probability per step, `0 ≤ p ≤ 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DephasingRate(f64);

impl DephasingRate {
    pub const NONE: DephasingRate = DephasingRate(0.0);
    /// `p = 1/2`: coin coherences are erased every step.
    pub const COMPLETE: DephasingRate = DephasingRate(0.5);

    pub fn new(p: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&p) {
            Ok(Self(p))
        } else {
            Err(QwalkError::InvalidParameter {
                name: "dephasing",
                reason: format!("must lie in [0, 1], got {p}"),
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Factor applied to the coin off-diagonal blocks.
    pub fn coherence_factor(self) -> f64 {
        1.0 - 2.0 * self.0
    }
}

impl TryFrom<f64> for DephasingRate {
    type Error = QwalkError;

    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<DephasingRate> for f64 {
    fn from(rate: DephasingRate) -> f64 {
        rate.0
    }
}

/// Density matrix over coin ⊗ (sites or Fock levels), coin-major:
/// index `c · sites + j` with `c = 0` for `|↓⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridDensity {
    matrix: Array2<C64>,
    sites: usize,
}

impl HybridDensity {
    pub fn new(matrix: Array2<C64>, sites: usize) -> Self {
        assert_eq!(
            matrix.dim(),
            (2 * sites, 2 * sites),
            "density must be 2·sites square"
        );
        Self { matrix, sites }
    }

    /// `|v⟩⟨v|`
    pub fn pure(v: &Array1<C64>, sites: usize) -> Self {
        let n = v.len();
        Self::new(
            Array2::from_shape_fn((n, n), |(i, j)| v[i] * v[j].conj()),
            sites,
        )
    }

    pub fn from_hybrid_state(state: &HybridFockState) -> Self {
        Self::pure(&state.to_vector(), state.fock_dim())
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diag().iter().map(|z| z.re).sum()
    }

    /// Block `⟨row| ρ |col⟩` over the position factor; 0 = `↓`, 1 = `↑`.
    pub fn coin_block(&self, row: usize, col: usize) -> Array2<C64> {
        let s = self.sites;
        self.matrix
            .slice(s![row * s..(row + 1) * s, col * s..(col + 1) * s])
            .to_owned()
    }

    /// `(P(↓), P(↑))`
    pub fn coin_populations(&self) -> (f64, f64) {
        let s = self.sites;
        let d = self.matrix.diag();
        (
            d.slice(s![..s]).iter().map(|z| z.re).sum(),
            d.slice(s![s..]).iter().map(|z| z.re).sum(),
        )
    }

    /// Diagonal of the reduced position (or Fock) density.
    pub fn site_populations(&self) -> Vec<f64> {
        let s = self.sites;
        (0..s)
            .map(|j| self.matrix[[j, j]].re + self.matrix[[s + j, s + j]].re)
            .collect()
    }

    /// Population of the top 10% of Fock levels, summed over the coin.
    pub fn tail_mass(&self) -> f64 {
        let pops = self.site_populations();
        let d = pops.len();
        pops[d - d.div_ceil(10)..].iter().sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        let n = self.matrix.nrows();
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.matrix[[i, j]] - self.matrix[[j, i]].conj()).norm());
            }
        }
        worst
    }

    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        linalg::is_positive_semidefinite(&self.matrix, tol)
    }

    /// Hermitian to 1e-10 and unit trace to 1e-8; with `check_psd`, also no
    /// eigenvalue below −1e-8.
    pub fn validate(&self, check_psd: bool) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > HERMITIAN_TOL {
            return Err(invalid_rho(format!("not Hermitian (defect {herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(invalid_rho(format!("trace is {tr}")));
        }
        if check_psd && !self.is_positive_semidefinite(PSD_TOL) {
            return Err(invalid_rho("not positive semidefinite".into()));
        }
        Ok(())
    }

    /// `ρ ↦ U ρ U†` for a linear map given by its action on vectors.
    pub fn conjugate_by(&self, op: impl Fn(ArrayView1<C64>) -> Array1<C64>) -> HybridDensity {
        let left = apply_to_columns(&self.matrix, &op);
        let both = apply_to_columns(&linalg::dagger(&left), &op);
        HybridDensity::new(linalg::dagger(&both), self.sites)
    }

    /// `ρ ↦ U ρ U†` for a dense hybrid operator.
    pub fn conjugate(&self, u: &HybridUnitary) -> HybridDensity {
        assert_eq!(u.fock_dim, self.sites);
        let m = u.matrix.dot(&self.matrix).dot(&linalg::dagger(&u.matrix));
        HybridDensity::new(m, self.sites)
    }

    /// Embeds the position factor into `sites + 2·pad` sites, centered.
    pub fn padded(&self, pad: usize) -> HybridDensity {
        let (s, t) = (self.sites, self.sites + 2 * pad);
        let map = |i: usize| (i / s) * t + pad + i % s;
        let mut m = Array2::zeros((2 * t, 2 * t));
        for ((i, j), z) in self.matrix.indexed_iter() {
            m[[map(i), map(j)]] = *z;
        }
        HybridDensity::new(m, t)
    }
}

fn invalid_rho(reason: String) -> QwalkError {
    QwalkError::InvalidParameter {
        name: "rho",
        reason,
    }
}

fn apply_to_columns(m: &Array2<C64>, op: &impl Fn(ArrayView1<C64>) -> Array1<C64>) -> Array2<C64> {
    let mut out = Array2::zeros(m.dim());
    for (j, col) in m.columns().into_iter().enumerate() {
        out.column_mut(j).assign(&op(col));
    }
    out
}

pub fn dephase_coin(rho: &HybridDensity, rate: DephasingRate) -> HybridDensity {
    let mut out = rho.clone();
    dephase_in_place(&mut out, rate);
    out
}

fn dephase_in_place(rho: &mut HybridDensity, rate: DephasingRate) {
    let f = rate.coherence_factor();
    if f == 1.0 {
        return;
    }
    let s = rho.sites;
    rho.matrix.slice_mut(s![..s, s..]).mapv_inplace(|z| z * f);
    rho.matrix.slice_mut(s![s.., ..s]).mapv_inplace(|z| z * f);
}

/// Lattice geometry of the discrete walk.
#[derive(Clone, Copy, Debug)]
enum Lattice {
    /// `2N + 1` sites, index `i` ↔ position `i − N`; nothing reaches the edge.
    Line,
    Ring,
}

/// One Hadamard-and-shift step on a coin-major vector over `sites` sites.
fn step_vector(v: ArrayView1<C64>, sites: usize, lattice: Lattice) -> Array1<C64> {
    let mut out = Array1::zeros(2 * sites);
    for j in 0..sites {
        let (d, u) = (v[j], v[sites + j]);
        if d == C64::new(0.0, 0.0) && u == C64::new(0.0, 0.0) {
            continue;
        }
        let hd = (d + u) * FRAC_1_SQRT_2;
        let hu = (d - u) * FRAC_1_SQRT_2;
        match lattice {
            Lattice::Line => {
                if j + 1 < sites {
                    out[j + 1] += hd;
                }
                if j > 0 {
                    out[sites + j - 1] += hu;
                }
            }
            Lattice::Ring => {
                out[(j + 1) % sites] += hd;
                out[sites + (j + sites - 1) % sites] += hu;
            }
        }
    }
    out
}

fn initial_density(coin0: CoinVector, sites: usize, origin: usize) -> Result<HybridDensity> {
    coin0.ensure_normalized()?;
    let mut v = Array1::zeros(2 * sites);
    v[origin] = coin0.down;
    v[sites + origin] = coin0.up;
    Ok(HybridDensity::pure(&v, sites))
}

fn evolve_discrete(
    mut rho: HybridDensity,
    steps: usize,
    lattice: Lattice,
    rate: DephasingRate,
    mut visit: impl FnMut(usize, &HybridDensity) -> Result<()>,
) -> Result<HybridDensity> {
    let sites = rho.sites;
    visit(0, &rho)?;
    for n in 1..=steps {
        rho = rho.conjugate_by(|v| step_vector(v, sites, lattice));
        dephase_in_place(&mut rho, rate);
        visit(n, &rho)?;
    }
    Ok(rho)
}

/// Mixed-state line walk over positions `−steps..=steps`, calling `visit`
/// after each step (and once for the initial state with `n = 0`).
pub fn evolve_line_density(
    steps: usize,
    coin0: CoinVector,
    rate: DephasingRate,
    visit: impl FnMut(usize, &HybridDensity) -> Result<()>,
) -> Result<HybridDensity> {
    let rho = initial_density(coin0, 2 * steps + 1, steps)?;
    evolve_discrete(rho, steps, Lattice::Line, rate, visit)
}

/// Mixed-state ring walk; site `k` is index `k`.
pub fn evolve_ring_density(
    steps: usize,
    coin0: CoinVector,
    rate: DephasingRate,
    visit: impl FnMut(usize, &HybridDensity) -> Result<()>,
) -> Result<HybridDensity> {
    let rho = initial_density(coin0, 4, 0)?;
    evolve_discrete(rho, steps, Lattice::Ring, rate, visit)
}

pub fn run_line_decohered(
    steps: usize,
    coin0: CoinVector,
    rate: DephasingRate,
) -> Result<Distribution> {
    let rho = evolve_line_density(steps, coin0, rate, |_, _| Ok(()))?;
    let n = steps as i64;
    Ok(Distribution::new(
        Support::Line,
        (-n..=n).collect(),
        rho.site_populations(),
    ))
}

pub fn run_ring_decohered(
    steps: usize,
    coin0: CoinVector,
    rate: DephasingRate,
) -> Result<Distribution> {
    let rho = evolve_ring_density(steps, coin0, rate, |_, _| Ok(()))?;
    Ok(Distribution::new(
        Support::Ring,
        (0..4).collect(),
        rho.site_populations(),
    ))
}

fn evolve_cv(
    mut rho: HybridDensity,
    step: &HybridUnitary,
    steps: usize,
    rate: DephasingRate,
    params: &ModelParams,
    mut visit: impl FnMut(usize, &HybridDensity) -> Result<()>,
) -> Result<HybridDensity> {
    visit(0, &rho)?;
    for n in 1..=steps {
        rho = rho.conjugate(step);
        dephase_in_place(&mut rho, rate);
        params.check_tail(rho.tail_mass())?;
        visit(n, &rho)?;
    }
    Ok(rho)
}

/// Oscillator-tier line walk with coin dephasing, from `|0⟩ ⊗ coin0`.
pub fn evolve_cv_line_density(
    steps: usize,
    coin0: CoinVector,
    rate: DephasingRate,
    params: &ModelParams,
    visit: impl FnMut(usize, &HybridDensity) -> Result<()>,
) -> Result<HybridDensity> {
    coin0.ensure_normalized()?;
    let ops = operators(params)?;
    let step = ops.line_step()?;
    let start = HybridFockState::product(&FockVector::vacuum(params.fock_dim), coin0);
    evolve_cv(
        HybridDensity::from_hybrid_state(&start),
        step,
        steps,
        rate,
        params,
        visit,
    )
}

/// Oscillator-tier circle walk with coin dephasing, from `|α₀⟩ ⊗ coin0`.
pub fn evolve_cv_circle_density(
    steps: usize,
    alpha0: f64,
    coin0: CoinVector,
    rate: DephasingRate,
    params: &ModelParams,
    visit: impl FnMut(usize, &HybridDensity) -> Result<()>,
) -> Result<HybridDensity> {
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(QwalkError::InvalidParameter {
            name: "alpha0",
            reason: format!("must be positive, got {alpha0}"),
        });
    }
    coin0.ensure_normalized()?;
    let ops = operators(params)?;
    let start = HybridFockState::product(&coherent_state(re(alpha0), params)?, coin0);
    evolve_cv(
        HybridDensity::from_hybrid_state(&start),
        ops.circle_step(),
        steps,
        rate,
        params,
        visit,
    )
}

/// Binned position readout of an oscillator-tier line density.
pub fn cv_position_distribution(rho: &HybridDensity, params: &ModelParams) -> Distribution {
    let motion = crate::wigner::trace_out_coin_density(rho);
    bin_positions(|x| motion.position_density(x), rho.sites(), params)
}

/// Ring-site readout of an oscillator-tier circle density: weight of each
/// branch on the site coherent states.
pub fn cv_circle_site_distribution(
    rho: &HybridDensity,
    alpha0: f64,
    params: &ModelParams,
) -> Result<Distribution> {
    let mut probabilities = Vec::with_capacity(4);
    for k in 0..4 {
        let site = coherent_state(ring_site_alpha(alpha0, k), params)?;
        let mut p = 0.0;
        for c in 0..2 {
            p += site.expect(&rho.coin_block(c, c)).re;
        }
        probabilities.push(p);
    }
    Ok(Distribution::new(
        Support::Ring,
        (0..4).collect(),
        probabilities,
    ))
}

/// Grid spacing of the coarse search over `p`.
pub const ESTIMATE_GRID_STEP: f64 = 0.01;
/// Width at which the local refinement stops.
pub const ESTIMATE_RESOLUTION: f64 = 1e-4;

/// Least-squares fit of the dephasing rate to an observed readout curve.
///
/// The simulated curve for `config` (with its dephasing replaced) is matched
/// at the observed step counts. `p` is searched over `[0, 1/2]`, the range
/// in which the channel interpolates from quantum to classical: a grid at
/// [`ESTIMATE_GRID_STEP`] followed by golden-section refinement around the
/// best grid point.
pub fn estimate_dephasing(
    observed: &ReadoutCurve,
    protocol: Protocol,
    config: &ProtocolConfig,
) -> Result<DephasingRate> {
    if observed.len() < 3 {
        return Err(QwalkError::Fit(format!(
            "need at least 3 samples, got {}",
            observed.len()
        )));
    }
    if observed.steps.len() != observed.p_down.len()
        || observed.p_down.iter().any(|p| !p.is_finite())
    {
        return Err(QwalkError::Fit(
            "curve has mismatched or non-finite entries".into(),
        ));
    }
    let max_step = *observed.steps.iter().max().expect("non-empty");
    let base = ProtocolConfig {
        steps: max_step,
        ..*config
    };
    base.validate()?;

    let loss = |p: f64| -> Result<f64> {
        let sim = readout_values(protocol, &base.with_dephasing(DephasingRate::new(p)?))?;
        Ok(observed
            .steps
            .iter()
            .zip(&observed.p_down)
            .map(|(&n, &obs)| (obs - sim[n]).powi(2))
            .sum())
    };

    let cells = (0.5 / ESTIMATE_GRID_STEP).round() as usize;
    let grid: Vec<(f64, f64)> = (0..=cells)
        .into_par_iter()
        .map(|k| {
            let p = k as f64 * ESTIMATE_GRID_STEP;
            loss(p).map(|l| (p, l))
        })
        .collect::<Result<_>>()?;
    let (mut best_p, mut best_loss) = grid
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid is non-empty");

    let (mut lo, mut hi) = (
        (best_p - ESTIMATE_GRID_STEP).max(0.0),
        (best_p + ESTIMATE_GRID_STEP).min(0.5),
    );
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (loss(a)?, loss(b)?);
    while hi - lo > ESTIMATE_RESOLUTION {
        if fa <= fb {
            hi = b;
            (b, fb) = (a, fa);
            a = hi - ratio * (hi - lo);
            fa = loss(a)?;
        } else {
            lo = a;
            (a, fa) = (b, fb);
            b = lo + ratio * (hi - lo);
            fb = loss(b)?;
        }
    }
    for (p, l) in [(a, fa), (b, fb)] {
        if l < best_loss {
            (best_p, best_loss) = (p, l);
        }
    }
    log::debug!("estimate_dephasing: p = {best_p:.5}, residual {best_loss:.3e}");
    DephasingRate::new(best_p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cv::run_cv_line;
    use crate::walk::{classical_line_distribution, run_line, run_ring, stats};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    /// Classical chain: the first coin toss is biased by the initial coin,
    /// every later toss is fair.
    fn markov_line(steps: usize, coin0: CoinVector) -> BTreeMap<i64, f64> {
        let mut dist = BTreeMap::from([(0i64, 1.0)]);
        let h = coin0.hadamard();
        for n in 0..steps {
            let (right, left) = if n == 0 {
                (h.down.norm_sqr(), h.up.norm_sqr())
            } else {
                (0.5, 0.5)
            };
            let mut next = BTreeMap::new();
            for (&d, &p) in &dist {
                *next.entry(d + 1).or_insert(0.0) += p * right;
                *next.entry(d - 1).or_insert(0.0) += p * left;
            }
            dist = next;
        }
        dist
    }

    #[test]
    fn rate_range_is_enforced() {
        assert!(DephasingRate::new(-0.1).is_err());
        assert!(DephasingRate::new(1.1).is_err());
        assert!(DephasingRate::new(f64::NAN).is_err());
        assert_eq!(DephasingRate::new(0.25).unwrap().coherence_factor(), 0.5);
        let parsed: std::result::Result<DephasingRate, _> = serde_json::from_str("1.5");
        assert!(parsed.is_err());
    }

    fn sample_density() -> HybridDensity {
        let v = Array1::from(vec![
            C64::new(0.5, 0.0),
            C64::new(0.0, 0.5),
            C64::new(0.5, 0.0),
            C64::new(0.0, -0.5),
        ]);
        HybridDensity::pure(&v, 2)
    }

    #[test]
    fn zero_rate_is_identity() {
        let rho = sample_density();
        assert_eq!(dephase_coin(&rho, DephasingRate::NONE), rho);
    }

    #[test]
    fn half_rate_zeroes_coin_coherences() {
        let out = dephase_coin(&sample_density(), DephasingRate::COMPLETE);
        assert!(out.coin_block(0, 1).iter().all(|z| z.norm() == 0.0));
        assert!(out.coin_block(1, 0).iter().all(|z| z.norm() == 0.0));
        assert_eq!(out.coin_block(0, 0), sample_density().coin_block(0, 0));
    }

    #[test]
    fn diagonal_density_is_fixed() {
        let mut m = Array2::zeros((4, 4));
        for (i, p) in [0.1, 0.2, 0.3, 0.4].into_iter().enumerate() {
            m[[i, i]] = re(p);
        }
        let rho = HybridDensity::new(m, 2);
        for p in [0.0, 0.3, 0.5, 1.0] {
            assert_eq!(dephase_coin(&rho, DephasingRate::new(p).unwrap()), rho);
        }
    }

    #[test]
    fn channel_matches_kraus_form() {
        let rho = sample_density();
        let p = 0.3;
        let z = crate::linalg::kron(
            &crate::cv::coin_ops::to_array(crate::cv::coin_ops::SIGMA_Z),
            &crate::linalg::identity(2),
        );
        let expect = rho.matrix() * re(1.0 - p) + z.dot(rho.matrix()).dot(&z) * re(p);
        let got = dephase_coin(&rho, DephasingRate::new(p).unwrap());
        assert!(linalg::frobenius_norm((got.matrix() - &expect).view()) < 1e-15);
    }

    #[test]
    fn validation_catches_bad_densities() {
        assert!(sample_density().validate(true).is_ok());
        let mut m = sample_density().into_matrix();
        m[[0, 0]] = re(2.0);
        assert!(HybridDensity::new(m, 2).validate(false).is_err());
        let mut neg = Array2::zeros((4, 4));
        neg[[0, 0]] = re(1.5);
        neg[[1, 1]] = re(-0.5);
        let neg = HybridDensity::new(neg, 2);
        assert!(neg.validate(false).is_ok());
        assert!(neg.validate(true).is_err());
    }

    #[test]
    fn complete_dephasing_is_the_classical_walk() {
        for steps in 0..=20 {
            for coin in [CoinVector::DOWN, CoinVector::symmetric()] {
                let got = run_line_decohered(steps, coin, DephasingRate::COMPLETE).unwrap();
                let oracle = markov_line(steps, coin);
                let classical = classical_line_distribution(steps);
                for (i, &d) in got.positions.iter().enumerate() {
                    let want = oracle.get(&d).copied().unwrap_or(0.0);
                    assert!(
                        (got.probabilities[i] - want).abs() <= 1e-12,
                        "N={steps} d={d}"
                    );
                    assert!(
                        (got.probabilities[i] - classical.get(d)).abs() <= 1e-12,
                        "N={steps} d={d}"
                    );
                }
            }
        }
    }

    #[test]
    fn complete_dephasing_with_biased_first_toss() {
        let coin = CoinVector::new(re(0.8), re(0.6));
        let got = run_line_decohered(6, coin, DephasingRate::COMPLETE).unwrap();
        let oracle = markov_line(6, coin);
        for (i, &d) in got.positions.iter().enumerate() {
            assert!((got.probabilities[i] - oracle.get(&d).copied().unwrap_or(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rate_matches_pure_walk() {
        for steps in [0, 1, 4, 11, 20] {
            for coin in [CoinVector::DOWN, CoinVector::UP, CoinVector::symmetric()] {
                let mixed = run_line_decohered(steps, coin, DephasingRate::NONE).unwrap();
                let pure = run_line(steps, coin).unwrap().distribution();
                assert!(mixed.l1_distance(&pure) <= 1e-10, "N={steps}");
            }
        }
    }

    #[test]
    fn table_two_row_four() {
        let d = run_line_decohered(4, CoinVector::symmetric(), DephasingRate::NONE).unwrap();
        for (pos, p) in [
            (-4, 1.0 / 16.0),
            (-2, 3.0 / 8.0),
            (0, 1.0 / 8.0),
            (2, 3.0 / 8.0),
            (4, 1.0 / 16.0),
        ] {
            assert!((d.get(pos) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn distance_to_classical_shrinks_with_rate() {
        for steps in [4, 10, 20] {
            let classical = classical_line_distribution(steps);
            let dists: Vec<f64> = (0..=5)
                .map(|k| {
                    let rate = DephasingRate::new(k as f64 / 10.0).unwrap();
                    run_line_decohered(steps, CoinVector::symmetric(), rate)
                        .unwrap()
                        .l1_distance(&classical)
                })
                .collect();
            for w in dists.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "N={steps}: {dists:?}");
            }
        }
    }

    #[test]
    fn partial_dephasing_interpolates_spread() {
        let coin = CoinVector::symmetric();
        let sigma = |p: f64| {
            stats(&run_line_decohered(20, coin, DephasingRate::new(p).unwrap()).unwrap()).stddev
        };
        let (quantum, partial) = (sigma(0.0), sigma(0.1));
        assert!(
            partial > 20f64.sqrt() && partial < quantum,
            "{partial} vs {quantum}"
        );
    }

    #[test]
    fn ring_limits() {
        let pure = run_ring_decohered(3, CoinVector::DOWN, DephasingRate::NONE).unwrap();
        assert!((pure.get(1) - 1.0).abs() < 1e-12);
        let ideal = run_ring(5, CoinVector::DOWN).unwrap().distribution();
        assert!(
            run_ring_decohered(5, CoinVector::DOWN, DephasingRate::NONE)
                .unwrap()
                .l1_distance(&ideal)
                < 1e-12
        );

        let odd = run_ring_decohered(3, CoinVector::DOWN, DephasingRate::COMPLETE).unwrap();
        assert!((odd.get(1) - 0.5).abs() < 1e-12 && (odd.get(3) - 0.5).abs() < 1e-12);
        for steps in [2, 4, 6, 8] {
            let even =
                run_ring_decohered(steps, CoinVector::DOWN, DephasingRate::COMPLETE).unwrap();
            assert!(
                (even.get(0) - 0.5).abs() < 1e-12 && (even.get(2) - 0.5).abs() < 1e-12,
                "N={steps}"
            );
        }
    }

    #[test]
    fn padding_preserves_populations() {
        let rho = evolve_line_density(
            3,
            CoinVector::DOWN,
            DephasingRate::new(0.2).unwrap(),
            |_, _| Ok(()),
        )
        .unwrap();
        let padded = rho.padded(2);
        assert_eq!(padded.sites(), rho.sites() + 4);
        assert_eq!(
            padded.site_populations()[2..9].to_vec(),
            rho.site_populations()
        );
        assert!((padded.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cv_zero_rate_matches_pure_cv_walk() {
        let params = ModelParams::with_fock_dim(48);
        let rho =
            evolve_cv_line_density(3, CoinVector::DOWN, DephasingRate::NONE, &params, |_, _| {
                Ok(())
            })
            .unwrap();
        let pure =
            HybridDensity::from_hybrid_state(&run_cv_line(3, CoinVector::DOWN, &params).unwrap());
        assert!(linalg::frobenius_norm((rho.matrix() - pure.matrix()).view()) < 1e-10);
    }

    #[test]
    fn cv_dephasing_keeps_branch_populations_and_decoheres() {
        let params = ModelParams::with_fock_dim(48);
        let mut purities = Vec::new();
        for p in [0.0, 0.2, 0.5] {
            let rho = evolve_cv_line_density(
                3,
                CoinVector::DOWN,
                DephasingRate::new(p).unwrap(),
                &params,
                |_, _| Ok(()),
            )
            .unwrap();
            rho.validate(true).unwrap();
            purities.push(rho.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>());
        }
        assert!((purities[0] - 1.0).abs() < 1e-10);
        assert!(
            purities[1] < purities[0] && purities[2] < purities[1],
            "{purities:?}"
        );
    }

    #[test]
    fn cv_readouts_of_pure_densities_match_pure_states() {
        let params = ModelParams::with_fock_dim(64);
        let line = run_cv_line(3, CoinVector::DOWN, &params).unwrap();
        let a = cv_position_distribution(&HybridDensity::from_hybrid_state(&line), &params);
        assert!(a.l1_distance(&crate::cv::position_distribution(&line, &params)) < 1e-10);

        let circle = crate::cv::run_cv_circle(3, 3.0, CoinVector::DOWN, &params).unwrap();
        let b =
            cv_circle_site_distribution(&HybridDensity::from_hybrid_state(&circle), 3.0, &params)
                .unwrap();
        let want = crate::cv::circle_site_distribution(&circle, 3.0, &params).unwrap();
        assert!(b.l1_distance(&want) < 1e-12);
    }

    #[test]
    fn cv_truncation_is_reported() {
        let params = ModelParams::with_fock_dim(12);
        let err =
            evolve_cv_line_density(6, CoinVector::DOWN, DephasingRate::NONE, &params, |_, _| {
                Ok(())
            })
            .unwrap_err();
        assert!(matches!(err, QwalkError::Truncation { .. }));
    }

    fn simulated(p: f64, protocol: Protocol) -> ReadoutCurve {
        let config = ProtocolConfig::default().with_dephasing(DephasingRate::new(p).unwrap());
        crate::readout::readout_curve(protocol, &config).unwrap()
    }

    #[test]
    fn estimator_round_trips_line_curves() {
        for p in [0.0, 0.1, 0.3] {
            let got = estimate_dephasing(
                &simulated(p, Protocol::Line),
                Protocol::Line,
                &ProtocolConfig::default(),
            )
            .unwrap()
            .value();
            assert!((got - p).abs() <= 0.002, "p={p}: {got}");
        }
    }

    #[test]
    fn estimator_round_trips_circle_curves() {
        let got = estimate_dephasing(
            &simulated(0.2, Protocol::Circle),
            Protocol::Circle,
            &ProtocolConfig::default(),
        )
        .unwrap()
        .value();
        assert!((got - 0.2).abs() <= 0.01, "{got}");
    }

    #[test]
    fn flat_curve_means_complete_dephasing() {
        let flat = ReadoutCurve::new((1..=10).collect(), vec![0.5; 10]).unwrap();
        let got = estimate_dephasing(&flat, Protocol::Line, &ProtocolConfig::default())
            .unwrap()
            .value();
        assert!(got > 0.49, "{got}");
    }

    #[test]
    fn estimator_needs_three_samples() {
        let short = ReadoutCurve::new(vec![1, 2], vec![0.5, 0.75]).unwrap();
        let err =
            estimate_dephasing(&short, Protocol::Line, &ProtocolConfig::default()).unwrap_err();
        assert!(matches!(err, QwalkError::Fit(_)));
    }

    fn random_density(n: usize) -> impl Strategy<Value = HybridDensity> {
        proptest::collection::vec(-1.0f64..1.0, 2 * n * n).prop_map(move |xs| {
            let a = Array2::from_shape_fn((n, n), |(i, j)| {
                C64::new(xs[2 * (i * n + j)], xs[2 * (i * n + j) + 1])
            });
            let mut rho = a.dot(&linalg::dagger(&a));
            let tr: f64 = rho.diag().iter().map(|z| z.re).sum();
            rho.mapv_inplace(|z| z / tr.max(1e-12));
            HybridDensity::new(rho, n / 2)
        })
    }

    proptest! {
        #[test]
        fn channel_is_trace_preserving_and_positive(rho in random_density(6), p in 0.0f64..=1.0) {
            prop_assume!((rho.trace() - 1.0).abs() < 1e-9);
            let out = dephase_coin(&rho, DephasingRate::new(p).unwrap());
            prop_assert!((out.trace() - 1.0).abs() < 1e-8);
            prop_assert!(out.is_positive_semidefinite(1e-8));
            prop_assert_eq!(out.site_populations(), rho.site_populations());
        }

        #[test]
        fn decohered_walk_stays_normalized(steps in 0usize..12, p in 0.0f64..=1.0) {
            let d = run_line_decohered(steps, CoinVector::symmetric(), DephasingRate::new(p).unwrap()).unwrap();
            prop_assert!((d.total() - 1.0).abs() < 1e-12);
            prop_assert!(d.probabilities.iter().all(|&q| q >= -1e-15));
        }
    }
}
