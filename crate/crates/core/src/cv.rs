//! Continuous-variable tier: the walker is the motional mode of a trapped ion,
//! truncated to `fock_dim` number states, and the coin is its internal levels.
//!
//! Units are dimensionless (ℏ = m = ω = 1): `x̂ = (â + â†)/√2`,
//! `p̂ = i(â† − â)/√2`, and the coherent state `|α⟩` is a Gaussian packet
//! centered at `(√2 α_R, √2 α_I)`. `σ_z|↑⟩ = +|↑⟩`, `σ_z|↓⟩ = −|↓⟩`.
//!
//! On the ring, site `k` is the coherent state `α₀ e^{−ikπ/2}`: the angle is
//! measured clockwise in the `(x, p)` plane, the direction of free harmonic
//! evolution, so that the `|↓⟩` branch of `e^{iπn̂σ_z/2}` advances `k → k+1`.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{QwalkError, Result};
use crate::linalg::{self, re};
use crate::walk::{CoinVector, Distribution, Support};
use crate::C64;

/// Operator-distance budget for the compiled pulse sequence.
pub const COMPILATION_TOL: f64 = 1e-8;

/// Fraction of the Fock ladder treated as trustworthy when comparing
/// truncated operators.
pub const LOW_BLOCK_FRACTION: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub fock_dim: usize,
    /// Maximum probability allowed in the top 10% of Fock levels.
    pub tail_tol: f64,
    /// Position step per walk step, in `x` units.
    pub step_displacement: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            fock_dim: 128,
            tail_tol: 1e-8,
            step_displacement: 1.0,
        }
    }
}

impl ModelParams {
    pub fn with_fock_dim(fock_dim: usize) -> Self {
        Self {
            fock_dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fock_dim < 2 {
            return Err(QwalkError::InvalidParameter {
                name: "fock_dim",
                reason: format!("must be at least 2, got {}", self.fock_dim),
            });
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(QwalkError::InvalidParameter {
                name: "tail_tol",
                reason: format!("must lie in (0, 1), got {}", self.tail_tol),
            });
        }
        if !(self.step_displacement > 0.0 && self.step_displacement.is_finite()) {
            return Err(QwalkError::InvalidParameter {
                name: "step_displacement",
                reason: format!("must be positive, got {}", self.step_displacement),
            });
        }
        Ok(())
    }

    /// Number of levels in the low block used for operator comparisons.
    pub fn low_block(&self) -> usize {
        ((self.fock_dim as f64) * LOW_BLOCK_FRACTION).floor() as usize
    }

    pub(crate) fn check_tail(&self, tail: f64) -> Result<()> {
        if tail > self.tail_tol {
            return Err(QwalkError::Truncation {
                tail,
                tol: self.tail_tol,
                fock_dim: self.fock_dim,
            });
        }
        Ok(())
    }

    fn cache_key(&self) -> (usize, u64, u64) {
        (
            self.fock_dim,
            self.tail_tol.to_bits(),
            self.step_displacement.to_bits(),
        )
    }
}

/// Amplitudes over `|0⟩ … |D−1⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    pub amps: Array1<C64>,
}

impl FockVector {
    pub fn vacuum(fock_dim: usize) -> Self {
        let mut amps = Array1::zeros(fock_dim);
        amps[0] = re(1.0);
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        linalg::vec_norm_sqr(&self.amps)
    }

    /// Probability in the top 10% of levels.
    pub fn tail_mass(&self) -> f64 {
        let d = self.dim();
        let start = d - d.div_ceil(10);
        self.amps
            .slice(s![start..])
            .iter()
            .map(|z| z.norm_sqr())
            .sum()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &FockVector) -> C64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `⟨ψ|A|ψ⟩`
    pub fn expect(&self, op: &Array2<C64>) -> C64 {
        let a_psi = op.dot(&self.amps);
        self.amps
            .iter()
            .zip(a_psi.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Joint coin ⊗ oscillator pure state, stored as the two coin branches.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridFockState {
    pub down: FockVector,
    pub up: FockVector,
}

impl HybridFockState {
    pub fn product(motion: &FockVector, coin: CoinVector) -> Self {
        Self {
            down: FockVector {
                amps: motion.amps.mapv(|z| z * coin.down),
            },
            up: FockVector {
                amps: motion.amps.mapv(|z| z * coin.up),
            },
        }
    }

    pub fn fock_dim(&self) -> usize {
        self.down.dim()
    }

    /// Coin-major joint vector of length `2D`.
    pub fn to_vector(&self) -> Array1<C64> {
        let d = self.fock_dim();
        let mut v = Array1::zeros(2 * d);
        v.slice_mut(s![..d]).assign(&self.down.amps);
        v.slice_mut(s![d..]).assign(&self.up.amps);
        v
    }

    pub fn from_vector(v: &Array1<C64>) -> Self {
        let d = v.len() / 2;
        Self {
            down: FockVector {
                amps: v.slice(s![..d]).to_owned(),
            },
            up: FockVector {
                amps: v.slice(s![d..]).to_owned(),
            },
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.down.norm_sqr() + self.up.norm_sqr()
    }

    pub fn tail_mass(&self) -> f64 {
        self.down.tail_mass() + self.up.tail_mass()
    }

    pub fn inner(&self, other: &HybridFockState) -> C64 {
        self.down.inner(&other.down) + self.up.inner(&other.up)
    }

    pub fn fidelity(&self, other: &HybridFockState) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn apply(&self, u: &HybridUnitary) -> HybridFockState {
        Self::from_vector(&u.matrix.dot(&self.to_vector()))
    }

    /// Applies `u` and fails if the result leaks into the top Fock levels.
    pub fn apply_checked(
        &self,
        u: &HybridUnitary,
        params: &ModelParams,
    ) -> Result<HybridFockState> {
        let next = self.apply(u);
        params.check_tail(next.tail_mass())?;
        Ok(next)
    }
}

/// Dense `2D × 2D` operator on coin ⊗ oscillator, coin-major.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridUnitary {
    pub matrix: Array2<C64>,
    pub fock_dim: usize,
}

impl HybridUnitary {
    pub fn new(matrix: Array2<C64>, fock_dim: usize) -> Self {
        assert_eq!(matrix.dim(), (2 * fock_dim, 2 * fock_dim));
        Self { matrix, fock_dim }
    }

    pub fn identity(fock_dim: usize) -> Self {
        Self::new(linalg::identity(2 * fock_dim), fock_dim)
    }

    /// `coin ⊗ I`
    pub fn coin(coin: [[C64; 2]; 2], fock_dim: usize) -> Self {
        let c = Array2::from_shape_fn((2, 2), |(i, j)| coin[i][j]);
        Self::new(linalg::kron(&c, &linalg::identity(fock_dim)), fock_dim)
    }

    /// `|↓⟩⟨↓| ⊗ down + |↑⟩⟨↑| ⊗ up`
    pub fn branch_diagonal(down: &Array2<C64>, up: &Array2<C64>) -> Self {
        let d = down.nrows();
        let mut m = Array2::zeros((2 * d, 2 * d));
        m.slice_mut(s![..d, ..d]).assign(down);
        m.slice_mut(s![d.., d..]).assign(up);
        Self::new(m, d)
    }

    /// `self · first`: apply `first`, then `self`.
    pub fn after(&self, first: &HybridUnitary) -> HybridUnitary {
        Self::new(self.matrix.dot(&first.matrix), self.fock_dim)
    }

    pub fn dagger(&self) -> HybridUnitary {
        Self::new(linalg::dagger(&self.matrix), self.fock_dim)
    }

    /// Indices of the low 80% of Fock levels in both coin branches.
    pub fn low_block_indices(&self) -> Vec<usize> {
        let keep = ((self.fock_dim as f64) * LOW_BLOCK_FRACTION).floor() as usize;
        linalg::low_block_indices(self.fock_dim, 2, keep)
    }

    /// `‖U†U − I‖_F` on the low block.
    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.matrix, &self.low_block_indices())
    }

    /// Phase-optimal Frobenius distance to `other` on the low block.
    pub fn low_block_distance(&self, other: &HybridUnitary) -> f64 {
        let idx = self.low_block_indices();
        let a = linalg::submatrix(&self.matrix, &idx);
        let b = linalg::submatrix(&other.matrix, &idx);
        linalg::phase_aligned_distance(&a, &b).0
    }
}

pub mod coin_ops {
    //! 2×2 coin matrices in `(down, up)` ordering.
    use super::*;

    const O: C64 = C64::new(0.0, 0.0);
    const I1: C64 = C64::new(1.0, 0.0);
    const H: C64 = C64::new(FRAC_1_SQRT_2, 0.0);

    pub const HADAMARD: [[C64; 2]; 2] = [[H, H], [H, C64::new(-FRAC_1_SQRT_2, 0.0)]];
    /// `σ_z` with `σ_z|↓⟩ = −|↓⟩`.
    pub const SIGMA_Z: [[C64; 2]; 2] = [[C64::new(-1.0, 0.0), O], [O, I1]];
    /// `σ_y` with `σ_y|↑⟩ = i|↓⟩`, `σ_y|↓⟩ = −i|↑⟩`.
    pub const SIGMA_Y: [[C64; 2]; 2] = [[O, C64::new(0.0, 1.0)], [C64::new(0.0, -1.0), O]];
    /// π-pulse exchanging `|↓⟩` and `|↑⟩`.
    pub const PI_PULSE: [[C64; 2]; 2] = [[O, I1], [I1, O]];
    /// π/2-pulse `R_y(π/2)`; equals `π-pulse · Ĥ`.
    pub const PI_HALF_PULSE: [[C64; 2]; 2] = [[H, C64::new(-FRAC_1_SQRT_2, 0.0)], [H, H]];

    pub fn to_array(m: [[C64; 2]; 2]) -> Array2<C64> {
        Array2::from_shape_fn((2, 2), |(i, j)| m[i][j])
    }
}

/// Truncated `(â, â†)`.
pub fn ladder_ops(params: &ModelParams) -> (Array2<C64>, Array2<C64>) {
    let d = params.fock_dim;
    let mut a = Array2::zeros((d, d));
    for n in 1..d {
        a[[n - 1, n]] = re((n as f64).sqrt());
    }
    let a_dag = linalg::dagger(&a);
    (a, a_dag)
}

/// Truncated `(x̂, p̂, n̂)`.
pub fn quad_ops(params: &ModelParams) -> (Array2<C64>, Array2<C64>, Array2<C64>) {
    let (a, a_dag) = ladder_ops(params);
    let x = (&a + &a_dag).mapv(|z| z * FRAC_1_SQRT_2);
    let p = (&a_dag - &a).mapv(|z| z * C64::new(0.0, FRAC_1_SQRT_2));
    let n = Array2::from_diag(&Array1::from_shape_fn(params.fock_dim, |k| re(k as f64)));
    (x, p, n)
}

/// Coherent state `|α⟩`, renormalized on the truncated ladder.
pub fn coherent_state(alpha: C64, params: &ModelParams) -> Result<FockVector> {
    params.validate()?;
    let d = params.fock_dim;
    let mut amps = Array1::zeros(d);
    amps[0] = re((-alpha.norm_sqr() / 2.0).exp());
    for n in 1..d {
        amps[n] = amps[n - 1] * alpha / (n as f64).sqrt();
    }
    let v = FockVector { amps };
    let norm = v.norm_sqr();
    // mass that never made it onto the ladder counts as tail
    let tail = v.tail_mass() + (1.0 - norm).max(0.0);
    params.check_tail(tail)?;
    Ok(FockVector {
        amps: v.amps.mapv(|z| z / norm.sqrt()),
    })
}

/// `e^{−iλp̂}`, the translation `x → x + λ` on the truncated ladder.
pub fn translation(shift: f64, params: &ModelParams) -> Array2<C64> {
    let (_, p, _) = quad_ops(params);
    linalg::expm(&p.mapv(|z| z * C64::new(0.0, -shift)))
}

/// `e^{i s p̂ σ_z}`: the `|↓⟩` branch moves `+s` in `x`, the `|↑⟩` branch `−s`.
pub fn conditional_displacement(params: &ModelParams) -> HybridUnitary {
    let s = params.step_displacement;
    HybridUnitary::branch_diagonal(&translation(s, params), &translation(-s, params))
}

/// Displacement beam acting only on the `|↑⟩` branch.
pub fn up_branch_displacement(shift: f64, params: &ModelParams) -> HybridUnitary {
    HybridUnitary::branch_diagonal(
        &linalg::identity(params.fock_dim),
        &translation(shift, params),
    )
}

/// Walk operator `e^{i s p̂ σ_z} Ĥ` from one exponential of the full
/// `2D × 2D` generator, independent of the branch-wise construction.
pub fn walk_unitary_direct(params: &ModelParams) -> HybridUnitary {
    let d = params.fock_dim;
    let (_, p, _) = quad_ops(params);
    let sz = coin_ops::to_array(coin_ops::SIGMA_Z);
    let generator = linalg::kron(&sz, &p).mapv(|z| z * C64::new(0.0, params.step_displacement));
    let shift = HybridUnitary::new(linalg::expm(&generator), d);
    shift.after(&HybridUnitary::coin(coin_ops::HADAMARD, d))
}

/// The four-pulse realization of one line-walk step:
///
/// 1. π/2-pulse `R_y(π/2)` on the coin,
/// 2. displacement beam on `|↑⟩` by `+s`,
/// 3. π-pulse exchanging `|↓⟩ ↔ |↑⟩`,
/// 4. displacement beam on `|↑⟩` by `−s` (opposite beam phase).
///
/// Amplitude that starts in `|↑⟩` after pulse 1 is pushed `+s` and then
/// flipped to `|↓⟩`; amplitude in `|↓⟩` is flipped to `|↑⟩` and pushed `−s`.
/// The product is `e^{i s p̂ σ_z} · (π-pulse · R_y(π/2))` and the coin factor
/// is exactly `Ĥ`. The result is checked against [`walk_unitary_direct`].
pub fn four_pulse_step(params: &ModelParams) -> Result<HybridUnitary> {
    params.validate()?;
    let d = params.fock_dim;
    let s = params.step_displacement;
    let pulses = [
        HybridUnitary::coin(coin_ops::PI_HALF_PULSE, d),
        up_branch_displacement(s, params),
        HybridUnitary::coin(coin_ops::PI_PULSE, d),
        up_branch_displacement(-s, params),
    ];
    let composite = pulses
        .iter()
        .skip(1)
        .fold(pulses[0].clone(), |acc, pulse| pulse.after(&acc));

    let distance = composite.low_block_distance(&walk_unitary_direct(params));
    if distance > COMPILATION_TOL {
        return Err(QwalkError::Compilation {
            distance,
            tol: COMPILATION_TOL,
        });
    }
    Ok(composite)
}

/// `e^{iπ n̂ σ_z / 2}`. Diagonal in the Fock ⊗ coin basis, so built from its
/// eigenphases directly.
pub fn conditional_rotation(params: &ModelParams) -> HybridUnitary {
    let d = params.fock_dim;
    let phases = |sign: f64| {
        Array2::from_diag(&Array1::from_shape_fn(d, |n| {
            // reduce n mod 4 so the phase is exact
            C64::from_polar(1.0, sign * FRAC_PI_2 * (n % 4) as f64)
        }))
    };
    HybridUnitary::branch_diagonal(&phases(-1.0), &phases(1.0))
}

/// One ring step: Hadamard coin, then the conditional phase-space rotation.
pub fn circle_step(params: &ModelParams) -> HybridUnitary {
    conditional_rotation(params).after(&HybridUnitary::coin(coin_ops::HADAMARD, params.fock_dim))
}

/// Compiled operators for one parameter set, built lazily and shared.
pub struct CvOperators {
    params: ModelParams,
    line_step: OnceLock<Result<HybridUnitary>>,
    circle_step: OnceLock<HybridUnitary>,
    m_plus: OnceLock<HybridUnitary>,
    m_minus: OnceLock<HybridUnitary>,
    d_plus: OnceLock<HybridUnitary>,
    d_minus: OnceLock<HybridUnitary>,
}

impl CvOperators {
    fn new(params: ModelParams) -> Self {
        Self {
            params,
            line_step: OnceLock::new(),
            circle_step: OnceLock::new(),
            m_plus: OnceLock::new(),
            m_minus: OnceLock::new(),
            d_plus: OnceLock::new(),
            d_minus: OnceLock::new(),
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn line_step(&self) -> Result<&HybridUnitary> {
        self.line_step
            .get_or_init(|| four_pulse_step(&self.params))
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn circle_step(&self) -> &HybridUnitary {
        self.circle_step.get_or_init(|| circle_step(&self.params))
    }

    pub fn m_operator(&self, sign: i8) -> &HybridUnitary {
        let cell = if sign >= 0 {
            &self.m_plus
        } else {
            &self.m_minus
        };
        cell.get_or_init(|| crate::readout::m_operator(sign, &self.params))
    }

    pub fn d_operator(&self, sign: i8) -> &HybridUnitary {
        let cell = if sign >= 0 {
            &self.d_plus
        } else {
            &self.d_minus
        };
        cell.get_or_init(|| crate::readout::d_operator_signed(sign, &self.params))
    }
}

type CacheKey = (usize, u64, u64);

/// Shared compiled operators for `params`. Safe for concurrent use.
pub fn operators(params: &ModelParams) -> Result<Arc<CvOperators>> {
    params.validate()?;
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<CvOperators>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    Ok(guard
        .entry(params.cache_key())
        .or_insert_with(|| Arc::new(CvOperators::new(*params)))
        .clone())
}

/// Line walk in the oscillator tier, starting from `|0⟩ ⊗ coin0`.
pub fn run_cv_line(
    steps: usize,
    coin0: CoinVector,
    params: &ModelParams,
) -> Result<HybridFockState> {
    coin0.ensure_normalized()?;
    let ops = operators(params)?;
    let step = ops.line_step()?;
    let mut state = HybridFockState::product(&FockVector::vacuum(params.fock_dim), coin0);
    for _ in 0..steps {
        state = state.apply_checked(step, params)?;
    }
    Ok(state)
}

/// Circle walk in phase space, starting from `|α₀⟩ ⊗ coin0`.
pub fn run_cv_circle(
    steps: usize,
    alpha0: f64,
    coin0: CoinVector,
    params: &ModelParams,
) -> Result<HybridFockState> {
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(QwalkError::InvalidParameter {
            name: "alpha0",
            reason: format!("must be positive, got {alpha0}"),
        });
    }
    coin0.ensure_normalized()?;
    let ops = operators(params)?;
    let motion = coherent_state(re(alpha0), params)?;
    let mut state = HybridFockState::product(&motion, coin0);
    for _ in 0..steps {
        state = state.apply_checked(ops.circle_step(), params)?;
    }
    Ok(state)
}

/// Coherent amplitude of ring site `k` at radius `alpha0`.
pub fn ring_site_alpha(alpha0: f64, site: i64) -> C64 {
    let k = site.rem_euclid(4);
    // exact quarter turns, clockwise
    let unit = match k {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    };
    unit * alpha0
}

/// Hermite functions `⟨x|n⟩` for `n < count`.
pub fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    if count == 0 {
        return out;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if count > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for n in 1..count.saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
    out
}

/// `ψ(x) = Σ c_n ⟨x|n⟩`
pub fn wavefunction(motion: &FockVector, x: f64) -> C64 {
    hermite_functions(x, motion.dim())
        .iter()
        .zip(motion.amps.iter())
        .map(|(h, c)| c * h)
        .sum()
}

/// Position density `|ψ_↓(x)|² + |ψ_↑(x)|²`.
pub fn position_density(state: &HybridFockState, x: f64) -> f64 {
    let h = hermite_functions(x, state.fock_dim());
    let branch = |v: &FockVector| -> f64 {
        h.iter()
            .zip(v.amps.iter())
            .map(|(h, c)| c * h)
            .sum::<C64>()
            .norm_sqr()
    };
    branch(&state.down) + branch(&state.up)
}

const GL_ORDER: usize = 32;

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = z;
            weights[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        (nodes, weights)
    })
}

/// Integral of `f` over `[a, b]` with the fixed Gauss–Legendre rule.
pub fn integrate(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_legendre();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(weights)
        .map(|(z, w)| w * f(mid + half * z))
        .sum::<f64>()
        * half
}

/// Position readout by binning `|ψ(x)|²` into cells `[(d − ½)s, (d + ½)s)`.
///
/// The bin range covers the classical turning point of the highest Fock level.
pub fn position_distribution(state: &HybridFockState, params: &ModelParams) -> Distribution {
    bin_positions(|x| position_density(state, x), state.fock_dim(), params)
}

/// Bins an arbitrary position density of a state truncated at `fock_dim`.
pub fn bin_positions(
    density: impl Fn(f64) -> f64,
    fock_dim: usize,
    params: &ModelParams,
) -> Distribution {
    let s = params.step_displacement;
    let reach = ((2.0 * fock_dim as f64 + 1.0).sqrt() / s).ceil() as i64 + 2;
    let positions: Vec<i64> = (-reach..=reach).collect();
    let probabilities = positions
        .iter()
        .map(|&d| {
            let lo = (d as f64 - 0.5) * s;
            integrate(lo, lo + s, &density)
        })
        .collect();
    Distribution::new(Support::Line, positions, probabilities)
}

/// Ring-site readout: weight of each branch on the four site coherent states.
pub fn circle_site_distribution(
    state: &HybridFockState,
    alpha0: f64,
    params: &ModelParams,
) -> Result<Distribution> {
    let mut probabilities = Vec::with_capacity(4);
    for k in 0..4 {
        let site = coherent_state(ring_site_alpha(alpha0, k), params)?;
        probabilities.push(site.inner(&state.down).norm_sqr() + site.inner(&state.up).norm_sqr());
    }
    Ok(Distribution::new(
        Support::Ring,
        (0..4).collect(),
        probabilities,
    ))
}

/// Ring readout by phase-angle quadrants: the canonical phase distribution
/// `|Σ c_n e^{inθ}|²/2π` integrated over `[kπ/2 − π/4, kπ/2 + π/4)`.
pub fn phase_sector_distribution(state: &HybridFockState) -> Distribution {
    let d = state.fock_dim();
    let sector = |k: i64| -> f64 {
        let center = k as f64 * FRAC_PI_2;
        let (a, b) = (center - FRAC_PI_4, center + FRAC_PI_4);
        // I(j) = (1/2π)∫_a^b e^{ijθ} dθ
        let kernel: Vec<C64> = (0..d as i64)
            .map(|j| {
                if j == 0 {
                    re(0.25)
                } else {
                    let jf = j as f64;
                    (C64::from_polar(1.0, jf * b) - C64::from_polar(1.0, jf * a))
                        / C64::new(0.0, 2.0 * PI * jf)
                }
            })
            .collect();
        let branch = |v: &FockVector| -> f64 {
            let mut acc = re(0.0);
            for m in 0..d {
                for n in 0..d {
                    let j = m as i64 - n as i64;
                    let ker = if j >= 0 {
                        kernel[j as usize]
                    } else {
                        kernel[(-j) as usize].conj()
                    };
                    acc += v.amps[m] * v.amps[n].conj() * ker;
                }
            }
            acc.re
        };
        branch(&state.down) + branch(&state.up)
    };
    Distribution::new(
        Support::Ring,
        (0..4).collect(),
        (0..4).map(sector).collect(),
    )
}
