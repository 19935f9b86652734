//! Coin-readout protocols that expose how quantum the walk still is.
//!
//! After `N` steps the coin is measured; the motional state is then kicked by
//! a coin-conditioned displacement (`M̂± = e^{±isp̂σ_y}` on the line,
//! `D̂ = e^{ix̂σ_y}` on the circle) and the coin is measured again. For a
//! classical mixture of positions the second measurement is a fair coin;
//! coherence between positions two steps apart pulls it away from 1/2.
//!
//! Every curve is computed by enumerating both outcomes of the first
//! measurement; nothing is sampled.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use crate::cv::{
    coin_ops, operators, quad_ops, ring_site_alpha, HybridFockState, HybridUnitary, ModelParams,
};
use crate::decoherence::{
    evolve_cv_circle_density, evolve_cv_line_density, evolve_line_density, evolve_ring_density,
    DephasingRate, HybridDensity,
};
use crate::error::{QwalkError, Result};
use crate::linalg::{self, expm, kron, re};
use crate::walk::CoinVector;
use crate::C64;

/// Outcomes below this probability have no defined post-state.
pub const DEGENERATE_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    /// Coin ⊗ lattice; `M̂±` is a ±1-site shift in the σ_y eigenbasis and the
    /// circle sites are embedded as coherent states.
    #[default]
    Discrete,
    /// Truncated Fock space with literal matrix exponentials.
    Cv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Line,
    Circle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Curves cover walk lengths `1..=steps`.
    pub steps: usize,
    pub dephasing: DephasingRate,
    pub tier: Tier,
    pub params: ModelParams,
    pub coin0: CoinVector,
    /// Radius of the circle walk in phase space.
    pub alpha0: f64,
    /// Circle only: use `D̂±` by first outcome, as the line protocol does.
    pub conditioned: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            steps: 10,
            dephasing: DephasingRate::NONE,
            tier: Tier::Discrete,
            params: ModelParams::default(),
            coin0: CoinVector::DOWN,
            alpha0: 3.0,
            conditioned: false,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        self.coin0.ensure_normalized()?;
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(QwalkError::InvalidParameter {
                name: "alpha0",
                reason: format!("must be positive, got {}", self.alpha0),
            });
        }
        if self.tier == Tier::Cv {
            self.params.validate()?;
        }
        Ok(())
    }

    pub fn with_dephasing(self, dephasing: DephasingRate) -> Self {
        Self { dephasing, ..self }
    }
}

/// Probability of reading `|↓⟩` after `N` steps, for each listed `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutCurve {
    pub steps: Vec<usize>,
    pub p_down: Vec<f64>,
}

impl ReadoutCurve {
    pub fn new(steps: Vec<usize>, p_down: Vec<f64>) -> Result<Self> {
        let curve = Self { steps, p_down };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.len() != self.p_down.len() {
            return Err(QwalkError::InvalidParameter {
                name: "curve",
                reason: format!(
                    "{} steps but {} probabilities",
                    self.steps.len(),
                    self.p_down.len()
                ),
            });
        }
        if let Some(p) = self.p_down.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(QwalkError::InvalidParameter {
                name: "p_down",
                reason: format!("{p} is not a probability"),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn get(&self, step: usize) -> Option<f64> {
        self.steps
            .iter()
            .position(|&n| n == step)
            .map(|i| self.p_down[i])
    }

    /// `max |P(↓) − 1/2|`
    pub fn max_deviation(&self) -> f64 {
        self.p_down
            .iter()
            .map(|p| (p - 0.5).abs())
            .fold(0.0, f64::max)
    }
}

/// One outcome of a projective coin measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome<S> {
    pub probability: f64,
    pub state: S,
}

/// Both outcomes; a branch is `Err(DegenerateOutcome)` when its probability
/// is below [`DEGENERATE_TOL`] and must be skipped.
#[derive(Clone, Debug, PartialEq)]
pub struct CoinMeasurement<S> {
    pub down: Result<Outcome<S>>,
    pub up: Result<Outcome<S>>,
}

impl<S> CoinMeasurement<S> {
    fn branch(&self, coin: usize) -> Option<&Outcome<S>> {
        if coin == 0 {
            self.down.as_ref().ok()
        } else {
            self.up.as_ref().ok()
        }
    }
}

fn outcome<S>(
    name: &'static str,
    probability: f64,
    state: impl FnOnce() -> S,
) -> Result<Outcome<S>> {
    if probability < DEGENERATE_TOL {
        Err(QwalkError::DegenerateOutcome {
            outcome: name,
            probability,
        })
    } else {
        Ok(Outcome {
            probability,
            state: state(),
        })
    }
}

/// z-basis measurement of the coin of a pure hybrid state.
pub fn measure_coin(state: &HybridFockState) -> CoinMeasurement<HybridFockState> {
    let zero = crate::cv::FockVector {
        amps: Array1::zeros(state.fock_dim()),
    };
    let pd = state.down.norm_sqr();
    let pu = state.up.norm_sqr();
    CoinMeasurement {
        down: outcome("down", pd, || HybridFockState {
            down: crate::cv::FockVector {
                amps: state.down.amps.mapv(|z| z / pd.sqrt()),
            },
            up: zero.clone(),
        }),
        up: outcome("up", pu, || HybridFockState {
            down: zero.clone(),
            up: crate::cv::FockVector {
                amps: state.up.amps.mapv(|z| z / pu.sqrt()),
            },
        }),
    }
}

/// z-basis measurement of the coin of a mixed hybrid state.
pub fn measure_coin_density(rho: &HybridDensity) -> CoinMeasurement<HybridDensity> {
    let (pd, pu) = rho.coin_populations();
    let s = rho.sites();
    let project = |coin: usize, p: f64| {
        let mut m = Array2::zeros((2 * s, 2 * s));
        m.slice_mut(ndarray::s![
            coin * s..(coin + 1) * s,
            coin * s..(coin + 1) * s
        ])
        .assign(&rho.coin_block(coin, coin).mapv(|z| z / p));
        HybridDensity::new(m, s)
    };
    CoinMeasurement {
        down: outcome("down", pd, || project(0, pd)),
        up: outcome("up", pu, || project(1, pu)),
    }
}

fn sign_factor(sign: i8) -> f64 {
    if sign >= 0 {
        1.0
    } else {
        -1.0
    }
}

/// `M̂± = e^{±isp̂σ_y}` on the truncated hybrid space.
pub fn m_operator(sign: i8, params: &ModelParams) -> HybridUnitary {
    let (_, p, _) = quad_ops(params);
    let sy = coin_ops::to_array(coin_ops::SIGMA_Y);
    let k = C64::new(0.0, sign_factor(sign) * params.step_displacement);
    HybridUnitary::new(expm(&kron(&sy, &p).mapv(|z| z * k)), params.fock_dim)
}

/// `D̂± = e^{±ix̂σ_y}`.
pub fn d_operator_signed(sign: i8, params: &ModelParams) -> HybridUnitary {
    let (x, _, _) = quad_ops(params);
    let sy = coin_ops::to_array(coin_ops::SIGMA_Y);
    let k = C64::new(0.0, sign_factor(sign));
    HybridUnitary::new(expm(&kron(&sy, &x).mapv(|z| z * k)), params.fock_dim)
}

/// `D̂ = e^{ix̂σ_y}`.
pub fn d_operator(params: &ModelParams) -> HybridUnitary {
    d_operator_signed(1, params)
}

/// Lattice form of `M̂±` on a coin-major vector: in the σ_y eigenbasis the
/// `+1` component moves `∓1` site and the `−1` component `±1` site.
/// Amplitude pushed past either edge is dropped.
pub fn apply_discrete_m(sign: i8, v: ArrayView1<C64>, sites: usize) -> Array1<C64> {
    let i = C64::new(0.0, 1.0);
    let shift = |j: usize, by: i64| -> Option<usize> {
        let t = j as i64 + by;
        (0..sites as i64).contains(&t).then_some(t as usize)
    };
    let step = if sign >= 0 { 1 } else { -1 };
    let mut plus = vec![C64::new(0.0, 0.0); sites];
    let mut minus = vec![C64::new(0.0, 0.0); sites];
    for j in 0..sites {
        let (d, u) = (v[j], v[sites + j]);
        if let Some(t) = shift(j, -step) {
            plus[t] = (-i * d + u) * FRAC_1_SQRT_2;
        }
        if let Some(t) = shift(j, step) {
            minus[t] = (i * d + u) * FRAC_1_SQRT_2;
        }
    }
    let mut out = Array1::zeros(2 * sites);
    for j in 0..sites {
        out[j] = i * (plus[j] - minus[j]) * FRAC_1_SQRT_2;
        out[sites + j] = (plus[j] + minus[j]) * FRAC_1_SQRT_2;
    }
    out
}

/// Second-measurement probability of `|↓⟩` for a post-measurement state with
/// coin `coin` after the kick with the given sign.
trait Kick {
    fn p_down(&self, post: &HybridDensity, coin: usize, sign: i8) -> f64;
}

/// Line, discrete tier: literal lattice shift.
struct LatticeKick;

impl Kick for LatticeKick {
    fn p_down(&self, post: &HybridDensity, _coin: usize, sign: i8) -> f64 {
        let padded = post.padded(1);
        let sites = padded.sites();
        padded
            .conjugate_by(|v| apply_discrete_m(sign, v, sites))
            .coin_populations()
            .0
    }
}

/// Dense hybrid operator: `P(↓|c) = Tr[ρ_c U_{↓c}† U_{↓c}]`.
struct FockKick {
    /// `[coin][sign ≥ 0]`
    gram: [[Array2<C64>; 2]; 2],
}

impl FockKick {
    fn new(minus: &HybridUnitary, plus: &HybridUnitary) -> Self {
        let block_gram = |u: &HybridUnitary, coin: usize| {
            let d = u.fock_dim;
            let b = u
                .matrix
                .slice(ndarray::s![..d, coin * d..(coin + 1) * d])
                .to_owned();
            linalg::dagger(&b).dot(&b)
        };
        Self {
            gram: [
                [block_gram(minus, 0), block_gram(plus, 0)],
                [block_gram(minus, 1), block_gram(plus, 1)],
            ],
        }
    }
}

impl Kick for FockKick {
    fn p_down(&self, post: &HybridDensity, coin: usize, sign: i8) -> f64 {
        let g = &self.gram[coin][usize::from(sign >= 0)];
        trace_product(&post.coin_block(coin, coin), g)
    }
}

/// `Re Tr[a b]`
fn trace_product(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[[i, j]] * b[[j, i]];
        }
    }
    acc.re
}

/// `D(γ)|β⟩ = e^{(γβ* − γ*β)/2} |β + γ⟩`, returned as (phase, β + γ).
pub fn displace_coherent(gamma: C64, beta: C64) -> (C64, C64) {
    (
        ((gamma * beta.conj() - gamma.conj() * beta) / 2.0).exp(),
        beta + gamma,
    )
}

/// `⟨α|δ⟩` for coherent states.
pub fn coherent_overlap(alpha: C64, delta: C64) -> C64 {
    (-alpha.norm_sqr() / 2.0 - delta.norm_sqr() / 2.0 + alpha.conj() * delta).exp()
}

/// Matrix of `cos²(G)` and `sin²(G)` between coherent states `centers`, where
/// `e^{2iG} = D(gamma)`: entries `⟨c_k| · |c_j⟩`.
pub fn coherent_kernels(centers: &[C64], gamma: C64) -> (Array2<C64>, Array2<C64>) {
    let n = centers.len();
    let element = |k: usize, j: usize, g: C64| {
        let (phase, moved) = displace_coherent(g, centers[j]);
        phase * coherent_overlap(centers[k], moved)
    };
    let cos2 = Array2::from_shape_fn((n, n), |(k, j)| {
        (element(k, j, gamma) + element(k, j, -gamma)) / 2.0
    });
    let overlap = Array2::from_shape_fn((n, n), |(k, j)| coherent_overlap(centers[k], centers[j]));
    let cos_sq = (&overlap + &cos2) / re(2.0);
    let sin_sq = (&overlap - &cos2) / re(2.0);
    (cos_sq, sin_sq)
}

/// Circle, discrete tier: ring sites embedded as coherent states `α₀e^{−ikπ/2}`;
/// `D̂` acts through closed-form coherent-state matrix elements of `cos² x̂`.
struct EmbeddedKick {
    /// Indexed `[k][j] = ⟨α_k| K |α_j⟩`; `[0]` for `cos²`, `[1]` for `sin²`.
    kernels: [Array2<C64>; 2],
}

impl EmbeddedKick {
    fn new(alpha0: f64) -> Self {
        let centers: Vec<C64> = (0..4).map(|k| ring_site_alpha(alpha0, k)).collect();
        // e^{2ix̂} = D(i√2)
        let (cos_sq, sin_sq) = coherent_kernels(&centers, C64::new(0.0, SQRT_2));
        Self {
            kernels: [cos_sq, sin_sq],
        }
    }
}

impl Kick for EmbeddedKick {
    fn p_down(&self, post: &HybridDensity, coin: usize, _sign: i8) -> f64 {
        // Tr[Σ ρ_jk |α_j⟩⟨α_k| K] = Σ ρ_jk K_kj
        trace_product(&post.coin_block(coin, coin), &self.kernels[coin])
    }
}

fn readout_point(rho: &HybridDensity, kick: &dyn Kick, conditioned: bool) -> f64 {
    let m = measure_coin_density(rho);
    let mut total = 0.0;
    for coin in 0..2 {
        if let Some(branch) = m.branch(coin) {
            // ↑ → positive kick, ↓ → negative
            let sign = if !conditioned || coin == 1 { 1 } else { -1 };
            total += branch.probability * kick.p_down(&branch.state, coin, sign);
        }
    }
    total.clamp(0.0, 1.0)
}

/// `P(↓)` for `N = 0..=steps`.
pub fn readout_values(protocol: Protocol, config: &ProtocolConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let mut values = Vec::with_capacity(config.steps + 1);
    let (steps, coin0, rate) = (config.steps, config.coin0, config.dephasing);
    match (protocol, config.tier) {
        (Protocol::Line, Tier::Discrete) => {
            evolve_line_density(steps, coin0, rate, |_, rho| {
                values.push(readout_point(rho, &LatticeKick, true));
                Ok(())
            })?;
        }
        (Protocol::Circle, Tier::Discrete) => {
            let kick = EmbeddedKick::new(config.alpha0);
            evolve_ring_density(steps, coin0, rate, |_, rho| {
                values.push(readout_point(rho, &kick, config.conditioned));
                Ok(())
            })?;
        }
        (Protocol::Line, Tier::Cv) => {
            let ops = operators(&config.params)?;
            let kick = FockKick::new(ops.m_operator(-1), ops.m_operator(1));
            evolve_cv_line_density(steps, coin0, rate, &config.params, |_, rho| {
                values.push(readout_point(rho, &kick, true));
                Ok(())
            })?;
        }
        (Protocol::Circle, Tier::Cv) => {
            let ops = operators(&config.params)?;
            let kick = FockKick::new(ops.d_operator(-1), ops.d_operator(1));
            evolve_cv_circle_density(
                steps,
                config.alpha0,
                coin0,
                rate,
                &config.params,
                |_, rho| {
                    values.push(readout_point(rho, &kick, config.conditioned));
                    Ok(())
                },
            )?;
        }
    }
    Ok(values)
}

/// Readout curve over `N = 1..=steps`.
pub fn readout_curve(protocol: Protocol, config: &ProtocolConfig) -> Result<ReadoutCurve> {
    let values = readout_values(protocol, config)?;
    Ok(ReadoutCurve {
        steps: (1..=config.steps).collect(),
        p_down: values[1..].to_vec(),
    })
}

pub fn line_readout(config: &ProtocolConfig) -> Result<ReadoutCurve> {
    readout_curve(Protocol::Line, config)
}

pub fn circle_readout(config: &ProtocolConfig) -> Result<ReadoutCurve> {
    readout_curve(Protocol::Circle, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cv::{coherent_state, FockVector};
    use crate::walk::run_line;
    use std::f64::consts::E;

    fn cfg(tier: Tier, p: f64, steps: usize) -> ProtocolConfig {
        ProtocolConfig {
            steps,
            tier,
            dephasing: DephasingRate::new(p).unwrap(),
            ..ProtocolConfig::default()
        }
    }

    fn small_cv(p: f64, steps: usize) -> ProtocolConfig {
        ProtocolConfig {
            params: ModelParams::with_fock_dim(64),
            ..cfg(Tier::Cv, p, steps)
        }
    }

    #[test]
    fn measurement_of_product_states() {
        let vac = FockVector::vacuum(8);
        let m = measure_coin(&HybridFockState::product(&vac, CoinVector::DOWN));
        assert!((m.down.as_ref().unwrap().probability - 1.0).abs() < 1e-15);
        assert!(matches!(
            m.up,
            Err(QwalkError::DegenerateOutcome { outcome: "up", .. })
        ));

        let m = measure_coin(&HybridFockState::product(&vac, CoinVector::symmetric()));
        let (d, u) = (m.down.unwrap(), m.up.unwrap());
        assert!((d.probability - 0.5).abs() < 1e-15 && (u.probability - 0.5).abs() < 1e-15);
        assert!(
            (d.state.norm_sqr() - 1.0).abs() < 1e-14 && (u.state.norm_sqr() - 1.0).abs() < 1e-14
        );
    }

    #[test]
    fn dephased_symmetric_coin_reads_half() {
        let state = HybridFockState::product(&FockVector::vacuum(4), CoinVector::symmetric());
        let rho = crate::decoherence::dephase_coin(
            &HybridDensity::from_hybrid_state(&state),
            DephasingRate::COMPLETE,
        );
        let m = measure_coin_density(&rho);
        assert!((m.down.as_ref().unwrap().probability - 0.5).abs() < 1e-15);
        assert!((m.down.unwrap().state.trace() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn m_pair_is_inverse_and_unitary() {
        let params = ModelParams::with_fock_dim(64);
        let (plus, minus) = (m_operator(1, &params), m_operator(-1, &params));
        let prod = plus.after(&minus);
        let idx = prod.low_block_indices();
        let eye = linalg::identity(idx.len());
        assert!(
            linalg::frobenius_norm((&linalg::submatrix(&prod.matrix, &idx) - &eye).view()) < 1e-8
        );
        assert!(plus.unitarity_defect() < 1e-8);
        assert!(d_operator(&params).unitarity_defect() < 1e-8);
    }

    /// `|+y⟩ = (i|↓⟩ + |↑⟩)/√2`
    fn plus_y() -> CoinVector {
        CoinVector::new(C64::new(0.0, FRAC_1_SQRT_2), re(FRAC_1_SQRT_2))
    }

    #[test]
    fn m_on_sigma_y_eigenstate_is_a_displacement() {
        let params = ModelParams::with_fock_dim(64);
        let coh = coherent_state(C64::new(0.4, 0.2), &params).unwrap();
        let state = HybridFockState::product(&coh, plus_y());
        let out = state.apply(&m_operator(1, &params));
        // e^{ip̂} translates x by −1
        let want = crate::cv::translation(-1.0, &params).dot(&coh.amps);
        let expect = HybridFockState::product(&FockVector { amps: want }, plus_y());
        assert!(out.fidelity(&expect) > 1.0 - 1e-10);
    }

    #[test]
    fn d_on_sigma_y_eigenstate_is_a_momentum_kick() {
        let params = ModelParams::with_fock_dim(64);
        let coh = coherent_state(C64::new(0.3, -0.5), &params).unwrap();
        let out = HybridFockState::product(&coh, plus_y()).apply(&d_operator(&params));
        // e^{ix̂}|β⟩ = D(i/√2)|β⟩ up to phase
        let kicked = coherent_state(
            coh_shift(C64::new(0.3, -0.5), C64::new(0.0, FRAC_1_SQRT_2)),
            &params,
        )
        .unwrap();
        assert!(out.fidelity(&HybridFockState::product(&kicked, plus_y())) > 1.0 - 1e-10);
    }

    fn coh_shift(beta: C64, gamma: C64) -> C64 {
        displace_coherent(gamma, beta).1
    }

    #[test]
    fn discrete_m_pair_is_inverse() {
        let sites = 7;
        let v = Array1::from_shape_fn(2 * sites, |j| {
            if (2..5).contains(&(j % sites)) {
                C64::new(j as f64, 1.0)
            } else {
                re(0.0)
            }
        });
        let back = apply_discrete_m(-1, apply_discrete_m(1, v.view(), sites).view(), sites);
        assert!(back
            .iter()
            .zip(v.iter())
            .all(|(a, b)| (a - b).norm() < 1e-13));
    }

    #[test]
    fn vacuum_line_readout_matches_gaussian_integral() {
        // ⟨0|cos²p̂|0⟩ = (1 + e^{−1})/2 from ⟨e^{2ip̂}⟩ = e^{−1}
        let cv = readout_values(Protocol::Line, &small_cv(0.0, 0)).unwrap();
        assert!((cv[0] - (1.0 + 1.0 / E) / 2.0).abs() < 1e-10, "{}", cv[0]);
        // a point mass on the lattice has no coherence two sites apart
        let lattice = readout_values(Protocol::Line, &cfg(Tier::Discrete, 0.0, 0)).unwrap();
        assert!((lattice[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn vacuum_m_characteristic_function() {
        // ⟨e^{±ix̂}⟩_vac = e^{−1/4}
        let params = ModelParams::with_fock_dim(64);
        let (x, _, _) = quad_ops(&params);
        let kick = expm(&x.mapv(|z| z * C64::new(0.0, 1.0)));
        let vac = FockVector::vacuum(64);
        assert!((vac.expect(&kick) - re((-0.25f64).exp())).norm() < 1e-12);
    }

    #[test]
    fn circle_start_matches_closed_form() {
        // α₀ = 3: ⟨cos 2x̂⟩ = e^{−1} cos(6√2)
        let want = 0.5 + (-1.0f64).exp() * (6.0 * SQRT_2).cos() / 2.0;
        let discrete = readout_values(Protocol::Circle, &cfg(Tier::Discrete, 0.0, 0)).unwrap();
        assert!((discrete[0] - want).abs() < 1e-12, "{}", discrete[0]);
        let cv = readout_values(Protocol::Circle, &cfg(Tier::Cv, 0.0, 0)).unwrap();
        assert!((cv[0] - want).abs() < 1e-8, "{}", cv[0]);
    }

    #[test]
    fn lattice_readout_matches_two_site_coherence_formula() {
        for steps in 1..=8 {
            let state = run_line(steps, CoinVector::DOWN).unwrap();
            let a = state.amplitudes();
            let mut c = 0.0;
            for i in 0..a.len().saturating_sub(2) {
                c += (a[i].down.conj() * a[i + 2].down).re - (a[i].up.conj() * a[i + 2].up).re;
            }
            let want = 0.5 + c / 2.0;
            let got =
                readout_values(Protocol::Line, &cfg(Tier::Discrete, 0.0, steps)).unwrap()[steps];
            assert!((got - want).abs() < 1e-13, "N={steps}: {got} vs {want}");
        }
    }

    #[test]
    fn line_curve_for_down_coin() {
        let want = [
            0.5,
            0.75,
            0.5,
            0.4375,
            0.625,
            0.65625,
            0.5,
            0.48046875,
            0.6171875,
            0.630859375,
        ];
        let curve = line_readout(&cfg(Tier::Discrete, 0.0, 10)).unwrap();
        assert_eq!(curve.steps, (1..=10).collect::<Vec<_>>());
        for (got, want) in curve.p_down.iter().zip(want) {
            assert!((got - want).abs() < 1e-12, "{:?}", curve.p_down);
        }
        // two steps: only the final step's dephasing is visible
        for p in [0.1, 0.3] {
            let c = line_readout(&cfg(Tier::Discrete, p, 2)).unwrap();
            assert!((c.p_down[1] - (0.75 - 0.5 * p)).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_coin_line_readout_is_flat() {
        let config = ProtocolConfig {
            coin0: CoinVector::symmetric(),
            ..cfg(Tier::Discrete, 0.0, 12)
        };
        assert!(line_readout(&config).unwrap().max_deviation() < 1e-12);
    }

    #[test]
    fn complete_dephasing_reads_half() {
        for tier in [Tier::Discrete, Tier::Cv] {
            let config = if tier == Tier::Cv {
                small_cv(0.5, 6)
            } else {
                cfg(tier, 0.5, 10)
            };
            for protocol in [Protocol::Line, Protocol::Circle] {
                let config = ProtocolConfig {
                    params: ModelParams::with_fock_dim(96),
                    ..config
                };
                let curve = readout_curve(protocol, &config).unwrap();
                assert!(
                    curve.max_deviation() <= 1e-6,
                    "{protocol:?} {tier:?}: {:?}",
                    curve.p_down
                );
            }
        }
    }

    #[test]
    fn sensitivity_at_five_steps_shrinks_with_rate() {
        for protocol in [Protocol::Line, Protocol::Circle] {
            let devs: Vec<f64> = (0..=5)
                .map(|k| {
                    let v =
                        readout_values(protocol, &cfg(Tier::Discrete, k as f64 / 10.0, 5)).unwrap();
                    (v[5] - 0.5).abs()
                })
                .collect();
            for w in devs.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{protocol:?}: {devs:?}");
            }
        }
    }

    #[test]
    fn circle_extremes_at_full_turns() {
        let v = readout_values(Protocol::Circle, &cfg(Tier::Discrete, 0.0, 10)).unwrap();
        for n in [4, 8] {
            let dev = |m: usize| (v[m] - 0.5).abs();
            assert!(
                dev(n) > dev(n - 1) + 0.05 && dev(n) > dev(n + 1) + 0.05,
                "{v:?}"
            );
        }
        for n in [3, 7] {
            assert!((v[n] - 0.5).abs() < 1e-9, "{v:?}");
        }
    }

    #[test]
    fn circle_conditioning_does_not_change_the_reading() {
        let base = cfg(Tier::Discrete, 0.2, 8);
        let a = circle_readout(&base).unwrap();
        let b = circle_readout(&ProtocolConfig {
            conditioned: true,
            ..base
        })
        .unwrap();
        for (x, y) in a.p_down.iter().zip(&b.p_down) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn circle_tiers_agree() {
        for p in [0.0, 0.25] {
            let discrete = readout_values(Protocol::Circle, &cfg(Tier::Discrete, p, 8)).unwrap();
            let cv = readout_values(Protocol::Circle, &cfg(Tier::Cv, p, 8)).unwrap();
            for (n, (a, b)) in discrete.iter().zip(&cv).enumerate() {
                assert!((a - b).abs() < 1e-6, "p={p} N={n}: {a} vs {b}");
            }
        }
    }

    /// The oscillator line walk is `Σ_d ψ_c(d) |β_d⟩` with `β_d = d s/√2`,
    /// so its readout follows from the lattice density and coherent-state
    /// matrix elements of `cos²(sp̂)`; `e^{2isp̂} = D(−√2 s)`.
    #[test]
    fn line_tiers_agree_through_coherent_embedding() {
        let steps = 5;
        for p in [0.0, 0.3] {
            let rate = DephasingRate::new(p).unwrap();
            let cv = readout_values(Protocol::Line, &small_cv(p, steps)).unwrap();
            let mut embedded = Vec::new();
            evolve_line_density(steps, CoinVector::DOWN, rate, |_, rho| {
                let centers: Vec<C64> = (0..rho.sites())
                    .map(|i| re((i as f64 - steps as f64) / SQRT_2))
                    .collect();
                let (cos_sq, sin_sq) = coherent_kernels(&centers, re(-SQRT_2));
                embedded.push(
                    trace_product(&rho.coin_block(0, 0), &cos_sq)
                        + trace_product(&rho.coin_block(1, 1), &sin_sq),
                );
                Ok(())
            })
            .unwrap();
            for (n, (a, b)) in embedded.iter().zip(&cv).enumerate() {
                assert!((a - b).abs() < 1e-8, "p={p} N={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn curves_validate_probabilities() {
        assert!(ReadoutCurve::new(vec![1, 2], vec![0.5, 1.2]).is_err());
        assert!(ReadoutCurve::new(vec![1, 2], vec![0.5]).is_err());
        let c = ReadoutCurve::new(vec![1, 2, 3], vec![0.5, 0.75, 0.5]).unwrap();
        assert_eq!(c.get(2), Some(0.75));
        assert_eq!(c.max_deviation(), 0.25);
    }
}
