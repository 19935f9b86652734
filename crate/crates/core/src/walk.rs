//! Idealized coined walks on the integer line and on a four-site ring.
//!
//! Each step applies the Hadamard coin at every site and then moves the
//! `down` component one site right (`+1`, or `+π/2` on the ring) and the `up`
//! component one site left.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use serde::{Deserialize, Serialize};

use crate::error::{QwalkError, Result};
use crate::C64;

/// Tolerance for accepting a caller-supplied coin as normalized.
pub const COIN_NORM_TOL: f64 = 1e-9;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Two complex amplitudes over the coin states `|↓⟩`, `|↑⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoinVector {
    pub down: C64,
    pub up: C64,
}

impl CoinVector {
    pub const DOWN: CoinVector = CoinVector {
        down: C64::new(1.0, 0.0),
        up: ZERO,
    };
    pub const UP: CoinVector = CoinVector {
        down: ZERO,
        up: C64::new(1.0, 0.0),
    };
    pub const ZERO: CoinVector = CoinVector {
        down: ZERO,
        up: ZERO,
    };

    pub fn new(down: C64, up: C64) -> Self {
        Self { down, up }
    }

    /// `(|↓⟩ + i|↑⟩)/√2`, the coin whose line walk stays centered.
    pub fn symmetric() -> Self {
        Self {
            down: C64::new(FRAC_1_SQRT_2, 0.0),
            up: C64::new(0.0, FRAC_1_SQRT_2),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.down.norm_sqr() + self.up.norm_sqr()
    }

    pub fn ensure_normalized(&self) -> Result<()> {
        let norm_sq = self.norm_sqr();
        if (norm_sq - 1.0).abs() > COIN_NORM_TOL || !norm_sq.is_finite() {
            return Err(QwalkError::NotNormalized {
                norm_sq,
                tol: COIN_NORM_TOL,
            });
        }
        Ok(())
    }

    pub fn hadamard(self) -> Self {
        Self {
            down: (self.down + self.up) * FRAC_1_SQRT_2,
            up: (self.down - self.up) * FRAC_1_SQRT_2,
        }
    }

    pub fn scale(self, k: C64) -> Self {
        Self {
            down: self.down * k,
            up: self.up * k,
        }
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &CoinVector) -> C64 {
        self.down.conj() * other.down + self.up.conj() * other.up
    }

    pub fn as_array(&self) -> [C64; 2] {
        [self.down, self.up]
    }
}

pub fn hadamard(coin: CoinVector) -> CoinVector {
    coin.hadamard()
}

/// Pure walker-plus-coin state on the line after `step_count` steps.
///
/// Stored densely over `d ∈ [−N, N]`; entry `i` holds position `i − N`.
#[derive(Clone, Debug, PartialEq)]
pub struct LineState {
    step_count: usize,
    amplitudes: Vec<CoinVector>,
}

impl LineState {
    /// Walker at the origin with the given coin, zero steps taken.
    pub fn at_origin(coin: CoinVector) -> Self {
        Self {
            step_count: 0,
            amplitudes: vec![coin],
        }
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn amplitudes(&self) -> &[CoinVector] {
        &self.amplitudes
    }

    pub fn positions(&self) -> impl Iterator<Item = i64> + '_ {
        let n = self.step_count as i64;
        -n..=n
    }

    pub fn amplitude(&self, d: i64) -> CoinVector {
        let idx = d + self.step_count as i64;
        if idx < 0 {
            return CoinVector::ZERO;
        }
        self.amplitudes
            .get(idx as usize)
            .copied()
            .unwrap_or(CoinVector::ZERO)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(CoinVector::norm_sqr).sum()
    }

    pub fn distribution(&self) -> Distribution {
        Distribution::new(
            Support::Line,
            self.positions().collect(),
            self.amplitudes.iter().map(CoinVector::norm_sqr).collect(),
        )
    }
}

pub fn step_line(state: &LineState) -> LineState {
    let width = state.amplitudes.len() + 2;
    let mut next = vec![CoinVector::ZERO; width];
    for (i, coin) in state.amplitudes.iter().enumerate() {
        let h = coin.hadamard();
        // old index i sits at new index i + 1
        next[i + 2].down += h.down;
        next[i].up += h.up;
    }
    LineState {
        step_count: state.step_count + 1,
        amplitudes: next,
    }
}

pub fn run_line(steps: usize, coin0: CoinVector) -> Result<LineState> {
    coin0.ensure_normalized()?;
    let mut state = LineState::at_origin(coin0);
    for _ in 0..steps {
        state = step_line(&state);
    }
    Ok(state)
}

/// Pure state on the four-site ring; site `k` sits at angle `θ = kπ/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RingState {
    pub amplitudes: [CoinVector; 4],
}

impl RingState {
    pub fn at_origin(coin: CoinVector) -> Self {
        let mut amplitudes = [CoinVector::ZERO; 4];
        amplitudes[0] = coin;
        Self { amplitudes }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(CoinVector::norm_sqr).sum()
    }

    pub fn inner(&self, other: &RingState) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.inner(b))
            .sum()
    }

    /// `|⟨self|other⟩|²`, insensitive to global phase.
    pub fn fidelity(&self, other: &RingState) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn distribution(&self) -> Distribution {
        Distribution::new(
            Support::Ring,
            (0..4).collect(),
            self.amplitudes.iter().map(CoinVector::norm_sqr).collect(),
        )
    }
}

pub fn step_ring(state: &RingState) -> RingState {
    let mut next = [CoinVector::ZERO; 4];
    for (k, coin) in state.amplitudes.iter().enumerate() {
        let h = coin.hadamard();
        next[(k + 1) % 4].down += h.down;
        next[(k + 3) % 4].up += h.up;
    }
    RingState { amplitudes: next }
}

pub fn run_ring(steps: usize, coin0: CoinVector) -> Result<RingState> {
    coin0.ensure_normalized()?;
    let mut state = RingState::at_origin(coin0);
    for _ in 0..steps {
        state = step_ring(&state);
    }
    Ok(state)
}

/// What the position labels of a [`Distribution`] mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Support {
    /// Integer positions `d` on the line.
    Line,
    /// Ring sites `k ∈ {0,1,2,3}`, angle `kπ/2`, with `k = 3` reported as `−π/2`.
    Ring,
}

/// Probability over position labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub support: Support,
    pub positions: Vec<i64>,
    pub probabilities: Vec<f64>,
}

impl Distribution {
    pub fn new(support: Support, positions: Vec<i64>, probabilities: Vec<f64>) -> Self {
        assert_eq!(positions.len(), probabilities.len());
        Self {
            support,
            positions,
            probabilities,
        }
    }

    pub fn get(&self, position: i64) -> f64 {
        self.positions
            .iter()
            .position(|&d| d == position)
            .map_or(0.0, |i| self.probabilities[i])
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// Numeric value of the `i`-th label: `d` on the line, the angle in
    /// `(−π, π]` on the ring.
    pub fn value(&self, i: usize) -> f64 {
        match self.support {
            Support::Line => self.positions[i] as f64,
            Support::Ring => ring_angle(self.positions[i]),
        }
    }

    pub fn label(&self, i: usize) -> String {
        match self.support {
            Support::Line => self.positions[i].to_string(),
            Support::Ring => ring_label(self.positions[i]).to_string(),
        }
    }

    /// `Σ |p − q|` over the union of both supports.
    pub fn l1_distance(&self, other: &Distribution) -> f64 {
        let mut labels: Vec<i64> = self
            .positions
            .iter()
            .chain(&other.positions)
            .copied()
            .collect();
        labels.sort_unstable();
        labels.dedup();
        labels
            .iter()
            .map(|&d| (self.get(d) - other.get(d)).abs())
            .sum()
    }
}

pub fn ring_angle(site: i64) -> f64 {
    match site.rem_euclid(4) {
        3 => -FRAC_PI_2,
        k => k as f64 * FRAC_PI_2,
    }
}

pub fn ring_label(site: i64) -> &'static str {
    match site.rem_euclid(4) {
        0 => "0",
        1 => "pi/2",
        2 => "pi",
        _ => "-pi/2",
    }
}

pub fn parse_ring_label(label: &str) -> Option<i64> {
    match label.trim() {
        "0" => Some(0),
        "pi/2" => Some(1),
        "pi" => Some(2),
        "-pi/2" => Some(3),
        _ => None,
    }
}

/// Binomial distribution of the unbiased classical walk after `steps` steps.
pub fn classical_line_distribution(steps: usize) -> Distribution {
    let n = steps as i64;
    let positions: Vec<i64> = (-n..=n).collect();
    let mut probabilities = vec![0.0; positions.len()];
    let weights = binomial_half(steps);
    for (k, w) in weights.into_iter().enumerate() {
        // k right-moves: d = 2k − N, stored at index d + N = 2k
        probabilities[2 * k] = w;
    }
    Distribution::new(Support::Line, positions, probabilities)
}

/// `C(n, k) / 2ⁿ` for `k = 0..=n`.
fn binomial_half(n: usize) -> Vec<f64> {
    if n <= 1000 {
        let mut out = Vec::with_capacity(n + 1);
        let mut p = 0.5f64.powi(n as i32);
        out.push(p);
        for k in 1..=n {
            p = p * (n - k + 1) as f64 / k as f64;
            out.push(p);
        }
        out
    } else {
        let base = -(n as f64) * std::f64::consts::LN_2;
        let mut log_c = 0.0;
        let mut out = vec![base.exp()];
        for k in 1..=n {
            log_c += ((n - k + 1) as f64).ln() - (k as f64).ln();
            out.push((log_c + base).exp());
        }
        out
    }
}

/// Classical walk on the ring with steps of `±π/2`.
pub fn classical_circle_distribution(steps: usize) -> Distribution {
    let probabilities = if steps == 0 {
        vec![1.0, 0.0, 0.0, 0.0]
    } else if steps % 2 == 1 {
        vec![0.0, 0.5, 0.0, 0.5]
    } else {
        vec![0.5, 0.0, 0.5, 0.0]
    };
    Distribution::new(Support::Ring, (0..4).collect(), probabilities)
}

/// Anything with a Born-rule position distribution.
pub trait PositionMeasure {
    fn position_distribution(&self) -> Distribution;
}

impl PositionMeasure for LineState {
    fn position_distribution(&self) -> Distribution {
        self.distribution()
    }
}

impl PositionMeasure for RingState {
    fn position_distribution(&self) -> Distribution {
        self.distribution()
    }
}

pub fn distribution<S: PositionMeasure>(state: &S) -> Distribution {
    state.position_distribution()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkStats {
    pub mean: f64,
    pub stddev: f64,
}

pub fn stats(dist: &Distribution) -> WalkStats {
    let total = dist.total();
    let mean = (0..dist.positions.len())
        .map(|i| dist.probabilities[i] * dist.value(i))
        .sum::<f64>()
        / total;
    let var = (0..dist.positions.len())
        .map(|i| dist.probabilities[i] * (dist.value(i) - mean).powi(2))
        .sum::<f64>()
        / total;
    WalkStats {
        mean,
        stddev: var.max(0.0).sqrt(),
    }
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Standard deviation of the quantum line walk for each `N` in `steps`,
/// computed incrementally.
pub fn quantum_line_stddevs(steps: &[usize], coin0: CoinVector) -> Result<Vec<f64>> {
    coin0.ensure_normalized()?;
    let max = steps.iter().copied().max().unwrap_or(0);
    let mut state = LineState::at_origin(coin0);
    let mut by_n = vec![stats(&state.distribution()).stddev];
    for _ in 0..max {
        state = step_line(&state);
        by_n.push(stats(&state.distribution()).stddev);
    }
    Ok(steps.iter().map(|&n| by_n[n]).collect())
}

/// Least-squares slope of the quantum-walk standard deviation over
/// `N ∈ [from, to]`.
pub fn quantum_sigma_slope(from: usize, to: usize, coin0: CoinVector) -> Result<f64> {
    let ns: Vec<usize> = (from..=to).collect();
    let sigmas = quantum_line_stddevs(&ns, coin0)?;
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    Ok(least_squares_slope(&xs, &sigmas))
}
