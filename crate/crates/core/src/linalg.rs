//! Dense complex linear algebra used by the oscillator tier.
//!
//! The matrix exponential is the scaling-and-squaring method with a degree-13
//! Padé approximant (Higham 2005). Matrices here are at most a few hundred
//! rows, so a dense LU with partial pivoting is sufficient for the Padé solve.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::C64;

const THETA_13: f64 = 5.371_920_351_148_152;

const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

#[inline]
pub(crate) fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, re(1.0))
}

/// Conjugate transpose.
pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Maximum absolute column sum.
pub fn one_norm(a: &Array2<C64>) -> f64 {
    a.axis_iter(Axis(1))
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn frobenius_norm(a: ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
                .assign(&b.mapv(|z| aij * z));
        }
    }
    out
}

/// Matrix exponential by scaling and squaring.
///
/// Panics if `a` is not square.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return Array2::zeros((0, 0));
    }

    let norm = one_norm(a);
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let scaled = a.mapv(|z| z / 2f64.powi(squarings as i32));

    let mut result = pade13(&scaled);
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

fn pade13(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let b = &PADE_13;
    let eye = identity(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);

    let inner_u = &a6 * re(b[13]) + &a4 * re(b[11]) + &a2 * re(b[9]);
    let u = a.dot(
        &(a6.dot(&inner_u) + &a6 * re(b[7]) + &a4 * re(b[5]) + &a2 * re(b[3]) + &eye * re(b[1])),
    );

    let inner_v = &a6 * re(b[12]) + &a4 * re(b[10]) + &a2 * re(b[8]);
    let v = a6.dot(&inner_v) + &a6 * re(b[6]) + &a4 * re(b[4]) + &a2 * re(b[2]) + &eye * re(b[0]);

    solve(&(&v - &u), &(&v + &u))
}

/// Solves `a · x = b` by LU decomposition with partial pivoting.
///
/// Panics if `a` is singular to working precision; the Padé denominator never is.
pub fn solve(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.nrows());
    let mut lu = a.clone();
    let mut x = b.clone();

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| lu[[i, col]].norm().total_cmp(&lu[[j, col]].norm()))
            .unwrap();
        if pivot_row != col {
            for j in 0..n {
                lu.swap([col, j], [pivot_row, j]);
            }
            for j in 0..x.ncols() {
                x.swap([col, j], [pivot_row, j]);
            }
        }
        let pivot = lu[[col, col]];
        assert!(pivot.norm() > 1e-300, "singular matrix in LU solve");
        for row in col + 1..n {
            let factor = lu[[row, col]] / pivot;
            if factor == C64::new(0.0, 0.0) {
                continue;
            }
            for j in col..n {
                let v = lu[[col, j]];
                lu[[row, j]] -= factor * v;
            }
            for j in 0..x.ncols() {
                let v = x[[col, j]];
                x[[row, j]] -= factor * v;
            }
        }
    }

    for col in (0..n).rev() {
        let pivot = lu[[col, col]];
        for j in 0..x.ncols() {
            let mut acc = x[[col, j]];
            for k in col + 1..n {
                acc -= lu[[col, k]] * x[[k, j]];
            }
            x[[col, j]] = acc / pivot;
        }
    }
    x
}

/// Row/column indices of the low-lying Fock block of a coin-major hybrid
/// operator: levels `0..keep` of each of the `blocks` coin branches.
pub fn low_block_indices(fock_dim: usize, blocks: usize, keep: usize) -> Vec<usize> {
    (0..blocks)
        .flat_map(|b| (0..keep).map(move |n| b * fock_dim + n))
        .collect()
}

pub fn submatrix(a: &Array2<C64>, idx: &[usize]) -> Array2<C64> {
    Array2::from_shape_fn((idx.len(), idx.len()), |(i, j)| a[[idx[i], idx[j]]])
}

/// Frobenius distance between `a` and `e^{iφ} b` minimized over the global
/// phase φ, together with the optimal φ. Frobenius bounds the operator norm.
pub fn phase_aligned_distance(a: &Array2<C64>, b: &Array2<C64>) -> (f64, f64) {
    let overlap: C64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    let phi = if overlap.norm() > 0.0 {
        overlap.arg()
    } else {
        0.0
    };
    let phase = C64::from_polar(1.0, phi);
    let diff = a - &b.mapv(|z| phase * z);
    (frobenius_norm(diff.view()), phi)
}

/// `‖U†U − I‖_F` restricted to the given index block.
pub fn unitarity_defect(u: &Array2<C64>, idx: &[usize]) -> f64 {
    let sub = {
        let rows: Vec<usize> = (0..u.nrows()).collect();
        Array2::from_shape_fn((rows.len(), idx.len()), |(i, j)| u[[i, idx[j]]])
    };
    let gram = dagger(&sub).dot(&sub);
    frobenius_norm((&gram - &identity(idx.len())).view())
}

/// Cholesky test on `a + tol·I`; succeeds iff every eigenvalue of the
/// Hermitian matrix `a` is at least `−tol` (to rounding).
pub fn is_positive_semidefinite(a: &Array2<C64>, tol: f64) -> bool {
    let n = a.nrows();
    let mut l = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]].re + tol;
        for k in 0..j {
            diag -= l[[j, k]].norm_sqr();
        }
        if diag <= 0.0 {
            return false;
        }
        let ljj = diag.sqrt();
        l[[j, j]] = re(ljj);
        for i in j + 1..n {
            let mut acc = a[[i, j]];
            for k in 0..j {
                acc -= l[[i, k]] * l[[j, k]].conj();
            }
            l[[i, j]] = acc / ljj;
        }
    }
    true
}

pub fn vec_norm_sqr(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
