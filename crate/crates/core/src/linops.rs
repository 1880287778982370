//! Dense kernels: the row pseudo-inverse `(AAᵀ)⁻¹A`, induced `∞→q` norms,
//! best k-term approximation error and the [`DesignMatrix`] wrapper that
//! caches the constants `c`, `c1`, `c2` used by every error bound.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular-value threshold below which a matrix counts as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Largest column count accepted by the vertex-enumeration norms.
pub const BRUTE_FORCE_CAP: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormTarget {
    InfToInf,
    InfToOne,
    InfToTwo,
}

pub fn ensure_finite(m: &DenseMatrix) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has non-finite entries".into()))
    }
}

/// Ratio of smallest to largest singular value; 0 for an all-zero matrix.
pub fn condition_ratio(a: &DenseMatrix) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// `G = (AAᵀ)⁻¹A` through a QR factorization of `Aᵀ` (`G = R⁻¹Qᵀ`); `AAᵀ` is never inverted.
pub fn least_squares_row_inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    ensure_finite(a)?;
    let (m, n) = a.shape();
    if m == 0 || m > n {
        return Err(Error::BadDim(format!("expected 0 < rows <= cols, got {m}x{n}")));
    }
    let ratio = condition_ratio(a);
    if ratio < RANK_TOL {
        return Err(Error::RankDeficient { ratio });
    }
    let qr = a.transpose().qr();
    let q = qr.q();
    let r = qr.r();
    r.solve_upper_triangular(&q.transpose())
        .ok_or_else(|| Error::NumericalFailure("triangular solve failed".into()))
}

/// Orthonormal basis of the null space of a full-row-rank `A`, as an `n×(n−m)` matrix.
pub fn null_space_basis(a: &DenseMatrix) -> DenseMatrix {
    let (m, n) = a.shape();
    // Householder QR of [Aᵀ | I] yields a full n×n orthogonal Q whose trailing
    // columns span the orthogonal complement of the row space.
    let mut aug = DenseMatrix::zeros(n, m + n);
    aug.view_mut((0, 0), (n, m)).copy_from(&a.transpose());
    aug.view_mut((0, m), (n, n)).fill_with_identity();
    let q = aug.qr().q();
    q.columns(m, n - m).into_owned()
}

/// `‖M‖_{∞→q} = max_{‖x‖_∞≤1} ‖Mx‖_q`.
///
/// `InfToInf` is the maximum absolute row sum. The other two targets maximize a
/// convex function over the cube, so the maximum sits at a vertex; all
/// `2^(cols−1)` sign vectors with `x₀ = +1` are visited in Gray-code order.
pub fn induced_norm(m: &DenseMatrix, target: NormTarget) -> Result<f64> {
    ensure_finite(m)?;
    let (rows, cols) = m.shape();
    if target == NormTarget::InfToInf {
        return Ok((0..rows)
            .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max));
    }
    if cols > BRUTE_FORCE_CAP {
        return Err(Error::TooLarge {
            what: "induced norm vertex enumeration (columns)",
            needed: cols as u128,
            cap: BRUTE_FORCE_CAP as u128,
        });
    }
    if cols == 0 {
        return Ok(0.0);
    }
    let measure = |v: &Vector| match target {
        NormTarget::InfToOne => v.iter().map(|x| x.abs()).sum::<f64>(),
        _ => v.norm(),
    };
    let mut signs = vec![1.0_f64; cols];
    let recompute = |signs: &[f64]| -> Vector {
        let x = Vector::from_column_slice(signs);
        m * x
    };
    let mut mx = recompute(&signs);
    let mut best = measure(&mx);
    let total: u64 = 1u64 << (cols - 1);
    for step in 1..total {
        // Flip the coordinate given by the lowest set bit (Gray code), skipping column 0.
        let j = step.trailing_zeros() as usize + 1;
        signs[j] = -signs[j];
        if step % 1024 == 0 {
            mx = recompute(&signs);
        } else {
            mx.axpy(2.0 * signs[j], &m.column(j), 1.0);
        }
        let val = measure(&mx);
        if val > best {
            best = val;
        }
    }
    Ok(best)
}

/// `σ_k(x)₁`: sum of the `n−k` smallest absolute entries.
pub fn best_k_term_error(x: &[f64], k: usize) -> f64 {
    if k >= x.len() {
        return 0.0;
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| a.total_cmp(b));
    mags[..x.len() - k].iter().sum()
}

/// Indices of the `k` largest `|x_i|`, ties broken by smaller index, returned sorted.
pub fn top_k_support(x: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[j].abs().total_cmp(&x[i].abs()).then(i.cmp(&j)));
    let mut s: Vec<usize> = idx.into_iter().take(k.min(x.len())).collect();
    s.sort_unstable();
    s
}

pub fn norm1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Full-row-rank design matrix with its cached pseudo-inverse and bound constants
/// `c = ‖G‖_{∞→∞}`, `c1 = ‖G‖_{∞→1}`, `c2 = ‖G‖_{∞→2}` where `G = (AAᵀ)⁻¹A`.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    a: DenseMatrix,
    g: DenseMatrix,
    c: f64,
    c1: Option<f64>,
    c2: Option<f64>,
}

impl DesignMatrix {
    pub fn new(a: DenseMatrix) -> Result<Self> {
        let (m, n) = a.shape();
        if m >= n {
            return Err(Error::BadDim(format!("design matrix must have m < n, got {m}x{n}")));
        }
        let g = least_squares_row_inverse(&a)?;
        let c = induced_norm(&g, NormTarget::InfToInf)?;
        let (c1, c2) = if n <= BRUTE_FORCE_CAP {
            (
                Some(induced_norm(&g, NormTarget::InfToOne)?),
                Some(induced_norm(&g, NormTarget::InfToTwo)?),
            )
        } else {
            (None, None)
        };
        Ok(Self { a, g, c, c1, c2 })
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    /// `(AAᵀ)⁻¹A`.
    pub fn g(&self) -> &DenseMatrix {
        &self.g
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn c1(&self) -> Option<f64> {
        self.c1
    }

    pub fn c2(&self) -> Option<f64> {
        self.c2
    }

    /// Minimum-norm solution of `Ax = y`, i.e. `Gᵀy`.
    pub fn least_squares_solution(&self, y: &Vector) -> Vector {
        self.g.transpose() * y
    }

    /// Returns a copy scaled by `factor`; the row space is unchanged for `factor ≠ 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.a * factor)
    }
}
