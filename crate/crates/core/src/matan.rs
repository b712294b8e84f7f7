//! Dense matrix analysis primitives.
//!
//! Everything downstream (posterior moments, risk terms, bound constants) is
//! built from four operations: extreme singular values, condition numbers,
//! symmetric positive-definite solves and the von Neumann trace bound.
//!
//! Singular values always come from a full decomposition. The matrices in this
//! crate are small (tens of columns, at most a few thousand rows) and the bound
//! checks compare against them at tight tolerances, so iterative estimates are
//! not good enough.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative asymmetry below which a matrix is silently symmetrized before a
/// Cholesky factorization. Anything larger is rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Condition number above which posterior solves abort.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Matrices up to this order get an exact (eigenvalue) condition check;
/// larger ones fall back to the Cholesky pivot-ratio estimate.
const EXACT_CONDITION_MAX_DIM: usize = 64;

/// A dense real matrix whose entries are all finite.
///
/// Read access goes through `Deref` to the underlying [`DMatrix`]; every
/// constructor validates finiteness.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix(DMatrix<f64>);

impl Matrix {
    pub fn new(inner: DMatrix<f64>) -> Result<Self> {
        if let Some((idx, _)) = inner.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            // column-major storage
            let rows = inner.nrows().max(1);
            return Err(Error::NonFinite {
                row: idx % rows,
                col: idx / rows,
            });
        }
        Ok(Matrix(inner))
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Matrix::new(DMatrix::from_row_slice(rows, cols, data))
    }

    /// Builds a matrix from a list of equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::Dimension(format!(
                "row {bad} has {} entries, expected {cols}",
                rows[bad].len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Matrix::from_row_slice(rows.len(), cols, &flat)
    }

    pub fn identity(n: usize) -> Self {
        Matrix(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix(DMatrix::zeros(rows, cols))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Matrix::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

impl Deref for Matrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

/// Largest and smallest singular value of a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularExtremes {
    pub s_min: f64,
    pub s_max: f64,
}

impl SingularExtremes {
    /// `s_max / s_min`; infinite for a rank-deficient matrix.
    pub fn condition(&self) -> f64 {
        if self.s_min > 0.0 {
            self.s_max / self.s_min
        } else {
            f64::INFINITY
        }
    }
}

fn sorted_singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = a.singular_values().iter().map(|s| s.abs()).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Extreme singular values of `a`; the smallest is taken over the
/// `min(rows, cols)` singular values.
pub fn singular_extremes(a: &DMatrix<f64>) -> Result<SingularExtremes> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Dimension("singular values of an empty matrix".into()));
    }
    let sv = sorted_singular_values(a);
    Ok(SingularExtremes {
        s_min: *sv.last().expect("nonempty"),
        s_max: sv[0],
    })
}

/// `s_max(a) / s_min(a)`.
pub fn condition_number(a: &DMatrix<f64>) -> Result<f64> {
    let ext = singular_extremes(a)?;
    if ext.s_min <= ext.s_max * f64::EPSILON {
        return Err(Error::Singular(format!(
            "smallest singular value {:.3e} against largest {:.3e}",
            ext.s_min, ext.s_max
        )));
    }
    Ok(ext.s_max / ext.s_min)
}

/// Returns `(a + aᵀ) / 2` when `a` is symmetric to within
/// [`SYMMETRY_TOLERANCE`] relative to its largest entry.
pub fn symmetrized(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.amax();
    let skew = (a - a.transpose()).amax();
    let asymmetry = if scale > 0.0 { skew / scale } else { 0.0 };
    if asymmetry > SYMMETRY_TOLERANCE {
        return Err(Error::Asymmetric {
            asymmetry,
            tolerance: SYMMETRY_TOLERANCE,
        });
    }
    Ok((a + a.transpose()) * 0.5)
}

/// Lower-triangular Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factors a symmetric matrix. Only the lower triangle is read.
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::Dimension(format!(
                "Cholesky of a non-square {}x{} matrix",
                n,
                a.ncols()
            )));
        }
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)];
            for p in 0..j {
                diag -= l[(j, p)] * l[(j, p)];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: j,
                    value: diag,
                });
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for p in 0..j {
                    s -= l[(i, p)] * l[(j, p)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Solves `A X = B`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let y = self
            .l
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a positive diagonal");
        self.l
            .tr_solve_lower_triangular(&y)
            .expect("Cholesky factor has a positive diagonal")
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = self
            .l
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a positive diagonal");
        self.l
            .tr_solve_lower_triangular(&y)
            .expect("Cholesky factor has a positive diagonal")
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let inv = self.solve(&DMatrix::identity(self.dim(), self.dim()));
        (&inv + inv.transpose()) * 0.5
    }

    /// `(max Lᵢᵢ / min Lᵢᵢ)²`, a lower bound on the condition number of `A`.
    pub fn pivot_condition_estimate(&self) -> f64 {
        let d = self.l.diagonal();
        let (lo, hi) = d
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        (hi / lo).powi(2)
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Condition number of a symmetric positive-definite matrix from its
/// eigenvalues. Infinite when the smallest eigenvalue is not positive.
pub fn spd_condition(a: &DMatrix<f64>) -> f64 {
    let ev = symmetric_eigenvalues(a);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Symmetrizes, factors and refuses matrices whose condition number exceeds
/// [`CONDITION_LIMIT`]. `context` names the matrix in the error.
pub fn factor_spd_checked(a: &DMatrix<f64>, context: &str) -> Result<Cholesky> {
    let sym = symmetrized(a)?;
    let chol = Cholesky::factor(&sym)?;
    let condition = if sym.nrows() <= EXACT_CONDITION_MAX_DIM {
        spd_condition(&sym)
    } else {
        chol.pivot_condition_estimate()
    };
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned {
            context: context.to_string(),
            condition,
            limit: CONDITION_LIMIT,
        });
    }
    Ok(chol)
}

/// Solves `A X = B` for symmetric positive-definite `A`.
///
/// Mild asymmetry (below [`SYMMETRY_TOLERANCE`]) is removed by symmetrizing;
/// a failed factorization reports the offending pivot.
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "solve with a {}x{} system and {} right-hand-side rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let chol = Cholesky::factor(&symmetrized(a)?)?;
    Matrix::new(chol.solve(b))
}

/// `Σᵢ aᵢ bᵢ` over the descending singular values of `a` and `b`; an upper
/// bound on `|Tr(AB)|`.
pub fn von_neumann_bound(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "von Neumann bound needs two square matrices of equal size, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let sa = sorted_singular_values(a);
    let sb = sorted_singular_values(b);
    Ok(sa.iter().zip(&sb).map(|(x, y)| x * y).sum())
}

/// Normwise backward residual `‖AX − B‖ / (‖A‖‖X‖ + ‖B‖)` in Frobenius norm.
pub fn relative_residual(a: &DMatrix<f64>, x: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let r = (a * x - b).norm();
    let scale = a.norm() * x.norm() + b.norm();
    if scale == 0.0 {
        0.0
    } else {
        r / scale
    }
}

/// `|a − b| ≤ max(rel · max(|a|, |b|), abs)`.
pub fn approx_eq(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= (rel * a.abs().max(b.abs())).max(abs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    const REL: f64 = 1e-8;
    const ABS: f64 = 1e-12;

    fn random_matrix(rng: &mut ChaCha20Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_spd(rng: &mut ChaCha20Rng, n: usize) -> DMatrix<f64> {
        let a = random_matrix(rng, n, n);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn identity_extremes() {
        let ext = singular_extremes(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!((ext.s_min, ext.s_max), (1.0, 1.0));
    }

    #[test]
    fn diagonal_extremes() {
        let a = Matrix::from_diagonal(&[2.0, 0.5]).unwrap();
        let ext = singular_extremes(&a).unwrap();
        assert!(approx_eq(ext.s_min, 0.5, REL, ABS));
        assert!(approx_eq(ext.s_max, 2.0, REL, ABS));
    }

    #[test]
    fn extremes_match_gram_eigenvalues() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 5, 3);
        let ev = symmetric_eigenvalues(&(a.transpose() * &a));
        let ext = singular_extremes(&a).unwrap();
        assert!(approx_eq(ext.s_min, ev[0].sqrt(), REL, ABS));
        assert!(approx_eq(ext.s_max, ev[2].sqrt(), REL, ABS));
    }

    #[test]
    fn empty_matrix_is_rejected() {
        assert!(matches!(
            singular_extremes(&DMatrix::zeros(0, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn condition_numbers() {
        assert_eq!(condition_number(&DMatrix::identity(4, 4)).unwrap(), 1.0);
        let d = Matrix::from_diagonal(&[4.0, 1.0]).unwrap();
        assert!(approx_eq(condition_number(&d).unwrap(), 4.0, REL, ABS));

        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let s = random_spd(&mut rng, 4);
        let ev = symmetric_eigenvalues(&s);
        assert!(approx_eq(
            condition_number(&s).unwrap(),
            ev[3] / ev[0],
            REL,
            ABS
        ));

        let singular = Matrix::from_diagonal(&[1.0, 0.0]).unwrap();
        assert!(matches!(condition_number(&singular), Err(Error::Singular(_))));
    }

    #[test]
    fn solve_spd_examples() {
        let b = Matrix::from_row_slice(2, 2, &[1.0, -2.0, 3.5, 0.25]).unwrap();
        assert_eq!(solve_spd(&Matrix::identity(2), &b).unwrap(), b);

        let a = Matrix::from_diagonal(&[2.0, 4.0]).unwrap();
        let rhs = Matrix::from_row_slice(2, 1, &[2.0, 4.0]).unwrap();
        let x = solve_spd(&a, &rhs).unwrap();
        assert!(approx_eq(x[(0, 0)], 1.0, REL, ABS));
        assert!(approx_eq(x[(1, 0)], 1.0, REL, ABS));
    }

    #[test]
    fn solve_spd_residual() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for n in 1..8 {
            let a = random_spd(&mut rng, n);
            let b = random_matrix(&mut rng, n, 3);
            let x = solve_spd(&Matrix::new(a.clone()).unwrap(), &Matrix::new(b.clone()).unwrap())
                .unwrap();
            assert!(relative_residual(&a, &x, &b) <= 1e-10);
        }
    }

    #[test]
    fn solve_spd_rejects_indefinite_with_pivot() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
        let err = solve_spd(&a, &Matrix::identity(2)).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { pivot: 1, .. }), "{err}");
    }

    #[test]
    fn solve_spd_symmetrizes_small_asymmetry_only() {
        let tiny = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0 + 1e-13, 2.0]).unwrap();
        assert!(solve_spd(&tiny, &Matrix::identity(2)).is_ok());
        let large = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.1, 2.0]).unwrap();
        assert!(matches!(
            solve_spd(&large, &Matrix::identity(2)),
            Err(Error::Asymmetric { .. })
        ));
    }

    #[test]
    fn checked_factor_refuses_ill_conditioned() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-13]));
        assert!(matches!(
            factor_spd_checked(&a, "test"),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn von_neumann_examples() {
        let n = 4;
        let i = DMatrix::<f64>::identity(n, n);
        assert!(approx_eq(von_neumann_bound(&i, &i).unwrap(), n as f64, REL, ABS));
        assert!(approx_eq((&i * &i).trace(), n as f64, REL, ABS));
        assert_eq!(von_neumann_bound(&DMatrix::zeros(n, n), &i).unwrap(), 0.0);

        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 4, 4);
        let b = random_matrix(&mut rng, 4, 4);
        assert!((&a * &b).trace().abs() <= von_neumann_bound(&a, &b).unwrap() * (1.0 + REL));

        assert!(von_neumann_bound(&DMatrix::zeros(2, 3), &DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn matrix_rejects_non_finite() {
        let err = Matrix::from_row_slice(2, 2, &[1.0, f64::NAN, 0.0, 1.0]).unwrap_err();
        assert_eq!(err, Error::NonFinite { row: 0, col: 1 });
    }

    fn square_pair() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>)> {
        (1usize..6).prop_flat_map(|n| {
            (
                prop::collection::vec(-3.0f64..3.0, n * n),
                prop::collection::vec(-3.0f64..3.0, n * n),
            )
                .prop_map(move |(a, b)| {
                    (
                        DMatrix::from_row_slice(n, n, &a),
                        DMatrix::from_row_slice(n, n, &b),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn sum_lemma((a, b) in square_pair()) {
            let sab = singular_extremes(&(&a + &b)).unwrap();
            let sa = singular_extremes(&a).unwrap();
            let sb = singular_extremes(&b).unwrap();
            prop_assert!(sab.s_max <= (sa.s_max + sb.s_max) * (1.0 + REL) + ABS);

            // PD branch
            let n = a.nrows();
            let pa = &a * a.transpose() + DMatrix::identity(n, n) * 1e-3;
            let pb = &b * b.transpose() + DMatrix::identity(n, n) * 1e-3;
            let spab = singular_extremes(&(&pa + &pb)).unwrap();
            let spa = singular_extremes(&pa).unwrap();
            let spb = singular_extremes(&pb).unwrap();
            prop_assert!(spab.s_min >= (spa.s_min + spb.s_min) * (1.0 - REL) - ABS);
        }

        #[test]
        fn product_lemma((a, b) in square_pair()) {
            let sab = singular_extremes(&(&a * &b)).unwrap();
            let sa = singular_extremes(&a).unwrap();
            let sb = singular_extremes(&b).unwrap();
            prop_assert!(sab.s_max <= sa.s_max * sb.s_max * (1.0 + REL) + ABS);
            prop_assert!(sab.s_min >= sa.s_min * sb.s_min * (1.0 - REL) - ABS);
        }

        #[test]
        fn trace_lemma((a, b) in square_pair()) {
            let n = a.nrows() as f64;
            let vn = von_neumann_bound(&a, &b).unwrap();
            let tr = (&a * &b).trace().abs();
            let sa = singular_extremes(&a).unwrap();
            let sb = singular_extremes(&b).unwrap();
            prop_assert!(tr <= vn * (1.0 + REL) + ABS);
            prop_assert!(vn <= n * sa.s_max * sb.s_max * (1.0 + REL) + ABS);
        }
    }
}
