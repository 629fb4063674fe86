//! Dense complex linear algebra shared by the form and operator modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Sum with a fixed pairwise reduction tree, so results do not depend on how
/// callers chunk the input.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entry of `m - m^*` relative to the largest entry of `m`.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

pub fn symmetrize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = nalgebra::SymmetricEigen::new(symmetrize(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Lower Cholesky factor of a Hermitian positive-definite matrix.
pub fn cholesky(m: &CMat) -> Result<CMat> {
    // the complex factorization happily takes square roots of negative
    // pivots, so definiteness is read off the diagonal of the factor
    let factor = nalgebra::Cholesky::new(symmetrize(m)).map(|c| c.l()).filter(|l| {
        l.diagonal()
            .iter()
            .all(|d| d.re > 0.0 && d.im.abs() <= 1e-12 * d.re && d.re.is_finite())
    });
    match factor {
        Some(l) => Ok(l),
        None => {
            let (values, _) = hermitian_eigen(m);
            Err(Error::Decomposition {
                reason: "matrix is not positive definite".into(),
                eigenvalue: values.first().copied().unwrap_or(f64::NAN),
            })
        }
    }
}

/// Inverse of a lower-triangular matrix.
pub fn lower_inverse(l: &CMat) -> Result<CMat> {
    let n = l.nrows();
    l.solve_lower_triangular(&CMat::identity(n, n))
        .ok_or_else(|| Error::Decomposition {
            reason: "singular triangular factor".into(),
            eigenvalue: 0.0,
        })
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    m.clone().try_inverse().ok_or_else(|| Error::Decomposition {
        reason: "singular matrix".into(),
        eigenvalue: 0.0,
    })
}

/// Singular value decomposition with singular values sorted descending.
///
/// Wide inputs are padded with zero rows so that `v` always spans the full
/// domain, which is what null-space extraction needs.
pub struct Svd {
    pub u: CMat,
    pub singular_values: Vec<f64>,
    /// Columns are right singular vectors, matching `singular_values`.
    pub v: CMat,
}

pub fn svd(m: &CMat) -> Svd {
    let (rows, cols) = m.shape();
    let padded;
    let work = if rows < cols {
        let mut p = CMat::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        padded = p;
        &padded
    } else {
        m
    };
    let dec = work.clone().svd(true, true);
    let u = dec.u.expect("u requested");
    let v_t = dec.v_t.expect("v_t requested");
    let k = dec.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    let singular_values = order.iter().map(|&i| dec.singular_values[i]).collect();
    let u_sorted = CMat::from_fn(u.nrows(), k, |r, c| u[(r, order[c])]);
    let v = CMat::from_fn(v_t.ncols(), k, |r, c| v_t[(order[c], r)].conj());
    let u_sorted = if rows < cols {
        u_sorted.rows(0, rows).into_owned()
    } else {
        u_sorted
    };
    Svd {
        u: u_sorted,
        singular_values,
        v,
    }
}

pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    svd(m).singular_values[0]
}

/// Outcome of a rank decision on a descending singular value list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankDecision {
    pub rank: usize,
    /// Ratio between the smallest kept and the largest dropped value
    /// (infinite when nothing is dropped or nothing is kept).
    pub gap: f64,
}

/// Values below `relative * largest` are null. The decision is refused when
/// the kept/dropped ratio is below `min_gap`.
pub fn decide_rank(singular_values: &[f64], relative: f64, min_gap: f64) -> Result<RankDecision> {
    let largest = singular_values.first().copied().unwrap_or(0.0);
    if largest == 0.0 {
        return Ok(RankDecision {
            rank: 0,
            gap: f64::INFINITY,
        });
    }
    let threshold = relative * largest;
    let rank = singular_values.iter().take_while(|&&s| s >= threshold).count();
    let gap = if rank == singular_values.len() || rank == 0 {
        f64::INFINITY
    } else {
        singular_values[rank - 1] / singular_values[rank].max(f64::MIN_POSITIVE)
    };
    if gap < min_gap {
        return Err(Error::IndeterminateRank {
            gap,
            required: min_gap,
        });
    }
    Ok(RankDecision { rank, gap })
}

/// Orthonormal basis (columns) of the column space of `m`.
pub fn orthonormal_columns(m: &CMat) -> CMat {
    if m.ncols() == 0 {
        return CMat::zeros(m.nrows(), 0);
    }
    let dec = svd(m);
    let top = dec.singular_values.first().copied().unwrap_or(0.0);
    let rank = dec
        .singular_values
        .iter()
        .take_while(|&&s| s > 1e-12 * top)
        .count();
    dec.u.columns(0, rank).into_owned()
}

/// Orthonormal basis of the orthogonal complement of the column space of
/// `basis` (assumed orthonormal) in `C^n`.
pub fn orthogonal_complement(basis: &CMat, n: usize) -> CMat {
    if basis.ncols() == 0 {
        return CMat::identity(n, n);
    }
    let projector = CMat::identity(n, n) - basis * basis.adjoint();
    let (values, vectors) = hermitian_eigen(&projector);
    let keep: Vec<usize> = (0..n).filter(|&i| values[i] > 0.5).collect();
    CMat::from_fn(n, keep.len(), |r, c| vectors[(r, keep[c])])
}

/// Principal angles (radians, ascending) between the column spans of two
/// matrices of equal column rank.
pub fn principal_angles(a: &CMat, b: &CMat) -> Vec<f64> {
    let qa = orthonormal_columns(a);
    let qb = orthonormal_columns(b);
    if qa.ncols() == 0 || qb.ncols() == 0 {
        return Vec::new();
    }
    // sines from the residual of projecting one basis onto the other stay
    // accurate for tiny angles, unlike arccos of the cross Gram
    let residual = &qb - &qa * (qa.adjoint() * &qb);
    let mut angles: Vec<f64> = svd(&residual)
        .singular_values
        .iter()
        .take(qa.ncols().min(qb.ncols()))
        .map(|&s| s.min(1.0).asin())
        .collect();
    angles.sort_by(f64::total_cmp);
    angles
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 5050.0);
    }

    #[test]
    fn svd_sorted_and_reconstructs() {
        let m = CMat::from_row_slice(3, 2, &[c(1.0, 0.0), c(0.0, 2.0), c(3.0, 0.0), c(1.0, 1.0), c(0.0, 0.0), c(0.5, -1.0)]);
        let d = svd(&m);
        assert!(d.singular_values[0] >= d.singular_values[1]);
        let s = CMat::from_diagonal(&CVec::from_iterator(2, d.singular_values.iter().map(|&x| c(x, 0.0))));
        let back = &d.u * s * d.v.adjoint();
        assert!((back - m).norm() < 1e-12);
    }

    #[test]
    fn wide_svd_keeps_full_domain() {
        let m = CMat::from_row_slice(1, 3, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let d = svd(&m);
        assert_eq!(d.v.ncols(), 3);
        let rank = decide_rank(&d.singular_values, 1e-8, 1e2).unwrap().rank;
        assert_eq!(rank, 1);
    }

    #[test]
    fn rank_gap_guard_refuses_ambiguous_spectra() {
        let sv = [1.0, 1e-8 * 3.0, 1e-8 * 0.9];
        assert!(matches!(
            decide_rank(&sv, 1e-8, 1e2),
            Err(Error::IndeterminateRank { .. })
        ));
        let sv = [1.0, 0.5, 1e-14];
        assert_eq!(decide_rank(&sv, 1e-8, 1e2).unwrap().rank, 2);
    }

    #[test]
    fn cholesky_reports_offending_eigenvalue() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-2.0, 0.0)]);
        match cholesky(&m) {
            Err(Error::Decomposition { eigenvalue, .. }) => assert!((eigenvalue + 2.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn principal_angles_of_equal_spans_vanish() {
        let a = CMat::from_row_slice(3, 1, &[c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        let b = a.scale(-3.0);
        assert!(principal_angles(&a, &b)[0] < 1e-12);
        let e = CMat::from_row_slice(3, 1, &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!((principal_angles(&a, &e)[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
