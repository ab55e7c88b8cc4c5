//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Everything here is desk-scale (dimensions of a few thousand at most), so
//! dense decompositions are fine. Complex Hermitian problems are routed
//! through the standard real symmetric embedding [Re, -Im; Im, Re] to stay on
//! nalgebra's pure-Rust eigensolver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

/// Eigenpairs of a complex Hermitian matrix, ascending by eigenvalue.
///
/// Uses the real symmetric embedding, which doubles every eigenvalue; the
/// duplicates are merged back by pairing each eigenvector with its i-rotated
/// partner.
pub fn hermitian_eig(h: &CMat) -> (RVec, CMat) {
    let n = h.nrows();
    assert_eq!(n, h.ncols());
    let mut s = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            s[(i, j)] = z.re;
            s[(i, j + n)] = -z.im;
            s[(i + n, j)] = z.im;
            s[(i + n, j + n)] = z.re;
        }
    }
    let eig = s.symmetric_eigen();
    // Sort the 2n real eigenpairs ascending, then keep every other one while
    // re-orthogonalizing inside (numerically) degenerate clusters.
    let mut idx: Vec<usize> = (0..2 * n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let to_complex = |col: usize| -> CVec {
        CVec::from_fn(n, |i, _| C64::new(eig.eigenvectors[(i, col)], eig.eigenvectors[(i + n, col)]))
    };
    let mut vals = Vec::with_capacity(n);
    let mut vecs: Vec<CVec> = Vec::with_capacity(n);
    for &col in &idx {
        if vecs.len() == n {
            break;
        }
        let mut v = to_complex(col);
        // Project out what we already took; the embedding yields each complex
        // eigenvector twice (v and iv), so half the columns are redundant.
        for w in &vecs {
            let c: C64 = w.dotc(&v);
            v -= w * c;
        }
        let nrm = v.norm();
        if nrm > 1e-8 {
            v /= C64::new(nrm, 0.0);
            vals.push(eig.eigenvalues[col]);
            vecs.push(v);
        }
    }
    assert_eq!(vecs.len(), n, "real embedding lost eigenvectors");
    let mut m = CMat::zeros(n, n);
    for (j, v) in vecs.iter().enumerate() {
        m.set_column(j, v);
    }
    (RVec::from_vec(vals), m)
}

/// Least-squares solution of `a x = b` via SVD with a relative cutoff.
pub fn lsq(a: &RMat, b: &RVec, rcond: f64) -> RVec {
    let svd = a.clone().svd(true, true);
    svd.solve(b, rcond * svd.singular_values.max()).expect("svd solve")
}

pub fn lsq_c(a: &CMat, b: &CVec, rcond: f64) -> CVec {
    let svd = a.clone().svd(true, true);
    svd.solve(b, rcond * svd.singular_values.max()).expect("svd solve")
}

/// Singular values of a complex matrix, descending, computed from the
/// Hermitian Gram matrix. Accurate down to roughly sqrt(machine eps) relative
/// to the largest value, which is all the rank reports need.
pub fn singular_values_gram(m: &CMat) -> Vec<f64> {
    let (r, c) = m.shape();
    let gram = if c <= r { m.adjoint() * m } else { m * m.adjoint() };
    let (vals, _) = hermitian_eig(&gram);
    let mut s: Vec<f64> = vals.iter().map(|&v| v.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank at a relative threshold tau (against the largest singular value).
pub fn rank_at(svals: &[f64], tau: f64) -> usize {
    match svals.first() {
        None => 0,
        Some(&s0) if s0 == 0.0 => 0,
        Some(&s0) => svals.iter().take_while(|&&s| s > tau * s0).count(),
    }
}

/// Rank of a real matrix at a relative singular-value threshold.
pub fn rank_real(a: &RMat, tau: f64) -> usize {
    let svd = a.clone().svd(false, false);
    let s0 = svd.singular_values.max();
    if s0 == 0.0 {
        return 0;
    }
    svd.singular_values.iter().filter(|&&s| s > tau * s0).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_eig_reproduces_matrix() {
        let n = 7;
        let mut h = CMat::zeros(n, n);
        let mut seed = 1u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for i in 0..n {
            for j in i..n {
                let z = if i == j {
                    C64::new(next(), 0.0)
                } else {
                    C64::new(next(), next())
                };
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
        let (vals, vecs) = hermitian_eig(&h);
        let mut d = CMat::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = C64::new(vals[i], 0.0);
        }
        let rebuilt = &vecs * d * vecs.adjoint();
        assert!((&rebuilt - &h).norm() < 1e-10 * h.norm().max(1.0));
        let gram = vecs.adjoint() * &vecs;
        assert!((&gram - CMat::identity(n, n)).norm() < 1e-10);
    }

    #[test]
    fn gram_singular_values_match_direct() {
        let a = RMat::from_row_slice(3, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.25]);
        let ac = CMat::from_fn(3, 2, |i, j| C64::new(a[(i, j)], 0.0));
        let s = singular_values_gram(&ac);
        let svd = a.svd(false, false);
        let mut direct: Vec<f64> = svd.singular_values.iter().cloned().collect();
        direct.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in s.iter().zip(direct.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
