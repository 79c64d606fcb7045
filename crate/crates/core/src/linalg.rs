//! Small dense complex-vector helpers.

use num_complex::Complex64;

pub type CVec = Vec<Complex64>;

/// `a^H b`
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    norm_sqr(a).sqrt()
}

pub fn scale(a: &[Complex64], s: Complex64) -> CVec {
    a.iter().map(|x| x * s).collect()
}

/// Orthonormal basis of `span(vectors)` by modified Gram-Schmidt with one
/// re-orthogonalization pass. Directions whose residual falls below
/// `rel_tol` times their original norm are dropped.
pub fn orthonormal_basis<'a>(vectors: impl IntoIterator<Item = &'a [Complex64]>, rel_tol: f64) -> Vec<CVec> {
    let mut basis: Vec<CVec> = Vec::new();
    for v in vectors {
        let original = norm(v);
        if original == 0.0 {
            continue;
        }
        let mut r = v.to_vec();
        for _ in 0..2 {
            for u in &basis {
                let c = inner(u, &r);
                for (ri, ui) in r.iter_mut().zip(u) {
                    *ri -= c * ui;
                }
            }
        }
        let rn = norm(&r);
        if rn > rel_tol * original {
            basis.push(scale(&r, Complex64::new(1.0 / rn, 0.0)));
        }
    }
    basis
}

/// Component of `x` orthogonal to every vector of the orthonormal `basis`.
pub fn project_out(x: &[Complex64], basis: &[CVec]) -> CVec {
    let mut r = x.to_vec();
    for _ in 0..2 {
        for u in basis {
            let c = inner(u, &r);
            for (ri, ui) in r.iter_mut().zip(u) {
                *ri -= c * ui;
            }
        }
    }
    r
}
