//! Symmetric tridiagonal eigenproblems where only a few rows of the
//! eigenvector matrix are needed (implicit QL with Wilkinson shifts).

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PartialEigen {
    pub values: Vec<f64>,
    /// `rows[r][ν]` is component r of eigenvector ν.
    pub rows: Vec<Vec<f64>>,
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off` (`off[i]` couples i and i+1), together with the first
/// `n_rows` components of every normalized eigenvector. O(n² · n_rows).
pub fn eigen_first_rows(diag: &[f64], off: &[f64], n_rows: usize) -> Result<PartialEigen> {
    let n = diag.len();
    assert_eq!(off.len() + 1, n.max(1));
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    // Site-major: z[k * n_rows + r] is row r of eigenvector column k.
    let nr = n_rows;
    let mut z = vec![0.0; n * nr];
    for r in 0..nr.min(n) {
        z[r * nr + r] = 1.0;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Eigen(n));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + 1.0).sqrt();
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                // Plain sqrt: hypot dominates the sweep and entries are O(1).
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let (lo, hi) = z[i * nr..(i + 2) * nr].split_at_mut(nr);
                for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                    let f = *b;
                    *b = s * *a + c * f;
                    *a = c * *a - s * f;
                }
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let rows = (0..nr).map(|r| (0..n).map(|k| z[k * nr + r]).collect()).collect();
    Ok(PartialEigen { values: d, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matches_dense_eigensolver(diag in proptest::collection::vec(-2.0f64..2.0, 2..40), seed in 0u64..1000) {
            let n = diag.len();
            let off: Vec<f64> = (0..n - 1).map(|k| ((k as u64 * 7919 + seed) % 97) as f64 / 50.0 - 0.9).collect();
            let pe = eigen_first_rows(&diag, &off, 2.min(n)).unwrap();
            let mut a = DMatrix::<f64>::zeros(n, n);
            for i in 0..n { a[(i, i)] = diag[i]; }
            for i in 0..n - 1 { a[(i, i + 1)] = off[i]; a[(i + 1, i)] = off[i]; }
            let se = SymmetricEigen::new(a.clone());
            let mut want: Vec<f64> = se.eigenvalues.iter().copied().collect();
            want.sort_by(f64::total_cmp);
            let mut got = pe.values.clone();
            got.sort_by(f64::total_cmp);
            for (x, y) in got.iter().zip(&want) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            // Weight sums and spectral moments of the first row.
            let w0: f64 = pe.rows[0].iter().map(|x| x * x).sum();
            prop_assert!((w0 - 1.0).abs() < 1e-12);
            let m1: f64 = pe.rows[0].iter().zip(&pe.values).map(|(x, l)| x * x * l).sum();
            prop_assert!((m1 - diag[0]).abs() < 1e-12);
            if n > 1 {
                let c01: f64 = pe.rows[0].iter().zip(&pe.rows[1]).zip(&pe.values).map(|((x, y), l)| x * y * l).sum();
                prop_assert!((c01 - off[0]).abs() < 1e-12);
            }
        }
    }
}
