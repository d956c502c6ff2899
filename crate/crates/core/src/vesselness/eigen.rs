//! Symmetric 3×3 eigen-decomposition by cyclic Jacobi rotations.

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric 3×3 matrix, ordered `|λ1| ≤ |λ2| ≤ |λ3|`
/// (ties broken by signed value, ascending). `vectors[i]` is the unit
/// eigenvector of `values[i]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianEigen {
    pub values: [f64; 3],
    pub vectors: [[f64; 3]; 3],
}

impl HessianEigen {
    /// `Σ λ_i e_i e_iᵀ`.
    pub fn reconstruct(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for k in 0..3 {
            let (l, e) = (self.values[k], self.vectors[k]);
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] += l * e[i] * e[j];
                }
            }
        }
        m
    }
}

fn check_symmetric(h: &[[f64; 3]; 3]) -> Result<()> {
    let scale = h.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
    for i in 0..3 {
        for j in (i + 1)..3 {
            if !h[i][j].is_finite() || (h[i][j] - h[j][i]).abs() > 1e-9 * scale {
                return Err(Error::InvalidParameter(format!(
                    "matrix is not symmetric: h[{i}][{j}] = {}, h[{j}][{i}] = {}",
                    h[i][j], h[j][i]
                )));
            }
        }
    }
    Ok(())
}

/// Jacobi sweeps on the upper triangle; returns eigenvalues and the
/// accumulated rotation whose columns are eigenvectors.
fn jacobi(h: &[[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut a = *h;
    for i in 0..3 {
        for j in (i + 1)..3 {
            let s = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = s;
            a[j][i] = s;
        }
    }
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _sweep in 0..64 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off == 0.0 {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // A' = Jᵀ A J with J the (p, q) rotation
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// Eigen-decomposition of a symmetric matrix (symmetric to 1e-9 relative).
pub fn eigen_sym3(h: &[[f64; 3]; 3]) -> Result<HessianEigen> {
    check_symmetric(h)?;
    let (vals, v) = jacobi(h);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| {
        vals[i]
            .abs()
            .total_cmp(&vals[j].abs())
            .then(vals[i].total_cmp(&vals[j]))
    });
    let mut values = [0.0; 3];
    let mut vectors = [[0.0; 3]; 3];
    for (slot, &k) in order.iter().enumerate() {
        values[slot] = vals[k];
        let mut e = [v[0][k], v[1][k], v[2][k]];
        // sign convention: largest-magnitude component positive
        let big = (0..3).max_by(|&i, &j| e[i].abs().total_cmp(&e[j].abs())).unwrap();
        if e[big] < 0.0 {
            e.iter_mut().for_each(|x| *x = -*x);
        }
        vectors[slot] = e;
    }
    Ok(HessianEigen { values, vectors })
}

/// Eigenvalues only, sorted by magnitude. Skips the symmetry check; used on
/// Hessians that are symmetric by construction.
pub(crate) fn eigenvalues_sym3(h: &[[f64; 3]; 3]) -> [f64; 3] {
    let (mut vals, _) = jacobi(h);
    vals.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
    vals
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    #[test]
    fn identity() {
        let e = eigen_sym3(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(e.values, [1.0, 1.0, 1.0]);
        for i in 0..3 {
            for j in 0..3 {
                let d = dot(e.vectors[i], e.vectors[j]);
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_is_sorted_by_magnitude() {
        let e = eigen_sym3(&[[-5.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 3.0]]).unwrap();
        assert_eq!(e.values, [1.0, 3.0, -5.0]);
        assert_eq!(e.vectors[0], [0.0, 1.0, 0.0]);
        assert_eq!(e.vectors[1], [0.0, 0.0, 1.0]);
        assert_eq!(e.vectors[2], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn magnitude_ties_prefer_negative_first() {
        let e = eigen_sym3(&[[2.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, 0.5]]).unwrap();
        assert_eq!(e.values, [0.5, -2.0, 2.0]);
    }

    #[test]
    fn rejects_non_symmetric() {
        let h = [[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(eigen_sym3(&h).is_err());
    }

    #[test]
    fn reconstructs_dense_matrix() {
        let h = [[4.0, 1.0, -2.0], [1.0, 2.0, 0.5], [-2.0, 0.5, -3.0]];
        let e = eigen_sym3(&h).unwrap();
        let r = e.reconstruct();
        for i in 0..3 {
            for j in 0..3 {
                assert!((r[i][j] - h[i][j]).abs() < 1e-12);
            }
        }
    }
}
