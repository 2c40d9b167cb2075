//! Dense helpers for the `d × d` (d ≤ 3) matrices carried by beams and
//! level sets, where nalgebra's decompositions need a concrete dimension.

use nalgebra::SMatrix;

use crate::dirac::C64;

/// Determinant for `D ∈ {1, 2, 3}`.
pub fn det<const D: usize>(m: &SMatrix<C64, D, D>) -> C64 {
    match D {
        0 => C64::new(1.0, 0.0),
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => panic!("determinant only implemented for d <= 3"),
    }
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations,
/// sorted ascending.
pub fn symmetric_eigenvalues<const D: usize>(m: &SMatrix<f64, D, D>) -> SMatrix<f64, D, 1> {
    let mut a = (m + m.transpose()) * 0.5;
    for _sweep in 0..50 {
        let mut off = 0.0;
        for p in 0..D {
            for q in p + 1..D {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off <= 1e-30 * a.norm_squared().max(1e-300) {
            break;
        }
        for p in 0..D {
            for q in p + 1..D {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..D {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..D {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev = a.diagonal();
    ev.as_mut_slice().sort_by(|x, y| x.total_cmp(y));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Matrix3};

    #[test]
    fn det_matches_nalgebra() {
        let m = Matrix3::new(1.0, 2.0, -1.0, 0.5, 3.0, 0.2, -0.7, 0.1, 2.0).map(|x| C64::new(x, 0.3 * x));
        assert!((det(&m) - m.determinant()).norm() < 1e-12);
        let m2 = Matrix2::new(
            C64::new(1.0, 1.0),
            C64::new(0.0, 2.0),
            C64::new(-1.0, 0.0),
            C64::new(3.0, 0.5),
        );
        assert!((det(&m2) - m2.determinant()).norm() < 1e-14);
    }

    #[test]
    fn jacobi_matches_nalgebra() {
        let m = Matrix3::new(2.0, 0.3, -0.4, 0.3, 1.0, 0.25, -0.4, 0.25, 0.5);
        let mut expect = m.symmetric_eigenvalues();
        expect.as_mut_slice().sort_by(|x: &f64, y| x.total_cmp(y));
        assert!((symmetric_eigenvalues(&m) - expect).norm() < 1e-12);
        let d = Matrix2::new(1.0, 0.0, 0.0, -2.0);
        assert_eq!(symmetric_eigenvalues(&d)[0], -2.0);
    }
}
