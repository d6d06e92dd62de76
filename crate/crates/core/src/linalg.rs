//! Pointwise dense linear algebra on 2×2 and 3×3 row-major blocks.

use nalgebra::{Matrix2, Matrix3};

/// Inverts the `n × n` block `m` into `out`. Returns `false` if singular.
pub fn invert(n: usize, m: &[f64], out: &mut [f64]) -> bool {
    match n {
        2 => match Matrix2::from_row_slice(&m[..4]).try_inverse() {
            Some(inv) => {
                copy_rows2(&inv, out);
                true
            }
            None => false,
        },
        3 => match Matrix3::from_row_slice(&m[..9]).try_inverse() {
            Some(inv) => {
                copy_rows3(&inv, out);
                true
            }
            None => false,
        },
        _ => unreachable!("dimension {n}"),
    }
}

fn copy_rows2(m: &Matrix2<f64>, out: &mut [f64]) {
    for i in 0..2 {
        for j in 0..2 {
            out[i * 2 + j] = m[(i, j)];
        }
    }
}

fn copy_rows3(m: &Matrix3<f64>, out: &mut [f64]) {
    for i in 0..3 {
        for j in 0..3 {
            out[i * 3 + j] = m[(i, j)];
        }
    }
}

/// Smallest and largest eigenvalue of a symmetric block.
pub fn sym_eig_extremes(n: usize, m: &[f64]) -> (f64, f64) {
    let ev: &[f64] = &match n {
        2 => {
            let e = Matrix2::from_row_slice(&m[..4]).symmetric_eigenvalues();
            [e[0], e[1], e[1]]
        }
        3 => {
            let e = Matrix3::from_row_slice(&m[..9]).symmetric_eigenvalues();
            [e[0], e[1], e[2]]
        }
        _ => unreachable!("dimension {n}"),
    };
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// `g(u, v)` for a metric block.
pub fn inner(n: usize, g: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g[i * n + j] * u[i] * v[j];
        }
    }
    s
}

/// Gram–Schmidt on the coordinate basis in axis order. Row `a` of the result
/// holds the coordinate components of the `a`-th orthonormal frame vector.
pub fn orthonormal_frame(n: usize, g: &[f64]) -> [[f64; 3]; 3] {
    let mut e = [[0.0f64; 3]; 3];
    for a in 0..n {
        let mut v = [0.0f64; 3];
        v[a] = 1.0;
        for b in 0..a {
            let c = inner(n, g, &v, &e[b]);
            for i in 0..n {
                v[i] -= c * e[b][i];
            }
        }
        let norm = libm::sqrt(inner(n, g, &v, &v));
        for i in 0..n {
            e[a][i] = v[i] / norm;
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_residual() {
        let m = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let mut inv = [0.0; 9];
        assert!(invert(3, &m, &mut inv));
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| m[i * 3 + k] * inv[k * 3 + j]).sum();
                let d = if i == j { 1.0 } else { 0.0 };
                assert!((s - d).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eigen_extremes_of_diagonal() {
        let (lo, hi) = sym_eig_extremes(2, &[0.25, 0.0, 0.0, 4.0]);
        assert!((lo - 0.25).abs() < 1e-14 && (hi - 4.0).abs() < 1e-14);
    }

    #[test]
    fn frame_is_orthonormal() {
        let g = [2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 0.8];
        let e = orthonormal_frame(3, &g);
        for a in 0..3 {
            for b in 0..3 {
                let d = if a == b { 1.0 } else { 0.0 };
                assert!((inner(3, &g, &e[a], &e[b]) - d).abs() < 1e-14);
            }
        }
    }
}
