//! Small fixed-size complex linear algebra used throughout the spectral code.

use num_complex::Complex64;

pub type C64 = Complex64;
pub type Vec2 = [C64; 2];
pub type Mat2 = [[C64; 2]; 2];

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Pauli matrices `sigma_1, sigma_2, sigma_3`.
pub fn pauli() -> [Mat2; 3] {
    [
        [[ZERO, ONE], [ONE, ZERO]],
        [[ZERO, -I], [I, ZERO]],
        [[ONE, ZERO], [ZERO, -ONE]],
    ]
}

/// `sigma . k` for a real vector `k`.
pub fn sigma_dot(k: [f64; 3]) -> Mat2 {
    [
        [C64::new(k[2], 0.0), C64::new(k[0], -k[1])],
        [C64::new(k[0], k[1]), C64::new(-k[2], 0.0)],
    ]
}

/// `sigma . w` for a complex vector `w`.
pub fn sigma_dot_c(w: [C64; 3]) -> Mat2 {
    [[w[2], w[0] - I * w[1]], [w[0] + I * w[1], -w[2]]]
}

pub fn mat_vec(m: &Mat2, v: &Vec2) -> Vec2 {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn adjoint(m: &Mat2) -> Mat2 {
    [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]]
}

pub fn scale(m: &Mat2, s: C64) -> Mat2 {
    [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]]
}

pub fn identity() -> Mat2 {
    [[ONE, ZERO], [ZERO, ONE]]
}

/// Hermitian inner product, conjugate-linear in the first slot.
pub fn dot(u: &Vec2, v: &Vec2) -> C64 {
    u[0].conj() * v[0] + u[1].conj() * v[1]
}

pub fn norm_sqr(v: &Vec2) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr()
}

pub fn axpy(a: C64, x: &Vec2, y: &mut Vec2) {
    y[0] += a * x[0];
    y[1] += a * x[1];
}

pub fn norm3(k: [f64; 3]) -> f64 {
    (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt()
}

/// Unit eigenvector of `sigma . n` for eigenvalue `lambda = +-1`, `|n| = 1`.
///
/// Of the two algebraic formulas the better conditioned one is used, so the
/// phase convention is piecewise but deterministic.
pub fn pauli_eigenvector(n: [f64; 3], lambda: f64) -> Vec2 {
    let (v, nrm2) = if lambda * n[2] >= 0.0 {
        (
            [C64::new(n[2] + lambda, 0.0), C64::new(n[0], n[1])],
            2.0 + 2.0 * lambda * n[2],
        )
    } else {
        (
            [C64::new(n[0], -n[1]), C64::new(lambda - n[2], 0.0)],
            2.0 - 2.0 * lambda * n[2],
        )
    };
    let s = 1.0 / nrm2.sqrt();
    [v[0] * s, v[1] * s]
}

/// Eigen-decomposition of the Dirac symbol `-sigma . k`.
///
/// Returns `[(+|k|, v_plus), (-|k|, v_minus)]`. At `k = 0` the standard basis
/// is used.
pub fn dirac_symbol_eigen(k: [f64; 3]) -> [(f64, Vec2); 2] {
    let r = norm3(k);
    if r == 0.0 {
        return [(0.0, [ONE, ZERO]), (0.0, [ZERO, ONE])];
    }
    let n = [k[0] / r, k[1] / r, k[2] / r];
    [(r, pauli_eigenvector(n, -1.0)), (-r, pauli_eigenvector(n, 1.0))]
}

pub fn cross(a: [C64; 3], b: [C64; 3]) -> [C64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn real3(k: [f64; 3]) -> [C64; 3] {
    [C64::new(k[0], 0.0), C64::new(k[1], 0.0), C64::new(k[2], 0.0)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-13
    }

    #[test]
    fn pauli_algebra() {
        let s = pauli();
        let id = identity();
        for a in 0..3 {
            let sq = mat_mul(&s[a], &s[a]);
            for i in 0..2 {
                for j in 0..2 {
                    assert!(close(sq[i][j], id[i][j]));
                }
            }
        }
        // sigma_1 sigma_2 = i sigma_3
        let p = mat_mul(&s[0], &s[1]);
        let t = scale(&s[2], I);
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(p[i][j], t[i][j]));
            }
        }
    }

    #[test]
    fn symbol_eigenpairs() {
        for k in [
            [1.0, 2.0, -0.5],
            [0.0, 0.0, -3.0],
            [0.0, 0.0, 3.0],
            [-1e-9, 2e-9, -4.0],
            [0.3, -0.1, 0.0],
        ] {
            let h = scale(&sigma_dot(k), -ONE);
            for (eta, v) in dirac_symbol_eigen(k) {
                let hv = mat_vec(&h, &v);
                assert!((norm_sqr(&v) - 1.0).abs() < 1e-14);
                assert!(close(hv[0], v[0] * eta) && close(hv[1], v[1] * eta));
            }
        }
    }
}
