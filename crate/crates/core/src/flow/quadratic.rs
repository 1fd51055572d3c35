//! Quadratic terms of the Seiberg-Witten map in mode space.
//!
//! Fields live on the cover torus of volume `V` with orthonormal Fourier
//! basis `exp(i k.x) / sqrt(V)`. With `rho(dx^j) = i sigma_j`,
//! `q(phi) = -i t` where `t_j = phi^* sigma_j phi / 2`, so the real form
//! `q_r = -t` carries all the information (`q = i q_r`).

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::geometry::{harmonic_basis, ModelGeometry, Mode};
use crate::linalg::{norm3, pauli, Vec2, C64, I, ZERO};

use super::{FlowError, OverflowPolicy};

pub type Form3 = [C64; 3];

/// Output of [`quadratic_terms`]. All coefficients are in the orthonormal
/// Fourier basis of the cover, sorted by mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticTerms {
    /// Coefficients of `q(phi)` (an imaginary-valued 1-form).
    pub q_form: Vec<(Mode, Form3)>,
    /// `X_H(phi) = i * xh` in the harmonic basis, as a pointwise value.
    pub xh: Vec<f64>,
    /// Coefficients of `c_1 = (rho(omega) - i xi) phi`.
    pub c1: Vec<(Mode, Vec2)>,
    /// Coefficients of `c_2 = pi_{im d*} q(phi)`.
    pub c2: Vec<(Mode, Form3)>,
    /// Coefficients of `xi(phi)` (real, mean zero).
    pub xi: Vec<(Mode, C64)>,
    /// Number of `c_1` modes dropped beyond the truncation.
    pub clipped: usize,
}

fn add3(a: &mut Form3, b: Form3) {
    for i in 0..3 {
        a[i] += b[i];
    }
}

fn sub_mode(a: Mode, b: Mode) -> Mode {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// `t_p = (1 / (2 sqrt V)) sum_{m - m' = p} phi_{m'}^* sigma phi_m`.
pub(crate) fn half_bilinear(phi: &[(Mode, Vec2)], volume: f64) -> HashMap<Mode, Form3> {
    let s = pauli();
    let f = 0.5 / volume.sqrt();
    let mut out: HashMap<Mode, Form3> = HashMap::with_capacity(phi.len() * phi.len());
    for (m, a) in phi {
        for (mp, b) in phi {
            let mut v = [ZERO; 3];
            for j in 0..3 {
                let sa = [s[j][0][0] * a[0] + s[j][0][1] * a[1], s[j][1][0] * a[0] + s[j][1][1] * a[1]];
                v[j] = (b[0].conj() * sa[0] + b[1].conj() * sa[1]) * f;
            }
            add3(out.entry(sub_mode(*m, *mp)).or_insert([ZERO; 3]), v);
        }
    }
    out
}

/// `xi_p = i (p . qr_p) / |p|^2`, solving `d xi = i pi_{im d} q` with mean zero.
pub(crate) fn xi_coefficient(geom: &ModelGeometry, p: Mode, qr: &Form3) -> C64 {
    if p == [0, 0, 0] {
        return ZERO;
    }
    let k = geom.form_momentum(p);
    let kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    I * (qr[0] * k[0] + qr[1] * k[1] + qr[2] * k[2]) / kk
}

/// Coexact part `qr - k (k . qr) / |k|^2` (zero on the zero mode).
pub(crate) fn coexact_part(geom: &ModelGeometry, p: Mode, qr: &Form3) -> Form3 {
    if p == [0, 0, 0] {
        return [ZERO; 3];
    }
    let k = geom.form_momentum(p);
    let kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    let kq = (qr[0] * k[0] + qr[1] * k[1] + qr[2] * k[2]) / kk;
    [qr[0] - kq * k[0], qr[1] - kq * k[1], qr[2] - kq * k[2]]
}

/// Pointwise harmonic part of `q_r` in the harmonic basis.
pub(crate) fn harmonic_part(geom: &ModelGeometry, qr0: &Form3, volume: f64) -> Result<Vec<f64>, FlowError> {
    let basis = harmonic_basis(geom)?;
    Ok(basis
        .iter()
        .map(|h| {
            let d = h.direction;
            (qr0[0].re * d[0] + qr0[1].re * d[1] + qr0[2].re * d[2]) / volume.sqrt()
        })
        .collect())
}

/// `-(sigma . w + i xi)` applied to `v`.
pub(crate) fn c1_kernel(w: &Form3, xi: C64, v: &Vec2) -> Vec2 {
    let sw = crate::linalg::sigma_dot_c(*w);
    let a = [sw[0][0] * v[0] + sw[0][1] * v[1], sw[1][0] * v[0] + sw[1][1] * v[1]];
    [-(a[0] + I * xi * v[0]), -(a[1] + I * xi * v[1])]
}

fn cover_volume(geom: &ModelGeometry) -> f64 {
    let l = geom.cover_lengths();
    l[0] * l[1] * l[2]
}

/// Quadratic terms of the spinor `phi` and the coexact form `omega = i w`,
/// given by cover coefficients. `limit` bounds `|k|` of the `c_1` modes at
/// base `c`.
pub fn quadratic_terms(
    geom: &ModelGeometry,
    c: &[f64],
    phi: &[(Mode, Vec2)],
    w: &[(Mode, Form3)],
    limit: f64,
    policy: OverflowPolicy,
) -> Result<QuadraticTerms, FlowError> {
    geom.require_spectral()?;
    let volume = cover_volume(geom);
    let t = half_bilinear(phi, volume);
    let qr: BTreeMap<Mode, Form3> =
        t.into_iter().map(|(p, v)| (p, [-v[0], -v[1], -v[2]])).collect();
    let xh = harmonic_part(geom, qr.get(&[0, 0, 0]).unwrap_or(&[ZERO; 3]), volume)?;
    let xi: BTreeMap<Mode, C64> = qr.iter().map(|(p, v)| (*p, xi_coefficient(geom, *p, v))).collect();
    let c2: Vec<(Mode, Form3)> = qr
        .iter()
        .map(|(p, v)| {
            let co = coexact_part(geom, *p, v);
            (*p, [I * co[0], I * co[1], I * co[2]])
        })
        .collect();
    let mut wmap: HashMap<Mode, Form3> = HashMap::new();
    for (p, v) in w {
        add3(wmap.entry(*p).or_insert([ZERO; 3]), *v);
    }
    // sources of c_1: modes carrying w or xi
    let mut sources: BTreeMap<Mode, (Form3, C64)> = BTreeMap::new();
    for (p, v) in &wmap {
        sources.entry(*p).or_insert(([ZERO; 3], ZERO)).0 = *v;
    }
    for (p, x) in &xi {
        sources.entry(*p).or_insert(([ZERO; 3], ZERO)).1 = *x;
    }
    let f = 1.0 / volume.sqrt();
    let mut c1: BTreeMap<Mode, Vec2> = BTreeMap::new();
    for (p, (wp, xp)) in &sources {
        for (m, v) in phi {
            let n = [m[0] + p[0], m[1] + p[1], m[2] + p[2]];
            let a = c1_kernel(wp, *xp, v);
            let e = c1.entry(n).or_insert([ZERO; 2]);
            e[0] += a[0] * f;
            e[1] += a[1] * f;
        }
    }
    let mut clipped = 0;
    let mut c1_out = Vec::with_capacity(c1.len());
    for (n, v) in c1 {
        let k = norm3(geom.spinor_momentum(n, c));
        if k > limit {
            if v[0].norm() + v[1].norm() == 0.0 {
                continue;
            }
            match policy {
                OverflowPolicy::Error => {
                    return Err(FlowError::TruncationOverflow { mode: n.to_vec(), limit })
                }
                OverflowPolicy::Clip => {
                    clipped += 1;
                    continue;
                }
            }
        }
        c1_out.push((n, v));
    }
    Ok(QuadraticTerms {
        q_form: qr.iter().map(|(p, v)| (*p, [I * v[0], I * v[1], I * v[2]])).collect(),
        xh,
        c1: c1_out,
        c2,
        xi: xi.into_iter().collect(),
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t3() -> ModelGeometry {
        ModelGeometry::t3([0.0; 3])
    }

    #[test]
    fn zero_spinor_gives_zero_terms() {
        let w = vec![([1, 0, 0], [ZERO, C64::new(0.3, 0.0), ZERO]), ([-1, 0, 0], [ZERO, C64::new(0.3, 0.0), ZERO])];
        let q = quadratic_terms(&t3(), &[0.1; 3], &[], &w, 50.0, OverflowPolicy::Error).unwrap();
        assert!(q.q_form.is_empty() && q.c1.is_empty() && q.c2.is_empty() && q.xi.is_empty());
        assert!(q.xh.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_spinor_norm() {
        let g = t3();
        let v = 1.0;
        let phi = [([0, 0, 0], [C64::new(0.6, 0.8) * 2.0 * v, ZERO])];
        let q = quadratic_terms(&g, &[0.0; 3], &phi, &[], 50.0, OverflowPolicy::Error).unwrap();
        assert_eq!(q.q_form.len(), 1);
        let pointwise = q.q_form[0].1.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / v.sqrt();
        assert!((pointwise - 2.0).abs() < 1e-14);
        // constant forms are harmonic
        assert!((q.xh.iter().map(|x| x * x).sum::<f64>().sqrt() - 2.0).abs() < 1e-14);
        assert!(q.xi.iter().all(|(_, x)| *x == ZERO));
    }

    #[test]
    fn scaling_of_terms() {
        let g = t3();
        let c = [0.1, 0.2, 0.3];
        let phi = vec![
            ([0, 0, 0], [C64::new(0.3, 0.1), C64::new(-0.2, 0.4)]),
            ([1, 0, 0], [C64::new(0.1, -0.5), C64::new(0.2, 0.0)]),
            ([0, -1, 1], [C64::new(-0.4, 0.2), C64::new(0.1, 0.3)]),
        ];
        let w = vec![([0, 1, 0], [C64::new(0.2, 0.1), ZERO, C64::new(0.0, -0.3)])];
        let scaled = |l: f64| -> Vec<(Mode, Vec2)> { phi.iter().map(|(m, v)| (*m, [v[0] * l, v[1] * l])).collect() };
        let run = |p: &[(Mode, Vec2)], w: &[(Mode, Form3)]| quadratic_terms(&g, &c, p, w, 100.0, OverflowPolicy::Error).unwrap();
        let lam = 1.7;
        let (base, big) = (run(&phi, &w), run(&scaled(lam), &w));
        for ((m, a), (n, b)) in base.q_form.iter().zip(&big.q_form) {
            assert_eq!(m, n);
            for j in 0..3 {
                assert!((a[j] * lam * lam - b[j]).norm() < 1e-13);
            }
        }
        for ((_, a), (_, b)) in base.xi.iter().zip(&big.xi) {
            assert!((a * lam * lam - b).norm() < 1e-13);
        }
        for (a, b) in base.xh.iter().zip(&big.xh) {
            assert!((a * lam * lam - b).abs() < 1e-13);
        }
        // c1 = A(phi) + B(phi), A linear in phi via omega, B cubic via xi
        let cubic = run(&phi, &[]).c1;
        let map = |v: &[(Mode, Vec2)]| -> BTreeMap<Mode, Vec2> { v.iter().cloned().collect() };
        let (full, cub, big_c1) = (map(&base.c1), map(&cubic), map(&big.c1));
        for (m, f) in &full {
            let b = cub.get(m).copied().unwrap_or([ZERO; 2]);
            let want = [(f[0] - b[0]) * lam + b[0] * lam.powi(3), (f[1] - b[1]) * lam + b[1] * lam.powi(3)];
            let got = big_c1.get(m).copied().unwrap_or([ZERO; 2]);
            assert!((want[0] - got[0]).norm() + (want[1] - got[1]).norm() < 1e-12);
        }
    }

    #[test]
    fn xi_solves_exact_part() {
        let g = t3();
        let phi = vec![
            ([0, 0, 0], [C64::new(0.3, 0.1), C64::new(-0.2, 0.4)]),
            ([1, 1, 0], [C64::new(0.1, -0.5), C64::new(0.2, 0.0)]),
        ];
        let q = quadratic_terms(&g, &[0.0; 3], &phi, &[], 100.0, OverflowPolicy::Error).unwrap();
        let xi: BTreeMap<Mode, C64> = q.xi.iter().cloned().collect();
        let c2: BTreeMap<Mode, Form3> = q.c2.iter().cloned().collect();
        assert_eq!(xi[&[0, 0, 0]], ZERO);
        for (p, f) in &q.q_form {
            if *p == [0, 0, 0] {
                continue;
            }
            let k = g.form_momentum(*p);
            for j in 0..3 {
                let dxi = I * k[j] * xi[p];
                assert!((dxi - I * (f[j] - c2[p][j])).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn overflow_policies() {
        let g = t3();
        let phi = vec![([3, 0, 0], [C64::new(1.0, 0.0), ZERO]), ([0, 0, 0], [C64::new(1.0, 0.0), ZERO])];
        let w = vec![([3, 0, 0], [ZERO, C64::new(1.0, 0.0), ZERO])];
        let lim = 2.0 * std::f64::consts::PI * 4.0;
        assert!(matches!(
            quadratic_terms(&g, &[0.0; 3], &phi, &w, lim, OverflowPolicy::Error),
            Err(FlowError::TruncationOverflow { .. })
        ));
        let q = quadratic_terms(&g, &[0.0; 3], &phi, &w, lim, OverflowPolicy::Clip).unwrap();
        assert!(q.clipped > 0);
    }
}
