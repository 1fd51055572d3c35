//! Spectrum and real eigenforms of `*d` on coexact 1-forms.
//!
//! Forms are real, so Fourier coefficients satisfy `w_{-m} = conj(w_m)`. On the
//! torus bundle they must also be invariant under the deck map, which sends
//! mode `(m_x, N)` to `(m_x, -N)` with coefficient `(-1)^{m_x} R w`,
//! `R = diag(1, -1, -1)`. For each orbit of modes under these symmetries the
//! real invariant coexact subspace is cut out by an explicit projector and
//! `*d` is diagonalised on it.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::geometry::{GeometryKind, ModelGeometry, Mode};
use crate::linalg::{norm3, C64};

use super::family::Branch;
use super::DiracError;

/// Real coexact eigenform of `*d`.
#[derive(Debug, Clone)]
pub struct CurlMode {
    pub eigenvalue: f64,
    /// Orbit representative followed by an index within the orbit.
    pub label: Vec<i64>,
    pub branch: Branch,
    /// Cover Fourier coefficients, L2-normalised (`sum |w_m|^2 = 1`).
    pub form: Vec<(Mode, [C64; 3])>,
}

fn neg(m: Mode) -> Mode {
    [-m[0], -m[1], -m[2]]
}

fn deck(m: Mode) -> Mode {
    [m[0], -m[1], -m[2]]
}

fn orbit(geom: &ModelGeometry, m: Mode) -> Vec<Mode> {
    let mut o = vec![m, neg(m)];
    if geom.kind == GeometryKind::FlatTorusBundle {
        o.push(deck(m));
        o.push(neg(deck(m)));
    }
    o.sort();
    o.dedup();
    o
}

/// Real eigenforms with eigenvalue in `[lo, hi]`.
pub fn curl_modes(
    geom: &ModelGeometry,
    lo: f64,
    hi: f64,
    cap: i64,
) -> Result<Vec<CurlMode>, DiracError> {
    geom.require_spectral()?;
    let unit = 2.0 * PI * geom.metric_scale;
    let rhi = lo.abs().max(hi.abs());
    let limit = unit * (cap as f64 - 1.0);
    if !(rhi <= limit) {
        return Err(DiracError::WindowTooLarge { requested: rhi, limit });
    }
    let rlo = if lo > 0.0 {
        lo
    } else if hi < 0.0 {
        -hi
    } else {
        0.0
    };
    let l = geom.cover_lengths();
    let t = rhi / unit;
    let ext = |li: f64| (t * li).ceil() as i64 + 1;
    let mut out = Vec::new();
    for m0 in -ext(l[0])..=ext(l[0]) {
        for m1 in -ext(l[1])..=ext(l[1]) {
            for m2 in -ext(l[2])..=ext(l[2]) {
                let m = [m0, m1, m2];
                if m == [0, 0, 0] {
                    continue;
                }
                let r = norm3(geom.form_momentum(m));
                if r < rlo || r > rhi {
                    continue;
                }
                let o = orbit(geom, m);
                if *o.last().unwrap() != m {
                    continue;
                }
                for cm in orbit_eigenforms(geom, &o, r) {
                    if cm.eigenvalue >= lo && cm.eigenvalue <= hi {
                        out.push(cm);
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| a.eigenvalue.total_cmp(&b.eigenvalue).then(a.label.cmp(&b.label)));
    Ok(out)
}

fn orbit_eigenforms(geom: &ModelGeometry, o: &[Mode], r: f64) -> Vec<CurlMode> {
    let n = 6 * o.len();
    let pos = |m: Mode| o.iter().position(|x| *x == m).expect("mode in orbit");
    let to_c = |v: &[f64], i: usize| -> [C64; 3] {
        [
            C64::new(v[6 * i], v[6 * i + 1]),
            C64::new(v[6 * i + 2], v[6 * i + 3]),
            C64::new(v[6 * i + 4], v[6 * i + 5]),
        ]
    };
    let put = |v: &mut [f64], i: usize, w: [C64; 3]| {
        for j in 0..3 {
            v[6 * i + 2 * j] = w[j].re;
            v[6 * i + 2 * j + 1] = w[j].im;
        }
    };
    let conj_neg = |v: &[f64]| -> Vec<f64> {
        let mut w = vec![0.0; n];
        for (i, &m) in o.iter().enumerate() {
            let c = to_c(v, i);
            put(&mut w, pos(neg(m)), [c[0].conj(), c[1].conj(), c[2].conj()]);
        }
        w
    };
    let deck_act = |v: &[f64]| -> Vec<f64> {
        let mut w = vec![0.0; n];
        for (i, &m) in o.iter().enumerate() {
            let c = to_c(v, i);
            let s = if m[0].rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            put(&mut w, pos(deck(m)), [c[0] * s, -c[1] * s, -c[2] * s]);
        }
        w
    };
    let bundle = geom.kind == GeometryKind::FlatTorusBundle;
    let mut pg = DMatrix::<f64>::zeros(n, n);
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let mut images = vec![e.clone(), conj_neg(&e)];
        if bundle {
            let g = deck_act(&e);
            images.push(conj_neg(&g));
            images.push(g);
        }
        let wgt = 1.0 / images.len() as f64;
        for img in images {
            for row in 0..n {
                pg[(row, col)] += wgt * img[row];
            }
        }
    }
    let mut pc = DMatrix::<f64>::zeros(n, n);
    let mut curl = DMatrix::<f64>::zeros(n, n);
    for (i, &m) in o.iter().enumerate() {
        let k = geom.form_momentum(m);
        let kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        for a in 0..3 {
            for b in 0..3 {
                let p = if a == b { 1.0 } else { 0.0 } - k[a] * k[b] / kk;
                for part in 0..2 {
                    pc[(6 * i + 2 * a + part, 6 * i + 2 * b + part)] = p;
                }
            }
        }
        // i k x (a + i b) = -k x b + i k x a
        let kx = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
        for a in 0..3 {
            for b in 0..3 {
                curl[(6 * i + 2 * a, 6 * i + 2 * b + 1)] = -kx[a][b];
                curl[(6 * i + 2 * a + 1, 6 * i + 2 * b)] = kx[a][b];
            }
        }
    }
    let q = &pc * &pg;
    let a = &q * &curl * &q;
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut idx: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i].abs() > 0.5 * r).collect();
    idx.sort_by(|&x, &y| {
        eig.eigenvalues[y].signum().total_cmp(&eig.eigenvalues[x].signum()).then(x.cmp(&y))
    });
    let rep = *o.last().unwrap();
    let mut counters = [0i64; 2];
    idx.into_iter()
        .map(|i| {
            let branch = if eig.eigenvalues[i] > 0.0 { Branch::Plus } else { Branch::Minus };
            let slot = if branch == Branch::Plus { 0 } else { 1 };
            let j = counters[slot];
            counters[slot] += 1;
            let v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let form = o.iter().enumerate().map(|(t, &m)| (m, to_c(&v, t))).collect();
            CurlMode {
                eigenvalue: branch.sign() * r,
                label: vec![rep[0], rep[1], rep[2], j],
                branch,
                form,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::form_codifferential;
    use crate::linalg::cross;

    fn check_eigenform(geom: &ModelGeometry, cm: &CurlMode) {
        let mut norm = 0.0;
        let coeff = |m: Mode| cm.form.iter().find(|(x, _)| *x == m).map(|(_, w)| *w);
        for &(m, w) in &cm.form {
            norm += w.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let k = geom.form_momentum(m);
            assert!(form_codifferential(k, w).norm() < 1e-12);
            let ik = [C64::new(0.0, k[0]), C64::new(0.0, k[1]), C64::new(0.0, k[2])];
            let cw = cross(ik, w);
            for j in 0..3 {
                assert!((cw[j] - w[j] * cm.eigenvalue).norm() < 1e-10);
            }
            let wn = coeff(neg(m)).expect("reality partner");
            for j in 0..3 {
                assert!((wn[j] - w[j].conj()).norm() < 1e-12);
            }
            if geom.kind == GeometryKind::FlatTorusBundle {
                let wd = coeff(deck(m)).expect("deck partner");
                let s = if m[0].rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let rw = [w[0] * s, -w[1] * s, -w[2] * s];
                for j in 0..3 {
                    assert!((wd[j] - rw[j]).norm() < 1e-12);
                }
            }
        }
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t3_curl_first_shell() {
        let g = ModelGeometry::t3([0.0; 3]);
        let modes = curl_modes(&g, 6.0, 6.5, 8).unwrap();
        assert_eq!(modes.len(), 6);
        for cm in &modes {
            assert!((cm.eigenvalue - 2.0 * PI).abs() < 1e-12);
            check_eigenform(&g, cm);
        }
        assert!(curl_modes(&g, 0.0, 1.0, 8).unwrap().is_empty());
    }

    #[test]
    fn bundle_curl_forms_are_invariant_eigenforms() {
        let g = ModelGeometry::flat_torus_bundle(1);
        let modes = curl_modes(&g, -13.0, 13.0, 8).unwrap();
        for cm in &modes {
            check_eigenform(&g, cm);
        }
        let plus = modes.iter().filter(|m| m.branch == Branch::Plus).count();
        assert_eq!(plus * 2, modes.len());
        // orthonormality of the full basis
        for (i, a) in modes.iter().enumerate() {
            for b in modes.iter().skip(i + 1) {
                let mut ip = 0.0;
                for (m, w) in &a.form {
                    if let Some((_, v)) = b.form.iter().find(|(x, _)| x == m) {
                        ip += (0..3).map(|j| (w[j].conj() * v[j]).re).sum::<f64>();
                    }
                }
                assert!(ip.abs() < 1e-12);
            }
        }
    }
}
