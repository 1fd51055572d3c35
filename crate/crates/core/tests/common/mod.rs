//! Dense oracles shared by the integration tests.

use std::f64::consts::PI;

use monopole_lab::dirac::{find_spectral_gap, projection_derivative, DiracFamily, SpectralSettings};
use monopole_lab::geometry::{ModelGeometry, PicardPoint};
use monopole_lab::linalg::{norm3, sigma_dot, C64};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type CMat = DMatrix<C64>;

pub fn dense_dirac(geom: &ModelGeometry, modes: &[[i64; 3]], c: &[f64]) -> CMat {
    let n = 2 * modes.len();
    let mut d = CMat::zeros(n, n);
    for (t, &m) in modes.iter().enumerate() {
        let s = sigma_dot(geom.spinor_momentum(m, c));
        for i in 0..2 {
            for j in 0..2 {
                d[(2 * t + i, 2 * t + j)] = -s[i][j];
            }
        }
    }
    d
}

pub fn spectral_projector(d: &CMat, below: f64) -> CMat {
    let eig = SymmetricEigen::new(d.clone());
    let n = d.nrows();
    let mut p = CMat::zeros(n, n);
    for k in 0..n {
        if eig.eigenvalues[k] < below {
            let v = eig.eigenvectors.column(k);
            p += &v * v.adjoint();
        }
    }
    p
}

/// Central finite differences of dense projectors against the closed formula.
pub fn fd_check(seed: u64, trials: usize) -> (usize, f64) {
    let geom = ModelGeometry::t3([0.5; 3]);
    let s = SpectralSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut passed = 0;
    for _ in 0..trials {
        let c: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
        let a = PicardPoint { coords: c.clone() };
        // 100 modes nearest the shifted origin
        let mut radii: Vec<(f64, [i64; 3])> = Vec::new();
        for m1 in -4..=4 {
            for m2 in -4..=4 {
                for m3 in -4..=4 {
                    let m = [m1, m2, m3];
                    radii.push((norm3(geom.spinor_momentum(m, &c)), m));
                }
            }
        }
        radii.sort_by(|x, y| x.0.total_cmp(&y.0));
        let trunc = 0.5 * (radii[99].0 + radii[100].0);
        let modes: Vec<[i64; 3]> = radii[..100].iter().map(|x| x.1).collect();
        let v: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let target = rng.gen::<f64>() * 30.0 - 15.0;
        let target = if target.abs() < 2.0 { 2.0 * target.signum() } else { target };
        let mu = find_spectral_gap(&geom, &a, target, 0.5, 4.0, &s).unwrap().center;
        let formula = projection_derivative(&geom, &a, &v, mu, trunc, &s).unwrap();
        assert_eq!(formula.items.len(), 200);
        let t = 1e-5;
        let shift = |sgn: f64| -> Vec<f64> {
            (0..3).map(|i| c[i] + sgn * t * v[i] / (2.0 * PI)).collect()
        };
        let pp = spectral_projector(&dense_dirac(&geom, &modes, &shift(1.0)), mu);
        let pm = spectral_projector(&dense_dirac(&geom, &modes, &shift(-1.0)), mu);
        let fd = (pp - pm) * C64::new(1.0 / (2.0 * t), 0.0);
        // closed-form eigenvectors at a, embedded in the dense basis
        let fam = DiracFamily::new(&geom, 24).unwrap();
        let n = 200;
        let mut e = CMat::zeros(n, formula.items.len());
        for (col, it) in formula.items.iter().enumerate() {
            let m = [it.mode[0], it.mode[1], it.mode[2]];
            let p = modes.iter().position(|x| *x == m).unwrap();
            let eig = fam.block(m, &c).eigen();
            let ev = eig.iter().find(|x| x.branch == it.branch).unwrap();
            e[(2 * p, col)] = ev.vector[0];
            e[(2 * p + 1, col)] = ev.vector[1];
        }
        // <fd e_i, e_j> = (E^* fd E)_{ji}
        let fd_e = e.adjoint() * fd * &e;
        let mut scale: f64 = 0.0;
        for &(_, _, val) in &formula.entries {
            scale = scale.max(val.norm());
        }
        let mut ok = true;
        for i in 0..n {
            for j in 0..n {
                let f = formula.get(i, j);
                let d = fd_e[(j, i)];
                // entries the formula sets to zero are measured against the largest one
                let err = (f - d).norm() / if f.norm() > 0.0 { f.norm() } else { scale };
                worst = worst.max(err);
                if err > 1e-6 {
                    ok = false;
                }
            }
        }
        if ok {
            passed += 1;
        }
    }
    (passed, worst)
}
