//! Exact invariant arithmetic: the Borel ideal exponent `h`, the spectral
//! correction `n`, the Froyshov-type `h(Y, s)`, `R(Pin(2))` and `k`, Rokhlin
//! parity and the four-manifold inequalities.

mod bounds;
mod rpin2;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conley::{shift_homology, ChainComplex, ConleyIndexData};
use crate::geometry::{GeometryKind, ModelGeometry, SpinData};

pub use bounds::{check_bounds, BoundCheck, BoundInputs, BoundMode};
pub use rpin2::{kappa_k, rpin2_mul, RPin2Element};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InvariantError {
    #[error("index is not a recognized Thom space: {0}")]
    UnrecognizedIndex(String),
    #[error("the ideal is zero; h is infinite")]
    InfiniteIdeal,
    #[error("n is not tabulated for {0}")]
    UnsupportedGeometry(String),
    #[error("no finite k: gcd of w-multipliers is {gcd}")]
    NoFiniteK { gcd: i128 },
    #[error("missing input {0}")]
    MissingInput(&'static str),
    #[error("Rokhlin invariant not tabulated for {0}")]
    UnknownRokhlin(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Serde helpers writing rationals as `"p/q"` strings.
pub mod rational {
    use num_rational::Rational64;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn to_string(r: &Rational64) -> String {
        if r.is_integer() {
            r.numer().to_string()
        } else {
            format!("{}/{}", r.numer(), r.denom())
        }
    }

    pub fn parse(s: &str) -> Result<Rational64, String> {
        let s = s.trim();
        let (n, d) = s.split_once('/').unwrap_or((s, "1"));
        let n: i64 = n.trim().parse().map_err(|_| format!("bad rational {s:?}"))?;
        let d: i64 = d.trim().parse().map_err(|_| format!("bad rational {s:?}"))?;
        if d == 0 {
            return Err(format!("zero denominator in {s:?}"));
        }
        Ok(Rational64::new(n, d))
    }

    pub fn serialize<S: Serializer>(r: &Rational64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Rational64::from_integer(n)),
            Raw::Str(s) => parse(&s).map_err(D::Error::custom),
        }
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(r: &Option<Rational64>, s: S) -> Result<S::Ok, S::Error> {
            match r {
                Some(r) => super::serialize(r, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational64>, D::Error> {
            #[derive(Deserialize)]
            struct Wrap(#[serde(with = "super")] Rational64);
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exponent {
    Finite(u64),
    Infinite,
}

/// The ideal `(T^h)` of `R[[T]]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrincipalIdealExponent {
    pub exponent: Exponent,
    pub basis_note: String,
}

/// Ideal of the Thom space of a weight-one complex rank-`m` bundle plus
/// `R^t` over `T^base_dim`: generated by the Euler class `T^m`.
pub fn thom_ideal(m: u64, t: u64, base_dim: usize) -> PrincipalIdealExponent {
    PrincipalIdealExponent {
        exponent: Exponent::Finite(m),
        basis_note: format!("Thom class of C^{m} (weight 1) + R^{t} over T^{base_dim}; Euler class T^{m}"),
    }
}

/// Reads `(m, t)` off index homology of the form `H_{*-2m-t}(T^b)` with
/// fixed part `H_{*-t}(T^b)`.
pub fn recognize_thom(data: &ConleyIndexData) -> Result<(u64, u64), InvariantError> {
    let b = data.section_data.base_dim;
    let base = ChainComplex::torus(b).homology().map_err(|e| InvariantError::UnrecognizedIndex(e.to_string()))?;
    let t = data.level;
    if data.fixed_homology != shift_homology(&base, t) {
        return Err(InvariantError::UnrecognizedIndex(format!("fixed part is not H(T^{b}) shifted by {t}")));
    }
    let d = data.relative_homology.first().map(|g| g.degree).ok_or_else(|| {
        InvariantError::UnrecognizedIndex("relative homology vanishes".into())
    })?;
    if data.relative_homology != shift_homology(&base, d) || d < t || (d - t) % 2 != 0 {
        return Err(InvariantError::UnrecognizedIndex(format!("relative homology is not H(T^{b}) shifted by t + 2m")));
    }
    Ok((((d - t) / 2) as u64, t as u64))
}

/// `h` after formally desuspending `C^complex + R^real`.
pub fn h_from_ideal(ideal: &PrincipalIdealExponent, complex: u64, _real: u64) -> Result<i64, InvariantError> {
    match ideal.exponent {
        Exponent::Finite(e) => Ok(e as i64 - complex as i64),
        Exponent::Infinite => Err(InvariantError::InfiniteIdeal),
    }
}

/// Index of the flat torus bundle spin structure, if `geom` is one.
fn bundle_spin(geom: &ModelGeometry) -> Option<usize> {
    match (&geom.kind, &geom.spin) {
        (GeometryKind::FlatTorusBundle, SpinData::Shift(v)) => {
            Some(usize::from(v[0] == 0.5) + 2 * usize::from(v[1] == 0.5))
        }
        _ => None,
    }
}

pub fn n_invariant(geom: &ModelGeometry) -> Result<Rational64, InvariantError> {
    match (&geom.kind, &geom.spin) {
        (GeometryKind::FlatTorusBundle, _) if matches!(bundle_spin(geom), Some(1..=3)) => Ok(Rational64::from_integer(0)),
        (GeometryKind::SphereBundle { d, g }, SpinData::Torsion(q)) => {
            let (d, g, q) = (*d, *g, *q);
            Ok(-Rational64::new(d - 1, 8) - Rational64::new((g - 1 - q) * (d + g - 1 - q), 2 * d))
        }
        (GeometryKind::S3Stub, _) => Ok(Rational64::from_integer(0)),
        _ => Err(InvariantError::UnsupportedGeometry(geom.name())),
    }
}

pub fn froyshov_h(geom: &ModelGeometry, h_index: i64) -> Result<Rational64, InvariantError> {
    Ok(Rational64::from_integer(h_index) - n_invariant(geom)?)
}

/// Tabulated Rokhlin invariant mod 2.
pub fn rokhlin_mu(geom: &ModelGeometry) -> Result<u8, InvariantError> {
    match geom.kind {
        GeometryKind::S3Stub => Ok(0),
        GeometryKind::FlatTorusBundle if matches!(bundle_spin(geom), Some(1..=3)) => Ok(0),
        _ => Err(InvariantError::UnknownRokhlin(geom.name())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RokhlinCheck {
    pub mu: u8,
    pub parity_ok: bool,
}

/// Whether `kappa` reduces to the Rokhlin invariant mod 2.
pub fn rokhlin_parity(geom: &ModelGeometry, kappa: Rational64) -> Result<RokhlinCheck, InvariantError> {
    let mu = rokhlin_mu(geom)?;
    let parity_ok = kappa.is_integer() && kappa.numer().rem_euclid(2) == mu as i64;
    Ok(RokhlinCheck { mu, parity_ok })
}

/// Ideal of the Pin(2) Thom space of a quaternionic rank-`r` bundle.
pub fn thom_k_ideal(r: usize) -> Vec<RPin2Element> {
    vec![RPin2Element::z_pow(r)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub geometry: String,
    pub h_index: i64,
    #[serde(with = "rational")]
    pub n_value: Rational64,
    #[serde(with = "rational")]
    pub froyshov_h: Rational64,
    /// `2k - n`, an upper bound for `kappa` (equal to it on `S^3`).
    #[serde(with = "rational::option")]
    pub kappa_bound: Option<Rational64>,
    pub rokhlin_parity: Option<u8>,
    pub provenance: serde_json::Value,
}

pub fn invariant_report(
    geom: &ModelGeometry,
    h_index: i64,
    k_index: Option<i64>,
    provenance: serde_json::Value,
) -> Result<InvariantReport, InvariantError> {
    let n_value = n_invariant(geom)?;
    let kappa_bound = k_index.map(|k| Rational64::from_integer(2 * k) - n_value);
    Ok(InvariantReport {
        geometry: geom.name(),
        h_index,
        n_value,
        froyshov_h: Rational64::from_integer(h_index) - n_value,
        kappa_bound,
        rokhlin_parity: rokhlin_mu(geom).ok(),
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conley::{free_homology, SectionData};

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    /// Lowest degree in the image of cup product with the top Chern class of
    /// `O(1)^m` on `Z[T]/(T^{K+1})`, the Borel cohomology of `CP^K`.
    fn borel_oracle(m: usize, k: usize) -> Option<usize> {
        let mut total = vec![0i64; k + 1];
        total[0] = 1;
        for _ in 0..m {
            for d in (1..=k).rev() {
                total[d] += total[d - 1];
            }
        }
        let mut euler = vec![0i64; k + 1];
        euler[m.min(k)] = if m <= k { total[m] } else { 0 };
        (0..=k)
            .flat_map(|i| (0..=k).filter(move |&d| d >= i).map(move |d| (i, d)))
            .filter(|&(i, d)| euler[d - i] != 0)
            .map(|(_, d)| d)
            .min()
    }

    #[test]
    fn thom_ideals() {
        assert_eq!(thom_ideal(0, 0, 1).exponent, Exponent::Finite(0));
        for m in 0..=6 {
            assert_eq!(borel_oracle(m, 6), Some(m));
            assert_eq!(thom_ideal(m as u64, 2, 0).exponent, Exponent::Finite(m as u64));
        }
        let data = ConleyIndexData {
            relative_homology: free_homology(&[60, 61]),
            fixed_homology: free_homology(&[20, 21]),
            section_data: SectionData { base_dim: 1, projection: "T^1".into() },
            level: 20,
        };
        assert_eq!(recognize_thom(&data).unwrap(), (20, 20));
        let odd = ConleyIndexData { relative_homology: free_homology(&[61, 62]), ..data.clone() };
        assert!(matches!(recognize_thom(&odd), Err(InvariantError::UnrecognizedIndex(_))));
        let torsion = ConleyIndexData { relative_homology: free_homology(&[60]), ..data };
        assert!(recognize_thom(&torsion).is_err());
    }

    #[test]
    fn h_examples() {
        let i3 = thom_ideal(3, 0, 0);
        assert_eq!(h_from_ideal(&i3, 3, 0).unwrap(), 0);
        assert_eq!(h_from_ideal(&i3, 0, 5).unwrap(), 3);
        assert_eq!(h_from_ideal(&thom_ideal(2, 0, 0), 3, 0).unwrap(), -1);
        let inf = PrincipalIdealExponent { exponent: Exponent::Infinite, basis_note: String::new() };
        assert_eq!(h_from_ideal(&inf, 0, 0), Err(InvariantError::InfiniteIdeal));
    }

    #[test]
    fn n_and_h_values() {
        for j in 1..=3 {
            let g = ModelGeometry::flat_torus_bundle(j);
            assert_eq!(n_invariant(&g).unwrap(), r(0, 1));
            assert_eq!(froyshov_h(&g, 0).unwrap(), r(0, 1));
        }
        let sb = ModelGeometry::sphere_bundle(2, 1, 1).unwrap();
        assert_eq!(n_invariant(&sb).unwrap(), r(1, 8));
        assert_eq!(froyshov_h(&sb, 0).unwrap(), r(-1, 8));
        assert_eq!(froyshov_h(&ModelGeometry::s3_stub(), 0).unwrap(), r(0, 1));
        assert!(matches!(n_invariant(&ModelGeometry::t3([0.5; 3])), Err(InvariantError::UnsupportedGeometry(_))));
        assert!(n_invariant(&ModelGeometry::flat_torus_bundle(0)).is_err());
    }

    #[test]
    fn rokhlin() {
        let s3 = ModelGeometry::s3_stub();
        assert!(rokhlin_parity(&s3, r(0, 1)).unwrap().parity_ok);
        assert!(rokhlin_parity(&s3, r(2, 1)).unwrap().parity_ok);
        assert!(!rokhlin_parity(&s3, r(1, 1)).unwrap().parity_ok);
        assert!(matches!(
            rokhlin_parity(&ModelGeometry::t3([0.5; 3]), r(0, 1)),
            Err(InvariantError::UnknownRokhlin(_))
        ));
    }

    #[test]
    fn report_round_trip() {
        let g = ModelGeometry::sphere_bundle(2, 1, 1).unwrap();
        let rep = invariant_report(&g, 0, None, serde_json::json!({"seed": 1})).unwrap();
        let text = serde_json::to_string(&rep).unwrap();
        assert!(text.contains("\"n_value\":\"1/8\"") && text.contains("\"froyshov_h\":\"-1/8\""));
        let back: InvariantReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rep);
        assert_eq!(rep.froyshov_h, Rational64::from_integer(rep.h_index) - rep.n_value);
    }
}
