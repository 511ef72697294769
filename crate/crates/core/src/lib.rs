//! Divisibility and information backflow for qubit Pauli dynamics.
//!
//! The crate is organized bottom-up:
//!
//! * [`linalg`]: 2x2 and 4x4 Hermitian matrices, Pauli expansions, spectra.
//! * [`dynamics`]: rate models, decay factors, channels and Choi matrices.
//! * [`mixtures`]: mixtures of dephasing semigroups and their region tests.
//! * [`divisibility`]: CP, P and tensor-P divisibility verdicts.
//! * [`bfi`]: Helstrom trajectories, revival detection and witness search.
//! * [`cli`]: configuration and command drivers behind the `qdivide` binary.

pub mod bfi;
pub mod cli;
pub mod divisibility;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod mixtures;

pub use error::{Error, Result};

/// Default tolerance for sign decisions on normalized margins.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Version string embedded in reports.
pub const VERSION: &str = env!("QDIVIDE_VERSION");

/// Serializes times as JSON numbers, writing infinity as the string `"inf"`.
pub mod serde_time {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &f64, s: S) -> Result<S::Ok, S::Error> {
        if t.is_infinite() && *t > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*t)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Text(s) => Err(de::Error::custom(format!("invalid time {s:?}"))),
        }
    }

    /// Same encoding for optional times.
    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(t: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match t {
                Some(x) => super::serialize(x, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(Deserialize)]
            struct Wrap(#[serde(with = "super")] f64);
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}
