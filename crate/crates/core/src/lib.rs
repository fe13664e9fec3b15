//! Regression with network cohesion.
//!
//! Observations sit on the nodes of a graph. Each node gets its own effect
//! `alpha_v` next to shared coefficients `beta`, and linked nodes are pulled
//! together by the Laplacian penalty `lambda alpha'(L + gamma I)alpha`.
//! Linear, logistic and Cox models are supported.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod glm;
pub mod graph;
pub mod io;
pub mod linear;
pub mod model_selection;
pub mod simulate;
pub mod solver;
pub mod sparse;
pub mod sparsify;
pub mod standardize;
pub mod theory;

use serde::{Deserialize, Serialize};

pub use error::{NetcohError, Result};
pub use graph::{laplacian, Graph, Laplacian};
pub use linear::{fit_linear, fitted_values, null_model_fit, ols_fit, LinearFit};
pub use solver::{SolveReport, SolverOptions};
pub use standardize::{standardize, Standardization};

/// Response family of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Linear,
    Logistic,
    Cox,
}

impl std::str::FromStr for Family {
    type Err = NetcohError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "gaussian" => Ok(Family::Linear),
            "logistic" | "binomial" => Ok(Family::Logistic),
            "cox" => Ok(Family::Cox),
            other => Err(NetcohError::InvalidParameter(format!(
                "unknown family '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Linear => "linear",
            Family::Logistic => "logistic",
            Family::Cox => "cox",
        })
    }
}

/// Derives an independent child seed from a root seed (SplitMix64 finalizer).
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    let mut z = root ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
