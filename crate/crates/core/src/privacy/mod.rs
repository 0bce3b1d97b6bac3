//! Privacy calculus and the randomized-response mechanisms built on it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod combinatorics;
mod mechanism;
mod pmf;

pub use mechanism::{
    dp_bcws, dp_minhash, dp_oph_densified, dp_oph_rand, keep_probability, randomized_response,
    response_probability, Privatizer,
};
pub use pmf::{
    discount_factor, p_neq, pmf_bin_nnz, pmf_diff_count, pmf_minhash_diff, pmf_num_empty,
    DiscountFactor, PmfTable,
};

/// Which DP hashing scheme a budget applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "oph-fix")]
    OphFix,
    #[serde(rename = "oph-re")]
    OphRe,
    #[serde(rename = "oph-rand")]
    OphRand,
    #[serde(rename = "mh")]
    MinHash,
    #[serde(rename = "bcws")]
    BcwsRand,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::OphFix,
        Variant::OphRe,
        Variant::OphRand,
        Variant::MinHash,
        Variant::BcwsRand,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::OphFix => "oph-fix",
            Variant::OphRe => "oph-re",
            Variant::OphRand => "oph-rand",
            Variant::MinHash => "mh",
            Variant::BcwsRand => "bcws",
        }
    }

    /// Pure ε-DP schemes run with `δ = 0` and `N = 1`.
    pub fn is_pure(&self) -> bool {
        matches!(self, Variant::OphRand | Variant::BcwsRand)
    }

    /// Whether the guarantee assumes every vector has at least `f_min` nonzeros.
    pub fn needs_f_min(&self) -> bool {
        !self.is_pure()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::Parameter(format!(
                    "unknown variant `{s}` (expected oph-fix, oph-re, oph-rand, mh or bcws)"
                ))
            })
    }
}

/// `(ε, δ, b, f_min, variant)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
    pub bits: u8,
    pub f_min: u32,
    pub variant: Variant,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64, bits: u8, f_min: u32, variant: Variant) -> Result<Self> {
        let b = Self {
            epsilon,
            delta,
            bits,
            f_min,
            variant,
        };
        b.validate()?;
        Ok(b)
    }

    /// A pure ε-DP budget (`δ = 0`, `f_min = 1`) for the random-bit variants.
    pub fn pure(epsilon: f64, bits: u8, variant: Variant) -> Result<Self> {
        Self::new(epsilon, 0.0, bits, 1, variant)
    }

    pub fn validate(&self) -> Result<()> {
        crate::randomness::check_bits(self.bits)?;
        if !(self.epsilon > 0.0) || self.epsilon.is_nan() {
            return Err(Error::Parameter(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.f_min == 0 {
            return Err(Error::Parameter("f_min must be >= 1".into()));
        }
        if self.variant.is_pure() {
            if !(0.0..1.0).contains(&self.delta) {
                return Err(Error::Parameter(format!("delta must lie in [0, 1), got {}", self.delta)));
            }
        } else if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Parameter(format!(
                "{} needs delta in (0, 1), got {}",
                self.variant, self.delta
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("dp".parse::<Variant>().is_err());
    }

    #[test]
    fn budget_validation() {
        assert!(PrivacyBudget::new(1.0, 1e-6, 2, 50, Variant::OphRe).is_ok());
        assert!(PrivacyBudget::new(1.0, 0.0, 2, 50, Variant::OphRe).is_err());
        assert!(PrivacyBudget::new(0.0, 1e-6, 2, 50, Variant::MinHash).is_err());
        assert!(PrivacyBudget::new(1.0, 1e-6, 0, 50, Variant::OphFix).is_err());
        assert!(PrivacyBudget::new(1.0, 1e-6, 2, 0, Variant::OphFix).is_err());
        assert!(PrivacyBudget::pure(1.0, 2, Variant::OphRand).is_ok());
        assert!(PrivacyBudget::pure(1.0, 2, Variant::BcwsRand).is_ok());
    }
}
