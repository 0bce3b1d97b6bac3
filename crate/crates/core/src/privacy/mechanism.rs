use rand::Rng;

use super::{discount_factor, DiscountFactor, PrivacyBudget, Variant};
use crate::data::{SparseBinaryVector, SparseWeightedVector};
use crate::error::{Error, Result};
use crate::randomness::{BitMixer, Binning, CwsRandomness, LookupSequence, MinHashPermutations};
use crate::sketch::{
    b_bit_encode, bcws, densify_fix, densify_re, minhash, oph, Scheme, Signature, SignatureMeta,
    Slot,
};

/// `e^ε' / (e^ε' + 2^b - 1)`, written to stay finite for huge `ε'`.
pub fn keep_probability(eps_prime: f64, bits: u8) -> f64 {
    let others = ((1u64 << bits) - 1) as f64;
    1.0 / (1.0 + others * (-eps_prime).exp())
}

/// Keeps `code` with [`keep_probability`], otherwise draws uniformly among the other codes.
pub fn randomized_response<R: Rng + ?Sized>(code: u32, bits: u8, eps_prime: f64, rng: &mut R) -> u32 {
    let cells = 1u32 << bits;
    debug_assert!(code < cells);
    if rng.gen::<f64>() < keep_probability(eps_prime, bits) {
        code
    } else {
        let r = rng.gen_range(0..cells - 1);
        if r >= code {
            r + 1
        } else {
            r
        }
    }
}

/// `P(output | input)` for one slot. `None` is an EMPTY input, answered uniformly.
pub fn response_probability(input: Option<u32>, output: u32, bits: u8, eps_prime: f64) -> f64 {
    let cells = (1u64 << bits) as f64;
    match input {
        None => 1.0 / cells,
        Some(c) => {
            let keep = keep_probability(eps_prime, bits);
            if c == output {
                keep
            } else {
                (1.0 - keep) / (cells - 1.0)
            }
        }
    }
}

/// Randomized response for one budget and hashing geometry.
///
/// Construction computes the discount factor `N` once; afterwards
/// privatizing a signature is a pure function of the signature and the RNG.
#[derive(Debug, Clone, Copy)]
pub struct Privatizer {
    budget: PrivacyBudget,
    discount: DiscountFactor,
    eps_prime: f64,
}

impl Privatizer {
    pub fn new(budget: PrivacyBudget, dim: u32, bins: u32) -> Result<Self> {
        budget.validate()?;
        let discount = discount_factor(dim, bins, budget.f_min, budget.bits, budget.delta, budget.variant)?;
        Ok(Self {
            budget,
            discount,
            eps_prime: budget.epsilon / discount.n as f64,
        })
    }

    pub fn budget(&self) -> &PrivacyBudget {
        &self.budget
    }

    pub fn discount(&self) -> &DiscountFactor {
        &self.discount
    }

    /// `ε' = ε / N`.
    pub fn eps_prime(&self) -> f64 {
        self.eps_prime
    }

    pub fn keep_probability(&self) -> f64 {
        keep_probability(self.eps_prime, self.budget.bits)
    }

    pub fn scheme(&self) -> Scheme {
        match self.budget.variant {
            Variant::OphFix => Scheme::DpOphFix,
            Variant::OphRe => Scheme::DpOphRe,
            Variant::OphRand => Scheme::DpOphRand,
            Variant::MinHash => Scheme::DpMinHash,
            Variant::BcwsRand => Scheme::DpBcws,
        }
    }

    fn check(&self, variant: Variant, dim: u32, bins: u32, nnz: usize) -> Result<()> {
        if self.budget.variant != variant {
            return Err(Error::Parameter(format!(
                "privatizer built for {}, used for {variant}",
                self.budget.variant
            )));
        }
        if self.discount.dim != dim || self.discount.bins != bins {
            return Err(Error::Parameter(format!(
                "privatizer built for D = {}, K = {}; hashing uses D = {dim}, K = {bins}",
                self.discount.dim, self.discount.bins
            )));
        }
        if variant.needs_f_min() && nnz < self.budget.f_min as usize {
            return Err(Error::BudgetViolation {
                nnz,
                f_min: self.budget.f_min,
            });
        }
        Ok(())
    }

    /// Flips every code slot at level `ε'` and fills EMPTY slots with uniform codes.
    pub fn privatize<R: Rng + ?Sized>(&self, s: &Signature, rng: &mut R) -> Result<Signature> {
        let bits = self.budget.bits;
        if s.meta().bits != Some(bits) {
            return Err(Error::Precondition(format!(
                "expected a {bits}-bit coded signature"
            )));
        }
        let slots = s
            .slots()
            .iter()
            .map(|slot| match *slot {
                Slot::Code(c) => Slot::Code(randomized_response(c, bits, self.eps_prime, rng)),
                Slot::Empty => Slot::Code(rng.gen_range(0..1u32 << bits)),
                Slot::Raw(_) => unreachable!("coded signature holds no raw values"),
            })
            .collect();
        Signature::new(
            SignatureMeta {
                scheme: self.scheme(),
                ..*s.meta()
            },
            slots,
        )
    }
}

/// DP-OPH with fixed or re-randomized densification, `(ε, δ)`-DP.
pub fn dp_oph_densified<R: Rng + ?Sized>(
    u: &SparseBinaryVector,
    binning: &Binning,
    lookup: &LookupSequence,
    mixer: BitMixer,
    privatizer: &Privatizer,
    rng: &mut R,
) -> Result<Signature> {
    let variant = privatizer.budget().variant;
    if !matches!(variant, Variant::OphFix | Variant::OphRe) {
        return Err(Error::Parameter(format!("{variant} is not a densified variant")));
    }
    privatizer.check(variant, binning.dim(), binning.bins(), u.nnz())?;
    let raw = oph(u, binning)?;
    let dense = match variant {
        Variant::OphFix => densify_fix(&raw, lookup)?,
        _ => densify_re(&raw, u, binning, lookup)?,
    };
    let coded = b_bit_encode(&dense, privatizer.budget().bits, mixer, false)?;
    privatizer.privatize(&coded, rng)
}

/// DP-OPH with random codes for empty bins, pure ε-DP.
pub fn dp_oph_rand<R: Rng + ?Sized>(
    u: &SparseBinaryVector,
    binning: &Binning,
    mixer: BitMixer,
    privatizer: &Privatizer,
    rng: &mut R,
) -> Result<Signature> {
    privatizer.check(Variant::OphRand, binning.dim(), binning.bins(), u.nnz())?;
    let coded = b_bit_encode(&oph(u, binning)?, privatizer.budget().bits, mixer, true)?;
    privatizer.privatize(&coded, rng)
}

/// DP MinHash with the exact binomial discount factor, `(ε, δ)`-DP.
pub fn dp_minhash<R: Rng + ?Sized>(
    u: &SparseBinaryVector,
    perms: &MinHashPermutations,
    mixer: BitMixer,
    privatizer: &Privatizer,
    rng: &mut R,
) -> Result<Signature> {
    privatizer.check(Variant::MinHash, perms.dim(), perms.count(), u.nnz())?;
    let coded = b_bit_encode(&minhash(u, perms)?, privatizer.budget().bits, mixer, false)?;
    privatizer.privatize(&coded, rng)
}

/// DP bin-wise CWS with random codes for empty bins, pure ε-DP.
pub fn dp_bcws<R: Rng + ?Sized>(
    u: &SparseWeightedVector,
    binning: &Binning,
    cws: &CwsRandomness,
    mixer: BitMixer,
    privatizer: &Privatizer,
    rng: &mut R,
) -> Result<Signature> {
    privatizer.check(Variant::BcwsRand, binning.dim(), binning.bins(), u.nnz())?;
    let coded = b_bit_encode(&bcws(u, binning, cws)?, privatizer.budget().bits, mixer, true)?;
    privatizer.privatize(&coded, rng)
}
