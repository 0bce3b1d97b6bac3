//! All shared randomness for one variant, derived from a master seed.

use rand::Rng;

use crate::data::{SparseBinaryVector, SparseWeightedVector};
use crate::error::{Error, Result};
use crate::privacy::{
    dp_bcws, dp_minhash, dp_oph_densified, dp_oph_rand, PrivacyBudget, Privatizer, Variant,
};
use crate::randomness::{check_bits, BitMixer, Binning, CwsRandomness, LookupSequence, MinHashPermutations};
use crate::sketch::{b_bit_encode, bcws, densify_fix, densify_re, minhash, oph, Signature};

#[derive(Debug, Clone)]
enum Structure {
    Oph { binning: Binning, lookup: LookupSequence },
    MinHash(MinHashPermutations),
    Bcws { binning: Binning, cws: CwsRandomness },
}

/// Sketches vectors for one variant; every vector sees the same randomness.
#[derive(Debug, Clone)]
pub struct Hasher {
    variant: Variant,
    seed: u64,
    dim: u32,
    bins: u32,
    bits: u8,
    mixer: BitMixer,
    structure: Structure,
}

impl Hasher {
    pub fn new(variant: Variant, seed: u64, dim: u32, bins: u32, bits: u8) -> Result<Self> {
        check_bits(bits)?;
        if bins == 0 {
            return Err(Error::Parameter("K must be >= 1".into()));
        }
        let structure = match variant {
            Variant::OphFix | Variant::OphRe | Variant::OphRand => Structure::Oph {
                binning: Binning::from_seed(seed, dim, bins)?,
                lookup: LookupSequence::new(seed, bins)?,
            },
            Variant::MinHash => Structure::MinHash(MinHashPermutations::new(seed, dim, bins)?),
            Variant::BcwsRand => Structure::Bcws {
                binning: Binning::from_seed(seed, dim, bins)?,
                cws: CwsRandomness::new(seed),
            },
        };
        Ok(Self {
            variant,
            seed,
            dim,
            bins,
            bits,
            mixer: BitMixer::from_master(seed),
            structure,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn bins(&self) -> u32 {
        self.bins
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    /// Builds the randomized-response stage for this geometry.
    pub fn privatizer(&self, epsilon: f64, delta: f64, f_min: u32) -> Result<Privatizer> {
        let budget = if self.variant.is_pure() {
            PrivacyBudget::new(epsilon, delta.max(0.0), self.bits, f_min.max(1), self.variant)?
        } else {
            PrivacyBudget::new(epsilon, delta, self.bits, f_min, self.variant)?
        };
        Privatizer::new(budget, self.dim, self.bins)
    }

    /// Non-private b-bit signature. OPH-RAND and BCWS keep EMPTY slots.
    pub fn sketch(&self, u: &SparseBinaryVector) -> Result<Signature> {
        match &self.structure {
            Structure::Bcws { .. } => self.sketch_weighted(&SparseWeightedVector::from(u)),
            _ => self.encode(self.sketch_raw(u)?),
        }
    }

    /// Non-private b-bit signature from weighted input; binary variants use the support.
    pub fn sketch_weighted(&self, u: &SparseWeightedVector) -> Result<Signature> {
        match &self.structure {
            Structure::Bcws { binning, cws } => self.encode(bcws(u, binning, cws)?),
            _ => self.sketch(&support_of(u)),
        }
    }

    /// Raw (uncoded) slots of the underlying non-private sketch.
    pub fn sketch_raw(&self, u: &SparseBinaryVector) -> Result<Signature> {
        match &self.structure {
            Structure::Oph { binning, lookup } => {
                let raw = oph(u, binning)?;
                match self.variant {
                    Variant::OphFix => densify_fix(&raw, lookup),
                    Variant::OphRe => densify_re(&raw, u, binning, lookup),
                    _ => Ok(raw),
                }
            }
            Structure::MinHash(perms) => minhash(u, perms),
            Structure::Bcws { binning, cws } => bcws(&SparseWeightedVector::from(u), binning, cws),
        }
    }

    fn encode(&self, raw: Signature) -> Result<Signature> {
        b_bit_encode(&raw, self.bits, self.mixer, self.variant.is_pure())
    }

    /// Privatized signature; `rng` supplies the response noise.
    pub fn dp_sketch<R: Rng + ?Sized>(
        &self,
        u: &SparseBinaryVector,
        privatizer: &Privatizer,
        rng: &mut R,
    ) -> Result<Signature> {
        match &self.structure {
            Structure::Oph { binning, lookup } => match self.variant {
                Variant::OphRand => dp_oph_rand(u, binning, self.mixer, privatizer, rng),
                _ => dp_oph_densified(u, binning, lookup, self.mixer, privatizer, rng),
            },
            Structure::MinHash(perms) => dp_minhash(u, perms, self.mixer, privatizer, rng),
            Structure::Bcws { .. } => self.dp_sketch_weighted(&SparseWeightedVector::from(u), privatizer, rng),
        }
    }

    pub fn dp_sketch_weighted<R: Rng + ?Sized>(
        &self,
        u: &SparseWeightedVector,
        privatizer: &Privatizer,
        rng: &mut R,
    ) -> Result<Signature> {
        match &self.structure {
            Structure::Bcws { binning, cws } => dp_bcws(u, binning, cws, self.mixer, privatizer, rng),
            _ => self.dp_sketch(&support_of(u), privatizer, rng),
        }
    }
}

fn support_of(u: &SparseWeightedVector) -> SparseBinaryVector {
    let indices = u.entries().iter().map(|&(i, _)| i).collect();
    SparseBinaryVector::new(u.dim(), indices).expect("weighted entries are sorted and in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::stream;
    use crate::sketch::Slot;

    fn vector() -> SparseBinaryVector {
        SparseBinaryVector::new(64, (1..=64).step_by(5).collect()).unwrap()
    }

    #[test]
    fn same_seed_same_signature() {
        for v in Variant::ALL {
            let a = Hasher::new(v, 11, 64, 8, 2).unwrap().sketch(&vector()).unwrap();
            let b = Hasher::new(v, 11, 64, 8, 2).unwrap().sketch(&vector()).unwrap();
            assert_eq!(a, b, "{v}");
            assert_eq!(a.len(), 8);
        }
    }

    #[test]
    fn densified_variants_have_no_empty_slots() {
        let u = SparseBinaryVector::new(64, vec![3]).unwrap();
        for v in [Variant::OphFix, Variant::OphRe, Variant::MinHash] {
            let s = Hasher::new(v, 1, 64, 8, 1).unwrap().sketch(&u).unwrap();
            assert_eq!(s.empty_count(), 0);
        }
        let s = Hasher::new(Variant::OphRand, 1, 64, 8, 1).unwrap().sketch(&u).unwrap();
        assert_eq!(s.empty_count(), 7);
    }

    #[test]
    fn divisibility_is_enforced() {
        let err = Hasher::new(Variant::OphRe, 1, 100, 16, 1).unwrap_err();
        assert!(matches!(err, Error::Divisibility { padded: 112, .. }));
        assert!(Hasher::new(Variant::MinHash, 1, 100, 16, 1).is_ok());
    }

    #[test]
    fn privatized_signatures_are_fully_coded() {
        let u = vector();
        let mut rng = stream(3);
        for v in Variant::ALL {
            let h = Hasher::new(v, 5, 64, 8, 2).unwrap();
            let p = h.privatizer(1.0, 1e-6, 5).unwrap();
            let s = h.dp_sketch(&u, &p, &mut rng).unwrap();
            assert!(s.slots().iter().all(|x| matches!(x, Slot::Code(c) if *c < 4)));
        }
    }

    #[test]
    fn weighted_input_on_binary_variant_uses_support() {
        let h = Hasher::new(Variant::OphRe, 2, 64, 8, 2).unwrap();
        let w = SparseWeightedVector::new(64, vec![(3, 0.5), (40, 9.0)]).unwrap();
        let b = SparseBinaryVector::new(64, vec![3, 40]).unwrap();
        assert_eq!(h.sketch_weighted(&w).unwrap(), h.sketch(&b).unwrap());
    }
}
