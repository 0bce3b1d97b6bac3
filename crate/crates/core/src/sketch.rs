//! Non-private sketches: MinHash, one permutation hashing with fixed or
//! re-randomized densification, b-bit coding, CWS and bin-wise CWS.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{SparseBinaryVector, SparseWeightedVector};
use crate::error::{Error, Result};
use crate::randomness::{
    check_bits, BitMixer, Binning, CwsRandomness, LookupSequence, MinHashPermutations,
};

/// One hash slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    /// A raw hash value in `[1, D]`.
    Raw(u32),
    /// A b-bit code in `[0, 2^b - 1]`.
    Code(u32),
    /// An empty bin.
    Empty,
}

impl Slot {
    pub fn is_empty(&self) -> bool {
        matches!(self, Slot::Empty)
    }

    pub fn code(&self) -> Option<u32> {
        match *self {
            Slot::Code(c) => Some(c),
            _ => None,
        }
    }
}

/// How a signature was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    MinHash,
    Oph,
    OphFix,
    OphRe,
    Bcws,
    DpOphFix,
    DpOphRe,
    DpOphRand,
    DpMinHash,
    DpBcws,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::MinHash => "minhash",
            Scheme::Oph => "oph",
            Scheme::OphFix => "oph-fix",
            Scheme::OphRe => "oph-re",
            Scheme::Bcws => "bcws",
            Scheme::DpOphFix => "dp-oph-fix",
            Scheme::DpOphRe => "dp-oph-re",
            Scheme::DpOphRand => "dp-oph-rand",
            Scheme::DpMinHash => "dp-minhash",
            Scheme::DpBcws => "dp-bcws",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Scheme::MinHash,
            Scheme::Oph,
            Scheme::OphFix,
            Scheme::OphRe,
            Scheme::Bcws,
            Scheme::DpOphFix,
            Scheme::DpOphRe,
            Scheme::DpOphRand,
            Scheme::DpMinHash,
            Scheme::DpBcws,
        ]
        .into_iter()
        .find(|v| v.name() == s)
        .ok_or_else(|| Error::Parameter(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureMeta {
    pub scheme: Scheme,
    pub dim: u32,
    pub bins: u32,
    pub bits: Option<u8>,
    pub seed: u64,
}

/// `K` hash slots plus the parameters that produced them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    meta: SignatureMeta,
    slots: Vec<Slot>,
}

impl Signature {
    pub fn new(meta: SignatureMeta, slots: Vec<Slot>) -> Result<Self> {
        if slots.len() != meta.bins as usize {
            return Err(Error::Parameter(format!(
                "{} slots for K = {}",
                slots.len(),
                meta.bins
            )));
        }
        if let Some(bits) = meta.bits {
            check_bits(bits)?;
            if slots
                .iter()
                .any(|s| matches!(s, Slot::Code(c) if *c >> bits != 0))
            {
                return Err(Error::Parameter(format!("code outside [0, 2^{bits})")));
            }
        }
        Ok(Self { meta, slots })
    }

    pub fn meta(&self) -> &SignatureMeta {
        &self.meta
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn empty_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_empty()).count()
    }

    /// All slots as codes; `None` if any slot is not a code.
    pub fn codes(&self) -> Option<Vec<u32>> {
        self.slots.iter().map(Slot::code).collect()
    }
}

fn require_support(nnz: usize) -> Result<()> {
    if nnz == 0 {
        Err(Error::Precondition("hashing needs at least one nonzero".into()))
    } else {
        Ok(())
    }
}

fn require_dim(vector_dim: u32, dim: u32) -> Result<()> {
    if vector_dim != dim {
        Err(Error::Dimension(format!(
            "vector dimension {vector_dim} differs from hashing dimension {dim}"
        )))
    } else {
        Ok(())
    }
}

/// MinHash: slot `k` is `min_{i : u_i = 1} π_k(i)`.
pub fn minhash(u: &SparseBinaryVector, perms: &MinHashPermutations) -> Result<Signature> {
    require_support(u.nnz())?;
    require_dim(u.dim(), perms.dim())?;
    let slots = perms
        .iter()
        .map(|p| Slot::Raw(u.indices().iter().map(|&i| p.apply(i)).min().unwrap()))
        .collect();
    Signature::new(
        SignatureMeta {
            scheme: Scheme::MinHash,
            dim: u.dim(),
            bins: perms.count(),
            bits: None,
            seed: perms.seed(),
        },
        slots,
    )
}

/// One permutation hashing: per bin, the smallest permuted index of a nonzero, or EMPTY.
pub fn oph(u: &SparseBinaryVector, binning: &Binning) -> Result<Signature> {
    require_support(u.nnz())?;
    require_dim(u.dim(), binning.dim())?;
    let perm = binning.permutation();
    let width = binning.width();
    let mut mins = vec![u32::MAX; binning.bins() as usize];
    for &j in u.indices() {
        let p = perm.apply(j);
        let k = ((p - 1) / width) as usize;
        mins[k] = mins[k].min(p);
    }
    let slots = mins
        .into_iter()
        .map(|m| if m == u32::MAX { Slot::Empty } else { Slot::Raw(m) })
        .collect();
    Signature::new(
        SignatureMeta {
            scheme: Scheme::Oph,
            dim: u.dim(),
            bins: binning.bins(),
            bits: None,
            seed: perm.seed().unwrap_or(0),
        },
        slots,
    )
}

fn check_densifiable(s: &Signature, lookup: &LookupSequence) -> Result<()> {
    if s.meta.scheme != Scheme::Oph || s.meta.bits.is_some() {
        return Err(Error::Precondition(
            "densification takes a raw one permutation hashing signature".into(),
        ));
    }
    if lookup.bins() != s.meta.bins {
        return Err(Error::Parameter(format!(
            "lookup sequence has K = {}, signature has K = {}",
            lookup.bins(),
            s.meta.bins
        )));
    }
    if s.slots.iter().all(Slot::is_empty) {
        return Err(Error::DegenerateSignature);
    }
    Ok(())
}

/// The first non-empty bin in the search order of empty bin `k`.
fn donor(slots: &[Slot], lookup: &LookupSequence, k: u32) -> u32 {
    lookup
        .order(k)
        .find(|&c| !slots[c as usize - 1].is_empty())
        .expect("a non-empty bin exists")
}

/// Fixed densification: an empty slot copies its donor's value.
pub fn densify_fix(s: &Signature, lookup: &LookupSequence) -> Result<Signature> {
    check_densifiable(s, lookup)?;
    let slots = (1..=s.meta.bins)
        .map(|k| match s.slots[k as usize - 1] {
            Slot::Empty => s.slots[donor(&s.slots, lookup, k) as usize - 1],
            filled => filled,
        })
        .collect();
    Signature::new(
        SignatureMeta {
            scheme: Scheme::OphFix,
            ..s.meta
        },
        slots,
    )
}

/// Re-randomized densification.
///
/// An empty slot `k` with donor `k'` hashes the donor bin again under the
/// within-bin partial permutation induced by bin `k`: the `t`-th member of
/// `B_{k'}` (ascending index order) is sent to the rank of `π` over the
/// `t`-th member of `B_k`, shifted into the donor's range by `(k'-1)d`.
pub fn densify_re(
    s: &Signature,
    u: &SparseBinaryVector,
    binning: &Binning,
    lookup: &LookupSequence,
) -> Result<Signature> {
    check_densifiable(s, lookup)?;
    require_dim(u.dim(), binning.dim())?;
    if binning.bins() != s.meta.bins {
        return Err(Error::Parameter("binning and signature disagree on K".into()));
    }
    let perm = binning.permutation();
    let width = binning.width();
    let bins = binning.bins() as usize;

    let mut by_bin: Vec<Vec<u32>> = vec![Vec::new(); bins];
    for &j in u.indices() {
        by_bin[binning.bin_of(j) as usize - 1].push(j);
    }

    let mut slots = s.slots.clone();
    for k in 1..=s.meta.bins {
        if !s.slots[k as usize - 1].is_empty() {
            continue;
        }
        let kd = donor(&s.slots, lookup, k);
        let own = binning.members(k);
        let offset_k = (k - 1) * width;
        let offset_donor = (kd - 1) * width;
        let value = by_bin[kd as usize - 1]
            .iter()
            .map(|&j| perm.apply(own[binning.rank_in_bin(j) as usize]) - offset_k + offset_donor)
            .min()
            .expect("donor bin is non-empty");
        slots[k as usize - 1] = Slot::Raw(value);
    }
    Signature::new(
        SignatureMeta {
            scheme: Scheme::OphRe,
            ..s.meta
        },
        slots,
    )
}

/// Maps raw slots to b-bit codes. EMPTY slots are an error unless `keep_empty`.
pub fn b_bit_encode(
    s: &Signature,
    bits: u8,
    mixer: BitMixer,
    keep_empty: bool,
) -> Result<Signature> {
    check_bits(bits)?;
    if s.meta.bits.is_some() {
        return Err(Error::Precondition("signature is already b-bit coded".into()));
    }
    let slots = s
        .slots
        .iter()
        .map(|slot| match *slot {
            Slot::Raw(v) => Ok(Slot::Code(mixer.code(v, bits))),
            Slot::Empty if keep_empty => Ok(Slot::Empty),
            Slot::Empty => Err(Error::Precondition(
                "EMPTY slot in b-bit coding without pass-through".into(),
            )),
            Slot::Code(_) => unreachable!("raw signature holds no codes"),
        })
        .collect::<Result<Vec<_>>>()?;
    Signature::new(
        SignatureMeta {
            bits: Some(bits),
            ..s.meta
        },
        slots,
    )
}

/// Result of consistent weighted sampling. Only `index` is used downstream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwsSample {
    pub index: u32,
    pub t: i64,
}

fn cws_over<'a>(
    entries: impl Iterator<Item = &'a (u32, f64)>,
    rand: &CwsRandomness,
    slot: u32,
) -> Option<CwsSample> {
    let mut best: Option<(f64, CwsSample)> = None;
    for &(i, w) in entries {
        let tr = rand.triple(slot, i);
        let t = (w.ln() / tr.r + tr.beta).floor();
        let y = (tr.r * (t - tr.beta)).exp();
        let a = tr.c / (y * tr.r.exp());
        // Strict comparison keeps the smallest index on ties.
        if best.is_none_or(|(ba, _)| a < ba) {
            best = Some((
                a,
                CwsSample {
                    index: i,
                    t: t as i64,
                },
            ));
        }
    }
    best.map(|b| b.1)
}

/// Consistent weighted sampling of `u` with the randomness of hash slot `slot`.
pub fn cws(u: &SparseWeightedVector, rand: &CwsRandomness, slot: u32) -> Result<CwsSample> {
    require_support(u.nnz())?;
    Ok(cws_over(u.entries().iter(), rand, slot).unwrap())
}

/// `K` independent CWS hashes of the whole vector (slots `1..=K`).
pub fn cws_signature(u: &SparseWeightedVector, rand: &CwsRandomness, count: u32) -> Result<Signature> {
    require_support(u.nnz())?;
    let slots = (1..=count)
        .map(|k| Slot::Raw(cws_over(u.entries().iter(), rand, k).unwrap().index))
        .collect();
    Signature::new(
        SignatureMeta {
            scheme: Scheme::Bcws,
            dim: u.dim(),
            bins: count,
            bits: None,
            seed: rand.seed(),
        },
        slots,
    )
}

/// Bin-wise CWS: CWS restricted to each non-empty bin, EMPTY otherwise.
///
/// All bins draw on one set of dimension-indexed triples (slot 0); a slot
/// stores the global index `i*` of its bin's sample.
pub fn bcws(u: &SparseWeightedVector, binning: &Binning, rand: &CwsRandomness) -> Result<Signature> {
    require_support(u.nnz())?;
    require_dim(u.dim(), binning.dim())?;
    let mut by_bin: Vec<Vec<(u32, f64)>> = vec![Vec::new(); binning.bins() as usize];
    for &(j, w) in u.entries() {
        by_bin[binning.bin_of(j) as usize - 1].push((j, w));
    }
    let slots = by_bin
        .iter()
        .map(|entries| match cws_over(entries.iter(), rand, 0) {
            Some(sample) => Slot::Raw(sample.index),
            None => Slot::Empty,
        })
        .collect();
    Signature::new(
        SignatureMeta {
            scheme: Scheme::Bcws,
            dim: u.dim(),
            bins: binning.bins(),
            bits: None,
            seed: rand.seed(),
        },
        slots,
    )
}
