//! Seeded randomness shared by every vector.
//!
//! All objects here are pure functions of a 64-bit seed. Sub-seeds are derived
//! with a counter-style construction `derive_seed(master, purpose, a, b)`, so
//! hashing never depends on the order in which vectors or slots are processed.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

/// The SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// What a derived seed is used for. Distinct tags give independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Permutation = 1,
    Lookup = 2,
    Mixer = 3,
    MinHash = 4,
    Cws = 5,
    Noise = 6,
    Replicate = 7,
    Split = 8,
}

/// Counter-based derivation of an independent seed from `(master, purpose, a, b)`.
pub fn derive_seed(master: u64, purpose: Purpose, a: u64, b: u64) -> u64 {
    let mut h = mix64(master ^ GOLDEN.wrapping_mul(purpose as u64));
    h = mix64(h ^ a.wrapping_add(GOLDEN));
    mix64(h ^ b.wrapping_mul(GOLDEN).wrapping_add(0x632b_e59b_d9b4_e019))
}

/// Generator used for every seeded stream.
pub type StreamRng = Xoshiro256PlusPlus;

pub fn stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// A bijection `π : [D] → [D]`, stored with its inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    seed: Option<u64>,
    // forward[j - 1] = π(j)
    forward: Vec<u32>,
    // inverse[p - 1] = j with π(j) = p
    inverse: Vec<u32>,
}

impl Permutation {
    /// Uniform random permutation by a seeded Fisher-Yates shuffle.
    pub fn new(seed: u64, dim: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("permutation dimension must be >= 1".into()));
        }
        let mut forward: Vec<u32> = (1..=dim).collect();
        forward.shuffle(&mut stream(derive_seed(seed, Purpose::Permutation, dim as u64, 0)));
        let mut p = Self::from_mapping(forward)?;
        p.seed = Some(seed);
        Ok(p)
    }

    /// Wraps an explicit mapping `[π(1), ..., π(D)]`.
    pub fn from_mapping(forward: Vec<u32>) -> Result<Self> {
        let dim = forward.len();
        let mut inverse = vec![0u32; dim];
        for (j, &p) in forward.iter().enumerate() {
            if p == 0 || p as usize > dim || inverse[p as usize - 1] != 0 {
                return Err(Error::Parameter("mapping is not a bijection on [1, D]".into()));
            }
            inverse[p as usize - 1] = j as u32 + 1;
        }
        Ok(Self {
            seed: None,
            forward,
            inverse,
        })
    }

    pub fn identity(dim: u32) -> Self {
        Self::from_mapping((1..=dim).collect()).expect("identity is a bijection")
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn dim(&self) -> u32 {
        self.forward.len() as u32
    }

    /// `π(j)` for 1-based `j`.
    #[inline]
    pub fn apply(&self, j: u32) -> u32 {
        self.forward[j as usize - 1]
    }

    /// The `j` with `π(j) = position`.
    #[inline]
    pub fn preimage(&self, position: u32) -> u32 {
        self.inverse[position as usize - 1]
    }

    pub fn mapping(&self) -> &[u32] {
        &self.forward
    }
}

pub fn make_permutation(seed: u64, dim: u32) -> Result<Permutation> {
    Permutation::new(seed, dim)
}

pub(crate) fn check_divides(dim: u32, bins: u32) -> Result<()> {
    if bins == 0 {
        return Err(Error::Parameter("bin count K must be >= 1".into()));
    }
    if !dim.is_multiple_of(bins) {
        return Err(Error::Divisibility {
            dim,
            bins,
            padded: dim.div_ceil(bins) * bins,
        });
    }
    Ok(())
}

/// Bin of coordinate `j` under `p` with `K` bins: the `k` with `(k-1)d < π(j) <= kd`.
pub fn bin_of(p: &Permutation, j: u32, bins: u32) -> Result<u32> {
    check_divides(p.dim(), bins)?;
    if j == 0 || j > p.dim() {
        return Err(Error::Dimension(format!("index {j} outside [1, {}]", p.dim())));
    }
    let width = p.dim() / bins;
    Ok((p.apply(j) - 1) / width + 1)
}

/// A permutation together with the equal-width split of `[D]` into `K` bins.
///
/// Besides `π` it precomputes, for every coordinate, its rank within its own
/// bin when the bin's members are listed in ascending index order. That rank
/// is what the re-randomized densification needs.
#[derive(Debug, Clone)]
pub struct Binning {
    perm: Permutation,
    bins: u32,
    width: u32,
    // members[(k-1)*d .. k*d] = ascending indices of bin k
    members: Vec<u32>,
    // rank_in_bin[j-1] = 0-based position of j in its bin's ascending member list
    rank_in_bin: Vec<u32>,
}

impl Binning {
    pub fn new(perm: Permutation, bins: u32) -> Result<Self> {
        let dim = perm.dim();
        check_divides(dim, bins)?;
        let width = dim / bins;
        let mut members = vec![0u32; dim as usize];
        let mut fill = vec![0u32; bins as usize];
        let mut rank_in_bin = vec![0u32; dim as usize];
        for j in 1..=dim {
            let k = (perm.apply(j) - 1) / width;
            let r = fill[k as usize];
            members[(k * width + r) as usize] = j;
            rank_in_bin[j as usize - 1] = r;
            fill[k as usize] += 1;
        }
        Ok(Self {
            perm,
            bins,
            width,
            members,
            rank_in_bin,
        })
    }

    pub fn from_seed(seed: u64, dim: u32, bins: u32) -> Result<Self> {
        check_divides(dim, bins)?;
        Self::new(Permutation::new(seed, dim)?, bins)
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    pub fn dim(&self) -> u32 {
        self.perm.dim()
    }

    pub fn bins(&self) -> u32 {
        self.bins
    }

    /// Bin width `d = D / K`.
    pub fn width(&self) -> u32 {
        self.width
    }

    /// 1-based bin of coordinate `j`.
    #[inline]
    pub fn bin_of(&self, j: u32) -> u32 {
        (self.perm.apply(j) - 1) / self.width + 1
    }

    /// Ascending member indices of bin `k` (1-based).
    pub fn members(&self, k: u32) -> &[u32] {
        let start = ((k - 1) * self.width) as usize;
        &self.members[start..start + self.width as usize]
    }

    #[inline]
    pub(crate) fn rank_in_bin(&self, j: u32) -> u32 {
        self.rank_in_bin[j as usize - 1]
    }
}

/// Per-bin search orders for the densification donor lookup.
///
/// For every bin `k` the order is a seeded uniform permutation of
/// `[K] \ {k}`, identical for all vectors. Orders are generated lazily by an
/// incremental Fisher-Yates shuffle, so a lookup that stops after a few steps
/// costs a few steps regardless of `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LookupSequence {
    seed: u64,
    bins: u32,
}

impl LookupSequence {
    pub fn new(seed: u64, bins: u32) -> Result<Self> {
        if bins == 0 {
            return Err(Error::Parameter("bin count K must be >= 1".into()));
        }
        Ok(Self { seed, bins })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bins(&self) -> u32 {
        self.bins
    }

    /// Lazily generated search order for empty bin `k` (1-based).
    pub fn order(&self, k: u32) -> LookupOrder {
        assert!(k >= 1 && k <= self.bins, "bin {k} outside [1, {}]", self.bins);
        LookupOrder {
            rng: stream(derive_seed(self.seed, Purpose::Lookup, self.bins as u64, k as u64)),
            excluded: k,
            len: self.bins - 1,
            step: 0,
            swapped: HashMap::new(),
        }
    }

    /// The full order for bin `k`.
    pub fn materialize(&self, k: u32) -> Vec<u32> {
        self.order(k).collect()
    }
}

pub fn lookup_sequence(seed: u64, bins: u32) -> Result<LookupSequence> {
    LookupSequence::new(seed, bins)
}

/// Iterator over one bin's donor search order.
#[derive(Debug)]
pub struct LookupOrder {
    rng: StreamRng,
    excluded: u32,
    len: u32,
    step: u32,
    swapped: HashMap<u32, u32>,
}

impl LookupOrder {
    // Slot s of the virtual array initially holds the s-th bin other than `excluded`.
    fn slot(&self, s: u32) -> u32 {
        self.swapped.get(&s).copied().unwrap_or_else(|| {
            let b = s + 1;
            if b >= self.excluded {
                b + 1
            } else {
                b
            }
        })
    }
}

impl Iterator for LookupOrder {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        if self.step >= self.len {
            return None;
        }
        let t = self.step;
        let r = self.rng.gen_range(t..self.len);
        let (at_t, at_r) = (self.slot(t), self.slot(r));
        self.swapped.insert(r, at_t);
        self.step += 1;
        Some(at_r)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.len - self.step) as usize;
        (n, Some(n))
    }
}

/// Maps hash values onto `{0, ..., 2^b - 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitMixer {
    /// Keyed SplitMix64 finalizer, then the lowest `b` bits.
    Seeded(u64),
    /// `value mod 2^b`. Only for making unit-test arithmetic transparent.
    Identity,
}

impl BitMixer {
    pub fn from_master(master: u64) -> Self {
        BitMixer::Seeded(derive_seed(master, Purpose::Mixer, 0, 0))
    }

    #[inline]
    pub fn code(&self, value: u32, bits: u8) -> u32 {
        let mask = (1u64 << bits) - 1;
        let v = match *self {
            BitMixer::Seeded(key) => mix64(value as u64 ^ key),
            BitMixer::Identity => value as u64,
        };
        (v & mask) as u32
    }
}

pub fn check_bits(bits: u8) -> Result<()> {
    if (1..=16).contains(&bits) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("b must lie in 1..=16, got {bits}")))
    }
}

/// `mix_to_b_bits(value, b, seed)`.
pub fn mix_to_b_bits(value: u32, bits: u8, mixer: BitMixer) -> Result<u32> {
    check_bits(bits)?;
    Ok(mixer.code(value, bits))
}

/// `K` independently seeded permutations for MinHash.
#[derive(Debug, Clone)]
pub struct MinHashPermutations {
    seed: u64,
    perms: Vec<Permutation>,
}

impl MinHashPermutations {
    pub fn new(seed: u64, dim: u32, count: u32) -> Result<Self> {
        if count == 0 {
            return Err(Error::Parameter("MinHash needs K >= 1".into()));
        }
        let perms = (1..=count)
            .map(|k| Permutation::new(derive_seed(seed, Purpose::MinHash, k as u64, 0), dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { seed, perms })
    }

    pub fn from_permutations(perms: Vec<Permutation>) -> Result<Self> {
        if perms.is_empty() || perms.iter().any(|p| p.dim() != perms[0].dim()) {
            return Err(Error::Parameter("need >= 1 permutations of one dimension".into()));
        }
        Ok(Self { seed: 0, perms })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> u32 {
        self.perms[0].dim()
    }

    pub fn count(&self) -> u32 {
        self.perms.len() as u32
    }

    pub fn get(&self, k: u32) -> &Permutation {
        &self.perms[k as usize - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Permutation> {
        self.perms.iter()
    }
}

/// Per-coordinate CWS randomness `(r, c, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwsTriple {
    pub r: f64,
    pub c: f64,
    pub beta: f64,
}

/// Stateless source of CWS triples keyed by `(seed, slot, index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CwsRandomness {
    seed: u64,
}

impl CwsRandomness {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `r, c ~ Gamma(2, 1)` as sums of two unit exponentials, `β ~ U[0, 1)`.
    pub fn triple(&self, slot: u32, index: u32) -> CwsTriple {
        let mut rng = stream(derive_seed(self.seed, Purpose::Cws, slot as u64, index as u64));
        let mut exp1 = || -> f64 {
            // 1 - U lies in (0, 1], so the log is finite.
            -(1.0 - rng.gen::<f64>()).ln()
        };
        let r = exp1() + exp1();
        let c = exp1() + exp1();
        let beta = rng.gen::<f64>();
        CwsTriple { r, c, beta }
    }
}

pub fn cws_triple(r: &CwsRandomness, slot: u32, index: u32) -> CwsTriple {
    r.triple(slot, index)
}
