//! Signature files.
//!
//! Little-endian binary layout:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `DPOPHSIG`                        |
//! | 8      | 2    | version (1)                             |
//! | 10     | 1    | scheme tag                              |
//! | 11     | 1    | b (0 = raw slot values)                 |
//! | 12     | 4    | D                                       |
//! | 16     | 4    | K                                       |
//! | 20     | 8    | master seed                             |
//! | 28     | 1    | privatized flag (0 or 1)                |
//! | 29     | 3    | zero                                    |
//! | 32     | 8    | ε (f64, 0 when not privatized)          |
//! | 40     | 8    | δ (f64)                                 |
//! | 48     | 4    | discount factor N                       |
//! | 52     | 4    | zero                                    |
//! | 56     | 8    | noise seed                              |
//! | 64     | 8    | row count                               |
//! | 72     | ...  | rows: u64 id, then K u32 slots          |
//!
//! A slot value of `0xFFFFFFFF` is EMPTY.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sketch::{Scheme, Signature, SignatureMeta, Slot};

const MAGIC: &[u8; 8] = b"DPOPHSIG";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 72;
const EMPTY: u32 = u32::MAX;

const SCHEMES: [Scheme; 10] = [
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
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyRecord {
    pub epsilon: f64,
    pub delta: f64,
    pub n: u32,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignatureHeader {
    pub meta: SignatureMeta,
    pub privacy: Option<PrivacyRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureFile {
    pub header: SignatureHeader,
    pub ids: Vec<usize>,
    pub signatures: Vec<Signature>,
}

impl SignatureFile {
    pub fn new(header: SignatureHeader, ids: Vec<usize>, signatures: Vec<Signature>) -> Result<Self> {
        if ids.len() != signatures.len() {
            return Err(Error::Parameter("one id per signature required".into()));
        }
        if let Some(s) = signatures.iter().find(|s| s.meta() != &header.meta) {
            return Err(Error::Comparability(format!(
                "row scheme {} does not match header scheme {}",
                s.meta().scheme,
                header.meta.scheme
            )));
        }
        Ok(Self {
            header,
            ids,
            signatures,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.header.meta;
        let k = m.bins as usize;
        let mut out = Vec::with_capacity(HEADER_LEN + self.ids.len() * (8 + 4 * k));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(SCHEMES.iter().position(|s| *s == m.scheme).unwrap() as u8);
        out.push(m.bits.unwrap_or(0));
        out.extend_from_slice(&m.dim.to_le_bytes());
        out.extend_from_slice(&m.bins.to_le_bytes());
        out.extend_from_slice(&m.seed.to_le_bytes());
        let p = self.header.privacy;
        out.push(p.is_some() as u8);
        out.extend_from_slice(&[0; 3]);
        let rec = p.unwrap_or(PrivacyRecord {
            epsilon: 0.0,
            delta: 0.0,
            n: 0,
            noise_seed: 0,
        });
        out.extend_from_slice(&rec.epsilon.to_le_bytes());
        out.extend_from_slice(&rec.delta.to_le_bytes());
        out.extend_from_slice(&rec.n.to_le_bytes());
        out.extend_from_slice(&[0; 4]);
        out.extend_from_slice(&rec.noise_seed.to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u64).to_le_bytes());
        for (id, s) in self.ids.iter().zip(&self.signatures) {
            out.extend_from_slice(&(*id as u64).to_le_bytes());
            for slot in s.slots() {
                let v = match *slot {
                    Slot::Raw(v) | Slot::Code(v) => v,
                    Slot::Empty => EMPTY,
                };
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Parse {
            line: 0,
            message: format!("signature file: {m}"),
        };
        if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
            return Err(bad("missing magic"));
        }
        let u16_at = |o: usize| u16::from_le_bytes(bytes[o..o + 2].try_into().unwrap());
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        if u16_at(8) != VERSION {
            return Err(bad(&format!("unsupported version {}", u16_at(8))));
        }
        let scheme = *SCHEMES
            .get(bytes[10] as usize)
            .ok_or_else(|| bad("unknown scheme tag"))?;
        let bits = (bytes[11] != 0).then_some(bytes[11]);
        let meta = SignatureMeta {
            scheme,
            dim: u32_at(12),
            bins: u32_at(16),
            bits,
            seed: u64_at(20),
        };
        let privacy = match bytes[28] {
            0 => None,
            1 => Some(PrivacyRecord {
                epsilon: f64_at(32),
                delta: f64_at(40),
                n: u32_at(48),
                noise_seed: u64_at(56),
            }),
            _ => return Err(bad("bad privatized flag")),
        };
        let rows = u64_at(64) as usize;
        let k = meta.bins as usize;
        let row_len = 8 + 4 * k;
        if bytes.len() != HEADER_LEN + rows * row_len {
            return Err(bad("length does not match the row count"));
        }
        let mut ids = Vec::with_capacity(rows);
        let mut signatures = Vec::with_capacity(rows);
        for r in 0..rows {
            let o = HEADER_LEN + r * row_len;
            ids.push(u64_at(o) as usize);
            let slots = (0..k)
                .map(|i| match u32_at(o + 8 + 4 * i) {
                    EMPTY => Slot::Empty,
                    v if bits.is_some() => Slot::Code(v),
                    v => Slot::Raw(v),
                })
                .collect();
            signatures.push(Signature::new(meta, slots)?);
        }
        Self::new(SignatureHeader { meta, privacy }, ids, signatures)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        w.write_all(&self.to_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Debug form: `#`-prefixed header lines, then `id,s1,...,sK` with `E` for EMPTY.
    pub fn to_csv(&self) -> String {
        let m = &self.header.meta;
        let mut s = format!(
            "# scheme={} D={} K={} b={} seed={}\n",
            m.scheme,
            m.dim,
            m.bins,
            m.bits.map_or("raw".to_string(), |b| b.to_string()),
            m.seed
        );
        if let Some(p) = self.header.privacy {
            s.push_str(&format!(
                "# epsilon={} delta={} N={} noise_seed={}\n",
                p.epsilon, p.delta, p.n, p.noise_seed
            ));
        }
        s.push_str("id");
        for k in 1..=m.bins {
            s.push_str(&format!(",s{k}"));
        }
        s.push('\n');
        for (id, sig) in self.ids.iter().zip(&self.signatures) {
            s.push_str(&id.to_string());
            for slot in sig.slots() {
                match slot {
                    Slot::Raw(v) | Slot::Code(v) => s.push_str(&format!(",{v}")),
                    Slot::Empty => s.push_str(",E"),
                }
            }
            s.push('\n');
        }
        s
    }
}
