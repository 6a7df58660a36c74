use std::fmt;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Where a bit stream came from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    pub policy: String,
    pub seeds: Vec<u64>,
}

impl Provenance {
    pub fn new(source: impl Into<String>, policy: impl Into<String>, seeds: Vec<u64>) -> Self {
        Self {
            source: source.into(),
            policy: policy.into(),
            seeds,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty() && self.policy.is_empty() && self.seeds.is_empty()
    }

    /// Inverse of the `Display` form `source=..;policy=..;seeds=1,2`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Provenance::default();
        if text.is_empty() {
            return Ok(out);
        }
        for field in text.split(';') {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::param(format!("malformed provenance field '{field}'")))?;
            match key {
                "source" => out.source = value.to_string(),
                "policy" => out.policy = value.to_string(),
                "seeds" => {
                    out.seeds = value
                        .split(',')
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<u64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::param(format!("bad seed in provenance: {e}")))?;
                }
                other => return Err(Error::param(format!("unknown provenance field '{other}'"))),
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        write!(f, "source={};policy={};seeds={}", self.source, self.policy, seeds.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    pub bits: Vec<bool>,
    pub provenance: Provenance,
}

impl BitStream {
    pub fn new(bits: Vec<bool>, provenance: Provenance) -> Self {
        Self { bits, provenance }
    }

    /// Bits from a string of '0'/'1'; other characters are ignored.
    pub fn from_str_bits(bits: &str, source: impl Into<String>) -> Self {
        Self::new(
            bits.chars().filter_map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect(),
            Provenance::new(source, "literal", vec![]),
        )
    }

    /// Output of the reference mixing generator.
    pub fn reference(seed: u64, n_bits: usize) -> Self {
        Self::new(
            SplitMix64::new(seed).bits(n_bits),
            Provenance::new(format!("splitmix64:{seed}"), "reference", vec![seed]),
        )
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.provenance.source = source.into();
        self
    }

    pub fn truncated(&self, n: usize) -> Self {
        Self::new(self.bits[..n.min(self.len())].to_vec(), self.provenance.clone())
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    /// Packs bits most-significant-bit first, zero-padding the final byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        pack_bits(&self.bits)
    }

    pub fn complement(&self) -> Self {
        Self::new(self.bits.iter().map(|b| !b).collect(), self.provenance.clone())
    }
}

pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i)))
        })
        .collect()
}

pub fn unpack_bits(bytes: &[u8], n_bits: usize) -> Vec<bool> {
    (0..n_bits).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1 == 1).collect()
}

/// K = V ⊕ W. V and W must have equal length and distinct provenance sources.
pub fn combine_keys(v: &BitStream, w: &BitStream) -> Result<BitStream> {
    if v.len() != w.len() {
        return Err(Error::LengthMismatch {
            left: v.len(),
            right: w.len(),
        });
    }
    if v.provenance.source == w.provenance.source {
        return Err(Error::NotIndependent(v.provenance.source.clone()));
    }
    let bits = v.bits.iter().zip(&w.bits).map(|(a, b)| a ^ b).collect();
    let mut seeds = v.provenance.seeds.clone();
    seeds.extend(&w.provenance.seeds);
    Ok(BitStream::new(
        bits,
        Provenance::new(
            format!("xor({},{})", v.provenance.source, w.provenance.source),
            "xor",
            seeds,
        ),
    ))
}

/// Fraction of positions where the two streams agree.
pub fn agreement_fraction(a: &BitStream, b: &BitStream) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::param("agreement of empty streams is undefined"));
    }
    let same = a.bits.iter().zip(&b.bits).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.len() as f64)
}

/// Von Neumann debiasing: pairs 10 → 1, 01 → 0, 00 and 11 dropped.
pub fn von_neumann(bits: &[bool]) -> Vec<bool> {
    bits.chunks_exact(2)
        .filter(|p| p[0] != p[1])
        .map(|p| p[0])
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn xor_truth_table() {
        let v = BitStream::from_str_bits("1010", "v");
        let w = BitStream::from_str_bits("0110", "w");
        assert_eq!(combine_keys(&v, &w).unwrap().to_bit_string(), "1100");
        let zeros = BitStream::from_str_bits("0000", "z");
        assert_eq!(combine_keys(&zeros, &w).unwrap().bits, w.bits);
        let w2 = w.clone().with_source("w2");
        assert_eq!(combine_keys(&w2, &w).unwrap().to_bit_string(), "0000");
    }

    #[test]
    fn combine_errors() {
        let v = BitStream::from_str_bits("101", "v");
        let w = BitStream::from_str_bits("0110", "w");
        assert!(matches!(combine_keys(&v, &w), Err(Error::LengthMismatch { left: 3, right: 4 })));
        let same = BitStream::from_str_bits("0110", "w");
        assert!(matches!(combine_keys(&same, &w), Err(Error::NotIndependent(_))));
    }

    #[test]
    fn agreement_extremes() {
        let a = BitStream::reference(3, 1000);
        assert_eq!(agreement_fraction(&a, &a).unwrap(), 1.0);
        assert_eq!(agreement_fraction(&a, &a.complement()).unwrap(), 0.0);
        assert!(agreement_fraction(&a, &a.truncated(10)).is_err());
        let e = BitStream::from_str_bits("", "e");
        assert!(agreement_fraction(&e, &e).is_err());
    }

    #[test]
    fn von_neumann_pairs() {
        let bits = BitStream::from_str_bits("10 01 00 11 10 1", "x").bits;
        assert_eq!(von_neumann(&bits), vec![true, false, true]);
    }

    #[test]
    fn provenance_text_round_trip() {
        let p = Provenance::new("alice", "k4-g4-none", vec![1, 2, u64::MAX]);
        assert_eq!(Provenance::parse(&p.to_string()).unwrap(), p);
        assert_eq!(Provenance::parse("").unwrap(), Provenance::default());
        assert!(Provenance::parse("nonsense").is_err());
    }

    proptest! {
        #[test]
        fn combine_is_an_involution(seed_v in any::<u64>(), seed_w in any::<u64>(), n in 0usize..300) {
            prop_assume!(seed_v != seed_w);
            let v = BitStream::reference(seed_v, n);
            let w = BitStream::reference(seed_w, n);
            let k = combine_keys(&v, &w).unwrap();
            prop_assert_eq!(combine_keys(&v, &k).unwrap().bits, w.bits);
        }

        #[test]
        fn packing_round_trips(bits in prop::collection::vec(any::<bool>(), 0..100)) {
            let packed = pack_bits(&bits);
            prop_assert_eq!(packed.len(), bits.len().div_ceil(8));
            prop_assert_eq!(unpack_bits(&packed, bits.len()), bits);
        }
    }
}
