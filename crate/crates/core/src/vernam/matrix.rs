use crate::entropy::BitStream;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// n×n arrangement of the symbols 0..n², row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyMatrix {
    n: usize,
    entries: Vec<u32>,
}

impl KeyMatrix {
    pub fn new(n: usize, entries: Vec<u32>) -> Result<Self> {
        if n < 2 {
            return Err(Error::param(format!("key matrix dimension must be at least 2, got {n}")));
        }
        if entries.len() != n * n {
            return Err(Error::Dimension(format!("{} entries for a {n}x{n} matrix", entries.len())));
        }
        let top = (n * n) as u64;
        if let Some(e) = entries.iter().find(|&&e| e as u64 >= top) {
            return Err(Error::param(format!("symbol {e} outside 0..{top}")));
        }
        Ok(Self { n, entries })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(n, (0..(n * n) as u32).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.entries[r * self.n..(r + 1) * self.n]
    }

    pub fn is_bijective(&self) -> bool {
        let mut seen = vec![false; self.entries.len()];
        for &e in &self.entries {
            if std::mem::replace(&mut seen[e as usize], true) {
                return false;
            }
        }
        true
    }
}

/// Where shuffle indices come from.
#[derive(Debug, Clone, Copy)]
pub enum MatrixSource<'a> {
    /// Reference mixing generator seeded with a key sum.
    KeySum(u64),
    /// Harvested bits, consumed most significant first.
    Stream(&'a BitStream),
}

/// Bits needed to express every value below `bound` (bound ≥ 2).
fn draw_width(bound: usize) -> u32 {
    usize::BITS - (bound - 1).leading_zeros()
}

enum Draws<'a> {
    Generator(SplitMix64),
    Stream { bits: &'a [bool], pos: usize },
}

impl Draws<'_> {
    /// Uniform index below `bound` by rejection: take `draw_width(bound)` bits
    /// and retry while the value is out of range. `None` when a stream runs out.
    fn below(&mut self, bound: usize) -> Option<usize> {
        let w = draw_width(bound);
        loop {
            let v = match self {
                Draws::Generator(rng) => (rng.next_u64() >> (64 - w)) as usize,
                Draws::Stream { bits, pos } => {
                    let end = *pos + w as usize;
                    if end > bits.len() {
                        return None;
                    }
                    let v = bits[*pos..end].iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
                    *pos = end;
                    v
                }
            };
            if v < bound {
                return Some(v);
            }
        }
    }
}

/// Fisher–Yates shuffle of the identity arrangement 0..n²: for i from n²−1
/// down to 1, swap slot i with a uniform slot j ≤ i.
pub fn generate_key_matrix(source: MatrixSource<'_>, n: usize) -> Result<KeyMatrix> {
    let mut matrix = KeyMatrix::identity(n)?;
    let mut draws = match source {
        MatrixSource::KeySum(s) => Draws::Generator(SplitMix64::new(s)),
        MatrixSource::Stream(stream) => Draws::Stream {
            bits: &stream.bits,
            pos: 0,
        },
    };
    let size = n * n;
    for i in (1..size).rev() {
        let Some(j) = draws.below(i + 1) else {
            let consumed = match draws {
                Draws::Stream { pos, .. } => pos,
                Draws::Generator(_) => unreachable!("generator never runs out"),
            };
            let remaining: usize = (1..=i).map(|k| draw_width(k + 1) as usize).sum();
            return Err(Error::InsufficientBits {
                needed: consumed + remaining,
                available: match source {
                    MatrixSource::Stream(s) => s.len(),
                    MatrixSource::KeySum(_) => 0,
                },
            });
        };
        matrix.entries.swap(i, j);
    }
    Ok(matrix)
}

fn byte_table(matrix: &KeyMatrix) -> Result<[u8; 256]> {
    if matrix.n != 16 {
        return Err(Error::NotBijective(format!(
            "byte substitution needs a 16x16 matrix, got {0}x{0}",
            matrix.n
        )));
    }
    if !matrix.is_bijective() {
        return Err(Error::NotBijective("repeated symbols".into()));
    }
    let mut table = [0u8; 256];
    for (i, &e) in matrix.entries.iter().enumerate() {
        table[i] = e as u8;
    }
    Ok(table)
}

/// Maps byte b to the matrix entry at row-major position b.
pub fn substitute(data: &[u8], matrix: &KeyMatrix) -> Result<Vec<u8>> {
    let table = byte_table(matrix)?;
    Ok(data.iter().map(|&b| table[b as usize]).collect())
}

pub fn inverse_substitute(data: &[u8], matrix: &KeyMatrix) -> Result<Vec<u8>> {
    let table = byte_table(matrix)?;
    let mut inverse = [0u8; 256];
    for (i, &e) in table.iter().enumerate() {
        inverse[e as usize] = i as u8;
    }
    Ok(data.iter().map(|&b| inverse[b as usize]).collect())
}
