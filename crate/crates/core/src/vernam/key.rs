use crate::error::{Error, Result};

pub const MAX_KEY_LEN: usize = 16;

/// Base paired with key length n in the 16×16 key-matrix table: n = 1 → 17,
/// n = 16 → 2.
pub fn table_base(n: usize) -> Result<u64> {
    if !(1..=MAX_KEY_LEN).contains(&n) {
        return Err(Error::KeyLength(n));
    }
    Ok(18 - n as u64)
}

/// Key sum S = Σ_{i=1}^{n} C_i · b^i, exponent starting at 1.
pub fn key_sum(codes: &[u8]) -> Result<u64> {
    let b = table_base(codes.len())?;
    let mut power = 1u64;
    let mut sum = 0u64;
    for &c in codes {
        power *= b;
        sum += c as u64 * power;
    }
    Ok(sum)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VernamKey {
    pub codes: Vec<u8>,
    pub base: u64,
    pub sum: u64,
}

impl VernamKey {
    pub fn new(codes: &[u8]) -> Result<Self> {
        Ok(Self {
            codes: codes.to_vec(),
            base: table_base(codes.len())?,
            sum: key_sum(codes)?,
        })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn is_consistent(&self) -> bool {
        table_base(self.codes.len()).ok() == Some(self.base) && key_sum(&self.codes).ok() == Some(self.sum)
    }
}
