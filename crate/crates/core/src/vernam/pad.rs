use crate::entropy::BitStream;
use crate::error::{Error, Result};

/// Consumption record of a one-time pad. `consumed_bits` only moves forward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PadLedger {
    pub pad_id: String,
    total_bits: u64,
    consumed_bits: u64,
}

impl PadLedger {
    pub fn new(pad_id: impl Into<String>, total_bits: u64) -> Self {
        Self {
            pad_id: pad_id.into(),
            total_bits,
            consumed_bits: 0,
        }
    }

    pub fn with_consumed(pad_id: impl Into<String>, total_bits: u64, consumed_bits: u64) -> Result<Self> {
        if consumed_bits > total_bits {
            return Err(Error::param(format!(
                "ledger consumed {consumed_bits} of only {total_bits} bits"
            )));
        }
        Ok(Self {
            pad_id: pad_id.into(),
            total_bits,
            consumed_bits,
        })
    }

    pub fn total_bits(&self) -> u64 {
        self.total_bits
    }

    pub fn consumed_bits(&self) -> u64 {
        self.consumed_bits
    }

    pub fn remaining_bits(&self) -> u64 {
        self.total_bits - self.consumed_bits
    }

    fn check(&self, offset: u64, bits: u64) -> Result<()> {
        if offset < self.consumed_bits {
            return Err(Error::LedgerConflict {
                offset,
                consumed: self.consumed_bits,
            });
        }
        let available = self.total_bits - offset.min(self.total_bits);
        if bits > available {
            return Err(Error::PadExhausted {
                requested: bits,
                remaining: available,
                shortfall: bits - available,
            });
        }
        Ok(())
    }

    /// Claims the next `bits` pad bits and returns their starting offset.
    pub fn reserve(&mut self, bits: u64) -> Result<u64> {
        let offset = self.consumed_bits;
        self.reserve_at(offset, bits)?;
        Ok(offset)
    }

    /// Claims `bits` pad bits starting at `offset`; bits before `offset` are
    /// skipped and can never be used afterwards.
    pub fn reserve_at(&mut self, offset: u64, bits: u64) -> Result<()> {
        self.check(offset, bits)?;
        self.consumed_bits = offset + bits;
        Ok(())
    }
}

fn xor_with_pad(data: &[u8], pad: &BitStream, offset: u64) -> Vec<u8> {
    let start = offset as usize;
    data.iter()
        .enumerate()
        .map(|(i, &b)| {
            let key = pad.bits[start + 8 * i..start + 8 * i + 8]
                .iter()
                .fold(0u8, |acc, &bit| (acc << 1) | bit as u8);
            b ^ key
        })
        .collect()
}

fn check_pad(pad: &BitStream, ledger: &PadLedger) -> Result<()> {
    if pad.len() as u64 != ledger.total_bits {
        return Err(Error::param(format!(
            "pad has {} bits but ledger '{}' tracks {}",
            pad.len(),
            ledger.pad_id,
            ledger.total_bits
        )));
    }
    Ok(())
}

/// XORs `data` with pad bits starting at `offset`, committing the ledger only
/// on success.
pub fn vernam_apply_at(data: &[u8], pad: &BitStream, ledger: &mut PadLedger, offset: u64) -> Result<Vec<u8>> {
    check_pad(pad, ledger)?;
    let bits = 8 * data.len() as u64;
    ledger.check(offset, bits)?;
    let out = xor_with_pad(data, pad, offset);
    ledger.reserve_at(offset, bits)?;
    Ok(out)
}

pub fn vernam_encrypt(plaintext: &[u8], pad: &BitStream, ledger: &mut PadLedger) -> Result<Vec<u8>> {
    let offset = ledger.consumed_bits;
    vernam_apply_at(plaintext, pad, ledger, offset)
}

/// Same operation as encryption; run against the receiver's ledger, which sits
/// at the offset the sender used.
pub fn vernam_decrypt(ciphertext: &[u8], pad: &BitStream, ledger: &mut PadLedger) -> Result<Vec<u8>> {
    let offset = ledger.consumed_bits;
    vernam_apply_at(ciphertext, pad, ledger, offset)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn pad_of(bytes: &[u8]) -> BitStream {
        BitStream::new(crate::entropy::unpack_bits(bytes, bytes.len() * 8), Default::default())
    }

    #[test]
    fn byte_truth_table() {
        let pad = pad_of(&[0xAA, 0xAA]);
        let mut ledger = PadLedger::new("p", 16);
        assert_eq!(vernam_encrypt(&[0x00, 0xFF], &pad, &mut ledger).unwrap(), vec![0xAA, 0x55]);
        assert_eq!(ledger.consumed_bits(), 16);
    }

    #[test]
    fn zero_pad_is_identity() {
        let pad = pad_of(&[0; 8]);
        let mut ledger = PadLedger::new("p", 64);
        assert_eq!(vernam_encrypt(b"plain", &pad, &mut ledger).unwrap(), b"plain");
    }

    #[test]
    fn consecutive_messages_do_not_overlap() {
        let pad = BitStream::reference(5, 256);
        let mut ledger = PadLedger::new("p", 256);
        vernam_encrypt(b"abc", &pad, &mut ledger).unwrap();
        assert_eq!(ledger.consumed_bits(), 24);
        vernam_encrypt(b"de", &pad, &mut ledger).unwrap();
        assert_eq!(ledger.consumed_bits(), 40);
        match vernam_apply_at(b"x", &pad, &mut ledger, 8) {
            Err(Error::LedgerConflict { offset: 8, consumed: 40 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(ledger.consumed_bits(), 40);
    }

    #[test]
    fn exhaustion_reports_shortfall() {
        let pad = BitStream::reference(5, 20);
        let mut ledger = PadLedger::new("p", 20);
        match vernam_encrypt(b"abc", &pad, &mut ledger) {
            Err(Error::PadExhausted { requested: 24, remaining: 20, shortfall: 4 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(ledger.consumed_bits(), 0);
        assert!(vernam_encrypt(b"ab", &pad, &mut ledger).is_ok());
    }

    #[test]
    fn unaligned_offsets() {
        let pad = pad_of(&[0b1111_0000, 0b1111_0000]);
        let mut ledger = PadLedger::new("p", 16);
        ledger.reserve(4).unwrap();
        assert_eq!(vernam_encrypt(&[0], &pad, &mut ledger).unwrap(), vec![0b0000_1111]);
    }

    #[test]
    fn ledger_validation() {
        assert!(PadLedger::with_consumed("p", 10, 11).is_err());
        let pad = BitStream::reference(1, 64);
        let mut ledger = PadLedger::new("p", 32);
        assert!(vernam_encrypt(b"a", &pad, &mut ledger).is_err());
    }

    proptest! {
        #[test]
        fn decrypt_inverts_encrypt(seed in any::<u64>(), data in prop::collection::vec(any::<u8>(), 0..64), skip in 0u64..100) {
            let pad = BitStream::reference(seed, 1024);
            let mut alice = PadLedger::new("p", 1024);
            let mut bob = PadLedger::new("p", 1024);
            alice.reserve(skip).unwrap();
            bob.reserve(skip).unwrap();
            let ct = vernam_encrypt(&data, &pad, &mut alice).unwrap();
            let pt = vernam_decrypt(&ct, &pad, &mut bob).unwrap();
            prop_assert_eq!(pt, data);
            prop_assert_eq!(alice, bob);
        }
    }
}
