//! FIPS 140-2 power-up statistical tests on a 20 000-bit sample.

use std::fmt;

use crate::error::{Error, Result};

use super::bitstream::BitStream;

pub const SAMPLE_BITS: usize = 20_000;

/// Monobit: the count of ones must lie strictly inside this interval.
pub const MONOBIT_OPEN: (usize, usize) = (9_725, 10_275);
/// Poker statistic over 5000 nibbles, open interval.
pub const POKER_OPEN: (f64, f64) = (2.16, 46.17);
/// Runs of length 1, 2, 3, 4, 5 and 6+, per bit value, closed intervals.
pub const RUNS_CLOSED: [(usize, usize); 6] = [
    (2_315, 2_685),
    (1_114, 1_386),
    (527, 723),
    (240, 384),
    (103, 209),
    (103, 209),
];
/// A run of this length or longer fails the long-run test.
pub const LONG_RUN_FAIL: usize = 26;

#[derive(Debug, Clone, PartialEq)]
pub enum Statistic {
    Count(usize),
    Real(f64),
    /// Run counts per length bucket, `[zeros, ones]`.
    Runs([[usize; 6]; 2]),
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::Count(n) => write!(f, "{n}"),
            Statistic::Real(x) => write!(f, "{x:.4}"),
            Statistic::Runs(counts) => {
                let side = |c: &[usize; 6]| c.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
                write!(f, "0:{}/1:{}", side(&counts[0]), side(&counts[1]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub name: &'static str,
    pub statistic: Statistic,
    pub pass: bool,
}

impl fmt::Display for TestOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            self.name,
            self.statistic,
            if self.pass { "pass" } else { "fail" }
        )
    }
}

fn check_len(bits: &BitStream) -> Result<()> {
    if bits.len() != SAMPLE_BITS {
        return Err(Error::WrongLength {
            expected: SAMPLE_BITS,
            actual: bits.len(),
        });
    }
    Ok(())
}

pub fn fips_monobit(bits: &BitStream) -> Result<TestOutcome> {
    check_len(bits)?;
    let ones = bits.ones();
    Ok(TestOutcome {
        name: "monobit",
        statistic: Statistic::Count(ones),
        pass: ones > MONOBIT_OPEN.0 && ones < MONOBIT_OPEN.1,
    })
}

pub fn fips_poker(bits: &BitStream) -> Result<TestOutcome> {
    check_len(bits)?;
    let mut freq = [0u64; 16];
    for nibble in bits.bits.chunks_exact(4) {
        let v = nibble.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        freq[v] += 1;
    }
    let sum_sq: u64 = freq.iter().map(|f| f * f).sum();
    let x = 16.0 / 5000.0 * sum_sq as f64 - 5000.0;
    Ok(TestOutcome {
        name: "poker",
        statistic: Statistic::Real(x),
        pass: x > POKER_OPEN.0 && x < POKER_OPEN.1,
    })
}

/// Maximal runs as (bit value, length), in stream order.
fn runs(bits: &[bool]) -> Vec<(bool, usize)> {
    let mut out: Vec<(bool, usize)> = Vec::new();
    for &b in bits {
        match out.last_mut() {
            Some((v, n)) if *v == b => *n += 1,
            _ => out.push((b, 1)),
        }
    }
    out
}

pub fn fips_runs(bits: &BitStream) -> Result<TestOutcome> {
    check_len(bits)?;
    let mut counts = [[0usize; 6]; 2];
    for (value, len) in runs(&bits.bits) {
        counts[value as usize][len.min(6) - 1] += 1;
    }
    let pass = counts.iter().all(|side| {
        side.iter()
            .zip(RUNS_CLOSED)
            .all(|(&c, (lo, hi))| (lo..=hi).contains(&c))
    });
    Ok(TestOutcome {
        name: "runs",
        statistic: Statistic::Runs(counts),
        pass,
    })
}

pub fn fips_longrun(bits: &BitStream) -> Result<TestOutcome> {
    check_len(bits)?;
    let longest = runs(&bits.bits).into_iter().map(|(_, n)| n).max().unwrap_or(0);
    Ok(TestOutcome {
        name: "longrun",
        statistic: Statistic::Count(longest),
        pass: longest < LONG_RUN_FAIL,
    })
}

/// All four tests in report order.
pub fn fips_suite(bits: &BitStream) -> Result<Vec<TestOutcome>> {
    Ok(vec![
        fips_monobit(bits)?,
        fips_poker(bits)?,
        fips_runs(bits)?,
        fips_longrun(bits)?,
    ])
}

/// Human-readable listing of the compiled-in thresholds.
pub fn thresholds_text() -> String {
    let mut s = String::new();
    s.push_str(&format!("sample_bits {SAMPLE_BITS}\n"));
    s.push_str(&format!("monobit ones in ({}, {})\n", MONOBIT_OPEN.0, MONOBIT_OPEN.1));
    s.push_str(&format!("poker X in ({}, {})\n", POKER_OPEN.0, POKER_OPEN.1));
    for (i, (lo, hi)) in RUNS_CLOSED.iter().enumerate() {
        let label = if i == 5 { "6+".to_string() } else { (i + 1).to_string() };
        s.push_str(&format!("runs length {label} in [{lo}, {hi}] per bit value\n"));
    }
    s.push_str(&format!("longrun fails at run length >= {LONG_RUN_FAIL}\n"));
    s
}
