//! Bit harvesting from binned band powers, key combination and health tests.

mod bitstream;
pub mod fips;
mod harvest;

pub use bitstream::{
    agreement_fraction, combine_keys, pack_bits, unpack_bits, von_neumann, BitStream, Provenance,
};
pub use fips::{fips_longrun, fips_monobit, fips_poker, fips_runs, fips_suite, TestOutcome};
pub use harvest::{harvest_bits, harvest_many, quantize_bins, ExtractionPolicy, Harvest, Whitening};
