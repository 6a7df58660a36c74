//! Vernam one-time pad, key sums and n×n random key matrices.

mod key;
mod matrix;
mod pad;

pub use key::{key_sum, table_base, VernamKey, MAX_KEY_LEN};
pub use matrix::{generate_key_matrix, inverse_substitute, substitute, KeyMatrix, MatrixSource};
pub use pad::{vernam_apply_at, vernam_decrypt, vernam_encrypt, PadLedger};
