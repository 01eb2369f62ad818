//! Counter-addressed random streams.
//!
//! Every matrix entry owns a fixed slot of [`WORDS_PER_ENTRY`] 32-bit words in
//! a ChaCha8 keystream. The key is derived from `(seed, replica, domain)`, the
//! 64-bit ChaCha stream id is the row's logical index, and the word position
//! is the column's logical index times the slot size. Any entry can therefore
//! be regenerated in isolation, and a whole row is produced by one seek plus
//! sequential reads.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 32-bit words reserved per entry: one `u64` for the percolation mask, two
/// for the entry value, one spare.
pub const WORDS_PER_ENTRY: u128 = 8;

/// Offset that keeps logical column indices `-n..=n` contiguous and positive.
const COLUMN_BIAS: i64 = 1 << 62;

/// Independent families of streams sharing one user seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Percolation = 0x7065_7263_6f6c_6174,
    Wigner = 0x7769_676e_6572_0000,
    Expansion = 0x6375_6d75_6c61_6e74,
    Auxiliary = 0x6175_7869_6c69_6172,
}

/// Key material for one sampled object (one matrix replica, one batch, ...).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub replica: u64,
    pub domain: Domain,
}

impl StreamKey {
    pub fn new(seed: u64, replica: u64, domain: Domain) -> Self {
        StreamKey {
            seed,
            replica,
            domain,
        }
    }

    fn key_bytes(&self) -> [u8; 32] {
        let mut k = [0u8; 32];
        k[..8].copy_from_slice(&self.seed.to_le_bytes());
        k[8..16].copy_from_slice(&self.replica.to_le_bytes());
        k[16..24].copy_from_slice(&(self.domain as u64).to_le_bytes());
        k
    }

    /// Generic stream number `stream` of this key, positioned at its start.
    pub fn stream(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key_bytes());
        rng.set_stream(stream);
        rng
    }

    /// Stream positioned at entry `(row, col)` (logical indices). Reading
    /// [`EntryWords`] repeatedly advances through `col, col + 1, ...`.
    pub fn entry_cursor(&self, row: i64, col: i64) -> EntryCursor {
        let mut rng = self.stream(row as u64);
        rng.set_word_pos(((col + COLUMN_BIAS) as u128) * WORDS_PER_ENTRY);
        EntryCursor { rng }
    }

    pub fn entry(&self, row: i64, col: i64) -> EntryWords {
        self.entry_cursor(row, col).next_entry()
    }
}

/// The raw words reserved for one entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EntryWords {
    pub mask: u64,
    pub value: [u64; 2],
}

pub struct EntryCursor {
    rng: ChaCha8Rng,
}

impl EntryCursor {
    #[inline]
    pub fn next_entry(&mut self) -> EntryWords {
        let mask = self.rng.next_u64();
        let value = [self.rng.next_u64(), self.rng.next_u64()];
        let _spare = self.rng.next_u64();
        EntryWords { mask, value }
    }
}

/// Uniform in `[0, 1)` from the top 53 bits.
#[inline]
pub fn unit_open_closed_low(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in `(0, 1]`.
#[inline]
pub fn unit_positive(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}
