//! Fixed-width bit vectors.
//!
//! `Bits` is the basic value shape everywhere in this crate: secret inputs,
//! output tuples, and machine stores are all flat vectors of booleans. The
//! representation is packed (64 bits per word) so values can be hashed and
//! compared cheaply when enumerating large input spaces.

use std::fmt;

/// A fixed-length vector of bits. Bit 0 is the least significant bit of the
/// first word.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits {
    len: usize,
    words: Vec<u64>,
}

impl Bits {
    /// An all-zero vector of the given length.
    pub fn zeros(len: usize) -> Self {
        Bits {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    /// Builds a vector of `len` bits from the low bits of `index`:
    /// bit `k` of the result is `(index >> k) & 1`.
    ///
    /// Panics if `len > 64` (wider values cannot be addressed by one index).
    pub fn from_index(index: u64, len: usize) -> Self {
        assert!(len <= 64, "from_index supports at most 64 bits");
        let mut b = Bits::zeros(len);
        for k in 0..len {
            if (index >> k) & 1 == 1 {
                b.set(k, true);
            }
        }
        b
    }

    /// Interprets the vector as an integer, inverse of [`Bits::from_index`].
    ///
    /// Panics if the vector is wider than 64 bits.
    pub fn to_index(&self) -> u64 {
        assert!(self.len <= 64, "to_index supports at most 64 bits");
        let mut v = 0u64;
        for k in 0..self.len {
            if self.get(k) {
                v |= 1 << k;
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range 0..{}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit index {i} out of range 0..{}", self.len);
        let mask = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    /// Renders the vector most-significant bit first, e.g. a 2-bit vector
    /// with bit 0 set prints as `"01"`.
    pub fn bitstring(&self) -> String {
        (0..self.len)
            .rev()
            .map(|i| if self.get(i) { '1' } else { '0' })
            .collect()
    }

    /// Parses a most-significant-bit-first string of `0`/`1` characters,
    /// inverse of [`Bits::bitstring`].
    pub fn from_bitstring(s: &str) -> Result<Self, String> {
        let mut b = Bits::zeros(s.chars().count());
        let len = b.len;
        for (pos, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => b.set(len - 1 - pos, true),
                _ => return Err(format!("invalid bit character {c:?} in {s:?}")),
            }
        }
        Ok(b)
    }

    /// Raw packed words; used as a hash key for execution states.
    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({})", self.bitstring())
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.bitstring())
    }
}
