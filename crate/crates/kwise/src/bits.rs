//! Packed sample storage for points of the Boolean cube.
//!
//! A point of `{-1,1}^n` is stored as `n` bits, bit `i` set meaning
//! coordinate `i` equals `-1`.  Batches are row-major with a fixed word
//! stride so Hamming distances reduce to XOR plus popcount over words.

use thiserror::Error;

/// Words needed to hold `n` bits.
pub fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

/// Parity of `x` restricted to the coordinate set `mask`, as a sign:
/// `+1.0` for even overlap, `-1.0` for odd.  This is the character
/// `x^S` evaluated at the packed point `x`.
#[inline]
pub fn parity_sign(x: u64, mask: u64) -> f64 {
    if (x & mask).count_ones() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BatchError {
    #[error("hex line {line}: {reason}")]
    BadHexLine { line: usize, reason: String },
    #[error("row has {got} words, batch stride is {want}")]
    RowWidth { got: usize, want: usize },
}

/// A batch of `m` packed points of `{-1,1}^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBatch {
    n: usize,
    stride: usize,
    words: Vec<u64>,
}

impl SampleBatch {
    pub fn new(n: usize) -> Self {
        SampleBatch {
            n,
            stride: words_for(n).max(1),
            words: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, rows: usize) -> Self {
        let stride = words_for(n).max(1);
        SampleBatch {
            n,
            stride,
            words: Vec::with_capacity(stride * rows),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.words.len() / self.stride
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn clear(&mut self) {
        self.words.clear();
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.words[i * self.stride..(i + 1) * self.stride]
    }

    /// Appends a row given as packed words (top bits beyond `n` must be zero).
    pub fn push_row(&mut self, row: &[u64]) -> Result<(), BatchError> {
        if row.len() != self.stride {
            return Err(BatchError::RowWidth {
                got: row.len(),
                want: self.stride,
            });
        }
        self.words.extend_from_slice(row);
        Ok(())
    }

    /// Appends a single-word row; only valid for `n <= 64`.
    pub fn push_word(&mut self, word: u64) {
        debug_assert!(self.n <= 64);
        self.words.push(word & mask_last_word(self.n, 1));
    }

    /// Hamming distance between rows `i` and `j`.
    pub fn hamming(&self, i: usize, j: usize) -> u32 {
        let a = self.row(i);
        let b = self.row(j);
        a.iter()
            .zip(b)
            .map(|(x, y)| (x ^ y).count_ones())
            .sum()
    }

    /// Inner product of rows `i` and `j` as points of `{-1,1}^n`,
    /// i.e. `n - 2*hamming(i, j)`.
    pub fn dot_pm(&self, i: usize, j: usize) -> i64 {
        self.n as i64 - 2 * self.hamming(i, j) as i64
    }

    /// XOR of rows `i` and `j` as a single word; only valid for `n <= 64`.
    pub fn xor_word(&self, i: usize, j: usize) -> u64 {
        debug_assert!(self.n <= 64);
        self.row(i)[0] ^ self.row(j)[0]
    }

    /// XORs `mask` into row `i`; coordinatewise product with the point
    /// `mask` in the `{-1,1}` picture.
    pub fn xor_row_in_place(&mut self, i: usize, mask: &[u64]) {
        let start = i * self.stride;
        for (w, m) in self.words[start..start + self.stride].iter_mut().zip(mask) {
            *w ^= m;
        }
    }

    /// One lowercase-hex line per sample, bytes in coordinate order
    /// (bit `i` of the point is bit `i % 8` of byte `i / 8`).
    pub fn to_hex_lines(&self) -> String {
        let bytes_per = self.n.div_ceil(8).max(1);
        let mut out = String::with_capacity(self.len() * (2 * bytes_per + 1));
        for i in 0..self.len() {
            let row = self.row(i);
            for b in 0..bytes_per {
                let word = row[b / 8];
                let byte = (word >> (8 * (b % 8))) as u8;
                out.push_str(&format!("{byte:02x}"));
            }
            out.push('\n');
        }
        out
    }

    /// Inverse of [`to_hex_lines`](Self::to_hex_lines).  Blank lines are
    /// rejected; padding bits beyond `n` must be zero.
    pub fn from_hex_lines(n: usize, text: &str) -> Result<Self, BatchError> {
        let bytes_per = n.div_ceil(8).max(1);
        let stride = words_for(n).max(1);
        let mut batch = SampleBatch::new(n);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.len() != 2 * bytes_per {
                return Err(BatchError::BadHexLine {
                    line: lineno + 1,
                    reason: format!("expected {} hex digits, got {}", 2 * bytes_per, line.len()),
                });
            }
            let mut row = vec![0u64; stride];
            for b in 0..bytes_per {
                let byte = u8::from_str_radix(&line[2 * b..2 * b + 2], 16).map_err(|e| {
                    BatchError::BadHexLine {
                        line: lineno + 1,
                        reason: e.to_string(),
                    }
                })?;
                row[b / 8] |= (byte as u64) << (8 * (b % 8));
            }
            let top = mask_last_word(n, stride);
            if row[stride - 1] & !top != 0 {
                return Err(BatchError::BadHexLine {
                    line: lineno + 1,
                    reason: "padding bits beyond n are set".into(),
                });
            }
            batch.push_row(&row)?;
        }
        Ok(batch)
    }
}

/// Mask of valid bits in the last word of an `n`-bit row with the given stride.
pub fn mask_last_word(n: usize, stride: usize) -> u64 {
    let used = n - 64 * (stride - 1);
    if used >= 64 {
        u64::MAX
    } else {
        (1u64 << used) - 1
    }
}
