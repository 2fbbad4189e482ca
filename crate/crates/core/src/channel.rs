//! Iterated Kronecker channel matrices `C_a(n)`.
//!
//! A bisymmetric bit randomizer reports a bit truthfully with probability `a`
//! and flips it with probability `1 - a`, giving the 2x2 kernel
//! `[[a, 1-a], [1-a, a]]`. Randomizing `n` bits independently with the same
//! kernel yields the `2^n x 2^n` matrix `C_a(n)`, the `n`-fold Kronecker power
//! of the kernel. Entry `(r, x)` is `a^(n-d) (1-a)^d` with `d = popcount(r ^ x)`,
//! and for `a != 1/2` the inverse is again an iterated kernel, with parameter
//! `a / (2a - 1)`.
//!
//! Indices follow `eta(x) = sum_i x_i 2^i`: bit `i` of a record carries weight
//! `2^i`. Entries depend only on Hamming distance, so the convention only
//! relabels cells.

use crate::error::{check_probability, Error, Result};
use crate::matrix::{large_buffer, DenseMatrix};

/// Default upper bound on `n` for dense materialization (`4^12` = 16M entries).
pub const DEFAULT_DENSE_CAP: u32 = 12;

/// Environment variable overriding [`DEFAULT_DENSE_CAP`] in the CLI.
pub const DENSE_CAP_ENV: &str = "BIRR_DENSE_CAP";

/// Below this `|2a - 1|` the inverse entries are evaluated in log space.
const LOG_SPACE_THRESHOLD: f64 = 1e-3;

/// Reads the dense cap from [`DENSE_CAP_ENV`], falling back to the default.
pub fn dense_cap_from_env() -> u32 {
    std::env::var(DENSE_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_DENSE_CAP)
}

/// A cell index `eta(x)` of a bit string `x` of known width.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitIndex(u64);

impl BitIndex {
    pub fn new(value: u64, width: u32) -> Result<Self> {
        if width < 64 && value >> width != 0 {
            return Err(Error::Index { index: value, width });
        }
        Ok(Self(value))
    }

    /// `eta`: bit `i` of `bits` contributes `2^i`.
    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        if bits.len() > 64 {
            return Err(Error::Dimension {
                expected: 64,
                found: bits.len(),
            });
        }
        Ok(Self(
            bits.iter()
                .enumerate()
                .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i)),
        ))
    }

    /// The inverse of `eta`: the `width`-bit string with this index.
    pub fn to_bits(self, width: u32) -> Vec<bool> {
        (0..width).map(|i| (self.0 >> i) & 1 == 1).collect()
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Hamming distance `|self XOR other|`.
    pub fn distance(self, other: Self) -> u32 {
        (self.0 ^ other.0).count_ones()
    }
}

/// The pair `(a, n)` defining `C_a(n)`.
///
/// Channels built with [`BisymmetricChannel::new`] have `0 <= a <= 1` and are
/// column stochastic. [`BisymmetricChannel::inverse`] produces the inverse as
/// the same kind of object with parameter `a / (2a - 1)`, which lies outside
/// `[0, 1]`; its columns still sum to one but entries may be negative.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct BisymmetricChannel {
    a: f64,
    width: u32,
}

impl BisymmetricChannel {
    pub fn new(a: f64, width: u32) -> Result<Self> {
        check_probability("a", a)?;
        check_width(width)?;
        Ok(Self { a, width })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// `2^n`.
    pub fn dim(&self) -> usize {
        1usize << self.width
    }

    pub fn is_invertible(&self) -> bool {
        self.a != 0.5
    }

    /// The channel `C_{a/(2a-1)}(n) = C_a(n)^{-1}`.
    pub fn inverse(&self) -> Result<Self> {
        Ok(Self {
            a: inverse_parameter(self.a)?,
            width: self.width,
        })
    }

    /// `a^(n-d) (1-a)^d` for Hamming distance `d`.
    #[inline]
    pub fn entry_by_distance(&self, d: u32) -> f64 {
        debug_assert!(d <= self.width);
        let n = self.width as i32;
        let d = d as i32;
        self.a.powi(n - d) * (1.0 - self.a).powi(d)
    }

    /// Entry `(r, x)`: the probability of reporting `r` when the truth is `x`.
    pub fn entry_at(&self, r: BitIndex, x: BitIndex) -> Result<f64> {
        self.check_index(r)?;
        self.check_index(x)?;
        Ok(self.entry_by_distance(r.distance(x)))
    }

    /// The `n + 1` values `a^(n-d) (1-a)^d` for `d = 0..=n`.
    pub fn distinct_entries(&self) -> Vec<f64> {
        (0..=self.width).map(|d| self.entry_by_distance(d)).collect()
    }

    /// Entry `(x, r)` of `C_a(n)^{-1}`: `a^(n-d) (a-1)^d / (2a-1)^n`.
    pub fn inverse_entry_at(&self, x: BitIndex, r: BitIndex) -> Result<f64> {
        self.check_index(x)?;
        self.check_index(r)?;
        inverse_entry_by_distance(self.a, self.width, x.distance(r))
    }

    /// Dense `C_a(n)` under the default cap.
    pub fn materialize(&self) -> Result<DenseMatrix> {
        self.materialize_capped(DEFAULT_DENSE_CAP)
    }

    /// Dense `C_a(n)`, written row by row in one pass, so the total work is
    /// linear in the `4^n` output entries.
    pub fn materialize_capped(&self, cap: u32) -> Result<DenseMatrix> {
        if self.width > cap {
            return Err(Error::WidthCap {
                width: self.width,
                cap,
            });
        }
        let dim = self.dim();
        Ok(DenseMatrix::from_row_major(dim, kron_fill(dim, self.a, 1.0 - self.a)))
    }

    /// Writes `C_a(n)` into `out`, reusing its storage when it already has
    /// dimension `2^n`. Cheaper than [`Self::materialize_capped`] when many
    /// channels of the same width are built in turn.
    pub fn materialize_into(&self, out: &mut DenseMatrix, cap: u32) -> Result<()> {
        if self.width > cap {
            return Err(Error::WidthCap {
                width: self.width,
                cap,
            });
        }
        let dim = self.dim();
        if out.dim() != dim {
            *out = self.materialize_capped(cap)?;
            return Ok(());
        }
        kron_fill_into(out.entries_mut(), dim, self.a, 1.0 - self.a);
        Ok(())
    }

    /// `C_a(n) v` without materializing, one 2x2 butterfly per bit: `O(n 2^n)`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: v.len(),
            });
        }
        let (a, b) = (self.a, 1.0 - self.a);
        let mut out = v.to_vec();
        let mut half = 1usize;
        while half < out.len() {
            for block in out.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for (l, h) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (x0, x1) = (*l, *h);
                    *l = a * x0 + b * x1;
                    *h = b * x0 + a * x1;
                }
            }
            half *= 2;
        }
        Ok(out)
    }

    fn check_index(&self, i: BitIndex) -> Result<()> {
        if self.width < 64 && i.0 >> self.width != 0 {
            Err(Error::Index {
                index: i.0,
                width: self.width,
            })
        } else {
            Ok(())
        }
    }
}

fn check_width(width: u32) -> Result<()> {
    if width as usize >= usize::BITS as usize - 1 {
        return Err(Error::Domain {
            name: "n",
            value: width as f64,
            reason: "bit width too large to index",
        });
    }
    Ok(())
}

/// `a / (2a - 1)`, the kernel parameter of the inverse channel.
pub fn inverse_parameter(a: f64) -> Result<f64> {
    if a == 0.5 || !a.is_finite() {
        return Err(Error::SingularChannel { a });
    }
    Ok(a / (2.0 * a - 1.0))
}

/// `a^(n-d) (a-1)^d / (2a-1)^n`, switching to log space when `|2a - 1|` is tiny.
pub fn inverse_entry_by_distance(a: f64, n: u32, d: u32) -> Result<f64> {
    if a == 0.5 || !a.is_finite() {
        return Err(Error::SingularChannel { a });
    }
    let denom = 2.0 * a - 1.0;
    let (ni, di) = (n as i32, d as i32);
    if denom.abs() >= LOG_SPACE_THRESHOLD {
        return Ok(a.powi(ni - di) * (a - 1.0).powi(di) / denom.powi(ni));
    }
    log::warn!("a = {a} is within 5e-4 of 1/2; the inverse channel is numerically fragile and estimates are statistically useless");
    // a is near 1/2 here, so a and a - 1 are both nonzero.
    let negative = ((a - 1.0) < 0.0 && d % 2 == 1) ^ (denom < 0.0 && n % 2 == 1);
    let log_mag = (ni - di) as f64 * a.abs().ln() + di as f64 * (a - 1.0).abs().ln()
        - ni as f64 * denom.abs().ln();
    let mag = log_mag.exp();
    Ok(if negative { -mag } else { mag })
}

/// Row 0 of the iterated Kronecker power of `[[a, b], [b, a]]`: the Kronecker
/// power of `[a, b]`, built by doubling.
fn first_row(dim: usize, a: f64, b: f64) -> Vec<f64> {
    let mut first = vec![0.0; dim];
    first[0] = 1.0;
    let mut size = 1usize;
    while size < dim {
        let (lo, hi) = first[..2 * size].split_at_mut(size);
        for (l, h) in lo.iter_mut().zip(hi.iter_mut()) {
            *h = b * *l;
            *l *= a;
        }
        size *= 2;
    }
    first
}

/// Row-major entries of the iterated Kronecker power of `[[a, b], [b, a]]`.
///
/// Every row is an XOR relabeling of row 0: entry `(r, x)` equals entry
/// `(0, r ^ x)`. Rows are written front to back, so the buffer is touched
/// exactly once.
fn kron_fill(dim: usize, a: f64, b: f64) -> Vec<f64> {
    let first = first_row(dim, a, b);
    let len = dim * dim;
    let mut buf = large_buffer(len);
    for (r, row) in buf.spare_capacity_mut()[..len].chunks_exact_mut(dim).enumerate() {
        for (x, out) in row.iter_mut().enumerate() {
            out.write(first[r ^ x]);
        }
    }
    // SAFETY: the loop above initialized all `len` entries.
    unsafe { buf.set_len(len) };
    buf
}

fn kron_fill_into(buf: &mut [f64], dim: usize, a: f64, b: f64) {
    let first = first_row(dim, a, b);
    for (r, row) in buf.chunks_exact_mut(dim).enumerate() {
        for (x, out) in row.iter_mut().enumerate() {
            *out = first[r ^ x];
        }
    }
}
