//! Reversible parallel prefix sums over power-of-two blocks.
//!
//! The building block adds the midpoint element of a range onto every
//! element of the upper half; `log n` rounds of disjoint blocks turn an
//! array into its running sums, and the subtractive replay undoes it.

use crate::error::{Error, Result};
use crate::state::DepthReport;

/// Fixed-width accumulator array: entries live modulo `2^bits` and every
/// addition is checked against the modulus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanArray {
    d: Vec<u64>,
    bits: u32,
}

impl ScanArray {
    /// Picks a modulus wide enough that no prefix sum of `values` can wrap:
    /// `ceil(log2(n * max + 1)) + 1` bits.
    pub fn new(values: &[u64]) -> Self {
        let max = values.iter().copied().max().unwrap_or(0);
        let worst = (values.len() as u64).saturating_mul(max).saturating_add(1);
        let bits = (64 - worst.leading_zeros()) + 1;
        ScanArray {
            d: values.to_vec(),
            bits,
        }
    }

    pub fn with_bits(values: &[u64], bits: u32) -> Self {
        ScanArray {
            d: values.to_vec(),
            bits,
        }
    }

    /// Refills the array in place, keeping the allocation; the modulus is
    /// re-derived as in [`new`](Self::new).
    pub fn reload(&mut self, values: &[u64]) {
        let max = values.iter().copied().max().unwrap_or(0);
        let worst = (values.len() as u64).saturating_mul(max).saturating_add(1);
        self.bits = (64 - worst.leading_zeros()) + 1;
        self.d.clear();
        self.d.extend_from_slice(values);
    }

    pub fn values(&self) -> &[u64] {
        &self.d
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    fn checked_add(&mut self, i: usize, delta: u64) -> Result<()> {
        let v = self.d[i] + delta;
        if self.bits < 64 && v >= 1u64 << self.bits {
            return Err(Error::ScanOverflow {
                value: v,
                bits: self.bits,
            });
        }
        self.d[i] = v;
        Ok(())
    }
}

/// Adds `d[mid]` onto `d[mid+1..=t]` where `mid = (h+t)/2`, all 1-indexed;
/// `h == t` is a no-op. Targets are disjoint, so the updates of one call
/// commute.
pub fn d_step(arr: &mut ScanArray, h: usize, t: usize) -> Result<()> {
    if h >= t {
        return Ok(());
    }
    let mid = (h + t) / 2;
    let pivot = arr.d[mid - 1];
    for i in mid + 1..=t {
        arr.checked_add(i - 1, pivot)?;
    }
    Ok(())
}

/// Subtractive replay of [`d_step`]; exact inverse.
pub fn d_step_inverse(arr: &mut ScanArray, h: usize, t: usize) -> Result<()> {
    if h >= t {
        return Ok(());
    }
    let mid = (h + t) / 2;
    let pivot = arr.d[mid - 1];
    for i in mid + 1..=t {
        let v = arr.d[i - 1];
        arr.d[i - 1] = v.checked_sub(pivot).ok_or(Error::ScanOverflow {
            value: v,
            bits: arr.bits,
        })?;
    }
    Ok(())
}

/// In-place running sums: `d_i <- sum_{j<=i} d_j`. The length is padded to
/// a power of two with zeros internally and truncated back.
pub fn prefix_sums(arr: &mut ScanArray) -> Result<()> {
    let n = arr.len();
    if n <= 1 {
        return Ok(());
    }
    let padded = n.next_power_of_two();
    arr.d.resize(padded, 0);
    let rounds = padded.trailing_zeros();
    for i in 1..=rounds {
        let block = 1usize << i;
        for j in 0..padded / block {
            d_step(arr, j * block + 1, (j + 1) * block)?;
        }
    }
    arr.d.truncate(n);
    Ok(())
}

/// Exact inverse of [`prefix_sums`].
pub fn unprefix_sums(arr: &mut ScanArray) -> Result<()> {
    let n = arr.len();
    if n <= 1 {
        return Ok(());
    }
    let padded = n.next_power_of_two();
    // re-derive the padding values the forward pass would have produced:
    // zeros turn into copies of the running total
    if padded != n {
        let total = arr.d[n - 1];
        arr.d.resize(padded, total);
    }
    let rounds = padded.trailing_zeros();
    for i in (1..=rounds).rev() {
        let block = 1usize << i;
        for j in 0..padded / block {
            d_step_inverse(arr, j * block + 1, (j + 1) * block)?;
        }
    }
    arr.d.truncate(n);
    Ok(())
}

/// Elementary-layer cost of one prefix-sum pass on `n` entries: each round
/// fans the pivot out to half a block (a copy tree up, one add, a copy tree
/// down), summed over `log n` rounds. Quadratic in `log n`.
pub fn prefix_depth(n: usize) -> DepthReport {
    if n <= 1 {
        return DepthReport::default();
    }
    let padded = n.next_power_of_two();
    let rounds = padded.trailing_zeros() as u64;
    let mut layers = 0;
    for i in 1..=rounds {
        let targets = 1u64 << (i - 1);
        let fanout = 64 - (targets - 1).leading_zeros() as u64;
        let fanout = if targets <= 1 { 0 } else { fanout };
        layers += 2 * fanout + 1;
    }
    DepthReport::elementary(layers)
}
