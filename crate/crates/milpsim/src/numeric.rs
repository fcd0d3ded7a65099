//! Exact floating-point summation and a stable content hash.

/// Order-independent exact summation (Shewchuk's algorithm).
///
/// Maintains the running sum as a list of non-overlapping partials whose sum
/// is exactly the sum of every input seen so far; [`ExactSum::value`] rounds
/// that exact value to the nearest f64 once. Because the intermediate
/// representation is exact, the result does not depend on the order in which
/// terms are accumulated — this is what makes graph aggregations invariant to
/// node relabeling down to the last bit.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        ExactSum {
            partials: Vec::with_capacity(4),
        }
    }

    /// Clears the accumulator for reuse (keeps the allocation).
    #[inline]
    pub fn reset(&mut self) {
        self.partials.clear();
    }

    #[inline]
    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for k in 0..self.partials.len() {
            let mut y = self.partials[k];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// Correctly rounded value of the exact sum.
    ///
    /// Rounding logic follows CPython's `math.fsum`: sum partials from
    /// largest to smallest and apply a half-to-even correction using the
    /// sign of the next-lower partial.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

/// Exact sum of a sequence in one call.
pub fn fsum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = ExactSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// 128-bit FNV-1a content hash rendered as 32 hex characters.
///
/// Instance files carry this hash of their canonical serialization as their
/// identity; it must be stable across runs, platforms and crate versions.
pub fn content_hash(bytes: &[u8]) -> String {
    const OFFSET: u128 = 0x6c62_272e_07bb_0142_62b8_2175_6295_c58d;
    const PRIME: u128 = 0x0000_0000_0100_0000_0000_0000_0000_013b;
    let mut h = OFFSET;
    for &b in bytes {
        h ^= b as u128;
        h = h.wrapping_mul(PRIME);
    }
    format!("{h:032x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn fsum_handles_cancellation() {
        assert_eq!(fsum([1.0, 1e100, 1.0, -1e100]), 2.0);
        assert_eq!(fsum([1e16, 1.0, -1e16]), 1.0);
    }

    #[test]
    fn fsum_is_order_independent() {
        let mut rng = SeededRng::new(11);
        let mut values: Vec<f64> = (0..200)
            .map(|_| (rng.next_f64() - 0.5) * 10f64.powi(rng.index(30) as i32 - 15))
            .collect();
        let reference = fsum(values.iter().copied());
        for _ in 0..50 {
            rng.shuffle(&mut values);
            let shuffled = fsum(values.iter().copied());
            assert_eq!(reference.to_bits(), shuffled.to_bits());
        }
    }

    #[test]
    fn fsum_empty_is_zero() {
        assert_eq!(fsum([]), 0.0);
    }

    #[test]
    fn fsum_matches_naive_on_benign_input() {
        let values = [0.5, 0.25, 0.125, 4.0];
        assert_eq!(fsum(values), values.iter().sum::<f64>());
    }

    #[test]
    fn exact_sum_reset_reuses_buffer() {
        let mut acc = ExactSum::new();
        acc.add(1.5);
        acc.add(2.5);
        assert_eq!(acc.value(), 4.0);
        acc.reset();
        acc.add(-1.0);
        assert_eq!(acc.value(), -1.0);
    }

    #[test]
    fn content_hash_is_stable() {
        assert_eq!(content_hash(b"abc"), content_hash(b"abc"));
        assert_ne!(content_hash(b"abc"), content_hash(b"abd"));
        assert_eq!(content_hash(b"").len(), 32);
    }
}
