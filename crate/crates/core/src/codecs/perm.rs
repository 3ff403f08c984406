//! Factorial-number-system (Lehmer) permutation coding.
//!
//! `decode(i, n)` yields the i-th permutation of `0..n` in lexicographic
//! order; `encode` is its inverse. The bijection gives order-based codecs
//! the full floor(log2 n!) bits per window.

pub fn factorial(n: usize) -> u64 {
    (2..=n as u64).product()
}

/// Bits per permutation window: floor(log2 n!).
pub fn order_bits(n: usize) -> usize {
    floor_log2(factorial(n))
}

pub fn floor_log2(x: u64) -> usize {
    debug_assert!(x >= 1);
    63 - x.leading_zeros() as usize
}

/// Lexicographic rank -> permutation of 0..n. `index` must be < n!.
pub fn decode(mut index: u64, n: usize) -> Vec<usize> {
    debug_assert!(index < factorial(n));
    let mut pool: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n);
    for i in (0..n).rev() {
        let f = factorial(i);
        let d = (index / f) as usize;
        index %= f;
        out.push(pool.remove(d));
    }
    out
}

/// Permutation of 0..n -> lexicographic rank.
pub fn encode(perm: &[usize]) -> u64 {
    let n = perm.len();
    let mut rank = 0u64;
    for (i, &p) in perm.iter().enumerate() {
        let smaller_remaining = perm[i + 1..].iter().filter(|&&q| q < p).count() as u64;
        rank += smaller_remaining * factorial(n - 1 - i);
    }
    rank
}

/// Squeezes an arbitrary rank into `k` bits by dropping low-order bits
/// until it fits. Ranks below 2^k (every legitimately embedded window)
/// pass through unchanged.
pub fn fold_to_width(mut v: u64, k: usize) -> u64 {
    if k == 0 {
        return 0;
    }
    if k >= 64 {
        return v;
    }
    while v >= (1u64 << k) {
        v >>= 1;
    }
    v
}
