//! Fixed-shape pairwise summation.
//!
//! Every reduction in the toolkit (inner products, norms, TV) goes through
//! these helpers. The recursion splits ranges at the midpoint regardless of
//! the data, so the summation tree — and therefore the floating-point result —
//! is a pure function of the range length. That is what makes artifacts
//! byte-identical across runs and machines with the same FP semantics.

/// Below this length a plain left-to-right loop is used.
const LEAF: usize = 32;

/// Pairwise sum of `f(i)` for `i` in `0..n`.
pub fn pairwise_map_sum<F: Fn(usize) -> f64>(n: usize, f: F) -> f64 {
    fn go<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= LEAF {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            go(lo, mid, f) + go(mid, hi, f)
        }
    }
    go(0, n, &f)
}

/// Pairwise sum of a slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise_map_sum(xs.len(), |i| xs[i])
}

/// Pairwise dot product Σ a_i b_i.
pub fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    pairwise_map_sum(a.len(), |i| a[i] * b[i])
}
