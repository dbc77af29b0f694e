//! Increasing multi-indices over {0, …, n−1} encoded as bitmasks.
//!
//! A degree-k multi-index I = (i_1 < … < i_k) is stored as the mask with
//! bits i_1, …, i_k set. The canonical enumeration of all degree-k indices
//! is lexicographic on the tuple form, which fixes the coefficient layout
//! of every form in the crate.

/// Bitmask of an increasing multi-index; bit j stands for the index j.
pub type Mask = u16;

/// Binomial coefficient C(n, k).
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out = 1usize;
    for i in 0..k {
        out = out * (n - i) / (i + 1);
    }
    out
}

/// All degree-k multi-indices on {0, …, n−1} in lexicographic tuple order.
pub fn subsets(n: usize, k: usize) -> Vec<Mask> {
    let mut out = Vec::with_capacity(binomial(n, k));
    let mut tuple: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(tuple.iter().fold(0, |m, &i| m | (1 << i)));
        // advance to the next increasing tuple
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            if tuple[pos] < n - (k - pos) {
                tuple[pos] += 1;
                for later in pos + 1..k {
                    tuple[later] = tuple[later - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return out;
            }
        }
        if k == 0 {
            return out;
        }
    }
}

/// Position of `mask` in [`subsets`]`(n, k)`, if it has popcount k.
pub fn rank_of(n: usize, k: usize, mask: Mask) -> Option<usize> {
    if mask.count_ones() as usize != k {
        return None;
    }
    subsets(n, k).iter().position(|&m| m == mask)
}

/// Indices of `mask` in increasing order.
pub fn indices(mask: Mask) -> impl Iterator<Item = usize> {
    (0..Mask::BITS as usize).filter(move |j| mask & (1 << j) != 0)
}

/// Concatenate two increasing index blocks and sort, tracking the sign of
/// the permutation. Returns `None` when the blocks share an index.
pub fn merge_sign(a: Mask, b: Mask) -> Option<(Mask, f64)> {
    if a & b != 0 {
        return None;
    }
    let mut inversions = 0u32;
    for j in indices(b) {
        // elements of `a` that j must cross to reach sorted position
        let above = a >> (j + 1);
        inversions += above.count_ones();
    }
    let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
    Some((a | b, sign))
}
