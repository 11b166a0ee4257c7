//! Span-preserving splitting of over-long token sequences.

use std::ops::Range;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    /// Consecutive token ranges; they partition `0..len` unless truncated.
    pub pieces: Vec<Range<usize>>,
    /// True when no legal split exists and only the first `budget` tokens are kept.
    pub truncated: bool,
}

impl SplitPlan {
    pub fn sizes(&self) -> Vec<usize> {
        self.pieces.iter().map(|r| r.len()).collect()
    }
}

/// Legal cut positions: `legal[c]` is true when cutting between tokens
/// `c - 1` and `c` does not fall inside any span. Spans are inclusive
/// token ranges.
pub fn legal_cuts(len: usize, spans: &[(usize, usize)]) -> Vec<bool> {
    let mut legal = vec![true; len + 1];
    for &(s, e) in spans {
        for c in legal.iter_mut().take(e.min(len - 1) + 1).skip(s + 1) {
            *c = false;
        }
    }
    legal
}

/// Splits `len` tokens into pieces of at most `budget` tokens without
/// cutting through any of `spans`.
///
/// Uses the fewest pieces possible; among those, the smallest spread
/// between the largest and smallest piece; among those, each cut in turn is
/// the feasible position nearest to the equal-division target
/// `round(i * len / p)`. When no legal split exists the first `budget`
/// tokens are kept and the rest dropped.
#[allow(clippy::single_range_in_vec_init)]
pub fn split_overlong(len: usize, spans: &[(usize, usize)], budget: usize) -> SplitPlan {
    assert!(budget >= 1, "budget must be positive");
    if len <= budget {
        return SplitPlan { pieces: vec![0..len], truncated: false };
    }
    let legal = legal_cuts(len, spans);
    let Some(p) = min_pieces(len, &legal, budget) else {
        return SplitPlan { pieces: vec![0..budget], truncated: true };
    };

    let floor = len / p;
    let ceil = len.div_ceil(p);
    for spread in 0..budget {
        let lo_min = ceil.saturating_sub(spread).max(1);
        for lo in lo_min..=floor {
            let hi = lo + spread;
            if hi > budget {
                break;
            }
            if let Some(cuts) = choose_cuts(len, &legal, p, lo, hi) {
                let mut pieces = Vec::with_capacity(p);
                let mut prev = 0;
                for c in cuts.into_iter().chain(std::iter::once(len)) {
                    pieces.push(prev..c);
                    prev = c;
                }
                return SplitPlan { pieces, truncated: false };
            }
        }
    }
    unreachable!("a feasible piece count admits sizes in [1, budget]")
}

/// Fewest pieces of size `<= budget` with every cut legal (greedy
/// farthest-reach), or `None` if some stretch cannot be cut.
fn min_pieces(len: usize, legal: &[bool], budget: usize) -> Option<usize> {
    let mut pos = 0;
    let mut pieces = 0;
    while pos < len {
        pieces += 1;
        if len - pos <= budget {
            return Some(pieces);
        }
        let next = (pos + 1..=pos + budget).rev().find(|&c| legal[c])?;
        pos = next;
    }
    Some(pieces)
}

/// Picks `p - 1` cuts with every piece size in `[lo, hi]`, each cut the
/// completable position nearest its target. `None` if infeasible.
fn choose_cuts(len: usize, legal: &[bool], p: usize, lo: usize, hi: usize) -> Option<Vec<usize>> {
    // can_finish[k][pos]: from `pos`, exactly k pieces with sizes in [lo, hi] reach `len`.
    let mut can_finish = vec![vec![false; len + 1]; p + 1];
    can_finish[0][len] = true;
    for k in 1..=p {
        // prefix counts of can_finish[k - 1] for window queries
        let mut prefix = vec![0usize; len + 2];
        for pos in 0..=len {
            prefix[pos + 1] = prefix[pos] + can_finish[k - 1][pos] as usize;
        }
        for pos in 0..len {
            if pos != 0 && !legal[pos] {
                continue;
            }
            let a = pos + lo;
            let b = (pos + hi).min(len);
            if a <= b && prefix[b + 1] > prefix[a] {
                can_finish[k][pos] = true;
            }
        }
    }
    if !can_finish[p][0] {
        return None;
    }
    let mut cuts = Vec::with_capacity(p - 1);
    let mut prev = 0;
    for i in 1..p {
        let target = (2 * i * len + p) / (2 * p);
        let remaining = p - i;
        let best = (prev + lo..=(prev + hi).min(len))
            .filter(|&c| c < len && legal[c] && can_finish[remaining][c])
            .min_by_key(|&c| (c.abs_diff(target), c))
            .expect("completable cut exists");
        cuts.push(best);
        prev = best;
    }
    Some(cuts)
}
