//! Dynamic point-sequence alignment, used to compare a recovered trajectory
//! against generator ground truth without assuming equal sampling.

use crate::geometry::Point;

/// Mean point distance along the optimal monotone alignment path between two
/// sequences (dynamic time warping with Euclidean cost, averaged over the
/// alignment length). Returns infinity if either sequence is empty.
pub fn dtw_mean_error(a: &[Point], b: &[Point]) -> f64 {
    let n = a.len();
    let m = b.len();
    if n == 0 || m == 0 {
        return f64::INFINITY;
    }
    // cost and path-length tables, rolling over rows
    let mut prev_cost = vec![f64::INFINITY; m + 1];
    let mut prev_len = vec![0u32; m + 1];
    let mut cur_cost = vec![f64::INFINITY; m + 1];
    let mut cur_len = vec![0u32; m + 1];
    prev_cost[0] = 0.0;

    for i in 1..=n {
        cur_cost[0] = f64::INFINITY;
        for j in 1..=m {
            let d = a[i - 1].dist(&b[j - 1]);
            let (best, len) = {
                let diag = (prev_cost[j - 1], prev_len[j - 1]);
                let up = (prev_cost[j], prev_len[j]);
                let left = (cur_cost[j - 1], cur_len[j - 1]);
                let mut best = diag;
                if up.0 < best.0 {
                    best = up;
                }
                if left.0 < best.0 {
                    best = left;
                }
                best
            };
            cur_cost[j] = best + d;
            cur_len[j] = len + 1;
        }
        std::mem::swap(&mut prev_cost, &mut cur_cost);
        std::mem::swap(&mut prev_len, &mut cur_len);
    }
    prev_cost[m] / prev_len[m] as f64
}

/// The smaller of the forward and reversed alignment errors; direction of a
/// recovered trace may legitimately be flipped before the start rule applies.
pub fn dtw_mean_error_bidirectional(a: &[Point], b: &[Point]) -> f64 {
    let forward = dtw_mean_error(a, b);
    let reversed_b: Vec<Point> = b.iter().rev().cloned().collect();
    forward.min(dtw_mean_error(a, &reversed_b))
}
