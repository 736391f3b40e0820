//! Iterative boundary-peeling thinning.
//!
//! A pixel is deleted only when it is *simple*: its removal changes neither
//! the 8-connectivity of the foreground nor the 4-connectivity of the
//! background in its 3x3 neighborhood. End points (a single foreground
//! neighbor) and isolated pixels are never deleted, so component count and
//! hole count are preserved by construction. Four directional sub-passes
//! (north, south, east, west borders) peel one layer per round; a final pass
//! breaks any surviving 2x2 block whose pixels are still simple.

use super::{BinaryImage, Skeleton};

/// Ring offsets in clockwise order starting north.
const RING: [(i64, i64); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

/// Within-ring 8-adjacency (cell indices into RING).
fn ring_adjacent(i: usize, j: usize) -> bool {
    let (ax, ay) = RING[i];
    let (bx, by) = RING[j];
    (ax - bx).abs() <= 1 && (ay - by).abs() <= 1
}

/// Within-ring 4-adjacency.
fn ring_adjacent4(i: usize, j: usize) -> bool {
    let (ax, ay) = RING[i];
    let (bx, by) = RING[j];
    (ax - bx).abs() + (ay - by).abs() == 1
}

fn ring_states(img: &BinaryImage, x: u32, y: u32) -> [bool; 8] {
    let (xi, yi) = (x as i64, y as i64);
    let mut s = [false; 8];
    for (i, (dx, dy)) in RING.iter().enumerate() {
        s[i] = img.fg(xi + dx, yi + dy);
    }
    s
}

/// Count connected components among selected ring cells, under the given
/// within-ring adjacency.
fn ring_components(selected: &[bool; 8], adjacent: fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut seen = [false; 8];
    let mut comps = Vec::new();
    for start in 0..8 {
        if !selected[start] || seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(c) = stack.pop() {
            for n in 0..8 {
                if selected[n] && !seen[n] && adjacent(c, n) {
                    seen[n] = true;
                    comp.push(n);
                    stack.push(n);
                }
            }
        }
        comps.push(comp);
    }
    comps
}

/// A foreground pixel is simple when exactly one foreground 8-component and
/// exactly one border-touching background 4-component meet it.
pub(crate) fn is_simple(img: &BinaryImage, x: u32, y: u32) -> bool {
    let ring = ring_states(img, x, y);
    let fg_comps = ring_components(&ring, ring_adjacent);
    if fg_comps.len() != 1 {
        return false;
    }
    let bg: [bool; 8] = std::array::from_fn(|i| !ring[i]);
    let bg_comps = ring_components(&bg, ring_adjacent4);
    // only components containing an edge-adjacent cell (even RING index)
    let touching = bg_comps
        .iter()
        .filter(|c| c.iter().any(|&i| i % 2 == 0))
        .count();
    touching == 1
}

fn fg_neighbor_count(img: &BinaryImage, x: u32, y: u32) -> usize {
    ring_states(img, x, y).iter().filter(|&&b| b).count()
}

pub(crate) fn thin(input: &BinaryImage) -> Skeleton {
    let mut img = input.clone();
    // (dx, dy) of the background side required for each sub-pass
    let directions = [(0i64, -1i64), (0, 1), (-1, 0), (1, 0)];
    loop {
        let mut deleted = false;
        for &(bx, by) in &directions {
            // border candidates from a snapshot, bounded to one layer per pass
            let snapshot = img.clone();
            let mut candidates = Vec::new();
            for y in 0..img.height() {
                for x in 0..img.width() {
                    if snapshot.get(x, y) && !snapshot.fg(x as i64 + bx, y as i64 + by) {
                        candidates.push((x, y));
                    }
                }
            }
            for (x, y) in candidates {
                if !img.get(x, y) {
                    continue;
                }
                let n = fg_neighbor_count(&img, x, y);
                if n >= 2 && is_simple(&img, x, y) {
                    img.set(x, y, false);
                    deleted = true;
                }
            }
        }
        if !deleted {
            break;
        }
    }
    break_blocks(&mut img);
    prune_spurs(&mut img, 2);
    Skeleton { image: img }
}

/// Remove endpoint twigs of at most `max_len` pixels that attach to a
/// junction. Real stroke ends (chains longer than `max_len`, or ending at
/// another endpoint) are left alone.
fn prune_spurs(img: &mut BinaryImage, max_len: usize) {
    use crate::skeleton_graph::effective_neighbors;
    let mut tips: Vec<(u32, u32)> = img
        .foreground_pixels()
        .into_iter()
        .filter(|&(x, y)| effective_neighbors(img, x, y).len() == 1)
        .collect();
    tips.sort_by_key(|&(x, y)| (y, x));
    for tip in tips {
        if !img.get(tip.0, tip.1) || effective_neighbors(img, tip.0, tip.1).len() != 1 {
            continue;
        }
        let mut walked = vec![tip];
        let mut prev = tip;
        let mut cur = effective_neighbors(img, tip.0, tip.1)[0];
        let mut junction = false;
        while walked.len() <= max_len {
            let nbrs = effective_neighbors(img, cur.0, cur.1);
            if nbrs.len() >= 3 {
                junction = true;
                break;
            }
            if nbrs.len() == 1 {
                break; // a bare chain, not a spur
            }
            walked.push(cur);
            let next = *nbrs.iter().find(|&&n| n != prev).unwrap();
            prev = cur;
            cur = next;
        }
        if junction {
            for (x, y) in walked {
                img.set(x, y, false);
            }
        }
    }
}

/// Dissolve any remaining fully-foreground 2x2 block by deleting a simple
/// member pixel. Keeps topology intact; repeats until stable. A block whose
/// four pixels are all non-simple (a fused X junction) stays: topology
/// preservation outranks strict thinness, and the graph layer absorbs such
/// blocks into junction clusters.
fn break_blocks(img: &mut BinaryImage) {
    loop {
        let mut changed = false;
        for y in 0..img.height() - 1 {
            for x in 0..img.width() - 1 {
                if !(img.get(x, y) && img.get(x + 1, y) && img.get(x, y + 1) && img.get(x + 1, y + 1))
                {
                    continue;
                }
                for (px, py) in [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)] {
                    if fg_neighbor_count(img, px, py) >= 2 && is_simple(img, px, py) {
                        img.set(px, py, false);
                        changed = true;
                        break;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{connected_components, hole_count, skeletonize};
    use proptest::prelude::*;

    fn bar(width: u32, height: u32, len: u32, thick: u32) -> BinaryImage {
        let mut img = BinaryImage::blank(width, height);
        let y0 = (height - thick) / 2;
        for y in y0..y0 + thick {
            for x in 2..2 + len {
                img.set(x, y, true);
            }
        }
        img
    }

    #[test]
    fn thick_bar_thins_to_single_row_chain() {
        let img = bar(24, 7, 20, 3);
        let sk = skeletonize(&img);
        let px = sk.image().foreground_pixels();
        assert!(!px.is_empty());
        let rows: std::collections::BTreeSet<u32> = px.iter().map(|&(_, y)| y).collect();
        assert_eq!(rows.len(), 1, "expected a single-row chain, got {rows:?}");
        // contiguous horizontal run covering most of the bar
        let xs: Vec<u32> = px.iter().map(|&(x, _)| x).collect();
        let (min, max) = (*xs.iter().min().unwrap(), *xs.iter().max().unwrap());
        assert_eq!((max - min + 1) as usize, xs.len());
        assert!(xs.len() >= 16);
        assert!(!sk.image().has_full_block());
    }

    #[test]
    fn thin_diagonal_chain_is_fixed_point() {
        let mut img = BinaryImage::blank(12, 12);
        for i in 0..10 {
            img.set(i, i, true);
        }
        let sk = skeletonize(&img);
        assert_eq!(sk.image(), &img);
    }

    #[test]
    fn annulus_thins_to_loop_with_one_hole() {
        let mut img = BinaryImage::blank(21, 21);
        for y in 0..21u32 {
            for x in 0..21u32 {
                let dx = x as f64 - 10.0;
                let dy = y as f64 - 10.0;
                let r = (dx * dx + dy * dy).sqrt();
                if (4.0..=8.0).contains(&r) {
                    img.set(x, y, true);
                }
            }
        }
        assert_eq!(hole_count(&img), 1);
        let sk = skeletonize(&img);
        assert_eq!(hole_count(sk.image()), 1);
        assert_eq!(connected_components(sk.image()).len(), 1);
        assert!(!sk.image().has_full_block());
        // a closed loop has no end points
        for (x, y) in sk.image().foreground_pixels() {
            assert!(sk.image().neighbor_count(x, y) >= 2);
        }
    }


    #[test]
    fn blank_image_stays_blank() {
        let img = BinaryImage::blank(5, 5);
        assert_eq!(skeletonize(&img).image().count_foreground(), 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        /// Random blobs: thinning preserves component count and hole count
        /// and produces a thin result.
        #[test]
        fn topology_preserved_on_random_blobs(seed in 0u64..10_000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut img = BinaryImage::blank(28, 28);
            // a few random disks to create merged blobs and occasional holes
            for _ in 0..rng.gen_range(1..5) {
                let cx = rng.gen_range(4.0..24.0);
                let cy = rng.gen_range(4.0..24.0);
                let r = rng.gen_range(2.0..6.0);
                for y in 0..28u32 {
                    for x in 0..28u32 {
                        let dx = x as f64 - cx;
                        let dy = y as f64 - cy;
                        if (dx * dx + dy * dy).sqrt() <= r {
                            img.set(x, y, true);
                        }
                    }
                }
            }
            let comps_before = connected_components(&img).len();
            let holes_before = hole_count(&img);
            let sk = skeletonize(&img);
            prop_assert_eq!(connected_components(sk.image()).len(), comps_before);
            prop_assert_eq!(hole_count(sk.image()), holes_before);
            // thin, except for irreducible junction blocks whose pixels are
            // all topology-critical
            let out = sk.image();
            for y in 0..out.height() - 1 {
                for x in 0..out.width() - 1 {
                    let block = out.get(x, y)
                        && out.get(x + 1, y)
                        && out.get(x, y + 1)
                        && out.get(x + 1, y + 1);
                    if block {
                        for (px, py) in [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)] {
                            prop_assert!(
                                !is_simple(out, px, py),
                                "reducible 2x2 block survived at ({px},{py})"
                            );
                        }
                    }
                }
            }
        }
    }
}
