//! Temporal order reconstruction: turn a segment graph back into a pen
//! trajectory, then resample it with curvature-weighted density and estimate
//! a curvilinear velocity profile.
//!
//! Traversal rules, applied lexicographically: start at the rightmost end
//! point (rightmost node when no end exists), prefer untraversed segments,
//! minimize angular deviation at junctions, then entry distance, then
//! segment id. Already-walked segments are re-used only to backtrack when no
//! untraversed continuation exists, so every segment is walked at most
//! twice. Components are visited right to left.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::skeleton_graph::{PointKind, SegmentGraph};

/// Recovered pen trajectory. `breaks[i]` is the index of the first point of
/// a new stroke (pen-up happens just before it).
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedTrace {
    pub points: Vec<Point>,
    pub breaks: Vec<usize>,
}

impl OrderedTrace {
    pub fn new(points: Vec<Point>, breaks: Vec<usize>) -> Self {
        debug_assert!(breaks.windows(2).all(|w| w[0] < w[1]));
        OrderedTrace { points, breaks }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Per-stroke point ranges `(start, end)` with `end` exclusive.
    pub fn stroke_ranges(&self) -> Vec<(usize, usize)> {
        let mut ranges = Vec::new();
        let mut start = 0;
        for &b in &self.breaks {
            ranges.push((start, b));
            start = b;
        }
        ranges.push((start, self.points.len()));
        ranges.retain(|&(s, e)| e > s);
        ranges
    }
}

/// Trace resampled to unit timestep with curvature-weighted density.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledTrace {
    pub points: Vec<Point>,
    pub breaks: Vec<usize>,
}

impl ResampledTrace {
    pub fn stroke_ranges(&self) -> Vec<(usize, usize)> {
        OrderedTrace {
            points: self.points.clone(),
            breaks: self.breaks.clone(),
        }
        .stroke_ranges()
    }
}

/// Curvilinear speed per unit timestep. A zero sample is inserted at each
/// pen-up break; `breaks` holds the indices of those zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    pub v: Vec<f64>,
    pub breaks: Vec<usize>,
}

impl VelocityProfile {
    /// Inclusive index ranges of pen-down samples, excluding the break zeros.
    pub fn pen_down_runs(&self) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut start = 0usize;
        for &z in &self.breaks {
            if z > start {
                runs.push((start, z - 1));
            }
            start = z + 1;
        }
        if start < self.v.len() {
            runs.push((start, self.v.len() - 1));
        }
        runs
    }
}

/// Knobs of the recovery stage.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryParams {
    /// Pixels averaged on each side of a junction to estimate direction.
    pub window: usize,
    /// Curvature weight of the resampling density `1 + lambda * |kappa|`.
    pub lambda: f64,
    /// Base arc-length step of the resampler, in pixels.
    pub base_step: f64,
    /// Synthetic curvature assigned to stroke ends so they sample densest.
    pub end_curvature: f64,
    /// Moving-average window applied to stroke points before curvature
    /// estimation; irons out pixel quantization kinks.
    pub smooth_points: usize,
}

impl Default for RecoveryParams {
    fn default() -> Self {
        RecoveryParams {
            window: 5,
            lambda: 6.0,
            base_step: 1.0,
            end_curvature: 0.08,
            smooth_points: 9,
        }
    }
}

/// Walk every segment of the graph into a single ordered trace; one pen-up
/// break between connected components.
pub fn order_segments(g: &SegmentGraph, params: &RecoveryParams) -> OrderedTrace {
    if g.nodes.is_empty() {
        return OrderedTrace::new(Vec::new(), Vec::new());
    }

    // connected components over nodes
    let mut comp = vec![usize::MAX; g.nodes.len()];
    let mut n_comp = 0;
    for start in 0..g.nodes.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        comp[start] = n_comp;
        while let Some(u) = queue.pop_front() {
            for (eid, fwd) in g.incident(u) {
                let v = if fwd { g.edges[eid].ends.1 } else { g.edges[eid].ends.0 };
                if comp[v] == usize::MAX {
                    comp[v] = n_comp;
                    queue.push_back(v);
                }
            }
        }
        n_comp += 1;
    }

    // start node per component: rightmost end point, else rightmost node
    let mut starts: Vec<usize> = Vec::with_capacity(n_comp);
    for c in 0..n_comp {
        let members = || g.nodes.iter().filter(|n| comp[n.id] == c);
        let best = members()
            .filter(|n| n.kind == PointKind::End)
            .max_by(node_right_rule)
            .or_else(|| members().max_by(node_right_rule))
            .unwrap();
        starts.push(best.id);
    }
    // components right to left
    let mut comp_order: Vec<usize> = (0..n_comp).collect();
    comp_order.sort_by(|&a, &b| {
        let pa = g.nodes[starts[a]].pos;
        let pb = g.nodes[starts[b]].pos;
        pb.x.total_cmp(&pa.x)
            .then(pa.y.total_cmp(&pb.y))
            .then(starts[a].cmp(&starts[b]))
    });

    let mut points: Vec<Point> = Vec::new();
    let mut breaks: Vec<usize> = Vec::new();
    let mut traversed = vec![false; g.edges.len()];

    for &c in &comp_order {
        if !points.is_empty() {
            breaks.push(points.len());
        }
        walk_component(g, starts[c], params, &mut traversed, &mut points);
    }
    OrderedTrace::new(points, breaks)
}

fn node_right_rule(a: &&crate::skeleton_graph::Node, b: &&crate::skeleton_graph::Node) -> std::cmp::Ordering {
    a.pos
        .x
        .total_cmp(&b.pos.x)
        .then(b.pos.y.total_cmp(&a.pos.y))
        .then(b.id.cmp(&a.id))
}

fn walk_component(
    g: &SegmentGraph,
    start: usize,
    params: &RecoveryParams,
    traversed: &mut [bool],
    points: &mut Vec<Point>,
) {
    let w = params.window.max(1);
    let mut remaining = g
        .edges
        .iter()
        .filter(|e| !traversed[e.id] && reachable_same_component(g, start, e.ends.0))
        .count();
    let start_node = &g.nodes[start];
    if g.incident(start).is_empty() {
        // isolated node: a degenerate one-point stroke
        points.push(start_node.pos);
        return;
    }

    let mut cur = start;
    let mut stack: Vec<(usize, bool)> = Vec::new();
    emit_point(points, start_pixel(g, start));

    loop {
        let incident = g.incident(cur);
        let untrav: Vec<(usize, bool)> = incident
            .iter()
            .cloned()
            .filter(|&(e, _)| !traversed[e])
            .collect();
        if !untrav.is_empty() {
            let choice = choose_continuation(g, cur, &untrav, points, w);
            traversed[choice.0] = true;
            remaining -= 1;
            stack.push(choice);
            cur = emit_segment(g, choice, points, w);
        } else if remaining == 0 {
            break;
        } else {
            // backtrack along the walked path, re-using the last segment
            let (eid, fwd) = stack.pop().expect("untraversed segments must be reachable");
            cur = emit_segment(g, (eid, !fwd), points, w);
        }
    }
}

fn reachable_same_component(g: &SegmentGraph, a: usize, b: usize) -> bool {
    // graphs are small; BFS each call would be wasteful but correct. The
    // caller already confines walks to one component, so membership is a
    // simple check against the component of `a` computed once here.
    let mut seen = vec![false; g.nodes.len()];
    let mut queue = VecDeque::from([a]);
    seen[a] = true;
    while let Some(u) = queue.pop_front() {
        if u == b {
            return true;
        }
        for (eid, fwd) in g.incident(u) {
            let v = if fwd { g.edges[eid].ends.1 } else { g.edges[eid].ends.0 };
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    a == b
}

fn start_pixel(g: &SegmentGraph, node: usize) -> Point {
    g.nodes[node].pos
}

fn emit_point(points: &mut Vec<Point>, p: Point) {
    if points.last() != Some(&p) {
        points.push(p);
    }
}

/// Oriented pixel chain of an edge instance.
fn oriented_chain(g: &SegmentGraph, (eid, fwd): (usize, bool)) -> Vec<(u32, u32)> {
    let chain = &g.edges[eid].chain;
    if fwd {
        chain.clone()
    } else {
        chain.iter().rev().cloned().collect()
    }
}

/// Append the pixels of an edge instance to the trace, bridging across the
/// junction cluster when the entry pixel is not adjacent to the last point.
/// Returns the node arrived at.
fn emit_segment(
    g: &SegmentGraph,
    inst: (usize, bool),
    points: &mut Vec<Point>,
    _w: usize,
) -> usize {
    let chain = oriented_chain(g, inst);
    let from_node = if inst.1 { g.edges[inst.0].ends.0 } else { g.edges[inst.0].ends.1 };
    if let Some(&last) = points.last() {
        let first = Point::new(chain[0].0 as f64, chain[0].1 as f64);
        if last.dist(&first) > std::f64::consts::SQRT_2 + 1e-9 {
            for p in cluster_path(g, from_node, last, first) {
                emit_point(points, p);
            }
        }
    }
    for &(x, y) in &chain {
        emit_point(points, Point::new(x as f64, y as f64));
    }
    if inst.1 {
        g.edges[inst.0].ends.1
    } else {
        g.edges[inst.0].ends.0
    }
}

/// Shortest pixel path inside a junction cluster between two of its pixels.
fn cluster_path(g: &SegmentGraph, node: usize, from: Point, to: Point) -> Vec<Point> {
    let members = &g.nodes[node].pixels;
    let near = |p: Point| {
        members
            .iter()
            .min_by(|a, b| {
                let da = Point::new(a.0 as f64, a.1 as f64).dist(&p);
                let db = Point::new(b.0 as f64, b.1 as f64).dist(&p);
                da.total_cmp(&db)
            })
            .cloned()
    };
    let (Some(src), Some(dst)) = (near(from), near(to)) else {
        return Vec::new();
    };
    // BFS within the member set
    let mut prev: std::collections::HashMap<(u32, u32), (u32, u32)> = Default::default();
    let mut queue = VecDeque::from([src]);
    prev.insert(src, src);
    while let Some(c) = queue.pop_front() {
        if c == dst {
            break;
        }
        for m in members {
            let adj = (m.0 as i64 - c.0 as i64).abs() <= 1 && (m.1 as i64 - c.1 as i64).abs() <= 1;
            if adj && !prev.contains_key(m) {
                prev.insert(*m, c);
                queue.push_back(*m);
            }
        }
    }
    let mut path = vec![dst];
    let mut cur = dst;
    while prev.get(&cur).map(|&p| p != cur).unwrap_or(false) {
        cur = prev[&cur];
        path.push(cur);
    }
    path.reverse();
    path.into_iter()
        .map(|(x, y)| Point::new(x as f64, y as f64))
        .collect()
}

/// Mean unit direction over the last up-to-`w` steps of the trace.
fn incoming_direction(points: &[Point], w: usize) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let lo = points.len().saturating_sub(w + 1);
    mean_direction(&points[lo..])
}

fn mean_direction(pts: &[Point]) -> Option<(f64, f64)> {
    let mut sx = 0.0;
    let mut sy = 0.0;
    for pair in pts.windows(2) {
        let d = pair[1] - pair[0];
        let n = d.norm();
        if n > 1e-12 {
            sx += d.x / n;
            sy += d.y / n;
        }
    }
    let n = (sx * sx + sy * sy).sqrt();
    if n < 1e-12 {
        None
    } else {
        Some((sx / n, sy / n))
    }
}

/// Direction of the first up-to-`w` steps of an edge instance, leaving `node`.
fn entry_direction(g: &SegmentGraph, inst: (usize, bool), w: usize) -> Option<(f64, f64)> {
    let chain = oriented_chain(g, inst);
    let take = chain.len().min(w + 1);
    let pts: Vec<Point> = chain[..take]
        .iter()
        .map(|&(x, y)| Point::new(x as f64, y as f64))
        .collect();
    mean_direction(&pts)
}

/// Signed area of the oriented chain polygon with y flipped, so a positive
/// value is a visually counterclockwise loop.
fn loop_signed_area(g: &SegmentGraph, inst: (usize, bool)) -> f64 {
    let chain = oriented_chain(g, inst);
    let mut s = 0.0;
    for pair in chain.windows(2) {
        let (x0, y0) = (pair[0].0 as f64, -(pair[0].1 as f64));
        let (x1, y1) = (pair[1].0 as f64, -(pair[1].1 as f64));
        s += x0 * y1 - x1 * y0;
    }
    0.5 * s
}

fn choose_continuation(
    g: &SegmentGraph,
    node: usize,
    untrav: &[(usize, bool)],
    points: &[Point],
    w: usize,
) -> (usize, bool) {
    // loops are taken on first arrival at their anchor, counterclockwise
    let mut self_loops: Vec<(usize, bool)> = untrav
        .iter()
        .cloned()
        .filter(|&(e, _)| g.edges[e].is_self_loop())
        .collect();
    if !self_loops.is_empty() {
        self_loops.sort_by_key(|&(e, _)| e);
        let eid = self_loops[0].0;
        let ccw = if loop_signed_area(g, (eid, true)) >= 0.0 {
            (eid, true)
        } else {
            (eid, false)
        };
        return ccw;
    }

    let incoming = incoming_direction(points, w);
    let reference = incoming.unwrap_or((-1.0, 0.0)); // right-to-left start rule
    let last = points.last().cloned().unwrap_or(g.nodes[node].pos);

    let mut best: Option<((usize, bool), f64, f64)> = None;
    for &inst in untrav {
        let dir = entry_direction(g, inst, w).unwrap_or(reference);
        let dot = (dir.0 * reference.0 + dir.1 * reference.1).clamp(-1.0, 1.0);
        let deviation = dot.acos();
        let chain = oriented_chain(g, inst);
        let entry = Point::new(chain[0].0 as f64, chain[0].1 as f64);
        let dist = last.dist(&entry);
        let better = match &best {
            None => true,
            Some((binst, bdev, bdist)) => {
                (deviation, dist, inst.0, inst.1 as u8)
                    < (*bdev, *bdist, binst.0, binst.1 as u8)
            }
        };
        if better {
            best = Some((inst, deviation, dist));
        }
    }
    best.unwrap().0
}

/// Arc-length resampling with local density `1 + lambda * |kappa|`; stroke
/// ends carry a synthetic curvature so sampling is densest there. Strokes
/// with fewer than 2 points are skipped; the skip count is returned.
pub fn resample_with_report(tr: &OrderedTrace, params: &RecoveryParams) -> (ResampledTrace, usize) {
    let mut points = Vec::new();
    let mut breaks = Vec::new();
    let mut skipped = 0usize;
    for (s, e) in tr.stroke_ranges() {
        let stroke = &tr.points[s..e];
        if stroke.len() < 2 {
            skipped += 1;
            continue;
        }
        let resampled = resample_stroke(stroke, params);
        if !points.is_empty() {
            breaks.push(points.len());
        }
        points.extend(resampled);
    }
    (ResampledTrace { points, breaks }, skipped)
}

pub fn resample(tr: &OrderedTrace, params: &RecoveryParams) -> ResampledTrace {
    resample_with_report(tr, params).0
}

/// Moving-average smoothing of a polyline; endpoints stay fixed and the
/// window shrinks symmetrically near them.
fn smooth_polyline(pts: &[Point], window: usize) -> Vec<Point> {
    let n = pts.len();
    if window < 3 || n < 3 {
        return pts.to_vec();
    }
    let half = window / 2;
    (0..n)
        .map(|i| {
            let reach = half.min(i).min(n - 1 - i);
            if reach == 0 {
                return pts[i];
            }
            let lo = i - reach;
            let hi = i + reach;
            let m = (hi - lo + 1) as f64;
            Point::new(
                pts[lo..=hi].iter().map(|p| p.x).sum::<f64>() / m,
                pts[lo..=hi].iter().map(|p| p.y).sum::<f64>() / m,
            )
        })
        .collect()
}

fn resample_stroke(raw: &[Point], params: &RecoveryParams) -> Vec<Point> {
    let smoothed = smooth_polyline(raw, params.smooth_points);
    let stroke = smoothed.as_slice();
    let n = stroke.len();
    // cumulative arc length
    let mut s = vec![0.0; n];
    for i in 1..n {
        s[i] = s[i - 1] + stroke[i].dist(&stroke[i - 1]);
    }
    let total = s[n - 1];
    if total <= 1e-12 {
        return vec![stroke[0]; 4];
    }
    // discrete curvature: turn angle over mean adjacent step length
    let mut kappa = vec![0.0; n];
    for i in 1..n - 1 {
        let a = stroke[i] - stroke[i - 1];
        let b = stroke[i + 1] - stroke[i];
        let (na, nb) = (a.norm(), b.norm());
        if na > 1e-12 && nb > 1e-12 {
            let cross = a.x * b.y - a.y * b.x;
            let dot = a.x * b.x + a.y * b.y;
            let angle = cross.atan2(dot).abs();
            kappa[i] = angle / (0.5 * (na + nb));
        }
    }
    kappa[0] = params.end_curvature;
    kappa[n - 1] = params.end_curvature;

    // warped arc length with density 1 + lambda |kappa|
    let mut warped = vec![0.0; n];
    for i in 1..n {
        let d0 = 1.0 + params.lambda * kappa[i - 1].abs();
        let d1 = 1.0 + params.lambda * kappa[i].abs();
        warped[i] = warped[i - 1] + 0.5 * (d0 + d1) * (s[i] - s[i - 1]);
    }
    let w_total = warped[n - 1];
    let m = ((w_total / params.base_step).ceil() as usize + 1).max(4);

    let mut out = Vec::with_capacity(m);
    let mut seg = 0usize;
    for j in 0..m {
        let target = w_total * j as f64 / (m - 1) as f64;
        while seg + 1 < n - 1 && warped[seg + 1] < target {
            seg += 1;
        }
        let span = (warped[seg + 1] - warped[seg]).max(1e-30);
        let f = ((target - warped[seg]) / span).clamp(0.0, 1.0);
        out.push(Point::new(
            stroke[seg].x + f * (stroke[seg + 1].x - stroke[seg].x),
            stroke[seg].y + f * (stroke[seg + 1].y - stroke[seg].y),
        ));
    }
    out
}

/// Speed between consecutive resampled points at unit timestep, with a zero
/// inserted at every pen-up break.
pub fn estimate_velocity(rs: &ResampledTrace) -> VelocityProfile {
    let mut v = Vec::new();
    let mut breaks = Vec::new();
    for (i, (s, e)) in rs.stroke_ranges().iter().enumerate() {
        if i > 0 {
            breaks.push(v.len());
            v.push(0.0);
        }
        for w in rs.points[*s..*e].windows(2) {
            v.push(w[1].dist(&w[0]));
        }
    }
    VelocityProfile { v, breaks }
}

// ── Trace file format ───────────────────────────────────────────────────────
//
// Header `TRACE v1`, one `x y stroke_id` line per point, one blank line at
// each pen-up break. Coordinates use shortest round-trip float formatting,
// so write → read is exact.

pub fn write_trace(tr: &OrderedTrace, out: &mut impl Write) -> Result<()> {
    writeln!(out, "TRACE v1")?;
    let ranges = tr.stroke_ranges();
    for (sid, (s, e)) in ranges.iter().enumerate() {
        if sid > 0 {
            writeln!(out)?;
        }
        for p in &tr.points[*s..*e] {
            writeln!(out, "{} {} {}", p.x, p.y, sid)?;
        }
    }
    Ok(())
}

pub fn save_trace(tr: &OrderedTrace, path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    write_trace(tr, &mut f)
}

pub fn read_trace(text: &str) -> Result<OrderedTrace> {
    let mut lines = text.lines();
    match lines.next() {
        Some("TRACE v1") => {}
        _ => return Err(Error::Parse("missing TRACE v1 header".into())),
    }
    let mut points = Vec::new();
    let mut breaks = Vec::new();
    let mut pending_break = false;
    for line in lines {
        if line.trim().is_empty() {
            pending_break = true;
            continue;
        }
        let mut it = line.split_whitespace();
        let x: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad trace line: {line:?}")))?;
        let y: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad trace line: {line:?}")))?;
        let _sid: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad trace line: {line:?}")))?;
        if pending_break && !points.is_empty() {
            breaks.push(points.len());
        }
        pending_break = false;
        points.push(Point::new(x, y));
    }
    Ok(OrderedTrace::new(points, breaks))
}

pub fn load_trace(path: &Path) -> Result<OrderedTrace> {
    read_trace(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{BinaryImage, Skeleton};
    use crate::skeleton_graph::{classify_pixels, classify_segment_types, extract_segments};

    fn graph_of(rows: &[&str]) -> SegmentGraph {
        let h = rows.len() as u32;
        let w = rows[0].len() as u32;
        let mut mask = Vec::new();
        for r in rows {
            for c in r.chars() {
                mask.push(c == '#');
            }
        }
        let sk = Skeleton::from_image(BinaryImage::new(w, h, mask).unwrap()).unwrap();
        let pts = classify_pixels(&sk);
        classify_segment_types(extract_segments(&sk, &pts).unwrap())
    }

    #[test]
    fn empty_graph_empty_trace() {
        let g = SegmentGraph {
            nodes: vec![],
            edges: vec![],
        };
        let tr = order_segments(&g, &RecoveryParams::default());
        assert!(tr.is_empty());
    }

    #[test]
    fn open_chain_ordered_from_rightmost_end() {
        let g = graph_of(&["##########"]);
        let tr = order_segments(&g, &RecoveryParams::default());
        assert_eq!(tr.points.len(), 10);
        assert_eq!(tr.points[0], Point::new(9.0, 0.0));
        assert_eq!(tr.points[9], Point::new(0.0, 0.0));
        for (i, p) in tr.points.iter().enumerate() {
            assert_eq!(p.x, 9.0 - i as f64);
        }
        assert!(tr.breaks.is_empty());
    }

    #[test]
    fn two_components_right_first_with_break() {
        let g = graph_of(&["####.####"]);
        let tr = order_segments(&g, &RecoveryParams::default());
        assert_eq!(tr.breaks.len(), 1);
        // right chain first
        assert_eq!(tr.points[0].x, 8.0);
        let b = tr.breaks[0];
        assert_eq!(b, 4);
        assert_eq!(tr.points[b].x, 3.0);
        assert_eq!(tr.points.last().unwrap().x, 0.0);
    }

    #[test]
    fn every_segment_covered_at_most_twice() {
        // T shape forces backtracking
        let g = graph_of(&["#######", "...#...", "...#...", "...#..."]);
        let tr = order_segments(&g, &RecoveryParams::default());
        // every chain pixel appears
        let mut needed: std::collections::HashSet<(u64, u64)> = Default::default();
        for e in &g.edges {
            for &(x, y) in &e.chain {
                needed.insert((x as u64, y as u64));
            }
        }
        let got: std::collections::HashSet<(u64, u64)> = tr
            .points
            .iter()
            .map(|p| (p.x as u64, p.y as u64))
            .collect();
        assert!(needed.is_subset(&got));
        // at most twice the total pixel count (each segment <= 2 passes)
        assert!(tr.points.len() <= 2 * needed.len());
        // adjacent points stay within sqrt(2)
        for w in tr.points.windows(2) {
            assert!(w[0].dist(&w[1]) <= std::f64::consts::SQRT_2 + 1e-9);
        }
    }

    #[test]
    fn acyclic_two_end_component_visits_each_pixel_once() {
        let g = graph_of(&[
            "........#",
            ".......#.",
            "......#..",
            "#####?#..".replace('?', "#").leak(),
        ]);
        let tr = order_segments(&g, &RecoveryParams::default());
        let unique: std::collections::HashSet<(u64, u64)> = tr
            .points
            .iter()
            .map(|p| (p.x as u64, p.y as u64))
            .collect();
        assert_eq!(unique.len(), tr.points.len(), "no pixel repeats");
    }

    #[test]
    fn translation_equivariance() {
        let rows = ["..####", ".#....", "######"];
        let g1 = graph_of(&rows);
        let t1 = order_segments(&g1, &RecoveryParams::default());
        // translate by (3, 2)
        let shifted: Vec<String> = {
            let mut v = vec![".".repeat(9), ".".repeat(9)];
            for r in rows {
                v.push(format!("...{r}"));
            }
            v
        };
        let refs: Vec<&str> = shifted.iter().map(|s| s.as_str()).collect();
        let g2 = graph_of(&refs);
        let t2 = order_segments(&g2, &RecoveryParams::default());
        assert_eq!(t1.points.len(), t2.points.len());
        for (a, b) in t1.points.iter().zip(&t2.points) {
            assert_eq!(a.x + 3.0, b.x);
            assert_eq!(a.y + 2.0, b.y);
        }
    }

    #[test]
    fn resample_straight_stroke_near_uniform() {
        let pts: Vec<Point> = (0..40).map(|i| Point::new(i as f64, 0.0)).collect();
        let tr = OrderedTrace::new(pts, vec![]);
        let rs = resample(&tr, &RecoveryParams::default());
        assert!(rs.points.len() >= 4);
        let vp = estimate_velocity(&rs);
        let mean = vp.v.iter().sum::<f64>() / vp.v.len() as f64;
        let var = vp.v.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vp.v.len() as f64;
        let cov = var.sqrt() / mean;
        assert!(cov < 0.05, "coefficient of variation {cov} too high");
    }

    #[test]
    fn resample_arc_tighter_than_straight() {
        let params = RecoveryParams::default();
        let n = 60;
        // quarter circle radius 20 and straight line, equal arc length
        let r = 20.0;
        let arc_len = std::f64::consts::FRAC_PI_2 * r;
        let arc: Vec<Point> = (0..n)
            .map(|i| {
                let a = std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64;
                Point::new(r * a.cos(), r * a.sin())
            })
            .collect();
        let line: Vec<Point> = (0..n)
            .map(|i| Point::new(arc_len * i as f64 / (n - 1) as f64, 0.0))
            .collect();
        let ra = resample(&OrderedTrace::new(arc, vec![]), &params);
        let rl = resample(&OrderedTrace::new(line, vec![]), &params);
        let mean_spacing = |rs: &ResampledTrace| {
            let d: f64 = rs.points.windows(2).map(|w| w[0].dist(&w[1])).sum();
            d / (rs.points.len() - 1) as f64
        };
        assert!(
            mean_spacing(&ra) < mean_spacing(&rl),
            "curved stroke must sample tighter"
        );
    }

    #[test]
    fn resample_empty_trace_is_empty() {
        let tr = OrderedTrace::new(vec![], vec![]);
        let (rs, skipped) = resample_with_report(&tr, &RecoveryParams::default());
        assert!(rs.points.is_empty());
        assert_eq!(skipped, 0);
    }

    #[test]
    fn resample_skips_single_point_stroke() {
        let tr = OrderedTrace::new(
            vec![Point::new(5.0, 5.0), Point::new(0.0, 0.0), Point::new(1.0, 0.0)],
            vec![1],
        );
        let (rs, skipped) = resample_with_report(&tr, &RecoveryParams::default());
        assert_eq!(skipped, 1);
        assert!(!rs.points.is_empty());
    }

    #[test]
    fn velocity_of_uniform_spacing_is_constant() {
        let pts: Vec<Point> = (0..10).map(|i| Point::new(i as f64, 0.0)).collect();
        let rs = ResampledTrace {
            points: pts,
            breaks: vec![],
        };
        let vp = estimate_velocity(&rs);
        assert_eq!(vp.v.len(), 9);
        assert!(vp.v.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn velocity_matches_definition_for_doubling_spacing() {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(3.0, 0.0),
            Point::new(7.0, 0.0),
        ];
        let rs = ResampledTrace {
            points: pts,
            breaks: vec![],
        };
        let vp = estimate_velocity(&rs);
        assert_eq!(vp.v, vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn velocity_zero_inserted_at_breaks() {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(11.0, 0.0),
        ];
        let rs = ResampledTrace {
            points: pts,
            breaks: vec![2],
        };
        let vp = estimate_velocity(&rs);
        assert_eq!(vp.v, vec![1.0, 0.0, 1.0]);
        assert_eq!(vp.breaks, vec![1]);
        assert_eq!(vp.pen_down_runs(), vec![(0, 0), (2, 2)]);
    }

    #[test]
    fn trace_file_roundtrip_is_exact() {
        let tr = OrderedTrace::new(
            vec![
                Point::new(1.5, 2.25),
                Point::new(0.1 + 0.2, 3.0),
                Point::new(-4.0, 7.125),
            ],
            vec![2],
        );
        let mut buf = Vec::new();
        write_trace(&tr, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("TRACE v1\n"));
        let back = read_trace(&text).unwrap();
        assert_eq!(tr, back);
    }

    #[test]
    fn trace_reader_rejects_bad_header() {
        assert!(read_trace("TRACE v2\n0 0 0\n").is_err());
    }
}
