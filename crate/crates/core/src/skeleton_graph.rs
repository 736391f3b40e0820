//! Structural analysis of a word skeleton: characteristic points (ends,
//! branchings, crossings) and the typed segments between them.
//!
//! Neighbor counting uses 8-connectivity with redundant diagonals pruned: a
//! diagonal neighbor that also touches an orthogonal foreground neighbor of
//! the pixel adds no connectivity and is not counted. Adjacent characteristic
//! pixels produced by thinning at one visual junction are merged into a
//! single node at their centroid.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::imaging::{BinaryImage, Skeleton};

/// Kind of a characteristic point.
///
/// `Loop` marks the designated anchor of a pure closed loop, which has no
/// true characteristic pixel; [`classify_pixels`] never emits it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    End,
    Branch,
    Cross,
    Loop,
}

impl PointKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointKind::End => "end",
            PointKind::Branch => "branch",
            PointKind::Cross => "cross",
            PointKind::Loop => "loop",
        }
    }
}

/// A classified skeleton pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharPoint {
    pub pos: (u32, u32),
    pub kind: PointKind,
}

/// Segment role in the stroke graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    /// Touches at least one end point.
    Terminal,
    /// Connects junctions without lying on any cycle.
    Link,
    /// Lies on a cycle: the contour of an occlusion.
    Occlusion,
}

impl SegmentKind {
    /// Numeric code used in the dump format.
    pub fn code(&self) -> u8 {
        match self {
            SegmentKind::Terminal => 1,
            SegmentKind::Link => 2,
            SegmentKind::Occlusion => 0,
        }
    }
}

/// Graph node: one characteristic pixel or a merged cluster of adjacent ones.
#[derive(Debug, Clone)]
pub struct Node {
    pub id: usize,
    pub pos: Point,
    pub kind: PointKind,
    pub pixels: Vec<(u32, u32)>,
}

/// Maximal pixel chain between two nodes. The chain includes the terminal
/// node pixels; interior pixels belong to exactly one segment.
#[derive(Debug, Clone)]
pub struct Segment {
    pub id: usize,
    pub chain: Vec<(u32, u32)>,
    pub ends: (usize, usize),
    pub kind: SegmentKind,
}

impl Segment {
    pub fn is_self_loop(&self) -> bool {
        self.ends.0 == self.ends.1
    }

    /// Arc length of the chain polyline.
    pub fn arc_length(&self) -> f64 {
        self.chain
            .windows(2)
            .map(|w| {
                let dx = w[1].0 as f64 - w[0].0 as f64;
                let dy = w[1].1 as f64 - w[0].1 as f64;
                (dx * dx + dy * dy).sqrt()
            })
            .sum()
    }
}

/// Nodes plus typed segments of one word skeleton.
#[derive(Debug, Clone)]
pub struct SegmentGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Segment>,
}

impl SegmentGraph {
    /// Incident edge instances at a node: `(edge id, forward)`. A self-loop
    /// appears twice, once per orientation.
    pub fn incident(&self, node: usize) -> Vec<(usize, bool)> {
        let mut out = Vec::new();
        for e in &self.edges {
            if e.ends.0 == node {
                out.push((e.id, true));
            }
            if e.ends.1 == node {
                out.push((e.id, false));
            }
        }
        out
    }

    /// Node degree with self-loops counted twice.
    pub fn degree(&self, node: usize) -> usize {
        self.incident(node).len()
    }

    /// Text dump: `N id x y kind` and `E id n1 n2 type length` lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            out.push_str(&format!(
                "N {} {} {} {}\n",
                n.id,
                n.pos.x,
                n.pos.y,
                n.kind.as_str()
            ));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "E {} {} {} {} {}\n",
                e.id,
                e.ends.0,
                e.ends.1,
                e.kind.code(),
                e.chain.len()
            ));
        }
        out
    }
}

/// Foreground 8-neighbors with redundant diagonals pruned, in a fixed
/// clockwise order starting north.
pub fn effective_neighbors(img: &BinaryImage, x: u32, y: u32) -> Vec<(u32, u32)> {
    const ORDER: [(i64, i64); 8] = [
        (0, -1),
        (1, -1),
        (1, 0),
        (1, 1),
        (0, 1),
        (-1, 1),
        (-1, 0),
        (-1, -1),
    ];
    let (xi, yi) = (x as i64, y as i64);
    let mut out = Vec::new();
    for (dx, dy) in ORDER {
        if !img.fg(xi + dx, yi + dy) {
            continue;
        }
        if dx != 0 && dy != 0 {
            // redundant when a shared orthogonal neighbor is foreground
            if img.fg(xi + dx, yi) || img.fg(xi, yi + dy) {
                continue;
            }
        }
        out.push(((xi + dx) as u32, (yi + dy) as u32));
    }
    out
}

/// Classify every skeleton pixel whose (pruned) neighbor count is 0, 1, 3
/// or 4. Two-neighbor pixels are interior and not reported.
pub fn classify_pixels(sk: &Skeleton) -> Vec<CharPoint> {
    let img = sk.image();
    let mut out = Vec::new();
    for y in 0..img.height() {
        for x in 0..img.width() {
            if !img.get(x, y) {
                continue;
            }
            let kind = match effective_neighbors(img, x, y).len() {
                0 | 1 => Some(PointKind::End),
                3 => Some(PointKind::Branch),
                n if n >= 4 => Some(PointKind::Cross),
                _ => None,
            };
            if let Some(kind) = kind {
                out.push(CharPoint { pos: (x, y), kind });
            }
        }
    }
    out
}

/// Build the segment graph by walking untraversed chains from every node.
/// Pure closed loops get a designated anchor node (topmost, then rightmost
/// pixel) carrying a single self-loop segment.
pub fn extract_segments(sk: &Skeleton, pts: &[CharPoint]) -> Result<SegmentGraph> {
    let img = sk.image();

    // reject pixels that cannot occur in a thin skeleton
    for y in 0..img.height() {
        for x in 0..img.width() {
            if img.get(x, y) {
                let n = img.neighbor_count(x, y);
                if n >= 5 {
                    return Err(Error::MalformedSkeleton { x, y, neighbors: n });
                }
            }
        }
    }

    // merge adjacent characteristic pixels into junction clusters
    let char_set: HashMap<(u32, u32), PointKind> =
        pts.iter().map(|p| (p.pos, p.kind)).collect();
    let mut clustered: HashMap<(u32, u32), usize> = HashMap::new();
    let mut clusters: Vec<Vec<(u32, u32)>> = Vec::new();
    let mut sorted_char: Vec<(u32, u32)> = char_set.keys().cloned().collect();
    sorted_char.sort_by_key(|&(x, y)| (y, x));
    for &start in &sorted_char {
        if clustered.contains_key(&start) {
            continue;
        }
        let cid = clusters.len();
        let mut members = vec![start];
        clustered.insert(start, cid);
        let mut stack = vec![start];
        while let Some((cx, cy)) = stack.pop() {
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let n = ((cx as i64 + dx) as u32, (cy as i64 + dy) as u32);
                    if cx as i64 + dx < 0 || cy as i64 + dy < 0 {
                        continue;
                    }
                    if char_set.contains_key(&n) && !clustered.contains_key(&n) {
                        clustered.insert(n, cid);
                        members.push(n);
                        stack.push(n);
                    }
                }
            }
        }
        members.sort_by_key(|&(x, y)| (y, x));
        clusters.push(members);
    }

    let mut nodes: Vec<Node> = clusters
        .iter()
        .enumerate()
        .map(|(id, members)| {
            let n = members.len() as f64;
            let cx = members.iter().map(|&(x, _)| x as f64).sum::<f64>() / n;
            let cy = members.iter().map(|&(_, y)| y as f64).sum::<f64>() / n;
            let kind = if members.len() == 1 {
                char_set[&members[0]]
            } else {
                PointKind::Branch // refined from degree after extraction
            };
            Node {
                id,
                pos: Point::new(cx, cy),
                kind,
                pixels: members.clone(),
            }
        })
        .collect();
    let mut node_of: HashMap<(u32, u32), usize> = clustered;

    let mut visited: HashMap<(u32, u32), bool> = HashMap::new();
    let mut edges: Vec<Segment> = Vec::new();

    for nid in 0..nodes.len() {
        let members = nodes[nid].pixels.clone();
        for &m in &members {
            for s in effective_neighbors(img, m.0, m.1) {
                if node_of.contains_key(&s) || visited.contains_key(&s) {
                    continue;
                }
                let mut chain = vec![m, s];
                visited.insert(s, true);
                let mut prev = m;
                let mut cur = s;
                let end_node;
                loop {
                    let nexts: Vec<(u32, u32)> = effective_neighbors(img, cur.0, cur.1)
                        .into_iter()
                        .filter(|&n| n != prev)
                        .collect();
                    let Some(&next) = nexts.first() else {
                        // an unclassified dead end; treat the pixel itself
                        // as a degenerate end node
                        let id = nodes.len();
                        nodes.push(Node {
                            id,
                            pos: Point::new(cur.0 as f64, cur.1 as f64),
                            kind: PointKind::End,
                            pixels: vec![cur],
                        });
                        node_of.insert(cur, id);
                        end_node = id;
                        break;
                    };
                    chain.push(next);
                    if let Some(&end) = node_of.get(&next) {
                        end_node = end;
                        break;
                    }
                    visited.insert(next, true);
                    prev = cur;
                    cur = next;
                }
                edges.push(Segment {
                    id: edges.len(),
                    chain,
                    ends: (nid, end_node),
                    kind: SegmentKind::Link,
                });
            }
        }
    }

    // leftover pixels form pure closed loops
    let mut leftover: Vec<(u32, u32)> = Vec::new();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let p = (x, y);
            if img.get(x, y) && !visited.contains_key(&p) && !node_of.contains_key(&p) {
                leftover.push(p);
            }
        }
    }
    let leftover_set: std::collections::HashSet<(u32, u32)> = leftover.iter().cloned().collect();
    let mut loop_seen: std::collections::HashSet<(u32, u32)> = Default::default();
    for &p in &leftover {
        if loop_seen.contains(&p) {
            continue;
        }
        // collect this loop component
        let mut comp = vec![p];
        loop_seen.insert(p);
        let mut stack = vec![p];
        while let Some(c) = stack.pop() {
            for n in effective_neighbors(img, c.0, c.1) {
                if leftover_set.contains(&n) && !loop_seen.contains(&n) {
                    loop_seen.insert(n);
                    comp.push(n);
                    stack.push(n);
                }
            }
        }
        // anchor: topmost, then rightmost
        let &anchor = comp
            .iter()
            .min_by_key(|&&(x, y)| (y, std::cmp::Reverse(x)))
            .unwrap();
        let id = nodes.len();
        nodes.push(Node {
            id,
            pos: Point::new(anchor.0 as f64, anchor.1 as f64),
            kind: PointKind::Loop,
            pixels: vec![anchor],
        });
        node_of.insert(anchor, id);
        if comp.len() == 1 {
            continue; // a lone 2-neighbor pixel cannot happen; guard anyway
        }
        let nbrs = effective_neighbors(img, anchor.0, anchor.1);
        let mut chain = vec![anchor, nbrs[0]];
        let mut prev = anchor;
        let mut cur = nbrs[0];
        while cur != anchor {
            let nexts: Vec<(u32, u32)> = effective_neighbors(img, cur.0, cur.1)
                .into_iter()
                .filter(|&n| n != prev)
                .collect();
            let next = nexts[0];
            chain.push(next);
            prev = cur;
            cur = next;
        }
        edges.push(Segment {
            id: edges.len(),
            chain,
            ends: (id, id),
            kind: SegmentKind::Link,
        });
    }

    let mut graph = SegmentGraph { nodes, edges };
    // refine merged-cluster kinds from their final degree
    for nid in 0..graph.nodes.len() {
        if graph.nodes[nid].pixels.len() > 1 {
            graph.nodes[nid].kind = match graph.degree(nid) {
                0 | 1 => PointKind::End,
                2 | 3 => PointKind::Branch,
                _ => PointKind::Cross,
            };
        }
    }
    Ok(graph)
}

/// Assign segment kinds: terminal segments touch an end node; of the rest,
/// those on a cycle are occlusion contours, the others plain links.
pub fn classify_segment_types(mut g: SegmentGraph) -> SegmentGraph {
    let bridges = find_bridges(&g);
    for e in &mut g.edges {
        let touches_end = g.nodes[e.ends.0].kind == PointKind::End
            || g.nodes[e.ends.1].kind == PointKind::End;
        e.kind = if touches_end {
            SegmentKind::Terminal
        } else if e.is_self_loop() || !bridges[e.id] {
            SegmentKind::Occlusion
        } else {
            SegmentKind::Link
        };
    }
    g
}

/// Bridge detection on the multigraph (iterative lowlink). Self-loops and
/// parallel edges are never bridges.
fn find_bridges(g: &SegmentGraph) -> Vec<bool> {
    let n = g.nodes.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (neighbor, edge id)
    for e in &g.edges {
        if e.is_self_loop() {
            continue;
        }
        adj[e.ends.0].push((e.ends.1, e.id));
        adj[e.ends.1].push((e.ends.0, e.id));
    }
    let mut bridge = vec![false; g.edges.len()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0usize;

    for start in 0..n {
        if disc[start] != usize::MAX {
            continue;
        }
        // iterative DFS: (node, parent edge, next child index)
        let mut stack: Vec<(usize, usize, usize)> = vec![(start, usize::MAX, 0)];
        disc[start] = timer;
        low[start] = timer;
        timer += 1;
        while let Some(&mut (u, pe, ref mut ci)) = stack.last_mut() {
            if *ci < adj[u].len() {
                let (v, eid) = adj[u][*ci];
                *ci += 1;
                if eid == pe {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, eid, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&mut (parent, _, _)) = stack.last_mut() {
                    low[parent] = low[parent].min(low[u]);
                    if low[u] > disc[parent] {
                        bridge[pe] = true;
                    }
                }
            }
        }
    }
    bridge
}
