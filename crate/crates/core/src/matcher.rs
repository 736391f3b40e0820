//! Graph-matching recognition: a word is reduced to the sequence of its
//! strokes' middle points, normalized for position and scale, and compared
//! to stored templates by a nearest-point association distance with a
//! penalty on the stroke-count gap.
//!
//! The distance is not symmetric in general and rotation is deliberately
//! not normalized, so matching stays slant-sensitive.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::beta_elliptic::BetaEllipticModel;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::recovery::ResampledTrace;

/// A word reduced to its stroke middle points, in stroke order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryGraph {
    pub nodes: Vec<Point>,
}

impl TrajectoryGraph {
    pub fn new(nodes: Vec<Point>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::invalid("trajectory graph needs at least one node"));
        }
        Ok(TrajectoryGraph { nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Middle points of a model's strokes: on-arc midpoints, or chord
    /// midpoints when raw-span mode is configured.
    pub fn from_model(model: &BetaEllipticModel, source: MiddlePointSource) -> Result<Self> {
        let nodes = model
            .strokes
            .iter()
            .map(|s| match source {
                MiddlePointSource::ArcMidpoint => s.arc_midpoint(),
                MiddlePointSource::RawSpan => s.chord_midpoint(),
            })
            .collect();
        TrajectoryGraph::new(nodes)
    }

    /// Middle points from raw resampled stroke spans (configuration
    /// fallback when arc midpoints are disabled).
    pub fn from_trace_spans(rs: &ResampledTrace, spans: &[(usize, usize)]) -> Result<Self> {
        let nodes = spans
            .iter()
            .filter(|&&(s, e)| e >= s && e < rs.points.len().max(1))
            .map(|&(s, e)| rs.points[(s + e) / 2])
            .collect();
        TrajectoryGraph::new(nodes)
    }
}

/// Where middle points come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiddlePointSource {
    ArcMidpoint,
    RawSpan,
}

/// Translate the centroid to the origin and scale the bounding-box diagonal
/// to one. A single point (or coincident points) maps to the origin
/// unscaled. Rigid translate plus uniform scale only.
pub fn normalize(g: &TrajectoryGraph) -> TrajectoryGraph {
    let n = g.nodes.len() as f64;
    let cx = g.nodes.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = g.nodes.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in &g.nodes {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let diagonal = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
    let scale = if diagonal > 1e-12 { 1.0 / diagonal } else { 1.0 };
    TrajectoryGraph {
        nodes: g
            .nodes
            .iter()
            .map(|p| Point::new((p.x - cx) * scale, (p.y - cy) * scale))
            .collect(),
    }
}

/// Pairing of each node of the smaller graph with its nearest node of the
/// larger one.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    /// `(index into the smaller graph, index into the larger graph)`.
    pub pairs: Vec<(usize, usize)>,
    /// True when `g1` was the smaller (driving) side.
    pub g1_drives: bool,
}

/// Euclidean distance between two associated points.
pub fn point_distance(p1: Point, p2: Point) -> f64 {
    p1.dist(&p2)
}

/// Associate nearest points between normalized graphs. The smaller graph
/// drives (`g1` on ties); ties in distance resolve to the lower index;
/// many-to-one pairings are allowed.
pub fn associate(g1: &TrajectoryGraph, g2: &TrajectoryGraph) -> Association {
    let g1_drives = g1.len() <= g2.len();
    let (small, large) = if g1_drives { (g1, g2) } else { (g2, g1) };
    let pairs = small
        .nodes
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut best = 0usize;
            let mut best_d = f64::MAX;
            for (j, q) in large.nodes.iter().enumerate() {
                let d = point_distance(*p, *q);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            (i, best)
        })
        .collect();
    Association { pairs, g1_drives }
}

/// Distance decomposition between two trajectory graphs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphDistance {
    pub value: f64,
    pub mean_term: f64,
    /// Penalty: the largest associated point distance.
    pub penalty: f64,
    pub size_gap: usize,
}

/// Mean associated-point distance plus the penalty times the stroke-count
/// gap, with `N = min(N1, N2)` associated pairs.
pub fn graph_distance(g1: &TrajectoryGraph, g2: &TrajectoryGraph) -> GraphDistance {
    let assoc = associate(g1, g2);
    let (small, large) = if assoc.g1_drives { (g1, g2) } else { (g2, g1) };
    let dists: Vec<f64> = assoc
        .pairs
        .iter()
        .map(|&(i, j)| point_distance(small.nodes[i], large.nodes[j]))
        .collect();
    let n = dists.len() as f64;
    let mean_term = dists.iter().sum::<f64>() / n;
    let penalty = dists.iter().cloned().fold(0.0f64, f64::max);
    let size_gap = g1.len().abs_diff(g2.len());
    GraphDistance {
        value: mean_term + penalty * size_gap as f64,
        mean_term,
        penalty,
        size_gap,
    }
}

/// Labeled template graphs, kept sorted by label for determinism.
#[derive(Debug, Clone, Default)]
pub struct TemplateStore {
    entries: BTreeMap<String, Vec<TrajectoryGraph>>,
}

impl TemplateStore {
    pub fn new() -> Self {
        TemplateStore::default()
    }

    /// Insert a template under a label; the graph is normalized on entry.
    pub fn insert(&mut self, label: impl Into<String>, graph: &TrajectoryGraph) {
        self.entries
            .entry(label.into())
            .or_default()
            .push(normalize(graph));
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(|v| v.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn templates(&self, label: &str) -> Option<&[TrajectoryGraph]> {
        self.entries.get(label).map(|v| v.as_slice())
    }

    /// Load `<dir>/<label>/*.json` model files as templates.
    pub fn load_dir(dir: &Path, source: MiddlePointSource) -> Result<Self> {
        let mut store = TemplateStore::new();
        let mut label_dirs: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .collect();
        label_dirs.sort_by_key(|e| e.file_name());
        for entry in label_dirs {
            let label = entry.file_name().to_string_lossy().to_string();
            let mut files: Vec<_> = fs::read_dir(entry.path())?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().map(|e| e == "json").unwrap_or(false))
                .collect();
            files.sort();
            for file in files {
                let model = BetaEllipticModel::load(&file)?;
                let graph = TrajectoryGraph::from_model(&model, source)?;
                store.insert(label.clone(), &graph);
            }
        }
        if store.is_empty() {
            return Err(Error::config(format!(
                "no templates found under {}",
                dir.display()
            )));
        }
        Ok(store)
    }

    /// Write `labels.manifest`: one `label<TAB>count` line per label.
    pub fn write_manifest(&self, dir: &Path) -> Result<()> {
        let mut text = String::new();
        for (label, graphs) in &self.entries {
            text.push_str(&format!("{}\t{}\n", label, graphs.len()));
        }
        fs::write(dir.join("labels.manifest"), text)?;
        Ok(())
    }
}

/// Classification outcome.
#[derive(Debug, Clone)]
pub struct Classification {
    pub label: String,
    pub distance: GraphDistance,
    /// Second-best label distance minus best label distance.
    pub margin: f64,
}

/// Distance averaged over both association directions; useful when equal
/// stroke counts make the plain distance direction-dependent.
pub fn graph_distance_symmetric(g1: &TrajectoryGraph, g2: &TrajectoryGraph) -> GraphDistance {
    let forward = graph_distance(g1, g2);
    let backward = graph_distance(g2, g1);
    GraphDistance {
        value: 0.5 * (forward.value + backward.value),
        ..forward
    }
}

/// Label of the minimum-distance template. Per-label distances are the
/// minimum over that label's templates; ties break lexicographically.
pub fn classify(sample: &TrajectoryGraph, store: &TemplateStore) -> Result<Classification> {
    classify_opt(sample, store, false)
}

/// [`classify`] with an optional symmetrized distance.
pub fn classify_opt(
    sample: &TrajectoryGraph,
    store: &TemplateStore,
    symmetrize: bool,
) -> Result<Classification> {
    if store.is_empty() {
        return Err(Error::config("template store is empty"));
    }
    let measure = if symmetrize {
        graph_distance_symmetric
    } else {
        graph_distance
    };
    let normalized = normalize(sample);
    let mut ranked: Vec<(String, GraphDistance)> = Vec::new();
    for (label, graphs) in &store.entries {
        let best = graphs
            .iter()
            .map(|t| measure(&normalized, t))
            .min_by(|a, b| a.value.total_cmp(&b.value))
            .expect("labels always hold at least one template");
        ranked.push((label.clone(), best));
    }
    ranked.sort_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)));
    let (label, distance) = ranked[0].clone();
    let margin = if ranked.len() > 1 {
        ranked[1].1.value - distance.value
    } else {
        f64::INFINITY
    };
    Ok(Classification {
        label,
        distance,
        margin,
    })
}
