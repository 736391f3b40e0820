//! Beta-elliptic stroke model: a simple movement is a bell-shaped velocity
//! bump in time (the beta profile) paired with an elliptic arc in space.
//!
//! A velocity profile is segmented into strokes at local minima, each stroke
//! gets a beta profile fitted by nonlinear least squares and an ellipse
//! fitted to its spatial span, and a word becomes an ordered sequence of
//! strokes that can be resampled back into a velocity profile and a trace.

mod fit;

pub use fit::{
    fit_beta, fit_ellipse, fit_word, fit_word_spans, sse, sse_gradient, BetaFit, EllipseFit,
    FitOptions, WordFit,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::recovery::VelocityProfile;

/// Parameters of one beta velocity bump.
///
/// The bump is supported on `[t0, t1]`, peaks with amplitude `k` at the
/// inflexion time `t_c = (p*t1 + q*t0) / (p + q)`, and is zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub t0: f64,
    pub t1: f64,
    pub p: f64,
    pub q: f64,
    pub k: f64,
}

impl BetaParams {
    pub fn new(t0: f64, t1: f64, p: f64, q: f64, k: f64) -> Result<Self> {
        let bp = BetaParams { t0, t1, p, q, k };
        bp.validate()?;
        Ok(bp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 < self.t1) {
            return Err(Error::invalid(format!(
                "beta support is empty: t0 {} >= t1 {}",
                self.t0, self.t1
            )));
        }
        if self.p <= 0.0 || self.q <= 0.0 || self.k <= 0.0 {
            return Err(Error::invalid("beta parameters p, q, k must be positive"));
        }
        if !(self.t0.is_finite() && self.t1.is_finite() && self.p.is_finite() && self.q.is_finite())
        {
            return Err(Error::invalid("beta parameters must be finite"));
        }
        Ok(())
    }

    /// Instant where the bump reaches its amplitude.
    pub fn inflexion_time(&self) -> f64 {
        (self.p * self.t1 + self.q * self.t0) / (self.p + self.q)
    }

    /// Velocity contribution at time `t`; zero outside `[t0, t1]`.
    pub fn eval(&self, t: f64) -> f64 {
        if t < self.t0 || t > self.t1 {
            return 0.0;
        }
        let tc = self.inflexion_time();
        let a = (t - self.t0) / (tc - self.t0);
        let b = (self.t1 - t) / (self.t1 - tc);
        self.k * a.powf(self.p) * b.powf(self.q)
    }
}

/// Geometric ellipse: semi-axes `a >= b`, orientation `theta` in `[0, pi)`,
/// and center `(cx, cy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseParams {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub cx: f64,
    pub cy: f64,
}

impl EllipseParams {
    pub fn new(a: f64, b: f64, theta: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::invalid("ellipse axes must be positive"));
        }
        let (a, b, theta) = if a >= b {
            (a, b, theta)
        } else {
            (b, a, theta + std::f64::consts::FRAC_PI_2)
        };
        Ok(EllipseParams {
            a,
            b,
            theta: normalize_theta(theta),
            cx,
            cy,
        })
    }

    /// Point at parametric angle `angle`: center + R(theta) * (a cos, b sin).
    pub fn point(&self, angle: f64) -> Point {
        let (sa, ca) = (angle.sin(), angle.cos());
        let (st, ct) = (self.theta.sin(), self.theta.cos());
        let px = self.a * ca;
        let py = self.b * sa;
        Point::new(self.cx + ct * px - st * py, self.cy + st * px + ct * py)
    }

    /// Map a point into the axis-aligned ellipse frame.
    pub fn to_frame(&self, p: Point) -> Point {
        let dx = p.x - self.cx;
        let dy = p.y - self.cy;
        let (st, ct) = (self.theta.sin(), self.theta.cos());
        Point::new(ct * dx + st * dy, -st * dx + ct * dy)
    }

    /// Implicit-equation residual `X^2/a^2 + Y^2/b^2 - 1` in the ellipse frame.
    pub fn frame_residual(&self, p: Point) -> f64 {
        let f = self.to_frame(p);
        f.x * f.x / (self.a * self.a) + f.y * f.y / (self.b * self.b) - 1.0
    }

    /// Parametric angle of (the projection of) a point in the ellipse frame.
    pub fn angle_of(&self, p: Point) -> f64 {
        let f = self.to_frame(p);
        (f.y / self.b).atan2(f.x / self.a)
    }

    /// Arc length between parametric angles, by fine chord summation.
    pub fn arc_length(&self, from: f64, to: f64) -> f64 {
        let steps = 256;
        let mut len = 0.0;
        let mut prev = self.point(from);
        for i in 1..=steps {
            let t = from + (to - from) * i as f64 / steps as f64;
            let p = self.point(t);
            len += prev.dist(&p);
            prev = p;
        }
        len
    }
}

/// Normalize an orientation angle into `[0, pi)`.
pub fn normalize_theta(theta: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let mut t = theta % pi;
    if t < 0.0 {
        t += pi;
    }
    if t >= pi {
        t -= pi;
    }
    t
}

/// One stroke: beta bump in time, elliptic arc in space.
///
/// `arc` holds the entry and exit parametric angles on the ellipse; the exit
/// angle is not wrapped, so the signed sweep is `arc.1 - arc.0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stroke {
    pub beta: BetaParams,
    pub ellipse: EllipseParams,
    pub arc: (f64, f64),
}

impl Stroke {
    /// Midpoint of the elliptic arc.
    pub fn arc_midpoint(&self) -> Point {
        self.ellipse.point(0.5 * (self.arc.0 + self.arc.1))
    }

    /// Midpoint of the chord between the arc's entry and exit points.
    pub fn chord_midpoint(&self) -> Point {
        let a = self.ellipse.point(self.arc.0);
        let b = self.ellipse.point(self.arc.1);
        Point::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y))
    }
}

/// Flat serialized form of a stroke; field order is the file contract.
#[derive(Serialize, Deserialize)]
struct StrokeRecord {
    t0: f64,
    t1: f64,
    p: f64,
    q: f64,
    k: f64,
    theta: f64,
    a: f64,
    b: f64,
    cx: f64,
    cy: f64,
    arc0: f64,
    arc1: f64,
}

impl Serialize for Stroke {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StrokeRecord {
            t0: self.beta.t0,
            t1: self.beta.t1,
            p: self.beta.p,
            q: self.beta.q,
            k: self.beta.k,
            theta: self.ellipse.theta,
            a: self.ellipse.a,
            b: self.ellipse.b,
            cx: self.ellipse.cx,
            cy: self.ellipse.cy,
            arc0: self.arc.0,
            arc1: self.arc.1,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Stroke {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = StrokeRecord::deserialize(d)?;
        Ok(Stroke {
            beta: BetaParams {
                t0: r.t0,
                t1: r.t1,
                p: r.p,
                q: r.q,
                k: r.k,
            },
            ellipse: EllipseParams {
                a: r.a,
                b: r.b,
                theta: r.theta,
                cx: r.cx,
                cy: r.cy,
            },
            arc: (r.arc0, r.arc1),
        })
    }
}

/// A word as an ordered sequence of strokes. Stroke supports may overlap;
/// start times are non-decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaEllipticModel {
    pub strokes: Vec<Stroke>,
}

impl BetaEllipticModel {
    pub fn new(mut strokes: Vec<Stroke>) -> Result<Self> {
        if strokes.is_empty() {
            return Err(Error::invalid("model needs at least one stroke"));
        }
        for s in &strokes {
            s.beta.validate()?;
        }
        strokes.sort_by(|a, b| a.beta.t0.total_cmp(&b.beta.t0));
        Ok(BetaEllipticModel { strokes })
    }

    pub fn time_span(&self) -> (f64, f64) {
        let t0 = self
            .strokes
            .iter()
            .map(|s| s.beta.t0)
            .fold(f64::INFINITY, f64::min);
        let t1 = self
            .strokes
            .iter()
            .map(|s| s.beta.t1)
            .fold(f64::NEG_INFINITY, f64::max);
        (t0, t1)
    }

    /// Superposed velocity of all strokes at time `t`.
    pub fn velocity_at(&self, t: f64) -> f64 {
        self.strokes.iter().map(|s| s.beta.eval(t)).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: BetaEllipticModel = serde_json::from_str(text)?;
        BetaEllipticModel::new(model.strokes)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Split a velocity profile into stroke spans at the local minima of the
/// smoothed profile. Pen-up zeros always bound spans; each span holds
/// exactly one interior maximum. Profiles shorter than 4 samples fall back
/// to a single span.
pub fn segment_strokes(vp: &VelocityProfile, smooth_window: usize) -> Vec<(usize, usize)> {
    segment_strokes_opt(vp, smooth_window, DEFAULT_VALLEY_FRAC)
}

/// Segment into exactly `k` spans per pen-down run budget, keeping the
/// deepest valleys first. Falls back to fewer spans when a run has fewer
/// candidate boundaries.
pub fn segment_strokes_forced(
    vp: &VelocityProfile,
    smooth_window: usize,
    k: usize,
) -> Vec<(usize, usize)> {
    let n = vp.v.len();
    if n == 0 {
        return Vec::new();
    }
    if n < 4 || k <= 1 {
        return vec![(0, n - 1)];
    }
    let smoothed = moving_average(&vp.v, smooth_window);
    let mut spans = Vec::new();
    for (run_start, run_end) in vp.pen_down_runs() {
        if run_end <= run_start + 2 {
            spans.push((run_start, run_end));
            continue;
        }
        let s = &smoothed[run_start..=run_end];
        let peaks = local_maxima(s);
        let mut bounds: Vec<(f64, usize)> = Vec::new(); // (valley value, index)
        for w in peaks.windows(2) {
            let (m1, m2) = (w[0], w[1]);
            let mut valley = m1 + 1;
            for i in m1 + 1..m2 {
                if s[i] < s[valley] {
                    valley = i;
                }
            }
            bounds.push((s[valley], valley));
        }
        bounds.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut keep: Vec<usize> = bounds.iter().take(k.saturating_sub(1)).map(|&(_, i)| i).collect();
        keep.sort_unstable();
        let mut start = run_start;
        for b in keep {
            spans.push((start, run_start + b));
            start = run_start + b;
        }
        spans.push((start, run_end));
    }
    spans
}

/// Fraction of the smaller neighboring peak a valley must stay below for a
/// boundary to survive merging.
pub const DEFAULT_VALLEY_FRAC: f64 = 0.55;

pub fn segment_strokes_opt(
    vp: &VelocityProfile,
    smooth_window: usize,
    valley_frac: f64,
) -> Vec<(usize, usize)> {
    let n = vp.v.len();
    if n == 0 {
        return Vec::new();
    }
    if n < 4 {
        return vec![(0, n - 1)];
    }
    let smoothed = moving_average(&vp.v, smooth_window);
    let mut spans = Vec::new();
    for (run_start, run_end) in vp.pen_down_runs() {
        if run_end < run_start {
            continue;
        }
        if run_end - run_start < 3 {
            spans.push((run_start, run_end));
            continue;
        }
        let s = &smoothed[run_start..=run_end];
        let peaks = local_maxima(s);
        if peaks.len() <= 1 {
            spans.push((run_start, run_end));
            continue;
        }
        // candidate boundaries between consecutive peaks
        let mut bounds: Vec<usize> = Vec::new();
        for w in peaks.windows(2) {
            let (m1, m2) = (w[0], w[1]);
            let mut valley = m1 + 1;
            for i in m1 + 1..m2 {
                if s[i] < s[valley] {
                    valley = i;
                }
            }
            bounds.push(valley);
        }
        // merge across shallow valleys: a boundary survives only while its
        // valley is clearly below both adjacent span maxima
        loop {
            if bounds.is_empty() {
                break;
            }
            let mut edges = vec![0usize];
            edges.extend(bounds.iter().cloned());
            edges.push(s.len() - 1);
            let span_max = |a: usize, b: usize| -> f64 {
                s[a..=b].iter().cloned().fold(f64::MIN, f64::max)
            };
            let mut worst: Option<(usize, f64)> = None;
            for (bi, &b) in bounds.iter().enumerate() {
                let left_max = span_max(edges[bi], b);
                let right_max = span_max(b, edges[bi + 2]);
                let ratio = s[b] / left_max.min(right_max).max(1e-12);
                if worst.map(|(_, r)| ratio > r).unwrap_or(true) {
                    worst = Some((bi, ratio));
                }
            }
            match worst {
                Some((bi, ratio)) if ratio > valley_frac => {
                    bounds.remove(bi);
                }
                _ => break,
            }
        }
        // merge spans too short to carry a stroke into their neighbors,
        // dropping the shallower of the two boundaries first
        const MIN_SPAN: usize = 6;
        loop {
            if bounds.is_empty() {
                break;
            }
            let mut edges = vec![0usize];
            edges.extend(bounds.iter().cloned());
            edges.push(s.len() - 1);
            let lengths: Vec<usize> = edges.windows(2).map(|w| w[1] - w[0]).collect();
            let Some(short) = (0..lengths.len()).filter(|&i| lengths[i] < MIN_SPAN).min_by_key(|&i| lengths[i]) else {
                break;
            };
            // remove the boundary on the side with the shallower valley
            let left_b = short.checked_sub(1);
            let right_b = if short < bounds.len() { Some(short) } else { None };
            let drop = match (left_b, right_b) {
                (Some(l), Some(r)) => {
                    if s[bounds[l]] >= s[bounds[r]] { l } else { r }
                }
                (Some(l), None) => l,
                (None, Some(r)) => r,
                (None, None) => break,
            };
            bounds.remove(drop);
        }
        let mut start = run_start;
        for &b in &bounds {
            let boundary = run_start + b;
            spans.push((start, boundary));
            start = boundary;
        }
        spans.push((start, run_end));
    }
    if spans.is_empty() {
        vec![(0, n - 1)]
    } else {
        spans
    }
}

/// Indices of local maxima, with plateau handling and a small relative
/// prominence floor to ignore numeric ripple.
fn local_maxima(s: &[f64]) -> Vec<usize> {
    let n = s.len();
    let max_v = s.iter().cloned().fold(0.0f64, f64::max);
    let floor = 0.01 * max_v;
    let mut peaks = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if s[i] > s[i - 1] {
            // climb to the end of any plateau
            let mut j = i;
            while j + 1 < n && s[j + 1] == s[j] {
                j += 1;
            }
            if j + 1 < n && s[j + 1] < s[j] && s[i] > floor {
                peaks.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Centered moving average; window is clamped to odd and to the signal ends.
pub fn moving_average(v: &[f64], window: usize) -> Vec<f64> {
    let n = v.len();
    let half = (window.max(1) / 2) as i64;
    (0..n as i64)
        .map(|i| {
            let lo = (i - half).max(0) as usize;
            let hi = ((i + half) as usize).min(n - 1);
            v[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Rebuild the superposed velocity profile and the spatial trace of a model.
///
/// The velocity is sampled on `n` uniform instants across the model's time
/// span. The trace concatenates each stroke's elliptic arc, walked so the
/// arc-length step follows that stroke's beta velocity.
pub fn reconstruct(model: &BetaEllipticModel, n: usize) -> Result<(VelocityProfile, Vec<Point>)> {
    if n < 2 {
        return Err(Error::invalid("reconstruction needs at least 2 samples"));
    }
    let (t_min, t_max) = model.time_span();
    let dt = (t_max - t_min) / (n - 1) as f64;
    let v: Vec<f64> = (0..n).map(|i| model.velocity_at(t_min + i as f64 * dt)).collect();

    let total_span = t_max - t_min;
    let mut trace = Vec::new();
    for stroke in &model.strokes {
        let frac = (stroke.beta.t1 - stroke.beta.t0) / total_span;
        let m = ((n as f64 * frac).round() as usize).max(2);
        let pts = sample_arc_by_velocity(stroke, m);
        if trace.is_empty() {
            trace.extend(pts);
        } else {
            // skip the duplicated junction point
            trace.extend(pts.into_iter().skip(1));
        }
    }
    Ok((VelocityProfile { v, breaks: vec![] }, trace))
}

/// `m` points along the stroke's arc, spaced so consecutive arc-length steps
/// are proportional to the beta velocity at uniform time steps.
pub fn sample_arc_by_velocity(stroke: &Stroke, m: usize) -> Vec<Point> {
    let bp = &stroke.beta;
    let steps = 512;
    // cumulative velocity integral over the stroke support
    let dt = (bp.t1 - bp.t0) / steps as f64;
    let mut cum = Vec::with_capacity(steps + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for i in 0..steps {
        let ta = bp.t0 + i as f64 * dt;
        let tb = ta + dt;
        acc += 0.5 * (bp.eval(ta) + bp.eval(tb)) * dt;
        cum.push(acc);
    }
    let total = acc.max(1e-30);

    // cumulative arc length along the elliptic arc
    let (a0, a1) = stroke.arc;
    let mut arc_cum = Vec::with_capacity(steps + 1);
    arc_cum.push(0.0);
    let mut arc_acc = 0.0;
    let mut prev = stroke.ellipse.point(a0);
    for i in 1..=steps {
        let phi = a0 + (a1 - a0) * i as f64 / steps as f64;
        let p = stroke.ellipse.point(phi);
        arc_acc += prev.dist(&p);
        arc_cum.push(arc_acc);
        prev = p;
    }
    let arc_total = arc_acc.max(1e-30);

    let mut pts = Vec::with_capacity(m);
    for j in 0..m {
        let t = bp.t0 + (bp.t1 - bp.t0) * j as f64 / (m - 1) as f64;
        // velocity fraction covered by time t
        let idx = ((t - bp.t0) / dt).floor().clamp(0.0, (steps - 1) as f64) as usize;
        let frac_t = (t - (bp.t0 + idx as f64 * dt)) / dt;
        let covered = cum[idx] + frac_t * (cum[idx + 1] - cum[idx]);
        let target = covered / total * arc_total;
        // invert the arc-length table
        let k = arc_cum.partition_point(|&c| c < target).min(steps);
        let phi = if k == 0 {
            a0
        } else {
            let seg = (arc_cum[k] - arc_cum[k - 1]).max(1e-30);
            let f = (target - arc_cum[k - 1]) / seg;
            a0 + (a1 - a0) * ((k - 1) as f64 + f) / steps as f64
        };
        pts.push(stroke.ellipse.point(phi));
    }
    pts
}

/// Signal-to-noise ratio in dB of `rebuilt` against `reference`.
pub fn snr_db(reference: &[f64], rebuilt: &[f64]) -> f64 {
    let n = reference.len().min(rebuilt.len());
    let signal: f64 = reference[..n].iter().map(|v| v * v).sum();
    let noise: f64 = reference[..n]
        .iter()
        .zip(&rebuilt[..n])
        .map(|(r, e)| (r - e) * (r - e))
        .sum();
    if noise <= 0.0 {
        return f64::INFINITY;
    }
    10.0 * (signal / noise).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn beta_peak_is_amplitude() {
        let bp = BetaParams::new(0.0, 2.0, 1.7, 2.4, 1.0).unwrap();
        assert_relative_eq!(bp.eval(bp.inflexion_time()), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn beta_outside_support_is_zero() {
        let bp = BetaParams::new(0.0, 2.0, 2.0, 2.0, 3.0).unwrap();
        assert_eq!(bp.eval(2.5), 0.0);
        assert_eq!(bp.eval(-0.1), 0.0);
    }

    #[test]
    fn beta_hand_evaluated_point() {
        // p = q = 1, t0 = 0, t1 = 2 -> tc = 1; at t = 0.5: (0.5/1)*(1.5/1)
        let bp = BetaParams::new(0.0, 2.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(bp.eval(0.5), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn inflexion_symmetric_and_weighted() {
        let sym = BetaParams::new(1.0, 5.0, 2.5, 2.5, 1.0).unwrap();
        assert_relative_eq!(sym.inflexion_time(), 3.0, epsilon = 1e-12);
        let right = BetaParams::new(0.0, 4.0, 3.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(right.inflexion_time(), 3.0, epsilon = 1e-12);
        let left = BetaParams::new(0.0, 4.0, 1.0, 3.0, 1.0).unwrap();
        assert_relative_eq!(left.inflexion_time(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn beta_rejects_bad_params() {
        assert!(BetaParams::new(1.0, 1.0, 2.0, 2.0, 1.0).is_err());
        assert!(BetaParams::new(0.0, 1.0, -2.0, 2.0, 1.0).is_err());
        assert!(BetaParams::new(0.0, 1.0, 2.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn ellipse_axis_points() {
        let e = EllipseParams::new(3.0, 1.5, 0.0, 0.0, 0.0).unwrap();
        let p = e.point(0.0);
        assert_relative_eq!(p.x, 3.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 0.0, epsilon = 1e-12);
        let p = e.point(std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn ellipse_rotated_axis_point() {
        // a=2, b=1, theta=pi/2: the (a, 0) axis point rotates to (0, 2)
        let e = EllipseParams::new(2.0, 1.0, std::f64::consts::FRAC_PI_2, 0.0, 0.0).unwrap();
        let p = e.point(0.0);
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ellipse_points_satisfy_frame_equation() {
        let e = EllipseParams::new(5.0, 2.0, 0.3, 1.0, 1.0).unwrap();
        for i in 0..32 {
            let phi = i as f64 * 0.2;
            assert!(e.frame_residual(e.point(phi)).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_grid_argmax_matches_inflexion_time() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let t0 = rng.gen_range(-3.0..3.0);
            let t1 = t0 + rng.gen_range(0.5..6.0);
            let p = rng.gen_range(0.5..5.0);
            let q = rng.gen_range(0.5..5.0);
            let bp = BetaParams::new(t0, t1, p, q, rng.gen_range(0.1..4.0)).unwrap();
            let step = 1e-3 * (t1 - t0);
            let mut best_t = t0;
            let mut best_v = -1.0;
            let mut t = t0;
            while t <= t1 {
                let v = bp.eval(t);
                if v > best_v {
                    best_v = v;
                    best_t = t;
                }
                t += step;
            }
            assert!(
                (best_t - bp.inflexion_time()).abs() <= step + 1e-12,
                "argmax {} vs tc {}",
                best_t,
                bp.inflexion_time()
            );
        }
    }

    #[test]
    fn beta_symmetry_when_p_equals_q() {
        let bp = BetaParams::new(-1.0, 3.0, 2.3, 2.3, 1.5).unwrap();
        let tc = bp.inflexion_time();
        for i in 1..20 {
            let d = i as f64 * 0.09;
            assert_relative_eq!(bp.eval(tc + d), bp.eval(tc - d), epsilon = 1e-12);
        }
    }

    #[test]
    fn beta_unimodal_on_dense_grid() {
        let bp = BetaParams::new(0.0, 5.0, 1.2, 3.4, 2.0).unwrap();
        let tc = bp.inflexion_time();
        let n = 2000;
        let mut prev = bp.eval(0.0);
        for i in 1..=n {
            let t = 5.0 * i as f64 / n as f64;
            let v = bp.eval(t);
            if t < tc {
                assert!(v >= prev, "must rise before tc (t = {t})");
            } else if prev > 0.0 && t > tc + 5.0 / n as f64 {
                assert!(v <= prev, "must fall after tc (t = {t})");
            }
            prev = v;
        }
    }

    #[test]
    fn segment_single_bump_is_one_span() {
        let bp = BetaParams::new(0.0, 20.0, 2.0, 2.0, 1.0).unwrap();
        let v: Vec<f64> = (0..21).map(|i| bp.eval(i as f64)).collect();
        let vp = VelocityProfile { v, breaks: vec![] };
        let spans = segment_strokes(&vp, 5);
        assert_eq!(spans, vec![(0, 20)]);
    }

    #[test]
    fn segment_two_bumps_split_at_dip() {
        let b1 = BetaParams::new(0.0, 20.0, 2.0, 2.0, 1.0).unwrap();
        let b2 = BetaParams::new(18.0, 38.0, 2.0, 2.0, 1.0).unwrap();
        let v: Vec<f64> = (0..39).map(|i| b1.eval(i as f64) + b2.eval(i as f64)).collect();
        let vp = VelocityProfile { v, breaks: vec![] };
        let spans = segment_strokes(&vp, 3);
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[0].0, 0);
        assert_eq!(spans[1].1, 38);
        assert_eq!(spans[0].1, spans[1].0);
        // the shared boundary sits in the dip between the bumps
        assert!(spans[0].1 > 14 && spans[0].1 < 24);
    }

    #[test]
    fn segment_three_overlapped_bumps_maxima_near_inflexions() {
        let bumps = [
            BetaParams::new(0.0, 24.0, 2.0, 2.0, 1.0).unwrap(),
            BetaParams::new(16.0, 40.0, 2.0, 2.0, 1.3).unwrap(),
            BetaParams::new(32.0, 56.0, 2.0, 2.0, 0.9).unwrap(),
        ];
        let v: Vec<f64> = (0..57)
            .map(|i| bumps.iter().map(|b| b.eval(i as f64)).sum())
            .collect();
        let vp = VelocityProfile { v: v.clone(), breaks: vec![] };
        let spans = segment_strokes(&vp, 5);
        assert_eq!(spans.len(), 3);
        for (span, bump) in spans.iter().zip(&bumps) {
            let (s, e) = *span;
            let argmax = (s..=e).max_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap();
            let tc = bump.inflexion_time();
            assert!(
                (argmax as f64 - tc).abs() <= 2.0,
                "span max {argmax} vs tc {tc}"
            );
        }
    }

    #[test]
    fn segment_short_profile_single_span() {
        let vp = VelocityProfile {
            v: vec![1.0, 2.0, 1.0],
            breaks: vec![],
        };
        assert_eq!(segment_strokes(&vp, 5), vec![(0, 2)]);
    }

    #[test]
    fn reconstruct_single_stroke_velocity_is_its_beta() {
        let stroke = Stroke {
            beta: BetaParams::new(0.0, 10.0, 2.0, 2.0, 3.0).unwrap(),
            ellipse: EllipseParams::new(5.0, 2.0, 0.1, 0.0, 0.0).unwrap(),
            arc: (0.0, 1.2),
        };
        let model = BetaEllipticModel::new(vec![stroke]).unwrap();
        let (vp, trace) = reconstruct(&model, 101).unwrap();
        for (i, &v) in vp.v.iter().enumerate() {
            let t = 10.0 * i as f64 / 100.0;
            assert_relative_eq!(v, stroke.beta.eval(t), epsilon = 1e-12);
        }
        assert!(trace.len() >= 2);
    }

    #[test]
    fn reconstruct_disjoint_strokes_superpose_with_gap() {
        let s1 = Stroke {
            beta: BetaParams::new(0.0, 4.0, 2.0, 2.0, 1.0).unwrap(),
            ellipse: EllipseParams::new(3.0, 1.0, 0.0, 0.0, 0.0).unwrap(),
            arc: (0.0, 1.0),
        };
        let s2 = Stroke {
            beta: BetaParams::new(6.0, 10.0, 2.0, 2.0, 1.0).unwrap(),
            ellipse: EllipseParams::new(3.0, 1.0, 0.0, 10.0, 0.0).unwrap(),
            arc: (0.0, 1.0),
        };
        let model = BetaEllipticModel::new(vec![s1, s2]).unwrap();
        let (vp, _) = reconstruct(&model, 101).unwrap();
        // t = 5.0 is sample 50; both bumps are zero there
        assert_eq!(vp.v[50], 0.0);
        assert!(vp.v[20] > 0.0);
        assert!(vp.v[80] > 0.0);
    }

    #[test]
    fn reconstruct_rejects_tiny_sample_count() {
        let stroke = Stroke {
            beta: BetaParams::new(0.0, 1.0, 2.0, 2.0, 1.0).unwrap(),
            ellipse: EllipseParams::new(1.0, 0.5, 0.0, 0.0, 0.0).unwrap(),
            arc: (0.0, 1.0),
        };
        let model = BetaEllipticModel::new(vec![stroke]).unwrap();
        assert!(matches!(reconstruct(&model, 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn model_json_roundtrip_and_field_order() {
        let stroke = Stroke {
            beta: BetaParams::new(0.0, 1.0, 2.0, 2.5, 1.25).unwrap(),
            ellipse: EllipseParams::new(4.0, 2.0, 0.7, 3.0, -1.0).unwrap(),
            arc: (0.25, 1.75),
        };
        let model = BetaEllipticModel::new(vec![stroke]).unwrap();
        let json = model.to_json().unwrap();
        let back = BetaEllipticModel::from_json(&json).unwrap();
        assert_eq!(model, back);
        // stable field order
        let t0_pos = json.find("\"t0\"").unwrap();
        let arc1_pos = json.find("\"arc1\"").unwrap();
        assert!(t0_pos < arc1_pos);
    }

    #[test]
    fn snr_of_identical_signal_is_infinite() {
        let v = vec![1.0, 2.0, 3.0];
        assert!(snr_db(&v, &v).is_infinite());
        let noisy = vec![1.0, 2.0, 3.1];
        assert!(snr_db(&v, &noisy) > 20.0);
    }
}
