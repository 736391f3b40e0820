//! Nonlinear least-squares fitting of beta velocity bumps and direct
//! least-squares ellipse fitting.
//!
//! The beta fit runs Levenberg-Marquardt with an analytic Jacobian over
//! `(t0, t1, ln p, ln q, ln k)`; the log parameterization keeps shape and
//! amplitude positive without explicit bounds. The ellipse fit solves the
//! ellipse-constrained conic eigensystem on the reduced 3x3 problem, with
//! point normalization for conditioning.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::{normalize_theta, BetaEllipticModel, BetaParams, EllipseParams, Stroke};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::recovery::{estimate_velocity, ResampledTrace, VelocityProfile};

/// Options shared by the fitting routines.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Convergence tolerance on the relative residual change.
    pub tol: f64,
    /// Pin the amplitude to k = 1 instead of fitting it.
    pub pin_k: bool,
    /// Smoothing window of the stroke segmentation.
    pub smooth_window: usize,
    /// Valley shallowness above which adjacent stroke spans merge.
    pub valley_frac: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 200,
            tol: 1e-8,
            pin_k: false,
            smooth_window: 5,
            valley_frac: super::DEFAULT_VALLEY_FRAC,
        }
    }
}

/// Result of a beta profile fit.
#[derive(Debug, Clone)]
pub struct BetaFit {
    pub params: BetaParams,
    /// Root-mean-square residual over the fitted span.
    pub rms: f64,
    pub iterations: usize,
}

/// Beta value and its partial derivatives with respect to
/// `(t0, t1, ln p, ln q, ln k)` at time `t`.
fn beta_value_grad(bp: &BetaParams, t: f64) -> (f64, [f64; 5]) {
    if t <= bp.t0 || t >= bp.t1 {
        return (0.0, [0.0; 5]);
    }
    let tc = bp.inflexion_time();
    let a = (t - bp.t0) / (tc - bp.t0);
    let b = (bp.t1 - t) / (bp.t1 - tc);
    let f = bp.k * a.powf(bp.p) * b.powf(bp.q);
    if !f.is_finite() {
        return (0.0, [0.0; 5]);
    }
    let span = bp.t1 - bp.t0;
    let d_t0 = -bp.p / (t - bp.t0) + (bp.p + bp.q) / span;
    let d_t1 = bp.q / (bp.t1 - t) - (bp.p + bp.q) / span;
    let d_lp = bp.p * a.ln();
    let d_lq = bp.q * b.ln();
    (f, [f * d_t0, f * d_t1, f * d_lp, f * d_lq, f])
}

/// Analytic gradient of the sum of squared residuals with respect to
/// `(t0, t1, ln p, ln q, ln k)`; exposed for optimizer sanity checks.
pub fn sse_gradient(bp: &BetaParams, ts: &[f64], vs: &[f64]) -> [f64; 5] {
    let mut g = [0.0; 5];
    for (&t, &v) in ts.iter().zip(vs) {
        let (f, grad) = beta_value_grad(bp, t);
        let r = v - f;
        for (gi, d) in g.iter_mut().zip(grad) {
            *gi += -2.0 * r * d;
        }
    }
    g
}

/// Sum of squared residuals of a candidate parameter set.
pub fn sse(bp: &BetaParams, ts: &[f64], vs: &[f64]) -> f64 {
    ts.iter()
        .zip(vs)
        .map(|(&t, &v)| {
            let r = v - bp.eval(t);
            r * r
        })
        .sum()
}

fn fit_failure(best: BetaParams, rms: f64, iterations: usize) -> Error {
    Error::FitFailure {
        best: Box::new(best),
        rms,
        iterations,
    }
}

/// Fit one beta bump to `vp.v[span.0 ..= span.1]` by Levenberg-Marquardt.
///
/// Initialization: support from the span ends, inflexion from the argmax,
/// `p + q = 4`, amplitude from the peak. Fails (carrying the best-so-far
/// parameters) on degenerate spans, non-convergence, or an inflexion time
/// that escapes the span.
pub fn fit_beta(vp: &VelocityProfile, span: (usize, usize), opts: &FitOptions) -> Result<BetaFit> {
    let (s, e) = span;
    if e >= vp.v.len() || s > e {
        return Err(Error::invalid(format!("span {span:?} out of profile")));
    }
    let ts: Vec<f64> = (s..=e).map(|i| i as f64).collect();
    let vs: Vec<f64> = vp.v[s..=e].to_vec();
    let n = ts.len();
    let vmax = vs.iter().cloned().fold(0.0f64, f64::max);

    let degenerate_params = BetaParams {
        t0: s as f64 - 0.5,
        t1: e as f64 + 0.5,
        p: 2.0,
        q: 2.0,
        k: if opts.pin_k { 1.0 } else { vmax.max(1e-9) },
    };
    if n < 3 || vmax <= 1e-12 {
        let rms = (sse(&degenerate_params, &ts, &vs) / n.max(1) as f64).sqrt();
        return Err(fit_failure(degenerate_params, rms, 0));
    }

    // initial guess
    let argmax = (0..n).max_by(|&i, &j| vs[i].total_cmp(&vs[j])).unwrap();
    let t0_init = ts[0] - 0.5;
    let t1_init = ts[n - 1] + 0.5;
    let ratio = ((ts[argmax] - t0_init) / (t1_init - t0_init)).clamp(0.1, 0.9);
    let p_init = (4.0 * ratio).clamp(0.3, 3.7);
    let q_init = 4.0 - p_init;

    let n_par = if opts.pin_k { 4 } else { 5 };
    let mut theta = vec![t0_init, t1_init, p_init.ln(), q_init.ln()];
    if !opts.pin_k {
        theta.push(vmax.ln());
    }
    let unpack = |th: &[f64]| BetaParams {
        t0: th[0],
        t1: th[1],
        p: th[2].exp(),
        q: th[3].exp(),
        k: if opts.pin_k { 1.0 } else { th[4].exp() },
    };

    let feasible = |th: &[f64]| -> bool {
        let span_ok = th[1] - th[0] > 0.25 && th[0] < ts[n - 1] && th[1] > ts[0];
        let shape_ok = th[2].abs() < 50f64.ln() && th[3].abs() < 50f64.ln();
        let amp_ok = opts.pin_k || (th[4] > (1e-9f64).ln() && th[4] < (1e9f64).ln());
        span_ok && shape_ok && amp_ok
    };

    let mut bp = unpack(&theta);
    let mut current_sse = sse(&bp, &ts, &vs);
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        // Jacobian of the model and residual vector
        let mut jtj = DMatrix::<f64>::zeros(n_par, n_par);
        let mut jtr = DVector::<f64>::zeros(n_par);
        for (&t, &v) in ts.iter().zip(&vs) {
            let (f, grad) = beta_value_grad(&bp, t);
            let r = v - f;
            for i in 0..n_par {
                jtr[i] += grad[i] * r;
                for j in 0..n_par {
                    jtj[(i, j)] += grad[i] * grad[j];
                }
            }
        }
        let mut improved = false;
        for _ in 0..12 {
            let mut damped = jtj.clone();
            for i in 0..n_par {
                damped[(i, i)] += mu * (jtj[(i, i)].max(1e-12));
            }
            let Some(delta) = damped.lu().solve(&jtr) else {
                mu *= 4.0;
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            if !feasible(&trial) {
                mu *= 4.0;
                continue;
            }
            let trial_bp = unpack(&trial);
            let trial_sse = sse(&trial_bp, &ts, &vs);
            if trial_sse < current_sse {
                let rel_drop = (current_sse - trial_sse) / (1.0 + current_sse);
                let theta_norm: f64 = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
                let step = delta.norm();
                theta = trial;
                bp = trial_bp;
                current_sse = trial_sse;
                mu = (mu / 3.0).max(1e-12);
                improved = true;
                // stop only when both the residual and the step stall
                if (rel_drop < opts.tol && step < 1e-6 * (1.0 + theta_norm))
                    || current_sse < 1e-22
                {
                    converged = true;
                }
                break;
            }
            mu *= 4.0;
        }
        if converged {
            break;
        }
        if !improved {
            // stuck: either converged to numerical precision or hopeless
            let grad_norm: f64 = jtr.iter().map(|g| g * g).sum::<f64>().sqrt();
            if grad_norm < 1e-9 * (1.0 + current_sse) {
                converged = true;
            }
            break;
        }
    }

    let rms = (current_sse / n as f64).sqrt();
    if !converged {
        return Err(fit_failure(bp, rms, iterations));
    }
    let tc = bp.inflexion_time();
    if tc < ts[0] - 0.5 || tc > ts[n - 1] + 0.5 {
        return Err(fit_failure(bp, rms, iterations));
    }
    bp.validate()?;
    Ok(BetaFit {
        params: bp,
        rms,
        iterations,
    })
}

/// Result of an ellipse fit.
#[derive(Debug, Clone)]
pub struct EllipseFit {
    pub params: EllipseParams,
    /// Mean absolute implicit-equation residual in the ellipse frame.
    pub residual: f64,
}

/// Direct least-squares ellipse fit over at least five points.
pub fn fit_ellipse(points: &[Point]) -> Result<EllipseFit> {
    let n = points.len();
    if n < 5 {
        return Err(Error::invalid(format!("ellipse fit needs >= 5 points, got {n}")));
    }
    // normalize for conditioning
    let mx = points.iter().map(|p| p.x).sum::<f64>() / n as f64;
    let my = points.iter().map(|p| p.y).sum::<f64>() / n as f64;
    let mean_dist = points
        .iter()
        .map(|p| ((p.x - mx).powi(2) + (p.y - my).powi(2)).sqrt())
        .sum::<f64>()
        / n as f64;
    if mean_dist < 1e-12 {
        return Err(Error::DegenerateGeometry("coincident points".into()));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;

    let mut s1 = Matrix3::<f64>::zeros();
    let mut s2 = Matrix3::<f64>::zeros();
    let mut s3 = Matrix3::<f64>::zeros();
    for p in points {
        let x = (p.x - mx) * s;
        let y = (p.y - my) * s;
        let d1 = Vector3::new(x * x, x * y, y * y);
        let d2 = Vector3::new(x, y, 1.0);
        s1 += d1 * d1.transpose();
        s2 += d1 * d2.transpose();
        s3 += d2 * d2.transpose();
    }
    let s3_inv = s3
        .try_inverse()
        .ok_or_else(|| Error::DegenerateGeometry("degenerate point configuration".into()))?;
    let t = -s3_inv * s2.transpose();
    let m = s1 + s2 * t;
    // C1^{-1} for the constraint 4 a c - b^2 = 1
    let c1_inv = Matrix3::new(0.0, 0.0, 0.5, 0.0, -1.0, 0.0, 0.5, 0.0, 0.0);
    let system = c1_inv * m;

    let a1 = constrained_eigenvector(&system)
        .ok_or_else(|| Error::DegenerateGeometry("no ellipse solution (collinear points?)".into()))?;
    let a2 = t * a1;
    let coeffs_n = [a1[0], a1[1], a1[2], a2[0], a2[1], a2[2]];
    let coeffs = denormalize_conic(&coeffs_n, mx, my, s);
    let params = conic_to_ellipse(&coeffs)
        .ok_or_else(|| Error::DegenerateGeometry("fit is not an ellipse".into()))?;

    let residual = points
        .iter()
        .map(|&p| params.frame_residual(p).abs())
        .sum::<f64>()
        / n as f64;
    Ok(EllipseFit { params, residual })
}

/// Real eigenvector of the 3x3 system satisfying the ellipse constraint
/// `4 a0 a2 - a1^2 > 0`, via the characteristic cubic and adjugate rows.
fn constrained_eigenvector(m: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let tr = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let minor_sum = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)]
        - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)];
    let det = m.determinant();
    let mut best: Option<(f64, Vector3<f64>)> = None;
    for lambda in cubic_roots(1.0, -tr, minor_sum, -det) {
        let shifted = m - Matrix3::identity() * lambda;
        let Some(v) = null_vector(&shifted) else {
            continue;
        };
        let constraint = 4.0 * v[0] * v[2] - v[1] * v[1];
        if constraint > 0.0 {
            let score = lambda.abs();
            if best.as_ref().map(|(b, _)| score < *b).unwrap_or(true) {
                best = Some((score, v));
            }
        }
    }
    best.map(|(_, v)| v)
}

/// Largest-norm adjugate row of a near-singular matrix, i.e. a null vector.
fn null_vector(m: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let rows = [
        Vector3::new(
            m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)],
            -(m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)]),
            m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)],
        ),
        Vector3::new(
            -(m[(0, 1)] * m[(2, 2)] - m[(0, 2)] * m[(2, 1)]),
            m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)],
            -(m[(0, 0)] * m[(2, 1)] - m[(0, 1)] * m[(2, 0)]),
        ),
        Vector3::new(
            m[(0, 1)] * m[(1, 2)] - m[(0, 2)] * m[(1, 1)],
            -(m[(0, 0)] * m[(1, 2)] - m[(0, 2)] * m[(1, 0)]),
            m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        ),
    ];
    let best = rows
        .iter()
        .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))?;
    if best.norm_squared() < 1e-28 {
        return None;
    }
    Some(best / best.norm())
}

/// Real roots of `a x^3 + b x^2 + c x + d = 0`.
fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let b = b / a;
    let c = c / a;
    let d = d / a;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = -4.0 * p * p * p - 27.0 * q * q;
    if disc >= 0.0 {
        let r = (-p / 3.0).sqrt();
        if r < 1e-30 {
            return vec![shift];
        }
        let cos_arg = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0);
        let theta = cos_arg.acos();
        (0..3)
            .map(|k| 2.0 * r * ((theta + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos() + shift)
            .collect()
    } else {
        let sq = (q * q / 4.0 + p * p * p / 27.0).sqrt();
        vec![(-q / 2.0 + sq).cbrt() + (-q / 2.0 - sq).cbrt() + shift]
    }
}

fn denormalize_conic(c: &[f64; 6], mx: f64, my: f64, s: f64) -> [f64; 6] {
    let [a_, b_, c_, d_, e_, f_] = *c;
    let s2 = s * s;
    let a = a_ * s2;
    let b = b_ * s2;
    let cc = c_ * s2;
    let d = -2.0 * a_ * s2 * mx - b_ * s2 * my + d_ * s;
    let e = -b_ * s2 * mx - 2.0 * c_ * s2 * my + e_ * s;
    let f =
        a_ * s2 * mx * mx + b_ * s2 * mx * my + c_ * s2 * my * my - d_ * s * mx - e_ * s * my + f_;
    [a, b, cc, d, e, f]
}

/// General conic coefficients to geometric ellipse parameters.
fn conic_to_ellipse(c: &[f64; 6]) -> Option<EllipseParams> {
    let [a, b, cc, d, e, f] = *c;
    let disc = b * b - 4.0 * a * cc;
    if disc >= 0.0 {
        return None;
    }
    let denom = -disc;
    let cx = (b * e - 2.0 * cc * d) / denom;
    let cy = (b * d - 2.0 * a * e) / denom;
    let theta = if (a - cc).abs() < 1e-15 && b.abs() < 1e-15 {
        0.0
    } else {
        0.5 * b.atan2(a - cc)
    };
    let sum = a + cc;
    let diff = ((a - cc) * (a - cc) + b * b).sqrt();
    let l1 = 0.5 * (sum + diff);
    let l2 = 0.5 * (sum - diff);
    let f_center = a * cx * cx + b * cx * cy + cc * cy * cy + d * cx + e * cy + f;
    if f_center.abs() < 1e-300 {
        return None;
    }
    let a_sq = -f_center / l1;
    let b_sq = -f_center / l2;
    if a_sq <= 0.0 || b_sq <= 0.0 {
        return None;
    }
    // eigenvalue l1 belongs to the minor axis; swap to make a the major
    let (major, minor, mut angle) = if a_sq >= b_sq {
        (a_sq.sqrt(), b_sq.sqrt(), theta)
    } else {
        (b_sq.sqrt(), a_sq.sqrt(), theta + std::f64::consts::FRAC_PI_2)
    };
    angle = normalize_theta(angle);
    Some(EllipseParams {
        a: major,
        b: minor,
        theta: angle,
        cx,
        cy,
    })
}

/// Full word modeling report.
#[derive(Debug, Clone)]
pub struct WordFit {
    pub model: BetaEllipticModel,
    pub velocity: VelocityProfile,
    pub spans: Vec<(usize, usize)>,
    /// Velocity reconstruction SNR against the measured profile, in dB.
    pub snr_db: f64,
    pub beta_failures: usize,
    pub ellipse_fallbacks: usize,
}

/// Segment a resampled trace into strokes and fit every stroke.
///
/// A failed beta fit falls back to a symmetric bump over the span; a
/// degenerate (near-collinear) stroke gets a flat chord ellipse. Both
/// fallbacks are counted in the report.
pub fn fit_word(rs: &ResampledTrace, opts: &FitOptions) -> Result<WordFit> {
    if rs.points.len() < 2 {
        return Err(Error::invalid("trace too short to model"));
    }
    let vp = estimate_velocity(rs);
    // adaptive floor: graphs of fewer than three strokes are nearly
    // degenerate after normalization, so relax the valley merge until the
    // word keeps at least three spans (or no boundaries remain to keep)
    let mut valley = opts.valley_frac;
    let mut spans = super::segment_strokes_opt(&vp, opts.smooth_window, valley);
    while spans.len() < 3 && valley < 0.98 {
        valley = (valley + 0.08).min(0.98);
        spans = super::segment_strokes_opt(&vp, opts.smooth_window, valley);
    }
    if spans.is_empty() {
        return Err(Error::invalid("no strokes found"));
    }
    fit_word_spans(rs, &vp, &spans, opts)
}

/// Fit a word over an externally chosen span partition.
pub fn fit_word_spans(
    rs: &ResampledTrace,
    vp: &VelocityProfile,
    spans: &[(usize, usize)],
    opts: &FitOptions,
) -> Result<WordFit> {
    let vp = vp.clone();
    let spans = spans.to_vec();

    // map velocity indices to point indices per pen-down run
    let v_runs = vp.pen_down_runs();
    let p_runs = rs.stroke_ranges();
    let point_span = |span: (usize, usize)| -> (usize, usize) {
        for (vr, pr) in v_runs.iter().zip(&p_runs) {
            if span.0 >= vr.0 && span.1 <= vr.1 {
                let lo = pr.0 + (span.0 - vr.0);
                let hi = pr.0 + (span.1 - vr.0) + 1;
                return (lo, hi.min(pr.1 - 1));
            }
        }
        (0, 0)
    };

    let mut strokes = Vec::new();
    let mut beta_failures = 0usize;
    let mut ellipse_fallbacks = 0usize;
    for &span in &spans {
        let beta = match fit_beta(&vp, span, opts) {
            Ok(fit) => fit.params,
            Err(Error::FitFailure { best, .. }) => {
                beta_failures += 1;
                *best
            }
            Err(e) => return Err(e),
        };
        let (lo, hi) = point_span(span);
        if hi <= lo {
            continue;
        }
        let pts = &rs.points[lo..=hi];
        let ellipse = match fit_ellipse(pts) {
            Ok(fit) => fit.params,
            Err(_) => {
                ellipse_fallbacks += 1;
                chord_ellipse(pts)
            }
        };
        let arc = arc_angles(&ellipse, pts);
        strokes.push(Stroke { beta, ellipse, arc });
    }
    if strokes.is_empty() {
        return Err(Error::invalid("no usable strokes"));
    }
    let model = BetaEllipticModel::new(strokes)?;
    let rebuilt: Vec<f64> = (0..vp.v.len()).map(|i| model.velocity_at(i as f64)).collect();
    let snr = super::snr_db(&vp.v, &rebuilt);
    Ok(WordFit {
        model,
        velocity: vp,
        spans,
        snr_db: snr,
        beta_failures,
        ellipse_fallbacks,
    })
}

/// Flat ellipse hugging the chord of a near-collinear stroke.
fn chord_ellipse(pts: &[Point]) -> EllipseParams {
    let p0 = pts[0];
    let p1 = pts[pts.len() - 1];
    let cx = 0.5 * (p0.x + p1.x);
    let cy = 0.5 * (p0.y + p1.y);
    let d = p1 - p0;
    let len = d.norm().max(1e-6);
    let theta = normalize_theta(d.y.atan2(d.x));
    // largest perpendicular deviation from the chord
    let mut dev = 0.0f64;
    for p in pts {
        let t = ((p.x - p0.x) * d.x + (p.y - p0.y) * d.y) / (len * len);
        let fx = p0.x + t * d.x;
        let fy = p0.y + t * d.y;
        dev = dev.max(((p.x - fx).powi(2) + (p.y - fy).powi(2)).sqrt());
    }
    let a = (len / 2.0).max(0.5);
    let b = dev.max(0.02 * a).min(a);
    EllipseParams { a, b, theta, cx, cy }
}

/// Entry/exit parametric angles of the stroke on its ellipse, with the sweep
/// direction chosen so the arc passes the stroke's midpoint.
fn arc_angles(e: &EllipseParams, pts: &[Point]) -> (f64, f64) {
    let two_pi = std::f64::consts::TAU;
    let entry = e.angle_of(pts[0]);
    let exit = e.angle_of(pts[pts.len() - 1]);
    let mid = e.angle_of(pts[pts.len() / 2]);
    let d0 = (exit - entry).rem_euclid(two_pi);
    let candidates = [d0, d0 - two_pi];
    let circ_dist = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(two_pi);
        d.min(two_pi - d)
    };
    let best = candidates
        .into_iter()
        .min_by(|&x, &y| {
            circ_dist(entry + x / 2.0, mid).total_cmp(&circ_dist(entry + y / 2.0, mid))
        })
        .unwrap();
    (entry, entry + best)
}
