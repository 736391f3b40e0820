//! Ground-truth generation: synthesize online trajectories from known
//! stroke models, rasterize them, and compose synthetic postal envelopes.
//! Everything is a pure function of the configuration seed, so corpora are
//! bit-reproducible.

pub mod corpus;
pub mod vocabulary;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::beta_elliptic::{reconstruct, BetaEllipticModel};
use crate::error::{Error, Result};
use crate::geometry::{Point, Region};
use crate::imaging::BinaryImage;
use crate::recovery::OrderedTrace;

/// Generator configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub stroke_width: u32,
    /// Pixels per inch recorded in emitted rasters.
    pub resolution: u32,
    /// Per-point Gaussian jitter, in pixels.
    pub noise_sigma: f64,
    pub n_templates: usize,
    pub n_instances: usize,
    pub n_envelopes: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            stroke_width: 3,
            resolution: 300,
            noise_sigma: 0.5,
            n_templates: 20,
            n_instances: 25,
            n_envelopes: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stroke_width < 1 {
            return Err(Error::config("stroke_width must be >= 1"));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::config("noise_sigma must be >= 0"));
        }
        if self.n_templates < 1 || self.n_instances < 1 {
            return Err(Error::config("template and instance counts must be >= 1"));
        }
        if self.n_templates > vocabulary::LABELS.len() {
            return Err(Error::config(format!(
                "at most {} templates available",
                vocabulary::LABELS.len()
            )));
        }
        Ok(())
    }
}

/// A generated item with its full provenance.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub trajectory: OrderedTrace,
    pub model: BetaEllipticModel,
    pub label: String,
    /// Envelope items carry `(region, kind)` records; words leave it empty.
    pub layout: Vec<(Region, String)>,
}

/// Splitmix-style seed derivation for independent per-item streams.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(index.wrapping_mul(0xBF58476D1CE4E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Gaussian jitter on every point; the identity when `sigma` is zero.
pub fn jitter_points(points: &[Point], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<Point> {
    if sigma <= 0.0 {
        return points.to_vec();
    }
    let normal = rand_distr::Normal::new(0.0, sigma).expect("sigma validated non-negative");
    points
        .iter()
        .map(|p| Point::new(p.x + normal.sample(rng), p.y + normal.sample(rng)))
        .collect()
}

fn translate_model(model: &BetaEllipticModel, dx: f64, dy: f64) -> BetaEllipticModel {
    let strokes = model
        .strokes
        .iter()
        .map(|s| {
            let mut stroke = *s;
            stroke.ellipse.cx += dx;
            stroke.ellipse.cy += dy;
            stroke
        })
        .collect();
    BetaEllipticModel::new(strokes).expect("translation preserves validity")
}

/// Synthesize one word: reconstruct the model trace, jitter it, and shift
/// everything into a padded raster frame. The returned model is shifted
/// identically, so truth trace and truth model share coordinates.
pub fn gen_word(model: &BetaEllipticModel, label: &str, cfg: &SynthConfig) -> Result<GroundTruth> {
    cfg.validate()?;
    let total_len: f64 = model
        .strokes
        .iter()
        .map(|s| s.ellipse.arc_length(s.arc.0, s.arc.1))
        .sum();
    if !(total_len.is_finite() && total_len > 1.0) {
        return Err(Error::invalid("degenerate model: no arc length"));
    }
    let n = ((total_len / 0.35).ceil() as usize).max(64);
    let (_, trace) = reconstruct(model, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noisy = jitter_points(&trace, cfg.noise_sigma, &mut rng);

    let pad = 2.0 * cfg.stroke_width as f64;
    let min_x = noisy.iter().map(|p| p.x).fold(f64::MAX, f64::min);
    let min_y = noisy.iter().map(|p| p.y).fold(f64::MAX, f64::min);
    let dx = pad - min_x;
    let dy = pad - min_y;
    let shifted: Vec<Point> = noisy.iter().map(|p| Point::new(p.x + dx, p.y + dy)).collect();

    Ok(GroundTruth {
        trajectory: OrderedTrace::new(shifted, vec![]),
        model: translate_model(model, dx, dy),
        label: label.to_string(),
        layout: Vec::new(),
    })
}

/// Stamp disks of radius `stroke_width / 2` along the trace, walking
/// interpolated sub-steps so the band stays connected. The canvas keeps a
/// `2 * stroke_width` pad around the ink.
pub fn rasterize(tr: &OrderedTrace, cfg: &SynthConfig) -> BinaryImage {
    let sw = cfg.stroke_width as f64;
    if tr.points.is_empty() {
        return BinaryImage::blank(4 * cfg.stroke_width.max(1), 4 * cfg.stroke_width.max(1));
    }
    let pad = 2.0 * sw;
    let max_x = tr.points.iter().map(|p| p.x).fold(f64::MIN, f64::max);
    let max_y = tr.points.iter().map(|p| p.y).fold(f64::MIN, f64::max);
    let w = (max_x + pad).ceil() as u32 + 1;
    let h = (max_y + pad).ceil() as u32 + 1;
    let mut img = BinaryImage::blank(w.max(1), h.max(1));
    let radius = sw / 2.0;

    let mut stamp = |p: Point| {
        let r = radius.ceil() as i64;
        for dy in -r..=r {
            for dx in -r..=r {
                let x = p.x.round() as i64 + dx;
                let y = p.y.round() as i64 + dy;
                if x < 0 || y < 0 || x >= img.width() as i64 || y >= img.height() as i64 {
                    continue;
                }
                let ddx = x as f64 - p.x;
                let ddy = y as f64 - p.y;
                if (ddx * ddx + ddy * ddy).sqrt() <= radius {
                    img.set(x as u32, y as u32, true);
                }
            }
        }
    };

    for (s, e) in tr.stroke_ranges() {
        let stroke = &tr.points[s..e];
        stamp(stroke[0]);
        for pair in stroke.windows(2) {
            let d = pair[1].dist(&pair[0]);
            let steps = (d / 0.4).ceil().max(1.0) as usize;
            for i in 1..=steps {
                let f = i as f64 / steps as f64;
                stamp(Point::new(
                    pair[0].x + f * (pair[1].x - pair[0].x),
                    pair[0].y + f * (pair[1].y - pair[0].y),
                ));
            }
        }
    }
    img
}

// ── Envelope composition ────────────────────────────────────────────────────

pub const ENVELOPE_W: u32 = 880;
pub const ENVELOPE_H: u32 = 620;
const FRAME_MARGIN: u32 = 10;
const FRAME_THICKNESS: u32 = 2;

fn paste(dst: &mut BinaryImage, src: &BinaryImage, x0: u32, y0: u32) {
    for y in 0..src.height() {
        for x in 0..src.width() {
            if src.get(x, y) {
                let (tx, ty) = (x0 + x, y0 + y);
                if tx < dst.width() && ty < dst.height() {
                    dst.set(tx, ty, true);
                }
            }
        }
    }
}

/// Tight bounding box of the foreground of `img`, offset by `(x0, y0)`.
fn pasted_bbox(src: &BinaryImage, x0: u32, y0: u32) -> Region {
    let (mut ax0, mut ay0, mut ax1, mut ay1) = (u32::MAX, u32::MAX, 0, 0);
    for y in 0..src.height() {
        for x in 0..src.width() {
            if src.get(x, y) {
                ax0 = ax0.min(x);
                ay0 = ay0.min(y);
                ax1 = ax1.max(x);
                ay1 = ay1.max(y);
            }
        }
    }
    Region::new(x0 + ax0, y0 + ay0, x0 + ax1, y0 + ay1)
}

/// One compact "digit" glyph; four variants, all near-square.
fn digit_glyph(kind: usize) -> BinaryImage {
    match kind % 4 {
        0 => {
            // filled disk
            let mut img = BinaryImage::blank(12, 14);
            for y in 0..14i64 {
                for x in 0..12i64 {
                    let dx = x as f64 - 5.5;
                    let dy = y as f64 - 6.5;
                    if (dx * dx / 30.25 + dy * dy / 42.25) <= 1.0 {
                        img.set(x as u32, y as u32, true);
                    }
                }
            }
            img
        }
        1 => {
            // filled block
            let mut img = BinaryImage::blank(11, 14);
            for y in 0..14 {
                for x in 0..11 {
                    img.set(x, y, true);
                }
            }
            img
        }
        2 => {
            // ring
            let mut img = BinaryImage::blank(13, 14);
            for y in 0..14i64 {
                for x in 0..13i64 {
                    let dx = x as f64 - 6.0;
                    let dy = y as f64 - 6.5;
                    let r = (dx * dx + dy * dy).sqrt();
                    if (3.0..=6.2).contains(&r) {
                        img.set(x as u32, y as u32, true);
                    }
                }
            }
            img
        }
        _ => {
            // filled diamond
            let mut img = BinaryImage::blank(13, 14);
            for y in 0..14i64 {
                for x in 0..13i64 {
                    if (x - 6).abs() as f64 / 6.0 + (y - 7).abs() as f64 / 7.0 <= 1.0 {
                        img.set(x as u32, y as u32, true);
                    }
                }
            }
            img
        }
    }
}

/// Compose a synthetic envelope: printed frame, dense stamp at the top
/// right, and an address block in the lower region with words laid out
/// right to left, the final line holding a four-glyph postal code group and
/// a city word. Returns the raster and the ground-truth layout records.
pub fn gen_envelope(
    words: &[GroundTruth],
    cfg: &SynthConfig,
) -> Result<(BinaryImage, Vec<(Region, String)>)> {
    if words.is_empty() {
        return Err(Error::invalid("envelope needs at least one word"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0xE7, 0));
    let mut img = BinaryImage::blank(ENVELOPE_W, ENVELOPE_H);
    let mut layout: Vec<(Region, String)> = Vec::new();

    // printed frame
    let frame = Region::new(
        FRAME_MARGIN,
        FRAME_MARGIN,
        ENVELOPE_W - FRAME_MARGIN - 1,
        ENVELOPE_H - FRAME_MARGIN - 1,
    );
    for t in 0..FRAME_THICKNESS {
        for x in frame.x0..=frame.x1 {
            img.set(x, frame.y0 + t, true);
            img.set(x, frame.y1 - t, true);
        }
        for y in frame.y0..=frame.y1 {
            img.set(frame.x0 + t, y, true);
            img.set(frame.x1 - t, y, true);
        }
    }
    layout.push((frame, "border".to_string()));

    // dense stamp, top right
    let sw = rng.gen_range(80..100);
    let sh = rng.gen_range(60..80);
    let sx1 = ENVELOPE_W - FRAME_MARGIN - rng.gen_range(20..40);
    let sy0 = FRAME_MARGIN + rng.gen_range(15..30);
    let stamp = Region::new(sx1 - sw, sy0, sx1, sy0 + sh);
    for y in stamp.y0..=stamp.y1 {
        for x in stamp.x0..=stamp.x1 {
            img.set(x, y, true);
        }
    }
    layout.push((stamp, "stamp".to_string()));

    // address block
    let word_rasters: Vec<BinaryImage> = words.iter().map(|w| rasterize(&w.trajectory, cfg)).collect();
    let n_lines = rng.gen_range(2..=3usize);
    let mut word_iter = 0usize;
    let mut next_raster = |rng: &mut ChaCha8Rng| -> &BinaryImage {
        let pick = (word_iter + rng.gen_range(0..words.len())) % words.len();
        word_iter += 1;
        &word_rasters[pick]
    };

    let mut y = (ENVELOPE_H as f64 * rng.gen_range(0.50..0.56)) as u32;
    let mut word_records: Vec<(Region, String)> = Vec::new();
    let mut line_records: Vec<Region> = Vec::new();
    for line in 0..n_lines {
        let is_last = line == n_lines - 1;
        let mut x_right = ENVELOPE_W - FRAME_MARGIN - rng.gen_range(60..110);
        let mut line_region: Option<Region> = None;
        let mut line_height = 0u32;

        let mut place = |raster: &BinaryImage,
                         img: &mut BinaryImage,
                         x_right: &mut u32,
                         y: u32,
                         kind: &str,
                         records: &mut Vec<(Region, String)>,
                         line_region: &mut Option<Region>,
                         line_height: &mut u32|
         -> Result<()> {
            if *x_right < raster.width() + FRAME_MARGIN + 20 {
                return Err(Error::Layout("canvas too small for address line".into()));
            }
            let x0 = *x_right - raster.width();
            if y + raster.height() + FRAME_MARGIN + 10 > ENVELOPE_H {
                return Err(Error::Layout("canvas too small for address block".into()));
            }
            paste(img, raster, x0, y);
            let r = pasted_bbox(raster, x0, y);
            records.push((r, kind.to_string()));
            *line_region = Some(line_region.map(|lr| lr.union(&r)).unwrap_or(r));
            *line_height = (*line_height).max(raster.height());
            *x_right = x0;
            Ok(())
        };

        if is_last {
            // postal code group: four compact glyphs, small gaps
            let glyph_imgs: Vec<BinaryImage> =
                (0..4).map(|_| digit_glyph(rng.gen_range(0..4))).collect();
            let gaps = 3u32;
            let total_w: u32 =
                glyph_imgs.iter().map(|g| g.width()).sum::<u32>() + 3 * gaps;
            let code_x0 = x_right - total_w;
            let dy = rng.gen_range(8..16);
            let mut cx = code_x0;
            let mut code_region: Option<Region> = None;
            for g in &glyph_imgs {
                paste(&mut img, g, cx, y + dy);
                let r = pasted_bbox(g, cx, y + dy);
                code_region = Some(code_region.map(|cr| cr.union(&r)).unwrap_or(r));
                cx += g.width() + gaps;
            }
            let code_region = code_region.unwrap();
            word_records.push((code_region, "code".to_string()));
            line_region = Some(code_region);
            line_height = line_height.max(code_region.height() + dy);
            x_right = code_x0 - rng.gen_range(34..50);

            let raster = next_raster(&mut rng).clone();
            place(
                &raster,
                &mut img,
                &mut x_right,
                y,
                "city",
                &mut word_records,
                &mut line_region,
                &mut line_height,
            )?;
        } else {
            let n_words = rng.gen_range(2..=3usize);
            for _ in 0..n_words {
                let raster = next_raster(&mut rng).clone();
                place(
                    &raster,
                    &mut img,
                    &mut x_right,
                    y + rng.gen_range(0..4),
                    "city",
                    &mut word_records,
                    &mut line_region,
                    &mut line_height,
                )?;
                x_right = x_right.saturating_sub(rng.gen_range(58..72));
            }
        }
        let lr = line_region.expect("every line places at least one word");
        line_records.push(lr);
        y = lr.y1 + rng.gen_range(22..30);
    }

    let address = word_records
        .iter()
        .map(|(r, _)| *r)
        .reduce(|a, b| a.union(&b))
        .expect("address holds at least one word");
    layout.push((address, "address".to_string()));
    for lr in line_records {
        layout.push((lr, "line".to_string()));
    }
    layout.extend(word_records);
    Ok((img, layout))
}
