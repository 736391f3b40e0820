//! Raster ingestion and the image-side preprocessing chain: binarization,
//! noise filtering, skeletonization, connected-component analysis and
//! diacritic suppression.
//!
//! Conventions: row-major storage, origin at the top-left corner, x grows
//! rightward, y downward. Foreground (ink) is 8-connected, background is
//! 4-connected.

pub mod pnm;
mod thin;

use crate::error::{Error, Result};
use crate::geometry::Region;

/// 8-bit grayscale raster. Ink is dark (low intensity), paper bright.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    samples: Vec<u8>,
    /// Scan resolution in pixels per inch; informational.
    resolution: u32,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, samples: Vec<u8>, resolution: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if samples.len() != (width as usize) * (height as usize) {
            return Err(Error::invalid(format!(
                "sample count {} does not match {}x{}",
                samples.len(),
                width,
                height
            )));
        }
        Ok(GrayImage {
            width,
            height,
            samples,
            resolution,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.samples[y as usize * self.width as usize + x as usize]
    }
}

/// Binary raster: `true` is foreground ink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: u32,
    height: u32,
    mask: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: u32, height: u32, mask: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if mask.len() != (width as usize) * (height as usize) {
            return Err(Error::invalid("mask length does not match dimensions"));
        }
        Ok(BinaryImage {
            width,
            height,
            mask,
        })
    }

    pub fn blank(width: u32, height: u32) -> Self {
        BinaryImage {
            width,
            height,
            mask: vec![false; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.mask[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.mask[y as usize * self.width as usize + x as usize] = v;
    }

    /// Foreground test that treats out-of-bounds as background.
    #[inline]
    pub fn fg(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        self.mask[y as usize * self.width as usize + x as usize]
    }

    pub fn count_foreground(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn foreground_pixels(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    out.push((x, y));
                }
            }
        }
        out
    }

    /// Number of foreground 8-neighbors of (x, y).
    pub fn neighbor_count(&self, x: u32, y: u32) -> usize {
        let (xi, yi) = (x as i64, y as i64);
        let mut n = 0;
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                if (dx != 0 || dy != 0) && self.fg(xi + dx, yi + dy) {
                    n += 1;
                }
            }
        }
        n
    }

    /// True if any 2x2 block is fully foreground.
    pub fn has_full_block(&self) -> bool {
        for y in 0..self.height.saturating_sub(1) {
            for x in 0..self.width.saturating_sub(1) {
                if self.get(x, y) && self.get(x + 1, y) && self.get(x, y + 1) && self.get(x + 1, y + 1)
                {
                    return true;
                }
            }
        }
        false
    }

    /// Convert to a grayscale image (foreground 0, background 255).
    pub fn to_gray(&self, resolution: u32) -> GrayImage {
        let samples = self.mask.iter().map(|&b| if b { 0 } else { 255 }).collect();
        GrayImage {
            width: self.width,
            height: self.height,
            samples,
            resolution,
        }
    }
}

/// A thinned binary image: no 2x2 block is fully foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    image: BinaryImage,
}

impl Skeleton {
    /// Wrap a binary image, checking the thinness invariant.
    pub fn from_image(image: BinaryImage) -> Result<Self> {
        if image.has_full_block() {
            return Err(Error::invalid("image is not thin: full 2x2 block present"));
        }
        Ok(Skeleton { image })
    }

    /// Wrap without checking; used to feed malformed inputs to downstream
    /// error paths.
    pub fn from_image_unchecked(image: BinaryImage) -> Self {
        Skeleton { image }
    }

    pub fn image(&self) -> &BinaryImage {
        &self.image
    }
}

/// One 8-connected foreground component with its shape statistics.
#[derive(Debug, Clone)]
pub struct ConnectedComponent {
    pub pixels: Vec<(u32, u32)>,
    pub bbox: Region,
    pub area: usize,
    pub centroid: (f64, f64),
    /// Ratio of principal-axis standard deviations, >= 1. Infinite for
    /// perfectly collinear components.
    pub eccentricity: f64,
}

impl ConnectedComponent {
    fn from_pixels(pixels: Vec<(u32, u32)>) -> Self {
        debug_assert!(!pixels.is_empty());
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
        let mut sx = 0.0;
        let mut sy = 0.0;
        for &(x, y) in &pixels {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            sx += x as f64;
            sy += y as f64;
        }
        let n = pixels.len() as f64;
        let cx = sx / n;
        let cy = sy / n;
        let (mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0);
        for &(x, y) in &pixels {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            mxx += dx * dx;
            myy += dy * dy;
            mxy += dx * dy;
        }
        mxx /= n;
        myy /= n;
        mxy /= n;
        let tr = mxx + myy;
        let det = ((mxx - myy) * (mxx - myy) + 4.0 * mxy * mxy).sqrt();
        let l1 = 0.5 * (tr + det);
        let l2 = 0.5 * (tr - det);
        let eccentricity = if l1 <= 1e-12 {
            1.0
        } else if l2 <= 1e-12 {
            f64::INFINITY
        } else {
            (l1 / l2).sqrt()
        };
        let area = pixels.len();
        ConnectedComponent {
            pixels,
            bbox: Region::new(x0, y0, x1, y1),
            area,
            centroid: (cx, cy),
            eccentricity,
        }
    }
}

/// Threshold selection for [`binarize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinarizeMethod {
    /// Foreground where sample <= t.
    Fixed(u8),
    /// Between-class variance maximization over the 8-bit histogram.
    Otsu,
}

/// Turn a grayscale scan into an ink mask. Dark pixels become foreground.
pub fn binarize(img: &GrayImage, method: BinarizeMethod) -> Result<BinaryImage> {
    if img.width == 0 || img.height == 0 {
        return Err(Error::invalid("empty image"));
    }
    let t = match method {
        BinarizeMethod::Fixed(t) => t,
        BinarizeMethod::Otsu => otsu_threshold(&histogram(&img.samples)),
    };
    let mask = img.samples.iter().map(|&s| s <= t).collect();
    BinaryImage::new(img.width, img.height, mask)
}

pub fn histogram(samples: &[u8]) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &s in samples {
        h[s as usize] += 1;
    }
    h
}

/// Threshold maximizing between-class variance; classes are `<= t` and `> t`.
/// Ties resolve to the smallest threshold.
pub fn otsu_threshold(hist: &[u64; 256]) -> u8 {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return 0;
    }
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    let mut w0 = 0u64;
    let mut sum0 = 0.0;
    let mut best_t = 0u8;
    let mut best_var = -1.0;
    for t in 0..256usize {
        w0 += hist[t];
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            // keep the running best; variance is zero here
            if best_var < 0.0 {
                best_var = 0.0;
                best_t = t as u8;
            }
            continue;
        }
        let m0 = sum0 / w0 as f64;
        let m1 = (sum_all - sum0) / w1 as f64;
        let var = w0 as f64 * w1 as f64 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best_t = t as u8;
        }
    }
    best_t
}

/// Remove isolated foreground pixels and fill single-pixel holes.
/// Both rules are evaluated on the input, so the operation is idempotent.
pub fn denoise(img: &BinaryImage) -> BinaryImage {
    let mut out = img.clone();
    for y in 0..img.height {
        for x in 0..img.width {
            let (xi, yi) = (x as i64, y as i64);
            if img.get(x, y) {
                if img.neighbor_count(x, y) == 0 {
                    out.set(x, y, false);
                }
            } else {
                // a hole needs all 8 neighbors in-bounds and foreground
                let mut full = x > 0 && y > 0 && x + 1 < img.width && y + 1 < img.height;
                if full {
                    'scan: for dy in -1..=1i64 {
                        for dx in -1..=1i64 {
                            if (dx != 0 || dy != 0) && !img.fg(xi + dx, yi + dy) {
                                full = false;
                                break 'scan;
                            }
                        }
                    }
                }
                if full {
                    out.set(x, y, true);
                }
            }
        }
    }
    out
}

/// Thin the foreground to a one-pixel-wide skeleton, preserving the
/// component count and hole count of the input.
pub fn skeletonize(img: &BinaryImage) -> Skeleton {
    thin::thin(img)
}

/// All 8-connected foreground components, sorted by bbox x0 descending
/// (right-to-left reading order).
pub fn connected_components(img: &BinaryImage) -> Vec<ConnectedComponent> {
    let w = img.width as usize;
    let mut seen = vec![false; w * img.height as usize];
    let mut comps = Vec::new();
    for y in 0..img.height {
        for x in 0..img.width {
            let idx = y as usize * w + x as usize;
            if !img.mask[idx] || seen[idx] {
                continue;
            }
            let mut pixels = Vec::new();
            let mut stack = vec![(x, y)];
            seen[idx] = true;
            while let Some((px, py)) = stack.pop() {
                pixels.push((px, py));
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let nx = px as i64 + dx;
                        let ny = py as i64 + dy;
                        if img.fg(nx, ny) {
                            let nidx = ny as usize * w + nx as usize;
                            if !seen[nidx] {
                                seen[nidx] = true;
                                stack.push((nx as u32, ny as u32));
                            }
                        }
                    }
                }
            }
            comps.push(ConnectedComponent::from_pixels(pixels));
        }
    }
    comps.sort_by(|a, b| b.bbox.x0.cmp(&a.bbox.x0).then(a.bbox.y0.cmp(&b.bbox.y0)));
    comps
}

/// Drop small satellite components lying fully above or below the vertical
/// band of the largest component (dots and vowel signs of a word image).
/// `ratio` is the smallness threshold relative to the largest area.
pub fn remove_diacritics(img: &BinaryImage, ratio: f64) -> BinaryImage {
    let comps = connected_components(img);
    let Some(main) = comps.iter().max_by_key(|c| c.area) else {
        return img.clone();
    };
    let max_area = main.area;
    let band = (main.bbox.y0, main.bbox.y1);
    let mut out = img.clone();
    for c in &comps {
        let small = (c.area as f64) < ratio * max_area as f64;
        let outside_band = c.bbox.y1 < band.0 || c.bbox.y0 > band.1;
        if small && outside_band {
            for &(x, y) in &c.pixels {
                out.set(x, y, false);
            }
        }
    }
    out
}

/// Number of background 4-connected components not reachable from the
/// border, i.e. the holes of the foreground.
pub fn hole_count(img: &BinaryImage) -> usize {
    let w = img.width as usize;
    let h = img.height as usize;
    let mut seen = vec![false; w * h];
    let flood = |sx: usize, sy: usize, seen: &mut Vec<bool>| {
        let mut stack = vec![(sx, sy)];
        seen[sy * w + sx] = true;
        while let Some((x, y)) = stack.pop() {
            let neighbors = [
                (x.wrapping_sub(1), y),
                (x + 1, y),
                (x, y.wrapping_sub(1)),
                (x, y + 1),
            ];
            for (nx, ny) in neighbors {
                if nx < w && ny < h && !img.mask[ny * w + nx] && !seen[ny * w + nx] {
                    seen[ny * w + nx] = true;
                    stack.push((nx, ny));
                }
            }
        }
    };
    // exterior background first
    for x in 0..w {
        for y in [0, h - 1] {
            if !img.mask[y * w + x] && !seen[y * w + x] {
                flood(x, y, &mut seen);
            }
        }
    }
    for y in 0..h {
        for x in [0, w - 1] {
            if !img.mask[y * w + x] && !seen[y * w + x] {
                flood(x, y, &mut seen);
            }
        }
    }
    let mut holes = 0;
    for y in 0..h {
        for x in 0..w {
            if !img.mask[y * w + x] && !seen[y * w + x] {
                holes += 1;
                flood(x, y, &mut seen);
            }
        }
    }
    holes
}
