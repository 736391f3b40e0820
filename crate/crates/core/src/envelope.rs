//! Envelope layout chain: suppress the printed frame, suppress dense stamps
//! and graphics, locate the address block, cut it into lines by horizontal
//! projection and into words by vertical projection, and tell postal-code
//! groups from city names by component regularity and eccentricity.

use crate::error::{Error, Result};
use crate::geometry::{Point, Region};
use crate::imaging::{connected_components, BinaryImage, ConnectedComponent};
use crate::svg::SvgDoc;

/// Tunable thresholds of the layout chain.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeParams {
    /// Maximum thickness of a printed border line, in pixels.
    pub border_max: u32,
    /// Fraction of a side that counts as the margin band.
    pub margin_band: f64,
    /// Components denser than this (in the top band) are stamps/graphics.
    pub density_max: f64,
    /// Fraction of envelope height reserved for stamps (address search
    /// starts below it).
    pub top_band: f64,
    /// Line split: zero-run length as a fraction of the median band height.
    pub line_gap_factor: f64,
    /// Word split: zero-run length as a fraction of the median component
    /// width.
    pub word_gap_factor: f64,
    /// Component-width coefficient of variation allowed in a code group.
    pub width_cv_max: f64,
    /// Mean eccentricity at or below which a group still reads as digits.
    pub ecc_split: f64,
    /// Address clustering reach as a multiple of the median component
    /// height.
    pub cluster_gap_factor: f64,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        EnvelopeParams {
            border_max: 4,
            margin_band: 0.08,
            density_max: 0.5,
            top_band: 0.3,
            line_gap_factor: 0.4,
            word_gap_factor: 0.5,
            width_cv_max: 0.35,
            ecc_split: 2.5,
            cluster_gap_factor: 2.0,
        }
    }
}

/// Postal field kind of a word region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldLabel {
    PostalCode,
    CityName,
}

impl FieldLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            FieldLabel::PostalCode => "code",
            FieldLabel::CityName => "city",
        }
    }
}

/// One text line of the address with its words in right-to-left order.
#[derive(Debug, Clone, PartialEq)]
pub struct LineBand {
    pub region: Region,
    pub words: Vec<Region>,
}

/// The located address block and its lines, top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct AddressBlock {
    pub region: Region,
    pub lines: Vec<LineBand>,
}

fn median(values: &mut [u32]) -> u32 {
    if values.is_empty() {
        return 0;
    }
    values.sort_unstable();
    values[values.len() / 2]
}

/// Remove long straight margin-band runs: the printed frame. Interior
/// content, including long underlines away from the margins, is untouched.
pub fn suppress_border(img: &BinaryImage, p: &EnvelopeParams) -> BinaryImage {
    let w = img.width();
    let h = img.height();
    let band_x = (p.margin_band * w as f64).round() as u32;
    let band_y = (p.margin_band * h as f64).round() as u32;
    let min_h_run = (w as f64 * 0.5) as u32;
    let min_v_run = (h as f64 * 0.5) as u32;

    let mut h_line = vec![false; (w * h) as usize];
    for y in 0..h {
        let in_band = y < band_y || y + band_y >= h;
        if !in_band {
            continue;
        }
        let mut x = 0;
        while x < w {
            if !img.get(x, y) {
                x += 1;
                continue;
            }
            let start = x;
            while x < w && img.get(x, y) {
                x += 1;
            }
            if x - start >= min_h_run {
                for xx in start..x {
                    h_line[(y * w + xx) as usize] = true;
                }
            }
        }
    }
    let mut v_line = vec![false; (w * h) as usize];
    for x in 0..w {
        let in_band = x < band_x || x + band_x >= w;
        if !in_band {
            continue;
        }
        let mut y = 0;
        while y < h {
            if !img.get(x, y) {
                y += 1;
                continue;
            }
            let start = y;
            while y < h && img.get(x, y) {
                y += 1;
            }
            if y - start >= min_v_run {
                for yy in start..y {
                    v_line[(yy * w + x) as usize] = true;
                }
            }
        }
    }
    // thickness check: a marked run must stay border-thin in the
    // perpendicular direction, or it is a dense block, not a line
    for x in 0..w {
        let mut y = 0;
        while y < h {
            if !h_line[(y * w + x) as usize] {
                y += 1;
                continue;
            }
            let start = y;
            while y < h && h_line[(y * w + x) as usize] {
                y += 1;
            }
            if y - start > p.border_max {
                for yy in start..y {
                    h_line[(yy * w + x) as usize] = false;
                }
            }
        }
    }
    for y in 0..h {
        let mut x = 0;
        while x < w {
            if !v_line[(y * w + x) as usize] {
                x += 1;
                continue;
            }
            let start = x;
            while x < w && v_line[(y * w + x) as usize] {
                x += 1;
            }
            if x - start > p.border_max {
                for xx in start..x {
                    v_line[(y * w + xx) as usize] = false;
                }
            }
        }
    }
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let idx = (y * w + x) as usize;
            if h_line[idx] || v_line[idx] {
                out.set(x, y, false);
            }
        }
    }
    out
}

/// Remove dense components sitting in the top band: stamps and printed
/// graphics.
pub fn suppress_stamps(img: &BinaryImage, p: &EnvelopeParams) -> BinaryImage {
    let mut out = img.clone();
    let top_limit = img.height() as f64 * p.top_band;
    for c in connected_components(img) {
        let density = c.area as f64 / c.bbox.area() as f64;
        if density > p.density_max && c.centroid.1 < top_limit {
            for &(x, y) in &c.pixels {
                out.set(x, y, false);
            }
        }
    }
    out
}

fn lower_band_components(img: &BinaryImage, p: &EnvelopeParams) -> Vec<ConnectedComponent> {
    let cut = img.height() as f64 * p.top_band;
    connected_components(img)
        .into_iter()
        .filter(|c| c.centroid.1 >= cut)
        .collect()
}

/// Bounding region of the heaviest cluster of remaining components.
/// Components group when their boxes, dilated by twice the median component
/// height, touch.
pub fn locate_address(img: &BinaryImage, p: &EnvelopeParams) -> Result<Region> {
    let comps = lower_band_components(img, p);
    if comps.is_empty() {
        return Err(Error::NotFound("no ink left to locate an address in".into()));
    }
    let mut heights: Vec<u32> = comps.iter().map(|c| c.bbox.height()).collect();
    let gap_max = (p.cluster_gap_factor * median(&mut heights) as f64).round() as u32;

    // union-find over dilated bbox overlap
    let n = comps.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    let dilated: Vec<Region> = comps.iter().map(|c| c.bbox.dilate(gap_max)).collect();
    for i in 0..n {
        for j in i + 1..n {
            if dilated[i].intersects(&dilated[j]) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut mass: std::collections::HashMap<usize, (usize, Option<Region>)> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        let entry = mass.entry(root).or_insert((0, None));
        entry.0 += comps[i].area;
        entry.1 = Some(match entry.1 {
            Some(r) => r.union(&comps[i].bbox),
            None => comps[i].bbox,
        });
    }
    let best = mass
        .values()
        .max_by(|a, b| {
            a.0.cmp(&b.0)
                .then_with(|| b.1.unwrap().x0.cmp(&a.1.unwrap().x0))
        })
        .expect("at least one cluster");
    Ok(best.1.expect("cluster has a region"))
}

/// Cut the address region into line bands by horizontal projection; bands
/// separated by blank runs shorter than the gap threshold merge.
pub fn segment_lines(img: &BinaryImage, region: &Region, p: &EnvelopeParams) -> AddressBlock {
    let mut profile: Vec<u32> = Vec::with_capacity(region.height() as usize);
    for y in region.y0..=region.y1 {
        let mut count = 0;
        for x in region.x0..=region.x1 {
            if img.get(x, y) {
                count += 1;
            }
        }
        profile.push(count);
    }
    // raw bands: maximal non-zero runs
    let mut raw: Vec<(u32, u32)> = Vec::new();
    let mut start: Option<u32> = None;
    for (i, &v) in profile.iter().enumerate() {
        let y = region.y0 + i as u32;
        if v > 0 && start.is_none() {
            start = Some(y);
        }
        if v == 0 {
            if let Some(s) = start.take() {
                raw.push((s, y - 1));
            }
        }
    }
    if let Some(s) = start {
        raw.push((s, region.y1));
    }
    if raw.is_empty() {
        return AddressBlock {
            region: *region,
            lines: Vec::new(),
        };
    }
    let mut heights: Vec<u32> = raw.iter().map(|&(s, e)| e - s + 1).collect();
    let gap = ((p.line_gap_factor * median(&mut heights) as f64).round() as u32).max(1);
    let mut merged: Vec<(u32, u32)> = vec![raw[0]];
    for &(s, e) in &raw[1..] {
        let last = merged.last_mut().unwrap();
        if s - last.1 - 1 < gap {
            last.1 = e;
        } else {
            merged.push((s, e));
        }
    }
    let lines = merged
        .into_iter()
        .map(|(y0, y1)| {
            // trim x to content
            let mut x0 = region.x1;
            let mut x1 = region.x0;
            for x in region.x0..=region.x1 {
                for y in y0..=y1 {
                    if img.get(x, y) {
                        x0 = x0.min(x);
                        x1 = x1.max(x);
                        break;
                    }
                }
            }
            LineBand {
                region: Region::new(x0.min(x1), y0, x1.max(x0), y1),
                words: Vec::new(),
            }
        })
        .collect();
    AddressBlock {
        region: *region,
        lines,
    }
}

/// Cut a line band into word regions by vertical projection, right to left.
pub fn segment_words(img: &BinaryImage, band: &LineBand, p: &EnvelopeParams) -> LineBand {
    let r = band.region;
    let mut profile: Vec<u32> = Vec::with_capacity(r.width() as usize);
    for x in r.x0..=r.x1 {
        let mut count = 0;
        for y in r.y0..=r.y1 {
            if img.get(x, y) {
                count += 1;
            }
        }
        profile.push(count);
    }
    let mut raw: Vec<(u32, u32)> = Vec::new();
    let mut start: Option<u32> = None;
    for (i, &v) in profile.iter().enumerate() {
        let x = r.x0 + i as u32;
        if v > 0 && start.is_none() {
            start = Some(x);
        }
        if v == 0 {
            if let Some(s) = start.take() {
                raw.push((s, x - 1));
            }
        }
    }
    if let Some(s) = start {
        raw.push((s, r.x1));
    }
    if raw.is_empty() {
        return LineBand {
            region: r,
            words: Vec::new(),
        };
    }
    // gap threshold from the median component width within the band
    let mut widths: Vec<u32> = connected_components_in(img, &r)
        .iter()
        .map(|c| c.bbox.width())
        .collect();
    let word_gap = ((p.word_gap_factor * median(&mut widths) as f64).round() as u32).max(1);
    let mut merged: Vec<(u32, u32)> = vec![raw[0]];
    for &(s, e) in &raw[1..] {
        let last = merged.last_mut().unwrap();
        if s - last.1 - 1 < word_gap {
            last.1 = e;
        } else {
            merged.push((s, e));
        }
    }
    let mut words: Vec<Region> = merged
        .into_iter()
        .map(|(x0, x1)| {
            // trim y to content
            let mut y0 = r.y1;
            let mut y1 = r.y0;
            for y in r.y0..=r.y1 {
                for x in x0..=x1 {
                    if img.get(x, y) {
                        y0 = y0.min(y);
                        y1 = y1.max(y);
                        break;
                    }
                }
            }
            Region::new(x0, y0.min(y1), x1, y1.max(y0))
        })
        .collect();
    words.sort_by(|a, b| b.x0.cmp(&a.x0));
    LineBand { region: r, words }
}

/// Components whose bbox lies inside `region`.
fn connected_components_in(img: &BinaryImage, region: &Region) -> Vec<ConnectedComponent> {
    connected_components(img)
        .into_iter()
        .filter(|c| region.intersects(&c.bbox))
        .filter(|c| {
            region.contains(
                c.centroid.0.round() as u32,
                c.centroid.1.round() as u32,
            )
        })
        .collect()
}

/// Label each word region: a postal code group has 3 to 6 components of
/// similar width and low mean eccentricity; anything else is a city name.
pub fn discriminate_fields(
    img: &BinaryImage,
    words: &[Region],
    p: &EnvelopeParams,
) -> Vec<(Region, FieldLabel)> {
    words
        .iter()
        .map(|&word| {
            let comps = connected_components_in(img, &word);
            let count = comps.len();
            let label = if (3..=6).contains(&count) {
                let widths: Vec<f64> = comps.iter().map(|c| c.bbox.width() as f64).collect();
                let mean_w = widths.iter().sum::<f64>() / count as f64;
                let var =
                    widths.iter().map(|w| (w - mean_w) * (w - mean_w)).sum::<f64>() / count as f64;
                let cv = var.sqrt() / mean_w;
                let mean_ecc = comps
                    .iter()
                    .map(|c| c.eccentricity.min(1e6))
                    .sum::<f64>()
                    / count as f64;
                if cv <= p.width_cv_max && mean_ecc <= p.ecc_split {
                    FieldLabel::PostalCode
                } else {
                    FieldLabel::CityName
                }
            } else {
                FieldLabel::CityName
            };
            (word, label)
        })
        .collect()
}

/// Run the whole chain on a cleaned envelope raster.
pub fn analyze(img: &BinaryImage, p: &EnvelopeParams) -> Result<AddressBlock> {
    let no_border = suppress_border(img, p);
    let no_stamp = suppress_stamps(&no_border, p);
    let region = locate_address(&no_stamp, p)?;
    let mut block = segment_lines(&no_stamp, &region, p);
    block.lines = block
        .lines
        .iter()
        .map(|band| segment_words(&no_stamp, band, p))
        .collect();
    Ok(block)
}

/// Text layout report: one `kind x0 y0 x1 y1` record per region. Field
/// labels are resolved on the last two lines.
pub fn layout_report(img: &BinaryImage, block: &AddressBlock, p: &EnvelopeParams) -> String {
    let mut out = String::new();
    let r = block.region;
    out.push_str(&format!("address {} {} {} {}\n", r.x0, r.y0, r.x1, r.y1));
    let field_lines = block.lines.len().saturating_sub(2);
    for (i, line) in block.lines.iter().enumerate() {
        let r = line.region;
        out.push_str(&format!("line {} {} {} {}\n", r.x0, r.y0, r.x1, r.y1));
        if i >= field_lines {
            for (r, label) in discriminate_fields(img, &line.words, p) {
                out.push_str(&format!(
                    "{} {} {} {} {}\n",
                    label.as_str(),
                    r.x0,
                    r.y0,
                    r.x1,
                    r.y1
                ));
            }
        } else {
            for r in &line.words {
                out.push_str(&format!("word {} {} {} {}\n", r.x0, r.y0, r.x1, r.y1));
            }
        }
    }
    out
}

/// SVG overlay of the layout for inspection.
pub fn layout_svg(img: &BinaryImage, block: &AddressBlock, p: &EnvelopeParams) -> String {
    let mut doc = SvgDoc::new(img.width() as f64, img.height() as f64);
    doc.rect(&block.region, "#1965b0", Some("address"));
    let field_lines = block.lines.len().saturating_sub(2);
    for (i, line) in block.lines.iter().enumerate() {
        doc.rect(&line.region, "#4eb265", None);
        if i >= field_lines {
            for (r, label) in discriminate_fields(img, &line.words, p) {
                let color = match label {
                    FieldLabel::PostalCode => "#dc050c",
                    FieldLabel::CityName => "#f7a600",
                };
                doc.rect(&r, color, Some(label.as_str()));
            }
        } else {
            for r in &line.words {
                doc.rect(r, "#f7a600", None);
            }
        }
    }
    doc.text(
        Point::new(4.0, 12.0),
        10.0,
        &format!("{} lines", block.lines.len()),
    );
    doc.finish()
}
