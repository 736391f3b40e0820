//! Portable graymap (P5) and portable bitmap (P4) I/O, plus 8-bit gray PNG
//! reading. Row-major, top-left origin; in P4 a set bit is black ink.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{BinaryImage, GrayImage};
use crate::error::{Error, Result};

fn read_header_token(data: &[u8], pos: &mut usize) -> Result<u64> {
    // skip whitespace and '#' comments
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < data.len() && data[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Parse("expected integer in PNM header".into()));
    }
    std::str::from_utf8(&data[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse("bad integer in PNM header".into()))
}

/// Read a P5 graymap. `resolution` is attached to the result (PNM carries
/// no physical resolution).
pub fn read_pgm(data: &[u8], resolution: u32) -> Result<GrayImage> {
    if data.len() < 2 || &data[0..2] != b"P5" {
        return Err(Error::Parse("not a P5 graymap".into()));
    }
    let mut pos = 2;
    let w = read_header_token(data, &mut pos)? as u32;
    let h = read_header_token(data, &mut pos)? as u32;
    let maxval = read_header_token(data, &mut pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse(format!("unsupported maxval {maxval}")));
    }
    pos += 1; // single whitespace after maxval
    let need = w as usize * h as usize;
    if data.len() < pos + need {
        return Err(Error::Parse("truncated P5 payload".into()));
    }
    let mut samples = data[pos..pos + need].to_vec();
    if maxval != 255 {
        for s in &mut samples {
            *s = ((*s as u64 * 255) / maxval) as u8;
        }
    }
    GrayImage::new(w, h, samples, resolution)
}

/// Read a P4 bitmap; set bits become foreground.
pub fn read_pbm(data: &[u8]) -> Result<BinaryImage> {
    if data.len() < 2 || &data[0..2] != b"P4" {
        return Err(Error::Parse("not a P4 bitmap".into()));
    }
    let mut pos = 2;
    let w = read_header_token(data, &mut pos)? as u32;
    let h = read_header_token(data, &mut pos)? as u32;
    pos += 1;
    let row_bytes = w.div_ceil(8) as usize;
    let need = row_bytes * h as usize;
    if data.len() < pos + need {
        return Err(Error::Parse("truncated P4 payload".into()));
    }
    let mut mask = Vec::with_capacity(w as usize * h as usize);
    for y in 0..h as usize {
        let row = &data[pos + y * row_bytes..pos + (y + 1) * row_bytes];
        for x in 0..w as usize {
            let byte = row[x / 8];
            mask.push((byte >> (7 - (x % 8))) & 1 == 1);
        }
    }
    BinaryImage::new(w, h, mask)
}

pub fn write_pgm(img: &GrayImage, out: &mut impl Write) -> Result<()> {
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height())?;
    out.write_all(img.samples())?;
    Ok(())
}

pub fn write_pbm(img: &BinaryImage, out: &mut impl Write) -> Result<()> {
    write!(out, "P4\n{} {}\n", img.width(), img.height())?;
    let row_bytes = img.width().div_ceil(8) as usize;
    let mut row = vec![0u8; row_bytes];
    for y in 0..img.height() {
        row.fill(0);
        for x in 0..img.width() {
            if img.get(x, y) {
                row[x as usize / 8] |= 1 << (7 - (x % 8));
            }
        }
        out.write_all(&row)?;
    }
    Ok(())
}

pub fn save_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    write_pgm(img, &mut f)
}

pub fn save_pbm(img: &BinaryImage, path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    write_pbm(img, &mut f)
}

/// Load a grayscale image, dispatching on the file extension:
/// `.pgm`/`.pnm` (P5), `.pbm` (P4, mapped to 0/255), or `.png` (8-bit gray).
pub fn load_gray(path: &Path, resolution: u32) -> Result<GrayImage> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "pgm" | "pnm" => {
            let mut data = Vec::new();
            File::open(path)?.read_to_end(&mut data)?;
            read_pgm(&data, resolution)
        }
        "pbm" => {
            let mut data = Vec::new();
            File::open(path)?.read_to_end(&mut data)?;
            Ok(read_pbm(&data)?.to_gray(resolution))
        }
        "png" => {
            let reader = BufReader::new(File::open(path)?);
            let img = image::load(reader, image::ImageFormat::Png)
                .map_err(|e| Error::Parse(format!("png: {e}")))?
                .into_luma8();
            GrayImage::new(img.width(), img.height(), img.into_raw(), resolution)
        }
        other => Err(Error::invalid(format!("unsupported image extension: {other:?}"))),
    }
}

/// Load a binary image: `.pbm` directly, anything else through Otsu.
pub fn load_binary(path: &Path, resolution: u32) -> Result<BinaryImage> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    if ext == "pbm" {
        let mut data = Vec::new();
        File::open(path)?.read_to_end(&mut data)?;
        read_pbm(&data)
    } else {
        let gray = load_gray(path, resolution)?;
        super::binarize(&gray, super::BinarizeMethod::Otsu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn pbm_roundtrip(w in 1u32..20, h in 1u32..20, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mask: Vec<bool> = (0..w*h).map(|_| rng.gen_bool(0.5)).collect();
            let img = BinaryImage::new(w, h, mask).unwrap();
            let mut buf = Vec::new();
            write_pbm(&img, &mut buf).unwrap();
            let back = read_pbm(&buf).unwrap();
            prop_assert_eq!(img, back);
        }

        #[test]
        fn pgm_roundtrip(w in 1u32..20, h in 1u32..20, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<u8> = (0..w*h).map(|_| rng.gen()).collect();
            let img = GrayImage::new(w, h, samples, 300).unwrap();
            let mut buf = Vec::new();
            write_pgm(&img, &mut buf).unwrap();
            let back = read_pgm(&buf, 300).unwrap();
            prop_assert_eq!(img, back);
        }
    }

    #[test]
    fn pgm_header_comments_are_skipped() {
        let data = b"P5\n# a comment\n3 2\n255\nABCDEF";
        let img = read_pgm(data, 300).unwrap();
        assert_eq!(img.width(), 3);
        assert_eq!(img.height(), 2);
        assert_eq!(img.samples(), b"ABCDEF");
    }

    #[test]
    fn rejects_wrong_magic() {
        assert!(read_pgm(b"P4\n1 1\n0", 300).is_err());
        assert!(read_pbm(b"P5\n1 1\n255\nx").is_err());
    }
}
