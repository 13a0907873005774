//! File formats for images, probability maps and masks.
//!
//! * Images: PNG (8-bit RGB/RGBA/indexed, alpha discarded) or binary PPM (`P6`).
//! * Probability maps: binary PGM (`P5`, 16-bit samples, value = sample/maxval)
//!   or the lossless raw-float layout: `b"PMAPF32\0"`, `width: u32le`,
//!   `height: u32le`, then `width*height` little-endian `f32` values row-major.
//! * Masks: binary PGM (`P5`, maxval 255) with foreground 255, background 0.

use std::fs;
use std::io::{Cursor, ErrorKind};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{CutoutMask, ProbMap, RgbImage};

pub const PMAP_F32_MAGIC: &[u8; 8] = b"PMAPF32\0";
const PNG_MAGIC: &[u8; 8] = b"\x89PNG\r\n\x1a\n";

/// On-disk layout for probability maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmapFormat {
    Pgm16,
    RawF32,
}

impl PmapFormat {
    /// `.pmf`/`.f32`/`.raw` select the raw-float layout; anything else is PGM.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("pmf" | "f32" | "raw") => PmapFormat::RawF32,
            _ => PmapFormat::Pgm16,
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    decode_image(&read_file(path.as_ref())?)
}

/// Writes PNG unless the extension is `.ppm`.
pub fn save_image(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match path.extension().and_then(|e| e.to_str()) {
        Some("ppm") => encode_ppm(image),
        _ => encode_png(image)?,
    };
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_pmap(path: impl AsRef<Path>) -> Result<ProbMap> {
    decode_pmap(&read_file(path.as_ref())?)
}

pub fn save_pmap(pmap: &ProbMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pmap(pmap, PmapFormat::from_path(path));
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<CutoutMask> {
    decode_mask(&read_file(path.as_ref())?)
}

pub fn save_mask(mask: &CutoutMask, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_mask(mask))?;
    Ok(())
}

pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    if bytes.is_empty() {
        return Err(Error::CorruptData("empty file".into()));
    }
    if bytes.starts_with(PNG_MAGIC) {
        return decode_png(bytes);
    }
    let pnm = parse_pnm(bytes)?;
    match pnm.magic {
        b'6' => {
            if pnm.maxval > 255 {
                return Err(Error::UnsupportedFormat("16-bit PPM".into()));
            }
            let data = pnm.samples(3)?;
            let scale = |v: u8| -> u8 {
                if pnm.maxval == 255 {
                    v
                } else {
                    ((v.min(pnm.maxval as u8) as u32 * 255 + pnm.maxval / 2) / pnm.maxval) as u8
                }
            };
            let pixels = data
                .chunks_exact(3)
                .map(|c| [scale(c[0]), scale(c[1]), scale(c[2])])
                .collect();
            RgbImage::new(pnm.width, pnm.height, pixels)
        }
        other => Err(Error::UnsupportedFormat(format!(
            "P{} is not a color image format",
            other as char
        ))),
    }
}

fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let corrupt = |e: png::DecodingError| Error::CorruptData(format!("png: {e}"));
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(corrupt)?;
    let info = reader.info();
    if info.bit_depth == png::BitDepth::Sixteen {
        return Err(Error::UnsupportedFormat("16-bit PNG".into()));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::CorruptData("png: image too large".into()))?;
    let mut buf = vec![0u8; size];
    let out = reader.next_frame(&mut buf).map_err(corrupt)?;
    let (w, h) = (out.width as usize, out.height as usize);
    let channels = match out.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "png color type {other:?}"
            )));
        }
    };
    let mut pixels = Vec::with_capacity(w * h);
    for row in buf[..out.line_size * h].chunks_exact(out.line_size) {
        pixels.extend(
            row[..w * channels]
                .chunks_exact(channels)
                .map(|c| [c[0], c[1], c[2]]),
        );
    }
    RgbImage::new(w, h, pixels)
}

pub fn encode_png(image: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.width() as u32, image.height() as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        writer
            .write_image_data(&image.to_raw())
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    Ok(out)
}

pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.to_raw());
    out
}

pub fn decode_pmap(bytes: &[u8]) -> Result<ProbMap> {
    if bytes.is_empty() {
        return Err(Error::CorruptData("empty file".into()));
    }
    if bytes.starts_with(PMAP_F32_MAGIC) {
        return decode_pmap_f32(bytes);
    }
    let pnm = parse_pnm(bytes)?;
    if pnm.magic != b'5' {
        return Err(Error::UnsupportedFormat(format!(
            "P{} is not a probability map format",
            pnm.magic as char
        )));
    }
    let maxval = pnm.maxval as f64;
    let values = if pnm.maxval > 255 {
        pnm.samples(2)?
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / maxval)
            .collect::<Vec<_>>()
    } else {
        pnm.samples(1)?.iter().map(|&v| v as f64 / maxval).collect()
    };
    ProbMap::from_f64(pnm.width, pnm.height, &values)
}

fn decode_pmap_f32(bytes: &[u8]) -> Result<ProbMap> {
    if bytes.len() < 16 {
        return Err(Error::CorruptData("raw-float header truncated".into()));
    }
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::CorruptData("raw-float dimensions overflow".into()))?;
    let body = &bytes[16..];
    if body.len() != n * 4 {
        return Err(Error::CorruptData(format!(
            "raw-float body has {} bytes, expected {}",
            body.len(),
            n * 4
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    ProbMap::new(width, height, values)
}

/// 16-bit PGM sample for a probability: `round(p * 65535)`.
pub fn pmap_sample(p: f32) -> u16 {
    (p as f64 * 65535.0).round() as u16
}

pub fn encode_pmap(pmap: &ProbMap, format: PmapFormat) -> Vec<u8> {
    match format {
        PmapFormat::Pgm16 => {
            let mut out = format!("P5\n{} {}\n65535\n", pmap.width(), pmap.height()).into_bytes();
            out.reserve(pmap.values().len() * 2);
            for &v in pmap.values() {
                out.extend_from_slice(&pmap_sample(v).to_be_bytes());
            }
            out
        }
        PmapFormat::RawF32 => {
            let mut out = Vec::with_capacity(16 + pmap.values().len() * 4);
            out.extend_from_slice(PMAP_F32_MAGIC);
            out.extend_from_slice(&(pmap.width() as u32).to_le_bytes());
            out.extend_from_slice(&(pmap.height() as u32).to_le_bytes());
            for &v in pmap.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out
        }
    }
}

pub fn encode_mask(mask: &CutoutMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.labels().iter().map(|&fg| if fg { 255u8 } else { 0 }));
    out
}

/// Any nonzero sample is foreground.
pub fn decode_mask(bytes: &[u8]) -> Result<CutoutMask> {
    if bytes.is_empty() {
        return Err(Error::CorruptData("empty file".into()));
    }
    let pnm = parse_pnm(bytes)?;
    if pnm.magic != b'5' {
        return Err(Error::UnsupportedFormat(format!(
            "P{} is not a mask format",
            pnm.magic as char
        )));
    }
    let labels = if pnm.maxval > 255 {
        pnm.samples(2)?
            .chunks_exact(2)
            .map(|c| c != [0, 0])
            .collect()
    } else {
        pnm.samples(1)?.iter().map(|&v| v != 0).collect()
    };
    CutoutMask::new(pnm.width, pnm.height, labels)
}

struct Pnm<'a> {
    magic: u8,
    width: usize,
    height: usize,
    maxval: u32,
    data: &'a [u8],
}

impl Pnm<'_> {
    /// Raster bytes for `bytes_per_pixel` bytes per pixel.
    fn samples(&self, bytes_per_pixel: usize) -> Result<&[u8]> {
        let need = self.width * self.height * bytes_per_pixel;
        if self.data.len() < need {
            return Err(Error::CorruptData(format!(
                "pixel data truncated: {} of {need} bytes",
                self.data.len()
            )));
        }
        Ok(&self.data[..need])
    }
}

fn parse_pnm(bytes: &[u8]) -> Result<Pnm<'_>> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::UnsupportedFormat(
            "unrecognized file signature".into(),
        ));
    }
    let magic = bytes[1];
    if !matches!(magic, b'1'..=b'7') {
        return Err(Error::UnsupportedFormat(
            "unrecognized file signature".into(),
        ));
    }
    if !matches!(magic, b'5' | b'6') {
        return Err(Error::UnsupportedFormat(format!(
            "P{} (only binary P5/P6 supported)",
            magic as char
        )));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(Error::CorruptData("truncated header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::CorruptData("malformed header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::CorruptData("header value overflow".into()))?;
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(Error::CorruptData("missing raster separator".into()));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::CorruptData("zero image dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::CorruptData(format!("invalid maxval {maxval}")));
    }
    Ok(Pnm {
        magic,
        width,
        height,
        maxval: maxval as u32,
        data: &bytes[pos..],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decodes_red_ppm() {
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        for _ in 0..4 {
            bytes.extend_from_slice(&[255, 0, 0]);
        }
        let img = decode_image(&bytes).unwrap();
        assert_eq!(img, RgbImage::filled(2, 2, [255, 0, 0]).unwrap());
    }

    #[test]
    fn empty_file_is_corrupt() {
        assert_eq!(decode_image(&[]).unwrap_err().code(), "CorruptData");
        assert_eq!(decode_pmap(&[]).unwrap_err().code(), "CorruptData");
    }

    #[test]
    fn pgm_rejected_as_image() {
        let bytes = b"P5\n1 1\n255\n\x10".to_vec();
        assert_eq!(
            decode_image(&bytes).unwrap_err().code(),
            "UnsupportedFormat"
        );
    }

    #[test]
    fn ppm_with_comment_header() {
        let bytes = b"P6\n# made by hand\n1 1\n255\n\x01\x02\x03".to_vec();
        assert_eq!(decode_image(&bytes).unwrap().get(0, 0), [1, 2, 3]);
    }

    #[test]
    fn truncated_ppm_is_corrupt() {
        let bytes = b"P6\n2 2\n255\n\x01\x02\x03".to_vec();
        assert_eq!(decode_image(&bytes).unwrap_err().code(), "CorruptData");
    }

    #[test]
    fn png_round_trip_and_16bit_rejection() {
        let img = RgbImage::new(3, 2, (0..6).map(|i| [i * 40, 255 - i * 40, 7]).collect()).unwrap();
        let bytes = encode_png(&img).unwrap();
        assert_eq!(decode_image(&bytes).unwrap(), img);

        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 1, 1);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Sixteen);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[0u8; 6]).unwrap();
        }
        assert_eq!(decode_image(&out).unwrap_err().code(), "UnsupportedFormat");
    }

    #[test]
    fn rgba_png_drops_alpha() {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 1, 1);
            enc.set_color(png::ColorType::Rgba);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[9, 8, 7, 0]).unwrap();
        }
        assert_eq!(decode_image(&out).unwrap().get(0, 0), [9, 8, 7]);
    }

    #[test]
    fn pgm16_sample_values() {
        let mut bytes = b"P5\n3 1\n65535\n".to_vec();
        for s in [65535u16, 0, 32768] {
            bytes.extend_from_slice(&s.to_be_bytes());
        }
        let m = decode_pmap(&bytes).unwrap();
        assert_eq!(m.values()[0], 1.0);
        assert_eq!(m.values()[1], 0.0);
        assert!((m.values()[2] as f64 - 32768.0 / 65535.0).abs() < 1e-7);
    }

    #[test]
    fn half_stores_as_32768() {
        assert_eq!(pmap_sample(0.5), 32768);
        let m = ProbMap::constant(2, 2, 0.5).unwrap();
        let bytes = encode_pmap(&m, PmapFormat::Pgm16);
        assert_eq!(&bytes[bytes.len() - 2..], &32768u16.to_be_bytes());
    }

    #[test]
    fn zero_map_round_trips_identically() {
        let m = ProbMap::zeros(4, 3).unwrap();
        assert_eq!(decode_pmap(&encode_pmap(&m, PmapFormat::Pgm16)).unwrap(), m);
    }

    #[test]
    fn raw_float_out_of_range_rejected() {
        let mut bytes = PMAP_F32_MAGIC.to_vec();
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1.5f32.to_le_bytes());
        assert_eq!(decode_pmap(&bytes).unwrap_err().code(), "ValueOutOfRange");
    }

    #[test]
    fn unwritable_path_is_io_failure() {
        let m = ProbMap::zeros(1, 1).unwrap();
        let err = save_pmap(&m, "/nonexistent-dir/sub/p.pgm").unwrap_err();
        assert_eq!(err.code(), "IoFailure");
    }

    #[test]
    fn missing_file_is_not_found() {
        assert_eq!(
            load_image("/nonexistent/x.png").unwrap_err().code(),
            "NotFound"
        );
    }

    #[test]
    fn mask_round_trip() {
        let m = CutoutMask::new(3, 1, vec![true, false, true]).unwrap();
        let bytes = encode_mask(&m);
        assert_eq!(&bytes[bytes.len() - 3..], &[255, 0, 255]);
        assert_eq!(decode_mask(&bytes).unwrap(), m);
    }

    proptest! {
        #[test]
        fn pmap_round_trips(values in proptest::collection::vec(0.0f32..=1.0, 12)) {
            let m = ProbMap::new(4, 3, values).unwrap();
            let raw = decode_pmap(&encode_pmap(&m, PmapFormat::RawF32)).unwrap();
            prop_assert_eq!(&raw, &m);
            let pgm = decode_pmap(&encode_pmap(&m, PmapFormat::Pgm16)).unwrap();
            for (a, b) in pgm.values().iter().zip(m.values()) {
                prop_assert!(((a - b).abs() as f64) <= 1.0 / 65535.0);
            }
        }
    }
}
