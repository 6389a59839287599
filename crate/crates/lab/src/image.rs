//! Ground-truth images: a built-in synthetic glyph, CSV grids, PGM files and
//! IDX (MNIST) archives.

use std::fs;
use std::path::Path;

use recycle_core::operators::ImageShape;

use crate::error::{LabError, Result};

/// Grayscale image in row-major order with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub shape: ImageShape,
    pub pixels: Vec<f64>,
}

pub const DEFAULT_BUILTIN_SIZE: usize = 16;

/// Resolves an image source:
///
/// - `builtin` or `builtin:<size>`: the synthetic glyph, `size x size`;
/// - `<path>.csv`: comma-separated rows, values taken as given;
/// - `<path>.pgm`: binary (P5) or plain (P2) graymap, scaled by its maxval;
/// - any other path, optionally suffixed `#<index>`: an IDX image archive.
pub fn load_image(source: &str) -> Result<GrayImage> {
    if let Some(rest) = source.strip_prefix("builtin") {
        let size = match rest.strip_prefix(':') {
            Some(s) => s
                .parse()
                .map_err(|_| LabError::Config(format!("bad builtin size in {source:?}")))?,
            None if rest.is_empty() => DEFAULT_BUILTIN_SIZE,
            None => return Err(LabError::Config(format!("unknown image source {source:?}"))),
        };
        return builtin_glyph(size);
    }
    let (path, index) = match source.rsplit_once('#') {
        Some((p, i)) => {
            let index = i
                .parse()
                .map_err(|_| LabError::Config(format!("bad IDX index in {source:?}")))?;
            (p, Some(index))
        }
        None => (source, None),
    };
    let path = Path::new(path);
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match (ext.as_deref(), index) {
        (Some("csv"), None) => read_csv_image(path),
        (Some("pgm"), None) => read_pgm(path),
        (_, index) => read_idx(path, index.unwrap_or(0)),
    }
}

/// A ring crossed by a diagonal stroke, with a half-intensity corner block.
pub fn builtin_glyph(size: usize) -> Result<GrayImage> {
    if !(8..=256).contains(&size) {
        return Err(LabError::Config(format!("builtin image size {size} outside 8..=256")));
    }
    let mut pixels = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            let v = (i as f64 + 0.5) / size as f64;
            let u = (j as f64 + 0.5) / size as f64;
            let r = (u - 0.5).hypot(v - 0.5);
            let ring = (0.22..=0.36).contains(&r);
            let stroke = (u - v).abs() < 0.08 && (0.2..0.8).contains(&u);
            pixels[i * size + j] = if ring || stroke {
                1.0
            } else if u < 0.2 && v < 0.2 {
                0.5
            } else {
                0.0
            };
        }
    }
    Ok(GrayImage {
        shape: ImageShape::new(size, size),
        pixels,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| LabError::io(path, e))
}

pub fn read_csv_image(path: &Path) -> Result<GrayImage> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut pixels = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        if cols.is_some_and(|c| c != record.len()) {
            return Err(LabError::format(path, format!("row {rows} has {} columns", record.len())));
        }
        cols = Some(record.len());
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| LabError::format(path, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(LabError::format(path, "non-finite pixel"));
            }
            pixels.push(v);
        }
        rows += 1;
    }
    let cols = cols.filter(|&c| c > 0).ok_or_else(|| LabError::format(path, "empty image"))?;
    Ok(GrayImage {
        shape: ImageShape::new(rows, cols),
        pixels,
    })
}

pub fn write_csv_image(path: &Path, image: &GrayImage) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in image.pixels.chunks(image.shape.cols) {
        writer.write_record(row.iter().map(|v| v.to_string()))?;
    }
    writer.flush().map_err(|e| LabError::io(path, e))
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = read_file(path)?;
    parse_pgm(&bytes).map_err(|reason| LabError::format(path, reason))
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let mut pos = 0;
    let mut token = || -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let number = |s: String| s.parse::<usize>().map_err(|_| format!("bad header field {s:?}"));
    let cols = number(token()?)?;
    let rows = number(token()?)?;
    let maxval = number(token()?)?;
    if rows == 0 || cols == 0 || maxval == 0 || maxval > 65535 {
        return Err(format!("unsupported header {cols}x{rows} maxval {maxval}"));
    }
    let n = rows * cols;
    let scale = 1.0 / maxval as f64;
    let pixels = match magic.as_str() {
        "P5" => {
            // Exactly one whitespace byte separates the header from the raster.
            let data = &bytes[(pos + 1).min(bytes.len())..];
            let width = if maxval > 255 { 2 } else { 1 };
            if data.len() < n * width {
                return Err(format!("raster has {} bytes, expected {}", data.len(), n * width));
            }
            (0..n)
                .map(|k| {
                    let v = if width == 2 {
                        u16::from_be_bytes([data[2 * k], data[2 * k + 1]]) as f64
                    } else {
                        data[k] as f64
                    };
                    v * scale
                })
                .collect()
        }
        "P2" => (0..n)
            .map(|_| token().and_then(&number).map(|v| v as f64 * scale))
            .collect::<std::result::Result<Vec<_>, _>>()?,
        other => return Err(format!("unsupported magic {other:?}")),
    };
    Ok(GrayImage {
        shape: ImageShape::new(rows, cols),
        pixels,
    })
}

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", image.shape.cols, image.shape.rows).into_bytes();
    out.extend(image.pixels.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    fs::write(path, out).map_err(|e| LabError::io(path, e))
}

/// Reads image `index` from an IDX archive of unsigned bytes (`0x00000803`).
pub fn read_idx(path: &Path, index: usize) -> Result<GrayImage> {
    let bytes = read_file(path)?;
    let err = |reason: String| LabError::format(path, reason);
    if bytes.len() < 16 || bytes[..4] != [0, 0, 8, 3] {
        return Err(err("not an IDX3 unsigned-byte archive".into()));
    }
    let dim = |k: usize| u32::from_be_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
    let (count, rows, cols) = (dim(0), dim(1), dim(2));
    if index >= count {
        return Err(err(format!("index {index} out of range for {count} images")));
    }
    let n = rows * cols;
    let start = 16 + index * n;
    let data = bytes
        .get(start..start + n)
        .ok_or_else(|| err("archive truncated".into()))?;
    Ok(GrayImage {
        shape: ImageShape::new(rows, cols),
        pixels: data.iter().map(|&b| b as f64 / 255.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_sizes() {
        let g = load_image("builtin").unwrap();
        assert_eq!(g.shape, ImageShape::new(16, 16));
        let g = load_image("builtin:28").unwrap();
        assert_eq!(g.pixels.len(), 784);
        assert!(g.pixels.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(g.pixels.contains(&1.0) && g.pixels.contains(&0.0));
        assert!(load_image("builtin:4").is_err());
        assert!(load_image("builtinx").is_err());
    }

    #[test]
    fn plain_pgm_with_comments() {
        let g = parse_pgm(b"P2\n# comment\n3 2\n4\n0 1 2\n3 4 0\n").unwrap();
        assert_eq!(g.shape, ImageShape::new(2, 3));
        assert_eq!(g.pixels, [0.0, 0.25, 0.5, 0.75, 1.0, 0.0]);
    }

    #[test]
    fn binary_pgm_sixteen_bit() {
        let mut bytes = b"P5 2 1 65535\n".to_vec();
        bytes.extend([0xff, 0xff, 0x00, 0x00]);
        let g = parse_pgm(&bytes).unwrap();
        assert_eq!(g.pixels, [1.0, 0.0]);
    }

    #[test]
    fn truncated_pgm_is_rejected() {
        assert!(parse_pgm(b"P5 4 4 255\n\x00\x01").is_err());
        assert!(parse_pgm(b"P6 1 1 255\n\x00").is_err());
    }
}
