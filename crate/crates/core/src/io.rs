//! File formats.
//!
//! * Images: 8-bit grayscale or RGB, PNG or binary PGM (`P5`). RGB is reduced to
//!   luminance with weights 0.299 / 0.587 / 0.114, then every channel value is
//!   divided by 255.
//! * Masks: 8-bit grayscale PNG, foreground = 255, background = 0. Loading
//!   treats any non-zero value as foreground.
//! * Centerlines: UTF-8 JSON array of `[x, y]` integer pairs in path order,
//!   e.g. `[[3,4],[3,5]]`. A list of centerlines is an array of such arrays.
//! * Predecessor archives: see [`save_predecessors`].

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::minpath::{PixelStatus, PredecessorField};
use crate::patch::Patch;
use crate::raster::{BinaryMask, Centerline, GridImage, PixelCoord};

const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

fn open_dynamic(path: &Path) -> Result<DynamicImage> {
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        other => {
            return Err(Error::UnsupportedImage {
                path: path.into(),
                message: format!("expected PNG or PGM, found {other:?}"),
            })
        }
    }
    reader.decode().map_err(|e| Error::ImageDecode {
        path: path.into(),
        message: e.to_string(),
    })
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GridImage> {
    let path = path.as_ref();
    let img = open_dynamic(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(g) => g.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageRgb8(rgb) => rgb
            .pixels()
            .map(|p| {
                let v: f64 = p
                    .0
                    .iter()
                    .zip(LUMA_WEIGHTS)
                    .map(|(&c, w)| w * (c as f64 / 255.0))
                    .sum();
                v.clamp(0.0, 1.0)
            })
            .collect(),
        other => {
            return Err(Error::UnsupportedImage {
                path: path.into(),
                message: format!(
                    "only 8-bit grayscale or RGB is supported, found {:?}",
                    other.color()
                ),
            })
        }
    };
    GridImage::new(w, h, data)
}

fn format_for(path: &Path) -> ImageFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("pgm") || ext.eq_ignore_ascii_case("pnm") => {
            ImageFormat::Pnm
        }
        _ => ImageFormat::Png,
    }
}

fn write_gray(img: &GrayImage, path: &Path) -> Result<()> {
    img.save_with_format(path, format_for(path))
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::format(path, other.to_string()),
        })
}

/// Writes an image as 8-bit grayscale (PNG, or PGM for `.pgm` paths).
pub fn save_image(image: &GridImage, path: impl AsRef<Path>) -> Result<()> {
    let (w, h) = image.dims();
    let buf: Vec<u8> = image
        .data()
        .iter()
        .map(|v| (v * 255.0).round() as u8)
        .collect();
    let img = GrayImage::from_raw(w as u32, h as u32, buf).expect("buffer size matches dims");
    write_gray(&img, path.as_ref())
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let (w, h) = mask.dims();
    let buf: Vec<u8> = mask
        .labels()
        .iter()
        .map(|&fg| if fg { 255 } else { 0 })
        .collect();
    let img = GrayImage::from_raw(w as u32, h as u32, buf).expect("buffer size matches dims");
    write_gray(&img, path.as_ref())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let img = open_dynamic(path)?;
    let gray = match img {
        DynamicImage::ImageLuma8(g) => g,
        DynamicImage::ImageRgb8(_) => img.to_luma8(),
        other => {
            return Err(Error::UnsupportedImage {
                path: path.into(),
                message: format!("mask must be 8-bit, found {:?}", other.color()),
            })
        }
    };
    BinaryMask::new(
        gray.width() as usize,
        gray.height() as usize,
        gray.pixels().map(|p| p.0[0] != 0).collect(),
    )
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string(value).map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn to_pairs(line: &Centerline) -> Vec<[usize; 2]> {
    line.points().iter().map(|p| [p.x, p.y]).collect()
}

fn from_pairs(pairs: Vec<[usize; 2]>, path: &Path) -> Result<Centerline> {
    Centerline::new(pairs.into_iter().map(|[x, y]| PixelCoord::new(x, y)).collect())
        .map_err(|e| Error::format(path, e.to_string()))
}

fn check_dims(line: &Centerline, dims: Option<(usize, usize)>, path: &Path) -> Result<()> {
    if let Some((w, h)) = dims {
        if let Some(p) = line.points().iter().find(|p| !p.is_inside(w, h)) {
            return Err(Error::format(
                path,
                format!("point ({}, {}) outside {w}x{h} image", p.x, p.y),
            ));
        }
    }
    Ok(())
}

pub fn centerline_to_json(line: &Centerline) -> String {
    serde_json::to_string(&to_pairs(line)).expect("integer pairs always serialize")
}

pub fn save_centerline(line: &Centerline, path: impl AsRef<Path>) -> Result<()> {
    write_json(&to_pairs(line), path.as_ref())
}

/// Loads a centerline; with `dims`, points outside the raster are rejected.
pub fn load_centerline(path: impl AsRef<Path>, dims: Option<(usize, usize)>) -> Result<Centerline> {
    let path = path.as_ref();
    let line = from_pairs(read_json(path)?, path)?;
    check_dims(&line, dims, path)?;
    Ok(line)
}

pub fn save_centerlines(lines: &[Centerline], path: impl AsRef<Path>) -> Result<()> {
    let all: Vec<_> = lines.iter().map(to_pairs).collect();
    write_json(&all, path.as_ref())
}

pub fn load_centerlines(
    path: impl AsRef<Path>,
    dims: Option<(usize, usize)>,
) -> Result<Vec<Centerline>> {
    let path = path.as_ref();
    let all: Vec<Vec<[usize; 2]>> = read_json(path)?;
    all.into_iter()
        .map(|pairs| {
            let line = from_pairs(pairs, path)?;
            check_dims(&line, dims, path)?;
            Ok(line)
        })
        .collect()
}

pub fn save_endpoints(endpoints: &[(PixelCoord, PixelCoord)], path: impl AsRef<Path>) -> Result<()> {
    let all: Vec<[[usize; 2]; 2]> = endpoints
        .iter()
        .map(|(s, e)| [[s.x, s.y], [e.x, e.y]])
        .collect();
    write_json(&all, path.as_ref())
}

/// Loads `[[[sx,sy],[ex,ey]], ...]`.
pub fn load_endpoints(path: impl AsRef<Path>) -> Result<Vec<(PixelCoord, PixelCoord)>> {
    let all: Vec<[[usize; 2]; 2]> = read_json(path.as_ref())?;
    Ok(all
        .into_iter()
        .map(|[s, e]| (PixelCoord::new(s[0], s[1]), PixelCoord::new(e[0], e[1])))
        .collect())
}

const ARCHIVE_MAGIC: &[u8; 4] = b"TPPF";
const ARCHIVE_VERSION: u16 = 1;
const NO_PARENT: u32 = u32::MAX;

/// Writes a predecessor archive. Layout, all integers little-endian:
///
/// ```text
/// offset  size      field
/// 0       4         magic "TPPF"
/// 4       2         version (1)
/// 6       4         width
/// 10      4         height
/// 14      4         start pixel index (y * width + x)
/// 18      4·n       parent index per pixel, row-major; 0xFFFFFFFF = none
/// ..      8·n       distance per pixel, f64; +inf when unreached
/// ..      n         status per pixel: 1 = finalized, 0 = pending
/// ```
/// where `n = width * height`.
pub fn save_predecessors(field: &PredecessorField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let n = field.width() * field.height();
    let mut buf = Vec::with_capacity(18 + 13 * n);
    buf.extend_from_slice(ARCHIVE_MAGIC);
    buf.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(field.width() as u32).to_le_bytes());
    buf.extend_from_slice(&(field.height() as u32).to_le_bytes());
    buf.extend_from_slice(&(field.start_index() as u32).to_le_bytes());
    for i in 0..n {
        let parent = field.prev_index(i).map_or(NO_PARENT, |p| p as u32);
        buf.extend_from_slice(&parent.to_le_bytes());
    }
    for i in 0..n {
        buf.extend_from_slice(&field.dist_index(i).to_le_bytes());
    }
    for i in 0..n {
        buf.push(u8::from(field.status_index(i) == PixelStatus::Finalized));
    }
    out.write_all(&buf)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_predecessors(path: impl AsRef<Path>) -> Result<PredecessorField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::format(path, m.to_string());
    if bytes.len() < 18 || &bytes[0..4] != ARCHIVE_MAGIC {
        return Err(bad("not a predecessor archive"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != ARCHIVE_VERSION {
        return Err(bad(&format!("unsupported archive version {version}")));
    }
    let width = u32_at(6) as usize;
    let height = u32_at(10) as usize;
    let start = u32_at(14) as usize;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| bad("dimensions overflow"))?;
    if n == 0 || bytes.len() != 18 + 13 * n {
        return Err(bad("archive length does not match dimensions"));
    }
    let mut prev = Vec::with_capacity(n);
    for i in 0..n {
        let p = u32_at(18 + 4 * i);
        if p == NO_PARENT {
            prev.push(None);
        } else if (p as usize) < n {
            prev.push(Some(p as usize));
        } else {
            return Err(bad("parent index out of range"));
        }
    }
    let dbase = 18 + 4 * n;
    let dist = (0..n)
        .map(|i| f64::from_le_bytes(bytes[dbase + 8 * i..dbase + 8 * i + 8].try_into().unwrap()))
        .collect();
    let sbase = dbase + 8 * n;
    let status = bytes[sbase..sbase + n]
        .iter()
        .map(|&b| {
            if b == 1 {
                PixelStatus::Finalized
            } else {
                PixelStatus::Pending
            }
        })
        .collect();
    PredecessorField::from_parts(width, height, start, prev, dist, status)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Tiles patches into a grayscale contact sheet with a 1-pixel gap.
pub fn patch_contact_sheet(patches: &[Patch], columns: usize) -> Option<GrayImage> {
    let first = patches.first()?;
    let (pw, ph) = (first.width(), first.length());
    let columns = columns.max(1).min(patches.len());
    let rows = patches.len().div_ceil(columns);
    let mut sheet = GrayImage::from_pixel(
        (columns * (pw + 1) + 1) as u32,
        (rows * (ph + 1) + 1) as u32,
        Luma([0]),
    );
    for (k, patch) in patches.iter().enumerate() {
        let ox = (k % columns) * (pw + 1) + 1;
        let oy = (k / columns) * (ph + 1) + 1;
        for i in 0..ph.min(patch.length()) {
            for j in 0..pw.min(patch.width()) {
                let v = (patch.get(i, j) * 255.0).round() as u8;
                sheet.put_pixel((ox + j) as u32, (oy + i) as u32, Luma([v]));
            }
        }
    }
    Some(sheet)
}

pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    write_gray(img, path.as_ref())
}

/// Renders the image in gray, tints foreground red and draws centerlines in
/// yellow.
pub fn render_overlay(image: &GridImage, mask: Option<&BinaryMask>, lines: &[Centerline]) -> RgbImage {
    let (w, h) = image.dims();
    let mut out = RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let g = image.get(x, y) * 255.0;
            let px = if mask.is_some_and(|m| m.is_fg(PixelCoord::new(x, y))) {
                Rgb([(0.5 * g + 127.5).round() as u8, (0.5 * g).round() as u8, (0.5 * g).round() as u8])
            } else {
                let v = g.round() as u8;
                Rgb([v, v, v])
            };
            out.put_pixel(x as u32, y as u32, px);
        }
    }
    for line in lines {
        for p in line.points().iter().filter(|p| p.is_inside(w, h)) {
            out.put_pixel(p.x as u32, p.y as u32, Rgb([255, 255, 0]));
        }
    }
    out
}

pub fn save_rgb(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::format(path, other.to_string()),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_pgm(dir: &Path, name: &str, w: usize, h: usize, data: &[u8]) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
        bytes.extend_from_slice(data);
        fs::write(&path, bytes).unwrap();
        path
    }

    #[test]
    fn pgm_full_scale_and_zero() {
        let dir = tempfile::tempdir().unwrap();
        let one = load_image(write_pgm(dir.path(), "a.pgm", 1, 1, &[255])).unwrap();
        assert_eq!(one.data(), &[1.0]);
        let zero = load_image(write_pgm(dir.path(), "b.pgm", 1, 1, &[0])).unwrap();
        assert_eq!(zero.data(), &[0.0]);
    }

    #[test]
    fn rgb_uses_luminance_weights() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        RgbImage::from_raw(2, 1, vec![255, 0, 0, 0, 255, 0])
            .unwrap()
            .save(&path)
            .unwrap();
        let img = load_image(&path).unwrap();
        assert!((img.get(0, 0) - 0.299).abs() < 1e-12);
        assert!((img.get(1, 0) - 0.587).abs() < 1e-12);
    }

    #[test]
    fn rejects_sixteen_bit_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        image::ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(1, 1, vec![1000])
            .unwrap()
            .save(&path)
            .unwrap();
        assert!(matches!(load_image(&path), Err(Error::UnsupportedImage { .. })));
        let junk = dir.path().join("e.png");
        fs::write(&junk, b"definitely not an image").unwrap();
        assert!(load_image(&junk).is_err());
        assert!(matches!(
            load_image(dir.path().join("missing.png")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn mask_file_has_exact_fg_count() {
        let dir = tempfile::tempdir().unwrap();
        let mut mask = BinaryMask::filled(4, 3, false).unwrap();
        for p in [(0, 0), (2, 1), (3, 2)] {
            mask.set(PixelCoord::new(p.0, p.1), true);
        }
        let path = dir.path().join("m.png");
        save_mask(&mask, &path).unwrap();
        let raw = image::open(&path).unwrap().to_luma8();
        assert_eq!(raw.pixels().filter(|p| p.0[0] == 255).count(), 3);
        assert_eq!(raw.pixels().filter(|p| p.0[0] == 0).count(), 9);
        assert_eq!(load_mask(&path).unwrap(), mask);

        let empty = BinaryMask::filled(3, 3, false).unwrap();
        save_mask(&empty, &path).unwrap();
        assert!(image::open(&path).unwrap().to_luma8().pixels().all(|p| p.0[0] == 0));
    }

    #[test]
    fn centerline_json_layout() {
        let one = Centerline::new(vec![PixelCoord::new(0, 0)]).unwrap();
        assert_eq!(centerline_to_json(&one), "[[0,0]]");
        let two = Centerline::new(vec![PixelCoord::new(3, 4), PixelCoord::new(3, 5)]).unwrap();
        assert_eq!(centerline_to_json(&two), "[[3,4],[3,5]]");
    }

    #[test]
    fn centerline_load_checks_dims_and_syntax() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.json");
        fs::write(&path, "[[3,4],[3,5]]").unwrap();
        assert!(load_centerline(&path, Some((4, 6))).is_ok());
        assert!(load_centerline(&path, Some((4, 5))).is_err());
        fs::write(&path, "[[3,4],").unwrap();
        assert!(matches!(load_centerline(&path, None), Err(Error::Format { .. })));
        fs::write(&path, "[]").unwrap();
        assert!(load_centerline(&path, None).is_err());
    }
}
