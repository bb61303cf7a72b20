//! PNG readers and writers for the planes the toolkit exchanges with disk.
//!
//! Depth is stored as 16-bit millimeters, instance ids as 16-bit gray,
//! masks as 8-bit 0/255 and score maps as 8- or 16-bit gray.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, RgbImage};

use crate::container::{depth_to_mm, mm_to_depth};
use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, Rgb};
use crate::ldi::{InstanceMap, SegScoreMap};

fn open(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        });
    }
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn img_err(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

fn dims(w: usize, h: usize) -> (u32, u32) {
    (w as u32, h as u32)
}

pub fn read_rgb(path: impl AsRef<Path>) -> Result<Grid<Rgb>> {
    let img = open(path.as_ref())?.into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.pixels().map(|p| p.0).collect();
    Grid::from_vec(w, h, data)
}

pub fn write_rgb(path: impl AsRef<Path>, color: &Grid<Rgb>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = dims(color.width(), color.height());
    let raw: Vec<u8> = color.iter().flatten().copied().collect();
    let img = RgbImage::from_raw(w, h, raw).expect("buffer matches dimensions");
    img.save(path).map_err(img_err(path))
}

/// Encodes an RGB plane as PNG bytes.
pub fn encode_png_rgb(color: &Grid<Rgb>) -> Result<Vec<u8>> {
    let (w, h) = dims(color.width(), color.height());
    let raw: Vec<u8> = color.iter().flatten().copied().collect();
    let mut out = std::io::Cursor::new(Vec::new());
    RgbImage::from_raw(w, h, raw)
        .expect("buffer matches dimensions")
        .write_to(&mut out, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: "<memory>".into(),
            source,
        })?;
    Ok(out.into_inner())
}

pub fn decode_png_rgb(bytes: &[u8]) -> Result<Grid<Rgb>> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: "<memory>".into(),
            source,
        })?
        .into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Grid::from_vec(w, h, img.pixels().map(|p| p.0).collect())
}

fn read_gray16(path: &Path) -> Result<Grid<u16>> {
    let img = open(path)?.into_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Grid::from_vec(w, h, img.into_raw())
}

fn write_gray16(path: &Path, w: usize, h: usize, data: Vec<u16>) -> Result<()> {
    let (w, h) = dims(w, h);
    let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(w, h, data).expect("buffer matches dimensions");
    img.save(path).map_err(img_err(path))
}

/// Reads a 16-bit millimeter range image as meters (0 = no reading).
pub fn read_depth_mm(path: impl AsRef<Path>) -> Result<Grid<f64>> {
    Ok(read_gray16(path.as_ref())?.map(|&mm| mm_to_depth(mm)))
}

/// Writes meters as 16-bit millimeters. Non-positive or non-finite values
/// become 0; values beyond the 16-bit range are an error.
pub fn write_depth_mm(path: impl AsRef<Path>, depth: &Grid<f64>) -> Result<()> {
    let mut data = Vec::with_capacity(depth.len());
    for &d in depth.iter() {
        if !(d.is_finite() && d > 0.0) {
            data.push(0);
            continue;
        }
        data.push(depth_to_mm(d).ok_or(Error::InvalidDepth(d))?);
    }
    write_gray16(path.as_ref(), depth.width(), depth.height(), data)
}

pub fn read_instances(path: impl AsRef<Path>) -> Result<InstanceMap> {
    Ok(read_gray16(path.as_ref())?.map(|&v| v as u32))
}

pub fn write_instances(path: impl AsRef<Path>, ids: &InstanceMap) -> Result<()> {
    let data = ids
        .iter()
        .map(|&v| u16::try_from(v).map_err(|_| Error::InvalidInput(format!("instance id {v} exceeds 16 bits"))))
        .collect::<Result<Vec<_>>>()?;
    write_gray16(path.as_ref(), ids.width(), ids.height(), data)
}

/// Any nonzero pixel is set.
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let img = open(path.as_ref())?.into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Grid::from_vec(w, h, img.pixels().map(|p| p.0[0] > 0).collect())
}

pub fn write_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = dims(mask.width(), mask.height());
    let raw = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    let img: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(w, h, raw).expect("buffer matches dimensions");
    img.save(path).map_err(img_err(path))
}

/// Reads a score map, scaling 8-bit images by 1/255 and 16-bit ones by
/// 1/65535.
pub fn read_scores(path: impl AsRef<Path>) -> Result<SegScoreMap> {
    let img = open(path.as_ref())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values: Vec<f64> = match img {
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) | DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => {
            img.into_luma16().into_raw().into_iter().map(|v| v as f64 / 65535.0).collect()
        }
        _ => img.into_luma8().into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
    };
    SegScoreMap::new(Grid::from_vec(w, h, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planes_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let color = Grid::from_fn(5, 4, |x, y| [x as u8 * 40, y as u8 * 60, 9]);
        write_rgb(dir.path().join("c.png"), &color).unwrap();
        assert_eq!(read_rgb(dir.path().join("c.png")).unwrap(), color);

        let depth = Grid::from_fn(5, 4, |x, y| if x == 0 { 0.0 } else { 0.5 + 0.25 * (x + y) as f64 });
        write_depth_mm(dir.path().join("d.png"), &depth).unwrap();
        assert_eq!(read_depth_mm(dir.path().join("d.png")).unwrap(), depth);

        let ids = Grid::from_fn(5, 4, |x, _| (x as u32) * 1000);
        write_instances(dir.path().join("i.png"), &ids).unwrap();
        assert_eq!(read_instances(dir.path().join("i.png")).unwrap(), ids);

        let mask = Grid::from_fn(5, 4, |x, y| (x + y) % 3 == 0);
        write_mask(dir.path().join("m.png"), &mask).unwrap();
        assert_eq!(read_mask(dir.path().join("m.png")).unwrap(), mask);
        let scores = read_scores(dir.path().join("m.png")).unwrap();
        assert_eq!(scores.scores().map(|&s| s == 1.0), mask);
    }

    #[test]
    fn png_bytes_round_trip() {
        let color = Grid::from_fn(7, 3, |x, y| [x as u8, y as u8, 200]);
        assert_eq!(decode_png_rgb(&encode_png_rgb(&color).unwrap()).unwrap(), color);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_rgb("/definitely/not/here.png").unwrap_err();
        assert!(err.is_config(), "{err}");
    }

    #[test]
    fn sixteen_bit_scores_scale() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.png");
        write_gray16(&path, 2, 1, vec![0, 65535]).unwrap();
        assert_eq!(read_scores(&path).unwrap().scores().as_slice(), &[0.0, 1.0]);
    }
}
