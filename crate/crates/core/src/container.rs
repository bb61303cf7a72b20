//! The `.ldi` container.
//!
//! Little-endian throughout. A fixed header is followed by seven sections in
//! a fixed order, each framed as `tag: [u8; 4]`, `len: u64`, `payload`.
//!
//! | part   | tag    | payload                                             |
//! |--------|--------|-----------------------------------------------------|
//! | header | -      | `b"LDIF"`, `version: u16`, `width: u32`, `height: u32` |
//! | camera | `CAMR` | UTF-8 `key = value` text (intrinsics and `pose`)    |
//! | fg color | `FGCO` | `W·H·3` bytes, RGB row-major                       |
//! | fg depth | `FGDP` | `W·H` `u16` millimeters                            |
//! | bg color | `BGCO` | `W·H·3` bytes                                      |
//! | bg depth | `BGDP` | `W·H` `u16` millimeters, 0 where invalid           |
//! | bg valid | `BGVL` | `W·H` bytes, 0 or 1                                |
//! | fg mask  | `FGMK` | `W·H` bytes, 0 or 1                                |
//!
//! Depth is rounded to the nearest millimeter, so a round trip is exact for
//! color and masks and within 0.5 mm for depth.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, Rgb};
use crate::ldi::{LayeredDepthImage, RgbdLayer};
use crate::metadata::{format_camera, Metadata};

pub const MAGIC: [u8; 4] = *b"LDIF";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4;

const SECTIONS: [(&[u8; 4], &str); 7] = [
    (b"CAMR", "camera"),
    (b"FGCO", "fg color"),
    (b"FGDP", "fg depth"),
    (b"BGCO", "bg color"),
    (b"BGDP", "bg depth"),
    (b"BGVL", "bg valid"),
    (b"FGMK", "fg mask"),
];

/// Largest depth representable in 16-bit millimeters.
pub const MAX_DEPTH_M: f64 = 65.535;

/// Meters to millimeters, `None` if the value does not fit.
pub fn depth_to_mm(d: f64) -> Option<u16> {
    let mm = (d * 1000.0).round();
    (mm.is_finite() && (0.0..=65535.0).contains(&mm)).then_some(mm as u16)
}

pub fn mm_to_depth(mm: u16) -> f64 {
    mm as f64 / 1000.0
}

pub fn encode(ldi: &LayeredDepthImage) -> Result<Vec<u8>> {
    ldi.validate()?;
    let (w, h) = (ldi.width(), ldi.height());
    let mut out = Vec::with_capacity(HEADER_LEN + w * h * 12 + 512);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());

    let camera = format_camera(&ldi.camera, Some(&ldi.ref_pose)).into_bytes();
    let payloads = [
        camera,
        color_bytes(&ldi.foreground.color),
        depth_bytes(&ldi.foreground.depth, &ldi.foreground.valid, "fg depth")?,
        color_bytes(&ldi.background.color),
        depth_bytes(&ldi.background.depth, &ldi.background.valid, "bg depth")?,
        mask_bytes(&ldi.background.valid),
        mask_bytes(&ldi.fg_mask),
    ];
    for ((tag, _), payload) in SECTIONS.iter().zip(payloads) {
        out.extend_from_slice(*tag);
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
    }
    Ok(out)
}

fn color_bytes(color: &Grid<Rgb>) -> Vec<u8> {
    color.iter().flatten().copied().collect()
}

fn depth_bytes(depth: &Grid<f64>, valid: &Mask, section: &'static str) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(depth.len() * 2);
    for (&d, &v) in depth.iter().zip(valid.iter()) {
        let mm = if v {
            match depth_to_mm(d) {
                Some(mm) if mm > 0 => mm,
                _ => {
                    return Err(Error::format(
                        section,
                        format!("depth {d} m not representable in 16-bit millimeters"),
                    ))
                }
            }
        } else {
            0
        };
        out.extend_from_slice(&mm.to_le_bytes());
    }
    Ok(out)
}

fn mask_bytes(mask: &Mask) -> Vec<u8> {
    mask.iter().map(|&b| b as u8).collect()
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                Error::format(
                    section,
                    format!("truncated: need {n} bytes at offset {}, file has {}", self.pos, self.buf.len()),
                )
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn section(&mut self, tag: &[u8; 4], name: &'static str, expected: Option<usize>) -> Result<&'a [u8]> {
        let found = self.take(4, name)?;
        if found != tag {
            return Err(Error::format(
                name,
                format!(
                    "expected tag {:?}, found {:?}",
                    String::from_utf8_lossy(tag),
                    String::from_utf8_lossy(found)
                ),
            ));
        }
        let len = u64::from_le_bytes(self.take(8, name)?.try_into().unwrap());
        let len = usize::try_from(len).map_err(|_| Error::format(name, "section length overflows"))?;
        if let Some(exp) = expected {
            if len != exp {
                return Err(Error::format(name, format!("length {len}, expected {exp}")));
            }
        }
        self.take(len, name)
    }
}

pub fn decode(bytes: &[u8]) -> Result<LayeredDepthImage> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(4, "header")?;
    if magic != MAGIC {
        return Err(Error::format("header", "not an .ldi container (bad magic)"));
    }
    let version = u16::from_le_bytes(r.take(2, "header")?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let w = u32::from_le_bytes(r.take(4, "header")?.try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(r.take(4, "header")?.try_into().unwrap()) as usize;
    let n = w
        .checked_mul(h)
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::format("header", format!("bad image size {w}x{h}")))?;

    let camera_text = r.section(SECTIONS[0].0, SECTIONS[0].1, None)?;
    let camera_text = std::str::from_utf8(camera_text).map_err(|_| Error::format("camera", "not UTF-8"))?;
    let md = Metadata::parse(camera_text).map_err(|e| Error::format("camera", e.to_string()))?;
    let camera = md.intrinsics().map_err(|e| Error::format("camera", e.to_string()))?;
    let ref_pose = md
        .pose()
        .map_err(|e| Error::format("camera", e.to_string()))?
        .ok_or_else(|| Error::format("camera", "missing pose"))?;
    if (camera.width, camera.height) != (w, h) {
        return Err(Error::format("camera", "image size disagrees with header"));
    }

    let fg_color = parse_color(r.section(SECTIONS[1].0, SECTIONS[1].1, Some(n * 3))?, w, h);
    let fg_depth = parse_depth(r.section(SECTIONS[2].0, SECTIONS[2].1, Some(n * 2))?, w, h);
    let bg_color = parse_color(r.section(SECTIONS[3].0, SECTIONS[3].1, Some(n * 3))?, w, h);
    let bg_depth = parse_depth(r.section(SECTIONS[4].0, SECTIONS[4].1, Some(n * 2))?, w, h);
    let bg_valid = parse_mask(r.section(SECTIONS[5].0, SECTIONS[5].1, Some(n))?, w, h, "bg valid")?;
    let fg_mask = parse_mask(r.section(SECTIONS[6].0, SECTIONS[6].1, Some(n))?, w, h, "fg mask")?;
    if r.pos != bytes.len() {
        return Err(Error::format("fg mask", format!("{} trailing bytes", bytes.len() - r.pos)));
    }

    if fg_depth.iter().any(|&d| d <= 0.0) {
        return Err(Error::format("fg depth", "foreground layer must be dense (found 0 mm)"));
    }
    let foreground = RgbdLayer::new(fg_color, fg_depth, Grid::filled(w, h, true))
        .map_err(|e| Error::format("fg depth", e.to_string()))?;
    let background =
        RgbdLayer::new(bg_color, bg_depth, bg_valid).map_err(|e| Error::format("bg depth", e.to_string()))?;
    LayeredDepthImage::new(foreground, background, fg_mask, camera, ref_pose)
}

fn parse_color(bytes: &[u8], w: usize, h: usize) -> Grid<Rgb> {
    let data = bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Grid::from_vec(w, h, data).expect("length checked")
}

fn parse_depth(bytes: &[u8], w: usize, h: usize) -> Grid<f64> {
    let data = bytes
        .chunks_exact(2)
        .map(|c| mm_to_depth(u16::from_le_bytes([c[0], c[1]])))
        .collect();
    Grid::from_vec(w, h, data).expect("length checked")
}

fn parse_mask(bytes: &[u8], w: usize, h: usize, section: &'static str) -> Result<Mask> {
    let data = bytes
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::format(section, format!("mask byte {other} is not 0 or 1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Grid::from_vec(w, h, data).expect("length checked"))
}

pub fn save_ldi(ldi: &LayeredDepthImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(ldi)?;
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_ldi(path: impl AsRef<Path>) -> Result<LayeredDepthImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraIntrinsics, RigidPose};
    use proptest::prelude::*;

    fn sample(w: usize, h: usize, seed: u32) -> LayeredDepthImage {
        let k = CameraIntrinsics::new(50.0, 51.0, w as f64 / 2.0, h as f64 / 2.0, w, h).unwrap();
        let fg_color = Grid::from_fn(w, h, |x, y| [(x as u32 * 7 + seed) as u8, y as u8, (x ^ y) as u8]);
        let fg_depth = Grid::from_fn(w, h, |x, y| 0.5 + 0.0123 * (x + 3 * y) as f64 + seed as f64 * 1e-4);
        let fg = RgbdLayer::from_depth(fg_color, fg_depth.clone()).unwrap();
        let mask = Grid::from_fn(w, h, |x, y| (x + y + seed as usize) % 3 == 0);
        let mut bg = fg.clone();
        for i in 0..mask.len() {
            if mask[i] {
                if i % 2 == 0 {
                    bg.set(i, [9, 8, 7], fg_depth[i] + 1.2345);
                } else {
                    bg.clear(i);
                }
            }
        }
        LayeredDepthImage::new(fg, bg, mask, k, RigidPose::from_translation(0.1, 0.2, 0.3)).unwrap()
    }

    #[test]
    fn depth_quantization_bound() {
        let mm = depth_to_mm(1.2345).unwrap();
        assert!(mm == 1234 || mm == 1235);
        assert!((mm_to_depth(mm) - 1.2345).abs() <= 0.001);
        assert_eq!(depth_to_mm(70.0), None);
    }

    #[test]
    fn truncated_file_names_section() {
        let bytes = encode(&sample(8, 6, 1)).unwrap();
        for cut in [0, 3, 10, 20, 40, bytes.len() / 2, bytes.len() - 1] {
            match decode(&bytes[..cut]) {
                Err(Error::Format { reason, .. }) => assert!(reason.contains("truncated") || reason.contains("magic")),
                other => panic!("cut {cut}: expected format error, got {other:?}"),
            }
        }
        match decode(&bytes[..bytes.len() - 1]) {
            Err(Error::Format { section, .. }) => assert_eq!(section, "fg mask"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = encode(&sample(4, 4, 0)).unwrap();
        bytes[4] = 2;
        assert!(matches!(decode(&bytes), Err(Error::Version { found: 2, expected: 1 })));
    }

    #[test]
    fn corrupt_mask_byte() {
        let mut bytes = encode(&sample(4, 4, 0)).unwrap();
        let last = bytes.len() - 1;
        bytes[last] = 7;
        assert!(matches!(decode(&bytes), Err(Error::Format { section: "fg mask", .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ldi");
        let ldi = sample(5, 7, 3);
        save_ldi(&ldi, &path).unwrap();
        let back = load_ldi(&path).unwrap();
        assert_eq!(back.fg_mask, ldi.fg_mask);
        assert_eq!(back.camera, ldi.camera);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_preserves_planes(w in 1usize..20, h in 1usize..20, seed in 0u32..1000) {
            let ldi = sample(w, h, seed);
            let back = decode(&encode(&ldi).unwrap()).unwrap();
            prop_assert_eq!(&back.foreground.color, &ldi.foreground.color);
            prop_assert_eq!(&back.background.color, &ldi.background.color);
            prop_assert_eq!(&back.background.valid, &ldi.background.valid);
            prop_assert_eq!(&back.fg_mask, &ldi.fg_mask);
            prop_assert_eq!(back.ref_pose, ldi.ref_pose);
            for (layer_a, layer_b) in [(&back.foreground, &ldi.foreground), (&back.background, &ldi.background)] {
                for (a, b) in layer_a.depth.iter().zip(layer_b.depth.iter()) {
                    prop_assert!((a - b).abs() <= 0.0005 + 1e-12);
                }
            }
            // encoding is a pure function of the quantized content
            prop_assert_eq!(encode(&back).unwrap(), encode(&ldi).unwrap());
        }
    }
}
