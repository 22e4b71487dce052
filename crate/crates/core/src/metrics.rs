//! Segmentation metrics over binary masks, plus mask readers for PGM (P5,
//! maxval 1) and PNG files.
//!
//! Zero denominators follow the empty-agreement convention: DSC and IoU are
//! 1 (so Dice loss is 0), pixel accuracy of an empty mask is 1.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    pixels: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("mask dimensions must be positive (got {width}x{height})")]
    EmptyDimensions { width: usize, height: usize },
    #[error("{width}x{height} mask needs {expected} pixels, got {actual}")]
    Length {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("mask sizes differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("PGM: {0}")]
    Pgm(String),
    #[error("image: {0}")]
    Image(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl BinaryMask {
    /// Row-major pixels.
    pub fn new(width: usize, height: usize, pixels: Vec<bool>) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::EmptyDimensions { width, height });
        }
        let expected = width
            .checked_mul(height)
            .ok_or(MaskError::EmptyDimensions { width, height })?;
        if pixels.len() != expected {
            return Err(MaskError::Length {
                width,
                height,
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Result<Self, MaskError> {
        Self::new(width, height, vec![value; width.saturating_mul(height)])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn complement(&self) -> Self {
        Self {
            pixels: self.pixels.iter().map(|p| !p).collect(),
            ..self.clone()
        }
    }

    pub fn foreground(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn confusion_counts(pred: &BinaryMask, truth: &BinaryMask) -> Result<ConfusionCounts, MaskError> {
    if (pred.width, pred.height) != (truth.width, truth.height) {
        return Err(MaskError::DimensionMismatch(
            pred.width,
            pred.height,
            truth.width,
            truth.height,
        ));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.pixels.iter().zip(&truth.pixels) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentationMetrics {
    pub dsc: f64,
    pub dice_loss: f64,
    pub pa: f64,
    pub iou: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

pub fn segmentation_metrics(c: ConfusionCounts) -> SegmentationMetrics {
    let dsc = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
    SegmentationMetrics {
        dsc,
        dice_loss: 1.0 - dsc,
        pa: ratio(c.tp + c.tn, c.total()),
        iou: ratio(c.tp, c.tp + c.fp + c.fn_),
    }
}

/// Macro-averaged IoU over per-class binary mask pairs.
pub fn mean_iou(pairs: &[(BinaryMask, BinaryMask)]) -> Result<f64, MaskError> {
    if pairs.is_empty() {
        return Ok(1.0);
    }
    let mut sum = 0.0;
    for (pred, truth) in pairs {
        sum += segmentation_metrics(confusion_counts(pred, truth)?).iou;
    }
    Ok(sum / pairs.len() as f64)
}

/// Parses a binary PGM (P5) whose maxval is 1.
pub fn parse_pgm(bytes: &[u8]) -> Result<BinaryMask, MaskError> {
    let err = |m: &str| MaskError::Pgm(m.to_string());
    let mut pos = 0;
    let mut token = || -> Result<&[u8], MaskError> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(err("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(&bytes[start..pos])
    };
    if token()? != b"P5" {
        return Err(err("missing P5 magic"));
    }
    let mut number = |what: &str| -> Result<usize, MaskError> {
        let t = token()?;
        std::str::from_utf8(t)
            .ok()
            .filter(|s| s.len() <= 9 && s.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(&format!("bad {what}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval != 1 {
        return Err(err(&format!("maxval must be 1, got {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(err("truncated header"));
    }
    let raster = &bytes[pos + 1..];
    let expected = width
        .checked_mul(height)
        .filter(|&n| n > 0)
        .ok_or(MaskError::EmptyDimensions { width, height })?;
    if raster.len() != expected {
        return Err(err(&format!("raster has {} bytes, expected {expected}", raster.len())));
    }
    if let Some(&bad) = raster.iter().find(|&&b| b > 1) {
        return Err(err(&format!("pixel value {bad} exceeds maxval 1")));
    }
    BinaryMask::new(width, height, raster.iter().map(|&b| b == 1).collect())
}

pub fn encode_pgm(mask: &BinaryMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n1\n", mask.width, mask.height).into_bytes();
    out.extend(mask.pixels.iter().map(|&p| u8::from(p)));
    out
}

/// Decodes a PNG; any nonzero luma pixel is foreground.
pub fn parse_png(bytes: &[u8]) -> Result<BinaryMask, MaskError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| MaskError::Image(e.to_string()))?
        .into_luma16();
    let (w, h) = img.dimensions();
    BinaryMask::new(w as usize, h as usize, img.pixels().map(|p| p.0[0] != 0).collect())
}

/// Reads a PGM or PNG mask, chosen by magic bytes.
pub fn read_mask(path: &Path) -> Result<BinaryMask, MaskError> {
    let bytes = std::fs::read(path).map_err(|e| MaskError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    if bytes.starts_with(b"P5") {
        parse_pgm(&bytes)
    } else {
        parse_png(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-6
    }

    #[test]
    fn worked_counts() {
        let c = ConfusionCounts {
            tp: 50,
            fp: 10,
            fn_: 20,
            tn: 944,
        };
        let m = segmentation_metrics(c);
        assert!(close(m.dsc, 0.769231));
        assert_eq!(m.iou, 0.625);
        assert!(close(m.pa, 0.970703));
        assert!(close(m.dice_loss, 0.230769));
    }

    #[test]
    fn constructed_32x32_mask() {
        let mut pred = BinaryMask::filled(32, 32, false).unwrap();
        let mut truth = pred.clone();
        let cells = (0..32).flat_map(|y| (0..32).map(move |x| (x, y)));
        for (i, (x, y)) in cells.enumerate() {
            if i < 50 {
                pred.set(x, y, true);
                truth.set(x, y, true);
            } else if i < 60 {
                pred.set(x, y, true);
            } else if i < 80 {
                truth.set(x, y, true);
            }
        }
        let c = confusion_counts(&pred, &truth).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (50, 10, 20, 944));
    }

    #[test]
    fn empty_vs_empty() {
        let m = BinaryMask::filled(4, 4, false).unwrap();
        let s = segmentation_metrics(confusion_counts(&m, &m).unwrap());
        assert_eq!((s.dsc, s.iou, s.pa, s.dice_loss), (1.0, 1.0, 1.0, 0.0));
    }

    #[test]
    fn complement_has_no_agreement() {
        let mut m = BinaryMask::filled(3, 2, false).unwrap();
        m.set(1, 1, true);
        let c = confusion_counts(&m, &m.complement()).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        let s = segmentation_metrics(c);
        assert_eq!((s.dsc, s.iou, s.pa), (0.0, 0.0, 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let a = BinaryMask::filled(3, 2, false).unwrap();
        let b = BinaryMask::filled(2, 3, false).unwrap();
        assert!(matches!(
            confusion_counts(&a, &b),
            Err(MaskError::DimensionMismatch(..))
        ));
        assert!(BinaryMask::new(2, 2, vec![true; 3]).is_err());
        assert!(BinaryMask::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn mean_iou_averages() {
        let full = BinaryMask::filled(2, 2, true).unwrap();
        let empty = BinaryMask::filled(2, 2, false).unwrap();
        let v = mean_iou(&[(full.clone(), full.clone()), (empty, full)]).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn pgm_roundtrip_and_comments() {
        let mut m = BinaryMask::filled(3, 2, false).unwrap();
        m.set(2, 0, true);
        m.set(0, 1, true);
        assert_eq!(parse_pgm(&encode_pgm(&m)).unwrap(), m);
        let commented = b"P5 # mask\n3 # w\n2\n1\n\x00\x00\x01\x01\x00\x00";
        assert_eq!(parse_pgm(commented).unwrap(), m);
    }

    #[test]
    fn pgm_rejects() {
        for bad in [
            &b"P2\n1 1\n1\n\x00"[..],
            b"P5\n1 1\n255\n\x00",
            b"P5\n2 1\n1\n\x00",
            b"P5\n1 1\n1\n\x02",
            b"P5\n0 1\n1\n",
            b"P5\n1",
            b"P5\n99999999999 1\n1\n",
        ] {
            assert!(parse_pgm(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn png_nonzero_is_foreground() {
        let mut img = image::GrayImage::new(3, 1);
        img.put_pixel(0, 0, image::Luma([0]));
        img.put_pixel(1, 0, image::Luma([7]));
        img.put_pixel(2, 0, image::Luma([255]));
        let mut bytes = Vec::new();
        img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
            .unwrap();
        let m = parse_png(&bytes).unwrap();
        assert_eq!(m.pixels(), &[false, true, true]);
    }

    proptest! {
        #[test]
        fn metrics_in_range_and_linked(tp in 0u64..5000, tn in 0u64..5000, fp in 0u64..5000, fn_ in 0u64..5000) {
            let s = segmentation_metrics(ConfusionCounts { tp, tn, fp, fn_ });
            for v in [s.dsc, s.dice_loss, s.pa, s.iou] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert_eq!(s.dsc + s.dice_loss, 1.0);
            if tp + fp + fn_ > 0 {
                prop_assert!((s.dsc - 2.0 * s.iou / (1.0 + s.iou)).abs() < 1e-12);
            }
        }

        #[test]
        fn self_comparison_is_perfect(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
            let pixels = (0..w * h).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
            let m = BinaryMask::new(w, h, pixels).unwrap();
            prop_assert_eq!(segmentation_metrics(confusion_counts(&m, &m).unwrap()).dsc, 1.0);
        }

        #[test]
        fn pgm_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = parse_pgm(&bytes);
        }
    }
}
