//! Pixel-set primitives: bit-packed binary masks, boxes, unions, IoUs,
//! centroids and tight boxes.
//!
//! Masks are stored row-major, one bit per pixel. Coordinates follow the
//! image convention: `x` is the column, `y` the row, and pixel `(r, c)`
//! covers the unit square `[c, c+1) x [r, r+1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WORD: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    words: Vec<u64>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area())
            .finish()
    }
}

impl BinaryMask {
    /// All-zero mask. Both dimensions must be at least one pixel.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMask(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Self {
            width,
            height,
            words: vec![0; (width * height).div_ceil(WORD)],
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut mask = Self::new(width, height)?;
        for r in 0..height {
            for c in 0..width {
                if f(r, c) {
                    mask.set(r, c, true);
                }
            }
        }
        Ok(mask)
    }

    /// Builds a mask from a row-major boolean grid.
    pub fn from_row_major(width: usize, height: usize, bits: &[bool]) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidMask(format!(
                "expected {} pixels, got {}",
                width * height,
                bits.len()
            )));
        }
        Self::from_fn(width, height, |r, c| bits[r * width + c])
    }

    /// Soft mask in `[0, 1]`, binarized at 0.5 (values `>= 0.5` are set).
    pub fn from_soft(width: usize, height: usize, probs: &[f32]) -> Result<Self> {
        if probs.len() != width * height {
            return Err(Error::InvalidMask(format!(
                "expected {} pixels, got {}",
                width * height,
                probs.len()
            )));
        }
        Self::from_fn(width, height, |r, c| probs[r * width + c] >= 0.5)
    }

    /// Filled rectangle, after rounding the box outward and clamping it to
    /// the frame.
    pub fn from_box(width: usize, height: usize, bbox: &BBox) -> Result<Self> {
        let mut mask = Self::new(width, height)?;
        if let Some(rect) = bbox.to_pixel_rect(width, height) {
            for r in rect.y0..rect.y1 {
                for c in rect.x0..rect.x1 {
                    mask.set(r, c, true);
                }
            }
        }
        Ok(mask)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.height && col < self.width);
        let i = row * self.width + col;
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        assert!(row < self.height && col < self.width, "pixel out of range");
        let i = row * self.width + col;
        if value {
            self.words[i / WORD] |= 1 << (i % WORD);
        } else {
            self.words[i / WORD] &= !(1 << (i % WORD));
        }
    }

    /// Number of set pixels.
    pub fn area(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn to_row_major(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.len());
        for r in 0..self.height {
            for c in 0..self.width {
                out.push(self.get(r, c));
            }
        }
        out
    }

    /// Set pixels as `(row, col)`, in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.width;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                let i = wi * WORD + bit;
                Some((i / width, i % width))
            })
        })
    }

    fn check_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    pub fn intersection_area(&self, other: &BinaryMask) -> Result<u64> {
        self.check_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as u64)
            .sum())
    }

    pub fn union_area(&self, other: &BinaryMask) -> Result<u64> {
        self.check_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones() as u64)
            .sum())
    }

    pub fn or_assign(&mut self, other: &BinaryMask) -> Result<()> {
        self.check_dims(other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        Ok(())
    }

    /// Clears every pixel that is set in `other`.
    pub fn subtract_assign(&mut self, other: &BinaryMask) -> Result<()> {
        self.check_dims(other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
        Ok(())
    }

    pub fn overlaps(&self, other: &BinaryMask) -> Result<bool> {
        self.check_dims(other)?;
        Ok(self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0))
    }

    /// Number of set pixels inside a half-open pixel rectangle.
    pub fn area_in_rect(&self, rect: &PixelRect) -> u64 {
        let mut n = 0;
        for r in rect.y0..rect.y1.min(self.height) {
            let row_start = r * self.width;
            let (mut i, end) = (row_start + rect.x0, row_start + rect.x1.min(self.width));
            while i < end {
                let wi = i / WORD;
                let lo = i % WORD;
                let hi = (end - wi * WORD).min(WORD);
                let span = hi - lo;
                let bits = if span == WORD {
                    self.words[wi]
                } else {
                    (self.words[wi] >> lo) & ((1u64 << span) - 1)
                };
                n += bits.count_ones() as u64;
                i += span;
            }
        }
        n
    }
}

/// Axis-aligned box in pixel coordinates, half-open on the max side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let ok = [x1, y1, x2, y2].iter().all(|v| v.is_finite()) && x1 < x2 && y1 < y2;
        if !ok {
            return Err(Error::InvalidBox(x1, y1, x2, y2));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// Continuous-area IoU, used for box-mode evaluation.
    pub fn iou(&self, other: &BBox) -> f64 {
        let iw = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let ih = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Clamps the box to `[0, width] x [0, height]`; `None` when nothing
    /// of it remains inside the frame.
    pub fn clamp(&self, width: usize, height: usize) -> Option<BBox> {
        let (w, h) = (width as f64, height as f64);
        let b = BBox {
            x1: self.x1.clamp(0.0, w),
            y1: self.y1.clamp(0.0, h),
            x2: self.x2.clamp(0.0, w),
            y2: self.y2.clamp(0.0, h),
        };
        (b.x1 < b.x2 && b.y1 < b.y2).then_some(b)
    }

    /// Rasterization footprint: floor on the min side, ceil on the max
    /// side, clamped to the frame.
    pub fn to_pixel_rect(&self, width: usize, height: usize) -> Option<PixelRect> {
        let b = self.clamp(width, height)?;
        let rect = PixelRect {
            x0: b.x1.floor() as usize,
            y0: b.y1.floor() as usize,
            x1: (b.x2.ceil() as usize).min(width),
            y1: (b.y2.ceil() as usize).min(height),
        };
        (rect.x0 < rect.x1 && rect.y0 < rect.y1).then_some(rect)
    }
}

/// Integer pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    pub fn area(&self) -> u64 {
        ((self.x1 - self.x0) * (self.y1 - self.y0)) as u64
    }
}

/// Per-pixel OR of all masks. An empty input yields the all-zero mask of
/// the declared size.
pub fn union_masks<'a>(
    width: usize,
    height: usize,
    masks: impl IntoIterator<Item = &'a BinaryMask>,
) -> Result<BinaryMask> {
    let mut out = BinaryMask::new(width, height)?;
    for m in masks {
        out.or_assign(m)?;
    }
    Ok(out)
}

/// IoU between a box (as a filled pixel rectangle) and a mask. Returns 0
/// when both sets are empty.
pub fn bbox_mask_iou(bbox: &BBox, mask: &BinaryMask) -> f64 {
    let mask_area = mask.area();
    let (rect_area, inter) = match bbox.to_pixel_rect(mask.width(), mask.height()) {
        Some(rect) => (rect.area(), mask.area_in_rect(&rect)),
        None => (0, 0),
    };
    let union = rect_area + mask_area - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// `|a ∩ b| / |a ∪ b|`, 0 when both are empty.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let inter = a.intersection_area(b)?;
    let union = a.union_area(b)?;
    Ok(if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    })
}

/// Tightest box containing every set pixel.
pub fn mask_to_bbox(mask: &BinaryMask) -> Option<BBox> {
    let mut it = mask.pixels();
    let (r0, c0) = it.next()?;
    let (mut rmin, mut rmax, mut cmin, mut cmax) = (r0, r0, c0, c0);
    for (r, c) in it {
        rmax = rmax.max(r);
        cmin = cmin.min(c);
        cmax = cmax.max(c);
        rmin = rmin.min(r);
    }
    Some(BBox {
        x1: cmin as f64,
        y1: rmin as f64,
        x2: (cmax + 1) as f64,
        y2: (rmax + 1) as f64,
    })
}

/// Mean of the set-pixel centers as `(x, y)`.
pub fn mask_centroid(mask: &BinaryMask) -> Option<(f64, f64)> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0u64);
    for (r, c) in mask.pixels() {
        sx += c as f64 + 0.5;
        sy += r as f64 + 0.5;
        n += 1;
    }
    (n > 0).then(|| (sx / n as f64, sy / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(w: usize, h: usize, px: &[(usize, usize)]) -> BinaryMask {
        let mut m = BinaryMask::new(w, h).unwrap();
        for &(r, c) in px {
            m.set(r, c, true);
        }
        m
    }

    #[test]
    fn rejects_zero_dimensions() {
        assert!(BinaryMask::new(0, 3).is_err());
        assert!(BinaryMask::new(3, 0).is_err());
    }

    #[test]
    fn union_of_nothing_is_empty() {
        let u = union_masks(5, 4, []).unwrap();
        assert_eq!(u.dims(), (5, 4));
        assert!(u.is_empty());
    }

    #[test]
    fn union_of_one_is_identity() {
        let m = mask_from(4, 4, &[(0, 0), (3, 2)]);
        assert_eq!(union_masks(4, 4, [&m]).unwrap(), m);
    }

    #[test]
    fn union_of_overlapping_pair() {
        // rows 0-1 (8 px) and rows 1-2 restricted so the overlap is 3 px
        let a = BinaryMask::from_fn(4, 4, |r, _| r < 2).unwrap();
        let b = mask_from(4, 4, &[(1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2), (2, 3), (3, 0)]);
        assert_eq!(a.area(), 8);
        assert_eq!(b.area(), 8);
        assert_eq!(a.intersection_area(&b).unwrap(), 3);
        assert_eq!(union_masks(4, 4, [&a, &b]).unwrap().area(), 13);
        assert!((mask_iou(&a, &b).unwrap() - 3.0 / 13.0).abs() < 1e-15);
    }

    #[test]
    fn union_dimension_mismatch() {
        let a = BinaryMask::new(4, 4).unwrap();
        let b = BinaryMask::new(4, 5).unwrap();
        assert!(matches!(
            union_masks(4, 4, [&a, &b]),
            Err(Error::DimensionMismatch(..))
        ));
        assert!(mask_iou(&a, &b).is_err());
    }

    #[test]
    fn bbox_iou_cases() {
        let rect = BBox::new(2.0, 2.0, 6.0, 6.0).unwrap();
        let m = BinaryMask::from_box(10, 10, &rect).unwrap();
        assert_eq!(bbox_mask_iou(&rect, &m), 1.0);

        let far = BBox::new(7.0, 7.0, 9.0, 9.0).unwrap();
        assert_eq!(bbox_mask_iou(&far, &m), 0.0);

        // 4x4 box shifted two columns: 8 px shared of 24
        let shifted = BBox::new(4.0, 2.0, 8.0, 6.0).unwrap();
        assert!((bbox_mask_iou(&shifted, &m) - 8.0 / 24.0).abs() < 1e-15);

        let empty = BinaryMask::new(10, 10).unwrap();
        let outside = BBox::new(20.0, 20.0, 30.0, 30.0).unwrap();
        assert_eq!(bbox_mask_iou(&outside, &empty), 0.0);
    }

    #[test]
    fn fractional_boxes_round_outward() {
        let b = BBox::new(1.2, 0.5, 2.1, 1.0).unwrap();
        let r = b.to_pixel_rect(10, 10).unwrap();
        assert_eq!((r.x0, r.y0, r.x1, r.y1), (1, 0, 3, 1));
    }

    #[test]
    fn mask_iou_identity_and_disjoint() {
        let a = mask_from(3, 3, &[(0, 0), (1, 1)]);
        let b = mask_from(3, 3, &[(2, 2)]);
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(mask_iou(&a, &b).unwrap(), 0.0);
        let e = BinaryMask::new(3, 3).unwrap();
        assert_eq!(mask_iou(&e, &e).unwrap(), 0.0);
    }

    #[test]
    fn tight_boxes() {
        let single = mask_from(6, 5, &[(2, 3)]);
        assert_eq!(mask_to_bbox(&single), Some(BBox::new(3.0, 2.0, 4.0, 3.0).unwrap()));
        assert_eq!(mask_to_bbox(&BinaryMask::new(3, 3).unwrap()), None);

        // L shape: vertical bar at col 0 over rows 1..=5, foot along row 5 to col 7
        let mut l = BinaryMask::new(10, 8).unwrap();
        for r in 1..=5 {
            l.set(r, 0, true);
        }
        for c in 0..=7 {
            l.set(5, c, true);
        }
        assert_eq!(mask_to_bbox(&l), Some(BBox::new(0.0, 1.0, 8.0, 6.0).unwrap()));
    }

    #[test]
    fn centroids() {
        let full = BinaryMask::from_fn(2, 2, |_, _| true).unwrap();
        assert_eq!(mask_centroid(&full), Some((1.0, 1.0)));
        assert_eq!(mask_centroid(&mask_from(3, 3, &[(0, 0)])), Some((0.5, 0.5)));
        assert_eq!(mask_centroid(&mask_from(3, 3, &[(0, 0), (0, 2)])), Some((1.5, 0.5)));
        assert_eq!(mask_centroid(&BinaryMask::new(3, 3).unwrap()), None);
    }

    #[test]
    fn soft_masks_binarize_at_half() {
        let m = BinaryMask::from_soft(2, 2, &[0.49, 0.5, 0.9, 0.0]).unwrap();
        assert_eq!(m.to_row_major(), vec![false, true, true, false]);
    }

    #[test]
    fn area_in_rect_crosses_word_boundaries() {
        let m = BinaryMask::from_fn(100, 3, |r, c| (r + c) % 3 == 0).unwrap();
        let rect = PixelRect { x0: 5, y0: 0, x1: 97, y1: 3 };
        let brute = m
            .pixels()
            .filter(|&(r, c)| (5..97).contains(&c) && r < 3)
            .count() as u64;
        assert_eq!(m.area_in_rect(&rect), brute);
    }
}
