//! Padded part boxes from aligned landmarks and the normalized 64x64 crops.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imgcore::{crop, resize, BBox, Image};
use crate::landmarks::LandmarkSet;

pub const PART_SIZE: usize = 64;
pub const DEFAULT_PAD: f64 = 7.0;
pub const MAX_PAD: f64 = 32.0;

/// Fraction of the landmark extent added on each side of the whole-face box.
pub const FACE_MARGIN: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartKind {
    Eyebrows,
    Eyes,
    Nose,
    Mouth,
}

impl PartKind {
    /// Concatenation order used everywhere.
    pub const ALL: [PartKind; 4] = [PartKind::Eyebrows, PartKind::Eyes, PartKind::Nose, PartKind::Mouth];

    pub fn name(self) -> &'static str {
        match self {
            PartKind::Eyebrows => "eyebrows",
            PartKind::Eyes => "eyes",
            PartKind::Nose => "nose",
            PartKind::Mouth => "mouth",
        }
    }
}

impl fmt::Display for PartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PartKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PartKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown facial part {s:?}")))
    }
}

/// 1-based landmark ranges defining each part.
#[derive(Debug, Clone, PartialEq)]
pub struct PartTable {
    ranges: [RangeInclusive<usize>; 4],
}

impl Default for PartTable {
    fn default() -> Self {
        PartTable {
            ranges: [1..=10, 20..=31, 11..=19, 32..=49],
        }
    }
}

impl PartTable {
    pub fn new(eyebrows: RangeInclusive<usize>, eyes: RangeInclusive<usize>, nose: RangeInclusive<usize>, mouth: RangeInclusive<usize>) -> Self {
        PartTable {
            ranges: [eyebrows, eyes, nose, mouth],
        }
    }

    pub fn range(&self, kind: PartKind) -> RangeInclusive<usize> {
        self.ranges[kind as usize].clone()
    }

    /// Tight box over the part's landmarks grown by `pad` on every side.
    /// Not clamped; clamping happens when cropping.
    pub fn bbox(&self, lms: &LandmarkSet, kind: PartKind, pad: f64) -> BBox {
        extent_box(self.range(kind).map(|i| lms.p(i)), pad, pad)
    }
}

fn extent_box(points: impl Iterator<Item = crate::imgcore::Point>, pad_x: f64, pad_y: f64) -> BBox {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    BBox::new(
        (x0 - pad_x).floor() as i64,
        (y0 - pad_y).floor() as i64,
        (x1 + pad_x).ceil() as i64,
        (y1 + pad_y).ceil() as i64,
    )
}

pub fn part_bbox(lms: &LandmarkSet, kind: PartKind, pad: f64) -> BBox {
    assert!((0.0..=MAX_PAD).contains(&pad), "part padding must lie in [0, {MAX_PAD}]");
    PartTable::default().bbox(lms, kind, pad)
}

/// Box around all 49 landmarks, grown by [`FACE_MARGIN`] of the extent on
/// each side; the input for whole-face features.
pub fn face_bbox(lms: &LandmarkSet) -> BBox {
    let b = extent_box(lms.points().iter().copied(), 0.0, 0.0);
    let mx = FACE_MARGIN * b.width() as f64;
    let my = FACE_MARGIN * b.height() as f64;
    extent_box(lms.points().iter().copied(), mx, my)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartCrop {
    pub kind: PartKind,
    pub image: Image,
    pub source_bbox: BBox,
}

/// The four normalized crops of one sample in one modality, in
/// [`PartKind::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct PartSet {
    crops: Vec<PartCrop>,
}

impl PartSet {
    pub fn new(crops: Vec<PartCrop>) -> Result<Self> {
        let kinds: Vec<_> = crops.iter().map(|c| c.kind).collect();
        if kinds != PartKind::ALL {
            return Err(Error::ShapeMismatch(format!("part set must hold {:?}, got {kinds:?}", PartKind::ALL)));
        }
        if crops.iter().any(|c| c.image.width() != PART_SIZE || c.image.height() != PART_SIZE) {
            return Err(Error::ShapeMismatch(format!("part crops must be {PART_SIZE}x{PART_SIZE}")));
        }
        Ok(PartSet { crops })
    }

    pub fn get(&self, kind: PartKind) -> &PartCrop {
        &self.crops[kind as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PartCrop> {
        self.crops.iter()
    }
}

/// Crops a region and resizes it to `PART_SIZE` square, ignoring aspect ratio.
pub fn normalized_crop(img: &Image, bbox: BBox) -> Result<Image> {
    Ok(resize(&crop(img, bbox)?, PART_SIZE, PART_SIZE))
}

/// Extracts the four parts from both modalities using shared boxes.
pub fn extract_parts(texture: &Image, depth: &Image, lms: &LandmarkSet, pad: f64) -> Result<(PartSet, PartSet)> {
    extract_parts_with(texture, depth, lms, pad, &PartTable::default())
}

pub fn extract_parts_with(
    texture: &Image,
    depth: &Image,
    lms: &LandmarkSet,
    pad: f64,
    table: &PartTable,
) -> Result<(PartSet, PartSet)> {
    if texture.width() != depth.width() || texture.height() != depth.height() {
        return Err(Error::DimensionMismatch("texture and depth differ in size".into()));
    }
    if !(0.0..=MAX_PAD).contains(&pad) {
        return Err(Error::Config(format!("part padding {pad} outside [0, {MAX_PAD}]")));
    }
    let mut tex = Vec::with_capacity(4);
    let mut dep = Vec::with_capacity(4);
    for kind in PartKind::ALL {
        let bbox = table.bbox(lms, kind, pad);
        tex.push(PartCrop {
            kind,
            image: normalized_crop(texture, bbox)?,
            source_bbox: bbox,
        });
        dep.push(PartCrop {
            kind,
            image: normalized_crop(depth, bbox)?,
            source_bbox: bbox,
        });
    }
    Ok((PartSet::new(tex)?, PartSet::new(dep)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::Point;
    use crate::landmarks::tests::upright;

    fn with_mouth(points: impl Fn(usize) -> Point) -> LandmarkSet {
        let mut pts = upright().points().to_vec();
        for i in 32..=49 {
            pts[i - 1] = points(i);
        }
        LandmarkSet::new(pts).unwrap()
    }

    #[test]
    fn mouth_box_from_extremes() {
        let lms = with_mouth(|i| match i {
            32 => Point::new(40.0, 110.0),
            38 => Point::new(80.0, 110.0),
            35 => Point::new(60.0, 100.0),
            41 => Point::new(60.0, 120.0),
            _ => Point::new(60.0, 110.0),
        });
        assert_eq!(part_bbox(&lms, PartKind::Mouth, 7.0), BBox::new(33, 93, 87, 127));
        assert_eq!(part_bbox(&lms, PartKind::Mouth, 0.0), BBox::new(40, 100, 80, 120));
        let dot = with_mouth(|_| Point::new(50.0, 60.0));
        let b = part_bbox(&dot, PartKind::Mouth, 7.0);
        assert_eq!((b.width(), b.height()), (14, 14));
        assert_eq!((b.x_min + b.x_max, b.y_min + b.y_max), (100, 120));
    }

    #[test]
    fn boxes_contain_their_landmarks() {
        let lms = upright();
        let table = PartTable::default();
        for kind in PartKind::ALL {
            let b = part_bbox(&lms, kind, 5.0);
            for i in table.range(kind) {
                assert!(b.contains(lms.p(i)), "{kind} misses P{i}");
            }
        }
    }

    #[test]
    fn identical_modalities_give_identical_parts() {
        let img = Image::from_fn(200, 200, 1, |x, y, _| ((x * 13 + y * 7) % 50) as f64 / 49.0);
        let (t, d) = extract_parts(&img, &img, &upright(), DEFAULT_PAD).unwrap();
        assert_eq!(t, d);
        for crop in t.iter() {
            assert_eq!((crop.image.width(), crop.image.height()), (PART_SIZE, PART_SIZE));
        }
    }

    #[test]
    fn constant_images_give_constant_crops() {
        let tex = Image::filled(200, 200, 3, 0.5);
        let dep = Image::filled(200, 200, 1, 0.5);
        let (t, d) = extract_parts(&tex, &dep, &upright(), DEFAULT_PAD).unwrap();
        for crop in t.iter().chain(d.iter()) {
            assert!(crop.image.data().iter().all(|v| (v - 0.5).abs() < 1e-12));
        }
        assert_eq!(t.get(PartKind::Nose).image.channels(), 3);
        assert_eq!(d.get(PartKind::Nose).image.channels(), 1);
    }

    #[test]
    fn marker_at_box_center_lands_at_crop_center() {
        let lms = upright();
        let b = part_bbox(&lms, PartKind::Mouth, DEFAULT_PAD);
        let cx = ((b.x_min + b.x_max) / 2) as usize;
        let cy = ((b.y_min + b.y_max) / 2) as usize;
        let mut tex = Image::new(200, 200, 3);
        for c in 0..3 {
            tex.set(cx, cy, c, 1.0);
        }
        let (t, _) = extract_parts(&tex, &Image::new(200, 200, 1), &lms, DEFAULT_PAD).unwrap();
        let mouth = &t.get(PartKind::Mouth).image;
        let (mut best, mut at) = (0.0, (0, 0));
        for y in 0..PART_SIZE {
            for x in 0..PART_SIZE {
                if mouth.get(x, y, 0) > best {
                    best = mouth.get(x, y, 0);
                    at = (x, y);
                }
            }
        }
        assert!(at.0.abs_diff(32) <= 1 && at.1.abs_diff(32) <= 1, "{at:?}");
    }

    #[test]
    fn off_image_landmarks_are_reported() {
        let lms = upright().map(|p| Point::new(p.x + 500.0, p.y));
        let img = Image::new(200, 200, 1);
        assert!(matches!(extract_parts(&img, &img, &lms, 7.0), Err(Error::EmptyRegion)));
    }
}
