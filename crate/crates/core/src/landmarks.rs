//! 49-point landmark model and the face alignment built on it.
//!
//! Landmarks are addressed 1-based (`P1..P49`) to match the usual 49-point
//! layout: `P1..P5` and `P6..P10` are the two eyebrows (inner ends `P5`,
//! `P6`), `P11..P19` the nose, `P20..P25` and `P26..P31` the eyes (inner
//! corners `P23`, `P26`) and `P32..P49` the mouth with `P35` at the top
//! center of the upper lip.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imgcore::{similarity_warp, Image, Point, DEFAULT_FILL, MAX_SCALE, MIN_SCALE};

pub const LANDMARK_COUNT: usize = 49;

/// Default reference inner-eye distance in pixels.
pub const DEFAULT_REF_DISTANCE: f64 = 55.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<Point>,
}

impl LandmarkSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() != LANDMARK_COUNT {
            return Err(Error::Parse {
                what: "landmark set",
                location: "<memory>".into(),
                message: format!("expected {LANDMARK_COUNT} points, got {}", points.len()),
            });
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::DegenerateLandmarks("non-finite coordinate"));
        }
        Ok(LandmarkSet { points })
    }

    /// 1-based accessor: `p(35)` is the mouth anchor.
    pub fn p(&self, index: usize) -> Point {
        self.points[index - 1]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> LandmarkSet {
        LandmarkSet {
            points: self.points.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_named(text, "<memory>")
    }

    fn parse_named(text: &str, source: &str) -> Result<Self> {
        let mut points = Vec::with_capacity(LANDMARK_COUNT);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse {
                what: "landmark file",
                location: format!("{source}:{}", lineno + 1),
                message,
            };
            let mut fields = line.split_whitespace();
            let (Some(xs), Some(ys), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(bad(format!("expected \"x y\", got {line:?}")));
            };
            let x: f64 = xs.parse().map_err(|_| bad(format!("bad x {xs:?}")))?;
            let y: f64 = ys.parse().map_err(|_| bad(format!("bad y {ys:?}")))?;
            if !x.is_finite() || !y.is_finite() {
                return Err(bad("non-finite coordinate".into()));
            }
            points.push(Point::new(x, y));
        }
        if points.len() != LANDMARK_COUNT {
            return Err(Error::Parse {
                what: "landmark file",
                location: source.into(),
                message: format!("expected {LANDMARK_COUNT} points, got {}", points.len()),
            });
        }
        Ok(LandmarkSet { points })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(LANDMARK_COUNT * 24);
        for p in &self.points {
            // `{}` on f64 prints the shortest string that round-trips
            writeln!(s, "{} {}", p.x, p.y).unwrap();
        }
        s
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = crate::io_util::read_to_string(path)?;
        Self::parse_named(&text, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io_util::write_atomic(path, self.to_text().as_bytes())
    }
}

/// Point halfway between the inner eyebrow ends `P5` and `P6`.
pub fn midpoint_brow(lms: &LandmarkSet) -> Point {
    let (a, b) = (lms.p(5), lms.p(6));
    Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0)
}

/// Signed tilt of the face's vertical axis (brow midpoint to `P35`) relative
/// to the image vertical.
///
/// The magnitude is the angle between `l1 = P50 - P35` and
/// `l2 = (0, y50 - y35)`, evaluated as `atan2(|l1.x|, |l1.y|)`, which equals
/// `acos(l1.l2 / (|l1||l2|))` without its loss of precision near zero. The sign
/// is the rotation that produced the tilt, so rotating by the negated angle
/// about `P35` returns the face upright.
pub fn rotation_angle(lms: &LandmarkSet) -> Result<f64> {
    let top = midpoint_brow(lms);
    let anchor = lms.p(35);
    let (dx, dy) = (top.x - anchor.x, top.y - anchor.y);
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::DegenerateLandmarks("brow midpoint coincides with P35"));
    }
    if dy == 0.0 {
        return Err(Error::DegenerateLandmarks("brow midpoint level with P35"));
    }
    let magnitude = dx.abs().atan2(dy.abs());
    // An upright axis (0, -d) rotated by t becomes (-d sin t, -d cos t).
    let sign = if dx == 0.0 { 0.0 } else { -dx.signum() * (-dy).signum() };
    Ok(sign * magnitude)
}

/// Distance between the inner eye corners `P23` and `P26`.
pub fn interocular_distance(lms: &LandmarkSet) -> f64 {
    lms.p(23).distance(lms.p(26))
}

/// Applies the same rotate-then-scale about `center` that
/// [`similarity_warp`] applies to pixels.
pub fn transform_landmarks(lms: &LandmarkSet, center: Point, angle: f64, factor: f64) -> LandmarkSet {
    assert!(factor > 0.0, "scale factor must be positive");
    lms.map(|p| p.similarity(center, angle, factor))
}

#[derive(Debug, Clone)]
pub struct AlignmentResult {
    pub texture: Image,
    pub depth: Image,
    pub landmarks: LandmarkSet,
    pub applied_angle: f64,
    pub applied_scale: f64,
}

/// Rotates the face upright and rescales it so the inner-eye distance equals
/// `ref_dist`. Both operations pivot on `P35` and are resampled in one pass,
/// identically for texture and depth.
pub fn align_face(texture: &Image, depth: &Image, lms: &LandmarkSet, ref_dist: f64) -> Result<AlignmentResult> {
    if texture.width() != depth.width() || texture.height() != depth.height() {
        return Err(Error::DimensionMismatch(format!(
            "texture {}x{} vs depth {}x{}",
            texture.width(),
            texture.height(),
            depth.width(),
            depth.height()
        )));
    }
    if !(ref_dist > 0.0) {
        return Err(Error::Config(format!("reference distance must be positive, got {ref_dist}")));
    }
    let angle = -rotation_angle(lms)?;
    let dist = interocular_distance(lms);
    let factor = ref_dist / dist;
    if !(factor > MIN_SCALE && factor < MAX_SCALE) {
        return Err(Error::ExtremeScale(factor));
    }
    let center = lms.p(35);
    Ok(AlignmentResult {
        texture: similarity_warp(texture, center, angle, factor, DEFAULT_FILL)?,
        depth: similarity_warp(depth, center, angle, factor, DEFAULT_FILL)?,
        landmarks: transform_landmarks(lms, center, angle, factor),
        applied_angle: angle,
        applied_scale: factor,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    /// Upright 49-point face with inner-eye distance 36 and `P35` at (100, 128).
    pub(crate) fn upright() -> LandmarkSet {
        let pts = crate::synth::CANONICAL_LANDMARKS.iter().map(|&(x, y)| Point::new(x, y)).collect();
        LandmarkSet::new(pts).unwrap()
    }

    fn with_points(edits: &[(usize, (f64, f64))]) -> LandmarkSet {
        let mut pts = upright().points().to_vec();
        for &(i, (x, y)) in edits {
            pts[i - 1] = Point::new(x, y);
        }
        LandmarkSet::new(pts).unwrap()
    }

    #[test]
    fn brow_midpoint() {
        let m = midpoint_brow(&with_points(&[(5, (10.0, 20.0)), (6, (30.0, 20.0))]));
        assert_eq!((m.x, m.y), (20.0, 20.0));
        let m = midpoint_brow(&with_points(&[(5, (15.0, 12.0)), (6, (15.0, 12.0))]));
        assert_eq!((m.x, m.y), (15.0, 12.0));
        let m = midpoint_brow(&with_points(&[(5, (0.0, 0.0)), (6, (4.0, 6.0))]));
        assert_eq!((m.x, m.y), (2.0, 3.0));
    }

    #[test]
    fn angle_of_upright_and_diagonal_faces() {
        assert_eq!(rotation_angle(&upright()).unwrap(), 0.0);
        // P50 = (60, 70), P35 = (50, 80): l1 = (10, -10), l2 = (0, -10)
        let lms = with_points(&[(5, (55.0, 70.0)), (6, (65.0, 70.0)), (35, (50.0, 80.0))]);
        let a = rotation_angle(&lms).unwrap();
        let (l1, l2) = ((10.0f64, -10.0f64), (0.0f64, -10.0f64));
        let eq4 = ((l1.0 * l2.0 + l1.1 * l2.1) / (l1.0.hypot(l1.1) * l2.0.hypot(l2.1))).acos();
        assert!((a.abs() - FRAC_PI_4).abs() < 1e-12);
        assert!((a.abs() - eq4).abs() < 1e-12);
    }

    #[test]
    fn angle_recovers_known_rotation() {
        let base = upright();
        let p35 = base.p(35);
        for theta in [0.2, -0.2, 0.05, -0.349] {
            let rotated = transform_landmarks(&base, p35, theta, 1.0);
            let a = rotation_angle(&rotated).unwrap();
            assert!((a - theta).abs() < 1e-9, "{a} vs {theta}");
            let corrected = transform_landmarks(&rotated, p35, -a, 1.0);
            assert!(rotation_angle(&corrected).unwrap().abs() <= 1e-9);
        }
    }

    #[test]
    fn degenerate_axis_is_rejected() {
        let lms = with_points(&[(5, (90.0, 128.0)), (6, (110.0, 128.0))]);
        assert!(matches!(rotation_angle(&lms), Err(Error::DegenerateLandmarks(_))));
        let lms = with_points(&[(5, (100.0, 128.0)), (6, (100.0, 128.0))]);
        assert!(matches!(rotation_angle(&lms), Err(Error::DegenerateLandmarks(_))));
    }

    #[test]
    fn interocular_examples() {
        let d = |a, b| interocular_distance(&with_points(&[(23, a), (26, b)]));
        assert_eq!(d((100.0, 100.0), (140.0, 130.0)), 50.0);
        assert_eq!(d((3.0, 3.0), (3.0, 3.0)), 0.0);
        assert_eq!(d((0.0, 0.0), (1.0, 0.0)), 1.0);
    }

    #[test]
    fn transform_matches_pixel_warp_convention() {
        let lms = upright();
        assert_eq!(transform_landmarks(&lms, Point::new(3.0, 4.0), 0.0, 1.0), lms);
        let c = lms.p(12);
        let moved = transform_landmarks(&lms, c, 1.1, 1.7);
        assert!(moved.p(12).distance(c) < 1e-12);

        // a marker pixel warped by the image routine lands where the landmark
        // transform sends its coordinate
        let mut img = Image::new(9, 9, 1);
        img.set(6, 4, 0, 1.0);
        let center = Point::new(4.0, 4.0);
        let warped = similarity_warp(&img, center, std::f64::consts::FRAC_PI_2, 1.0, 0.0).unwrap();
        let p = Point::new(6.0, 4.0).similarity(center, std::f64::consts::FRAC_PI_2, 1.0);
        assert!((p.x - 4.0).abs() < 1e-12 && (p.y - 2.0).abs() < 1e-12);
        assert!(warped.get(4, 2, 0) > 0.999);
    }

    #[test]
    fn align_is_identity_for_canonical_face() {
        let lms = upright();
        let tex = Image::filled(200, 200, 3, 0.4);
        let dep = Image::filled(200, 200, 1, 0.6);
        let r = align_face(&tex, &dep, &lms, interocular_distance(&lms)).unwrap();
        assert_eq!(r.applied_angle, 0.0);
        assert_eq!(r.applied_scale, 1.0);
        assert_eq!(r.texture, tex);
        assert_eq!(r.depth, dep);
        let r = align_face(&tex, &dep, &lms, interocular_distance(&lms) / 2.0).unwrap();
        assert_eq!(r.applied_scale, 0.5);
    }

    #[test]
    fn align_recovers_canonical_geometry() {
        let lms = upright();
        let p35 = lms.p(35);
        let perturbed = transform_landmarks(&lms, p35, 0.3, 1.4);
        let img = Image::filled(200, 200, 1, 0.5);
        let r = align_face(&img.to_rgb(), &img, &perturbed, interocular_distance(&lms)).unwrap();
        for (a, b) in r.landmarks.points().iter().zip(lms.points()) {
            assert!(a.distance(*b) < 0.5);
        }
        assert!(rotation_angle(&r.landmarks).unwrap().abs() <= 1e-3);
        assert!((interocular_distance(&r.landmarks) - interocular_distance(&lms)).abs() < 0.5);

        let again = align_face(&r.texture, &r.depth, &r.landmarks, interocular_distance(&lms)).unwrap();
        assert!(again.applied_angle.abs() <= 1e-3);
        assert!((again.applied_scale - 1.0).abs() <= 0.01);
    }

    #[test]
    fn align_moves_both_modalities_together() {
        let lms = transform_landmarks(&upright(), Point::new(100.0, 128.0), -0.25, 0.9);
        let mut tex = Image::new(200, 200, 3);
        let mut dep = Image::new(200, 200, 1);
        for c in 0..3 {
            tex.set(70, 90, c, 1.0);
        }
        dep.set(70, 90, 0, 1.0);
        let r = align_face(&tex, &dep, &lms, 36.0).unwrap();
        for y in 0..200 {
            for x in 0..200 {
                assert!((r.texture.get(x, y, 1) - r.depth.get(x, y, 0)).abs() < 0.05);
            }
        }
    }

    #[test]
    fn align_error_paths() {
        let lms = upright();
        let tex = Image::new(200, 200, 3);
        assert!(matches!(
            align_face(&tex, &Image::new(100, 200, 1), &lms, 36.0),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(align_face(&tex, &Image::new(200, 200, 1), &lms, 500.0), Err(Error::ExtremeScale(_))));
    }

    #[test]
    fn parse_and_format() {
        let lms = transform_landmarks(&upright(), Point::new(1.0, 2.0), 0.123, 1.01);
        let text = format!("# header\n\n{}", lms.to_text());
        assert_eq!(LandmarkSet::parse(&text).unwrap(), lms);
        let short: String = lms.to_text().lines().take(48).map(|l| format!("{l}\n")).collect();
        assert!(LandmarkSet::parse(&short).is_err());
        assert!(LandmarkSet::parse("1 2 3\n").is_err());
        assert!(LandmarkSet::parse("a b\n").is_err());
    }
}
