//! Synthetic texture/depth faces with known landmarks and perturbations.
//!
//! Faces are drawn in an upright canonical frame (inner eye corners 36 px
//! apart), then rotated and scaled about a jittered center. Each expression
//! moves a fixed set of landmarks and adds fine oriented wrinkles inside
//! some of the four part regions; the wrinkle period is close to what the
//! whole-face crop can still resolve. Per-sample clutter is kept outside the
//! part regions.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::Result;
use crate::harness::{derive_seed, Expression, Manifest, SampleRecord};
use crate::imgcore::{similarity_warp, write_pnm, Image, Point, DEFAULT_FILL};
use crate::landmarks::{LandmarkSet, LANDMARK_COUNT};
use crate::parts::{PartKind, PartTable};

pub const CANVAS: usize = 200;

/// Upright template, 1-based landmark `i` at index `i - 1`.
pub const CANONICAL_LANDMARKS: [(f64, f64); LANDMARK_COUNT] = [
    // eyebrows
    (58.0, 74.0),
    (66.0, 70.0),
    (74.0, 69.0),
    (82.0, 70.0),
    (90.0, 72.0),
    (110.0, 72.0),
    (118.0, 70.0),
    (126.0, 69.0),
    (134.0, 70.0),
    (142.0, 74.0),
    // nose bridge, then lower nose
    (100.0, 80.0),
    (100.0, 88.0),
    (100.0, 96.0),
    (100.0, 104.0),
    (88.0, 112.0),
    (94.0, 112.0),
    (100.0, 112.0),
    (106.0, 112.0),
    (112.0, 112.0),
    // eyes
    (60.0, 86.0),
    (68.0, 81.0),
    (76.0, 81.0),
    (82.0, 86.0),
    (76.0, 90.0),
    (68.0, 90.0),
    (118.0, 86.0),
    (124.0, 81.0),
    (132.0, 81.0),
    (140.0, 86.0),
    (132.0, 90.0),
    (124.0, 90.0),
    // outer lips
    (78.0, 135.0),
    (85.0, 130.0),
    (93.0, 127.0),
    (100.0, 128.0),
    (107.0, 127.0),
    (115.0, 130.0),
    (122.0, 135.0),
    (115.0, 141.0),
    (107.0, 144.0),
    (100.0, 145.0),
    (93.0, 144.0),
    (85.0, 141.0),
    // inner lips
    (90.0, 134.0),
    (100.0, 133.0),
    (110.0, 134.0),
    (110.0, 137.0),
    (100.0, 138.0),
    (90.0, 137.0),
];

const FACE_CENTER: (f64, f64) = (100.0, 112.0);
const FACE_RADII: (f64, f64) = (66.0, 86.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub max_rotation: f64,
    pub min_scale: f64,
    pub max_scale: f64,
    /// Rotation center jitter around the face center, pixels.
    pub max_shift: f64,
    /// Per-pixel Gaussian noise on the texture.
    pub noise: f64,
    /// Wrinkle period in the canonical frame, pixels.
    pub wrinkle_period: f64,
    /// Wrinkle contrast at full intensity.
    pub wrinkle_contrast: f64,
    /// Wrinkle relief amplitude in the depth map at full intensity.
    pub depth_wrinkle: f64,
    /// Number of clutter strokes outside the part regions.
    pub clutter: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            max_rotation: 0.35,
            min_scale: 0.8,
            max_scale: 1.25,
            max_shift: 6.0,
            noise: 0.02,
            wrinkle_period: 2.6,
            wrinkle_contrast: 0.45,
            depth_wrinkle: 0.12,
            clutter: 14,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Blob {
    x: f64,
    y: f64,
    sigma: f64,
    amp: f64,
}

impl Blob {
    fn at(&self, x: f64, y: f64) -> f64 {
        let d2 = (x - self.x).powi(2) + (y - self.y).powi(2);
        self.amp * (-d2 / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Appearance and geometry shared by all samples of one subject.
#[derive(Debug, Clone)]
pub struct SubjectStyle {
    landmarks: Vec<Point>,
    skin: [f64; 3],
    lips: [f64; 3],
    brow: f64,
    iris: f64,
    shading: Vec<Blob>,
    relief: Vec<Blob>,
}

impl SubjectStyle {
    pub fn random(rng: &mut impl Rng) -> Self {
        let jitter = Normal::new(0.0, 1.0).expect("unit normal");
        let width = rng.random_range(0.94..1.06);
        let height = rng.random_range(0.95..1.05);
        let landmarks = CANONICAL_LANDMARKS
            .iter()
            .map(|&(x, y)| {
                let gx = 100.0 + (x - 100.0) * width + jitter.sample(rng);
                let gy = 110.0 + (y - 110.0) * height + jitter.sample(rng);
                Point::new(gx, gy)
            })
            .collect();
        let tone = rng.random_range(0.55..0.9);
        let skin = [tone, tone * rng.random_range(0.72..0.85), tone * rng.random_range(0.6..0.72)];
        let lips = [rng.random_range(0.55..0.8), rng.random_range(0.22..0.35), rng.random_range(0.25..0.38)];
        let blob = |rng: &mut dyn rand::RngCore, amp: f64| Blob {
            x: rng.random_range(40.0..160.0),
            y: rng.random_range(30.0..190.0),
            sigma: rng.random_range(8.0..28.0),
            amp: rng.random_range(-amp..amp),
        };
        let shading = (0..6).map(|_| blob(rng, 0.12)).collect();
        let relief = (0..5).map(|_| blob(rng, 0.08)).collect();
        SubjectStyle {
            landmarks,
            skin,
            lips,
            brow: rng.random_range(0.12..0.3),
            iris: rng.random_range(0.1..0.35),
            shading,
            relief,
        }
    }
}

/// Deformation weight of an intensity level (neutral is 0).
pub fn intensity_weight(intensity: u8) -> f64 {
    match intensity {
        0 => 0.0,
        1 => 0.25,
        2 => 0.45,
        3 => 0.7,
        _ => 1.0,
    }
}

/// Landmark displacements at full intensity, `(1-based index, dx, dy)`.
fn displacements(e: Expression) -> &'static [(usize, f64, f64)] {
    match e {
        Expression::Angry => &[
            (3, 0.0, 2.0),
            (4, 2.0, 4.0),
            (5, 2.0, 5.0),
            (6, -2.0, 5.0),
            (7, -2.0, 4.0),
            (8, 0.0, 2.0),
            (21, 0.0, 1.5),
            (22, 0.0, 1.5),
            (27, 0.0, 1.5),
            (28, 0.0, 1.5),
            (33, 0.0, 1.5),
            (34, 0.0, 1.5),
            (36, 0.0, 1.5),
            (37, 0.0, 1.5),
            (40, 0.0, -1.5),
            (41, 0.0, -1.5),
            (42, 0.0, -1.5),
            (47, 0.0, -1.0),
            (48, 0.0, -1.0),
            (49, 0.0, -1.0),
        ],
        Expression::Disgust => &[
            (4, 0.0, 2.0),
            (5, 0.0, 2.0),
            (6, 0.0, 2.0),
            (7, 0.0, 2.0),
            (15, -1.0, -2.0),
            (16, 0.0, -2.5),
            (17, 0.0, -2.5),
            (18, 0.0, -2.5),
            (19, 1.0, -2.0),
            (24, 0.0, -1.5),
            (25, 0.0, -1.5),
            (30, 0.0, -1.5),
            (31, 0.0, -1.5),
            (33, 0.0, -3.5),
            (34, 0.0, -3.5),
            (35, 0.0, -3.0),
            (36, 0.0, -3.5),
            (37, 0.0, -3.5),
            (44, 0.0, -2.5),
            (45, 0.0, -2.5),
            (46, 0.0, -2.5),
        ],
        Expression::Fear => &[
            (1, 0.0, -3.0),
            (2, 0.0, -3.0),
            (3, 0.0, -3.0),
            (4, 0.0, -3.5),
            (5, 1.5, -4.5),
            (6, -1.5, -4.5),
            (7, 0.0, -3.5),
            (8, 0.0, -3.0),
            (9, 0.0, -3.0),
            (10, 0.0, -3.0),
            (21, 0.0, -2.0),
            (22, 0.0, -2.0),
            (27, 0.0, -2.0),
            (28, 0.0, -2.0),
            (32, -3.0, 1.0),
            (38, 3.0, 1.0),
            (39, 0.0, 3.0),
            (40, 0.0, 3.0),
            (41, 0.0, 3.0),
            (42, 0.0, 3.0),
            (43, 0.0, 3.0),
            (47, 0.0, 3.0),
            (48, 0.0, 3.0),
            (49, 0.0, 3.0),
        ],
        Expression::Happy => &[
            (24, 0.0, -2.0),
            (25, 0.0, -2.0),
            (30, 0.0, -2.0),
            (31, 0.0, -2.0),
            (32, -4.0, -4.0),
            (33, -2.0, -2.0),
            (37, 2.0, -2.0),
            (38, 4.0, -4.0),
            (39, 1.0, -1.0),
            (43, -1.0, -1.0),
            (44, -2.0, -2.0),
            (46, 2.0, -2.0),
        ],
        Expression::Sad => &[
            (1, 0.0, 2.0),
            (4, 0.0, -2.0),
            (5, 0.0, -4.0),
            (6, 0.0, -4.0),
            (7, 0.0, -2.0),
            (10, 0.0, 2.0),
            (32, -1.0, 4.0),
            (33, 0.0, 1.5),
            (37, 0.0, 1.5),
            (38, 1.0, 4.0),
            (44, 0.0, 1.5),
            (46, 0.0, 1.5),
        ],
        Expression::Surprise => &[
            (1, 0.0, -5.0),
            (2, 0.0, -5.0),
            (3, 0.0, -5.0),
            (4, 0.0, -5.0),
            (5, 0.0, -5.0),
            (6, 0.0, -5.0),
            (7, 0.0, -5.0),
            (8, 0.0, -5.0),
            (9, 0.0, -5.0),
            (10, 0.0, -5.0),
            (21, 0.0, -2.5),
            (22, 0.0, -2.5),
            (27, 0.0, -2.5),
            (28, 0.0, -2.5),
            (24, 0.0, 1.0),
            (25, 0.0, 1.0),
            (30, 0.0, 1.0),
            (31, 0.0, 1.0),
            (32, 3.0, 2.0),
            (38, -3.0, 2.0),
            (39, 0.0, 8.0),
            (40, 0.0, 8.0),
            (41, 0.0, 8.0),
            (42, 0.0, 8.0),
            (43, 0.0, 8.0),
            (44, 2.0, 1.0),
            (46, -2.0, 1.0),
            (47, 0.0, 7.0),
            (48, 0.0, 7.0),
            (49, 0.0, 7.0),
        ],
        Expression::Neutral => &[],
    }
}

/// Wrinkle orientation in degrees per part (Eyebrows, Eyes, Nose, Mouth).
fn wrinkles(e: Expression) -> [Option<f64>; 4] {
    match e {
        Expression::Angry => [Some(0.0), Some(60.0), None, Some(90.0)],
        Expression::Disgust => [None, Some(120.0), Some(0.0), Some(30.0)],
        Expression::Fear => [Some(90.0), Some(0.0), Some(120.0), None],
        Expression::Happy => [None, Some(90.0), Some(60.0), Some(0.0)],
        Expression::Sad => [Some(45.0), None, Some(90.0), Some(135.0)],
        Expression::Surprise => [Some(135.0), Some(150.0), None, Some(60.0)],
        Expression::Neutral => [None; 4],
    }
}

/// Landmarks of `style` deformed by `expression` at `intensity`, upright frame.
pub fn expression_landmarks(style: &SubjectStyle, expression: Expression, intensity: u8) -> Vec<Point> {
    let w = intensity_weight(intensity);
    let mut pts = style.landmarks.clone();
    for &(i, dx, dy) in displacements(expression) {
        pts[i - 1].x += w * dx;
        pts[i - 1].y += w * dy;
    }
    pts
}

/// A rendered, perturbed sample. `landmarks` are exact for the perturbed
/// images; the perturbation maps upright coordinates to image coordinates.
#[derive(Debug, Clone)]
pub struct SynthFace {
    pub texture: Image,
    pub depth: Image,
    pub landmarks: LandmarkSet,
    pub center: Point,
    pub angle: f64,
    pub scale: f64,
}

struct Canvas {
    tex: Vec<f64>,
    depth: Vec<f64>,
}

impl Canvas {
    fn blend(&mut self, x: usize, y: usize, color: [f64; 3], coverage: f64) {
        let i = (y * CANVAS + x) * 3;
        for c in 0..3 {
            self.tex[i + c] += (color[c] - self.tex[i + c]) * coverage;
        }
    }

    /// Paints pixels in the box around `pts` (grown by `grow`) using a
    /// per-pixel `(coverage, color)` rule.
    fn paint(&mut self, pts: &[Point], grow: f64, mut rule: impl FnMut(Point, [f64; 3]) -> Option<(f64, [f64; 3])>) {
        let (x0, y0, x1, y1) = bounds(pts, grow);
        for y in y0..y1 {
            for x in x0..x1 {
                let i = (y * CANVAS + x) * 3;
                let current = [self.tex[i], self.tex[i + 1], self.tex[i + 2]];
                if let Some((cov, color)) = rule(Point::new(x as f64, y as f64), current) {
                    self.blend(x, y, color, cov.clamp(0.0, 1.0));
                }
            }
        }
    }
}

fn bounds(pts: &[Point], grow: f64) -> (usize, usize, usize, usize) {
    let clampi = |v: f64| v.clamp(0.0, CANVAS as f64) as usize;
    let min_x = pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - grow;
    let max_x = pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + grow;
    let min_y = pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - grow;
    let max_y = pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + grow;
    (clampi(min_x.floor()), clampi(min_y.floor()), clampi(max_x.ceil() + 1.0), clampi(max_y.ceil() + 1.0))
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 { (((p.x - a.x) * vx + (p.y - a.y) * vy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    p.distance(Point::new(a.x + t * vx, a.y + t * vy))
}

fn polyline_distance(p: Point, pts: &[Point]) -> f64 {
    pts.windows(2).map(|w| segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min)
}

/// Signed distance to a closed polygon, negative inside.
fn polygon_sdf(p: Point, pts: &[Point]) -> f64 {
    let mut inside = false;
    let mut dist = f64::INFINITY;
    for i in 0..pts.len() {
        let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
        dist = dist.min(segment_distance(p, a, b));
        if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x) {
            inside = !inside;
        }
    }
    if inside {
        -dist
    } else {
        dist
    }
}

fn centroid(pts: &[Point]) -> Point {
    let n = pts.len() as f64;
    Point::new(pts.iter().map(|p| p.x).sum::<f64>() / n, pts.iter().map(|p| p.y).sum::<f64>() / n)
}

fn ellipse_level(x: f64, y: f64) -> f64 {
    ((x - FACE_CENTER.0) / FACE_RADII.0).powi(2) + ((y - FACE_CENTER.1) / FACE_RADII.1).powi(2)
}

/// Raised-cosine window that is 1 inside the box and fades over `fade` px.
fn box_window(p: Point, b: (f64, f64, f64, f64), fade: f64) -> f64 {
    let edge = |v: f64, lo: f64, hi: f64| {
        let d = (lo - v).max(v - hi);
        if d <= 0.0 {
            1.0
        } else if d >= fade {
            0.0
        } else {
            0.5 + 0.5 * (PI * d / fade).cos()
        }
    };
    edge(p.x, b.0, b.2) * edge(p.y, b.1, b.3)
}

fn part_extent(pts: &[Point], kind: PartKind, grow: f64) -> (f64, f64, f64, f64) {
    let group: Vec<Point> = PartTable::default().range(kind).map(|i| pts[i - 1]).collect();
    let min_x = group.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let max_x = group.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let min_y = group.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let max_y = group.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    (min_x - grow, min_y - grow, max_x + grow, max_y + grow)
}

fn inside_any(p: Point, boxes: &[(f64, f64, f64, f64)]) -> bool {
    boxes.iter().any(|b| p.x >= b.0 && p.x <= b.2 && p.y >= b.1 && p.y <= b.3)
}

/// Draws the upright face; returns (texture RGB, depth) buffers.
fn draw(style: &SubjectStyle, expression: Expression, intensity: u8, params: &SynthParams, rng: &mut ChaCha8Rng) -> Canvas {
    let pts = expression_landmarks(style, expression, intensity);
    let w = intensity_weight(intensity);
    let mut canvas = Canvas {
        tex: vec![0.08; CANVAS * CANVAS * 3],
        depth: vec![0.0; CANVAS * CANVAS],
    };

    // skin and relief
    for y in 0..CANVAS {
        for x in 0..CANVAS {
            let (fx, fy) = (x as f64, y as f64);
            let level = ellipse_level(fx, fy);
            if level >= 1.0 {
                continue;
            }
            let shade = 1.0 + style.shading.iter().map(|b| b.at(fx, fy)).sum::<f64>();
            let coverage = ((1.0 - level) * 40.0).min(1.0);
            canvas.blend(x, y, style.skin.map(|c| c * shade), coverage);
            let dome = 0.55 * (1.0 - level).sqrt();
            let relief: f64 = style.relief.iter().map(|b| b.at(fx, fy)).sum();
            canvas.depth[y * CANVAS + x] = 0.15 + dome + relief;
        }
    }

    // nose ridge in depth
    let bridge: Vec<Point> = pts[10..14].to_vec();
    let (x0, y0, x1, y1) = bounds(&pts[10..19], 10.0);
    for y in y0..y1 {
        for x in x0..x1 {
            let p = Point::new(x as f64, y as f64);
            let d = polyline_distance(p, &bridge).min(polyline_distance(p, &pts[14..19]));
            canvas.depth[y * CANVAS + x] += 0.18 * (-d * d / 40.0).exp();
        }
    }

    // clutter strokes away from the parts
    let part_boxes: Vec<_> = PartKind::ALL.iter().map(|&k| part_extent(&pts, k, 9.0)).collect();
    for _ in 0..params.clutter {
        let start = loop {
            let p = Point::new(rng.random_range(36.0..164.0), rng.random_range(28.0..196.0));
            if ellipse_level(p.x, p.y) < 0.95 && !inside_any(p, &part_boxes) {
                break p;
            }
        };
        let theta = rng.random_range(0.0..PI);
        let len = rng.random_range(6.0..16.0);
        let end = Point::new(start.x + len * theta.cos(), start.y + len * theta.sin());
        let tone = rng.random_range(0.2..0.5);
        let stroke = [start, end];
        canvas.paint(&stroke, 2.0, |p, cur| {
            if inside_any(p, &part_boxes) {
                return None;
            }
            let cov = 1.2 - polyline_distance(p, &stroke);
            (cov > 0.0).then(|| (cov * 0.8, cur.map(|c| c * tone)))
        });
    }

    // expression wrinkles in the part regions
    let pattern = wrinkles(expression);
    for (k, kind) in PartKind::ALL.iter().enumerate() {
        let Some(deg) = pattern[k] else { continue };
        let region = part_extent(&pts, *kind, 5.0);
        let theta = deg.to_radians();
        let phase = rng.random_range(0.0..2.0 * PI);
        let strength = params.wrinkle_contrast * w;
        let corners = [Point::new(region.0, region.1), Point::new(region.2, region.3)];
        let period = params.wrinkle_period;
        let mut depth_updates = Vec::new();
        canvas.paint(&corners, 4.0, |p, cur| {
            let win = box_window(p, region, 4.0);
            if win <= 0.0 {
                return None;
            }
            let wave = (2.0 * PI * (p.x * theta.cos() + p.y * theta.sin()) / period + phase).sin();
            depth_updates.push((p, params.depth_wrinkle * w * win * wave));
            Some((strength * win * (0.5 + 0.5 * wave), cur.map(|c| c * 0.35)))
        });
        for (p, dz) in depth_updates {
            canvas.depth[p.y as usize * CANVAS + p.x as usize] += dz;
        }
    }

    // brows
    for brow in [&pts[0..5], &pts[5..10]] {
        let (x0, y0, x1, y1) = bounds(brow, 6.0);
        for y in y0..y1 {
            for x in x0..x1 {
                let d = polyline_distance(Point::new(x as f64, y as f64), brow);
                canvas.depth[y * CANVAS + x] += 0.08 * (-d * d / 12.0).exp();
            }
        }
        let color = [style.brow; 3];
        canvas.paint(brow, 4.0, |p, _| {
            let cov = 2.2 - polyline_distance(p, brow);
            (cov > 0.0).then_some((cov, color))
        });
    }

    // eyes
    for eye in [&pts[19..25], &pts[25..31]] {
        let (x0, y0, x1, y1) = bounds(eye, 1.0);
        for y in y0..y1 {
            for x in x0..x1 {
                let sdf = polygon_sdf(Point::new(x as f64, y as f64), eye);
                canvas.depth[y * CANVAS + x] -= 0.1 * (0.5 - sdf).clamp(0.0, 1.0);
            }
        }
        let c = centroid(eye);
        let iris = [style.iris, style.iris * 0.8, style.iris * 0.6];
        canvas.paint(eye, 2.0, |p, _| {
            let sdf = polygon_sdf(p, eye);
            if sdf > 1.0 {
                return None;
            }
            let white = [0.92, 0.9, 0.88];
            let color = if p.distance(c) < 3.4 { iris } else { white };
            Some((0.5 - sdf, color))
        });
    }

    // nose
    let nose_shade = style.skin.map(|c| c * 0.7);
    canvas.paint(&pts[10..19], 3.0, |p, _| {
        let d = polyline_distance(p, &pts[10..14]).min(polyline_distance(p, &pts[14..19]));
        let cov = 1.2 - d;
        (cov > 0.0).then_some((cov * 0.6, nose_shade))
    });
    for nostril in [pts[15], pts[17]] {
        canvas.paint(&[nostril], 3.0, |p, _| {
            let cov = 2.0 - p.distance(nostril);
            (cov > 0.0).then_some((cov, [0.12; 3]))
        });
    }

    // mouth
    let (outer, inner) = (&pts[31..43], &pts[43..49]);
    let lips = style.lips;
    canvas.paint(outer, 2.0, |p, _| {
        let sdf = polygon_sdf(p, outer);
        (sdf < 0.5).then_some((0.5 - sdf, lips))
    });
    canvas.paint(inner, 2.0, |p, _| {
        let sdf = polygon_sdf(p, inner);
        (sdf < 0.5).then_some((0.5 - sdf, [0.1, 0.05, 0.05]))
    });
    let (x0, y0, x1, y1) = bounds(outer, 1.0);
    for y in y0..y1 {
        for x in x0..x1 {
            let p = Point::new(x as f64, y as f64);
            let lip = (0.5 - polygon_sdf(p, outer)).clamp(0.0, 1.0);
            let gap = (0.5 - polygon_sdf(p, inner)).clamp(0.0, 1.0);
            canvas.depth[y * CANVAS + x] += 0.06 * lip - 0.18 * gap;
        }
    }

    if params.noise > 0.0 {
        let noise = Normal::new(0.0, params.noise).expect("positive std");
        canvas.tex.iter_mut().for_each(|v| *v += noise.sample(rng));
    }
    canvas
}

/// Renders one perturbed sample of `style`.
pub fn render_face(style: &SubjectStyle, expression: Expression, intensity: u8, params: &SynthParams, rng: &mut ChaCha8Rng) -> Result<SynthFace> {
    let canvas = draw(style, expression, intensity, params, rng);
    let tex = Image::from_vec(CANVAS, CANVAS, 3, canvas.tex)?;
    let depth = Image::from_vec(CANVAS, CANVAS, 1, canvas.depth)?;
    let angle = rng.random_range(-params.max_rotation..=params.max_rotation);
    let scale = rng.random_range(params.min_scale..=params.max_scale);
    let center = Point::new(
        FACE_CENTER.0 + rng.random_range(-params.max_shift..=params.max_shift),
        FACE_CENTER.1 + rng.random_range(-params.max_shift..=params.max_shift),
    );
    let upright = LandmarkSet::new(expression_landmarks(style, expression, intensity))?;
    Ok(SynthFace {
        texture: similarity_warp(&tex, center, angle, scale, DEFAULT_FILL)?,
        depth: similarity_warp(&depth, center, angle, scale, DEFAULT_FILL)?,
        landmarks: upright.map(|p| p.similarity(center, angle, scale)),
        center,
        angle,
        scale,
    })
}

pub fn subject_id(index: usize) -> String {
    format!("S{:03}", index + 1)
}

/// The 13 (expression, intensity) rows per subject: six expressions at the
/// two highest intensities, then neutral.
pub fn sample_grid() -> Vec<(Expression, u8)> {
    let mut grid: Vec<(Expression, u8)> = Expression::BASIC.iter().flat_map(|&e| [(e, 3), (e, 4)]).collect();
    grid.push((Expression::Neutral, 0));
    grid
}

/// One generated sample with its manifest identity.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub subject_id: String,
    pub expression: Expression,
    pub intensity: u8,
    pub face: SynthFace,
}

impl SynthSample {
    pub fn sample_id(&self) -> String {
        format!("{}_{}_{}", self.subject_id, self.expression, self.intensity)
    }
}

/// Generates every sample for `n_subjects` subjects in memory.
pub fn generate(n_subjects: usize, seed: u64, params: &SynthParams) -> Result<Vec<SynthSample>> {
    let grid = sample_grid();
    let styles: Vec<SubjectStyle> = (0..n_subjects)
        .map(|s| SubjectStyle::random(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, s as u64))))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..n_subjects).flat_map(|s| (0..grid.len()).map(move |g| (s, g))).collect();
    jobs.par_iter()
        .map(|&(s, g)| {
            let (expression, intensity) = grid[g];
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(seed, s as u64), 1000 + g as u64));
            Ok(SynthSample {
                subject_id: subject_id(s),
                expression,
                intensity,
                face: render_face(&styles[s], expression, intensity, params, &mut rng)?,
            })
        })
        .collect()
}

/// Writes a dataset under `out_dir`: images and landmarks in `raw/`,
/// `manifest.csv`, and `perturbations.csv` with the applied angle and scale.
pub fn write_dataset(out_dir: &Path, n_subjects: usize, seed: u64, params: &SynthParams) -> Result<Manifest> {
    let samples = generate(n_subjects, seed, params)?;
    let raw = out_dir.join("raw");
    let records = samples
        .par_iter()
        .map(|s| {
            let id = s.sample_id();
            let path = |suffix: &str| -> PathBuf { raw.join(format!("{id}_{suffix}")) };
            let record = SampleRecord {
                subject_id: s.subject_id.clone(),
                expression: s.expression,
                intensity: s.intensity,
                texture_path: path("texture.ppm"),
                depth_path: path("depth.pgm"),
                landmarks_path: path("landmarks.txt"),
                features: Default::default(),
            };
            write_pnm(&record.texture_path, &s.face.texture)?;
            write_pnm(&record.depth_path, &s.face.depth)?;
            s.face.landmarks.write(&record.landmarks_path)?;
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut perturbations = String::from("sample_id,angle,scale,center_x,center_y\n");
    for s in &samples {
        let f = &s.face;
        perturbations.push_str(&format!("{},{},{},{},{}\n", s.sample_id(), f.angle, f.scale, f.center.x, f.center.y));
    }
    crate::io_util::write_atomic(&out_dir.join("perturbations.csv"), perturbations.as_bytes())?;
    let manifest = Manifest { records };
    manifest.write(&out_dir.join("manifest.csv"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::{interocular_distance, rotation_angle};

    #[test]
    fn template_geometry() {
        let lms = LandmarkSet::new(CANONICAL_LANDMARKS.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap();
        assert_eq!(interocular_distance(&lms), 36.0);
        assert!(rotation_angle(&lms).unwrap().abs() < 1e-12);
    }

    #[test]
    fn grid_has_thirteen_rows() {
        let grid = sample_grid();
        assert_eq!(grid.len(), 13);
        assert_eq!(grid.iter().filter(|(e, _)| *e == Expression::Neutral).count(), 1);
    }

    #[test]
    fn perturbation_is_recorded_and_bounded() {
        let samples = generate(2, 4, &SynthParams::default()).unwrap();
        assert_eq!(samples.len(), 26);
        for s in &samples {
            assert!(s.face.angle.abs() <= 0.35);
            assert!((0.8..=1.25).contains(&s.face.scale));
            assert_eq!(s.face.texture.channels(), 3);
            assert_eq!(s.face.depth.channels(), 1);
            let iod = interocular_distance(&s.face.landmarks);
            assert!(iod > 20.0 && iod < 60.0, "{iod}");
        }
    }

    #[test]
    fn deterministic() {
        let a = generate(1, 9, &SynthParams::default()).unwrap();
        let b = generate(1, 9, &SynthParams::default()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.face.texture, y.face.texture);
            assert_eq!(x.face.landmarks, y.face.landmarks);
        }
    }
}
