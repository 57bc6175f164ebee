//! Image representation and the geometric primitives every later stage uses.
//!
//! Coordinate convention, shared by every module in this crate: `x` grows to
//! the right, `y` grows downward, the origin is the top-left pixel and pixel
//! centers sit on integer coordinates. A positive rotation angle turns content
//! counter-clockwise as it appears on screen, i.e. a point `p` rotated by
//! `theta` about `c` lands at
//!
//! ```text
//! c + [ cos(theta)  sin(theta) ] (p - c)
//!     [-sin(theta)  cos(theta) ]
//! ```
//!
//! All warps use inverse mapping with bilinear sampling. Samples falling
//! outside the source image take the fill value ([`DEFAULT_FILL`] unless a
//! caller supplies another one).

mod pnm;

pub use pnm::{read_pnm, write_pnm};

use crate::error::{Error, Result};

/// Intensity used for samples that fall outside the source image.
pub const DEFAULT_FILL: f64 = 0.0;

/// Allowed open interval for scale factors.
pub const MIN_SCALE: f64 = 0.1;
pub const MAX_SCALE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Maps the point through a rotation by `angle` followed by an isotropic
    /// scaling by `factor`, both about `center`.
    pub fn similarity(self, center: Point, angle: f64, factor: f64) -> Point {
        let (sin, cos) = angle.sin_cos();
        let dx = self.x - center.x;
        let dy = self.y - center.y;
        Point {
            x: center.x + factor * (cos * dx + sin * dy),
            y: center.y + factor * (-sin * dx + cos * dy),
        }
    }
}

/// Row-major, channel-interleaved image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        assert!(channels == 1 || channels == 3, "images carry 1 or 3 channels");
        Image {
            height,
            width,
            channels,
            data: vec![value.clamp(0.0, 1.0); width * height * channels],
        }
    }

    /// Builds an image from raw row-major data, clamping every value into
    /// `[0, 1]`. Non-finite values are rejected.
    pub fn from_vec(width: usize, height: usize, channels: usize, mut data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::BadDimensions(format!("{channels} channels")));
        }
        if data.len() != width * height * channels {
            return Err(Error::BadDimensions(format!(
                "{} values for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadDimensions("non-finite intensity".into()));
        }
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Image {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y, channel)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut img = Image::new(width, height, channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    let v = f(x, y, c);
                    img.set(x, y, c, v);
                }
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    #[inline]
    fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.index(x, y, c)]
    }

    /// Stores `value` clamped into `[0, 1]`; NaN is stored as 0.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        let i = self.index(x, y, c);
        self.data[i] = if value.is_nan() { 0.0 } else { value.clamp(0.0, 1.0) };
    }

    fn pixel_or(&self, x: i64, y: i64, c: usize, fill: f64) -> f64 {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            fill
        } else {
            self.get(x as usize, y as usize, c)
        }
    }

    /// Unweighted channel mean; single-channel images are returned unchanged.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px.iter().sum::<f64>() / self.channels as f64)
            .collect();
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    /// Replicates a single-channel image into three identical channels.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Image {
            height: self.height,
            width: self.width,
            channels: 3,
            data,
        }
    }
}

/// Axis-aligned box in pixel coordinates; `x_max`/`y_max` are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    pub x_min: i64,
    pub y_min: i64,
    pub x_max: i64,
    pub y_max: i64,
}

impl BBox {
    pub const fn new(x_min: i64, y_min: i64, x_max: i64, y_max: i64) -> Self {
        BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> i64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> i64 {
        self.y_max - self.y_min
    }

    pub fn is_empty(&self) -> bool {
        self.width() <= 0 || self.height() <= 0
    }

    pub fn clamp_to(&self, width: usize, height: usize) -> BBox {
        let (w, h) = (width as i64, height as i64);
        BBox {
            x_min: self.x_min.clamp(0, w),
            y_min: self.y_min.clamp(0, h),
            x_max: self.x_max.clamp(0, w),
            y_max: self.y_max.clamp(0, h),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min as f64 && p.x <= self.x_max as f64 && p.y >= self.y_min as f64 && p.y <= self.y_max as f64
    }
}

/// Bilinear sample of every channel at `(x, y)`. Neighbors outside the image
/// contribute [`DEFAULT_FILL`].
pub fn bilinear_sample(img: &Image, x: f64, y: f64) -> Vec<f64> {
    bilinear_sample_with_fill(img, x, y, DEFAULT_FILL)
}

pub fn bilinear_sample_with_fill(img: &Image, x: f64, y: f64, fill: f64) -> Vec<f64> {
    let mut out = vec![0.0; img.channels];
    sample_into(img, x, y, fill, &mut out);
    out
}

fn sample_into(img: &Image, x: f64, y: f64, fill: f64, out: &mut [f64]) {
    if !x.is_finite() || !y.is_finite() || x <= -1.0 || y <= -1.0 || x >= img.width as f64 || y >= img.height as f64
    {
        out.fill(fill);
        return;
    }
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    for (c, o) in out.iter_mut().enumerate() {
        // Zero-weight neighbors are skipped so integer positions return the
        // stored value bit-for-bit, even on the last row/column.
        let mut v = (1.0 - fx) * (1.0 - fy) * img.pixel_or(x0, y0, c, fill);
        if fx != 0.0 {
            v += fx * (1.0 - fy) * img.pixel_or(x0 + 1, y0, c, fill);
        }
        if fy != 0.0 {
            v += (1.0 - fx) * fy * img.pixel_or(x0, y0 + 1, c, fill);
            if fx != 0.0 {
                v += fx * fy * img.pixel_or(x0 + 1, y0 + 1, c, fill);
            }
        }
        *o = v;
    }
}

/// Rotation by `angle` combined with isotropic scaling by `factor`, both about
/// `center`, resampled in a single pass. Output has the input's dimensions.
pub fn similarity_warp(img: &Image, center: Point, angle: f64, factor: f64, fill: f64) -> Result<Image> {
    if !(factor > MIN_SCALE && factor < MAX_SCALE) {
        return Err(Error::NonPositiveFactor(factor));
    }
    if angle == 0.0 && factor == 1.0 {
        return Ok(img.clone());
    }
    let mut out = Image::new(img.width, img.height, img.channels);
    let mut px = vec![0.0; img.channels];
    for y in 0..img.height {
        for x in 0..img.width {
            let src = Point::new(x as f64, y as f64).similarity(center, -angle, 1.0 / factor);
            sample_into(img, src.x, src.y, fill, &mut px);
            for (c, &v) in px.iter().enumerate() {
                out.set(x, y, c, v);
            }
        }
    }
    Ok(out)
}

pub fn rotate_about(img: &Image, center: Point, angle: f64) -> Image {
    assert!(angle.is_finite(), "rotation angle must be finite");
    similarity_warp(img, center, angle, 1.0, DEFAULT_FILL).expect("unit scale is always valid")
}

pub fn scale_about(img: &Image, center: Point, factor: f64) -> Result<Image> {
    similarity_warp(img, center, 0.0, factor, DEFAULT_FILL)
}

/// Copies the pixels inside `bbox` after clamping it to the image.
pub fn crop(img: &Image, bbox: BBox) -> Result<Image> {
    let b = bbox.clamp_to(img.width, img.height);
    if b.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let (w, h) = (b.width() as usize, b.height() as usize);
    let mut data = Vec::with_capacity(w * h * img.channels);
    for y in b.y_min as usize..b.y_max as usize {
        let start = img.index(b.x_min as usize, y, 0);
        data.extend_from_slice(&img.data[start..start + w * img.channels]);
    }
    Ok(Image {
        height: h,
        width: w,
        channels: img.channels,
        data,
    })
}

/// Bilinear resampling onto an `out_w` x `out_h` grid with pixel-center
/// alignment. Source coordinates are clamped to the image, so borders
/// replicate instead of fading to the fill value.
pub fn resize(img: &Image, out_w: usize, out_h: usize) -> Image {
    assert!(out_w >= 1 && out_h >= 1, "resize target must be non-empty");
    if out_w == img.width && out_h == img.height {
        return img.clone();
    }
    let sx = img.width as f64 / out_w as f64;
    let sy = img.height as f64 / out_h as f64;
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    let mut out = Image::new(out_w, out_h, img.channels);
    let mut px = vec![0.0; img.channels];
    for y in 0..out_h {
        let src_y = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        for x in 0..out_w {
            let src_x = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
            sample_into(img, src_x, src_y, DEFAULT_FILL, &mut px);
            for (c, &v) in px.iter().enumerate() {
                out.set(x, y, c, v);
            }
        }
    }
    out
}

pub fn hflip(img: &Image) -> Image {
    let mut data = Vec::with_capacity(img.data.len());
    for row in img.data.chunks_exact(img.width * img.channels) {
        for px in row.chunks_exact(img.channels).rev() {
            data.extend_from_slice(px);
        }
    }
    Image {
        height: img.height,
        width: img.width,
        channels: img.channels,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn ramp(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, 1, |x, y, _| (x as f64 * 0.6 + y as f64 * 0.4) / (w + h) as f64)
    }

    #[test]
    fn sample_at_integer_pixel_returns_stored_value() {
        let img = Image::from_fn(6, 8, 3, |x, y, c| ((x * 7 + y * 3 + c) % 11) as f64 / 10.0);
        assert_eq!(bilinear_sample(&img, 3.0, 5.0), vec![img.get(3, 5, 0), img.get(3, 5, 1), img.get(3, 5, 2)]);
        // last column and row have no right/bottom neighbor
        assert_eq!(bilinear_sample(&img, 5.0, 7.0)[1], img.get(5, 7, 1));
    }

    #[test]
    fn sample_midpoint_and_outside() {
        let img = Image::from_fn(2, 2, 1, |x, _, _| x as f64);
        assert!((bilinear_sample(&img, 0.5, 0.0)[0] - 0.5).abs() < 1e-15);
        assert!((bilinear_sample(&img, 0.5, 0.5)[0] - 0.5).abs() < 1e-15);
        let rgb = Image::filled(4, 4, 3, 0.8);
        assert_eq!(bilinear_sample(&rgb, -1.0, -1.0), vec![0.0; 3]);
        assert_eq!(bilinear_sample(&rgb, 10.0, 1.0), vec![0.0; 3]);
    }

    #[test]
    fn zero_rotation_is_exact_identity() {
        let img = ramp(9, 7);
        assert_eq!(rotate_about(&img, Point::new(3.3, 2.1), 0.0), img);
        assert_eq!(scale_about(&img, Point::new(3.3, 2.1), 1.0).unwrap(), img);
    }

    #[test]
    fn quarter_turn_moves_marker_to_hand_computed_position() {
        let mut img = Image::new(4, 4, 1);
        img.set(3, 1, 0, 1.0);
        // center (1.5, 1.5): offset (1.5, -0.5) -> R(pi/2) -> (-0.5, -1.5) -> (1, 0)
        let out = rotate_about(&img, Point::new(1.5, 1.5), FRAC_PI_2);
        assert!(out.get(1, 0, 0) > 0.999, "{:?}", out.data());
        let total: f64 = out.data().iter().sum();
        assert!((total - out.get(1, 0, 0)).abs() < 1e-9);
        let p = Point::new(3.0, 1.0).similarity(Point::new(1.5, 1.5), FRAC_PI_2, 1.0);
        assert!((p.x - 1.0).abs() < 1e-12 && p.y.abs() < 1e-12);
    }

    #[test]
    fn rotation_round_trip_on_smooth_image() {
        let img = Image::from_fn(40, 40, 1, |x, y, _| {
            0.5 + 0.3 * ((x as f64) / 9.0).sin() * ((y as f64) / 11.0).cos()
        });
        let c = Point::new(19.5, 19.5);
        let back = rotate_about(&rotate_about(&img, c, 0.3), c, -0.3);
        // only pixels that, with their forward image, stay well inside the frame
        for y in 2..38 {
            for x in 2..38 {
                let fwd = Point::new(x as f64, y as f64).similarity(c, 0.3, 1.0);
                if fwd.x >= 2.0 && fwd.y >= 2.0 && fwd.x <= 37.0 && fwd.y <= 37.0 {
                    assert!((back.get(x, y, 0) - img.get(x, y, 0)).abs() < 0.05);
                }
            }
        }
    }

    #[test]
    fn scaling_keeps_center_pixel_fixed() {
        let mut img = Image::new(9, 9, 1);
        img.set(4, 6, 0, 1.0);
        let out = scale_about(&img, Point::new(4.0, 6.0), 2.0).unwrap();
        assert_eq!(out.get(4, 6, 0), 1.0);
        assert!(matches!(scale_about(&img, Point::new(0.0, 0.0), 0.0), Err(Error::NonPositiveFactor(_))));
        assert!(scale_about(&img, Point::new(0.0, 0.0), 10.0).is_err());
        assert!(scale_about(&img, Point::new(0.0, 0.0), -2.0).is_err());
        let p = Point::new(7.0, 1.0).similarity(Point::new(2.0, 3.0), 0.0, 1.5);
        assert_eq!((p.x, p.y), (2.0 + 1.5 * 5.0, 3.0 + 1.5 * -2.0));
    }

    #[test]
    fn crop_semantics() {
        let img = Image::from_fn(4, 4, 1, |x, y, _| (y * 4 + x) as f64 / 16.0);
        assert_eq!(crop(&img, BBox::new(0, 0, 4, 4)).unwrap(), img);
        let c = crop(&img, BBox::new(1, 2, 3, 4)).unwrap();
        assert_eq!(c.data(), &[9.0 / 16.0, 10.0 / 16.0, 13.0 / 16.0, 14.0 / 16.0]);
        let wide = crop(&img, BBox::new(2, 0, 7, 4)).unwrap();
        assert_eq!((wide.width(), wide.height()), (2, 4));
        assert!(matches!(crop(&img, BBox::new(5, 0, 9, 4)), Err(Error::EmptyRegion)));
    }

    #[test]
    fn resize_preserves_constants_and_ramps() {
        let img = ramp(13, 11);
        let same = resize(&img, 13, 11);
        for (a, b) in same.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-6);
        }
        let flat = resize(&Image::filled(17, 23, 3, 0.7), 64, 64);
        assert!(flat.data().iter().all(|v| (v - 0.7).abs() < 1e-6));

        let w = 20;
        let row = Image::from_fn(w, 3, 1, |x, _, _| x as f64 / (w - 1) as f64);
        let up = resize(&row, 2 * w, 3);
        for x in 2..(2 * w - 2) {
            let src = (x as f64 + 0.5) / 2.0 - 0.5;
            let expected = src / (w - 1) as f64;
            assert!((up.get(x, 1, 0) - expected).abs() < 1e-3);
        }
    }

    #[test]
    fn hflip_reverses_rows() {
        let row = Image::from_vec(3, 1, 1, vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(hflip(&row).data(), &[0.3, 0.2, 0.1]);
        let sym = Image::from_vec(3, 1, 1, vec![0.1, 0.9, 0.1]).unwrap();
        assert_eq!(hflip(&sym), sym);
    }

    #[test]
    fn values_are_clamped() {
        let img = Image::from_vec(2, 1, 1, vec![-0.5, 1.5]).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0]);
        assert!(Image::from_vec(1, 1, 1, vec![f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn hflip_is_an_involution(w in 1usize..9, h in 1usize..9, seed in 0u64..1000) {
            let img = Image::from_fn(w, h, 3, |x, y, c| ((x * 31 + y * 17 + c * 7) as u64 ^ seed) as f64 % 97.0 / 96.0);
            prop_assert_eq!(hflip(&hflip(&img)), img);
        }

        #[test]
        fn warps_keep_constant_interior_and_unit_range(angle in -1.0f64..1.0, factor in 0.5f64..2.0, v in 0.0f64..1.0) {
            let img = Image::filled(21, 21, 1, v);
            let c = Point::new(10.0, 10.0);
            let out = similarity_warp(&img, c, angle, factor, DEFAULT_FILL).unwrap();
            prop_assert_eq!((out.width(), out.height()), (21, 21));
            prop_assert!(out.data().iter().all(|x| (0.0..=1.0).contains(x)));
            // pixels within 4 px of the center come from deep inside the source
            for y in 7..14 {
                for x in 7..14 {
                    prop_assert!((out.get(x, y, 0) - v).abs() < 1e-6);
                }
            }
        }
    }
}
