//! Deterministic stand-in for a pre-trained conv backbone.
//!
//! A 64x64 part image is split into a 6x6 grid. Each cell is summarized by
//! per-channel statistics (mean intensity and mean absolute derivative along
//! four directions), and a fixed seeded Gaussian projection followed by ReLU
//! lifts those statistics to 512 channels. Every stage is Lipschitz, so
//! nearby images map to nearby features.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::CONV_DIMS;
use crate::error::{Error, Result};
use crate::imgcore::Image;
use crate::parts::PART_SIZE;
use crate::tensor::FeatureTensor;

const GRID: usize = 6;
const CHANNELS: usize = 3;
const STATS_PER_CHANNEL: usize = 5;
/// Per-cell statistics plus a constant bias input.
pub const STAT_DIM: usize = CHANNELS * STATS_PER_CHANNEL + 1;
/// Derivative statistics are small next to intensities; this brings them to
/// a comparable range.
const GRADIENT_GAIN: f64 = 4.0;

/// Per-pixel mean over a set of part images, three channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanImage {
    data: Vec<f64>,
}

impl MeanImage {
    pub fn of<'a>(images: impl IntoIterator<Item = &'a Image>) -> Result<Self> {
        let mut sum = vec![0.0; PART_SIZE * PART_SIZE * CHANNELS];
        let mut n = 0usize;
        for img in images {
            check_size(img)?;
            for (s, v) in sum.iter_mut().zip(img.to_rgb().data()) {
                *s += v;
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptySet("mean image"));
        }
        sum.iter_mut().for_each(|s| *s /= n as f64);
        Ok(MeanImage { data: sum })
    }

    pub fn zeros() -> Self {
        MeanImage {
            data: vec![0.0; PART_SIZE * PART_SIZE * CHANNELS],
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mirror image about the vertical axis, for flipped inputs.
    pub fn flipped(&self) -> Self {
        let n = PART_SIZE;
        let mut data = vec![0.0; self.data.len()];
        for y in 0..n {
            for x in 0..n {
                let (dst, src) = ((y * n + x) * CHANNELS, (y * n + n - 1 - x) * CHANNELS);
                data[dst..dst + CHANNELS].copy_from_slice(&self.data[src..src + CHANNELS]);
            }
        }
        MeanImage { data }
    }

    pub fn to_tensor(&self) -> FeatureTensor {
        FeatureTensor::from_f64(vec![PART_SIZE, PART_SIZE, CHANNELS], &self.data).expect("finite mean")
    }

    pub fn from_tensor(t: &FeatureTensor) -> Result<Self> {
        t.expect_dims(&[PART_SIZE, PART_SIZE, CHANNELS])?;
        Ok(MeanImage { data: t.to_f64() })
    }
}

fn check_size(img: &Image) -> Result<()> {
    if img.width() != PART_SIZE || img.height() != PART_SIZE {
        return Err(Error::BadDimensions(format!(
            "encoder input must be {PART_SIZE}x{PART_SIZE}, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StubEncoder {
    /// `512 x STAT_DIM`, row-major.
    projection: Vec<f64>,
    seed: u64,
}

impl StubEncoder {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / (STAT_DIM as f64).sqrt()).expect("valid std");
        let projection = (0..CONV_DIMS[2] * STAT_DIM).map(|_| normal.sample(&mut rng)).collect();
        StubEncoder { projection, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn projection(&self) -> &[f64] {
        &self.projection
    }

    /// Cell statistics of the mean-subtracted image, `6 x 6 x STAT_DIM`.
    pub fn cell_statistics(&self, img: &Image, mean: &MeanImage) -> Result<Vec<f64>> {
        check_size(img)?;
        let n = PART_SIZE;
        let rgb = img.to_rgb();
        let centered: Vec<f64> = rgb.data().iter().zip(&mean.data).map(|(v, m)| v - m).collect();
        let at = |x: usize, y: usize, c: usize| centered[(y * n + x) * CHANNELS + c];
        let bounds: Vec<usize> = (0..=GRID).map(|i| i * n / GRID).collect();
        let mut stats = vec![0.0; GRID * GRID * STAT_DIM];
        for gy in 0..GRID {
            for gx in 0..GRID {
                let s = &mut stats[(gy * GRID + gx) * STAT_DIM..][..STAT_DIM];
                let (y0, y1, x0, x1) = (bounds[gy], bounds[gy + 1], bounds[gx], bounds[gx + 1]);
                let count = ((y1 - y0) * (x1 - x0)) as f64;
                for y in y0..y1 {
                    for x in x0..x1 {
                        for c in 0..CHANNELS {
                            let dx = at((x + 1).min(n - 1), y, c) - at(x.saturating_sub(1), y, c);
                            let dy = at(x, (y + 1).min(n - 1), c) - at(x, y.saturating_sub(1), c);
                            let base = c * STATS_PER_CHANNEL;
                            s[base] += at(x, y, c);
                            s[base + 1] += GRADIENT_GAIN * dx.abs();
                            s[base + 2] += GRADIENT_GAIN * dy.abs();
                            s[base + 3] += GRADIENT_GAIN * (dx + dy).abs();
                            s[base + 4] += GRADIENT_GAIN * (dx - dy).abs();
                        }
                    }
                }
                s[..STAT_DIM - 1].iter_mut().for_each(|v| *v /= count);
                s[STAT_DIM - 1] = 1.0;
            }
        }
        Ok(stats)
    }

    /// Encodes a 64x64 part (single-channel input is replicated to three
    /// channels) into a `6 x 6 x 512` map after subtracting `mean`.
    pub fn encode(&self, img: &Image, mean: &MeanImage) -> Result<FeatureTensor> {
        let stats = self.cell_statistics(img, mean)?;
        let depth = CONV_DIMS[2];
        let mut out = Vec::with_capacity(GRID * GRID * depth);
        for cell in stats.chunks_exact(STAT_DIM) {
            for row in self.projection.chunks_exact(STAT_DIM) {
                let v: f64 = row.iter().zip(cell).map(|(w, s)| w * s).sum();
                out.push(v.max(0.0) as f32);
            }
        }
        FeatureTensor::new(CONV_DIMS.to_vec(), out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(seed: usize) -> Image {
        Image::from_fn(64, 64, 3, |x, y, c| (((x * 7 + y * 13 + c * 5 + seed) % 29) as f64) / 28.0)
    }

    #[test]
    fn deterministic_and_shaped() {
        let enc = StubEncoder::new(5);
        let mean = MeanImage::zeros();
        let a = enc.encode(&pattern(1), &mean).unwrap();
        assert_eq!(a.dims(), &[6, 6, 512]);
        assert_eq!(a, StubEncoder::new(5).encode(&pattern(1), &mean).unwrap());
        assert_ne!(a, enc.encode(&pattern(2), &mean).unwrap());
    }

    #[test]
    fn gray_input_equals_replicated_rgb() {
        let enc = StubEncoder::new(1);
        let gray = pattern(3).to_gray();
        let mean = MeanImage::zeros();
        assert_eq!(enc.encode(&gray, &mean).unwrap(), enc.encode(&gray.to_rgb(), &mean).unwrap());
    }

    #[test]
    fn rejects_wrong_size() {
        let enc = StubEncoder::new(1);
        assert!(matches!(enc.encode(&Image::new(32, 64, 3), &MeanImage::zeros()), Err(Error::BadDimensions(_))));
    }

    #[test]
    fn mean_of_identical_images_cancels_intensity() {
        let img = pattern(4);
        let mean = MeanImage::of([&img, &img]).unwrap();
        let enc = StubEncoder::new(2);
        let stats = enc.cell_statistics(&img, &mean).unwrap();
        for cell in stats.chunks(STAT_DIM) {
            for c in 0..CHANNELS {
                assert!(cell[c * STATS_PER_CHANNEL].abs() < 1e-12);
            }
        }
        assert!(MeanImage::of(std::iter::empty()).is_err());
    }
}
