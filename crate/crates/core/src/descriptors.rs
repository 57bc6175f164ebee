//! HOG and uniform LBP histograms, plus early fusion by concatenation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::Image;

pub const HOG_LEN_64: usize = 1764;
pub const ULBP_LEN_64: usize = 944;
pub const ULBP_BINS: usize = 59;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Descriptor type and layout, e.g. `hog(cell=8,block=2,bins=9)`.
    pub descriptor_id: String,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HogParams {
    pub cell_size: usize,
    /// Block side in cells; blocks advance one cell at a time.
    pub block_size: usize,
    pub bins: usize,
    pub clip: f64,
    pub epsilon: f64,
}

impl Default for HogParams {
    fn default() -> Self {
        HogParams {
            cell_size: 8,
            block_size: 2,
            bins: 9,
            clip: 0.2,
            epsilon: 1e-6,
        }
    }
}

impl HogParams {
    pub fn descriptor_len(&self, width: usize, height: usize) -> usize {
        let bx = width / self.cell_size + 1 - self.block_size;
        let by = height / self.cell_size + 1 - self.block_size;
        bx * by * self.block_size * self.block_size * self.bins
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.cell_size > 0 && self.block_size > 0 && self.bins > 0 && self.clip > 0.0 && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid HOG parameters {self:?}")))
        }
    }

    fn id(&self) -> String {
        format!("hog(cell={},block={},bins={})", self.cell_size, self.block_size, self.bins)
    }
}

pub fn hog(img: &Image) -> Result<FeatureVector> {
    hog_with(img, &HogParams::default())
}

/// Dalal-Triggs style HOG: centered-difference gradients (edge pixels reuse
/// the border value), unsigned orientations with linear interpolation between
/// the two nearest bins (bin `b` centered at `b * 180 / bins` degrees), cell
/// histograms grouped into overlapping blocks and L2-Hys normalized.
pub fn hog_with(img: &Image, params: &HogParams) -> Result<FeatureVector> {
    let gray = img.to_gray();
    let (w, h) = (gray.width(), gray.height());
    let cell = params.cell_size;
    if cell == 0 || w % cell != 0 || h % cell != 0 {
        return Err(Error::BadDimensions(format!("{w}x{h} not divisible into {cell}-pixel cells")));
    }
    let (cells_x, cells_y) = (w / cell, h / cell);
    if cells_x < params.block_size || cells_y < params.block_size || params.block_size == 0 || params.bins == 0 {
        return Err(Error::BadDimensions(format!("{cells_x}x{cells_y} cells cannot hold a {}-cell block", params.block_size)));
    }

    let bins = params.bins;
    let bin_width = std::f64::consts::PI / bins as f64;
    let mut cells = vec![0.0; cells_x * cells_y * bins];
    for y in 0..h {
        for x in 0..w {
            let gx = gray.get((x + 1).min(w - 1), y, 0) - gray.get(x.saturating_sub(1), y, 0);
            let gy = gray.get(x, (y + 1).min(h - 1), 0) - gray.get(x, y.saturating_sub(1), 0);
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let mut theta = gy.atan2(gx);
            if theta < 0.0 {
                theta += std::f64::consts::PI;
            }
            let pos = theta / bin_width;
            let lo = pos.floor();
            let frac = pos - lo;
            let lo = lo as usize % bins;
            let base = ((y / cell) * cells_x + x / cell) * bins;
            cells[base + lo] += mag * (1.0 - frac);
            cells[base + (lo + 1) % bins] += mag * frac;
        }
    }

    let bs = params.block_size;
    let mut out = Vec::with_capacity(params.descriptor_len(w, h));
    let mut block = Vec::with_capacity(bs * bs * bins);
    for by in 0..=(cells_y - bs) {
        for bx in 0..=(cells_x - bs) {
            block.clear();
            for cy in by..by + bs {
                for cx in bx..bx + bs {
                    let base = (cy * cells_x + cx) * bins;
                    block.extend_from_slice(&cells[base..base + bins]);
                }
            }
            l2_hys(&mut block, params.clip, params.epsilon);
            out.extend_from_slice(&block);
        }
    }
    Ok(FeatureVector {
        values: out,
        descriptor_id: params.id(),
    })
}

fn l2_hys(v: &mut [f64], clip: f64, eps: f64) {
    let scale = |v: &mut [f64]| {
        let norm = (v.iter().map(|x| x * x).sum::<f64>() + eps * eps).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    };
    scale(v);
    v.iter_mut().for_each(|x| *x = x.min(clip));
    scale(v);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LbpParams {
    pub cell_size: usize,
}

impl Default for LbpParams {
    fn default() -> Self {
        LbpParams { cell_size: 16 }
    }
}

impl LbpParams {
    pub fn validate(&self) -> Result<()> {
        if self.cell_size >= 3 {
            Ok(())
        } else {
            Err(Error::Config(format!("LBP cell size {} below 3", self.cell_size)))
        }
    }
}

/// Neighbor offsets, clockwise from the top-left; bit `i` is neighbor `i`.
const NEIGHBORS: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)];

/// Maps each 8-bit code to its uniform bin: the 58 codes with at most two
/// circular 0/1 transitions get bins 0..58 in increasing code order, every
/// other code shares bin 58.
pub fn uniform_lookup() -> [u8; 256] {
    let mut table = [0u8; 256];
    let mut next = 0u8;
    for code in 0..256u32 {
        let rotated = (code >> 1) | ((code & 1) << 7);
        table[code as usize] = if (code ^ rotated).count_ones() <= 2 {
            next += 1;
            next - 1
        } else {
            58
        };
    }
    debug_assert_eq!(next, 58);
    table
}

fn cell_bounds(len: usize, cell: usize) -> Vec<usize> {
    let n = (len / cell.max(1)).max(1);
    (0..=n).map(|i| i * len / n).collect()
}

/// Unnormalized uniform-LBP counts per cell, cells in row-major order. Only
/// pixels with all eight neighbors inside the image are coded.
pub fn ulbp_counts(img: &Image, params: &LbpParams) -> Vec<u32> {
    let gray = img.to_gray();
    let (w, h) = (gray.width(), gray.height());
    let xs = cell_bounds(w, params.cell_size);
    let ys = cell_bounds(h, params.cell_size);
    let cells_x = xs.len() - 1;
    let table = uniform_lookup();
    let mut counts = vec![0u32; cells_x * (ys.len() - 1) * ULBP_BINS];
    let cell_of = |bounds: &[usize], v: usize| bounds.partition_point(|&b| b <= v) - 1;
    for y in 1..h.saturating_sub(1) {
        let cy = cell_of(&ys, y);
        for x in 1..w.saturating_sub(1) {
            let center = gray.get(x, y, 0);
            let mut code = 0usize;
            for (bit, (dx, dy)) in NEIGHBORS.iter().enumerate() {
                let n = gray.get((x as i64 + dx) as usize, (y as i64 + dy) as usize, 0);
                if n >= center {
                    code |= 1 << bit;
                }
            }
            let cx = cell_of(&xs, x);
            counts[(cy * cells_x + cx) * ULBP_BINS + table[code] as usize] += 1;
        }
    }
    counts
}

pub fn ulbp(img: &Image) -> FeatureVector {
    ulbp_with(img, &LbpParams::default())
}

/// Per-cell uniform LBP histograms, each L1-normalized, concatenated.
pub fn ulbp_with(img: &Image, params: &LbpParams) -> FeatureVector {
    let counts = ulbp_counts(img, params);
    let mut values = Vec::with_capacity(counts.len());
    for cell in counts.chunks_exact(ULBP_BINS) {
        let total: u32 = cell.iter().sum();
        let norm = if total == 0 { 1.0 } else { total as f64 };
        values.extend(cell.iter().map(|&c| c as f64 / norm));
    }
    FeatureVector {
        values,
        descriptor_id: format!("ulbp(cell={},p=8,r=1)", params.cell_size),
    }
}

/// Concatenates vectors in the order given.
pub fn early_fuse(parts: &[FeatureVector]) -> Result<FeatureVector> {
    if parts.is_empty() {
        return Err(Error::EmptySet("feature vector"));
    }
    Ok(FeatureVector {
        values: parts.iter().flat_map(|p| p.values.iter().copied()).collect(),
        descriptor_id: parts.iter().map(|p| p.descriptor_id.as_str()).collect::<Vec<_>>().join("+"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(64, 64, 1, |_, _, _| rng.random::<f64>())
    }

    #[test]
    fn uniform_table_has_58_patterns() {
        let t = uniform_lookup();
        assert_eq!(t.iter().filter(|&&b| b < 58).count(), 58);
        assert_eq!(t[0], 0);
        assert_eq!(t[255], 57);
        assert_eq!(t[0b0101_0101], 58);
    }

    #[test]
    fn hog_of_constant_image_is_zero() {
        let v = hog(&Image::filled(64, 64, 3, 0.3)).unwrap();
        assert_eq!(v.len(), HOG_LEN_64);
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn hog_of_horizontal_ramp_uses_only_first_bin() {
        let img = Image::from_fn(64, 64, 1, |x, _, _| x as f64 / 63.0);
        let v = hog(&img).unwrap();
        for (i, &x) in v.values.iter().enumerate() {
            if i % 9 != 0 {
                assert_eq!(x, 0.0, "component {i}");
            } else {
                assert!(x > 0.0);
            }
        }
    }

    #[test]
    fn hog_rejects_indivisible_sizes() {
        assert!(matches!(hog(&Image::new(60, 64, 1)), Err(Error::BadDimensions(_))));
        assert!(matches!(hog(&Image::new(8, 8, 1)), Err(Error::BadDimensions(_))));
    }

    #[test]
    fn hog_blocks_have_bounded_norm() {
        let v = hog(&random_image(3)).unwrap();
        for block in v.values.chunks(36) {
            let n: f64 = block.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(n <= 1.0 + 1e-6);
        }
    }

    #[test]
    fn ulbp_of_constant_image() {
        let v = ulbp(&Image::filled(64, 64, 1, 0.42));
        assert_eq!(v.len(), ULBP_LEN_64);
        let all_ones_bin = uniform_lookup()[255] as usize;
        for cell in v.values.chunks(ULBP_BINS) {
            assert_eq!(cell[all_ones_bin], 1.0);
            assert!((cell.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ulbp_counts_partition_interior_pixels() {
        let counts = ulbp_counts(&random_image(9), &LbpParams::default());
        assert_eq!(counts.iter().sum::<u32>(), 62 * 62);
        let v = ulbp(&random_image(9));
        for cell in v.values.chunks(ULBP_BINS) {
            assert!((cell.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn descriptors_ignore_brightness_offsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let base: Vec<f64> = (0..64 * 64).map(|_| rng.random_range(0..128) as f64 / 255.0).collect();
        let a = Image::from_vec(64, 64, 1, base.clone()).unwrap();
        let b = Image::from_vec(64, 64, 1, base.iter().map(|v| v + 0.25).collect()).unwrap();
        let (ha, hb) = (hog(&a).unwrap(), hog(&b).unwrap());
        assert!(ha.values.iter().zip(&hb.values).all(|(x, y)| (x - y).abs() < 1e-6));
        let (la, lb) = (ulbp(&a), ulbp(&b));
        assert!(la.values.iter().zip(&lb.values).all(|(x, y)| (x - y).abs() < 1e-6));
    }

    #[test]
    fn early_fusion_concatenates() {
        let f = |v: Vec<f64>| FeatureVector {
            values: v,
            descriptor_id: "t".into(),
        };
        let one = early_fuse(&[f(vec![1.0, 2.0])]).unwrap();
        assert_eq!(one.values, vec![1.0, 2.0]);
        let two = early_fuse(&[f(vec![1.0, 2.0, 3.0]), f(vec![4.0, 5.0, 6.0, 7.0])]).unwrap();
        assert_eq!(two.values, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let parts: Vec<_> = (0..4).map(|i| hog(&random_image(i)).unwrap()).collect();
        assert_eq!(early_fuse(&parts).unwrap().len(), 7056);
        assert!(early_fuse(&[]).is_err());
    }
}
