//! Naturalness statistics for distortion analysis: MSCN coefficient maps,
//! generalized-Gaussian fits of their distributions, the 36-dim feature
//! vector built from them, Gaussian overlap coefficients, and the
//! descriptive statistics reported over a labeled pool.
//!
//! The feature construction follows the classic no-reference quality
//! recipe: per scale (native and 2x-downsampled), fit a GGD to the MSCN
//! map (2 parameters) and an asymmetric GGD to each of the four pairwise
//! neighbor products (4 parameters each), giving 18 values per scale.

use std::sync::OnceLock;

use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::dataset::PatchPool;
use crate::error::{Error, Result};
use crate::geometry::{FisheyeCalibration, RegionScheme, MAX_RADIAL_DISTANCE};
use crate::pixels::PixelBuffer;

/// Center/edge grouping used when summarizing features: level 0 is the
/// center group, every higher level counts as edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ObjectRegion {
    Center,
    Edge,
}

/// The 36-value naturalness feature vector: 2 scales x (2 GGD parameters
/// for the MSCN map + 4 orientations x 4 AGGD parameters).
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalnessFeatures {
    pub values: [f64; 36],
}

impl NaturalnessFeatures {
    /// Mean of the 36 features (the scalar the per-object Gaussians are
    /// summarized from). Averaging heterogeneous features is lossy, so
    /// the full vector stays exposed.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / 36.0
    }
}

/// Mean and standard deviation of a scalar statistic over a group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSummary {
    pub mean: f64,
    pub std: f64,
}

impl GaussianSummary {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !mean.is_finite() || !std.is_finite() || std < 0.0 {
            return Err(Error::invalid(
                "gaussian summary",
                format!("mean {mean}, std {std}"),
            ));
        }
        Ok(Self { mean, std })
    }

    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("gaussian summary", "no samples"));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        GaussianSummary::new(mean, var.sqrt())
    }

    fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.std;
        (-0.5 * z * z).exp() / (self.std * (2.0 * std::f64::consts::PI).sqrt())
    }
}

const MSCN_KERNEL_SIZE: usize = 7;
const MSCN_KERNEL_SIGMA: f64 = 7.0 / 6.0;

fn mscn_kernel() -> [f64; MSCN_KERNEL_SIZE] {
    let mut k = [0.0; MSCN_KERNEL_SIZE];
    let c = MSCN_KERNEL_SIZE as f64 / 2.0 - 0.5;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * MSCN_KERNEL_SIGMA * MSCN_KERNEL_SIGMA)).exp();
        sum += *v;
    }
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Mirror index without repeating the border pixel.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * n - 2 - i;
    }
    i as usize
}

/// Separable Gaussian blur with reflect padding; `img` must be
/// single-channel.
fn gaussian_blur(values: &[f64], h: usize, w: usize) -> Vec<f64> {
    let kernel = mscn_kernel();
    let r = MSCN_KERNEL_SIZE as isize / 2;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let sx = reflect(x as isize + k as isize - r, w);
                acc += kv * values[y * w + sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let sy = reflect(y as isize + k as isize - r, h);
                acc += kv * tmp[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Mean-subtracted contrast-normalized coefficients:
/// `(I - mu) / (sigma + 1)` with 7x7 Gaussian-weighted local moments
/// (sigma_kernel = 7/6) and reflect-padded borders.
///
/// The `+1` stabilizer is calibrated to 8-bit-like intensity ranges; the
/// feature pipeline rescales unit-range images by 255 before calling this.
pub fn mscn_map(image: &PixelBuffer) -> Result<PixelBuffer> {
    if image.height() < 16 || image.width() < 16 {
        return Err(Error::invalid(
            "mscn input",
            format!("image {}x{} below 16x16", image.height(), image.width()),
        ));
    }
    let gray = image.to_grayscale();
    let (h, w) = (gray.height(), gray.width());
    let mu = gaussian_blur(gray.data(), h, w);
    let squared: Vec<f64> = gray.data().iter().map(|v| v * v).collect();
    let m2 = gaussian_blur(&squared, h, w);
    let mut out = vec![0.0; h * w];
    for i in 0..h * w {
        let var = (m2[i] - mu[i] * mu[i]).max(0.0);
        out[i] = (gray.data()[i] - mu[i]) / (var.sqrt() + 1.0);
    }
    PixelBuffer::from_vec(h, w, 1, out)
}

const GAMMA_GRID_LO: f64 = 0.2;
const GAMMA_GRID_STEP: f64 = 1e-3;
const GAMMA_GRID_LEN: usize = 9801; // covers [0.2, 10.0]

fn gamma_grid_value(i: usize) -> f64 {
    GAMMA_GRID_LO + GAMMA_GRID_STEP * i as f64
}

/// Precomputed `Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a))` over the shape grid.
fn aggd_ratio_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..GAMMA_GRID_LEN)
            .map(|i| {
                let a = gamma_grid_value(i);
                let g2 = gamma(2.0 / a);
                g2 * g2 / (gamma(1.0 / a) * gamma(3.0 / a))
            })
            .collect()
    })
}

/// Precomputed `Gamma(1/a) Gamma(3/a) / Gamma(2/a)^2` over the shape grid.
fn ggd_ratio_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..GAMMA_GRID_LEN)
            .map(|i| {
                let a = gamma_grid_value(i);
                let g2 = gamma(2.0 / a);
                gamma(1.0 / a) * gamma(3.0 / a) / (g2 * g2)
            })
            .collect()
    })
}

fn nearest_grid_alpha(target: f64, table: &[f64]) -> f64 {
    let mut best = 0;
    let mut best_err = f64::INFINITY;
    for (i, &v) in table.iter().enumerate() {
        let err = (v - target) * (v - target);
        if err < best_err {
            best_err = err;
            best = i;
        }
    }
    gamma_grid_value(best)
}

/// Symmetric generalized Gaussian fit via moment matching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgdFit {
    pub alpha: f64,
    pub sigma_sq: f64,
}

pub fn ggd_fit(samples: &[f64]) -> Result<GgdFit> {
    if samples.len() < 32 {
        return Err(Error::invalid("ggd fit", "need at least 32 samples"));
    }
    let n = samples.len() as f64;
    let sigma_sq = samples.iter().map(|v| v * v).sum::<f64>() / n;
    let e_abs = samples.iter().map(|v| v.abs()).sum::<f64>() / n;
    if sigma_sq <= 0.0 || e_abs <= 0.0 {
        return Err(Error::invalid("ggd fit", "zero variance"));
    }
    let rho = sigma_sq / (e_abs * e_abs);
    Ok(GgdFit {
        alpha: nearest_grid_alpha(rho, ggd_ratio_table()),
        sigma_sq,
    })
}

/// Asymmetric generalized Gaussian fit via the moment-matching estimator:
/// shape searched over a fixed grid `[0.2, 10]` at 1e-3 resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggdFit {
    pub alpha: f64,
    pub sigma_left: f64,
    pub sigma_right: f64,
    pub mean: f64,
}

pub fn aggd_fit(samples: &[f64]) -> Result<AggdFit> {
    if samples.len() < 32 {
        return Err(Error::invalid("aggd fit", "need at least 32 samples"));
    }
    let (mut left_sq, mut left_n) = (0.0, 0usize);
    let (mut right_sq, mut right_n) = (0.0, 0usize);
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for &v in samples {
        abs_sum += v.abs();
        sq_sum += v * v;
        if v < 0.0 {
            left_sq += v * v;
            left_n += 1;
        } else if v > 0.0 {
            right_sq += v * v;
            right_n += 1;
        }
    }
    if sq_sum <= 0.0 {
        return Err(Error::invalid("aggd fit", "zero variance"));
    }
    let n = samples.len() as f64;
    let sigma_left = if left_n > 0 {
        (left_sq / left_n as f64).sqrt()
    } else {
        0.0
    };
    let sigma_right = if right_n > 0 {
        (right_sq / right_n as f64).sqrt()
    } else {
        0.0
    };
    let rhat = (abs_sum / n) * (abs_sum / n) / (sq_sum / n);
    let rhat_norm = if sigma_right > 0.0 {
        let g = sigma_left / sigma_right;
        rhat * (g * g * g + 1.0) * (g + 1.0) / ((g * g + 1.0) * (g * g + 1.0))
    } else {
        // sigma_right == 0 is the g -> infinity limit of the correction.
        rhat
    };
    let alpha = nearest_grid_alpha(rhat_norm, aggd_ratio_table());
    let mean = (sigma_right - sigma_left) * (gamma(2.0 / alpha) / gamma(1.0 / alpha))
        * (gamma(1.0 / alpha) / gamma(3.0 / alpha)).sqrt();
    Ok(AggdFit {
        alpha,
        sigma_left,
        sigma_right,
        mean,
    })
}

/// 2x box-filter downsample (floor semantics on odd sizes).
fn downsample_2x(values: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (values[2 * y * w + 2 * x]
                + values[2 * y * w + 2 * x + 1]
                + values[(2 * y + 1) * w + 2 * x]
                + values[(2 * y + 1) * w + 2 * x + 1])
                / 4.0;
        }
    }
    (out, oh, ow)
}

fn scale_features(values: &[f64], h: usize, w: usize, out: &mut Vec<f64>) -> Result<()> {
    let img = PixelBuffer::from_vec(h, w, 1, values.to_vec())?;
    let mscn = mscn_map(&img)?;
    let m = mscn.data();
    let ggd = ggd_fit(m)?;
    out.push(ggd.alpha);
    out.push(ggd.sigma_sq);

    let mut horizontal = Vec::with_capacity(h * (w - 1));
    let mut vertical = Vec::with_capacity((h - 1) * w);
    let mut diag_main = Vec::with_capacity((h - 1) * (w - 1));
    let mut diag_anti = Vec::with_capacity((h - 1) * (w - 1));
    for y in 0..h {
        for x in 0..w {
            let c = m[y * w + x];
            if x + 1 < w {
                horizontal.push(c * m[y * w + x + 1]);
            }
            if y + 1 < h {
                vertical.push(c * m[(y + 1) * w + x]);
            }
            if y + 1 < h && x + 1 < w {
                diag_main.push(c * m[(y + 1) * w + x + 1]);
            }
            if y + 1 < h && x > 0 {
                diag_anti.push(c * m[(y + 1) * w + x - 1]);
            }
        }
    }
    for product in [&horizontal, &vertical, &diag_main, &diag_anti] {
        let fit = aggd_fit(product)?;
        out.push(fit.alpha);
        out.push(fit.mean);
        out.push(fit.sigma_left * fit.sigma_left);
        out.push(fit.sigma_right * fit.sigma_right);
    }
    Ok(())
}

/// Extracts the 36-dim naturalness feature vector from a unit-range image.
pub fn brisque_features(image: &PixelBuffer) -> Result<NaturalnessFeatures> {
    if image.height() < 32 || image.width() < 32 {
        return Err(Error::invalid(
            "feature input",
            format!("image {}x{} below 32x32", image.height(), image.width()),
        ));
    }
    let gray = image.to_grayscale();
    // Rescale to the 8-bit-like range the +1 MSCN stabilizer expects.
    let scaled: Vec<f64> = gray.data().iter().map(|v| v * 255.0).collect();
    let (h, w) = (gray.height(), gray.width());

    let mut values = Vec::with_capacity(36);
    scale_features(&scaled, h, w, &mut values)?;
    let (half, hh, hw) = downsample_2x(&scaled, h, w);
    scale_features(&half, hh, hw, &mut values)?;
    debug_assert_eq!(values.len(), 36);
    Ok(NaturalnessFeatures {
        values: values.try_into().expect("36 features"),
    })
}

/// Overlap coefficient of two Gaussians: the integral of
/// `min(pdf1, pdf2)`, computed by adaptive Simpson quadrature over the
/// union of the two +/- 8 sigma ranges (absolute error < 1e-6).
pub fn gaussian_overlap(g1: &GaussianSummary, g2: &GaussianSummary) -> Result<f64> {
    if g1.std <= 0.0 || g2.std <= 0.0 {
        return Err(Error::invalid("gaussian overlap", "zero standard deviation"));
    }
    let lo = (g1.mean - 8.0 * g1.std).min(g2.mean - 8.0 * g2.std);
    let hi = (g1.mean + 8.0 * g1.std).max(g2.mean + 8.0 * g2.std);
    let f = |x: f64| g1.pdf(x).min(g2.pdf(x));
    Ok(adaptive_simpson(&f, lo, hi, 1e-10))
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + adaptive_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// Distance/area observation for one annotated object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceAreaPoint {
    pub class_id: usize,
    pub distance: f64,
    pub area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Per-class center/edge naturalness Gaussians and their overlap.
/// `overlap` is absent when either side has too few samples or zero
/// spread.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassOverlap {
    pub class_id: usize,
    pub center: Option<GaussianSummary>,
    pub center_count: usize,
    pub edge: Option<GaussianSummary>,
    pub edge_count: usize,
    pub overlap: Option<f64>,
}

/// Descriptive statistics over an annotated dataset, plus optional
/// naturalness-feature Gaussians when patch pixels are available.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    /// `[class][level]` object counts under the scheme.
    pub class_region_counts: Vec<Vec<usize>>,
    pub distance_area: Vec<DistanceAreaPoint>,
    /// 20 uniform bins over the observed area range.
    pub area_histogram: Vec<HistogramBin>,
    /// `d(rho)` sampled at 100 radii over `[0, MAX_RADIAL_DISTANCE]`.
    pub distortion_curve: Vec<(f64, f64)>,
    pub brisque_overlap: Option<Vec<ClassOverlap>>,
}

/// Computes the report for a set of annotations; when `pool` is given,
/// also summarizes naturalness features per (class, center/edge).
pub fn pool_statistics(
    annotations: &[crate::dataset::ObjectAnnotation],
    num_classes: usize,
    scheme: &RegionScheme,
    cal: &FisheyeCalibration,
    pool: Option<&PatchPool>,
) -> Result<StatsReport> {
    if annotations.is_empty() {
        return Err(Error::invalid("statistics", "empty annotation pool"));
    }
    let levels = usize::from(scheme.level_count());
    let mut class_region_counts = vec![vec![0usize; levels]; num_classes];
    let mut distance_area = Vec::with_capacity(annotations.len());
    for ann in annotations {
        if ann.class_id >= num_classes {
            return Err(Error::invalid(
                "statistics",
                format!("class id {} out of range", ann.class_id),
            ));
        }
        let level = scheme.assign_level(ann.center);
        class_region_counts[ann.class_id][usize::from(level)] += 1;
        distance_area.push(DistanceAreaPoint {
            class_id: ann.class_id,
            distance: ann.center.radial_distance(),
            area: ann.area(),
        });
    }

    let max_area = distance_area
        .iter()
        .map(|p| p.area)
        .fold(f64::MIN, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut area_histogram: Vec<HistogramBin> = (0..20)
        .map(|i| HistogramBin {
            lo: max_area * i as f64 / 20.0,
            hi: max_area * (i + 1) as f64 / 20.0,
            count: 0,
        })
        .collect();
    for p in &distance_area {
        let bin = ((p.area / max_area * 20.0).floor() as usize).min(19);
        area_histogram[bin].count += 1;
    }

    let distortion_curve = (0..100)
        .map(|i| {
            let rho = MAX_RADIAL_DISTANCE * i as f64 / 99.0;
            (rho, cal.distortion_at(rho))
        })
        .collect();

    let brisque_overlap = match pool {
        Some(pool) if !pool.is_empty() => Some(brisque_region_overlap(pool)?),
        _ => None,
    };

    Ok(StatsReport {
        class_region_counts,
        distance_area,
        area_histogram,
        distortion_curve,
        brisque_overlap,
    })
}

fn brisque_region_overlap(pool: &PatchPool) -> Result<Vec<ClassOverlap>> {
    let means: Vec<Result<(usize, ObjectRegion, f64)>> = pool
        .patches
        .par_iter()
        .map(|p| {
            let features = brisque_features(&p.pixels)?;
            let region = if p.distortion_level == 0 {
                ObjectRegion::Center
            } else {
                ObjectRegion::Edge
            };
            Ok((p.semantic_class, region, features.mean()))
        })
        .collect();

    let classes = usize::from(pool.num_classes);
    let mut center: Vec<Vec<f64>> = vec![Vec::new(); classes];
    let mut edge: Vec<Vec<f64>> = vec![Vec::new(); classes];
    for item in means {
        let (class_id, region, value) = item?;
        match region {
            ObjectRegion::Center => center[class_id].push(value),
            ObjectRegion::Edge => edge[class_id].push(value),
        }
    }

    let mut out = Vec::with_capacity(classes);
    for class_id in 0..classes {
        let center_summary = GaussianSummary::from_samples(&center[class_id]).ok();
        let edge_summary = GaussianSummary::from_samples(&edge[class_id]).ok();
        let overlap = match (&center_summary, &edge_summary) {
            (Some(c), Some(e)) if c.std > 0.0 && e.std > 0.0 => gaussian_overlap(c, e).ok(),
            _ => None,
        };
        out.push(ClassOverlap {
            class_id,
            center: center_summary,
            center_count: center[class_id].len(),
            edge: edge_summary,
            edge_count: edge[class_id].len(),
            overlap,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::stream_rng;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn mscn_of_constant_image_is_zero() {
        let img = PixelBuffer::constant(20, 20, 1, 0.42);
        let map = mscn_map(&img).unwrap();
        for &v in map.data() {
            assert!(v.abs() < 1e-12, "mscn value {v}");
        }
    }

    #[test]
    fn mscn_rejects_small_images() {
        let img = PixelBuffer::constant(8, 8, 1, 0.5);
        assert!(mscn_map(&img).is_err());
    }

    fn noise_image(h: usize, w: usize, mean: f64, std: f64, seed: u64) -> PixelBuffer {
        let mut rng = stream_rng(seed, "noise-img", 0);
        let normal = Normal::new(mean, std).unwrap();
        let data = (0..h * w).map(|_| normal.sample(&mut rng)).collect();
        PixelBuffer::from_vec(h, w, 1, data).unwrap()
    }

    #[test]
    fn mscn_mean_near_zero_on_noise() {
        // Natural-like texture at an 8-bit-like range.
        let img = noise_image(64, 64, 128.0, 30.0, 3);
        let map = mscn_map(&img).unwrap();
        let mean = map.data().iter().sum::<f64>() / map.data().len() as f64;
        assert!(mean.abs() < 0.05, "mscn mean {mean}");
    }

    #[test]
    fn mscn_quasi_scale_invariance() {
        // Doubling intensities barely moves MSCN at 8-bit-like ranges
        // thanks to the +1 stabilizer being << local sigma.
        let img = noise_image(64, 64, 100.0, 25.0, 4);
        let doubled =
            PixelBuffer::from_vec(64, 64, 1, img.data().iter().map(|v| v * 2.0).collect())
                .unwrap();
        let a = mscn_map(&img).unwrap();
        let b = mscn_map(&doubled).unwrap();
        let mut diff_sq = 0.0;
        let mut ref_sq = 0.0;
        for (x, y) in a.data().iter().zip(b.data()) {
            diff_sq += (x - y) * (x - y);
            ref_sq += x * x;
        }
        let rel_rms = (diff_sq / ref_sq).sqrt();
        assert!(rel_rms < 0.05, "relative RMS change {rel_rms}");
    }

    #[test]
    fn aggd_recovers_gaussian_shape() {
        let mut rng = stream_rng(11, "aggd-gauss", 0);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let samples: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut rng)).collect();
        let fit = aggd_fit(&samples).unwrap();
        assert!((fit.alpha - 2.0).abs() < 0.1, "alpha {}", fit.alpha);
        assert!(
            (fit.sigma_left - fit.sigma_right).abs() < 0.05,
            "sigmas {} vs {}",
            fit.sigma_left,
            fit.sigma_right
        );
        assert!(fit.mean.abs() < 0.05);
    }

    #[test]
    fn aggd_recovers_laplacian_shape() {
        let mut rng = stream_rng(12, "aggd-laplace", 0);
        let samples: Vec<f64> = (0..100_000)
            .map(|_| {
                // Inverse-CDF Laplace draw with unit scale.
                let u: f64 = rng.random::<f64>() - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln()
            })
            .collect();
        let fit = aggd_fit(&samples).unwrap();
        assert!((fit.alpha - 1.0).abs() < 0.1, "alpha {}", fit.alpha);
    }

    #[test]
    fn aggd_mirror_swaps_sides() {
        let mut rng = stream_rng(13, "aggd-mirror", 0);
        let samples: Vec<f64> = (0..50_000)
            .map(|_| {
                let u: f64 = rng.random();
                // Asymmetric: stretch positives.
                let v: f64 = rng.random::<f64>() - 0.5;
                if u < 0.5 {
                    v.abs() * 2.0
                } else {
                    -v.abs()
                }
            })
            .collect();
        let mirrored: Vec<f64> = samples.iter().map(|v| -v).collect();
        let fit = aggd_fit(&samples).unwrap();
        let fit_m = aggd_fit(&mirrored).unwrap();
        assert_eq!(fit.alpha, fit_m.alpha);
        assert!((fit.sigma_left - fit_m.sigma_right).abs() < 1e-12);
        assert!((fit.sigma_right - fit_m.sigma_left).abs() < 1e-12);
    }

    #[test]
    fn aggd_rejects_degenerate_samples() {
        let samples = vec![0.0; 100];
        assert!(aggd_fit(&samples).is_err());
        assert!(aggd_fit(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn ggd_sigma_recovery_within_five_percent() {
        let mut rng = stream_rng(14, "ggd", 0);
        let normal = Normal::new(0.0, 2.5).unwrap();
        let samples: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut rng)).collect();
        let fit = ggd_fit(&samples).unwrap();
        assert!((fit.sigma_sq.sqrt() - 2.5).abs() / 2.5 < 0.05);
        // Symmetric data through the AGGD route recovers matching sides.
        let afit = aggd_fit(&samples).unwrap();
        let ratio = afit.sigma_left / afit.sigma_right;
        assert!((0.95..=1.05).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn feature_vector_has_36_entries_and_is_deterministic() {
        let img = noise_image(40, 40, 0.5, 0.1, 21);
        let unit = PixelBuffer::from_vec(
            40,
            40,
            1,
            img.data().iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        )
        .unwrap();
        let a = brisque_features(&unit).unwrap();
        let b = brisque_features(&unit).unwrap();
        assert_eq!(a.values.len(), 36);
        assert_eq!(a, b);
        assert!(a.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn feature_rejects_small_images() {
        let img = PixelBuffer::constant(20, 20, 1, 0.5);
        assert!(brisque_features(&img).is_err());
    }

    #[test]
    fn overlap_identical_gaussians_is_one() {
        let g = GaussianSummary::new(1.3, 0.7).unwrap();
        let o = gaussian_overlap(&g, &g).unwrap();
        assert!((o - 1.0).abs() < 1e-9, "overlap {o}");
    }

    #[test]
    fn overlap_disjoint_gaussians_is_zero() {
        let a = GaussianSummary::new(0.0, 1.0).unwrap();
        let b = GaussianSummary::new(100.0, 1.0).unwrap();
        let o = gaussian_overlap(&a, &b).unwrap();
        assert!(o < 1e-12, "overlap {o}");
    }

    #[test]
    fn overlap_unit_shift_matches_erf_closed_form() {
        // Equal sigmas: overlap = 2 Phi(-delta / (2 sigma)) = erfc(delta/(2 sigma sqrt 2)).
        let a = GaussianSummary::new(0.0, 1.0).unwrap();
        let b = GaussianSummary::new(2.0, 1.0).unwrap();
        let o = gaussian_overlap(&a, &b).unwrap();
        let expected = statrs::function::erf::erfc(1.0 / std::f64::consts::SQRT_2);
        assert!((o - expected).abs() < 1e-6, "overlap {o} vs {expected}");
        assert!((o - 0.31731).abs() < 1e-4);
    }

    #[test]
    fn overlap_symmetric_and_shift_scale_invariant() {
        let a = GaussianSummary::new(0.3, 0.8).unwrap();
        let b = GaussianSummary::new(1.1, 1.7).unwrap();
        let o1 = gaussian_overlap(&a, &b).unwrap();
        let o2 = gaussian_overlap(&b, &a).unwrap();
        assert!((o1 - o2).abs() < 1e-9);
        let shift_scale = |g: &GaussianSummary| {
            GaussianSummary::new(3.0 * (g.mean + 2.0), 3.0 * g.std).unwrap()
        };
        let o3 = gaussian_overlap(&shift_scale(&a), &shift_scale(&b)).unwrap();
        assert!((o1 - o3).abs() < 1e-6, "{o1} vs {o3}");
    }

    #[test]
    fn overlap_rejects_zero_std() {
        let a = GaussianSummary::new(0.0, 0.0).unwrap();
        let b = GaussianSummary::new(1.0, 1.0).unwrap();
        assert!(gaussian_overlap(&a, &b).is_err());
    }

    #[test]
    fn statistics_on_single_center_object() {
        use crate::dataset::ObjectAnnotation;
        use crate::geometry::NormalizedPoint;
        let ann = ObjectAnnotation::new(
            0,
            NormalizedPoint::new(0.5, 0.5).unwrap(),
            0.1,
            0.2,
        )
        .unwrap();
        let report = pool_statistics(
            &[ann],
            5,
            &RegionScheme::standard_box(),
            &FisheyeCalibration::synthetic_default(),
            None,
        )
        .unwrap();
        assert_eq!(report.class_region_counts[0], vec![1, 0]);
        assert!((report.distance_area[0].area - 0.02).abs() < 1e-12);
        assert_eq!(report.distortion_curve.len(), 100);
        assert_eq!(report.area_histogram.len(), 20);
        assert_eq!(
            report.area_histogram.iter().map(|b| b.count).sum::<usize>(),
            1
        );
    }

    #[test]
    fn statistics_reject_empty_pool() {
        let report = pool_statistics(
            &[],
            5,
            &RegionScheme::standard_box(),
            &FisheyeCalibration::synthetic_default(),
            None,
        );
        assert!(report.is_err());
    }
}
