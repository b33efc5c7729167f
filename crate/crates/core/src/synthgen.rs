//! Synthetic fisheye dataset generator.
//!
//! Renders five shape classes (disc, square, triangle, cross, ring) whose
//! local appearance depends on radial position: the shape is squashed
//! along the tangential axis by `1/(1 + d(rho))` and rotated by the
//! position's polar angle, so the distortion-semantic interaction exists
//! by construction and is analytically checkable. Scenes, annotations,
//! and patch pools are all derived from per-image ChaCha substreams, so a
//! fixed seed reproduces every artifact byte for byte.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    annotations_to_text, DatasetManifest, LabeledPatch, ManifestEntry, ObjectAnnotation, PatchPool,
};
use crate::error::{Error, Result};
use crate::geometry::{FisheyeCalibration, NormalizedPoint, RegionScheme};
use crate::pixels::PixelBuffer;
use crate::seeding::stream_rng;

/// Shape class vocabulary; index is the semantic class id.
pub const SHAPE_CLASS_NAMES: [&str; 5] = ["disc", "square", "triangle", "cross", "ring"];

pub const NUM_SHAPE_CLASSES: usize = 5;

const BACKGROUND: f64 = 0.15;
const INTENSITY_RANGE: (f64, f64) = (0.7, 0.95);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub num_images: usize,
    /// Inclusive range of objects placed per image.
    pub objects_per_image: (usize, usize),
    /// Box side lengths are drawn uniformly from this range (image fractions).
    pub size_range: (f64, f64),
    /// Relative sampling weight per shape class.
    pub class_weights: [f64; NUM_SHAPE_CLASSES],
    pub calibration: FisheyeCalibration,
    /// Std of additive Gaussian pixel noise.
    pub noise_std: f64,
    /// Rendered scene resolution (square).
    pub image_size: usize,
    /// Patch resolution for directly generated pools (square).
    pub patch_size: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            num_images: 350,
            objects_per_image: (4, 8),
            size_range: (0.12, 0.3),
            class_weights: [1.0; NUM_SHAPE_CLASSES],
            calibration: FisheyeCalibration::synthetic_default(),
            noise_std: 0.15,
            image_size: 128,
            patch_size: 32,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.size_range;
        if !(lo > 0.0 && hi <= 0.5 && lo <= hi) {
            return Err(Error::invalid(
                "generator config",
                format!("size range ({lo}, {hi}) outside (0, 0.5]"),
            ));
        }
        if self.objects_per_image.0 > self.objects_per_image.1 {
            return Err(Error::invalid(
                "generator config",
                "objects_per_image min exceeds max",
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("generator config", "noise_std must be >= 0"));
        }
        if self.class_weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite())
            || self.class_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::invalid(
                "generator config",
                "class weights must be nonnegative with positive sum",
            ));
        }
        if self.image_size < 8 || self.patch_size < 4 {
            return Err(Error::invalid("generator config", "image/patch size too small"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: GeneratorConfig = toml::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One placed object: annotation fields plus its rendering intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedObject {
    pub class_id: usize,
    pub center: NormalizedPoint,
    pub width: f64,
    pub height: f64,
    pub intensity: f64,
}

impl PlacedObject {
    pub fn annotation(&self) -> ObjectAnnotation {
        ObjectAnnotation {
            class_id: self.class_id,
            center: self.center,
            width: self.width,
            height: self.height,
        }
    }
}

/// Ground-truth per-(class, level) placement counts under some scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementTally {
    /// `counts[class][level]`
    pub counts: Vec<Vec<usize>>,
}

impl PlacementTally {
    fn new(num_classes: usize, level_count: u8) -> Self {
        Self {
            counts: vec![vec![0; usize::from(level_count)]; num_classes],
        }
    }

    pub fn record(&mut self, class_id: usize, level: u8) {
        self.counts[class_id][usize::from(level)] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn class_total(&self, class_id: usize) -> usize {
        self.counts[class_id].iter().sum()
    }

    /// Fraction of objects assigned level 0.
    pub fn level0_fraction(&self) -> f64 {
        let level0: usize = self.counts.iter().map(|c| c[0]).sum();
        level0 as f64 / self.total().max(1) as f64
    }
}

/// Samples deterministic object placements for every image.
///
/// Centers are drawn uniformly over the frame; a draw is rejected when
/// more than half of the box area would fall off-frame. Each image uses
/// substream `("place", image_index)` of the config seed.
pub fn sample_scenes(cfg: &GeneratorConfig) -> Result<Vec<Vec<PlacedObject>>> {
    cfg.validate()?;
    let total_weight: f64 = cfg.class_weights.iter().sum();
    let scenes = (0..cfg.num_images)
        .map(|img_idx| {
            let mut rng = stream_rng(cfg.seed, "place", img_idx as u64);
            let count = rng.random_range(cfg.objects_per_image.0..=cfg.objects_per_image.1);
            (0..count)
                .map(|_| sample_object(cfg, total_weight, &mut rng))
                .collect()
        })
        .collect();
    Ok(scenes)
}

fn sample_object(cfg: &GeneratorConfig, total_weight: f64, rng: &mut ChaCha8Rng) -> PlacedObject {
    let mut pick = rng.random::<f64>() * total_weight;
    let mut class_id = NUM_SHAPE_CLASSES - 1;
    for (idx, &w) in cfg.class_weights.iter().enumerate() {
        if pick < w {
            class_id = idx;
            break;
        }
        pick -= w;
    }
    let (lo, hi) = cfg.size_range;
    let width = rng.random_range(lo..=hi);
    let height = rng.random_range(lo..=hi);
    let center = loop {
        let cx: f64 = rng.random();
        let cy: f64 = rng.random();
        let vis_x = (cx + width / 2.0).min(1.0) - (cx - width / 2.0).max(0.0);
        let vis_y = (cy + height / 2.0).min(1.0) - (cy - height / 2.0).max(0.0);
        if vis_x * vis_y >= 0.5 * width * height {
            break NormalizedPoint::new(cx, cy).expect("sampled in range");
        }
    };
    let intensity = rng.random_range(INTENSITY_RANGE.0..=INTENSITY_RANGE.1);
    PlacedObject {
        class_id,
        center,
        width,
        height,
        intensity,
    }
}

/// Signed distance of the canonical shape for `class_id` at point `q`
/// (unit coordinates; negative inside).
fn shape_sdf(class_id: usize, qx: f64, qy: f64) -> f64 {
    match class_id {
        // disc
        0 => (qx * qx + qy * qy).sqrt() - 0.62,
        // square
        1 => qx.abs().max(qy.abs()) - 0.52,
        // equilateral triangle, circumradius ~0.68
        2 => {
            let r = 0.40;
            let k = 3.0f64.sqrt();
            let mut px = qx.abs() - r;
            let mut py = qy + r / k;
            if px + k * py > 0.0 {
                let (nx, ny) = ((px - k * py) / 2.0, (-k * px - py) / 2.0);
                px = nx;
                py = ny;
            }
            px -= px.clamp(-2.0 * r, 0.0);
            -(px * px + py * py).sqrt() * py.signum()
        }
        // cross: union of two bars
        3 => box_sdf(qx, qy, 0.62, 0.2).min(box_sdf(qx, qy, 0.2, 0.62)),
        // ring
        4 => ((qx * qx + qy * qy).sqrt() - 0.47).abs() - 0.15,
        other => panic!("shape class {other} out of range"),
    }
}

fn box_sdf(px: f64, py: f64, bx: f64, by: f64) -> f64 {
    let dx = px.abs() - bx;
    let dy = py.abs() - by;
    let ox = dx.max(0.0);
    let oy = dy.max(0.0);
    (ox * ox + oy * oy).sqrt() + dx.max(dy).min(0.0)
}

/// Antialiased coverage mask of a warped shape.
///
/// A pixel at patch coordinates `p` is mapped into canonical shape space
/// by `q = stretch_tangential(1 + d) . rotate(-theta) . p`, which renders
/// the shape squashed along the tangential axis by `1/(1 + d)` and
/// rotated by `theta`.
pub fn shape_coverage(
    class_id: usize,
    distortion: f64,
    theta: f64,
    out_h: usize,
    out_w: usize,
) -> PixelBuffer {
    let mut mask = PixelBuffer::zeros(out_h, out_w, 1);
    let aa = 2.0 / out_h.min(out_w) as f64;
    let (sin_t, cos_t) = theta.sin_cos();
    let squash = 1.0 + distortion;
    for y in 0..out_h {
        let v = (y as f64 + 0.5) / out_h as f64 * 2.0 - 1.0;
        for x in 0..out_w {
            let u = (x as f64 + 0.5) / out_w as f64 * 2.0 - 1.0;
            // rotate by -theta, then stretch the tangential (local y) axis
            let qx = cos_t * u + sin_t * v;
            let qy = (-sin_t * u + cos_t * v) * squash;
            let sdf = shape_sdf(class_id, qx, qy);
            mask.set(y, x, 0, (0.5 - sdf / aa).clamp(0.0, 1.0));
        }
    }
    mask
}

/// Renders a single object patch: the class shape warped according to its
/// radial distance, with foreground intensity drawn from `rng` and
/// additive Gaussian noise, clamped to `[0, 1]`.
pub fn render_patch(
    class_id: usize,
    rho: f64,
    theta: f64,
    size: usize,
    cal: &FisheyeCalibration,
    noise_std: f64,
    rng: &mut ChaCha8Rng,
) -> PixelBuffer {
    let intensity = rng.random_range(INTENSITY_RANGE.0..=INTENSITY_RANGE.1);
    let distortion = cal.distortion_at(rho);
    let mask = shape_coverage(class_id, distortion, theta, size, size);
    composite_and_noise(mask, intensity, noise_std, rng)
}

fn composite_and_noise(
    mask: PixelBuffer,
    intensity: f64,
    noise_std: f64,
    rng: &mut ChaCha8Rng,
) -> PixelBuffer {
    let mut patch = mask;
    if noise_std > 0.0 {
        let noise = Normal::new(0.0, noise_std).expect("validated std");
        for v in patch.data_mut() {
            let base = BACKGROUND + (intensity - BACKGROUND) * *v;
            *v = (base + noise.sample(rng)).clamp(0.0, 1.0);
        }
    } else {
        for v in patch.data_mut() {
            *v = BACKGROUND + (intensity - BACKGROUND) * *v;
        }
    }
    patch
}

/// Renders one scene image by compositing every placed object, then adds
/// pixel noise from the image's noise substream.
pub fn render_scene(cfg: &GeneratorConfig, objects: &[PlacedObject], img_idx: usize) -> PixelBuffer {
    let size = cfg.image_size;
    let mut img = PixelBuffer::constant(size, size, 1, BACKGROUND);
    for obj in objects {
        let rho = obj.center.radial_distance();
        let theta = obj.center.polar_angle();
        let distortion = cfg.calibration.distortion_at(rho);
        // Pixel extent of the (unclamped) box, clipped to the frame.
        let x0 = ((obj.center.x() - obj.width / 2.0) * size as f64).floor().max(0.0) as usize;
        let x1 = ((obj.center.x() + obj.width / 2.0) * size as f64).ceil().min(size as f64) as usize;
        let y0 = ((obj.center.y() - obj.height / 2.0) * size as f64).floor().max(0.0) as usize;
        let y1 = ((obj.center.y() + obj.height / 2.0) * size as f64).ceil().min(size as f64) as usize;
        let aa = 2.0 / (obj.width.min(obj.height) * size as f64);
        let (sin_t, cos_t) = theta.sin_cos();
        let squash = 1.0 + distortion;
        for py in y0..y1 {
            // Box-normalized coordinates in [-1, 1].
            let v = ((py as f64 + 0.5) / size as f64 - obj.center.y()) / (obj.height / 2.0);
            for px in x0..x1 {
                let u = ((px as f64 + 0.5) / size as f64 - obj.center.x()) / (obj.width / 2.0);
                let qx = cos_t * u + sin_t * v;
                let qy = (-sin_t * u + cos_t * v) * squash;
                let sdf = shape_sdf(obj.class_id, qx, qy);
                let cov = (0.5 - sdf / aa).clamp(0.0, 1.0);
                if cov > 0.0 {
                    let current = img.get(py, px, 0);
                    img.set(py, px, 0, current + (obj.intensity - current) * cov);
                }
            }
        }
    }
    if cfg.noise_std > 0.0 {
        let mut rng = stream_rng(cfg.seed, "scene-noise", img_idx as u64);
        let noise = Normal::new(0.0, cfg.noise_std).expect("validated std");
        for v in img.data_mut() {
            *v = (*v + noise.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    img
}

/// Generates the on-disk dataset: scene PNGs, annotation files, and a
/// manifest under `out_dir`. Returns the manifest and the ground-truth
/// placement tally under `scheme`.
pub fn generate_scene_annotations(
    cfg: &GeneratorConfig,
    scheme: &RegionScheme,
    out_dir: &Path,
) -> Result<(DatasetManifest, PlacementTally)> {
    let scenes = sample_scenes(cfg)?;
    let images_dir = out_dir.join("images");
    let labels_dir = out_dir.join("labels");
    fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
    fs::create_dir_all(&labels_dir).map_err(|e| Error::io(&labels_dir, e))?;

    scenes
        .par_iter()
        .enumerate()
        .map(|(idx, objects)| -> Result<()> {
            let image = render_scene(cfg, objects, idx);
            let image_path = images_dir.join(format!("img_{idx:05}.png"));
            image.save_png(&image_path)?;
            let annotations: Vec<ObjectAnnotation> =
                objects.iter().map(PlacedObject::annotation).collect();
            let label_path = labels_dir.join(format!("img_{idx:05}.txt"));
            fs::write(&label_path, annotations_to_text(&annotations))
                .map_err(|e| Error::io(&label_path, e))
        })
        .collect::<Result<Vec<()>>>()?;

    let entries: Vec<ManifestEntry> = (0..scenes.len())
        .map(|idx| ManifestEntry {
            image: format!("images/img_{idx:05}.png").into(),
            annotation: format!("labels/img_{idx:05}.txt").into(),
        })
        .collect();
    let manifest = DatasetManifest::new(
        NUM_SHAPE_CLASSES,
        SHAPE_CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        scheme.selector(),
        entries,
    )?;
    let manifest_path = out_dir.join("manifest.toml");
    manifest.save(&manifest_path)?;

    let mut tally = PlacementTally::new(NUM_SHAPE_CLASSES, scheme.level_count());
    for objects in &scenes {
        for obj in objects {
            tally.record(obj.class_id, scheme.assign_level(obj.center));
        }
    }
    // Reload so path resolution anchors at the manifest location.
    let manifest = DatasetManifest::load(&manifest_path)?;
    Ok((manifest, tally))
}

/// Directly renders a labeled patch pool without going through scene
/// images. Placements are identical to [`generate_scene_annotations`]
/// under the same config; patch pixels come from per-object render
/// substreams.
pub fn generate_patch_pool(cfg: &GeneratorConfig, scheme: &RegionScheme) -> Result<PatchPool> {
    let scenes = sample_scenes(cfg)?;
    let level_count = scheme.level_count();
    let per_image: Vec<Vec<LabeledPatch>> = scenes
        .par_iter()
        .enumerate()
        .map(|(img_idx, objects)| {
            objects
                .iter()
                .enumerate()
                .map(|(obj_idx, obj)| {
                    let rho = obj.center.radial_distance();
                    let theta = obj.center.polar_angle();
                    let distortion = cfg.calibration.distortion_at(rho);
                    let mask = shape_coverage_with_aspect(
                        obj.class_id,
                        distortion,
                        theta,
                        cfg.patch_size,
                        obj.width,
                        obj.height,
                    );
                    let mut rng = stream_rng(
                        cfg.seed,
                        "patch-noise",
                        (img_idx as u64) << 20 | obj_idx as u64,
                    );
                    let pixels =
                        composite_and_noise(mask, obj.intensity, cfg.noise_std, &mut rng);
                    let level = scheme.assign_level(obj.center);
                    LabeledPatch::new(pixels, obj.class_id, level, level_count, rho)
                        .expect("level from scheme")
                })
                .collect()
        })
        .collect();
    Ok(PatchPool {
        patches: per_image.into_iter().flatten().collect(),
        num_classes: NUM_SHAPE_CLASSES as u8,
        level_count,
        patch_height: cfg.patch_size as u16,
        patch_width: cfg.patch_size as u16,
        channels: 1,
    })
}

/// Like [`shape_coverage`] but squeezes the canonical shape by the box
/// aspect ratio, matching how a non-square box looks after extraction to
/// a square patch.
fn shape_coverage_with_aspect(
    class_id: usize,
    distortion: f64,
    theta: f64,
    size: usize,
    box_w: f64,
    box_h: f64,
) -> PixelBuffer {
    let mut mask = PixelBuffer::zeros(size, size, 1);
    let aa = 2.0 / size as f64;
    let (sin_t, cos_t) = theta.sin_cos();
    let squash = 1.0 + distortion;
    // A square patch cut from a box_w x box_h region stretches the shape
    // per axis; fold that into the inverse map.
    let norm = (box_w * box_h).sqrt();
    let (ax, ay) = (box_w / norm, box_h / norm);
    for y in 0..size {
        let v = ((y as f64 + 0.5) / size as f64 * 2.0 - 1.0) * ay;
        for x in 0..size {
            let u = ((x as f64 + 0.5) / size as f64 * 2.0 - 1.0) * ax;
            let qx = cos_t * u + sin_t * v;
            let qy = (-sin_t * u + cos_t * v) * squash;
            let sdf = shape_sdf(class_id, qx, qy);
            mask.set(y, x, 0, (0.5 - sdf / aa).clamp(0.0, 1.0));
        }
    }
    mask
}
