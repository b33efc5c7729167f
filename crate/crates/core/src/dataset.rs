//! Annotation ingestion and patch mining: turns per-image bounding-box
//! files into a pool of patches carrying both a semantic class and a
//! distortion class.
//!
//! Annotation files are line-oriented text, one object per line:
//! `class_id x_center y_center width height`, all but the class as
//! normalized image fractions. The distortion class packs the semantic
//! class and the position-derived level as `class * L + level`, so a
//! 5-class dataset under a two-level scheme spans distortion classes 0..10.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NormalizedPoint, RegionScheme};
use crate::pixels::PixelBuffer;

/// One object row from an annotation file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectAnnotation {
    pub class_id: usize,
    pub center: NormalizedPoint,
    pub width: f64,
    pub height: f64,
}

impl ObjectAnnotation {
    pub fn new(class_id: usize, center: NormalizedPoint, width: f64, height: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0 && v <= 1.0;
        if !ok(width) || !ok(height) {
            return Err(Error::invalid(
                "annotation",
                format!("box size {width}x{height} outside (0, 1]"),
            ));
        }
        Ok(Self {
            class_id,
            center,
            width,
            height,
        })
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Box corners clamped to the frame, as `(x0, y0, x1, y1)` fractions.
    pub fn clamped_box(&self) -> (f64, f64, f64, f64) {
        let x0 = (self.center.x() - self.width / 2.0).max(0.0);
        let y0 = (self.center.y() - self.height / 2.0).max(0.0);
        let x1 = (self.center.x() + self.width / 2.0).min(1.0);
        let y1 = (self.center.y() + self.height / 2.0).min(1.0);
        (x0, y0, x1, y1)
    }

    /// Serializes back to the five-field line format.
    pub fn to_line(&self) -> String {
        format!(
            "{} {} {} {} {}",
            self.class_id,
            self.center.x(),
            self.center.y(),
            self.width,
            self.height
        )
    }
}

/// Parses a whole annotation file. Blank lines are skipped; errors carry
/// the 1-based line number.
pub fn parse_annotation_file(text: &str) -> Result<Vec<ObjectAnnotation>> {
    let mut annotations = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        annotations.push(parse_annotation_line(line, idx + 1)?);
    }
    Ok(annotations)
}

fn parse_annotation_line(line: &str, line_no: usize) -> Result<ObjectAnnotation> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(Error::Parse {
            line: line_no,
            reason: format!("expected 5 fields, found {}", fields.len()),
        });
    }
    let class_id: usize = fields[0].parse().map_err(|_| Error::Parse {
        line: line_no,
        reason: format!("bad class id {:?}", fields[0]),
    })?;
    let mut nums = [0.0f64; 4];
    for (slot, field) in nums.iter_mut().zip(&fields[1..]) {
        *slot = field.parse().map_err(|_| Error::Parse {
            line: line_no,
            reason: format!("bad number {field:?}"),
        })?;
    }
    let [x, y, w, h] = nums;
    let center = NormalizedPoint::new(x, y).map_err(|e| Error::Parse {
        line: line_no,
        reason: e.to_string(),
    })?;
    ObjectAnnotation::new(class_id, center, w, h).map_err(|e| Error::Parse {
        line: line_no,
        reason: e.to_string(),
    })
}

/// Distortion level and packed distortion class for an annotation.
pub fn derive_distortion_class(
    ann: &ObjectAnnotation,
    scheme: &RegionScheme,
    num_classes: usize,
) -> Result<(u8, usize)> {
    if ann.class_id >= num_classes {
        return Err(Error::invalid(
            "annotation",
            format!("class id {} out of range 0..{num_classes}", ann.class_id),
        ));
    }
    let level = scheme.assign_level(ann.center);
    let class = ann.class_id * usize::from(scheme.level_count()) + usize::from(level);
    Ok((level, class))
}

/// A mined object patch with its label triple.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPatch {
    pub pixels: PixelBuffer,
    pub semantic_class: usize,
    pub distortion_level: u8,
    pub distortion_class: usize,
    /// Radial distance of the source object's center.
    pub source_distance: f64,
}

impl LabeledPatch {
    pub fn new(
        pixels: PixelBuffer,
        semantic_class: usize,
        distortion_level: u8,
        level_count: u8,
        source_distance: f64,
    ) -> Result<Self> {
        if distortion_level >= level_count {
            return Err(Error::invalid(
                "patch",
                format!("level {distortion_level} out of range 0..{level_count}"),
            ));
        }
        Ok(Self {
            pixels,
            semantic_class,
            distortion_level,
            distortion_class: semantic_class * usize::from(level_count)
                + usize::from(distortion_level),
            source_distance,
        })
    }
}

/// One image/annotation file pair in a manifest.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub annotation: PathBuf,
}

/// Dataset description: class vocabulary, default region scheme selector,
/// and the image/annotation pairs. Relative paths resolve against the
/// manifest file's directory.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetManifest {
    pub num_classes: usize,
    pub class_names: Vec<String>,
    pub scheme: String,
    #[serde(default)]
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(
        num_classes: usize,
        class_names: Vec<String>,
        scheme: String,
        entries: Vec<ManifestEntry>,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::invalid("manifest", "need at least 2 classes"));
        }
        if class_names.len() != num_classes {
            return Err(Error::invalid(
                "manifest",
                format!(
                    "{} class names for {num_classes} classes",
                    class_names.len()
                ),
            ));
        }
        Ok(Self {
            num_classes,
            class_names,
            scheme,
            entries,
            base_dir: PathBuf::new(),
        })
    }

    /// Loads a manifest and checks every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest = toml::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if manifest.num_classes < 2 {
            return Err(Error::invalid("manifest", "need at least 2 classes"));
        }
        if manifest.class_names.len() != manifest.num_classes {
            return Err(Error::invalid(
                "manifest",
                format!(
                    "{} class names for {} classes",
                    manifest.class_names.len(),
                    manifest.num_classes
                ),
            ));
        }
        manifest.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        for entry in &manifest.entries {
            for file in [&entry.image, &entry.annotation] {
                let resolved = manifest.resolve(file);
                if !resolved.exists() {
                    return Err(Error::invalid(
                        "manifest",
                        format!("referenced file missing: {}", resolved.display()),
                    ));
                }
            }
        }
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self)
            .map_err(|e| Error::Format(format!("manifest serialize: {e}")))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, file: &Path) -> PathBuf {
        if file.is_absolute() {
            file.to_path_buf()
        } else {
            self.base_dir.join(file)
        }
    }
}

/// Crops the (clamped) bounding box out of `image` and resamples it to
/// `out_size = (height, width)` with bilinear interpolation.
pub fn extract_patch(
    image: &PixelBuffer,
    ann: &ObjectAnnotation,
    out_size: (usize, usize),
) -> Result<PixelBuffer> {
    let (x0, y0, x1, y1) = ann.clamped_box();
    let w = image.width() as f64;
    let h = image.height() as f64;
    let (px0, py0, px1, py1) = (x0 * w, y0 * h, x1 * w, y1 * h);
    if px1 - px0 < f64::EPSILON || py1 - py0 < f64::EPSILON {
        return Err(Error::Extraction(format!(
            "clamped box for object at ({}, {}) has zero area",
            ann.center.x(),
            ann.center.y()
        )));
    }
    image.resample_region(py0, px0, py1, px1, out_size.0, out_size.1)
}

/// A patch pool together with the label-space geometry needed to
/// interpret it.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchPool {
    pub patches: Vec<LabeledPatch>,
    pub num_classes: u8,
    pub level_count: u8,
    pub patch_height: u16,
    pub patch_width: u16,
    pub channels: u8,
}

impl PatchPool {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Per-(class, level) patch counts, `counts[class][level]`.
    pub fn label_counts(&self) -> Vec<Vec<usize>> {
        let mut counts =
            vec![vec![0usize; usize::from(self.level_count)]; usize::from(self.num_classes)];
        for p in &self.patches {
            counts[p.semantic_class][usize::from(p.distortion_level)] += 1;
        }
        counts
    }
}

/// Mines a labeled patch pool from every annotation in the manifest.
///
/// Images are processed in parallel but the pool preserves manifest order
/// (file order, then line order), so repeated runs are byte-identical.
pub fn build_patch_pool(
    manifest: &DatasetManifest,
    scheme: &RegionScheme,
    out_size: (usize, usize),
) -> Result<PatchPool> {
    let level_count = scheme.level_count();
    if manifest.num_classes > usize::from(u8::MAX) {
        return Err(Error::invalid("manifest", "more than 255 classes"));
    }
    let per_image: Vec<Result<Vec<LabeledPatch>>> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let ann_path = manifest.resolve(&entry.annotation);
            let text = fs::read_to_string(&ann_path).map_err(|e| Error::io(&ann_path, e))?;
            let annotations = parse_annotation_file(&text).map_err(|e| {
                Error::Format(format!("{}: {e}", ann_path.display()))
            })?;
            if annotations.is_empty() {
                return Ok(Vec::new());
            }
            let image = PixelBuffer::load_png(&manifest.resolve(&entry.image))?;
            let mut patches = Vec::with_capacity(annotations.len());
            for ann in &annotations {
                let (level, _) = derive_distortion_class(ann, scheme, manifest.num_classes)
                    .map_err(|e| Error::Format(format!("{}: {e}", ann_path.display())))?;
                let pixels = extract_patch(&image, ann, out_size)?;
                patches.push(LabeledPatch::new(
                    pixels,
                    ann.class_id,
                    level,
                    level_count,
                    ann.center.radial_distance(),
                )?);
            }
            Ok(patches)
        })
        .collect();

    let mut patches = Vec::new();
    let mut channels = 1u8;
    for result in per_image {
        let image_patches = result?;
        if let Some(first) = image_patches.first() {
            channels = first.pixels.channels() as u8;
        }
        patches.extend(image_patches);
    }
    Ok(PatchPool {
        patches,
        num_classes: manifest.num_classes as u8,
        level_count,
        patch_height: out_size.0 as u16,
        patch_width: out_size.1 as u16,
        channels,
    })
}

const POOL_MAGIC: &[u8; 4] = b"FEPP";
const POOL_VERSION: u32 = 1;

/// Writes a pool in the binary patch-pool format.
///
/// Layout (little-endian): magic `FEPP`, version u32, count u32, h u16,
/// w u16, ch u8, C u8, L u8, then per record: semantic_class u8,
/// distortion_level u8, source_distance f32, pixels f32 row-major.
pub fn write_pool(path: &Path, pool: &PatchPool) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(POOL_MAGIC);
    buf.extend_from_slice(&POOL_VERSION.to_le_bytes());
    buf.extend_from_slice(&(pool.patches.len() as u32).to_le_bytes());
    buf.extend_from_slice(&pool.patch_height.to_le_bytes());
    buf.extend_from_slice(&pool.patch_width.to_le_bytes());
    buf.push(pool.channels);
    buf.push(pool.num_classes);
    buf.push(pool.level_count);
    let pixel_len =
        usize::from(pool.patch_height) * usize::from(pool.patch_width) * usize::from(pool.channels);
    for patch in &pool.patches {
        if patch.pixels.data().len() != pixel_len {
            return Err(Error::Shape(format!(
                "patch pixel count {} does not match pool geometry {pixel_len}",
                patch.pixels.data().len()
            )));
        }
        buf.push(patch.semantic_class as u8);
        buf.push(patch.distortion_level);
        buf.extend_from_slice(&(patch.source_distance as f32).to_le_bytes());
        for &v in patch.pixels.data() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Reads a pool written by [`write_pool`].
pub fn read_pool(path: &Path) -> Result<PatchPool> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut cursor = 0usize;
    let take = |cursor: &mut usize, n: usize| -> Result<&[u8]> {
        let slice = bytes
            .get(*cursor..*cursor + n)
            .ok_or_else(|| Error::Format("pool file truncated".to_string()))?;
        *cursor += n;
        Ok(slice)
    };
    if take(&mut cursor, 4)? != POOL_MAGIC {
        return Err(Error::Format("not a patch pool file".to_string()));
    }
    let version = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
    if version != POOL_VERSION {
        return Err(Error::Format(format!("unsupported pool version {version}")));
    }
    let count = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
    let height = u16::from_le_bytes(take(&mut cursor, 2)?.try_into().unwrap());
    let width = u16::from_le_bytes(take(&mut cursor, 2)?.try_into().unwrap());
    let channels = take(&mut cursor, 1)?[0];
    let num_classes = take(&mut cursor, 1)?[0];
    let level_count = take(&mut cursor, 1)?[0];
    if level_count == 0 || num_classes < 2 {
        return Err(Error::Format(format!(
            "bad pool label space: {num_classes} classes, {level_count} levels"
        )));
    }
    let pixel_len = usize::from(height) * usize::from(width) * usize::from(channels);
    let mut patches = Vec::with_capacity(count);
    for _ in 0..count {
        let semantic_class = take(&mut cursor, 1)?[0];
        let distortion_level = take(&mut cursor, 1)?[0];
        let source_distance =
            f32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as f64;
        if semantic_class >= num_classes || distortion_level >= level_count {
            return Err(Error::Format(format!(
                "record labels ({semantic_class}, {distortion_level}) outside pool label space"
            )));
        }
        let mut data = Vec::with_capacity(pixel_len);
        let raw = take(&mut cursor, pixel_len * 4)?;
        for chunk in raw.chunks_exact(4) {
            data.push(f64::from(f32::from_le_bytes(chunk.try_into().unwrap())));
        }
        patches.push(LabeledPatch::new(
            PixelBuffer::from_vec(usize::from(height), usize::from(width), usize::from(channels), data)?,
            usize::from(semantic_class),
            distortion_level,
            level_count,
            source_distance,
        )?);
    }
    if cursor != bytes.len() {
        return Err(Error::Format("trailing bytes after pool records".to_string()));
    }
    Ok(PatchPool {
        patches,
        num_classes,
        level_count,
        patch_height: height,
        patch_width: width,
        channels,
    })
}

/// Renders annotation lines for a whole file.
pub fn annotations_to_text(annotations: &[ObjectAnnotation]) -> String {
    let mut out = String::new();
    for ann in annotations {
        let _ = writeln!(out, "{}", ann.to_line());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RegionScheme;

    fn pt(x: f64, y: f64) -> NormalizedPoint {
        NormalizedPoint::new(x, y).unwrap()
    }

    #[test]
    fn parses_single_line() {
        let anns = parse_annotation_file("0 0.5 0.5 0.1 0.1").unwrap();
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].class_id, 0);
        assert_eq!(anns[0].center, pt(0.5, 0.5));
        assert_eq!((anns[0].width, anns[0].height), (0.1, 0.1));
    }

    #[test]
    fn empty_file_parses_to_empty() {
        assert!(parse_annotation_file("").unwrap().is_empty());
        assert!(parse_annotation_file("\n\n  \n").unwrap().is_empty());
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = parse_annotation_file("0 0.5 0.5 0.1 0.1\n1 0.5 oops 0.1 0.1").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn parse_rejects_out_of_range_values() {
        assert!(parse_annotation_file("0 1.5 0.5 0.1 0.1").is_err());
        assert!(parse_annotation_file("0 0.5 0.5 0.0 0.1").is_err());
        assert!(parse_annotation_file("0 0.5 0.5 0.1").is_err());
    }

    #[test]
    fn parse_serialize_round_trip() {
        let text = "1 0.9 0.2 0.05 0.2\n4 0.5 0.55 0.3 0.3";
        let anns = parse_annotation_file(text).unwrap();
        assert_eq!(anns.len(), 2);
        assert_eq!(anns[0].class_id, 1);
        assert_eq!(anns[1].class_id, 4);
        let reparsed = parse_annotation_file(&annotations_to_text(&anns)).unwrap();
        assert_eq!(anns, reparsed);
    }

    #[test]
    fn distortion_class_packing() {
        let scheme = RegionScheme::standard_box();
        let center = ObjectAnnotation::new(0, pt(0.5, 0.5), 0.1, 0.1).unwrap();
        assert_eq!(derive_distortion_class(&center, &scheme, 5).unwrap(), (0, 0));

        let edge = ObjectAnnotation::new(2, pt(0.05, 0.05), 0.1, 0.1).unwrap();
        assert_eq!(derive_distortion_class(&edge, &scheme, 5).unwrap(), (1, 5));

        let bad = ObjectAnnotation::new(7, pt(0.5, 0.5), 0.1, 0.1).unwrap();
        assert!(derive_distortion_class(&bad, &scheme, 5).is_err());
    }

    #[test]
    fn five_classes_two_levels_cover_ten_distortion_classes() {
        // Enumerate every (class, level) pair and collect the packed ids.
        let scheme = RegionScheme::standard_box();
        let mut seen = std::collections::BTreeSet::new();
        for class in 0..5 {
            for &(x, y) in &[(0.5, 0.5), (0.05, 0.05)] {
                let ann = ObjectAnnotation::new(class, pt(x, y), 0.1, 0.1).unwrap();
                let (_, dc) = derive_distortion_class(&ann, &scheme, 5).unwrap();
                seen.insert(dc);
            }
        }
        assert_eq!(seen, (0..10).collect());
    }

    #[test]
    fn extract_constant_image_gives_constant_patch() {
        let img = PixelBuffer::constant(20, 20, 1, 0.7);
        let ann = ObjectAnnotation::new(0, pt(0.3, 0.6), 0.4, 0.3).unwrap();
        let patch = extract_patch(&img, &ann, (8, 8)).unwrap();
        for &v in patch.data() {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn full_frame_native_extract_is_identity() {
        let mut img = PixelBuffer::zeros(6, 6, 1);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = i as f64 / 35.0;
        }
        let ann = ObjectAnnotation::new(0, pt(0.5, 0.5), 1.0, 1.0).unwrap();
        let patch = extract_patch(&img, &ann, (6, 6)).unwrap();
        assert_eq!(patch, img);
    }

    #[test]
    fn off_frame_box_is_clamped() {
        let img = PixelBuffer::constant(16, 16, 1, 0.4);
        // Center near the corner; most of the box hangs off-frame.
        let ann = ObjectAnnotation::new(0, pt(0.02, 0.02), 0.3, 0.3).unwrap();
        let patch = extract_patch(&img, &ann, (4, 4)).unwrap();
        assert_eq!(patch.data().len(), 16);
    }

    #[test]
    fn pool_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.fepp");
        let mut patches = Vec::new();
        for i in 0..6 {
            let pixels = PixelBuffer::constant(4, 4, 1, i as f64 / 10.0);
            patches.push(LabeledPatch::new(pixels, i % 3, (i % 2) as u8, 2, 0.1 * i as f64).unwrap());
        }
        let pool = PatchPool {
            patches,
            num_classes: 3,
            level_count: 2,
            patch_height: 4,
            patch_width: 4,
            channels: 1,
        };
        write_pool(&path, &pool).unwrap();
        let loaded = read_pool(&path).unwrap();
        assert_eq!(loaded.len(), 6);
        assert_eq!(loaded.num_classes, 3);
        assert_eq!(loaded.level_count, 2);
        for (a, b) in pool.patches.iter().zip(&loaded.patches) {
            assert_eq!(a.semantic_class, b.semantic_class);
            assert_eq!(a.distortion_class, b.distortion_class);
            assert!((a.source_distance - b.source_distance).abs() < 1e-6);
            // Pixels pass through f32 storage.
            for (pa, pb) in a.pixels.data().iter().zip(b.pixels.data()) {
                assert!((pa - pb).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn pool_reader_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.fepp");
        fs::write(&path, b"NOPE").unwrap();
        assert!(read_pool(&path).is_err());
    }

    #[test]
    fn patch_label_consistency() {
        let pixels = PixelBuffer::zeros(2, 2, 1);
        let p = LabeledPatch::new(pixels, 3, 1, 2, 0.2).unwrap();
        assert_eq!(p.distortion_class, 7);
        assert_eq!(p.distortion_class % 2, usize::from(p.distortion_level));
        assert_eq!(p.distortion_class / 2, p.semantic_class);
    }
}
