//! Fisheye radial geometry: image-plane distances, the quartic distortion
//! polynomial, and the region schemes that map object position to a
//! distortion level.
//!
//! Coordinates are image fractions in `[0, 1]` with the optical center at
//! `(0.5, 0.5)`. The largest possible distance from the center is the
//! half-diagonal `sqrt(0.5) ~= 0.70711`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper edge of the radial range used when binning distances into levels.
/// Slightly above the true half-diagonal so the corner point still lands in
/// the last bin after flooring.
pub const MAX_RADIAL_DISTANCE: f64 = 0.7072;

/// Coefficients of the radial distortion polynomial
/// `d(rho) = a0 + a2*rho^2 + a3*rho^3 + a4*rho^4` (there is no linear term).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisheyeCalibration {
    pub a0: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

impl FisheyeCalibration {
    pub fn new(a0: f64, a2: f64, a3: f64, a4: f64) -> Result<Self> {
        for (name, v) in [("a0", a0), ("a2", a2), ("a3", a3), ("a4", a4)] {
            if !v.is_finite() {
                return Err(Error::invalid(
                    "calibration",
                    format!("coefficient {name} is not finite: {v}"),
                ));
            }
        }
        Ok(Self { a0, a2, a3, a4 })
    }

    /// Stand-in coefficients for synthetic data: zero distortion at the
    /// center, visibly increasing toward the image edge.
    pub fn synthetic_default() -> Self {
        Self {
            a0: 0.0,
            a2: 0.6,
            a3: 0.25,
            a4: 0.1,
        }
    }

    /// Distortion magnitude at radial distance `rho` (expects finite
    /// `rho >= 0`).
    pub fn distortion_at(&self, rho: f64) -> f64 {
        debug_assert!(rho.is_finite() && rho >= 0.0);
        let r2 = rho * rho;
        self.a0 + self.a2 * r2 + self.a3 * r2 * rho + self.a4 * r2 * r2
    }

    /// Loads coefficients from a text file with keys `a0`, `a2`, `a3`, `a4`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cal: FisheyeCalibration = toml::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        FisheyeCalibration::new(cal.a0, cal.a2, cal.a3, cal.a4)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self)
            .map_err(|e| Error::Format(format!("calibration serialize: {e}")))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// A point in image-fraction coordinates, both axes in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPoint {
    x: f64,
    y: f64,
}

impl NormalizedPoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y))
        {
            return Err(Error::invalid(
                "point",
                format!("coordinates ({x}, {y}) outside [0, 1]"),
            ));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Euclidean distance from the image center `(0.5, 0.5)`.
    /// Ranges over `[0, sqrt(0.5)]`.
    pub fn radial_distance(&self) -> f64 {
        let dx = self.x - 0.5;
        let dy = self.y - 0.5;
        (dx * dx + dy * dy).sqrt()
    }

    /// Polar angle of the point about the image center, in radians.
    pub fn polar_angle(&self) -> f64 {
        (self.y - 0.5).atan2(self.x - 0.5)
    }
}

/// Maps an object's center position to a distortion level.
///
/// `BoundaryBox` is the two-level center/edge split: level 0 inside the
/// box (low distortion), level 1 outside. `RadialLevels` discretizes the
/// distance from the center into `levels` uniform bins over
/// `[0, MAX_RADIAL_DISTANCE]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RegionScheme {
    BoundaryBox {
        top_left: NormalizedPoint,
        bottom_right: NormalizedPoint,
    },
    RadialLevels {
        levels: u8,
    },
}

impl RegionScheme {
    pub fn boundary_box(top_left: NormalizedPoint, bottom_right: NormalizedPoint) -> Result<Self> {
        if top_left.x() >= bottom_right.x() || top_left.y() >= bottom_right.y() {
            return Err(Error::invalid(
                "region scheme",
                format!(
                    "boundary box corners not ordered: ({}, {}) vs ({}, {})",
                    top_left.x(),
                    top_left.y(),
                    bottom_right.x(),
                    bottom_right.y()
                ),
            ));
        }
        Ok(RegionScheme::BoundaryBox {
            top_left,
            bottom_right,
        })
    }

    pub fn radial_levels(levels: u8) -> Result<Self> {
        if levels == 0 {
            return Err(Error::invalid("region scheme", "level count must be >= 1"));
        }
        Ok(RegionScheme::RadialLevels { levels })
    }

    /// The center/edge split used throughout: box `(.25,.25)-(.75,.75)`.
    pub fn standard_box() -> Self {
        preset_box(0.25, 0.75)
    }

    /// Number of distinct levels this scheme can assign.
    pub fn level_count(&self) -> u8 {
        match self {
            RegionScheme::BoundaryBox { .. } => 2,
            RegionScheme::RadialLevels { levels } => *levels,
        }
    }

    /// Distortion level for an object centered at `center`.
    ///
    /// Box variant: 0 if the center lies inside the closed box, 1 outside
    /// (points exactly on the box edge count as inside). Radial variant:
    /// `floor(distance / bin_width)` clamped to the last bin.
    pub fn assign_level(&self, center: NormalizedPoint) -> u8 {
        match self {
            RegionScheme::BoundaryBox {
                top_left,
                bottom_right,
            } => {
                let inside = center.x() >= top_left.x()
                    && center.x() <= bottom_right.x()
                    && center.y() >= top_left.y()
                    && center.y() <= bottom_right.y();
                u8::from(!inside)
            }
            RegionScheme::RadialLevels { levels } => {
                let bin = MAX_RADIAL_DISTANCE / f64::from(*levels);
                let raw = (center.radial_distance() / bin).floor();
                (raw as u8).min(levels - 1)
            }
        }
    }

    /// Parses a scheme selector: `standard`, `large`, `small`, or
    /// `levels:N`.
    pub fn parse(spec: &str) -> Result<Self> {
        if let Some((_, scheme)) = region_boundary_presets()
            .into_iter()
            .find(|(name, _)| *name == spec)
        {
            return Ok(scheme);
        }
        if let Some(levels) = spec.strip_prefix("levels:") {
            let levels: u8 = levels.parse().map_err(|_| {
                Error::invalid("region scheme", format!("bad level count in {spec:?}"))
            })?;
            return RegionScheme::radial_levels(levels);
        }
        Err(Error::invalid(
            "region scheme",
            format!("unknown scheme {spec:?}; expected standard, large, small, or levels:N"),
        ))
    }

    /// Selector string that round-trips through [`RegionScheme::parse`].
    pub fn selector(&self) -> String {
        match self {
            RegionScheme::BoundaryBox { top_left, .. } => {
                for (name, scheme) in region_boundary_presets() {
                    if scheme == *self {
                        return name.to_string();
                    }
                }
                // Non-preset boxes have no short selector; describe them.
                format!("box:{},{}", top_left.x(), top_left.y())
            }
            RegionScheme::RadialLevels { levels } => format!("levels:{levels}"),
        }
    }
}

fn preset_box(lo: f64, hi: f64) -> RegionScheme {
    RegionScheme::BoundaryBox {
        top_left: NormalizedPoint::new(lo, lo).expect("preset corner"),
        bottom_right: NormalizedPoint::new(hi, hi).expect("preset corner"),
    }
}

/// The three named center/edge boundary boxes.
pub fn region_boundary_presets() -> Vec<(&'static str, RegionScheme)> {
    vec![
        ("standard", preset_box(0.25, 0.75)),
        ("large", preset_box(0.1, 0.9)),
        ("small", preset_box(0.33, 0.66)),
    ]
}
