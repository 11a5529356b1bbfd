//! Parametric spinning-LiDAR models and scan-pattern ray generation.
//!
//! Elevations are spread uniformly over the beam range, both ends included.
//! Azimuths sit on a regular grid of `points_per_beam` steps anchored at
//! `azimuth_phase` (0 by default). Angles are radians in memory and degrees in
//! the sensor library file.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::{Box3D, Point3, Ray};

#[derive(Debug, thiserror::Error)]
pub enum SensorError {
    #[error("invalid azimuth window [{lo}, {hi}]")]
    InvalidWindow { lo: f64, hi: f64 },
    #[error("invalid sensor `{name}`: {reason}")]
    InvalidSpec { name: String, reason: String },
    #[error("sensor library parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown sensor `{0}`")]
    UnknownSensor(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A LiDAR configuration. Angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub name: String,
    pub beams: u32,
    pub elevation_min: f64,
    pub elevation_max: f64,
    pub points_per_beam: u32,
    pub origin: Point3,
    /// Azimuth of the first column, radians.
    pub azimuth_phase: f64,
}

/// On-disk form of a [`SensorSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorRecord {
    pub name: String,
    pub beams: u32,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub points_per_beam: u32,
    pub origin_xyz_m: [f64; 3],
    #[serde(default, skip_serializing_if = "is_zero")]
    pub azimuth_phase_deg: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl SensorSpec {
    pub fn validate(&self) -> Result<(), SensorError> {
        let bad = |reason: &str| {
            Err(SensorError::InvalidSpec {
                name: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        if self.beams == 0 {
            return bad("beams must be >= 1");
        }
        if self.points_per_beam == 0 {
            return bad("points_per_beam must be >= 1");
        }
        if !(self.elevation_min < self.elevation_max) {
            return bad("elevation_min must be below elevation_max");
        }
        if !self.origin.is_finite() || !self.azimuth_phase.is_finite() {
            return bad("origin and phase must be finite");
        }
        Ok(())
    }

    pub fn from_record(r: &SensorRecord) -> Result<Self, SensorError> {
        let spec = Self {
            name: r.name.clone(),
            beams: r.beams,
            elevation_min: r.elevation_min_deg.to_radians(),
            elevation_max: r.elevation_max_deg.to_radians(),
            points_per_beam: r.points_per_beam,
            origin: r.origin_xyz_m.into(),
            azimuth_phase: r.azimuth_phase_deg.to_radians(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_record(&self) -> SensorRecord {
        SensorRecord {
            name: self.name.clone(),
            beams: self.beams,
            elevation_min_deg: self.elevation_min.to_degrees(),
            elevation_max_deg: self.elevation_max.to_degrees(),
            points_per_beam: self.points_per_beam,
            origin_xyz_m: self.origin.to_array(),
            azimuth_phase_deg: self.azimuth_phase.to_degrees(),
        }
    }

    pub fn with_origin(mut self, origin: Point3) -> Self {
        self.origin = origin;
        self
    }

    /// Elevation of beam `i`, radians.
    pub fn beam_elevation(&self, i: u32) -> f64 {
        if self.beams == 1 {
            return 0.5 * (self.elevation_min + self.elevation_max);
        }
        let step = (self.elevation_max - self.elevation_min) / (self.beams - 1) as f64;
        self.elevation_min + step * i as f64
    }

    pub fn azimuth_step(&self) -> f64 {
        TAU / self.points_per_beam as f64
    }

    /// Azimuth of column `j`, radians.
    pub fn column_azimuth(&self, j: u32) -> f64 {
        self.azimuth_phase + self.azimuth_step() * j as f64
    }
}

/// Angular gate for matching a ray to a point-model point: twice the average
/// angle between neighbouring points of one beam.
pub fn angular_threshold(spec: &SensorSpec) -> f64 {
    2.0 * (TAU / spec.points_per_beam as f64)
}

/// Closed azimuth arc `[lo, hi]`, radians, measured counter-clockwise from +X.
/// `hi` may exceed pi; the arc is interpreted modulo a full turn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AzimuthWindow {
    lo: f64,
    hi: f64,
}

impl AzimuthWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self, SensorError> {
        if !lo.is_finite() || !hi.is_finite() || !(lo < hi) || hi - lo > TAU {
            return Err(SensorError::InvalidWindow { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, azimuth: f64) -> bool {
        (azimuth - self.lo).rem_euclid(TAU) <= self.hi - self.lo
    }

    /// Arc seen from `origin` that covers every corner of `b`, widened by
    /// `margin` on both sides. `None` means the full circle is needed (the
    /// sensor is inside the footprint or the arc would wrap past a full turn).
    pub fn around_box(origin: Point3, b: &Box3D, margin: f64) -> Option<Self> {
        let center_dir = (b.center() - origin).y.atan2((b.center() - origin).x);
        let mut lo = 0.0f64;
        let mut hi = 0.0f64;
        for c in b.corners() {
            let d = c - origin;
            if d.planar_norm() < 1e-9 {
                return None;
            }
            let off = crate::geom::normalize_angle(d.y.atan2(d.x) - center_dir);
            lo = lo.min(off);
            hi = hi.max(off);
        }
        // Corners spanning more than a half turn means the origin is inside or on the footprint.
        if hi - lo >= std::f64::consts::PI {
            return None;
        }
        Self::new(center_dir + lo - margin, center_dir + hi + margin).ok()
    }
}

/// Rays of one sweep plus their grid coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPattern {
    pub rays: Vec<Ray>,
    /// (beam index, azimuth index) per ray.
    pub cells: Vec<(u32, u32)>,
}

impl ScanPattern {
    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }
}

pub fn direction_from_angles(elevation: f64, azimuth: f64) -> Point3 {
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    Point3::new(ce * ca, ce * sa, se)
}

/// Rays of a full sweep, or only the columns whose azimuth falls in `window`.
/// Rays are ordered beam-major.
pub fn generate_scan_rays(spec: &SensorSpec, window: Option<&AzimuthWindow>) -> ScanPattern {
    let columns: Vec<u32> = (0..spec.points_per_beam)
        .filter(|&j| window.is_none_or(|w| w.contains(spec.column_azimuth(j))))
        .collect();
    let n = spec.beams as usize * columns.len();
    let mut rays = Vec::with_capacity(n);
    let mut cells = Vec::with_capacity(n);
    for i in 0..spec.beams {
        let el = spec.beam_elevation(i);
        for &j in &columns {
            let direction = direction_from_angles(el, spec.column_azimuth(j));
            rays.push(Ray {
                origin: spec.origin,
                direction,
            });
            cells.push((i, j));
        }
    }
    ScanPattern { rays, cells }
}

const DEFAULT_LIBRARY: &str = include_str!("../data/sensors.json");

/// The shipped KITTI, Waymo and nuScenes configurations.
pub fn default_sensor_library() -> Vec<SensorSpec> {
    parse_sensor_library(DEFAULT_LIBRARY).expect("bundled sensor library is valid")
}

pub fn default_sensor(name: &str) -> Option<SensorSpec> {
    default_sensor_library()
        .into_iter()
        .find(|s| s.name == name)
}

pub fn find_sensor<'a>(lib: &'a [SensorSpec], name: &str) -> Result<&'a SensorSpec, SensorError> {
    lib.iter()
        .find(|s| s.name == name)
        .ok_or_else(|| SensorError::UnknownSensor(name.to_string()))
}

pub fn parse_sensor_library(text: &str) -> Result<Vec<SensorSpec>, SensorError> {
    let records: Vec<SensorRecord> =
        serde_json::from_str(text).map_err(|e| SensorError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    records.iter().map(SensorSpec::from_record).collect()
}

pub fn load_sensor_library(path: impl AsRef<Path>) -> Result<Vec<SensorSpec>, SensorError> {
    parse_sensor_library(&std::fs::read_to_string(path)?)
}

pub fn write_sensor_library(
    specs: &[SensorSpec],
    path: impl AsRef<Path>,
) -> Result<(), SensorError> {
    let records: Vec<SensorRecord> = specs.iter().map(SensorSpec::to_record).collect();
    let text = serde_json::to_string_pretty(&records).expect("sensor records serialize");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(beams: u32, ppb: u32) -> SensorSpec {
        SensorSpec {
            name: "toy".into(),
            beams,
            elevation_min: (-10f64).to_radians(),
            elevation_max: 10f64.to_radians(),
            points_per_beam: ppb,
            origin: Point3::ZERO,
            azimuth_phase: 0.0,
        }
    }

    #[test]
    fn threshold_values() {
        let kitti = default_sensor("kitti").unwrap();
        let th = angular_threshold(&kitti);
        assert!((th.to_degrees() - 0.39067).abs() < 5e-6);
        assert!((th - 6.8184e-3).abs() < 5e-8);
        let nus = default_sensor("nuscenes").unwrap();
        assert!((angular_threshold(&nus).to_degrees() - 0.92189).abs() < 1e-5);
        assert!((angular_threshold(&nus) - 1.6090e-2).abs() < 5e-7);
        assert!((angular_threshold(&toy(1, 360)).to_degrees() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn small_grid() {
        let p = generate_scan_rays(&toy(2, 4), None);
        assert_eq!(p.len(), 8);
        let mut az: Vec<i64> = p
            .rays
            .iter()
            .map(|r| r.direction.y.atan2(r.direction.x).to_degrees().round() as i64)
            .map(|a| a.rem_euclid(360))
            .collect();
        az.sort();
        az.dedup();
        assert_eq!(az, vec![0, 90, 180, 270]);
        let mut el: Vec<i64> = p
            .rays
            .iter()
            .map(|r| r.direction.z.asin().to_degrees().round() as i64)
            .collect();
        el.dedup();
        assert_eq!(el, vec![-10, 10]);
    }

    #[test]
    fn quadrant_window() {
        let w = AzimuthWindow::new(-0.1, 0.1 + std::f64::consts::FRAC_PI_4).unwrap();
        let p = generate_scan_rays(&toy(3, 4), Some(&w));
        assert_eq!(p.len(), 3);
        assert!(p.cells.iter().all(|c| c.1 == 0));
    }

    #[test]
    fn window_wraps_past_pi() {
        let w = AzimuthWindow::new(3.0, 3.5).unwrap();
        assert!(w.contains(-3.0));
        assert!(!w.contains(0.0));
        assert!(AzimuthWindow::new(1.0, 1.0).is_err());
        assert!(AzimuthWindow::new(0.0, 7.0).is_err());
    }

    #[test]
    fn kitti_full_sweep() {
        let kitti = default_sensor("kitti").unwrap();
        assert_eq!(generate_scan_rays(&kitti, None).len(), 117_952);
    }

    #[test]
    fn shipped_defaults() {
        let lib = default_sensor_library();
        let k = find_sensor(&lib, "kitti").unwrap();
        assert_eq!((k.beams, k.points_per_beam), (64, 1843));
        assert!((k.elevation_min.to_degrees() + 23.6).abs() < 1e-12);
        assert!((k.elevation_max.to_degrees() - 3.2).abs() < 1e-12);
        let w = find_sensor(&lib, "waymo").unwrap();
        assert_eq!((w.beams, w.points_per_beam), (64, 2500));
        assert!((w.elevation_min.to_degrees() + 18.0).abs() < 1e-12);
        assert!((w.elevation_max.to_degrees() - 2.0).abs() < 1e-12);
        let n = find_sensor(&lib, "nuscenes").unwrap();
        assert_eq!((n.beams, n.points_per_beam), (32, 781));
        assert_eq!(k.origin, Point3::new(0.0, 0.0, 1.73));
    }

    #[test]
    fn missing_field_is_named() {
        let text = r#"[
  {"name": "x", "beams": 4, "elevation_min_deg": -1.0,
   "elevation_max_deg": 1.0, "origin_xyz_m": [0, 0, 1]}
]"#;
        match parse_sensor_library(text).unwrap_err() {
            SensorError::Parse { message, line, .. } => {
                assert!(message.contains("points_per_beam"), "{message}");
                assert!(line >= 1);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn inverted_elevation_rejected() {
        let text = r#"[{"name": "x", "beams": 4, "elevation_min_deg": 1.0,
   "elevation_max_deg": -1.0, "points_per_beam": 10, "origin_xyz_m": [0, 0, 1]}]"#;
        assert!(matches!(
            parse_sensor_library(text),
            Err(SensorError::InvalidSpec { .. })
        ));
    }

    #[test]
    fn box_window_covers_corners() {
        let b = Box3D::new(20.0, 5.0, 0.8, 4.0, 1.8, 1.6, 0.4).unwrap();
        let w = AzimuthWindow::around_box(Point3::new(0.0, 0.0, 1.73), &b, 0.0).unwrap();
        for c in b.corners() {
            assert!(w.contains(c.y.atan2(c.x)));
        }
        let inside = Box3D::new(0.0, 0.0, 0.8, 4.0, 1.8, 1.6, 0.0).unwrap();
        assert!(AzimuthWindow::around_box(Point3::ZERO, &inside, 0.0).is_none());
    }
}
