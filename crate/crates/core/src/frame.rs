use serde::{Deserialize, Serialize};

use crate::geom::Point3;

/// One LiDAR sweep. Intensities are parallel to `points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub id: String,
    pub sensor_id: String,
    pub points: Vec<Point3>,
    pub intensities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrameError {
    #[error("{points} points but {intensities} intensities")]
    LengthMismatch { points: usize, intensities: usize },
    #[error("point {0} is not finite")]
    NonFinite(usize),
}

impl Frame {
    pub fn new(
        id: impl Into<String>,
        points: Vec<Point3>,
        intensities: Vec<f64>,
    ) -> Result<Self, FrameError> {
        let f = Self {
            id: id.into(),
            sensor_id: String::new(),
            points,
            intensities,
        };
        f.check()?;
        Ok(f)
    }

    pub fn empty(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            sensor_id: String::new(),
            points: Vec::new(),
            intensities: Vec::new(),
        }
    }

    pub fn with_sensor(mut self, sensor_id: impl Into<String>) -> Self {
        self.sensor_id = sensor_id.into();
        self
    }

    pub fn check(&self) -> Result<(), FrameError> {
        if self.points.len() != self.intensities.len() {
            return Err(FrameError::LengthMismatch {
                points: self.points.len(),
                intensities: self.intensities.len(),
            });
        }
        let bad = self
            .points
            .iter()
            .zip(&self.intensities)
            .position(|(p, i)| !p.is_finite() || !i.is_finite());
        match bad {
            Some(i) => Err(FrameError::NonFinite(i)),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, p: Point3, intensity: f64) {
        self.points.push(p);
        self.intensities.push(intensity);
    }
}
