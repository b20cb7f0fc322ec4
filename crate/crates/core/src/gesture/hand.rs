use serde::{Deserialize, Serialize};

use super::GestureError;
use crate::geometry::{project, CameraIntrinsics, Pixel, Point3};

pub const NUM_KEYPOINTS: usize = 21;

pub const WRIST: usize = 0;
pub const THUMB_CMC: usize = 1;
pub const THUMB_MCP: usize = 2;
pub const THUMB_IP: usize = 3;
pub const THUMB_TIP: usize = 4;
pub const INDEX_MCP: usize = 5;
pub const INDEX_PIP: usize = 6;
pub const INDEX_DIP: usize = 7;
pub const INDEX_TIP: usize = 8;
pub const MIDDLE_MCP: usize = 9;
pub const MIDDLE_TIP: usize = 12;
pub const RING_MCP: usize = 13;
pub const RING_TIP: usize = 16;
pub const PINKY_MCP: usize = 17;
pub const PINKY_TIP: usize = 20;

/// Palm keypoints: wrist plus the four finger MCPs.
pub const PALM: [usize; 5] = [WRIST, INDEX_MCP, MIDDLE_MCP, RING_MCP, PINKY_MCP];

/// A 21-point hand skeleton. World coordinates are meters in the camera frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHand")]
pub struct HandKeypoints {
    pub image: [Pixel; NUM_KEYPOINTS],
    pub world: [Point3; NUM_KEYPOINTS],
    pub confidence: f64,
    #[serde(rename = "t")]
    pub timestamp: f64,
}

#[derive(Deserialize)]
struct RawHand {
    image: Vec<Pixel>,
    world: Vec<Point3>,
    confidence: f64,
    t: f64,
}

impl TryFrom<RawHand> for HandKeypoints {
    type Error = GestureError;

    fn try_from(raw: RawHand) -> Result<Self, Self::Error> {
        let image: [Pixel; NUM_KEYPOINTS] = raw.image.try_into().map_err(|v: Vec<Pixel>| {
            GestureError::InvalidHand(format!("expected 21 image keypoints, got {}", v.len()))
        })?;
        let world: [Point3; NUM_KEYPOINTS] = raw.world.try_into().map_err(|v: Vec<Point3>| {
            GestureError::InvalidHand(format!("expected 21 world keypoints, got {}", v.len()))
        })?;
        if !(0.0..=1.0).contains(&raw.confidence) {
            return Err(GestureError::InvalidHand(format!(
                "confidence {} outside [0, 1]",
                raw.confidence
            )));
        }
        if !raw.t.is_finite()
            || world.iter().any(|p| !p.is_finite())
            || image.iter().any(|p| !(p.u.is_finite() && p.v.is_finite()))
        {
            return Err(GestureError::InvalidHand("non-finite coordinate".into()));
        }
        Ok(HandKeypoints {
            image,
            world,
            confidence: raw.confidence,
            timestamp: raw.t,
        })
    }
}

impl HandKeypoints {
    /// Builds a hand from world keypoints, projecting them through `cam`.
    pub fn from_world(
        world: [Point3; NUM_KEYPOINTS],
        cam: &CameraIntrinsics,
        confidence: f64,
        timestamp: f64,
    ) -> Result<Self, GestureError> {
        let mut image = [Pixel::default(); NUM_KEYPOINTS];
        for (px, p) in image.iter_mut().zip(&world) {
            *px = project(*p, cam)?;
        }
        Ok(Self {
            image,
            world,
            confidence: confidence.clamp(0.0, 1.0),
            timestamp,
        })
    }

    /// Every keypoint at `p`, image coordinates zero.
    pub fn collapsed(p: Point3, confidence: f64) -> Self {
        Self {
            image: [Pixel::default(); NUM_KEYPOINTS],
            world: [p; NUM_KEYPOINTS],
            confidence,
            timestamp: 0.0,
        }
    }

    pub fn with_timestamp(mut self, t: f64) -> Self {
        self.timestamp = t;
        self
    }

    /// Applies `f` to every world keypoint and re-projects.
    pub fn map_world(
        &self,
        cam: &CameraIntrinsics,
        f: impl Fn(Point3) -> Point3,
    ) -> Result<Self, GestureError> {
        HandKeypoints::from_world(self.world.map(f), cam, self.confidence, self.timestamp)
    }
}
