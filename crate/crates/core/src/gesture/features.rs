use std::ops::Deref;

use super::{HandKeypoints, MIDDLE_MCP, NUM_KEYPOINTS, WRIST};
use crate::geometry::CameraIntrinsics;

/// 21 x 2 image + 21 x 3 world + confidence.
pub const FEATURE_LEN: usize = NUM_KEYPOINTS * 2 + NUM_KEYPOINTS * 3 + 1;
const WORLD_OFFSET: usize = NUM_KEYPOINTS * 2;

/// Classifier input for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// The wrist-relative, scale-normalized world block.
    pub fn world_block(&self) -> &[f64] {
        &self.0[WORLD_OFFSET..WORLD_OFFSET + NUM_KEYPOINTS * 3]
    }

    pub fn image_block(&self) -> &[f64] {
        &self.0[..WORLD_OFFSET]
    }

    pub fn confidence(&self) -> f64 {
        self.0[FEATURE_LEN - 1]
    }
}

impl Deref for FeatureVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Image coordinates divided by the image size, world coordinates relative to
/// the wrist and divided by the wrist to middle-MCP distance, then the
/// detection confidence.
pub fn extract_features(frame: &HandKeypoints, cam: &CameraIntrinsics) -> FeatureVector {
    let mut out = Vec::with_capacity(FEATURE_LEN);
    let (w, h) = (f64::from(cam.width()), f64::from(cam.height()));
    for px in &frame.image {
        out.push(px.u / w);
        out.push(px.v / h);
    }
    let wrist = frame.world[WRIST];
    let scale = frame.world[MIDDLE_MCP].distance(wrist);
    // a collapsed hand has no scale; its relative coordinates are all zero anyway
    let inv = if scale > 1e-9 { 1.0 / scale } else { 1.0 };
    for p in &frame.world {
        let r = (*p - wrist) * inv;
        out.extend([r.x, r.y, r.z]);
    }
    out.push(frame.confidence);
    debug_assert_eq!(out.len(), FEATURE_LEN);
    FeatureVector(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use crate::gesture::{
        synth_gesture, GestureClass, HandSynth, INDEX_TIP, MIDDLE_TIP, PINKY_TIP, RING_TIP,
    };

    #[test]
    fn length_and_layout() {
        assert_eq!(FEATURE_LEN, 106);
        let hand = &synth_gesture(GestureClass::Fist, 0.0, 1, 3).unwrap()[0];
        let f = extract_features(hand, &CameraIntrinsics::default());
        assert_eq!(f.len(), 106);
        assert!(f.iter().all(|v| v.is_finite()));
        assert_eq!(f.confidence(), hand.confidence);
        assert_eq!(&f.world_block()[..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn translation_leaves_world_block_unchanged() {
        let cam = CameraIntrinsics::default();
        let hand = &synth_gesture(GestureClass::OpenPalmUp, 0.002, 1, 9).unwrap()[0];
        let moved = hand
            .map_world(&cam, |p| p + Point3::new(0.05, -0.02, 0.3))
            .unwrap();
        let (a, b) = (extract_features(hand, &cam), extract_features(&moved, &cam));
        for (x, y) in a.world_block().iter().zip(b.world_block()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn collapsed_hand_has_zero_pose_block() {
        let hand = HandKeypoints::collapsed(Point3::new(0.1, 0.2, 0.5), 0.42);
        let f = extract_features(&hand, &CameraIntrinsics::default());
        assert!(f.world_block().iter().all(|v| *v == 0.0));
        assert_eq!(f.confidence(), 0.42);
    }

    #[test]
    fn pointing_index_extension_exceeds_curled_fingers() {
        let cam = CameraIntrinsics::default();
        for seed in 0..20 {
            let hand = &HandSynth::new(GestureClass::Pointing)
                .seed(seed)
                .generate()
                .unwrap()[0];
            let f = extract_features(hand, &cam);
            let reach = |k: usize| {
                let b = f.world_block();
                (b[3 * k].powi(2) + b[3 * k + 1].powi(2) + b[3 * k + 2].powi(2)).sqrt()
            };
            for curled in [MIDDLE_TIP, RING_TIP, PINKY_TIP] {
                assert!(
                    reach(INDEX_TIP) > reach(curled),
                    "seed {seed}: index {} vs {}",
                    reach(INDEX_TIP),
                    reach(curled)
                );
            }
        }
    }
}
