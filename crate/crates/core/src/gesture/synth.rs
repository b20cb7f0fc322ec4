//! Procedural hand skeletons for every gesture class.
//!
//! A hand is posed in a local frame (`fwd` from wrist towards the middle MCP,
//! `side` towards the thumb, `palm` the direction the palm faces) and each
//! finger is a three-segment chain that either curls towards the palm or is
//! aimed along an explicit direction.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{GestureClass, GestureError, HandKeypoints, INDEX_MCP, NUM_KEYPOINTS};
use crate::geometry::{CameraIntrinsics, Point3, RigidTransform};

const FRAME_DT: f64 = 1.0 / 30.0;

const UP: Point3 = Point3::new(0.0, -1.0, 0.0);
const DOWN: Point3 = Point3::new(0.0, 1.0, 0.0);
const AWAY: Point3 = Point3::new(0.0, 0.0, 1.0);
const LEFT: Point3 = Point3::new(-1.0, 0.0, 0.0);
const RIGHT: Point3 = Point3::new(1.0, 0.0, 0.0);

/// Finger geometry at unit hand scale: MCP offset (fwd, side) and segment lengths.
struct FingerGeom {
    mcp: (f64, f64),
    segments: [f64; 3],
}

const FINGERS: [FingerGeom; 4] = [
    FingerGeom {
        mcp: (0.085, 0.025),
        segments: [0.040, 0.025, 0.022],
    },
    FingerGeom {
        mcp: (0.090, 0.0),
        segments: [0.044, 0.027, 0.021],
    },
    FingerGeom {
        mcp: (0.085, -0.020),
        segments: [0.041, 0.026, 0.021],
    },
    FingerGeom {
        mcp: (0.075, -0.038),
        segments: [0.032, 0.019, 0.018],
    },
];
const THUMB_CMC_OFFSET: (f64, f64) = (0.025, 0.030);
const THUMB_SEGMENTS: [f64; 3] = [0.035, 0.032, 0.028];
/// Joint flexion (radians) at full curl for MCP, PIP, DIP.
const CURL_ANGLES: [f64; 3] = [1.45, 1.75, 1.2];

#[derive(Debug, Clone, Copy)]
enum Digit {
    Curl(f64),
    Aim(Point3),
}

/// Orthonormal hand frame.
#[derive(Debug, Clone, Copy)]
struct Frame {
    fwd: Point3,
    side: Point3,
    palm: Point3,
}

impl Frame {
    /// `fwd` exact, `palm` orthogonalized against it, `side` completing the frame.
    fn new(fwd: Point3, palm_hint: Point3, thumb_hint: Point3) -> Self {
        let fwd = fwd.normalized().expect("non-zero forward");
        let mut palm = palm_hint - fwd * palm_hint.dot(fwd);
        if palm.norm() < 1e-6 {
            palm = thumb_hint.cross(fwd);
        }
        let palm = palm.normalized().expect("non-degenerate palm");
        let mut side = fwd.cross(palm);
        if side.dot(thumb_hint) < 0.0 {
            side = -side;
        }
        Frame { fwd, side, palm }
    }

    fn rotated(&self, t: &RigidTransform) -> Self {
        Frame {
            fwd: t.rotate(self.fwd),
            side: t.rotate(self.side),
            palm: t.rotate(self.palm),
        }
    }
}

struct Pose {
    wrist: Point3,
    frame: Frame,
    scale: f64,
    fingers: [Digit; 4],
    thumb: Digit,
    /// Thumb length multiplier, used to land the thumb tip on a target.
    thumb_reach: f64,
}

impl Pose {
    fn new(wrist: Point3, frame: Frame, scale: f64, fingers: [Digit; 4], thumb: Digit) -> Self {
        Pose {
            wrist,
            frame,
            scale,
            fingers,
            thumb,
            thumb_reach: 1.0,
        }
    }

    fn skeleton(&self) -> [Point3; NUM_KEYPOINTS] {
        let f = self.frame;
        let s = self.scale;
        let at = |fwd: f64, side: f64| self.wrist + f.fwd * (fwd * s) + f.side * (side * s);
        let mut pts = [self.wrist; NUM_KEYPOINTS];

        for (i, geom) in FINGERS.iter().enumerate() {
            let base = INDEX_MCP + 4 * i;
            let mcp = at(geom.mcp.0, geom.mcp.1);
            pts[base] = mcp;
            let mut p = mcp;
            let mut angle = 0.0;
            for (k, len) in geom.segments.iter().enumerate() {
                let dir = match self.fingers[i] {
                    Digit::Aim(d) => d,
                    Digit::Curl(c) => {
                        angle += c * CURL_ANGLES[k];
                        f.fwd * angle.cos() + f.palm * angle.sin()
                    }
                };
                p = p + dir * (len * s);
                pts[base + k + 1] = p;
            }
        }

        let cmc = at(THUMB_CMC_OFFSET.0, THUMB_CMC_OFFSET.1);
        pts[1] = cmc;
        let dirs: [Point3; 3] = match self.thumb {
            Digit::Aim(d) => [d; 3],
            Digit::Curl(c) => {
                // extended: splayed out to the side; tucked: folded across the palm
                let open = (f.side * 0.8 + f.fwd * 0.6).normalized().unwrap();
                let tucked = [
                    (f.fwd * 0.7 + f.palm * 0.7).normalized().unwrap(),
                    (f.fwd * 0.3 + f.palm * 0.5 - f.side * 0.8)
                        .normalized()
                        .unwrap(),
                    (-f.side + f.palm * 0.2).normalized().unwrap(),
                ];
                tucked.map(|t| (open * (1.0 - c) + t * c).normalized().unwrap_or(open))
            }
        };
        let mut p = cmc;
        for (k, (len, d)) in THUMB_SEGMENTS.iter().zip(dirs).enumerate() {
            p = p + d * (len * s * self.thumb_reach);
            pts[2 + k] = p;
        }
        pts
    }
}

/// Configurable generator for one gesture sample.
#[derive(Debug, Clone)]
pub struct HandSynth {
    class: GestureClass,
    noise_sigma: f64,
    n_frames: usize,
    seed: u64,
    camera: CameraIntrinsics,
    wrist: Option<Point3>,
    target: Option<Point3>,
    t0: f64,
}

impl HandSynth {
    pub fn new(class: GestureClass) -> Self {
        Self {
            class,
            noise_sigma: 0.0,
            n_frames: 1,
            seed: 0,
            camera: CameraIntrinsics::default(),
            wrist: None,
            target: None,
            t0: 0.0,
        }
    }

    pub fn noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma.max(0.0);
        self
    }

    pub fn frames(mut self, n: usize) -> Self {
        self.n_frames = n.max(1);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn camera(mut self, cam: CameraIntrinsics) -> Self {
        self.camera = cam;
        self
    }

    /// Fixes the wrist position instead of sampling it.
    pub fn wrist(mut self, p: Point3) -> Self {
        self.wrist = Some(p);
        self
    }

    /// For pointing hands: the point the index finger is aimed at.
    pub fn target(mut self, p: Point3) -> Self {
        self.target = Some(p);
        self
    }

    pub fn start_time(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    pub fn generate(&self) -> Result<Vec<HandKeypoints>, GestureError> {
        if self.class == GestureClass::Unknown {
            return Err(GestureError::UnknownClass);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let wrist = self.wrist.unwrap_or_else(|| {
            Point3::new(
                rng.random_range(-0.12..0.12),
                rng.random_range(-0.05..0.12),
                rng.random_range(0.40..0.60),
            )
        });
        let scale = rng.random_range(0.9..1.1);
        let jitter = if self.target.is_some() {
            RigidTransform::identity()
        } else {
            let axis = Point3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            RigidTransform::from_axis_angle(axis, rng.random_range(-0.25..0.25), Point3::ORIGIN)
        };
        let phase0 = rng.random_range(0.0..TAU);
        let curl_jitter: [f64; 5] = std::array::from_fn(|_| rng.random_range(-0.08..0.08));
        let confidence = rng.random_range(0.85..1.0);
        let target = self.target.unwrap_or_else(|| {
            wrist
                + Point3::new(
                    rng.random_range(-0.3..0.3),
                    rng.random_range(0.0..0.3),
                    rng.random_range(0.6..1.2),
                )
        });
        let noise = Normal::new(0.0, self.noise_sigma).expect("sigma is non-negative");

        let mut frames = Vec::with_capacity(self.n_frames);
        for k in 0..self.n_frames {
            let progress = if self.n_frames > 1 {
                k as f64 / (self.n_frames - 1) as f64
            } else {
                1.0
            };
            let phase = phase0 + TAU * k as f64 / self.n_frames.max(8) as f64;
            let mut pose = self.pose(wrist, target, scale, &jitter, progress, phase, &curl_jitter);
            if let Digit::Curl(c) = &mut pose.thumb {
                *c = (*c + curl_jitter[4]).clamp(0.0, 1.0);
            }
            let mut world = pose.skeleton();
            if self.noise_sigma > 0.0 {
                for p in &mut world {
                    *p = *p
                        + Point3::new(
                            noise.sample(&mut rng),
                            noise.sample(&mut rng),
                            noise.sample(&mut rng),
                        );
                }
            }
            frames.push(HandKeypoints::from_world(
                world,
                &self.camera,
                confidence,
                self.t0 + k as f64 * FRAME_DT,
            )?);
        }
        Ok(frames)
    }

    #[allow(clippy::too_many_arguments)]
    fn pose(
        &self,
        wrist: Point3,
        target: Point3,
        scale: f64,
        jitter: &RigidTransform,
        progress: f64,
        phase: f64,
        curl_jitter: &[f64; 5],
    ) -> Pose {
        use GestureClass::*;
        let curl = |c: f64, i: usize| Digit::Curl((c + curl_jitter[i]).clamp(0.0, 1.0));
        let fingers = |c: [f64; 4]| [curl(c[0], 0), curl(c[1], 1), curl(c[2], 2), curl(c[3], 3)];
        let frame = |fwd, palm, thumb| Frame::new(fwd, palm, thumb).rotated(jitter);
        let plain = |wrist, frame, fingers, thumb| Pose::new(wrist, frame, scale, fingers, thumb);

        match self.class {
            Pointing => pointing_pose(wrist, target, scale),
            OpenPalmUp => plain(
                wrist,
                frame(AWAY, UP, LEFT),
                fingers([0.0; 4]),
                Digit::Curl(0.0),
            ),
            OpenPalmOut => plain(
                wrist,
                frame(UP, AWAY, LEFT),
                fingers([0.0; 4]),
                Digit::Curl(0.0),
            ),
            Fist => plain(
                wrist,
                frame(AWAY, DOWN, LEFT),
                fingers([1.0; 4]),
                Digit::Curl(1.0),
            ),
            ThumbsUp | ThumbsDown => {
                let thumb_dir = if self.class == ThumbsUp { UP } else { DOWN };
                let f = frame(
                    AWAY,
                    if self.class == ThumbsUp { LEFT } else { RIGHT },
                    thumb_dir,
                );
                plain(
                    wrist,
                    f,
                    fingers([1.0; 4]),
                    Digit::Aim(jitter.rotate(thumb_dir)),
                )
            }
            Ok | Pinch => {
                let (f, others) = if self.class == Ok {
                    (frame(UP, AWAY, LEFT), 0.0)
                } else {
                    (frame(AWAY, DOWN, LEFT), 1.0)
                };
                let mut pose = plain(
                    wrist,
                    f,
                    fingers([0.5, others, others, others]),
                    Digit::Curl(0.0),
                );
                touch_thumb_to_index(&mut pose);
                pose
            }
            Beckoning => {
                let c = 0.5 - 0.5 * (2.0 * phase).cos();
                let w = wrist + AWAY * (-0.02 * (2.0 * phase).sin());
                plain(w, frame(AWAY, UP, LEFT), fingers([c; 4]), Digit::Curl(0.2))
            }
            CirclingHorizontal | CirclingVertical => {
                let r = 0.06;
                let offset = if self.class == CirclingHorizontal {
                    Point3::new(r * phase.cos(), 0.0, r * phase.sin())
                } else {
                    Point3::new(r * phase.cos(), r * phase.sin(), 0.0)
                };
                // the fingertip traces the circle with the finger roughly normal to its plane
                let f = if self.class == CirclingHorizontal {
                    frame(DOWN, -AWAY, LEFT)
                } else {
                    frame(AWAY, DOWN, LEFT)
                };
                Pose::new(
                    wrist + offset,
                    f,
                    scale,
                    [Digit::Aim(f.fwd), curl(1.0, 1), curl(1.0, 2), curl(1.0, 3)],
                    Digit::Curl(1.0),
                )
            }
            Hammering => {
                let s = (2.0 * phase).sin();
                let swing = RigidTransform::from_axis_angle(LEFT, 0.35 * s, Point3::ORIGIN);
                let f = frame(AWAY, DOWN, LEFT).rotated(&swing);
                plain(
                    wrist + UP * (0.06 * s),
                    f,
                    fingers([1.0; 4]),
                    Digit::Curl(1.0),
                )
            }
            PickUpMotion => plain(
                wrist,
                frame(AWAY, UP, LEFT),
                fingers([progress; 4]),
                Digit::Curl(progress),
            ),
            ReleaseMotion => plain(
                wrist,
                frame(AWAY, DOWN, LEFT),
                fingers([1.0 - progress; 4]),
                Digit::Curl(1.0 - progress),
            ),
            Twisting => {
                let base = frame(AWAY, DOWN, LEFT);
                let roll = RigidTransform::from_axis_angle(
                    base.fwd,
                    (PI / 3.0) * phase.sin(),
                    Point3::ORIGIN,
                );
                let f = base.rotated(&roll);
                let thumb = (f.side * 0.8 + f.fwd * 0.6).normalized().unwrap();
                Pose::new(
                    wrist,
                    f,
                    scale,
                    [Digit::Aim(f.fwd), curl(1.0, 1), curl(1.0, 2), curl(1.0, 3)],
                    Digit::Aim(thumb),
                )
            }
            Unknown => unreachable!("rejected in generate"),
        }
    }
}

/// Index chain collinear from its MCP to `target`, other fingers curled.
fn pointing_pose(wrist: Point3, target: Point3, scale: f64) -> Pose {
    let fwd = (target - wrist).normalized().unwrap_or(AWAY);
    let frame = Frame::new(fwd, DOWN, LEFT);
    let mcp =
        wrist + frame.fwd * (FINGERS[0].mcp.0 * scale) + frame.side * (FINGERS[0].mcp.1 * scale);
    let aim = (target - mcp).normalized().unwrap_or(fwd);
    Pose::new(
        wrist,
        frame,
        scale,
        [
            Digit::Aim(aim),
            Digit::Curl(1.0),
            Digit::Curl(1.0),
            Digit::Curl(1.0),
        ],
        Digit::Curl(1.0),
    )
}

/// Bends the thumb so its tip lands on the index tip.
fn touch_thumb_to_index(pose: &mut Pose) {
    let pts = pose.skeleton();
    let cmc = pts[1];
    let index_tip = pts[8];
    let total: f64 = THUMB_SEGMENTS.iter().sum::<f64>() * pose.scale;
    let dir = (index_tip - cmc).normalized().unwrap_or(pose.frame.fwd);
    pose.thumb_reach = (index_tip - cmc).norm() / total;
    pose.thumb = Digit::Aim(dir);
}

/// Generates `n_frames` keypoint frames of `class` with i.i.d. Gaussian world
/// jitter of `noise_sigma` meters; image coordinates are projections through
/// the default camera.
pub fn synth_gesture(
    class: GestureClass,
    noise_sigma: f64,
    n_frames: usize,
    seed: u64,
) -> Result<Vec<HandKeypoints>, GestureError> {
    HandSynth::new(class)
        .noise(noise_sigma)
        .frames(n_frames)
        .seed(seed)
        .generate()
}
