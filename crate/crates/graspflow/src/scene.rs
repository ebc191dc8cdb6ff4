//! Synthetic scenes: primitive objects on a table, orthographic depth
//! rendering, a rigid-grasp proxy generator, and the deterministic
//! soft-correction oracle that produces the paired training data.
//!
//! Frame: table plane at z = 0, z up, meters. The workspace is a
//! 0.30 m square centered on the origin; the virtual camera plane sits
//! at z = 0.5 m looking straight down.

use crate::encoder::DepthImage;
use crate::error::{Error, Result};
use crate::par;
use crate::pose::{
    hemisphere_align, quat_from_axis_angle, quat_from_yaw, quat_mul, to_vec7, yaw_of, GraspPose,
};
use crate::rng::Rng;

/// Workspace window side length (m).
pub const WORKSPACE: f64 = 0.30;
/// Camera plane height above the table (m); also the background depth.
pub const CAMERA_Z: f64 = 0.5;
/// Rendered depth resolution.
pub const IMG_RES: u32 = 32;
/// Fixed gripper opening width carried as pose metadata (m).
pub const GRIPPER_WIDTH: f64 = 0.08;

/// Grasp depth targets clamp to this band below the object top (m).
pub const DEPTH_MIN: f64 = 0.01;
pub const DEPTH_MAX: f64 = 0.07;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Cylinder { radius: f64, height: f64 },
    Sphere { radius: f64 },
    Box3 { x: f64, y: f64, z: f64 },
    Flat { x: f64, y: f64, thickness: f64 },
}

impl Shape {
    pub fn category(&self) -> &'static str {
        match self {
            Shape::Cylinder { .. } => "cylinder",
            Shape::Sphere { .. } => "sphere",
            Shape::Box3 { .. } => "box",
            Shape::Flat { .. } => "flat",
        }
    }
}

/// One synthetic scene: a primitive at a table position with a yaw.
/// `recess` sinks the object into a shallow depression, lowering its top
/// without changing its footprint (used for the unseen-orientation
/// analog). `seed` records the jitter stream that produced the instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub shape: Shape,
    pub position: [f64; 2],
    pub yaw: f64,
    pub recess: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let dims_ok = match self.shape {
            Shape::Cylinder { radius, height } => radius > 0.0 && height > 0.0,
            Shape::Sphere { radius } => radius > 0.0,
            Shape::Box3 { x, y, z } => x > 0.0 && y > 0.0 && z > 0.0,
            Shape::Flat { x, y, thickness } => {
                x > 0.0 && y > 0.0 && thickness > 0.0 && thickness <= 0.02
            }
        };
        if !dims_ok {
            return Err(Error::Data(format!("invalid shape dimensions: {:?}", self.shape)));
        }
        if self.recess < 0.0 || self.recess >= self.top_height() + self.recess {
            return Err(Error::Data("recess must be in [0, object height)".into()));
        }
        let half = WORKSPACE / 2.0;
        let r = self.footprint_radius();
        for &c in &self.position {
            if c - r < -half || c + r > half {
                return Err(Error::Data(format!(
                    "object at ({}, {}) with footprint radius {r} leaves the workspace",
                    self.position[0], self.position[1]
                )));
            }
        }
        Ok(())
    }

    /// Height of the object's top surface above the table.
    pub fn top_height(&self) -> f64 {
        let raw = match self.shape {
            Shape::Cylinder { height, .. } => height,
            Shape::Sphere { radius } => 2.0 * radius,
            Shape::Box3 { z, .. } => z,
            Shape::Flat { thickness, .. } => thickness,
        };
        raw - self.recess
    }

    /// Circumscribed footprint radius, for workspace checks.
    pub fn footprint_radius(&self) -> f64 {
        match self.shape {
            Shape::Cylinder { radius, .. } | Shape::Sphere { radius } => radius,
            Shape::Box3 { x, y, .. } | Shape::Flat { x, y, .. } => {
                0.5 * (x * x + y * y).sqrt()
            }
        }
    }

    /// Smallest lateral half-extent; the scale for off-center criteria.
    pub fn half_extent_min(&self) -> f64 {
        match self.shape {
            Shape::Cylinder { radius, .. } | Shape::Sphere { radius } => radius,
            Shape::Box3 { x, y, .. } | Shape::Flat { x, y, .. } => 0.5 * x.min(y),
        }
    }

    /// Surface height above the table at workspace point (x, y), or 0 if
    /// the point misses the object.
    fn surface_height(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.position[0];
        let dy = y - self.position[1];
        match self.shape {
            Shape::Cylinder { radius, height } => {
                if dx * dx + dy * dy <= radius * radius {
                    height - self.recess
                } else {
                    0.0
                }
            }
            Shape::Sphere { radius } => {
                let d2 = dx * dx + dy * dy;
                if d2 <= radius * radius {
                    let zc = radius - self.recess;
                    (zc + (radius * radius - d2).sqrt()).max(0.0)
                } else {
                    0.0
                }
            }
            Shape::Box3 { x: ex, y: ey, z } => {
                let (c, s) = (self.yaw.cos(), self.yaw.sin());
                let lx = c * dx + s * dy;
                let ly = -s * dx + c * dy;
                if lx.abs() <= ex / 2.0 && ly.abs() <= ey / 2.0 {
                    z - self.recess
                } else {
                    0.0
                }
            }
            Shape::Flat { x: ex, y: ey, thickness } => {
                let (c, s) = (self.yaw.cos(), self.yaw.sin());
                let lx = c * dx + s * dy;
                let ly = -s * dx + c * dy;
                if lx.abs() <= ex / 2.0 && ly.abs() <= ey / 2.0 {
                    thickness - self.recess
                } else {
                    0.0
                }
            }
        }
    }
}

/// Orthographic top-down render over the workspace window. Pixel value =
/// distance from the camera plane down to the first surface; background
/// (bare table) pixels read `CAMERA_Z`.
/// Sub-pixel supersampling grid. Averaging keeps the image a continuous
/// function of object position, so sub-pixel placement stays recoverable
/// instead of quantizing to the pixel pitch.
const SUPERSAMPLE: usize = 4;

pub fn render_depth(scene: &SceneSpec) -> DepthImage {
    let res = IMG_RES as usize;
    let mut data = Vec::with_capacity(res * res);
    let px = WORKSPACE / res as f64;
    let sub = px / SUPERSAMPLE as f64;
    for row in 0..res {
        let y0 = -WORKSPACE / 2.0 + row as f64 * px;
        for col in 0..res {
            let x0 = -WORKSPACE / 2.0 + col as f64 * px;
            let mut acc = 0.0;
            for sy in 0..SUPERSAMPLE {
                let y = y0 + (sy as f64 + 0.5) * sub;
                for sx in 0..SUPERSAMPLE {
                    let x = x0 + (sx as f64 + 0.5) * sub;
                    acc += CAMERA_Z - scene.surface_height(x, y);
                }
            }
            data.push((acc / (SUPERSAMPLE * SUPERSAMPLE) as f64) as f32);
        }
    }
    DepthImage {
        width: IMG_RES,
        height: IMG_RES,
        data,
    }
}

/// Proxy for an external rigid-gripper grasp synthesizer: shallow,
/// possibly tilted, possibly off-center poses whose noise scales with
/// rank. Rank 1: tilt <= 5 deg, lateral offset <= 0.5 cm; rank 20:
/// tilt <= 30 deg, offset <= 40% of the object's half-extent.
pub fn synth_rigid_grasp(scene: &SceneSpec, rank: u32, rng: &mut Rng) -> Result<GraspPose> {
    if !(1..=20).contains(&rank) {
        return Err(Error::Usage(format!("rank {rank} outside [1, 20]")));
    }
    let frac = (rank - 1) as f64 / 19.0;
    let tilt_max = (5.0 + 25.0 * frac).to_radians();
    let offset_max = 0.005 + (0.4 * scene.half_extent_min() - 0.005).max(0.0) * frac;

    let yaw = rng.range(-std::f64::consts::PI, std::f64::consts::PI);
    let tilt = rng.range(0.0, tilt_max);
    let azimuth = rng.range(0.0, 2.0 * std::f64::consts::PI);
    let depth = rng.range(0.0, 0.01);
    let off_r = rng.range(0.0, offset_max);
    let off_dir = rng.range(0.0, 2.0 * std::f64::consts::PI);

    let q_tilt = quat_from_axis_angle(&[azimuth.cos(), azimuth.sin(), 0.0], tilt);
    let orientation = quat_mul(&q_tilt, &quat_from_yaw(yaw));
    let position = [
        scene.position[0] + off_r * off_dir.cos(),
        scene.position[1] + off_r * off_dir.sin(),
        scene.top_height() - depth,
    ];
    Ok(GraspPose::new(orientation, position, GRIPPER_WIDTH))
}

/// Shape-dependent grasp depth target below the object top, clamped to
/// [DEPTH_MIN, DEPTH_MAX].
pub fn target_depth(scene: &SceneSpec) -> f64 {
    let raw = match scene.shape {
        Shape::Cylinder { height, .. } => 0.7 * height,
        Shape::Sphere { radius } => radius,
        Shape::Box3 { z, .. } => 0.7 * z,
        Shape::Flat { thickness, .. } => thickness + 0.01,
    };
    raw.clamp(DEPTH_MIN, DEPTH_MAX)
}

/// Deterministic rigid-to-soft correction: snap the orientation top-down
/// preserving yaw, re-center laterally on the object, and set the grasp
/// depth to the shape's target. Idempotent.
pub fn correction_oracle(scene: &SceneSpec, g_rigid: &GraspPose) -> GraspPose {
    let yaw = yaw_of(&g_rigid.orientation);
    GraspPose::new(
        quat_from_yaw(yaw),
        [
            scene.position[0],
            scene.position[1],
            scene.top_height() - target_depth(scene),
        ],
        g_rigid.width,
    )
}

/// One paired training record. `depth_offset` is the oracle depth
/// quantized to the nearest centimeter, mirroring the collection
/// protocol's 1 cm increments; the pose itself uses the exact target.
#[derive(Debug, Clone)]
pub struct PairedGrasp {
    pub scene: SceneSpec,
    pub g_rigid: GraspPose,
    pub g_soft: GraspPose,
    pub rank: u32,
    pub depth_offset: f64,
}

/// A named object template that dataset generation jitters per instance.
#[derive(Debug, Clone)]
pub struct SceneTemplate {
    pub name: &'static str,
    pub shape: Shape,
    pub recess: f64,
}

/// The eight training objects.
pub fn seen_templates() -> Vec<SceneTemplate> {
    vec![
        SceneTemplate {
            name: "cylinder_tall",
            shape: Shape::Cylinder {
                radius: 0.028,
                height: 0.12,
            },
            recess: 0.0,
        },
        SceneTemplate {
            name: "cylinder_wide",
            shape: Shape::Cylinder {
                radius: 0.046,
                height: 0.06,
            },
            recess: 0.0,
        },
        SceneTemplate {
            name: "sphere_small",
            shape: Shape::Sphere { radius: 0.026 },
            recess: 0.0,
        },
        SceneTemplate {
            name: "sphere_large",
            shape: Shape::Sphere { radius: 0.042 },
            recess: 0.0,
        },
        SceneTemplate {
            name: "box_tall",
            shape: Shape::Box3 {
                x: 0.040,
                y: 0.042,
                z: 0.085,
            },
            recess: 0.0,
        },
        SceneTemplate {
            name: "box_wide",
            shape: Shape::Box3 {
                x: 0.075,
                y: 0.075,
                z: 0.050,
            },
            recess: 0.0,
        },
        SceneTemplate {
            name: "flat_long",
            shape: Shape::Flat {
                x: 0.10,
                y: 0.06,
                thickness: 0.013,
            },
            recess: 0.0,
        },
        SceneTemplate {
            name: "flat_square",
            shape: Shape::Flat {
                x: 0.075,
                y: 0.09,
                thickness: 0.02,
            },
            recess: 0.0,
        },
    ]
}

/// Held-out templates: dimensions at least 20% away from every seen
/// template's jitter range, plus a sphere resting in a shallow
/// depression (lowered top height).
pub fn unseen_templates() -> Vec<SceneTemplate> {
    vec![
        SceneTemplate {
            name: "cylinder_mid",
            shape: Shape::Cylinder {
                radius: 0.0355,
                height: 0.085,
            },
            recess: 0.0,
        },
        SceneTemplate {
            name: "sphere_mid",
            shape: Shape::Sphere { radius: 0.0335 },
            recess: 0.0,
        },
        SceneTemplate {
            name: "sphere_recessed",
            shape: Shape::Sphere { radius: 0.0335 },
            recess: 0.008,
        },
        SceneTemplate {
            name: "box_mid",
            shape: Shape::Box3 {
                x: 0.055,
                y: 0.056,
                z: 0.066,
            },
            recess: 0.0,
        },
        SceneTemplate {
            name: "flat_mid",
            shape: Shape::Flat {
                x: 0.086,
                y: 0.073,
                thickness: 0.0165,
            },
            recess: 0.0,
        },
    ]
}

/// Dimension jitter fraction used when instancing a template.
pub const DIM_JITTER: f64 = 0.05;
/// Position jitter half-range (m). Objects are presented roughly centered,
/// as in a tabletop collection protocol; the corpus has to cover this
/// placement area densely enough for the flow to interpolate.
pub const POS_JITTER: f64 = 0.03;

/// Instance a template: per-dimension +/-5% scaling, uniform position in
/// a +/-3 cm square, uniform yaw.
pub fn jitter_scene(template: &SceneTemplate, seed: u64, rng: &mut Rng) -> SceneSpec {
    let mut j = |d: f64| d * (1.0 + rng.range(-DIM_JITTER, DIM_JITTER));
    let shape = match template.shape {
        Shape::Cylinder { radius, height } => Shape::Cylinder {
            radius: j(radius),
            height: j(height),
        },
        Shape::Sphere { radius } => Shape::Sphere { radius: j(radius) },
        Shape::Box3 { x, y, z } => Shape::Box3 {
            x: j(x),
            y: j(y),
            z: j(z),
        },
        Shape::Flat { x, y, thickness } => Shape::Flat {
            x: j(x),
            y: j(y),
            thickness: j(thickness).min(0.02),
        },
    };
    SceneSpec {
        shape,
        position: [
            rng.range(-POS_JITTER, POS_JITTER),
            rng.range(-POS_JITTER, POS_JITTER),
        ],
        yaw: rng.range(-std::f64::consts::PI, std::f64::consts::PI),
        recess: template.recess,
        seed,
    }
}

/// Draw a rank mixing high- and low-ranked proxy poses.
fn mixed_rank(i: usize, rng: &mut Rng) -> u32 {
    if i % 2 == 0 {
        1 + rng.index(7) as u32
    } else {
        11 + rng.index(10) as u32
    }
}

/// Number of paired grasps collected on each jittered placement of an
/// object, mirroring a collection session that takes several proposals
/// per placement before moving the object.
pub const GRASPS_PER_INSTANCE: usize = 3;

/// Build the paired dataset and its matched depth-image corpus. Pairs
/// are grouped into scene instances — each jittered placement yields
/// `GRASPS_PER_INSTANCE` rank-graded proposals — and `g_soft` is the
/// correction oracle applied to the proxy pose, hemisphere-aligned to
/// `g_rigid`. Fully determined by (templates, pairs_per_object, seed).
pub fn generate_dataset(
    templates: &[SceneTemplate],
    pairs_per_object: usize,
    seed: u64,
) -> Result<(Vec<PairedGrasp>, Vec<DepthImage>)> {
    if pairs_per_object == 0 {
        return Err(Error::Usage("pairs_per_object must be >= 1".into()));
    }
    let total = templates.len() * pairs_per_object;
    let results: Vec<Result<(PairedGrasp, DepthImage)>> = par::map_indexed(total, |i| {
        let tpl_idx = i / pairs_per_object;
        let template = &templates[tpl_idx];
        let instance = (i % pairs_per_object) / GRASPS_PER_INSTANCE;
        let scene_id = (tpl_idx * pairs_per_object + instance) as u64;
        let mut scene_rng = Rng::derive(seed, 0x5ce0 ^ scene_id);
        let mut rng = Rng::derive(seed, i as u64);
        let scene = jitter_scene(template, seed ^ scene_id, &mut scene_rng);
        scene.validate()?;
        let rank = mixed_rank(i, &mut rng);
        let g_rigid = synth_rigid_grasp(&scene, rank, &mut rng)?;
        let mut g_soft = correction_oracle(&scene, &g_rigid);
        // double-cover hygiene once, at construction
        let aligned = hemisphere_align(&to_vec7(&g_rigid), &to_vec7(&g_soft));
        g_soft.orientation = [aligned.0[0], aligned.0[1], aligned.0[2], aligned.0[3]];
        let depth = scene.top_height() - g_soft.position[2];
        let depth_offset = ((depth * 100.0).round() / 100.0).clamp(0.01, 0.07);
        let img = render_depth(&scene);
        Ok((
            PairedGrasp {
                scene,
                g_rigid,
                g_soft,
                rank,
                depth_offset,
            },
            img,
        ))
    });
    let mut pairs = Vec::with_capacity(total);
    let mut imgs = Vec::with_capacity(total);
    for r in results {
        let (p, img) = r?;
        pairs.push(p);
        imgs.push(img);
    }
    Ok((pairs, imgs))
}
