//! 7-DOF grasp pose representation and the linear flow path.
//!
//! A pose is a unit quaternion (w,x,y,z) plus a 3D position in the table
//! frame (z up, table plane at z = 0, meters). For the flow the pose is
//! flattened to a raw 7-vector `[qw,qx,qy,qz,px,py,pz]`; interpolation and
//! velocities operate componentwise on that vector, and the quaternion is
//! renormalized only when converting back to a [`GraspPose`].

use crate::error::{Error, Result};

/// Unit quaternion as (w, x, y, z).
pub type Quat = [f64; 4];

pub fn quat_norm(q: &Quat) -> f64 {
    (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt()
}

pub fn quat_normalize(q: &Quat) -> Quat {
    let n = quat_norm(q);
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

pub fn quat_dot(a: &Quat, b: &Quat) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Hamilton product a ⊗ b.
pub fn quat_mul(a: &Quat, b: &Quat) -> Quat {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

pub fn quat_from_axis_angle(axis: &[f64; 3], angle: f64) -> Quat {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let (s, c) = ((angle / 2.0).sin(), (angle / 2.0).cos());
    [c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n]
}

/// Rotation about world z by `yaw`.
pub fn quat_from_yaw(yaw: f64) -> Quat {
    [(yaw / 2.0).cos(), 0.0, 0.0, (yaw / 2.0).sin()]
}

/// Rotate a 3-vector by a unit quaternion.
pub fn quat_rotate(q: &Quat, v: &[f64; 3]) -> [f64; 3] {
    let p = [0.0, v[0], v[1], v[2]];
    let qc = [q[0], -q[1], -q[2], -q[3]];
    let r = quat_mul(&quat_mul(q, &p), &qc);
    [r[1], r[2], r[3]]
}

/// Yaw angle of the rotation, ZYX convention: atan2(R10, R00).
pub fn yaw_of(q: &Quat) -> f64 {
    // swing–twist decomposition: the twist about the world z-axis. With
    // this convention, snapping a pose top-down while preserving yaw is
    // exactly "zero the x/y quaternion components and renormalize".
    2.0 * q[3].atan2(q[0])
}

/// Grasp pose: orientation + gripper center position + fixed opening
/// width. Width is metadata and never touched by flow operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspPose {
    pub orientation: Quat,
    pub position: [f64; 3],
    pub width: f64,
}

impl GraspPose {
    /// Construct with quaternion normalization.
    pub fn new(orientation: Quat, position: [f64; 3], width: f64) -> Self {
        GraspPose {
            orientation: quat_normalize(&orientation),
            position,
            width,
        }
    }

    pub fn identity() -> Self {
        GraspPose {
            orientation: [1.0, 0.0, 0.0, 0.0],
            position: [0.0; 3],
            width: 0.0,
        }
    }
}

/// Raw 7-vector `[qw,qx,qy,qz,px,py,pz]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseVec7(pub [f64; 7]);

/// Componentwise velocity in the same 7-vector layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Velocity7(pub [f64; 7]);

impl Velocity7 {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Flatten a pose to the raw 7-vector. Lossless.
pub fn to_vec7(pose: &GraspPose) -> PoseVec7 {
    let q = pose.orientation;
    let p = pose.position;
    PoseVec7([q[0], q[1], q[2], q[3], p[0], p[1], p[2]])
}

/// Rebuild a pose from a raw 7-vector, renormalizing the quaternion
/// block. `width` is supplied by the caller (the flow never changes it).
pub fn from_vec7(v: &PoseVec7, width: f64) -> GraspPose {
    let q = quat_normalize(&[v.0[0], v.0[1], v.0[2], v.0[3]]);
    GraspPose {
        orientation: q,
        position: [v.0[4], v.0[5], v.0[6]],
        width,
    }
}

/// Flip the quaternion block of `g1` onto the hemisphere of `g0`.
/// Position is untouched. Idempotent.
pub fn hemisphere_align(g0: &PoseVec7, g1: &PoseVec7) -> PoseVec7 {
    let dot = g0.0[0] * g1.0[0] + g0.0[1] * g1.0[1] + g0.0[2] * g1.0[2] + g0.0[3] * g1.0[3];
    if dot < 0.0 {
        PoseVec7([
            -g1.0[0], -g1.0[1], -g1.0[2], -g1.0[3], g1.0[4], g1.0[5], g1.0[6],
        ])
    } else {
        *g1
    }
}

/// Straight-line interpolation (1−t)·g0 + t·g1 on the raw 7-vector.
/// The quaternion block is deliberately not renormalized; the flow is
/// defined on raw coordinates.
pub fn interpolate_pose(g0: &PoseVec7, g1: &PoseVec7, t: f64) -> Result<PoseVec7> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Usage(format!("progression t={t} outside [0,1]")));
    }
    if t == 0.0 {
        return Ok(*g0);
    }
    if t == 1.0 {
        return Ok(*g1);
    }
    let mut out = [0.0; 7];
    for i in 0..7 {
        out[i] = (1.0 - t) * g0.0[i] + t * g1.0[i];
    }
    Ok(PoseVec7(out))
}

/// Constant target velocity g1 − g0 of the straight path.
pub fn target_velocity(g0: &PoseVec7, g1: &PoseVec7) -> Velocity7 {
    let mut out = [0.0; 7];
    for i in 0..7 {
        out[i] = g1.0[i] - g0.0[i];
    }
    Velocity7(out)
}

/// Orientation/position gap between two poses: angle in radians
/// (double-cover invariant) and Euclidean position distance in meters.
pub fn pose_error(a: &GraspPose, b: &GraspPose) -> (f64, f64) {
    let dot = quat_dot(&a.orientation, &b.orientation).abs().clamp(0.0, 1.0);
    let angle = 2.0 * dot.acos();
    let d = [
        a.position[0] - b.position[0],
        a.position[1] - b.position[1],
        a.position[2] - b.position[2],
    ];
    let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    (angle, dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn to_vec7_identity() {
        let p = GraspPose::identity();
        assert_eq!(to_vec7(&p).0, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn to_vec7_layout() {
        let p = GraspPose::new([1.0, 0.0, 0.0, 0.0], [0.1, 0.2, 0.3], 0.08);
        assert_eq!(to_vec7(&p).0, [1.0, 0.0, 0.0, 0.0, 0.1, 0.2, 0.3]);
    }

    #[test]
    fn to_vec7_ninety_degree_z() {
        let p = GraspPose::new(
            quat_from_yaw(std::f64::consts::FRAC_PI_2),
            [0.0, 0.0, 0.0],
            0.0,
        );
        let v = to_vec7(&p).0;
        assert!((v[0] - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((v[3] - FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(&v[1..3], &[0.0, 0.0]);
        assert_eq!(&v[4..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn vec7_round_trip() {
        let p = GraspPose::new([0.3, -0.5, 0.4, 0.7], [0.05, -0.02, 0.11], 0.08);
        let back = from_vec7(&to_vec7(&p), p.width);
        let (ang, dist) = pose_error(&p, &back);
        assert!(ang < 1e-12 && dist == 0.0);
        assert!((quat_norm(&back.orientation) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hemisphere_align_cases() {
        let id = PoseVec7([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(hemisphere_align(&id, &id), id);

        let anti = PoseVec7([-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(hemisphere_align(&id, &anti).0[0], 1.0);

        let q0 = PoseVec7([FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2, 0.0, 0.0, 0.0]);
        let q1 = PoseVec7([-FRAC_1_SQRT_2, 0.0, 0.0, -FRAC_1_SQRT_2, 0.1, 0.0, 0.0]);
        let aligned = hemisphere_align(&q0, &q1);
        assert!(aligned.0[0] > 0.0 && aligned.0[3] > 0.0);
        assert_eq!(aligned.0[4], 0.1); // position untouched
    }

    #[test]
    fn hemisphere_align_idempotent() {
        let q0 = PoseVec7([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let q1 = PoseVec7([-0.6, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let once = hemisphere_align(&q0, &q1);
        assert_eq!(hemisphere_align(&q0, &once), once);
    }

    #[test]
    fn interpolate_endpoints_exact() {
        let g0 = PoseVec7([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let g1 = PoseVec7([0.9, 0.1, -0.2, 0.3, 0.01, -0.02, -0.06]);
        assert_eq!(interpolate_pose(&g0, &g1, 0.0).unwrap(), g0);
        assert_eq!(interpolate_pose(&g0, &g1, 1.0).unwrap(), g1);
    }

    #[test]
    fn interpolate_midpoint() {
        let g0 = PoseVec7([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let g1 = PoseVec7([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.06]);
        let mid = interpolate_pose(&g0, &g1, 0.5).unwrap();
        assert!((mid.0[6] - (-0.03)).abs() < 1e-15);
    }

    #[test]
    fn interpolate_rejects_out_of_range() {
        let g = PoseVec7([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(interpolate_pose(&g, &g, -0.1).is_err());
        assert!(interpolate_pose(&g, &g, 1.1).is_err());
    }

    #[test]
    fn target_velocity_cases() {
        let g0 = PoseVec7([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(target_velocity(&g0, &g0).0, [0.0; 7]);

        let g1 = PoseVec7([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.04]);
        assert_eq!(
            target_velocity(&g0, &g1).0,
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.04]
        );
    }

    #[test]
    fn straight_path_identity() {
        let g0 = PoseVec7([0.9, 0.1, -0.2, 0.3, 0.02, 0.03, 0.1]);
        let g1 = PoseVec7([0.8, 0.0, 0.1, 0.5, -0.01, 0.07, 0.04]);
        let u = target_velocity(&g0, &g1);
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let gt = interpolate_pose(&g0, &g1, t).unwrap();
            for i in 0..7 {
                let reconstructed = gt.0[i] + (1.0 - t) * u.0[i];
                assert!((reconstructed - g1.0[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pose_error_cases() {
        let a = GraspPose::new([1.0, 0.0, 0.0, 0.0], [0.0; 3], 0.0);
        let (ang, dist) = pose_error(&a, &a);
        assert_eq!((ang, dist), (0.0, 0.0));

        // Double cover: q and -q are the same rotation.
        let b = GraspPose {
            orientation: [-1.0, 0.0, 0.0, 0.0],
            position: [0.0; 3],
            width: 0.0,
        };
        let (ang, dist) = pose_error(&a, &b);
        assert!(ang < 1e-12 && dist == 0.0);

        let c = GraspPose::new(
            quat_from_yaw(std::f64::consts::FRAC_PI_2),
            [0.05, 0.0, 0.0],
            0.0,
        );
        let (ang, dist) = pose_error(&a, &c);
        assert!((ang - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        assert!((dist - 0.05).abs() < 1e-12);
    }

    #[test]
    fn yaw_round_trip() {
        for k in -6..=6 {
            let yaw = k as f64 * 0.5;
            let q = quat_from_yaw(yaw);
            let wrapped = (yaw + std::f64::consts::PI)
                .rem_euclid(2.0 * std::f64::consts::PI)
                - std::f64::consts::PI;
            assert!((yaw_of(&q) - wrapped).abs() < 1e-12);
        }
    }
}
