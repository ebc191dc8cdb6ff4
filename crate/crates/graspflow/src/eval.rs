//! Geometric success oracle and the seen/unseen benchmark protocol.
//!
//! The physical hold test is replaced by pass/fail geometry: tilt from
//! vertical, lateral offset relative to the object's half-extent, and a
//! shape-dependent grasp-depth band. Evaluation draws mid-ranked proxy
//! poses per scene, scores them raw (baseline) and after flow
//! integration (cfm), and aggregates per category and split.

use crate::encoder::AutoencoderNet;
use crate::error::Result;
use crate::ode::{integrate_flow, IntegratorConfig, Trajectory};
use crate::par;
use crate::pose::{quat_rotate, to_vec7, GraspPose};
use crate::rng::Rng;
use crate::scene::{jitter_scene, synth_rigid_grasp, SceneSpec, SceneTemplate, Shape};
use crate::velocity::{NetField, VelocityNet};
use std::io::Write;

#[derive(Debug, Clone, Copy)]
pub struct SuccessCriteria {
    /// Max tilt of the approach axis from vertical (radians).
    pub max_tilt: f64,
    /// Max lateral offset as a fraction of the object's half-extent.
    pub max_offset_frac: f64,
    /// Min grasp depth below the object top for cylinders/boxes (m).
    pub min_depth: f64,
    /// Sphere depth must sit within this band of the equator (m).
    pub sphere_band: f64,
    /// Scale on depth-band upper limits (loosening knob).
    pub depth_max_scale: f64,
    /// Scale on the flat-object minimum depth (loosening knob).
    pub flat_min_scale: f64,
}

impl Default for SuccessCriteria {
    fn default() -> Self {
        SuccessCriteria {
            max_tilt: 10.0f64.to_radians(),
            max_offset_frac: 0.25,
            min_depth: 0.01,
            sphere_band: 0.01,
            depth_max_scale: 1.0,
            flat_min_scale: 1.0,
        }
    }
}

impl SuccessCriteria {
    /// Strictly weaker criteria: anything passing `self` passes this.
    pub fn loosened(&self) -> SuccessCriteria {
        SuccessCriteria {
            max_tilt: self.max_tilt * 2.0,
            max_offset_frac: self.max_offset_frac * 2.0,
            min_depth: self.min_depth / 2.0,
            sphere_band: self.sphere_band * 2.0,
            depth_max_scale: self.depth_max_scale * 2.0,
            flat_min_scale: self.flat_min_scale / 2.0,
        }
    }

    /// Allowed grasp-depth band below the object top.
    pub fn depth_band(&self, scene: &SceneSpec) -> (f64, f64) {
        match scene.shape {
            Shape::Cylinder { height, .. } => (self.min_depth, height * self.depth_max_scale),
            Shape::Box3 { z, .. } => (self.min_depth, z * self.depth_max_scale),
            Shape::Sphere { radius } => {
                (radius - self.sphere_band, radius + self.sphere_band)
            }
            Shape::Flat { thickness, .. } => {
                (thickness * self.flat_min_scale, 0.08 * self.depth_max_scale)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    ExcessivelyTilted,
    OffCenter,
    TooShallow,
    TooDeep,
    IntegrationFailed,
}

impl FailureReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            FailureReason::ExcessivelyTilted => "excessively tilted",
            FailureReason::OffCenter => "off-center",
            FailureReason::TooShallow => "too shallow",
            FailureReason::TooDeep => "too deep",
            FailureReason::IntegrationFailed => "integration failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub success: bool,
    pub reason: Option<FailureReason>,
}

/// Geometric pass/fail with the first violated criterion reported in
/// fixed order: tilt, offset, depth.
pub fn success_oracle(scene: &SceneSpec, pose: &GraspPose, criteria: &SuccessCriteria) -> Verdict {
    let fail = |r| Verdict {
        success: false,
        reason: Some(r),
    };
    // tilt: angle of the rotated z-axis from world vertical
    let axis = quat_rotate(&pose.orientation, &[0.0, 0.0, 1.0]);
    let tilt = axis[2].clamp(-1.0, 1.0).acos();
    if tilt > self_eps_add(criteria.max_tilt) {
        return fail(FailureReason::ExcessivelyTilted);
    }
    // lateral offset from the object center
    let dx = pose.position[0] - scene.position[0];
    let dy = pose.position[1] - scene.position[1];
    let offset = (dx * dx + dy * dy).sqrt();
    if offset > criteria.max_offset_frac * scene.half_extent_min() {
        return fail(FailureReason::OffCenter);
    }
    // grasp depth below the object top
    let depth = scene.top_height() - pose.position[2];
    let (lo, hi) = criteria.depth_band(scene);
    if depth < lo {
        return fail(FailureReason::TooShallow);
    }
    if depth > hi {
        return fail(FailureReason::TooDeep);
    }
    Verdict {
        success: true,
        reason: None,
    }
}

// tolerance on the tilt comparison so endpoint renormalization noise on
// an exactly-vertical pose never flips a verdict
fn self_eps_add(threshold: f64) -> f64 {
    threshold + 1e-12
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Seen,
    Unseen,
}

impl SplitTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitTag::Seen => "seen",
            SplitTag::Unseen => "unseen",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodTag {
    Baseline,
    Cfm,
}

impl MethodTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodTag::Baseline => "baseline",
            MethodTag::Cfm => "cfm",
        }
    }
}

pub const CATEGORIES: [&str; 4] = ["cylinder", "sphere", "box", "flat"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Cell {
    pub trials: usize,
    pub successes: usize,
}

impl Cell {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

/// Success counts per (shape category, split, method).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SuccessTable {
    /// cells[category][split][method]
    pub cells: [[[Cell; 2]; 2]; 4],
}

fn category_index(category: &str) -> usize {
    CATEGORIES
        .iter()
        .position(|&c| c == category)
        .expect("known category")
}

impl SuccessTable {
    pub fn record(&mut self, category: &str, split: SplitTag, method: MethodTag, success: bool) {
        let cell = &mut self.cells[category_index(category)][split as usize][method as usize];
        cell.trials += 1;
        if success {
            cell.successes += 1;
        }
    }

    pub fn cell(&self, category: &str, split: SplitTag, method: MethodTag) -> Cell {
        self.cells[category_index(category)][split as usize][method as usize]
    }

    /// Trial-weighted aggregate over categories.
    pub fn overall(&self, split: SplitTag, method: MethodTag) -> Cell {
        let mut out = Cell::default();
        for c in &self.cells {
            let cell = c[split as usize][method as usize];
            out.trials += cell.trials;
            out.successes += cell.successes;
        }
        out
    }

    pub fn total_trials(&self) -> usize {
        let mut n = 0;
        for c in &self.cells {
            for s in c {
                for m in s {
                    n += m.trials;
                }
            }
        }
        n
    }
}

/// Frozen models plus the integrator used to apply the flow.
pub struct ModelBundle<'a> {
    pub encoder: &'a AutoencoderNet,
    pub net: &'a VelocityNet,
    pub integrator: IntegratorConfig,
}

/// Middle-ranking proxy poses are drawn for the baseline comparison.
pub const MID_RANK_LO: u32 = 8;
pub const MID_RANK_HI: u32 = 13;

struct TrialOutcome {
    category: &'static str,
    baseline: bool,
    cfm: bool,
}

fn run_trial(
    bundle: &ModelBundle<'_>,
    template: &SceneTemplate,
    criteria: &SuccessCriteria,
    seed: u64,
    trial: u64,
) -> Result<TrialOutcome> {
    let mut rng = Rng::derive(seed, trial);
    let scene = jitter_scene(template, seed ^ trial, &mut rng);
    scene.validate()?;
    let rank = MID_RANK_LO + rng.index((MID_RANK_HI - MID_RANK_LO + 1) as usize) as u32;
    let g_rigid = synth_rigid_grasp(&scene, rank, &mut rng)?;
    let baseline = success_oracle(&scene, &g_rigid, criteria).success;
    let img = crate::scene::render_depth(&scene);
    let condition = bundle.encoder.encode(&img)?;
    let field = NetField {
        net: bundle.net,
        condition: &condition,
    };
    // integrator failure counts the trial as a cfm failure
    let cfm = match integrate_flow(&field, &to_vec7(&g_rigid), g_rigid.width, &bundle.integrator) {
        Ok((g_final, _)) => success_oracle(&scene, &g_final, criteria).success,
        Err(_) => false,
    };
    Ok(TrialOutcome {
        category: scene.shape.category(),
        baseline,
        cfm,
    })
}

/// Run `trials` per split across the given template sets and aggregate.
/// Trials are independent with per-trial derived seeds, so they may run
/// in parallel; aggregation is order-independent.
pub fn evaluate(
    bundle: &ModelBundle<'_>,
    seen: &[SceneTemplate],
    unseen: &[SceneTemplate],
    trials_per_split: usize,
    criteria: &SuccessCriteria,
    seed: u64,
) -> Result<SuccessTable> {
    let mut table = SuccessTable::default();
    for (split, templates, salt) in [
        (SplitTag::Seen, seen, 0x5ee5u64),
        (SplitTag::Unseen, unseen, 0x05eeu64),
    ] {
        if templates.is_empty() {
            continue;
        }
        let outcomes: Vec<Result<TrialOutcome>> = par::map_indexed(trials_per_split, |i| {
            let template = &templates[i % templates.len()];
            run_trial(bundle, template, criteria, seed ^ salt, i as u64)
        });
        for o in outcomes {
            let o = o?;
            table.record(o.category, split, MethodTag::Baseline, o.baseline);
            table.record(o.category, split, MethodTag::Cfm, o.cfm);
        }
    }
    Ok(table)
}

/// Line-oriented trajectory export: a header, then one record per
/// accepted step, with a blank line between trajectories.
pub fn export_flow_trajectories(trajs: &[Trajectory], w: &mut dyn Write) -> Result<()> {
    if trajs.is_empty() {
        return Err(crate::error::Error::Usage(
            "no trajectories to export".into(),
        ));
    }
    writeln!(w, "t qw qx qy qz px py pz")?;
    for (k, traj) in trajs.iter().enumerate() {
        if k > 0 {
            writeln!(w)?;
        }
        for (t, y) in &traj.points {
            write!(w, "{t}")?;
            for v in y {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Parse the export format back; the round-trip check for the schema.
pub fn parse_flow_trajectories(text: &str) -> Result<Vec<Vec<(f64, Vec<f64>)>>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| crate::error::Error::Data("empty trajectory file".into()))?;
    if header != "t qw qx qy qz px py pz" {
        return Err(crate::error::Error::Data("bad trajectory header".into()));
    }
    let mut out = vec![Vec::new()];
    for line in lines {
        if line.is_empty() {
            out.push(Vec::new());
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| crate::error::Error::Data(format!("bad float {s:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 8 {
            return Err(crate::error::Error::Data(format!(
                "expected 8 columns, got {}",
                vals.len()
            )));
        }
        out.last_mut().unwrap().push((vals[0], vals[1..].to_vec()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{integrate, FnField, IntegratorConfig};
    use crate::pose::{quat_from_axis_angle, quat_from_yaw, quat_mul};
    use crate::scene::{correction_oracle, GRIPPER_WIDTH};

    fn cylinder_scene() -> SceneSpec {
        SceneSpec {
            shape: Shape::Cylinder {
                radius: 0.03,
                height: 0.10,
            },
            position: [0.0, 0.0],
            yaw: 0.0,
            recess: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn oracle_output_always_passes() {
        let criteria = SuccessCriteria::default();
        let mut rng = Rng::seeded(4);
        for template in crate::scene::seen_templates()
            .iter()
            .chain(crate::scene::unseen_templates().iter())
        {
            for k in 0..20 {
                let scene = jitter_scene(template, k, &mut rng);
                scene.validate().unwrap();
                let g = synth_rigid_grasp(&scene, 1 + (k % 20) as u32, &mut rng).unwrap();
                let fixed = correction_oracle(&scene, &g);
                let v = success_oracle(&scene, &fixed, &criteria);
                assert!(v.success, "{template:?} trial {k}: {:?}", v.reason);
            }
        }
    }

    #[test]
    fn shallow_pose_fails_with_reason() {
        let scene = cylinder_scene();
        let pose = GraspPose::new([1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.10], GRIPPER_WIDTH);
        let v = success_oracle(&scene, &pose, &SuccessCriteria::default());
        assert!(!v.success);
        assert_eq!(v.reason, Some(FailureReason::TooShallow));
        assert_eq!(v.reason.unwrap().as_str(), "too shallow");
    }

    #[test]
    fn tilted_pose_fails_with_reason() {
        let scene = cylinder_scene();
        let q = quat_mul(
            &quat_from_axis_angle(&[1.0, 0.0, 0.0], 25.0f64.to_radians()),
            &quat_from_yaw(0.2),
        );
        let pose = GraspPose::new(q, [0.0, 0.0, 0.05], GRIPPER_WIDTH);
        let v = success_oracle(&scene, &pose, &SuccessCriteria::default());
        assert_eq!(v.reason, Some(FailureReason::ExcessivelyTilted));
    }

    #[test]
    fn reason_order_tilt_before_offset_before_depth() {
        let scene = cylinder_scene();
        // violates all three; tilt must be reported
        let q = quat_from_axis_angle(&[0.0, 1.0, 0.0], 0.5);
        let pose = GraspPose::new(q, [0.05, 0.0, 0.2], GRIPPER_WIDTH);
        let v = success_oracle(&scene, &pose, &SuccessCriteria::default());
        assert_eq!(v.reason, Some(FailureReason::ExcessivelyTilted));
        // violates offset and depth; offset first
        let pose = GraspPose::new([1.0, 0.0, 0.0, 0.0], [0.05, 0.0, 0.2], GRIPPER_WIDTH);
        let v = success_oracle(&scene, &pose, &SuccessCriteria::default());
        assert_eq!(v.reason, Some(FailureReason::OffCenter));
    }

    #[test]
    fn oracle_deterministic() {
        let scene = cylinder_scene();
        let pose = GraspPose::new([1.0, 0.0, 0.0, 0.0], [0.004, 0.0, 0.045], GRIPPER_WIDTH);
        let c = SuccessCriteria::default();
        assert_eq!(
            success_oracle(&scene, &pose, &c),
            success_oracle(&scene, &pose, &c)
        );
    }

    #[test]
    fn loosening_never_converts_success_to_failure() {
        let criteria = SuccessCriteria::default();
        let loose = criteria.loosened();
        let mut rng = Rng::seeded(14);
        let templates = crate::scene::seen_templates();
        for k in 0..400u64 {
            let template = &templates[(k as usize) % templates.len()];
            let scene = jitter_scene(template, k, &mut rng);
            let g = synth_rigid_grasp(&scene, 1 + (k % 20) as u32, &mut rng).unwrap();
            // probe both raw and corrected poses
            for pose in [g, correction_oracle(&scene, &g)] {
                if success_oracle(&scene, &pose, &criteria).success {
                    assert!(success_oracle(&scene, &pose, &loose).success);
                }
            }
        }
    }

    #[test]
    fn table_conservation() {
        let mut table = SuccessTable::default();
        table.record("cylinder", SplitTag::Seen, MethodTag::Cfm, true);
        table.record("sphere", SplitTag::Unseen, MethodTag::Baseline, false);
        table.record("flat", SplitTag::Seen, MethodTag::Cfm, true);
        assert_eq!(table.total_trials(), 3);
        let mut sum = 0;
        for c in CATEGORIES {
            for s in [SplitTag::Seen, SplitTag::Unseen] {
                for m in [MethodTag::Baseline, MethodTag::Cfm] {
                    sum += table.cell(c, s, m).trials;
                }
            }
        }
        assert_eq!(sum, table.total_trials());
    }

    #[test]
    fn trajectory_export_round_trip() {
        let f = FnField {
            dim: 7,
            f: |_, _: &[f64]| vec![0.0, 0.0, 0.0, 0.0, 0.01, 0.0, -0.04],
        };
        let y0 = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let t1 = integrate(&f, &y0, &IntegratorConfig::default()).unwrap();
        let t2 = integrate(&f, &[1.0, 0.0, 0.0, 0.0, 0.1, 0.0, 0.0], &IntegratorConfig::default())
            .unwrap();
        let mut buf = Vec::new();
        export_flow_trajectories(&[t1.clone(), t2.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let parsed = parse_flow_trajectories(&text).unwrap();
        assert_eq!(parsed.len(), 2);
        for (orig, back) in [(&t1, &parsed[0]), (&t2, &parsed[1])] {
            assert_eq!(orig.points.len(), back.len());
            assert_eq!(back[0].0, 0.0);
            for (a, b) in orig.points.iter().zip(back) {
                assert_eq!(a.0, b.0);
                assert_eq!(a.1, b.1);
            }
        }
        // constant field: positions move linearly in t
        for w in parsed[0].windows(2) {
            let (t0, p0) = &w[0];
            let (t1v, p1) = &w[1];
            let slope = (p1[6] - p0[6]) / (t1v - t0);
            assert!((slope - (-0.04)).abs() < 1e-9);
        }
    }

    #[test]
    fn export_rejects_empty() {
        let mut buf = Vec::new();
        assert!(export_flow_trajectories(&[], &mut buf).is_err());
    }
}
