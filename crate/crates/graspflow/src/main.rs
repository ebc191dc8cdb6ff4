//! Command-line front end: dataset generation, training, inference,
//! evaluation, and trajectory export over a shared output directory.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use graspflow::config::RunConfig;
use graspflow::encoder::{AutoencoderNet, DepthImage};
use graspflow::error::{Error, Result};
use graspflow::eval::{evaluate, success_oracle, ModelBundle, SuccessCriteria};
use graspflow::ode::integrate_flow;
use graspflow::persist::{
    format_kv, format_loss_history, format_report, format_report_tsv, load_checkpoint,
    load_dataset, load_depth_image, parse_kv, save_checkpoint, save_dataset, save_depth_image,
    CkptKind,
};
use graspflow::pose::{to_vec7, GraspPose};
use graspflow::scene::{
    generate_dataset, render_depth, seen_templates, unseen_templates, PairedGrasp, SceneSpec,
    Shape, GRIPPER_WIDTH,
};
use graspflow::pipeline::train_models;
use graspflow::velocity::{NetField, VelocityNet};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "graspflow", version, about = "grasp pose correction via learned flows")]
struct Cli {
    /// Master seed; overrides the config file value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for all artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the paired grasp dataset and depth images.
    GenData,
    /// Train the condition encoder and the velocity network.
    Train {
        /// Directory holding dataset.txt and images/ (default: --out).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Correct a single pose for a described scene.
    Infer {
        /// Pose as 7 comma-separated values: qw,qx,qy,qz,px,py,pz.
        #[arg(long)]
        pose: String,
        /// Scene, e.g. "cylinder:radius=0.03,height=0.1,x=0.02,yaw=0.4".
        #[arg(long)]
        scene: String,
        /// Optional path for the integration trajectory.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Directory holding the checkpoints (default: --out).
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Benchmark baseline vs corrected poses on seen and unseen objects.
    Eval {
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Export integration trajectories for dataset pairs.
    ExportFlow {
        /// Number of trajectories.
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let help = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            std::process::exit(if help { 0 } else { 1 });
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cli.out)?;
    cfg.save(&cli.out.join("run_config.txt"))?;

    match cli.cmd {
        Cmd::GenData => gen_data(&cfg, &cli.out),
        Cmd::Train { data } => train(&cfg, data.as_deref().unwrap_or(&cli.out), &cli.out),
        Cmd::Infer {
            pose,
            scene,
            trajectory,
            models,
        } => infer(
            &cfg,
            &pose,
            &scene,
            trajectory.as_deref(),
            models.as_deref().unwrap_or(&cli.out),
        ),
        Cmd::Eval { models } => eval(&cfg, models.as_deref().unwrap_or(&cli.out), &cli.out),
        Cmd::ExportFlow {
            count,
            models,
            data,
        } => export_flow(
            &cfg,
            count,
            models.as_deref().unwrap_or(&cli.out),
            data.as_deref().unwrap_or(&cli.out),
            &cli.out,
        ),
    }
}

fn image_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("pair_{index:05}.dimg"))
}

fn gen_data(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (pairs, images) = generate_dataset(&seen_templates(), cfg.pairs_per_object, cfg.seed)?;
    save_dataset(&pairs, &out.join("dataset.txt"))?;
    let img_dir = out.join("images");
    std::fs::create_dir_all(&img_dir)?;
    for (i, img) in images.iter().enumerate() {
        save_depth_image(img, &image_path(&img_dir, i))?;
    }
    println!(
        "wrote {} pairs across {} objects to {}",
        pairs.len(),
        seen_templates().len(),
        out.display()
    );
    Ok(())
}

/// Load the corpus images for the dataset, preferring saved files and
/// re-rendering from the stored scene spec when a file is missing.
fn load_corpus(pairs: &[PairedGrasp], data: &Path) -> Result<Vec<DepthImage>> {
    let img_dir = data.join("images");
    (0..pairs.len())
        .map(|i| {
            let path = image_path(&img_dir, i);
            if path.exists() {
                load_depth_image(&path)
            } else {
                Ok(render_depth(&pairs[i].scene))
            }
        })
        .collect()
}

fn base_metadata(cfg: &RunConfig) -> BTreeMap<String, String> {
    let mut m = cfg.to_kv();
    m.insert("format".into(), "graspflow".into());
    m
}

fn train(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let pairs = load_dataset(&data.join("dataset.txt"))?;
    if pairs.is_empty() {
        return Err(Error::Data("dataset holds no pairs".into()));
    }
    let corpus = load_corpus(&pairs, data)?;
    let models = train_models(cfg, &pairs, &corpus)?;

    let recon = models.ae_history.last().copied().unwrap_or(f64::NAN);
    let mut meta = base_metadata(cfg);
    meta.insert("final_recon_mse".into(), recon.to_string());
    save_checkpoint(CkptKind::Autoencoder, &models.encoder.mlp, &meta, &out.join("autoencoder.ckpt"))?;

    let report = &models.report;
    let train_loss = report.train_losses.last().copied().unwrap_or(f64::NAN);
    let val_loss = report.val_losses.last().copied().unwrap_or(f64::NAN);
    let mut meta = base_metadata(cfg);
    meta.insert("final_train_loss".into(), train_loss.to_string());
    meta.insert("final_val_loss".into(), val_loss.to_string());
    save_checkpoint(CkptKind::Velocity, &models.net.mlp, &meta, &out.join("velocity.ckpt"))?;
    std::fs::write(
        out.join("loss_history.tsv"),
        format_loss_history(&report.train_losses, &report.val_losses),
    )?;
    println!(
        "trained on {} pairs: recon mse {recon:.3e}, cfm train loss {train_loss:.3e}, val loss {val_loss:.3e}",
        pairs.len(),
    );
    Ok(())
}

fn load_models(models: &Path) -> Result<(AutoencoderNet, VelocityNet)> {
    let ae = load_checkpoint(&models.join("autoencoder.ckpt"))?;
    if ae.kind != CkptKind::Autoencoder {
        return Err(Error::Data("autoencoder.ckpt holds the wrong model kind".into()));
    }
    let vel = load_checkpoint(&models.join("velocity.ckpt"))?;
    if vel.kind != CkptKind::Velocity {
        return Err(Error::Data("velocity.ckpt holds the wrong model kind".into()));
    }
    Ok((AutoencoderNet::from_mlp(ae.mlp)?, VelocityNet::from_mlp(vel.mlp)?))
}

fn parse_pose_arg(s: &str) -> Result<GraspPose> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("bad pose component {t:?}")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != 7 {
        return Err(Error::Usage(format!(
            "pose needs 7 components, got {}",
            vals.len()
        )));
    }
    let q = [vals[0], vals[1], vals[2], vals[3]];
    if (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt() < 1e-9 {
        return Err(Error::Usage("pose quaternion is numerically zero".into()));
    }
    Ok(GraspPose::new(q, [vals[4], vals[5], vals[6]], GRIPPER_WIDTH))
}

/// `shape:key=val,key=val`. Geometry keys depend on the shape; `x`, `y`,
/// `yaw`, `recess` are optional everywhere.
fn parse_scene_arg(s: &str) -> Result<SceneSpec> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut map = BTreeMap::new();
    if !rest.is_empty() {
        map = parse_kv(&rest.replace(',', "\n")).map_err(|e| Error::Usage(e.to_string()))?;
    }
    let mut take = |key: &str| -> Result<Option<f64>> {
        match map.remove(key) {
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::Usage(format!("bad value for scene key {key}"))),
            None => Ok(None),
        }
    };
    let need = |opt: Option<f64>, key: &str| {
        opt.ok_or_else(|| Error::Usage(format!("scene {kind:?} requires key {key}")))
    };
    let shape = match kind {
        "cylinder" => Shape::Cylinder {
            radius: need(take("radius")?, "radius")?,
            height: need(take("height")?, "height")?,
        },
        "sphere" => Shape::Sphere {
            radius: need(take("radius")?, "radius")?,
        },
        "box" => Shape::Box3 {
            x: need(take("sx")?, "sx")?,
            y: need(take("sy")?, "sy")?,
            z: need(take("sz")?, "sz")?,
        },
        "flat" => Shape::Flat {
            x: need(take("sx")?, "sx")?,
            y: need(take("sy")?, "sy")?,
            thickness: need(take("thickness")?, "thickness")?,
        },
        other => {
            return Err(Error::Usage(format!(
                "unknown shape {other:?}; expected cylinder, sphere, box, or flat"
            )))
        }
    };
    let scene = SceneSpec {
        shape,
        position: [take("x")?.unwrap_or(0.0), take("y")?.unwrap_or(0.0)],
        yaw: take("yaw")?.unwrap_or(0.0),
        recess: take("recess")?.unwrap_or(0.0),
        seed: 0,
    };
    if let Some(k) = map.keys().next() {
        return Err(Error::Usage(format!("unknown scene key {k:?}")));
    }
    scene.validate()?;
    Ok(scene)
}

fn infer(
    cfg: &RunConfig,
    pose_arg: &str,
    scene_arg: &str,
    trajectory: Option<&Path>,
    models: &Path,
) -> Result<()> {
    let pose = parse_pose_arg(pose_arg)?;
    let scene = parse_scene_arg(scene_arg)?;
    let (encoder, net) = load_models(models)?;
    let condition = encoder.encode(&render_depth(&scene))?;
    let field = NetField {
        net: &net,
        condition: &condition,
    };
    let (corrected, traj) = integrate_flow(&field, &to_vec7(&pose), pose.width, &cfg.integrator_config())?;
    let v = to_vec7(&corrected);
    println!(
        "corrected {} {} {} {} {} {} {}",
        v.0[0], v.0[1], v.0[2], v.0[3], v.0[4], v.0[5], v.0[6]
    );
    let verdict = success_oracle(&scene, &corrected, &SuccessCriteria::default());
    match verdict.reason {
        None => println!("verdict success"),
        Some(r) => println!("verdict failure ({})", r.as_str()),
    }
    if let Some(path) = trajectory {
        let mut buf = Vec::new();
        graspflow::eval::export_flow_trajectories(&[traj], &mut buf)?;
        std::fs::write(path, buf)?;
    }
    Ok(())
}

fn eval(cfg: &RunConfig, models: &Path, out: &Path) -> Result<()> {
    let (encoder, net) = load_models(models)?;
    let bundle = ModelBundle {
        encoder: &encoder,
        net: &net,
        integrator: cfg.integrator_config(),
    };
    let table = evaluate(
        &bundle,
        &seen_templates(),
        &unseen_templates(),
        cfg.trials_per_split,
        &SuccessCriteria::default(),
        cfg.seed,
    )?;
    let text = format_report(&table);
    std::fs::write(out.join("eval_report.txt"), &text)?;
    std::fs::write(out.join("eval_report.tsv"), format_report_tsv(&table))?;
    print!("{text}");
    Ok(())
}

fn export_flow(
    cfg: &RunConfig,
    count: usize,
    models: &Path,
    data: &Path,
    out: &Path,
) -> Result<()> {
    if count == 0 {
        return Err(Error::Usage("count must be positive".into()));
    }
    let pairs = load_dataset(&data.join("dataset.txt"))?;
    if pairs.is_empty() {
        return Err(Error::Data("dataset holds no pairs".into()));
    }
    let (encoder, net) = load_models(models)?;
    let n = count.min(pairs.len());
    let mut trajs = Vec::with_capacity(n);
    for p in &pairs[..n] {
        let condition = encoder.encode(&render_depth(&p.scene))?;
        let field = NetField {
            net: &net,
            condition: &condition,
        };
        let (_, traj) = integrate_flow(
            &field,
            &to_vec7(&p.g_rigid),
            p.g_rigid.width,
            &cfg.integrator_config(),
        )?;
        trajs.push(traj);
    }
    let path = out.join("trajectories.txt");
    let mut buf = Vec::new();
    graspflow::eval::export_flow_trajectories(&trajs, &mut buf)?;
    std::fs::write(&path, buf)?;
    println!("wrote {n} trajectories to {}", path.display());
    // side table with which pairs were exported, for traceability
    let mut meta = BTreeMap::new();
    meta.insert("count".into(), n.to_string());
    std::fs::write(out.join("trajectories_meta.txt"), format_kv(&meta))?;
    Ok(())
}
