use graspflow::encoder::*;
use graspflow::eval::*;
use graspflow::nn::Activation;
use graspflow::ode::*;
use graspflow::pose::*;
use graspflow::rng::Rng;
use graspflow::scene::*;
use graspflow::velocity::*;
use std::time::Instant;

fn main() {
    // --- criterion 4 probe: single pair to < 1e-6, 2000 epochs w/ decay
    let t0 = Instant::now();
    let mut rng = Rng::seeded(4);
    let scene = jitter_scene(&seen_templates()[0], 0, &mut rng);
    let g_rigid = synth_rigid_grasp(&scene, 10, &mut rng).unwrap();
    let g_soft = correction_oracle(&scene, &g_rigid);
    let cond: Vec<f64> = (0..COND_DIM).map(|_| rng.range(-1.0, 1.0)).collect();
    let sample = FlowSample {
        g_rigid: to_vec7(&g_rigid),
        g_soft: hemisphere_align(&to_vec7(&g_rigid), &to_vec7(&g_soft)),
        condition: cond,
    };
    let mut net = VelocityNet::new(Activation::Identity, &mut Rng::seeded(5));
    let mut trng = Rng::seeded(6);
    let rows: Vec<BatchRow> = (0..32).map(|_| BatchRow { sample: 0, t_c: sample_tc(&mut trng) }).collect();
    let samples_one = [sample.clone()];
    let mut opt = graspflow::nn::Adam::new(1e-3, net.mlp.trainable_len());
    let mut last = f64::NAN;
    for e in 0..2000 {
        last = cfm_batch_loss(&mut net, &samples_one, &rows).unwrap();
        if last < 1e-7 { println!("reached {last:.3e} at step {e}"); break; }
        opt.step(&mut net.mlp).unwrap();
    }
    println!("criterion4 probe: loss {last:.3e} in {:?}", t0.elapsed());

    // --- criterion 5/6 probe
    let t0 = Instant::now();
    let (pairs, images) = generate_dataset(&seen_templates(), 15, 7).unwrap();
    let t1 = Instant::now();
    let mut enc = AutoencoderNet::new(images[0].pixels(), &mut Rng::seeded(8));
    let hist = train_autoencoder(&mut enc, &images, &AeTrainConfig::default(), &mut Rng::seeded(9)).unwrap();
    println!("ae: recon mse {:.3e} in {:?}", hist.last().unwrap(), t1.elapsed());
    let t1 = Instant::now();
    let samples: Vec<FlowSample> = pairs.iter().zip(&images).map(|(p, img)| FlowSample {
        g_rigid: to_vec7(&p.g_rigid),
        g_soft: to_vec7(&p.g_soft),
        condition: enc.encode(img).unwrap(),
    }).collect();
    let mut net = VelocityNet::new(Activation::Identity, &mut Rng::seeded(10));
    let cfg = TrainConfig { seed: 7, ..graspflow::config::RunConfig::default().train_config() };
    let rep = fit(&mut net, &samples, &cfg).unwrap();
    println!("cfm: train {:.3e} val {:.3e} in {:?}",
        rep.train_losses.last().unwrap(), rep.val_losses.last().unwrap(), t1.elapsed());

    let (_, val_idx) = split_indices(samples.len(), cfg.split_fraction, cfg.seed);
    let icfg = IntegratorConfig::default();
    let mut ok = 0;
    let mut worst = (0.0f64, 0.0f64);
    for &i in &val_idx {
        let field = NetField { net: &net, condition: &samples[i].condition };
        let (g, _) = integrate_flow(&field, &samples[i].g_rigid, GRIPPER_WIDTH, &icfg).unwrap();
        let target = correction_oracle(&pairs[i].scene, &pairs[i].g_rigid);
        let (ang, dist) = pose_error(&g, &target);
        if ang <= 3.0f64.to_radians() && dist <= 0.005 { ok += 1; }
        worst = (worst.0.max(ang.to_degrees()), worst.1.max(dist));
    }
    println!("val accuracy: {}/{} worst ang {:.2}deg dist {:.1}mm", ok, val_idx.len(), worst.0, worst.1*1000.0);

    std::fs::create_dir_all("/tmp/probe_models").unwrap();
    graspflow::persist::save_checkpoint(graspflow::persist::CkptKind::Autoencoder, &enc.mlp,
        &Default::default(), std::path::Path::new("/tmp/probe_models/autoencoder.ckpt")).unwrap();
    graspflow::persist::save_checkpoint(graspflow::persist::CkptKind::Velocity, &net.mlp,
        &Default::default(), std::path::Path::new("/tmp/probe_models/velocity.ckpt")).unwrap();
    let t1 = Instant::now();
    let bundle = ModelBundle { encoder: &enc, net: &net, integrator: icfg };
    let table = evaluate(&bundle, &seen_templates(), &unseen_templates(), 200,
        &SuccessCriteria::default(), 7).unwrap();
    for split in [SplitTag::Seen, SplitTag::Unseen] {
        let b = table.overall(split, MethodTag::Baseline);
        let c = table.overall(split, MethodTag::Cfm);
        println!("{}: baseline {:.1}% cfm {:.1}%", split.as_str(), 100.0*b.rate(), 100.0*c.rate());
    }
    println!("eval in {:?}; total pipeline {:?}", t1.elapsed(), t0.elapsed());
}
