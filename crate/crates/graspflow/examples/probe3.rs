use graspflow::encoder::*;
use graspflow::eval::*;
use graspflow::nn::Activation;
use graspflow::ode::*;
use graspflow::pose::*;
use graspflow::rng::Rng;
use graspflow::scene::*;
use graspflow::velocity::*;
use std::time::Instant;

fn val_acc(
    net: &VelocityNet,
    samples: &[FlowSample],
    pairs: &[PairedGrasp],
    val_idx: &[usize],
) -> (usize, f64, f64) {
    let icfg = IntegratorConfig::default();
    let mut ok = 0;
    let mut worst = (0.0f64, 0.0f64);
    for &i in val_idx {
        let field = NetField { net, condition: &samples[i].condition };
        let (g, _) = integrate_flow(&field, &samples[i].g_rigid, GRIPPER_WIDTH, &icfg).unwrap();
        let target = correction_oracle(&pairs[i].scene, &pairs[i].g_rigid);
        let (ang, dist) = pose_error(&g, &target);
        if ang <= 3.0f64.to_radians() && dist <= 0.005 { ok += 1; }
        worst = (worst.0.max(ang.to_degrees()), worst.1.max(dist));
    }
    (ok, worst.0, worst.1 * 1000.0)
}

fn main() {
    let (pairs, images) = generate_dataset(&seen_templates(), 15, 7).unwrap();
    let t1 = Instant::now();
    let mut enc = AutoencoderNet::new(images[0].pixels(), &mut Rng::seeded(8));
    let hist = train_autoencoder(&mut enc, &images, &AeTrainConfig::default(), &mut Rng::seeded(9)).unwrap();
    println!("ae: recon mse {:.3e} in {:?}", hist.last().unwrap(), t1.elapsed());

    let samples: Vec<FlowSample> = pairs.iter().zip(&images).map(|(p, img)| FlowSample {
        g_rigid: to_vec7(&p.g_rigid),
        g_soft: to_vec7(&p.g_soft),
        condition: enc.encode(img).unwrap(),
    }).collect();

    // latent stats
    let n = samples.len();
    let d = samples[0].condition.len();
    let mut mean = vec![0.0; d];
    for s in &samples { for (m, c) in mean.iter_mut().zip(&s.condition) { *m += c / n as f64; } }
    let mut var = 0.0;
    for s in &samples { for (m, c) in mean.iter().zip(&s.condition) { var += (c - m).powi(2); } }
    println!("latent per-dim std ~ {:.3}", (var / (n * d) as f64).sqrt());

    // oracle-condition control: true scene parameters as condition
    let oracle_samples: Vec<FlowSample> = pairs.iter().map(|p| {
        let s = &p.scene;
        let mut c = vec![0.0; d];
        c[0] = s.position[0] * 10.0;
        c[1] = s.position[1] * 10.0;
        c[2] = s.top_height() * 10.0;
        c[3] = target_depth(s) * 10.0;
        c[4] = s.yaw.sin();
        c[5] = s.yaw.cos();
        FlowSample {
            g_rigid: to_vec7(&p.g_rigid),
            g_soft: to_vec7(&p.g_soft),
            condition: c,
        }
    }).collect();

    struct G { name: &'static str, oracle: bool, cn: f64, ep: usize, bs: usize, gamma: f64, rpp: usize, wd: f64 }
    let grid = [
        G { name: "oracle wd0 e8k ", oracle: true,  cn: 0.0,  ep: 8000, bs: 64, gamma: 2.0, rpp: 2, wd: 0.0 },
        G { name: "latent wd0 e8k ", oracle: false, cn: 0.02, ep: 8000, bs: 64, gamma: 2.0, rpp: 2, wd: 0.0 },
        G { name: "latent wd0 e16k", oracle: false, cn: 0.02, ep: 16000, bs: 64, gamma: 2.0, rpp: 2, wd: 0.0 },
        G { name: "latent wd0 cn.05 e8k", oracle: false, cn: 0.05, ep: 8000, bs: 64, gamma: 2.0, rpp: 2, wd: 0.0 },
    ];
    for G { name, oracle, cn, ep, bs, gamma, rpp, wd } in grid {
        let smp: &[FlowSample] = if oracle { &oracle_samples } else { &samples };
        let aug = 0.5;
        let t1 = Instant::now();
        let mut net = VelocityNet::new(Activation::Identity, &mut Rng::seeded(10));
        let cfg = TrainConfig {
            epochs: ep, seed: 7, cond_noise: cn, weight_decay: wd, aug_scale: aug,
            batch_size: bs, aug_rotations: true, tc_gamma: gamma, rows_per_pair: rpp,
            ..Default::default()
        };
        let rep = fit(&mut net, smp, &cfg).unwrap();
        let (train_idx, val_idx) = split_indices(smp.len(), cfg.split_fraction, cfg.seed);
        let (tok, twa, twd) = val_acc(&net, smp, &pairs, &train_idx);
        let (ok, wa, wdist) = val_acc(&net, smp, &pairs, &val_idx);
        println!(
            "{name}: train {:.3e} val {:.3e} | train-acc {}/{} ({:.1}deg {:.0}mm) val-acc {}/{} ({:.2}deg {:.1}mm) [{:?}]",
            rep.train_losses.last().unwrap(), rep.val_losses.last().unwrap(),
            tok, train_idx.len(), twa, twd, ok, val_idx.len(), wa, wdist, t1.elapsed()
        );
    }
}
