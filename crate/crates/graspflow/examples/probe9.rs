// Flow retrain with translated condition variants, reusing the saved AE.
use graspflow::encoder::*;
use graspflow::eval::*;
use graspflow::nn::Activation;
use graspflow::ode::*;
use graspflow::pose::*;
use graspflow::rng::Rng;
use graspflow::scene::*;
use graspflow::velocity::*;
use std::path::Path;
use std::time::Instant;

fn main() {
    let ae = graspflow::persist::load_checkpoint(Path::new("/tmp/probe_models/autoencoder.ckpt")).unwrap();
    let enc = AutoencoderNet::from_mlp(ae.mlp).unwrap();
    let (pairs, images) = generate_dataset(&seen_templates(), 15, 7).unwrap();
    let samples: Vec<FlowSample> = pairs.iter().zip(&images).map(|(p, img)| FlowSample {
        g_rigid: to_vec7(&p.g_rigid),
        g_soft: to_vec7(&p.g_soft),
        condition: enc.encode(img).unwrap(),
    }).collect();

    let cfg = TrainConfig { seed: 7, ..graspflow::config::RunConfig::default().train_config() };
    let (train_idx, val_idx) = split_indices(samples.len(), cfg.split_fraction, cfg.seed);

    for (nvar, max_px) in [(12usize, 3.2f64), (24, 3.2)] {
        let t0 = Instant::now();
        let mut all = samples.clone();
        let mut groups: Vec<Vec<usize>> = train_idx.iter().map(|&i| vec![i]).collect();
        let mut srng = Rng::derive(7, 0x5f17);
        for (g, &i) in groups.iter_mut().zip(&train_idx) {
            for v in shifted_variants(&all[i], &pairs[i].scene, &enc, nvar, max_px, &mut srng).unwrap() {
                g.push(all.len());
                all.push(v);
            }
        }
        let mut net = VelocityNet::new(Activation::Identity, &mut Rng::seeded(10));
        let rep = fit_grouped(&mut net, &all, &groups, &val_idx, &cfg).unwrap();

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
        let bundle = ModelBundle { encoder: &enc, net: &net, integrator: icfg };
        let table = evaluate(&bundle, &seen_templates(), &unseen_templates(), 200,
            &SuccessCriteria::default(), 7).unwrap();
        let bs = table.overall(SplitTag::Seen, MethodTag::Baseline);
        let cs = table.overall(SplitTag::Seen, MethodTag::Cfm);
        let bu = table.overall(SplitTag::Unseen, MethodTag::Baseline);
        let cu = table.overall(SplitTag::Unseen, MethodTag::Cfm);
        println!(
            "nvar {nvar} px {max_px}: train {:.2e} val {:.2e} | val acc {}/{} worst {:.2}deg {:.1}mm | seen b {:.1}% c {:.1}% unseen b {:.1}% c {:.1}% [{:?}]",
            rep.train_losses.last().unwrap(), rep.val_losses.last().unwrap(),
            ok, val_idx.len(), worst.0, worst.1 * 1000.0,
            100.0 * bs.rate(), 100.0 * cs.rate(), 100.0 * bu.rate(), 100.0 * cu.rate(),
            t0.elapsed()
        );
        graspflow::persist::save_checkpoint(graspflow::persist::CkptKind::Velocity, &net.mlp,
            &Default::default(), Path::new(&format!("/tmp/probe_models/velocity_{nvar}.ckpt"))).unwrap();
    }
}
