use graspflow::encoder::*;
use graspflow::nn::Activation;
use graspflow::ode::*;
use graspflow::pose::*;
use graspflow::rng::Rng;
use graspflow::scene::*;
use graspflow::velocity::*;

fn main() {
    let (pairs, images) = generate_dataset(&seen_templates(), 15, 7).unwrap();
    let mut enc = AutoencoderNet::new(images[0].pixels(), &mut Rng::seeded(8));
    train_autoencoder(&mut enc, &images, &AeTrainConfig::default(), &mut Rng::seeded(9)).unwrap();
    let samples: Vec<FlowSample> = pairs.iter().zip(&images).map(|(p, img)| FlowSample {
        g_rigid: to_vec7(&p.g_rigid),
        g_soft: to_vec7(&p.g_soft),
        condition: enc.encode(img).unwrap(),
    }).collect();
    let mut net = VelocityNet::new(Activation::Identity, &mut Rng::seeded(10));
    let cfg = TrainConfig { epochs: 8000, seed: 7, cond_noise: 0.02, weight_decay: 0.0,
        aug_scale: 0.5, aug_rotations: true, tc_gamma: 2.0, rows_per_pair: 2, batch_size: 64,
        ..Default::default() };
    fit(&mut net, &samples, &cfg).unwrap();

    let (_, val_idx) = split_indices(samples.len(), cfg.split_fraction, cfg.seed);
    // contraction probe: start at target + 10mm x-offset, query u_x at several t
    println!("contraction: u_x responses to +10mm x displacement at the target pose");
    for &i in val_idx.iter().take(6) {
        let tgt = &samples[i].g_soft;
        let mut row = String::new();
        for t in [0.0, 0.5, 0.8, 0.9, 0.95, 0.99] {
            let mut g = tgt.0;
            g[4] += 0.010;
            let u = net.forward_eval(&PoseVec7(g), t, &samples[i].condition).unwrap();
            let ideal = -0.010 / (1.0 - t);
            row.push_str(&format!(" t{t}: {:+.4}/{:+.4}", u.0[4], ideal));
        }
        println!("i{:3}{row}", i);
    }
    // velocity at the exact target (should be ~0 at all t)
    println!("residual velocity |u| at the exact target pose");
    for &i in val_idx.iter().take(6) {
        let tgt = &samples[i].g_soft;
        let mut row = String::new();
        for t in [0.5, 0.9, 0.99] {
            let u = net.forward_eval(tgt, t, &samples[i].condition).unwrap();
            let n: f64 = u.0.iter().map(|v| v * v).sum::<f64>().sqrt();
            row.push_str(&format!(" t{t}: {:.4}", n));
        }
        println!("i{:3}{row}", i);
    }
    // trajectory tail: where does the integrated path end vs target
    println!("trajectory: position-x of path minus target-x over t (val sample)");
    let icfg = IntegratorConfig::default();
    for &i in val_idx.iter().take(4) {
        let field = NetField { net: &net, condition: &samples[i].condition };
        let (_, traj) = integrate_flow(&field, &samples[i].g_rigid, GRIPPER_WIDTH, &icfg).unwrap();
        let target = correction_oracle(&pairs[i].scene, &pairs[i].g_rigid);
        let mut row = String::new();
        for (t, y) in traj.points.iter().filter(|(t, _)| *t > 0.45) {
            let dx = ((y[4]-target.position[0]).powi(2)+(y[5]-target.position[1]).powi(2)+(y[6]-target.position[2]).powi(2)).sqrt();
            row.push_str(&format!(" ({t:.2},{:.1})", dx*1e3));
        }
        println!("i{:3}{row}", i);
    }
}
