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
    let cfg = TrainConfig { epochs: 8000, seed: 7, cond_noise: 0.02, weight_decay: 1e-4,
        aug_scale: 0.5, aug_rotations: true, tc_gamma: 2.0, rows_per_pair: 2, batch_size: 64,
        ..Default::default() };
    let rep = fit(&mut net, &samples, &cfg).unwrap();
    println!("train {:.3e} val {:.3e}", rep.train_losses.last().unwrap(), rep.val_losses.last().unwrap());

    let (_, val_idx) = split_indices(samples.len(), cfg.split_fraction, cfg.seed);
    let icfg = IntegratorConfig::default();
    println!("idx template     rank tilt0  angerr   ex    ey    ez  (mm)");
    for &i in &val_idx {
        let p = &pairs[i];
        let field = NetField { net: &net, condition: &samples[i].condition };
        let (g, _) = integrate_flow(&field, &samples[i].g_rigid, GRIPPER_WIDTH, &icfg).unwrap();
        let target = correction_oracle(&p.scene, &p.g_rigid);
        let (ang, dist) = pose_error(&g, &target);
        let ex = (g.position[0] - target.position[0]) * 1e3;
        let ey = (g.position[1] - target.position[1]) * 1e3;
        let ez = (g.position[2] - target.position[2]) * 1e3;
        let tilt0 = {
            let q = p.g_rigid.orientation;
            let z = [2.0*(q[1]*q[3]+q[0]*q[2]), 2.0*(q[2]*q[3]-q[0]*q[1]), 1.0-2.0*(q[1]*q[1]+q[2]*q[2])];
            z[2].clamp(-1.0,1.0).acos().to_degrees()
        };
        println!("{:3} {:12} {:4} {:5.1} {:7.2} {:6.1} {:5.1} {:5.1}",
            i, shape_name(&p.scene.shape), p.rank, tilt0,
            ang.to_degrees(), ex, ey, ez);
    }
}

fn shape_name(s: &Shape) -> &'static str {
    match s {
        Shape::Cylinder { .. } => "cylinder",
        Shape::Sphere { .. } => "sphere",
        Shape::Box3 { .. } => "box",
        Shape::Flat { .. } => "flat",
    }
}
