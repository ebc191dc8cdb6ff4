// Per-category failure diagnosis using the checkpoints saved by probe.rs.
use graspflow::encoder::AutoencoderNet;
use graspflow::eval::*;
use graspflow::ode::*;
use graspflow::persist::load_checkpoint;
use graspflow::pose::*;
use graspflow::rng::Rng;
use graspflow::scene::*;
use graspflow::velocity::*;
use std::collections::BTreeMap;
use std::path::Path;

fn main() {
    let ae = load_checkpoint(Path::new("/tmp/probe_models/autoencoder.ckpt")).unwrap();
    let vel = load_checkpoint(Path::new("/tmp/probe_models/velocity.ckpt")).unwrap();
    let enc = AutoencoderNet::from_mlp(ae.mlp).unwrap();
    let net = VelocityNet::from_mlp(vel.mlp).unwrap();
    let icfg = IntegratorConfig::default();
    let criteria = SuccessCriteria::default();

    for (name, templates, salt) in [
        ("seen", seen_templates(), 0x5ee5u64),
        ("unseen", unseen_templates(), 0x05eeu64),
    ] {
        let mut fails: BTreeMap<(String, String), usize> = BTreeMap::new();
        let mut totals: BTreeMap<String, usize> = BTreeMap::new();
        let mut worst: BTreeMap<String, (f64, f64, f64)> = BTreeMap::new();
        for i in 0..200usize {
            let template = &templates[i % templates.len()];
            let seed = 7u64 ^ salt;
            let mut rng = Rng::derive(seed, i as u64);
            let scene = jitter_scene(template, seed ^ i as u64, &mut rng);
            let rank = MID_RANK_LO + rng.index((MID_RANK_HI - MID_RANK_LO + 1) as usize) as u32;
            let g_rigid = synth_rigid_grasp(&scene, rank, &mut rng).unwrap();
            let img = render_depth(&scene);
            let condition = enc.encode(&img).unwrap();
            let field = NetField { net: &net, condition: &condition };
            let cat = scene.shape.category().to_string();
            *totals.entry(cat.clone()).or_default() += 1;
            match integrate_flow(&field, &to_vec7(&g_rigid), g_rigid.width, &icfg) {
                Ok((g_final, _)) => {
                    let v = success_oracle(&scene, &g_final, &criteria);
                    // also compare against oracle target
                    let target = correction_oracle(&scene, &g_rigid);
                    let (ang, dist) = pose_error(&g_final, &target);
                    let depth_err = (target.position[2] - g_final.position[2]).abs();
                    let w = worst.entry(cat.clone()).or_insert((0.0, 0.0, 0.0));
                    w.0 = w.0.max(ang.to_degrees());
                    w.1 = w.1.max(dist * 1000.0);
                    w.2 = w.2.max(depth_err * 1000.0);
                    if let Some(r) = v.reason {
                        *fails.entry((cat, r.as_str().to_string())).or_default() += 1;
                    }
                }
                Err(e) => {
                    *fails.entry((cat, format!("integr: {e}"))).or_default() += 1;
                }
            }
        }
        println!("== {name}");
        for (cat, n) in &totals {
            let w = worst.get(cat).copied().unwrap_or((0.0, 0.0, 0.0));
            let nf: usize = fails.iter().filter(|((c, _), _)| c == cat).map(|(_, v)| v).sum();
            println!(
                "{cat:9} {:3}/{n:3} ok; worst vs oracle ang {:.2}deg dist {:.1}mm |dz| {:.1}mm",
                n - nf, w.0, w.1, w.2
            );
            for ((c, r), v) in &fails {
                if c == cat {
                    println!("    {v:3} x {r}");
                }
            }
        }
    }
}
