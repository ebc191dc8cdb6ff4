// Single-pair zero-loss feasibility: optimizer schedule comparison.
use graspflow::encoder::COND_DIM;
use graspflow::nn::{Activation, Adam};
use graspflow::pose::*;
use graspflow::rng::Rng;
use graspflow::scene::*;
use graspflow::velocity::*;
use std::time::Instant;

fn main() {
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
    let samples = [sample];

    for (name, lr0, cosine) in [
        ("lr1e-3 const ", 1e-3, false),
        ("lr2e-3 const ", 2e-3, false),
        ("lr1e-3 cosine", 1e-3, true),
        ("lr3e-3 cosine", 3e-3, true),
    ] {
        let t0 = Instant::now();
        let mut net = VelocityNet::new(Activation::Identity, &mut Rng::seeded(5));
        let mut trng = Rng::seeded(6);
        let rows: Vec<BatchRow> = (0..32)
            .map(|_| BatchRow { sample: 0, t_c: sample_tc(&mut trng) })
            .collect();
        let mut opt = Adam::new(lr0, net.mlp.trainable_len());
        let mut last = f64::NAN;
        let mut hit = None;
        for e in 0..2000 {
            if cosine {
                let p = e as f64 / 2000.0;
                opt.lr = lr0 / 1000.0
                    + 0.5 * (lr0 - lr0 / 1000.0) * (1.0 + (std::f64::consts::PI * p).cos());
            }
            last = cfm_batch_loss(&mut net, &samples, &rows).unwrap();
            if hit.is_none() && last < 1e-6 {
                hit = Some(e);
            }
            opt.step(&mut net.mlp).unwrap();
        }
        println!(
            "{name}: final {last:.3e} first<1e-6 at {hit:?} [{:?}]",
            t0.elapsed()
        );
    }
}
