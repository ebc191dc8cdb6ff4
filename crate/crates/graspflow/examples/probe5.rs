use graspflow::encoder::*;
use graspflow::rng::Rng;
use graspflow::scene::*;


/// Ridge regression latent -> targets; reports per-target RMS test error.
fn ridge_eval(
    lat: &[Vec<f64>],
    targets: &[Vec<f64>],
    train_idx: &[usize],
    test_idx: &[usize],
) -> Vec<f64> {
    let d = lat[0].len() + 1;
    let m = targets[0].len();
    // normal equations with ridge lambda
    let lambda = 1e-4;
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d * m];
    let feat = |i: usize| -> Vec<f64> {
        let mut f = lat[i].clone();
        f.push(1.0);
        f
    };
    for &i in train_idx {
        let f = feat(i);
        for r in 0..d {
            for c in 0..d {
                a[r * d + c] += f[r] * f[c];
            }
            for j in 0..m {
                b[r * m + j] += f[r] * targets[i][j];
            }
        }
    }
    for r in 0..d {
        a[r * d + r] += lambda;
    }
    // gaussian elimination
    for col in 0..d {
        let mut piv = col;
        for r in col + 1..d {
            if a[r * d + col].abs() > a[piv * d + col].abs() {
                piv = r;
            }
        }
        for c in 0..d {
            a.swap(col * d + c, piv * d + c);
        }
        for j in 0..m {
            b.swap(col * m + j, piv * m + j);
        }
        let pv = a[col * d + col];
        for r in col + 1..d {
            let f = a[r * d + col] / pv;
            for c in col..d {
                a[r * d + c] -= f * a[col * d + c];
            }
            for j in 0..m {
                b[r * m + j] -= f * b[col * m + j];
            }
        }
    }
    let mut w = vec![0.0; d * m];
    for r in (0..d).rev() {
        for j in 0..m {
            let mut s = b[r * m + j];
            for c in r + 1..d {
                s -= a[r * d + c] * w[c * m + j];
            }
            w[r * m + j] = s / a[r * d + r];
        }
    }
    let mut sse = vec![0.0; m];
    for &i in test_idx {
        let f = feat(i);
        for j in 0..m {
            let pred: f64 = (0..d).map(|r| f[r] * w[r * m + j]).sum();
            sse[j] += (pred - targets[i][j]).powi(2);
        }
    }
    sse.iter().map(|s| (s / test_idx.len() as f64).sqrt()).collect()
}

fn scene_targets(scene: &SceneSpec) -> Vec<f64> {
    vec![
        scene.position[0],
        scene.position[1],
        scene.top_height(),
        scene.top_height() - target_depth(scene),
    ]
}

fn main() {
    let ae = graspflow::persist::load_checkpoint(std::path::Path::new(
        "/tmp/probe_models/autoencoder.ckpt")).unwrap();
    let enc = AutoencoderNet::from_mlp(ae.mlp).unwrap();
    let (pairs, images) = generate_dataset(&seen_templates(), 15, 7).unwrap();
    let mut lat: Vec<Vec<f64>> = images.iter().map(|im| enc.encode(im).unwrap()).collect();
    let mut targets: Vec<Vec<f64>> = pairs.iter().map(|p| scene_targets(&p.scene)).collect();
    let train_idx: Vec<usize> = (0..lat.len()).collect();

    // fresh jittered scenes, exactly as the benchmark draws them
    for (name, templates, salt) in [
        ("seen  ", seen_templates(), 0x5ee5u64),
        ("unseen", unseen_templates(), 0x05eeu64),
    ] {
        let base = lat.len();
        for i in 0..200usize {
            let template = &templates[i % templates.len()];
            let seed = 7u64 ^ salt;
            let mut rng = Rng::derive(seed, i as u64);
            let scene = jitter_scene(template, seed ^ i as u64, &mut rng);
            lat.push(enc.encode(&render_depth(&scene)).unwrap());
            targets.push(scene_targets(&scene));
        }
        let test_idx: Vec<usize> = (base..lat.len()).collect();
        let te = ridge_eval(&lat, &targets, &train_idx, &test_idx);
        println!(
            "{name}: fresh-scene ridge rms cx {:.1} cy {:.1} top {:.1} pz {:.1} mm",
            te[0] * 1e3, te[1] * 1e3, te[2] * 1e3, te[3] * 1e3
        );
    }
}
