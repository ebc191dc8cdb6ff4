// Verify shift_scale_row's sign convention matches a true scene translation.
use graspflow::encoder::*;
use graspflow::scene::*;

fn main() {
    let mk = |x: f64, y: f64| SceneSpec {
        shape: Shape::Cylinder { radius: 0.03, height: 0.1 },
        position: [x, y],
        yaw: 0.3,
        recess: 0.0,
        seed: 0,
    };
    let m_per_px = WORKSPACE / IMG_RES as f64;
    let base = normalize_depth(&render_depth(&mk(0.0, 0.0))).unwrap();
    for (wx, wy) in [(0.012, 0.0), (0.0, -0.017), (0.021, 0.009)] {
        let truth = normalize_depth(&render_depth(&mk(wx, wy))).unwrap();
        let (dx, dy) = (wx / m_per_px, wy / m_per_px);
        for (tag, sx, sy) in [("+,+", dx, dy), ("-,-", -dx, -dy)] {
            let approx = shift_scale_row(&base, IMG_RES as usize, IMG_RES as usize, sx, sy, 1.0);
            let rms = (truth.iter().zip(&approx).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                / truth.len() as f64)
                .sqrt();
            println!("shift ({wx},{wy}) sign {tag}: rms {rms:.4}");
        }
    }
}
