use physiogait_core::rpimage::encode_window;
use physiogait_core::synthgen::template;

const H: usize = 155;
const W: usize = 220;

/// Reference: brute-force double loop for the matrix, explicit four-neighbour
/// weights with half-pixel centres for the resize.
fn reference_channel(s: &[f64]) -> Vec<f64> {
    let n = s.len();
    let mut m = vec![vec![0.0; n]; n];
    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
    for i in 0..n {
        for j in 0..n {
            m[i][j] = s[i] - s[j];
            lo = lo.min(m[i][j]);
            hi = hi.max(m[i][j]);
        }
    }
    for row in &mut m {
        for v in row.iter_mut() {
            *v = (*v - lo) / (hi - lo);
        }
    }
    let mut out = Vec::with_capacity(H * W);
    for oy in 0..H {
        let sy = ((oy as f64 + 0.5) * n as f64 / H as f64 - 0.5).max(0.0).min((n - 1) as f64);
        for ox in 0..W {
            let sx = ((ox as f64 + 0.5) * n as f64 / W as f64 - 0.5).max(0.0).min((n - 1) as f64);
            let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(n - 1), (x0 + 1).min(n - 1));
            let (dy, dx) = (sy - y0 as f64, sx - x0 as f64);
            let v = m[y0][x0] * (1.0 - dy) * (1.0 - dx)
                + m[y0][x1] * (1.0 - dy) * dx
                + m[y1][x0] * dy * (1.0 - dx)
                + m[y1][x1] * dy * dx;
            out.push(v);
        }
    }
    out
}

#[test]
fn gesture_image_matches_brute_force() {
    let axes: Vec<Vec<f64>> = (0..3)
        .map(|a| {
            (0..80)
                .map(|k| {
                    let u = k as f64 / 80.0;
                    (std::f64::consts::PI * u).sin() * template(8, u)[a] + if a == 2 { 1.0 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let img = encode_window(&[&axes[0][..], &axes[1][..], &axes[2][..]]).unwrap();
    for (c, axis) in axes.iter().enumerate() {
        let reference = reference_channel(axis);
        let err = img.channel(c).iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-6, "channel {c}: {err}");
    }

    let img32 = encode_window(&[&axes[0].iter().map(|&v| v as f32).collect::<Vec<_>>()[..]]).unwrap();
    let reference = reference_channel(&axes[0].iter().map(|&v| f64::from(v as f32)).collect::<Vec<_>>());
    for c in 0..3 {
        let err = img32.channel(c).iter().zip(&reference).map(|(a, b)| (f64::from(*a) - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-5, "f32 channel {c}: {err}");
    }
}
