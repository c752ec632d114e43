use ghostcarve_core::detector::{calibrate, NoiseModel};
use ghostcarve_core::pattern::render_tile_frame_levels;
use ghostcarve_core::{
    binarize, hadamard, make_scan_plan, measure_bucket, CalibrationConfig, ResponseModel, TileSpec,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn hadamard_rows_are_orthogonal(m in 0u32..=7, i in 0usize..128, j in 0usize..128) {
        let h = hadamard(m).unwrap();
        let n = h.size();
        let (i, j) = (i % n, j % n);
        let dot: i64 = (0..n).map(|k| i64::from(h.get(i, k)) * i64::from(h.get(j, k))).sum();
        prop_assert_eq!(dot, if i == j { n as i64 } else { 0 });
    }

    #[test]
    fn binarized_columns_are_half_lit(m in 1u32..=8, c in 1usize..256) {
        let p = binarize(&hadamard(m).unwrap());
        let c = c % p.cols();
        prop_assume!(c != 0);
        prop_assert_eq!(p.column(c).iter().filter(|&&v| v == 1).count(), p.rows() / 2);
    }

    #[test]
    fn tile_frames_light_round_p_side_squared(
        side in 1usize..=12,
        levels in proptest::collection::vec(0.0f64..=1.0, 4),
        seed in any::<u64>(),
    ) {
        let tile = TileSpec { tile_side: side, on_fraction: 1.0, seed };
        let pattern = [1u8, 0, 1, 1];
        let frame = render_tile_frame_levels(&pattern, &levels, 2, &tile).unwrap();
        for (t, (&bit, &p)) in pattern.iter().zip(&levels).enumerate() {
            let (tx, ty) = (t % 2, t / 2);
            let mut on = 0;
            for y in 0..side {
                for x in 0..side {
                    on += usize::from(frame.get(tx * side + x, ty * side + y));
                }
            }
            let want = if bit == 1 { (p * (side * side) as f64).round() as usize } else { 0 };
            prop_assert_eq!(on, want);
        }
    }

    #[test]
    fn scan_plan_partitions_the_image(w in 0u32..=5, h in 0u32..=5) {
        let (w, h) = (1usize << w, 1usize << h);
        let plan = make_scan_plan(w, h).unwrap();
        let mut seen = vec![0u8; w * h];
        for s in 0..plan.segment_count() {
            for &p in plan.stripe(s) {
                seen[p] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }
}

#[test]
fn noiseless_bucket_increases_with_overlap() {
    let model = ResponseModel::default();
    for freq in [6.0, 15.0] {
        let calib = calibrate(&model, None, &CalibrationConfig::new(freq)).unwrap();
        let object = vec![1u8; 32];
        let mut last = f64::NEG_INFINITY;
        for k in 0..=32 {
            let pattern: Vec<u8> = (0..32).map(|i| u8::from(i < k)).collect();
            let e = measure_bucket(&pattern, &object, &model, None, &calib).unwrap();
            assert!(e > last, "f={freq} k={k}");
            last = e;
        }
    }
}

#[test]
fn noise_sd_scales_with_mean() {
    let mut noise = NoiseModel::new(0.4, 99);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for level in 1..=20 {
        let mu = level as f64 * 1e-4;
        let draws: Vec<f64> = (0..2000).map(|_| noise.draw(mu)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
        xs.push(mu);
        ys.push(sd);
    }
    let mx = xs.iter().sum::<f64>() / 20.0;
    let my = ys.iter().sum::<f64>() / 20.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope - 0.4).abs() < 0.02, "slope {slope}");
}
