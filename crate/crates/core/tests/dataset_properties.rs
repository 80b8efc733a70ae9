use std::collections::BTreeMap;

use mtrnn::dataset::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scene() -> impl Strategy<Value = (SceneConfig, u64, u32)> {
    (
        (2usize..6).prop_map(|k| 4 * k),
        (2usize..6).prop_map(|k| 4 * k),
        0usize..4,
        0.0f64..2.0,
        any::<u64>(),
        prop::sample::select(NATIVE_TLS.to_vec()),
    )
        .prop_map(|(height, width, objects, motion_scale, seed, tl)| {
            let cfg = SceneConfig { height, width, frames: 13, objects, motion_scale, camera_velocity: None };
            (cfg, seed, tl)
        })
}

fn frame_mean(frames: &[Image]) -> f64 {
    frames.iter().map(Image::mean).sum::<f64>() / frames.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn ladder_invariants((cfg, seed, native) in scene()) {
        let seq = synth_sequence(&cfg, seed).unwrap();
        let ladder = build_ladder("s", &seq, native).unwrap();
        prop_assert_eq!(ladder.sharp(), seq.center());
        let c = seq.frames.len() / 2;
        for (&tl, img) in &ladder.images {
            let k = tl as usize / 2;
            let window = &seq.frames[c - k..=c + k];
            prop_assert!((img.mean() - frame_mean(window)).abs() <= 1e-6);
            prop_assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
            if tl >= 3 {
                // TL k = ((k-2) * TL(k-2) + two boundary frames) / k
                let prev = &ladder.images[&(tl - 2)];
                let (a, b) = (&window[0], &window[window.len() - 1]);
                let n = tl as f64;
                for i in 0..img.data().len() {
                    let rebuilt = ((n - 2.0) * prev.data()[i] as f64 + a.data()[i] as f64 + b.data()[i] as f64) / n;
                    prop_assert!((img.data()[i] as f64 - rebuilt).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn augmentation_keeps_levels_aligned((cfg, seed, native) in scene(), aug_seed in any::<u64>()) {
        let seq = synth_sequence(&cfg, seed).unwrap();
        let ladder = build_ladder("s", &seq, native).unwrap();
        let patch = cfg.height.min(cfg.width) / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(aug_seed);
        let (out, draw) = augment(&ladder.images, patch, &mut rng).unwrap();
        for (tl, img) in &ladder.images {
            prop_assert_eq!(&out[tl], &draw.apply(img).unwrap());
        }
    }
}

fn argmax_shift(a: &Image, b: &Image, max_shift: i64) -> (i64, i64) {
    // brute-force normalized cross-correlation of b against a over integer shifts
    let (c, h, w) = a.dims();
    let mut best = (f64::NEG_INFINITY, (0, 0));
    for dy in -max_shift..=max_shift {
        for dx in -max_shift..=max_shift {
            let mut pairs = Vec::new();
            for ch in 0..c {
                for y in max_shift..h as i64 - max_shift {
                    for x in max_shift..w as i64 - max_shift {
                        pairs.push((a.get(ch, y as usize, x as usize) as f64, b.get(ch, (y + dy) as usize, (x + dx) as usize) as f64));
                    }
                }
            }
            let n = pairs.len() as f64;
            let (ma, mb) = pairs.iter().fold((0.0, 0.0), |(p, q), &(x, y)| (p + x / n, q + y / n));
            let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
            for &(x, y) in &pairs {
                sab += (x - ma) * (y - mb);
                saa += (x - ma).powi(2);
                sbb += (y - mb).powi(2);
            }
            let score = sab / (saa * sbb).sqrt();
            if score > best.0 {
                best = (score, (dx, dy));
            }
        }
    }
    best.1
}

#[test]
fn translation_shows_up_as_correlation_peak() {
    for (i, &(dx, dy)) in [(1.0, 0.0), (2.0, 0.0), (0.0, -1.6), (1.3, 0.7), (-0.8, 1.9)].iter().enumerate() {
        let cfg = SceneConfig { height: 48, width: 48, objects: 0, camera_velocity: Some([dx, dy]), ..Default::default() };
        let seq = synth_sequence(&cfg, 100 + i as u64).unwrap();
        let c = seq.frames.len() / 2;
        let found = argmax_shift(&seq.frames[c + 1], &seq.frames[c], 3);
        // content at x in frame t+1 sat at x - d in frame t
        assert_eq!(found, (-(dx as f64).round() as i64, -(dy as f64).round() as i64), "velocity ({dx}, {dy})");
    }
}

#[test]
fn blur_energy_decreases_with_level() {
    for seed in 0..20 {
        let seq = synth_sequence(&SceneConfig::default(), seed).unwrap();
        let ladder = build_ladder("s", &seq, 13).unwrap();
        let energy: BTreeMap<u32, f64> = ladder.images.iter().map(|(&k, v)| (k, v.gradient_energy())).collect();
        let values: Vec<f64> = energy.values().copied().collect();
        assert!(values.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: {energy:?}");
    }
}
