use std::collections::BTreeMap;

use mtrnn::dataset::*;
use mtrnn::model::*;
use mtrnn::numerics::{ops, AdamState};
use mtrnn::train::*;
use proptest::prelude::*;

fn tiny_model() -> ModelConfig {
    ModelConfig { base_channels: 4, resblocks_per_stage: 1, ..ModelConfig::desk() }
}

fn tiny_config() -> TrainConfig {
    TrainConfig {
        model: tiny_model(),
        total_steps: 4,
        halve_every: 2,
        batch_size: 2,
        patch_size: 8,
        total_iterations: 4,
        validate_every: 2,
        val_iterations: 3,
        seed: 17,
        ..Default::default()
    }
}

fn tiny_dataset(dir: &std::path::Path) -> Dataset {
    let cfg = SynthConfig {
        scene: SceneConfig { height: 12, width: 12, ..Default::default() },
        train: 4,
        val: 2,
        test: 2,
        native_tls: vec![7, 9],
        global_seed: 3,
    };
    synthesize_dataset(dir, &cfg).unwrap();
    Dataset::open(dir).unwrap()
}

#[test]
fn chain_law_exhaustive() {
    for start in [7u32, 9, 11, 13] {
        for t in 1..=MAX_ITERATIONS {
            for floor in FLOOR_TLS {
                for step in [2u32, 4, 6] {
                    let chain = make_chain_with_step(start, t, floor, step).unwrap();
                    assert_eq!(chain.start_tl, start);
                    assert_eq!(chain.targets.len(), t);
                    for (i, &target) in chain.targets.iter().enumerate() {
                        let closed = (start as i64 - step as i64 * (i as i64 + 1)).max(floor as i64) as u32;
                        assert_eq!(target, closed);
                    }
                    assert!(chain.targets.windows(2).all(|w| w[1] <= w[0]));
                    assert!(chain.targets.iter().all(|&x| x % 2 == 1 && x >= floor));
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn chains_step_then_hold(start in prop::sample::select(vec![7u32, 9, 11, 13]), t in 1usize..=7, floor in prop::sample::select(FLOOR_TLS.to_vec())) {
        let targets = make_chain(start, t, floor).unwrap().targets;
        let mut expected = start;
        for &x in &targets {
            expected = expected.saturating_sub(2).max(floor);
            prop_assert_eq!(x, expected);
        }
    }
}

fn ladder(native: u32, seed: u64) -> TemporalLadder {
    let seq = synth_sequence(&SceneConfig { height: 8, width: 8, ..Default::default() }, seed).unwrap();
    build_ladder(format!("s{seed}"), &seq, native).unwrap()
}

#[test]
fn identity_model_first_loss_is_input_to_target_distance() {
    let params = init_model(&tiny_model(), 0).unwrap();
    let ladders = [ladder(7, 1), ladder(7, 2)];
    let refs: Vec<&TemporalLadder> = ladders.iter().collect();
    let batch = TrainBatch::from_ladders(&refs, make_chain(7, 6, 1).unwrap()).unwrap();
    let (losses, _) = chain_gradients(&params, &batch, 6).unwrap();
    let expected = ops::l1_loss(&batch.input, &batch.targets[0]).unwrap() as f64;
    assert_eq!(losses[0], expected);
    // the residual identity holds at every iteration, so each loss is input vs target
    for (loss, target) in losses.iter().zip(&batch.targets) {
        assert_eq!(*loss, ops::l1_loss(&batch.input, target).unwrap() as f64);
    }
}

#[test]
fn perfect_estimates_give_zero_loss() {
    // a ladder whose levels all coincide is solved exactly by the identity model
    let flat = Image::filled(3, 8, 8, 0.4);
    let images: BTreeMap<u32, Image> = (1..=7).step_by(2).map(|k| (k, flat.clone())).collect();
    let l = TemporalLadder { scene_id: "flat".into(), native_tl: 7, images };
    let batch = TrainBatch::from_ladders(&[&l], make_chain(7, 4, 1).unwrap()).unwrap();
    let (losses, _) = chain_gradients(&init_model(&tiny_model(), 0).unwrap(), &batch, 4).unwrap();
    assert!(losses.iter().all(|&x| x == 0.0));
}

#[test]
fn earlier_iterations_ignore_later_ones() {
    let mut params = init_model(&tiny_model(), 4).unwrap();
    for v in params.get_mut("dec1.out.weight").unwrap().data_mut() {
        *v = 0.02;
    }
    let ladders = [ladder(9, 5)];
    let refs: Vec<&TemporalLadder> = ladders.iter().collect();
    let batch = TrainBatch::from_ladders(&refs, make_chain(9, 4, 1).unwrap()).unwrap();
    let (short_losses, short) = chain_gradients(&params, &batch, 2).unwrap();
    let (long_losses, long) = chain_gradients(&params, &batch, 4).unwrap();
    assert_eq!(short_losses[..], long_losses[..2]);
    assert_eq!(short[..], long[..2]);
    assert_ne!(long[1], long[2]);
}

#[test]
fn accumulated_step_uses_summed_gradients() {
    let params0 = init_model(&tiny_model(), 6).unwrap();
    let ladders = [ladder(7, 8)];
    let batch = TrainBatch::from_ladders(&[&ladders[0]], make_chain(7, 3, 1).unwrap()).unwrap();
    let mut a = params0.clone();
    let mut adam_a = AdamState::new(a.parameters(), Default::default());
    train_step(&mut a, &mut adam_a, &batch, false).unwrap();
    assert_eq!(adam_a.step, 1);

    let (_, grads) = chain_gradients(&params0, &batch, 3).unwrap();
    let summed: Vec<_> = (0..grads[0].len())
        .map(|i| ops::add(&ops::add(&grads[0][i], &grads[1][i]).unwrap(), &grads[2][i]).unwrap())
        .collect();
    let mut b = params0.clone();
    let mut adam_b = AdamState::new(b.parameters(), Default::default());
    mtrnn::numerics::adam_step(b.parameters_mut(), &summed, &mut adam_b).unwrap();
    assert_eq!(a, b);

    let mut c = params0.clone();
    let mut adam_c = AdamState::new(c.parameters(), Default::default());
    train_step(&mut c, &mut adam_c, &batch, true).unwrap();
    assert_eq!(adam_c.step, 3);
    assert_ne!(c, a);
}

#[test]
fn zero_steps_returns_initial_params() {
    let dir = tempfile::tempdir().unwrap();
    let ds = tiny_dataset(dir.path());
    let cfg = TrainConfig { total_steps: 0, ..tiny_config() };
    let (ck, log) = train(&cfg, &ds, None).unwrap();
    assert_eq!(ck.params, init_model(&cfg.model, cfg.seed).unwrap());
    assert_eq!(log.steps().count(), 0);
}

#[test]
fn seeded_runs_are_bit_identical_and_resume_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let ds = tiny_dataset(&dir.path().join("data"));
    let cfg = tiny_config();
    let (a, log_a) = train(&cfg, &ds, Some(&dir.path().join("a"))).unwrap();
    let (b, _) = train(&cfg, &ds, None).unwrap();
    assert_eq!(encode_checkpoint(&a).unwrap(), encode_checkpoint(&b).unwrap());
    assert_eq!(log_a.steps().count(), 4);
    assert!(log_a.validations().count() > 0);

    // stop after 3 steps, reload from disk, finish the run
    let mut first = Trainer::new(TrainConfig { total_steps: 3, ..cfg.clone() }).unwrap();
    first.run(&ds, &mut TrainLog::new(), None).unwrap();
    let path = dir.path().join("mid.ckpt");
    save_checkpoint(&first.checkpoint().unwrap(), &path).unwrap();
    let mut resumed = Trainer::resume(&path).unwrap();
    resumed.set_total_steps(cfg.total_steps);
    resumed.run(&ds, &mut TrainLog::new(), None).unwrap();
    let mut resumed_ck = resumed.checkpoint().unwrap();
    resumed_ck.meta.extra = a.meta.extra.clone();
    assert_eq!(encode_checkpoint(&resumed_ck).unwrap(), encode_checkpoint(&a).unwrap());

    let text = std::fs::read_to_string(dir.path().join("a").join(TRAIN_LOG)).unwrap();
    assert_eq!(TrainLog::parse_ndjson(&text).unwrap(), log_a.records());
    assert_eq!(load_checkpoint(dir.path().join("a").join(FINAL_CHECKPOINT)).unwrap(), a);
}

#[test]
fn target_floor_never_touches_sharper_levels() {
    let dir = tempfile::tempdir().unwrap();
    let ds = tiny_dataset(dir.path());
    // strip TL 1 and TL 3 from every training ladder
    let stripped: Vec<TemporalLadder> = ds
        .ladders(Split::Train)
        .into_iter()
        .map(|l| {
            let mut l = l.clone();
            l.images.retain(|&k, _| k >= 5);
            l
        })
        .collect();
    let refs: Vec<&TemporalLadder> = stripped.iter().collect();
    let mut trainer = Trainer::new(TrainConfig { target_floor_tl: 5, ..tiny_config() }).unwrap();
    for _ in 0..3 {
        let rec = trainer.train_one(&refs).unwrap();
        assert!(rec.iter_losses.iter().all(|l| l.is_finite()));
    }
    let mut full = Trainer::new(tiny_config()).unwrap();
    assert!(matches!(full.train_one(&refs), Err(mtrnn::Error::Argument(_))));
}

#[test]
fn fixed_input_level_and_single_shot() {
    let dir = tempfile::tempdir().unwrap();
    let ds = tiny_dataset(dir.path());
    let train_set = ds.ladders(Split::Train);
    let mut trainer =
        Trainer::new(TrainConfig { mode: TrainMode::SingleShot, fixed_input_tl: Some(3), ..tiny_config() }).unwrap();
    let batch = trainer.draw_batch(&train_set).unwrap();
    assert_eq!(batch.chain.targets, vec![1]);
    assert_eq!(batch.chain.start_tl, 3);
    let rec = trainer.train_one(&train_set).unwrap();
    assert_eq!(rec.iter_losses.len(), 1);
}

#[test]
fn start_level_is_a_native_level() {
    let dir = tempfile::tempdir().unwrap();
    let ds = tiny_dataset(dir.path());
    let train_set = ds.ladders(Split::Train);
    let mut trainer = Trainer::new(TrainConfig { total_steps: 12, ..tiny_config() }).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..12 {
        seen.insert(trainer.train_one(&train_set).unwrap().start_tl);
    }
    let natives: std::collections::BTreeSet<u32> = train_set.iter().map(|l| l.native_tl).collect();
    assert!(seen.is_subset(&natives));
}

#[test]
fn divergence_is_reported_with_step() {
    let dir = tempfile::tempdir().unwrap();
    let ds = tiny_dataset(dir.path());
    let train_set = ds.ladders(Split::Train);
    let mut trainer = Trainer::new(tiny_config()).unwrap();
    let mut ck = trainer.checkpoint().unwrap();
    for v in ck.params.get_mut("dec1.out.bias").unwrap().data_mut() {
        *v = f32::MAX;
    }
    for v in ck.params.get_mut("dec1.out.weight").unwrap().data_mut() {
        *v = f32::MAX;
    }
    trainer = Trainer::from_checkpoint(ck).unwrap();
    match trainer.train_one(&train_set) {
        Err(mtrnn::Error::Diverged { step: 0, .. }) => {}
        other => panic!("expected divergence, got {:?}", other.map(|r| r.loss)),
    }
}
