//! Scratch harness for sizing the synthetic end-to-end run (removed later).

use std::time::Instant;

use paddymap::features::{build_feature_stack, seasonal_composite, FeatureStackSpec, IndexDiagnostics, StackSources, Variant};
use paddymap::nn::{evaluate, train, AdamState, ModelSpec, Network, TrainConfig};
use paddymap::stratify::{extract_patches, split, stratified_sample};
use paddymap::synth::{generate, SceneSpec};

#[test]
#[ignore]
fn tune_unet_run() {
    let t0 = Instant::now();
    let scene = generate(&SceneSpec::default()).unwrap();
    println!("scene: {:?}", t0.elapsed());

    let spec = FeatureStackSpec { variant: Variant::Rgbn, ..Default::default() };
    let pre = seasonal_composite(&scene.monthlies, &spec.pre_months).unwrap();
    let grow = seasonal_composite(&scene.monthlies, &spec.growing_months).unwrap();
    let sources = StackSources {
        pre_optical: pre,
        growing_optical: grow,
        elevation: None,
        sar_pre: None,
        sar_growing: None,
    };
    let mut diag = IndexDiagnostics::default();
    let stack = build_feature_stack(&spec, &sources, &mut diag).unwrap();
    println!("stack: {:?} bands={}", t0.elapsed(), stack.band_count());

    // U-Net patches
    let counts = [40, 30, 30, 30, 30];
    let points = stratified_sample(&scene.truth_labels, &counts, &scene.region, 101).unwrap();
    let (records, report) = extract_patches(&stack, &scene.truth_labels, &points, 256).unwrap();
    println!("patches: {} of {} ({:?})", records.records.len(), points.len(), t0.elapsed());
    println!("report: {}", report.to_json());
    let (train_set, val_set, test_set) = split(records, (0.7, 0.2, 0.1), 7).unwrap();
    println!(
        "split: {}/{}/{}",
        train_set.records.len(),
        val_set.records.len(),
        test_set.records.len()
    );

    let mspec = ModelSpec::unet(stack.band_count(), 8);
    let mut net = Network::build(&mspec, 99).unwrap();
    let mut adam = AdamState::new_for(&net);
    let cfg = TrainConfig {
        epochs: 15,
        batch_size: 32,
        learning_rate: 2e-3,
        seed: 4242,
        ..Default::default()
    };
    let t1 = Instant::now();
    let history = train(&mut net, &mut adam, &train_set, &val_set, &cfg).unwrap();
    println!("3 epochs: {:?}", t1.elapsed());
    for e in &history {
        println!(
            "epoch {}: train loss {:.4} acc {:.4} f1 {:.4} | val loss {:.4} acc {:.4} f1 {:.4}",
            e.epoch, e.train.loss, e.train.categorical_accuracy, e.train.f1,
            e.val.loss, e.val.categorical_accuracy, e.val.f1
        );
    }
    let test_m = evaluate(&net, &test_set).unwrap();
    println!("test: loss {:.4} acc {:.4} f1 {:.4}", test_m.loss, test_m.categorical_accuracy, test_m.f1);
}
