//! Generalizing to object pairs never seen in training.
//!
//! Because the classifier weights are generated from word embeddings,
//! a pair like (elephant, grass) can be scored sensibly even if no
//! training image contained it: nearby pairs in embedding space shape
//! the same projection. The combination baseline has no such route; it
//! owns one classifier per training combination and cannot emit an
//! unseen triplet at all.

use ctxpred::data::synth::{generate, SynthConfig};
use ctxpred::embed::EmbeddingStore;
use ctxpred::eval::{dataset_recall, zero_shot_split, PredictContext, Task};
use ctxpred::features::{MemoryFeatureMaps, SPATIAL_DIM};
use ctxpred::model::{ComboTable, ModelConfig, ModelKind, ModelParams, DEFAULT_CODE_DIM};
use ctxpred::train::{build_instances, train, InstanceOptions, TrainConfig};

fn main() -> ctxpred::Result<()> {
    let out = generate(&SynthConfig {
        object_classes: 12,
        margin: 0.3,
        seed: 7,
        ..SynthConfig::linear_defaults()
    })?;
    let store = EmbeddingStore::load(std::io::Cursor::new(out.embeddings.clone()))?;
    let maps = MemoryFeatureMaps::new(out.feature_maps.clone());
    let split = zero_shot_split(&out.train, &out.test);
    println!(
        "{} training / {} test relationships; {} triplet types appear only in the test set:",
        out.train.relationship_count(),
        out.test.relationship_count(),
        split.len()
    );
    for (s, p, o) in split.iter().take(6) {
        println!("  {p}({s}, {o})");
    }
    if split.len() > 6 {
        println!("  ...");
    }

    // Context-aware appearance model.
    let opts = InstanceOptions {
        store: Some(&store),
        fmaps: Some(&maps),
        ..Default::default()
    };
    let instances = build_instances(&out.train, ModelKind::AppContext, &opts)?;
    let channels = out.feature_maps.values().next().expect("maps exist").channels();
    let cfg = ModelConfig::new(ModelKind::AppContext, out.train.predicates.len(), channels)
        .with_code_dim(DEFAULT_CODE_DIM)
        .with_embed_dim(store.dimension());
    let mut params = ModelParams::init(cfg, 7)?;
    train(&mut params, &instances, &TrainConfig { seed: 7, ..TrainConfig::default() })?;

    let ctx = PredictContext {
        store: Some(&store),
        fmaps: Some(&maps),
        ..Default::default()
    };
    let full = dataset_recall(&params, &out.test, &ctx, 1, Task::Predicate, 0.5, None)?;
    let zero = dataset_recall(&params, &out.test, &ctx, 1, Task::Predicate, 0.5, Some(&split))?;
    println!("\nap+c predicate R@1:");
    println!("  full test set   {:.3}", full.fraction().unwrap_or(0.0));
    println!("  zero-shot only  {:.3}", zero.fraction().unwrap_or(0.0));

    // Combination baseline on the same data.
    let combos = ComboTable::from_triplets(out.train.indexed_triplets());
    let b2_opts = InstanceOptions {
        combos: Some(&combos),
        ..Default::default()
    };
    let b2_instances = build_instances(&out.train, ModelKind::Baseline2Spatial, &b2_opts)?;
    let b2_cfg = ModelConfig::new(
        ModelKind::Baseline2Spatial,
        out.train.predicates.len(),
        SPATIAL_DIM,
    )
    .with_combos(combos.len());
    let mut b2 = ModelParams::init(b2_cfg, 7)?;
    train(&mut b2, &b2_instances, &TrainConfig { seed: 7, ..TrainConfig::default() })?;
    let b2_ctx = PredictContext {
        combos: Some(&combos),
        ..Default::default()
    };
    let b2_full = dataset_recall(&b2, &out.test, &b2_ctx, 100, Task::Predicate, 0.5, None)?;
    let b2_zero = dataset_recall(&b2, &out.test, &b2_ctx, 100, Task::Predicate, 0.5, Some(&split))?;
    println!(
        "\nbaseline2-spatial ({} training combinations) predicate R@100:",
        combos.len()
    );
    println!("  full test set   {:.3}", b2_full.fraction().unwrap_or(0.0));
    println!("  zero-shot only  {:.3}", b2_zero.fraction().unwrap_or(0.0));
    println!("\neven with every candidate admitted, the baseline only recovers");
    println!("combinations it trained on; the held-out triplets are structurally");
    println!("out of reach, while the embedding route scores them like any other.");
    Ok(())
}
