//! A task only context-aware models can solve.
//!
//! The synthetic XOR rule labels each scene by *combining* the object
//! pair with the geometry: for half the pair types the predicate is
//! "left-of means positive", for the other half the mapping flips. The
//! geometry alone carries no signal, so a classifier without access to
//! the labels is stuck near chance while a context-aware one separates
//! the data completely.

use ctxpred::data::synth::{generate, SynthConfig};
use ctxpred::embed::EmbeddingStore;
use ctxpred::features::SPATIAL_DIM;
use ctxpred::model::{ModelConfig, ModelKind, ModelParams, DEFAULT_CODE_DIM};
use ctxpred::train::{build_instances, evaluate_accuracy, train, InstanceOptions, TrainConfig};

fn main() -> ctxpred::Result<()> {
    let out = generate(&SynthConfig {
        seed: 0,
        ..SynthConfig::xor_defaults()
    })?;
    println!(
        "generated {} training and {} test relationships, {} object classes",
        out.train.relationship_count(),
        out.test.relationship_count(),
        out.train.object_vocab.len()
    );
    let store = EmbeddingStore::load(std::io::Cursor::new(out.embeddings.clone()))?;

    for kind in [ModelKind::Baseline1Spatial, ModelKind::SpatialContext] {
        let opts = InstanceOptions {
            store: kind.uses_context().then_some(&store),
            ..Default::default()
        };
        let train_set = build_instances(&out.train, kind, &opts)?;
        let test_set = build_instances(&out.test, kind, &opts)?;

        let mut cfg = ModelConfig::new(kind, out.train.predicates.len(), SPATIAL_DIM)
            .with_code_dim(DEFAULT_CODE_DIM);
        if kind.uses_context() {
            cfg = cfg.with_embed_dim(store.dimension());
        }
        let mut params = ModelParams::init(cfg, 0)?;
        let log = train(&mut params, &train_set, &TrainConfig::default())?;

        println!("\n{kind}: {} parameters", params.param_count());
        for record in log.iter().step_by(25).chain(log.last()) {
            println!(
                "  epoch {:>3}: mean loss {:.6}, train accuracy {:.3}",
                record.epoch, record.mean_loss, record.train_accuracy
            );
        }
        let accuracy = evaluate_accuracy(&params, &test_set)?;
        println!("  test accuracy {accuracy:.3}");
    }
    println!("\nthe context-blind model hovers at the ln(2) loss floor; the");
    println!("context-aware one learns which pairs flip the geometry rule.");
    Ok(())
}
