//! Parameter counts as the vocabulary grows.
//!
//! The combination baseline learns one classifier row per training
//! triplet combination, so its size grows with the number of distinct
//! (subject, predicate, object) patterns in the data. The context-aware
//! models keep one generator per predicate and pay nothing for new
//! object pairs: the pair only changes the input to the generator.

use ctxpred::model::{ModelConfig, ModelKind, ModelParams, DEFAULT_CODE_DIM};

fn count(kind: ModelKind, combos: usize) -> usize {
    let predicates = 70;
    let feature_dim = 50;
    let mut cfg = ModelConfig::new(kind, predicates, feature_dim);
    if kind.uses_context() {
        cfg = cfg.with_code_dim(DEFAULT_CODE_DIM).with_embed_dim(300);
    }
    if kind.is_baseline2() {
        cfg = cfg.with_combos(combos);
    }
    ModelParams::zeros(cfg).unwrap().param_count()
}

fn main() {
    let kinds = [
        ModelKind::Baseline1App,
        ModelKind::Baseline2App,
        ModelKind::AppContext,
        ModelKind::AppContextAttention,
        ModelKind::AppContextContextAttention,
    ];
    println!("parameters at 70 predicates, 50 feature dims, 300-dim embeddings\n");
    print!("{:<14}", "combinations");
    for kind in kinds {
        print!("{:>15}", kind.to_string());
    }
    println!();
    for combos in [100, 1_000, 10_000, 100_000] {
        print!("{combos:<14}");
        for kind in kinds {
            print!("{:>15}", count(kind, combos));
        }
        println!();
    }

    let b2_small = count(ModelKind::Baseline2App, 100);
    let b2_large = count(ModelKind::Baseline2App, 100_000);
    assert_eq!(b2_large, 1000 * b2_small);
    for kind in kinds {
        if !kind.is_baseline2() {
            assert_eq!(count(kind, 100), count(kind, 100_000));
        }
    }
    println!("\nonly the combination baseline scales with the triplet vocabulary;");
    println!("every other column is flat because pairs enter through the code.");
}
