//! Feature-map pooling with learned attention.
//!
//! Appearance kinds read a small convolutional grid over the union
//! region of the two boxes. Plain kinds mean-pool it; attention kinds
//! score every cell with a relu head, normalize the scores into weights
//! that sum to one, and pool with those weights (times a fixed 1/(M*N)
//! factor). The head is either shared (`ap+c+at`) or generated per
//! predicate from the pair code (`ap+c+cat`), so in the second case
//! different predicates look at different cells of the same map.

use ctxpred::features::FeatureMap;
use ctxpred::model::{
    attention_pool, attention_values, normalize_attention, ModelConfig, ModelKind, ModelParams,
};
use ctxpred::numcore::Matrix;

fn print_grid(name: &str, a: &Matrix) {
    println!("  {name}:");
    for i in 0..a.rows() {
        let row: Vec<String> = (0..a.cols()).map(|j| format!("{:6.3}", a.get(i, j))).collect();
        println!("    [{}]", row.join(", "));
    }
}

fn main() -> ctxpred::Result<()> {
    // 3x4 grid, 2 channels. Channel 0 lights up in the top-left corner,
    // channel 1 in the bottom-right.
    let fm = FeatureMap::from_fn(3, 4, 2, |i, j, ch| {
        let topleft = ((2 - i) + (3 - j)) as f64 / 5.0;
        let bottomright = (i + j) as f64 / 5.0;
        if ch == 0 {
            topleft
        } else {
            bottomright
        }
    })?;
    println!(
        "feature map: {}x{} cells, {} channels; mean pool = {:?}",
        fm.height(),
        fm.width(),
        fm.channels(),
        fm.mean_pool()
    );

    // Shared head, hand-set to fire on channel 0: attention should pile
    // onto the top-left corner.
    let cfg = ModelConfig::new(ModelKind::AppContextAttention, 2, fm.channels())
        .with_code_dim(3)
        .with_embed_dim(2);
    let mut params = ModelParams::init(cfg, 1)?;
    params.w_att = Some(vec![1.0, 0.0]);
    params.b_att = Some(0.0);
    let raw = attention_values(&params, &fm, 0, None)?;
    let weights = normalize_attention(&raw, cfg.pool_epsilon)?;
    print_grid("normalized attention (channel-0 detector)", &weights);
    let total: f64 = weights.data().iter().sum();
    println!("  weights sum to {total:.12}");
    assert!((total - 1.0).abs() < 1e-12);
    assert!(weights.get(0, 0) > weights.get(2, 3));

    let pooled = attention_pool(&fm, &raw, cfg.pool_epsilon)?;
    println!("  attention-pooled feature = {pooled:?}");
    // The 1/(M*N) factor scales the weighted sum; the pooled vector leans
    // toward channel 0 because that is where the weights sit.
    assert!(pooled[0] > pooled[1]);

    // Context-generated heads: predicate 0's head reads channel 0,
    // predicate 1's reads channel 1, so the same map pools differently.
    let cfg = ModelConfig::new(ModelKind::AppContextContextAttention, 2, fm.channels())
        .with_code_dim(3)
        .with_embed_dim(2);
    let mut params = ModelParams::init(cfg, 2)?;
    params.w_att_bar = Some(Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]])?);
    params.v_att = Some(vec![Matrix::zeros(2, 3), Matrix::zeros(2, 3)]);
    params.b_att = Some(0.0);
    let code = vec![0.0, 0.0, 0.0];
    println!("\nper-predicate attention from the same map:");
    let mut pooled_by_predicate = Vec::new();
    for p in 0..2 {
        let raw = attention_values(&params, &fm, p, Some(&code))?;
        let weights = normalize_attention(&raw, cfg.pool_epsilon)?;
        print_grid(&format!("predicate {p}"), &weights);
        pooled_by_predicate.push(attention_pool(&fm, &raw, cfg.pool_epsilon)?);
    }
    assert!(pooled_by_predicate[0][0] > pooled_by_predicate[0][1]);
    assert!(pooled_by_predicate[1][1] > pooled_by_predicate[1][0]);
    println!("predicate 0 pools from the top-left, predicate 1 from the bottom-right.");
    Ok(())
}
