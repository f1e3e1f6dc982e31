//! Forward scoring for every model kind.

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::model::{ModelKind, ModelParams, PredicateScores};
use crate::numcore::{dot, relu, Matrix};

/// Input feature for one subject/object pair: either the 14-dim geometry
/// vector or a convolutional feature map, depending on the model kind.
#[derive(Debug, Clone, Copy)]
pub enum ModelInput<'a> {
    Spatial(&'a [f64]),
    Map(&'a FeatureMap),
}

/// The generated classifier row for predicate `p` under the given pair
/// code: `w_p = w_bar_p + V_p * code`.
pub fn context_classifier(params: &ModelParams, p: usize, code: &[f64]) -> Result<Vec<f64>> {
    let (w_bar, v) = match (&params.w_bar, &params.v) {
        (Some(w), Some(v)) => (w, v),
        _ => {
            return Err(Error::WrongKind {
                op: "context_classifier",
                kind: params.config.kind.to_string(),
            })
        }
    };
    if p >= params.config.predicates {
        return Err(Error::ClassOutOfRange {
            index: p,
            len: params.config.predicates,
        });
    }
    if code.len() != params.config.code_dim {
        return Err(Error::DimensionMismatch {
            op: "context_classifier",
            left: format!("code of length {}", code.len()),
            right: format!("configured code_dim {}", params.config.code_dim),
        });
    }
    let mut w = v[p].matvec(code)?;
    for (wi, base) in w.iter_mut().zip(w_bar.row(p)) {
        *wi += base;
    }
    Ok(w)
}

/// Score a feature vector under every class row.
///
/// Context-aware kinds require the pair code and produce one score per
/// predicate; Baseline1 kinds score their context-free per-predicate rows;
/// Baseline2 kinds score one row per distinct training triplet type.
pub fn score_predicates(
    params: &ModelParams,
    phi: &[f64],
    code: Option<&[f64]>,
) -> Result<PredicateScores> {
    if phi.len() != params.config.feature_dim {
        return Err(Error::DimensionMismatch {
            op: "score_predicates",
            left: format!("feature of length {}", phi.len()),
            right: format!("configured feature_dim {}", params.config.feature_dim),
        });
    }
    let kind = params.config.kind;
    let scores = if kind.uses_context() {
        let code = code.ok_or_else(|| Error::MissingContext(kind.to_string()))?;
        let mut scores = Vec::with_capacity(params.config.predicates);
        for p in 0..params.config.predicates {
            let w = context_classifier(params, p, code)?;
            scores.push(dot(&w, phi)?);
        }
        scores
    } else {
        let w = params.w_flat.as_ref().ok_or(Error::WrongKind {
            op: "score_predicates",
            kind: kind.to_string(),
        })?;
        w.matvec(phi)?
    };
    PredicateScores::from_scores(scores)
}

/// Raw (pre-normalization) attention grid for a feature map.
///
/// The direct variant uses one shared head: `a_ij = relu(w_att . h_ij + b)`.
/// The context-aware variant generates the head per predicate from the
/// pair code: `a_ij = relu((w_att_bar_p + V_att_p * code) . h_ij + b)`.
pub fn attention_values(
    params: &ModelParams,
    fm: &FeatureMap,
    p: usize,
    code: Option<&[f64]>,
) -> Result<Matrix> {
    let kind = params.config.kind;
    if fm.channels() != params.config.feature_dim {
        return Err(Error::DimensionMismatch {
            op: "attention_values",
            left: format!("feature map with {} channels", fm.channels()),
            right: format!("configured feature_dim {}", params.config.feature_dim),
        });
    }
    let b = params.b_att.ok_or(Error::WrongKind {
        op: "attention_values",
        kind: kind.to_string(),
    })?;
    let head: Vec<f64> = match kind {
        ModelKind::AppContextAttention => params
            .w_att
            .clone()
            .expect("direct attention weight allocated for this kind"),
        ModelKind::AppContextContextAttention => {
            let code = code.ok_or_else(|| Error::MissingContext(kind.to_string()))?;
            let (w_att_bar, v_att) = (
                params.w_att_bar.as_ref().expect("allocated"),
                params.v_att.as_ref().expect("allocated"),
            );
            if p >= params.config.predicates {
                return Err(Error::ClassOutOfRange {
                    index: p,
                    len: params.config.predicates,
                });
            }
            let mut w = v_att[p].matvec(code)?;
            for (wi, base) in w.iter_mut().zip(w_att_bar.row(p)) {
                *wi += base;
            }
            w
        }
        _ => {
            return Err(Error::WrongKind {
                op: "attention_values",
                kind: kind.to_string(),
            })
        }
    };
    let mut a = Matrix::zeros(fm.height(), fm.width());
    for i in 0..fm.height() {
        for j in 0..fm.width() {
            let t = dot(&head, fm.fiber(i, j))? + b;
            a.set(i, j, if t > 0.0 { t } else { 0.0 });
        }
    }
    Ok(a)
}

/// Normalize a nonnegative attention grid into weights that sum to one:
/// `norm_ij = (a_ij + eps) / sum_kl (a_kl + eps)`.
pub fn normalize_attention(a: &Matrix, eps: f64) -> Result<Matrix> {
    if !(eps > 0.0) {
        return Err(Error::Precondition(
            "attention stabilizer eps must be positive".to_string(),
        ));
    }
    if a.data().iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition(
            "attention values must be nonnegative".to_string(),
        ));
    }
    let total: f64 = a.data().iter().map(|&v| v + eps).sum();
    Ok(Matrix::from_fn(a.rows(), a.cols(), |i, j| {
        (a.get(i, j) + eps) / total
    }))
}

/// Attention-weighted pooling of a feature map:
/// `pooled = (1/(M*N)) * sum_ij norm_ij * h_ij`, with `norm` the
/// normalized grid from [`normalize_attention`]. The leading `1/(M*N)`
/// factor is part of the pooling definition and is kept exactly as
/// specified; it uniformly rescales the pooled feature.
pub fn attention_pool(fm: &FeatureMap, a: &Matrix, eps: f64) -> Result<Vec<f64>> {
    if a.rows() != fm.height() || a.cols() != fm.width() {
        return Err(Error::DimensionMismatch {
            op: "attention_pool",
            left: format!("attention grid {}x{}", a.rows(), a.cols()),
            right: format!("feature map {}x{}", fm.height(), fm.width()),
        });
    }
    let norm = normalize_attention(a, eps)?;
    let cells = (fm.height() * fm.width()) as f64;
    let mut pooled = vec![0.0; fm.channels()];
    for i in 0..fm.height() {
        for j in 0..fm.width() {
            let w = norm.get(i, j) / cells;
            for (o, h) in pooled.iter_mut().zip(fm.fiber(i, j)) {
                *o += w * h;
            }
        }
    }
    Ok(pooled)
}

/// Full forward pass from an input feature to predicate scores, given a
/// precomputed pair code (required for context-aware kinds).
pub fn forward(
    params: &ModelParams,
    input: &ModelInput<'_>,
    code: Option<&[f64]>,
) -> Result<PredicateScores> {
    let kind = params.config.kind;
    match (kind.takes_spatial(), input) {
        (true, ModelInput::Spatial(phi)) => score_predicates(params, phi, code),
        (false, ModelInput::Map(fm)) => {
            if fm.channels() != params.config.feature_dim {
                return Err(Error::DimensionMismatch {
                    op: "forward",
                    left: format!("feature map with {} channels", fm.channels()),
                    right: format!("configured feature_dim {}", params.config.feature_dim),
                });
            }
            match kind {
                ModelKind::Baseline1App | ModelKind::Baseline2App | ModelKind::AppContext => {
                    let phi = fm.mean_pool();
                    score_predicates(params, &phi, code)
                }
                ModelKind::AppContextAttention => {
                    let a = attention_values(params, fm, 0, code)?;
                    let phi = attention_pool(fm, &a, params.config.pool_epsilon)?;
                    score_predicates(params, &phi, code)
                }
                ModelKind::AppContextContextAttention => {
                    let code = code.ok_or_else(|| Error::MissingContext(kind.to_string()))?;
                    let mut scores = Vec::with_capacity(params.config.predicates);
                    for p in 0..params.config.predicates {
                        let a = attention_values(params, fm, p, Some(code))?;
                        let pooled = attention_pool(fm, &a, params.config.pool_epsilon)?;
                        let w = context_classifier(params, p, code)?;
                        scores.push(dot(&w, &pooled)?);
                    }
                    PredicateScores::from_scores(scores)
                }
                _ => unreachable!("spatial kinds handled above"),
            }
        }
        (true, ModelInput::Map(_)) => Err(Error::FeatureVariantMismatch {
            kind: kind.to_string(),
            expected: "spatial vector",
        }),
        (false, ModelInput::Spatial(_)) => Err(Error::FeatureVariantMismatch {
            kind: kind.to_string(),
            expected: "feature map",
        }),
    }
}

/// Compute the pair code `relu(Q z)` from the raw pair embedding.
pub(crate) fn compute_code(params: &ModelParams, z: &[f64]) -> Result<Vec<f64>> {
    let q = params.q.as_ref().ok_or(Error::WrongKind {
        op: "compute_code",
        kind: params.config.kind.to_string(),
    })?;
    if z.len() != q.cols() {
        return Err(Error::DimensionMismatch {
            op: "compute_code",
            left: format!("pair embedding of length {}", z.len()),
            right: format!("projection {}x{}", q.rows(), q.cols()),
        });
    }
    Ok(relu(&q.matvec(z)?))
}

/// Forward pass from the raw pair embedding `z` (length `2e`): the code is
/// derived through the current projection, so this is the entry point used
/// while `Q` is still being trained. Baselines ignore `z`.
pub fn forward_pair(
    params: &ModelParams,
    input: &ModelInput<'_>,
    z: Option<&[f64]>,
) -> Result<PredicateScores> {
    if params.config.kind.uses_context() {
        let z = z.ok_or_else(|| Error::MissingContext(params.config.kind.to_string()))?;
        let code = compute_code(params, z)?;
        forward(params, input, Some(&code))
    } else {
        forward(params, input, None)
    }
}
