//! Analytic parameter gradients of the cross-entropy loss.
//!
//! The backward pass recomputes the forward quantities it needs and
//! accumulates gradients into the caller's buffers, so one buffer set can
//! collect a whole mini-batch. Derivative conventions: ReLU's derivative
//! at exactly zero is taken as zero, and the shared projection `Q`
//! receives contributions from both the classifier branch and (for the
//! generated-attention kind) the attention branch.

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::model::scoring::{compute_code, ModelInput};
use crate::model::{ModelGrads, ModelKind, ModelParams};
use crate::numcore::{cross_entropy_with_grad, dot, Matrix};

/// Accumulate the gradients of the loss for one labelled instance into
/// `grads` and return the loss value.
///
/// `z` is the raw pair embedding (length `2e`); context-aware kinds
/// require it and derive the code through the current projection.
pub fn backward(
    params: &ModelParams,
    input: &ModelInput<'_>,
    z: Option<&[f64]>,
    label: usize,
    grads: &mut ModelGrads,
) -> Result<f64> {
    let kind = params.config.kind;
    match kind {
        ModelKind::Baseline1App
        | ModelKind::Baseline1Spatial
        | ModelKind::Baseline2App
        | ModelKind::Baseline2Spatial => backward_baseline(params, input, label, grads),
        ModelKind::SpatialContext | ModelKind::AppContext => {
            backward_context_plain(params, input, z, label, grads)
        }
        ModelKind::AppContextAttention => backward_direct_attention(params, input, z, label, grads),
        ModelKind::AppContextContextAttention => {
            backward_generated_attention(params, input, z, label, grads)
        }
    }
}

fn spatial_input<'a>(params: &ModelParams, input: &ModelInput<'a>) -> Result<&'a [f64]> {
    match input {
        ModelInput::Spatial(phi) => {
            if phi.len() != params.config.feature_dim {
                return Err(Error::DimensionMismatch {
                    op: "backward",
                    left: format!("feature of length {}", phi.len()),
                    right: format!("configured feature_dim {}", params.config.feature_dim),
                });
            }
            Ok(phi)
        }
        ModelInput::Map(_) => Err(Error::FeatureVariantMismatch {
            kind: params.config.kind.to_string(),
            expected: "spatial vector",
        }),
    }
}

fn map_input<'a>(params: &ModelParams, input: &ModelInput<'a>) -> Result<&'a FeatureMap> {
    match input {
        ModelInput::Map(fm) => {
            if fm.channels() != params.config.feature_dim {
                return Err(Error::DimensionMismatch {
                    op: "backward",
                    left: format!("feature map with {} channels", fm.channels()),
                    right: format!("configured feature_dim {}", params.config.feature_dim),
                });
            }
            Ok(fm)
        }
        ModelInput::Spatial(_) => Err(Error::FeatureVariantMismatch {
            kind: params.config.kind.to_string(),
            expected: "feature map",
        }),
    }
}

/// Pair code plus the quantities needed to push gradients through it.
struct CodePath {
    z: Vec<f64>,
    /// Pre-activation `Q z`; the ReLU mask is derived from it.
    pre: Vec<f64>,
    /// Post-activation code `relu(Q z)`.
    code: Vec<f64>,
}

fn code_path(params: &ModelParams, z: Option<&[f64]>) -> Result<CodePath> {
    let z = z.ok_or_else(|| Error::MissingContext(params.config.kind.to_string()))?;
    let q = params.q.as_ref().expect("context kinds allocate q");
    if z.len() != q.cols() {
        return Err(Error::DimensionMismatch {
            op: "backward",
            left: format!("pair embedding of length {}", z.len()),
            right: format!("projection {}x{}", q.rows(), q.cols()),
        });
    }
    let pre = q.matvec(z)?;
    let code = compute_code(params, z)?;
    Ok(CodePath {
        z: z.to_vec(),
        pre,
        code,
    })
}

/// Fold `d(loss)/d(code)` back through the ReLU and the projection.
fn accumulate_code_grads(path: &CodePath, d_code: &[f64], grads: &mut ModelGrads) {
    let gq = grads.q.as_mut().expect("context kinds allocate q grads");
    for k in 0..d_code.len() {
        if path.pre[k] > 0.0 {
            let d_pre = d_code[k];
            let row = gq.row_mut(k);
            for (g, zi) in row.iter_mut().zip(&path.z) {
                *g += d_pre * zi;
            }
        }
    }
}

fn backward_baseline(
    params: &ModelParams,
    input: &ModelInput<'_>,
    label: usize,
    grads: &mut ModelGrads,
) -> Result<f64> {
    let phi: Vec<f64> = if params.config.kind.takes_spatial() {
        spatial_input(params, input)?.to_vec()
    } else {
        map_input(params, input)?.mean_pool()
    };
    let w = params.w_flat.as_ref().expect("baselines allocate w_flat");
    let scores = w.matvec(&phi)?;
    let (loss, g) = cross_entropy_with_grad(&scores, label)?;
    let gw = grads.w_flat.as_mut().expect("baseline grads allocated");
    gw.add_outer(1.0, &g, &phi);
    Ok(loss)
}

fn backward_context_plain(
    params: &ModelParams,
    input: &ModelInput<'_>,
    z: Option<&[f64]>,
    label: usize,
    grads: &mut ModelGrads,
) -> Result<f64> {
    let phi: Vec<f64> = if params.config.kind.takes_spatial() {
        spatial_input(params, input)?.to_vec()
    } else {
        map_input(params, input)?.mean_pool()
    };
    let path = code_path(params, z)?;
    let (w_bar, v) = (
        params.w_bar.as_ref().expect("allocated"),
        params.v.as_ref().expect("allocated"),
    );
    let p_count = params.config.predicates;
    let mut scores = Vec::with_capacity(p_count);
    for p in 0..p_count {
        let mut w = v[p].matvec(&path.code)?;
        for (wi, base) in w.iter_mut().zip(w_bar.row(p)) {
            *wi += base;
        }
        scores.push(dot(&w, &phi)?);
    }
    let (loss, g) = cross_entropy_with_grad(&scores, label)?;

    let mut d_code = vec![0.0; params.config.code_dim];
    {
        let gw_bar = grads.w_bar.as_mut().expect("allocated");
        let gv = grads.v.as_mut().expect("allocated");
        for p in 0..p_count {
            let gp = g[p];
            for (gw, phi_i) in gw_bar.row_mut(p).iter_mut().zip(&phi) {
                *gw += gp * phi_i;
            }
            gv[p].add_outer(gp, &phi, &path.code);
            // d(code) += g_p * V_p^T phi
            let vt_phi = v[p].matvec_transpose(&phi)?;
            for (dc, t) in d_code.iter_mut().zip(&vt_phi) {
                *dc += gp * t;
            }
        }
    }
    accumulate_code_grads(&path, &d_code, grads);
    Ok(loss)
}

/// Shared attention-pool machinery: raw pre-activations, clamped values,
/// normalized weights and the pooled feature for one head.
struct PooledHead {
    /// Pre-activation grid `head . h_ij + b`.
    pre: Matrix,
    /// Normalized weights including the stabilizer.
    norm: Matrix,
    /// Total mass `sum_kl (a_kl + eps)`.
    total: f64,
    /// Pooled feature `(1/(M*N)) sum norm_ij h_ij`.
    pooled: Vec<f64>,
}

fn pool_head(fm: &FeatureMap, head: &[f64], bias: f64, eps: f64) -> Result<PooledHead> {
    let (m, n, c) = (fm.height(), fm.width(), fm.channels());
    let mut pre = Matrix::zeros(m, n);
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..n {
            let t = dot(head, fm.fiber(i, j))? + bias;
            pre.set(i, j, t);
            total += (if t > 0.0 { t } else { 0.0 }) + eps;
        }
    }
    let mut norm = Matrix::zeros(m, n);
    let mut pooled = vec![0.0; c];
    let cells = (m * n) as f64;
    for i in 0..m {
        for j in 0..n {
            let t = pre.get(i, j);
            let a = if t > 0.0 { t } else { 0.0 };
            let w = (a + eps) / total;
            norm.set(i, j, w);
            for (o, h) in pooled.iter_mut().zip(fm.fiber(i, j)) {
                *o += (w / cells) * h;
            }
        }
    }
    Ok(PooledHead {
        pre,
        norm,
        total,
        pooled,
    })
}

/// Push `d(loss)/d(pooled)` back through the normalization quotient and
/// ReLU of one head. Returns `d(loss)/d(head)` and `d(loss)/d(bias)`.
fn head_grads(fm: &FeatureMap, head_state: &PooledHead, d_pooled: &[f64]) -> (Vec<f64>, f64) {
    let (m, n, c) = (fm.height(), fm.width(), fm.channels());
    let cells = (m * n) as f64;
    // d(loss)/d(norm_ij), before the quotient rule.
    let mut c_grid = Matrix::zeros(m, n);
    let mut inner = 0.0;
    for i in 0..m {
        for j in 0..n {
            let mut cij = 0.0;
            for (dp, h) in d_pooled.iter().zip(fm.fiber(i, j)) {
                cij += dp * h;
            }
            cij /= cells;
            c_grid.set(i, j, cij);
            inner += cij * head_state.norm.get(i, j);
        }
    }
    let mut d_head = vec![0.0; c];
    let mut d_bias = 0.0;
    for i in 0..m {
        for j in 0..n {
            // Quotient rule through norm = (a + eps) / total.
            let da = (c_grid.get(i, j) - inner) / head_state.total;
            if head_state.pre.get(i, j) > 0.0 {
                d_bias += da;
                for (dh, h) in d_head.iter_mut().zip(fm.fiber(i, j)) {
                    *dh += da * h;
                }
            }
        }
    }
    (d_head, d_bias)
}

fn backward_direct_attention(
    params: &ModelParams,
    input: &ModelInput<'_>,
    z: Option<&[f64]>,
    label: usize,
    grads: &mut ModelGrads,
) -> Result<f64> {
    let fm = map_input(params, input)?;
    let path = code_path(params, z)?;
    let (w_bar, v) = (
        params.w_bar.as_ref().expect("allocated"),
        params.v.as_ref().expect("allocated"),
    );
    let w_att = params.w_att.as_ref().expect("allocated");
    let bias = params.b_att.expect("allocated");
    let eps = params.config.pool_epsilon;
    let head_state = pool_head(fm, w_att, bias, eps)?;
    let phi = &head_state.pooled;

    let p_count = params.config.predicates;
    let mut rows = Vec::with_capacity(p_count);
    let mut scores = Vec::with_capacity(p_count);
    for p in 0..p_count {
        let mut w = v[p].matvec(&path.code)?;
        for (wi, base) in w.iter_mut().zip(w_bar.row(p)) {
            *wi += base;
        }
        scores.push(dot(&w, phi)?);
        rows.push(w);
    }
    let (loss, g) = cross_entropy_with_grad(&scores, label)?;

    let mut d_code = vec![0.0; params.config.code_dim];
    let mut d_pooled = vec![0.0; params.config.feature_dim];
    {
        let gw_bar = grads.w_bar.as_mut().expect("allocated");
        let gv = grads.v.as_mut().expect("allocated");
        for p in 0..p_count {
            let gp = g[p];
            for (gw, phi_i) in gw_bar.row_mut(p).iter_mut().zip(phi) {
                *gw += gp * phi_i;
            }
            gv[p].add_outer(gp, phi, &path.code);
            let vt_phi = v[p].matvec_transpose(phi)?;
            for (dc, t) in d_code.iter_mut().zip(&vt_phi) {
                *dc += gp * t;
            }
            for (dp, wi) in d_pooled.iter_mut().zip(&rows[p]) {
                *dp += gp * wi;
            }
        }
    }
    let (d_head, d_bias) = head_grads(fm, &head_state, &d_pooled);
    for (g_w, dh) in grads
        .w_att
        .as_mut()
        .expect("allocated")
        .iter_mut()
        .zip(&d_head)
    {
        *g_w += dh;
    }
    *grads.b_att.as_mut().expect("allocated") += d_bias;
    accumulate_code_grads(&path, &d_code, grads);
    Ok(loss)
}

fn backward_generated_attention(
    params: &ModelParams,
    input: &ModelInput<'_>,
    z: Option<&[f64]>,
    label: usize,
    grads: &mut ModelGrads,
) -> Result<f64> {
    let fm = map_input(params, input)?;
    let path = code_path(params, z)?;
    let (w_bar, v) = (
        params.w_bar.as_ref().expect("allocated"),
        params.v.as_ref().expect("allocated"),
    );
    let (w_att_bar, v_att) = (
        params.w_att_bar.as_ref().expect("allocated"),
        params.v_att.as_ref().expect("allocated"),
    );
    let bias = params.b_att.expect("allocated");
    let eps = params.config.pool_epsilon;
    let p_count = params.config.predicates;

    let mut heads = Vec::with_capacity(p_count);
    let mut head_states = Vec::with_capacity(p_count);
    let mut rows = Vec::with_capacity(p_count);
    let mut scores = Vec::with_capacity(p_count);
    for p in 0..p_count {
        let mut head = v_att[p].matvec(&path.code)?;
        for (hi, base) in head.iter_mut().zip(w_att_bar.row(p)) {
            *hi += base;
        }
        let state = pool_head(fm, &head, bias, eps)?;
        let mut w = v[p].matvec(&path.code)?;
        for (wi, base) in w.iter_mut().zip(w_bar.row(p)) {
            *wi += base;
        }
        scores.push(dot(&w, &state.pooled)?);
        heads.push(head);
        head_states.push(state);
        rows.push(w);
    }
    let (loss, g) = cross_entropy_with_grad(&scores, label)?;

    let mut d_code = vec![0.0; params.config.code_dim];
    for p in 0..p_count {
        let gp = g[p];
        let pooled = &head_states[p].pooled;
        {
            let gw_bar = grads.w_bar.as_mut().expect("allocated");
            for (gw, phi_i) in gw_bar.row_mut(p).iter_mut().zip(pooled) {
                *gw += gp * phi_i;
            }
            grads.v.as_mut().expect("allocated")[p].add_outer(gp, pooled, &path.code);
        }
        let vt_phi = v[p].matvec_transpose(pooled)?;
        for (dc, t) in d_code.iter_mut().zip(&vt_phi) {
            *dc += gp * t;
        }
        // Attention branch for this predicate's head.
        let d_pooled: Vec<f64> = rows[p].iter().map(|wi| gp * wi).collect();
        let (d_head, d_bias) = head_grads(fm, &head_states[p], &d_pooled);
        {
            let gw_att_bar = grads.w_att_bar.as_mut().expect("allocated");
            for (gw, dh) in gw_att_bar.row_mut(p).iter_mut().zip(&d_head) {
                *gw += dh;
            }
            grads.v_att.as_mut().expect("allocated")[p].add_outer(1.0, &d_head, &path.code);
            *grads.b_att.as_mut().expect("allocated") += d_bias;
        }
        // The generated head also depends on the code.
        let vt_dhead = v_att[p].matvec_transpose(&d_head)?;
        for (dc, t) in d_code.iter_mut().zip(&vt_dhead) {
            *dc += t;
        }
    }
    accumulate_code_grads(&path, &d_code, grads);
    Ok(loss)
}
