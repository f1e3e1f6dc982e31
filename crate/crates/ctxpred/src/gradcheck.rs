//! Finite-difference verification of the hand-derived gradients.
//!
//! For each model kind, random small instances are drawn, the analytic
//! gradient of the cross-entropy loss is computed with the backward
//! pass, and every parameter coordinate is compared against a central
//! finite difference of the forward pass. Instances whose relu inputs
//! sit too close to the kink are resampled, since the two-sided secant
//! straddles the nondifferentiable point there and disagrees with any
//! one-sided derivative convention.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::model::{
    backward, forward_pair, ModelConfig, ModelGrads, ModelInput, ModelKind, ModelParams,
    ALL_KINDS,
};
use crate::numcore::{cross_entropy_with_grad, dot, finite_diff_grad, rel_error, relu, DEFAULT_FD_STEP};
use crate::train::TrainFeature;

/// Resample when any relu input is closer to 0 than this (ten times the
/// default finite-difference step).
pub const KINK_MARGIN: f64 = 1e-4;

/// Settings for one verification run.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Random instances per model kind.
    pub instances: usize,
    /// Maximum tolerated relative error per coordinate.
    pub tolerance: f64,
    pub seed: u64,
    pub fd_step: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            instances: 20,
            tolerance: 1e-5,
            seed: 0,
            fd_step: DEFAULT_FD_STEP,
        }
    }
}

/// Outcome of checking one model kind.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub kind: ModelKind,
    pub instances: usize,
    pub worst_rel_error: f64,
    /// Tensor holding the worst coordinate.
    pub worst_tensor: String,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn render_line(&self) -> String {
        format!(
            "{}: {} instances, worst rel error {:.3e} in {}: {}",
            self.kind,
            self.instances,
            self.worst_rel_error,
            self.worst_tensor,
            if self.passed { "pass" } else { "FAIL" }
        )
    }
}

/// One randomly drawn check problem.
struct CheckInstance {
    params: ModelParams,
    feature: TrainFeature,
    z: Option<Vec<f64>>,
    label: usize,
}

fn fill_uniform(params: &mut ModelParams, rng: &mut ChaCha8Rng) {
    // The 0.01-std training initialization would leave most gradients
    // under the rel_error floor; larger weights make the check sharp.
    for view in params.tensor_views_mut() {
        for v in view.iter_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
    }
}

fn random_instance(kind: ModelKind, rng: &mut ChaCha8Rng) -> Result<CheckInstance> {
    let predicates = rng.random_range(2..=6);
    let code_dim = rng.random_range(1..=6);
    let embed_dim = rng.random_range(1..=3);
    let combos = rng.random_range(2..=6);
    let (feature_dim, feature) = if kind.takes_spatial() {
        let d = rng.random_range(1..=6);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        (d, TrainFeature::Spatial(x))
    } else {
        let channels = rng.random_range(1..=6);
        let m = rng.random_range(1..=3);
        let n = rng.random_range(1..=3);
        let fm = FeatureMap::from_fn(m, n, channels, |_, _, _| rng.random_range(-1.0..1.0))?;
        (channels, TrainFeature::Map(fm))
    };
    let config = ModelConfig::new(kind, predicates, feature_dim)
        .with_code_dim(code_dim)
        .with_embed_dim(embed_dim)
        .with_combos(combos);
    let mut params = ModelParams::zeros(config)?;
    fill_uniform(&mut params, rng);
    let z = kind
        .uses_context()
        .then(|| (0..2 * embed_dim).map(|_| rng.random_range(-1.0..1.0)).collect());
    let label = rng.random_range(0..config.score_classes());
    Ok(CheckInstance {
        params,
        feature,
        z,
        label,
    })
}

/// Distance from the nearest relu kink across the context code and all
/// attention preactivations; infinite for kink-free kinds.
fn min_kink_distance(inst: &CheckInstance) -> Result<f64> {
    let params = &inst.params;
    let mut dmin = f64::INFINITY;
    let mut code = Vec::new();
    if let (Some(q), Some(z)) = (&params.q, &inst.z) {
        let pre = q.matvec(z)?;
        for v in &pre {
            dmin = dmin.min(v.abs());
        }
        code = relu(&pre);
    }
    if params.config.kind.uses_attention() {
        let fm = match &inst.feature {
            TrainFeature::Map(fm) => fm,
            TrainFeature::Spatial(_) => return Ok(dmin),
        };
        let b = params.b_att.expect("attention kinds carry a bias");
        let heads: Vec<Vec<f64>> = if params.config.kind.uses_context_attention() {
            let w_att_bar = params.w_att_bar.as_ref().expect("allocated");
            let v_att = params.v_att.as_ref().expect("allocated");
            let mut heads = Vec::with_capacity(params.config.predicates);
            for p in 0..params.config.predicates {
                let mut head = w_att_bar.row(p).to_vec();
                for (h, g) in head.iter_mut().zip(v_att[p].matvec(&code)?) {
                    *h += g;
                }
                heads.push(head);
            }
            heads
        } else {
            vec![params.w_att.clone().expect("allocated")]
        };
        for head in &heads {
            for i in 0..fm.height() {
                for j in 0..fm.width() {
                    let pre = dot(head, fm.fiber(i, j))? + b;
                    dmin = dmin.min(pre.abs());
                }
            }
        }
    }
    Ok(dmin)
}

/// Compare an analytic gradient against central finite differences of
/// the forward loss, returning the worst relative error and the tensor
/// holding it.
pub fn compare_to_fd(
    params: &ModelParams,
    input: &ModelInput<'_>,
    z: Option<&[f64]>,
    label: usize,
    grads: &ModelGrads,
    fd_step: f64,
) -> Result<(f64, String)> {
    let flat: Vec<f64> = params
        .tensor_views()
        .iter()
        .flat_map(|v| v.iter().copied())
        .collect();
    let base = params.clone();
    let mut failure = None;
    let mut f = |x: &[f64]| -> f64 {
        let mut p = base.clone();
        let mut off = 0;
        for view in p.tensor_views_mut() {
            view.copy_from_slice(&x[off..off + view.len()]);
            off += view.len();
        }
        match forward_pair(&p, input, z)
            .and_then(|s| cross_entropy_with_grad(&s.scores, label))
        {
            Ok((loss, _)) => loss,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        }
    };
    let numeric = finite_diff_grad(&mut f, &flat, fd_step);
    if let Some(e) = failure {
        return Err(e);
    }
    let labels = params.tensor_labels();
    let mut worst = 0.0;
    let mut worst_tensor = String::from("none");
    let mut off = 0;
    for (view, label) in grads.tensor_views().iter().zip(&labels) {
        for (i, &a) in view.iter().enumerate() {
            let err = rel_error(a, numeric[off + i]);
            if err > worst {
                worst = err;
                worst_tensor = label.clone();
            }
        }
        off += view.len();
    }
    Ok((worst, worst_tensor))
}

/// Verify one model kind on seeded random instances.
pub fn check_kind(kind: ModelKind, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    if cfg.instances == 0 || !(cfg.tolerance > 0.0) || !(cfg.fd_step > 0.0) {
        return Err(Error::InvalidConfig(
            "gradcheck needs instances >= 1 and positive tolerance and step".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(u64::from(kind.tag())));
    let mut worst = 0.0;
    let mut worst_tensor = String::from("none");
    for _ in 0..cfg.instances {
        let inst = loop {
            let candidate = random_instance(kind, &mut rng)?;
            if min_kink_distance(&candidate)? >= KINK_MARGIN {
                break candidate;
            }
        };
        let input = inst.feature.as_input();
        let mut grads = ModelGrads::zeros_like(&inst.params);
        backward(
            &inst.params,
            &input,
            inst.z.as_deref(),
            inst.label,
            &mut grads,
        )?;
        let (err, tensor) =
            compare_to_fd(&inst.params, &input, inst.z.as_deref(), inst.label, &grads, cfg.fd_step)?;
        if err > worst {
            worst = err;
            worst_tensor = tensor;
        }
    }
    Ok(GradCheckReport {
        kind,
        instances: cfg.instances,
        worst_rel_error: worst,
        worst_tensor,
        passed: worst < cfg.tolerance,
    })
}

/// Verify every model kind; reports come back in declaration order.
pub fn check_all(cfg: &GradCheckConfig) -> Result<Vec<GradCheckReport>> {
    ALL_KINDS.iter().map(|&kind| check_kind(kind, cfg)).collect()
}
