//! The model family: context-aware predicate classifiers, attention
//! pooling, and the context-free baselines.
//!
//! A context-aware classifier scores predicate `p` with a weight vector
//! assembled per subject/object pair: `w_p = w_bar_p + V_p * s`, where
//! `s = relu(Q * z)` is the code of the pair embedding `z`. The per-pair
//! term lets the same predicate carve different decision boundaries in
//! different contexts while parameter count stays independent of how many
//! (subject, object) combinations appear in training.
//!
//! Attention variants replace mean pooling of a feature map with a learned
//! weighting; the context-aware attention variant additionally generates
//! the attention weights themselves from the pair code.

mod checkpoint;
mod combo;
mod gradients;
mod scoring;

pub use combo::ComboTable;
pub use gradients::backward;
pub use scoring::{
    attention_pool, attention_values, context_classifier, forward, forward_pair,
    normalize_attention, score_predicates, ModelInput,
};

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numcore::{softmax, Matrix};

/// Which of the eight classifier variants a model instance implements.
///
/// The four baselines are context-free: `Baseline1*` trains one weight row
/// per predicate, `Baseline2*` one row per distinct training triplet type.
/// The remaining kinds generate per-pair classifier weights; the `App*`
/// ones consume feature maps, `SpatialContext` the 14-dim geometry vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Baseline1App,
    Baseline1Spatial,
    Baseline2App,
    Baseline2Spatial,
    SpatialContext,
    AppContext,
    AppContextAttention,
    AppContextContextAttention,
}

/// All kinds, in the order used by reports and checkpoint tags.
pub const ALL_KINDS: [ModelKind; 8] = [
    ModelKind::Baseline1App,
    ModelKind::Baseline1Spatial,
    ModelKind::Baseline2App,
    ModelKind::Baseline2Spatial,
    ModelKind::SpatialContext,
    ModelKind::AppContext,
    ModelKind::AppContextAttention,
    ModelKind::AppContextContextAttention,
];

impl ModelKind {
    /// Canonical lowercase name, used in reports, checkpoints and the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Baseline1App => "baseline1-app",
            ModelKind::Baseline1Spatial => "baseline1-spatial",
            ModelKind::Baseline2App => "baseline2-app",
            ModelKind::Baseline2Spatial => "baseline2-spatial",
            ModelKind::SpatialContext => "spatial+c",
            ModelKind::AppContext => "ap+c",
            ModelKind::AppContextAttention => "ap+c+at",
            ModelKind::AppContextContextAttention => "ap+c+cat",
        }
    }

    /// Parse a kind name; accepts the canonical names plus compact
    /// punctuation-free aliases such as `apccat` or `spatialc`.
    pub fn parse(name: &str) -> Result<Self> {
        let key: String = name
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        let kind = match key.as_str() {
            "baseline1app" | "b1app" => ModelKind::Baseline1App,
            "baseline1spatial" | "b1spatial" => ModelKind::Baseline1Spatial,
            "baseline2app" | "b2app" => ModelKind::Baseline2App,
            "baseline2spatial" | "b2spatial" => ModelKind::Baseline2Spatial,
            "spatialc" => ModelKind::SpatialContext,
            "apc" => ModelKind::AppContext,
            "apcat" => ModelKind::AppContextAttention,
            "apccat" => ModelKind::AppContextContextAttention,
            _ => return Err(Error::UnknownModelKind(name.to_string())),
        };
        Ok(kind)
    }

    /// Integer tag used in checkpoint headers.
    pub fn tag(&self) -> u32 {
        ALL_KINDS
            .iter()
            .position(|k| k == self)
            .expect("kind is in ALL_KINDS") as u32
    }

    pub fn from_tag(tag: u32) -> Result<Self> {
        ALL_KINDS
            .get(tag as usize)
            .copied()
            .ok_or_else(|| Error::UnknownModelKind(format!("checkpoint tag {tag}")))
    }

    /// Kinds that generate classifier weights from the pair code.
    pub fn uses_context(&self) -> bool {
        matches!(
            self,
            ModelKind::SpatialContext
                | ModelKind::AppContext
                | ModelKind::AppContextAttention
                | ModelKind::AppContextContextAttention
        )
    }

    pub fn is_baseline1(&self) -> bool {
        matches!(self, ModelKind::Baseline1App | ModelKind::Baseline1Spatial)
    }

    pub fn is_baseline2(&self) -> bool {
        matches!(self, ModelKind::Baseline2App | ModelKind::Baseline2Spatial)
    }

    /// Kinds whose input is the 14-dim spatial vector rather than a map.
    pub fn takes_spatial(&self) -> bool {
        matches!(
            self,
            ModelKind::Baseline1Spatial | ModelKind::Baseline2Spatial | ModelKind::SpatialContext
        )
    }

    pub fn uses_attention(&self) -> bool {
        matches!(
            self,
            ModelKind::AppContextAttention | ModelKind::AppContextContextAttention
        )
    }

    pub fn uses_context_attention(&self) -> bool {
        matches!(self, ModelKind::AppContextContextAttention)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Shape configuration shared by parameters, training and checkpoints.
///
/// `feature_dim` is the length of the classified feature vector: 14 for
/// spatial kinds, the channel count of the feature maps for appearance
/// kinds (attention weights share this length).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Number of predicate classes P.
    pub predicates: usize,
    /// Length d of the feature vector each classifier row consumes.
    pub feature_dim: usize,
    /// Code dimension m of the projected pair embedding.
    pub code_dim: usize,
    /// Word-embedding dimension e; pair embeddings have length 2e.
    pub embed_dim: usize,
    /// Number K of distinct training triplet types (Baseline2 only).
    pub combos: usize,
    /// Stabilizer added to attention values before normalization.
    pub pool_epsilon: f64,
}

/// Default code dimension for the projected pair embedding.
pub const DEFAULT_CODE_DIM: usize = 20;
/// Default attention-pool stabilizer.
pub const DEFAULT_POOL_EPSILON: f64 = 1e-8;

impl ModelConfig {
    pub fn new(kind: ModelKind, predicates: usize, feature_dim: usize) -> Self {
        ModelConfig {
            kind,
            predicates,
            feature_dim,
            code_dim: DEFAULT_CODE_DIM,
            embed_dim: 0,
            combos: 0,
            pool_epsilon: DEFAULT_POOL_EPSILON,
        }
    }

    pub fn with_code_dim(mut self, m: usize) -> Self {
        self.code_dim = m;
        self
    }

    pub fn with_embed_dim(mut self, e: usize) -> Self {
        self.embed_dim = e;
        self
    }

    pub fn with_combos(mut self, k: usize) -> Self {
        self.combos = k;
        self
    }

    pub fn with_pool_epsilon(mut self, eps: f64) -> Self {
        self.pool_epsilon = eps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.predicates == 0 {
            return Err(Error::InvalidConfig("predicates must be >= 1".to_string()));
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidConfig("feature_dim must be >= 1".to_string()));
        }
        if self.kind.uses_context() && (self.code_dim == 0 || self.embed_dim == 0) {
            return Err(Error::InvalidConfig(format!(
                "kind {} needs code_dim and embed_dim >= 1",
                self.kind
            )));
        }
        if self.kind.is_baseline2() && self.combos == 0 {
            return Err(Error::InvalidConfig(
                "Baseline2 kinds need at least one training combination".to_string(),
            ));
        }
        if !(self.pool_epsilon > 0.0) {
            return Err(Error::InvalidConfig(
                "pool_epsilon must be positive".to_string(),
            ));
        }
        Ok(())
    }

    /// Number of rows in the score vector: K for Baseline2, else P.
    pub fn score_classes(&self) -> usize {
        if self.kind.is_baseline2() {
            self.combos
        } else {
            self.predicates
        }
    }
}

/// Learnable tensors. Only the tensors the configured kind actually uses
/// are allocated; the rest stay `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// Context-free classifier term, one row per predicate (P x d).
    pub w_bar: Option<Matrix>,
    /// Per-predicate weight generators, P matrices of shape d x m.
    pub v: Option<Vec<Matrix>>,
    /// Shared pair-embedding projection (m x 2e).
    pub q: Option<Matrix>,
    /// Context-free attention term, one row per predicate (P x c).
    pub w_att_bar: Option<Matrix>,
    /// Per-predicate attention generators, P matrices of shape c x m.
    pub v_att: Option<Vec<Matrix>>,
    /// Direct attention weight (c).
    pub w_att: Option<Vec<f64>>,
    /// Attention bias, one scalar shared by direct and generated heads.
    pub b_att: Option<f64>,
    /// Baseline classifier: P x d rows for Baseline1, K x d for Baseline2.
    pub w_flat: Option<Matrix>,
}

impl ModelParams {
    /// Allocate all tensors the kind needs, zero-filled.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (p, d, m, e) = (
            config.predicates,
            config.feature_dim,
            config.code_dim,
            config.embed_dim,
        );
        let kind = config.kind;
        let mut params = ModelParams {
            config,
            w_bar: None,
            v: None,
            q: None,
            w_att_bar: None,
            v_att: None,
            w_att: None,
            b_att: None,
            w_flat: None,
        };
        if kind.uses_context() {
            params.w_bar = Some(Matrix::zeros(p, d));
            params.v = Some((0..p).map(|_| Matrix::zeros(d, m)).collect());
            params.q = Some(Matrix::zeros(m, 2 * e));
        }
        if kind.uses_context_attention() {
            params.w_att_bar = Some(Matrix::zeros(p, d));
            params.v_att = Some((0..p).map(|_| Matrix::zeros(d, m)).collect());
        }
        if kind == ModelKind::AppContextAttention {
            params.w_att = Some(vec![0.0; d]);
        }
        if kind.uses_attention() {
            params.b_att = Some(0.0);
        }
        if kind.is_baseline1() {
            params.w_flat = Some(Matrix::zeros(p, d));
        }
        if kind.is_baseline2() {
            params.w_flat = Some(Matrix::zeros(config.combos, d));
        }
        Ok(params)
    }

    /// Seeded random initialization: generator and projection tensors get
    /// zero-mean Gaussian entries with standard deviation 0.01, additive
    /// base terms and the bias start at zero, and baseline classifier
    /// matrices get the same Gaussian treatment.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut params = ModelParams::zeros(config)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.01).expect("valid std");
        let mut fill = |slice: &mut [f64]| {
            for v in slice.iter_mut() {
                *v = normal.sample(&mut rng);
            }
        };
        if let Some(v) = params.v.as_mut() {
            for mat in v.iter_mut() {
                fill(mat.data_mut());
            }
        }
        if let Some(q) = params.q.as_mut() {
            fill(q.data_mut());
        }
        if let Some(v_att) = params.v_att.as_mut() {
            for mat in v_att.iter_mut() {
                fill(mat.data_mut());
            }
        }
        if let Some(w_att) = params.w_att.as_mut() {
            fill(w_att);
        }
        if let Some(w_flat) = params.w_flat.as_mut() {
            fill(w_flat.data_mut());
        }
        Ok(params)
    }

    /// Flat views over every allocated tensor, in the fixed order
    /// `w_bar, v[0..P], q, w_att_bar, v_att[0..P], w_att, b_att, w_flat`.
    /// Checkpoints, the optimizer and the gradient checker all iterate
    /// tensors in this order.
    pub fn tensor_views(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        if let Some(w) = &self.w_bar {
            out.push(w.data());
        }
        if let Some(v) = &self.v {
            for mat in v {
                out.push(mat.data());
            }
        }
        if let Some(q) = &self.q {
            out.push(q.data());
        }
        if let Some(w) = &self.w_att_bar {
            out.push(w.data());
        }
        if let Some(v) = &self.v_att {
            for mat in v {
                out.push(mat.data());
            }
        }
        if let Some(w) = &self.w_att {
            out.push(w.as_slice());
        }
        if let Some(b) = &self.b_att {
            out.push(std::slice::from_ref(b));
        }
        if let Some(w) = &self.w_flat {
            out.push(w.data());
        }
        out
    }

    pub fn tensor_views_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        if let Some(w) = self.w_bar.as_mut() {
            out.push(w.data_mut());
        }
        if let Some(v) = self.v.as_mut() {
            for mat in v.iter_mut() {
                out.push(mat.data_mut());
            }
        }
        if let Some(q) = self.q.as_mut() {
            out.push(q.data_mut());
        }
        if let Some(w) = self.w_att_bar.as_mut() {
            out.push(w.data_mut());
        }
        if let Some(v) = self.v_att.as_mut() {
            for mat in v.iter_mut() {
                out.push(mat.data_mut());
            }
        }
        if let Some(w) = self.w_att.as_mut() {
            out.push(w.as_mut_slice());
        }
        if let Some(b) = self.b_att.as_mut() {
            out.push(std::slice::from_mut(b));
        }
        if let Some(w) = self.w_flat.as_mut() {
            out.push(w.data_mut());
        }
        out
    }

    /// Human-readable labels aligned with [`ModelParams::tensor_views`].
    pub fn tensor_labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.w_bar.is_some() {
            out.push("w_bar".to_string());
        }
        if let Some(v) = &self.v {
            for p in 0..v.len() {
                out.push(format!("v[{p}]"));
            }
        }
        if self.q.is_some() {
            out.push("q".to_string());
        }
        if self.w_att_bar.is_some() {
            out.push("w_att_bar".to_string());
        }
        if let Some(v) = &self.v_att {
            for p in 0..v.len() {
                out.push(format!("v_att[{p}]"));
            }
        }
        if self.w_att.is_some() {
            out.push("w_att".to_string());
        }
        if self.b_att.is_some() {
            out.push("b_att".to_string());
        }
        if self.w_flat.is_some() {
            out.push("w_flat".to_string());
        }
        out
    }

    /// Total number of learnable scalars.
    pub fn param_count(&self) -> usize {
        self.tensor_views().iter().map(|t| t.len()).sum()
    }

    pub fn save(&self, writer: &mut impl std::io::Write) -> Result<()> {
        checkpoint::save(self, writer)
    }

    pub fn load(reader: &mut impl std::io::Read) -> Result<Self> {
        checkpoint::load(reader)
    }
}

/// Gradient buffers mirroring the allocated tensors of a [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub w_bar: Option<Matrix>,
    pub v: Option<Vec<Matrix>>,
    pub q: Option<Matrix>,
    pub w_att_bar: Option<Matrix>,
    pub v_att: Option<Vec<Matrix>>,
    pub w_att: Option<Vec<f64>>,
    pub b_att: Option<f64>,
    pub w_flat: Option<Matrix>,
}

impl ModelGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        let zero_mat = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        ModelGrads {
            w_bar: params.w_bar.as_ref().map(zero_mat),
            v: params
                .v
                .as_ref()
                .map(|v| v.iter().map(zero_mat).collect()),
            q: params.q.as_ref().map(zero_mat),
            w_att_bar: params.w_att_bar.as_ref().map(zero_mat),
            v_att: params
                .v_att
                .as_ref()
                .map(|v| v.iter().map(zero_mat).collect()),
            w_att: params.w_att.as_ref().map(|w| vec![0.0; w.len()]),
            b_att: params.b_att.map(|_| 0.0),
            w_flat: params.w_flat.as_ref().map(zero_mat),
        }
    }

    /// Reset all buffers to zero.
    pub fn clear(&mut self) {
        for view in self.tensor_views_mut() {
            for v in view.iter_mut() {
                *v = 0.0;
            }
        }
    }

    /// Multiply every buffer by `factor` (used for batch averaging).
    pub fn scale(&mut self, factor: f64) {
        for view in self.tensor_views_mut() {
            for v in view.iter_mut() {
                *v *= factor;
            }
        }
    }

    /// Flat views in the same fixed order as [`ModelParams::tensor_views`].
    pub fn tensor_views(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        if let Some(w) = &self.w_bar {
            out.push(w.data());
        }
        if let Some(v) = &self.v {
            for mat in v {
                out.push(mat.data());
            }
        }
        if let Some(q) = &self.q {
            out.push(q.data());
        }
        if let Some(w) = &self.w_att_bar {
            out.push(w.data());
        }
        if let Some(v) = &self.v_att {
            for mat in v {
                out.push(mat.data());
            }
        }
        if let Some(w) = &self.w_att {
            out.push(w.as_slice());
        }
        if let Some(b) = &self.b_att {
            out.push(std::slice::from_ref(b));
        }
        if let Some(w) = &self.w_flat {
            out.push(w.data());
        }
        out
    }

    pub fn tensor_views_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        if let Some(w) = self.w_bar.as_mut() {
            out.push(w.data_mut());
        }
        if let Some(v) = self.v.as_mut() {
            for mat in v.iter_mut() {
                out.push(mat.data_mut());
            }
        }
        if let Some(q) = self.q.as_mut() {
            out.push(q.data_mut());
        }
        if let Some(w) = self.w_att_bar.as_mut() {
            out.push(w.data_mut());
        }
        if let Some(v) = self.v_att.as_mut() {
            for mat in v.iter_mut() {
                out.push(mat.data_mut());
            }
        }
        if let Some(w) = self.w_att.as_mut() {
            out.push(w.as_mut_slice());
        }
        if let Some(b) = self.b_att.as_mut() {
            out.push(std::slice::from_mut(b));
        }
        if let Some(w) = self.w_flat.as_mut() {
            out.push(w.data_mut());
        }
        out
    }
}

/// Raw scores plus their softmax, one entry per predicate (or per
/// combination class for Baseline2 kinds).
#[derive(Debug, Clone, PartialEq)]
pub struct PredicateScores {
    pub scores: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl PredicateScores {
    pub fn from_scores(scores: Vec<f64>) -> Result<Self> {
        let probabilities = softmax(&scores)?;
        Ok(PredicateScores {
            scores,
            probabilities,
        })
    }

    /// Index of the highest-scoring class (first on ties).
    pub fn argmax(&self) -> usize {
        crate::numcore::argmax(&self.scores).expect("scores are non-empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx_config(kind: ModelKind) -> ModelConfig {
        ModelConfig::new(kind, 3, 4)
            .with_code_dim(5)
            .with_embed_dim(2)
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in ALL_KINDS {
            assert_eq!(ModelKind::parse(kind.name()).unwrap(), kind);
            assert_eq!(ModelKind::from_tag(kind.tag()).unwrap(), kind);
        }
        assert_eq!(
            ModelKind::parse("apccat").unwrap(),
            ModelKind::AppContextContextAttention
        );
        assert_eq!(ModelKind::parse("AP+C").unwrap(), ModelKind::AppContext);
        assert!(ModelKind::parse("mystery").is_err());
    }

    #[test]
    fn only_needed_tensors_are_allocated() {
        let b1 = ModelParams::zeros(ModelConfig::new(ModelKind::Baseline1Spatial, 3, 14)).unwrap();
        assert!(b1.w_flat.is_some());
        assert!(b1.w_bar.is_none() && b1.q.is_none() && b1.w_att.is_none());

        let sc = ModelParams::zeros(ctx_config(ModelKind::SpatialContext)).unwrap();
        assert!(sc.w_bar.is_some() && sc.v.is_some() && sc.q.is_some());
        assert!(sc.w_flat.is_none() && sc.w_att.is_none() && sc.b_att.is_none());

        let at = ModelParams::zeros(ctx_config(ModelKind::AppContextAttention)).unwrap();
        assert!(at.w_att.is_some() && at.b_att.is_some());
        assert!(at.w_att_bar.is_none() && at.v_att.is_none());

        let cat = ModelParams::zeros(ctx_config(ModelKind::AppContextContextAttention)).unwrap();
        assert!(cat.w_att_bar.is_some() && cat.v_att.is_some() && cat.b_att.is_some());
        assert!(cat.w_att.is_none());
    }

    #[test]
    fn param_counts_are_exact() {
        let (p, d, m, e) = (3usize, 4usize, 5usize, 2usize);
        let apc = ModelParams::zeros(
            ModelConfig::new(ModelKind::AppContext, p, d)
                .with_code_dim(m)
                .with_embed_dim(e),
        )
        .unwrap();
        assert_eq!(apc.param_count(), p * d + p * d * m + m * 2 * e);

        let k = 17;
        let b2 = ModelParams::zeros(
            ModelConfig::new(ModelKind::Baseline2Spatial, p, d).with_combos(k),
        )
        .unwrap();
        assert_eq!(b2.param_count(), k * d);

        let cat = ModelParams::zeros(
            ModelConfig::new(ModelKind::AppContextContextAttention, p, d)
                .with_code_dim(m)
                .with_embed_dim(e),
        )
        .unwrap();
        // classifier block + attention base/generators + shared bias
        assert_eq!(
            cat.param_count(),
            (p * d + p * d * m + m * 2 * e) + (p * d + p * d * m) + 1
        );
    }

    #[test]
    fn context_kind_param_count_ignores_combo_count() {
        let base = ctx_config(ModelKind::AppContext);
        let a = ModelParams::zeros(base.with_combos(10)).unwrap();
        let b = ModelParams::zeros(base.with_combos(100)).unwrap();
        assert_eq!(a.param_count(), b.param_count());
    }

    #[test]
    fn views_align_with_labels_and_grads() {
        for kind in ALL_KINDS {
            let cfg = ctx_config(kind).with_combos(7);
            let params = ModelParams::init(cfg, 11).unwrap();
            let grads = ModelGrads::zeros_like(&params);
            let views = params.tensor_views();
            assert_eq!(views.len(), params.tensor_labels().len());
            let gviews = grads.tensor_views();
            assert_eq!(views.len(), gviews.len());
            for (pv, gv) in views.iter().zip(&gviews) {
                assert_eq!(pv.len(), gv.len());
            }
        }
    }

    #[test]
    fn init_is_seed_deterministic() {
        let cfg = ctx_config(ModelKind::AppContextContextAttention);
        let a = ModelParams::init(cfg, 42).unwrap();
        let b = ModelParams::init(cfg, 42).unwrap();
        assert_eq!(a, b);
        let c = ModelParams::init(cfg, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_zeroes_base_terms() {
        let cfg = ctx_config(ModelKind::AppContextContextAttention);
        let p = ModelParams::init(cfg, 1).unwrap();
        assert!(p.w_bar.unwrap().data().iter().all(|&v| v == 0.0));
        assert!(p.w_att_bar.unwrap().data().iter().all(|&v| v == 0.0));
        assert_eq!(p.b_att, Some(0.0));
        assert!(p.q.unwrap().data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(ModelConfig::new(ModelKind::AppContext, 0, 4).validate().is_err());
        assert!(ModelConfig::new(ModelKind::AppContext, 2, 4)
            .validate()
            .is_err()); // missing embed_dim
        assert!(ModelConfig::new(ModelKind::Baseline2App, 2, 4)
            .validate()
            .is_err()); // missing combos
        assert!(ModelConfig::new(ModelKind::Baseline1App, 2, 4)
            .with_pool_epsilon(0.0)
            .validate()
            .is_err());
    }

    #[test]
    fn grads_clear_and_scale() {
        let cfg = ctx_config(ModelKind::SpatialContext);
        let params = ModelParams::init(cfg, 3).unwrap();
        let mut grads = ModelGrads::zeros_like(&params);
        grads.w_bar.as_mut().unwrap().set(0, 0, 2.0);
        grads.scale(0.5);
        assert_eq!(grads.w_bar.as_ref().unwrap().get(0, 0), 1.0);
        grads.clear();
        assert!(grads.tensor_views().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }
}
