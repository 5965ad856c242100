//! Conditional graph generator.
//!
//! A two-layer GCN encoder produces per-node Gaussian parameters that are
//! pooled into a single graph-level distribution. Latent rows are decoded by
//! an FNN into link features: edge probabilities come from sigmoid inner
//! products, node categories and edge types from two classification heads. A
//! GCN discriminator scores adjacency matrices and is trained against decoded
//! graphs so that generated structure looks like real structure.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{check_chain, MatrixStore, CHECKPOINT_VERSION};
use crate::error::{Error, Result};
use crate::graph::{connect_components, semantic_class, Edge, SceneGraph, EDGE_TYPES};
use crate::numeric::nn::{
    bce, bce_logit_grad, clamp_prob, fnn_backward, fnn_forward_rows, gcn_backward, gcn_forward_cached,
    kl_gaussian_grad, relu, relu_mask, sigmoid, softmax, FnnCache, GcnCache,
};
use crate::numeric::{
    grad_check, kl_gaussian, min_cost_assignment, normalize_adjacency, normalize_adjacency_backward,
    spectral_embedding, LayerParams, Matrix, Params, DEFAULT_EPSILON,
};
use crate::scene::{encode_condition, CategoryRegistry, ConditionCode, ConditionSchema, RoomType};

/// Lower bound on pooled variances.
pub const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondGenConfig {
    /// Latent dimension `d_z`.
    pub latent_dim: usize,
    /// Number of Laplacian eigenvectors used as node features.
    pub spectral_dim: usize,
    pub hidden_dim: usize,
    /// Width of the link-feature space produced by the decoder FNN.
    pub feature_dim: usize,
    pub disc_hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Per-step gradients are rescaled to at most this global norm.
    pub max_grad_norm: f64,
    pub seed: u64,
}

impl Default for CondGenConfig {
    fn default() -> Self {
        Self {
            latent_dim: 8,
            spectral_dim: 4,
            hidden_dim: 32,
            feature_dim: 16,
            disc_hidden_dim: 16,
            epochs: 200,
            learning_rate: 0.05,
            max_grad_norm: 5.0,
            seed: 0,
        }
    }
}

/// Shared first GCN layer with separate mean and standard-deviation heads.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub shared: LayerParams,
    pub mean: LayerParams,
    pub std: LayerParams,
}

impl Params for EncoderParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.shared.visit(f);
        self.mean.visit(f);
        self.std.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.shared.visit_mut(f);
        self.mean.visit_mut(f);
        self.std.visit_mut(f);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    /// Latent ‖ condition → link features.
    pub link: Vec<LayerParams>,
    /// Link features → logits over the registry's node codes.
    pub category: LayerParams,
    /// `[f_i ⊙ f_j ‖ f_i + f_j]` → logits over the nine edge types.
    pub edge_type: LayerParams,
}

impl Params for DecoderParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.link.visit(f);
        self.category.visit(f);
        self.edge_type.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.link.visit_mut(f);
        self.category.visit_mut(f);
        self.edge_type.visit_mut(f);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorParams {
    pub gcn0: LayerParams,
    pub gcn1: LayerParams,
    /// Pooled graph feature → hidden → scalar logit.
    pub head: Vec<LayerParams>,
}

impl Params for DiscriminatorParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.gcn0.visit(f);
        self.gcn1.visit(f);
        self.head.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.gcn0.visit_mut(f);
        self.gcn1.visit_mut(f);
        self.head.visit_mut(f);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentStats {
    pub mu_bar: Vec<f64>,
    pub sigma2_bar: Vec<f64>,
}

/// Mean losses over one training epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub edge_bce: f64,
    pub category_ce: f64,
    pub edge_type_ce: f64,
    pub prior: f64,
    /// `−(log D(A) + log(1 − D(A′)))`
    pub discriminator: f64,
    /// `log(1 − D(A′))`
    pub generator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "CondGenCheckpoint", try_from = "CondGenCheckpoint")]
pub struct CondGenModel {
    pub config: CondGenConfig,
    pub schema: ConditionSchema,
    pub registry: CategoryRegistry,
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
    pub discriminator: DiscriminatorParams,
    /// Node-count histogram per condition label index.
    pub node_counts: Vec<BTreeMap<usize, usize>>,
    pub loss_curve: Vec<EpochLoss>,
}

impl CondGenModel {
    /// Randomly initialized model for a room type's schema and registry.
    pub fn new(
        schema: ConditionSchema,
        registry: CategoryRegistry,
        config: CondGenConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if schema.room_type != registry.room_type {
            return Err(Error::SchemaMismatch(format!(
                "schema is for {} but registry is for {}",
                schema.room_type, registry.room_type
            )));
        }
        if config.latent_dim == 0 || config.spectral_dim == 0 || config.feature_dim == 0 {
            return Err(Error::arg("model dimensions must be positive"));
        }
        let c = &config;
        let labels = schema.len();
        let enc_in = c.spectral_dim + labels;
        let encoder = EncoderParams {
            shared: LayerParams::init(enc_in, c.hidden_dim, false, rng),
            mean: LayerParams::init(c.hidden_dim, c.latent_dim, false, rng),
            std: LayerParams::init(c.hidden_dim, c.latent_dim, false, rng),
        };
        let decoder = DecoderParams {
            link: vec![
                LayerParams::init(c.latent_dim + labels, c.hidden_dim, true, rng),
                LayerParams::init(c.hidden_dim, c.feature_dim, true, rng),
            ],
            category: LayerParams::init(c.feature_dim, registry.node_codes().len(), true, rng),
            edge_type: LayerParams::init(2 * c.feature_dim, EDGE_TYPES, true, rng),
        };
        let discriminator = DiscriminatorParams {
            gcn0: LayerParams::init(enc_in, c.disc_hidden_dim, false, rng),
            gcn1: LayerParams::init(c.disc_hidden_dim, c.disc_hidden_dim, false, rng),
            head: vec![
                LayerParams::init(c.disc_hidden_dim, c.disc_hidden_dim, true, rng),
                LayerParams::init(c.disc_hidden_dim, 1, true, rng),
            ],
        };
        Ok(Self {
            node_counts: vec![BTreeMap::new(); labels],
            config,
            schema,
            registry,
            encoder,
            decoder,
            discriminator,
            loss_curve: Vec::new(),
        })
    }

    pub fn room_type(&self) -> RoomType {
        self.schema.room_type
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    fn check_shapes(&self) -> Result<()> {
        let labels = self.schema.len();
        let c = &self.config;
        let enc_in = c.spectral_dim + labels;
        let e = &self.encoder;
        let h = check_chain("encoder", enc_in, &[&e.shared])?;
        for head in [&e.mean, &e.std] {
            if check_chain("encoder head", h, &[head])? != c.latent_dim {
                return Err(Error::arg("encoder heads must output the latent dimension"));
            }
        }
        let d = &self.decoder;
        let link: Vec<&LayerParams> = d.link.iter().collect();
        let f = check_chain("decoder", c.latent_dim + labels, &link)?;
        if f != c.feature_dim {
            return Err(Error::arg("decoder output must match the feature dimension"));
        }
        if check_chain("category head", f, &[&d.category])? != self.registry.node_codes().len() {
            return Err(Error::arg("category head must cover the registry"));
        }
        if check_chain("edge-type head", 2 * f, &[&d.edge_type])? != EDGE_TYPES {
            return Err(Error::arg("edge-type head must output nine logits"));
        }
        let disc = &self.discriminator;
        let mut chain = vec![&disc.gcn0, &disc.gcn1];
        chain.extend(disc.head.iter());
        if check_chain("discriminator", enc_in, &chain)? != 1 {
            return Err(Error::arg("discriminator must output one logit"));
        }
        if self.node_counts.len() != labels {
            return Err(Error::arg("one node-count histogram per label is required"));
        }
        Ok(())
    }

    fn check_cond(&self, cond_vec: &[f64]) -> Result<()> {
        if cond_vec.len() != self.schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "condition vector has {} entries, schema has {} labels",
                cond_vec.len(),
                self.schema.len()
            )));
        }
        Ok(())
    }

    fn category_index(&self, code: u32) -> Result<usize> {
        self.registry
            .node_codes()
            .iter()
            .position(|&c| c == code)
            .ok_or_else(|| Error::SchemaMismatch(format!("category {code} is not in the registry")))
    }
}

#[derive(Serialize, Deserialize)]
struct CondGenCheckpoint {
    format_version: u64,
    d_z: usize,
    k: usize,
    config: CondGenConfig,
    schema: ConditionSchema,
    registry: CategoryRegistry,
    histograms: Vec<BTreeMap<usize, usize>>,
    loss_curve: Vec<EpochLoss>,
    matrices: MatrixStore,
}

impl From<CondGenModel> for CondGenCheckpoint {
    fn from(m: CondGenModel) -> Self {
        let mut s = MatrixStore::default();
        s.put_layer("encoder.shared", &m.encoder.shared);
        s.put_layer("encoder.mean", &m.encoder.mean);
        s.put_layer("encoder.std", &m.encoder.std);
        s.put_layers("decoder.link", &m.decoder.link);
        s.put_layer("decoder.category", &m.decoder.category);
        s.put_layer("decoder.edge_type", &m.decoder.edge_type);
        s.put_layer("discriminator.gcn0", &m.discriminator.gcn0);
        s.put_layer("discriminator.gcn1", &m.discriminator.gcn1);
        s.put_layers("discriminator.head", &m.discriminator.head);
        Self {
            format_version: CHECKPOINT_VERSION,
            d_z: m.config.latent_dim,
            k: m.config.spectral_dim,
            config: m.config,
            schema: m.schema,
            registry: m.registry,
            histograms: m.node_counts,
            loss_curve: m.loss_curve,
            matrices: s,
        }
    }
}

impl TryFrom<CondGenCheckpoint> for CondGenModel {
    type Error = Error;

    fn try_from(c: CondGenCheckpoint) -> Result<Self> {
        if c.format_version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: c.format_version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if c.d_z != c.config.latent_dim || c.k != c.config.spectral_dim {
            return Err(Error::arg("checkpoint dimensions disagree with its config"));
        }
        let mut s = c.matrices;
        let model = CondGenModel {
            encoder: EncoderParams {
                shared: s.take_layer("encoder.shared")?,
                mean: s.take_layer("encoder.mean")?,
                std: s.take_layer("encoder.std")?,
            },
            decoder: DecoderParams {
                link: s.take_layers("decoder.link", 2)?,
                category: s.take_layer("decoder.category")?,
                edge_type: s.take_layer("decoder.edge_type")?,
            },
            discriminator: DiscriminatorParams {
                gcn0: s.take_layer("discriminator.gcn0")?,
                gcn1: s.take_layer("discriminator.gcn1")?,
                head: s.take_layers("discriminator.head", 2)?,
            },
            config: c.config,
            schema: c.schema,
            registry: c.registry,
            node_counts: c.histograms,
            loss_curve: c.loss_curve,
        };
        if let Some(extra) = s.names().next() {
            return Err(Error::arg(format!("unexpected checkpoint matrix `{extra}`")));
        }
        model.check_shapes()?;
        Ok(model)
    }
}

// ---------------------------------------------------------------------------
// Encoder

/// Spectral features concatenated with the condition on every row.
fn node_features(a: &Matrix, k: usize, cond_vec: &[f64]) -> Result<Matrix> {
    let eig = spectral_embedding(a, k)?;
    let cond = Matrix::from_vec(
        a.rows(),
        cond_vec.len(),
        (0..a.rows()).flat_map(|_| cond_vec.iter().copied()).collect(),
    )?;
    eig.hstack(&cond)
}

struct EncoderPass {
    ax: Matrix,
    pre: Matrix,
    ah: Matrix,
    a_norm: Matrix,
    std_rows: Matrix,
    floored: Vec<bool>,
    stats: LatentStats,
}

fn encoder_forward(enc: &EncoderParams, x: &Matrix, a_norm: &Matrix) -> Result<EncoderPass> {
    let n = x.rows() as f64;
    let ax = a_norm.matmul(x)?;
    let pre = enc.shared.affine(&ax)?;
    let ah = a_norm.matmul(&relu(&pre))?;
    let mean_rows = enc.mean.affine(&ah)?;
    let std_rows = enc.std.affine(&ah)?;
    let mu_bar = mean_rows.mean_rows();
    let raw: Vec<f64> = (0..std_rows.cols())
        .map(|d| {
            (0..std_rows.rows())
                .map(|i| std_rows[(i, d)].powi(2))
                .sum::<f64>()
                / (n * n)
        })
        .collect();
    let floored = raw.iter().map(|&v| !(v > VARIANCE_FLOOR)).collect::<Vec<_>>();
    let sigma2_bar = raw.iter().map(|&v| v.max(VARIANCE_FLOOR)).collect();
    Ok(EncoderPass {
        ax,
        pre,
        ah,
        a_norm: a_norm.clone(),
        std_rows,
        floored,
        stats: LatentStats { mu_bar, sigma2_bar },
    })
}

fn encoder_backward(
    enc: &EncoderParams,
    pass: &EncoderPass,
    g_mu: &[f64],
    g_sigma2: &[f64],
    grads: &mut EncoderParams,
) {
    let rows = pass.std_rows.rows();
    let n = rows as f64;
    let dz = g_mu.len();
    let mut g_mean_rows = Matrix::zeros(rows, dz);
    let mut g_std_rows = Matrix::zeros(rows, dz);
    for i in 0..rows {
        for d in 0..dz {
            g_mean_rows[(i, d)] = g_mu[d] / n;
            if !pass.floored[d] {
                g_std_rows[(i, d)] = g_sigma2[d] * 2.0 * pass.std_rows[(i, d)] / (n * n);
            }
        }
    }
    let mut g_ah = enc.mean.affine_backward(&pass.ah, &g_mean_rows, &mut grads.mean);
    g_ah.add_assign(&enc.std.affine_backward(&pass.ah, &g_std_rows, &mut grads.std));
    let g_hidden = pass.a_norm.t_matmul(&g_ah).expect("shape");
    let g_pre = relu_mask(&pass.pre, &g_hidden);
    enc.shared.affine_backward(&pass.ax, &g_pre, &mut grads.shared);
}

/// Pooled latent distribution of a graph with binary adjacency `a`.
pub fn encode(model: &CondGenModel, a: &Matrix, cond_vec: &[f64]) -> Result<LatentStats> {
    if a.rows() == 0 {
        return Err(Error::arg("cannot encode an empty graph"));
    }
    model.check_cond(cond_vec)?;
    let x = node_features(a, model.config.spectral_dim, cond_vec)?;
    let a_norm = normalize_adjacency(a)?;
    Ok(encoder_forward(&model.encoder, &x, &a_norm)?.stats)
}

/// `m` rows drawn i.i.d. from `N(μ̄, diag(σ̄²))` by reparameterization.
pub fn sample_latents(stats: &LatentStats, m: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = standard_normal(m, stats.mu_bar.len(), &mut rng);
    reparameterize(stats, &eps)
}

fn standard_normal(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data).expect("shape")
}

fn reparameterize(stats: &LatentStats, eps: &Matrix) -> Matrix {
    let mut z = eps.clone();
    for i in 0..z.rows() {
        for (d, v) in z.row_mut(i).iter_mut().enumerate() {
            *v = stats.mu_bar[d] + stats.sigma2_bar[d].sqrt() * *v;
        }
    }
    z
}

// ---------------------------------------------------------------------------
// Decoder

struct DecoderPass {
    cache: FnnCache,
    features: Matrix,
    edge_probs: Matrix,
    cat_probs: Matrix,
}

fn decoder_forward(dec: &DecoderParams, z: &Matrix, cond_vec: &[f64]) -> Result<DecoderPass> {
    let m = z.rows();
    let cond = Matrix::from_vec(
        m,
        cond_vec.len(),
        (0..m).flat_map(|_| cond_vec.iter().copied()).collect(),
    )?;
    let input = z.hstack(&cond)?;
    let (features, cache) = fnn_forward_rows(&input, &dec.link)?;
    let scores = features.matmul_t(&features)?;
    let mut edge_probs = scores.map(sigmoid);
    for i in 0..m {
        edge_probs[(i, i)] = 0.0;
    }
    let logits = dec.category.affine(&features)?;
    let mut cat_probs = Matrix::zeros(m, logits.cols());
    for i in 0..m {
        cat_probs.row_mut(i).copy_from_slice(&softmax(logits.row(i)));
    }
    Ok(DecoderPass {
        cache,
        features,
        edge_probs,
        cat_probs,
    })
}

fn pair_features(f: &Matrix, i: usize, j: usize) -> Vec<f64> {
    let (a, b) = (f.row(i), f.row(j));
    a.iter()
        .zip(b)
        .map(|(x, y)| x * y)
        .chain(a.iter().zip(b).map(|(x, y)| x + y))
        .collect()
}

fn edge_type_probs_for(dec: &DecoderParams, f: &Matrix, i: usize, j: usize) -> Vec<f64> {
    let x = Matrix::row_vector(&pair_features(f, i, j));
    softmax(dec.edge_type.affine(&x).expect("shape").row(0))
}

/// Accumulates the gradient of an edge-type logit vector into the decoder's
/// head and the two endpoint feature rows.
fn edge_type_backward(
    dec: &DecoderParams,
    f: &Matrix,
    i: usize,
    j: usize,
    g_logits: &[f64],
    grads: &mut DecoderParams,
    g_f: &mut Matrix,
) {
    let x = Matrix::row_vector(&pair_features(f, i, j));
    let g_x = dec
        .edge_type
        .affine_backward(&x, &Matrix::row_vector(g_logits), &mut grads.edge_type);
    let d = f.cols();
    let gx = g_x.row(0);
    for c in 0..d {
        let (fi, fj) = (f[(i, c)], f[(j, c)]);
        g_f[(i, c)] += gx[c] * fj + gx[d + c];
        g_f[(j, c)] += gx[c] * fi + gx[d + c];
    }
}

/// Index of pair `(i, j)`, `i < j`, in row-major upper-triangle order.
pub fn pair_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < m);
    i * (2 * m - i - 1) / 2 + (j - i - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Symmetric, zero diagonal, entries in (0, 1).
    pub edge_probs: Matrix,
    /// One row per node over the registry's node codes.
    pub node_category_probs: Matrix,
    /// One row per pair `i < j` (see [`pair_index`]) over the nine edge types.
    pub edge_type_probs: Matrix,
}

pub fn decode(model: &CondGenModel, z: &Matrix, cond_vec: &[f64]) -> Result<Decoded> {
    if z.rows() == 0 {
        return Err(Error::arg("decode needs at least one latent row"));
    }
    if z.cols() != model.latent_dim() {
        return Err(Error::arg(format!(
            "latent rows have {} columns, model expects {}",
            z.cols(),
            model.latent_dim()
        )));
    }
    model.check_cond(cond_vec)?;
    let pass = decoder_forward(&model.decoder, z, cond_vec)?;
    let m = z.rows();
    let mut types = Matrix::zeros(m * (m - 1) / 2, EDGE_TYPES);
    for i in 0..m {
        for j in (i + 1)..m {
            let p = edge_type_probs_for(&model.decoder, &pass.features, i, j);
            types.row_mut(pair_index(m, i, j)).copy_from_slice(&p);
        }
    }
    Ok(Decoded {
        edge_probs: pass.edge_probs,
        node_category_probs: pass.cat_probs,
        edge_type_probs: types,
    })
}

// ---------------------------------------------------------------------------
// Losses

/// Ground truth aligned with the decoded node order.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeTargets {
    pub adjacency: Matrix,
    /// Index into the registry's node codes for every node.
    pub categories: Vec<usize>,
    /// `(u, v, edge_type)` for every real edge.
    pub edges: Vec<(usize, usize, u8)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaeLoss {
    pub edge_bce: f64,
    pub category_ce: f64,
    pub edge_type_ce: f64,
    pub prior: f64,
}

impl VaeLoss {
    pub fn recon(&self) -> f64 {
        self.edge_bce + self.category_ce + self.edge_type_ce
    }

    pub fn total(&self) -> f64 {
        self.recon() + self.prior
    }
}

fn neg_log(p: f64) -> f64 {
    -clamp_prob(p).ln()
}

/// Reconstruction and prior terms of the variational objective.
pub fn vae_loss(decoded: &Decoded, stats: &LatentStats, targets: &VaeTargets) -> Result<VaeLoss> {
    let m = decoded.edge_probs.rows();
    if targets.adjacency.shape() != (m, m) || targets.categories.len() != m {
        return Err(Error::arg("targets do not match the decoded graph size"));
    }
    let mut edge_bce = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            edge_bce += bce(decoded.edge_probs[(i, j)], targets.adjacency[(i, j)]);
        }
    }
    let category_ce = targets
        .categories
        .iter()
        .enumerate()
        .map(|(i, &c)| neg_log(decoded.node_category_probs[(i, c)]))
        .sum();
    let mut edge_type_ce = 0.0;
    for &(u, v, t) in &targets.edges {
        let (i, j) = (u.min(v), u.max(v));
        if i == j || j >= m || !(1..=EDGE_TYPES as u8).contains(&t) {
            return Err(Error::arg(format!("invalid target edge ({u}, {v}, {t})")));
        }
        edge_type_ce += neg_log(decoded.edge_type_probs[(pair_index(m, i, j), t as usize - 1)]);
    }
    Ok(VaeLoss {
        edge_bce,
        category_ce,
        edge_type_ce,
        prior: kl_gaussian(&stats.mu_bar, &stats.sigma2_bar)?,
    })
}

/// `log d_real + log(1 − d_fake)` with both inputs clamped away from 0 and 1.
pub fn gan_loss(d_real: f64, d_fake: f64) -> f64 {
    clamp_prob(d_real).ln() + (1.0 - clamp_prob(d_fake)).ln()
}

// ---------------------------------------------------------------------------
// Discriminator

struct DiscPass {
    gcn: GcnCache,
    rows: usize,
    head: FnnCache,
    logit: f64,
}

fn disc_forward(disc: &DiscriminatorParams, x: &Matrix, a_norm: &Matrix) -> Result<DiscPass> {
    let (h, gcn) = gcn_forward_cached(x, a_norm, &disc.gcn0, &disc.gcn1)?;
    let pooled = Matrix::row_vector(&h.mean_rows());
    let (out, head) = fnn_forward_rows(&pooled, &disc.head)?;
    Ok(DiscPass {
        gcn,
        rows: x.rows(),
        head,
        logit: out[(0, 0)],
    })
}

/// Accumulates parameter gradients for `∂L/∂logit = g`; returns `∂L/∂Ā`.
fn disc_backward(
    disc: &DiscriminatorParams,
    pass: &DiscPass,
    g: f64,
    grads: &mut DiscriminatorParams,
) -> Matrix {
    let g_pooled = fnn_backward(&pass.head, &disc.head, &Matrix::row_vector(&[g]), &mut grads.head);
    let n = pass.rows;
    let mut g_h = Matrix::zeros(n, g_pooled.cols());
    for i in 0..n {
        for (dst, src) in g_h.row_mut(i).iter_mut().zip(g_pooled.row(0)) {
            *dst = src / n as f64;
        }
    }
    gcn_backward(
        &pass.gcn,
        &disc.gcn0,
        &disc.gcn1,
        &g_h,
        &mut grads.gcn0,
        &mut grads.gcn1,
    )
    .a_norm
}

/// Probability that adjacency `a` (binary or relaxed) comes from real data.
pub fn discriminate(model: &CondGenModel, a: &Matrix, cond_vec: &[f64]) -> Result<f64> {
    if a.rows() == 0 {
        return Err(Error::arg("cannot score an empty graph"));
    }
    model.check_cond(cond_vec)?;
    let x = node_features(a, model.config.spectral_dim, cond_vec)?;
    let a_norm = normalize_adjacency(a)?;
    Ok(sigmoid(disc_forward(&model.discriminator, &x, &a_norm)?.logit))
}

// ---------------------------------------------------------------------------
// Training

/// A training graph with everything that does not depend on parameters.
struct Prepared {
    a: Matrix,
    a_norm: Matrix,
    x: Matrix,
    cond: Vec<f64>,
    categories: Vec<usize>,
    edges: Vec<(usize, usize, u8)>,
}

fn prepare(model: &CondGenModel, g: &SceneGraph) -> Result<Prepared> {
    if g.condition.room_type != model.room_type() {
        return Err(Error::SchemaMismatch(format!(
            "{} graph given to a {} model",
            g.condition.room_type,
            model.room_type()
        )));
    }
    if g.is_empty() {
        return Err(Error::arg("training graphs must be non-empty"));
    }
    let cond = encode_condition(&g.condition, &model.schema)?;
    let a = Matrix::from_rows(&g.adjacency())?;
    Ok(Prepared {
        x: node_features(&a, model.config.spectral_dim, &cond)?,
        a_norm: normalize_adjacency(&a)?,
        a,
        cond,
        categories: g
            .nodes
            .iter()
            .map(|n| model.category_index(n.category))
            .collect::<Result<_>>()?,
        edges: g.edges.iter().map(|e| (e.u, e.v, e.edge_type)).collect(),
    })
}

/// Assigns every generated node to a real node by minimum category
/// cross-entropy; `result[generated] = real`.
fn match_nodes(cat_probs: &Matrix, real: &[usize]) -> Vec<usize> {
    let n = real.len();
    let mut cost = Matrix::zeros(n, n);
    for i in 0..n {
        for (r, &c) in real.iter().enumerate() {
            cost[(i, r)] = neg_log(cat_probs[(i, c)]);
        }
    }
    min_cost_assignment(&cost)
}

/// Loss and encoder/decoder gradients of the variational objective for one
/// graph, given fixed reparameterization noise and (optionally) a fixed node
/// matching.
fn vae_step(
    model: &CondGenModel,
    p: &Prepared,
    eps: &Matrix,
    matching: Option<&[usize]>,
    g_enc: &mut EncoderParams,
    g_dec: &mut DecoderParams,
) -> Result<(VaeLoss, Vec<usize>)> {
    let n = p.a.rows();
    let enc = encoder_forward(&model.encoder, &p.x, &p.a_norm)?;
    let z = reparameterize(&enc.stats, eps);
    let dec = decoder_forward(&model.decoder, &z, &p.cond)?;
    let perm = match matching {
        Some(m) => m.to_vec(),
        None => match_nodes(&dec.cat_probs, &p.categories),
    };
    let mut inv = vec![0; n];
    for (gen, &real) in perm.iter().enumerate() {
        inv[real] = gen;
    }

    let f = &dec.features;
    let mut g_f = Matrix::zeros(n, f.cols());
    let mut loss = VaeLoss {
        edge_bce: 0.0,
        category_ce: 0.0,
        edge_type_ce: 0.0,
        prior: kl_gaussian(&enc.stats.mu_bar, &enc.stats.sigma2_bar)?,
    };

    for i in 0..n {
        for j in (i + 1)..n {
            let t = p.a[(perm[i], perm[j])];
            let prob = dec.edge_probs[(i, j)];
            loss.edge_bce += bce(prob, t);
            let g = bce_logit_grad(prob, t);
            for c in 0..f.cols() {
                g_f[(i, c)] += g * f[(j, c)];
                g_f[(j, c)] += g * f[(i, c)];
            }
        }
    }

    let mut g_cat = Matrix::zeros(n, dec.cat_probs.cols());
    for i in 0..n {
        let target = p.categories[perm[i]];
        loss.category_ce += neg_log(dec.cat_probs[(i, target)]);
        for (c, g) in g_cat.row_mut(i).iter_mut().enumerate() {
            *g = dec.cat_probs[(i, c)] - if c == target { 1.0 } else { 0.0 };
        }
    }
    g_f.add_assign(
        &model
            .decoder
            .category
            .affine_backward(f, &g_cat, &mut g_dec.category),
    );

    for &(u, v, t) in &p.edges {
        let (a, b) = (inv[u], inv[v]);
        let (i, j) = (a.min(b), a.max(b));
        let probs = edge_type_probs_for(&model.decoder, f, i, j);
        let target = t as usize - 1;
        loss.edge_type_ce += neg_log(probs[target]);
        let g_logits: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(c, &q)| q - if c == target { 1.0 } else { 0.0 })
            .collect();
        edge_type_backward(&model.decoder, f, i, j, &g_logits, g_dec, &mut g_f);
    }

    let g_input = fnn_backward(&dec.cache, &model.decoder.link, &g_f, &mut g_dec.link);
    let dz = model.latent_dim();
    let (mut g_mu, mut g_sigma2) = kl_gaussian_grad(&enc.stats.mu_bar, &enc.stats.sigma2_bar);
    for i in 0..n {
        for d in 0..dz {
            let gz = g_input[(i, d)];
            g_mu[d] += gz;
            g_sigma2[d] += gz * eps[(i, d)] / (2.0 * enc.stats.sigma2_bar[d].sqrt());
        }
    }
    encoder_backward(&model.encoder, &enc, &g_mu, &g_sigma2, g_enc);
    Ok((loss, perm))
}

/// A decoded graph prepared for the discriminator.
struct Fake {
    dec: DecoderPass,
    a_norm: Matrix,
    x: Matrix,
}

fn fake_graph(model: &CondGenModel, z: &Matrix, cond: &[f64]) -> Result<Fake> {
    let dec = decoder_forward(&model.decoder, z, cond)?;
    let a = &dec.edge_probs;
    Ok(Fake {
        x: node_features(a, model.config.spectral_dim, cond)?,
        a_norm: normalize_adjacency(a)?,
        dec,
    })
}

/// Discriminator loss `−(log D(A) + log(1 − D(A′)))` and its gradients.
fn disc_step(
    model: &CondGenModel,
    real: &Prepared,
    fake: &Fake,
    grads: &mut DiscriminatorParams,
) -> Result<f64> {
    let disc = &model.discriminator;
    let r = disc_forward(disc, &real.x, &real.a_norm)?;
    let f = disc_forward(disc, &fake.x, &fake.a_norm)?;
    let (dr, df) = (sigmoid(r.logit), sigmoid(f.logit));
    disc_backward(disc, &r, bce_logit_grad(dr, 1.0), grads);
    disc_backward(disc, &f, bce_logit_grad(df, 0.0), grads);
    Ok(-gan_loss(dr, df))
}

/// Generator objective `log(1 − D(A′))` and its decoder gradients. The
/// spectral features of `A′` are treated as constants; the gradient flows
/// through the normalized adjacency.
fn generator_step(model: &CondGenModel, fake: &Fake, grads: &mut DecoderParams) -> Result<f64> {
    let disc = &model.discriminator;
    let pass = disc_forward(disc, &fake.x, &fake.a_norm)?;
    let d = sigmoid(pass.logit);
    let mut scratch = disc.zeroed();
    let g_norm = disc_backward(disc, &pass, -bce_logit_grad(d, 0.0), &mut scratch);
    let probs = &fake.dec.edge_probs;
    let g_a = normalize_adjacency_backward(probs, &g_norm);
    let f = &fake.dec.features;
    let m = f.rows();
    let mut g_f = Matrix::zeros(m, f.cols());
    for i in 0..m {
        for j in (i + 1)..m {
            let p = probs[(i, j)];
            let g = (g_a[(i, j)] + g_a[(j, i)]) * p * (1.0 - p);
            for c in 0..f.cols() {
                g_f[(i, c)] += g * f[(j, c)];
                g_f[(j, c)] += g * f[(i, c)];
            }
        }
    }
    fnn_backward(&fake.dec.cache, &model.decoder.link, &g_f, &mut grads.link);
    Ok((1.0 - clamp_prob(d)).ln())
}

/// Worst finite-difference relative error of each training path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientErrors {
    /// Variational loss with respect to encoder and decoder parameters.
    pub vae: f64,
    /// Discriminator loss with respect to discriminator parameters.
    pub discriminator: f64,
    /// Generator loss with respect to decoder parameters.
    pub generator: f64,
}

/// Compares the analytic gradients of every training step against central
/// differences on graph `g`, with noise, latents and node matching drawn from
/// `seed` and then held fixed.
pub fn check_gradients(model: &CondGenModel, g: &SceneGraph, seed: u64) -> Result<GradientErrors> {
    let p = prepare(model, g)?;
    let n = p.a.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = standard_normal(n, model.latent_dim(), &mut rng);
    let z = standard_normal(n, model.latent_dim(), &mut rng);
    let (_, perm) = vae_step(
        model,
        &p,
        &eps,
        None,
        &mut model.encoder.zeroed(),
        &mut model.decoder.zeroed(),
    )?;

    let n_enc = model.encoder.param_count();
    let mut flat = model.encoder.flatten();
    flat.extend(model.decoder.flatten());
    let vae = grad_check(
        |w| {
            let mut m = model.clone();
            m.encoder.assign(&w[..n_enc]);
            m.decoder.assign(&w[n_enc..]);
            let (mut ge, mut gd) = (m.encoder.zeroed(), m.decoder.zeroed());
            match vae_step(&m, &p, &eps, Some(&perm), &mut ge, &mut gd) {
                Ok((l, _)) => {
                    let mut g = ge.flatten();
                    g.extend(gd.flatten());
                    (l.total(), g)
                }
                Err(_) => (f64::NAN, vec![f64::NAN; w.len()]),
            }
        },
        &flat,
        DEFAULT_EPSILON,
    )?;

    let fake = fake_graph(model, &z, &p.cond)?;
    let discriminator = grad_check(
        |w| {
            let mut m = model.clone();
            m.discriminator.assign(w);
            let mut g = m.discriminator.zeroed();
            match disc_step(&m, &p, &fake, &mut g) {
                Ok(l) => (l, g.flatten()),
                Err(_) => (f64::NAN, vec![f64::NAN; w.len()]),
            }
        },
        &model.discriminator.flatten(),
        DEFAULT_EPSILON,
    )?;

    // Spectral features of A' are constants of the generator step, so they
    // stay at their base value while the decoder is perturbed.
    let generator = grad_check(
        |w| {
            let mut m = model.clone();
            m.decoder.assign(w);
            let step = || -> Result<(f64, Vec<f64>)> {
                let dec = decoder_forward(&m.decoder, &z, &p.cond)?;
                let perturbed = Fake {
                    a_norm: normalize_adjacency(&dec.edge_probs)?,
                    x: fake.x.clone(),
                    dec,
                };
                let mut g = m.decoder.zeroed();
                let l = generator_step(&m, &perturbed, &mut g)?;
                Ok((l, g.flatten()))
            };
            step().unwrap_or_else(|_| (f64::NAN, vec![f64::NAN; w.len()]))
        },
        &model.decoder.flatten(),
        DEFAULT_EPSILON,
    )?;
    Ok(GradientErrors {
        vae,
        discriminator,
        generator,
    })
}

/// Factor bringing the joint gradient norm of `grads` down to `max_norm`.
fn clip_scale(grads: &[&dyn Params], max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for g in grads {
        g.visit(&mut |s| sq += s.iter().map(|v| v * v).sum::<f64>());
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        max_norm / norm
    } else {
        1.0
    }
}

fn diverged(epoch: usize, step: &'static str) -> Error {
    Error::Training { step, epoch }
}

/// Trains a fresh model on graphs of one room type.
pub fn train(graphs: &[SceneGraph], config: &CondGenConfig) -> Result<CondGenModel> {
    let room = graphs
        .first()
        .ok_or_else(|| Error::arg("no training graphs"))?
        .condition
        .room_type;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = CondGenModel::new(
        ConditionSchema::for_room(room),
        CategoryRegistry::for_room(room),
        config.clone(),
        &mut rng,
    )?;
    train_from(model, graphs, &mut rng)
}

/// Continues training `model` for `model.config.epochs` epochs.
pub fn train_from(
    mut model: CondGenModel,
    graphs: &[SceneGraph],
    rng: &mut ChaCha8Rng,
) -> Result<CondGenModel> {
    let prepared: Vec<Prepared> = graphs.iter().map(|g| prepare(&model, g)).collect::<Result<_>>()?;
    let labels = model.schema.len();
    let mut per_label = vec![0usize; labels];
    for g in graphs {
        per_label[g.condition.label_index] += 1;
    }
    if let Some(l) = per_label.iter().position(|&c| c > 0 && c < 2) {
        return Err(Error::arg(format!(
            "label `{}` needs at least two training graphs",
            model.schema.labels[l]
        )));
    }
    for g in graphs {
        *model.node_counts[g.condition.label_index]
            .entry(g.len())
            .or_default() += 1;
    }

    let lr = model.config.learning_rate;
    let max_norm = model.config.max_grad_norm;
    let dz = model.latent_dim();
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    for epoch in 1..=model.config.epochs {
        order.shuffle(rng);
        let mut sum = EpochLoss::default();
        for &gi in &order {
            let p = &prepared[gi];
            let n = p.a.rows();

            let eps = standard_normal(n, dz, rng);
            let mut g_enc = model.encoder.zeroed();
            let mut g_dec = model.decoder.zeroed();
            let (loss, _) = vae_step(&model, p, &eps, None, &mut g_enc, &mut g_dec)?;
            if !loss.total().is_finite() || !g_enc.all_finite() || !g_dec.all_finite() {
                return Err(diverged(epoch, "vae"));
            }
            let scale = clip_scale(&[&g_enc, &g_dec], max_norm);
            model.encoder.add_scaled(&g_enc, -lr * scale);
            model.decoder.add_scaled(&g_dec, -lr * scale);

            let z = standard_normal(n, dz, rng);
            let fake = fake_graph(&model, &z, &p.cond)?;
            let mut g_disc = model.discriminator.zeroed();
            let d_loss = disc_step(&model, p, &fake, &mut g_disc)?;
            if !d_loss.is_finite() || !g_disc.all_finite() {
                return Err(diverged(epoch, "discriminator"));
            }
            model
                .discriminator
                .add_scaled(&g_disc, -lr * clip_scale(&[&g_disc], max_norm));

            let mut g_dec = model.decoder.zeroed();
            let g_loss = generator_step(&model, &fake, &mut g_dec)?;
            if !g_loss.is_finite() || !g_dec.all_finite() {
                return Err(diverged(epoch, "generator"));
            }
            model
                .decoder
                .add_scaled(&g_dec, -lr * clip_scale(&[&g_dec], max_norm));

            sum.edge_bce += loss.edge_bce;
            sum.category_ce += loss.category_ce;
            sum.edge_type_ce += loss.edge_type_ce;
            sum.prior += loss.prior;
            sum.discriminator += d_loss;
            sum.generator += g_loss;
        }
        let k = prepared.len() as f64;
        let mean = EpochLoss {
            edge_bce: sum.edge_bce / k,
            category_ce: sum.category_ce / k,
            edge_type_ce: sum.edge_type_ce / k,
            prior: sum.prior / k,
            discriminator: sum.discriminator / k,
            generator: sum.generator / k,
        };
        log::debug!("condgen epoch {epoch}: {mean:?}");
        model.loss_curve.push(mean);
    }
    Ok(model)
}

// ---------------------------------------------------------------------------
// Generation

fn sample_node_count(model: &CondGenModel, label: usize, rng: &mut impl Rng) -> usize {
    let mut hist = model.node_counts[label].clone();
    if hist.is_empty() {
        for h in &model.node_counts {
            for (&k, &v) in h {
                *hist.entry(k).or_default() += v;
            }
        }
    }
    let total: usize = hist.values().sum();
    if total == 0 {
        return 1;
    }
    let mut pick = rng.random_range(0..total);
    for (&count, &freq) in &hist {
        if pick < freq {
            return count.max(1);
        }
        pick -= freq;
    }
    unreachable!("pick is below the histogram total")
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) },
        )
        .0
}

/// Most likely edge type among the three consistent with the endpoints'
/// semantic class.
fn typed(probs: &[f64], class: crate::graph::SemanticClass) -> u8 {
    let base = 3 * (class as usize - 1);
    (base + argmax(&probs[base..base + 3]) + 1) as u8
}

/// Samples a new graph for `cond` from the prior.
pub fn generate(model: &CondGenModel, cond: ConditionCode, seed: u64) -> Result<SceneGraph> {
    let cond_vec = encode_condition(&cond, &model.schema)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = sample_node_count(model, cond.label_index, &mut rng);
    let z = standard_normal(m, model.latent_dim(), &mut rng);
    let decoded = decode(model, &z, &cond_vec)?;
    let codes = model.registry.node_codes();
    let cats: Vec<u32> = (0..m)
        .map(|i| codes[argmax(decoded.node_category_probs.row(i))])
        .collect();
    let mut g = SceneGraph::new(&cats, cond);
    for i in 0..m {
        for j in (i + 1)..m {
            let Some(class) = semantic_class(cats[i], cats[j]) else {
                continue;
            };
            if decoded.edge_probs[(i, j)] > 0.5 {
                let t = typed(decoded.edge_type_probs.row(pair_index(m, i, j)), class);
                g.edges.push(Edge::new(i, j, t));
            }
        }
    }
    connect_components(&mut g, |i, j| {
        let class = semantic_class(cats[i], cats[j])?;
        let t = typed(decoded.edge_type_probs.row(pair_index(m, i, j)), class);
        Some((-decoded.edge_probs[(i, j)], t))
    });
    g.check()?;
    Ok(g)
}
