//! Turning an abstract graph back into furniture.
//!
//! Objects are placed one at a time, largest first. For each object a mixture
//! embedding (global graph, local placed subgraph, incident edge types,
//! condition) conditions three heads: a location distribution over a 16×16
//! grid of cells, an orientation distribution and a size. Candidate
//! placements are drawn from these heads and rejected while they leave the
//! room, overlap earlier items or break a relation the graph asks for.
//!
//! Generated graphs name walls and openings abstractly. Each such node is
//! bound to an element of the target room; bindings start as the set of all
//! elements of the right kind and are narrowed as relations are committed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{check_chain, MatrixStore, CHECKPOINT_VERSION};
use crate::error::{Error, Result};
use crate::geometry::{point_in_polygon, ray_exit_distance, rect_in_polygon, Point2, Rect};
use crate::graph::{
    decode_edge_type, distance_bucket, geom_distance, node_kind, semantic_class, shell_geometry, Edge,
    NodeGeom, NodeKind, SceneGraph, EDGE_TYPES,
};
use crate::numeric::nn::{
    fnn_backward, fnn_forward_rows, gcn_backward, gcn_forward_cached, softmax, FnnCache, GcnCache,
};
use crate::numeric::{grad_check, normalize_adjacency, LayerParams, Matrix, Params, DEFAULT_EPSILON};
use crate::scene::{
    encode_condition, CategoryRegistry, ConditionCode, ConditionSchema, Direction, FurnitureItem, RoomShell,
    RoomType, Scene, Size2, OVERLAP_TOLERANCE,
};

/// Number of per-cell features fed to the location head.
pub const CELL_FEATURES: usize = 12;
/// Number of per-direction features fed to the orientation head.
pub const DIRECTION_FEATURES: usize = 2;

// ---------------------------------------------------------------------------
// Size statistics and ordering

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    pub mean_width: f64,
    pub mean_depth: f64,
    pub std_width: f64,
    pub std_depth: f64,
    /// Share of all training items with this category.
    pub frequency: f64,
}

impl SizeStats {
    pub fn mean_area(&self) -> f64 {
        self.mean_width * self.mean_depth
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryStats(pub BTreeMap<u32, SizeStats>);

impl CategoryStats {
    pub fn from_scenes(scenes: &[Scene]) -> Result<Self> {
        let mut sizes: BTreeMap<u32, Vec<Size2>> = BTreeMap::new();
        for s in scenes {
            for item in &s.items {
                sizes.entry(item.category).or_default().push(item.size);
            }
        }
        let total: usize = sizes.values().map(Vec::len).sum();
        if total == 0 {
            return Err(Error::arg("no furniture items to compute size statistics from"));
        }
        let mean_std = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
            (m, var.sqrt())
        };
        let mut out = BTreeMap::new();
        for (cat, v) in sizes {
            let (mean_width, std_width) = mean_std(&v.iter().map(|s| s.width).collect::<Vec<_>>());
            let (mean_depth, std_depth) = mean_std(&v.iter().map(|s| s.depth).collect::<Vec<_>>());
            if !(mean_width > 0.0 && mean_depth > 0.0) {
                return Err(Error::arg(format!("category {cat} has non-positive mean size")));
            }
            out.insert(
                cat,
                SizeStats {
                    mean_width,
                    mean_depth,
                    std_width,
                    std_depth,
                    frequency: v.len() as f64 / total as f64,
                },
            );
        }
        Ok(Self(out))
    }

    pub fn get(&self, category: u32) -> Result<&SizeStats> {
        self.0.get(&category).ok_or(Error::MissingStats(category))
    }
}

/// Object nodes by descending mean footprint area, then category code, then
/// node id. Shell nodes are fixed by the room and never ordered.
pub fn instantiation_order(g: &SceneGraph, stats: &CategoryStats) -> Result<Vec<usize>> {
    let mut keyed = Vec::new();
    for n in g.object_nodes() {
        keyed.push((stats.get(n.category)?.mean_area(), n.category, n.id));
    }
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    Ok(keyed.into_iter().map(|(_, _, id)| id).collect())
}

// ---------------------------------------------------------------------------
// Model

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementConfig {
    pub grid: usize,
    pub embed_dim: usize,
    pub edge_dim: usize,
    pub fusion_hidden: usize,
    pub fusion_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Per-step gradients are rescaled to at most this global norm.
    pub max_grad_norm: f64,
    /// Placement attempts per object before the best one is kept.
    pub retries: usize,
    pub seed: u64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            grid: 16,
            embed_dim: 16,
            edge_dim: 8,
            fusion_hidden: 32,
            fusion_dim: 16,
            epochs: 200,
            learning_rate: 0.05,
            max_grad_norm: 5.0,
            retries: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingParams {
    pub global0: LayerParams,
    pub global1: LayerParams,
    pub local0: LayerParams,
    pub local1: LayerParams,
    /// One row per edge type.
    pub edge_table: Matrix,
    pub fusion: Vec<LayerParams>,
}

impl Params for EmbeddingParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.global0.visit(f);
        self.global1.visit(f);
        self.local0.visit(f);
        self.local1.visit(f);
        self.edge_table.visit(f);
        self.fusion.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.global0.visit_mut(f);
        self.global1.visit_mut(f);
        self.local0.visit_mut(f);
        self.local1.visit_mut(f);
        self.edge_table.visit_mut(f);
        self.fusion.visit_mut(f);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    /// Head input → query vector scored against every cell's features.
    pub location: LayerParams,
    /// Head input → direction logits.
    pub orientation: LayerParams,
    /// Per-direction features → additive direction logit (shared weights).
    pub orientation_cell: LayerParams,
    /// Head input → log size ratios (width, depth) relative to the mean.
    pub size: LayerParams,
}

impl Params for HeadParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.location.visit(f);
        self.orientation.visit(f);
        self.orientation_cell.visit(f);
        self.size.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.location.visit_mut(f);
        self.orientation.visit_mut(f);
        self.orientation_cell.visit_mut(f);
        self.size.visit_mut(f);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementParams {
    pub embed: EmbeddingParams,
    pub heads: HeadParams,
}

impl Params for PlacementParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.embed.visit(f);
        self.heads.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.embed.visit_mut(f);
        self.heads.visit_mut(f);
    }
}

/// Per-epoch mean losses of teacher-forced training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlacementLoss {
    pub location_ce: f64,
    pub orientation_ce: f64,
    pub size_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PlacementCheckpoint", try_from = "PlacementCheckpoint")]
pub struct PlacementModel {
    pub config: PlacementConfig,
    pub schema: ConditionSchema,
    pub registry: CategoryRegistry,
    pub stats: CategoryStats,
    pub params: PlacementParams,
    pub loss_curve: Vec<PlacementLoss>,
}

impl PlacementModel {
    pub fn new(
        schema: ConditionSchema,
        registry: CategoryRegistry,
        stats: CategoryStats,
        config: PlacementConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if schema.room_type != registry.room_type {
            return Err(Error::SchemaMismatch(
                "schema and registry room types differ".into(),
            ));
        }
        if config.grid == 0 {
            return Err(Error::arg("grid must have at least one cell"));
        }
        let c = registry.node_codes().len();
        let cfg = &config;
        let h = cfg.embed_dim;
        let fusion_in = 2 * h + cfg.edge_dim + schema.len();
        let head_in = cfg.fusion_dim + c;
        let table = LayerParams::init(EDGE_TYPES, cfg.edge_dim, false, rng).weight;
        let params = PlacementParams {
            embed: EmbeddingParams {
                global0: LayerParams::init(c, h, false, rng),
                global1: LayerParams::init(h, h, false, rng),
                local0: LayerParams::init(c + 1, h, false, rng),
                local1: LayerParams::init(h, h, false, rng),
                edge_table: table,
                fusion: vec![
                    LayerParams::init(fusion_in, cfg.fusion_hidden, true, rng),
                    LayerParams::init(cfg.fusion_hidden, cfg.fusion_dim, true, rng),
                ],
            },
            heads: HeadParams {
                location: LayerParams::init(head_in, CELL_FEATURES, true, rng),
                orientation: LayerParams::init(head_in, 4, true, rng),
                orientation_cell: LayerParams::init(DIRECTION_FEATURES, 1, false, rng),
                size: LayerParams::zeros(head_in, 2, true),
            },
        };
        Ok(Self {
            config,
            schema,
            registry,
            stats,
            params,
            loss_curve: Vec::new(),
        })
    }

    pub fn room_type(&self) -> RoomType {
        self.schema.room_type
    }

    fn category_index(&self, code: u32) -> Result<usize> {
        self.registry
            .node_codes()
            .iter()
            .position(|&c| c == code)
            .ok_or_else(|| Error::SchemaMismatch(format!("category {code} is not in the registry")))
    }

    fn check_shapes(&self) -> Result<()> {
        let c = self.registry.node_codes().len();
        let cfg = &self.config;
        let e = &self.params.embed;
        let h = check_chain("global gcn", c, &[&e.global0, &e.global1])?;
        let hl = check_chain("local gcn", c + 1, &[&e.local0, &e.local1])?;
        if h != cfg.embed_dim || hl != cfg.embed_dim || e.edge_table.shape() != (EDGE_TYPES, cfg.edge_dim) {
            return Err(Error::arg("embedding shapes disagree with the config"));
        }
        let fusion: Vec<&LayerParams> = e.fusion.iter().collect();
        let out = check_chain("fusion", 2 * h + cfg.edge_dim + self.schema.len(), &fusion)?;
        if out != cfg.fusion_dim {
            return Err(Error::arg("fusion output disagrees with the config"));
        }
        let hp = &self.params.heads;
        let head_in = cfg.fusion_dim + c;
        for (name, layer, outputs) in [
            ("location head", &hp.location, CELL_FEATURES),
            ("orientation head", &hp.orientation, 4),
            ("size head", &hp.size, 2),
        ] {
            if check_chain(name, head_in, &[layer])? != outputs {
                return Err(Error::arg(format!("{name} has the wrong output width")));
            }
        }
        if check_chain(
            "orientation cell weights",
            DIRECTION_FEATURES,
            &[&hp.orientation_cell],
        )? != 1
        {
            return Err(Error::arg("orientation cell weights must output one value"));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct PlacementCheckpoint {
    format_version: u64,
    config: PlacementConfig,
    schema: ConditionSchema,
    registry: CategoryRegistry,
    stats: CategoryStats,
    loss_curve: Vec<PlacementLoss>,
    matrices: MatrixStore,
}

impl From<PlacementModel> for PlacementCheckpoint {
    fn from(m: PlacementModel) -> Self {
        let mut s = MatrixStore::default();
        let e = &m.params.embed;
        s.put_layer("embed.global0", &e.global0);
        s.put_layer("embed.global1", &e.global1);
        s.put_layer("embed.local0", &e.local0);
        s.put_layer("embed.local1", &e.local1);
        s.put_layer(
            "embed.edge_table",
            &LayerParams {
                weight: e.edge_table.clone(),
                bias: None,
            },
        );
        s.put_layers("embed.fusion", &e.fusion);
        let h = &m.params.heads;
        s.put_layer("head.location", &h.location);
        s.put_layer("head.orientation", &h.orientation);
        s.put_layer("head.orientation_cell", &h.orientation_cell);
        s.put_layer("head.size", &h.size);
        Self {
            format_version: CHECKPOINT_VERSION,
            config: m.config,
            schema: m.schema,
            registry: m.registry,
            stats: m.stats,
            loss_curve: m.loss_curve,
            matrices: s,
        }
    }
}

impl TryFrom<PlacementCheckpoint> for PlacementModel {
    type Error = Error;

    fn try_from(c: PlacementCheckpoint) -> Result<Self> {
        if c.format_version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: c.format_version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let mut s = c.matrices;
        let params = PlacementParams {
            embed: EmbeddingParams {
                global0: s.take_layer("embed.global0")?,
                global1: s.take_layer("embed.global1")?,
                local0: s.take_layer("embed.local0")?,
                local1: s.take_layer("embed.local1")?,
                edge_table: s.take_layer("embed.edge_table")?.weight,
                fusion: s.take_layers("embed.fusion", 2)?,
            },
            heads: HeadParams {
                location: s.take_layer("head.location")?,
                orientation: s.take_layer("head.orientation")?,
                orientation_cell: s.take_layer("head.orientation_cell")?,
                size: s.take_layer("head.size")?,
            },
        };
        let model = PlacementModel {
            config: c.config,
            schema: c.schema,
            registry: c.registry,
            stats: c.stats,
            params,
            loss_curve: c.loss_curve,
        };
        model.check_shapes()?;
        Ok(model)
    }
}

// ---------------------------------------------------------------------------
// Mixture embedding

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureEmbedding {
    pub global: Vec<f64>,
    pub local: Vec<f64>,
    pub edge_type: Vec<f64>,
    pub combined: Vec<f64>,
}

/// Graph-only inputs of one placement step.
#[derive(Debug, Clone)]
struct EmbedInput {
    global_x: Matrix,
    global_a: Matrix,
    local_x: Matrix,
    local_a: Matrix,
    edge_counts: [f64; EDGE_TYPES],
    cond: Vec<f64>,
}

fn one_hot_rows(model: &PlacementModel, g: &SceneGraph, ids: &[usize], extra: usize) -> Result<Matrix> {
    let c = model.registry.node_codes().len();
    let mut x = Matrix::zeros(ids.len(), c + extra);
    for (r, &id) in ids.iter().enumerate() {
        x[(r, model.category_index(g.category(id))?)] = 1.0;
    }
    Ok(x)
}

fn induced_adjacency(g: &SceneGraph, ids: &[usize]) -> Matrix {
    let mut pos = vec![usize::MAX; g.len()];
    for (r, &id) in ids.iter().enumerate() {
        pos[id] = r;
    }
    let mut a = Matrix::zeros(ids.len(), ids.len());
    for e in &g.edges {
        let (i, j) = (pos[e.u], pos[e.v]);
        if i != usize::MAX && j != usize::MAX {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
    }
    a
}

/// Shell nodes count as placed: they are fixed by the room.
fn embed_input(
    model: &PlacementModel,
    g: &SceneGraph,
    placed: &[bool],
    next: usize,
    cond: &[f64],
) -> Result<EmbedInput> {
    let all: Vec<usize> = (0..g.len()).collect();
    let local_ids: Vec<usize> = (0..g.len())
        .filter(|&i| i == next || placed[i] || node_kind(g.category(i)) != NodeKind::Object)
        .collect();
    let mut local_x = one_hot_rows(model, g, &local_ids, 1)?;
    let flag = local_x.cols() - 1;
    let r = local_ids.iter().position(|&i| i == next).expect("next is local");
    local_x[(r, flag)] = 1.0;
    let mut edge_counts = [0.0; EDGE_TYPES];
    for e in g.incident(next) {
        let o = e.other(next);
        if placed[o] || node_kind(g.category(o)) != NodeKind::Object {
            edge_counts[e.edge_type as usize - 1] += 1.0;
        }
    }
    Ok(EmbedInput {
        global_x: one_hot_rows(model, g, &all, 0)?,
        global_a: normalize_adjacency(&Matrix::from_rows(&g.adjacency())?)?,
        local_x,
        local_a: normalize_adjacency(&induced_adjacency(g, &local_ids))?,
        edge_counts,
        cond: cond.to_vec(),
    })
}

struct EmbedPass {
    global: GcnCache,
    global_rows: usize,
    local: GcnCache,
    local_rows: usize,
    fusion: FnnCache,
    parts: MixtureEmbedding,
}

fn embed_forward(p: &EmbeddingParams, input: &EmbedInput) -> Result<EmbedPass> {
    let (hg, global) = gcn_forward_cached(&input.global_x, &input.global_a, &p.global0, &p.global1)?;
    let (hl, local) = gcn_forward_cached(&input.local_x, &input.local_a, &p.local0, &p.local1)?;
    let gv = hg.mean_rows();
    let lv = hl.mean_rows();
    let mut ev = vec![0.0; p.edge_table.cols()];
    for (t, &count) in input.edge_counts.iter().enumerate() {
        if count != 0.0 {
            for (e, w) in ev.iter_mut().zip(p.edge_table.row(t)) {
                *e += count * w;
            }
        }
    }
    let fin: Vec<f64> = gv
        .iter()
        .chain(&lv)
        .chain(&ev)
        .chain(&input.cond)
        .copied()
        .collect();
    let (out, fusion) = fnn_forward_rows(&Matrix::row_vector(&fin), &p.fusion)?;
    Ok(EmbedPass {
        global,
        global_rows: input.global_x.rows(),
        local,
        local_rows: input.local_x.rows(),
        fusion,
        parts: MixtureEmbedding {
            global: gv,
            local: lv,
            edge_type: ev,
            combined: out.row(0).to_vec(),
        },
    })
}

fn spread_rows(g: &[f64], rows: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, g.len());
    for i in 0..rows {
        for (d, s) in m.row_mut(i).iter_mut().zip(g) {
            *d = s / rows as f64;
        }
    }
    m
}

fn embed_backward(
    p: &EmbeddingParams,
    input: &EmbedInput,
    pass: &EmbedPass,
    g_combined: &[f64],
    grads: &mut EmbeddingParams,
) {
    let g_fin = fnn_backward(
        &pass.fusion,
        &p.fusion,
        &Matrix::row_vector(g_combined),
        &mut grads.fusion,
    );
    let g_fin = g_fin.row(0);
    let h = p.global1.outputs();
    let e = p.edge_table.cols();
    gcn_backward(
        &pass.global,
        &p.global0,
        &p.global1,
        &spread_rows(&g_fin[..h], pass.global_rows),
        &mut grads.global0,
        &mut grads.global1,
    );
    gcn_backward(
        &pass.local,
        &p.local0,
        &p.local1,
        &spread_rows(&g_fin[h..2 * h], pass.local_rows),
        &mut grads.local0,
        &mut grads.local1,
    );
    let g_e = &g_fin[2 * h..2 * h + e];
    for (t, &count) in input.edge_counts.iter().enumerate() {
        if count != 0.0 {
            for (w, g) in grads.edge_table.row_mut(t).iter_mut().zip(g_e) {
                *w += count * g;
            }
        }
    }
}

/// Mixture embedding for placing `next` after `placed` (object node ids;
/// wall and opening nodes are always treated as placed).
pub fn mixture_embed(
    model: &PlacementModel,
    g: &SceneGraph,
    placed: &[usize],
    next: usize,
    cond_vec: &[f64],
) -> Result<MixtureEmbedding> {
    if next >= g.len() {
        return Err(Error::arg(format!("node {next} is not in the graph")));
    }
    if placed.contains(&next) {
        return Err(Error::arg(format!("node {next} is already placed")));
    }
    if cond_vec.len() != model.schema.len() {
        return Err(Error::SchemaMismatch("condition vector length".into()));
    }
    let mut mask = vec![false; g.len()];
    for &p in placed {
        if p >= g.len() {
            return Err(Error::arg(format!("placed node {p} is not in the graph")));
        }
        mask[p] = true;
    }
    let input = embed_input(model, g, &mask, next, cond_vec)?;
    Ok(embed_forward(&model.params.embed, &input)?.parts)
}

// ---------------------------------------------------------------------------
// Scene state, bindings and predicates

/// Where each graph node currently sits. Shell nodes carry the set of room
/// elements they may still be bound to.
#[derive(Debug, Clone)]
pub struct Realization {
    diagonal: f64,
    categories: Vec<u32>,
    room: Vec<NodeGeom>,
    room_categories: Vec<u32>,
    /// Candidate room elements for shell nodes; empty for objects.
    domains: Vec<Vec<usize>>,
    /// Accepted shell–shell relations kept arc-consistent.
    shell_edges: Vec<Edge>,
    positions: Vec<Option<Point2>>,
}

impl Realization {
    /// Every shell node may bind to any room element of its category.
    pub fn new(g: &SceneGraph, shell: &RoomShell) -> Self {
        let (room_categories, room) = shell_geometry(shell);
        let domains = g
            .nodes
            .iter()
            .map(|n| match node_kind(n.category) {
                NodeKind::Object => Vec::new(),
                _ => (0..room.len())
                    .filter(|&r| room_categories[r] == n.category)
                    .collect(),
            })
            .collect();
        Self {
            diagonal: shell.diagonal(),
            categories: g.categories(),
            room,
            room_categories,
            domains,
            shell_edges: Vec::new(),
            positions: vec![None; g.len()],
        }
    }

    /// Binding fixed to the identity: shell node `i` is room element `i`, as in
    /// graphs extracted from a scene in this room.
    pub fn extracted(g: &SceneGraph, shell: &RoomShell) -> Result<Self> {
        let mut r = Self::new(g, shell);
        for i in 0..r.room.len() {
            if i >= g.len() || g.category(i) != r.room_categories[i] {
                return Err(Error::arg("graph shell nodes do not match the room"));
            }
            r.domains[i] = vec![i];
        }
        Ok(r)
    }

    pub fn is_shell(&self, n: usize) -> bool {
        node_kind(self.categories[n]) != NodeKind::Object
    }

    /// A node is realized when it is a placed object or a bindable shell node.
    pub fn is_realized(&self, n: usize) -> bool {
        if self.is_shell(n) {
            !self.domains[n].is_empty()
        } else {
            self.positions[n].is_some()
        }
    }

    pub fn place(&mut self, n: usize, p: Point2) {
        self.positions[n] = Some(p);
    }

    fn candidates(&self, n: usize) -> Vec<NodeGeom> {
        if self.is_shell(n) {
            self.domains[n].iter().map(|&r| self.room[r]).collect()
        } else {
            self.positions[n].map(NodeGeom::Point).into_iter().collect()
        }
    }

    fn bucket_ok(&self, a: &NodeGeom, b: &NodeGeom, edge_type: u8) -> bool {
        let Some((_, bucket)) = decode_edge_type(edge_type) else {
            return false;
        };
        distance_bucket(geom_distance(a, b), self.diagonal).is_ok_and(|d| d == bucket)
    }

    fn class_ok(&self, e: &Edge) -> bool {
        match (
            decode_edge_type(e.edge_type),
            semantic_class(self.categories[e.u], self.categories[e.v]),
        ) {
            (Some((class, _)), Some(actual)) => class == actual,
            _ => false,
        }
    }

    /// Whether the relation holds for some remaining binding of its shell
    /// endpoints. Both endpoints must be realized.
    pub fn predicate_holds(&self, e: &Edge) -> Result<bool> {
        for n in [e.u, e.v] {
            if n >= self.categories.len() || !self.is_realized(n) {
                return Err(Error::arg(format!("node {n} is not placed")));
            }
        }
        if !self.class_ok(e) {
            return Ok(false);
        }
        let (cu, cv) = (self.candidates(e.u), self.candidates(e.v));
        Ok(cu
            .iter()
            .any(|a| cv.iter().any(|b| self.bucket_ok(a, b, e.edge_type))))
    }

    /// As [`Self::predicate_holds`] with `n` hypothetically at `p`.
    fn holds_at(&self, e: &Edge, n: usize, p: Point2) -> bool {
        if !self.class_ok(e) {
            return false;
        }
        let here = NodeGeom::Point(p);
        self.candidates(e.other(n))
            .iter()
            .any(|b| self.bucket_ok(&here, b, e.edge_type))
    }

    /// Narrows shell domains so every accepted shell–shell relation has
    /// support. Returns false (leaving `self` unchanged) when some domain
    /// would become empty.
    fn propagate(&mut self) -> bool {
        let backup = self.domains.clone();
        loop {
            let mut changed = false;
            for e in &self.shell_edges {
                for (a, b) in [(e.u, e.v), (e.v, e.u)] {
                    let keep: Vec<usize> = self.domains[a]
                        .iter()
                        .copied()
                        .filter(|&ra| {
                            self.domains[b]
                                .iter()
                                .any(|&rb| self.bucket_ok(&self.room[ra], &self.room[rb], e.edge_type))
                        })
                        .collect();
                    if keep.len() != self.domains[a].len() {
                        if keep.is_empty() {
                            self.domains = backup;
                            return false;
                        }
                        self.domains[a] = keep;
                        changed = true;
                    }
                }
            }
            if !changed {
                return true;
            }
        }
    }

    /// Tries to enforce a shell–shell relation; false when it cannot hold.
    fn accept_shell_edge(&mut self, e: &Edge) -> bool {
        if !self.class_ok(e) || !self.is_realized(e.u) || !self.is_realized(e.v) {
            return false;
        }
        self.shell_edges.push(*e);
        if self.propagate() {
            true
        } else {
            self.shell_edges.pop();
            false
        }
    }

    /// Restricts the shell endpoint of a satisfied object–shell relation to
    /// the elements that satisfy it.
    fn commit_object_edge(&mut self, e: &Edge, object: usize) {
        let shell = e.other(object);
        if !self.is_shell(shell) || self.domains[shell].is_empty() {
            return;
        }
        let Some(p) = self.positions[object] else {
            return;
        };
        let here = NodeGeom::Point(p);
        let keep: Vec<usize> = self.domains[shell]
            .iter()
            .copied()
            .filter(|&r| self.bucket_ok(&here, &self.room[r], e.edge_type))
            .collect();
        if keep.is_empty() {
            return;
        }
        let backup = self.domains[shell].clone();
        self.domains[shell] = keep;
        if !self.propagate() {
            self.domains[shell] = backup;
        }
    }

    /// Picks one room element per bindable shell node, lowest index first.
    fn finalize(&mut self) -> Vec<Option<usize>> {
        for n in 0..self.domains.len() {
            if self.domains[n].len() > 1 {
                let backup = self.domains[n].clone();
                for &choice in &backup {
                    self.domains[n] = vec![choice];
                    if self.propagate() {
                        break;
                    }
                    self.domains[n] = backup.clone();
                }
                if self.domains[n].len() > 1 {
                    self.domains[n].truncate(1);
                }
            }
        }
        self.domains.iter().map(|d| d.first().copied()).collect()
    }
}

/// Whether edge `(u, v, type)` is satisfied by the realized positions: the
/// semantic class matches the endpoint categories and the realized distance
/// falls in the edge's bucket.
pub fn predicate_check(state: &Realization, edge: &Edge) -> Result<bool> {
    state.predicate_holds(edge)
}

// ---------------------------------------------------------------------------
// Cells and per-position features

/// Location-head inputs for one object: features and mask per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellContext {
    pub grid: usize,
    pub lo: Point2,
    pub hi: Point2,
    /// `grid² × CELL_FEATURES`, row `j·grid + i` for column i, row j.
    pub features: Matrix,
    /// True for cells that may receive probability.
    pub open: Vec<bool>,
}

impl CellContext {
    pub fn cell_count(&self) -> usize {
        self.grid * self.grid
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (
            (self.hi.x - self.lo.x) / self.grid as f64,
            (self.hi.y - self.lo.y) / self.grid as f64,
        )
    }

    pub fn center(&self, cell: usize) -> Point2 {
        let (w, h) = self.cell_size();
        let (i, j) = (cell % self.grid, cell / self.grid);
        Point2::new(self.lo.x + (i as f64 + 0.5) * w, self.lo.y + (j as f64 + 0.5) * h)
    }

    pub fn cell_of(&self, p: &Point2) -> usize {
        let (w, h) = self.cell_size();
        let i = (((p.x - self.lo.x) / w).floor().max(0.0) as usize).min(self.grid - 1);
        let j = (((p.y - self.lo.y) / h).floor().max(0.0) as usize).min(self.grid - 1);
        j * self.grid + i
    }
}

/// The geometry an object is being placed into.
struct PlacementScene<'a> {
    shell: &'a RoomShell,
    items: &'a [FurnitureItem],
}

impl PlacementScene<'_> {
    fn footprint_ok(&self, r: &Rect) -> (bool, bool) {
        let inside = rect_in_polygon(r, &self.shell.boundary);
        let free = self
            .items
            .iter()
            .all(|it| it.footprint().intersection_area(r) <= OVERLAP_TOLERANCE);
        (inside, free)
    }

    fn wall_distances(&self, p: &Point2) -> (f64, f64) {
        let mut d: Vec<f64> = (0..self.shell.wall_count())
            .map(|w| {
                let (a, b) = self.shell.wall(w);
                crate::geometry::point_segment_distance(p, &a, &b)
            })
            .collect();
        d.sort_by(f64::total_cmp);
        (d[0], d.get(1).copied().unwrap_or(d[0]))
    }

    fn opening_distance(&self, p: &Point2, kind: crate::scene::OpeningKind) -> Option<f64> {
        self.shell
            .openings
            .iter()
            .filter(|o| o.kind == kind)
            .map(|o| self.shell.opening_center(o).distance(p))
            .min_by(f64::total_cmp)
    }
}

fn cell_context(
    grid: usize,
    scene: &PlacementScene,
    state: &Realization,
    edges: &[Edge],
    node: usize,
    size: Size2,
) -> CellContext {
    let (lo, hi) = scene.shell.bounding_box();
    let diag = scene.shell.diagonal();
    let mut ctx = CellContext {
        grid,
        lo,
        hi,
        features: Matrix::zeros(grid * grid, CELL_FEATURES),
        open: vec![false; grid * grid],
    };
    for cell in 0..grid * grid {
        let p = ctx.center(cell);
        let inside = point_in_polygon(&p, &scene.shell.boundary);
        let covered = scene.items.iter().any(|it| it.footprint().contains(&p));
        ctx.open[cell] = inside && !covered;

        let satisfied = edges.iter().filter(|e| state.holds_at(e, node, p)).count();
        let frac = if edges.is_empty() {
            1.0
        } else {
            satisfied as f64 / edges.len() as f64
        };
        let (w1, w2) = scene.wall_distances(&p);
        let fits = [(size.width, size.depth), (size.depth, size.width)]
            .iter()
            .any(|&(ex, ey)| {
                let (inside, free) = scene.footprint_ok(&Rect::centered(p, ex, ey));
                inside && free
            });
        let nearest_item = scene
            .items
            .iter()
            .map(|it| it.position.distance(&p))
            .min_by(f64::total_cmp);
        let door = scene.opening_distance(&p, crate::scene::OpeningKind::Door);
        let window = scene.opening_distance(&p, crate::scene::OpeningKind::Window);
        let f = ctx.features.row_mut(cell);
        f[0] = 1.0;
        f[1] = frac;
        f[2] = if satisfied == edges.len() { 1.0 } else { 0.0 };
        f[3] = w1 / diag;
        f[4] = (-w1 / 0.3).exp();
        f[5] = (-w2 / 0.3).exp();
        f[6] = if fits { 1.0 } else { 0.0 };
        f[7] = (p.x - lo.x) / (hi.x - lo.x);
        f[8] = (p.y - lo.y) / (hi.y - lo.y);
        f[9] = door.map_or(1.0, |d| d / diag);
        f[10] = window.map_or(1.0, |d| d / diag);
        f[11] = nearest_item.map_or(0.0, |d| (-d / 0.5).exp());
    }
    ctx
}

/// Per-direction features at a position: closeness of the wall behind and of
/// the wall in front.
fn direction_features(shell: &RoomShell, p: &Point2) -> Matrix {
    let mut m = Matrix::zeros(4, DIRECTION_FEATURES);
    for d in Direction::ALL {
        let (ux, uy) = d.unit();
        let back = ray_exit_distance(p, (-ux, -uy), &shell.boundary);
        let front = ray_exit_distance(p, (ux, uy), &shell.boundary);
        m[(d.index(), 0)] = (-back / 0.5).exp();
        m[(d.index(), 1)] = (-front / 0.5).exp();
    }
    m
}

// ---------------------------------------------------------------------------
// Heads

fn head_input(model: &PlacementModel, combined: &[f64], category: u32) -> Result<Vec<f64>> {
    let mut x = combined.to_vec();
    let mut onehot = vec![0.0; model.registry.node_codes().len()];
    onehot[model.category_index(category)?] = 1.0;
    x.extend(onehot);
    Ok(x)
}

fn masked_softmax(logits: &[f64], open: &[bool]) -> Vec<f64> {
    let m = logits
        .iter()
        .zip(open)
        .filter(|(_, &o)| o)
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .iter()
        .zip(open)
        .map(|(l, &o)| if o { (l - m).exp() } else { 0.0 })
        .collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

fn location_logits(model: &PlacementModel, x: &[f64], cells: &CellContext) -> Vec<f64> {
    let q = model
        .params
        .heads
        .location
        .affine(&Matrix::row_vector(x))
        .expect("shape");
    (0..cells.cell_count())
        .map(|c| {
            cells
                .features
                .row(c)
                .iter()
                .zip(q.row(0))
                .map(|(u, w)| u * w)
                .sum()
        })
        .collect()
}

fn orientation_logits(model: &PlacementModel, x: &[f64], dir_features: &Matrix) -> Vec<f64> {
    let h = &model.params.heads;
    let base = h.orientation.affine(&Matrix::row_vector(x)).expect("shape");
    let extra = h.orientation_cell.affine(dir_features).expect("shape");
    (0..4).map(|d| base[(0, d)] + extra[(d, 0)]).collect()
}

fn size_head(model: &PlacementModel, x: &[f64]) -> Vec<f64> {
    model
        .params
        .heads
        .size
        .affine(&Matrix::row_vector(x))
        .expect("shape")
        .row(0)
        .to_vec()
}

/// Mean size scaled by `exp(head)`, clipped to mean ± 2 standard deviations.
fn size_from_head(stats: &SizeStats, head: &[f64]) -> Size2 {
    let clip = |mean: f64, std: f64, h: f64| {
        let v = mean * h.exp();
        v.clamp((mean - 2.0 * std).max(1e-3), mean + 2.0 * std)
    };
    Size2 {
        width: clip(stats.mean_width, stats.std_width, head[0]),
        depth: clip(stats.mean_depth, stats.std_depth, head[1]),
    }
}

/// Location distribution and size for one object. Orientation depends on the
/// chosen position; see [`orientation_distribution`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementDistributions {
    /// Probability per grid cell; zero on closed cells.
    pub cells: Vec<f64>,
    pub size: Size2,
}

pub fn predict_placement(
    model: &PlacementModel,
    embed: &[f64],
    category: u32,
    cells: &CellContext,
) -> Result<PlacementDistributions> {
    if !cells.open.iter().any(|&o| o) {
        return Err(Error::NoSpace { node: usize::MAX });
    }
    let x = head_input(model, embed, category)?;
    let stats = model.stats.get(category)?;
    Ok(PlacementDistributions {
        cells: masked_softmax(&location_logits(model, &x, cells), &cells.open),
        size: size_from_head(stats, &size_head(model, &x)),
    })
}

/// Probability of each facing direction (indexed as [`Direction::ALL`]) for
/// an object of `category` at `position`.
pub fn orientation_distribution(
    model: &PlacementModel,
    embed: &[f64],
    category: u32,
    shell: &RoomShell,
    position: &Point2,
) -> Result<Vec<f64>> {
    let x = head_input(model, embed, category)?;
    Ok(softmax(&orientation_logits(
        model,
        &x,
        &direction_features(shell, position),
    )))
}

// ---------------------------------------------------------------------------
// Training

struct StepData {
    embed: EmbedInput,
    category: u32,
    cells: CellContext,
    target_cell: usize,
    dir_features: Matrix,
    target_dir: usize,
    log_ratio: [f64; 2],
}

fn step_data(model: &PlacementModel, scene: &Scene, g: &SceneGraph) -> Result<Vec<StepData>> {
    let cond = encode_condition(&scene.condition, &model.schema)?;
    let mut state = Realization::extracted(g, &scene.shell)?;
    let order = instantiation_order(g, &model.stats)?;
    let first_item = scene.shell.wall_count() + scene.shell.openings.len();
    let mut placed = vec![false; g.len()];
    let mut items: Vec<FurnitureItem> = Vec::new();
    let mut steps = Vec::new();
    for &node in &order {
        let item = &scene.items[node - first_item];
        let stats = model.stats.get(item.category)?;
        let edges: Vec<Edge> = g
            .incident(node)
            .filter(|e| state.is_realized(e.other(node)))
            .copied()
            .collect();
        let ps = PlacementScene {
            shell: &scene.shell,
            items: &items,
        };
        let mut cells = cell_context(
            model.config.grid,
            &ps,
            &state,
            &edges,
            node,
            Size2 {
                width: stats.mean_width,
                depth: stats.mean_depth,
            },
        );
        let target_cell = cells.cell_of(&item.position);
        cells.open[target_cell] = true;
        steps.push(StepData {
            embed: embed_input(model, g, &placed, node, &cond)?,
            category: item.category,
            cells,
            target_cell,
            dir_features: direction_features(&scene.shell, &item.position),
            target_dir: item.direction.index(),
            log_ratio: [
                (item.size.width / stats.mean_width).ln(),
                (item.size.depth / stats.mean_depth).ln(),
            ],
        });
        placed[node] = true;
        state.place(node, item.position);
        items.push(item.clone());
    }
    Ok(steps)
}

/// Teacher-forced loss of one step and its gradients.
fn placement_step(
    model: &PlacementModel,
    s: &StepData,
    grads: &mut PlacementParams,
) -> Result<PlacementLoss> {
    let p = &model.params;
    let pass = embed_forward(&p.embed, &s.embed)?;
    let x = head_input(model, &pass.parts.combined, s.category)?;
    let xm = Matrix::row_vector(&x);

    let probs = masked_softmax(&location_logits(model, &x, &s.cells), &s.cells.open);
    let location_ce = -probs[s.target_cell].max(1e-300).ln();
    let mut g_q = vec![0.0; CELL_FEATURES];
    for (c, &pc) in probs.iter().enumerate() {
        let g = pc - if c == s.target_cell { 1.0 } else { 0.0 };
        if g != 0.0 {
            for (gq, u) in g_q.iter_mut().zip(s.cells.features.row(c)) {
                *gq += g * u;
            }
        }
    }
    let mut g_x = p
        .heads
        .location
        .affine_backward(&xm, &Matrix::row_vector(&g_q), &mut grads.heads.location);

    let op = softmax(&orientation_logits(model, &x, &s.dir_features));
    let orientation_ce = -op[s.target_dir].max(1e-300).ln();
    let g_o: Vec<f64> = op
        .iter()
        .enumerate()
        .map(|(d, &q)| q - if d == s.target_dir { 1.0 } else { 0.0 })
        .collect();
    g_x.add_assign(&p.heads.orientation.affine_backward(
        &xm,
        &Matrix::row_vector(&g_o),
        &mut grads.heads.orientation,
    ));
    let g_cell = Matrix::from_vec(4, 1, g_o).expect("shape");
    p.heads
        .orientation_cell
        .affine_backward(&s.dir_features, &g_cell, &mut grads.heads.orientation_cell);

    let sh = size_head(model, &x);
    let size_se: f64 = sh.iter().zip(&s.log_ratio).map(|(a, b)| (a - b).powi(2)).sum();
    let g_s: Vec<f64> = sh.iter().zip(&s.log_ratio).map(|(a, b)| 2.0 * (a - b)).collect();
    g_x.add_assign(
        &p.heads
            .size
            .affine_backward(&xm, &Matrix::row_vector(&g_s), &mut grads.heads.size),
    );

    let fd = model.config.fusion_dim;
    embed_backward(&p.embed, &s.embed, &pass, &g_x.row(0)[..fd], &mut grads.embed);
    Ok(PlacementLoss {
        location_ce,
        orientation_ce,
        size_se,
    })
}

/// Worst finite-difference relative error of the teacher-forced placement
/// loss over every placement step of `scene` (with its extracted graph `g`).
pub fn check_placement_gradients(model: &PlacementModel, scene: &Scene, g: &SceneGraph) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in step_data(model, scene, g)? {
        let err = grad_check(
            |w| {
                let mut m = model.clone();
                m.params.assign(w);
                let mut grads = m.params.zeroed();
                match placement_step(&m, &s, &mut grads) {
                    Ok(l) => (l.location_ce + l.orientation_ce + l.size_se, grads.flatten()),
                    Err(_) => (f64::NAN, vec![f64::NAN; w.len()]),
                }
            },
            &model.params.flatten(),
            DEFAULT_EPSILON,
        )?;
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Trains a placement model on scenes paired with their extracted graphs.
pub fn train_instantiator(data: &[(Scene, SceneGraph)], config: &PlacementConfig) -> Result<PlacementModel> {
    let room = data
        .first()
        .ok_or_else(|| Error::arg("no training scenes"))?
        .0
        .room_type;
    let scenes: Vec<Scene> = data.iter().map(|(s, _)| s.clone()).collect();
    let stats = CategoryStats::from_scenes(&scenes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = PlacementModel::new(
        ConditionSchema::for_room(room),
        CategoryRegistry::for_room(room),
        stats,
        config.clone(),
        &mut rng,
    )?;
    let mut steps = Vec::new();
    for (scene, g) in data {
        if scene.room_type != room {
            return Err(Error::SchemaMismatch("training scenes mix room types".into()));
        }
        steps.extend(step_data(&model, scene, g)?);
    }
    if steps.is_empty() {
        return Err(Error::arg("training scenes contain no furniture"));
    }
    let lr = config.learning_rate;
    let mut order: Vec<usize> = (0..steps.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut sum = PlacementLoss::default();
        for &i in &order {
            let mut grads = model.params.zeroed();
            let l = placement_step(&model, &steps[i], &mut grads)?;
            let total = l.location_ce + l.orientation_ce + l.size_se;
            if !total.is_finite() || !grads.all_finite() {
                return Err(Error::Training {
                    step: "placement",
                    epoch,
                });
            }
            let mut sq = 0.0;
            grads.visit(&mut |s| sq += s.iter().map(|v| v * v).sum::<f64>());
            let scale = if sq.sqrt() > config.max_grad_norm {
                config.max_grad_norm / sq.sqrt()
            } else {
                1.0
            };
            model.params.add_scaled(&grads, -lr * scale);
            sum.location_ce += l.location_ce;
            sum.orientation_ce += l.orientation_ce;
            sum.size_se += l.size_se;
        }
        let k = steps.len() as f64;
        model.loss_curve.push(PlacementLoss {
            location_ce: sum.location_ce / k,
            orientation_ce: sum.orientation_ce / k,
            size_se: sum.size_se / k,
        });
    }
    Ok(model)
}

// ---------------------------------------------------------------------------
// Sampling

/// Problems left in a sampled scene after the retry budget ran out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlacementViolation {
    /// No attempt satisfied every relation to earlier nodes.
    Predicates { node: usize, failed: usize },
    /// No attempt avoided earlier items.
    Overlap { node: usize },
    /// No sampled attempt was clean; the item was placed by lattice search.
    Repaired { node: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledScene {
    pub scene: Scene,
    /// Scene item index for every object node (`None` for shell nodes).
    pub item_of_node: Vec<Option<usize>>,
    /// Room element bound to every shell node, when one exists.
    pub binding: Vec<Option<usize>>,
    /// Graph relations whose endpoints were both realized.
    pub predicates_checked: usize,
    pub predicates_failed: usize,
    pub violations: Vec<PlacementViolation>,
}

impl From<SampledScene> for crate::eval::CheckedScene {
    fn from(s: SampledScene) -> Self {
        Self {
            scene: s.scene,
            predicates_checked: s.predicates_checked,
            predicates_failed: s.predicates_failed,
        }
    }
}

#[derive(Debug, Clone)]
struct Attempt {
    item: FurnitureItem,
    outside: bool,
    overlap: bool,
    failed: usize,
}

impl Attempt {
    fn score(&self) -> (usize, usize) {
        (self.outside as usize + self.overlap as usize, self.failed)
    }
}

fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last = i;
            if u < p {
                return i;
            }
            u -= p;
        }
    }
    last
}

/// Deterministic fallback once sampling is exhausted: scans a fine lattice
/// of positions (two footprint orientations) for the in-room placement with
/// no overlap and the fewest failed relations, preferring small moves.
fn repair_search(
    item: &FurnitureItem,
    ps: &PlacementScene,
    grid: usize,
    failed_at: impl Fn(Point2) -> usize,
) -> Option<Attempt> {
    let (lo, hi) = ps.shell.bounding_box();
    let steps = grid * 4;
    let mut best: Option<((bool, usize, f64, f64), Attempt)> = None;
    for dir in [item.direction, item.direction.rotated()] {
        for j in 0..=steps {
            for i in 0..=steps {
                let p = Point2::new(
                    lo.x + (hi.x - lo.x) * i as f64 / steps as f64,
                    lo.y + (hi.y - lo.y) * j as f64 / steps as f64,
                );
                let cand = FurnitureItem {
                    position: p,
                    direction: dir,
                    ..item.clone()
                };
                let r = cand.footprint();
                if !rect_in_polygon(&r, &ps.shell.boundary) {
                    continue;
                }
                let overlap: f64 = ps
                    .items
                    .iter()
                    .map(|it| it.footprint().intersection_area(&r))
                    .sum();
                let blocked = ps
                    .items
                    .iter()
                    .any(|it| it.footprint().intersection_area(&r) > OVERLAP_TOLERANCE);
                let failed = failed_at(p);
                let key = (blocked, failed, overlap, p.distance(&item.position));
                if best.as_ref().is_none_or(|(k, _)| key < *k) {
                    best = Some((
                        key,
                        Attempt {
                            item: cand,
                            outside: false,
                            overlap: blocked,
                            failed,
                        },
                    ));
                }
            }
        }
    }
    best.map(|(_, a)| a)
}

impl Direction {
    fn rotated(self) -> Direction {
        Direction::from_index(self.index() + 1)
    }
}

/// Instantiates `g` in `room`, placing objects in instantiation order.
pub fn sample_scene(
    model: &PlacementModel,
    g: &SceneGraph,
    cond: ConditionCode,
    room: &RoomShell,
    seed: u64,
) -> Result<SampledScene> {
    room.check()?;
    if cond.room_type != model.room_type() {
        return Err(Error::SchemaMismatch(format!(
            "{} condition given to a {} placement model",
            cond.room_type,
            model.room_type()
        )));
    }
    g.check()?;
    let cond_vec = encode_condition(&cond, &model.schema)?;
    let order = instantiation_order(g, &model.stats)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = Realization::new(g, room);

    let mut shell_edges: Vec<Edge> = g
        .edges
        .iter()
        .filter(|e| state.is_shell(e.u) && state.is_shell(e.v))
        .copied()
        .collect();
    shell_edges.sort_by_key(|e| (e.u, e.v, e.edge_type));
    for e in &shell_edges {
        state.accept_shell_edge(e);
    }

    let mut placed = vec![false; g.len()];
    let mut items: Vec<(usize, FurnitureItem)> = Vec::new();
    let mut violations = Vec::new();
    for &node in &order {
        let category = g.category(node);
        let stats = *model.stats.get(category)?;
        let edges: Vec<Edge> = g
            .incident(node)
            .filter(|e| state.is_realized(e.other(node)))
            .copied()
            .collect();
        let current: Vec<FurnitureItem> = items.iter().map(|(_, it)| it.clone()).collect();
        let ps = PlacementScene {
            shell: room,
            items: &current,
        };
        let input = embed_input(model, g, &placed, node, &cond_vec)?;
        let embed = embed_forward(&model.params.embed, &input)?.parts.combined;
        let mean = Size2 {
            width: stats.mean_width,
            depth: stats.mean_depth,
        };
        let cells = cell_context(model.config.grid, &ps, &state, &edges, node, mean);
        let dist = predict_placement(model, &embed, category, &cells).map_err(|e| match e {
            Error::NoSpace { .. } => Error::Instantiation {
                node,
                reason: "every grid cell is occupied or outside the room".into(),
            },
            other => other,
        })?;

        // Proposal tiers: cells where the mean-sized item fits and every
        // relation holds, then cells where it fits, then every open cell. The
        // exact checks below decide acceptance.
        let tier = |col: &[usize]| -> Vec<f64> {
            dist.cells
                .iter()
                .enumerate()
                .map(|(c, &p)| {
                    if col.iter().all(|&k| cells.features[(c, k)] == 1.0) {
                        p
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let proposal = [tier(&[2, 6]), tier(&[6])]
            .into_iter()
            .find(|t| t.iter().sum::<f64>() > 0.0)
            .unwrap_or_else(|| dist.cells.clone());
        let failed_at = |p: Point2| edges.iter().filter(|e| !state.holds_at(e, node, p)).count();
        let (cw, ch) = cells.cell_size();
        let mut best: Option<Attempt> = None;
        for _ in 0..model.config.retries.max(1) {
            let cell = sample_index(&proposal, &mut rng);
            let c = cells.center(cell);
            let p = Point2::new(
                c.x + (rng.random::<f64>() - 0.5) * cw,
                c.y + (rng.random::<f64>() - 0.5) * ch,
            );
            let od = orientation_distribution(model, &embed, category, room, &p)?;
            let direction = Direction::from_index(sample_index(&od, &mut rng));
            let item = FurnitureItem {
                category,
                position: p,
                size: dist.size,
                direction,
            };
            let (inside, free) = ps.footprint_ok(&item.footprint());
            let attempt = Attempt {
                item,
                outside: !inside,
                overlap: !free,
                failed: failed_at(p),
            };
            let done = attempt.score() == (0, 0);
            if best.as_ref().is_none_or(|b| attempt.score() < b.score()) {
                best = Some(attempt);
            }
            if done {
                break;
            }
        }
        let mut chosen = best.expect("at least one attempt");
        if chosen.score() != (0, 0) {
            let repaired = repair_search(&chosen.item, &ps, model.config.grid, failed_at);
            match repaired {
                Some(r) if chosen.outside || r.score() < chosen.score() => {
                    chosen = r;
                    violations.push(PlacementViolation::Repaired { node });
                }
                None if chosen.outside => {
                    return Err(Error::Instantiation {
                        node,
                        reason: "the item does not fit inside the room".into(),
                    });
                }
                _ => {}
            }
        }
        if chosen.overlap {
            violations.push(PlacementViolation::Overlap { node });
        }
        if chosen.failed > 0 {
            violations.push(PlacementViolation::Predicates {
                node,
                failed: chosen.failed,
            });
        }
        state.place(node, chosen.item.position);
        for e in &edges {
            if state.holds_at(e, node, chosen.item.position) {
                state.commit_object_edge(e, node);
            }
        }
        placed[node] = true;
        items.push((node, chosen.item));
    }

    let binding = state.finalize();
    let mut checked = 0;
    let mut failed = 0;
    for e in &g.edges {
        if state.is_realized(e.u) && state.is_realized(e.v) {
            checked += 1;
            if !state.predicate_holds(e)? {
                failed += 1;
            }
        }
    }

    items.sort_by_key(|(n, _)| *n);
    let mut item_of_node = vec![None; g.len()];
    for (i, (n, _)) in items.iter().enumerate() {
        item_of_node[*n] = Some(i);
    }
    Ok(SampledScene {
        scene: Scene {
            room_type: model.room_type(),
            shell: room.clone(),
            items: items.into_iter().map(|(_, it)| it).collect(),
            condition: cond,
        },
        item_of_node,
        binding,
        predicates_checked: checked,
        predicates_failed: failed,
        violations,
    })
}
