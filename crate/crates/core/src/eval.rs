//! Generation accuracy against a learned graph labeler, scene validity
//! counts, and export of side-by-side comparison pairs.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{check_chain, MatrixStore, CHECKPOINT_VERSION};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::graph::SceneGraph;
use crate::numeric::nn::{
    fnn_backward, fnn_forward_rows, gcn_backward, gcn_forward_cached, softmax, FnnCache, GcnCache,
};
use crate::numeric::{grad_check, normalize_adjacency, LayerParams, Matrix, Params, DEFAULT_EPSILON};
use crate::scene::{validate_scene, CategoryRegistry, ConditionSchema, RoomType, Scene, Violation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelerConfig {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Fraction of graphs held out for the reported accuracy.
    pub holdout: f64,
    pub seed: u64,
}

impl Default for LabelerConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            epochs: 100,
            learning_rate: 0.05,
            holdout: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelerParams {
    pub gcn0: LayerParams,
    pub gcn1: LayerParams,
    pub head: LayerParams,
}

impl Params for LabelerParams {
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

/// Classifies a graph into one of its room type's condition labels from
/// one-hot node categories and structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LabelerCheckpoint", try_from = "LabelerCheckpoint")]
pub struct GraphLabeler {
    pub config: LabelerConfig,
    pub schema: ConditionSchema,
    pub registry: CategoryRegistry,
    pub params: LabelerParams,
    pub holdout_accuracy: Option<f64>,
    pub loss_curve: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LabelerCheckpoint {
    format_version: u64,
    config: LabelerConfig,
    schema: ConditionSchema,
    registry: CategoryRegistry,
    holdout_accuracy: Option<f64>,
    loss_curve: Vec<f64>,
    matrices: MatrixStore,
}

impl From<GraphLabeler> for LabelerCheckpoint {
    fn from(l: GraphLabeler) -> Self {
        let mut s = MatrixStore::default();
        s.put_layer("labeler.gcn0", &l.params.gcn0);
        s.put_layer("labeler.gcn1", &l.params.gcn1);
        s.put_layer("labeler.head", &l.params.head);
        Self {
            format_version: CHECKPOINT_VERSION,
            config: l.config,
            schema: l.schema,
            registry: l.registry,
            holdout_accuracy: l.holdout_accuracy,
            loss_curve: l.loss_curve,
            matrices: s,
        }
    }
}

impl TryFrom<LabelerCheckpoint> for GraphLabeler {
    type Error = Error;

    fn try_from(c: LabelerCheckpoint) -> Result<Self> {
        if c.format_version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: c.format_version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let mut s = c.matrices;
        let params = LabelerParams {
            gcn0: s.take_layer("labeler.gcn0")?,
            gcn1: s.take_layer("labeler.gcn1")?,
            head: s.take_layer("labeler.head")?,
        };
        let out = check_chain(
            "labeler",
            c.registry.node_codes().len(),
            &[&params.gcn0, &params.gcn1, &params.head],
        )?;
        if out != c.schema.len() {
            return Err(Error::arg("labeler head must output one logit per label"));
        }
        Ok(Self {
            config: c.config,
            schema: c.schema,
            registry: c.registry,
            params,
            holdout_accuracy: c.holdout_accuracy,
            loss_curve: c.loss_curve,
        })
    }
}

impl GraphLabeler {
    pub fn new(
        schema: ConditionSchema,
        registry: CategoryRegistry,
        config: LabelerConfig,
        rng: &mut impl Rng,
    ) -> Self {
        let c = registry.node_codes().len();
        let h = config.hidden_dim;
        let params = LabelerParams {
            gcn0: LayerParams::init(c, h, false, rng),
            gcn1: LayerParams::init(h, h, false, rng),
            head: LayerParams::init(h, schema.len(), true, rng),
        };
        Self {
            config,
            schema,
            registry,
            params,
            holdout_accuracy: None,
            loss_curve: Vec::new(),
        }
    }

    pub fn room_type(&self) -> RoomType {
        self.schema.room_type
    }

    /// Probability vector over the schema's labels.
    pub fn predict_proba(&self, g: &SceneGraph) -> Result<Vec<f64>> {
        let input = self.input(g)?;
        Ok(softmax(&labeler_forward(&self.params, &input)?.logits))
    }

    pub fn predict(&self, g: &SceneGraph) -> Result<usize> {
        let p = self.predict_proba(g)?;
        Ok(p.iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
            )
            .0)
    }

    fn input(&self, g: &SceneGraph) -> Result<LabelerInput> {
        if g.condition.room_type != self.room_type() {
            return Err(Error::SchemaMismatch(format!(
                "{} graph given to a {} labeler",
                g.condition.room_type,
                self.room_type()
            )));
        }
        if g.is_empty() {
            return Err(Error::arg("cannot label an empty graph"));
        }
        let codes = self.registry.node_codes();
        let mut x = Matrix::zeros(g.len(), codes.len());
        for n in &g.nodes {
            let c = codes.iter().position(|&c| c == n.category).ok_or_else(|| {
                Error::SchemaMismatch(format!("category {} is not in the registry", n.category))
            })?;
            x[(n.id, c)] = 1.0;
        }
        let a = Matrix::from_rows(&g.adjacency())?;
        Ok(LabelerInput {
            x,
            a_norm: normalize_adjacency(&a)?,
        })
    }
}

struct LabelerInput {
    x: Matrix,
    a_norm: Matrix,
}

struct LabelerPass {
    gcn: GcnCache,
    rows: usize,
    head: FnnCache,
    logits: Vec<f64>,
}

fn labeler_forward(p: &LabelerParams, input: &LabelerInput) -> Result<LabelerPass> {
    let (h, gcn) = gcn_forward_cached(&input.x, &input.a_norm, &p.gcn0, &p.gcn1)?;
    let pooled = Matrix::row_vector(&h.mean_rows());
    let (out, head) = fnn_forward_rows(&pooled, std::slice::from_ref(&p.head))?;
    Ok(LabelerPass {
        gcn,
        rows: input.x.rows(),
        head,
        logits: out.row(0).to_vec(),
    })
}

/// Cross-entropy of one graph and its parameter gradients.
fn labeler_step(
    p: &LabelerParams,
    input: &LabelerInput,
    label: usize,
    grads: &mut LabelerParams,
) -> Result<f64> {
    let pass = labeler_forward(p, input)?;
    let probs = softmax(&pass.logits);
    let loss = -probs[label].max(1e-300).ln();
    let g_logits: Vec<f64> = probs
        .iter()
        .enumerate()
        .map(|(i, &q)| q - if i == label { 1.0 } else { 0.0 })
        .collect();
    let g_pooled = fnn_backward(
        &pass.head,
        std::slice::from_ref(&p.head),
        &Matrix::row_vector(&g_logits),
        std::slice::from_mut(&mut grads.head),
    );
    let n = pass.rows;
    let mut g_h = Matrix::zeros(n, g_pooled.cols());
    for i in 0..n {
        for (d, s) in g_h.row_mut(i).iter_mut().zip(g_pooled.row(0)) {
            *d = s / n as f64;
        }
    }
    gcn_backward(
        &pass.gcn,
        &p.gcn0,
        &p.gcn1,
        &g_h,
        &mut grads.gcn0,
        &mut grads.gcn1,
    );
    Ok(loss)
}

/// Worst finite-difference relative error of the labeler's cross-entropy
/// gradient on graph `g` with target `label`.
pub fn check_labeler_gradients(labeler: &GraphLabeler, g: &SceneGraph, label: usize) -> Result<f64> {
    if label >= labeler.schema.len() {
        return Err(Error::arg(format!("label {label} is out of range")));
    }
    let input = labeler.input(g)?;
    grad_check(
        |w| {
            let mut p = labeler.params.clone();
            p.assign(w);
            let mut grads = p.zeroed();
            match labeler_step(&p, &input, label, &mut grads) {
                Ok(loss) => (loss, grads.flatten()),
                Err(_) => (f64::NAN, vec![f64::NAN; w.len()]),
            }
        },
        &labeler.params.flatten(),
        DEFAULT_EPSILON,
    )
}

/// Trains a labeler on graphs of one room type, labeled by their condition.
pub fn train_labeler(graphs: &[SceneGraph], config: &LabelerConfig) -> Result<GraphLabeler> {
    let room = graphs
        .first()
        .ok_or_else(|| Error::arg("no training graphs"))?
        .condition
        .room_type;
    let schema = ConditionSchema::for_room(room);
    let mut present: Vec<usize> = graphs.iter().map(|g| g.condition.label_index).collect();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::arg("labeler training needs at least two distinct labels"));
    }
    if !(0.0..1.0).contains(&config.holdout) {
        return Err(Error::arg("holdout fraction must be in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut labeler = GraphLabeler::new(schema, CategoryRegistry::for_room(room), config.clone(), &mut rng);
    let inputs: Vec<LabelerInput> = graphs.iter().map(|g| labeler.input(g)).collect::<Result<_>>()?;

    let mut idx: Vec<usize> = (0..graphs.len()).collect();
    idx.shuffle(&mut rng);
    let held = (graphs.len() as f64 * config.holdout).floor() as usize;
    let (test, train) = idx.split_at(held);
    let mut train = train.to_vec();

    for epoch in 1..=config.epochs {
        train.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &train {
            let mut grads = labeler.params.zeroed();
            let loss = labeler_step(
                &labeler.params,
                &inputs[i],
                graphs[i].condition.label_index,
                &mut grads,
            )?;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::Training {
                    step: "labeler",
                    epoch,
                });
            }
            labeler.params.add_scaled(&grads, -config.learning_rate);
            total += loss;
        }
        labeler.loss_curve.push(total / train.len().max(1) as f64);
    }

    if !test.is_empty() {
        let mut correct = 0;
        for &i in test {
            if labeler.predict(&graphs[i])? == graphs[i].condition.label_index {
                correct += 1;
            }
        }
        labeler.holdout_accuracy = Some(correct as f64 / test.len() as f64);
    }
    Ok(labeler)
}

/// Unweighted mean of per-label accuracies.
pub fn average_accuracy(per_label: &[f64]) -> f64 {
    per_label.iter().sum::<f64>() / per_label.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub room_type: RoomType,
    pub labels: Vec<String>,
    /// `None` for labels without generated graphs.
    pub per_label: Vec<Option<f64>>,
    /// Generated graphs per intended label (`N_i`).
    pub counts: Vec<usize>,
    /// Number of labels entering the average (`N_c`).
    pub labels_counted: usize,
    pub averaged: f64,
    pub warnings: Vec<String>,
}

/// Per-label fraction of generated graphs the labeler assigns to their
/// intended label, and the unweighted mean over labels.
pub fn acc_g(labeler: &GraphLabeler, generated: &[(SceneGraph, usize)]) -> Result<AccuracyReport> {
    let labels = labeler.schema.len();
    let mut counts = vec![0usize; labels];
    let mut hits = vec![0usize; labels];
    for (g, intended) in generated {
        if *intended >= labels {
            return Err(Error::SchemaMismatch(format!(
                "label index {intended} is outside the {}-label schema",
                labels
            )));
        }
        counts[*intended] += 1;
        if labeler.predict(g)? == *intended {
            hits[*intended] += 1;
        }
    }
    let mut warnings = Vec::new();
    let per_label: Vec<Option<f64>> = (0..labels)
        .map(|i| {
            if counts[i] == 0 {
                let msg = format!(
                    "label `{}` has no generated graphs; excluded",
                    labeler.schema.labels[i]
                );
                log::warn!("{msg}");
                warnings.push(msg);
                None
            } else {
                Some(hits[i] as f64 / counts[i] as f64)
            }
        })
        .collect();
    let present: Vec<f64> = per_label.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::arg("no generated graphs to evaluate"));
    }
    Ok(AccuracyReport {
        room_type: labeler.room_type(),
        labels: labeler.schema.labels.clone(),
        per_label,
        counts,
        labels_counted: present.len(),
        averaged: average_accuracy(&present),
        warnings,
    })
}

/// A scene together with how many of its source-graph relations were
/// checked and how many failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckedScene {
    pub scene: Scene,
    pub predicates_checked: usize,
    pub predicates_failed: usize,
}

impl From<Scene> for CheckedScene {
    fn from(scene: Scene) -> Self {
        Self {
            scene,
            predicates_checked: 0,
            predicates_failed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub scenes: usize,
    pub scenes_with_outside: usize,
    pub scenes_with_overlap: usize,
    pub outside_items: usize,
    pub overlapping_pairs: usize,
    pub predicates_checked: usize,
    pub predicates_failed: usize,
    /// Fraction of scenes with an item outside the room.
    pub outside_rate: f64,
    /// Fraction of scenes with at least one overlapping pair.
    pub overlap_rate: f64,
    /// Fraction of checked relations that failed.
    pub predicate_failure_rate: f64,
}

pub fn scene_validity_report(scenes: &[CheckedScene]) -> ValidityReport {
    let mut r = ValidityReport {
        scenes: scenes.len(),
        ..Default::default()
    };
    for s in scenes {
        let v = validate_scene(&s.scene);
        let outside = v.count(|x| matches!(x, Violation::Outside { .. }));
        let overlap = v.count(|x| matches!(x, Violation::Overlap { .. }));
        r.outside_items += outside;
        r.overlapping_pairs += overlap;
        r.scenes_with_outside += (outside > 0) as usize;
        r.scenes_with_overlap += (overlap > 0) as usize;
        r.predicates_checked += s.predicates_checked;
        r.predicates_failed += s.predicates_failed;
    }
    let rate = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    r.outside_rate = rate(r.scenes_with_outside, r.scenes);
    r.overlap_rate = rate(r.scenes_with_overlap, r.scenes);
    r.predicate_failure_rate = rate(r.predicates_failed, r.predicates_checked);
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub index: usize,
    pub left_image: String,
    pub right_image: String,
    /// True when the generated scene is shown on the left.
    pub generated_on_left: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerKey {
    pub index: usize,
    pub left: Source,
    pub right: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairManifest {
    pub seed: u64,
    pub pairs: Vec<PairEntry>,
    pub answer_key: Vec<AnswerKey>,
}

/// Writes one SVG per side of every pair plus `manifest.json` into `dir`.
pub fn export_comparison_pairs(
    real: &[Scene],
    generated: &[Scene],
    dir: &Path,
    seed: u64,
    registry: &CategoryRegistry,
) -> Result<PairManifest> {
    if real.len() != generated.len() {
        return Err(Error::arg(format!(
            "{} real scenes but {} generated scenes",
            real.len(),
            generated.len()
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = PairManifest {
        seed,
        pairs: Vec::new(),
        answer_key: Vec::new(),
    };
    for (i, (r, g)) in real.iter().zip(generated).enumerate() {
        let generated_on_left = rng.random_bool(0.5);
        let (left, right) = if generated_on_left { (g, r) } else { (r, g) };
        let left_image = format!("pair-{i:04}-left.svg");
        let right_image = format!("pair-{i:04}-right.svg");
        for (name, scene) in [(&left_image, left), (&right_image, right)] {
            let path = dir.join(name);
            std::fs::write(&path, render_svg(scene, registry)).map_err(|e| Error::io(&path, e))?;
        }
        let (ls, rs) = if generated_on_left {
            (Source::Generated, Source::Real)
        } else {
            (Source::Real, Source::Generated)
        };
        manifest.pairs.push(PairEntry {
            index: i,
            left_image,
            right_image,
            generated_on_left,
        });
        manifest.answer_key.push(AnswerKey {
            index: i,
            left: ls,
            right: rs,
        });
    }
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Top view: room polygon, openings as thick segments, items as labeled
/// rectangles with a tick on their front side.
pub fn render_svg(scene: &Scene, registry: &CategoryRegistry) -> String {
    const PX: f64 = 100.0;
    const MARGIN: f64 = 20.0;
    let (lo, hi) = scene.shell.bounding_box();
    let w = (hi.x - lo.x) * PX + 2.0 * MARGIN;
    let h = (hi.y - lo.y) * PX + 2.0 * MARGIN;
    // SVG y grows downwards; flip so north is up.
    let tx = |p: &Point2| ((p.x - lo.x) * PX + MARGIN, (hi.y - p.y) * PX + MARGIN);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.1} {h:.1}\">\n"
    );
    let points: Vec<String> = scene
        .shell
        .boundary
        .iter()
        .map(|p| {
            let (x, y) = tx(p);
            format!("{x:.1},{y:.1}")
        })
        .collect();
    out += &format!(
        "  <polygon points=\"{}\" fill=\"#fafafa\" stroke=\"#222\" stroke-width=\"3\"/>\n",
        points.join(" ")
    );
    for o in &scene.shell.openings {
        let (a, b) = scene.shell.wall(o.wall_index);
        let len = a.distance(&b);
        let (p, q) = (a.lerp(&b, o.offset / len), a.lerp(&b, (o.offset + o.width) / len));
        let ((x1, y1), (x2, y2)) = (tx(&p), tx(&q));
        let color = match o.kind {
            crate::scene::OpeningKind::Door => "#b5651d",
            crate::scene::OpeningKind::Window => "#4a90d9",
        };
        out += &format!(
            "  <line x1=\"{x1:.1}\" y1=\"{y1:.1}\" x2=\"{x2:.1}\" y2=\"{y2:.1}\" stroke=\"{color}\" stroke-width=\"7\"/>\n"
        );
    }
    for item in &scene.items {
        let r = item.footprint();
        let (x, y) = tx(&Point2::new(r.min.x, r.max.y));
        let (rw, rh) = ((r.max.x - r.min.x) * PX, (r.max.y - r.min.y) * PX);
        let name = registry.name_of(item.category).unwrap_or("object");
        let (cx, cy) = tx(&item.position);
        let (ux, uy) = item.direction.unit();
        let half = 0.5 * if ux != 0.0 { rw } else { rh };
        out += &format!(
            "  <rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{rw:.1}\" height=\"{rh:.1}\" fill=\"#cfe3cf\" stroke=\"#356b35\"/>\n"
        );
        out += &format!(
            "  <line x1=\"{cx:.1}\" y1=\"{cy:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#356b35\"/>\n",
            cx + ux * half,
            cy - uy * half
        );
        out += &format!(
            "  <text x=\"{cx:.1}\" y=\"{cy:.1}\" font-size=\"11\" text-anchor=\"middle\">{name}</text>\n"
        );
    }
    out += "</svg>\n";
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::scene_graph;
    use crate::synth::synth_dataset;

    #[test]
    fn table_arithmetic() {
        assert!((average_accuracy(&[0.82, 0.83, 0.79, 0.78]) - 0.805).abs() < 1e-12);
        assert!((average_accuracy(&[0.83, 0.85, 0.84]) - 0.84).abs() < 1e-12);
        assert!((average_accuracy(&[0.88, 0.84]) - 0.86).abs() < 1e-12);
    }

    fn graphs(room: RoomType, per_label: usize, seed: u64) -> Vec<SceneGraph> {
        synth_dataset(room, per_label, seed)
            .iter()
            .map(|s| scene_graph(s).unwrap())
            .collect()
    }

    #[test]
    fn labeler_gradients_match_finite_differences() {
        let g = &graphs(RoomType::Balcony, 1, 2)[1];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let config = LabelerConfig {
            hidden_dim: 6,
            ..Default::default()
        };
        let l = GraphLabeler::new(
            ConditionSchema::for_room(RoomType::Balcony),
            CategoryRegistry::for_room(RoomType::Balcony),
            config,
            &mut rng,
        );
        let err = check_labeler_gradients(&l, g, 1).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn zero_rate_leaves_parameters_unchanged() {
        let data = graphs(RoomType::Kitchen, 3, 4);
        let config = LabelerConfig {
            epochs: 2,
            learning_rate: 0.0,
            hidden_dim: 8,
            ..Default::default()
        };
        let trained = train_labeler(&data, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let fresh = GraphLabeler::new(
            ConditionSchema::for_room(RoomType::Kitchen),
            CategoryRegistry::for_room(RoomType::Kitchen),
            config,
            &mut rng,
        );
        assert_eq!(trained.params, fresh.params);
    }

    #[test]
    fn single_label_rejected() {
        let data: Vec<SceneGraph> = graphs(RoomType::Kitchen, 3, 4)
            .into_iter()
            .filter(|g| g.condition.label_index == 0)
            .collect();
        assert!(matches!(
            train_labeler(&data, &LabelerConfig::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn separable_templates_are_learned() {
        let data = graphs(RoomType::Tatami, 40, 5);
        let config = LabelerConfig {
            epochs: 30,
            ..Default::default()
        };
        let l = train_labeler(&data, &config).unwrap();
        assert!(l.holdout_accuracy.unwrap() >= 0.95, "{:?}", l.holdout_accuracy);

        let g = &data[3];
        let perm: Vec<usize> = (0..g.len()).rev().collect();
        assert_eq!(l.predict(g).unwrap(), l.predict(&g.permuted(&perm)).unwrap());

        let text = serde_json::to_string(&l).unwrap();
        let back: GraphLabeler = crate::checkpoint::from_json(&text).unwrap();
        assert_eq!(back, l);

        let all: Vec<(SceneGraph, usize)> = data
            .iter()
            .map(|g| (g.clone(), g.condition.label_index))
            .collect();
        let report = acc_g(&l, &all).unwrap();
        assert_eq!(report.labels_counted, 4);
        let mean = average_accuracy(&report.per_label.iter().flatten().copied().collect::<Vec<_>>());
        assert!((report.averaged - mean).abs() < 1e-12);
    }

    #[test]
    fn missing_label_is_excluded_with_warning() {
        let data = graphs(RoomType::Kitchen, 4, 6);
        let l = train_labeler(
            &data,
            &LabelerConfig {
                epochs: 20,
                ..Default::default()
            },
        )
        .unwrap();
        let only_first: Vec<(SceneGraph, usize)> = data
            .iter()
            .filter(|g| g.condition.label_index == 0)
            .map(|g| (g.clone(), 0))
            .collect();
        let r = acc_g(&l, &only_first).unwrap();
        assert_eq!(r.labels_counted, 1);
        assert_eq!(r.per_label[1], None);
        assert_eq!(r.warnings.len(), 1);
        assert_eq!(Some(r.averaged), r.per_label[0]);
        assert!(acc_g(&l, &[(data[0].clone(), 5)]).is_err());
    }

    #[test]
    fn validity_counts() {
        let scenes = synth_dataset(RoomType::Kitchen, 5, 7);
        let mut checked: Vec<CheckedScene> = scenes.iter().cloned().map(CheckedScene::from).collect();
        assert_eq!(scene_validity_report(&checked).overlap_rate, 0.0);

        let s = &mut checked[3].scene;
        let first = s.items[0].clone();
        s.items.push(first);
        let r = scene_validity_report(&checked);
        assert_eq!(r.overlap_rate, 0.1);
        assert_eq!(r.overlapping_pairs, 1);

        checked.reverse();
        assert_eq!(scene_validity_report(&checked), r);
    }

    #[test]
    fn comparison_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let real = synth_dataset(RoomType::Balcony, 1, 1);
        let fake = synth_dataset(RoomType::Balcony, 1, 2);
        let registry = CategoryRegistry::for_room(RoomType::Balcony);
        let m = export_comparison_pairs(&real, &fake, dir.path(), 5, &registry).unwrap();
        assert_eq!(m.pairs.len(), 3);
        for (p, k) in m.pairs.iter().zip(&m.answer_key) {
            assert_eq!(p.generated_on_left, k.left == Source::Generated);
            assert_ne!(k.left, k.right);
            let svg = std::fs::read_to_string(dir.path().join(&p.left_image)).unwrap();
            assert!(svg.starts_with("<svg"));
        }
        let again = export_comparison_pairs(&real, &fake, dir.path(), 5, &registry).unwrap();
        assert_eq!(again, m);
        assert!(export_comparison_pairs(&real, &fake[..1], dir.path(), 5, &registry).is_err());
    }
}
