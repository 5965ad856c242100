//! Abstract relation graphs of furnished rooms.
//!
//! Nodes are walls (category 1), doors (2), windows (3) and furniture items
//! (registry codes from 4). Edges carry one of nine types combining a
//! semantic class with a distance bucket: `type = 3·(class − 1) + bucket`.

use std::collections::BTreeSet;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance, Point2};
use crate::scene::{validate_scene, ConditionCode, RoomShell, Scene, DOOR, WALL, WINDOW};

pub const GRAPH_FORMAT_VERSION: u64 = 1;
pub const EDGE_TYPES: usize = 9;

pub const NEAR_FRACTION: f64 = 0.15;
pub const MIDDLE_FRACTION: f64 = 0.40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DistanceBucket {
    Near = 1,
    Middle = 2,
    Further = 3,
}

impl DistanceBucket {
    pub const ALL: [DistanceBucket; 3] = [Self::Near, Self::Middle, Self::Further];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SemanticClass {
    WallOpening = 1,
    WallObject = 2,
    ObjectObject = 3,
}

impl SemanticClass {
    pub const ALL: [SemanticClass; 3] = [Self::WallOpening, Self::WallObject, Self::ObjectObject];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Wall,
    Opening,
    Object,
}

pub fn node_kind(category: u32) -> NodeKind {
    match category {
        WALL => NodeKind::Wall,
        DOOR | WINDOW => NodeKind::Opening,
        _ => NodeKind::Object,
    }
}

/// Semantic class of a category pair; `None` for pairs that never share an
/// edge (wall–wall and opening–opening). Openings sit in walls, so an
/// opening–object pair is classed as wall–object.
pub fn semantic_class(a: u32, b: u32) -> Option<SemanticClass> {
    use NodeKind::*;
    match (node_kind(a), node_kind(b)) {
        (Wall, Wall) | (Opening, Opening) => None,
        (Wall, Opening) | (Opening, Wall) => Some(SemanticClass::WallOpening),
        (Wall, Object) | (Object, Wall) | (Opening, Object) | (Object, Opening) => {
            Some(SemanticClass::WallObject)
        }
        (Object, Object) => Some(SemanticClass::ObjectObject),
    }
}

pub fn distance_bucket(d: f64, room_diagonal: f64) -> Result<DistanceBucket> {
    if !(room_diagonal > 0.0) || !room_diagonal.is_finite() {
        return Err(Error::arg(format!(
            "room diagonal must be positive, got {room_diagonal}"
        )));
    }
    if !(d >= 0.0) {
        return Err(Error::arg(format!("distance must be non-negative, got {d}")));
    }
    Ok(if d < NEAR_FRACTION * room_diagonal {
        DistanceBucket::Near
    } else if d < MIDDLE_FRACTION * room_diagonal {
        DistanceBucket::Middle
    } else {
        DistanceBucket::Further
    })
}

pub fn edge_type(sem: SemanticClass, dist: DistanceBucket) -> u8 {
    3 * (sem as u8 - 1) + dist as u8
}

/// Inverse of [`edge_type`].
pub fn decode_edge_type(t: u8) -> Option<(SemanticClass, DistanceBucket)> {
    if !(1..=9).contains(&t) {
        return None;
    }
    let z = t - 1;
    Some((
        SemanticClass::ALL[(z / 3) as usize],
        DistanceBucket::ALL[(z % 3) as usize],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    pub id: usize,
    pub category: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub edge_type: u8,
    /// Geometric distance in meters, present on extracted graphs only.
    pub distance: Option<f64>,
}

impl Edge {
    pub fn new(u: usize, v: usize, edge_type: u8) -> Self {
        let (u, v) = if u < v { (u, v) } else { (v, u) };
        Self {
            u,
            v,
            edge_type,
            distance: None,
        }
    }

    pub fn other(&self, n: usize) -> usize {
        if self.u == n {
            self.v
        } else {
            self.u
        }
    }

    pub fn bucket(&self) -> DistanceBucket {
        DistanceBucket::ALL[((self.edge_type - 1) % 3) as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub condition: ConditionCode,
}

impl SceneGraph {
    pub fn new(categories: &[u32], condition: ConditionCode) -> Self {
        Self {
            nodes: categories
                .iter()
                .enumerate()
                .map(|(id, &category)| Node { id, category })
                .collect(),
            edges: Vec::new(),
            condition,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn category(&self, id: usize) -> u32 {
        self.nodes[id].category
    }

    pub fn categories(&self) -> Vec<u32> {
        self.nodes.iter().map(|n| n.category).collect()
    }

    pub fn object_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes
            .iter()
            .filter(|n| node_kind(n.category) == NodeKind::Object)
    }

    pub fn incident(&self, n: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.u == n || e.v == n)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges
            .iter()
            .any(|e| (e.u == a && e.v == b) || (e.u == b && e.v == a))
    }

    /// Dense 0/1 adjacency matrix in node order.
    pub fn adjacency(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut a = vec![vec![0.0; n]; n];
        for e in &self.edges {
            a[e.u][e.v] = 1.0;
            a[e.v][e.u] = 1.0;
        }
        a
    }

    /// Checks dense ids, edge ranges, types, self-loops and duplicates.
    pub fn check(&self) -> Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::arg(format!(
                    "node ids must be dense; found {} at {i}",
                    n.id
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            if e.u >= self.len() || e.v >= self.len() {
                return Err(Error::arg(format!(
                    "edge ({}, {}) references a missing node",
                    e.u, e.v
                )));
            }
            if e.u == e.v {
                return Err(Error::arg(format!("self-loop on node {}", e.u)));
            }
            if !(1..=9).contains(&e.edge_type) {
                return Err(Error::arg(format!("edge type {} outside 1..9", e.edge_type)));
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return Err(Error::arg(format!("duplicate edge ({}, {})", e.u, e.v)));
            }
        }
        Ok(())
    }

    /// Component index per node.
    pub fn components(&self) -> Vec<usize> {
        let mut uf = UnionFind::new(self.len());
        for e in &self.edges {
            uf.union(e.u, e.v);
        }
        let mut label = vec![usize::MAX; self.len()];
        let mut next = 0;
        let mut out = vec![0; self.len()];
        for (i, slot) in out.iter_mut().enumerate() {
            let r = uf.find(i);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            *slot = label[r];
        }
        out
    }

    pub fn component_count(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }

    /// Same graph with node ids relabeled by `perm` (new id of old node i is
    /// `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> SceneGraph {
        let mut categories = vec![0; self.len()];
        for (old, &new) in perm.iter().enumerate() {
            categories[new] = self.nodes[old].category;
        }
        let mut g = SceneGraph::new(&categories, self.condition);
        g.edges = self
            .edges
            .iter()
            .map(|e| Edge {
                distance: e.distance,
                ..Edge::new(perm[e.u], perm[e.v], e.edge_type)
            })
            .collect();
        g
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = x;
        while self.parent[c] != r {
            let next = self.parent[c];
            self.parent[c] = r;
            c = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Where a graph node sits in a realized scene: walls are segments, openings
/// and items are represented by their centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeGeom {
    Wall(Point2, Point2),
    Point(Point2),
}

/// Shell elements in graph order: walls, then openings as listed.
pub fn shell_geometry(shell: &RoomShell) -> (Vec<u32>, Vec<NodeGeom>) {
    let mut cats = Vec::new();
    let mut geom = Vec::new();
    for w in 0..shell.wall_count() {
        let (a, b) = shell.wall(w);
        cats.push(WALL);
        geom.push(NodeGeom::Wall(a, b));
    }
    for o in &shell.openings {
        cats.push(o.kind.category());
        geom.push(NodeGeom::Point(shell.opening_center(o)));
    }
    (cats, geom)
}

fn node_geometry(scene: &Scene) -> (Vec<u32>, Vec<NodeGeom>) {
    let (mut cats, mut geom) = shell_geometry(&scene.shell);
    for item in &scene.items {
        cats.push(item.category);
        geom.push(NodeGeom::Point(item.position));
    }
    (cats, geom)
}

/// Point–point or point–segment distance, as used for distance buckets.
pub fn geom_distance(a: &NodeGeom, b: &NodeGeom) -> f64 {
    match (a, b) {
        (NodeGeom::Point(p), NodeGeom::Point(q)) => p.distance(q),
        (NodeGeom::Wall(s, t), NodeGeom::Point(p)) | (NodeGeom::Point(p), NodeGeom::Wall(s, t)) => {
            point_segment_distance(p, s, t)
        }
        // Never used: wall pairs carry no semantic class.
        (NodeGeom::Wall(s1, t1), NodeGeom::Wall(s2, t2)) => s1.lerp(t1, 0.5).distance(&s2.lerp(t2, 0.5)),
    }
}

/// Dense relation graph: every classed node pair gets an edge.
pub fn extract_graph(scene: &Scene) -> Result<SceneGraph> {
    let report = validate_scene(scene);
    if let Some(v) = report.geometric().next() {
        return Err(Error::Extraction(format!("scene is invalid: {v:?}")));
    }
    let diag = scene.shell.diagonal();
    let (cats, geom) = node_geometry(scene);
    let mut g = SceneGraph::new(&cats, scene.condition);
    for u in 0..cats.len() {
        for v in (u + 1)..cats.len() {
            let Some(sem) = semantic_class(cats[u], cats[v]) else {
                continue;
            };
            let d = geom_distance(&geom[u], &geom[v]);
            let t = edge_type(sem, distance_bucket(d, diag)?);
            g.edges.push(Edge {
                distance: Some(d),
                ..Edge::new(u, v, t)
            });
        }
    }
    Ok(g)
}

/// Sort key for "closest" selection; falls back to the bucket when the graph
/// carries no geometric distances.
fn closeness(e: &Edge) -> f64 {
    e.distance.unwrap_or(e.bucket() as u8 as f64)
}

fn closest(node: usize, edges: &[Edge], keep: impl Fn(usize) -> bool) -> Option<&Edge> {
    edges
        .iter()
        .filter(|e| (e.u == node || e.v == node) && keep(e.other(node)))
        .min_by(|a, b| {
            closeness(a)
                .total_cmp(&closeness(b))
                .then(a.other(node).cmp(&b.other(node)))
        })
}

/// Keeps only the structurally important relations:
/// no wall–wall or further edges; each opening keeps its closest wall and
/// closest object; each object keeps its closest object and closest opening.
pub fn prune_graph(g: &SceneGraph) -> SceneGraph {
    let kind = |n: usize| node_kind(g.category(n));
    let candidates: Vec<Edge> = g
        .edges
        .iter()
        .copied()
        .filter(|e| !(kind(e.u) == NodeKind::Wall && kind(e.v) == NodeKind::Wall))
        .filter(|e| e.bucket() != DistanceBucket::Further)
        .collect();

    let mut kept: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut select = |e: Option<&Edge>| {
        if let Some(e) = e {
            kept.insert((e.u, e.v));
        }
    };
    for n in 0..g.len() {
        match kind(n) {
            NodeKind::Opening => {
                select(closest(n, &candidates, |o| kind(o) == NodeKind::Wall));
                select(closest(n, &candidates, |o| kind(o) == NodeKind::Object));
            }
            NodeKind::Object => {
                select(closest(n, &candidates, |o| kind(o) == NodeKind::Object));
                select(closest(n, &candidates, |o| kind(o) == NodeKind::Opening));
            }
            NodeKind::Wall => {}
        }
    }
    SceneGraph {
        nodes: g.nodes.clone(),
        edges: candidates
            .into_iter()
            .filter(|e| kept.contains(&(e.u, e.v)))
            .collect(),
        condition: g.condition,
    }
}

/// Repeatedly joins two components with the cheapest admissible pair until the
/// graph is connected or no admissible pair remains. `bridge(u, v)` returns
/// the pair's cost and edge type, or `None` when the pair may not be linked.
/// Returns the number of edges added.
pub fn connect_components(
    g: &mut SceneGraph,
    mut bridge: impl FnMut(usize, usize) -> Option<(f64, u8)>,
) -> usize {
    let mut added = 0;
    loop {
        let comp = g.components();
        if comp.iter().all(|&c| c == 0) {
            return added;
        }
        let mut best: Option<(f64, usize, usize, u8)> = None;
        for u in 0..g.len() {
            for v in (u + 1)..g.len() {
                if comp[u] == comp[v] {
                    continue;
                }
                if let Some((cost, t)) = bridge(u, v) {
                    if best.is_none_or(|(c, ..)| cost < c) {
                        best = Some((cost, u, v, t));
                    }
                }
            }
        }
        let Some((cost, u, v, t)) = best else {
            return added;
        };
        g.edges.push(Edge {
            distance: Some(cost),
            ..Edge::new(u, v, t)
        });
        added += 1;
    }
}

/// Bridges components using the scene geometry `g` was extracted from.
pub fn ensure_connectivity(g: &SceneGraph, scene: &Scene) -> Result<SceneGraph> {
    let (cats, geom) = node_geometry(scene);
    if cats != g.categories() {
        return Err(Error::arg("graph nodes do not correspond to the scene"));
    }
    let diag = scene.shell.diagonal();
    let mut out = g.clone();
    connect_components(&mut out, |u, v| {
        let sem = semantic_class(cats[u], cats[v])?;
        let d = geom_distance(&geom[u], &geom[v]);
        let bucket = distance_bucket(d, diag).ok()?;
        Some((d, edge_type(sem, bucket)))
    });
    Ok(out)
}

/// Extraction, pruning and reconnection in one step.
pub fn scene_graph(scene: &Scene) -> Result<SceneGraph> {
    let dense = extract_graph(scene)?;
    ensure_connectivity(&prune_graph(&dense), scene)
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    format_version: u64,
    condition: ConditionCode,
    nodes: Vec<(usize, u32)>,
    edges: Vec<(usize, usize, u8)>,
}

impl Serialize for SceneGraph {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphJson {
            format_version: GRAPH_FORMAT_VERSION,
            condition: self.condition,
            nodes: self.nodes.iter().map(|n| (n.id, n.category)).collect(),
            edges: self.edges.iter().map(|e| (e.u, e.v, e.edge_type)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SceneGraph {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = GraphJson::deserialize(d)?;
        if raw.format_version != GRAPH_FORMAT_VERSION {
            return Err(D::Error::custom(format!(
                "unsupported graph format version {}",
                raw.format_version
            )));
        }
        let g = SceneGraph {
            nodes: raw
                .nodes
                .into_iter()
                .map(|(id, category)| Node { id, category })
                .collect(),
            edges: raw
                .edges
                .into_iter()
                .map(|(u, v, t)| Edge::new(u, v, t))
                .collect(),
            condition: raw.condition,
        };
        g.check().map_err(D::Error::custom)?;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Direction, FurnitureItem, Opening, OpeningKind, RoomShell, RoomType, Size2};

    fn cond() -> ConditionCode {
        ConditionCode::new(RoomType::Tatami, 0)
    }

    fn shell_with_door() -> RoomShell {
        RoomShell::rectangle(
            4.0,
            3.0,
            vec![Opening {
                kind: OpeningKind::Door,
                wall_index: 0,
                offset: 1.0,
                width: 1.0,
            }],
        )
    }

    fn item(cat: u32, x: f64, y: f64) -> FurnitureItem {
        FurnitureItem {
            category: cat,
            position: Point2::new(x, y),
            size: Size2 {
                width: 0.4,
                depth: 0.4,
            },
            direction: Direction::North,
        }
    }

    #[test]
    fn bucket_thresholds() {
        assert_eq!(distance_bucket(0.0, 5.0).unwrap(), DistanceBucket::Near);
        assert_eq!(distance_bucket(0.2 * 5.0, 5.0).unwrap(), DistanceBucket::Middle);
        assert_eq!(distance_bucket(0.9 * 5.0, 5.0).unwrap(), DistanceBucket::Further);
        assert!(distance_bucket(1.0, 0.0).is_err());
        assert!(distance_bucket(1.0, -2.0).is_err());
    }

    #[test]
    fn edge_type_examples() {
        assert_eq!(edge_type(SemanticClass::WallOpening, DistanceBucket::Middle), 2);
        assert_eq!(edge_type(SemanticClass::WallObject, DistanceBucket::Further), 6);
        assert_eq!(edge_type(SemanticClass::ObjectObject, DistanceBucket::Near), 7);
        for t in 1..=9u8 {
            let (s, d) = decode_edge_type(t).unwrap();
            assert_eq!(edge_type(s, d), t);
        }
        assert!(decode_edge_type(0).is_none());
        assert!(decode_edge_type(10).is_none());
    }

    #[test]
    fn empty_room_with_door() {
        let scene = Scene {
            room_type: RoomType::Tatami,
            shell: shell_with_door(),
            items: vec![],
            condition: cond(),
        };
        let g = extract_graph(&scene).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.edges.len(), 4);
        assert!(g
            .edges
            .iter()
            .all(|e| g.category(e.u) == WALL && g.category(e.v) == DOOR));
    }

    #[test]
    fn wall_object_and_object_object_types() {
        // Object touching wall 0 and a second object co-located with it
        // (distinct categories, tiny sizes to avoid overlap is irrelevant
        // for typing, so use pair typing directly).
        let diag = 5.0;
        let t = edge_type(
            semantic_class(WALL, 4).unwrap(),
            distance_bucket(0.0, diag).unwrap(),
        );
        assert_eq!(t, 4);
        let t = edge_type(semantic_class(4, 5).unwrap(), distance_bucket(0.0, diag).unwrap());
        assert_eq!(t, 7);
        assert!(semantic_class(WALL, WALL).is_none());
        assert!(semantic_class(DOOR, WINDOW).is_none());
        assert_eq!(semantic_class(DOOR, 7), Some(SemanticClass::WallObject));
    }

    #[test]
    fn extracted_object_at_wall_is_type_4() {
        let scene = Scene {
            room_type: RoomType::Tatami,
            shell: RoomShell::rectangle(4.0, 3.0, vec![]),
            items: vec![item(4, 2.0, 0.2)],
            condition: cond(),
        };
        let g = extract_graph(&scene).unwrap();
        let e = g.edges.iter().find(|e| e.u == 0 && e.v == 4).unwrap();
        assert_eq!(e.edge_type, 4);
    }

    #[test]
    fn prune_removes_further_edge() {
        let mut g = SceneGraph::new(&[4, 5], cond());
        g.edges.push(Edge::new(0, 1, 9));
        assert!(prune_graph(&g).edges.is_empty());
    }

    #[test]
    fn prune_keeps_closest_wall_of_door() {
        let mut g = SceneGraph::new(&[WALL, WALL, WALL, DOOR], cond());
        for (w, d) in [(0usize, 1.0), (1, 2.0), (2, 3.0)] {
            g.edges.push(Edge {
                distance: Some(d),
                ..Edge::new(w, 3, 1)
            });
        }
        let p = prune_graph(&g);
        assert_eq!(p.edges.len(), 1);
        assert_eq!((p.edges[0].u, p.edges[0].v), (0, 3));
    }

    #[test]
    fn prune_minimal_graph_unchanged() {
        let mut g = SceneGraph::new(&[WALL, DOOR, 4], cond());
        g.edges.push(Edge::new(0, 1, 1));
        g.edges.push(Edge::new(1, 2, 5));
        assert_eq!(prune_graph(&g), g);
    }

    fn two_cluster_scene() -> Scene {
        Scene {
            room_type: RoomType::Tatami,
            shell: shell_with_door(),
            items: vec![item(4, 0.5, 2.0), item(5, 3.3, 2.0)],
            condition: cond(),
        }
    }

    #[test]
    fn connectivity_no_op_on_connected() {
        let scene = two_cluster_scene();
        let g = scene_graph(&scene).unwrap();
        assert!(g.is_connected());
        assert_eq!(ensure_connectivity(&g, &scene).unwrap(), g);
    }

    #[test]
    fn connectivity_adds_single_bridge() {
        let scene = two_cluster_scene();
        let cats: Vec<u32> = node_geometry(&scene).0;
        // door–wall0 component and two isolated objects joined to each other.
        let mut g = SceneGraph::new(&cats, cond());
        g.edges.push(Edge::new(0, 4, 1));
        g.edges.push(Edge::new(1, 4, 1));
        g.edges.push(Edge::new(2, 4, 1));
        g.edges.push(Edge::new(3, 4, 1));
        g.edges.push(Edge::new(5, 6, 8));
        assert_eq!(g.component_count(), 2);
        let out = ensure_connectivity(&g, &scene).unwrap();
        assert_eq!(out.edges.len(), g.edges.len() + 1);
        assert!(out.is_connected());
        // Closest cross pair: object 5 at (0.5, 2.0) to the west wall (x = 0).
        let added = out.edges.last().unwrap();
        assert_eq!((added.u, added.v), (3, 5));
    }

    #[test]
    fn graph_json_shape() {
        let mut g = SceneGraph::new(&[WALL, DOOR], cond());
        g.edges.push(Edge::new(1, 0, 1));
        let v = serde_json::to_value(&g).unwrap();
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["nodes"], serde_json::json!([[0, 1], [1, 2]]));
        assert_eq!(v["edges"], serde_json::json!([[0, 1, 1]]));
        let back: SceneGraph = serde_json::from_value(v).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn graph_json_rejects_self_loop() {
        let text = r#"{"format_version":1,"condition":{"room_type":"tatami","label_index":0},
            "nodes":[[0,1],[1,2]],"edges":[[1,1,1]]}"#;
        assert!(serde_json::from_str::<SceneGraph>(text).is_err());
    }
}
