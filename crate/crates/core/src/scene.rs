//! Domain model for rooms, furniture and owner preference conditions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Point2, Rect};

/// Overlap area above which two items are considered colliding (m²).
pub const OVERLAP_TOLERANCE: f64 = 1e-6;

/// Reserved node categories shared by every room type.
pub const WALL: u32 = 1;
pub const DOOR: u32 = 2;
pub const WINDOW: u32 = 3;
/// First furniture category code.
pub const FIRST_OBJECT_CODE: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoomType {
    Tatami,
    Balcony,
    Kitchen,
}

impl RoomType {
    pub const ALL: [RoomType; 3] = [RoomType::Tatami, RoomType::Balcony, RoomType::Kitchen];

    pub fn as_str(&self) -> &'static str {
        match self {
            RoomType::Tatami => "tatami",
            RoomType::Balcony => "balcony",
            RoomType::Kitchen => "kitchen",
        }
    }
}

impl fmt::Display for RoomType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoomType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tatami" => Ok(RoomType::Tatami),
            "balcony" => Ok(RoomType::Balcony),
            "kitchen" => Ok(RoomType::Kitchen),
            other => Err(Error::arg(format!("unknown room type `{other}`"))),
        }
    }
}

/// Ordered functional categories an owner can ask for in one room type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionSchema {
    pub room_type: RoomType,
    pub labels: Vec<String>,
}

impl ConditionSchema {
    pub fn new(room_type: RoomType, labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::arg("condition schema needs at least one label"));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::arg(format!("duplicate condition label `{l}`")));
            }
        }
        Ok(Self { room_type, labels })
    }

    pub fn for_room(room_type: RoomType) -> Self {
        let labels: &[&str] = match room_type {
            RoomType::Tatami => &["sleep", "tea", "storage", "work"],
            RoomType::Balcony => &["leisure", "wash", "storage"],
            RoomType::Kitchen => &["classical", "multi"],
        };
        Self {
            room_type,
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    pub fn code(&self, name: &str) -> Result<ConditionCode> {
        let label_index = self.label_index(name).ok_or_else(|| {
            Error::SchemaMismatch(format!("label `{name}` is not defined for {}", self.room_type))
        })?;
        Ok(ConditionCode {
            room_type: self.room_type,
            label_index,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConditionCode {
    pub room_type: RoomType,
    pub label_index: usize,
}

impl ConditionCode {
    pub fn new(room_type: RoomType, label_index: usize) -> Self {
        Self {
            room_type,
            label_index,
        }
    }
}

/// One-hot encoding of a condition against its schema.
pub fn encode_condition(cond: &ConditionCode, schema: &ConditionSchema) -> Result<Vec<f64>> {
    if cond.room_type != schema.room_type {
        return Err(Error::SchemaMismatch(format!(
            "condition for {} encoded against {} schema",
            cond.room_type, schema.room_type
        )));
    }
    if cond.label_index >= schema.len() {
        return Err(Error::SchemaMismatch(format!(
            "label index {} out of range for {} labels",
            cond.label_index,
            schema.len()
        )));
    }
    let mut v = vec![0.0; schema.len()];
    v[cond.label_index] = 1.0;
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryEntry {
    pub code: u32,
    pub name: String,
}

/// Furniture category codes for one room type. Codes 1-3 (wall, door,
/// window) are reserved and never listed here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRegistry {
    pub room_type: RoomType,
    pub entries: Vec<CategoryEntry>,
}

impl CategoryRegistry {
    pub fn new(room_type: RoomType, entries: Vec<CategoryEntry>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if e.code < FIRST_OBJECT_CODE {
                return Err(Error::arg(format!(
                    "category `{}` uses reserved code {}",
                    e.name, e.code
                )));
            }
            if entries[..i].iter().any(|o| o.code == e.code || o.name == e.name) {
                return Err(Error::arg(format!("duplicate category `{}`", e.name)));
            }
        }
        Ok(Self { room_type, entries })
    }

    pub fn for_room(room_type: RoomType) -> Self {
        let names = crate::synth::category_names(room_type);
        Self {
            room_type,
            entries: names
                .iter()
                .enumerate()
                .map(|(i, n)| CategoryEntry {
                    code: FIRST_OBJECT_CODE + i as u32,
                    name: n.to_string(),
                })
                .collect(),
        }
    }

    pub fn code_of(&self, name: &str) -> Option<u32> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.code)
    }

    pub fn name_of(&self, code: u32) -> Option<&str> {
        match code {
            WALL => Some("wall"),
            DOOR => Some("door"),
            WINDOW => Some("window"),
            _ => self
                .entries
                .iter()
                .find(|e| e.code == code)
                .map(|e| e.name.as_str()),
        }
    }

    /// All node categories in index order: wall, door, window, then objects.
    pub fn node_codes(&self) -> Vec<u32> {
        let mut codes = vec![WALL, DOOR, WINDOW];
        codes.extend(self.entries.iter().map(|e| e.code));
        codes
    }

    pub fn contains(&self, code: u32) -> bool {
        matches!(code, WALL | DOOR | WINDOW) || self.entries.iter().any(|e| e.code == code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpeningKind {
    Door,
    Window,
}

impl OpeningKind {
    pub fn category(&self) -> u32 {
        match self {
            OpeningKind::Door => DOOR,
            OpeningKind::Window => WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Opening {
    pub kind: OpeningKind,
    pub wall_index: usize,
    pub offset: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomShell {
    pub boundary: Vec<Point2>,
    pub openings: Vec<Opening>,
}

impl RoomShell {
    pub fn rectangle(width: f64, depth: f64, openings: Vec<Opening>) -> Self {
        Self {
            boundary: vec![
                Point2::new(0.0, 0.0),
                Point2::new(width, 0.0),
                Point2::new(width, depth),
                Point2::new(0.0, depth),
            ],
            openings,
        }
    }

    pub fn wall_count(&self) -> usize {
        self.boundary.len()
    }

    pub fn wall(&self, index: usize) -> (Point2, Point2) {
        let n = self.boundary.len();
        (self.boundary[index % n], self.boundary[(index + 1) % n])
    }

    /// Midpoint of an opening on its wall segment.
    pub fn opening_center(&self, opening: &Opening) -> Point2 {
        let (a, b) = self.wall(opening.wall_index);
        let len = a.distance(&b);
        let t = if len > 0.0 {
            (opening.offset + opening.width / 2.0) / len
        } else {
            0.0
        };
        a.lerp(&b, t)
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        geometry::bounding_box(&self.boundary)
    }

    pub fn diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.distance(&hi)
    }

    /// Shell invariants: simple counterclockwise polygon and openings on walls.
    pub fn check(&self) -> Result<()> {
        if !geometry::is_simple_polygon(&self.boundary) {
            return Err(Error::arg("room boundary is not a simple polygon"));
        }
        if geometry::signed_area(&self.boundary) <= 0.0 {
            return Err(Error::arg("room boundary must be counterclockwise"));
        }
        for (i, o) in self.openings.iter().enumerate() {
            if !self.opening_on_wall(o) {
                return Err(Error::arg(format!("opening {i} does not lie on its wall")));
            }
        }
        Ok(())
    }

    fn opening_on_wall(&self, o: &Opening) -> bool {
        if o.wall_index >= self.boundary.len() {
            return false;
        }
        let (a, b) = self.wall(o.wall_index);
        o.width > 0.0 && o.offset >= 0.0 && o.offset + o.width <= a.distance(&b) + 1e-9
    }
}

/// Facing direction, quantized to the cardinal angles (0° = +x, 90° = +y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub enum Direction {
    East,
    North,
    West,
    South,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::East,
        Direction::North,
        Direction::West,
        Direction::South,
    ];

    pub fn degrees(&self) -> u16 {
        match self {
            Direction::East => 0,
            Direction::North => 90,
            Direction::West => 180,
            Direction::South => 270,
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn from_index(i: usize) -> Direction {
        Self::ALL[i % 4]
    }

    /// Unit facing vector.
    pub fn unit(&self) -> (f64, f64) {
        match self {
            Direction::East => (1.0, 0.0),
            Direction::North => (0.0, 1.0),
            Direction::West => (-1.0, 0.0),
            Direction::South => (0.0, -1.0),
        }
    }

    /// Depth runs along the facing axis, width across it.
    pub fn footprint_extents(&self, width: f64, depth: f64) -> (f64, f64) {
        match self {
            Direction::East | Direction::West => (depth, width),
            Direction::North | Direction::South => (width, depth),
        }
    }
}

impl From<Direction> for u16 {
    fn from(d: Direction) -> u16 {
        d.degrees()
    }
}

impl TryFrom<u16> for Direction {
    type Error = String;

    fn try_from(deg: u16) -> std::result::Result<Self, String> {
        match deg {
            0 => Ok(Direction::East),
            90 => Ok(Direction::North),
            180 => Ok(Direction::West),
            270 => Ok(Direction::South),
            other => Err(format!(
                "direction must be 0, 90, 180 or 270 degrees, got {other}"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Size2 {
    pub width: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FurnitureItem {
    pub category: u32,
    pub position: Point2,
    pub size: Size2,
    pub direction: Direction,
}

impl FurnitureItem {
    pub fn footprint(&self) -> Rect {
        let (ex, ey) = self.direction.footprint_extents(self.size.width, self.size.depth);
        Rect::centered(self.position, ex, ey)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub room_type: RoomType,
    pub shell: RoomShell,
    pub items: Vec<FurnitureItem>,
    pub condition: ConditionCode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    InvalidShell { reason: String },
    RoomTypeMismatch,
    InvalidItem { item: usize },
    Outside { item: usize },
    Overlap { first: usize, second: usize, area: f64 },
    OpeningOffWall { opening: usize },
    EmptyItems,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, pred: impl Fn(&Violation) -> bool) -> usize {
        self.violations.iter().filter(|v| pred(v)).count()
    }

    /// Violations that make the geometry itself unusable (empty layouts are
    /// incomplete but still well-formed).
    pub fn geometric(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| !matches!(v, Violation::EmptyItems))
    }
}

pub fn validate_scene(scene: &Scene) -> ValidationReport {
    let mut violations = Vec::new();
    let shell = &scene.shell;
    let polygon_ok =
        geometry::is_simple_polygon(&shell.boundary) && geometry::signed_area(&shell.boundary) > 0.0;
    if !polygon_ok {
        violations.push(Violation::InvalidShell {
            reason: "boundary is not a simple counterclockwise polygon".into(),
        });
    }
    if scene.condition.room_type != scene.room_type {
        violations.push(Violation::RoomTypeMismatch);
    }
    for (i, o) in shell.openings.iter().enumerate() {
        if !shell.opening_on_wall(o) {
            violations.push(Violation::OpeningOffWall { opening: i });
        }
    }
    if scene.items.is_empty() {
        violations.push(Violation::EmptyItems);
    }
    for (i, item) in scene.items.iter().enumerate() {
        let sane = item.position.is_finite()
            && item.size.width > 0.0
            && item.size.depth > 0.0
            && item.size.width.is_finite()
            && item.size.depth.is_finite();
        if !sane {
            violations.push(Violation::InvalidItem { item: i });
            continue;
        }
        if polygon_ok && !geometry::rect_in_polygon(&item.footprint(), &shell.boundary) {
            violations.push(Violation::Outside { item: i });
        }
    }
    for i in 0..scene.items.len() {
        for j in (i + 1)..scene.items.len() {
            let area = scene.items[i]
                .footprint()
                .intersection_area(&scene.items[j].footprint());
            if area > OVERLAP_TOLERANCE {
                violations.push(Violation::Overlap {
                    first: i,
                    second: j,
                    area,
                });
            }
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> RoomShell {
        RoomShell::rectangle(
            4.0,
            3.0,
            vec![Opening {
                kind: OpeningKind::Door,
                wall_index: 0,
                offset: 1.0,
                width: 0.8,
            }],
        )
    }

    fn item(x: f64, y: f64) -> FurnitureItem {
        FurnitureItem {
            category: 4,
            position: Point2::new(x, y),
            size: Size2 {
                width: 0.5,
                depth: 0.5,
            },
            direction: Direction::North,
        }
    }

    fn scene(items: Vec<FurnitureItem>) -> Scene {
        Scene {
            room_type: RoomType::Tatami,
            shell: room(),
            items,
            condition: ConditionCode::new(RoomType::Tatami, 0),
        }
    }

    #[test]
    fn one_hot_examples() {
        let balcony = ConditionSchema::new(RoomType::Balcony, vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(
            encode_condition(&ConditionCode::new(RoomType::Balcony, 0), &balcony).unwrap(),
            vec![1.0, 0.0]
        );
        let tatami = ConditionSchema::for_room(RoomType::Tatami);
        assert_eq!(
            encode_condition(&ConditionCode::new(RoomType::Tatami, 3), &tatami).unwrap(),
            vec![0.0, 0.0, 0.0, 1.0]
        );
        let kitchen = ConditionSchema::for_room(RoomType::Kitchen);
        assert_eq!(
            encode_condition(&ConditionCode::new(RoomType::Kitchen, 1), &kitchen).unwrap(),
            vec![0.0, 1.0]
        );
    }

    #[test]
    fn encode_rejects_mismatch() {
        let kitchen = ConditionSchema::for_room(RoomType::Kitchen);
        assert!(matches!(
            encode_condition(&ConditionCode::new(RoomType::Kitchen, 2), &kitchen),
            Err(Error::SchemaMismatch(_))
        ));
        assert!(matches!(
            encode_condition(&ConditionCode::new(RoomType::Tatami, 0), &kitchen),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn schema_rejects_duplicates() {
        assert!(ConditionSchema::new(RoomType::Tatami, vec!["a".into(), "a".into()]).is_err());
        assert!(ConditionSchema::new(RoomType::Tatami, vec![]).is_err());
    }

    #[test]
    fn validation_examples() {
        assert!(validate_scene(&scene(vec![item(1.0, 1.0), item(3.0, 2.0)])).is_empty());

        let outside = validate_scene(&scene(vec![item(1.0, 1.0), item(5.0, 1.0)]));
        assert_eq!(outside.violations, vec![Violation::Outside { item: 1 }]);

        let overlap = validate_scene(&scene(vec![item(1.0, 1.0), item(1.0, 1.0)]));
        assert_eq!(overlap.violations.len(), 1);
        assert!(matches!(
            overlap.violations[0],
            Violation::Overlap {
                first: 0,
                second: 1,
                ..
            }
        ));

        let empty = validate_scene(&scene(vec![]));
        assert_eq!(empty.violations, vec![Violation::EmptyItems]);
    }

    #[test]
    fn opening_off_wall_reported() {
        let mut s = scene(vec![item(1.0, 1.0)]);
        s.shell.openings[0].offset = 3.5;
        assert_eq!(
            validate_scene(&s).violations,
            vec![Violation::OpeningOffWall { opening: 0 }]
        );
    }

    #[test]
    fn direction_serializes_as_degrees() {
        assert_eq!(serde_json::to_string(&Direction::South).unwrap(), "270");
        let d: Direction = serde_json::from_str("90").unwrap();
        assert_eq!(d, Direction::North);
        assert!(serde_json::from_str::<Direction>("45").is_err());
    }

    #[test]
    fn footprint_swaps_with_direction() {
        let mut it = item(1.0, 1.0);
        it.size = Size2 {
            width: 2.0,
            depth: 1.0,
        };
        let r = it.footprint();
        assert!((r.max.x - r.min.x - 2.0).abs() < 1e-12);
        it.direction = Direction::East;
        let r = it.footprint();
        assert!((r.max.x - r.min.x - 1.0).abs() < 1e-12);
    }
}
