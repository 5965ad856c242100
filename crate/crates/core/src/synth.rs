//! Synthetic furnished-room generator.
//!
//! Each (room type, condition label) pair owns a furniture template. A scene is
//! the template with every item jittered uniformly by up to 0.2 m on both axes
//! (clamped to stay inside the room) and each optional item dropped with
//! probability 0.1. Template items are separated by more than 0.4 m on at
//! least one axis, so jitter alone can never create an overlap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Point2;
use crate::scene::{
    CategoryRegistry, ConditionCode, ConditionSchema, Direction, FurnitureItem, Opening, OpeningKind,
    RoomShell, RoomType, Scene, Size2,
};

pub const JITTER: f64 = 0.2;
pub const DROPOUT: f64 = 0.1;
/// Minimum clearance kept between a jittered footprint and the walls.
const WALL_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, Copy)]
pub struct TemplateItem {
    pub category: &'static str,
    pub width: f64,
    pub depth: f64,
    pub direction: Direction,
    pub center: (f64, f64),
    pub optional: bool,
}

const fn req(
    category: &'static str,
    width: f64,
    depth: f64,
    direction: Direction,
    x: f64,
    y: f64,
) -> TemplateItem {
    TemplateItem {
        category,
        width,
        depth,
        direction,
        center: (x, y),
        optional: false,
    }
}

const fn opt(
    category: &'static str,
    width: f64,
    depth: f64,
    direction: Direction,
    x: f64,
    y: f64,
) -> TemplateItem {
    TemplateItem {
        optional: true,
        ..req(category, width, depth, direction, x, y)
    }
}

use Direction::{North, South, West};

const TATAMI_CATEGORIES: &[&str] = &[
    "tatami",
    "work-desk",
    "cabinet",
    "tea-table",
    "wardrobe",
    "nightstand",
    "floor-cushion",
    "storage-chest",
    "desk-chair",
    "shelf-unit",
    "tea-cabinet",
    "floor-lamp",
];

const BALCONY_CATEGORIES: &[&str] = &[
    "washing-machine",
    "laundry-rack",
    "storage-cabinet",
    "lounge-chair",
    "side-table",
    "plant-pot",
    "utility-sink",
    "wall-shelf",
    "tool-box",
];

const KITCHEN_CATEGORIES: &[&str] = &[
    "counter",
    "stove",
    "fridge",
    "sink-unit",
    "island",
    "microwave-cabinet",
    "bar-stool",
];

const TATAMI_SLEEP: &[TemplateItem] = &[
    req("tatami", 2.0, 1.6, North, 1.1, 0.9),
    req("wardrobe", 1.6, 0.6, South, 1.2, 2.65),
    opt("nightstand", 0.45, 0.45, North, 2.75, 1.3),
    opt("floor-lamp", 0.4, 0.4, West, 3.3, 2.6),
];

const TATAMI_TEA: &[TemplateItem] = &[
    req("tatami", 2.0, 1.6, North, 1.1, 0.9),
    req("tea-table", 0.9, 0.9, North, 3.0, 2.2),
    req("floor-cushion", 0.5, 0.5, North, 1.85, 2.45),
    opt("tea-cabinet", 0.8, 0.4, South, 0.7, 2.75),
    opt("floor-cushion", 0.5, 0.5, North, 3.0, 1.0),
];

const TATAMI_STORAGE: &[TemplateItem] = &[
    req("tatami", 2.0, 1.6, North, 1.1, 0.9),
    req("storage-chest", 1.0, 0.5, South, 0.8, 2.7),
    req("shelf-unit", 1.2, 0.4, West, 3.35, 1.9),
    opt("cabinet", 0.8, 0.45, South, 2.2, 2.7),
];

const TATAMI_WORK: &[TemplateItem] = &[
    req("tatami", 2.0, 1.6, North, 1.1, 0.9),
    req("work-desk", 1.2, 0.6, South, 1.0, 2.6),
    req("cabinet", 0.8, 0.45, West, 3.3, 2.0),
    opt("desk-chair", 0.5, 0.5, North, 2.35, 2.5),
];

const BALCONY_LEISURE: &[TemplateItem] = &[
    req("lounge-chair", 0.7, 0.8, South, 1.6, 1.3),
    req("side-table", 0.5, 0.5, North, 2.65, 1.3),
    opt("plant-pot", 0.4, 0.4, North, 3.6, 0.4),
    opt("plant-pot", 0.4, 0.4, North, 0.5, 0.3),
];

const BALCONY_WASH: &[TemplateItem] = &[
    req("washing-machine", 0.6, 0.6, South, 3.6, 1.45),
    req("utility-sink", 0.6, 0.5, South, 2.55, 1.5),
    req("laundry-rack", 1.2, 0.5, North, 1.5, 0.5),
    opt("wall-shelf", 0.8, 0.35, South, 1.3, 1.6),
];

const BALCONY_STORAGE: &[TemplateItem] = &[
    req("storage-cabinet", 1.0, 0.45, South, 3.3, 1.55),
    req("wall-shelf", 0.8, 0.35, South, 1.9, 1.6),
    req("tool-box", 0.5, 0.4, North, 3.3, 0.4),
    opt("storage-cabinet", 1.0, 0.45, North, 1.9, 0.4),
];

const KITCHEN_CLASSICAL: &[TemplateItem] = &[
    req("counter", 1.8, 0.6, North, 0.95, 0.35),
    req("stove", 0.6, 0.6, North, 2.6, 0.35),
    req("fridge", 0.7, 0.7, South, 0.45, 2.0),
    opt("sink-unit", 0.8, 0.6, South, 1.7, 2.05),
];

const KITCHEN_MULTI: &[TemplateItem] = &[
    req("counter", 1.8, 0.6, North, 0.95, 0.35),
    req("island", 1.2, 0.8, North, 1.3, 1.5),
    req("microwave-cabinet", 0.6, 0.5, North, 2.6, 0.3),
    opt("bar-stool", 0.4, 0.4, West, 2.55, 1.5),
];

pub fn category_names(room_type: RoomType) -> &'static [&'static str] {
    match room_type {
        RoomType::Tatami => TATAMI_CATEGORIES,
        RoomType::Balcony => BALCONY_CATEGORIES,
        RoomType::Kitchen => KITCHEN_CATEGORIES,
    }
}

/// Template for a label index of the room type's default schema.
pub fn template(room_type: RoomType, label_index: usize) -> &'static [TemplateItem] {
    match (room_type, label_index) {
        (RoomType::Tatami, 0) => TATAMI_SLEEP,
        (RoomType::Tatami, 1) => TATAMI_TEA,
        (RoomType::Tatami, 2) => TATAMI_STORAGE,
        (RoomType::Tatami, _) => TATAMI_WORK,
        (RoomType::Balcony, 0) => BALCONY_LEISURE,
        (RoomType::Balcony, 1) => BALCONY_WASH,
        (RoomType::Balcony, _) => BALCONY_STORAGE,
        (RoomType::Kitchen, 0) => KITCHEN_CLASSICAL,
        (RoomType::Kitchen, _) => KITCHEN_MULTI,
    }
}

/// Empty room used by the generator and as the default generation target.
pub fn default_shell(room_type: RoomType) -> RoomShell {
    let door = |wall_index, offset, width| Opening {
        kind: OpeningKind::Door,
        wall_index,
        offset,
        width,
    };
    let window = |wall_index, offset, width| Opening {
        kind: OpeningKind::Window,
        wall_index,
        offset,
        width,
    };
    match room_type {
        RoomType::Tatami => RoomShell::rectangle(3.6, 3.0, vec![door(0, 2.6, 0.8), window(2, 1.2, 1.2)]),
        RoomType::Balcony => RoomShell::rectangle(4.0, 1.8, vec![window(0, 0.5, 3.0), door(3, 0.4, 0.9)]),
        RoomType::Kitchen => RoomShell::rectangle(3.0, 2.4, vec![door(1, 0.3, 0.8), window(2, 0.9, 1.2)]),
    }
}

fn scene_rng(room_type: RoomType, cond: &ConditionCode, seed: u64) -> ChaCha8Rng {
    let room_salt = match room_type {
        RoomType::Tatami => 0x7a7a_u64,
        RoomType::Balcony => 0xba1c,
        RoomType::Kitchen => 0x4b17,
    };
    let mixed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(room_salt << 32)
        .wrapping_add(cond.label_index as u64);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Deterministic synthetic scene for a condition.
pub fn synth_scene(room_type: RoomType, cond: ConditionCode, seed: u64) -> Scene {
    let shell = default_shell(room_type);
    let registry = CategoryRegistry::for_room(room_type);
    let (lo, hi) = shell.bounding_box();
    let mut rng = scene_rng(room_type, &cond, seed);
    let mut items = Vec::new();
    for t in template(room_type, cond.label_index) {
        // Draw every random number up front so dropout does not shift the
        // stream for the remaining items.
        let dx = rng.random_range(-JITTER..=JITTER);
        let dy = rng.random_range(-JITTER..=JITTER);
        let drop = rng.random::<f64>() < DROPOUT;
        if t.optional && drop {
            continue;
        }
        let (ex, ey) = t.direction.footprint_extents(t.width, t.depth);
        let x = (t.center.0 + dx).clamp(lo.x + ex / 2.0 + WALL_MARGIN, hi.x - ex / 2.0 - WALL_MARGIN);
        let y = (t.center.1 + dy).clamp(lo.y + ey / 2.0 + WALL_MARGIN, hi.y - ey / 2.0 - WALL_MARGIN);
        items.push(FurnitureItem {
            category: registry
                .code_of(t.category)
                .expect("template categories are registered"),
            position: Point2::new(x, y),
            size: Size2 {
                width: t.width,
                depth: t.depth,
            },
            direction: t.direction,
        });
    }
    Scene {
        room_type,
        shell,
        items,
        condition: cond,
    }
}

/// `per_label` scenes for every label of the room type's schema.
pub fn synth_dataset(room_type: RoomType, per_label: usize, seed: u64) -> Vec<Scene> {
    let schema = ConditionSchema::for_room(room_type);
    let mut scenes = Vec::with_capacity(per_label * schema.len());
    for label in 0..schema.len() {
        for i in 0..per_label {
            let s = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            scenes.push(synth_scene(room_type, ConditionCode::new(room_type, label), s));
        }
    }
    scenes
}
