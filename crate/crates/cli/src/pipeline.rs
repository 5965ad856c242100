//! Loaded models and the graph-then-layout generation path shared by the CLI
//! and the service.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use roomgraph_core::condgen::{self, CondGenModel};
use roomgraph_core::graph::SceneGraph;
use roomgraph_core::instantiate::{self, PlacementModel, SampledScene};
use roomgraph_core::scene::{ConditionCode, RoomShell, RoomType};
use roomgraph_core::{checkpoint, synth};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("checkpoint {0} does not exist")]
    Missing(PathBuf),
    #[error("cannot load {path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: roomgraph_core::Error,
    },
    #[error("{0} has a graph model but no placement model")]
    Unpaired(RoomType),
    #[error("more than one {what} model for {room}")]
    Duplicate { what: &'static str, room: RoomType },
    #[error("no models given")]
    Empty,
}

/// Graph and placement models for one room type.
#[derive(Debug, Clone)]
pub struct RoomModels {
    pub graph: CondGenModel,
    pub placement: PlacementModel,
}

/// Immutable snapshot of every loaded room.
#[derive(Debug, Clone, Default)]
pub struct ModelSet {
    pub rooms: BTreeMap<RoomType, RoomModels>,
}

fn load_checkpoint<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, LoadError> {
    if !path.exists() {
        return Err(LoadError::Missing(path.to_path_buf()));
    }
    checkpoint::load(path).map_err(|source| LoadError::Invalid {
        path: path.to_path_buf(),
        source,
    })
}

impl ModelSet {
    /// Loads graph and placement checkpoints and pairs them by room type.
    pub fn load(graph_paths: &[PathBuf], placement_paths: &[PathBuf]) -> Result<Self, LoadError> {
        let mut graphs = BTreeMap::new();
        for p in graph_paths {
            let m: CondGenModel = load_checkpoint(p)?;
            let room = m.room_type();
            if graphs.insert(room, m).is_some() {
                return Err(LoadError::Duplicate { what: "graph", room });
            }
        }
        let mut placements = BTreeMap::new();
        for p in placement_paths {
            let m: PlacementModel = load_checkpoint(p)?;
            let room = m.room_type();
            if placements.insert(room, m).is_some() {
                return Err(LoadError::Duplicate {
                    what: "placement",
                    room,
                });
            }
        }
        let mut set = ModelSet::default();
        for (room, graph) in graphs {
            let placement = placements.remove(&room).ok_or(LoadError::Unpaired(room))?;
            set.rooms.insert(room, RoomModels { graph, placement });
        }
        if set.rooms.is_empty() {
            return Err(LoadError::Empty);
        }
        Ok(set)
    }
}

/// A generated graph and its instantiated layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub graph: SceneGraph,
    pub layout: SampledScene,
}

/// Seed for the placement stage, decorrelated from the graph seed.
pub fn placement_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// Generates a graph for `cond` and instantiates it in `shell` (the default
/// room of the type when absent).
pub fn generate_layout(
    models: &RoomModels,
    cond: ConditionCode,
    shell: Option<&RoomShell>,
    seed: u64,
) -> roomgraph_core::Result<Layout> {
    let default_shell;
    let shell = match shell {
        Some(s) => s,
        None => {
            default_shell = synth::default_shell(cond.room_type);
            &default_shell
        }
    };
    let graph = condgen::generate(&models.graph, cond, seed)?;
    let layout = instantiate::sample_scene(&models.placement, &graph, cond, shell, placement_seed(seed))?;
    Ok(Layout { graph, layout })
}
