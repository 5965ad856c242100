//! Versioned JSON persistence for scene collections.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{CategoryRegistry, ConditionSchema, RoomType, Scene};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u64,
    pub room_type: RoomType,
    pub condition_schema: ConditionSchema,
    pub category_registry: CategoryRegistry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    #[serde(flatten)]
    pub header: DatasetHeader,
    pub scenes: Vec<Scene>,
}

impl Dataset {
    /// Dataset with the built-in schema and registry of `room_type`.
    pub fn new(room_type: RoomType, scenes: Vec<Scene>) -> Result<Self> {
        if let Some(s) = scenes.iter().find(|s| s.room_type != room_type) {
            return Err(Error::SchemaMismatch(format!(
                "{} scene in a {room_type} dataset",
                s.room_type
            )));
        }
        Ok(Self {
            header: DatasetHeader {
                format_version: FORMAT_VERSION,
                room_type,
                condition_schema: ConditionSchema::for_room(room_type),
                category_registry: CategoryRegistry::for_room(room_type),
            },
            scenes,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct VersionProbe {
            format_version: u64,
        }
        let probe: VersionProbe = serde_json::from_str(text).map_err(Error::from_json)?;
        if probe.format_version != FORMAT_VERSION {
            return Err(Error::Version {
                found: probe.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let ds: Dataset = serde_json::from_str(text).map_err(Error::from_json)?;
        let h = &ds.header;
        if h.condition_schema.room_type != h.room_type || h.category_registry.room_type != h.room_type {
            return Err(Error::SchemaMismatch(
                "header schema/registry room type differs from dataset room type".into(),
            ));
        }
        for (i, s) in ds.scenes.iter().enumerate() {
            if s.room_type != h.room_type || s.condition.label_index >= h.condition_schema.len() {
                return Err(Error::SchemaMismatch(format!(
                    "scene {i} does not match the dataset header"
                )));
            }
        }
        Ok(ds)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serializes")
    }
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, dataset.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Dataset::from_json(&text)
}
