//! Versioned JSON envelope shared by trained-model files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{LayerParams, Matrix};

pub const CHECKPOINT_VERSION: u64 = 1;

/// Named parameter matrices. Layers are stored as `<name>.weight` and, when
/// present, `<name>.bias` (a 1×n matrix).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixStore(BTreeMap<String, Matrix>);

impl MatrixStore {
    pub fn put_layer(&mut self, name: &str, layer: &LayerParams) {
        self.0.insert(format!("{name}.weight"), layer.weight.clone());
        if let Some(b) = &layer.bias {
            self.0.insert(format!("{name}.bias"), Matrix::row_vector(b));
        }
    }

    pub fn put_layers(&mut self, name: &str, layers: &[LayerParams]) {
        for (i, l) in layers.iter().enumerate() {
            self.put_layer(&format!("{name}.{i}"), l);
        }
    }

    pub fn take_layer(&mut self, name: &str) -> Result<LayerParams> {
        let weight = self
            .0
            .remove(&format!("{name}.weight"))
            .ok_or_else(|| Error::arg(format!("checkpoint is missing `{name}.weight`")))?;
        let bias = match self.0.remove(&format!("{name}.bias")) {
            Some(b) if b.rows() == 1 && b.cols() == weight.cols() => Some(b.row(0).to_vec()),
            Some(_) => return Err(Error::arg(format!("`{name}.bias` has the wrong shape"))),
            None => None,
        };
        Ok(LayerParams { weight, bias })
    }

    pub fn take_layers(&mut self, name: &str, count: usize) -> Result<Vec<LayerParams>> {
        (0..count)
            .map(|i| self.take_layer(&format!("{name}.{i}")))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

/// Layers must chain: each layer's input width is the previous output width.
pub(crate) fn check_chain(name: &str, inputs: usize, layers: &[&LayerParams]) -> Result<usize> {
    let mut width = inputs;
    for (i, l) in layers.iter().enumerate() {
        if l.inputs() != width {
            return Err(Error::arg(format!(
                "{name} layer {i} expects {} inputs but receives {width}",
                l.inputs()
            )));
        }
        width = l.outputs();
    }
    Ok(width)
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: Option<u64>,
}

/// Parses a checkpoint, reporting version mismatches before shape errors.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(Error::from_json)?;
    match probe.format_version {
        Some(CHECKPOINT_VERSION) => serde_json::from_str(text).map_err(Error::from_json),
        Some(found) => Err(Error::Version {
            found,
            expected: CHECKPOINT_VERSION,
        }),
        None => Err(Error::Parse {
            line: 1,
            column: 1,
            message: "missing `format_version`".into(),
        }),
    }
}

pub fn save<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string(value).expect("checkpoints always serialize");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
