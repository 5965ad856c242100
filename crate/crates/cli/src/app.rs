//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 on usage errors, 2 on runtime errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use roomgraph_core::condgen::{self, CondGenConfig, CondGenModel};
use roomgraph_core::dataset::{load_dataset, save_dataset, Dataset};
use roomgraph_core::eval::{self, CheckedScene, GraphLabeler, LabelerConfig};
use roomgraph_core::graph::{scene_graph, SceneGraph};
use roomgraph_core::instantiate::{self, PlacementConfig, PlacementModel, SampledScene};
use roomgraph_core::scene::{ConditionCode, RoomType};
use roomgraph_core::{checkpoint, synth};
use serde::{Deserialize, Serialize};

use crate::pipeline::{placement_seed, LoadError};
use crate::service::{self, ServeConfig, ServeError};

#[derive(Debug, Parser)]
#[command(
    name = "roomgraph",
    version,
    about = "Preference-conditioned room layout synthesis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic furnished-room dataset.
    Synth(SynthArgs),
    /// Extract relation graphs from a dataset.
    Extract(ExtractArgs),
    /// Train the conditional graph generator.
    TrainGraph(TrainGraphArgs),
    /// Train the placement (instantiation) model.
    TrainInst(TrainInstArgs),
    /// Train the graph labeler used for evaluation.
    TrainLabeler(TrainLabelerArgs),
    /// Generate graphs (and optionally layouts) for conditions.
    Generate(GenerateArgs),
    /// Score generated graphs with a labeler.
    Eval(EvalArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub room: RoomType,
    #[arg(long, default_value_t = 200)]
    pub per_label: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Accepted for uniformity; extraction is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainGraphArgs {
    #[arg(long)]
    pub graphs: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainInstArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainLabelerArgs {
    #[arg(long)]
    pub graphs: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Graph generator checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub room: RoomType,
    /// Condition label; every label of the room when omitted.
    #[arg(long)]
    pub label: Option<String>,
    /// Graphs per label.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Placement checkpoint; when given, every graph is also instantiated in
    /// the default room of its type.
    #[arg(long)]
    pub placement: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub labeler: PathBuf,
    /// Output of `generate`.
    #[arg(long)]
    pub generated: PathBuf,
    /// Also write a scene validity report (needs layouts in the input).
    #[arg(long)]
    pub validity_out: Option<PathBuf>,
    /// Accepted for uniformity; evaluation is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Graph generator checkpoint (repeat for several room types).
    #[arg(long = "graph-model", required = true)]
    pub graph_models: Vec<PathBuf>,
    /// Placement checkpoint (repeat for several room types).
    #[arg(long = "placement-model", required = true)]
    pub placement_models: Vec<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Listening port; the PORT environment variable takes precedence.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Accepted for uniformity; requests carry their own seeds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Version of the graph and generated-sample files written by this tool.
pub const FILE_VERSION: u64 = 1;

/// Graphs of one room type, as written by `extract`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub format_version: u64,
    pub room_type: RoomType,
    pub graphs: Vec<SceneGraph>,
}

/// Samples written by `generate` and read by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedFile {
    pub format_version: u64,
    pub room_type: RoomType,
    pub entries: Vec<GeneratedEntry>,
}

/// One generated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedEntry {
    pub label: String,
    pub seed: u64,
    pub graph: SceneGraph,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<SampledScene>,
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] roomgraph_core::Error),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Serve(#[from] ServeError),
    #[error("{0}")]
    Invalid(String),
    #[error("cannot write output: {0}")]
    Output(#[source] std::io::Error),
}

type AppResult<T> = Result<T, AppError>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> AppResult<()> {
    let text = serde_json::to_string_pretty(value).expect("values serialize");
    match out {
        Some(path) => std::fs::write(path, text + "\n").map_err(AppError::Output),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(AppError::Output)
        }
    }
}

fn read_graphs(path: &Path) -> AppResult<Vec<SceneGraph>> {
    let file: GraphFile = checkpoint::load(path)?;
    if let Some(g) = file
        .graphs
        .iter()
        .find(|g| g.condition.room_type != file.room_type)
    {
        return Err(AppError::Invalid(format!(
            "{} graph in a {} graph file",
            g.condition.room_type, file.room_type
        )));
    }
    Ok(file.graphs)
}

pub fn execute(command: Command) -> AppResult<()> {
    match command {
        Command::Synth(a) => {
            let scenes = synth::synth_dataset(a.room, a.per_label, a.seed);
            let n = scenes.len();
            save_dataset(&Dataset::new(a.room, scenes)?, &a.out)?;
            log::info!("wrote {n} scenes to {}", a.out.display());
        }
        Command::Extract(a) => {
            let ds = load_dataset(&a.dataset)?;
            let graphs = ds.scenes.iter().map(scene_graph).collect::<Result<Vec<_>, _>>()?;
            let file = GraphFile {
                format_version: FILE_VERSION,
                room_type: ds.header.room_type,
                graphs,
            };
            write_json(&file, Some(&a.out))?;
        }
        Command::TrainGraph(a) => {
            let graphs = read_graphs(&a.graphs)?;
            let config = CondGenConfig {
                epochs: a.epochs,
                learning_rate: a.learning_rate,
                seed: a.seed,
                ..Default::default()
            };
            let model = condgen::train(&graphs, &config)?;
            checkpoint::save(&model, &a.out)?;
        }
        Command::TrainInst(a) => {
            let ds = load_dataset(&a.dataset)?;
            let pairs = ds
                .scenes
                .into_iter()
                .map(|s| scene_graph(&s).map(|g| (s, g)))
                .collect::<Result<Vec<_>, _>>()?;
            let config = PlacementConfig {
                epochs: a.epochs,
                learning_rate: a.learning_rate,
                seed: a.seed,
                ..Default::default()
            };
            let model = instantiate::train_instantiator(&pairs, &config)?;
            checkpoint::save(&model, &a.out)?;
        }
        Command::TrainLabeler(a) => {
            let graphs = read_graphs(&a.graphs)?;
            let config = LabelerConfig {
                epochs: a.epochs,
                learning_rate: a.learning_rate,
                seed: a.seed,
                ..Default::default()
            };
            let labeler = eval::train_labeler(&graphs, &config)?;
            log::info!("labeler holdout accuracy {:?}", labeler.holdout_accuracy);
            checkpoint::save(&labeler, &a.out)?;
        }
        Command::Generate(a) => {
            let model: CondGenModel = checkpoint::load(&a.checkpoint)?;
            if model.room_type() != a.room {
                return Err(AppError::Invalid(format!(
                    "{} is a {} model, not {}",
                    a.checkpoint.display(),
                    model.room_type(),
                    a.room
                )));
            }
            let placement: Option<PlacementModel> =
                a.placement.as_deref().map(checkpoint::load).transpose()?;
            let labels: Vec<usize> = match &a.label {
                Some(l) => vec![model.schema.label_index(l).ok_or_else(|| {
                    AppError::Invalid(format!(
                        "unknown label {l:?}; expected one of {:?}",
                        model.schema.labels
                    ))
                })?],
                None => (0..model.schema.len()).collect(),
            };
            let shell = synth::default_shell(a.room);
            let mut entries = Vec::new();
            for &l in &labels {
                let cond = ConditionCode::new(a.room, l);
                for i in 0..a.count {
                    let seed = a.seed.wrapping_add(i as u64);
                    let graph = condgen::generate(&model, cond, seed)?;
                    let layout = match &placement {
                        Some(p) => Some(instantiate::sample_scene(
                            p,
                            &graph,
                            cond,
                            &shell,
                            placement_seed(seed),
                        )?),
                        None => None,
                    };
                    entries.push(GeneratedEntry {
                        label: model.schema.labels[l].clone(),
                        seed,
                        graph,
                        layout,
                    });
                }
            }
            let file = GeneratedFile {
                format_version: FILE_VERSION,
                room_type: a.room,
                entries,
            };
            write_json(&file, a.out.as_deref())?;
        }
        Command::Eval(a) => {
            let labeler: GraphLabeler = checkpoint::load(&a.labeler)?;
            let entries = checkpoint::load::<GeneratedFile>(&a.generated)?.entries;
            let pairs: Vec<(SceneGraph, usize)> = entries
                .iter()
                .map(|e| (e.graph.clone(), e.graph.condition.label_index))
                .collect();
            let report = eval::acc_g(&labeler, &pairs)?;
            for w in &report.warnings {
                log::warn!("{w}");
            }
            if let Some(path) = &a.validity_out {
                let scenes: Vec<CheckedScene> = entries
                    .into_iter()
                    .filter_map(|e| e.layout.map(Into::into))
                    .collect();
                if scenes.is_empty() {
                    return Err(AppError::Invalid("the generated file contains no layouts".into()));
                }
                write_json(&eval::scene_validity_report(&scenes), Some(path))?;
            }
            write_json(&report, None)?;
        }
        Command::Serve(a) => {
            let config = ServeConfig {
                graph_models: a.graph_models,
                placement_models: a.placement_models,
                host: a.host,
                port: a.port,
            };
            let runtime = tokio::runtime::Runtime::new().map_err(AppError::Output)?;
            runtime.block_on(service::serve(config))?;
        }
    }
    Ok(())
}
