use std::path::Path;

use roomgraph_cli::app::{run, GeneratedFile, GraphFile};

fn roomgraph(args: &[&str]) -> i32 {
    run(std::iter::once("roomgraph")
        .chain(args.iter().copied())
        .map(std::ffi::OsString::from))
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn full_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (data, graphs, gen, inst, lab) = (
        path(d, "data.json"),
        path(d, "graphs.json"),
        path(d, "gen.json"),
        path(d, "inst.json"),
        path(d, "lab.json"),
    );
    assert_eq!(
        roomgraph(&[
            "synth",
            "--room",
            "balcony",
            "--per-label",
            "4",
            "--seed",
            "1",
            "--out",
            &data
        ]),
        0
    );
    assert_eq!(roomgraph(&["extract", "--dataset", &data, "--out", &graphs]), 0);
    let file: GraphFile = serde_json::from_str(&std::fs::read_to_string(&graphs).unwrap()).unwrap();
    assert_eq!(file.graphs.len(), 12);
    assert!(file.graphs.iter().all(|g| g.is_connected()));

    assert_eq!(
        roomgraph(&["train-graph", "--graphs", &graphs, "--epochs", "2", "--out", &gen]),
        0
    );
    assert_eq!(
        roomgraph(&["train-inst", "--dataset", &data, "--epochs", "2", "--out", &inst]),
        0
    );
    assert_eq!(
        roomgraph(&[
            "train-labeler",
            "--graphs",
            &graphs,
            "--epochs",
            "5",
            "--out",
            &lab
        ]),
        0
    );

    let outputs: Vec<String> = ["a.json", "b.json"]
        .iter()
        .map(|name| {
            let out = path(d, name);
            let code = roomgraph(&[
                "generate",
                "--checkpoint",
                &gen,
                "--room",
                "balcony",
                "--count",
                "2",
                "--seed",
                "9",
                "--placement",
                &inst,
                "--out",
                &out,
            ]);
            assert_eq!(code, 0);
            std::fs::read_to_string(&out).unwrap()
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
    let generated: GeneratedFile = serde_json::from_str(&outputs[0]).unwrap();
    assert_eq!(generated.entries.len(), 6);
    assert!(generated.entries.iter().all(|e| e.layout.is_some()));

    let validity = path(d, "validity.json");
    let a = path(d, "a.json");
    assert_eq!(
        roomgraph(&[
            "eval",
            "--labeler",
            &lab,
            "--generated",
            &a,
            "--validity-out",
            &validity
        ]),
        0
    );
    assert!(Path::new(&validity).exists());
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(roomgraph(&["synth", "--room", "attic", "--out", "x.json"]), 1);
    assert_eq!(roomgraph(&["no-such-command"]), 1);
    assert_eq!(roomgraph(&["--help"]), 0);
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = path(dir.path(), "missing.json");
    let out = path(dir.path(), "out.json");
    assert_eq!(roomgraph(&["extract", "--dataset", &missing, "--out", &out]), 2);
    assert_eq!(
        roomgraph(&[
            "serve",
            "--graph-model",
            &missing,
            "--placement-model",
            &missing,
            "--port",
            "0"
        ]),
        2
    );
}
