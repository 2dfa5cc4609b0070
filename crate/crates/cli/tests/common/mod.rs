//! Hand-built model and data shared by the CLI, service and acceptance tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use adaptq::artifact::{ModelArtifact, ARTIFACT_FORMAT_VERSION};
use adaptq::dataset::NormStats;
use adaptq::nn::{Activation, DenseLayer, Mlp};
use ndarray::{Array1, Array2};

pub const FIXTURE_CSV: &str = "\
sex,age,race,la1ar2,hypev,diabetes,y
2,85,0,0,1,0,1
1,40,1,1,1,1,1
2,30,0,0,0,0,0
1,60,2,1,0,1,0
";

pub const FIXTURE_NAMES: [&str; 6] = ["sex", "age", "race", "la1ar2", "hypev", "diabetes"];

/// Six features, the first three forced, two questions allowed.
///
/// Q network: older respondents push toward an immediate guess; a positive
/// `la1ar2` makes `hypev` the next question. Guesser: `la1ar2`, `hypev` and
/// age raise the positive class.
pub fn fixture_model() -> ModelArtifact {
    let d = 6;
    let mut qw = Array2::zeros((d + 1, 2 * d));
    qw[[d, 1]] = 3.0;
    qw[[4, 3]] = 3.0;
    let q = DenseLayer::from_parts(
        qw,
        Array1::from(vec![0.0, 0.0, 0.0, 2.0, 0.3, 0.5, 0.0]),
        Activation::Sigmoid,
        0.0,
    );
    let mut gw = Array2::zeros((2, 2 * d));
    gw[[1, 1]] = 1.5;
    gw[[1, 3]] = 2.0;
    gw[[1, 4]] = 1.0;
    let g = DenseLayer::from_parts(gw, Array1::from(vec![0.0, -1.0]), Activation::Softmax, 0.0);
    ModelArtifact {
        format_version: ARTIFACT_FORMAT_VERSION,
        d,
        n_classes: 2,
        feature_names: FIXTURE_NAMES.iter().map(|s| s.to_string()).collect(),
        forced_indices: vec![0, 1, 2],
        label_column: Some("y".into()),
        norm_stats: NormStats {
            min: vec![1.0, 18.0, 0.0, 0.0, 0.0, 0.0],
            max: vec![2.0, 85.0, 2.0, 1.0, 1.0, 1.0],
        },
        k_features: 5,
        question_reward: true,
        guesser: Mlp::from_layers(vec![g]).unwrap(),
        q_network: Mlp::from_layers(vec![q]).unwrap(),
        exploration_weights: vec![1.0 / 7.0; 7],
        seed: 0,
        config_hash: "fixture".into(),
        validation_metric: None,
    }
}

/// Writes the fixture model and CSV into `dir`.
pub fn write_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let model = dir.join("model.json");
    let data = dir.join("data.csv");
    fixture_model().save(&model).unwrap();
    std::fs::write(&data, FIXTURE_CSV).unwrap();
    (model, data)
}

pub fn adaptq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adaptq"))
        .args(args)
        .output()
        .expect("run adaptq")
}

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}
