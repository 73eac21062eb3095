use std::path::{Path, PathBuf};

use opf_activeset::config::RunConfig;
use opf_activeset::dataset_io::{read_dataset, write_dataset, DatasetIoError};
use opf_activeset::model_io::{load_model, save_model, ModelIoError};
use opf_activeset::pipeline::{generate, prepare_case, thread_pool};
use opf_activeset_core::nn::{fit, predict_topk, TrainConfig};
use opf_activeset_core::scenario::Dataset;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn small_dataset(n: usize, sigma_frac: f64) -> Dataset {
    let case = prepare_case(&fixture("case3.m")).unwrap();
    let pool = thread_pool(Some(2)).unwrap();
    generate(&case, sigma_frac, n, 11, 100, &pool).unwrap().dataset
}

fn small_config() -> TrainConfig {
    TrainConfig {
        layer_widths: vec![8, 8],
        epochs: 2,
        batch_size: 16,
        seed: 5,
        ..TrainConfig::default()
    }
}

fn bytes_of(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    write_dataset(ds, &mut out).unwrap();
    out
}

#[test]
fn dataset_save_load_save_is_identical() {
    let ds = small_dataset(200, 0.2);
    let first = bytes_of(&ds);
    let back = read_dataset(first.as_slice()).unwrap();
    assert_eq!(back.samples, ds.samples);
    assert_eq!(back.dictionary, ds.dictionary);
    assert_eq!(back.meta, ds.meta);
    assert_eq!(bytes_of(&back), first);
}

#[test]
fn dataset_with_edited_dictionary_is_rejected() {
    let text = String::from_utf8(bytes_of(&small_dataset(100, 0.2))).unwrap();
    let (header, body) = text.split_once('\n').unwrap();
    let mut value: serde_json::Value = serde_json::from_str(header).unwrap();
    value["binding"] = serde_json::Value::String("0".repeat(64));
    let edited = format!("{value}\n{body}");
    assert!(matches!(
        read_dataset(edited.as_bytes()),
        Err(DatasetIoError::BadHeader(_))
    ));
}

#[test]
fn dataset_version_is_checked() {
    let text = String::from_utf8(bytes_of(&small_dataset(20, 0.03))).unwrap();
    let edited = text.replacen("\"version\":1", "\"version\":9", 1);
    assert!(matches!(
        read_dataset(edited.as_bytes()),
        Err(DatasetIoError::VersionMismatch { found: 9, expected: 1 })
    ));
}

#[test]
fn dataset_truncated_body_is_rejected() {
    let text = String::from_utf8(bytes_of(&small_dataset(50, 0.03))).unwrap();
    let cut: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
    assert!(read_dataset(cut.as_bytes()).is_err());
}

#[test]
fn model_save_load_save_is_identical() {
    let ds = small_dataset(200, 0.2);
    let cfg = small_config();
    let model = fit(&ds, &cfg).unwrap().model;
    let bytes = save_model(&model, &cfg);
    let file = load_model(&bytes).unwrap();
    assert_eq!(file.train_config, cfg);
    assert_eq!(save_model(&file.model, &file.train_config), bytes);
    for s in ds.samples.iter().take(20) {
        let k = model.classes;
        assert_eq!(
            predict_topk(&model, &s.omega, k).unwrap(),
            predict_topk(&file.model, &s.omega, k).unwrap()
        );
    }
}

#[test]
fn truncated_model_is_corrupt() {
    let ds = small_dataset(100, 0.2);
    let cfg = small_config();
    let bytes = save_model(&fit(&ds, &cfg).unwrap().model, &cfg);
    let cut = &bytes[..bytes.len() / 2];
    assert!(matches!(load_model(cut), Err(ModelIoError::CorruptPayload(_))));
}

#[test]
fn model_with_wrong_shapes_is_corrupt() {
    let ds = small_dataset(100, 0.2);
    let cfg = small_config();
    let mut model = fit(&ds, &cfg).unwrap().model;
    model.output.bias.pop();
    assert!(matches!(
        load_model(&save_model(&model, &cfg)),
        Err(ModelIoError::CorruptPayload(_))
    ));
}

#[test]
fn model_version_is_checked() {
    let ds = small_dataset(50, 0.2);
    let cfg = small_config();
    let text = String::from_utf8(save_model(&fit(&ds, &cfg).unwrap().model, &cfg)).unwrap();
    let edited = text.replacen("\"version\": 1", "\"version\": 2", 1);
    assert!(matches!(
        load_model(edited.as_bytes()),
        Err(ModelIoError::VersionMismatch { found: 2, expected: 1 })
    ));
}

#[test]
fn config_toml_round_trip_and_defaults() {
    let cfg = RunConfig::default();
    assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    let partial = RunConfig::from_toml("seed = 7\n[nn]\nepochs = 3\n").unwrap();
    assert_eq!(partial.seed, 7);
    assert_eq!(partial.nn.epochs, 3);
    assert_eq!(partial.nn.batch_size, 32);
    assert_eq!(partial.sigma_frac, 0.03);
    assert_eq!(partial.eval.k_list, vec![1, 2, 3]);
}

#[test]
fn config_rejects_unknown_keys_and_bad_k() {
    assert!(RunConfig::from_toml("sigma = 0.1\n").is_err());
    let cfg = RunConfig::from_toml("[eval]\nk_list = [0, 1]\n").unwrap();
    assert!(cfg.validate().is_err());
}
