use std::collections::HashSet;

use contextnet::cli::{prepare, RunConfig};
use contextnet::data::{read_records, split_dataset, write_records, FieldKind, RawRecord, Schema, OOV_INDEX};

fn write_fixture(dir: &std::path::Path) -> RunConfig {
    let schema = Schema::from_kinds([("city", FieldKind::Categorical), ("age", FieldKind::Numerical)]).unwrap();
    std::fs::write(dir.join("schema.tsv"), schema.to_text()).unwrap();
    // every row carries a unique token, so held-out tokens never reach the vocabulary
    let records: Vec<RawRecord> = (0..200)
        .map(|i| RawRecord::new((i % 2).to_string(), [format!("c{i}"), (i % 37).to_string()]))
        .collect();
    write_records(&dir.join("data.tsv"), &records).unwrap();
    let mut cfg = RunConfig::default();
    cfg.data = Some(dir.join("data.tsv"));
    cfg.schema = Some(dir.join("schema.tsv"));
    cfg.train.seed = 4;
    cfg
}

#[test]
fn held_out_tokens_map_to_oov() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path());
    let p = prepare(&cfg).unwrap();
    assert_eq!(p.vocab.cardinalities(), vec![p.train.len() + 1, 1]);
    assert!(p.train.iter().all(|i| i.indices[0] != OOV_INDEX));
    assert!(p.val.iter().chain(p.test.iter()).all(|i| i.indices[0] == OOV_INDEX));
}

#[test]
fn numerical_field_is_standardized_on_train() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path());
    let p = prepare(&cfg).unwrap();
    let values: Vec<f64> = p.train.iter().map(|i| i.values[1]).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 1e-12);
    assert!((var - 1.0).abs() < 1e-12);
}

#[test]
fn split_partitions_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path());
    let schema = Schema::load(cfg.schema.as_ref().unwrap()).unwrap();
    let records = read_records(cfg.data.as_ref().unwrap(), &schema).unwrap();
    let (train, val, test) = split_dataset(&records, 4).unwrap();
    assert_eq!((train.len(), val.len(), test.len()), (160, 20, 20));
    let keys = |rs: &[RawRecord]| rs.iter().map(|r| r.values[0].clone()).collect::<HashSet<_>>();
    let all: HashSet<_> = keys(&train).union(&keys(&val)).cloned().collect::<HashSet<_>>();
    assert_eq!(all.union(&keys(&test)).count(), 200);
    assert_ne!(split_dataset(&records, 5).unwrap().1, val);
}
