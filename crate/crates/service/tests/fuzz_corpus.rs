//! The checked-in fuzz seeds stay meaningful: files named `bad_*` are
//! rejected by their parser, every other seed is accepted.

use std::path::PathBuf;

use fusionloc::db::{parse_query, RpDatabase, TrialSet};
use fusionloc_service::api::{parse_localize_request, parse_session_request, parse_step_request};

fn check(target: &str, accepts: impl Fn(&[u8]) -> bool) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap_or_else(|e| panic!("{}: {e}", dir.display())) {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(accepts(&bytes), !name.starts_with("bad_"), "{target}/{name}");
        seen += 1;
    }
    assert!(seen >= 2, "{target} has {seen} seeds");
}

#[test]
fn db_load_seeds() {
    check("db_load", |b| RpDatabase::from_json_bytes(b).is_ok());
}

#[test]
fn query_parse_seeds() {
    check("query_parse", |b| parse_query(b).is_ok());
}

#[test]
fn trials_load_seeds() {
    check("trials_load", |b| TrialSet::from_json_bytes(b).is_ok());
}

#[test]
fn localize_request_seeds() {
    check("localize_request", |b| parse_localize_request(b).is_ok());
}

#[test]
fn session_request_seeds() {
    check("session_request", |b| parse_session_request(b).is_ok());
}

#[test]
fn step_request_seeds() {
    check("step_request", |b| parse_step_request(b).is_ok());
}
