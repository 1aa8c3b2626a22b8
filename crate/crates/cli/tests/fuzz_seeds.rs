//! Replays the checked-in fuzz corpus through every parser. Seeds named
//! `ok_*` must parse and `err_*` must be rejected; none may panic.

use std::path::{Path, PathBuf};

use dicke_control::fixtures::FixtureTable;
use dicke_control::gpg::PulseGrid;
use dicke_control::protocol::ProtocolParams;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(out.iter().any(|(n, _)| n.starts_with("ok_")), "{target} has no accepted seed");
    assert!(out.iter().any(|(n, _)| n.starts_with("err_")), "{target} has no rejected seed");
    out
}

fn check(target: &str, accepts: impl Fn(&[u8]) -> bool) {
    for (name, bytes) in seeds(target) {
        let expected = name.starts_with("ok_");
        assert_eq!(accepts(&bytes), expected, "{target}/{name}");
    }
}

#[test]
fn protocol_seeds() {
    check("protocol_json", |b| {
        let Ok(p) = ProtocolParams::from_json(std::str::from_utf8(b).unwrap()) else { return false };
        let again = ProtocolParams::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, again);
        true
    });
}

#[test]
fn pulse_seeds() {
    check("pulse_csv", |b| {
        let Ok(grid) = PulseGrid::read_csv(b) else { return false };
        let mut out = Vec::new();
        grid.write_csv(&mut out).unwrap();
        let again = PulseGrid::read_csv(out.as_slice()).unwrap();
        assert_eq!((grid.times, grid.zeta, grid.eta), (again.times, again.zeta, again.eta));
        true
    });
}

#[test]
fn fixture_seeds() {
    check("fixture_table", |b| FixtureTable::from_json(std::str::from_utf8(b).unwrap()).is_ok());
}

#[test]
fn config_seeds() {
    check("experiment_config", |b| {
        let schemas = dickectl::config::accepted_schemas(b);
        assert!(schemas.len() <= 1, "ambiguous config accepted by {schemas:?}");
        !schemas.is_empty()
    });
}
