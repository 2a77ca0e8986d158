use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use radopf_core::cases::{self, BoxStyle};
use radopf_core::network::{parse_network, Network, NetworkError, NetworkSource, ValidationError};

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data");

fn read(name: &str) -> Vec<u8> {
    std::fs::read(format!("{DATA}/{name}")).unwrap()
}

#[test]
fn shipped_ieee33_matches_builtin() {
    let json = parse_network(NetworkSource::Json(&read("ieee33.json"))).unwrap();
    assert_eq!(json, cases::ieee33());
    let csv = parse_network(NetworkSource::CsvPair {
        nodes: &read("ieee33_nodes.csv"),
        branches: &read("ieee33_branches.csv"),
        v0: 1.0,
    })
    .unwrap();
    assert_eq!(csv, json);
    assert_eq!(json.num_nodes(), 32);
}

#[test]
fn json_and_csv_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in [1, 5, 40] {
        let net = cases::random_radial(&mut rng, n, BoxStyle::Mixed);
        assert_eq!(Network::from_json(&net.to_json()).unwrap(), net);
        let (nodes, branches) = net.to_csv_pair();
        let back = parse_network(NetworkSource::CsvPair { nodes: nodes.as_bytes(), branches: branches.as_bytes(), v0: net.v0() }).unwrap();
        assert_eq!(back, net);
    }
}

fn validation(json: &str) -> ValidationError {
    match Network::from_json(json) {
        Err(NetworkError::Validation(e)) => e,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

const NODE: &str = r#""v_min": 0.9, "v_max": 1.1, "p_min": -1, "p_max": 0, "q_min": -1, "q_max": 0"#;

fn file(nodes: &[&str], branches: &[(&str, &str, f64)]) -> String {
    let nodes: Vec<String> = nodes.iter().map(|id| format!(r#"{{"id": "{id}", {NODE}}}"#)).collect();
    let branches: Vec<String> = branches
        .iter()
        .map(|(c, p, r)| format!(r#"{{"child": "{c}", "parent": "{p}", "r": {r}, "x": 0.1, "l_max": 1}}"#))
        .collect();
    format!(r#"{{"v0": 1.0, "nodes": [{}], "branches": [{}]}}"#, nodes.join(","), branches.join(","))
}

#[test]
fn malformed_networks_are_rejected() {
    assert!(Network::from_json(&file(&["a"], &[("a", "root", 0.1)])).is_ok());
    assert!(matches!(validation(&file(&["a"], &[("a", "root", -0.1)])), ValidationError::NonPositiveImpedance { .. }));
    assert!(matches!(validation(&file(&["a", "a"], &[("a", "root", 0.1)])), ValidationError::DuplicateNode(_)));
    assert!(matches!(
        validation(&file(&["a", "b"], &[("a", "root", 0.1), ("b", "a", 0.1), ("b", "root", 0.1)])),
        ValidationError::MultipleParents(_)
    ));
    assert!(matches!(validation(&file(&["a", "b"], &[("a", "root", 0.1)])), ValidationError::Disconnected(_)));
    assert!(matches!(
        validation(&file(&["a", "b", "c"], &[("a", "root", 0.1), ("b", "c", 0.1), ("c", "b", 0.1)])),
        ValidationError::Cycle(_)
    ));
    assert!(matches!(Network::from_json("{"), Err(NetworkError::Parse(_))));
}
