//! Network file formats: a single JSON document, or a pair of CSV tables.
//!
//! Node ids in files are arbitrary strings. The root is the one branch
//! parent that is not declared in the node table; it is interned as `0` and
//! the declared nodes as `1..=n` in file order.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use super::{Branch, Network, NetworkError, NodeLimits, ValidationError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    pub v_min: f64,
    pub v_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub child: String,
    pub parent: String,
    pub r: f64,
    pub x: f64,
    pub l_max: f64,
}

/// On-disk JSON layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub v0: f64,
    pub nodes: Vec<NodeRecord>,
    pub branches: Vec<BranchRecord>,
}

pub enum NetworkSource<'a> {
    Json(&'a [u8]),
    /// `nodes.csv` and `branches.csv` contents. The tables carry no root
    /// voltage, so it is supplied alongside.
    CsvPair {
        nodes: &'a [u8],
        branches: &'a [u8],
        v0: f64,
    },
}

pub fn parse_network(source: NetworkSource<'_>) -> Result<Network, NetworkError> {
    let file = match source {
        NetworkSource::Json(bytes) => {
            serde_json::from_slice::<NetworkFile>(bytes).map_err(|e| NetworkError::Parse(e.to_string()))?
        }
        NetworkSource::CsvPair { nodes, branches, v0 } => NetworkFile {
            v0,
            nodes: read_csv(nodes, "nodes.csv")?,
            branches: read_csv(branches, "branches.csv")?,
        },
    };
    Network::from_file(&file)
}

fn read_csv<T: for<'de> Deserialize<'de>>(bytes: &[u8], what: &str) -> Result<Vec<T>, NetworkError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(bytes);
    rdr.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| NetworkError::Parse(format!("{what}: {e}")))
}

impl Network {
    pub fn from_file(file: &NetworkFile) -> Result<Network, NetworkError> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (k, n) in file.nodes.iter().enumerate() {
            if index.insert(n.id.as_str(), k + 1).is_some() {
                return Err(ValidationError::DuplicateNode(n.id.clone()).into());
            }
        }
        let mut roots: Vec<&str> = file
            .branches
            .iter()
            .map(|b| b.parent.as_str())
            .filter(|p| !index.contains_key(p))
            .collect();
        roots.sort_unstable();
        roots.dedup();
        let root = match roots.as_slice() {
            [] => return Err(ValidationError::NoRoot.into()),
            [r] => *r,
            many => {
                // a stray parent id that is also never a child could be a typo;
                // report every candidate
                return Err(ValidationError::MultipleRoots(many.iter().map(|s| s.to_string()).collect()).into());
            }
        };
        let n = file.nodes.len();
        let mut names = Vec::with_capacity(n + 1);
        names.push(root.to_string());
        names.extend(file.nodes.iter().map(|r| r.id.clone()));

        let mut slot: Vec<Option<Branch>> = vec![None; n];
        for b in &file.branches {
            let child = match index.get(b.child.as_str()) {
                Some(&c) => c,
                None => {
                    return Err(ValidationError::UnknownEndpoint {
                        child: b.child.clone(),
                        parent: b.parent.clone(),
                        name: b.child.clone(),
                    }
                    .into())
                }
            };
            let parent = if b.parent == root { 0 } else { index[b.parent.as_str()] };
            if child == parent {
                return Err(ValidationError::SelfLoop(b.child.clone()).into());
            }
            if slot[child - 1].is_some() {
                return Err(ValidationError::MultipleParents(b.child.clone()).into());
            }
            slot[child - 1] = Some(Branch {
                child,
                parent,
                r: b.r,
                x: b.x,
                l_max: b.l_max,
            });
        }
        let mut branches = Vec::with_capacity(n);
        for (k, s) in slot.into_iter().enumerate() {
            match s {
                Some(b) => branches.push(b),
                None => return Err(ValidationError::Disconnected(names[k + 1].clone()).into()),
            }
        }
        let limits = file
            .nodes
            .iter()
            .map(|r| NodeLimits {
                v_min: r.v_min,
                v_max: r.v_max,
                p_min: r.p_min,
                p_max: r.p_max,
                q_min: r.q_min,
                q_max: r.q_max,
            })
            .collect();
        Ok(Network::assemble(file.v0, names, limits, branches)?)
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            v0: self.v0,
            nodes: (1..=self.num_nodes())
                .map(|i| {
                    let l = self.limits(i);
                    NodeRecord {
                        id: self.names[i].clone(),
                        v_min: l.v_min,
                        v_max: l.v_max,
                        p_min: l.p_min,
                        p_max: l.p_max,
                        q_min: l.q_min,
                        q_max: l.q_max,
                    }
                })
                .collect(),
            branches: self
                .branches
                .iter()
                .map(|b| BranchRecord {
                    child: self.names[b.child].clone(),
                    parent: self.names[b.parent].clone(),
                    r: b.r,
                    x: b.x,
                    l_max: b.l_max,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("network file is always serializable")
    }

    pub fn from_json(s: &str) -> Result<Network, NetworkError> {
        parse_network(NetworkSource::Json(s.as_bytes()))
    }

    /// `(nodes.csv, branches.csv)` contents.
    pub fn to_csv_pair(&self) -> (String, String) {
        fn write<T: Serialize>(rows: &[T]) -> String {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r).expect("in-memory csv write");
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
        }
        let f = self.to_file();
        (write(&f.nodes), write(&f.branches))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_NODE: &str = r#"{
        "v0": 1.0,
        "nodes": [{"id": "load", "v_min": 0.81, "v_max": 1.21, "p_min": -0.1, "p_max": 0.1, "q_min": -0.1, "q_max": 0.1}],
        "branches": [{"child": "load", "parent": "sub", "r": 0.01, "x": 0.02, "l_max": 4.0}]
    }"#;

    #[test]
    fn smallest_network_parses() {
        let net = Network::from_json(TWO_NODE).unwrap();
        assert_eq!(net.num_branches(), 1);
        assert_eq!(net.name(0), "sub");
        assert_eq!(net.node_by_name("load"), Some(1));
        assert_eq!(net.branch(1).parent, 0);
    }

    #[test]
    fn negative_resistance_is_a_validation_error() {
        let bad = TWO_NODE.replace("\"r\": 0.01", "\"r\": -0.01");
        match Network::from_json(&bad) {
            Err(NetworkError::Validation(ValidationError::NonPositiveImpedance { child, .. })) => {
                assert_eq!(child, "load")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(Network::from_json("{\"v0\": 1.0"), Err(NetworkError::Parse(_))));
        let missing = TWO_NODE.replace("\"l_max\": 4.0", "\"lmax\": 4.0");
        assert!(matches!(Network::from_json(&missing), Err(NetworkError::Parse(_))));
    }

    #[test]
    fn structural_errors_name_the_element() {
        let two_roots = TWO_NODE.replace(
            "\"branches\": [",
            "\"branches\": [{\"child\": \"load\", \"parent\": \"other\", \"r\": 0.01, \"x\": 0.02, \"l_max\": 4.0},",
        );
        assert!(matches!(
            Network::from_json(&two_roots),
            Err(NetworkError::Validation(ValidationError::MultipleRoots(_)))
        ));
        let orphan = TWO_NODE.replace(
            "\"nodes\": [",
            "\"nodes\": [{\"id\": \"lost\", \"v_min\": 0.81, \"v_max\": 1.21, \"p_min\": 0, \"p_max\": 0, \"q_min\": 0, \"q_max\": 0},",
        );
        match Network::from_json(&orphan) {
            Err(NetworkError::Validation(ValidationError::Disconnected(n))) => assert_eq!(n, "lost"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_pair_matches_json() {
        let net = Network::from_json(TWO_NODE).unwrap();
        let (nodes, branches) = net.to_csv_pair();
        assert!(nodes.starts_with("id,v_min,v_max,p_min,p_max,q_min,q_max"));
        let back = parse_network(NetworkSource::CsvPair {
            nodes: nodes.as_bytes(),
            branches: branches.as_bytes(),
            v0: 1.0,
        })
        .unwrap();
        assert_eq!(back, net);
        assert_eq!(Network::from_json(&net.to_json()).unwrap(), net);
    }
}
