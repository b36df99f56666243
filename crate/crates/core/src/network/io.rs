//! Network file format: one JSON document with `meta`, `buses`, `branches`.
//!
//! ```json
//! { "meta": { "name": "two-bus", "units": "km, p.u." },
//!   "buses": [ { "id": 1, "x": 0, "y": 0, "m": 1, "d": 0.1, "p": 1, "v": 1 } ],
//!   "branches": [ { "from": 1, "to": 2, "b": 2.0 } ] }
//! ```
//! Unknown fields are rejected. Branch `b` is the raw susceptance; the
//! voltage-folded coupling is recomputed on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Bus, BusId, Meta, PowerNetwork};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchRecord {
    from: BusId,
    to: BusId,
    b: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    meta: Meta,
    buses: Vec<Bus>,
    branches: Vec<BranchRecord>,
}

pub fn parse_network(text: &str) -> Result<PowerNetwork> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::parse("network file", e))?;
    let branches = file.branches.into_iter().map(|b| (b.from, b.to, b.b)).collect();
    PowerNetwork::new(file.meta, file.buses, branches)
}

pub fn load_network(path: impl AsRef<Path>) -> Result<PowerNetwork> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_network(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
        other => other,
    })
}

pub fn to_json(net: &PowerNetwork) -> String {
    let file = NetworkFile {
        meta: net.meta.clone(),
        buses: net.buses().to_vec(),
        branches: net.branches().iter().map(|b| BranchRecord { from: b.from, to: b.to, b: b.b }).collect(),
    };
    serde_json::to_string_pretty(&file).expect("network serializes")
}

pub fn save_network(net: &PowerNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json(net)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = r#"{
        "meta": { "name": "two-bus", "units": "km, p.u." },
        "buses": [
            { "id": 1, "x": 0.0, "y": 0.0, "m": 1.0, "d": 0.1, "p": 1.0, "v": 1.0 },
            { "id": 2, "x": 50.0, "y": 0.0, "m": 0.0, "d": 0.2, "p": -1.0, "v": 1.0 }
        ],
        "branches": [ { "from": 1, "to": 2, "b": 2.0 } ]
    }"#;

    #[test]
    fn parses_minimal_file() {
        let net = parse_network(TWO_BUS).unwrap();
        assert_eq!(net.len(), 2);
        assert_eq!(net.branches().len(), 1);
        assert_eq!(net.meta.name, "two-bus");
    }

    #[test]
    fn zero_damping_names_bus() {
        let text = TWO_BUS.replace("\"d\": 0.2", "\"d\": 0.0");
        let err = parse_network(&text).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("bus 2"), "{err}");
    }

    #[test]
    fn two_components_reported() {
        let text = r#"{ "meta": { "name": "", "units": "" },
            "buses": [
                { "id": 1, "x": 0, "y": 0, "m": 1, "d": 0.1, "p": 0, "v": 1 },
                { "id": 2, "x": 1, "y": 0, "m": 1, "d": 0.1, "p": 0, "v": 1 },
                { "id": 3, "x": 2, "y": 0, "m": 1, "d": 0.1, "p": 0, "v": 1 },
                { "id": 4, "x": 3, "y": 0, "m": 1, "d": 0.1, "p": 0, "v": 1 },
                { "id": 5, "x": 4, "y": 0, "m": 1, "d": 0.1, "p": 0, "v": 1 }
            ],
            "branches": [ { "from": 1, "to": 2, "b": 1 }, { "from": 2, "to": 3, "b": 1 }, { "from": 4, "to": 5, "b": 1 } ] }"#;
        let err = parse_network(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("disconnected graph") && msg.contains("[3, 2]"), "{msg}");
    }

    #[test]
    fn unknown_and_malformed_rejected() {
        let text = TWO_BUS.replace("\"v\": 1.0 }", "\"v\": 1.0, \"q\": 0.0 }");
        assert!(matches!(parse_network(&text), Err(Error::Parse { .. })));
        assert!(matches!(parse_network("{ not json"), Err(Error::Parse { .. })));
    }

    #[test]
    fn file_round_trip() {
        let net = parse_network(TWO_BUS).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        save_network(&net, &path).unwrap();
        assert_eq!(load_network(&path).unwrap(), net);
        assert!(matches!(load_network(dir.path().join("missing.json")), Err(Error::Io { .. })));
    }
}
