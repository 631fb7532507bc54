//! JSON graph and subset files.
//!
//! ```json
//! {"vertices":[{"id":"0","m":1.0}], "edges":[{"u":"0","v":"1","b":1.0}]}
//! {"ids":["0","2"]}
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_graph, GraphSpec, VertexSet, WeightedGraph};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub ids: Vec<String>,
}

pub fn parse_graph(text: &str) -> Result<WeightedGraph> {
    let spec: GraphSpec = serde_json::from_str(text)?;
    build_graph(&spec)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<WeightedGraph> {
    parse_graph(&fs::read_to_string(path)?)
}

pub fn graph_to_json(g: &WeightedGraph) -> String {
    serde_json::to_string_pretty(&g.to_spec()).expect("graph spec serializes")
}

pub fn parse_subset(g: &WeightedGraph, text: &str) -> Result<VertexSet> {
    let spec: SubsetSpec = serde_json::from_str(text)?;
    g.subset(&spec.ids)
}

pub fn load_subset(g: &WeightedGraph, path: impl AsRef<Path>) -> Result<VertexSet> {
    parse_subset(g, &fs::read_to_string(path)?)
}

pub fn subset_to_json(g: &WeightedGraph, set: &VertexSet) -> String {
    let spec = SubsetSpec {
        ids: set.iter().map(|x| g.id(x).to_string()).collect(),
    };
    serde_json::to_string(&spec).expect("subset serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn graph_json_round_trip() {
        let text = r#"{"vertices":[{"id":"a","m":1.0},{"id":"b","m":2.5}],
                       "edges":[{"u":"a","v":"b","b":0.5}]}"#;
        let g = parse_graph(text).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.weight(0, 1), 0.5);
        assert_eq!(parse_graph(&graph_to_json(&g)).unwrap(), g);

        let d = parse_subset(&g, r#"{"ids":["b"]}"#).unwrap();
        assert_eq!(d.members(), &[1]);
        assert_eq!(subset_to_json(&g, &d), r#"{"ids":["b"]}"#);
    }

    #[test]
    fn loader_rejects_bad_input() {
        assert!(matches!(parse_graph("{"), Err(Error::Parse(_))));
        assert!(matches!(
            parse_graph(r#"{"vertices":[{"id":"a","m":1}],"edges":[{"u":"a","v":"a","b":1}]}"#),
            Err(Error::SelfLoop(_))
        ));
        // JSON has no NaN/inf literals; they fail to parse.
        assert!(parse_graph(r#"{"vertices":[{"id":"a","m":NaN}],"edges":[]}"#).is_err());
        assert!(matches!(
            parse_graph(r#"{"vertices":[{"id":"a","m":1e400}],"edges":[]}"#),
            Err(Error::Parse(_)) | Err(Error::InvalidWeight { .. })
        ));
        let g = parse_graph(r#"{"vertices":[{"id":"a","m":1}],"edges":[]}"#).unwrap();
        assert!(matches!(
            parse_subset(&g, r#"{"ids":["zz"]}"#),
            Err(Error::UnknownVertex(_))
        ));
    }
}
