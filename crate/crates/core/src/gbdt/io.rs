//! Versioned JSON model files.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GbdtModel, Node, TrainConfig, Tree};
use crate::numfmt::json17;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}, column {column}: unsupported format_version {found} (expected {FORMAT_VERSION})")]
    Version { line: usize, column: usize, found: u64 },
    #[error("{what}")]
    Inconsistent { what: String },
}

impl LoadError {
    /// `(line, column)` of the failure when it maps to a place in the document.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            LoadError::Syntax { line, column, .. } | LoadError::Version { line, column, .. } => Some((*line, *column)),
            LoadError::Inconsistent { .. } => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format_version: u32,
    feature_names: Vec<String>,
    #[serde(with = "json17")]
    learning_rate: f64,
    #[serde(with = "json17")]
    base_margin: f64,
    config: TrainConfig,
    n_trees: usize,
    trees: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
enum NodeDoc {
    Leaf {
        #[serde(with = "json17")]
        weight: f64,
    },
    Split {
        feature: usize,
        #[serde(with = "json17")]
        threshold: f64,
        left: Box<NodeDoc>,
        right: Box<NodeDoc>,
    },
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u64,
}

fn to_doc(tree: &Tree, i: usize) -> NodeDoc {
    match tree.nodes[i] {
        Node::Leaf { weight } => NodeDoc::Leaf { weight },
        Node::Split { feature, threshold, left, right } => {
            NodeDoc::Split { feature, threshold, left: Box::new(to_doc(tree, left)), right: Box::new(to_doc(tree, right)) }
        }
    }
}

fn from_doc(doc: NodeDoc, nodes: &mut Vec<Node>, n_features: usize) -> Result<usize, LoadError> {
    let id = nodes.len();
    match doc {
        NodeDoc::Leaf { weight } => {
            if !weight.is_finite() {
                return Err(LoadError::Inconsistent { what: "non-finite leaf weight".into() });
            }
            nodes.push(Node::Leaf { weight });
        }
        NodeDoc::Split { feature, threshold, left, right } => {
            if feature >= n_features {
                return Err(LoadError::Inconsistent {
                    what: format!("split on feature {feature} but the model has {n_features} features"),
                });
            }
            if !threshold.is_finite() {
                return Err(LoadError::Inconsistent { what: "non-finite split threshold".into() });
            }
            nodes.push(Node::Leaf { weight: 0.0 });
            let l = from_doc(*left, nodes, n_features)?;
            let r = from_doc(*right, nodes, n_features)?;
            nodes[id] = Node::Split { feature, threshold, left: l, right: r };
        }
    }
    Ok(id)
}

/// Serializes a model as pretty-printed JSON.
pub fn save_model(model: &GbdtModel) -> Vec<u8> {
    let doc = ModelDoc {
        format_version: FORMAT_VERSION,
        feature_names: model.feature_names.clone(),
        learning_rate: model.learning_rate,
        base_margin: model.base_margin,
        config: model.config.clone(),
        n_trees: model.trees.len(),
        trees: model.trees.iter().map(|t| to_doc(t, 0)).collect(),
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("model fields are finite");
    out.push(b'\n');
    out
}

fn syntax(e: serde_json::Error) -> LoadError {
    LoadError::Syntax { line: e.line(), column: e.column(), message: e.to_string() }
}

/// 1-based line and column of the first occurrence of `needle`.
fn locate(bytes: &[u8], needle: &[u8]) -> (usize, usize) {
    let at = bytes.windows(needle.len()).position(|w| w == needle).unwrap_or(0);
    let before = &bytes[..at];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let column = at - before.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}

/// Parses a model file. Nothing is returned unless the whole document is valid.
pub fn load_model(bytes: &[u8]) -> Result<GbdtModel, LoadError> {
    let probe: VersionProbe = serde_json::from_slice(bytes).map_err(syntax)?;
    if probe.format_version != u64::from(FORMAT_VERSION) {
        let (line, column) = locate(bytes, b"\"format_version\"");
        return Err(LoadError::Version { line, column, found: probe.format_version });
    }
    let doc: ModelDoc = serde_json::from_slice(bytes).map_err(syntax)?;
    if doc.n_trees != doc.trees.len() {
        return Err(LoadError::Inconsistent { what: format!("n_trees says {} but {} trees are present", doc.n_trees, doc.trees.len()) });
    }
    if !doc.learning_rate.is_finite() || !doc.base_margin.is_finite() {
        return Err(LoadError::Inconsistent { what: "non-finite learning_rate or base_margin".into() });
    }
    let n_features = doc.feature_names.len();
    let trees = doc
        .trees
        .into_iter()
        .map(|t| {
            let mut nodes = Vec::new();
            from_doc(t, &mut nodes, n_features)?;
            Ok(Tree { nodes })
        })
        .collect::<Result<Vec<_>, LoadError>>()?;
    Ok(GbdtModel {
        trees,
        learning_rate: doc.learning_rate,
        base_margin: doc.base_margin,
        feature_names: doc.feature_names,
        config: doc.config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::{default_feature_names, fit};

    fn small_model() -> GbdtModel {
        let rows: Vec<[f64; 2]> = (0..20).map(|i| [i as f64 * 0.37, ((i * 7) % 5) as f64]).collect();
        let labels: Vec<f64> = (0..20).map(|i| f64::from(i >= 10)).collect();
        fit(&rows, &labels, &crate::gbdt::TrainConfig { n_estimators: 5, max_depth: 2, ..Default::default() }).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = small_model();
        let back = load_model(&save_model(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn zero_tree_model_keeps_base_margin() {
        let mut m = GbdtModel::empty(default_feature_names(3), TrainConfig::default());
        m.base_margin = -1.0 / 7.0;
        let back = load_model(&save_model(&m)).unwrap();
        assert_eq!(back.base_margin.to_bits(), m.base_margin.to_bits());
        assert!(back.trees.is_empty());
    }

    #[test]
    fn version_mismatch_reports_position() {
        let text = String::from_utf8(save_model(&small_model())).unwrap().replace("\"format_version\": 1", "\"format_version\": 2");
        match load_model(text.as_bytes()) {
            Err(LoadError::Version { found: 2, line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncation_and_unknown_fields_fail() {
        let bytes = save_model(&small_model());
        let cut = &bytes[..bytes.len() / 2];
        assert!(load_model(cut).unwrap_err().position().is_some());

        let text = String::from_utf8(bytes.clone()).unwrap().replacen("\"n_trees\"", "\"extra\": 0,\n  \"n_trees\"", 1);
        let err = load_model(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");

        let text = String::from_utf8(bytes).unwrap().replace("\"n_trees\": 5", "\"n_trees\": 7");
        assert!(matches!(load_model(text.as_bytes()), Err(LoadError::Inconsistent { .. })));
    }
}
