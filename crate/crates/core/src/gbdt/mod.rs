//! Newton-boosted regression trees for binary logistic loss.

mod binning;
mod io;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use binning::{bin_features, Bins};
pub use io::{load_model, save_model, LoadError, FORMAT_VERSION};

use crate::features::{feature_names, N_FEATURES};

/// Hessian floor; keeps leaf weights finite once predictions saturate.
pub const HESSIAN_FLOOR: f64 = 1e-16;

/// Largest `f64` below one; probabilities are clamped to stay inside (0, 1).
const P_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeAlgorithm {
    /// Every midpoint between consecutive distinct training values.
    Exact,
    /// Quantile-binned candidate thresholds, at most `n_bins` per feature.
    Hist,
}

impl fmt::Display for TreeAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TreeAlgorithm::Exact => "exact",
            TreeAlgorithm::Hist => "hist",
        })
    }
}

impl FromStr for TreeAlgorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(TreeAlgorithm::Exact),
            "hist" => Ok(TreeAlgorithm::Hist),
            other => Err(format!("unknown tree algorithm `{other}` (expected exact or hist)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub n_estimators: usize,
    #[serde(with = "crate::numfmt::json17")]
    pub learning_rate: f64,
    pub max_depth: usize,
    pub tree_algorithm: TreeAlgorithm,
    #[serde(with = "crate::numfmt::json17")]
    pub lambda: f64,
    pub n_bins: usize,
    #[serde(with = "crate::numfmt::json17")]
    pub min_child_weight: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// The pre-search reference configuration: 100 trees, rate 0.1, depth 6.
    fn default() -> Self {
        TrainConfig {
            n_estimators: 100,
            learning_rate: 0.1,
            max_depth: 6,
            tree_algorithm: TreeAlgorithm::Exact,
            lambda: 1.0,
            n_bins: 256,
            min_child_weight: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GbdtError> {
        let bad = |m: String| Err(GbdtError::InvalidConfig(m));
        if self.n_estimators < 1 {
            return bad("n_estimators must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate {} outside (0, 1]", self.learning_rate));
        }
        if !(1..=32).contains(&self.max_depth) {
            return bad(format!("max_depth {} outside [1, 32]", self.max_depth));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be finite and non-negative", self.lambda));
        }
        if self.n_bins < 2 {
            return bad(format!("n_bins {} must be at least 2", self.n_bins));
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return bad(format!("min_child_weight {} must be finite and non-negative", self.min_child_weight));
        }
        Ok(())
    }
}

impl fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n_estimators={} tree_algorithm={} max_depth={} learning_rate={}",
            self.n_estimators, self.tree_algorithm, self.max_depth, self.learning_rate
        )
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GbdtError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("need at least 2 rows and 1 feature")]
    TooSmall,
    #[error("label {value} at row {row} is not 0 or 1")]
    BadLabel { row: usize, value: f64 },
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("row has {found} features, model expects {expected}")]
    Dimension { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Samples with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

/// Binary tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(weight: f64) -> Tree {
        Tree { nodes: vec![Node::Leaf { weight }] }
    }

    /// Weight of the leaf reached by `row`.
    pub fn output(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { weight } => return weight,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] < threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Features used by any split.
    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    pub base_margin: f64,
    pub feature_names: Vec<String>,
    pub config: TrainConfig,
}

impl GbdtModel {
    /// A model with no trees.
    pub fn empty(feature_names: Vec<String>, config: TrainConfig) -> GbdtModel {
        GbdtModel { trees: Vec::new(), learning_rate: config.learning_rate, base_margin: 0.0, feature_names, config }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// The first `n` trees. Boosting is deterministic, so this equals a fresh
    /// fit with `n_estimators = n` and otherwise identical inputs.
    pub fn truncated(&self, n: usize) -> GbdtModel {
        let n = n.min(self.trees.len());
        GbdtModel { trees: self.trees[..n].to_vec(), config: TrainConfig { n_estimators: n, ..self.config.clone() }, ..self.clone() }
    }

    /// `base_margin + learning_rate · Σ tree outputs`.
    pub fn predict_margin(&self, row: &[f64]) -> Result<f64, GbdtError> {
        if row.len() != self.n_features() {
            return Err(GbdtError::Dimension { expected: self.n_features(), found: row.len() });
        }
        let sum: f64 = self.trees.iter().map(|t| t.output(row)).sum();
        Ok(self.base_margin + self.learning_rate * sum)
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<f64, GbdtError> {
        self.predict_margin(row).map(sigmoid)
    }

    pub fn predict_proba_batch<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<Vec<f64>, GbdtError> {
        rows.iter().map(|r| self.predict_proba(r.as_ref())).collect()
    }

    /// Whether the model was fit on the canonical 31 features.
    pub fn has_canonical_features(&self) -> bool {
        self.feature_names.len() == N_FEATURES && self.feature_names.iter().zip(feature_names()).all(|(a, b)| a == b)
    }
}

/// Logistic function, clamped into the open interval (0, 1).
pub fn sigmoid(margin: f64) -> f64 {
    let p = if margin >= 0.0 {
        1.0 / (1.0 + libm::exp(-margin))
    } else {
        let e = libm::exp(margin);
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, P_MAX)
}

/// Names bound to a model fit on `p` columns: canonical for 31, `f{i}` otherwise.
pub fn default_feature_names(p: usize) -> Vec<String> {
    if p == N_FEATURES {
        feature_names().iter().map(|s| s.to_string()).collect()
    } else {
        (0..p).map(|i| format!("f{i}")).collect()
    }
}

fn check_inputs<R: AsRef<[f64]>>(rows: &[R], labels: &[f64]) -> Result<usize, GbdtError> {
    if rows.len() != labels.len() {
        return Err(GbdtError::LabelCount { rows: rows.len(), labels: labels.len() });
    }
    let p = rows.first().map_or(0, |r| r.as_ref().len());
    if rows.len() < 2 || p == 0 {
        return Err(GbdtError::TooSmall);
    }
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != p {
            return Err(GbdtError::Dimension { expected: p, found: r.len() });
        }
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(GbdtError::NonFinite { row: i, col });
        }
    }
    if let Some(row) = labels.iter().position(|&y| y != 0.0 && y != 1.0) {
        return Err(GbdtError::BadLabel { row, value: labels[row] });
    }
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(GbdtError::SingleClass);
    }
    Ok(p)
}

/// Fits a model with default feature names.
pub fn fit<R: AsRef<[f64]>>(rows: &[R], labels: &[f64], config: &TrainConfig) -> Result<GbdtModel, GbdtError> {
    let p = rows.first().map_or(0, |r| r.as_ref().len());
    fit_named(rows, labels, default_feature_names(p), config)
}

/// Fits a model and binds `feature_names` to it.
pub fn fit_named<R: AsRef<[f64]>>(
    rows: &[R],
    labels: &[f64],
    feature_names: Vec<String>,
    config: &TrainConfig,
) -> Result<GbdtModel, GbdtError> {
    config.validate()?;
    let p = check_inputs(rows, labels)?;
    if feature_names.len() != p {
        return Err(GbdtError::Dimension { expected: p, found: feature_names.len() });
    }
    let bins = match config.tree_algorithm {
        TreeAlgorithm::Exact => binning::bin_with(rows, binning::exact_edges),
        TreeAlgorithm::Hist => binning::bin_features(rows, config.n_bins),
    };
    let mut model = GbdtModel::empty(feature_names, config.clone());
    let n = rows.len();
    let mut leaf_sum = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut builder = Builder::new(&bins, config);
    for _ in 0..config.n_estimators {
        for i in 0..n {
            let p = sigmoid(model.base_margin + model.learning_rate * leaf_sum[i]);
            grad[i] = p - labels[i];
            hess[i] = (p * (1.0 - p)).max(HESSIAN_FLOOR);
        }
        let (tree, leaf_of) = builder.build(&grad, &hess);
        for (acc, &leaf) in leaf_sum.iter_mut().zip(&leaf_of) {
            if let Node::Leaf { weight } = tree.nodes[leaf as usize] {
                *acc += weight;
            }
        }
        model.trees.push(tree);
    }
    Ok(model)
}

struct BestSplit {
    gain: f64,
    feature: usize,
    bin: usize,
}

struct Builder<'a> {
    bins: &'a Bins,
    lambda: f64,
    min_child_weight: f64,
    max_depth: usize,
    hist_g: Vec<f64>,
    hist_h: Vec<f64>,
    hist_n: Vec<u32>,
}

impl<'a> Builder<'a> {
    fn new(bins: &'a Bins, config: &TrainConfig) -> Self {
        let widest = (0..bins.edges.len()).map(|f| bins.n_bins(f)).max().unwrap_or(1);
        Builder {
            bins,
            lambda: config.lambda,
            min_child_weight: config.min_child_weight,
            max_depth: config.max_depth,
            hist_g: vec![0.0; widest],
            hist_h: vec![0.0; widest],
            hist_n: vec![0; widest],
        }
    }

    /// Grows one tree; also returns the leaf node index of every sample.
    fn build(&mut self, grad: &[f64], hess: &[f64]) -> (Tree, Vec<u32>) {
        let n = grad.len();
        let mut tree = Tree { nodes: Vec::new() };
        let mut leaf_of = vec![0u32; n];
        let all: Vec<u32> = (0..n as u32).collect();
        self.grow(&mut tree, &mut leaf_of, all, 0, grad, hess);
        (tree, leaf_of)
    }

    fn grow(&mut self, tree: &mut Tree, leaf_of: &mut [u32], samples: Vec<u32>, depth: usize, grad: &[f64], hess: &[f64]) -> usize {
        let id = tree.nodes.len();
        let (g, h) = samples.iter().fold((0.0, 0.0), |(g, h), &i| (g + grad[i as usize], h + hess[i as usize]));
        tree.nodes.push(Node::Leaf { weight: -g / (h + self.lambda) });
        if depth >= self.max_depth {
            samples.iter().for_each(|&i| leaf_of[i as usize] = id as u32);
            return id;
        }
        let Some(best) = self.best_split(&samples, g, h, grad, hess) else {
            samples.iter().for_each(|&i| leaf_of[i as usize] = id as u32);
            return id;
        };
        let column = &self.bins.index[best.feature];
        let (left, right): (Vec<u32>, Vec<u32>) = samples.into_iter().partition(|&i| column[i as usize] as usize <= best.bin);
        let threshold = self.bins.edges[best.feature][best.bin];
        let l = self.grow(tree, leaf_of, left, depth + 1, grad, hess);
        let r = self.grow(tree, leaf_of, right, depth + 1, grad, hess);
        tree.nodes[id] = Node::Split { feature: best.feature, threshold, left: l, right: r };
        id
    }

    /// Highest-gain admissible split; earlier features and lower thresholds win ties.
    fn best_split(&mut self, samples: &[u32], g: f64, h: f64, grad: &[f64], hess: &[f64]) -> Option<BestSplit> {
        let parent = g * g / (h + self.lambda);
        let total = samples.len() as u32;
        let mut best: Option<BestSplit> = None;
        for (f, column) in self.bins.index.iter().enumerate() {
            let nb = self.bins.n_bins(f);
            if nb < 2 {
                continue;
            }
            let (hg, hh, hn) = (&mut self.hist_g[..nb], &mut self.hist_h[..nb], &mut self.hist_n[..nb]);
            hg.fill(0.0);
            hh.fill(0.0);
            hn.fill(0);
            for &i in samples {
                let b = column[i as usize] as usize;
                hg[b] += grad[i as usize];
                hh[b] += hess[i as usize];
                hn[b] += 1;
            }
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0u32);
            for b in 0..nb - 1 {
                gl += hg[b];
                hl += hh[b];
                nl += hn[b];
                if nl == 0 {
                    continue;
                }
                if nl == total {
                    break;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < self.min_child_weight || hr < self.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (gl * gl / (hl + self.lambda) + gr * gr / (hr + self.lambda) - parent);
                if gain > 0.0 && best.as_ref().is_none_or(|s| gain > s.gain) {
                    best = Some(BestSplit { gain, feature: f, bin: b });
                }
            }
        }
        best
    }
}
