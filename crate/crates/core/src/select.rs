//! Train/validation/test splitting, k-fold cross-validation and exhaustive
//! hyperparameter search.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eval::{auroc, EvalError};
use crate::features::FeatureMatrix;
use crate::gbdt::{fit, GbdtError, GbdtModel, TrainConfig, TreeAlgorithm};
use crate::numfmt::sig17;
use crate::trace::{Dataset, Digit};

/// Tolerance on the ratio sum, and slack absorbed before flooring a cut.
const RATIO_EPS: f64 = 1e-12;
const CUT_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("dataset is empty")]
    Empty,
    #[error("need both classes, found {zeros} zeros and {ones} ones")]
    MissingClass { zeros: usize, ones: usize },
    #[error("k={k} folds need 2 <= k <= n={n}")]
    Folds { k: usize, n: usize },
    #[error("grid is empty")]
    EmptyGrid,
    #[error("config {index} ({config}): {source}")]
    Fit { index: usize, config: TrainConfig, source: GbdtError },
    #[error("config {index} ({config}): {source}")]
    Score { index: usize, config: TrainConfig, source: EvalError },
    #[error(transparent)]
    Gbdt(#[from] GbdtError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Split proportions and the permutation seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 0.6, val: 0.2, test: 0.2, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), SelectError> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(SelectError::InvalidSplit("every ratio must be positive".into()));
        }
        if (r.iter().sum::<f64>() - 1.0).abs() > RATIO_EPS {
            return Err(SelectError::InvalidSplit(format!("ratios sum to {}, not 1", r.iter().sum::<f64>())));
        }
        Ok(())
    }

    /// `(train, val, test)` sizes for `n` samples: floor for the first two, remainder to test.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let cut = |r: f64| ((n as f64 * r + CUT_SLACK).floor() as usize).min(n);
        let tr = cut(self.train);
        let va = cut(self.val).min(n - tr);
        (tr, va, n - tr - va)
    }
}

/// Index sets of a three-way split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    idx
}

/// Seeded permutation of `0..n` cut at the ratio boundaries.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices, SelectError> {
    spec.validate()?;
    if n == 0 {
        return Err(SelectError::Empty);
    }
    let perm = permutation(n, spec.seed);
    let (tr, va, _) = spec.sizes(n);
    Ok(SplitIndices { train: perm[..tr].to_vec(), val: perm[tr..tr + va].to_vec(), test: perm[tr + va..].to_vec() })
}

fn require_both_classes(labels: &[Digit]) -> Result<(), SelectError> {
    let ones = labels.iter().filter(|&&d| d == Digit::One).count();
    let zeros = labels.len() - ones;
    if zeros == 0 || ones == 0 {
        return Err(SelectError::MissingClass { zeros, ones });
    }
    Ok(())
}

/// Unstratified three-way split of a labeled dataset.
pub fn split_dataset(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset), SelectError> {
    if dataset.is_empty() {
        return Err(SelectError::Empty);
    }
    require_both_classes(&dataset.labels())?;
    let s = split_indices(dataset.len(), spec)?;
    Ok((dataset.select(&s.train), dataset.select(&s.val), dataset.select(&s.test)))
}

/// One cross-validation split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub held_out: Vec<usize>,
}

/// `k` folds over a seeded permutation; the first `n % k` folds hold one extra index.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>, SelectError> {
    if k < 2 || k > n {
        return Err(SelectError::Folds { k, n });
    }
    let perm = permutation(n, seed);
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    Ok((0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let held_out = perm[start..start + len].to_vec();
            let train = perm[..start].iter().chain(&perm[start + len..]).copied().collect();
            start += len;
            Fold { train, held_out }
        })
        .collect())
}

/// Hyperparameter axes; the grid is their Cartesian product in field order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxes {
    pub n_estimators: Vec<usize>,
    pub tree_algorithm: Vec<TreeAlgorithm>,
    pub max_depth: Vec<usize>,
    pub learning_rate: Vec<f64>,
}

impl Default for GridAxes {
    fn default() -> Self {
        GridAxes {
            n_estimators: vec![1000, 2000, 3000, 4000, 5000],
            tree_algorithm: vec![TreeAlgorithm::Hist, TreeAlgorithm::Exact],
            max_depth: (1..=8).collect(),
            learning_rate: vec![0.1, 0.3, 0.5],
        }
    }
}

impl GridAxes {
    pub fn len(&self) -> usize {
        self.n_estimators.len() * self.tree_algorithm.len() * self.max_depth.len() * self.learning_rate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All combinations, last axis varying fastest. Unlisted fields come from `base`.
    pub fn product(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &n_estimators in &self.n_estimators {
            for &tree_algorithm in &self.tree_algorithm {
                for &max_depth in &self.max_depth {
                    for &learning_rate in &self.learning_rate {
                        out.push(TrainConfig { n_estimators, tree_algorithm, max_depth, learning_rate, ..base.clone() });
                    }
                }
            }
        }
        out
    }
}

/// The full 240-combination search grid.
pub fn default_grid() -> Vec<TrainConfig> {
    GridAxes::default().product(&TrainConfig::default())
}

/// The reference configuration evaluated before any search.
pub fn baseline_config() -> TrainConfig {
    TrainConfig::default()
}

/// Feature rows with aligned labels, independent of column count.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledRows {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Digit>,
}

impl LabeledRows {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<Digit>) -> Self {
        LabeledRows { rows, labels }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|d| d.target()).collect()
    }

    pub fn select(&self, indices: &[usize]) -> LabeledRows {
        LabeledRows {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

impl From<&FeatureMatrix> for LabeledRows {
    fn from(m: &FeatureMatrix) -> Self {
        LabeledRows { rows: m.row_vecs(), labels: m.labels.clone() }
    }
}

/// Scores of one grid combination.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    pub index: usize,
    pub config: TrainConfig,
    pub fold_aurocs: Vec<f64>,
    pub mean_cv_auroc: f64,
    pub val_auroc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// In grid order.
    pub entries: Vec<GridEntry>,
    /// Index of the first entry with maximal validation AUROC.
    pub best: usize,
}

impl GridResult {
    pub fn best_entry(&self) -> &GridEntry {
        &self.entries[self.best]
    }

    pub fn best_config(&self) -> &TrainConfig {
        &self.entries[self.best].config
    }

    /// One CSV row per combination.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), SelectError> {
        let k = self.entries.first().map_or(0, |e| e.fold_aurocs.len());
        let folds: Vec<String> = (0..k).map(|i| format!("fold{i}_auroc")).collect();
        writeln!(
            w,
            "index,n_estimators,tree_algorithm,max_depth,learning_rate,seed,{}{}mean_cv_auroc,val_auroc,best",
            folds.join(","),
            if k > 0 { "," } else { "" }
        )?;
        for e in &self.entries {
            let c = &e.config;
            let fold_cols: String = e.fold_aurocs.iter().map(|a| format!("{},", sig17(*a))).collect();
            writeln!(
                w,
                "{},{},{},{},{},{},{}{},{},{}",
                e.index,
                c.n_estimators,
                c.tree_algorithm,
                c.max_depth,
                sig17(c.learning_rate),
                c.seed,
                fold_cols,
                sig17(e.mean_cv_auroc),
                sig17(e.val_auroc),
                u8::from(e.index == self.best)
            )?;
        }
        Ok(())
    }
}

/// Per-combination seed, independent of evaluation order.
pub fn combination_seed(seed: u64, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((index as u64).to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("digest is 32 bytes"))
}

/// Index of the winning score: the first maximum. NaN never wins.
pub fn best_index(scores: &[f64]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in scores.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Configs that differ only in `n_estimators` share one fit of the largest size.
fn group_key(c: &TrainConfig) -> String {
    format!(
        "{}|{}|{}|{}|{}|{}",
        c.tree_algorithm,
        c.max_depth,
        c.learning_rate.to_bits(),
        c.lambda.to_bits(),
        c.n_bins,
        c.min_child_weight.to_bits()
    )
}

/// Evaluates every config by `k`-fold CV on `train` and by a full-train fit
/// scored on `val`. Fold assignment depends only on `seed`.
pub fn grid_search(train: &LabeledRows, val: &LabeledRows, grid: &[TrainConfig], k: usize, seed: u64) -> Result<GridResult, SelectError> {
    if grid.is_empty() {
        return Err(SelectError::EmptyGrid);
    }
    require_both_classes(&train.labels)?;
    require_both_classes(&val.labels)?;
    for (index, c) in grid.iter().enumerate() {
        c.validate().map_err(|source| SelectError::Fit { index, config: c.clone(), source })?;
    }
    let folds = kfold(train.len(), k, seed)?;
    let fold_data: Vec<(LabeledRows, LabeledRows)> = folds.iter().map(|f| (train.select(&f.train), train.select(&f.held_out))).collect();

    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, c) in grid.iter().enumerate() {
        groups.entry(group_key(c)).or_default().push(i);
    }
    // Task = (group members, data slot); slot k is the full-train fit.
    let tasks: Vec<(&Vec<usize>, usize)> = groups.values().flat_map(|m| (0..=k).map(move |s| (m, s))).collect();
    let scored: Vec<Vec<(usize, usize, f64)>> = tasks
        .par_iter()
        .map(|&(members, slot)| {
            let (fit_on, score_on) = if slot < k { (&fold_data[slot].0, &fold_data[slot].1) } else { (train, val) };
            let lead = *members.iter().max_by_key(|&&i| grid[i].n_estimators).expect("groups are nonempty");
            let big = fit(&fit_on.rows, &fit_on.targets(), &grid[lead]).map_err(|source| SelectError::Fit {
                index: lead,
                config: grid[lead].clone(),
                source,
            })?;
            members
                .iter()
                .map(|&i| {
                    let model = big.truncated(grid[i].n_estimators);
                    let probs = model.predict_proba_batch(&score_on.rows)?;
                    let a = auroc(&probs, &score_on.labels).map_err(|source| SelectError::Score {
                        index: i,
                        config: grid[i].clone(),
                        source,
                    })?;
                    Ok((i, slot, a))
                })
                .collect::<Result<Vec<_>, SelectError>>()
        })
        .collect::<Result<_, _>>()?;

    let mut entries: Vec<GridEntry> = grid
        .iter()
        .enumerate()
        .map(|(index, c)| GridEntry {
            index,
            config: TrainConfig { seed: combination_seed(seed, index), ..c.clone() },
            fold_aurocs: vec![f64::NAN; k],
            mean_cv_auroc: f64::NAN,
            val_auroc: f64::NAN,
        })
        .collect();
    for (i, slot, a) in scored.into_iter().flatten() {
        if slot < k {
            entries[i].fold_aurocs[slot] = a;
        } else {
            entries[i].val_auroc = a;
        }
    }
    for e in &mut entries {
        e.mean_cv_auroc = e.fold_aurocs.iter().sum::<f64>() / k as f64;
    }
    let best = best_index(&entries.iter().map(|e| e.val_auroc).collect::<Vec<_>>());
    Ok(GridResult { entries, best })
}

/// Validation AUROC of a single fit on `train`.
pub fn holdout_auroc(train: &LabeledRows, val: &LabeledRows, config: &TrainConfig) -> Result<f64, SelectError> {
    let model = fit(&train.rows, &train.targets(), config)?;
    Ok(auroc(&model.predict_proba_batch(&val.rows)?, &val.labels)?)
}

/// Fits the deployment model on every sample.
pub fn retrain_final(all: &LabeledRows, config: &TrainConfig) -> Result<GbdtModel, SelectError> {
    Ok(fit(&all.rows, &all.targets(), config)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_split_sizes() {
        assert_eq!(SplitSpec::default().sizes(400), (240, 80, 80));
        let s = SplitSpec { train: 0.5, val: 0.25, test: 0.25, seed: 3 };
        assert_eq!(s.sizes(8), (4, 2, 2));
        let idx = split_indices(8, &s).unwrap();
        let mut all: Vec<usize> = idx.train.iter().chain(&idx.val).chain(&idx.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn bad_split_specs() {
        assert!(SplitSpec { train: 0.6, val: 0.3, test: 0.2, seed: 0 }.validate().is_err());
        assert!(SplitSpec { train: 0.0, val: 0.5, test: 0.5, seed: 0 }.validate().is_err());
        assert!(matches!(split_indices(0, &SplitSpec::default()), Err(SelectError::Empty)));
    }

    #[test]
    fn fold_sizes_balance_the_remainder() {
        let f = kfold(7, 5, 1).unwrap();
        assert_eq!(f.iter().map(|f| f.held_out.len()).collect::<Vec<_>>(), vec![2, 2, 1, 1, 1]);
        assert!(f.iter().all(|f| f.train.len() + f.held_out.len() == 7));
        assert_eq!(kfold(7, 5, 1).unwrap(), f);
        assert!(matches!(kfold(3, 5, 0), Err(SelectError::Folds { .. })));
        assert!(kfold(3, 1, 0).is_err());
    }

    #[test]
    fn grid_layout() {
        let g = default_grid();
        assert_eq!(g.len(), 240);
        let first = &g[0];
        assert_eq!((first.n_estimators, first.tree_algorithm, first.max_depth, first.learning_rate), (1000, TreeAlgorithm::Hist, 1, 0.1));
        assert_eq!(g[1].learning_rate, 0.3);
        assert_eq!(g[3].max_depth, 2);
        assert_eq!(g[24].tree_algorithm, TreeAlgorithm::Exact);
        assert_eq!(g[48].n_estimators, 2000);
    }

    #[test]
    fn first_maximum_wins() {
        assert_eq!(best_index(&[0.5, 0.9, 0.9, 0.1]), 1);
        assert_eq!(best_index(&[f64::NAN, 0.2]), 1);
    }

    fn toy(n: usize, shift: f64) -> LabeledRows {
        let rows = (0..n).map(|i| vec![((i * 37) % 11) as f64 + shift * (i % 2) as f64, ((i * 13) % 7) as f64]).collect();
        let labels = (0..n).map(|i| if i % 2 == 1 { Digit::One } else { Digit::Zero }).collect();
        LabeledRows::new(rows, labels)
    }

    #[test]
    fn prefix_sharing_matches_independent_fits() {
        let (train, val) = (toy(40, 2.0), toy(20, 2.0));
        let axes =
            GridAxes { n_estimators: vec![3, 7], tree_algorithm: vec![TreeAlgorithm::Exact], max_depth: vec![2], learning_rate: vec![0.3] };
        let grid = axes.product(&TrainConfig::default());
        let r = grid_search(&train, &val, &grid, 4, 9).unwrap();
        for e in &r.entries {
            assert_eq!(e.val_auroc, holdout_auroc(&train, &val, &grid[e.index]).unwrap());
            assert!(e.fold_aurocs.iter().all(|a| (0.0..=1.0).contains(a)));
        }
        assert_eq!(r, grid_search(&train, &val, &grid, 4, 9).unwrap());
    }

    #[test]
    fn single_config_grid() {
        let grid = vec![TrainConfig { n_estimators: 5, ..Default::default() }];
        let r = grid_search(&toy(30, 1.0), &toy(10, 1.0), &grid, 3, 0).unwrap();
        assert_eq!(r.best, 0);
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("index,n_estimators,tree_algorithm,max_depth,learning_rate,seed,fold0_auroc,"));
        assert!(matches!(grid_search(&toy(30, 1.0), &toy(10, 1.0), &[], 3, 0), Err(SelectError::EmptyGrid)));
    }

    #[test]
    fn fit_errors_name_the_config() {
        let grid = vec![TrainConfig { max_depth: 0, ..Default::default() }];
        let err = grid_search(&toy(30, 1.0), &toy(10, 1.0), &grid, 3, 0).unwrap_err();
        assert!(matches!(err, SelectError::Fit { index: 0, .. }), "{err}");
    }
}
