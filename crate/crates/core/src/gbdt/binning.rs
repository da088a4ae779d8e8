//! Global cut points and bin indices shared by both split strategies.

/// Bin layout of a matrix: `edges[f]` are the thresholds of feature `f`
/// (bin `j` holds values `< edges[f][j]` and `>= edges[f][j-1]`), and
/// `index[f][i]` is the bin of sample `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bins {
    pub edges: Vec<Vec<f64>>,
    pub index: Vec<Vec<u32>>,
}

impl Bins {
    pub fn n_bins(&self, feature: usize) -> usize {
        self.edges[feature].len() + 1
    }
}

/// Threshold strictly above `a` and at most `b`, for `a < b`.
pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let m = a / 2.0 + b / 2.0;
    if m > a && m <= b {
        m
    } else {
        b
    }
}

/// Sorted distinct values with multiplicities.
fn distinct_counts(column: &[f64]) -> Vec<(f64, usize)> {
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize)> = Vec::new();
    for v in sorted {
        match out.last_mut() {
            Some((u, c)) if *u == v => *c += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

/// Cut between every pair of consecutive distinct values.
pub(crate) fn exact_edges(column: &[f64]) -> Vec<f64> {
    distinct_counts(column).windows(2).map(|w| midpoint(w[0].0, w[1].0)).collect()
}

/// Quantile cuts yielding at most `n_bins` bins; exact cuts when the column
/// has no more than `n_bins` distinct values.
pub(crate) fn quantile_edges(column: &[f64], n_bins: usize) -> Vec<f64> {
    let counts = distinct_counts(column);
    let n_bins = n_bins.max(1);
    if counts.len() <= n_bins {
        return counts.windows(2).map(|w| midpoint(w[0].0, w[1].0)).collect();
    }
    let n = column.len() as f64;
    let mut edges = Vec::with_capacity(n_bins - 1);
    let mut cum = 0usize;
    let mut next_quantile = 1usize;
    for w in counts.windows(2) {
        cum += w[0].1;
        if next_quantile >= n_bins {
            break;
        }
        let target = next_quantile as f64 * n / n_bins as f64;
        if cum as f64 >= target {
            edges.push(midpoint(w[0].0, w[1].0));
            // Skip quantiles already covered by this heavy value.
            while next_quantile < n_bins && cum as f64 >= next_quantile as f64 * n / n_bins as f64 {
                next_quantile += 1;
            }
        }
    }
    edges
}

/// Bin of `x` given ascending `edges`.
pub(crate) fn bin_of(edges: &[f64], x: f64) -> u32 {
    edges.partition_point(|&e| e <= x) as u32
}

pub(crate) fn bin_with<R: AsRef<[f64]>>(rows: &[R], edges_of: impl Fn(&[f64]) -> Vec<f64>) -> Bins {
    let p = rows.first().map_or(0, |r| r.as_ref().len());
    let mut edges = Vec::with_capacity(p);
    let mut index = Vec::with_capacity(p);
    for f in 0..p {
        let column: Vec<f64> = rows.iter().map(|r| r.as_ref()[f]).collect();
        let e = edges_of(&column);
        index.push(column.iter().map(|&x| bin_of(&e, x)).collect());
        edges.push(e);
    }
    Bins { edges, index }
}

/// Quantile binning with at most `n_bins` bins per feature.
pub fn bin_features<R: AsRef<[f64]>>(rows: &[R], n_bins: usize) -> Bins {
    bin_with(rows, |c| quantile_edges(c, n_bins))
}
