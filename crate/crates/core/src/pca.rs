//! Principal component analysis on z-scored columns via cyclic Jacobi.

use thiserror::Error;

/// Off-diagonal magnitude below which Jacobi iteration stops.
pub const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum PcaError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("row {row} has {found} columns, expected {expected}")]
    Dimension { row: usize, expected: usize, found: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("requested {requested} components but the model has {available}")]
    TooManyComponents { requested: usize, available: usize },
}

/// Fitted normalization and principal axes.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Row `i` is the unit-norm axis of the `i`-th largest eigenvalue.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Columns whose variance was zero; their std was replaced by 1.
    pub degenerate_columns: Vec<usize>,
}

impl PcaModel {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Keeps only the leading `k` components.
    pub fn truncated(&self, k: usize) -> Result<PcaModel, PcaError> {
        if k > self.n_components() {
            return Err(PcaError::TooManyComponents { requested: k, available: self.n_components() });
        }
        Ok(PcaModel {
            components: self.components[..k].to_vec(),
            eigenvalues: self.eigenvalues[..k].to_vec(),
            explained_variance_ratio: self.explained_variance_ratio[..k].to_vec(),
            ..self.clone()
        })
    }

    /// Human-readable warnings attached at fit time.
    pub fn warnings(&self, names: &[&str]) -> Vec<String> {
        self.degenerate_columns
            .iter()
            .map(|&j| {
                let name = names.get(j).copied().unwrap_or("?");
                format!("column {j} ({name}) has zero variance; std set to 1")
            })
            .collect()
    }

    /// Projects rows onto the components: `((rows - means) / stds) · componentsᵀ`.
    pub fn transform<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<Vec<Vec<f64>>, PcaError> {
        let p = self.n_features();
        rows.iter()
            .enumerate()
            .map(|(i, r)| {
                let r = r.as_ref();
                if r.len() != p {
                    return Err(PcaError::Dimension { row: i, expected: p, found: r.len() });
                }
                let z: Vec<f64> = (0..p).map(|j| (r[j] - self.means[j]) / self.stds[j]).collect();
                Ok(self.components.iter().map(|c| dot(c, &z)).collect())
            })
            .collect()
    }

    /// Maps projections back to standardized feature space.
    pub fn inverse_transform(&self, projected: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let p = self.n_features();
        projected
            .iter()
            .map(|y| {
                let mut z = vec![0.0; p];
                for (c, &w) in self.components.iter().zip(y) {
                    for (zj, cj) in z.iter_mut().zip(c) {
                        *zj += w * cj;
                    }
                }
                z
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits all `p` components of the standardized covariance (sample, n−1).
pub fn fit_pca<R: AsRef<[f64]>>(rows: &[R]) -> Result<PcaModel, PcaError> {
    let n = rows.len();
    if n < 2 {
        return Err(PcaError::TooFewRows(n));
    }
    let p = rows[0].as_ref().len();
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != p {
            return Err(PcaError::Dimension { row: i, expected: p, found: r.len() });
        }
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(PcaError::NonFinite { row: i, col });
        }
    }

    let nf = n as f64;
    let mut means = vec![0.0; p];
    for r in rows {
        for (m, v) in means.iter_mut().zip(r.as_ref()) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= nf);

    let mut stds = vec![0.0; p];
    for r in rows {
        for ((s, v), m) in stds.iter_mut().zip(r.as_ref()).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    let mut degenerate_columns = Vec::new();
    for (j, s) in stds.iter_mut().enumerate() {
        *s = (*s / (nf - 1.0)).sqrt();
        if *s == 0.0 {
            *s = 1.0;
            degenerate_columns.push(j);
        }
    }

    let z: Vec<Vec<f64>> = rows.iter().map(|r| r.as_ref().iter().zip(&means).zip(&stds).map(|((v, m), s)| (v - m) / s).collect()).collect();
    let mut cov = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in a..p {
            let c = z.iter().map(|r| r[a] * r[b]).sum::<f64>() / (nf - 1.0);
            cov[a][b] = c;
            cov[b][a] = c;
        }
    }

    let (values, vectors) = jacobi_eigen(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i].max(0.0)).collect();
    let components: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| {
            let mut c: Vec<f64> = (0..p).map(|r| vectors[r][i]).collect();
            let lead = argmax_abs(&c);
            if c[lead] < 0.0 {
                c.iter_mut().for_each(|x| *x = -*x);
            }
            c
        })
        .collect();
    let total: f64 = eigenvalues.iter().sum();
    let explained_variance_ratio = eigenvalues.iter().map(|&l| if total > 0.0 { l / total } else { 0.0 }).collect();

    Ok(PcaModel { means, stds, components, eigenvalues, explained_variance_ratio, degenerate_columns })
}

/// Relative slack under which two magnitudes count as tied. Without it, symmetric
/// axes such as `(1, 1)/√2` pick their sign from rounding noise.
const TIE_RTOL: f64 = 1e-9;

/// Index of the largest `|x|`; the first wins ties.
fn argmax_abs(xs: &[f64]) -> usize {
    let max = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    xs.iter().position(|x| x.abs() >= max * (1.0 - TIE_RTOL)).unwrap_or(0)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues and a matrix whose columns are the eigenvectors.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..MAX_SWEEPS {
        let off = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j].abs()).fold(0.0, f64::max);
        if off < JACOBI_TOL {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (head, tail) = a.split_at_mut(q);
                for (apk, aqk) in head[p].iter_mut().zip(tail[0].iter_mut()) {
                    (*apk, *aqk) = (c * *apk - s * *aqk, s * *apk + c * *aqk);
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Feature with the largest absolute loading on one component.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadingEntry {
    pub component: usize,
    pub feature: String,
    pub feature_index: usize,
    pub loading: f64,
}

/// Dominant feature per leading component; ties go to the earlier feature.
pub fn loading_report(model: &PcaModel, k: usize, names: &[&str]) -> Result<Vec<LoadingEntry>, PcaError> {
    if k > model.n_components() {
        return Err(PcaError::TooManyComponents { requested: k, available: model.n_components() });
    }
    Ok(model.components[..k]
        .iter()
        .enumerate()
        .map(|(component, c)| {
            let j = argmax_abs(c);
            LoadingEntry {
                component,
                feature: names.get(j).map_or_else(|| format!("f{j}"), |s| s.to_string()),
                feature_index: j,
                loading: c[j],
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_data() {
        let rows: Vec<[f64; 2]> = (0..20).map(|i| [i as f64, 3.0 * i as f64 - 1.0]).collect();
        let m = fit_pca(&rows).unwrap();
        assert!((m.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        assert!(m.explained_variance_ratio[1].abs() < 1e-12);
    }

    #[test]
    fn mean_row_projects_to_zero() {
        let rows: Vec<[f64; 3]> = (0..10).map(|i| [i as f64, (i * i) as f64, (i % 3) as f64]).collect();
        let m = fit_pca(&rows).unwrap();
        let proj = m.transform(std::slice::from_ref(&m.means)).unwrap();
        assert!(proj[0].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn zero_variance_column_warns() {
        let rows: Vec<[f64; 2]> = (0..5).map(|i| [i as f64, 7.0]).collect();
        let m = fit_pca(&rows).unwrap();
        assert_eq!(m.degenerate_columns, vec![1]);
        assert_eq!(m.stds[1], 1.0);
        assert_eq!(m.warnings(&["a", "b"]).len(), 1);
    }

    #[test]
    fn too_few_rows() {
        assert_eq!(fit_pca(&[[1.0, 2.0]]), Err(PcaError::TooFewRows(1)));
    }

    #[test]
    fn sign_convention_and_ties() {
        let rows: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, -(i as f64)]).collect();
        let m = fit_pca(&rows).unwrap();
        let c = &m.components[0];
        assert!((c[0].abs() - c[1].abs()).abs() < 1e-12);
        let rep = loading_report(&m, 1, &["a", "b"]).unwrap();
        assert_eq!(rep[0].feature, "a");
        assert!(rep[0].loading > 0.0);
        assert!(loading_report(&m, 0, &["a", "b"]).unwrap().is_empty());
    }
}
