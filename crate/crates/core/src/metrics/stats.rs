//! Omnibus and pairwise significance tests over a datasets × algorithms table.
//!
//! The pipeline is the usual one behind a critical-difference diagram: a
//! Friedman test on within-dataset ranks, then two-sided Wilcoxon signed-rank
//! tests for every pair of algorithms with a Holm step-down correction.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest number of non-zero differences for which the Wilcoxon null
/// distribution is enumerated exactly.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

/// Cap on the number of rank-sum states tracked by the exact Friedman test.
const FRIEDMAN_EXACT_MAX_STATES: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    ChiSquare,
    Normal,
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
/// With `descending = true` the largest value gets rank 1.
pub fn average_ranks(values: &[f64], descending: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        let c = values[i].total_cmp(&values[j]);
        if descending {
            c.reverse()
        } else {
            c
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn check_matrix(matrix: &[Vec<f64>]) -> Result<(usize, usize)> {
    let n = matrix.len();
    let k = matrix.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(Error::Config(format!(
            "need at least 2 datasets and 2 algorithms, got {n} x {k}"
        )));
    }
    if matrix.iter().any(|r| r.len() != k) {
        return Err(Error::Schema("ragged result matrix".into()));
    }
    if matrix.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::Domain("result matrix contains NaN".into()));
    }
    Ok((n, k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: PValueMethod,
    pub n_datasets: usize,
    pub n_algorithms: usize,
    /// Rank 1 is the best (highest) value in a row.
    pub mean_ranks: Vec<f64>,
}

/// Tie-corrected Friedman statistic from per-row rank vectors.
fn friedman_statistic(rank_sums: &[f64], n: usize, k: usize, tie_correction: f64) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    let ss: f64 = rank_sums.iter().map(|r| r * r).sum();
    let raw = 12.0 / (nf * kf * (kf + 1.0)) * ss - 3.0 * nf * (kf + 1.0);
    if tie_correction <= 0.0 {
        0.0
    } else {
        (raw / tie_correction).max(0.0)
    }
}

/// Friedman test on a `datasets × algorithms` table (higher is better).
///
/// The p-value is exact (enumerated over within-row rank permutations) while
/// the number of reachable rank-sum states stays small, and the chi-square
/// approximation with `k − 1` degrees of freedom otherwise.
pub fn friedman_test(matrix: &[Vec<f64>]) -> Result<FriedmanResult> {
    let (n, k) = check_matrix(matrix)?;
    let ranks: Vec<Vec<f64>> = matrix.iter().map(|r| average_ranks(r, true)).collect();
    let mut sums = vec![0.0; k];
    for r in &ranks {
        for (s, v) in sums.iter_mut().zip(r) {
            *s += v;
        }
    }
    let ties: f64 = ranks.iter().map(|r| tie_term(r)).sum();
    let correction = 1.0 - ties / (n as f64 * k as f64 * ((k * k) as f64 - 1.0));
    let statistic = friedman_statistic(&sums, n, k, correction);
    let mean_ranks = sums.iter().map(|s| s / n as f64).collect();

    if correction <= 0.0 {
        return Ok(FriedmanResult {
            statistic: 0.0,
            p_value: 1.0,
            method: PValueMethod::Exact,
            n_datasets: n,
            n_algorithms: k,
            mean_ranks,
        });
    }
    let (p_value, method) = match friedman_exact_p(&ranks, statistic, correction) {
        Some(p) => (p, PValueMethod::Exact),
        None => {
            let chi = ChiSquared::new((k - 1) as f64).expect("positive dof");
            (chi.sf(statistic), PValueMethod::ChiSquare)
        }
    };
    Ok(FriedmanResult {
        statistic,
        p_value,
        method,
        n_datasets: n,
        n_algorithms: k,
        mean_ranks,
    })
}

/// `Σ (t³ − t)` over tie groups of one rank vector.
fn tie_term(ranks: &[f64]) -> f64 {
    let mut counts: HashMap<i64, usize> = HashMap::new();
    for &r in ranks {
        *counts.entry((r * 2.0).round() as i64).or_default() += 1;
    }
    counts.values().map(|&t| (t * t * t - t) as f64).sum()
}

fn distinct_permutations(items: &[i64]) -> Vec<Vec<i64>> {
    let mut v = items.to_vec();
    v.sort_unstable();
    let mut out = vec![v.clone()];
    // next_permutation over the sorted multiset
    while let Some(i) = (0..v.len().saturating_sub(1))
        .rev()
        .find(|&i| v[i] < v[i + 1])
    {
        let j = (i + 1..v.len())
            .rev()
            .find(|&j| v[j] > v[i])
            .expect("exists");
        v.swap(i, j);
        v[i + 1..].reverse();
        out.push(v.clone());
    }
    out
}

/// Exact upper-tail probability of the Friedman statistic under the null that
/// every row's ranks are a uniformly random arrangement of that row's ranks.
fn friedman_exact_p(ranks: &[Vec<f64>], observed: f64, correction: f64) -> Option<f64> {
    let n = ranks.len();
    let k = ranks[0].len();
    if k > 6 {
        return None;
    }
    let mut states: HashMap<Vec<i64>, f64> = HashMap::from([(vec![0; k], 1.0)]);
    for row in ranks {
        let doubled: Vec<i64> = row.iter().map(|r| (r * 2.0).round() as i64).collect();
        let perms = distinct_permutations(&doubled);
        if states.len() * perms.len() > FRIEDMAN_EXACT_MAX_STATES * 20 {
            return None;
        }
        let w = 1.0 / perms.len() as f64;
        let mut next: HashMap<Vec<i64>, f64> = HashMap::with_capacity(states.len() * 2);
        for (state, p) in &states {
            for perm in &perms {
                let key: Vec<i64> = state.iter().zip(perm).map(|(a, b)| a + b).collect();
                *next.entry(key).or_default() += p * w;
            }
        }
        if next.len() > FRIEDMAN_EXACT_MAX_STATES {
            return None;
        }
        states = next;
    }
    let tol = 1e-9 * observed.abs().max(1.0);
    let p: f64 = states
        .iter()
        .filter(|(sums, _)| {
            let s: Vec<f64> = sums.iter().map(|&v| v as f64 / 2.0).collect();
            friedman_statistic(&s, n, k, correction) >= observed - tol
        })
        .map(|(_, p)| p)
        .sum();
    Some(p.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroHandling {
    /// Discard zero differences before ranking.
    #[default]
    Drop,
    /// Rank zeros with the rest, then drop them from the signed sums.
    Pratt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// First sample tends to be larger.
    Greater,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WilcoxonOptions {
    pub zero_handling: ZeroHandling,
    pub alternative: Alternative,
}

impl Default for WilcoxonOptions {
    fn default() -> Self {
        Self {
            zero_handling: ZeroHandling::Drop,
            alternative: Alternative::TwoSided,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Number of non-zero differences.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `None` when fewer than five differences are non-zero.
    pub p_value: Option<f64>,
    pub method: Option<PValueMethod>,
}

impl WilcoxonResult {
    pub fn insufficient_data(&self) -> bool {
        self.p_value.is_none()
    }
}

/// Wilcoxon signed-rank test of the paired differences `x − y`.
pub fn wilcoxon_signed_rank(
    x: &[f64],
    y: &[f64],
    options: WilcoxonOptions,
) -> Result<WilcoxonResult> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            found: y.len(),
        });
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    if diffs.iter().any(|d| d.is_nan()) {
        return Err(Error::Domain("paired samples contain NaN".into()));
    }
    let (signed_ranks, n) = match options.zero_handling {
        ZeroHandling::Drop => {
            let nz: Vec<f64> = diffs.into_iter().filter(|&d| d != 0.0).collect();
            let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
            let ranks = average_ranks(&abs, false);
            let n = nz.len();
            (
                nz.iter()
                    .zip(ranks)
                    .map(|(d, r)| (d.signum(), r))
                    .collect::<Vec<_>>(),
                n,
            )
        }
        ZeroHandling::Pratt => {
            let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
            let ranks = average_ranks(&abs, false);
            let kept: Vec<_> = diffs
                .iter()
                .zip(ranks)
                .filter(|(d, _)| **d != 0.0)
                .map(|(d, r)| (d.signum(), r))
                .collect();
            let n = kept.len();
            (kept, n)
        }
    };
    let w_plus: f64 = signed_ranks
        .iter()
        .filter(|(s, _)| *s > 0.0)
        .map(|(_, r)| r)
        .sum();
    let w_minus: f64 = signed_ranks
        .iter()
        .filter(|(s, _)| *s < 0.0)
        .map(|(_, r)| r)
        .sum();
    if n < 5 {
        return Ok(WilcoxonResult {
            n,
            w_plus,
            w_minus,
            p_value: None,
            method: None,
        });
    }
    let ranks: Vec<f64> = signed_ranks.iter().map(|(_, r)| *r).collect();
    let (p, method) = if n <= WILCOXON_EXACT_MAX_N {
        (
            wilcoxon_exact_p(&ranks, w_plus, options.alternative),
            PValueMethod::Exact,
        )
    } else {
        (
            wilcoxon_normal_p(&ranks, w_plus, options.alternative),
            PValueMethod::Normal,
        )
    };
    Ok(WilcoxonResult {
        n,
        w_plus,
        w_minus,
        p_value: Some(p),
        method: Some(method),
    })
}

/// Exact null distribution of `W+` over all `2^n` sign assignments, computed
/// by dynamic programming on doubled (integer) ranks.
fn wilcoxon_exact_p(ranks: &[f64], w_plus: f64, alternative: Alternative) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let all = 2f64.powi(ranks.len() as i32);
    let w = (w_plus * 2.0).round() as usize;
    let lower: f64 = counts[..=w].iter().sum::<f64>() / all;
    let upper: f64 = counts[w..].iter().sum::<f64>() / all;
    match alternative {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * lower.min(upper)).min(1.0),
    }
}

/// Normal approximation with continuity correction; the variance `Σ r²/4`
/// accounts for ties exactly.
fn wilcoxon_normal_p(ranks: &[f64], w_plus: f64, alternative: Alternative) -> f64 {
    let mean = ranks.iter().sum::<f64>() / 2.0;
    let sd = (ranks.iter().map(|r| r * r).sum::<f64>() / 4.0).sqrt();
    let std_normal = Normal::standard();
    let d = w_plus - mean;
    match alternative {
        Alternative::Greater => std_normal.sf((d - 0.5) / sd),
        Alternative::Less => std_normal.cdf((d + 0.5) / sd),
        Alternative::TwoSided => {
            let z = ((d.abs() - 0.5).max(0.0)) / sd;
            (2.0 * std_normal.sf(z)).min(1.0)
        }
    }
}

/// Holm step-down adjustment. The i-th smallest raw p-value is multiplied by
/// `m − i + 1`; a running maximum keeps the adjusted values monotone.
pub fn holm_adjust(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (i, &idx) in order.iter().enumerate() {
        let v = ((m - i) as f64 * p_values[idx]).min(1.0);
        running = running.max(v);
        adjusted[idx] = running;
    }
    adjusted
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub first: String,
    pub second: String,
    pub n_nonzero: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_raw: Option<f64>,
    pub p_holm: Option<f64>,
    pub significant: bool,
    pub insufficient_data: bool,
}

/// Everything behind a critical-difference diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub algorithms: Vec<String>,
    pub n_datasets: usize,
    pub alpha: f64,
    pub mean_ranks: Vec<f64>,
    pub mean_scores: Vec<f64>,
    pub friedman: FriedmanResult,
    pub pairs: Vec<PairwiseComparison>,
    /// `raw_p[i][j]` for algorithms `i` and `j`; `None` on the diagonal or when
    /// the pair had too few non-zero differences.
    pub raw_p: Vec<Vec<Option<f64>>>,
    pub adjusted_p: Vec<Vec<Option<f64>>>,
}

/// Friedman test plus Holm-corrected pairwise Wilcoxon tests.
pub fn wilcoxon_holm(
    matrix: &[Vec<f64>],
    algorithms: &[String],
    alpha: f64,
    options: WilcoxonOptions,
) -> Result<SignificanceReport> {
    let (n, k) = check_matrix(matrix)?;
    if algorithms.len() != k {
        return Err(Error::Dimension {
            expected: k,
            found: algorithms.len(),
        });
    }
    let friedman = friedman_test(matrix)?;
    let column = |j: usize| -> Vec<f64> { matrix.iter().map(|r| r[j]).collect() };
    let mut pairs = Vec::new();
    let mut index = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let res = wilcoxon_signed_rank(&column(a), &column(b), options)?;
            index.push((a, b));
            pairs.push(PairwiseComparison {
                first: algorithms[a].clone(),
                second: algorithms[b].clone(),
                n_nonzero: res.n,
                w_plus: res.w_plus,
                w_minus: res.w_minus,
                p_raw: res.p_value,
                p_holm: None,
                significant: false,
                insufficient_data: res.insufficient_data(),
            });
        }
    }
    let tested: Vec<usize> = (0..pairs.len())
        .filter(|&i| pairs[i].p_raw.is_some())
        .collect();
    let raw: Vec<f64> = tested
        .iter()
        .map(|&i| pairs[i].p_raw.expect("tested"))
        .collect();
    for (&i, adj) in tested.iter().zip(holm_adjust(&raw)) {
        pairs[i].p_holm = Some(adj);
        pairs[i].significant = adj < alpha;
    }
    let mut raw_p = vec![vec![None; k]; k];
    let mut adjusted_p = vec![vec![None; k]; k];
    for (&(a, b), pair) in index.iter().zip(&pairs) {
        raw_p[a][b] = pair.p_raw;
        raw_p[b][a] = pair.p_raw;
        adjusted_p[a][b] = pair.p_holm;
        adjusted_p[b][a] = pair.p_holm;
    }
    let mean_scores = (0..k)
        .map(|j| column(j).iter().sum::<f64>() / n as f64)
        .collect();
    Ok(SignificanceReport {
        algorithms: algorithms.to_vec(),
        n_datasets: n,
        alpha,
        mean_ranks: friedman.mean_ranks.clone(),
        mean_scores,
        friedman,
        pairs,
        raw_p,
        adjusted_p,
    })
}
