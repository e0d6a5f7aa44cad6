//! Per-realization statistics and direct counters.

use serde::{Deserialize, Serialize};

use crate::codec::for_each_injection;
use crate::fields::{order_isomorphic, Gaps};
use crate::graph::SimpleGraph;
use crate::neighborhood::NeighborhoodSystem;
use crate::sum::pairwise_sum;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatisticValue {
    pub s: f64,
    pub w1: Option<f64>,
    pub v: f64,
    /// `None` when `V = 0` (rejected).
    pub w2: Option<f64>,
    pub vbar: f64,
    pub w2bar: f64,
}

pub fn sum_and_w1(values: &[f64], sigma: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let s = pairwise_sum(values);
    Ok((s, s / sigma))
}

/// `Y_i = Σ_{j ∈ A_i} X_j`.
pub fn local_sums(values: &[f64], sys: &NeighborhoodSystem) -> Vec<f64> {
    (0..sys.n()).map(|i| sys.a(i).iter().map(|&j| values[j]).sum()).collect()
}

fn sum_xy(values: &[f64], y: &[f64]) -> f64 {
    let prods: Vec<f64> = values.iter().zip(y).map(|(x, y)| x * y).collect();
    pairwise_sum(&prods)
}

/// `V = ((Σ X_i Y_i − n X̄ Ȳ)_+)^{1/2}` and `W₂ = S/V` (rejected when `V = 0`).
pub fn self_normalized_w2(values: &[f64], sys: &NeighborhoodSystem) -> (f64, Option<f64>) {
    let y = local_sums(values, sys);
    let n = values.len() as f64;
    let s = pairwise_sum(values);
    let sy = pairwise_sum(&y);
    let v2 = sum_xy(values, &y) - (s / n) * (sy / n) * n;
    let v = v2.max(0.0).sqrt();
    (v, (v > 0.0).then(|| s / v))
}

/// `ψ(x) = ((x ∨ σ²/4) ∧ 2σ²)^{1/2}`.
pub fn psi_clamp(x: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    x.max(0.25 * s2).min(2.0 * s2).sqrt()
}

/// `V̄ = ψ(Σ X_i Y_i)` and `W̄₂ = S / V̄`.
pub fn clamped_w2bar(values: &[f64], sys: &NeighborhoodSystem, sigma: f64) -> (f64, f64) {
    let y = local_sums(values, sys);
    let vbar = psi_clamp(sum_xy(values, &y), sigma);
    (vbar, pairwise_sum(values) / vbar)
}

/// Which normalized statistic an experiment reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    W1,
    W2,
    W2bar,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::W1 => "w1",
            Statistic::W2 => "w2",
            Statistic::W2bar => "w2bar",
        }
    }

    /// Value at a realization; `None` when `W₂` is rejected (`V = 0`).
    pub fn evaluate(self, values: &[f64], sys: &NeighborhoodSystem, sigma: f64) -> Option<f64> {
        match self {
            Statistic::W1 => Some(pairwise_sum(values) / sigma),
            Statistic::W2 => self_normalized_w2(values, sys).1,
            Statistic::W2bar => Some(clamped_w2bar(values, sys, sigma).1),
        }
    }

    /// Whether the statistic needs a positive `σ`.
    pub fn needs_sigma(self) -> bool {
        !matches!(self, Statistic::W2)
    }
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w1" => Ok(Statistic::W1),
            "w2" => Ok(Statistic::W2),
            "w2bar" => Ok(Statistic::W2bar),
            other => Err(Error::InvalidArgument(format!("unknown statistic {other:?}"))),
        }
    }
}

pub fn all_statistics(values: &[f64], sys: &NeighborhoodSystem, sigma: f64) -> StatisticValue {
    let s = pairwise_sum(values);
    let (v, w2) = self_normalized_w2(values, sys);
    let (vbar, w2bar) = clamped_w2bar(values, sys, sigma);
    StatisticValue { s, w1: (sigma > 0.0).then(|| s / sigma), v, w2, vbar, w2bar }
}

fn count_tuples(len: usize, gaps: &Gaps, exact: bool, mut matches: impl FnMut(&[usize]) -> bool) -> u64 {
    fn rec(
        len: usize,
        gaps: &Gaps,
        exact: bool,
        cur: &mut Vec<usize>,
        matches: &mut dyn FnMut(&[usize]) -> bool,
    ) -> u64 {
        if cur.len() == gaps.l() {
            return u64::from(matches(cur));
        }
        let start = cur.last().map_or(0, |&x| x + 1);
        let mut total = 0;
        for x in start..len {
            if let Some(&last) = cur.last() {
                match gaps.0[cur.len() - 1] {
                    Some(d) if exact && x - last != d => continue,
                    Some(d) if x - last > d => break,
                    _ => {}
                }
            }
            cur.push(x);
            total += rec(len, gaps, exact, cur, matches);
            cur.pop();
        }
        total
    }
    rec(len, gaps, exact, &mut Vec::new(), &mut matches)
}

/// Number of increasing index tuples obeying `gaps` at which `text` spells `word`.
pub fn count_word_occurrences<T: PartialEq>(text: &[T], word: &[T], gaps: &Gaps, exact_gaps: bool) -> u64 {
    if word.len() != gaps.l() || word.len() > text.len() {
        return 0;
    }
    count_tuples(text.len(), gaps, exact_gaps, |t| t.iter().zip(word).all(|(&i, w)| text[i] == *w))
}

/// Number of increasing index tuples obeying `gaps` on which `pi` is order-isomorphic to `tau`.
pub fn count_pattern_occurrences(pi: &[usize], tau: &[usize], gaps: &Gaps, exact_gaps: bool) -> u64 {
    if tau.len() != gaps.l() || tau.len() > pi.len() {
        return 0;
    }
    let vals: Vec<f64> = pi.iter().map(|&x| x as f64).collect();
    count_tuples(pi.len(), gaps, exact_gaps, |t| {
        let x: Vec<f64> = t.iter().map(|&i| vals[i]).collect();
        order_isomorphic(&x, tau)
    })
}

/// Number of injective homomorphisms `F → G`.
pub fn injective_hom_count(host: &SimpleGraph, pattern: &SimpleGraph) -> u64 {
    let v = pattern.n();
    let edges = pattern.edges();
    fn rec(host: &SimpleGraph, edges: &[(usize, usize)], v: usize, phi: &mut Vec<usize>, used: &mut [bool]) -> u64 {
        let k = phi.len();
        if k == v {
            return 1;
        }
        let mut total = 0;
        for x in 0..host.n() {
            if used[x] {
                continue;
            }
            // every pattern edge between k and an already-mapped vertex must land on an edge
            let ok = edges.iter().all(|&(a, b)| {
                let (lo, hi) = (a.min(b), a.max(b));
                hi != k || host.has_edge(phi[lo], x)
            });
            if ok {
                used[x] = true;
                phi.push(x);
                total += rec(host, edges, v, phi, used);
                phi.pop();
                used[x] = false;
            }
        }
        total
    }
    if v > host.n() {
        return 0;
    }
    rec(host, &edges, v, &mut Vec::new(), &mut vec![false; host.n()])
}

/// `(injective homomorphism count, number of copies)`, with
/// `count = |Aut(F)| · copies`.
pub fn subgraph_statistic(host: &SimpleGraph, pattern: &SimpleGraph, cap: u128) -> Result<(u64, u64)> {
    if pattern.edge_count() == 0 {
        return Err(Error::InvalidArgument("pattern graph needs an edge".into()));
    }
    let size = crate::codec::falling(host.n() as u64, pattern.n() as u64);
    if size > cap {
        return Err(Error::GraphTooLarge { size, cap });
    }
    let aut = injective_hom_count(pattern, pattern);
    let count = injective_hom_count(host, pattern);
    debug_assert_eq!(count % aut, 0);
    Ok((count, count / aut))
}

/// Copies of `pattern` in `host` by brute force over injections (oracle for the above).
pub fn copies_by_edge_sets(host: &SimpleGraph, pattern: &SimpleGraph) -> u64 {
    let edges = pattern.edges();
    let mut seen = std::collections::BTreeSet::new();
    for_each_injection(host.n(), pattern.n(), |phi| {
        if edges.iter().all(|&(a, b)| host.has_edge(phi[a], phi[b])) {
            let mut img: Vec<(usize, usize)> =
                edges.iter().map(|&(a, b)| (phi[a].min(phi[b]), phi[a].max(phi[b]))).collect();
            img.sort_unstable();
            seen.insert(img);
        }
    });
    seen.len() as u64
}

/// Classical U-statistic `C(N,m)^{-1} Σ h(X_J)` over all `m`-subsets.
pub fn classical_u(data: &[f64], m: usize, h: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    if data.len() < m || m == 0 {
        return Err(Error::BlockTooSmall { size: data.len(), m });
    }
    let mut terms = Vec::new();
    let mut args = vec![0.0; m];
    crate::codec::for_each_subset(data.len(), m, |s| {
        for (a, &k) in args.iter_mut().zip(s) {
            *a = data[k];
        }
        terms.push(h(&args));
    });
    Ok(pairwise_sum(&terms) / terms.len() as f64)
}

/// Distributed U-statistic `N^{-1} Σ_b n_b U_{N,b}` over consecutive blocks.
pub fn distributed_u(data: &[f64], blocks: &[usize], m: usize, h: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    if blocks.iter().sum::<usize>() != data.len() {
        return Err(Error::InvalidArgument("block sizes must sum to the sample size".into()));
    }
    let mut offset = 0;
    let mut acc = 0.0;
    for &nb in blocks {
        acc += nb as f64 * classical_u(&data[offset..offset + nb], m, h)?;
        offset += nb;
    }
    Ok(acc / data.len() as f64)
}
