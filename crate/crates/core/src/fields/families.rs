use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Evaluator, LatentSourceField, MeanProvenance, Means, SourceDist, Supports};
use crate::codec::{binom, falling, for_each_injection, for_each_subset, pair_rank};
use crate::graph::SimpleGraph;
use crate::{Error, Result};

/// Window function applied to `m + 1` consecutive sources.
pub type WindowFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

pub fn iid(n: usize, dist: SourceDist) -> Result<LatentSourceField> {
    if n == 0 {
        return Err(Error::InvalidSize("n must be positive".into()));
    }
    let mean = dist.mean();
    let supports = Supports::Fixed { width: 1, items: Arc::new((0..n as u32).collect()) };
    let field = LatentSourceField::new(vec![dist; n], supports, Arc::new(|i, s: &[f64]| s[i]))?;
    Ok(field.with_family("iid", "identity").with_means(Means::Shared(mean), MeanProvenance::Analytic))
}

/// `X_i = window(U_i, …, U_{i+m})`; the default window is the sum.
pub fn m_dependent(n: usize, m: usize, dist: SourceDist, window: Option<WindowFn>) -> Result<LatentSourceField> {
    if n == 0 {
        return Err(Error::InvalidSize("n must be positive".into()));
    }
    let mut items = Vec::with_capacity(n * (m + 1));
    for i in 0..n {
        items.extend((i..=i + m).map(|s| s as u32));
    }
    let supports = Supports::Fixed { width: m + 1, items: Arc::new(items) };
    let sources = vec![dist.clone(); n + m];
    let field = match window {
        None => {
            let f: Evaluator = Arc::new(move |i, s: &[f64]| s[i..=i + m].iter().sum());
            LatentSourceField::new(sources, supports, f)?
                .with_means(Means::Shared((m + 1) as f64 * dist.mean()), MeanProvenance::Analytic)
        }
        Some(w) => {
            let f: Evaluator = Arc::new(move |i, s: &[f64]| w(&s[i..=i + m]));
            LatentSourceField::new(sources, supports, f)?.centered(1_000_000, 0)
        }
    };
    Ok(field.with_family("m_dependent", "identity").with_extra("m", m as f64))
}

/// Vertex field on a dependency graph: one source per vertex and one per edge,
/// `X_i = f(vertex_i, incident edges)`. Supports overlap exactly along edges,
/// so `A_i` is the closed neighborhood of `i`.
pub fn graph_dependency(
    graph: &SimpleGraph,
    vertex: SourceDist,
    edge: SourceDist,
    f: Option<Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>>,
) -> Result<LatentSourceField> {
    let n = graph.n();
    if n == 0 {
        return Err(Error::InvalidSize("graph has no vertices".into()));
    }
    let edges = graph.edges();
    let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for (e, &(u, v)) in edges.iter().enumerate() {
        rows[u].push(n + e);
        rows[v].push(n + e);
    }
    let incident: Vec<Vec<usize>> = rows.iter().map(|r| r[1..].to_vec()).collect();
    let mut sources = vec![vertex; n];
    sources.extend(std::iter::repeat_n(edge, edges.len()));
    let f = f.unwrap_or_else(|| Arc::new(|v, e: &[f64]| v + e.iter().sum::<f64>()));
    let eval: Evaluator = Arc::new(move |i, s: &[f64]| {
        let e: Vec<f64> = incident[i].iter().map(|&k| s[k]).collect();
        f(s[i], &e)
    });
    let field = LatentSourceField::new(sources, Supports::from_rows(&rows), eval)?;
    Ok(field.centered(1_000_000, 0).with_family("graph", "vertex").with_extra("max_degree", graph.max_degree() as f64))
}

/// Kernel `h: R^m -> R`.
pub type Kernel = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Distributed U-statistic field. Data points are the sources, split into
/// consecutive blocks; index `(b, J)` for every `m`-subset `J` of block `b`
/// (colex order) carries `(n_b/N) C(n_b, m)^{-1} (h(X_J) - θ)`, so the field
/// sum is `U_d - θ`. With one block it is the classical U-statistic.
pub fn ustat(blocks: &[usize], m: usize, kernel: Kernel, dist: SourceDist, theta: f64) -> Result<LatentSourceField> {
    if m == 0 || blocks.is_empty() {
        return Err(Error::InvalidSize("need m >= 1 and at least one block".into()));
    }
    if let Some(&size) = blocks.iter().find(|&&b| b < m) {
        return Err(Error::BlockTooSmall { size, m });
    }
    let total: usize = blocks.iter().sum();
    let mut items = Vec::new();
    let mut starts = vec![0usize];
    let mut weights = Vec::new();
    let mut offset = 0;
    for &nb in blocks {
        for_each_subset(nb, m, |s| items.extend(s.iter().map(|&x| (x + offset) as u32)));
        starts.push(items.len() / m);
        weights.push(nb as f64 / total as f64 / binom(nb as u64, m as u64) as f64);
        offset += nb;
    }
    let items = Arc::new(items);
    let rows = Arc::clone(&items);
    let eval: Evaluator = Arc::new(move |i, s: &[f64]| {
        let block = starts.partition_point(|&st| st <= i) - 1;
        let mut args = [0.0f64; 16];
        for (a, &src) in args.iter_mut().zip(&rows[i * m..(i + 1) * m]) {
            *a = s[src as usize];
        }
        weights[block] * (kernel(&args[..m]) - theta)
    });
    let field = LatentSourceField::new(vec![dist; total], Supports::Fixed { width: m, items }, eval)?;
    Ok(field
        .with_means(Means::Shared(0.0), MeanProvenance::Analytic)
        .with_family("ustat", "block-major, colex m-subsets")
        .with_extra("N", total as f64)
        .with_extra("m", m as f64)
        .with_extra("k", blocks.len() as f64)
        .with_extra("theta", theta))
}

/// Gap constraints `𝒟 = (d_1, …, d_{l-1})`; `None` is an infinite gap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gaps(pub Vec<Option<usize>>);

impl Gaps {
    pub fn unconstrained(l: usize) -> Self {
        Gaps(vec![None; l.saturating_sub(1)])
    }

    /// Tuple length `l`.
    pub fn l(&self) -> usize {
        self.0.len() + 1
    }

    /// `b(𝒟) = 1 + #{k : d_k = ∞}`.
    pub fn b(&self) -> usize {
        1 + self.0.iter().filter(|d| d.is_none()).count()
    }

    /// Whether an increasing tuple satisfies the constraints (`≤ d`, or `= d` when `exact`).
    pub fn admits(&self, tuple: &[usize], exact: bool) -> bool {
        tuple.len() == self.l()
            && tuple.windows(2).zip(&self.0).all(|(w, d)| {
                w[0] < w[1]
                    && match d {
                        None => true,
                        Some(d) if exact => w[1] - w[0] == *d,
                        Some(d) => w[1] - w[0] <= *d,
                    }
            })
    }
}

/// Admissible increasing tuples in `{0..n-1}`, lexicographic, flattened.
pub fn admissible_tuples(n: usize, gaps: &Gaps, exact: bool, cap: u128) -> Result<Vec<u32>> {
    fn rec(n: usize, gaps: &Gaps, exact: bool, cur: &mut Vec<usize>, out: &mut Vec<u32>, cap: usize) -> bool {
        let l = gaps.l();
        if cur.len() == l {
            out.extend(cur.iter().map(|&x| x as u32));
            return out.len() / l <= cap;
        }
        let (lo, hi) = match cur.last() {
            None => (0, n),
            Some(&last) => match gaps.0[cur.len() - 1] {
                None => (last + 1, n),
                Some(d) if exact => (last + d, (last + d + 1).min(n)),
                Some(d) => (last + 1, (last + d + 1).min(n)),
            },
        };
        for x in lo..hi {
            cur.push(x);
            let ok = rec(n, gaps, exact, cur, out, cap);
            cur.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    if gaps.0.iter().any(|d| *d == Some(0)) {
        return Err(Error::InvalidArgument("gap bounds must be positive".into()));
    }
    let mut out = Vec::new();
    let cap_usize = usize::try_from(cap).unwrap_or(usize::MAX);
    if !rec(n, gaps, exact, &mut Vec::new(), &mut out, cap_usize) {
        return Err(Error::GraphTooLarge { size: (out.len() / gaps.l()) as u128, cap });
    }
    if out.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    Ok(out)
}

/// Constrained U-statistic field over an `m`-dependent letter sequence.
///
/// Letter `k` is `letter(U_k, …, U_{k+m})` (the source itself when `m = 0`
/// and no window is given). Index `i` is an admissible tuple and carries
/// `f(letters at the tuple)`.
#[allow(clippy::too_many_arguments)]
pub fn constrained_ustat(
    n: usize,
    m: usize,
    dist: SourceDist,
    letter: Option<WindowFn>,
    f: Kernel,
    gaps: &Gaps,
    exact_gaps: bool,
    cap: u128,
) -> Result<LatentSourceField> {
    let l = gaps.l();
    if l > 16 {
        return Err(Error::InvalidArgument("tuple length above 16".into()));
    }
    if m > 0 && letter.is_none() {
        return Err(Error::InvalidArgument("m > 0 needs a window function for letters".into()));
    }
    let tuples = Arc::new(admissible_tuples(n, gaps, exact_gaps, cap)?);
    let supports = if m == 0 {
        Supports::Fixed { width: l, items: Arc::clone(&tuples) }
    } else {
        let rows: Vec<Vec<usize>> =
            tuples.chunks_exact(l).map(|t| t.iter().flat_map(|&p| p as usize..=p as usize + m).collect()).collect();
        Supports::from_rows(&rows)
    };
    let tup = Arc::clone(&tuples);
    let eval: Evaluator = Arc::new(move |i, s: &[f64]| {
        let mut letters = [0.0f64; 16];
        for (slot, &p) in letters.iter_mut().zip(&tup[i * l..(i + 1) * l]) {
            let p = p as usize;
            *slot = match &letter {
                None => s[p],
                Some(w) => w(&s[p..=p + m]),
            };
        }
        f(&letters[..l])
    });
    let field = LatentSourceField::new(vec![dist; n + m], supports, eval)?;
    let mut field = field
        .with_family("constrained_ustat", "lexicographic admissible tuples")
        .with_extra("b", gaps.b() as f64)
        .with_extra("l", l as f64)
        .with_extra("m", m as f64)
        .with_extra("n", n as f64);
    if exact_gaps {
        field.meta.notes.push("exact gaps".into());
    }
    Ok(field)
}

/// Word-occurrence field over i.i.d. letters `0..probs.len()`; uncentered
/// field sum equals the number of constrained occurrences of `word`.
pub fn word_field(
    n: usize,
    probs: &[f64],
    word: &[usize],
    gaps: &Gaps,
    exact_gaps: bool,
    cap: u128,
) -> Result<LatentSourceField> {
    if gaps.l() != word.len() {
        return Err(Error::InvalidArgument("word length must equal l".into()));
    }
    if word.iter().any(|&c| c >= probs.len()) {
        return Err(Error::InvalidArgument("word uses a letter outside the alphabet".into()));
    }
    let dist = SourceDist::Discrete { values: (0..probs.len()).map(|c| c as f64).collect(), probs: probs.to_vec() };
    let w: Vec<f64> = word.iter().map(|&c| c as f64).collect();
    let mean: f64 = word.iter().map(|&c| probs[c]).product();
    let f: Kernel = Arc::new(move |x: &[f64]| f64::from(u8::from(x == &w[..])));
    Ok(constrained_ustat(n, 0, dist, None, f, gaps, exact_gaps, cap)?
        .with_means(Means::Shared(mean), MeanProvenance::Analytic))
}

/// Whether `x` has the same relative order as the permutation pattern `tau`.
pub fn order_isomorphic(x: &[f64], tau: &[usize]) -> bool {
    x.len() == tau.len() && (0..x.len()).all(|a| (a + 1..x.len()).all(|b| (x[a] < x[b]) == (tau[a] < tau[b])))
}

/// Pattern-occurrence field over i.i.d. Uniform(0,1) values, whose ranks form
/// a uniform random permutation. `E X_i = 1/l!` for every tuple.
pub fn pattern_field(n: usize, tau: &[usize], gaps: &Gaps, exact_gaps: bool, cap: u128) -> Result<LatentSourceField> {
    if gaps.l() != tau.len() {
        return Err(Error::InvalidArgument("pattern length must equal l".into()));
    }
    let t = tau.to_vec();
    let f: Kernel = Arc::new(move |x: &[f64]| f64::from(u8::from(order_isomorphic(x, &t))));
    let fact: f64 = (1..=tau.len()).map(|k| k as f64).product();
    Ok(constrained_ustat(n, 0, SourceDist::Uniform { lo: 0.0, hi: 1.0 }, None, f, gaps, exact_gaps, cap)?
        .with_means(Means::Shared(1.0 / fact), MeanProvenance::Analytic))
}

/// Edge-decoration function `h(f(uv), g(φ(u), φ(v)))`.
pub type Decoration = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Decorated injective-homomorphism field. Sources are the `C(n,2)` edge
/// variables in pair-rank order; index `φ` ranges over injections
/// `V(F) → [n]` in mixed-radix rank order and carries
/// `Π_{uv ∈ E(F)} h(f(uv), g(φ(u), φ(v)))`.
pub fn decorated_graph(
    n: usize,
    pattern: &SimpleGraph,
    decorations: &[f64],
    h: Decoration,
    edge: SourceDist,
    cap: u128,
) -> Result<LatentSourceField> {
    let v = pattern.n();
    let f_edges = pattern.edges();
    if f_edges.is_empty() {
        return Err(Error::InvalidArgument("pattern graph needs an edge".into()));
    }
    if decorations.len() != f_edges.len() {
        return Err(Error::InvalidArgument("one decoration per pattern edge".into()));
    }
    if n < v {
        return Err(Error::InvalidSize(format!("n = {n} below |V(F)| = {v}")));
    }
    let size = falling(n as u64, v as u64);
    if size > cap {
        return Err(Error::GraphTooLarge { size, cap });
    }
    let e = f_edges.len();
    let mut images: Vec<u32> = Vec::with_capacity(size as usize * e);
    let mut rows = Vec::with_capacity(size as usize);
    for_each_injection(n, v, |phi| {
        let row: Vec<usize> = f_edges.iter().map(|&(a, b)| pair_rank(phi[a], phi[b])).collect();
        images.extend(row.iter().map(|&r| r as u32));
        rows.push(row);
    });
    let dec = decorations.to_vec();
    let eval: Evaluator = Arc::new(move |i, s: &[f64]| {
        images[i * e..(i + 1) * e].iter().zip(&dec).map(|(&r, &d)| h(d, s[r as usize])).product()
    });
    let sources = vec![edge; n * (n - 1) / 2];
    let field = LatentSourceField::new(sources, Supports::from_rows(&rows), eval)?;
    Ok(field
        .centered(1_000_000, 0)
        .with_family("decorated_graph", "mixed-radix injections")
        .with_extra("n", n as f64)
        .with_extra("v", v as f64)
        .with_extra("e", e as f64))
}
