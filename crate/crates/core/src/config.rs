//! Serializable descriptions of field families, instantiated per grid size.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fields::{
    constrained_ustat, decorated_graph, graph_dependency, iid, m_dependent, pattern_field, ustat, word_field, Gaps,
    Kernel, LatentSourceField, SourceDist, WindowFn,
};
use crate::graph::SimpleGraph;
use crate::rng::derive_key;
use crate::{Error, Result};

/// Dependency or pattern graph on `n` vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Cycle,
    Path,
    /// Star with `n − 1` leaves around vertex 0.
    Star,
    Complete,
    Gnp {
        p: f64,
        seed: u64,
    },
    /// Explicit 0-based edge list; the vertex count is the largest label + 1.
    Edges {
        edges: Vec<(usize, usize)>,
    },
}

impl GraphSpec {
    pub fn build(&self, n: usize) -> Result<SimpleGraph> {
        Ok(match self {
            GraphSpec::Cycle if n >= 3 => SimpleGraph::cycle(n),
            GraphSpec::Cycle => return Err(Error::InvalidSize("cycle needs n >= 3".into())),
            GraphSpec::Path => SimpleGraph::path(n),
            GraphSpec::Star if n >= 1 => SimpleGraph::star(n - 1),
            GraphSpec::Star => return Err(Error::InvalidSize("star needs n >= 1".into())),
            GraphSpec::Complete => SimpleGraph::complete(n),
            GraphSpec::Gnp { p, seed } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::Config("gnp p outside [0, 1]".into()));
                }
                let mut rng = ChaCha8Rng::from_seed(derive_key(*seed, n as u64));
                SimpleGraph::gnp(n, *p, &mut rng)
            }
            GraphSpec::Edges { edges } => {
                let v = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
                if edges.iter().any(|&(a, b)| a == b) {
                    return Err(Error::Config("self-loop in edge list".into()));
                }
                SimpleGraph::from_edges(v, edges)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSpec {
    /// `Π x_k`.
    Product,
    /// `Σ x_k`.
    Sum,
    /// `(x₁ − x₂)²/2`, `m = 2`.
    HalfSquare,
}

impl KernelSpec {
    pub fn kernel(self) -> Kernel {
        match self {
            KernelSpec::Product => Arc::new(|x: &[f64]| x.iter().product()),
            KernelSpec::Sum => Arc::new(|x: &[f64]| x.iter().sum()),
            KernelSpec::HalfSquare => Arc::new(|x: &[f64]| 0.5 * (x[0] - x[1]).powi(2)),
        }
    }

    /// `E h(X_1, …, X_m)`.
    pub fn theta(self, m: usize, dist: &SourceDist) -> Result<f64> {
        Ok(match self {
            KernelSpec::Product => dist.mean().powi(m as i32),
            KernelSpec::Sum => m as f64 * dist.mean(),
            KernelSpec::HalfSquare if m == 2 => dist.variance(),
            KernelSpec::HalfSquare => return Err(Error::Config("half_square needs m = 2".into())),
        })
    }
}

/// A field family; `build(n)` instantiates it at grid size `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Iid {
        source: SourceDist,
    },
    MDependent {
        m: usize,
        source: SourceDist,
    },
    /// Vertex-plus-incident-edges field on a dependency graph with `n` vertices.
    Graph {
        graph: GraphSpec,
        vertex: SourceDist,
        edge: SourceDist,
    },
    /// Distributed U-statistic on `n` points split into `k` near-equal blocks.
    Ustat {
        k: usize,
        m: usize,
        kernel: KernelSpec,
        source: SourceDist,
    },
    /// `Σ f(letters at an admissible tuple)` over a text of length `n`; letters
    /// are the sources themselves when `m = 0`, else sums of `m + 1` adjacent sources.
    ConstrainedUstat {
        #[serde(default)]
        m: usize,
        kernel: KernelSpec,
        source: SourceDist,
        gaps: Vec<Option<usize>>,
        #[serde(default)]
        exact_gaps: bool,
    },
    /// Constrained occurrences of `word` in a random text of length `n`.
    Word {
        probs: Vec<f64>,
        word: Vec<usize>,
        gaps: Vec<Option<usize>>,
        #[serde(default)]
        exact_gaps: bool,
    },
    /// Constrained occurrences of the permutation pattern `tau` (0-based).
    Pattern {
        tau: Vec<usize>,
        gaps: Vec<Option<usize>>,
        #[serde(default)]
        exact_gaps: bool,
    },
    /// Injective copies of `pattern` in `G(n, p)`.
    DecoratedGraph {
        pattern: GraphSpec,
        p: f64,
    },
}

/// `n` points split into `k` consecutive blocks whose sizes differ by at most 1.
pub fn even_blocks(n: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::Config(format!("cannot split {n} points into {k} blocks")));
    }
    Ok((0..k).map(|b| n / k + usize::from(b < n % k)).collect())
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::Iid { .. } => "iid",
            FamilySpec::MDependent { .. } => "m_dependent",
            FamilySpec::Graph { .. } => "graph",
            FamilySpec::Ustat { .. } => "ustat",
            FamilySpec::ConstrainedUstat { .. } => "constrained_ustat",
            FamilySpec::Word { .. } => "word",
            FamilySpec::Pattern { .. } => "pattern",
            FamilySpec::DecoratedGraph { .. } => "decorated_graph",
        }
    }

    pub fn build(&self, n: usize, cap: u128) -> Result<LatentSourceField> {
        match self {
            FamilySpec::Iid { source } => iid(n, source.clone()),
            FamilySpec::MDependent { m, source } => m_dependent(n, *m, source.clone(), None),
            FamilySpec::Graph { graph, vertex, edge } => {
                graph_dependency(&graph.build(n)?, vertex.clone(), edge.clone(), None)
            }
            FamilySpec::Ustat { k, m, kernel, source } => {
                let blocks = even_blocks(n, *k)?;
                ustat(&blocks, *m, kernel.kernel(), source.clone(), kernel.theta(*m, source)?)
            }
            FamilySpec::ConstrainedUstat { m, kernel, source, gaps, exact_gaps } => {
                let letter: Option<WindowFn> = (*m > 0).then(|| Arc::new(|w: &[f64]| w.iter().sum()) as WindowFn);
                let field = constrained_ustat(
                    n,
                    *m,
                    source.clone(),
                    letter,
                    kernel.kernel(),
                    &Gaps(gaps.clone()),
                    *exact_gaps,
                    cap,
                )?;
                Ok(field.centered(200_000, n as u64))
            }
            FamilySpec::Word { probs, word, gaps, exact_gaps } => {
                word_field(n, probs, word, &Gaps(gaps.clone()), *exact_gaps, cap)
            }
            FamilySpec::Pattern { tau, gaps, exact_gaps } => {
                pattern_field(n, tau, &Gaps(gaps.clone()), *exact_gaps, cap)
            }
            FamilySpec::DecoratedGraph { pattern, p } => {
                let f = pattern.build(0)?;
                let ones = vec![1.0; f.edge_count()];
                decorated_graph(n, &f, &ones, Arc::new(|_, g| g), SourceDist::Bernoulli { p: *p }, cap)
            }
        }
    }
}
