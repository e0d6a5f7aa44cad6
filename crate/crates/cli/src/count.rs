//! Standalone occurrence counters.

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use locdep::config::GraphSpec;
use locdep::fields::Gaps;
use locdep::graph::SimpleGraph;
use locdep::statistics::{count_pattern_occurrences, count_word_occurrences, subgraph_statistic};
use serde_json::{json, Value};

#[derive(Debug, Subcommand)]
pub enum CountCommand {
    /// Constrained occurrences of a word in a text (characters are letters).
    Word {
        #[arg(long)]
        text: String,
        #[arg(long)]
        word: String,
        #[command(flatten)]
        gaps: GapArgs,
    },
    /// Constrained occurrences of a permutation pattern.
    Pattern {
        /// Comma-separated permutation, any distinct values.
        #[arg(long)]
        perm: String,
        /// Comma-separated pattern, any distinct values.
        #[arg(long)]
        tau: String,
        #[command(flatten)]
        gaps: GapArgs,
    },
    /// Injective copies of a pattern graph.
    Subgraph {
        /// Host graph as JSON, e.g. `{"kind":"cycle"}` or `{"kind":"edges","edges":[[0,1]]}`.
        #[arg(long)]
        host: String,
        /// Vertex count for the host graph families that need one.
        #[arg(long, default_value_t = 0)]
        n: usize,
        /// Pattern graph as JSON.
        #[arg(long)]
        pattern: String,
        #[arg(long, default_value_t = 1u128 << 32)]
        cap: u128,
    },
}

#[derive(Debug, Args)]
pub struct GapArgs {
    /// Comma-separated gaps, `inf` for an unconstrained one; default all `inf`.
    #[arg(long)]
    gaps: Option<String>,
    /// Require gaps to be met exactly rather than as upper bounds.
    #[arg(long)]
    exact: bool,
}

impl GapArgs {
    fn parse(&self, l: usize) -> Result<Gaps> {
        let Some(text) = &self.gaps else {
            return Ok(Gaps::unconstrained(l));
        };
        let gaps = text
            .split(',')
            .map(|g| match g.trim() {
                "inf" => Ok(None),
                d => d.parse::<usize>().map(Some).with_context(|| format!("bad gap {d:?}")),
            })
            .collect::<Result<Vec<_>>>()?;
        if gaps.len() + 1 != l {
            bail!("{} gaps given for a pattern of length {l}", gaps.len());
        }
        Ok(Gaps(gaps))
    }

    fn json(&self, gaps: &Gaps) -> Value {
        json!({"gaps": gaps.0, "exact": self.exact, "b": gaps.b()})
    }
}

fn ranks(text: &str) -> Result<Vec<usize>> {
    let vals = text
        .split(',')
        .map(|v| v.trim().parse::<i64>().with_context(|| format!("bad value {v:?}")))
        .collect::<Result<Vec<_>>>()?;
    let mut sorted = vals.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != vals.len() {
        bail!("values in {text:?} are not distinct");
    }
    Ok(vals.iter().map(|v| sorted.binary_search(v).expect("present")).collect())
}

fn graph(text: &str, n: usize) -> Result<SimpleGraph> {
    let spec: GraphSpec = serde_json::from_str(text).with_context(|| format!("bad graph {text:?}"))?;
    Ok(spec.build(n)?)
}

pub fn run(cmd: &CountCommand) -> Result<Value> {
    Ok(match cmd {
        CountCommand::Word { text, word, gaps } => {
            let (t, w): (Vec<char>, Vec<char>) = (text.chars().collect(), word.chars().collect());
            let g = gaps.parse(w.len())?;
            json!({
                "kind": "word",
                "n": t.len(),
                "constraints": gaps.json(&g),
                "count": count_word_occurrences(&t, &w, &g, gaps.exact),
            })
        }
        CountCommand::Pattern { perm, tau, gaps } => {
            let (p, t) = (ranks(perm)?, ranks(tau)?);
            let g = gaps.parse(t.len())?;
            json!({
                "kind": "pattern",
                "n": p.len(),
                "tau": t,
                "constraints": gaps.json(&g),
                "count": count_pattern_occurrences(&p, &t, &g, gaps.exact),
            })
        }
        CountCommand::Subgraph { host, n, pattern, cap } => {
            let (h, f) = (graph(host, *n)?, graph(pattern, 0)?);
            let (injective, copies) = subgraph_statistic(&h, &f, *cap)?;
            json!({
                "kind": "subgraph",
                "host_vertices": h.n(),
                "host_edges": h.edge_count(),
                "pattern_vertices": f.n(),
                "injective_homomorphisms": injective,
                "copies": copies,
            })
        }
    })
}
