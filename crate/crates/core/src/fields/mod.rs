//! Sampleable locally dependent fields built from independent latent sources.
//!
//! Every index `i` reads a fixed set of sources `supp(i)`. Indices with
//! disjoint supports are independent, so neighborhoods induced from support
//! overlap satisfy both local-dependence conditions by construction.

mod families;
mod sources;

pub use families::*;
pub use sources::SourceDist;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::neighborhood::{NeighborhoodSystem, Provenance};
use crate::rng::stream_rng;
use crate::{Error, Result};

/// `(index, all source values) -> X_i`; must read only `supp(index)`.
pub type Evaluator = Arc<dyn Fn(usize, &[f64]) -> f64 + Send + Sync>;

/// Per-index outcome count above which exact centering falls back to Monte Carlo.
pub const LOCAL_ENUMERATION_CAP: u128 = 1 << 16;

#[derive(Debug, Clone)]
pub enum Supports {
    Csr {
        offsets: Vec<usize>,
        items: Vec<u32>,
    },
    /// Every row has the same width; rows are stored back to back.
    Fixed {
        width: usize,
        items: Arc<Vec<u32>>,
    },
}

impl Supports {
    pub fn from_rows(rows: &[Vec<usize>]) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut items = Vec::new();
        offsets.push(0);
        for r in rows {
            let mut r: Vec<u32> = r.iter().map(|&x| x as u32).collect();
            r.sort_unstable();
            r.dedup();
            items.extend_from_slice(&r);
            offsets.push(items.len());
        }
        Supports::Csr { offsets, items }
    }

    pub fn len(&self) -> usize {
        match self {
            Supports::Csr { offsets, .. } => offsets.len() - 1,
            Supports::Fixed { width, items } => items.len() / width,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[u32] {
        match self {
            Supports::Csr { offsets, items } => &items[offsets[i]..offsets[i + 1]],
            Supports::Fixed { width, items } => &items[i * width..(i + 1) * width],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Means {
    Shared(f64),
    PerIndex(Vec<f64>),
}

impl Means {
    pub fn get(&self, i: usize) -> f64 {
        match self {
            Means::Shared(m) => *m,
            Means::PerIndex(v) => v[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanProvenance {
    Uncentered,
    Exact,
    Analytic,
    MonteCarlo { draws: u64, max_se: f64 },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct FieldMetadata {
    pub family: String,
    pub index_codec: String,
    pub extras: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub values: Vec<f64>,
    pub master_seed: u64,
    pub replication: u64,
}

#[derive(Clone)]
pub struct LatentSourceField {
    sources: Vec<SourceDist>,
    supports: Supports,
    evaluator: Evaluator,
    means: Option<Means>,
    provenance: MeanProvenance,
    pub meta: FieldMetadata,
}

impl std::fmt::Debug for LatentSourceField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LatentSourceField")
            .field("n", &self.len())
            .field("sources", &self.sources.len())
            .field("centering", &self.provenance)
            .field("meta", &self.meta)
            .finish()
    }
}

impl LatentSourceField {
    pub fn new(sources: Vec<SourceDist>, supports: Supports, evaluator: Evaluator) -> Result<Self> {
        if supports.is_empty() {
            return Err(Error::InvalidSize("a field needs at least one index".into()));
        }
        for s in &sources {
            s.validate()?;
        }
        for i in 0..supports.len() {
            let row = supports.row(i);
            if row.is_empty() {
                return Err(Error::InvalidArgument(format!("support of index {} is empty", i + 1)));
            }
            if row.iter().any(|&s| s as usize >= sources.len()) {
                return Err(Error::InvalidArgument(format!("support of index {} leaves the source list", i + 1)));
            }
        }
        Ok(Self {
            sources,
            supports,
            evaluator,
            means: None,
            provenance: MeanProvenance::Uncentered,
            meta: FieldMetadata::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sources(&self) -> &[SourceDist] {
        &self.sources
    }

    pub fn support(&self, i: usize) -> &[u32] {
        self.supports.row(i)
    }

    pub fn is_centered(&self) -> bool {
        self.means.is_some()
    }

    pub fn mean_provenance(&self) -> &MeanProvenance {
        &self.provenance
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.means.as_ref().map_or(0.0, |m| m.get(i))
    }

    pub fn is_discrete(&self) -> bool {
        self.sources.iter().all(SourceDist::is_discrete)
    }

    /// Number of joint source outcomes (saturating), `None` for continuous sources.
    pub fn outcome_count(&self) -> Option<u128> {
        self.sources
            .iter()
            .map(|s| s.atoms().map(|a| a.len() as u128))
            .try_fold(1u128, |acc, k| k.map(|k| acc.saturating_mul(k)))
    }

    pub fn with_family(mut self, family: &str, codec: &str) -> Self {
        self.meta.family = family.into();
        self.meta.index_codec = codec.into();
        self
    }

    pub fn with_extra(mut self, key: &str, value: f64) -> Self {
        self.meta.extras.insert(key.into(), value);
        self
    }

    pub fn with_means(mut self, means: Means, provenance: MeanProvenance) -> Self {
        self.means = Some(means);
        self.provenance = provenance;
        self
    }

    pub fn uncentered(mut self) -> Self {
        self.means = None;
        self.provenance = MeanProvenance::Uncentered;
        self
    }

    /// Centers with exact means when every index's support is finite and small,
    /// otherwise with a Monte-Carlo pre-pass of `mc_draws` draws.
    pub fn centered(self, mc_draws: u64, seed: u64) -> Self {
        match self.exact_means() {
            Some(m) => self.with_means(Means::PerIndex(m), MeanProvenance::Exact),
            None => {
                let (m, se) = self.mc_means(mc_draws, seed);
                let max_se = se.iter().cloned().fold(0.0, f64::max);
                self.with_means(Means::PerIndex(m), MeanProvenance::MonteCarlo { draws: mc_draws, max_se })
            }
        }
    }

    fn support_atoms(&self, i: usize) -> Option<Vec<(usize, Vec<(f64, f64)>)>> {
        self.support(i).iter().map(|&s| self.sources[s as usize].atoms().map(|a| (s as usize, a))).collect()
    }

    /// Exact `E X_i` (uncentered) by enumerating each support.
    pub fn exact_means(&self) -> Option<Vec<f64>> {
        let mut buf = vec![0.0; self.sources.len()];
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let atoms = self.support_atoms(i)?;
            let count: u128 = atoms.iter().map(|(_, a)| a.len() as u128).product();
            if count > LOCAL_ENUMERATION_CAP {
                return None;
            }
            let mut acc = 0.0;
            for_each_outcome(&atoms, &mut buf, |b, p| acc += p * (self.evaluator)(i, b));
            out.push(acc);
        }
        Some(out)
    }

    /// Monte-Carlo means with their standard errors.
    pub fn mc_means(&self, draws: u64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let mut s1 = vec![0.0; n];
        let mut s2 = vec![0.0; n];
        let mut src = vec![0.0; self.sources.len()];
        let mut rng = stream_rng(seed, u64::MAX, 0);
        for _ in 0..draws {
            self.sample_sources(&mut rng, &mut src);
            for i in 0..n {
                let x = (self.evaluator)(i, &src);
                s1[i] += x;
                s2[i] += x * x;
            }
        }
        let d = draws as f64;
        let means: Vec<f64> = s1.iter().map(|s| s / d).collect();
        let se = means.iter().zip(&s2).map(|(m, s)| ((s / d - m * m).max(0.0) / (d - 1.0).max(1.0)).sqrt()).collect();
        (means, se)
    }

    pub fn sample_sources<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let mut bits = 0u64;
        let mut left = 0u32;
        for (s, o) in self.sources.iter().zip(out.iter_mut()) {
            if let SourceDist::Rademacher = s {
                if left == 0 {
                    bits = rng.next_u64();
                    left = 64;
                }
                *o = if bits & 1 == 1 { 1.0 } else { -1.0 };
                bits >>= 1;
                left -= 1;
            } else {
                *o = s.sample(rng);
            }
        }
    }

    /// Uncentered values at the given source outcome.
    pub fn evaluate_raw(&self, sources: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (self.evaluator)(i, sources);
        }
    }

    /// Field values (centered if configured) at the given source outcome.
    pub fn evaluate_at(&self, sources: &[f64], out: &mut [f64]) {
        self.evaluate_raw(sources, out);
        if let Some(m) = &self.means {
            for (i, o) in out.iter_mut().enumerate() {
                *o -= m.get(i);
            }
        }
    }

    pub fn evaluate_index(&self, i: usize, sources: &[f64]) -> f64 {
        (self.evaluator)(i, sources) - self.mean(i)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, src: &mut [f64], out: &mut [f64]) {
        self.sample_sources(rng, src);
        self.evaluate_at(src, out);
    }

    pub fn sample(&self, master_seed: u64, replication: u64) -> Realization {
        let mut rng = stream_rng(master_seed, 0, replication);
        let mut src = vec![0.0; self.sources.len()];
        let mut values = vec![0.0; self.len()];
        self.sample_with(&mut rng, &mut src, &mut values);
        Realization { values, master_seed, replication }
    }

    /// The same field with index `i` moved to `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        let mut inv = vec![usize::MAX; n];
        for (i, &p) in perm.iter().enumerate() {
            if p >= n || inv[p] != usize::MAX {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            inv[p] = i;
        }
        if perm.len() != n {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
        let rows: Vec<Vec<usize>> =
            (0..n).map(|k| self.support(inv[k]).iter().map(|&s| s as usize).collect()).collect();
        let old = self.evaluator.clone();
        let inv = Arc::new(inv);
        let map = inv.clone();
        let evaluator: Evaluator = Arc::new(move |k, src| old(map[k], src));
        let means = self.means.as_ref().map(|m| match m {
            Means::Shared(x) => Means::Shared(*x),
            Means::PerIndex(v) => Means::PerIndex((0..n).map(|k| v[inv[k]]).collect()),
        });
        Ok(Self {
            sources: self.sources.clone(),
            supports: Supports::from_rows(&rows),
            evaluator,
            means,
            provenance: self.provenance.clone(),
            meta: self.meta.clone(),
        })
    }

    /// `A_i = {j : supp(j) ∩ supp(i) ≠ ∅}` with the pair cover `A_i ∪ A_j`.
    pub fn induced_neighborhoods(&self) -> NeighborhoodSystem {
        let n = self.len();
        let mut by_source: Vec<Vec<u32>> = vec![Vec::new(); self.sources.len()];
        for i in 0..n {
            for &s in self.support(i) {
                by_source[s as usize].push(i as u32);
            }
        }
        let mut stamp = vec![usize::MAX; n];
        let mut a = Vec::with_capacity(n);
        for i in 0..n {
            let mut ai = Vec::new();
            for &s in self.support(i) {
                for &j in &by_source[s as usize] {
                    if stamp[j as usize] != i {
                        stamp[j as usize] = i;
                        ai.push(j as usize);
                    }
                }
            }
            a.push(ai);
        }
        NeighborhoodSystem::with_default_cover(a, Provenance::Induced)
    }
}

/// Odometer over the joint outcomes of the listed sources; writes each
/// outcome into `buf` at the source positions and calls `f(buf, prob)`.
pub fn for_each_outcome(atoms: &[(usize, Vec<(f64, f64)>)], buf: &mut [f64], mut f: impl FnMut(&[f64], f64)) {
    let k = atoms.len();
    let mut digit = vec![0usize; k];
    for (s, a) in atoms {
        buf[*s] = a[0].0;
    }
    loop {
        let p: f64 = atoms.iter().zip(&digit).map(|((_, a), &d)| a[d].1).product();
        f(buf, p);
        let mut t = 0;
        loop {
            if t == k {
                return;
            }
            digit[t] += 1;
            let (s, a) = &atoms[t];
            if digit[t] < a.len() {
                buf[*s] = a[digit[t]].0;
                break;
            }
            digit[t] = 0;
            buf[*s] = a[0].0;
            t += 1;
        }
    }
}
