//! Dependence skeletons: neighborhoods `A_i`, pair covers `A_ij` and the
//! quantities derived from them.
//!
//! Indices are 0-based internally and 1-based in the JSON form.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Induced from disjoint latent supports; independence holds by construction.
    Induced,
    /// Supplied by the user; independence is not verified.
    Declared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodSystem {
    n: usize,
    a: Vec<Vec<usize>>,
    pair: BTreeMap<(usize, usize), Vec<usize>>,
    provenance: Provenance,
}

fn sorted_set(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

/// Union of two sorted sets.
pub fn union_sorted(x: &[usize], y: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(x.len() + y.len());
    let (mut i, mut j) = (0, 0);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => {
                out.push(x[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(y[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(x[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&x[i..]);
    out.extend_from_slice(&y[j..]);
    out
}

pub fn contains(set: &[usize], x: usize) -> bool {
    set.binary_search(&x).is_ok()
}

pub fn intersects(x: &[usize], y: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// `A_ij = A_i ∪ A_j` for every `j ∈ A_i`.
pub fn default_pair_cover(a: &[Vec<usize>]) -> BTreeMap<(usize, usize), Vec<usize>> {
    let mut pair = BTreeMap::new();
    for (i, ai) in a.iter().enumerate() {
        for &j in ai {
            let aj = a.get(j).map(Vec::as_slice).unwrap_or(&[]);
            pair.insert((i, j), union_sorted(ai, aj));
        }
    }
    pair
}

impl NeighborhoodSystem {
    /// Builds a system without validating it; see [`validate_structure`].
    pub fn new(a: Vec<Vec<usize>>, pair: BTreeMap<(usize, usize), Vec<usize>>, provenance: Provenance) -> Self {
        let a: Vec<_> = a.into_iter().map(sorted_set).collect();
        let pair = pair.into_iter().map(|(k, v)| (k, sorted_set(v))).collect();
        Self { n: a.len(), a, pair, provenance }
    }

    /// Builds a system with the default pair cover.
    pub fn with_default_cover(a: Vec<Vec<usize>>, provenance: Provenance) -> Self {
        let a: Vec<_> = a.into_iter().map(sorted_set).collect();
        let pair = default_pair_cover(&a);
        Self { n: a.len(), a, pair, provenance }
    }

    pub fn iid(n: usize) -> Self {
        Self::with_default_cover((0..n).map(|i| vec![i]).collect(), Provenance::Induced)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self, i: usize) -> &[usize] {
        &self.a[i]
    }

    pub fn neighborhoods(&self) -> &[Vec<usize>] {
        &self.a
    }

    pub fn pair_set(&self, i: usize, j: usize) -> Option<&[usize]> {
        self.pair.get(&(i, j)).map(Vec::as_slice)
    }

    pub fn pairs(&self) -> &BTreeMap<(usize, usize), Vec<usize>> {
        &self.pair
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn set_pair(&mut self, i: usize, j: usize, set: Vec<usize>) {
        self.pair.insert((i, j), sorted_set(set));
    }

    pub fn set_neighborhood(&mut self, i: usize, set: Vec<usize>) {
        self.a[i] = sorted_set(set);
    }

    /// Applies the index permutation `i ↦ perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        let map = |s: &[usize]| sorted_set(s.iter().map(|&x| perm[x]).collect());
        let mut a = vec![Vec::new(); self.n];
        for (i, ai) in self.a.iter().enumerate() {
            a[perm[i]] = map(ai);
        }
        let pair = self.pair.iter().map(|(&(i, j), s)| ((perm[i], perm[j]), map(s))).collect();
        Self { n: self.n, a, pair, provenance: self.provenance }
    }

    pub fn derive(&self) -> Result<DerivedNeighborhoods> {
        let n_sets = reverse_neighborhoods(self);
        let d_sets = pair_interference(self)?;
        let (kappa, tau) = kappa_tau_from(self, &n_sets, &d_sets);
        Ok(DerivedNeighborhoods { n_sets, d_sets, kappa, tau })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let a: Vec<Vec<usize>> = self.a.iter().map(|s| s.iter().map(|x| x + 1).collect()).collect();
        let a2: Vec<_> = self
            .pair
            .iter()
            .map(|(&(i, j), s)| {
                serde_json::json!({"i": i + 1, "j": j + 1, "set": s.iter().map(|x| x + 1).collect::<Vec<_>>()})
            })
            .collect();
        serde_json::json!({"n": self.n, "A": a, "A2": a2})
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct PairJson {
            i: usize,
            j: usize,
            set: Vec<usize>,
        }
        #[derive(Deserialize)]
        struct SysJson {
            n: usize,
            #[serde(rename = "A")]
            a: Vec<Vec<usize>>,
            #[serde(rename = "A2", default)]
            a2: Option<Vec<PairJson>>,
        }
        let raw: SysJson = serde_json::from_value(value.clone()).map_err(|e| Error::Config(e.to_string()))?;
        if raw.a.len() != raw.n {
            return Err(Error::InvalidSystem(format!("n = {} but {} sets given", raw.n, raw.a.len())));
        }
        let dec = |v: &[usize]| -> Result<Vec<usize>> {
            v.iter()
                .map(|&x| x.checked_sub(1).ok_or_else(|| Error::InvalidSystem("indices are 1-based".into())))
                .collect()
        };
        let a = raw.a.iter().map(|s| dec(s)).collect::<Result<Vec<_>>>()?;
        match raw.a2 {
            None => Ok(Self::with_default_cover(a, Provenance::Declared)),
            Some(list) => {
                let mut pair = BTreeMap::new();
                for p in list {
                    if p.i == 0 || p.j == 0 {
                        return Err(Error::InvalidSystem("indices are 1-based".into()));
                    }
                    pair.insert((p.i - 1, p.j - 1), dec(&p.set)?);
                }
                Ok(Self::new(a, pair, Provenance::Declared))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedNeighborhoods {
    /// `N_i = {k : i ∈ A_k}`.
    pub n_sets: Vec<Vec<usize>>,
    /// `D_i = {(k, l) : l ∈ A_k, i ∈ A_kl}`.
    pub d_sets: Vec<Vec<(usize, usize)>>,
    pub kappa: usize,
    pub tau: usize,
}

impl DerivedNeighborhoods {
    /// `N_A = {k : A_k ∩ A ≠ ∅}`.
    pub fn n_of_set(&self, set: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        for &x in set {
            out.extend_from_slice(&self.n_sets[x]);
        }
        sorted_set(out)
    }

    /// `D_A = {(i, j) : j ∈ A_i, A ∩ A_ij ≠ ∅}`.
    pub fn d_of_set(&self, set: &[usize]) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for &x in set {
            out.extend_from_slice(&self.d_sets[x]);
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

pub fn reverse_neighborhoods(sys: &NeighborhoodSystem) -> Vec<Vec<usize>> {
    let mut n_sets = vec![Vec::new(); sys.n];
    for (k, ak) in sys.a.iter().enumerate() {
        for &i in ak {
            if i < sys.n {
                n_sets[i].push(k);
            }
        }
    }
    n_sets
}

pub fn pair_interference(sys: &NeighborhoodSystem) -> Result<Vec<Vec<(usize, usize)>>> {
    let mut d_sets = vec![Vec::new(); sys.n];
    for (k, ak) in sys.a.iter().enumerate() {
        for &l in ak {
            let akl = sys.pair.get(&(k, l)).ok_or(Error::MissingPairCover(k, l))?;
            for &i in akl {
                if i < sys.n {
                    d_sets[i].push((k, l));
                }
            }
        }
    }
    Ok(d_sets)
}

fn kappa_tau_from(sys: &NeighborhoodSystem, n_sets: &[Vec<usize>], d_sets: &[Vec<(usize, usize)>]) -> (usize, usize) {
    let max_n = n_sets.iter().map(Vec::len).max().unwrap_or(0);
    let max_pair = sys.pair.values().map(Vec::len).max().unwrap_or(0);
    let tau = d_sets.iter().map(Vec::len).max().unwrap_or(0);
    (max_n.max(max_pair), tau)
}

/// `κ = max(max |N_i|, max |A_ij|)`, `τ = max |D_i|`.
pub fn kappa_tau(derived: &DerivedNeighborhoods, sys: &NeighborhoodSystem) -> (usize, usize) {
    kappa_tau_from(sys, &derived.n_sets, &derived.d_sets)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OutOfRange { owner: String, index: usize },
    EmptyNeighborhood { i: usize },
    NotReflexive { i: usize },
    MissingPair { i: usize, j: usize },
    ExtraPair { i: usize, j: usize },
    NotContained { i: usize, j: usize, missing: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutOfRange { owner, index } => write!(f, "{owner}: index {} out of range", index + 1),
            Violation::EmptyNeighborhood { i } => write!(f, "A_{} is empty", i + 1),
            Violation::NotReflexive { i } => write!(f, "{} not in A_{}", i + 1, i + 1),
            Violation::MissingPair { i, j } => write!(f, "no A_({},{}) for {} in A_{}", i + 1, j + 1, j + 1, i + 1),
            Violation::ExtraPair { i, j } => {
                write!(f, "A_({},{}) given but {} not in A_{}", i + 1, j + 1, j + 1, i + 1)
            }
            Violation::NotContained { i, j, missing } => {
                write!(f, "A_({},{}) misses {} from A_{}", i + 1, j + 1, missing + 1, i + 1)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Non-fatal observations: `j ∉ A_ij` or `A_j ⊄ A_ij`.
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_structure(sys: &NeighborhoodSystem) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = sys.n;
    for (i, ai) in sys.a.iter().enumerate() {
        if ai.is_empty() {
            report.violations.push(Violation::EmptyNeighborhood { i });
        }
        for &x in ai.iter().filter(|&&x| x >= n) {
            report.violations.push(Violation::OutOfRange { owner: format!("A_{}", i + 1), index: x });
        }
        if !contains(ai, i) {
            report.violations.push(Violation::NotReflexive { i });
        }
        for &j in ai.iter().filter(|&&j| j < n) {
            match sys.pair.get(&(i, j)) {
                None => report.violations.push(Violation::MissingPair { i, j }),
                Some(aij) => {
                    for &x in ai.iter().filter(|&&x| !contains(aij, x)) {
                        report.violations.push(Violation::NotContained { i, j, missing: x });
                    }
                    if !contains(aij, j) {
                        report.warnings.push(format!("{} not in A_({},{})", j + 1, i + 1, j + 1));
                    } else if sys.a[j].iter().any(|x| !contains(aij, *x)) {
                        report.warnings.push(format!("A_{} not contained in A_({},{})", j + 1, i + 1, j + 1));
                    }
                }
            }
        }
    }
    for (&(i, j), set) in &sys.pair {
        if i >= n || j >= n {
            report.violations.push(Violation::OutOfRange { owner: "A2 key".into(), index: i.max(j) });
            continue;
        }
        if !contains(&sys.a[i], j) {
            report.violations.push(Violation::ExtraPair { i, j });
        }
        for &x in set.iter().filter(|&&x| x >= n) {
            report.violations.push(Violation::OutOfRange { owner: format!("A_({},{})", i + 1, j + 1), index: x });
        }
    }
    report
}
