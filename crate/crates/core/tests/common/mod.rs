#![allow(dead_code)]

use std::collections::BTreeMap;

use locdep::moments::MomentTable;
use locdep::neighborhood::{NeighborhoodSystem, Provenance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random system on `n` indices: reflexive `A_i` of size up to `width`, pair sets
/// `A_i ∪ A_j` plus a few random extras.
pub fn random_system(n: usize, width: usize, seed: u64) -> NeighborhoodSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut s = vec![i];
            for _ in 0..rng.random_range(0..width.max(1)) {
                s.push(rng.random_range(0..n));
            }
            s.sort_unstable();
            s.dedup();
            s
        })
        .collect();
    let mut pair = BTreeMap::new();
    for i in 0..n {
        for &j in &a[i] {
            let mut s: Vec<usize> = a[i].iter().chain(&a[j]).copied().collect();
            if rng.random_bool(0.3) {
                s.push(rng.random_range(0..n));
            }
            s.sort_unstable();
            s.dedup();
            pair.insert((i, j), s);
        }
    }
    NeighborhoodSystem::new(a, pair, Provenance::Declared)
}

/// Random monotone norms `‖X‖₂ ≤ ‖X‖₃ ≤ ‖X‖₄` with `σ² = Σ‖X‖₂²`.
pub fn random_table(n: usize, kappa: usize, seed: u64) -> MomentTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut l2 = Vec::with_capacity(n);
    let mut l3 = Vec::with_capacity(n);
    let mut l4 = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = rng.random_range(0.2..2.0);
        let b = a * rng.random_range(1.0..1.5);
        let c = b * rng.random_range(1.0..1.5);
        l2.push(a);
        l3.push(b);
        l4.push(c);
    }
    let sigma2 = l2.iter().map(|x| x * x).sum();
    MomentTable::analytic(l2, l3, l4, sigma2, kappa)
}

fn member(set: &[usize], x: usize) -> bool {
    set.iter().any(|&y| y == x)
}

/// Naive `N`/`D` recomputation and literal β evaluation by nested loops.
pub struct Naive<'a> {
    pub sys: &'a NeighborhoodSystem,
    pub n_sets: Vec<Vec<usize>>,
    pub d_sets: Vec<Vec<(usize, usize)>>,
}

impl<'a> Naive<'a> {
    pub fn new(sys: &'a NeighborhoodSystem) -> Self {
        let n = sys.n();
        let n_sets = (0..n).map(|i| (0..n).filter(|&k| member(sys.a(k), i)).collect()).collect();
        let mut d_sets = vec![Vec::new(); n];
        for (i, d) in d_sets.iter_mut().enumerate() {
            for k in 0..n {
                for l in 0..n {
                    if member(sys.a(k), l) && member(sys.pair_set(k, l).unwrap(), i) {
                        d.push((k, l));
                    }
                }
            }
        }
        Self { sys, n_sets, d_sets }
    }

    pub fn kappa_tau(&self) -> (usize, usize) {
        let n = self.sys.n();
        let mut kappa = 0;
        for i in 0..n {
            kappa = kappa.max(self.n_sets[i].len());
            for &j in self.sys.a(i) {
                kappa = kappa.max(self.sys.pair_set(i, j).unwrap().len());
            }
        }
        (kappa, self.d_sets.iter().map(Vec::len).max().unwrap_or(0))
    }

    fn in_a(&self, i: usize, x: usize) -> bool {
        member(self.sys.a(i), x)
    }

    fn in_n(&self, i: usize, x: usize) -> bool {
        member(&self.n_sets[i], x)
    }

    /// `(β₁, β₂, β₃)` with `x = ‖X‖₄`.
    pub fn beta(&self, x: &[f64], sigma2: f64) -> [f64; 3] {
        let n = self.sys.n();
        let s = sigma2.sqrt();
        let size = |i: usize| self.sys.a(i).len() as f64;
        let mut b1 = 0.0;
        for i in 0..n {
            b1 += size(i).powi(2) * x[i].powi(3);
            for j in 0..n {
                if self.in_a(i, j) {
                    b1 += size(i) * x[j].powi(3);
                }
            }
        }
        let mut b2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if !self.in_a(i, j) {
                    continue;
                }
                let aij = self.sys.pair_set(i, j).unwrap();
                for k in 0..n {
                    if !member(aij, k) {
                        continue;
                    }
                    for l in 0..n {
                        if self.in_a(k, l) || self.in_n(k, l) {
                            b2 += x[i] * x[j] * x[k] * x[l];
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if self.in_a(i, j) || self.in_n(i, j) {
                    b2 += size(i).powi(2) * x[i].powi(3) * x[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if !self.in_a(i, j) {
                    continue;
                }
                for k in 0..n {
                    if self.in_a(i, k) || self.in_n(j, k) || self.in_a(j, k) {
                        b2 += size(i) * x[j].powi(3) * x[k];
                    }
                }
            }
        }
        let mut b3 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if self.in_a(i, j) || self.in_n(i, j) {
                    for k in 0..n {
                        if self.in_n(j, k) {
                            b3 += size(i).powi(2) * x[i].powi(3) * x[j] * x[k];
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if !self.in_a(i, j) {
                    continue;
                }
                for k in 0..n {
                    if self.in_a(i, k) || self.in_n(j, k) {
                        for l in 0..n {
                            if self.in_n(k, l) {
                                b3 += size(i) * x[j].powi(3) * x[k] * x[l];
                            }
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for &(j, k) in &self.d_sets[i] {
                b3 += size(i).powi(2) * x[i].powi(3) * x[j] * x[k];
            }
            for j in 0..n {
                if self.in_a(i, j) {
                    for &(k, l) in &self.d_sets[j] {
                        b3 += size(i) * x[j].powi(3) * x[k] * x[l];
                    }
                }
            }
        }
        [b1 / (s * sigma2), b2.sqrt() / sigma2, (b3 / (sigma2 * sigma2 * s)).sqrt()]
    }
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}
