//! Moment tables: per-index `L_p` norms, `σ²`, `λ` and kernel quantities.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::fields::{for_each_outcome, LatentSourceField, SourceDist};
use crate::neighborhood::{union_sorted, NeighborhoodSystem};
use crate::par::map_range;
use crate::rng::stream_rng;
use crate::sum::pairwise_sum;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentMode {
    Exact,
    MonteCarlo { reps: u64, batches: usize },
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTable {
    pub l2: Vec<f64>,
    pub l3: Vec<f64>,
    pub l4: Vec<f64>,
    pub se2: Option<Vec<f64>>,
    pub se3: Option<Vec<f64>>,
    pub se4: Option<Vec<f64>>,
    pub sigma2: f64,
    pub sigma2_se: Option<f64>,
    pub kappa: usize,
    pub mode: MomentMode,
    pub extras: BTreeMap<String, f64>,
}

impl MomentTable {
    /// Table from known norms.
    pub fn analytic(l2: Vec<f64>, l3: Vec<f64>, l4: Vec<f64>, sigma2: f64, kappa: usize) -> Self {
        Self {
            l2,
            l3,
            l4,
            se2: None,
            se3: None,
            se4: None,
            sigma2,
            sigma2_se: None,
            kappa,
            mode: MomentMode::Analytic,
            extras: BTreeMap::new(),
        }
    }

    /// `n` identical entries.
    pub fn homogeneous(n: usize, l2: f64, l3: f64, l4: f64, sigma2: f64, kappa: usize) -> Self {
        Self::analytic(vec![l2; n], vec![l3; n], vec![l4; n], sigma2, kappa)
    }

    pub fn n(&self) -> usize {
        self.l2.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.sigma2 > 0.0)
    }

    /// `λ = κ Σ ‖X_i‖₂² / σ²`.
    pub fn lambda(&self) -> Option<f64> {
        (!self.is_degenerate()).then(|| self.kappa as f64 * self.sum_pow(2, 2) / self.sigma2)
    }

    /// `Σ_i ‖X_i‖_p^k`.
    pub fn sum_pow(&self, p: u8, k: i32) -> f64 {
        let v: Vec<f64> = self.norms(p).iter().map(|x| x.powi(k)).collect();
        pairwise_sum(&v)
    }

    pub fn norms(&self, p: u8) -> &[f64] {
        match p {
            2 => &self.l2,
            3 => &self.l3,
            4 => &self.l4,
            _ => panic!("norm order must be 2, 3 or 4"),
        }
    }

    /// Table of `cX`.
    pub fn scaled(&self, c: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| x * c.abs()).collect();
        let so = |v: &Option<Vec<f64>>| v.as_ref().map(s);
        Self {
            l2: s(&self.l2),
            l3: s(&self.l3),
            l4: s(&self.l4),
            se2: so(&self.se2),
            se3: so(&self.se3),
            se4: so(&self.se4),
            sigma2: self.sigma2 * c * c,
            sigma2_se: self.sigma2_se.map(|x| x * c * c),
            ..self.clone()
        }
    }

    /// Table with indices permuted by `i ↦ perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let p = |v: &Vec<f64>| {
            let mut out = vec![0.0; v.len()];
            for (i, x) in v.iter().enumerate() {
                out[perm[i]] = *x;
            }
            out
        };
        Self {
            l2: p(&self.l2),
            l3: p(&self.l3),
            l4: p(&self.l4),
            se2: self.se2.as_ref().map(p),
            se3: self.se3.as_ref().map(p),
            se4: self.se4.as_ref().map(p),
            ..self.clone()
        }
    }

    pub fn lp_monotone(&self) -> bool {
        let tol = |a: f64| 1e-12 * a.abs().max(1e-300);
        (0..self.n()).all(|i| self.l2[i] <= self.l3[i] + tol(self.l3[i]) && self.l3[i] <= self.l4[i] + tol(self.l4[i]))
    }

    pub fn header_json(&self) -> serde_json::Value {
        serde_json::json!({
            "sigma2": self.sigma2,
            "sigma2_se": self.sigma2_se,
            "lambda": self.lambda(),
            "kappa": self.kappa,
            "mode": self.mode,
            "extras": self.extras,
        })
    }

    /// CSV body with columns `index,l2,l3,l4,se2,se3,se4` (1-based index).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,l2,l3,l4,se2,se3,se4\n");
        let se = |v: &Option<Vec<f64>>, i: usize| v.as_ref().map_or(String::new(), |v| format!("{:e}", v[i]));
        for i in 0..self.n() {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{},{},{}",
                i + 1,
                self.l2[i],
                self.l3[i],
                self.l4[i],
                se(&self.se2, i),
                se(&self.se3, i),
                se(&self.se4, i)
            );
        }
        out
    }
}

fn atoms_of(field: &LatentSourceField, support: &[usize]) -> Result<Vec<(usize, Vec<(f64, f64)>)>> {
    support
        .iter()
        .map(|&s| {
            field.sources()[s]
                .atoms()
                .map(|a| (s, a))
                .ok_or_else(|| Error::InvalidArgument("exact moments need finite-discrete sources".into()))
        })
        .collect()
}

fn check_count(atoms: &[(usize, Vec<(f64, f64)>)], cap: u128) -> Result<()> {
    let size = atoms.iter().map(|(_, a)| a.len() as u128).fold(1u128, u128::saturating_mul);
    if size > cap {
        return Err(Error::EnumerationCapExceeded { size, cap });
    }
    Ok(())
}

/// Exact table by local enumeration. `σ²` is `Σ_i Σ_{j∈A_i} Cov(X_i, X_j)`;
/// when the whole outcome space fits in `cap` the full `Var(S)` is recorded
/// as the extra `sigma2_full`.
pub fn exact_moment_table(field: &LatentSourceField, sys: &NeighborhoodSystem, cap: u128) -> Result<MomentTable> {
    let n = field.len();
    let sup = |i: usize| -> Vec<usize> { field.support(i).iter().map(|&s| s as usize).collect() };
    let per_index = map_range(n, |i| -> Result<[f64; 4]> {
        let atoms = atoms_of(field, &sup(i))?;
        check_count(&atoms, cap)?;
        let mut buf = vec![0.0; field.sources().len()];
        let mut acc = [0.0; 4];
        for_each_outcome(&atoms, &mut buf, |b, p| {
            let x = field.evaluate_index(i, b);
            acc[0] += p * x;
            acc[1] += p * x * x;
            acc[2] += p * x.abs().powi(3);
            acc[3] += p * x.powi(4);
        });
        Ok(acc)
    });
    let per_index = per_index.into_iter().collect::<Result<Vec<_>>>()?;
    let cov_rows = map_range(n, |i| -> Result<f64> {
        let mut buf = vec![0.0; field.sources().len()];
        let mut row = Vec::with_capacity(sys.a(i).len());
        for &j in sys.a(i) {
            let atoms = atoms_of(field, &union_sorted(&sup(i), &sup(j)))?;
            check_count(&atoms, cap)?;
            let mut exy = 0.0;
            for_each_outcome(&atoms, &mut buf, |b, p| {
                exy += p * field.evaluate_index(i, b) * field.evaluate_index(j, b)
            });
            row.push(exy - per_index[i][0] * per_index[j][0]);
        }
        Ok(pairwise_sum(&row))
    });
    let cov_rows = cov_rows.into_iter().collect::<Result<Vec<_>>>()?;
    let sigma2 = pairwise_sum(&cov_rows);
    let kappa = sys.derive().map(|d| d.kappa).unwrap_or(0);
    let mut table = MomentTable::analytic(
        per_index.iter().map(|a| a[1].sqrt()).collect(),
        per_index.iter().map(|a| a[2].cbrt()).collect(),
        per_index.iter().map(|a| a[3].sqrt().sqrt()).collect(),
        sigma2,
        kappa,
    );
    table.mode = MomentMode::Exact;
    if field.outcome_count().is_some_and(|c| c <= cap && c.saturating_mul(n as u128) <= 1 << 28) {
        table.extras.insert("sigma2_full".into(), full_variance(field));
    }
    Ok(table)
}

fn full_variance(field: &LatentSourceField) -> f64 {
    let atoms: Vec<_> = field.sources().iter().enumerate().map(|(s, d)| (s, d.atoms().unwrap())).collect();
    let mut buf = vec![0.0; field.sources().len()];
    let mut x = vec![0.0; field.len()];
    let (mut m1, mut m2) = (0.0, 0.0);
    for_each_outcome(&atoms, &mut buf, |b, p| {
        field.evaluate_at(b, &mut x);
        let s = pairwise_sum(&x);
        m1 += p * s;
        m2 += p * s * s;
    });
    m2 - m1 * m1
}

/// Monte-Carlo table with batch-means standard errors.
pub fn mc_moment_table(
    field: &LatentSourceField,
    sys: &NeighborhoodSystem,
    reps: u64,
    master_seed: u64,
    batches: usize,
) -> Result<MomentTable> {
    if reps < 1000 {
        return Err(Error::InvalidArgument("Monte-Carlo tables need at least 1000 replications".into()));
    }
    let batches = batches.clamp(2, reps as usize);
    let n = field.len();
    // per batch: Σ|X|^2, Σ|X|^3, Σ|X|^4 per index, then ΣS, ΣS², count
    let per_batch = map_range(batches, |b| {
        let lo = reps * b as u64 / batches as u64;
        let hi = reps * (b as u64 + 1) / batches as u64;
        let mut acc = vec![0.0; 3 * n];
        let (mut s1, mut s2) = (0.0, 0.0);
        let mut src = vec![0.0; field.sources().len()];
        let mut x = vec![0.0; n];
        for r in lo..hi {
            let mut rng = stream_rng(master_seed, 0, r);
            field.sample_with(&mut rng, &mut src, &mut x);
            for (i, &v) in x.iter().enumerate() {
                let a = v.abs();
                acc[3 * i] += a * a;
                acc[3 * i + 1] += a * a * a;
                acc[3 * i + 2] += a * a * a * a;
            }
            let s = pairwise_sum(&x);
            s1 += s;
            s2 += s * s;
        }
        (acc, s1, s2, (hi - lo) as f64)
    });
    let total = reps as f64;
    let mut norms = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut ses = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let bf = batches as f64;
    for i in 0..n {
        for k in 0..3 {
            let p = (k + 2) as f64;
            let means: Vec<f64> = per_batch.iter().map(|(a, _, _, c)| a[3 * i + k] / c).collect();
            let m = per_batch.iter().map(|(a, ..)| a[3 * i + k]).sum::<f64>() / total;
            let var_b = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (bf - 1.0);
            let se_m = (var_b / bf).sqrt();
            norms[k][i] = m.powf(1.0 / p);
            ses[k][i] = if m > 0.0 { se_m * m.powf(1.0 / p - 1.0) / p } else { 0.0 };
        }
    }
    let s1: f64 = per_batch.iter().map(|t| t.1).sum();
    let s2: f64 = per_batch.iter().map(|t| t.2).sum();
    let sigma2 = ((s2 - s1 * s1 / total) / (total - 1.0)).max(0.0);
    let batch_vars: Vec<f64> = per_batch.iter().map(|(_, a, b, c)| (b - a * a / c) / (c - 1.0)).collect();
    let bv_mean = batch_vars.iter().sum::<f64>() / bf;
    let sigma2_se = (batch_vars.iter().map(|v| (v - bv_mean).powi(2)).sum::<f64>() / (bf - 1.0) / bf).sqrt();
    let [l2, l3, l4] = norms;
    let [se2, se3, se4] = ses;
    let kappa = sys.derive().map(|d| d.kappa).unwrap_or(0);
    Ok(MomentTable {
        l2,
        l3,
        l4,
        se2: Some(se2),
        se3: Some(se3),
        se4: Some(se4),
        sigma2,
        sigma2_se: Some(sigma2_se),
        kappa,
        mode: MomentMode::MonteCarlo { reps, batches },
        extras: BTreeMap::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HoeffdingProjection {
    pub theta: f64,
    pub sigma1: f64,
    /// `Var h(X_1, …, X_m)`.
    pub var_h: f64,
    /// `‖h‖₄`.
    pub h_l4: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectionMethod {
    Exact,
    MonteCarlo { outer: u64, inner: u64, seed: u64 },
}

/// `σ₁² = Var(E[h(X_1, …, X_m) | X_1])`.
pub fn hoeffding_sigma1(
    kernel: &dyn Fn(&[f64]) -> f64,
    m: usize,
    dist: &SourceDist,
    method: ProjectionMethod,
) -> Result<HoeffdingProjection> {
    if m == 0 {
        return Err(Error::InvalidArgument("kernel degree must be positive".into()));
    }
    let proj = match method {
        ProjectionMethod::Exact => {
            let atoms =
                dist.atoms().ok_or_else(|| Error::InvalidArgument("exact projection needs a discrete law".into()))?;
            let all: Vec<_> = (0..m).map(|s| (s, atoms.clone())).collect();
            let mut buf = vec![0.0; m];
            let (mut e1, mut e2, mut e4) = (0.0, 0.0, 0.0);
            for_each_outcome(&all, &mut buf, |b, p| {
                let h = kernel(b);
                e1 += p * h;
                e2 += p * h * h;
                e4 += p * h.powi(4);
            });
            let rest: Vec<_> = (1..m).map(|s| (s, atoms.clone())).collect();
            let mut s1 = 0.0;
            for &(x, px) in &atoms {
                buf[0] = x;
                let mut g = 0.0;
                if rest.is_empty() {
                    g = kernel(&buf);
                } else {
                    for_each_outcome(&rest, &mut buf, |b, p| g += p * kernel(b));
                }
                s1 += px * (g - e1).powi(2);
            }
            HoeffdingProjection { theta: e1, sigma1: s1.sqrt(), var_h: e2 - e1 * e1, h_l4: e4.sqrt().sqrt() }
        }
        ProjectionMethod::MonteCarlo { outer, inner, seed } => {
            let mut rng = stream_rng(seed, 1, 0);
            let mut buf = vec![0.0; m];
            let (mut e1, mut e2, mut e4) = (0.0, 0.0, 0.0);
            let draws = outer * inner;
            for _ in 0..draws {
                for b in buf.iter_mut() {
                    *b = dist.sample(&mut rng);
                }
                let h = kernel(&buf);
                e1 += h;
                e2 += h * h;
                e4 += h.powi(4);
            }
            let d = draws as f64;
            let theta = e1 / d;
            // two independent inner means per outer draw give an unbiased g²
            let mut cross = 0.0;
            for _ in 0..outer {
                let x = dist.sample(&mut rng);
                let mut g = [0.0; 2];
                for gk in g.iter_mut() {
                    for _ in 0..inner {
                        buf[0] = x;
                        for b in buf[1..].iter_mut() {
                            *b = dist.sample(&mut rng);
                        }
                        *gk += kernel(&buf);
                    }
                    *gk = *gk / inner as f64 - theta;
                }
                cross += g[0] * g[1];
            }
            HoeffdingProjection {
                theta,
                sigma1: (cross / outer as f64).max(0.0).sqrt(),
                var_h: e2 / d - theta * theta,
                h_l4: (e4 / d).sqrt().sqrt(),
            }
        }
    };
    if proj.sigma1 <= 1e-10 * proj.var_h.sqrt().max(1.0) {
        return Err(Error::DegenerateKernel(proj.sigma1));
    }
    Ok(proj)
}
