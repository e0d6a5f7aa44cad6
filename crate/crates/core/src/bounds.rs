//! Berry–Esseen bound shapes (absolute constants set to 1) and the
//! components of the concentration inequalities.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use crate::moments::MomentTable;
use crate::neighborhood::{union_sorted, DerivedNeighborhoods, NeighborhoodSystem};
use crate::par::map_range;
use crate::sum::pairwise_sum;
use crate::{Error, Result};

pub const DEFAULT_BUDGET: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ConstantPolicy {
    /// Unspecified absolute constant replaced by 1.
    ShapeC1,
    Explicit(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub n: usize,
    pub kappa: Option<usize>,
    pub tau: Option<usize>,
    pub lambda: Option<f64>,
    pub sigma: f64,
    pub sum_l2_sq: f64,
    pub sum_l4_cube: f64,
    pub sum_l4_quad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub theorem: String,
    pub shape: f64,
    pub terms: Vec<Term>,
    pub constant: ConstantPolicy,
    pub digest: InputDigest,
    /// First-order uncertainty band when the moments are estimates.
    pub band: Option<[f64; 2]>,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("reports serialize")
    }
}

/// CSV rows `n,theorem,term,value` for a grid of reports; the total appears as term `shape`.
pub fn grid_csv(rows: &[(f64, &BoundReport)]) -> String {
    let mut out = String::from("n,theorem,term,value\n");
    for (n, r) in rows {
        let _ = writeln!(out, "{n},{},shape,{:e}", r.theorem, r.shape);
        for t in &r.terms {
            let _ = writeln!(out, "{n},{},{},{:e}", r.theorem, t.name, t.value);
        }
    }
    out
}

/// Aggregates a shape depends on.
#[derive(Debug, Clone, Copy)]
struct Agg {
    t2: f64,
    t3: f64,
    t4: f64,
    sigma2: f64,
}

fn agg(table: &MomentTable) -> Agg {
    Agg { t2: table.sum_pow(2, 2), t3: table.sum_pow(4, 3), t4: table.sum_pow(4, 4), sigma2: table.sigma2 }
}

fn digest(table: &MomentTable, kappa: Option<usize>, tau: Option<usize>) -> InputDigest {
    let a = agg(table);
    InputDigest {
        n: table.n(),
        kappa,
        tau,
        lambda: table.lambda(),
        sigma: table.sigma(),
        sum_l2_sq: a.t2,
        sum_l4_cube: a.t3,
        sum_l4_quad: a.t4,
    }
}

/// ±2 standard-error band from linearizing `f` in the aggregates.
fn band(table: &MomentTable, f: &dyn Fn(Agg) -> f64) -> Option<[f64; 2]> {
    let (se2, se4) = (table.se2.as_ref()?, table.se4.as_ref()?);
    let base = agg(table);
    let partial = |k: usize| {
        let mut lo = base;
        let mut hi = base;
        fn slot(a: &mut Agg, k: usize) -> &mut f64 {
            match k {
                0 => &mut a.t2,
                1 => &mut a.t3,
                2 => &mut a.t4,
                _ => &mut a.sigma2,
            }
        }
        let v = *slot(&mut lo, k);
        let h = 1e-6 * v.abs().max(1e-12);
        *slot(&mut lo, k) = v - h;
        *slot(&mut hi, k) = v + h;
        (f(hi) - f(lo)) / (2.0 * h)
    };
    let (d2, d3, d4, ds) = (partial(0), partial(1), partial(2), partial(3));
    let mut var = (ds * table.sigma2_se.unwrap_or(0.0)).powi(2);
    for i in 0..table.n() {
        let x4 = table.l4[i];
        var += (d2 * 2.0 * table.l2[i] * se2[i]).powi(2);
        var += ((d3 * 3.0 * x4 * x4 + d4 * 4.0 * x4 * x4 * x4) * se4[i]).powi(2);
    }
    let center = f(base);
    let w = 2.0 * var.sqrt();
    Some([(center - w).max(0.0), center + w])
}

fn require_sigma(table: &MomentTable) -> Result<()> {
    if table.is_degenerate() {
        return Err(Error::DegenerateVariance);
    }
    Ok(())
}

fn report(
    theorem: &str,
    table: &MomentTable,
    kappa: Option<usize>,
    tau: Option<usize>,
    terms: Vec<(&str, f64)>,
    f: &dyn Fn(Agg) -> f64,
) -> BoundReport {
    let shape = f(agg(table));
    BoundReport {
        theorem: theorem.into(),
        shape,
        terms: terms.into_iter().map(|(n, v)| Term { name: n.into(), value: v }).collect(),
        constant: ConstantPolicy::ShapeC1,
        digest: digest(table, kappa, tau),
        band: band(table, f),
        notes: Vec::new(),
    }
}

fn main_terms(a: Agg, kappa: f64, tau: f64) -> (f64, f64) {
    let s = a.sigma2.sqrt();
    (kappa * kappa * a.t3 / (s * a.sigma2), kappa.sqrt() * (kappa + tau.sqrt()) * a.t4.sqrt() / a.sigma2)
}

/// `κ² σ⁻³ Σ‖X_i‖₄³ + κ^{1/2}(κ + τ^{1/2}) σ⁻² (Σ‖X_i‖₄⁴)^{1/2}`.
pub fn bound_main(table: &MomentTable, kappa: usize, tau: usize) -> Result<BoundReport> {
    require_sigma(table)?;
    let (k, t) = (kappa as f64, tau as f64);
    let f = move |a: Agg| {
        let (x, y) = main_terms(a, k, t);
        x + y
    };
    let (x, y) = main_terms(agg(table), k, t);
    Ok(report("main", table, Some(kappa), Some(tau), vec![("third_moment", x), ("fourth_moment", y)], &f))
}

/// `λ` times the main shape, `λ = κ Σ‖X_i‖₂² / σ²`.
pub fn bound_self_normalized(table: &MomentTable, kappa: usize, tau: usize) -> Result<BoundReport> {
    require_sigma(table)?;
    let (k, t) = (kappa as f64, tau as f64);
    let f = move |a: Agg| {
        let (x, y) = main_terms(a, k, t);
        k * a.t2 / a.sigma2 * (x + y)
    };
    let a = agg(table);
    let lambda = k * a.t2 / a.sigma2;
    let (x, y) = main_terms(a, k, t);
    Ok(report(
        "self_normalized",
        table,
        Some(kappa),
        Some(tau),
        vec![("third_moment", lambda * x), ("fourth_moment", lambda * y), ("lambda", lambda)],
        &f,
    )
    .without_factor_terms(&["lambda"]))
}

impl BoundReport {
    /// Marks terms that are multiplicative factors rather than summands.
    fn without_factor_terms(mut self, factors: &[&str]) -> Self {
        for f in factors {
            self.notes.push(format!("{f} is a factor, not a summand"));
        }
        self
    }

    /// Sum of the summand terms (excludes factor terms).
    pub fn summand_total(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| !self.notes.iter().any(|n| n.starts_with(&format!("{} is a factor", t.name))))
            .map(|t| t.value)
            .sum()
    }
}

/// Raw nested sums shared by the general bound and the concentration inequality.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct NestedSums {
    /// `Σ |A_i|² x_i³`
    pub b1_self: f64,
    /// `Σ_i Σ_{j∈A_i} |A_i| x_j³`
    pub b1_cross: f64,
    /// `Σ_i Σ_{j∈A_i} Σ_{k∈A_ij} Σ_{l∈A_k∪N_k} x_i x_j x_k x_l`
    pub quad: f64,
    /// `Σ_i Σ_{j∈A_i∪N_i} |A_i|² x_i³ x_j`
    pub cube_self: f64,
    /// `Σ_i Σ_{j∈A_i} Σ_{k∈A_i∪N_j∪A_j} |A_i| x_j³ x_k`
    pub cube_cross: f64,
    /// Same as `cube_cross` with `k ∈ A_i ∪ N_j`.
    pub cube_cross_narrow: f64,
    /// `Σ_i |A_i|² Σ_{j∈A_i∪N_i} Σ_{k∈N_j} x_i³ x_j x_k`
    pub fifth_1: f64,
    /// `Σ_i Σ_{j∈A_i} Σ_{k∈A_i∪N_j} Σ_{l∈N_k} |A_i| x_j³ x_k x_l`
    pub fifth_2: f64,
    /// `Σ_i Σ_{(j,k)∈D_i} |A_i|² x_i³ x_j x_k`
    pub fifth_3: f64,
    /// `Σ_i Σ_{j∈A_i} Σ_{(k,l)∈D_j} |A_i| x_j³ x_k x_l`
    pub fifth_4: f64,
}

/// Evaluates the nested sums with `x = ‖X‖₄`, refusing beyond `budget` term visits.
pub fn nested_sums(
    x: &[f64],
    sys: &NeighborhoodSystem,
    derived: &DerivedNeighborhoods,
    budget: u64,
) -> Result<NestedSums> {
    let n = sys.n();
    let visits = AtomicU64::new(0);
    let charge = |k: usize| -> Result<()> {
        let v = visits.fetch_add(k as u64, Ordering::Relaxed) + k as u64;
        if v > budget {
            Err(Error::ComplexityCapExceeded { budget })
        } else {
            Ok(())
        }
    };
    let sum_over = |set: &[usize]| -> f64 { set.iter().map(|&l| x[l]).sum() };
    let a_or_n: Vec<Vec<usize>> = (0..n).map(|i| union_sorted(sys.a(i), &derived.n_sets[i])).collect();
    // w_k = Σ_{l∈A_k∪N_k} x_l, ν_k = Σ_{l∈N_k} x_l, δ_k = Σ_{(j,l)∈D_k} x_j x_l
    let w: Vec<f64> = a_or_n.iter().map(|s| sum_over(s)).collect();
    let nu: Vec<f64> = derived.n_sets.iter().map(|s| sum_over(s)).collect();
    let dd: Vec<f64> = derived.d_sets.iter().map(|s| s.iter().map(|&(j, l)| x[j] * x[l]).sum()).collect();
    charge(a_or_n.iter().map(Vec::len).sum::<usize>() + derived.d_sets.iter().map(Vec::len).sum::<usize>())?;

    let rows = map_range(n, |i| -> Result<[f64; 10]> {
        let ai = sys.a(i);
        let sz = ai.len() as f64;
        let xi3 = x[i].powi(3);
        let mut r = [0.0; 10];
        r[0] = sz * sz * xi3;
        r[3] = sz * sz * xi3 * w[i];
        r[6] = sz * sz * xi3 * a_or_n[i].iter().map(|&j| x[j] * nu[j]).sum::<f64>();
        r[8] = sz * sz * xi3 * dd[i];
        let mut cost = a_or_n[i].len();
        for &j in ai {
            let xj3 = x[j].powi(3);
            r[1] += sz * xj3;
            let aij = sys.pair_set(i, j).ok_or(Error::MissingPairCover(i, j))?;
            r[2] += x[i] * x[j] * aij.iter().map(|&k| x[k] * w[k]).sum::<f64>();
            let wide = union_sorted(ai, &a_or_n[j]);
            let narrow = union_sorted(ai, &derived.n_sets[j]);
            r[4] += sz * xj3 * sum_over(&wide);
            r[5] += sz * xj3 * sum_over(&narrow);
            r[7] += sz * xj3 * narrow.iter().map(|&k| x[k] * nu[k]).sum::<f64>();
            r[9] += sz * xj3 * dd[j];
            cost += aij.len() + wide.len() + 2 * narrow.len() + 1;
        }
        charge(cost)?;
        Ok(r)
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let col = |k: usize| pairwise_sum(&rows.iter().map(|r| r[k]).collect::<Vec<_>>());
    Ok(NestedSums {
        b1_self: col(0),
        b1_cross: col(1),
        quad: col(2),
        cube_self: col(3),
        cube_cross: col(4),
        cube_cross_narrow: col(5),
        fifth_1: col(6),
        fifth_2: col(7),
        fifth_3: col(8),
        fifth_4: col(9),
    })
}

/// `β₁ + β₂ + β₃` with every nested sum evaluated over the stored sets.
pub fn bound_general_beta(
    table: &MomentTable,
    sys: &NeighborhoodSystem,
    derived: &DerivedNeighborhoods,
    budget: u64,
) -> Result<BoundReport> {
    require_sigma(table)?;
    let ns = nested_sums(&table.l4, sys, derived, budget)?;
    let s2 = table.sigma2;
    let s = s2.sqrt();
    let beta1 = (ns.b1_self + ns.b1_cross) / (s2 * s);
    let beta2 = (ns.quad + ns.cube_self + ns.cube_cross).sqrt() / s2;
    let beta3 = ((ns.fifth_1 + ns.fifth_2 + ns.fifth_3 + ns.fifth_4) / (s2 * s2 * s)).sqrt();
    let shape = beta1 + beta2 + beta3;
    Ok(BoundReport {
        theorem: "general_beta".into(),
        shape,
        terms: vec![
            Term { name: "beta1".into(), value: beta1 },
            Term { name: "beta2".into(), value: beta2 },
            Term { name: "beta3".into(), value: beta3 },
        ],
        constant: ConstantPolicy::ShapeC1,
        digest: digest(table, Some(derived.kappa), Some(derived.tau)),
        band: None,
        notes: Vec::new(),
    })
}

fn graph_terms(a: Agg, d: f64) -> (f64, f64) {
    let s = a.sigma2.sqrt();
    (d * d * a.t3 / (a.sigma2 * s), d.powf(1.5) * (a.t4 / (a.sigma2 * a.sigma2)).sqrt())
}

/// Dependency-graph shape `d² Σ‖X_i‖₄³/σ³ + d^{3/2} (Σ‖X_i‖₄⁴/σ⁴)^{1/2}`.
pub fn bound_graph(table: &MomentTable, d: usize) -> Result<BoundReport> {
    require_sigma(table)?;
    let df = d as f64;
    let f = move |a: Agg| {
        let (x, y) = graph_terms(a, df);
        x + y
    };
    let (x, y) = graph_terms(agg(table), df);
    let mut r = report("graph", table, None, None, vec![("third_moment", x), ("fourth_moment", y)], &f);
    if d == 0 {
        r.notes.push("degenerate degree d = 0: both terms vanish".into());
    }
    Ok(r)
}

/// `λ₁` times the dependency-graph shape, `λ₁ = d Σ E|X_i|² / σ²`.
pub fn bound_graph_self_normalized(table: &MomentTable, d: usize) -> Result<BoundReport> {
    require_sigma(table)?;
    let df = d as f64;
    let f = move |a: Agg| {
        let (x, y) = graph_terms(a, df);
        df * a.t2 / a.sigma2 * (x + y)
    };
    let a = agg(table);
    let l1 = df * a.t2 / a.sigma2;
    let (x, y) = graph_terms(a, df);
    let mut r = report(
        "graph_self_normalized",
        table,
        None,
        None,
        vec![("third_moment", l1 * x), ("fourth_moment", l1 * y), ("lambda1", l1)],
        &f,
    )
    .without_factor_terms(&["lambda1"]);
    if d == 0 {
        r.notes.push("degenerate degree d = 0: both terms vanish".into());
    }
    Ok(r)
}

/// Inputs of the distributed U-statistic shapes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributedUInputs {
    pub sigma1: f64,
    pub h_l4: f64,
    /// `Var h(X_1, …, X_m)`.
    pub var_h: f64,
    pub m: usize,
    pub blocks: Vec<usize>,
}

impl DistributedUInputs {
    fn validate(&self) -> Result<()> {
        if let Some(&size) = self.blocks.iter().find(|&&b| b < self.m) {
            return Err(Error::BlockTooSmall { size, m: self.m });
        }
        if !(self.sigma1 > 0.0) {
            return Err(Error::DegenerateKernel(self.sigma1));
        }
        Ok(())
    }

    fn total(&self) -> f64 {
        self.blocks.iter().sum::<usize>() as f64
    }

    fn plain_digest(&self) -> InputDigest {
        InputDigest {
            n: self.blocks.iter().sum(),
            kappa: None,
            tau: None,
            lambda: None,
            sigma: self.sigma1,
            sum_l2_sq: f64::NAN,
            sum_l4_cube: self.h_l4.powi(3),
            sum_l4_quad: self.h_l4.powi(4),
        }
    }

    fn plain(&self, theorem: &str, terms: Vec<(&str, f64)>, shape: f64) -> BoundReport {
        BoundReport {
            theorem: theorem.into(),
            shape,
            terms: terms.into_iter().map(|(n, v)| Term { name: n.into(), value: v }).collect(),
            constant: ConstantPolicy::ShapeC1,
            digest: self.plain_digest(),
            band: None,
            notes: Vec::new(),
        }
    }
}

/// `(m/√N) ‖h‖₄³/σ₁³` for the variance-normalized distributed U-statistic.
pub fn bound_distributed_u(inp: &DistributedUInputs) -> Result<BoundReport> {
    inp.validate()?;
    let v = inp.m as f64 / inp.total().sqrt() * (inp.h_l4 / inp.sigma1).powi(3);
    Ok(inp.plain("distributed_u", vec![("kernel_moment", v)], v))
}

/// The normalized shape plus `(m σ²/(N σ₁²)) Σ n_i/(n_i − m + 1)`.
pub fn bound_distributed_u_unnormalized(inp: &DistributedUInputs) -> Result<BoundReport> {
    inp.validate()?;
    let first = bound_distributed_u(inp)?.shape;
    let second = variance_deviation(inp)?.shape;
    Ok(inp.plain(
        "distributed_u_unnormalized",
        vec![("kernel_moment", first), ("variance_deviation", second)],
        first + second,
    ))
}

/// `|Var(W) − 1|` shape `(m σ²/(N σ₁²)) Σ n_i/(n_i − m + 1)`; the term
/// `explicit` is the constant-free `(1/N) Σ n_i (m−1)² σ²/(m (n_i−m+1) σ₁²)`.
pub fn variance_deviation(inp: &DistributedUInputs) -> Result<BoundReport> {
    inp.validate()?;
    let m = inp.m as f64;
    let ratio = inp.var_h / (inp.sigma1 * inp.sigma1);
    let sum: f64 = inp.blocks.iter().map(|&b| b as f64 / (b as f64 - m + 1.0)).sum();
    let shape = m * ratio / inp.total() * sum;
    let explicit: f64 =
        inp.blocks.iter().map(|&b| b as f64 * (m - 1.0).powi(2) * ratio / (m * (b as f64 - m + 1.0))).sum::<f64>()
            / inp.total();
    let mut r = inp.plain("variance_deviation", vec![("shape", shape), ("explicit", explicit)], shape);
    r.notes.push("explicit is an alternative bound, not a summand".into());
    Ok(r)
}

fn constrained_terms(a: Agg, n: f64, b: f64, s: f64) -> (f64, f64) {
    (n.powf(-b - 0.5) * a.t3 / s.powi(3), n.powf(-b / 2.0 - 0.5) * a.t4.sqrt() / (s * s))
}

/// Estimate of `σ_{f,𝒟}` as `σ_n / n^{b − 1/2}`.
pub fn constrained_sigma(table: &MomentTable, n: usize, b: usize) -> f64 {
    table.sigma() / (n as f64).powf(b as f64 - 0.5)
}

/// `n^{−b−1/2} σ⁻³ Σ‖f_i‖₄³ + n^{−b/2−1/2} σ⁻² (Σ‖f_i‖₄⁴)^{1/2}` with `σ = σ_{f,𝒟}`
/// (estimated from the table when not supplied).
pub fn bound_constrained_u(table: &MomentTable, n: usize, b: usize, sigma_fd: Option<f64>) -> Result<BoundReport> {
    require_sigma(table)?;
    let (nf, bf) = (n as f64, b as f64);
    let fixed = sigma_fd;
    let f = move |a: Agg| {
        let s = fixed.unwrap_or(a.sigma2.sqrt() / nf.powf(bf - 0.5));
        let (x, y) = constrained_terms(a, nf, bf, s);
        x + y
    };
    let a = agg(table);
    let s = sigma_fd.unwrap_or_else(|| constrained_sigma(table, n, b));
    let (x, y) = constrained_terms(a, nf, bf, s);
    let mut r = report("constrained_u", table, None, None, vec![("third_moment", x), ("fourth_moment", y)], &f);
    r.notes.push(format!("b = {b}, sigma_fd = {s:e}"));
    Ok(r)
}

/// The constrained shape times `n^{−b} σ⁻² Σ‖f_i‖₂²`.
pub fn bound_constrained_u_self_normalized(
    table: &MomentTable,
    n: usize,
    b: usize,
    sigma_fd: Option<f64>,
) -> Result<BoundReport> {
    require_sigma(table)?;
    let (nf, bf) = (n as f64, b as f64);
    let fixed = sigma_fd;
    let f = move |a: Agg| {
        let s = fixed.unwrap_or(a.sigma2.sqrt() / nf.powf(bf - 0.5));
        let (x, y) = constrained_terms(a, nf, bf, s);
        nf.powf(-bf) * a.t2 / (s * s) * (x + y)
    };
    let a = agg(table);
    let s = sigma_fd.unwrap_or_else(|| constrained_sigma(table, n, b));
    let factor = nf.powf(-bf) * a.t2 / (s * s);
    let (x, y) = constrained_terms(a, nf, bf, s);
    Ok(report(
        "constrained_u_self_normalized",
        table,
        None,
        None,
        vec![("third_moment", factor * x), ("fourth_moment", factor * y), ("factor", factor)],
        &f,
    )
    .without_factor_terms(&["factor"]))
}

fn decorated_terms(table_t3abs: f64, t4: f64, sigma2: f64, n: f64, v: f64) -> (f64, f64) {
    let s = sigma2.sqrt();
    (n.powf(2.0 * v - 4.0) * table_t3abs / (sigma2 * s), (n.powf(3.0 * v - 6.0) * t4 / (sigma2 * sigma2)).sqrt())
}

/// `n^{2v−4} Σ E|η_i|³/σ³ + (n^{3v−6} Σ E|η_i|⁴/σ⁴)^{1/2}`.
pub fn bound_decorated(table: &MomentTable, n: usize, v: usize) -> Result<BoundReport> {
    require_sigma(table)?;
    let t3abs = table.sum_pow(3, 3);
    let (nf, vf) = (n as f64, v as f64);
    let f = move |a: Agg| {
        let (x, y) = decorated_terms(t3abs, a.t4, a.sigma2, nf, vf);
        x + y
    };
    let (x, y) = decorated_terms(t3abs, table.sum_pow(4, 4), table.sigma2, nf, vf);
    Ok(report("decorated", table, None, None, vec![("third_moment", x), ("fourth_moment", y)], &f))
}

/// `λ₂` times the decorated shape, `λ₂ = n^{v−2} Σ E|η_i|²/σ²`.
pub fn bound_decorated_self_normalized(table: &MomentTable, n: usize, v: usize) -> Result<BoundReport> {
    require_sigma(table)?;
    let t3abs = table.sum_pow(3, 3);
    let (nf, vf) = (n as f64, v as f64);
    let f = move |a: Agg| {
        let (x, y) = decorated_terms(t3abs, a.t4, a.sigma2, nf, vf);
        nf.powf(vf - 2.0) * a.t2 / a.sigma2 * (x + y)
    };
    let l2 = (n as f64).powf(v as f64 - 2.0) * table.sum_pow(2, 2) / table.sigma2;
    let (x, y) = decorated_terms(t3abs, table.sum_pow(4, 4), table.sigma2, nf, vf);
    Ok(report(
        "decorated_self_normalized",
        table,
        None,
        None,
        vec![("third_moment", l2 * x), ("fourth_moment", l2 * y), ("lambda2", l2)],
        &f,
    )
    .without_factor_terms(&["lambda2"]))
}

/// One block of a distributed field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockInput {
    pub l4: Vec<f64>,
    pub kappa: usize,
    pub tau: usize,
}

/// `σ⁻³ Σ_i Σ_j κ_i² ‖X_ij‖₄³ + σ⁻² (Σ_i Σ_j (κ_i³ + κ_i τ_i) ‖X_ij‖₄⁴)^{1/2}`.
pub fn bound_distributed_general(blocks: &[BlockInput], sigma2: f64) -> Result<BoundReport> {
    if !(sigma2 > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let mut third = Vec::new();
    let mut fourth = Vec::new();
    for b in blocks {
        let k = b.kappa as f64;
        third.extend(b.l4.iter().map(|x| k * k * x.powi(3)));
        fourth.extend(b.l4.iter().map(|x| (k.powi(3) + k * b.tau as f64) * x.powi(4)));
    }
    let s = sigma2.sqrt();
    let x = pairwise_sum(&third) / (sigma2 * s);
    let y = pairwise_sum(&fourth).sqrt() / sigma2;
    let all: Vec<f64> = blocks.iter().flat_map(|b| b.l4.iter().copied()).collect();
    Ok(BoundReport {
        theorem: "distributed_general".into(),
        shape: x + y,
        terms: vec![Term { name: "third_moment".into(), value: x }, Term { name: "fourth_moment".into(), value: y }],
        constant: ConstantPolicy::ShapeC1,
        digest: InputDigest {
            n: all.len(),
            kappa: blocks.iter().map(|b| b.kappa).max(),
            tau: blocks.iter().map(|b| b.tau).max(),
            lambda: None,
            sigma: s,
            sum_l2_sq: f64::NAN,
            sum_l4_cube: all.iter().map(|x| x.powi(3)).sum(),
            sum_l4_quad: all.iter().map(|x| x.powi(4)).sum(),
        },
        band: None,
        notes: Vec::new(),
    })
}

/// `δ₀, …, δ₇` of the concentration inequality for `S_A/σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prop1Deltas {
    pub delta: [f64; 8],
}

impl Prop1Deltas {
    pub fn total(&self) -> f64 {
        self.delta.iter().sum()
    }
}

fn set_sum(x: &[f64], set: &[usize]) -> f64 {
    set.iter().map(|&i| x[i]).sum()
}

fn check_sets(n: usize, sets: &[&[usize]]) -> Result<()> {
    for s in sets {
        if s.is_empty() {
            return Err(Error::InvalidArgument("index sets must be nonempty".into()));
        }
        if s.iter().any(|&i| i >= n) {
            return Err(Error::InvalidArgument("index set leaves [n]".into()));
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn delta_components_prop1(
    table: &MomentTable,
    sys: &NeighborhoodSystem,
    derived: &DerivedNeighborhoods,
    a_set: &[usize],
    b_set: &[usize],
    c: f64,
    a: f64,
    b: f64,
    budget: u64,
) -> Result<Prop1Deltas> {
    require_sigma(table)?;
    check_sets(sys.n(), &[a_set, b_set])?;
    let x = &table.l4;
    let s2 = table.sigma2;
    let s = s2.sqrt();
    let ns = nested_sums(x, sys, derived, budget)?;
    let n_a = derived.n_of_set(a_set);
    let d_a = derived.d_of_set(a_set);
    let d3: f64 = b_set.iter().map(|&m| derived.n_sets[m].iter().map(|&k| x[k] * x[m]).sum::<f64>()).sum();
    let d4: f64 = d_a.iter().map(|&(i, j)| x[i] * x[j]).sum();
    Ok(Prop1Deltas {
        delta: [
            (b - a) / 100.0,
            c / s * set_sum(x, &n_a),
            c / s * set_sum(x, b_set),
            c / s2 * d3,
            c / s2 * d4,
            c / (s2 * s) * (ns.b1_self + ns.b1_cross),
            c * ((ns.quad + ns.cube_self + ns.cube_cross_narrow) / (s2 * s2)).sqrt(),
            c * ((ns.fifth_1 + ns.fifth_2 + ns.fifth_3 + ns.fifth_4) / (s2 * s2 * s)).sqrt(),
        ],
    })
}

/// `λ` and `δ₁, …, δ₄` of the self-normalized concentration inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prop2Deltas {
    pub lambda: f64,
    pub delta: [f64; 4],
}

impl Prop2Deltas {
    pub fn total(&self) -> f64 {
        self.delta.iter().sum()
    }
}

pub fn delta_components_prop2(
    table: &MomentTable,
    sys: &NeighborhoodSystem,
    derived: &DerivedNeighborhoods,
    a_set: &[usize],
    b_set: &[usize],
    c: f64,
) -> Result<Prop2Deltas> {
    require_sigma(table)?;
    check_sets(sys.n(), &[a_set, b_set])?;
    let x = &table.l4;
    let s2 = table.sigma2;
    let s = s2.sqrt();
    let k = derived.kappa as f64;
    let t = derived.tau as f64;
    let lambda = k * table.sum_pow(2, 2) / s2;
    let size_a = a_set.len() as f64;
    let n_a = derived.n_of_set(a_set);
    let d4sq: f64 =
        n_a.iter().map(|&kk| x[kk] * set_sum(x, &union_sorted(&derived.n_sets[kk], sys.a(kk)))).sum::<f64>()
            * lambda
            * lambda
            * c
            * c
            / s2;
    Ok(Prop2Deltas {
        lambda,
        delta: [
            c / s * set_sum(x, b_set),
            c * lambda * k * k * size_a * size_a * table.sum_pow(4, 3) / (s2 * s),
            c * lambda * k.sqrt() * (k + t.sqrt()) * size_a.sqrt() * table.sum_pow(4, 4).sqrt() / s2,
            d4sq.sqrt(),
        ],
    })
}

/// `m C(n_i − 1, m − 1)`, the bound on `|A_{i,j}|` within a U-statistic block.
pub fn ustat_block_neighborhood_bound(block: usize, m: usize) -> u128 {
    m as u128 * crate::codec::binom(block as u64 - 1, m as u64 - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighborhood::Provenance;

    fn iid_table(n: usize) -> MomentTable {
        MomentTable::homogeneous(n, 1.0, 1.0, 1.0, n as f64, 1)
    }

    #[test]
    fn main_shape_examples() {
        let r = bound_main(&iid_table(100), 1, 1).unwrap();
        assert!((r.term("third_moment").unwrap() - 0.1).abs() < 1e-12);
        assert!((r.term("fourth_moment").unwrap() - 0.2).abs() < 1e-12);
        assert!((r.shape - 0.3).abs() < 1e-12);
        assert!((bound_main(&iid_table(1), 1, 1).unwrap().shape - 3.0).abs() < 1e-12);
        let scaled = bound_main(&iid_table(100).scaled(3.7), 1, 1).unwrap();
        assert!((scaled.shape - r.shape).abs() < 1e-12 * r.shape);
        assert_eq!(
            bound_main(&MomentTable::homogeneous(2, 0.0, 0.0, 0.0, 0.0, 1), 1, 1).unwrap_err(),
            Error::DegenerateVariance
        );
    }

    #[test]
    fn self_normalized_examples() {
        let t = iid_table(100);
        assert_eq!(t.lambda(), Some(1.0));
        let r = bound_self_normalized(&t, 1, 1).unwrap();
        assert!((r.shape - 0.3).abs() < 1e-12);
        assert!((r.summand_total() - r.shape).abs() < 1e-12);
        // doubling κ: first term ×4 in the main shape, λ ×2
        let a = bound_main(&t, 1, 1).unwrap();
        let b = bound_main(&t, 2, 1).unwrap();
        assert!((b.term("third_moment").unwrap() / a.term("third_moment").unwrap() - 4.0).abs() < 1e-12);
        let s2 = bound_self_normalized(&t, 2, 1).unwrap();
        assert!((s2.term("lambda").unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_norms_give_zero_beta() {
        let sys = NeighborhoodSystem::iid(4);
        let d = sys.derive().unwrap();
        let t = MomentTable::homogeneous(4, 0.0, 0.0, 0.0, 1.0, 1);
        assert_eq!(bound_general_beta(&t, &sys, &d, DEFAULT_BUDGET).unwrap().shape, 0.0);
    }

    #[test]
    fn iid_beta_closed_form() {
        // iid: |A_i| = 1, N_i = {i}, D_i = {(i,i)}
        let n = 25;
        let sys = NeighborhoodSystem::iid(n);
        let d = sys.derive().unwrap();
        let t = iid_table(n);
        let r = bound_general_beta(&t, &sys, &d, DEFAULT_BUDGET).unwrap();
        let s = (n as f64).sqrt();
        assert!((r.term("beta1").unwrap() - 2.0 * n as f64 / s.powi(3)).abs() < 1e-12);
        assert!((r.term("beta2").unwrap() - (3.0 * n as f64).sqrt() / s.powi(2)).abs() < 1e-12);
        assert!((r.term("beta3").unwrap() - (4.0 * n as f64 / s.powi(5)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let sys = NeighborhoodSystem::iid(50);
        let d = sys.derive().unwrap();
        let err = bound_general_beta(&iid_table(50), &sys, &d, 10).unwrap_err();
        assert_eq!(err, Error::ComplexityCapExceeded { budget: 10 });
    }

    #[test]
    fn graph_shape() {
        let t = MomentTable::homogeneous(6, 1.0, 1.2, 1.5, 12.0, 4);
        let r = bound_graph(&t, 2).unwrap();
        let s = 12f64.sqrt();
        assert!(
            (r.shape
                - (4.0 * 6.0 * 1.5f64.powi(3) / s.powi(3) + 2f64.powf(1.5) * (6.0 * 1.5f64.powi(4) / 144.0).sqrt()))
            .abs()
                < 1e-12
        );
        let z = bound_graph(&t, 0).unwrap();
        assert_eq!(z.shape, 0.0);
        assert_eq!(z.notes.len(), 1);
        let a = bound_graph_self_normalized(&t, 2).unwrap().term("lambda1").unwrap();
        let b = bound_graph_self_normalized(&t.scaled(0.3), 2).unwrap().term("lambda1").unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn distributed_u_shapes() {
        let inp = DistributedUInputs { sigma1: 1.0, h_l4: 1.0, var_h: 1.0, m: 2, blocks: vec![100] };
        assert!((bound_distributed_u(&inp).unwrap().shape - 0.2).abs() < 1e-12);
        let bad = DistributedUInputs { blocks: vec![1, 5], ..inp.clone() };
        assert_eq!(bound_distributed_u(&bad).unwrap_err(), Error::BlockTooSmall { size: 1, m: 2 });
        // n_i ≥ 2m: each ratio n_i/(n_i-m+1) ≤ 2
        let blocks = vec![4, 6, 9, 20];
        let inp = DistributedUInputs { blocks: blocks.clone(), ..inp };
        let sum: f64 = blocks.iter().map(|&b| b as f64 / (b as f64 - 1.0)).sum();
        assert!(sum <= 2.0 * blocks.len() as f64);
        let vd = variance_deviation(&inp).unwrap();
        assert!((vd.shape - 2.0 * sum / 39.0).abs() < 1e-12);
        let un = bound_distributed_u_unnormalized(&inp).unwrap();
        assert!((un.shape - bound_distributed_u(&inp).unwrap().shape - vd.shape).abs() < 1e-12);
    }

    #[test]
    fn constrained_shapes_are_order_root_n() {
        // bounded f, |ℐ| = n^b, σ_n ~ σ n^{b-1/2}
        let b = 2;
        let mut prev = None;
        for n in [100usize, 400, 1600] {
            let count = n * n;
            let sigma = 0.7 * (n as f64).powf(b as f64 - 0.5);
            let t = MomentTable::homogeneous(count, 0.5, 0.5, 0.5, sigma * sigma, 1);
            let r = bound_constrained_u(&t, n, b, None).unwrap();
            if let Some(p) = prev {
                let ratio: f64 = p / r.shape;
                assert!((ratio - 2.0).abs() < 0.3, "ratio {ratio}");
            }
            prev = Some(r.shape);
        }
    }

    #[test]
    fn decorated_order_one_over_n() {
        // triangles: |ℐ| ~ n³, σ_n ~ n²
        let shape = |n: usize| {
            let count = n * (n - 1) * (n - 2);
            let t = MomentTable::homogeneous(count, 0.3, 0.3, 0.3, (n as f64).powi(4), 1);
            bound_decorated(&t, n, 3).unwrap().shape
        };
        let ratio = shape(40) / shape(80);
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
        assert_eq!(bound_decorated(&MomentTable::homogeneous(6, 0.0, 0.0, 0.0, 1.0, 1), 4, 3).unwrap().shape, 0.0);
    }

    #[test]
    fn distributed_general_reduces_to_main_for_one_block() {
        let t = MomentTable::analytic(vec![1.0; 5], vec![1.1; 5], vec![1.0, 1.2, 1.4, 0.9, 1.1], 7.0, 3);
        let one = bound_distributed_general(&[BlockInput { l4: t.l4.clone(), kappa: 3, tau: 5 }], 7.0).unwrap();
        let main = bound_main(&t, 3, 5).unwrap();
        assert!((one.term("third_moment").unwrap() - main.term("third_moment").unwrap()).abs() < 1e-12);
        // homogeneous blocks aggregate k-fold
        let blk = BlockInput { l4: vec![1.0; 4], kappa: 2, tau: 3 };
        let three = bound_distributed_general(&[blk.clone(), blk.clone(), blk.clone()], 9.0).unwrap();
        assert!((three.term("third_moment").unwrap() - 3.0 * 4.0 * 4.0 / 27.0).abs() < 1e-12);
        assert!((three.term("fourth_moment").unwrap() - (3.0 * 4.0 * (8.0 + 6.0) as f64).sqrt() / 9.0).abs() < 1e-12);
    }

    #[test]
    fn prop1_iid_example() {
        let sys = NeighborhoodSystem::iid(4);
        let d = sys.derive().unwrap();
        let t = iid_table(4);
        let r = delta_components_prop1(&t, &sys, &d, &[0], &[1], 1.0, 0.0, 0.0, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.delta[0], 0.0);
        assert!((r.delta[1] - 0.5).abs() < 1e-15);
        assert!((r.delta[2] - 0.5).abs() < 1e-15);
        assert!((r.delta[3] - 0.25).abs() < 1e-15);
        assert!((r.delta[4] - 0.25).abs() < 1e-15);
        assert!((r.delta[5] - 1.0).abs() < 1e-15);
        let s = delta_components_prop1(&t.scaled(5.0), &sys, &d, &[0], &[1], 1.0, 0.0, 0.0, DEFAULT_BUDGET).unwrap();
        for k in 0..8 {
            assert!((s.delta[k] - r.delta[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn prop2_iid_example() {
        let sys = NeighborhoodSystem::iid(4);
        let d = sys.derive().unwrap();
        let t = iid_table(4);
        let r = delta_components_prop2(&t, &sys, &d, &[0], &[1], 2.0).unwrap();
        assert_eq!(r.lambda, 1.0);
        assert!((r.delta[1] - 2.0 * 4.0 / 8.0).abs() < 1e-15);
        let r3 = delta_components_prop2(&t, &sys, &d, &[0], &[1], 3.0).unwrap();
        assert!(r3.delta.iter().zip(&r.delta).all(|(a, b)| a >= b));
    }

    #[test]
    fn prop2_delta4_vanishes_on_zero_norms() {
        let sys = NeighborhoodSystem::with_default_cover(vec![vec![0], vec![1, 2], vec![2]], Provenance::Declared);
        let d = sys.derive().unwrap();
        let t = MomentTable::analytic(vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 1.0], 2.0, d.kappa);
        let r = delta_components_prop2(&t, &sys, &d, &[0], &[1], 1.0).unwrap();
        assert_eq!(r.delta[3], 0.0);
    }

    #[test]
    fn mc_tables_get_bands() {
        let mut t = MomentTable::homogeneous(10, 1.0, 1.0, 1.0, 10.0, 1);
        t.se2 = Some(vec![0.01; 10]);
        t.se3 = Some(vec![0.01; 10]);
        t.se4 = Some(vec![0.01; 10]);
        t.sigma2_se = Some(0.1);
        let r = bound_main(&t, 1, 1).unwrap();
        let [lo, hi] = r.band.unwrap();
        assert!(lo < r.shape && r.shape < hi);
        assert!(bound_main(&iid_table(10), 1, 1).unwrap().band.is_none());
    }

    #[test]
    fn grid_export() {
        let r = bound_main(&iid_table(4), 1, 1).unwrap();
        let csv = grid_csv(&[(4.0, &r)]);
        assert_eq!(csv.lines().next(), Some("n,theorem,term,value"));
        assert_eq!(csv.lines().count(), 4);
    }
}
