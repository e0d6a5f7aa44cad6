//! Exact enumeration over finite-discrete fields, exact Kolmogorov
//! distances, and checkers for the explicit-constant moment and
//! concentration inequalities.

pub mod binomial;
pub mod suite;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bounds::{delta_components_prop1, delta_components_prop2, nested_sums, DEFAULT_BUDGET};
use crate::fields::LatentSourceField;
use crate::moments::{exact_moment_table, MomentTable};
use crate::neighborhood::{contains, DerivedNeighborhoods, NeighborhoodSystem};
use crate::normal::phi;
use crate::par::map_range;
use crate::statistics::{local_sums, psi_clamp, Statistic};
use crate::sum::pairwise_sum;
use crate::{Error, Result};

pub const DEFAULT_CAP: u128 = 1 << 24;
const MAX_CHUNKS: u64 = 256;
const ATOM_MERGE: f64 = 1e-12;

/// The joint outcome space of the sources a field actually reads.
#[derive(Debug, Clone)]
pub struct EnumerationPlan {
    used: Vec<usize>,
    atoms: Vec<Vec<(f64, f64)>>,
    total: u64,
}

impl EnumerationPlan {
    pub fn new(field: &LatentSourceField, cap: u128) -> Result<Self> {
        let mut used: Vec<usize> =
            (0..field.len()).flat_map(|i| field.support(i).iter().map(|&s| s as usize)).collect();
        used.sort_unstable();
        used.dedup();
        let mut atoms = Vec::with_capacity(used.len());
        for &s in &used {
            let a = field.sources()[s]
                .atoms()
                .ok_or_else(|| Error::InvalidArgument(format!("source {} is continuous", s + 1)))?;
            let mass: f64 = a.iter().map(|x| x.1).sum();
            if (mass - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("source {} has total mass {mass}", s + 1)));
            }
            atoms.push(a);
        }
        let size = atoms.iter().map(|a| a.len() as u128).fold(1u128, u128::saturating_mul);
        if size > cap || size > u64::MAX as u128 {
            return Err(Error::EnumerationCapExceeded { size, cap });
        }
        Ok(Self { used, atoms, total: size as u64 })
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn set_digits(&self, mut rank: u64, digits: &mut [usize], src: &mut [f64]) {
        for (k, a) in self.atoms.iter().enumerate() {
            let r = a.len() as u64;
            digits[k] = (rank % r) as usize;
            rank /= r;
            src[self.used[k]] = a[digits[k]].0;
        }
    }

    fn advance(&self, digits: &mut [usize], src: &mut [f64]) {
        for (k, a) in self.atoms.iter().enumerate() {
            digits[k] += 1;
            if digits[k] < a.len() {
                src[self.used[k]] = a[digits[k]].0;
                return;
            }
            digits[k] = 0;
            src[self.used[k]] = a[0].0;
        }
    }

    /// Folds every outcome `(values, sources, probability)` into per-chunk
    /// accumulators; chunks partition the outcome range and are returned in order.
    pub fn fold<T, I, F>(&self, field: &LatentSourceField, init: I, f: F) -> Vec<T>
    where
        T: Send,
        I: Fn() -> T + Sync + Send,
        F: Fn(&mut T, &[f64], &[f64], f64) + Sync + Send,
    {
        let chunks = self.total.min(MAX_CHUNKS);
        let size = self.total.div_ceil(chunks);
        map_range(chunks as usize, |c| {
            let start = c as u64 * size;
            let end = (start + size).min(self.total);
            let mut acc = init();
            let mut digits = vec![0; self.atoms.len()];
            let mut src = vec![0.0; field.sources().len()];
            let mut vals = vec![0.0; field.len()];
            if start < end {
                self.set_digits(start, &mut digits, &mut src);
            }
            for _ in start..end {
                let p: f64 = self.atoms.iter().zip(&digits).map(|(a, &d)| a[d].1).product();
                field.evaluate_at(&src, &mut vals);
                f(&mut acc, &vals, &src, p);
                self.advance(&mut digits, &mut src);
            }
            acc
        })
    }

    /// `E g(X)` for a vector-valued `g` of the given width.
    pub fn expectations<F>(&self, field: &LatentSourceField, width: usize, g: F) -> Vec<f64>
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Sync + Send,
    {
        let parts = self.fold(
            field,
            || (vec![0.0; width], vec![0.0; width]),
            |(acc, tmp), x, src, p| {
                tmp.iter_mut().for_each(|t| *t = 0.0);
                g(x, src, tmp);
                for (a, t) in acc.iter_mut().zip(tmp.iter()) {
                    *a += p * t;
                }
            },
        );
        (0..width).map(|k| pairwise_sum(&parts.iter().map(|(acc, _)| acc[k]).collect::<Vec<_>>())).collect()
    }
}

/// `Σ_outcomes P(outcome) · functional(values)`.
pub fn exact_expectation<F>(field: &LatentSourceField, cap: u128, functional: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let plan = EnumerationPlan::new(field, cap)?;
    Ok(plan.expectations(field, 1, |x, _, o| o[0] = functional(x))[0])
}

/// Finite distribution of a statistic; `rejected` is the mass where it is undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactDistribution {
    pub atoms: Vec<(f64, f64)>,
    pub rejected: f64,
}

pub fn exact_distribution<F>(field: &LatentSourceField, cap: u128, stat: F) -> Result<ExactDistribution>
where
    F: Fn(&[f64]) -> Option<f64> + Sync + Send,
{
    let plan = EnumerationPlan::new(field, cap)?;
    let parts = plan.fold(
        field,
        || (Vec::new(), 0.0),
        |(pts, rej): &mut (Vec<(f64, f64)>, f64), x, _, p| match stat(x) {
            Some(v) => pts.push((v, p)),
            None => *rej += p,
        },
    );
    let rejected = parts.iter().map(|p| p.1).sum();
    let mut pts: Vec<(f64, f64)> = parts.into_iter().flat_map(|p| p.0).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(ExactDistribution { atoms: merge_atoms(&pts), rejected })
}

fn merge_atoms(sorted: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, Vec<f64>)> = Vec::new();
    for &(x, p) in sorted {
        match out.last_mut() {
            Some((y, ps)) if (x - *y).abs() <= ATOM_MERGE * x.abs().max(1.0) => ps.push(p),
            _ => out.push((x, vec![p])),
        }
    }
    out.into_iter().map(|(x, ps)| (x, pairwise_sum(&ps))).collect()
}

/// `sup_z |F(z) − Φ(z)|` for a finite distribution (atoms sorted by value),
/// taking both one-sided limits at every atom. Masses are renormalized.
pub fn ks_of_atoms(atoms: &[(f64, f64)]) -> f64 {
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    let mut below = 0.0;
    let mut d: f64 = 0.0;
    for &(x, p) in atoms {
        let at = below + p / total;
        let f = phi(x);
        d = d.max((at - f).abs()).max((below - f).abs());
        below = at;
    }
    d
}

/// Exact Kolmogorov distance of `W₁`, `W₂` or `W̄₂` to the standard normal.
/// For `W₂` the law is conditioned on `V > 0`.
pub fn exact_kolmogorov(
    field: &LatentSourceField,
    sys: &NeighborhoodSystem,
    statistic: Statistic,
    sigma: f64,
    cap: u128,
) -> Result<f64> {
    if statistic.needs_sigma() && !(sigma > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let dist = exact_distribution(field, cap, |x| statistic.evaluate(x, sys, sigma))?;
    if dist.atoms.is_empty() {
        return Err(Error::DegenerateVariance);
    }
    Ok(ks_of_atoms(&dist.atoms))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precondition {
    Satisfied,
    Violated,
    NotApplicable,
}

impl Precondition {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Precondition::Satisfied
        } else {
            Precondition::Violated
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Precondition::Satisfied => "satisfied",
            Precondition::Violated => "violated",
            Precondition::NotApplicable => "not_applicable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityVerdict {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub margin: f64,
    pub precondition: Precondition,
    pub digest: String,
    pub passed: bool,
    pub notes: Vec<String>,
}

impl InequalityVerdict {
    pub fn new(id: &str, lhs: f64, rhs: f64, constant: f64, precondition: Precondition, digest: &str) -> Self {
        let margin = rhs - lhs;
        let passed = margin >= -1e-10 * rhs.abs().max(1.0) && precondition != Precondition::Violated;
        Self {
            id: id.into(),
            lhs,
            rhs,
            constant,
            margin,
            precondition,
            digest: digest.into(),
            passed,
            notes: Vec::new(),
        }
    }

    /// Whether the inequality itself holds, regardless of the precondition.
    pub fn inequality_holds(&self) -> bool {
        self.margin >= -1e-10 * self.rhs.abs().max(1.0)
    }

    /// A failure that counts: the precondition held and the inequality did not.
    pub fn is_counted_failure(&self) -> bool {
        self.precondition != Precondition::Violated && !self.passed
    }

    fn fail(mut self, note: String) -> Self {
        self.passed = false;
        self.notes.push(note);
        self
    }
}

/// Nonnegative `A`-measurable weights `ξ_A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XiFunction {
    Constant {
        value: f64,
    },
    /// `|X_a|`, `a ∈ A` (0-based).
    AbsCoord {
        a: usize,
    },
    /// `X_a²`, `a ∈ A` (0-based).
    SquareCoord {
        a: usize,
    },
    /// `Π_{a∈A} |X_a|`.
    ProductAbs,
    /// `min(exp(scale Σ_{a∈A} X_a), clip)`.
    ClippedExp {
        scale: f64,
        clip: f64,
    },
}

impl XiFunction {
    pub fn validate(&self, a_set: &[usize]) -> Result<()> {
        match self {
            XiFunction::Constant { value } if !(*value >= 0.0) => {
                Err(Error::InvalidArgument("constant weight must be nonnegative".into()))
            }
            XiFunction::AbsCoord { a } | XiFunction::SquareCoord { a } if !a_set.contains(a) => {
                Err(Error::InvalidArgument(format!("weight reads index {} outside A", a + 1)))
            }
            XiFunction::ClippedExp { clip, .. } if !(*clip > 0.0) => {
                Err(Error::InvalidArgument("clip must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64], a_set: &[usize]) -> f64 {
        match self {
            XiFunction::Constant { value } => *value,
            XiFunction::AbsCoord { a } => x[*a].abs(),
            XiFunction::SquareCoord { a } => x[*a] * x[*a],
            XiFunction::ProductAbs => a_set.iter().map(|&a| x[a].abs()).product(),
            XiFunction::ClippedExp { scale, clip } => {
                (scale * a_set.iter().map(|&a| x[a]).sum::<f64>()).exp().min(*clip)
            }
        }
    }
}

/// A test function with `‖f‖∞ ≤ 1` and `‖f′‖∞ ≤ 1`.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("TestFunction").field(&self.name).finish()
    }
}

impl TestFunction {
    pub fn custom(name: &str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    pub fn zero() -> Self {
        Self::custom("zero", |_| 0.0)
    }

    pub fn clamp() -> Self {
        Self::custom("clamp", |w| w.clamp(-1.0, 1.0))
    }

    pub fn tanh() -> Self {
        Self::custom("tanh", f64::tanh)
    }

    pub fn sine() -> Self {
        Self::custom("sine", f64::sin)
    }

    /// Cubic smoothstep from −1 to 1 over `[−3/2, 3/2]`; slope at most 1.
    pub fn smooth_step() -> Self {
        Self::custom("smooth_step", |w| {
            let t = ((w + 1.5) / 3.0).clamp(0.0, 1.0);
            2.0 * t * t * (3.0 - 2.0 * t) - 1.0
        })
    }

    /// The four-function family used for the necessary-condition check.
    pub fn family() -> Vec<Self> {
        vec![Self::clamp(), Self::tanh(), Self::sine(), Self::smooth_step()]
    }

    pub fn eval(&self, w: f64) -> f64 {
        (self.f)(w)
    }

    /// Checks both sup bounds on a grid of step `1e-3` over `[−20, 20]`.
    pub fn validate(&self) -> Result<()> {
        let h = 1e-3;
        let mut prev = self.eval(-20.0);
        for k in 1..=40_000 {
            let w = -20.0 + k as f64 * h;
            let v = self.eval(w);
            if !v.is_finite() || v.abs() > 1.0 + 1e-12 || (v - prev).abs() > h * (1.0 + 1e-6) {
                return Err(Error::InvalidTestFunction { name: self.name.clone() });
            }
            prev = v;
        }
        Ok(())
    }
}

/// An enumerable field with its neighborhoods and exact moments.
#[derive(Debug, Clone)]
pub struct Instance {
    pub label: String,
    pub field: LatentSourceField,
    pub sys: NeighborhoodSystem,
    pub derived: DerivedNeighborhoods,
    /// Exact moments; `sigma2` is the exact `Var S`.
    pub table: MomentTable,
    pub plan: EnumerationPlan,
    pair_means: Vec<Vec<f64>>,
}

impl Instance {
    pub fn induced(field: LatentSourceField, cap: u128) -> Result<Self> {
        let sys = field.induced_neighborhoods();
        Self::with_system(field, sys, cap)
    }

    pub fn with_system(field: LatentSourceField, sys: NeighborhoodSystem, cap: u128) -> Result<Self> {
        if sys.n() != field.len() {
            return Err(Error::InvalidSize(format!("system has {} indices, field has {}", sys.n(), field.len())));
        }
        if !field.is_centered() {
            return Err(Error::InvalidArgument("checkers need a centered field".into()));
        }
        let derived = sys.derive()?;
        let plan = EnumerationPlan::new(&field, cap)?;
        let mut table = exact_moment_table(&field, &sys, cap)?;
        let width: usize = (0..sys.n()).map(|i| sys.a(i).len()).sum();
        let m = plan.expectations(&field, width + 2, |x, _, o| {
            let mut k = 0;
            for i in 0..sys.n() {
                for &j in sys.a(i) {
                    o[k] = x[i] * x[j];
                    k += 1;
                }
            }
            let s = pairwise_sum(x);
            o[k] = s;
            o[k + 1] = s * s;
        });
        let var_s = m[width + 1] - m[width] * m[width];
        if (var_s - table.sigma2).abs() > 1e-9 * var_s.abs().max(1e-300) {
            table.extras.insert("sigma2_local".into(), table.sigma2);
        }
        table.sigma2 = var_s;
        let mut pair_means = Vec::with_capacity(sys.n());
        let mut k = 0;
        for i in 0..sys.n() {
            pair_means.push(m[k..k + sys.a(i).len()].to_vec());
            k += sys.a(i).len();
        }
        Ok(Self { label: String::new(), field, sys, derived, table, plan, pair_means })
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.into();
        self
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    pub fn sigma(&self) -> f64 {
        self.table.sigma()
    }

    pub fn digest(&self) -> String {
        format!(
            "{} n={} kappa={} tau={} sigma2={:.6e}",
            if self.label.is_empty() { "instance" } else { &self.label },
            self.n(),
            self.derived.kappa,
            self.derived.tau,
            self.table.sigma2
        )
    }

    fn require_sigma(&self) -> Result<()> {
        if self.table.is_degenerate() {
            Err(Error::DegenerateVariance)
        } else {
            Ok(())
        }
    }

    fn check_set(&self, set: &[usize], nonempty: bool) -> Result<()> {
        if nonempty && set.is_empty() {
            return Err(Error::InvalidArgument("index set must be nonempty".into()));
        }
        if set.iter().any(|&i| i >= self.n()) {
            return Err(Error::InvalidArgument("index set leaves [n]".into()));
        }
        Ok(())
    }

    /// `true` at indices outside `N_A`.
    fn outside(&self, a_set: &[usize]) -> Vec<bool> {
        let n_a = self.derived.n_of_set(a_set);
        (0..self.n()).map(|i| !contains(&n_a, i)).collect()
    }

    fn dsum(&self, a_set: &[usize]) -> f64 {
        let x = &self.table.l4;
        self.derived.d_of_set(a_set).iter().map(|&(i, j)| x[i] * x[j]).sum()
    }
}

fn s_outside(x: &[f64], outside: &[bool]) -> f64 {
    x.iter().zip(outside).filter(|(_, &o)| o).map(|(v, _)| v).sum()
}

/// `E{ξ_A^p |Σ_{i∉N_A} Σ_{j∈A_i∖N_A} (X_iX_j − E X_iX_j)|²} ≤ 4 ‖ξ_A‖_p^p (γ_A² + 4γ)`.
pub fn check_lemma_xiyi(inst: &Instance, a_set: &[usize], xi: &XiFunction, p: f64) -> Result<InequalityVerdict> {
    inst.check_set(a_set, false)?;
    xi.validate(a_set)?;
    let out = inst.outside(a_set);
    let sys = &inst.sys;
    let e = inst.plan.expectations(&inst.field, 2, |x, _, o| {
        let w = xi.eval(x, a_set).powf(p);
        let mut q = 0.0;
        for i in (0..x.len()).filter(|&i| out[i]) {
            for (k, &j) in sys.a(i).iter().enumerate() {
                if out[j] {
                    q += x[i] * x[j] - inst.pair_means[i][k];
                }
            }
        }
        o[0] = w * q * q;
        o[1] = w;
    });
    let gamma_a = inst.dsum(a_set);
    let gamma = nested_sums(&inst.table.l4, sys, &inst.derived, DEFAULT_BUDGET)?.quad;
    let rhs = 4.0 * e[1] * (gamma_a * gamma_a + 4.0 * gamma);
    Ok(InequalityVerdict::new("xiyi", e[0], rhs, 4.0, Precondition::NotApplicable, &inst.digest()))
}

/// `E|Σ_i Σ_{j∈A_i} (X_iX_j − E X_iX_j)|² ≤ 16γ`.
pub fn check_lemma_xiyi_global(inst: &Instance) -> Result<InequalityVerdict> {
    let sys = &inst.sys;
    let e = inst.plan.expectations(&inst.field, 1, |x, _, o| {
        let mut q = 0.0;
        for i in 0..x.len() {
            for (k, &j) in sys.a(i).iter().enumerate() {
                q += x[i] * x[j] - inst.pair_means[i][k];
            }
        }
        o[0] = q * q;
    });
    let gamma = nested_sums(&inst.table.l4, sys, &inst.derived, DEFAULT_BUDGET)?.quad;
    Ok(InequalityVerdict::new("xiyi_global", e[0], 16.0 * gamma, 16.0, Precondition::NotApplicable, &inst.digest()))
}

/// `E{ξ_A^p S_A²} ≤ ‖ξ_A‖_p^p (E S_A² + 2 Σ_{(i,j)∈D_A} ‖X_i‖₄‖X_j‖₄)`.
pub fn check_lemma_s2(inst: &Instance, a_set: &[usize], xi: &XiFunction, p: f64) -> Result<InequalityVerdict> {
    inst.check_set(a_set, false)?;
    xi.validate(a_set)?;
    let out = inst.outside(a_set);
    let e = inst.plan.expectations(&inst.field, 3, |x, _, o| {
        let w = xi.eval(x, a_set).powf(p);
        let s = s_outside(x, &out);
        o[0] = w * s * s;
        o[1] = w;
        o[2] = s * s;
    });
    let rhs = e[1] * (e[2] + 2.0 * inst.dsum(a_set));
    Ok(InequalityVerdict::new("s2", e[0], rhs, 2.0, Precondition::NotApplicable, &inst.digest()))
}

/// Both smallness conditions of the fourth-moment bound for a set of size `size_a`.
pub fn s4_precondition(table: &MomentTable, derived: &DerivedNeighborhoods, size_a: usize) -> Precondition {
    s4_precondition_from(size_a, derived.kappa, derived.tau, table.sum_pow(4, 3), table.sum_pow(4, 4), table.sigma2)
}

/// The same conditions from the aggregates `Σ‖X_i‖₄³`, `Σ‖X_i‖₄⁴` and `σ²`.
pub fn s4_precondition_from(size_a: usize, kappa: usize, tau: usize, t3: f64, t4: f64, sigma2: f64) -> Precondition {
    let a = size_a as f64;
    let k = kappa as f64;
    let t = tau as f64;
    let first = a * a * k * k * t3 / (sigma2 * sigma2.sqrt());
    let second = a.sqrt() * k.sqrt() * (k + t.sqrt()) * t4.sqrt() / sigma2;
    Precondition::from_bool(first <= 1.0 / 500.0 && second <= 1.0 / 500.0)
}

/// `E{ξ_A^p S_A⁴} ≤ 13λσ⁴ E ξ_A^p`, `E S⁴ ≤ 13λσ⁴` and `E(Σ Y_i)⁴ ≤ 13κ⁴λσ⁴`.
pub fn check_lemma_s4(inst: &Instance, a_set: &[usize], xi: &XiFunction, p: f64) -> Result<Vec<InequalityVerdict>> {
    inst.require_sigma()?;
    inst.check_set(a_set, false)?;
    xi.validate(a_set)?;
    let out = inst.outside(a_set);
    let sys = &inst.sys;
    let e = inst.plan.expectations(&inst.field, 4, |x, _, o| {
        let w = xi.eval(x, a_set).powf(p);
        let sa = s_outside(x, &out);
        let s = pairwise_sum(x);
        let sy: f64 = local_sums(x, sys).iter().sum();
        o[0] = w * sa.powi(4);
        o[1] = w;
        o[2] = s.powi(4);
        o[3] = sy.powi(4);
    });
    let t = &inst.table;
    let kappa = inst.derived.kappa as f64;
    let lambda = kappa * t.sum_pow(2, 2) / t.sigma2;
    let s4 = t.sigma2 * t.sigma2;
    let local = s4_precondition(t, &inst.derived, a_set.len());
    let global = s4_precondition(t, &inst.derived, 1);
    let d = inst.digest();
    let mut v = vec![
        InequalityVerdict::new("s4_local", e[0], 13.0 * lambda * s4 * e[1], 13.0, local, &d),
        InequalityVerdict::new("s4_sum", e[2], 13.0 * lambda * s4, 13.0, global, &d),
        InequalityVerdict::new("s4_local_sums", e[3], 13.0 * kappa.powi(4) * lambda * s4, 13.0, global, &d),
    ];
    for x in &mut v {
        x.notes.push(format!("lambda={lambda:.6e}"));
    }
    Ok(v)
}

/// `κ² Σ E|X_i|³/σ³ ≤ 1/500`.
pub fn r4_precondition(table: &MomentTable, kappa: usize) -> Precondition {
    r4_precondition_from(kappa, table.sum_pow(3, 3), table.sigma2)
}

pub fn r4_precondition_from(kappa: usize, abs_third: f64, sigma2: f64) -> Precondition {
    let k = kappa as f64;
    Precondition::from_bool(k * k * abs_third / sigma2.powf(1.5) <= 1.0 / 500.0)
}

/// `Σ_i |E{(X_i/V̄) f(W̄₂ − Y_i/V̄)}| ≤ 27κ²σ⁻³ Σ E|X_i|³ + 11κ³σ⁻⁴ Σ E|X_i|⁴`
/// for each test function; passing the family is only a necessary condition.
pub fn check_lemma_r4(inst: &Instance, tests: &[TestFunction]) -> Result<Vec<InequalityVerdict>> {
    inst.require_sigma()?;
    for t in tests {
        t.validate()?;
    }
    let n = inst.n();
    let sigma = inst.sigma();
    let sys = &inst.sys;
    let k = tests.len();
    let e = inst.plan.expectations(&inst.field, n * k, |x, _, o| {
        let y = local_sums(x, sys);
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        let vbar = psi_clamp(pairwise_sum(&xy), sigma);
        let w = pairwise_sum(x) / vbar;
        for i in 0..n {
            for (t, f) in tests.iter().enumerate() {
                o[t * n + i] = x[i] / vbar * f.eval(w - y[i] / vbar);
            }
        }
    });
    let table = &inst.table;
    let kappa = inst.derived.kappa as f64;
    let rhs = 27.0 * kappa * kappa * table.sum_pow(3, 3) / sigma.powi(3)
        + 11.0 * kappa.powi(3) * table.sum_pow(4, 4) / sigma.powi(4);
    let pre = r4_precondition(table, inst.derived.kappa);
    let d = inst.digest();
    Ok(tests
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let lhs: f64 = e[t * n..(t + 1) * n].iter().map(|v| v.abs()).sum();
            InequalityVerdict::new(&format!("r4_{}", f.name), lhs, rhs, 27.0, pre, &d)
        })
        .collect())
}

fn inclusive(lo: f64, w: f64, hi: f64) -> bool {
    let eps = 1e-12 * w.abs().max(1.0);
    lo - eps <= w && w <= hi + eps
}

fn check_interval(a: f64, b: f64, c: f64) -> Result<()> {
    if !(a <= b) {
        return Err(Error::InvalidArgument("need a ≤ b".into()));
    }
    if !(c >= 1.0) {
        return Err(Error::InvalidArgument("need c ≥ 1".into()));
    }
    Ok(())
}

/// `E{ξ_A 1(η_B ≤ S_A/σ ≤ ζ_B)} ≤ 156 ‖ξ_A‖_{4/3} Σ_{i=0}^{7} δ_i`.
#[allow(clippy::too_many_arguments)]
pub fn check_prop1(
    inst: &Instance,
    a_set: &[usize],
    b_set: &[usize],
    a: f64,
    b: f64,
    c: f64,
    xi: &XiFunction,
) -> Result<InequalityVerdict> {
    inst.require_sigma()?;
    inst.check_set(a_set, true)?;
    inst.check_set(b_set, true)?;
    check_interval(a, b, c)?;
    xi.validate(a_set)?;
    let out = inst.outside(a_set);
    let sigma = inst.sigma();
    let e = inst.plan.expectations(&inst.field, 2, |x, _, o| {
        let w = xi.eval(x, a_set);
        let spread = c * b_set.iter().map(|&m| x[m].abs()).sum::<f64>() / sigma;
        let z = s_outside(x, &out) / sigma;
        o[0] = if inclusive(a - spread, z, b + spread) { w } else { 0.0 };
        o[1] = w.powf(4.0 / 3.0);
    });
    let deltas = delta_components_prop1(&inst.table, &inst.sys, &inst.derived, a_set, b_set, c, a, b, DEFAULT_BUDGET)?;
    let rhs = 156.0 * e[1].powf(0.75) * deltas.total();
    let mut v = InequalityVerdict::new("prop1", e[0], rhs, 156.0, Precondition::NotApplicable, &inst.digest());
    v.notes.push(format!("deltas={:?}", deltas.delta));
    Ok(v)
}

/// `E{ξ_A 1(η_{A,B} ≤ S_A/V̄_A ≤ ζ_{A,B})} ≤ 8755 ‖ξ_A‖_{4/3} ((b−a)/1500 + δ₁ + δ₂ + δ₃ + δ₄)`,
/// asserting `Q_A ≤ 1` and `σ/2 ≤ V̄_A ≤ √2 σ` on every outcome.
#[allow(clippy::too_many_arguments)]
pub fn check_prop2(
    inst: &Instance,
    a_set: &[usize],
    b_set: &[usize],
    a: f64,
    b: f64,
    c: f64,
    xi: &XiFunction,
) -> Result<InequalityVerdict> {
    inst.require_sigma()?;
    inst.check_set(a_set, true)?;
    inst.check_set(b_set, true)?;
    check_interval(a, b, c)?;
    xi.validate(a_set)?;
    let out = inst.outside(a_set);
    let n_a: Vec<usize> = (0..inst.n()).filter(|&i| !out[i]).collect();
    let sigma = inst.sigma();
    let s2 = sigma * sigma;
    let sys = &inst.sys;
    let derived = &inst.derived;
    let e = inst.plan.expectations(&inst.field, 3, |x, _, o| {
        let w = xi.eval(x, a_set);
        let mut inner = 0.0;
        for k in (0..x.len()).filter(|&k| out[k]) {
            for &l in sys.a(k) {
                if out[l] {
                    inner += x[k] * x[l];
                }
            }
        }
        let vbar = psi_clamp(inner, sigma);
        let mut t2 = 0.0;
        for &k in &n_a {
            t2 += sys.a(k).iter().map(|&l| (x[k] * x[l]).abs()).sum::<f64>();
            t2 += derived.n_sets[k].iter().map(|&l| (x[k] * x[l]).abs()).sum::<f64>();
        }
        let q = (t2 / s2).sqrt().min(1.0);
        let sa = s_outside(x, &out);
        let spread = c * b_set.iter().map(|&m| x[m].abs()).sum::<f64>() / sigma + c * sa.abs() * q / sigma;
        o[0] = if inclusive(a - spread, sa / vbar, b + spread) { w } else { 0.0 };
        o[1] = w.powf(4.0 / 3.0);
        let tol = 1e-12;
        let vbar_ok = vbar >= 0.5 * sigma * (1.0 - tol) && vbar <= 2f64.sqrt() * sigma * (1.0 + tol);
        o[2] = if q <= 1.0 && vbar_ok { 0.0 } else { 1.0 };
    });
    let deltas = delta_components_prop2(&inst.table, sys, derived, a_set, b_set, c)?;
    let rhs = 8755.0 * e[1].powf(0.75) * ((b - a) / 1500.0 + deltas.total());
    let mut v = InequalityVerdict::new("prop2", e[0], rhs, 8755.0, Precondition::NotApplicable, &inst.digest());
    v.notes.push(format!("lambda={:.6e} deltas={:?}", deltas.lambda, deltas.delta));
    if e[2] > 0.0 {
        v = v.fail(format!("clamp side condition broken with probability {:e}", e[2]));
    }
    Ok(v)
}

/// A failed exact independence test (0-based indices).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum LdViolation {
    /// `X_i` is not independent of `X_{A_i^c}`.
    Ld1 { i: usize },
    /// `(X_i, X_j)` is not independent of `X_{A_ij^c}`.
    Ld2 { i: usize, j: usize },
}

impl fmt::Display for LdViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LdViolation::Ld1 { i } => {
                write!(f, "LD1 violated: X_{} depends on variables outside A_{}", i + 1, i + 1)
            }
            LdViolation::Ld2 { i, j } => {
                write!(f, "LD2 violated: (X_{}, X_{}) depends on variables outside A_{},{}", i + 1, j + 1, i + 1, j + 1)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub violations: Vec<LdViolation>,
}

impl IndependenceReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn quantize(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

fn factorizes(outcomes: &[(Vec<i64>, f64)], left: &[usize], right: &[usize]) -> bool {
    if left.is_empty() || right.is_empty() {
        return true;
    }
    let key = |v: &[i64], idx: &[usize]| idx.iter().map(|&i| v[i]).collect::<Vec<i64>>();
    let mut joint: HashMap<(Vec<i64>, Vec<i64>), f64> = HashMap::new();
    let mut pl: HashMap<Vec<i64>, f64> = HashMap::new();
    let mut pr: HashMap<Vec<i64>, f64> = HashMap::new();
    for (v, p) in outcomes {
        let (l, r) = (key(v, left), key(v, right));
        *pl.entry(l.clone()).or_default() += p;
        *pr.entry(r.clone()).or_default() += p;
        *joint.entry((l, r)).or_default() += p;
    }
    for (l, a) in &pl {
        for (r, b) in &pr {
            let j = joint.get(&(l.clone(), r.clone())).copied().unwrap_or(0.0);
            if (j - a * b).abs() > 1e-12 {
                return false;
            }
        }
    }
    true
}

/// Exact factorization tests of the joint law for every `i` and every stored pair `(i, j)`.
pub fn check_ld_independence(
    field: &LatentSourceField,
    sys: &NeighborhoodSystem,
    cap: u128,
) -> Result<IndependenceReport> {
    if sys.n() != field.len() {
        return Err(Error::InvalidSize(format!("system has {} indices, field has {}", sys.n(), field.len())));
    }
    let plan = EnumerationPlan::new(field, cap)?;
    let parts = plan.fold(field, Vec::new, |acc: &mut Vec<(Vec<i64>, f64)>, x, _, p| {
        acc.push((x.iter().map(|&v| quantize(v)).collect(), p));
    });
    let outcomes: Vec<(Vec<i64>, f64)> = parts.into_iter().flatten().collect();
    let n = sys.n();
    let complement = |set: &[usize]| (0..n).filter(|k| !contains(set, *k)).collect::<Vec<_>>();
    let mut report = IndependenceReport::default();
    let ld1 = map_range(n, |i| factorizes(&outcomes, &[i], &complement(sys.a(i))));
    for (i, ok) in ld1.into_iter().enumerate() {
        if !ok {
            report.violations.push(LdViolation::Ld1 { i });
        }
    }
    let pairs: Vec<(&(usize, usize), &Vec<usize>)> = sys.pairs().iter().collect();
    let ld2 = map_range(pairs.len(), |k| {
        let (&(i, j), set) = pairs[k];
        let left: Vec<usize> = if i == j { vec![i] } else { vec![i, j] };
        factorizes(&outcomes, &left, &complement(set))
    });
    for (k, ok) in ld2.into_iter().enumerate() {
        if !ok {
            let &(i, j) = pairs[k].0;
            report.violations.push(LdViolation::Ld2 { i, j });
        }
    }
    Ok(report)
}
