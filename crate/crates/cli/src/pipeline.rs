//! Stages of an experiment and the rows they emit.

use anyhow::{bail, Context as _, Result};
use locdep::bounds::{self, BoundReport, DistributedUInputs, DEFAULT_BUDGET};
use locdep::config::{even_blocks, FamilySpec};
use locdep::fields::{Gaps, LatentSourceField};
use locdep::harness::{mc_run, rate_fit, ratio_table, EmpiricalSummary, FieldExperiment, RateFit};
use locdep::moments::{exact_moment_table, hoeffding_sigma1, mc_moment_table, MomentTable, ProjectionMethod};
use locdep::neighborhood::{validate_structure, NeighborhoodSystem, Provenance};
use locdep::oracle::suite::{run_suite, SuiteConfig};
use locdep::oracle::{
    check_ld_independence, check_lemma_r4, check_lemma_s2, check_lemma_s4, check_lemma_xiyi, check_lemma_xiyi_global,
    check_prop1, check_prop2, exact_kolmogorov, InequalityVerdict, Instance, TestFunction, XiFunction,
};
use locdep::rng::grid_tag;
use serde::Serialize;

use crate::spec::{Checkers, ExperimentSpec, Mode, MomentSource};

const MC_TAG: u64 = 0x6d63;

/// A spec with its derived identity.
pub struct Context {
    pub spec: ExperimentSpec,
    pub hash: String,
    pub seed: u64,
    pub cap: u128,
}

impl Context {
    pub fn new(spec: ExperimentSpec, cap: u128) -> Self {
        Self { hash: spec.config_hash(), seed: spec.seed(), spec, cap }
    }

    fn field(&self, n: usize) -> Result<LatentSourceField> {
        self.spec.family.build(n, self.cap).with_context(|| format!("building {} at n = {n}", self.spec.family.name()))
    }

    /// Induced neighborhoods with the declared overrides applied.
    fn system(&self, field: &LatentSourceField) -> NeighborhoodSystem {
        let sys = field.induced_neighborhoods();
        if self.spec.neighborhoods.is_empty() {
            return sys;
        }
        let mut a = sys.neighborhoods().to_vec();
        for o in &self.spec.neighborhoods {
            a[o.index] = o.set.clone();
        }
        NeighborhoodSystem::with_default_cover(a, Provenance::Declared)
    }

    fn moments(&self, field: &LatentSourceField, sys: &NeighborhoodSystem) -> Result<MomentTable> {
        Ok(match self.spec.moments {
            MomentSource::Exact => exact_moment_table(field, sys, self.cap)?,
            MomentSource::Mc { reps } => mc_moment_table(field, sys, reps, self.seed, 20)?,
        })
    }
}

#[derive(Debug, Serialize)]
pub struct DeriveRow {
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    pub kappa: usize,
    pub tau: usize,
    pub max_a: usize,
    pub max_n: usize,
    pub max_d: usize,
    pub provenance: String,
    pub valid: bool,
    pub violations: String,
}

pub fn derive(ctx: &Context) -> Result<Vec<DeriveRow>> {
    let mut rows = Vec::new();
    for &n in &ctx.spec.grid {
        let field = ctx.field(n)?;
        let sys = ctx.system(&field);
        let report = validate_structure(&sys);
        let d = sys.derive()?;
        rows.push(DeriveRow {
            config_hash: ctx.hash.clone(),
            seed: ctx.seed,
            n,
            kappa: d.kappa,
            tau: d.tau,
            max_a: (0..n).map(|i| sys.a(i).len()).max().unwrap_or(0),
            max_n: d.n_sets.iter().map(Vec::len).max().unwrap_or(0),
            max_d: d.d_sets.iter().map(Vec::len).max().unwrap_or(0),
            provenance: format!("{:?}", sys.provenance()).to_lowercase(),
            valid: report.is_valid(),
            violations: report.violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        });
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct MomentRow {
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    pub index: usize,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub se2: Option<f64>,
    pub se3: Option<f64>,
    pub se4: Option<f64>,
}

/// Moment tables and bound reports for every grid size.
pub struct BoundStage {
    pub tables: Vec<(usize, MomentTable)>,
    pub reports: Vec<(usize, BoundReport)>,
}

impl BoundStage {
    pub fn moment_rows(&self, ctx: &Context) -> Vec<MomentRow> {
        let mut rows = Vec::new();
        for (n, t) in &self.tables {
            let se = |v: &Option<Vec<f64>>, i: usize| v.as_ref().map(|v| v[i]);
            for i in 0..t.n() {
                rows.push(MomentRow {
                    config_hash: ctx.hash.clone(),
                    seed: ctx.seed,
                    n: *n,
                    index: i + 1,
                    l2: t.l2[i],
                    l3: t.l3[i],
                    l4: t.l4[i],
                    se2: se(&t.se2, i),
                    se3: se(&t.se3, i),
                    se4: se(&t.se4, i),
                });
            }
        }
        rows
    }

    pub fn to_json(&self, ctx: &Context) -> serde_json::Value {
        let tables: Vec<_> =
            self.tables.iter().map(|(n, t)| serde_json::json!({"n": n, "moments": t.header_json()})).collect();
        let reports: Vec<_> =
            self.reports.iter().map(|(n, r)| serde_json::json!({"n": n, "report": r.to_json()})).collect();
        serde_json::json!({
            "config_hash": ctx.hash,
            "seed": ctx.seed,
            "name": ctx.spec.name,
            "tables": tables,
            "reports": reports,
        })
    }

    pub fn shape(&self, name: &str, n: usize) -> Option<f64> {
        self.reports.iter().find(|(m, r)| *m == n && r.theorem == name).map(|(_, r)| r.shape)
    }
}

fn bound_report(
    ctx: &Context,
    name: &str,
    n: usize,
    table: &MomentTable,
    sys: &NeighborhoodSystem,
) -> Result<BoundReport> {
    let d = sys.derive()?;
    let family = &ctx.spec.family;
    let report = match (name, family) {
        ("main", _) => bounds::bound_main(table, d.kappa, d.tau)?,
        ("self_normalized", _) => bounds::bound_self_normalized(table, d.kappa, d.tau)?,
        ("general_beta", _) => bounds::bound_general_beta(table, sys, &d, DEFAULT_BUDGET)?,
        ("graph" | "graph_self_normalized", FamilySpec::Graph { graph, .. }) => {
            let deg = graph.build(n)?.max_degree();
            if name == "graph" {
                bounds::bound_graph(table, deg)?
            } else {
                bounds::bound_graph_self_normalized(table, deg)?
            }
        }
        (
            "distributed_u" | "distributed_u_unnormalized" | "variance_deviation",
            FamilySpec::Ustat { k, m, kernel, source },
        ) => {
            let method = if source.is_discrete() {
                ProjectionMethod::Exact
            } else {
                ProjectionMethod::MonteCarlo { outer: 2000, inner: 500, seed: ctx.seed }
            };
            let proj = hoeffding_sigma1(&*kernel.kernel(), *m, source, method)?;
            let inputs = DistributedUInputs {
                sigma1: proj.sigma1,
                h_l4: proj.h_l4,
                var_h: proj.var_h,
                m: *m,
                blocks: even_blocks(n, *k)?,
            };
            match name {
                "distributed_u" => bounds::bound_distributed_u(&inputs)?,
                "distributed_u_unnormalized" => bounds::bound_distributed_u_unnormalized(&inputs)?,
                _ => bounds::variance_deviation(&inputs)?,
            }
        }
        ("constrained_u" | "constrained_u_self_normalized", _) => {
            let gaps = match family {
                FamilySpec::ConstrainedUstat { gaps, .. }
                | FamilySpec::Word { gaps, .. }
                | FamilySpec::Pattern { gaps, .. } => Gaps(gaps.clone()),
                _ => bail!("bound {name} does not apply to {}", family.name()),
            };
            if name == "constrained_u" {
                bounds::bound_constrained_u(table, n, gaps.b(), None)?
            } else {
                bounds::bound_constrained_u_self_normalized(table, n, gaps.b(), None)?
            }
        }
        ("decorated" | "decorated_self_normalized", FamilySpec::DecoratedGraph { pattern, .. }) => {
            let v = pattern.build(0)?.n();
            if name == "decorated" {
                bounds::bound_decorated(table, n, v)?
            } else {
                bounds::bound_decorated_self_normalized(table, n, v)?
            }
        }
        _ => bail!("bound {name} does not apply to {}", family.name()),
    };
    Ok(report)
}

pub fn bound(ctx: &Context) -> Result<BoundStage> {
    let mut stage = BoundStage { tables: Vec::new(), reports: Vec::new() };
    for &n in &ctx.spec.grid {
        let field = ctx.field(n)?;
        let sys = ctx.system(&field);
        let table = ctx.moments(&field, &sys).with_context(|| format!("moments at n = {n}"))?;
        for name in &ctx.spec.bounds {
            let r = bound_report(ctx, name, n, &table, &sys).with_context(|| format!("bound {name} at n = {n}"))?;
            stage.reports.push((n, r));
        }
        stage.tables.push((n, table));
    }
    Ok(stage)
}

#[derive(Debug, Serialize)]
pub struct VerdictRow {
    pub config_hash: String,
    pub seed: u64,
    pub source: String,
    pub n: usize,
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub margin: f64,
    pub precondition: String,
    pub passed: bool,
    pub counted_failure: bool,
    pub digest: String,
    pub notes: String,
}

impl VerdictRow {
    pub const HEADER: [&'static str; 14] = [
        "config_hash",
        "seed",
        "source",
        "n",
        "id",
        "lhs",
        "rhs",
        "constant",
        "margin",
        "precondition",
        "passed",
        "counted_failure",
        "digest",
        "notes",
    ];

    fn from_verdict(ctx: &Context, source: &str, n: usize, v: &InequalityVerdict) -> Self {
        Self {
            config_hash: ctx.hash.clone(),
            seed: ctx.seed,
            source: source.into(),
            n,
            id: v.id.clone(),
            lhs: v.lhs,
            rhs: v.rhs,
            constant: v.constant,
            margin: v.margin,
            precondition: v.precondition.name().into(),
            passed: v.passed,
            counted_failure: v.is_counted_failure(),
            digest: v.digest.clone(),
            notes: v.notes.join("; "),
        }
    }

    fn violation(ctx: &Context, n: usize, id: &str, message: String) -> Self {
        Self {
            config_hash: ctx.hash.clone(),
            seed: ctx.seed,
            source: "field".into(),
            n,
            id: id.into(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            constant: f64::NAN,
            margin: f64::NAN,
            precondition: "not_applicable".into(),
            passed: false,
            counted_failure: true,
            digest: format!("{} n={n}", ctx.spec.name),
            notes: message,
        }
    }
}

/// Independence test and the full checker battery on the configured field,
/// then the optional randomized suite.
pub fn oracle(ctx: &Context, cfg: &Checkers) -> Result<Vec<VerdictRow>> {
    let mut rows = Vec::new();
    if cfg.on_field {
        for &n in &ctx.spec.grid {
            let field = ctx.field(n)?;
            let sys = ctx.system(&field);
            let ld = check_ld_independence(&field, &sys, ctx.cap)
                .with_context(|| format!("independence check at n = {n}"))?;
            for v in &ld.violations {
                let id = match v {
                    locdep::oracle::LdViolation::Ld1 { .. } => "ld1",
                    locdep::oracle::LdViolation::Ld2 { .. } => "ld2",
                };
                rows.push(VerdictRow::violation(ctx, n, id, v.to_string()));
            }
            let inst = Instance::with_system(field, sys, ctx.cap)
                .with_context(|| format!("checker instance at n = {n}"))?
                .with_label(&ctx.spec.name);
            let a_set = [0usize];
            let b_set = [n - 1];
            let xi = XiFunction::AbsCoord { a: 0 };
            let mut verdicts = vec![
                check_lemma_xiyi(&inst, &a_set, &xi, 1.0)?,
                check_lemma_xiyi_global(&inst)?,
                check_lemma_s2(&inst, &a_set, &xi, 1.0)?,
            ];
            verdicts.extend(check_lemma_s4(&inst, &a_set, &xi, 1.0)?);
            verdicts.extend(check_lemma_r4(&inst, &TestFunction::family())?);
            verdicts.push(check_prop1(&inst, &a_set, &b_set, 0.0, 0.5, 1.0, &xi)?);
            verdicts.push(check_prop2(&inst, &a_set, &b_set, 0.0, 0.5, 1.0, &xi)?);
            rows.extend(verdicts.iter().map(|v| VerdictRow::from_verdict(ctx, "field", n, v)));
        }
    }
    if cfg.suite_instances > 0 {
        let report = run_suite(&SuiteConfig { instances: cfg.suite_instances, seed: ctx.seed, ..Default::default() })?;
        for v in &report.verdicts {
            rows.push(VerdictRow::from_verdict(ctx, "suite", 0, v));
        }
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct SummaryRow {
    pub config_hash: String,
    pub seed: u64,
    pub family: String,
    pub n: usize,
    pub statistic: String,
    pub mode: String,
    #[serde(rename = "R")]
    pub reps: Option<u64>,
    pub ks: f64,
    pub ks_band: f64,
    pub rejected: u64,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub slope: Option<f64>,
}

pub struct McStage {
    pub rows: Vec<SummaryRow>,
    pub summaries: Vec<(usize, Option<EmpiricalSummary>)>,
    pub fit: Option<RateFit>,
}

/// Kolmogorov distance per grid size, exact or Monte-Carlo; `σ` comes from
/// `tables` when present.
pub fn mc(ctx: &Context, tables: &[(usize, MomentTable)]) -> Result<McStage> {
    let spec = &ctx.spec;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &n in &spec.grid {
        let field = ctx.field(n)?;
        let sys = ctx.system(&field);
        let sigma = match tables.iter().find(|(m, _)| *m == n) {
            Some((_, t)) => t.sigma(),
            None => ctx.moments(&field, &sys)?.sigma(),
        };
        let row = |mode: &str, reps, ks, band, rejected, mean, variance| SummaryRow {
            config_hash: ctx.hash.clone(),
            seed: ctx.seed,
            family: spec.family.name().into(),
            n,
            statistic: spec.statistic.name().into(),
            mode: mode.into(),
            reps,
            ks,
            ks_band: band,
            rejected,
            mean,
            variance,
            slope: None,
        };
        match spec.mode {
            Mode::Exact => {
                let ks = exact_kolmogorov(&field, &sys, spec.statistic, sigma, ctx.cap)
                    .with_context(|| format!("exact distance at n = {n}"))?;
                rows.push(row("exact", None, ks, 0.0, 0, None, None));
                summaries.push((n, None));
            }
            Mode::Mc { reps } => {
                let exp = FieldExperiment::new(field, sys, spec.statistic, sigma)?;
                let s = mc_run(&exp, reps, ctx.seed, grid_tag(MC_TAG, n as u64), spec.rejection_threshold)
                    .with_context(|| format!("Monte-Carlo run at n = {n}"))?;
                rows.push(row("mc", Some(reps), s.ks, s.ks_band, s.rejected, Some(s.mean), Some(s.variance)));
                summaries.push((n, Some(s)));
            }
        }
    }
    Ok(McStage { rows, summaries, fit: None })
}

impl McStage {
    /// Least-squares slope of `log ks` on `log n`; needs three positive distances.
    pub fn fit(&mut self) -> Result<()> {
        let points: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.n as f64, r.ks)).collect();
        let f = rate_fit(&points).context("rate fit needs at least 3 grid sizes with positive distance")?;
        for r in &mut self.rows {
            r.slope = Some(f.slope);
        }
        self.fit = Some(f);
        Ok(())
    }

    /// Plot data: `log_n log_ks fit` with a comment header; `fit` is `nan`
    /// when no line was fitted.
    pub fn plot_data(&self, ctx: &Context) -> String {
        let mut out = format!("# {} config_hash={} seed={}", ctx.spec.name, ctx.hash, ctx.seed);
        match &self.fit {
            Some(f) => out.push_str(&format!(" slope={} intercept={}\n", f.slope, f.intercept)),
            None => out.push_str(" no fit\n"),
        }
        out.push_str("# log_n log_ks fit\n");
        for r in &self.rows {
            let x = (r.n as f64).ln();
            let line = self.fit.as_ref().map_or(f64::NAN, |f| f.intercept + f.slope * x);
            out.push_str(&format!("{x} {} {line}\n", r.ks.ln()));
        }
        out
    }
}

/// Assertion failures, one digest per failed check.
pub fn assertions(ctx: &Context, mc: &McStage, bounds: Option<&BoundStage>) -> Result<Vec<String>> {
    let a = &ctx.spec.assertions;
    let mut failures = Vec::new();
    if let Some(max) = a.max_ks {
        for r in mc.rows.iter().filter(|r| r.ks > max) {
            failures.push(format!("ks {:.6} > {max} at n = {}", r.ks, r.n));
        }
    }
    if let Some(max) = a.max_rejected_fraction {
        for (n, s) in &mc.summaries {
            if let Some(s) = s {
                let frac = s.rejected as f64 / s.reps as f64;
                if frac > max {
                    failures.push(format!("rejected fraction {frac} > {max} at n = {n}"));
                }
            }
        }
    }
    if let Some([lo, hi]) = a.slope {
        match &mc.fit {
            Some(f) if (lo..=hi).contains(&f.slope) => {}
            Some(f) => failures.push(format!("slope {:.4} outside [{lo}, {hi}]", f.slope)),
            None => failures.push(
                "slope asserted but no line was fitted (need at least 3 grid sizes with positive distance)".into(),
            ),
        }
    }
    if let (Some(max), Some(name)) = (a.max_spread, &a.ratio_bound) {
        let bounds = bounds.context("spread assertion needs bound reports")?;
        let owned: Vec<(f64, EmpiricalSummary)> = mc
            .summaries
            .iter()
            .zip(&mc.rows)
            .map(|((n, s), r)| {
                let s = s.clone().unwrap_or(EmpiricalSummary {
                    reps: 0,
                    ks: r.ks,
                    ks_band: 0.0,
                    rejected: 0,
                    rejected_indices: Vec::new(),
                    mean: f64::NAN,
                    variance: f64::NAN,
                    fourth: f64::NAN,
                    fourth_se: f64::NAN,
                });
                (*n as f64, s)
            })
            .collect();
        let refs: Vec<(f64, &EmpiricalSummary)> = owned.iter().map(|(n, s)| (*n, s)).collect();
        let shapes: Vec<(f64, f64)> =
            mc.summaries.iter().map(|(n, _)| (*n as f64, bounds.shape(name, *n).unwrap_or(f64::NAN))).collect();
        let table = ratio_table(&refs, &shapes)?;
        if !(table.spread < max) {
            failures.push(format!("ratio spread {:.4} against {name} is not below {max}", table.spread));
        }
    }
    Ok(failures)
}
