//! Randomized enumerable instances and the full checker battery.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::fields::{LatentSourceField, SourceDist, Supports};
use crate::oracle::{
    check_lemma_r4, check_lemma_s2, check_lemma_s4, check_lemma_xiyi, check_lemma_xiyi_global, check_prop1,
    check_prop2, InequalityVerdict, Instance, Precondition, TestFunction, XiFunction, DEFAULT_CAP,
};
use crate::par::map_range;
use crate::rng::stream_rng;
use crate::{Error, Result};

const SUITE_TAG: u64 = 0x5eed_cafe;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub instances: usize,
    pub seed: u64,
    pub max_n: usize,
    pub max_outcomes: u128,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { instances: 200, seed: 20_240_601, max_n: 10, max_outcomes: 1 << 14 }
    }
}

/// One instance with its randomly drawn checker arguments.
#[derive(Debug, Clone)]
pub struct SuiteCase {
    pub instance: Instance,
    pub a_set: Vec<usize>,
    pub b_set: Vec<usize>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub xi: XiFunction,
    pub p: f64,
}

/// A field on at most `max_n` indices: each index reads 1 to 3 random
/// Rademacher or three-point sources through a random polynomial.
pub fn random_field<R: Rng + ?Sized>(rng: &mut R, max_n: usize, max_outcomes: u128) -> Result<LatentSourceField> {
    let n = rng.random_range(2..=max_n.max(2));
    let wanted = rng.random_range(2..=14);
    let mut sources = Vec::new();
    let mut size = 1u128;
    for _ in 0..wanted {
        let d = if rng.random_bool(0.5) {
            SourceDist::Rademacher
        } else {
            SourceDist::three_point(rng.random_range(0.1..0.6))
        };
        let k = d.atoms().map_or(1, |a| a.len()) as u128;
        if size * k > max_outcomes {
            break;
        }
        size *= k;
        sources.push(d);
    }
    if sources.is_empty() {
        return Err(Error::InvalidArgument("outcome budget admits no source".into()));
    }
    let s = sources.len();
    let mut rows = Vec::with_capacity(n);
    let mut coefs = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.random_range(1..=s.min(3));
        let mut row: Vec<usize> = sample(rng, s, k).into_vec();
        row.sort_unstable();
        let lin: Vec<(usize, f64)> = row.iter().map(|&j| (j, rng.random_range(-1.5..1.5))).collect();
        let prod = if k > 1 { rng.random_range(-1.0..1.0) } else { 0.0 };
        let sq = rng.random_range(-0.5..0.5);
        coefs.push((lin, prod, sq));
        rows.push(row);
    }
    let coefs = Arc::new(coefs);
    let field = LatentSourceField::new(
        sources,
        Supports::from_rows(&rows),
        Arc::new(move |i, src| {
            let (lin, prod, sq) = &coefs[i];
            let l: f64 = lin.iter().map(|&(j, w)| w * src[j]).sum();
            let p: f64 = lin.iter().map(|&(j, _)| src[j]).product();
            let first = src[lin[0].0];
            l + prod * p + sq * first * first
        }),
    )?;
    Ok(field.with_family("random", "index").centered(0, 0))
}

fn random_subset<R: Rng + ?Sized>(rng: &mut R, n: usize, max: usize) -> Vec<usize> {
    let k = rng.random_range(1..=n.min(max));
    let mut v = sample(rng, n, k).into_vec();
    v.sort_unstable();
    v
}

fn random_xi<R: Rng + ?Sized>(rng: &mut R, a_set: &[usize]) -> XiFunction {
    let a = a_set[rng.random_range(0..a_set.len())];
    match rng.random_range(0..6) {
        0 => XiFunction::Constant { value: rng.random_range(0.5..2.0) },
        1 => XiFunction::Constant { value: 0.0 },
        2 => XiFunction::AbsCoord { a },
        3 => XiFunction::SquareCoord { a },
        4 => XiFunction::ProductAbs,
        _ => XiFunction::ClippedExp { scale: rng.random_range(-1.0..1.0), clip: rng.random_range(1.0..4.0) },
    }
}

/// Case `k` of the suite; deterministic in `(cfg.seed, k)`.
pub fn random_case(cfg: &SuiteConfig, k: u64) -> Result<SuiteCase> {
    let mut rng = stream_rng(cfg.seed, SUITE_TAG, k);
    for _ in 0..100 {
        let field = random_field(&mut rng, cfg.max_n, cfg.max_outcomes)?;
        let instance = Instance::induced(field, DEFAULT_CAP)?.with_label(&format!("case{k}"));
        if instance.table.sigma2 < 1e-6 {
            continue;
        }
        let n = instance.n();
        let a_set = random_subset(&mut rng, n, 3);
        let b_set = random_subset(&mut rng, n, 2);
        let a = rng.random_range(-2.0..1.0);
        let b = if rng.random_bool(0.2) { a } else { a + rng.random_range(0.0..2.0) };
        let c = rng.random_range(1.0..=3.0);
        let xi = random_xi(&mut rng, &a_set);
        let p = [0.0, 0.5, 1.0, 2.0][rng.random_range(0..4)];
        return Ok(SuiteCase { instance, a_set, b_set, a, b, c, xi, p });
    }
    Err(Error::DegenerateVariance)
}

/// Every checker on one case.
pub fn run_case(case: &SuiteCase) -> Result<Vec<InequalityVerdict>> {
    let inst = &case.instance;
    let mut out = vec![
        check_lemma_xiyi(inst, &case.a_set, &case.xi, case.p)?,
        check_lemma_xiyi_global(inst)?,
        check_lemma_s2(inst, &case.a_set, &case.xi, case.p)?,
    ];
    out.extend(check_lemma_s4(inst, &case.a_set, &case.xi, case.p)?);
    out.extend(check_lemma_r4(inst, &TestFunction::family())?);
    out.push(check_prop1(inst, &case.a_set, &case.b_set, case.a, case.b, case.c, &case.xi)?);
    out.push(check_prop2(inst, &case.a_set, &case.b_set, case.a, case.b, case.c, &case.xi)?);
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CheckerTally {
    pub total: usize,
    pub precondition_satisfied: usize,
    pub precondition_violated: usize,
    pub inequality_holds: usize,
    pub counted_failures: usize,
    pub min_relative_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub verdicts: Vec<InequalityVerdict>,
}

impl SuiteReport {
    pub fn counted_failures(&self) -> Vec<&InequalityVerdict> {
        self.verdicts.iter().filter(|v| v.is_counted_failure()).collect()
    }

    /// Per-checker counts; the relative margin is `margin / max(1, |rhs|)`.
    pub fn tally(&self) -> BTreeMap<String, CheckerTally> {
        let mut out: BTreeMap<String, CheckerTally> = BTreeMap::new();
        for v in &self.verdicts {
            let t = out
                .entry(v.id.clone())
                .or_insert_with(|| CheckerTally { min_relative_margin: f64::INFINITY, ..Default::default() });
            t.total += 1;
            match v.precondition {
                Precondition::Satisfied => t.precondition_satisfied += 1,
                Precondition::Violated => t.precondition_violated += 1,
                Precondition::NotApplicable => {}
            }
            t.inequality_holds += usize::from(v.inequality_holds());
            t.counted_failures += usize::from(v.is_counted_failure());
            t.min_relative_margin = t.min_relative_margin.min(v.margin / v.rhs.abs().max(1.0));
        }
        out
    }
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let per_case = map_range(cfg.instances, |k| random_case(cfg, k as u64).and_then(|c| run_case(&c)));
    let mut verdicts = Vec::new();
    for v in per_case {
        verdicts.extend(v?);
    }
    Ok(SuiteReport { config: cfg.clone(), verdicts })
}
