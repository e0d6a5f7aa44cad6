//! Browser bindings: bound shapes, exact and Monte-Carlo Kolmogorov distances
//! for a family described by the same JSON the command line accepts.

use locdep::bounds::{bound_general_beta, bound_main, bound_self_normalized, DEFAULT_BUDGET};
use locdep::config::FamilySpec;
use locdep::fields::LatentSourceField;
use locdep::harness::{mc_run, FieldExperiment};
use locdep::moments::{exact_moment_table, mc_moment_table, MomentTable};
use locdep::neighborhood::NeighborhoodSystem;
use locdep::oracle::exact_kolmogorov;
use locdep::statistics::Statistic;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Enumeration budget; keeps the page responsive.
pub const CAP: u128 = 1 << 18;

fn build(family: &str, n: usize) -> Result<(LatentSourceField, NeighborhoodSystem), String> {
    let spec: FamilySpec = serde_json::from_str(family).map_err(|e| format!("family: {e}"))?;
    let field = spec.build(n, CAP).map_err(|e| e.to_string())?;
    let sys = field.induced_neighborhoods();
    Ok((field, sys))
}

fn table(field: &LatentSourceField, sys: &NeighborhoodSystem, seed: u64) -> Result<MomentTable, String> {
    let exact = field.outcome_count().is_some_and(|c| c <= CAP);
    let t = if exact { exact_moment_table(field, sys, CAP) } else { mc_moment_table(field, sys, 4000, seed, 20) };
    t.map_err(|e| e.to_string())
}

/// `κ`, `τ`, `σ²` and the general bound shapes at size `n`.
pub fn shapes(family: &str, n: usize) -> Result<Value, String> {
    let (field, sys) = build(family, n)?;
    let d = sys.derive().map_err(|e| e.to_string())?;
    let t = table(&field, &sys, 1)?;
    let err = |e: locdep::Error| e.to_string();
    let reports = [
        bound_main(&t, d.kappa, d.tau).map_err(err)?,
        bound_self_normalized(&t, d.kappa, d.tau).map_err(err)?,
        bound_general_beta(&t, &sys, &d, DEFAULT_BUDGET).map_err(err)?,
    ];
    Ok(json!({
        "n": n,
        "kappa": d.kappa,
        "tau": d.tau,
        "sigma2": t.sigma2,
        "moments": format!("{:?}", t.mode).to_lowercase(),
        "bounds": reports.iter().map(|r| json!({"name": r.theorem, "shape": r.shape, "terms": r.terms})).collect::<Vec<_>>(),
    }))
}

fn statistic(name: &str) -> Result<Statistic, String> {
    name.parse().map_err(|e: locdep::Error| e.to_string())
}

/// Exact Kolmogorov distance by full enumeration.
pub fn exact_distance(family: &str, n: usize, stat: &str) -> Result<Value, String> {
    let (field, sys) = build(family, n)?;
    let stat = statistic(stat)?;
    let sigma = table(&field, &sys, 1)?.sigma();
    let ks = exact_kolmogorov(&field, &sys, stat, sigma, CAP).map_err(|e| e.to_string())?;
    Ok(json!({"n": n, "statistic": stat.name(), "ks": ks}))
}

/// Monte-Carlo Kolmogorov distance with its DKW band.
pub fn mc_distance(family: &str, n: usize, stat: &str, reps: u64, seed: u64) -> Result<Value, String> {
    let (field, sys) = build(family, n)?;
    let stat = statistic(stat)?;
    let sigma = table(&field, &sys, seed)?.sigma();
    let exp = FieldExperiment::new(field, sys, stat, sigma).map_err(|e| e.to_string())?;
    let s = mc_run(&exp, reps, seed, n as u64, 0.01).map_err(|e| e.to_string())?;
    Ok(json!({
        "n": n,
        "statistic": stat.name(),
        "reps": s.reps,
        "ks": s.ks,
        "band": s.ks_band,
        "rejected": s.rejected,
        "mean": s.mean,
        "variance": s.variance,
    }))
}

fn js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = boundShapes)]
pub fn bound_shapes(family: &str, n: usize) -> Result<String, JsValue> {
    js(shapes(family, n))
}

#[wasm_bindgen(js_name = exactKs)]
pub fn exact_ks(family: &str, n: usize, stat: &str) -> Result<String, JsValue> {
    js(exact_distance(family, n, stat))
}

#[wasm_bindgen(js_name = mcKs)]
pub fn mc_ks(family: &str, n: usize, stat: &str, reps: u32, seed: u32) -> Result<String, JsValue> {
    js(mc_distance(family, n, stat, u64::from(reps), u64::from(seed)))
}
