//! Monte-Carlo experiments: empirical Kolmogorov distances, rate fits and
//! ratio tables against bound shapes.

use serde::Serialize;

use crate::codec::binom;
use crate::fields::LatentSourceField;
use crate::graph::SimpleGraph;
use crate::neighborhood::NeighborhoodSystem;
use crate::normal::phi;
use crate::par::map_range;
use crate::rng::stream_rng;
use crate::statistics::Statistic;
use crate::sum::pairwise_sum;
use crate::{Error, Result};

pub const MIN_REPLICATIONS: u64 = 1000;
pub const DEFAULT_REJECTION_THRESHOLD: f64 = 0.01;

/// One draw of a scalar statistic per replication index.
pub trait Replicate: Sync {
    /// Value for replication `rep`, or `None` when the statistic is undefined.
    fn value(&self, master_seed: u64, tag: u64, rep: u64) -> Option<f64>;
}

/// `W₁`, `W₂` or `W̄₂` of a latent-source field.
#[derive(Debug, Clone)]
pub struct FieldExperiment {
    pub field: LatentSourceField,
    pub sys: NeighborhoodSystem,
    pub statistic: Statistic,
    pub sigma: f64,
}

impl FieldExperiment {
    pub fn new(field: LatentSourceField, sys: NeighborhoodSystem, statistic: Statistic, sigma: f64) -> Result<Self> {
        if statistic.needs_sigma() && !(sigma > 0.0) {
            return Err(Error::DegenerateVariance);
        }
        if sys.n() != field.len() {
            return Err(Error::InvalidSize(format!("system has {} indices, field has {}", sys.n(), field.len())));
        }
        Ok(Self { field, sys, statistic, sigma })
    }
}

impl Replicate for FieldExperiment {
    fn value(&self, master_seed: u64, tag: u64, rep: u64) -> Option<f64> {
        let mut rng = stream_rng(master_seed, tag, rep);
        let mut src = vec![0.0; self.field.sources().len()];
        let mut x = vec![0.0; self.field.len()];
        self.field.sample_with(&mut rng, &mut src, &mut x);
        self.statistic.evaluate(&x, &self.sys, self.sigma)
    }
}

/// Standardized triangle count of `G(n, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleCountExperiment {
    pub n: usize,
    pub p: f64,
}

impl TriangleCountExperiment {
    pub fn mean(&self) -> f64 {
        binom(self.n as u64, 3) as f64 * self.p.powi(3)
    }

    /// `C(n,3) p³(1−p³) + 3(n−3) C(n,3) (p⁵ − p⁶)`.
    pub fn variance(&self) -> f64 {
        let t = binom(self.n as u64, 3) as f64;
        let p = self.p;
        t * p.powi(3) * (1.0 - p.powi(3)) + t * 3.0 * (self.n as f64 - 3.0) * (p.powi(5) - p.powi(6))
    }
}

impl Replicate for TriangleCountExperiment {
    fn value(&self, master_seed: u64, tag: u64, rep: u64) -> Option<f64> {
        let mut rng = stream_rng(master_seed, tag, rep);
        let g = SimpleGraph::gnp(self.n, self.p, &mut rng);
        Some((g.triangle_count() as f64 - self.mean()) / self.variance().sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalSummary {
    pub reps: u64,
    pub ks: f64,
    /// `1.358/√R`, the 95% Dvoretzky–Kiefer–Wolfowitz envelope.
    pub ks_band: f64,
    pub rejected: u64,
    pub rejected_indices: Vec<u64>,
    pub mean: f64,
    pub variance: f64,
    /// Sample mean of the fourth power and its standard error.
    pub fourth: f64,
    pub fourth_se: f64,
}

/// `max_i max(i/R − Φ(x_(i)), Φ(x_(i)) − (i−1)/R)` over the sorted sample.
pub fn ks_of_sample(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let r = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = phi(x);
            ((i as f64 + 1.0) / r - f).max(f - i as f64 / r)
        })
        .fold(0.0, f64::max)
}

/// `R` replications on streams `(master_seed, tag, 0..R)`; fails when more
/// than `threshold · R` replications are rejected.
pub fn mc_run(exp: &dyn Replicate, reps: u64, master_seed: u64, tag: u64, threshold: f64) -> Result<EmpiricalSummary> {
    if reps < MIN_REPLICATIONS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_REPLICATIONS} replications")));
    }
    let draws = map_range(reps as usize, |r| exp.value(master_seed, tag, r as u64));
    let rejected_indices: Vec<u64> =
        draws.iter().enumerate().filter(|(_, d)| d.is_none()).map(|(r, _)| r as u64).collect();
    let rejected = rejected_indices.len() as u64;
    if rejected as f64 > threshold * reps as f64 {
        return Err(Error::ExcessRejections { rejected, reps, threshold });
    }
    let values: Vec<f64> = draws.into_iter().flatten().collect();
    let r = values.len() as f64;
    let mean = pairwise_sum(&values) / r;
    let dev2: Vec<f64> = values.iter().map(|x| (x - mean).powi(2)).collect();
    let variance = pairwise_sum(&dev2) / (r - 1.0);
    let q: Vec<f64> = values.iter().map(|x| x.powi(4)).collect();
    let fourth = pairwise_sum(&q) / r;
    let qd: Vec<f64> = q.iter().map(|x| (x - fourth).powi(2)).collect();
    let fourth_se = (pairwise_sum(&qd) / (r - 1.0) / r).sqrt();
    Ok(EmpiricalSummary {
        reps,
        ks: ks_of_sample(&values),
        ks_band: 1.358 / r.sqrt(),
        rejected,
        rejected_indices,
        mean,
        variance,
        fourth,
        fourth_se,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Euclidean norm of the log-log residuals.
    pub residual: f64,
}

/// Least-squares line through `(log n, log ks)`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 || points.iter().any(|&(n, ks)| !(n > 0.0) || !(ks > 0.0)) {
        return Err(Error::DegeneratePoints);
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegeneratePoints);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>().sqrt();
    Ok(RateFit { points: points.to_vec(), slope, intercept, residual })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub n: f64,
    pub ks: f64,
    pub shape: f64,
    pub ratio: f64,
    /// `(ks ∓ ks_band)/shape`.
    pub band: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioTable {
    pub rows: Vec<RatioRow>,
    /// `max ratio / min ratio`.
    pub spread: f64,
}

/// `ks / shape` per grid point; both grids must list the same sizes in order.
pub fn ratio_table(summaries: &[(f64, &EmpiricalSummary)], shapes: &[(f64, f64)]) -> Result<RatioTable> {
    if summaries.is_empty() || summaries.len() != shapes.len() || summaries.iter().zip(shapes).any(|(a, b)| a.0 != b.0)
    {
        return Err(Error::GridMismatch);
    }
    let rows: Vec<RatioRow> = summaries
        .iter()
        .zip(shapes)
        .map(|(&(n, s), &(_, shape))| RatioRow {
            n,
            ks: s.ks,
            shape,
            ratio: s.ks / shape,
            band: [((s.ks - s.ks_band) / shape).max(0.0), (s.ks + s.ks_band) / shape],
        })
        .collect();
    let max = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    Ok(RatioTable { rows, spread: max / min })
}
