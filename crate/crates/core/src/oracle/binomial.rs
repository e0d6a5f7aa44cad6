//! Exact evaluation for iid centered two-point fields through the law of
//! the success count, reaching sizes far beyond full enumeration.

use crate::oracle::{r4_precondition_from, s4_precondition_from, InequalityVerdict, Precondition, TestFunction};
use crate::statistics::psi_clamp;
use crate::sum::pairwise_sum;
use crate::{Error, Result};

/// `X_i = scale (B_i − p)` with `B_i` iid Bernoulli(`p`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPoint {
    pub n: u64,
    pub p: f64,
    pub scale: f64,
}

impl TwoPoint {
    pub fn new(n: u64, p: f64, scale: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("n must be positive".into()));
        }
        if !(p > 0.0 && p < 1.0) || !(scale > 0.0) {
            return Err(Error::InvalidArgument("need 0 < p < 1 and scale > 0".into()));
        }
        Ok(Self { n, p, scale })
    }

    pub fn rademacher(n: u64) -> Self {
        Self { n, p: 0.5, scale: 2.0 }
    }

    fn up(&self) -> f64 {
        self.scale * (1.0 - self.p)
    }

    fn down(&self) -> f64 {
        -self.scale * self.p
    }

    /// `E|X_1|^k`.
    pub fn abs_moment(&self, k: i32) -> f64 {
        self.p * self.up().abs().powi(k) + (1.0 - self.p) * self.down().abs().powi(k)
    }

    pub fn sigma2(&self) -> f64 {
        self.n as f64 * self.abs_moment(2)
    }

    /// Weights of `K ~ Bin(n, p)` over the window where they are not negligible.
    fn weights(&self) -> (u64, Vec<f64>) {
        let nf = self.n as f64;
        let sd = (nf * self.p * (1.0 - self.p)).sqrt();
        let mode = ((nf + 1.0) * self.p).floor().min(nf) as u64;
        let lo = (mode as f64 - 40.0 * sd - 40.0).max(0.0) as u64;
        let hi = ((mode as f64 + 40.0 * sd + 40.0).min(nf)) as u64;
        let odds = self.p / (1.0 - self.p);
        let mut w = vec![0.0; (hi - lo + 1) as usize];
        let at = |k: u64| (k - lo) as usize;
        w[at(mode)] = 1.0;
        for k in mode..hi {
            w[at(k + 1)] = w[at(k)] * (nf - k as f64) / (k as f64 + 1.0) * odds;
        }
        for k in (lo + 1..=mode).rev() {
            w[at(k - 1)] = w[at(k)] * k as f64 / ((nf - k as f64 + 1.0) * odds);
        }
        let total = pairwise_sum(&w);
        w.iter_mut().for_each(|x| *x /= total);
        (lo, w)
    }

    /// `E g(K)` for `K ~ Bin(n, p)`.
    pub fn expect(&self, g: impl Fn(u64) -> f64) -> f64 {
        let (lo, w) = self.weights();
        let terms: Vec<f64> = w.iter().enumerate().map(|(k, p)| p * g(lo + k as u64)).collect();
        pairwise_sum(&terms)
    }

    /// `S` given `K` successes.
    pub fn sum_at(&self, k: u64) -> f64 {
        k as f64 * self.up() + (self.n - k) as f64 * self.down()
    }

    fn digest(&self) -> String {
        format!("two_point n={} p={} scale={} kappa=1 tau=1", self.n, self.p, self.scale)
    }
}

/// Fourth-moment checks with `A = {1}` and `ξ_A = |X_1|^q` (`κ = τ = 1`, `λ = 1`).
pub fn check_s4(tp: &TwoPoint, q: f64) -> Result<Vec<InequalityVerdict>> {
    let s2 = tp.sigma2();
    let nf = tp.n as f64;
    let t3 = nf * tp.abs_moment(4).powf(0.75);
    let t4 = nf * tp.abs_moment(4);
    let pre_local = s4_precondition_from(1, 1, 1, t3, t4, s2);
    let es4 = tp.expect(|k| tp.sum_at(k).powi(4));
    let xi_q = tp.p * tp.up().abs().powf(q) + (1.0 - tp.p) * tp.down().abs().powf(q);
    // S_A = S minus X_1, independent of X_1
    let local = if tp.n > 1 {
        let rest = TwoPoint { n: tp.n - 1, ..*tp };
        xi_q * rest.expect(|k| rest.sum_at(k).powi(4))
    } else {
        0.0
    };
    let lambda = tp.abs_moment(2) * nf / s2;
    let rhs = 13.0 * lambda * s2 * s2;
    let d = tp.digest();
    Ok(vec![
        InequalityVerdict::new("s4_local", local, rhs * xi_q, 13.0, pre_local, &d),
        InequalityVerdict::new("s4_sum", es4, rhs, 13.0, pre_local, &d),
        InequalityVerdict::new("s4_local_sums", es4, rhs, 13.0, pre_local, &d),
    ])
}

/// `Σ_i |E{(X_i/V̄) f(W̄₂ − X_i/V̄)}|`, which by exchangeability is
/// `n |E{(X_1/V̄) f((S − X_1)/V̄)}|`, conditioned on the success count.
pub fn r4_lhs(tp: &TwoPoint, f: &TestFunction) -> f64 {
    let sigma = tp.sigma2().sqrt();
    let nf = tp.n as f64;
    let (up, down) = (tp.up(), tp.down());
    let e = tp.expect(|k| {
        let kf = k as f64;
        let s = tp.sum_at(k);
        let vbar = psi_clamp(kf * up * up + (nf - kf) * down * down, sigma);
        (kf / nf) * up / vbar * f.eval((s - up) / vbar) + ((nf - kf) / nf) * down / vbar * f.eval((s - down) / vbar)
    });
    nf * e.abs()
}

pub fn check_r4(tp: &TwoPoint, tests: &[TestFunction]) -> Result<Vec<InequalityVerdict>> {
    for t in tests {
        t.validate()?;
    }
    let s2 = tp.sigma2();
    let nf = tp.n as f64;
    let abs3 = nf * tp.abs_moment(3);
    let rhs = 27.0 * abs3 / s2.powf(1.5) + 11.0 * nf * tp.abs_moment(4) / (s2 * s2);
    let pre: Precondition = r4_precondition_from(1, abs3, s2);
    Ok(tests
        .iter()
        .map(|f| InequalityVerdict::new(&format!("r4_{}", f.name), r4_lhs(tp, f), rhs, 27.0, pre, &tp.digest()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{iid, SourceDist};
    use crate::oracle::{check_lemma_r4, Instance, DEFAULT_CAP};

    #[test]
    fn binomial_weights_are_a_distribution() {
        for tp in [TwoPoint::rademacher(1), TwoPoint::new(37, 0.3, 1.0).unwrap(), TwoPoint::rademacher(1 << 20)] {
            assert!((tp.expect(|_| 1.0) - 1.0).abs() < 1e-12);
            assert!(tp.expect(|k| tp.sum_at(k)).abs() < 1e-9 * tp.sigma2().sqrt());
            assert!((tp.expect(|k| tp.sum_at(k).powi(2)) / tp.sigma2() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rademacher_fourth_moment_closed_form() {
        for n in [1u64, 5, 12, 1000, 1 << 20] {
            let tp = TwoPoint::rademacher(n);
            let nf = n as f64;
            let e = tp.expect(|k| tp.sum_at(k).powi(4));
            assert!((e / (3.0 * nf * nf - 2.0 * nf) - 1.0).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn r4_matches_enumeration() {
        for (p, n) in [(0.5, 8u64), (0.3, 7)] {
            let tp = TwoPoint::new(n, p, if p == 0.5 { 2.0 } else { 1.0 }).unwrap();
            let dist = if p == 0.5 {
                SourceDist::Rademacher
            } else {
                SourceDist::Discrete { values: vec![-0.3, 0.7], probs: vec![0.7, 0.3] }
            };
            let inst = Instance::induced(iid(n as usize, dist).unwrap(), DEFAULT_CAP).unwrap();
            let fam = TestFunction::family();
            let exact = check_lemma_r4(&inst, &fam).unwrap();
            let fast = check_r4(&tp, &fam).unwrap();
            for (a, b) in exact.iter().zip(&fast) {
                assert!((a.lhs - b.lhs).abs() < 1e-12, "{} {} {}", a.id, a.lhs, b.lhs);
                assert!((a.rhs - b.rhs).abs() < 1e-10 * a.rhs);
            }
        }
    }

    #[test]
    fn s4_matches_closed_form_small() {
        let v = check_s4(&TwoPoint::rademacher(6), 1.0).unwrap();
        assert!((v[1].lhs - (3.0 * 36.0 - 12.0)).abs() < 1e-9);
        assert!((v[0].lhs - (3.0 * 25.0 - 10.0)).abs() < 1e-9);
        assert_eq!(v[0].precondition, Precondition::Violated);
    }

    #[test]
    fn large_rademacher_meets_precondition() {
        let v = check_s4(&TwoPoint::rademacher(1 << 20), 1.0).unwrap();
        assert!(v.iter().all(|x| x.precondition == Precondition::Satisfied && x.passed));
        let at_250k = check_s4(&TwoPoint::rademacher(250_000), 1.0).unwrap();
        assert_eq!(at_250k[1].precondition, Precondition::Violated);
    }
}
