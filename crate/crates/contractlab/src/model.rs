//! Model primitives: pool size, cash flows, monitoring technology, default
//! intensities and the standing assumptions every solver relies on.
//!
//! All rates are per unit time in an implicit time unit; values are plain
//! `f64`. A pool of `I` ex-ante identical loans pays `mu` per loan until
//! default. A bank that leaves `k` of `j` surviving loans unmonitored draws
//! private benefit `B` per unmonitored loan and raises the aggregate default
//! intensity from `alpha_j * j` to `alpha_j * (j + eps * k)`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Full parameter set of the securitisation model.
///
/// `alpha[j-1]` is the baseline per-loan hazard when `j` loans remain, so the
/// array has length `I` and is indexed by remaining pool size, not by loan.
/// Queries with `j = 0` are rejected: a liquidated pool has no intensities.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Number of loans in the pool at inception.
    #[serde(rename = "I")]
    pub loans: usize,
    /// Cash flow per surviving loan per unit time.
    pub mu: f64,
    /// Private benefit per unmonitored loan per unit time.
    #[serde(rename = "B")]
    pub private_benefit: f64,
    /// Proportional impact of shirking on the per-loan hazard (> 0).
    pub eps: f64,
    /// Bank discount rate (>= 0). The investor discounts at zero.
    pub r: f64,
    /// Baseline per-loan hazards `alpha_1..alpha_I`, indexed by pool size.
    pub alpha: Vec<f64>,
    /// Payment efficiency of the good bank.
    pub rho_g: f64,
    /// Payment efficiency of the bad bank (`rho_g > rho_b > 0`).
    pub rho_b: f64,
    /// Prior probability of facing the good bank.
    pub p_g: f64,
    /// Prior probability of facing the bad bank (`p_g + p_b = 1`).
    pub p_b: f64,
}

/// One validated inequality with its slack (positive slack means it holds
/// strictly; the boolean uses a tiny tolerance so equalities pass).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConditionCheck {
    pub holds: bool,
    /// Smallest slack over the indices the condition quantifies on.
    pub margin: f64,
}

/// Report of the three standing assumptions. A failing assumption is data,
/// not an error: degenerate parameter sets are still simulable.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// (i) `mu >= alpha_I`: a monitored loan is worth holding at all.
    pub pool_worth_monitoring: ConditionCheck,
    /// (ii) `r B (1 + eps) <= (mu eps - B) eps alpha_j` for every `j`:
    /// the monitoring rent does not outweigh its pecuniary gain.
    pub discount_bounded: ConditionCheck,
    /// (iii) `alpha_j <= alpha_{j-1}`: contagion, defaults raise risk.
    pub contagion_ordering: ConditionCheck,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.pool_worth_monitoring.holds
            && self.discount_bounded.holds
            && self.contagion_ordering.holds
    }
}

const SLACK_TOL: f64 = 1e-12;

impl ModelParams {
    /// Structural validation: positivity, ordering, probabilities.
    pub fn validate(&self) -> Result<()> {
        if self.loans == 0 {
            return Err(Error::InvalidModel("pool must hold at least one loan".into()));
        }
        if self.alpha.len() != self.loans {
            return Err(Error::InvalidModel(format!(
                "alpha has {} entries but the pool holds {} loans",
                self.alpha.len(),
                self.loans
            )));
        }
        if self.alpha.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return Err(Error::InvalidModel("all alpha_j must be positive".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidModel("eps must be positive".into()));
        }
        if !(self.r >= 0.0) {
            return Err(Error::InvalidModel("r must be non-negative".into()));
        }
        if !(self.rho_g > self.rho_b && self.rho_b > 0.0) {
            return Err(Error::InvalidModel("need rho_g > rho_b > 0".into()));
        }
        if !(self.p_g >= 0.0 && self.p_b >= 0.0 && (self.p_g + self.p_b - 1.0).abs() < 1e-9) {
            return Err(Error::InvalidModel("type probabilities must sum to one".into()));
        }
        if !(self.private_benefit >= 0.0) {
            return Err(Error::InvalidModel("B must be non-negative".into()));
        }
        if !(self.mu >= 0.0) {
            return Err(Error::InvalidModel("mu must be non-negative".into()));
        }
        Ok(())
    }

    /// Parse a strict JSON object (unknown keys rejected) and validate it.
    pub fn from_json(text: &str) -> Result<Self> {
        let params: ModelParams =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    fn check_pool(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.loans {
            return Err(Error::domain(format!(
                "pool size {} outside 1..={}",
                j, self.loans
            )));
        }
        Ok(())
    }

    /// Baseline hazard `alpha_j` for a pool of `j` loans.
    pub fn alpha(&self, j: usize) -> f64 {
        self.alpha[j - 1]
    }

    /// Aggregate default intensity `alpha_j (j + eps k)` with `k` of the `j`
    /// surviving loans unmonitored.
    pub fn intensity(&self, j: usize, k: usize) -> Result<f64> {
        self.check_pool(j)?;
        if k > j {
            return Err(Error::domain(format!("cannot shirk {k} of {j} loans")));
        }
        Ok(self.alpha(j) * (j as f64 + self.eps * k as f64))
    }

    /// All-work intensity `alpha_j j`.
    pub fn lambda_work(&self, j: usize) -> f64 {
        self.alpha(j) * j as f64
    }

    /// All-shirk intensity `alpha_j j (1 + eps)`.
    pub fn lambda_shirk(&self, j: usize) -> f64 {
        self.alpha(j) * j as f64 * (1.0 + self.eps)
    }

    /// Incentive threshold `b_hat_j = B / (alpha_j eps)`: a bank monitors iff
    /// her total default exposure is at least this level.
    pub fn shirk_threshold(&self, j: usize) -> Result<f64> {
        self.check_pool(j)?;
        Ok(self.private_benefit / (self.alpha(j) * self.eps))
    }

    /// Evaluate the three standing assumptions, reporting per-condition slack.
    pub fn validate_assumptions(&self) -> AssumptionReport {
        let pool_margin = self.mu - self.alpha(self.loans);
        let mut discount_margin = f64::INFINITY;
        for j in 1..=self.loans {
            let lhs = self.r * self.private_benefit * (1.0 + self.eps);
            let rhs = (self.mu * self.eps - self.private_benefit) * self.eps * self.alpha(j);
            discount_margin = discount_margin.min(rhs - lhs);
        }
        let mut contagion_margin = f64::INFINITY;
        for j in 2..=self.loans {
            contagion_margin = contagion_margin.min(self.alpha(j - 1) - self.alpha(j));
        }
        AssumptionReport {
            pool_worth_monitoring: ConditionCheck {
                holds: pool_margin >= -SLACK_TOL,
                margin: pool_margin,
            },
            discount_bounded: ConditionCheck {
                holds: discount_margin >= -SLACK_TOL,
                margin: discount_margin,
            },
            contagion_ordering: ConditionCheck {
                holds: contagion_margin >= -SLACK_TOL,
                margin: contagion_margin,
            },
        }
    }
}

/// Precomputed intensities and thresholds for every pool size, for hot loops.
/// Immutable after construction and freely shareable across threads.
#[derive(Debug, Clone)]
pub struct IntensityTable {
    lambda_work: Vec<f64>,
    lambda_shirk: Vec<f64>,
    b_hat: Vec<f64>,
    alpha_eps: Vec<f64>,
}

impl IntensityTable {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let mut lambda_work = Vec::with_capacity(params.loans);
        let mut lambda_shirk = Vec::with_capacity(params.loans);
        let mut b_hat = Vec::with_capacity(params.loans);
        let mut alpha_eps = Vec::with_capacity(params.loans);
        for j in 1..=params.loans {
            lambda_work.push(params.lambda_work(j));
            lambda_shirk.push(params.lambda_shirk(j));
            b_hat.push(params.shirk_threshold(j)?);
            alpha_eps.push(params.alpha(j) * params.eps);
        }
        Ok(IntensityTable {
            lambda_work,
            lambda_shirk,
            b_hat,
            alpha_eps,
        })
    }

    /// `alpha_j (j + eps k)` without bounds re-checks.
    pub fn lambda_k(&self, j: usize, k: usize) -> f64 {
        self.lambda_work[j - 1] + self.alpha_eps[j - 1] * k as f64
    }

    pub fn lambda_0(&self, j: usize) -> f64 {
        self.lambda_work[j - 1]
    }

    pub fn lambda_sh(&self, j: usize) -> f64 {
        self.lambda_shirk[j - 1]
    }

    pub fn b_hat(&self, j: usize) -> f64 {
        self.b_hat[j - 1]
    }
}

/// Parameters of the one-loan illustration used throughout: `r = 0.02`,
/// `B = 0.002`, `eps = 0.25`, `alpha_1 = 0.055`, `rho_g / rho_b = 2`,
/// extended with `mu = 0.1` and unit `rho_b` where cash values are needed.
pub fn demo_params_one_loan() -> ModelParams {
    ModelParams {
        loans: 1,
        mu: 0.1,
        private_benefit: 0.002,
        eps: 0.25,
        r: 0.02,
        alpha: vec![0.055],
        rho_g: 2.0,
        rho_b: 1.0,
        p_g: 0.5,
        p_b: 0.5,
    }
}

/// Same scalars on a larger pool, with contagion-ordered baseline hazards.
pub fn demo_params(loans: usize) -> ModelParams {
    // alpha_I..alpha_1 increase toward smaller pools per the contagion order.
    let alpha: Vec<f64> = (0..loans).map(|i| 0.055 + 0.005 * (loans - 1 - i) as f64).collect();
    ModelParams {
        loans,
        mu: 0.1,
        private_benefit: 0.002,
        eps: 0.25,
        r: 0.02,
        alpha,
        rho_g: 2.0,
        rho_b: 1.0,
        p_g: 0.5,
        p_b: 0.5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assumptions_hold_on_demo_params() {
        let p = demo_params_one_loan();
        let rep = p.validate_assumptions();
        assert!(rep.all_hold());
        // (ii) slack = 3.1625e-4 - 5e-5 evaluated directly.
        let expected = (0.1 * 0.25 - 0.002) * 0.25 * 0.055 - 0.02 * 0.002 * 1.25;
        assert!((rep.discount_bounded.margin - expected).abs() < 1e-15);
        assert!(expected > 0.0);
    }

    #[test]
    fn contagion_ordering_fails_when_hazard_rises_with_pool_size() {
        let mut p = demo_params(2);
        p.alpha = vec![0.05, 0.06]; // alpha_2 > alpha_1 violates the ordering
        let rep = p.validate_assumptions();
        assert!(!rep.contagion_ordering.holds);
        assert!(rep.contagion_ordering.margin < 0.0);
    }

    #[test]
    fn zero_private_benefit_gives_full_discount_slack() {
        let mut p = demo_params_one_loan();
        p.private_benefit = 0.0;
        let rep = p.validate_assumptions();
        assert!(rep.discount_bounded.holds);
        let expected = 0.1 * 0.25 * 0.25 * 0.055;
        assert!((rep.discount_bounded.margin - expected).abs() < 1e-15);
        assert_eq!(p.shirk_threshold(1).unwrap(), 0.0);
    }

    #[test]
    fn intensity_values() {
        let p = demo_params_one_loan();
        assert_eq!(p.intensity(1, 0).unwrap(), 0.055);
        assert!((p.intensity(1, 1).unwrap() - 0.06875).abs() < 1e-15);
        assert!(p.intensity(1, 2).is_err());
        assert!(p.intensity(0, 0).is_err());
        assert!(p.intensity(2, 0).is_err());

        let p3 = demo_params(3);
        assert!((p3.intensity(3, 3).unwrap() - p3.lambda_shirk(3)).abs() < 1e-15);
        assert_eq!(p3.intensity(3, 0).unwrap(), p3.lambda_work(3));
    }

    #[test]
    fn intensity_affine_in_shirked_count() {
        let p = demo_params(4);
        for j in 1..=4 {
            for k in 0..j {
                let step = p.intensity(j, k + 1).unwrap() - p.intensity(j, k).unwrap();
                assert!((step - p.alpha(j) * p.eps).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn shirk_threshold_round_trip_and_monotone() {
        let p = demo_params(5);
        for j in 1..=5 {
            let b = p.shirk_threshold(j).unwrap();
            assert!((b * p.alpha(j) * p.eps - p.private_benefit).abs() < 1e-15);
        }
        assert!(p.validate_assumptions().all_hold());
        for j in 2..=5 {
            assert!(p.shirk_threshold(j).unwrap() >= p.shirk_threshold(j - 1).unwrap());
        }
    }

    #[test]
    fn strict_schema_rejects_unknown_keys() {
        let good = r#"{"I":1,"mu":0.1,"B":0.002,"eps":0.25,"r":0.02,
            "alpha":[0.055],"rho_g":2.0,"rho_b":1.0,"p_g":0.5,"p_b":0.5}"#;
        assert!(ModelParams::from_json(good).is_ok());
        let bad = r#"{"I":1,"mu":0.1,"B":0.002,"eps":0.25,"r":0.02,
            "alpha":[0.055],"rho_g":2.0,"rho_b":1.0,"p_g":0.5,"p_b":0.5,"extra":1}"#;
        assert!(ModelParams::from_json(bad).is_err());
    }

    #[test]
    fn intensity_table_matches_params() {
        let p = demo_params(3);
        let t = IntensityTable::new(&p).unwrap();
        for j in 1..=3 {
            assert_eq!(t.lambda_0(j), p.lambda_work(j));
            assert_eq!(t.lambda_sh(j), p.lambda_shirk(j));
            assert_eq!(t.lambda_k(j, j), p.lambda_shirk(j));
            assert_eq!(t.b_hat(j), p.shirk_threshold(j).unwrap());
        }
    }
}
