//! Investor value of the pure-moral-hazard contract with the bad bank, and
//! its payment free boundary `gamma_j`.
//!
//! With `j` loans and a promised bank value `u`, the optimal contract defers
//! payments while `u` rides up under the displayed feedback controls, starts
//! a constant payment stream once `u` reaches `gamma_j`, and settles any
//! excess promise with an immediate lump sum. The value function `v_j` is the
//! unique solution of the one-dimensional variational inequality with the
//! gradient constraint `v' >= -1/rho_b`; the free boundary is located where
//! holding the state becomes exactly as good as paying, which is the maximum
//! of `gamma |-> V_hold(gamma) + gamma / rho_b` and makes the pasting
//! `v'(gamma) = -1/rho_b` automatic.
//!
//! The solver works recursively in the pool size: the jump continuation for
//! pool `j` is the full pool-`j-1` value (power branch below the incentive
//! threshold, tabulated ride, linear payment tail). The pool-0 continuation
//! is `-x / rho_b`: a residual promise left when the last loan defaults under
//! a maintaining contract is settled in cash.

use crate::model::ModelParams;
use crate::{credible_set, Error, Result};

/// Solved pure-moral-hazard problem for one pool size.
#[derive(Debug, Clone)]
pub struct PmhSolution {
    pub j: usize,
    /// Payment free boundary `gamma_j`.
    pub gamma_b: f64,
    /// `v_j(b_hat_j)`, the junction with the shirk-region power branch.
    pub value_at_b_hat: f64,
    /// `v_j(gamma_j)`, the held-state value.
    pub value_at_gamma: f64,
    /// Incentive threshold `b_hat_j`.
    pub b_hat: f64,
    /// Feasible floor `c(j,1)`.
    pub c_floor: f64,
    /// `b_hat_{j-1}` (zero when `j = 1`).
    pub prev_b_hat: f64,
    us: Vec<f64>,
    vs: Vec<f64>,
    dvs: Vec<f64>,
    r: f64,
    rho_b: f64,
    mu_j: f64,
    lam0: f64,
    lam_sh: f64,
}

/// Continuation value of the investor after the pool has emptied while a
/// promise `x` to the bad bank is still outstanding: settle it in cash.
fn pool_zero_continuation(x: f64, rho_b: f64) -> f64 {
    -x / rho_b
}

impl PmhSolution {
    /// `v_j(u)` for `u >= b_hat_j`: tabulated ride, linear tail past `gamma`.
    pub fn pmh_value(&self, u: f64) -> Result<f64> {
        if u < self.b_hat - 1e-12 {
            return Err(Error::domain(format!(
                "pmh value queried at u = {u} below b_hat = {}; sub-threshold values \
                 come from the upper-boundary closed forms",
                self.b_hat
            )));
        }
        Ok(self.continuation_value(u.max(self.b_hat)))
    }

    /// `v_j'(u)` for `u >= b_hat_j`.
    pub fn pmh_deriv(&self, u: f64) -> Result<f64> {
        if u < self.b_hat - 1e-12 {
            return Err(Error::domain("below b_hat".to_string()));
        }
        Ok(self.continuation_deriv(u.max(self.b_hat)))
    }

    /// Investor continuation value for a promise `x` anywhere on
    /// `[c(j,1), inf)`: shirk-region power branch below `b_hat_j`, the
    /// tabulated ride between `b_hat_j` and `gamma_j`, linear tail beyond.
    pub fn continuation_value(&self, x: f64) -> f64 {
        if x >= self.gamma_b {
            return self.value_at_gamma - (x - self.gamma_b) / self.rho_b;
        }
        if x >= self.b_hat {
            return interp(&self.us, &self.vs, x);
        }
        let base = self.mu_j / self.lam_sh;
        base + (self.value_at_b_hat - base) * self.power_factor(x)
    }

    /// Derivative of [`Self::continuation_value`] (right-sided at kinks).
    pub fn continuation_deriv(&self, x: f64) -> f64 {
        if x >= self.gamma_b {
            return -1.0 / self.rho_b;
        }
        if x >= self.b_hat {
            return interp(&self.us, &self.dvs, x);
        }
        let p = self.lam_sh / (self.r + self.lam_sh);
        let base = self.mu_j / self.lam_sh;
        let scale = self.b_hat - self.c_floor;
        (self.value_at_b_hat - base) * p / scale * ((x - self.c_floor) / scale).powf(p - 1.0)
    }

    /// Coefficient of the shirk-branch power term,
    /// `(v_j(b_hat) - mu j / lam_sh) * (b_hat (r+lam_0)/(r+lam_sh))^(-p)`.
    pub fn power_coefficient(&self) -> f64 {
        let p = self.lam_sh / (self.r + self.lam_sh);
        (self.value_at_b_hat - self.mu_j / self.lam_sh) / (self.b_hat - self.c_floor).powf(p)
    }

    fn power_factor(&self, x: f64) -> f64 {
        let p = self.lam_sh / (self.r + self.lam_sh);
        let z = ((x - self.c_floor) / (self.b_hat - self.c_floor)).max(0.0);
        z.powf(p)
    }

    /// Constant payment rate that freezes the state at the free boundary.
    pub fn holding_payment_rate(&self) -> f64 {
        (self.lam0 * self.b_hat + self.r * self.gamma_b) / self.rho_b
    }

    /// Tabulation nodes (ride region), for CSV output and tests.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.us
            .iter()
            .zip(&self.vs)
            .zip(&self.dvs)
            .map(|((u, v), d)| (*u, *v, *d))
    }

    /// Residual of the ride equation at `u` under the displayed controls
    /// (zero on the no-payment region for the exact solution).
    pub fn ride_residual(&self, u: f64, prev: Option<&PmhSolution>) -> f64 {
        let (cont, _) = displayed_continuation(u - self.b_hat, self.prev_b_hat, prev, self.rho_b);
        let drift = self.r * u + self.lam0 * self.b_hat;
        self.mu_j + self.continuation_deriv(u) * drift
            + self.lam0 * (cont - self.continuation_value(u))
    }
}

/// Jump continuation `theta * Phi_{j-1}(h2)` and the maintenance probability
/// `theta` under the displayed controls, as a function of the excess promise
/// `x = u - b_hat_j`.
fn displayed_continuation(
    x: f64,
    prev_b_hat: f64,
    prev: Option<&PmhSolution>,
    rho_b: f64,
) -> (f64, f64) {
    let phi = |y: f64| match prev {
        Some(p) => p.continuation_value(y),
        None => pool_zero_continuation(y, rho_b),
    };
    if x <= 0.0 {
        (0.0, 0.0)
    } else if x < prev_b_hat {
        let theta = x / prev_b_hat;
        (theta * phi(prev_b_hat), theta)
    } else {
        (phi(x), 1.0)
    }
}

/// Value of holding the state at `gamma` forever: constant payments offset
/// the drift; a default (all loans monitored, intensity `lam_0`) maintains
/// the pool with the displayed probability and continuation split.
fn hold_value(
    params: &ModelParams,
    j: usize,
    gamma: f64,
    prev: Option<&PmhSolution>,
    prev_b_hat: f64,
) -> f64 {
    let lam0 = params.lambda_work(j);
    let b_hat = params.shirk_threshold(j).expect("pool checked");
    let delta = (params.r * gamma + lam0 * b_hat) / params.rho_b;
    let (cont, _) = displayed_continuation(gamma - b_hat, prev_b_hat, prev, params.rho_b);
    (params.mu * j as f64 - delta + lam0 * cont) / lam0
}

/// Number of tabulation nodes per pool size.
const RIDE_NODES: usize = 4096;

/// Solves pool size `j` given the solution for `j - 1` (`None` for `j = 1`).
pub fn solve_pmh(params: &ModelParams, j: usize, previous: Option<&PmhSolution>) -> Result<PmhSolution> {
    params.validate()?;
    if j == 0 || j > params.loans {
        return Err(Error::domain(format!("pool size {j} outside 1..={}", params.loans)));
    }
    match (j, previous) {
        (1, None) => {}
        (_, Some(p)) if p.j + 1 == j => {}
        _ => {
            return Err(Error::Dependency(format!(
                "solving pool size {j} requires the solution for {}",
                j - 1
            )))
        }
    }
    let report = params.validate_assumptions();
    if !report.all_hold() {
        return Err(Error::InvalidModel(
            "the free-boundary construction requires all three standing assumptions".into(),
        ));
    }

    let r = params.r;
    let rho_b = params.rho_b;
    let mu_j = params.mu * j as f64;
    let lam0 = params.lambda_work(j);
    let lam_sh = params.lambda_shirk(j);
    let b_hat = params.shirk_threshold(j)?;
    let c_floor = credible_set::shirk_utility(params, j, 1)?;
    let prev_b_hat = previous.map_or(0.0, |p| p.b_hat);
    let prev_gamma = previous.map_or(0.0, |p| p.gamma_b);

    // Free boundary: maximise V_hold(gamma) + gamma/rho_b over the bracket
    // [b_hat, b_hat + gamma_{j-1}]. Beyond the right end the previous value
    // has slope -1/rho_b and the objective strictly decreases.
    let objective = |g: f64| hold_value(params, j, g, previous, prev_b_hat) + g / rho_b;
    let gamma = if prev_gamma <= 0.0 {
        b_hat
    } else {
        let lo = b_hat;
        let hi = b_hat + prev_gamma;
        let mut best_g = lo;
        let mut best = objective(lo);
        let scan = 4096;
        for i in 0..=scan {
            let g = lo + (hi - lo) * i as f64 / scan as f64;
            let v = objective(g);
            if v > best {
                best = v;
                best_g = g;
            }
        }
        // the kink where the ramp region ends is a candidate maximiser
        let kink = b_hat + prev_b_hat;
        if kink <= hi && objective(kink) >= best {
            best_g = kink;
        }
        let cell = (hi - lo) / scan as f64;
        golden_max(&objective, (best_g - cell).max(lo), (best_g + cell).min(hi), 1e-12)
    };
    let value_at_gamma = hold_value(params, j, gamma, previous, prev_b_hat);

    // Backward ride integration from the free boundary to b_hat on
    // Chebyshev-spaced nodes (clustered at both ends).
    let n = RIDE_NODES;
    let mut us = Vec::with_capacity(n + 1);
    if gamma > b_hat + 1e-14 {
        let mid = 0.5 * (b_hat + gamma);
        let half = 0.5 * (gamma - b_hat);
        for k in 0..=n {
            let t = std::f64::consts::PI * k as f64 / n as f64;
            us.push(mid - half * t.cos());
        }
        us[0] = b_hat;
        us[n] = gamma;
    } else {
        us.push(b_hat);
    }
    let rhs = |u: f64, w: f64| -> f64 {
        let (cont, _) = displayed_continuation(u - b_hat, prev_b_hat, previous, rho_b);
        (lam0 * (w - cont) - mu_j) / (r * u + lam0 * b_hat)
    };
    let m = us.len();
    let mut vs = vec![0.0; m];
    let mut dvs = vec![0.0; m];
    vs[m - 1] = value_at_gamma;
    dvs[m - 1] = rhs(us[m - 1], value_at_gamma);
    for k in (0..m - 1).rev() {
        // Heun with substeps so coarse Chebyshev interiors stay accurate.
        let mut u = us[k + 1];
        let mut w = vs[k + 1];
        let span = us[k + 1] - us[k];
        let sub = 1 + (span / (gamma - b_hat).max(1e-300) * 64.0) as usize;
        let h = span / sub as f64;
        for _ in 0..sub {
            let k1 = rhs(u, w);
            let k2 = rhs(u - h, w - h * k1);
            w -= h * 0.5 * (k1 + k2);
            u -= h;
        }
        vs[k] = w;
        dvs[k] = rhs(us[k], w);
    }
    let value_at_b_hat = vs[0];

    let solution = PmhSolution {
        j,
        gamma_b: gamma,
        value_at_b_hat,
        value_at_gamma,
        b_hat,
        c_floor,
        prev_b_hat,
        us,
        vs,
        dvs,
        r,
        rho_b,
        mu_j,
        lam0,
        lam_sh,
    };

    // The ride must respect the gradient constraint; a violation means the
    // hold objective was not unimodal and the single-boundary construction
    // does not apply.
    for (u, _, d) in solution.nodes() {
        if d < -1.0 / rho_b - 1e-7 {
            return Err(Error::solver(format!(
                "gradient constraint violated at u = {u} while solving pool size {j}"
            )));
        }
    }
    Ok(solution)
}

/// Solves pool sizes `1..=j_max` in order.
pub fn solve_chain(params: &ModelParams, j_max: usize) -> Result<Vec<PmhSolution>> {
    let mut chain: Vec<PmhSolution> = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        let prev = chain.last();
        let sol = solve_pmh(params, j, prev)?;
        chain.push(sol);
    }
    Ok(chain)
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = 0.618_033_988_749_894_9;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.len() == 1 {
        return ys[0];
    }
    let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => return ys[i],
        Err(0) => 0,
        Err(i) if i >= xs.len() => xs.len() - 2,
        Err(i) => i - 1,
    };
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] * (1.0 - t) + ys[i + 1] * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{demo_params, demo_params_one_loan};

    #[test]
    fn one_loan_boundary_sits_at_the_incentive_threshold() {
        let p = demo_params_one_loan();
        let sol = solve_pmh(&p, 1, None).unwrap();
        assert_eq!(sol.gamma_b, sol.b_hat);
        // hold value in closed form: mu/lam0 - (r+lam0) b_hat / (rho lam0)
        let expect = p.mu / 0.055 - 0.075 * sol.b_hat / 0.055;
        assert!((sol.value_at_b_hat - expect).abs() < 1e-12);
        // linear tail with slope -1/rho_b
        let v1 = sol.pmh_value(sol.gamma_b + 1.0).unwrap();
        assert!((v1 - (sol.value_at_gamma - 1.0 / p.rho_b)).abs() < 1e-12);
        assert_eq!(sol.pmh_deriv(sol.gamma_b + 0.5).unwrap(), -1.0 / p.rho_b);
        assert!(sol.pmh_value(sol.b_hat - 1e-3).is_err());
    }

    #[test]
    fn chain_boundaries_ladder() {
        let p = demo_params(3);
        let chain = solve_chain(&p, 3).unwrap();
        let g1 = chain[0].gamma_b;
        let g2 = chain[1].gamma_b;
        let g3 = chain[2].gamma_b;
        // gamma_1 = b_hat_1, gamma_2 = b_hat_2 + b_hat_1 (kink maximiser),
        // gamma_3 strictly interior above b_hat_3 + b_hat_2.
        assert_eq!(g1, chain[0].b_hat);
        assert!((g2 - (chain[1].b_hat + chain[0].b_hat)).abs() < 1e-9, "g2 = {g2}");
        assert!(g3 > chain[2].b_hat + chain[1].b_hat);
        assert!(g3 < chain[2].b_hat + g2 + 1e-12);
    }

    #[test]
    fn ride_satisfies_the_equation_and_gradient_constraint() {
        let p = demo_params(2);
        let chain = solve_chain(&p, 2).unwrap();
        let sol = &chain[1];
        let prev = Some(&chain[0]);
        let scale = sol.value_at_gamma.abs();
        for (u, _, d) in sol.nodes() {
            if u < sol.gamma_b - 1e-12 {
                let resid = sol.ride_residual(u, prev);
                assert!(resid.abs() < 1e-6 * scale, "residual {resid} at {u}");
            }
            assert!(d >= -1.0 / p.rho_b - 1e-9);
        }
        // complementarity past the boundary: holding is weakly dominated
        for t in [0.1, 0.5, 1.0] {
            let u = sol.gamma_b + t;
            let resid = sol.ride_residual(u, prev);
            assert!(resid < 1e-9, "residual {resid} should be non-positive at {u}");
        }
    }

    #[test]
    fn pasting_is_smooth_at_the_boundary() {
        let p = demo_params(3);
        let chain = solve_chain(&p, 3).unwrap();
        for sol in &chain[1..] {
            let d = sol.pmh_deriv(sol.gamma_b - 1e-9).unwrap();
            assert!((d + 1.0 / p.rho_b).abs() < 1e-5, "slope {d} at gamma for j={}", sol.j);
        }
    }

    #[test]
    fn value_has_interior_maximum_then_decreases() {
        let p = demo_params(2);
        let chain = solve_chain(&p, 2).unwrap();
        let sol = &chain[1];
        let mut seen_max = false;
        let mut prev = f64::NEG_INFINITY;
        let mut rising = true;
        for (_, v, _) in sol.nodes() {
            if rising && v < prev - 1e-12 {
                rising = false;
                seen_max = true;
            }
            if !rising {
                assert!(v <= prev + 1e-9, "value rose again after its maximum");
            }
            prev = v;
        }
        assert!(seen_max, "expected an interior maximum on the ride");
    }

    #[test]
    fn sub_threshold_branch_joins_continuously() {
        let p = demo_params(2);
        let chain = solve_chain(&p, 2).unwrap();
        for sol in &chain {
            let below = sol.continuation_value(sol.b_hat - 1e-10);
            assert!((below - sol.value_at_b_hat).abs() < 1e-6);
            let at_floor = sol.continuation_value(sol.c_floor);
            assert!((at_floor - sol.mu_j / sol.lam_sh).abs() < 1e-12);
        }
    }

    #[test]
    fn holding_payment_rate_scales_inversely_with_rho() {
        let p = demo_params_one_loan();
        let mut p2 = p.clone();
        p2.rho_b = 0.5;
        p2.rho_g = 1.0; // keep the ordering
        let a = solve_pmh(&p, 1, None).unwrap();
        let b = solve_pmh(&p2, 1, None).unwrap();
        assert_eq!(a.gamma_b, b.gamma_b);
        assert!((b.holding_payment_rate() - 2.0 * a.holding_payment_rate()).abs() < 1e-12);
        assert_eq!(b.pmh_deriv(b.gamma_b + 1.0).unwrap(), -2.0);
    }

    #[test]
    fn requires_predecessor() {
        let p = demo_params(2);
        assert!(solve_pmh(&p, 2, None).is_err());
        let one = solve_pmh(&p, 1, None).unwrap();
        assert!(solve_pmh(&p, 2, Some(&one)).is_ok());
    }
}
