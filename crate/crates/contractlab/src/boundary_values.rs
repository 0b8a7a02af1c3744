//! Investor value functions on the boundaries of the credible set.
//!
//! On the outer lower boundary (`u >= C(j)`) the value is a lump-sum closed
//! form. On the inner lower boundary (`c(j,1) < u < C(j)`) the investor
//! chooses when to stop liquidating at defaults; the problem is solved
//! through its Lagrangian dual, whose multiplier equation involves the
//! densities of default times under the all-shirk measure (hypoexponential
//! laws). On the upper boundary the value is a two- or three-branch closed
//! form pasted to the pure-moral-hazard value at the incentive threshold.

use crate::model::ModelParams;
use crate::pmh::PmhSolution;
use crate::{credible_set, Error, Result};

/// Density of a sum of independent exponentials, kept as a list of
/// `coef * x^pow * exp(-rate x)` terms. Rates closer than 1e-9 relative are
/// merged, which turns the partial-fraction expansion into its Erlang-style
/// confluent limit instead of cancelling catastrophically.
#[derive(Debug, Clone)]
pub struct HypoexpDensity {
    terms: Vec<Term>,
    rates: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Term {
    coef: f64,
    pow: u32,
    rate: f64,
}

const MERGE_REL_TOL: f64 = 1e-9;

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `int_s^inf x^p e^(-a x) dx` for integer `p >= 0`, `a > 0`, `s >= 0`.
fn upper_gamma_poly(p: u32, a: f64, s: f64) -> f64 {
    let mut series = 0.0;
    let mut term = 1.0;
    for m in 0..=p {
        if m > 0 {
            term *= a * s / m as f64;
        }
        series += term;
    }
    factorial(p) / a.powi(p as i32 + 1) * (-a * s).exp() * series
}

impl HypoexpDensity {
    pub fn new(rates: &[f64]) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::domain("hypoexponential law needs at least one rate".into()));
        }
        if rates.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::domain("all rates must be positive".into()));
        }
        let mut terms = vec![Term { coef: rates[0], pow: 0, rate: rates[0] }];
        for &lam in &rates[1..] {
            terms = convolve_with_exponential(&terms, lam);
        }
        Ok(HypoexpDensity { terms, rates: rates.to_vec() })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.terms
            .iter()
            .map(|t| t.coef * x.powi(t.pow as i32) * (-t.rate * x).exp())
            .sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        1.0 - self.tail_prob(x)
    }

    /// `P(tau > s)`.
    pub fn tail_prob(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 1.0;
        }
        self.terms
            .iter()
            .map(|t| t.coef * upper_gamma_poly(t.pow, t.rate, s))
            .sum()
    }

    /// `int_s^inf e^(-r x) f(x) dx`, exact per term.
    pub fn discounted_tail(&self, s: f64, r: f64) -> f64 {
        let s = s.max(0.0);
        self.terms
            .iter()
            .map(|t| t.coef * upper_gamma_poly(t.pow, t.rate + r, s))
            .sum()
    }
}

fn convolve_with_exponential(terms: &[Term], lam: f64) -> Vec<Term> {
    let mut out: Vec<Term> = Vec::new();
    for t in terms {
        if (t.rate - lam).abs() <= MERGE_REL_TOL * t.rate.max(lam) {
            // confluent limit: x^p e^{-ax} * lam e^{-ax} -> lam x^{p+1}/(p+1) e^{-ax}
            push_term(&mut out, Term { coef: lam * t.coef / (t.pow as f64 + 1.0), pow: t.pow + 1, rate: t.rate });
        } else {
            let b = lam - t.rate; // integrand carries e^{b y}
            // lam c e^{-lam x} int_0^x y^p e^{b y} dy expanded by parts
            let p = t.pow;
            let mut fall = 1.0; // p!/(p-k)!
            for k in 0..=p {
                if k > 0 {
                    fall *= (p - k + 1) as f64;
                }
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                push_term(
                    &mut out,
                    Term {
                        coef: lam * t.coef * sign * fall / b.powi(k as i32 + 1),
                        pow: p - k,
                        rate: t.rate,
                    },
                );
            }
            let sign = if p % 2 == 0 { -1.0 } else { 1.0 };
            push_term(
                &mut out,
                Term {
                    coef: lam * t.coef * sign * factorial(p) / b.powi(p as i32 + 1),
                    pow: 0,
                    rate: lam,
                },
            );
        }
    }
    out
}

fn push_term(out: &mut Vec<Term>, t: Term) {
    for existing in out.iter_mut() {
        if existing.pow == t.pow
            && (existing.rate - t.rate).abs() <= MERGE_REL_TOL * existing.rate.max(t.rate)
        {
            existing.coef += t.coef;
            return;
        }
    }
    out.push(t);
}

/// Hypoexponential pdf of the given rate list at `x`.
pub fn hypoexp_pdf(rates: &[f64], x: f64) -> Result<f64> {
    Ok(HypoexpDensity::new(rates)?.pdf(x))
}

/// Density of the `i`-th default time (measured from now) when the pool
/// starts at `j` loans and everyone shirks throughout: the sum of the
/// exponentials with rates `lam_sh_j, ..., lam_sh_{j-i+1}`.
pub fn default_time_density(params: &ModelParams, j: usize, i: usize) -> Result<HypoexpDensity> {
    if i == 0 || i > j {
        return Err(Error::domain(format!("default index {i} outside 1..={j}")));
    }
    let rates: Vec<f64> = (0..i).map(|k| params.lambda_shirk(j - k)).collect();
    HypoexpDensity::new(&rates)
}

/// Deterministic maintenance cutoff for a default that would leave
/// `pool_after` loans: keep the pool only when the default arrives later
/// than this many time units after the start.
pub fn cutoff_s(params: &ModelParams, pool_after: usize, nu: f64) -> Result<f64> {
    if nu < 0.0 {
        return Err(Error::domain("multiplier must be non-negative".into()));
    }
    let lam = params.lambda_shirk(pool_after);
    let threshold = params.mu * (params.r + lam) / (params.private_benefit * lam);
    if nu <= threshold {
        return Ok(0.0);
    }
    if params.r == 0.0 {
        return Err(Error::domain(
            "r = 0 makes the maintenance cutoff degenerate for multipliers above threshold".into(),
        ));
    }
    Ok((nu * params.private_benefit * lam / (params.mu * (params.r + lam))).ln() / params.r)
}

/// Solved dual of the inner lower-boundary problem.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DualSolution {
    /// Multiplier on the promise-keeping constraint.
    pub nu: f64,
    /// Maintenance cutoffs per default index `1..j-1`.
    pub cutoffs: Vec<f64>,
    /// Investor value at the optimum.
    pub primal_value: f64,
    /// `|g'(nu)|` at the returned multiplier.
    pub residual: f64,
}

const NU_CAP: f64 = 1e12;

/// Derivative of the dual function: promise-keeping gap at multiplier `nu`.
fn dual_gradient(
    params: &ModelParams,
    j: usize,
    u_bc: f64,
    densities: &[HypoexpDensity],
    nu: f64,
) -> Result<f64> {
    let mut g = credible_set::shirk_utility(params, j, 1)? - u_bc;
    for m in (1..j).rev() {
        let i = j - m; // i-th default leaves m loans
        let s = cutoff_s(params, m, nu)?;
        let lam = params.lambda_shirk(m);
        let coupon = params.private_benefit * m as f64 / (params.r + lam);
        g += coupon * densities[i - 1].discounted_tail(s, params.r);
    }
    Ok(g)
}

/// Solves the inner lower-boundary problem at bad-bank value `u_bc` in
/// `[c(j,1), C(j))` by bisecting the monotone dual gradient.
pub fn solve_nu(params: &ModelParams, j: usize, u_bc: f64) -> Result<DualSolution> {
    params.validate()?;
    let floor = credible_set::shirk_utility(params, j, 1)?;
    let c_max = credible_set::max_shirk_utility(params, j)?;
    if u_bc < floor - 1e-12 || u_bc >= c_max {
        return Err(Error::domain(format!(
            "u = {u_bc} outside [c({j},1), C({j})) = [{floor}, {c_max})"
        )));
    }
    let densities: Vec<HypoexpDensity> =
        (1..j).map(|i| default_time_density(params, j, i)).collect::<Result<_>>()?;

    let g = |nu: f64| dual_gradient(params, j, u_bc, &densities, nu);
    let mut hi = 1.0;
    while g(hi)? > 0.0 {
        hi *= 4.0;
        if hi > NU_CAP {
            return Err(Error::solver(format!(
                "dual multiplier exceeds cap {NU_CAP}: u = {u_bc} is numerically at the floor"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    let residual = g(nu)?.abs();

    let mut cutoffs = Vec::with_capacity(j.saturating_sub(1));
    let mut primal = params.mu * j as f64 / params.lambda_shirk(j);
    for i in 1..j {
        let m = j - i;
        let s = cutoff_s(params, m, nu)?;
        cutoffs.push(s);
        primal += params.mu * m as f64 / params.lambda_shirk(m) * densities[i - 1].tail_prob(s);
    }
    Ok(DualSolution { nu, cutoffs, primal_value: primal, residual })
}

/// Investor value on the lower boundary at bad-bank value `u_bc`. The same
/// for both bank types: everyone shirks there.
pub fn value_lower(params: &ModelParams, j: usize, u_bc: f64) -> Result<f64> {
    let floor = credible_set::shirk_utility(params, j, 1)?;
    if u_bc < floor - 1e-12 {
        return Err(Error::domain(format!("u = {u_bc} below the floor {floor}")));
    }
    let c_max = credible_set::max_shirk_utility(params, j)?;
    if u_bc >= c_max {
        let full_run: f64 =
            (1..=j).map(|m| params.mu * m as f64 / params.lambda_shirk(m)).sum();
        Ok(full_run - (u_bc - c_max) / params.rho_b)
    } else {
        Ok(solve_nu(params, j, u_bc)?.primal_value)
    }
}

fn check_pmh(j: usize, pmh: &PmhSolution) -> Result<()> {
    if pmh.j != j {
        return Err(Error::Dependency(format!(
            "upper-boundary values for pool {j} need the pure-moral-hazard solution for {j}, got {}",
            pmh.j
        )));
    }
    Ok(())
}

/// Investor value on the upper boundary when contracting the good bank.
/// Three branches: shirk power, monitored-good power bridge from `x_star`,
/// and the pure-moral-hazard value from the incentive threshold on.
pub fn value_upper_good(params: &ModelParams, j: usize, u_bc: f64, pmh: &PmhSolution) -> Result<f64> {
    check_pmh(j, pmh)?;
    let geom = credible_set::CredibleSetGeometry::new(params, j)?;
    let c1 = geom.floor();
    if u_bc < c1 - 1e-12 {
        return Err(Error::domain(format!("u = {u_bc} below the floor {c1}")));
    }
    let u = u_bc.max(c1);
    if u >= geom.b_hat {
        return pmh.pmh_value(u);
    }
    let r = params.r;
    let lam0 = params.lambda_work(j);
    let lam_sh = params.lambda_shirk(j);
    let mu_j = params.mu * j as f64;
    let q = lam0 / (r + lam_sh);
    let bridge = |x: f64| -> f64 {
        mu_j / lam0
            + (pmh.value_at_b_hat - mu_j / lam0) * ((x - c1) / (geom.b_hat - c1)).powf(q)
    };
    if u >= geom.x_star {
        Ok(bridge(u))
    } else {
        let p = lam_sh / (r + lam_sh);
        let at_xstar = bridge(geom.x_star);
        let coef = (at_xstar - mu_j / lam_sh) / (geom.x_star - c1).powf(p);
        Ok(mu_j / lam_sh + coef * (u - c1).powf(p))
    }
}

/// Investor value on the upper boundary when contracting the bad bank. Two
/// branches: shirk power below the incentive threshold, the
/// pure-moral-hazard value from there on.
pub fn value_upper_bad(params: &ModelParams, j: usize, u_b: f64, pmh: &PmhSolution) -> Result<f64> {
    check_pmh(j, pmh)?;
    let floor = credible_set::shirk_utility(params, j, 1)?;
    if u_b < floor - 1e-12 {
        return Err(Error::domain(format!("u = {u_b} below the floor {floor}")));
    }
    Ok(pmh.continuation_value(u_b.max(floor)))
}
