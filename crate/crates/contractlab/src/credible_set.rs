//! Credible-set geometry for each remaining pool size `j`: the set of
//! (bad-bank value, good-bank value) pairs attainable by admissible contracts
//! that keep both values attainable at all later times.
//!
//! The lower boundary is piecewise linear: the diagonal up to the maximal
//! all-shirk utility `C(j)`, then the lump-sum ray of slope `rho_g / rho_b`.
//! The upper boundary is a three-piece C^1 function: linear with slope
//! `(rho_g/rho_b)^((r+lam_sh)/(r+lam_0))` from the shirk corner, a concave
//! power bridge on `[x_star, b_hat)`, and the ray `(rho_g/rho_b) u` beyond
//! the incentive threshold. `x_star` is exactly where the upper boundary
//! crosses `b_hat`: from there on the good bank monitors.

use crate::model::ModelParams;
use crate::{Error, Result};

/// Utility a bank draws from pure shirking when the pool starts at `j` loans
/// and is liquidated exactly after the next `m` defaults. Both types get the
/// same value: payments are zero, the private benefit is type-free.
///
/// Evaluated by the pool-size recursion
/// `c(j, m) = B j / (r + lam_sh_j) + q_j c(j-1, m-1)`, `q_j = lam_sh_j / (r
/// + lam_sh_j)`, which telescopes to the nested-product form.
pub fn shirk_utility(params: &ModelParams, j: usize, m: usize) -> Result<f64> {
    if j == 0 || j > params.loans {
        return Err(Error::domain(format!("pool size {j} outside 1..={}", params.loans)));
    }
    if m == 0 || m > j {
        return Err(Error::domain(format!("liquidation after {m} defaults needs 1..={j}")));
    }
    let mut value = 0.0;
    // Walk pool sizes j-m+1..=j from the smallest up.
    for pool in (j - m + 1)..=j {
        let lam = params.lambda_shirk(pool);
        let denom = params.r + lam;
        value = params.private_benefit * pool as f64 / denom + value * lam / denom;
    }
    Ok(value)
}

/// `C(j) = c(j, j)`: the supremum of shirking utility, reached when the pool
/// is maintained until the last default.
pub fn max_shirk_utility(params: &ModelParams, j: usize) -> Result<f64> {
    shirk_utility(params, j, j)
}

/// Closed-form boundaries of the credible set with `j` loans left.
#[derive(Debug, Clone)]
pub struct CredibleSetGeometry {
    pub j: usize,
    /// `c(j, 1..=j)`; `c_table[m-1]` is `c(j, m)`.
    pub c_table: Vec<f64>,
    /// `C(j) = c(j, j)`.
    pub c_max: f64,
    /// Kink of the upper boundary where the good bank starts monitoring.
    pub x_star: f64,
    /// Incentive threshold `b_hat_j`.
    pub b_hat: f64,
    r: f64,
    lam0: f64,
    lam_sh: f64,
    ratio: f64,
}

impl CredibleSetGeometry {
    pub fn new(params: &ModelParams, j: usize) -> Result<Self> {
        params.validate()?;
        let mut c_table = Vec::with_capacity(j);
        for m in 1..=j {
            c_table.push(shirk_utility(params, j, m)?);
        }
        let b_hat = params.shirk_threshold(j)?;
        let r = params.r;
        let lam0 = params.lambda_work(j);
        let lam_sh = params.lambda_shirk(j);
        let ratio = params.rho_g / params.rho_b;
        let sigma = (r + lam_sh) / (r + lam0);
        let x_star = (1.0 / ratio).powf(sigma) * b_hat * (r + lam0) / (r + lam_sh) + c_table[0];
        Ok(CredibleSetGeometry {
            j,
            c_max: c_table[j - 1],
            c_table,
            x_star,
            b_hat,
            r,
            lam0,
            lam_sh,
            ratio,
        })
    }

    /// Left endpoint `c(j, 1)` where the two boundaries meet.
    pub fn floor(&self) -> f64 {
        self.c_table[0]
    }

    /// Lowest good-bank value compatible with bad-bank value `u_b`.
    pub fn lower_boundary(&self, u_b: f64) -> Result<f64> {
        if u_b < self.floor() - 1e-12 {
            return Err(Error::domain(format!(
                "u_b = {u_b} below the feasible floor c({},1) = {}",
                self.j,
                self.floor()
            )));
        }
        if u_b <= self.c_max {
            Ok(u_b)
        } else {
            Ok(self.ratio * u_b - (self.ratio - 1.0) * self.c_max)
        }
    }

    /// Highest good-bank value compatible with bad-bank value `u_b`.
    pub fn upper_boundary(&self, u_b: f64) -> Result<f64> {
        let c1 = self.floor();
        if u_b < c1 - 1e-12 {
            return Err(Error::domain(format!(
                "u_b = {u_b} below the feasible floor c({},1) = {c1}",
                self.j
            )));
        }
        let u_b = u_b.max(c1);
        if u_b >= self.b_hat {
            return Ok(self.ratio * u_b);
        }
        let sigma = (self.r + self.lam_sh) / (self.r + self.lam0);
        if u_b < self.x_star {
            Ok(self.ratio.powf(sigma) * (u_b - c1) + c1)
        } else {
            Ok(self.power_bridge(u_b - c1))
        }
    }

    /// Derivative of the upper boundary (one-sided from the right at kinks).
    pub fn upper_boundary_deriv(&self, u_b: f64) -> Result<f64> {
        let c1 = self.floor();
        if u_b < c1 - 1e-12 {
            return Err(Error::domain("below feasible floor".to_string()));
        }
        let sigma = (self.r + self.lam_sh) / (self.r + self.lam0);
        if u_b >= self.b_hat {
            Ok(self.ratio)
        } else if u_b < self.x_star {
            Ok(self.ratio.powf(sigma))
        } else {
            let k = self.bridge_coefficient();
            Ok(k / sigma * (u_b - c1).powf(1.0 / sigma - 1.0))
        }
    }

    fn bridge_coefficient(&self) -> f64 {
        let sigma = (self.r + self.lam_sh) / (self.r + self.lam0);
        let pow_exp = (self.lam_sh - self.lam0) / (self.r + self.lam_sh);
        self.ratio * self.b_hat.powf(pow_exp) * sigma.powf(1.0 / sigma)
    }

    fn power_bridge(&self, du: f64) -> f64 {
        let sigma = (self.r + self.lam_sh) / (self.r + self.lam0);
        self.bridge_coefficient() * du.powf(1.0 / sigma)
    }

    /// Membership test: `u_b` feasible and `u_g` between the boundaries.
    pub fn contains(&self, u_b: f64, u_g: f64) -> bool {
        if u_b < self.floor() {
            return false;
        }
        let lo = self.lower_boundary(u_b).expect("u_b checked");
        let hi = self.upper_boundary(u_b).expect("u_b checked");
        lo <= u_g && u_g <= hi
    }

    /// Default truncation level for grids and plots.
    pub fn default_u_max(&self) -> f64 {
        (3.0 * self.b_hat).max(2.0 * self.c_max)
    }
}

/// Outcome of the numerical cross-check of the one-loan upper boundary.
#[derive(Debug, Clone, serde::Serialize)]
pub struct OdeCheck {
    /// Max deviation of the integrated solution from the closed form.
    pub max_abs_error: f64,
    /// Where the integration detected the good-bank regime switch, located by
    /// bisection; should agree with `x_star`.
    pub located_switch: f64,
    /// Relative derivative jump of the closed form at `x_star` (central
    /// differences straddling the kink).
    pub kink_jump_x_star: f64,
    /// Same at `b_hat`.
    pub kink_jump_b_hat: f64,
    /// Error contraction when the step is halved; ~2 for first order.
    pub convergence_ratio: f64,
}

/// Integrates the one-loan diffusion equation for the upper boundary
/// backwards from the saturated far field and reports the deviation from the
/// closed form over `[c(1,1), 3 b_hat]`.
///
/// The regimes are detected by sign tests on the two incentive indicators
/// (bank shirks iff her state is below `b_hat`; the candidate boundary value
/// switches the good-bank regime when it crosses `b_hat`), with the switch
/// point located by bisection to 1e-12.
pub fn verify_upper_boundary_ode(params: &ModelParams, j: usize, h: f64) -> Result<OdeCheck> {
    if j != 1 {
        return Err(Error::domain("the diffusion cross-check is specific to one loan".into()));
    }
    if !(h > 0.0) {
        return Err(Error::domain("grid spacing must be positive".into()));
    }
    let geom = CredibleSetGeometry::new(params, 1)?;
    let (err_h, switch) = integrate_one_loan(params, &geom, h)?;
    let (err_h2, _) = integrate_one_loan(params, &geom, h / 2.0)?;
    let ratio = if err_h2 > 0.0 { err_h / err_h2 } else { f64::INFINITY };
    if err_h > 1e-9 && ratio < 1.3 {
        return Err(Error::solver(format!(
            "step {h} too large: halving it contracts the residual only by {ratio:.3}"
        )));
    }

    // Derivative jumps of the closed form at its kinks, by central
    // differences with a straddle much wider than roundoff.
    let dstep = 1e-7;
    let jump = |x: f64| -> f64 {
        let left = (geom.upper_boundary(x).unwrap() - geom.upper_boundary(x - dstep).unwrap()) / dstep;
        let right = (geom.upper_boundary(x + dstep).unwrap() - geom.upper_boundary(x).unwrap()) / dstep;
        ((right - left) / left.abs()).abs()
    };

    Ok(OdeCheck {
        max_abs_error: err_h,
        located_switch: switch,
        kink_jump_x_star: jump(geom.x_star),
        kink_jump_b_hat: jump(geom.b_hat),
        convergence_ratio: ratio,
    })
}

fn integrate_one_loan(
    params: &ModelParams,
    geom: &CredibleSetGeometry,
    h: f64,
) -> Result<(f64, f64)> {
    let r = params.r;
    let b = params.private_benefit;
    let lam0 = params.lambda_work(1);
    let lam_sh = params.lambda_shirk(1);
    let b_hat = geom.b_hat;
    let c1 = geom.floor();
    let ratio = params.rho_g / params.rho_b;

    // rhs of the diffusion equation solved for the derivative.
    let rhs = |u: f64, val: f64| -> f64 {
        let k_b = if u < b_hat { 1.0 } else { 0.0 };
        let k_g = if val < b_hat { 1.0 } else { 0.0 };
        let drift = r * u - b * k_b + u * (lam0 + (lam_sh - lam0) * k_b);
        (r * val + val * (lam0 + (lam_sh - lam0) * k_g) - b * k_g) / drift
    };

    let u_hi = 3.0 * b_hat;
    let u_lo = c1 + 1e-6;
    let mut u = u_hi;
    let mut val = ratio * u_hi; // saturated far field
    let mut max_err: f64 = 0.0;
    let mut switch_located = f64::NAN;

    let heun_step = |u: f64, val: f64, step: f64| -> f64 {
        let k1 = rhs(u, val);
        let k2 = rhs(u - step, val - step * k1);
        val - step * 0.5 * (k1 + k2)
    };

    while u > u_lo {
        let step = h.min(u - u_lo);
        let mut next = heun_step(u, val, step);
        // Regime switch of the good-bank indicator inside the step: bisect
        // the step length until the candidate lands on b_hat.
        if (val - b_hat) * (next - b_hat) < 0.0 {
            let mut lo = 0.0;
            let mut hi = step;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let v = heun_step(u, val, mid);
                if (val - b_hat) * (v - b_hat) < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-12 {
                    break;
                }
            }
            let cut = 0.5 * (lo + hi);
            next = heun_step(u, val, cut);
            switch_located = u - cut;
            u -= cut;
            val = next;
        } else {
            u -= step;
            val = next;
        }
        let exact = geom.upper_boundary(u)?;
        max_err = max_err.max((val - exact).abs());
    }
    Ok((max_err, switch_located))
}
