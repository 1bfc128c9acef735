//! Closed forms for the two-node linear response model
//!
//! ```text
//! dx/dt = -x / t_rel + sqrt(D) G(t)
//! dy/dt = alpha x - beta y
//! ```
//!
//! Everything is written in the dimensionless variables `b = beta t_rel`,
//! `r = tau / t_rel`, `s = beta tau` and `eps = b - 1`. Differences such as
//! `e^{-r} - e^{-s}` are carried as `e^{-r} eps r phi1(-eps r)`, so the
//! removable singularity at `b = 1` needs no special branch.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gausscov::{StationaryModel, VarLabel};
use crate::measures::{Decomposer, Information};
use crate::network::{LinearNetwork, ValidatedNetwork};
use crate::special::{gamma_p_int, ln1p_over, maximize_over_lag, phi1};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlrmParams {
    pub alpha: f64,
    pub beta: f64,
    pub t_rel: f64,
    pub d: f64,
}

impl BlrmParams {
    pub fn new(alpha: f64, beta: f64, t_rel: f64, d: f64) -> Result<Self> {
        let p = BlrmParams {
            alpha,
            beta,
            t_rel,
            d,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.t_rel, self.d];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameter".into()));
        }
        if self.alpha == 0.0 {
            return Err(Error::InvalidParameter("alpha must be nonzero".into()));
        }
        if !(self.beta > 0.0 && self.t_rel > 0.0 && self.d > 0.0) {
            return Err(Error::InvalidParameter(
                "beta, t_rel and D must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `beta t_rel`.
    pub fn b(&self) -> f64 {
        self.beta * self.t_rel
    }

    pub fn network(&self) -> Result<ValidatedNetwork> {
        LinearNetwork::blrm(self.alpha, self.beta, self.t_rel, self.d).validate()
    }

    /// `D t_rel / 2`.
    pub fn sigma_x2(&self) -> f64 {
        self.d * self.t_rel / 2.0
    }

    pub fn sigma_y2(&self) -> f64 {
        self.alpha * self.alpha * self.t_rel / (self.beta * (self.b() + 1.0)) * self.sigma_x2()
    }

    /// `I(x(t); y(t)) = 1/2 ln(1 + b)`.
    pub fn i_xy(&self) -> f64 {
        0.5 * self.b().ln_1p()
    }
}

/// Regression slope of `y(t + tau)` on `x(t)` divided by `alpha t_rel`,
/// for a signed shift.
fn slope_factor(p: &BlrmParams, tau: f64) -> f64 {
    let b = p.b();
    let r = tau / p.t_rel;
    if r <= 0.0 {
        (r).exp() / (b + 1.0)
    } else {
        let eps = b - 1.0;
        (-r).exp() * r * phi1(-eps * r) + (-p.beta * tau).exp() / (b + 1.0)
    }
}

/// `<y(t - tau) | x(t)>` for `tau >= 0`.
pub fn conditional_mean_past(p: &BlrmParams, x_now: f64, tau: f64) -> f64 {
    x_now * p.alpha * p.t_rel / (p.b() + 1.0) * (-tau.abs() / p.t_rel).exp()
}

/// `<y(t + tau) | x(t)>` for `tau >= 0`.
pub fn conditional_mean_future(p: &BlrmParams, x_now: f64, tau: f64) -> f64 {
    x_now * p.alpha * p.t_rel * slope_factor(p, tau.abs())
}

/// Standard deviation of `y(t + shift)` given `x(t)`; negative shifts look
/// into the past. Taken from the exact covariance engine.
pub fn conditional_sd(p: &BlrmParams, shift: f64) -> Result<f64> {
    let net = p.network()?;
    let model = StationaryModel::new(&net)?;
    let law = model.at_lag(shift.abs())?;
    let (keep, given) = if shift >= 0.0 {
        (VarLabel::later("y"), VarLabel::now("x"))
    } else {
        (VarLabel::now("y"), VarLabel::later("x"))
    };
    use crate::gausscov::ConditionalGaussian;
    Ok(law.conditional(&[keep], &[given])?[(0, 0)].max(0.0).sqrt())
}

/// Signal-to-noise ratio of `y(t + shift)` given `x(t)`:
/// `I(x(t); y(t + shift)) = 1/2 ln(1 + snr)`.
pub fn snr(p: &BlrmParams, shift: f64) -> f64 {
    let b = p.b();
    let h = slope_factor(p, shift);
    let c2 = b * (b + 1.0) * h * h;
    c2 / (1.0 - c2)
}

/// `I(x(t); y(t + shift))`.
pub fn mutual_information(p: &BlrmParams, shift: f64) -> f64 {
    let b = p.b();
    let h = slope_factor(p, shift);
    -0.5 * (-(b * (b + 1.0) * h * h)).ln_1p()
}

/// Lag maximizing `I(x(t); y(t + tau))`:
/// `t_rel / (b - 1) ln(2b / (b + 1))`, equal to `t_rel / 2` at `b = 1`.
pub fn tau_opt(p: &BlrmParams) -> f64 {
    let b = p.b();
    let x = (b - 1.0) / (b + 1.0);
    p.t_rel * ln1p_over(x) / (b + 1.0)
}

/// Maximal lagged information,
/// `-1/2 ln(1 - 2 ((b + 1) / 2b)^{(b + 1)/(b - 1)})`; depends on `b` only.
pub fn i_opt(p: &BlrmParams) -> f64 {
    i_opt_b(p.b())
}

pub(crate) fn i_opt_b(b: f64) -> f64 {
    let x = (b - 1.0) / (b + 1.0);
    let l = ln1p_over(x);
    -0.5 * (-(std::f64::consts::LN_2 - l).exp_m1()).ln()
}

/// `J(b, r) = 2 int_0^r e^{-2q} P(q)^2 dq` with `P(q) = (1 - e^{-eps q}) / eps`.
///
/// The noise left on `y(t + tau)` once `x(t)` and `y(t)` are known is
/// `alpha^2 sigma_x^2 t_rel^2 J(b, tau / t_rel)`.
pub fn noise_integral(b: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let eps = b - 1.0;
    let u = eps * r;
    if 2.0 * r <= 1.0 && 2.0 * u.abs() <= 1.0 {
        // 2 r^3 int_0^1 q^2 e^{-2rq} phi1(-uq)^2 dq, expanded in powers of q
        const K: usize = 40;
        let mut e = [0.0f64; K];
        let mut f = [0.0f64; K];
        e[0] = 1.0;
        f[0] = 1.0;
        for k in 1..K {
            e[k] = e[k - 1] * (-2.0 * r) / k as f64;
            f[k] = f[k - 1] * (-u) / (k + 1) as f64;
        }
        let mut sum = 0.0;
        for k in (0..K).rev() {
            // coefficient of q^k in e(q) * f(q)^2
            let mut c = 0.0;
            for i in 0..=k {
                let mut ff = 0.0;
                for j in 0..=(k - i) {
                    ff += f[j] * f[k - i - j];
                }
                c += e[i] * ff;
            }
            sum += c / (k + 3) as f64;
        }
        2.0 * r * r * r * sum
    } else if eps.abs() <= 0.5 {
        // sum_m (-eps)^m (2^{m+1} - 1) / 2^{m+1} P(m + 3, 2r)
        let mut sum = 0.0;
        let mut pow = 1.0;
        for m in 0..200u32 {
            let w = 1.0 - 0.5f64.powi(m as i32 + 1);
            let term = pow * w * gamma_p_int(m + 3, 2.0 * r);
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            pow *= -eps;
        }
        sum
    } else {
        // (2r / eps^2) [phi1(-2r) - 2 phi1(-(2 + eps) r) + phi1(-(2 + 2 eps) r)]
        2.0 * r / (eps * eps)
            * (phi1(-2.0 * r) - 2.0 * phi1(-(2.0 + eps) * r) + phi1(-(2.0 + 2.0 * eps) * r))
    }
}

/// `TE_{x -> y}(tau) = I(x(t); y(t + tau) | y(t))`.
///
/// With `Den` the bracket of the classical formula,
/// `Den / (b - 1)^2 = b (b + 1) J(b, r)`, which gives
/// `TE = 1/2 ln(1 + e^{-2r} r^2 phi1(-eps r)^2 / ((b + 1) J))`.
pub fn te_closed_form(p: &BlrmParams, tau: f64) -> Result<Information> {
    if !(tau > 0.0) {
        return Err(Error::InvalidLag(tau));
    }
    if tau == f64::INFINITY {
        return Ok(Information::Finite(0.0));
    }
    let b = p.b();
    let r = tau / p.t_rel;
    let j = noise_integral(b, r);
    if j <= 0.0 {
        return Ok(Information::Infinite);
    }
    let num = (-2.0 * r).exp() * r * r * phi1(-(b - 1.0) * r).powi(2);
    Ok(Information::Finite(0.5 * (num / ((b + 1.0) * j)).ln_1p()))
}

/// `TE_{y -> x}`: the signal ignores the response.
pub fn te_reverse(_p: &BlrmParams, _tau: f64) -> f64 {
    0.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityPoint {
    pub beta_t_rel: f64,
    pub peak_c: f64,
    pub tau_res: f64,
    pub i_opt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityReport {
    pub points: Vec<CapacityPoint>,
    /// Aitken extrapolation over the last three grid points; `None` with
    /// fewer than three points.
    pub estimate: Option<f64>,
}

/// Peak causal influence `max_tau C(tau)` and its lag for `b = beta t_rel`,
/// with `t_rel = 1`.
pub fn peak_causal_influence(b: f64) -> Result<(f64, f64)> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("beta t_rel = {b}")));
    }
    let p = BlrmParams::new(1.0, b, 1.0, 2.0)?;
    let d = Decomposer::new(&p.network()?, "x", "y", false)?;
    let fast = 1.0f64.min(1.0 / b);
    let slow = 1.0f64.max(1.0 / b);
    let mut failure = None;
    let (tau, c) = maximize_over_lag(
        |tau| match d.at(tau) {
            Ok(pt) => pt.c,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        1e-4 * fast,
        30.0 * slow,
        97,
        1e-6,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok((c, tau)),
    }
}

/// Peak causal influence over a grid of `beta t_rel` values and the
/// extrapolated large-`b` limit.
pub fn causation_capacity(beta_t_rel_grid: &[f64]) -> Result<CapacityReport> {
    let points = beta_t_rel_grid
        .par_iter()
        .map(|&b| {
            let (peak_c, tau_res) = peak_causal_influence(b)?;
            Ok(CapacityPoint {
                beta_t_rel: b,
                peak_c,
                tau_res,
                i_opt: i_opt_b(b),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let estimate = match points.len() {
        0..=2 => None,
        n => Some(aitken(
            points[n - 3].peak_c,
            points[n - 2].peak_c,
            points[n - 1].peak_c,
        )),
    };
    Ok(CapacityReport { points, estimate })
}

/// Aitken delta-squared limit of a geometrically converging sequence.
pub fn aitken(x1: f64, x2: f64, x3: f64) -> f64 {
    let d1 = x2 - x1;
    let d2 = x3 - x2;
    let denom = d2 - d1;
    if denom == 0.0 || !(d2 / d1).is_finite() || (d2 / d1).abs() >= 1.0 {
        x3
    } else {
        x3 - d2 * d2 / denom
    }
}
