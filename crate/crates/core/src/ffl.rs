//! The three-node feed-forward loop
//!
//! ```text
//! dz/dt = -z / t_rel + sqrt(D_z) G_z
//! dx/dt = alpha_x z - beta_x x + sqrt(D_x) G_x
//! dy/dt = alpha_y z - beta_y y + gamma x + sqrt(D_y) G_y
//! ```
//!
//! For `gamma = 0` the moments conditioned on `z(t)` have closed forms, and
//! the correlation of `x` and `y` through their common parent carries no
//! causal influence. Other values of `gamma` go through the general engine.

use rayon::prelude::*;

use crate::blrm::noise_integral;
use crate::error::{Error, Result};
use crate::measures::{linear_redundancy, DecompositionCurve, Decomposer};
use crate::network::{LinearNetwork, ValidatedNetwork};
use crate::special::phi1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FflParams {
    pub t_rel: f64,
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub beta_x: f64,
    pub beta_y: f64,
    pub gamma: f64,
    pub d_z: f64,
    pub d_x: f64,
    pub d_y: f64,
}

impl FflParams {
    /// `t_rel = 10`, unit couplings, `beta_x = beta_y = 0.2`, `D_z = 10`,
    /// `D_x = D_y = 0.1`.
    pub fn reference() -> Self {
        FflParams {
            t_rel: 10.0,
            alpha_x: 1.0,
            alpha_y: 1.0,
            beta_x: 0.2,
            beta_y: 0.2,
            gamma: 1.0,
            d_z: 10.0,
            d_x: 0.1,
            d_y: 0.1,
        }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        FflParams { gamma, ..self }
    }

    pub fn network(&self) -> Result<ValidatedNetwork> {
        LinearNetwork::new()
            .node("z", 1.0 / self.t_rel, self.d_z)
            .node("x", self.beta_x, self.d_x)
            .node("y", self.beta_y, self.d_y)
            .edge("z", "x", self.alpha_x)
            .edge("z", "y", self.alpha_y)
            .edge("x", "y", self.gamma)
            .validate()
    }

    fn closed_form(&self) -> Result<()> {
        if self.gamma != 0.0 {
            return Err(Error::GammaNonZero(self.gamma));
        }
        let ok = self.t_rel > 0.0
            && self.beta_x > 0.0
            && self.beta_y > 0.0
            && self.d_z > 0.0
            && self.d_x >= 0.0
            && self.d_y >= 0.0;
        if !ok {
            return Err(Error::InvalidParameter("feed-forward loop parameters".into()));
        }
        Ok(())
    }

    pub fn sigma_z2(&self) -> f64 {
        self.d_z * self.t_rel / 2.0
    }

    fn bx(&self) -> f64 {
        self.beta_x * self.t_rel
    }

    fn by(&self) -> f64 {
        self.beta_y * self.t_rel
    }
}

/// Stationary variance of `y`.
pub fn cond_sigma_y(p: &FflParams) -> Result<f64> {
    p.closed_form()?;
    Ok(p.sigma_z2() * p.alpha_y * p.alpha_y * p.t_rel / (p.beta_y * (1.0 + p.by()))
        + p.d_y / (2.0 * p.beta_y))
}

/// `var(x(t) | z(t))`.
pub fn var_x_given_z(p: &FflParams) -> Result<f64> {
    p.closed_form()?;
    let bx = p.bx();
    Ok(p.sigma_z2() * (p.alpha_x * p.t_rel).powi(2) / (bx * (bx + 1.0) * (bx + 1.0))
        + p.d_x / (2.0 * p.beta_x))
}

/// Regression slope of `y(t + tau)` on `z(t)`, divided by `alpha_y t_rel`.
fn y_slope(p: &FflParams, tau: f64) -> f64 {
    let b = p.by();
    let r = tau / p.t_rel;
    (-r).exp() * r * phi1(-(b - 1.0) * r) + (-p.beta_y * tau).exp() / (b + 1.0)
}

/// `var(y(t + tau) | z(t))`: the decayed same-time part plus what `y(t)`
/// does not predict.
pub fn var_y_given_z(p: &FflParams, tau: f64) -> Result<f64> {
    Ok(explained_by_y(p, tau)? + var_y_given_yz(p, tau)?)
}

/// `var(y(t) | z(t))`.
fn var_y_now_given_z(p: &FflParams) -> Result<f64> {
    p.closed_form()?;
    let by = p.by();
    Ok(p.sigma_z2() * (p.alpha_y * p.t_rel).powi(2) / (by * (by + 1.0) * (by + 1.0))
        + p.d_y / (2.0 * p.beta_y))
}

/// Variance of `y(t + tau)` explained by `y(t)` once `z(t)` is known.
fn explained_by_y(p: &FflParams, tau: f64) -> Result<f64> {
    Ok((-2.0 * p.beta_y * tau).exp() * var_y_now_given_z(p)?)
}

/// `var(y(t + tau) | y(t), z(t))`, which also equals the variance given
/// `x(t)` as well.
pub fn var_y_given_yz(p: &FflParams, tau: f64) -> Result<f64> {
    p.closed_form()?;
    let r = tau / p.t_rel;
    Ok(p.sigma_z2() * (p.alpha_y * p.t_rel).powi(2) * noise_integral(p.by(), r)
        - p.d_y * (-2.0 * p.beta_y * tau).exp_m1() / (2.0 * p.beta_y))
}

/// `<x(t) | z(t)>`.
pub fn cond_mean_x(p: &FflParams, z: f64) -> Result<f64> {
    p.closed_form()?;
    Ok(z * p.alpha_x * p.t_rel / (p.bx() + 1.0))
}

/// `<y(t + tau) | z(t)>`.
pub fn cond_mean_y(p: &FflParams, z: f64, tau: f64) -> Result<f64> {
    p.closed_form()?;
    Ok(z * p.alpha_y * p.t_rel * y_slope(p, tau))
}

/// Raw second moment `<y(t) x(t) | z(t)>`.
pub fn raw_same_time_moment(p: &FflParams, z: f64) -> Result<f64> {
    p.closed_form()?;
    let (bx, by) = (p.bx(), p.by());
    Ok(p.alpha_x * p.alpha_y * p.t_rel * p.t_rel / ((bx + 1.0) * (by + 1.0))
        * (z * z + 2.0 * p.sigma_z2() / (p.t_rel * (p.beta_x + p.beta_y))))
}

/// Raw second moment `<y(t + tau) x(t) | z(t)>`, propagated from the
/// same-time moment along the drift of `y`.
pub fn raw_cross_moment(p: &FflParams, z: f64, tau: f64) -> Result<f64> {
    let same = raw_same_time_moment(p, z)?;
    let decay = (-p.beta_y * tau).exp();
    let r = tau / p.t_rel;
    let driven = p.alpha_y * p.alpha_x * p.t_rel * z * z / (p.bx() + 1.0)
        * decay
        * tau
        * phi1((p.by() - 1.0) * r);
    Ok(decay * same + driven)
}

/// `cov(x(t), y(t + tau) | z(t))`, independent of the value of `z(t)`.
pub fn cond_cross_moment(p: &FflParams, tau: f64) -> Result<f64> {
    p.closed_form()?;
    if !(tau >= 0.0) {
        return Err(Error::InvalidLag(tau));
    }
    let (bx, by) = (p.bx(), p.by());
    Ok(p.sigma_z2() * 2.0 * p.alpha_x * p.alpha_y * p.t_rel * (-p.beta_y * tau).exp()
        / ((bx + 1.0) * (by + 1.0) * (p.beta_x + p.beta_y)))
}

/// Informations conditioned on `z(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionedMeasures {
    pub i_xy: f64,
    pub i_lag: f64,
    /// `f64::INFINITY` at zero lag.
    pub i_tot: f64,
}

fn mi_from_cov(cov: f64, var_a: f64, var_b: f64) -> f64 {
    if cov == 0.0 {
        return 0.0;
    }
    let c2 = cov * cov / (var_a * var_b);
    -0.5 * (-c2).ln_1p()
}

/// `I(x(t); y(t) | z)`, `I(x(t); y(t + tau) | z)` and
/// `I(y(t + tau); (x(t), y(t)) | z) = 1/2 ln(var(y_tau | z) / var(y_tau | x, y, z))`.
pub fn cond_measures(p: &FflParams, tau: f64) -> Result<ConditionedMeasures> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidLag(tau));
    }
    let vx = var_x_given_z(p)?;
    let i_xy = mi_from_cov(cond_cross_moment(p, 0.0)?, vx, var_y_given_z(p, 0.0)?);
    let vy_tau = var_y_given_z(p, tau)?;
    let i_lag = mi_from_cov(cond_cross_moment(p, tau)?, vx, vy_tau);
    let resid = var_y_given_yz(p, tau)?;
    let i_tot = if resid <= 0.0 {
        f64::INFINITY
    } else {
        0.5 * (explained_by_y(p, tau)? / resid).ln_1p()
    };
    Ok(ConditionedMeasures { i_xy, i_lag, i_tot })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroInfluenceReport {
    pub taus: Vec<f64>,
    pub c_closed_form: Vec<f64>,
    pub c_engine: Vec<f64>,
    pub max_abs_closed_form: f64,
    pub max_abs_engine: f64,
}

impl ZeroInfluenceReport {
    pub fn max_abs(&self) -> f64 {
        self.max_abs_closed_form.max(self.max_abs_engine)
    }
}

/// `C_{x -> y | z}` over a lag grid, from the closed forms and from the
/// general engine.
pub fn verify_zero_influence(p: &FflParams, tau_grid: &[f64]) -> Result<ZeroInfluenceReport> {
    p.closed_form()?;
    let c_closed_form = tau_grid
        .iter()
        .map(|&tau| {
            let m = cond_measures(p, tau)?;
            Ok(m.i_lag - linear_redundancy(m.i_xy, m.i_tot))
        })
        .collect::<Result<Vec<_>>>()?;
    let dec = Decomposer::new(&p.network()?, "x", "y", true)?;
    let c_engine = tau_grid
        .par_iter()
        .map(|&tau| Ok(dec.at(tau)?.c))
        .collect::<Result<Vec<_>>>()?;
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    Ok(ZeroInfluenceReport {
        taus: tau_grid.to_vec(),
        max_abs_closed_form: max_abs(&c_closed_form),
        max_abs_engine: max_abs(&c_engine),
        c_closed_form,
        c_engine,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardCurve {
    /// Parent-conditioned decomposition of `x -> y`.
    pub curve: DecompositionCurve,
    /// Largest `|C|` over the grid for the pairs without a causal path:
    /// `y -> x`, `x -> z`, `y -> z`.
    pub spurious: Vec<(String, String, f64)>,
}

/// Parent-conditioned `x -> y` curve for any `gamma`, with the influences
/// that must vanish.
pub fn fig7_curve(p: &FflParams, tau_grid: &[f64]) -> Result<FeedForwardCurve> {
    let net = p.network()?;
    let curve = Decomposer::new(&net, "x", "y", true)?.curve(tau_grid)?;
    let mut spurious = Vec::new();
    for (src, dst) in [("y", "x"), ("x", "z"), ("y", "z")] {
        let c = Decomposer::new(&net, src, dst, true)?.curve(tau_grid)?;
        let m = c.points.iter().fold(0.0f64, |m, pt| m.max(pt.c.abs()));
        spurious.push((src.to_string(), dst.to_string(), m));
    }
    Ok(FeedForwardCurve { curve, spurious })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gausscov::{stationary_covariance, ConditionalGaussian, StationaryModel, VarLabel};

    fn no_gamma() -> FflParams {
        FflParams::reference().with_gamma(0.0)
    }

    #[test]
    fn closed_forms_refuse_nonzero_gamma() {
        assert_eq!(cond_sigma_y(&FflParams::reference()), Err(Error::GammaNonZero(1.0)));
    }

    #[test]
    fn sigma_y_matches_lyapunov() {
        let p = no_gamma();
        let s = stationary_covariance(&p.network().unwrap()).unwrap();
        let y = VarLabel::now("y");
        let v = s.get(&y, &y).unwrap();
        assert!((cond_sigma_y(&p).unwrap() - v).abs() < 1e-10 * v);
    }

    #[test]
    fn sigma_y_special_cases() {
        let pure = FflParams {
            alpha_y: 0.0,
            ..no_gamma()
        };
        assert_eq!(cond_sigma_y(&pure).unwrap(), 0.1 / 0.4);
    }

    #[test]
    fn cross_moment_matches_engine() {
        let p = no_gamma();
        let net = p.network().unwrap();
        let model = StationaryModel::new(&net).unwrap();
        for tau in [0.0, 1.0, 7.5] {
            let law = model.at_lag(tau).unwrap();
            let k = law
                .conditional(&[VarLabel::now("x"), VarLabel::later("y")], &[VarLabel::now("z")])
                .unwrap();
            let c = cond_cross_moment(&p, tau).unwrap();
            assert!((k[(0, 1)] - c).abs() < 1e-10 * c, "tau={tau}");
        }
    }

    #[test]
    fn centered_moment_carries_no_z_dependence() {
        let p = no_gamma();
        for tau in [0.0, 0.3, 4.0] {
            let cov = cond_cross_moment(&p, tau).unwrap();
            for z in [0.0, 2.5, -11.0] {
                let centered = raw_cross_moment(&p, z, tau).unwrap()
                    - cond_mean_y(&p, z, tau).unwrap() * cond_mean_x(&p, z).unwrap();
                assert!((centered - cov).abs() < 1e-12 * (1.0 + z * z) * cov, "tau={tau} z={z}");
            }
        }
    }

    #[test]
    fn zero_influence_on_reference_parameters() {
        let grid: Vec<f64> = (0..64).map(|i| 0.05 * i as f64 * i as f64).collect();
        let rep = verify_zero_influence(&no_gamma(), &grid).unwrap();
        assert!(rep.max_abs() <= 1e-9, "{rep:?}");
    }

    #[test]
    fn lagged_information_is_positive_without_influence() {
        let m = cond_measures(&no_gamma(), 2.0).unwrap();
        assert!(m.i_lag > 0.01 && m.i_xy > 0.0 && m.i_tot > 0.0);
    }
}
