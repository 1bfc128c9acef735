//! Gaussian information measures and the lagged information decomposition.
//!
//! For a source `x`, a target `y` and a lag `tau`, the decomposition splits
//! `I_tot = I(y(t+tau); (x(t), y(t)))` into a redundancy `R`, unique parts
//! `U_x`, `U_y` and a synergy `S`. The redundancy is the linear one,
//! determined by `I(x; y)` and `I_tot`; the unique information of the
//! source is the causal influence `C = I(x(t); y(t+tau)) - R`. All values
//! are in nats and optionally conditioned on the parents of the pair.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gausscov::{ConditionalGaussian, StationaryModel, VarLabel};
use crate::linalg::condition;
use crate::network::{ParentSet, ValidatedNetwork};

/// An information value in nats; deterministic relations carry infinite
/// information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Information {
    Finite(f64),
    Infinite,
}

impl Information {
    /// The value as a float, `f64::INFINITY` for [`Information::Infinite`].
    pub fn value(self) -> f64 {
        match self {
            Information::Finite(v) => v,
            Information::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Information::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Information::Finite(v) => Some(v),
            Information::Infinite => None,
        }
    }
}

impl fmt::Display for Information {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Information::Finite(v) => write!(f, "{v}"),
            Information::Infinite => f.write_str("inf"),
        }
    }
}

/// `I(A; B | given)` for jointly Gaussian variables.
///
/// The information is evaluated as `1/2 sum ln(1 + lambda)` over the
/// eigenvalues of the explained covariance of `B` whitened by its residual
/// covariance, so both small and large values keep their relative
/// precision. Components of `B` (or `A`) already fixed by `given` carry no
/// information; a residual covariance of `B` that vanishes while `B` is not
/// fixed by `given` gives [`Information::Infinite`].
pub fn gaussian_mi<G: ConditionalGaussian + ?Sized>(
    law: &G,
    a: &[VarLabel],
    b: &[VarLabel],
    given: &[VarLabel],
) -> Result<Information> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter("empty variable set".into()));
    }
    if a.iter().any(|v| b.contains(v) || given.contains(v)) || b.iter().any(|v| given.contains(v)) {
        return Err(Error::InvalidParameter(
            "variable sets must be disjoint".into(),
        ));
    }
    let floor = law.determinism_floor();
    let a = free_components(law, a, given, floor)?;
    let b = free_components(law, b, given, floor)?;
    if a.is_empty() || b.is_empty() {
        return Ok(Information::Finite(0.0));
    }

    let joint_labels: Vec<VarLabel> = a.iter().chain(b.iter()).cloned().collect();
    let k = law.conditional(&joint_labels, given)?;
    let a_idx: Vec<usize> = (0..a.len()).collect();
    let b_idx: Vec<usize> = (a.len()..a.len() + b.len()).collect();
    let explained = condition(&k, &b_idx, &a_idx)?.explained;

    let mut full_given = a.clone();
    full_given.extend_from_slice(given);
    let residual = law.conditional(&b, &full_given)?;
    let scale = law
        .conditional(&b, &[])?
        .diagonal()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));

    if b.len() == 1 {
        let v = residual[(0, 0)];
        if v <= floor * scale {
            return Ok(Information::Infinite);
        }
        return Ok(Information::Finite(0.5 * (explained[(0, 0)].max(0.0) / v).ln_1p()));
    }

    let eig = SymmetricEigen::new(residual.clone());
    let min_eig = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if min_eig <= floor * scale {
        return Ok(Information::Infinite);
    }
    // residual^{-1/2} explained residual^{-1/2}
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let w = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let mut whitened = &w * explained * &w;
    crate::linalg::symmetrize(&mut whitened);
    let total: f64 = SymmetricEigen::new(whitened)
        .eigenvalues
        .iter()
        .map(|l| 0.5 * l.max(0.0).ln_1p())
        .sum();
    Ok(Information::Finite(total))
}

/// Drops the components whose variance `given` already removes.
fn free_components<G: ConditionalGaussian + ?Sized>(
    law: &G,
    vars: &[VarLabel],
    given: &[VarLabel],
    floor: f64,
) -> Result<Vec<VarLabel>> {
    let total = law.conditional(vars, &[])?;
    let cond = if given.is_empty() {
        total.clone()
    } else {
        law.conditional(vars, given)?
    };
    Ok(vars
        .iter()
        .enumerate()
        .filter(|(i, _)| cond[(*i, *i)] > floor * total[(*i, *i)])
        .map(|(_, v)| v.clone())
        .collect())
}

/// `I(src(t); dst(t+tau) | dst(t), extra(t))` from the exact model.
pub fn transfer_entropy(
    network: &ValidatedNetwork,
    src: &str,
    dst: &str,
    tau: f64,
    extra_conditioning: &[&str],
) -> Result<Information> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidLag(tau));
    }
    let model = StationaryModel::new(network)?;
    let law = model.at_lag(tau)?;
    let mut given = vec![VarLabel::now(dst)];
    given.extend(extra_conditioning.iter().map(|n| VarLabel::now(*n)));
    gaussian_mi(&law, &[VarLabel::now(src)], &[VarLabel::later(dst)], &given)
}

/// Redundancy of two sources about a target, from `i_xy = I(x; y)` and
/// `i_tot = I(target; (x, y))`:
/// `R = 1/2 ln(e^{2(a+b)} / (e^{2a} + e^{2b} - 1))`.
///
/// Evaluated as `lo - 1/2 ln(1 + (e^{2 lo} - 1) e^{-2 hi})`, so that
/// `R(a, inf) = a` exactly.
pub fn linear_redundancy(i_xy: f64, i_tot: f64) -> f64 {
    let lo = i_xy.min(i_tot);
    let hi = i_xy.max(i_tot);
    if lo == f64::INFINITY {
        return f64::INFINITY;
    }
    if lo <= 0.0 {
        return 0.0;
    }
    let t = if lo < 1.0 {
        (2.0 * lo).exp_m1() * (-2.0 * hi).exp()
    } else {
        (2.0 * (lo - hi)).exp() - (-2.0 * hi).exp()
    };
    (lo - 0.5 * t.ln_1p()).max(0.0)
}

/// Minimum of the two source-to-target informations.
pub fn wb_redundancy(i_x_out: f64, i_y_out: f64) -> f64 {
    i_x_out.min(i_y_out)
}

/// All measures at one lag. Infinite informations are `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionPoint {
    pub tau: f64,
    pub i_lag: f64,
    pub te: f64,
    pub i_tot: f64,
    pub i_xy: f64,
    pub r_linear: f64,
    pub r_wb: f64,
    pub u_x: f64,
    pub u_y: f64,
    pub s: f64,
    pub c: f64,
}

impl DecompositionPoint {
    pub const COLUMNS: [&'static str; 11] = [
        "tau", "i_lag", "te", "i_tot", "i_xy", "r_linear", "r_wb", "u_x", "u_y", "s", "c",
    ];

    pub fn values(&self) -> [f64; 11] {
        [
            self.tau,
            self.i_lag,
            self.te,
            self.i_tot,
            self.i_xy,
            self.r_linear,
            self.r_wb,
            self.u_x,
            self.u_y,
            self.s,
            self.c,
        ]
    }

    pub fn from_values(v: [f64; 11]) -> Self {
        DecompositionPoint {
            tau: v[0],
            i_lag: v[1],
            te: v[2],
            i_tot: v[3],
            i_xy: v[4],
            r_linear: v[5],
            r_wb: v[6],
            u_x: v[7],
            u_y: v[8],
            s: v[9],
            c: v[10],
        }
    }

    /// Largest violation of `i_tot = r + u_x + u_y + s`, `i_lag = r + u_x`
    /// and `te = u_x + s`. Identities between infinite terms are skipped.
    pub fn closure_error(&self) -> f64 {
        let checks = [
            (self.i_tot, self.r_linear + self.u_x + self.u_y + self.s),
            (self.i_lag, self.r_linear + self.u_x),
            (self.te, self.u_x + self.s),
        ];
        checks
            .iter()
            .filter(|(l, r)| l.is_finite() && r.is_finite())
            .map(|(l, r)| (l - r).abs())
            .fold(0.0, f64::max)
    }
}

/// Decomposition over a lag grid with its summary extrema.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionCurve {
    pub source: String,
    pub target: String,
    pub conditioned_on: ParentSet,
    pub points: Vec<DecompositionPoint>,
    /// Argmax of `i_lag`.
    pub tau_opt: f64,
    /// Argmax of `c`.
    pub tau_res: f64,
    pub peak_c: f64,
    pub peak_i: f64,
    /// True when the min-based redundancy was evaluated under parent
    /// conditioning, which extends its unconditioned definition.
    pub r_wb_conditioned: bool,
}

impl DecompositionCurve {
    /// Assembles a curve from points sorted by lag. Ties in the argmax go to
    /// the smaller lag.
    pub fn from_points(
        source: &str,
        target: &str,
        conditioned_on: ParentSet,
        points: Vec<DecompositionPoint>,
    ) -> Self {
        let argmax = |f: fn(&DecompositionPoint) -> f64| {
            let mut best: Option<(f64, f64)> = None;
            for p in &points {
                let v = f(p);
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((p.tau, v));
                }
            }
            best.unwrap_or((f64::NAN, f64::NAN))
        };
        let (tau_opt, peak_i) = argmax(|p| p.i_lag);
        let (tau_res, peak_c) = argmax(|p| p.c);
        let r_wb_conditioned = !conditioned_on.is_empty();
        DecompositionCurve {
            source: source.to_string(),
            target: target.to_string(),
            conditioned_on,
            points,
            tau_opt,
            tau_res,
            peak_c,
            peak_i,
            r_wb_conditioned,
        }
    }
}

/// Decomposition of `src -> dst` at lag `tau` for any conditional law over
/// `Now`/`Later` labels, conditioned on `parents` at time `t`.
pub fn decompose_law<G: ConditionalGaussian + ?Sized>(
    law: &G,
    src: &str,
    dst: &str,
    tau: f64,
    parents: &[&str],
) -> Result<DecompositionPoint> {
    let x = VarLabel::now(src);
    let y = VarLabel::now(dst);
    let y_tau = VarLabel::later(dst);
    let p: Vec<VarLabel> = parents.iter().map(|n| VarLabel::now(*n)).collect();
    let mut p_y = vec![y.clone()];
    p_y.extend(p.iter().cloned());

    let i_lag = gaussian_mi(law, &[x.clone()], &[y_tau.clone()], &p)?.value();
    let te = gaussian_mi(law, &[x.clone()], &[y_tau.clone()], &p_y)?.value();
    let i_yy = gaussian_mi(law, &[y.clone()], &[y_tau.clone()], &p)?.value();
    let i_tot = gaussian_mi(law, &[x.clone(), y.clone()], &[y_tau], &p)?.value();
    let i_xy = gaussian_mi(law, &[x], &[y], &p)?.value();

    let r_linear = linear_redundancy(i_xy, i_tot);
    let r_wb = wb_redundancy(i_lag, i_yy);
    let u_x = i_lag - r_linear;
    let u_y = i_yy - r_linear;
    let s = te - u_x;
    Ok(DecompositionPoint {
        tau,
        i_lag,
        te,
        i_tot,
        i_xy,
        r_linear,
        r_wb,
        u_x,
        u_y,
        s,
        c: u_x,
    })
}

/// Exact decomposition of one source/target pair.
#[derive(Debug, Clone)]
pub struct Decomposer {
    model: StationaryModel,
    source: String,
    target: String,
    parents: ParentSet,
}

impl Decomposer {
    pub fn new(
        network: &ValidatedNetwork,
        src: &str,
        dst: &str,
        condition_on_parents: bool,
    ) -> Result<Self> {
        network.index_of(src)?;
        network.index_of(dst)?;
        if src == dst {
            return Err(Error::InvalidParameter(
                "source and target must differ".into(),
            ));
        }
        let parents = if condition_on_parents {
            network.parents(&[src, dst])?
        } else {
            ParentSet::default()
        };
        Ok(Decomposer {
            model: StationaryModel::new(network)?,
            source: src.to_string(),
            target: dst.to_string(),
            parents,
        })
    }

    pub fn parents(&self) -> &ParentSet {
        &self.parents
    }

    pub fn model(&self) -> &StationaryModel {
        &self.model
    }

    pub fn at(&self, tau: f64) -> Result<DecompositionPoint> {
        let law = self.model.at_lag(tau)?;
        let parents: Vec<&str> = self.parents.iter().collect();
        decompose_law(&law, &self.source, &self.target, tau, &parents)
    }

    pub fn curve(&self, tau_grid: &[f64]) -> Result<DecompositionCurve> {
        check_grid(tau_grid)?;
        let points = tau_grid
            .par_iter()
            .map(|&tau| self.at(tau))
            .collect::<Result<Vec<_>>>()?;
        Ok(DecompositionCurve::from_points(
            &self.source,
            &self.target,
            self.parents.clone(),
            points,
        ))
    }
}

pub(crate) fn check_grid(tau_grid: &[f64]) -> Result<()> {
    if tau_grid.is_empty() {
        return Err(Error::InvalidParameter("empty lag grid".into()));
    }
    for (i, &t) in tau_grid.iter().enumerate() {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidLag(t));
        }
        if i > 0 && t <= tau_grid[i - 1] {
            return Err(Error::InvalidParameter(
                "lag grid must be strictly increasing".into(),
            ));
        }
    }
    Ok(())
}

pub fn decompose(
    network: &ValidatedNetwork,
    src: &str,
    dst: &str,
    tau: f64,
    condition_on_parents: bool,
) -> Result<DecompositionPoint> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidLag(tau));
    }
    Decomposer::new(network, src, dst, condition_on_parents)?.at(tau)
}

pub fn decompose_curve(
    network: &ValidatedNetwork,
    src: &str,
    dst: &str,
    tau_grid: &[f64],
    condition_on_parents: bool,
) -> Result<DecompositionCurve> {
    Decomposer::new(network, src, dst, condition_on_parents)?.curve(tau_grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gausscov::CovarianceMatrix;
    use crate::network::LinearNetwork;

    fn fig1() -> ValidatedNetwork {
        LinearNetwork::blrm(0.1, 0.2, 10.0, 10.0).validate().unwrap()
    }

    #[test]
    fn scalar_mi_from_correlation() {
        let rho: f64 = 0.6;
        let cov = CovarianceMatrix::new(
            vec![VarLabel::now("a"), VarLabel::now("b")],
            DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]),
        )
        .unwrap();
        let i = gaussian_mi(&cov, &[VarLabel::now("a")], &[VarLabel::now("b")], &[]).unwrap();
        assert!((i.value() + 0.5 * (1.0 - rho * rho).ln()).abs() < 1e-15);
    }

    #[test]
    fn independent_sets_share_nothing() {
        let cov = CovarianceMatrix::new(
            vec![VarLabel::now("a"), VarLabel::now("b")],
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]),
        )
        .unwrap();
        let i = gaussian_mi(&cov, &[VarLabel::now("a")], &[VarLabel::now("b")], &[]).unwrap();
        assert_eq!(i, Information::Finite(0.0));
    }

    #[test]
    fn duplicate_variable_is_infinite() {
        let cov = CovarianceMatrix::new(
            vec![VarLabel::now("a"), VarLabel::now("b")],
            DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]),
        )
        .unwrap();
        let i = gaussian_mi(&cov, &[VarLabel::now("a")], &[VarLabel::now("b")], &[]).unwrap();
        assert!(i.is_infinite());
    }

    #[test]
    fn vector_mi_matches_log_determinants() {
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[
                2.0, 0.3, 0.5, 0.1, //
                0.3, 1.5, 0.2, 0.4, //
                0.5, 0.2, 1.8, 0.3, //
                0.1, 0.4, 0.3, 1.2,
            ],
        );
        let labels: Vec<VarLabel> = ["a", "b", "c", "d"].iter().map(|n| VarLabel::now(*n)).collect();
        let cov = CovarianceMatrix::new(labels.clone(), m.clone()).unwrap();
        let i = gaussian_mi(&cov, &labels[..2], &labels[2..], &[]).unwrap().value();
        let det = |idx: &[usize]| {
            DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])]).determinant()
        };
        let expect = 0.5 * (det(&[0, 1]) * det(&[2, 3]) / det(&[0, 1, 2, 3])).ln();
        assert!((i - expect).abs() < 1e-14, "{i} vs {expect}");
    }

    #[test]
    fn redundancy_examples() {
        assert_eq!(linear_redundancy(0.0, 3.0), 0.0);
        assert!((linear_redundancy(0.5, 1.0) - 0.395_459_772_884_043_7).abs() < 1e-15);
        assert_eq!(linear_redundancy(0.5493, f64::INFINITY), 0.5493);
        assert_eq!(wb_redundancy(0.3, 0.7), 0.3);
        assert_eq!(wb_redundancy(0.7, 0.3), 0.3);
    }

    #[test]
    fn redundancy_of_large_values_does_not_overflow() {
        let r = linear_redundancy(400.0, 401.0);
        assert!(r.is_finite() && r <= 400.0 && r > 399.0);
    }

    #[test]
    fn blrm_same_time_information() {
        let law = StationaryModel::new(&fig1()).unwrap();
        let cov = law.covariance();
        let i = gaussian_mi(&cov, &[VarLabel::now("x")], &[VarLabel::now("y")], &[]).unwrap();
        assert!((i.value() - 0.5 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn reverse_direction_has_no_influence() {
        let d = Decomposer::new(&fig1(), "y", "x", false).unwrap();
        for tau in [0.0, 0.1, 1.0, 5.0, 40.0] {
            let p = d.at(tau).unwrap();
            assert!(p.c.abs() <= 1e-10, "tau={tau} c={}", p.c);
            if tau > 0.0 {
                assert!(p.te.abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn zero_lag_has_no_influence() {
        let p = decompose(&fig1(), "x", "y", 0.0, false).unwrap();
        assert_eq!(p.c, 0.0);
        assert_eq!(p.te, 0.0);
        assert!(p.i_tot.is_infinite());
    }

    #[test]
    fn closure_holds_on_a_grid() {
        let d = Decomposer::new(&fig1(), "x", "y", false).unwrap();
        let grid: Vec<f64> = (0..40).map(|i| 0.01 * 1.3f64.powi(i)).collect();
        for p in d.curve(&grid).unwrap().points {
            assert!(p.closure_error() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn tiny_lag_transfer_entropy_is_large_and_finite() {
        let te = transfer_entropy(&fig1(), "x", "y", 1e-4, &[]).unwrap();
        assert!(te.value() > 3.0 && te.value().is_finite());
        assert!(transfer_entropy(&fig1(), "x", "y", 0.0, &[]).is_err());
    }

    #[test]
    fn argmax_ties_prefer_smaller_lag() {
        let mk = |tau, c| DecompositionPoint {
            tau,
            i_lag: 1.0,
            te: 0.0,
            i_tot: 0.0,
            i_xy: 0.0,
            r_linear: 0.0,
            r_wb: 0.0,
            u_x: c,
            u_y: 0.0,
            s: 0.0,
            c,
        };
        let curve = DecompositionCurve::from_points(
            "x",
            "y",
            ParentSet::default(),
            vec![mk(1.0, 0.2), mk(2.0, 0.5), mk(3.0, 0.5)],
        );
        assert_eq!(curve.tau_res, 2.0);
        assert_eq!(curve.tau_opt, 1.0);
    }

    #[test]
    fn grid_must_increase() {
        assert!(check_grid(&[0.0, 1.0, 1.0]).is_err());
        assert!(check_grid(&[-1.0, 1.0]).is_err());
        assert!(check_grid(&[0.0, 1.0]).is_ok());
    }
}
