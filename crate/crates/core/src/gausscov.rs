//! Exact second moments of a stationary linear network.
//!
//! With drift `A` and diffusion `Q = diag(noise)`, the stationary covariance
//! solves `A S + S A^T + Q = 0`, and over a lag `tau` the state evolves as
//! `v(t + tau) = Phi v(t) + xi` with `Phi = e^{A tau}` and
//! `xi ~ N(0, W)`, `W = int_0^tau e^{A s} Q e^{A^T s} ds`, independent of
//! `v(t)`.
//!
//! Conditional covariances given time-`t` variables are assembled from
//! `Phi`, `W` and the conditioned stationary covariance, never by
//! subtracting two nearly equal matrices. Small-lag conditional variances
//! therefore keep full relative precision.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{self, condition, expm, lyapunov_lower_triangular, max_abs, norm1};
use crate::network::ValidatedNetwork;
use crate::tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    /// Time `t`.
    Now,
    /// Time `t + tau`.
    Later,
}

/// A node observed at one of the two time points.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarLabel {
    pub node: String,
    pub slot: Slot,
}

impl VarLabel {
    pub fn now(node: impl Into<String>) -> Self {
        VarLabel {
            node: node.into(),
            slot: Slot::Now,
        }
    }

    pub fn later(node: impl Into<String>) -> Self {
        VarLabel {
            node: node.into(),
            slot: Slot::Later,
        }
    }
}

impl fmt::Display for VarLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.slot {
            Slot::Now => write!(f, "{}(t)", self.node),
            Slot::Later => write!(f, "{}(t+tau)", self.node),
        }
    }
}

/// A labelled symmetric positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    labels: Vec<VarLabel>,
    values: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Checks shape, label uniqueness, symmetry (1e-12 relative) and
    /// positive semidefiniteness (smallest eigenvalue >= -1e-10 trace).
    pub fn new(labels: Vec<VarLabel>, values: DMatrix<f64>) -> Result<Self> {
        let n = labels.len();
        if values.nrows() != n || values.ncols() != n {
            return Err(Error::InvalidParameter(format!(
                "{} labels for a {}x{} matrix",
                n,
                values.nrows(),
                values.ncols()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidParameter(format!("duplicate label {l}")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite covariance entry".into()));
        }
        let scale = max_abs(&values);
        for i in 0..n {
            for j in 0..i {
                if (values[(i, j)] - values[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NumericalFailure(format!(
                        "covariance not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let mut values = values;
        linalg::symmetrize(&mut values);
        if n > 0 {
            let trace: f64 = values.diagonal().iter().sum();
            let min_eig = SymmetricEigen::new(values.clone())
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            if min_eig < -tolerance::psd_slack() * trace.abs() {
                return Err(Error::NumericalFailure(format!(
                    "covariance not positive semidefinite (eigenvalue {min_eig:e})"
                )));
            }
        }
        Ok(CovarianceMatrix { labels, values })
    }

    pub(crate) fn new_unchecked(labels: Vec<VarLabel>, values: DMatrix<f64>) -> Self {
        CovarianceMatrix { labels, values }
    }

    pub fn labels(&self) -> &[VarLabel] {
        &self.labels
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn index_of(&self, label: &VarLabel) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownNode(label.to_string()))
    }

    fn indices(&self, labels: &[VarLabel]) -> Result<Vec<usize>> {
        labels.iter().map(|l| self.index_of(l)).collect()
    }

    pub fn get(&self, a: &VarLabel, b: &VarLabel) -> Result<f64> {
        Ok(self.values[(self.index_of(a)?, self.index_of(b)?)])
    }

    pub fn restrict(&self, labels: &[VarLabel]) -> Result<CovarianceMatrix> {
        let idx = self.indices(labels)?;
        Ok(CovarianceMatrix {
            labels: labels.to_vec(),
            values: DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.values[(idx[r], idx[c])]),
        })
    }
}

/// Joint law over variables at `t` and `t + tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedGaussian {
    pub base: CovarianceMatrix,
    pub lag: f64,
}

/// Anything that can report conditional covariances of labelled variables.
pub trait ConditionalGaussian {
    /// Covariance of `keep` given `given`.
    fn conditional(&self, keep: &[VarLabel], given: &[VarLabel]) -> Result<DMatrix<f64>>;

    /// Relative variance floor below which a conditional variance is zero.
    fn determinism_floor(&self) -> f64;
}

impl ConditionalGaussian for CovarianceMatrix {
    fn conditional(&self, keep: &[VarLabel], given: &[VarLabel]) -> Result<DMatrix<f64>> {
        let k = self.indices(keep)?;
        let g = self.indices(given)?;
        Ok(condition(&self.values, &k, &g)?.schur)
    }

    fn determinism_floor(&self) -> f64 {
        tolerance::determinism_floor()
    }
}

/// `Sigma_keep - Sigma_keep,given Sigma_given^{-1} Sigma_given,keep`.
pub fn conditional_covariance(
    joint: &CovarianceMatrix,
    keep: &[VarLabel],
    given: &[VarLabel],
) -> Result<CovarianceMatrix> {
    for g in given {
        if keep.contains(g) {
            return Err(Error::InvalidParameter(format!(
                "{g} is both kept and conditioned on"
            )));
        }
    }
    let values = joint.conditional(keep, given)?;
    Ok(CovarianceMatrix::new_unchecked(keep.to_vec(), values))
}

/// `e^{a tau}`.
pub fn matrix_exponential(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    expm(&(a * tau))
}

/// `(Phi, W)` for lag `tau`: the transition matrix and the covariance of
/// the noise accumulated over the lag.
///
/// `W` comes from the block exponential of `[[-A, Q], [0, A^T]]` at a lag
/// small enough that `e^{-A tau0}` stays bounded, then from the doubling
/// `W(2s) = W(s) + Phi(s) W(s) Phi(s)^T`, which only adds PSD terms.
pub fn transition(a: &DMatrix<f64>, q: &DMatrix<f64>, tau: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if tau == 0.0 || n == 0 {
        return (DMatrix::identity(n, n), DMatrix::zeros(n, n));
    }
    let anorm = norm1(a) * tau;
    let doublings = if anorm > 0.5 {
        (anorm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let tau0 = tau * 0.5f64.powi(doublings);
    // W is linear in Q; rescaling keeps the block norm near one.
    let qscale = (max_abs(q) * tau0 * n as f64).max(f64::MIN_POSITIVE);
    let mut block = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            block[(i, j)] = -a[(i, j)] * tau0;
            block[(i, n + j)] = q[(i, j)] * tau0 / qscale;
            block[(n + i, n + j)] = a[(j, i)] * tau0;
        }
    }
    let e = expm(&block);
    let f12 = e.view((0, n), (n, n)).into_owned();
    let f22 = e.view((n, n), (n, n)).into_owned();
    let mut phi = f22.transpose();
    let mut w = (&phi * f12) * qscale;
    linalg::symmetrize(&mut w);
    for _ in 0..doublings {
        let grown = &phi * &w * phi.transpose();
        w += grown;
        linalg::symmetrize(&mut w);
        phi = &phi * &phi;
    }
    (phi, w)
}

/// A validated network together with its stationary covariance.
#[derive(Debug, Clone)]
pub struct StationaryModel {
    network: ValidatedNetwork,
    drift: DMatrix<f64>,
    noise: DMatrix<f64>,
    sigma: DMatrix<f64>,
}

impl StationaryModel {
    pub fn new(network: &ValidatedNetwork) -> Result<Self> {
        let drift = network.drift_matrix();
        let noise = network.noise_matrix();
        let sigma = solve_stationary(network, &drift, &noise)?;
        Ok(StationaryModel {
            network: network.clone(),
            drift,
            noise,
            sigma,
        })
    }

    pub fn network(&self) -> &ValidatedNetwork {
        &self.network
    }

    pub fn drift(&self) -> &DMatrix<f64> {
        &self.drift
    }

    pub fn noise(&self) -> &DMatrix<f64> {
        &self.noise
    }

    /// Stationary covariance in declaration order.
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn covariance(&self) -> CovarianceMatrix {
        let labels = self
            .network
            .nodes()
            .iter()
            .map(|n| VarLabel::now(n.name.clone()))
            .collect();
        CovarianceMatrix::new_unchecked(labels, self.sigma.clone())
    }

    pub fn at_lag(&self, tau: f64) -> Result<LaggedModel<'_>> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::InvalidLag(tau));
        }
        let phi = matrix_exponential(&self.drift, tau);
        let (_, w) = transition(&self.drift, &self.noise, tau);
        Ok(LaggedModel {
            stationary: self,
            tau,
            phi,
            w,
        })
    }
}

fn solve_stationary(
    network: &ValidatedNetwork,
    drift: &DMatrix<f64>,
    noise: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let order = network.topological_order();
    let n = order.len();
    let a = DMatrix::from_fn(n, n, |r, c| drift[(order[r], order[c])]);
    let q = DMatrix::from_fn(n, n, |r, c| noise[(order[r], order[c])]);
    let s_topo = lyapunov_lower_triangular(&a, &q)?;
    let mut sigma = DMatrix::<f64>::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            sigma[(order[r], order[c])] = s_topo[(r, c)];
        }
    }
    let residual = drift * &sigma + &sigma * drift.transpose() + noise;
    let qmax = max_abs(noise);
    if max_abs(&residual) > tolerance::psd_slack() * qmax {
        return Err(Error::NumericalFailure(format!(
            "Lyapunov residual {:e} exceeds bound",
            max_abs(&residual)
        )));
    }
    Ok(sigma)
}

/// Stationary covariance of all nodes at time `t`.
pub fn stationary_covariance(network: &ValidatedNetwork) -> Result<CovarianceMatrix> {
    Ok(StationaryModel::new(network)?.covariance())
}

/// Joint covariance of `now` variables at `t` and `later` variables at
/// `t + tau`. A negative shift is obtained by swapping the two groups.
pub fn lagged_joint(
    network: &ValidatedNetwork,
    now: &[&str],
    later: &[&str],
    tau: f64,
) -> Result<LaggedGaussian> {
    let model = StationaryModel::new(network)?;
    let lagged = model.at_lag(tau)?;
    lagged.joint(now, later)
}

/// Exact joint law at a fixed lag.
#[derive(Debug, Clone)]
pub struct LaggedModel<'a> {
    stationary: &'a StationaryModel,
    tau: f64,
    phi: DMatrix<f64>,
    w: DMatrix<f64>,
}

impl<'a> LaggedModel<'a> {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Covariance of the noise accumulated over the lag.
    pub fn step_noise(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn stationary(&self) -> &StationaryModel {
        self.stationary
    }

    fn node(&self, label: &VarLabel) -> Result<usize> {
        self.stationary.network.index_of(&label.node)
    }

    /// Explicit joint covariance: the lagged block is `Phi Sigma`.
    pub fn joint(&self, now: &[&str], later: &[&str]) -> Result<LaggedGaussian> {
        let labels: Vec<VarLabel> = now
            .iter()
            .map(|n| VarLabel::now(*n))
            .chain(later.iter().map(|n| VarLabel::later(*n)))
            .collect();
        let values = self.explicit(&labels)?;
        Ok(LaggedGaussian {
            base: CovarianceMatrix::new(labels, values)?,
            lag: self.tau,
        })
    }

    fn explicit(&self, labels: &[VarLabel]) -> Result<DMatrix<f64>> {
        let sigma = &self.stationary.sigma;
        let lagged = &self.phi * sigma; // <v(t+tau) v(t)^T>
        let idx: Vec<usize> = labels.iter().map(|l| self.node(l)).collect::<Result<_>>()?;
        let m = labels.len();
        let mut out = DMatrix::<f64>::zeros(m, m);
        for r in 0..m {
            for c in 0..m {
                let (i, j) = (idx[r], idx[c]);
                out[(r, c)] = match (labels[r].slot, labels[c].slot) {
                    (Slot::Now, Slot::Now) | (Slot::Later, Slot::Later) => sigma[(i, j)],
                    (Slot::Later, Slot::Now) => lagged[(i, j)],
                    (Slot::Now, Slot::Later) => lagged[(j, i)],
                };
            }
        }
        linalg::symmetrize(&mut out);
        Ok(out)
    }
}

impl ConditionalGaussian for LaggedModel<'_> {
    fn conditional(&self, keep: &[VarLabel], given: &[VarLabel]) -> Result<DMatrix<f64>> {
        if given.iter().any(|g| g.slot == Slot::Later) {
            let mut labels = keep.to_vec();
            for g in given {
                if !labels.contains(g) {
                    labels.push(g.clone());
                }
            }
            let joint = CovarianceMatrix::new_unchecked(labels.clone(), self.explicit(&labels)?);
            return joint.conditional(keep, given);
        }

        let n = self.stationary.network.len();
        let mut g_nodes: Vec<usize> = Vec::new();
        for g in given {
            let i = self.node(g)?;
            if !g_nodes.contains(&i) {
                g_nodes.push(i);
            }
        }
        let free: Vec<usize> = (0..n).filter(|i| !g_nodes.contains(i)).collect();
        let cond = condition(&self.stationary.sigma, &free, &g_nodes)?;
        let mut sigma_c = DMatrix::<f64>::zeros(n, n);
        for (r, &i) in free.iter().enumerate() {
            for (c, &j) in free.iter().enumerate() {
                sigma_c[(i, j)] = cond.schur[(r, c)];
            }
        }

        let m = keep.len();
        let mut rows = DMatrix::<f64>::zeros(m, n);
        let mut idx = Vec::with_capacity(m);
        for (r, label) in keep.iter().enumerate() {
            let i = self.node(label)?;
            idx.push(i);
            match label.slot {
                Slot::Now => rows[(r, i)] = 1.0,
                Slot::Later => rows.row_mut(r).copy_from(&self.phi.row(i)),
            }
        }
        let mut out = &rows * sigma_c * rows.transpose();
        for r in 0..m {
            for c in 0..m {
                if keep[r].slot == Slot::Later && keep[c].slot == Slot::Later {
                    out[(r, c)] += self.w[(idx[r], idx[c])];
                }
            }
        }
        linalg::symmetrize(&mut out);
        Ok(out)
    }

    fn determinism_floor(&self) -> f64 {
        tolerance::exact_determinism_floor()
    }
}
