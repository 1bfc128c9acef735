//! Stationary sample paths.
//!
//! Every trajectory draws its randomness from its own ChaCha20 stream,
//! selected by the trajectory index under the ensemble seed, so results do
//! not depend on thread count or scheduling.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gausscov::{transition, StationaryModel};
use crate::linalg::psd_factor;
use crate::network::ValidatedNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Gaussian transition sampling; no discretization error.
    Exact,
    /// Explicit Euler-Maruyama.
    EulerMaruyama,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Scheme::Exact),
            "em" => Ok(Scheme::EulerMaruyama),
            other => Err(Error::InvalidParameter(format!("unknown scheme `{other}`"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Exact => "exact",
            Scheme::EulerMaruyama => "em",
        })
    }
}

/// One-step transition `v -> Phi v + F xi` with standard normal `xi`.
#[derive(Debug, Clone)]
pub struct StepKernel {
    mean: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl StepKernel {
    /// Matrix applied to the current state.
    pub fn mean_factor(&self) -> &DMatrix<f64> {
        &self.mean
    }

    /// Covariance of the step noise.
    pub fn noise_covariance(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }

    pub fn dim(&self) -> usize {
        self.mean.nrows()
    }

    /// Advances `state` in place, drawing one normal per node.
    pub fn step<R: rand::Rng + ?Sized>(&self, state: &mut DVector<f64>, rng: &mut R) {
        let n = self.dim();
        let xi = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        *state = &self.mean * &*state + &self.factor * xi;
    }
}

/// Exact kernel over a step `dt`: `Phi = e^{A dt}` and the accumulated noise
/// covariance, factored by a clamped symmetric eigendecomposition.
pub fn exact_step_sampler(network: &ValidatedNetwork, dt: f64) -> Result<StepKernel> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step {dt}")));
    }
    let (phi, w) = transition(&network.drift_matrix(), &network.noise_matrix(), dt);
    Ok(StepKernel {
        mean: phi,
        factor: psd_factor(&w)?,
    })
}

/// Euler-Maruyama kernel `v -> v + A v dt + sqrt(noise dt) xi`; requires
/// `dt < 0.1 / max(decay)`.
pub fn euler_maruyama_step(network: &ValidatedNetwork, dt: f64) -> Result<StepKernel> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step {dt}")));
    }
    let max_decay = network.nodes().iter().map(|n| n.decay).fold(0.0, f64::max);
    let limit = 0.1 / max_decay;
    if dt >= limit {
        return Err(Error::StepTooLarge { dt, limit });
    }
    let n = network.len();
    let mean = DMatrix::identity(n, n) + network.drift_matrix() * dt;
    let factor = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        network.nodes().iter().map(|node| (node.noise * dt).sqrt()),
    ));
    Ok(StepKernel { mean, factor })
}

/// Sample paths stored as `data[(traj * steps + step) * nodes + node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub labels: Vec<String>,
    pub dt: f64,
    /// Recorded time points per trajectory, the initial state included.
    pub steps: usize,
    pub n_traj: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub data: Vec<f64>,
}

impl TrajectoryEnsemble {
    pub fn nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn node_index(&self, name: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn value(&self, traj: usize, step: usize, node: usize) -> f64 {
        self.data[(traj * self.steps + step) * self.nodes() + node]
    }

    /// All states of one trajectory, row-major by step.
    pub fn trajectory(&self, traj: usize) -> &[f64] {
        let len = self.steps * self.nodes();
        &self.data[traj * len..(traj + 1) * len]
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

/// Random stream of trajectory `index` under `seed`.
pub fn trajectory_rng(seed: u64, index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn generate(
    network: &ValidatedNetwork,
    scheme: Scheme,
    dt: f64,
    steps: usize,
    n_traj: usize,
    seed: u64,
) -> Result<TrajectoryEnsemble> {
    generate_with_burn_in(network, scheme, dt, steps, n_traj, seed, 0)
}

/// As [`generate`], discarding `burn_in` steps after the stationary initial
/// draw (useful to let the Euler-Maruyama chain settle on its own
/// discretized stationary law).
pub fn generate_with_burn_in(
    network: &ValidatedNetwork,
    scheme: Scheme,
    dt: f64,
    steps: usize,
    n_traj: usize,
    seed: u64,
    burn_in: usize,
) -> Result<TrajectoryEnsemble> {
    let kernel = match scheme {
        Scheme::Exact => exact_step_sampler(network, dt)?,
        Scheme::EulerMaruyama => euler_maruyama_step(network, dt)?,
    };
    let model = StationaryModel::new(network)?;
    let init = psd_factor(model.sigma())?;
    let n = network.len();
    let mut data = vec![0.0; n_traj * steps * n];
    if steps > 0 && n > 0 {
        data.par_chunks_mut(steps * n)
            .enumerate()
            .for_each(|(k, out)| {
                let mut rng = trajectory_rng(seed, k);
                let xi = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                let mut state = &init * xi;
                for _ in 0..burn_in {
                    kernel.step(&mut state, &mut rng);
                }
                for s in 0..steps {
                    if s > 0 {
                        kernel.step(&mut state, &mut rng);
                    }
                    out[s * n..(s + 1) * n].copy_from_slice(state.as_slice());
                }
            });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite sample".into()));
    }
    Ok(TrajectoryEnsemble {
        labels: network.names(),
        dt,
        steps,
        n_traj,
        seed,
        scheme,
        data,
    })
}
