//! Gaussian plug-in estimates of the decomposition from sample paths.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gausscov::{CovarianceMatrix, VarLabel};
use crate::measures::{decompose_law, DecompositionPoint};
use crate::simulate::TrajectoryEnsemble;

/// Pooled sample covariance of variables at step `s` and `s + lag_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedSampleCov {
    pub labels: Vec<VarLabel>,
    pub lag_steps: usize,
    pub covariance: CovarianceMatrix,
    /// Number of pooled sample pairs.
    pub samples: usize,
    /// Sample count corrected for autocorrelation along trajectories.
    pub effective_n: f64,
}

// Trajectories per partial sum; fixed so that the summation order, and
// therefore every output bit, is independent of the thread count.
const CHUNK: usize = 1024;

pub fn sample_lagged_cov(
    ensemble: &TrajectoryEnsemble,
    vars_now: &[&str],
    vars_later: &[&str],
    lag_steps: usize,
) -> Result<LaggedSampleCov> {
    if lag_steps >= ensemble.steps {
        return Err(Error::InsufficientData(format!(
            "lag of {lag_steps} steps needs more than {} recorded steps",
            ensemble.steps
        )));
    }
    let per_traj = ensemble.steps - lag_steps;
    let samples = per_traj * ensemble.n_traj;
    if samples < 10 {
        return Err(Error::InsufficientData(format!(
            "{samples} sample pairs (at least 10 required)"
        )));
    }
    let mut columns: Vec<(usize, usize)> = Vec::new(); // (node, step offset)
    let mut labels = Vec::new();
    for name in vars_now {
        columns.push((ensemble.node_index(name)?, 0));
        labels.push(VarLabel::now(*name));
    }
    for name in vars_later {
        columns.push((ensemble.node_index(name)?, lag_steps));
        labels.push(VarLabel::later(*name));
    }
    let m = columns.len();
    if m > 64 {
        return Err(Error::InvalidParameter("too many variables".into()));
    }
    let n_nodes = ensemble.nodes();

    let chunk_sum = |f: &(dyn Fn(&[f64], usize, &mut [f64]) + Sync), width: usize| -> Vec<f64> {
        let parts: Vec<Vec<f64>> = (0..ensemble.n_traj.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut acc = vec![0.0; width];
                for k in c * CHUNK..((c + 1) * CHUNK).min(ensemble.n_traj) {
                    let traj = ensemble.trajectory(k);
                    for s in 0..per_traj {
                        f(traj, s, &mut acc);
                    }
                }
                acc
            })
            .collect();
        let mut total = vec![0.0; width];
        for p in parts {
            for (t, v) in total.iter_mut().zip(p) {
                *t += v;
            }
        }
        total
    };

    let sums = chunk_sum(
        &|traj, s, acc| {
            for (i, &(node, off)) in columns.iter().enumerate() {
                acc[i] += traj[(s + off) * n_nodes + node];
            }
        },
        m,
    );
    let means: Vec<f64> = sums.iter().map(|s| s / samples as f64).collect();
    let products = chunk_sum(
        &|traj, s, acc| {
            let mut centered = [0.0f64; 64];
            for (i, &(node, off)) in columns.iter().enumerate() {
                centered[i] = traj[(s + off) * n_nodes + node] - means[i];
            }
            for i in 0..m {
                for j in 0..=i {
                    acc[i * m + j] += centered[i] * centered[j];
                }
            }
        },
        m * m,
    );
    let mut cov = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = products[i * m + j] / (samples - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let effective_n = effective_samples(ensemble, vars_now, per_traj)?;
    Ok(LaggedSampleCov {
        covariance: CovarianceMatrix::new(labels.clone(), cov)?,
        labels,
        lag_steps,
        samples,
        effective_n,
    })
}

/// `n_traj m^2 / (m + 2 sum_k (m - k) rho_k)` for `m` samples per
/// trajectory, with `rho_k` the pooled autocorrelation of the slowest of
/// `vars` (largest integrated autocorrelation time), summed up to its first
/// non-positive value.
pub fn effective_samples(ensemble: &TrajectoryEnsemble, vars: &[&str], m: usize) -> Result<f64> {
    if m <= 1 || ensemble.n_traj == 0 {
        return Ok((m * ensemble.n_traj) as f64);
    }
    let n_nodes = ensemble.nodes();
    let mut worst_denominator = m as f64;
    for name in vars {
        let node = ensemble.node_index(name)?;
        let series = |k: usize| {
            let traj = ensemble.trajectory(k);
            (0..m).map(move |s| traj[s * n_nodes + node])
        };
        let total = (m * ensemble.n_traj) as f64;
        let mean: f64 = (0..ensemble.n_traj).map(|k| series(k).sum::<f64>()).sum::<f64>() / total;
        let var: f64 = (0..ensemble.n_traj)
            .map(|k| series(k).map(|v| (v - mean) * (v - mean)).sum::<f64>())
            .sum::<f64>()
            / total;
        if !(var > 0.0) {
            continue;
        }
        let mut denominator = m as f64;
        for lag in 1..m.min(100_000) {
            let c: f64 = (0..ensemble.n_traj)
                .into_par_iter()
                .map(|k| {
                    let traj = ensemble.trajectory(k);
                    (0..m - lag)
                        .map(|s| {
                            (traj[s * n_nodes + node] - mean) * (traj[(s + lag) * n_nodes + node] - mean)
                        })
                        .sum::<f64>()
                })
                .collect::<Vec<_>>()
                .iter()
                .sum::<f64>()
                / (ensemble.n_traj * (m - lag)) as f64;
            let rho = c / var;
            if rho <= 0.0 {
                break;
            }
            denominator += 2.0 * (m - lag) as f64 * rho;
        }
        worst_denominator = worst_denominator.max(denominator);
    }
    Ok(ensemble.n_traj as f64 * (m as f64) * (m as f64) / worst_denominator)
}

/// Plug-in decomposition with its effective sample count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalPoint {
    pub point: DecompositionPoint,
    pub effective_n: f64,
}

pub fn empirical_decomposition(
    ensemble: &TrajectoryEnsemble,
    src: &str,
    dst: &str,
    lag_steps: usize,
    parents: &[&str],
) -> Result<EmpiricalPoint> {
    let mut now = vec![src, dst];
    now.extend_from_slice(parents);
    let cov = sample_lagged_cov(ensemble, &now, &[dst], lag_steps)?;
    let tau = lag_steps as f64 * ensemble.dt;
    let point = decompose_law(&cov.covariance, src, dst, tau, parents)?;
    Ok(EmpiricalPoint {
        point,
        effective_n: cov.effective_n,
    })
}
