//! The single numeric epsilon knob.
//!
//! Every tolerance in the engine is a fixed multiple of this value, so
//! acceptance thresholds stay reproducible. The default is `1e-12`; the
//! command-line front end reads an override from `CAUSALFLOW_EPS`.

use std::sync::atomic::{AtomicU64, Ordering};

pub const DEFAULT_EPSILON: f64 = 1e-12;
pub const EPSILON_ENV: &str = "CAUSALFLOW_EPS";

static EPSILON_BITS: AtomicU64 = AtomicU64::new(0x3D71_9799_812D_EA11); // 1e-12

pub fn epsilon() -> f64 {
    f64::from_bits(EPSILON_BITS.load(Ordering::Relaxed))
}

/// Panics if `eps` is not a positive finite number below one.
pub fn set_epsilon(eps: f64) {
    assert!(eps.is_finite() && eps > 0.0 && eps < 1.0, "epsilon must lie in (0, 1)");
    EPSILON_BITS.store(eps.to_bits(), Ordering::Relaxed);
}

/// Residual variance, relative to a conditioning variable's own variance,
/// at which it counts as determined by the others.
pub fn singular_pivot() -> f64 {
    epsilon()
}

/// Relative PSD slack (`100 * eps`, i.e. 1e-10 by default).
pub fn psd_slack() -> f64 {
    100.0 * epsilon()
}

/// Relative variance floor below which a plug-in conditional variance is zero.
pub fn determinism_floor() -> f64 {
    1e-2 * epsilon()
}

/// Variance floor for the exact engine, whose conditional variances carry
/// no cancellation error and can be resolved far below `eps`.
pub fn exact_determinism_floor() -> f64 {
    epsilon() * epsilon()
}
