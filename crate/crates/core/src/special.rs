//! Scalar helpers for evaluating closed forms without cancellation.

/// `(e^z - 1) / z`, equal to 1 at `z = 0`.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0
    } else {
        z.exp_m1() / z
    }
}

/// `ln(1 + x) / x`, equal to 1 at `x = 0`.
pub fn ln1p_over(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x / 2.0 + x * x / 3.0
    } else {
        x.ln_1p() / x
    }
}

/// `e^{-k} - 1 + k - k^2/2`, accurate for small `k >= 0`.
pub fn exp_neg_rem3(k: f64) -> f64 {
    if k < 0.5 {
        // sum_{n >= 3} (-k)^n / n!
        let mut term = -k * k * k / 6.0;
        let mut sum = 0.0f64;
        let mut n = 3.0;
        while term.abs() > 1e-18 * sum.abs().max(f64::MIN_POSITIVE) {
            sum += term;
            n += 1.0;
            term *= -k / n;
        }
        sum
    } else {
        (-k).exp() - 1.0 + k - 0.5 * k * k
    }
}

/// Regularized lower incomplete gamma `P(k, x)` for integer `k >= 1`.
pub fn gamma_p_int(k: u32, x: f64) -> f64 {
    assert!(k >= 1);
    if x <= 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    if x > kf + 1.0 {
        // 1 - e^{-x} sum_{j<k} x^j / j!
        let mut term = (-x).exp();
        let mut sum = 0.0;
        for j in 0..k {
            sum += term;
            term *= x / (j as f64 + 1.0);
        }
        (1.0 - sum).max(0.0)
    } else {
        // e^{-x} x^k / k! * sum_{i>=0} x^i / ((k+1)...(k+i))
        let ln_lead = kf * x.ln() - x - ln_factorial(k);
        let mut term = 1.0;
        let mut sum = 0.0;
        let mut i = 1.0;
        while term > 1e-18 * sum {
            sum += term;
            term *= x / (kf + i);
            i += 1.0;
        }
        (ln_lead.exp() * sum).min(1.0)
    }
}

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

/// Golden-section maximization of `f` on `[lo, hi]`, to absolute tolerance
/// `tol` in the argument. Returns `(argmax, max)`.
pub fn golden_max(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while (hi - lo).abs() > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Maximizes a smooth unimodal `f` over `(0, inf)`: a log-spaced coarse scan
/// of `[lo, hi]` brackets the peak, then golden section in `ln tau` refines
/// it to relative tolerance `rel_tol`. Returns `(argmax, max)`.
pub fn maximize_over_lag(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    coarse: usize,
    rel_tol: f64,
) -> (f64, f64) {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let step = (lhi - llo) / (coarse - 1) as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..coarse {
        let v = f((llo + step * i as f64).exp());
        if v > best.1 {
            best = (i, v);
        }
    }
    let a = llo + step * best.0.saturating_sub(1) as f64;
    let b = llo + step * (best.0 + 1).min(coarse - 1) as f64;
    let (lx, v) = golden_max(|l| f(l.exp()), a, b, rel_tol);
    if v >= best.1 {
        (lx.exp(), v)
    } else {
        ((llo + step * best.0 as f64).exp(), best.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi1_matches_direct_away_from_zero() {
        for z in [-3.0f64, -0.1, 0.7, 4.0] {
            let direct = (f64::exp(z) - 1.0) / z;
            assert!((phi1(z) - direct).abs() < 1e-14 * direct.abs());
        }
        // 1 + z/2 + z^2/6 + z^3/24 + z^4/120
        let z = 1e-3f64;
        let series = 1.0 + z / 2.0 + z * z / 6.0 + z.powi(3) / 24.0 + z.powi(4) / 120.0;
        assert!((phi1(z) - series).abs() < 1e-15);
        assert_eq!(phi1(0.0), 1.0);
        // continuity across the series switch
        for z in [0.99e-5f64, 1.01e-5, -0.99e-5, -1.01e-5] {
            let series = 1.0 + z / 2.0 + z * z / 6.0;
            assert!((phi1(z) - series).abs() < 1e-15, "z={z}");
        }
    }

    #[test]
    fn ln1p_over_limits() {
        assert_eq!(ln1p_over(0.0), 1.0);
        assert!((ln1p_over(1.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn exp_rem3_agrees_across_switch() {
        for k in [1e-6, 1e-3, 0.1, 0.49, 0.51, 2.0] {
            // compare with high-order Taylor evaluated in pieces
            let mut sum = 0.0;
            let mut term = -k * k * k / 6.0;
            for n in 4..60 {
                sum += term;
                term *= -k / n as f64;
            }
            assert!((exp_neg_rem3(k) - sum).abs() <= 1e-13 * sum.abs(), "k={k}");
        }
    }

    #[test]
    fn gamma_p_small_cases() {
        // P(1, x) = 1 - e^{-x}
        for x in [1e-8, 0.3, 1.9, 2.1, 40.0] {
            let expect = -f64::exp_m1(-x);
            assert!((gamma_p_int(1, x) - expect).abs() <= 1e-14 * expect, "x={x}");
        }
        // P(3, x) = 1 - e^{-x}(1 + x + x^2/2)
        for x in [0.5f64, 3.0, 10.0] {
            let expect = 1.0 - (-x).exp() * (1.0 + x + x * x / 2.0);
            assert!((gamma_p_int(3, x) - expect).abs() <= 1e-13 * expect, "x={x}");
        }
        assert_eq!(gamma_p_int(5, 0.0), 0.0);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(|x| -(x - 1.234).powi(2) + 2.0, 0.0, 5.0, 1e-10);
        // a flat peak pins the argument only to about sqrt(machine epsilon)
        assert!((x - 1.234).abs() < 1e-7);
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lag_maximizer_handles_tiny_scales() {
        let peak = 3e-7;
        let f = |t: f64| -((t / peak).ln()).powi(2);
        let (x, _) = maximize_over_lag(f, 1e-10, 1e3, 64, 1e-9);
        assert!((x / peak - 1.0).abs() < 1e-6);
    }
}
