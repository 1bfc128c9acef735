//! Acceptance criteria. Each prints one PASS/FAIL line with the measured
//! values and runtime; the process fails if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use causalflow::blrm::{self, causation_capacity, peak_causal_influence, BlrmParams};
use causalflow::estimate::empirical_decomposition;
use causalflow::ffl::{self, verify_zero_influence, FflParams};
use causalflow::gausscov::{CovarianceMatrix, StationaryModel, VarLabel};
use causalflow::measures::{gaussian_mi, linear_redundancy, transfer_entropy, Decomposer};
use causalflow::network::{LinearNetwork, ValidatedNetwork};
use causalflow::simulate::{generate, Scheme};
use causalflow::special::maximize_over_lag;
use causalflow::verify::default_grid;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fig1() -> BlrmParams {
    BlrmParams::new(0.1, 0.2, 10.0, 10.0).unwrap()
}

fn lagged_mi(net: &ValidatedNetwork, a: &str, b: &str, tau: f64) -> f64 {
    let model = StationaryModel::new(net).unwrap();
    let law = model.at_lag(tau).unwrap();
    gaussian_mi(&law, &[VarLabel::now(a)], &[VarLabel::later(b)], &[]).unwrap().value()
}

fn optimal_lag() -> Outcome {
    let p = fig1();
    let net = p.network().unwrap();
    let (tau, i) = (blrm::tau_opt(&p), blrm::i_opt(&p));
    let (tau_num, i_num) = maximize_over_lag(|t| lagged_mi(&net, "x", "y", t), 0.01, 300.0, 97, 1e-10);
    let detail = format!(
        "tau_opt {tau:.7} (engine {tau_num:.7}), I_opt {i:.7} (engine {i_num:.7})"
    );
    ensure(
        (tau - 2.876821).abs() <= 1e-6
            && (i - 0.928149).abs() <= 1e-6
            && (tau_num - tau).abs() <= 1e-6
            && (i_num - i).abs() <= 1e-6,
        detail,
    )
}

fn asymptotics() -> Outcome {
    let i_opt = |b: f64| blrm::i_opt(&BlrmParams::new(1.0, b, 1.0, 1.0).unwrap());
    let (hi, lo) = (i_opt(1e4), i_opt(1e-4));
    let (hi_ref, lo_ref) = (0.5 * 1e4f64.ln(), 2e-4);
    let (e_hi, e_lo) = (rel(hi, hi_ref), rel(lo, lo_ref));
    ensure(
        e_hi <= 0.02 && e_lo <= 0.02,
        format!(
            "I_opt(1e4) = {hi:.4} vs 1/2 ln b = {hi_ref:.4} ({:.1}% off); I_opt(1e-4) = {lo:.4e} vs 2b = {lo_ref:.1e} ({:.2}% off)",
            100.0 * e_hi,
            100.0 * e_lo
        ),
    )
}

fn zero_influence() -> Outcome {
    let p = fig1();
    let net = p.network().unwrap();
    let grid = default_grid(&net, 256);
    let engine = Decomposer::new(&net, "y", "x", false).unwrap().curve(&grid).unwrap();
    let mut blrm_engine = 0.0f64;
    let mut blrm_closed = 0.0f64;
    for (pt, &tau) in engine.points.iter().zip(&grid) {
        blrm_engine = blrm_engine.max(pt.c.abs());
        // x is Markov: I(x_tau; (x, y)) = I(x_tau; x)
        let own = -0.5 * (-(-2.0 * tau / p.t_rel).exp_m1()).ln();
        let c = blrm::mutual_information(&p, -tau) - linear_redundancy(p.i_xy(), own);
        blrm_closed = blrm_closed.max(c.abs());
    }
    let q = FflParams::reference().with_gamma(0.0);
    let report = verify_zero_influence(&q, &default_grid(&q.network().unwrap(), 256)).unwrap();
    ensure(
        blrm_engine.max(blrm_closed).max(report.max_abs()) <= 1e-9,
        format!(
            "|C_y->x| engine {blrm_engine:.1e} closed {blrm_closed:.1e}; |C_x->y|z| engine {:.1e} closed {:.1e}",
            report.max_abs_engine, report.max_abs_closed_form
        ),
    )
}

fn capacity() -> Outcome {
    let report = causation_capacity(&[1e2, 1e3, 1e4, 1e5, 1e6]).unwrap();
    let est = report.estimate.unwrap();
    let (c, _) = peak_causal_influence(1e-4).unwrap();
    let ratio = c / blrm::i_opt(&BlrmParams::new(1.0, 1e-4, 1.0, 1.0).unwrap());
    ensure(
        (0.50..=0.60).contains(&est) && (0.70..=0.80).contains(&ratio),
        format!("capacity {est:.5} nats; peak C / I_opt at 1e-4 = {ratio:.4}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_blrm = 0.0f64;
    let mut draws = 0;
    while draws < 1000 {
        let b = 10f64.powf(rng.random_range(-3.0..4.0));
        if (b - 1.0).abs() < 1e-6 {
            continue;
        }
        draws += 1;
        let t_rel = 10f64.powf(rng.random_range(-1.0..1.0));
        let alpha = rng.random_range(-2.0..2.0);
        if alpha == 0.0 {
            continue;
        }
        let p = BlrmParams::new(alpha, b / t_rel, t_rel, rng.random_range(0.5..5.0)).unwrap();
        let tau = t_rel * 10f64.powf(rng.random_range(-3.0..1.0));
        let net = p.network().unwrap();
        let te = transfer_entropy(&net, "x", "y", tau, &[]).unwrap().value();
        worst_blrm = worst_blrm
            .max(rel(lagged_mi(&net, "x", "y", tau), blrm::mutual_information(&p, tau)))
            .max(rel(te, blrm::te_closed_form(&p, tau).unwrap().value()));
    }
    let mut worst_ffl = 0.0f64;
    for _ in 0..1000 {
        let mut pick = |lo: f64, hi: f64| 10f64.powf(rng.random_range(lo..hi));
        let p = FflParams {
            t_rel: pick(-0.5, 1.5),
            alpha_x: pick(-1.0, 0.5),
            alpha_y: pick(-1.0, 0.5),
            beta_x: pick(-1.5, 0.5),
            beta_y: pick(-1.5, 0.5),
            gamma: 0.0,
            d_z: pick(-0.5, 1.0),
            d_x: pick(-2.0, 0.5),
            d_y: pick(-2.0, 0.5),
        };
        let tau = p.t_rel * pick(-3.0, 1.0);
        let model = StationaryModel::new(&p.network().unwrap()).unwrap();
        let law = model.at_lag(tau).unwrap();
        let [x, y, z] = ["x", "y", "z"].map(VarLabel::now);
        let y_tau = VarLabel::later("y");
        let given = [z];
        let mi = |a: &[VarLabel], b: &[VarLabel]| gaussian_mi(&law, a, b, &given).unwrap().value();
        let m = ffl::cond_measures(&p, tau).unwrap();
        worst_ffl = worst_ffl
            .max(rel(m.i_xy, mi(&[x.clone()], &[y.clone()])))
            .max(rel(m.i_lag, mi(&[x.clone()], &[y_tau.clone()])))
            .max(rel(m.i_tot, mi(&[x, y], &[y_tau])));
    }
    ensure(
        worst_blrm <= 1e-9 && worst_ffl <= 1e-9,
        format!("worst relative error: response model {worst_blrm:.1e}, feed-forward loop {worst_ffl:.1e} (1000 draws each)"),
    )
}

fn redundancy_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_bound = 0.0f64;
    let mut worst_sym = 0.0f64;
    for _ in 0..100_000 {
        let a = 10f64.powf(rng.random_range(-6.0..1.5));
        let b = 10f64.powf(rng.random_range(-6.0..1.5));
        let r = linear_redundancy(a, b);
        worst_bound = worst_bound.max(-r).max(r - a.min(b));
        worst_sym = worst_sym.max((r - linear_redundancy(b, a)).abs());
    }
    let mut worst_chain = 0.0f64;
    for _ in 0..1000 {
        let (r1, r2) = (rng.random_range(-0.999..0.999), rng.random_range(-0.999..0.999));
        let c = [[1.0, r1, r1 * r2], [r1, 1.0, r2], [r1 * r2, r2, 1.0]];
        let labels = ["a", "b", "c"].map(VarLabel::now);
        let law = CovarianceMatrix::new(labels.to_vec(), DMatrix::from_fn(3, 3, |i, j| c[i][j])).unwrap();
        let [a, b, cc] = labels;
        let i_ab = gaussian_mi(&law, &[a.clone()], &[b.clone()], &[]).unwrap().value();
        let i_c_ab = gaussian_mi(&law, &[a.clone(), b], &[cc.clone()], &[]).unwrap().value();
        let i_ac = gaussian_mi(&law, &[a], &[cc], &[]).unwrap().value();
        worst_chain = worst_chain.max((linear_redundancy(i_ab, i_c_ab) - i_ac).abs());
    }
    ensure(
        worst_bound <= 1e-12 && worst_sym <= 1e-12 && worst_chain <= 1e-9,
        format!("bound {worst_bound:.1e}, symmetry {worst_sym:.1e} (1e5 pairs); chain {worst_chain:.1e} (1e3 chains)"),
    )
}

fn random_dag(rng: &mut ChaCha8Rng, n: usize) -> ValidatedNetwork {
    let mut net = LinearNetwork::new();
    for i in 0..n {
        let noise = if i > 0 && rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.1..5.0) };
        net = net.node(&format!("v{i}"), rng.random_range(0.05..2.0), noise);
    }
    for j in 1..n {
        // every later node has at least one parent, so noiseless ones are driven
        let first = rng.random_range(0..j);
        for i in 0..j {
            if i == first || rng.random_bool(0.4) {
                net = net.edge(&format!("v{i}"), &format!("v{j}"), rng.random_range(-2.0..2.0));
            }
        }
    }
    net.validate().unwrap()
}

fn closure() -> Outcome {
    let mut nets = vec![
        fig1().network().unwrap(),
        BlrmParams::new(0.1, 0.1, 10.0, 10.0).unwrap().network().unwrap(),
        FflParams::reference().with_gamma(0.0).network().unwrap(),
        FflParams::reference().network().unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..16 {
        nets.push(random_dag(&mut rng, 2 + k % 4));
    }
    let mut worst = 0.0f64;
    let mut points = 0usize;
    for net in &nets {
        let mut grid = vec![0.0];
        grid.extend(default_grid(net, 64));
        for src in net.names() {
            for dst in net.names() {
                if src == dst {
                    continue;
                }
                for parents in [false, true] {
                    let curve = Decomposer::new(net, &src, &dst, parents).unwrap().curve(&grid).unwrap();
                    for p in &curve.points {
                        worst = worst.max(p.closure_error());
                        points += 1;
                    }
                }
            }
        }
    }
    ensure(worst <= 1e-9, format!("max closure error {worst:.1e} over {points} points, {} networks", nets.len()))
}

fn simulation_loop() -> Outcome {
    let p = fig1();
    let net = p.network().unwrap();
    let tau = blrm::tau_opt(&p);
    // two recorded states per path, tau_opt apart: every pair is independent
    let e = generate(&net, Scheme::Exact, tau, 2, 1_000_000, 31).unwrap();
    let same = empirical_decomposition(&e, "x", "y", 0, &[]).unwrap();
    let lagged = empirical_decomposition(&e, "x", "y", 1, &[]).unwrap();
    let reverse = empirical_decomposition(&e, "y", "x", 1, &[]).unwrap();
    let i_xy_err = (same.point.i_xy - 0.5 * 3f64.ln()).abs();
    let i_lag_err = (lagged.point.i_lag - 0.928149).abs();
    let c_rev = reverse.point.c.abs();
    let n_eff = lagged.effective_n.min(same.effective_n);

    let mut fit = Vec::new();
    for (k, (n, reps)) in [(10_000usize, 64u64), (100_000, 16), (1_000_000, 8)].iter().enumerate() {
        let mut sq = 0.0;
        for r in 0..*reps {
            let e = generate(&net, Scheme::Exact, tau, 2, *n, 1000 * (k as u64 + 1) + r).unwrap();
            let d = empirical_decomposition(&e, "x", "y", 1, &[]).unwrap();
            sq += (d.point.i_lag - blrm::i_opt(&p)).powi(2);
        }
        fit.push(((*n as f64).log10(), (sq / *reps as f64).sqrt().log10()));
    }
    let mx = fit.iter().map(|f| f.0).sum::<f64>() / 3.0;
    let my = fit.iter().map(|f| f.1).sum::<f64>() / 3.0;
    let slope = -fit.iter().map(|f| (f.0 - mx) * (f.1 - my)).sum::<f64>()
        / fit.iter().map(|f| (f.0 - mx).powi(2)).sum::<f64>();
    ensure(
        n_eff >= 1e6 && i_xy_err <= 0.01 && i_lag_err <= 0.01 && c_rev <= 0.01 && (0.4..=0.6).contains(&slope),
        format!(
            "N_eff {n_eff:.3e}; |i_xy err| {i_xy_err:.1e}, |i_lag err| {i_lag_err:.1e}, |C_y->x| {c_rev:.1e}; error slope {slope:.3}"
        ),
    )
}

fn curve_shapes() -> Outcome {
    let p = fig1();
    let net = p.network().unwrap();
    let dec = Decomposer::new(&net, "x", "y", false).unwrap();
    let c0 = dec.at(0.0).unwrap().c;
    let grid = default_grid(&net, 256);
    let curve = dec.curve(&grid).unwrap();
    let cs: Vec<f64> = curve.points.iter().map(|q| q.c).collect();
    let floor = 1e-12 * curve.peak_c;
    let peaks = (1..cs.len() - 1)
        .filter(|&i| cs[i] > floor && cs[i] >= cs[i - 1] && cs[i] > cs[i + 1])
        .count();
    let negative_synergy = curve.points.iter().any(|q| q.s < 0.0);

    let te = |net: &ValidatedNetwork, tau: f64| transfer_entropy(net, "x", "y", tau, &[]).unwrap().value();
    let taus: Vec<f64> = (1..=7).map(|k| 10f64.powi(-k)).collect();
    let te_blrm: Vec<f64> = taus.iter().map(|&t| te(&net, t)).collect();
    let ffl_net = FflParams::reference().network().unwrap();
    let te_ffl: Vec<f64> = taus.iter().map(|&t| te(&ffl_net, t)).collect();
    let blrm_diverges = te_blrm.windows(2).all(|w| w[1] > w[0] + 1.0) && te_blrm[6] > 8.0;
    let ffl_vanishes = te_ffl.windows(2).all(|w| w[1] < w[0]) && te_ffl[6] < 1e-3;

    let model = StationaryModel::new(&net).unwrap();
    let mut below = 0;
    let mut threshold_ok = true;
    let mut above_positive = false;
    for q in &curve.points {
        let law = model.at_lag(q.tau).unwrap();
        let i_yy = gaussian_mi(&law, &[VarLabel::now("y")], &[VarLabel::later("y")], &[]).unwrap().value();
        let u_wb = q.i_lag - q.r_wb;
        if q.i_lag < i_yy {
            below += 1;
            threshold_ok &= u_wb == 0.0;
        } else if u_wb > 0.0 {
            above_positive = true;
        }
    }
    ensure(
        c0 == 0.0
            && peaks == 1
            && curve.tau_res > curve.tau_opt
            && negative_synergy
            && blrm_diverges
            && ffl_vanishes
            && below > 0
            && threshold_ok
            && above_positive,
        format!(
            "C(0) = {c0}; {peaks} peak; tau_res {:.3} > tau_opt {:.3}; s < 0 somewhere: {negative_synergy}; TE(1e-7) response {:.2} vs loop {:.1e}; W-B unique info zero on {below} points below threshold: {threshold_ok}",
            curve.tau_res, curve.tau_opt, te_blrm[6], te_ffl[6]
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("blrm.net");
    std::fs::write(&net, fig1().network().unwrap().to_file_string()).unwrap();
    let net = net.to_str().unwrap();
    let run = |tag: &str| -> Vec<Vec<u8>> {
        let traj = dir.path().join(format!("traj_{tag}.csv"));
        let curve = dir.path().join(format!("curve_{tag}.csv"));
        let est = dir.path().join(format!("est_{tag}.csv"));
        let bin = env!("CARGO_BIN_EXE_causalflow");
        let go = |args: &[&str]| {
            let st = Command::new(bin).args(args).env_remove("CAUSALFLOW_EPS").status().unwrap();
            assert!(st.success(), "{args:?}");
        };
        go(&["simulate", "--network", net, "--steps", "200", "--ensemble", "50", "--dt", "0.5", "--seed", "99", "--out", traj.to_str().unwrap()]);
        go(&["analyze", "--network", net, "--source", "x", "--target", "y", "--out", curve.to_str().unwrap()]);
        go(&["estimate", "--network", net, "--source", "x", "--target", "y", "--trajectories", traj.to_str().unwrap(), "--tau-min", "0.5", "--tau-max", "20", "--tau-steps", "24", "--out", est.to_str().unwrap()]);
        [traj, curve, est].iter().map(|p| std::fs::read(p).unwrap()).collect()
    };
    let (a, b) = (run("a"), run("b"));
    ensure(
        a == b,
        format!("trajectory, curve and estimate CSVs byte-identical: {} bytes", a.iter().map(Vec::len).sum::<usize>()),
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "optimal lag and information", Duration::from_secs(1), optimal_lag),
        (2, "information asymptotics", Duration::from_secs(1), asymptotics),
        (3, "zero-influence theorems", Duration::from_secs(5), zero_influence),
        (4, "causation capacity", Duration::from_secs(60), capacity),
        (5, "closed forms vs general engine", Duration::from_secs(30), oracle_equivalence),
        (6, "redundancy properties", Duration::from_secs(5), redundancy_properties),
        (7, "decomposition closure", Duration::from_secs(5), closure),
        (8, "simulation and estimation loop", Duration::from_secs(60), simulation_loop),
        (9, "qualitative curve shapes", Duration::from_secs(10), curve_shapes),
        (10, "determinism", Duration::from_secs(10), determinism),
    ];
    let mut failed = 0;
    for (id, name, budget, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let (ok, mut detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        let in_time = elapsed <= budget;
        if !in_time {
            detail.push_str(&format!("; over the {:.0} s budget", budget.as_secs_f64()));
        }
        let pass = ok && in_time;
        failed += usize::from(!pass);
        println!(
            "{} criterion {id:>2} {name}: {detail} [{:.2} s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} of 10 criteria failed");
        std::process::exit(1);
    }
}
