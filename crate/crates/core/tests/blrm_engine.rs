use causalflow::blrm::{self, BlrmParams};
use causalflow::gausscov::{StationaryModel, VarLabel};
use causalflow::measures::{gaussian_mi, transfer_entropy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

#[test]
fn closed_forms_match_engine_on_random_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = [0.0f64; 3];
    for _ in 0..1000 {
        let b = 10f64.powf(rng.random_range(-3.0..4.0));
        if (b - 1.0).abs() < 1e-6 {
            continue;
        }
        let t_rel = 10f64.powf(rng.random_range(-1.0..1.0));
        let alpha = rng.random_range(0.1..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let p = BlrmParams::new(alpha, b / t_rel, t_rel, rng.random_range(0.5..5.0)).unwrap();
        let tau = t_rel * 10f64.powf(rng.random_range(-3.0..1.0));
        let net = p.network().unwrap();
        let model = StationaryModel::new(&net).unwrap();
        let law = model.at_lag(tau).unwrap();
        let i = gaussian_mi(&law, &[VarLabel::now("x")], &[VarLabel::later("y")], &[]).unwrap();
        let te = transfer_entropy(&net, "x", "y", tau, &[]).unwrap();
        let e = [
            rel(i.value(), blrm::mutual_information(&p, tau)),
            rel(te.value(), blrm::te_closed_form(&p, tau).unwrap().value()),
            rel(model.sigma()[(1, 1)], p.sigma_y2()),
        ];
        for k in 0..3 {
            if e[k] > worst[k] {
                worst[k] = e[k];
                eprintln!("k={k} b={b} r={} err={}", tau / t_rel, e[k]);
            }
        }
    }
    eprintln!("worst {worst:?}");
    assert!(worst.iter().all(|&w| w < 1e-9), "{worst:?}");
}
