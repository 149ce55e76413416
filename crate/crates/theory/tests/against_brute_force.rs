use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wrcast_theory::{
    constrained_optimal_weights, improves, optimal_weight_n2, run_theory_suite, sample_optimal_weights, verdict_n2,
    SuiteConfig, TheoryInstance, TheoryReport,
};

fn fit(w: &[f64], l_hat: &[f64]) -> f64 {
    w.iter().zip(l_hat).map(|(a, b)| a * b).sum()
}

#[test]
fn suite_passes_and_serializes() {
    let cfg = SuiteConfig {
        random_instances: 2000,
        mc_trials: 1000,
        ..SuiteConfig::default()
    };
    let rep = run_theory_suite(&cfg).unwrap();
    for c in &rep.checks {
        assert!(c.passed, "{}: {}", c.name, c.detail);
    }
    assert_eq!(rep.conjecture.len(), cfg.mc_alphas.len());
    assert_eq!(rep.conjecture[0].p_all_improve, 0.0);
    let text = serde_json::to_string(&rep).unwrap();
    let back: TheoryReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back.checks.len(), rep.checks.len());
    assert!(back.cells.is_empty(), "region cells are not serialized");
}

#[test]
fn three_components_match_a_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let l_hat: Vec<f64> = (0..3).map(|_| rng.gen_range(0.5..10.0)).collect();
        let y = rng.gen_range(0.0..40.0);
        let alpha = rng.gen_range(0.1..3.0);
        let (lo, hi) = (1.0 - alpha / 3.0, 1.0 - alpha / 3.0 + alpha);
        let w = constrained_optimal_weights(y, &l_hat, alpha).unwrap();
        assert!((w.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert!(w.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        let best = (y - fit(&w, &l_hat)).abs();

        let steps = 300;
        let mut grid_best = f64::INFINITY;
        for a in 0..=steps {
            for b in 0..=steps {
                let w1 = lo + (hi - lo) * a as f64 / steps as f64;
                let w2 = lo + (hi - lo) * b as f64 / steps as f64;
                let w3 = 3.0 - w1 - w2;
                if w3 < lo || w3 > hi {
                    continue;
                }
                grid_best = grid_best.min((y - fit(&[w1, w2, w3], &l_hat)).abs());
            }
        }
        assert!(best <= grid_best + 1e-9, "closed form {best}, grid {grid_best}");

        let s = sample_optimal_weights(y, &l_hat, alpha, &mut rng, 20).unwrap();
        assert!((fit(&s, &l_hat) - fit(&w, &l_hat)).abs() < 1e-9);
        assert!(s.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
    }
}

#[test]
fn two_component_optimum_is_exact_and_verdicts_are_direct() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        let l: Vec<f64> = (0..2).map(|_| rng.gen_range(1.0..10.0)).collect();
        let l_hat: Vec<f64> = l.iter().map(|v| (v + rng.gen_range(-3.0..3.0)).max(0.1)).collect();
        if (l_hat[0] - l_hat[1]).abs() < 1e-6 {
            continue;
        }
        let inst = TheoryInstance::exact(l.clone(), l_hat.clone()).unwrap();
        let w = optimal_weight_n2(inst.y, l_hat[0], l_hat[1]).unwrap();
        assert!((w * l_hat[0] + (2.0 - w) * l_hat[1] - inst.y).abs() < 1e-9 * inst.y.abs().max(1.0));
        let v = verdict_n2(&inst).unwrap();
        assert_eq!(v.improved[0], improves(l[0], l_hat[0], w));
        assert_eq!(v.improved[1], improves(l[1], l_hat[1], 2.0 - w));
    }
    let neg = TheoryInstance::exact(vec![3.0, 2.0], vec![-1.0, 2.0]).unwrap();
    assert!(verdict_n2(&neg).is_err());
}
