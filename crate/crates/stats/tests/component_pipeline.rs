use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wrcast_stats::causal::{dml_fit, promotion_component, DmlConfig, DmlRow, PricePoint};
use wrcast_stats::classical::{forecast_method, Method, MethodConfig};
use wrcast_stats::fforma::{default_meta_config, fforma_train, MetaLearner};
use wrcast_stats::stl::{stl_decompose, StlConfig};

fn weekly(n: usize, level: f64, slope: f64, amp: f64, noise: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let shape = [0.0, 1.0, 0.5, -0.3, -1.0, -0.7, 0.5];
    let e = Normal::new(0.0, noise.max(1e-12)).unwrap();
    (0..n)
        .map(|t| level + slope * t as f64 + amp * shape[t % 7] + if noise > 0.0 { e.sample(rng) } else { 0.0 })
        .collect()
}

#[test]
fn stl_forecast_continues_trend_and_season() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let full = weekly(154, 50.0, 0.2, 8.0, 0.0, &mut rng);
    let (train, test) = full.split_at(140);
    let fit = stl_decompose(train, &StlConfig::new(7).unwrap()).unwrap();
    for i in 0..train.len() {
        let sum = fit.trend[i] + fit.seasonal[i] + fit.remainder[i];
        assert!((sum - train[i]).abs() < 1e-9);
    }
    let fc = fit.forecast(14);
    let worst = fc.iter().zip(test).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 0.5, "max error {worst}");
    assert!(fit.seasonal_strength() > 0.9);
}

#[test]
fn meta_learner_combines_every_method() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let histories: Vec<Vec<f64>> = (0..24)
        .map(|k| {
            let amp = if k % 2 == 0 { 10.0 } else { 0.5 };
            weekly(120, 40.0 + k as f64, 0.05 * (k % 3) as f64, amp, 1.0, &mut rng)
        })
        .collect();
    let cfg = MethodConfig::default();
    for m in Method::ALL {
        let f = forecast_method(m, &histories[0], 7, &cfg).unwrap();
        assert_eq!(f.len(), 7);
        assert!(f.iter().all(|v| v.is_finite()), "{}", m.name());
    }
    let learner = fforma_train(&histories, 7, &Method::ALL, &cfg, &default_meta_config()).unwrap();
    let w = learner.weights(&histories[3]).unwrap();
    assert_eq!(w.len(), 4);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(w.iter().all(|&x| x > 0.0));

    let pred = learner.predict(&histories[3], 7).unwrap();
    let restored = MetaLearner::from_json(&learner.to_json().unwrap()).unwrap();
    assert_eq!(pred, restored.predict(&histories[3], 7).unwrap());
    // a convex combination stays inside the envelope of the candidates
    for h in 0..7 {
        let cands: Vec<f64> = Method::ALL
            .iter()
            .map(|&m| forecast_method(m, &histories[3], 7, &cfg).unwrap()[h])
            .collect();
        let lo = cands.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = cands.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(pred[h] >= lo - 1e-9 && pred[h] <= hi + 1e-9);
    }
}

#[test]
fn confounded_elasticities_feed_the_promotion_component() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth = [-2.0, -0.8];
    let e = Normal::new(0.0, 0.05).unwrap();
    let rows: Vec<DmlRow> = (0..1200)
        .map(|i| {
            let x = i % 2;
            let demand: f64 = rng.gen_range(-1.0..1.0);
            // high demand pushes prices up, so naive regression is biased
            let log_p = 2.0 + 0.3 * demand + 0.15 * e.sample(&mut rng) / 0.05;
            let log_s = 5.0 + 1.5 * demand + truth[x] * (log_p - 2.0) + e.sample(&mut rng);
            DmlRow::from_levels(log_s.exp() - 1.0, log_p.exp(), x, vec![demand]).unwrap()
        })
        .collect();
    let model = dml_fit(&rows, 2, &DmlConfig::default()).unwrap();
    for x in 0..2 {
        let th = model.theta_for(x);
        assert!((th - truth[x]).abs() < 0.25, "category {x}: {th}");
    }

    let baseline = [100.0, 100.0, 80.0];
    let plan = [
        PricePoint { price: 10.0, reference_price: 10.0, promo: None },
        PricePoint { price: 8.0, reference_price: 10.0, promo: Some(0) },
        PricePoint { price: 9.0, reference_price: 10.0, promo: Some(1) },
    ];
    let up = promotion_component(&model, &baseline, &plan).unwrap();
    assert_eq!(up[0], 0.0);
    assert!((up[1] - 100.0 * (0.8f64.powf(model.theta_for(0)) - 1.0)).abs() < 1e-9);
    assert!((up[2] - 80.0 * (0.9f64.powf(model.theta_for(1)) - 1.0)).abs() < 1e-9);
    assert!(up[1] > up[2] && up[2] > 0.0);
}
