use proptest::prelude::*;
use treecorr::datagen::{gen_pair, GenConfig, RngStream};
use treecorr::ellipse::{mu_star, Alpha, EpsilonSchedule};
use treecorr::estimation::{
    delta_theta_hat, mle_per_generation, normalize_increments, pearson, prepare_increments,
    sign_flip_if_negative, td_delta_theta, NormalizationConfig,
};
use treecorr::tree::IncrementsByGeneration;

fn arb_increments() -> impl Strategy<Value = IncrementsByGeneration> {
    proptest::collection::vec(
        proptest::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 2..40),
        1..8,
    )
    .prop_map(|generations| IncrementsByGeneration { generations })
}

fn mean_sd(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    let var = v.map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn arb_cfg() -> impl Strategy<Value = NormalizationConfig> {
    (0.01f64..10.0, 0.1f64..5.0, 0.01f64..0.3, any::<bool>()).prop_map(|(tau, sigma2, a, exact)| {
        NormalizationConfig {
            alpha: Alpha::new(a).unwrap(),
            tau,
            sigma2,
            schedule: if exact {
                EpsilonSchedule::Exact {
                    damping: treecorr::datagen::Damping::Exponential,
                    rho: 0.5,
                }
            } else {
                EpsilonSchedule::Harmonic
            },
            ..NormalizationConfig::default()
        }
    })
}

proptest! {
    #[test]
    fn every_generation_hits_its_target(inc in arb_increments(), cfg in arb_cfg()) {
        let moments = mle_per_generation(&inc).unwrap();
        prop_assume!(moments.generations.iter().all(|m| m.sd_x > 1e-6 && m.sd_y > 1e-6));
        let out = normalize_increments(&inc, &moments, &cfg).unwrap();
        for (g, s) in out.generations.iter().enumerate() {
            let target = mu_star(g as u32 + 1, cfg.tau, cfg.sigma2, cfg.alpha, &cfg.schedule).unwrap();
            let (mx, sx) = mean_sd(s.iter().map(|p| p.0));
            let (my, sy) = mean_sd(s.iter().map(|p| p.1));
            let tol = 1e-9 * (1.0 + target);
            prop_assert!((mx - target).abs() < tol && (my - target).abs() < tol);
            prop_assert!((sx - cfg.sigma2.sqrt()).abs() < 1e-9 && (sy - cfg.sigma2.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn normalization_keeps_each_generation_correlation(inc in arb_increments(), cfg in arb_cfg()) {
        let moments = mle_per_generation(&inc).unwrap();
        prop_assume!(moments.generations.iter().all(|m| m.sd_x > 1e-6 && m.sd_y > 1e-6));
        let out = normalize_increments(&inc, &moments, &cfg).unwrap();
        for (a, b) in inc.generations.iter().zip(&out.generations) {
            prop_assert!((pearson(a).unwrap() - pearson(b).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn sign_flip_leaves_a_non_negative_correlation(inc in arb_increments()) {
        let pooled: Vec<_> = inc.pooled().collect();
        prop_assume!(pearson(&pooled).is_ok());
        let (once, flipped) = sign_flip_if_negative(&inc).unwrap();
        prop_assert!(pearson(&once.pooled().collect::<Vec<_>>()).unwrap() >= 0.0);
        let (twice, again) = sign_flip_if_negative(&once).unwrap();
        prop_assert!(!again || pearson(&pooled).unwrap() == 0.0);
        prop_assert_eq!(&twice, &once);
        if flipped {
            let back = once.map(|_, (x, y)| (-x, y));
            prop_assert_eq!(back, inc);
        }
    }
}

#[test]
fn two_point_generation() {
    let inc = IncrementsByGeneration {
        generations: vec![vec![(0.0, 0.0), (2.0, 2.0)]],
    };
    let cfg = NormalizationConfig::default();
    let out = normalize_increments(&inc, &mle_per_generation(&inc).unwrap(), &cfg).unwrap();
    let (mx, sx) = mean_sd(out.generations[0].iter().map(|p| p.0));
    assert!((mx - 2.468090).abs() < 1e-6);
    assert!((sx - 1.0).abs() < 1e-12);
    assert_eq!(out.generations[0][0].0, out.generations[0][0].1);
}

#[test]
fn single_root_generation_is_skipped() {
    let cfg = GenConfig {
        depth: 5,
        branching: 2,
        ..GenConfig::default()
    };
    let data = gen_pair(&cfg, &mut RngStream::new(3, 0)).unwrap();
    let est = td_delta_theta(&data, &NormalizationConfig::default()).unwrap();
    assert_eq!(est.skipped_generations, vec![1]);
    assert_eq!(est.angle.n, cfg.node_count() - 1);

    let strict = NormalizationConfig {
        skip_unfittable: false,
        ..NormalizationConfig::default()
    };
    assert!(td_delta_theta(&data, &strict).is_err());
}

#[test]
fn raw_pipeline_uses_every_increment() {
    let cfg = GenConfig {
        depth: 5,
        branching: 2,
        rho: 0.6,
        ..GenConfig::default()
    };
    let data = gen_pair(&cfg, &mut RngStream::new(9, 1)).unwrap();
    let raw = NormalizationConfig {
        normalize: false,
        ..NormalizationConfig::default()
    };
    let est = td_delta_theta(&data, &raw).unwrap();
    let pooled: Vec<_> = data.extract_increments().unwrap().pooled().collect();
    let direct = delta_theta_hat(&pooled, raw.alpha, (0.0, 0.0)).unwrap();
    assert_eq!(est.angle, direct);
    assert!(est.skipped_generations.is_empty());
    let prepared = prepare_increments(&data, &raw).unwrap();
    assert_eq!(prepared.points, pooled);
    assert!(!prepared.flipped);
}

#[test]
fn invalid_settings_are_rejected() {
    let inc = IncrementsByGeneration {
        generations: vec![vec![(0.0, 1.0), (2.0, 2.0)]],
    };
    let m = mle_per_generation(&inc).unwrap();
    for bad in [
        NormalizationConfig {
            tau: 0.0,
            ..NormalizationConfig::default()
        },
        NormalizationConfig {
            sigma2: -1.0,
            ..NormalizationConfig::default()
        },
    ] {
        assert!(normalize_increments(&inc, &m, &bad).is_err());
    }
    let constant = IncrementsByGeneration {
        generations: vec![vec![(1.0, 1.0), (1.0, 2.0)]],
    };
    let mc = mle_per_generation(&constant).unwrap();
    assert!(normalize_increments(&constant, &mc, &NormalizationConfig::default()).is_err());
    let single = IncrementsByGeneration {
        generations: vec![vec![(1.0, 1.0)]],
    };
    assert!(mle_per_generation(&single).is_err());
}
