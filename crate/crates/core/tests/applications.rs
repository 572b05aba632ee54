use hss_core::applications::bagging::multiplicity_coverage;
use hss_core::applications::distillation::{distillation_family, DistillConfig, StudentGrid, Teacher};
use hss_core::applications::feature_map::{feature_map_family, FeatureMapConfig, FeatureMapKind};
use hss_core::applications::pcr::{principal_projector, projector_invariants};
use hss_core::applications::sco::{diameter_certificate, sco_mixture_family, ScoMixConfig};
use hss_core::corpus::{reference_distribution, reference_instances};
use hss_core::error::HssError;
use hss_core::sample::{draw_sample, DiscreteDistribution};
use hss_core::stability::{diameters_of, estimate_beta_exact};
use hss_core::{HypothesisFamily, LabeledPoint, LossFunction, SeededRng};

fn disk() -> DiscreteDistribution {
    let pts = (0..24)
        .map(|i| {
            let a = i as f64 * std::f64::consts::TAU / 24.0;
            let r = 0.4 + 0.6 * ((i % 4) as f64 / 3.0);
            LabeledPoint::new(vec![r * a.cos(), r * a.sin()], 0.5 * r * a.cos() + 0.1 * (i % 3) as f64)
        })
        .collect();
    DiscreteDistribution::uniform(pts).unwrap()
}

#[test]
fn certified_beta_dominates_exhaustive_estimate() {
    let d = reference_distribution();
    let loss = LossFunction::absolute();
    for inst in reference_instances() {
        let built = inst.family.build(&d, 10, 0.1, &loss, &SeededRng::new(1)).unwrap();
        let Some(beta) = built.certificates.beta else { continue };
        for seed in 0..5 {
            let s = draw_sample(&d, 10, &SeededRng::new(seed)).unwrap();
            let est = estimate_beta_exact(built.family.as_ref(), &s, &d, &loss).unwrap();
            assert!(est.value <= beta + 1e-12, "{}: {} > {beta}", inst.label, est.value);
        }
    }
}

#[test]
fn sco_diameter_within_certificate() {
    let d = disk();
    let m = 100;
    let cfg = ScoMixConfig { k_algorithms: 5, alpha0: None, radius: None, weight_norm_cap: 1.0, sgd_steps: 300, strong_convexity: 0.5, mu: 1.0, step_scale: 1.0 };
    let cert = diameter_certificate(1.0, cfg.radius_for(m), 1.0);
    assert!((cert - 0.1).abs() < 1e-15);
    let fam = sco_mixture_family(cfg, &SeededRng::new(2)).unwrap();
    for seed in 0..40 {
        let s = draw_sample(&d, m, &SeededRng::new(seed)).unwrap();
        let dm = diameters_of(&fam.hypothesis_set(&s).unwrap(), &s, &LossFunction::absolute()).unwrap();
        assert!(dm.exact && dm.delta <= cert + 1e-12, "{dm:?}");
    }
}

#[test]
fn distillation_members_pass_filter() {
    let probes: Vec<Vec<f64>> = (0..9).map(|i| vec![-1.0 + i as f64 * 0.25, 0.2]).collect();
    let cfg = DistillConfig {
        teacher: Teacher::KernelRidge { bandwidth: 0.5, lambda: 0.1 },
        gamma: 0.3,
        student_grid: StudentGrid::Linear { weights: (0..21).map(|i| vec![-0.5 + i as f64 * 0.05, 0.0, 0.0]).collect() },
        anti: None,
        probes: probes.clone(),
    };
    let fam = distillation_family(cfg).unwrap();
    let d = disk();
    let mut nonempty = 0;
    for seed in 0..10 {
        let s = draw_sample(&d, 20, &SeededRng::new(seed)).unwrap();
        match fam.ball(&s) {
            Ok(ball) => {
                nonempty += 1;
                for h in ball.members() {
                    assert!(probes.iter().all(|x| (h.predict(x) - ball.center.predict(x)).abs() <= 0.3 + 1e-12));
                }
            }
            Err(HssError::EmptyHypothesisSet) => {}
            Err(e) => panic!("{e}"),
        }
    }
    assert!(nonempty > 0);
}

#[test]
fn pca_projector_invariants_and_sensitivity_check() {
    let d = disk();
    let s = draw_sample(&d, 50, &SeededRng::new(3)).unwrap();
    let proj = principal_projector(&s, 1, 1e-6).unwrap();
    assert!(projector_invariants(&proj.matrix, 1, 1e-9));
    let heads = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let probes: Vec<Vec<f64>> = d.support().iter().map(|z| z.x.clone()).collect();
    let loose = feature_map_family(FeatureMapConfig { map_kind: FeatureMapKind::TopKPca { k: 1, min_gap: 1e-6 }, sensitivity_delta: 2.0, heads: heads.clone(), gamma: 1.0 }).unwrap();
    assert!(loose.spot_check_sensitivity(&s, &d, &probes, 50, &SeededRng::new(4)).is_ok());
    let tight = feature_map_family(FeatureMapConfig { map_kind: FeatureMapKind::TopKPca { k: 1, min_gap: 1e-6 }, sensitivity_delta: 1e-9, heads, gamma: 1.0 }).unwrap();
    assert!(matches!(tight.spot_check_sensitivity(&s, &d, &probes, 50, &SeededRng::new(4)), Err(HssError::SensitivityViolation { .. })));
}

#[test]
fn bagging_multiplicity_coverage() {
    let delta = 0.01;
    let n = 2000;
    let (rate, t) = multiplicity_coverage(100, 10, 100, delta, n, &SeededRng::new(5));
    assert!((t - 23.572).abs() < 1e-3);
    assert!(rate >= 1.0 - delta - 3.0 * (delta * (1.0 - delta) / n as f64).sqrt(), "{rate}");
}
