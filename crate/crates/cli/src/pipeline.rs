//! The experiment pipeline: estimators, stability, bounds, coverage and
//! application-specific quantities, all keyed off one seed.

use hss_core::applications::{bagging, distillation, feature_map, pcr, sco};
use hss_core::bounds::{
    coverage_of, sup_gaps, theorem1_report, theorem1_sampled_coverage, theorem2_bound, BoundInputs, BoundKind, CoverageReport,
};
use hss_core::complexity::{
    dd_rademacher_exact, dd_rademacher_mc, expected_rademacher, pooled_union, transductive_rademacher_mc, union_rademacher, EstimateReport,
};
use hss_core::corpus::{BuiltFamily, FamilySpec};
use hss_core::oracle::OracleBudget;
use hss_core::sample::{draw_sample, DiscreteDistribution, LabeledSample};
use hss_core::stability::{diameters_of, stability_report, StabilityReport};
use hss_core::{HssError, HypothesisFamily, LossFunction, SeededRng, Target};
use log::info;

use crate::config::{EstimatorSpec, ExperimentConfig};
use crate::error::CliResult;
use crate::report::{NamedReport, Quantity, ReportBody};

/// Shared state of one experiment.
pub struct Context {
    pub distribution: DiscreteDistribution,
    pub loss: LossFunction,
    pub built: BuiltFamily,
    pub s: LabeledSample,
    pub t: LabeledSample,
    pub rng: SeededRng,
}

impl Context {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> CliResult<Self> {
        let rng = SeededRng::new(seed);
        let distribution = DiscreteDistribution::from_spec(&cfg.distribution)?;
        let loss = LossFunction::from(cfg.loss);
        let built = cfg.family.build(&distribution, cfg.m, cfg.delta, &loss, &rng.fork("family"))?;
        let s = draw_sample(&distribution, cfg.m, &rng.fork("s"))?;
        let t = draw_sample(&distribution, cfg.m, &rng.fork("t"))?;
        Ok(Context { distribution, loss, built, s, t, rng })
    }

    fn family(&self) -> &dyn HypothesisFamily {
        self.built.family.as_ref()
    }
}

/// Evaluates one estimator; `index` selects its random stream.
pub fn run_estimator(ctx: &Context, cfg: &ExperimentConfig, spec: &EstimatorSpec, index: usize) -> CliResult<EstimateReport> {
    let rng = ctx.rng.fork("estimators").derive(index as u64);
    let target = Target::Loss(&ctx.loss);
    let fam = ctx.family();
    info!("estimator {}", spec.name());
    Ok(match *spec {
        EstimatorSpec::DdRademacher { n_draws } => dd_rademacher_mc(fam, &ctx.s, &ctx.t, target, n_draws, &rng)?,
        EstimatorSpec::DdRademacherExact => dd_rademacher_exact(fam, &ctx.s, &ctx.t, target)?,
        EstimatorSpec::UnionRademacher { subsample_count, n_draws } => union_rademacher(fam, &ctx.s, &ctx.t, target, subsample_count, n_draws, &rng)?,
        EstimatorSpec::ExpectedRademacher { n_pairs, n_draws } => expected_rademacher(fam, &ctx.distribution, cfg.m, target, n_pairs, n_draws, &rng)?,
        EstimatorSpec::TransductiveRademacher { n, max_subsets, n_draws } => {
            let ghost = draw_sample(&ctx.distribution, n, &rng.fork("ghost"))?;
            let u = ctx.s.concat(&ghost)?;
            let (set, complete) = pooled_union(fam, &u, cfg.m, max_subsets, &rng.fork("pool"))?;
            let mut r = transductive_rademacher_mc(&set, &u, cfg.m, n, target, n_draws, &rng.fork("signs"))?;
            r.lower_bound_of_sup |= !complete;
            r
        }
    })
}

pub fn estimates(ctx: &Context, cfg: &ExperimentConfig) -> CliResult<Vec<(EstimatorSpec, EstimateReport)>> {
    cfg.estimators.iter().enumerate().map(|(i, e)| Ok((e.clone(), run_estimator(ctx, cfg, e, i)?))).collect()
}

pub fn stability(ctx: &Context, cfg: &ExperimentConfig) -> CliResult<StabilityReport> {
    info!("stability report");
    Ok(stability_report(ctx.family(), &ctx.distribution, cfg.m, &ctx.loss, &cfg.stability, &ctx.rng.fork("stability"))?)
}

/// Bound coefficients: certificates where the family has them, otherwise
/// estimates widened by three standard errors. The quantities record the
/// source of each coefficient (`exact` = certified).
pub fn bound_inputs(
    built: &BuiltFamily,
    stab: &StabilityReport,
    rad: Option<&EstimateReport>,
    trans: Option<(usize, &EstimateReport)>,
    m: usize,
    delta: f64,
) -> (BoundInputs, Vec<Quantity>) {
    let cert = built.certificates;
    let mut q = Vec::new();
    let mut pick = |name: &str, certified: Option<f64>, est: f64, se: f64| -> f64 {
        match certified {
            Some(v) => {
                q.push(Quantity::exact(name, v));
                v
            }
            None => {
                let v = est + 3.0 * se;
                q.push(Quantity::estimated(name, v, se));
                v
            }
        }
    };
    let beta = pick("beta", cert.beta, stab.beta_hat, 0.0);
    let chi = pick("chi", cert.chi(), stab.chi_hat, stab.chi_std_error);
    let chi_bar = pick("chi_bar", cert.chi(), stab.chi_bar_hat, stab.chi_bar_std_error);
    let delta_max = pick("delta_max", cert.delta_max, stab.delta_max_hat, 0.0);
    let rad = rad.map(|r| pick("rad", None, r.value, r.std_error));
    let trans_rad = trans.map(|(_, r)| pick("trans_rad", None, r.value.max(0.0), r.std_error));
    let inputs = BoundInputs {
        n: trans.map(|(n, _)| n),
        beta,
        chi: Some(chi),
        chi_bar: Some(chi_bar),
        delta_max: Some(delta_max),
        rad,
        trans_rad,
        ..BoundInputs::new(m, delta)
    };
    (inputs, q)
}

/// Coverage of each requested bound over `n_trials` fresh samples.
pub fn coverage(ctx: &Context, cfg: &ExperimentConfig, inputs: &BoundInputs) -> CliResult<Vec<CoverageReport>> {
    if cfg.n_trials == 0 {
        return Ok(Vec::new());
    }
    let budget = OracleBudget::default();
    let rng = ctx.rng.fork("coverage");
    let needs_gaps = cfg.bounds.iter().any(|k| *k != BoundKind::Theorem1);
    let gaps = if needs_gaps {
        info!("coverage: {} sup-gaps", cfg.n_trials);
        sup_gaps(ctx.family(), &ctx.distribution, &ctx.loss, cfg.m, cfg.n_trials, &rng, &budget)?
    } else {
        Vec::new()
    };
    cfg.bounds
        .iter()
        .map(|kind| match kind {
            BoundKind::Theorem1 => {
                let settings = cfg.transductive.expect("validated");
                Ok(theorem1_sampled_coverage(ctx.family(), &ctx.distribution, &ctx.loss, cfg.m, cfg.delta, &settings, cfg.n_trials, &rng.fork("theorem1"), &budget)?)
            }
            k => Ok(coverage_of(*k, k.evaluate(inputs)?, &gaps, cfg.delta)),
        })
        .collect()
}

/// Closed-form quantities attached to the application families.
pub fn application_quantities(ctx: &Context, cfg: &ExperimentConfig) -> CliResult<Vec<Quantity>> {
    let mu = ctx.loss.lipschitz();
    let m = cfg.m;
    let mut q = Vec::new();
    match &cfg.family {
        FamilySpec::Bagging(c) => {
            let (fam, t) = bagging::bagging_family(c.clone(), m, cfg.delta, &ctx.rng.fork("family"))?;
            q.push(Quantity::exact("multiplicity_bound", t));
            q.push(Quantity::exact("max_multiplicity", bagging::max_multiplicity(&fam.subsamples, m) as f64));
            q.push(Quantity::exact("stability_bound", bagging::stability_bound(c.k, c.p, m, cfg.delta, c.cap_c, mu, c.beta_a)));
            q.push(Quantity::exact("realized_stability", fam.realized_stability(mu)));
            q.push(Quantity::exact("rademacher_envelope", bagging::rademacher_envelope(mu, c.p, m)));
            q.push(Quantity::exact("gap_bound", bagging::bagging_gap_bound(c.k, c.p, m, cfg.delta, c.cap_c, mu, c.beta_a)));
            let seeds = cfg.application.multiplicity_seeds;
            if seeds > 0 {
                let (rate, _) = bagging::multiplicity_coverage(c.k, c.p, m, cfg.delta, seeds, &ctx.rng.fork("multiplicity"));
                q.push(Quantity::estimated("multiplicity_coverage", rate, (rate * (1.0 - rate) / seeds as f64).sqrt()));
            }
        }
        FamilySpec::Sco(c) => {
            let r = c.radius_for(m);
            q.push(Quantity::exact("radius", r));
            q.push(Quantity::exact("diameter_certificate", sco::diameter_certificate(mu, r, c.weight_norm_cap)));
            let dm = diameters_of(&ctx.family().hypothesis_set(&ctx.s)?, &ctx.s, &ctx.loss)?;
            q.push(Quantity { name: "measured_diameter".into(), value: dm.delta, std_error: None, exact: dm.exact });
        }
        FamilySpec::Distillation(c) => {
            let range = ctx.distribution.support().iter().map(|z| z.y).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
            if let Some(beta) = c.teacher.sensitivity(m, range.1 - range.0) {
                q.push(Quantity::exact("stability_certificate", distillation::stability_certificate(mu, beta)));
                if let Some(anti) = c.anti {
                    q.push(Quantity::exact("anti_leading_term", distillation::anti_distillation_leading_term(mu, anti, beta)));
                }
            }
        }
        FamilySpec::FeatureMap(c) => {
            let fam = feature_map::feature_map_family(c.clone())?;
            q.push(Quantity::exact("beta_certificate", fam.beta_certificate(mu)));
            let probes: Vec<Vec<f64>> = ctx.distribution.support().iter().map(|z| z.x.clone()).collect();
            let measured = fam.spot_check_sensitivity(&ctx.s, &ctx.distribution, &probes, 50, &ctx.rng.fork("sensitivity"))?;
            q.push(Quantity { name: "measured_sensitivity".into(), value: measured, std_error: None, exact: false });
        }
        FamilySpec::Pcr(c) => {
            q.push(Quantity::exact("rademacher_certificate", pcr::rademacher_certificate(c.norm_cap_gamma, c.feature_radius_r, m)));
            let proj = pcr::principal_projector(&ctx.s, c.k_components, c.eigengap_lambda)?;
            q.push(Quantity::exact("eigengap", proj.eigengap));
        }
        FamilySpec::Constants { .. } | FamilySpec::LabelMean | FamilySpec::TopErm { .. } => {}
    }
    Ok(q)
}

/// Runs every stage and returns the reports grouped by output file stem.
pub fn run_experiment_reports(cfg: &ExperimentConfig, seed: u64) -> CliResult<Vec<(&'static str, Vec<NamedReport>)>> {
    let ctx = Context::new(cfg, seed)?;
    let est = estimates(&ctx, cfg)?;
    let stab = stability(&ctx, cfg)?;
    let rad = est.iter().find(|(e, _)| matches!(e, EstimatorSpec::ExpectedRademacher { .. })).map(|(_, r)| r);
    let trans = est.iter().find_map(|(e, r)| match e {
        EstimatorSpec::TransductiveRademacher { n, .. } => Some((*n, r)),
        _ => None,
    });
    let (inputs, coefficients) = bound_inputs(&ctx.built, &stab, rad, trans, cfg.m, cfg.delta);
    let mut bounds = vec![NamedReport::new("coefficients", ReportBody::Quantities(coefficients))];
    match theorem2_bound(&inputs) {
        Ok(r) => bounds.push(NamedReport::new("theorem2", ReportBody::Bound(r))),
        Err(HssError::InvalidParameter(msg)) => log::warn!("theorem2 skipped: {msg}"),
        Err(e) => return Err(e.into()),
    }
    if inputs.trans_rad.is_some() {
        bounds.push(NamedReport::new("theorem1", ReportBody::Bound(theorem1_report(&inputs)?)));
    }
    let cov = coverage(&ctx, cfg, &inputs)?;
    let app = application_quantities(&ctx, cfg)?;
    Ok(vec![
        ("estimates", est.into_iter().map(|(e, r)| NamedReport::new(e.name(), ReportBody::Estimate(r))).collect()),
        ("stability", vec![NamedReport::new("stability", ReportBody::Stability(stab))]),
        ("bounds", bounds),
        (
            "coverage",
            cov.into_iter()
                .map(|c| NamedReport::new(serde_json::to_value(c.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(), ReportBody::Coverage(c)))
                .collect(),
        ),
        ("application", if app.is_empty() { Vec::new() } else { vec![NamedReport::new(cfg.family.name(), ReportBody::Quantities(app))] }),
    ])
}
