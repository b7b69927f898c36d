use super::*;
use crate::cohort::PatientCase;
use crate::dataset::VariableSpec;

fn single_covariate(times: &[f64], events: &[bool], x: &[f64]) -> SurvivalDataset {
    let cases = times
        .iter()
        .zip(events)
        .zip(x)
        .enumerate()
        .map(|(i, ((t, e), x))| {
            let mut cov = BTreeMap::new();
            cov.insert("x".to_string(), Value::Real(*x));
            PatientCase::new(format!("p{i}"), *t, *e, cov)
        })
        .collect();
    SurvivalDataset::new(cases, vec![VariableSpec::continuous("x")])
}

fn x() -> Vec<String> {
    vec!["x".to_string()]
}

#[test]
fn null_likelihood_is_log_risk_set_sizes() {
    let d = single_covariate(&[1.0, 2.0, 3.0, 4.0, 5.0], &[true, false, true, true, false], &[0.3, 1.0, -2.0, 0.5, 4.0]);
    let ll = partial_log_likelihood(&[0.0], &d, &x(), Ties::Efron).unwrap();
    let expected = -(5.0f64.ln() + 3.0f64.ln() + 2.0f64.ln());
    assert!((ll - expected).abs() < 1e-12);
}

#[test]
fn constant_covariate_is_flat() {
    let d = single_covariate(&[1.0, 2.0, 3.0, 4.0], &[true, true, false, true], &[2.0; 4]);
    let base = partial_log_likelihood(&[0.0], &d, &x(), Ties::Efron).unwrap();
    for b in [-3.0, -0.5, 0.7, 5.0] {
        let ll = partial_log_likelihood(&[b], &d, &x(), Ties::Efron).unwrap();
        assert!((ll - base).abs() < 1e-12, "beta={b}");
    }
}

#[test]
fn four_subject_hand_expansion() {
    let d = single_covariate(&[1.0, 2.0, 3.0, 4.0], &[true; 4], &[1.0, 1.0, 0.0, 0.0]);
    let b: f64 = 0.5;
    let e = b.exp();
    let expected = (b - (2.0 * e + 2.0).ln()) + (b - (e + 2.0).ln()) + (0.0 - 2.0f64.ln()) + (0.0 - 1.0f64.ln());
    for ties in [Ties::Efron, Ties::Breslow] {
        let ll = partial_log_likelihood(&[b], &d, &x(), ties).unwrap();
        assert!((ll - expected).abs() < 1e-12);
    }
}

#[test]
fn efron_and_breslow_on_ties() {
    let d = single_covariate(&[1.0, 1.0, 2.0], &[true, true, true], &[1.0, 0.0, 0.0]);
    let b: f64 = 0.8;
    let e = b.exp();
    let s0 = e + 2.0;
    let d0 = e + 1.0;
    let efron = b - s0.ln() - (s0 - d0 / 2.0).ln();
    let breslow = b - 2.0 * s0.ln();
    assert!((partial_log_likelihood(&[b], &d, &x(), Ties::Efron).unwrap() - efron).abs() < 1e-12);
    assert!((partial_log_likelihood(&[b], &d, &x(), Ties::Breslow).unwrap() - breslow).abs() < 1e-12);
}

#[test]
fn rejects_bad_beta() {
    let d = single_covariate(&[1.0, 2.0], &[true, true], &[0.0, 1.0]);
    assert_eq!(partial_log_likelihood(&[f64::NAN], &d, &x(), Ties::Efron), Err(CoxError::NonFiniteBeta));
    assert!(matches!(
        partial_log_likelihood(&[0.0, 1.0], &d, &x(), Ties::Efron),
        Err(CoxError::DimensionMismatch { .. })
    ));
}

#[test]
fn gradient_and_hessian_match_finite_differences() {
    let times = [5.0, 3.0, 3.0, 8.0, 1.0, 9.0, 4.0, 4.0, 7.0];
    let events = [true, true, true, false, true, true, false, true, true];
    let rows: Vec<Vec<f64>> = (0..9).map(|i| vec![(i as f64 * 0.37).sin(), (i % 3) as f64]).collect();
    let problem = CoxProblem::new(times.to_vec(), events.to_vec(), rows);
    let beta = [0.4, -0.3];
    let h = 1e-5;
    for ties in [Ties::Efron, Ties::Breslow] {
        let d = problem.derivatives(&beta, ties);
        for a in 0..2 {
            let mut up = beta;
            let mut dn = beta;
            up[a] += h;
            dn[a] -= h;
            let fd = (problem.log_likelihood(&up, ties) - problem.log_likelihood(&dn, ties)) / (2.0 * h);
            assert!((fd - d.gradient[a]).abs() <= 1e-4 * d.gradient[a].abs().max(1e-3));
            let gd = (problem.derivatives(&up, ties).gradient[0] - problem.derivatives(&dn, ties).gradient[0]) / (2.0 * h);
            assert!((gd - d.hessian[a * 2]).abs() <= 1e-4 * d.hessian[a * 2].abs().max(1e-3));
        }
    }
}

#[test]
fn fit_small_fixture() {
    let d = single_covariate(
        &[2.0, 4.0, 5.0, 7.0, 9.0, 11.0, 12.0, 15.0],
        &[true, true, false, true, true, false, true, true],
        &[1.5, 0.2, 1.0, 0.9, -0.4, 0.3, -1.0, -0.2],
    );
    let fit = fit_cox(&d, &x(), &CoxConfig::default()).unwrap();
    assert!(fit.converged);
    let problem = CoxProblem::new(d.times(), d.events(), d.design(&x()).unwrap().rows);
    let g = problem.derivatives(&fit.coefficients, Ties::Efron).gradient;
    assert!(g[0].abs() < 1e-6);
    for w in fit.log_likelihood_trace.windows(2) {
        assert!(w[1] >= w[0]);
    }
    let rr = &fit.risk_ratios[0];
    assert!(rr.ci_low < rr.rr && rr.rr < rr.ci_high);
    assert!((fit.global_chi_square - 2.0 * (fit.log_likelihood_fit - fit.log_likelihood_null)).abs() < 1e-12);
}

#[test]
fn collinear_columns_are_singular() {
    let cases = (0..6)
        .map(|i| {
            let mut cov = BTreeMap::new();
            cov.insert("a".to_string(), Value::Real(i as f64));
            cov.insert("b".to_string(), Value::Real(2.0 * i as f64));
            PatientCase::new(format!("p{i}"), 1.0 + i as f64, i % 2 == 0, cov)
        })
        .collect();
    let d = SurvivalDataset::new(cases, vec![VariableSpec::continuous("a"), VariableSpec::continuous("b")]);
    assert_eq!(fit_cox(&d, &["a".into(), "b".into()], &CoxConfig::default()), Err(CoxError::SingularHessian));
}

#[test]
fn separation_is_flagged() {
    // every high-x subject fails before every low-x subject
    let d = single_covariate(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[true; 6], &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    let cfg = CoxConfig { max_iter: 200, ..CoxConfig::default() };
    assert!(matches!(fit_cox(&d, &x(), &cfg), Err(CoxError::MonotoneLikelihood { .. })));
}

#[test]
fn no_events() {
    let d = single_covariate(&[1.0, 2.0], &[false, false], &[0.0, 1.0]);
    assert_eq!(fit_cox(&d, &x(), &CoxConfig::default()), Err(CoxError::NoEvents));
}

#[test]
fn relative_risk_of_rows() {
    let cases = (0..40)
        .map(|i| {
            let mut cov = BTreeMap::new();
            cov.insert("smoking".to_string(), Value::level(if i % 2 == 0 { "Never" } else { "Used" }));
            cov.insert("count".to_string(), Value::Real((i % 5) as f64));
            PatientCase::new(format!("p{i}"), 10.0 + ((i * 7) % 23) as f64, i % 3 != 0, cov)
        })
        .collect();
    let d = SurvivalDataset::new(
        cases,
        vec![VariableSpec::factor("smoking", ["Never", "Used"]), VariableSpec::continuous("count")],
    );
    let mut fit = fit_cox(&d, &["smoking".into(), "count".into()], &CoxConfig::default()).unwrap();
    assert_eq!(fit.columns, vec!["smoking=Used", "count"]);

    let row = |s: &str, c: f64| {
        let mut r = BTreeMap::new();
        r.insert("smoking".to_string(), Value::level(s));
        r.insert("count".to_string(), Value::Real(c));
        r
    };
    assert_eq!(predict_relative_risk(&fit, &row("Never", 0.0)).unwrap(), 1.0);
    let ratio = predict_relative_risk(&fit, &row("Used", 3.0)).unwrap() / predict_relative_risk(&fit, &row("Used", 2.0)).unwrap();
    assert!((ratio - fit.coefficients[1].exp()).abs() < 1e-12);

    fit.coefficients[0] = 1.2f64.ln();
    assert!((predict_relative_risk(&fit, &row("Used", 0.0)).unwrap() - 1.2).abs() < 1e-12);

    let mut missing = row("Used", 1.0);
    missing.remove("count");
    assert_eq!(predict_relative_risk(&fit, &missing), Err(CoxError::MissingCovariate("count".into())));
}
