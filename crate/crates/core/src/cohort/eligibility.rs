use super::{
    baseline_covariates, CohortConfig, CohortError, Exclusion, ExclusionReason, PatientCase,
    PatientHistory, Visit,
};

/// Drops every visit that falls within `faulty_gap_days` of the previous
/// retained visit (poor preparation; the later visit of the pair goes).
pub fn clean_visits(visits: &[Visit], faulty_gap_days: i64) -> Vec<Visit> {
    let mut kept: Vec<Visit> = Vec::with_capacity(visits.len());
    for v in visits {
        match kept.last() {
            Some(prev) if (v.date - prev.date).num_days() < faulty_gap_days => {}
            _ => kept.push(v.clone()),
        }
    }
    kept
}

/// Cleaned visits from baseline onward, or the first violated rule.
fn eligible_visits(history: &PatientHistory, config: &CohortConfig) -> Result<Vec<Visit>, ExclusionReason> {
    let cleaned = clean_visits(history.visits(), config.faulty_gap_days);
    let baseline = cleaned
        .iter()
        .position(|v| v.summary.has_polyps())
        .ok_or(ExclusionReason::NoPolyp)?;
    if history.colitis_or_crohns {
        return Err(ExclusionReason::ColitisOrCrohns);
    }
    let from_baseline = cleaned[baseline..].to_vec();
    if from_baseline.len() < 2 {
        return Err(ExclusionReason::TooFewVisits);
    }
    let start = from_baseline[0].date;
    if !from_baseline
        .iter()
        .any(|v| (v.date - start).num_days() >= config.min_separation_days)
    {
        return Err(ExclusionReason::InsufficientSeparation);
    }
    Ok(from_baseline)
}

/// Splits histories into eligible ones (faulty visits removed) and
/// exclusions carrying the first violated rule.
pub fn filter_eligible(
    histories: Vec<PatientHistory>,
    config: &CohortConfig,
) -> (Vec<PatientHistory>, Vec<Exclusion>) {
    let mut eligible = Vec::new();
    let mut excluded = Vec::new();
    for history in histories {
        match eligible_visits(&history, config) {
            Ok(_) => {
                let cleaned = clean_visits(history.visits(), config.faulty_gap_days);
                // cleaning keeps order, so this cannot fail
                eligible.push(history.with_visits(cleaned).expect("cleaned visits stay ordered"));
            }
            Err(reason) => excluded.push(Exclusion { patient_id: history.patient_id, reason }),
        }
    }
    (eligible, excluded)
}

/// Pairs the baseline (first polyp) visit with the first recurrence at least
/// `min_separation_days` later, or with the last visit when none recurs.
pub fn pair_baseline_outcome(history: &PatientHistory, config: &CohortConfig) -> Result<PatientCase, CohortError> {
    let visits = eligible_visits(history, config).map_err(|reason| CohortError::Ineligible {
        patient_id: history.patient_id.clone(),
        reason,
    })?;
    let baseline = &visits[0];
    let days = |v: &Visit| (v.date - baseline.date).num_days();
    let recurrence = visits[1..]
        .iter()
        .find(|v| days(v) >= config.min_separation_days && v.summary.has_polyps());
    let (outcome, event) = match recurrence {
        Some(v) => (v, true),
        None => (visits.last().unwrap(), false),
    };
    let covariates = baseline_covariates(&history.demographics, &baseline.summary, &config.sides);
    Ok(PatientCase::new(history.patient_id.clone(), days(outcome) as f64, event, covariates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::Demographics;
    use crate::parser::VisitSummary;
    use chrono::{Days, NaiveDate};

    fn visit(day: u64, polyps: u32) -> Visit {
        let start = NaiveDate::from_ymd_opt(2012, 1, 1).unwrap();
        Visit {
            date: start.checked_add_days(Days::new(day)).unwrap(),
            summary: VisitSummary { polyp_count: polyps, ..Default::default() },
        }
    }

    fn history(visits: Vec<Visit>, colitis: bool) -> PatientHistory {
        PatientHistory::new("p", Demographics::default(), visits, colitis).unwrap()
    }

    fn reason(h: PatientHistory) -> Option<ExclusionReason> {
        let (_, ex) = filter_eligible(vec![h], &CohortConfig::default());
        ex.first().map(|e| e.reason)
    }

    #[test]
    fn single_visit_is_too_few() {
        assert_eq!(reason(history(vec![visit(0, 2)], false)), Some(ExclusionReason::TooFewVisits));
    }

    #[test]
    fn two_separated_visits_are_eligible() {
        assert_eq!(reason(history(vec![visit(0, 2), visit(400, 1)], false)), None);
    }

    #[test]
    fn faulty_visit_is_discarded() {
        let h = history(vec![visit(0, 2), visit(10, 0), visit(400, 1)], false);
        let (ok, ex) = filter_eligible(vec![h], &CohortConfig::default());
        assert!(ex.is_empty());
        assert_eq!(ok[0].visits().len(), 2);
        assert_eq!(ok[0].visits()[1], visit(400, 1));
    }

    #[test]
    fn fourteen_days_is_not_faulty() {
        let cleaned = clean_visits(&[visit(0, 1), visit(13, 1), visit(27, 1), visit(40, 1)], 14);
        // 13 dropped; 27 is 27 days after the retained 0; 40 is 13 after 27
        assert_eq!(cleaned, vec![visit(0, 1), visit(27, 1)]);
    }

    #[test]
    fn first_violated_rule_wins() {
        assert_eq!(reason(history(vec![visit(0, 0), visit(400, 0)], true)), Some(ExclusionReason::NoPolyp));
        assert_eq!(reason(history(vec![visit(0, 1)], true)), Some(ExclusionReason::ColitisOrCrohns));
        assert_eq!(
            reason(history(vec![visit(0, 1), visit(182, 1)], false)),
            Some(ExclusionReason::InsufficientSeparation)
        );
        assert_eq!(reason(history(vec![visit(0, 1), visit(183, 0)], false)), None);
    }

    #[test]
    fn pairing_examples() {
        let cfg = CohortConfig::default();
        let c = pair_baseline_outcome(&history(vec![visit(0, 3), visit(500, 2)], false), &cfg).unwrap();
        assert_eq!((c.time_days, c.event), (500.0, true));
        let c = pair_baseline_outcome(&history(vec![visit(0, 1), visit(700, 0)], false), &cfg).unwrap();
        assert_eq!((c.time_days, c.event), (700.0, false));
        let c = pair_baseline_outcome(&history(vec![visit(0, 1), visit(300, 0), visit(900, 4)], false), &cfg)
            .unwrap();
        assert_eq!((c.time_days, c.event), (900.0, true));
    }

    #[test]
    fn baseline_is_first_polyp_visit() {
        let cfg = CohortConfig::default();
        let h = history(vec![visit(0, 0), visit(100, 2), visit(200, 1), visit(400, 1)], false);
        let c = pair_baseline_outcome(&h, &cfg).unwrap();
        // the day-200 visit is only 100 days after baseline
        assert_eq!((c.time_days, c.event), (300.0, true));
    }

    #[test]
    fn pairing_ineligible_fails() {
        let err = pair_baseline_outcome(&history(vec![visit(0, 1)], false), &CohortConfig::default());
        assert!(matches!(err, Err(CohortError::Ineligible { reason: ExclusionReason::TooFewVisits, .. })));
    }

    #[test]
    fn unordered_visits_rejected() {
        assert!(PatientHistory::new("p", Demographics::default(), vec![visit(5, 1), visit(5, 1)], false).is_err());
    }
}
