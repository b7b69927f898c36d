use serde::{Deserialize, Serialize};

use super::SurvivalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmPoint {
    pub time: f64,
    pub survival: f64,
    pub n_at_risk: usize,
    pub n_events: usize,
}

/// Product-limit survival curve. The first point is `(0, 1.0)`; every other
/// point is a distinct event time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    pub points: Vec<KmPoint>,
    pub median_time: Option<f64>,
}

impl KmCurve {
    /// S(t), right-continuous.
    pub fn survival_at(&self, t: f64) -> f64 {
        self.points
            .iter()
            .take_while(|p| p.time <= t)
            .last()
            .map_or(1.0, |p| p.survival)
    }

    pub fn event_points(&self) -> &[KmPoint] {
        &self.points[1..]
    }
}

pub(crate) fn check_inputs(times: &[f64], events: &[bool]) -> Result<(), SurvivalError> {
    if times.len() != events.len() {
        return Err(SurvivalError::LengthMismatch { times: times.len(), events: events.len() });
    }
    if let Some(&t) = times.iter().find(|t| !(**t > 0.0)) {
        return Err(SurvivalError::NonPositiveTime(t));
    }
    Ok(())
}

/// Kaplan-Meier estimate. At tied times events are counted before
/// censorings leave the risk set.
pub fn km_estimate(times: &[f64], events: &[bool]) -> Result<KmCurve, SurvivalError> {
    check_inputs(times, events)?;
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut points = vec![KmPoint { time: 0.0, survival: 1.0, n_at_risk: times.len(), n_events: 0 }];
    let mut at_risk = times.len();
    let mut survival = 1.0;
    let mut median_time = None;
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut deaths = 0;
        let mut leaving = 0;
        while i < order.len() && times[order[i]] == t {
            deaths += events[order[i]] as usize;
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            survival *= 1.0 - deaths as f64 / at_risk as f64;
            points.push(KmPoint { time: t, survival, n_at_risk: at_risk, n_events: deaths });
            if median_time.is_none() && survival <= 0.5 {
                median_time = Some(t);
            }
        }
        at_risk -= leaving;
    }
    Ok(KmCurve { points, median_time })
}
