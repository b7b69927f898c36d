use serde::{Deserialize, Serialize};

/// Right-continuous step function, zero before the first jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepFunction {
    pub fn zero() -> Self {
        StepFunction { times: Vec::new(), values: Vec::new() }
    }

    pub fn at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x <= t) {
            0 => 0.0,
            k => self.values[k - 1],
        }
    }
}

/// Nelson-Aalen cumulative hazard: the running sum of d/n over distinct event times.
pub fn nelson_aalen(times: &[f64], events: &[bool]) -> StepFunction {
    assert_eq!(times.len(), events.len());
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut out = StepFunction::zero();
    let mut at_risk = times.len() as f64;
    let mut h = 0.0;
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let (mut d, mut leaving) = (0.0, 0.0);
        while i < order.len() && times[order[i]] == t {
            d += events[order[i]] as u8 as f64;
            leaving += 1.0;
            i += 1;
        }
        if d > 0.0 {
            h += d / at_risk;
            out.times.push(t);
            out.values.push(h);
        }
        at_risk -= leaving;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_events() {
        let h = nelson_aalen(&[1.0, 2.0], &[true, true]);
        assert_eq!(h.at(1.0), 0.5);
        assert_eq!(h.at(2.0), 1.5);
        assert_eq!(h.at(0.5), 0.0);
    }

    #[test]
    fn all_censored() {
        let h = nelson_aalen(&[3.0, 4.0], &[false, false]);
        assert_eq!(h, StepFunction::zero());
        assert_eq!(h.at(10.0), 0.0);
    }

    #[test]
    fn single_event() {
        assert_eq!(nelson_aalen(&[5.0], &[true]).at(5.0), 1.0);
    }

    #[test]
    fn censoring_shrinks_risk_set() {
        let h = nelson_aalen(&[1.0, 2.0, 2.0, 3.0], &[false, true, false, true]);
        // at 2: 1 of 3; at 3: 1 of 1
        assert!((h.at(2.5) - 1.0 / 3.0).abs() < 1e-15);
        assert!((h.at(3.0) - (1.0 / 3.0 + 1.0)).abs() < 1e-15);
    }
}
