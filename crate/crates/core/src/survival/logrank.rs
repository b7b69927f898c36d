use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::chisq::chi_square_sf;
use super::km::check_inputs;
use super::SurvivalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRankResult {
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Contribution of one event time to a group's observed-minus-expected
/// count and its variance: `n` at risk and `d` events overall, `n_group`
/// and `d_group` within the group.
#[inline]
pub fn logrank_increment(n: f64, n_group: f64, d: f64, d_group: f64) -> (f64, f64) {
    let frac = n_group / n;
    let u = d_group - d * frac;
    let v = if n > 1.0 { d * frac * (1.0 - frac) * (n - d) / (n - 1.0) } else { 0.0 };
    (u, v)
}

/// Mantel-Haenszel log-rank test across `groups` of `(times, events)`.
pub fn log_rank(groups: &[(&[f64], &[bool])]) -> Result<LogRankResult, SurvivalError> {
    let k = groups.len();
    if k < 2 {
        return Err(SurvivalError::TooFewGroups(k));
    }
    for (g, (times, events)) in groups.iter().enumerate() {
        check_inputs(times, events)?;
        if times.is_empty() {
            return Err(SurvivalError::EmptyGroup(g));
        }
    }
    let mut pooled: Vec<(f64, bool, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, (t, e))| t.iter().zip(e.iter()).map(move |(&t, &e)| (t, e, g)))
        .collect();
    if !pooled.iter().any(|r| r.1) {
        return Err(SurvivalError::NoEvents);
    }
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let m = k - 1;
    let mut at_risk: Vec<f64> = groups.iter().map(|(t, _)| t.len() as f64).collect();
    let mut u = DVector::<f64>::zeros(m);
    let mut v = DMatrix::<f64>::zeros(m, m);
    let mut deaths = vec![0.0; k];
    let mut leaving = vec![0.0; k];
    let mut i = 0;
    while i < pooled.len() {
        let t = pooled[i].0;
        deaths.iter_mut().for_each(|x| *x = 0.0);
        leaving.iter_mut().for_each(|x| *x = 0.0);
        while i < pooled.len() && pooled[i].0 == t {
            let (_, e, g) = pooled[i];
            if e {
                deaths[g] += 1.0;
            }
            leaving[g] += 1.0;
            i += 1;
        }
        let d: f64 = deaths.iter().sum();
        if d > 0.0 {
            let n: f64 = at_risk.iter().sum();
            for a in 0..m {
                let (du, dv) = logrank_increment(n, at_risk[a], d, deaths[a]);
                u[a] += du;
                v[(a, a)] += dv;
                if n > 1.0 {
                    for b in 0..m {
                        if b != a {
                            v[(a, b)] -= d * (at_risk[a] / n) * (at_risk[b] / n) * (n - d) / (n - 1.0);
                        }
                    }
                }
            }
        }
        for g in 0..k {
            at_risk[g] -= leaving[g];
        }
    }

    let chi_square = if m == 1 {
        if v[(0, 0)] > 0.0 {
            u[0] * u[0] / v[(0, 0)]
        } else {
            0.0
        }
    } else {
        quadratic_form(&u, &v)
    };
    let chi_square = chi_square.max(0.0);
    Ok(LogRankResult { chi_square, degrees_of_freedom: m, p_value: chi_square_sf(chi_square, m) })
}

/// uᵀ V⁻ u with a pseudo-inverse so groups without risk-set overlap still score.
fn quadratic_form(u: &DVector<f64>, v: &DMatrix<f64>) -> f64 {
    match v.clone().pseudo_inverse(1e-12) {
        Ok(pinv) => (u.transpose() * pinv * u)[(0, 0)],
        Err(_) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::chi_square_sf;

    /// Direct 2x2 tabulation at each pooled event time.
    fn brute_two_group(a: (&[f64], &[bool]), b: (&[f64], &[bool])) -> f64 {
        let mut event_times: Vec<f64> = a
            .0
            .iter()
            .zip(a.1)
            .chain(b.0.iter().zip(b.1))
            .filter(|(_, e)| **e)
            .map(|(t, _)| *t)
            .collect();
        event_times.sort_by(f64::total_cmp);
        event_times.dedup();
        let (mut o_minus_e, mut var) = (0.0, 0.0);
        for t in event_times {
            let n1 = a.0.iter().filter(|&&x| x >= t).count() as f64;
            let n2 = b.0.iter().filter(|&&x| x >= t).count() as f64;
            let d1 = a.0.iter().zip(a.1).filter(|(x, e)| **x == t && **e).count() as f64;
            let d2 = b.0.iter().zip(b.1).filter(|(x, e)| **x == t && **e).count() as f64;
            let (n, d) = (n1 + n2, d1 + d2);
            o_minus_e += d1 - d * n1 / n;
            if n > 1.0 {
                var += n1 * n2 * d * (n - d) / (n * n * (n - 1.0));
            }
        }
        o_minus_e * o_minus_e / var
    }

    #[test]
    fn identical_groups_score_zero() {
        let t = [3.0, 5.0, 7.0, 9.0];
        let e = [true, false, true, true];
        let r = log_rank(&[(&t, &e), (&t, &e)]).unwrap();
        assert_eq!(r.chi_square, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn separated_groups() {
        let a = [1.0, 2.0, 3.0];
        let b = [10.0, 20.0, 30.0];
        let e = [true; 3];
        let r = log_rank(&[(&a, &e), (&b, &e)]).unwrap();
        let brute = brute_two_group((&a, &e), (&b, &e));
        assert!((r.chi_square - brute).abs() < 1e-9);
        assert!(r.p_value < 0.05);
        assert!((r.p_value - chi_square_sf(brute, 1)).abs() < 1e-12);
    }

    #[test]
    fn three_groups_df() {
        let e = [true, true];
        let r = log_rank(&[(&[1.0, 4.0], &e), (&[2.0, 5.0], &e), (&[3.0, 6.0], &e)]).unwrap();
        assert_eq!(r.degrees_of_freedom, 2);
        assert!(r.chi_square >= 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn errors() {
        let t = [1.0];
        let e = [true];
        assert_eq!(log_rank(&[(&t, &e)]), Err(SurvivalError::TooFewGroups(1)));
        assert_eq!(log_rank(&[(&t, &e), (&[], &[])]), Err(SurvivalError::EmptyGroup(1)));
        assert_eq!(log_rank(&[(&t, &[false]), (&t, &[false])]), Err(SurvivalError::NoEvents));
    }

    #[test]
    fn censored_two_group_matches_tabulation() {
        let a = [1.0, 3.0, 4.0, 8.0];
        let ea = [true, true, false, true];
        let b = [2.0, 2.5, 6.0, 9.0, 11.0];
        let eb = [true, false, true, true, false];
        let two = log_rank(&[(&a, &ea), (&b, &eb)]).unwrap();
        let brute = brute_two_group((&a, &ea), (&b, &eb));
        assert!((two.chi_square - brute).abs() < 1e-9);
    }
}
