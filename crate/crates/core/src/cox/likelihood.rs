use super::Ties;

/// Times, event flags and coded covariate rows for likelihood evaluation.
#[derive(Debug, Clone)]
pub struct CoxProblem {
    times: Vec<f64>,
    events: Vec<bool>,
    rows: Vec<Vec<f64>>,
    /// Case indices by decreasing time.
    order: Vec<usize>,
    p: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub log_likelihood: f64,
    pub gradient: Vec<f64>,
    /// Row-major p x p.
    pub hessian: Vec<f64>,
}

impl CoxProblem {
    pub fn new(times: Vec<f64>, events: Vec<bool>, rows: Vec<Vec<f64>>) -> Self {
        assert_eq!(times.len(), events.len());
        assert_eq!(times.len(), rows.len());
        let p = rows.first().map_or(0, Vec::len);
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
        CoxProblem { times, events, rows, order, p }
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|e| **e).count()
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn log_likelihood(&self, beta: &[f64], ties: Ties) -> f64 {
        self.derivatives(beta, ties).log_likelihood
    }

    /// Log partial likelihood with its gradient and Hessian.
    ///
    /// Risk-set sums are accumulated from the longest time down. Linear
    /// predictors are shifted by their maximum, which leaves every risk-set
    /// ratio unchanged.
    pub fn derivatives(&self, beta: &[f64], ties: Ties) -> Derivatives {
        let p = self.p;
        let eta: Vec<f64> = self
            .rows
            .iter()
            .map(|x| x.iter().zip(beta).map(|(x, b)| x * b).sum())
            .collect();
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shift = if shift.is_finite() { shift } else { 0.0 };
        let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();

        let mut ll = 0.0;
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; p];
        let mut s2 = vec![0.0; p * p];
        let mut d1 = vec![0.0; p];
        let mut d2 = vec![0.0; p * p];
        let mut a1 = vec![0.0; p];

        let mut k = 0;
        while k < self.order.len() {
            let t = self.times[self.order[k]];
            let start = k;
            while k < self.order.len() && self.times[self.order[k]] == t {
                let i = self.order[k];
                let x = &self.rows[i];
                s0 += w[i];
                for a in 0..p {
                    s1[a] += w[i] * x[a];
                    for b in 0..p {
                        s2[a * p + b] += w[i] * x[a] * x[b];
                    }
                }
                k += 1;
            }
            let tied: Vec<usize> = self.order[start..k].iter().copied().filter(|&i| self.events[i]).collect();
            if tied.is_empty() {
                continue;
            }
            let d = tied.len();
            let mut d0 = 0.0;
            d1.iter_mut().for_each(|v| *v = 0.0);
            d2.iter_mut().for_each(|v| *v = 0.0);
            for &i in &tied {
                let x = &self.rows[i];
                ll += eta[i] - shift;
                d0 += w[i];
                for a in 0..p {
                    grad[a] += x[a];
                    d1[a] += w[i] * x[a];
                    for b in 0..p {
                        d2[a * p + b] += w[i] * x[a] * x[b];
                    }
                }
            }
            for l in 0..d {
                let frac = match ties {
                    Ties::Efron => l as f64 / d as f64,
                    Ties::Breslow => 0.0,
                };
                let denom = s0 - frac * d0;
                ll -= denom.ln();
                for a in 0..p {
                    a1[a] = (s1[a] - frac * d1[a]) / denom;
                    grad[a] -= a1[a];
                }
                for a in 0..p {
                    for b in 0..p {
                        let second = (s2[a * p + b] - frac * d2[a * p + b]) / denom;
                        hess[a * p + b] -= second - a1[a] * a1[b];
                    }
                }
            }
        }
        Derivatives { log_likelihood: ll, gradient: grad, hessian: hess }
    }
}
