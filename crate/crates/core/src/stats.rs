//! Jump-time statistics: time-rescaled waiting times and a one-sample
//! Kolmogorov–Smirnov test against the unit exponential.

use crate::unravel::TrajectoryRecord;

/// Integrated jump intensity `∫ c·σ²(t) dt` over each completed waiting
/// interval that starts before `horizon`, by a left Riemann sum over the
/// recorded variance series. `c` is the rate per unit variance.
///
/// Intervals are measured from `t = 0` or the previous jump. Restricting
/// the start avoids the bias of dropping long intervals cut off at the end
/// of the run, provided the run extends well past `horizon`.
pub fn rescaled_waiting_times(rec: &TrajectoryRecord, c: f64, horizon: f64) -> Vec<f64> {
    let dt = rec.dt;
    let mut out = Vec::with_capacity(rec.jump_times.len());
    let mut start = 0usize;
    for &tj in &rec.jump_times {
        let end = (tj / dt).round() as usize;
        if start as f64 * dt >= horizon {
            break;
        }
        let s: f64 = rec.var_x_series[start..end].iter().sum();
        out.push(c * s * dt);
        start = end;
    }
    out
}

/// Result of a one-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// Tests `samples` against `Exp(1)`.
pub fn ks_exponential(samples: &[f64]) -> KsResult {
    let mut s: Vec<f64> = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = 1.0 - (-x.max(0.0)).exp();
        d = d.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf);
    }
    let sn = nf.sqrt();
    KsResult { n, statistic: d, p_value: kolmogorov_q((sn + 0.12 + 0.11 / sn) * d) }
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2k²λ²)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
