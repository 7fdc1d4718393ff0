use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MIN_KS_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub n: usize,
    /// Asymptotic critical value at the 1% level, `1.63/√n`.
    pub critical_1pct: f64,
    /// Asymptotic critical value at the 5% level, `1.36/√n`.
    pub critical_5pct: f64,
}

impl KsResult {
    pub fn passes_1pct(&self) -> bool {
        self.statistic < self.critical_1pct
    }

    pub fn passes_5pct(&self) -> bool {
        self.statistic < self.critical_5pct
    }
}

/// One-sample Kolmogorov–Smirnov distance `sup |F_n − F|`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    let n = samples.len();
    if n < MIN_KS_SAMPLES {
        return Err(Error::InvalidArgument(format!("{n} samples, at least {MIN_KS_SAMPLES} needed")));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    let root = nf.sqrt();
    Ok(KsResult { statistic: d, n, critical_1pct: 1.63 / root, critical_5pct: 1.36 / root })
}

pub fn cauchy_cdf(location: f64, scale: f64) -> impl Fn(f64) -> f64 {
    move |x| 0.5 + ((x - location) / scale).atan() / PI
}

/// CDF of the uniform law on `(−π, π]`.
pub fn uniform_phase_cdf(theta: f64) -> f64 {
    ((theta + PI) / (2.0 * PI)).clamp(0.0, 1.0)
}
