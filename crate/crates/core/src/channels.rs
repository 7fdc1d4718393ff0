//! Memoryless channel models `y = H(x)` and input constraints.
//!
//! Each channel splits sampling into two steps: [`ChannelModel::sample_noise`]
//! draws the randomness for a batch, and [`ChannelModel::apply_noise`] (or its
//! taped twin [`ChannelModel::apply_graph`]) pushes inputs through. The split
//! keeps the channel differentiable with respect to its input, which the
//! generator update needs.

use std::f64::consts::PI;

use rand::distr::{Distribution, Open01};
use rand_distr::{Exp1, StandardNormal};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelKind {
    /// `y = x + n`, `n ~ N(0, I_d)`.
    Awgn,
    /// `y = H x + n` with diagonal `H = diag(gains)`, `n ~ N(0, I)`.
    Mimo { gains: Vec<f64> },
    /// `y = x + γ·tan(π(u − ½))`.
    Cauchy { gamma: f64 },
    /// Amplitude-equivalent Rayleigh fading: input `s ∈ (0, 1]`, output
    /// `v ~ Exp(rate s)`.
    RayleighEquiv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    kind: ChannelKind,
    dim: usize,
}

impl ChannelModel {
    pub fn awgn(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("channel dimension must be positive".into()));
        }
        Ok(Self { kind: ChannelKind::Awgn, dim })
    }

    pub fn mimo_diagonal(gains: Vec<f64>) -> Result<Self> {
        if gains.is_empty() || gains.iter().any(|g| !(g.is_finite() && *g != 0.0)) {
            return Err(Error::Config(format!("invalid MIMO gains {gains:?}")));
        }
        let dim = gains.len();
        Ok(Self { kind: ChannelKind::Mimo { gains }, dim })
    }

    /// The 2×2 case `H = diag(1, r2)`.
    pub fn mimo(r2: f64) -> Result<Self> {
        Self::mimo_diagonal(vec![1.0, r2])
    }

    pub fn cauchy(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("Cauchy scale must be positive, got {gamma}")));
        }
        Ok(Self { kind: ChannelKind::Cauchy { gamma }, dim: 1 })
    }

    pub fn rayleigh_equiv() -> Self {
        Self { kind: ChannelKind::RayleighEquiv, dim: 1 }
    }

    pub fn kind(&self) -> &ChannelKind {
        &self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.dim
    }

    pub fn output_dim(&self) -> usize {
        self.dim
    }

    /// Draws noise for a batch of `m` channel uses.
    pub fn sample_noise(&self, m: usize, rng: &mut Rng) -> Tensor {
        let n = m * self.dim;
        let data: Vec<f64> = match &self.kind {
            ChannelKind::Awgn | ChannelKind::Mimo { .. } => {
                (0..n).map(|_| StandardNormal.sample(rng)).collect()
            }
            ChannelKind::Cauchy { gamma } => (0..n)
                .map(|_| {
                    let u: f64 = Open01.sample(rng);
                    gamma * (PI * (u - 0.5)).tan()
                })
                .collect(),
            ChannelKind::RayleighEquiv => (0..n).map(|_| Exp1.sample(rng)).collect(),
        };
        Tensor::matrix(m, self.dim, data).expect("noise shape")
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != 2 || x.cols() != self.dim {
            return Err(Error::Shape(format!(
                "channel input {:?} for dimension {}",
                x.shape(),
                self.dim
            )));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("channel input".into()));
        }
        if self.kind == ChannelKind::RayleighEquiv {
            if let Some(bad) = x.data().iter().find(|&&s| !(s > 0.0 && s <= 1.0)) {
                return Err(Error::Domain(format!("Rayleigh input {bad} outside (0, 1]")));
            }
        }
        Ok(())
    }

    /// Applies the channel to `x` using pre-drawn `noise`.
    pub fn apply_noise(&self, x: &Tensor, noise: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        if !x.same_shape(noise) {
            return Err(Error::Shape(format!(
                "noise {:?} for input {:?}",
                noise.shape(),
                x.shape()
            )));
        }
        let xs = x.data().iter().zip(noise.data());
        let data: Vec<f64> = match &self.kind {
            ChannelKind::Awgn | ChannelKind::Cauchy { .. } => xs.map(|(a, n)| a + n).collect(),
            ChannelKind::Mimo { gains } => xs
                .enumerate()
                .map(|(i, (a, n))| gains[i % self.dim] * a + n)
                .collect(),
            ChannelKind::RayleighEquiv => xs.map(|(s, e)| e / s).collect(),
        };
        Tensor::new(x.shape().to_vec(), data)
    }

    /// Taped version of [`ChannelModel::apply_noise`]; gradients flow to `x`.
    pub fn apply_graph(&self, g: &mut Graph, x: Var, noise: &Tensor) -> Result<Var> {
        self.check_input(g.value(x))?;
        if !g.value(x).same_shape(noise) {
            return Err(Error::Shape("noise shape".into()));
        }
        match &self.kind {
            ChannelKind::Awgn | ChannelKind::Cauchy { .. } => {
                let n = g.constant(noise.clone());
                g.add(x, n)
            }
            ChannelKind::Mimo { gains } => {
                let hx = g.mul_row(x, gains)?;
                let n = g.constant(noise.clone());
                g.add(hx, n)
            }
            ChannelKind::RayleighEquiv => g.div_into(noise, x),
        }
    }

    /// Conditional CDF `P(Y ≤ y | X = x)` for scalar channels.
    pub fn conditional_cdf(&self, x: f64, y: f64) -> Result<f64> {
        match &self.kind {
            ChannelKind::Awgn if self.dim == 1 => Ok(normal_cdf(y - x)),
            ChannelKind::Cauchy { gamma } => Ok(0.5 + ((y - x) / gamma).atan() / PI),
            ChannelKind::RayleighEquiv => {
                if !(x > 0.0 && x <= 1.0) {
                    return Err(Error::Domain(format!("Rayleigh input {x} outside (0, 1]")));
                }
                Ok(if y <= 0.0 { 0.0 } else { -(-x * y).exp_m1() })
            }
            _ => Err(Error::Unsupported(format!(
                "closed-form conditional CDF for {:?} (dim {})",
                self.kind, self.dim
            ))),
        }
    }

    /// Probability that `Y ∈ (lo, hi]` given `X = x`, computed to avoid
    /// cancellation in the tails.
    pub fn cell_probability(&self, x: f64, lo: f64, hi: f64) -> Result<f64> {
        match &self.kind {
            ChannelKind::Awgn if self.dim == 1 => {
                let (a, b) = (lo - x, hi - x);
                Ok(if a > 0.0 {
                    normal_sf(a) - normal_sf(b)
                } else {
                    normal_cdf(b) - normal_cdf(a)
                })
            }
            ChannelKind::RayleighEquiv => {
                if !(x > 0.0 && x <= 1.0) {
                    return Err(Error::Domain(format!("Rayleigh input {x} outside (0, 1]")));
                }
                let survival = |y: f64| if y <= 0.0 { 1.0 } else { (-x * y).exp() };
                Ok(survival(lo) - survival(hi))
            }
            _ => Ok(self.conditional_cdf(x, hi)? - self.conditional_cdf(x, lo)?),
        }
    }
}

pub fn normal_cdf(t: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-t / std::f64::consts::SQRT_2)
}

fn normal_sf(t: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(t / std::f64::consts::SQRT_2)
}

/// Draws `m` outputs for inputs `x`.
pub fn channel_apply(model: &ChannelModel, x: &Tensor, rng: &mut Rng) -> Result<Tensor> {
    let noise = model.sample_noise(x.rows(), rng);
    model.apply_noise(x, &noise)
}

/// How a peak constraint is enforced during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakMode {
    /// Radially project every generated sample onto the feasible ball.
    Project,
    /// Hinge penalty in the generator objective.
    Penalty,
}

/// The logarithmic power constraint
/// `E[ln(((A+γ)/A)² + (X/A)²)] ≤ ln 4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPower {
    pub a: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    /// Peak amplitude `A`: `‖diag(w) x‖ ≤ A`.
    pub peak: Option<f64>,
    /// Optional per-coordinate weights `w` of the peak norm (`H` for MIMO).
    pub peak_weights: Option<Vec<f64>>,
    pub peak_mode: PeakMode,
    /// Average power `P`: `E‖x‖² ≤ P`.
    pub average: Option<f64>,
    pub log_power: Option<LogPower>,
    /// Rayleigh average cost `a`: `E[1/S − 1] ≤ a`.
    pub rayleigh_average: Option<f64>,
}

impl ConstraintSpec {
    pub fn none() -> Self {
        Self {
            peak: None,
            peak_weights: None,
            peak_mode: PeakMode::Penalty,
            average: None,
            log_power: None,
            rayleigh_average: None,
        }
    }

    pub fn peak(a: f64, mode: PeakMode) -> Self {
        Self { peak: Some(a), peak_mode: mode, ..Self::none() }
    }

    /// Elliptical peak constraint `‖diag(weights) x‖ ≤ a`.
    pub fn weighted_peak(a: f64, weights: Vec<f64>, mode: PeakMode) -> Self {
        Self { peak: Some(a), peak_weights: Some(weights), peak_mode: mode, ..Self::none() }
    }

    pub fn average(p: f64) -> Self {
        Self { average: Some(p), ..Self::none() }
    }

    pub fn log_power(a: f64, gamma: f64) -> Self {
        Self { log_power: Some(LogPower { a, gamma }), ..Self::none() }
    }

    pub fn rayleigh_average(a: f64) -> Self {
        Self { rayleigh_average: Some(a), ..Self::none() }
    }

    pub fn lambda_peak(&self) -> f64 {
        if self.peak.is_some() { 1.0 } else { 0.0 }
    }

    pub fn lambda_average(&self) -> f64 {
        if self.average.is_some() { 1.0 } else { 0.0 }
    }

    pub fn has_any(&self) -> bool {
        self.peak.is_some()
            || self.average.is_some()
            || self.log_power.is_some()
            || self.rayleigh_average.is_some()
    }

    /// Projection radius and weights when the peak bound is enforced by projection.
    pub fn projection(&self) -> Option<(f64, Option<&[f64]>)> {
        match (self.peak, self.peak_mode) {
            (Some(a), PeakMode::Project) => Some((a, self.peak_weights.as_deref())),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(v) if !(v > 0.0 && v.is_finite()) => {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
            _ => Ok(()),
        };
        positive("peak bound A", self.peak)?;
        positive("average bound P", self.average)?;
        positive("Rayleigh average bound a", self.rayleigh_average)?;
        if let Some(lp) = self.log_power {
            if !(lp.gamma > 0.0 && lp.a >= lp.gamma && lp.a.is_finite()) {
                return Err(Error::Config(format!(
                    "log-power constraint needs A ≥ γ > 0, got A={} γ={}",
                    lp.a, lp.gamma
                )));
            }
        }
        if let (Some(w), Some(_)) = (&self.peak_weights, self.peak) {
            if w.iter().any(|v| !(v.is_finite() && *v != 0.0)) {
                return Err(Error::Config(format!("invalid peak weights {w:?}")));
            }
        }
        Ok(())
    }
}

fn weighted_sq_norm(row: &[f64], w: Option<&[f64]>) -> f64 {
    row.iter()
        .enumerate()
        .map(|(j, v)| (w.map_or(1.0, |w| w[j]) * v).powi(2))
        .sum()
}

/// Hinge penalty of a batch against every constraint present in `spec`.
pub fn constraint_penalty(x: &Tensor, spec: &ConstraintSpec) -> Result<f64> {
    let m = x.rows() as f64;
    let mut total = 0.0;
    if let Some(a) = spec.peak {
        let w = spec.peak_weights.as_deref();
        let hinge: f64 = (0..x.rows())
            .map(|i| (weighted_sq_norm(x.row(i), w) - a * a).max(0.0))
            .sum::<f64>()
            / m;
        total += spec.lambda_peak() * hinge;
    }
    if let Some(p) = spec.average {
        let mean_power = (0..x.rows()).map(|i| weighted_sq_norm(x.row(i), None)).sum::<f64>() / m;
        total += spec.lambda_average() * (mean_power - p).max(0.0);
    }
    if let Some(LogPower { a, gamma }) = spec.log_power {
        let c = ((a + gamma) / a).powi(2);
        let mean_log = (0..x.rows())
            .map(|i| (c + weighted_sq_norm(x.row(i), None) / (a * a)).ln())
            .sum::<f64>()
            / m;
        total += (mean_log - 4f64.ln()).max(0.0);
    }
    if let Some(budget) = spec.rayleigh_average {
        let mean_cost = x.data().iter().map(|s| 1.0 / s - 1.0).sum::<f64>() / m;
        total += (mean_cost - budget).max(0.0);
    }
    Ok(total)
}

/// Taped [`constraint_penalty`].
/// `mean_i max(‖x_i‖²_w − a², 0)` as a graph node.
pub fn peak_hinge(g: &mut Graph, x: Var, a: f64, weights: Option<&[f64]>) -> Result<Var> {
    let n = g.row_sq_norm(x, weights)?;
    let over = g.add_scalar(n, -a * a);
    let h = g.relu(over);
    Ok(g.mean(h))
}

pub fn penalty_graph(g: &mut Graph, x: Var, spec: &ConstraintSpec) -> Result<Option<Var>> {
    let mut terms = Vec::new();
    if let Some(a) = spec.peak {
        let h = peak_hinge(g, x, a, spec.peak_weights.as_deref())?;
        terms.push(g.scale(h, spec.lambda_peak()));
    }
    if let Some(p) = spec.average {
        let n = g.row_sq_norm(x, None)?;
        let mean = g.mean(n);
        let over = g.add_scalar(mean, -p);
        let h = g.relu(over);
        terms.push(g.scale(h, spec.lambda_average()));
    }
    if let Some(LogPower { a, gamma }) = spec.log_power {
        let c = ((a + gamma) / a).powi(2);
        let n = g.row_sq_norm(x, None)?;
        let scaled = g.scale(n, 1.0 / (a * a));
        let shifted = g.add_scalar(scaled, c);
        let l = g.log_clamped(shifted, f64::MIN_POSITIVE);
        let mean = g.mean(l);
        let over = g.add_scalar(mean, -(4f64.ln()));
        terms.push(g.relu(over));
    }
    if let Some(budget) = spec.rayleigh_average {
        let ones = Tensor::full(g.value(x).shape().to_vec(), 1.0);
        let inv = g.div_into(&ones, x)?;
        let mean = g.mean(inv);
        let over = g.add_scalar(mean, -1.0 - budget);
        terms.push(g.relu(over));
    }
    let mut it = terms.into_iter();
    let Some(mut acc) = it.next() else { return Ok(None) };
    for t in it {
        acc = g.add(acc, t)?;
    }
    Ok(Some(acc))
}

/// Radially scales rows with `‖x_i‖ > a` onto the sphere of radius `a`.
pub fn project_peak(x: &Tensor, a: f64) -> Result<Tensor> {
    project_peak_weighted(x, a, None)
}

/// Radial projection onto `‖diag(w) x‖ ≤ a`.
pub fn project_peak_weighted(x: &Tensor, a: f64, weights: Option<&[f64]>) -> Result<Tensor> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!("peak bound must be positive, got {a}")));
    }
    if let Some(w) = weights {
        if w.len() != x.cols() {
            return Err(Error::Shape("projection weights length".into()));
        }
    }
    let mut out = x.clone();
    let cols = out.cols();
    crate::autodiff::project_rows(out.data_mut(), cols, a, &weights.map(<[f64]>::to_vec));
    Ok(out)
}
