//! The named capacity experiments: channel, constraint and network heads.

use std::fmt;
use std::str::FromStr;

use crate::analysis::ks::{cauchy_cdf, ks_statistic, KsResult};
use crate::analysis::pmf::{default_merge_tol, extract_pmf, Pmf};
use crate::analysis::radial::{cluster_points, radial_profile, Cluster, RadialProfile};
use crate::baselines;
use crate::channels::{ChannelModel, ConstraintSpec, PeakMode};
use crate::error::{Error, Result};
use crate::nn::{Mlp, MlpConfig, OutputActivation};
use crate::optim::AdamConfig;
use crate::rng::stream;
use crate::tensor::Tensor;
use crate::trainer::{
    estimate_mutual_information, generate_inputs, sample_latent, train, train_discriminator, CapacityTrace,
    GaussianPairs, TrainConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    AwgnPeak,
    MimoPeak,
    CauchyLog,
    CauchyPeak,
    Rayleigh,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::AwgnPeak,
        ExperimentKind::MimoPeak,
        ExperimentKind::CauchyLog,
        ExperimentKind::CauchyPeak,
        ExperimentKind::Rayleigh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::AwgnPeak => "awgn-peak",
            ExperimentKind::MimoPeak => "mimo-peak",
            ExperimentKind::CauchyLog => "cauchy-log",
            ExperimentKind::CauchyPeak => "cauchy-peak",
            ExperimentKind::Rayleigh => "rayleigh",
        }
    }

    /// Channel parameters the experiment accepts.
    pub fn parameters(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::AwgnPeak => &["A", "d"],
            ExperimentKind::MimoPeak => &["r2"],
            ExperimentKind::CauchyLog | ExperimentKind::CauchyPeak => &["A", "gamma"],
            ExperimentKind::Rayleigh => &["a"],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

/// Channel parameters; fields an experiment does not use are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Peak bound, or the `A` of the logarithmic constraint.
    pub a: f64,
    pub d: usize,
    pub gamma: f64,
    pub r2: f64,
    /// Rayleigh average-cost budget.
    pub budget: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self { a: 1.0, d: 1, gamma: 1.0, r2: 1.0, budget: 1.0 }
    }
}

/// Samples drawn from the trained generator for analysis.
pub const EVAL_SAMPLES: usize = 10_000;
/// Link distance for 2-D position clustering.
pub const CLUSTER_TOL: f64 = 0.1;
/// Training schedule shared by every experiment. With the trainer defaults
/// the generator ramps between atoms stay wide enough to chain neighbouring
/// atoms into one cluster; a faster, annealed generator on smaller batches
/// sharpens them at the same cost.
pub const STEPS: usize = 10_000;
pub const BATCH_SIZE: usize = 256;
pub const GENERATOR_LR: f64 = 1e-2;
/// Generator learning rate where the constraint is a hinge penalty; at
/// [`GENERATOR_LR`] the Rayleigh sigmoid head saturates at S = 1.
pub const PENALTY_GENERATOR_LR: f64 = 3e-3;
pub const GENERATOR_ANNEAL: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct Experiment {
    pub kind: ExperimentKind,
    pub params: ChannelParams,
    pub channel: ChannelModel,
    pub spec: ConstraintSpec,
    pub generator: MlpConfig,
    pub discriminator: MlpConfig,
    pub train: TrainConfig,
}

impl Experiment {
    /// Builds the experiment with default training settings for its input
    /// dimension; adjust `train` before calling [`Experiment::run`].
    pub fn new(kind: ExperimentKind, params: ChannelParams) -> Result<Self> {
        let (channel, spec, head) = match kind {
            ExperimentKind::AwgnPeak => (
                ChannelModel::awgn(params.d)?,
                ConstraintSpec::peak(params.a, PeakMode::Project),
                OutputActivation::Identity,
            ),
            ExperimentKind::MimoPeak => {
                if !(params.r2 > 0.0 && params.r2.is_finite()) {
                    return Err(Error::Config(format!("r2 must be positive, got {}", params.r2)));
                }
                // elliptical unit peak ‖Hx‖ ≤ 1, H = diag(1, r2), on a
                // unit-gain Gaussian channel
                (
                    ChannelModel::awgn(2)?,
                    ConstraintSpec::weighted_peak(1.0, vec![1.0, params.r2], PeakMode::Project),
                    OutputActivation::Identity,
                )
            }
            ExperimentKind::CauchyLog => (
                ChannelModel::cauchy(params.gamma)?,
                ConstraintSpec::log_power(params.a, params.gamma),
                OutputActivation::Identity,
            ),
            ExperimentKind::CauchyPeak => (
                ChannelModel::cauchy(params.gamma)?,
                ConstraintSpec::peak(params.a, PeakMode::Project),
                OutputActivation::Identity,
            ),
            ExperimentKind::Rayleigh => (
                ChannelModel::rayleigh_equiv(),
                ConstraintSpec::rayleigh_average(params.budget),
                OutputActivation::Sigmoid,
            ),
        };
        spec.validate()?;
        let d = channel.input_dim();
        let lr = if spec.projection().is_some() { GENERATOR_LR } else { PENALTY_GENERATOR_LR };
        Ok(Self {
            kind,
            params,
            generator: MlpConfig::generator(d, d, head),
            discriminator: MlpConfig::discriminator(d, channel.output_dim()),
            channel,
            spec,
            train: TrainConfig {
                steps: STEPS,
                batch_size: BATCH_SIZE,
                generator_adam: AdamConfig::new(lr),
                generator_anneal: GENERATOR_ANNEAL,
                ..TrainConfig::new(d)
            },
        })
    }

    /// Reference capacity in nats, where one is available.
    pub fn reference_capacity(&self) -> Result<Option<f64>> {
        let p = &self.params;
        Ok(match self.kind {
            ExperimentKind::AwgnPeak if p.d == 1 => Some(baselines::awgn_peak_capacity(p.a)?.capacity),
            ExperimentKind::CauchyLog => Some(baselines::cauchy_capacity(p.a, p.gamma)?),
            ExperimentKind::CauchyPeak => Some(baselines::cauchy_peak_capacity(p.a, p.gamma)?.capacity),
            ExperimentKind::Rayleigh => Some(baselines::rayleigh_capacity(p.budget)?.capacity),
            _ => None,
        })
    }

    /// Upper bounds in bits for peak-constrained Gaussian experiments:
    /// `(shannon, mckellips)`; McKellips applies to the scalar case only.
    pub fn bounds_bits(&self) -> Result<Option<(f64, Option<f64>)>> {
        Ok(match self.kind {
            ExperimentKind::AwgnPeak => {
                let s = baselines::shannon_awgn_bound(self.params.a, self.params.d)?;
                let m = if self.params.d == 1 { Some(baselines::mckellips_bound(self.params.a)?) } else { None };
                Some((s, m))
            }
            _ => None,
        })
    }

    pub fn run(&self) -> Result<RunResult> {
        let outcome = train(&self.train, &self.channel, &self.spec, &self.generator, &self.discriminator)?;
        let samples = self.draw_samples(&outcome.generator, EVAL_SAMPLES)?;
        let analysis = self.analyze(&samples)?;
        Ok(RunResult {
            capacity: outcome.trace.final_capacity(),
            trace: outcome.trace,
            generator: outcome.generator,
            discriminator: outcome.discriminator,
            samples,
            analysis,
        })
    }

    /// Draws generator inputs from a stream independent of training.
    pub fn draw_samples(&self, generator: &Mlp, n: usize) -> Result<Tensor> {
        let mut rng = stream(self.train.seed, "evaluation");
        let z = sample_latent(n, self.train.latent_dim, &mut rng);
        generate_inputs(generator, &z, &self.spec)
    }

    pub fn analyze(&self, samples: &Tensor) -> Result<Analysis> {
        match self.kind {
            ExperimentKind::MimoPeak => {
                let gains = self.spec.peak_weights.as_deref();
                let radial = radial_profile(samples, gains, None)?;
                let clusters = cluster_points(samples, CLUSTER_TOL)?;
                Ok(Analysis::Planar { radial, clusters })
            }
            ExperimentKind::Rayleigh => {
                let s = samples.column_values(0);
                let pmf = extract_pmf(&s, default_merge_tol(&s))?;
                Ok(Analysis::Scalar { pmf, ks: None })
            }
            ExperimentKind::AwgnPeak if self.params.d != 1 => {
                let radial = radial_profile(samples, None, None)?;
                let clusters = cluster_points(samples, CLUSTER_TOL)?;
                Ok(Analysis::Planar { radial, clusters })
            }
            _ => {
                let x = samples.column_values(0);
                let pmf = extract_pmf(&x, default_merge_tol(&x))?;
                let ks = if self.kind == ExperimentKind::CauchyLog {
                    Some(ks_statistic(&x, cauchy_cdf(0.0, self.params.a - self.params.gamma))?)
                } else {
                    None
                };
                Ok(Analysis::Scalar { pmf, ks })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Analysis {
    /// Scalar input law, plus a KS fit against the continuous optimum when
    /// one is known.
    Scalar { pmf: Pmf, ks: Option<KsResult> },
    Planar { radial: RadialProfile, clusters: Vec<Cluster> },
}

impl Analysis {
    pub fn atoms(&self) -> usize {
        match self {
            Analysis::Scalar { pmf, .. } => pmf.len(),
            Analysis::Planar { radial, .. } => radial.magnitude.len(),
        }
    }
}

/// `U = sqrt(1/S − 1)`, mapping the Rayleigh input back to amplitude.
pub fn rayleigh_amplitude(s: f64) -> f64 {
    (1.0 / s - 1.0).max(0.0).sqrt()
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Trailing-window capacity estimate in nats.
    pub capacity: f64,
    pub trace: CapacityTrace,
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub samples: Tensor,
    pub analysis: Analysis,
}

/// Pairs per evaluation batch of [`gaussian_mi_estimate`].
pub const MI_EVAL_BATCH: usize = 10_000;
/// Evaluation batches averaged by [`gaussian_mi_estimate`].
pub const MI_EVAL_BATCHES: usize = 10;

/// Trains a discriminator alone on standard bivariate normal pairs with
/// correlation `rho`, then reads the mutual information off fresh batches.
pub fn gaussian_mi_estimate(rho: f64, train: &TrainConfig) -> Result<f64> {
    baselines::gaussian_mi_analytic(rho)?;
    let source = GaussianPairs { rho };
    let d_cfg = MlpConfig::discriminator(1, 1);
    let (disc, _) = train_discriminator(train, &source, &d_cfg)?;
    let mut rng = stream(train.seed, "mi-evaluation");
    let mut total = 0.0;
    for _ in 0..MI_EVAL_BATCHES {
        total += estimate_mutual_information(&disc, &source, MI_EVAL_BATCH, train.alpha, &mut rng)?;
    }
    Ok(total / MI_EVAL_BATCHES as f64)
}
