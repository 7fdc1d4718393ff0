//! Cooperative generator/discriminator training.
//!
//! The value function is
//!
//! ```text
//! J_α(G, D) = α·E[ln D(x, y)] − E[D(x, ỹ)]
//! ```
//!
//! where `(x, y)` are paired channel input/output samples and `ỹ` is `y`
//! shuffled by a derangement, which makes `(x, ỹ)` a draw from the product of
//! marginals. Both networks ascend `J_α`; at the joint optimum
//! `J_α = α(C + ln α − 1)`, so the capacity is read back as
//! `J/α + 1 − ln α`.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{Graph, Var};
use crate::channels::{peak_hinge, penalty_graph, project_peak_weighted, constraint_penalty, ChannelModel, ConstraintSpec};
use crate::error::{Error, Result};
use crate::nn::{BatchMap, Mlp, MlpConfig};
use crate::optim::{clip_grad_norm, AdamConfig, AdamState};
use crate::rng::{Rng, RunStreams};
use crate::tensor::Tensor;

/// Floor applied to the discriminator output inside the logarithm.
pub const LOG_FLOOR: f64 = 1e-8;
/// Weight of the hinge on pre-projection generator outputs in projection mode.
pub const RESTORING_WEIGHT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Generator updates (outer steps).
    pub steps: usize,
    /// Discriminator updates per generator update.
    pub disc_steps: usize,
    pub batch_size: usize,
    pub alpha: f64,
    pub latent_dim: usize,
    pub seed: u64,
    /// Trailing generator steps averaged into the reported capacity.
    pub capacity_window: usize,
    pub generator_adam: AdamConfig,
    pub discriminator_adam: AdamConfig,
    /// Global gradient-norm clip applied before every update.
    pub grad_clip: f64,
    /// Fraction of the final steps over which the generator learning rate
    /// decays linearly towards zero; 0 keeps it constant.
    pub generator_anneal: f64,
}

impl TrainConfig {
    pub fn new(latent_dim: usize) -> Self {
        Self {
            steps: 5000,
            disc_steps: 10,
            batch_size: 512,
            alpha: 1.0,
            latent_dim,
            seed: 0,
            capacity_window: 200,
            generator_adam: AdamConfig::generator_default(),
            discriminator_adam: AdamConfig::discriminator_default(),
            grad_clip: 10.0,
            generator_anneal: 0.0,
        }
    }

    /// Generator learning rate for outer step `step`.
    pub fn generator_lr_at(&self, step: usize) -> f64 {
        let lr = self.generator_adam.learning_rate;
        let span = (self.generator_anneal * self.steps as f64).round() as usize;
        let start = self.steps - span.min(self.steps);
        if step < start {
            lr
        } else {
            lr * (self.steps - step) as f64 / span as f64
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.disc_steps == 0 {
            return Err(Error::Config("at least one discriminator step per generator step".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2 for a derangement".into()));
        }
        if self.latent_dim == 0 || self.capacity_window == 0 {
            return Err(Error::Config("latent_dim and capacity_window must be positive".into()));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::Config("gradient clip must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.generator_anneal) {
            return Err(Error::Config(format!("generator_anneal must lie in [0, 1], got {}", self.generator_anneal)));
        }
        for (name, a) in [("generator", &self.generator_adam), ("discriminator", &self.discriminator_adam)] {
            if !(a.learning_rate > 0.0 && a.learning_rate.is_finite()) {
                return Err(Error::Config(format!("{name} learning rate must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Value function `J_α` on the generator batch, without penalties.
    pub value: f64,
    /// Capacity readout in nats.
    pub capacity: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityTrace {
    pub alpha: f64,
    pub window: usize,
    pub records: Vec<StepRecord>,
}

impl CapacityTrace {
    pub fn new(alpha: f64, window: usize) -> Self {
        Self { alpha, window, records: Vec::new() }
    }

    pub fn push(&mut self, step: usize, value: f64, penalty: f64) {
        let capacity = estimate_capacity(value, self.alpha);
        self.records.push(StepRecord { step, value, capacity, penalty });
    }

    /// Mean capacity over the last `window` records.
    pub fn final_capacity(&self) -> f64 {
        self.trailing_mean(|r| r.capacity)
    }

    pub fn final_penalty(&self) -> f64 {
        self.trailing_mean(|r| r.penalty)
    }

    fn trailing_mean(&self, f: impl Fn(&StepRecord) -> f64) -> f64 {
        let n = self.records.len().min(self.window);
        if n == 0 {
            return f64::NAN;
        }
        self.records[self.records.len() - n..].iter().map(f).sum::<f64>() / n as f64
    }
}

/// `C = J/α + 1 − ln α`.
pub fn estimate_capacity(value: f64, alpha: f64) -> f64 {
    value / alpha + 1.0 - alpha.ln()
}

/// A uniformly random cyclic shift by `k ∈ {1, …, m−1}`: `π(i) = (i + k) mod m`.
pub fn derange(m: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("derangement needs at least 2 rows, got {m}")));
    }
    let k = rng.random_range(1..m);
    Ok((0..m).map(|i| (i + k) % m).collect())
}

pub fn sample_latent(m: usize, dim: usize, rng: &mut Rng) -> Tensor {
    let data = (0..m * dim).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::matrix(m, dim, data).expect("latent shape")
}

/// Maps latent samples through the generator and, in projection mode,
/// onto the feasible set.
pub fn generate_inputs(generator: &impl BatchMap, z: &Tensor, spec: &ConstraintSpec) -> Result<Tensor> {
    let x = generator.map_batch(z)?;
    match spec.projection() {
        Some((a, w)) => project_peak_weighted(&x, a, w),
        None => Ok(x),
    }
}

/// `(α/m)·Σ ln D(x_i, y_i) − (1/m)·Σ D(x_i, ỹ_i)`.
pub fn discriminator_objective(
    discriminator: &impl BatchMap,
    x: &Tensor,
    y_paired: &Tensor,
    y_unpaired: &Tensor,
    alpha: f64,
) -> Result<f64> {
    if x.rows() != y_paired.rows() || x.rows() != y_unpaired.rows() {
        return Err(Error::Shape("discriminator batches must be row-aligned".into()));
    }
    let joint = discriminator.map_batch(&x.concat_cols(y_paired)?)?;
    let marginal = discriminator.map_batch(&x.concat_cols(y_unpaired)?)?;
    if let Some(bad) = joint.data().iter().chain(marginal.data()).find(|&&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "discriminator output {bad} is not positive; check the output head"
        )));
    }
    let log_term = joint.data().iter().map(|d| d.ln()).sum::<f64>() / joint.len() as f64;
    let value = alpha * log_term - marginal.mean();
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite("discriminator objective".into()))
    }
}

/// Evaluates the constrained value function on a generator batch: fresh
/// channel noise and a fresh derangement are drawn from `rng`, and the
/// constraint penalties are subtracted.
pub fn generator_objective(
    generator: &impl BatchMap,
    discriminator: &impl BatchMap,
    model: &ChannelModel,
    z: &Tensor,
    alpha: f64,
    spec: &ConstraintSpec,
    rng: &mut Rng,
) -> Result<f64> {
    let x = generate_inputs(generator, z, spec)?;
    let noise = model.sample_noise(x.rows(), rng);
    let y = model.apply_noise(&x, &noise)?;
    let perm = derange(x.rows(), rng)?;
    let y_un = y.gather_rows(&perm)?;
    let value = discriminator_objective(discriminator, &x, &y, &y_un, alpha)?;
    Ok(value - constraint_penalty(&x, spec)?)
}

/// Taped value function; returns `J_α` for the given discriminator binding.
fn value_graph(
    g: &mut Graph,
    discriminator: &Mlp,
    d_params: &[Var],
    x: Var,
    y: Var,
    y_un: Var,
    alpha: f64,
) -> Result<Var> {
    let joint_in = g.concat_cols(x, y)?;
    let marg_in = g.concat_cols(x, y_un)?;
    let joint = discriminator.forward_bound(g, joint_in, d_params)?;
    let marg = discriminator.forward_bound(g, marg_in, d_params)?;
    let logs = g.log_clamped(joint, LOG_FLOOR);
    let log_mean = g.mean(logs);
    let first = g.scale(log_mean, alpha);
    let second = g.mean(marg);
    g.sub(first, second)
}

fn collect_grads(g: &Graph, loss: Var, params: &[Var]) -> Result<Vec<Tensor>> {
    let grads = g.backward(loss)?;
    Ok(params.iter().map(|&p| grads.get_or_zeros(p)).collect())
}

fn all_finite(grads: &[Tensor]) -> bool {
    grads.iter().all(Tensor::is_finite)
}

/// One discriminator ascent step on a pre-sampled batch. Returns `J_α`.
pub(crate) fn discriminator_update(
    discriminator: &mut Mlp,
    adam: &mut AdamState,
    x: &Tensor,
    y: &Tensor,
    perm: &[usize],
    alpha: f64,
    grad_clip: f64,
) -> Result<f64> {
    let mut g = Graph::new();
    let params = discriminator.bind(&mut g, true);
    let xv = g.constant(x.clone());
    let yv = g.constant(y.clone());
    let yu = g.constant(y.gather_rows(perm)?);
    let value = value_graph(&mut g, discriminator, &params, xv, yv, yu, alpha)?;
    let j = g.scalar(value);
    if !j.is_finite() {
        return Err(Error::NonFinite("discriminator objective".into()));
    }
    let mut grads = collect_grads(&g, value, &params)?;
    if !all_finite(&grads) {
        return Err(Error::NonFinite("discriminator gradient".into()));
    }
    clip_grad_norm(&mut grads, grad_clip);
    adam.step(discriminator, &grads, true)?;
    Ok(j)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub trace: CapacityTrace,
}

/// Runs the alternating schedule: `disc_steps` discriminator updates followed
/// by one generator update, repeated `steps` times.
pub fn train(
    config: &TrainConfig,
    model: &ChannelModel,
    spec: &ConstraintSpec,
    g_cfg: &MlpConfig,
    d_cfg: &MlpConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    spec.validate()?;
    if g_cfg.input_dim != config.latent_dim {
        return Err(Error::Config(format!(
            "generator input dim {} differs from latent dim {}",
            g_cfg.input_dim, config.latent_dim
        )));
    }
    if g_cfg.output_dim != model.input_dim() {
        return Err(Error::Config(format!(
            "generator output dim {} differs from channel input dim {}",
            g_cfg.output_dim,
            model.input_dim()
        )));
    }
    if d_cfg.input_dim != model.input_dim() + model.output_dim() || d_cfg.output_dim != 1 {
        return Err(Error::Config(format!(
            "discriminator must map {} inputs to 1 output",
            model.input_dim() + model.output_dim()
        )));
    }
    if matches!(d_cfg.output_activation, crate::nn::OutputActivation::Identity | crate::nn::OutputActivation::TanhScaled(_)) {
        return Err(Error::Config("discriminator needs a positive output head".into()));
    }

    let mut streams = RunStreams::new(config.seed);
    let mut generator = Mlp::new(g_cfg.clone(), streams.generator_init)?;
    let mut discriminator = Mlp::new(d_cfg.clone(), streams.discriminator_init)?;
    let mut g_adam = AdamState::new(&generator, config.generator_adam);
    let mut d_adam = AdamState::new(&discriminator, config.discriminator_adam);
    let mut trace = CapacityTrace::new(config.alpha, config.capacity_window);
    let m = config.batch_size;
    let diverged = |step: usize, e: Error| Error::Diverged { step, reason: e.to_string() };

    for step in 0..config.steps {
        for _ in 0..config.disc_steps {
            let z = sample_latent(m, config.latent_dim, &mut streams.latent);
            let x = generate_inputs(&generator, &z, spec).map_err(|e| diverged(step, e))?;
            let noise = model.sample_noise(m, &mut streams.channel);
            let y = model.apply_noise(&x, &noise).map_err(|e| diverged(step, e))?;
            let perm = derange(m, &mut streams.derangement)?;
            discriminator_update(&mut discriminator, &mut d_adam, &x, &y, &perm, config.alpha, config.grad_clip)
                .map_err(|e| diverged(step, e))?;
        }

        g_adam.config.learning_rate = config.generator_lr_at(step);
        let z = sample_latent(m, config.latent_dim, &mut streams.latent);
        let noise = model.sample_noise(m, &mut streams.channel);
        let perm = derange(m, &mut streams.derangement)?;
        let (value, penalty) = generator_update(
            &mut generator,
            &mut g_adam,
            &discriminator,
            model,
            spec,
            &z,
            &noise,
            &perm,
            config,
        )
        .map_err(|e| diverged(step, e))?;
        trace.push(step, value, penalty);
    }

    Ok(TrainOutcome { generator, discriminator, trace })
}

#[allow(clippy::too_many_arguments)]
fn generator_update(
    generator: &mut Mlp,
    adam: &mut AdamState,
    discriminator: &Mlp,
    model: &ChannelModel,
    spec: &ConstraintSpec,
    z: &Tensor,
    noise: &Tensor,
    perm: &[usize],
    config: &TrainConfig,
) -> Result<(f64, f64)> {
    let mut g = Graph::new();
    let zv = g.constant(z.clone());
    let fwd = generator.forward(&mut g, zv)?;
    let (x, restoring) = match spec.projection() {
        // The projection has no gradient outside the ball; a weak hinge on the
        // raw output pulls saturated samples back where the value can move them.
        Some((a, w)) => {
            let h = peak_hinge(&mut g, fwd.output, a, w)?;
            (g.project_ball(fwd.output, a, w)?, Some(g.scale(h, RESTORING_WEIGHT)))
        }
        None => (fwd.output, None),
    };
    let y = model.apply_graph(&mut g, x, noise)?;
    let y_un = g.gather_rows(y, perm)?;
    let d_params = discriminator.bind(&mut g, false);
    let value = value_graph(&mut g, discriminator, &d_params, x, y, y_un, config.alpha)?;
    let (objective, penalty) = match penalty_graph(&mut g, x, spec)? {
        Some(p) => (g.sub(value, p)?, g.scalar(p)),
        None => (value, 0.0),
    };
    let objective = match restoring {
        Some(r) => g.sub(objective, r)?,
        None => objective,
    };
    let j = g.scalar(value);
    if !(j.is_finite() && penalty.is_finite()) {
        return Err(Error::NonFinite("generator objective".into()));
    }
    let mut grads = collect_grads(&g, objective, &fwd.params)?;
    if !all_finite(&grads) {
        return Err(Error::NonFinite("generator gradient".into()));
    }
    clip_grad_norm(&mut grads, config.grad_clip);
    adam.step(generator, &grads, true)?;
    Ok((j, penalty))
}

/// Source of paired `(x, y)` batches for discriminator-only training.
pub trait PairSource {
    fn sample_pairs(&self, m: usize, rng: &mut Rng) -> Result<(Tensor, Tensor)>;
}

/// Standard bivariate normal pairs with correlation `rho`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianPairs {
    pub rho: f64,
}

impl PairSource for GaussianPairs {
    fn sample_pairs(&self, m: usize, rng: &mut Rng) -> Result<(Tensor, Tensor)> {
        let s = (1.0 - self.rho * self.rho).sqrt();
        let mut xs = Vec::with_capacity(m);
        let mut ys = Vec::with_capacity(m);
        for _ in 0..m {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            xs.push(a);
            ys.push(self.rho * a + s * b);
        }
        Ok((Tensor::column(xs), Tensor::column(ys)))
    }
}

/// Inputs drawn from a fixed law and pushed through a channel.
pub struct FrozenInput<F> {
    pub model: ChannelModel,
    pub input: F,
}

impl<F> PairSource for FrozenInput<F>
where
    F: Fn(usize, &mut Rng) -> Tensor,
{
    fn sample_pairs(&self, m: usize, rng: &mut Rng) -> Result<(Tensor, Tensor)> {
        let x = (self.input)(m, rng);
        let y = crate::channels::channel_apply(&self.model, &x, rng)?;
        Ok((x, y))
    }
}

/// Trains only the discriminator on a fixed input law; `config.steps`
/// discriminator updates are made and every one is recorded in the trace.
pub fn train_discriminator(
    config: &TrainConfig,
    source: &impl PairSource,
    d_cfg: &MlpConfig,
) -> Result<(Mlp, CapacityTrace)> {
    config.validate()?;
    let mut streams = RunStreams::new(config.seed);
    let mut discriminator = Mlp::new(d_cfg.clone(), streams.discriminator_init)?;
    let mut adam = AdamState::new(&discriminator, config.discriminator_adam);
    let mut trace = CapacityTrace::new(config.alpha, config.capacity_window);
    for step in 0..config.steps {
        let (x, y) = source.sample_pairs(config.batch_size, &mut streams.channel)?;
        let perm = derange(config.batch_size, &mut streams.derangement)?;
        let j = discriminator_update(&mut discriminator, &mut adam, &x, &y, &perm, config.alpha, config.grad_clip)
            .map_err(|e| Error::Diverged { step, reason: e.to_string() })?;
        trace.push(step, j, 0.0);
    }
    Ok((discriminator, trace))
}

/// Capacity-style readout `J/α + 1 − ln α` of a trained discriminator on a
/// fresh batch of `m` pairs (an estimate of the mutual information).
pub fn estimate_mutual_information(
    discriminator: &impl BatchMap,
    source: &impl PairSource,
    m: usize,
    alpha: f64,
    rng: &mut Rng,
) -> Result<f64> {
    let (x, y) = source.sample_pairs(m, rng)?;
    let perm = derange(m, rng)?;
    let y_un = y.gather_rows(&perm)?;
    let j = discriminator_objective(discriminator, &x, &y, &y_un, alpha)?;
    Ok(estimate_capacity(j, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::PeakMode;
    use crate::nn::FnMap;
    use crate::rng::stream;

    #[test]
    fn generator_lr_decays_over_final_steps() {
        let mut c = TrainConfig::new(1);
        c.steps = 10;
        c.generator_adam.learning_rate = 0.3;
        assert!((0..10).all(|s| c.generator_lr_at(s) == 0.3));
        c.generator_anneal = 0.3;
        let lrs: Vec<f64> = (0..10).map(|s| c.generator_lr_at(s)).collect();
        assert_eq!(&lrs[..8], &[0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3]);
        assert!((lrs[8] - 0.2).abs() < 1e-15 && (lrs[9] - 0.1).abs() < 1e-15);
        c.generator_anneal = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn derangement_of_two_is_swap() {
        let mut rng = stream(1, "d");
        for _ in 0..20 {
            assert_eq!(derange(2, &mut rng).unwrap(), vec![1, 0]);
        }
    }

    #[test]
    fn derangement_has_no_fixed_points() {
        let mut rng = stream(2, "d");
        for m in 2..40 {
            for _ in 0..10 {
                let p = derange(m, &mut rng).unwrap();
                assert!(p.iter().enumerate().all(|(i, &v)| i != v));
                let mut s = p.clone();
                s.sort_unstable();
                assert_eq!(s, (0..m).collect::<Vec<_>>());
            }
        }
        assert!(derange(1, &mut rng).is_err());
        assert!(derange(0, &mut rng).is_err());
    }

    #[test]
    fn derangement_shift_is_uniform() {
        let mut rng = stream(3, "d");
        let mut counts = [0usize; 5];
        let n = 10_000;
        for _ in 0..n {
            let p = derange(5, &mut rng).unwrap();
            counts[p[0]] += 1;
        }
        assert_eq!(counts[0], 0);
        for &c in &counts[1..] {
            let f = c as f64 / n as f64;
            assert!((f - 0.25).abs() < 0.02, "{counts:?}");
        }
    }

    fn constant_critic(c: f64) -> FnMap<impl Fn(&Tensor) -> Result<Tensor>> {
        FnMap(move |t: &Tensor| Ok(Tensor::full(vec![t.rows(), 1], c)))
    }

    #[test]
    fn constant_discriminator_values() {
        let x = Tensor::column(vec![0.1, 0.2, 0.3]);
        let y = Tensor::column(vec![1.0, -1.0, 0.5]);
        let yu = y.gather_rows(&[1, 2, 0]).unwrap();
        for alpha in [0.5, 1.0, 2.0, 3.7] {
            let v = discriminator_objective(&constant_critic(alpha), &x, &y, &yu, alpha).unwrap();
            assert!((v - (alpha * alpha.ln() - alpha)).abs() < 1e-14);
        }
        let v = discriminator_objective(&constant_critic(1.0), &x, &y, &yu, 1.0).unwrap();
        assert_eq!(v, -1.0);
        assert!(discriminator_objective(&constant_critic(0.0), &x, &y, &yu, 1.0).is_err());
        assert!(discriminator_objective(&constant_critic(-1.0), &x, &y, &yu, 1.0).is_err());
    }

    #[test]
    fn capacity_readout() {
        assert_eq!(estimate_capacity(-1.0, 1.0), 0.0);
        for alpha in [0.1, 0.5, 1.0, 2.0, 10.0] {
            let c = 0.731;
            let j = alpha * (c + f64::ln(alpha) - 1.0);
            assert!((estimate_capacity(j, alpha) - c).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_window_mean() {
        let mut t = CapacityTrace::new(1.0, 2);
        assert!(t.final_capacity().is_nan());
        t.push(0, -1.0, 0.0);
        t.push(1, -0.5, 0.0);
        t.push(2, -0.7, 0.0);
        assert!((t.final_capacity() - 0.4).abs() < 1e-12);
        for r in &t.records {
            assert_eq!(r.capacity, r.value / t.alpha + 1.0 - t.alpha.ln());
        }
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::new(1);
        assert!(c.validate().is_ok());
        c.alpha = 0.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::new(1);
        c.batch_size = 1;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::new(1);
        c.disc_steps = 0;
        assert!(c.validate().is_err());
    }

    fn identity_map() -> FnMap<impl Fn(&Tensor) -> Result<Tensor>> {
        FnMap(|t: &Tensor| Ok(t.clone()))
    }

    #[test]
    fn unconstrained_generator_objective_reduces_to_value_function() {
        let model = ChannelModel::awgn(1).unwrap();
        let d = FnMap(|t: &Tensor| Ok(t.map(|v| 1.0 + 0.1 * v.tanh()).column_values(0).into_iter().collect::<Vec<_>>()).map(Tensor::column));
        let z = Tensor::column((0..64).map(|i| (i as f64 * 0.37).sin()).collect());
        let mut r1 = stream(4, "g");
        let got = generator_objective(&identity_map(), &d, &model, &z, 1.0, &ConstraintSpec::none(), &mut r1).unwrap();
        let mut r2 = stream(4, "g");
        let noise = model.sample_noise(64, &mut r2);
        let y = model.apply_noise(&z, &noise).unwrap();
        let perm = derange(64, &mut r2).unwrap();
        let expect = discriminator_objective(&d, &z, &y, &y.gather_rows(&perm).unwrap(), 1.0).unwrap();
        assert_eq!(got, expect);
    }

    #[test]
    fn peak_violation_lowers_objective_by_delta() {
        let model = ChannelModel::awgn(1).unwrap();
        let d = constant_critic(1.3);
        // every sample has x² = A² + δ
        let a: f64 = 1.0;
        let delta = 0.44;
        let x = (a * a + delta).sqrt();
        let z = Tensor::column(vec![x; 16]);
        let spec = ConstraintSpec::peak(a, PeakMode::Penalty);
        let with = generator_objective(&identity_map(), &d, &model, &z, 1.0, &spec, &mut stream(5, "g")).unwrap();
        let without =
            generator_objective(&identity_map(), &d, &model, &z, 1.0, &ConstraintSpec::none(), &mut stream(5, "g")).unwrap();
        assert!((without - with - delta).abs() < 1e-12);
    }

    #[test]
    fn taped_generator_value_matches_plain_evaluation() {
        let model = ChannelModel::awgn(1).unwrap();
        let gen = Mlp::new(MlpConfig::generator(1, 1, crate::nn::OutputActivation::Identity), 1).unwrap();
        let disc = Mlp::new(MlpConfig::discriminator(1, 1), 2).unwrap();
        let spec = ConstraintSpec::peak(0.5, PeakMode::Penalty);
        let z = sample_latent(32, 1, &mut stream(6, "z"));
        let mut rng = stream(7, "c");
        let plain = generator_objective(&gen, &disc, &model, &z, 1.5, &spec, &mut rng).unwrap();

        let mut rng = stream(7, "c");
        let noise = model.sample_noise(32, &mut rng);
        let perm = derange(32, &mut rng).unwrap();
        let mut cfg = TrainConfig::new(1);
        cfg.alpha = 1.5;
        let mut g2 = gen.clone();
        let mut adam = AdamState::new(&g2, AdamConfig::new(1e-12));
        let (j, pen) = generator_update(&mut g2, &mut adam, &disc, &model, &spec, &z, &noise, &perm, &cfg).unwrap();
        assert!((j - pen - plain).abs() < 1e-12, "{} vs {}", j - pen, plain);
    }
}
