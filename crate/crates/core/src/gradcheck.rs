//! Finite-difference verification of taped gradients.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, MlpConfig, OutputActivation};
use crate::rng::stream;
use crate::tensor::Tensor;

/// Compares backward-pass gradients of `loss_fn` against central differences.
///
/// `loss_fn` must record a forward pass of the given network (typically via
/// [`Mlp::forward`]) and return the scalar loss together with the parameter
/// leaves in [`Mlp::parameters`] order. The result is
/// `max |analytic − numeric| / (|numeric| + 1e-12)` over every parameter entry.
pub fn finite_diff_check<F>(mlp: &Mlp, loss_fn: F, step: f64) -> Result<f64>
where
    F: Fn(&Mlp, &mut Graph) -> Result<(Var, Vec<Var>)>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {step}")));
    }
    let mut g = Graph::new();
    let (loss, params) = loss_fn(mlp, &mut g)?;
    let grads = g.backward(loss)?;
    let n_params = mlp.parameters().len();
    if params.len() != n_params {
        return Err(Error::Shape(format!(
            "loss function exposed {} parameter leaves, network has {}",
            params.len(),
            n_params
        )));
    }
    let analytic: Vec<_> = params.iter().map(|&p| grads.get_or_zeros(p)).collect();

    let eval = |net: &Mlp| -> Result<f64> {
        let mut g = Graph::new();
        let (loss, _) = loss_fn(net, &mut g)?;
        Ok(g.scalar(loss))
    };

    let mut probe = mlp.clone();
    let mut worst = 0.0f64;
    for (pi, a) in analytic.iter().enumerate() {
        for k in 0..a.len() {
            let orig = probe.parameters()[pi].data()[k];
            let mut at = |offset: f64| -> Result<f64> {
                probe.parameters_mut()[pi].data_mut()[k] = orig + offset;
                eval(&probe)
            };
            // fourth-order central stencil
            let (u1, d1, u2, d2) = (at(step)?, at(-step)?, at(2.0 * step)?, at(-2.0 * step)?);
            probe.parameters_mut()[pi].data_mut()[k] = orig;
            let numeric = (8.0 * (u1 - d1) - (u2 - d2)) / (12.0 * step);
            let rel = (a.data()[k] - numeric).abs() / (numeric.abs() + 1e-12);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// Outcome of one randomized gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCase {
    pub config: MlpConfig,
    pub batch: usize,
    pub step: f64,
    pub error: f64,
}

/// Finite-difference step used by [`random_architecture_suite`].
pub fn suite_step(act: Activation) -> f64 {
    match act {
        Activation::Relu => 1e-4,
        Activation::Tanh => 1e-3,
    }
}

/// ReLU instances are redrawn until every hidden pre-activation is at least
/// this far from the kink, well beyond what a ReLU step can move it.
pub const KINK_MARGIN: f64 = 0.01;
const MAX_REDRAWS: usize = 1000;

fn min_hidden_preactivation(mlp: &Mlp, x: &Tensor) -> f64 {
    let layers = mlp.layers();
    let mut h: Vec<Vec<f64>> = (0..x.rows()).map(|i| (0..x.cols()).map(|j| x.get(i, j)).collect()).collect();
    let mut closest = f64::INFINITY;
    for layer in &layers[..layers.len() - 1] {
        let (w, b) = (&layer.weight, layer.bias.data());
        h = h
            .iter()
            .map(|row| {
                (0..w.cols())
                    .map(|o| {
                        let z = b[o] + row.iter().enumerate().map(|(i, v)| v * w.get(i, o)).sum::<f64>();
                        closest = closest.min(z.abs());
                        z.max(0.0)
                    })
                    .collect()
            })
            .collect();
    }
    closest
}

/// Checks `count` random architectures with the given hidden activation:
/// 1–3 hidden layers of width 2–8, 1–4 inputs, 1–3 outputs, a random output
/// head and a squared loss against a random target. Parameters are jittered
/// off their initialization so the check runs at a generic point, and ReLU
/// instances sit at least [`KINK_MARGIN`] away from every kink.
pub fn random_architecture_suite(act: Activation, count: usize, seed: u64) -> Result<Vec<GradCase>> {
    let mut rng = stream(seed, "gradcheck");
    let step = suite_step(act);
    let mut cases = Vec::with_capacity(count);
    for _ in 0..count {
        let input = rng.random_range(1..=4);
        let output = rng.random_range(1..=3);
        let depth = rng.random_range(1..=3);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(2..=8)).collect();
        let head = match rng.random_range(0..4) {
            0 => OutputActivation::Identity,
            1 => OutputActivation::Softplus,
            2 => OutputActivation::Sigmoid,
            _ => OutputActivation::TanhScaled(2.0),
        };
        let config = MlpConfig::new(input, hidden, output).with_hidden_activation(act).with_output_activation(head);
        let base = Mlp::new(config.clone(), rng.random())?;
        let batch = rng.random_range(3..=6);
        let mut redraws = 0;
        let (mlp, x, t) = loop {
            let mut normal = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
            // jitter off the initialization: zero biases leave dead-row units on the kink
            let mut mlp = base.clone();
            for p in mlp.parameters_mut() {
                let noise = normal(p.len());
                for (v, e) in p.data_mut().iter_mut().zip(noise) {
                    *v += 0.1 * e;
                }
            }
            let x = Tensor::matrix(batch, input, normal(batch * input))?;
            let t = Tensor::matrix(batch, output, normal(batch * output))?;
            if act != Activation::Relu || min_hidden_preactivation(&mlp, &x) >= KINK_MARGIN {
                break (mlp, x, t);
            }
            redraws += 1;
            if redraws == MAX_REDRAWS {
                return Err(Error::InvalidArgument("no kink-free ReLU instance found".into()));
            }
        };
        let loss = |net: &Mlp, g: &mut Graph| -> Result<(Var, Vec<Var>)> {
            let xv = g.constant(x.clone());
            let f = net.forward(g, xv)?;
            let tv = g.constant(t.clone());
            let d = g.sub(f.output, tv)?;
            let sq = g.square(d);
            Ok((g.mean(sq), f.params))
        };
        let error = finite_diff_check(&mlp, loss, step)?;
        cases.push(GradCase { config, batch, step, error });
    }
    Ok(cases)
}
