//! Feed-forward networks used as generator and discriminator.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputActivation {
    Identity,
    /// Strictly positive head, used for the discriminator.
    Softplus,
    Sigmoid,
    /// `scale · tanh(x)`.
    TanhScaled(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub output_dim: usize,
    pub hidden_activation: Activation,
    pub output_activation: OutputActivation,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden_layers: Vec<usize>, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_layers,
            output_dim,
            hidden_activation: Activation::Relu,
            output_activation: OutputActivation::Identity,
        }
    }

    pub fn with_hidden_activation(mut self, act: Activation) -> Self {
        self.hidden_activation = act;
        self
    }

    pub fn with_output_activation(mut self, act: OutputActivation) -> Self {
        self.output_activation = act;
        self
    }

    /// Default generator: two ReLU layers of 64 units.
    pub fn generator(latent_dim: usize, output_dim: usize, head: OutputActivation) -> Self {
        Self::new(latent_dim, vec![64, 64], output_dim).with_output_activation(head)
    }

    /// Default discriminator over concatenated `(x, y)`: two ReLU layers of
    /// 64 units and a softplus head.
    pub fn discriminator(input_dim: usize, output_dim: usize) -> Self {
        Self::new(input_dim + output_dim, vec![64, 64], 1)
            .with_output_activation(OutputActivation::Softplus)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config("input and output dims must be positive".into()));
        }
        if self.hidden_layers.is_empty() {
            return Err(Error::Config("at least one hidden layer is required".into()));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden widths must be at least 1".into()));
        }
        if let OutputActivation::TanhScaled(s) = self.output_activation {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("tanh output scale must be positive, got {s}")));
            }
        }
        Ok(())
    }

    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_layers.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden_layers);
        w.push(self.output_dim);
        w
    }
}

/// Dense layer `y = x W + b` with `W` stored as `[in × out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    config: MlpConfig,
    layers: Vec<Layer>,
}

/// Output of a recorded forward pass together with the parameter leaves.
#[derive(Debug, Clone)]
pub struct Forward {
    pub output: Var,
    /// `[w0, b0, w1, b1, …]`, empty when the network was frozen.
    pub params: Vec<Var>,
}

impl Mlp {
    /// Glorot-uniform weights (`±sqrt(6 / (fan_in + fan_out))`), zero biases.
    pub fn new(config: MlpConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = config.widths();
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
                let data = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
                Layer {
                    weight: Tensor::matrix(fan_in, fan_out, data).expect("consistent shape"),
                    bias: Tensor::zeros(vec![fan_out]),
                }
            })
            .collect();
        Ok(Self { config, layers })
    }

    /// Builds a network from explicit layers, checking that they chain.
    pub fn from_layers(config: MlpConfig, layers: Vec<Layer>) -> Result<Self> {
        config.validate()?;
        let widths = config.widths();
        if layers.len() != widths.len() - 1 {
            return Err(Error::Shape(format!(
                "{} layers for {} widths",
                layers.len(),
                widths.len()
            )));
        }
        for (l, w) in layers.iter().zip(widths.windows(2)) {
            if l.weight.shape() != [w[0], w[1]] || l.bias.shape() != [w[1]] {
                return Err(Error::Shape(format!(
                    "layer {:?}/{:?} does not match {}→{}",
                    l.weight.shape(),
                    l.bias.shape(),
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim
    }

    /// Parameters in `[w0, b0, w1, b1, …]` order.
    pub fn parameters(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    /// Records a forward pass with trainable parameters.
    pub fn forward(&self, g: &mut Graph, input: Var) -> Result<Forward> {
        let params = self.bind(g, true);
        let output = self.forward_bound(g, input, &params)?;
        Ok(Forward { output, params })
    }

    /// Records a forward pass with the parameters held constant, so gradients
    /// can flow through the network to its input without touching its weights.
    pub fn forward_frozen(&self, g: &mut Graph, input: Var) -> Result<Var> {
        let params = self.bind(g, false);
        self.forward_bound(g, input, &params)
    }

    /// Places the parameters on the tape, as trainable leaves or constants.
    /// Binding once and evaluating several batches with
    /// [`Mlp::forward_bound`] accumulates all their gradients on the same leaves.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Vec<Var> {
        self.parameters()
            .into_iter()
            .map(|p| if trainable { g.param(p.clone()) } else { g.constant(p.clone()) })
            .collect()
    }

    pub fn forward_bound(&self, g: &mut Graph, input: Var, params: &[Var]) -> Result<Var> {
        let in_shape = g.value(input).shape().to_vec();
        if in_shape.len() != 2 || in_shape[1] != self.config.input_dim {
            return Err(Error::Shape(format!(
                "batch of shape {:?} for input dim {}",
                in_shape, self.config.input_dim
            )));
        }
        if params.len() != 2 * self.layers.len() {
            return Err(Error::Shape(format!(
                "{} bound parameters for {} layers",
                params.len(),
                self.layers.len()
            )));
        }
        let mut h = input;
        let last = self.layers.len() - 1;
        for (i, wb) in params.chunks(2).enumerate() {
            let z = g.matmul(h, wb[0])?;
            let z = g.add_bias(z, wb[1])?;
            h = if i < last {
                match self.config.hidden_activation {
                    Activation::Relu => g.relu(z),
                    Activation::Tanh => g.tanh(z),
                }
            } else {
                match self.config.output_activation {
                    OutputActivation::Identity => z,
                    OutputActivation::Softplus => g.softplus(z),
                    OutputActivation::Sigmoid => g.sigmoid(z),
                    OutputActivation::TanhScaled(s) => g.scaled_tanh(z, s),
                }
            };
        }
        if !g.value(h).is_finite() {
            return Err(Error::NonFinite("network output".into()));
        }
        Ok(h)
    }

    /// Untaped evaluation of a `[m × input_dim]` batch.
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let x = g.constant(batch.clone());
        let out = self.forward_frozen(&mut g, x)?;
        Ok(g.value(out).clone())
    }
}

/// Anything that maps a batch of rows to a batch of rows.
pub trait BatchMap {
    fn map_batch(&self, batch: &Tensor) -> Result<Tensor>;
}

impl BatchMap for Mlp {
    fn map_batch(&self, batch: &Tensor) -> Result<Tensor> {
        self.predict(batch)
    }
}

/// Adapts a closure to [`BatchMap`].
pub struct FnMap<F>(pub F);

impl<F> BatchMap for FnMap<F>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    fn map_batch(&self, batch: &Tensor) -> Result<Tensor> {
        (self.0)(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_parameters() {
        let cfg = MlpConfig::new(1, vec![8], 1);
        let a = Mlp::new(cfg.clone(), 7).unwrap();
        let b = Mlp::new(cfg, 7).unwrap();
        for (p, q) in a.parameters().iter().zip(b.parameters()) {
            assert_eq!(p.data(), q.data());
        }
    }

    #[test]
    fn layer_shapes_chain() {
        let mlp = Mlp::new(MlpConfig::new(2, vec![16, 16], 1), 0).unwrap();
        let shapes: Vec<_> = mlp.parameters().iter().map(|p| p.shape().to_vec()).collect();
        assert_eq!(
            shapes,
            vec![vec![2, 16], vec![16], vec![16, 16], vec![16], vec![16, 1], vec![1]]
        );
    }

    #[test]
    fn invalid_configs() {
        assert!(Mlp::new(MlpConfig::new(1, vec![], 1), 0).is_err());
        assert!(Mlp::new(MlpConfig::new(1, vec![4, 0], 1), 0).is_err());
        assert!(Mlp::new(MlpConfig::new(0, vec![4], 1), 0).is_err());
    }

    #[test]
    fn initialization_within_glorot_limit() {
        let mlp = Mlp::new(MlpConfig::new(3, vec![10], 2), 11).unwrap();
        let limit0 = (6.0f64 / 13.0).sqrt();
        assert!(mlp.layers()[0].weight.data().iter().all(|w| w.abs() <= limit0));
        let limit1 = (6.0f64 / 12.0).sqrt();
        assert!(mlp.layers()[1].weight.data().iter().all(|w| w.abs() <= limit1));
    }

    #[test]
    fn zero_weights_give_bias_output() {
        let cfg = MlpConfig::new(2, vec![3], 2);
        let layers = vec![
            Layer {
                weight: Tensor::zeros(vec![2, 3]),
                bias: Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap(),
            },
            Layer {
                weight: Tensor::zeros(vec![3, 2]),
                bias: Tensor::new(vec![2], vec![0.25, -4.0]).unwrap(),
            },
        ];
        let mlp = Mlp::from_layers(cfg, layers).unwrap();
        let batch = Tensor::from_rows(&[vec![1.0, 2.0], vec![-3.0, 9.0], vec![0.0, 0.0]]).unwrap();
        let out = mlp.predict(&batch).unwrap();
        for r in 0..3 {
            assert_eq!(out.row(r), &[0.25, -4.0]);
        }
    }

    #[test]
    fn softplus_head_is_positive() {
        let cfg = MlpConfig::new(2, vec![16], 1).with_output_activation(OutputActivation::Softplus);
        let mlp = Mlp::new(cfg, 3).unwrap();
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 - 25.0, (i as f64).sin() * 10.0]).collect();
        let out = mlp.predict(&Tensor::from_rows(&rows).unwrap()).unwrap();
        assert!(out.data().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn batched_matches_row_by_row() {
        let cfg = MlpConfig::new(3, vec![7, 5], 2).with_hidden_activation(Activation::Tanh);
        let mlp = Mlp::new(cfg, 42).unwrap();
        let rows = vec![
            vec![0.1, -0.3, 2.0],
            vec![1.5, 0.0, -0.7],
            vec![-2.2, 0.4, 0.9],
            vec![0.0, 0.0, 0.0],
        ];
        let batched = mlp.predict(&Tensor::from_rows(&rows).unwrap()).unwrap();
        for (i, r) in rows.iter().enumerate() {
            let single = mlp.predict(&Tensor::from_rows(&[r.clone()]).unwrap()).unwrap();
            for (a, b) in batched.row(i).iter().zip(single.data()) {
                assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn rejects_wrong_batch_width() {
        let mlp = Mlp::new(MlpConfig::new(2, vec![4], 1), 0).unwrap();
        assert!(mlp.predict(&Tensor::zeros(vec![3, 3])).is_err());
    }
}
