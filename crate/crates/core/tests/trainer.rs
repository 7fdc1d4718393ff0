use cortical::channels::{ChannelModel, ConstraintSpec, PeakMode};
use cortical::nn::{Mlp, MlpConfig, OutputActivation};
use cortical::rng::stream;
use cortical::trainer::{
    estimate_capacity, estimate_mutual_information, generate_inputs, sample_latent, train, train_discriminator,
    FrozenInput, TrainConfig,
};
use cortical::Tensor;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn short_config(seed: u64, alpha: f64) -> TrainConfig {
    let mut c = TrainConfig::new(1);
    c.steps = 30;
    c.disc_steps = 2;
    c.batch_size = 64;
    c.alpha = alpha;
    c.seed = seed;
    c.capacity_window = 10;
    c
}

fn awgn_setup(a: f64) -> (ChannelModel, ConstraintSpec, MlpConfig, MlpConfig) {
    (
        ChannelModel::awgn(1).unwrap(),
        ConstraintSpec::peak(a, PeakMode::Project),
        MlpConfig::generator(1, 1, OutputActivation::Identity),
        MlpConfig::discriminator(1, 1),
    )
}

#[test]
fn capacity_readout_identity_at_every_step() {
    let (model, spec, g, d) = awgn_setup(1.0);
    for alpha in [0.5, 1.0, 2.0] {
        let out = train(&short_config(3, alpha), &model, &spec, &g, &d).unwrap();
        assert_eq!(out.trace.records.len(), 30);
        for r in &out.trace.records {
            assert_eq!(r.capacity, r.value / alpha + 1.0 - alpha.ln());
            assert_eq!(r.capacity, estimate_capacity(r.value, alpha));
        }
    }
}

#[test]
fn identical_configs_give_identical_traces() {
    let (model, spec, g, d) = awgn_setup(1.5);
    let a = train(&short_config(11, 1.0), &model, &spec, &g, &d).unwrap();
    let b = train(&short_config(11, 1.0), &model, &spec, &g, &d).unwrap();
    let c = train(&short_config(12, 1.0), &model, &spec, &g, &d).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.generator.parameters(), b.generator.parameters());
    assert_ne!(a.trace, c.trace);
}

#[test]
fn trained_generator_stays_feasible() {
    let (model, spec, g, d) = awgn_setup(0.7);
    let out = train(&short_config(5, 1.0), &model, &spec, &g, &d).unwrap();
    let z = sample_latent(5000, 1, &mut stream(1, "check"));
    let x = generate_inputs(&out.generator, &z, &spec).unwrap();
    assert!(x.data().iter().all(|v| v.abs() <= 0.7));
    assert!(out.trace.records.iter().all(|r| r.penalty == 0.0));
}

#[test]
fn frozen_gaussian_input_recovers_awgn_information() {
    let source = FrozenInput {
        model: ChannelModel::awgn(1).unwrap(),
        input: |m: usize, rng: &mut cortical::rng::Rng| {
            Tensor::column((0..m).map(|_| StandardNormal.sample(rng)).collect())
        },
    };
    let mut c = TrainConfig::new(1);
    c.steps = 5000;
    c.seed = 2;
    let (disc, _) = train_discriminator(&c, &source, &MlpConfig::discriminator(1, 1)).unwrap();
    let mut rng = stream(2, "frozen-eval");
    let est = (0..10)
        .map(|_| estimate_mutual_information(&disc, &source, 10_000, 1.0, &mut rng).unwrap())
        .sum::<f64>()
        / 10.0;
    let truth = 0.5 * 2f64.ln();
    assert!((est - truth).abs() < 0.05 * truth, "{est} vs {truth}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projected_outputs_respect_the_peak(seed in 0u64..10_000, scale in 0.1f64..20.0, a in 0.1f64..3.0) {
        let mut g = Mlp::new(MlpConfig::generator(2, 2, OutputActivation::Identity), seed).unwrap();
        for p in g.parameters_mut() {
            for v in p.data_mut() {
                *v *= scale;
            }
        }
        let spec = ConstraintSpec::weighted_peak(a, vec![1.0, 3.0], PeakMode::Project);
        let z = sample_latent(256, 2, &mut stream(seed, "z"));
        let x = generate_inputs(&g, &z, &spec).unwrap();
        for i in 0..256 {
            let n = (x.get(i, 0).powi(2) + (3.0 * x.get(i, 1)).powi(2)).sqrt();
            prop_assert!(n <= a * (1.0 + 1e-12));
        }
    }
}
