use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use cortical::analysis::emit::{
    bifurcation_svg, capacity_svg, pmf_csv, pmf_svg, scatter_svg, sweep_csv, trace_csv, trace_svg, write_text,
};
use cortical::analysis::{bifurcation_sweep, Pmf};
use cortical::baselines::{self, BaResult, BA_MAX_ITER, BA_TOL};
use cortical::experiment::{gaussian_mi_estimate, rayleigh_amplitude, Analysis, ExperimentKind};
use cortical::gradcheck::random_architecture_suite;
use cortical::nn::Activation;
use cortical::trainer::TrainConfig;

use crate::config::{ExperimentConfig, Settings};
use crate::error::CliError;

const BITS_PER_NAT: f64 = std::f64::consts::LOG2_E;
/// Points drawn in scatter plots.
const SCATTER_LIMIT: usize = 2000;
/// Worst relative gradient error accepted by `check grad`.
const GRAD_THRESHOLD: f64 = 1e-4;
const DEFAULT_GRAD_CASES: usize = 20;
/// Relative tolerance of `check discriminator`, absolute at `rho = 0`.
const MI_REL_TOL: f64 = 0.05;
const MI_ABS_TOL: f64 = 0.01;
const DEFAULT_RHOS: [f64; 3] = [0.0, 0.5, 0.9];

/// Contents of `summary.json`. Everything except `wall_time_seconds` is a
/// deterministic function of the settings.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub parameters: BTreeMap<String, f64>,
    pub seed: u64,
    pub steps: usize,
    pub batch_size: usize,
    pub alpha: f64,
    pub capacity_nats: f64,
    pub capacity_bits: f64,
    pub bits_per_nat: f64,
    pub final_penalty: f64,
    pub reference_nats: Option<f64>,
    pub reference_bits: Option<f64>,
    pub shannon_bits: Option<f64>,
    pub mckellips_bits: Option<f64>,
    /// Atoms of the reported law (magnitude atoms for 2-D inputs).
    pub atoms: usize,
    pub support: Vec<f64>,
    pub mass: Vec<f64>,
    /// Space of `support`: `x`, `U` (Rayleigh amplitude) or `|Hx|`.
    pub support_space: String,
    pub ks_statistic: Option<f64>,
    pub ks_critical_1pct: Option<f64>,
    pub phase_ks_statistic: Option<f64>,
    pub phase_ks_critical_5pct: Option<f64>,
    pub clusters: Option<usize>,
    pub wall_time_seconds: f64,
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    Ok(write_text(&dir.join(name), text)?)
}

fn parameters(cfg: &ExperimentConfig) -> BTreeMap<String, f64> {
    let p = &cfg.experiment.params;
    cfg.experiment
        .kind
        .parameters()
        .iter()
        .map(|&k| {
            let v = match k {
                "A" => p.a,
                "d" => p.d as f64,
                "gamma" => p.gamma,
                "r2" => p.r2,
                _ => p.budget,
            };
            (k.to_string(), v)
        })
        .collect()
}

pub fn run(settings: &Settings) -> Result<(), CliError> {
    let cfg = ExperimentConfig::from_settings(settings, false)?;
    let exp = &cfg.experiment;
    create_dir(&cfg.out)?;
    let start = Instant::now();
    let result = exp.run()?;
    let reference = if cfg.reference { exp.reference_capacity()? } else { None };
    let bounds = exp.bounds_bits()?;

    write(&cfg.out, "trace.csv", &trace_csv(&result.trace))?;
    write(&cfg.out, "trace.svg", &trace_svg(&result.trace))?;

    let mut summary = Summary {
        experiment: exp.kind.name().to_string(),
        parameters: parameters(&cfg),
        seed: cfg.seed,
        steps: exp.train.steps,
        batch_size: exp.train.batch_size,
        alpha: exp.train.alpha,
        capacity_nats: result.capacity,
        capacity_bits: result.capacity * BITS_PER_NAT,
        bits_per_nat: BITS_PER_NAT,
        final_penalty: result.trace.final_penalty(),
        reference_nats: reference,
        reference_bits: reference.map(|c| c * BITS_PER_NAT),
        shannon_bits: bounds.map(|b| b.0),
        mckellips_bits: bounds.and_then(|b| b.1),
        atoms: result.analysis.atoms(),
        support: Vec::new(),
        mass: Vec::new(),
        support_space: "x".into(),
        ks_statistic: None,
        ks_critical_1pct: None,
        phase_ks_statistic: None,
        phase_ks_critical_5pct: None,
        clusters: None,
        wall_time_seconds: 0.0,
    };

    match &result.analysis {
        Analysis::Scalar { pmf, ks } => {
            let (reported, space): (Pmf, &str) = if exp.kind == ExperimentKind::Rayleigh {
                (pmf.map_support(rayleigh_amplitude)?, "U")
            } else {
                (pmf.clone(), "x")
            };
            write(&cfg.out, "pmf.csv", &pmf_csv(&reported))?;
            write(&cfg.out, "pmf.svg", &pmf_svg(&reported, space))?;
            summary.support = reported.support().to_vec();
            summary.mass = reported.mass().to_vec();
            summary.support_space = space.into();
            summary.atoms = reported.len();
            summary.ks_statistic = ks.map(|k| k.statistic);
            summary.ks_critical_1pct = ks.map(|k| k.critical_1pct);
        }
        Analysis::Planar { radial, clusters } => {
            write(&cfg.out, "radial.csv", &pmf_csv(&radial.magnitude))?;
            write(&cfg.out, "pmf.svg", &pmf_svg(&radial.magnitude, "|Hx|"))?;
            let mut text = String::from("x1,x2,mass\n");
            for c in clusters {
                let _ = writeln!(text, "{:.16e},{:.16e},{:.16e}", c.center[0], c.center[1], c.mass);
            }
            write(&cfg.out, "clusters.csv", &text)?;
            let pts: Vec<[f64; 2]> = (0..result.samples.rows())
                .map(|i| [result.samples.get(i, 0), result.samples.get(i, 1)])
                .collect();
            write(&cfg.out, "scatter.svg", &scatter_svg(&pts, SCATTER_LIMIT))?;
            summary.support = radial.magnitude.support().to_vec();
            summary.mass = radial.magnitude.mass().to_vec();
            summary.support_space = if exp.kind == ExperimentKind::MimoPeak { "|Hx|" } else { "|x|" }.into();
            summary.phase_ks_statistic = Some(radial.phase.statistic);
            summary.phase_ks_critical_5pct = Some(radial.phase.critical_5pct);
            summary.clusters = Some(clusters.len());
        }
    }
    summary.wall_time_seconds = start.elapsed().as_secs_f64();
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
    write(&cfg.out, "summary.json", &(json + "\n"))?;

    println!("experiment  {}", summary.experiment);
    println!("capacity    {:.5} nats  ({:.5} bits)", summary.capacity_nats, summary.capacity_bits);
    if let Some(r) = reference {
        println!("reference   {r:.5} nats");
    }
    if let Some((s, m)) = bounds {
        print!("bounds      shannon {s:.5} bits");
        if let Some(m) = m {
            print!(", mckellips {m:.5} bits");
        }
        println!();
    }
    println!("atoms       {} in {}", summary.atoms, summary.support_space);
    for (s, m) in summary.support.iter().zip(&summary.mass) {
        println!("            {s:+.4}  {m:.4}");
    }
    if let (Some(k), Some(c)) = (summary.ks_statistic, summary.ks_critical_1pct) {
        println!("ks          {k:.5} (1% critical {c:.5})");
    }
    if let Some(n) = summary.clusters {
        println!("clusters    {n}");
    }
    println!("artifacts   {}", cfg.out.display());
    Ok(())
}

pub fn sweep(settings: &Settings) -> Result<(), CliError> {
    let cfg = ExperimentConfig::from_settings(settings, true)?;
    let grid = cfg.grid.as_deref().unwrap_or_default();
    create_dir(&cfg.out)?;
    let result = bifurcation_sweep(grid, &cfg.experiment, cfg.threads)?;
    write(&cfg.out, "sweep.csv", &sweep_csv(&result))?;
    write(&cfg.out, "bifurcation.svg", &bifurcation_svg(&result))?;
    write(&cfg.out, "capacity.svg", &capacity_svg(&result))?;
    println!("{:>6} {:>10} {:>10} {:>10} {:>10} {:>6}", "A", "nats", "bits", "shannon", "mckellips", "atoms");
    for r in result.rows() {
        println!(
            "{:>6.3} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>6}",
            r.a, r.capacity_nats, r.capacity_bits, r.shannon_bits, r.mckellips_bits, r.n_atoms
        );
    }
    for p in &result.points {
        if let Some(e) = &p.error {
            eprintln!("warning: point A={} failed: {e}", p.a);
        }
    }
    println!("artifacts   {}", cfg.out.display());
    Ok(())
}

fn ba_csv(ch_inputs: &[f64], r: &BaResult) -> String {
    let mut text = String::from("input,mass\n");
    for (x, p) in ch_inputs.iter().zip(&r.pmf) {
        let _ = writeln!(text, "{x:.16e},{p:.16e}");
    }
    text
}

pub fn baseline_ba(settings: &Settings) -> Result<(), CliError> {
    settings.at_most_positional(1)?;
    let channel = match (settings.get("channel"), settings.positional.first()) {
        (Some(c), _) => c.to_string(),
        (None, Some(c)) => c.clone(),
        (None, None) => return Err(CliError::Config("no channel given (key 'channel')".into())),
    };
    let keys: &[&str] = match channel.as_str() {
        "bsc" => &["p"],
        "noiseless" => &["n"],
        "awgn-peak" => &["A"],
        "cauchy-peak" => &["A", "gamma"],
        "rayleigh" => &["a"],
        "mimo-peak" | "cauchy-log" => {
            return Err(CliError::Config(format!("no discretized oracle for channel '{channel}'")));
        }
        other => return Err(CliError::Config(format!("unknown channel '{other}'"))),
    };
    let mut allowed = vec!["channel", "tol", "max_iter", "out"];
    allowed.extend(keys);
    settings.allow_only(&allowed, &format!("baseline ba {channel}"))?;
    let tol = settings.parse("tol")?.unwrap_or(BA_TOL);
    let max_iter = settings.parse("max_iter")?.unwrap_or(BA_MAX_ITER);
    let a: f64 = settings.parse("A")?.unwrap_or(1.0);
    let gamma: f64 = settings.parse("gamma")?.unwrap_or(1.0);

    let (ch, result) = match channel.as_str() {
        "bsc" => {
            let ch = baselines::binary_symmetric(settings.parse("p")?.unwrap_or(0.1))?;
            let r = baselines::blahut_arimoto(&ch, tol, max_iter)?;
            (ch, r)
        }
        "noiseless" => {
            let ch = baselines::noiseless(settings.parse("n")?.unwrap_or(4))?;
            let r = baselines::blahut_arimoto(&ch, tol, max_iter)?;
            (ch, r)
        }
        "awgn-peak" => {
            let ch = baselines::awgn_peak_channel(a)?;
            let r = baselines::blahut_arimoto(&ch, tol, max_iter)?;
            (ch, r)
        }
        "cauchy-peak" => {
            let ch = baselines::cauchy_peak_channel(a, gamma)?;
            let r = baselines::blahut_arimoto(&ch, tol, max_iter)?;
            (ch, r)
        }
        _ => {
            let (ch, costs) = baselines::rayleigh_channel()?;
            let budget = settings.parse("a")?.unwrap_or(1.0);
            let r = baselines::blahut_arimoto_constrained(&ch, &costs, budget, tol, max_iter)?;
            (ch, r)
        }
    };
    println!("channel     {channel}");
    println!("capacity    {:.6} nats  ({:.6} bits)", result.capacity, result.capacity * BITS_PER_NAT);
    println!("upper       {:.6} nats", result.upper);
    println!("iterations  {} (converged: {})", result.iterations, result.converged);
    if let Some(out) = settings.get("out") {
        let dir = Path::new(out);
        create_dir(dir)?;
        write(dir, "ba.csv", &ba_csv(ch.input_grid(), &result))?;
    }
    Ok(())
}

pub fn baseline_bounds(settings: &Settings) -> Result<(), CliError> {
    settings.at_most_positional(0)?;
    settings.allow_only(&["A", "d"], "baseline bounds")?;
    let a = settings.parse("A")?.unwrap_or(1.0);
    let d = settings.parse("d")?.unwrap_or(1);
    let shannon = baselines::shannon_awgn_bound(a, d)?;
    println!("shannon     {shannon:.6} bits");
    if d == 1 {
        println!("mckellips   {:.6} bits", baselines::mckellips_bound(a)?);
    }
    Ok(())
}

pub fn check_grad(settings: &Settings) -> Result<(), CliError> {
    settings.at_most_positional(0)?;
    settings.allow_only(&["count", "seed"], "check grad")?;
    let count = settings.parse("count")?.unwrap_or(DEFAULT_GRAD_CASES);
    let seed = settings.parse("seed")?.unwrap_or(crate::config::DEFAULT_SEED);
    let mut failures = Vec::new();
    for act in [Activation::Relu, Activation::Tanh] {
        let cases = random_architecture_suite(act, count, seed)?;
        let worst = cases.iter().map(|c| c.error).fold(0.0, f64::max);
        println!("{act:?}: {count} architectures, worst relative error {worst:.3e}");
        for c in cases.iter().filter(|c| !(c.error < GRAD_THRESHOLD)) {
            failures.push(format!("{act:?} widths {:?} batch {}: {:.3e}", c.config.widths(), c.batch, c.error));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failures.join("; ")))
    }
}

pub fn check_discriminator(settings: &Settings) -> Result<(), CliError> {
    settings.at_most_positional(0)?;
    settings.allow_only(&["rho", "steps", "batch_size", "seed", "discriminator_lr"], "check discriminator")?;
    let rhos = match settings.parse::<f64>("rho")? {
        Some(r) => vec![r],
        None => DEFAULT_RHOS.to_vec(),
    };
    let mut train = TrainConfig::new(1);
    train.seed = settings.parse("seed")?.unwrap_or(crate::config::DEFAULT_SEED);
    if let Some(v) = settings.parse("steps")? {
        train.steps = v;
    }
    if let Some(v) = settings.parse("batch_size")? {
        train.batch_size = v;
    }
    if let Some(v) = settings.parse("discriminator_lr")? {
        train.discriminator_adam.learning_rate = v;
    }
    let mut failures = Vec::new();
    for rho in rhos {
        let truth = baselines::gaussian_mi_analytic(rho)?;
        let estimate = gaussian_mi_estimate(rho, &train)?;
        let tol = if truth == 0.0 { MI_ABS_TOL } else { MI_REL_TOL * truth };
        let ok = (estimate - truth).abs() <= tol;
        println!("rho {rho:.3}: estimate {estimate:.5} nats, analytic {truth:.5} nats, tolerance {tol:.5}");
        if !ok {
            failures.push(format!("rho {rho}: {estimate:.5} vs {truth:.5}"));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failures.join("; ")))
    }
}
