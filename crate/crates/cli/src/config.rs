//! Settings from config files and command-line overrides.
//!
//! A config file holds one `key = value` per line; `#` starts a comment.
//! On the command line a setting is `key=value`, `--key value` or
//! `--key=value`, with dashes in `--key` read as underscores. Command-line
//! settings override file settings regardless of order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cortical::analysis::emit::read_text;
use cortical::experiment::{ChannelParams, Experiment, ExperimentKind};

use crate::error::CliError;

/// Keys shared by `run` and `sweep` that tune training.
pub const TRAIN_KEYS: [&str; 10] = [
    "steps",
    "disc_steps",
    "batch_size",
    "alpha",
    "latent_dim",
    "capacity_window",
    "generator_lr",
    "discriminator_lr",
    "grad_clip",
    "generator_anneal",
];

pub const DEFAULT_OUT: &str = "out";
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_GRID: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 2.5];

/// Ordered key/value settings with the positional words left over.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Settings {
    pub values: BTreeMap<String, String>,
    pub positional: Vec<String>,
}

impl Settings {
    /// Splits raw arguments into settings and positional words; positional
    /// words naming an existing file are loaded as config files.
    pub fn from_args(args: &[String]) -> Result<Self, CliError> {
        let mut cli = BTreeMap::new();
        let mut files = BTreeMap::new();
        let mut positional = Vec::new();
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            if let Some(flag) = arg.strip_prefix("--") {
                let (key, value) = match flag.split_once('=') {
                    Some((k, v)) => (k.to_string(), v.to_string()),
                    None => {
                        let v = it
                            .next()
                            .ok_or_else(|| CliError::Config(format!("option '--{flag}' needs a value")))?;
                        (flag.to_string(), v.clone())
                    }
                };
                cli.insert(key.replace('-', "_"), value);
            } else if let Some((k, v)) = arg.split_once('=') {
                cli.insert(k.trim().to_string(), v.trim().to_string());
            } else if Path::new(arg).is_file() {
                for (k, v) in parse_config(&read_text(Path::new(arg))?)? {
                    files.insert(k, v);
                }
            } else {
                positional.push(arg.clone());
            }
        }
        files.extend(cli);
        Ok(Self { values: files, positional })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| CliError::Config(format!("invalid value '{v}' for key '{key}'"))))
            .transpose()
    }

    /// Rejects any key outside `allowed`, naming the first offender.
    pub fn allow_only(&self, allowed: &[&str], context: &str) -> Result<(), CliError> {
        match self.values.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(CliError::Config(format!("unknown key '{k}' for {context}"))),
            None => Ok(()),
        }
    }

    /// Rejects positional words beyond the first `n`.
    pub fn at_most_positional(&self, n: usize) -> Result<(), CliError> {
        match self.positional.get(n) {
            Some(p) => Err(CliError::Config(format!("unexpected argument '{p}' (not a key=value or an existing file)"))),
            None => Ok(()),
        }
    }
}

/// Parses flat `key = value` text. Duplicate keys are rejected.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected 'key = value', got '{line}'", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(CliError::Config(format!("line {}: empty key or value", i + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key '{k}'", i + 1)));
        }
    }
    Ok(out)
}

/// Fully validated settings for `run` and `sweep`.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub out: PathBuf,
    pub seed: u64,
    /// Peak bounds for a sweep; `None` for single runs.
    pub grid: Option<Vec<f64>>,
    pub threads: usize,
    /// Whether `run` computes the numerical reference capacity.
    pub reference: bool,
}

fn experiment_kind(settings: &Settings) -> Result<ExperimentKind, CliError> {
    let from_key = settings.get("experiment");
    let from_pos = settings.positional.first().map(String::as_str);
    let name = match (from_key, from_pos) {
        (Some(k), Some(p)) if k != p => {
            return Err(CliError::Config(format!("experiment given twice: '{p}' and '{k}'")));
        }
        (Some(n), _) | (None, Some(n)) => n,
        (None, None) => return Err(CliError::Config("no experiment given (key 'experiment')".into())),
    };
    Ok(name.parse::<ExperimentKind>()?)
}

impl ExperimentConfig {
    pub fn from_settings(settings: &Settings, sweep: bool) -> Result<Self, CliError> {
        settings.at_most_positional(1)?;
        let kind = experiment_kind(settings)?;
        let context = if sweep { "sweep" } else { "run" };

        let params = kind.parameters();
        let mut allowed: Vec<&str> = vec!["experiment", "out", "seed"];
        allowed.extend(TRAIN_KEYS);
        if sweep {
            allowed.extend(["grid", "threads"]);
        } else {
            allowed.push("reference");
        }
        for key in settings.values.keys() {
            let all_params = ["A", "d", "gamma", "r2", "a"];
            if all_params.contains(&key.as_str()) {
                if !params.contains(&key.as_str()) {
                    return Err(CliError::Config(format!("key '{key}' does not apply to experiment {kind}")));
                }
                if sweep && key == "A" {
                    return Err(CliError::Config("key 'A' is set by 'grid' in a sweep".into()));
                }
            } else if !allowed.contains(&key.as_str()) {
                return Err(CliError::Config(format!("unknown key '{key}' for {context}")));
            }
        }
        if sweep && !params.contains(&"A") {
            return Err(CliError::Config(format!("experiment {kind} has no peak bound 'A' to sweep")));
        }

        let mut p = ChannelParams::default();
        if let Some(v) = settings.parse("A")? {
            p.a = v;
        }
        if let Some(v) = settings.parse("d")? {
            p.d = v;
        }
        if let Some(v) = settings.parse("gamma")? {
            p.gamma = v;
        }
        if let Some(v) = settings.parse("r2")? {
            p.r2 = v;
        }
        if let Some(v) = settings.parse("a")? {
            p.budget = v;
        }
        let grid = if sweep {
            let g = match settings.get("grid") {
                Some(text) => parse_grid(text)?,
                None => DEFAULT_GRID.to_vec(),
            };
            if let Some(&first) = g.first() {
                p.a = first;
            }
            Some(g)
        } else {
            None
        };
        let mut experiment = Experiment::new(kind, p)?;

        let seed = settings.parse("seed")?.unwrap_or(DEFAULT_SEED);
        let t = &mut experiment.train;
        t.seed = seed;
        if let Some(v) = settings.parse("steps")? {
            t.steps = v;
        }
        if let Some(v) = settings.parse("disc_steps")? {
            t.disc_steps = v;
        }
        if let Some(v) = settings.parse("batch_size")? {
            t.batch_size = v;
        }
        if let Some(v) = settings.parse("alpha")? {
            t.alpha = v;
        }
        if let Some(v) = settings.parse("latent_dim")? {
            t.latent_dim = v;
            experiment.generator.input_dim = v;
        }
        if let Some(v) = settings.parse("capacity_window")? {
            t.capacity_window = v;
        }
        if let Some(v) = settings.parse("generator_lr")? {
            t.generator_adam.learning_rate = v;
        }
        if let Some(v) = settings.parse("discriminator_lr")? {
            t.discriminator_adam.learning_rate = v;
        }
        if let Some(v) = settings.parse("grad_clip")? {
            t.grad_clip = v;
        }
        if let Some(v) = settings.parse("generator_anneal")? {
            t.generator_anneal = v;
        }
        experiment.train.validate()?;
        experiment.generator.validate()?;

        let threads = settings.parse("threads")?.unwrap_or(1);
        if threads == 0 {
            return Err(CliError::Config("key 'threads' must be at least 1".into()));
        }
        Ok(Self {
            experiment,
            out: settings.get("out").map_or_else(|| PathBuf::from(DEFAULT_OUT), PathBuf::from),
            seed,
            grid,
            threads,
            reference: settings.parse("reference")?.unwrap_or(true),
        })
    }
}

/// Comma-separated reals, e.g. `0.5,1.0,1.5`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("invalid value '{}' in key 'grid'", s.trim())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn config_text() {
        let text = "# header\nA = 2.5  # peak\n\nsteps=100\n";
        let m = parse_config(text).unwrap();
        assert_eq!(m.get("A").unwrap(), "2.5");
        assert_eq!(m.get("steps").unwrap(), "100");
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn config_errors_name_the_line() {
        let e = parse_config("A = 1\nbogus\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = parse_config("A = 1\nA = 2\n").unwrap_err();
        assert!(e.to_string().contains("duplicate key 'A'"), "{e}");
        assert!(parse_config("A =\n").is_err());
    }

    #[test]
    fn argument_forms() {
        let s = Settings::from_args(&args(&["awgn-peak", "A=2", "--steps", "10", "--out=dir", "--disc-steps", "3"]))
            .unwrap();
        assert_eq!(s.positional, vec!["awgn-peak"]);
        assert_eq!(s.get("A"), Some("2"));
        assert_eq!(s.get("steps"), Some("10"));
        assert_eq!(s.get("out"), Some("dir"));
        assert_eq!(s.get("disc_steps"), Some("3"));
        assert!(Settings::from_args(&args(&["--seed"])).is_err());
    }

    #[test]
    fn command_line_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.conf");
        std::fs::write(&path, "experiment = awgn-peak\nA = 1\nsteps = 5\n").unwrap();
        let p = path.to_str().unwrap();
        for order in [vec!["A=2", p], vec![p, "A=2"]] {
            let s = Settings::from_args(&args(&order)).unwrap();
            assert_eq!(s.get("A"), Some("2"));
            assert_eq!(s.get("steps"), Some("5"));
        }
    }

    #[test]
    fn experiment_config_applies_keys() {
        let s = Settings::from_args(&args(&["cauchy-log", "A=2", "gamma=0.5", "steps=7", "alpha=2", "--seed", "9"]))
            .unwrap();
        let c = ExperimentConfig::from_settings(&s, false).unwrap();
        assert_eq!(c.experiment.kind, ExperimentKind::CauchyLog);
        assert_eq!(c.experiment.params.a, 2.0);
        assert_eq!(c.experiment.params.gamma, 0.5);
        assert_eq!(c.experiment.train.steps, 7);
        assert_eq!(c.experiment.train.alpha, 2.0);
        assert_eq!(c.experiment.train.seed, 9);
        assert_eq!(c.seed, 9);
        assert_eq!(c.out, PathBuf::from(DEFAULT_OUT));
    }

    #[test]
    fn rejected_keys_are_named() {
        let cases: [(&[&str], &str); 6] = [
            (&["awgn-peak", "colour=red"], "'colour'"),
            (&["awgn-peak", "gamma=1"], "'gamma'"),
            (&["rayleigh", "A=1"], "'A'"),
            (&["awgn-peak", "steps=ten"], "'steps'"),
            (&["awgn-peak", "grid=1,2"], "'grid'"),
            (&["laser"], "laser"),
        ];
        for (list, needle) in cases {
            let s = Settings::from_args(&args(list)).unwrap();
            let e = ExperimentConfig::from_settings(&s, false).unwrap_err();
            assert!(e.to_string().contains(needle), "{list:?}: {e}");
            assert_eq!(e.exit_code(), 2);
        }
    }

    #[test]
    fn sweep_settings() {
        let s = Settings::from_args(&args(&["awgn-peak", "grid=0.5, 1.5", "threads=2"])).unwrap();
        let c = ExperimentConfig::from_settings(&s, true).unwrap();
        assert_eq!(c.grid, Some(vec![0.5, 1.5]));
        assert_eq!(c.threads, 2);
        let s = Settings::from_args(&args(&["awgn-peak", "A=1"])).unwrap();
        assert!(ExperimentConfig::from_settings(&s, true).is_err());
        let s = Settings::from_args(&args(&["rayleigh"])).unwrap();
        assert!(ExperimentConfig::from_settings(&s, true).is_err());
        let s = Settings::from_args(&args(&["awgn-peak"])).unwrap();
        assert_eq!(ExperimentConfig::from_settings(&s, true).unwrap().grid.unwrap(), DEFAULT_GRID.to_vec());
    }
}
