use std::thread;

use super::pmf::Pmf;
use crate::baselines::nats_to_bits;
use crate::error::{Error, Result};
use crate::experiment::{Analysis, Experiment};
use crate::rng::derive_indexed;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub a: f64,
    pub seed: u64,
    /// Trailing-window estimate in nats; NaN when the run failed.
    pub capacity: f64,
    pub shannon_bits: f64,
    pub mckellips_bits: f64,
    pub pmf: Option<Pmf>,
    pub error: Option<String>,
}

impl SweepPoint {
    pub fn n_atoms(&self) -> usize {
        self.pmf.as_ref().map_or(0, Pmf::len)
    }

    pub fn row(&self) -> SweepRow {
        SweepRow {
            a: self.a,
            capacity_nats: self.capacity,
            capacity_bits: nats_to_bits(self.capacity),
            shannon_bits: self.shannon_bits,
            mckellips_bits: self.mckellips_bits,
            n_atoms: self.n_atoms(),
        }
    }
}

/// One `sweep.csv` row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub a: f64,
    pub capacity_nats: f64,
    pub capacity_bits: f64,
    pub shannon_bits: f64,
    pub mckellips_bits: f64,
    pub n_atoms: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.points.iter().map(SweepPoint::row).collect()
    }
}

/// Seed of sweep point `index` under `master`.
pub fn point_seed(master: u64, index: usize) -> u64 {
    derive_indexed(master, "sweep-point", index as u64)
}

fn run_point(base: &Experiment, a: f64, seed: u64) -> SweepPoint {
    let mut point = SweepPoint {
        a,
        seed,
        capacity: f64::NAN,
        shannon_bits: f64::NAN,
        mckellips_bits: f64::NAN,
        pmf: None,
        error: None,
    };
    let outcome = (|| -> Result<(f64, Option<Pmf>, Option<(f64, Option<f64>)>)> {
        let mut exp = Experiment::new(base.kind, crate::experiment::ChannelParams { a, ..base.params })?;
        exp.train = base.train.clone();
        exp.train.seed = seed;
        let bounds = exp.bounds_bits()?;
        let r = exp.run()?;
        let pmf = match r.analysis {
            Analysis::Scalar { pmf, .. } => Some(pmf),
            Analysis::Planar { radial, .. } => Some(radial.magnitude),
        };
        Ok((r.capacity, pmf, bounds))
    })();
    match outcome {
        Ok((c, pmf, bounds)) => {
            point.capacity = c;
            point.pmf = pmf;
            if let Some((s, m)) = bounds {
                point.shannon_bits = s;
                point.mckellips_bits = m.unwrap_or(f64::NAN);
            }
        }
        Err(e) => {
            if let Ok(exp) = Experiment::new(base.kind, crate::experiment::ChannelParams { a, ..base.params }) {
                if let Ok(Some((s, m))) = exp.bounds_bits() {
                    point.shannon_bits = s;
                    point.mckellips_bits = m.unwrap_or(f64::NAN);
                }
            }
            point.error = Some(e.to_string());
        }
    }
    point
}

/// One training run per `A` with the settings of `base` and per-point seeds
/// derived from `base.train.seed`. Failed runs are recorded, not propagated.
/// Points are spread over `threads` workers; results keep grid order.
pub fn bifurcation_sweep(a_values: &[f64], base: &Experiment, threads: usize) -> Result<SweepResult> {
    if a_values.is_empty() {
        return Ok(SweepResult::default());
    }
    if a_values.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::Config("sweep values must be positive".into()));
    }
    if a_values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("sweep values must be strictly increasing".into()));
    }
    let master = base.train.seed;
    let threads = threads.clamp(1, a_values.len());
    let jobs: Vec<(usize, f64)> = a_values.iter().copied().enumerate().collect();
    let mut points: Vec<Option<SweepPoint>> = vec![None; jobs.len()];
    thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let mine: Vec<(usize, f64)> = jobs.iter().copied().skip(w).step_by(threads).collect();
                s.spawn(move || {
                    mine.into_iter().map(|(i, a)| (i, run_point(base, a, point_seed(master, i)))).collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, p) in h.join().expect("sweep worker panicked") {
                points[i] = Some(p);
            }
        }
    });
    Ok(SweepResult { points: points.into_iter().map(|p| p.expect("every point ran")).collect() })
}
