use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Smallest sample count accepted by [`extract_pmf`].
pub const MIN_SAMPLES: usize = 1000;
/// Clusters lighter than this are dropped before renormalizing.
pub const MASS_FLOOR: f64 = 0.005;

/// A discrete law on sorted support points.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    support: Vec<f64>,
    mass: Vec<f64>,
}

impl Pmf {
    /// Validates sorted support, positive masses and unit total mass.
    pub fn new(support: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        if support.len() != mass.len() {
            return Err(Error::Shape(format!("{} support points, {} masses", support.len(), mass.len())));
        }
        if support.windows(2).any(|w| !(w[1] > w[0])) || support.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("support must be finite and strictly increasing".into()));
        }
        if mass.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::InvalidArgument("masses must be positive".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("masses sum to {total}")));
        }
        Ok(Self { support, mass })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Index of the support point nearest to `x`.
    pub fn nearest(&self, x: f64) -> Option<usize> {
        (0..self.len()).min_by(|&a, &b| {
            (self.support[a] - x).abs().total_cmp(&(self.support[b] - x).abs())
        })
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (s, m) in self.support.iter().zip(&self.mass) {
                    acc += m;
                    if u < acc {
                        return *s;
                    }
                }
                *self.support.last().expect("non-empty pmf")
            })
            .collect()
    }

    /// Pushes the law through `f`, merging points that collide.
    pub fn map_support(&self, f: impl Fn(f64) -> f64) -> Result<Pmf> {
        let mut pairs: Vec<(f64, f64)> = self.support.iter().map(|&s| f(s)).zip(self.mass.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut mass: Vec<f64> = Vec::with_capacity(pairs.len());
        for (s, m) in pairs {
            if support.last() == Some(&s) {
                *mass.last_mut().expect("parallel vectors") += m;
            } else {
                support.push(s);
                mass.push(m);
            }
        }
        Pmf::new(support, mass)
    }
}

/// `max(0.01·range, 0.05)`.
pub fn default_merge_tol(samples: &[f64]) -> f64 {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = if hi >= lo { hi - lo } else { 0.0 };
    (0.01 * range).max(0.05)
}

/// Single-linkage clustering of sorted samples: a gap wider than
/// `merge_tol` starts a new cluster. Each cluster becomes a support point at
/// its mean, weighted by its relative frequency; clusters under
/// [`MASS_FLOOR`] are discarded and the rest renormalized.
pub fn extract_pmf(samples: &[f64], merge_tol: f64) -> Result<Pmf> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "{} samples, at least {MIN_SAMPLES} needed",
            samples.len()
        )));
    }
    if !(merge_tol > 0.0 && merge_tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("merge tolerance must be positive, got {merge_tol}")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;

    let mut clusters: Vec<(f64, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i] - sorted[i - 1] > merge_tol {
            let members = &sorted[start..i];
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            clusters.push((mean, members.len()));
            start = i;
        }
    }
    let kept: Vec<(f64, f64)> = clusters
        .into_iter()
        .map(|(c, k)| (c, k as f64 / n))
        .filter(|&(_, m)| m >= MASS_FLOOR)
        .collect();
    if kept.is_empty() {
        return Err(Error::InvalidArgument("every cluster fell below the mass floor".into()));
    }
    let total: f64 = kept.iter().map(|p| p.1).sum();
    Pmf::new(kept.iter().map(|p| p.0).collect(), kept.iter().map(|p| p.1 / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn two_exact_atoms() {
        let mut s = vec![-1.0; 500];
        s.extend(vec![1.0; 500]);
        let p = extract_pmf(&s, 0.05).unwrap();
        assert_eq!(p.support(), &[-1.0, 1.0]);
        assert_eq!(p.mass(), &[0.5, 0.5]);
    }

    #[test]
    fn tight_gaussian_is_one_atom() {
        let mut rng = stream(1, "pmf");
        let d = Normal::new(0.0, 1e-4).unwrap();
        let s: Vec<f64> = (0..5000).map(|_| d.sample(&mut rng)).collect();
        let p = extract_pmf(&s, default_merge_tol(&s)).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p.support()[0].abs() < 1e-5);
        assert_eq!(p.mass(), &[1.0]);
    }

    #[test]
    fn light_clusters_dropped() {
        let mut s = vec![0.0; 1996];
        s.extend([5.0, 5.0, 5.0, 5.0]);
        let p = extract_pmf(&s, 0.1).unwrap();
        assert_eq!(p.support(), &[0.0]);
    }

    #[test]
    fn input_errors() {
        assert!(extract_pmf(&[], 0.1).is_err());
        assert!(extract_pmf(&[0.0; 999], 0.1).is_err());
        assert!(extract_pmf(&[0.0; 1000], 0.0).is_err());
        let mut s = vec![0.0; 1000];
        s[3] = f64::NAN;
        assert!(extract_pmf(&s, 0.1).is_err());
    }

    #[test]
    fn pmf_validation() {
        assert!(Pmf::new(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(Pmf::new(vec![0.0, 1.0], vec![0.6, 0.5]).is_err());
        assert!(Pmf::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(Pmf::new(vec![0.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn map_support_merges_collisions() {
        let p = Pmf::new(vec![-1.0, 0.0, 1.0], vec![0.25, 0.5, 0.25]).unwrap();
        let q = p.map_support(|x| x * x).unwrap();
        assert_eq!(q.support(), &[0.0, 1.0]);
        assert_eq!(q.mass(), &[0.5, 0.5]);
    }

    #[test]
    fn default_tolerance() {
        assert_eq!(default_merge_tol(&[0.0, 1.0]), 0.05);
        assert!((default_merge_tol(&[-5.0, 5.0]) - 0.1).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn scale_equivariance(c in 0.01f64..100.0, seed in 0u64..1000) {
            let mut rng = stream(seed, "scale");
            let base = Pmf::new(vec![-2.0, 0.5, 3.0], vec![0.3, 0.2, 0.5]).unwrap();
            let s = base.sample(2000, &mut rng);
            let p = extract_pmf(&s, 0.3).unwrap();
            let scaled: Vec<f64> = s.iter().map(|v| v * c).collect();
            let q = extract_pmf(&scaled, 0.3 * c).unwrap();
            prop_assert_eq!(p.len(), q.len());
            for (a, b) in p.support().iter().zip(q.support()) {
                prop_assert!((a * c - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
            for (a, b) in p.mass().iter().zip(q.mass()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn sampling_round_trip(
            gaps in proptest::collection::vec(0.5f64..3.0, 1..5),
            weights in proptest::collection::vec(0.05f64..1.0, 5),
            seed in 0u64..1000,
        ) {
            let mut support = vec![-1.0];
            for g in &gaps {
                let next = support.last().unwrap() + g;
                support.push(next);
            }
            let w = &weights[..support.len()];
            let total: f64 = w.iter().sum();
            let mass: Vec<f64> = w.iter().map(|x| x / total).collect();
            let truth = Pmf::new(support.clone(), mass.clone()).unwrap();
            let m = 4000;
            let s = truth.sample(m, &mut stream(seed, "rt"));
            let got = extract_pmf(&s, 0.1).unwrap();
            prop_assert_eq!(got.len(), truth.len());
            for (a, b) in got.support().iter().zip(truth.support()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in got.mass().iter().zip(truth.mass()) {
                prop_assert!((a - b).abs() < 3.0 / (m as f64).sqrt());
            }
        }
    }
}
