use std::collections::HashMap;

use super::ks::{ks_statistic, uniform_phase_cdf, KsResult};
use super::pmf::{default_merge_tol, extract_pmf, Pmf, MASS_FLOOR, MIN_SAMPLES};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub magnitude: Pmf,
    pub phase: KsResult,
}

fn check_points(points: &Tensor) -> Result<()> {
    if points.shape().len() != 2 || points.cols() != 2 {
        return Err(Error::Shape(format!("expected m×2 points, got {:?}", points.shape())));
    }
    if points.rows() < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "{} points, at least {MIN_SAMPLES} needed",
            points.rows()
        )));
    }
    if !points.is_finite() {
        return Err(Error::NonFinite("points".into()));
    }
    Ok(())
}

/// Magnitude PMF and phase-uniformity KS statistic of 2-D points. With
/// `gains`, points are first scaled per axis (`Hx` for a diagonal `H`).
pub fn radial_profile(points: &Tensor, gains: Option<&[f64]>, merge_tol: Option<f64>) -> Result<RadialProfile> {
    check_points(points)?;
    let g = match gains {
        Some(g) if g.len() == 2 => [g[0], g[1]],
        Some(g) => return Err(Error::Shape(format!("{} gains for 2-D points", g.len()))),
        None => [1.0, 1.0],
    };
    let mut radii = Vec::with_capacity(points.rows());
    let mut phases = Vec::with_capacity(points.rows());
    for i in 0..points.rows() {
        let (a, b) = (g[0] * points.get(i, 0), g[1] * points.get(i, 1));
        radii.push(a.hypot(b));
        phases.push(b.atan2(a));
    }
    if radii.iter().all(|&r| r == 0.0) {
        return Err(Error::InvalidArgument("all points at the origin".into()));
    }
    let tol = merge_tol.unwrap_or_else(|| default_merge_tol(&radii));
    Ok(RadialProfile { magnitude: extract_pmf(&radii, tol)?, phase: ks_statistic(&phases, uniform_phase_cdf)? })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub center: [f64; 2],
    pub mass: f64,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage clustering of 2-D points at link distance `tol`. Clusters
/// under the mass floor are dropped and the rest renormalized; the result is
/// ordered by decreasing mass.
pub fn cluster_points(points: &Tensor, tol: f64) -> Result<Vec<Cluster>> {
    check_points(points)?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("link distance must be positive, got {tol}")));
    }
    let n = points.rows();
    let cell = |v: f64| (v / tol).floor() as i64;
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for i in 0..n {
        grid.entry((cell(points.get(i, 0)), cell(points.get(i, 1)))).or_default().push(i);
    }
    let mut parent: Vec<usize> = (0..n).collect();
    let tol2 = tol * tol;
    for i in 0..n {
        let (x, y) = (points.get(i, 0), points.get(i, 1));
        let (cx, cy) = (cell(x), cell(y));
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(members) = grid.get(&(cx + dx, cy + dy)) else { continue };
                for &j in members {
                    if j <= i {
                        continue;
                    }
                    let (ex, ey) = (points.get(j, 0) - x, points.get(j, 1) - y);
                    if ex * ex + ey * ey <= tol2 {
                        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                        if ri != rj {
                            parent[ri.max(rj)] = ri.min(rj);
                        }
                    }
                }
            }
        }
    }
    let mut sums: HashMap<usize, (f64, f64, usize)> = HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        let e = sums.entry(r).or_insert((0.0, 0.0, 0));
        e.0 += points.get(i, 0);
        e.1 += points.get(i, 1);
        e.2 += 1;
    }
    let mut clusters: Vec<Cluster> = sums
        .into_values()
        .map(|(sx, sy, k)| Cluster { center: [sx / k as f64, sy / k as f64], mass: k as f64 / n as f64 })
        .filter(|c| c.mass >= MASS_FLOOR)
        .collect();
    let total: f64 = clusters.iter().map(|c| c.mass).sum();
    clusters.iter_mut().for_each(|c| c.mass /= total);
    clusters.sort_by(|a, b| {
        b.mass
            .total_cmp(&a.mass)
            .then(a.center[0].total_cmp(&b.center[0]))
            .then(a.center[1].total_cmp(&b.center[1]))
    });
    Ok(clusters)
}
