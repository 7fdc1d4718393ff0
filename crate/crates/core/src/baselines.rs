//! Reference capacities: Blahut–Arimoto on discretized channels, closed
//! forms and upper bounds.

use std::f64::consts::{E, LN_2, PI};

use crate::channels::{ChannelKind, ChannelModel};
use crate::error::{Error, Result};

/// A discrete memoryless channel with row-stochastic transition matrix
/// `transition[i * outputs + j] = p(y_j | x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedChannel {
    input_grid: Vec<f64>,
    output_grid: Vec<f64>,
    transition: Vec<f64>,
}

impl DiscretizedChannel {
    /// `output_grid` labels the output symbols (cell representatives for a
    /// discretized continuous channel).
    pub fn new(input_grid: Vec<f64>, output_grid: Vec<f64>, transition: Vec<f64>) -> Result<Self> {
        let (n, k) = (input_grid.len(), output_grid.len());
        if n == 0 || k == 0 {
            return Err(Error::InvalidArgument("empty channel alphabet".into()));
        }
        if transition.len() != n * k {
            return Err(Error::Shape(format!("transition has {} entries, expected {n}×{k}", transition.len())));
        }
        for (i, row) in transition.chunks(k).enumerate() {
            if row.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
                return Err(Error::InvalidArgument(format!("row {i} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { input_grid, output_grid, transition })
    }

    pub fn input_grid(&self) -> &[f64] {
        &self.input_grid
    }

    pub fn output_grid(&self) -> &[f64] {
        &self.output_grid
    }

    pub fn inputs(&self) -> usize {
        self.input_grid.len()
    }

    pub fn outputs(&self) -> usize {
        self.output_grid.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.outputs();
        &self.transition[i * k..(i + 1) * k]
    }
}

fn check_increasing(v: &[f64], what: &str) -> Result<()> {
    if v.windows(2).any(|w| !(w[1] > w[0])) || v.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument(format!("{what} must be strictly increasing")));
    }
    Ok(())
}

/// Discretizes a scalar channel. Output cell `j` is `(edges[j], edges[j+1]]`
/// except that the first and last cells extend to ±∞, folding the tails in.
/// Inputs rejected by `feasible` are dropped.
pub fn discretize_channel(
    model: &ChannelModel,
    input_grid: &[f64],
    output_edges: &[f64],
    feasible: impl Fn(f64) -> bool,
) -> Result<DiscretizedChannel> {
    match model.kind() {
        ChannelKind::Awgn if model.input_dim() == 1 => {}
        ChannelKind::Cauchy { .. } | ChannelKind::RayleighEquiv => {}
        other => return Err(Error::Unsupported(format!("no discretization for {other:?}"))),
    }
    check_increasing(input_grid, "input grid")?;
    check_increasing(output_edges, "output edges")?;
    if output_edges.len() < 2 {
        return Err(Error::InvalidArgument("need at least two output edges".into()));
    }
    let inputs: Vec<f64> = input_grid.iter().copied().filter(|&x| feasible(x)).collect();
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("no feasible input grid point".into()));
    }
    let cells = output_edges.len() - 1;
    let mut bounds: Vec<f64> = output_edges.to_vec();
    bounds[0] = f64::NEG_INFINITY;
    bounds[cells] = f64::INFINITY;
    let reps: Vec<f64> = output_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();

    let mut transition = Vec::with_capacity(inputs.len() * cells);
    for &x in &inputs {
        let start = transition.len();
        for j in 0..cells {
            transition.push(model.cell_probability(x, bounds[j], bounds[j + 1])?.max(0.0));
        }
        let row = &mut transition[start..];
        let s: f64 = row.iter().sum();
        if !(s > 0.0) {
            return Err(Error::NonFinite(format!("zero total mass for input {x}")));
        }
        row.iter_mut().for_each(|w| *w /= s);
    }
    DiscretizedChannel::new(inputs, reps, transition)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaResult {
    /// Lower end of the final capacity bracket, in nats.
    pub capacity: f64,
    /// Upper end of the final capacity bracket, in nats.
    pub upper: f64,
    pub pmf: Vec<f64>,
    pub iterations: usize,
    /// False when `max_iter` ran out before the bracket closed to `tol`.
    pub converged: bool,
    /// Lagrange multiplier of the cost constraint (0 when unconstrained).
    pub multiplier: f64,
}

/// Precomputed `Σ_j W_ij ln W_ij` per row.
fn row_neg_entropy(ch: &DiscretizedChannel) -> Vec<f64> {
    (0..ch.inputs())
        .map(|i| ch.row(i).iter().filter(|&&w| w > 0.0).map(|&w| w * w.ln()).sum())
        .collect()
}

/// Per-input divergences `D_i = KL(W_i ‖ q)` under the output law induced by `p`.
fn divergences(ch: &DiscretizedChannel, neg_h: &[f64], p: &[f64], d: &mut [f64]) {
    let k = ch.outputs();
    let mut q = vec![0.0; k];
    for (i, &pi) in p.iter().enumerate() {
        if pi > 0.0 {
            for (qj, &w) in q.iter_mut().zip(ch.row(i)) {
                *qj += pi * w;
            }
        }
    }
    let ln_q: Vec<f64> = q.iter().map(|&v| if v > 0.0 { v.ln() } else { 0.0 }).collect();
    for (i, di) in d.iter_mut().enumerate() {
        let cross: f64 = ch.row(i).iter().zip(&ln_q).map(|(&w, &l)| w * l).sum();
        *di = neg_h[i] - cross;
    }
}

/// `I(X;Y)` in nats for input law `p`.
pub fn mutual_information(ch: &DiscretizedChannel, p: &[f64]) -> Result<f64> {
    if p.len() != ch.inputs() {
        return Err(Error::Shape(format!("pmf has {} entries for {} inputs", p.len(), ch.inputs())));
    }
    let mut d = vec![0.0; ch.inputs()];
    divergences(ch, &row_neg_entropy(ch), p, &mut d);
    Ok(p.iter().zip(&d).map(|(a, b)| a * b).sum())
}

/// Cost-penalized BA at fixed multiplier `nu`, starting from `p`.
/// Returns (iterations, converged) and leaves `p` and `d` at the final state.
fn ba_inner(
    ch: &DiscretizedChannel,
    neg_h: &[f64],
    costs: &[f64],
    nu: f64,
    p: &mut [f64],
    d: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> (usize, bool) {
    // Over-relaxed updates p ∝ p·exp(μ·score) with μ grown while the
    // penalized objective keeps rising, and reset to the plain step otherwise.
    let mut mu = 1.0;
    let mut prev: Option<(Vec<f64>, f64)> = None;
    for it in 1..=max_iter {
        divergences(ch, neg_h, p, d);
        let score: Vec<f64> = d.iter().zip(costs).map(|(di, ci)| di - nu * ci).collect();
        let lower: f64 = p.iter().zip(&score).map(|(a, b)| a * b).sum();
        let upper = score.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if upper - lower < tol {
            return (it, true);
        }
        if let Some((prev_p, prev_lower)) = &prev {
            if mu > 1.0 && lower < *prev_lower {
                p.copy_from_slice(prev_p);
                mu = 1.0;
                prev = None;
                continue;
            }
        }
        prev = Some((p.to_vec(), lower));
        let mut z = 0.0;
        for (pi, s) in p.iter_mut().zip(&score) {
            *pi *= (mu * (s - upper)).exp();
            // a floor keeps every point revivable and clear of subnormals
            *pi = pi.max(1e-250);
            z += *pi;
        }
        p.iter_mut().for_each(|pi| *pi /= z);
        mu = (mu * 1.25).min(64.0);
    }
    divergences(ch, neg_h, p, d);
    (max_iter, false)
}

/// Blahut–Arimoto: iterates until `max D_i − Σ p_i D_i < tol`.
pub fn blahut_arimoto(ch: &DiscretizedChannel, tol: f64, max_iter: usize) -> Result<BaResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let n = ch.inputs();
    let neg_h = row_neg_entropy(ch);
    let mut p = vec![1.0 / n as f64; n];
    let mut d = vec![0.0; n];
    let costs = vec![0.0; n];
    let (iterations, converged) = ba_inner(ch, &neg_h, &costs, 0.0, &mut p, &mut d, tol, max_iter);
    let capacity = p.iter().zip(&d).map(|(a, b)| a * b).sum();
    let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(BaResult { capacity, upper, pmf: p, iterations, converged, multiplier: 0.0 })
}

/// Maximizes `I(X;Y) − ν·Σ p_i c_i` at a fixed multiplier `ν ≥ 0`.
pub fn blahut_arimoto_penalized(
    ch: &DiscretizedChannel,
    costs: &[f64],
    nu: f64,
    tol: f64,
    max_iter: usize,
) -> Result<BaResult> {
    let n = ch.inputs();
    if costs.len() != n {
        return Err(Error::Shape(format!("{} costs for {n} inputs", costs.len())));
    }
    if !(tol > 0.0) || !(nu >= 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive and multiplier non-negative".into()));
    }
    let neg_h = row_neg_entropy(ch);
    let mut p = vec![1.0 / n as f64; n];
    let mut d = vec![0.0; n];
    let (iterations, converged) = ba_inner(ch, &neg_h, costs, nu, &mut p, &mut d, tol, max_iter);
    let capacity = p.iter().zip(&d).map(|(a, b)| a * b).sum();
    let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(BaResult { capacity, upper, pmf: p, iterations, converged, multiplier: nu })
}

/// Capacity under an average cost `Σ p_i c_i ≤ budget`, by bisection on the
/// Lagrange multiplier of the cost-penalized BA.
pub fn blahut_arimoto_constrained(
    ch: &DiscretizedChannel,
    costs: &[f64],
    budget: f64,
    tol: f64,
    max_iter: usize,
) -> Result<BaResult> {
    let n = ch.inputs();
    if costs.len() != n {
        return Err(Error::Shape(format!("{} costs for {n} inputs", costs.len())));
    }
    if !(tol > 0.0) || !budget.is_finite() {
        return Err(Error::InvalidArgument("tolerance must be positive and budget finite".into()));
    }
    if costs.iter().copied().fold(f64::INFINITY, f64::min) > budget {
        return Err(Error::InvalidArgument(format!("no input meets cost budget {budget}")));
    }
    let neg_h = row_neg_entropy(ch);
    let mut p = vec![1.0 / n as f64; n];
    let mut d = vec![0.0; n];
    let mut total_iter = 0;
    let mean_cost = |p: &[f64]| p.iter().zip(costs).map(|(a, c)| a * c).sum::<f64>();

    // Every solve starts from the uniform law: warm starts inherit
    // near-zero masses that take many iterations to regrow.
    let mut solve = |nu: f64, tol: f64, p: &mut Vec<f64>, d: &mut Vec<f64>| {
        p.iter_mut().for_each(|v| *v = 1.0 / n as f64);
        let (it, ok) = ba_inner(ch, &neg_h, costs, nu, p, d, tol, max_iter);
        total_iter += it;
        ok
    };

    // The multiplier is located with a coarse inner tolerance; only the
    // final solve runs to `tol`.
    let coarse = (10.0 * tol).max(1e-4);
    let cost_tol = 1e-4 * (1.0 + budget.abs());
    solve(0.0, coarse, &mut p, &mut d);
    let mut nu = 0.0;
    if mean_cost(&p) > budget {
        let mut lo = 0.0;
        let mut hi = 1.0;
        loop {
            solve(hi, coarse, &mut p, &mut d);
            if mean_cost(&p) <= budget {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::NonFinite("multiplier search diverged".into()));
            }
        }
        nu = hi;
        for _ in 0..100 {
            nu = 0.5 * (lo + hi);
            solve(nu, coarse, &mut p, &mut d);
            let excess = mean_cost(&p) - budget;
            if excess.abs() < cost_tol || hi - lo < 1e-12 * hi {
                break;
            }
            if excess > 0.0 {
                lo = nu;
            } else {
                hi = nu;
            }
        }
    }
    let converged = solve(nu, tol, &mut p, &mut d);
    // Lagrangian bracket: Σ p(D − νc) + ν·budget ≤ C(budget) ≤ max(D − νc) + ν·budget
    let capacity = p.iter().zip(&d).zip(costs).map(|((a, di), ci)| a * (di - nu * ci)).sum::<f64>() + nu * budget;
    let upper = d
        .iter()
        .zip(costs)
        .map(|(di, ci)| di - nu * ci)
        .fold(f64::NEG_INFINITY, f64::max)
        + nu * budget;
    Ok(BaResult { capacity, upper, pmf: p, iterations: total_iter, converged, multiplier: nu })
}

/// Number of points in the default input grids.
pub const INPUT_POINTS: usize = 201;
/// Number of edges in the default output grids.
pub const OUTPUT_EDGES: usize = 1601;

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Scalar AWGN under `|x| ≤ a`: inputs on `[−a, a]`, outputs on `±(a + 8)`.
pub fn awgn_peak_channel(a: f64) -> Result<DiscretizedChannel> {
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!("peak bound must be positive, got {a}")));
    }
    let model = ChannelModel::awgn(1)?;
    let inputs = linspace(-a, a, INPUT_POINTS);
    let edges = linspace(-a - 8.0, a + 8.0, OUTPUT_EDGES);
    discretize_channel(&model, &inputs, &edges, |_| true)
}

/// Cauchy noise under `|x| ≤ a`. Output edges are tan-warped so their
/// density follows the noise law, out to the 0.9995 quantile beyond `±a`.
pub fn cauchy_peak_channel(a: f64, gamma: f64) -> Result<DiscretizedChannel> {
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!("peak bound must be positive, got {a}")));
    }
    let model = ChannelModel::cauchy(gamma)?;
    let inputs = linspace(-a, a, INPUT_POINTS);
    let reach = a + gamma * (PI * (0.9995 - 0.5)).tan();
    let theta = (reach / gamma).atan();
    let edges: Vec<f64> = linspace(-theta, theta, OUTPUT_EDGES).into_iter().map(|t| gamma * t.tan()).collect();
    discretize_channel(&model, &inputs, &edges, |_| true)
}

/// The exponential channel on inputs `s_i = i/201`, `i = 1..=201`, with
/// log-spaced output edges from `1e-6` to `40/s_min`, and costs `1/s − 1`.
pub fn rayleigh_channel() -> Result<(DiscretizedChannel, Vec<f64>)> {
    let model = ChannelModel::rayleigh_equiv();
    let n = INPUT_POINTS;
    let inputs: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    let (lo, hi) = (1e-6f64.ln(), (40.0 / inputs[0]).ln());
    let mut edges: Vec<f64> = linspace(lo, hi, OUTPUT_EDGES - 1).into_iter().map(f64::exp).collect();
    edges.insert(0, 0.0);
    let ch = discretize_channel(&model, &inputs, &edges, |s| s > 0.0 && s <= 1.0)?;
    let costs = ch.input_grid().iter().map(|s| 1.0 / s - 1.0).collect();
    Ok((ch, costs))
}

/// Default oracle tolerance (nats).
pub const BA_TOL: f64 = 1e-5;
pub const BA_MAX_ITER: usize = 200_000;

pub fn awgn_peak_capacity(a: f64) -> Result<BaResult> {
    blahut_arimoto(&awgn_peak_channel(a)?, BA_TOL, BA_MAX_ITER)
}

pub fn cauchy_peak_capacity(a: f64, gamma: f64) -> Result<BaResult> {
    blahut_arimoto(&cauchy_peak_channel(a, gamma)?, BA_TOL, BA_MAX_ITER)
}

pub fn rayleigh_capacity(budget: f64) -> Result<BaResult> {
    let (ch, costs) = rayleigh_channel()?;
    blahut_arimoto_constrained(&ch, &costs, budget, BA_TOL, BA_MAX_ITER)
}

/// Binary symmetric channel with crossover `p`.
pub fn binary_symmetric(p: f64) -> Result<DiscretizedChannel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("crossover {p} outside [0, 1]")));
    }
    DiscretizedChannel::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0 - p, p, p, 1.0 - p])
}

/// Identity channel on `n` symbols.
pub fn noiseless(n: usize) -> Result<DiscretizedChannel> {
    let grid: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        t[i * n + i] = 1.0;
    }
    DiscretizedChannel::new(grid.clone(), grid, t)
}

/// `(d/2)·log₂(1 + A²/d)` bits.
pub fn shannon_awgn_bound(a: f64, d: usize) -> Result<f64> {
    if !(a > 0.0) || d == 0 {
        return Err(Error::InvalidArgument(format!("need A > 0 and d ≥ 1, got A={a}, d={d}")));
    }
    let d = d as f64;
    Ok(0.5 * d * (1.0 + a * a / d).log2())
}

/// `min{log₂(1 + 2A/√(2πe)), ½·log₂(1 + A²)}` bits.
pub fn mckellips_bound(a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!("need A > 0, got {a}")));
    }
    let first = (1.0 + 2.0 * a / (2.0 * PI * E).sqrt()).log2();
    let second = 0.5 * (1.0 + a * a).log2();
    Ok(first.min(second))
}

/// `ln(A/γ)` nats.
pub fn cauchy_capacity(a: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !(a >= gamma) {
        return Err(Error::InvalidArgument(format!("need A ≥ γ > 0, got A={a}, γ={gamma}")));
    }
    Ok((a / gamma).ln())
}

/// `−½·ln(1 − ρ²)` nats.
pub fn gaussian_mi_analytic(rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!("need |ρ| < 1, got {rho}")));
    }
    Ok(-0.5 * (1.0 - rho * rho).ln())
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / LN_2
}

pub fn bits_to_nats(bits: f64) -> f64 {
    bits * LN_2
}
