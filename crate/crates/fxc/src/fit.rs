//! Threshold extraction by finite-size scaling collapse: rates from several
//! code sizes are fitted against a single rescaled variable
//! `x = (p − p_th)·d^(1/μ)` with either a quadratic or a saturating tanh
//! model, and the threshold uncertainty comes from a percentile bootstrap
//! over resampled binomial counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FitError {
    #[error("scaling exponent mu must be nonzero")]
    ZeroMu,
    #[error("insufficient data: need >= 3 code sizes with >= 4 noise points each, got {0}")]
    InsufficientData(String),
    #[error("invalid point: {0}")]
    BadPoint(String),
    #[error("optimizer failed to converge: best objective {0}")]
    NoConvergence(f64),
}

/// One measured point of a threshold sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitPoint {
    /// Physical noise parameter.
    pub p: f64,
    /// Scaling size (code distance or linear size).
    pub d: f64,
    pub rate: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitInput {
    pub points: Vec<FitPoint>,
    /// Logical-qubit count, used to initialize the saturation level 1 − 2^−k.
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Quadratic,
    Tanh,
}

impl std::fmt::Display for FitModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitModel::Quadratic => write!(f, "quadratic"),
            FitModel::Tanh => write!(f, "tanh"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub model: FitModel,
    pub p_th: f64,
    pub mu: f64,
    /// Model shape parameters: `[a, b, c]` for tanh, `[q2, q1, q0]` for
    /// the quadratic `q2·x² + q1·x + q0`.
    pub params: [f64; 3],
    pub bootstrap_mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub resamples: usize,
    pub seed: u64,
    /// Weighted residual sum per degree of freedom at the point estimate.
    pub chi2_per_dof: f64,
}

/// Rescaled variable `x = (p − p_th)·d^(1/μ)`.
pub fn rescale(p: f64, p_th: f64, d: f64, mu: f64) -> Result<f64, FitError> {
    if mu == 0.0 {
        return Err(FitError::ZeroMu);
    }
    Ok((p - p_th) * d.powf(1.0 / mu))
}

/// Saturating collapse model `a·[1 − (1 − (1 + tanh(bx))/2)^c]`.
pub fn model_tanh(x: f64, a: f64, b: f64, c: f64) -> f64 {
    a * (1.0 - (1.0 - 0.5 * (1.0 + (b * x).tanh())).powf(c))
}

pub const MU_BOUNDS: (f64, f64) = (0.3, 5.0);

fn model_value(model: FitModel, x: f64, q: &[f64; 3]) -> f64 {
    match model {
        FitModel::Tanh => model_tanh(x, q[0], q[1], q[2]),
        FitModel::Quadratic => q[0] * x * x + q[1] * x + q[2],
    }
}

/// Weighted least-squares objective over the full parameter vector
/// `[p_th, mu, q0, q1, q2]`, with soft penalties keeping parameters inside
/// their domains.
fn objective(model: FitModel, points: &[FitPoint], theta: &[f64]) -> f64 {
    let (p_th, mu) = (theta[0], theta[1]);
    let q = [theta[2], theta[3], theta[4]];
    let mut penalty = 0.0;
    if mu < MU_BOUNDS.0 {
        penalty += 1e8 * (MU_BOUNDS.0 - mu);
    }
    if mu > MU_BOUNDS.1 {
        penalty += 1e8 * (mu - MU_BOUNDS.1);
    }
    if model == FitModel::Tanh {
        if q[0] <= 1e-9 {
            penalty += 1e8 * (1e-9 - q[0] + 1.0);
        }
        if q[0] > 1.0 {
            penalty += 1e8 * (q[0] - 1.0);
        }
        if q[2] <= 1e-6 {
            penalty += 1e8 * (1e-6 - q[2] + 1.0);
        }
        if q[2] > 1e3 {
            penalty += 1e8 * (q[2] - 1e3);
        }
    }
    if penalty > 0.0 {
        return 1e12 + penalty;
    }
    let mu_inv = 1.0 / mu;
    let mut sum = 0.0;
    for pt in points {
        let x = (pt.p - p_th) * pt.d.powf(mu_inv);
        let r = pt.rate - model_value(model, x, &q);
        let w = 1.0 / (pt.stderr * pt.stderr);
        sum += w * r * r;
    }
    sum
}

/// Derivative-free Nelder–Mead simplex minimization.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], steps: &[f64], max_iter: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        if (simplex[n].1 - simplex[0].1).abs() < 1e-12 * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(x, _)| x[i]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let reflect: Vec<f64> = (0..n)
            .map(|i| centroid[i] + alpha * (centroid[i] - worst.0[i]))
            .collect();
        let f_reflect = f(&reflect);
        if f_reflect < simplex[0].1 {
            let expand: Vec<f64> = (0..n)
                .map(|i| centroid[i] + gamma * (reflect[i] - centroid[i]))
                .collect();
            let f_expand = f(&expand);
            simplex[n] = if f_expand < f_reflect {
                (expand, f_expand)
            } else {
                (reflect, f_reflect)
            };
        } else if f_reflect < simplex[n - 1].1 {
            simplex[n] = (reflect, f_reflect);
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|i| centroid[i] + rho * (worst.0[i] - centroid[i]))
                .collect();
            let f_contract = f(&contract);
            if f_contract < worst.1 {
                simplex[n] = (contract, f_contract);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = (0..n)
                        .map(|i| best[i] + sigma * (entry.0[i] - best[i]))
                        .collect();
                    let fx = f(&x);
                    *entry = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    simplex.swap_remove(0)
}

/// Nelder–Mead with restarts at the running optimum until it stops improving.
fn minimize_with<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    steps: &[f64],
    max_iter: usize,
    max_restarts: i32,
) -> (Vec<f64>, f64) {
    let (mut x, mut fx) = nelder_mead(f, x0, steps, max_iter);
    for restart in 0..max_restarts {
        let shrink = 0.1f64.powi(restart + 1);
        let small: Vec<f64> = steps.iter().map(|s| s * shrink).collect();
        let (x2, fx2) = nelder_mead(f, &x, &small, max_iter);
        if fx2 >= fx - 1e-18 * (1.0 + fx.abs()) {
            break;
        }
        x = x2;
        fx = fx2;
    }
    (x, fx)
}

fn minimize<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], steps: &[f64]) -> (Vec<f64>, f64) {
    minimize_with(f, x0, steps, 2000, 8)
}

fn floored(points: &[FitPoint]) -> Vec<FitPoint> {
    points
        .iter()
        .map(|pt| {
            let floor = 0.5 / pt.trials as f64;
            FitPoint {
                stderr: pt.stderr.max(floor),
                ..*pt
            }
        })
        .collect()
}

fn validate(input: &FitInput) -> Result<(), FitError> {
    for pt in &input.points {
        if !(0.0..=1.0).contains(&pt.rate) || pt.trials == 0 || pt.d < 1.0 {
            return Err(FitError::BadPoint(format!("{pt:?}")));
        }
    }
    let mut sizes: Vec<u64> = input.points.iter().map(|pt| pt.d.to_bits()).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 3 {
        return Err(FitError::InsufficientData(format!(
            "{} code sizes",
            sizes.len()
        )));
    }
    for &bits in &sizes {
        let mut ps: Vec<u64> = input
            .points
            .iter()
            .filter(|pt| pt.d.to_bits() == bits)
            .map(|pt| pt.p.to_bits())
            .collect();
        ps.sort_unstable();
        ps.dedup();
        if ps.len() < 4 {
            return Err(FitError::InsufficientData(format!(
                "size {} has {} noise points",
                f64::from_bits(bits),
                ps.len()
            )));
        }
    }
    Ok(())
}

fn fit_once(
    model: FitModel,
    points: &[FitPoint],
    k: usize,
    warm: Option<&[f64]>,
) -> (Vec<f64>, f64) {
    let obj = |theta: &[f64]| objective(model, points, theta);
    let p_lo = points.iter().map(|pt| pt.p).fold(f64::INFINITY, f64::min);
    let p_hi = points.iter().map(|pt| pt.p).fold(f64::NEG_INFINITY, f64::max);
    let span = (p_hi - p_lo).max(1e-6);
    let rate_mid = points.iter().map(|pt| pt.rate).sum::<f64>() / points.len() as f64;
    let steps = |p_step: f64| match model {
        FitModel::Tanh => vec![p_step, 0.3, 0.05, 2.0, 0.5],
        FitModel::Quadratic => vec![p_step, 0.3, 1.0, 0.5, 0.05],
    };
    if let Some(w) = warm {
        // bootstrap refits start next to the optimum; a short run with a
        // couple of polish restarts recovers it to well inside the CI width
        return minimize_with(&obj, w, &steps(span * 0.05), 800, 2);
    }
    let a0 = 1.0 - 0.5f64.powi(k as i32);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (frac, mu0) in [(0.5, 1.0), (0.3, 0.7), (0.7, 1.5), (0.4, 2.5), (0.6, 0.45)] {
        let p0 = p_lo + frac * span;
        let x0 = match model {
            FitModel::Tanh => vec![p0, mu0, a0, 5.0 / span, 1.0],
            FitModel::Quadratic => vec![p0, mu0, 0.0, rate_mid / span, rate_mid],
        };
        let cand = minimize(&obj, &x0, &steps(span * 0.1));
        if best.as_ref().is_none_or(|b| cand.1 < b.1) {
            best = Some(cand);
        }
    }
    best.unwrap()
}

/// Fits the threshold, then bootstraps it: each resample redraws every
/// point's failure count from a binomial at the observed rate, refits warm-
/// started from the point estimate, and the 99% CI is the (0.5%, 99.5%)
/// percentile interval. The interval is widened to include the point
/// estimate when the percentiles fall on one side of it.
pub fn fit_threshold(
    input: &FitInput,
    model: FitModel,
    bootstrap_n: usize,
    seed: u64,
) -> Result<FitResult, FitError> {
    validate(input)?;
    let mut points = floored(&input.points);
    // canonical order: the objective sum must not depend on input order
    points.sort_by(|a, b| (a.d, a.p).partial_cmp(&(b.d, b.p)).unwrap());
    let (theta, obj) = fit_once(model, &points, input.k, None);
    if obj >= 1e12 {
        return Err(FitError::NoConvergence(obj));
    }
    let dof = points.len().saturating_sub(5).max(1);
    let chi2_per_dof = obj / dof as f64;
    let mut boot: Vec<f64> = (0..bootstrap_n)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e3779b97f4a7c15u64.wrapping_mul(idx as u64 + 1)));
            let resampled: Vec<FitPoint> = points
                .iter()
                .map(|pt| {
                    let bin = Binomial::new(pt.trials as u64, pt.rate.clamp(0.0, 1.0)).unwrap();
                    let fails = bin.sample(&mut rng);
                    let rate = fails as f64 / pt.trials as f64;
                    let stderr = (rate * (1.0 - rate) / pt.trials as f64)
                        .sqrt()
                        .max(0.5 / pt.trials as f64);
                    FitPoint { rate, stderr, ..*pt }
                })
                .collect();
            fit_once(model, &resampled, input.k, Some(&theta)).0[0]
        })
        .collect();
    boot.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p_th = theta[0];
    let (bootstrap_mean, mut ci_low, mut ci_high) = if boot.is_empty() {
        (p_th, p_th, p_th)
    } else {
        let mean = boot.iter().sum::<f64>() / boot.len() as f64;
        let at = |q: f64| {
            let idx = ((boot.len() as f64 - 1.0) * q).round() as usize;
            boot[idx]
        };
        (mean, at(0.005), at(0.995))
    };
    ci_low = ci_low.min(p_th);
    ci_high = ci_high.max(p_th);
    Ok(FitResult {
        model,
        p_th,
        mu: theta[1],
        params: [theta[2], theta[3], theta[4]],
        bootstrap_mean,
        ci_low,
        ci_high,
        resamples: bootstrap_n,
        seed,
        chi2_per_dof,
    })
}

/// Collapse-plot rows `(x, rate, model_value)` for the fitted parameters.
pub fn collapse(input: &FitInput, result: &FitResult) -> Vec<(f64, f64, f64)> {
    let mut rows: Vec<(f64, f64, f64)> = input
        .points
        .iter()
        .map(|pt| {
            let x = (pt.p - result.p_th) * pt.d.powf(1.0 / result.mu);
            (x, pt.rate, model_value(result.model, x, &result.params))
        })
        .collect();
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLANT: [f64; 5] = [0.095, 1.1, 0.875, 28.0, 1.6];

    fn synthetic(noise_trials: Option<(usize, u64)>) -> FitInput {
        let mut points = Vec::new();
        for d in [9.0f64, 13.0, 17.0] {
            for step in 0..8 {
                let p = 0.07 + 0.006 * step as f64;
                let x = (p - PLANT[0]) * d.powf(1.0 / PLANT[1]);
                let rate_true = model_tanh(x, PLANT[2], PLANT[3], PLANT[4]);
                let (rate, stderr, trials) = match noise_trials {
                    None => (rate_true, 1e-4, 1_000_000),
                    Some((t, seed)) => {
                        let mut rng = ChaCha8Rng::seed_from_u64(
                            seed ^ (d as u64) << 32 ^ step as u64,
                        );
                        let bin = Binomial::new(t as u64, rate_true).unwrap();
                        let f = bin.sample(&mut rng);
                        let r = f as f64 / t as f64;
                        ((r), (r * (1.0 - r) / t as f64).sqrt().max(0.5 / t as f64), t)
                    }
                };
                points.push(FitPoint {
                    p,
                    d,
                    rate,
                    stderr,
                    trials,
                });
            }
        }
        FitInput { points, k: 3 }
    }

    #[test]
    fn rescale_identities() {
        assert_eq!(rescale(0.1, 0.1, 7.0, 1.3).unwrap(), 0.0);
        assert!((rescale(0.11, 0.10, 9.0, 1.0).unwrap() - 0.09).abs() < 1e-12);
        let f = rescale(1.0, 0.0, 16.0, 2.0).unwrap();
        assert!((f - 4.0).abs() < 1e-12);
        assert!(matches!(rescale(0.1, 0.0, 2.0, 0.0), Err(FitError::ZeroMu)));
    }

    #[test]
    fn model_tanh_identities() {
        assert!((model_tanh(0.0, 1.0, 3.0, 1.0) - 0.5).abs() < 1e-12);
        // g(0) = a(1 − 2^−c)
        for (a, c) in [(0.875, 3.0), (0.5, 1.7)] {
            let want = a * (1.0 - 0.5f64.powf(c));
            assert!((model_tanh(0.0, a, 2.0, c) - want).abs() < 1e-12);
        }
        // saturation at a, vanishing tail
        assert!((model_tanh(1e3, 0.875, 1.0, 2.0) - 0.875).abs() < 1e-12);
        assert!(model_tanh(-1e3, 0.875, 1.0, 2.0).abs() < 1e-12);
        // monotone in x for b > 0
        let mut prev = -1.0;
        for step in -50..=50 {
            let v = model_tanh(step as f64 * 0.1, 0.9, 4.0, 2.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn noiseless_data_recover_the_plant_exactly() {
        let input = synthetic(None);
        let result = fit_threshold(&input, FitModel::Tanh, 0, 1).unwrap();
        assert!(
            (result.p_th - PLANT[0]).abs() < 1e-6,
            "p_th = {} vs plant {}",
            result.p_th,
            PLANT[0]
        );
    }

    #[test]
    fn noisy_plant_recovery_with_ci() {
        let input = synthetic(Some((10_000, 77)));
        let result = fit_threshold(&input, FitModel::Tanh, 300, 5).unwrap();
        assert!(result.ci_low <= result.p_th && result.p_th <= result.ci_high);
        assert!(
            result.ci_low <= PLANT[0] && PLANT[0] <= result.ci_high,
            "CI [{}, {}] misses plant {}",
            result.ci_low,
            result.ci_high,
            PLANT[0]
        );
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let input = synthetic(Some((10_000, 3)));
        let a = fit_threshold(&input, FitModel::Tanh, 50, 9).unwrap();
        let b = fit_threshold(&input, FitModel::Tanh, 50, 9).unwrap();
        assert_eq!(a.p_th, b.p_th);
        assert_eq!(a.ci_low, b.ci_low);
        assert_eq!(a.ci_high, b.ci_high);
    }

    #[test]
    fn fit_is_order_invariant() {
        let input = synthetic(Some((10_000, 3)));
        let mut reversed = input.clone();
        reversed.points.reverse();
        let a = fit_threshold(&input, FitModel::Tanh, 0, 9).unwrap();
        let b = fit_threshold(&reversed, FitModel::Tanh, 0, 9).unwrap();
        assert_eq!(a.p_th, b.p_th);
    }

    #[test]
    fn quadratic_rejected_on_saturated_data() {
        // data deep into saturation: the quadratic cannot follow the plateau
        let input = synthetic(Some((100_000, 13)));
        let tanh = fit_threshold(&input, FitModel::Tanh, 0, 1).unwrap();
        let quad = fit_threshold(&input, FitModel::Quadratic, 0, 1).unwrap();
        assert!(
            quad.chi2_per_dof > 5.0 * tanh.chi2_per_dof,
            "quadratic chi2/dof {} vs tanh {}",
            quad.chi2_per_dof,
            tanh.chi2_per_dof
        );
    }

    #[test]
    fn insufficient_data_is_rejected() {
        let mut input = synthetic(None);
        input.points.retain(|pt| pt.d < 15.0);
        assert!(matches!(
            fit_threshold(&input, FitModel::Tanh, 0, 1),
            Err(FitError::InsufficientData(_))
        ));
    }

    #[test]
    fn collapse_rows_are_sorted_and_monotone_in_model() {
        let input = synthetic(Some((10_000, 3)));
        let result = fit_threshold(&input, FitModel::Tanh, 0, 1).unwrap();
        let rows = collapse(&input, &result);
        assert_eq!(rows.len(), input.points.len());
        for pair in rows.windows(2) {
            assert!(pair[0].0 <= pair[1].0);
            assert!(pair[0].2 <= pair[1].2 + 1e-12);
        }
    }
}
