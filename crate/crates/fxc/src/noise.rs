//! Fault sampling: iid phenomenological flips and GKP qubits with analog
//! syndrome information.
//!
//! GKP conventions: the vacuum variance is 2 (ħ = 2), so a squeezing level of
//! `s` dB gives a residual quadrature variance `σ² = 2·10^(−s/10)`. Stabilizer
//! bins have spacing √(2π); a shift `δ` flips the encoded bit when the nearest
//! bin multiple `round(δ/√(2π))` is odd, and the residual distance to that bin
//! center carries analog information about the flip likelihood.

use crate::decoder::LLR_CLIP;
use crate::foliation::{FaultComplex, LayerKind, Side};
use crate::gf2::BinVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, thiserror::Error)]
pub enum NoiseError {
    #[error("flip probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("squeezing must be positive, got {0} dB")]
    BadSqueezing(f64),
}

/// Independent identically distributed flips on every fault location.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhenomenologicalSpec {
    pub p: f64,
}

impl PhenomenologicalSpec {
    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(0.0..=1.0).contains(&self.p) || !self.p.is_finite() {
            return Err(NoiseError::BadProbability(self.p));
        }
        Ok(())
    }
}

/// GKP-encoded faults with finite squeezing.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GkpSpec {
    pub squeezing_db: f64,
    /// Use the analog residuals as per-fault priors for the decoder.
    #[serde(default = "default_true")]
    pub analog: bool,
}

fn default_true() -> bool {
    true
}

impl GkpSpec {
    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(self.squeezing_db > 0.0) || !self.squeezing_db.is_finite() {
            return Err(NoiseError::BadSqueezing(self.squeezing_db));
        }
        Ok(())
    }

    /// Residual quadrature variance `σ² = 2·10^(−s/10)` (vacuum variance 2).
    pub fn sigma_sq(&self) -> f64 {
        2.0 * 10f64.powf(-self.squeezing_db / 10.0)
    }
}

/// A sampled fault pattern together with the per-fault flip priors the
/// decoder should use.
#[derive(Debug, Clone)]
pub struct FaultSample {
    pub errors: BinVector,
    pub priors: Vec<f64>,
}

/// Marks the fault columns removed by boundary clearing: the first and last
/// bit layers of the side's fault grade. Only meaningful for open (full-rank)
/// time boundaries.
pub fn cleared_columns(fault: &FaultComplex, side: Side, clear: bool) -> Vec<bool> {
    let lay = fault.fault_layout(side);
    let mut cleared = vec![false; lay.total()];
    if !clear || lay.bit_layers == 0 {
        return cleared;
    }
    for layer in [0, lay.bit_layers - 1] {
        for j in lay.layer_range(LayerKind::Bit, layer) {
            cleared[j] = true;
        }
    }
    cleared
}

/// Samples iid flips with probability `p` on every non-cleared fault.
pub fn sample_iid(
    n: usize,
    p: f64,
    cleared: &[bool],
    rng: &mut ChaCha8Rng,
) -> FaultSample {
    let mut errors = BinVector::zeros(n);
    for j in 0..n {
        if !cleared[j] && rng.gen_bool(p) {
            errors.set(j, true);
        }
    }
    FaultSample {
        errors,
        priors: vec![p; n],
    }
}

const BIN: f64 = 2.5066282746310002; // √(2π)

/// Flip probability of a GKP qubit under a Gaussian shift of variance `σ²`:
/// total mass of the bins at odd multiples of √(2π).
pub fn gkp_flip_probability(sigma_sq: f64) -> f64 {
    let sigma = sigma_sq.sqrt();
    let mut p = 0.0;
    // half-integer bin boundaries at (k + 1/2)√(2π)
    let cdf = |x: f64| 0.5 * (1.0 + erf(x / (sigma * std::f64::consts::SQRT_2)));
    for k in (-200i64..=200).filter(|k| k % 2 != 0) {
        let lo = (k as f64 - 0.5) * BIN;
        let hi = (k as f64 + 0.5) * BIN;
        p += cdf(hi) - cdf(lo);
    }
    p
}

/// Error function via Abramowitz–Stegun 7.1.26 (|ε| < 1.5e−7), enough for
/// prior computation.
fn erf(x: f64) -> f64 {
    let sign = x.signum();
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

/// Posterior flip probability given the residual distance `r ∈ [−√(2π)/2,
/// √(2π)/2)` to the nearest bin center: Gaussian mixture over bin centers,
/// odd centers flip. Clamped to (0, 1/2] so priors stay informative.
pub fn gkp_posterior(r: f64, sigma_sq: f64) -> f64 {
    let mut odd = 0.0;
    let mut total = 0.0;
    for k in -20i64..=20 {
        let shift = r + k as f64 * BIN;
        let w = (-shift * shift / (2.0 * sigma_sq)).exp();
        total += w;
        if k % 2 != 0 {
            odd += w;
        }
    }
    let p = odd / total;
    let floor = (-LLR_CLIP).exp() / (1.0 + (-LLR_CLIP).exp());
    p.clamp(floor, 0.5)
}

/// Samples GKP shift errors on every non-cleared fault. With analog
/// information on, priors are per-fault posteriors from the residuals;
/// otherwise the uniform marginal flip probability.
pub fn sample_gkp(
    n: usize,
    spec: &GkpSpec,
    cleared: &[bool],
    rng: &mut ChaCha8Rng,
) -> FaultSample {
    let sigma_sq = spec.sigma_sq();
    let sigma = sigma_sq.sqrt();
    let marginal = gkp_flip_probability(sigma_sq);
    let mut errors = BinVector::zeros(n);
    let mut priors = vec![marginal; n];
    for j in 0..n {
        if cleared[j] {
            priors[j] = (-LLR_CLIP).exp() / (1.0 + (-LLR_CLIP).exp());
            continue;
        }
        let shift = sample_gaussian(rng) * sigma;
        let nearest = (shift / BIN).round();
        if (nearest as i64) % 2 != 0 {
            errors.set(j, true);
        }
        if spec.analog {
            let residual = shift - nearest * BIN;
            priors[j] = gkp_posterior(residual, sigma_sq);
        }
    }
    FaultSample { errors, priors }
}

/// Standard normal via Box–Muller.
fn sample_gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn sigma_sq_convention() {
        let spec = GkpSpec {
            squeezing_db: 10.0,
            analog: true,
        };
        assert!((spec.sigma_sq() - 0.2).abs() < 1e-12);
        let vac = GkpSpec {
            squeezing_db: 0.0 + 1e-12,
            analog: true,
        };
        assert!((vac.sigma_sq() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn gkp_flip_probability_matches_erf_oracle() {
        // oracle: statrs normal CDF sum over odd bins
        use statrs::distribution::{ContinuousCDF, Normal};
        for db in [4.0, 8.0, 12.0] {
            let sigma_sq = 2.0 * 10f64.powf(-db / 10.0);
            let n = Normal::new(0.0, sigma_sq.sqrt()).unwrap();
            let mut oracle = 0.0;
            for k in (-99i64..=99).filter(|k| k % 2 != 0) {
                oracle += n.cdf((k as f64 + 0.5) * BIN) - n.cdf((k as f64 - 0.5) * BIN);
            }
            let got = gkp_flip_probability(sigma_sq);
            assert!((got - oracle).abs() < 1e-6, "{db} dB: {got} vs {oracle}");
        }
    }

    #[test]
    fn gkp_posterior_extremes() {
        let sigma_sq = 0.2;
        // at the bin center the flip is near-certainly absent
        assert!(gkp_posterior(0.0, sigma_sq) < 1e-6);
        // at the bin boundary the flip is maximally uncertain
        let p = gkp_posterior(BIN / 2.0, sigma_sq);
        assert!((p - 0.5).abs() < 1e-9);
        assert!(gkp_posterior(0.0, sigma_sq) > 0.0);
    }

    #[test]
    fn gkp_empirical_rate_matches_marginal() {
        let spec = GkpSpec {
            squeezing_db: 6.0,
            analog: true,
        };
        let n = 200_000;
        let cleared = vec![false; n];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sample = sample_gkp(n, &spec, &cleared, &mut rng);
        let rate = sample.errors.weight() as f64 / n as f64;
        let marginal = gkp_flip_probability(spec.sigma_sq());
        assert!(
            (rate - marginal).abs() < 4.0 * (marginal / n as f64).sqrt(),
            "rate {rate} vs marginal {marginal}"
        );
    }

    #[test]
    fn analog_priors_are_calibrated() {
        // among faults with posterior near q, about q should actually flip
        let spec = GkpSpec {
            squeezing_db: 6.0,
            analog: true,
        };
        let n = 400_000;
        let cleared = vec![false; n];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sample = sample_gkp(n, &spec, &cleared, &mut rng);
        let mut bucket_flips = 0usize;
        let mut bucket_total = 0usize;
        let mut bucket_p = 0.0;
        for j in 0..n {
            let p = sample.priors[j];
            if (0.2..0.35).contains(&p) {
                bucket_total += 1;
                bucket_p += p;
                if sample.errors.get(j) {
                    bucket_flips += 1;
                }
            }
        }
        assert!(bucket_total > 500, "bucket too small: {bucket_total}");
        let predicted = bucket_p / bucket_total as f64;
        let observed = bucket_flips as f64 / bucket_total as f64;
        assert!(
            (observed - predicted).abs() < 5.0 * (predicted / bucket_total as f64).sqrt() + 0.01,
            "observed {observed} vs predicted {predicted}"
        );
    }

    #[test]
    fn iid_sampler_respects_cleared_columns() {
        let n = 1000;
        let mut cleared = vec![false; n];
        for c in cleared.iter_mut().take(100) {
            *c = true;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sample = sample_iid(n, 0.5, &cleared, &mut rng);
        for j in 0..100 {
            assert!(!sample.errors.get(j));
        }
        assert!(sample.errors.weight() > 300);
    }
}
