//! Monte Carlo harness: memory experiments (open time boundaries with
//! boundary clearing), stability experiments (time-periodic), and
//! sustainable-threshold sweeps over increasing round counts.
//!
//! Trials are embarrassingly parallel: each trial seeds its own RNG from the
//! master seed and its index, and batches aggregate failure counts by
//! integer addition, so results are reproducible for any worker count.

use crate::chain::ChainComplex;
use crate::codes::{repetition, CodeSpec, RepetitionSpec};
use crate::decoder::{plan_windows, DecodeConfig, DecoderError, WindowConfig, WindowPlan};
use crate::foliation::{product, Family, FaultComplex, FoliationError, Side};
use crate::gf2::BinVector;
use crate::noise::{cleared_columns, sample_gkp, sample_iid, FaultSample, GkpSpec, NoiseError, PhenomenologicalSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Code(#[from] crate::codes::CodeError),
    #[error(transparent)]
    Foliation(#[from] FoliationError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("decoder inconsistency in trial {trial}: {source}")]
    Decoder {
        trial: usize,
        #[source]
        source: DecoderError,
    },
    #[error("trials must be >= 1")]
    NoTrials,
    #[error("stability experiments need at least 2 rounds, got {0}")]
    TooFewRounds(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Memory,
    Stability,
    Sustainable,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExperimentKind::Memory => write!(f, "memory"),
            ExperimentKind::Stability => write!(f, "stability"),
            ExperimentKind::Sustainable => write!(f, "sustainable"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideSelection {
    Primal,
    Dual,
    Both,
}

impl std::fmt::Display for SideSelection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SideSelection::Primal => write!(f, "primal"),
            SideSelection::Dual => write!(f, "dual"),
            SideSelection::Both => write!(f, "both"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    Phenomenological(PhenomenologicalSpec),
    Gkp(GkpSpec),
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), NoiseError> {
        match self {
            NoiseSpec::Phenomenological(s) => s.validate(),
            NoiseSpec::Gkp(s) => s.validate(),
        }
    }

    /// Scalar recorded in the CSV `noise_param` column: flip probability or
    /// squeezing in dB.
    pub fn parameter(&self) -> f64 {
        match self {
            NoiseSpec::Phenomenological(s) => s.p,
            NoiseSpec::Gkp(s) => s.squeezing_db,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub code: CodeSpec,
    /// Noisy syndrome-measurement rounds. Memory uses an open-ended time
    /// direction with this many measurement layers; stability wraps time
    /// periodically over this many rounds.
    pub rounds: usize,
    pub side: SideSelection,
    pub noise: NoiseSpec,
    pub decode: DecodeConfig,
    pub window: WindowConfig,
    pub trials: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialBatch {
    pub kind: ExperimentKind,
    pub code: String,
    pub l: usize,
    pub d: usize,
    pub side: SideSelection,
    pub w: usize,
    pub c: usize,
    pub rounds: usize,
    pub noise_param: f64,
    pub trials: usize,
    pub failures: usize,
    pub rate: f64,
    pub stderr: f64,
    pub seed: u64,
    pub wall_time_s: f64,
}

impl TrialBatch {
    /// CSV row matching the documented column order. `experiment` is a
    /// caller-chosen batch label.
    pub fn csv_row(&self, experiment: &str) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            experiment,
            self.kind,
            self.code,
            self.l,
            self.d,
            self.side,
            self.w,
            self.c,
            self.rounds,
            self.noise_param,
            self.trials,
            self.failures,
            self.rate,
            self.stderr,
            self.seed
        )
    }

    pub const CSV_HEADER: &'static str =
        "experiment,kind,code,L,D,side,w,c,rounds,noise_param,trials,failures,rate,stderr,seed";
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Deterministic per-trial seed, independent of scheduling.
pub fn trial_seed(master_seed: u64, trial: usize) -> u64 {
    splitmix64(master_seed ^ splitmix64(trial as u64 + 1))
}

/// Everything one side of one batch needs, precomputed once.
struct SideProblem {
    side: Side,
    fault: FaultComplex,
    cleared: Vec<bool>,
    /// Parity checks against the residual error: failure iff any pairs oddly.
    failure_checks: Vec<BinVector>,
    /// Window slices and commit schedule, shared by every trial.
    plan: WindowPlan,
}

impl SideProblem {
    fn sample(&self, noise: &NoiseSpec, rng: &mut ChaCha8Rng) -> FaultSample {
        let n = self.fault.detector(self.side).cols();
        match noise {
            NoiseSpec::Phenomenological(s) => sample_iid(n, s.p, &self.cleared, rng),
            NoiseSpec::Gkp(s) => sample_gkp(n, s, &self.cleared, rng),
        }
    }

    fn run_trial(
        &self,
        noise: &NoiseSpec,
        decode: &DecodeConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<bool, DecoderError> {
        let sample = self.sample(noise, rng);
        let syndrome = self.fault.detector(self.side).mul_vec(&sample.errors);
        let outcome = self.plan.decode(&syndrome, &sample.priors, decode)?;
        let residual = sample.errors.xor(&outcome.correction);
        Ok(self.failure_checks.iter().any(|chk| chk.dot(&residual)))
    }
}

/// Memory-experiment failure checks: the time-extended lift of each base
/// logical, constant across all layers of the open time direction. These
/// pair trivially with every stabilizer that avoids the cleared boundary
/// layers, so the pairing depends only on the residual's logical class.
fn memory_checks(fault: &FaultComplex, base: &ChainComplex, side: Side) -> Result<Vec<BinVector>, FoliationError> {
    let i = fault.primal_grade();
    let lay = fault.fault_layout(side);
    let mut checks = Vec::new();
    match side {
        Side::Primal => {
            // (1_r ⊗ ℓ_X | 0) for each X logical of the base
            let ones = BinVector::ones(lay.check_layers);
            for lx in base.cohomology(i)?.representatives {
                let mut v = BinVector::zeros(lay.total());
                for p in ones.kron(&lx).support() {
                    v.set(p, true);
                }
                checks.push(v);
            }
        }
        Side::Dual => {
            // (0 | 1_c ⊗ ℓ_Z) for each Z logical of the base
            let ones = BinVector::ones(lay.bit_layers);
            let offset = lay.check_layers * lay.check_block;
            for lz in base.homology(i)?.representatives {
                let mut v = BinVector::zeros(lay.total());
                for p in ones.kron(&lz).support() {
                    v.set(offset + p, true);
                }
                checks.push(v);
            }
        }
    }
    Ok(checks)
}

/// Stability-experiment failure checks: the timelike (`Gh`) correlation
/// representatives of the side, after pairing canonicalization.
fn stability_checks(fault: &FaultComplex, side: Side) -> Result<Vec<BinVector>, FoliationError> {
    let logicals = fault.logical_representatives()?;
    let corr = match side {
        Side::Primal => logicals.primal_corr,
        Side::Dual => logicals.dual_corr,
    };
    Ok(corr
        .into_iter()
        .filter(|t| t.family == Family::Gh)
        .map(|t| t.vector)
        .collect())
}

fn sides_of(sel: SideSelection) -> Vec<Side> {
    match sel {
        SideSelection::Primal => vec![Side::Primal],
        SideSelection::Dual => vec![Side::Dual],
        SideSelection::Both => vec![Side::Primal, Side::Dual],
    }
}

fn build_problems(spec: &ExperimentSpec) -> Result<Vec<SideProblem>, ExperimentError> {
    let base = spec.code.build()?;
    let grade = spec.code.qubit_grade();
    let (rep_spec, periodic, clear) = match spec.kind {
        // open time: `rounds` measurement layers, perfect first/last data layer
        ExperimentKind::Memory | ExperimentKind::Sustainable => {
            (RepetitionSpec::full_rank(spec.rounds + 1), false, true)
        }
        ExperimentKind::Stability => {
            if spec.rounds < 2 {
                return Err(ExperimentError::TooFewRounds(spec.rounds));
            }
            (RepetitionSpec::cyclic(spec.rounds), true, false)
        }
    };
    let rep = repetition(rep_spec)?;
    let fault = product(&rep, &base, grade)?;
    sides_of(spec.side)
        .into_iter()
        .map(|side| {
            let cleared = cleared_columns(&fault, side, clear);
            let failure_checks = match spec.kind {
                ExperimentKind::Memory | ExperimentKind::Sustainable => {
                    memory_checks(&fault, &base, side)?
                }
                ExperimentKind::Stability => stability_checks(&fault, side)?,
            };
            let plan = plan_windows(&fault, side, &spec.window, periodic, &cleared)
                .map_err(|source| ExperimentError::Decoder { trial: 0, source })?;
            Ok(SideProblem {
                side,
                fault: fault.clone(),
                cleared,
                failure_checks,
                plan,
            })
        })
        .collect()
}

fn run_batch(spec: &ExperimentSpec) -> Result<TrialBatch, ExperimentError> {
    if spec.trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    spec.noise.validate()?;
    let start = Instant::now();
    let problems = build_problems(spec)?;
    let failures = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(spec.master_seed, trial));
            for problem in &problems {
                match problem.run_trial(&spec.noise, &spec.decode, &mut rng) {
                    Ok(true) => return Ok(1usize),
                    Ok(false) => {}
                    Err(source) => return Err(ExperimentError::Decoder { trial, source }),
                }
            }
            Ok(0usize)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let rate = failures as f64 / spec.trials as f64;
    let stderr = (rate * (1.0 - rate) / spec.trials as f64).sqrt();
    Ok(TrialBatch {
        kind: spec.kind,
        code: spec.code.to_string(),
        l: spec.code.linear_size(),
        d: spec.code.dimension(),
        side: spec.side,
        w: spec.window.w,
        c: spec.window.c,
        rounds: spec.rounds,
        noise_param: spec.noise.parameter(),
        trials: spec.trials,
        failures,
        rate,
        stderr,
        seed: spec.master_seed,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

pub fn run_memory(spec: &ExperimentSpec) -> Result<TrialBatch, ExperimentError> {
    run_batch(spec)
}

pub fn run_stability(spec: &ExperimentSpec) -> Result<TrialBatch, ExperimentError> {
    run_batch(spec)
}

/// One memory batch per round count, for sustainable-threshold studies.
pub fn run_sustainable(
    spec: &ExperimentSpec,
    rounds_list: &[usize],
) -> Result<Vec<TrialBatch>, ExperimentError> {
    rounds_list
        .iter()
        .map(|&rounds| {
            let mut s = spec.clone();
            s.kind = ExperimentKind::Sustainable;
            s.rounds = rounds;
            run_batch(&s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::OsdStrategy;

    fn base_spec(kind: ExperimentKind, code: &str, rounds: usize, p: f64) -> ExperimentSpec {
        ExperimentSpec {
            kind,
            code: CodeSpec::parse(code).unwrap(),
            rounds,
            side: SideSelection::Primal,
            noise: NoiseSpec::Phenomenological(PhenomenologicalSpec { p }),
            decode: DecodeConfig::default(),
            window: WindowConfig { w: 1, c: 1 },
            trials: 50,
            master_seed: 42,
        }
    }

    #[test]
    fn zero_noise_never_fails() {
        for (kind, code, rounds) in [
            (ExperimentKind::Memory, "toric:2:3", 3),
            (ExperimentKind::Stability, "toric:3:2", 4),
        ] {
            let spec = base_spec(kind, code, rounds, 0.0);
            let batch = run_batch(&spec).unwrap();
            assert_eq!(batch.failures, 0, "{kind} on {code}");
            assert_eq!(batch.rate, 0.0);
        }
    }

    #[test]
    fn batches_are_reproducible() {
        let spec = base_spec(ExperimentKind::Memory, "toric:2:3", 3, 0.03);
        let a = run_batch(&spec).unwrap();
        let b = run_batch(&spec).unwrap();
        assert_eq!(a.failures, b.failures);
        assert_eq!(a.csv_row("x"), b.csv_row("x"));
    }

    #[test]
    fn overwhelming_noise_almost_always_fails() {
        let mut spec = base_spec(ExperimentKind::Memory, "toric:2:3", 3, 0.5);
        spec.trials = 100;
        let batch = run_batch(&spec).unwrap();
        assert!(batch.rate > 0.5, "rate = {}", batch.rate);
    }

    #[test]
    fn memory_both_sides_at_least_each_side() {
        let mut spec = base_spec(ExperimentKind::Memory, "toric:2:3", 2, 0.08);
        spec.trials = 200;
        let primal = run_batch(&spec).unwrap();
        spec.side = SideSelection::Both;
        let both = run_batch(&spec).unwrap();
        assert!(both.failures >= primal.failures.saturating_sub(10));
    }

    #[test]
    fn failure_is_basis_independent() {
        // adding a stabilizer (boundary) to a failure check may not change
        // any failure decision
        let spec = base_spec(ExperimentKind::Memory, "toric:2:3", 3, 0.05);
        let problems = build_problems(&spec).unwrap();
        let problem = &problems[0];
        let d_ip1 = problem
            .fault
            .complex()
            .boundary_or_zero(problem.fault.primal_grade() + 1);
        // restrict to stabilizer generators supported off the cleared layers
        let mut shifted = Vec::new();
        for col in 0..d_ip1.cols() {
            let g = d_ip1.col(col);
            if g.support().iter().all(|&p| !problem.cleared[p]) {
                shifted.push(g);
            }
        }
        assert!(!shifted.is_empty());
        for trial in 0..30 {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(7, trial));
            let sample = problem.sample(&spec.noise, &mut rng);
            let syndrome = problem.fault.detector(problem.side).mul_vec(&sample.errors);
            let out = problem
                .plan
                .decode(&syndrome, &sample.priors, &spec.decode)
                .unwrap();
            let residual = sample.errors.xor(&out.correction);
            for chk in &problem.failure_checks {
                let base_decision = chk.dot(&residual);
                for g in shifted.iter().take(5) {
                    // a boundary of the residual class flips nothing
                    let moved = residual.xor(g);
                    assert_eq!(chk.dot(&moved), base_decision);
                }
            }
        }
    }

    #[test]
    fn stability_requires_multiple_rounds() {
        let spec = base_spec(ExperimentKind::Stability, "toric:3:2", 1, 0.01);
        assert!(matches!(
            run_batch(&spec),
            Err(ExperimentError::TooFewRounds(1))
        ));
    }

    #[test]
    fn sustainable_sweep_reduces_to_memory_per_rounds() {
        let mut spec = base_spec(ExperimentKind::Memory, "toric:2:3", 1, 0.02);
        spec.trials = 100;
        let sweep = run_sustainable(&spec, &[1, 2]).unwrap();
        assert_eq!(sweep.len(), 2);
        assert_eq!(sweep[0].rounds, 1);
        let mut single = spec.clone();
        single.kind = ExperimentKind::Sustainable;
        single.rounds = 1;
        let direct = run_batch(&single).unwrap();
        assert_eq!(sweep[0].failures, direct.failures);
    }

    #[test]
    fn csv_row_shape() {
        let mut spec = base_spec(ExperimentKind::Memory, "toric:2:3", 2, 0.01);
        spec.trials = 10;
        spec.decode.strategy = OsdStrategy::Osd0;
        let batch = run_batch(&spec).unwrap();
        let row = batch.csv_row("demo");
        assert_eq!(row.split(',').count(), TrialBatch::CSV_HEADER.split(',').count());
        assert!(row.starts_with("demo,memory,toric:2:3,3,2,primal,1,1,2,0.01,10,"));
    }
}
