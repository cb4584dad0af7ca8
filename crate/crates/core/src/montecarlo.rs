//! Seeded batch simulation and empirical estimates of `d` and `s`.
//!
//! Trial `t` of a batch runs with seed [`mix_seed`]`(seed_base, t)`, so the
//! random streams do not depend on scheduling and results are identical for
//! any degree of parallelism.

use crate::adversary::{AttackSpec, EveGuess};
use crate::protocol::{run_session, Mode, ProtocolConfig, ProtocolError, Session};
use crate::rng::mix_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MonteCarloError {
    #[error("need at least {min} {what}, got {got}")]
    TooFew {
        what: &'static str,
        min: u64,
        got: u64,
    },
    #[error("survival estimation needs the full-information attack; {0} is bound-only")]
    Unsupported(AttackSpec),
    #[error("parallelism must be positive")]
    NoThreads,
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

pub type Result<T, E = MonteCarloError> = std::result::Result<T, E>;

pub const MIN_DETECTION_RUNS: u64 = 100;
pub const MIN_SURVIVAL_TRIALS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub base: ProtocolConfig,
    pub attack: AttackSpec,
    pub trials: u64,
    pub seed_base: u64,
    pub parallelism: usize,
}

/// Per-trial row of a batch, in the order of the batch CSV columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: u64,
    pub detected: bool,
    pub control_runs: u64,
    pub message_runs: u64,
    pub bits_ok: bool,
    #[serde(skip)]
    detections: u64,
    #[serde(skip)]
    decode_errors: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub trials: u64,
    pub detected_sessions: u64,
    pub control_runs_total: u64,
    pub detections_total: u64,
    pub message_runs_total: u64,
    pub empirical_d: f64,
    pub empirical_d_stderr: f64,
    /// Message runs completed before the session ended → number of trials.
    pub survival_histogram: BTreeMap<u64, u64>,
    /// Fraction of message runs that decoded wrong or invalid.
    pub decode_error_rate: f64,
}

/// Detection frequency and its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub rate: f64,
    pub stderr: f64,
}

fn binomial(successes: u64, n: u64) -> Estimate {
    if n == 0 {
        return Estimate {
            rate: 0.0,
            stderr: 0.0,
        };
    }
    let p = successes as f64 / n as f64;
    Estimate {
        rate: p,
        stderr: (p * (1.0 - p) / n as f64).sqrt(),
    }
}

/// Runs `runs` isolated control runs under `attack` and counts coincidences.
pub fn estimate_detection(attack: AttackSpec, runs: u64, seed: u64) -> Result<Estimate> {
    if runs < MIN_DETECTION_RUNS {
        return Err(MonteCarloError::TooFew {
            what: "control runs",
            min: MIN_DETECTION_RUNS,
            got: runs,
        });
    }
    let mut detections = 0;
    for r in 0..runs {
        let config = ProtocolConfig::new(1.0, 1, Mode::Key, mix_seed(seed, r));
        let mut session = Session::new(config, attack)?;
        session.bob_prepare()?;
        session.eve_attack()?;
        if session.run_control()?.detected() {
            detections += 1;
        }
    }
    Ok(binomial(detections, runs))
}

/// Fraction of sessions in which a full-information Eve reads `target_bits`
/// message bits before being detected.
pub fn estimate_survival(
    attack: AttackSpec,
    c: f64,
    target_bits: u64,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    if !attack.is_full_info() {
        return Err(MonteCarloError::Unsupported(attack));
    }
    if trials < MIN_SURVIVAL_TRIALS {
        return Err(MonteCarloError::TooFew {
            what: "trials",
            min: MIN_SURVIVAL_TRIALS,
            got: trials,
        });
    }
    if target_bits == 0 {
        return Ok(1.0);
    }
    let mut survived = 0u64;
    for t in 0..trials {
        let config = ProtocolConfig::new(c, target_bits as usize, Mode::Key, mix_seed(seed, t));
        let transcript = run_session(config, Some(attack))?;
        let extracted = transcript
            .eve_log
            .iter()
            .filter(|e| matches!(e.guess, EveGuess::Bit(_)))
            .count() as u64;
        if !transcript.aborted && extracted == target_bits {
            survived += 1;
        }
    }
    Ok(survived as f64 / trials as f64)
}

fn run_trial(config: &BatchConfig, trial: u64) -> Result<TrialSummary> {
    let cfg = config
        .base
        .clone()
        .with_seed(mix_seed(config.seed_base, trial));
    let t = run_session(cfg, Some(config.attack))?;
    let detections = t.events.iter().filter(|e| e.detected()).count() as u64;
    let decode_errors = t
        .decoded_bits
        .iter()
        .zip(&t.message_bits)
        .filter(|(d, m)| **d != Some(**m))
        .count() as u64;
    Ok(TrialSummary {
        trial,
        detected: t.aborted,
        control_runs: t.control_runs,
        message_runs: t.message_runs,
        bits_ok: t.bits_ok(),
        detections,
        decode_errors,
    })
}

/// Runs every trial of the batch, returned in trial order.
pub fn run_trials(config: &BatchConfig) -> Result<Vec<TrialSummary>> {
    if config.trials == 0 {
        return Err(MonteCarloError::TooFew {
            what: "trials",
            min: 1,
            got: 0,
        });
    }
    if config.parallelism == 0 {
        return Err(MonteCarloError::NoThreads);
    }
    config.base.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()?;
    pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(config, t))
            .collect()
    })
}

/// Folds trial rows into batch statistics.
pub fn aggregate(rows: &[TrialSummary]) -> BatchStats {
    let mut histogram = BTreeMap::new();
    let mut detected_sessions = 0;
    let mut control_runs_total = 0;
    let mut detections_total = 0;
    let mut message_runs_total = 0;
    let mut decode_errors = 0;
    for row in rows {
        *histogram.entry(row.message_runs).or_insert(0) += 1;
        detected_sessions += u64::from(row.detected);
        control_runs_total += row.control_runs;
        detections_total += row.detections;
        message_runs_total += row.message_runs;
        decode_errors += row.decode_errors;
    }
    let d = binomial(detections_total, control_runs_total);
    BatchStats {
        trials: rows.len() as u64,
        detected_sessions,
        control_runs_total,
        detections_total,
        message_runs_total,
        empirical_d: d.rate,
        empirical_d_stderr: d.stderr,
        survival_histogram: histogram,
        decode_error_rate: if message_runs_total == 0 {
            0.0
        } else {
            decode_errors as f64 / message_runs_total as f64
        },
    }
}

pub fn run_batch(config: &BatchConfig) -> Result<BatchStats> {
    Ok(aggregate(&run_trials(config)?))
}
