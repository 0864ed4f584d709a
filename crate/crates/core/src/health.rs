//! Random initial health and the cycles to failure it induces.
//!
//! A specimen starts with health `h̄₀`, a standard Weibull variable of shape
//! `m`, and loses `1/⟨N⟩(S)` per cycle of severity `S`. It fails at the
//! first cycle where health reaches zero.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, ensure_positive, Error, Result};
use crate::rng::SeededRng;
use crate::specimen::{SeveritySequence, WeibullBasquin};

/// Upper bound on stored trajectory checkpoints.
pub const MAX_CHECKPOINTS: usize = 1000;

/// Inverse-transform draw `(-ln U)^(1/m)` with `U` uniform on `(0, 1]`.
pub fn sample_initial_health<R: Rng + ?Sized>(m: f64, rng: &mut R) -> f64 {
    let u = 1.0 - rng.random::<f64>();
    (-u.ln()).powf(1.0 / m)
}

/// `⟨N⟩(S) · h̄₀` for a fresh initial health.
pub fn simulate_ncf_constant<R: Rng + ?Sized>(params: &WeibullBasquin, severity: f64, rng: &mut R) -> Result<f64> {
    let scale = params.scale_cycles(severity)?;
    Ok(scale * sample_initial_health(params.m(), rng))
}

/// Crossing time of the running sum `Σ 1/⟨N⟩(S_i)` against `h̄₀`.
pub fn ncf_for_health(params: &WeibullBasquin, seq: &SeveritySequence, h0: f64) -> Result<f64> {
    let mut spent = 0.0;
    let mut before = 0u64;
    for b in seq.blocks() {
        let scale = params.scale_cycles(b.severity)?;
        let block = b.count as f64 / scale;
        if spent + block >= h0 {
            return Ok(before as f64 + (h0 - spent) * scale);
        }
        spent += block;
        before += b.count;
    }
    Err(Error::HealthRemaining { residual: h0 - spent })
}

/// Draws `h̄₀` and returns the cycle at which health is exhausted.
///
/// For a single block this returns exactly the value of
/// [`simulate_ncf_constant`] under the same generator state.
pub fn simulate_ncf_sequence<R: Rng + ?Sized>(
    params: &WeibullBasquin,
    seq: &SeveritySequence,
    rng: &mut R,
) -> Result<f64> {
    let h0 = sample_initial_health(params.m(), rng);
    ncf_for_health(params, seq, h0)
}

/// NCFs of `replications` independent specimens; replication `r` uses
/// stream `r` of `master_seed`. Specimens that outlive the sequence are
/// reported as `+∞`.
pub fn simulate_ncfs(
    params: &WeibullBasquin,
    seq: &SeveritySequence,
    master_seed: u64,
    replications: usize,
) -> Result<Vec<f64>> {
    // validate severities once so the parallel loop cannot fail on them
    for b in seq.blocks() {
        params.scale_cycles(b.severity)?;
    }
    Ok((0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = SeededRng::new(master_seed, r as u64);
            simulate_ncf_sequence(params, seq, &mut rng).unwrap_or(f64::INFINITY)
        })
        .collect())
}

/// Random damage `D_n = (1/h̄₀) Σ_{i ≤ n} 1/⟨N⟩(S_i)`.
pub fn random_damage(params: &WeibullBasquin, seq: &SeveritySequence, initial_health: f64, n: f64) -> Result<f64> {
    ensure_positive("initial health", initial_health)?;
    let spent = seq.prefix_sum(n, |s| 1.0 / (params.kappa() * s.powf(-params.alpha())))?;
    Ok(spent / initial_health)
}

/// Health sampled at evenly spaced cycles.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HealthTrajectory {
    pub initial_health: f64,
    /// `(n, h̄_n)` with `n` increasing from 0.
    pub samples: Vec<(u64, f64)>,
    /// First integer cycle with `h̄_n ≤ 0`, if reached within the sequence.
    pub failure_cycle: Option<u64>,
}

/// Health after each of at most [`MAX_CHECKPOINTS`] evenly spaced cycles,
/// up to the failure cycle or the end of the sequence.
pub fn health_trajectory(
    params: &WeibullBasquin,
    seq: &SeveritySequence,
    initial_health: f64,
) -> Result<HealthTrajectory> {
    ensure_positive("initial health", initial_health)?;
    let failure_cycle = match ncf_for_health(params, seq, initial_health) {
        Ok(crossing) => Some((crossing.ceil() as u64).clamp(1, seq.total_cycles())),
        Err(Error::HealthRemaining { .. }) => None,
        Err(e) => return Err(e),
    };
    let horizon = failure_cycle.unwrap_or(seq.total_cycles());
    let points = (horizon as usize + 1).min(MAX_CHECKPOINTS);
    let mut samples = Vec::with_capacity(points);
    let mut last = None;
    for j in 0..points {
        let n = if points == 1 { 0 } else { ((horizon as u128 * j as u128) / (points as u128 - 1)) as u64 };
        if last == Some(n) {
            continue;
        }
        last = Some(n);
        let spent = random_damage(params, seq, 1.0, n as f64)?;
        samples.push((n, initial_health - spent));
    }
    Ok(HealthTrajectory { initial_health, samples, failure_cycle })
}

/// Health after `n` cycles, `h̄₀ - Σ_{i ≤ n} 1/⟨N⟩(S_i)`.
pub fn health_at(params: &WeibullBasquin, seq: &SeveritySequence, initial_health: f64, n: f64) -> Result<f64> {
    if !(initial_health > 0.0) {
        return domain(format!("initial health must be positive, got {initial_health}"));
    }
    Ok(initial_health - random_damage(params, seq, 1.0, n)?)
}
