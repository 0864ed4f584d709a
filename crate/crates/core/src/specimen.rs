//! Closed-form specimen mathematics in the Weibull–Basquin model.
//!
//! A specimen loaded at constant severity `S` has a Weibull number of cycles
//! to failure (NCF) with modulus `m` and scale `⟨N⟩(S) = κ S^(-α)`. Miner
//! damage at reference probability `p` and the survival probability under a
//! variable severity sequence follow in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_positive, Error, Result};

/// The triple `(m, α, κ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeibullBasquin {
    /// Weibull modulus.
    m: f64,
    /// Basquin exponent.
    alpha: f64,
    /// Scale constant, cycles·MPa^α.
    kappa: f64,
}

/// A point `(N_p, S_p)` of the S-N curve of order `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetailCategory {
    pub p: f64,
    pub cycles: f64,
    pub severity: f64,
}

impl DetailCategory {
    pub fn new(p: f64, cycles: f64, severity: f64) -> Result<Self> {
        check_open_probability("p", p)?;
        ensure_positive("N_p", cycles)?;
        ensure_positive("S_p", severity)?;
        Ok(Self { p, cycles, severity })
    }
}

fn check_open_probability(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        domain(format!("{name} must lie in (0, 1), got {p}"))
    }
}

/// `κ = (-ln(1-p))^(-1/m) · N_p · S_p^α`.
pub fn kappa_from_detail(m: f64, alpha: f64, detail: &DetailCategory) -> Result<f64> {
    ensure_positive("m", m)?;
    ensure_positive("alpha", alpha)?;
    let log_kappa = -(-(-detail.p).ln_1p()).ln() / m + detail.cycles.ln() + alpha * detail.severity.ln();
    let kappa = log_kappa.exp();
    if !kappa.is_finite() || kappa <= 0.0 {
        return domain(format!("kappa is not representable (ln kappa = {log_kappa})"));
    }
    Ok(kappa)
}

/// Weibull shape function `u(h) = exp(-h^m)`.
pub fn shape_u(m: f64, h: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return domain(format!("health must be nonnegative, got {h}"));
    }
    Ok((-h.powf(m)).exp())
}

/// Inverse of [`shape_u`]: `u⁻¹(q) = (-ln q)^(1/m)`.
pub fn shape_u_inv(m: f64, q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return domain(format!("probability must lie in (0, 1], got {q}"));
    }
    Ok((-q.ln()).powf(1.0 / m))
}

/// Survival probability `(1-p)^(D^m)` of a specimen whose Miner damage at
/// reference probability `p` is `damage`. Evaluated as `exp(D^m ln(1-p))`.
pub fn survival_from_damage(m: f64, p: f64, damage: f64) -> f64 {
    (damage.powf(m) * (-p).ln_1p()).exp()
}

/// A shape function `u` of the NCF law together with its inverse.
///
/// `Pr(N(S)/⟨N⟩(S) > h) = u(h)` with `u` decreasing from 1 to 0.
pub trait ShapeFunction {
    fn u(&self, h: f64) -> f64;
    fn u_inv(&self, q: f64) -> f64;

    /// `Pr(N > n) = u(u⁻¹(1-p) · D_{p,n})` for any reference probability.
    fn survival_from_damage(&self, p: f64, damage: f64) -> f64 {
        self.u(self.u_inv(1.0 - p) * damage)
    }
}

/// The Weibull shape `u(h) = exp(-h^m)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeibullShape {
    pub m: f64,
}

impl ShapeFunction for WeibullShape {
    fn u(&self, h: f64) -> f64 {
        (-h.powf(self.m)).exp()
    }

    fn u_inv(&self, q: f64) -> f64 {
        (-q.ln()).powf(1.0 / self.m)
    }
}

/// One run of identical cycles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    /// Cycle severity, MPa.
    pub severity: f64,
    pub count: u64,
}

/// Run-length encoded severity sequence `S_1, S_2, ...`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeveritySequence {
    blocks: Vec<Block>,
}

impl SeveritySequence {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        for b in &blocks {
            ensure_positive("severity", b.severity)?;
            if b.count == 0 {
                return domain("block cycle counts must be at least 1");
            }
        }
        Ok(Self { blocks })
    }

    /// `count` cycles at constant severity.
    pub fn constant(severity: f64, count: u64) -> Result<Self> {
        Self::new(vec![Block { severity, count }])
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn total_cycles(&self) -> u64 {
        self.blocks.iter().map(|b| b.count).sum()
    }

    pub fn push(&mut self, severity: f64, count: u64) -> Result<()> {
        ensure_positive("severity", severity)?;
        if count == 0 {
            return domain("block cycle counts must be at least 1");
        }
        self.blocks.push(Block { severity, count });
        Ok(())
    }

    /// Concatenation `self` then `other`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut blocks = self.blocks.clone();
        blocks.extend_from_slice(&other.blocks);
        Self { blocks }
    }

    /// `n` repetitions of `self`.
    pub fn repeat(&self, n: usize) -> Self {
        Self { blocks: self.blocks.repeat(n) }
    }

    /// Cycle-by-cycle severities.
    pub fn expand(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().flat_map(|b| std::iter::repeat_n(b.severity, b.count as usize))
    }

    /// `Σ_{i ≤ n} w(S_i)` with one multiplication per block.
    ///
    /// `n` may be fractional (continuous relaxation of the last cycle).
    pub fn prefix_sum(&self, n: f64, weight: impl Fn(f64) -> f64) -> Result<f64> {
        let total = self.total_cycles() as f64;
        if !(n >= 0.0) || n > total {
            return domain(format!("cycle {n} outside the sequence of {total} cycles"));
        }
        let mut acc = 0.0;
        let mut seen = 0.0;
        for b in &self.blocks {
            if seen >= n {
                break;
            }
            let take = (n - seen).min(b.count as f64);
            acc += take * weight(b.severity);
            seen += b.count as f64;
        }
        Ok(acc)
    }
}

/// Relative slack on the damage threshold absorbing summation rounding.
pub const MINER_ROUNDING: f64 = 1e-12;

/// Result of Miner's rule: the real crossing time of damage 1 and the first
/// integer cycle at which damage reaches 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MinerNcf {
    pub crossing: f64,
    pub cycles: u64,
}

impl WeibullBasquin {
    pub fn new(m: f64, alpha: f64, kappa: f64) -> Result<Self> {
        ensure_positive("m", m)?;
        ensure_positive("alpha", alpha)?;
        ensure_positive("kappa", kappa)?;
        Ok(Self { m, alpha, kappa })
    }

    pub fn from_detail(m: f64, alpha: f64, detail: &DetailCategory) -> Result<Self> {
        Self::new(m, alpha, kappa_from_detail(m, alpha, detail)?)
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn shape(&self) -> WeibullShape {
        WeibullShape { m: self.m }
    }

    /// Scale of the NCF law `⟨N⟩(S) = κ S^(-α)`.
    pub fn scale_cycles(&self, severity: f64) -> Result<f64> {
        if !(severity > 0.0) {
            return domain(format!("severity must be positive, got {severity}"));
        }
        Ok(self.kappa * severity.powf(-self.alpha))
    }

    fn scale_unchecked(&self, severity: f64) -> f64 {
        self.kappa * severity.powf(-self.alpha)
    }

    /// S-N curve of order `p`: `N_p(S) = (-ln(1-p))^(1/m) ⟨N⟩(S)`.
    pub fn sn_quantile(&self, p: f64, severity: f64) -> Result<f64> {
        check_open_probability("p", p)?;
        Ok(shape_u_inv(self.m, 1.0 - p)? * self.scale_cycles(severity)?)
    }

    /// `Pr(N(S) > n) = exp(-(n/⟨N⟩(S))^m)`.
    pub fn survival_constant(&self, severity: f64, n: f64) -> Result<f64> {
        if !(n >= 0.0) {
            return domain(format!("cycle count must be nonnegative, got {n}"));
        }
        Ok((-(n / self.scale_cycles(severity)?).powf(self.m)).exp())
    }

    /// Miner damage `D_{p,n} = Σ_{i ≤ n} 1/N_p(S_i)` over the first `n`
    /// cycles of `seq`.
    pub fn miner_damage_prefix(&self, p: f64, seq: &SeveritySequence, n: f64) -> Result<f64> {
        check_open_probability("p", p)?;
        let factor = shape_u_inv(self.m, 1.0 - p)?;
        seq.prefix_sum(n, |s| 1.0 / (factor * self.scale_unchecked(s)))
    }

    /// Miner damage of the whole sequence.
    pub fn miner_damage(&self, p: f64, seq: &SeveritySequence) -> Result<f64> {
        self.miner_damage_prefix(p, seq, seq.total_cycles() as f64)
    }

    /// Miner's theoretical NCF: the first cycle at which `D_{p,n} ≥ 1`.
    ///
    /// Damage within [`MINER_ROUNDING`] of one counts as one, so that blocks
    /// whose damages add up to exactly one in real arithmetic end at the
    /// last cycle of the sequence.
    pub fn miner_ncf(&self, p: f64, seq: &SeveritySequence) -> Result<MinerNcf> {
        check_open_probability("p", p)?;
        const ONE: f64 = 1.0 - MINER_ROUNDING;
        let factor = shape_u_inv(self.m, 1.0 - p)?;
        let mut damage = 0.0;
        let mut before = 0u64;
        for b in seq.blocks() {
            let np = factor * self.scale_unchecked(b.severity);
            let block_damage = b.count as f64 / np;
            if damage + block_damage >= ONE {
                let remaining = (1.0 - damage).max(0.0) * np;
                // smallest j with damage + j/np >= 1, guarded against rounding
                let mut j = remaining.ceil().max(1.0) as u64;
                while j > 1 && damage + (j - 1) as f64 / np >= ONE {
                    j -= 1;
                }
                while damage + j as f64 / np < ONE && j < b.count {
                    j += 1;
                }
                return Ok(MinerNcf { crossing: before as f64 + remaining, cycles: before + j.min(b.count) });
            }
            damage += block_damage;
            before += b.count;
        }
        Err(Error::SequenceExhausted { damage })
    }

    /// `Pr(N(S) > n) = exp(-(Σ_{i ≤ n} S_i^α / κ)^m)`.
    pub fn survival_variable(&self, seq: &SeveritySequence, n: f64) -> Result<f64> {
        let load = seq.prefix_sum(n, |s| s.powf(self.alpha))?;
        Ok((-(load / self.kappa).powf(self.m)).exp())
    }
}

/// Monotone map `n ↦ Pr(N > n)` sampled on an increasing cycle grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurvivalCurve {
    points: Vec<(f64, f64)>,
}

impl SurvivalCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return domain("survival curve cycle grid must be strictly increasing");
        }
        if points.windows(2).any(|w| w[1].1 > w[0].1) {
            return domain("survival curve must be nonincreasing");
        }
        if points.iter().any(|&(_, q)| !(0.0..=1.0).contains(&q)) {
            return domain("survival probabilities must lie in [0, 1]");
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn cycles(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn params() -> WeibullBasquin {
        WeibullBasquin::from_detail(1.5, 3.0, &DetailCategory::new(0.05, 2e6, 200.0).unwrap()).unwrap()
    }

    fn sequence() -> impl Strategy<Value = SeveritySequence> {
        prop::collection::vec((50.0..500.0f64, 1u64..200_000), 1..12).prop_map(|v| {
            SeveritySequence::new(v.into_iter().map(|(severity, count)| Block { severity, count }).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn survival_is_p_independent(seq in sequence(), frac in 0.0..1.0f64, p in 0.01..0.99f64) {
            let wb = params();
            let n = (seq.total_cycles() as f64 * frac).floor();
            let reference = wb.survival_variable(&seq, n).unwrap();
            let d = wb.miner_damage_prefix(p, &seq, n).unwrap();
            let other = survival_from_damage(wb.m(), p, d);
            prop_assert!((other - reference).abs() <= 1e-12 * reference.max(1e-300) || (other - reference).abs() < 1e-300);
        }

        #[test]
        fn quantile_round_trip(p in 0.001..0.999f64, s in 10.0..1000.0f64) {
            let wb = params();
            let n = wb.sn_quantile(p, s).unwrap();
            prop_assert!((wb.survival_constant(s, n).unwrap() - (1.0 - p)).abs() < 1e-10);
        }

        #[test]
        fn survival_nonincreasing_and_damage_nondecreasing(seq in sequence(), extra in sequence()) {
            let wb = params();
            let total = seq.total_cycles() as f64;
            let mut last = 1.0;
            for i in 0..=10 {
                let q = wb.survival_variable(&seq, total * i as f64 / 10.0).unwrap();
                prop_assert!(q <= last);
                last = q;
            }
            let d = wb.miner_damage(0.05, &seq).unwrap();
            let d_more = wb.miner_damage(0.05, &seq.concat(&extra)).unwrap();
            prop_assert!(d_more >= d);
            let d_extra = wb.miner_damage(0.05, &extra).unwrap();
            prop_assert!((d_more - d - d_extra).abs() <= 1e-12 * d_more);
        }

        #[test]
        fn miner_ncf_matches_expanded_oracle(
            blocks in prop::collection::vec((150.0..600.0f64, 1u64..50), 1..40),
            p in 0.02..0.9f64,
        ) {
            let wb = params();
            let seq = SeveritySequence::new(
                blocks.into_iter().map(|(severity, count)| Block { severity, count }).collect(),
            ).unwrap().repeat(50);
            let mut damage = 0.0;
            let mut brute = None;
            for (i, s) in seq.expand().enumerate() {
                damage += 1.0 / wb.sn_quantile(p, s).unwrap();
                if damage >= 1.0 {
                    brute = Some(i as u64 + 1);
                    break;
                }
            }
            match (wb.miner_ncf(p, &seq), brute) {
                (Ok(ncf), Some(b)) => prop_assert!(ncf.cycles.abs_diff(b) <= 1),
                (Err(Error::SequenceExhausted { .. }), None) => {}
                (Err(Error::SequenceExhausted { damage }), Some(_)) => prop_assert!((damage - 1.0).abs() < 1e-9),
                (Ok(ncf), None) => prop_assert!((damage - 1.0).abs() < 1e-9, "ncf {:?}", ncf),
                (other, _) => prop_assert!(false, "{:?}", other),
            }
        }
    }
}
