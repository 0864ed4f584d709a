//! Weakest-link structures.
//!
//! A structure is a finite partition of cells with measure `λ(F_k)`. Under
//! the weakest-link hypothesis the survival of the whole is the product of
//! the survivals of its cells, `exp(-Σ λ(F_k) g(h_k))`, where `g` is the
//! intensity of the initial-health law per unit measure.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_positive, Result};
use crate::io::fmt_f64;
use crate::rng::SeededRng;
use crate::stats::compensated_sum;

/// Cells per parallel chunk. Chunk sums are combined in index order so the
/// result does not depend on the thread count.
const CHUNK: usize = 4096;

/// Deterministic parallel sum of `f(i)` over `0..n`.
pub(crate) fn ordered_par_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let chunks: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * CHUNK).min(n);
            compensated_sum((c * CHUNK..end).map(&f))
        })
        .collect();
    compensated_sum(chunks)
}

/// Intensity `g` of the initial-health law of a unit measure, with inverse.
///
/// A body of measure `λ` has `Pr(H̄₀ > h) = exp(-λ g(h))`.
pub trait Intensity: Sync {
    fn g(&self, h: f64) -> f64;
    fn g_inv(&self, y: f64) -> f64;
}

/// Specimen law lifted to a structure.
///
/// The scale function is `⟨N⟩(S) = κ_ref S^(-α)` and the intensity is
/// `g(h) = h^m / λ_ref`, so that `g(n/⟨N⟩(S)) = (n S^α / κ_ref)^m / λ_ref`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeEffectModel {
    pub m: f64,
    pub alpha: f64,
    /// Scale constant of the reference specimen, cycles·MPa^α.
    pub kappa_ref: f64,
    /// Measure of the reference specimen, m³.
    pub lambda_ref: f64,
}

impl SizeEffectModel {
    pub fn new(m: f64, alpha: f64, kappa_ref: f64, lambda_ref: f64) -> Result<Self> {
        ensure_positive("m", m)?;
        ensure_positive("alpha", alpha)?;
        ensure_positive("kappa_ref", kappa_ref)?;
        ensure_positive("lambda_ref", lambda_ref)?;
        Ok(Self { m, alpha, kappa_ref, lambda_ref })
    }

    /// `⟨N⟩(S)` of the reference specimen.
    pub fn scale_cycles(&self, severity: f64) -> f64 {
        self.kappa_ref * severity.powf(-self.alpha)
    }

    /// `g(h)` with a domain check.
    pub fn g_eval(&self, h: f64) -> Result<f64> {
        if !(h >= 0.0) {
            return domain(format!("health must be nonnegative, got {h}"));
        }
        Ok(self.g(h))
    }
}

impl Intensity for SizeEffectModel {
    fn g(&self, h: f64) -> f64 {
        h.powf(self.m) / self.lambda_ref
    }

    fn g_inv(&self, y: f64) -> f64 {
        (y * self.lambda_ref).powf(1.0 / self.m)
    }
}

/// `g` composed with a linear change of health scale, `h ↦ g(c h)`.
#[derive(Clone, Copy, Debug)]
pub struct Rescaled<G> {
    pub inner: G,
    pub c: f64,
}

impl<G: Intensity> Intensity for Rescaled<G> {
    fn g(&self, h: f64) -> f64 {
        self.inner.g(self.c * h)
    }

    fn g_inv(&self, y: f64) -> f64 {
        self.inner.g_inv(y) / self.c
    }
}

/// One cell: its measure and the unitary severity at its midpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// m³.
    pub measure: f64,
    /// MPa per MN.
    pub severity: f64,
}

/// Finite partition of a structure into cells.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellPartition {
    cells: Vec<Cell>,
}

#[derive(Serialize, Deserialize)]
struct CellRecord {
    cell_id: usize,
    measure_m3: f64,
    severity_unitary: f64,
}

impl CellPartition {
    pub fn new(cells: Vec<Cell>) -> Result<Self> {
        for (i, c) in cells.iter().enumerate() {
            if !(c.measure > 0.0 && c.measure.is_finite()) {
                return domain(format!("cell {i}: measure must be positive, got {}", c.measure));
            }
            if !(c.severity >= 0.0 && c.severity.is_finite()) {
                return domain(format!("cell {i}: severity must be nonnegative, got {}", c.severity));
            }
        }
        Ok(Self { cells })
    }

    /// `n` cells of measure `measure` and common severity.
    pub fn uniform(n: usize, measure: f64, severity: f64) -> Result<Self> {
        Self::new(vec![Cell { measure, severity }; n])
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_measure(&self) -> f64 {
        ordered_par_sum(self.cells.len(), |i| self.cells[i].measure)
    }

    pub fn measures(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.measure).collect()
    }

    /// Writes `cell_id,measure_m3,severity_unitary`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell_id", "measure_m3", "severity_unitary"])?;
        for (i, c) in self.cells.iter().enumerate() {
            w.write_record([i.to_string(), fmt_f64(c.measure), fmt_f64(c.severity)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut cells = Vec::new();
        for (i, rec) in r.deserialize::<CellRecord>().enumerate() {
            let rec = rec?;
            if rec.cell_id != i {
                return domain(format!("row {}: expected cell_id {i}, got {}", i + 2, rec.cell_id));
            }
            cells.push(Cell { measure: rec.measure_m3, severity: rec.severity_unitary });
        }
        Self::new(cells)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// `exp(-Σ λ(F_k) g(h_k))` for per-cell normalized health spent `h_k`.
pub fn survival_general(measures: &[f64], spent: &[f64], g: &impl Intensity) -> Result<f64> {
    if measures.len() != spent.len() {
        return domain("one health argument per cell is required");
    }
    if let Some(h) = spent.iter().find(|h| !(**h >= 0.0)) {
        return domain(format!("health arguments must be nonnegative, got {h}"));
    }
    let exponent = ordered_par_sum(measures.len(), |k| measures[k] * g.g(spent[k]));
    Ok((-exponent).exp())
}

/// Structure constant `Q` of an elastic structure: survival under loads
/// `P_i` is `exp(-Q (Σ P_i^α)^m)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureConstant {
    pub q: f64,
    pub m: f64,
    pub alpha: f64,
}

/// `Q = (1/λ_ref) Σ λ(F_k) (s_k^α / κ_ref)^m`.
pub fn compute_q(partition: &CellPartition, model: &SizeEffectModel) -> Result<StructureConstant> {
    if partition.is_empty() {
        return domain("cannot integrate over an empty partition");
    }
    let cells = partition.cells();
    let exponent = model.alpha * model.m;
    let log_kappa_m = model.m * model.kappa_ref.ln();
    let sum = ordered_par_sum(cells.len(), |k| {
        let c = cells[k];
        if c.severity == 0.0 {
            0.0
        } else {
            c.measure * (exponent * c.severity.ln() - log_kappa_m).exp()
        }
    });
    let q = sum / model.lambda_ref;
    if !(q > 0.0 && q.is_finite()) {
        return domain(format!("structure constant must be positive and finite, got {q}"));
    }
    Ok(StructureConstant { q, m: model.m, alpha: model.alpha })
}

impl StructureConstant {
    /// `exp(-Q L^m)` for a cumulated load `L = Σ P_i^α`, computed in
    /// log-space.
    pub fn survival_from_load_sum(&self, load_sum: f64) -> f64 {
        if load_sum <= 0.0 {
            return 1.0;
        }
        (-(self.q.ln() + self.m * load_sum.ln()).exp()).exp()
    }

    /// Survival after the loads `P_1, ..., P_n` in MN.
    pub fn survival_elastic(&self, loads: &[f64]) -> Result<f64> {
        if let Some(p) = loads.iter().find(|p| !(**p > 0.0)) {
            return domain(format!("loads must be positive, got {p}"));
        }
        let sum = compensated_sum(loads.iter().map(|p| p.powf(self.alpha)));
        Ok(self.survival_from_load_sum(sum))
    }

    /// Survival after `n` cycles of the constant load `p`.
    pub fn survival_constant_load(&self, p: f64, n: f64) -> f64 {
        self.survival_from_load_sum(n * p.powf(self.alpha))
    }
}

/// Per-cell probability that the first failure occurs in that cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureDensity {
    pub weights: Vec<f64>,
}

/// Weights `∝ λ(F_k) s_k^(αm)`, normalized to one.
pub fn failure_density(partition: &CellPartition, m: f64, alpha: f64) -> Result<FailureDensity> {
    let cells = partition.cells();
    let s_max = cells.iter().map(|c| c.severity).fold(0.0, f64::max);
    if !(s_max > 0.0) {
        return domain("failure density needs at least one positive severity");
    }
    let exponent = alpha * m;
    let raw: Vec<f64> = cells.par_iter().map(|c| c.measure * (c.severity / s_max).powf(exponent)).collect();
    let total = compensated_sum(raw.iter().copied());
    Ok(FailureDensity { weights: raw.into_iter().map(|w| w / total).collect() })
}

/// Health level above which the Poisson flaw field is truncated: the whole
/// structure survives to `h_max` with probability `eps`.
pub fn truncation_health(g: &impl Intensity, total_measure: f64, eps: f64) -> f64 {
    g.g_inv(-eps.ln() / total_measure)
}

/// One draw of the Poisson flaw field.
#[derive(Clone, Debug, PartialEq)]
pub struct FlawSample {
    /// `(cell, health)` of every flaw.
    pub flaws: Vec<(usize, f64)>,
    /// Minimum flaw health per cell, `+∞` for a cell without flaws.
    pub cell_health: Vec<f64>,
    /// Truncation level used for the draw.
    pub h_max: f64,
}

impl FlawSample {
    /// Initial health of the union of `cells`, from the flaws themselves.
    pub fn union_health(&self, cells: &[usize]) -> f64 {
        self.flaws.iter().filter(|(c, _)| cells.contains(c)).map(|&(_, h)| h).fold(f64::INFINITY, f64::min)
    }
}

/// Poisson flaws on `cells × (0, h_max]` with intensity `λ ⊗ dg`.
///
/// Cell `k` draws from sub-stream `k` of `rng`, so cells are independent
/// of evaluation order.
pub fn poisson_microscopic_sample(
    measures: &[f64],
    g: &impl Intensity,
    h_max: f64,
    rng: &SeededRng,
) -> Result<FlawSample> {
    ensure_positive("h_max", h_max)?;
    let g_max = g.g(h_max);
    let mut flaws = Vec::new();
    let mut cell_health = Vec::with_capacity(measures.len());
    for (k, &measure) in measures.iter().enumerate() {
        ensure_positive("cell measure", measure)?;
        let mut stream = rng.substream(k as u64);
        let mean = measure * g_max;
        let count = if mean > 0.0 {
            Poisson::new(mean).map_err(|e| crate::Error::Domain(e.to_string()))?.sample(&mut stream) as u64
        } else {
            0
        };
        let mut lowest = f64::INFINITY;
        for _ in 0..count {
            let u = 1.0 - stream.random::<f64>();
            let h = g.g_inv(u * g_max);
            lowest = lowest.min(h);
            flaws.push((k, h));
        }
        cell_health.push(lowest);
    }
    Ok(FlawSample { flaws, cell_health, h_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{empirical_survival, ks_critical, ks_statistic, sort_finite, within_binomial_99};
    use approx::assert_relative_eq;

    fn model() -> SizeEffectModel {
        SizeEffectModel::new(1.5, 3.0, 1.158_989_728_897_324e14, 3e-5).unwrap()
    }

    #[test]
    fn g_examples() {
        let md = model();
        assert_eq!(md.g_eval(0.0).unwrap(), 0.0);
        assert_relative_eq!(md.g_eval(1.0).unwrap(), 1.0 / 3e-5);
        let (n, s) = (1.5e6, 180.0);
        assert_relative_eq!(
            md.g(n / md.scale_cycles(s)),
            (n * s.powf(3.0) / md.kappa_ref).powf(1.5) / 3e-5,
            max_relative = 1e-12
        );
        assert!(md.g_eval(-1.0).is_err());
        assert_relative_eq!(md.g_inv(md.g(0.37)), 0.37, max_relative = 1e-14);
    }

    #[test]
    fn general_survival_examples() {
        let md = model();
        assert_eq!(survival_general(&[1.0, 2.0], &[0.0, 0.0], &md).unwrap(), 1.0);
        let single = survival_general(&[2e-4], &[0.3], &md).unwrap();
        assert_relative_eq!(single, (-2e-4 * md.g(0.3)).exp(), max_relative = 1e-14);
        let halves = survival_general(&[1e-4, 1e-4], &[0.3, 0.3], &md).unwrap();
        assert_relative_eq!(halves, single, max_relative = 1e-14);
        assert!(survival_general(&[1.0], &[-0.1], &md).is_err());
    }

    #[test]
    fn weakest_link_factorization() {
        let md = model();
        let measures = [1e-4, 3e-5, 7e-5];
        let spent = [0.1, 0.4, 0.25];
        let whole = survival_general(&measures, &spent, &md).unwrap();
        let product: f64 = (0..3).map(|k| survival_general(&measures[k..=k], &spent[k..=k], &md).unwrap()).product();
        assert_relative_eq!(whole, product, max_relative = 1e-14);
    }

    #[test]
    fn q_uniform_and_refinement() {
        let md = model();
        let p = CellPartition::uniform(10, 0.2, 80.0).unwrap();
        let q = compute_q(&p, &md).unwrap().q;
        let expected = (2.0 / 3e-5) * (80.0f64.powi(3) / md.kappa_ref).powf(1.5);
        assert_relative_eq!(q, expected, max_relative = 1e-12);
        let fine = CellPartition::uniform(20, 0.1, 80.0).unwrap();
        assert_relative_eq!(compute_q(&fine, &md).unwrap().q, q, max_relative = 1e-12);
        assert!(compute_q(&CellPartition::default(), &md).is_err());
    }

    #[test]
    fn elastic_matches_general() {
        let md = model();
        let p = CellPartition::new(vec![
            Cell { measure: 0.3, severity: 40.0 },
            Cell { measure: 0.1, severity: 95.0 },
            Cell { measure: 0.05, severity: 0.0 },
            Cell { measure: 0.2, severity: 120.0 },
        ])
        .unwrap();
        let sc = compute_q(&p, &md).unwrap();
        let loads: Vec<f64> = (0..5000).map(|i| 0.2 + 0.1 * ((i % 7) as f64) / 7.0).collect();
        let elastic = sc.survival_elastic(&loads).unwrap();
        let load_sum: f64 = compensated_sum(loads.iter().map(|l| l.powi(3)));
        let spent: Vec<f64> = p.cells().iter().map(|c| load_sum * c.severity.powi(3) / md.kappa_ref).collect();
        let general = survival_general(&p.measures(), &spent, &md).unwrap();
        assert_relative_eq!(elastic, general, max_relative = 1e-10);
        assert_eq!(sc.survival_elastic(&[]).unwrap(), 1.0);
        assert!(sc.survival_elastic(&[0.1, -0.2]).is_err());
    }

    #[test]
    fn elastic_nonincreasing_as_loads_append() {
        let sc = StructureConstant { q: 7.9e-8, m: 1.5, alpha: 3.0 };
        let mut loads = Vec::new();
        let mut last = 1.0;
        for i in 0..200 {
            loads.push(0.1 + (i % 5) as f64 * 0.07);
            let q = sc.survival_elastic(&loads).unwrap();
            assert!(q <= last);
            last = q;
        }
    }

    #[test]
    fn normalization_freedom() {
        let md = model();
        let measures = [1e-4, 5e-5, 2e-4];
        let severities = [150.0, 210.0, 90.0];
        let n = 8e5;
        let base_spent: Vec<f64> = severities.iter().map(|&s| n / md.scale_cycles(s)).collect();
        let base = survival_general(&measures, &base_spent, &md).unwrap();
        for &c in &[0.1, 10.0] {
            let spent: Vec<f64> = severities.iter().map(|&s| n / (c * md.scale_cycles(s))).collect();
            let g = Rescaled { inner: md, c };
            let other = survival_general(&measures, &spent, &g).unwrap();
            assert_relative_eq!(other, base, max_relative = 1e-12);
        }
    }

    #[test]
    fn failure_density_examples() {
        let two = CellPartition::new(vec![Cell { measure: 1.0, severity: 1.0 }, Cell { measure: 1.0, severity: 2.0 }])
            .unwrap();
        let w = failure_density(&two, 1.0, 3.0).unwrap().weights;
        assert_relative_eq!(w[0], 1.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(w[1], 8.0 / 9.0, max_relative = 1e-14);

        let uni = CellPartition::new(vec![Cell { measure: 1.0, severity: 5.0 }, Cell { measure: 3.0, severity: 5.0 }])
            .unwrap();
        let w = failure_density(&uni, 1.5, 3.0).unwrap().weights;
        assert_relative_eq!(w[0], 0.25, max_relative = 1e-14);

        assert!(failure_density(&CellPartition::uniform(3, 1.0, 0.0).unwrap(), 1.5, 3.0).is_err());
    }

    #[test]
    fn failure_density_scale_invariant() {
        let cells: Vec<Cell> =
            (0..50).map(|i| Cell { measure: 1e-3 * (1 + i % 3) as f64, severity: 10.0 + i as f64 }).collect();
        let p = CellPartition::new(cells.clone()).unwrap();
        let w = failure_density(&p, 1.5, 3.0).unwrap().weights;
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
        for &c in &[1e-3, 7.0, 1e4] {
            let scaled =
                CellPartition::new(cells.iter().map(|x| Cell { severity: c * x.severity, ..*x }).collect()).unwrap();
            let v = failure_density(&scaled, 1.5, 3.0).unwrap().weights;
            for (a, b) in w.iter().zip(&v) {
                assert_relative_eq!(a, b, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let p = CellPartition::new(vec![
            Cell { measure: 0.1, severity: 1.0 / 3.0 },
            Cell { measure: 2e-7, severity: 129.295 },
        ])
        .unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("cell_id,measure_m3,severity_unitary\n"));
        assert_eq!(CellPartition::read_csv(buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn poisson_cell_law_and_min_stability() {
        let md = model();
        let measures = [1e-4, 1e-4, 3e-4];
        let total: f64 = measures.iter().sum();
        let h_max = truncation_health(&md, total, 1e-6);
        assert!((-total * md.g(h_max)).exp() <= 1e-6 * (1.0 + 1e-12));
        let root = SeededRng::new(4, 0);
        let runs = 20_000;
        let mut a = Vec::with_capacity(runs);
        let mut b = Vec::with_capacity(runs);
        let mut c = Vec::with_capacity(runs);
        for r in 0..runs {
            let s = poisson_microscopic_sample(&measures, &md, h_max, &root.substream(r as u64)).unwrap();
            let union = s.union_health(&[0, 2]);
            assert_eq!(union, s.cell_health[0].min(s.cell_health[2]));
            a.push(s.cell_health[0]);
            b.push(s.cell_health[1]);
            c.push(s.cell_health[2]);
        }
        assert!(ks_statistic(&a, &b) < ks_critical(runs, runs, 0.01));
        sort_finite(&mut c);
        let grid = [0.05, 0.1, 0.2, 0.35];
        let emp = empirical_survival(&c, &grid);
        for (&h, &e) in grid.iter().zip(&emp) {
            let theory = (-measures[2] * md.g(h)).exp();
            assert!(within_binomial_99((e * runs as f64).round() as usize, runs, theory), "h={h}");
        }
    }
}
