//! Random loads and the survival of an elastic structure under them.
//!
//! Loads are either a deterministic constant `P` or i.i.d. with `P^α`
//! Gamma distributed (shape `a`, rate `θ`). Sums of `P_i^α` over blocks of
//! cycles are then Gamma distributed too, so one draw per grid interval
//! suffices to simulate the cumulated load along a whole cycle grid.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, ensure_positive, Error, Result};
use crate::rng::SeededRng;
use crate::specimen::SurvivalCurve;
use crate::stats::log_grid;
use crate::structure::StructureConstant;

/// Bracket of the Gamma shape searched when fitting a coefficient of
/// variation.
pub const SHAPE_BRACKET: (f64, f64) = (1e-3, 1e6);
const BISECTION_STEPS: usize = 200;
/// Replications simulated per parallel task.
const REPLICATION_CHUNK: usize = 256;

fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Law of the load `P` of one cycle, in MN.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "variant")]
pub enum LoadModel {
    DeterministicConstant {
        p: f64,
    },
    /// `P^α ~ Gamma(shape a, rate θ)`.
    IidGammaAlpha {
        theta: f64,
        a: f64,
        alpha: f64,
    },
}

/// Coefficient of variation of `P` when `P^α` has Gamma shape `a`.
fn cv_of_shape(a: f64, alpha: f64) -> f64 {
    let l1 = ln_gamma(a + 1.0 / alpha);
    let l2 = ln_gamma(a + 2.0 / alpha);
    let l0 = ln_gamma(a);
    (l2 + l0 - 2.0 * l1).exp_m1().max(0.0).sqrt()
}

/// Fits `(θ, a)` so that `P` has mean `p_mean` and coefficient of variation
/// `c`; `c = 0` gives the deterministic load.
///
/// The coefficient of variation decreases in `a`, so `a` is found by
/// bisection in `ln a` over [`SHAPE_BRACKET`], then `θ` from the mean.
pub fn gamma_fit(p_mean: f64, c: f64, alpha: f64) -> Result<LoadModel> {
    ensure_positive("mean load", p_mean)?;
    ensure_positive("alpha", alpha)?;
    if !(c >= 0.0 && c.is_finite()) {
        return domain(format!("coefficient of variation must be nonnegative, got {c}"));
    }
    if c == 0.0 {
        return Ok(LoadModel::DeterministicConstant { p: p_mean });
    }
    let (lo, hi) = SHAPE_BRACKET;
    let (c_hi, c_lo) = (cv_of_shape(lo, alpha), cv_of_shape(hi, alpha));
    if !(c > c_lo && c < c_hi) {
        return domain(format!("coefficient of variation {c} outside the reachable range ({c_lo}, {c_hi})"));
    }
    let (mut l, mut h) = (lo.ln(), hi.ln());
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (l + h);
        if cv_of_shape(mid.exp(), alpha) > c {
            l = mid;
        } else {
            h = mid;
        }
        if h - l <= 1e-15 * h.abs().max(1.0) {
            break;
        }
    }
    let a = (0.5 * (l + h)).exp();
    let theta = (alpha * (ln_gamma(a + 1.0 / alpha) - ln_gamma(a) - p_mean.ln())).exp();
    Ok(LoadModel::IidGammaAlpha { theta, a, alpha })
}

impl LoadModel {
    pub fn deterministic(p: f64) -> Result<Self> {
        ensure_positive("load", p)?;
        Ok(Self::DeterministicConstant { p })
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Self::DeterministicConstant { .. })
    }

    /// `E[P]`.
    pub fn mean(&self) -> f64 {
        match *self {
            Self::DeterministicConstant { p } => p,
            Self::IidGammaAlpha { theta, a, alpha } => {
                (ln_gamma(a + 1.0 / alpha) - ln_gamma(a) - theta.ln() / alpha).exp()
            }
        }
    }

    /// Coefficient of variation of `P`.
    pub fn cv(&self) -> f64 {
        match *self {
            Self::DeterministicConstant { .. } => 0.0,
            Self::IidGammaAlpha { a, alpha, .. } => cv_of_shape(a, alpha),
        }
    }

    fn gamma(&self, shape_factor: f64) -> Result<Gamma<f64>> {
        match *self {
            Self::IidGammaAlpha { theta, a, .. } => {
                Gamma::new(shape_factor * a, 1.0 / theta).map_err(|e| Error::Domain(e.to_string()))
            }
            Self::DeterministicConstant { .. } => domain("deterministic load has no Gamma law"),
        }
    }

    /// One load `P`.
    pub fn sample_load<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match *self {
            Self::DeterministicConstant { p } => Ok(p),
            Self::IidGammaAlpha { alpha, .. } => Ok(self.gamma(1.0)?.sample(rng).powf(1.0 / alpha)),
        }
    }

    /// Density of `P` at `p > 0`.
    pub fn density(&self, p: f64) -> f64 {
        match *self {
            Self::DeterministicConstant { .. } => 0.0,
            Self::IidGammaAlpha { theta, a, alpha } => {
                if p <= 0.0 {
                    return 0.0;
                }
                let x = p.powf(alpha);
                let ln_fx = a * theta.ln() + (a - 1.0) * x.ln() - theta * x - ln_gamma(a);
                (ln_fx + alpha.ln() + (alpha - 1.0) * p.ln()).exp()
            }
        }
    }
}

/// Cumulated loads `Σ_{i ≤ n} P_i^α` at every `n` of an increasing grid.
///
/// The increment over `(n_{j-1}, n_j]` is one `Gamma(Δn · a, θ)` draw.
/// `alpha` is the exponent of the structure; for a Gamma model it must
/// match the model's own exponent.
pub fn sample_load_sums<R: Rng + ?Sized>(
    model: &LoadModel,
    alpha: f64,
    n_grid: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_grid(n_grid)?;
    match *model {
        LoadModel::DeterministicConstant { p } => {
            let unit = p.powf(alpha);
            Ok(n_grid.iter().map(|&n| n * unit).collect())
        }
        LoadModel::IidGammaAlpha { theta, a, alpha: model_alpha } => {
            if model_alpha != alpha {
                return domain(format!("load exponent {model_alpha} differs from structure exponent {alpha}"));
            }
            let mut out = Vec::with_capacity(n_grid.len());
            let (mut prev, mut acc) = (0.0, 0.0);
            for &n in n_grid {
                let shape = (n - prev) * a;
                if shape > 0.0 {
                    let g = Gamma::new(shape, 1.0 / theta).map_err(|e| Error::Domain(e.to_string()))?;
                    acc += g.sample(rng);
                }
                out.push(acc);
                prev = n;
            }
            Ok(out)
        }
    }
}

fn check_grid(n_grid: &[f64]) -> Result<()> {
    if n_grid.is_empty() {
        return domain("cycle grid is empty");
    }
    if !(n_grid[0] >= 0.0) || n_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return domain("cycle grid must be nonnegative and strictly increasing");
    }
    Ok(())
}

/// Monte Carlo settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McConfig {
    pub replications: usize,
    pub n_grid: Vec<f64>,
    pub master_seed: u64,
}

impl McConfig {
    /// 200 log-spaced points from 10³ to 10⁹ cycles.
    pub fn default_grid() -> Vec<f64> {
        log_grid(1e3, 1e9, 200)
    }

    pub fn new(replications: usize, n_grid: Vec<f64>, master_seed: u64) -> Result<Self> {
        if replications == 0 {
            return domain("at least one replication is required");
        }
        check_grid(&n_grid)?;
        Ok(Self { replications, n_grid, master_seed })
    }
}

impl Default for McConfig {
    fn default() -> Self {
        Self { replications: 10_000, n_grid: Self::default_grid(), master_seed: 0 }
    }
}

/// Estimated survival curve with the standard error of each point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McSurvival {
    pub curve: SurvivalCurve,
    pub stderr: Vec<f64>,
}

/// Neumaier accumulator.
#[derive(Clone, Copy, Default)]
struct Acc {
    sum: f64,
    comp: f64,
}

impl Acc {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `(1/R) Σ_r exp(-Q (Σ_{i ≤ n} P_i^α)^m)` at every grid point.
///
/// Replication `r` draws from stream `r` of the master seed, and averages
/// are accumulated in replication order, so the result is independent of
/// the thread count. A deterministic load returns the closed form with zero
/// standard error.
pub fn mc_survival(q: &StructureConstant, model: &LoadModel, cfg: &McConfig) -> Result<McSurvival> {
    check_grid(&cfg.n_grid)?;
    let points = cfg.n_grid.len();
    if let LoadModel::DeterministicConstant { p } = *model {
        let probs: Vec<(f64, f64)> = cfg.n_grid.iter().map(|&n| (n, q.survival_constant_load(p, n))).collect();
        return Ok(McSurvival { curve: SurvivalCurve::new(probs)?, stderr: vec![0.0; points] });
    }
    let chunks = cfg.replications.div_ceil(REPLICATION_CHUNK);
    let per_chunk: Vec<Vec<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * REPLICATION_CHUNK).min(cfg.replications);
            (c * REPLICATION_CHUNK..end)
                .map(|r| {
                    let mut rng = SeededRng::new(cfg.master_seed, r as u64);
                    let sums = sample_load_sums(model, q.alpha, &cfg.n_grid, &mut rng)?;
                    Ok(sums.into_iter().map(|s| q.survival_from_load_sum(s)).collect())
                })
                .collect::<Result<Vec<Vec<f64>>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mean = vec![Acc::default(); points];
    let mut square = vec![Acc::default(); points];
    for rep in per_chunk.iter().flatten() {
        for (j, &v) in rep.iter().enumerate() {
            mean[j].add(v);
            square[j].add(v * v);
        }
    }
    let r = cfg.replications as f64;
    let mut probs = Vec::with_capacity(points);
    let mut stderr = Vec::with_capacity(points);
    let mut running = 1.0f64;
    for j in 0..points {
        let m = (mean[j].value() / r).clamp(0.0, 1.0);
        // averaging nonincreasing curves is nonincreasing up to rounding
        running = running.min(m);
        let var = if cfg.replications > 1 { ((square[j].value() - r * m * m) / (r - 1.0)).max(0.0) } else { 0.0 };
        probs.push((cfg.n_grid[j], running));
        stderr.push((var / r).sqrt());
    }
    Ok(McSurvival { curve: SurvivalCurve::new(probs)?, stderr })
}

/// `p`-quantile of the NCF under the constant load `p_load`:
/// `(-ln(1-p))^(1/m) / (Q^(1/m) P^α)`.
pub fn ncf_quantile_det(q: &StructureConstant, p_load: f64, p: f64) -> Result<f64> {
    ensure_positive("load", p_load)?;
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("probability must lie in (0, 1), got {p}"));
    }
    Ok((-(-p).ln_1p() / q.q).powf(1.0 / q.m) / p_load.powf(q.alpha))
}

/// First cycle count at which the curve drops to `1-p`, interpolating the
/// survival linearly in `ln n` between bracketing grid points.
///
/// For `p = 0`, or when the first grid point is already at or below `1-p`,
/// the first grid point is returned.
pub fn ncf_quantile_sto(curve: &SurvivalCurve, p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return domain(format!("probability must lie in [0, 1), got {p}"));
    }
    let pts = curve.points();
    if pts.is_empty() {
        return domain("empty survival curve");
    }
    let target = 1.0 - p;
    if p == 0.0 || pts[0].1 <= target {
        return Ok(pts[0].0);
    }
    let j = pts.iter().position(|&(_, s)| s <= target).ok_or(Error::GridTooShort { last: pts[pts.len() - 1].1 })?;
    let ((n0, s0), (n1, s1)) = (pts[j - 1], pts[j]);
    if n0 <= 0.0 {
        let t = (s0 - target) / (s0 - s1);
        return Ok(n0 + t * (n1 - n0));
    }
    let t = (s0 - target) / (s0 - s1);
    Ok((n0.ln() + t * (n1.ln() - n0.ln())).exp())
}

/// Deterministic equivalent load of a random load law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EquivLoad {
    pub p_eq: f64,
    /// `P_eq / P_mean`.
    pub ratio: f64,
    pub p: f64,
    pub c: f64,
    /// Stochastic `p`-quantile of the NCF that `P_eq` reproduces.
    pub n_sto: f64,
}

/// Constant load whose `p`-quantile NCF equals the Monte Carlo `p`-quantile
/// NCF under the fitted random load of mean `p_mean` and variation `c`.
pub fn equiv_load(q: &StructureConstant, p_mean: f64, c: f64, p: f64, cfg: &McConfig) -> Result<EquivLoad> {
    let model = gamma_fit(p_mean, c, q.alpha)?;
    let mc = mc_survival(q, &model, cfg)?;
    equiv_load_from_curve(q, &mc.curve, p_mean, c, p)
}

/// [`equiv_load`] from an already estimated survival curve.
pub fn equiv_load_from_curve(
    q: &StructureConstant,
    curve: &SurvivalCurve,
    p_mean: f64,
    c: f64,
    p: f64,
) -> Result<EquivLoad> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("probability must lie in (0, 1), got {p}"));
    }
    let n_sto = ncf_quantile_sto(curve, p)?;
    let p_eq = ((-(-p).ln_1p() / q.q).powf(1.0 / q.m) / n_sto).powf(1.0 / q.alpha);
    Ok(EquivLoad { p_eq, ratio: p_eq / p_mean, p, c, n_sto })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_critical, ks_statistic};
    use approx::assert_relative_eq;

    fn q() -> StructureConstant {
        StructureConstant { q: 7.9e-8, m: 1.5, alpha: 3.0 }
    }

    #[test]
    fn fit_round_trip() {
        assert_eq!(gamma_fit(0.25, 0.0, 3.0).unwrap(), LoadModel::DeterministicConstant { p: 0.25 });
        for &c in &[0.05, 0.2, 0.5, 1.0, 3.0] {
            let m = gamma_fit(0.25, c, 3.0).unwrap();
            assert_relative_eq!(m.mean(), 0.25, max_relative = 1e-8);
            assert_relative_eq!(m.cv(), c, max_relative = 1e-8);
        }
        assert!(gamma_fit(0.25, 1e6, 3.0).is_err());
        assert!(gamma_fit(-1.0, 0.5, 3.0).is_err());
    }

    #[test]
    fn cv_decreasing_in_shape() {
        let mut last = f64::INFINITY;
        for i in 0..=90 {
            let a = 10f64.powf(-3.0 + i as f64 / 10.0);
            let c = cv_of_shape(a, 3.0);
            assert!(c < last, "a={a}");
            last = c;
        }
    }

    #[test]
    fn sampled_loads_match_fit() {
        let m = gamma_fit(0.25, 0.5, 3.0).unwrap();
        let mut rng = SeededRng::new(17, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| m.sample_load(&mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((mean / 0.25 - 1.0).abs() < 0.005);
        assert!((var.sqrt() / mean / 0.5 - 1.0).abs() < 0.01);
    }

    #[test]
    fn density_integrates_to_one() {
        let m = gamma_fit(0.25, 0.5, 3.0).unwrap();
        let n = 20_000;
        let h = 2.0 / n as f64;
        let total: f64 = (0..n).map(|i| m.density((i as f64 + 0.5) * h) * h).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn deterministic_sums_and_gamma_mean() {
        let d = LoadModel::deterministic(0.3).unwrap();
        let sums = sample_load_sums(&d, 3.0, &[1.0, 10.0, 1e6], &mut SeededRng::new(0, 0)).unwrap();
        let unit = 0.3f64.powf(3.0);
        assert_eq!(sums, vec![unit, 10.0 * unit, 1e6 * unit]);

        let m = gamma_fit(0.25, 0.5, 3.0).unwrap();
        let LoadModel::IidGammaAlpha { theta, a, .. } = m else { unreachable!() };
        let reps = 20_000;
        let mut total = 0.0;
        for r in 0..reps {
            let s = sample_load_sums(&m, 3.0, &[10.0, 50.0], &mut SeededRng::new(2, r)).unwrap();
            assert!(s[1] > s[0]);
            total += s[1];
        }
        let mean = total / reps as f64;
        let sd = (50.0 * a).sqrt() / theta / (reps as f64).sqrt();
        assert!((mean - 50.0 * a / theta).abs() < 4.0 * sd);
    }

    #[test]
    fn block_and_unit_sampling_agree() {
        let m = gamma_fit(0.25, 1.0, 3.0).unwrap();
        let n = 40;
        let reps = 10_000;
        let block: Vec<f64> =
            (0..reps).map(|r| sample_load_sums(&m, 3.0, &[n as f64], &mut SeededRng::new(31, r)).unwrap()[0]).collect();
        let unit: Vec<f64> = (0..reps)
            .map(|r| {
                let mut rng = SeededRng::new(32, r);
                (0..n).map(|_| m.sample_load(&mut rng).unwrap().powi(3)).sum()
            })
            .collect();
        assert!(ks_statistic(&block, &unit) < ks_critical(reps as usize, reps as usize, 0.01));
    }

    #[test]
    fn deterministic_mc_is_closed_form() {
        let cfg = McConfig::new(10, McConfig::default_grid(), 3).unwrap();
        let mc = mc_survival(&q(), &LoadModel::deterministic(0.25).unwrap(), &cfg).unwrap();
        for (&(n, s), &e) in mc.curve.points().iter().zip(&mc.stderr) {
            assert_eq!(s, q().survival_constant_load(0.25, n));
            assert_eq!(e, 0.0);
        }
    }

    #[test]
    fn mc_is_reproducible_and_monotone() {
        let m = gamma_fit(0.25, 0.5, 3.0).unwrap();
        let cfg = McConfig::new(700, log_grid(1e4, 1e8, 60), 8).unwrap();
        let a = mc_survival(&q(), &m, &cfg).unwrap();
        let b = mc_survival(&q(), &m, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.curve.probabilities().collect::<Vec<_>>().windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn stderr_scales_with_replications() {
        let m = gamma_fit(0.25, 1.0, 3.0).unwrap();
        let grid = log_grid(1e5, 1e8, 30);
        let small = mc_survival(&q(), &m, &McConfig::new(1000, grid.clone(), 5).unwrap()).unwrap();
        let large = mc_survival(&q(), &m, &McConfig::new(4000, grid, 5).unwrap()).unwrap();
        let j = 15;
        let ratio = small.stderr[j] / large.stderr[j];
        assert!((ratio - 2.0).abs() < 0.25, "{ratio}");
    }

    #[test]
    fn deterministic_quantile_examples() {
        let sc = q();
        let n1 = ncf_quantile_det(&sc, 0.2, 0.05).unwrap();
        let n2 = ncf_quantile_det(&sc, 0.4, 0.05).unwrap();
        assert_relative_eq!(n1 / n2, 8.0, max_relative = 1e-12);
        let unit = StructureConstant { q: 0.3, m: 1.5, alpha: 3.0 };
        let p = 1.0 - (-0.3f64).exp();
        assert_relative_eq!(ncf_quantile_det(&unit, 1.0, p).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(sc.survival_constant_load(0.2, n1), 0.95, max_relative = 1e-10);

        // bisection on the survival as an independent root finder
        let (mut lo, mut hi) = (1.0f64, 1e12f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if sc.survival_constant_load(0.2, mid) > 0.95 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_relative_eq!(lo, n1, max_relative = 1e-8);
    }

    #[test]
    fn stochastic_quantile_on_deterministic_curve() {
        let sc = q();
        let grid = McConfig::default_grid();
        let cfg = McConfig::new(1, grid.clone(), 0).unwrap();
        let mc = mc_survival(&sc, &LoadModel::deterministic(0.25).unwrap(), &cfg).unwrap();
        let exact = ncf_quantile_det(&sc, 0.25, 0.5).unwrap();
        let est = ncf_quantile_sto(&mc.curve, 0.5).unwrap();
        let step = grid[1] / grid[0];
        assert!(est / exact < step && exact / est < step);
        assert_eq!(ncf_quantile_sto(&mc.curve, 0.0).unwrap(), 1e3);

        let fine = McConfig::new(1, log_grid(1e3, 1e9, 399), 0).unwrap();
        let fine_mc = mc_survival(&sc, &LoadModel::deterministic(0.25).unwrap(), &fine).unwrap();
        let est_fine = ncf_quantile_sto(&fine_mc.curve, 0.5).unwrap();
        assert!((est_fine / exact - 1.0).abs() <= (est / exact - 1.0).abs() + 1e-9);
        assert!((est_fine / est - 1.0).abs() < 0.01);

        let short = SurvivalCurve::new(vec![(1.0, 1.0), (2.0, 0.9)]).unwrap();
        assert!(matches!(ncf_quantile_sto(&short, 0.5), Err(Error::GridTooShort { .. })));
    }

    #[test]
    fn equivalent_load_degenerates_at_zero_variation() {
        let cfg = McConfig::new(10, McConfig::default_grid(), 0).unwrap();
        for &p in &[0.05, 0.5] {
            let e = equiv_load(&q(), 0.25, 0.0, p, &cfg).unwrap();
            assert!((e.ratio - 1.0).abs() < 0.01, "{}", e.ratio);
        }
    }
}
