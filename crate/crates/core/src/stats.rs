//! Small statistical helpers shared by the simulators and their checks.

/// Two-sided standard normal quantile for a 99% band.
pub const Z_99: f64 = 2.575_829_303_548_901;

/// Nearest-rank quantile of order `p` of an ascending sample.
///
/// Returns the smallest sample value `x` such that at least a fraction `p`
/// of the sample is `<= x`, i.e. `sorted[ceil(p n) - 1]`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Sorts a sample of finite values in place.
pub fn sort_finite(xs: &mut [f64]) {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Whether the true proportion `p` lies in the 99% binomial acceptance band
/// around the observed frequency.
pub fn within_binomial_99(successes: usize, trials: usize, p: f64) -> bool {
    let (lo, hi) = wilson_interval(successes, trials, Z_99);
    (lo..=hi).contains(&p)
}

/// `P(X ≤ k)` for `X ~ Binomial(n, p)`, summed from log-space terms.
pub fn binomial_cdf(k: usize, n: usize, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    let ln_nf = libm::lgamma(n as f64 + 1.0);
    let total: f64 = (0..=k)
        .map(|j| {
            let jf = j as f64;
            (ln_nf - libm::lgamma(jf + 1.0) - libm::lgamma((n - j) as f64 + 1.0)
                + jf * p.ln()
                + (n - j) as f64 * (-p).ln_1p())
            .exp()
        })
        .sum();
    total.min(1.0)
}

/// Exact distribution-free band of order statistics for the `p`-quantile.
///
/// Returns 1-based ranks `(lo, hi)` with `P(x_(lo) ≤ q_p) ≥ 1 - (1-level)/2`
/// and `P(x_(hi) ≥ q_p) ≥ 1 - (1-level)/2`. `lo = 0` means no lower bound
/// exists at this sample size, `hi = n + 1` no upper bound.
pub fn order_statistic_band(n: usize, p: f64, level: f64) -> (usize, usize) {
    let tail = (1.0 - level) / 2.0;
    // P(x_(r) ≤ q) = P(X ≥ r) = 1 - cdf(r - 1)
    let lo = (1..=n).rev().find(|&r| binomial_cdf(r - 1, n, p) <= tail).unwrap_or(0);
    let hi = (1..=n).find(|&r| binomial_cdf(r - 1, n, p) >= 1.0 - tail).unwrap_or(n + 1);
    (lo, hi)
}

/// Whether `q` lies between the order statistics of
/// [`order_statistic_band`] of an ascending sample.
pub fn quantile_in_band(sorted: &[f64], p: f64, q: f64, level: f64) -> bool {
    let (lo, hi) = order_statistic_band(sorted.len(), p, level);
    let above = lo == 0 || sorted[lo - 1] <= q;
    let below = hi > sorted.len() || q <= sorted[hi - 1];
    above && below
}

/// Empirical survival `#{x > n} / len` at every point of `grid`.
///
/// `samples` must be sorted ascending; infinite values count as survivors.
pub fn empirical_survival(sorted: &[f64], grid: &[f64]) -> Vec<f64> {
    let total = sorted.len() as f64;
    grid.iter()
        .map(|&n| {
            let failed = sorted.partition_point(|&x| x <= n);
            (sorted.len() - failed) as f64 / total
        })
        .collect()
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    sort_finite(&mut a);
    sort_finite(&mut b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0_f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample KS statistic at level `alpha`.
pub fn ks_critical(n_a: usize, n_b: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    let (na, nb) = (n_a as f64, n_b as f64);
    c * ((na + nb) / (na * nb)).sqrt()
}

/// Log-spaced grid of `points` values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == points {
                hi
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

/// Uniform grid of `points` values from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2);
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}
