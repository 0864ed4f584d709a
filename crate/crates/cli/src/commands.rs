//! One function per subcommand. Each writes its CSV artifacts and, when a
//! report is given, records its acceptance assertions.

use std::collections::HashMap;

use fatiq::ibeam::{severity_grid, severity_grid_quarter, SeverityField};
use fatiq::laplace::{accuracy_table, HotPoint};
use fatiq::loading::{equiv_load_from_curve, gamma_fit, mc_survival, ncf_quantile_sto, LoadModel};
use fatiq::rng::SeededRng;
use fatiq::specimen::survival_from_damage;
use fatiq::stats::{linear_grid, log_grid, quantile_in_band, sort_finite, within_binomial_99};
use fatiq::structure::{compute_q, failure_density, StructureConstant};

use crate::config::RunConfig;
use crate::output::{row, Artifacts, CheckReport};
use crate::CliError;

/// Reference accuracy targets `(k, ratio, I'₁ share, V*₁ web share, V*₂ web share)`.
pub const ACCURACY_TARGETS: [(f64, f64, f64, f64, f64); 3] =
    [(4.5, 1.21, 0.36, 0.20, 0.05), (6.0, 1.11, 0.32, 0.22, 0.04), (10.0, 0.96, 0.24, 0.27, 0.02)];

/// Stream offset of load draws used only by `--check`, far from the
/// replication streams.
const CHECK_STREAM: u64 = 1 << 62;

const CHECK_LOAD_DRAWS: usize = 1_000_000;

fn f(x: f64) -> String {
    fatiq::io::fmt_f64(x)
}

pub fn sn_simulate(cfg: &RunConfig, out: &mut Artifacts, check: Option<&mut CheckReport>) -> Result<(), CliError> {
    let sp = cfg.specimen()?;
    let seed = cfg.mc.seed;
    let n = cfg.sn.specimens;
    let mut samples = Vec::with_capacity(cfg.sn.severities.len());
    let mut rows = Vec::new();
    for (i, &s) in cfg.sn.severities.iter().enumerate() {
        let mut ncfs: Vec<f64> = (0..n)
            .map(|j| {
                let mut rng = SeededRng::new(seed, (i * n + j) as u64);
                fatiq::health::simulate_ncf_constant(&sp, s, &mut rng)
            })
            .collect::<Result<_, _>>()?;
        for (j, &x) in ncfs.iter().enumerate() {
            rows.push(vec![f(s), j.to_string(), f(x)]);
        }
        sort_finite(&mut ncfs);
        samples.push(ncfs);
    }
    out.csv("samples.csv", &["severity_mpa", "specimen", "ncf"], rows)?;

    let lo = cfg.sn.severities.iter().copied().fold(f64::INFINITY, f64::min) * 0.8;
    let hi = cfg.sn.severities.iter().copied().fold(0.0, f64::max) * 1.25;
    let mut curves = Vec::new();
    for &p in &cfg.sn.probabilities {
        for s in log_grid(lo, hi, 100) {
            curves.push(vec![f(p), f(s), f(sp.sn_quantile(p, s)?)]);
        }
    }
    out.csv("sn_curves.csv", &["p", "severity_mpa", "cycles"], curves)?;

    if let Some(report) = check {
        let mut misses = Vec::new();
        for (ncfs, &s) in samples.iter().zip(&cfg.sn.severities) {
            for &p in &cfg.sn.probabilities {
                if !quantile_in_band(ncfs, p, sp.sn_quantile(p, s)?, 0.99) {
                    misses.push(format!("S={s} p={p}"));
                }
            }
        }
        report.record(
            "sn quantiles inside 99% order-statistic bands",
            misses.is_empty(),
            if misses.is_empty() { "all severities".to_owned() } else { misses.join(", ") },
        );
    }
    Ok(())
}

pub fn miner_demo(cfg: &RunConfig, out: &mut Artifacts, check: Option<&mut CheckReport>) -> Result<(), CliError> {
    let sp = cfg.specimen()?;
    let seq = cfg.miner_sequence()?;
    let total = seq.total_cycles() as f64;
    let reps = cfg.mc.replications;
    let mut ncfs = fatiq::health::simulate_ncfs(&sp, &seq, cfg.mc.seed, reps)?;
    sort_finite(&mut ncfs);
    let grid = linear_grid(0.0, total, cfg.miner.grid_points);
    let survivors: Vec<usize> = grid.iter().map(|&n| reps - ncfs.partition_point(|&x| x <= n)).collect();

    let mut rows = Vec::with_capacity(grid.len());
    let mut theory = Vec::with_capacity(grid.len());
    for (&n, &alive) in grid.iter().zip(&survivors) {
        let s = sp.survival_variable(&seq, n)?;
        theory.push(s);
        rows.push(vec![f(n), f(alive as f64 / reps as f64), f(s)]);
    }
    out.csv("survival.csv", &["cycles", "empirical", "theoretical"], rows)?;

    let mut header = vec!["cycles".to_owned()];
    header.extend(cfg.miner.probabilities.iter().map(|p| format!("damage_p{p}")));
    let mut rows = Vec::with_capacity(grid.len());
    let mut damages = Vec::with_capacity(grid.len());
    for &n in &grid {
        let d: Vec<f64> =
            cfg.miner.probabilities.iter().map(|&p| sp.miner_damage_prefix(p, &seq, n)).collect::<Result<_, _>>()?;
        let mut r = vec![n];
        r.extend(&d);
        rows.push(row(&r));
        damages.push(d);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("damage.csv", &header, rows)?;

    let step = grid[1] - grid[0];
    let mut crossings = Vec::new();
    let mut rows = Vec::new();
    for &p in &cfg.miner.probabilities {
        let miner = match sp.miner_ncf(p, &seq) {
            Ok(m) => m.crossing,
            Err(fatiq::Error::SequenceExhausted { .. }) => f64::INFINITY,
            Err(e) => return Err(e.into()),
        };
        let target = (1.0 - p) * reps as f64;
        let empirical = grid
            .iter()
            .zip(&survivors)
            .find(|&(_, &alive)| (alive as f64) <= target)
            .map_or(f64::INFINITY, |(&n, _)| n);
        rows.push(row(&[p, miner, empirical, step]));
        crossings.push((p, miner, empirical));
    }
    out.csv("crossings.csv", &["p", "miner_ncf", "empirical_crossing", "grid_step"], rows)?;

    if let Some(report) = check {
        let outside: Vec<f64> = grid
            .iter()
            .zip(survivors.iter().zip(&theory))
            .filter(|&(_, (&alive, &s))| !within_binomial_99(alive, reps, s))
            .map(|(&n, _)| n)
            .collect();
        report.record(
            "empirical survival inside 99% binomial bands",
            outside.is_empty(),
            format!("{} of {} grid points outside", outside.len(), grid.len()),
        );
        for &(p, miner, empirical) in &crossings {
            report.record(
                &format!("miner crossing p={p} within one grid step"),
                (miner - empirical).abs() <= step,
                format!("miner {miner:.6e}, empirical {empirical:.6e}, step {step:.6e}"),
            );
        }
        let mut worst: f64 = 0.0;
        for (d, &s) in damages.iter().zip(&theory) {
            for (&p, &dp) in cfg.miner.probabilities.iter().zip(d) {
                worst = worst.max(rel(survival_from_damage(sp.m(), p, dp), s));
            }
        }
        report.record("survival equals (1-p)^(D^m)", worst <= 1e-12, format!("max relative deviation {worst:.3e}"));
    }
    Ok(())
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn field(cfg: &RunConfig) -> Result<SeverityField, CliError> {
    Ok(SeverityField::new(cfg.beam.geometry, cfg.beam.load_positions)?)
}

/// Structure constant of the configured beam on the full grid.
fn structure_constant(cfg: &RunConfig) -> Result<StructureConstant, CliError> {
    let full = severity_grid(&field(cfg)?, &cfg.grid)?;
    Ok(compute_q(&full.to_partition()?, &cfg.size_effect()?)?)
}

fn cell_key(x: f64, y: f64) -> (i64, i64) {
    ((x * 1e7).round() as i64, (y * 1e7).round() as i64)
}

pub fn beam(cfg: &RunConfig, out: &mut Artifacts, check: Option<&mut CheckReport>) -> Result<(), CliError> {
    let geom = cfg.beam.geometry;
    let field = field(cfg)?;
    let quarter = severity_grid_quarter(&field, &cfg.grid)?;
    out.csv(
        "field_z0.csv",
        &["x", "y", "z", "severity"],
        quarter.cells.iter().filter(|c| c.on_mid_plane).map(|c| row(&[c.x, c.y, c.z, c.severity])),
    )?;
    let mid = quarter.cells.iter().map(|c| c.x).fold(f64::NEG_INFINITY, f64::max);
    out.csv(
        "field_midspan.csv",
        &["x", "y", "z", "severity"],
        quarter.cells.iter().filter(|c| c.x == mid).map(|c| row(&[c.x, c.y, c.z, c.severity])),
    )?;
    drop(quarter);

    let full = severity_grid(&field, &cfg.grid)?;
    let partition = full.to_partition()?;
    let model = cfg.size_effect()?;
    let q = compute_q(&partition, &model)?;
    let density = failure_density(&partition, q.m, q.alpha)?;
    drop(partition);

    let n_grid = cfg.mc()?.n_grid;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for &p in &cfg.beam.loads {
        let s: Vec<f64> = n_grid.iter().map(|&n| q.survival_constant_load(p, n)).collect();
        rows.extend(n_grid.iter().zip(&s).map(|(&n, &v)| row(&[p, n, v])));
        curves.push(s);
    }
    out.csv("survival.csv", &["load_mn", "cycles", "survival"], rows)?;

    // cells of the first layer above z = 0, upper half of the section
    let plane: Vec<usize> = (0..full.cells.len())
        .filter(|&i| {
            let c = &full.cells[i];
            c.on_mid_plane && c.z > 0.0 && c.y > 0.0
        })
        .collect();
    out.csv(
        "failure_density_z0.csv",
        &["x", "y", "probability", "density_per_m3"],
        plane.iter().map(|&i| {
            let c = &full.cells[i];
            row(&[c.x, c.y, density.weights[i], density.weights[i] / c.volume])
        }),
    )?;
    let mass = fatiq::stats::compensated_sum(density.weights.iter().copied());
    let plane_mass = fatiq::stats::compensated_sum(plane.iter().map(|&i| density.weights[i]));
    out.json(
        "summary.json",
        &serde_json::json!({
            "q": q.q,
            "m": q.m,
            "alpha": q.alpha,
            "lambda_ref_m3": cfg.specimen.lambda_ref,
            "kappa_ref": model.kappa_ref,
            "volume_m3": geom.volume(),
            "grid_volume_m3": full.total_volume(),
            "moment_inertia_m4": geom.moment_inertia(),
            "cells": full.cells.len(),
            "layout": full.layout,
            "density_mass": mass,
            "density_mass_in_plane_layer": plane_mass,
        }),
    )?;

    if let Some(report) = check {
        report.record("failure density sums to 1", (mass - 1.0).abs() <= 1e-9, format!("mass {mass:.15}"));
        let index: HashMap<_, _> = plane.iter().map(|&i| (cell_key(full.cells[i].x, full.cells[i].y), i)).collect();
        let mut worst: f64 = 0.0;
        let mut unmatched = 0;
        for &i in &plane {
            let c = &full.cells[i];
            match index.get(&cell_key(geom.l - c.x, c.y)) {
                Some(&j) => worst = worst.max(rel(density.weights[i], density.weights[j])),
                None => unmatched += 1,
            }
        }
        report.record(
            "failure density symmetric under x -> L - x",
            unmatched == 0 && worst <= 1e-10,
            format!("max relative deviation {worst:.3e}, unmatched cells {unmatched}"),
        );
        let mut ordered = true;
        let mut loads: Vec<(f64, &Vec<f64>)> = cfg.beam.loads.iter().copied().zip(curves.iter()).collect();
        loads.sort_by(|a, b| a.0.total_cmp(&b.0));
        for pair in loads.windows(2) {
            for (&s1, &s2) in pair[0].1.iter().zip(pair[1].1) {
                ordered &= s1 > s2 || (s1 == 0.0 && s2 == 0.0) || pair[0].0 == pair[1].0;
            }
        }
        report.record("survival curves strictly ordered by load", ordered, format!("{} loads", loads.len()));
    }
    Ok(())
}

pub fn random_load(cfg: &RunConfig, out: &mut Artifacts, check: Option<&mut CheckReport>) -> Result<(), CliError> {
    let q = structure_constant(cfg)?;
    let mc = cfg.mc()?;
    let lc = &cfg.load;
    let models: Vec<LoadModel> = lc.cvs.iter().map(|&c| gamma_fit(lc.p_mean, c, q.alpha)).collect::<Result<_, _>>()?;

    out.csv(
        "load_fit.csv",
        &["c", "shape_a", "theta", "mean_mn", "cv"],
        lc.cvs.iter().zip(&models).map(|(&c, m)| match *m {
            LoadModel::IidGammaAlpha { theta, a, .. } => row(&[c, a, theta, m.mean(), m.cv()]),
            LoadModel::DeterministicConstant { p } => row(&[c, f64::INFINITY, f64::INFINITY, p, 0.0]),
        }),
    )?;

    let top = 4.0 * lc.p_mean;
    let loads = linear_grid(top / lc.density_points as f64, top, lc.density_points);
    let mut rows = Vec::new();
    for (&c, m) in lc.cvs.iter().zip(&models) {
        if !m.is_deterministic() {
            rows.extend(loads.iter().map(|&p| row(&[c, p, m.density(p)])));
        }
    }
    out.csv("load_density.csv", &["c", "load_mn", "density"], rows)?;

    let mut rows = Vec::new();
    let mut quantile_rows = Vec::new();
    let mut medians = Vec::new();
    let mut closed_form_dev: f64 = 0.0;
    for (&c, m) in lc.cvs.iter().zip(&models) {
        let est = mc_survival(&q, m, &mc)?;
        for ((n, s), e) in est.curve.points().iter().zip(&est.stderr) {
            rows.push(row(&[c, *n, *s, *e]));
            if c == 0.0 {
                closed_form_dev = closed_form_dev.max(rel(*s, q.survival_constant_load(lc.p_mean, *n)));
            }
        }
        for &p in &lc.probabilities {
            quantile_rows.push(row(&[c, p, ncf_quantile_sto(&est.curve, p)?]));
        }
        medians.push((c, ncf_quantile_sto(&est.curve, 0.5)?));
    }
    out.csv("survival.csv", &["c", "cycles", "survival", "stderr"], rows)?;
    out.csv("ncf_quantiles.csv", &["c", "p", "cycles"], quantile_rows)?;

    if let Some(report) = check {
        for (i, (&c, m)) in lc.cvs.iter().zip(&models).enumerate() {
            if m.is_deterministic() {
                continue;
            }
            let mut rng = SeededRng::new(mc.master_seed, CHECK_STREAM + i as u64);
            let draws: Vec<f64> = (0..CHECK_LOAD_DRAWS).map(|_| m.sample_load(&mut rng)).collect::<Result<_, _>>()?;
            let (mean, cv) = mean_cv(&draws);
            report.record(
                &format!("sampled loads c={c}"),
                rel(mean, lc.p_mean) <= 5e-3 && (c == 0.0 || rel(cv, c) <= 1e-2),
                format!("mean {mean:.6} (target {}), cv {cv:.5} (target {c})", lc.p_mean),
            );
        }
        let mut sorted = medians.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let decreasing = sorted.windows(2).all(|w| w[1].1 < w[0].1);
        report.record(
            "median NCF strictly decreasing in c",
            decreasing,
            sorted.iter().map(|(c, n)| format!("c={c}: {n:.4e}")).collect::<Vec<_>>().join(", "),
        );
        if lc.cvs.contains(&0.0) {
            report.record(
                "c = 0 survival equals closed form",
                closed_form_dev <= 1e-12,
                format!("max relative deviation {closed_form_dev:.3e}"),
            );
        }
    }
    Ok(())
}

/// Sample mean and coefficient of variation, accumulated with compensation.
pub fn mean_cv(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = fatiq::stats::compensated_sum(xs.iter().copied()) / n;
    let var = fatiq::stats::compensated_sum(xs.iter().map(|&x| (x - mean) * (x - mean))) / (n - 1.0);
    (mean, var.sqrt() / mean)
}

pub fn equiv_load(cfg: &RunConfig, out: &mut Artifacts, check: Option<&mut CheckReport>) -> Result<(), CliError> {
    let q = structure_constant(cfg)?;
    let mc = cfg.mc()?;
    let lc = &cfg.load;
    let mut results = Vec::new();
    for &c in &lc.cvs {
        let model = gamma_fit(lc.p_mean, c, q.alpha)?;
        let est = mc_survival(&q, &model, &mc)?;
        for &p in &lc.probabilities {
            results.push(equiv_load_from_curve(&q, &est.curve, lc.p_mean, c, p)?);
        }
    }
    out.csv(
        "equiv_load.csv",
        &["c", "p", "ratio", "p_eq_mn", "n_sto"],
        results.iter().map(|e| row(&[e.c, e.p, e.ratio, e.p_eq, e.n_sto])),
    )?;

    if let Some(report) = check {
        for &p in &lc.probabilities {
            let mut series: Vec<(f64, f64)> = results.iter().filter(|e| e.p == p).map(|e| (e.c, e.ratio)).collect();
            series.sort_by(|a, b| a.0.total_cmp(&b.0));
            if let Some(&(_, r0)) = series.iter().find(|(c, _)| *c == 0.0) {
                report.record(
                    &format!("equivalent load ratio at c = 0, p={p}"),
                    (r0 - 1.0).abs() <= 1e-2,
                    format!("ratio {r0:.6}"),
                );
            }
            report.record(
                &format!("equivalent load ratio nondecreasing in c, p={p}"),
                series.windows(2).all(|w| w[1].1 >= w[0].1),
                series.iter().map(|(c, r)| format!("c={c}: {r:.4}")).collect::<Vec<_>>().join(", "),
            );
        }
    }
    Ok(())
}

fn hot_point_row(name: &str, h: &HotPoint) -> Vec<String> {
    let mut r = vec![name.to_owned()];
    r.extend(row(&[
        h.x,
        h.y,
        h.z,
        h.severity,
        h.d_x,
        h.d_xx,
        h.d_y,
        h.d_yy,
        h.d_z,
        h.lengths.0,
        h.lengths.1,
        h.lengths.2,
    ]));
    r
}

pub fn laplace(cfg: &RunConfig, out: &mut Artifacts, check: Option<&mut CheckReport>) -> Result<(), CliError> {
    let (hps, rows) = accuracy_table(&field(cfg)?, &cfg.grid, &cfg.laplace.k)?;
    out.csv(
        "laplace_table.csv",
        &[
            "k",
            "ratio",
            "fraction_i1",
            "web_fraction_1",
            "web_fraction_2",
            "quadrature",
            "i1",
            "i2",
            "v1_web",
            "v1_flange",
            "v2_web",
            "v2_flange",
        ],
        rows.iter().map(|r| {
            row(&[
                r.k,
                r.ratio,
                r.fraction_i1,
                r.web_fraction_1,
                r.web_fraction_2,
                r.quadrature,
                r.i1.integral,
                r.i2.integral,
                r.i1.v_web,
                r.i1.v_flange,
                r.i2.v_web,
                r.i2.v_flange,
            ])
        }),
    )?;
    let mut points = vec![hot_point_row("corner", &hps.corner), hot_point_row("top", &hps.top)];
    for &(x, y, s) in &hps.extra_maxima {
        let mut r = vec!["extra".to_owned()];
        r.extend(row(&[x, y, 0.0, s]));
        r.extend(std::iter::repeat_n(String::new(), 8));
        points.push(r);
    }
    out.csv(
        "hot_points.csv",
        &["point", "x", "y", "z", "severity", "d_x", "d_xx", "d_y", "d_yy", "d_z", "len_x", "len_y", "len_z"],
        points,
    )?;

    if let Some(report) = check {
        report.record(
            "no local maxima besides the two hot points",
            hps.extra_maxima.is_empty(),
            format!("{} extra maxima", hps.extra_maxima.len()),
        );
        for r in &rows {
            if let Some(&(_, ratio, i1, w1, w2)) = ACCURACY_TARGETS.iter().find(|t| t.0 == r.k) {
                let ok = (r.ratio - ratio).abs() <= 0.03
                    && (r.fraction_i1 - i1).abs() <= 0.02
                    && (r.web_fraction_1 - w1).abs() <= 0.02
                    && (r.web_fraction_2 - w2).abs() <= 0.02;
                report.record(
                    &format!("table row k={}", r.k),
                    ok,
                    format!(
                        "ratio {:.4} ({ratio}), I1 share {:.4} ({i1}), V1 web {:.4} ({w1}), V2 web {:.4} ({w2})",
                        r.ratio, r.fraction_i1, r.web_fraction_1, r.web_fraction_2
                    ),
                );
            }
        }
        let mut by_k: Vec<(f64, f64)> = rows.iter().map(|r| (r.k, (r.ratio - 1.0).abs())).collect();
        by_k.sort_by(|a, b| a.0.total_cmp(&b.0));
        report.record(
            "Laplace error decreases with k",
            by_k.windows(2).all(|w| w[1].1 < w[0].1),
            by_k.iter().map(|(k, e)| format!("k={k}: {e:.4}")).collect::<Vec<_>>().join(", "),
        );
    }
    Ok(())
}
