//! Hot-point (Laplace) approximation of `∫ sᵘ^k` over the I-beam.
//!
//! By symmetry the integral over the beam is 8 times the integral over the
//! quarter `E' = {0 ≤ x ≤ L/2, 0 ≤ y ≤ h/2, 0 ≤ z ≤ half-width(y)}`. Inside
//! `E'` the severity has two local maxima: the support corner `(0, 0, 0)`,
//! governed by shear, and a point `(x₂, h/2, 0)` on the top fibre, governed
//! by bending. Expanding `φ = ln sᵘ` to its first nonvanishing order at each
//! of them gives closed-form volumes in terms of
//! `Φ₁(u) = ∫₀ᵘ e^(-v) dv` and `Φ₂(u) = ∫₀ᵘ e^(-v²/2) dv`.

use serde::Serialize;

use crate::error::{ensure_positive, Error, Result};
use crate::ibeam::{severity_grid_quarter, BeamGeometry, BeamGrid, SeverityField, SeverityGrid};

/// Finite-difference step along the beam and vertically, m.
pub const STEP_XY: f64 = 1e-3;
/// Finite-difference step across the section, m.
pub const STEP_Z: f64 = 1e-4;

/// `1 - e^(-u)`.
pub fn phi1(u: f64) -> f64 {
    -(-u).exp_m1()
}

/// `∫₀ᵘ e^(-v²/2) dv = √(π/2) erf(u/√2)`.
pub fn phi2(u: f64) -> f64 {
    (std::f64::consts::PI / 2.0).sqrt() * libm::erf(u / std::f64::consts::SQRT_2)
}

/// A local maximum of the severity with the derivatives of `ln sᵘ` there.
///
/// First derivatives that vanish by construction are reported as computed
/// (numerically close to zero). One-sided differences are taken inward on
/// the boundary of `E'`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HotPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub severity: f64,
    pub d_x: f64,
    pub d_xx: f64,
    pub d_y: f64,
    pub d_yy: f64,
    pub d_z: f64,
    /// Characteristic lengths `(Δx, Δy, Δz)`.
    pub lengths: (f64, f64, f64),
}

/// Both hot points and any further local maximum found in the `z = 0`
/// plane of `E'`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HotPoints {
    pub corner: HotPoint,
    pub top: HotPoint,
    /// `(x, y, sᵘ)` of unexpected local maxima on the scan grid.
    pub extra_maxima: Vec<(f64, f64, f64)>,
}

/// `φ = ln sᵘ`.
fn phi(field: &SeverityField, x: f64, y: f64, z: f64) -> Result<f64> {
    Ok(field.severity(x, y, z)?.ln())
}

/// Second-order one-sided first derivative in direction `dir` (±1).
fn one_sided(f: impl Fn(f64) -> Result<f64>, h: f64, dir: f64) -> Result<f64> {
    let (f0, f1, f2) = (f(0.0)?, f(dir * h)?, f(2.0 * dir * h)?);
    Ok(dir * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h))
}

fn one_sided_second(f: impl Fn(f64) -> Result<f64>, h: f64, dir: f64) -> Result<f64> {
    let (f0, f1, f2) = (f(0.0)?, f(dir * h)?, f(2.0 * dir * h)?);
    Ok((f0 - 2.0 * f1 + f2) / (h * h))
}

fn central(f: impl Fn(f64) -> Result<f64>, h: f64) -> Result<f64> {
    Ok((f(h)? - f(-h)?) / (2.0 * h))
}

fn central_second(f: impl Fn(f64) -> Result<f64>, h: f64) -> Result<f64> {
    Ok((f(h)? - 2.0 * f(0.0)? + f(-h)?) / (h * h))
}

fn structure_error(msg: String) -> Error {
    Error::HotPointStructure(msg)
}

/// Hot point at the support corner `(0, 0, 0)`.
fn corner_point(field: &SeverityField) -> Result<HotPoint> {
    let fx = |t: f64| phi(field, t, 0.0, 0.0);
    let fy = |t: f64| phi(field, 0.0, t, 0.0);
    let fz = |t: f64| phi(field, 0.0, 0.0, t);
    let d_x = one_sided(fx, STEP_XY, 1.0)?;
    let d_xx = one_sided_second(fx, STEP_XY, 1.0)?;
    // y = 0 is an interior point of the full section
    let d_y = central(fy, STEP_XY)?;
    let d_yy = central_second(fy, STEP_XY)?;
    let d_z = one_sided(fz, STEP_Z, 1.0)?;
    let severity = field.severity(0.0, 0.0, 0.0)?;
    let hp = HotPoint {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        severity,
        d_x,
        d_xx,
        d_y,
        d_yy,
        d_z,
        lengths: (-1.0 / d_x, 1.0 / (-d_yy).sqrt(), -1.0 / d_z),
    };
    let flat = d_y.abs() <= 1e-6 * d_x.abs().max(1.0);
    if !(d_x < 0.0 && flat && d_yy < 0.0 && d_z < 0.0) {
        return Err(structure_error(format!("corner hot point: d_x={d_x}, d_y={d_y}, d_yy={d_yy}, d_z={d_z}")));
    }
    Ok(hp)
}

/// Golden-section maximization of `f` on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    (lo + hi) / 2.0
}

/// Abscissa of the interior maximum of `sᵘ(·, h/2, 0)` on `(0, L/2)`.
///
/// A scan brackets the largest interior local maximum (the support end
/// `x = 0` is a separate boundary maximum of this curve), then a
/// golden-section search refines it.
pub fn locate_top_abscissa(field: &SeverityField, scan_points: usize) -> Result<f64> {
    let g = *field.geometry();
    let top = g.h / 2.0;
    let half = g.l / 2.0;
    let s = |x: f64| field.severity(x, top, 0.0).expect("top fibre point inside the beam");
    let xs: Vec<f64> = (0..scan_points).map(|i| half * i as f64 / (scan_points - 1) as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| s(x)).collect();
    let best = (1..scan_points - 1)
        .filter(|&i| vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1])
        .max_by(|&i, &j| vals[i].total_cmp(&vals[j]))
        .ok_or_else(|| structure_error("no interior maximum along the top fibre".into()))?;
    Ok(golden_max(s, xs[best - 1], xs[best + 1], 1e-9))
}

/// Hot point on the top fibre `(x₂, h/2, 0)`.
fn top_point(field: &SeverityField) -> Result<HotPoint> {
    let g = *field.geometry();
    let top = g.h / 2.0;
    let x2 = locate_top_abscissa(field, 2001)?;
    if !(x2 > 0.0 && x2 < g.l / 2.0) {
        return Err(structure_error(format!("top hot point at x={x2} outside (0, L/2)")));
    }
    let fx = |t: f64| phi(field, x2 + t, top, 0.0);
    let fy = |t: f64| phi(field, x2, top + t, 0.0);
    let fz = |t: f64| phi(field, x2, top, t);
    let d_x = central(fx, STEP_XY)?;
    let d_xx = central_second(fx, STEP_XY)?;
    let d_y = one_sided(fy, STEP_XY, -1.0)?;
    let d_yy = one_sided_second(fy, STEP_XY, -1.0)?;
    let d_z = one_sided(fz, STEP_Z, 1.0)?;
    let severity = field.severity(x2, top, 0.0)?;
    let flat = d_x.abs() <= 1e-3 * d_y.abs();
    if !(flat && d_xx < 0.0 && d_y > 0.0 && d_z < 0.0) {
        return Err(structure_error(format!("top hot point: d_x={d_x}, d_xx={d_xx}, d_y={d_y}, d_z={d_z}")));
    }
    Ok(HotPoint {
        x: x2,
        y: top,
        z: 0.0,
        severity,
        d_x,
        d_xx,
        d_y,
        d_yy,
        d_z,
        lengths: (1.0 / (-d_xx).sqrt(), 1.0 / d_y, -1.0 / d_z),
    })
}

/// Discrete local maxima of `sᵘ(x, y, 0)` on a grid over `[0, L/2] × [0, h/2]`.
fn plane_maxima(field: &SeverityField, nx: usize, ny: usize) -> Vec<(f64, f64, f64)> {
    let g = *field.geometry();
    let xs: Vec<f64> = (0..nx).map(|i| g.l / 2.0 * i as f64 / (nx - 1) as f64).collect();
    let ys: Vec<f64> = (0..ny).map(|j| g.h / 2.0 * j as f64 / (ny - 1) as f64).collect();
    let vals: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| {
            let slab = field.slab(x).expect("scan abscissa inside the beam");
            ys.iter().map(|&y| slab.severity(y, 0.0).expect("scan point inside the beam")).collect()
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let v = vals[i][j];
            let mut is_max = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= nx as i64 || jj >= ny as i64 {
                        continue;
                    }
                    if vals[ii as usize][jj as usize] > v {
                        is_max = false;
                    }
                }
            }
            if is_max {
                out.push((xs[i], ys[j], v));
            }
        }
    }
    out
}

/// Locates both hot points, checks the derivative sign pattern, and scans
/// the `z = 0` plane for any other local maximum.
pub fn locate_hot_points(field: &SeverityField) -> Result<HotPoints> {
    let corner = corner_point(field)?;
    let top = top_point(field)?;
    let (nx, ny) = (401, 264);
    let dx = field.geometry().l / 2.0 / (nx - 1) as f64;
    let dy = field.geometry().h / 2.0 / (ny - 1) as f64;
    let extra_maxima = plane_maxima(field, nx, ny)
        .into_iter()
        .filter(|&(x, y, _)| {
            let near = |hp: &HotPoint| (x - hp.x).abs() <= 1.5 * dx && (y - hp.y).abs() <= 1.5 * dy;
            !near(&corner) && !near(&top)
        })
        .collect();
    Ok(HotPoints { corner, top, extra_maxima })
}

/// One hot-point contribution `s*^k (V_web + V_flange)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LaplaceTerm {
    pub integral: f64,
    pub v_web: f64,
    pub v_flange: f64,
}

impl LaplaceTerm {
    pub fn web_fraction(&self) -> f64 {
        self.v_web / (self.v_web + self.v_flange)
    }
}

/// Contribution of the support corner: exponential decay in `x` and `z`,
/// Gaussian in `y`.
pub fn laplace_i1(geom: &BeamGeometry, k: f64, hp: &HotPoint) -> Result<LaplaceTerm> {
    ensure_positive("k", k)?;
    let (dx, dy, dz) = hp.lengths;
    let (lx, ly, lz) = (dx / k, dy / k.sqrt(), dz / k);
    let x_factor = lx * phi1(geom.l / 2.0 / lx);
    let y_int = geom.h / 2.0 - geom.e;
    let y_web = ly * phi2(y_int / ly);
    let y_flange = ly * (phi2(geom.h / 2.0 / ly) - phi2(y_int / ly));
    let z_web = lz * phi1(geom.f / 2.0 / lz);
    let z_flange = lz * phi1(geom.b / 2.0 / lz);
    let v_web = x_factor * y_web * z_web;
    let v_flange = x_factor * y_flange * z_flange;
    Ok(LaplaceTerm { integral: hp.severity.powf(k) * (v_web + v_flange), v_web, v_flange })
}

/// Contribution of the top-fibre point: Gaussian in `x`, exponential decay
/// downward in `y` and across in `z`.
pub fn laplace_i2(geom: &BeamGeometry, k: f64, hp: &HotPoint) -> Result<LaplaceTerm> {
    ensure_positive("k", k)?;
    let (dx, dy, dz) = hp.lengths;
    let (lx, ly, lz) = (dx / k.sqrt(), dy / k, dz / k);
    let x_factor = lx * (phi2(hp.x / lx) + phi2((geom.l / 2.0 - hp.x) / lx));
    let y_web = ly * (phi1(geom.h / 2.0 / ly) - phi1(geom.e / ly));
    let y_flange = ly * phi1(geom.e / ly);
    let z_web = lz * phi1(geom.f / 2.0 / lz);
    let z_flange = lz * phi1(geom.b / 2.0 / lz);
    let v_web = x_factor * y_web * z_web;
    let v_flange = x_factor * y_flange * z_flange;
    Ok(LaplaceTerm { integral: hp.severity.powf(k) * (v_web + v_flange), v_web, v_flange })
}

/// Midpoint-rule value of `∫_{E'} sᵘ^k` on `grid`.
pub fn quadrature_iprime(field: &SeverityField, grid: &BeamGrid, k: f64) -> Result<f64> {
    ensure_positive("k", k)?;
    Ok(severity_grid_quarter(field, grid)?.power_integral(k))
}

/// One row of the accuracy table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub k: f64,
    /// `(I'₁ + I'₂) / I'`.
    pub ratio: f64,
    /// `I'₁ / (I'₁ + I'₂)`.
    pub fraction_i1: f64,
    pub web_fraction_1: f64,
    pub web_fraction_2: f64,
    pub quadrature: f64,
    pub i1: LaplaceTerm,
    pub i2: LaplaceTerm,
}

/// Laplace approximation against quadrature for each `k`, with the
/// severity grid evaluated once.
pub fn accuracy_table(field: &SeverityField, grid: &BeamGrid, ks: &[f64]) -> Result<(HotPoints, Vec<AccuracyRow>)> {
    let hps = locate_hot_points(field)?;
    let quarter: SeverityGrid = severity_grid_quarter(field, grid)?;
    let geom = field.geometry();
    let rows = ks
        .iter()
        .map(|&k| {
            ensure_positive("k", k)?;
            let i1 = laplace_i1(geom, k, &hps.corner)?;
            let i2 = laplace_i2(geom, k, &hps.top)?;
            let quadrature = quarter.power_integral(k);
            let approx = i1.integral + i2.integral;
            Ok(AccuracyRow {
                k,
                ratio: approx / quadrature,
                fraction_i1: i1.integral / approx,
                web_fraction_1: i1.web_fraction(),
                web_fraction_2: i2.web_fraction(),
                quadrature,
                i1,
                i2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((hps, rows))
}
