//! Unitary severity field of a simply supported I-beam under a moving load.
//!
//! A point load of 1 MN at abscissa `a` produces the stress tensor
//! `σᵘ(x, y, z; a)`; the unitary severity is the largest von Mises stress
//! over all load positions, `sᵘ(x, y, z) = max_a σᵘ_VM(x, y, z; a)`.
//!
//! Coordinates: `x ∈ [0, L]` along the beam, `y ∈ [-h/2, h/2]` vertical,
//! `z ∈ [-b/2, b/2]` lateral. Lengths in m, stresses in MPa per MN.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_positive, Result};
use crate::structure::{Cell, CellPartition};

/// Load positions sampled on `[0, L]` when maximizing over the load.
pub const DEFAULT_LOAD_POSITIONS: usize = 2001;

/// Cross-section and span of the beam.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamGeometry {
    /// Flange width.
    pub b: f64,
    /// Web thickness.
    pub f: f64,
    /// Total height.
    pub h: f64,
    /// Flange thickness.
    pub e: f64,
    /// Span.
    #[serde(rename = "L")]
    pub l: f64,
}

impl Default for BeamGeometry {
    /// The 20 m reference beam.
    fn default() -> Self {
        Self { b: 0.65, f: 0.012, h: 1.315, e: 0.06, l: 20.0 }
    }
}

impl BeamGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("b", self.b), ("f", self.f), ("h", self.h), ("e", self.e), ("L", self.l)] {
            ensure_positive(name, v)?;
        }
        if self.e >= self.h / 2.0 {
            return domain(format!("flange thickness e={} must be below h/2={}", self.e, self.h / 2.0));
        }
        if self.f >= self.b {
            return domain(format!("web thickness f={} must be below flange width b={}", self.f, self.b));
        }
        Ok(())
    }

    /// Height of the web between the flanges, `h - 2e`.
    pub fn web_height(&self) -> f64 {
        self.h - 2.0 * self.e
    }

    /// `I_z = b e³/12 + b e (h-e)²/2 + f (h-2e)³/12`.
    pub fn moment_inertia(&self) -> f64 {
        let w = self.web_height();
        self.b * self.e.powi(3) / 12.0 + self.b * self.e * (self.h - self.e).powi(2) / 2.0 + self.f * w.powi(3) / 12.0
    }

    /// `b h³ - b (h-2e)³ + f (h-2e)³`, the common denominator of the shear
    /// stress expressions.
    fn shear_denominator(&self) -> f64 {
        let w = self.web_height();
        self.b * self.h.powi(3) - self.b * w.powi(3) + self.f * w.powi(3)
    }

    /// Cross-section area times span.
    pub fn volume(&self) -> f64 {
        self.l * (2.0 * self.b * self.e + self.f * self.web_height())
    }

    /// Half-width of the section at height `y`. The interface `|y| = h/2 - e`
    /// belongs to the flange.
    pub fn half_width(&self, y: f64) -> f64 {
        if y.abs() >= self.h / 2.0 - self.e {
            self.b / 2.0
        } else {
            self.f / 2.0
        }
    }

    pub fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        (0.0..=self.l).contains(&x) && y.abs() <= self.h / 2.0 && z.abs() <= self.half_width(y)
    }

    fn check_point(&self, x: f64, y: f64, z: f64) -> Result<()> {
        if self.contains(x, y, z) {
            Ok(())
        } else {
            domain(format!("point ({x}, {y}, {z}) lies outside the beam"))
        }
    }

    /// Every length multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { b: s * self.b, f: s * self.f, h: s * self.h, e: s * self.e, l: s * self.l }
    }
}

fn check_abscissa(geom: &BeamGeometry, name: &str, v: f64) -> Result<()> {
    if (0.0..=geom.l).contains(&v) {
        Ok(())
    } else {
        domain(format!("{name}={v} outside [0, {}]", geom.l))
    }
}

/// Bending moment at `x` for a unit load at `a`, in m.
pub fn bending_moment_u(geom: &BeamGeometry, x: f64, a: f64) -> Result<f64> {
    check_abscissa(geom, "x", x)?;
    check_abscissa(geom, "a", a)?;
    Ok(moment(geom.l, x, a))
}

/// Shear force at `x` for a unit load at `a`, dimensionless.
///
/// At `x = a` the left-of-load branch `-(L-a)/L` applies.
pub fn shear_u(geom: &BeamGeometry, x: f64, a: f64) -> Result<f64> {
    check_abscissa(geom, "x", x)?;
    check_abscissa(geom, "a", a)?;
    Ok(shear(geom.l, x, a))
}

fn moment(l: f64, x: f64, a: f64) -> f64 {
    if x <= a {
        (l - a) * x / l
    } else {
        (l - x) * a / l
    }
}

fn shear(l: f64, x: f64, a: f64) -> f64 {
    if x <= a {
        -(l - a) / l
    } else {
        a / l
    }
}

/// Stress components per unit load, MPa per MN.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UnitStress {
    pub sxx: f64,
    pub sxy: f64,
    pub sxz: f64,
}

/// Shear stresses per unit shear force at `(y, z)`: `(σ_xy/V, σ_xz/V)`.
fn shear_factors(geom: &BeamGeometry, y: f64, z: f64) -> (f64, f64) {
    let (b, f, h) = (geom.b, geom.f, geom.h);
    let w = geom.web_height();
    let den = geom.shear_denominator();
    let xy = 3.0 / (2.0 * f) * (b * h * h - b * w * w + f * w * w - 4.0 * f * y * y) / den;
    let xz = 3.0 / (2.0 * geom.e) * (h * h - w * w) / den * (b / 2.0 - z.abs());
    (xy, xz)
}

/// Stress tensor components at `(x, y, z)` for a unit load at `a`.
pub fn stress_u(geom: &BeamGeometry, x: f64, y: f64, z: f64, a: f64) -> Result<UnitStress> {
    geom.check_point(x, y, z)?;
    let m = bending_moment_u(geom, x, a)?;
    let v = shear(geom.l, x, a);
    let (cxy, cxz) = shear_factors(geom, y, z);
    Ok(UnitStress { sxx: y * m / geom.moment_inertia(), sxy: v * cxy, sxz: v * cxz })
}

/// `sqrt(σ_xx² + 3 (σ_xy + σ_xz)²)`.
pub fn von_mises_u(s: &UnitStress) -> f64 {
    let t = s.sxy + s.sxz;
    (s.sxx * s.sxx + 3.0 * t * t).sqrt()
}

/// Load-position candidates at one abscissa, reduced to the points that can
/// maximize `A M² + B V²` for some `A, B ≥ 0`.
///
/// The candidate set is a uniform grid on `[0, L]` plus `a = x` (moment
/// peak, left shear branch) and `a → x⁻` (right shear branch). The maximum
/// of a linear form over a finite set is attained at a vertex of its convex
/// hull, so keeping only hull vertices leaves the maximum unchanged.
#[derive(Clone, Debug)]
struct LoadCandidates {
    /// `(M, V)` pairs on the hull.
    pairs: Vec<(f64, f64)>,
}

impl LoadCandidates {
    fn new(l: f64, x: f64, points: usize) -> Self {
        let mut all: Vec<(f64, f64)> = (0..points)
            .map(|i| {
                let a = if i + 1 == points { l } else { l * i as f64 / (points - 1) as f64 };
                (moment(l, x, a), shear(l, x, a))
            })
            .collect();
        all.push((moment(l, x, x), shear(l, x, x)));
        if x > 0.0 {
            // limit a → x from below
            all.push(((l - x) * x / l, x / l));
        }
        Self { pairs: hull_pairs(all) }
    }

    /// Maximizing pair of `A M² + B V²`.
    fn best(&self, a: f64, b: f64) -> (f64, f64) {
        let mut best = self.pairs[0];
        let mut best_val = f64::NEG_INFINITY;
        for &(m, v) in &self.pairs {
            let val = a * m * m + b * v * v;
            if val > best_val {
                best_val = val;
                best = (m, v);
            }
        }
        best
    }
}

/// Pairs `(M, V)` whose images `(M², V²)` are convex hull vertices.
fn hull_pairs(mut pairs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let key = |p: &(f64, f64)| (p.0 * p.0, p.1 * p.1);
    pairs.sort_by(|p, q| {
        let (a, b) = (key(p), key(q));
        a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
    });
    pairs.dedup_by(|p, q| key(p) == key(q));
    if pairs.len() <= 2 {
        return pairs;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for p in &pairs {
        while lower.len() >= 2 && cross(key(&lower[lower.len() - 2]), key(&lower[lower.len() - 1]), key(p)) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for p in pairs.iter().rev() {
        while upper.len() >= 2 && cross(key(&upper[upper.len() - 2]), key(&upper[upper.len() - 1]), key(p)) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Evaluator of `sᵘ` with a fixed load-position grid.
#[derive(Clone, Debug)]
pub struct SeverityField {
    geom: BeamGeometry,
    load_positions: usize,
    inertia: f64,
}

/// Precomputed candidates for one abscissa.
#[derive(Clone, Debug)]
pub struct Slab<'a> {
    field: &'a SeverityField,
    x: f64,
    candidates: LoadCandidates,
}

impl SeverityField {
    pub fn new(geom: BeamGeometry, load_positions: usize) -> Result<Self> {
        geom.validate()?;
        if load_positions < 2 {
            return domain("at least two load positions are required");
        }
        Ok(Self { geom, load_positions, inertia: geom.moment_inertia() })
    }

    pub fn geometry(&self) -> &BeamGeometry {
        &self.geom
    }

    pub fn load_positions(&self) -> usize {
        self.load_positions
    }

    /// Candidates at abscissa `x`, shared by every `(y, z)`.
    pub fn slab(&self, x: f64) -> Result<Slab<'_>> {
        check_abscissa(&self.geom, "x", x)?;
        Ok(Slab { field: self, x, candidates: LoadCandidates::new(self.geom.l, x, self.load_positions) })
    }

    pub fn severity(&self, x: f64, y: f64, z: f64) -> Result<f64> {
        self.slab(x)?.severity(y, z)
    }

    /// Stress components under the maximizing load position.
    pub fn governing_stress(&self, x: f64, y: f64, z: f64) -> Result<UnitStress> {
        self.slab(x)?.governing_stress(y, z)
    }
}

impl Slab<'_> {
    pub fn x(&self) -> f64 {
        self.x
    }

    fn weights(&self, y: f64, z: f64) -> (f64, f64, f64, f64) {
        let g = &self.field.geom;
        let (cxy, cxz) = shear_factors(g, y, z);
        let c = cxy + cxz;
        let r = y / self.field.inertia;
        (r * r, 3.0 * c * c, cxy, cxz)
    }

    pub fn severity(&self, y: f64, z: f64) -> Result<f64> {
        self.field.geom.check_point(self.x, y, z)?;
        Ok(self.severity_unchecked(y, z))
    }

    fn severity_unchecked(&self, y: f64, z: f64) -> f64 {
        let (a, b, _, _) = self.weights(y, z);
        let (m, v) = self.candidates.best(a, b);
        (a * m * m + b * v * v).sqrt()
    }

    pub fn governing_stress(&self, y: f64, z: f64) -> Result<UnitStress> {
        self.field.geom.check_point(self.x, y, z)?;
        let (a, b, cxy, cxz) = self.weights(y, z);
        let (m, v) = self.candidates.best(a, b);
        Ok(UnitStress { sxx: y * m / self.field.inertia, sxy: v * cxy, sxz: v * cxz })
    }
}

/// `sᵘ(x, y, z)` with the default load-position grid.
pub fn unitary_severity(geom: &BeamGeometry, x: f64, y: f64, z: f64) -> Result<f64> {
    SeverityField::new(*geom, DEFAULT_LOAD_POSITIONS)?.severity(x, y, z)
}

/// `sᵘ` by direct evaluation of [`stress_u`] at every candidate load
/// position, without the hull reduction.
pub fn unitary_severity_direct(geom: &BeamGeometry, x: f64, y: f64, z: f64, points: usize) -> Result<f64> {
    geom.check_point(x, y, z)?;
    let l = geom.l;
    let mut best = 0.0f64;
    for i in 0..points {
        let a = if i + 1 == points { l } else { l * i as f64 / (points - 1) as f64 };
        best = best.max(von_mises_u(&stress_u(geom, x, y, z, a)?));
    }
    best = best.max(von_mises_u(&stress_u(geom, x, y, z, x)?));
    if x > 0.0 {
        let (cxy, cxz) = shear_factors(geom, y, z);
        let v = x / l;
        let s = UnitStress { sxx: y * (l - x) * x / l / geom.moment_inertia(), sxy: v * cxy, sxz: v * cxz };
        best = best.max(von_mises_u(&s));
    }
    Ok(best)
}

/// Mesh sizes of the midpoint grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamGrid {
    pub dx: f64,
    pub dy: f64,
    pub dz_web: f64,
    pub dz_flange: f64,
}

impl Default for BeamGrid {
    /// 2 cm along the beam, 5 mm vertically, 2 mm across the web and 1 cm
    /// across the flange.
    fn default() -> Self {
        Self { dx: 0.02, dy: 0.005, dz_web: 0.002, dz_flange: 0.01 }
    }
}

impl BeamGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("dx", self.dx), ("dy", self.dy), ("dz_web", self.dz_web), ("dz_flange", self.dz_flange)] {
            ensure_positive(name, v)?;
        }
        Ok(())
    }

    /// Every mesh size divided by `factor`.
    pub fn refined(&self, factor: f64) -> Self {
        Self {
            dx: self.dx / factor,
            dy: self.dy / factor,
            dz_web: self.dz_web / factor,
            dz_flange: self.dz_flange / factor,
        }
    }
}

/// Number of cells covering `extent` with mesh at most `d` (up to rounding).
fn cells_along(extent: f64, d: f64) -> usize {
    ((extent / d) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Cell counts of the quarter domain `0 ≤ x ≤ L/2, 0 ≤ y ≤ h/2, 0 ≤ z`.
///
/// Each region is split uniformly, so the web/flange interface is always a
/// cell boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct QuarterLayout {
    pub nx: usize,
    pub ny_web: usize,
    pub nz_web: usize,
    pub ny_flange: usize,
    pub nz_flange: usize,
}

impl QuarterLayout {
    pub fn new(geom: &BeamGeometry, grid: &BeamGrid) -> Self {
        Self {
            nx: cells_along(geom.l / 2.0, grid.dx),
            ny_web: cells_along(geom.h / 2.0 - geom.e, grid.dy),
            nz_web: cells_along(geom.f / 2.0, grid.dz_web),
            ny_flange: cells_along(geom.e, grid.dy),
            nz_flange: cells_along(geom.b / 2.0, grid.dz_flange),
        }
    }

    pub fn cells_per_slab(&self) -> usize {
        self.ny_web * self.nz_web + self.ny_flange * self.nz_flange
    }

    pub fn cells(&self) -> usize {
        self.nx * self.cells_per_slab()
    }
}

/// A midpoint cell of the beam grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridCell {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub volume: f64,
    pub severity: f64,
    /// Whether the cell touches the plane `z = 0`.
    pub on_mid_plane: bool,
}

/// Discretized severity field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeverityGrid {
    pub layout: QuarterLayout,
    /// Whether the cells cover the quarter domain only.
    pub quarter: bool,
    pub cells: Vec<GridCell>,
}

impl SeverityGrid {
    pub fn total_volume(&self) -> f64 {
        crate::stats::compensated_sum(self.cells.iter().map(|c| c.volume))
    }

    pub fn to_partition(&self) -> Result<CellPartition> {
        CellPartition::new(self.cells.iter().map(|c| Cell { measure: c.volume, severity: c.severity }).collect())
    }

    /// `Σ sᵘ^k · volume` in cell order.
    pub fn power_integral(&self, k: f64) -> f64 {
        crate::structure::ordered_par_sum(self.cells.len(), |i| {
            let c = &self.cells[i];
            c.volume * c.severity.powf(k)
        })
    }
}

/// Midpoints and widths of `n` uniform cells on `[lo, hi]`.
fn axis(lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let d = (hi - lo) / n as f64;
    (0..n).map(|i| (lo + (i as f64 + 0.5) * d, d)).collect()
}

/// Cells of one x-slab over the cross-section quadrant `y ≥ 0, z ≥ 0`.
fn quadrant_cells(geom: &BeamGeometry, layout: &QuarterLayout) -> Vec<(f64, f64, f64, f64, bool)> {
    let y_int = geom.h / 2.0 - geom.e;
    let mut out = Vec::with_capacity(layout.cells_per_slab());
    for (y, dy) in axis(0.0, y_int, layout.ny_web) {
        for (i, (z, dz)) in axis(0.0, geom.f / 2.0, layout.nz_web).into_iter().enumerate() {
            out.push((y, dy, z, dz, i == 0));
        }
    }
    for (y, dy) in axis(y_int, geom.h / 2.0, layout.ny_flange) {
        for (i, (z, dz)) in axis(0.0, geom.b / 2.0, layout.nz_flange).into_iter().enumerate() {
            out.push((y, dy, z, dz, i == 0));
        }
    }
    out
}

/// Midpoint grid of the quarter domain `0 ≤ x ≤ L/2, y ≥ 0, z ≥ 0`.
///
/// Integrals over the whole beam are 8 times the quarter integrals.
pub fn severity_grid_quarter(field: &SeverityField, grid: &BeamGrid) -> Result<SeverityGrid> {
    build_grid(field, grid, true)
}

/// Midpoint grid of the whole beam: the quarter grid and its images under
/// `x ↦ L-x`, `y ↦ -y`, `z ↦ -z`, each midpoint evaluated independently.
pub fn severity_grid(field: &SeverityField, grid: &BeamGrid) -> Result<SeverityGrid> {
    build_grid(field, grid, false)
}

fn build_grid(field: &SeverityField, grid: &BeamGrid, quarter: bool) -> Result<SeverityGrid> {
    grid.validate()?;
    let geom = *field.geometry();
    let layout = QuarterLayout::new(&geom, grid);
    let section = quadrant_cells(&geom, &layout);
    let xs: Vec<(f64, f64)> = if quarter {
        axis(0.0, geom.l / 2.0, layout.nx)
    } else {
        let half = axis(0.0, geom.l / 2.0, layout.nx);
        let mut xs = half.clone();
        xs.extend(half.iter().rev().map(|&(x, d)| (geom.l - x, d)));
        xs
    };
    let signs: &[(f64, f64)] =
        if quarter { &[(1.0, 1.0)] } else { &[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] };
    let slabs: Vec<Vec<GridCell>> = xs
        .par_iter()
        .map(|&(x, dx)| {
            let slab = field.slab(x).expect("grid abscissa inside the beam");
            let mut cells = Vec::with_capacity(section.len() * signs.len());
            for &(sy, sz) in signs {
                for &(y, dy, z, dz, mid) in &section {
                    let (y, z) = (sy * y, sz * z);
                    cells.push(GridCell {
                        x,
                        y,
                        z,
                        volume: dx * dy * dz,
                        severity: slab.severity_unchecked(y, z),
                        on_mid_plane: mid,
                    });
                }
            }
            cells
        })
        .collect();
    Ok(SeverityGrid { layout, quarter, cells: slabs.into_iter().flatten().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> BeamGeometry {
        BeamGeometry::default()
    }

    fn field() -> SeverityField {
        SeverityField::new(reference(), DEFAULT_LOAD_POSITIONS).unwrap()
    }

    #[test]
    fn moment_of_inertia() {
        // exact rational evaluation of the closed form
        assert_relative_eq!(reference().moment_inertia(), 0.032_431_177_375, max_relative = 1e-12);
        // The closed form carries the self-inertia of a single flange, so the
        // solid-rectangle limit is reached once the second one is added.
        let solid = BeamGeometry { b: 0.4, f: 0.4 - 1e-15, h: 1.0, e: 0.5 - 1e-15, l: 1.0 };
        let second_flange = solid.b * solid.e.powi(3) / 12.0;
        assert_relative_eq!(solid.moment_inertia() + second_flange, 0.4 / 12.0, max_relative = 1e-12);
        assert_relative_eq!(
            reference().scaled(3.0).moment_inertia(),
            81.0 * reference().moment_inertia(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn moment_and_shear() {
        let g = reference();
        assert_eq!(bending_moment_u(&g, 10.0, 10.0).unwrap(), 5.0);
        assert_eq!(bending_moment_u(&g, 0.0, 7.0).unwrap(), 0.0);
        assert_eq!(bending_moment_u(&g, 20.0, 7.0).unwrap(), 0.0);
        assert!(bending_moment_u(&g, -1.0, 7.0).is_err());
        assert!(shear_u(&g, 1.0, 21.0).is_err());
        for &(x, a) in &[(3.0, 8.0), (12.0, 4.0), (5.0, 5.0)] {
            let m = bending_moment_u(&g, x, a).unwrap();
            assert!(m >= 0.0);
            assert_relative_eq!(m, bending_moment_u(&g, 20.0 - x, 20.0 - a).unwrap(), max_relative = 1e-14);
        }
        assert_relative_eq!(shear_u(&g, 8.0, 3.0).unwrap(), 3.0 / 20.0);
        assert_relative_eq!(shear_u(&g, 1e-9, 6.0).unwrap(), -14.0 / 20.0);
        let x = 6.5;
        let jump = shear_u(&g, x, x - 1e-12).unwrap().abs() + shear_u(&g, x, x).unwrap().abs();
        assert_relative_eq!(jump, 1.0, max_relative = 1e-10);
        // moment peaks at a = x
        let best = (0..=4000)
            .map(|i| 20.0 * i as f64 / 4000.0)
            .max_by(|a, b| moment(20.0, 7.3, *a).total_cmp(&moment(20.0, 7.3, *b)))
            .unwrap();
        assert!((best - 7.3).abs() <= 20.0 / 4000.0);
    }

    #[test]
    fn stress_examples() {
        let g = reference();
        let s = stress_u(&g, 5.0, g.h / 2.0, 0.0, 5.0).unwrap();
        assert_relative_eq!(s.sxx, 76.026_379_538_741_6, max_relative = 1e-12);
        assert_eq!(stress_u(&g, 5.0, 0.0, 0.0, 3.0).unwrap().sxx, 0.0);
        assert_eq!(stress_u(&g, 5.0, g.h / 2.0, g.b / 2.0, 3.0).unwrap().sxz, 0.0);
        let up = stress_u(&g, 5.0, 0.4, 0.0, 3.0).unwrap();
        let down = stress_u(&g, 5.0, -0.4, 0.0, 3.0).unwrap();
        assert_eq!(up.sxx, -down.sxx);
        assert!(stress_u(&g, 5.0, 0.0, 0.1, 3.0).is_err());
        assert!(stress_u(&g, 5.0, 0.7, 0.0, 3.0).is_err());
        assert!(stress_u(&g, 5.0, g.h / 2.0 - g.e, 0.3, 3.0).is_ok());
    }

    #[test]
    fn von_mises_examples() {
        assert_eq!(von_mises_u(&UnitStress { sxx: 1.0, sxy: 0.0, sxz: 0.0 }), 1.0);
        assert_relative_eq!(von_mises_u(&UnitStress { sxx: 0.0, sxy: 1.0, sxz: 1.0 }), 12.0f64.sqrt());
        assert_relative_eq!(
            von_mises_u(&UnitStress { sxx: 3.0, sxy: 4.0 / 3.0f64.sqrt(), sxz: 0.0 }),
            5.0,
            max_relative = 1e-15
        );
        assert_eq!(von_mises_u(&UnitStress { sxx: -2.0, sxy: 0.0, sxz: 0.0 }), 2.0);
    }

    #[test]
    fn hull_matches_direct_maximum() {
        let g = reference();
        let f = field();
        let pts = [
            (0.0, 0.0, 0.0),
            (0.37, 0.1, 0.004),
            (7.85, g.h / 2.0, 0.0),
            (10.0, g.h / 2.0 - g.e, 0.2),
            (13.3, -0.5, -0.006),
            (20.0, 0.6, 0.31),
            (2.0, -0.63, 0.1),
        ];
        for &(x, y, z) in &pts {
            let hull = f.severity(x, y, z).unwrap();
            let direct = unitary_severity_direct(&g, x, y, z, DEFAULT_LOAD_POSITIONS).unwrap();
            assert_relative_eq!(hull, direct, max_relative = 1e-13);
        }
    }

    #[test]
    fn reflection_symmetries() {
        let g = reference();
        let f = field();
        for i in 0..40 {
            let t = i as f64 / 40.0;
            let x = 20.0 * t * 0.97 + 0.1;
            let y = (t * 7.0).sin() * g.h / 2.0;
            let z = (t * 3.0).cos() * g.half_width(y) * 0.99;
            let s = f.severity(x, y, z).unwrap();
            for (xx, yy, zz) in [(20.0 - x, y, z), (x, -y, z), (x, y, -z), (20.0 - x, -y, -z)] {
                assert_relative_eq!(f.severity(xx, yy, zz).unwrap(), s, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn load_grid_self_convergence() {
        let g = reference();
        let fine = SeverityField::new(g, 4001).unwrap();
        let f = field();
        for &(x, y, z) in &[(0.5, 0.2, 0.001), (7.9, g.h / 2.0, 0.0), (3.3, 0.62, 0.2), (9.99, 0.0, 0.0)] {
            let a = f.severity(x, y, z).unwrap();
            let b = fine.severity(x, y, z).unwrap();
            assert!((a / b - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn interior_peak_along_top_fibre() {
        let g = reference();
        let f = field();
        let xs: Vec<f64> = (0..=1000).map(|i| 10.0 * i as f64 / 1000.0).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| f.severity(x, g.h / 2.0, 0.0).unwrap()).collect();
        let interior_max = (1..vals.len() - 1).any(|i| vals[i] > vals[i - 1] && vals[i] > vals[i + 1]);
        assert!(interior_max);
    }

    #[test]
    fn bending_and_shear_dominated_corners() {
        let g = reference();
        let f = field();
        // The web shear term does not vanish on the top fibre, which caps
        // the bending share there at about 0.87.
        let s = f.governing_stress(10.0, g.h / 2.0, 0.0).unwrap();
        let share = s.sxx.abs() / von_mises_u(&s);
        assert!(share > 0.85, "{share}");
        let s = f.governing_stress(0.0, 0.0, 0.0).unwrap();
        assert!(s.sxx.abs() / von_mises_u(&s) < 0.1);
    }

    #[test]
    fn z_maximum_on_mid_plane() {
        let g = reference();
        let f = field();
        for &(x, y) in &[(1.0, 0.0), (5.0, 0.3), (8.0, 0.63), (10.0, 0.6)] {
            let mid = f.severity(x, y, 0.0).unwrap();
            for j in 1..10 {
                let z = g.half_width(y) * j as f64 / 10.0;
                assert!(f.severity(x, y, z).unwrap() <= mid);
            }
        }
    }

    #[test]
    fn quarter_layout_counts() {
        let layout = QuarterLayout::new(&reference(), &BeamGrid::default());
        assert_eq!(layout, QuarterLayout { nx: 500, ny_web: 120, nz_web: 3, ny_flange: 12, nz_flange: 33 });
        assert_eq!(layout.cells(), 378_000);
    }

    #[test]
    fn coarse_grid_volume_and_symmetry() {
        let g = reference();
        let f = field();
        let grid = BeamGrid { dx: 0.5, dy: 0.05, dz_web: 0.003, dz_flange: 0.05 };
        let q = severity_grid_quarter(&f, &grid).unwrap();
        let full = severity_grid(&f, &grid).unwrap();
        assert_eq!(full.cells.len(), 8 * q.cells.len());
        assert_relative_eq!(full.total_volume(), g.volume(), max_relative = 1e-10);
        assert_relative_eq!(8.0 * q.total_volume(), g.volume(), max_relative = 1e-10);
        for k in [1.0, 4.5, 10.0] {
            assert_relative_eq!(8.0 * q.power_integral(k), full.power_integral(k), max_relative = 1e-6);
        }
        assert!(full.cells.iter().all(|c| c.severity.is_finite() && c.severity > 0.0));
    }
}
