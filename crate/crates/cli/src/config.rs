//! TOML run configuration. Every section is optional and falls back to the
//! reference experiment.

use std::path::Path;

use fatiq::ibeam::{BeamGeometry, BeamGrid, DEFAULT_LOAD_POSITIONS};
use fatiq::loading::{gamma_fit, McConfig};
use fatiq::specimen::{DetailCategory, SeveritySequence, WeibullBasquin};
use fatiq::stats::log_grid;
use fatiq::structure::SizeEffectModel;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub specimen: SpecimenSection,
    pub sn: SnSection,
    pub miner: MinerSection,
    pub beam: BeamSection,
    pub grid: BeamGrid,
    pub load: LoadSection,
    pub mc: McSection,
    pub laplace: LaplaceSection,
}

/// Either `kappa` directly or the detail category `(p, cycles, severity)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecimenSection {
    pub m: f64,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub p: f64,
    pub cycles: f64,
    pub severity: f64,
    /// Volume of the test specimen, m³.
    pub lambda_ref: f64,
}

impl Default for SpecimenSection {
    fn default() -> Self {
        Self { m: 1.5, alpha: 3.0, kappa: None, p: 0.05, cycles: 2e6, severity: 200.0, lambda_ref: 3e-5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnSection {
    pub severities: Vec<f64>,
    pub specimens: usize,
    pub probabilities: Vec<f64>,
}

impl Default for SnSection {
    fn default() -> Self {
        Self { severities: vec![100.0, 150.0, 200.0, 250.0, 300.0], specimens: 50, probabilities: vec![0.05, 0.5] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinerSection {
    /// `[severity_mpa, count]` blocks of one period.
    pub blocks: Vec<(f64, u64)>,
    pub repeat: usize,
    /// Replaces `blocks`/`repeat` with a `severity_mpa,count` CSV file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequence_csv: Option<String>,
    pub probabilities: Vec<f64>,
    pub grid_points: usize,
}

impl Default for MinerSection {
    fn default() -> Self {
        Self {
            blocks: vec![(150.0, 200_000), (250.0, 100_000)],
            repeat: 100,
            sequence_csv: None,
            probabilities: vec![0.05, 0.5],
            grid_points: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSection {
    pub geometry: BeamGeometry,
    pub load_positions: usize,
    /// Constant loads of the survival curves, MN.
    pub loads: Vec<f64>,
}

impl Default for BeamSection {
    fn default() -> Self {
        Self {
            geometry: BeamGeometry::default(),
            load_positions: DEFAULT_LOAD_POSITIONS,
            loads: vec![0.15, 0.2, 0.25, 0.3, 0.35],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadSection {
    pub p_mean: f64,
    pub cvs: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub density_points: usize,
}

impl Default for LoadSection {
    fn default() -> Self {
        Self { p_mean: 0.25, cvs: vec![0.0, 0.2, 0.5, 1.0], probabilities: vec![0.05, 0.5], density_points: 400 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub replications: usize,
    pub seed: u64,
    pub n_min: f64,
    pub n_max: f64,
    pub n_points: usize,
}

impl Default for McSection {
    fn default() -> Self {
        Self { replications: 10_000, seed: 0, n_min: 1e3, n_max: 1e9, n_points: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaplaceSection {
    pub k: Vec<f64>,
}

impl Default for LaplaceSection {
    fn default() -> Self {
        Self { k: vec![4.5, 6.0, 10.0] }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn lib(e: fatiq::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn probability(name: &str, ps: &[f64]) -> Result<(), CliError> {
    if ps.is_empty() || ps.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(invalid(format!("{name} must be a nonempty list of values in (0, 1)")));
    }
    Ok(())
}

fn positive(name: &str, xs: &[f64]) -> Result<(), CliError> {
    if xs.is_empty() || xs.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(invalid(format!("{name} must be a nonempty list of positive values")));
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn specimen(&self) -> Result<WeibullBasquin, CliError> {
        let s = &self.specimen;
        match s.kappa {
            Some(kappa) => WeibullBasquin::new(s.m, s.alpha, kappa),
            None => DetailCategory::new(s.p, s.cycles, s.severity)
                .and_then(|d| WeibullBasquin::from_detail(s.m, s.alpha, &d)),
        }
        .map_err(lib)
    }

    pub fn size_effect(&self) -> Result<SizeEffectModel, CliError> {
        let sp = self.specimen()?;
        SizeEffectModel::new(sp.m(), sp.alpha(), sp.kappa(), self.specimen.lambda_ref).map_err(lib)
    }

    pub fn mc(&self) -> Result<McConfig, CliError> {
        let m = &self.mc;
        if !(m.n_min > 0.0 && m.n_max > m.n_min && m.n_points >= 2) {
            return Err(invalid("mc needs 0 < n_min < n_max and n_points >= 2"));
        }
        McConfig::new(m.replications, log_grid(m.n_min, m.n_max, m.n_points), m.seed).map_err(lib)
    }

    /// Rewrites a relative `miner.sequence_csv` against the directory of
    /// the configuration file, so the snapshot is usable from anywhere.
    pub fn resolve_paths(&mut self, base: &Path) -> Result<(), CliError> {
        if let Some(file) = &self.miner.sequence_csv {
            let path = base.join(file);
            let abs = path.canonicalize().map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            self.miner.sequence_csv = Some(abs.to_string_lossy().into_owned());
        }
        Ok(())
    }

    pub fn miner_sequence(&self) -> Result<SeveritySequence, CliError> {
        let seq = match &self.miner.sequence_csv {
            Some(file) => fatiq::io::load_severity_csv(Path::new(file)).map_err(lib)?,
            None => {
                let mut period = SeveritySequence::empty();
                for &(s, n) in &self.miner.blocks {
                    period.push(s, n).map_err(lib)?;
                }
                period.repeat(self.miner.repeat)
            }
        };
        if seq.total_cycles() == 0 {
            return Err(invalid("miner sequence has no cycles"));
        }
        Ok(seq)
    }

    /// Checks every value used by `command` before any computation starts.
    pub fn validate(&self, command: &str) -> Result<(), CliError> {
        let sp = self.specimen()?;
        if self.mc.seed > i64::MAX as u64 {
            return Err(invalid(format!("mc.seed must not exceed {}", i64::MAX)));
        }
        match command {
            "sn-simulate" => {
                positive("sn.severities", &self.sn.severities)?;
                probability("sn.probabilities", &self.sn.probabilities)?;
                if self.sn.specimens == 0 {
                    return Err(invalid("sn.specimens must be positive"));
                }
                for &s in &self.sn.severities {
                    sp.scale_cycles(s).map_err(lib)?;
                }
            }
            "miner-demo" => {
                probability("miner.probabilities", &self.miner.probabilities)?;
                if self.miner.grid_points < 2 {
                    return Err(invalid("miner.grid_points must be at least 2"));
                }
                self.miner_sequence()?;
                if self.mc.replications == 0 {
                    return Err(invalid("mc.replications must be positive"));
                }
            }
            "beam" | "random-load" | "equiv-load" | "laplace" => {
                self.size_effect()?;
                self.beam.geometry.validate().map_err(lib)?;
                self.grid.validate().map_err(lib)?;
                if self.beam.load_positions < 2 {
                    return Err(invalid("beam.load_positions must be at least 2"));
                }
                match command {
                    "beam" => {
                        positive("beam.loads", &self.beam.loads)?;
                        self.mc()?;
                    }
                    "random-load" | "equiv-load" => {
                        self.mc()?;
                        if self.load.cvs.is_empty() {
                            return Err(invalid("load.cvs must not be empty"));
                        }
                        for &c in &self.load.cvs {
                            gamma_fit(self.load.p_mean, c, sp.alpha()).map_err(lib)?;
                        }
                        probability("load.probabilities", &self.load.probabilities)?;
                        if self.load.density_points < 2 {
                            return Err(invalid("load.density_points must be at least 2"));
                        }
                    }
                    _ => positive("laplace.k", &self.laplace.k)?,
                }
            }
            other => return Err(invalid(format!("unknown subcommand {other}"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        for cmd in ["sn-simulate", "miner-demo", "beam", "random-load", "equiv-load", "laplace"] {
            cfg.validate(cmd).unwrap();
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = toml::from_str::<RunConfig>("[specimen]\nm = 1.5\nbeta = 2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("beta") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn explicit_kappa_overrides_detail() {
        let cfg: RunConfig = toml::from_str("[specimen]\nkappa = 1e14\n").unwrap();
        assert_eq!(cfg.specimen().unwrap().kappa(), 1e14);
    }

    #[test]
    fn invariant_violations_fail_validation() {
        let mut cfg = RunConfig::default();
        cfg.specimen.m = -1.0;
        assert!(cfg.validate("sn-simulate").is_err());
        let mut cfg = RunConfig::default();
        cfg.load.cvs = vec![-0.5];
        assert!(cfg.validate("random-load").is_err());
        let mut cfg = RunConfig::default();
        cfg.beam.geometry.e = 1.0;
        assert!(cfg.validate("laplace").is_err());
        let mut cfg = RunConfig::default();
        cfg.mc.n_max = 1.0;
        assert!(cfg.validate("beam").is_err());
    }
}
