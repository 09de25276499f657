//! Experiment configuration: a TOML file with one flat section per module.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::DomainSpec;
use crate::error::{LqgError, Result};
use crate::spectral::DEFAULT_WINDOW;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "LQG_OUT_DIR";
pub const MIN_N: usize = 8;
pub const MAX_N: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub grid: GridSection,
    pub field: FieldSection,
    pub run: RunSection,
    pub spectral: SpectralSection,
    pub heat: HeatSection,
    pub mc: McSection,
    pub chaos: ChaosSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub base_seed: u64,
    pub replicas: usize,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSection {
    pub window_frac: (f64, f64),
    /// Number of leading eigenfunctions written by `spectrum`.
    pub save_eigenfunctions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatSection {
    pub decades: usize,
    pub points_per_decade: usize,
    /// Also collect the annealed diagonal statistic over the replicas.
    pub annealed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub n_paths: usize,
    pub n_bridges: usize,
    /// Walk step; defaults to mesh²/4.
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaosSection {
    pub partition: usize,
    /// Number of eigenfunctions sampled across the window by `que`.
    pub que_count: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: DomainSpec::disc(),
            grid: GridSection::default(),
            field: FieldSection::default(),
            run: RunSection::default(),
            spectral: SpectralSection::default(),
            heat: HeatSection::default(),
            mc: McSection::default(),
            chaos: ChaosSection::default(),
        }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { n: 32 }
    }
}

impl Default for FieldSection {
    fn default() -> Self {
        FieldSection { gamma: 0.0 }
    }
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { base_seed: 42, replicas: 1, workers: 0, output_dir: None }
    }
}

impl Default for SpectralSection {
    fn default() -> Self {
        SpectralSection { window_frac: DEFAULT_WINDOW, save_eigenfunctions: 0 }
    }
}

impl Default for HeatSection {
    fn default() -> Self {
        HeatSection { decades: 4, points_per_decade: 10, annealed: false }
    }
}

impl Default for McSection {
    fn default() -> Self {
        McSection { n_paths: 10_000, n_bridges: 20_000, dt: None }
    }
}

impl Default for ChaosSection {
    fn default() -> Self {
        ChaosSection { partition: crate::chaos::DEFAULT_PARTITION, que_count: 20 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| LqgError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serialisable")
    }

    /// Canonical TOML with the output location removed, so reruns into
    /// different directories share hashes and run ids.
    pub fn canonical_toml(&self) -> String {
        let mut c = self.clone();
        c.run.output_dir = None;
        c.to_toml()
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical_toml`].
    pub fn hash(&self) -> String {
        hex::encode(&Sha256::digest(self.canonical_toml().as_bytes())[..8])
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        let fail = |field: &str, why: String| Err(LqgError::config(format!("{field} {why}")));
        if !(MIN_N..=MAX_N).contains(&self.grid.n) {
            return fail("grid.n", format!("must lie in [{MIN_N}, {MAX_N}], got {}", self.grid.n));
        }
        if !(0.0..2.0).contains(&self.field.gamma) {
            return fail("field.gamma", format!("must lie in [0, 2), got {}", self.field.gamma));
        }
        if self.run.replicas == 0 {
            return fail("run.replicas", "must be at least 1".into());
        }
        let (lo, hi) = self.spectral.window_frac;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return fail("spectral.window_frac", format!("must satisfy 0 <= lo < hi <= 1, got ({lo}, {hi})"));
        }
        if !(1..=12).contains(&self.heat.decades) {
            return fail("heat.decades", format!("must lie in [1, 12], got {}", self.heat.decades));
        }
        if !(2..=100).contains(&self.heat.points_per_decade) {
            return fail("heat.points_per_decade", format!("must lie in [2, 100], got {}", self.heat.points_per_decade));
        }
        if self.mc.n_paths < 2 {
            return fail("mc.n_paths", "must be at least 2".into());
        }
        if self.mc.n_bridges < 2 {
            return fail("mc.n_bridges", "must be at least 2".into());
        }
        if let Some(dt) = self.mc.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return fail("mc.dt", format!("must be positive, got {dt}"));
            }
        }
        if self.chaos.partition < 2 {
            return fail("chaos.partition", format!("must be at least 2, got {}", self.chaos.partition));
        }
        Ok(())
    }

    /// `--out` beats the config file, which beats the environment.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.run.output_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("lqg_out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::default();
        c.field.gamma = 1.25;
        c.mc.dt = Some(1e-4);
        c.run.output_dir = Some("out".into());
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn partial_files_take_defaults() {
        let c = ExperimentConfig::from_toml("[field]\ngamma = 1.0\n[domain]\nkind = \"square\"\n").unwrap();
        assert_eq!(c.field.gamma, 1.0);
        assert_eq!(c.grid.n, 32);
        assert_eq!(c.domain.kind, crate::domain::DomainKind::Square);
    }

    #[test]
    fn errors_name_the_field() {
        let e = ExperimentConfig::from_toml("[field]\ngamma = 2.5\n").unwrap_err();
        assert!(e.to_string().contains("field.gamma"), "{e}");
        assert!(ExperimentConfig::from_toml("[grid]\nn = 4\n").unwrap_err().to_string().contains("grid.n"));
        assert!(ExperimentConfig::from_toml("[grid]\nm = 4\n").is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.run.base_seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        b.run.base_seed -= 1;
        b.run.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
    }
}
