//! Run configuration: one JSON document holding the layout, radio
//! parameters, sampling seeds, strategy source and surrogate candidates.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{room_boundary_walls, Gnb, OfficeLayout, Rect, Room, Segment};
use crate::propagation::RfParams;

/// Serialized office layout. When `walls` is omitted every room boundary is
/// a wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSpec {
    pub bounds: Rect,
    pub rooms: Vec<Room>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walls: Option<Vec<Segment>>,
    pub gnbs: Vec<Gnb>,
}

impl LayoutSpec {
    pub fn build(&self) -> Result<OfficeLayout> {
        let walls = match &self.walls {
            Some(w) => w.clone(),
            None => room_boundary_walls(&self.rooms),
        };
        OfficeLayout::new(self.bounds, self.rooms.clone(), walls, self.gnbs.clone())
    }
}

impl From<&OfficeLayout> for LayoutSpec {
    fn from(layout: &OfficeLayout) -> Self {
        Self {
            bounds: *layout.bounds(),
            rooms: layout.rooms().to_vec(),
            walls: Some(layout.walls().to_vec()),
            gnbs: layout.gnbs().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub scenario_count: usize,
    pub seed: u64,
    pub grid_spacing_m: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scenario_count: 1000,
            seed: 42,
            grid_spacing_m: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub ranks: Vec<usize>,
    pub degrees: Vec<usize>,
    pub cv_seed: u64,
    /// Surrogate draws behind each histogram.
    pub sample_count: usize,
    pub sample_seed: u64,
    pub histogram_bins: usize,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            ranks: (1..=10).collect(),
            degrees: (1..=4).collect(),
            cv_seed: 7,
            sample_count: 10_000,
            sample_seed: 11,
            histogram_bins: 50,
        }
    }
}

/// Where the strategy list comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySource {
    /// A `strategy,assignment` CSV, relative paths resolved against the
    /// config file's directory.
    File(PathBuf),
    /// The seeded default set of 32.
    DefaultSeed(u64),
}

impl Default for StrategySource {
    fn default() -> Self {
        StrategySource::DefaultSeed(2022)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub layout: LayoutSpec,
    pub rf: RfParams,
    pub sim: SimConfig,
    pub surrogate: SurrogateConfig,
    pub strategies: StrategySource,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            layout: LayoutSpec {
                walls: None,
                ..LayoutSpec::from(&OfficeLayout::default_office())
            },
            rf: RfParams::default(),
            sim: SimConfig::default(),
            surrogate: SurrogateConfig::default(),
            strategies: StrategySource::default(),
        }
    }
}

impl RunConfig {
    /// Parses and validates a JSON document. Relative strategy paths are
    /// resolved against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))?;
        if let StrategySource::File(p) = &mut config.strategies {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.build()?;
        self.rf.validate()?;
        let s = &self.sim;
        if !(s.grid_spacing_m > 0.0 && s.grid_spacing_m.is_finite()) {
            return Err(Error::config("sim.grid_spacing_m must be positive"));
        }
        let g = &self.surrogate;
        if g.ranks.is_empty() || g.ranks.contains(&0) {
            return Err(Error::config("surrogate.ranks must be non-empty and positive"));
        }
        if g.degrees.is_empty() {
            return Err(Error::config("surrogate.degrees must be non-empty"));
        }
        if g.histogram_bins == 0 {
            return Err(Error::config("surrogate.histogram_bins must be positive"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact canonical serialization, in hex.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Comment line that opens every output file.
    pub fn provenance(&self) -> String {
        let strategy_seed = match &self.strategies {
            StrategySource::DefaultSeed(s) => s.to_string(),
            StrategySource::File(_) => "file".into(),
        };
        format!(
            "# emf-tradeoff {} config_digest={} seeds=sim:{},strategies:{},cv:{},samples:{}",
            env!("CARGO_PKG_VERSION"),
            self.digest(),
            self.sim.seed,
            strategy_seed,
            self.surrogate.cv_seed,
            self.surrogate.sample_seed
        )
    }
}
