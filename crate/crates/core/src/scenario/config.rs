use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distflow::{cigre_residential, GridFile, GridOverrides, Partition, RadialGrid};
use crate::error::{Error, Result};
use crate::netsys::DisconnectionFamily;
use crate::resgen::GeneratorKind;

/// Residual post-filter applied inside each local generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum FilterChoice {
    #[default]
    #[serde(rename = "none")]
    None,
    #[serde(rename = "bessel")]
    Bessel,
    #[serde(rename = "isolation")]
    Isolation,
    #[serde(rename = "isolation+bessel")]
    IsolationBessel,
}

impl FilterChoice {
    pub fn isolation(self) -> bool {
        matches!(self, FilterChoice::Isolation | FilterChoice::IsolationBessel)
    }
    pub fn bessel(self) -> bool {
        matches!(self, FilterChoice::Bessel | FilterChoice::IsolationBessel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    /// Generation bus whose voltage reference is falsified.
    pub bus: String,
    #[serde(default = "default_t0")]
    pub t0_s: f64,
    /// Step added to `v̄²` of the bus, per-unit of `v̄₀²`.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Standard deviation on each measured reactive power, per-unit of the power base.
    #[serde(default = "default_noise_std")]
    pub std: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            std: default_noise_std(),
            seed: 0,
        }
    }
}

/// One scenario run. Subsystem numbers in `family` and `alarm_map` are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Grid file; the bundled residential feeder when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "is_default_overrides")]
    pub grid_overrides: GridOverrides,
    #[serde(default = "default_kind")]
    pub generator_kind: GeneratorKind,
    #[serde(default = "one")]
    pub gain_q: f64,
    #[serde(default = "one")]
    pub gain_r: f64,
    #[serde(default)]
    pub filters: FilterChoice,
    #[serde(default = "one")]
    pub bessel_cutoff_hz: f64,
    pub attack: AttackConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    #[serde(default = "default_step")]
    pub step_s: f64,
    /// Admissible remaining sets; every nonempty subset when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Vec<Vec<usize>>>,
    /// Subsystems removed when a detector fires; `{i}` for unlisted `i`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub alarm_map: BTreeMap<usize, Vec<usize>>,
    /// `γ_i = threshold_scale · ā · α_i`.
    #[serde(default = "default_threshold_scale")]
    pub threshold_scale: f64,
    /// Amplitude the thresholds are calibrated for; the attack amplitude when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_amplitude: Option<f64>,
}

fn default_t0() -> f64 {
    1.0
}
fn default_amplitude() -> f64 {
    0.1
}
fn default_noise_std() -> f64 {
    0.005
}
fn default_kind() -> GeneratorKind {
    GeneratorKind::Retrofit
}
fn one() -> f64 {
    1.0
}
fn default_horizon() -> f64 {
    10.0
}
fn default_step() -> f64 {
    1e-3
}
fn default_threshold_scale() -> f64 {
    0.9
}
fn is_default_overrides(o: &GridOverrides) -> bool {
    *o == GridOverrides::default()
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be positive and finite, got {v}")))
    }
}

impl ScenarioConfig {
    /// Default scenario on the bundled feeder with the attack on `bus`.
    pub fn minimal(bus: &str) -> Self {
        serde_json::from_value(serde_json::json!({ "attack": { "bus": bus } })).expect("defaults deserialize")
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    /// Grid and partition, with overrides applied.
    pub fn grid(&self) -> Result<(RadialGrid, Partition)> {
        match &self.grid_path {
            None => cigre_residential(&self.grid_overrides),
            Some(p) => {
                let mut file = GridFile::load(p).map_err(|e| match e {
                    Error::Io(io) => Error::validation("grid_path", format!("{}: {io}", p.display())),
                    other => other,
                })?;
                self.grid_overrides.apply(&mut file)?;
                file.build()
            }
        }
    }

    /// Family over 0-based indices with the alarm map attached.
    pub fn family(&self, n: usize) -> Result<DisconnectionFamily> {
        let to_zero = |field: &str, set: &[usize]| -> Result<Vec<usize>> {
            let mut s: Vec<usize> = set
                .iter()
                .map(|&i| {
                    if i == 0 || i > n {
                        Err(Error::validation(field, format!("subsystem {i} outside 1..={n}")))
                    } else {
                        Ok(i - 1)
                    }
                })
                .collect::<Result<_>>()?;
            s.sort_unstable();
            if s.is_empty() || s.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::validation(field, format!("{set:?} must be a nonempty set without repeats")));
            }
            Ok(s)
        };
        let sets = match &self.family {
            None => DisconnectionFamily::all_subsets(n).sets().to_vec(),
            Some(f) => f.iter().map(|s| to_zero("family", s)).collect::<Result<_>>()?,
        };
        let full: Vec<usize> = (0..n).collect();
        if !sets.contains(&full) {
            return Err(Error::validation("family", "must contain the full set of subsystems"));
        }
        let mut map = BTreeMap::new();
        for (&k, v) in &self.alarm_map {
            if k == 0 || k > n {
                return Err(Error::validation("alarm_map", format!("subsystem {k} outside 1..={n}")));
            }
            map.insert(k - 1, to_zero("alarm_map", v)?);
        }
        DisconnectionFamily::new(n, sets, map)
    }

    /// Checks everything that does not need the numerical design.
    pub fn validate(&self) -> Result<()> {
        positive("gain_q", self.gain_q)?;
        positive("gain_r", self.gain_r)?;
        positive("bessel_cutoff_hz", self.bessel_cutoff_hz)?;
        positive("step_s", self.step_s)?;
        positive("horizon_s", self.horizon_s)?;
        positive("attack.t0_s", self.attack.t0_s)?;
        positive("threshold_scale", self.threshold_scale)?;
        if self.horizon_s <= self.attack.t0_s {
            return Err(Error::validation("horizon_s", "must exceed attack.t0_s"));
        }
        if self.step_s > self.horizon_s {
            return Err(Error::validation("step_s", "must not exceed horizon_s"));
        }
        if !self.attack.amplitude.is_finite() {
            return Err(Error::validation("attack.amplitude", "must be finite"));
        }
        if !(self.noise.std >= 0.0 && self.noise.std.is_finite()) {
            return Err(Error::validation("noise.std", "must be nonnegative and finite"));
        }
        if let Some(a) = self.design_amplitude {
            positive("design_amplitude", a)?;
        } else if self.attack.amplitude == 0.0 {
            return Err(Error::validation(
                "design_amplitude",
                "required when attack.amplitude is zero (thresholds scale with the amplitude)",
            ));
        }
        let (grid, partition) = self.grid()?;
        let bus = grid
            .index_of(&self.attack.bus)
            .ok_or_else(|| Error::validation("attack.bus", format!("unknown bus {}", self.attack.bus)))?;
        if grid.dg(bus).is_none() {
            return Err(Error::validation("attack.bus", format!("{} has no generation", self.attack.bus)));
        }
        for (i, g) in partition.groups().iter().enumerate() {
            if !g.iter().any(|&b| grid.dg(b).is_some()) {
                return Err(Error::validation(
                    "partition",
                    format!("group {} has no generation bus and therefore no measurement", i + 1),
                ));
            }
        }
        self.family(partition.len())?;
        Ok(())
    }

    /// `ā` used for threshold calibration.
    pub fn calibration_amplitude(&self) -> f64 {
        self.design_amplitude.unwrap_or(self.attack.amplitude).abs()
    }
}

/// Parse, resolve `grid_path` against the config's directory, and validate.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::validation("config", format!("{}: {e}", path.display())))?;
    let mut cfg = ScenarioConfig::parse(&text)?;
    if let Some(p) = &cfg.grid_path {
        if p.is_relative() {
            let dir = path.parent().unwrap_or(Path::new("."));
            cfg.grid_path = Some(dir.join(p));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_defaults() {
        let cfg = ScenarioConfig::parse(r#"{"attack": {"bus": "R18"}}"#).unwrap();
        assert_eq!(cfg.attack.t0_s, 1.0);
        assert_eq!(cfg.horizon_s, 10.0);
        assert_eq!(cfg.step_s, 1e-3);
        assert_eq!(cfg.bessel_cutoff_hz, 1.0);
        assert_eq!(cfg.generator_kind, GeneratorKind::Retrofit);
        assert_eq!(cfg.filters, FilterChoice::None);
        cfg.validate().unwrap();
        assert_eq!(cfg, ScenarioConfig::minimal("R18"));
    }

    #[test]
    fn rejections_name_the_field() {
        let field = |e: Error| match e {
            Error::Validation { field, .. } => field,
            other => panic!("expected validation error, got {other}"),
        };
        assert_eq!(field(ScenarioConfig::minimal("R5").validate().unwrap_err()), "attack.bus");
        let mut cfg = ScenarioConfig::minimal("R18");
        cfg.horizon_s = 0.5;
        assert_eq!(field(cfg.validate().unwrap_err()), "horizon_s");
        let mut cfg = ScenarioConfig::minimal("R18");
        cfg.family = Some(vec![vec![1]]);
        assert_eq!(field(cfg.validate().unwrap_err()), "family");
        let mut cfg = ScenarioConfig::minimal("R18");
        cfg.alarm_map.insert(3, vec![1]);
        assert_eq!(field(cfg.validate().unwrap_err()), "alarm_map");
    }

    #[test]
    fn parse_errors_carry_position() {
        match ScenarioConfig::parse("{\n  \"attack\": {\"bus\": \"R18\"},\n  \"gain\": 2\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(ScenarioConfig::parse("{\"attack\": "), Err(Error::Parse { .. })));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ScenarioConfig::minimal("R18");
        cfg.filters = FilterChoice::IsolationBessel;
        cfg.family = Some(vec![vec![1, 2], vec![2]]);
        cfg.alarm_map.insert(1, vec![1]);
        let path = dir.path().join("c.json");
        cfg.save(&path).unwrap();
        assert_eq!(load_config(&path).unwrap(), cfg);
    }

    #[test]
    fn family_conversion() {
        let cfg = ScenarioConfig::minimal("R18");
        let fam = cfg.family(2).unwrap();
        assert_eq!(fam.sets().len(), 3);
        assert_eq!(fam.removed_on_alarm(0), vec![0]);
    }
}
