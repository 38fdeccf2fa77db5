use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contact::Plane;
use crate::mpc::MpcParams;
use crate::{Error, Result};

const PUSHING: &str = include_str!("../../presets/pushing.preset");
const REORIENTATION: &str = include_str!("../../presets/reorientation.preset");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Pushing,
    Reorientation,
}

/// Uniform planar pose distribution. With `flip_x` the sampled yaw is
/// composed after a half turn about x.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseDistribution {
    pub xy_min: [f64; 2],
    pub xy_max: [f64; 2],
    pub yaw_deg: [f64; 2],
    #[serde(default)]
    pub flip_x: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuccessThresholds {
    /// Metres.
    pub translation: f64,
    /// Unitless rotation distance.
    pub rotation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    #[default]
    None,
    ExternalForce,
    Friction,
}

impl std::str::FromStr for PerturbationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "external-force" | "external_force" => Ok(Self::ExternalForce),
            "friction" => Ok(Self::Friction),
            other => Err(Error::Config(format!("unknown perturbation '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    /// Per-axis standard deviation of the random force (N) and torque (N·m).
    pub force_sigma: f64,
    /// Range of the per-step friction multiplier.
    pub friction_range: [f64; 2],
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            kind: PerturbationKind::None,
            force_sigma: 0.03,
            friction_range: [0.1, 3.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepositionParams {
    /// Clearance above the object's top when travelling (m).
    pub lift: f64,
    /// Gap between the end-effector surface and the face at the approach point (m).
    pub standoff_margin: f64,
    pub max_steps: usize,
    /// Waypoint arrival tolerance (m).
    pub tolerance: f64,
}

impl Default for RepositionParams {
    fn default() -> Self {
        Self {
            lift: 0.05,
            standoff_margin: 0.01,
            max_steps: 150,
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyParams {
    /// Keypoints kept by farthest-point subsampling.
    pub candidates: usize,
}

impl Default for GreedyParams {
    fn default() -> Self {
        Self { candidates: 24 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub task: Task,
    /// Asset names; one is drawn uniformly per episode.
    pub objects: Vec<String>,
    /// Decisions per episode.
    pub episode_limit: usize,
    /// Scaled clearance below which a keypoint is infeasible.
    pub feasibility_threshold: f64,
    pub ee_home: [f64; 3],
    pub init: PoseDistribution,
    pub target: PoseDistribution,
    pub success: SuccessThresholds,
    pub reward: RewardWeights,
    #[serde(default)]
    pub perturbation: Perturbation,
    #[serde(default)]
    pub reposition: RepositionParams,
    #[serde(default)]
    pub walls: Vec<Plane>,
    #[serde(default)]
    pub greedy: GreedyParams,
    pub mpc: MpcParams,
}

impl TaskConfig {
    pub fn pushing() -> Self {
        Self::from_toml_str(PUSHING).expect("bundled pushing preset")
    }

    pub fn reorientation() -> Self {
        Self::from_toml_str(REORIENTATION).expect("bundled reorientation preset")
    }

    /// Source text of a bundled preset.
    pub fn bundled_source(name: &str) -> Option<&'static str> {
        match name {
            "pushing" => Some(PUSHING),
            "reorientation" => Some(REORIENTATION),
            _ => None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_value(parse_toml(text)?)
    }

    pub fn from_toml_value(value: toml::Value) -> Result<Self> {
        // Re-parse through text so errors carry line information.
        let text = toml::to_string(&value).map_err(|e| Error::Config(e.to_string()))?;
        let config: Self = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads a bundled preset by name or a preset file by path, then applies
    /// `key=value` overrides.
    pub fn load(name_or_path: &str, overrides: &[String]) -> Result<Self> {
        let text = match Self::bundled_source(name_or_path) {
            Some(src) => src.to_string(),
            None => std::fs::read_to_string(Path::new(name_or_path))
                .map_err(|e| Error::Config(format!("cannot read preset '{name_or_path}': {e}")))?,
        };
        let mut value = parse_toml(&text)?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_toml_value(value)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialization")
    }

    pub fn steps_per_decision(&self) -> usize {
        self.mpc.steps_per_decision
    }

    pub fn validate(&self) -> Result<()> {
        if self.objects.is_empty() {
            return Err(Error::Config("objects must name at least one asset".into()));
        }
        if self.episode_limit == 0 {
            return Err(Error::Config("episode_limit must be at least 1".into()));
        }
        for (name, d) in [("init", &self.init), ("target", &self.target)] {
            if (0..2).any(|a| !(d.xy_min[a] <= d.xy_max[a])) || !(d.yaw_deg[0] <= d.yaw_deg[1]) {
                return Err(Error::Config(format!("{name}: empty sampling range")));
            }
        }
        if !(self.success.translation > 0.0 && self.success.rotation > 0.0) {
            return Err(Error::Config("success thresholds must be positive".into()));
        }
        if !(self.feasibility_threshold >= 0.0) {
            return Err(Error::Config("feasibility_threshold must be non-negative".into()));
        }
        let p = &self.perturbation;
        if !(p.force_sigma >= 0.0 && p.friction_range[0] >= 0.0 && p.friction_range[0] <= p.friction_range[1]) {
            return Err(Error::Config("invalid perturbation parameters".into()));
        }
        for w in &self.walls {
            if (w.normal.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Config("wall normals must be unit length".into()));
            }
        }
        self.mpc.validate()
    }
}

fn parse_toml(text: &str) -> Result<toml::Value> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    Ok(toml::Value::Table(table))
}

/// Sets a dotted key in a TOML tree. The value is read as a TOML literal
/// and taken as a bare string if that fails.
pub fn apply_override(root: &mut toml::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key '{key}' is malformed")));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key '{key}' crosses a non-table")))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    node.as_table_mut()
        .ok_or_else(|| Error::Config(format!("override key '{key}' crosses a non-table")))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_presets_carry_task_values() {
        let p = TaskConfig::pushing();
        assert_eq!(p.task, Task::Pushing);
        assert_eq!((p.init.xy_min, p.init.xy_max), ([-0.25, -0.25], [0.25, 0.25]));
        assert_eq!(p.target.yaw_deg, [-180.0, 180.0]);
        assert_eq!((p.success.translation, p.success.rotation), (0.05, 0.05));
        assert_eq!((p.reward.w1, p.reward.w2, p.reward.w3), (0.1, 5.0, 0.0));
        assert_eq!(p.episode_limit, 64);
        assert_eq!(p.steps_per_decision(), 20);
        assert_eq!(p.mpc, MpcParams::simulation());

        let r = TaskConfig::reorientation();
        assert_eq!((r.init.xy_min, r.init.xy_max), ([-0.1, -0.1], [0.1, 0.1]));
        assert!(r.target.flip_x);
        assert_eq!((r.success.translation, r.success.rotation), (0.08, 0.05));
        assert_eq!(r.reward.w3, 1.0);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = TaskConfig::load(
            "pushing",
            &[
                "mpc.sampler.num_samples=8".into(),
                "objects=[\"letter_t\"]".into(),
                "perturbation.kind=friction".into(),
                "mpc.mu=0.3".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.mpc.sampler.num_samples, 8);
        assert_eq!(c.objects, vec!["letter_t".to_string()]);
        assert_eq!(c.perturbation.kind, PerturbationKind::Friction);
        assert_eq!(c.mpc.dynamics.mu, 0.3);
    }

    #[test]
    fn bad_config_reports_location() {
        let err = TaskConfig::from_toml_str("task = \"pushing\"\nobjects = [\n").unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("line")), "{err}");
        assert!(TaskConfig::load("pushing", &["nonsense_key=1".into()]).is_err());
        assert!(TaskConfig::load("pushing", &["noequals".into()]).is_err());
        assert!(TaskConfig::load("pushing", &["perturbation.kind=gale".into()]).is_err());
    }

    #[test]
    fn round_trip() {
        let c = TaskConfig::reorientation();
        assert_eq!(TaskConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }
}
