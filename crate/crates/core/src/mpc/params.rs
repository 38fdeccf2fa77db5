use serde::{Deserialize, Serialize};

use crate::contact::{ContactSolve, DynamicsParams};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    pub num_samples: usize,
    pub num_iterations: usize,
    /// Standard deviation of the per-component Gaussian perturbation (m).
    pub noise_scale: f64,
    pub seed: u64,
}

/// Everything the intention-conditioned MPC needs.
///
/// Serialises with the tabulated key names (`h`, `K_r`, `H`, `w_c`, `i`, `m`,
/// `control_range_scale`, `K`, `mu`, `T`) plus optional `contact` and
/// `sampler` sub-tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PresetFile", into = "PresetFile")]
pub struct MpcParams {
    pub dynamics: DynamicsParams,
    /// Prediction horizon `H` in steps.
    pub horizon: usize,
    /// Contact-attraction weight `w_c`.
    pub w_c: f64,
    /// Box bound on each command component (m).
    pub control_range_scale: f64,
    /// Control steps per high-level decision, `T`.
    pub steps_per_decision: usize,
    pub sampler: SamplerParams,
}

/// On-disk preset. The top-level keys are exactly the tabulated MPC
/// settings; solver knobs live in optional sub-tables.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetFile {
    h: f64,
    #[serde(rename = "K_r")]
    k_r: f64,
    #[serde(rename = "H")]
    horizon: usize,
    w_c: f64,
    i: f64,
    m: f64,
    control_range_scale: f64,
    #[serde(rename = "K")]
    k: f64,
    mu: f64,
    #[serde(rename = "T")]
    t: usize,
    #[serde(default)]
    contact: ContactSection,
    #[serde(default)]
    sampler: SamplerSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ContactSection {
    facets_per_contact: usize,
    max_gap: f64,
    ee_radius: f64,
    gravity: f64,
    solve: ContactSolve,
}

impl Default for ContactSection {
    fn default() -> Self {
        let d = DynamicsParams::default();
        Self {
            facets_per_contact: d.facets_per_contact,
            max_gap: d.max_gap,
            ee_radius: d.ee_radius,
            gravity: d.gravity,
            solve: d.solve,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SamplerSection {
    num_samples: Option<usize>,
    num_iterations: Option<usize>,
    noise_scale: Option<f64>,
    seed: Option<u64>,
}

impl Default for MpcParams {
    fn default() -> Self {
        Self::simulation()
    }
}

impl MpcParams {
    /// The simulation column of the task-specific MPC table.
    pub fn simulation() -> Self {
        let control_range_scale = 0.03;
        Self {
            dynamics: DynamicsParams {
                h: 0.01,
                robot_stiffness: 0.01,
                contact_stiffness: 5.0,
                mu: 0.5,
                mass: 0.2,
                inertia: 0.0005,
                ..DynamicsParams::default()
            },
            horizon: 3,
            w_c: 0.2,
            control_range_scale,
            steps_per_decision: 20,
            sampler: SamplerParams {
                num_samples: 64,
                num_iterations: 2,
                noise_scale: 0.5 * control_range_scale,
                seed: 0,
            },
        }
    }

    pub fn from_toml_value(value: toml::Value) -> Result<Self> {
        value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("preset serialization")
    }

    pub fn validate(&self) -> Result<()> {
        self.dynamics.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.horizon == 0 {
            return Err(Error::Config("H must be at least 1".into()));
        }
        if !(self.control_range_scale > 0.0 && self.control_range_scale.is_finite()) {
            return Err(Error::Config("control_range_scale must be positive".into()));
        }
        if !(self.w_c >= 0.0 && self.w_c.is_finite()) {
            return Err(Error::Config("w_c must be non-negative".into()));
        }
        if self.steps_per_decision == 0 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        if !(self.sampler.noise_scale >= 0.0 && self.sampler.noise_scale.is_finite()) {
            return Err(Error::Config("sampler.noise_scale must be non-negative".into()));
        }
        Ok(())
    }
}

impl TryFrom<PresetFile> for MpcParams {
    type Error = Error;

    fn try_from(file: PresetFile) -> Result<Self> {
        let params = Self {
            dynamics: DynamicsParams {
                h: file.h,
                robot_stiffness: file.k_r,
                contact_stiffness: file.k,
                mu: file.mu,
                mass: file.m,
                inertia: file.i,
                facets_per_contact: file.contact.facets_per_contact,
                max_gap: file.contact.max_gap,
                ee_radius: file.contact.ee_radius,
                gravity: file.contact.gravity,
                solve: file.contact.solve,
            },
            horizon: file.horizon,
            w_c: file.w_c,
            control_range_scale: file.control_range_scale,
            steps_per_decision: file.t,
            sampler: SamplerParams {
                num_samples: file.sampler.num_samples.unwrap_or(64),
                num_iterations: file.sampler.num_iterations.unwrap_or(2),
                noise_scale: file.sampler.noise_scale.unwrap_or(0.5 * file.control_range_scale),
                seed: file.sampler.seed.unwrap_or(0),
            },
        };
        params.validate()?;
        Ok(params)
    }
}

impl From<MpcParams> for PresetFile {
    fn from(p: MpcParams) -> Self {
        let d = p.dynamics;
        Self {
            h: d.h,
            k_r: d.robot_stiffness,
            horizon: p.horizon,
            w_c: p.w_c,
            i: d.inertia,
            m: d.mass,
            control_range_scale: p.control_range_scale,
            k: d.contact_stiffness,
            mu: d.mu,
            t: p.steps_per_decision,
            contact: ContactSection {
                facets_per_contact: d.facets_per_contact,
                max_gap: d.max_gap,
                ee_radius: d.ee_radius,
                gravity: d.gravity,
                solve: d.solve,
            },
            sampler: SamplerSection {
                num_samples: Some(p.sampler.num_samples),
                num_iterations: Some(p.sampler.num_iterations),
                noise_scale: Some(p.sampler.noise_scale),
                seed: Some(p.sampler.seed),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE: &str = r#"
h = 0.01
K_r = 0.01
H = 3
w_c = 0.2
i = 0.0005
m = 0.2
control_range_scale = 0.03
K = 5.0
mu = 0.5
T = 20
"#;

    #[test]
    fn bare_table_keys_give_simulation_preset() {
        let p = MpcParams::from_toml_str(TABLE).unwrap();
        assert_eq!(p, MpcParams::simulation());
    }

    #[test]
    fn round_trip() {
        let mut p = MpcParams::simulation();
        p.sampler.num_samples = 17;
        p.dynamics.solve = ContactSolve::ClosedForm;
        assert_eq!(MpcParams::from_toml_str(&p.to_toml_string()).unwrap(), p);
    }

    #[test]
    fn unknown_and_missing_keys_are_config_errors() {
        let extra = format!("{TABLE}\nbogus = 1\n");
        assert!(matches!(MpcParams::from_toml_str(&extra), Err(Error::Config(_))));
        let missing = TABLE.replace("mu = 0.5\n", "");
        assert!(matches!(MpcParams::from_toml_str(&missing), Err(Error::Config(_))));
        let zero_h = TABLE.replace("H = 3", "H = 0");
        assert!(matches!(MpcParams::from_toml_str(&zero_h), Err(Error::Config(_))));
    }
}
