//! Run configuration, read from TOML.
//!
//! Every key is optional; missing keys take the defaults below. Unknown keys
//! are rejected.
//!
//! ```toml
//! variant = "bilinear"            # linear | bilinear | decentralized-bilinear
//! estimator = "rls"               # rls | gradient
//! gradient_gain = 1.0
//! dt = 0.05
//! rho = 1e-4
//! p0_scale = 100.0
//! # reset_interval = 75          # 0 disables; unset uses 130 (linear) or 75
//! identification_steps = 300
//! control_steps = 30
//! probe_start_index = 1
//! case = "I"
//! seed = 0
//! arrival_tolerance = 0.5
//! stop_on_arrival = true
//! decentralized_natural = "own"  # own | neighbor
//! output_dir = "out"
//!
//! [workspace]
//! wall_radius = 11.0
//! robot_radius = 2.0
//! center = [0.0, 0.0]
//! distance_convention = "both-radii"   # both-radii | single-radius
//!
//! [bounds]
//! lower = -4.0
//! upper = 3.0
//!
//! [weights]                       # centralized controller
//! control = [...18...]
//! # omega = [[...6...], [...], [...]]
//!
//! [decentralized_weights]         # same shape, used by decentralized runs
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::BoxBounds;
use crate::dynamics::{DistanceConvention, Workspace};
use crate::harness::{EstimatorKind, IdentificationSetup, NaturalSource, Variant};
use crate::utility::{default_omega, UtilityWeights};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkspaceConfig {
    pub wall_radius: f64,
    pub robot_radius: f64,
    pub center: [f64; 2],
    pub distance_convention: DistanceConvention,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        let ws = Workspace::default();
        WorkspaceConfig {
            wall_radius: ws.wall_radius,
            robot_radius: ws.robot_radius,
            center: ws.center,
            distance_convention: ws.distance_convention,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub variant: Variant,
    pub estimator: EstimatorKind,
    pub gradient_gain: f64,
    pub dt: f64,
    pub rho: f64,
    pub p0_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reset_interval: Option<u64>,
    pub identification_steps: u64,
    pub control_steps: u64,
    pub probe_start_index: u64,
    pub case: String,
    pub seed: u64,
    pub arrival_tolerance: f64,
    pub stop_on_arrival: bool,
    pub decentralized_natural: NaturalSource,
    pub output_dir: PathBuf,
    pub workspace: WorkspaceConfig,
    pub bounds: BoxBounds,
    pub weights: UtilityWeights,
    pub decentralized_weights: UtilityWeights,
}

/// Committed controller weights for the centralized models.
pub fn default_weights() -> UtilityWeights {
    UtilityWeights {
        omega: default_omega(),
        // found by cross-entropy search over the five centralized cases
        control: [
            0.854, 1.3191, -1.6088, -0.1812, 0.5725, 0.7275, //
            -0.3763, 1.2094, 0.021, 1.6447, 0.6636, 0.0176, //
            -1.4199, 1.0856, 0.5801, -1.5519, -0.7437, -2.6315,
        ],
    }
}

/// Committed controller weights for the decentralized model.
pub fn default_decentralized_weights() -> UtilityWeights {
    UtilityWeights {
        control: [
            -1.2681, -1.2485, -0.4744, -1.1491, -0.9277, 0.1854, //
            1.2277, 0.6219, 0.7062, 0.4536, 0.6198, 0.507, //
            -0.0105, 0.5301, 0.5431, -0.304, 0.4058, 2.0644,
        ],
        ..default_weights()
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            variant: Variant::Bilinear,
            estimator: EstimatorKind::Rls,
            gradient_gain: 1.0,
            dt: 0.05,
            rho: 1e-4,
            p0_scale: 100.0,
            reset_interval: None,
            identification_steps: 300,
            control_steps: 30,
            probe_start_index: 1,
            case: "I".into(),
            seed: 0,
            arrival_tolerance: 0.5,
            stop_on_arrival: true,
            decentralized_natural: NaturalSource::Own,
            output_dir: PathBuf::from("out"),
            workspace: WorkspaceConfig::default(),
            bounds: BoxBounds::default(),
            weights: default_weights(),
            decentralized_weights: default_decentralized_weights(),
        }
    }
}

impl RunConfig {
    /// Defaults for `variant`.
    pub fn for_variant(variant: Variant) -> Self {
        RunConfig {
            variant,
            ..RunConfig::default()
        }
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            wall_radius: self.workspace.wall_radius,
            robot_radius: self.workspace.robot_radius,
            center: self.workspace.center,
            dt: self.dt,
            distance_convention: self.workspace.distance_convention,
        }
    }

    /// Effective reset period; `None` when resets are disabled.
    pub fn reset_interval(&self) -> Option<u64> {
        match self.reset_interval {
            None => Some(self.variant.default_reset_interval()),
            Some(0) => None,
            Some(n) => Some(n),
        }
    }

    pub fn identification_setup(&self) -> IdentificationSetup {
        IdentificationSetup::for_variant(self.variant)
    }

    pub fn weights_for(&self, variant: Variant) -> &UtilityWeights {
        match variant {
            Variant::DecentralizedBilinear => &self.decentralized_weights,
            _ => &self.weights,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.workspace().validate()?;
        let positive = [
            ("rho", self.rho),
            ("p0_scale", self.p0_scale),
            ("arrival_tolerance", self.arrival_tolerance),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        if !(self.gradient_gain > 0.0 && self.gradient_gain < 2.0) {
            return Err(Error::config(
                "gradient_gain",
                format!("must lie in (0, 2), got {}", self.gradient_gain),
            ));
        }
        if self.control_steps == 0 {
            return Err(Error::config("control_steps", "must be positive"));
        }
        self.bounds.validate()?;
        self.weights.validate()?;
        self.decentralized_weights.validate()?;
        let ws = self.workspace();
        let setup = self.identification_setup();
        setup.targets.validate(&ws)?;
        crate::harness::CaseSpec::lookup(self.variant, &self.case)?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_toml().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn parse_config(text: &str, origin: &Path) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::ConfigParse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, path)
}
