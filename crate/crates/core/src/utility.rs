//! The six utility components per robot and the weighted utilities built from them.
//!
//! Components, with `r` the offset of robot `i` from its target and `v` its velocity:
//!
//! 1. heading cosine between `r` and `v`
//! 2. deviation of `|v|` from a distance-dependent cruise speed
//! 3. broad proximity-to-target bump
//! 4. "arrived and stopped" indicator
//! 5. wall proximity penalty
//! 6. nearest-robot proximity penalty

use nalgebra::SVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{pairwise_distances, wall_distance, SystemState, Workspace};
use crate::{Error, Result, COMPONENTS, NUM_ROBOTS};

/// Below this norm the heading cosine is reported as 0.
pub const HEADING_EPS: f64 = 1e-9;

pub type UtilityVec = SVector<f64, 18>;

/// Target positions, one per robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Targets(pub [[f64; 2]; NUM_ROBOTS]);

impl Targets {
    pub fn validate(&self, ws: &Workspace) -> Result<()> {
        for (i, t) in self.0.iter().enumerate() {
            if !t.iter().all(|v| v.is_finite()) || !ws.holds(*t) {
                return Err(Error::config(
                    format!("targets[{i}]"),
                    "target must lie strictly inside the wall",
                ));
            }
        }
        Ok(())
    }

    /// Offset of robot `i` from its target.
    pub fn offset(&self, x: &SystemState, i: usize) -> [f64; 2] {
        let p = x.position(i);
        [p[0] - self.0[i][0], p[1] - self.0[i][1]]
    }
}

/// Robot-major stack of the 18 utility components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UtilityVector(pub UtilityVec);

impl UtilityVector {
    pub fn get(&self, robot: usize, component: usize) -> f64 {
        self.0[COMPONENTS * robot + component]
    }

    /// Robot `i`'s own six components.
    pub fn robot_block(&self, i: usize) -> [f64; COMPONENTS] {
        std::array::from_fn(|j| self.get(i, j))
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityWeights {
    /// Per-robot component weights of the scalar utilities.
    #[serde(default = "default_omega")]
    pub omega: [[f64; COMPONENTS]; NUM_ROBOTS],
    /// Controller objective weights over the predicted 18-vector.
    pub control: [f64; COMPONENTS * NUM_ROBOTS],
}

pub fn default_omega() -> [[f64; COMPONENTS]; NUM_ROBOTS] {
    [[1.0, -1.0, 1.0, 1.0, -1.0, -1.0]; NUM_ROBOTS]
}

impl UtilityWeights {
    /// Robot `i`'s slice of the controller weights.
    pub fn control_block(&self, i: usize) -> [f64; COMPONENTS] {
        std::array::from_fn(|j| self.control[COMPONENTS * i + j])
    }

    pub fn control_vector(&self) -> UtilityVec {
        UtilityVec::from_column_slice(&self.control)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::config("weights.omega", "must be finite"));
        }
        if !self.control.iter().all(|v| v.is_finite()) {
            return Err(Error::config("weights.control", "must be finite"));
        }
        Ok(())
    }
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Cruise speed toward a target at distance `dist`.
pub fn cruise_speed(dist: f64) -> f64 {
    4.0 / (1.0 + (-10.0 * (dist - 0.2)).exp())
}

pub fn phi1(x: &SystemState, i: usize, targets: &Targets) -> f64 {
    let r = targets.offset(x, i);
    let v = x.velocity(i);
    let (nr, nv) = (norm(r), norm(v));
    if nr < HEADING_EPS || nv < HEADING_EPS {
        return 0.0;
    }
    (r[0] * v[0] + r[1] * v[1]) / (nr * nv)
}

pub fn phi2(x: &SystemState, i: usize, targets: &Targets) -> f64 {
    let cruise = cruise_speed(norm(targets.offset(x, i)));
    let dev = (norm(x.velocity(i)) - cruise) / (0.8 * cruise);
    1.0 - (-dev * dev).exp()
}

pub fn phi3(x: &SystemState, i: usize, targets: &Targets) -> f64 {
    let d = norm(targets.offset(x, i));
    (-(d / 4.0).powi(2)).exp() * (-(d / 6.0).powi(2)).exp()
}

pub fn phi4(x: &SystemState, i: usize, targets: &Targets) -> f64 {
    let d = norm(targets.offset(x, i));
    let s = norm(x.velocity(i));
    (-(d / 0.05).powi(2)).exp() * (-(s / 0.05).powi(2)).exp()
}

pub fn phi5(x: &SystemState, i: usize, ws: &Workspace) -> f64 {
    wall_penalty(wall_distance(x.position(i), ws))
}

pub fn phi6(x: &SystemState, i: usize, ws: &Workspace) -> f64 {
    robot_penalty(pairwise_distances(x, ws).robot[i])
}

/// `ln(1 + 6 e^{-40 d})`.
pub fn wall_penalty(d: f64) -> f64 {
    (6.0 * (-40.0 * d).exp()).ln_1p()
}

/// `ln(1 + 10 e^{-20 d})`.
pub fn robot_penalty(d: f64) -> f64 {
    (10.0 * (-20.0 * d).exp()).ln_1p()
}

pub fn utility_vector(x: &SystemState, targets: &Targets, ws: &Workspace) -> UtilityVector {
    let dist = pairwise_distances(x, ws);
    let mut z = UtilityVec::zeros();
    for i in 0..NUM_ROBOTS {
        let base = COMPONENTS * i;
        z[base] = phi1(x, i, targets);
        z[base + 1] = phi2(x, i, targets);
        z[base + 2] = phi3(x, i, targets);
        z[base + 3] = phi4(x, i, targets);
        z[base + 4] = wall_penalty(dist.wall[i]);
        z[base + 5] = robot_penalty(dist.robot[i]);
    }
    UtilityVector(z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarUtilities {
    pub per_robot: [f64; NUM_ROBOTS],
    pub total: f64,
}

pub fn scalar_utility(z: &UtilityVector, weights: &UtilityWeights) -> ScalarUtilities {
    let per_robot: [f64; NUM_ROBOTS] = std::array::from_fn(|i| {
        (0..COMPONENTS)
            .map(|j| weights.omega[i][j] * z.get(i, j))
            .sum()
    });
    ScalarUtilities {
        per_robot,
        total: per_robot.iter().sum(),
    }
}
