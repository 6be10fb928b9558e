//! Double-integrator kinematics for three disk robots inside a circular wall.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, NUM_ROBOTS};

pub type StateVector = SVector<f64, 12>;
pub type InputVector = SVector<f64, 6>;

/// How the robot-robot surface distance subtracts radii.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceConvention {
    /// `|r_i - r_j| - 2 R_r`: gap between two disks.
    #[default]
    BothRadii,
    /// `|r_i - r_j| - R_r`.
    SingleRadius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub wall_radius: f64,
    pub robot_radius: f64,
    pub center: [f64; 2],
    /// Sampling period in seconds.
    pub dt: f64,
    #[serde(default)]
    pub distance_convention: DistanceConvention,
}

impl Default for Workspace {
    fn default() -> Self {
        Workspace {
            wall_radius: 11.0,
            robot_radius: 2.0,
            center: [0.0, 0.0],
            dt: 0.05,
            distance_convention: DistanceConvention::BothRadii,
        }
    }
}

impl Workspace {
    pub fn new(wall_radius: f64, robot_radius: f64, center: [f64; 2], dt: f64) -> Result<Self> {
        let ws = Workspace {
            wall_radius,
            robot_radius,
            center,
            dt,
            distance_convention: DistanceConvention::BothRadii,
        };
        ws.validate()?;
        Ok(ws)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.robot_radius > 0.0 && self.robot_radius.is_finite()) {
            return Err(Error::config("workspace.robot_radius", "must be positive"));
        }
        if !(self.wall_radius > self.robot_radius && self.wall_radius.is_finite()) {
            return Err(Error::config(
                "workspace.wall_radius",
                "must exceed the robot radius",
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", "sampling period must be positive"));
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::config("workspace.center", "must be finite"));
        }
        Ok(())
    }

    /// Whether a point can host a robot without touching the wall.
    pub fn holds(&self, p: [f64; 2]) -> bool {
        let d = (p[0] - self.center[0]).hypot(p[1] - self.center[1]);
        d < self.wall_radius - self.robot_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobotState {
    pub r: [f64; 2],
    pub v: [f64; 2],
}

/// Stacked state `[x1, y1, x2, y2, x3, y3, vx1, vy1, vx2, vy2, vx3, vy3]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SystemState(pub StateVector);

impl SystemState {
    pub fn zeros() -> Self {
        SystemState(StateVector::zeros())
    }

    pub fn from_slice(values: &[f64; 12]) -> Self {
        SystemState(StateVector::from_column_slice(values))
    }

    /// Robots at `positions` with zero velocity.
    pub fn at_rest(positions: &[[f64; 2]; NUM_ROBOTS]) -> Self {
        let mut x = StateVector::zeros();
        for (i, p) in positions.iter().enumerate() {
            x[2 * i] = p[0];
            x[2 * i + 1] = p[1];
        }
        SystemState(x)
    }

    pub fn from_robots(robots: &[RobotState; NUM_ROBOTS]) -> Self {
        let mut x = StateVector::zeros();
        for (i, rs) in robots.iter().enumerate() {
            x[2 * i] = rs.r[0];
            x[2 * i + 1] = rs.r[1];
            x[6 + 2 * i] = rs.v[0];
            x[6 + 2 * i + 1] = rs.v[1];
        }
        SystemState(x)
    }

    pub fn robots(&self) -> [RobotState; NUM_ROBOTS] {
        std::array::from_fn(|i| self.robot(i))
    }

    pub fn robot(&self, i: usize) -> RobotState {
        RobotState {
            r: self.position(i),
            v: self.velocity(i),
        }
    }

    pub fn position(&self, i: usize) -> [f64; 2] {
        [self.0[2 * i], self.0[2 * i + 1]]
    }

    pub fn velocity(&self, i: usize) -> [f64; 2] {
        [self.0[6 + 2 * i], self.0[6 + 2 * i + 1]]
    }

    /// Robot `i`'s own `[x, y, vx, vy]`.
    pub fn robot_block(&self, i: usize) -> [f64; 4] {
        let [x, y] = self.position(i);
        let [vx, vy] = self.velocity(i);
        [x, y, vx, vy]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// Accelerations `[ax1, ay1, ax2, ay2, ax3, ay3]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput(pub InputVector);

impl ControlInput {
    pub fn zeros() -> Self {
        ControlInput(InputVector::zeros())
    }

    pub fn from_slice(values: &[f64; 6]) -> Self {
        ControlInput(InputVector::from_column_slice(values))
    }

    pub fn robot(&self, i: usize) -> [f64; 2] {
        [self.0[2 * i], self.0[2 * i + 1]]
    }

    pub fn set_robot(&mut self, i: usize, a: [f64; 2]) {
        self.0[2 * i] = a[0];
        self.0[2 * i + 1] = a[1];
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// `A = [[I, dt I], [0, I]]`, `B = [[dt^2/2 I], [dt I]]` in the stacked ordering.
pub fn build_system_matrices(ws: &Workspace) -> (SMatrix<f64, 12, 12>, SMatrix<f64, 12, 6>) {
    let dt = ws.dt;
    let mut a = SMatrix::<f64, 12, 12>::identity();
    let mut b = SMatrix::<f64, 12, 6>::zeros();
    for k in 0..6 {
        a[(k, 6 + k)] = dt;
        b[(k, k)] = 0.5 * dt * dt;
        b[(6 + k, k)] = dt;
    }
    (a, b)
}

pub fn step(x: &SystemState, u: &ControlInput, ws: &Workspace) -> SystemState {
    let (a, b) = build_system_matrices(ws);
    SystemState(a * x.0 + b * u.0)
}

/// Surface distances; a value `<= 0` is a collision.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurfaceDistances {
    /// Per robot, the smallest gap to any other robot.
    pub robot: [f64; NUM_ROBOTS],
    /// Per robot, the gap to the wall.
    pub wall: [f64; NUM_ROBOTS],
}

impl SurfaceDistances {
    pub fn min(&self) -> f64 {
        self.robot
            .iter()
            .chain(self.wall.iter())
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn collision(&self) -> bool {
        self.min() <= 0.0
    }

    /// `[robot_1, robot_2, robot_3, wall_1, wall_2, wall_3]`.
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.robot[0],
            self.robot[1],
            self.robot[2],
            self.wall[0],
            self.wall[1],
            self.wall[2],
        ]
    }
}

pub fn wall_distance(p: [f64; 2], ws: &Workspace) -> f64 {
    ws.wall_radius - (p[0] - ws.center[0]).hypot(p[1] - ws.center[1]) - ws.robot_radius
}

pub fn pair_distance(a: [f64; 2], b: [f64; 2], ws: &Workspace) -> f64 {
    let center = (a[0] - b[0]).hypot(a[1] - b[1]);
    match ws.distance_convention {
        DistanceConvention::BothRadii => center - 2.0 * ws.robot_radius,
        DistanceConvention::SingleRadius => center - ws.robot_radius,
    }
}

pub fn pairwise_distances(x: &SystemState, ws: &Workspace) -> SurfaceDistances {
    let mut out = SurfaceDistances::default();
    for i in 0..NUM_ROBOTS {
        let pi = x.position(i);
        out.wall[i] = wall_distance(pi, ws);
        out.robot[i] = (0..NUM_ROBOTS)
            .filter(|&j| j != i)
            .map(|j| pair_distance(pi, x.position(j), ws))
            .fold(f64::INFINITY, f64::min);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ws(dt: f64) -> Workspace {
        Workspace {
            dt,
            ..Workspace::default()
        }
    }

    #[test]
    fn system_matrix_entries() {
        let (a, b) = build_system_matrices(&ws(0.05));
        assert_eq!(a[(0, 6)], 0.05);
        assert!((b[(0, 0)] - 0.00125).abs() < 1e-18);
        assert_eq!(b[(6, 0)], 0.05);
        assert_eq!(a[(6, 0)], 0.0);

        let (_, b) = build_system_matrices(&ws(1.0));
        for r in 0..6 {
            for c in 0..6 {
                assert_eq!(b[(r, c)], if r == c { 0.5 } else { 0.0 });
            }
        }
    }

    #[test]
    fn velocity_feeds_position() {
        let mut x = SystemState::zeros();
        x.0[6] = 1.0;
        let next = step(&x, &ControlInput::zeros(), &ws(0.05));
        assert_eq!(next.0[0], 0.05);
        assert_eq!(next.0[6], 1.0);
    }

    #[test]
    fn zero_in_zero_out() {
        let next = step(&SystemState::zeros(), &ControlInput::zeros(), &ws(0.05));
        assert_eq!(next, SystemState::zeros());
    }

    #[test]
    fn robots_round_trip() {
        let x = SystemState::from_slice(&[1., 2., 3., 4., 5., 6., 7., 8., 9., 10., 11., 12.]);
        assert_eq!(SystemState::from_robots(&x.robots()), x);
        assert_eq!(x.robot(1).r, [3., 4.]);
        assert_eq!(x.robot(1).v, [9., 10.]);
        assert_eq!(x.robot_block(2), [5., 6., 11., 12.]);
    }

    #[test]
    fn center_robot_wall_gap() {
        let x = SystemState::at_rest(&[[0.0, 0.0], [100.0, 0.0], [-100.0, 0.0]]);
        let d = pairwise_distances(&x, &Workspace::default());
        assert_eq!(d.wall[0], 9.0);
    }

    #[test]
    fn touching_disks() {
        let x = SystemState::at_rest(&[[0.0, 0.0], [4.0, 0.0], [0.0, 50.0]]);
        let d = pairwise_distances(&x, &Workspace::default());
        assert_eq!(d.robot[0], 0.0);
        assert_eq!(d.robot[1], 0.0);
        assert!(d.collision());

        let single = Workspace {
            distance_convention: DistanceConvention::SingleRadius,
            ..Workspace::default()
        };
        assert_eq!(pairwise_distances(&x, &single).robot[0], 2.0);
    }

    #[test]
    fn identification_start_is_collision_free() {
        let x = SystemState::at_rest(&[[-7.0, 3.0], [0.0, 7.0], [7.0, -4.0]]);
        let d = pairwise_distances(&x, &Workspace::default());
        assert!(d.to_array().iter().all(|&v| v > 0.0), "{d:?}");
    }

    #[test]
    fn workspace_validation() {
        assert!(Workspace::new(11.0, 2.0, [0.0, 0.0], 0.05).is_ok());
        assert!(Workspace::new(1.0, 2.0, [0.0, 0.0], 0.05).is_err());
        assert!(Workspace::new(11.0, 2.0, [0.0, 0.0], -1.0).is_err());
        assert!(Workspace::new(11.0, 0.0, [0.0, 0.0], 0.05).is_err());
    }
}
