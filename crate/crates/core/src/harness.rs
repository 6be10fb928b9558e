//! Identification and feedback-control phases, case tables and run metrics.
//!
//! Phase I drives the robots with fixed sinusoidal accelerations and updates
//! the estimator every step. Phase II moves the robots to a case's start
//! positions (at rest), swaps in the case targets and picks each input by
//! maximizing the model's predicted weighted utility; estimation continues.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::control::{
    decentralized_control, linearize_objective_bilinear, linearize_objective_linear, solve_box_lp,
    BoxBounds,
};
use crate::dynamics::{pairwise_distances, step, ControlInput, SystemState, Workspace};
use crate::estimation::{ErrorRecord, EstimatorState, GradientGain};
use crate::koopman::{
    regressor_bilinear, regressor_decentralized, regressor_linear, KoopmanVector, ReferencePoint,
    Regressor, RegressorLayout,
};
use crate::utility::{Targets, UtilityWeights};
use crate::{Error, Result, NUM_ROBOTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Linear,
    Bilinear,
    #[serde(alias = "decentralized")]
    DecentralizedBilinear,
}

impl Variant {
    pub fn layout(self) -> RegressorLayout {
        match self {
            Variant::Linear => RegressorLayout::Linear,
            Variant::Bilinear => RegressorLayout::Bilinear,
            Variant::DecentralizedBilinear => RegressorLayout::Decentralized,
        }
    }

    /// Gain-reset period used when the config does not set one.
    pub fn default_reset_interval(self) -> u64 {
        match self {
            Variant::Linear => 130,
            Variant::Bilinear | Variant::DecentralizedBilinear => 75,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Linear => "linear",
            Variant::Bilinear => "bilinear",
            Variant::DecentralizedBilinear => "decentralized-bilinear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    #[default]
    Rls,
    Gradient,
}

/// Which robot's `[x, y, vx, vy]` enters robot `i`'s decentralized regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NaturalSource {
    #[default]
    Own,
    /// Robot `(i + 1) mod 3`.
    Neighbor,
}

impl NaturalSource {
    fn robot(self, i: usize) -> usize {
        match self {
            NaturalSource::Own => i,
            NaturalSource::Neighbor => (i + 1) % NUM_ROBOTS,
        }
    }
}

/// Sinusoidal probing accelerations. Step `k` (0-based) uses iteration
/// index `n = k + start_index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbingSchedule {
    pub start_index: u64,
}

impl Default for ProbingSchedule {
    fn default() -> Self {
        ProbingSchedule { start_index: 1 }
    }
}

impl ProbingSchedule {
    pub fn input(&self, k: u64) -> ControlInput {
        use std::f64::consts::PI;
        let n = (k + self.start_index) as f64;
        ControlInput::from_slice(&[
            2.0 * (0.075 * n * PI).sin(),
            3.0 * (0.1833 * n * PI).cos(),
            3.0 * (0.14 * n * PI).sin(),
            3.0 * (0.095 * n * PI).cos(),
            -2.0 * (0.06 * n * PI).sin(),
            -3.0 * (0.092 * n * PI).cos(),
        ])
    }
}

/// Phase-I start (at rest) and targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentificationSetup {
    pub start: [[f64; 2]; NUM_ROBOTS],
    pub targets: Targets,
}

impl IdentificationSetup {
    pub fn for_variant(variant: Variant) -> Self {
        match variant {
            Variant::Linear | Variant::Bilinear => IdentificationSetup {
                start: [[-7.0, 3.0], [0.0, 7.0], [7.0, -4.0]],
                targets: Targets([[-4.5, 0.0], [3.0, 4.0], [3.0, -4.0]]),
            },
            Variant::DecentralizedBilinear => IdentificationSetup {
                start: [[-8.5, -1.0], [0.0, 8.5], [8.5, 0.0]],
                targets: Targets([[-6.5, 0.0], [0.0, 6.5], [6.5, 0.0]]),
            },
        }
    }
}

/// Phase-II start positions and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSpec {
    pub id: String,
    pub start: [[f64; 2]; NUM_ROBOTS],
    pub targets: Targets,
}

const CENTRALIZED_CASES: [(&str, [[f64; 2]; 3], [[f64; 2]; 3]); 5] = [
    (
        "I",
        [[-4.48, 3.3], [2.98, 7.11], [3.65, -5.70]],
        [[-4.5, 0.0], [3.0, 4.0], [3.0, -4.0]],
    ),
    (
        "II",
        [[-3.1, 3.3], [4.9, 4.6], [0.9, -5.0]],
        [[-3.0, 0.5], [5.0, 2.0], [0.5, -3.5]],
    ),
    (
        "III",
        [[7.5, 2.5], [-5.1, -2.5], [-5.2, 3.5]],
        [[7.5, 0.0], [-5.0, -5.0], [-5.0, 5.0]],
    ),
    (
        "IV",
        [[-3.1, -0.6], [0.0, 2.5], [4.8, 3.0]],
        [[-3.5, -3.5], [0.2, 0.0], [5.3, 5.0]],
    ),
    (
        "V",
        [[-6.4, 5.3], [-2.5, 1.8], [3.0, -2.7]],
        [[-6.0, 2.4], [-2.5, -1.4], [2.5, -1.4]],
    ),
];

const DECENTRALIZED_CASES: [(&str, [[f64; 2]; 3], [[f64; 2]; 3]); 2] = [
    (
        "I",
        [[-2.5, 7.1], [2.7, 3.3], [-0.8, -3.5]],
        [[-3.5, 5.0], [3.5, 5.0], [0.0, -5.5]],
    ),
    (
        "II",
        [[-6.5, -2.9], [1.7, 2.3], [2.4, -5.2]],
        [[-4.5, 0.0], [3.0, 4.0], [3.0, -4.0]],
    ),
];

impl CaseSpec {
    /// Case ids valid for a variant.
    pub fn ids(variant: Variant) -> Vec<&'static str> {
        Self::table(variant).iter().map(|c| c.0).collect()
    }

    fn table(variant: Variant) -> &'static [(&'static str, [[f64; 2]; 3], [[f64; 2]; 3])] {
        match variant {
            Variant::DecentralizedBilinear => &DECENTRALIZED_CASES,
            _ => &CENTRALIZED_CASES,
        }
    }

    /// Looks up a case by roman numeral or 1-based number.
    pub fn lookup(variant: Variant, id: &str) -> Result<Self> {
        let table = Self::table(variant);
        let wanted = id.trim().to_ascii_uppercase();
        let hit = table
            .iter()
            .enumerate()
            .find(|(n, c)| c.0 == wanted || wanted.parse::<usize>().ok() == Some(n + 1));
        match hit {
            Some((_, (name, start, targets))) => Ok(CaseSpec {
                id: name.to_string(),
                start: *start,
                targets: Targets(*targets),
            }),
            None => Err(Error::UnknownCase(format!("{id} ({})", variant.name()))),
        }
    }

    pub fn all(variant: Variant) -> Vec<Self> {
        Self::ids(variant)
            .into_iter()
            .map(|id| Self::lookup(variant, id).expect("table id"))
            .collect()
    }
}

/// The identified model together with the estimator that maintains it.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub variant: Variant,
    /// One estimator, or one per robot for the decentralized variant.
    pub estimators: Vec<EstimatorState>,
    pub gradient: Option<GradientGain>,
    pub natural_source: NaturalSource,
}

impl Surrogate {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let layout = cfg.variant.layout();
        let reset = cfg.reset_interval();
        let count = match cfg.variant {
            Variant::DecentralizedBilinear => NUM_ROBOTS,
            _ => 1,
        };
        let estimators = (0..count)
            .map(|_| {
                EstimatorState::new(layout.len(), layout.outputs(), cfg.rho, cfg.p0_scale, reset)
            })
            .collect::<Result<Vec<_>>>()?;
        let gradient = match cfg.estimator {
            EstimatorKind::Rls => None,
            EstimatorKind::Gradient => Some(GradientGain::scalar(cfg.gradient_gain)?),
        };
        Ok(Surrogate {
            variant: cfg.variant,
            estimators,
            gradient,
            natural_source: cfg.decentralized_natural,
        })
    }

    fn regressors(
        &self,
        z: &KoopmanVector,
        u: &ControlInput,
        reference: &ReferencePoint,
    ) -> Vec<Regressor> {
        match self.variant {
            Variant::Linear => vec![regressor_linear(z, u)],
            Variant::Bilinear => vec![regressor_bilinear(z, u, reference)],
            Variant::DecentralizedBilinear => (0..NUM_ROBOTS)
                .map(|i| {
                    regressor_decentralized(
                        i,
                        z.natural.robot_block(self.natural_source.robot(i)),
                        z.utility.robot_block(i),
                        u.robot(i),
                        reference,
                    )
                })
                .collect(),
        }
    }

    /// Updates with the transition `z --u--> z_next` and returns the stacked
    /// 18-dimensional residuals.
    pub fn update(
        &mut self,
        z: &KoopmanVector,
        u: &ControlInput,
        z_next: &KoopmanVector,
        reference: &ReferencePoint,
    ) -> Result<ErrorRecord> {
        let zetas = self.regressors(z, u, reference);
        let y = z_next.utility.0;
        let outputs = self.estimators[0].outputs();
        let mut prior = DVector::zeros(y.len());
        let mut posterior = DVector::zeros(y.len());
        for (n, (est, zeta)) in self.estimators.iter_mut().zip(&zetas).enumerate() {
            let yi =
                DVector::from_iterator(outputs, y.iter().skip(n * outputs).take(outputs).copied());
            let rec = match &self.gradient {
                None => est.rls_step(&zeta.values, &yi)?,
                Some(g) => est.gradient_step(&zeta.values, &yi, g)?,
            };
            prior.rows_mut(n * outputs, outputs).copy_from(&rec.prior);
            posterior
                .rows_mut(n * outputs, outputs)
                .copy_from(&rec.posterior);
        }
        Ok(ErrorRecord {
            prior_norm: prior.norm(),
            posterior_norm: posterior.norm(),
            prior,
            posterior,
        })
    }

    /// Input maximizing `w^T z2_hat(k+1)` inside the box.
    pub fn control(
        &self,
        z: &KoopmanVector,
        reference: &ReferencePoint,
        weights: &UtilityWeights,
        bounds: &BoxBounds,
    ) -> Result<ControlInput> {
        let mut u = ControlInput::zeros();
        match self.variant {
            Variant::Linear => {
                let p = linearize_objective_linear(&self.estimators[0].theta, z, &weights.control)?;
                u.0.copy_from_slice(&solve_box_lp(&p, bounds)?);
            }
            Variant::Bilinear => {
                let p = linearize_objective_bilinear(
                    &self.estimators[0].theta,
                    z,
                    reference,
                    &weights.control,
                )?;
                u.0.copy_from_slice(&solve_box_lp(&p, bounds)?);
            }
            Variant::DecentralizedBilinear => {
                for (i, est) in self.estimators.iter().enumerate() {
                    let ui = decentralized_control(
                        i,
                        &est.theta,
                        z.natural.robot_block(self.natural_source.robot(i)),
                        z.utility.robot_block(i),
                        reference,
                        &weights.control_block(i),
                        bounds,
                    )?;
                    u.set_robot(i, ui);
                }
            }
        }
        Ok(u)
    }

    pub fn thetas(&self) -> Vec<&DMatrix<f64>> {
        self.estimators.iter().map(|e| &e.theta).collect()
    }

    /// Frobenius norm over all estimators' parameters.
    pub fn theta_norm(&self) -> f64 {
        self.estimators
            .iter()
            .map(|e| e.theta.norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Identification,
    Control,
}

impl Phase {
    pub fn tag(self) -> &'static str {
        match self {
            Phase::Identification => "identification",
            Phase::Control => "control",
        }
    }
}

/// One simulated step `X(k) -> X(k+1)`; state, utilities and distances are
/// taken after the step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: u64,
    pub phase: Phase,
    pub state: [f64; 12],
    pub input: [f64; 6],
    pub z2: [f64; 18],
    /// Prediction of `z2` before the update.
    pub z2_hat: [f64; 18],
    pub eps: [f64; 18],
    pub eps_a: [f64; 18],
    pub eps_norm: f64,
    pub eps_a_norm: f64,
    /// Frobenius norm of the parameter estimate after the update.
    pub theta_norm: f64,
    /// `[robot_1, robot_2, robot_3, wall_1, wall_2, wall_3]`.
    pub distances: [f64; 6],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseInfo {
    pub phase: Phase,
    pub case: Option<String>,
    pub start: SystemState,
    pub targets: Targets,
    pub steps: usize,
    /// Control step (1-based) at which every robot was within tolerance.
    pub arrived_at: Option<usize>,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub records: Vec<StepRecord>,
    pub phases: Vec<PhaseInfo>,
    pub warnings: Vec<String>,
}

impl TrajectoryLog {
    pub fn phase_records(&self, phase: Phase) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(move |r| r.phase == phase)
    }

    pub fn extend(&mut self, other: TrajectoryLog) {
        self.records.extend(other.records);
        self.phases.extend(other.phases);
        self.warnings.extend(other.warnings);
    }
}

fn to_array<const N: usize>(v: &DVector<f64>) -> [f64; N] {
    std::array::from_fn(|i| v[i])
}

struct Stepper<'a> {
    ws: &'a Workspace,
    targets: Targets,
    reference: ReferencePoint,
    x: SystemState,
    z: KoopmanVector,
}

impl<'a> Stepper<'a> {
    fn new(ws: &'a Workspace, start: SystemState, targets: Targets) -> Self {
        Stepper {
            ws,
            targets,
            reference: ReferencePoint::at_targets(&targets, ws),
            x: start,
            z: KoopmanVector::lift(&start, &targets, ws),
        }
    }

    fn advance(
        &mut self,
        surrogate: &mut Surrogate,
        u: ControlInput,
        k: u64,
        phase: Phase,
    ) -> Result<StepRecord> {
        let x_next = step(&self.x, &u, self.ws);
        if !x_next.is_finite() {
            return Err(Error::NonFinite("state"));
        }
        let z_next = KoopmanVector::lift(&x_next, &self.targets, self.ws);
        let rec = surrogate.update(&self.z, &u, &z_next, &self.reference)?;
        let z2_hat = &rec.prior + z_next.utility.0;
        let record = StepRecord {
            k,
            phase,
            state: std::array::from_fn(|i| x_next.0[i]),
            input: std::array::from_fn(|i| u.0[i]),
            z2: std::array::from_fn(|i| z_next.utility.0[i]),
            z2_hat: std::array::from_fn(|i| z2_hat[i]),
            eps: to_array(&rec.prior),
            eps_a: to_array(&rec.posterior),
            eps_norm: rec.prior_norm,
            eps_a_norm: rec.posterior_norm,
            theta_norm: surrogate.theta_norm(),
            distances: pairwise_distances(&x_next, self.ws).to_array(),
        };
        self.x = x_next;
        self.z = z_next;
        Ok(record)
    }

    fn target_distances(&self) -> [f64; NUM_ROBOTS] {
        std::array::from_fn(|i| {
            let [dx, dy] = self.targets.offset(&self.x, i);
            dx.hypot(dy)
        })
    }
}

/// Phase I with the probing inputs.
pub fn run_identification(cfg: &RunConfig) -> Result<(Surrogate, TrajectoryLog)> {
    let mut surrogate = Surrogate::new(cfg)?;
    let log = identify_into(cfg, &mut surrogate)?;
    Ok((surrogate, log))
}

fn identify_into(cfg: &RunConfig, surrogate: &mut Surrogate) -> Result<TrajectoryLog> {
    let ws = cfg.workspace();
    let setup = cfg.identification_setup();
    let start = SystemState::at_rest(&setup.start);
    let schedule = ProbingSchedule {
        start_index: cfg.probe_start_index,
    };
    let mut stepper = Stepper::new(&ws, start, setup.targets);
    let mut log = TrajectoryLog::default();
    let began = Instant::now();
    for k in 0..cfg.identification_steps {
        let rec = stepper.advance(surrogate, schedule.input(k), k, Phase::Identification)?;
        if rec.distances.iter().any(|&d| d <= 0.0) {
            log.warnings.push(format!(
                "identification step {k}: surface distance {:.4} <= 0",
                rec.distances.iter().copied().fold(f64::INFINITY, f64::min)
            ));
        }
        log.records.push(rec);
    }
    log.phases.push(PhaseInfo {
        phase: Phase::Identification,
        case: None,
        start,
        targets: setup.targets,
        steps: cfg.identification_steps as usize,
        arrived_at: None,
        duration_s: began.elapsed().as_secs_f64(),
    });
    Ok(log)
}

/// Phase II for one case, continuing estimation on `surrogate`.
/// Step numbering continues from `first_k`.
pub fn run_control(
    cfg: &RunConfig,
    surrogate: &mut Surrogate,
    case: &CaseSpec,
    first_k: u64,
) -> Result<TrajectoryLog> {
    let ws = cfg.workspace();
    let weights = cfg.weights_for(surrogate.variant);
    let start = SystemState::at_rest(&case.start);
    let mut stepper = Stepper::new(&ws, start, case.targets);
    let mut log = TrajectoryLog::default();
    let mut arrived_at = None;
    let began = Instant::now();
    for n in 0..cfg.control_steps {
        let u = surrogate.control(&stepper.z, &stepper.reference, weights, &cfg.bounds)?;
        let rec = stepper.advance(surrogate, u, first_k + n, Phase::Control)?;
        log.records.push(rec);
        if stepper
            .target_distances()
            .iter()
            .all(|&d| d <= cfg.arrival_tolerance)
        {
            arrived_at = Some(n as usize + 1);
            if cfg.stop_on_arrival {
                break;
            }
        } else if !cfg.stop_on_arrival {
            arrived_at = None;
        }
    }
    log.phases.push(PhaseInfo {
        phase: Phase::Control,
        case: Some(case.id.clone()),
        start,
        targets: case.targets,
        steps: log.records.len(),
        arrived_at,
        duration_s: began.elapsed().as_secs_f64(),
    });
    Ok(log)
}

/// Phase I followed by Phase II for one case.
pub fn run_case(cfg: &RunConfig, case: &CaseSpec) -> Result<(Surrogate, TrajectoryLog)> {
    let (mut surrogate, mut log) = run_identification(cfg)?;
    let control = run_control(cfg, &mut surrogate, case, cfg.identification_steps)?;
    log.extend(control);
    Ok((surrogate, log))
}

/// Error statistics over one gain-reset window `[start, end)` of Phase I.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub start: u64,
    pub end: u64,
    pub max: f64,
    pub mean: f64,
    /// Max over the first `edge` steps of the window.
    pub head_max: f64,
    /// Max over the last `edge` steps of the window.
    pub tail_max: f64,
}

impl WindowStats {
    pub fn growth(&self) -> f64 {
        self.tail_max / self.head_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationMetrics {
    pub steps: usize,
    pub max_eps_a: f64,
    pub mean_eps_a: f64,
    pub trim: u64,
    /// Max over steps `k >= trim`; `None` when the run is shorter.
    pub max_eps_a_trimmed: Option<f64>,
    pub windows: Vec<WindowStats>,
    pub min_surface_distance: f64,
    pub collisions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlMetrics {
    pub case: Option<String>,
    pub steps: usize,
    pub arrived_at: Option<usize>,
    pub terminal_distances: [f64; NUM_ROBOTS],
    pub max_terminal_distance: f64,
    pub min_surface_distance: f64,
    pub collision_free: bool,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub identification: Option<IdentificationMetrics>,
    pub control: Vec<ControlMetrics>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    /// Window length; `None` treats Phase I as one window.
    pub reset_interval: Option<u64>,
    pub trim: u64,
    /// Steps at each window edge used for the growth levels.
    pub edge: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            reset_interval: None,
            trim: 30,
            edge: 10,
        }
    }
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(f64::NEG_INFINITY, f64::max)
}

pub fn compute_metrics(log: &TrajectoryLog, opts: &MetricOptions) -> Summary {
    let mut summary = Summary {
        warnings: log.warnings.clone(),
        ..Summary::default()
    };
    let ident: Vec<&StepRecord> = log.phase_records(Phase::Identification).collect();
    if !ident.is_empty() {
        let first = ident[0].k;
        let eps: Vec<f64> = ident.iter().map(|r| r.eps_a_norm).collect();
        let period = opts.reset_interval.unwrap_or(ident.len() as u64).max(1) as usize;
        let windows = eps
            .chunks(period)
            .enumerate()
            .map(|(w, chunk)| {
                let edge = opts.edge.min(chunk.len()).max(1);
                WindowStats {
                    start: first + (w * period) as u64,
                    end: first + (w * period + chunk.len()) as u64,
                    max: max_of(chunk.iter().copied()),
                    mean: chunk.iter().sum::<f64>() / chunk.len() as f64,
                    head_max: max_of(chunk[..edge].iter().copied()),
                    tail_max: max_of(chunk[chunk.len() - edge..].iter().copied()),
                }
            })
            .collect();
        let min_surface = ident
            .iter()
            .flat_map(|r| r.distances.iter().copied())
            .fold(f64::INFINITY, f64::min);
        summary.identification = Some(IdentificationMetrics {
            steps: ident.len(),
            max_eps_a: max_of(eps.iter().copied()),
            mean_eps_a: eps.iter().sum::<f64>() / eps.len() as f64,
            trim: opts.trim,
            max_eps_a_trimmed: ident
                .iter()
                .filter(|r| r.k - first >= opts.trim)
                .map(|r| r.eps_a_norm)
                .reduce(f64::max),
            windows,
            min_surface_distance: min_surface,
            collisions: ident
                .iter()
                .filter(|r| r.distances.iter().any(|&d| d <= 0.0))
                .count(),
        });
    }

    // control records are consumed phase by phase, in order
    let mut control = log.phase_records(Phase::Control);
    for info in log.phases.iter().filter(|p| p.phase == Phase::Control) {
        let recs: Vec<&StepRecord> = control.by_ref().take(info.steps).collect();
        let last = recs
            .last()
            .map(|r| SystemState::from_slice(&r.state))
            .unwrap_or(info.start);
        let terminal: [f64; NUM_ROBOTS] = std::array::from_fn(|i| {
            let [dx, dy] = info.targets.offset(&last, i);
            dx.hypot(dy)
        });
        let min_surface = recs
            .iter()
            .flat_map(|r| r.distances.iter().copied())
            .fold(f64::INFINITY, f64::min);
        summary.control.push(ControlMetrics {
            case: info.case.clone(),
            steps: recs.len(),
            arrived_at: info.arrived_at,
            terminal_distances: terminal,
            max_terminal_distance: max_of(terminal.iter().copied()),
            min_surface_distance: min_surface,
            collision_free: min_surface > 0.0,
            duration_s: info.duration_s,
        });
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probing_amplitudes_and_first_value() {
        let s = ProbingSchedule::default();
        let u = s.input(0);
        let pi = std::f64::consts::PI;
        assert_eq!(u.0[0], 2.0 * (0.075 * pi).sin());
        assert_eq!(u.0[5], -3.0 * (0.092 * pi).cos());
        for k in 0..1000 {
            let u = s.input(k);
            assert!(u.0[0].abs() <= 2.0 && u.0[4].abs() <= 2.0);
            assert!(u.0.iter().all(|v| v.abs() <= 3.0));
        }
        let zero_based = ProbingSchedule { start_index: 0 };
        assert_eq!(zero_based.input(1), s.input(0));
    }

    #[test]
    fn case_lookup() {
        let c = CaseSpec::lookup(Variant::Bilinear, "iii").unwrap();
        assert_eq!(c.start[0], [7.5, 2.5]);
        assert_eq!(CaseSpec::lookup(Variant::Linear, "3").unwrap(), c);
        assert_eq!(CaseSpec::all(Variant::Bilinear).len(), 5);
        assert_eq!(CaseSpec::all(Variant::DecentralizedBilinear).len(), 2);
        assert!(CaseSpec::lookup(Variant::DecentralizedBilinear, "III").is_err());
        let ws = Workspace::default();
        for v in [Variant::Bilinear, Variant::DecentralizedBilinear] {
            for c in CaseSpec::all(v) {
                c.targets.validate(&ws).unwrap();
                assert!(c.start.iter().all(|&p| ws.holds(p)));
            }
        }
    }

    fn record(k: u64, phase: Phase, eps_a: f64, dist: f64) -> StepRecord {
        StepRecord {
            k,
            phase,
            state: [0.0; 12],
            input: [0.0; 6],
            z2: [0.0; 18],
            z2_hat: [0.0; 18],
            eps: [0.0; 18],
            eps_a: [0.0; 18],
            eps_norm: 0.0,
            eps_a_norm: eps_a,
            theta_norm: 0.0,
            distances: [dist; 6],
        }
    }

    #[test]
    fn empty_log_gives_empty_summary() {
        let s = compute_metrics(&TrajectoryLog::default(), &MetricOptions::default());
        assert_eq!(s, Summary::default());
    }

    #[test]
    fn synthetic_window_aggregation() {
        let mut log = TrajectoryLog::default();
        // two windows of 4: [1,2,3,4], [10,20,30,40]
        for (k, v) in [1.0, 2.0, 3.0, 4.0, 10.0, 20.0, 30.0, 40.0]
            .iter()
            .enumerate()
        {
            log.records
                .push(record(k as u64, Phase::Identification, *v, 1.0 + k as f64));
        }
        let opts = MetricOptions {
            reset_interval: Some(4),
            trim: 5,
            edge: 2,
        };
        let s = compute_metrics(&log, &opts);
        let id = s.identification.unwrap();
        assert_eq!(id.steps, 8);
        assert_eq!(id.max_eps_a, 40.0);
        assert_eq!(id.max_eps_a_trimmed, Some(40.0));
        assert_eq!(id.mean_eps_a, 110.0 / 8.0);
        assert_eq!(id.min_surface_distance, 1.0);
        assert_eq!(id.windows.len(), 2);
        assert_eq!(id.windows[0].mean, 2.5);
        assert_eq!(id.windows[0].head_max, 2.0);
        assert_eq!(id.windows[0].tail_max, 4.0);
        assert_eq!(id.windows[1].growth(), 2.0);
        assert_eq!((id.windows[1].start, id.windows[1].end), (4, 8));
        assert!(s.control.is_empty());
    }

    #[test]
    fn control_aggregation_uses_last_state() {
        let mut log = TrajectoryLog::default();
        let targets = Targets([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]]);
        let mut last = record(0, Phase::Control, 0.0, 0.5);
        last.state[0] = 3.0;
        last.state[1] = 4.0;
        last.state[2] = 5.0;
        last.state[5] = 5.0;
        log.records.push(record(0, Phase::Control, 0.0, 0.2));
        log.records.push(last);
        log.phases.push(PhaseInfo {
            phase: Phase::Control,
            case: Some("I".into()),
            start: SystemState::zeros(),
            targets,
            steps: 2,
            arrived_at: None,
            duration_s: 0.0,
        });
        let s = compute_metrics(&log, &MetricOptions::default());
        let c = &s.control[0];
        assert_eq!(c.terminal_distances, [5.0, 0.0, 0.0]);
        assert_eq!(c.max_terminal_distance, 5.0);
        assert_eq!(c.min_surface_distance, 0.2);
        assert!(c.collision_free);
    }
}
