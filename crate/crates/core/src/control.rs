//! One-step utility maximization over a box of accelerations.
//!
//! Every surrogate is affine in the input, so `w^T z2_hat(k+1) = offset + c^T U`
//! and the maximizer over a box is read off the signs of `c`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::ControlInput;
use crate::koopman::{
    regressor_bilinear, regressor_decentralized, regressor_linear, Block, KoopmanVector,
    ReferencePoint, Regressor, RegressorLayout,
};
use crate::{Error, Result, COMPONENTS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for BoxBounds {
    fn default() -> Self {
        BoxBounds {
            lower: -4.0,
            upper: 3.0,
        }
    }
}

impl BoxBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        let b = BoxBounds { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(Error::config(
                "bounds",
                format!(
                    "need finite lower < upper, got [{}, {}]",
                    self.lower, self.upper
                ),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.lower..=self.upper).contains(&v)
    }
}

/// Which model produced an objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveSource {
    /// `c = B2^T w` from the input rows of a linear model.
    Linear,
    /// Input rows plus the input-state product blocks of a bilinear model.
    Bilinear,
    Decentralized {
        robot: usize,
    },
}

/// `maximize offset + c^T U`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    pub coefficients: DVector<f64>,
    pub offset: f64,
    pub source: ObjectiveSource,
}

impl ControlProblem {
    pub fn value(&self, u: &[f64]) -> f64 {
        self.offset
            + self
                .coefficients
                .iter()
                .zip(u)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }
}

fn weighted_theta(
    theta: &DMatrix<f64>,
    w: &[f64],
    layout: RegressorLayout,
) -> Result<DVector<f64>> {
    if theta.nrows() != layout.len() {
        return Err(Error::DimensionMismatch {
            what: "parameter rows",
            expected: layout.len(),
            got: theta.nrows(),
        });
    }
    if theta.ncols() != w.len() {
        return Err(Error::DimensionMismatch {
            what: "objective weights",
            expected: theta.ncols(),
            got: w.len(),
        });
    }
    Ok(theta * DVector::from_column_slice(w))
}

/// Coefficients and offset of `w^T theta^T zeta(U)` from a regressor built at
/// `U = 0`, using the layout's product blocks.
fn affine_objective(theta_w: &DVector<f64>, zeta0: &Regressor) -> (DVector<f64>, f64) {
    let layout = zeta0.layout;
    let (n1, n2, m) = layout.dims();
    let input = layout.block(Block::Input);
    let mut c = DVector::from_iterator(m, theta_w.rows(input.start, m).iter().copied());
    if layout != RegressorLayout::Linear {
        let d1 = zeta0.block(Block::Natural);
        let d2 = zeta0.block(Block::Utility);
        let g4 = layout.block(Block::G4).start;
        let g5 = layout.block(Block::G5).start;
        for j in 0..m {
            let a: f64 = (0..n1).map(|l| theta_w[g4 + j * n1 + l] * d1[l]).sum();
            let b: f64 = (0..n2).map(|l| theta_w[g5 + j * n2 + l] * d2[l]).sum();
            c[j] += a + b;
        }
    }
    (c, theta_w.dot(&zeta0.values))
}

pub fn linearize_objective_linear(
    theta: &DMatrix<f64>,
    z: &KoopmanVector,
    w: &[f64],
) -> Result<ControlProblem> {
    let theta_w = weighted_theta(theta, w, RegressorLayout::Linear)?;
    let zeta0 = regressor_linear(z, &ControlInput::zeros());
    let (coefficients, offset) = affine_objective(&theta_w, &zeta0);
    Ok(ControlProblem {
        coefficients,
        offset,
        source: ObjectiveSource::Linear,
    })
}

pub fn linearize_objective_bilinear(
    theta: &DMatrix<f64>,
    z: &KoopmanVector,
    reference: &ReferencePoint,
    w: &[f64],
) -> Result<ControlProblem> {
    let theta_w = weighted_theta(theta, w, RegressorLayout::Bilinear)?;
    let zeta0 = regressor_bilinear(z, &ControlInput::zeros(), reference);
    let (coefficients, offset) = affine_objective(&theta_w, &zeta0);
    Ok(ControlProblem {
        coefficients,
        offset,
        source: ObjectiveSource::Bilinear,
    })
}

/// Per-robot objective; `natural` is the block fed to robot `i`'s regressor.
pub fn linearize_objective_decentralized(
    i: usize,
    theta: &DMatrix<f64>,
    natural: [f64; 4],
    utility: [f64; COMPONENTS],
    reference: &ReferencePoint,
    w: &[f64; COMPONENTS],
) -> Result<ControlProblem> {
    let theta_w = weighted_theta(theta, w, RegressorLayout::Decentralized)?;
    let zeta0 = regressor_decentralized(i, natural, utility, [0.0, 0.0], reference);
    let (coefficients, offset) = affine_objective(&theta_w, &zeta0);
    Ok(ControlProblem {
        coefficients,
        offset,
        source: ObjectiveSource::Decentralized { robot: i },
    })
}

/// Componentwise sign rule: upper bound for `c > 0`, lower for `c < 0`, 0 on ties.
pub fn solve_box_lp(problem: &ControlProblem, bounds: &BoxBounds) -> Result<Vec<f64>> {
    if !problem.coefficients.iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite("objective coefficients"));
    }
    Ok(problem
        .coefficients
        .iter()
        .map(|&c| {
            if c > 0.0 {
                bounds.upper
            } else if c < 0.0 {
                bounds.lower
            } else {
                0.0
            }
        })
        .collect())
}

/// Exhaustive search over the `2^n` box corners. Ties keep the first corner found.
pub fn best_corner(coefficients: &[f64], bounds: &BoxBounds) -> (Vec<f64>, f64) {
    let n = coefficients.len();
    assert!(n < 32, "corner enumeration over {n} inputs");
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for mask in 0u32..(1 << n) {
        let corner: Vec<f64> = (0..n)
            .map(|j| {
                if mask >> j & 1 == 1 {
                    bounds.upper
                } else {
                    bounds.lower
                }
            })
            .collect();
        let value: f64 = coefficients.iter().zip(&corner).map(|(c, v)| c * v).sum();
        if value > best.1 {
            best = (corner, value);
        }
    }
    best
}

pub fn decentralized_control(
    i: usize,
    theta: &DMatrix<f64>,
    natural: [f64; 4],
    utility: [f64; COMPONENTS],
    reference: &ReferencePoint,
    w: &[f64; COMPONENTS],
    bounds: &BoxBounds,
) -> Result<[f64; 2]> {
    let problem = linearize_objective_decentralized(i, theta, natural, utility, reference, w)?;
    let u = solve_box_lp(&problem, bounds)?;
    Ok([u[0], u[1]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{SystemState, Workspace};
    use crate::koopman::predict;
    use crate::utility::Targets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_lift(rng: &mut ChaCha8Rng, targets: &Targets, ws: &Workspace) -> KoopmanVector {
        let mut x = SystemState::at_rest(&targets.0);
        for k in 0..12 {
            x.0[k] += rng.random_range(-0.8..0.8);
        }
        KoopmanVector::lift(&x, targets, ws)
    }

    const TARGETS: Targets = Targets([[-4.5, 0.0], [3.0, 4.0], [3.0, -4.0]]);

    #[test]
    fn sign_rule() {
        let p = ControlProblem {
            coefficients: DVector::from_vec(vec![1.0, -1.0, 0.0, 2.0, -3.0, 0.0]),
            offset: 0.0,
            source: ObjectiveSource::Linear,
        };
        let u = solve_box_lp(&p, &BoxBounds::default()).unwrap();
        assert_eq!(u, vec![3.0, -4.0, 0.0, 3.0, -4.0, 0.0]);

        let zero = ControlProblem {
            coefficients: DVector::zeros(6),
            ..p.clone()
        };
        assert_eq!(
            solve_box_lp(&zero, &BoxBounds::default()).unwrap(),
            vec![0.0; 6]
        );

        let bad = ControlProblem {
            coefficients: DVector::from_vec(vec![f64::NAN, 0.0]),
            ..p
        };
        assert!(solve_box_lp(&bad, &BoxBounds::default()).is_err());
    }

    #[test]
    fn bounds_validation() {
        assert!(BoxBounds::new(-4.0, 3.0).is_ok());
        assert!(BoxBounds::new(3.0, 3.0).is_err());
        assert!(BoxBounds::new(f64::NAN, 3.0).is_err());
    }

    #[test]
    fn corner_oracle_agrees_with_sign_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = BoxBounds::default();
        for _ in 0..500 {
            let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = ControlProblem {
                coefficients: DVector::from_vec(c.clone()),
                offset: 0.0,
                source: ObjectiveSource::Linear,
            };
            let u = solve_box_lp(&p, &b).unwrap();
            let (_, best) = best_corner(&c, &b);
            assert!(p.value(&u) >= best);
        }
    }

    #[test]
    fn linear_objective_trivial_cases() {
        let ws = Workspace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = random_lift(&mut rng, &TARGETS, &ws);
        let theta = random_matrix(&mut rng, 36, 18);
        let p = linearize_objective_linear(&theta, &z, &[0.0; 18]).unwrap();
        assert!(p.coefficients.iter().all(|&c| c == 0.0));

        let mut theta = DMatrix::zeros(36, 18);
        theta[(32, 5)] = 1.5;
        let mut w = [0.0; 18];
        w[5] = 2.0;
        let p = linearize_objective_linear(&theta, &z, &w).unwrap();
        assert_eq!(p.coefficients[2], 3.0);
        assert_eq!(p.coefficients.iter().filter(|&&c| c != 0.0).count(), 1);
    }

    fn predict_then_dot(theta: &DMatrix<f64>, zeta: &Regressor, w: &[f64]) -> f64 {
        predict(theta, zeta)
            .unwrap()
            .iter()
            .zip(w)
            .map(|(a, b)| a * b)
            .sum()
    }

    #[test]
    fn affine_consistency_linear_and_bilinear() {
        let ws = Workspace::default();
        let reference = ReferencePoint::at_targets(&TARGETS, &ws);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = random_lift(&mut rng, &TARGETS, &ws);
        let w: Vec<f64> = (0..18).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lin = random_matrix(&mut rng, 36, 18);
        let bil = random_matrix(&mut rng, 901, 18);
        let pl = linearize_objective_linear(&lin, &z, &w).unwrap();
        let pb = linearize_objective_bilinear(&bil, &z, &reference, &w).unwrap();
        for _ in 0..10 {
            let u: [f64; 6] = std::array::from_fn(|_| rng.random_range(-4.0..3.0));
            let u = ControlInput::from_slice(&u);
            let oracle = predict_then_dot(&lin, &regressor_linear(&z, &u), &w);
            assert!((pl.value(u.as_slice()) - oracle).abs() < 1e-10);
            let oracle = predict_then_dot(&bil, &regressor_bilinear(&z, &u, &reference), &w);
            assert!((pb.value(u.as_slice()) - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn bilinear_reduces_to_input_rows() {
        let ws = Workspace::default();
        let reference = ReferencePoint::at_targets(&TARGETS, &ws);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w: Vec<f64> = (0..18).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut theta = random_matrix(&mut rng, 901, 18);
        let input = RegressorLayout::Bilinear.block(Block::Input);
        let b2 = theta.rows(input.start, 6).clone_owned();
        let expected = b2 * DVector::from_column_slice(&w);

        // at the reference every offset vanishes
        let z = KoopmanVector::lift(&reference.natural, &TARGETS, &ws);
        let p = linearize_objective_bilinear(&theta, &z, &reference, &w).unwrap();
        assert!((&p.coefficients - &expected).amax() < 1e-12);

        // away from it, zeroing the product blocks gives the same coefficients
        for blk in [Block::G4, Block::G5] {
            let r = RegressorLayout::Bilinear.block(blk);
            theta.rows_mut(r.start, r.len()).fill(0.0);
        }
        let z = random_lift(&mut rng, &TARGETS, &ws);
        let p = linearize_objective_bilinear(&theta, &z, &reference, &w).unwrap();
        assert!((&p.coefficients - &expected).amax() < 1e-12);
    }

    #[test]
    fn positive_weight_scaling_keeps_argmax() {
        let ws = Workspace::default();
        let reference = ReferencePoint::at_targets(&TARGETS, &ws);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let theta = random_matrix(&mut rng, 901, 18);
        let z = random_lift(&mut rng, &TARGETS, &ws);
        let w: Vec<f64> = (0..18).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u1 = solve_box_lp(
            &linearize_objective_bilinear(&theta, &z, &reference, &w).unwrap(),
            &BoxBounds::default(),
        )
        .unwrap();
        let w2: Vec<f64> = w.iter().map(|v| v * 37.5).collect();
        let u2 = solve_box_lp(
            &linearize_objective_bilinear(&theta, &z, &reference, &w2).unwrap(),
            &BoxBounds::default(),
        )
        .unwrap();
        assert_eq!(u1, u2);
    }

    #[test]
    fn decentralized_zero_model_and_sign_rule() {
        let ws = Workspace::default();
        let reference = ReferencePoint::at_targets(&TARGETS, &ws);
        let b = BoxBounds::default();
        let x = SystemState::at_rest(&[[-4.0, 1.0], [3.0, 3.0], [2.0, -4.0]]);
        let z = KoopmanVector::lift(&x, &TARGETS, &ws);
        for i in 0..3 {
            let n = z.natural.robot_block(i);
            let u = z.utility.robot_block(i);
            let zero = DMatrix::zeros(109, 6);
            let got = decentralized_control(i, &zero, n, u, &reference, &[1.0; 6], &b).unwrap();
            assert_eq!(got, [0.0, 0.0]);

            // input rows route input 0 to output 0 and input 1 to output 1 with sign -1
            let mut theta = DMatrix::zeros(109, 6);
            theta[(10, 0)] = 1.0;
            theta[(11, 1)] = -1.0;
            let got = decentralized_control(i, &theta, n, u, &reference, &[1.0; 6], &b).unwrap();
            assert_eq!(got, [3.0, -4.0]);
        }
    }

    #[test]
    fn stacked_decentralized_matches_block_diagonal_centralized() {
        // A centralized bilinear model whose input-dependent terms only couple
        // robot i's input with robot i's own natural/utility offsets.
        let ws = Workspace::default();
        let reference = ReferencePoint::at_targets(&TARGETS, &ws);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = random_lift(&mut rng, &TARGETS, &ws);
        let w: Vec<f64> = (0..18).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lay = RegressorLayout::Bilinear;
        let dl = RegressorLayout::Decentralized;
        let mut central = DMatrix::zeros(901, 18);
        let mut locals = Vec::new();
        for i in 0..3 {
            let mut local = DMatrix::zeros(109, 6);
            for o in 0..6 {
                let oc = 6 * i + o;
                for j in 0..2 {
                    let v = rng.random_range(-1.0..1.0);
                    local[(dl.block(Block::Input).start + j, o)] = v;
                    central[(lay.block(Block::Input).start + 2 * i + j, oc)] = v;
                    // natural block of robot i: positions 2i,2i+1 and velocities 6+2i,6+2i+1
                    let nat_idx = [2 * i, 2 * i + 1, 6 + 2 * i, 6 + 2 * i + 1];
                    for (l, &gl) in nat_idx.iter().enumerate() {
                        let v = rng.random_range(-1.0..1.0);
                        local[(dl.block(Block::G4).start + j * 4 + l, o)] = v;
                        central[(lay.block(Block::G4).start + (2 * i + j) * 12 + gl, oc)] = v;
                    }
                    for m in 0..6 {
                        let v = rng.random_range(-1.0..1.0);
                        local[(dl.block(Block::G5).start + j * 6 + m, o)] = v;
                        central[(
                            lay.block(Block::G5).start + (2 * i + j) * 18 + 6 * i + m,
                            oc,
                        )] = v;
                    }
                }
            }
            locals.push(local);
        }
        let b = BoxBounds::default();
        let uc = solve_box_lp(
            &linearize_objective_bilinear(&central, &z, &reference, &w).unwrap(),
            &b,
        )
        .unwrap();
        let mut stacked = Vec::new();
        for (i, local) in locals.iter().enumerate() {
            let wi: [f64; 6] = std::array::from_fn(|k| w[6 * i + k]);
            let ui = decentralized_control(
                i,
                local,
                z.natural.robot_block(i),
                z.utility.robot_block(i),
                &reference,
                &wi,
                &b,
            )
            .unwrap();
            stacked.extend(ui);
        }
        assert_eq!(uc, stacked);
    }
}
