//! Lifted state vectors, regressors and one-step prediction.
//!
//! Regressor layouts (block order is a binary contract, checkpoints depend on it):
//!
//! | layout        | natural | utility | input | 1 | g1  | g2  | g3  | g4 | g5  | total |
//! |---------------|---------|---------|-------|---|-----|-----|-----|----|-----|-------|
//! | linear        | 12      | 18      | 6     |   |     |     |     |    |     | 36    |
//! | bilinear      | 12      | 18      | 6     | 1 | 144 | 216 | 324 | 72 | 108 | 901   |
//! | decentralized | 4       | 6       | 2     | 1 | 16  | 24  | 36  | 8  | 12  | 109   |
//!
//! The linear layout uses raw `z1`, `z2`; the bilinear layouts use offsets from
//! the reference point. Every `g` block is a stack of scaled copies of one
//! vector, ordered by the index of the scalar multiplier:
//! `g1 = [d1_1 * d1; d1_2 * d1; ...]`, `g2 = [d1_l * d2]`, `g3 = [d2_l * d2]`,
//! `g4 = [u_l * d1]`, `g5 = [u_l * d2]`. There are no input-input products,
//! so every prediction is affine in the input.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, SVector};

use crate::dynamics::{ControlInput, SystemState, Workspace};
use crate::utility::{utility_vector, Targets, UtilityVector};
use crate::{Error, Result, COMPONENTS};

/// `z = [z1; z2]` with `z1` the natural state and `z2` the utility components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KoopmanVector {
    pub natural: SystemState,
    pub utility: UtilityVector,
}

impl KoopmanVector {
    pub fn lift(x: &SystemState, targets: &Targets, ws: &Workspace) -> Self {
        KoopmanVector {
            natural: *x,
            utility: utility_vector(x, targets, ws),
        }
    }

    pub fn to_vector(&self) -> SVector<f64, 30> {
        let mut z = SVector::<f64, 30>::zeros();
        z.fixed_rows_mut::<12>(0).copy_from(&self.natural.0);
        z.fixed_rows_mut::<18>(12).copy_from(&self.utility.0);
        z
    }
}

/// Expansion point of the bilinear models: robots resting on their targets.
/// The input reference is identically zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePoint {
    pub natural: SystemState,
    pub utility: UtilityVector,
}

impl ReferencePoint {
    pub fn at_targets(targets: &Targets, ws: &Workspace) -> Self {
        let natural = SystemState::at_rest(&targets.0);
        ReferencePoint {
            natural,
            utility: utility_vector(&natural, targets, ws),
        }
    }

    pub fn robot_natural(&self, i: usize) -> [f64; 4] {
        self.natural.robot_block(i)
    }

    pub fn robot_utility(&self, i: usize) -> [f64; COMPONENTS] {
        self.utility.robot_block(i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegressorLayout {
    Linear,
    Bilinear,
    Decentralized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Natural,
    Utility,
    Input,
    Constant,
    G1,
    G2,
    G3,
    G4,
    G5,
}

impl Block {
    pub const ALL: [Block; 9] = [
        Block::Natural,
        Block::Utility,
        Block::Input,
        Block::Constant,
        Block::G1,
        Block::G2,
        Block::G3,
        Block::G4,
        Block::G5,
    ];
}

impl RegressorLayout {
    /// `(natural, utility, input)` dimensions.
    pub fn dims(self) -> (usize, usize, usize) {
        match self {
            RegressorLayout::Linear | RegressorLayout::Bilinear => (12, 18, 6),
            RegressorLayout::Decentralized => (4, 6, 2),
        }
    }

    pub fn block_len(self, block: Block) -> usize {
        let (n1, n2, nu) = self.dims();
        let bilinear = self != RegressorLayout::Linear;
        match block {
            Block::Natural => n1,
            Block::Utility => n2,
            Block::Input => nu,
            _ if !bilinear => 0,
            Block::Constant => 1,
            Block::G1 => n1 * n1,
            Block::G2 => n1 * n2,
            Block::G3 => n2 * n2,
            Block::G4 => nu * n1,
            Block::G5 => nu * n2,
        }
    }

    pub fn block(self, block: Block) -> Range<usize> {
        let mut start = 0;
        for b in Block::ALL {
            let len = self.block_len(b);
            if b == block {
                return start..start + len;
            }
            start += len;
        }
        unreachable!()
    }

    pub fn len(self) -> usize {
        Block::ALL.iter().map(|&b| self.block_len(b)).sum()
    }

    pub fn outputs(self) -> usize {
        self.dims().1
    }

    pub fn inputs(self) -> usize {
        self.dims().2
    }

    pub fn from_len(q: usize) -> Option<Self> {
        [
            RegressorLayout::Linear,
            RegressorLayout::Bilinear,
            RegressorLayout::Decentralized,
        ]
        .into_iter()
        .find(|l| l.len() == q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub layout: RegressorLayout,
    pub values: DVector<f64>,
}

impl Regressor {
    pub fn block(&self, block: Block) -> &[f64] {
        &self.values.as_slice()[self.layout.block(block)]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The five product blocks of the bilinear regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct GProducts {
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub g3: Vec<f64>,
    pub g4: Vec<f64>,
    pub g5: Vec<f64>,
}

/// Appends `[a_0 * b; a_1 * b; ...]`.
fn push_scaled_copies(out: &mut Vec<f64>, a: &[f64], b: &[f64]) {
    for &al in a {
        out.extend(b.iter().map(|&bm| al * bm));
    }
}

pub fn g_products(d1: &[f64], d2: &[f64], u: &[f64]) -> Result<GProducts> {
    let dims = (d1.len(), d2.len(), u.len());
    if dims != (12, 18, 6) && dims != (4, 6, 2) {
        return Err(Error::DimensionMismatch {
            what: "g_products natural/utility/input",
            expected: if d1.len() == 4 {
                4 + 6 + 2
            } else {
                12 + 18 + 6
            },
            got: d1.len() + d2.len() + u.len(),
        });
    }
    let mut g = GProducts {
        g1: Vec::with_capacity(d1.len() * d1.len()),
        g2: Vec::with_capacity(d1.len() * d2.len()),
        g3: Vec::with_capacity(d2.len() * d2.len()),
        g4: Vec::with_capacity(u.len() * d1.len()),
        g5: Vec::with_capacity(u.len() * d2.len()),
    };
    push_scaled_copies(&mut g.g1, d1, d1);
    push_scaled_copies(&mut g.g2, d1, d2);
    push_scaled_copies(&mut g.g3, d2, d2);
    push_scaled_copies(&mut g.g4, u, d1);
    push_scaled_copies(&mut g.g5, u, d2);
    Ok(g)
}

pub fn regressor_linear(z: &KoopmanVector, u: &ControlInput) -> Regressor {
    let mut values = Vec::with_capacity(36);
    values.extend_from_slice(z.natural.as_slice());
    values.extend_from_slice(z.utility.as_slice());
    values.extend_from_slice(u.as_slice());
    Regressor {
        layout: RegressorLayout::Linear,
        values: DVector::from_vec(values),
    }
}

fn bilinear_values(d1: &[f64], d2: &[f64], u: &[f64], layout: RegressorLayout) -> Regressor {
    let mut values = Vec::with_capacity(layout.len());
    values.extend_from_slice(d1);
    values.extend_from_slice(d2);
    values.extend_from_slice(u);
    values.push(1.0);
    push_scaled_copies(&mut values, d1, d1);
    push_scaled_copies(&mut values, d1, d2);
    push_scaled_copies(&mut values, d2, d2);
    push_scaled_copies(&mut values, u, d1);
    push_scaled_copies(&mut values, u, d2);
    debug_assert_eq!(values.len(), layout.len());
    Regressor {
        layout,
        values: DVector::from_vec(values),
    }
}

pub fn regressor_bilinear(
    z: &KoopmanVector,
    u: &ControlInput,
    reference: &ReferencePoint,
) -> Regressor {
    let d1 = z.natural.0 - reference.natural.0;
    let d2 = z.utility.0 - reference.utility.0;
    bilinear_values(
        d1.as_slice(),
        d2.as_slice(),
        u.as_slice(),
        RegressorLayout::Bilinear,
    )
}

/// Per-robot regressor. `natural` is the `[x, y, vx, vy]` block entering the
/// natural and product terms (robot `i`'s own block in the default reading);
/// `utility` is robot `i`'s six components, and offsets are taken from robot
/// `i`'s reference.
pub fn regressor_decentralized(
    i: usize,
    natural: [f64; 4],
    utility: [f64; COMPONENTS],
    input: [f64; 2],
    reference: &ReferencePoint,
) -> Regressor {
    let r1 = reference.robot_natural(i);
    let r2 = reference.robot_utility(i);
    let d1: [f64; 4] = std::array::from_fn(|k| natural[k] - r1[k]);
    let d2: [f64; COMPONENTS] = std::array::from_fn(|k| utility[k] - r2[k]);
    bilinear_values(&d1, &d2, &input, RegressorLayout::Decentralized)
}

/// `theta^T zeta`.
pub fn predict(theta: &DMatrix<f64>, zeta: &Regressor) -> Result<DVector<f64>> {
    if theta.nrows() != zeta.len() {
        return Err(Error::DimensionMismatch {
            what: "parameter rows vs regressor length",
            expected: zeta.len(),
            got: theta.nrows(),
        });
    }
    if theta.ncols() != zeta.layout.outputs() {
        return Err(Error::DimensionMismatch {
            what: "parameter columns vs model outputs",
            expected: zeta.layout.outputs(),
            got: theta.ncols(),
        });
    }
    Ok(theta.tr_mul(&zeta.values))
}
