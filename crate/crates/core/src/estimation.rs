//! Online parameter estimation for `y = Theta^T zeta`.
//!
//! The production path is normalized recursive least squares with a periodic
//! gain reset. A normalized gradient law is provided for comparison, and
//! [`batch_ls`] gives the closed-form minimizer of the regularized cost that
//! recursive least squares tracks when resets are disabled.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    /// `q x p` parameter estimate.
    pub theta: DMatrix<f64>,
    /// `q x q` gain matrix.
    pub p: DMatrix<f64>,
    pub rho: f64,
    /// Restore `p = p0` after every this many updates; `None` disables resets.
    pub reset_interval: Option<u64>,
    /// Updates applied so far.
    pub step: u64,
    pub p0: DMatrix<f64>,
    pub theta0: DMatrix<f64>,
}

/// Prediction residuals around one update.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    /// `theta(k)^T zeta - y`.
    pub prior: DVector<f64>,
    /// `theta(k+1)^T zeta - y`.
    pub posterior: DVector<f64>,
    pub prior_norm: f64,
    pub posterior_norm: f64,
}

impl ErrorRecord {
    fn new(prior: DVector<f64>, posterior: DVector<f64>) -> Self {
        ErrorRecord {
            prior_norm: prior.norm(),
            posterior_norm: posterior.norm(),
            prior,
            posterior,
        }
    }
}

impl EstimatorState {
    /// `theta0 = 0`, `p0 = p0_scale * I`.
    pub fn new(
        q: usize,
        outputs: usize,
        rho: f64,
        p0_scale: f64,
        reset_interval: Option<u64>,
    ) -> Result<Self> {
        if !(p0_scale > 0.0 && p0_scale.is_finite()) {
            return Err(Error::config("p0_scale", "must be positive"));
        }
        Self::with_initial(
            DMatrix::zeros(q, outputs),
            DMatrix::identity(q, q) * p0_scale,
            rho,
            reset_interval,
        )
    }

    pub fn with_initial(
        theta0: DMatrix<f64>,
        p0: DMatrix<f64>,
        rho: f64,
        reset_interval: Option<u64>,
    ) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::config("rho", "must be positive"));
        }
        if reset_interval == Some(0) {
            return Err(Error::config("reset_interval", "must be positive"));
        }
        if !p0.is_square() || p0.nrows() != theta0.nrows() {
            return Err(Error::DimensionMismatch {
                what: "initial gain size",
                expected: theta0.nrows(),
                got: p0.nrows(),
            });
        }
        if p0.clone().cholesky().is_none() {
            return Err(Error::config("p0", "must be symmetric positive definite"));
        }
        Ok(EstimatorState {
            theta: theta0.clone(),
            p: p0.clone(),
            rho,
            reset_interval,
            step: 0,
            p0,
            theta0,
        })
    }

    pub fn regressor_len(&self) -> usize {
        self.theta.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.theta.ncols()
    }

    fn check(&self, zeta: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        if zeta.len() != self.regressor_len() {
            return Err(Error::DimensionMismatch {
                what: "regressor length",
                expected: self.regressor_len(),
                got: zeta.len(),
            });
        }
        if y.len() != self.outputs() {
            return Err(Error::DimensionMismatch {
                what: "measurement length",
                expected: self.outputs(),
                got: y.len(),
            });
        }
        if !zeta.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("regressor"));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("measurement"));
        }
        Ok(())
    }

    /// One normalized least-squares update:
    ///
    /// ```text
    /// eps   = theta^T zeta - y
    /// m^2   = rho + zeta^T P zeta
    /// theta = theta - P zeta eps^T / m^2
    /// P     = P - P zeta zeta^T P / m^2
    /// ```
    ///
    /// The gain downdate is formed entry by entry in a symmetric order, so `P`
    /// stays exactly symmetric. On the reset grid `P = P0`.
    pub fn rls_step(&mut self, zeta: &DVector<f64>, y: &DVector<f64>) -> Result<ErrorRecord> {
        self.check(zeta, y)?;
        let prior = self.theta.tr_mul(zeta) - y;
        let pz = &self.p * zeta;
        let m2 = self.rho + zeta.dot(&pz);
        assert!(m2 > 0.0, "normalization must be positive, got {m2}");

        self.theta.ger(-1.0 / m2, &pz, &prior, 1.0);
        symmetric_downdate(&mut self.p, &pz, 1.0 / m2);
        self.advance();

        let posterior = self.theta.tr_mul(zeta) - y;
        Ok(ErrorRecord::new(prior, posterior))
    }

    /// Normalized gradient update `theta -= Gamma zeta eps^T / (rho + zeta^T zeta)`.
    /// Leaves `P` untouched.
    pub fn gradient_step(
        &mut self,
        zeta: &DVector<f64>,
        y: &DVector<f64>,
        gain: &GradientGain,
    ) -> Result<ErrorRecord> {
        self.check(zeta, y)?;
        if let Some(g) = &gain.matrix {
            if g.nrows() != zeta.len() {
                return Err(Error::DimensionMismatch {
                    what: "gradient gain size",
                    expected: zeta.len(),
                    got: g.nrows(),
                });
            }
        }
        let prior = self.theta.tr_mul(zeta) - y;
        let m2 = self.rho + zeta.norm_squared();
        let gz = match &gain.matrix {
            Some(g) => g * zeta,
            None => zeta * gain.scale,
        };
        self.theta.ger(-1.0 / m2, &gz, &prior, 1.0);
        self.step += 1;
        let posterior = self.theta.tr_mul(zeta) - y;
        Ok(ErrorRecord::new(prior, posterior))
    }

    fn advance(&mut self) {
        self.step += 1;
        if let Some(n) = self.reset_interval {
            if self.step.is_multiple_of(n) {
                self.p.copy_from(&self.p0);
            }
        }
    }

    /// Replace the running quantities with a checkpointed record.
    pub fn restore(&mut self, record: CheckpointRecord) -> Result<()> {
        if record.theta.shape() != self.theta.shape() || record.p.shape() != self.p.shape() {
            return Err(Error::Checkpoint(format!(
                "shape {:?} does not match estimator {:?}",
                record.theta.shape(),
                self.theta.shape()
            )));
        }
        self.theta = record.theta;
        self.p = record.p;
        self.step = record.step;
        Ok(())
    }
}

/// `P -= c v v^T`, with each entry formed as `(v_i v_j) c` so that a
/// symmetric `P` stays bitwise symmetric.
fn symmetric_downdate(p: &mut DMatrix<f64>, v: &DVector<f64>, c: f64) {
    let n = v.len();
    let v = v.as_slice();
    for (j, col) in p.as_mut_slice().chunks_exact_mut(n).enumerate() {
        let vj = v[j];
        for (pij, &vi) in col.iter_mut().zip(v) {
            *pij -= (vi * vj) * c;
        }
    }
}

/// Gain of the normalized gradient law, `0 < Gamma = Gamma^T < 2 I`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientGain {
    matrix: Option<DMatrix<f64>>,
    scale: f64,
}

impl GradientGain {
    /// `Gamma = gamma I`.
    pub fn scalar(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(Error::InvalidGain(format!(
                "scalar gain {gamma} outside (0, 2)"
            )));
        }
        Ok(GradientGain {
            matrix: None,
            scale: gamma,
        })
    }

    pub fn matrix(gamma: DMatrix<f64>) -> Result<Self> {
        if !gamma.is_square() {
            return Err(Error::InvalidGain("gain must be square".into()));
        }
        let asym = (&gamma - gamma.transpose()).amax();
        if asym > 1e-12 * gamma.amax().max(1.0) {
            return Err(Error::InvalidGain("gain must be symmetric".into()));
        }
        let eig = gamma.clone().symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        if !(lo > 0.0 && hi < 2.0) {
            return Err(Error::InvalidGain(format!(
                "eigenvalues [{lo}, {hi}] outside (0, 2)"
            )));
        }
        Ok(GradientGain {
            matrix: Some(gamma),
            scale: 1.0,
        })
    }
}

/// Closed-form minimizer of
/// `1/2 sum |theta^T zeta - y|^2 / rho + 1/2 tr[(theta - theta0)^T P0^{-1} (theta - theta0)]`:
///
/// `theta = (P0^{-1} + sum zeta zeta^T / rho)^{-1} (P0^{-1} theta0 + sum zeta y^T / rho)`.
pub fn batch_ls(
    data: &[(DVector<f64>, DVector<f64>)],
    theta0: &DMatrix<f64>,
    p0: &DMatrix<f64>,
    rho: f64,
) -> Result<DMatrix<f64>> {
    let (q, outputs) = theta0.shape();
    if !(rho > 0.0) {
        return Err(Error::config("rho", "must be positive"));
    }
    let p0_inv = p0
        .clone()
        .cholesky()
        .ok_or_else(|| Error::config("p0", "must be symmetric positive definite"))?
        .inverse();
    let mut normal = p0_inv.clone();
    let mut rhs = &p0_inv * theta0;
    for (zeta, y) in data {
        if zeta.len() != q || y.len() != outputs {
            return Err(Error::DimensionMismatch {
                what: "batch sample",
                expected: q + outputs,
                got: zeta.len() + y.len(),
            });
        }
        normal.ger(1.0 / rho, zeta, zeta, 1.0);
        rhs.ger(1.0 / rho, zeta, y, 1.0);
    }
    let chol = normal
        .cholesky()
        .ok_or_else(|| Error::config("p0", "regularized normal matrix is not positive definite"))?;
    Ok(chol.solve(&rhs))
}

/// Unregularized minimum-norm least squares over stacked samples, via SVD.
pub fn batch_lstsq(zetas: &DMatrix<f64>, ys: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if zetas.nrows() != ys.nrows() {
        return Err(Error::DimensionMismatch {
            what: "sample count",
            expected: zetas.nrows(),
            got: ys.nrows(),
        });
    }
    let svd = zetas.clone().svd(true, true);
    let tol = f64::EPSILON * zetas.nrows().max(zetas.ncols()) as f64 * svd.singular_values.max();
    svd.solve(ys, tol)
        .map_err(|e| Error::Checkpoint(e.to_string()))
}

/// One estimator snapshot as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointRecord {
    pub theta: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub step: u64,
}

impl From<&EstimatorState> for CheckpointRecord {
    fn from(st: &EstimatorState) -> Self {
        CheckpointRecord {
            theta: st.theta.clone(),
            p: st.p.clone(),
            step: st.step,
        }
    }
}

/// Writes one record per estimator, back to back. Each record is, all
/// little-endian: `q: u64`, `p: u64`, `theta` as `q*p` row-major `f64`,
/// `P` as `q*q` row-major `f64`, `step: u64`.
pub fn write_checkpoint<W: Write>(mut w: W, states: &[&EstimatorState]) -> Result<()> {
    for st in states {
        let (q, p) = st.theta.shape();
        w.write_all(&(q as u64).to_le_bytes())?;
        w.write_all(&(p as u64).to_le_bytes())?;
        for r in 0..q {
            for c in 0..p {
                w.write_all(&st.theta[(r, c)].to_le_bytes())?;
            }
        }
        for r in 0..q {
            for c in 0..q {
                w.write_all(&st.p[(r, c)].to_le_bytes())?;
            }
        }
        w.write_all(&st.step.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<CheckpointRecord>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cursor = bytes.as_slice();
    let mut out = Vec::new();
    while !cursor.is_empty() {
        let q = take_u64(&mut cursor)? as usize;
        let p = take_u64(&mut cursor)? as usize;
        if q == 0 || p == 0 || q > 100_000 || p > 100_000 {
            return Err(Error::Checkpoint(format!("implausible shape {q}x{p}")));
        }
        let theta = DMatrix::from_row_slice(q, p, &take_f64s(&mut cursor, q * p)?);
        let gain = DMatrix::from_row_slice(q, q, &take_f64s(&mut cursor, q * q)?);
        let step = take_u64(&mut cursor)?;
        out.push(CheckpointRecord {
            theta,
            p: gain,
            step,
        });
    }
    Ok(out)
}

fn take_u64(cursor: &mut &[u8]) -> Result<u64> {
    if cursor.len() < 8 {
        return Err(Error::Checkpoint("truncated record".into()));
    }
    let (head, rest) = cursor.split_at(8);
    *cursor = rest;
    Ok(u64::from_le_bytes(head.try_into().unwrap()))
}

fn take_f64s(cursor: &mut &[u8], n: usize) -> Result<Vec<f64>> {
    if cursor.len() < 8 * n {
        return Err(Error::Checkpoint("truncated record".into()));
    }
    let (head, rest) = cursor.split_at(8 * n);
    *cursor = rest;
    Ok(head
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
