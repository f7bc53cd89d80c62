use super::{IterRecord, SolverParams, SolverTrace, Status};
use crate::error::{Error, Result};
use crate::tensor::{permute, soft_threshold, tsvt_with_norm, ModeId, Tensor3};

/// Sparse weight for a set of modes: the sum over modes of
/// `1 / sqrt(max(a, b) * c)`, with `a x b x c` the dims in that mode's
/// orientation. One mode gives the usual single-norm weight.
pub fn default_trpca_lambda(dims: [usize; 3], modes: &[ModeId]) -> f64 {
    modes
        .iter()
        .map(|m| {
            let [a, b, c] = m.permuted_dims(dims);
            1.0 / ((a.max(b) * c) as f64).sqrt()
        })
        .sum()
}

#[derive(Clone, Debug)]
pub struct TrpcaFit {
    pub l: Tensor3,
    pub s: Tensor3,
    pub trace: SolverTrace,
    pub status: Status,
}

/// Robust PCA under the sum of tensor nuclear norms over a chosen set of
/// modes: `min sum_m |perm_m(L)|_* + lambda |S|_1  s.t.  X = L + S`.
///
/// Trace layout: `er[1]` is the `X = L + S` gap and `er[2 + m]` the
/// coupling gap of mode `m`; unused slots stay zero.
pub struct TrpcaSolver<'a> {
    x: &'a Tensor3,
    modes: Vec<ModeId>,
    lambda: f64,
    params: SolverParams,
    l: Tensor3,
    s: Tensor3,
    z: Vec<Tensor3>,
    j0: Tensor3,
    j: Vec<Tensor3>,
    rho: f64,
    trace: SolverTrace,
}

impl<'a> TrpcaSolver<'a> {
    pub fn new(x: &'a Tensor3, modes: &[ModeId], lambda: f64, params: &SolverParams) -> Result<Self> {
        params.validate()?;
        if modes.is_empty() {
            return Err(Error::InvalidParam("at least one mode is required".into()));
        }
        let mut sorted = modes.to_vec();
        sorted.sort_by_key(|m| m.index());
        sorted.dedup();
        if sorted.len() != modes.len() {
            return Err(Error::InvalidParam("modes must be distinct".into()));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParam(format!("lambda must be positive, got {lambda}")));
        }
        if !x.is_finite() {
            return Err(Error::InvalidParam("observation contains non-finite values".into()));
        }
        let dims = x.dims();
        let zeros = |m: ModeId| {
            let [a, b, c] = m.permuted_dims(dims);
            Tensor3::zeros(a, b, c)
        };
        Ok(Self {
            x,
            z: sorted.iter().map(|&m| zeros(m)).collect(),
            j: sorted.iter().map(|&m| zeros(m)).collect(),
            modes: sorted,
            lambda,
            params: params.clone(),
            l: Tensor3::zeros(dims[0], dims[1], dims[2]),
            s: Tensor3::zeros(dims[0], dims[1], dims[2]),
            j0: Tensor3::zeros(dims[0], dims[1], dims[2]),
            rho: params.rho0,
            trace: SolverTrace::default(),
        })
    }

    pub fn step(&mut self) -> Result<IterRecord> {
        let iter = self.trace.len() + 1;
        let rho = self.rho;
        let inv = 1.0 / rho;

        let mut objective = 0.0;
        for (idx, &mode) in self.modes.iter().enumerate() {
            let target = permute(&self.l, mode, false).axpy(inv, &self.j[idx])?;
            let (z, norm) = tsvt_with_norm(&target, inv)?;
            objective += norm / z.dims()[2] as f64;
            self.z[idx] = z;
        }

        let mut acc = self.x.sub(&self.s)?.axpy(inv, &self.j0)?;
        for (idx, &mode) in self.modes.iter().enumerate() {
            let back = self.z[idx].axpy(-inv, &self.j[idx])?;
            acc.add_scaled(1.0, &permute(&back, mode, true))?;
        }
        self.l = acc.scale(1.0 / (self.modes.len() + 1) as f64);
        self.s = soft_threshold(&self.x.sub(&self.l)?.axpy(inv, &self.j0)?, self.lambda * inv)?;

        let mut er = [0.0; 5];
        let gap = self.x.sub(&self.l)?.sub(&self.s)?;
        er[1] = gap.max_abs();
        self.j0.add_scaled(rho, &gap)?;
        for (idx, &mode) in self.modes.iter().enumerate() {
            let gap = permute(&self.l, mode, false).sub(&self.z[idx])?;
            er[2 + mode.index()] = gap.max_abs();
            self.j[idx].add_scaled(rho, &gap)?;
        }
        self.rho = (rho * self.params.rho_mult).min(self.params.rho_max);

        objective += self.lambda * self.s.l1_norm();

        if !(self.l.is_finite() && self.s.is_finite()) {
            return Err(Error::NonFinite { iteration: iter });
        }
        let record = IterRecord { iter, er, objective, rho };
        self.trace.records.push(record);
        Ok(record)
    }

    pub fn run(mut self) -> Result<TrpcaFit> {
        let status = loop {
            let record = self.step()?;
            if record.max_residual() <= self.params.tol {
                break Status::Converged;
            }
            if record.iter >= self.params.max_iter {
                break Status::MaxIter;
            }
        };
        Ok(TrpcaFit { l: self.l, s: self.s, trace: self.trace, status })
    }
}

pub fn trpca_fit(x: &Tensor3, modes: &[ModeId], lambda: f64, params: &SolverParams) -> Result<TrpcaFit> {
    TrpcaSolver::new(x, modes, lambda, params)?.run()
}
