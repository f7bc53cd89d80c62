use super::graph::{observed_block, GraphSolver};
use super::{consistency_matrix, IterRecord, SolverParams, SolverState, SolverTrace, Status, ViewSet};
use crate::error::{Error, Result};
use crate::tensor::{permute, soft_threshold, tsvt_with_norm, Matrix, ModeId, Tensor3};

/// Output of a full solve.
#[derive(Clone, Debug)]
pub struct JtivFit {
    pub g: Tensor3,
    pub l: Tensor3,
    pub s: Tensor3,
    /// Symmetric nonnegative consensus affinity derived from `l`.
    pub c: Matrix,
    pub trace: SolverTrace,
    pub status: Status,
}

impl JtivFit {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("penalty must be positive, got {rho}")))
    }
}

fn z_step(l: &Tensor3, j: &Tensor3, mode: ModeId, lambda: f64, rho: f64) -> Result<(Tensor3, f64)> {
    check_rho(rho)?;
    let target = permute(l, mode, false).axpy(1.0 / rho, j)?;
    if lambda == 0.0 {
        return Ok((target, 0.0));
    }
    tsvt_with_norm(&target, lambda / rho)
}

/// `Z = tsvt(perm(L) + J / rho, lambda / rho)`, in mode orientation.
pub fn z_update(l: &Tensor3, j: &Tensor3, mode: ModeId, lambda: f64, rho: f64) -> Result<Tensor3> {
    Ok(z_step(l, j, mode, lambda, rho)?.0)
}

/// Closed-form minimizer of the augmented Lagrangian in `L`: the average of
/// the four targets that `L` is coupled to.
pub fn l_update(g: &Tensor3, s: &Tensor3, z: &[Tensor3; 3], j: &[Tensor3; 4], rho: f64) -> Result<Tensor3> {
    check_rho(rho)?;
    let inv = 1.0 / rho;
    let mut acc = g.sub(s)?;
    acc.add_scaled(1.0, &z[0])?;
    acc.add_scaled(1.0, &permute(&z[1], ModeId::Mode2, true))?;
    acc.add_scaled(1.0, &permute(&z[2], ModeId::Mode3, true))?;
    acc.add_scaled(inv, &j[0])?;
    acc.add_scaled(-inv, &j[1])?;
    acc.add_scaled(-inv, &permute(&j[2], ModeId::Mode2, true))?;
    acc.add_scaled(-inv, &permute(&j[3], ModeId::Mode3, true))?;
    Ok(acc.scale(0.25))
}

/// `S = shrink(G - L + J1 / rho, 1 / rho)`.
pub fn s_update(g: &Tensor3, l: &Tensor3, j1: &Tensor3, rho: f64) -> Result<Tensor3> {
    check_rho(rho)?;
    soft_threshold(&g.sub(l)?.axpy(1.0 / rho, j1)?, 1.0 / rho)
}

fn view_residual(views: &ViewSet, g: &Tensor3, v: usize) -> Matrix {
    let view = &views.views()[v];
    let block = observed_block(&g.frontal(v), &view.observed);
    &view.data - &view.data * block
}

fn constraint_gaps(state: &SolverState) -> Result<[Tensor3; 4]> {
    Ok([
        state.g.sub(&state.l)?.sub(&state.s)?,
        state.l.sub(&state.z[0])?,
        permute(&state.l, ModeId::Mode2, false).sub(&state.z[1])?,
        permute(&state.l, ModeId::Mode3, false).sub(&state.z[2])?,
    ])
}

/// Dual ascent on every multiplier followed by the penalty increase.
pub fn multiplier_update(state: &mut SolverState, views: &ViewSet, params: &SolverParams) -> Result<()> {
    let rho = state.rho;
    for v in 0..views.num_views() {
        let r = view_residual(views, &state.g, v);
        state.f[v] += r * rho;
    }
    let gaps = constraint_gaps(state)?;
    for (jm, gap) in state.j.iter_mut().zip(gaps) {
        jm.add_scaled(rho, &gap)?;
    }
    state.rho = (rho * params.rho_mult).min(params.rho_max);
    Ok(())
}

/// Max-abs residuals: view self-expression, `G = L + S`, and the three
/// `perm_m(L) = Z_m` couplings.
pub fn residuals(state: &SolverState, views: &ViewSet) -> Result<[f64; 5]> {
    let er1 = (0..views.num_views()).map(|v| view_residual(views, &state.g, v).amax()).fold(0.0, f64::max);
    let gaps = constraint_gaps(state)?;
    Ok([er1, gaps[0].max_abs(), gaps[1].max_abs(), gaps[2].max_abs(), gaps[3].max_abs()])
}

/// Stepwise ADMM driver. [`jtiv_lrr_fit`] runs it to completion.
pub struct JtivSolver {
    views: ViewSet,
    params: SolverParams,
    graph_solvers: Vec<GraphSolver>,
    state: SolverState,
    trace: SolverTrace,
}

impl JtivSolver {
    pub fn new(views: &ViewSet, params: &SolverParams) -> Result<Self> {
        params.validate()?;
        let graph_solvers = views.views().iter().map(GraphSolver::new).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            views: views.clone(),
            params: params.clone(),
            graph_solvers,
            state: SolverState::zeros(views, params.rho0),
            trace: SolverTrace::default(),
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn trace(&self) -> &SolverTrace {
        &self.trace
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    fn update_graphs(&mut self) -> Result<()> {
        let rho = self.state.rho;
        let prior = self.state.l.add(&self.state.s)?.axpy(-1.0 / rho, &self.state.j[0])?;
        for (v, solver) in self.graph_solvers.iter().enumerate() {
            let target = &self.views.views()[v].data + &self.state.f[v] / rho;
            let g = solver.solve(&target, &prior.frontal(v))?;
            self.state.g.set_frontal(v, &g);
        }
        Ok(())
    }

    /// One full iteration; returns its record.
    pub fn step(&mut self) -> Result<IterRecord> {
        let iter = self.trace.len() + 1;
        let rho = self.state.rho;
        self.update_graphs()?;

        let lambdas = self.params.lambdas();
        let mut objective = 0.0;
        for (m, mode) in ModeId::ALL.into_iter().enumerate() {
            let (z, norm) = z_step(&self.state.l, &self.state.j[m + 1], mode, lambdas[m], rho)?;
            objective += lambdas[m] * norm / z.dims()[2] as f64;
            self.state.z[m] = z;
        }

        self.state.l = l_update(&self.state.g, &self.state.s, &self.state.z, &self.state.j, rho)?;
        if self.params.sparse_term {
            self.state.s = s_update(&self.state.g, &self.state.l, &self.state.j[0], rho)?;
        }
        objective += self.state.s.l1_norm();

        multiplier_update(&mut self.state, &self.views, &self.params)?;
        let er = residuals(&self.state, &self.views)?;
        if !(self.state.l.is_finite() && self.state.s.is_finite() && self.state.g.is_finite())
            || er.iter().any(|e| !e.is_finite())
        {
            return Err(Error::NonFinite { iteration: iter });
        }
        let record = IterRecord { iter, er, objective, rho };
        self.trace.records.push(record);
        Ok(record)
    }

    pub fn run(mut self) -> Result<JtivFit> {
        let status = loop {
            let record = self.step()?;
            if record.max_residual() <= self.params.tol {
                break Status::Converged;
            }
            if record.iter >= self.params.max_iter {
                break Status::MaxIter;
            }
        };
        let c = consistency_matrix(&self.state.l);
        Ok(JtivFit { g: self.state.g, l: self.state.l, s: self.state.s, c, trace: self.trace, status })
    }
}

/// Recovers the low-rank graph tensor, sparse part and consensus affinity
/// from incomplete multiview data.
pub fn jtiv_lrr_fit(views: &ViewSet, params: &SolverParams) -> Result<JtivFit> {
    JtivSolver::new(views, params)?.run()
}
