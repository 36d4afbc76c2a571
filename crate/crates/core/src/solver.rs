//! Full discretisation: Legendre collocation in space, fast CF stepping in time.
//!
//! Each step solves `(R + kappa G) C^k = Q^k` for the interior nodal values,
//! where `R` is the diagonal of interior quadrature weights and
//! `g_ij = sum_p w_p h_i'(x_p) h_j'(x_p)`. The matrix does not change between
//! steps; only `Q^k` does.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::cf::TimeGrid;
use crate::error::{Error, Result};
use crate::spectral::{interpolate, GridFunction, ShiftedBasis};
use crate::timestep::{
    history_weights, multiterm_fast_combination, step_coefficients, FastField, MultiTermOperator, StepCoefficients,
};

pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Boundary values of the initial data must vanish to this tolerance.
pub const COMPATIBILITY_TOL: f64 = 1e-12;
/// Default relative residual target of the conjugate gradient solve.
pub const CG_DEFAULT_TOL: f64 = 1e-12;

/// Exact solution `u(x, t)` with its space derivative, for error measurement.
#[derive(Clone)]
pub struct ExactSolution {
    pub value: SpaceTimeFn,
    pub dx: SpaceTimeFn,
}

/// `P u = u_xx + f` on `(0, S) x (0, T]` with `u = 0` at both ends.
#[derive(Clone)]
pub struct ProblemSpec {
    pub length: f64,
    pub horizon: f64,
    pub operator: MultiTermOperator,
    pub initial: SpaceFn,
    pub forcing: SpaceTimeFn,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("length", &self.length)
            .field("horizon", &self.horizon)
            .field("operator", &self.operator)
            .field("exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn new(
        length: f64,
        horizon: f64,
        operator: MultiTermOperator,
        initial: SpaceFn,
        forcing: SpaceTimeFn,
    ) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::domain(format!("domain length must be positive, got {length}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("time horizon must be positive, got {horizon}")));
        }
        Ok(Self {
            length,
            horizon,
            operator,
            initial,
            forcing,
            exact: None,
        })
    }

    pub fn with_exact(mut self, exact: ExactSolution) -> Self {
        self.exact = Some(exact);
        self
    }

    /// Zero data and zero solution.
    pub fn homogeneous(length: f64, horizon: f64, operator: MultiTermOperator) -> Result<Self> {
        let zero: SpaceTimeFn = Arc::new(|_, _| 0.0);
        Ok(
            Self::new(length, horizon, operator, Arc::new(|_| 0.0), zero.clone())?.with_exact(ExactSolution {
                value: zero.clone(),
                dx: zero,
            }),
        )
    }
}

/// Which linear solver handles `(R + kappa G) C = Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearSolver {
    /// Jacobi-preconditioned CG warm-started from the previous step.
    ConjugateGradient {
        tol: f64,
        /// Defaults to `10 (N - 1)`.
        max_iter: Option<usize>,
    },
    /// One Cholesky factorisation reused on every step.
    Cholesky,
}

impl Default for LinearSolver {
    fn default() -> Self {
        LinearSolver::ConjugateGradient {
            tol: CG_DEFAULT_TOL,
            max_iter: None,
        }
    }
}

/// `R`, `G` and `A = R + kappa G` restricted to the interior nodes.
#[derive(Clone)]
pub struct AssembledOperator {
    basis: Arc<ShiftedBasis>,
    mass: Vec<f64>,
    stiffness: DMatrix<f64>,
    kappa: f64,
    system: DMatrix<f64>,
    factor: Option<Cholesky<f64, Dyn>>,
}

impl fmt::Debug for AssembledOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AssembledOperator")
            .field("degree", &self.basis.degree())
            .field("kappa", &self.kappa)
            .field("factored", &self.factor.is_some())
            .finish_non_exhaustive()
    }
}

impl AssembledOperator {
    pub fn basis(&self) -> &Arc<ShiftedBasis> {
        &self.basis
    }

    /// Diagonal of `R`: the interior shifted weights.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn system(&self) -> &DMatrix<f64> {
        &self.system
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Number of interior unknowns, `N - 1`.
    pub fn interior_len(&self) -> usize {
        self.mass.len()
    }

    /// Factors `A` once for [`LinearSolver::Cholesky`].
    pub fn factorize(&mut self) -> Result<()> {
        if self.factor.is_none() {
            self.factor = Some(self.system.clone().cholesky().ok_or(Error::NotPositiveDefinite)?);
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(x);
        (&self.system * v).iter().copied().collect()
    }

    /// `C^T (R + kappa G) C`: the squared discrete weighted H1 norm.
    pub fn energy(&self, c: &[f64]) -> f64 {
        dot(c, &self.apply(c))
    }

    /// Solves `A x = b`. [`LinearSolver::Cholesky`] needs [`Self::factorize`] first.
    pub fn solve(&self, b: &[f64], guess: Option<&[f64]>, solver: LinearSolver) -> Result<Vec<f64>> {
        match solver {
            LinearSolver::ConjugateGradient { tol, max_iter } => {
                let budget = max_iter.unwrap_or(10 * self.interior_len().max(1));
                cg_solve_with(self, b, guess, tol, budget)
            }
            LinearSolver::Cholesky => {
                let factor = self
                    .factor
                    .as_ref()
                    .ok_or_else(|| Error::domain("operator has not been factorised"))?;
                let x = factor.solve(&DVector::from_column_slice(b));
                Ok(x.iter().copied().collect())
            }
        }
    }
}

/// Builds `R`, `G` and `A = R + kappa G` on the interior nodes `1..N-1`.
pub fn assemble(basis: Arc<ShiftedBasis>, kappa: f64) -> Result<AssembledOperator> {
    let n = basis.degree();
    if n < 2 {
        return Err(Error::domain("collocation needs degree N >= 2"));
    }
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::domain(format!("kappa must be non-negative, got {kappa}")));
    }
    let m = n - 1;
    let d = basis.diff_matrix();
    let w = basis.weights();
    let mass: Vec<f64> = w[1..n].to_vec();
    let mut stiffness = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let mut g = 0.0;
            for p in 0..=n {
                // w (a b) is symmetric in (i, j) bit for bit
                g += w[p] * (d[(p, i + 1)] * d[(p, j + 1)]);
            }
            stiffness[(i, j)] = g;
            stiffness[(j, i)] = g;
        }
    }
    let mut system = &stiffness * kappa;
    for (i, r) in mass.iter().enumerate() {
        system[(i, i)] += r;
    }
    Ok(AssembledOperator {
        basis,
        mass,
        stiffness,
        kappa,
        system,
        factor: None,
    })
}

/// Solves `A c = b` by CG with the default tolerance and budget, from a zero guess.
pub fn cg_solve(op: &AssembledOperator, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    cg_solve_with(op, b, None, tol, 10 * op.interior_len().max(1))
}

/// Jacobi-preconditioned conjugate gradient.
///
/// Stops when the true relative residual `||A c - b|| / ||b||` is at most `tol`.
pub fn cg_solve_with(
    op: &AssembledOperator,
    b: &[f64],
    guess: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = op.interior_len();
    if b.len() != n {
        return Err(Error::domain(format!(
            "right-hand side has {} entries, expected {n}",
            b.len()
        )));
    }
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let inv_diag: Vec<f64> = (0..n).map(|i| 1.0 / op.system[(i, i)]).collect();
    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![0.0; n],
    };

    let mut iterations = 0;
    let mut residual;
    loop {
        // (re)start from the true residual
        let ax = op.apply(&x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        residual = norm(&r) / b_norm;
        if residual <= tol {
            return Ok(x);
        }
        if iterations >= max_iter {
            break;
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            iterations += 1;
            let ap = op.apply(&p);
            let pap = dot(&p, &ap);
            if pap.is_nan() || pap <= 0.0 {
                return Err(Error::NotPositiveDefinite);
            }
            let step = rz / pap;
            for i in 0..n {
                x[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            if norm(&r) / b_norm <= tol {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_next = dot(&r, &z);
            let ratio = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + ratio * p[i];
            }
        }
    }
    Err(Error::CgNotConverged { iterations, residual })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `I_N phi` with the boundary entries set to exactly zero.
pub fn initial_field(spec: &ProblemSpec, basis: &Arc<ShiftedBasis>) -> Result<GridFunction> {
    let left = (spec.initial)(0.0);
    let right = (spec.initial)(spec.length);
    if left.abs() > COMPATIBILITY_TOL || right.abs() > COMPATIBILITY_TOL {
        return Err(Error::Compatibility(format!("phi(0) = {left:e}, phi(S) = {right:e}")));
    }
    let u = interpolate(|x| (spec.initial)(x), basis);
    let mut values = u.into_values();
    let last = values.len() - 1;
    values[0] = 0.0;
    values[last] = 0.0;
    GridFunction::new(Arc::clone(basis), values)
}

/// State of the march after step `k`.
#[derive(Debug, Clone)]
pub struct MarchState {
    step: usize,
    current: Vec<f64>,
    fast: Vec<FastField>,
}

impl MarchState {
    pub fn step(&self) -> usize {
        self.step
    }

    /// Interior values `C^k`.
    pub fn current(&self) -> &[f64] {
        &self.current
    }

    /// Per-term fast states; empty before the first step.
    pub fn fast_states(&self) -> &[FastField] {
        &self.fast
    }
}

/// Everything that stays fixed during a march.
#[derive(Debug, Clone)]
pub struct Stepper {
    spec: ProblemSpec,
    grid: TimeGrid,
    coefficients: StepCoefficients,
    op: AssembledOperator,
    solver: LinearSolver,
}

impl Stepper {
    pub fn new(spec: ProblemSpec, degree: usize, steps: usize, solver: LinearSolver) -> Result<Self> {
        let grid = TimeGrid::new(spec.horizon, steps)?;
        let coefficients = step_coefficients(&spec.operator, grid.dt())?;
        let basis = Arc::new(ShiftedBasis::new(degree, spec.length)?);
        let mut op = assemble(basis, coefficients.kappa)?;
        if solver == LinearSolver::Cholesky {
            op.factorize()?;
        }
        Ok(Self {
            spec,
            grid,
            coefficients,
            op,
            solver,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn coefficients(&self) -> &StepCoefficients {
        &self.coefficients
    }

    pub fn operator(&self) -> &AssembledOperator {
        &self.op
    }

    pub fn basis(&self) -> &Arc<ShiftedBasis> {
        self.op.basis()
    }

    pub fn initial_state(&self) -> Result<MarchState> {
        let u0 = initial_field(&self.spec, self.basis())?;
        let n = self.basis().degree();
        Ok(MarchState {
            step: 0,
            current: u0.values()[1..n].to_vec(),
            fast: Vec::new(),
        })
    }

    fn forcing_at(&self, k: usize) -> Vec<f64> {
        let t = self.grid.node(k);
        let n = self.basis().degree();
        self.basis().nodes()[1..n]
            .iter()
            .map(|&x| (self.spec.forcing)(x, t))
            .collect()
    }

    /// `Q^k` for the step that follows `state`.
    pub fn rhs(&self, state: &MarchState) -> Result<Vec<f64>> {
        let k = state.step + 1;
        if k > 1 && state.fast.len() != self.spec.operator.len() {
            return Err(Error::Desync {
                expected: state.step,
                found: 0,
            });
        }
        let kappa = self.coefficients.kappa;
        let f = self.forcing_at(k);
        let mut q: Vec<f64> = state.current.iter().zip(&f).map(|(c, f)| c + kappa * f).collect();
        if k > 1 {
            if let Some(s) = state.fast.iter().find(|s| s.step_index() != state.step) {
                return Err(Error::Desync {
                    expected: state.step,
                    found: s.step_index(),
                });
            }
            let memory = multiterm_fast_combination(&state.fast, &self.spec.operator, kappa)?;
            q.iter_mut().zip(&memory).for_each(|(q, m)| *q -= m);
        }
        q.iter_mut().zip(self.op.mass()).for_each(|(q, w)| *q *= w);
        Ok(q)
    }

    /// Solves step `k + 1` and updates every per-term fast state.
    pub fn advance(&self, state: MarchState) -> Result<MarchState> {
        let q = self.rhs(&state)?;
        let next = self.op.solve(&q, Some(&state.current), self.solver)?;
        let fast = if state.step == 0 {
            self.spec
                .operator
                .terms()
                .iter()
                .map(|(_, order)| FastField::init(*order, self.grid.dt(), &state.current, &next))
                .collect::<Result<Vec<_>>>()?
        } else {
            let mut fast = state.fast;
            for f in &mut fast {
                f.step(&state.current, &next);
            }
            fast
        };
        Ok(MarchState {
            step: state.step + 1,
            current: next,
            fast,
        })
    }

    /// Full nodal field of `state`, boundary zeros included.
    pub fn field(&self, state: &MarchState) -> GridFunction {
        with_boundary(self.basis(), &state.current)
    }

    /// `sqrt(C^T A C)`.
    pub fn energy_norm(&self, state: &MarchState) -> f64 {
        self.op.energy(&state.current).sqrt()
    }
}

fn with_boundary(basis: &Arc<ShiftedBasis>, interior: &[f64]) -> GridFunction {
    let mut values = Vec::with_capacity(interior.len() + 2);
    values.push(0.0);
    values.extend_from_slice(interior);
    values.push(0.0);
    GridFunction::new(Arc::clone(basis), values).expect("interior matches basis")
}

/// Options for [`solve_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveOptions {
    pub solver: LinearSolver,
    /// Record `||u^k||_1` for every step.
    pub record_norms: bool,
}

/// Result of a march.
#[derive(Debug, Clone)]
pub struct Solution {
    pub field: GridFunction,
    pub time: f64,
    pub kappa: f64,
    /// Discrete `||u^0||_N`.
    pub initial_norm: f64,
    /// Discrete `||u^k||_1` for `k = 1..=N_T`, when requested.
    pub norm_trace: Option<Vec<f64>>,
}

pub fn solve(spec: &ProblemSpec, degree: usize, steps: usize) -> Result<Solution> {
    solve_with(spec, degree, steps, SolveOptions::default())
}

/// Marches `k = 1..=N_T` with the fast form.
pub fn solve_with(spec: &ProblemSpec, degree: usize, steps: usize, options: SolveOptions) -> Result<Solution> {
    let stepper = Stepper::new(spec.clone(), degree, steps, options.solver)?;
    let mut state = stepper.initial_state()?;
    let initial_norm = stepper.field(&state).discrete_norm();
    let mut trace = options.record_norms.then(|| Vec::with_capacity(steps));
    for _ in 0..steps {
        state = stepper.advance(state)?;
        if let Some(t) = trace.as_mut() {
            t.push(stepper.energy_norm(&state));
        }
    }
    Ok(Solution {
        field: stepper.field(&state),
        time: stepper.grid().horizon(),
        kappa: stepper.coefficients().kappa,
        initial_norm,
        norm_trace: trace,
    })
}

/// Marches with the history form: every earlier iterate is kept and weighted
/// by differences of `zeta_{j,k}`. O(k) work per step; used as a cross-check
/// of the fast form.
pub fn solve_history_form(spec: &ProblemSpec, degree: usize, steps: usize, solver: LinearSolver) -> Result<Solution> {
    let stepper = Stepper::new(spec.clone(), degree, steps, solver)?;
    let state = stepper.initial_state()?;
    let initial_norm = stepper.field(&state).discrete_norm();
    let kappa = stepper.coefficients().kappa;
    let dt = stepper.grid().dt();
    let mut history: Vec<Vec<f64>> = vec![state.current];
    for k in 1..=steps {
        let weights = history_weights(&spec.operator, k, dt)?;
        let f = stepper.forcing_at(k);
        let mut q: Vec<f64> = f.iter().map(|f| kappa * f).collect();
        for (w, u) in weights.iter().zip(&history) {
            q.iter_mut().zip(u).for_each(|(q, u)| *q += w * u);
        }
        q.iter_mut().zip(stepper.op.mass()).for_each(|(q, w)| *q *= w);
        let guess = history.last().map(Vec::as_slice);
        let next = stepper.op.solve(&q, guess, solver)?;
        history.push(next);
    }
    Ok(Solution {
        field: with_boundary(stepper.basis(), history.last().expect("non-empty")),
        time: stepper.grid().horizon(),
        kappa,
        initial_norm,
        norm_trace: None,
    })
}
