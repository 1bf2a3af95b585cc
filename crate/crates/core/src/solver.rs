//! Log-barrier interior-point method for problems of the form
//!
//! ```text
//! minimize    cᵀx + c₀
//! subject to  g_i(x) ≤ 0      (smooth, convex)
//!             l ≤ x ≤ u
//! ```
//!
//! started from a strictly feasible point. Each centering step minimizes
//! `κ·cᵀx − Σ log(−g_i(x)) − Σ log(x − l) − Σ log(u − x)` by damped Newton
//! with a feasibility-preserving backtracking line search, then `κ` grows by
//! a constant factor until the duality gap `m/κ` falls below the KKT tolerance.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// A twice-differentiable convex inequality `g(x) ≤ 0`.
pub trait SmoothConstraint: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;

    /// Writes the dense gradient into `grad` (length `n`, already zeroed).
    fn gradient(&self, x: &[f64], grad: &mut [f64]);

    /// Adds `weight · ∇²g(x)` into `hess`.
    fn add_hessian(&self, x: &[f64], weight: f64, hess: &mut DMatrix<f64>);
}

/// `Σ aⱼ xⱼ + b ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

impl SmoothConstraint for LinearConstraint {
    fn value(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum::<f64>() + self.constant
    }

    fn gradient(&self, _x: &[f64], grad: &mut [f64]) {
        for &(j, a) in &self.coeffs {
            grad[j] += a;
        }
    }

    fn add_hessian(&self, _x: &[f64], _weight: f64, _hess: &mut DMatrix<f64>) {}
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("problem dimensions are inconsistent: {0}")]
    Dimension(String),
    #[error("start point is not strictly feasible (constraint {index}: {value:e})")]
    InfeasibleStart { index: usize, value: f64 },
    #[error("line search lost strict feasibility after {iterations} Newton steps")]
    LostFeasibility { iterations: usize },
    #[error("no convergence within {iterations} Newton steps")]
    MaxIterations { iterations: usize },
    #[error("non-finite constraint value or derivative after {iterations} Newton steps")]
    NonFinite { iterations: usize },
}

pub struct NlpProblem {
    /// Objective gradient `c`.
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub constraints: Vec<Arc<dyn SmoothConstraint>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub start: Vec<f64>,
}

impl NlpProblem {
    pub fn new(objective: Vec<f64>, start: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            objective_constant: 0.0,
            constraints: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            start,
        }
    }

    pub fn with_constraint(mut self, c: impl SmoothConstraint + 'static) -> Self {
        self.constraints.push(Arc::new(c));
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn dimension(&self) -> usize {
        self.objective.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x) + self.objective_constant
    }

    fn bound_count(&self) -> usize {
        self.lower.iter().filter(|l| l.is_finite()).count()
            + self.upper.iter().filter(|u| u.is_finite()).count()
    }

    fn check_dimensions(&self) -> Result<(), SolverError> {
        let n = self.dimension();
        if self.start.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(SolverError::Dimension(format!(
                "n = {n}, start {}, lower {}, upper {}",
                self.start.len(),
                self.lower.len(),
                self.upper.len()
            )));
        }
        Ok(())
    }

    /// Most violated (largest) constraint value including bounds, `None` if
    /// some value is not finite.
    fn max_violation(&self, x: &[f64]) -> Option<(usize, f64)> {
        let mut worst = (usize::MAX, f64::NEG_INFINITY);
        for (i, c) in self.constraints.iter().enumerate() {
            let v = c.value(x);
            if !v.is_finite() {
                return None;
            }
            if v > worst.1 {
                worst = (i, v);
            }
        }
        let m = self.constraints.len();
        for j in 0..x.len() {
            if self.lower[j] - x[j] > worst.1 {
                worst = (m + j, self.lower[j] - x[j]);
            }
            if x[j] - self.upper[j] > worst.1 {
                worst = (m + x.len() + j, x[j] - self.upper[j]);
            }
        }
        Some(worst)
    }

    fn strictly_feasible(&self, x: &[f64]) -> bool {
        matches!(self.max_violation(x), Some((_, v)) if v < 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierOptions {
    pub tol_kkt: f64,
    pub max_iters: usize,
    pub initial_kappa: f64,
    pub kappa_growth: f64,
    /// Stop as soon as the objective drops below this value (phase-I use).
    pub stop_below: Option<f64>,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            tol_kkt: 1e-7,
            max_iters: 5_000,
            initial_kappa: 1.0,
            kappa_growth: 10.0,
            stop_below: None,
        }
    }
}

impl BarrierOptions {
    pub fn new(tol_kkt: f64, max_iters: usize) -> Self {
        Self {
            tol_kkt,
            max_iters,
            ..Self::default()
        }
    }
}

/// Multipliers for general constraints and for finite lower/upper bounds
/// (zero where the bound is infinite).
#[derive(Debug, Clone, PartialEq)]
pub struct Duals {
    pub constraints: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Duals {
    pub fn zeros(problem: &NlpProblem) -> Self {
        let n = problem.dimension();
        Self {
            constraints: vec![0.0; problem.constraints.len()],
            lower: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.feasibility).max(self.complementarity)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Optimal,
    StoppedBelow,
}

#[derive(Debug, Clone)]
pub struct NlpSolution {
    pub x: Vec<f64>,
    pub duals: Duals,
    pub kkt: KktResiduals,
    pub status: SolveStatus,
    pub objective: f64,
    pub newton_iterations: usize,
    /// Barrier values after each accepted Newton step, one list per centering phase.
    pub centering_log: Vec<Vec<f64>>,
}

/// Stationarity `‖c + Σλ∇g − λ_l + λ_u‖∞`, feasibility `max(g)₊` and
/// complementarity `max|λ·g|` at `x`.
pub fn check_kkt(problem: &NlpProblem, x: &[f64], duals: &Duals) -> KktResiduals {
    let n = problem.dimension();
    let mut station = problem.objective.clone();
    let mut grad = vec![0.0; n];
    let mut feas = 0.0f64;
    let mut comp = 0.0f64;
    for (c, &lambda) in problem.constraints.iter().zip(&duals.constraints) {
        let g = c.value(x);
        grad.iter_mut().for_each(|v| *v = 0.0);
        c.gradient(x, &mut grad);
        for j in 0..n {
            station[j] += lambda * grad[j];
        }
        feas = feas.max(g);
        comp = comp.max((lambda * g).abs());
    }
    for j in 0..n {
        station[j] += duals.upper[j] - duals.lower[j];
        if problem.lower[j].is_finite() {
            let g = problem.lower[j] - x[j];
            feas = feas.max(g);
            comp = comp.max((duals.lower[j] * g).abs());
        }
        if problem.upper[j].is_finite() {
            let g = x[j] - problem.upper[j];
            feas = feas.max(g);
            comp = comp.max((duals.upper[j] * g).abs());
        }
    }
    let stationarity = station.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    KktResiduals {
        stationarity: if stationarity.is_finite() { stationarity } else { f64::INFINITY },
        feasibility: feas,
        complementarity: comp,
    }
}

/// Convenience wrapper matching `check_kkt` with a pass/fail verdict.
pub fn certify(problem: &NlpProblem, x: &[f64], duals: &Duals, tol: f64) -> (KktResiduals, bool) {
    let r = check_kkt(problem, x, duals);
    (r, r.passes(tol))
}

struct Barrier<'a> {
    problem: &'a NlpProblem,
    kappa: f64,
    grad_buf: Vec<f64>,
}

impl<'a> Barrier<'a> {
    fn value(&self, x: &[f64]) -> Option<f64> {
        let p = self.problem;
        let mut f = self.kappa * dot(&p.objective, x);
        for c in &p.constraints {
            let g = c.value(x);
            if !(g < 0.0) {
                return None;
            }
            f -= (-g).ln();
        }
        for j in 0..x.len() {
            if p.lower[j].is_finite() {
                f -= (x[j] - p.lower[j]).ln();
            }
            if p.upper[j].is_finite() {
                f -= (p.upper[j] - x[j]).ln();
            }
        }
        f.is_finite().then_some(f)
    }

    fn derivatives(&mut self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.problem;
        let n = x.len();
        let mut grad = DVector::from_iterator(n, p.objective.iter().map(|c| self.kappa * c));
        let mut hess = DMatrix::zeros(n, n);
        for c in &p.constraints {
            let g = c.value(x);
            self.grad_buf.iter_mut().for_each(|v| *v = 0.0);
            c.gradient(x, &mut self.grad_buf);
            let inv = 1.0 / (-g);
            for a in 0..n {
                let ga = self.grad_buf[a];
                if ga == 0.0 {
                    continue;
                }
                grad[a] += inv * ga;
                for b in 0..n {
                    hess[(a, b)] += inv * inv * ga * self.grad_buf[b];
                }
            }
            c.add_hessian(x, inv, &mut hess);
        }
        for j in 0..n {
            if p.lower[j].is_finite() {
                let s = x[j] - p.lower[j];
                grad[j] -= 1.0 / s;
                hess[(j, j)] += 1.0 / (s * s);
            }
            if p.upper[j].is_finite() {
                let s = p.upper[j] - x[j];
                grad[j] += 1.0 / s;
                hess[(j, j)] += 1.0 / (s * s);
            }
        }
        (grad, hess)
    }

    fn duals(&self, x: &[f64]) -> Duals {
        let p = self.problem;
        let n = x.len();
        let k = self.kappa;
        Duals {
            constraints: p.constraints.iter().map(|c| 1.0 / (k * -c.value(x))).collect(),
            lower: (0..n)
                .map(|j| if p.lower[j].is_finite() { 1.0 / (k * (x[j] - p.lower[j])) } else { 0.0 })
                .collect(),
            upper: (0..n)
                .map(|j| if p.upper[j].is_finite() { 1.0 / (k * (p.upper[j] - x[j])) } else { 0.0 })
                .collect(),
        }
    }
}

/// Newton direction from a diagonally equilibrated Cholesky solve, with
/// growing Tikhonov regularization if the factorization fails.
fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let scale = DVector::from_iterator(
        n,
        (0..n).map(|j| {
            let h = hess[(j, j)];
            if h > 0.0 && h.is_finite() { 1.0 / h.sqrt() } else { 1.0 }
        }),
    );
    let mut scaled = hess.clone();
    for a in 0..n {
        for b in 0..n {
            scaled[(a, b)] *= scale[a] * scale[b];
        }
    }
    let rhs = -grad.component_mul(&scale);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut m = scaled.clone();
        for j in 0..n {
            m[(j, j)] += reg;
        }
        if let Some(ch) = m.cholesky() {
            let w = ch.solve(&rhs);
            let dir = w.component_mul(&scale);
            if dir.iter().all(|v| v.is_finite()) {
                return Some(dir);
            }
        }
        reg = if reg == 0.0 { 1e-12 } else { reg * 100.0 };
    }
    None
}

const CENTER_TOL: f64 = 1e-10;

pub fn solve(problem: &NlpProblem, opts: &BarrierOptions) -> Result<NlpSolution, SolverError> {
    problem.check_dimensions()?;
    let n = problem.dimension();
    match problem.max_violation(&problem.start) {
        None => return Err(SolverError::NonFinite { iterations: 0 }),
        Some((index, value)) if value >= 0.0 => return Err(SolverError::InfeasibleStart { index, value }),
        _ => {}
    }

    let m_total = (problem.constraints.len() + problem.bound_count()).max(1) as f64;
    // final stage leaves each |λ·g| = 1/κ at half the tolerance
    let kappa_final = 2.0 * m_total / opts.tol_kkt;
    let mut barrier = Barrier {
        problem,
        kappa: opts.initial_kappa,
        grad_buf: vec![0.0; n],
    };
    let mut x = problem.start.clone();
    let mut iterations = 0usize;
    let mut centering_log = Vec::new();
    let mut trial = vec![0.0; n];

    loop {
        let last_stage = barrier.kappa >= kappa_final;
        let mut log = Vec::new();
        let mut phi = barrier.value(&x).ok_or(SolverError::NonFinite { iterations })?;
        let mut extra = 0;
        let mut prev_decrement = f64::INFINITY;
        let mut stalls = 0;
        loop {
            let (grad, hess) = barrier.derivatives(&x);
            if !grad.iter().all(|v| v.is_finite()) || !hess.iter().all(|v| v.is_finite()) {
                return Err(SolverError::NonFinite { iterations });
            }
            let dir = newton_direction(&grad, &hess).ok_or(SolverError::NonFinite { iterations })?;
            let slope = grad.dot(&dir);
            let decrement = -slope / 2.0;
            // near the rounding floor the decrement stops shrinking quadratically
            if decrement < 1e-6 && decrement > 0.25 * prev_decrement {
                stalls += 1;
            }
            prev_decrement = decrement;
            let centered = decrement <= CENTER_TOL || stalls >= 3;
            if centered {
                if !last_stage {
                    break;
                }
                let kkt = check_kkt(problem, &x, &barrier.duals(&x));
                if kkt.stationarity <= opts.tol_kkt || extra >= 20 || decrement <= 0.0 {
                    break;
                }
                extra += 1;
            }
            if iterations >= opts.max_iters {
                return Err(SolverError::MaxIterations { iterations });
            }

            let mut step = 1.0;
            loop {
                for j in 0..n {
                    trial[j] = x[j] + step * dir[j];
                }
                if problem.strictly_feasible(&trial) {
                    break;
                }
                step *= 0.5;
                if step < 1e-14 {
                    return Err(SolverError::LostFeasibility { iterations });
                }
            }
            let mut accepted = None;
            if step == 1.0 && decrement < 1e-3 {
                // inside the quadratic region Armijo only sees rounding; take the
                // full step unless it fails to decrease at all
                accepted = barrier.value(&trial).filter(|v| *v <= phi);
                if accepted.is_none() {
                    step = 0.0;
                }
            }
            while accepted.is_none() && step >= 1e-14 {
                for j in 0..n {
                    trial[j] = x[j] + step * dir[j];
                }
                if let Some(v) = barrier.value(&trial) {
                    if v <= phi + 0.25 * step * slope {
                        accepted = Some(v);
                        break;
                    }
                }
                step *= 0.5;
            }
            iterations += 1;
            let Some(v) = accepted else {
                // rounding floor: no representable decrease left along the Newton ray
                break;
            };
            x.copy_from_slice(&trial);
            phi = v;
            log.push(phi);
            if let Some(limit) = opts.stop_below {
                if problem.objective_value(&x) < limit {
                    centering_log.push(log);
                    let duals = barrier.duals(&x);
                    return Ok(NlpSolution {
                        kkt: check_kkt(problem, &x, &duals),
                        objective: problem.objective_value(&x),
                        x,
                        duals,
                        status: SolveStatus::StoppedBelow,
                        newton_iterations: iterations,
                        centering_log,
                    });
                }
            }
        }
        centering_log.push(log);
        if last_stage {
            break;
        }
        barrier.kappa = (barrier.kappa * opts.kappa_growth).min(kappa_final);
    }

    let mut duals = barrier.duals(&x);
    let mut kkt = check_kkt(problem, &x, &duals);
    if let Some(polished) = polish_duals(problem, &x, &duals) {
        let refined = check_kkt(problem, &x, &polished);
        if refined.max() < kkt.max() {
            duals = polished;
            kkt = refined;
        }
    }
    Ok(NlpSolution {
        kkt,
        objective: problem.objective_value(&x),
        x,
        duals,
        status: SolveStatus::Optimal,
        newton_iterations: iterations,
        centering_log,
    })
}

/// Least-squares correction of barrier duals at the final iterate.
///
/// `λ = 1/(κ·(−g))` inherits the rounding error of `g` when the slack is tiny,
/// which leaves a stationarity residual far above machine precision. The
/// correction minimizes `‖r + Jᵀδ‖² + ‖diag(g) δ‖²`, so multipliers on
/// loose constraints barely move, then clips at zero.
fn polish_duals(problem: &NlpProblem, x: &[f64], duals: &Duals) -> Option<Duals> {
    let n = problem.dimension();
    let mut rows: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    for (c, &lambda) in problem.constraints.iter().zip(&duals.constraints) {
        let mut grad = vec![0.0; n];
        c.gradient(x, &mut grad);
        rows.push((grad, c.value(x), lambda));
    }
    for j in 0..n {
        if problem.lower[j].is_finite() {
            let mut grad = vec![0.0; n];
            grad[j] = -1.0;
            rows.push((grad, problem.lower[j] - x[j], duals.lower[j]));
        }
        if problem.upper[j].is_finite() {
            let mut grad = vec![0.0; n];
            grad[j] = 1.0;
            rows.push((grad, x[j] - problem.upper[j], duals.upper[j]));
        }
    }
    let m = rows.len();
    let mut r = DVector::from_column_slice(&problem.objective);
    for (grad, _, lambda) in &rows {
        for j in 0..n {
            r[j] += lambda * grad[j];
        }
    }
    // rows normalized to unit gradient norm
    let norms: Vec<f64> = rows
        .iter()
        .map(|row| row.0.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300))
        .collect();
    let jac = DMatrix::from_fn(m, n, |i, j| rows[i].0[j] / norms[i]);
    let mut normal = &jac * jac.transpose();
    for (i, row) in rows.iter().enumerate() {
        normal[(i, i)] += (row.1 / norms[i]).powi(2) + 1e-14;
    }
    let delta = normal.cholesky()?.solve(&(-(&jac * r)));
    let lambda: Vec<f64> = rows
        .iter()
        .zip(delta.iter())
        .zip(&norms)
        .map(|((row, d), norm)| (row.2 + d / norm).max(0.0))
        .collect();
    if !lambda.iter().all(|v| v.is_finite()) {
        return None;
    }
    let mut it = lambda.into_iter();
    let constraints = (0..problem.constraints.len()).map(|_| it.next().unwrap_or(0.0)).collect();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for j in 0..n {
        if problem.lower[j].is_finite() {
            lower[j] = it.next().unwrap_or(0.0);
        }
        if problem.upper[j].is_finite() {
            upper[j] = it.next().unwrap_or(0.0);
        }
    }
    Some(Duals { constraints, lower, upper })
}

/// Phase-I search for a strictly feasible point: minimize `s` subject to
/// `g_i(x) ≤ s`, starting from any point strictly inside the bounds.
///
/// Returns `None` when the constraint set has no strict interior.
pub fn find_interior_point(problem: &NlpProblem, opts: &BarrierOptions) -> Result<Option<Vec<f64>>, SolverError> {
    problem.check_dimensions()?;
    let n = problem.dimension();
    let x0 = &problem.start;
    if (0..n).any(|j| !(x0[j] > problem.lower[j] && x0[j] < problem.upper[j])) {
        return Err(SolverError::InfeasibleStart { index: problem.constraints.len(), value: 0.0 });
    }
    let mut g_max = f64::NEG_INFINITY;
    for c in &problem.constraints {
        let v = c.value(x0);
        if !v.is_finite() {
            return Err(SolverError::NonFinite { iterations: 0 });
        }
        g_max = g_max.max(v);
    }
    if g_max < 0.0 {
        return Ok(Some(x0.clone()));
    }

    let s0 = g_max + 1.0;
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut start = x0.clone();
    start.push(s0);
    let mut lower = problem.lower.clone();
    lower.push(-s0.max(1.0));
    let mut upper = problem.upper.clone();
    upper.push(f64::INFINITY);
    let phase1 = NlpProblem {
        objective,
        objective_constant: 0.0,
        constraints: problem
            .constraints
            .iter()
            .map(|c| Arc::new(Shifted { inner: Arc::clone(c), n }) as Arc<dyn SmoothConstraint>)
            .collect(),
        lower,
        upper,
        start,
    };
    let sol = solve(
        &phase1,
        &BarrierOptions {
            stop_below: Some(-1e-9 * s0.max(1.0)),
            ..*opts
        },
    )?;
    let x: Vec<f64> = sol.x[..n].to_vec();
    Ok(problem.strictly_feasible(&x).then_some(x))
}

/// `g(x) − s ≤ 0` over the extended vector `(x, s)`.
struct Shifted {
    inner: Arc<dyn SmoothConstraint>,
    n: usize,
}

impl SmoothConstraint for Shifted {
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(&x[..self.n]) - x[self.n]
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.inner.gradient(&x[..self.n], &mut grad[..self.n]);
        grad[self.n] -= 1.0;
    }

    fn add_hessian(&self, x: &[f64], weight: f64, hess: &mut DMatrix<f64>) {
        let mut sub = DMatrix::zeros(self.n, self.n);
        self.inner.add_hessian(&x[..self.n], weight, &mut sub);
        let mut view = hess.view_mut((0, 0), (self.n, self.n));
        view += &sub;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
