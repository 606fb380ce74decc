//! Log-barrier Newton method for small convex programs with linear,
//! hyperbolic (`x·y ≥ c`) and quadratic-under-linear constraints.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Sparse linear form `Σ coeff·x[index] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn new(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { terms, constant }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, a)| a * x[i]).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `form ≤ 0`.
    Linear(Affine),
    /// `x[a]·x[b] ≥ c` with `x[a], x[b] > 0` and `c ≥ 0`.
    Hyperbolic { a: usize, b: usize, c: f64 },
    /// `Σ_r rows[r]² ≤ bound`.
    QuadraticUnderLinear { rows: Vec<Affine>, bound: Affine },
}

impl Constraint {
    /// Positive slack inside the feasible region.
    fn slack(&self, x: &[f64]) -> f64 {
        match self {
            Constraint::Linear(f) => -f.eval(x),
            Constraint::Hyperbolic { a, b, c } => {
                if x[*a] <= 0.0 || x[*b] <= 0.0 {
                    x[*a].min(x[*b])
                } else {
                    x[*a] * x[*b] - c
                }
            }
            Constraint::QuadraticUnderLinear { rows, bound } => {
                bound.eval(x) - rows.iter().map(|r| r.eval(x).powi(2)).sum::<f64>()
            }
        }
    }

    fn barrier_weight(&self) -> f64 {
        match self {
            Constraint::Hyperbolic { .. } => 3.0,
            _ => 1.0,
        }
    }

    fn variables(&self) -> Vec<usize> {
        match self {
            Constraint::Linear(f) => f.terms.iter().map(|t| t.0).collect(),
            Constraint::Hyperbolic { a, b, .. } => vec![*a, *b],
            Constraint::QuadraticUnderLinear { rows, bound } => rows
                .iter()
                .chain(std::iter::once(bound))
                .flat_map(|r| r.terms.iter().map(|t| t.0))
                .collect(),
        }
    }

    /// Adds the barrier gradient and Hessian of this constraint and returns
    /// the barrier value, or `None` outside the domain.
    fn accumulate(&self, x: &[f64], grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) -> Option<f64> {
        match self {
            Constraint::Linear(f) => {
                let s = -f.eval(x);
                if s <= 0.0 {
                    return None;
                }
                for &(i, ai) in &f.terms {
                    grad[i] += ai / s;
                    for &(k, ak) in &f.terms {
                        hess[(i, k)] += ai * ak / (s * s);
                    }
                }
                Some(-s.ln())
            }
            Constraint::Hyperbolic { a, b, c } => {
                let (u, v) = (x[*a], x[*b]);
                let g = u * v - c;
                if u <= 0.0 || v <= 0.0 || g <= 0.0 {
                    return None;
                }
                // −ln(uv − c) − ln u − ln v
                grad[*a] += -v / g - 1.0 / u;
                grad[*b] += -u / g - 1.0 / v;
                hess[(*a, *a)] += v * v / (g * g) + 1.0 / (u * u);
                hess[(*b, *b)] += u * u / (g * g) + 1.0 / (v * v);
                let off = c / (g * g);
                hess[(*a, *b)] += off;
                hess[(*b, *a)] += off;
                Some(-g.ln() - u.ln() - v.ln())
            }
            Constraint::QuadraticUnderLinear { rows, bound } => {
                let s = self.slack(x);
                if s <= 0.0 {
                    return None;
                }
                // s = bound − Σ r², ∇s = ∇bound − 2 Σ r ∇r, ∇²s = −2 Σ ∇r ∇rᵀ
                let n = grad.len();
                let mut ds = DVector::<f64>::zeros(n);
                for &(i, a) in &bound.terms {
                    ds[i] += a;
                }
                for r in rows {
                    let rv = r.eval(x);
                    for &(i, a) in &r.terms {
                        ds[i] -= 2.0 * rv * a;
                    }
                }
                for i in 0..n {
                    if ds[i] != 0.0 {
                        grad[i] -= ds[i] / s;
                    }
                }
                let idx = self.variables();
                let mut touched: Vec<usize> = idx;
                touched.sort_unstable();
                touched.dedup();
                for &i in &touched {
                    for &k in &touched {
                        hess[(i, k)] += ds[i] * ds[k] / (s * s);
                    }
                }
                for r in rows {
                    for &(i, ai) in &r.terms {
                        for &(k, ak) in &r.terms {
                            hess[(i, k)] += 2.0 * ai * ak / s;
                        }
                    }
                }
                Some(-s.ln())
            }
        }
    }
}

/// Minimize `objective · x` subject to `constraints`.
#[derive(Debug, Clone, Default)]
pub struct ConvexSubproblem {
    pub names: Vec<String>,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl ConvexSubproblem {
    pub fn add_variable(&mut self, name: impl Into<String>, cost: f64) -> usize {
        self.names.push(name.into());
        self.objective.push(cost);
        self.names.len() - 1
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.names.len();
        if self.objective.len() != n {
            return Err(Error::Validation("objective length differs from variable count".into()));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if c.variables().iter().any(|&i| i >= n) {
                return Err(Error::Validation(format!("constraint {k} references an undeclared variable")));
            }
            if let Constraint::Hyperbolic { c, .. } = c {
                if *c < 0.0 {
                    return Err(Error::Validation(format!("hyperbolic constraint {k} has negative bound")));
                }
            }
        }
        Ok(())
    }

    fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    /// Bound on the barrier duality gap `ν / t`.
    pub tol: f64,
    pub max_newton: usize,
    pub t0: f64,
    pub growth: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_newton: 2000,
            t0: 1.0,
            growth: 20.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub names: Vec<String>,
    pub x: Vec<f64>,
    pub objective: f64,
    pub newton_steps: usize,
}

impl SubproblemSolution {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.x[i])
    }
}

pub fn solve_subproblem(p: &ConvexSubproblem, start: &[f64], tol: f64) -> Result<SubproblemSolution> {
    solve_subproblem_with(p, start, &BarrierOptions { tol, ..Default::default() })
}

pub fn solve_subproblem_with(p: &ConvexSubproblem, start: &[f64], opts: &BarrierOptions) -> Result<SubproblemSolution> {
    p.validate()?;
    let n = p.names.len();
    if start.len() != n {
        return Err(Error::Validation("start point has the wrong length".into()));
    }
    for (k, c) in p.constraints.iter().enumerate() {
        let s = c.slack(start);
        if !(s > 0.0) {
            return Err(Error::Infeasible {
                constraint: k,
                violation: -s,
            });
        }
    }
    let nu: f64 = p.constraints.iter().map(Constraint::barrier_weight).sum();
    let cost = DVector::from_column_slice(&p.objective);
    let start_obj = p.objective_value(start);
    let mut x = start.to_vec();
    let mut t = opts.t0;
    let mut steps = 0;

    let eval = |x: &[f64], t: f64, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>| -> Option<f64> {
        grad.copy_from(&(&cost * t));
        hess.fill(0.0);
        let mut f = t * p.objective_value(x);
        for c in &p.constraints {
            f += c.accumulate(x, grad, hess)?;
        }
        Some(f)
    };
    let value = |x: &[f64], t: f64| -> Option<f64> {
        let mut f = t * p.objective_value(x);
        for c in &p.constraints {
            let s = c.slack(x);
            if !(s > 0.0) {
                return None;
            }
            f -= match c {
                Constraint::Hyperbolic { a, b, .. } => s.ln() + x[*a].ln() + x[*b].ln(),
                _ => s.ln(),
            };
        }
        Some(f)
    };

    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    loop {
        // Centering.
        let mut inner = 0;
        loop {
            inner += 1;
            if steps >= opts.max_newton {
                return Err(Error::solver("barrier Newton iterations exhausted", steps, vec![nu / t]));
            }
            let Some(f) = eval(&x, t, &mut grad, &mut hess) else {
                return Err(Error::solver("iterate left the barrier domain", steps, vec![nu / t]));
            };
            let dx = newton_step(&hess, &grad);
            let decrement = -grad.dot(&dx);
            steps += 1;
            if !(decrement.is_finite()) {
                return Err(Error::solver("non-finite Newton step", steps, vec![nu / t]));
            }
            if decrement / 2.0 <= 1e-10 || inner > 60 {
                break;
            }
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(v, d)| v + alpha * d).collect();
                if let Some(ft) = value(&trial, t) {
                    if ft <= f - 0.25 * alpha * decrement {
                        // Progress below rounding level of f ends centering.
                        accepted = f - ft > 1e-15 * f.abs();
                        x = trial;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if nu / t <= opts.tol {
            break;
        }
        t *= opts.growth;
    }

    let objective = p.objective_value(&x);
    if objective > start_obj {
        x = start.to_vec();
    }
    Ok(SubproblemSolution {
        names: p.names.clone(),
        objective: p.objective_value(&x),
        x,
        newton_steps: steps,
    })
}

fn newton_step(hess: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let n = hess.nrows();
    let scale = (0..n).map(|i| hess[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..20 {
        let mut h = hess.clone();
        for i in 0..n {
            h[(i, i)] += reg;
        }
        if let Some(ch) = h.cholesky() {
            return -ch.solve(grad);
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 10.0 };
    }
    -grad.clone() / scale
}
