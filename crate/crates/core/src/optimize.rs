//! Box-constrained Nelder-Mead.
//!
//! Trial points are projected onto the box. Dimensions with `lower == upper`
//! are held fixed and excluded from the simplex.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SliError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Bounds { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(SliError::InvalidBounds("lower and upper differ in length".into()));
        }
        for (i, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) || l > u {
                return Err(SliError::InvalidBounds(format!("component {i}: [{l}, {u}]")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.len() && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxOptions {
    /// Spread of objective values over the simplex.
    pub f_tol: f64,
    /// Largest coordinate distance from the best vertex.
    pub x_tol: f64,
    pub max_iterations: usize,
    pub max_evaluations: usize,
    /// Initial simplex edge as a fraction of each box width.
    pub initial_step: f64,
    /// Fresh simplices started from the best point after convergence.
    pub restarts: usize,
}

impl Default for BoxOptions {
    fn default() -> Self {
        BoxOptions { f_tol: 1e-4, x_tol: 1e-4, max_iterations: 10_000, max_evaluations: 10_000, initial_step: 0.1, restarts: 2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    MaxEvaluations,
    /// Every parameter is pinned.
    NoFreeParameters,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxMinimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub f_initial: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Best objective value after each iteration.
    pub trace: Vec<f64>,
}

struct Counted<'a, F> {
    f: &'a mut F,
    bounds: &'a Bounds,
    free: &'a [usize],
    base: Vec<f64>,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<'_, F> {
    fn full(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.base.clone();
        for (&i, &v) in self.free.iter().zip(y) {
            x[i] = v.clamp(self.bounds.lower[i], self.bounds.upper[i]);
        }
        x
    }

    fn eval(&mut self, y: &mut [f64]) -> f64 {
        for (&i, v) in self.free.iter().zip(y.iter_mut()) {
            *v = v.clamp(self.bounds.lower[i], self.bounds.upper[i]);
        }
        let x = self.full(y);
        self.evaluations += 1;
        let v = (self.f)(&x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Minimizes `f` over the box starting from `x0`.
///
/// `f` may return a non-finite value to reject a point; the initial point
/// must evaluate finite.
pub fn minimize_box<F>(mut f: F, x0: &[f64], bounds: &Bounds, options: &BoxOptions) -> Result<BoxMinimum>
where
    F: FnMut(&[f64]) -> f64,
{
    bounds.validate()?;
    if x0.len() != bounds.len() {
        return Err(SliError::DimensionMismatch(format!("initial point has {} entries, bounds {}", x0.len(), bounds.len())));
    }
    if !bounds.contains(x0) {
        return Err(SliError::InvalidBounds("initial point lies outside the bounds".into()));
    }
    let free: Vec<usize> = (0..x0.len()).filter(|&i| bounds.lower[i] < bounds.upper[i]).collect();
    let mut obj = Counted { f: &mut f, bounds, free: &free, base: x0.to_vec(), evaluations: 0 };
    let mut y0: Vec<f64> = free.iter().map(|&i| x0[i]).collect();
    let f0 = obj.eval(&mut y0);
    if !f0.is_finite() {
        return Err(SliError::NonFiniteObjective);
    }
    if free.is_empty() {
        return Ok(BoxMinimum {
            x: x0.to_vec(),
            f: f0,
            f_initial: f0,
            iterations: 0,
            evaluations: 1,
            termination: Termination::NoFreeParameters,
            trace: vec![f0],
        });
    }

    let mut best = (y0, f0);
    let mut iterations = 0;
    let mut trace = vec![f0];
    let mut termination;
    let mut round = 0;
    loop {
        let start_f = best.1;
        let (y, fy, t) = run_simplex(&mut obj, best.clone(), options, &mut iterations, &mut trace);
        if fy <= best.1 {
            best = (y, fy);
        }
        termination = t;
        round += 1;
        let improved = start_f - best.1 > options.f_tol;
        if termination != Termination::Converged || round > options.restarts || (round > 1 && !improved) {
            break;
        }
    }
    let x = obj.full(&best.0);
    let evaluations = obj.evaluations;
    Ok(BoxMinimum { x, f: best.1, f_initial: f0, iterations, evaluations, termination, trace })
}

fn run_simplex<F: FnMut(&[f64]) -> f64>(
    obj: &mut Counted<'_, F>,
    start: (Vec<f64>, f64),
    options: &BoxOptions,
    iterations: &mut usize,
    trace: &mut Vec<f64>,
) -> (Vec<f64>, f64, Termination) {
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;

    let n = obj.free.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push(start.clone());
    for j in 0..n {
        let i = obj.free[j];
        let (lo, hi) = (obj.bounds.lower[i], obj.bounds.upper[i]);
        let step = options.initial_step * (hi - lo);
        let mut y = start.0.clone();
        y[j] = if y[j] + step <= hi { y[j] + step } else { y[j] - step };
        let fy = obj.eval(&mut y);
        simplex.push((y, fy));
    }

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (fb, fw) = (simplex[0].1, simplex[n].1);
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|(y, _)| y.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if fw.is_finite() && (fw - fb).abs() <= options.f_tol && x_spread <= options.x_tol {
            return (simplex[0].0.clone(), fb, Termination::Converged);
        }
        if *iterations >= options.max_iterations {
            return (simplex[0].0.clone(), fb, Termination::MaxIterations);
        }
        if obj.evaluations >= options.max_evaluations {
            return (simplex[0].0.clone(), fb, Termination::MaxEvaluations);
        }
        *iterations += 1;

        let mut centroid = vec![0.0; n];
        for (y, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(y) {
                *c += v / n as f64;
            }
        }
        let along = |coef: f64, from: &[f64]| -> Vec<f64> {
            centroid.iter().zip(from).map(|(c, w)| c + coef * (c - w)).collect()
        };
        let worst = simplex[n].0.clone();
        let mut xr = along(ALPHA, &worst);
        let fr = obj.eval(&mut xr);
        if fr < simplex[0].1 {
            let mut xe = along(GAMMA, &worst);
            let fe = obj.eval(&mut xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (mut xc, outside) = if fr < simplex[n].1 { (along(RHO, &worst), true) } else { (along(-RHO, &worst), false) };
            let fc = obj.eval(&mut xc);
            if (outside && fc <= fr) || (!outside && fc < simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let mut y: Vec<f64> = best.iter().zip(&v.0).map(|(b, x)| b + SIGMA * (x - b)).collect();
                    let fy = obj.eval(&mut y);
                    *v = (y, fy);
                }
            }
        }
        trace.push(simplex.iter().map(|s| s.1).fold(f64::INFINITY, f64::min));
    }
}
