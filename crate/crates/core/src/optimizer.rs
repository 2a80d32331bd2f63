//! Limited-memory BFGS with a strong-Wolfe line search.

// The negated comparisons below are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::VecDeque;

use crate::error::{Result, SynthError};

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Stop once the largest gradient component is at most this.
    pub gradient_tolerance: f64,
    /// Number of `(s, y)` correction pairs kept.
    pub memory: usize,
    /// Function evaluations allowed per line search.
    pub max_line_search: usize,
    /// Stop when an iteration reduces `f` by no more than
    /// `f_tolerance * max(|f|, 1)`. Zero disables the test.
    pub f_tolerance: f64,
    /// Stop as soon as `f` is at or below this value.
    pub target: Option<f64>,
    pub c1: f64,
    pub c2: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iterations: 1000,
            gradient_tolerance: 1e-9,
            memory: 10,
            max_line_search: 20,
            f_tolerance: 0.0,
            target: None,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

impl MinimizeOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.memory == 0 || self.max_line_search == 0 {
            return Err(SynthError::invalid("optimizer limits must be positive"));
        }
        if !(self.gradient_tolerance > 0.0) || self.f_tolerance < 0.0 {
            return Err(SynthError::invalid("optimizer tolerances must be positive"));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(SynthError::invalid("line search needs 0 < c1 < c2 < 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    /// True when a stopping test fired (gradient, function change or
    /// target), false when the iteration budget ran out or the line search
    /// could make no further progress.
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

struct Evaluator<'a, F> {
    objective: &'a mut F,
    last_good: Vec<f64>,
}

impl<F> Evaluator<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn eval(&mut self, x: Vec<f64>) -> Result<Point> {
        let (f, g) = (self.objective)(&x)?;
        if g.len() != x.len() {
            return Err(SynthError::invalid(format!(
                "objective returned {} gradient entries for {} parameters",
                g.len(),
                x.len()
            )));
        }
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(SynthError::NumericalFailure {
                message: "objective returned a non-finite value".into(),
                last_x: self.last_good.clone(),
            });
        }
        self.last_good.clone_from(&x);
        Ok(Point { x, f, g })
    }
}

/// Minimizes `objective` starting from `x0`. The objective returns the value
/// and gradient at a point.
pub fn minimize<F>(mut objective: F, x0: &[f64], opts: &MinimizeOptions) -> Result<MinimizeResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    opts.validate()?;
    let mut evaluator = Evaluator {
        objective: &mut objective,
        last_good: x0.to_vec(),
    };
    let mut current = evaluator.eval(x0.to_vec())?;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;

    let done = |p: &Point| inf_norm(&p.g) <= opts.gradient_tolerance || opts.target.is_some_and(|t| p.f <= t);
    if x0.is_empty() || done(&current) {
        return Ok(MinimizeResult {
            x: current.x,
            f: current.f,
            iterations,
            converged: true,
        });
    }

    let mut converged = false;
    while iterations < opts.max_iterations {
        let mut direction = two_loop(&current.g, &history);
        let mut slope = dot(&direction, &current.g);
        if !(slope < 0.0) {
            history.clear();
            direction = current.g.iter().map(|v| -v).collect();
            slope = dot(&direction, &current.g);
        }
        let initial_step = if history.is_empty() {
            (1.0 / dot(&current.g, &current.g).sqrt()).min(1.0)
        } else {
            1.0
        };

        let next = match line_search(&mut evaluator, &current, &direction, slope, initial_step, opts)? {
            Some(p) => p,
            None if !history.is_empty() => {
                // Stale curvature pairs can produce a useless direction.
                history.clear();
                continue;
            }
            None => break,
        };
        iterations += 1;

        let s: Vec<f64> = next.x.iter().zip(&current.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&current.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let decrease = current.f - next.f;
        current = next;
        if done(&current) {
            converged = true;
            break;
        }
        if opts.f_tolerance > 0.0 && decrease <= opts.f_tolerance * current.f.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    Ok(MinimizeResult {
        x: current.x,
        f: current.f,
        iterations,
        converged,
    })
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

struct Trial {
    step: f64,
    point: Point,
    slope: f64,
}

/// Strong-Wolfe line search (bracketing followed by zoom). Returns `None`
/// when no step with sufficient decrease could be found.
fn line_search<F>(
    evaluator: &mut Evaluator<'_, F>,
    start: &Point,
    direction: &[f64],
    slope0: f64,
    initial_step: f64,
    opts: &MinimizeOptions,
) -> Result<Option<Point>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let f0 = start.f;
    let mut evals = 0;
    let probe = |ev: &mut Evaluator<'_, F>, step: f64| -> Result<Trial> {
        let x: Vec<f64> = start.x.iter().zip(direction).map(|(x, d)| x + step * d).collect();
        let point = ev.eval(x)?;
        let slope = dot(&point.g, direction);
        Ok(Trial { step, point, slope })
    };
    let armijo = |t: &Trial| t.point.f <= f0 + opts.c1 * t.step * slope0;
    let curvature = |t: &Trial| t.slope.abs() <= -opts.c2 * slope0;

    let mut prev = Trial {
        step: 0.0,
        point: Point {
            x: start.x.clone(),
            f: f0,
            g: start.g.clone(),
        },
        slope: slope0,
    };
    let mut step = initial_step;
    let (mut lo, mut hi);
    loop {
        let trial = probe(evaluator, step)?;
        evals += 1;
        if !armijo(&trial) || (evals > 1 && trial.point.f >= prev.point.f) {
            lo = prev;
            hi = trial;
            break;
        }
        if curvature(&trial) {
            return Ok(Some(trial.point));
        }
        if trial.slope >= 0.0 {
            lo = trial;
            hi = prev;
            break;
        }
        if evals >= opts.max_line_search {
            return Ok(Some(trial.point));
        }
        step *= 2.0;
        prev = trial;
    }

    // zoom: `lo` always satisfies sufficient decrease and has the lowest f
    // seen among such points.
    while evals < opts.max_line_search {
        let (a, b) = (lo.step, hi.step);
        let width = (b - a).abs();
        if width < 1e-16 * a.abs().max(1.0) {
            break;
        }
        let mut step = cubic_minimizer(&lo, &hi).unwrap_or(0.5 * (a + b));
        let (left, right) = (a.min(b), a.max(b));
        let margin = 0.1 * width;
        if !(step > left + margin && step < right - margin) {
            step = 0.5 * (a + b);
        }
        let trial = probe(evaluator, step)?;
        evals += 1;
        if !armijo(&trial) || trial.point.f >= lo.point.f {
            hi = trial;
        } else {
            if curvature(&trial) {
                return Ok(Some(trial.point));
            }
            if trial.slope * (hi.step - lo.step) >= 0.0 {
                hi = lo;
            }
            lo = trial;
        }
    }
    if lo.step > 0.0 && lo.point.f < f0 {
        Ok(Some(lo.point))
    } else {
        Ok(None)
    }
}

/// Minimizer of the cubic interpolating value and slope at both ends.
fn cubic_minimizer(a: &Trial, b: &Trial) -> Option<f64> {
    let (x0, f0, d0) = (a.step, a.point.f, a.slope);
    let (x1, f1, d1) = (b.step, b.point.f, b.slope);
    let d1_ = d0 + d1 - 3.0 * (f0 - f1) / (x0 - x1);
    let disc = d1_ * d1_ - d0 * d1;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (x1 - x0).signum() * disc.sqrt();
    let denom = d1 - d0 + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let x = x1 - (x1 - x0) * (d1 + d2 - d1_) / denom;
    x.is_finite().then_some(x)
}
