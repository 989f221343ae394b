//! Box-constrained first-order minimisation: limited-memory BFGS or plain
//! gradient descent, both with backtracking on the Armijo condition.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentMethod {
    Lbfgs,
    GradientDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub method: DescentMethod,
    /// Gradient-descent step, and the length of the first quasi-Newton step.
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Stop once the relative loss decrease falls to this level.
    pub tol: f64,
    pub lbfgs_memory: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: DescentMethod::Lbfgs,
            learning_rate: 1e-2,
            max_iters: 500,
            tol: 1e-7,
            lbfgs_memory: 10,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::invalid(format!("tolerance {} must be non-negative", self.tol)));
        }
        if self.lbfgs_memory == 0 {
            return Err(Error::invalid("L-BFGS memory must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub converged: bool,
    /// Loss after every accepted step, starting with the initial loss.
    pub trace: Vec<f64>,
}

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn project<T: Real>(x: &mut [T], bounds: &[(T, T)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.max(*lo).min(*hi);
    }
}

/// Zeroes direction components that push an active bound outward.
fn mask_active<T: Real>(x: &[T], d: &mut [T], bounds: &[(T, T)]) {
    for ((v, di), (lo, hi)) in x.iter().zip(d.iter_mut()).zip(bounds) {
        if (*v <= *lo && *di < T::zero()) || (*v >= *hi && *di > T::zero()) {
            *di = T::zero();
        }
    }
}

/// A differentiable loss. `None` marks points where the loss is undefined,
/// which the line search treats as an infinite loss.
pub trait Objective<T> {
    fn value(&self, x: &[T]) -> Option<T>;

    fn gradient(&self, x: &[T]) -> Option<Vec<T>>;

    fn value_grad(&self, x: &[T]) -> Option<(T, Vec<T>)> {
        Some((self.value(x)?, self.gradient(x)?))
    }
}

impl<T, F: Fn(&[T]) -> Option<(T, Vec<T>)>> Objective<T> for F {
    fn value(&self, x: &[T]) -> Option<T> {
        self(x).map(|r| r.0)
    }

    fn gradient(&self, x: &[T]) -> Option<Vec<T>> {
        self(x).map(|r| r.1)
    }

    fn value_grad(&self, x: &[T]) -> Option<(T, Vec<T>)> {
        self(x)
    }
}

/// Minimises `f` from `x0`. `bounds` is empty or holds one `(lo, hi)` per
/// coordinate. Gradients are only requested at accepted points.
pub fn minimize<T: Real, O>(f: &O, x0: &[T], bounds: &[(T, T)], cfg: &OptimizerConfig) -> Result<MinimizeResult<T>>
where
    O: Objective<T> + ?Sized,
{
    cfg.validate()?;
    let n = x0.len();
    let bounds: Vec<(T, T)> = if bounds.is_empty() {
        vec![(T::neg_infinity(), T::infinity()); n]
    } else if bounds.len() == n {
        bounds.to_vec()
    } else {
        return Err(Error::invalid(format!("{} bounds for {n} variables", bounds.len())));
    };
    let mut x = x0.to_vec();
    project(&mut x, &bounds);
    let (mut fx, mut g) = match f.value_grad(&x) {
        Some((v, g)) if v.is_finite() && g.iter().all(|c| c.is_finite()) => (v, g),
        other => {
            return Err(Error::Diverged {
                iteration: 0,
                reason: "initial loss or gradient is not finite".into(),
                trace: other.map(|(v, _)| vec![v.to_f64_lossy()]).unwrap_or_default(),
            })
        }
    };
    let mut trace = vec![fx.to_f64_lossy()];
    let lr = T::lit(cfg.learning_rate);
    let c1 = T::lit(ARMIJO_C);
    let half = T::lit(0.5);
    let mut mem: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(cfg.lbfgs_memory);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        let use_memory = cfg.method == DescentMethod::Lbfgs && !mem.is_empty();
        let mut d = if use_memory {
            two_loop(&g, &mem)
        } else {
            g.iter().map(|v| -*v).collect()
        };
        mask_active(&x, &mut d, &bounds);
        let mut slope = dot(&g, &d);
        if use_memory && !(slope < T::zero()) {
            mem.clear();
            d = g.iter().map(|v| -*v).collect();
            mask_active(&x, &mut d, &bounds);
            slope = dot(&g, &d);
        }
        if !(slope < T::zero()) {
            // Projected gradient vanishes.
            converged = true;
            break;
        }
        let mut alpha = if !mem.is_empty() {
            T::one()
        } else if cfg.method == DescentMethod::Lbfgs {
            lr / dot(&d, &d).sqrt()
        } else {
            lr
        };

        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut xn: Vec<T> = x.iter().zip(&d).map(|(a, b)| *a + alpha * *b).collect();
            project(&mut xn, &bounds);
            let step: Vec<T> = xn.iter().zip(&x).map(|(a, b)| *a - *b).collect();
            if let Some(fv) = f.value(&xn) {
                if fv.is_finite() && fv <= fx + c1 * dot(&g, &step) {
                    accepted = Some((xn, fv, step));
                    break;
                }
            }
            alpha *= half;
        }
        let Some((xn, fv, step)) = accepted else {
            if !mem.is_empty() {
                mem.clear();
                continue;
            }
            log::debug!("line search stalled at iteration {iterations}");
            converged = true;
            break;
        };
        iterations += 1;
        let gv = match f.gradient(&xn) {
            Some(gv) if gv.iter().all(|c| c.is_finite()) => gv,
            _ => {
                trace.push(fv.to_f64_lossy());
                return Err(Error::Diverged {
                    iteration: iterations,
                    reason: "gradient is not finite".into(),
                    trace,
                });
            }
        };
        let y: Vec<T> = gv.iter().zip(&g).map(|(a, b)| *a - *b).collect();
        let sy = dot(&step, &y);
        if cfg.method == DescentMethod::Lbfgs && sy > T::epsilon() * dot(&y, &y) {
            if mem.len() == cfg.lbfgs_memory {
                mem.pop_front();
            }
            mem.push_back((step, y, T::one() / sy));
        }
        let decrease = fx - fv;
        x = xn;
        fx = fv;
        g = gv;
        trace.push(fx.to_f64_lossy());
        if decrease <= T::lit(cfg.tol) * fx.abs().max(T::min_positive_value()) {
            converged = true;
            break;
        }
    }
    Ok(MinimizeResult {
        x,
        value: fx,
        iterations,
        converged,
        trace,
    })
}

/// Two-loop recursion: `-H g` with `H0 = (s.y / y.y) I`.
fn two_loop<T: Real>(g: &[T], mem: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * *yi;
        }
        alphas.push(a);
    }
    let (s, y, _) = mem.back().expect("non-empty memory");
    let gamma = dot(s, y) / dot(y, y);
    for v in q.iter_mut() {
        *v *= gamma;
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * *si;
        }
    }
    q.iter().map(|v| -*v).collect()
}

/// Central-difference gradient of `f` at `x`, coordinates in parallel.
pub fn central_gradient<T: Real, F>(f: F, x: &[T], step: T) -> Result<Vec<T>>
where
    F: Fn(&[T]) -> Option<T> + Sync,
{
    let two_h = step + step;
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let mut p = x.to_vec();
            p[i] = x[i] + step;
            let fp = f(&p);
            p[i] = x[i] - step;
            let fm = f(&p);
            match (fp, fm) {
                (Some(a), Some(b)) if a.is_finite() && b.is_finite() => Ok((a - b) / two_h),
                _ => Err(Error::NonFinite {
                    what: format!("loss near coordinate {i}"),
                }),
            }
        })
        .collect()
}
