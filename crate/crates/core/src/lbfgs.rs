//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! The minimiser is exposed both as a one-shot driver ([`minimize`]) and as
//! a stepper ([`Lbfgs`]) so that callers with their own termination logic
//! (the K-means relaxation snaps to centroids before declaring convergence)
//! can drive the iterations themselves.

use std::collections::VecDeque;

use crate::scalar::{dot, norm, Scalar};

/// Objective with analytic gradient. `eval` writes the gradient into `grad`
/// and returns the function value.
pub trait Objective<T> {
    fn eval(&mut self, x: &[T], grad: &mut [T]) -> T;
}

impl<T, F> Objective<T> for F
where
    F: FnMut(&[T], &mut [T]) -> T,
{
    fn eval(&mut self, x: &[T], grad: &mut [T]) -> T {
        self(x, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig<T> {
    /// Number of stored correction pairs.
    pub history: usize,
    pub max_iter: usize,
    /// Converged when `|g| < grad_tol * (1 + |f|)`.
    pub grad_tol: T,
    /// Upper bound on the Euclidean length of a single step.
    pub max_step: Option<T>,
    /// Sufficient-decrease constant.
    pub c1: T,
    /// Curvature constant.
    pub c2: T,
    pub max_line_search: usize,
}

impl<T: Scalar> Default for LbfgsConfig<T> {
    fn default() -> Self {
        LbfgsConfig {
            history: 10,
            max_iter: 10_000,
            grad_tol: T::default_tol(),
            max_step: None,
            c1: T::lit(1e-4),
            c2: T::lit(0.9),
            max_line_search: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    /// Accepted a step with sufficient decrease.
    Moved,
    /// No decreasing step along either the quasi-Newton or the steepest
    /// descent direction.
    Stalled,
}

/// Iteration state of an L-BFGS run.
#[derive(Debug, Clone)]
pub struct Lbfgs<T> {
    cfg: LbfgsConfig<T>,
    x: Vec<T>,
    f: T,
    g: Vec<T>,
    pairs: VecDeque<(Vec<T>, Vec<T>, T)>,
    evaluations: usize,
    iterations: usize,
}

#[derive(Debug, Clone)]
pub struct LbfgsReport<T> {
    pub x: Vec<T>,
    pub f: T,
    pub grad_norm: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl<T: Scalar> Lbfgs<T> {
    pub fn new<O: Objective<T>>(obj: &mut O, x0: Vec<T>, cfg: LbfgsConfig<T>) -> Self {
        let mut g = vec![T::zero(); x0.len()];
        let f = obj.eval(&x0, &mut g);
        Lbfgs {
            cfg,
            x: x0,
            f,
            g,
            pairs: VecDeque::with_capacity(cfg.history),
            evaluations: 1,
            iterations: 0,
        }
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn f(&self) -> T {
        self.f
    }

    pub fn grad(&self) -> &[T] {
        &self.g
    }

    pub fn grad_norm(&self) -> T {
        norm(&self.g)
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn is_converged(&self) -> bool {
        self.grad_norm() < self.cfg.grad_tol * (T::one() + self.f.abs())
    }

    /// Moves to a new point chosen by the caller, discarding curvature history.
    pub fn reset_at<O: Objective<T>>(&mut self, obj: &mut O, x: Vec<T>) {
        self.f = obj.eval(&x, &mut self.g);
        self.x = x;
        self.pairs.clear();
        self.evaluations += 1;
    }

    /// Performs one quasi-Newton iteration.
    pub fn step<O: Objective<T>>(&mut self, obj: &mut O) -> StepOutcome {
        self.iterations += 1;
        let d = self.direction();
        if let Some(accepted) = self.line_search(obj, &d) {
            self.accept(accepted);
            return StepOutcome::Moved;
        }
        // quasi-Newton model is stale: retry along steepest descent
        self.pairs.clear();
        let d: Vec<T> = self.g.iter().map(|&gi| -gi).collect();
        match self.line_search(obj, &d) {
            Some(accepted) => {
                self.accept(accepted);
                StepOutcome::Moved
            }
            None => StepOutcome::Stalled,
        }
    }

    fn accept(&mut self, (x, f, g): (Vec<T>, T, Vec<T>)) {
        let s: Vec<T> = x.iter().zip(&self.x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = g.iter().zip(&self.g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * norm(&s) * norm(&y) && sy > T::zero() {
            if self.pairs.len() == self.cfg.history {
                self.pairs.pop_front();
            }
            self.pairs.push_back((s, y, T::one() / sy));
        }
        self.x = x;
        self.f = f;
        self.g = g;
    }

    /// Two-loop recursion for `-H g`.
    fn direction(&self) -> Vec<T> {
        let mut q = self.g.clone();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = *rho * dot(s, &q);
            for (qi, &yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = match self.pairs.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => {
                let gn = norm(&self.g);
                if gn > T::zero() {
                    T::one() / gn
                } else {
                    T::one()
                }
            }
        };
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = *rho * dot(y, &q);
            for (qi, &si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let d: Vec<T> = q.into_iter().map(|v| -v).collect();
        if dot(&d, &self.g) < T::zero() {
            d
        } else {
            self.g.iter().map(|&gi| -gi * gamma).collect()
        }
    }

    /// Strong-Wolfe line search along `d`. Returns the accepted point, or
    /// `None` when no sufficient decrease was found.
    fn line_search<O: Objective<T>>(
        &mut self,
        obj: &mut O,
        d: &[T],
    ) -> Option<(Vec<T>, T, Vec<T>)> {
        let f0 = self.f;
        let dphi0 = dot(&self.g, d);
        if !(dphi0 < T::zero()) {
            return None;
        }
        let dnorm = norm(d);
        let alpha_max = match self.cfg.max_step {
            Some(m) => m / dnorm,
            None => T::infinity(),
        };
        let c1 = self.cfg.c1;
        let c2 = self.cfg.c2;
        let two = T::lit(2.0);

        let mut probe = |alpha: T, this: &mut Self| -> (Vec<T>, T, Vec<T>, T) {
            let x: Vec<T> = this
                .x
                .iter()
                .zip(d)
                .map(|(&xi, &di)| xi + alpha * di)
                .collect();
            let mut g = vec![T::zero(); x.len()];
            let f = obj.eval(&x, &mut g);
            this.evaluations += 1;
            let dphi = dot(&g, d);
            (x, f, g, dphi)
        };

        // Near a minimum with stiff curvature the decrease in f drops below
        // roundoff; there the derivative decides (approximate Wolfe test).
        let noise = T::lit(16.0) * T::epsilon() * (T::one() + f0.abs());
        let armijo = |alpha: T, f: T, dphi: T| {
            (f <= f0 + c1 * alpha * dphi0 && f < f0)
                || (f <= f0 + noise && dphi <= (T::one() - c1 - c1) * -dphi0)
        };

        let mut alpha_prev = T::zero();
        let mut f_prev = f0;
        let mut dphi_prev = dphi0;
        let mut prev_point: Option<(Vec<T>, T, Vec<T>)> = None;
        let mut alpha = T::one().min(alpha_max);

        // bracketing phase
        let (mut lo, mut hi) = 'bracket: {
            for i in 0..self.cfg.max_line_search {
                let (x, f, g, dphi) = probe(alpha, self);
                if !f.is_finite() || !armijo(alpha, f, dphi) || (i > 0 && f > f_prev + noise) {
                    break 'bracket (
                        (alpha_prev, f_prev, dphi_prev, prev_point.take()),
                        (alpha, f, dphi),
                    );
                }
                if dphi.abs() <= -c2 * dphi0 {
                    return Some((x, f, g));
                }
                if dphi >= T::zero() {
                    break 'bracket (
                        (alpha, f, dphi, Some((x, f, g))),
                        (alpha_prev, f_prev, dphi_prev),
                    );
                }
                if alpha >= alpha_max {
                    // capped step already satisfies sufficient decrease
                    return Some((x, f, g));
                }
                alpha_prev = alpha;
                f_prev = f;
                dphi_prev = dphi;
                prev_point = Some((x, f, g));
                alpha = (alpha * two).min(alpha_max);
            }
            return prev_point;
        };

        // zoom phase; `lo` always satisfies sufficient decrease (or is the origin)
        for _ in 0..self.cfg.max_line_search {
            let (a_lo, f_lo, dp_lo) = (lo.0, lo.1, lo.2);
            let (a_hi, f_hi, dp_hi) = hi;
            let width = (a_hi - a_lo).abs();
            if width <= T::epsilon() * a_lo.abs().max(T::one()) {
                break;
            }
            let trial = cubic_min(a_lo, f_lo, dp_lo, a_hi, f_hi, dp_hi);
            let lower = a_lo.min(a_hi);
            let upper = a_lo.max(a_hi);
            let margin = T::lit(0.1) * width;
            let alpha = match trial {
                Some(t) if t > lower + margin && t < upper - margin => t,
                _ => (a_lo + a_hi) / two,
            };
            let (x, f, g, dphi) = probe(alpha, self);
            if !f.is_finite() || !armijo(alpha, f, dphi) || f > f_lo + noise {
                hi = (alpha, f, dphi);
            } else {
                if dphi.abs() <= -c2 * dphi0 {
                    return Some((x, f, g));
                }
                if dphi * (a_hi - a_lo) >= T::zero() {
                    hi = (a_lo, f_lo, dp_lo);
                }
                lo = (alpha, f, dphi, Some((x, f, g)));
            }
        }
        lo.3
    }
}

/// Minimiser of the cubic interpolating two points with derivatives.
fn cubic_min<T: Scalar>(a: T, fa: T, da: T, b: T, fb: T, db: T) -> Option<T> {
    let d1 = da + db - T::lit(3.0) * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < T::zero() || !disc.is_finite() {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = db - da + T::lit(2.0) * d2;
    if denom == T::zero() {
        return None;
    }
    let t = b - (b - a) * (db + d2 - d1) / denom;
    t.is_finite().then_some(t)
}

/// Runs L-BFGS from `x0` until the gradient test passes, the iteration
/// budget is spent, or the line search stalls.
pub fn minimize<T: Scalar, O: Objective<T>>(
    obj: &mut O,
    x0: Vec<T>,
    cfg: LbfgsConfig<T>,
) -> LbfgsReport<T> {
    let mut state = Lbfgs::new(obj, x0, cfg);
    while !state.is_converged() && state.iterations() < cfg.max_iter {
        if state.step(obj) == StepOutcome::Stalled {
            break;
        }
    }
    LbfgsReport {
        converged: state.is_converged(),
        grad_norm: state.grad_norm(),
        iterations: state.iterations,
        evaluations: state.evaluations,
        f: state.f,
        x: state.x,
    }
}
