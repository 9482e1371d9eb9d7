//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsConfig {
    /// Number of stored `(s, y)` pairs.
    pub memory: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Stop when `‖g‖∞` falls below this.
    pub grad_tol: f64,
    /// Stop when accepted steps change the cost by less than this ...
    pub f_tol: f64,
    /// ... for this many consecutive iterations.
    pub f_tol_patience: usize,
    pub max_iterations: usize,
    /// Function evaluations allowed per line search.
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            c1: 1e-4,
            c2: 0.9,
            grad_tol: 1e-9,
            f_tol: 1e-12,
            f_tol_patience: 1,
            max_iterations: 5000,
            max_line_search: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradientNorm,
    CostChange,
    MaxIterations,
    /// No step satisfying the Wolfe conditions was found; the last iterate is kept.
    LineSearchFailed,
    /// The starting point has a non-finite cost or gradient.
    NonFinite,
}

#[derive(Clone, Debug)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Cost of every accepted iterate, starting with the initial point.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn finite(f: f64, g: &[f64]) -> bool {
    f.is_finite() && g.iter().all(|x| x.is_finite())
}

struct Point {
    alpha: f64,
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

struct LineSearch<'a, F> {
    fg: &'a mut F,
    x: &'a [f64],
    d: &'a [f64],
    f0: f64,
    slope0: f64,
    c1: f64,
    c2: f64,
    budget: usize,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> LineSearch<'_, F> {
    fn eval(&mut self, alpha: f64) -> Point {
        self.evaluations += 1;
        let x: Vec<f64> = self
            .x
            .iter()
            .zip(self.d)
            .map(|(x, d)| x + alpha * d)
            .collect();
        let (f, g) = (self.fg)(&x);
        let slope = dot(&g, self.d);
        Point {
            alpha,
            x,
            f,
            g,
            slope,
        }
    }

    fn armijo(&self, p: &Point) -> bool {
        p.f <= self.f0 + self.c1 * p.alpha * self.slope0
    }

    fn curvature(&self, p: &Point) -> bool {
        p.slope.abs() <= -self.c2 * self.slope0
    }

    fn run(&mut self, alpha_init: f64) -> Option<Point> {
        let mut prev = Point {
            alpha: 0.0,
            x: self.x.to_vec(),
            f: self.f0,
            g: Vec::new(),
            slope: self.slope0,
        };
        let mut alpha = alpha_init;
        let mut first = true;
        while self.evaluations < self.budget {
            let p = self.eval(alpha);
            if !finite(p.f, &p.g) {
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if !self.armijo(&p) || (!first && p.f >= prev.f) {
                return self.zoom(prev, p);
            }
            if self.curvature(&p) {
                return Some(p);
            }
            if p.slope >= 0.0 {
                return self.zoom(p, prev);
            }
            alpha *= 2.0;
            prev = p;
            first = false;
        }
        None
    }

    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Option<Point> {
        while self.evaluations < self.budget {
            let width = hi.alpha - lo.alpha;
            if width.abs() <= 1e-16 * lo.alpha.abs().max(1.0) {
                break;
            }
            let alpha = cubic_step(&lo, &hi).unwrap_or(lo.alpha + 0.5 * width);
            let p = self.eval(alpha);
            if !finite(p.f, &p.g) || !self.armijo(&p) || p.f >= lo.f {
                hi = p;
            } else {
                if self.curvature(&p) {
                    return Some(p);
                }
                if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = p;
            }
        }
        // Budget exhausted: `lo` still satisfies sufficient decrease if it moved.
        (lo.alpha > 0.0 && lo.f < self.f0).then_some(lo)
    }
}

/// Minimizer of the cubic through both bracket ends, kept inside the middle 80 %.
fn cubic_step(lo: &Point, hi: &Point) -> Option<f64> {
    let d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (lo.alpha - hi.alpha);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if disc.is_nan() || disc < 0.0 {
        return None;
    }
    let d2 = (hi.alpha - lo.alpha).signum() * disc.sqrt();
    let alpha =
        hi.alpha - (hi.alpha - lo.alpha) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
    let (a, b) = if lo.alpha < hi.alpha {
        (lo.alpha, hi.alpha)
    } else {
        (hi.alpha, lo.alpha)
    };
    let margin = 0.1 * (b - a);
    (alpha.is_finite() && alpha > a + margin && alpha < b - margin).then_some(alpha)
}

/// Two-loop recursion: `−H·g` with `H₀ = γI`, `γ = sᵀy / yᵀy` of the newest pair.
fn direction(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in &mut q {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Minimizes `fg` (returning cost and gradient) from `x0`.
///
/// `observe(iteration, x, f)` is called for the initial point and after every accepted
/// step. Accepted costs never increase.
pub fn lbfgs_minimize<F, O>(
    mut fg: F,
    x0: &[f64],
    config: &LbfgsConfig,
    mut observe: O,
) -> LbfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
    O: FnMut(usize, &[f64], f64),
{
    let mut x = x0.to_vec();
    let (mut f, mut g) = fg(&x);
    let mut evaluations = 1;
    let mut history = vec![f];
    observe(0, &x, f);
    if !finite(f, &g) {
        return LbfgsOutcome {
            x,
            f,
            gradient: g,
            iterations: 0,
            evaluations,
            termination: Termination::NonFinite,
            history,
        };
    }

    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    let mut flat = 0;
    while iterations < config.max_iterations {
        if inf_norm(&g) < config.grad_tol {
            termination = Termination::GradientNorm;
            break;
        }
        let mut d = direction(&g, &memory);
        let mut slope = dot(&d, &g);
        if slope.is_nan() || slope >= 0.0 {
            memory.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&d, &g);
        }

        let mut accepted = None;
        for attempt in 0..2 {
            let alpha_init = if memory.is_empty() {
                (1.0 / dot(&g, &g).sqrt()).min(1.0)
            } else {
                1.0
            };
            let mut ls = LineSearch {
                fg: &mut fg,
                x: &x,
                d: &d,
                f0: f,
                slope0: slope,
                c1: config.c1,
                c2: config.c2,
                budget: config.max_line_search,
                evaluations: 0,
            };
            let found = ls.run(alpha_init);
            evaluations += ls.evaluations;
            if found.is_some() || attempt == 1 || memory.is_empty() {
                accepted = found;
                break;
            }
            // Retry once along steepest descent with a fresh memory.
            memory.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&d, &g);
        }
        let Some(p) = accepted else {
            termination = Termination::LineSearchFailed;
            break;
        };

        iterations += 1;
        let s: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if memory.len() == config.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        let df = f - p.f;
        x = p.x;
        f = p.f;
        g = p.g;
        history.push(f);
        observe(iterations, &x, f);
        if df.abs() < config.f_tol {
            flat += 1;
            if flat >= config.f_tol_patience.max(1) {
                termination = Termination::CostChange;
                break;
            }
        } else {
            flat = 0;
        }
    }

    LbfgsOutcome {
        x,
        f,
        gradient: g,
        iterations,
        evaluations,
        termination,
        history,
    }
}
