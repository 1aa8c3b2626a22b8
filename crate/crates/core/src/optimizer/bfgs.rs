use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Stopping and line-search settings of [`bfgs_minimize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BfgsSettings {
    pub max_iters: usize,
    /// Stop when the gradient 2-norm falls below this value.
    pub gradient_tolerance: f64,
    /// Stop when an accepted step lowers `f` by less than this fraction of `|f|`.
    pub f_tolerance: f64,
    /// Sufficient-decrease constant of the Wolfe conditions.
    pub c1: f64,
    /// Curvature constant of the strong Wolfe conditions.
    pub c2: f64,
    /// Largest infinity-norm of a single step.
    pub max_step: f64,
}

impl Default for BfgsSettings {
    fn default() -> Self {
        Self {
            max_iters: 400,
            gradient_tolerance: 1e-10,
            f_tolerance: 1e-13,
            c1: 1e-4,
            c2: 0.9,
            max_step: std::f64::consts::PI,
        }
    }
}

impl BfgsSettings {
    pub fn validate(&self) -> crate::Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(crate::Error::invalid(format!(
                "Wolfe constants need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if !(self.gradient_tolerance >= 0.0 && self.f_tolerance >= 0.0 && self.max_step > 0.0) {
            return Err(crate::Error::invalid("tolerances must be non-negative and max_step positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    FunctionTolerance,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: StopReason,
    /// Objective after each accepted step, starting with `f(x0)`.
    pub history: Vec<f64>,
}

impl BfgsOutcome {
    pub fn converged(&self) -> bool {
        matches!(self.stop, StopReason::GradientTolerance | StopReason::FunctionTolerance)
    }
}

struct Point {
    alpha: f64,
    f: f64,
    g: DVector<f64>,
    dphi: f64,
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, kept
/// inside the middle of the bracket.
fn cubic_step(a: &Point, b: &Point) -> f64 {
    let d1 = a.dphi + b.dphi - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.dphi * b.dphi;
    let (lo, hi) = if a.alpha < b.alpha { (a.alpha, b.alpha) } else { (b.alpha, a.alpha) };
    let width = hi - lo;
    let fallback = 0.5 * (lo + hi);
    if !(disc >= 0.0) {
        return fallback;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let t = b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / (b.dphi - a.dphi + 2.0 * d2);
    if t.is_finite() && t > lo + 0.1 * width && t < hi - 0.1 * width {
        t
    } else {
        fallback
    }
}

struct LineSearch<'a, F> {
    f: &'a mut F,
    x: &'a DVector<f64>,
    p: &'a DVector<f64>,
    f0: f64,
    dphi0: f64,
    c1: f64,
    c2: f64,
    evaluations: usize,
    best: Option<Point>,
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> LineSearch<'_, F> {
    fn eval(&mut self, alpha: f64) -> Point {
        let xt = self.x + self.p * alpha;
        let (f, g) = (self.f)(xt.as_slice());
        self.evaluations += 1;
        let g = DVector::from_vec(g);
        let dphi = g.dot(self.p);
        let pt = Point { alpha, f, g, dphi };
        let decreases = f.is_finite() && f <= self.f0 + self.c1 * alpha * self.dphi0;
        if decreases && self.best.as_ref().is_none_or(|b| f < b.f) {
            self.best = Some(Point {
                alpha,
                f,
                g: pt.g.clone(),
                dphi,
            });
        }
        pt
    }

    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Option<Point> {
        for _ in 0..30 {
            let alpha = cubic_step(&lo, &hi);
            let pt = self.eval(alpha);
            if !pt.f.is_finite() || pt.f > self.f0 + self.c1 * alpha * self.dphi0 || pt.f >= lo.f {
                hi = pt;
            } else {
                if pt.dphi.abs() <= -self.c2 * self.dphi0 {
                    return Some(pt);
                }
                if pt.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = pt;
            }
            if (hi.alpha - lo.alpha).abs() < 1e-16 * lo.alpha.abs().max(1e-300) {
                break;
            }
        }
        None
    }

    /// Strong Wolfe search; falls back to the best sufficient-decrease point.
    fn run(&mut self, alpha_init: f64, alpha_max: f64) -> Option<Point> {
        let mut prev = Point {
            alpha: 0.0,
            f: self.f0,
            g: DVector::zeros(0),
            dphi: self.dphi0,
        };
        let mut alpha = alpha_init.min(alpha_max);
        for i in 0..30 {
            let pt = self.eval(alpha);
            if !pt.f.is_finite() || pt.f > self.f0 + self.c1 * alpha * self.dphi0 || (i > 0 && pt.f >= prev.f) {
                let found = self.zoom(prev, pt);
                return found.or_else(|| self.best.take());
            }
            if pt.dphi.abs() <= -self.c2 * self.dphi0 {
                return Some(pt);
            }
            if pt.dphi >= 0.0 {
                let found = self.zoom(pt, prev);
                return found.or_else(|| self.best.take());
            }
            if alpha >= alpha_max {
                return Some(pt);
            }
            prev = pt;
            alpha = (2.0 * alpha).min(alpha_max);
        }
        self.best.take()
    }
}

/// Dense BFGS with a strong Wolfe line search.
///
/// `f` returns the objective and its gradient. Non-finite values are treated
/// as failed trial points. The returned point never has a larger objective
/// than `x0`.
pub fn bfgs_minimize<F>(mut f: F, x0: &[f64], settings: &BfgsSettings) -> BfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let (mut fx, g0) = f(x0);
    let mut g = DVector::from_vec(g0);
    let mut evaluations = 1;
    let mut history = vec![fx];
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut first_update = true;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;

    while iterations < settings.max_iters {
        if !(g.norm() > settings.gradient_tolerance) || !fx.is_finite() {
            stop = StopReason::GradientTolerance;
            break;
        }
        let mut p = -(&h * &g);
        let mut dphi0 = p.dot(&g);
        if !(dphi0 < 0.0) {
            // Lost descent; restart from steepest descent.
            h = DMatrix::identity(n, n);
            first_update = true;
            p = -g.clone();
            dphi0 = p.dot(&g);
        }
        let pmax = p.amax();
        let alpha_max = settings.max_step / pmax;
        let alpha_init = if first_update { (0.5 / pmax).min(1.0) } else { 1.0 };
        let mut ls = LineSearch {
            f: &mut f,
            x: &x,
            p: &p,
            f0: fx,
            dphi0,
            c1: settings.c1,
            c2: settings.c2,
            evaluations: 0,
            best: None,
        };
        let found = ls.run(alpha_init, alpha_max);
        evaluations += ls.evaluations;
        let Some(pt) = found else {
            stop = StopReason::LineSearchFailed;
            break;
        };
        iterations += 1;
        let s = &p * pt.alpha;
        let y = &pt.g - &g;
        let f_prev = fx;
        x += &s;
        fx = pt.f;
        g = pt.g;
        history.push(fx);

        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
            if first_update {
                h = DMatrix::identity(n, n) * (sy / y.dot(&y));
                first_update = false;
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (s hy^T + hy s^T) + (rho^2 yHy + rho) s s^T
            h -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
            h += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }
        if f_prev - fx <= settings.f_tolerance * fx.abs().max(f64::MIN_POSITIVE) {
            stop = StopReason::FunctionTolerance;
            break;
        }
    }
    if stop == StopReason::MaxIterations && g.norm() <= settings.gradient_tolerance {
        stop = StopReason::GradientTolerance;
    }
    BfgsOutcome {
        x: x.as_slice().to_vec(),
        f: fx,
        gradient: g.as_slice().to_vec(),
        iterations,
        evaluations,
        stop,
        history,
    }
}
