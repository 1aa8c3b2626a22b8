//! Time integration of autonomous linear systems stored as flat complex vectors.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Upper bound on accepted plus rejected steps of one integration.
const MAX_STEPS: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Integrator {
    /// Dormand-Prince 5(4) with error control per entry.
    Adaptive { rtol: f64, atol: f64 },
    /// Classical fourth-order Runge-Kutta with steps of at most `dt`.
    FixedStep { dt: f64 },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Adaptive {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

impl Integrator {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Integrator::Adaptive { rtol, atol } => {
                if !(rtol > 0.0 && atol > 0.0 && rtol.is_finite() && atol.is_finite()) {
                    return Err(Error::invalid(format!("invalid tolerances rtol = {rtol}, atol = {atol}")));
                }
            }
            Integrator::FixedStep { dt } => {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(Error::invalid(format!("invalid step dt = {dt}")));
                }
            }
        }
        Ok(())
    }
}

/// Checks that a time grid is finite, starts at zero and strictly increases.
pub fn validate_grid(t_grid: &[f64]) -> Result<()> {
    match t_grid.first() {
        None => return Err(Error::invalid("time grid is empty")),
        Some(&t0) if t0 != 0.0 => return Err(Error::invalid("time grid must start at 0")),
        _ => {}
    }
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("time grid must be finite and strictly increasing"));
    }
    Ok(())
}

fn axpy_into(out: &mut [C64], y: &[C64], terms: &[(f64, &[C64])], h: f64) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        *o = y[i] + acc * h;
    }
}

/// Integrates `dy/dt = f(y)` and returns `y` at every entry of `t_grid`
/// (the first being `y0`). `check` runs after every accepted step and can
/// abort the integration.
pub(crate) fn integrate<F, C>(
    mut f: F,
    y0: Vec<C64>,
    t_grid: &[f64],
    integrator: Integrator,
    mut check: C,
) -> Result<Vec<Vec<C64>>>
where
    F: FnMut(&[C64], &mut [C64]),
    C: FnMut(&[C64]) -> Result<()>,
{
    integrator.validate()?;
    validate_grid(t_grid)?;
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(y0.clone());
    match integrator {
        Integrator::FixedStep { dt } => {
            let mut y = y0;
            let mut stepper = Rk4::new(y.len());
            for w in t_grid.windows(2) {
                let span = w[1] - w[0];
                let n = (span / dt).ceil().max(1.0) as usize;
                let h = span / n as f64;
                for _ in 0..n {
                    stepper.step(&mut f, &mut y, h);
                    check(&y)?;
                }
                out.push(y.clone());
            }
        }
        Integrator::Adaptive { rtol, atol } => {
            let mut dp = Dopri5::new(y0, rtol, atol, &mut f);
            for w in t_grid.windows(2) {
                dp.advance(&mut f, w[1] - w[0], &mut check)?;
                out.push(dp.y.clone());
            }
        }
    }
    Ok(out)
}

struct Rk4 {
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Self {
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z,
        }
    }

    fn step<F: FnMut(&[C64], &mut [C64])>(&mut self, f: &mut F, y: &mut [C64], h: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        f(y, k1);
        axpy_into(&mut self.tmp, y, &[(0.5, k1)], h);
        f(&self.tmp, k2);
        axpy_into(&mut self.tmp, y, &[(0.5, k2)], h);
        f(&self.tmp, k3);
        axpy_into(&mut self.tmp, y, &[(1.0, k3)], h);
        f(&self.tmp, k4);
        for i in 0..y.len() {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
    }
}

// Dormand-Prince 5(4) tableau.
const A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth- minus fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Dopri5 {
    y: Vec<C64>,
    k: Vec<Vec<C64>>,
    tmp: Vec<C64>,
    h: f64,
    rtol: f64,
    atol: f64,
    steps: usize,
}

impl Dopri5 {
    fn new<F: FnMut(&[C64], &mut [C64])>(y: Vec<C64>, rtol: f64, atol: f64, f: &mut F) -> Self {
        let n = y.len();
        let mut k = vec![vec![C64::new(0.0, 0.0); n]; 7];
        f(&y, &mut k[0]);
        let scale = |v: &[C64], w: &[C64]| {
            let s: f64 = v
                .iter()
                .zip(w)
                .map(|(a, b)| (a.norm() / (atol + rtol * b.norm())).powi(2))
                .sum();
            (s / n.max(1) as f64).sqrt()
        };
        let d0 = scale(&y, &y);
        let d1 = scale(&k[0], &y);
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        Self {
            y,
            k,
            tmp: vec![C64::new(0.0, 0.0); n],
            h,
            rtol,
            atol,
            steps: 0,
        }
    }

    /// Advances the state by `span`, landing exactly on the end point.
    fn advance<F, C>(&mut self, f: &mut F, span: f64, check: &mut C) -> Result<()>
    where
        F: FnMut(&[C64], &mut [C64]),
        C: FnMut(&[C64]) -> Result<()>,
    {
        let n = self.y.len();
        let mut done = 0.0;
        let mut ynew = vec![C64::new(0.0, 0.0); n];
        while done < span {
            self.steps += 1;
            if self.steps > MAX_STEPS {
                return Err(Error::Numerical("integrator exceeded the step limit".into()));
            }
            let last = self.h >= span - done;
            let h = if last { span - done } else { self.h };
            if !(h > 1e-14 * span.max(1.0)) && !last {
                return Err(Error::Numerical(format!("integrator step size underflow (h = {h:e})")));
            }
            for s in 0..6 {
                let (known, rest) = self.k.split_at_mut(s + 1);
                let terms: Vec<(f64, &[C64])> = A[s].iter().zip(known.iter()).map(|(&c, k)| (c, &k[..])).collect();
                if s < 5 {
                    axpy_into(&mut self.tmp, &self.y, &terms, h);
                    f(&self.tmp, &mut rest[0]);
                } else {
                    axpy_into(&mut ynew, &self.y, &terms, h);
                }
            }
            let (head, tail) = self.k.split_at_mut(6);
            f(&ynew, &mut tail[0]);
            let mut err = 0.0f64;
            for i in 0..n {
                let mut e = tail[0][i] * E[6];
                for (s, ks) in head.iter().enumerate() {
                    e += ks[i] * E[s];
                }
                let sc = self.atol + self.rtol * self.y[i].norm().max(ynew[i].norm());
                err = err.max(e.norm() * h / sc);
            }
            if !err.is_finite() {
                return Err(Error::Numerical("non-finite state during integration".into()));
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                std::mem::swap(&mut self.y, &mut ynew);
                self.k.swap(0, 6);
                done = if last { span } else { done + h };
                check(&self.y)?;
                // Keep the step proposal from the clipped final step only
                // if it was not artificially short.
                if !last || h >= self.h {
                    self.h = h * factor;
                }
            } else {
                self.h = h * factor.min(1.0);
            }
        }
        Ok(())
    }
}
