use crate::gpg::{detuning_band, GateDuration};
use crate::protocol::ProtocolParams;

/// Relative margin that keeps exported detunings strictly inside the band.
const BAND_MARGIN: f64 = 1e-9;

fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn logit(s: f64) -> f64 {
    let s = s.clamp(1e-12, 1.0 - 1e-12);
    (s / (1.0 - s)).ln()
}

/// Map between the unconstrained optimizer vector and protocol parameters.
///
/// Adiabatic gates use the raw `delta`; the phase formula depends on it only
/// through absolute values, so its sign is fixed on export. Finite gates map
/// `u_delta` through a logistic onto the allowed band of `|delta|` for the
/// current `phi`, with the sign of `phi`. Optional per-entry bounds use the
/// same logistic map.
#[derive(Debug, Clone, PartialEq)]
pub struct Parametrization {
    pub n_steps: usize,
    pub duration: GateDuration,
    pub g: f64,
    pub bounds: Vec<Option<[f64; 2]>>,
}

impl Parametrization {
    pub fn new(n_steps: usize, duration: GateDuration, g: f64, bounds: Option<&[Option<[f64; 2]>]>) -> crate::Result<Self> {
        let len = ProtocolParams::vector_len(n_steps);
        let bounds = match bounds {
            None => vec![None; len],
            Some(b) if b.len() == len => b.to_vec(),
            Some(b) => {
                return Err(crate::Error::invalid(format!(
                    "{} bounds given for {len} parameters",
                    b.len()
                )))
            }
        };
        for [lo, hi] in bounds.iter().flatten() {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(crate::Error::invalid(format!("invalid bound interval [{lo}, {hi}]")));
            }
        }
        Ok(Self {
            n_steps,
            duration,
            g,
            bounds,
        })
    }

    pub fn len(&self) -> usize {
        ProtocolParams::vector_len(self.n_steps)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Finite-gate detunings follow the band map; their bounds are ignored.
    fn band_mapped(&self, k: usize) -> bool {
        let is_delta = k >= 3 && k < self.len() - 1 && (k - 3) % 5 == 4;
        is_delta && matches!(self.duration, GateDuration::Finite { .. })
    }

    fn finite_band(&self, phi: f64) -> Option<(f64, f64)> {
        match self.duration {
            GateDuration::Finite { gt, .. } => Some(detuning_band(phi, gt, self.g)),
            GateDuration::Adiabatic => None,
        }
    }

    /// Protocol vector from the optimizer vector. `None` when a finite-gate
    /// band is empty for the current `phi`.
    pub fn decode(&self, u: &[f64]) -> Option<Vec<f64>> {
        let mut v = u.to_vec();
        for (k, b) in self.bounds.iter().enumerate() {
            if self.band_mapped(k) {
                continue;
            }
            if let Some([lo, hi]) = b {
                v[k] = lo + (hi - lo) * logistic(u[k]);
            }
        }
        for j in 0..self.n_steps {
            let (ip, id) = (3 + 5 * j + 3, 3 + 5 * j + 4);
            if let Some((lo, hi)) = self.finite_band(v[ip]) {
                if !(hi > lo) {
                    return None;
                }
                let sign = if v[ip] < 0.0 { -1.0 } else { 1.0 };
                v[id] = sign * (lo + (hi - lo) * logistic(u[id]));
            }
        }
        Some(v)
    }

    /// Gradient over `u` from the gradient over the protocol vector.
    pub fn pullback(&self, u: &[f64], v: &[f64], grad_v: &[f64]) -> Vec<f64> {
        let mut gv = grad_v.to_vec();
        let mut gu = vec![0.0; gv.len()];
        for j in 0..self.n_steps {
            let (ip, id) = (3 + 5 * j + 3, 3 + 5 * j + 4);
            if let (Some((lo, hi)), GateDuration::Finite { gt, .. }) = (self.finite_band(v[ip]), self.duration) {
                let s = logistic(u[id]);
                // |delta| = lo + (hi - lo) s with hi = K / |phi|; d delta / d phi = -s K / phi^2.
                let k = 3.0 * self.g * self.g * gt / 32.0;
                gv[ip] += gv[id] * (-s * k / (v[ip] * v[ip]));
                let sign = if v[ip] < 0.0 { -1.0 } else { 1.0 };
                gu[id] = gv[id] * sign * (hi - lo) * s * (1.0 - s);
            }
        }
        for k in 0..gv.len() {
            if self.band_mapped(k) {
                continue;
            }
            gu[k] = match self.bounds[k] {
                Some([lo, hi]) => {
                    let s = logistic(u[k]);
                    gv[k] * (hi - lo) * s * (1.0 - s)
                }
                None => gv[k],
            };
        }
        gu
    }

    /// Optimizer vector that decodes to `v` (entries inside their intervals).
    pub fn encode(&self, v: &[f64]) -> Vec<f64> {
        let mut u = v.to_vec();
        for (k, b) in self.bounds.iter().enumerate() {
            if let (Some([lo, hi]), false) = (b, self.band_mapped(k)) {
                u[k] = logit((v[k] - lo) / (hi - lo));
            }
        }
        for j in 0..self.n_steps {
            let (ip, id) = (3 + 5 * j + 3, 3 + 5 * j + 4);
            if let Some((lo, hi)) = self.finite_band(v[ip]) {
                u[id] = logit((v[id].abs() - lo) / (hi - lo));
            }
        }
        u
    }

    /// Exported protocol parameters with the sign rule and band applied.
    pub fn export(&self, v: &[f64], extra_final_rotation: Option<f64>) -> ProtocolParams {
        apply_sign_and_bounds(v, self.duration, self.g, extra_final_rotation)
    }
}

/// Aligns each `delta_j` with the sign of `phi_j` and, for finite gates,
/// clamps `|delta_j|` into the open band `(2 pi / T, 3 g^2 T / (32 |phi_j|))`.
pub fn apply_sign_and_bounds(
    raw: &[f64],
    duration: GateDuration,
    g: f64,
    extra_final_rotation: Option<f64>,
) -> ProtocolParams {
    let mut params = ProtocolParams::from_vector(raw, extra_final_rotation)
        .expect("parameter vector length is 3 + 5P + 1");
    for step in &mut params.steps {
        if step.phi == 0.0 {
            continue;
        }
        let mut mag = step.delta.abs();
        if let GateDuration::Finite { gt, .. } = duration {
            let (lo, hi) = detuning_band(step.phi, gt, g);
            let (lo_in, hi_in) = (lo * (1.0 + BAND_MARGIN), hi * (1.0 - BAND_MARGIN));
            if hi_in > lo_in {
                mag = mag.clamp(lo_in, hi_in);
            } else if hi > lo {
                // Band narrower than the margin.
                mag = 0.5 * (lo + hi);
            }
        }
        step.delta = mag * step.phi.signum();
    }
    params
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(phi: f64, delta: f64) -> Vec<f64> {
        vec![0.0, 0.0, 0.0, 0.1, 0.2, 0.3, phi, delta, 0.0]
    }

    #[test]
    fn sign_alignment() {
        let p = apply_sign_and_bounds(&raw(1.5, -0.4), GateDuration::Adiabatic, 1.0, None);
        assert_eq!(p.steps[0].delta, 0.4);
        let p = apply_sign_and_bounds(&raw(-1.5, 0.4), GateDuration::Adiabatic, 1.0, None);
        assert_eq!(p.steps[0].delta, -0.4);
    }

    #[test]
    fn finite_clamp_to_band() {
        let p = apply_sign_and_bounds(&raw(1.57, 3.0), GateDuration::finite(40.0), 1.0, None);
        let hi: f64 = 3.0 * 40.0 / (32.0 * 1.57);
        assert!((hi - 2.389).abs() < 1e-3);
        assert!(p.steps[0].delta < hi && (p.steps[0].delta - hi).abs() < 1e-8);
        let p = apply_sign_and_bounds(&raw(1.57, 0.01), GateDuration::finite(40.0), 1.0, None);
        assert!((p.steps[0].delta - 0.157).abs() < 1e-3);
        // |phi| where the band is narrower than the margin.
        let phi = 3.0 * 20.0 * 20.0 / (32.0 * 2.0 * std::f64::consts::PI) * (1.0 - 1e-10);
        let p = apply_sign_and_bounds(&raw(phi, 5.0), GateDuration::finite(20.0), 1.0, None);
        let (lo, hi) = detuning_band(phi, 20.0, 1.0);
        assert!(p.steps[0].delta >= lo && p.steps[0].delta <= hi);
    }

    #[test]
    fn decode_stays_in_band_and_round_trips() {
        let par = Parametrization::new(1, GateDuration::finite(40.0), 1.0, None).unwrap();
        for (phi, delta) in [(1.2, 0.9), (-0.7, -3.0), (0.3, 5.0)] {
            let v = raw(phi, delta);
            let u = par.encode(&v);
            let back = par.decode(&u).unwrap();
            assert!((back[7] - delta).abs() < 1e-9, "{} vs {delta}", back[7]);
        }
        for u in [-40.0, -3.0, 0.0, 2.0, 40.0] {
            let mut x = raw(1.57, 0.0);
            x[7] = u;
            let v = par.decode(&x).unwrap();
            let p = par.export(&v, None);
            let (lo, hi) = detuning_band(1.57, 40.0, 1.0);
            assert!(p.steps[0].delta > lo && p.steps[0].delta < hi);
        }
    }

    #[test]
    fn empty_band_is_reported() {
        let par = Parametrization::new(1, GateDuration::finite(5.0), 1.0, None).unwrap();
        assert!(par.decode(&raw(1.5, 0.0)).is_none());
    }

    #[test]
    fn pullback_matches_differences() {
        let bounds = vec![None, Some([-1.0, 2.0]), None, None, None, None, Some([-1.5, 1.5]), None, Some([-0.5, 0.5])];
        let par = Parametrization::new(1, GateDuration::finite(40.0), 1.0, Some(&bounds)).unwrap();
        // A smooth function of the decoded vector.
        let f = |v: &[f64]| v.iter().enumerate().map(|(k, x)| (k as f64 + 1.0) * x.sin() + x * x).sum::<f64>();
        let grad_f = |v: &[f64]| v.iter().enumerate().map(|(k, x)| (k as f64 + 1.0) * x.cos() + 2.0 * x).collect::<Vec<_>>();
        let u = vec![0.3, -0.2, 0.1, 0.4, 0.5, -0.6, 0.7, -0.3, 0.2];
        let v = par.decode(&u).unwrap();
        let gu = par.pullback(&u, &v, &grad_f(&v));
        let h = 1e-6;
        for k in 0..u.len() {
            let mut up = u.clone();
            let mut um = u.clone();
            up[k] += h;
            um[k] -= h;
            let fd = (f(&par.decode(&up).unwrap()) - f(&par.decode(&um).unwrap())) / (2.0 * h);
            assert!((gu[k] - fd).abs() < 1e-6 * fd.abs().max(1.0), "entry {k}: {} vs {fd}", gu[k]);
        }
    }
}
