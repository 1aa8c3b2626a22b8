use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::phases::{detuning_band, propagate_linear};
use crate::{Error, Result, C64};

/// Column names of the pulse CSV format.
pub const PULSE_CSV_HEADER: [&str; 5] = ["t", "re_zeta", "im_zeta", "re_eta", "im_eta"];

/// Drive samples on a uniform time grid `[0, T]`.
///
/// `zeta` is the effective-frame drive. `eta` and `alpha` are the lab-frame
/// cavity drive and coherent amplitude, filled in by [`invert_zeta_to_eta`].
#[derive(Debug, Clone, PartialEq)]
pub struct PulseGrid {
    pub times: Vec<f64>,
    pub zeta: Vec<C64>,
    pub eta: Option<Vec<C64>>,
    pub alpha: Option<Vec<C64>>,
    /// Atom-drive detuning used for the inversion, in units of `g`.
    pub drive_detuning: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PulseRow {
    t: f64,
    re_zeta: f64,
    im_zeta: f64,
    re_eta: Option<f64>,
    im_eta: Option<f64>,
}

impl PulseGrid {
    pub fn new(times: Vec<f64>, zeta: Vec<C64>) -> Result<Self> {
        let grid = Self {
            times,
            zeta,
            eta: None,
            alpha: None,
            drive_detuning: None,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn step(&self) -> f64 {
        self.duration() / (self.times.len() - 1) as f64
    }

    pub fn max_zeta(&self) -> f64 {
        self.zeta.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Uniform grid from zero, odd sample count, finite samples.
    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if n < 5 || n % 2 == 0 {
            return Err(Error::Parse(format!(
                "pulse needs an odd number of at least 5 samples, got {n}"
            )));
        }
        if self.zeta.len() != n {
            return Err(Error::Parse("zeta and time columns differ in length".into()));
        }
        if let Some(eta) = &self.eta {
            if eta.len() != n {
                return Err(Error::Parse("eta and time columns differ in length".into()));
            }
        }
        if self.times[0] != 0.0 {
            return Err(Error::Parse(format!("pulse must start at t = 0, got {}", self.times[0])));
        }
        let t_end = self.duration();
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::Parse(format!("invalid pulse duration {t_end}")));
        }
        let h = t_end / (n - 1) as f64;
        for (k, t) in self.times.iter().enumerate() {
            if (t - k as f64 * h).abs() > 1e-9 * t_end {
                return Err(Error::Parse(format!("time grid not uniform at row {k}")));
            }
        }
        let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
        if !self.zeta.iter().all(finite) || !self.eta.iter().flatten().all(finite) {
            return Err(Error::Parse("non-finite drive sample".into()));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (k, t) in self.times.iter().enumerate() {
            let eta = self.eta.as_ref().map(|e| e[k]);
            w.serialize(PulseRow {
                t: *t,
                re_zeta: self.zeta[k].re,
                im_zeta: self.zeta[k].im,
                re_eta: eta.map(|e| e.re),
                im_eta: eta.map(|e| e.im),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV format written by [`PulseGrid::write_csv`]. The header
    /// row is mandatory; eta columns may be empty on every row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().map(str::trim).ne(PULSE_CSV_HEADER) {
            return Err(Error::Parse(format!(
                "pulse CSV header must be {:?}, got {:?}",
                PULSE_CSV_HEADER,
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut times = Vec::new();
        let mut zeta = Vec::new();
        let mut eta = Vec::new();
        let mut eta_missing = 0usize;
        for row in r.deserialize() {
            let row: PulseRow = row?;
            times.push(row.t);
            zeta.push(C64::new(row.re_zeta, row.im_zeta));
            match (row.re_eta, row.im_eta) {
                (Some(a), Some(b)) => eta.push(C64::new(a, b)),
                (None, None) => eta_missing += 1,
                _ => return Err(Error::Parse("eta row has only one component".into())),
            }
        }
        let eta = match eta_missing {
            0 if !times.is_empty() => Some(eta),
            n if n == times.len() => None,
            _ => return Err(Error::Parse("eta columns partially filled".into())),
        };
        let grid = Self {
            times,
            zeta,
            eta,
            alpha: None,
            drive_detuning: None,
        };
        grid.validate()?;
        Ok(grid)
    }
}

/// Samples of the sin^2 family: returns `(t, A, s(t), ds/dt)` with
/// `zeta = A (s - i s'/delta)`, `s = sin^2(pi t / T)`, and
/// `A = -2 delta sqrt(2 phi / (3 delta T))`.
pub(crate) fn sin2_shape(phi: f64, delta: f64, gt: f64, samples: usize) -> (Vec<f64>, f64, Vec<f64>, Vec<f64>) {
    let h = gt / (samples - 1) as f64;
    let amp = -2.0 * delta.signum() * (2.0 * (phi * delta).abs() / (3.0 * gt)).sqrt();
    let times: Vec<f64> = (0..samples).map(|k| k as f64 * h).collect();
    let s = times.iter().map(|t| (PI * t / gt).sin().powi(2)).collect();
    let sdot = times.iter().map(|t| PI / gt * (2.0 * PI * t / gt).sin()).collect();
    (times, amp, s, sdot)
}

/// The sin^2 drive realizing geometric phase `phi` at detuning `delta`.
pub fn sin2_pulse(phi: f64, delta: f64, gt: f64, samples: usize) -> Result<PulseGrid> {
    if phi != 0.0 && phi.signum() != delta.signum() {
        return Err(Error::SignMismatch { phi, delta });
    }
    if samples < 5 || samples % 2 == 0 {
        return Err(Error::invalid(format!("sample count {samples} must be odd and at least 5")));
    }
    let (lo, hi) = detuning_band(phi, gt, 1.0);
    if phi != 0.0 && !(delta.abs() > lo && delta.abs() < hi) {
        return Err(Error::DetuningOutOfBand {
            delta,
            lo,
            hi,
            duration: gt,
        });
    }
    let (mut times, amp, s, sdot) = sin2_shape(phi, delta, gt, samples);
    let mut zeta: Vec<C64> = s
        .iter()
        .zip(&sdot)
        .map(|(&sk, &dk)| C64::new(amp * sk, -amp * dk / delta))
        .collect();
    // Pin the endpoints; sin(pi) is not exactly zero in floating point.
    zeta[0] = C64::new(0.0, 0.0);
    zeta[samples - 1] = C64::new(0.0, 0.0);
    times[samples - 1] = gt;
    if phi == 0.0 {
        zeta.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    }
    for (k, z) in zeta.iter().enumerate() {
        if z.norm() >= 0.5 {
            return Err(Error::DriveTooStrong {
                zeta_abs: z.norm(),
                t: times[k],
            });
        }
    }
    PulseGrid::new(times, zeta)
}

/// First derivative on a uniform grid, fourth order everywhere.
fn derivative(f: &[C64], h: f64) -> Vec<C64> {
    let n = f.len();
    let mut d = vec![C64::new(0.0, 0.0); n];
    let c = 1.0 / (12.0 * h);
    for k in 2..n - 2 {
        d[k] = (-f[k + 2] + 8.0 * f[k + 1] - 8.0 * f[k - 1] + f[k - 2]) * c;
    }
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) * c;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) * c;
    d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) * c;
    d[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) * c;
    d
}

/// Lab-frame drive `eta(t)` that produces `zeta(t)`.
///
/// `|alpha|` solves `|zeta| = g^2 |alpha| / sqrt(4 g^2 |alpha|^2 + Delta^2)`
/// with the phase of `zeta`; then `eta = -alpha' - (i delta + kappa/2) alpha`.
pub fn invert_zeta_to_eta(pulse: &PulseGrid, delta: f64, kappa: f64, drive_detuning: f64) -> Result<PulseGrid> {
    if !(drive_detuning > 0.0 && drive_detuning.is_finite()) {
        return Err(Error::invalid(format!("drive detuning {drive_detuning} must be positive")));
    }
    pulse.validate()?;
    let mut alpha = Vec::with_capacity(pulse.zeta.len());
    for (k, z) in pulse.zeta.iter().enumerate() {
        let x = z.norm_sqr();
        if x >= 0.25 {
            return Err(Error::DriveTooStrong {
                zeta_abs: z.norm(),
                t: pulse.times[k],
            });
        }
        alpha.push(z * (drive_detuning / (1.0 - 4.0 * x).sqrt()));
    }
    let h = pulse.step();
    let lambda = C64::new(kappa / 2.0, delta);
    let eta: Vec<C64> = derivative(&alpha, h)
        .iter()
        .zip(&alpha)
        .map(|(da, a)| -da - lambda * a)
        .collect();
    Ok(PulseGrid {
        times: pulse.times.clone(),
        zeta: pulse.zeta.clone(),
        eta: Some(eta),
        alpha: Some(alpha),
        drive_detuning: Some(drive_detuning),
    })
}

/// Effective drive obtained by integrating `alpha' = -eta - (i delta + kappa/2) alpha`
/// from `alpha(0) = 0`.
pub fn forward_zeta_from_eta(pulse: &PulseGrid, delta: f64, kappa: f64, drive_detuning: f64) -> Result<Vec<C64>> {
    let eta = pulse
        .eta
        .as_ref()
        .ok_or_else(|| Error::invalid("pulse has no eta samples"))?;
    let lambda = C64::new(kappa / 2.0, delta);
    let forcing: Vec<C64> = eta.iter().map(|e| -e).collect();
    let alpha = propagate_linear(lambda, pulse.step(), &forcing);
    let d2 = drive_detuning * drive_detuning;
    Ok(alpha.iter().map(|a| a / (4.0 * a.norm_sqr() + d2).sqrt()).collect())
}

/// `max_t |zeta_roundtrip - zeta| / max_t |zeta|`.
pub fn round_trip_residual(pulse: &PulseGrid, delta: f64, kappa: f64) -> Result<f64> {
    let detuning = pulse
        .drive_detuning
        .ok_or_else(|| Error::invalid("pulse has no drive detuning"))?;
    let zeta = forward_zeta_from_eta(pulse, delta, kappa, detuning)?;
    let scale = pulse.max_zeta();
    if scale == 0.0 {
        return Ok(zeta.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    let err = zeta
        .iter()
        .zip(&pulse.zeta)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok(err / scale)
}
