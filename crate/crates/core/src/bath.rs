//! Ohmic dephasing bath: spectral density, the time-dependent dephasing
//! rate and the two time-integrated decoherence functions consumed by the
//! propagators.
//!
//! Units are `hbar = 1`, `omega0 = 1`. With `J(w) = eta w exp(-w / cutoff)`:
//!
//! * `gamma(t) = 2 int J(w) coth(w / 2kT) sin(w t) / w dw`
//! * `theta(t) = int_0^t gamma = 2 int J(w) coth(w / 2kT) (1 - cos w t) / w^2 dw`
//! * `dissipative(t) = int J(w) (1 - cos w t) / w dw`, minus the imaginary part
//!   of the common-bath memory kernel
//! * `bphase(t) = int_0^t dissipative = int J(w) (w t - sin w t) / w^2 dw`

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};

/// Relative tolerance for every frequency integral.
pub const QUAD_REL_TOL: f64 = 1e-8;

/// Exponential-tail truncation: `w_max = cutoff * (ln(1/delta) + 40)`.
const TAIL_DELTA: f64 = 1e-16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathParams {
    /// Dimensionless coupling strength.
    pub eta: f64,
    /// Cutoff frequency in units of `omega0`.
    pub lambda: f64,
    /// Temperature `k_B T` in units of `hbar omega0`.
    pub kt: f64,
    pub omega0: f64,
}

impl BathParams {
    pub fn new(eta: f64, lambda: f64, kt: f64) -> Result<Self> {
        let p = Self {
            eta,
            lambda,
            kt,
            omega0: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// `eta = 0.1`, `cutoff = 0.01 omega0`, `k_B T = omega0 / 4 pi`, so the
    /// Markov rate equals `eta omega0`.
    pub fn reference() -> Self {
        Self {
            eta: 0.1,
            lambda: 1e-2,
            kt: 1.0 / (4.0 * PI),
            omega0: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta", self.eta), ("lambda", self.lambda), ("kT", self.kt)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidBath(format!("{name} must be positive, got {v}")));
            }
        }
        if self.omega0 != 1.0 {
            return Err(Error::InvalidBath("omega0 is fixed to 1 in internal units".into()));
        }
        Ok(())
    }

    pub fn spectral_density(&self, w: f64) -> f64 {
        self.eta * w * (-w / self.lambda).exp()
    }

    fn omega_max(&self) -> f64 {
        self.lambda * ((1.0 / TAIL_DELTA).ln() + 40.0)
    }

    fn series_switch(&self) -> f64 {
        1e-6 * self.lambda.min(self.kt)
    }

    fn cache_key(&self) -> [u64; 3] {
        [self.eta.to_bits(), self.lambda.to_bits(), self.kt.to_bits()]
    }
}

/// Long-time Markov dephasing rate `4 pi eta kT`.
pub fn markov_rate(p: &BathParams) -> f64 {
    4.0 * PI * p.eta * p.kt
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

fn frequency_integral(p: &BathParams, t: f64, integrand: impl Fn(f64) -> f64) -> Result<f64> {
    let w_max = p.omega_max();
    let panel = if t > 0.0 { (PI / t).min(w_max) } else { w_max };
    let opts = QuadOptions {
        rel_tol: QUAD_REL_TOL,
        ..QuadOptions::default()
    };
    Ok(integrate(integrand, 0.0, w_max, panel, &opts)?.value)
}

/// Time-dependent dephasing rate `gamma(t)`.
pub fn gamma_t(p: &BathParams, t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let (two_kt, switch) = (2.0 * p.kt, p.series_switch());
    frequency_integral(p, t, |w| {
        let damp = 2.0 * p.eta * (-w / p.lambda).exp();
        if w < switch {
            // coth(w/2kT) ~ 2kT/w + w/(6kT); sin(wt)/w ~ t - w^2 t^3 / 6
            let sinc = t * (1.0 - (w * t).powi(2) / 6.0);
            damp * (two_kt * sinc + w * (w * t).sin() / (6.0 * p.kt))
        } else {
            damp * (w * t).sin() / (w / two_kt).tanh()
        }
    })
}

/// Accumulated local dephasing `theta(t)`, the time integral of `gamma`.
pub fn theta_t(p: &BathParams, t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let (two_kt, switch) = (2.0 * p.kt, p.series_switch());
    frequency_integral(p, t, |w| {
        let damp = 2.0 * p.eta * (-w / p.lambda).exp();
        if w < switch {
            // (1 - cos wt)/w^2 ~ t^2/2 - w^2 t^4/24
            let kernel = t * t / 2.0 - w * w * t.powi(4) / 24.0;
            damp * (two_kt * kernel + w * w * kernel / (6.0 * p.kt))
        } else {
            let s = (0.5 * w * t).sin();
            damp * 2.0 * s * s / (w * (w / two_kt).tanh())
        }
    })
}

/// `int J(w) (1 - cos w t) / w dw`, temperature independent.
pub fn dissipative_t(p: &BathParams, t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    frequency_integral(p, t, |w| {
        let s = (0.5 * w * t).sin();
        p.eta * (-w / p.lambda).exp() * 2.0 * s * s
    })
}

/// Accumulated collective phase `B(t)`, the time integral of
/// [`dissipative_t`].
pub fn bphase_t(p: &BathParams, t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    frequency_integral(p, t, |w| {
        let x = w * t;
        let ratio = if x < 1e-2 {
            // (x - sin x)/x
            let x2 = x * x;
            x2 / 6.0 - x2 * x2 / 120.0 + x2 * x2 * x2 / 5040.0
        } else {
            (x - x.sin()) / x
        };
        p.eta * (-w / p.lambda).exp() * t * ratio
    })
}

/// Common-bath memory kernel `alpha(t) = gamma(t)/2 - i dissipative(t)`.
pub fn alpha_t(p: &BathParams, t: f64) -> Result<Complex64> {
    Ok(Complex64::new(0.5 * gamma_t(p, t)?, -dissipative_t(p, t)?))
}

/// `theta`, `bphase` and `gamma` sampled on an ascending time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoherenceProfile {
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
    pub bphase: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl DecoherenceProfile {
    pub fn compute(p: &BathParams, times: &[f64]) -> Result<Self> {
        p.validate()?;
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidBath("profile grid must be ascending".into()));
        }
        let mut prof = Self {
            times: times.to_vec(),
            theta: Vec::with_capacity(times.len()),
            bphase: Vec::with_capacity(times.len()),
            gamma: Vec::with_capacity(times.len()),
        };
        for &t in times {
            prof.theta.push(theta_t(p, t)?);
            prof.bphase.push(bphase_t(p, t)?);
            prof.gamma.push(gamma_t(p, t)?);
        }
        Ok(prof)
    }

    /// Index of a grid time, matched to within `1e-12` relative.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|&g| (g - t).abs() <= 1e-12 * g.abs().max(1.0))
    }
}

type ProfileKey = ([u64; 3], Vec<u64>);

/// Write-once store of profiles keyed by bath parameters and grid.
#[derive(Default)]
pub struct ProfileCache {
    inner: Mutex<HashMap<ProfileKey, Arc<DecoherenceProfile>>>,
}

impl ProfileCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, p: &BathParams, times: &[f64]) -> Result<Arc<DecoherenceProfile>> {
        let key = (p.cache_key(), times.iter().map(|t| t.to_bits()).collect());
        if let Some(hit) = self.inner.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let prof = Arc::new(DecoherenceProfile::compute(p, times)?);
        let mut guard = self.inner.lock().expect("cache lock");
        Ok(Arc::clone(guard.entry(key).or_insert(prof)))
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain composite trapezoid on a uniform grid; a second quadrature
    /// scheme independent of the adaptive Gauss–Kronrod path.
    fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = 0.5 * (f(a) + f(b));
        for k in 1..n {
            acc += f(a + h * k as f64);
        }
        acc * h
    }

    /// Composite Simpson on a uniform grid.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for k in 1..n {
            acc += f(a + h * k as f64) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn zero_time_is_exactly_zero() {
        let p = BathParams::reference();
        assert_eq!(gamma_t(&p, 0.0).unwrap(), 0.0);
        assert_eq!(theta_t(&p, 0.0).unwrap(), 0.0);
        assert_eq!(bphase_t(&p, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn negative_time_rejected() {
        let p = BathParams::reference();
        assert_eq!(gamma_t(&p, -1.0), Err(Error::NegativeTime(-1.0)));
    }

    #[test]
    fn markov_rate_examples() {
        let p = BathParams::reference();
        assert!((markov_rate(&p) - 0.1).abs() < 1e-15);
        let p2 = BathParams::new(0.2, 0.01, 1.0 / (4.0 * PI)).unwrap();
        assert!((markov_rate(&p2) - 0.2).abs() < 1e-15);
        let p3 = BathParams::new(0.1, 0.01, 1.0 / (2.0 * PI)).unwrap();
        assert!((markov_rate(&p3) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(BathParams::new(0.0, 0.01, 0.1).is_err());
        assert!(BathParams::new(0.1, -1.0, 0.1).is_err());
        assert!(BathParams::new(0.1, 0.01, f64::NAN).is_err());
    }

    #[test]
    fn gamma_plateau_matches_trapezoid() {
        let p = BathParams::reference();
        let t = 1e4;
        let g = gamma_t(&p, t).unwrap();
        // independent evaluation: trapezoid on a fine grid resolving sin(wt),
        // integrand written with the exact limit at w = 0
        let w_max = p.lambda * 80.0;
        let f = |w: f64| {
            if w == 0.0 {
                2.0 * p.eta * 2.0 * p.kt * t
            } else {
                2.0 * p.eta * (-w / p.lambda).exp() * (w * t).sin() / (w / (2.0 * p.kt)).tanh()
            }
        };
        let n = 4_000_000;
        let oracle = trapezoid(f, 0.0, w_max, n);
        assert!((g - oracle).abs() <= 1e-6 * oracle.abs(), "{g} vs {oracle}");
        // the plateau sits near 2 pi eta kT for cutoff << kT
        assert!((g / (2.0 * PI * p.eta * p.kt) - 1.0).abs() < 0.05);
        // memory exhausted: neighbouring late-time rates differ by < 1%
        let g2 = gamma_t(&p, 1.1e4).unwrap();
        assert!((g2 - g).abs() < 0.01 * g);
    }

    #[test]
    fn theta_is_integral_of_gamma() {
        let p = BathParams::reference();
        let grid: Vec<f64> = (0..50).map(|k| 20.0 * k as f64 / 49.0).collect();
        for &t in &grid[1..] {
            let theta = theta_t(&p, t).unwrap();
            let by_time = simpson(|s| gamma_t(&p, s).unwrap(), 0.0, t, 200);
            assert!((theta - by_time).abs() <= 1e-6, "t={t}: {theta} vs {by_time}");
        }
    }

    #[test]
    fn bphase_is_integral_of_dissipative_kernel() {
        let p = BathParams::reference();
        for t in [1.0, 5.0, 20.0, 100.0] {
            let b = bphase_t(&p, t).unwrap();
            let by_time = simpson(|s| dissipative_t(&p, s).unwrap(), 0.0, t, 200);
            assert!((b - by_time).abs() <= 1e-6, "t={t}: {b} vs {by_time}");
            // closed form for the Ohmic kernel
            let lt = p.lambda * t;
            let exact = p.eta * (lt - lt.atan());
            assert!((b - exact).abs() <= 1e-8 * exact.abs().max(1e-12));
        }
    }

    #[test]
    fn bphase_is_temperature_independent() {
        let p = BathParams::reference();
        let hot = BathParams { kt: 2.0 * p.kt, ..p };
        for t in [0.5, 3.0, 40.0] {
            assert_eq!(bphase_t(&p, t).unwrap(), bphase_t(&hot, t).unwrap());
        }
    }

    #[test]
    fn linear_in_coupling() {
        let p = BathParams::reference();
        let q = BathParams { eta: 2.0 * p.eta, ..p };
        for t in [0.3, 7.0, 150.0] {
            for f in [gamma_t, theta_t, bphase_t] {
                let (a, b) = (f(&p, t).unwrap(), f(&q, t).unwrap());
                assert!((b - 2.0 * a).abs() <= 1e-10 * b.abs());
            }
        }
    }

    #[test]
    fn profile_is_monotone_and_cached() {
        let p = BathParams::reference();
        let grid: Vec<f64> = (0..50).map(|k| 100.0 * k as f64 / 49.0).collect();
        let cache = ProfileCache::new();
        let prof = cache.get(&p, &grid).unwrap();
        assert_eq!(prof.theta[0], 0.0);
        assert_eq!(prof.bphase[0], 0.0);
        assert_eq!(prof.gamma[0], 0.0);
        assert!(prof.theta.windows(2).all(|w| w[1] >= w[0]));
        assert!(prof.bphase.windows(2).all(|w| w[1] >= w[0]));
        let again = cache.get(&p, &grid).unwrap();
        assert!(Arc::ptr_eq(&prof, &again));
        assert_eq!(cache.len(), 1);
        assert_eq!(prof.index_of(grid[7]), Some(7));
    }

    #[test]
    fn non_markov_accumulation_stays_below_markov_in_reference_window() {
        let p = BathParams::reference();
        let g0 = markov_rate(&p);
        for k in 0..=50 {
            let t = 20.0 * k as f64 / 50.0;
            assert!(theta_t(&p, t).unwrap() <= g0 * t + 1e-15);
        }
    }
}
