//! Spatially correlated Gauss-Markov block fading.
//!
//! A channel run is parameterized by the antenna count, the exponential
//! spatial correlation parameter `a`, and the temporal coefficient `eta`.
//! Block 0 draws h ~ CN(0, R); every later block mixes the previous vector
//! with a fresh innovation so the marginal distribution stays CN(0, R).

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{psd_sqrt, CMat, CVec};
use crate::rng::complex_gaussian_vector;

/// Speed of light approximation used for Doppler frequencies.
const PROPAGATION_SPEED_M_S: f64 = 3.0e8;

/// Static parameters of one fading process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// Transmit antenna count.
    pub n_tx: usize,
    /// Exponential spatial correlation parameter, in [0, 1).
    pub a: f64,
    /// Temporal correlation coefficient between consecutive blocks, in [0, 1].
    pub eta: f64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 {
            return Err(Error::Domain("antenna count must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.a) {
            return Err(Error::Domain(format!(
                "spatial correlation must lie in [0, 1), got {}",
                self.a
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Domain(format!(
                "temporal coefficient must lie in [0, 1], got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// True channel vector of one fading block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub block_index: usize,
    pub h: CVec,
}

/// A fading process with its correlation matrix and cached square root.
/// Build one per run; the spatial statistics are fixed across all blocks.
#[derive(Debug, Clone)]
pub struct GaussMarkovChannel {
    cfg: ChannelConfig,
    r: CMat,
    r_sqrt: CMat,
}

impl GaussMarkovChannel {
    pub fn new(cfg: ChannelConfig) -> Result<Self> {
        cfg.validate()?;
        let r = exponential_correlation(cfg.n_tx, cfg.a)?;
        let r_sqrt = psd_sqrt(&r)?;
        Ok(Self { cfg, r, r_sqrt })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    /// Spatial correlation matrix R with trace equal to the antenna count.
    pub fn correlation(&self) -> &CMat {
        &self.r
    }

    pub fn correlation_sqrt(&self) -> &CMat {
        &self.r_sqrt
    }

    /// Draw the first block: h = R^{1/2} g with g ~ CN(0, I).
    pub fn init_block<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelState {
        let g = complex_gaussian_vector(rng, self.cfg.n_tx);
        ChannelState {
            block_index: 0,
            h: &self.r_sqrt * g,
        }
    }

    /// Advance one block: h' = eta·h + sqrt(1 - eta²)·R^{1/2}·g.
    pub fn evolve_block<R: Rng + ?Sized>(&self, state: &ChannelState, rng: &mut R) -> ChannelState {
        let g = complex_gaussian_vector(rng, self.cfg.n_tx);
        let eta = Complex64::new(self.cfg.eta, 0.0);
        let fade = Complex64::new((1.0 - self.cfg.eta * self.cfg.eta).max(0.0).sqrt(), 0.0);
        let h = state.h.map(|z| z * eta) + (&self.r_sqrt * g).map(|z| z * fade);
        ChannelState {
            block_index: state.block_index + 1,
            h,
        }
    }
}

/// Exponential spatial correlation: entry (j, k) = a^{|j-k|}. Unit diagonal,
/// so the trace equals the antenna count exactly.
pub fn exponential_correlation(n_tx: usize, a: f64) -> Result<CMat> {
    if n_tx == 0 {
        return Err(Error::Domain("antenna count must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&a) {
        return Err(Error::Domain(format!(
            "spatial correlation must lie in [0, 1), got {a}"
        )));
    }
    Ok(CMat::from_fn(n_tx, n_tx, |j, k| {
        Complex64::new(a.powi((j as i32 - k as i32).abs()), 0.0)
    }))
}

/// Temporal coefficient from Jakes' model: J0(2π f_D τ) with the Doppler
/// frequency f_D = (v/3.6)·f_c/c for a speed given in km/h.
pub fn jakes_eta(v_kmh: f64, f_c_hz: f64, tau_s: f64) -> f64 {
    let doppler_hz = (v_kmh / 3.6) * f_c_hz / PROPAGATION_SPEED_M_S;
    crate::numerics::bessel_j0(2.0 * std::f64::consts::PI * doppler_hz * tau_s)
}

/// Frobenius distance relative to the norm of `b`; used by the moment tests.
#[cfg(test)]
fn rel_frob(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm()
}
