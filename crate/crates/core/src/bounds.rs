//! Rate-distortion arithmetic for Bernoulli sources under Hamming distortion.
//!
//! Entropies are in bits; the test-channel parameter `beta` uses natural logs
//! because the check potentials are `e^{±beta}`.

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};

const BISECTION_STEPS: usize = 200;
const ENTROPY_TOLERANCE: f64 = 1e-12;
const DENSITY_TOLERANCE: f64 = 1e-9;

/// H(p) in bits with 0·log 0 = 0.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// The unique p in [0, 0.5] with H(p) = h.
pub fn inverse_entropy(h: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&h) || h.is_nan() {
        return Err(Error::Domain(format!("entropy {h} outside [0, 1]")));
    }
    if h == 0.0 {
        return Ok(0.0);
    }
    if h == 1.0 {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let r = binary_entropy(mid) - h;
        if r.abs() <= ENTROPY_TOLERANCE || hi - lo <= f64::EPSILON * mid {
            return Ok(mid);
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// D(R; p_s): the distortion with H(D) = H(p_s) − R. Zero (with a notice)
/// when the rate exceeds the source entropy.
pub fn distortion_bound(rate: f64, p_s: f64) -> Result<f64> {
    check_source(p_s)?;
    if rate < 0.0 {
        return Err(Error::Domain(format!("negative rate {rate}")));
    }
    let h = binary_entropy(p_s);
    if rate > h {
        warn!("rate {rate} exceeds source entropy {h}; distortion bound is 0");
        return Ok(0.0);
    }
    inverse_entropy(h - rate)
}

fn check_source(p_s: f64) -> Result<()> {
    if !(p_s > 0.0 && p_s <= 0.5) {
        return Err(Error::Domain(format!(
            "source probability {p_s} outside (0, 0.5]"
        )));
    }
    Ok(())
}

/// Left side of the density-matching condition: (p_s − D)/(1 − 2D).
pub fn matched_density(rate: f64, p_s: f64) -> Result<f64> {
    let d = distortion_bound(rate, p_s)?;
    Ok((p_s - d) / (1.0 - 2.0 * d))
}

/// Source one-probability whose optimal reconstruction has one-density `r`.
/// Densities above 0.5 are reflected to 1 − r.
pub fn source_prob_for_density(rate: f64, r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!(
            "codeword density {r} outside (0, 1)"
        )));
    }
    let r = if r > 0.5 {
        warn!("density {r} above 0.5 reflected to {}", 1.0 - r);
        1.0 - r
    } else {
        r
    };
    // g(p) = (p − D)/(1 − 2D) − r is increasing in p on (0, 0.5].
    let g = |p: f64| matched_density(rate, p).map(|v| v - r);
    let g_hi = g(0.5)?;
    if g_hi.abs() <= DENSITY_TOLERANCE {
        return Ok(0.5);
    }
    if g_hi < 0.0 {
        return Err(Error::Domain(format!(
            "no source probability in (0, 0.5] matches density {r} at rate {rate}"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let v = g(mid)?;
        if v.abs() <= DENSITY_TOLERANCE * 1e-3 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = 0.5 * (lo + hi);
    if g(p)?.abs() > DENSITY_TOLERANCE {
        return Err(Error::Domain(format!(
            "no source probability in (0, 0.5] matches density {r} at rate {rate}"
        )));
    }
    Ok(p)
}

/// beta = ½·ln((1 − D)/D), the log-likelihood ratio of the test channel.
pub fn beta_from_distortion(d: f64) -> Result<f64> {
    if !(d > 0.0 && d <= 0.5) {
        return Err(Error::Config(format!(
            "test-channel distortion {d} must lie in (0, 0.5] for a finite beta"
        )));
    }
    Ok(0.5 * ((1.0 - d) / d).ln())
}

pub fn beta_for(rate: f64, p_s: f64) -> Result<f64> {
    beta_from_distortion(distortion_bound(rate, p_s)?)
}

/// Distortion of time-sharing between the zero-rate point (D = p_s) and the
/// lossless point (R = H(p_s)).
pub fn time_sharing_bound(rate: f64, p_s: f64) -> Result<f64> {
    check_source(p_s)?;
    let h = binary_entropy(p_s);
    Ok((p_s * (h - rate) / h).max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RdPoint {
    #[serde(rename = "R")]
    pub rate: f64,
    pub p_s: f64,
    #[serde(rename = "D_rd")]
    pub d_rd: f64,
    #[serde(rename = "D_ts")]
    pub d_ts: f64,
    pub beta: f64,
    pub r: f64,
}

impl RdPoint {
    pub fn new(rate: f64, p_s: f64, r: f64) -> Result<Self> {
        let d_rd = distortion_bound(rate, p_s)?;
        Ok(RdPoint {
            rate,
            p_s,
            d_rd,
            d_ts: time_sharing_bound(rate, p_s)?,
            beta: beta_from_distortion(d_rd)?,
            r,
        })
    }
}
