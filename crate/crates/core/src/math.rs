//! Special functions and Rayleigh channel-statistics maps: the exponential
//! integral E1, the bijection between power-control thresholds and action
//! probabilities, and inverse-CDF SNR sampling.

use crate::rng::SlotRng;
use crate::{Error, Result, State};
use serde::Serialize;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral E1(z) = ∫_z^∞ e^{−t}/t dt for z > 0.
///
/// Power series below 1, modified Lentz continued fraction above; relative
/// accuracy is a few ulps across [1e-6, 700].
pub fn exp_integral_e1(z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("E1 requires z > 0, got {z}")));
    }
    if z <= 1.0 {
        Ok(e1_series(z))
    } else {
        Ok((-z).exp() * e1_cf_scaled(z))
    }
}

/// Scaled exponential integral e^z·E1(z), safe from underflow for large z.
///
/// For z = ln(1/x) this equals E1(ln(1/x))/x, the combination appearing in
/// the average-cost expressions, so tiny x never overflows.
pub fn exp_integral_e1_scaled(z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("E1 requires z > 0, got {z}")));
    }
    if z <= 1.0 {
        Ok(z.exp() * e1_series(z))
    } else {
        Ok(e1_cf_scaled(z))
    }
}

fn e1_series(z: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -z / k as f64;
        let add = -term / k as f64;
        sum += add;
        if add.abs() <= sum.abs() * 1e-17 {
            break;
        }
    }
    -EULER_GAMMA - z.ln() + sum
}

// Modified Lentz evaluation of the continued fraction for e^z E1(z), z > 1.
fn e1_cf_scaled(z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..400 {
        let a = -(i as f64) * (i as f64);
        b += 2.0;
        d = a * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Truncated channel-inversion thresholds (linear SNR).
///
/// A user transmits at the high level above `tau_pn`, at the low level in
/// (`tau`, `tau_pn`], and stays silent at or below `tau`. `tau_pn` may be
/// +∞ (high power disabled). The degenerate boundaries of the state simplex
/// are representable: `tau_pn == tau` leaves the low-power band empty
/// (x2 = 0) and both infinite means the user never transmits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    tau: f64,
    tau_pn: f64,
}

impl Thresholds {
    pub fn new(tau: f64, tau_pn: f64) -> Result<Self> {
        if !(tau >= 0.0) || !(tau_pn >= tau) {
            return Err(Error::InvalidParameter(format!(
                "thresholds need tau_pn >= tau >= 0, got tau={tau}, tau_pn={tau_pn}"
            )));
        }
        Ok(Self { tau, tau_pn })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn tau_pn(&self) -> f64 {
        self.tau_pn
    }
}

/// Maps a state to the thresholds realizing its action probabilities under
/// Rayleigh fading with average SNR `avg_snr`:
/// tau = γ̄·ln(1/(x1+x2)), tau_pn = γ̄·ln(1/x1).
pub fn thresholds_from_state(x: &State, avg_snr: f64) -> Result<Thresholds> {
    if !(avg_snr > 0.0) {
        return Err(Error::InvalidParameter(format!("avg_snr must be > 0, got {avg_snr}")));
    }
    let transmit = x.x1() + x.x2();
    let tau = if transmit <= 0.0 {
        f64::INFINITY
    } else if transmit >= 1.0 {
        0.0
    } else {
        avg_snr * (1.0 / transmit).ln()
    };
    let tau_pn = if x.x1() <= 0.0 { f64::INFINITY } else { avg_snr * (1.0 / x.x1()).ln() };
    Thresholds::new(tau, tau_pn)
}

/// Inverse of [`thresholds_from_state`] via the exponential SNR CDF:
/// x1 = e^{−tau_pn/γ̄}, x2 = e^{−tau/γ̄} − x1, x3 = 1 − e^{−tau/γ̄}.
pub fn state_from_thresholds(t: &Thresholds, avg_snr: f64) -> Result<State> {
    if !(avg_snr > 0.0) {
        return Err(Error::InvalidParameter(format!("avg_snr must be > 0, got {avg_snr}")));
    }
    let p_transmit = (-t.tau() / avg_snr).exp();
    let x1 = if t.tau_pn().is_infinite() { 0.0 } else { (-t.tau_pn() / avg_snr).exp() };
    State::new(x1, p_transmit - x1, 1.0 - p_transmit)
}

/// Draws an exponential SNR with mean `avg_snr` from the stream.
pub fn sample_snr(avg_snr: f64, stream: &mut SlotRng) -> f64 {
    snr_from_uniform(avg_snr, stream.next_uniform())
}

/// Inverse-CDF map: γ = −γ̄·ln(u) for u ∈ (0, 1].
#[inline]
pub fn snr_from_uniform(avg_snr: f64, u: f64) -> f64 {
    -avg_snr * u.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Frozen against the quadrature oracle in tests/common (cross-checked
    // against an independent multiprecision evaluation).
    const E1_AT_1: f64 = 0.219_383_934_395_520_3;
    const E1_AT_LN2: f64 = 0.378_671_043_061_088;

    #[test]
    fn e1_reference_values() {
        assert_relative_eq!(exp_integral_e1(1.0).unwrap(), E1_AT_1, max_relative = 1e-13);
        let ln2 = std::f64::consts::LN_2;
        let v = exp_integral_e1(ln2).unwrap();
        assert_relative_eq!(v, E1_AT_LN2, max_relative = 1e-13);
        // bound E1(x) <= e^{-x} ln(1 + 1/x)
        assert!(v <= (-ln2).exp() * (1.0 + 1.0 / ln2).ln());
    }

    #[test]
    fn e1_monotone_decreasing() {
        assert!(exp_integral_e1(2.0).unwrap() < exp_integral_e1(1.0).unwrap());
    }

    #[test]
    fn e1_domain_error() {
        assert!(exp_integral_e1(0.0).is_err());
        assert!(exp_integral_e1(-1.0).is_err());
        assert!(exp_integral_e1(f64::NAN).is_err());
    }

    #[test]
    fn e1_scaled_consistent_with_plain() {
        for &z in &[0.01, 0.3, 1.0, 2.0, 10.0, 30.0] {
            let plain = exp_integral_e1(z).unwrap();
            let scaled = exp_integral_e1_scaled(z).unwrap();
            assert_relative_eq!(scaled * (-z).exp(), plain, max_relative = 1e-13);
        }
        // safe far beyond the underflow point of e^{-z}
        let v = exp_integral_e1_scaled(690.0).unwrap();
        assert_relative_eq!(v, 0.001_447_181_025_038_569, max_relative = 1e-12);
    }

    #[test]
    fn e1_derivative_identity() {
        // d/dz E1(z) = -e^{-z}/z by central differences
        for &z in &[0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let h = z * 1e-6;
            let fd = (exp_integral_e1(z + h).unwrap() - exp_integral_e1(z - h).unwrap()) / (2.0 * h);
            let exact = -(-z).exp() / z;
            assert_relative_eq!(fd, exact, max_relative = 1e-6);
        }
    }

    #[test]
    fn thresholds_from_reference_state() {
        let x = State::new(0.035, 0.415, 0.550).unwrap();
        let t = thresholds_from_state(&x, 10.0).unwrap();
        assert_relative_eq!(t.tau(), 10.0 * (1.0f64 / 0.45).ln(), max_relative = 1e-12);
        assert_relative_eq!(t.tau_pn(), 10.0 * (1.0f64 / 0.035).ln(), max_relative = 1e-12);
        assert!((t.tau() - 7.985).abs() < 1e-3);
        assert!((t.tau_pn() - 33.524).abs() < 1e-3);
    }

    #[test]
    fn thresholds_degenerate_cases() {
        // x3 = 0: pure channel inversion, tau = 0
        let x = State::new(0.3, 0.7, 0.0).unwrap();
        let t = thresholds_from_state(&x, 5.0).unwrap();
        assert_eq!(t.tau(), 0.0);
        // x1 = 0: conventional truncated inversion, tau_pn = +inf
        let x = State::new(0.0, 0.5, 0.5).unwrap();
        let t = thresholds_from_state(&x, 5.0).unwrap();
        assert!(t.tau_pn().is_infinite());
        // x1 + x2 = 0: never transmit, both infinite, not an error
        let x = State::new(0.0, 0.0, 1.0).unwrap();
        let t = thresholds_from_state(&x, 5.0).unwrap();
        assert!(t.tau().is_infinite() && t.tau_pn().is_infinite());
        // x2 = 0 with x1 > 0: the low-power band is empty, tau_pn = tau
        let x = State::new(0.4, 0.0, 0.6).unwrap();
        let t = thresholds_from_state(&x, 5.0).unwrap();
        assert_eq!(t.tau(), t.tau_pn());
        let back = state_from_thresholds(&t, 5.0).unwrap();
        assert!(back.distance(&x) <= 1e-12);
    }

    #[test]
    fn state_from_thresholds_cases() {
        let t = Thresholds::new(0.0, f64::INFINITY).unwrap();
        let x = state_from_thresholds(&t, 3.0).unwrap();
        assert_eq!((x.x1(), x.x2(), x.x3()), (0.0, 1.0, 0.0));

        let g = 7.0;
        let t = Thresholds::new(g * 2.0f64.ln(), g * 4.0f64.ln()).unwrap();
        let x = state_from_thresholds(&t, g).unwrap();
        assert_relative_eq!(x.x1(), 0.25, max_relative = 1e-12);
        assert_relative_eq!(x.x2(), 0.25, max_relative = 1e-12);
        assert_relative_eq!(x.x3(), 0.50, max_relative = 1e-12);
    }

    #[test]
    fn threshold_state_round_trip() {
        let x = State::new(0.035, 0.415, 0.550).unwrap();
        let t = thresholds_from_state(&x, 10.0).unwrap();
        let back = state_from_thresholds(&t, 10.0).unwrap();
        assert!((back.x1() - x.x1()).abs() <= 1e-12);
        assert!((back.x2() - x.x2()).abs() <= 1e-12);
        assert!((back.x3() - x.x3()).abs() <= 1e-12);
    }

    #[test]
    fn invalid_thresholds_rejected() {
        assert!(Thresholds::new(-1.0, 2.0).is_err());
        assert!(Thresholds::new(2.0, 1.0).is_err());
        assert!(Thresholds::new(f64::NAN, 2.0).is_err());
        // equal thresholds are the legal empty-band degenerate
        assert!(Thresholds::new(2.0, 2.0).is_ok());
    }

    #[test]
    fn snr_inverse_cdf_identities() {
        assert_eq!(snr_from_uniform(10.0, 1.0), 0.0);
        assert_relative_eq!(snr_from_uniform(10.0, (-1.0f64).exp()), 10.0, max_relative = 1e-12);
    }

    #[test]
    fn snr_sample_statistics() {
        let gbar = 10.0;
        let mut stream = SlotRng::new(2024);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut above = 0usize;
        let cut = gbar * 2.0f64.ln();
        for _ in 0..n {
            let g = sample_snr(gbar, &mut stream);
            sum += g;
            if g > cut {
                above += 1;
            }
        }
        let mean = sum / n as f64;
        assert!((mean - gbar).abs() < 0.05, "mean {mean}");
        let frac = above as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.003, "tail {frac}");
    }

    #[test]
    fn threshold_map_monotonicity() {
        let g = 8.0;
        // raising tau (tau_pn fixed) raises x3 and lowers x2
        let t1 = Thresholds::new(1.0, 20.0).unwrap();
        let t2 = Thresholds::new(2.0, 20.0).unwrap();
        let a = state_from_thresholds(&t1, g).unwrap();
        let b = state_from_thresholds(&t2, g).unwrap();
        assert!(b.x3() > a.x3());
        assert!(b.x2() < a.x2());
        // raising tau_pn lowers x1
        let t3 = Thresholds::new(1.0, 30.0).unwrap();
        let c = state_from_thresholds(&t3, g).unwrap();
        assert!(c.x1() < a.x1());
    }
}
