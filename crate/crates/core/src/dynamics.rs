//! Packet motion and packet/track lifetimes.
//!
//! Over one interval the wind is frozen at the interval start, which makes
//! the motion SDE's one-step transition an exact Gaussian:
//! `x_t | x_s ~ N2(x_s + mu(x_s, s) (t - s), sigma_x^2 (t - s) I)`.

use thiserror::Error;

use crate::geom::Vec2;
use crate::rng::RngStream;
use crate::types::Packet;
use crate::wind::{eval_wind, WindError, WindField};
use crate::Real;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("NegativeDuration: transition from t={from} to t={to}")]
    NegativeDuration { from: f64, to: f64 },
    #[error("NonPositiveMean: exponential mean must be > 0, got {0}")]
    NonPositiveMean(f64),
    #[error("NonPositiveLifetime: track lifetime must be > 0, got {0}")]
    NonPositiveLifetime(f64),
    #[error(transparent)]
    Wind(#[from] WindError),
}

/// Draws the position at `t_to` given position `pos` at `t_from`.
pub fn transition<T: Real>(
    pos: Vec2<T>,
    t_from: T,
    t_to: T,
    field: &WindField<T>,
    sigma_x: T,
    rng: &mut RngStream,
) -> Result<Vec2<T>, DynamicsError> {
    if t_to < t_from {
        return Err(DynamicsError::NegativeDuration { from: t_from.as_f64(), to: t_to.as_f64() });
    }
    let dt = t_to - t_from;
    let drift = eval_wind(field, pos, t_from)? * dt;
    let scale = sigma_x * dt.sqrt();
    let z = Vec2::new(T::lit(rng.standard_normal()), T::lit(rng.standard_normal()));
    Ok(pos + drift + z * scale)
}

/// Quantile of the exponential distribution with the given mean.
pub fn exponential_quantile<T: Real>(mean: T, u: T) -> T {
    -mean * (-u).ln_1p()
}

/// Exponential track lifetime with mean `lambda_t` hours, by inversion.
pub fn sample_track_lifetime<T: Real>(lambda_t: T, rng: &mut RngStream) -> Result<T, DynamicsError> {
    if !(lambda_t > T::zero()) {
        return Err(DynamicsError::NonPositiveMean(lambda_t.as_f64()));
    }
    Ok(exponential_quantile(lambda_t, T::lit(rng.uniform_open01())))
}

/// Location and squared scale of a log-normal law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalParams<T> {
    pub mu: T,
    pub sigma2: T,
}

impl<T: Real> LogNormalParams<T> {
    pub fn mean(&self) -> T {
        (self.mu + self.sigma2 / T::lit(2.0)).exp()
    }

    pub fn variance(&self) -> T {
        self.sigma2.exp_m1() * (T::lit(2.0) * self.mu + self.sigma2).exp()
    }
}

/// Log-normal parameters whose law has mean `lifetime` and standard
/// deviation `sigma_pd`:
/// `sigma2 = ln((sigma_pd^2 + T^2) / T^2)`, `mu = ln(T^2 / sqrt(sigma_pd^2 + T^2))`.
pub fn lognormal_death_params<T: Real>(lifetime: T, sigma_pd: T) -> Result<LogNormalParams<T>, DynamicsError> {
    if !(lifetime > T::zero()) {
        return Err(DynamicsError::NonPositiveLifetime(lifetime.as_f64()));
    }
    let ratio = sigma_pd / lifetime;
    let sigma2 = (ratio * ratio).ln_1p();
    Ok(LogNormalParams { mu: lifetime.ln() - sigma2 / T::lit(2.0), sigma2 })
}

/// Death time of a packet born at `birth_time` on a track of mean lifetime
/// `lifetime`.
pub fn sample_packet_death<T: Real>(
    birth_time: T,
    lifetime: T,
    sigma_pd: T,
    rng: &mut RngStream,
) -> Result<T, DynamicsError> {
    let params = lognormal_death_params(lifetime, sigma_pd)?;
    if params.sigma2 == T::zero() {
        return Ok(birth_time + lifetime);
    }
    let z = T::lit(rng.standard_normal());
    Ok(birth_time + (params.mu + params.sigma2.sqrt() * z).exp())
}

/// A packet is alive at `t` iff its death time lies strictly after `t`.
pub fn survives<T: Real>(packet: &Packet<T>, t: T) -> bool {
    packet.death_time > t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Mechanism, StreamKey};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_diffusion_is_pure_drift() {
        let wind = WindField::Uniform(Vec2::new(1.0, 2.0));
        let mut rng = RngStream::aux(1, 0);
        let p = transition(Vec2::zero(), 0.0, 0.2, &wind, 0.0, &mut rng).unwrap();
        assert_relative_eq!(p.x, 0.2);
        assert_relative_eq!(p.y, 0.4);
    }

    #[test]
    fn backwards_transition_is_an_error() {
        let wind = WindField::Uniform(Vec2::new(1.0, 2.0));
        let mut rng = RngStream::aux(1, 0);
        let err = transition(Vec2::zero(), 1.0, 0.5, &wind, 0.01, &mut rng).unwrap_err();
        assert!(matches!(err, DynamicsError::NegativeDuration { .. }));
    }

    #[test]
    fn table1_step_variance() {
        let (sigma_x, dt): (f64, f64) = (0.01, 0.2);
        assert_relative_eq!(sigma_x * sigma_x * dt, 2e-5, max_relative = 1e-12);
    }

    #[test]
    fn exponential_median() {
        assert_relative_eq!(exponential_quantile(80.0, 0.5), 55.451774444795625, max_relative = 1e-14);
    }

    #[test]
    fn track_lifetime_needs_positive_mean() {
        let mut rng = RngStream::aux(1, 0);
        assert!(matches!(sample_track_lifetime(0.0, &mut rng), Err(DynamicsError::NonPositiveMean(_))));
        for _ in 0..1000 {
            assert!(sample_track_lifetime(80.0, &mut rng).unwrap() > 0.0);
        }
    }

    #[test]
    fn table1_lognormal_params() {
        // independent evaluation of ln((s^2+T^2)/T^2) and ln(T^2/sqrt(s^2+T^2))
        let p = lognormal_death_params(80.0_f64, 0.2).unwrap();
        assert_relative_eq!(p.sigma2, 6.2499804688168135e-06, max_relative = 1e-9);
        assert_relative_eq!(p.mu, 4.3820235096836475, max_relative = 1e-14);
        assert_relative_eq!(p.mu - 80.0_f64.ln(), -3.1249902344870267e-06, max_relative = 1e-6);
    }

    #[test]
    fn zero_spread_is_degenerate() {
        let p = lognormal_death_params(80.0_f64, 0.0).unwrap();
        assert_eq!(p.sigma2, 0.0);
        assert_eq!(p.mu, 80.0_f64.ln());
        let mut rng = RngStream::aux(1, 0);
        assert_eq!(sample_packet_death(3.4, 80.0, 0.0, &mut rng).unwrap(), 3.4 + 80.0);
    }

    #[test]
    fn death_needs_positive_lifetime() {
        let mut rng = RngStream::aux(1, 0);
        assert!(matches!(sample_packet_death(0.0, -1.0, 0.2, &mut rng), Err(DynamicsError::NonPositiveLifetime(_))));
    }

    #[test]
    fn survival_is_strict() {
        let p = Packet { id: 0, track_id: 0, pos: Vec2::zero(), birth_time: 0.0, death_time: 10.0, is_head: false };
        assert!(survives(&p, 9.8));
        assert!(!survives(&p, 10.0));
        assert!(!survives(&p, 10.2));
    }

    #[test]
    fn death_strictly_after_birth() {
        let mut rng = RngStream::new(5, StreamKey::new(0, Mechanism::Death, 0));
        for _ in 0..10_000 {
            assert!(sample_packet_death(7.0, 0.5, 0.4, &mut rng).unwrap() > 7.0);
        }
    }

    proptest! {
        #[test]
        fn lognormal_moments_match(lifetime in 0.01f64..500.0, spread in 0.0f64..50.0) {
            let p = lognormal_death_params(lifetime, spread).unwrap();
            prop_assert!((p.mean() - lifetime).abs() <= 1e-12 * lifetime);
            prop_assert!((p.variance() - spread * spread).abs() <= 1e-9 * (spread * spread).max(1e-300) + 1e-300);
        }

        #[test]
        fn survival_is_monotone(death in 0.0f64..100.0, t in 0.0f64..100.0, dt in 0.0f64..50.0) {
            let p = Packet { id: 0, track_id: 0, pos: Vec2::zero(), birth_time: 0.0, death_time: death, is_head: false };
            if !survives(&p, t) {
                prop_assert!(!survives(&p, t + dt));
            }
        }
    }
}
