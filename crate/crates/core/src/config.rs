//! Simulation parameters and their validation.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Rect;
use crate::Real;

/// How a boat's first visible emission populates its new track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BirthMode {
    /// Exactly one head packet per boat entry (when `lambda_gamma > 0`).
    #[default]
    Single,
    /// `Poisson(lambda_gamma)` head packets per boat entry.
    Poisson,
}

/// Every scalar that drives a run. Times are in hours, positions in abstract
/// planar units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SimConfig<T> {
    /// Number of frames; frame `n` sits at `t = n * dt`.
    pub n_frames: usize,
    /// Inter-frame interval.
    pub dt: T,
    /// Ship-to-cloud visibility lag.
    pub epsilon_lag: T,
    /// Motion diffusivity, position units per sqrt(hour).
    pub sigma_x: T,
    /// Spawn placement spread.
    pub sigma_beta: T,
    /// Spontaneous-birth placement spread.
    pub sigma_b: T,
    /// Mean track lifetime.
    #[serde(rename = "lambda_T")]
    pub lambda_t: T,
    /// Packet death-time standard deviation.
    pub sigma_pd: T,
    /// Spontaneous-birth intensity scale.
    pub lambda_gamma: T,
    /// Lower detection threshold; `-inf` detects everything from below.
    pub iota_low: T,
    /// Upper detection threshold; `+inf` detects everything from above.
    pub iota_high: T,
    pub window: Rect<T>,
    /// Pixel counts `[width, height]`.
    pub grid: [usize; 2],
    pub seed: u64,
    pub birth_mode: BirthMode,
    /// Upper bound on packets placed by a single spontaneous birth.
    pub max_births: u64,
}

impl<T: Real> SimConfig<T> {
    /// Parameters of the four-boat circular-wind scenario.
    ///
    /// The window is chosen so the four boats cross into it at distinct times
    /// (red at 0 h, purple at 1 h, blue at 5 h, yellow at 8 h).
    pub fn paper_table1() -> Self {
        let sigma_beta = T::lit(0.01);
        Self {
            n_frames: 100,
            dt: T::lit(0.2),
            epsilon_lag: T::lit(5.0),
            sigma_x: T::lit(0.01),
            sigma_beta,
            sigma_b: sigma_beta,
            lambda_t: T::lit(80.0),
            sigma_pd: T::lit(0.2),
            lambda_gamma: T::one(),
            iota_low: T::neg_infinity(),
            iota_high: T::infinity(),
            window: Rect::new(T::zero(), T::zero(), T::lit(12.0), T::lit(17.5)),
            grid: [512, 512],
            seed: 0,
            birth_mode: BirthMode::Single,
            max_births: 10_000,
        }
    }

    /// Time of frame `n`, computed from the integer index.
    pub fn frame_time(&self, n: usize) -> T {
        T::lit(n as f64) * self.dt
    }

    /// Simulation horizon `N * dt`.
    pub fn horizon(&self) -> T {
        self.frame_time(self.n_frames)
    }

    /// True when both thresholds are open, so detection never filters.
    pub fn detection_open(&self) -> bool {
        self.iota_low == T::neg_infinity() && self.iota_high == T::infinity()
    }
}

/// One failed configuration invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigViolation {
    #[error("NonPositiveDt: dt must be > 0")]
    NonPositiveDt,
    #[error("ZeroFrames: n_frames must be >= 1")]
    ZeroFrames,
    #[error("NonPositiveLifetimeMean: lambda_T must be > 0")]
    NonPositiveLifetimeMean,
    #[error("ThresholdOrder: iota_low must be < iota_high")]
    ThresholdOrder,
    #[error("EmptyWindow: window must have strictly positive area")]
    EmptyWindow,
    #[error("EmptyGrid: grid dimensions must be >= 1")]
    EmptyGrid,
    #[error("NegativeSigma: {0} must be >= 0")]
    NegativeSigma(&'static str),
    #[error("NegativeLag: epsilon_lag must be >= 0")]
    NegativeLag,
    #[error("NegativeIntensity: lambda_gamma must be >= 0")]
    NegativeIntensity,
    #[error("NonFinite: {0} must be finite")]
    NonFinite(&'static str),
}

impl ConfigViolation {
    /// Short variant name, as used in diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Self::NonPositiveDt => "NonPositiveDt",
            Self::ZeroFrames => "ZeroFrames",
            Self::NonPositiveLifetimeMean => "NonPositiveLifetimeMean",
            Self::ThresholdOrder => "ThresholdOrder",
            Self::EmptyWindow => "EmptyWindow",
            Self::EmptyGrid => "EmptyGrid",
            Self::NegativeSigma(_) => "NegativeSigma",
            Self::NegativeLag => "NegativeLag",
            Self::NegativeIntensity => "NegativeIntensity",
            Self::NonFinite(_) => "NonFinite",
        }
    }
}

/// All violations found in one config.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigErrors(pub Vec<ConfigViolation>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for v in &self.0 {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

impl ConfigErrors {
    pub fn contains(&self, name: &str) -> bool {
        self.0.iter().any(|v| v.name() == name)
    }
}

/// A [`SimConfig`] whose invariants have been checked.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
#[serde(transparent)]
pub struct ValidatedConfig<T>(SimConfig<T>);

impl<T> ValidatedConfig<T> {
    pub fn into_inner(self) -> SimConfig<T> {
        self.0
    }
}

impl<T> Deref for ValidatedConfig<T> {
    type Target = SimConfig<T>;
    fn deref(&self) -> &SimConfig<T> {
        &self.0
    }
}

/// Checks every invariant and reports all violations together.
pub fn validate_config<T: Real>(cfg: SimConfig<T>) -> Result<ValidatedConfig<T>, ConfigErrors> {
    let mut errs = Vec::new();

    let finite = [
        ("dt", cfg.dt),
        ("epsilon_lag", cfg.epsilon_lag),
        ("sigma_x", cfg.sigma_x),
        ("sigma_beta", cfg.sigma_beta),
        ("sigma_b", cfg.sigma_b),
        ("lambda_T", cfg.lambda_t),
        ("sigma_pd", cfg.sigma_pd),
        ("lambda_gamma", cfg.lambda_gamma),
    ];
    for (name, v) in finite {
        if !v.is_finite() {
            errs.push(ConfigViolation::NonFinite(name));
        }
    }
    if !cfg.window.is_finite() {
        errs.push(ConfigViolation::NonFinite("window"));
    }
    // thresholds may be infinite sentinels but never NaN
    if cfg.iota_low.is_nan() {
        errs.push(ConfigViolation::NonFinite("iota_low"));
    }
    if cfg.iota_high.is_nan() {
        errs.push(ConfigViolation::NonFinite("iota_high"));
    }

    if !(cfg.dt > T::zero()) {
        errs.push(ConfigViolation::NonPositiveDt);
    }
    if cfg.n_frames == 0 {
        errs.push(ConfigViolation::ZeroFrames);
    }
    if !(cfg.lambda_t > T::zero()) {
        errs.push(ConfigViolation::NonPositiveLifetimeMean);
    }
    if !(cfg.iota_low < cfg.iota_high) {
        errs.push(ConfigViolation::ThresholdOrder);
    }
    if !(cfg.window.width() > T::zero() && cfg.window.height() > T::zero()) {
        errs.push(ConfigViolation::EmptyWindow);
    }
    if cfg.grid[0] == 0 || cfg.grid[1] == 0 {
        errs.push(ConfigViolation::EmptyGrid);
    }
    for (name, v) in
        [("sigma_x", cfg.sigma_x), ("sigma_beta", cfg.sigma_beta), ("sigma_b", cfg.sigma_b), ("sigma_pd", cfg.sigma_pd)]
    {
        if v < T::zero() {
            errs.push(ConfigViolation::NegativeSigma(name));
        }
    }
    if cfg.epsilon_lag < T::zero() {
        errs.push(ConfigViolation::NegativeLag);
    }
    if cfg.lambda_gamma < T::zero() {
        errs.push(ConfigViolation::NegativeIntensity);
    }

    if errs.is_empty() {
        Ok(ValidatedConfig(cfg))
    } else {
        Err(ConfigErrors(errs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_is_valid() {
        let cfg = SimConfig::<f64>::paper_table1();
        let v = validate_config(cfg.clone()).unwrap();
        assert_eq!(v.n_frames, 100);
        assert_eq!(v.dt, 0.2);
        assert_eq!(v.epsilon_lag, 5.0);
        assert_eq!(v.sigma_beta, 0.01);
        assert_eq!(v.sigma_x, 0.01);
        assert_eq!(v.lambda_t, 80.0);
        assert_eq!(v.sigma_pd, 0.2);
    }

    #[test]
    fn zero_dt_is_rejected() {
        let mut cfg = SimConfig::<f64>::paper_table1();
        cfg.dt = 0.0;
        let errs = validate_config(cfg).unwrap_err();
        assert_eq!(errs.0, vec![ConfigViolation::NonPositiveDt]);
    }

    #[test]
    fn inverted_thresholds_are_rejected() {
        let mut cfg = SimConfig::<f64>::paper_table1();
        cfg.iota_low = 0.9;
        cfg.iota_high = 0.2;
        assert!(validate_config(cfg).unwrap_err().contains("ThresholdOrder"));
    }

    #[test]
    fn all_violations_reported_together() {
        let mut cfg = SimConfig::<f32>::paper_table1();
        cfg.dt = -1.0;
        cfg.n_frames = 0;
        cfg.grid = [0, 4];
        cfg.sigma_x = -0.1;
        cfg.window = Rect::new(1.0, 1.0, 1.0, 3.0);
        let errs = validate_config(cfg).unwrap_err();
        for name in ["NonPositiveDt", "ZeroFrames", "EmptyGrid", "NegativeSigma", "EmptyWindow"] {
            assert!(errs.contains(name), "missing {name} in {errs}");
        }
    }

    #[test]
    fn validation_is_idempotent() {
        let v = validate_config(SimConfig::<f64>::paper_table1()).unwrap();
        let again = validate_config(v.clone().into_inner()).unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn frame_time_does_not_accumulate() {
        let cfg = SimConfig::<f64>::paper_table1();
        assert_eq!(cfg.frame_time(100), 100.0 * 0.2);
        assert!((cfg.horizon() - 20.0).abs() < 1e-12);
    }
}
