//! Config files and named scenarios.
//!
//! A config file is flat TOML whose keys are the [`SimConfig`] field names,
//! plus a few scenario keys naming the wind, the boats and an optional
//! background image:
//!
//! ```toml
//! n_frames = 100
//! dt = 0.2
//! epsilon_lag = 5.0
//! sigma_x = 0.01
//! sigma_beta = 0.01
//! lambda_T = 80.0
//! sigma_pd = 0.2
//! lambda_gamma = 1.0
//! window = [0.0, 0.0, 12.0, 17.5]
//! grid = [512, 512]
//! seed = 7
//! wind = "paper_circular"
//! boats = ["paper_red", "paper_blue"]
//! ```
//!
//! Missing simulation keys take the four-boat scenario defaults
//! ([`SimConfig::paper_table1`]); unknown keys are rejected. `sigma_b`
//! defaults to `sigma_beta`, and omitted thresholds are open. Relative paths
//! are resolved against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::boats::{load_waypoints_path, BoatError, BoatPath};
use crate::config::{BirthMode, ConfigErrors, SimConfig};
use crate::engine::Scene;
use crate::geom::{Rect, Vec2};
use crate::render::{read_pgm_file, RenderError};
use crate::wind::{GriddedField, WindError, WindField};
use crate::Real;

/// Name of the built-in four-boat circular-wind scenario.
pub const PAPER_FIG3: &str = "paper-fig3";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Config(#[from] ConfigErrors),
    #[error(transparent)]
    Wind(#[from] WindError),
    #[error(transparent)]
    Boat(#[from] BoatError),
    #[error("background image: {0}")]
    Background(#[from] RenderError),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

impl ScenarioError {
    /// True when the fault lies in the configuration values rather than in
    /// reading some input file.
    pub fn is_config(&self) -> bool {
        matches!(self, Self::Parse(_) | Self::Conflict(_) | Self::Config(_) | Self::UnknownPreset(_))
    }
}

/// Boats given either as preset names or as a waypoint CSV path.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum BoatsSpec {
    Presets(Vec<String>),
    File(PathBuf),
}

/// Raw contents of a config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n_frames: Option<usize>,
    pub dt: Option<f64>,
    pub epsilon_lag: Option<f64>,
    pub sigma_x: Option<f64>,
    pub sigma_beta: Option<f64>,
    pub sigma_b: Option<f64>,
    #[serde(rename = "lambda_T")]
    pub lambda_t: Option<f64>,
    pub sigma_pd: Option<f64>,
    pub lambda_gamma: Option<f64>,
    pub iota_low: Option<f64>,
    pub iota_high: Option<f64>,
    pub window: Option<[f64; 4]>,
    pub grid: Option<[usize; 2]>,
    pub seed: Option<u64>,
    pub birth_mode: Option<BirthMode>,
    pub max_births: Option<u64>,
    /// Analytic wind preset name.
    pub wind: Option<String>,
    /// Gridded wind CSV (`t_hours,x,y,u,v`).
    pub wind_csv: Option<PathBuf>,
    /// Constant wind `[u, v]`.
    pub wind_uniform: Option<[f64; 2]>,
    /// Clamp gridded-wind queries to the grid instead of failing.
    pub wind_clamp: Option<bool>,
    pub boats: Option<BoatsSpec>,
    /// PGM image advected as background cloud.
    pub background: Option<PathBuf>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    /// Simulation parameters, defaults filled in. Not yet validated.
    pub fn sim_config<T: Real>(&self) -> SimConfig<T> {
        let mut c = SimConfig::<T>::paper_table1();
        let set = |dst: &mut T, v: Option<f64>| {
            if let Some(v) = v {
                *dst = T::lit(v);
            }
        };
        if let Some(n) = self.n_frames {
            c.n_frames = n;
        }
        set(&mut c.dt, self.dt);
        set(&mut c.epsilon_lag, self.epsilon_lag);
        set(&mut c.sigma_x, self.sigma_x);
        set(&mut c.sigma_beta, self.sigma_beta);
        c.sigma_b = c.sigma_beta;
        set(&mut c.sigma_b, self.sigma_b);
        set(&mut c.lambda_t, self.lambda_t);
        set(&mut c.sigma_pd, self.sigma_pd);
        set(&mut c.lambda_gamma, self.lambda_gamma);
        set(&mut c.iota_low, self.iota_low);
        set(&mut c.iota_high, self.iota_high);
        if let Some([x0, y0, x1, y1]) = self.window {
            c.window = Rect::new(T::lit(x0), T::lit(y0), T::lit(x1), T::lit(y1));
        }
        if let Some(g) = self.grid {
            c.grid = g;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(m) = self.birth_mode {
            c.birth_mode = m;
        }
        if let Some(m) = self.max_births {
            c.max_births = m;
        }
        c
    }
}

/// A config together with the inputs it refers to.
#[derive(Debug, Clone)]
pub struct Scenario<T> {
    pub config: SimConfig<T>,
    pub wind: WindField<T>,
    pub boats: Vec<BoatPath<T>>,
    pub background: Option<PathBuf>,
}

impl<T: Real> Scenario<T> {
    /// The four-boat circular-wind scenario.
    pub fn paper_fig3(seed: u64) -> Self {
        let mut config = SimConfig::paper_table1();
        config.seed = seed;
        let wind = WindField::preset("paper_circular", config.n_frames, config.dt).expect("known preset");
        let boats = BoatPath::paper_fleet(config.horizon());
        Self { config, wind, boats, background: None }
    }

    /// Looks up a named scenario.
    pub fn preset(name: &str, seed: u64) -> Result<Self, ScenarioError> {
        match name {
            PAPER_FIG3 => Ok(Self::paper_fig3(seed)),
            _ => Err(ScenarioError::UnknownPreset(name.to_string())),
        }
    }

    /// Builds a scenario from parsed config text; `base` resolves relative paths.
    pub fn from_file(file: &ConfigFile, base: &Path) -> Result<Self, ScenarioError> {
        let config = file.sim_config::<T>();
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

        let given = [file.wind.is_some(), file.wind_csv.is_some(), file.wind_uniform.is_some()];
        if given.iter().filter(|&&g| g).count() > 1 {
            return Err(ScenarioError::Conflict("at most one of wind, wind_csv, wind_uniform may be set".into()));
        }
        let wind = if let Some(name) = &file.wind {
            WindField::preset(name, config.n_frames, config.dt)?
        } else if let Some(path) = &file.wind_csv {
            let mut grid = GriddedField::from_csv_path(&resolve(path))?;
            grid.clamp = file.wind_clamp.unwrap_or(true);
            WindField::Gridded(grid)
        } else if let Some([u, v]) = file.wind_uniform {
            WindField::Uniform(Vec2::new(T::lit(u), T::lit(v)))
        } else {
            WindField::preset("paper_circular", config.n_frames, config.dt)?
        };

        let horizon = config.horizon();
        let boats = match &file.boats {
            None => BoatPath::paper_fleet(horizon),
            Some(BoatsSpec::Presets(names)) => names
                .iter()
                .enumerate()
                .map(|(i, name)| BoatPath::preset(name, i as u64, horizon))
                .collect::<Result<_, _>>()?,
            Some(BoatsSpec::File(path)) => load_waypoints_path(&resolve(path))?,
        };

        Ok(Self { config, wind, boats, background: file.background.as_deref().map(resolve) })
    }

    /// Reads and parses a config file.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
        let file = ConfigFile::parse(&text)?;
        Self::from_file(&file, path.parent().unwrap_or(Path::new(".")))
    }

    /// Validates the config and loads the background, if any.
    pub fn into_scene(self) -> Result<Scene<T>, ScenarioError> {
        let scene = Scene::new(self.config, self.wind, self.boats)?;
        match self.background {
            Some(path) => Ok(scene.with_background(read_pgm_file(&path)?)),
            None => Ok(scene),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boats::PathKind;

    #[test]
    fn empty_file_is_the_default_scenario() {
        let s = Scenario::<f64>::from_file(&ConfigFile::parse("").unwrap(), Path::new(".")).unwrap();
        assert_eq!(s.config, SimConfig::paper_table1());
        assert_eq!(s.boats.len(), 4);
        assert!(matches!(s.wind, WindField::Circular(_)));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ConfigFile::parse("dtt = 0.1").unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("dtt"));
    }

    #[test]
    fn keys_map_onto_fields() {
        let f = ConfigFile::parse(
            "n_frames = 7\ndt = 0.5\nsigma_beta = 0.3\nlambda_T = 12.0\niota_low = 0.1\n\
             window = [-1.0, -2.0, 3.0, 4.0]\ngrid = [8, 6]\nseed = 9\nbirth_mode = \"poisson\"\n",
        )
        .unwrap();
        let c = f.sim_config::<f64>();
        assert_eq!(c.n_frames, 7);
        assert_eq!(c.dt, 0.5);
        assert_eq!(c.sigma_b, 0.3);
        assert_eq!(c.lambda_t, 12.0);
        assert_eq!(c.iota_low, 0.1);
        assert_eq!(c.iota_high, f64::INFINITY);
        assert_eq!(c.window, Rect::new(-1.0, -2.0, 3.0, 4.0));
        assert_eq!(c.grid, [8, 6]);
        assert_eq!(c.seed, 9);
        assert_eq!(c.birth_mode, BirthMode::Poisson);
    }

    #[test]
    fn explicit_sigma_b_wins() {
        let c = ConfigFile::parse("sigma_beta = 0.3\nsigma_b = 0.7").unwrap().sim_config::<f64>();
        assert_eq!((c.sigma_beta, c.sigma_b), (0.3, 0.7));
    }

    #[test]
    fn zero_dt_fails_validation_by_name() {
        let s = Scenario::<f64>::from_file(&ConfigFile::parse("dt = 0.0").unwrap(), Path::new(".")).unwrap();
        match s.into_scene() {
            Err(ScenarioError::Config(e)) => assert!(e.contains("NonPositiveDt")),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn conflicting_wind_keys() {
        let f = ConfigFile::parse("wind = \"calm\"\nwind_uniform = [1.0, 0.0]").unwrap();
        assert!(matches!(Scenario::<f64>::from_file(&f, Path::new(".")), Err(ScenarioError::Conflict(_))));
    }

    #[test]
    fn boat_presets_and_uniform_wind() {
        let f = ConfigFile::parse("wind_uniform = [1.0, -0.5]\nboats = [\"paper_yellow\", \"paper_red\"]").unwrap();
        let s = Scenario::<f64>::from_file(&f, Path::new(".")).unwrap();
        assert_eq!(s.wind, WindField::Uniform(Vec2::new(1.0, -0.5)));
        assert_eq!(s.boats.iter().map(|b| b.boat_id).collect::<Vec<_>>(), vec![0, 1]);
        assert!(matches!(s.boats[0].kind, PathKind::Analytic(_)));
    }

    #[test]
    fn relative_paths_resolve_against_the_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("boats.csv"), "boat_id,time_hours,x,y\n3,0,0,0\n3,1,1,1\n").unwrap();
        let cfg = dir.path().join("run.toml");
        fs::write(&cfg, "boats = \"boats.csv\"\nwind = \"calm\"\n").unwrap();
        let s = Scenario::<f64>::load(&cfg).unwrap();
        assert_eq!(s.boats.len(), 1);
        assert_eq!(s.boats[0].boat_id, 3);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = Scenario::<f64>::load(Path::new("/nonexistent/run.toml")).unwrap_err();
        assert!(matches!(err, ScenarioError::Io { .. }));
        assert!(!err.is_config());
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(Scenario::<f64>::preset("fig9", 0), Err(ScenarioError::UnknownPreset(_))));
        assert_eq!(Scenario::<f64>::preset(PAPER_FIG3, 5).unwrap().config.seed, 5);
    }
}
