//! Run configuration shared by every stage. A single JSON document; the CLI
//! applies flag overrides on top before validation.

use crate::dyadic::RealInterval;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Finest tile scale used by operators and decompositions.
    pub k_max: i32,
    /// Number of samples on `[0,1)`; a power of two.
    pub n_x: usize,
    /// Frequency window `[lo, hi)` for tile enumeration.
    pub window: [f64; 2],
    /// Distance between consecutive scales of a decomposition universe.
    pub scale_gap: i32,
    /// Top scale of the kernel telescoping check.
    pub telescoping_k_max: i32,
    /// Exponent `N` of the mass.
    pub mass_n: i32,
    pub mass_tol: f64,
    pub eps0: f64,
    pub eps: f64,
    /// Counting constant `K`.
    pub k_count: f64,
    /// Exponents `m` of the sweep `δ = 2^-m`.
    pub delta_exponents: Vec<i32>,
    /// Modulation grid `a ∈ [-a_max, a_max]` with `a_count` points.
    pub a_max: f64,
    pub a_count: usize,
    pub b_max: f64,
    pub b_count: usize,
    pub seed: u64,
    /// Number of random instances in ensemble checks.
    pub instances: usize,
    pub out_dir: String,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            k_max: 5,
            n_x: 512,
            window: [-32.0, 32.0],
            scale_gap: 2,
            telescoping_k_max: 10,
            mass_n: 10,
            mass_tol: 1e-6,
            eps0: 0.1,
            eps: 0.05,
            k_count: 16.0,
            delta_exponents: (1..=8).collect(),
            a_max: 64.0,
            a_count: 33,
            b_max: 64.0,
            b_count: 17,
            seed: 0x5eed,
            instances: 20,
            out_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("n_x = {0} must be a power of two")]
    NotPowerOfTwo(usize),
    #[error("n_x = {n_x} is below 2^(k_max+4) = {need}")]
    Resolution { n_x: usize, need: usize },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("frequency window [{0}, {1}) is empty")]
    Window(f64, f64),
    #[error("malformed config: {0}")]
    Parse(String),
}

impl Config {
    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        let c: Config = serde_json::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k_max < 0 {
            return Err(ConfigError::NonPositive("k_max"));
        }
        if !self.n_x.is_power_of_two() {
            return Err(ConfigError::NotPowerOfTwo(self.n_x));
        }
        let need = 1usize << (self.k_max + 4);
        if self.n_x < need {
            return Err(ConfigError::Resolution { n_x: self.n_x, need });
        }
        if !(self.window[0] < self.window[1]) {
            return Err(ConfigError::Window(self.window[0], self.window[1]));
        }
        let checks: [(&'static str, bool); 10] = [
            ("scale_gap", self.scale_gap > 0),
            ("mass_n", self.mass_n > 0),
            ("mass_tol", self.mass_tol > 0.0),
            ("eps0", self.eps0 > 0.0),
            ("eps", self.eps > 0.0),
            ("k_count", self.k_count > 0.0),
            ("a_count", self.a_count > 0),
            ("b_count", self.b_count > 0),
            ("instances", self.instances > 0),
            ("telescoping_k_max", self.telescoping_k_max >= 0),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(ConfigError::NonPositive(name));
            }
        }
        Ok(())
    }

    pub fn window(&self) -> RealInterval {
        RealInterval::new(self.window[0], self.window[1])
    }

    /// Scales `0, g, 2g, … ≤ k_max` of a decomposition universe.
    pub fn universe_scales(&self) -> Vec<i32> {
        (0..=self.k_max).step_by(self.scale_gap as usize).collect()
    }

    /// Hash of every field except `out_dir`, which does not affect results.
    pub fn hash(&self) -> String {
        crate::report::config_hash(&Config { out_dir: String::new(), ..self.clone() })
    }

    pub fn a_grid(&self) -> Vec<f64> {
        uniform_grid(self.a_max, self.a_count)
    }

    pub fn b_grid(&self) -> Vec<f64> {
        uniform_grid(self.b_max, self.b_count)
    }
}

/// `count` points evenly spaced on `[-m, m]`; a single point is `0`.
pub fn uniform_grid(m: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![0.0];
    }
    (0..count).map(|i| -m + 2.0 * m * i as f64 / (count - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_validates() {
        Config::default().validate().unwrap();
        assert_eq!(Config::default().universe_scales(), vec![0, 2, 4]);
    }

    #[test]
    fn resolution_rule() {
        let c = Config { n_x: 256, ..Config::default() };
        assert!(matches!(c.validate(), Err(ConfigError::Resolution { .. })));
        let c = Config { n_x: 500, ..Config::default() };
        assert!(matches!(c.validate(), Err(ConfigError::NotPowerOfTwo(500))));
    }

    #[test]
    fn json_round_trip_and_partial() {
        let c = Config::from_json(r#"{"k_max": 3, "n_x": 128}"#).unwrap();
        assert_eq!(c.k_max, 3);
        assert_eq!(c.mass_n, 10);
        assert!(Config::from_json(r#"{"bogus": 1}"#).is_err());
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(Config::from_json(&s).unwrap(), c);
    }

    #[test]
    fn grids_contain_zero_when_odd() {
        let g = uniform_grid(4.0, 5);
        assert_eq!(g, vec![-4.0, -2.0, 0.0, 2.0, 4.0]);
        assert!(Config::default().b_grid().contains(&0.0));
    }
}
