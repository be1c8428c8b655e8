//! Experiment configuration: a flat TOML file, every key overridable from
//! the command line. Emission and parsing round-trip exactly, so a config
//! written by `--emit-config` reproduces the run that wrote it.

use std::path::PathBuf;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Initial data by name; mutually exclusive with `input`.
    pub preset: Option<String>,
    /// Initial data from a snapshot file; mutually exclusive with `preset`.
    pub input: Option<PathBuf>,
    pub n: usize,
    /// Half-width of the periodic box [-L, L)^2.
    #[serde(rename = "L")]
    pub half_width: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    /// Number of evenly spaced checkpoint times, endpoints included.
    pub checkpoints: usize,
    pub method: MethodKind,
    /// Mollification radii for the compactness diagnostics; empty defers
    /// to log-spaced interior points of the admissible interval.
    pub eps_list: Vec<f64>,
    /// Base seed for seeded presets and ensemble checks. u32 so the value
    /// survives the TOML round trip (the format stores signed 64-bit).
    pub seed: u32,
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Spectral,
    SemiLagrangian,
}

impl From<MethodKind> for cel_core::solver::Method {
    fn from(m: MethodKind) -> Self {
        match m {
            MethodKind::Spectral => cel_core::solver::Method::Spectral,
            MethodKind::SemiLagrangian => cel_core::solver::Method::SemiLagrangian,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: Some("gaussian".into()),
            input: None,
            n: 256,
            half_width: 2.0 * std::f64::consts::PI,
            dt: 1e-3,
            t_end: 1.0,
            checkpoints: 21,
            method: MethodKind::Spectral,
            eps_list: Vec::new(),
            seed: 0,
            output: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).context("config file did not parse")?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("a plain struct serializes")
    }

    /// The open interval of smoothing radii the compactness diagnostics
    /// accept: wide enough for the kernel quadrature, narrow enough that
    /// smoothing cannot wrap around the box.
    pub fn admissible_eps(&self) -> (f64, f64) {
        let dx = 2.0 * self.half_width / self.n as f64;
        (4.0 * dx, self.half_width / 4.0)
    }

    /// Radii for the compactness diagnostics; the empty list defers to
    /// three log-spaced interior points of the admissible interval.
    /// Fixed multiples of dx would land on an endpoint at small n
    /// (8 dx equals L/4 exactly when n = 64).
    pub fn effective_eps(&self) -> Vec<f64> {
        if self.eps_list.is_empty() {
            let (lo, hi) = self.admissible_eps();
            let ratio = hi / lo;
            (1..=3).map(|k| lo * ratio.powf(k as f64 / 4.0)).collect()
        } else {
            self.eps_list.clone()
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.preset.is_some() == self.input.is_some() {
            bail!("exactly one of `preset` and `input` must be set");
        }
        if self.n < 32 || !self.n.is_multiple_of(2) {
            bail!("n must be even and at least 32, got {}", self.n);
        }
        if self.n > 16384 {
            bail!("n = {} is past the desk scale this tool targets (max 16384)", self.n);
        }
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            bail!("L must be positive and finite, got {}", self.half_width);
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            bail!("dt must be positive and finite, got {}", self.dt);
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            bail!("T must be positive and finite, got {}", self.t_end);
        }
        if self.checkpoints < 2 {
            bail!("checkpoints must be at least 2, got {}", self.checkpoints);
        }
        let (lo, hi) = self.admissible_eps();
        for &eps in &self.eps_list {
            if !(eps.is_finite() && eps > lo && eps < hi) {
                bail!("eps {eps} outside the admissible interval (4 dx = {lo}, L/4 = {hi})");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut c = ExperimentConfig {
            input: Some("w0.bin".into()),
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err(), "preset and input together");
        c.preset = None;
        c.validate().unwrap();
        c.n = 31;
        assert!(c.validate().is_err());
        c.n = 64;
        c.eps_list = vec![c.half_width];
        assert!(c.validate().is_err(), "eps above L/4");
        let (lo, hi) = c.admissible_eps();
        c.eps_list = vec![lo];
        assert!(c.validate().is_err(), "eps on the excluded lower endpoint");
        c.eps_list = vec![0.5 * (lo + hi)];
        c.validate().unwrap();
    }

    #[test]
    fn default_radii_sit_strictly_inside_the_admissible_interval() {
        for (n, l) in [(64, std::f64::consts::PI), (256, 2.0 * std::f64::consts::PI), (100, 5.0)] {
            let c = ExperimentConfig {
                n,
                half_width: l,
                ..ExperimentConfig::default()
            };
            let (lo, hi) = c.admissible_eps();
            let radii = c.effective_eps();
            assert_eq!(radii.len(), 3);
            for eps in radii {
                assert!(eps > lo && eps < hi, "eps {eps} vs ({lo}, {hi}) at n = {n}");
            }
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("unknown_key = 1").is_err());
    }

    proptest! {
        #[test]
        fn round_trips_exactly(
            n in (16usize..512).prop_map(|k| 2 * k),
            l in 0.5f64..50.0,
            dt in 1e-6f64..0.1,
            t_end in 0.01f64..10.0,
            checkpoints in 2usize..200,
            seed in any::<u32>(),
            spectral in any::<bool>(),
        ) {
            let c = ExperimentConfig {
                preset: Some("dipole".into()),
                input: None,
                n,
                half_width: l,
                dt,
                t_end,
                checkpoints,
                method: if spectral { MethodKind::Spectral } else { MethodKind::SemiLagrangian },
                eps_list: vec![l / 8.0, l / 5.0],
                seed,
                output: PathBuf::from("out"),
            };
            prop_assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
        }
    }
}
