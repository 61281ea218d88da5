//! Run configuration: command-line flags over an optional JSON file over
//! built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use magicrect_core::engine::{NoiseModel, MAX_DENSE_PAIRS};
use magicrect_core::games::MagicGame3xN;
use magicrect_core::strategies::DeviceModel;

pub const OUT_DIR_ENV: &str = "MAGICRECT_OUT_DIR";

/// Every field is optional; absent fields fall through to defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub n: Option<usize>,
    pub rounds: Option<u64>,
    pub mix: Option<String>,
    pub device: Option<String>,
    pub device_file: Option<PathBuf>,
    pub theta: Option<f64>,
    pub angles: Option<Vec<f64>>,
    pub thetas: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub timeout_ms: Option<u64>,
    pub retries: Option<u32>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Flag, else config, else the environment default, else `.`.
    pub fn out_dir(&self, flag: Option<PathBuf>) -> PathBuf {
        flag.or_else(|| self.out_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

pub fn require<T>(flag: Option<T>, config: Option<T>, name: &str) -> Result<T> {
    match flag.or(config) {
        Some(v) => Ok(v),
        None => bail!("missing --{name} (flag or config file)"),
    }
}

pub fn check_n(n: usize) -> Result<()> {
    let ok = MagicGame3xN::new(n).map(|g| g.supports_self_test()).unwrap_or(false);
    if !ok {
        bail!("n = {n} is not supported: need n = 3 or n ≡ 3 (mod 4)");
    }
    Ok(())
}

pub fn check_simulation_cap(n: usize) -> Result<()> {
    if n > MAX_DENSE_PAIRS {
        bail!("n = {n} exceeds the simulation cap of {MAX_DENSE_PAIRS} pairs");
    }
    Ok(())
}

/// Device selection shared by the commands that need one.
#[derive(Debug, Clone, Default)]
pub struct DeviceSpec {
    pub kind: Option<String>,
    pub file: Option<PathBuf>,
    pub theta: Option<f64>,
    pub angles: Option<Vec<f64>>,
}

impl DeviceSpec {
    pub fn merged(self, cfg: &RunConfig) -> DeviceSpec {
        DeviceSpec {
            kind: self.kind.or_else(|| cfg.device.clone()),
            file: self.file.or_else(|| cfg.device_file.clone()),
            theta: self.theta.or(cfg.theta),
            angles: self.angles.or_else(|| cfg.angles.clone()),
        }
    }

    pub fn build(&self, n: usize) -> Result<DeviceModel> {
        if let Some(path) = &self.file {
            let dev = DeviceModel::load(path).with_context(|| format!("loading device {}", path.display()))?;
            if dev.n() != n {
                bail!("device file has n = {}, run has n = {n}", dev.n());
            }
            return Ok(dev);
        }
        let kind = self.kind.as_deref().unwrap_or("honest");
        let noise = match (&self.angles, self.theta) {
            (Some(a), _) => Some(NoiseModel::PerPair { angles: a.clone() }),
            (None, Some(t)) => Some(NoiseModel::YRotation { theta: t }),
            (None, None) => None,
        };
        let dev = match kind {
            "honest" => match noise {
                Some(noise) => DeviceModel::noisy_honest(n, noise)?,
                None => DeviceModel::honest(n)?,
            },
            "noisy" | "noisy-honest" => {
                let Some(noise) = noise else { bail!("--device noisy needs --theta or --angles") };
                DeviceModel::noisy_honest(n, noise)?
            }
            "padded" | "padded-adversary" => DeviceModel::padded_adversary(n)?,
            "standard-square" | "standard-square-baseline" => {
                if n != 3 {
                    bail!("the standard-square baseline has n = 3");
                }
                DeviceModel::standard_square()?
            }
            other => bail!("unknown device `{other}` (honest, noisy, padded, standard-square)"),
        };
        Ok(dev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None, None, 3), 3);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"n": 3, "round": 5}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"n": 7, "device": "padded", "timeout-ms": 50}"#).unwrap();
        assert_eq!((c.n, c.timeout_ms), (Some(7), Some(50)));
    }

    #[test]
    fn supported_sizes() {
        for n in [3, 7, 11, 43] {
            assert!(check_n(n).is_ok());
        }
        for n in [1, 4, 5, 9] {
            assert!(check_n(n).is_err());
        }
        assert!(check_simulation_cap(15).is_err());
    }

    #[test]
    fn device_kinds() {
        let spec = |k: &str| DeviceSpec { kind: Some(k.into()), ..Default::default() };
        assert!(spec("padded").build(7).is_ok());
        assert!(spec("standard-square").build(7).is_err());
        assert!(spec("noisy").build(3).is_err());
        assert!(spec("wizard").build(3).is_err());
        let noisy = DeviceSpec { theta: Some(0.1), ..spec("noisy") };
        assert!(noisy.build(3).is_ok());
    }
}
