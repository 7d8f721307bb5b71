//! Resolved run settings: defaults, then the `--config` file, then flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use swiftdep::config::{read_key_values, set_trainer_key, TRAINER_KEYS};
use swiftdep::decode::BeamNorm;
use swiftdep::scoring::TrainerConfig;
use swiftdep::{OracleVariant, PunctPolicy, SystemId};

/// Arc-eager oracle preference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EagerOracle {
    /// Shift whenever Reduce is not required.
    StaticS,
    /// Reduce as soon as the stack top is complete.
    StaticR,
}

impl FromStr for EagerOracle {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "static-s" => Ok(EagerOracle::StaticS),
            "static-r" => Ok(EagerOracle::StaticR),
            _ => Err(format!(
                "unknown oracle {s:?} (expected static-s or static-r)"
            )),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub system: SystemId,
    pub oracle: Option<EagerOracle>,
    pub beam: usize,
    pub beam_norm: BeamNorm,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub punct: PunctPolicy,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
    pub trainer: TrainerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: SystemId::ArcSwift,
            oracle: None,
            beam: 1,
            beam_norm: BeamNorm::default(),
            seed: 1,
            jobs: None,
            punct: PunctPolicy::Label,
            input: None,
            output: None,
            model: None,
            dev: None,
            report_dir: None,
            trainer: TrainerConfig::ud_schedule(),
        }
    }
}

/// Keys accepted in `--config` files besides the trainer keys.
pub const RUN_KEYS: [&str; 12] = [
    "system",
    "oracle",
    "beam",
    "beam_norm",
    "seed",
    "jobs",
    "punct",
    "input",
    "output",
    "model",
    "dev",
    "report_dir",
];

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| anyhow::anyhow!("invalid value {v:?} for {key}: {e}"))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "system" => self.system = parse(key, v)?,
            "oracle" => self.oracle = Some(parse(key, v)?),
            "beam" => self.beam = parse(key, v)?,
            "beam_norm" => self.beam_norm = parse(key, v)?,
            "seed" => {
                self.seed = parse(key, v)?;
                self.trainer.seed = self.seed;
            }
            "jobs" => self.jobs = Some(parse(key, v)?),
            "punct" => self.punct = parse(key, v)?,
            "input" => self.input = Some(v.into()),
            "output" => self.output = Some(v.into()),
            "model" => self.model = Some(v.into()),
            "dev" => self.dev = Some(v.into()),
            "report_dir" => self.report_dir = Some(v.into()),
            _ => {
                if !set_trainer_key(&mut self.trainer, key, v)? {
                    bail!(
                        "unknown configuration key {key:?}; known keys: {}, {}",
                        RUN_KEYS.join(", "),
                        TRAINER_KEYS.join(", ")
                    );
                }
            }
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let pairs = read_key_values(path).with_context(|| format!("reading {}", path.display()))?;
        for (k, v) in pairs {
            self.set(&k, &v)
                .with_context(|| format!("in {}", path.display()))?;
        }
        Ok(())
    }

    /// The oracle variant implied by `system` and `oracle`.
    pub fn variant(&self) -> Result<OracleVariant> {
        match (self.system, self.oracle) {
            (SystemId::ArcEager, None | Some(EagerOracle::StaticS)) => Ok(OracleVariant::AeS),
            (SystemId::ArcEager, Some(EagerOracle::StaticR)) => Ok(OracleVariant::AeR),
            (s, None) => Ok(OracleVariant::for_system(s)),
            (s, Some(_)) => bail!("--oracle applies to arc-eager only, not {s}"),
        }
    }

    pub fn input(&self) -> Result<&Path> {
        self.input.as_deref().context("--input is required")
    }

    pub fn model(&self) -> Result<&Path> {
        self.model.as_deref().context("--model is required")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_resolution() {
        let mut c = RunConfig::default();
        assert_eq!(c.variant().unwrap(), OracleVariant::Asw);
        c.set("system", "ae").unwrap();
        assert_eq!(c.variant().unwrap(), OracleVariant::AeS);
        c.set("oracle", "static-r").unwrap();
        assert_eq!(c.variant().unwrap(), OracleVariant::AeR);
        c.set("system", "asd").unwrap();
        assert!(c.variant().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut c = RunConfig::default();
        assert!(c.set("colour", "blue").is_err());
        c.set("epochs", "3").unwrap();
        c.set("seed", "9").unwrap();
        assert_eq!((c.trainer.epochs, c.trainer.seed), (3, 9));
    }
}
