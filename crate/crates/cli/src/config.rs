use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mpcc_core::alm::AlmConfig;
use mpcc_core::ioc_fem::IocParams;
use mpcc_core::nsnewton::NewtonConfig;
use mpcc_core::pgrad::PgradConfig;
use mpcc_core::stationarity::DEFAULT_ACTIVITY_TOL;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    Ioc,
    File(PathBuf),
}

impl FromStr for InstanceSource {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ioc" => Ok(InstanceSource::Ioc),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(InstanceSource::File(path.into())),
                _ => Err(HarnessError::Config(format!("unknown instance `{s}`, expected `ioc` or `file:PATH`"))),
            },
        }
    }
}

impl fmt::Display for InstanceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceSource::Ioc => f.write_str("ioc"),
            InstanceSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl Serialize for InstanceSource {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InstanceSource {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Alm,
    Newton,
    Warmstart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    Csv,
    #[serde(alias = "markdown")]
    #[value(alias = "markdown")]
    Md,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub ioc: IocParams,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub alm: AlmConfig,
    pub pgrad: PgradConfig,
    pub newton: NewtonConfig,
    /// `τ_alm` used by the ALM stage of the warm-start pipeline.
    pub warmstart_tau_alm: f64,
    /// Activity tolerance for the stationarity verdict column.
    pub classify_tol: f64,
    pub out: Option<PathBuf>,
    pub format: TableFormat,
    /// Write wall-time columns; off gives byte-reproducible tables.
    pub timings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            instance: InstanceSource::Ioc,
            ioc: IocParams::default(),
            algorithm: Algorithm::Alm,
            seeds: (1..=10).collect(),
            alm: AlmConfig::default(),
            pgrad: PgradConfig::default(),
            newton: NewtonConfig::default(),
            warmstart_tau_alm: 1e-5,
            classify_tol: DEFAULT_ACTIVITY_TOL,
            out: None,
            format: TableFormat::Csv,
            timings: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        if !(self.warmstart_tau_alm > 0.0 && self.classify_tol > 0.0) {
            return Err(HarnessError::Config("tolerances must be positive".into()));
        }
        self.ioc.validate()?;
        self.alm.validate()?;
        self.pgrad.validate()?;
        self.newton.validate()?;
        Ok(())
    }
}
