//! Run configuration: an optional `key = value` file whose settings are
//! overridden by command-line flags.
//!
//! ```text
//! # webusage run config
//! store = ./store
//! from = 2002-01-01
//! to = 2003-01-01
//! out = ./out
//! periodicity = month,year
//! min_cluster_size = 3
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use webusage::time::{parse_timestamp, Period, Timestamp};

pub const KEYS: &[&str] = &[
    "store",
    "from",
    "to",
    "out",
    "periodicity",
    "tld_table",
    "source",
    "min_cluster_size",
    "max_cluster_size",
    "max_internal_associations",
    "association_floor",
    "x_split",
    "y_split",
    "seed",
    "size",
    "overlap",
    "year",
];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    NoData(String),
    #[error(transparent)]
    Core(#[from] webusage::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) | CliError::Core(webusage::Error::InvalidArgument(_)) => ExitCode::from(2),
            CliError::NoData(_) | CliError::Core(_) => ExitCode::from(1),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected key = value", idx + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(usage(format!("config line {}: unknown key {key:?}", idx + 1)));
            }
            if values.insert(key.to_owned(), value.trim().to_owned()).is_some() {
                return Err(usage(format!("config line {}: {key} set twice", idx + 1)));
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.values
            .get(key)
            .map(|v| v.parse().map_err(|_| usage(format!("config: invalid value {v:?} for {key}"))))
            .transpose()
    }
}

/// Global settings after merging flags over the config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub store: Option<PathBuf>,
    pub from: Option<Timestamp>,
    pub to: Option<Timestamp>,
    pub out: PathBuf,
    pub file: ConfigFile,
}

fn timestamp(raw: &str, what: &str) -> CliResult<Timestamp> {
    parse_timestamp(raw).ok_or_else(|| usage(format!("invalid --{what} timestamp {raw:?}")))
}

impl RunConfig {
    pub fn resolve(
        config: Option<&Path>,
        store: Option<PathBuf>,
        from: Option<String>,
        to: Option<String>,
        out: Option<PathBuf>,
    ) -> CliResult<Self> {
        let file = match config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let from = from.or(file.get("from")?);
        let to = to.or(file.get("to")?);
        Ok(RunConfig {
            store: store.or(file.get("store")?),
            from: from.map(|s| timestamp(&s, "from")).transpose()?,
            to: to.map(|s| timestamp(&s, "to")).transpose()?,
            out: out.or(file.get("out")?).unwrap_or_else(|| PathBuf::from("out")),
            file,
        })
    }

    /// Flag value, else config value.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.file.get(key),
        }
    }

    pub fn store_root(&self) -> CliResult<&Path> {
        self.store
            .as_deref()
            .ok_or_else(|| usage("no store given; pass --store or set store in the config"))
    }

    /// `--from`/`--to` as a period; `None` when neither is set.
    pub fn period(&self) -> CliResult<Option<Period>> {
        match (self.from, self.to) {
            (None, None) => Ok(None),
            (Some(start), Some(end)) => Ok(Some(Period::new(start, end)?)),
            _ => Err(usage("--from and --to must be given together")),
        }
    }
}
