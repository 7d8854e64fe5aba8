use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use apstab_core::model::NetworkModel;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::CliError;

/// Artifact paths for one model inside the output directory.
pub struct Artifacts {
    dir: PathBuf,
    stem: String,
}

impl Artifacts {
    pub fn new(dir: &Path, model_name: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
        let stem = model_name
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect::<String>();
        Ok(Self {
            dir: dir.to_path_buf(),
            stem: if stem.is_empty() { "model".into() } else { stem },
        })
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}.{suffix}", self.stem))
    }

    pub fn certificate(&self) -> PathBuf {
        self.path("certificate.json")
    }

    pub fn trajectory(&self) -> PathBuf {
        self.path("trajectory.csv")
    }

    pub fn alt_trajectory(&self) -> PathBuf {
        self.path("trajectory-alt.csv")
    }

    pub fn simulation(&self) -> PathBuf {
        self.path("simulation.json")
    }

    pub fn distance(&self) -> PathBuf {
        self.path("distance.csv")
    }

    pub fn report(&self) -> PathBuf {
        self.path("report.json")
    }
}

/// Parses JSON, naming the offending field on failure.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        CliError::Input(format!("{}: at `{field}`: {}", path.display(), e.into_inner()))
    })
}

pub fn load_model(path: &Path) -> Result<NetworkModel, CliError> {
    let model: NetworkModel = read_json(path)?;
    model
        .check()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(model)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

pub fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}
