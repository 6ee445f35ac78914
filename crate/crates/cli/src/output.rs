use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use geohydro_core::fields::{write_field_csv, ScalarField2D};
use serde::Serialize;

use crate::CliError;

pub struct Output {
    pub dir: PathBuf,
    pub quiet: bool,
}

impl Output {
    pub fn new(dir: PathBuf, quiet: bool) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir, quiet })
    }

    pub fn say(&self, msg: impl std::fmt::Display) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        log::debug!("writing {}", path.display());
        Ok(BufWriter::new(File::create(path)?))
    }

    pub fn json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(geohydro_core::Error::from)?;
        use std::io::Write;
        writeln!(w)?;
        Ok(())
    }

    pub fn field(&self, name: &str, f: &ScalarField2D<f64>) -> Result<(), CliError> {
        write_field_csv(f, self.create(name)?)?;
        Ok(())
    }

    pub fn csv(&self, name: &str, header: &[String]) -> Result<csv::Writer<BufWriter<File>>, CliError> {
        let mut w = csv::Writer::from_writer(self.create(name)?);
        w.write_record(header).map_err(geohydro_core::Error::from)?;
        Ok(w)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

pub fn row(values: impl IntoIterator<Item = f64>) -> Vec<String> {
    values.into_iter().map(|v| v.to_string()).collect()
}

/// Field file `<dir>/<name>.csv`, falling back to `<name>.json`.
pub fn find_field(dir: &Path, name: &str) -> Option<PathBuf> {
    ["csv", "json"]
        .iter()
        .map(|ext| dir.join(format!("{name}.{ext}")))
        .find(|p| p.is_file())
}

pub fn read_field(path: &Path) -> Result<ScalarField2D<f64>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
    let reader = std::io::BufReader::new(file);
    let field = if path.extension().is_some_and(|e| e == "json") {
        geohydro_core::fields::read_field_json(reader)
    } else {
        geohydro_core::fields::read_field_csv(reader)
    };
    field.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
