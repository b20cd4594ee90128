//! Emission of tables and documents, either into an output directory or
//! to stdout. Every file carries the schema string.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::ValueEnum;
use serde::Serialize;

use dyadlab_core::io::{write_json, SCHEMA};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Run metadata embedded in every emitted file.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata<C: Serialize> {
    pub command: &'static str,
    pub workers_env: &'static str,
    /// Conventions the paper leaves open that affect this output.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convention: Option<&'static str>,
    pub parameters: C,
}

#[derive(Serialize)]
struct Document<'a, M: Serialize, T: Serialize + ?Sized> {
    metadata: &'a M,
    results: &'a T,
}

#[derive(Debug, Clone)]
pub struct Output {
    pub dir: Option<PathBuf>,
    pub format: Format,
}

impl Output {
    fn sink(&self, file: &str) -> Result<Box<dyn Write>> {
        Ok(match &self.dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                Box::new(BufWriter::new(File::create(dir.join(file))?))
            }
            None => Box::new(io::stdout().lock()),
        })
    }

    /// Rows as `<name>.csv` or `<name>.json` according to the format.
    pub fn table<M: Serialize, R: Serialize>(&self, name: &str, metadata: &M, rows: &[R]) -> Result<()> {
        match self.format {
            Format::Json => self.document(name, metadata, rows),
            Format::Csv => {
                let mut out = self.sink(&format!("{name}.csv"))?;
                writeln!(out, "# schema={SCHEMA}")?;
                writeln!(out, "# metadata={}", serde_json::to_string(metadata)?)?;
                let mut w = csv::Writer::from_writer(&mut out);
                for r in rows {
                    w.serialize(r)?;
                }
                w.flush()?;
                drop(w);
                out.flush()?;
                Ok(())
            }
        }
    }

    /// A JSON document `<name>.json` regardless of the format.
    pub fn document<M: Serialize, T: Serialize + ?Sized>(&self, name: &str, metadata: &M, results: &T) -> Result<()> {
        let out = self.sink(&format!("{name}.json"))?;
        write_json(out, &Document { metadata, results })?;
        Ok(())
    }

    /// Plain text; only written when an output directory is set.
    pub fn text(&self, file: &str, body: &str) -> Result<()> {
        if self.dir.is_some() {
            let mut out = self.sink(file)?;
            out.write_all(body.as_bytes())?;
            out.flush()?;
        }
        Ok(())
    }
}
