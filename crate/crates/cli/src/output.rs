//! File writers. Every file starts with the tool version, the command and
//! the fully resolved config, so a result can be traced to its inputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use walksum::observables::CorrelationMap;

use crate::config::RunConfig;

pub const VERSION: &str = env!("WALKSUM_GIT_VERSION");

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    version: &'a str,
    command: &'a str,
    config: &'a RunConfig,
    result: &'a T,
}

/// Output directory of one command run.
pub struct Writer<'a> {
    dir: PathBuf,
    command: &'a str,
    config: &'a RunConfig,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    pub fn new(command: &'a str, config: &'a RunConfig) -> Result<Self> {
        let dir = config.out.clone();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Writer {
            dir,
            command,
            config,
            files: Vec::new(),
        })
    }

    pub fn into_files(self) -> Vec<PathBuf> {
        self.files
    }

    fn create(&mut self, name: &str) -> Result<(PathBuf, fs::File)> {
        let path = self.dir.join(name);
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.files.push(path.clone());
        Ok((path, file))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<PathBuf> {
        let doc = Document {
            version: VERSION,
            command: self.command,
            config: self.config,
            result,
        };
        let (path, mut file) = self.create(name)?;
        serde_json::to_writer_pretty(&mut file, &doc)?;
        file.write_all(b"\n")?;
        Ok(path)
    }

    /// CSV with a `#`-prefixed preamble; `rows` must match `header`.
    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let preamble = self.preamble()?;
        let (path, mut file) = self.create(name)?;
        file.write_all(preamble.as_bytes())?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(path)
    }

    /// Site-grid map: `j_x, j_y, value, value_pair_scaled`.
    pub fn map(&mut self, name: &str, map: &CorrelationMap) -> Result<PathBuf> {
        let rows = map.sites.iter().zip(&map.values).map(|(j, v)| {
            vec![
                j.x.to_string(),
                j.y.to_string(),
                fmt_opt(*v),
                fmt_opt(v.map(|x| x * map.pair_scale)),
            ]
        });
        self.csv(name, &["j_x", "j_y", "value", "value_pair_scaled"], rows)
    }

    fn preamble(&self) -> Result<String> {
        Ok(format!(
            "# walksum {}\n# command: {}\n# config: {}\n",
            VERSION,
            self.command,
            serde_json::to_string(self.config)?
        ))
    }
}

/// Shortest round-trip decimal; `nan` for undefined values.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    fmt_f64(x.unwrap_or(f64::NAN))
}

/// Reads a CSV written by [`Writer::csv`], skipping the preamble.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}
