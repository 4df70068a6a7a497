//! Output formatting, checksums and file writers.
//!
//! All data files are written atomically (temp file + rename) and recorded
//! in an inventory with their SHA-256 checksums; `OutputDir::finish` writes
//! a `manifest.json` carrying the inventory plus caller-supplied run
//! metadata.  Data files contain no timestamps, so re-running a command
//! with the same configuration reproduces them byte for byte.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::ArrayView2;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Canonical float formatting for text outputs and hashing: scientific
/// notation with 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write;
        write!(s, "{b:02x}").unwrap();
    }
    s
}

/// Pretty JSON with a trailing newline.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Write bytes atomically: a temp file beside the target, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().ok_or_else(|| {
        Error::Config(format!(
            "output path {} has no parent directory",
            path.display()
        ))
    })?;
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(".tmp");
    let tmp = PathBuf::from(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Inventory entry for one written output file.
#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

/// A results directory: writes files atomically and keeps their checksums
/// for the closing manifest.
pub struct OutputDir {
    root: PathBuf,
    entries: Vec<OutputEntry>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<OutputDir> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(OutputDir {
            root,
            entries: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[OutputEntry] {
        &self.entries
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        // flat layout keeps inventory names unambiguous
        if name.is_empty() || name.contains(['/', '\\']) || name == "manifest.json" {
            return Err(Error::Config(format!("invalid output file name {name:?}")));
        }
        write_atomic(&self.root.join(name), bytes)?;
        self.entries.push(OutputEntry {
            name: name.to_owned(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let s = to_json_pretty(value)?;
        self.write_text(name, &s)
    }

    /// CSV file from a header line and pre-formatted rows.
    pub fn write_csv<I, S>(&mut self, name: &str, header: &str, rows: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut s = String::with_capacity(256);
        s.push_str(header);
        s.push('\n');
        for row in rows {
            s.push_str(row.as_ref());
            s.push('\n');
        }
        self.write_text(name, &s)
    }

    /// Row-major little-endian f64 dump `<stem>.bin` plus a JSON sidecar
    /// `<stem>.json` describing its layout.
    pub fn write_matrix(
        &mut self,
        stem: &str,
        m: ArrayView2<'_, f64>,
        description: &str,
    ) -> Result<()> {
        let bin_name = format!("{stem}.bin");
        let mut bytes = Vec::with_capacity(8 * m.len());
        for &x in m.iter() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        self.write_bytes(&bin_name, &bytes)?;
        #[derive(Serialize)]
        struct Sidecar<'a> {
            file: &'a str,
            dtype: &'a str,
            order: &'a str,
            rows: usize,
            cols: usize,
            description: &'a str,
        }
        self.write_json(
            &format!("{stem}.json"),
            &Sidecar {
                file: &bin_name,
                dtype: "f64le",
                order: "row-major",
                rows: m.nrows(),
                cols: m.ncols(),
                description,
            },
        )
    }

    /// Write `manifest.json` from the caller's run metadata plus the file
    /// inventory, consuming the directory handle.
    pub fn finish<T: Serialize>(self, run: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a, T: Serialize> {
            #[serde(flatten)]
            run: &'a T,
            outputs: &'a [OutputEntry],
        }
        let s = to_json_pretty(&Manifest {
            run,
            outputs: &self.entries,
        })?;
        write_atomic(&self.root.join("manifest.json"), s.as_bytes())
    }
}
