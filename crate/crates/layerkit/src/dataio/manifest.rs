//! Corpus manifests.
//!
//! ```text
//! image,layers,semantic,split
//! synth_0000.pgm,synth_0000_layers.csv,,train
//! crops/a_crop0.pgm,crops/a_crop0_layers.csv,crops/a_crop0_labels.pgm,val
//! ```
//!
//! `semantic` may be empty. Relative paths are resolved against the
//! directory holding the manifest. Paths may not contain commas or line
//! breaks.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{read_text, write_atomic, Error, Result};

pub const HEADER: &str = "image,layers,semantic,split";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!(
                "unknown split `{other}`, expected train, val or test"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub image: PathBuf,
    pub layers: PathBuf,
    pub semantic: Option<PathBuf>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<Entry>,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Manifest {
        line,
        message: message.into(),
    }
}

fn path_field(p: &Path, line: usize) -> Result<String> {
    let s = p
        .to_str()
        .ok_or_else(|| err(line, format!("path {} is not UTF-8", p.display())))?;
    if s.is_empty() || s.contains([',', '\n', '\r']) {
        return Err(err(
            line,
            format!("path `{s}` is empty or contains a comma or line break"),
        ));
    }
    Ok(s.to_string())
}

impl Manifest {
    /// Checks that tags are valid and no path repeats within a column.
    pub fn validate(&self) -> Result<()> {
        let mut images = HashSet::new();
        let mut layers = HashSet::new();
        let mut semantic = HashSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            let line = i + 2;
            if !images.insert(&e.image) {
                return Err(err(line, format!("duplicate image {}", e.image.display())));
            }
            if !layers.insert(&e.layers) {
                return Err(err(
                    line,
                    format!("duplicate layers {}", e.layers.display()),
                ));
            }
            if let Some(s) = &e.semantic {
                if !semantic.insert(s) {
                    return Err(err(line, format!("duplicate semantic {}", s.display())));
                }
            }
        }
        Ok(())
    }

    /// Joins every relative path onto `base`.
    pub fn resolve(mut self, base: &Path) -> Self {
        for e in &mut self.entries {
            for p in [&mut e.image, &mut e.layers]
                .into_iter()
                .chain(e.semantic.as_mut())
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        self
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

pub fn encode(m: &Manifest) -> Result<String> {
    m.validate()?;
    let mut out = format!("{HEADER}\n");
    for (i, e) in m.entries.iter().enumerate() {
        let line = i + 2;
        let semantic = match &e.semantic {
            Some(p) => path_field(p, line)?,
            None => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{}\n",
            path_field(&e.image, line)?,
            path_field(&e.layers, line)?,
            semantic,
            e.split
        ));
    }
    Ok(out)
}

pub fn decode(text: &str) -> Result<Manifest> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim_end() == HEADER => {}
        _ => return Err(err(1, format!("expected header `{HEADER}`"))),
    }
    let mut entries = Vec::new();
    for (n, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(err(n, format!("expected 4 fields, found {}", f.len())));
        }
        if f[0].is_empty() || f[1].is_empty() {
            return Err(err(n, "image and layers paths are required"));
        }
        entries.push(Entry {
            image: PathBuf::from(f[0]),
            layers: PathBuf::from(f[1]),
            semantic: (!f[2].is_empty()).then(|| PathBuf::from(f[2])),
            split: f[3].parse().map_err(|m: String| err(n, m))?,
        });
    }
    let m = Manifest { entries };
    m.validate()?;
    Ok(m)
}

/// Reads a manifest and resolves its paths against the manifest's directory.
pub fn read(path: &Path) -> Result<Manifest> {
    let m = decode(&read_text(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(m.resolve(base))
}

pub fn write(path: &Path, m: &Manifest) -> Result<()> {
    write_atomic(path, encode(m)?.as_bytes())
}
