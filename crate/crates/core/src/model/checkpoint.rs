//! Versioned plain-text checkpoints.
//!
//! ```text
//! daqff-checkpoint
//! format_version 1
//! kind <model name>
//! config <single-line JSON model spec>
//! meta <single-line JSON>
//! param <name> <d0>x<d1>... 
//! <space-separated values, 17 significant digits>
//! ...
//! end
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::model::{ModelGraph, ModelSpec};
use crate::nn::{Layer, SeededRng};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "daqff-checkpoint";

/// A loaded checkpoint: the rebuilt model plus its free-form metadata.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: ModelGraph,
    pub meta: serde_json::Value,
}

pub fn render_checkpoint(model: &ModelGraph, meta: &serde_json::Value) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").ok();
    writeln!(out, "format_version {FORMAT_VERSION}").ok();
    writeln!(out, "kind {}", model.name()).ok();
    writeln!(out, "config {}", serde_json::to_string(model.spec())?).ok();
    writeln!(out, "meta {}", serde_json::to_string(meta)?).ok();
    for p in model.params() {
        let dims: Vec<String> = p.value.shape().iter().map(ToString::to_string).collect();
        writeln!(out, "param {} {}", p.name, dims.join("x")).ok();
        let values: Vec<String> = p.value.data().iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", values.join(" ")).ok();
    }
    writeln!(out, "end").ok();
    Ok(out)
}

pub fn save_checkpoint(path: &Path, model: &ModelGraph, meta: &serde_json::Value) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, render_checkpoint(model, meta)?)?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn field<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    line.and_then(|l| l.strip_prefix(key))
        .and_then(|l| l.strip_prefix(' '))
        .ok_or_else(|| bad(format!("expected `{key}` line")))
}

pub fn parse_checkpoint(text: &str) -> Result<Checkpoint> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("not a checkpoint file"));
    }
    let version: u32 = field(lines.next(), "format_version")?
        .parse()
        .map_err(|_| bad("unreadable format_version"))?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format_version {version}")));
    }
    let kind = field(lines.next(), "kind")?;
    let spec: ModelSpec = serde_json::from_str(field(lines.next(), "config")?)?;
    if spec.name() != kind {
        return Err(bad(format!("kind `{kind}` disagrees with config `{}`", spec.name())));
    }
    let meta: serde_json::Value = serde_json::from_str(field(lines.next(), "meta")?)?;

    // values are overwritten below; the seed only fixes the skeleton
    let mut model = ModelGraph::build(spec, &mut SeededRng::seed_from_u64(0))?;
    for p in model.params_mut() {
        let header = field(lines.next(), "param")?;
        let (name, dims) = header
            .split_once(' ')
            .ok_or_else(|| bad(format!("malformed param header `{header}`")))?;
        if name != p.name {
            return Err(bad(format!("expected parameter `{}`, found `{name}`", p.name)));
        }
        let shape: Vec<usize> = dims
            .split('x')
            .map(|d| d.parse().map_err(|_| bad(format!("bad dims `{dims}`"))))
            .collect::<Result<_>>()?;
        if shape != p.value.shape() {
            return Err(bad(format!("`{name}` has shape {shape:?}, model expects {:?}", p.value.shape())));
        }
        let values: Vec<f64> = lines
            .next()
            .ok_or_else(|| bad(format!("missing values for `{name}`")))?
            .split_ascii_whitespace()
            .map(|v| v.parse().map_err(|_| bad(format!("bad value `{v}` in `{name}`"))))
            .collect::<Result<_>>()?;
        if values.len() != p.value.len() {
            return Err(bad(format!("`{name}` has {} values, expected {}", values.len(), p.value.len())));
        }
        p.value.data_mut().copy_from_slice(&values);
    }
    if lines.next() != Some("end") {
        return Err(bad("trailing data or missing `end`"));
    }
    Ok(Checkpoint { model, meta })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    parse_checkpoint(&fs::read_to_string(path)?)
}
