//! Pipeline configuration: a key = value file plus flag overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mesh::io::MeshFormat;
use crate::pipeline::PhiChoice;

/// Default natural units per ambient unit on the outer boundary (bordered)
/// or per square root of area (closed).
pub const DEFAULT_NATURAL_SCALE: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceOverride {
    Auto,
    Closed,
    Bordered,
}

impl FromStr for SurfaceOverride {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(SurfaceOverride::Auto),
            "closed" => Ok(SurfaceOverride::Closed),
            "bordered" => Ok(SurfaceOverride::Bordered),
            other => Err(Error::Config(format!(
                "surface must be auto, closed or bordered, got '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exports {
    pub svg: bool,
    pub obj_path: bool,
    pub cells_obj: bool,
    pub report_json: bool,
}

impl Default for Exports {
    fn default() -> Self {
        Exports {
            svg: true,
            obj_path: true,
            cells_obj: true,
            report_json: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub format: Option<MeshFormat>,
    pub surface: SurfaceOverride,
    pub phi: PhiChoice,
    /// Where the Φ coefficients came from, if read from a file.
    pub phi_source: Option<PathBuf>,
    pub epsilon: Vec<f64>,
    pub delta: Vec<f64>,
    pub resolution: usize,
    pub natural_scale: f64,
    pub out: PathBuf,
    pub exports: Exports,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: PathBuf::new(),
            format: None,
            surface: SurfaceOverride::Auto,
            phi: PhiChoice::Default,
            phi_source: None,
            epsilon: vec![4.0],
            delta: vec![0.005],
            resolution: crate::coverage::DEFAULT_RESOLUTION,
            natural_scale: DEFAULT_NATURAL_SCALE,
            out: PathBuf::from("out"),
            exports: Exports::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::Config("no input mesh given".into()));
        }
        if self.epsilon.is_empty() || self.delta.is_empty() {
            return Err(Error::Config("epsilon and delta lists must be non-empty".into()));
        }
        if let Some(e) = self.epsilon.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("epsilon must be positive, got {e}")));
        }
        if let Some(d) = self.delta.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::Config(format!("delta must be positive, got {d}")));
        }
        if !(self.natural_scale > 0.0 && self.natural_scale.is_finite()) {
            return Err(Error::Config("natural_scale must be positive".into()));
        }
        if let PhiChoice::Coefficients(c) = &self.phi {
            if c.is_empty() {
                return Err(Error::Config("coefficient list is empty".into()));
            }
        }
        Ok(())
    }

    /// Applies one `key = value` setting. `base` resolves relative paths.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_relative() {
                base.join(p)
            } else {
                p
            }
        };
        match key {
            "input" => self.input = path(value),
            "format" => self.format = Some(value.parse()?),
            "surface" => self.surface = value.parse()?,
            "phi" => self.phi = parse_pair(value)?,
            "phi_coeffs" => {
                let p = path(value);
                self.phi = PhiChoice::Coefficients(read_coefficients(&p)?);
                self.phi_source = Some(p);
            }
            "epsilon" => self.epsilon = parse_list(key, value)?,
            "delta" => self.delta = parse_list(key, value)?,
            "resolution" => self.resolution = parse_num(key, value)?,
            "natural_scale" => self.natural_scale = parse_num(key, value)?,
            "out" => self.out = path(value),
            "seed" => self.seed = parse_num(key, value)?,
            "svg" => self.exports.svg = parse_bool(key, value)?,
            "obj_path" => self.exports.obj_path = parse_bool(key, value)?,
            "cells_obj" => self.exports.cells_obj = parse_bool(key, value)?,
            "report_json" => self.exports.report_json = parse_bool(key, value)?,
            other => return Err(Error::Config(format!("unknown setting '{other}'"))),
        }
        Ok(())
    }

    /// Reads a config file into `self`. Relative paths inside it are taken
    /// relative to the file.
    pub fn load_file(&mut self, file: &Path) -> Result<()> {
        let text = std::fs::read_to_string(file)?;
        let base = file.parent().unwrap_or(Path::new("."));
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::parse(n + 1, format!("expected key = value, got '{line}'")));
            };
            self.set(k.trim(), v.trim(), base)?;
        }
        Ok(())
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got '{v}'"))),
    }
}

/// Comma separated numbers.
pub fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|x| parse_num(key, x)).collect()
}

/// `i,j` selects Φ = ζ_i ζ_j.
pub fn parse_pair(v: &str) -> Result<PhiChoice> {
    let parts: Vec<&str> = v.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Config(format!("phi must be 'i,j', got '{v}'")));
    }
    Ok(PhiChoice::Pair(
        parse_num("phi", parts[0])?,
        parse_num("phi", parts[1])?,
    ))
}

/// Coefficient lines `i j re im`; `#` starts a comment.
pub fn parse_coefficients(text: &str) -> Result<Vec<(usize, usize, Complex64)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(Error::parse(n + 1, format!("expected 'i j re im', got '{line}'")));
        }
        let bad = |what: &str| Error::parse(n + 1, format!("bad {what} in '{line}'"));
        let i = f[0].parse().map_err(|_| bad("index"))?;
        let j = f[1].parse().map_err(|_| bad("index"))?;
        let re: f64 = f[2].parse().map_err(|_| bad("real part"))?;
        let im: f64 = f[3].parse().map_err(|_| bad("imaginary part"))?;
        if !(re.is_finite() && im.is_finite()) {
            return Err(bad("coefficient"));
        }
        out.push((i, j, Complex64::new(re, im)));
    }
    if out.is_empty() {
        return Err(Error::Config("coefficient list is empty".into()));
    }
    Ok(out)
}

pub fn read_coefficients(path: &Path) -> Result<Vec<(usize, usize, Complex64)>> {
    parse_coefficients(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_lines() {
        let c = parse_coefficients("# header\n0 1 1.5 -2\n\n2 2 0 1 # trailing\n").unwrap();
        assert_eq!(
            c,
            vec![(0, 1, Complex64::new(1.5, -2.0)), (2, 2, Complex64::new(0.0, 1.0))]
        );
        assert!(matches!(
            parse_coefficients("0 1 x 0"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(parse_coefficients("# nothing"), Err(Error::Config(_))));
    }

    #[test]
    fn settings_and_validation() {
        let mut c = PipelineConfig::default();
        c.set("input", "m.obj", Path::new("/data")).unwrap();
        c.set("epsilon", "2, 4,8", Path::new(".")).unwrap();
        c.set("phi", "0,1", Path::new(".")).unwrap();
        c.set("svg", "no", Path::new(".")).unwrap();
        assert_eq!(c.input, PathBuf::from("/data/m.obj"));
        assert_eq!(c.epsilon, vec![2.0, 4.0, 8.0]);
        assert_eq!(c.phi, PhiChoice::Pair(0, 1));
        assert!(!c.exports.svg);
        c.validate().unwrap();
        c.delta = vec![0.0];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        assert!(c.set("colour", "red", Path::new(".")).is_err());
    }
}
