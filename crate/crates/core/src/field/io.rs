//! Profile files: CSV `r,phi_re,phi_im` plus a JSON sidecar with the grid and charge.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{FieldState, GridParams, RadialGrid};
use crate::error::{Error, Result};
use crate::greens::Dimension;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileMeta {
    pub dim: Dimension,
    pub lambda: f64,
    pub charge_re: f64,
    pub charge_im: f64,
    pub r_max: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub grading_exponent: f64,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes `path` and its `.json` sidecar. Rust's float formatting is the
/// shortest representation that round-trips, so reading back is bit-exact.
pub fn write_profile(state: &FieldState, path: &Path) -> Result<()> {
    let mut csv = String::from("r,phi_re,phi_im\n");
    for (r, z) in state.grid.nodes().iter().zip(&state.phi) {
        writeln!(csv, "{r:e},{:e},{:e}", z.re, z.im).expect("writing to a String");
    }
    fs::write(path, csv)?;
    let p = state.grid.params();
    let meta = ProfileMeta {
        dim: p.dim,
        lambda: state.lambda,
        charge_re: state.charge.re,
        charge_im: state.charge.im,
        r_max: p.r_max,
        m: p.m,
        grading_exponent: p.grading_exponent,
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_profile(path: &Path) -> Result<FieldState> {
    let side = sidecar_path(path);
    let meta_text = fs::read_to_string(&side)?;
    let meta: ProfileMeta = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
        location: format!("{}:{}:{}", side.display(), e.line(), e.column()),
        message: e.to_string(),
    })?;
    let grid = Arc::new(RadialGrid::new(GridParams {
        dim: meta.dim,
        r_max: meta.r_max,
        m: meta.m,
        grading_exponent: meta.grading_exponent,
    })?);
    let text = fs::read_to_string(path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        location: format!("{}:{}", path.display(), line),
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "r,phi_re,phi_im" => {}
        _ => return Err(parse_err(1, "expected header `r,phi_re,phi_im`".into())),
    }
    let mut phi = Vec::with_capacity(grid.nodes().len());
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(i + 1, format!("expected 3 fields, found {}", fields.len())));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| parse_err(i + 1, format!("`{s}`: {e}")));
        let (r, re, im) = (num(fields[0])?, num(fields[1])?, num(fields[2])?);
        let k = phi.len();
        let Some(&node) = grid.nodes().get(k) else {
            return Err(parse_err(i + 1, format!("more rows than the {} grid nodes", grid.nodes().len())));
        };
        if (r - node).abs() > 1e-12 * node.max(1.0) {
            return Err(parse_err(i + 1, format!("radius {r} does not match grid node {node}")));
        }
        phi.push(Complex64::new(re, im));
    }
    if phi.len() != grid.nodes().len() {
        return Err(parse_err(
            text.lines().count(),
            format!("truncated profile: {} rows for {} grid nodes", phi.len(), grid.nodes().len()),
        ));
    }
    FieldState::new(grid, meta.lambda, Complex64::new(meta.charge_re, meta.charge_im), phi)
}
