//! Plain-text ground-state cache.
//!
//! ```text
//! n=3 r_max=30 N=400 scheme=gauss_legendre_mapped
//! method=fixed_point tol=... residual=... mass=... nu=... energy=...
//! <r> <U(r)>        (one row per node, 17 significant digits)
//! ```

use std::fmt::Write as _;

use super::{GroundState, Method};
use crate::error::{HartreeError, Result};
use crate::radial::{build_grid, GridDescriptor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheHeader {
    pub method: Method,
    pub tol: f64,
    pub residual: f64,
    pub mass: f64,
    pub nu: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CachedProfile {
    pub descriptor: GridDescriptor,
    pub header: CacheHeader,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_cache(gs: &GroundState) -> String {
    let header = CacheHeader {
        method: gs.method,
        tol: gs.tol,
        residual: gs.residual,
        mass: gs.l2_mass,
        nu: gs.nu,
        energy: gs.energy,
    };
    format_parts(
        &gs.grid().descriptor(),
        &header,
        gs.grid().nodes(),
        gs.values(),
    )
}

fn format_parts(desc: &GridDescriptor, h: &CacheHeader, nodes: &[f64], values: &[f64]) -> String {
    let mut out = String::with_capacity(40 * (nodes.len() + 2));
    let _ = writeln!(out, "{desc}");
    let _ = writeln!(
        out,
        "method={} tol={} residual={} mass={} nu={} energy={}",
        h.method,
        num(h.tol),
        num(h.residual),
        num(h.mass),
        num(h.nu),
        num(h.energy)
    );
    for (r, u) in nodes.iter().zip(values) {
        let _ = writeln!(out, "{} {}", num(*r), num(*u));
    }
    out
}

impl CachedProfile {
    pub fn to_text(&self) -> String {
        format_parts(&self.descriptor, &self.header, &self.nodes, &self.values)
    }

    /// Rebuilds the grid from the descriptor and the ground-state record from
    /// the stored values. Node positions must match the rebuilt grid exactly.
    pub fn into_ground_state(self) -> Result<GroundState> {
        let d = self.descriptor;
        let grid = build_grid(d.dim, d.r_max, d.n_nodes, d.scheme)?;
        if grid.nodes() != self.nodes.as_slice() {
            return Err(HartreeError::GridMismatch(
                "cached node positions differ from the rebuilt grid".into(),
            ));
        }
        let mut gs = GroundState::from_profile(&grid, self.values, 0.0, self.header.method, self.header.tol)?;
        gs.residual = self.header.residual;
        gs.l2_mass = self.header.mass;
        gs.nu = self.header.nu;
        gs.energy = self.header.energy;
        Ok(gs)
    }
}

pub fn parse_cache(text: &str) -> Result<CachedProfile> {
    let mut lines = text.lines();
    let parse_err = |m: String| HartreeError::Parse(m);
    let descriptor: GridDescriptor = lines
        .next()
        .ok_or_else(|| parse_err("empty cache".into()))?
        .parse()?;
    let head = lines
        .next()
        .ok_or_else(|| parse_err("cache lacks the solver header".into()))?;
    let mut method = None;
    let mut fields = [None; 5];
    const KEYS: [&str; 5] = ["tol", "residual", "mass", "nu", "energy"];
    for tok in head.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| parse_err(format!("malformed header token '{tok}'")))?;
        if k == "method" {
            method = Some(v.parse::<Method>()?);
            continue;
        }
        let idx = KEYS
            .iter()
            .position(|&key| key == k)
            .ok_or_else(|| parse_err(format!("unknown header key '{k}'")))?;
        fields[idx] = Some(
            v.parse::<f64>()
                .map_err(|e| parse_err(format!("bad number for '{k}': {e}")))?,
        );
    }
    let get = |i: usize| fields[i].ok_or_else(|| parse_err(format!("header lacks '{}'", KEYS[i])));
    let header = CacheHeader {
        method: method.ok_or_else(|| parse_err("header lacks 'method'".into()))?,
        tol: get(0)?,
        residual: get(1)?,
        mass: get(2)?,
        nu: get(3)?,
        energy: get(4)?,
    };
    let mut nodes = Vec::with_capacity(descriptor.n_nodes);
    let mut values = Vec::with_capacity(descriptor.n_nodes);
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut next = || -> Result<f64> {
            it.next()
                .ok_or_else(|| parse_err(format!("row {} is incomplete", lineno + 3)))?
                .parse::<f64>()
                .map_err(|e| parse_err(format!("row {}: {e}", lineno + 3)))
        };
        nodes.push(next()?);
        values.push(next()?);
    }
    if nodes.len() != descriptor.n_nodes {
        return Err(parse_err(format!(
            "cache holds {} rows, descriptor announces {}",
            nodes.len(),
            descriptor.n_nodes
        )));
    }
    Ok(CachedProfile {
        descriptor,
        header,
        nodes,
        values,
    })
}
