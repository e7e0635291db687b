//! Model files (TOML) and the plain-text operator format.
//!
//! Model file schema, version 1:
//!
//! ```toml
//! version = 1
//! [space]
//! provenance = "cycle C_8"          # optional
//! measures = [1.0, 1.0, 1.0]
//! edges = [{ a = 0, b = 1, length = 1.0 }, { a = 1, b = 2, length = 1.0 }]
//! # or, instead of edges, a full metric matrix: metric = [[0.0, 1.0], [1.0, 0.0]]
//! [magnetic]                         # optional, one phase per edge, one potential per point
//! phases = [0.0, 1.5]
//! potential = [0.0, 0.0, 0.0]
//! [[triangles]]                      # optional, oriented a -> b -> c
//! vertices = [0, 1, 2]
//! ```
//!
//! Floats are written in shortest round-trip form, so load/save is bit-exact.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bundle::{BundleOperator, C64};
use crate::error::{Error, Result};
use crate::models::{build_hodge, build_magnetic, triangle_from_vertices, HodgeComplex, MagneticSchrodinger};
use crate::space::{Edge, MetricMeasureSpace};

pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    pub measures: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<EdgeSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagneticSpec {
    pub phases: Vec<f64>,
    pub potential: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriangleSpec {
    pub vertices: [usize; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: u32,
    pub space: SpaceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnetic: Option<MagneticSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub triangles: Vec<TriangleSpec>,
}

impl ModelFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let m: ModelFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if m.version != MODEL_VERSION {
            return Err(Error::Parse(format!("model file version {} is not supported (expected {MODEL_VERSION})", m.version)));
        }
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model file serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml())?;
        Ok(())
    }

    /// Model file describing an edge-built space.
    pub fn from_space(space: &MetricMeasureSpace) -> Self {
        let edges = space.edges();
        let (edges, metric) = if edges.is_empty() {
            let n = space.n();
            (None, Some((0..n).map(|x| (0..n).map(|y| space.dist(x, y)).collect()).collect()))
        } else {
            (Some(edges.iter().map(|e| EdgeSpec { a: e.a, b: e.b, length: e.length }).collect()), None)
        };
        ModelFile {
            version: MODEL_VERSION,
            space: SpaceSpec {
                provenance: Some(space.provenance().to_string()),
                measures: space.measures().to_vec(),
                edges,
                metric,
            },
            magnetic: None,
            triangles: Vec::new(),
        }
    }

    pub fn build_space(&self) -> Result<MetricMeasureSpace> {
        let prov = self.space.provenance.clone().unwrap_or_else(|| "model file".into());
        match (&self.space.edges, &self.space.metric) {
            (Some(edges), None) => {
                let edges: Vec<Edge> = edges.iter().map(|e| Edge { a: e.a, b: e.b, length: e.length }).collect();
                MetricMeasureSpace::build(&edges, &self.space.measures, prov)
            }
            (None, Some(rows)) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Parse("metric must be a square matrix".into()));
                }
                MetricMeasureSpace::from_metric(rows.concat(), &self.space.measures, prov)
            }
            _ => Err(Error::Parse("space needs exactly one of `edges` or `metric`".into())),
        }
    }

    /// Magnetic section if present, else the plain Laplacian written as a zero-phase model.
    pub fn build_magnetic(&self) -> Result<MagneticSchrodinger> {
        let space = Arc::new(self.build_space()?);
        match &self.magnetic {
            Some(m) => build_magnetic(space, &m.phases, &m.potential),
            None => build_magnetic(space.clone(), &vec![0.0; space.edges().len()], &vec![0.0; space.n()]),
        }
    }

    pub fn build_hodge(&self) -> Result<HodgeComplex> {
        let space = Arc::new(self.build_space()?);
        let tris = self
            .triangles
            .iter()
            .map(|t| triangle_from_vertices(&space, t.vertices[0], t.vertices[1], t.vertices[2]))
            .collect::<Result<Vec<_>>>()?;
        build_hodge(space, &tris)
    }
}

/// Text form of an operator matrix: a header line `n l mu-right`, a line of the n measures, then
/// one line per matrix row holding `re im` pairs. Floats use shortest round-trip formatting.
pub fn operator_to_text(op: &BundleOperator) -> String {
    let space = op.space();
    let mut s = String::new();
    s.push_str(&format!("{} {} mu-right\n", space.n(), op.fiber()));
    let mu: Vec<String> = space.measures().iter().map(|m| format!("{m:?}")).collect();
    s.push_str(&mu.join(" "));
    s.push('\n');
    let m = op.matrix();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?} {:?}", m[(i, j)].re, m[(i, j)].im)).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Parses the operator text format against `space`; n, l and the measures must match.
pub fn operator_from_text(text: &str, space: Arc<MetricMeasureSpace>) -> Result<BundleOperator> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Parse("empty operator file".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[2] != "mu-right" {
        return Err(Error::Parse(format!("bad header `{header}`; expected `n l mu-right`")));
    }
    let n: usize = parts[0].parse().map_err(|_| Error::Parse(format!("bad n `{}`", parts[0])))?;
    let l: usize = parts[1].parse().map_err(|_| Error::Parse(format!("bad l `{}`", parts[1])))?;
    if n != space.n() {
        return Err(Error::DimensionMismatch(format!("file has n = {n}, space has {}", space.n())));
    }
    let parse = |t: &str| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{t}`")));
    let mu_line = lines.next().ok_or_else(|| Error::Parse("missing measure line".into()))?;
    let mu = mu_line.split_whitespace().map(parse).collect::<Result<Vec<_>>>()?;
    if mu.len() != n || mu.iter().zip(space.measures()).any(|(a, b)| a.to_bits() != b.to_bits()) {
        return Err(Error::Validation("measures in the operator file differ from the space".into()));
    }
    let d = n * l;
    let mut m = DMatrix::<C64>::zeros(d, d);
    for i in 0..d {
        let line = lines.next().ok_or_else(|| Error::Parse(format!("missing row {i}")))?;
        let vals = line.split_whitespace().map(parse).collect::<Result<Vec<_>>>()?;
        if vals.len() != 2 * d {
            return Err(Error::Parse(format!("row {i} has {} numbers, expected {}", vals.len(), 2 * d)));
        }
        for j in 0..d {
            m[(i, j)] = C64::new(vals[2 * j], vals[2 * j + 1]);
        }
    }
    if lines.next().is_some() {
        return Err(Error::Parse("trailing data after the last row".into()));
    }
    BundleOperator::new(space, l, m, None)
}
