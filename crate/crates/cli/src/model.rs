//! Model resolution: builtin names or model files.

use std::path::Path;
use std::sync::Arc;

use wavecert::bundle::DENSE_LIMIT;
use wavecert::io::ModelFile;
use wavecert::models::{build_hodge, build_magnetic, k3_complex, random_complex, random_phases, HodgeComplex, MagneticSchrodinger};
use wavecert::{BundleOperator, Error, MetricMeasureSpace, Result};

pub const BUILTINS: &[&str] = &[
    "cycle:N",
    "path:N",
    "grid:WxH",
    "star:N",
    "complete:N",
    "k3",
    "random_complex:SEED",
    "magnetic_cycle:N",
];

#[derive(Clone, Debug)]
pub struct Model {
    pub name: String,
    pub space: Arc<MetricMeasureSpace>,
    pub magnetic: Option<MagneticSchrodinger>,
    pub hodge: Option<HodgeComplex>,
    /// builtin name of the model at twice the linear size, when the family has one
    pub refined: Option<String>,
}

impl Model {
    /// The magnetic operator when present, otherwise the graph Laplacian.
    pub fn operator(&self) -> Result<BundleOperator> {
        match &self.magnetic {
            Some(m) => Ok(m.operator.clone()),
            None => BundleOperator::laplacian(self.space.clone()),
        }
    }

    /// Magnetic model with zero phases and potential when the model carries none.
    pub fn magnetic_or_free(&self) -> Result<MagneticSchrodinger> {
        match &self.magnetic {
            Some(m) => Ok(m.clone()),
            None => build_magnetic(self.space.clone(), &vec![0.0; self.space.edges().len()], &vec![0.0; self.space.n()]),
        }
    }

    pub fn hodge(&self) -> Result<HodgeComplex> {
        match &self.hodge {
            Some(h) => Ok(h.clone()),
            None => build_hodge(self.space.clone(), &[]),
        }
    }
}

fn size(name: &str, arg: &str) -> Result<usize> {
    arg.parse::<usize>()
        .map_err(|_| Error::Validation(format!("builtin `{name}` needs a positive integer size, got `{arg}`")))
}

fn guard(space: &MetricMeasureSpace) -> Result<()> {
    if space.n() > DENSE_LIMIT {
        return Err(Error::TooLarge(space.n()));
    }
    Ok(())
}

fn plain(name: String, space: MetricMeasureSpace, refined: Option<String>) -> Result<Model> {
    guard(&space)?;
    Ok(Model { name, space: Arc::new(space), magnetic: None, hodge: None, refined })
}

/// Resolves a builtin such as `cycle:64`; `seed` feeds the random builtins.
pub fn builtin(spec: &str, seed: u64) -> Result<Model> {
    let (kind, arg) = match spec.split_once(':') {
        Some((k, a)) => (k, a),
        None => (spec, ""),
    };
    let name = spec.to_string();
    match kind {
        "cycle" => {
            let n = size(kind, arg)?;
            guard_n(n)?;
            plain(name, MetricMeasureSpace::cycle(n)?, Some(format!("cycle:{}", 2 * n)))
        }
        "path" => {
            let n = size(kind, arg)?;
            guard_n(n)?;
            plain(name, MetricMeasureSpace::path(n)?, Some(format!("path:{}", 2 * n)))
        }
        "grid" => {
            let (w, h) = arg
                .split_once('x')
                .ok_or_else(|| Error::Validation(format!("builtin `grid` needs WxH, got `{arg}`")))?;
            let (w, h) = (size(kind, w)?, size(kind, h)?);
            guard_n(w.saturating_mul(h))?;
            plain(name, MetricMeasureSpace::grid(w, h)?, Some(format!("grid:{}x{}", 2 * w, 2 * h)))
        }
        "star" => {
            let n = size(kind, arg)?;
            guard_n(n + 1)?;
            plain(name, MetricMeasureSpace::star(n)?, None)
        }
        "complete" => {
            let n = size(kind, arg)?;
            guard_n(n)?;
            plain(name, MetricMeasureSpace::complete(n)?, None)
        }
        "k3" if arg.is_empty() => {
            let hc = k3_complex(true)?;
            Ok(Model { name, space: hc.vertex_space.clone(), magnetic: None, hodge: Some(hc), refined: None })
        }
        "random_complex" => {
            let s = if arg.is_empty() { seed } else { size(kind, arg)? as u64 };
            let hc = random_complex(s, 5, 40)?;
            Ok(Model { name, space: hc.vertex_space.clone(), magnetic: None, hodge: Some(hc), refined: None })
        }
        "magnetic_cycle" => {
            let n = size(kind, arg)?;
            guard_n(n)?;
            let space = Arc::new(MetricMeasureSpace::cycle(n)?);
            let ms = build_magnetic(space.clone(), &random_phases(&space, seed), &vec![0.0; n])?;
            Ok(Model { name, space, magnetic: Some(ms), hodge: None, refined: Some(format!("magnetic_cycle:{}", 2 * n)) })
        }
        _ => Err(Error::Validation(format!("unknown builtin `{spec}`; builtins are {}", BUILTINS.join(", ")))),
    }
}

fn guard_n(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge(n));
    }
    Ok(())
}

pub fn from_file(path: &Path) -> Result<Model> {
    if !path.exists() {
        return Err(Error::Validation(format!("model file {} does not exist", path.display())));
    }
    let file = ModelFile::load(path)?;
    let space = file.build_space()?;
    guard(&space)?;
    let magnetic = match &file.magnetic {
        Some(_) => Some(file.build_magnetic()?),
        None => None,
    };
    let hodge = if file.triangles.is_empty() { None } else { Some(file.build_hodge()?) };
    Ok(Model { name: path.display().to_string(), space: Arc::new(space), magnetic, hodge, refined: None })
}
