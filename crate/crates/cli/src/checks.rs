//! Check registry: names, parameter tables with defaults, and dispatch to the library.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use wavecert::cz_riesz::{cz_trials_check, good_function_diagnostic, riesz_norms_check, riesz_tail_bound_check, LocalOperator};
use wavecert::gaussian::{gl2_bound_check, gl2_refinement_check, molchanov_sphere_check, truncation_identity_check, Gl2Variant};
use wavecert::models::{commutation_check, domination_check, energy_decay_check, energy_rescaling_check};
use wavecert::multiplier::{build_gl2_family, build_phi_family, build_riesz_tail_family, verify_osz_decay, verify_pom_estimate, TailGrid};
use wavecert::wave_heat::{
    davies_gaffney_check, ellip_equivalence_check, propagation_speed_estimate, resolvent_profile, subordination_check, ProfileKind,
    Probe,
};
use wavecert::{bundle, CheckReport, Error, MetricMeasureSpace, Result, C64};

use crate::model::{builtin, Model};

pub struct Context {
    pub seed: u64,
    pub tolerance_scale: f64,
}

pub const CHECKS: &[&str] = &[
    "chebyshev",
    "compose_bound",
    "propagation_speed",
    "davies_gaffney",
    "subordination",
    "ellip_equivalence",
    "osz_decay",
    "pom_estimate",
    "truncation_identity",
    "gl2_bound",
    "molchanov_sphere",
    "domination",
    "energy_decay",
    "energy_rescaling",
    "hodge_commutation",
    "cz_decomposition",
    "riesz_norms",
    "good_function",
    "riesz_tail",
];

/// Checks whose verdict is observed_constant <= threshold; `tolerance_scale` widens their threshold.
const SCALABLE: &[&str] = &["chebyshev", "davies_gaffney", "subordination", "domination", "energy_rescaling"];

fn parse<P: DeserializeOwned + Serialize>(params: &toml::Table) -> Result<(P, toml::Table)> {
    let p: P = toml::Value::Table(params.clone()).try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    let resolved = toml::Table::try_from(&p).map_err(|e| Error::Parse(e.to_string()))?;
    Ok((p, resolved))
}

/// First point at distance `rho` from `x`.
fn point_at(space: &MetricMeasureSpace, x: usize, rho: f64) -> Result<usize> {
    (0..space.n())
        .find(|&y| (space.dist(x, y) - rho).abs() <= 1e-9)
        .ok_or_else(|| Error::Validation(format!("no point at distance {rho} from {x}")))
}

fn triples(space: &MetricMeasureSpace, x: usize, rho: &[f64], t: &[f64]) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for &r in rho {
        let y = point_at(space, x, r)?;
        for &tt in t {
            out.push((x, y, tt));
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Chebyshev {
    t: f64,
    degree: usize,
}
impl Default for Chebyshev {
    fn default() -> Self {
        Self { t: 1.0, degree: 30 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ComposeBound {
    t: f64,
    s: f64,
}
impl Default for ComposeBound {
    fn default() -> Self {
        Self { t: 1.0, s: 2.0 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Propagation {
    t: Vec<f64>,
    eps: f64,
}
impl Default for Propagation {
    fn default() -> Self {
        Self { t: vec![2.0, 4.0, 6.0, 8.0], eps: wavecert::wave_heat::DEFAULT_EPS }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DaviesGaffney {
    x: usize,
    rho: Vec<f64>,
    t: Vec<f64>,
    constant: f64,
    /// 0 for point masses, otherwise the radius of ball indicators
    ball_radius: f64,
}
impl Default for DaviesGaffney {
    fn default() -> Self {
        Self {
            x: 0,
            rho: vec![2.0, 4.0, 8.0],
            t: vec![2.0, 4.0, 8.0],
            constant: wavecert::wave_heat::DEFAULT_DG_CONSTANT,
            ball_radius: 0.0,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Subordination {
    s: f64,
    nodes: usize,
}
impl Default for Subordination {
    fn default() -> Self {
        Self { s: 0.5, nodes: 64 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Ellip {
    m: f64,
    t: Vec<f64>,
    /// fitted from the doubling profile when absent
    d: Option<f64>,
}
impl Default for Ellip {
    fn default() -> Self {
        Self { m: 4.0, t: vec![0.5, 2.0, 8.0, 32.0], d: None }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Osz {
    s: Vec<f64>,
    n_power: u32,
    density: f64,
}
impl Default for Osz {
    fn default() -> Self {
        Self { s: vec![2.0, 4.0, 8.0], n_power: 2, density: 64.0 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Pom {
    alpha: f64,
    m: u32,
    k: usize,
    j: Vec<u32>,
}
impl Default for Pom {
    fn default() -> Self {
        Self { alpha: 0.5, m: 1, k: 2, j: vec![1, 2, 3, 4, 5, 6] }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Truncation {
    x: usize,
    rho: Vec<f64>,
    t: Vec<f64>,
}
impl Default for Truncation {
    fn default() -> Self {
        Self { x: 0, rho: vec![8.0], t: vec![4.0] }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Gl2 {
    x: usize,
    rho: Vec<f64>,
    /// times as fractions of rho: t = f * rho
    t_over_rho: Vec<f64>,
    n_power: u32,
    /// "resolvent" or "heat"
    profile: String,
    /// "profile" or "volume"
    variant: String,
    refine: bool,
}
impl Default for Gl2 {
    fn default() -> Self {
        Self {
            x: 0,
            rho: vec![8.0, 16.0],
            t_over_rho: vec![0.25, 0.5, 1.0],
            n_power: 2,
            profile: "resolvent".into(),
            variant: "profile".into(),
            refine: true,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Molchanov {
    l_max: usize,
    t: Vec<f64>,
}
impl Default for Molchanov {
    fn default() -> Self {
        Self { l_max: 40, t: vec![0.15, 0.2, 0.25, 0.3] }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Domination {
    t: Vec<f64>,
}
impl Default for Domination {
    fn default() -> Self {
        Self { t: vec![0.1, 1.0, 10.0] }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Energy {
    kappa: f64,
    center: usize,
    radius: f64,
    /// times; 20 points up to 0.8 * eccentricity / kappa when empty
    t: Vec<f64>,
}
impl Default for Energy {
    fn default() -> Self {
        Self { kappa: 0.5, center: 0, radius: 0.0, t: Vec::new() }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Rescaling {
    kappa: f64,
    center: usize,
    radius: f64,
    scales: Vec<f64>,
}
impl Default for Rescaling {
    fn default() -> Self {
        Self { kappa: 0.5, center: 0, radius: 0.0, scales: vec![1.0, 0.5, 0.25] }
    }
}

#[derive(Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct NoParams {}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CzTrials {
    trials: usize,
    level_factor: f64,
    power: i32,
}
impl Default for CzTrials {
    fn default() -> Self {
        Self { trials: 50, level_factor: 2.0, power: 8 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RieszNorms {
    alpha: f64,
    p: f64,
    iterations: usize,
    probes: Vec<usize>,
}
impl Default for RieszNorms {
    fn default() -> Self {
        Self { alpha: 0.5, p: 1.5, iterations: 60, probes: vec![0] }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GoodFunction {
    level: f64,
    k: usize,
    atom: usize,
}
impl Default for GoodFunction {
    fn default() -> Self {
        Self { level: 0.125, k: 2, atom: 0 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RieszTail {
    alpha: f64,
    r: f64,
    j_max: u32,
    k: usize,
    samples: Vec<usize>,
}
impl Default for RieszTail {
    fn default() -> Self {
        Self { alpha: 0.5, r: 4.0, j_max: 6, k: 2, samples: vec![0] }
    }
}

fn eccentricity(space: &MetricMeasureSpace, x: usize) -> f64 {
    (0..space.n()).map(|y| space.dist(x, y)).fold(0.0, f64::max)
}

/// Runs one check; returns the report and its fully resolved parameter table.
pub fn run(name: &str, model: &Model, params: &toml::Table, ctx: &Context) -> Result<(CheckReport, toml::Table)> {
    let space = model.space.clone();
    let decompose = || -> Result<_> { model.operator()?.decompose() };
    let (mut report, resolved) = match name {
        "chebyshev" => {
            let (p, r) = parse::<Chebyshev>(params)?;
            let op = model.operator()?;
            (bundle::chebyshev_fidelity_check(&op, &op.decompose()?, p.t, p.degree)?, r)
        }
        "compose_bound" => {
            let (p, r) = parse::<ComposeBound>(params)?;
            let dec = decompose()?;
            let (t, s) = (p.t, p.s);
            (bundle::compose_bound_check(move |l| (-t * l).exp(), move |l| (s * l.sqrt()).cos(), &dec)?, r)
        }
        "propagation_speed" => {
            let (p, r) = parse::<Propagation>(params)?;
            (propagation_speed_estimate(&decompose()?, &space, &p.t, p.eps)?, r)
        }
        "davies_gaffney" => {
            let (p, r) = parse::<DaviesGaffney>(params)?;
            let pairs = triples(&space, p.x, &p.rho, &p.t)?;
            let probe = if p.ball_radius > 0.0 { Probe::BallIndicator(p.ball_radius) } else { Probe::PointMass };
            (davies_gaffney_check(&decompose()?, &space, &pairs, p.constant, probe)?, r)
        }
        "subordination" => {
            let (p, r) = parse::<Subordination>(params)?;
            (subordination_check(&decompose()?, p.s, p.nodes)?, r)
        }
        "ellip_equivalence" => {
            let (p, r) = parse::<Ellip>(params)?;
            let d = match p.d {
                Some(d) => d,
                None => space.doubling_profile(&space.default_radii())?.d_exponent,
            };
            (ellip_equivalence_check(&decompose()?, &space, &p.t, p.m, d)?, r)
        }
        "osz_decay" => {
            let (p, r) = parse::<Osz>(params)?;
            let fams = p.s.iter().map(|&s| build_gl2_family(s, p.density)).collect::<Result<Vec<_>>>()?;
            (verify_osz_decay(&fams, p.n_power)?, r)
        }
        "pom_estimate" => {
            let (p, r) = parse::<Pom>(params)?;
            let phi = build_phi_family(p.k, None)?;
            let fams = p
                .j
                .iter()
                .map(|&j| build_riesz_tail_family(p.alpha, j, p.m, &phi, TailGrid::default()))
                .collect::<Result<Vec<_>>>()?;
            (verify_pom_estimate(&fams)?, r)
        }
        "truncation_identity" => {
            let (p, r) = parse::<Truncation>(params)?;
            let tr = triples(&space, p.x, &p.rho, &p.t)?;
            (truncation_identity_check(&decompose()?, &space, &tr)?, r)
        }
        "gl2_bound" => {
            let (p, r) = parse::<Gl2>(params)?;
            let kind = match p.profile.as_str() {
                "resolvent" => ProfileKind::Resolvent,
                "heat" => ProfileKind::Heat,
                other => return Err(Error::Validation(format!("profile `{other}`; expected resolvent or heat"))),
            };
            let variant = match p.variant.as_str() {
                "profile" => Gl2Variant::Profile,
                "volume" => Gl2Variant::Volume,
                other => return Err(Error::Validation(format!("variant `{other}`; expected profile or volume"))),
            };
            let run_on = |m: &Model| -> Result<CheckReport> {
                let mut tr = Vec::new();
                for &rho in &p.rho {
                    let y = point_at(&m.space, p.x, rho)?;
                    for &f in &p.t_over_rho {
                        tr.push((p.x, y, f * rho));
                    }
                }
                let mut taus: Vec<f64> = tr.iter().map(|&(x, y, t)| t / m.space.dist(x, y)).collect();
                taus.sort_by(f64::total_cmp);
                taus.dedup();
                let dec = m.operator()?.decompose()?;
                let prof = resolvent_profile(&dec, &m.space, &taus, p.n_power, kind)?;
                gl2_bound_check(&dec, &m.space, &prof, &tr, p.n_power, variant)
            };
            let base = run_on(model)?;
            match (&model.refined, p.refine) {
                (Some(refined), true) => {
                    let fine = builtin(refined, ctx.seed)?;
                    let fine_report = run_on(&fine)?;
                    let mut rep = gl2_refinement_check(&base, &fine_report);
                    rep.value("refined_model_points", fine.space.n() as f64);
                    (rep, r)
                }
                _ => (base, r),
            }
        }
        "molchanov_sphere" => {
            let (p, r) = parse::<Molchanov>(params)?;
            (molchanov_sphere_check(p.l_max, &p.t)?, r)
        }
        "domination" => {
            let (p, r) = parse::<Domination>(params)?;
            (domination_check(&model.magnetic_or_free()?, &p.t)?, r)
        }
        "energy_decay" => {
            let (mut p, _) = parse::<Energy>(params)?;
            if p.t.is_empty() {
                let t_max = 0.8 * eccentricity(&space, p.center) / p.kappa;
                p.t = (1..=20).map(|i| t_max * i as f64 / 20.0).collect();
            }
            let r = toml::Table::try_from(&p).map_err(|e| Error::Parse(e.to_string()))?;
            let xi: Vec<f64> = (0..space.n()).map(|y| p.kappa * space.dist(p.center, y)).collect();
            (energy_decay_check(&model.magnetic_or_free()?, &xi, p.kappa, &p.t, (p.center, p.radius))?, r)
        }
        "energy_rescaling" => {
            let (p, r) = parse::<Rescaling>(params)?;
            let xi: Vec<f64> = (0..space.n()).map(|y| p.kappa * space.dist(p.center, y)).collect();
            (energy_rescaling_check(&model.magnetic_or_free()?, &xi, p.kappa, &p.scales, (p.center, p.radius))?, r)
        }
        "hodge_commutation" => {
            let (_, r) = parse::<NoParams>(params)?;
            (commutation_check(&model.hodge()?)?, r)
        }
        "cz_decomposition" => {
            let (p, r) = parse::<CzTrials>(params)?;
            (cz_trials_check(&space, p.trials, ctx.seed, p.level_factor, p.power)?, r)
        }
        "riesz_norms" => {
            let (p, r) = parse::<RieszNorms>(params)?;
            let a = LocalOperator::gradient(&space)?;
            (riesz_norms_check(&a, &decompose()?, p.alpha, p.p, ctx.seed, p.iterations, &p.probes)?, r)
        }
        "good_function" => {
            let (p, r) = parse::<GoodFunction>(params)?;
            if p.atom >= space.n() {
                return Err(Error::Validation(format!("atom {} is not a point of the model", p.atom)));
            }
            let mut f = nalgebra::DVector::<C64>::zeros(space.n());
            f[p.atom] = C64::new(1.0 / space.mu(p.atom), 0.0);
            let phi = build_phi_family(p.k, None)?;
            (good_function_diagnostic(&space, &decompose()?, &f, p.level, &phi)?, r)
        }
        "riesz_tail" => {
            let (p, r) = parse::<RieszTail>(params)?;
            let a = LocalOperator::gradient(&space)?;
            let phi = build_phi_family(p.k, None)?;
            (riesz_tail_bound_check(&a, &decompose()?, &space, &phi, p.alpha, p.r, p.j_max, &p.samples)?, r)
        }
        other => {
            return Err(Error::Validation(format!("unknown check `{other}`; valid checks are {}", CHECKS.join(", "))));
        }
    };
    if ctx.tolerance_scale != 1.0 && SCALABLE.contains(&name) {
        report.threshold *= ctx.tolerance_scale;
        report.pass = report.observed_constant <= report.threshold;
        report.value("tolerance_scale", ctx.tolerance_scale);
    }
    Ok((report, resolved))
}
