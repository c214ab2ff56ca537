//! Flat TOML configuration with dotted keys (model.*, scheme.*, sweep.*,
//! jump.*, io.*). Unknown keys are errors; every default is resolved here so
//! the manifest can echo it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// E = ½ku² − f(t)u.
    Play,
    /// E = ¼(1 − u²)² − f(t)u.
    DoubleWell,
    /// E = ½dist(u, [−a, a])² − f(t)u.
    FlatWell,
    /// Dirichlet chain with onsite double well, M = hI.
    DoubleWellChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViscosityKind {
    /// V = M.
    Mass,
    /// V = hI + K (the U Gram operator).
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityScaling {
    /// u₁^ε = u₁.
    Fixed,
    /// u₁^ε = u₁/√ε.
    InvSqrtEps,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: Option<ModelKind>,
    rho: Option<f64>,
    load_slope: Option<f64>,
    load_offset: Option<f64>,
    load_knots: Option<Vec<[f64; 2]>>,
    stiffness: Option<f64>,
    well_halfwidth: Option<f64>,
    u0: Option<f64>,
    relax_initial: Option<bool>,
    n: Option<usize>,
    length: Option<f64>,
    viscosity: Option<ViscosityKind>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    horizon: Option<f64>,
    tau: Option<f64>,
    eps: Option<f64>,
    u1: Option<f64>,
    u1_scaling: Option<VelocityScaling>,
    inner_tol: Option<f64>,
    inner_max_iter: Option<usize>,
    accelerated: Option<bool>,
    membership_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    tau: Option<Vec<f64>>,
    eps: Option<Vec<f64>>,
    contraction: Option<f64>,
    grid_points: Option<usize>,
    tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJump {
    threshold: Option<f64>,
    min_z: Option<f64>,
    sigma: Option<f64>,
    tau_prime: Option<f64>,
    steps_per_sigma: Option<usize>,
    beta: Option<f64>,
    alpha: Option<f64>,
    stability_tol: Option<f64>,
    tol_rel: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIo {
    out_dir: Option<String>,
    seed: Option<u64>,
    save_trajectory: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    scheme: RawScheme,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    jump: RawJump,
    #[serde(default)]
    io: RawIo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub rho: f64,
    /// f(t) = load_offset + load_slope·t unless knots are given.
    pub load_slope: f64,
    pub load_offset: f64,
    /// Piecewise-linear load (t, f) knots; a repeated time is a jump.
    pub load_knots: Option<Vec<[f64; 2]>>,
    pub stiffness: f64,
    pub well_halfwidth: f64,
    pub u0: f64,
    /// Start from the rest point the frozen t = 0 dynamics reach from the
    /// constant state u0, rather than from u0 itself.
    pub relax_initial: bool,
    pub n: usize,
    pub length: f64,
    pub viscosity: ViscosityKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub horizon: f64,
    pub tau: f64,
    pub eps: f64,
    pub u1: f64,
    pub u1_scaling: VelocityScaling,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub accelerated: bool,
    pub membership_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// (τ, ε) pairs in plan order, τ/ε strictly decreasing.
    pub pairs: Vec<(f64, f64)>,
    pub contraction: f64,
    pub grid_points: usize,
    /// Tolerance for balance closure and classification.
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpSpec {
    pub threshold: f64,
    pub min_z: f64,
    pub sigma: Option<f64>,
    pub tau_prime: Option<f64>,
    pub steps_per_sigma: usize,
    pub beta: f64,
    pub alpha: f64,
    pub stability_tol: f64,
    pub tol_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoSpec {
    pub out_dir: String,
    pub seed: u64,
    /// Write full per-node state; defaults to on when n·K ≤ 2·10⁶.
    pub save_trajectory: Option<bool>,
}

/// Fully resolved configuration, written back as the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub scheme: SchemeSpec,
    pub sweep: SweepSpec,
    pub jump: JumpSpec,
    pub io: IoSpec,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line declaring `section.key` (dotted or inside a `[section]` table).
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let dotted = format!("{section}.{key}");
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        let lhs = line.split('=').next().unwrap_or("").trim();
        if lhs == dotted || (current == section && lhs == key) {
            return Some(i + 1);
        }
    }
    None
}

struct Defaults {
    rho: f64,
    slope: f64,
    u0: f64,
    horizon: f64,
    tau: f64,
    eps: f64,
    pairs: &'static [(f64, f64)],
    n: usize,
}

fn defaults(kind: ModelKind) -> Defaults {
    match kind {
        ModelKind::Play => Defaults {
            rho: 1.0,
            slope: 2.0,
            u0: 0.0,
            horizon: 1.0,
            tau: 1e-4,
            eps: 1e-2,
            pairs: &[(1.0 / 64.0, 1.0 / 8.0), (1.0 / 256.0, 1.0 / 16.0), (1.0 / 1024.0, 1.0 / 32.0), (1.0 / 4096.0, 1.0 / 64.0), (1e-4, 1e-2)],
            n: 1,
        },
        ModelKind::DoubleWell => Defaults {
            rho: 0.2,
            slope: 1.0,
            u0: -1.0,
            horizon: 0.7,
            tau: 1e-5,
            eps: 5e-5,
            pairs: &[(4e-4, 1e-3), (2.5e-5, 1e-4), (5e-6, 3e-5), (1e-6, 1e-5)],
            n: 1,
        },
        ModelKind::FlatWell => Defaults {
            rho: 0.5,
            slope: 1.0,
            u0: -1.0,
            horizon: 0.8,
            tau: 1e-6,
            eps: 1e-5,
            pairs: &[(4e-4, 1e-3), (2.5e-5, 1e-4), (4e-6, 2e-5), (1e-6, 1e-5)],
            n: 1,
        },
        ModelKind::DoubleWellChain => Defaults {
            rho: 0.2,
            slope: 1.0,
            u0: -1.0,
            horizon: 1.2,
            tau: 1e-4,
            eps: 1e-2,
            pairs: &[(1e-2, 1e-1), (1e-3, 0.031_622_776_601_683_79), (1e-4, 1e-2), (1e-5, 0.003_162_277_660_168_379)],
            n: 64,
        },
    }
}

fn positive(text: &str, section: &str, key: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::config(key_line(text, section, key), format!("{section}.{key} must be positive, got {x}")))
    }
}

/// Parses and resolves a configuration from text.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        Error::config(line, e.message().to_string())
    })?;
    let kind = raw
        .model
        .kind
        .ok_or_else(|| Error::config(None, "model.kind is required (play, double-well, flat-well, double-well-chain)"))?;
    let d = defaults(kind);
    let m = raw.model;
    let n = m.n.unwrap_or(d.n);
    if kind != ModelKind::DoubleWellChain && n != 1 {
        return Err(Error::config(key_line(text, "model", "n"), "model.n applies to double-well-chain only"));
    }
    if n == 0 {
        return Err(Error::config(key_line(text, "model", "n"), "model.n must be at least 1"));
    }
    let model = ModelSpec {
        kind,
        rho: positive(text, "model", "rho", m.rho.unwrap_or(d.rho))?,
        load_slope: m.load_slope.unwrap_or(d.slope),
        load_offset: m.load_offset.unwrap_or(0.0),
        load_knots: m.load_knots,
        stiffness: positive(text, "model", "stiffness", m.stiffness.unwrap_or(1.0))?,
        well_halfwidth: positive(text, "model", "well_halfwidth", m.well_halfwidth.unwrap_or(1.0))?,
        u0: m.u0.unwrap_or(d.u0),
        relax_initial: m.relax_initial.unwrap_or(kind == ModelKind::DoubleWellChain),
        n,
        length: positive(text, "model", "length", m.length.unwrap_or(10.0))?,
        viscosity: m.viscosity.unwrap_or(ViscosityKind::Mass),
    };
    let s = raw.scheme;
    let scheme = SchemeSpec {
        horizon: positive(text, "scheme", "horizon", s.horizon.unwrap_or(d.horizon))?,
        tau: positive(text, "scheme", "tau", s.tau.unwrap_or(d.tau))?,
        eps: positive(text, "scheme", "eps", s.eps.unwrap_or(d.eps))?,
        u1: s.u1.unwrap_or(0.0),
        u1_scaling: s.u1_scaling.unwrap_or(VelocityScaling::Fixed),
        inner_tol: positive(text, "scheme", "inner_tol", s.inner_tol.unwrap_or(1e-10))?,
        inner_max_iter: s.inner_max_iter.unwrap_or(10_000),
        accelerated: s.accelerated.unwrap_or(false),
        membership_tol: positive(text, "scheme", "membership_tol", s.membership_tol.unwrap_or(1e-9))?,
    };
    let w = raw.sweep;
    let pairs = match (w.tau, w.eps) {
        (None, None) => d.pairs.to_vec(),
        (Some(t), Some(e)) => {
            if t.len() != e.len() {
                return Err(Error::config(
                    key_line(text, "sweep", "eps"),
                    format!("sweep.tau has {} entries but sweep.eps has {}", t.len(), e.len()),
                ));
            }
            t.into_iter().zip(e).collect()
        }
        _ => {
            return Err(Error::config(
                key_line(text, "sweep", "tau").or(key_line(text, "sweep", "eps")),
                "sweep.tau and sweep.eps must be given together",
            ))
        }
    };
    for (i, (t, e)) in pairs.iter().enumerate() {
        if !(*t > 0.0 && *e > 0.0 && t.is_finite() && e.is_finite()) {
            return Err(Error::config(key_line(text, "sweep", "tau"), format!("sweep pair {i} must be positive")));
        }
    }
    for (i, w) in pairs.windows(2).enumerate() {
        if w[1].0 / w[1].1 >= w[0].0 / w[0].1 {
            return Err(Error::config(
                key_line(text, "sweep", "tau"),
                format!(
                    "regime violation: tau/eps must strictly decrease along the sweep, but pair {} has {:.3e} >= {:.3e}",
                    i + 1,
                    w[1].0 / w[1].1,
                    w[0].0 / w[0].1
                ),
            ));
        }
    }
    let sweep = SweepSpec {
        pairs,
        contraction: w.contraction.unwrap_or(0.7),
        grid_points: w.grid_points.unwrap_or(1025),
        tol: positive(text, "sweep", "tol", w.tol.unwrap_or(0.05))?,
    };
    if sweep.grid_points < 2 {
        return Err(Error::config(key_line(text, "sweep", "grid_points"), "sweep.grid_points must be at least 2"));
    }
    let j = raw.jump;
    let jump = JumpSpec {
        threshold: positive(text, "jump", "threshold", j.threshold.unwrap_or(20.0))?,
        min_z: j.min_z.unwrap_or(1e-2),
        sigma: j.sigma,
        tau_prime: j.tau_prime,
        steps_per_sigma: j.steps_per_sigma.unwrap_or(100_000),
        beta: j.beta.unwrap_or(1e-6),
        alpha: j.alpha.unwrap_or(0.0),
        stability_tol: j.stability_tol.unwrap_or(1e-8),
        tol_rel: positive(text, "jump", "tol_rel", j.tol_rel.unwrap_or(0.05))?,
    };
    let o = raw.io;
    let io = IoSpec {
        out_dir: o.out_dir.unwrap_or_else(|| "runs/out".into()),
        seed: o.seed.unwrap_or(0),
        save_trajectory: o.save_trajectory,
    };
    Ok(RunConfig {
        model,
        scheme,
        sweep,
        jump,
        io,
    })
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

impl RunConfig {
    /// Manifest text; parses back to the same configuration.
    pub fn manifest(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.span().map(|s| line_of(text, s.start)), e.message().to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_resolves_defaults() {
        let c = parse_config_str("model.kind = \"play\"\n").unwrap();
        assert_eq!(c.model.rho, 1.0);
        assert_eq!(c.scheme.tau, 1e-4);
        assert_eq!(c.sweep.pairs.len(), 5);
        assert_eq!(c.sweep.grid_points, 1025);
        let back = RunConfig::from_manifest(&c.manifest()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_config_str("model.kind = \"play\"\n\nscheme.taus = 0.1\n").unwrap_err();
        match err {
            Error::Config { line, msg } => {
                assert_eq!(line, Some(3), "{msg}");
                assert!(msg.contains("taus"), "{msg}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn nondecreasing_ratio_is_rejected() {
        let text = "model.kind = \"play\"\nsweep.tau = [0.01, 0.01]\nsweep.eps = [0.1, 0.1]\n";
        match parse_config_str(text).unwrap_err() {
            Error::Config { line, msg } => {
                assert_eq!(line, Some(2));
                assert!(msg.contains("regime violation"), "{msg}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn table_form_and_missing_kind() {
        let c = parse_config_str("[model]\nkind = \"double-well-chain\"\nviscosity = \"gradient\"\n").unwrap();
        assert_eq!(c.model.n, 64);
        assert_eq!(c.model.viscosity, ViscosityKind::Gradient);
        assert!(matches!(parse_config_str("scheme.tau = 0.1\n"), Err(Error::Config { .. })));
        assert!(matches!(
            parse_config_str("model.kind = \"play\"\nmodel.rho = -1\n"),
            Err(Error::Config { line: Some(2), .. })
        ));
    }
}
