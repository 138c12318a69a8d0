//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::closures::{ClosureKind, NewtonParams};
use crate::error::{Error, Result};
use crate::kernels::{
    AggregationConfig, AggregationRate, BreakageConfig, BreakageFrequency, CtAggregation,
    CtBreakage, KernelSet, Scales, VolumeDomain,
};
use crate::quadrature::{gauss_lobatto, QuadratureRule};
use crate::spatial::Grid2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Breakage,
    Aggregation,
    Cavity,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Breakage => "breakage",
            ExperimentKind::Aggregation => "aggregation",
            ExperimentKind::Cavity => "cavity",
        }
    }

    fn breakage(self) -> bool {
        self != ExperimentKind::Aggregation
    }

    fn aggregation(self) -> bool {
        self != ExperimentKind::Breakage
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "breakage" => Ok(ExperimentKind::Breakage),
            "aggregation" => Ok(ExperimentKind::Aggregation),
            "cavity" => Ok(ExperimentKind::Cavity),
            other => Err(Error::Config(format!("unknown experiment '{other}'"))),
        }
    }
}

/// A moment closure or the sectional reference scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pn,
    Mn,
    Qmom,
    Fvs,
}

impl Method {
    pub fn closure(self) -> Option<ClosureKind> {
        match self {
            Method::Pn => Some(ClosureKind::Pn),
            Method::Mn => Some(ClosureKind::Mn),
            Method::Qmom => Some(ClosureKind::Qmom),
            Method::Fvs => None,
        }
    }
}

impl From<ClosureKind> for Method {
    fn from(kind: ClosureKind) -> Self {
        match kind {
            ClosureKind::Pn => Method::Pn,
            ClosureKind::Mn => Method::Mn,
            ClosureKind::Qmom => Method::Qmom,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.closure() {
            Some(kind) => kind.fmt(f),
            None => f.write_str("fvs"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("fvs") {
            Ok(Method::Fvs)
        } else {
            s.parse::<ClosureKind>().map(Method::from)
        }
    }
}

/// Resolution presets: `desk` for quick runs, `paper` for the full-size ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Paper,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(format!("unknown profile '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    /// Lobatto points of the volume quadrature.
    pub n_q: usize,
    /// Sectional cells.
    pub n_v: usize,
    /// Output interval and largest step (s).
    pub dt: f64,
    /// Final time (s).
    pub t_end: f64,
    /// Fraction of each stability bound actually used.
    pub safety: f64,
    /// Run the quadrature realizability test on every M_N cell after each step.
    #[serde(default)]
    pub check_realizability: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialConfig {
    pub nx: usize,
    pub ny: usize,
    /// Diffusion coefficient (m²/s).
    pub diffusion: f64,
    pub reynolds: f64,
    /// Lid speed (m/s).
    #[serde(default = "one")]
    pub lid_speed: f64,
    /// Center and width of the spatial Gaussian.
    pub center: [f64; 2],
    pub width: f64,
    /// Apply breakage and aggregation; off gives a transport-only run.
    #[serde(default = "yes")]
    pub reactions: bool,
    /// Optional velocity files `(u, z)` replacing the cavity solve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_files: Option<[PathBuf; 2]>,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeConfig {
    /// Smallest and largest droplet volume (m³).
    pub v_min: f64,
    pub v_max: f64,
}

/// Gaussian initial volume distribution. Unset values are derived from
/// `alpha0` and the volume domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// Dispersed volume fraction.
    pub alpha0: f64,
    /// `sigma_init / (v_max - v_min)` when `sigma_init` is unset.
    pub sigma_fraction: f64,
    /// Total number concentration (1/m³).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<f64>,
    /// Mean volume (m³).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    /// Standard deviation (m³).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_init: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreakageBlock {
    pub max_fragments: u32,
    pub shape: u32,
    pub c1: f64,
    pub c2: f64,
    pub alpha_d: f64,
    /// Turbulent dissipation rate (m²/s³).
    pub epsilon: f64,
    /// Dispersed phase density (kg/m³).
    pub rho_d: f64,
    /// Surface tension (N/m).
    pub sigma: f64,
    /// Multiplies the frequency; 0 switches breakage off.
    #[serde(default = "one")]
    pub rate_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregationBlock {
    pub c_omega: f64,
    pub k_omega: f64,
    pub alpha_d: f64,
    pub epsilon: f64,
    /// Continuous phase density (kg/m³).
    pub rho_c: f64,
    pub sigma: f64,
    /// Continuous phase viscosity (Pa s).
    pub eta_c: f64,
    #[serde(default = "one")]
    pub rate_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Times at which cavity snapshots are written; the final state always is.
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub closure: Method,
    pub order: usize,
    pub numerics: Numerics,
    pub volume: VolumeConfig,
    pub initial: InitialConfig,
    pub breakage: BreakageBlock,
    pub aggregation: AggregationBlock,
    pub newton: NewtonParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial: Option<SpatialConfig>,
    pub output: OutputConfig,
}

/// Initial-condition parameters with the derived values filled in (SI).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialParameters {
    pub n0: f64,
    pub v0: f64,
    pub sigma: f64,
}

impl ExperimentConfig {
    /// Default parameter set of an experiment at the given resolution.
    pub fn preset(kind: ExperimentKind, profile: Profile) -> Self {
        let alpha0 = 0.01;
        let mut config = Self {
            kind,
            closure: Method::Mn,
            order: 3,
            numerics: Numerics {
                n_q: 40,
                n_v: 500,
                dt: 0.01,
                t_end: 1.0,
                safety: 0.9,
                check_realizability: false,
            },
            volume: VolumeConfig {
                v_min: std::f64::consts::FRAC_PI_6 * 1e-9,
                v_max: std::f64::consts::FRAC_PI_6 * 0.009f64.powi(3),
            },
            initial: InitialConfig {
                alpha0,
                sigma_fraction: 0.1,
                n0: None,
                v0: None,
                sigma_init: None,
            },
            breakage: BreakageBlock {
                max_fragments: 2,
                shape: 2,
                c1: 0.12,
                c2: 0.078,
                alpha_d: alpha0,
                epsilon: 0.004,
                rho_d: 865.6,
                sigma: 0.0361,
                rate_scale: 1.0,
            },
            aggregation: AggregationBlock {
                c_omega: 41.2,
                k_omega: 1.33e10,
                alpha_d: alpha0,
                epsilon: 0.004,
                rho_c: 1000.0,
                sigma: 0.0361,
                eta_c: 0.001,
                rate_scale: 1.0,
            },
            newton: NewtonParams::default(),
            spatial: (kind == ExperimentKind::Cavity).then(|| SpatialConfig {
                nx: 20,
                ny: 20,
                diffusion: 0.001,
                reynolds: 5.0,
                lid_speed: 1.0,
                center: [0.3, 0.3],
                width: 0.08,
                reactions: true,
                velocity_files: None,
            }),
            output: OutputConfig {
                dir: PathBuf::from("out").join(kind.name()),
                snapshots: Vec::new(),
            },
        };
        config.apply_profile(profile);
        config
    }

    /// Overwrites the resolution-related settings with a profile's values.
    pub fn apply_profile(&mut self, profile: Profile) {
        let n = &mut self.numerics;
        match profile {
            Profile::Desk => {
                n.n_q = 40;
                n.n_v = 500;
                n.t_end = 1.0;
                if let Some(s) = &mut self.spatial {
                    s.nx = 20;
                    s.ny = 20;
                }
            }
            Profile::Paper => {
                n.n_q = 100;
                n.n_v = if self.kind == ExperimentKind::Cavity { 2000 } else { 5000 };
                n.t_end = if self.kind == ExperimentKind::Cavity { 5.0 } else { 4.0 };
                if let Some(s) = &mut self.spatial {
                    s.nx = 50;
                    s.ny = 50;
                }
            }
        }
        n.dt = 0.01;
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        let n = &self.numerics;
        if !(n.dt > 0.0 && n.t_end > 0.0 && n.dt.is_finite() && n.t_end.is_finite()) {
            return bad("dt and t_end must be positive");
        }
        if !(n.safety > 0.0 && n.safety <= 1.0) {
            return bad("safety must lie in (0, 1]");
        }
        if n.n_q < 2 {
            return bad("n_q must be at least 2");
        }
        if self.closure == Method::Fvs && n.n_v < 2 {
            return bad("n_v must be at least 2");
        }
        if self.closure == Method::Mn && n.n_q < self.order + 1 {
            return bad("M_N needs n_q >= N + 1");
        }
        if self.closure == Method::Qmom && self.order == 0 {
            return bad("QMOM needs N >= 1");
        }
        if !(self.breakage.rate_scale >= 0.0 && self.aggregation.rate_scale >= 0.0) {
            return bad("rate scales must be nonnegative");
        }
        let init = &self.initial;
        let positive = [Some(init.alpha0), Some(init.sigma_fraction), init.n0, init.v0, init.sigma_init];
        if positive.iter().flatten().any(|&x| !(x > 0.0 && x.is_finite())) {
            return bad("initial-condition parameters must be positive");
        }
        self.newton.validate()?;
        VolumeDomain::new(self.volume.v_min, self.volume.v_max)
            .map_err(|e| Error::Config(e.to_string()))?;
        match (&self.spatial, self.kind) {
            (None, ExperimentKind::Cavity) => return bad("cavity runs need a [spatial] block"),
            (Some(s), _) => {
                if s.nx == 0 || s.ny == 0 {
                    return bad("grid must have cells");
                }
                if !(s.diffusion >= 0.0 && s.reynolds > 0.0 && s.width > 0.0) {
                    return bad("need diffusion >= 0, reynolds > 0, width > 0");
                }
                if !s.lid_speed.is_finite() {
                    return bad("lid speed must be finite");
                }
            }
            _ => {}
        }
        self.kernels().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn initial_parameters(&self) -> InitialParameters {
        let (lo, hi) = (self.volume.v_min, self.volume.v_max);
        let d0 = (3.0 / std::f64::consts::PI * (lo + hi)).cbrt();
        let n0 = 6.0 * self.initial.alpha0 / (std::f64::consts::PI * d0.powi(3));
        InitialParameters {
            n0: self.initial.n0.unwrap_or(n0),
            v0: self.initial.v0.unwrap_or(std::f64::consts::FRAC_PI_6 * d0.powi(3)),
            sigma: self
                .initial
                .sigma_init
                .unwrap_or(self.initial.sigma_fraction * (hi - lo)),
        }
    }

    /// Solver units: volumes relative to `v_max`, numbers relative to `N0`.
    pub fn scales(&self) -> Scales {
        Scales {
            volume: self.volume.v_max,
            number: self.initial_parameters().n0,
        }
    }

    /// Kernels of this experiment in solver units.
    pub fn kernels(&self) -> Result<KernelSet> {
        let b = &self.breakage;
        let frequency = if self.kind.breakage() && b.rate_scale > 0.0 {
            BreakageFrequency::CoulaloglouTavlarides(CtBreakage {
                c1: b.c1 * b.rate_scale,
                c2: b.c2,
                alpha_d: b.alpha_d,
                epsilon: b.epsilon,
                rho_d: b.rho_d,
                sigma: b.sigma,
            })
        } else {
            BreakageFrequency::Zero
        };
        let a = &self.aggregation;
        let rate = if self.kind.aggregation() && a.rate_scale > 0.0 {
            AggregationRate::CoulaloglouTavlarides(CtAggregation {
                c_omega: a.c_omega * a.rate_scale,
                k_omega: a.k_omega,
                alpha_d: a.alpha_d,
                epsilon: a.epsilon,
                rho_c: a.rho_c,
                sigma: a.sigma,
                eta_c: a.eta_c,
            })
        } else {
            AggregationRate::Zero
        };
        let scales = self.scales();
        let domain = VolumeDomain::new(self.volume.v_min / scales.volume, 1.0)?;
        KernelSet::new(
            domain,
            BreakageConfig {
                max_fragments: b.max_fragments,
                shape: b.shape,
                frequency,
            },
            AggregationConfig { rate },
        )?
        .with_scales(scales)
    }

    pub fn rule(&self) -> Result<QuadratureRule> {
        let domain = self.kernels()?.domain;
        gauss_lobatto(self.numerics.n_q, domain.interval())
    }

    pub fn grid(&self) -> Result<Option<Grid2D>> {
        self.spatial
            .as_ref()
            .map(|s| Grid2D::new(s.nx, s.ny, (0.0, 1.0), (0.0, 1.0)))
            .transpose()
    }

    /// Number of output intervals, `T / Δt` rounded up.
    pub fn output_steps(&self) -> usize {
        let n = self.numerics.t_end / self.numerics.dt;
        (n - 1e-9).ceil().max(1.0) as usize
    }
}
