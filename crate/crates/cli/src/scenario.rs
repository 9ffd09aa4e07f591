//! Scenario files: TOML with `[force]`, `[initial]`, `[run]` and `[output]`
//! sections.

use std::collections::BTreeSet;
use std::fmt;

use anyhow::{Context, Result};
use serde::Deserialize;
use stickyflow::forces::{ForceModel, Variant};
use stickyflow::measures::{quantile_discretize, Particles};
use stickyflow::oracles::OracleCase;

pub const BUNDLED: [(&str, &str); 6] = [
    ("two_particle", include_str!("../scenarios/two_particle.cfg")),
    ("bgsw_n256", include_str!("../scenarios/bgsw_n256.cfg")),
    ("confined_linear", include_str!("../scenarios/confined_linear.cfg")),
    ("four_particle", include_str!("../scenarios/four_particle.cfg")),
    ("shock_atom", include_str!("../scenarios/shock_atom.cfg")),
    ("steady_state", include_str!("../scenarios/steady_state.cfg")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Entropic,
    Projected,
    Both,
}

impl Mode {
    pub fn entropic(self) -> bool {
        self != Mode::Projected
    }

    pub fn projected(self) -> bool {
        self != Mode::Entropic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFile {
    Trajectories,
    Events,
    Fronts,
    Diagnostics,
    Validation,
}

impl OutputFile {
    pub const ALL: [OutputFile; 5] =
        [OutputFile::Trajectories, OutputFile::Events, OutputFile::Fronts, OutputFile::Diagnostics, OutputFile::Validation];

    pub fn file_name(self) -> &'static str {
        match self {
            OutputFile::Trajectories => "trajectories.csv",
            OutputFile::Events => "events.csv",
            OutputFile::Fronts => "fronts.csv",
            OutputFile::Diagnostics => "diagnostics.csv",
            OutputFile::Validation => "validation.csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `X0 = m - 1/2` at rest.
    UniformSym,
    /// `X0 = m - 1/2`, `V0 = -sgn(m - 1/2)`.
    Bgsw,
    /// `X0 = m - 1/2`, `V0 = -(m - 1/2)`.
    LinearV,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    force: RawForce,
    initial: RawInitial,
    run: RawRun,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForce {
    model: String,
    alpha: Option<f64>,
    #[serde(default)]
    beta: f64,
    gamma: Option<f64>,
    lambda: Option<f64>,
    kappa: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    profile: Option<Profile>,
    n: Option<usize>,
    masses: Option<Vec<f64>>,
    positions: Option<Vec<f64>>,
    velocities: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    t_end: f64,
    samples: Option<usize>,
    sample_times: Option<Vec<f64>>,
    #[serde(default = "default_mode")]
    mode: Mode,
}

fn default_mode() -> Mode {
    Mode::Entropic
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    oracle: Option<String>,
    files: Option<Vec<OutputFile>>,
}

/// Initial data as declared, kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Explicit,
    Profile { profile: Profile, n: usize },
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: ForceModel,
    pub initial: InitialSpec,
    pub particles: Particles,
    pub t_end: f64,
    pub sample_times: Vec<f64>,
    pub mode: Mode,
    pub oracle: Option<OracleCase>,
    pub files: BTreeSet<OutputFile>,
}

/// A scenario error tied to one field.
#[derive(Debug)]
pub struct FieldError {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for FieldError {}

fn field_err<T>(field: &'static str, message: impl Into<String>) -> Result<T> {
    Err(FieldError { field, message: message.into() }.into())
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text)?;
        let model = build_model(&raw.force)?;
        let (initial, particles) = build_initial(&raw.initial)?;
        let t_end = raw.run.t_end;
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return field_err("[run] t_end", format!("must be finite and nonnegative, got {t_end}"));
        }
        let sample_times = match (raw.run.samples, raw.run.sample_times) {
            (Some(_), Some(_)) => return field_err("[run] samples", "give either samples or sample_times, not both"),
            (None, None) => return field_err("[run] samples", "missing; give samples or sample_times"),
            (Some(0), None) => return field_err("[run] samples", "need at least one sample"),
            (Some(1), None) => vec![t_end],
            (Some(k), None) => (0..k).map(|i| if i + 1 == k { t_end } else { t_end * i as f64 / (k - 1) as f64 }).collect(),
            (None, Some(list)) => {
                if list.iter().any(|t| !(0.0..=t_end).contains(t)) {
                    return field_err("[run] sample_times", "every sample time must lie in [0, t_end]");
                }
                if list.windows(2).any(|w| w[1] < w[0]) {
                    return field_err("[run] sample_times", "must be nondecreasing");
                }
                list
            }
        };
        let oracle = match raw.output.oracle.as_deref() {
            None | Some("none") => None,
            Some(name) => match name.parse::<OracleCase>() {
                Ok(OracleCase::DiracRiemann) => {
                    return field_err("[output] oracle", "dirac_riemann has no scenario comparison; use the library")
                }
                Ok(case) => Some(case),
                Err(e) => return field_err("[output] oracle", e.to_string()),
            },
        };
        let scenario = Scenario {
            model,
            initial,
            particles,
            t_end,
            sample_times,
            mode: raw.run.mode,
            oracle,
            files: raw.output.files.map_or_else(|| OutputFile::ALL.into_iter().collect(), |f| f.into_iter().collect()),
        };
        scenario.check_oracle()?;
        Ok(scenario)
    }

    /// Resolves a path or the name of a bundled scenario.
    pub fn load(name_or_path: &str) -> Result<Self> {
        let text = match std::fs::read_to_string(name_or_path) {
            Ok(text) => text,
            Err(e) => match bundled(name_or_path) {
                Some(text) => text.to_string(),
                None => return Err(e).with_context(|| format!("cannot read scenario {name_or_path}")),
            },
        };
        Self::parse(&text).with_context(|| format!("invalid scenario {name_or_path}"))
    }

    fn check_oracle(&self) -> Result<()> {
        let variant = self.model.variant();
        match self.oracle {
            Some(OracleCase::Bgsw) => {
                if !(variant == Variant::EulerPoisson && self.model.alpha() == -2.0 && self.model.beta() == 0.0) {
                    return field_err("[output] oracle", "bgsw needs euler_poisson with alpha = -2 and beta = 0");
                }
                if !matches!(self.initial, InitialSpec::Profile { profile: Profile::Bgsw, .. }) {
                    return field_err("[output] oracle", "bgsw needs profile = \"bgsw\"");
                }
            }
            Some(OracleCase::TwoParticle) => {
                let p = &self.particles;
                let expected = p.masses == [0.5, 0.5] && p.positions == [0.0, 1.0] && p.velocities == [2.0, 0.0];
                if !(variant == Variant::EulerPoisson && self.model.alpha() == -2.0 && self.model.beta() == 0.0 && expected) {
                    return field_err(
                        "[output] oracle",
                        "two_particle needs euler_poisson with alpha = -2, beta = 0, masses [0.5, 0.5], positions [0, 1], velocities [2, 0]",
                    );
                }
            }
            Some(OracleCase::ConfinedLinear) => {
                if variant != Variant::ConfinedRepulsive || self.model.beta() != 0.0 {
                    return field_err("[output] oracle", "confined_linear needs the confined model with beta = 0");
                }
                if !matches!(self.initial, InitialSpec::Profile { profile: Profile::LinearV, .. }) {
                    return field_err("[output] oracle", "confined_linear needs profile = \"linear_v\"");
                }
            }
            Some(OracleCase::SteadyState) => {
                if variant != Variant::ConfinedRepulsive || self.model.gamma() <= 0.0 || self.model.beta() != 0.0 {
                    return field_err("[output] oracle", "steady_state needs the confined model with kappa > 0 and beta = 0");
                }
            }
            Some(OracleCase::DiracRiemann) | None => {}
        }
        Ok(())
    }
}

pub fn bundled(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".cfg").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

fn require(value: Option<f64>, field: &'static str, model: &str) -> Result<f64> {
    match value {
        Some(v) => Ok(v),
        None => field_err(field, format!("required for model {model:?}")),
    }
}

fn reject(value: Option<f64>, field: &'static str, model: &str) -> Result<()> {
    match value {
        Some(_) => field_err(field, format!("not a parameter of model {model:?}")),
        None => Ok(()),
    }
}

fn build_model(f: &RawForce) -> Result<ForceModel> {
    let m = f.model.as_str();
    let model = match m {
        "euler_poisson" => {
            reject(f.gamma, "[force] gamma", m)?;
            reject(f.lambda, "[force] lambda", m)?;
            reject(f.kappa, "[force] kappa", m)?;
            ForceModel::euler_poisson(require(f.alpha, "[force] alpha", m)?, f.beta)
        }
        "damped" => {
            reject(f.lambda, "[force] lambda", m)?;
            reject(f.kappa, "[force] kappa", m)?;
            ForceModel::damped(require(f.alpha, "[force] alpha", m)?, f.beta, require(f.gamma, "[force] gamma", m)?)
        }
        "confined" => {
            reject(f.alpha, "[force] alpha", m)?;
            reject(f.gamma, "[force] gamma", m)?;
            ForceModel::confined(require(f.lambda, "[force] lambda", m)?, f.kappa.unwrap_or(0.0), f.beta)
        }
        _ => return field_err("[force] model", format!("expected euler_poisson, damped or confined, got {m:?}")),
    };
    model.map_err(|e| FieldError { field: "[force]", message: e.to_string() }.into())
}

fn build_initial(i: &RawInitial) -> Result<(InitialSpec, Particles)> {
    let explicit = i.masses.is_some() || i.positions.is_some() || i.velocities.is_some();
    match (i.profile, explicit) {
        (Some(_), true) => field_err("[initial] profile", "give either a profile or explicit particles, not both"),
        (None, false) => field_err("[initial]", "missing; give profile and n, or positions and velocities"),
        (Some(profile), false) => {
            let n = match i.n {
                Some(n) if n >= 1 => n,
                Some(_) => return field_err("[initial] n", "need at least one particle"),
                None => return field_err("[initial] n", "required with a profile"),
            };
            let v0: fn(f64) -> f64 = match profile {
                Profile::UniformSym => |_| 0.0,
                Profile::Bgsw => |m| stickyflow::oracles::bgsw_initial(m).1,
                Profile::LinearV => |m| -(m - 0.5),
            };
            let p = quantile_discretize(|m| m - 0.5, v0, n)?;
            Ok((InitialSpec::Profile { profile, n }, p))
        }
        (None, true) => {
            if i.n.is_some() {
                return field_err("[initial] n", "only used with a profile");
            }
            let Some(positions) = i.positions.clone() else {
                return field_err("[initial] positions", "required with explicit particles");
            };
            let Some(velocities) = i.velocities.clone() else {
                return field_err("[initial] velocities", "required with explicit particles");
            };
            if positions.is_empty() {
                return field_err("[initial] positions", "the particle list is empty");
            }
            let masses = i.masses.clone().unwrap_or_else(|| vec![1.0 / positions.len() as f64; positions.len()]);
            let p = Particles::new(masses, positions, velocities)
                .map_err(|e| FieldError { field: "[initial]", message: e.to_string() })?;
            Ok((InitialSpec::Explicit, p))
        }
    }
}
