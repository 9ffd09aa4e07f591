//! The conservation-law view: the distribution function `M(t, x)` solves
//! `dM/dt + d/dx U(t, M) = 0`, and its jumps are the particle blocks.
//!
//! A block spanning mass coordinates `[M_l, M_r]` is a shock. It must move
//! with the Rankine-Hugoniot speed `(U(M_r) - U(M_l)) / (M_r - M_l)` and
//! satisfy the Oleinik chord condition, which for piecewise-linear fluxes
//! only needs checking at member breakpoints.

use std::io::{self, Write};

use crate::dynamics::Snapshot;
use crate::error::{Error, Result};
use crate::forces::{Density, FluxFunction, ForceModel, Variant};
use crate::tol::VALIDATION_TOL;

/// A jump of `M` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Front {
    pub x: f64,
    pub m_left: f64,
    pub m_right: f64,
    pub speed: f64,
    /// Member breakpoints strictly between `m_left` and `m_right`.
    pub interior: Vec<f64>,
}

/// One front per block, with the block velocity as front speed.
pub fn fronts_from_snapshot(snap: &Snapshot) -> Vec<Front> {
    let theta = snap.theta();
    snap.blocks
        .iter()
        .enumerate()
        .map(|(b, r)| Front {
            x: snap.x[b],
            m_left: theta[r.start],
            m_right: theta[r.end],
            speed: snap.v[b],
            interior: theta[r.start + 1..r.end].to_vec(),
        })
        .collect()
}

/// Front positions over time.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontTrajectory {
    pub samples: Vec<(f64, Vec<Front>)>,
}

impl FrontTrajectory {
    pub fn from_snapshots<'a>(snaps: impl IntoIterator<Item = &'a Snapshot>) -> Self {
        Self { samples: snaps.into_iter().map(|s| (s.t, fronts_from_snapshot(s))).collect() }
    }
}

/// Speeds from positions sampled at `times`: centred differences inside,
/// one-sided at the ends.
pub fn finite_difference_speeds(times: &[f64], positions: &[f64]) -> Result<Vec<f64>> {
    let n = times.len();
    if n < 2 || positions.len() != n {
        return Err(Error::InvalidInput("need at least two samples of equal length".into()));
    }
    Ok((0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            (positions[b] - positions[a]) / (times[b] - times[a])
        })
        .collect())
}

/// Value of the chain rule for `F(M)` across a jump `[m_left, m_right]`:
/// the difference quotient of the primitive, or `f(m)` at a continuity point.
pub fn volpert_average(f: &Density, m_left: f64, m_right: f64) -> Result<f64> {
    check_jump(m_left, m_right)?;
    if m_left == m_right {
        return Ok(f.eval(m_left));
    }
    Ok((f.primitive(m_right) - f.primitive(m_left)) / (m_right - m_left))
}

/// `int_0^1 f((1 - s) m_left + s m_right) ds` by the composite midpoint rule.
pub fn volpert_average_quadrature(f: &Density, m_left: f64, m_right: f64, n: usize) -> Result<f64> {
    check_jump(m_left, m_right)?;
    let n = n.max(1);
    Ok((0..n)
        .map(|i| {
            let s = (i as f64 + 0.5) / n as f64;
            f.eval((1.0 - s) * m_left + s * m_right)
        })
        .sum::<f64>()
        / n as f64)
}

fn check_jump(m_left: f64, m_right: f64) -> Result<()> {
    for m in [m_left, m_right] {
        if !(0.0..=1.0).contains(&m) {
            return Err(Error::MassOutOfRange(m));
        }
    }
    if m_left > m_right {
        return Err(Error::InvalidInput(format!("inverted jump ({m_left}, {m_right})")));
    }
    Ok(())
}

/// Rankine-Hugoniot speed of a jump from `m_left` to `m_right`.
pub fn rh_speed(flux: &FluxFunction, t: f64, m_left: f64, m_right: f64) -> Result<f64> {
    check_jump(m_left, m_right)?;
    if m_left == m_right {
        return Err(Error::InvalidInput("zero jump has no Rankine-Hugoniot speed".into()));
    }
    Ok((flux.eval(t, m_right)? - flux.eval(t, m_left)?) / (m_right - m_left))
}

/// Smallest gap in the Oleinik chord inequalities
/// `(U(M_r) - U(k)) / (M_r - k) <= speed <= (U(k) - U(M_l)) / (k - M_l)`
/// over the interior breakpoints `k`; `+inf` without interior breakpoints.
pub fn oleinik_margin_flux(flux: &FluxFunction, t: f64, front: &Front) -> Result<f64> {
    let ul = flux.eval(t, front.m_left)?;
    let ur = flux.eval(t, front.m_right)?;
    let mut margin = f64::INFINITY;
    for &k in &front.interior {
        let uk = flux.eval(t, k)?;
        let left_chord = (uk - ul) / (k - front.m_left);
        let right_chord = (ur - uk) / (front.m_right - k);
        margin = margin.min(left_chord - front.speed).min(front.speed - right_chord);
    }
    Ok(margin)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontCheck {
    pub t: f64,
    pub front_index: usize,
    pub x: f64,
    pub m_left: f64,
    pub m_right: f64,
    pub speed: f64,
    pub rh_residual: f64,
    pub oleinik_margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub rows: Vec<FrontCheck>,
}

pub const VALIDATION_HEADER: &str = "time,front_index,x,M_left,M_right,speed,rh_residual,oleinik_margin,pass";

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &FrontCheck> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn max_rh_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.rh_residual).fold(0.0, f64::max)
    }

    pub fn min_oleinik_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.oleinik_margin).fold(f64::INFINITY, f64::min)
    }

    /// CSV rows without header; floats in 17 significant digits.
    pub fn write_rows<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.rows {
            writeln!(
                w,
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.t, r.front_index, r.x, r.m_left, r.m_right, r.speed, r.rh_residual, r.oleinik_margin, r.pass
            )?;
        }
        Ok(())
    }
}

/// Checks every front of every sample against the flux returned for that
/// sample time.
pub fn validate_entropy<F>(trajectory: &FrontTrajectory, flux_at: F) -> Result<ValidationReport>
where
    F: Fn(f64) -> Result<FluxFunction>,
{
    let mut rows = Vec::new();
    for (t, fronts) in &trajectory.samples {
        let flux = flux_at(*t)?;
        for (i, f) in fronts.iter().enumerate() {
            let rh_residual = if f.m_right > f.m_left {
                (f.speed - rh_speed(&flux, *t, f.m_left, f.m_right)?).abs()
            } else {
                0.0
            };
            let oleinik_margin = oleinik_margin_flux(&flux, *t, f)?;
            rows.push(FrontCheck {
                t: *t,
                front_index: i,
                x: f.x,
                m_left: f.m_left,
                m_right: f.m_right,
                speed: f.speed,
                rh_residual,
                oleinik_margin,
                pass: rh_residual <= VALIDATION_TOL && oleinik_margin >= -VALIDATION_TOL,
            });
        }
    }
    Ok(ValidationReport { rows })
}

/// Validation of simulator samples. Euler-Poisson and damped runs use the
/// flux built from the initial data alone; confined runs use the flux of the
/// prescribed velocities carried by each sample, since that flux depends on
/// the position history.
pub fn validate_run<'a>(
    model: &ForceModel,
    masses: &[f64],
    x0: &[f64],
    v0: &[f64],
    snaps: impl IntoIterator<Item = &'a Snapshot>,
) -> Result<ValidationReport> {
    let snaps: Vec<&Snapshot> = snaps.into_iter().collect();
    let trajectory = FrontTrajectory::from_snapshots(snaps.iter().copied());
    let prescribed: Vec<Vec<f64>> = snaps.iter().map(|s| s.u.clone()).collect();
    validate_trajectory(model, masses, x0, v0, &trajectory, &prescribed)
}

/// Same as [`validate_run`] for fronts recorded elsewhere. `prescribed` holds
/// the member prescribed velocities of each sample and is only read for the
/// confined model.
pub fn validate_trajectory(
    model: &ForceModel,
    masses: &[f64],
    x0: &[f64],
    v0: &[f64],
    trajectory: &FrontTrajectory,
    prescribed: &[Vec<f64>],
) -> Result<ValidationReport> {
    if model.variant() != Variant::ConfinedRepulsive {
        let flux = FluxFunction::discrete(model, masses, x0, v0)?;
        return validate_entropy(trajectory, |_| Ok(flux.clone()));
    }
    if prescribed.len() != trajectory.samples.len() {
        return Err(Error::InvalidInput(format!(
            "{} samples of prescribed velocities for {} front samples",
            prescribed.len(),
            trajectory.samples.len()
        )));
    }
    let mut rows = Vec::new();
    for ((t, fronts), u) in trajectory.samples.iter().zip(prescribed) {
        let flux = FluxFunction::snapshot(masses, u)?;
        let single = FrontTrajectory { samples: vec![(*t, fronts.clone())] };
        rows.append(&mut validate_entropy(&single, |_| Ok(flux.clone()))?.rows);
    }
    Ok(ValidationReport { rows })
}

/// Solution of the Riemann problem for a single mass `m_right - m_left`
/// initially at the origin with velocity `v0`.
#[derive(Debug, Clone, PartialEq)]
pub enum RiemannWave {
    /// The mass moves as one particle.
    Shock { flux: FluxFunction, m_left: f64, m_right: f64 },
    /// The mass spreads into a fan.
    Rarefaction { flux: FluxFunction, m_left: f64, m_right: f64 },
}

/// Entropy solution for Euler-Poisson data with an atom on `[m_left, m_right]`.
/// Concave flux on the atom gives a shock, convex a rarefaction fan.
pub fn riemann_solve(model: &ForceModel, m_left: f64, m_right: f64, v0: f64) -> Result<RiemannWave> {
    if model.variant() != Variant::EulerPoisson {
        return Err(Error::Unsupported("Riemann solutions are provided for Euler-Poisson only".into()));
    }
    check_jump(m_left, m_right)?;
    if m_left == m_right {
        return Err(Error::InvalidInput("Riemann data need a jump".into()));
    }
    let flux = FluxFunction::euler_poisson(model, Density::constant(v0))?;
    Ok(if model.alpha() >= 0.0 {
        RiemannWave::Shock { flux, m_left, m_right }
    } else {
        RiemannWave::Rarefaction { flux, m_left, m_right }
    })
}

impl RiemannWave {
    /// Position of the mass coordinate `m`; for a shock, of the whole atom.
    /// The slope of an Euler-Poisson flux is affine in time, so its time
    /// integral is exact at the midpoint.
    pub fn position(&self, t: f64, m: f64) -> Result<f64> {
        match self {
            RiemannWave::Shock { flux, m_left, m_right } => Ok(t * rh_speed(flux, 0.5 * t, *m_left, *m_right)?),
            RiemannWave::Rarefaction { flux, .. } => Ok(t * flux.slope(0.5 * t, m)?),
        }
    }

    /// `M(t, x)` restricted to the atom's mass range.
    pub fn distribution(&self, t: f64, x: f64) -> Result<f64> {
        match self {
            RiemannWave::Shock { m_left, m_right, .. } => {
                Ok(if x < self.position(t, *m_left)? { *m_left } else { *m_right })
            }
            RiemannWave::Rarefaction { m_left, m_right, .. } => {
                let (mut lo, mut hi) = (*m_left, *m_right);
                if t == 0.0 || x < self.position(t, lo)? {
                    return Ok(if t == 0.0 && x >= 0.0 { hi } else { lo });
                }
                if x >= self.position(t, hi)? {
                    return Ok(hi);
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.position(t, mid)? <= x {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 {
                        break;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }
}
