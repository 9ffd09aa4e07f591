//! Closed-form solutions used as references for the simulator.

use std::f64::consts::SQRT_2;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::forces::{mean_dynamics, ForceModel, Variant};

/// Names of the reference solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleCase {
    /// Uniform mass on `(-1/2, 1/2)` converging with unit speed under
    /// repulsion (`X0 = m - 1/2`, `V0 = -sgn(m - 1/2)`, `alpha = -2`).
    Bgsw,
    TwoParticle,
    ConfinedLinear,
    DiracRiemann,
    SteadyState,
}

impl OracleCase {
    pub const ALL: [OracleCase; 5] = [
        OracleCase::Bgsw,
        OracleCase::TwoParticle,
        OracleCase::ConfinedLinear,
        OracleCase::DiracRiemann,
        OracleCase::SteadyState,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            OracleCase::Bgsw => "bgsw",
            OracleCase::TwoParticle => "two_particle",
            OracleCase::ConfinedLinear => "confined_linear",
            OracleCase::DiracRiemann => "dirac_riemann",
            OracleCase::SteadyState => "steady_state",
        }
    }
}

impl FromStr for OracleCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown oracle case {s:?}")))
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Sign with `sgn+(0) = 1`.
fn sgn_plus(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite and nonnegative, got {t}")));
    }
    Ok(())
}

fn check_mass(m: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::MassOutOfRange(m));
    }
    Ok(())
}

/// Initial data of the symmetric repulsive example.
pub fn bgsw_initial(m: f64) -> (f64, f64) {
    (m - 0.5, -sgn(m - 0.5))
}

/// Sticky position `X(t, m)` of the symmetric repulsive example.
pub fn bgsw_x(t: f64, m: f64) -> Result<f64> {
    check_time(t)?;
    check_mass(m)?;
    let y = m - 0.5;
    let a = y.abs();
    if t == 0.0 {
        return Ok(y);
    }
    let inner = (t / (1.0 + t * t)).min(0.5 / t);
    if a < inner {
        return Ok(0.0);
    }
    if t < 1.0 && a <= 0.5 {
        return Ok((1.0 + t * t) * y - t * sgn(y));
    }
    Ok(y * (t - 1.0 / (2.0 * a)).powi(2))
}

/// Sticky velocity `V(t, m)`.
pub fn bgsw_v(t: f64, m: f64) -> Result<f64> {
    Ok(if bgsw_x(t, m)? == 0.0 && (m - 0.5).abs() < 0.5 { 0.0 } else { bgsw_u(t, m)? })
}

/// Prescribed velocity `U(t, m) = -sgn(m - 1/2) + t (2m - 1)`.
pub fn bgsw_u(t: f64, m: f64) -> Result<f64> {
    check_time(t)?;
    check_mass(m)?;
    Ok(-sgn(m - 0.5) + t * (2.0 * m - 1.0))
}

/// Distribution function `M(t, x)` of the sticky solution.
pub fn bgsw_m(t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    let edge = 0.5 * (t - 1.0).powi(2);
    if t == 0.0 {
        return Ok((x + 0.5).clamp(0.0, 1.0));
    }
    if x.abs() > edge {
        return Ok(0.5 * (1.0 + sgn(x)));
    }
    let s = sgn_plus(x);
    if t < 1.0 {
        return Ok(0.5 + (x + t * s) / (1.0 + t * t));
    }
    let r = (x.abs().sqrt() + (2.0 * t + x.abs()).sqrt()) / (2.0 * t);
    Ok(0.5 + s * r * r)
}

/// Projected position `sgn(m - 1/2) max{(1 + t^2)|m - 1/2| - t, 0}`.
pub fn bgsw_projected(t: f64, m: f64) -> Result<f64> {
    check_time(t)?;
    check_mass(m)?;
    let y = m - 0.5;
    Ok(sgn(y) * ((1.0 + t * t) * y.abs() - t).max(0.0))
}

/// Distribution function of the projected solution.
pub fn bgsw_projected_m(t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    if x.abs() > 0.5 * (t - 1.0).powi(2) {
        return Ok(0.5 * (1.0 + sgn(x)));
    }
    Ok(0.5 + (x + t * sgn_plus(x)) / (1.0 + t * t))
}

/// `int_0^1 V(t, m)^2 dm`.
pub fn bgsw_kinetic_integral(t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(1.0);
    }
    let tail = (t - 1.0).powi(3);
    if t >= 1.0 {
        return Ok(tail / (3.0 * t));
    }
    Ok((tail - ((t * t - 1.0) / (1.0 + t * t)).powi(3)) / (3.0 * t))
}

/// `int int |X(t, m) - X(t, w)| dm dw`.
pub fn bgsw_interaction_integral(t: f64) -> Result<f64> {
    check_time(t)?;
    if t >= 1.0 {
        return Ok((t - 1.0).powi(3) / (3.0 * t));
    }
    let s = 1.0 + t * t;
    Ok(s / 3.0 - t + 4.0 * t.powi(3) / (3.0 * s * s))
}

/// Total energy `1/2 int V^2 - 1/2 int int |X - X|` with `alpha = -2`.
pub fn bgsw_energy(t: f64) -> Result<f64> {
    Ok(0.5 * bgsw_kinetic_integral(t)? - 0.5 * bgsw_interaction_integral(t)?)
}

/// State `[x1, x2, v1, v2]` of the two-particle example: masses 1/2, `x0 = (0, 1)`,
/// `v0 = (2, 0)`, `alpha = -2`. Collision at `2 - sqrt 2`, split at `2`.
pub fn two_particle(t: f64) -> Result<[f64; 4]> {
    check_time(t)?;
    let t_merge = 2.0 - SQRT_2;
    Ok(if t < t_merge {
        [2.0 * t - t * t / 4.0, 1.0 + t * t / 4.0, 2.0 - t / 2.0, t / 2.0]
    } else if t < 2.0 {
        [0.5 + t, 0.5 + t, 1.0, 1.0]
    } else {
        let s = t - 2.0;
        [0.5 + t - s * s / 4.0, 0.5 + t + s * s / 4.0, 1.0 - s / 2.0, 1.0 + s / 2.0]
    })
}

/// Projected solution of the two-particle example: pooled on
/// `[2 - sqrt 2, 2 + sqrt 2)`, free flight otherwise.
pub fn two_particle_projected(t: f64) -> Result<[f64; 4]> {
    check_time(t)?;
    Ok(if (2.0 - SQRT_2..2.0 + SQRT_2).contains(&t) {
        [0.5 + t, 0.5 + t, 1.0, 1.0]
    } else {
        [2.0 * t - t * t / 4.0, 1.0 + t * t / 4.0, 2.0 - t / 2.0, t / 2.0]
    })
}

/// Confined model with `X0 = m - 1/2`, `V0 = -(m - 1/2)`, whose free flight is
/// `Y(t, m) = (m - 1/2) c(t)` and concentrates at the origin if `c` turns
/// negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfinedLinear {
    pub lambda: f64,
    pub kappa: f64,
    pub sigma: f64,
}

impl ConfinedLinear {
    pub fn new(lambda: f64, kappa: f64) -> Result<Self> {
        if !(lambda > 0.0) || !(kappa >= 0.0) || kappa >= lambda || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!("need 0 <= kappa < lambda, got lambda={lambda}, kappa={kappa}")));
        }
        Ok(Self { lambda, kappa, sigma: (lambda * lambda - kappa * kappa).sqrt() })
    }

    pub fn model(&self) -> ForceModel {
        ForceModel::confined(self.lambda, self.kappa, 0.0).expect("validated parameters")
    }

    /// `c(t) = 2 - e^{-kappa t}(cos sigma t + (1 + kappa)/sigma sin sigma t)`.
    pub fn c(&self, t: f64) -> f64 {
        let st = self.sigma * t;
        2.0 - (-self.kappa * t).exp() * (st.cos() + (1.0 + self.kappa) / self.sigma * st.sin())
    }

    pub fn c_dot(&self, t: f64) -> f64 {
        let st = self.sigma * t;
        let l2 = self.lambda * self.lambda;
        (-self.kappa * t).exp() * (-st.cos() + (self.kappa + l2) / self.sigma * st.sin())
    }

    /// First minimum of `c`.
    pub fn tau_star(&self) -> f64 {
        (self.sigma / (self.kappa + self.lambda * self.lambda)).atan() / self.sigma
    }

    pub fn concentrates(&self) -> bool {
        self.c(self.tau_star()) < 0.0
    }

    /// First zero of `c`, when every particle reaches the origin.
    pub fn tau0(&self) -> Option<f64> {
        if !self.concentrates() {
            return None;
        }
        if self.kappa == 0.0 {
            let l = self.lambda;
            let l2 = l * l;
            return Some((l * (2.0 - (1.0 - 3.0 * l2).sqrt()) / (1.0 + l2)).asin() / l);
        }
        let (mut lo, mut hi) = (0.0, self.tau_star());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.c(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Release of the concentrated mass: the inward velocity `-c'(tau0) / 2`
    /// of the outermost mass is spent against the confinement.
    pub fn tau1(&self) -> Option<f64> {
        let t0 = self.tau0()?;
        let d = -self.c_dot(t0);
        let l2 = self.lambda * self.lambda;
        let gamma = 2.0 * self.kappa;
        let s = if gamma == 0.0 { d / (2.0 * l2) } else { (gamma * d / (2.0 * l2)).ln_1p() / gamma };
        Some(t0 + s)
    }

    /// Sticky position `X(t, m)`.
    pub fn x(&self, t: f64, m: f64) -> Result<f64> {
        check_time(t)?;
        check_mass(m)?;
        let y = m - 0.5;
        match (self.tau0(), self.tau1()) {
            (Some(t0), Some(t1)) if t >= t0 => {
                if t < t1 {
                    return Ok(0.0);
                }
                let s = t - t1;
                let ss = self.sigma * s;
                let e = (-self.kappa * s).exp();
                Ok(2.0 * y * (1.0 - e * (ss.cos() + self.kappa / self.sigma * ss.sin())))
            }
            _ => Ok(y * self.c(t)),
        }
    }
}

/// Long-time limit of the confined model with damping: positions settle at
/// `2m - 1 + xbar_inf` with `xbar_inf = xbar0 + vbar0 / gamma`. A uniform
/// force `beta` makes the mean drift forever, so it is rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub xbar_inf: f64,
}

pub fn steady_state(model: &ForceModel, xbar0: f64, vbar0: f64) -> Result<SteadyState> {
    if model.variant() != Variant::ConfinedRepulsive {
        return Err(Error::Unsupported("steady states are defined for the confined model".into()));
    }
    if model.gamma() <= 0.0 {
        return Err(Error::InvalidInput("no steady state without damping".into()));
    }
    if model.beta() != 0.0 {
        return Err(Error::InvalidInput("no steady state under a uniform force".into()));
    }
    Ok(SteadyState { xbar_inf: xbar0 + vbar0 / model.gamma() })
}

impl SteadyState {
    pub fn continuum(&self, m: f64) -> Result<f64> {
        check_mass(m)?;
        Ok(2.0 * m - 1.0 + self.xbar_inf)
    }

    /// Member positions `theta_{j-1} + theta_j - 1 + xbar_inf`.
    pub fn discrete(&self, theta: &[f64]) -> Vec<f64> {
        theta.windows(2).map(|w| w[0] + w[1] - 1.0 + self.xbar_inf).collect()
    }

    /// Distance of the mean from its limit, for checking with `mean_dynamics`.
    pub fn mean_offset(&self, model: &ForceModel, xbar0: f64, vbar0: f64, t: f64) -> f64 {
        mean_dynamics(model, xbar0, vbar0, t).0 - self.xbar_inf
    }
}

/// `M(t, x)` for a Dirac mass on `[m_left, m_right]` at the origin with
/// velocity `v0` under Euler-Poisson forces with `beta = 0`.
pub fn dirac_riemann(alpha: f64, m_left: f64, m_right: f64, v0: f64, t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    check_mass(m_left)?;
    check_mass(m_right)?;
    if m_left > m_right {
        return Err(Error::InvalidInput("m_left must not exceed m_right".into()));
    }
    if t == 0.0 {
        return Ok(if x < 0.0 { m_left } else { m_right });
    }
    if alpha >= 0.0 {
        let shock = v0 * t - 0.25 * alpha * t * t * (m_left + m_right - 1.0);
        return Ok(if x < shock { m_left } else { m_right });
    }
    let edge = |m: f64| v0 * t - 0.25 * t * t * alpha * (2.0 * m - 1.0);
    if x < edge(m_left) {
        Ok(m_left)
    } else if x >= edge(m_right) {
        Ok(m_right)
    } else {
        Ok(0.5 - (x - v0 * t) / (0.5 * alpha * t * t))
    }
}
