//! Force models and their closed-form kernels.
//!
//! Every model is an instance of the member law
//!
//! ```text
//! du_j/dt = -gamma u_j + p c_j - q (x_b - xbar(t)) - beta,   c_j = theta_{j-1} + theta_j - 1,
//! ```
//!
//! where `x_b` is the position of the block holding member `j` and `xbar` the
//! centre of mass. Euler-Poisson has `p = -alpha/2`, `q = gamma = 0`; the
//! damped variant adds `gamma > 0`; quadratic confinement has
//! `p = q = lambda^2`, `gamma = 2 kappa`. Internal forces cancel, so the centre
//! of mass follows [`mean_dynamics`] whatever the block history.

use crate::error::{Error, Result};

/// Below this value of `gamma * s` the kernels switch to their power series.
const SERIES_SWITCH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    EulerPoisson,
    DampedEulerPoisson,
    ConfinedRepulsive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceModel {
    variant: Variant,
    alpha: f64,
    beta: f64,
    gamma: f64,
    lambda: f64,
    sigma: f64,
}

impl ForceModel {
    /// Poisson coupling `alpha` (positive attracts) and uniform field `beta`.
    pub fn euler_poisson(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Variant::EulerPoisson, alpha, beta, 0.0, 0.0)
    }

    pub fn damped(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        Self::new(Variant::DampedEulerPoisson, alpha, beta, gamma, 0.0)
    }

    /// Repulsion balanced by quadratic confinement of strength `lambda`, with
    /// damping `gamma = 2 kappa`. Requires `lambda > kappa >= 0`.
    pub fn confined(lambda: f64, kappa: f64, beta: f64) -> Result<Self> {
        Self::new(Variant::ConfinedRepulsive, -2.0 * lambda * lambda, beta, 2.0 * kappa, lambda)
    }

    /// For the confined variant `alpha` is ignored and set to `-2 lambda^2`.
    pub fn new(variant: Variant, alpha: f64, beta: f64, gamma: f64, lambda: f64) -> Result<Self> {
        if ![alpha, beta, gamma, lambda].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("force parameters must be finite".into()));
        }
        if gamma < 0.0 || lambda < 0.0 {
            return Err(Error::InvalidInput("gamma and lambda must be nonnegative".into()));
        }
        let mut m = Self { variant, alpha, beta, gamma, lambda, sigma: 0.0 };
        match variant {
            Variant::EulerPoisson => {
                if gamma != 0.0 || lambda != 0.0 {
                    return Err(Error::InvalidInput("Euler-Poisson takes no damping or confinement".into()));
                }
            }
            Variant::DampedEulerPoisson => {
                if lambda != 0.0 {
                    return Err(Error::InvalidInput("damped Euler-Poisson takes no confinement".into()));
                }
            }
            Variant::ConfinedRepulsive => {
                let kappa = gamma / 2.0;
                if lambda <= kappa {
                    return Err(Error::InvalidInput(format!(
                        "confinement needs lambda > kappa, got lambda = {lambda}, kappa = {kappa}"
                    )));
                }
                m.alpha = -2.0 * lambda * lambda;
                m.sigma = (lambda * lambda - kappa * kappa).sqrt();
            }
        }
        Ok(m)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kappa(&self) -> f64 {
        self.gamma / 2.0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Coefficient of `c_j` in the member law.
    pub fn p(&self) -> f64 {
        -self.alpha / 2.0
    }

    /// Restoring coefficient towards the centre of mass.
    pub fn q(&self) -> f64 {
        self.lambda * self.lambda
    }

    /// Whether merged blocks can ever split again.
    pub fn can_split(&self) -> bool {
        self.p() > 0.0
    }
}

/// `(1 - e^{-gamma s}) / gamma`, equal to `s` at `gamma = 0`.
pub fn phi(gamma: f64, s: f64) -> f64 {
    let g = gamma * s;
    if g.abs() < SERIES_SWITCH {
        s * series(-g, 1)
    } else {
        -(-g).exp_m1() / gamma
    }
}

/// `(s - phi(gamma, s)) / gamma`, equal to `s^2 / 2` at `gamma = 0`.
pub fn psi(gamma: f64, s: f64) -> f64 {
    let g = gamma * s;
    if g.abs() < SERIES_SWITCH {
        s * s * series(-g, 2)
    } else {
        (s - phi(gamma, s)) / gamma
    }
}

/// `sum_{k >= 0} y^k / (k + offset)!`, truncated well below double precision
/// for `|y| < SERIES_SWITCH`.
fn series(y: f64, offset: u32) -> f64 {
    let mut term = 1.0 / (1..=offset).map(f64::from).product::<f64>();
    let mut acc = term;
    for k in 1..10 {
        term *= y / f64::from(k + offset);
        acc += term;
    }
    acc
}

/// `c_i = theta_{i-1} + theta_i - 1` for cumulative masses `theta`.
pub fn centred_coordinates(theta: &[f64]) -> Vec<f64> {
    theta.windows(2).map(|w| w[0] + w[1] - 1.0).collect()
}

/// Constant particle accelerations of the undamped Euler-Poisson model,
/// `a_i = -(alpha/2) c_i - beta`.
pub fn discrete_acceleration(theta: &[f64], model: &ForceModel) -> Result<Vec<f64>> {
    if model.variant != Variant::EulerPoisson {
        return Err(Error::Unsupported("constant accelerations exist only for Euler-Poisson".into()));
    }
    if theta.len() < 2 {
        return Err(Error::InvalidInput("need cumulative masses theta_0..theta_n".into()));
    }
    Ok(centred_coordinates(theta).into_iter().map(|c| model.p() * c - model.beta).collect())
}

/// Centre of mass and mean velocity at time `t`.
pub fn mean_dynamics(model: &ForceModel, xbar0: f64, vbar0: f64, t: f64) -> (f64, f64) {
    let g = model.gamma;
    let x = xbar0 + vbar0 * phi(g, t) - model.beta * psi(g, t);
    let v = (-g * t).exp() * vbar0 - model.beta * phi(g, t);
    (x, v)
}

/// A force model together with the initial centre of mass, which fixes
/// `xbar(t)` for the whole run. Provides the closed-form motion of blocks and
/// of member velocity deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    model: ForceModel,
    xbar0: f64,
    vbar0: f64,
}

impl Kinematics {
    pub fn new(model: ForceModel, xbar0: f64, vbar0: f64) -> Self {
        Self { model, xbar0, vbar0 }
    }

    pub fn model(&self) -> &ForceModel {
        &self.model
    }

    pub fn mean(&self, t: f64) -> (f64, f64) {
        mean_dynamics(&self.model, self.xbar0, self.vbar0, t)
    }

    /// Damped oscillator `z'' + 2 kappa z' + lambda^2 z = 0` after time `s`.
    fn oscillate(&self, z0: f64, zd0: f64, s: f64) -> (f64, f64) {
        let (k, sg, l2) = (self.model.kappa(), self.model.sigma, self.model.q());
        let e = (-k * s).exp();
        let (sn, cs) = (sg * s).sin_cos();
        (e * (z0 * cs + (zd0 + k * z0) / sg * sn), e * (zd0 * cs - (k * zd0 + l2 * z0) / sg * sn))
    }

    /// Position and velocity, `s` after time `t0`, of a block with mean
    /// centred coordinate `cbar` that was at `(x0, v0)` at `t0`.
    pub fn advance(&self, cbar: f64, t0: f64, x0: f64, v0: f64, s: f64) -> (f64, f64) {
        let m = &self.model;
        let q = m.q();
        if q == 0.0 {
            let g = m.p() * cbar - m.beta;
            let e = (-m.gamma * s).exp();
            return (x0 + v0 * phi(m.gamma, s) + g * psi(m.gamma, s), e * v0 + g * phi(m.gamma, s));
        }
        let (xb0, vb0) = self.mean(t0);
        let r_eq = m.p() * cbar / q;
        let (z, zd) = self.oscillate(x0 - xb0 - r_eq, v0 - vb0, s);
        let (xb, vb) = self.mean(t0 + s);
        (xb + r_eq + z, vb + zd)
    }

    /// Block acceleration at time `t`.
    pub fn acceleration(&self, cbar: f64, t: f64, x: f64, v: f64) -> f64 {
        let m = &self.model;
        let xbar = if m.q() == 0.0 { 0.0 } else { self.mean(t).0 };
        -m.gamma * v + m.p() * cbar - m.q() * (x - xbar) - m.beta
    }

    /// Deviation `u_j - v_b` of a member after time `s`, where `dc = c_j - cbar`.
    pub fn deviation(&self, dc: f64, w0: f64, s: f64) -> f64 {
        let g = self.model.gamma;
        (-g * s).exp() * w0 + self.model.p() * dc * phi(g, s)
    }

    /// Gap between two blocks and its rate of change, `s` after a common
    /// instant at which the gap is `dx`, its rate `dv`, and the difference of
    /// mean centred coordinates (right minus left) is `dc`.
    pub fn gap(&self, dx: f64, dv: f64, dc: f64, s: f64) -> (f64, f64) {
        let m = &self.model;
        let q = m.q();
        if q == 0.0 {
            let g = m.gamma;
            let pdc = m.p() * dc;
            return (dx + dv * phi(g, s) + pdc * psi(g, s), (-g * s).exp() * dv + pdc * phi(g, s));
        }
        let d = m.p() * dc / q;
        let (z, zd) = self.oscillate(dx - d, dv, s);
        (d + z, zd)
    }
}

/// Closed-form time factor `B(t)` of one flux term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeCoeff {
    Const,
    Linear,
    /// `e^{-rate t}`
    Exp(f64),
    /// `(1 - e^{-gamma t}) / gamma`
    Phi(f64),
    /// `e^{-kappa t} (cos sigma t - (kappa / sigma) sin sigma t)`
    OscCos { kappa: f64, sigma: f64 },
    /// `e^{-kappa t} sin(sigma t) / sigma`
    OscSin { kappa: f64, sigma: f64 },
}

impl TimeCoeff {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeCoeff::Const => 1.0,
            TimeCoeff::Linear => t,
            TimeCoeff::Exp(r) => (-r * t).exp(),
            TimeCoeff::Phi(g) => phi(g, t),
            TimeCoeff::OscCos { kappa, sigma } => {
                let (s, c) = (sigma * t).sin_cos();
                (-kappa * t).exp() * (c - kappa / sigma * s)
            }
            TimeCoeff::OscSin { kappa, sigma } => (-kappa * t).exp() * (sigma * t).sin() / sigma,
        }
    }

    /// An upper bound for `|B|` on `[t0, t1]`, `0 <= t0 <= t1`; exact for the
    /// monotone factors.
    pub fn sup_abs(&self, t0: f64, t1: f64) -> f64 {
        match *self {
            TimeCoeff::OscCos { kappa, sigma } => (-kappa * t0).exp() * (1.0 + (kappa / sigma).powi(2)).sqrt(),
            TimeCoeff::OscSin { kappa, sigma } => ((-kappa * t0).exp() / sigma).min(t1),
            _ => self.eval(t0).abs().max(self.eval(t1).abs()),
        }
    }
}

/// Density `f` of a flux term; the term contributes `B(t) F(m)` with
/// `F(m) = int_0^m f`.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    /// Right-continuous steps: `values[i]` on `[breakpoints[i], breakpoints[i + 1])`.
    Steps { breakpoints: Vec<f64>, values: Vec<f64>, primitive: Vec<f64> },
    /// `sum coeffs[k] m^k`
    Poly(Vec<f64>),
}

impl Density {
    pub fn steps(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::InvalidInput("steps need one more breakpoint than values".into()));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidInput("step breakpoints must run from 0 to 1".into()));
        }
        if let Some(i) = breakpoints.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NotMonotone(i + 1));
        }
        let mut primitive = Vec::with_capacity(breakpoints.len());
        primitive.push(0.0);
        for (i, v) in values.iter().enumerate() {
            primitive.push(primitive[i] + v * (breakpoints[i + 1] - breakpoints[i]));
        }
        Ok(Density::Steps { breakpoints, values, primitive })
    }

    pub fn constant(c: f64) -> Self {
        Density::Poly(vec![c])
    }

    fn step_index(breakpoints: &[f64], m: f64) -> usize {
        breakpoints.partition_point(|&b| b <= m).clamp(1, breakpoints.len() - 1) - 1
    }

    pub fn eval(&self, m: f64) -> f64 {
        match self {
            Density::Steps { breakpoints, values, .. } => values[Self::step_index(breakpoints, m)],
            Density::Poly(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * m + ck),
        }
    }

    pub fn primitive(&self, m: f64) -> f64 {
        match self {
            Density::Steps { breakpoints, values, primitive } => {
                let i = Self::step_index(breakpoints, m);
                primitive[i] + values[i] * (m - breakpoints[i])
            }
            Density::Poly(c) => m * c.iter().enumerate().rev().fold(0.0, |acc, (k, &ck)| acc * m + ck / (k + 1) as f64),
        }
    }

    /// `int_0^1 |f|`; exact for steps, 5-point Gauss-Legendre on 256 panels for
    /// polynomials.
    pub fn l1_norm(&self) -> f64 {
        match self {
            Density::Steps { breakpoints, values, .. } => {
                values.iter().zip(breakpoints.windows(2)).map(|(v, w)| v.abs() * (w[1] - w[0])).sum()
            }
            Density::Poly(_) => {
                const X: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
                const W: [f64; 5] = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];
                let panels = 256;
                let h = 1.0 / panels as f64;
                (0..panels)
                    .map(|p| {
                        let c = (p as f64 + 0.5) * h;
                        X.iter().zip(W).map(|(x, w)| 0.5 * h * w * self.eval(c + 0.5 * h * x).abs()).sum::<f64>()
                    })
                    .sum()
            }
        }
    }
}

/// Flux `U(t, m) = sum_i B_i(t) F_i(m)` of the conservation law for the
/// distribution function; `dU/dm` is the prescribed velocity at mass `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxFunction {
    terms: Vec<(TimeCoeff, Density)>,
}

impl FluxFunction {
    pub fn new(terms: Vec<(TimeCoeff, Density)>) -> Self {
        Self { terms }
    }

    pub fn terms(&self) -> &[(TimeCoeff, Density)] {
        &self.terms
    }

    /// Continuum Euler-Poisson flux (damped if `gamma > 0`) for initial
    /// velocity density `v0`.
    pub fn euler_poisson(model: &ForceModel, v0: Density) -> Result<Self> {
        let a = Density::Poly(vec![-model.p() - model.beta, 2.0 * model.p()]);
        Self::with_acceleration(model, v0, a)
    }

    fn with_acceleration(model: &ForceModel, v0: Density, a: Density) -> Result<Self> {
        match model.variant {
            Variant::EulerPoisson => Ok(Self::new(vec![(TimeCoeff::Const, v0), (TimeCoeff::Linear, a)])),
            Variant::DampedEulerPoisson => Ok(Self::new(vec![
                (TimeCoeff::Exp(model.gamma), v0),
                (TimeCoeff::Phi(model.gamma), a),
            ])),
            Variant::ConfinedRepulsive => {
                Err(Error::Unsupported("the confined flux depends on positions; use FluxFunction::discrete".into()))
            }
        }
    }

    /// Flux of particle data, valid for all time under the Euler-Poisson and
    /// damped models. For the confined model it is the free-flight flux and
    /// holds only until the first collision.
    pub fn discrete(model: &ForceModel, masses: &[f64], x0: &[f64], v0: &[f64]) -> Result<Self> {
        let theta = crate::measures::cumulative(masses)?;
        let c = centred_coordinates(&theta);
        let steps = |vals: Vec<f64>| Density::steps(theta.clone(), vals);
        if model.variant != Variant::ConfinedRepulsive {
            let a = c.iter().map(|ci| model.p() * ci - model.beta).collect();
            return Self::with_acceleration(model, steps(v0.to_vec())?, steps(a)?);
        }
        let xbar0: f64 = masses.iter().zip(x0).map(|(m, x)| m * x).sum();
        let vbar0: f64 = masses.iter().zip(v0).map(|(m, v)| m * v).sum();
        let (kappa, sigma, l2) = (model.kappa(), model.sigma, model.q());
        Ok(Self::new(vec![
            (TimeCoeff::Exp(model.gamma), Density::constant(vbar0)),
            (TimeCoeff::OscCos { kappa, sigma }, Density::constant(-vbar0)),
            (TimeCoeff::Phi(model.gamma), Density::constant(-model.beta)),
            (TimeCoeff::OscCos { kappa, sigma }, steps(v0.to_vec())?),
            (TimeCoeff::OscSin { kappa, sigma }, steps(c.iter().zip(x0).map(|(ci, x)| l2 * (ci + xbar0 - x)).collect())?),
        ]))
    }

    /// Time-independent flux whose slope is the given prescribed velocities.
    pub fn snapshot(masses: &[f64], u: &[f64]) -> Result<Self> {
        let theta = crate::measures::cumulative(masses)?;
        Ok(Self::new(vec![(TimeCoeff::Const, Density::steps(theta, u.to_vec())?)]))
    }

    fn check_mass(m: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&m) {
            return Err(Error::MassOutOfRange(m));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, m: f64) -> Result<f64> {
        Self::check_mass(m)?;
        Ok(self.terms.iter().map(|(b, f)| b.eval(t) * f.primitive(m)).sum())
    }

    /// Right derivative in `m`.
    pub fn slope(&self, t: f64, m: f64) -> Result<f64> {
        Self::check_mass(m)?;
        Ok(self.terms.iter().map(|(b, f)| b.eval(t) * f.eval(m)).sum())
    }

    /// `|t - s| sum_i sup |B_i| ||f_i||_{L^1}`, a bound on `||M(t) - M(s)||_{L^1}`.
    pub fn l1_lipschitz_bound(&self, s: f64, t: f64) -> f64 {
        let (a, b) = (s.min(t), s.max(t));
        (b - a) * self.terms.iter().map(|(c, f)| c.sup_abs(a, b) * f.l1_norm()).sum::<f64>()
    }
}

pub fn flux_eval(flux: &FluxFunction, t: f64, m: f64) -> Result<f64> {
    flux.eval(t, m)
}

pub fn flux_slope(flux: &FluxFunction, t: f64, m: f64) -> Result<f64> {
    flux.slope(t, m)
}
