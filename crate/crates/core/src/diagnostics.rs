//! Energy, Lyapunov and stability functionals of simulator snapshots.

use crate::dynamics::Snapshot;
use crate::error::{Error, Result};
use crate::forces::{centred_coordinates, ForceModel, Variant};

/// `sum_i sum_j m_i m_j |x_i - x_j|` by the direct double sum.
pub fn pairwise_abs_sum_direct(masses: &[f64], x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        for j in 0..i {
            s += masses[i] * masses[j] * (x[i] - x[j]).abs();
        }
    }
    2.0 * s
}

/// Same sum in `O(n log n)`: after sorting, member `i` contributes
/// `m_i (x_i W_i - S_i)` against the prefix mass `W_i` and moment `S_i`.
pub fn pairwise_abs_sum(masses: &[f64], x: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..x.len()).collect();
    if x.windows(2).any(|w| w[1] < w[0]) {
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    }
    let (mut w, mut m1, mut s) = (0.0, 0.0, 0.0);
    for &i in &order {
        s += masses[i] * (x[i] * w - m1);
        w += masses[i];
        m1 += masses[i] * x[i];
    }
    2.0 * s
}

/// `sum_i sum_j m_i m_j (x_i - x_j)^2`.
pub fn pairwise_sq_sum(masses: &[f64], x: &[f64]) -> f64 {
    let w: f64 = masses.iter().sum();
    let m1: f64 = masses.iter().zip(x).map(|(m, x)| m * x).sum();
    let m2: f64 = masses.iter().zip(x).map(|(m, x)| m * x * x).sum();
    (2.0 * (w * m2 - m1 * m1)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
    /// Total energy with the kinetic part taken from prescribed velocities;
    /// bounds `total` from above.
    pub majorant: f64,
}

/// Interaction energy of member positions.
pub fn potential_energy(model: &ForceModel, masses: &[f64], x: &[f64]) -> f64 {
    let drift: f64 = model.beta() * masses.iter().zip(x).map(|(m, x)| m * x).sum::<f64>();
    match model.variant() {
        Variant::ConfinedRepulsive => {
            let l2 = model.q();
            0.5 * l2 * (0.5 * pairwise_sq_sum(masses, x) - pairwise_abs_sum(masses, x)) + drift
        }
        _ => 0.25 * model.alpha() * pairwise_abs_sum(masses, x) + drift,
    }
}

pub fn energy(snap: &Snapshot, model: &ForceModel) -> EnergyReport {
    let x = snap.member_positions();
    let kinetic = snap.kinetic_energy();
    let potential = potential_energy(model, &snap.masses, &x);
    let prescribed: f64 = 0.5 * snap.masses.iter().zip(&snap.u).map(|(m, u)| m * u * u).sum::<f64>();
    EnergyReport { t: snap.t, kinetic, potential, total: kinetic + potential, majorant: prescribed + potential }
}

fn weighted_norm_sq(masses: &[f64], v: impl IntoIterator<Item = f64>) -> f64 {
    masses.iter().zip(v).map(|(m, v)| m * v * v).sum()
}

/// `sigma^2 |X~|^2 + |U~ + kappa X~|^2` with `X~ = X - c - xbar`, `U~ = U - vbar`,
/// where `c_j = theta_{j-1} + theta_j - 1` is the discrete steady profile.
pub fn lyapunov(snap: &Snapshot, model: &ForceModel) -> Result<f64> {
    if model.variant() != Variant::ConfinedRepulsive {
        return Err(Error::Unsupported("the Lyapunov functional is defined for the confined model".into()));
    }
    let c = centred_coordinates(&snap.theta());
    let (xbar, vbar) = (snap.centre_of_mass(), snap.momentum());
    let xt: Vec<f64> = snap.member_positions().iter().zip(&c).map(|(x, c)| x - c - xbar).collect();
    let k = model.kappa();
    let s2 = model.sigma().powi(2);
    Ok(s2 * weighted_norm_sq(&snap.masses, xt.iter().copied())
        + weighted_norm_sq(&snap.masses, snap.u.iter().zip(&xt).map(|(u, x)| u - vbar + k * x)))
}

/// `lambda^2 |X^_1 - X^_2|^2 + |U^_1 - U^_2|^2` on centred variables of two
/// runs with the same masses.
pub fn stability_gap(a: &Snapshot, b: &Snapshot, model: &ForceModel) -> Result<f64> {
    if a.masses.len() != b.masses.len() || a.masses.iter().zip(&b.masses).any(|(x, y)| (x - y).abs() > 1e-15) {
        return Err(Error::InvalidInput("stability gap needs runs with identical masses".into()));
    }
    let (xa, xb) = (a.member_positions(), b.member_positions());
    let (ca, cb) = (a.centre_of_mass(), b.centre_of_mass());
    let (va, vb) = (a.momentum(), b.momentum());
    let dx = xa.iter().zip(&xb).map(|(p, q)| (p - ca) - (q - cb));
    let du = a.u.iter().zip(&b.u).map(|(p, q)| (p - va) - (q - vb));
    Ok(model.q() * weighted_norm_sq(&a.masses, dx) + weighted_norm_sq(&a.masses, du))
}

/// Least-squares slope of `ln y` against `t`.
pub fn log_slope(t: &[f64], y: &[f64]) -> Result<f64> {
    if t.len() != y.len() || t.len() < 2 {
        return Err(Error::InvalidInput("need at least two paired samples".into()));
    }
    if let Some(i) = y.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput(format!("log of nonpositive sample {} at index {i}", y[i])));
    }
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let lm = ly.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(&ly).map(|(a, b)| (a - tm) * (b - lm)).sum();
    let sxx: f64 = t.iter().map(|a| (a - tm).powi(2)).sum();
    Ok(sxy / sxx)
}
