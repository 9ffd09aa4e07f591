#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stickyflow::forces::ForceModel;
use stickyflow::measures::Particles;

pub struct Scenario {
    pub particles: Particles,
    pub model: ForceModel,
    pub t_end: f64,
    pub samples: Vec<f64>,
}

pub fn random_masses(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|m| m / total).collect()
}

/// Sorted positions in `[-2, 2]`; about a third repeat their predecessor so
/// that runs start with atoms.
pub fn random_positions(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    x.sort_by(f64::total_cmp);
    for i in 1..n {
        if rng.gen_bool(0.3) {
            x[i] = x[i - 1];
        }
    }
    x
}

/// Euler-Poisson with either sign of alpha, damped, or confined, chosen by `kind`.
pub fn random_model(rng: &mut ChaCha8Rng, kind: usize) -> ForceModel {
    let beta = if rng.gen_bool(0.5) { rng.gen_range(-1.0..1.0) } else { 0.0 };
    match kind % 3 {
        0 => ForceModel::euler_poisson(rng.gen_range(-3.0..3.0), beta).unwrap(),
        1 => ForceModel::damped(rng.gen_range(-3.0..3.0), beta, rng.gen_range(0.1..2.0)).unwrap(),
        _ => {
            let lambda = rng.gen_range(0.3..2.0);
            let kappa = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..0.9 * lambda) };
            ForceModel::confined(lambda, kappa, beta).unwrap()
        }
    }
}

pub fn random_scenario(rng: &mut ChaCha8Rng, kind: usize) -> Scenario {
    let n = rng.gen_range(1..=32);
    let masses = random_masses(rng, n);
    let positions = random_positions(rng, n);
    let velocities = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let particles = Particles::new(masses, positions, velocities).unwrap();
    let t_end = rng.gen_range(0.5..4.0);
    let mut samples: Vec<f64> = (0..12).map(|_| rng.gen_range(0.0..t_end)).collect();
    samples.push(0.0);
    samples.push(t_end);
    samples.sort_by(f64::total_cmp);
    Scenario { particles, model: random_model(rng, kind), t_end, samples }
}

/// Equal masses at the midpoints of `n` cells.
pub fn midpoint_particles<X, V>(n: usize, x0: X, v0: V) -> Particles
where
    X: Fn(f64) -> f64,
    V: Fn(f64) -> f64,
{
    stickyflow::measures::quantile_discretize(x0, v0, n).unwrap()
}

pub fn midpoints(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}
