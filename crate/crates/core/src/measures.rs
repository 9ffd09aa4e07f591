//! Discrete probability measures on the line: monotone rearrangements,
//! distribution functions, their generalized inverses and Wasserstein
//! distances.
//!
//! A measure `sum m_i delta_{x_i}` is represented either by its monotone
//! rearrangement `X` on the mass interval (0, 1) ([`MonotoneStepMap`]) or by
//! its distribution function `M` ([`StepDistribution`]). Both are right
//! continuous.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::tol;

/// Tolerance on `sum m_i = 1` when accepting user masses.
const MASS_SUM_TOL: f64 = 1e-9;

/// Partition of particle indices `0..n` into contiguous blocks.
///
/// Stored as boundaries `0 = b_0 < b_1 < ... < b_k = n`; block `i` is
/// `b_i..b_{i+1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockStructure {
    bounds: Vec<usize>,
}

impl BlockStructure {
    pub fn singletons(n: usize) -> Self {
        Self { bounds: (0..=n).collect() }
    }

    pub fn from_bounds(bounds: Vec<usize>) -> Result<Self> {
        if bounds.len() < 2 || bounds[0] != 0 {
            return Err(Error::InvalidInput("block bounds must start at 0 and hold at least one block".into()));
        }
        if bounds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("block bounds must be strictly increasing".into()));
        }
        Ok(Self { bounds })
    }

    /// Singletons everywhere except the given flat ranges.
    pub fn from_ranges(n: usize, ranges: &[Range<usize>]) -> Result<Self> {
        let mut sorted: Vec<Range<usize>> = ranges.iter().filter(|r| !r.is_empty()).cloned().collect();
        sorted.sort_by_key(|r| r.start);
        let mut bounds = vec![0];
        let mut next = 0;
        for r in sorted {
            if r.start < next || r.end > n {
                return Err(Error::InvalidInput(format!("block range {r:?} overlaps or exceeds 0..{n}")));
            }
            bounds.extend(next + 1..=r.start);
            bounds.push(r.end);
            next = r.end;
        }
        bounds.extend(next + 1..=n);
        bounds.dedup();
        Self::from_bounds(bounds)
    }

    /// Groups consecutive equal positions (up to the positional tolerance).
    pub fn from_positions(x: &[f64]) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidInput("no positions".into()));
        }
        let mut bounds = vec![0];
        for i in 1..x.len() {
            if x[i] < x[i - 1] && !tol::same_position(x[i], x[i - 1]) {
                return Err(Error::NotMonotone(i));
            }
            if !tol::same_position(x[i], x[i - 1]) {
                bounds.push(i);
            }
        }
        bounds.push(x.len());
        Ok(Self { bounds })
    }

    /// Number of blocks.
    pub fn len(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_members(&self) -> usize {
        *self.bounds.last().unwrap()
    }

    pub fn bounds(&self) -> &[usize] {
        &self.bounds
    }

    pub fn block(&self, b: usize) -> Range<usize> {
        self.bounds[b]..self.bounds[b + 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.bounds.windows(2).map(|w| w[0]..w[1])
    }

    /// Block index of every member.
    pub fn block_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_members()];
        for (b, r) in self.iter().enumerate() {
            out[r].fill(b);
        }
        out
    }
}

/// Right-continuous nondecreasing step function on (0, 1): value `values[i]`
/// on `[breakpoints[i], breakpoints[i + 1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneStepMap {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl MonotoneStepMap {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || breakpoints.len() != values.len() + 1 {
            return Err(Error::InvalidInput("need n values and n + 1 breakpoints".into()));
        }
        if breakpoints[0] != 0.0 || (breakpoints[values.len()] - 1.0).abs() > MASS_SUM_TOL {
            return Err(Error::InvalidInput("breakpoints must run from 0 to 1".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("breakpoints must be strictly increasing".into()));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::NotMonotone(i + 1));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("values must be finite".into()));
        }
        let mut breakpoints = breakpoints;
        let n = values.len();
        breakpoints[n] = 1.0;
        Ok(Self { breakpoints, values })
    }

    /// Builds the map from particle masses and ordered positions.
    pub fn from_masses(masses: &[f64], values: &[f64]) -> Result<Self> {
        Self::new(cumulative(masses)?, values.to_vec())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn masses(&self) -> Vec<f64> {
        self.breakpoints.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Value at mass coordinate `m`; `m = 1` returns the last value.
    pub fn eval(&self, m: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b <= m);
        self.values[i.clamp(1, self.values.len()) - 1]
    }

    /// Merges adjacent steps carrying the same value.
    pub fn canonical(&self) -> Self {
        let mut bp = vec![0.0];
        let mut vals: Vec<f64> = Vec::new();
        for (i, &v) in self.values.iter().enumerate() {
            if vals.last() == Some(&v) {
                *bp.last_mut().unwrap() = self.breakpoints[i + 1];
            } else {
                vals.push(v);
                bp.push(self.breakpoints[i + 1]);
            }
        }
        Self { breakpoints: bp, values: vals }
    }

    /// The distribution function whose generalized inverse is this map.
    pub fn distribution(&self) -> StepDistribution {
        let c = self.canonical();
        StepDistribution { jumps: c.values, levels: c.breakpoints[1..].to_vec() }
    }
}

/// Right-continuous step distribution function: 0 left of `jumps[0]`, then
/// `levels[i]` on `[jumps[i], jumps[i + 1])`, with the last level equal to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    jumps: Vec<f64>,
    levels: Vec<f64>,
}

impl StepDistribution {
    pub fn new(jumps: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if jumps.is_empty() || jumps.len() != levels.len() {
            return Err(Error::InvalidInput("need one level per jump".into()));
        }
        if let Some(i) = jumps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NotMonotone(i + 1));
        }
        if levels[0] <= 0.0 || levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("levels must be strictly increasing and positive".into()));
        }
        let n = levels.len();
        if (levels[n - 1] - 1.0).abs() > MASS_SUM_TOL {
            return Err(Error::InvalidInput("last level must be 1".into()));
        }
        let mut levels = levels;
        levels[n - 1] = 1.0;
        Ok(Self { jumps, levels })
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.jumps.partition_point(|&j| j <= x);
        if i == 0 {
            0.0
        } else {
            self.levels[i - 1]
        }
    }

    /// Right-continuous generalized inverse `m -> inf { x : M(x) > m }`.
    pub fn quantile(&self) -> MonotoneStepMap {
        let mut bp = Vec::with_capacity(self.levels.len() + 1);
        bp.push(0.0);
        bp.extend_from_slice(&self.levels);
        MonotoneStepMap { breakpoints: bp, values: self.jumps.clone() }
    }
}

/// Generalized inverse of a distribution function.
pub fn generalized_inverse(m: &StepDistribution) -> MonotoneStepMap {
    m.quantile()
}

/// Cumulative masses `theta_0 = 0, ..., theta_n = 1`.
pub fn cumulative(masses: &[f64]) -> Result<Vec<f64>> {
    if masses.is_empty() {
        return Err(Error::InvalidInput("no masses".into()));
    }
    if masses.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
        return Err(Error::InvalidInput("masses must be positive and finite".into()));
    }
    let mut theta = Vec::with_capacity(masses.len() + 1);
    theta.push(0.0);
    let mut acc = 0.0;
    for &m in masses {
        acc += m;
        theta.push(acc);
    }
    if (acc - 1.0).abs() > MASS_SUM_TOL {
        return Err(Error::InvalidInput(format!("masses sum to {acc}, not 1")));
    }
    *theta.last_mut().unwrap() = 1.0;
    Ok(theta)
}

/// Ordered particles with masses and velocities; initial data for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Particles {
    pub masses: Vec<f64>,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl Particles {
    pub fn new(masses: Vec<f64>, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        let n = masses.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty particle list".into()));
        }
        if positions.len() != n || velocities.len() != n {
            return Err(Error::InvalidInput("masses, positions and velocities differ in length".into()));
        }
        cumulative(&masses)?;
        if positions.iter().chain(&velocities).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("positions and velocities must be finite".into()));
        }
        if let Some(i) = positions.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::NotMonotone(i + 1));
        }
        Ok(Self { masses, positions, velocities })
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn theta(&self) -> Vec<f64> {
        cumulative(&self.masses).expect("validated at construction")
    }

    pub fn step_map(&self) -> MonotoneStepMap {
        MonotoneStepMap::from_masses(&self.masses, &self.positions).expect("validated at construction")
    }

    /// `sum m_i |x_i|^p` for `p` in {1, 2}.
    pub fn moment(&self, p: u32) -> Result<f64> {
        moment(&self.masses, &self.positions, p)
    }
}

/// `sum m_i |x_i|^p` for `p` in {1, 2}.
pub fn moment(masses: &[f64], positions: &[f64], p: u32) -> Result<f64> {
    if !(p == 1 || p == 2) {
        return Err(Error::Unsupported(format!("moment of order {p}")));
    }
    Ok(masses.iter().zip(positions).map(|(m, x)| m * x.abs().powi(p as i32)).sum())
}

/// Equal-mass particles at the midpoint quantiles `X((i - 1/2) / n)` with
/// velocities `V((i - 1/2) / n)`.
pub fn quantile_discretize<X, V>(quantile: X, velocity: V, n: usize) -> Result<Particles>
where
    X: Fn(f64) -> f64,
    V: Fn(f64) -> f64,
{
    if n == 0 {
        return Err(Error::InvalidInput("need at least one particle".into()));
    }
    let mids: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let positions: Vec<f64> = mids.iter().map(|&m| quantile(m)).collect();
    let velocities: Vec<f64> = mids.iter().map(|&m| velocity(m)).collect();
    Particles::new(vec![1.0 / n as f64; n], positions, velocities)
}

/// Walks the common refinement of two step maps, yielding
/// `(interval length, value a, value b)`.
fn merged_steps<'a>(a: &'a MonotoneStepMap, b: &'a MonotoneStepMap) -> impl Iterator<Item = (f64, f64, f64)> + 'a {
    let (mut i, mut j, mut cur) = (0usize, 0usize, 0.0f64);
    std::iter::from_fn(move || {
        if i >= a.values.len() || j >= b.values.len() {
            return None;
        }
        let (na, nb) = (a.breakpoints[i + 1], b.breakpoints[j + 1]);
        let next = na.min(nb);
        let item = (next - cur, a.values[i], b.values[j]);
        cur = next;
        if na <= next {
            i += 1;
        }
        if nb <= next {
            j += 1;
        }
        Some(item)
    })
}

/// Quadratic Wasserstein distance `(int_0^1 |X_1 - X_2|^2 dm)^{1/2}`.
pub fn w2_distance(a: &MonotoneStepMap, b: &MonotoneStepMap) -> f64 {
    merged_steps(a, b).map(|(h, x, y)| h * (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `int_0^1 |X_1 - X_2| dm`, the quantile form of the W1 distance.
pub fn w1_quantile(a: &MonotoneStepMap, b: &MonotoneStepMap) -> f64 {
    merged_steps(a, b).map(|(h, x, y)| h * (x - y).abs()).sum()
}

/// `int_0^1 (X_2 - X_1)^+ dm`, which equals `int (M_1 - M_2)^+ dx`.
pub fn positive_part_gap(a: &MonotoneStepMap, b: &MonotoneStepMap) -> f64 {
    merged_steps(a, b).map(|(h, x, y)| h * (y - x).max(0.0)).sum()
}

/// First Wasserstein distance, computed on the quantile side.
pub fn w1_distance(a: &StepDistribution, b: &StepDistribution) -> f64 {
    w1_quantile(&a.quantile(), &b.quantile())
}

/// First Wasserstein distance `int |M_1 - M_2| dx`, computed on the CDF side.
pub fn w1_distance_cdf(a: &StepDistribution, b: &StepDistribution) -> f64 {
    let mut xs: Vec<f64> = a.jumps.iter().chain(&b.jumps).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.windows(2).map(|w| (w[1] - w[0]) * (a.eval(w[0]) - b.eval(w[0])).abs()).sum()
}

const GAUSS5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GAUSS5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// `(int_0^1 |X(m) - f(m)|^p dm)^{1/p}` between a step map and a continuous
/// quantile function, by composite Gauss-Legendre quadrature with `sub`
/// panels per step.
pub fn lp_to_quantile<F: Fn(f64) -> f64>(map: &MonotoneStepMap, f: F, p: u32, sub: usize) -> f64 {
    let sub = sub.max(1);
    let mut acc = 0.0;
    for (i, &v) in map.values.iter().enumerate() {
        let (lo, hi) = (map.breakpoints[i], map.breakpoints[i + 1]);
        let h = (hi - lo) / sub as f64;
        for k in 0..sub {
            let a = lo + k as f64 * h;
            for (node, w) in GAUSS5_NODES.iter().zip(GAUSS5_WEIGHTS) {
                let m = a + 0.5 * h * (node + 1.0);
                acc += 0.5 * h * w * (v - f(m)).abs().powi(p as i32);
            }
        }
    }
    acc.powf(1.0 / p as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(masses: &[f64], values: &[f64]) -> MonotoneStepMap {
        MonotoneStepMap::from_masses(masses, values).unwrap()
    }

    #[test]
    fn single_dirac_inverse_is_constant() {
        let m = StepDistribution::new(vec![0.0], vec![1.0]).unwrap();
        let x = generalized_inverse(&m);
        assert_eq!(x.values(), &[0.0]);
        assert_eq!(x.eval(0.3), 0.0);
    }

    #[test]
    fn symmetric_pair_inverse() {
        let m = StepDistribution::new(vec![-1.0, 1.0], vec![0.5, 1.0]).unwrap();
        let x = generalized_inverse(&m);
        assert_eq!(x.eval(0.25), -1.0);
        assert_eq!(x.eval(0.5), 1.0);
        assert_eq!(x.distribution(), m);
    }

    #[test]
    fn eval_is_right_continuous() {
        let x = map(&[0.25, 0.75], &[1.0, 2.0]);
        assert_eq!(x.eval(0.0), 1.0);
        assert_eq!(x.eval(0.25), 2.0);
        assert_eq!(x.eval(1.0), 2.0);
        let m = x.distribution();
        assert_eq!(m.eval(0.999), 0.0);
        assert_eq!(m.eval(1.0), 0.25);
        assert_eq!(m.eval(2.0), 1.0);
    }

    #[test]
    fn canonical_merges_flat_steps() {
        let x = map(&[0.25, 0.25, 0.5], &[0.0, 0.0, 1.0]);
        let c = x.canonical();
        assert_eq!(c.breakpoints(), &[0.0, 0.5, 1.0]);
        assert_eq!(c.values(), &[0.0, 1.0]);
    }

    #[test]
    fn rejects_decreasing_values() {
        assert_eq!(MonotoneStepMap::from_masses(&[0.5, 0.5], &[1.0, 0.0]), Err(Error::NotMonotone(1)));
        assert!(StepDistribution::new(vec![1.0, 0.0], vec![0.5, 1.0]).is_err());
    }

    #[test]
    fn block_structure_from_positions_and_ranges() {
        let b = BlockStructure::from_positions(&[0.0, 0.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(b.bounds(), &[0, 2, 3, 5]);
        assert_eq!(b.block_of(), vec![0, 0, 1, 2, 2]);
        let r = BlockStructure::from_ranges(6, &[1..3, 4..6]).unwrap();
        assert_eq!(r.bounds(), &[0, 1, 3, 4, 6]);
        assert_eq!(BlockStructure::from_ranges(3, &[]).unwrap(), BlockStructure::singletons(3));
        assert!(BlockStructure::from_positions(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn midpoint_discretization_of_uniform() {
        let p = quantile_discretize(|m| m - 0.5, |_| 0.0, 4).unwrap();
        assert_eq!(p.positions, vec![-0.375, -0.125, 0.125, 0.375]);
        assert_eq!(p.masses, vec![0.25; 4]);
    }

    #[test]
    fn constant_quantile_gives_one_block() {
        let p = quantile_discretize(|_| 3.0, |_| 0.0, 7).unwrap();
        assert_eq!(BlockStructure::from_positions(&p.positions).unwrap().len(), 1);
    }

    #[test]
    fn midpoint_w2_error_matches_exact_integral() {
        // Each cell of width h contributes h^3 / 12, so W2 = h / sqrt(12).
        let n = 1000;
        let p = quantile_discretize(|m| m - 0.5, |_| 0.0, n).unwrap();
        let w2 = lp_to_quantile(&p.step_map(), |m| m - 0.5, 2, 1);
        let h = 1.0 / n as f64;
        assert!((w2 - h / 12f64.sqrt()).abs() < 1e-12);
        assert!(w2 <= 0.5 * h);
    }

    #[test]
    fn dirac_distances() {
        let a = map(&[1.0], &[0.25]);
        let b = map(&[1.0], &[-1.5]);
        assert!((w2_distance(&a, &b) - 1.75).abs() < 1e-15);
        assert_eq!(w2_distance(&a, &a), 0.0);
        let d0 = StepDistribution::new(vec![0.0], vec![1.0]).unwrap();
        let d1 = StepDistribution::new(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(w1_distance(&d0, &d1), 1.0);
        assert_eq!(w1_distance_cdf(&d0, &d1), 1.0);
        assert_eq!(w1_distance(&d0, &d0), 0.0);
    }

    #[test]
    fn moments_of_simple_measures() {
        assert_eq!(moment(&[1.0], &[2.0], 2).unwrap(), 4.0);
        assert_eq!(moment(&[0.5, 0.5], &[-1.0, 1.0], 1).unwrap(), 1.0);
        assert!(moment(&[1.0], &[2.0], 3).is_err());
        let p = quantile_discretize(|m| m - 0.5, |_| 0.0, 1000).unwrap();
        assert!((p.moment(2).unwrap() - 1.0 / 12.0).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_particles() {
        assert!(Particles::new(vec![], vec![], vec![]).is_err());
        assert!(Particles::new(vec![0.5, 0.4], vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(Particles::new(vec![0.5, 0.5], vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
    }
}
