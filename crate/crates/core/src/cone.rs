//! The cone of nondecreasing vectors in the mass-weighted inner product
//! `<v, w>_m = sum m_i v_i w_i`, with its projections and the normal and
//! tangent cone tests used to characterize sticky dynamics.
//!
//! Projection onto the cone is weighted isotonic regression. Two independent
//! algorithms are provided: pool-adjacent-violators ([`project_cone`], linear
//! time, used by the simulator) and the right derivative of the lower convex
//! envelope of the mass primitive ([`project_cone_envelope`]).

use crate::error::{Error, Result};
use crate::measures::BlockStructure;
use crate::tol::EPS_XI;

/// Values paired with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedVector {
    weights: Vec<f64>,
    values: Vec<f64>,
}

impl WeightedVector {
    pub fn new(weights: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != values.len() {
            return Err(Error::InvalidInput("weights and values must be nonempty and of equal length".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be positive".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("values must be finite".into()));
        }
        Ok(Self { weights, values })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self { weights: self.weights.clone(), values }
    }

    /// Weighted inner product with another vector of the same weights.
    pub fn dot(&self, other: &[f64]) -> f64 {
        self.weights.iter().zip(&self.values).zip(other).map(|((w, a), b)| w * a * b).sum()
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Weighted isotonic regression by pool-adjacent-violators.
///
/// Returns the fitted values and the pools; pooled means are strictly
/// increasing from one pool to the next.
pub fn pav(weights: &[f64], values: &[f64]) -> (Vec<f64>, BlockStructure) {
    // (weight, mean, first index). Means are merged by an update that
    // leaves a pool of tied values exactly unchanged, so PAV is idempotent.
    let mut pools: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (i, (&w, &y)) in weights.iter().zip(values).enumerate() {
        let mut cur = (w, y, i);
        while let Some(&(pw, pm, start)) = pools.last() {
            if pm >= cur.1 {
                pools.pop();
                let tw = pw + cur.0;
                cur = (tw, pm + (cur.0 / tw) * (cur.1 - pm), start);
            } else {
                break;
            }
        }
        pools.push(cur);
    }
    let mut fitted = vec![0.0; values.len()];
    let mut bounds = Vec::with_capacity(pools.len() + 1);
    for (k, &(_, mean, start)) in pools.iter().enumerate() {
        let end = pools.get(k + 1).map_or(values.len(), |p| p.2);
        fitted[start..end].fill(mean);
        bounds.push(start);
    }
    bounds.push(values.len());
    (fitted, BlockStructure::from_bounds(bounds).expect("pools are contiguous"))
}

/// Projection onto the cone of nondecreasing vectors (pool-adjacent-violators).
pub fn project_cone(y: &WeightedVector) -> WeightedVector {
    y.with_values(pav(&y.weights, &y.values).0)
}

/// Breakpoints and slopes of a lower convex envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeResult {
    /// Indices of the input nodes lying on the envelope, first and last included.
    pub indices: Vec<usize>,
    /// Slope of each envelope segment; nondecreasing.
    pub slopes: Vec<f64>,
}

impl EnvelopeResult {
    /// Right derivative at abscissa `m` given the original node abscissae.
    pub fn slope_at(&self, nodes_m: &[f64], m: f64) -> f64 {
        let seg = self.indices[1..].partition_point(|&i| nodes_m[i] <= m);
        self.slopes[seg.min(self.slopes.len() - 1)]
    }
}

/// Greatest convex minorant of a piecewise-linear function through `nodes`
/// `(m, value)` with strictly increasing `m`.
pub fn lower_convex_envelope(nodes: &[(f64, f64)]) -> Result<EnvelopeResult> {
    if nodes.len() < 2 {
        return Err(Error::InvalidInput("need at least two nodes".into()));
    }
    if let Some(i) = nodes.windows(2).position(|w| w[1].0 <= w[0].0) {
        return Err(Error::NotMonotone(i + 1));
    }
    let mut hull: Vec<usize> = Vec::with_capacity(nodes.len());
    for (i, &(bm, bv)) in nodes.iter().enumerate() {
        while hull.len() >= 2 {
            let (om, ov) = nodes[hull[hull.len() - 2]];
            let (am, av) = nodes[hull[hull.len() - 1]];
            let cross = (am - om) * (bv - ov) - (av - ov) * (bm - om);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let slopes = hull
        .windows(2)
        .map(|w| (nodes[w[1]].1 - nodes[w[0]].1) / (nodes[w[1]].0 - nodes[w[0]].0))
        .collect();
    Ok(EnvelopeResult { indices: hull, slopes })
}

/// Projection onto the cone as the right derivative of the lower convex
/// envelope of the primitive `m -> int_0^m Y`.
pub fn project_cone_envelope(y: &WeightedVector) -> WeightedVector {
    let n = y.len();
    let mut nodes = Vec::with_capacity(n + 1);
    let (mut m, mut s) = (0.0, 0.0);
    nodes.push((0.0, 0.0));
    for (w, v) in y.weights.iter().zip(&y.values) {
        m += w;
        s += w * v;
        nodes.push((m, s));
    }
    let env = lower_convex_envelope(&nodes).expect("cumulative weights are increasing");
    let mut out = vec![0.0; n];
    for (seg, w) in env.indices.windows(2).enumerate() {
        out[w[0]..w[1]].fill(env.slopes[seg]);
    }
    y.with_values(out)
}

fn check_blocks(len: usize, blocks: &BlockStructure) -> Result<()> {
    if blocks.n_members() != len {
        return Err(Error::InvalidInput(format!(
            "block structure covers {} members, vector has {len}",
            blocks.n_members()
        )));
    }
    Ok(())
}

/// Replaces each block by its weighted mean; identity on singleton blocks.
pub fn project_hx(u: &WeightedVector, blocks: &BlockStructure) -> Result<WeightedVector> {
    check_blocks(u.len(), blocks)?;
    let mut out = u.values.clone();
    for r in blocks.iter() {
        let w: f64 = u.weights[r.clone()].iter().sum();
        let s: f64 = u.weights[r.clone()].iter().zip(&u.values[r.clone()]).map(|(a, b)| a * b).sum();
        out[r].fill(s / w);
    }
    Ok(u.with_values(out))
}

/// Normal cone test at a configuration with the given flat blocks.
///
/// The running integral `Xi_i = sum_{j <= i} m_j w_j` must be nonnegative at
/// every node and vanish at every node that is not interior to a block.
/// Only node values are tested; between nodes `Xi` is linear.
pub fn normal_cone_member(w: &WeightedVector, blocks: &BlockStructure) -> Result<bool> {
    check_blocks(w.len(), blocks)?;
    let mut xi = 0.0;
    let mut boundary = blocks.bounds()[1..].iter().peekable();
    for (i, (m, v)) in w.weights.iter().zip(&w.values).enumerate() {
        xi += m * v;
        if xi < -EPS_XI {
            return Ok(false);
        }
        if boundary.peek() == Some(&&(i + 1)) {
            boundary.next();
            if xi.abs() > EPS_XI {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Projection onto the tangent cone at a configuration with the given flat
/// blocks: isotonic regression inside each block, identity elsewhere.
pub fn project_tangent_cone(u: &WeightedVector, blocks: &BlockStructure) -> Result<WeightedVector> {
    check_blocks(u.len(), blocks)?;
    let mut out = u.values.clone();
    for r in blocks.iter().filter(|r| r.len() > 1) {
        let (fit, _) = pav(&u.weights[r.clone()], &u.values[r.clone()]);
        out[r].copy_from_slice(&fit);
    }
    Ok(u.with_values(out))
}

/// Smallest Oleinik chord gap of a lump moving at `speed` whose members carry
/// prescribed velocities `values`: the minimum over interior breakpoints of
/// `prefix mean - speed` and `speed - suffix mean`. Nonnegative iff the lump
/// is entropy admissible; `+inf` for a single member.
pub fn oleinik_margin(weights: &[f64], values: &[f64], speed: f64) -> f64 {
    let total_w: f64 = weights.iter().sum();
    let total_s: f64 = weights.iter().zip(values).map(|(a, b)| a * b).sum();
    let (mut pw, mut ps) = (0.0, 0.0);
    let mut margin = f64::INFINITY;
    for k in 0..values.len().saturating_sub(1) {
        pw += weights[k];
        ps += weights[k] * values[k];
        let left = ps / pw;
        let right = (total_s - ps) / (total_w - pw);
        margin = margin.min(left - speed).min(speed - right);
    }
    margin
}

/// Oleinik admissibility of a lump: every prefix mean is at least the lump
/// mean and every suffix mean at most it, up to `EPS_XI`. Ties pass.
pub fn oleinik_admissible(weights: &[f64], values: &[f64]) -> Result<bool> {
    if weights.len() < 2 || weights.len() != values.len() {
        return Err(Error::InvalidInput("a lump needs at least two members".into()));
    }
    let w: f64 = weights.iter().sum();
    let mean = weights.iter().zip(values).map(|(a, b)| a * b).sum::<f64>() / w;
    Ok(oleinik_margin(weights, values, mean) >= -EPS_XI)
}
