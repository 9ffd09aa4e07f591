//! Event-driven sticky particle dynamics with entropy-driven splitting.
//!
//! Particles are grouped into blocks sharing one position. Between events
//! every block follows the closed-form motion of [`Kinematics`], and every
//! member carries a prescribed velocity `u_j` (the velocity it would have
//! without the ordering constraint). Blocks are stored lazily: an anchor time
//! with the block state and member deviations `u_j - v_b` at that time.
//!
//! At a collision the colliding blocks form a cluster whose new velocities
//! are the isotonic regression of the members' prescribed velocities, which
//! is the projection onto the tangent cone of ordered configurations. A block
//! splits as soon as a prefix mean of its prescribed velocities drops below
//! the block velocity, so blocks always satisfy the Oleinik condition.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::Range;

use crate::cone::pav;
use crate::error::{Error, Result};
use crate::forces::{centred_coordinates, ForceModel, Kinematics};
use crate::measures::{cumulative, BlockStructure, MonotoneStepMap, Particles};
use crate::tol::{eps_x, EPS_T, EPS_V, ROOT_TOL};

/// Relative positional tolerance for treating two blocks as touching during
/// event processing; event times are only known to `ROOT_TOL`.
const CONTACT_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Collision,
    Split,
    Graze,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Collision => "collision",
            EventKind::Split => "split",
            EventKind::Graze => "graze",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    /// Member ranges of the participating blocks before the event.
    pub before: Vec<Range<usize>>,
    /// Member ranges of the resulting blocks.
    pub after: Vec<Range<usize>>,
    pub v_before: Vec<f64>,
    pub v_after: Vec<f64>,
    /// Kinetic energy of the participating mass before and after.
    pub kinetic_before: f64,
    pub kinetic_after: f64,
}

impl Event {
    /// All members taking part.
    pub fn members(&self) -> Range<usize> {
        self.before[0].start..self.before.last().unwrap().end
    }
}

/// Observable state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub masses: Vec<f64>,
    pub blocks: BlockStructure,
    /// Position of each block.
    pub x: Vec<f64>,
    /// Velocity of each block.
    pub v: Vec<f64>,
    /// Prescribed velocity of each member.
    pub u: Vec<f64>,
    /// True for the post-event states recorded at event times.
    pub at_event: bool,
}

impl Snapshot {
    fn per_member(&self, per_block: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.masses.len()];
        for (b, r) in self.blocks.iter().enumerate() {
            out[r].fill(per_block[b]);
        }
        out
    }

    pub fn member_positions(&self) -> Vec<f64> {
        self.per_member(&self.x)
    }

    pub fn member_velocities(&self) -> Vec<f64> {
        self.per_member(&self.v)
    }

    pub fn block_masses(&self) -> Vec<f64> {
        self.blocks.iter().map(|r| self.masses[r].iter().sum()).collect()
    }

    pub fn theta(&self) -> Vec<f64> {
        cumulative(&self.masses).expect("masses validated at construction")
    }

    /// The monotone rearrangement `X(t, .)`.
    pub fn step_map(&self) -> MonotoneStepMap {
        MonotoneStepMap::from_masses(&self.masses, &self.member_positions()).expect("positions are ordered")
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.block_masses().iter().zip(&self.v).map(|(m, v)| m * v * v).sum::<f64>()
    }

    pub fn momentum(&self) -> f64 {
        self.block_masses().iter().zip(&self.v).map(|(m, v)| m * v).sum()
    }

    pub fn centre_of_mass(&self) -> f64 {
        self.block_masses().iter().zip(&self.x).map(|(m, x)| m * x).sum()
    }
}

/// Output of [`simulate`].
#[derive(Debug, Clone)]
pub struct Run {
    pub events: Vec<Event>,
    /// Requested samples and post-event states in time order.
    pub samples: Vec<Snapshot>,
}

impl Run {
    /// Samples at the requested times only.
    pub fn requested(&self) -> impl Iterator<Item = &Snapshot> {
        self.samples.iter().filter(|s| !s.at_event)
    }
}

#[derive(Debug, Clone)]
struct Block {
    id: u64,
    range: Range<usize>,
    mass: f64,
    cbar: f64,
    tau: f64,
    x0: f64,
    v0: f64,
    /// Time of the merge that created this block, if any.
    merged_at: Option<f64>,
}

/// Simulator state: member data, blocks with their anchors, current time.
#[derive(Debug, Clone)]
pub struct ParticleState {
    kin: Kinematics,
    masses: Vec<f64>,
    theta: Vec<f64>,
    c: Vec<f64>,
    /// Member deviation `u_j - v_b` at the anchor of its block.
    w0: Vec<f64>,
    blocks: Vec<Block>,
    t: f64,
    next_id: u64,
}

enum Contact {
    Merge,
    Graze,
    Ignore,
}

impl ParticleState {
    /// State at `t = 0`. Coincident particles are resolved exactly as at a
    /// collision: approaching ones merge, and lumps violating the entropy
    /// condition split at once.
    pub fn new(initial: &Particles, model: &ForceModel) -> Result<Self> {
        let mut s = Self::unsettled(initial, model)?;
        s.settle(&mut Vec::new())?;
        Ok(s)
    }

    fn unsettled(initial: &Particles, model: &ForceModel) -> Result<Self> {
        let theta = initial.theta();
        let c = centred_coordinates(&theta);
        let n = initial.len();
        let xbar0: f64 = initial.masses.iter().zip(&initial.positions).map(|(m, x)| m * x).sum();
        let vbar0: f64 = initial.masses.iter().zip(&initial.velocities).map(|(m, v)| m * v).sum();
        let blocks = (0..n)
            .map(|j| Block {
                id: j as u64,
                range: j..j + 1,
                mass: initial.masses[j],
                cbar: c[j],
                tau: 0.0,
                x0: initial.positions[j],
                v0: initial.velocities[j],
                merged_at: None,
            })
            .collect();
        Ok(Self {
            kin: Kinematics::new(*model, xbar0, vbar0),
            masses: initial.masses.clone(),
            theta,
            c,
            w0: vec![0.0; n],
            blocks,
            t: 0.0,
            next_id: n as u64,
        })
    }

    fn settle(&mut self, events: &mut Vec<Event>) -> Result<()> {
        let candidates: Vec<usize> = (0..self.blocks.len().saturating_sub(1))
            .filter(|&i| self.touching(i, 0.0))
            .collect();
        self.process_batch(0.0, &candidates, events)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn model(&self) -> &ForceModel {
        self.kin.model()
    }

    pub fn kinematics(&self) -> &Kinematics {
        &self.kin
    }

    pub fn n_members(&self) -> usize {
        self.masses.len()
    }

    pub fn block_structure(&self) -> BlockStructure {
        let mut bounds: Vec<usize> = self.blocks.iter().map(|b| b.range.start).collect();
        bounds.push(self.masses.len());
        BlockStructure::from_bounds(bounds).expect("blocks partition the members")
    }

    fn block_xv(&self, b: &Block, t: f64) -> (f64, f64) {
        self.kin.advance(b.cbar, b.tau, b.x0, b.v0, t - b.tau)
    }

    fn member_u(&self, b: &Block, j: usize, v_block: f64, t: f64) -> f64 {
        v_block + self.kin.deviation(self.c[j] - b.cbar, self.w0[j], t - b.tau)
    }

    /// Prescribed velocity of member `j` at time `t >= time()`, assuming no
    /// event in between.
    pub fn prescribed_velocity(&self, j: usize, t: f64) -> f64 {
        let b = self.blocks.iter().find(|b| b.range.contains(&j)).expect("member index in range");
        let (_, v) = self.block_xv(b, t);
        self.member_u(b, j, v, t)
    }

    /// Observable state at `t >= time()`, assuming no event in between.
    pub fn snapshot_at(&self, t: f64, at_event: bool) -> Snapshot {
        let mut x = Vec::with_capacity(self.blocks.len());
        let mut v = Vec::with_capacity(self.blocks.len());
        let mut u = vec![0.0; self.masses.len()];
        for b in &self.blocks {
            let (mut xb, vb) = self.block_xv(b, t);
            // Blocks in contact can come out an ulp apart in the wrong order.
            if let Some(&prev) = x.last() {
                xb = f64::max(xb, prev);
            }
            x.push(xb);
            v.push(vb);
            for j in b.range.clone() {
                u[j] = self.member_u(b, j, vb, t);
            }
        }
        Snapshot { t, masses: self.masses.clone(), blocks: self.block_structure(), x, v, u, at_event }
    }

    pub fn snapshot(&self) -> Snapshot {
        self.snapshot_at(self.t, false)
    }

    fn new_block(&mut self, range: Range<usize>, t: f64, x: f64, v: f64, u: &[f64], merged_at: Option<f64>) -> Block {
        let (l, r) = (range.start, range.end);
        for (j, uj) in range.clone().zip(u) {
            self.w0[j] = uj - v;
        }
        self.next_id += 1;
        Block {
            id: self.next_id,
            mass: self.theta[r] - self.theta[l],
            cbar: self.theta[l] + self.theta[r] - 1.0,
            range,
            tau: t,
            x0: x,
            v0: v,
            merged_at,
        }
    }

    /// Re-anchors block `i` at `t` under a fresh id.
    fn reanchor(&mut self, i: usize, t: f64) {
        let b = self.blocks[i].clone();
        let (x, v) = self.block_xv(&b, t);
        let u: Vec<f64> = b.range.clone().map(|j| self.member_u(&b, j, v, t)).collect();
        let nb = self.new_block(b.range, t, x, v, &u, b.merged_at);
        self.blocks[i] = nb;
    }

    fn touching(&self, i: usize, t: f64) -> bool {
        let (xl, _) = self.block_xv(&self.blocks[i], t);
        let (xr, _) = self.block_xv(&self.blocks[i + 1], t);
        xr - xl <= CONTACT_REL * (1.0 + xl.abs().max(xr.abs())) + eps_x(xl)
    }

    fn classify(&self, i: usize, t: f64) -> Contact {
        let (l, r) = (&self.blocks[i], &self.blocks[i + 1]);
        let (xl, vl) = self.block_xv(l, t);
        let (xr, vr) = self.block_xv(r, t);
        let dv = vl - vr;
        if dv > EPS_V {
            return Contact::Merge;
        }
        if dv.abs() <= EPS_V {
            let al = self.kin.acceleration(l.cbar, t, xl, vl);
            let ar = self.kin.acceleration(r.cbar, t, xr, vr);
            return if al - ar > EPS_V { Contact::Merge } else { Contact::Graze };
        }
        Contact::Ignore
    }

    /// Replaces blocks `lo..=hi` by the pools of the isotonic regression of
    /// their members' prescribed velocities at `t`. Returns the event and the
    /// index range of the new blocks.
    fn pool_cluster(&mut self, lo: usize, hi: usize, t: f64) -> (Event, Range<usize>) {
        let old: Vec<Block> = self.blocks[lo..=hi].to_vec();
        let members = old[0].range.start..old.last().unwrap().range.end;
        let mut u = Vec::with_capacity(members.len());
        let (mut mx, mut mass) = (0.0, 0.0);
        let mut v_before = Vec::with_capacity(old.len());
        for b in &old {
            let (x, v) = self.block_xv(b, t);
            mx += b.mass * x;
            mass += b.mass;
            v_before.push(v);
            u.extend(b.range.clone().map(|j| self.member_u(b, j, v, t)));
        }
        let x = mx / mass;
        let weights = &self.masses[members.clone()];
        let (fitted, pools) = pav(weights, &u);
        // Pools whose velocities agree and whose accelerations close the gap
        // stay together (attractive tangential contact).
        let mut ranges: Vec<Range<usize>> = Vec::new();
        for r in pools.iter() {
            if let Some(prev) = ranges.last_mut() {
                let (pl, pr) = (members.start + prev.start, members.start + prev.end);
                let (ql, qr) = (members.start + r.start, members.start + r.end);
                let vp = mean(&self.masses[pl..pr], &u[prev.clone()]);
                let vq = mean(&self.masses[ql..qr], &u[r.clone()]);
                let ap = self.kin.acceleration(self.theta[pl] + self.theta[pr] - 1.0, t, x, vp);
                let aq = self.kin.acceleration(self.theta[ql] + self.theta[qr] - 1.0, t, x, vq);
                if vq - vp <= EPS_V && ap - aq > EPS_V {
                    prev.end = r.end;
                    continue;
                }
            }
            ranges.push(r);
        }
        let mut new_blocks = Vec::with_capacity(ranges.len());
        let mut v_after = Vec::with_capacity(ranges.len());
        for r in &ranges {
            let v = if ranges.len() == pools.len() {
                fitted[r.start]
            } else {
                mean(&self.masses[members.start + r.start..members.start + r.end], &u[r.clone()])
            };
            let abs = members.start + r.start..members.start + r.end;
            let merged = if r.len() > 1 { Some(t) } else { None };
            new_blocks.push(self.new_block(abs, t, x, v, &u[r.clone()], merged));
            v_after.push(v);
        }
        let ke = |bs: &[Block], vs: &[f64]| 0.5 * bs.iter().zip(vs).map(|(b, v)| b.mass * v * v).sum::<f64>();
        let event = Event {
            time: t,
            kind: EventKind::Collision,
            before: old.iter().map(|b| b.range.clone()).collect(),
            after: new_blocks.iter().map(|b| b.range.clone()).collect(),
            kinetic_before: ke(&old, &v_before),
            kinetic_after: ke(&new_blocks, &v_after),
            v_before,
            v_after,
        };
        let k = new_blocks.len();
        self.blocks.splice(lo..=hi, new_blocks);
        (event, lo..lo + k)
    }

    /// Time at which the prefix of block `b` ending before member `k` loses
    /// the Oleinik ordering; `None` if it never does.
    fn prefix_split_time(&self, b: &Block, k: usize) -> Option<f64> {
        let p = self.model().p();
        if p <= 0.0 {
            return None;
        }
        let (l, r) = (b.range.start, b.range.end);
        let w: f64 = (l..k).map(|j| self.masses[j] * self.w0[j]).sum();
        let cmag = (self.theta[k] - self.theta[l]) * (self.theta[r] - self.theta[k]);
        if w <= 0.0 {
            return Some(b.tau);
        }
        let g = self.model().gamma();
        let ratio = w / (p * cmag);
        let s = if g == 0.0 { ratio } else { (g * ratio).ln_1p() / g };
        Some(b.tau + s)
    }

    fn block_split_time(&self, b: &Block) -> f64 {
        (b.range.start + 1..b.range.end)
            .filter_map(|k| self.prefix_split_time(b, k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Splits block `i` at `t` at the given member boundaries.
    fn split_block(&mut self, i: usize, cuts: &[usize], t: f64) -> Result<Event> {
        let b = self.blocks[i].clone();
        let (x, v) = self.block_xv(&b, t);
        let u: Vec<f64> = b.range.clone().map(|j| self.member_u(&b, j, v, t)).collect();
        let mut bounds = vec![b.range.start];
        bounds.extend(cuts.iter().copied().filter(|&k| k > b.range.start && k < b.range.end));
        bounds.push(b.range.end);
        bounds.dedup();
        let mut subs = Vec::with_capacity(bounds.len() - 1);
        let mut vs = Vec::with_capacity(bounds.len() - 1);
        for w in bounds.windows(2) {
            let rel = w[0] - b.range.start..w[1] - b.range.start;
            let vk = mean(&self.masses[w[0]..w[1]], &u[rel.clone()]);
            if let Some(&prev) = vs.last() {
                if vk < prev - EPS_V {
                    return Err(Error::UnorderedSplit(i));
                }
            }
            vs.push(vk);
            subs.push(self.new_block(w[0]..w[1], t, x, vk, &u[rel], None));
        }
        let event = Event {
            time: t,
            kind: EventKind::Split,
            before: vec![b.range.clone()],
            after: subs.iter().map(|s| s.range.clone()).collect(),
            v_before: vec![v],
            kinetic_before: 0.5 * b.mass * v * v,
            kinetic_after: 0.5 * subs.iter().zip(&vs).map(|(s, v)| s.mass * v * v).sum::<f64>(),
            v_after: vs,
        };
        self.blocks.splice(i..=i, subs);
        Ok(event)
    }

    /// Resolves every event at `t`: collisions of the candidate pairs (left
    /// block indices), contact closure, then all due splits.
    fn process_batch(&mut self, t: f64, candidates: &[usize], events: &mut Vec<Event>) -> Result<()> {
        self.t = t;
        let nb = self.blocks.len();
        let mut flag = vec![false; nb.saturating_sub(1)];
        let mut touched = vec![false; nb];
        for &i in candidates {
            match self.classify(i, t) {
                Contact::Merge => flag[i] = true,
                kind => {
                    if matches!(kind, Contact::Graze) {
                        let (l, r) = (&self.blocks[i], &self.blocks[i + 1]);
                        let (_, vl) = self.block_xv(l, t);
                        let (_, vr) = self.block_xv(r, t);
                        let ke = 0.5 * (l.mass * vl * vl + r.mass * vr * vr);
                        events.push(Event {
                            time: t,
                            kind: EventKind::Graze,
                            before: vec![l.range.clone(), r.range.clone()],
                            after: vec![l.range.clone(), r.range.clone()],
                            v_before: vec![vl, vr],
                            v_after: vec![vl, vr],
                            kinetic_before: ke,
                            kinetic_after: ke,
                        });
                    }
                    touched[i] = true;
                    touched[i + 1] = true;
                }
            }
        }
        for i in (0..nb).filter(|&i| touched[i]) {
            self.reanchor(i, t);
        }

        // Clusters are maximal runs of flagged pairs; handle right to left so
        // indices to the left stay valid, and log left to right.
        let mut pooled = Vec::new();
        let mut i = flag.len();
        while i > 0 {
            i -= 1;
            if !flag[i] {
                continue;
            }
            let hi = i + 1;
            let mut lo = i;
            while lo > 0 && flag[lo - 1] {
                lo -= 1;
            }
            pooled.push(self.pool_cluster(lo, hi, t).0);
            i = lo;
        }
        events.extend(pooled.into_iter().rev());

        let n = self.masses.len();
        let mut guard = 0;
        while let Some(i) = (0..self.blocks.len().saturating_sub(1))
            .find(|&i| self.touching(i, t) && matches!(self.classify(i, t), Contact::Merge))
        {
            guard += 1;
            if guard > n * n + 10 {
                return Err(Error::Livelock { time: t, detail: "contact closure does not terminate".into() });
            }
            let (event, _) = self.pool_cluster(i, i + 1, t);
            events.push(event);
        }

        let mut guard = 0;
        loop {
            let due: Vec<(usize, Vec<usize>)> = self
                .blocks
                .iter()
                .enumerate()
                .filter(|(_, b)| b.range.len() > 1)
                .filter_map(|(i, b)| {
                    let cuts: Vec<usize> = (b.range.start + 1..b.range.end)
                        .filter(|&k| self.prefix_split_time(b, k).is_some_and(|s| s <= t + EPS_T))
                        .collect();
                    (!cuts.is_empty()).then_some((i, cuts))
                })
                .collect();
            if due.is_empty() {
                break;
            }
            guard += 1;
            if guard > n + 10 {
                return Err(Error::Livelock { time: t, detail: "splitting does not terminate".into() });
            }
            let mut splits = Vec::with_capacity(due.len());
            for (i, cuts) in due.into_iter().rev() {
                splits.push(self.split_block(i, &cuts, t)?);
            }
            events.extend(splits.into_iter().rev());
        }
        Ok(())
    }

    /// Earliest downward zero of the gap between blocks `i` and `i + 1`,
    /// strictly after `t + EPS_T` and no later than `horizon`.
    fn pair_collision_time(&self, i: usize, horizon: f64) -> Option<f64> {
        let t = self.t;
        let (l, r) = (&self.blocks[i], &self.blocks[i + 1]);
        let (xl, vl) = self.block_xv(l, t);
        let (xr, vr) = self.block_xv(r, t);
        let (dx, dv, dc) = (xr - xl, vr - vl, r.cbar - l.cbar);
        let h = horizon - t;
        if h <= EPS_T {
            return None;
        }
        let m = self.model();
        let s = if m.gamma() == 0.0 && m.q() == 0.0 {
            quadratic_downward_root(0.5 * m.p() * dc, dv, dx).filter(|&s| s <= h)
        } else {
            sampled_downward_root(&self.kin, dx, dv, dc, h)
        };
        s.map(|s| t + s)
    }
}

fn mean(weights: &[f64], values: &[f64]) -> f64 {
    let w: f64 = weights.iter().sum();
    weights.iter().zip(values).map(|(a, b)| a * b).sum::<f64>() / w
}

/// Smallest `s > EPS_T` at which `a s^2 + b s + c` crosses zero from above.
fn quadratic_downward_root(a: f64, b: f64, c: f64) -> Option<f64> {
    let root = if a == 0.0 {
        if b < 0.0 {
            Some(-c / b)
        } else {
            None
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            None
        } else {
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
            let (lo, hi) = (r1.min(r2), r1.max(r2));
            Some(if a > 0.0 { lo } else { hi })
        }
    };
    root.filter(|&s| s > EPS_T)
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    // Invariant: f(a) > 0 >= f(b).
    while b - a > ROOT_TOL {
        let m = 0.5 * (a + b);
        if f(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    b
}

/// Bracketing search for the first downward zero of the gap on `(EPS_T, h]`:
/// sign changes between samples, plus local minima located by bisection on
/// the gap rate. Sampling resolves a quarter oscillation period 25 times.
fn sampled_downward_root(kin: &Kinematics, dx: f64, dv: f64, dc: f64, h: f64) -> Option<f64> {
    let m = kin.model();
    let step = if m.q() == 0.0 { 0.01 } else { 0.01f64.min(PI / (50.0 * m.sigma())) };
    let gap = |s: f64| kin.gap(dx, dv, dc, s);
    // Beyond `settled` the gap can no longer reach zero.
    let offset = if m.q() > 0.0 { m.p() * dc / m.q() } else { 0.0 };
    let amplitude = if m.q() > 0.0 {
        let z0 = dx - offset;
        (z0 * z0 + ((dv + m.kappa() * z0) / m.sigma()).powi(2)).sqrt() * (1.0 + m.kappa() / m.sigma())
    } else {
        0.0
    };
    let settled = |s: f64, g: f64, gd: f64| {
        if m.q() > 0.0 {
            offset > 0.0 && m.kappa() > 0.0 && (-m.kappa() * s).exp() * amplitude < offset
        } else {
            // The gap rate is monotone in s with limit p dc / gamma.
            g > 0.0 && gd >= 0.0 && m.p() * dc >= 0.0
        }
    };
    let (mut a, (mut ga, mut gda)) = (0.0, gap(0.0));
    while a < h {
        let b = (a + step).min(h);
        let (gb, gdb) = gap(b);
        if ga > 0.0 && gb <= 0.0 {
            let s = bisect(|s| gap(s).0, a, b);
            if s > EPS_T {
                return Some(s);
            }
        } else if ga > 0.0 && gb > 0.0 && gda < 0.0 && gdb > 0.0 {
            // Local minimum inside (a, b).
            let (mut lo, mut hi) = (a, b);
            while hi - lo > ROOT_TOL {
                let mid = 0.5 * (lo + hi);
                if gap(mid).1 < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if gap(hi).0 <= 0.0 {
                let s = bisect(|s| gap(s).0, a, hi);
                if s > EPS_T {
                    return Some(s);
                }
            }
        }
        if settled(b, gb, gdb) {
            return None;
        }
        a = b;
        ga = gb;
        gda = gdb;
    }
    None
}

/// Event search with per-anchor caching, used by [`simulate`].
struct EventCache {
    pairs: HashMap<(u64, u64), f64>,
    splits: HashMap<u64, f64>,
}

impl EventCache {
    fn new() -> Self {
        Self { pairs: HashMap::new(), splits: HashMap::new() }
    }

    /// Per-pair collision times (infinite if none) and the earliest split.
    fn scan(&mut self, state: &ParticleState, horizon: f64) -> (Vec<f64>, f64) {
        let mut pair_times = Vec::with_capacity(state.blocks.len());
        for i in 0..state.blocks.len().saturating_sub(1) {
            let key = (state.blocks[i].id, state.blocks[i + 1].id);
            let t = *self
                .pairs
                .entry(key)
                .or_insert_with(|| state.pair_collision_time(i, horizon).unwrap_or(f64::INFINITY));
            pair_times.push(t);
        }
        let mut split = f64::INFINITY;
        for b in state.blocks.iter().filter(|b| b.range.len() > 1) {
            let t = *self.splits.entry(b.id).or_insert_with(|| state.block_split_time(b));
            split = split.min(t);
        }
        (pair_times, split)
    }

    fn prune(&mut self, state: &ParticleState) {
        if self.pairs.len() > 8 * state.blocks.len() + 64 {
            let live: std::collections::HashSet<u64> = state.blocks.iter().map(|b| b.id).collect();
            self.pairs.retain(|k, _| live.contains(&k.0) && live.contains(&k.1));
            self.splits.retain(|k, _| live.contains(k));
        }
    }
}

/// Advances to `t_target`, failing if an event would occur before it. An
/// event at `t_target` itself is left for the caller to process.
pub fn free_flight(state: &ParticleState, t_target: f64) -> Result<ParticleState> {
    if t_target < state.t {
        return Err(Error::InvalidInput("cannot fly backwards in time".into()));
    }
    let early = next_collision(state, t_target)
        .map(|(t, _)| t)
        .into_iter()
        .chain(next_split(state).map(|(t, _, _)| t))
        .find(|&t| t < t_target - EPS_T);
    if let Some(t) = early {
        return Err(Error::EventInInterval(t));
    }
    let mut s = state.clone();
    for i in 0..s.blocks.len() {
        s.reanchor(i, t_target);
    }
    s.t = t_target;
    Ok(s)
}

/// Earliest collision up to `horizon`: time and left block index.
pub fn next_collision(state: &ParticleState, horizon: f64) -> Option<(f64, usize)> {
    (0..state.blocks.len().saturating_sub(1))
        .filter_map(|i| state.pair_collision_time(i, horizon).map(|t| (t, i)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// Merges block `left` with its right neighbour at the current time. The
/// merged velocities are the isotonic regression of the members' prescribed
/// velocities, so the result may consist of more than one block.
pub fn merge(state: &ParticleState, left: usize) -> Result<ParticleState> {
    if left + 1 >= state.blocks.len() {
        return Err(Error::InvalidInput(format!("block {left} has no right neighbour")));
    }
    if !state.touching(left, state.t) {
        return Err(Error::NotInContact(left, left + 1));
    }
    let (_, vl) = state.block_xv(&state.blocks[left], state.t);
    let (_, vr) = state.block_xv(&state.blocks[left + 1], state.t);
    if vl < vr - EPS_V {
        return Err(Error::InvalidInput("blocks are moving apart".into()));
    }
    let mut s = state.clone();
    s.pool_cluster(left, left + 1, s.t);
    Ok(s)
}

/// Earliest split: time, block index and member boundaries at which the
/// block breaks.
pub fn next_split(state: &ParticleState) -> Option<(f64, usize, Vec<usize>)> {
    let (i, t) = state
        .blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| b.range.len() > 1)
        .map(|(i, b)| (i, state.block_split_time(b)))
        .filter(|(_, t)| t.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    let b = &state.blocks[i];
    let cuts = (b.range.start + 1..b.range.end)
        .filter(|&k| state.prefix_split_time(b, k).is_some_and(|s| s <= t + EPS_T))
        .collect();
    Some((t, i, cuts))
}

/// Splits `block` at the given member boundaries at the current time.
pub fn split(state: &ParticleState, block: usize, breakpoints: &[usize]) -> Result<ParticleState> {
    if block >= state.blocks.len() {
        return Err(Error::InvalidInput(format!("no block {block}")));
    }
    let mut s = state.clone();
    s.split_block(block, breakpoints, s.t)?;
    Ok(s)
}

fn check_times(t_end: f64, sample_times: &[f64]) -> Result<Vec<f64>> {
    if !t_end.is_finite() || t_end < 0.0 {
        return Err(Error::InvalidInput("t_end must be finite and nonnegative".into()));
    }
    if sample_times.iter().any(|&s| !(0.0..=t_end).contains(&s)) {
        return Err(Error::InvalidInput("sample times must lie in [0, t_end]".into()));
    }
    let mut times = sample_times.to_vec();
    times.sort_by(f64::total_cmp);
    Ok(times)
}

fn event_tail(events: &[Event]) -> String {
    events
        .iter()
        .rev()
        .take(6)
        .rev()
        .map(|e| format!("{} at t={:.12} members {:?}", e.kind.as_str(), e.time, e.members()))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Runs the entropic (sticky and splitting) dynamics up to `t_end`.
pub fn simulate(initial: &Particles, model: &ForceModel, t_end: f64, sample_times: &[f64]) -> Result<Run> {
    let times = check_times(t_end, sample_times)?;
    let n = initial.len();
    let mut state = ParticleState::unsettled(initial, model)?;
    let mut events = Vec::new();
    state.settle(&mut events)?;
    let mut samples = Vec::with_capacity(times.len() + events.len());
    let mut next_sample = 0;
    let mut cache = EventCache::new();
    let mut instant_splits = 0usize;
    let event_cap = 10 * n * n + 100;

    loop {
        let (pair_times, split_time) = cache.scan(&state, t_end);
        let t_col = pair_times.iter().copied().fold(f64::INFINITY, f64::min);
        let t_ev = t_col.min(split_time);
        if !(t_ev <= t_end) {
            break;
        }
        while next_sample < times.len() && times[next_sample] < t_ev {
            samples.push(state.snapshot_at(times[next_sample], false));
            next_sample += 1;
        }
        let candidates: Vec<usize> = (0..pair_times.len()).filter(|&i| pair_times[i] <= t_ev + EPS_T).collect();
        let merged_at: HashMap<Range<usize>, f64> =
            state.blocks.iter().filter_map(|b| b.merged_at.map(|t| (b.range.clone(), t))).collect();
        let before = events.len();
        state.process_batch(t_ev, &candidates, &mut events)?;
        for e in &events[before..] {
            if e.kind == EventKind::Split {
                let created = merged_at.get(&e.before[0]).copied().or_else(|| {
                    // A block merged earlier in this same batch.
                    events[before..].iter().any(|c| c.kind == EventKind::Collision && c.after.contains(&e.before[0])).then_some(t_ev)
                });
                if created.is_some_and(|tm| t_ev - tm <= EPS_T) {
                    instant_splits += 1;
                }
            }
        }
        if events.len() > event_cap && 2 * instant_splits > events.len() {
            return Err(Error::Livelock {
                time: t_ev,
                detail: format!("{} events, {instant_splits} immediate re-splits; last: {}", events.len(), event_tail(&events)),
            });
        }
        samples.push(state.snapshot_at(t_ev, true));
        cache.prune(&state);
    }
    while next_sample < times.len() {
        samples.push(state.snapshot_at(times[next_sample], false));
        next_sample += 1;
    }
    Ok(Run { events, samples })
}

/// The globally projected evolution: at each sample time, the isotonic
/// regression of the unconstrained trajectories `Y_j(t)`. Block velocities
/// are pool means of `dY_j/dt`, which also serve as prescribed velocities.
pub fn simulate_projected(initial: &Particles, model: &ForceModel, t_end: f64, sample_times: &[f64]) -> Result<Vec<Snapshot>> {
    let times = check_times(t_end, sample_times)?;
    let state = ParticleState::unsettled(initial, model)?;
    let masses = &initial.masses;
    Ok(times
        .iter()
        .map(|&t| {
            let (y, yd): (Vec<f64>, Vec<f64>) = (0..initial.len())
                .map(|j| state.kin.advance(state.c[j], 0.0, initial.positions[j], initial.velocities[j], t))
                .unzip();
            let (_, pools) = pav(masses, &y);
            let x = pools.iter().map(|r| mean(&masses[r.clone()], &y[r])).collect();
            let v = pools.iter().map(|r| mean(&masses[r.clone()], &yd[r])).collect();
            Snapshot { t, masses: masses.clone(), blocks: pools, x, v, u: yd, at_event: false }
        })
        .collect())
}
