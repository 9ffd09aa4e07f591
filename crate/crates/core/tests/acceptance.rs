//! Acceptance suite: one PASS/FAIL line per criterion, each with its
//! tolerance and runtime budget. Runs without the libtest harness so the
//! lines always reach the output.

// Negated comparisons are deliberate: NaN must fail range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Block lists with a single range are meant as such.
#![allow(clippy::single_range_in_vec_init)]

mod common;

use std::f64::consts::{PI, SQRT_2};
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stickyflow::claw::{self, FrontTrajectory};
use stickyflow::cone::{self, WeightedVector};
use stickyflow::diagnostics;
use stickyflow::dynamics::{simulate, simulate_projected, EventKind, Snapshot};
use stickyflow::forces::{mean_dynamics, FluxFunction, ForceModel};
use stickyflow::measures::{lp_to_quantile, positive_part_gap, w1_quantile, w2_distance, MonotoneStepMap, Particles};
use stickyflow::oracles;

use common::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn grid(t0: f64, t1: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| if i == steps { t1 } else { t0 + (t1 - t0) * i as f64 / steps as f64 }).collect()
}

fn at(samples: &[Snapshot], t: f64) -> &Snapshot {
    samples.iter().find(|s| !s.at_event && (s.t - t).abs() < 1e-12).expect("requested sample")
}

fn two_particle() -> Outcome {
    let p = Particles::new(vec![0.5, 0.5], vec![0.0, 1.0], vec![2.0, 0.0]).unwrap();
    let model = ForceModel::euler_poisson(-2.0, 0.0).unwrap();
    let times = grid(0.0, 5.0, 5000);
    let run = simulate(&p, &model, 5.0, &times).map_err(e2s)?;
    let events: Vec<_> = run.events.iter().filter(|e| e.kind != EventKind::Graze).collect();
    ensure!(
        events.len() == 2 && events[0].kind == EventKind::Collision && events[1].kind == EventKind::Split,
        "unexpected events {:?}",
        events.iter().map(|e| (e.kind, e.time)).collect::<Vec<_>>()
    );
    let (tc, ts) = (events[0].time, events[1].time);
    ensure!((tc - (2.0 - SQRT_2)).abs() <= 1e-9, "collision at {tc}");
    ensure!((ts - 2.0).abs() <= 1e-9, "split at {ts}");

    let mut err: f64 = 0.0;
    for s in run.requested() {
        let o = oracles::two_particle(s.t).unwrap();
        let (x, v) = (s.member_positions(), s.member_velocities());
        for (a, b) in x.iter().chain(&v).zip(o) {
            err = err.max((a - b).abs());
        }
    }
    ensure!(err <= 1e-9, "trajectory error {err:.3e}");

    let proj = simulate_projected(&p, &model, 5.0, &times).map_err(e2s)?;
    let mut perr: f64 = 0.0;
    for s in &proj {
        let pooled = (2.0 - SQRT_2..2.0 + SQRT_2).contains(&s.t);
        ensure!((s.blocks.len() == 1) == pooled, "projected pooling wrong at t={}", s.t);
        let o = oracles::two_particle_projected(s.t).unwrap();
        for (a, b) in s.member_positions().iter().zip(&o[..2]) {
            perr = perr.max((a - b).abs());
        }
    }
    ensure!(perr <= 1e-9, "projected trajectory error {perr:.3e}");

    let flux = FluxFunction::discrete(&model, &p.masses, &p.positions, &p.velocities).map_err(e2s)?;
    let report = claw::validate_entropy(&FrontTrajectory::from_snapshots(&proj), |_| Ok(flux.clone())).map_err(e2s)?;
    let mut flagged = 0;
    for s in &proj {
        let fails = report.rows.iter().any(|r| r.t == s.t && !r.pass);
        let expect_fail = s.t > 2.0 && s.t < 2.0 + SQRT_2;
        ensure!(fails == expect_fail, "projected validation at t={} gave failure={fails}", s.t);
        flagged += fails as usize;
    }
    let sticky = claw::validate_run(&model, &p.masses, &p.positions, &p.velocities, &run.samples).map_err(e2s)?;
    ensure!(sticky.all_pass(), "sticky run fails validation");
    Ok(format!(
        "collision {:.1e} off, split {:.1e} off, max error {err:.1e}, projected {perr:.1e}, {flagged} projected samples flagged in (2, 2+sqrt2)",
        (tc - (2.0 - SQRT_2)).abs(),
        (ts - 2.0).abs()
    ))
}

fn bgsw() -> Outcome {
    let n = 256;
    let p = midpoint_particles(n, |m| m - 0.5, |m| if m < 0.5 { 1.0 } else { -1.0 });
    let model = ForceModel::euler_poisson(-2.0, 0.0).unwrap();
    let checks = [0.5, 1.0, 1.5, 2.0, 3.0];
    let mut times = grid(0.0, 3.0, 300);
    times.extend(checks);
    let run = simulate(&p, &model, 3.0, &times).map_err(e2s)?;

    let mut worst: f64 = 0.0;
    for t in checks {
        let w2 = lp_to_quantile(&at(&run.samples, t).step_map(), |m| oracles::bgsw_x(t, m).unwrap(), 2, 8);
        ensure!(w2 <= 2.0 / n as f64, "W2 {w2:.3e} at t={t}");
        worst = worst.max(w2);
    }
    let s1 = at(&run.samples, 1.0);
    ensure!(s1.blocks.len() == 1 && s1.x[0].abs() <= 1e-9, "not concentrated at t=1: {} blocks", s1.blocks.len());
    let kin2 = 2.0 * at(&run.samples, 2.0).kinetic_energy();
    ensure!((kin2 - 1.0 / 6.0).abs() <= 5e-3, "int V^2 at t=2 is {kin2}");
    let mut prev = f64::INFINITY;
    for s in &run.samples {
        let e = diagnostics::energy(s, &model).total;
        ensure!(e <= prev + 1e-12, "energy rises to {e} at t={}", s.t);
        prev = e;
    }
    let proj = simulate_projected(&p, &model, 3.0, &checks).map_err(e2s)?;
    let mut perr: f64 = 0.0;
    for s in &proj {
        for (x, m) in s.member_positions().iter().zip(midpoints(n)) {
            perr = perr.max((x - oracles::bgsw_projected(s.t, m).unwrap()).abs());
        }
    }
    ensure!(perr <= 1e-9, "projected error {perr:.3e}");
    Ok(format!(
        "max W2 {worst:.2e} (bound {:.2e}), int V^2(2) = {kin2:.5}, projected error {perr:.1e}, {} events",
        2.0 / n as f64,
        run.events.len()
    ))
}

/// An atom of `k` members on `[ml, mr]` at the origin, with single background
/// particles far to either side.
fn riemann_particles(ml: f64, mr: f64, v0: f64, k: usize) -> (Particles, std::ops::Range<usize>) {
    let (mut m, mut x, mut v) = (vec![], vec![], vec![]);
    if ml > 0.0 {
        m.push(ml);
        x.push(-50.0);
        v.push(0.0);
    }
    let start = m.len();
    for _ in 0..k {
        m.push((mr - ml) / k as f64);
        x.push(0.0);
        v.push(v0);
    }
    let atom = start..m.len();
    if mr < 1.0 {
        m.push(1.0 - mr);
        x.push(50.0);
        v.push(0.0);
    }
    (Particles::new(m, x, v).unwrap(), atom)
}

fn riemann() -> Outcome {
    let times = grid(0.0, 3.0, 30);
    let mut shock_err: f64 = 0.0;
    for (alpha, ml, mr, v0) in [(1.0, 0.0, 1.0, 0.3), (2.0, 0.2, 0.7, -0.5), (0.0, 0.3, 0.6, 1.2), (0.5, 0.6, 0.9, 0.0)] {
        let (p, atom) = riemann_particles(ml, mr, v0, 8);
        let model = ForceModel::euler_poisson(alpha, 0.0).unwrap();
        let wave = claw::riemann_solve(&model, ml, mr, v0).map_err(e2s)?;
        let run = simulate(&p, &model, 3.0, &times).map_err(e2s)?;
        for s in run.requested() {
            let x = s.member_positions();
            let spread = x[atom.end - 1] - x[atom.start];
            ensure!(spread <= 1e-12, "atom spread to {spread:.3e} at t={} (alpha={alpha})", s.t);
            let exact = v0 * s.t - 0.25 * alpha * s.t * s.t * (ml + mr - 1.0);
            shock_err = shock_err.max((x[atom.start] - exact).abs());
            shock_err = shock_err.max((wave.position(s.t, ml).map_err(e2s)? - exact).abs());
        }
    }
    ensure!(shock_err <= 1e-12, "shock trajectory error {shock_err:.3e}");

    let n = 512;
    let mut worst: f64 = 0.0;
    for (alpha, ml, mr, v0) in [(-2.0, 0.0, 1.0, 0.0), (-1.0, 0.25, 0.75, 0.5), (-3.0, 0.1, 0.4, -1.0)] {
        let (p, atom) = riemann_particles(ml, mr, v0, n);
        let model = ForceModel::euler_poisson(alpha, 0.0).unwrap();
        let run = simulate(&p, &model, 1.0, &[1.0]).map_err(e2s)?;
        let s = at(&run.samples, 1.0);
        let x = s.member_positions();
        let theta = s.theta();
        let sim_m = |y: f64| theta[x.partition_point(|&xi| xi <= y)];
        let oracle = |y: f64| oracles::dirac_riemann(alpha, ml, mr, v0, 1.0, y).unwrap();
        let (lo, hi) = (x[atom.start] - 1.0, x[atom.end - 1] + 1.0);
        let cells = 400_000;
        let h = (hi - lo) / cells as f64;
        let w1: f64 = (0..cells).map(|i| (sim_m(lo + (i as f64 + 0.5) * h) - oracle(lo + (i as f64 + 0.5) * h)).abs() * h).sum();
        ensure!(w1 <= 3.0 / n as f64, "rarefaction W1 {w1:.3e} (alpha={alpha})");
        worst = worst.max(w1);
        let wave = claw::riemann_solve(&model, ml, mr, v0).map_err(e2s)?;
        for i in 0..=100 {
            let y = lo + (hi - lo) * i as f64 / 100.0;
            let d = (wave.distribution(1.0, y).map_err(e2s)? - oracle(y)).abs();
            ensure!(d <= 1e-12, "solver and closed form differ by {d:.3e} at x={y}");
        }
    }
    Ok(format!("shock error {shock_err:.1e}, rarefaction max W1 {worst:.2e} (bound {:.2e})", 3.0 / n as f64))
}

fn confined_linear() -> Outcome {
    let n = 16;
    let mut checked = 0;
    for lambda in [0.4, 0.5, 0.577, 0.6, 0.7] {
        for kappa in [0.0, 0.05] {
            let cl = oracles::ConfinedLinear::new(lambda, kappa).map_err(e2s)?;
            let period = 2.0 * PI / cl.sigma;
            let c_min = grid(0.0, period, 20_000).into_iter().map(|t| cl.c(t)).fold(f64::INFINITY, f64::min);
            ensure!((c_min < 0.0) == cl.concentrates(), "predicate disagrees with min c = {c_min} at lambda={lambda}, kappa={kappa}");
            let p = midpoint_particles(n, |m| m - 0.5, |m| -(m - 0.5));
            let run = simulate(&p, &cl.model(), period, &[]).map_err(e2s)?;
            let collided = run.events.iter().any(|e| e.kind == EventKind::Collision);
            ensure!(collided == cl.concentrates(), "simulation collided={collided} at lambda={lambda}, kappa={kappa}");
            checked += 1;
        }
    }

    let cl = oracles::ConfinedLinear::new(0.5, 0.0).unwrap();
    let (tau0, tau1) = (cl.tau0().unwrap(), cl.tau1().unwrap());
    ensure!((0.5 * tau0 - 0.6f64.asin()).abs() <= 1e-12, "tau0 = {tau0}");
    let p = midpoint_particles(n, |m| m - 0.5, |m| -(m - 0.5));
    let times = grid(0.0, 20.0, 2000);
    let run = simulate(&p, &cl.model(), 20.0, &times).map_err(e2s)?;
    let first_collision = run.events.iter().find(|e| e.kind == EventKind::Collision).unwrap();
    let first_split = run.events.iter().find(|e| e.kind == EventKind::Split).unwrap();
    ensure!(first_collision.after == vec![0..n], "first collision is not total");
    ensure!((first_collision.time - tau0).abs() <= 1e-8, "first collision at {} vs {tau0}", first_collision.time);
    ensure!((first_split.time - tau1).abs() <= 1e-8, "release at {} vs {tau1}", first_split.time);
    ensure!(first_split.after.len() == n, "release is not total");
    let mut err: f64 = 0.0;
    for s in run.requested() {
        for (x, m) in s.member_positions().iter().zip(midpoints(n)) {
            err = err.max((x - cl.x(s.t, m).unwrap()).abs());
        }
    }
    ensure!(err <= 1e-8, "trajectory error {err:.3e}");
    Ok(format!(
        "{checked} predicate cases agree; collision {:.1e} off tau0 = {tau0:.7}, release {:.1e} off tau1 = {tau1:.7}, trajectory error {err:.1e} on [0, 20]",
        (first_collision.time - tau0).abs(),
        (first_split.time - tau1).abs()
    ))
}

/// Event times of the four-particle scenario, pinned from a run verified
/// against the event narrative and the closed forms below.
const FOUR_PARTICLE_TIMES: [f64; 6] = [
    0.1262709489610279,
    0.3968833427032223,
    3.2223803754350167,
    7.487095812492045,
    12.437820580729543,
    13.591665141304786,
];

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f(lo) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First four event times from the free trajectories of the outer and inner
/// pairs and the decay of their prescribed velocities while stuck.
fn four_particle_closed_form(lambda: f64, kappa: f64) -> [f64; 4] {
    let sigma = (lambda * lambda - kappa * kappa).sqrt();
    let free = |c: f64, t: f64| {
        let (x0, v0) = (c / 2.0, -c.signum());
        let (e, (sn, cs)) = ((-kappa * t).exp(), (sigma * t).sin_cos());
        let x = x0 * (2.0 - e * (cs + kappa / sigma * sn)) + v0 * e * sn / sigma;
        let v = x0 * e * lambda * lambda / sigma * sn + v0 * e * (cs - kappa / sigma * sn);
        (x, v)
    };
    let gamma = 2.0 * kappa;
    let release = |c: f64, t0: f64| t0 + (gamma * free(c, t0).1.abs() / (lambda * lambda * c.abs())).ln_1p() / gamma;
    let inner = bisect(|t| free(0.25, t).0, 0.0, 0.3);
    let outer = bisect(|t| free(0.75, t).0, 0.2, 1.0);
    [inner, outer, release(0.75, outer), release(0.25, inner)]
}

fn four_particle() -> Outcome {
    let (lambda, kappa) = (0.6, 0.05);
    let model = ForceModel::confined(lambda, kappa, 0.0).unwrap();
    let c = [-0.75, -0.25, 0.25, 0.75];
    let p = Particles::new(vec![0.25; 4], c.iter().map(|c| c / 2.0).collect(), c.iter().map(|c: &f64| -c.signum()).collect()).unwrap();
    let t_end = 40.0 / kappa;
    let mut times = grid(0.0, 60.0, 600);
    times.push(t_end);
    let run = simulate(&p, &model, t_end, &times).map_err(e2s)?;
    let events: Vec<_> = run.events.iter().filter(|e| e.kind != EventKind::Graze).collect();

    // Group simultaneous events.
    let mut groups: Vec<(f64, Vec<&stickyflow::dynamics::Event>)> = Vec::new();
    for e in &events {
        match groups.last_mut() {
            Some((t, g)) if (e.time - *t).abs() <= 1e-9 => g.push(e),
            _ => groups.push((e.time, vec![e])),
        }
    }
    let summary: Vec<String> = groups
        .iter()
        .map(|(t, g)| format!("{t:.16}:{}", g.iter().map(|e| e.kind.as_str()).collect::<Vec<_>>().join("+")))
        .collect();
    use EventKind::{Collision as C, Split as S};
    // Kinds and resulting blocks: the inner pair sticks, the outer pair joins,
    // the outer members leave, the inner pair separates, then the pairs on
    // each side collide and separate.
    let expected: [(&[EventKind], &[std::ops::Range<usize>]); 6] = [
        (&[C], &[1..3]),
        (&[C], &[0..4]),
        (&[S], &[0..1, 1..3, 3..4]),
        (&[S], &[1..2, 2..3]),
        (&[C, C], &[0..2, 2..4]),
        (&[S, S], &[0..1, 1..2, 2..3, 3..4]),
    ];
    ensure!(groups.len() == expected.len(), "event groups {summary:?}");
    for ((t, g), (kinds, after)) in groups.iter().zip(expected) {
        let got: Vec<EventKind> = g.iter().map(|e| e.kind).collect();
        let ranges: Vec<_> = g.iter().flat_map(|e| e.after.iter().cloned()).collect();
        ensure!(got == kinds && ranges == after, "events at {t}: {got:?} giving {ranges:?}");
    }
    let pinned = FOUR_PARTICLE_TIMES;
    let mut pin_err: f64 = 0.0;
    for ((t, _), p) in groups.iter().zip(pinned) {
        pin_err = pin_err.max((t - p).abs());
    }
    ensure!(pin_err <= 1e-9, "event times {summary:?} differ from pinned values");
    let closed = four_particle_closed_form(lambda, kappa);
    let mut closed_err: f64 = 0.0;
    for ((t, _), c) in groups.iter().zip(closed) {
        closed_err = closed_err.max((t - c).abs());
    }
    ensure!(closed_err <= 1e-9, "event times {summary:?} differ from closed forms {closed:?}");
    for e in &events {
        match e.kind {
            EventKind::Collision => ensure!(e.kinetic_after < e.kinetic_before, "collision at {} keeps energy", e.time),
            _ => ensure!((e.kinetic_after - e.kinetic_before).abs() <= 1e-10, "split at {} changes energy", e.time),
        }
    }
    let mut prev = f64::INFINITY;
    for s in &run.samples {
        let e = diagnostics::energy(s, &model).total;
        ensure!(e <= prev + 1e-12, "energy rises at t={}", s.t);
        prev = e;
    }
    let steady = oracles::steady_state(&model, 0.0, 0.0).map_err(e2s)?;
    let last = at(&run.samples, t_end);
    let target = MonotoneStepMap::from_masses(&last.masses, &steady.discrete(&last.theta())).map_err(e2s)?;
    let w2 = w2_distance(&last.step_map(), &target);
    ensure!(w2 <= 1e-3, "W2 to steady state {w2:.3e} at t={t_end}");
    Ok(format!(
        "events {}; first four within {closed_err:.1e} of closed forms; W2 to steady state at t={t_end} is {w2:.1e}",
        summary.join(", ")
    ))
}

fn equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut rows, mut events) = (0usize, 0usize);
    let (mut worst_rh, mut worst_margin) = (0.0f64, f64::INFINITY);
    for i in 0..200 {
        let sc = random_scenario(&mut rng, i);
        let p = &sc.particles;
        let run = simulate(p, &sc.model, sc.t_end, &sc.samples).map_err(|e| format!("scenario {i}: {e}"))?;
        events += run.events.len();
        let report = claw::validate_run(&sc.model, &p.masses, &p.positions, &p.velocities, &run.samples)
            .map_err(|e| format!("scenario {i}: {e}"))?;
        if let Some(f) = report.failures().next() {
            return Err(format!("scenario {i} ({:?}): front fails at t={}: {f:?}", sc.model.variant(), f.t));
        }
        rows += report.rows.len();
        worst_rh = worst_rh.max(report.max_rh_residual());
        worst_margin = worst_margin.min(report.min_oleinik_margin());
        for s in &run.samples {
            let v = s.member_velocities();
            let w: Vec<f64> = s.u.iter().zip(&v).map(|(u, v)| u - v).collect();
            let w = WeightedVector::new(s.masses.clone(), w).map_err(e2s)?;
            ensure!(cone::normal_cone_member(&w, &s.blocks).map_err(e2s)?, "scenario {i}: U - V not normal at t={}", s.t);
        }
    }
    Ok(format!(
        "200 scenarios, {events} events, {rows} front checks; max RH residual {worst_rh:.1e}, min Oleinik margin {worst_margin:.1e}"
    ))
}

/// Best nondecreasing fit over all partitions into consecutive blocks.
fn brute_force_projection(w: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut fit = vec![0.0; n];
        let mut start = 0;
        for end in 1..=n {
            if end == n || mask & (1 << (end - 1)) != 0 {
                let mass: f64 = w[start..end].iter().sum();
                let mean = w[start..end].iter().zip(&y[start..end]).map(|(a, b)| a * b).sum::<f64>() / mass;
                fit[start..end].fill(mean);
                start = end;
            }
        }
        if fit.windows(2).any(|p| p[1] < p[0]) {
            continue;
        }
        let d: f64 = w.iter().zip(y).zip(&fit).map(|((w, y), f)| w * (y - f).powi(2)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, fit));
        }
    }
    best.unwrap().1
}

fn cone_kernel() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_pair, mut worst_brute, mut worst_vi) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for i in 0..10_000 {
        let n = if i % 10 == 0 { rng.gen_range(1..=6) } else { rng.gen_range(1..=64) };
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let v = WeightedVector::new(w.clone(), y.clone()).map_err(e2s)?;
        let a = cone::project_cone(&v);
        let b = cone::project_cone_envelope(&v);
        let d = a.values().iter().zip(b.values()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        ensure!(d <= 1e-12, "PAV and envelope differ by {d:.3e}");
        worst_pair = worst_pair.max(d);
        if n <= 6 {
            let bf = brute_force_projection(&w, &y);
            let d = a.values().iter().zip(&bf).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            ensure!(d <= 1e-12, "brute force differs by {d:.3e} for n={n}");
            worst_brute = worst_brute.max(d);
        }
        let again = cone::project_cone(&a);
        ensure!(again.values() == a.values(), "projection not idempotent");
        let blocks = cone::pav(&w, &y).1;
        ensure!(cone::pav(&w, a.values()).1 == blocks, "re-projection changes the pooled blocks");
        let r: Vec<f64> = y.iter().zip(a.values()).map(|(y, p)| y - p).collect();
        let rp = a.dot(&r);
        ensure!(rp.abs() <= 1e-12, "residual not orthogonal to projection: {rp:.3e}");
        for _ in 0..4 {
            let mut z: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            z.sort_by(f64::total_cmp);
            let vi: f64 = w.iter().zip(&r).zip(z.iter().zip(a.values())).map(|((w, r), (z, p))| w * r * (z - p)).sum();
            ensure!(vi <= 1e-12, "variational inequality violated: {vi:.3e}");
            worst_vi = worst_vi.max(vi);
        }
    }
    Ok(format!(
        "10000 vectors; PAV vs envelope {worst_pair:.1e}, vs brute force {worst_brute:.1e}, max <y - Py, z - Py> = {worst_vi:.1e}"
    ))
}

fn mean_and_contraction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_mean: f64 = 0.0;
    let mut worst_lip: f64 = f64::INFINITY;
    for i in 0..200 {
        let sc = random_scenario(&mut rng, i);
        let p = &sc.particles;
        let xbar0: f64 = p.masses.iter().zip(&p.positions).map(|(m, x)| m * x).sum();
        let vbar0: f64 = p.masses.iter().zip(&p.velocities).map(|(m, v)| m * v).sum();
        let run = simulate(p, &sc.model, sc.t_end, &sc.samples).map_err(|e| format!("scenario {i}: {e}"))?;
        for s in &run.samples {
            let (x, v) = mean_dynamics(&sc.model, xbar0, vbar0, s.t);
            let d = (s.centre_of_mass() - x).abs().max((s.momentum() - v).abs());
            ensure!(d <= 1e-9, "scenario {i}: means off by {d:.3e} at t={}", s.t);
            worst_mean = worst_mean.max(d);
        }
        if i % 3 != 2 {
            let flux = FluxFunction::discrete(&sc.model, &p.masses, &p.positions, &p.velocities).map_err(e2s)?;
            let req: Vec<&Snapshot> = run.requested().collect();
            for pair in req.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                let dist = w1_quantile(&a.step_map(), &b.step_map());
                let bound = flux.l1_lipschitz_bound(a.t, b.t);
                ensure!(dist <= bound + 1e-12, "scenario {i}: L1 distance {dist} exceeds bound {bound}");
                if dist > 0.0 {
                    worst_lip = worst_lip.min(bound - dist);
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut steps = 0;
    for i in 0..50 {
        let n = rng.gen_range(1..=24);
        let masses = random_masses(&mut rng, n);
        let x = random_positions(&mut rng, n);
        let mut shift = rng.gen_range(0.0..0.5);
        let xt: Vec<f64> = x
            .iter()
            .map(|x| {
                shift += if rng.gen_bool(0.5) { rng.gen_range(0.0..0.3) } else { 0.0 };
                x + shift
            })
            .collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let model = random_model(&mut rng, i % 2);
        let t_end = rng.gen_range(1.0..4.0);
        let times = grid(0.0, t_end, 40);
        let a = simulate(&Particles::new(masses.clone(), x, v.clone()).unwrap(), &model, t_end, &times).map_err(e2s)?;
        let b = simulate(&Particles::new(masses, xt, v).unwrap(), &model, t_end, &times).map_err(e2s)?;
        let mut prev = f64::INFINITY;
        for (sa, sb) in a.requested().zip(b.requested()) {
            let gap = positive_part_gap(&sa.step_map(), &sb.step_map());
            ensure!(gap <= prev + 1e-12, "pair {i}: int (M - M~)+ rose from {prev} to {gap} at t={}", sa.t);
            let reverse = positive_part_gap(&sb.step_map(), &sa.step_map());
            ensure!(reverse <= 1e-12, "pair {i}: order lost at t={}", sa.t);
            prev = gap;
            steps += 1;
        }
    }
    Ok(format!(
        "means within {worst_mean:.1e}; {steps} contraction samples monotone; min Lipschitz slack {worst_lip:.1e}"
    ))
}

fn damped_asymptotics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut notes = Vec::new();
    for (lambda, kappa) in [(1.0, 0.3), (1.5, 0.5), (0.8, 0.4)] {
        let model = ForceModel::confined(lambda, kappa, 0.0).unwrap();
        let n = 12;
        let masses = random_masses(&mut rng, n);
        let x = random_positions(&mut rng, n);
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let p = Particles::new(masses, x, v).unwrap();
        let xbar0: f64 = p.masses.iter().zip(&p.positions).map(|(m, x)| m * x).sum();
        let vbar0: f64 = p.masses.iter().zip(&p.velocities).map(|(m, v)| m * v).sum();
        let times = grid(5.0, 40.0, 140);
        let run = simulate(&p, &model, 40.0, &times).map_err(e2s)?;
        let req: Vec<&Snapshot> = run.requested().collect();
        let ly: Vec<f64> = req.iter().map(|s| diagnostics::lyapunov(s, &model)).collect::<Result<_, _>>().map_err(e2s)?;
        let ts: Vec<f64> = req.iter().map(|s| s.t).collect();
        let slope = diagnostics::log_slope(&ts, &ly).map_err(e2s)?;
        ensure!(slope <= -2.0 * kappa * (1.0 - 0.05), "Lyapunov log-slope {slope:.4} for kappa={kappa}");
        let steady = oracles::steady_state(&model, xbar0, vbar0).map_err(e2s)?;
        let last = req.last().unwrap();
        let target = MonotoneStepMap::from_masses(&last.masses, &steady.discrete(&last.theta())).map_err(e2s)?;
        let w2 = w2_distance(&last.step_map(), &target);
        ensure!(w2 <= 1e-3, "W2 to steady state {w2:.3e} for kappa={kappa}");
        notes.push(format!("kappa={kappa}: slope {slope:.4} (limit {:.4}), W2 {w2:.1e}", -2.0 * kappa * 0.95));
    }
    Ok(notes.join("; "))
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "two-particle example", budget: Duration::from_millis(100), run: two_particle },
        Criterion { id: 2, name: "symmetric repulsive example, n=256", budget: Duration::from_secs(2), run: bgsw },
        Criterion { id: 3, name: "Dirac Riemann problems", budget: Duration::from_secs(2), run: riemann },
        Criterion { id: 4, name: "confined linear-velocity case", budget: Duration::from_secs(2), run: confined_linear },
        Criterion { id: 5, name: "four-particle confined scenario", budget: Duration::from_secs(2), run: four_particle },
        Criterion { id: 6, name: "entropy/Lagrangian equivalence suite", budget: Duration::from_secs(30), run: equivalence },
        Criterion { id: 7, name: "cone kernel suite", budget: Duration::from_secs(10), run: cone_kernel },
        Criterion { id: 8, name: "mean dynamics and L1 contraction", budget: Duration::from_secs(10), run: mean_and_contraction },
        Criterion { id: 9, name: "damped asymptotics", budget: Duration::from_secs(5), run: damped_asymptotics },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str()) || f == &c.id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(format!(
                "panicked: {}",
                p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
            ))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > c.budget => Err(format!("took {elapsed:.2?}, over the {:?} budget", c.budget)),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{tag} [{}] {} ({:.3} s, budget {:?}): {detail}", c.id, c.name, elapsed.as_secs_f64(), c.budget);
        failed += outcome.is_err() as usize;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
