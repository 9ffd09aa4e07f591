//! Running a scenario and writing its CSV artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use stickyflow::claw::{fronts_from_snapshot, validate_run, ValidationReport};
use stickyflow::diagnostics::{energy, lyapunov};
use stickyflow::dynamics::{simulate, simulate_projected, Event, Snapshot};
use stickyflow::forces::Variant;
use stickyflow::measures::{lp_to_quantile, w2_distance, MonotoneStepMap};
use stickyflow::oracles::{self, ConfinedLinear, OracleCase};

use crate::scenario::{OutputFile, Scenario};

pub const SCHEMA_LINE: &str = "#schema_v=1";

pub const TRAJECTORY_HEADER: [&str; 10] = ["mode", "sample", "time", "at_event", "particle", "mass", "block", "x", "v", "u"];
pub const EVENT_HEADER: [&str; 10] = [
    "time",
    "kind",
    "first_member",
    "end_member",
    "blocks_before",
    "blocks_after",
    "v_before",
    "v_after",
    "kinetic_before",
    "kinetic_after",
];
pub const FRONT_HEADER: [&str; 8] = ["mode", "sample", "time", "front_index", "x", "M_left", "M_right", "speed"];
pub const DIAGNOSTIC_HEADER: [&str; 10] =
    ["mode", "sample", "time", "at_event", "kinetic", "potential", "total", "majorant", "lyapunov", "oracle_w2"];

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// Samples and checks of one evolution.
pub struct ModeRun {
    pub mode: &'static str,
    pub samples: Vec<Snapshot>,
    pub events: Vec<Event>,
    pub validation: ValidationReport,
    /// W2 distance to the oracle quantile at each sample.
    pub oracle_w2: Vec<Option<f64>>,
    /// Largest `oracle_w2` over the samples where a tolerance applies, and
    /// that tolerance.
    pub oracle_check: Option<(f64, f64)>,
}

impl ModeRun {
    pub fn oracle_failed(&self) -> bool {
        self.oracle_check.is_some_and(|(err, tol)| !(err <= tol))
    }
}

/// Simulation aborts, as opposed to scenario errors.
#[derive(Debug)]
pub struct Abort(pub stickyflow::Error);

impl std::fmt::Display for Abort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "simulation aborted: {}", self.0)
    }
}

impl std::error::Error for Abort {}

pub fn execute(s: &Scenario) -> Result<Vec<ModeRun>> {
    let p = &s.particles;
    let mut runs = Vec::new();
    if s.mode.entropic() {
        let run = simulate(p, &s.model, s.t_end, &s.sample_times).map_err(Abort)?;
        runs.push(finish(s, "entropic", run.samples, run.events)?);
    }
    if s.mode.projected() {
        let samples = simulate_projected(p, &s.model, s.t_end, &s.sample_times).map_err(Abort)?;
        runs.push(finish(s, "projected", samples, Vec::new())?);
    }
    Ok(runs)
}

fn finish(s: &Scenario, mode: &'static str, samples: Vec<Snapshot>, events: Vec<Event>) -> Result<ModeRun> {
    let p = &s.particles;
    let validation = validate_run(&s.model, &p.masses, &p.positions, &p.velocities, &samples)?;
    let projected = mode == "projected";
    let oracle_w2 = samples.iter().map(|snap| oracle_distance(s, snap, projected)).collect::<Result<Vec<_>>>()?;
    let n = p.len() as f64;
    let tolerance = match s.oracle {
        Some(OracleCase::Bgsw) => Some((2.0 / n, 3.0)),
        Some(OracleCase::TwoParticle) => Some((1e-9, f64::INFINITY)),
        Some(OracleCase::ConfinedLinear) if !projected => Some((2.0 / n, f64::INFINITY)),
        _ => None,
    };
    let oracle_check = tolerance.map(|(tol, t_max)| {
        let err = samples
            .iter()
            .zip(&oracle_w2)
            .filter(|(snap, _)| snap.t <= t_max)
            .filter_map(|(_, e)| *e)
            .fold(0.0, f64::max);
        (err, tol)
    });
    Ok(ModeRun { mode, samples, events, validation, oracle_w2, oracle_check })
}

fn oracle_distance(s: &Scenario, snap: &Snapshot, projected: bool) -> Result<Option<f64>> {
    let t = snap.t;
    let map = snap.step_map();
    // Quadrature panels per particle step; the reference profiles are smooth
    // inside each step except at a handful of branch points.
    const SUB: usize = 8;
    Ok(match s.oracle {
        None | Some(OracleCase::DiracRiemann) => None,
        Some(OracleCase::Bgsw) => {
            let x = if projected { oracles::bgsw_projected } else { oracles::bgsw_x };
            Some(lp_to_quantile(&map, |m| x(t, m).expect("mass in (0, 1)"), 2, SUB))
        }
        Some(OracleCase::TwoParticle) => {
            let r = if projected { oracles::two_particle_projected(t)? } else { oracles::two_particle(t)? };
            Some(w2_distance(&map, &MonotoneStepMap::from_masses(&[0.5, 0.5], &r[..2])?))
        }
        Some(OracleCase::ConfinedLinear) if !projected => {
            let oracle = ConfinedLinear::new(s.model.lambda(), s.model.kappa())?;
            Some(lp_to_quantile(&map, |m| oracle.x(t, m).expect("mass in (0, 1)"), 2, SUB))
        }
        Some(OracleCase::ConfinedLinear) => None,
        Some(OracleCase::SteadyState) => {
            let p = &s.particles;
            let xbar0: f64 = p.masses.iter().zip(&p.positions).map(|(m, x)| m * x).sum();
            let vbar0: f64 = p.masses.iter().zip(&p.velocities).map(|(m, v)| m * v).sum();
            let rest = oracles::steady_state(&s.model, xbar0, vbar0)?.discrete(&snap.theta());
            Some(w2_distance(&map, &MonotoneStepMap::from_masses(&snap.masses, &rest)?))
        }
    })
}

fn csv_file(dir: &Path, file: OutputFile) -> Result<csv::Writer<BufWriter<File>>> {
    let path = dir.join(file.file_name());
    let mut out = BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?);
    writeln!(out, "{SCHEMA_LINE}")?;
    Ok(csv::Writer::from_writer(out))
}

fn blocks_field(ranges: &[std::ops::Range<usize>]) -> String {
    ranges.iter().map(|r| format!("{}:{}", r.start, r.end)).collect::<Vec<_>>().join(" ")
}

fn floats_field(values: &[f64]) -> String {
    values.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(" ")
}

pub fn write_outputs(s: &Scenario, runs: &[ModeRun], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for &file in &s.files {
        let mut w = csv_file(dir, file)?;
        match file {
            OutputFile::Trajectories => {
                w.write_record(TRAJECTORY_HEADER)?;
                for run in runs {
                    for (k, snap) in run.samples.iter().enumerate() {
                        let (x, v, block) = (snap.member_positions(), snap.member_velocities(), snap.blocks.block_of());
                        for j in 0..snap.masses.len() {
                            w.write_record([
                                run.mode.to_string(),
                                k.to_string(),
                                fmt(snap.t),
                                snap.at_event.to_string(),
                                j.to_string(),
                                fmt(snap.masses[j]),
                                block[j].to_string(),
                                fmt(x[j]),
                                fmt(v[j]),
                                fmt(snap.u[j]),
                            ])?;
                        }
                    }
                }
            }
            OutputFile::Events => {
                w.write_record(EVENT_HEADER)?;
                for e in runs.iter().flat_map(|r| &r.events) {
                    let members = e.members();
                    w.write_record([
                        fmt(e.time),
                        e.kind.as_str().to_string(),
                        members.start.to_string(),
                        members.end.to_string(),
                        blocks_field(&e.before),
                        blocks_field(&e.after),
                        floats_field(&e.v_before),
                        floats_field(&e.v_after),
                        fmt(e.kinetic_before),
                        fmt(e.kinetic_after),
                    ])?;
                }
            }
            OutputFile::Fronts => {
                w.write_record(FRONT_HEADER)?;
                for run in runs {
                    for (k, snap) in run.samples.iter().enumerate() {
                        for (i, f) in fronts_from_snapshot(snap).iter().enumerate() {
                            w.write_record([
                                run.mode.to_string(),
                                k.to_string(),
                                fmt(snap.t),
                                i.to_string(),
                                fmt(f.x),
                                fmt(f.m_left),
                                fmt(f.m_right),
                                fmt(f.speed),
                            ])?;
                        }
                    }
                }
            }
            OutputFile::Diagnostics => {
                w.write_record(DIAGNOSTIC_HEADER)?;
                for run in runs {
                    for (k, snap) in run.samples.iter().enumerate() {
                        let e = energy(snap, &s.model);
                        let lyap = (s.model.variant() == Variant::ConfinedRepulsive).then(|| lyapunov(snap, &s.model)).transpose()?;
                        w.write_record([
                            run.mode.to_string(),
                            k.to_string(),
                            fmt(snap.t),
                            snap.at_event.to_string(),
                            fmt(e.kinetic),
                            fmt(e.potential),
                            fmt(e.total),
                            fmt(e.majorant),
                            fmt_opt(lyap),
                            fmt_opt(run.oracle_w2[k]),
                        ])?;
                    }
                }
            }
            OutputFile::Validation => {
                w.write_record(validation_header())?;
                for run in runs {
                    write_validation_rows(&mut w, run.mode, &run.validation)?;
                }
            }
        }
        w.flush()?;
    }
    Ok(())
}

pub fn validation_header() -> Vec<&'static str> {
    let mut header = vec!["mode", "sample"];
    header.extend(stickyflow::claw::VALIDATION_HEADER.split(','));
    header
}

/// Validation rows with the mode and sample index prepended. Samples are
/// recovered from the front index, which restarts at zero in every sample.
pub fn write_validation_rows<W: Write>(w: &mut csv::Writer<W>, mode: &str, report: &ValidationReport) -> Result<()> {
    let mut sample = 0usize;
    for (i, r) in report.rows.iter().enumerate() {
        if i > 0 && r.front_index == 0 {
            sample += 1;
        }
        w.write_record([
            mode.to_string(),
            sample.to_string(),
            fmt(r.t),
            r.front_index.to_string(),
            fmt(r.x),
            fmt(r.m_left),
            fmt(r.m_right),
            fmt(r.speed),
            fmt(r.rh_residual),
            fmt(r.oleinik_margin),
            r.pass.to_string(),
        ])?;
    }
    Ok(())
}
