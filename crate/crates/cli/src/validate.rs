//! Entropy validation of recorded fronts against a scenario's flux.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use stickyflow::claw::{validate_trajectory, Front, FrontTrajectory, ValidationReport};
use stickyflow::forces::Variant;

use crate::scenario::Scenario;

#[derive(Debug, Deserialize)]
struct FrontRow {
    mode: String,
    sample: usize,
    time: f64,
    front_index: usize,
    x: f64,
    #[serde(rename = "M_left")]
    m_left: f64,
    #[serde(rename = "M_right")]
    m_right: f64,
    speed: f64,
}

#[derive(Debug, Deserialize)]
struct TrajectoryRow {
    mode: String,
    sample: usize,
    particle: usize,
    u: f64,
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file))
}

/// Reads the fronts of one mode, attaching the member breakpoints of the
/// scenario's masses that lie inside each front.
pub fn read_fronts(path: &Path, mode: &str, theta: &[f64]) -> Result<FrontTrajectory> {
    let mut samples: BTreeMap<usize, (f64, Vec<Front>)> = BTreeMap::new();
    for (line, row) in reader(path)?.deserialize::<FrontRow>().enumerate() {
        let row = row.with_context(|| format!("{}: bad row {}", path.display(), line + 1))?;
        if row.mode != mode {
            continue;
        }
        let lo = theta.partition_point(|&m| m <= row.m_left);
        let hi = theta.partition_point(|&m| m < row.m_right);
        let interior = theta[lo..hi.max(lo)].to_vec();
        let entry = samples.entry(row.sample).or_insert((row.time, Vec::new()));
        if entry.1.len() != row.front_index {
            bail!("{}: fronts of sample {} are out of order", path.display(), row.sample);
        }
        entry.1.push(Front { x: row.x, m_left: row.m_left, m_right: row.m_right, speed: row.speed, interior });
    }
    if samples.is_empty() {
        bail!("{} has no {mode} fronts", path.display());
    }
    Ok(FrontTrajectory { samples: samples.into_values().collect() })
}

fn read_prescribed(path: &Path, mode: &str, n: usize) -> Result<Vec<Vec<f64>>> {
    let mut samples: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (line, row) in reader(path)?.deserialize::<TrajectoryRow>().enumerate() {
        let row = row.with_context(|| format!("{}: bad row {}", path.display(), line + 1))?;
        if row.mode != mode {
            continue;
        }
        let u = samples.entry(row.sample).or_insert_with(|| vec![f64::NAN; n]);
        match u.get_mut(row.particle) {
            Some(slot) => *slot = row.u,
            None => bail!("{}: particle {} out of range", path.display(), row.particle),
        }
    }
    Ok(samples.into_values().collect())
}

/// Validates `fronts` (a `fronts.csv` written by `run`). Confined scenarios
/// also need the prescribed velocities from `trajectories`.
pub fn validate(scenario: &Scenario, fronts: &Path, trajectories: Option<&Path>, mode: &str) -> Result<ValidationReport> {
    let p = &scenario.particles;
    let theta = p.theta();
    let trajectory = read_fronts(fronts, mode, &theta)?;
    let prescribed = if scenario.model.variant() == Variant::ConfinedRepulsive {
        let path = match trajectories {
            Some(path) => path.to_path_buf(),
            None => fronts.with_file_name("trajectories.csv"),
        };
        read_prescribed(&path, mode, p.len())?
    } else {
        Vec::new()
    };
    Ok(validate_trajectory(&scenario.model, &p.masses, &p.positions, &p.velocities, &trajectory, &prescribed)?)
}
