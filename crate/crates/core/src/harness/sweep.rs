use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{aggregate_seeds, MetricsRecord, SeedSummary};
use super::run::{run_experiment, seed_dir, write_run, write_summary};
use super::scenario::ScenarioSpec;
use crate::error::{Result, XrError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepFactor {
    Gamma,
    EpsDecay,
    Lambda,
    DecisionInterval,
}

impl SweepFactor {
    pub fn name(self) -> &'static str {
        match self {
            SweepFactor::Gamma => "gamma",
            SweepFactor::EpsDecay => "eps_decay",
            SweepFactor::Lambda => "lambda",
            SweepFactor::DecisionInterval => "decision_interval",
        }
    }

    fn apply(self, spec: &mut ScenarioSpec, value: f64) {
        match self {
            SweepFactor::Gamma => spec.dqn.gamma = value,
            SweepFactor::EpsDecay => spec.dqn.epsilon.decay = value,
            SweepFactor::Lambda => spec.env.reward.lambda = value,
            SweepFactor::DecisionInterval => spec.env.decision_interval_s = value,
        }
    }
}

impl fmt::Display for SweepFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Values to try per factor; each factor is varied alone around the base spec.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub gamma: Vec<f64>,
    pub eps_decay: Vec<f64>,
    pub lambda: Vec<f64>,
    pub decision_interval: Vec<f64>,
}

impl SweepGrid {
    /// Three values per factor around the defaults.
    pub fn standard() -> Self {
        Self {
            gamma: vec![0.95, 0.99, 0.999],
            eps_decay: vec![0.999, 0.9975, 0.995],
            lambda: vec![0.5, 1.0, 2.0],
            decision_interval: vec![1.0, 0.75, 0.5],
        }
    }

    pub fn points(&self) -> Vec<(SweepFactor, f64)> {
        let mut out = Vec::new();
        for (f, vals) in [
            (SweepFactor::Gamma, &self.gamma),
            (SweepFactor::EpsDecay, &self.eps_decay),
            (SweepFactor::Lambda, &self.lambda),
            (SweepFactor::DecisionInterval, &self.decision_interval),
        ] {
            out.extend(vals.iter().map(|&v| (f, v)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub factor: SweepFactor,
    pub value: f64,
    pub summary: SeedSummary,
}

#[derive(Serialize)]
struct SweepCsvRow {
    factor: SweepFactor,
    value: f64,
    compliance_median: f64,
    compliance_min: f64,
    compliance_max: f64,
    avg_power_median: f64,
    local_fraction_median: f64,
    objective_median: f64,
}

/// One-factor-at-a-time sweep; every (point, seed) pair runs in parallel.
pub fn sweep(base: &ScenarioSpec, grid: &SweepGrid, out: Option<&Path>) -> Result<Vec<SweepRow>> {
    let points = grid.points();
    if points.is_empty() {
        return Err(XrError::InvalidScenario("sweep grid is empty".into()));
    }
    let specs: Vec<ScenarioSpec> = points
        .iter()
        .map(|&(f, v)| {
            let mut s = base.clone();
            f.apply(&mut s, v);
            s.name = Some(format!("{}-{}={}", base.label(), f, v));
            s.validate().map(|_| s)
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = (0..specs.len())
        .flat_map(|i| base.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(i, seed)| run_experiment(&specs[i], seed).map(|r| (i, r)))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(points.len());
    for (i, &(factor, value)) in points.iter().enumerate() {
        let mine: Vec<_> = runs.iter().filter(|(j, _)| *j == i).map(|(_, r)| r).collect();
        let records: Vec<MetricsRecord> = mine.iter().map(|r| r.metrics.clone()).collect();
        let summary = aggregate_seeds(&records)?;
        if let Some(root) = out {
            let dir = root.join(format!("{factor}-{value}"));
            for r in &mine {
                write_run(&seed_dir(&dir, r.metrics.seed), r)?;
            }
            write_summary(&dir, &summary)?;
        }
        rows.push(SweepRow { factor, value, summary });
    }
    if let Some(root) = out {
        write_sweep_table(&root.join("sweep.csv"), &rows)?;
    }
    Ok(rows)
}

pub fn write_sweep_table(path: &Path, rows: &[SweepRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| XrError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        let m = &r.summary.metrics;
        w.serialize(SweepCsvRow {
            factor: r.factor,
            value: r.value,
            compliance_median: m["compliance_pct"].median,
            compliance_min: m["compliance_pct"].min,
            compliance_max: m["compliance_pct"].max,
            avg_power_median: m["avg_power_w"].median,
            local_fraction_median: m["local_fraction_pct"].median,
            objective_median: m["objective"].median,
        })?;
    }
    w.flush().map_err(|e| XrError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::run_seeds;
    use crate::harness::scenario::ProfileSpec;
    use crate::policy::PolicyKind;

    #[test]
    fn empty_grid_rejected() {
        assert!(sweep(&ScenarioSpec::default(), &SweepGrid::default(), None).is_err());
    }

    #[test]
    fn standard_grid_has_twelve_points() {
        assert_eq!(SweepGrid::standard().points().len(), 12);
    }

    #[test]
    fn single_point_matches_plain_run() {
        let base = ScenarioSpec::new(PolicyKind::Threshold, ProfileSpec::Variable)
            .with_horizon(20.0)
            .with_seeds(&[4, 5]);
        let grid = SweepGrid {
            lambda: vec![1.0],
            ..SweepGrid::default()
        };
        let rows = sweep(&base, &grid, None).unwrap();
        assert_eq!(rows.len(), 1);
        let direct: Vec<MetricsRecord> = run_seeds(&base).unwrap().into_iter().map(|r| r.metrics).collect();
        let want = aggregate_seeds(&direct).unwrap();
        assert_eq!(rows[0].summary.metrics, want.metrics);
    }
}
