use std::io::Write;

use rayon::prelude::*;

use super::config::RunConfig;
use super::run::{csv_header, exploration_score, run, RunMetrics};
use crate::error::{Error, Result};

/// `config` with every seed offset by `index`.
pub fn seeded_config(config: &RunConfig, index: u64) -> RunConfig {
    RunConfig {
        seed_env: config.seed_env.wrapping_add(index),
        seed_init: config.seed_init.wrapping_add(index),
        seed_run: config.seed_run.wrapping_add(index),
        ..config.clone()
    }
}

/// Runs seed indices `0..seeds` in parallel; results are in seed order.
pub fn run_seeds(config: &RunConfig, seeds: u64) -> Vec<Result<RunMetrics>> {
    (0..seeds)
        .into_par_iter()
        .map(|s| run(&seeded_config(config, s)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    /// `None` when the run aborted on divergence.
    pub success_fraction: Option<f64>,
    pub solved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: String,
    pub outcomes: Vec<SeedOutcome>,
}

impl SweepPoint {
    pub fn solved(&self) -> usize {
        self.outcomes.iter().filter(|o| o.solved).count()
    }

    pub fn diverged(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| o.success_fraction.is_none())
            .count()
    }

    /// Mean over runs that finished; diverged runs are excluded.
    pub fn mean_success_fraction(&self) -> f64 {
        let finished: Vec<f64> = self
            .outcomes
            .iter()
            .filter_map(|o| o.success_fraction)
            .collect();
        if finished.is_empty() {
            0.0
        } else {
            finished.iter().sum::<f64>() / finished.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub param: String,
    /// In the order the values were given.
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, out: &mut W, base: &RunConfig) -> Result<()> {
        writeln!(out, "{} sweep_param={}", csv_header(base), self.param)?;
        writeln!(out, "value,runs,solved,diverged,mean_success_fraction")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{}",
                p.value,
                p.outcomes.len(),
                p.solved(),
                p.diverged(),
                p.mean_success_fraction()
            )?;
        }
        Ok(())
    }
}

/// Runs `param` at each of `values` for `seeds` seed offsets. Divergent runs
/// count as unsolved; any other error aborts the sweep.
pub fn sweep(base: &RunConfig, param: &str, values: &[String], seeds: u64) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::config("values", "a sweep needs at least one value"));
    }
    if seeds == 0 {
        return Err(Error::config("seeds", "a sweep needs at least one seed"));
    }
    let mut configs = Vec::with_capacity(values.len());
    for value in values {
        let mut config = base.clone();
        config.set(param, value)?;
        config.validate()?;
        configs.push(config);
    }
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|v| (0..seeds).map(move |s| (v, s)))
        .collect();
    let results: Vec<Result<SeedOutcome>> = jobs
        .par_iter()
        .map(|&(v, s)| {
            let config = seeded_config(&configs[v], s);
            match run(&config) {
                Ok(metrics) => Ok(SeedOutcome {
                    seed: s,
                    success_fraction: Some(metrics.success_fraction()),
                    solved: exploration_score(&metrics, config.success_threshold) == 1,
                }),
                Err(Error::Divergence { .. }) => Ok(SeedOutcome {
                    seed: s,
                    success_fraction: None,
                    solved: false,
                }),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut points: Vec<SweepPoint> = values
        .iter()
        .map(|v| SweepPoint {
            value: v.clone(),
            outcomes: Vec::with_capacity(seeds as usize),
        })
        .collect();
    for (&(v, _), result) in jobs.iter().zip(results) {
        points[v].outcomes.push(result?);
    }
    Ok(SweepReport {
        param: param.to_string(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RunConfig {
        RunConfig {
            size: 3,
            episodes: 4,
            burnin: 1,
            hidden: vec![4],
            batches_per_step: 1,
            ..RunConfig::default()
        }
    }

    #[test]
    fn rejects_unknown_param_and_empty_values() {
        let base = tiny();
        assert!(matches!(
            sweep(&base, "warp", &["1".into()], 1),
            Err(Error::Config { .. })
        ));
        assert!(matches!(
            sweep(&base, "omega", &[], 1),
            Err(Error::Config { .. })
        ));
        assert!(matches!(
            sweep(&base, "omega", &["-1".into()], 1),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn points_keep_value_and_seed_order() {
        let report = sweep(&tiny(), "omega", &["100".into(), "1".into()], 3).unwrap();
        assert_eq!(report.points[0].value, "100");
        assert_eq!(report.points[1].value, "1");
        for p in &report.points {
            let seeds: Vec<u64> = p.outcomes.iter().map(|o| o.seed).collect();
            assert_eq!(seeds, vec![0, 1, 2]);
        }
        let again = sweep(&tiny(), "omega", &["100".into(), "1".into()], 3).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn seeded_config_offsets_all_seeds() {
        let c = seeded_config(&tiny(), 5);
        assert_eq!((c.seed_env, c.seed_init, c.seed_run), (5, 5, 5));
    }
}
