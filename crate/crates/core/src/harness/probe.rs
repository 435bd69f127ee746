use std::io::Write;

use super::config::{AgentKind, EnvKind, RunConfig};
use super::run::{build_architecture, build_env, build_eve_agent, build_replay, csv_header};
use super::stats::spearman;
use crate::agent::run_episode;
use crate::envs::DeepSea;
use crate::error::{Error, Result};
use crate::posterior::epistemic_q_stds;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeCell {
    pub row: usize,
    pub col: usize,
    pub visits: u64,
    /// Largest per-action posterior std of q at this cell.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub size: usize,
    pub cells: Vec<ProbeCell>,
}

impl ProbeReport {
    /// Spearman correlation between visit count and epistemic std.
    pub fn visit_std_correlation(&self) -> Option<f64> {
        let visits: Vec<f64> = self.cells.iter().map(|c| c.visits as f64).collect();
        let stds: Vec<f64> = self.cells.iter().map(|c| c.std).collect();
        spearman(&visits, &stds)
    }

    /// Mean std over (unvisited, visited) cells.
    pub fn mean_std_by_visited(&self) -> (Option<f64>, Option<f64>) {
        let mean = |visited: bool| {
            let v: Vec<f64> = self
                .cells
                .iter()
                .filter(|c| (c.visits > 0) == visited)
                .map(|c| c.std)
                .collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        (mean(false), mean(true))
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, config: &RunConfig) -> Result<()> {
        writeln!(out, "{}", csv_header(config))?;
        writeln!(out, "row,col,visits,std")?;
        for c in &self.cells {
            writeln!(out, "{},{},{},{}", c.row, c.col, c.visits, c.std)?;
        }
        Ok(())
    }
}

/// Trains the epistemic agent under a uniformly random policy for
/// `probe_episodes` episodes, then reports per-cell visit counts and the
/// largest per-action epistemic std of q over `probe_samples` posterior draws.
pub fn probe_uncertainty(config: &RunConfig) -> Result<ProbeReport> {
    config.validate()?;
    if config.agent != AgentKind::Eve {
        return Err(Error::config("agent", "the probe needs the eve agent"));
    }
    if config.env == EnvKind::Bandit {
        return Err(Error::config(
            "env",
            "the probe needs a deep sea environment",
        ));
    }
    let probe_config = RunConfig {
        burnin: config.probe_episodes,
        ..config.clone()
    };
    let mut env = build_env(&probe_config)?;
    let arch = build_architecture(&probe_config, env.as_ref())?;
    let mut agent = build_eve_agent(&probe_config, arch.clone())?;
    let mut replay = build_replay(&probe_config)?;
    let mut rng = rng::seeded(config.seed_run);

    let size = config.size;
    let mut visits = vec![0u64; size * size];
    for episode in 0..config.probe_episodes {
        let outcome = run_episode(
            &mut agent,
            env.as_mut(),
            &mut replay,
            episode,
            &mut rng,
            true,
        )?;
        for &cell in &outcome.visited {
            if cell < visits.len() {
                visits[cell] += 1;
            }
        }
    }

    let mut std_rng = rng::derived(config.seed_run, 1);
    let mean = agent.learner().target().clone();
    let mut cells = Vec::with_capacity(size * size);
    for (index, &count) in visits.iter().enumerate() {
        let (row, col) = DeepSea::cell_of(size, index);
        let features = DeepSea::observation_of(size, row, col);
        let stds = epistemic_q_stds(
            agent.fisher(),
            &mean,
            &arch,
            &features,
            config.probe_samples,
            &mut std_rng,
        )?;
        let std = stds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        cells.push(ProbeCell {
            row,
            col,
            visits: count,
            std,
        });
    }
    Ok(ProbeReport { size, cells })
}
