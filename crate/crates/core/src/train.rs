//! Seeded Adam training of an [`Objective`], with deterministic logging and
//! threshold-triggered snapshots.
//!
//! The trainer only sees the objective. Total errors come from an optional
//! probe closure that is called at log points and never feeds the update.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{BatchSizes, BreakdownRow, EvalMode, LossBreakdown, Objective};
use crate::network::{save_checkpoint, TanhNetwork};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        Self {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let c = self.config;
        self.step += 1;
        let bc1 = 1.0 - c.beta1.powi(self.step);
        let bc2 = 1.0 - c.beta2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * grad[i];
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= c.learning_rate * mhat / (vhat.sqrt() + c.epsilon);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub iterations: usize,
    pub batches: BatchSizes,
    /// Seed of the mini-batch sampler.
    pub seed: u64,
    /// Deterministic `E_G` is logged every `log_every` iterations and at the
    /// end.
    pub log_every: usize,
    /// Checkpoint files are written every `checkpoint_every` iterations when a
    /// directory is given; 0 disables them.
    pub checkpoint_every: usize,
    /// Abort once a batch loss exceeds this multiple of the initial `E_G^2`.
    pub divergence_factor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            iterations: 1000,
            batches: BatchSizes::default(),
            seed: 0,
            log_every: 100,
            checkpoint_every: 0,
            divergence_factor: 1e6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.adam.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.adam.learning_rate
            )));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be at least 1".into()));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::Config("divergence_factor must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogEntry {
    pub iteration: usize,
    pub breakdown: LossBreakdown,
    pub e_t: Option<f64>,
    pub wall_seconds: f64,
}

/// CSV row of a [`TrainLog`]. Wall time is kept out of the canonical log so
/// that repeated runs produce identical files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: usize,
    pub e_t: Option<f64>,
    pub mode: String,
    pub eg_total: f64,
    pub eg_i: Option<f64>,
    pub eg_t: Option<f64>,
    pub eg_b: Option<f64>,
    pub eg_p: Option<f64>,
    pub lambda_r: Option<f64>,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub r3: Option<f64>,
    pub r4: Option<f64>,
    pub r5: Option<f64>,
    pub samples: usize,
    pub rule: String,
}

impl LogRow {
    fn new(iteration: usize, e_t: Option<f64>, b: &LossBreakdown) -> Self {
        let r = b.to_row();
        Self {
            iteration,
            e_t,
            mode: r.mode,
            eg_total: r.eg_total,
            eg_i: r.eg_i,
            eg_t: r.eg_t,
            eg_b: r.eg_b,
            eg_p: r.eg_p,
            lambda_r: r.lambda_r,
            r1: r.r1,
            r2: r.r2,
            r3: r.r3,
            r4: r.r4,
            r5: r.r5,
            samples: r.samples,
            rule: r.rule,
        }
    }

    pub fn breakdown(&self) -> Result<LossBreakdown> {
        BreakdownRow {
            mode: self.mode.clone(),
            eg_total: self.eg_total,
            eg_i: self.eg_i,
            eg_t: self.eg_t,
            eg_b: self.eg_b,
            eg_p: self.eg_p,
            lambda_r: self.lambda_r,
            r1: self.r1,
            r2: self.r2,
            r3: self.r3,
            r4: self.r4,
            r5: self.r5,
            samples: self.samples,
            rule: self.rule.clone(),
        }
        .into_breakdown()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
}

impl TrainLog {
    pub fn rows(&self) -> Vec<LogRow> {
        self.entries
            .iter()
            .map(|e| LogRow::new(e.iteration, e.e_t, &e.breakdown))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in self.rows() {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<LogRow>> {
        let mut rdr = csv::Reader::from_reader(r);
        rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
    }

    /// Iteration and wall time per entry.
    pub fn write_timing_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iteration", "wall_seconds"])?;
        for e in &self.entries {
            out.write_record([e.iteration.to_string(), e.wall_seconds.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn last(&self) -> Option<&LogEntry> {
        self.entries.last()
    }
}

/// Measurement-only total error.
pub type Probe<'a> = &'a dyn Fn(&[TanhNetwork]) -> Result<f64>;

/// Called at every log point with the entry and current networks; returning
/// `false` stops training.
type Monitor<'a> = &'a mut dyn FnMut(&LogEntry, &[TanhNetwork]) -> bool;

fn run(
    objective: &dyn Objective,
    mut nets: Vec<TanhNetwork>,
    config: &TrainConfig,
    probe: Option<Probe<'_>>,
    checkpoint_dir: Option<&Path>,
    monitor: Monitor<'_>,
) -> Result<(Vec<TanhNetwork>, TrainLog)> {
    config.validate()?;
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opts: Vec<Adam> = nets.iter().map(|n| Adam::new(config.adam, n.param_count())).collect();
    let mut params: Vec<Vec<f64>> = nets.iter().map(|n| n.params()).collect();
    let mut log = TrainLog::default();

    let mut record = |it: usize, nets: &[TanhNetwork], log: &mut TrainLog| -> Result<bool> {
        let breakdown = objective.breakdown(nets, EvalMode::Quadrature)?;
        let e_t = probe.map(|p| p(nets)).transpose()?;
        let entry = LogEntry {
            iteration: it,
            breakdown,
            e_t,
            wall_seconds: clock.elapsed().as_secs_f64(),
        };
        let go_on = monitor(&entry, nets);
        log.entries.push(entry);
        Ok(go_on)
    };

    let mut go_on = record(0, &nets, &mut log)?;
    let initial = log.entries[0].breakdown.eg_total().powi(2);
    let limit = config.divergence_factor * initial.max(f64::MIN_POSITIVE);
    let mut it = 0;
    while go_on && it < config.iterations {
        it += 1;
        let (loss, grads) = objective.batch_loss(&nets, &config.batches, &mut rng)?;
        if !loss.is_finite() || loss > limit {
            return Err(Error::Diverged {
                iteration: it,
                loss,
                limit,
            });
        }
        for (k, net) in nets.iter_mut().enumerate() {
            opts[k].step(&mut params[k], &grads[k]);
            net.set_params(&params[k])?;
        }
        if let Some(dir) = checkpoint_dir {
            if config.checkpoint_every > 0 && it % config.checkpoint_every == 0 {
                for (k, net) in nets.iter().enumerate() {
                    save_checkpoint(net, &dir.join(format!("net{k}_iter{it:07}.kpnn")))?;
                }
            }
        }
        if it % config.log_every == 0 || it == config.iterations {
            go_on = record(it, &nets, &mut log)?;
        }
    }
    Ok((nets, log))
}

/// Trains `nets` on `objective`. `probe` supplies `E_T` for the log.
pub fn train(
    objective: &dyn Objective,
    nets: Vec<TanhNetwork>,
    config: &TrainConfig,
    probe: Option<Probe<'_>>,
    checkpoint_dir: Option<&Path>,
) -> Result<(Vec<TanhNetwork>, TrainLog)> {
    run(objective, nets, config, probe, checkpoint_dir, &mut |_, _| true)
}

/// Networks captured the first time the deterministic `E_G` fell to a
/// threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub threshold: f64,
    pub iteration: usize,
    pub e_g: f64,
    pub e_t: Option<f64>,
    pub nets: Vec<TanhNetwork>,
}

/// One entry per threshold, `None` where training ended before reaching it.
pub fn checkpoint_sweep(
    objective: &dyn Objective,
    nets: Vec<TanhNetwork>,
    config: &TrainConfig,
    thresholds: &[f64],
    probe: Option<Probe<'_>>,
) -> Result<(Vec<Option<Snapshot>>, TrainLog)> {
    if thresholds.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("thresholds must be strictly decreasing".into()));
    }
    if thresholds.is_empty() {
        return Ok((Vec::new(), TrainLog::default()));
    }
    let mut captured: Vec<Option<Snapshot>> = vec![None; thresholds.len()];
    let mut monitor = |e: &LogEntry, nets: &[TanhNetwork]| {
        let eg = e.breakdown.eg_total();
        for (k, &th) in thresholds.iter().enumerate() {
            if captured[k].is_none() && eg <= th {
                captured[k] = Some(Snapshot {
                    threshold: th,
                    iteration: e.iteration,
                    e_g: eg,
                    e_t: e.e_t,
                    nets: nets.to_vec(),
                });
            }
        }
        captured.iter().any(Option::is_none)
    };
    let (_, log) = run(objective, nets, config, probe, None, &mut monitor)?;
    Ok((captured, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_single_step_by_hand() {
        let cfg = AdamConfig {
            learning_rate: 0.1,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
        };
        let mut adam = Adam::new(cfg, 2);
        let mut p = [1.0, -2.0];
        // Gradient of x^2 + 3 y^2.
        let g = [2.0 * p[0], 6.0 * p[1]];
        adam.step(&mut p, &g);
        // After one step mhat = g and vhat = g^2, so each coordinate moves
        // by lr * g / (|g| + eps).
        let expect0 = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        let expect1 = -2.0 - 0.1 * -12.0 / (12.0 + 1e-8);
        assert!((p[0] - expect0).abs() < 1e-12);
        assert!((p[1] - expect1).abs() < 1e-12);
    }

    #[test]
    fn adam_zero_gradient_is_fixed_point() {
        let mut adam = Adam::new(AdamConfig::default(), 3);
        let mut p = [0.5, 0.25, -1.0];
        adam.step(&mut p, &[0.0; 3]);
        assert_eq!(p, [0.5, 0.25, -1.0]);
    }
}
