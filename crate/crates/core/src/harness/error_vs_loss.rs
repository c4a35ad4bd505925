//! Does driving `E_G` down drive `E_T` down? PINN networks are trained
//! against the manufactured solution and captured each time `E_G` first
//! crosses a threshold; the resulting `(E_G, E_T)` pairs are ranked and
//! fitted.

use super::record::{PlotKind, PlotSpec, Status, StudyRecord, Table, Verdict};
use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::losses::{EvalMode, Objective};
use crate::network::TanhNetwork;
use crate::stats::{loglog_fit, spearman};
use crate::train::checkpoint_sweep;

pub fn run_error_vs_loss_study(cfg: &RunConfig) -> Result<StudyRecord> {
    if cfg.scenario.mode != Mode::Pinn {
        return Err(Error::Config("the error-vs-loss study runs in pinn mode".into()));
    }
    let study = &cfg.study;
    let setup = cfg.pinn()?;
    let problem = &setup.problem;
    let case = setup.case.clone();
    let probe = |nets: &[TanhNetwork]| problem.total_error(&nets[0], &|t, x, xi| case.u_star(t, x, xi));

    let mut record = StudyRecord::new("error_vs_loss", cfg, study.seeds.clone())?;
    let mut table = Table::new(&["seed", "threshold", "iteration", "e_g", "e_t"]);
    let mut per_seed = Vec::with_capacity(study.seeds.len());
    for &seed in &study.seeds {
        let nets = cfg.init_networks(Mode::Pinn, seed)?;
        let e_g0 = problem.breakdown(&nets, EvalMode::Quadrature)?.eg_total();
        let thresholds: Vec<f64> = study.threshold_fractions.iter().map(|f| f * e_g0).collect();
        let mut train = cfg.train_config();
        train.seed = train.seed.wrapping_add(seed);
        let (snaps, _) = checkpoint_sweep(problem, nets, &train, &thresholds, Some(&probe))?;
        let mut reached = 0;
        for s in snaps.into_iter().flatten() {
            let e_t = s.e_t.unwrap_or(f64::NAN);
            table.push(vec![seed as f64, s.threshold, s.iteration as f64, s.e_g, e_t]);
            // A capture at iteration 0 is the untrained network.
            if s.iteration > 0 {
                reached += 1;
            }
        }
        per_seed.push(reached);
    }

    let trained: Vec<&Vec<f64>> = table.rows.iter().filter(|r| r[2] > 0.0).collect();
    let e_g: Vec<f64> = trained.iter().map(|r| r[3]).collect();
    let e_t: Vec<f64> = trained.iter().map(|r| r[4]).collect();
    let pairs = e_g.len();
    record.fits.insert("pairs".into(), pairs as f64);
    record
        .fits
        .insert("weighted_norm".into(), case.weighted_norm(cfg.weights.gamma, cfg.weights.t_end, cfg.scenario.dx));

    let fewest = per_seed.iter().copied().min().unwrap_or(0) as f64;
    let needed = study.min_pairs.max(2);
    if pairs < needed {
        let why = format!("{pairs} trained checkpoints, need {needed}");
        record.push(Verdict::new("pairs", Status::Inconclusive, pairs as f64, needed as f64).with_detail(&why));
        record.push(
            Verdict::new("checkpoints_per_seed", Status::Inconclusive, fewest, study.min_checkpoints as f64)
                .with_detail(&why),
        );
        for check in ["rank_correlation", "constant_spread"] {
            record.push(Verdict::new(check, Status::Inconclusive, f64::NAN, f64::NAN).with_detail(&why));
        }
    } else {
        record.push(Verdict::at_least("pairs", pairs as f64, needed as f64));
        record.push(Verdict::at_least("checkpoints_per_seed", fewest, study.min_checkpoints as f64));
        let rho = spearman(&e_g, &e_t)?;
        record.fits.insert("spearman".into(), rho);
        record.push(Verdict::at_least("rank_correlation", rho, study.min_spearman));

        let ratios: Vec<f64> = e_g.iter().zip(&e_t).map(|(g, t)| t / g).collect();
        let c = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let spread = c / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        record.fits.insert("c".into(), c);
        record.fits.insert("c_spread".into(), spread);
        record.push(Verdict::at_most("constant_spread", spread, study.max_c_spread));

        let fit = loglog_fit(&e_g, &e_t)?;
        record.fits.insert("loglog_slope".into(), fit.slope);
        record.fits.insert("loglog_slope_residual".into(), fit.residual);
    }

    record.table = table;
    record.plot = Some(PlotSpec {
        kind: PlotKind::Scatter,
        x: "e_g".into(),
        y: vec!["e_t".into()],
        bound: Some("c".into()),
    });
    Ok(record)
}
