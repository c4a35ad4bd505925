//! APNN runs across `eps` against the DVM reference and the diffusion
//! limit.

use super::record::{PlotKind, PlotSpec, Status, StudyRecord, Table, Verdict};
use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::kinetic::size_condition;
use crate::losses::EvalMode;
use crate::reference::{ap_trajectory, matching_diffusion, rho_distance};
use crate::train::train;

const COLUMNS: [&str; 7] = [
    "epsilon",
    "e_g",
    "e_t",
    "tails",
    "rho_distance",
    "reference_e_g",
    "reference_rho_distance",
];

pub fn run_ap_study(cfg: &RunConfig) -> Result<StudyRecord> {
    if cfg.scenario.mode != Mode::Apnn {
        return Err(Error::Config("the AP study runs in apnn mode".into()));
    }
    let alpha = cfg.alpha()?;
    let sc = size_condition(alpha.alpha0(), alpha.alpha1())?;
    if !sc.holds() {
        return Err(Error::SizeCondition {
            kappa: sc.kappa,
            alpha0: alpha.alpha0(),
            alpha1: alpha.alpha1(),
        });
    }
    let study = &cfg.study;
    if study.epsilons.is_empty() || study.epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Config("study.epsilons must be non-empty and positive".into()));
    }
    let seed = study.seeds.first().copied().unwrap_or(0);
    let ap = cfg.ap_study();
    let cut = study.tail_fraction * ap.side / 2.0;

    let mut record = StudyRecord::new("ap", cfg, vec![seed])?;
    record.fits.insert("kappa".into(), sc.kappa);
    let mut table = Table::new(&COLUMNS);
    for &eps in &study.epsilons {
        let traj = ap_trajectory(&ap, eps)?;
        let limit = matching_diffusion(&ap, &traj)?;
        let problem = cfg.apnn(eps)?;
        let nets = cfg.init_networks(Mode::Apnn, seed)?;
        let mut tc = cfg.train_config();
        tc.seed = tc.seed.wrapping_add(seed);
        let (nets, _) = train(&problem, nets, &tc, None, None)?;
        let (breakdown, e_t) = problem.errors(&nets, &traj)?;
        let rho = problem.rho_distance(&nets, &limit)?;
        // The micro part enters E_T with weight eps, so its tail does too.
        let tails = eps * traj.tail_norm(cut);
        let reference_e_g = problem.field_breakdown(&traj.field(), EvalMode::Quadrature)?.eg_total();
        let zero = vec![0.0; traj.x().len()];
        let reference_rho = rho_distance(&traj, |k| traj.rho(k), |k| limit.rho(k).to_vec())
            / rho_distance(&traj, |k| limit.rho(k).to_vec(), |_| zero.clone());
        table.push(vec![eps, breakdown.eg_total(), e_t, tails, rho, reference_e_g, reference_rho]);
    }

    let col = |name: &str| table.column(name).unwrap_or_default();
    let (eps, e_g, e_t, tails, rho) = (col("epsilon"), col("e_g"), col("e_t"), col("tails"), col("rho_distance"));

    let c = e_t
        .iter()
        .zip(e_g.iter().zip(&tails))
        .map(|(t, (g, d))| t / (g + d))
        .fold(f64::NEG_INFINITY, f64::max);
    record.fits.insert("c".into(), c);
    if eps.len() < 2 {
        record.push(
            Verdict::new("bound_constant", Status::Inconclusive, c, study.max_c)
                .with_detail("insufficient sweep: one eps fits any C"),
        );
    } else {
        record.push(Verdict::at_most("bound_constant", c, study.max_c));
    }

    // Rows whose training got E_G under the threshold, by decreasing eps.
    let mut eligible: Vec<usize> = (0..eps.len()).filter(|&k| e_g[k] <= study.eg_threshold).collect();
    eligible.sort_by(|&a, &b| eps[b].total_cmp(&eps[a]));
    match eligible.last() {
        Some(&k) => record.push(
            Verdict::at_most("rho_tracks_limit", rho[k], study.rho_tolerance)
                .with_detail(format!("eps = {}", eps[k])),
        ),
        None => record.push(
            Verdict::new("rho_tracks_limit", Status::Inconclusive, f64::NAN, study.rho_tolerance)
                .with_detail(format!("no eps reached E_G <= {}", study.eg_threshold)),
        ),
    }
    if eligible.len() < 2 {
        record.push(
            Verdict::new("rho_decreases_with_eps", Status::Inconclusive, eligible.len() as f64, 2.0)
                .with_detail("fewer than two eps under the E_G threshold"),
        );
    } else {
        let rises = eligible.windows(2).filter(|w| rho[w[1]] >= rho[w[0]]).count();
        record.push(Verdict::at_most("rho_decreases_with_eps", rises as f64, 0.0));
    }

    record.table = table;
    record.plot = Some(PlotSpec {
        kind: PlotKind::EpsilonSweep,
        x: "epsilon".into(),
        y: ["e_g", "e_t", "tails", "rho_distance", "reference_rho_distance"]
            .map(String::from)
            .to_vec(),
        bound: None,
    });
    Ok(record)
}
