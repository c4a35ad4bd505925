//! `kinpinn`: operator checks, training, studies, reference runs and
//! reports.
//!
//! Exit status is 0 when every verdict passed, was flagged or was
//! inconclusive, 1 on any failed verdict or runtime error, and 2 on a usage
//! error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kinpinn::config::{Mode, RunConfig};
use kinpinn::harness::{
    emit_report, run_ap_study, run_error_vs_loss_study, run_operator_suite, Status, StudyRecord,
};
use kinpinn::network::{save_checkpoint, TanhNetwork};
use kinpinn::reference::{ap_trajectory, dvm_ap_study};
use kinpinn::train::train;
use kinpinn::{Error, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "kinpinn", version, about = "Kinetic PINN/APNN operator checks and studies")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply to anything missing.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "kinpinn-out")]
    out: PathBuf,
    /// Overrides both the network and the optimizer seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated `eps` sweep, e.g. `1,0.1,0.01`.
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Velocity cube side.
    #[arg(long = "R", global = true)]
    side: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the operator property suite.
    CheckOperators,
    /// Train networks in the configured mode and save them with the log.
    Train,
    /// Run the error-vs-loss or the asymptotic-preserving study.
    Study {
        #[command(subcommand)]
        study: Study,
    },
    /// Reference solvers.
    Reference {
        #[command(subcommand)]
        solver: Solver,
    },
    /// Rebuild a report from saved study records.
    Report {
        /// Record JSON files written by earlier runs.
        records: Vec<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Study {
    ErrorVsLoss,
    Ap,
}

#[derive(Subcommand)]
enum Solver {
    /// Well-prepared DVM runs for each `eps`, with the diffusion-limit table.
    Dvm,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.network.seed = seed;
            cfg.optimizer.seed = seed;
        }
        if let Some(eps) = &self.eps {
            cfg.study.epsilons = eps.clone();
        }
        if let Some(r) = self.side {
            cfg.weights.r = r;
        }
        Ok(cfg)
    }
}

fn write_manifest(out: &Path, command: &str, cfg: &RunConfig, seeds: &[u64], outcome: Option<Status>) -> Result<()> {
    let manifest = json!({
        "command": command,
        "config_hash": cfg.hash()?,
        "seeds": seeds,
        "network_seed": cfg.network.seed,
        "optimizer_seed": cfg.optimizer.seed,
        "outcome": outcome.map(Status::as_str),
        "config": cfg,
    });
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

fn print_record(rec: &StudyRecord) {
    for v in rec.verdicts() {
        println!(
            "{:<13} {:<40} measured {:<12.4e} tolerance {:<12.4e} {}",
            v.status.as_str(),
            v.check,
            v.measured,
            v.tolerance,
            v.detail
        );
    }
    println!("{}: {}", rec.id, rec.outcome().as_str());
}

fn study(common: &Common, name: &str, run: fn(&RunConfig) -> Result<StudyRecord>) -> Result<Status> {
    let cfg = common.config()?;
    let rec = run(&cfg)?;
    print_record(&rec);
    emit_report(std::slice::from_ref(&rec), &common.out)?;
    write_manifest(&common.out, name, &cfg, &rec.seeds, Some(rec.outcome()))?;
    Ok(rec.outcome())
}

fn save_nets(nets: &[TanhNetwork], out: &Path) -> Result<()> {
    for (k, net) in nets.iter().enumerate() {
        save_checkpoint(net, &out.join(format!("net{k}.kpnn")))?;
    }
    Ok(())
}

fn train_cmd(common: &Common) -> Result<Status> {
    let cfg = common.config()?;
    fs::create_dir_all(&common.out)?;
    let ckpt = common.out.join("checkpoints");
    if cfg.optimizer.checkpoint_every > 0 {
        fs::create_dir_all(&ckpt)?;
    }
    let ckpt = (cfg.optimizer.checkpoint_every > 0).then_some(ckpt.as_path());
    let tc = cfg.train_config();
    let log = match cfg.scenario.mode {
        Mode::Pinn => {
            let setup = cfg.pinn()?;
            let case = setup.case.clone();
            let problem = &setup.problem;
            let probe = |n: &[TanhNetwork]| problem.total_error(&n[0], &|t, x, xi| case.u_star(t, x, xi));
            let nets = cfg.init_networks(Mode::Pinn, 0)?;
            let (nets, log) = train(problem, nets, &tc, Some(&probe), ckpt)?;
            save_nets(&nets, &common.out)?;
            log
        }
        Mode::Apnn => {
            let eps = common.eps.as_ref().and_then(|e| e.first().copied()).unwrap_or(cfg.weights.epsilon);
            let problem = cfg.apnn(eps)?;
            let reference = ap_trajectory(&cfg.ap_study(), eps)?;
            let probe = |n: &[TanhNetwork]| problem.total_error(n, &reference);
            let nets = cfg.init_networks(Mode::Apnn, 0)?;
            let (nets, log) = train(&problem, nets, &tc, Some(&probe), ckpt)?;
            save_nets(&nets, &common.out)?;
            log
        }
    };
    log.write_csv(fs::File::create(common.out.join("log.csv"))?)?;
    log.write_timing_csv(fs::File::create(common.out.join("timing.csv"))?)?;
    if let Some(last) = log.last() {
        println!(
            "iteration {}: E_G = {:.4e}, E_T = {}",
            last.iteration,
            last.breakdown.eg_total(),
            last.e_t.map_or("-".into(), |e| format!("{e:.4e}"))
        );
    }
    write_manifest(&common.out, "train", &cfg, &[cfg.network.seed, cfg.optimizer.seed], None)?;
    Ok(Status::Pass)
}

fn dvm_cmd(common: &Common) -> Result<Status> {
    let cfg = common.config()?;
    fs::create_dir_all(&common.out)?;
    let ap = cfg.ap_study();
    for &eps in &cfg.study.epsilons {
        let traj = ap_trajectory(&ap, eps)?;
        traj.save(&common.out.join(format!("dvm_eps{eps}.kdvm")))?;
    }
    let table = dvm_ap_study(&ap, &cfg.study.epsilons)?;
    for row in &table.rows {
        println!("eps {:<8} |rho - rho0| = {:.4e}", row.epsilon, row.error);
    }
    if let Some(fit) = &table.fit {
        println!("fitted order {:.3} (residual {:.2e})", fit.slope, fit.residual);
    }
    fs::write(common.out.join("ap_table.json"), serde_json::to_string_pretty(&table)? + "\n")?;
    write_manifest(&common.out, "reference dvm", &cfg, &[], None)?;
    Ok(Status::Pass)
}

fn report_cmd(common: &Common, paths: &[PathBuf]) -> Result<Status> {
    let records = paths
        .iter()
        .map(|p| Ok(serde_json::from_str::<StudyRecord>(&fs::read_to_string(p)?)?))
        .collect::<Result<Vec<_>>>()?;
    let files = emit_report(&records, &common.out)?;
    println!("wrote {} files to {}", files.len(), common.out.display());
    let worst = records.iter().map(StudyRecord::outcome).find(|s| *s == Status::Fail);
    Ok(worst.unwrap_or(Status::Pass))
}

fn run(cli: &Cli) -> Result<Status> {
    let c = &cli.common;
    match &cli.command {
        Command::CheckOperators => study(c, "check-operators", run_operator_suite),
        Command::Train => train_cmd(c),
        Command::Study { study: Study::ErrorVsLoss } => study(c, "study error-vs-loss", run_error_vs_loss_study),
        Command::Study { study: Study::Ap } => study(c, "study ap", run_ap_study),
        Command::Reference { solver: Solver::Dvm } => dvm_cmd(c),
        Command::Report { records } => report_cmd(c, records),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Fail) => ExitCode::from(1),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::SizeCondition { .. } = e {
                eprintln!("the relaxation kernel must satisfy kappa = (alpha1 - alpha0) / (2 alpha0) < 1");
            }
            ExitCode::from(1)
        }
    }
}
