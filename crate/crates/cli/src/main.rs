//! triagebench: decision-threshold selection, clinical workflow simulation,
//! and evaluation statistics over case-level score files.

mod commands;
mod parse;
mod registry;
mod report;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{agreement, compare, metrics, reader, simulate, survival, thresholds};

#[derive(Parser)]
#[command(
    name = "triagebench",
    version,
    about = "Decision-threshold and clinical-workflow evaluation toolkit",
    after_help = "Reports are canonical JSON (sorted keys); plot data is tidy CSV.\n\
                  Every command is deterministic given its inputs and --seed;\n\
                  TRIAGEBENCH_SEED overrides the built-in default seed."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discrimination metrics: macro-AUC with CI, Youden operating points
    Metrics(metrics::MetricsArgs),
    /// Select a threshold under a policy and lock it into the registry
    ThresholdSelect(thresholds::ThresholdSelectArgs),
    /// Apply locked thresholds from the registry to a new cohort
    ThresholdApply(thresholds::ThresholdApplyArgs),
    /// Simulate AI-triggered second review of doctor-negative cases
    SecondReview(simulate::SecondReviewArgs),
    /// Rule-out / rule-in triage at explicit thresholds
    Triage(thresholds::TriageArgs),
    /// Rank-based prioritization of genomic testing
    Prioritize(simulate::PrioritizeArgs),
    /// Partition deferred cases under a locked rule-out threshold
    Deferral(simulate::DeferralArgs),
    /// Crossover reader-study statistics (GEE, agreement, trajectories)
    ReaderStudy(reader::ReaderStudyArgs),
    /// Survival analysis: C-index, KM, log-rank, Cox, adjusted curves
    Survival(survival::SurvivalArgs),
    /// Rank models across cohorts with one-sided Wilcoxon tests
    Compare(compare::CompareArgs),
    /// Paired pre/post biomarker agreement (kappa, McNemar)
    Agreement(agreement::AgreementArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Metrics(args) => metrics::run(args).map(|r| (r, args.out.clone(), "metrics")),
        Command::ThresholdSelect(args) => {
            thresholds::run_select(args).map(|r| (r, args.out.clone(), "threshold_select"))
        }
        Command::ThresholdApply(args) => {
            thresholds::run_apply(args).map(|r| (r, args.out.clone(), "threshold_apply"))
        }
        Command::SecondReview(args) => {
            simulate::run_second_review(args).map(|r| (r, args.out.clone(), "second_review"))
        }
        Command::Triage(args) => {
            thresholds::run_triage(args).map(|r| (r, args.out.clone(), "triage"))
        }
        Command::Prioritize(args) => {
            simulate::run_prioritize(args).map(|r| (r, args.out.clone(), "prioritize"))
        }
        Command::Deferral(args) => {
            simulate::run_deferral(args).map(|r| (r, args.out.clone(), "deferral"))
        }
        Command::ReaderStudy(args) => {
            reader::run(args).map(|r| (r, args.out.clone(), "reader_study"))
        }
        Command::Survival(args) => survival::run(args).map(|r| (r, args.out.clone(), "survival")),
        Command::Compare(args) => compare::run(args).map(|r| (r, args.out.clone(), "compare")),
        Command::Agreement(args) => {
            agreement::run(args).map(|r| (r, args.out.clone(), "agreement"))
        }
    };

    match outcome {
        Ok((report, out_dir, name)) => {
            let path = match report.write(&out_dir, name) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::FAILURE;
                }
            };
            println!("wrote {}", path.display());
            if report.ok() {
                ExitCode::SUCCESS
            } else {
                for err in &report.errors {
                    eprintln!("section '{}' failed: {}", err.section, err.message);
                }
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
