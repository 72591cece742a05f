//! Experiment plans, repeated trials, aggregation and result files.

mod aggregate;
mod output;
mod plan;
mod run;

pub use aggregate::{aggregate, SummaryRow};
pub use output::{
    format_sig, read_results_csv, results_to_csv, results_to_json, summary_to_markdown, write_results,
    OutputFormat, RESULTS_HEADER,
};
pub use plan::{ExperimentPlan, Method, PlanCell};
pub use run::{data_seed, fit_method, method_loss, run_plan, run_trial, trial_seed, FittedMethod, TrialResult};
