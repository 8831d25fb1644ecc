//! TD, CTD and FTD iterations driven by the published stepsize policies.

mod run;
mod schedule;

pub use run::{
    ctd_step, ftd_step, robust_output, robust_output_stochastic, run_solver, td_step, Algorithm,
    Budget, Monitor, RunConfig, SolverRun, TraceConfig, TracePoint, Workspace, DIVERGENCE_NORM,
};
pub use schedule::{
    schedule_eval, CompiledSchedule, RegionRule, ScheduleCursor, StepParams, StepSchedule,
};

#[cfg(test)]
mod tests;
