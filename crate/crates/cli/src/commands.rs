//! Subcommand execution: build the resolved configuration, run the core
//! routines, and emit one document plus a human summary on stderr.

use bufsim_core::cycle_model::{improvement_percent, min_latency_ns, ImprovementConvention};
use bufsim_core::{analytics, sim, Architecture, QueueSpec, ReplicationReport};

use crate::config::{resolve, AppError, ArchSelection, CommandKind, ModeKind, Resolved};
use crate::emit::{self, AnalyticsRow, CycleRow, Document, SimRow};
use crate::Command;

pub fn run(command: Command) -> Result<(), AppError> {
    match command {
        Command::Analytics(args) => run_analytics(&resolve(CommandKind::Analytics, &args)?),
        Command::Simulate(args) => run_simulate(&resolve(CommandKind::Simulate, &args)?),
        Command::Compare(args) => run_compare(&resolve(CommandKind::Compare, &args)?),
        Command::Cycle(args) => run_cycle(&resolve(CommandKind::Cycle, &args)?),
    }
}

/// Queue specification for one architecture of the resolved run.  The
/// common pool sees the superposed arrivals of all ports and serves them at
/// the aggregate rate.
fn queue_spec(resolved: &Resolved, arch: Architecture) -> Result<QueueSpec, AppError> {
    let ports = resolved.ports as f64;
    let spec = match arch {
        Architecture::Distributed => QueueSpec::new(
            resolved.lambda,
            resolved.mu,
            resolved.distributed_capacity,
        )?,
        Architecture::Common => QueueSpec::new(
            resolved.lambda * ports,
            resolved.mu * ports,
            resolved.common_capacity,
        )?,
    };
    Ok(spec)
}

fn run_analytics(resolved: &Resolved) -> Result<(), AppError> {
    let mut rows = Vec::new();
    for arch in resolved.arch.architectures() {
        let spec = queue_spec(resolved, arch)?;
        let m = analytics::metrics(&spec)?;
        rows.push(AnalyticsRow {
            arch: arch.label().to_string(),
            lambda: spec.arrival_rate,
            mu: spec.service_rate,
            capacity: spec.capacity,
            rho: m.rho,
            blocking_prob: m.blocking_probability,
            expected_occupancy: m.expected_occupancy,
            naive_latency_s: m.naive_latency,
            effective_latency_s: m.effective_latency,
        });
    }

    eprintln!("closed-form M/M/1/N metrics");
    for row in &rows {
        eprintln!(
            "  {:<11} rho={:.6} N={:<4} P_block={:.6} E(n)={:.4} naive={:.4} us effective={:.4} us",
            row.arch,
            row.rho,
            row.capacity,
            row.blocking_prob,
            row.expected_occupancy,
            row.naive_latency_s * 1.0e6,
            row.effective_latency_s * 1.0e6,
        );
    }
    if resolved.arch == ArchSelection::Both {
        let common = &rows[0];
        let distributed = &rows[1];
        eprintln!(
            "  pooling: latency ratio {:.4}, blocking ratio {:.4}, naive improvement {:.2}%",
            distributed.naive_latency_s / common.naive_latency_s,
            distributed.blocking_prob / common.blocking_prob,
            100.0 * (distributed.naive_latency_s - common.naive_latency_s)
                / distributed.naive_latency_s,
        );
    }

    let doc = Document::Analytics(rows);
    let text = emit::render(&doc, resolved.format, &resolved.config_pairs())?;
    emit::write_output(resolved.out.as_deref(), &text)
}

fn sim_row(resolved: &Resolved, arch: Architecture, report: &ReplicationReport) -> SimRow {
    SimRow {
        arch: arch.label().to_string(),
        mode: resolved.mode.label().to_string(),
        lambda: resolved.lambda,
        mu: resolved.mu,
        capacity: resolved.capacity_of(arch),
        seed: resolved.seed,
        replications: report.replications,
        generated: report.generated,
        served: report.served,
        blocked: report.blocked,
        mean_latency_s: report.mean_latency.mean,
        ci95_s: report.mean_latency.ci_half_width,
        p95_s: report.mean_p95_latency,
        blocking_prob: report.blocking_probability.mean,
        throughput_pps: report.throughput.mean,
    }
}

fn describe_row(row: &SimRow) {
    let ci = match row.ci95_s {
        Some(half) => format!(" +/- {:.4}", half * 1.0e6),
        None => String::new(),
    };
    eprintln!(
        "  {:<11} served={} blocked={} mean latency {:.4}{} us, p95 {:.4} us, P_block {:.6}",
        row.arch,
        row.served,
        row.blocked,
        row.mean_latency_s * 1.0e6,
        ci,
        row.p95_s * 1.0e6,
        row.blocking_prob,
    );
}

fn run_simulate(resolved: &Resolved) -> Result<(), AppError> {
    let arch = match resolved.arch {
        ArchSelection::Common => Architecture::Common,
        ArchSelection::Distributed => Architecture::Distributed,
        ArchSelection::Both => unreachable!("resolve rejects simulate over both architectures"),
    };
    let config = resolved.sim_config(arch)?;
    let report = sim::run_replications(&config, resolved.replications)?;
    let row = sim_row(resolved, arch, &report);

    eprintln!(
        "{} simulation, {} replications of {} packets, seed {}",
        resolved.mode.label(),
        resolved.replications,
        resolved.packets,
        resolved.seed,
    );
    describe_row(&row);

    let doc = Document::Sim(vec![row]);
    let text = emit::render(&doc, resolved.format, &resolved.config_pairs())?;
    emit::write_output(resolved.out.as_deref(), &text)
}

fn run_compare(resolved: &Resolved) -> Result<(), AppError> {
    if resolved.mode == ModeKind::Cycle {
        return run_cycle(resolved);
    }

    // Both architectures run from the same master seed, so each replication
    // sees the identical arrival process under either buffer organisation.
    let mut rows = Vec::new();
    for arch in [Architecture::Common, Architecture::Distributed] {
        let config = resolved.sim_config(arch)?;
        let report = sim::run_replications(&config, resolved.replications)?;
        rows.push(sim_row(resolved, arch, &report));
    }

    eprintln!(
        "{} comparison, {} replications of {} packets, seed {}",
        resolved.mode.label(),
        resolved.replications,
        resolved.packets,
        resolved.seed,
    );
    for row in &rows {
        describe_row(row);
    }
    let common = &rows[0];
    let distributed = &rows[1];
    if distributed.mean_latency_s > 0.0 && common.blocking_prob > 0.0 {
        eprintln!(
            "  pooling: latency improvement {:.2}%, blocking ratio {:.2}",
            100.0 * (distributed.mean_latency_s - common.mean_latency_s)
                / distributed.mean_latency_s,
            distributed.blocking_prob / common.blocking_prob,
        );
    }

    let doc = Document::Sim(rows);
    let text = emit::render(&doc, resolved.format, &resolved.config_pairs())?;
    emit::write_output(resolved.out.as_deref(), &text)
}

fn run_cycle(resolved: &Resolved) -> Result<(), AppError> {
    let budget = resolved.budget()?;
    let contention = resolved.contention()?;
    let base = budget.base_cycles();

    let scenarios = [
        (Architecture::Common, "none", 0),
        (
            Architecture::Distributed,
            "moderate",
            contention.moderate_penalty_cycles,
        ),
        (
            Architecture::Distributed,
            "severe",
            contention.severe_penalty_cycles,
        ),
    ];
    let mut rows = Vec::new();
    for (arch, label, penalty) in scenarios {
        rows.push(CycleRow {
            arch: arch.label().to_string(),
            contention: label.to_string(),
            store_cycles: budget.store_cycles,
            schedule_cycles: budget.schedule_cycles,
            traverse_cycles: budget.traverse_cycles,
            penalty_cycles: penalty,
            total_cycles: base + penalty,
            latency_ns: min_latency_ns(&budget, penalty)?,
        });
    }

    let moderate_total = (base + contention.moderate_penalty_cycles) as f64;
    let severe_total = (base + contention.severe_penalty_cycles) as f64;
    let improvements = vec![
        (
            "improvement_relative_to_distributed_percent".to_string(),
            improvement_percent(
                base as f64,
                moderate_total,
                ImprovementConvention::RelativeToDistributed,
            )?,
        ),
        (
            "improvement_vs_12_cycle_base_percent".to_string(),
            improvement_percent(
                base as f64,
                severe_total,
                ImprovementConvention::PenaltyOverDistributedBase,
            )?,
        ),
    ];

    eprintln!("cycle latency budget, clock period {} ns", budget.clock_period_ns);
    for row in &rows {
        eprintln!(
            "  {:<11} {:<8} {} + {} cycles = {} cycles, {} ns",
            row.arch,
            row.contention,
            base,
            row.penalty_cycles,
            row.total_cycles,
            row.latency_ns,
        );
    }
    for (name, value) in &improvements {
        eprintln!("  {name} = {value:.4}");
    }

    let doc = Document::Cycle { rows, improvements };
    let text = emit::render(&doc, resolved.format, &resolved.config_pairs())?;
    emit::write_output(resolved.out.as_deref(), &text)
}
