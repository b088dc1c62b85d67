//! Crossbar-mode run loop on a discrete cycle clock.
//!
//! Scheduling epochs sit on the `schedule_cycles` grid. Each epoch runs
//! iSLIP over the live request matrix and retires the head of every
//! matched VOQ, stamping departures `traverse_cycles` later. Epochs are
//! armed lazily: an admission into an idle buffer books the next grid
//! point, and an epoch that leaves the buffer non-empty books its
//! successor, so an idle router schedules no events at all.
//!
//! Alongside the event-driven latency measurements, every admitted packet
//! is charged a pipeline budget in nanoseconds: the fixed
//! store/schedule/traverse cycles plus a contention penalty derived from
//! its pool's occupancy at admission. The pooled architecture has enough
//! headroom that it never pays a penalty; per-port pools pay when crowded
//! past the configured threshold.

use std::collections::HashMap;

use crate::cycle_model::min_latency_ns;
use crate::engine::{EventClass, EventQueue};
use crate::metrics::{Collector, SimReport, StreamingStats};
use crate::router::{Admission, BufferState, PacketIdGen};
use crate::scheduler::{schedule_epoch, IslipState};
use crate::sim::Architecture;
use crate::traffic::{PortChoice, RandomStream, Source, DOMAIN_SOURCE};

use super::{epoch_after, SimConfig, SimError, StopCondition, TraceHash, Wiring};

#[derive(Debug, Clone, Copy)]
enum Payload {
    Arrival { source: usize },
    Epoch,
}

const AUDIT_INTERVAL: u64 = 1000;

pub(super) fn run(config: &SimConfig, seed: u64) -> Result<SimReport, SimError> {
    let ports = config.ports;
    let arch = config.buffer_architecture();
    let mut buffer = BufferState::new(ports, arch)?;
    let mut collector = Collector::new(config.warmup);
    let mut ids = PacketIdGen::new();
    let mut trace = TraceHash::new();
    let destinations = config.weights()?;

    let period_s = config.budget.clock_period_ns * 1e-9;
    let cycles_of = |t_seconds: f64| -> u64 { (t_seconds / period_s).round() as u64 };
    let seconds_of = |cycle: u64| -> f64 { cycle as f64 * period_s };

    let mut sources: Vec<Source> = match config.wiring {
        Wiring::Independent => (0..ports)
            .map(|port| {
                Source::new(
                    config.lambda,
                    PortChoice::Fixed(port),
                    destinations.clone(),
                    RandomStream::substream(seed, DOMAIN_SOURCE, port as u64),
                )
            })
            .collect::<Result<_, _>>()?,
        Wiring::Aggregate => vec![Source::new(
            config.lambda * ports as f64,
            PortChoice::Drawn(crate::traffic::Weights::uniform(ports)?),
            destinations,
            RandomStream::substream(seed, DOMAIN_SOURCE, 0),
        )?],
    };

    let mut islip_state = IslipState::new(ports)?;
    let mut queue: EventQueue<u64, Payload> = EventQueue::new();
    let mut epoch_armed = false;
    // Pipeline penalty charged at admission, resolved at departure.
    let mut penalty_of: HashMap<u64, u64> = HashMap::new();
    let mut cycle_latency = StreamingStats::new();
    let epoch_period = config.budget.schedule_cycles.max(1);

    let arrival_quota = match config.stop {
        StopCondition::GeneratedPackets(n) => Some(n),
        _ => None,
    };
    let served_target = match config.stop {
        StopCondition::ServedPackets(n) => Some(n),
        _ => None,
    };
    let horizon_cycles = match config.stop {
        StopCondition::TimeHorizon(t) => Some(cycles_of(t)),
        _ => None,
    };

    if arrival_quota != Some(0) {
        for (index, source) in sources.iter().enumerate() {
            queue.schedule(
                cycles_of(source.next_time()),
                EventClass::Arrival,
                Payload::Arrival { source: index },
            )?;
        }
    }

    'main: while let Some(next_time) = queue.peek_time() {
        if let Some(end) = horizon_cycles {
            if next_time > end {
                break;
            }
        }
        let event = queue.pop().expect("peeked event vanished");
        let now = event.time;
        let now_s = seconds_of(now);
        trace.fold(now);

        match event.payload {
            Payload::Arrival { source } => {
                // Arrivals booked before the quota filled are void.
                if let Some(quota) = arrival_quota {
                    if collector.generated() >= quota {
                        continue 'main;
                    }
                }
                let (at, mut packet) = sources[source].next_arrival(&mut ids);
                debug_assert_eq!(cycles_of(at), now, "arrival fired off its cycle");
                trace.fold_event(&event, packet.id);
                // Timestamps live on the cycle grid, in seconds.
                packet.created_at = now_s;
                collector.record_generated();
                let pool = buffer.pool_of_input(packet.input_port);
                let occupancy_before = buffer.pool_occupancy(pool)?;
                match buffer.try_enqueue(packet, now_s)? {
                    Admission::Admitted => {
                        // Only per-port pools contend; the shared pool's
                        // headroom keeps its pipeline penalty-free.
                        let penalty = match config.arch {
                            Architecture::Common => 0,
                            Architecture::Distributed => config
                                .contention
                                .penalty_for_occupancy(occupancy_before, buffer.pool_capacity()),
                        };
                        penalty_of.insert(packet.id, penalty);
                        collector.record_occupancy(now_s, buffer.total_occupancy())?;
                        if !epoch_armed {
                            queue.schedule(
                                epoch_after(now, epoch_period),
                                EventClass::ScheduleEpoch,
                                Payload::Epoch,
                            )?;
                            epoch_armed = true;
                        }
                    }
                    Admission::Blocked => collector.record_block(&packet),
                }
                let more_arrivals = match arrival_quota {
                    Some(quota) => collector.generated() < quota,
                    None => true,
                };
                if more_arrivals {
                    queue.schedule(
                        cycles_of(sources[source].next_time()),
                        EventClass::Arrival,
                        Payload::Arrival { source },
                    )?;
                }
            }
            Payload::Epoch => {
                let matching = schedule_epoch(&buffer, &mut islip_state, config.islip_iterations)?;
                trace.fold_event(&event, matching.len() as u64);
                let depart_s = seconds_of(now + config.budget.traverse_cycles);
                let departed = buffer.retire(&matching, depart_s)?;
                for packet in &departed {
                    trace.fold(packet.id);
                    collector.record_departure(packet)?;
                    let penalty = penalty_of.remove(&packet.id).ok_or_else(|| {
                        SimError::Inconsistent(format!(
                            "packet {} departed without an admission record",
                            packet.id
                        ))
                    })?;
                    cycle_latency.record(min_latency_ns(&config.budget, penalty)?);
                }
                if !departed.is_empty() {
                    collector.record_occupancy(now_s, buffer.total_occupancy())?;
                }
                if let Some(target) = served_target {
                    if collector.served() >= target {
                        break 'main;
                    }
                }
                if buffer.is_empty() {
                    epoch_armed = false;
                } else {
                    queue.schedule(now + epoch_period, EventClass::ScheduleEpoch, Payload::Epoch)?;
                }
            }
        }

        if queue.processed().is_multiple_of(AUDIT_INTERVAL) {
            collector.check_conservation(buffer.total_occupancy() as u64)?;
            if !buffer.check_consistency() {
                return Err(SimError::Inconsistent(
                    "buffer indexes disagree with queue contents".into(),
                ));
            }
        }
    }

    let elapsed = match horizon_cycles {
        Some(end) => seconds_of(end),
        None => seconds_of(queue.now()),
    };
    let resident = buffer.total_occupancy() as u64;
    let mut report = collector.finish(
        config.arch.label(),
        config.mode.label(),
        elapsed,
        resident,
        trace.value(),
    )?;
    report.cycle_latency_ns = Some(cycle_latency.summary());
    Ok(report)
}
