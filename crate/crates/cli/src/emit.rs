//! Output rendering: CSV and JSON documents plus file/stdout delivery.
//!
//! Every document carries the data rows first and the full resolved
//! configuration afterwards, so a result file can be interpreted without the
//! invocation that produced it.  In CSV the header is always the first line,
//! data rows follow, and the configuration trails as `# key=value` comment
//! lines.  In JSON the configuration is an embedded object.  Rendering is a
//! pure function of the rows and configuration, which makes repeated runs
//! byte-identical.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::AppError;

/// Column order for simulation rows; kept in lockstep with
/// [`SimRow::csv_line`].
pub const SIM_HEADER: &str = "arch,mode,lambda,mu,capacity,seed,replications,generated,served,\
blocked,mean_latency_s,ci95_s,p95_s,blocking_prob,throughput_pps";

/// Column order for closed-form analytics rows.
pub const ANALYTICS_HEADER: &str =
    "arch,lambda,mu,capacity,rho,blocking_prob,expected_occupancy,naive_latency_s,\
effective_latency_s";

/// Column order for cycle budget rows.
pub const CYCLE_HEADER: &str =
    "arch,contention,store_cycles,schedule_cycles,traverse_cycles,penalty_cycles,total_cycles,\
latency_ns";

/// One simulated architecture aggregated over its replications.
#[derive(Debug, Clone, Serialize)]
pub struct SimRow {
    pub arch: String,
    pub mode: String,
    pub lambda: f64,
    pub mu: f64,
    pub capacity: usize,
    pub seed: u64,
    pub replications: usize,
    pub generated: u64,
    pub served: u64,
    pub blocked: u64,
    pub mean_latency_s: f64,
    pub ci95_s: Option<f64>,
    pub p95_s: f64,
    pub blocking_prob: f64,
    pub throughput_pps: f64,
}

impl SimRow {
    fn csv_line(&self) -> String {
        let ci = match self.ci95_s {
            Some(half) => half.to_string(),
            None => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.arch,
            self.mode,
            self.lambda,
            self.mu,
            self.capacity,
            self.seed,
            self.replications,
            self.generated,
            self.served,
            self.blocked,
            self.mean_latency_s,
            ci,
            self.p95_s,
            self.blocking_prob,
            self.throughput_pps
        )
    }
}

/// One architecture evaluated in closed form.
#[derive(Debug, Clone, Serialize)]
pub struct AnalyticsRow {
    pub arch: String,
    pub lambda: f64,
    pub mu: f64,
    pub capacity: usize,
    pub rho: f64,
    pub blocking_prob: f64,
    pub expected_occupancy: f64,
    pub naive_latency_s: f64,
    pub effective_latency_s: f64,
}

impl AnalyticsRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.arch,
            self.lambda,
            self.mu,
            self.capacity,
            self.rho,
            self.blocking_prob,
            self.expected_occupancy,
            self.naive_latency_s,
            self.effective_latency_s
        )
    }
}

/// One contention scenario priced through the cycle budget.
#[derive(Debug, Clone, Serialize)]
pub struct CycleRow {
    pub arch: String,
    pub contention: String,
    pub store_cycles: u64,
    pub schedule_cycles: u64,
    pub traverse_cycles: u64,
    pub penalty_cycles: u64,
    pub total_cycles: u64,
    pub latency_ns: f64,
}

impl CycleRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.arch,
            self.contention,
            self.store_cycles,
            self.schedule_cycles,
            self.traverse_cycles,
            self.penalty_cycles,
            self.total_cycles,
            self.latency_ns
        )
    }
}

/// A complete machine-readable result.
pub enum Document {
    Sim(Vec<SimRow>),
    Analytics(Vec<AnalyticsRow>),
    /// Cycle table plus labeled improvement percentages.
    Cycle {
        rows: Vec<CycleRow>,
        improvements: Vec<(String, f64)>,
    },
}

#[derive(Serialize)]
struct JsonDocument<'a, R: Serialize> {
    config: std::collections::BTreeMap<&'a str, &'a str>,
    rows: &'a [R],
    #[serde(skip_serializing_if = "Option::is_none")]
    improvements: Option<std::collections::BTreeMap<&'a str, f64>>,
}

fn render_json<R: Serialize>(
    rows: &[R],
    config_pairs: &[(String, String)],
    improvements: Option<&[(String, f64)]>,
) -> Result<String, AppError> {
    let config = config_pairs
        .iter()
        .map(|(k, v)| (k.as_str(), v.as_str()))
        .collect();
    let improvements = improvements.map(|items| {
        items
            .iter()
            .map(|(name, value)| (name.as_str(), *value))
            .collect()
    });
    let doc = JsonDocument {
        config,
        rows,
        improvements,
    };
    serde_json::to_string_pretty(&doc)
        .map(|mut text| {
            text.push('\n');
            text
        })
        .map_err(|err| AppError::Internal(format!("json encoding failed: {err}")))
}

fn push_config_comments(out: &mut String, config_pairs: &[(String, String)]) {
    for (key, value) in config_pairs {
        out.push_str("# ");
        out.push_str(key);
        out.push('=');
        out.push_str(value);
        out.push('\n');
    }
}

fn render_csv(doc: &Document, config_pairs: &[(String, String)]) -> String {
    let mut out = String::new();
    match doc {
        Document::Sim(rows) => {
            out.push_str(SIM_HEADER);
            out.push('\n');
            for row in rows {
                out.push_str(&row.csv_line());
                out.push('\n');
            }
        }
        Document::Analytics(rows) => {
            out.push_str(ANALYTICS_HEADER);
            out.push('\n');
            for row in rows {
                out.push_str(&row.csv_line());
                out.push('\n');
            }
        }
        Document::Cycle { rows, .. } => {
            out.push_str(CYCLE_HEADER);
            out.push('\n');
            for row in rows {
                out.push_str(&row.csv_line());
                out.push('\n');
            }
        }
    }
    push_config_comments(&mut out, config_pairs);
    if let Document::Cycle { improvements, .. } = doc {
        for (name, value) in improvements {
            out.push_str("# ");
            out.push_str(name);
            out.push('=');
            out.push_str(&value.to_string());
            out.push('\n');
        }
    }
    out
}

/// Renders the document in the requested format.
pub fn render(
    doc: &Document,
    format: crate::config::FormatKind,
    config_pairs: &[(String, String)],
) -> Result<String, AppError> {
    match format {
        crate::config::FormatKind::Csv => Ok(render_csv(doc, config_pairs)),
        crate::config::FormatKind::Json => match doc {
            Document::Sim(rows) => render_json(rows, config_pairs, None),
            Document::Analytics(rows) => render_json(rows, config_pairs, None),
            Document::Cycle { rows, improvements } => {
                render_json(rows, config_pairs, Some(improvements))
            }
        },
    }
}

/// Writes the rendered document to the path, or stdout when no path is set.
pub fn write_output(path: Option<&Path>, content: &str) -> Result<(), AppError> {
    match path {
        Some(path) => std::fs::write(path, content)
            .map_err(|err| AppError::Io(format!("cannot write {}: {err}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|err| AppError::Io(format!("cannot write to stdout: {err}")))
        }
    }
}
