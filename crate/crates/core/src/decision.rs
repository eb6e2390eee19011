//! Scenario evaluation, ACT/VERIFY/DEFER policy, humility sweeps, and the
//! append-only audit trail.

use std::io::{BufRead, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::duty::{evaluate, BaselineHumility, DutyBreakdown, DutyInputs};
use crate::error::DutyError;
use crate::signal::SignalFunction;

/// A named decision case: an epistemic state plus the configuration it is
/// evaluated under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioRepr", into = "ScenarioRepr")]
pub struct Scenario {
    pub id: String,
    pub label: String,
    pub inputs: DutyInputs,
    pub signal_function: SignalFunction,
    pub baseline: BaselineHumility,
}

/// Flat on-disk form: {id, label, k, hi, c_signal, g, lambda}.
#[derive(Serialize, Deserialize)]
struct ScenarioRepr {
    id: String,
    label: String,
    k: f64,
    hi: f64,
    c_signal: f64,
    g: SignalFunction,
    #[serde(default = "default_lambda")]
    lambda: f64,
}

fn default_lambda() -> f64 {
    BaselineHumility::DEFAULT_LAMBDA
}

impl TryFrom<ScenarioRepr> for Scenario {
    type Error = DutyError;

    fn try_from(r: ScenarioRepr) -> Result<Self, DutyError> {
        r.g.validate()?;
        Ok(Scenario {
            id: r.id,
            label: r.label,
            inputs: DutyInputs::new(r.k, r.hi, r.c_signal)?,
            signal_function: r.g,
            baseline: BaselineHumility::new(r.lambda)?,
        })
    }
}

impl From<Scenario> for ScenarioRepr {
    fn from(s: Scenario) -> Self {
        ScenarioRepr {
            id: s.id,
            label: s.label,
            k: s.inputs.k(),
            hi: s.inputs.hi(),
            c_signal: s.inputs.c_signal(),
            g: s.signal_function,
            lambda: s.baseline.lambda(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recommendation {
    Act,
    Verify,
    Defer,
}

impl std::fmt::Display for Recommendation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Act => "ACT",
            Self::Verify => "VERIFY",
            Self::Defer => "DEFER",
        })
    }
}

/// Policy knobs. Total duty below `defer_below` defers regardless of the
/// action/repair split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyThresholds {
    pub defer_below: f64,
}

impl PolicyThresholds {
    pub const DEFAULT_DEFER_BELOW: f64 = 0.2;

    pub fn new(defer_below: f64) -> Result<Self, DutyError> {
        if (0.0..=1.0).contains(&defer_below) {
            Ok(Self { defer_below })
        } else {
            Err(DutyError::OutOfUnitRange {
                name: "defer_below",
                value: defer_below,
            })
        }
    }
}

impl Default for PolicyThresholds {
    fn default() -> Self {
        Self {
            defer_below: Self::DEFAULT_DEFER_BELOW,
        }
    }
}

/// Defer below the total-duty threshold; otherwise act when action duty
/// strictly exceeds repair duty. Ties resolve to Verify.
pub fn recommend(b: &DutyBreakdown, t: &PolicyThresholds) -> Recommendation {
    if b.total < t.defer_below {
        Recommendation::Defer
    } else if b.action > b.repair {
        Recommendation::Act
    } else {
        Recommendation::Verify
    }
}

/// Content hash over the evaluation configuration, so every audit record
/// pins the exact policy it was produced under.
pub fn config_digest(
    sf: &SignalFunction,
    baseline: BaselineHumility,
    thresholds: &PolicyThresholds,
) -> String {
    #[derive(Serialize)]
    struct DigestInput<'a> {
        signal_function: &'a SignalFunction,
        lambda: f64,
        thresholds: &'a PolicyThresholds,
    }
    let canonical = serde_json::to_vec(&DigestInput {
        signal_function: sf,
        lambda: baseline.lambda(),
        thresholds,
    })
    .expect("digest input serializes");
    hex::encode(Sha256::digest(canonical))
}

/// One persisted evaluation. Timestamps are recorded but carry no weight
/// in the digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub timestamp: DateTime<Utc>,
    pub scenario_id: String,
    pub inputs: DutyInputs,
    pub breakdown: DutyBreakdown,
    pub recommendation: Recommendation,
    pub config_digest: String,
}

/// Destination for audit records. Each append is atomic: a record is
/// acknowledged only after its full line is flushed.
pub trait AuditSink {
    fn append(&mut self, record: &AuditRecord) -> std::io::Result<()>;
}

/// JSON Lines sink: one record per LF-terminated line.
pub struct JsonlSink<W: Write> {
    writer: W,
}

impl<W: Write> JsonlSink<W> {
    pub fn new(writer: W) -> Self {
        Self { writer }
    }
}

impl JsonlSink<std::fs::File> {
    /// Opens (or creates) the log at `path` in append mode.
    pub fn open_append(path: &Path) -> std::io::Result<Self> {
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        Ok(Self::new(file))
    }
}

impl<W: Write> AuditSink for JsonlSink<W> {
    fn append(&mut self, record: &AuditRecord) -> std::io::Result<()> {
        let line = serde_json::to_string(record)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()
    }
}

/// Appends one record, acknowledging only after the flush succeeds.
pub fn append_audit<S: AuditSink>(record: &AuditRecord, sink: &mut S) -> std::io::Result<()> {
    sink.append(record)
}

/// Reads back a JSON Lines audit log.
pub fn read_audit_records<R: BufRead>(reader: R) -> std::io::Result<Vec<AuditRecord>> {
    reader
        .lines()
        .map(|line| {
            serde_json::from_str(&line?)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })
        .collect()
}

/// Audit append failure; the record (with its breakdown and
/// recommendation) survives in the error.
#[derive(Debug, Error)]
#[error("audit append failed for scenario {}: {source}", record.scenario_id)]
pub struct AuditWriteError {
    pub record: AuditRecord,
    #[source]
    pub source: std::io::Error,
}

/// Evaluates a scenario, applies the policy, and appends exactly one
/// audit record stamped with the given time.
pub fn evaluate_scenario_at<S: AuditSink>(
    scenario: &Scenario,
    thresholds: &PolicyThresholds,
    sink: &mut S,
    timestamp: DateTime<Utc>,
) -> Result<(DutyBreakdown, Recommendation), AuditWriteError> {
    let breakdown = evaluate(scenario.inputs, &scenario.signal_function, scenario.baseline)
        .expect("scenario construction validated the inputs");
    let recommendation = recommend(&breakdown, thresholds);
    let record = AuditRecord {
        timestamp,
        scenario_id: scenario.id.clone(),
        inputs: scenario.inputs,
        breakdown,
        recommendation,
        config_digest: config_digest(&scenario.signal_function, scenario.baseline, thresholds),
    };
    match append_audit(&record, sink) {
        Ok(()) => Ok((breakdown, recommendation)),
        Err(source) => Err(AuditWriteError { record, source }),
    }
}

/// `evaluate_scenario_at` stamped with the current time.
pub fn evaluate_scenario<S: AuditSink>(
    scenario: &Scenario,
    thresholds: &PolicyThresholds,
    sink: &mut S,
) -> Result<(DutyBreakdown, Recommendation), AuditWriteError> {
    evaluate_scenario_at(scenario, thresholds, sink, Utc::now())
}

/// One step of a humility sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    pub hi: f64,
    pub breakdown: DutyBreakdown,
    pub recommendation: Recommendation,
}

/// Evaluates duties at evenly spaced humility values from 0 to 1 with the
/// floor disabled. Action is monotone non-increasing and repair monotone
/// non-decreasing along the series.
pub fn humility_sweep(
    k: f64,
    c_signal: f64,
    sf: &SignalFunction,
    steps: usize,
    thresholds: &PolicyThresholds,
) -> Result<Vec<SweepPoint>, DutyError> {
    if steps < 2 {
        return Err(DutyError::NotPositive {
            name: "steps (minimum 2)",
            value: steps as f64,
        });
    }
    let lambda_off = BaselineHumility::disabled();
    (0..steps)
        .map(|i| {
            let hi = i as f64 / (steps - 1) as f64;
            let inputs = DutyInputs::new(k, hi, c_signal)?;
            let breakdown = evaluate(inputs, sf, lambda_off)?;
            Ok(SweepPoint {
                hi,
                breakdown,
                recommendation: recommend(&breakdown, thresholds),
            })
        })
        .collect()
}

/// Humility value at which action and repair duty cross:
/// hi* = 1 / (1 + g(c)).
pub fn crossover_hi(sf: &SignalFunction, c_signal: f64) -> Result<f64, DutyError> {
    Ok(1.0 / (1.0 + sf.eval(c_signal)?))
}

/// The four built-in case studies, evaluated with linear g and no
/// humility floor.
pub fn case_studies() -> Vec<Scenario> {
    let mk = |id: &str, label: &str, k: f64, hi: f64, c: f64| Scenario {
        id: id.to_string(),
        label: label.to_string(),
        inputs: DutyInputs::new(k, hi, c).expect("case values are in range"),
        signal_function: SignalFunction::Linear,
        baseline: BaselineHumility::disabled(),
    };
    vec![
        mk(
            "clinical-home-pass",
            "Clinical ethics: temporary home pass decision",
            0.75,
            0.40,
            0.60,
        ),
        mk(
            "recipient-rights",
            "Recipient-rights law: proportional capacity",
            0.80,
            0.50,
            0.70,
        ),
        mk(
            "financial-crisis-2008",
            "Economic governance: systemic risk oversight",
            0.90,
            0.10,
            0.40,
        ),
        mk(
            "autonomous-vehicle",
            "AI systems: self-restraint under uncertainty",
            0.70,
            0.30,
            0.80,
        ),
    ]
}
