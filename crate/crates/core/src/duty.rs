//! Core duty equation: D_total = K[(1 - HI) + HI * g(C_signal)].
//!
//! All evaluation is pure; conservation D_action + D_repair = D_total is
//! exact by construction because the total is always computed as the sum.

use serde::{Deserialize, Serialize};

use crate::error::DutyError;
use crate::signal::SignalFunction;

/// The epistemic state triple: knowledge magnitude K, humility index HI,
/// and contextual signal strength C_signal, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInputs")]
pub struct DutyInputs {
    k: f64,
    hi: f64,
    c_signal: f64,
}

#[derive(Deserialize)]
struct RawInputs {
    k: f64,
    hi: f64,
    c_signal: f64,
}

impl TryFrom<RawInputs> for DutyInputs {
    type Error = DutyError;

    fn try_from(raw: RawInputs) -> Result<Self, DutyError> {
        DutyInputs::new(raw.k, raw.hi, raw.c_signal)
    }
}

fn unit_checked(name: &'static str, value: f64) -> Result<f64, DutyError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(DutyError::OutOfUnitRange { name, value })
    }
}

impl DutyInputs {
    pub fn new(k: f64, hi: f64, c_signal: f64) -> Result<Self, DutyError> {
        Ok(Self {
            k: unit_checked("k", k)?,
            hi: unit_checked("hi", hi)?,
            c_signal: unit_checked("c_signal", c_signal)?,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn c_signal(&self) -> f64 {
        self.c_signal
    }
}

/// Floor on the humility index preventing zero-uncertainty evaluation.
///
/// The floor is applied as hi' = max(hi, lambda). A lambda of 0 disables it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BaselineHumility {
    lambda: f64,
}

impl BaselineHumility {
    pub const DEFAULT_LAMBDA: f64 = 0.05;

    pub fn new(lambda: f64) -> Result<Self, DutyError> {
        if (0.0..1.0).contains(&lambda) {
            Ok(Self { lambda })
        } else {
            Err(DutyError::OutOfHalfOpenRange {
                name: "lambda",
                value: lambda,
            })
        }
    }

    /// No floor: evaluation uses the raw humility index.
    pub fn disabled() -> Self {
        Self { lambda: 0.0 }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Default for BaselineHumility {
    fn default() -> Self {
        Self {
            lambda: Self::DEFAULT_LAMBDA,
        }
    }
}

impl TryFrom<f64> for BaselineHumility {
    type Error = DutyError;

    fn try_from(lambda: f64) -> Result<Self, DutyError> {
        Self::new(lambda)
    }
}

impl From<BaselineHumility> for f64 {
    fn from(b: BaselineHumility) -> f64 {
        b.lambda
    }
}

/// One evaluation of the equation: action duty K(1 - HI'), repair duty
/// K * HI' * g(C_signal), and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DutyBreakdown {
    pub action: f64,
    pub repair: f64,
    pub total: f64,
}

/// hi' = max(hi, lambda). Idempotent; never lowers an already-humble input.
pub fn effective_humility(hi: f64, baseline: BaselineHumility) -> f64 {
    hi.max(baseline.lambda)
}

/// Evaluates the duty equation for one epistemic state.
pub fn evaluate(
    inputs: DutyInputs,
    sf: &SignalFunction,
    baseline: BaselineHumility,
) -> Result<DutyBreakdown, DutyError> {
    sf.validate()?;
    let hi = effective_humility(inputs.hi, baseline);
    let action = inputs.k * (1.0 - hi);
    let repair = inputs.k * hi * sf.eval_unchecked(inputs.c_signal);
    Ok(DutyBreakdown {
        action,
        repair,
        // Sum, never the factored form: conservation is structural.
        total: action + repair,
    })
}

/// |action + repair - total|, a regression guard on conservation.
pub fn conservation_residual(b: &DutyBreakdown) -> f64 {
    (b.action + b.repair - b.total).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn breakdown(k: f64, hi: f64, c: f64) -> DutyBreakdown {
        evaluate(
            DutyInputs::new(k, hi, c).unwrap(),
            &SignalFunction::Linear,
            BaselineHumility::disabled(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        assert!(DutyInputs::new(1.2, 0.5, 0.5).is_err());
        assert!(DutyInputs::new(0.5, -0.1, 0.5).is_err());
        assert!(DutyInputs::new(0.5, 0.5, f64::NAN).is_err());
        assert!(BaselineHumility::new(1.0).is_err());
        assert!(BaselineHumility::new(-0.01).is_err());
    }

    #[test]
    fn humility_floor() {
        let b = BaselineHumility::default();
        assert_eq!(effective_humility(0.0, b), 0.05);
        assert_eq!(effective_humility(0.40, b), 0.40);
        assert_eq!(effective_humility(0.05, b), 0.05);
    }

    #[test]
    fn home_pass_case() {
        let b = breakdown(0.75, 0.40, 0.60);
        assert!((b.action - 0.45).abs() < 1e-12);
        assert!((b.repair - 0.18).abs() < 1e-12);
        assert!((b.total - 0.63).abs() < 1e-12);
        assert_eq!(conservation_residual(&b), 0.0);
    }

    #[test]
    fn zero_knowledge_zeroes_all_duty() {
        let b = breakdown(0.0, 0.7, 0.3);
        assert_eq!((b.action, b.repair, b.total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn zero_humility_allocates_all_duty_to_action() {
        let b = breakdown(1.0, 0.0, 0.9);
        assert_eq!((b.action, b.repair, b.total), (1.0, 0.0, 1.0));
    }

    #[test]
    fn inputs_deserialize_with_validation() {
        let ok: DutyInputs = serde_json::from_str(r#"{"k":0.5,"hi":0.2,"c_signal":0.9}"#).unwrap();
        assert_eq!(ok.k(), 0.5);
        let bad: Result<DutyInputs, _> = serde_json::from_str(r#"{"k":1.5,"hi":0.2,"c_signal":0.9}"#);
        assert!(bad.is_err());
    }
}
