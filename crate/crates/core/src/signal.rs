use serde::{Deserialize, Serialize};

use crate::error::DutyError;

/// Contextual signal function g mapping signal strength to a duty
/// amplification coefficient. All three shipped forms are monotone
/// non-decreasing and bounded by 1 on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum SignalFunction {
    /// g(x) = x
    Linear,
    /// g(x) = e^{gain (x - 1)}
    Exponential { gain: f64 },
    /// g(x) = 1 / (1 + e^{-steepness (x - midpoint)})
    Logistic { steepness: f64, midpoint: f64 },
}

pub const DEFAULT_LOGISTIC_STEEPNESS: f64 = 10.0;
pub const DEFAULT_LOGISTIC_MIDPOINT: f64 = 0.5;
pub const DEFAULT_EXPONENTIAL_GAIN: f64 = 1.0;

impl SignalFunction {
    pub fn exponential(gain: f64) -> Result<Self, DutyError> {
        if !(gain > 0.0) {
            return Err(DutyError::NotPositive {
                name: "gain",
                value: gain,
            });
        }
        Ok(Self::Exponential { gain })
    }

    pub fn logistic(steepness: f64, midpoint: f64) -> Result<Self, DutyError> {
        if !(steepness > 0.0) {
            return Err(DutyError::NotPositive {
                name: "steepness",
                value: steepness,
            });
        }
        if !(0.0..=1.0).contains(&midpoint) {
            return Err(DutyError::OutOfUnitRange {
                name: "midpoint",
                value: midpoint,
            });
        }
        Ok(Self::Logistic {
            steepness,
            midpoint,
        })
    }

    /// The logistic form with steepness 10 centered at 0.5.
    pub fn logistic_default() -> Self {
        Self::Logistic {
            steepness: DEFAULT_LOGISTIC_STEEPNESS,
            midpoint: DEFAULT_LOGISTIC_MIDPOINT,
        }
    }

    pub fn validate(&self) -> Result<(), DutyError> {
        match *self {
            Self::Linear => Ok(()),
            Self::Exponential { gain } => Self::exponential(gain).map(|_| ()),
            Self::Logistic {
                steepness,
                midpoint,
            } => Self::logistic(steepness, midpoint).map(|_| ()),
        }
    }

    /// Evaluates g at a signal strength in [0, 1].
    pub fn eval(&self, x: f64) -> Result<f64, DutyError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(DutyError::OutOfUnitRange {
                name: "signal",
                value: x,
            });
        }
        self.validate()?;
        Ok(self.eval_unchecked(x))
    }

    /// Evaluation without domain checks; callers guarantee x in [0, 1]
    /// and a validated shape.
    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        match *self {
            Self::Linear => x,
            Self::Exponential { gain } => (gain * (x - 1.0)).exp(),
            Self::Logistic {
                steepness,
                midpoint,
            } => 1.0 / (1.0 + (-steepness * (x - midpoint)).exp()),
        }
    }

    /// Short machine-readable name of the form.
    pub fn form_name(&self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Exponential { .. } => "exponential",
            Self::Logistic { .. } => "logistic",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_endpoints_exact() {
        assert_eq!(SignalFunction::Linear.eval(0.0).unwrap(), 0.0);
        assert_eq!(SignalFunction::Linear.eval(1.0).unwrap(), 1.0);
        assert_eq!(SignalFunction::Linear.eval(0.6).unwrap(), 0.6);
    }

    #[test]
    fn exponential_maps_one_to_one_exactly() {
        for gain in [0.5, 1.0, 2.0, 5.0] {
            let g = SignalFunction::exponential(gain).unwrap();
            assert_eq!(g.eval(1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn exponential_half_matches_reference() {
        // e^{-0.5}
        let g = SignalFunction::exponential(1.0).unwrap();
        assert!((g.eval(0.5).unwrap() - 0.606_530_659_712_633_4).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_domain_input() {
        assert!(SignalFunction::Linear.eval(-0.1).is_err());
        assert!(SignalFunction::Linear.eval(1.1).is_err());
        assert!(SignalFunction::Linear.eval(f64::NAN).is_err());
    }

    #[test]
    fn rejects_invalid_shape_parameters() {
        assert!(SignalFunction::exponential(0.0).is_err());
        assert!(SignalFunction::exponential(-1.0).is_err());
        assert!(SignalFunction::logistic(0.0, 0.5).is_err());
        assert!(SignalFunction::logistic(10.0, 1.5).is_err());
    }

    #[test]
    fn monotone_non_decreasing_on_grid() {
        let forms = [
            SignalFunction::Linear,
            SignalFunction::exponential(2.0).unwrap(),
            SignalFunction::logistic_default(),
        ];
        for g in forms {
            let mut prev = g.eval(0.0).unwrap();
            for i in 1..=1000 {
                let x = i as f64 / 1000.0;
                let y = g.eval(x).unwrap();
                assert!(y >= prev, "{g:?} decreased at x={x}");
                prev = y;
            }
        }
    }

    #[test]
    fn serde_tagged_form() {
        let g: SignalFunction = serde_json::from_str(r#"{"form":"exponential","gain":2.0}"#).unwrap();
        assert_eq!(g, SignalFunction::Exponential { gain: 2.0 });
        let s = serde_json::to_string(&SignalFunction::Linear).unwrap();
        assert_eq!(s, r#"{"form":"linear"}"#);
    }
}
