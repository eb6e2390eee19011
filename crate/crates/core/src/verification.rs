//! Ranking-preservation suite and the tri-modal zone classifier.

use serde::{Deserialize, Serialize};

use crate::duty::{evaluate, BaselineHumility, DutyBreakdown, DutyInputs};
use crate::error::DutyError;
use crate::rng;
use crate::signal::SignalFunction;

/// Minimum gap enforced between ordered knowledge values.
pub const ORDER_GAP: f64 = 1e-6;

/// Region of (HI, C_signal) space. Precedence when regions overlap:
/// HighDuty, then LowDuty, then Equilibrium; pairs matching none of the
/// three printed conditions are surfaced as Unzoned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    LowDuty,
    Equilibrium,
    HighDuty,
    Unzoned,
}

/// Maps a (humility, signal) pair to its zone. Total over [0,1]^2.
pub fn classify_zone(hi: f64, c_signal: f64) -> Zone {
    if hi < 0.2 || c_signal > 0.8 {
        Zone::HighDuty
    } else if hi > 0.8 && c_signal < 0.2 {
        Zone::LowDuty
    } else if hi > 0.3 && hi < 0.7 {
        Zone::Equilibrium
    } else {
        Zone::Unzoned
    }
}

/// Per-zone tallies for a batch of trials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneCounts {
    pub low_duty: u64,
    pub equilibrium: u64,
    pub high_duty: u64,
    pub unzoned: u64,
}

impl ZoneCounts {
    pub fn record(&mut self, zone: Zone) {
        match zone {
            Zone::LowDuty => self.low_duty += 1,
            Zone::Equilibrium => self.equilibrium += 1,
            Zone::HighDuty => self.high_duty += 1,
            Zone::Unzoned => self.unzoned += 1,
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.low_duty += other.low_duty;
        self.equilibrium += other.equilibrium;
        self.high_duty += other.high_duty;
        self.unzoned += other.unzoned;
    }

    pub fn total(&self) -> u64 {
        self.low_duty + self.equilibrium + self.high_duty + self.unzoned
    }
}

/// A three-option decision scenario with strictly ordered knowledge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScenario")]
pub struct RankingScenario {
    k1: f64,
    k2: f64,
    k3: f64,
    c_signal: f64,
    signal_function: SignalFunction,
}

#[derive(Deserialize)]
struct RawScenario {
    k1: f64,
    k2: f64,
    k3: f64,
    c_signal: f64,
    signal_function: SignalFunction,
}

impl TryFrom<RawScenario> for RankingScenario {
    type Error = DutyError;

    fn try_from(raw: RawScenario) -> Result<Self, DutyError> {
        RankingScenario::new(raw.k1, raw.k2, raw.k3, raw.c_signal, raw.signal_function)
    }
}

impl RankingScenario {
    pub fn new(
        k1: f64,
        k2: f64,
        k3: f64,
        c_signal: f64,
        signal_function: SignalFunction,
    ) -> Result<Self, DutyError> {
        for (name, v) in [("k1", k1), ("k2", k2), ("k3", k3), ("c_signal", c_signal)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(DutyError::OutOfUnitRange { name, value: v });
            }
        }
        if k1 - k2 < ORDER_GAP {
            return Err(DutyError::NotPositive {
                name: "k1 - k2 (strict ordering gap)",
                value: k1 - k2,
            });
        }
        if k2 - k3 < ORDER_GAP {
            return Err(DutyError::NotPositive {
                name: "k2 - k3 (strict ordering gap)",
                value: k2 - k3,
            });
        }
        signal_function.validate()?;
        Ok(Self {
            k1,
            k2,
            k3,
            c_signal,
            signal_function,
        })
    }

    pub fn knowledge(&self) -> [f64; 3] {
        [self.k1, self.k2, self.k3]
    }

    pub fn c_signal(&self) -> f64 {
        self.c_signal
    }

    pub fn signal_function(&self) -> &SignalFunction {
        &self.signal_function
    }
}

/// Duties for one option at one humility grid point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OptionDuty {
    pub k: f64,
    pub breakdown: DutyBreakdown,
}

/// Duty triples at one grid humility level.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryPoint {
    pub hi: f64,
    pub options: [OptionDuty; 3],
}

/// Outcome of checking one scenario across a humility grid.
#[derive(Debug, Clone)]
pub struct RankingCheck {
    pub preserved: bool,
    /// First grid humility at which the ordering broke, if any.
    pub violated_at: Option<f64>,
    pub trajectory: Vec<TrajectoryPoint>,
}

/// Default humility grid: 0.0 to 0.95 inclusive, step 0.05.
pub fn default_hi_grid() -> Vec<f64> {
    (0..20).map(|i| i as f64 * 0.05).collect()
}

/// Builds a humility grid over [0, 0.95] with the given step.
pub fn hi_grid_with_step(step: f64) -> Result<Vec<f64>, DutyError> {
    if !(step > 0.0) {
        return Err(DutyError::NotPositive {
            name: "grid step",
            value: step,
        });
    }
    let mut grid = Vec::new();
    let mut i = 0u32;
    loop {
        let hi = i as f64 * step;
        if hi > 0.95 + 1e-12 {
            break;
        }
        grid.push(hi.min(0.95));
        i += 1;
    }
    Ok(grid)
}

/// Evaluates the three options at each grid humility (lambda forced to 0)
/// and checks that the action ranking stays strict and the repair ranking
/// stays non-decreasing in K.
pub fn check_ranking(s: &RankingScenario, hi_grid: &[f64]) -> Result<RankingCheck, DutyError> {
    assert!(!hi_grid.is_empty(), "hi_grid must be non-empty");
    let lambda_off = BaselineHumility::disabled();
    let mut trajectory = Vec::with_capacity(hi_grid.len());
    let mut violated_at = None;
    for &hi in hi_grid {
        if !(0.0..=0.95 + 1e-9).contains(&hi) {
            return Err(DutyError::OutOfUnitRange {
                name: "hi grid point",
                value: hi,
            });
        }
        let mut options = [OptionDuty {
            k: 0.0,
            breakdown: DutyBreakdown {
                action: 0.0,
                repair: 0.0,
                total: 0.0,
            },
        }; 3];
        for (slot, &k) in options.iter_mut().zip(&s.knowledge()) {
            let inputs = DutyInputs::new(k, hi, s.c_signal)?;
            slot.k = k;
            slot.breakdown = evaluate(inputs, &s.signal_function, lambda_off)?;
        }
        let [a, b, c] = options;
        let action_ok =
            a.breakdown.action > b.breakdown.action && b.breakdown.action > c.breakdown.action;
        let repair_ok =
            a.breakdown.repair >= b.breakdown.repair && b.breakdown.repair >= c.breakdown.repair;
        if !(action_ok && repair_ok) && violated_at.is_none() {
            violated_at = Some(hi);
        }
        trajectory.push(TrajectoryPoint { hi, options });
    }
    Ok(RankingCheck {
        preserved: violated_at.is_none(),
        violated_at,
        trajectory,
    })
}

/// Deterministic scenario generation: strictly ordered K triplets via
/// rejection, uniform c_signal, linear signal function.
pub fn generate_scenarios(n: usize, seed: u64) -> Vec<RankingScenario> {
    generate_scenarios_with(n, seed, SignalFunction::Linear)
}

pub fn generate_scenarios_with(n: usize, seed: u64, sf: SignalFunction) -> Vec<RankingScenario> {
    (0..n)
        .map(|i| {
            let index = i as u64;
            let c_signal = rng::unit_f64(seed, index, 0);
            let mut coord = 1u64;
            loop {
                let mut ks = [
                    rng::unit_f64(seed, index, coord),
                    rng::unit_f64(seed, index, coord + 1),
                    rng::unit_f64(seed, index, coord + 2),
                ];
                coord += 3;
                ks.sort_by(|a, b| b.partial_cmp(a).unwrap());
                if ks[0] - ks[1] >= ORDER_GAP && ks[1] - ks[2] >= ORDER_GAP {
                    return RankingScenario::new(ks[0], ks[1], ks[2], c_signal, sf)
                        .expect("rejection sampling guarantees validity");
                }
            }
        })
        .collect()
}

/// Locator for the first failed check in a suite run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationSite {
    pub scenario_index: usize,
    pub hi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankingReport {
    pub n_scenarios: usize,
    pub preserved_count: usize,
    pub hi_grid: Vec<f64>,
    pub first_violation: Option<ViolationSite>,
}

impl RankingReport {
    pub fn all_preserved(&self) -> bool {
        self.preserved_count == self.n_scenarios
    }
}

/// Runs `check_ranking` over `n` generated scenarios.
pub fn run_ranking_suite(n: usize, seed: u64, hi_grid: &[f64]) -> RankingReport {
    run_ranking_suite_with(n, seed, hi_grid, SignalFunction::Linear)
}

pub fn run_ranking_suite_with(
    n: usize,
    seed: u64,
    hi_grid: &[f64],
    sf: SignalFunction,
) -> RankingReport {
    let scenarios = generate_scenarios_with(n, seed, sf);
    let mut preserved_count = 0;
    let mut first_violation = None;
    for (i, s) in scenarios.iter().enumerate() {
        let check = check_ranking(s, hi_grid).expect("generated scenarios are valid");
        if check.preserved {
            preserved_count += 1;
        } else if first_violation.is_none() {
            first_violation = Some(ViolationSite {
                scenario_index: i,
                hi: check.violated_at.unwrap(),
            });
        }
    }
    RankingReport {
        n_scenarios: n,
        preserved_count,
        hi_grid: hi_grid.to_vec(),
        first_violation,
    }
}

/// Writes a trajectory as CSV rows `hi,option,k,d_action,d_repair,ratio`
/// where ratio is action/repair (inf when repair is 0).
pub fn write_trajectory_csv<W: std::io::Write>(
    trajectory: &[TrajectoryPoint],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "hi,option,k,d_action,d_repair,ratio")?;
    for point in trajectory {
        for (idx, opt) in point.options.iter().enumerate() {
            let ratio = opt.breakdown.action / opt.breakdown.repair;
            writeln!(
                out,
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                point.hi,
                idx + 1,
                opt.k,
                opt.breakdown.action,
                opt.breakdown.repair,
                ratio
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zone_examples() {
        assert_eq!(classify_zone(0.1, 0.5), Zone::HighDuty);
        assert_eq!(classify_zone(0.9, 0.1), Zone::LowDuty);
        assert_eq!(classify_zone(0.75, 0.5), Zone::Unzoned);
        assert_eq!(classify_zone(0.5, 0.5), Zone::Equilibrium);
        // overlap resolves to HighDuty by precedence
        assert_eq!(classify_zone(0.5, 0.9), Zone::HighDuty);
    }

    #[test]
    fn zone_partition_is_total() {
        let mut counts = ZoneCounts::default();
        for i in 0..=100 {
            for j in 0..=100 {
                counts.record(classify_zone(i as f64 / 100.0, j as f64 / 100.0));
            }
        }
        assert_eq!(counts.total(), 101 * 101);
    }

    #[test]
    fn scenario_rejects_unordered_knowledge() {
        assert!(RankingScenario::new(0.5, 0.5, 0.1, 0.5, SignalFunction::Linear).is_err());
        assert!(RankingScenario::new(0.5, 0.6, 0.1, 0.5, SignalFunction::Linear).is_err());
    }

    #[test]
    fn generation_is_deterministic_and_ordered() {
        let a = generate_scenarios(200, 7);
        let b = generate_scenarios(200, 7);
        assert_eq!(a, b);
        for s in &a {
            let [k1, k2, k3] = s.knowledge();
            assert!(k1 - k2 >= ORDER_GAP && k2 - k3 >= ORDER_GAP);
        }
    }

    #[test]
    fn reference_triple_preserved_over_default_grid() {
        let s = RankingScenario::new(0.80, 0.50, 0.10, 0.6, SignalFunction::Linear).unwrap();
        let check = check_ranking(&s, &default_hi_grid()).unwrap();
        assert!(check.preserved);
        assert_eq!(check.trajectory.len(), 20);
        // at HI = 0 the action duties are exactly the knowledge values
        let first = &check.trajectory[0];
        assert_eq!(first.options[0].breakdown.action, 0.80);
        assert_eq!(first.options[1].breakdown.action, 0.50);
        assert_eq!(first.options[2].breakdown.action, 0.10);
    }

    #[test]
    fn zero_signal_ties_repair() {
        let s = RankingScenario::new(0.9, 0.5, 0.2, 0.0, SignalFunction::Linear).unwrap();
        let check = check_ranking(&s, &default_hi_grid()).unwrap();
        assert!(check.preserved);
        for p in &check.trajectory {
            for opt in &p.options {
                assert_eq!(opt.breakdown.repair, 0.0);
            }
        }
    }

    #[test]
    fn suite_preserves_all_for_each_form() {
        for sf in [
            SignalFunction::Linear,
            SignalFunction::Exponential { gain: 2.0 },
            SignalFunction::logistic_default(),
        ] {
            let report = run_ranking_suite_with(250, 11, &default_hi_grid(), sf);
            assert_eq!(report.preserved_count, 250, "{sf:?}");
            assert!(report.first_violation.is_none());
        }
    }

    #[test]
    fn grid_refinement_keeps_preservation() {
        let fine = hi_grid_with_step(0.025).unwrap();
        let report = run_ranking_suite(100, 3, &fine);
        assert_eq!(report.preserved_count, 100);
    }

    #[test]
    fn default_grid_shape() {
        let g = default_hi_grid();
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 0.0);
        assert!((g[19] - 0.95).abs() < 1e-12);
    }
}
