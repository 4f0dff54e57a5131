//! Seeded generative simulator and Monte Carlo harness.
//!
//! Each observation round draws every obstacle independently: with
//! probability `p` the obstacle itself reads `1`; otherwise the detection
//! scatters to one neighboring cell picked from the error distribution,
//! and lands there as a false positive if that cell is free and inside
//! the grid. Obstacle marginals are therefore exactly Bernoulli(p), free
//! cells read `1` with the independent-product rate `1-q(x,y)`, and free
//! cells outside every neighborhood never read `1`.
//!
//! The harness runs the full pipeline (plan, explore, fuse, compare) per
//! trial and checks the empirical per-class accuracies against exact
//! binomial predictions. All randomness is derived from one master seed,
//! so results are bit-identical regardless of trial execution order.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fuse::{fuse_max_likelihood, fuse_threshold, mean_map, ml_count_threshold};
use crate::grid::{classify_cells, CellClass, GroundTruthMap, ObservationMap};
use crate::plan::{
    achievable_confidence, binomial_tail_ge, choose_threshold, count_threshold, required_rounds,
    threshold_interval, ConfidenceParams,
};
use crate::sensor::{
    coverage_count, false_positive_prob, q_floor, PatternKnowledge, QMode, SensorModel,
};

/// SplitMix64 finalizer (Steele, Lea & Flood's published mixing function).
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Independent stream seed for `(trial, round)`. Trial and round indices
/// are 1-based; `(0, 0)` is reserved for ground-truth generation.
pub fn derive_seed(master: u64, trial: u64, round: u64) -> u64 {
    let t = mix64(master.wrapping_add(GOLDEN_GAMMA.wrapping_mul(trial.wrapping_add(1))));
    mix64(t.wrapping_add(GOLDEN_GAMMA.wrapping_mul(round.wrapping_add(1))))
}

/// Obstacle layout generated for a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Pattern {
    /// Every cell is independently an obstacle with this probability.
    RandomDensity(f64),
    /// Full-height vertical lines at columns `1, 1+spacing, ...`;
    /// `spacing >= 3` keeps 3x3 neighborhoods of distinct lines disjoint.
    SeparatedLines { spacing: usize },
    Empty,
}

/// Requested exploration rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounds {
    /// Use the planned minimum `N(d)`.
    Auto,
    Fixed(u32),
}

/// Which fusion rule the harness applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionRule {
    /// Threshold the observation mean at the planned `C`.
    Threshold,
    /// Per-cell maximum likelihood with `q = q'`.
    MaxLikelihood,
}

/// Full description of one Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub width: usize,
    pub height: usize,
    pub pattern: Pattern,
    pub sensor: SensorModel,
    /// Target per-cell confidence.
    pub d: f64,
    pub rounds: Rounds,
    pub trials: u32,
    pub master_seed: u64,
    pub fusion: FusionRule,
    /// Plan with this floor instead of deriving it from the pattern.
    pub q_prime_override: Option<f64>,
}

const MAX_CELLS: usize = 1_000_000;

impl ScenarioConfig {
    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Parameter("map dimensions must be positive"));
        }
        if self.width * self.height > MAX_CELLS {
            return Err(Error::Parameter("maps are limited to 10^6 cells"));
        }
        if self.trials == 0 {
            return Err(Error::Parameter("trial count must be at least 1"));
        }
        if let Rounds::Fixed(0) = self.rounds {
            return Err(Error::Parameter("round count must be at least 1"));
        }
        match self.pattern {
            Pattern::RandomDensity(rho) if !(0.0..=1.0).contains(&rho) => {
                Err(Error::Parameter("obstacle density must lie in [0,1]"))
            }
            Pattern::SeparatedLines { spacing } if spacing < 3 => Err(Error::Parameter(
                "line spacing must be at least 3 so neighborhoods stay disjoint",
            )),
            _ => Ok(()),
        }
    }
}

/// Deterministic truth map for the scenario's pattern and master seed.
pub fn generate_ground_truth(config: &ScenarioConfig) -> Result<GroundTruthMap> {
    config.validate()?;
    let (w, h) = (config.width, config.height);
    let cells = match config.pattern {
        Pattern::Empty => alloc::vec![0u8; w * h],
        Pattern::SeparatedLines { spacing } => {
            let mut cells = alloc::vec![0u8; w * h];
            for row in 0..h {
                let mut col = 1;
                while col < w {
                    cells[row * w + col] = 1;
                    col += spacing;
                }
            }
            cells
        }
        Pattern::RandomDensity(rho) => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.master_seed, 0, 0));
            (0..w * h)
                .map(|_| u8::from(rng.random::<f64>() < rho))
                .collect()
        }
    };
    GroundTruthMap::new(w, h, cells)
}

/// One exploration round under the scatter model described at module level.
pub fn simulate_observation(
    truth: &GroundTruthMap,
    sensor: &SensorModel,
    seed: u64,
) -> ObservationMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut result = ObservationMap::zeroed(truth.width(), truth.height());
    let p = sensor.p();
    for (row, col) in truth.obstacles() {
        if rng.random::<f64>() < p {
            result.set(row, col, 1);
        } else {
            let (dy, dx) = sensor.de().sample_off_center(rng.random::<f64>());
            let r = row as i64 + dy as i64;
            let c = col as i64 + dx as i64;
            if r >= 0
                && c >= 0
                && (r as usize) < truth.height()
                && (c as usize) < truth.width()
                && !truth.is_obstacle(r as usize, c as usize)
            {
                result.set(r as usize, c as usize, 1);
            }
        }
    }
    result
}

/// Coverage buckets used for free-cell aggregation: the exact binomial
/// prediction differs with the number of covering obstacles.
const COVERAGE_LABELS: [&str; 3] = ["1", "2", "3+"];

fn group_index(class: CellClass, coverage: usize) -> usize {
    match class {
        CellClass::Obstacle => 0,
        CellClass::FreeInM => coverage.min(3), // groups 1, 2, and 3+
        CellClass::FreeOutsideM => 4,
    }
}

const GROUP_COUNT: usize = 5;

/// Everything precomputed for a scenario: truth, classification, plan,
/// and exact per-cell accuracy predictions.
pub struct SimContext {
    sensor: SensorModel,
    truth: GroundTruthMap,
    classes: Vec<CellClass>,
    group_of_cell: Vec<usize>,
    predicted: Vec<f64>,
    trials: u32,
    master_seed: u64,
    rounds: u32,
    n_required: u32,
    q_prime: f64,
    d_target: f64,
    degraded_d_prime: Option<f64>,
    threshold_c: Option<f64>,
    k_min: u32,
    fusion: FusionRule,
    nominal_obstacle: f64,
    nominal_free: f64,
    echo: ScenarioEcho,
}

impl SimContext {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let truth = generate_ground_truth(config)?;
        let sensor = config.sensor.clone();
        let p = sensor.p();

        let q_prime = match config.q_prime_override {
            Some(q) => {
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::Parameter("q' must lie in (0,1)"));
                }
                q
            }
            None => match config.pattern {
                Pattern::SeparatedLines { .. } => {
                    q_floor(sensor.de(), &PatternKnowledge::SeparatedLines, sensor.qmode())?
                }
                // Without layout knowledge the floor is p.
                _ => q_floor(sensor.de(), &PatternKnowledge::Nothing, sensor.qmode())?,
            },
        };

        let params = ConfidenceParams::new(p, q_prime, config.d)?;
        let n_required = required_rounds(&params)?;
        let rounds = match config.rounds {
            Rounds::Auto => n_required,
            Rounds::Fixed(n) => n,
        };

        let (threshold_c, degraded_d_prime, k_min) = match config.fusion {
            FusionRule::Threshold => {
                if rounds >= n_required {
                    let (lo, hi) = threshold_interval(&params, rounds)?;
                    let c = choose_threshold(lo, hi)?;
                    (Some(c), None, count_threshold(c, rounds))
                } else {
                    // Not enough rounds for d: fall back to the symmetric
                    // threshold and report the degraded confidence.
                    let degraded = achievable_confidence(p, q_prime, rounds)?;
                    (
                        Some(degraded.c),
                        Some(degraded.d_prime),
                        count_threshold(degraded.c, rounds),
                    )
                }
            }
            FusionRule::MaxLikelihood => {
                (None, None, ml_count_threshold(p, q_prime, rounds)?)
            }
        };

        let classes = classify_cells(&truth, sensor.nh());
        let mut group_of_cell = Vec::with_capacity(classes.len());
        let mut predicted = Vec::with_capacity(classes.len());
        for (i, &class) in classes.iter().enumerate() {
            let cell = (i / truth.width(), i % truth.width());
            let (group, pred) = match class {
                CellClass::Obstacle => (
                    group_index(class, 0),
                    binomial_tail_ge(rounds, p, k_min),
                ),
                _ => {
                    let coverage = coverage_count(&truth, sensor.nh(), cell);
                    let fp = false_positive_prob(
                        &truth,
                        sensor.de(),
                        cell,
                        QMode::IndependentProduct,
                    )?;
                    (
                        group_index(class, coverage),
                        1.0 - binomial_tail_ge(rounds, fp, k_min),
                    )
                }
            };
            group_of_cell.push(group);
            predicted.push(pred);
        }

        let nominal_obstacle = binomial_tail_ge(rounds, p, k_min);
        let nominal_free = 1.0 - binomial_tail_ge(rounds, 1.0 - q_prime, k_min);

        let (pattern, density, spacing) = match config.pattern {
            Pattern::RandomDensity(rho) => ("random", Some(rho), None),
            Pattern::SeparatedLines { spacing } => ("lines", None, Some(spacing)),
            Pattern::Empty => ("empty", None, None),
        };
        let echo = ScenarioEcho {
            width: config.width,
            height: config.height,
            pattern: String::from(pattern),
            density,
            spacing,
            p,
            q_mode: String::from(match sensor.qmode() {
                QMode::Additive => "additive",
                QMode::IndependentProduct => "product",
            }),
            fusion: String::from(match config.fusion {
                FusionRule::Threshold => "threshold",
                FusionRule::MaxLikelihood => "ml",
            }),
            rounds_auto: config.rounds == Rounds::Auto,
            trials: config.trials,
            master_seed: config.master_seed,
        };

        Ok(Self {
            sensor,
            truth,
            classes,
            group_of_cell,
            predicted,
            trials: config.trials,
            master_seed: config.master_seed,
            rounds,
            n_required,
            q_prime,
            d_target: config.d,
            degraded_d_prime,
            threshold_c,
            k_min,
            fusion: config.fusion,
            nominal_obstacle,
            nominal_free,
            echo,
        })
    }

    pub fn truth(&self) -> &GroundTruthMap {
        &self.truth
    }

    pub fn classes(&self) -> &[CellClass] {
        &self.classes
    }

    /// Exact per-cell accuracy predictions under the generative model.
    pub fn predicted_cell_accuracy(&self) -> &[f64] {
        &self.predicted
    }

    pub fn rounds(&self) -> u32 {
        self.rounds
    }

    pub fn trials(&self) -> u32 {
        self.trials
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold_c
    }

    pub fn count_threshold(&self) -> u32 {
        self.k_min
    }

    /// Run one trial: explore, fuse, and compare against the truth.
    /// Returns per-cell correctness, row-major. `trial` is 1-based.
    pub fn run_trial(&self, trial: u32) -> Vec<bool> {
        let observations: Vec<ObservationMap> = (1..=self.rounds)
            .map(|round| {
                simulate_observation(
                    &self.truth,
                    &self.sensor,
                    derive_seed(self.master_seed, trial as u64, round as u64),
                )
            })
            .collect();
        let fused = match self.fusion {
            FusionRule::Threshold => {
                let mean = mean_map(&observations).expect("observations are consistent");
                let c = self.threshold_c.expect("threshold mode has a threshold");
                fuse_threshold(&mean, c).expect("threshold lies in (0,1)")
            }
            FusionRule::MaxLikelihood => {
                fuse_max_likelihood(&observations, self.sensor.p(), self.q_prime)
                    .expect("observations are consistent")
            }
        };
        fused
            .cells()
            .iter()
            .zip(self.truth.cells())
            .map(|(&f, &t)| f == t)
            .collect()
    }

    /// Aggregate per-cell correct counts (one entry per cell, summed over
    /// all trials) into the final statistics.
    pub fn collect_stats(&self, per_cell_correct: &[u32]) -> TrialStats {
        assert_eq!(per_cell_correct.len(), self.classes.len());
        let trials = self.trials as f64;

        let mut group_cells = [0u64; GROUP_COUNT];
        let mut group_correct = [0u64; GROUP_COUNT];
        let mut group_pred_sum = [0.0f64; GROUP_COUNT];
        let mut worst: Option<(usize, f64)> = None;
        let mut worst_dev = 0.0f64;

        for (i, (&group, &correct)) in self
            .group_of_cell
            .iter()
            .zip(per_cell_correct)
            .enumerate()
        {
            group_cells[group] += 1;
            group_correct[group] += correct as u64;
            group_pred_sum[group] += self.predicted[i];

            let emp = correct as f64 / trials;
            if worst.map_or(true, |(_, acc)| emp < acc) {
                worst = Some((i, emp));
            }
            let pred = self.predicted[i];
            let sigma = libm::sqrt(pred * (1.0 - pred) / trials);
            let dev = if sigma > 0.0 {
                libm::fabs(emp - pred) / sigma
            } else if emp == pred {
                0.0
            } else {
                f64::MAX
            };
            if dev > worst_dev {
                worst_dev = dev;
            }
        }

        let mut groups = Vec::new();
        for g in 0..GROUP_COUNT {
            if group_cells[g] == 0 {
                continue;
            }
            let (class, coverage) = match g {
                0 => (CellClass::Obstacle, None),
                4 => (CellClass::FreeOutsideM, None),
                i => (CellClass::FreeInM, Some(COVERAGE_LABELS[i - 1])),
            };
            let total = group_cells[g] * self.trials as u64;
            let empirical = group_correct[g] as f64 / total as f64;
            let predicted = group_pred_sum[g] / group_cells[g] as f64;
            let nominal = match class {
                CellClass::Obstacle => self.nominal_obstacle,
                CellClass::FreeInM => self.nominal_free,
                CellClass::FreeOutsideM => 1.0,
            };
            // Single-cell binomial deviation over `trials`; a conservative
            // band for the group aggregate.
            let sigma = libm::sqrt(predicted * (1.0 - predicted) / trials);
            let within_3sigma = if sigma > 0.0 {
                libm::fabs(empirical - predicted) <= 3.0 * sigma
            } else {
                empirical == predicted
            };
            groups.push(GroupStats {
                class,
                coverage,
                cells: group_cells[g],
                trials: self.trials,
                total,
                correct: group_correct[g],
                empirical_accuracy: empirical,
                predicted_accuracy: predicted,
                nominal_accuracy: nominal,
                sigma,
                within_3sigma,
            });
        }

        let worst_cell = worst.map(|(i, emp)| WorstCell {
            row: i / self.truth.width(),
            col: i % self.truth.width(),
            class: self.classes[i],
            empirical_accuracy: emp,
            predicted_accuracy: self.predicted[i],
        });

        let oracle_pass = groups.iter().all(|g| g.within_3sigma);

        TrialStats {
            scenario: self.echo.clone(),
            planning: PlanningEcho {
                q_prime: self.q_prime,
                d_target: self.d_target,
                n_required: self.n_required,
                rounds: self.rounds,
                degraded_d_prime: self.degraded_d_prime,
                threshold_c: self.threshold_c,
                count_threshold: self.k_min,
                nominal_obstacle_confidence: self.nominal_obstacle,
                nominal_free_confidence: self.nominal_free,
            },
            groups,
            worst_cell,
            worst_deviation_sigmas: worst_dev,
            oracle_pass,
            runtime_ms: None,
        }
    }
}

/// Sequential Monte Carlo run. Deterministic for a fixed config; the
/// per-trial work may equally be distributed, as long as the per-cell
/// counts are summed (addition commutes, so any order gives identical
/// statistics).
pub fn run_monte_carlo(config: &ScenarioConfig) -> Result<TrialStats> {
    let ctx = SimContext::new(config)?;
    let mut counts = alloc::vec![0u32; ctx.classes().len()];
    for trial in 1..=ctx.trials() {
        for (slot, ok) in counts.iter_mut().zip(ctx.run_trial(trial)) {
            *slot += u32::from(ok);
        }
    }
    Ok(ctx.collect_stats(&counts))
}

/// Scenario parameters echoed into the statistics output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioEcho {
    pub width: usize,
    pub height: usize,
    pub pattern: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<usize>,
    pub p: f64,
    pub q_mode: String,
    pub fusion: String,
    pub rounds_auto: bool,
    pub trials: u32,
    pub master_seed: u64,
}

/// Planning quantities the run was executed with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanningEcho {
    pub q_prime: f64,
    pub d_target: f64,
    pub n_required: u32,
    pub rounds: u32,
    /// Set when fewer rounds than `N(d)` were requested: the confidence
    /// actually promised by the symmetric-threshold fallback.
    pub degraded_d_prime: Option<f64>,
    pub threshold_c: Option<f64>,
    pub count_threshold: u32,
    pub nominal_obstacle_confidence: f64,
    pub nominal_free_confidence: f64,
}

/// Accuracy aggregate for one cell class (free cells additionally split
/// by covering-obstacle count, since the exact prediction differs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupStats {
    pub class: CellClass,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<&'static str>,
    pub cells: u64,
    pub trials: u32,
    pub total: u64,
    pub correct: u64,
    pub empirical_accuracy: f64,
    /// Mean exact binomial accuracy under the generative model.
    pub predicted_accuracy: f64,
    /// Exact binomial accuracy at the planning floor `q'` (the quantity
    /// the round count was sized for).
    pub nominal_accuracy: f64,
    /// Single-cell binomial standard error of the empirical accuracy.
    pub sigma: f64,
    pub within_3sigma: bool,
}

/// The cell with the lowest empirical accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstCell {
    pub row: usize,
    pub col: usize,
    pub class: CellClass,
    pub empirical_accuracy: f64,
    pub predicted_accuracy: f64,
}

/// Result of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialStats {
    pub scenario: ScenarioEcho,
    pub planning: PlanningEcho,
    pub groups: Vec<GroupStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_cell: Option<WorstCell>,
    /// Largest per-cell deviation from its prediction, in single-cell
    /// binomial standard errors.
    pub worst_deviation_sigmas: f64,
    pub oracle_pass: bool,
    /// Wall-clock time, filled in by callers that can measure it.
    /// Excluded from serialization so identical runs emit identical bytes.
    #[serde(skip)]
    pub runtime_ms: Option<u64>,
}
