//! Paired Monte Carlo trials and minimum-error threshold tests.
//!
//! Every trial draws one unattacked observation, attacks it with probability
//! `attack_prior`, and scores the sensor under test twice: with its Shapley
//! value and with its single-sensor value `v({i})`. Both statistics are then
//! thresholded on the same trials, so their error rates are directly
//! comparable.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::attack::{AttackKind, AttackSpec};
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::gaussian::GaussianModel;
use crate::shapley::all_shapley;

/// Normal quantile for a two-sided 95% interval.
pub const Z_95: f64 = 1.96;

pub const DEFAULT_ATTACK_PRIOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    /// Scan midpoints between consecutive distinct sorted scores.
    ExactSort,
    /// Scan `steps` equally spaced thresholds on `[lo, hi]`.
    Grid { lo: f64, hi: f64, steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    Shapley,
    SingleTerm,
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Shapley => "shapley",
            Statistic::SingleTerm => "single-term",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: GaussianModel,
    pub attack: AttackSpec,
    /// Zero-based index of the sensor whose localization decision is scored.
    pub sensor_under_test: usize,
    pub trials: u64,
    pub attack_prior: f64,
    pub seed: u64,
    pub threshold_mode: ThresholdMode,
}

impl ExperimentConfig {
    /// Config with the default prior and exact-sort thresholds.
    pub fn new(model: GaussianModel, attack: AttackSpec, trials: u64, seed: u64) -> Self {
        Self {
            model,
            attack,
            sensor_under_test: 0,
            trials,
            attack_prior: DEFAULT_ATTACK_PRIOR,
            seed,
            threshold_mode: ThresholdMode::ExactSort,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidExperiment(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.attack_prior > 0.0 && self.attack_prior < 1.0) {
            return bad(format!(
                "attack_prior {} must lie in (0, 1)",
                self.attack_prior
            ));
        }
        self.check_shape()?;
        if let ThresholdMode::Grid { lo, hi, steps } = self.threshold_mode {
            check_grid(lo, hi, steps)?;
        }
        Ok(())
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.model.n();
        if self.sensor_under_test >= n {
            return Err(Error::SensorOutOfRange {
                index: self.sensor_under_test,
                n,
            });
        }
        if self.attack.targets().universe() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.attack.targets().universe(),
            });
        }
        Ok(())
    }
}

/// Scores of one trial plus its ground-truth label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorePair {
    pub phi_score: f64,
    pub v_score: f64,
    /// Whether the attack touched the sensor under test in this trial.
    pub attacked: bool,
}

impl ScorePair {
    pub fn score(&self, statistic: Statistic) -> f64 {
        match statistic {
            Statistic::Shapley => self.phi_score,
            Statistic::SingleTerm => self.v_score,
        }
    }
}

/// The optimized test for one statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRateReport {
    pub statistic: Statistic,
    /// Declare an anomaly iff `score > threshold`.
    pub threshold: f64,
    /// (false alarms + misses) / trials at `threshold`.
    pub pe: f64,
    pub ci_halfwidth: f64,
    pub trials: u64,
    /// Minimum over the same candidate thresholds of miss rate plus
    /// false-alarm rate, each conditioned on its class.
    pub rate_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentOutcome {
    pub shapley: ErrorRateReport,
    pub single_term: ErrorRateReport,
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the random stream for trial `index` of an experiment seeded with
/// `seed`: two rounds of the SplitMix64 finalizer.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index))
}

pub fn trial_stream(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(seed, index))
}

/// Runs one trial. The result depends only on `(config, index)`.
pub fn run_trial(config: &ExperimentConfig, index: u64) -> Result<ScorePair> {
    config.check_shape()?;
    if !(0.0..=1.0).contains(&config.attack_prior) {
        return Err(Error::InvalidExperiment(format!(
            "attack_prior {} outside [0, 1]",
            config.attack_prior
        )));
    }
    let model = &config.model;
    let i = config.sensor_under_test;
    let mut rng = trial_stream(config.seed, index);

    let clean = model.sample(&mut rng);
    let attack_applied = rng.random::<f64>() < config.attack_prior;
    let x = if attack_applied {
        config.attack.apply(&clean, &mut rng)?
    } else {
        clean
    };

    let phi_score = all_shapley(model, &x)?.phi[i];
    let v_score = model.value(Coalition::singleton(i, model.n())?, &x);
    Ok(ScorePair {
        phi_score,
        v_score,
        attacked: attack_applied && config.attack.targets().contains(i),
    })
}

/// All `config.trials` score pairs, in trial order.
pub fn collect_scores(config: &ExperimentConfig) -> Result<Vec<ScorePair>> {
    config.validate()?;
    (0..config.trials)
        .into_par_iter()
        .map(|j| run_trial(config, j))
        .collect()
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let pairs = collect_scores(config)?;
    let optimize = |statistic| match config.threshold_mode {
        ThresholdMode::ExactSort => optimize_threshold_exact(&pairs, statistic),
        ThresholdMode::Grid { lo, hi, steps } => {
            optimize_threshold_grid(&pairs, statistic, lo, hi, steps)
        }
    };
    Ok(ExperimentOutcome {
        shapley: optimize(Statistic::Shapley)?,
        single_term: optimize(Statistic::SingleTerm)?,
    })
}

fn class_counts(pairs: &[ScorePair]) -> Result<(u64, u64)> {
    let attacked = pairs.iter().filter(|p| p.attacked).count() as u64;
    let clean = pairs.len() as u64 - attacked;
    if attacked == 0 || clean == 0 {
        return Err(Error::DegenerateLabels);
    }
    Ok((attacked, clean))
}

fn report(
    statistic: Statistic,
    threshold: f64,
    errors: u64,
    trials: u64,
    rate_sum: f64,
) -> ErrorRateReport {
    let pe = errors as f64 / trials as f64;
    ErrorRateReport {
        statistic,
        threshold,
        pe,
        ci_halfwidth: binomial_ci(pe, trials),
        trials,
        rate_sum,
    }
}

/// Minimum-error threshold over all distinct placements between sorted
/// scores. Ties go to the smallest threshold.
pub fn optimize_threshold_exact(
    pairs: &[ScorePair],
    statistic: Statistic,
) -> Result<ErrorRateReport> {
    let (n_att, n_clean) = class_counts(pairs)?;
    let mut scored: Vec<(f64, bool)> = pairs
        .iter()
        .map(|p| (p.score(statistic), p.attacked))
        .collect();
    scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    // Threshold -inf: everything is declared attacked.
    let mut best = (n_clean, f64::NEG_INFINITY);
    let rate = |misses: u64, fa: u64| misses as f64 / n_att as f64 + fa as f64 / n_clean as f64;
    let mut best_rate = rate(0, n_clean);

    let (mut misses, mut clean_below) = (0u64, 0u64);
    let mut k = 0;
    while k < scored.len() {
        let s = scored[k].0;
        while k < scored.len() && scored[k].0 == s {
            if scored[k].1 {
                misses += 1;
            } else {
                clean_below += 1;
            }
            k += 1;
        }
        let errors = misses + (n_clean - clean_below);
        let tau = match scored.get(k) {
            Some(&(next, _)) => s + (next - s) / 2.0,
            None => f64::INFINITY,
        };
        if errors < best.0 {
            best = (errors, tau);
        }
        best_rate = best_rate.min(rate(misses, n_clean - clean_below));
    }
    Ok(report(
        statistic,
        best.1,
        best.0,
        pairs.len() as u64,
        best_rate,
    ))
}

fn check_grid(lo: f64, hi: f64, steps: usize) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidExperiment(format!(
            "grid needs lo < hi, got [{lo}, {hi}]"
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidExperiment(
            "grid needs at least 2 steps".into(),
        ));
    }
    Ok(())
}

/// Minimum-error threshold among `steps` equally spaced values on `[lo, hi]`.
pub fn optimize_threshold_grid(
    pairs: &[ScorePair],
    statistic: Statistic,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Result<ErrorRateReport> {
    check_grid(lo, hi, steps)?;
    let (n_att, n_clean) = class_counts(pairs)?;
    let mut att: Vec<f64> = Vec::with_capacity(n_att as usize);
    let mut clean: Vec<f64> = Vec::with_capacity(n_clean as usize);
    for p in pairs {
        if p.attacked {
            att.push(p.score(statistic));
        } else {
            clean.push(p.score(statistic));
        }
    }
    att.sort_unstable_by(f64::total_cmp);
    clean.sort_unstable_by(f64::total_cmp);

    let step = (hi - lo) / (steps - 1) as f64;
    let mut best = (u64::MAX, lo);
    let mut best_rate = f64::INFINITY;
    for k in 0..steps {
        let tau = if k == steps - 1 {
            hi
        } else {
            lo + k as f64 * step
        };
        let misses = att.partition_point(|&s| s <= tau) as u64;
        let false_alarms = n_clean - clean.partition_point(|&s| s <= tau) as u64;
        let errors = misses + false_alarms;
        if errors < best.0 {
            best = (errors, tau);
        }
        best_rate =
            best_rate.min(misses as f64 / n_att as f64 + false_alarms as f64 / n_clean as f64);
    }
    Ok(report(
        statistic,
        best.1,
        best.0,
        pairs.len() as u64,
        best_rate,
    ))
}

/// `z * sqrt(pe (1 - pe) / m)` with `z = 1.96`.
pub fn binomial_ci(pe: f64, m: u64) -> f64 {
    Z_95 * (pe * (1.0 - pe) / m as f64).sqrt()
}

fn upper_tail(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

/// `P(a < Z <= b)` for a standard normal `Z`, accurate in both tails.
fn normal_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        upper_tail(a) - upper_tail(b)
    } else if b <= 0.0 {
        upper_tail(-b) - upper_tail(-a)
    } else {
        1.0 - upper_tail(-a) - upper_tail(b)
    }
}

/// Minimum probability of error of the single-term test when the sensor is
/// `N(0, sigma^2)` unattacked and `N(am, sigma^2)` attacked (type-A attack),
/// with prior `attack_prior` on the attacked hypothesis.
///
/// The test `v > tau` is `|x| > t`, so the error
/// `(1 - p) P(|x| > t | clean) + p P(|x| <= t | attacked)` is minimized over
/// `t` in `[0, |am| + 8 sigma]` by golden-section search.
pub fn analytic_pe_gaussian(sigma: f64, am: f64, attack_prior: f64) -> f64 {
    assert!(sigma > 0.0, "sigma must be positive");
    let p = attack_prior;
    let am = am.abs();
    let pe = |t: f64| {
        (1.0 - p) * 2.0 * upper_tail(t / sigma)
            + p * normal_mass((-t - am) / sigma, (t - am) / sigma)
    };

    let (mut a, mut b) = (0.0, am + 8.0 * sigma);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (pe(c), pe(d));
    while b - a > 1e-10 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = pe(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = pe(d);
        }
    }
    let upper = am + 8.0 * sigma;
    pe(0.5 * (a + b)).min(pe(0.0)).min(pe(upper))
}

/// The analytic single-term error for `config`, when it applies: a type-A
/// attack scored on one sensor.
pub fn analytic_pe_for(config: &ExperimentConfig) -> Option<f64> {
    if config.attack.kind() != AttackKind::A {
        return None;
    }
    let i = config.sensor_under_test;
    let am = if config.attack.targets().contains(i) {
        config.attack.am()
    } else {
        0.0
    };
    Some(analytic_pe_gaussian(
        config.model.sigma(i),
        am,
        config.attack_prior,
    ))
}
