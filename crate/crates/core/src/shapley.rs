//! Exact, truncated and permutation-sampled Shapley values over an abstract
//! coalition value function.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::coalition::{subsets_excluding, Coalition};
use crate::error::{Error, Result};
use crate::gaussian::Observation;
use crate::{MAX_EXACT_SENSORS, MAX_SENSORS};

/// Largest universe for which weights use exact integer factorials.
const EXACT_FACTORIAL_MAX: usize = 20;

/// A coalition value function `v(S, x)` over `n` sensors.
///
/// Implementations must be deterministic and return 0 for the empty
/// coalition.
pub trait ValueFunction {
    fn n(&self) -> usize;

    fn value(&self, s: Coalition, x: &Observation) -> f64;
}

impl<V: ValueFunction + ?Sized> ValueFunction for &V {
    fn n(&self) -> usize {
        (**self).n()
    }

    fn value(&self, s: Coalition, x: &Observation) -> f64 {
        (**self).value(s, x)
    }
}

/// `v(S) = sum of coefficients[j] for j in S`, independent of the observation.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveValue {
    pub coefficients: Vec<f64>,
}

impl AdditiveValue {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self { coefficients }
    }
}

impl ValueFunction for AdditiveValue {
    fn n(&self) -> usize {
        self.coefficients.len()
    }

    fn value(&self, s: Coalition, _x: &Observation) -> f64 {
        s.iter().map(|j| self.coefficients[j]).sum()
    }
}

/// Wraps any closure as a value function.
pub struct FnValue<F> {
    n: usize,
    f: F,
}

impl<F> FnValue<F>
where
    F: Fn(Coalition, &Observation) -> f64,
{
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F> ValueFunction for FnValue<F>
where
    F: Fn(Coalition, &Observation) -> f64,
{
    fn n(&self) -> usize {
        self.n
    }

    fn value(&self, s: Coalition, x: &Observation) -> f64 {
        (self.f)(s, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyResult {
    pub phi: Vec<f64>,
    /// Number of value-function calls made.
    pub evaluations: u64,
}

/// `|S|! (n - |S| - 1)! / n!`.
pub fn shapley_weight(s_card: usize, n: usize) -> Result<f64> {
    if n == 0 || n > MAX_EXACT_SENSORS {
        return Err(Error::UniverseTooLarge {
            n,
            max: MAX_EXACT_SENSORS,
        });
    }
    if s_card >= n {
        return Err(Error::CardinalityOutOfRange { s_card, n });
    }
    if n <= EXACT_FACTORIAL_MAX {
        let num = factorial(s_card) * factorial(n - s_card - 1);
        return Ok(num as f64 / factorial(n) as f64);
    }
    use statrs::function::factorial::ln_factorial;
    let ln_w = ln_factorial(s_card as u64) + ln_factorial((n - s_card - 1) as u64)
        - ln_factorial(n as u64);
    Ok(ln_w.exp())
}

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

fn weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| shapley_weight(k, n).expect("cardinality below n"))
        .collect()
}

fn check_universe<V: ValueFunction + ?Sized>(v: &V, x: &Observation) -> Result<usize> {
    let n = v.n();
    if n > MAX_EXACT_SENSORS {
        return Err(Error::UniverseTooLarge {
            n,
            max: MAX_EXACT_SENSORS,
        });
    }
    if n == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: 0,
        });
    }
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: x.len(),
        });
    }
    Ok(n)
}

fn check_index(i: usize, n: usize) -> Result<()> {
    if i >= n {
        return Err(Error::SensorOutOfRange { index: i, n });
    }
    Ok(())
}

/// Shapley value of sensor `i` by enumerating every coalition that excludes it.
pub fn exact_shapley<V: ValueFunction + ?Sized>(v: &V, x: &Observation, i: usize) -> Result<f64> {
    let n = check_universe(v, x)?;
    check_index(i, n)?;
    let w = weights(n);
    Ok(subsets_excluding(n, i)
        .map(|s| w[s.len()] * (v.value(s.with(i), x) - v.value(s, x)))
        .sum())
}

/// Shapley values for every sensor. Each of the `2^n` coalition values is
/// computed once and shared across sensors.
pub fn all_shapley<V: ValueFunction + ?Sized>(v: &V, x: &Observation) -> Result<ShapleyResult> {
    let n = check_universe(v, x)?;
    let w = weights(n);
    let size = 1usize << n;
    let table: Vec<f64> = (0..size as u32)
        .map(|bits| v.value(Coalition::from_bits_unchecked(bits, n), x))
        .collect();

    let phi = (0..n)
        .map(|i| {
            let bit = 1usize << i;
            let mut acc = 0.0;
            for s in subsets_excluding(n, i) {
                let m = s.bits() as usize;
                acc += w[s.len()] * (table[m | bit] - table[m]);
            }
            acc
        })
        .collect();
    Ok(ShapleyResult {
        phi,
        evaluations: size as u64,
    })
}

/// The Shapley sum for sensor `i` restricted to coalitions accepted by
/// `keep`, with the kept weights rescaled to sum to one.
pub fn truncated_shapley<V, K>(v: &V, x: &Observation, i: usize, keep: K) -> Result<f64>
where
    V: ValueFunction + ?Sized,
    K: Fn(Coalition) -> bool,
{
    let n = check_universe(v, x)?;
    check_index(i, n)?;
    let w = weights(n);
    let mut mass = 0.0;
    let mut acc = 0.0;
    for s in subsets_excluding(n, i).filter(|&s| keep(s)) {
        let ws = w[s.len()];
        mass += ws;
        acc += ws * (v.value(s.with(i), x) - v.value(s, x));
    }
    if mass == 0.0 {
        return Err(Error::EmptyKeptSet);
    }
    Ok(acc / mass)
}

/// Permutation-sampling estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledEstimate {
    pub mean: f64,
    /// Sample standard deviation of the marginal contributions over
    /// `sqrt(permutations)`; zero when only one permutation was drawn.
    pub std_error: f64,
    pub permutations: usize,
}

/// Unbiased Monte Carlo estimate of sensor `i`'s Shapley value: the average
/// marginal contribution of `i` to its predecessors over uniformly random
/// orderings.
pub fn sampled_shapley<V, R>(
    v: &V,
    x: &Observation,
    i: usize,
    permutations: usize,
    rng: &mut R,
) -> Result<f64>
where
    V: ValueFunction + ?Sized,
    R: Rng + ?Sized,
{
    sampled_shapley_estimate(v, x, i, permutations, rng).map(|e| e.mean)
}

pub fn sampled_shapley_estimate<V, R>(
    v: &V,
    x: &Observation,
    i: usize,
    permutations: usize,
    rng: &mut R,
) -> Result<SampledEstimate>
where
    V: ValueFunction + ?Sized,
    R: Rng + ?Sized,
{
    let n = v.n();
    if x.len() != n || n == 0 {
        return Err(Error::DimensionMismatch {
            expected: n.max(1),
            actual: x.len(),
        });
    }
    if n > MAX_SENSORS {
        return Err(Error::UniverseTooLarge {
            n,
            max: MAX_SENSORS,
        });
    }
    check_index(i, n)?;
    if permutations == 0 {
        return Err(Error::InvalidExperiment(
            "permutations must be at least 1".into(),
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Welford accumulation.
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 1..=permutations {
        order.shuffle(rng);
        let pos = order
            .iter()
            .position(|&j| j == i)
            .expect("i is in the ordering");
        let pred = Coalition::from_indices(order[..pos].iter().copied(), n)?;
        let contribution = v.value(pred.with(i), x) - v.value(pred, x);
        let delta = contribution - mean;
        mean += delta / k as f64;
        m2 += delta * (contribution - mean);
    }
    let std_error = if permutations > 1 {
        (m2 / (permutations - 1) as f64 / permutations as f64).sqrt()
    } else {
        0.0
    };
    Ok(SampledEstimate {
        mean,
        std_error,
        permutations,
    })
}
