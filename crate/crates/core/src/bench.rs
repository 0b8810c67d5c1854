//! Wall-clock comparison of exact Shapley values against the single-term
//! statistic as the number of sensors grows.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coalition::Coalition;
use crate::config::OutputFormat;
use crate::error::{Error, Result};
use crate::gaussian::{GaussianModel, Observation};
use crate::shapley::all_shapley;
use crate::MAX_EXACT_SENSORS;

/// Each timed batch runs at least this long.
const MIN_BATCH: Duration = Duration::from_millis(2);

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    /// Median seconds per `all_shapley` call.
    pub shapley_secs: f64,
    /// Median seconds to compute `v({i})` for every sensor.
    pub single_secs: f64,
    /// `shapley_secs` over the previous row's, when the previous row is `n - 1`.
    pub shapley_ratio: Option<f64>,
    pub single_ratio: Option<f64>,
}

/// Single-term statistic for every sensor.
pub fn single_term_scores(model: &GaussianModel, x: &Observation) -> Vec<f64> {
    (0..model.n())
        .map(|i| model.value(Coalition::from_bits_unchecked(1 << i, model.n()), x))
        .collect()
}

/// Median per-call time of `f` over `reps` batches.
fn time_per_call<F: FnMut()>(mut f: F, reps: usize) -> f64 {
    let mut batch = 1u64;
    loop {
        let start = Instant::now();
        for _ in 0..batch {
            f();
        }
        if start.elapsed() >= MIN_BATCH {
            break;
        }
        batch *= 2;
    }
    let mut samples: Vec<f64> = (0..reps.max(1))
        .map(|_| {
            let start = Instant::now();
            for _ in 0..batch {
                f();
            }
            start.elapsed().as_secs_f64() / batch as f64
        })
        .collect();
    samples.sort_unstable_by(f64::total_cmp);
    samples[samples.len() / 2]
}

/// Times both statistics on a random independent model for each `n`.
pub fn bench(n_list: &[usize], reps: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if let Some(&n) = n_list.iter().find(|&&n| n == 0 || n > MAX_EXACT_SENSORS) {
        return Err(Error::UniverseTooLarge {
            n,
            max: MAX_EXACT_SENSORS,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<BenchRow> = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let sigmas: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let model = GaussianModel::independent(vec![0.0; n], &sigmas)?;
        let x = model.sample(&mut rng);

        let shapley_secs = time_per_call(
            || {
                black_box(
                    all_shapley(black_box(&model), black_box(&x)).expect("n within exact limit"),
                );
            },
            reps,
        );
        let single_secs = time_per_call(
            || {
                black_box(single_term_scores(black_box(&model), black_box(&x)));
            },
            reps,
        );
        let prev = rows.last().filter(|r| r.n + 1 == n);
        rows.push(BenchRow {
            n,
            shapley_secs,
            single_secs,
            shapley_ratio: prev.map(|r| shapley_secs / r.shapley_secs),
            single_ratio: prev.map(|r| single_secs / r.single_secs),
        });
    }
    Ok(rows)
}

pub fn render_bench(rows: &[BenchRow], format: OutputFormat) -> String {
    let cols = [
        "n",
        "shapley_s",
        "single_s",
        "shapley_ratio",
        "single_ratio",
    ];
    let fmt_ratio = |r: Option<f64>| r.map(|v| format!("{v:.3}")).unwrap_or_default();
    let mut s = String::new();
    let (open, sep, close) = match format {
        OutputFormat::Csv => ("", ",", ""),
        OutputFormat::Markdown => ("| ", " | ", " |"),
    };
    let _ = writeln!(s, "{open}{}{close}", cols.join(sep));
    if format == OutputFormat::Markdown {
        let _ = writeln!(s, "|{}", "---|".repeat(cols.len()));
    }
    for r in rows {
        let cells = [
            r.n.to_string(),
            format!("{:.6e}", r.shapley_secs),
            format!("{:.6e}", r.single_secs),
            fmt_ratio(r.shapley_ratio),
            fmt_ratio(r.single_ratio),
        ];
        let _ = writeln!(s, "{open}{}{close}", cells.join(sep));
    }
    s
}
