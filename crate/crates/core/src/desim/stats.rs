//! Replication control: Student-t confidence intervals and sequential stopping.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Sample mean with the half-width of its confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub samples: u32,
}

impl Estimate {
    pub fn relative_half_width(&self) -> f64 {
        if self.half_width == 0.0 {
            0.0
        } else {
            self.half_width / self.mean.abs()
        }
    }
}

/// Two-sided Student-t interval over `xs`. A single sample gets an infinite
/// half-width unless the stream is trivially constant.
pub fn estimate(xs: &[f64], confidence: f64) -> Estimate {
    let n = xs.len();
    let mean = if n == 0 { f64::NAN } else { xs.iter().sum::<f64>() / n as f64 };
    let half_width = if n < 2 {
        f64::INFINITY
    } else {
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        if var == 0.0 {
            0.0
        } else {
            let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
                .expect("degrees of freedom >= 1")
                .inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
            t * (var / n as f64).sqrt()
        }
    };
    Estimate {
        mean,
        half_width,
        samples: n as u32,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub confidence: f64,
    pub rel_error: f64,
    pub min_reps: u32,
    pub max_reps: u32,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            confidence: 0.95,
            rel_error: 0.05,
            min_reps: 3,
            max_reps: 30,
        }
    }
}

/// Outcome of a replicated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicated<T> {
    /// Per-replication outputs in replication order.
    pub runs: Vec<T>,
    /// One estimate per tracked metric; `None` if no run produced the metric.
    pub estimates: Vec<Option<Estimate>>,
    pub converged: bool,
}

fn converged(est: &[Option<Estimate>], rel_error: f64) -> bool {
    est.iter().all(|e| match e {
        None => true,
        Some(e) => e.relative_half_width() <= rel_error,
    })
}

fn summarize<T>(runs: &[T], metrics: &(impl Fn(&T) -> Vec<Option<f64>> + ?Sized), confidence: f64) -> Vec<Option<Estimate>> {
    let per_run: Vec<Vec<Option<f64>>> = runs.iter().map(metrics).collect();
    let k = per_run.first().map_or(0, Vec::len);
    (0..k)
        .map(|m| {
            let xs: Vec<f64> = per_run.iter().filter_map(|r| r[m]).collect();
            if xs.is_empty() {
                None
            } else {
                Some(estimate(&xs, confidence))
            }
        })
        .collect()
}

/// Runs replications `0, 1, 2, ...` until every tracked metric has a
/// relative half-width within `rule.rel_error`, or `rule.max_reps` is hit.
///
/// Replications are computed in parallel batches but the stopping point is
/// decided in replication order, so the result does not depend on the thread
/// count.
pub fn replicate_until_confident<T, R, M>(rule: &StoppingRule, runner: R, metrics: M) -> Replicated<T>
where
    T: Send,
    R: Fn(u32) -> T + Sync,
    M: Fn(&T) -> Vec<Option<f64>>,
{
    let min = rule.min_reps.max(1).min(rule.max_reps.max(1));
    let max = rule.max_reps.max(min);
    let batch = (rayon::current_num_threads() as u32).max(1);
    let mut runs: Vec<T> = (0..min).into_par_iter().map(&runner).collect();
    loop {
        let est = summarize(&runs, &metrics, rule.confidence);
        if converged(&est, rule.rel_error) {
            return Replicated {
                runs,
                estimates: est,
                converged: true,
            };
        }
        let have = runs.len() as u32;
        if have >= max {
            return Replicated {
                runs,
                estimates: est,
                converged: false,
            };
        }
        let upto = (have + batch).min(max);
        let fresh: Vec<T> = (have..upto).into_par_iter().map(&runner).collect();
        // consume one run at a time so the stop index is order-determined
        for r in fresh {
            runs.push(r);
            let est = summarize(&runs, &metrics, rule.confidence);
            if converged(&est, rule.rel_error) {
                return Replicated {
                    runs,
                    estimates: est,
                    converged: true,
                };
            }
        }
    }
}
