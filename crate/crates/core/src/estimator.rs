//! Monte Carlo estimates with batch-means errors.
//!
//! Values are recorded per chain in sampling order. A result is computed by
//! cutting every chain's series into contiguous batches; the point estimate is
//! the ratio `Σ sum_b / Σ weight_b` and the error is the linearised
//! batch-means error of that ratio. Plain means use unit weights, conditional
//! means use the indicator of the conditioning event as weight.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Minimum number of batches for which an error bar is reported.
pub const MIN_BATCHES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchStat {
    pub chain: u64,
    pub index: u32,
    pub sum: f64,
    pub weight: f64,
    pub count: u64,
}

impl BatchStat {
    pub fn mean(&self) -> f64 {
        self.sum / self.weight
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub estimate: f64,
    /// Batch-means standard error; `NaN` with fewer than [`MIN_BATCHES`]
    /// batches.
    pub stderr: f64,
    pub n_samples: u64,
    pub n_eff: f64,
    /// Integrated autocorrelation time in units of recorded samples.
    pub tau_int: f64,
    pub batches: Vec<BatchStat>,
}

impl EstimatorResult {
    /// Total conditioning weight (equal to `n_samples` for plain means).
    pub fn total_weight(&self) -> f64 {
        self.batches.iter().map(|b| b.weight).sum()
    }

    /// Recomputes the ratio estimate over a multiset of batch indices.
    pub fn resampled(&self, picks: &[usize]) -> f64 {
        let (s, w) = picks.iter().fold((0.0, 0.0), |(s, w), &i| {
            (s + self.batches[i].sum, w + self.batches[i].weight)
        });
        s / w
    }

    /// `a − b` for independent estimates. Batches are paired by position.
    pub fn difference(a: &EstimatorResult, b: &EstimatorResult) -> EstimatorResult {
        let nb = a.batches.len().min(b.batches.len());
        let batches = (0..nb)
            .map(|i| BatchStat {
                chain: a.batches[i].chain,
                index: a.batches[i].index,
                sum: a.batches[i].mean() - b.batches[i].mean(),
                weight: 1.0,
                count: a.batches[i].count + b.batches[i].count,
            })
            .collect();
        EstimatorResult {
            estimate: a.estimate - b.estimate,
            stderr: (a.stderr.powi(2) + b.stderr.powi(2)).sqrt(),
            n_samples: a.n_samples + b.n_samples,
            n_eff: harmonic_sum(a.n_eff, b.n_eff),
            tau_int: a.tau_int.max(b.tau_int),
            batches,
        }
    }

    /// `(a + b)/2` for independent estimates. Batches are paired by position.
    pub fn mean_of(a: &EstimatorResult, b: &EstimatorResult) -> EstimatorResult {
        let nb = a.batches.len().min(b.batches.len());
        let batches = (0..nb)
            .map(|i| BatchStat {
                chain: a.batches[i].chain,
                index: a.batches[i].index,
                sum: 0.5 * (a.batches[i].mean() + b.batches[i].mean()),
                weight: 1.0,
                count: a.batches[i].count + b.batches[i].count,
            })
            .collect();
        EstimatorResult {
            estimate: 0.5 * (a.estimate + b.estimate),
            stderr: 0.5 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt(),
            n_samples: a.n_samples + b.n_samples,
            n_eff: a.n_eff + b.n_eff,
            tau_int: a.tau_int.max(b.tau_int),
            batches,
        }
    }

    /// A deterministic, error-free value (used for exactly known cases).
    pub fn exact(value: f64) -> EstimatorResult {
        EstimatorResult {
            estimate: value,
            stderr: 0.0,
            n_samples: 0,
            n_eff: f64::INFINITY,
            tau_int: 0.5,
            batches: Vec::new(),
        }
    }
}

fn harmonic_sum(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        1.0 / (1.0 / a + 1.0 / b)
    }
}

/// Per-chain series of `(value, weight)` records. Merging two accumulators is
/// associative and commutative, so parallel reductions give identical results.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    series: BTreeMap<u64, Vec<(f64, f64)>>,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, chain: u64, value: f64) {
        self.series.entry(chain).or_default().push((value, 1.0));
    }

    /// Records `value` with conditioning weight `weight` (`value` is the
    /// already-weighted numerator contribution).
    pub fn push_weighted(&mut self, chain: u64, value: f64, weight: f64) {
        self.series.entry(chain).or_default().push((value, weight));
    }

    pub fn merge(mut self, other: Accumulator) -> Accumulator {
        for (c, mut v) in other.series {
            self.series.entry(c).or_default().append(&mut v);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.series.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn chains(&self) -> usize {
        self.series.len()
    }

    /// `(value, weight)` records per chain, in push order.
    pub fn series(&self) -> &BTreeMap<u64, Vec<(f64, f64)>> {
        &self.series
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.series.values().flatten().map(|&(v, _)| v)
    }

    /// Estimate with at least `min_batches` batches overall (fewer only when
    /// there are fewer samples).
    pub fn result(&self, min_batches: usize) -> EstimatorResult {
        let n: usize = self.len();
        let chains = self.series.len().max(1);
        let per_chain = min_batches.div_ceil(chains).max(1);
        let mut batches = Vec::new();
        for (&c, s) in &self.series {
            let k = per_chain.min(s.len());
            for b in 0..k {
                let lo = b * s.len() / k;
                let hi = (b + 1) * s.len() / k;
                let (sum, weight) = s[lo..hi]
                    .iter()
                    .fold((0.0, 0.0), |(a, w), &(v, x)| (a + v, w + x));
                batches.push(BatchStat {
                    chain: c,
                    index: b as u32,
                    sum,
                    weight,
                    count: (hi - lo) as u64,
                });
            }
        }
        let tau = self.tau_int();
        let (estimate, stderr) = ratio_stats(&batches);
        EstimatorResult {
            estimate,
            stderr,
            n_samples: n as u64,
            n_eff: n as f64 / (2.0 * tau),
            tau_int: tau,
            batches,
        }
    }

    /// Chain-averaged integrated autocorrelation time of the values.
    pub fn tau_int(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for s in self.series.values() {
            if s.len() >= 8 {
                let v: Vec<f64> = s.iter().map(|&(v, _)| v).collect();
                num += tau_int(&v) * s.len() as f64;
                den += s.len() as f64;
            }
        }
        if den == 0.0 {
            0.5
        } else {
            num / den
        }
    }
}

/// Ratio estimate and its batch-means standard error.
pub fn ratio_stats(batches: &[BatchStat]) -> (f64, f64) {
    let s: f64 = batches.iter().map(|b| b.sum).sum();
    let w: f64 = batches.iter().map(|b| b.weight).sum();
    let m = s / w;
    let nb = batches.len();
    if nb < MIN_BATCHES {
        return (m, f64::NAN);
    }
    let ss: f64 = batches.iter().map(|b| (b.sum - m * b.weight).powi(2)).sum();
    let var = ss * nb as f64 / ((nb - 1) as f64 * w * w);
    (m, var.sqrt())
}

/// Integrated autocorrelation time with Sokal's automatic window (`c = 6`).
/// Returns at least `0.5`.
pub fn tau_int(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.5;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for t in 1..n {
        let ct = (0..n - t).map(|i| (x[i] - mean) * (x[i + t] - mean)).sum::<f64>() / n as f64;
        tau += ct / c0;
        if t as f64 >= 6.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}
