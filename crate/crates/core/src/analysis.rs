//! Exponent fits, quasi-multiplicativity audits and scaling relations.

use num_rational::Ratio;
use rand::Rng;
use rand_distr_free::standard_normal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{invalid, Result};
use crate::estimator::EstimatorResult;
use crate::sampler::chain_rng;

/// Default number of bootstrap resamples.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    /// Scale variable: `R/r = 1/ε` for arm series, `|x|` for two-point series.
    pub scale: f64,
    pub estimate: EstimatorResult,
}

/// Estimates of `υ(εN, N)` at fixed outer scale, or of a two-point function
/// along a distance ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSeries {
    pub observable: String,
    pub n: u32,
    pub delta: f64,
    pub bc: String,
    pub points: Vec<SeriesPoint>,
}

impl ScalingSeries {
    pub fn new(observable: impl Into<String>, n: u32, delta: f64, bc: impl Into<String>) -> Self {
        ScalingSeries {
            observable: observable.into(),
            n,
            delta,
            bc: bc.into(),
            points: Vec::new(),
        }
    }

    pub fn push(&mut self, scale: f64, estimate: EstimatorResult) {
        self.points.push(SeriesPoint { scale, estimate });
    }

    /// Adds a point at scale ratio `ε = r/R`.
    pub fn push_ratio(&mut self, eps: f64, estimate: EstimatorResult) {
        self.push(1.0 / eps, estimate);
    }

    /// Series from bare values and standard errors (no batch table).
    pub fn from_values(observable: &str, scale: &[f64], values: &[f64], stderr: &[f64]) -> Self {
        let mut s = ScalingSeries::new(observable, 0, 1.0, "none");
        for i in 0..scale.len() {
            let mut e = EstimatorResult::exact(values[i]);
            e.stderr = stderr[i];
            s.push(scale[i], e);
        }
        s
    }

    /// Points sorted by increasing scale.
    fn sorted(&self) -> Vec<&SeriesPoint> {
        let mut p: Vec<&SeriesPoint> = self.points.iter().collect();
        p.sort_by(|a, b| a.scale.total_cmp(&b.scale));
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Number of smallest-scale (largest `ε`) points left out of the fit.
    pub exclude_largest: usize,
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            exclude_largest: 2,
            resamples: BOOTSTRAP_RESAMPLES,
            level: 0.95,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn all_points() -> Self {
        FitOptions {
            exclude_largest: 0,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub scale: f64,
    pub log_estimate: f64,
    pub fitted: f64,
    pub standardized: f64,
}

/// `log υ ≈ a + slope · log scale`, with `ς = −slope`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub observable: String,
    pub exponent: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Confidence interval for the slope.
    pub slope_ci: (f64, f64),
    /// Confidence interval for `ς`.
    pub exponent_ci: (f64, f64),
    pub slope_stderr: f64,
    pub level: f64,
    pub residuals: Vec<Residual>,
    pub excluded: Vec<f64>,
}

impl ExponentFit {
    pub fn slope_within(&self, target: f64, tol: f64) -> bool {
        (self.slope - target).abs() <= tol
    }
}

/// Weighted least squares line through `(x, y)`; returns `(a, b)`.
fn wls(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for i in 0..x.len() {
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
        sxx += w[i] * (x[i] - mx).powi(2);
    }
    let b = sxy / sxx;
    (my - b * mx, b)
}

fn log_sigma(e: &EstimatorResult) -> f64 {
    e.stderr / e.estimate
}

/// Fits `ς` by weighted least squares of `log υ` on `log(R/r)` (or `log |x|`)
/// with weights
/// `stderr⁻²` (propagated to the log scale). The interval comes from a
/// bootstrap over batches: when all points share one batch layout the same
/// batch picks are used for every point, otherwise points are resampled
/// independently; points without a batch table are resampled from a normal
/// law with their standard error.
pub fn fit_exponent(series: &ScalingSeries, opts: &FitOptions) -> Result<ExponentFit> {
    let sorted = series.sorted();
    if sorted.len() < opts.exclude_largest {
        return invalid("more points excluded than available");
    }
    let (excluded, used) = sorted.split_at(opts.exclude_largest);
    if used.len() < 4 {
        return invalid(format!("a fit needs at least 4 points, got {}", used.len()));
    }
    if let Some(p) = used.iter().find(|p| !(p.estimate.estimate > 0.0) || !(p.scale > 0.0)) {
        return invalid(format!("nonpositive value at scale {}: {}", p.scale, p.estimate.estimate));
    }
    let x: Vec<f64> = used.iter().map(|p| p.scale.ln()).collect();
    if x.iter().all(|&v| (v - x[0]).abs() < 1e-12) {
        return invalid("degenerate design: all scale ratios equal");
    }
    let y: Vec<f64> = used.iter().map(|p| p.estimate.estimate.ln()).collect();
    let sig: Vec<f64> = used.iter().map(|p| log_sigma(&p.estimate)).collect();
    let weighted = sig.iter().all(|s| s.is_finite() && *s > 0.0);
    let w: Vec<f64> = if weighted {
        sig.iter().map(|s| s.powi(-2)).collect()
    } else {
        vec![1.0; x.len()]
    };
    let (a, b) = wls(&x, &y, &w);

    let residuals = (0..x.len())
        .map(|i| {
            let fitted = a + b * x[i];
            Residual {
                scale: used[i].scale,
                log_estimate: y[i],
                fitted,
                standardized: if weighted { (y[i] - fitted) / sig[i] } else { y[i] - fitted },
            }
        })
        .collect();

    // bootstrap
    let nb: Vec<usize> = used.iter().map(|p| p.estimate.batches.len()).collect();
    let joint = nb[0] >= 2 && nb.iter().all(|&k| k == nb[0]);
    let mut rng = chain_rng(opts.seed, 0xf17);
    let mut slopes = Vec::with_capacity(opts.resamples);
    let mut yb = vec![0.0; x.len()];
    let mut wb = w.clone();
    let mut picks = Vec::new();
    for _ in 0..opts.resamples {
        if joint {
            picks.clear();
            picks.extend((0..nb[0]).map(|_| rng.gen_range(0..nb[0])));
        }
        let mut ok = true;
        for i in 0..x.len() {
            let e = &used[i].estimate;
            let (v, sv) = if joint {
                resample_point(e, &picks)
            } else if nb[i] >= 2 {
                let own: Vec<usize> = (0..nb[i]).map(|_| rng.gen_range(0..nb[i])).collect();
                resample_point(e, &own)
            } else {
                (e.estimate + e.stderr.max(0.0) * standard_normal(&mut rng), e.stderr)
            };
            if !(v > 0.0) {
                ok = false;
                break;
            }
            yb[i] = v.ln();
            wb[i] = if weighted && sv > 0.0 { (v / sv).powi(2) } else { w[i] };
        }
        if ok {
            slopes.push(wls(&x, &yb, &wb).1);
        }
    }
    let m = slopes.len() as f64;
    let sd = if slopes.len() >= 2 {
        let mean = slopes.iter().sum::<f64>() / m;
        (slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        f64::NAN
    };
    // small numbers of batches: inflate by B/(B-1) and use Student quantiles
    let q = 0.5 + opts.level / 2.0;
    let (scale, quant) = if nb.iter().all(|&k| k >= 2) {
        let bmin = *nb.iter().min().unwrap() as f64;
        let t = StudentsT::new(0.0, 1.0, bmin - 1.0).expect("valid dof");
        ((bmin / (bmin - 1.0)).sqrt(), t.inverse_cdf(q))
    } else {
        (1.0, Normal::new(0.0, 1.0).expect("valid").inverse_cdf(q))
    };
    let half = quant * sd * scale;
    let slope_ci = if half.is_finite() { (b - half, b + half) } else { (b, b) };
    Ok(ExponentFit {
        observable: series.observable.clone(),
        exponent: -b,
        slope: b,
        intercept: a,
        slope_ci,
        exponent_ci: (-slope_ci.1, -slope_ci.0),
        slope_stderr: sd * scale,
        level: opts.level,
        residuals,
        excluded: excluded.iter().map(|p| p.scale).collect(),
    })
}

/// Ratio estimate and its batch-means error over a multiset of batches.
fn resample_point(e: &EstimatorResult, picks: &[usize]) -> (f64, f64) {
    let chosen: Vec<_> = picks.iter().map(|&i| e.batches[i]).collect();
    let (m, se) = ratio_stats_any(&chosen);
    (m, se)
}

fn ratio_stats_any(batches: &[crate::estimator::BatchStat]) -> (f64, f64) {
    let s: f64 = batches.iter().map(|b| b.sum).sum();
    let w: f64 = batches.iter().map(|b| b.weight).sum();
    let m = s / w;
    let nb = batches.len() as f64;
    let ss: f64 = batches.iter().map(|b| (b.sum - m * b.weight).powi(2)).sum();
    (m, (ss * nb / ((nb - 1.0) * w * w)).sqrt())
}

/// One triple `r ≤ ρ ≤ R` with the three probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiMultTriple {
    pub r: u32,
    pub rho: u32,
    pub big_r: u32,
    pub inner: EstimatorResult,
    pub outer: EstimatorResult,
    pub whole: EstimatorResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiMultEntry {
    pub r: u32,
    pub rho: u32,
    pub big_r: u32,
    pub ratio: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub entries: Vec<QuasiMultEntry>,
    pub min: f64,
    pub max: f64,
    /// Smallest `C` with every ratio in `[1/C, C]`.
    pub c: f64,
}

impl BandReport {
    pub fn within(&self, c: f64) -> bool {
        self.entries.iter().all(|e| e.ratio >= 1.0 / c && e.ratio <= c)
    }
}

/// Ratios `π(r,R) / (π(r,ρ) π(ρ,R))` with first-order error propagation.
pub fn quasi_mult_audit(triples: &[QuasiMultTriple]) -> Result<BandReport> {
    if triples.is_empty() {
        return invalid("no triples");
    }
    let mut entries = Vec::new();
    for t in triples {
        if !(t.r <= t.rho && t.rho <= t.big_r) {
            return invalid(format!("inconsistent scales ({}, {}, {})", t.r, t.rho, t.big_r));
        }
        let (a, b, c) = (t.inner.estimate, t.outer.estimate, t.whole.estimate);
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return invalid(format!("nonpositive probability in triple ({}, {}, {})", t.r, t.rho, t.big_r));
        }
        let ratio = c / (a * b);
        let rel = (log_sigma(&t.inner).powi(2) + log_sigma(&t.outer).powi(2) + log_sigma(&t.whole).powi(2)).sqrt();
        entries.push(QuasiMultEntry {
            r: t.r,
            rho: t.rho,
            big_r: t.big_r,
            ratio,
            stderr: ratio * rel,
        });
    }
    let min = entries.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min);
    let max = entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
    Ok(BandReport {
        entries,
        min,
        max,
        c: max.max(1.0 / min),
    })
}

pub type Rational = Ratio<i64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalingExponents {
    pub xi1: Rational,
    pub iota: Rational,
    pub nu: Rational,
    pub beta: Rational,
    pub gamma: Rational,
    pub alpha: Rational,
    pub eta: Rational,
    pub volume_tail: Rational,
}

/// Exponents off criticality from the one-arm exponent `ξ₁` and the
/// influence exponent `ι`.
pub fn scaling_relations(xi1: Rational, iota: Rational) -> Result<ScalingExponents> {
    let zero = Rational::from_integer(0);
    let one = Rational::from_integer(1);
    let two = Rational::from_integer(2);
    if xi1 < zero || xi1 >= one {
        return invalid(format!("one-arm exponent {xi1} outside [0, 1)"));
    }
    if iota <= zero || iota >= two {
        return invalid(format!("influence exponent {iota} outside (0, 2)"));
    }
    let nu = one / (two - iota);
    Ok(ScalingExponents {
        xi1,
        iota,
        nu,
        beta: xi1 * nu,
        gamma: (two - two * xi1) * nu,
        alpha: two - two * nu,
        eta: two * xi1,
        volume_tail: xi1 / (two - xi1),
    })
}

/// Slope of one observable at each `N`, largest last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub n: u32,
    pub slope: f64,
    pub slope_ci: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub observable: String,
    pub n_ladder: Vec<LadderEntry>,
    /// `(scale, estimate, stderr)`.
    pub points: Vec<(f64, f64, f64)>,
    pub slope: f64,
    pub ci: (f64, f64),
    pub residuals: Vec<Residual>,
    pub config_hash: String,
}

/// Fit report at the largest `N` with the trend over the ladder.
pub fn fit_report(series: &[ScalingSeries], opts: &FitOptions, config_hash: &str) -> Result<FitReport> {
    let mut ladder = Vec::new();
    let mut fits = Vec::new();
    for s in series {
        let f = fit_exponent(s, opts)?;
        ladder.push(LadderEntry {
            n: s.n,
            slope: f.slope,
            slope_ci: f.slope_ci,
        });
        fits.push((s, f));
    }
    ladder.sort_by_key(|e| e.n);
    let (s, f) = fits
        .into_iter()
        .max_by_key(|(s, _)| s.n)
        .ok_or_else(|| crate::error::Error::InvalidInput("empty ladder".into()))?;
    Ok(FitReport {
        observable: s.observable.clone(),
        n_ladder: ladder,
        points: s.sorted().iter().map(|p| (p.scale, p.estimate.estimate, p.estimate.stderr)).collect(),
        slope: f.slope,
        ci: f.slope_ci,
        residuals: f.residuals,
        config_hash: config_hash.to_string(),
    })
}

mod rand_distr_free {
    use rand::Rng;

    /// Standard normal deviate by the polar method.
    pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
        loop {
            let u: f64 = rng.gen_range(-1.0..1.0);
            let v: f64 = rng.gen_range(-1.0..1.0);
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                return u * (-2.0 * s.ln() / s).sqrt();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::Accumulator;

    const EPS: [f64; 5] = [0.5, 0.25, 0.125, 0.0625, 0.03125];
    const SCALES: [f64; 5] = [2.0, 4.0, 8.0, 16.0, 32.0];

    fn power(c: f64, s: f64) -> ScalingSeries {
        let v: Vec<f64> = EPS.iter().map(|e| c * e.powf(s)).collect();
        ScalingSeries::from_values("synthetic", &SCALES, &v, &[0.0; 5])
    }

    #[test]
    fn exact_power_law() {
        let f = fit_exponent(&power(1.0, 0.5), &FitOptions::all_points()).unwrap();
        assert!((f.exponent - 0.5).abs() < 1e-12);
        let g = fit_exponent(&power(3.7, 0.5), &FitOptions::all_points()).unwrap();
        assert!((g.exponent - 0.5).abs() < 1e-12);
        assert!(g.slope_ci.0 <= g.slope && g.slope <= g.slope_ci.1);
    }

    #[test]
    fn scale_covariance() {
        let s = ScalingSeries::from_values("x", &SCALES, &[0.9, 0.7, 0.61, 0.5, 0.37], &[0.01, 0.01, 0.02, 0.02, 0.03]);
        let f = fit_exponent(&s, &FitOptions::all_points()).unwrap();
        let mut t = s.clone();
        for p in t.points.iter_mut() {
            p.estimate.estimate *= 5.0;
            p.estimate.stderr *= 5.0;
        }
        let g = fit_exponent(&t, &FitOptions::all_points()).unwrap();
        assert!((f.slope - g.slope).abs() < 1e-12);
        let mut u = s.clone();
        for p in u.points.iter_mut() {
            p.scale *= 3.0;
        }
        let h = fit_exponent(&u, &FitOptions::all_points()).unwrap();
        assert!((f.slope - h.slope).abs() < 1e-12);
    }

    #[test]
    fn rejections() {
        let s = ScalingSeries::from_values("x", &SCALES, &[0.9, 0.7, 0.0, 0.5, 0.37], &[0.01; 5]);
        assert!(fit_exponent(&s, &FitOptions::all_points()).is_err());
        let s = ScalingSeries::from_values("x", &[0.5; 5], &[0.9, 0.7, 0.6, 0.5, 0.37], &[0.01; 5]);
        assert!(fit_exponent(&s, &FitOptions::all_points()).is_err());
        // default excludes two points, leaving three
        assert!(fit_exponent(&power(1.0, 0.5), &FitOptions::default()).is_err());
    }

    #[test]
    fn bootstrap_coverage_with_batches() {
        // v = eps^0.5 (1 + 0.1 noise), noise realised through 16 batches per point
        let reps = 1000;
        let mut covered = 0;
        let mut rng = chain_rng(99, 0);
        for rep in 0..reps {
            let mut s = ScalingSeries::new("sim", 512, 1.0, "none");
            for &e in &EPS {
                let mut acc = Accumulator::new();
                for _ in 0..16 {
                    // each batch mean has relative sd 0.1·4 so the mean of 16 has 0.1
                    let z = rand_distr_free::standard_normal(&mut rng);
                    acc.push(0, e.powf(0.5) * (1.0 + 0.4 * z));
                }
                s.push_ratio(e, acc.result(16));
            }
            let f = fit_exponent(
                &s,
                &FitOptions {
                    seed: rep,
                    ..FitOptions::all_points()
                },
            )
            .unwrap();
            if f.exponent_ci.0 <= 0.5 && 0.5 <= f.exponent_ci.1 {
                covered += 1;
            }
        }
        // nominal 95% interval; allow three binomial standard deviations
        let rate = covered as f64 / reps as f64;
        let sd = (0.95f64 * 0.05 / reps as f64).sqrt();
        assert!(rate >= 0.95 - 3.0 * sd, "coverage {rate}");
    }

    #[test]
    fn quasi_mult() {
        let p = |r: f64, big: f64| EstimatorResult::exact((r / big).powf(0.125));
        let triples: Vec<QuasiMultTriple> = [(2u32, 8u32, 64u32), (4, 16, 256), (1, 2, 4)]
            .iter()
            .map(|&(r, rho, big)| QuasiMultTriple {
                r,
                rho,
                big_r: big,
                inner: p(r as f64, rho as f64),
                outer: p(rho as f64, big as f64),
                whole: p(r as f64, big as f64),
            })
            .collect();
        let rep = quasi_mult_audit(&triples).unwrap();
        assert!((rep.min - 1.0).abs() < 1e-12 && (rep.max - 1.0).abs() < 1e-12);
        let mut bad = triples.clone();
        bad[0].rho = 100;
        assert!(quasi_mult_audit(&bad).is_err());
    }

    #[test]
    fn relations() {
        let r = |a, b| Rational::new(a, b);
        let e = scaling_relations(r(1, 8), r(1, 2)).unwrap();
        assert_eq!(
            (e.nu, e.beta, e.gamma, e.alpha, e.eta, e.volume_tail),
            (r(2, 3), r(1, 12), r(7, 6), r(2, 3), r(1, 4), r(1, 15))
        );
        let z = scaling_relations(r(0, 1), r(1, 2)).unwrap();
        assert_eq!((z.beta, z.eta), (r(0, 1), r(0, 1)));
        assert!(scaling_relations(r(1, 1), r(1, 2)).is_err());
        assert!(scaling_relations(r(1, 8), r(2, 1)).is_err());
    }
}
