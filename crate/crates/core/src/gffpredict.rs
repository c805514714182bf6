//! Gaussian free field side of the comparison: log-kernel quadratic forms of
//! test functions and their characteristic values
//! `exp((1/2π²) ∬ F(z)F(z') log|z − z'|)`.
//!
//! With `A(s)` the area of the lens `B_1(0) ∩ B_1(s)`, the difference `z − z'`
//! of two uniform points of `B_1` has density `A(|w|)/π²`, so
//!
//! * `b₀ = (1/8π²) ∬_{B_1×B_1} log|z − z'| = (1/4π) ∫_0^2 s A(s) log s ds`,
//! * `b_ε(D) = (1/8π²) ∫_0^2 s A(s) ∫_0^{2π} log|1 − (εs/D) e^{iφ}| dφ ds`,
//!
//! and both are evaluated by nested adaptive quadrature. A ball pair at
//! distance `D` contributes `(π²/4) log D + 2π² b_ε(D)` to the kernel, a ball
//! against itself `(π²/4) log ε + 2π² b₀`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{invalid, regime, Result};
use crate::quadrature::{integrate, Quad};
use crate::testfn::TestFunction;

const OUTER_TOL: f64 = 1e-13;
const INNER_TOL: f64 = 1e-14;
const MAX_INTERVALS: usize = 20_000;

/// Area of `B_1(0) ∩ B_1(w)` for `|w| = s`.
pub fn lens_area(s: f64) -> f64 {
    if s >= 2.0 {
        return 0.0;
    }
    let h = 0.5 * s;
    2.0 * h.acos() - h * (4.0 - s * s).max(0.0).sqrt()
}

/// `b₀` with its quadrature error bound, computed to tolerance `tol`.
pub fn b0_with_tolerance(tol: f64) -> Result<Quad> {
    let q = integrate(
        |s: f64| if s <= 0.0 { 0.0 } else { s * lens_area(s) * s.ln() },
        0.0,
        2.0,
        tol,
        0.0,
        MAX_INTERVALS,
    )?;
    Ok(Quad {
        value: q.value / (4.0 * PI),
        error: q.error / (4.0 * PI),
        intervals: q.intervals,
    })
}

/// `b₀`, computed once per process.
pub fn b0() -> Quad {
    static B0: OnceLock<Quad> = OnceLock::new();
    *B0.get_or_init(|| b0_with_tolerance(OUTER_TOL).expect("b0 quadrature converges"))
}

/// `∫_0^{2π} log|1 − t e^{iφ}| dφ`, by quadrature on `[0, π]`.
fn angular_log(t: f64) -> Result<Quad> {
    if t == 0.0 {
        return Ok(Quad {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    integrate(
        |phi: f64| {
            // 1 + t² − 2t cos φ = (1 − t)² + 4t sin²(φ/2), written without
            // cancellation
            let s = (0.5 * phi).sin();
            ((1.0 - t).powi(2) + 4.0 * t * s * s).ln()
        },
        0.0,
        PI,
        INNER_TOL,
        0.0,
        MAX_INTERVALS,
    )
}

/// `b_ε(D)` for a centre distance `D > 0`. Depends on `ε/D` only.
pub fn b_eps(d: f64, eps: f64) -> Result<Quad> {
    if !(d > 0.0 && eps > 0.0) {
        return invalid(format!("need D > 0 and eps > 0, got D={d}, eps={eps}"));
    }
    let ratio = eps / d;
    let mut inner_err = 0.0f64;
    let mut failure = None;
    let mut f = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        match angular_log(ratio * s) {
            Ok(q) => {
                inner_err = inner_err.max(q.error);
                s * lens_area(s) * q.value
            }
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    // split where the angular integrand becomes singular (εs = D)
    let cut = 1.0 / ratio;
    let q = if cut > 0.0 && cut < 2.0 {
        let a = integrate(&mut f, 0.0, cut, OUTER_TOL, 0.0, MAX_INTERVALS)?;
        let b = integrate(&mut f, cut, 2.0, OUTER_TOL, 0.0, MAX_INTERVALS)?;
        Quad {
            value: a.value + b.value,
            error: a.error + b.error,
            intervals: a.intervals + b.intervals,
        }
    } else {
        integrate(&mut f, 0.0, 2.0, OUTER_TOL, 0.0, MAX_INTERVALS)?
    };
    if let Some(e) = failure {
        return Err(e);
    }
    let norm = 8.0 * PI * PI;
    // inner errors enter with weight ∫ s A(s) ds = π/2
    Ok(Quad {
        value: q.value / norm,
        error: (q.error + inner_err * PI / 2.0) / norm,
        intervals: q.intervals,
    })
}

/// `(1/4ε⁴) ∬_{B_ε×B_ε} log|z − z'|`.
pub fn self_term(eps: f64) -> Quad {
    let b = b0();
    Quad {
        value: PI * PI / 4.0 * eps.ln() + 2.0 * PI * PI * b.value,
        error: 2.0 * PI * PI * b.error,
        intervals: b.intervals,
    }
}

/// `(1/4ε⁴) ∬_{B_ε(0)×B_ε(x)} log|z − z'|` for `|x| = d`.
pub fn cross_term(d: f64, eps: f64) -> Result<Quad> {
    let b = b_eps(d, eps)?;
    Ok(Quad {
        value: PI * PI / 4.0 * d.ln() + 2.0 * PI * PI * b.value,
        error: 2.0 * PI * PI * b.error,
        intervals: b.intervals,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GffPrediction {
    /// `∬ F(z)F(z') log|z − z'|`.
    pub kernel: f64,
    /// `exp(kernel / 2π²)`.
    pub characteristic: f64,
    pub b0: f64,
    /// `(distance, b_ε(distance))` for every pair of distinct balls.
    pub b_eps: Vec<(f64, f64)>,
    /// Bound on the absolute quadrature error of `characteristic`.
    pub error_bound: f64,
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// `∬ F(z)F(z') log|z − z'|` with its quadrature error bound.
pub fn log_kernel(f: &TestFunction) -> Result<(f64, f64, Vec<(f64, f64)>)> {
    crate::loops::check_disjoint(&f.centers, f.eps)?;
    let k = f.len();
    let st = self_term(f.eps);
    let mut value = k as f64 * st.value;
    let mut error = k as f64 * st.error;
    let mut bs = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let d = dist(f.centers[i], f.centers[j]);
            let c = cross_term(d, f.eps)?;
            let qq = (f.charges[i] * f.charges[j]) as f64;
            value += 2.0 * qq * c.value;
            error += 2.0 * c.error;
            bs.push((d, (c.value - PI * PI / 4.0 * d.ln()) / (2.0 * PI * PI)));
        }
    }
    Ok((value, error, bs))
}

/// `exp((1/2π²) ∬ F F' log|z − z'|)` for mean-zero `F`.
pub fn gff_characteristic(f: &TestFunction) -> Result<GffPrediction> {
    if !f.is_mean_zero() {
        return invalid("the characteristic functional is defined for mean-zero F only");
    }
    let (kernel, err, bs) = log_kernel(f)?;
    let characteristic = (kernel / (2.0 * PI * PI)).exp();
    Ok(GffPrediction {
        kernel,
        characteristic,
        b0: b0().value,
        b_eps: bs,
        error_bound: characteristic * err / (2.0 * PI * PI),
    })
}

/// `a_ε(x) (ε/|x|)^{1/4}` with `a_ε(x) = e^{2b₀ − 2b_ε(x)}`.
pub fn predict_two_ball(x: (f64, f64), eps: f64) -> Result<GffPrediction> {
    let r = x.0.hypot(x.1);
    if !(r > 2.0 * eps) {
        return regime(format!("need |x| > 2 eps, got |x|={r}, eps={eps}"));
    }
    let b = b0();
    let be = b_eps(r, eps)?;
    let characteristic = (2.0 * b.value - 2.0 * be.value).exp() * (eps / r).powf(0.25);
    let kernel = 2.0 * PI * PI * characteristic.ln();
    Ok(GffPrediction {
        kernel,
        characteristic,
        b0: b.value,
        b_eps: vec![(r, be.value)],
        error_bound: characteristic * 2.0 * (b.error + be.error),
    })
}

/// Closed form for charges `+1` at `0, y` and `−1` at `x, x + y`:
/// `a_ε(x, y) ε^{1/2} |y|^{1/2} / (|x|^{1/2} |x − y|^{1/4} |x + y|^{1/4})`,
/// where `a_ε(x, y) = e^{4b₀ + 4b_ε(y) − 4b_ε(x) − 2b_ε(x+y) − 2b_ε(x−y)}`.
pub fn predict_four_ball(x: (f64, f64), y: (f64, f64), eps: f64) -> Result<GffPrediction> {
    let nx = x.0.hypot(x.1);
    let ny = y.0.hypot(y.1);
    let np = (x.0 + y.0).hypot(x.1 + y.1);
    let nm = (x.0 - y.0).hypot(x.1 - y.1);
    let dmin = nx.min(ny).min(np).min(nm);
    if !(dmin > 2.0 * eps) {
        return regime(format!("four balls overlap: min distance {dmin}, eps {eps}"));
    }
    let b = b0();
    let (bx, by, bp, bm) = (b_eps(nx, eps)?, b_eps(ny, eps)?, b_eps(np, eps)?, b_eps(nm, eps)?);
    let expo = 4.0 * b.value + 4.0 * by.value - 4.0 * bx.value - 2.0 * bp.value - 2.0 * bm.value;
    let characteristic = expo.exp() * eps.sqrt() * ny.sqrt() / (nx.sqrt() * nm.powf(0.25) * np.powf(0.25));
    let err = 4.0 * b.error + 4.0 * by.error + 4.0 * bx.error + 2.0 * bp.error + 2.0 * bm.error;
    Ok(GffPrediction {
        kernel: 2.0 * PI * PI * characteristic.ln(),
        characteristic,
        b0: b.value,
        b_eps: vec![(nx, bx.value), (ny, by.value), (np, bp.value), (nm, bm.value)],
        error_bound: characteristic * err,
    })
}
