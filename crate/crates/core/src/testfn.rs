//! Test functions `F = Σ q_i (1/2ε²) 1_{B_ε(x_i)}` with charges `q_i = ±1`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::loops::check_disjoint;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub centers: Vec<(f64, f64)>,
    pub charges: Vec<i8>,
    pub eps: f64,
}

impl TestFunction {
    pub fn new(centers: Vec<(f64, f64)>, charges: Vec<i8>, eps: f64) -> Result<Self> {
        if centers.len() != charges.len() {
            return invalid("one charge per centre is required");
        }
        if charges.iter().any(|&q| q != 1 && q != -1) {
            return invalid("charges must be +1 or -1");
        }
        check_disjoint(&centers, eps)?;
        Ok(TestFunction {
            centers,
            charges,
            eps,
        })
    }

    /// `F ≡ 0`.
    pub fn empty(eps: f64) -> Self {
        TestFunction {
            centers: Vec::new(),
            charges: Vec::new(),
            eps,
        }
    }

    /// `+1` at `a`, `−1` at `b`.
    pub fn dipole(a: (f64, f64), b: (f64, f64), eps: f64) -> Result<Self> {
        Self::new(vec![a, b], vec![1, -1], eps)
    }

    /// Charges `+1` at `0` and `y`, `−1` at `x` and `x + y`, in that order.
    pub fn four_ball(origin: (f64, f64), x: (f64, f64), y: (f64, f64), eps: f64) -> Result<Self> {
        let at = |v: (f64, f64)| (origin.0 + v.0, origin.1 + v.1);
        Self::new(
            vec![at((0.0, 0.0)), at(y), at(x), at((x.0 + y.0, x.1 + y.1))],
            vec![1, 1, -1, -1],
            eps,
        )
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn is_mean_zero(&self) -> bool {
        self.charges.iter().map(|&q| q as i32).sum::<i32>() == 0
    }

    /// Height of `F` on its support: `1/(2ε²)`.
    pub fn amplitude(&self) -> f64 {
        1.0 / (2.0 * self.eps * self.eps)
    }

    /// `∫ F` over the ball `i` alone: `q_i π/2`.
    pub fn ball_mass(&self, i: usize) -> f64 {
        self.charges[i] as f64 * std::f64::consts::FRAC_PI_2
    }

    /// The same function with every length multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        TestFunction {
            centers: self.centers.iter().map(|c| (c.0 * s, c.1 * s)).collect(),
            charges: self.charges.clone(),
            eps: self.eps * s,
        }
    }

    pub fn translated(&self, by: (f64, f64)) -> Self {
        TestFunction {
            centers: self.centers.iter().map(|c| (c.0 + by.0, c.1 + by.1)).collect(),
            charges: self.charges.clone(),
            eps: self.eps,
        }
    }

    /// Rotation by a quarter turn, `k` times, about the origin.
    pub fn rotated_quarter(&self, k: u32) -> Self {
        let rot = |(x, y): (f64, f64)| match k % 4 {
            0 => (x, y),
            1 => (-y, x),
            2 => (-x, -y),
            _ => (y, -x),
        };
        TestFunction {
            centers: self.centers.iter().map(|&c| rot(c)).collect(),
            charges: self.charges.clone(),
            eps: self.eps,
        }
    }

    /// Sum of two test functions with the same radius.
    pub fn plus(&self, other: &TestFunction) -> Result<Self> {
        if self.eps != other.eps {
            return invalid("radii differ");
        }
        let mut c = self.centers.clone();
        c.extend_from_slice(&other.centers);
        let mut q = self.charges.clone();
        q.extend_from_slice(&other.charges);
        Self::new(c, q, self.eps)
    }

    /// Largest `L∞` reach of the support from the origin.
    pub fn reach(&self) -> f64 {
        self.centers
            .iter()
            .map(|c| c.0.abs().max(c.1.abs()) + self.eps)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_rules() {
        assert!(TestFunction::dipole((0.0, 0.0), (0.5, 0.0), 0.125).unwrap().is_mean_zero());
        assert!(TestFunction::dipole((0.0, 0.0), (0.2, 0.0), 0.125).is_err());
        assert!(TestFunction::new(vec![(0.0, 0.0)], vec![2], 0.1).is_err());
        let f = TestFunction::four_ball((0.0, 0.0), (1.0, 0.0), (0.0, 0.3), 0.05).unwrap();
        assert!(f.is_mean_zero());
        assert_eq!(f.charges, vec![1, 1, -1, -1]);
        assert!(!TestFunction::new(vec![(0.0, 0.0)], vec![1], 0.1).unwrap().is_mean_zero());
    }
}
