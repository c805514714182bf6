//! Height function obtained by orienting every loop independently and
//! uniformly: `h = Σ_ℓ σ_ℓ 1_{int ℓ}`, constant on each medial face.

use rand::RngCore;
use std::collections::HashMap;

use crate::error::{invalid, Error, Result};
use crate::geometry;
use crate::loops::{LoopSet, NONE};
use crate::testfn::TestFunction;

/// Loop integrals below this magnitude are treated as exactly zero.
pub const ZERO_INTEGRAL: f64 = 1e-12;

/// Largest number of loops enumerated by [`orientation_average`].
pub const MAX_ENUM_LOOPS: usize = 24;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrientedLoops {
    pub signs: Vec<i8>,
}

/// Independent fair signs, one per loop, drawn from `rng` in loop order.
pub fn orient<R: RngCore>(set: &LoopSet, rng: &mut R) -> OrientedLoops {
    let n = set.len();
    let mut signs = Vec::with_capacity(n);
    while signs.len() < n {
        let mut bits = rng.next_u64();
        for _ in 0..64.min(n - signs.len()) {
            signs.push(if bits & 1 == 1 { 1 } else { -1 });
            bits >>= 1;
        }
    }
    OrientedLoops { signs }
}

/// Integer height per face id; the outer face has height 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeightField {
    pub values: Vec<i32>,
}

impl HeightField {
    pub fn get(&self, face: u32) -> i32 {
        self.values[face as usize]
    }
}

/// `h(f) = Σ_{ℓ ∋ f} σ_ℓ`.
pub fn height(set: &LoopSet, oriented: &OrientedLoops) -> HeightField {
    let mut acc = vec![0i32; set.len()];
    for &l in set.topological_order() {
        let p = set.get(l).parent;
        let base = if p == NONE { 0 } else { acc[p as usize] };
        acc[l as usize] = base + oriented.signs[l as usize] as i32;
    }
    let values = (0..set.num_faces() as u32)
        .map(|f| {
            let l = set.face_inner(f);
            if l == NONE {
                0
            } else {
                acc[l as usize]
            }
        })
        .collect();
    HeightField { values }
}

/// `∫_f F` for every face meeting the support of `F`. `F` is given in
/// physical units and rescaled by the domain's mesh.
pub fn face_weights(set: &LoopSet, f: &TestFunction) -> Result<Vec<(u32, f64)>> {
    let d = set.domain();
    let fl = f.scaled(1.0 / d.scale().as_f64());
    if fl.reach() + 1.0 >= d.n() as f64 {
        return Err(Error::Regime(format!(
            "support of F reaches {:.3} lattice steps, box half-width is {}",
            fl.reach(),
            d.n()
        )));
    }
    let amp = fl.amplitude();
    let mut w: HashMap<u32, f64> = HashMap::new();
    for (i, &c) in fl.centers.iter().enumerate() {
        let q = fl.charges[i] as f64;
        for fc in geometry::faces_meeting_disk(c, fl.eps) {
            let area = geometry::diamond_disk_area((fc.0 as f64 / 2.0, fc.1 as f64 / 2.0), c, fl.eps);
            *w.entry(set.face_at(fc)).or_insert(0.0) += q * amp * area;
        }
    }
    let mut out: Vec<(u32, f64)> = w.into_iter().collect();
    out.sort_unstable_by_key(|x| x.0);
    Ok(out)
}

/// `∫ F h`, summed face by face with exact disk–diamond overlaps.
pub fn test_integral(set: &LoopSet, h: &HeightField, f: &TestFunction) -> Result<f64> {
    Ok(face_weights(set, f)?
        .iter()
        .map(|&(face, w)| h.get(face) as f64 * w)
        .sum())
}

/// `∫_{int ℓ} F` for every loop where it is non-zero.
pub fn loop_integrals(set: &LoopSet, f: &TestFunction) -> Result<Vec<(u32, f64)>> {
    let mut acc: HashMap<u32, f64> = HashMap::new();
    for (face, w) in face_weights(set, f)? {
        for l in set.chain(face) {
            *acc.entry(l).or_insert(0.0) += w;
        }
    }
    let mut out: Vec<(u32, f64)> = acc
        .into_iter()
        .filter(|&(_, a)| a.abs() > ZERO_INTEGRAL)
        .collect();
    out.sort_unstable_by_key(|x| x.0);
    Ok(out)
}

/// `A_F(𝓛) = Π_ℓ cos(∫_{int ℓ} F)`.
pub fn a_f(set: &LoopSet, f: &TestFunction) -> Result<f64> {
    Ok(loop_integrals(set, f)?.iter().map(|&(_, a)| a.cos()).product())
}

/// Exact average of `e^{i ∫ F h}` over all orientations, as `(re, im)`.
///
/// Loops whose interior integral vanishes contribute a factor 1 whatever their
/// sign, so only the others are enumerated; their signs are held at `+1`.
pub fn orientation_average(set: &LoopSet, f: &TestFunction) -> Result<(f64, f64)> {
    let relevant: Vec<u32> = loop_integrals(set, f)?.into_iter().map(|x| x.0).collect();
    let m = relevant.len();
    if m > MAX_ENUM_LOOPS {
        return invalid(format!("{m} loops meet the support, enumeration limit is {MAX_ENUM_LOOPS}"));
    }
    let weights = face_weights(set, f)?;
    let mut signs = OrientedLoops {
        signs: vec![1; set.len()],
    };
    let (mut re, mut im) = (0.0, 0.0);
    for mask in 0u32..(1 << m) {
        for (k, &l) in relevant.iter().enumerate() {
            signs.signs[l as usize] = if mask >> k & 1 == 1 { -1 } else { 1 };
        }
        // heights are only needed on the support faces
        let s: f64 = weights
            .iter()
            .map(|&(face, w)| {
                let h: i32 = set.chain(face).map(|l| signs.signs[l as usize] as i32).sum();
                h as f64 * w
            })
            .sum();
        re += s.cos();
        im += s.sin();
    }
    let n = (1u64 << m) as f64;
    Ok((re / n, im / n))
}
