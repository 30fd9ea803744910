//! Training objectives evaluated on complex spectrograms.
//!
//! The base loss is an L1 distance on real parts, imaginary parts and
//! magnitudes. PIT searches all speaker assignments (C <= 8), the
//! mixture-constraint loss compares the sum of estimates to a mixture, and the
//! enhancement loss scores a fixed assignment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::ComplexSpectrogram;

pub const MAX_PIT_SPEAKERS: usize = 8;

/// Name of the base loss, echoed into reports.
pub const BASE_LOSS_NAME: &str = "l1_ri_mag";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTerm {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub total: f64,
    pub terms: Vec<LossTerm>,
    /// `permutation[c]` is the estimate index assigned to reference `c`.
    pub permutation: Option<Vec<usize>>,
}

impl LossValue {
    fn from_terms(terms: Vec<(&str, f64)>, permutation: Option<Vec<usize>>) -> Self {
        let terms: Vec<LossTerm> = terms
            .into_iter()
            .map(|(n, v)| LossTerm {
                name: n.to_string(),
                value: v,
            })
            .collect();
        LossValue {
            total: terms.iter().map(|t| t.value).sum(),
            terms,
            permutation,
        }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

/// `(sum|dRe| + sum|dIm| + sum||est|-|ref||) / (3 T F)`.
pub fn base_loss(est: &ComplexSpectrogram, reference: &ComplexSpectrogram) -> Result<f64> {
    est.ensure_same_shape(reference, "base loss")?;
    let n = est.data().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = est
        .data()
        .iter()
        .zip(reference.data())
        .map(|(e, r)| (e.re - r.re).abs() + (e.im - r.im).abs() + (e.norm() - r.norm()).abs())
        .sum();
    Ok(sum / (3.0 * n as f64))
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
    }
    out
}

/// Permutation minimising `cost`; the lexicographically first wins ties.
pub fn best_permutation(n: usize, cost: impl Fn(&[usize]) -> f64) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for p in permutations(n) {
        let c = cost(&p);
        if best.as_ref().is_none_or(|(_, b)| c < *b) {
            best = Some((p, c));
        }
    }
    best.unwrap_or((Vec::new(), 0.0))
}

fn check_counts(ests: &[ComplexSpectrogram], refs: &[ComplexSpectrogram]) -> Result<()> {
    if ests.len() != refs.len() {
        return Err(Error::shape(format!(
            "{} estimates for {} references",
            ests.len(),
            refs.len()
        )));
    }
    if ests.is_empty() {
        return Err(Error::Empty("speaker list"));
    }
    if ests.len() > MAX_PIT_SPEAKERS {
        return Err(Error::arg(format!(
            "{} speakers exceeds the PIT limit of {MAX_PIT_SPEAKERS}",
            ests.len()
        )));
    }
    Ok(())
}

/// `pair[r][e]` = base loss of estimate `e` against reference `r`.
fn pair_losses(ests: &[ComplexSpectrogram], refs: &[ComplexSpectrogram]) -> Result<Vec<Vec<f64>>> {
    refs.iter()
        .map(|r| ests.iter().map(|e| base_loss(e, r)).collect())
        .collect()
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::arg(format!("{perm:?} is not a permutation of {n} speakers")));
    }
    Ok(())
}

/// Permutation-invariant loss: minimum over assignments of the summed base loss.
pub fn pit_loss(ests: &[ComplexSpectrogram], refs: &[ComplexSpectrogram]) -> Result<LossValue> {
    check_counts(ests, refs)?;
    let pair = pair_losses(ests, refs)?;
    let (perm, total) = best_permutation(ests.len(), |p| {
        p.iter().enumerate().map(|(r, &e)| pair[r][e]).sum()
    });
    Ok(LossValue::from_terms(vec![("pit", total)], Some(perm)))
}

/// Base loss between the sum of estimates and the mixture.
pub fn mc_loss(ests: &[ComplexSpectrogram], mixture: &ComplexSpectrogram) -> Result<f64> {
    let sum = ComplexSpectrogram::sum(ests)?;
    base_loss(&sum, mixture)
}

/// Summed base loss under a fixed assignment.
pub fn enh_loss(
    ests: &[ComplexSpectrogram],
    refs: &[ComplexSpectrogram],
    permutation: &[usize],
) -> Result<f64> {
    check_counts(ests, refs)?;
    check_permutation(permutation, ests.len())?;
    refs.iter()
        .zip(permutation)
        .map(|(r, &e)| base_loss(&ests[e], r))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// PIT + MC on both streams with one shared assignment.
    Stage1,
    /// Enhancement + MC on both streams with a fixed assignment.
    Stage2,
}

/// Joint reverberant (R) and anechoic (A) loss.
///
/// The R stream's mixture constraint targets `mixture`; the A stream's
/// targets the sum of the anechoic references. For [`Stage::Stage2`] a
/// missing `permutation` is resolved jointly as in stage 1.
#[allow(clippy::too_many_arguments)]
pub fn composite_loss(
    stage: Stage,
    est_r: &[ComplexSpectrogram],
    est_a: &[ComplexSpectrogram],
    ref_r: &[ComplexSpectrogram],
    ref_a: &[ComplexSpectrogram],
    mixture: &ComplexSpectrogram,
    permutation: Option<&[usize]>,
) -> Result<LossValue> {
    check_counts(est_r, ref_r)?;
    check_counts(est_a, ref_a)?;
    check_counts(est_r, est_a)?;
    let mix_a = ComplexSpectrogram::sum(ref_a)?;
    let mc_r = mc_loss(est_r, mixture)?;
    let mc_a = mc_loss(est_a, &mix_a)?;
    let pair_r = pair_losses(est_r, ref_r)?;
    let pair_a = pair_losses(est_a, ref_a)?;
    let joint = |p: &[usize]| -> (f64, f64) {
        p.iter()
            .enumerate()
            .fold((0.0, 0.0), |(r, a), (c, &e)| (r + pair_r[c][e], a + pair_a[c][e]))
    };
    let resolve = || best_permutation(est_r.len(), |p| {
        let (r, a) = joint(p);
        r + a
    });
    match stage {
        Stage::Stage1 => {
            let (perm, _) = resolve();
            let (r, a) = joint(&perm);
            Ok(LossValue::from_terms(
                vec![("pit_r", r), ("mc_r", mc_r), ("pit_a", a), ("mc_a", mc_a)],
                Some(perm),
            ))
        }
        Stage::Stage2 => {
            let perm = match permutation {
                Some(p) => {
                    check_permutation(p, est_r.len())?;
                    p.to_vec()
                }
                None => resolve().0,
            };
            let (r, a) = joint(&perm);
            Ok(LossValue::from_terms(
                vec![("enh_r", r), ("mc_r", mc_r), ("enh_a", a), ("mc_a", mc_a)],
                Some(perm),
            ))
        }
    }
}
