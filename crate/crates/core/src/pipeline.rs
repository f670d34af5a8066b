//! Per-cell PBDW candidates and surrogate model selection.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::FemVector;
use crate::measurement::MeasurementSpace;
use crate::partition::AdmissibleFamily;
use crate::surrogate::{SurrogateEvaluator, SurrogateValue};

/// Reconstruction proposed by one cell.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub cell: usize,
    pub estimate: FemVector,
}

/// Candidates of all stable cells, in cell order.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    candidates: Vec<Candidate>,
    skipped: Vec<usize>,
}

impl CandidateSet {
    /// PBDW estimates for every cell; cells whose estimate is unstable are skipped.
    pub fn build(family: &AdmissibleFamily, ms: &MeasurementSpace, w: &[f64]) -> Result<Self> {
        if w.len() != ms.m() {
            return Err(Error::DimensionMismatch { expected: ms.m(), found: w.len() });
        }
        let results: Vec<Result<FemVector>> = family
            .cells()
            .par_iter()
            .map(|cell| match cell.space().mu() {
                Some(mu) if !mu.is_finite() => Err(Error::UnstableEstimate),
                _ => cell.space().pbdw_estimate(ms, w),
            })
            .collect();
        let mut candidates = Vec::new();
        let mut skipped = Vec::new();
        for (cell, r) in results.into_iter().enumerate() {
            match r {
                Ok(estimate) => candidates.push(Candidate { cell, estimate }),
                Err(Error::UnstableEstimate) => skipped.push(cell),
                Err(e) => return Err(e),
            }
        }
        if candidates.is_empty() {
            return Err(Error::AllCellsUnstable);
        }
        Ok(Self { candidates, skipped })
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    /// Cells excluded because their estimate is unstable.
    pub fn skipped(&self) -> &[usize] {
        &self.skipped
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Outcome of selecting among the candidates with surrogates on one level.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    /// Selected cell index.
    pub k_star: usize,
    pub level: u32,
    /// `(cell, surrogate)` for every evaluated cell, in cell order.
    pub surrogates: Vec<(usize, SurrogateValue)>,
    /// Cells skipped as unstable.
    pub skipped: Vec<usize>,
    /// Other cells attaining the same minimum as `k_star`.
    pub ties: Vec<usize>,
    pub u_star: FemVector,
}

impl SelectionResult {
    pub fn distance_of(&self, cell: usize) -> Option<f64> {
        self.surrogates.iter().find(|(k, _)| *k == cell).map(|(_, s)| s.distance)
    }
}

/// Argmin over `(cell, value)` pairs, lowest cell on ties; also returns the other tied cells.
pub fn argmin_lowest(values: &[(usize, f64)]) -> Option<(usize, Vec<usize>)> {
    let mut best: Option<(usize, f64)> = None;
    for &(k, v) in values {
        match best {
            Some((bk, bv)) if v > bv || (v == bv && k > bk) => {}
            _ => best = Some((k, v)),
        }
    }
    let (k, v) = best?;
    let ties = values.iter().filter(|&&(j, x)| x == v && j != k).map(|&(j, _)| j).collect();
    Some((k, ties))
}

/// Evaluates `S_s` on every candidate and picks the smallest.
pub fn select_from_candidates(ev: &SurrogateEvaluator<'_>, set: &CandidateSet, s: u32) -> Result<SelectionResult> {
    let surrogates: Vec<(usize, SurrogateValue)> = set
        .candidates()
        .par_iter()
        .map(|c| Ok((c.cell, ev.surrogate(&c.estimate, s)?)))
        .collect::<Result<_>>()?;
    let values: Vec<(usize, f64)> = surrogates.iter().map(|(k, v)| (*k, v.distance)).collect();
    let (k_star, ties) = argmin_lowest(&values).ok_or(Error::AllCellsUnstable)?;
    let u_star = set
        .candidates()
        .iter()
        .find(|c| c.cell == k_star)
        .map(|c| c.estimate.clone())
        .expect("selected cell has a candidate");
    Ok(SelectionResult { k_star, level: s, surrogates, skipped: set.skipped().to_vec(), ties, u_star })
}

pub fn select(
    ev: &SurrogateEvaluator<'_>,
    family: &AdmissibleFamily,
    ms: &MeasurementSpace,
    w: &[f64],
    s: u32,
) -> Result<SelectionResult> {
    let set = CandidateSet::build(family, ms, w)?;
    select_from_candidates(ev, &set, s)
}

/// The selected reconstruction `u*(w)`.
pub fn estimate(
    ev: &SurrogateEvaluator<'_>,
    family: &AdmissibleFamily,
    ms: &MeasurementSpace,
    w: &[f64],
    s: u32,
) -> Result<FemVector> {
    Ok(select(ev, family, ms, w, s)?.u_star)
}
