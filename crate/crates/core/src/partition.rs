//! Greedy splitting of the parameter box into cells with local reduced spaces.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{FemVector, LevelSpace};
use crate::measurement::MeasurementSpace;
use crate::problem::{ParameterBox, ParameterPoint};
use crate::reduced_basis::{greedy_build, mean, AffineReducedSpace, GreedyConfig};

/// Training parameters with their fine-level snapshots.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    params: Vec<ParameterPoint>,
    snapshots: Vec<FemVector>,
}

impl TrainingSet {
    pub fn new(params: Vec<ParameterPoint>, snapshots: Vec<FemVector>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if params.len() != snapshots.len() {
            return Err(Error::DimensionMismatch { expected: params.len(), found: snapshots.len() });
        }
        Ok(Self { params, snapshots })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[ParameterPoint] {
        &self.params
    }

    pub fn snapshots(&self) -> &[FemVector] {
        &self.snapshots
    }
}

/// Half-open membership: `lower <= y < upper`, closed where `upper` is the root bound.
pub fn cell_contains(bounds: &ParameterBox, root: &ParameterBox, y: &[f64]) -> bool {
    y.iter().enumerate().all(|(i, &v)| {
        let (lo, hi) = (bounds.lower()[i], bounds.upper()[i]);
        v >= lo && (v < hi || (v == hi && hi == root.upper()[i]))
    })
}

/// One cell of the partition with its local reduced space.
#[derive(Debug, Clone)]
pub struct ParameterCell {
    bounds: ParameterBox,
    members: Vec<usize>,
    space: AffineReducedSpace,
    frozen: bool,
}

impl ParameterCell {
    pub fn from_parts(bounds: ParameterBox, members: Vec<usize>, space: AffineReducedSpace) -> Self {
        Self { bounds, members, space, frozen: false }
    }

    pub fn bounds(&self) -> &ParameterBox {
        &self.bounds
    }

    /// Indices of the training samples inside the cell.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn space(&self) -> &AffineReducedSpace {
        &self.space
    }

    /// `mu_k * eps_est,k`; infinite when the space is unstable or `mu` unknown.
    pub fn sigma_est(&self) -> f64 {
        self.space.sigma_est().unwrap_or(f64::INFINITY)
    }

    /// Whether splitting this cell has been ruled out.
    pub fn is_frozen(&self) -> bool {
        self.frozen
    }
}

/// Record of one accepted split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRecord {
    /// Index of the cell that was split; its lower child keeps the index, the
    /// upper child is appended.
    pub cell: usize,
    pub direction: usize,
    pub children_sigma: (f64, f64),
    /// `max_k sigma_est` after the split.
    pub max_sigma_after: f64,
}

/// When to stop splitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitStop {
    Splits(usize),
    SigmaTarget(f64),
}

/// A partition of the parameter box with one reduced space per cell.
#[derive(Debug, Clone)]
pub struct AdmissibleFamily {
    root: ParameterBox,
    cells: Vec<ParameterCell>,
    history: Vec<SplitRecord>,
    initial_sigma: f64,
}

/// Shared inputs for building cell spaces.
#[derive(Clone, Copy)]
pub struct FamilyContext<'a> {
    pub space: &'a LevelSpace,
    pub training: &'a TrainingSet,
    pub ms: &'a MeasurementSpace,
    pub rb: GreedyConfig,
}

impl FamilyContext<'_> {
    fn members_in(&self, bounds: &ParameterBox, root: &ParameterBox, candidates: &[usize]) -> Vec<usize> {
        candidates
            .iter()
            .copied()
            .filter(|&i| cell_contains(bounds, root, self.training.params()[i].coords()))
            .collect()
    }

    /// Greedy space over `members` with the member mean as offset.
    fn cell_space(&self, members: &[usize]) -> Result<AffineReducedSpace> {
        let snaps: Vec<&FemVector> = members.iter().map(|&i| &self.training.snapshots()[i]).collect();
        let offset = mean(&snaps)?;
        let mut space = greedy_build(self.space, &snaps, offset, &self.rb)?;
        space.attach_measurements(self.ms)?;
        // report picks as global training indices
        space.remap_picked(|p| members[p]);
        Ok(space)
    }

    fn cell(&self, bounds: ParameterBox, members: Vec<usize>) -> Result<ParameterCell> {
        let space = self.cell_space(&members)?;
        Ok(ParameterCell { bounds, members, space, frozen: false })
    }
}

impl AdmissibleFamily {
    /// A single cell covering the whole box.
    pub fn single(ctx: &FamilyContext<'_>, root: ParameterBox) -> Result<Self> {
        if ctx.training.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let all: Vec<usize> = (0..ctx.training.len()).collect();
        let members = ctx.members_in(&root, &root, &all);
        if members.len() != all.len() {
            return Err(Error::InvalidArgument("training parameters outside the root box".into()));
        }
        let cell = ctx.cell(root.clone(), members)?;
        let initial_sigma = cell.sigma_est();
        Ok(Self { root, cells: vec![cell], history: Vec::new(), initial_sigma })
    }

    /// Reassembles a stored family.
    pub fn from_parts(root: ParameterBox, cells: Vec<ParameterCell>, history: Vec<SplitRecord>, initial_sigma: f64) -> Self {
        Self { root, cells, history, initial_sigma }
    }

    pub fn root(&self) -> &ParameterBox {
        &self.root
    }

    pub fn cells(&self) -> &[ParameterCell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn history(&self) -> &[SplitRecord] {
        &self.history
    }

    pub fn initial_sigma(&self) -> f64 {
        self.initial_sigma
    }

    /// `max_k sigma_est` after `0, 1, ..` splits.
    pub fn sigma_history(&self) -> Vec<f64> {
        std::iter::once(self.initial_sigma).chain(self.history.iter().map(|r| r.max_sigma_after)).collect()
    }

    pub fn max_sigma(&self) -> f64 {
        self.cells.iter().map(|c| c.sigma_est()).fold(0.0, f64::max)
    }

    /// Index of the cell containing `y`, `None` outside the root box.
    pub fn locate(&self, y: &ParameterPoint) -> Option<usize> {
        self.cells.iter().position(|c| cell_contains(&c.bounds, &self.root, y.coords()))
    }

    /// Splits the worst splittable cell along its best coordinate direction.
    pub fn split_step(&mut self, ctx: &FamilyContext<'_>) -> Result<()> {
        let mut order: Vec<usize> = (0..self.cells.len()).filter(|&k| !self.cells[k].frozen).collect();
        order.sort_by(|&a, &b| self.cells[b].sigma_est().total_cmp(&self.cells[a].sigma_est()).then(a.cmp(&b)));
        for k in order {
            let parent = &self.cells[k];
            if parent.members.len() < 2 {
                self.cells[k].frozen = true;
                continue;
            }
            let trials: Vec<Option<(ParameterCell, ParameterCell)>> = (0..self.root.dim())
                .into_par_iter()
                .map(|i| {
                    let (lo, hi) = parent.bounds.halve(i);
                    let lo_members = ctx.members_in(&lo, &self.root, &parent.members);
                    let hi_members = ctx.members_in(&hi, &self.root, &parent.members);
                    if lo_members.is_empty() || hi_members.is_empty() {
                        return Ok(None);
                    }
                    Ok(Some((ctx.cell(lo, lo_members)?, ctx.cell(hi, hi_members)?)))
                })
                .collect::<Result<_>>()?;
            let best = trials
                .into_iter()
                .enumerate()
                .filter_map(|(i, t)| t.map(|(a, b)| (i, a.sigma_est().max(b.sigma_est()), a, b)))
                .reduce(|best, next| if next.1 < best.1 { next } else { best });
            let Some((direction, _, lower, upper)) = best else {
                self.cells[k].frozen = true;
                continue;
            };
            let children_sigma = (lower.sigma_est(), upper.sigma_est());
            self.cells[k] = lower;
            self.cells.push(upper);
            let max_sigma_after = self.max_sigma();
            self.history.push(SplitRecord { cell: k, direction, children_sigma, max_sigma_after });
            return Ok(());
        }
        Err(Error::UnsplittableCell)
    }

    /// Repeats [`split_step`](Self::split_step) until the stop rule holds.
    pub fn build(ctx: &FamilyContext<'_>, root: ParameterBox, stop: SplitStop) -> Result<Self> {
        let mut family = Self::single(ctx, root)?;
        loop {
            let done = match stop {
                SplitStop::Splits(n) => family.history.len() >= n,
                SplitStop::SigmaTarget(target) => family.max_sigma() <= target,
            };
            if done {
                return Ok(family);
            }
            family.split_step(ctx)?;
        }
    }
}
