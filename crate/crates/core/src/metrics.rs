//! Overlap, topology, surface and dilation-tolerant metrics over mask pairs.
//!
//! Empty masks: when both masks are empty every metric is 1, when exactly one
//! is empty every metric is 0.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphology::{boundary, squared_edt, DistanceField, DistanceMetric};
use crate::skeleton::{skeletonize, Skeleton};
use crate::volume::{ensure_same_grid, BinaryMask};

/// Score when both masks are empty.
pub const BOTH_EMPTY: f64 = 1.0;
/// Score when exactly one mask is empty.
pub const ONE_EMPTY: f64 = 0.0;

/// Topology precision, topology sensitivity and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClDiceBreakdown {
    pub t_prec: f64,
    pub t_sens: f64,
    pub cldice: f64,
}

impl ClDiceBreakdown {
    pub fn from_parts(t_prec: f64, t_sens: f64) -> Self {
        let sum = t_prec + t_sens;
        let cldice = if sum > 0.0 {
            2.0 * t_prec * t_sens / sum
        } else {
            0.0
        };
        ClDiceBreakdown {
            t_prec,
            t_sens,
            cldice,
        }
    }

    fn constant(v: f64) -> Self {
        ClDiceBreakdown {
            t_prec: v,
            t_sens: v,
            cldice: v,
        }
    }
}

/// What each skeleton is intersected with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClDiceMode {
    /// Skeleton of one mask against the full other mask (canonical clDice).
    #[default]
    SkeletonVsMask,
    /// Skeleton against skeleton, for sensitivity analysis.
    SkeletonVsSkeleton,
}

/// Surface tolerance for NSD, in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsdConfig {
    pub tau: f64,
}

impl NsdConfig {
    pub const DEFAULT_TAU: f64 = 2.0;

    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau > 0.0 {
            Ok(NsdConfig { tau })
        } else {
            Err(Error::BadTolerance(tau))
        }
    }
}

impl Default for NsdConfig {
    fn default() -> Self {
        NsdConfig {
            tau: Self::DEFAULT_TAU,
        }
    }
}

/// Dilation radii for the Area (`alpha`) and Length (`beta`) measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Units of the radii; voxels by default.
    #[serde(default)]
    pub metric: DistanceMetric,
}

impl GeometricConfig {
    pub fn new(alpha: f64, beta: f64, metric: DistanceMetric) -> Result<Self> {
        for r in [alpha, beta] {
            if r.is_nan() || r < 0.0 {
                return Err(Error::NegativeRadius(r));
            }
        }
        Ok(GeometricConfig {
            alpha,
            beta,
            metric,
        })
    }
}

impl Default for GeometricConfig {
    fn default() -> Self {
        GeometricConfig {
            alpha: 5.0,
            beta: 5.0,
            metric: DistanceMetric::VoxelIsotropic,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    num as f64 / den as f64
}

fn check_radius(r: f64) -> Result<()> {
    if r >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeRadius(r))
    }
}

/// A validated prediction/reference pair with lazily computed, shared
/// derived data (skeletons, distance fields, boundaries).
///
/// Every derived field is computed at most once, so several metrics over the
/// same pair, or one metric at many radii, pay for each EDT and skeleton once.
pub struct MaskPair<'a> {
    pred: &'a BinaryMask,
    reference: &'a BinaryMask,
    pred_count: usize,
    ref_count: usize,
    skel_pred: OnceLock<Skeleton>,
    skel_ref: OnceLock<Skeleton>,
    edt_pred: [OnceLock<DistanceField>; 2],
    edt_ref: [OnceLock<DistanceField>; 2],
    surfaces: OnceLock<Surfaces>,
}

struct Surfaces {
    pred: BinaryMask,
    reference: BinaryMask,
    edt_pred: DistanceField,
    edt_ref: DistanceField,
}

fn metric_slot(metric: DistanceMetric) -> usize {
    match metric {
        DistanceMetric::VoxelIsotropic => 0,
        DistanceMetric::Physical => 1,
    }
}

impl<'a> MaskPair<'a> {
    pub fn new(pred: &'a BinaryMask, reference: &'a BinaryMask) -> Result<Self> {
        ensure_same_grid(pred, reference)?;
        Ok(MaskPair {
            pred,
            reference,
            pred_count: pred.count(),
            ref_count: reference.count(),
            skel_pred: OnceLock::new(),
            skel_ref: OnceLock::new(),
            edt_pred: Default::default(),
            edt_ref: Default::default(),
            surfaces: OnceLock::new(),
        })
    }

    /// Supplies precomputed skeletons (e.g. shared with other callers).
    pub fn with_skeletons(self, pred: Skeleton, reference: Skeleton) -> Self {
        let _ = self.skel_pred.set(pred);
        let _ = self.skel_ref.set(reference);
        self
    }

    pub fn pred(&self) -> &BinaryMask {
        self.pred
    }

    pub fn reference(&self) -> &BinaryMask {
        self.reference
    }

    /// `Some(score)` when the empty-mask convention decides the result.
    pub fn empty_score(&self) -> Option<f64> {
        match (self.pred_count == 0, self.ref_count == 0) {
            (true, true) => Some(BOTH_EMPTY),
            (true, false) | (false, true) => Some(ONE_EMPTY),
            (false, false) => None,
        }
    }

    pub fn pred_skeleton(&self) -> &Skeleton {
        self.skel_pred.get_or_init(|| skeletonize(self.pred))
    }

    pub fn ref_skeleton(&self) -> &Skeleton {
        self.skel_ref.get_or_init(|| skeletonize(self.reference))
    }

    fn pred_edt(&self, metric: DistanceMetric) -> &DistanceField {
        self.edt_pred[metric_slot(metric)].get_or_init(|| squared_edt(self.pred, metric))
    }

    fn ref_edt(&self, metric: DistanceMetric) -> &DistanceField {
        self.edt_ref[metric_slot(metric)].get_or_init(|| squared_edt(self.reference, metric))
    }

    fn surfaces(&self) -> &Surfaces {
        self.surfaces.get_or_init(|| {
            let pred = boundary(self.pred);
            let reference = boundary(self.reference);
            let edt_pred = squared_edt(&pred, DistanceMetric::Physical);
            let edt_ref = squared_edt(&reference, DistanceMetric::Physical);
            Surfaces {
                pred,
                reference,
                edt_pred,
                edt_ref,
            }
        })
    }

    fn intersection(&self) -> usize {
        self.pred
            .voxels()
            .iter()
            .zip(self.reference.voxels())
            .filter(|(&a, &b)| a && b)
            .count()
    }

    pub fn iou(&self) -> f64 {
        if let Some(s) = self.empty_score() {
            return s;
        }
        let inter = self.intersection();
        ratio(inter, self.pred_count + self.ref_count - inter)
    }

    pub fn dsc(&self) -> f64 {
        if let Some(s) = self.empty_score() {
            return s;
        }
        ratio(2 * self.intersection(), self.pred_count + self.ref_count)
    }

    pub fn cldice(&self, mode: ClDiceMode) -> ClDiceBreakdown {
        if let Some(s) = self.empty_score() {
            return ClDiceBreakdown::constant(s);
        }
        let sp = &self.pred_skeleton().mask;
        let sr = &self.ref_skeleton().mask;
        let (pred_target, ref_target) = match mode {
            ClDiceMode::SkeletonVsMask => (self.reference, self.pred),
            ClDiceMode::SkeletonVsSkeleton => (sr, sp),
        };
        // Skeletons of non-empty masks are non-empty, and share the grid.
        let t_prec = ratio(sp.intersection_count(pred_target).unwrap(), sp.count());
        let t_sens = ratio(sr.intersection_count(ref_target).unwrap(), sr.count());
        ClDiceBreakdown::from_parts(t_prec, t_sens)
    }

    pub fn nsd(&self, cfg: NsdConfig) -> f64 {
        if let Some(s) = self.empty_score() {
            return s;
        }
        let s = self.surfaces();
        let t2 = cfg.tau * cfg.tau;
        let close = |surface: &BinaryMask, field: &DistanceField| {
            surface
                .voxels()
                .iter()
                .zip(field.values())
                .filter(|(&on, &d)| on && d <= t2)
                .count()
        };
        let num = close(&s.reference, &s.edt_pred) + close(&s.pred, &s.edt_ref);
        ratio(num, s.pred.count() + s.reference.count())
    }

    pub fn area(&self, alpha: f64, metric: DistanceMetric) -> Result<f64> {
        check_radius(alpha)?;
        if let Some(s) = self.empty_score() {
            return Ok(s);
        }
        let a2 = alpha * alpha;
        let dp = self.pred_edt(metric).values();
        let dr = self.ref_edt(metric).values();
        let (mut num, mut den) = (0usize, 0usize);
        for i in 0..dp.len() {
            let p = self.pred.voxels()[i];
            let r = self.reference.voxels()[i];
            if p || r {
                den += 1;
                if (r && dp[i] <= a2) || (p && dr[i] <= a2) {
                    num += 1;
                }
            }
        }
        Ok(ratio(num, den))
    }

    pub fn length(&self, beta: f64, metric: DistanceMetric) -> Result<f64> {
        check_radius(beta)?;
        if let Some(s) = self.empty_score() {
            return Ok(s);
        }
        let b2 = beta * beta;
        let sp = self.pred_skeleton().mask.voxels();
        let sr = self.ref_skeleton().mask.voxels();
        let dp = self.pred_edt(metric).values();
        let dr = self.ref_edt(metric).values();
        let (mut num, mut den) = (0usize, 0usize);
        for i in 0..sp.len() {
            if sp[i] || sr[i] {
                den += 1;
                if (sp[i] && dr[i] <= b2) || (sr[i] && dp[i] <= b2) {
                    num += 1;
                }
            }
        }
        Ok(ratio(num, den))
    }
}

/// Intersection over union, `|a ∩ b| / |a ∪ b|`.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    Ok(MaskPair::new(a, b)?.iou())
}

/// Dice similarity coefficient, `2|a ∩ b| / (|a| + |b|)`.
pub fn dsc(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    Ok(MaskPair::new(a, b)?.dsc())
}

/// Centreline Dice with the canonical skeleton-vs-mask intersections.
pub fn cldice(pred: &BinaryMask, reference: &BinaryMask) -> Result<ClDiceBreakdown> {
    cldice_with_mode(pred, reference, ClDiceMode::default())
}

pub fn cldice_with_mode(
    pred: &BinaryMask,
    reference: &BinaryMask,
    mode: ClDiceMode,
) -> Result<ClDiceBreakdown> {
    Ok(MaskPair::new(pred, reference)?.cldice(mode))
}

/// Normalized surface distance: the fraction of boundary voxels of either
/// mask lying within `tau` millimetres of the other mask's boundary.
pub fn nsd(a: &BinaryMask, b: &BinaryMask, cfg: NsdConfig) -> Result<f64> {
    Ok(MaskPair::new(a, b)?.nsd(cfg))
}

/// `#((δα(pred) ∩ ref) ∪ (pred ∩ δα(ref))) / #(pred ∪ ref)` with a voxel-unit ball.
pub fn area_measure(pred: &BinaryMask, reference: &BinaryMask, alpha: f64) -> Result<f64> {
    area_measure_with(pred, reference, alpha, DistanceMetric::VoxelIsotropic)
}

pub fn area_measure_with(
    pred: &BinaryMask,
    reference: &BinaryMask,
    alpha: f64,
    metric: DistanceMetric,
) -> Result<f64> {
    MaskPair::new(pred, reference)?.area(alpha, metric)
}

/// `#((σ(pred) ∩ δβ(ref)) ∪ (δβ(pred) ∩ σ(ref))) / #(σ(pred) ∪ σ(ref))` with a
/// voxel-unit ball.
pub fn length_measure(pred: &BinaryMask, reference: &BinaryMask, beta: f64) -> Result<f64> {
    length_measure_with(pred, reference, beta, DistanceMetric::VoxelIsotropic)
}

pub fn length_measure_with(
    pred: &BinaryMask,
    reference: &BinaryMask,
    beta: f64,
    metric: DistanceMetric,
) -> Result<f64> {
    MaskPair::new(pred, reference)?.length(beta, metric)
}
