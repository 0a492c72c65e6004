//! Per-case evaluation, dilation sweeps, aggregation and the two-task ranking.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::report::{delta_label, CurvePoint, ReportRecord};
use crate::metrics::{ClDiceMode, GeometricConfig, MaskPair, NsdConfig};
use crate::volume::{ensure_same_grid, BinaryMask, LabelVolume, VesselClass};

/// Dilation radii of the published sweep.
pub const DEFAULT_DELTAS: [f64; 5] = [1.0, 3.0, 5.0, 7.0, 10.0];

/// Metric names used in reports, aggregates and score files.
pub mod names {
    pub const CLDICE: &str = "clDice";
    pub const T_PREC: &str = "T_prec";
    pub const T_SENS: &str = "T_sens";
    pub const DSC: &str = "DSC";
    pub const IOU: &str = "IoU";
    pub const NSD: &str = "NSD";
    pub const AREA: &str = "Area";
    pub const LENGTH: &str = "Length";
    /// The three metrics averaged into a ranking score.
    pub const RANKED: [&str; 3] = [CLDICE, IOU, NSD];
}

/// Scores used when one or both masks are empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmptyPolicy {
    pub both_empty: f64,
    pub one_empty: f64,
}

impl Default for EmptyPolicy {
    fn default() -> Self {
        EmptyPolicy {
            both_empty: crate::metrics::BOTH_EMPTY,
            one_empty: crate::metrics::ONE_EMPTY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub nsd: NsdConfig,
    pub geometric: GeometricConfig,
    /// Strictly increasing, non-negative dilation radii.
    pub deltas: Vec<f64>,
    pub cldice_mode: ClDiceMode,
    pub empty: EmptyPolicy,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            nsd: NsdConfig::default(),
            geometric: GeometricConfig::default(),
            deltas: DEFAULT_DELTAS.to_vec(),
            cldice_mode: ClDiceMode::default(),
            empty: EmptyPolicy::default(),
        }
    }
}

impl EvalConfig {
    pub fn with_deltas(mut self, deltas: Vec<f64>) -> Result<Self> {
        validate_deltas(&deltas)?;
        self.deltas = deltas;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        NsdConfig::new(self.nsd.tau)?;
        GeometricConfig::new(
            self.geometric.alpha,
            self.geometric.beta,
            self.geometric.metric,
        )?;
        validate_deltas(&self.deltas)
    }
}

pub fn validate_deltas(deltas: &[f64]) -> Result<()> {
    if let Some(d) = deltas.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::BadDeltas(format!(
            "{d} is not a finite non-negative radius"
        )));
    }
    if deltas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadDeltas(format!(
            "{deltas:?} is not strictly increasing"
        )));
    }
    Ok(())
}

/// Every metric of one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub case_id: String,
    pub cldice: f64,
    pub t_prec: f64,
    pub t_sens: f64,
    pub dsc: f64,
    pub iou: f64,
    pub nsd: f64,
    /// Area at the configured `alpha`.
    pub area: f64,
    /// Length at the configured `beta`.
    pub length: f64,
    /// `(delta, Area)` for every configured delta.
    pub area_curve: Vec<(f64, f64)>,
    /// `(delta, Length)` for every configured delta.
    pub length_curve: Vec<(f64, f64)>,
}

impl MetricReport {
    /// Report with every value set to `v`.
    pub fn uniform(case_id: &str, v: f64, deltas: &[f64]) -> Self {
        MetricReport {
            case_id: case_id.to_string(),
            cldice: v,
            t_prec: v,
            t_sens: v,
            dsc: v,
            iou: v,
            nsd: v,
            area: v,
            length: v,
            area_curve: deltas.iter().map(|&d| (d, v)).collect(),
            length_curve: deltas.iter().map(|&d| (d, v)).collect(),
        }
    }

    /// Stand-in for a case a team did not submit: zero on every metric.
    pub fn missing(case_id: &str, cfg: &EvalConfig) -> Self {
        Self::uniform(case_id, 0.0, &cfg.deltas)
    }

    /// `(name, value)` for every scalar and every curve point.
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            (names::CLDICE.to_string(), self.cldice),
            (names::T_PREC.to_string(), self.t_prec),
            (names::T_SENS.to_string(), self.t_sens),
            (names::DSC.to_string(), self.dsc),
            (names::IOU.to_string(), self.iou),
            (names::NSD.to_string(), self.nsd),
            (names::AREA.to_string(), self.area),
            (names::LENGTH.to_string(), self.length),
        ];
        for &(d, v) in &self.area_curve {
            out.push((format!("Area_d{}", delta_label(d)), v));
        }
        for &(d, v) in &self.length_curve {
            out.push((format!("Length_d{}", delta_label(d)), v));
        }
        out
    }

    pub fn to_record(&self) -> ReportRecord {
        let curve = |c: &[(f64, f64)]| {
            c.iter()
                .map(|&(delta, v)| CurvePoint {
                    delta,
                    value: v.is_finite().then_some(v),
                })
                .collect()
        };
        let metrics = [
            (names::CLDICE, self.cldice),
            (names::T_PREC, self.t_prec),
            (names::T_SENS, self.t_sens),
            (names::DSC, self.dsc),
            (names::IOU, self.iou),
            (names::NSD, self.nsd),
            (names::AREA, self.area),
            (names::LENGTH, self.length),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.is_finite().then_some(v)))
        .collect();
        ReportRecord {
            case_id: self.case_id.clone(),
            metrics,
            area_curve: curve(&self.area_curve),
            length_curve: curve(&self.length_curve),
        }
    }
}

fn check_monotone(curve: &[(f64, f64)]) {
    assert!(
        curve.windows(2).all(|w| w[0].1 <= w[1].1),
        "dilation curve must be nondecreasing: {curve:?}"
    );
}

type Curve = Vec<(f64, f64)>;

fn sweep_pair(pair: &MaskPair<'_>, cfg: &EvalConfig) -> Result<(Curve, Curve)> {
    let metric = cfg.geometric.metric;
    let mut area = Vec::with_capacity(cfg.deltas.len());
    let mut length = Vec::with_capacity(cfg.deltas.len());
    for &d in &cfg.deltas {
        area.push((d, pair.area(d, metric)?));
        length.push((d, pair.length(d, metric)?));
    }
    check_monotone(&area);
    check_monotone(&length);
    Ok((area, length))
}

/// Evaluates one binary prediction against its reference.
pub fn evaluate_case(
    case_id: &str,
    pred: &BinaryMask,
    reference: &BinaryMask,
    cfg: &EvalConfig,
) -> Result<MetricReport> {
    cfg.validate()?;
    let pair = MaskPair::new(pred, reference)?;
    match (pred.is_empty(), reference.is_empty()) {
        (true, true) => {
            return Ok(MetricReport::uniform(
                case_id,
                cfg.empty.both_empty,
                &cfg.deltas,
            ))
        }
        (true, false) | (false, true) => {
            return Ok(MetricReport::uniform(
                case_id,
                cfg.empty.one_empty,
                &cfg.deltas,
            ))
        }
        (false, false) => {}
    }
    let cl = pair.cldice(cfg.cldice_mode);
    let (area_curve, length_curve) = sweep_pair(&pair, cfg)?;
    Ok(MetricReport {
        case_id: case_id.to_string(),
        cldice: cl.cldice,
        t_prec: cl.t_prec,
        t_sens: cl.t_sens,
        dsc: pair.dsc(),
        iou: pair.iou(),
        nsd: pair.nsd(cfg.nsd),
        area: pair.area(cfg.geometric.alpha, cfg.geometric.metric)?,
        length: pair.length(cfg.geometric.beta, cfg.geometric.metric)?,
        area_curve,
        length_curve,
    })
}

/// One report per vessel class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassReport {
    pub case_id: String,
    pub hepatic: MetricReport,
    pub portal: MetricReport,
}

impl MulticlassReport {
    pub fn get(&self, class: VesselClass) -> &MetricReport {
        match class {
            VesselClass::Hepatic => &self.hepatic,
            VesselClass::Portal => &self.portal,
        }
    }

    /// Flattened records with case ids `<case>:hepatic` and `<case>:portal`.
    pub fn to_records(&self) -> Vec<ReportRecord> {
        VesselClass::ALL
            .iter()
            .map(|&c| {
                let mut r = self.get(c).to_record();
                r.case_id = format!("{}:{}", self.case_id, c.name());
                r
            })
            .collect()
    }
}

/// Evaluates each vessel class as an independent binary case.
pub fn evaluate_multiclass(
    case_id: &str,
    pred: &LabelVolume,
    reference: &LabelVolume,
    cfg: &EvalConfig,
) -> Result<MulticlassReport> {
    ensure_same_grid(pred, reference)?;
    let eval = |class: VesselClass| {
        evaluate_case(
            case_id,
            &pred.class_mask(class.label()),
            &reference.class_mask(class.label()),
            cfg,
        )
    };
    Ok(MulticlassReport {
        case_id: case_id.to_string(),
        hepatic: eval(VesselClass::Hepatic)?,
        portal: eval(VesselClass::Portal)?,
    })
}

/// One point of a dilation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub delta: f64,
    pub area: f64,
    pub length: f64,
}

/// Area and Length at every configured delta, nondecreasing in delta.
pub fn dilation_sweep(
    pred: &BinaryMask,
    reference: &BinaryMask,
    cfg: &EvalConfig,
) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    let pair = MaskPair::new(pred, reference)?;
    let (area, length) = if pair.empty_score().is_some() {
        let v = if pred.is_empty() && reference.is_empty() {
            cfg.empty.both_empty
        } else {
            cfg.empty.one_empty
        };
        let c: Vec<_> = cfg.deltas.iter().map(|&d| (d, v)).collect();
        (c.clone(), c)
    } else {
        sweep_pair(&pair, cfg)?
    };
    Ok(area
        .into_iter()
        .zip(length)
        .map(|((delta, a), (_, l))| SweepPoint {
            delta,
            area: a,
            length: l,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    #[serde(default)]
    pub std: f64,
}

/// Normalisation of the standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Deviation {
    /// Divide by n.
    #[default]
    Population,
    /// Divide by n - 1 (0 when n = 1).
    Sample,
}

/// Per-metric mean and standard deviation over a team's cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    #[serde(default)]
    pub cases: usize,
    pub metrics: BTreeMap<String, MeanStd>,
}

impl Aggregate {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).map(|m| m.mean)
    }
}

/// Population-std aggregate of `reports`.
pub fn aggregate(reports: &[MetricReport]) -> Result<Aggregate> {
    aggregate_with(reports, Deviation::Population)
}

pub fn aggregate_with(reports: &[MetricReport], deviation: Deviation) -> Result<Aggregate> {
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in reports {
        for (name, v) in r.named_values() {
            columns.entry(name).or_default().push(v);
        }
    }
    let metrics = columns
        .into_iter()
        .map(|(name, values)| (name, mean_std(&values, deviation)))
        .collect();
    Ok(Aggregate {
        cases: reports.len(),
        metrics,
    })
}

fn mean_std(values: &[f64], deviation: Deviation) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let denom = match deviation {
        Deviation::Population => n,
        Deviation::Sample => n - 1.0,
    };
    let std = if denom > 0.0 {
        (ss / denom).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std }
}

/// Hepatic and portal aggregates of one team.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAggregates {
    pub hepatic: Aggregate,
    pub portal: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TeamScores {
    Binary(Aggregate),
    PerClass(ClassAggregates),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub team: String,
    pub score: f64,
    pub aggregates: TeamScores,
}

/// Teams sorted by score (descending), ties alphabetical by team id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub task: u8,
    pub entries: Vec<LeaderboardEntry>,
}

impl Leaderboard {
    fn build(task: u8, mut scored: Vec<(String, f64, TeamScores)>) -> Self {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let entries = scored
            .into_iter()
            .enumerate()
            .map(|(i, (team, score, aggregates))| LeaderboardEntry {
                rank: i + 1,
                team,
                score,
                aggregates,
            })
            .collect();
        Leaderboard { task, entries }
    }

    pub fn teams(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.team.as_str()).collect()
    }

    pub fn score(&self, team: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.team == team)
            .map(|e| e.score)
    }
}

fn ranked_means(team: &str, agg: &Aggregate) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (slot, name) in out.iter_mut().zip(names::RANKED) {
        *slot = agg.mean(name).ok_or_else(|| Error::MissingMetric {
            team: team.to_string(),
            metric: name.to_string(),
        })?;
    }
    Ok(out)
}

/// Task 1: mean of the clDice, IoU and NSD means.
pub fn rank_task1(teams: &BTreeMap<String, Aggregate>) -> Result<Leaderboard> {
    let scored = teams
        .iter()
        .map(|(team, agg)| {
            let m = ranked_means(team, agg)?;
            Ok((
                team.clone(),
                m.iter().sum::<f64>() / 3.0,
                TeamScores::Binary(agg.clone()),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Leaderboard::build(1, scored))
}

/// Task 2: mean of the six class-wise clDice, IoU and NSD means.
pub fn rank_task2(teams: &BTreeMap<String, ClassAggregates>) -> Result<Leaderboard> {
    let scored = teams
        .iter()
        .map(|(team, agg)| {
            let h = ranked_means(&format!("{team}/hepatic"), &agg.hepatic)?;
            let p = ranked_means(&format!("{team}/portal"), &agg.portal)?;
            let score = (h.iter().sum::<f64>() + p.iter().sum::<f64>()) / 6.0;
            Ok((team.clone(), score, TeamScores::PerClass(agg.clone())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Leaderboard::build(2, scored))
}
