use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ArgMatches;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use vessel_metrics::challenge::{
    aggregate_with, dilation_sweep, evaluate_case, evaluate_multiclass, rank_task1, rank_task2,
    Aggregate, ClassAggregates, Deviation, EvalConfig, Leaderboard, MeanStd, MetricReport,
    MulticlassReport, TeamScores,
};
use vessel_metrics::io::report::round6;
use vessel_metrics::io::{
    load_volume, read_nifti_with, save_volume, write_report, ReadOptions, ReportFormat,
    VolumeFormat,
};
use vessel_metrics::metrics::{ClDiceMode, GeometricConfig, NsdConfig};
use vessel_metrics::phantom::{degrade, gen_capsule, gen_tree, DegradeOp, Polyline, TreeSpec};
use vessel_metrics::postprocess::{apply_liver_mask, keep_largest_per_class, resample_nearest};
use vessel_metrics::{Connectivity, Dims, DistanceMetric, Error, LabelVolume, Spacing};

use crate::{
    CldiceArg, CliError, DistanceArg, EvaluateArgs, InfoArgs, MetricArgs, OutputArgs, PhantomArgs,
    PhantomKind, PostprocessArgs, RankArgs, SweepArgs,
};

type CliResult<T = ()> = Result<T, CliError>;

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn distance(d: DistanceArg) -> DistanceMetric {
    match d {
        DistanceArg::Voxel => DistanceMetric::VoxelIsotropic,
        DistanceArg::Physical => DistanceMetric::Physical,
    }
}

/// Flag values are validated up front so bad numbers count as usage errors.
fn eval_config(m: &MetricArgs) -> CliResult<EvalConfig> {
    let cldice_mode = match m.cldice_mode {
        CldiceArg::SkeletonMask => ClDiceMode::SkeletonVsMask,
        CldiceArg::SkeletonSkeleton => ClDiceMode::SkeletonVsSkeleton,
    };
    let cfg = EvalConfig {
        nsd: NsdConfig::new(m.tau).map_err(usage)?,
        geometric: GeometricConfig::new(m.alpha, m.beta, distance(m.distance)).map_err(usage)?,
        cldice_mode,
        ..EvalConfig::default()
    };
    cfg.with_deltas(m.deltas.clone()).map_err(usage)
}

fn emit(out: &OutputArgs, bytes: &[u8]) -> CliResult {
    match &out.out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).map_err(Error::from)?;
            stdout.flush().map_err(Error::from)?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("plain data serialises");
    bytes.push(b'\n');
    bytes
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> CliResult {
    std::fs::write(path, to_json(value))
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())).into())
}

/// File name without its volume extension; `None` for non-volume files and raw sidecars.
fn case_id_of(path: &Path) -> Option<String> {
    let name = path.file_name()?.to_str()?;
    [".nii.gz", ".nii", ".raw"]
        .iter()
        .find_map(|ext| name.strip_suffix(ext))
        .map(str::to_string)
}

fn list_cases(dir: &Path) -> CliResult<BTreeMap<String, PathBuf>> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut cases = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(Error::from)?.path();
        if !path.is_file() {
            continue;
        }
        if let Some(id) = case_id_of(&path) {
            if let Some(previous) = cases.insert(id.clone(), path.clone()) {
                return Err(Error::Io(format!(
                    "case {id} appears twice: {} and {}",
                    previous.display(),
                    path.display()
                ))
                .into());
            }
        }
    }
    Ok(cases)
}

struct Case {
    id: String,
    pred: Option<PathBuf>,
    reference: PathBuf,
}

fn collect_cases(a: &EvaluateArgs) -> CliResult<Vec<Case>> {
    if let (Some(pred), Some(reference)) = (&a.pred, &a.reference) {
        let id = a
            .case_id
            .clone()
            .or_else(|| case_id_of(reference))
            .unwrap_or_else(|| reference.display().to_string());
        return Ok(vec![Case {
            id,
            pred: Some(pred.clone()),
            reference: reference.clone(),
        }]);
    }
    let (pred_dir, ref_dir) = (a.pred_dir.as_ref().unwrap(), a.ref_dir.as_ref().unwrap());
    let refs = list_cases(ref_dir)?;
    let mut preds = list_cases(pred_dir)?;
    if refs.is_empty() {
        return Err(Error::Io(format!("{}: no reference volumes", ref_dir.display())).into());
    }
    let cases = refs
        .into_iter()
        .map(|(id, reference)| {
            let pred = preds.remove(&id);
            if pred.is_none() {
                eprintln!("vessel-metrics: warning: no prediction for case {id}; scored 0");
            }
            Case {
                id,
                pred,
                reference,
            }
        })
        .collect();
    for id in preds.keys() {
        eprintln!("vessel-metrics: warning: prediction {id} has no reference; ignored");
    }
    Ok(cases)
}

fn thread_pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let jobs = match jobs {
        Some(0) => return Err(usage("--jobs must be at least 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| usage(format!("cannot start {jobs} workers: {e}")))
}

fn binary_case(c: &Case, cfg: &EvalConfig, opts: &ReadOptions) -> Result<MetricReport, Error> {
    let reference = load_volume(&c.reference, opts)?.foreground();
    match &c.pred {
        Some(p) => evaluate_case(&c.id, &load_volume(p, opts)?.foreground(), &reference, cfg),
        None => Ok(MetricReport::missing(&c.id, cfg)),
    }
}

fn multiclass_case(
    c: &Case,
    cfg: &EvalConfig,
    opts: &ReadOptions,
) -> Result<MulticlassReport, Error> {
    let reference = load_volume(&c.reference, opts)?;
    match &c.pred {
        Some(p) => evaluate_multiclass(&c.id, &load_volume(p, opts)?, &reference, cfg),
        None => Ok(MulticlassReport {
            case_id: c.id.clone(),
            hepatic: MetricReport::missing(&c.id, cfg),
            portal: MetricReport::missing(&c.id, cfg),
        }),
    }
}

fn report_format(out: &OutputArgs) -> ReportFormat {
    if out.csv {
        ReportFormat::Csv
    } else {
        ReportFormat::Json
    }
}

pub fn evaluate(a: &EvaluateArgs, multiclass: bool) -> CliResult {
    let cfg = eval_config(&a.metrics)?;
    let opts = a.read.options();
    let cases = collect_cases(a)?;
    let pool = thread_pool(a.jobs)?;
    let deviation = if a.sample_std {
        Deviation::Sample
    } else {
        Deviation::Population
    };

    let records = if multiclass {
        let reports: Vec<MulticlassReport> = pool.install(|| {
            cases
                .par_iter()
                .map(|c| multiclass_case(c, &cfg, &opts))
                .collect::<Result<_, _>>()
        })?;
        if let Some(path) = &a.summary {
            let pick = |f: fn(&MulticlassReport) -> &MetricReport| {
                reports.iter().map(f).cloned().collect::<Vec<_>>()
            };
            let summary = ClassAggregates {
                hepatic: aggregate_with(&pick(|r| &r.hepatic), deviation)?,
                portal: aggregate_with(&pick(|r| &r.portal), deviation)?,
            };
            write_json_file(path, &summary)?;
        }
        reports
            .iter()
            .flat_map(MulticlassReport::to_records)
            .collect::<Vec<_>>()
    } else {
        let reports: Vec<MetricReport> = pool.install(|| {
            cases
                .par_iter()
                .map(|c| binary_case(c, &cfg, &opts))
                .collect::<Result<_, _>>()
        })?;
        if let Some(path) = &a.summary {
            write_json_file(path, &aggregate_with(&reports, deviation)?)?;
        }
        reports.iter().map(MetricReport::to_record).collect()
    };
    emit(
        &a.output,
        &write_report(&records, report_format(&a.output))?,
    )
}

pub fn sweep(a: &SweepArgs) -> CliResult {
    let cfg = EvalConfig {
        geometric: GeometricConfig {
            metric: distance(a.distance),
            ..GeometricConfig::default()
        },
        ..EvalConfig::default()
    }
    .with_deltas(a.deltas.clone())
    .map_err(usage)?;
    let opts = a.read.options();
    let select = |v: LabelVolume| match a.class {
        Some(label) => v.class_mask(label),
        None => v.foreground(),
    };
    let pred = select(load_volume(&a.pred, &opts)?);
    let reference = select(load_volume(&a.reference, &opts)?);
    let points = dilation_sweep(&pred, &reference, &cfg)?;
    let bytes = if a.output.csv {
        let mut s = String::from("delta,area,length\n");
        for p in &points {
            s.push_str(&format!("{},{:.6},{:.6}\n", p.delta, p.area, p.length));
        }
        s.into_bytes()
    } else {
        let rounded: Vec<_> = points
            .iter()
            .map(|p| json!({"delta": p.delta, "area": round6(p.area), "length": round6(p.length)}))
            .collect();
        to_json(&rounded)
    };
    emit(&a.output, &bytes)
}

/// A metric given either as a bare mean or as `{mean, std}`.
#[derive(Deserialize)]
#[serde(untagged)]
enum MetricInput {
    Mean(f64),
    Full(MeanStd),
}

/// A team's aggregate, either in summary form or as a flat metric map.
#[derive(Deserialize)]
#[serde(untagged)]
enum TeamInput {
    Summary(Aggregate),
    Flat(BTreeMap<String, MetricInput>),
}

impl TeamInput {
    fn into_aggregate(self) -> Aggregate {
        match self {
            TeamInput::Summary(a) => a,
            TeamInput::Flat(m) => Aggregate {
                cases: 0,
                metrics: m
                    .into_iter()
                    .map(|(k, v)| {
                        let ms = match v {
                            MetricInput::Mean(mean) => MeanStd { mean, std: 0.0 },
                            MetricInput::Full(ms) => ms,
                        };
                        (k, ms)
                    })
                    .collect(),
            },
        }
    }
}

#[derive(Deserialize)]
struct ClassInput {
    hepatic: TeamInput,
    portal: TeamInput,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Error::SchemaError(format!("{}: {e}", path.display())).into())
}

fn team_files(a: &RankArgs) -> CliResult<Vec<(String, PathBuf)>> {
    a.team
        .iter()
        .map(|spec| match spec.split_once('=') {
            Some((name, path)) if !name.is_empty() && !path.is_empty() => {
                Ok((name.to_string(), PathBuf::from(path)))
            }
            _ => Err(usage(format!("--team expects NAME=PATH, got {spec:?}"))),
        })
        .collect()
}

fn leaderboard_csv(lb: &Leaderboard) -> Vec<u8> {
    let ranked = ["clDice", "IoU", "NSD"];
    let mut header = vec!["rank".to_string(), "team".into(), "score".into()];
    if lb.task == 1 {
        header.extend(ranked.iter().map(|m| m.to_string()));
    } else {
        for class in ["hepatic", "portal"] {
            header.extend(ranked.iter().map(|m| format!("{class}_{m}")));
        }
    }
    let mut s = header.join(",") + "\n";
    let cell =
        |agg: &Aggregate, m: &str| agg.mean(m).map(|v| format!("{v:.6}")).unwrap_or_default();
    for e in &lb.entries {
        let mut row = vec![
            e.rank.to_string(),
            e.team.clone(),
            format!("{:.6}", e.score),
        ];
        match &e.aggregates {
            TeamScores::Binary(agg) => row.extend(ranked.iter().map(|m| cell(agg, m))),
            TeamScores::PerClass(c) => {
                row.extend(ranked.iter().map(|m| cell(&c.hepatic, m)));
                row.extend(ranked.iter().map(|m| cell(&c.portal, m)));
            }
        }
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s.into_bytes()
}

pub fn rank(a: &RankArgs) -> CliResult {
    let files = team_files(a)?;
    let mut lb = if a.task == 1 {
        let mut teams: BTreeMap<String, Aggregate> = BTreeMap::new();
        if let Some(path) = &a.scores {
            let parsed: BTreeMap<String, TeamInput> = read_json(path)?;
            teams.extend(parsed.into_iter().map(|(k, v)| (k, v.into_aggregate())));
        }
        for (name, path) in files {
            teams.insert(name, read_json::<TeamInput>(&path)?.into_aggregate());
        }
        rank_task1(&teams)?
    } else {
        let convert = |c: ClassInput| ClassAggregates {
            hepatic: c.hepatic.into_aggregate(),
            portal: c.portal.into_aggregate(),
        };
        let mut teams: BTreeMap<String, ClassAggregates> = BTreeMap::new();
        if let Some(path) = &a.scores {
            let parsed: BTreeMap<String, ClassInput> = read_json(path)?;
            teams.extend(parsed.into_iter().map(|(k, v)| (k, convert(v))));
        }
        for (name, path) in files {
            teams.insert(name, convert(read_json(&path)?));
        }
        rank_task2(&teams)?
    };
    if lb.entries.is_empty() {
        return Err(Error::EmptyInput.into());
    }
    for e in &mut lb.entries {
        e.score = round6(e.score);
    }
    let bytes = if a.output.csv {
        leaderboard_csv(&lb)
    } else {
        to_json(&lb)
    };
    emit(&a.output, &bytes)
}

enum Step {
    Liver(PathBuf),
    Largest,
    Resample(Spacing),
}

/// Steps ordered by their position on the command line.
fn ordered_steps(a: &PostprocessArgs, m: &ArgMatches) -> CliResult<Vec<Step>> {
    let indices = |id: &str| {
        m.indices_of(id)
            .map(|i| i.collect::<Vec<_>>())
            .unwrap_or_default()
    };
    let mut steps: Vec<(usize, Step)> = Vec::new();
    for (i, path) in indices("liver_mask").into_iter().zip(&a.liver_mask) {
        steps.push((i, Step::Liver(path.clone())));
    }
    for i in indices("largest_component") {
        steps.push((i, Step::Largest));
    }
    for (i, s) in indices("resample").into_iter().zip(&a.resample) {
        steps.push((
            i,
            Step::Resample(Spacing::new(s[0], s[1], s[2]).map_err(usage)?),
        ));
    }
    steps.sort_by_key(|(i, _)| *i);
    Ok(steps.into_iter().map(|(_, s)| s).collect())
}

pub fn postprocess(a: &PostprocessArgs, m: &ArgMatches) -> CliResult {
    let opts = a.read.options();
    let connectivity = a
        .connectivity
        .parse()
        .ok()
        .and_then(Connectivity::from_count)
        .ok_or_else(|| usage("connectivity must be 6 or 26"))?;
    let mut volume = load_volume(&a.input, &opts)?;
    for step in ordered_steps(a, m)? {
        volume = match step {
            Step::Liver(path) => {
                let liver = load_volume(&path, &opts)?.foreground();
                apply_liver_mask(&volume, &liver)?
            }
            Step::Largest => keep_largest_per_class(&volume, connectivity),
            Step::Resample(target) => resample_nearest(&volume, target)?,
        };
    }
    save_volume(&a.out, &volume)?;
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let stem = case_id_of(out).unwrap_or_else(|| {
        out.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "phantom".into())
    });
    out.with_file_name(format!("{stem}.centerline.json"))
}

pub fn phantom(a: &PhantomArgs) -> CliResult {
    let dims = Dims::new(a.dims[0], a.dims[1], a.dims[2]).map_err(usage)?;
    let spacing = Spacing::new(a.spacing[0], a.spacing[1], a.spacing[2]).map_err(usage)?;
    let ops: Vec<DegradeOp> = a
        .degrade
        .iter()
        .map(|s| s.parse::<DegradeOp>())
        .collect::<Result<_, _>>()
        .map_err(usage)?;
    VolumeFormat::from_path(&a.out).map_err(usage)?;

    let (mask, lines, params) = match a.kind {
        PhantomKind::Tree => {
            let spec = TreeSpec {
                seed: a.seed,
                depth: a.depth,
                branch_angle: a.branch_angle,
                root_radius: a.radius,
                decay: a.decay,
                segment_length: a.segment_length,
            };
            let (mask, lines) = gen_tree(&spec, dims, spacing)?;
            (
                mask,
                lines,
                serde_json::to_value(&spec).expect("spec serialises"),
            )
        }
        PhantomKind::Tube => {
            if dims.nz <= 2 * a.margin + 1 {
                return Err(usage(format!(
                    "--margin {} leaves no tube inside {} slices",
                    a.margin, dims.nz
                )));
            }
            let (cx, cy) = ((dims.nx / 2) as f64, (dims.ny / 2) as f64);
            let path = Polyline::new(vec![
                [cx, cy, a.margin as f64],
                [cx, cy, (dims.nz - 1 - a.margin) as f64],
            ])?;
            let mask = gen_capsule(&path, a.radius, dims, spacing)?;
            (
                mask,
                vec![path],
                json!({"radius": a.radius, "margin": a.margin}),
            )
        }
    };
    let mask = degrade(&mask, &ops)?;
    save_volume(&a.out, &mask)?;

    let kind = match a.kind {
        PhantomKind::Tree => "tree",
        PhantomKind::Tube => "tube",
    };
    let sidecar = json!({
        "kind": kind,
        "dims": dims.as_array(),
        "spacing_mm": spacing.as_array(),
        "params": params,
        "degrade": ops,
        "voxels": mask.count(),
        "centerlines": lines.iter().map(|l| l.points().to_vec()).collect::<Vec<_>>(),
    });
    write_json_file(&sidecar_path(&a.out), &sidecar)
}

pub fn convert(a: &crate::ConvertArgs) -> CliResult {
    let volume = load_volume(&a.input, &a.read.options())?;
    save_volume(&a.out, &volume)?;
    Ok(())
}

pub fn info(a: &InfoArgs) -> CliResult {
    let opts = a.read.options();
    let format = VolumeFormat::from_path(&a.input)?;
    let (volume, header) = match format {
        VolumeFormat::Nifti | VolumeFormat::NiftiGz => {
            let bytes = std::fs::read(&a.input)
                .map_err(|e| Error::Io(format!("{}: {e}", a.input.display())))?;
            let (v, h) = read_nifti_with(&bytes, &opts)?;
            let header = json!({
                "datatype": h.datatype,
                "bitpix": h.bitpix,
                "endianness": h.endianness,
                "vox_offset": h.vox_offset,
                "scl_slope": h.scl_slope,
                "scl_inter": h.scl_inter,
            });
            (v, Some(header))
        }
        VolumeFormat::Raw => (load_volume(&a.input, &opts)?, None),
    };
    let format_name = match format {
        VolumeFormat::Nifti => "nifti",
        VolumeFormat::NiftiGz => "nifti-gz",
        VolumeFormat::Raw => "raw",
    };
    let mut doc = json!({
        "path": a.input.display().to_string(),
        "format": format_name,
        "dims": volume.dims().as_array(),
        "spacing_mm": volume.spacing().as_array(),
        "voxels": volume.dims().len(),
        "counts": {
            "background": volume.count(LabelVolume::BACKGROUND),
            "hepatic": volume.count(LabelVolume::HEPATIC),
            "portal": volume.count(LabelVolume::PORTAL),
        },
    });
    if let Some(h) = header {
        doc["header"] = h;
    }
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(&to_json(&doc)).map_err(Error::from)?;
    Ok(())
}
