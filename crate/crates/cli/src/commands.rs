use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use pcqa::benchmark::{evaluate_metric, BenchmarkReport, ReportRow};
use pcqa::cloud::{bounding_box, normalize_to_box, quantize_and_dedup};
use pcqa::ply::{read_ply_file, write_ply_file, Encoding};
use pcqa::point_metrics::{
    estimate_normals, format_value, geometry_peak, write_metric_csv, Direction, PointMetricSet,
};
use pcqa::pooling::{score_view_sets, warn_if_unusual_gamma, DEFAULT_GAMMA, MEAN_GAMMA};
use pcqa::projection::{project_pair, project_six_views, ProjectionOptions};
use pcqa::subjective::{
    anova_from_observations, colorfulness, dmos, parse_sample_id, spatial_information, DmosOptions,
    DmosTable, RatingMatrix, DEFAULT_ALPHA, DEFAULT_RANGE_THRESH, DEFAULT_STD_THRESH,
};
use pcqa::{BoundingBox, IqaMetric, MetricRegistry, PointCloud};

use crate::config::Config;
use crate::objective::{pair_with_dmos, read_objective};
use crate::{
    AnovaArgs, BatchArgs, BenchmarkArgs, Cli, CliError, Command, ContentArgs, DmosArgs, PointMetricsArgs,
    PointOptions, PreprocessArgs, ProjectArgs, ProjectionMetricsArgs, ProjectionOptionsArgs, SampleArgs,
};

type CliResult<T = ()> = Result<T, CliError>;

const DEFAULT_NORMALS_K: usize = 12;
const DEFAULT_METRIC: &str = "ssim";

pub fn run(cli: Cli) -> CliResult {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let workers: usize = cfg.pick(cli.workers, "workers", 0)?;
    if workers > 0 {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    match cli.command {
        Command::Preprocess(a) => preprocess(a),
        Command::PointMetrics(a) => point_metrics(a, &cfg),
        Command::ProjectionMetrics(a) => projection_metrics(a, &cfg),
        Command::Project(a) => project(a, &cfg),
        Command::Dmos(a) => dmos_cmd(a, &cfg),
        Command::Anova(a) => anova(a),
        Command::Content(a) => content(a, &cfg),
        Command::Benchmark(a) => benchmark(a, &cfg),
        Command::Batch(a) => batch(a, &cfg),
    }
}

fn require_file(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("no such file: {}", path.display())))
    }
}

fn read_cloud(path: &Path) -> CliResult<PointCloud> {
    require_file(path)?;
    read_ply_file(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn output(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn parse_triple(s: &str) -> CliResult<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("expected three comma-separated numbers, got '{s}'")))?;
    parts
        .try_into()
        .map_err(|_| CliError::Usage(format!("expected three comma-separated numbers, got '{s}'")))
}

fn preprocess(a: PreprocessArgs) -> CliResult {
    let cloud = read_cloud(&a.input)?;
    let before = cloud.len();
    let mut out = quantize_and_dedup(&cloud);
    if let Some(extent) = &a.target_box {
        let target = BoundingBox::from_extent(parse_triple(extent)?)
            .map_err(|e| CliError::Usage(format!("--target-box: {e}")))?;
        out = normalize_to_box(&out, &target)?;
    }
    log::info!("{before} points in, {} points out", out.len());
    let enc = if a.ascii {
        Encoding::Ascii
    } else {
        Encoding::BinaryLittleEndian
    };
    write_ply_file(&a.output, &out, enc)?;
    Ok(())
}

/// Sequence, gQP and tQP for output rows; the sequence defaults to the file stem.
fn sample_fields(s: &SampleArgs, cfg: &Config, fallback: &Path) -> CliResult<(String, i32, i32)> {
    let stem = fallback
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok((
        cfg.pick(s.sequence.clone(), "sequence", stem)?,
        cfg.pick(s.gqp, "gqp", 0)?,
        cfg.pick(s.tqp, "tqp", 0)?,
    ))
}

struct PointSettings {
    normals_k: usize,
    direction: Direction,
    peak: Option<f64>,
}

fn point_settings(o: &PointOptions, cfg: &Config) -> CliResult<PointSettings> {
    let direction = match cfg
        .pick(o.direction.clone(), "direction", "symmetric".to_string())?
        .as_str()
    {
        "symmetric" => Direction::Symmetric,
        "forward" => Direction::Forward,
        "backward" => Direction::Backward,
        other => return Err(CliError::Usage(format!("unknown direction '{other}'"))),
    };
    let peak = match o.peak {
        Some(p) => Some(p),
        None => cfg.get("peak")?,
    };
    if let Some(p) = peak {
        if !(p > 0.0 && p.is_finite()) {
            return Err(CliError::Usage(format!("peak must be positive, got {p}")));
        }
    }
    Ok(PointSettings {
        normals_k: cfg.pick(o.normals_k, "normals-k", DEFAULT_NORMALS_K)?,
        direction,
        peak,
    })
}

fn with_normals(cloud: PointCloud, k: usize, label: &str) -> CliResult<PointCloud> {
    if cloud.normals.is_some() || k == 0 {
        return Ok(cloud);
    }
    if cloud.len() <= k {
        log::warn!(
            "{label}: {} points, too few to estimate normals with k = {k}; skipping D2",
            cloud.len()
        );
        return Ok(cloud);
    }
    let est = estimate_normals(&cloud, k)?;
    let weak = est.low_confidence.iter().filter(|f| **f).count();
    if weak > 0 {
        log::warn!("{label}: {weak} normals estimated from degenerate neighbourhoods");
    }
    Ok(est.cloud)
}

fn point_rows(
    reference: PointCloud,
    distorted: PointCloud,
    s: &PointSettings,
) -> CliResult<Vec<(String, f64)>> {
    let reference = with_normals(reference, s.normals_k, "reference")?;
    let distorted = with_normals(distorted, s.normals_k, "distorted")?;
    let peak = s
        .peak
        .unwrap_or_else(|| geometry_peak(reference.bit_depth.max(distorted.bit_depth)));
    Ok(PointMetricSet::compute(&reference, &distorted)?.rows(s.direction, peak))
}

fn point_metrics(a: PointMetricsArgs, cfg: &Config) -> CliResult {
    let settings = point_settings(&a.opts, cfg)?;
    let (seq, g, t) = sample_fields(&a.sample, cfg, &a.distorted)?;
    let rows = point_rows(read_cloud(&a.reference)?, read_cloud(&a.distorted)?, &settings)?;
    let rows: Vec<_> = rows.into_iter().map(|(n, v)| (seq.clone(), g, t, n, v)).collect();
    write_metric_csv(output(&a.output)?, &rows)?;
    Ok(())
}

struct ProjectionSettings {
    metrics: Vec<std::sync::Arc<dyn IqaMetric>>,
    gamma: f64,
    masked: bool,
    projection: ProjectionOptions,
}

fn projection_options(
    splat: Option<usize>,
    resolution: Option<f64>,
    cfg: &Config,
) -> CliResult<ProjectionOptions> {
    let d = ProjectionOptions::default();
    let resolution = cfg.pick(resolution, "resolution", d.resolution)?;
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(CliError::Usage(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    Ok(ProjectionOptions {
        splat_radius: cfg.pick(splat, "splat-radius", d.splat_radius)?,
        resolution,
        ..d
    })
}

fn projection_settings(o: &ProjectionOptionsArgs, cfg: &Config) -> CliResult<ProjectionSettings> {
    let registry = MetricRegistry::default();
    let metrics = cfg
        .pick_list(&o.metric, "metric", &[DEFAULT_METRIC])
        .iter()
        .map(|m| {
            registry.get(m).map_err(|_| {
                let known: Vec<&str> = registry.names().collect();
                CliError::Usage(format!("unknown metric '{m}' (available: {})", known.join(", ")))
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let pooling = cfg.pick(o.pooling.clone(), "pooling", "weighted".to_string())?;
    let gamma = match pooling.as_str() {
        "mean" => MEAN_GAMMA,
        "weighted" => {
            let g = cfg.pick(o.gamma, "gamma", DEFAULT_GAMMA)?;
            if !(0.0..=1.0).contains(&g) {
                return Err(CliError::Usage(format!("gamma must lie in [0, 1], got {g}")));
            }
            warn_if_unusual_gamma(g);
            g
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown pooling '{other}' (mean or weighted)"
            )))
        }
    };
    Ok(ProjectionSettings {
        metrics,
        gamma,
        masked: o.masked || cfg.get::<bool>("masked")?.unwrap_or(false),
        projection: projection_options(o.splat_radius, o.resolution, cfg)?,
    })
}

struct ProjectionRow {
    sequence: String,
    gqp: i32,
    tqp: i32,
    metric: String,
    gamma: f64,
    views: [f64; 6],
    score: f64,
}

fn projection_rows(
    reference: &PointCloud,
    distorted: &PointCloud,
    s: &ProjectionSettings,
    sample: &(String, i32, i32),
) -> CliResult<Vec<ProjectionRow>> {
    let (rv, dv) = project_pair(reference, distorted, &s.projection)?;
    s.metrics
        .iter()
        .map(|m| {
            let r = score_view_sets(&rv, &dv, m.as_ref(), s.gamma, s.masked)?;
            Ok(ProjectionRow {
                sequence: sample.0.clone(),
                gqp: sample.1,
                tqp: sample.2,
                metric: m.name().to_string(),
                gamma: s.gamma,
                views: r.views.as_ordered(),
                score: r.score,
            })
        })
        .collect()
}

fn write_projection_csv(out: impl Write, rows: &[ProjectionRow]) -> CliResult {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sequence", "gQP", "tQP", "metric", "gamma", "front", "back", "left", "right", "top", "bottom",
        "S_final",
    ])
    .map_err(pcqa::Error::from)?;
    for r in rows {
        let mut rec = vec![
            r.sequence.clone(),
            r.gqp.to_string(),
            r.tqp.to_string(),
            r.metric.clone(),
            format_value(r.gamma),
        ];
        rec.extend(r.views.iter().map(|v| format_value(*v)));
        rec.push(format_value(r.score));
        w.write_record(rec).map_err(pcqa::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

fn projection_metrics(a: ProjectionMetricsArgs, cfg: &Config) -> CliResult {
    let settings = projection_settings(&a.opts, cfg)?;
    let sample = sample_fields(&a.sample, cfg, &a.distorted)?;
    let rows = projection_rows(
        &read_cloud(&a.reference)?,
        &read_cloud(&a.distorted)?,
        &settings,
        &sample,
    )?;
    write_projection_csv(output(&a.output)?, &rows)
}

fn project(a: ProjectArgs, cfg: &Config) -> CliResult {
    let cloud = read_cloud(&a.input)?;
    let opts = projection_options(a.splat_radius, a.resolution, cfg)?;
    let views = project_six_views(&cloud, &bounding_box(&cloud)?, &opts)?;
    views.write_pnm(&a.dump_dir)?;
    Ok(())
}

fn dmos_cmd(a: DmosArgs, cfg: &Config) -> CliResult {
    require_file(&a.ratings)?;
    let opts = DmosOptions {
        alpha: cfg.pick(a.alpha, "alpha", DEFAULT_ALPHA)?,
        range_thresh: cfg.pick(a.range_thresh, "range-thresh", DEFAULT_RANGE_THRESH)?,
        std_thresh: cfg.pick(a.std_thresh, "std-thresh", DEFAULT_STD_THRESH)?,
    };
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(CliError::Usage(format!(
            "alpha must lie in (0, 1), got {}",
            opts.alpha
        )));
    }
    let ratings = RatingMatrix::from_csv(File::open(&a.ratings)?)?;
    let report = dmos(&ratings, &opts)?;
    let rejected = report.rejected_subjects(&ratings);
    if !rejected.is_empty() {
        log::info!("rejected subjects: {}", rejected.join(", "));
    }
    let dropped = report.grubbs.iter().filter(|g| g.rejected).count();
    log::info!(
        "{dropped} of {} samples rejected by the Grubbs test",
        ratings.n_samples()
    );
    let mut out = output(&a.output)?;
    report.table.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn read_dmos(path: &Path) -> CliResult<DmosTable> {
    require_file(path)?;
    Ok(DmosTable::read_csv(File::open(path)?)?)
}

fn anova(a: AnovaArgs) -> CliResult {
    let table = read_dmos(&a.dmos)?;
    let obs = table
        .retained()
        .map(|(id, v)| {
            let (_, g, t) = parse_sample_id(id)
                .ok_or_else(|| CliError::Data(format!("sample id '{id}' is not <sequence>_<gqp>_<tqp>")))?;
            Ok((i64::from(g), i64::from(t), v))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let (_, _, result) = anova_from_observations(&obs)?;
    let mut out = output(&a.output)?;
    result.write_csv(&mut out, "geometry", "texture")?;
    out.flush()?;
    Ok(())
}

fn content(a: ContentArgs, cfg: &Config) -> CliResult {
    let cloud = read_cloud(&a.input)?;
    let opts = projection_options(a.splat_radius, None, cfg)?;
    let views = project_six_views(&cloud, &bounding_box(&cloud)?, &opts)?;
    let sequence = match a.sequence {
        Some(s) => s,
        None => a
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let mut w = csv::Writer::from_writer(output(&a.output)?);
    w.write_record(["sequence", "si", "cf"])
        .map_err(pcqa::Error::from)?;
    w.write_record([
        sequence,
        spatial_information(&views).to_string(),
        colorfulness(&views).to_string(),
    ])
    .map_err(pcqa::Error::from)?;
    w.flush()?;
    Ok(())
}

fn benchmark(a: BenchmarkArgs, cfg: &Config) -> CliResult {
    require_file(&a.objective)?;
    let sessions = cfg.pick_list(&a.session, "session", &["all"]);
    for s in &sessions {
        if !matches!(s.as_str(), "all" | "human" | "object") {
            return Err(CliError::Usage(format!(
                "unknown session '{s}' (all, human or object)"
            )));
        }
    }
    let series = read_objective(File::open(&a.objective)?)?;
    let table = read_dmos(&a.dmos)?;
    let mut jobs = Vec::new();
    for session in &sessions {
        for (key, x, y) in pair_with_dmos(&series, &table, session)? {
            jobs.push((session.clone(), key, x, y));
        }
    }
    let rows: Vec<Option<ReportRow>> = jobs
        .par_iter()
        .map(|(session, key, x, y)| match evaluate_metric(x, y) {
            Ok(e) => Ok(Some(ReportRow::new(
                session,
                &key.metric,
                &key.pooling,
                key.gamma,
                &e,
            ))),
            Err(pcqa::Error::InvalidArgument(m)) => {
                log::warn!("skipping {session}/{}/{}: {m}", key.metric, key.pooling);
                Ok(None)
            }
            Err(e) => Err(CliError::from(e)),
        })
        .collect::<CliResult<_>>()?;
    let rows: Vec<ReportRow> = rows.into_iter().flatten().collect();
    if rows.is_empty() {
        return Err(CliError::Data(
            "no metric had enough paired samples to evaluate".into(),
        ));
    }
    BenchmarkReport::new(rows).write(&a.out_dir, &a.stem)?;
    Ok(())
}

struct Job {
    reference: PathBuf,
    distorted: PathBuf,
    sample: (String, i32, i32),
}

fn read_manifest(path: &Path) -> CliResult<Vec<Job>> {
    require_file(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(pcqa::Error::from)?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(pcqa::Error::from)?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("manifest lacks a '{name}' column")))
    };
    let (cr, cd, cs, cg, ct) = (
        col("ref")?,
        col("dist")?,
        col("sequence")?,
        col("gqp")?,
        col("tqp")?,
    );
    let mut jobs = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(pcqa::Error::from)?;
        let f = |c: usize| rec.get(c).unwrap_or("").to_string();
        let int = |c: usize| {
            f(c).parse::<i32>()
                .map_err(|_| CliError::Data(format!("manifest row {}: bad QP '{}'", n + 2, f(c))))
        };
        jobs.push(Job {
            reference: base.join(f(cr)),
            distorted: base.join(f(cd)),
            sample: (f(cs), int(cg)?, int(ct)?),
        });
    }
    Ok(jobs)
}

fn batch(a: BatchArgs, cfg: &Config) -> CliResult {
    let jobs = read_manifest(&a.manifest)?;
    let point = point_settings(&a.point, cfg)?;
    let proj = projection_settings(&a.projection, cfg)?;
    for j in &jobs {
        require_file(&j.reference)?;
        require_file(&j.distorted)?;
    }
    type PointRows = Vec<(String, i32, i32, String, f64)>;
    let results: Vec<(PointRows, Vec<ProjectionRow>)> = jobs
        .par_iter()
        .map(|j| {
            let r = read_cloud(&j.reference)?;
            let d = read_cloud(&j.distorted)?;
            let proj_rows = if a.no_projection {
                Vec::new()
            } else {
                projection_rows(&r, &d, &proj, &j.sample)?
            };
            let point_rows = if a.no_point {
                Vec::new()
            } else {
                let (s, g, t) = &j.sample;
                point_rows(r, d, &point)?
                    .into_iter()
                    .map(|(n, v)| (s.clone(), *g, *t, n, v))
                    .collect()
            };
            Ok((point_rows, proj_rows))
        })
        .collect::<CliResult<_>>()?;

    let (mut points, mut projs): (PointRows, Vec<ProjectionRow>) = (Vec::new(), Vec::new());
    for (p, q) in results {
        points.extend(p);
        projs.extend(q);
    }
    points.sort_by(|x, y| (&x.0, x.1, x.2).cmp(&(&y.0, y.1, y.2)));
    projs.sort_by(|x, y| (&x.sequence, x.gqp, x.tqp).cmp(&(&y.sequence, y.gqp, y.tqp)));
    std::fs::create_dir_all(&a.out_dir)?;
    if !a.no_point {
        write_metric_csv(
            BufWriter::new(File::create(a.out_dir.join("point_metrics.csv"))?),
            &points,
        )?;
    }
    if !a.no_projection {
        write_projection_csv(
            BufWriter::new(File::create(a.out_dir.join("projection_metrics.csv"))?),
            &projs,
        )?;
    }
    Ok(())
}
