//! `ldls`: segment a lidar frame from 2D instance masks, or score labels against ground truth.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use ldls_core::io::{read_calibration, read_labels, read_masks, read_point_cloud, write_labels};
use ldls_core::metrics::{evaluate, Evaluation, LabeledPoints, DEFAULT_IOU_THRESHOLDS};
use ldls_core::pipeline::{direct_projection, segment_observed, Stage};
use ldls_core::{DiffusionParams, Error, SegmentationResult};

#[derive(Parser)]
#[command(name = "ldls", version, about = "Lidar instance segmentation by label diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label every point of a lidar frame with an instance from the 2D masks.
    Segment(SegmentArgs),
    /// Compare predicted labels with ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct SegmentArgs {
    /// Velodyne binary point cloud (x, y, z, intensity as little-endian f32).
    #[arg(long)]
    cloud: PathBuf,
    /// KITTI calibration file, or a single `P:` line.
    #[arg(long)]
    calib: PathBuf,
    /// Instance mask file (JSON, run-length encoded).
    #[arg(long)]
    masks: PathBuf,
    /// Label file to write.
    #[arg(long)]
    out: PathBuf,
    /// Nearest neighbors per point.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Kernel scale of the neighbor weights exp(-d^2 / sigma).
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Weight of each point-to-pixel edge.
    #[arg(long, default_value_t = 0.001)]
    lambda: f64,
    /// Side of the pixel window around each projection (odd).
    #[arg(long = "box", default_value_t = 5)]
    box_size: u32,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long)]
    no_outlier_removal: bool,
    /// Label each point by the mask its projection lands in; no diffusion.
    #[arg(long)]
    direct_projection: bool,
    /// Print wall-clock time per stage to stderr.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// IoU needed for a matched pair to count; repeatable.
    #[arg(long = "iou-threshold")]
    iou_thresholds: Vec<f64>,
    /// Comma-separated class ids or names. Defaults to every class present.
    #[arg(long, value_delimiter = ',')]
    classes: Vec<String>,
    /// Emit JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Segment(args) => run_segment(args),
        Command::Evaluate(args) => run_evaluate(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

struct Timer {
    enabled: bool,
    last: Instant,
    rows: Vec<(&'static str, Duration)>,
}

impl Timer {
    fn new(enabled: bool) -> Self {
        Self {
            enabled,
            last: Instant::now(),
            rows: Vec::new(),
        }
    }

    fn lap(&mut self, name: &'static str) {
        let now = Instant::now();
        self.rows.push((name, now - self.last));
        self.last = now;
    }

    fn report(&self) {
        if !self.enabled {
            return;
        }
        let mut total = Duration::ZERO;
        for (name, d) in &self.rows {
            eprintln!("{name:<16} {:>10.3} ms", d.as_secs_f64() * 1e3);
            total += *d;
        }
        eprintln!("{:<16} {:>10.3} ms", "total", total.as_secs_f64() * 1e3);
    }
}

fn run_segment(args: SegmentArgs) -> Result<(), Error> {
    let mut timer = Timer::new(args.timing);
    // KITTI calibration files carry no image size; the masks do.
    let masks = read_masks(&args.masks)?;
    let calib = read_calibration(&args.calib, Some((masks.width(), masks.height())))?;
    let cloud = read_point_cloud(&args.cloud)?;
    timer.lap("read");

    let result = if args.direct_projection {
        let r = direct_projection(&cloud, &calib, &masks)?;
        timer.lap("direct_projection");
        r
    } else {
        let params = DiffusionParams {
            lambda: args.lambda,
            k_neighbors: args.k,
            sigma: args.sigma,
            box_size: args.box_size,
            max_iters: args.max_iters,
            tolerance: args.tol,
            outlier_removal: !args.no_outlier_removal,
        };
        let seg = segment_observed(&cloud, &calib, &masks, &params, |stage: Stage| {
            timer.lap(stage.name())
        })?;
        seg.result
    };
    write_labels(&result, &args.out)?;
    timer.lap("write");
    timer.report();
    Ok(())
}

fn class_names(results: &[&SegmentationResult]) -> BTreeMap<u32, String> {
    let mut names = BTreeMap::new();
    for r in results {
        for info in r.instance_table().values() {
            names
                .entry(info.class_id)
                .or_insert_with(|| info.class_name.clone());
        }
    }
    names
}

fn resolve_classes(requested: &[String], names: &BTreeMap<u32, String>) -> Result<Vec<u32>, Error> {
    if requested.is_empty() {
        return Ok(names.keys().copied().collect());
    }
    let mut out = Vec::new();
    for item in requested.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let id = match item.parse::<u32>() {
            Ok(id) => id,
            Err(_) => names
                .iter()
                .find(|(_, name)| name.as_str() == item)
                .map(|(&id, _)| id)
                .ok_or_else(|| Error::InvalidParams(format!("unknown class name {item:?}")))?,
        };
        if id == 0 {
            return Err(Error::InvalidParams("class 0 is background".into()));
        }
        if !out.contains(&id) {
            out.push(id);
        }
    }
    Ok(out)
}

fn run_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    let pred = read_labels(&args.pred, None)?;
    let truth = read_labels(&args.truth, None)?;
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    let names = class_names(&[&truth, &pred]);
    let classes = resolve_classes(&args.classes, &names)?;
    let thresholds = if args.iou_thresholds.is_empty() {
        DEFAULT_IOU_THRESHOLDS.to_vec()
    } else {
        args.iou_thresholds.clone()
    };
    let eval = evaluate(
        LabeledPoints::from(&pred),
        LabeledPoints::from(&truth),
        &classes,
        &thresholds,
    )?;
    if args.json {
        let text = serde_json::to_string_pretty(&eval).expect("reports serialize");
        println!("{text}");
    } else {
        print!("{}", render_table(&eval, &names));
    }
    Ok(())
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

fn render_table(eval: &Evaluation, names: &BTreeMap<u32, String>) -> String {
    let label = |c: u32| match names.get(&c) {
        Some(n) if !n.is_empty() => format!("{c} {n}"),
        _ => c.to_string(),
    };
    let mut out = String::from("semantic\n");
    out += &format!(
        "{:<16} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        "class", "precision", "recall", "iou", "predicted", "truth"
    );
    for c in &eval.semantic.classes {
        out += &format!(
            "{:<16} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            label(c.class_id),
            cell(c.precision),
            cell(c.recall),
            cell(c.iou),
            c.predicted,
            c.truth
        );
    }
    for report in &eval.instance {
        out += &format!("\ninstance, IoU >= {:.2}\n", report.threshold);
        out += &format!(
            "{:<16} {:>5} {:>5} {:>5} {:>9} {:>9}\n",
            "class", "tp", "fp", "fn", "precision", "recall"
        );
        for row in &report.rows {
            out += &format!(
                "{:<16} {:>5} {:>5} {:>5} {:>9} {:>9}\n",
                label(row.class_id),
                row.tp,
                row.fp,
                row.fn_count,
                cell(row.precision),
                cell(row.recall)
            );
        }
    }
    out
}
