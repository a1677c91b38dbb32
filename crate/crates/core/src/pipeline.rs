//! End-to-end orchestration: per-frame corner processing, the stream
//! simulator with its sampling clock, the benchmark harness and output
//! annotation.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circle::{
    ce_fit, cht_unknown_radius, median_radial_deviation, midpoint_circle, Circle, EdgePointSet,
    HoughParams,
};
use crate::classify::{
    classify_features, glyph_crop, FeatureVector, Label, MlpModel, TrainConfig, OUTPUT_SIZE,
};
use crate::preprocess::{
    binarize, fill_and_label_runs, largest_component_boundary, largest_component_runs,
    otsu_threshold, sobel_edge_runs, EdgeParams,
};
use crate::raster::{
    corner_regions, grayscale_region, read_pnm, write_pgm, BinaryImage, ColorImage, Corner,
    CropRegion,
    GrayImage, PnmImage,
};
use crate::synth::{CorpusManifest, ScheduleEntry, Split};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("failed to decode {path}: {source}")]
    BadImage {
        path: PathBuf,
        source: crate::raster::PnmError,
    },
    #[error("{path} is not a color (P6) frame")]
    NotColorFrame { path: PathBuf },
    #[error("schedule line {line}: {message}")]
    BadSchedule { line: usize, message: String },
    #[error("evaluation split is empty")]
    EmptySplit,
    #[error("no usable training samples in the corpus")]
    NoTrainingSamples,
    #[error(transparent)]
    Train(#[from] crate::classify::ClassifyError),
}

/// Which circle detector the pipeline runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    Cht,
    Ce,
}

impl std::fmt::Display for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Detector::Cht => write!(f, "cht"),
            Detector::Ce => write!(f, "ce"),
        }
    }
}

impl std::str::FromStr for Detector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cht" => Ok(Detector::Cht),
            "ce" => Ok(Detector::Ce),
            other => Err(format!("unknown detector {other:?} (expected cht or ce)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub detector: Detector,
    pub corner_fraction_w: f64,
    pub corner_fraction_h: f64,
    pub edge: EdgeParams,
    /// Components below this fraction of the crop's pixel count are noise.
    pub min_area_fraction: f64,
    /// Radius search range for CHT; derived from the crop size when absent.
    pub hough: Option<HoughParams>,
    pub reject_threshold: f64,
    /// Candidates whose median boundary distance from the fitted rim exceeds
    /// `max(1.5, fraction * r0)` are not circles; skip classification.
    pub rim_deviation_fraction: f64,
    /// Stream sampling period in seconds.
    pub sampling_period: f64,
    /// How long a sign is assumed to stay on screen, in seconds.
    pub sign_duration: f64,
    /// When set, intermediate pre-processing stages are dumped as PGM files.
    pub dump_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            detector: Detector::Ce,
            corner_fraction_w: 0.25,
            corner_fraction_h: 0.25,
            edge: EdgeParams::default(),
            min_area_fraction: 0.005,
            hough: None,
            reject_threshold: 0.5,
            rim_deviation_fraction: 0.08,
            sampling_period: 4.0,
            sign_duration: 10.0,
            dump_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn with_detector(detector: Detector) -> Self {
        Self { detector, ..Self::default() }
    }
}

/// Outcome for one corner of one frame.
#[derive(Debug, Clone, Serialize)]
pub struct Detection {
    pub label: Label,
    pub circle: Option<Circle>,
    pub corner: Corner,
    pub activations: Option<[f64; OUTPUT_SIZE]>,
    /// Median distance between the candidate boundary and the fitted rim.
    pub rim_deviation: Option<f64>,
    /// Total wall-clock seconds for this corner.
    pub elapsed: f64,
    /// Pre-processing + circle detection seconds (the benchmark's scope).
    pub detect_time: f64,
}

/// Frame-level result: the two corner detections plus the combined verdict.
#[derive(Debug, Clone, Serialize)]
pub struct FrameResult {
    pub corners: Vec<Detection>,
    pub label: Label,
    pub circle: Option<Circle>,
    pub corner: Option<Corner>,
    /// Both corners claimed a sign; the verdict was forced to N/C.
    pub conflict: bool,
}

impl FrameResult {
    /// Pre-processing + detection time over both corners.
    pub fn detect_time(&self) -> f64 {
        self.corners.iter().map(|d| d.detect_time).sum()
    }
}

fn reject_detection(corner: Corner, detect_time: f64, started: Instant) -> Detection {
    Detection {
        label: Label::NotClassified,
        circle: None,
        corner,
        activations: None,
        rim_deviation: None,
        elapsed: started.elapsed().as_secs_f64(),
        detect_time,
    }
}

/// Runs the full chain on one corner crop. Vision-stage failures (no
/// candidate object, degenerate circles, singular fits) map to N/C.
fn process_corner(
    frame: &ColorImage,
    region: &CropRegion,
    cfg: &PipelineConfig,
    model: &MlpModel,
) -> Detection {
    let started = Instant::now();
    let corner = region.corner;
    let gray = grayscale_region(frame, region).expect("corner region lies inside the frame");
    let dump = |name: &str, img: &GrayImage| {
        if let Some(dir) = &cfg.dump_dir {
            let _ = std::fs::create_dir_all(dir);
            let _ = std::fs::write(dir.join(format!("{corner}_{name}.pgm")), write_pgm(img));
        }
    };
    dump("1_gray", &gray);
    let Ok(edges) = sobel_edge_runs(&gray, &cfg.edge) else {
        return reject_detection(corner, started.elapsed().as_secs_f64(), started);
    };
    if cfg.dump_dir.is_some() {
        dump("2_edges", &edges.to_image().to_gray());
    }
    if cfg.dump_dir.is_some() {
        let labeled = fill_and_label_runs(&edges);
        let mut filled = BinaryImage::filled(region.width, region.height, false);
        for y in 0..region.height {
            for x in 0..region.width {
                filled.set(x, y, labeled.label(x, y) != 0);
            }
        }
        dump("3_filled", &filled.to_gray());
    }
    let min_area = ((region.width * region.height) as f64 * cfg.min_area_fraction) as usize;
    let Ok(boundary) = largest_component_boundary(&edges, min_area) else {
        return reject_detection(corner, started.elapsed().as_secs_f64(), started);
    };
    if cfg.dump_dir.is_some() {
        if let Ok(candidate) = largest_component_runs(&edges, min_area) {
            dump("4_largest", &candidate.mask.to_gray());
        }
    }
    let Ok(points) = EdgePointSet::from_pixels(&boundary) else {
        return reject_detection(corner, started.elapsed().as_secs_f64(), started);
    };
    let detected = match cfg.detector {
        Detector::Ce => ce_fit(&points).map(|report| report.circle),
        Detector::Cht => {
            let params = cfg
                .hough
                .unwrap_or_else(|| HoughParams::for_crop(region.width, region.height));
            cht_unknown_radius(&points, &params, region.width, region.height)
                .map_err(|_| crate::circle::CircleError::EmptyPointSet)
        }
    };
    let detect_time = started.elapsed().as_secs_f64();
    let Ok(local_circle) = detected else {
        return reject_detection(corner, detect_time, started);
    };
    let deviation = median_radial_deviation(&points, &local_circle);
    if deviation > rim_gate_limit(&local_circle, cfg.rim_deviation_fraction) {
        let mut rejected = reject_detection(corner, detect_time, started);
        rejected.rim_deviation = Some(deviation);
        return rejected;
    }
    // Classification stage: binarize the gray crop and read the glyph.
    let binary = binarize(&gray, otsu_threshold(&gray));
    let Ok(glyph) = glyph_crop(&binary, &local_circle) else {
        return Detection {
            label: Label::NotClassified,
            circle: Some(offset_circle(&local_circle, region)),
            corner,
            activations: None,
            rim_deviation: Some(deviation),
            elapsed: started.elapsed().as_secs_f64(),
            detect_time,
        };
    };
    let features = crate::classify::extract_features(&glyph).expect("glyph crop is 80x40");
    let (label, activations) = classify_features(model, &features, cfg.reject_threshold);
    Detection {
        label,
        circle: Some(offset_circle(&local_circle, region)),
        corner,
        activations: Some(activations),
        rim_deviation: Some(deviation),
        elapsed: started.elapsed().as_secs_f64(),
        detect_time,
    }
}

fn rim_gate_limit(circle: &Circle, fraction: f64) -> f64 {
    (fraction * circle.r0).max(1.5)
}

fn offset_circle(circle: &Circle, region: &CropRegion) -> Circle {
    Circle { a0: circle.a0 + region.x as f64, b0: circle.b0 + region.y as f64, r0: circle.r0 }
}

/// Processes both corner crops of a frame. The frame verdict is the single
/// non-N/C corner when exactly one exists; two competing signs force N/C.
pub fn process_frame(frame: &ColorImage, cfg: &PipelineConfig, model: &MlpModel) -> FrameResult {
    let (left, right) =
        corner_regions(frame.width(), frame.height(), cfg.corner_fraction_w, cfg.corner_fraction_h)
            .expect("pipeline config holds valid fractions");
    let detections = vec![
        process_corner(frame, &left, cfg, model),
        process_corner(frame, &right, cfg, model),
    ];
    let positives: Vec<&Detection> =
        detections.iter().filter(|d| d.label != Label::NotClassified).collect();
    let (label, circle, corner, conflict) = match positives.as_slice() {
        [single] => (single.label, single.circle, Some(single.corner), false),
        [] => (Label::NotClassified, None, None, false),
        _ => (Label::NotClassified, None, None, true),
    };
    FrameResult { corners: detections, label, circle, corner, conflict }
}

/// Extracts the feature vector (and local circle) the classifier would see in
/// the given corner; used to build training sets from the corpus.
pub fn corner_feature_vector(
    frame: &ColorImage,
    cfg: &PipelineConfig,
    corner: Corner,
) -> Option<(FeatureVector, Circle)> {
    let (left, right) =
        corner_regions(frame.width(), frame.height(), cfg.corner_fraction_w, cfg.corner_fraction_h)
            .ok()?;
    let region = match corner {
        Corner::UpperLeft => left,
        Corner::UpperRight => right,
    };
    let gray = grayscale_region(frame, &region).ok()?;
    let edges = sobel_edge_runs(&gray, &cfg.edge).ok()?;
    let min_area = ((region.width * region.height) as f64 * cfg.min_area_fraction) as usize;
    let boundary = largest_component_boundary(&edges, min_area).ok()?;
    let points = EdgePointSet::from_pixels(&boundary).ok()?;
    let circle = match cfg.detector {
        Detector::Ce => ce_fit(&points).ok()?.circle,
        Detector::Cht => {
            let params =
                cfg.hough.unwrap_or_else(|| HoughParams::for_crop(region.width, region.height));
            cht_unknown_radius(&points, &params, region.width, region.height).ok()?
        }
    };
    if median_radial_deviation(&points, &circle) > rim_gate_limit(&circle, cfg.rim_deviation_fraction)
    {
        return None;
    }
    let binary = binarize(&gray, otsu_threshold(&gray));
    let glyph = glyph_crop(&binary, &circle).ok()?;
    let features = crate::classify::extract_features(&glyph).ok()?;
    Some((features, circle))
}

pub fn load_color_frame(path: &Path) -> Result<ColorImage, PipelineError> {
    let bytes = std::fs::read(path)?;
    match read_pnm(&bytes) {
        Ok(PnmImage::Color(img)) => Ok(img),
        Ok(PnmImage::Gray(_)) => Err(PipelineError::NotColorFrame { path: path.to_owned() }),
        Err(source) => Err(PipelineError::BadImage { path: path.to_owned(), source }),
    }
}

/// An ordered frame schedule standing in for a live broadcast.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub entries: Vec<ScheduleEntry>,
    /// Frame paths are resolved against this directory.
    pub base_dir: PathBuf,
}

impl Schedule {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)?;
        let mut entries: Vec<ScheduleEntry> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScheduleEntry =
                serde_json::from_str(line).map_err(|e| PipelineError::BadSchedule {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if let Some(prev) = entries.last() {
                if entry.t < prev.t {
                    return Err(PipelineError::BadSchedule {
                        line: i + 1,
                        message: "timestamps must be nondecreasing".into(),
                    });
                }
            }
            entries.push(entry);
        }
        let base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_owned();
        Ok(Self { entries, base_dir })
    }
}

/// One processed sample of the stream.
#[derive(Debug, Clone, Serialize)]
pub struct StreamEvent {
    pub t: f64,
    pub detection: FrameResult,
    pub processing_time: f64,
    pub deadline_met: bool,
}

impl StreamEvent {
    /// Compact JSON-lines record for stdout.
    pub fn to_json_line(&self) -> String {
        let circle = self.detection.circle;
        serde_json::json!({
            "t": self.t,
            "label": self.detection.label,
            "a0": circle.map(|c| c.a0),
            "b0": circle.map(|c| c.b0),
            "r0": circle.map(|c| c.r0),
            "corner": self.detection.corner,
            "ms": self.processing_time * 1e3,
            "deadline_met": self.deadline_met,
        })
        .to_string()
    }
}

/// Samples the schedule at t = 0, P, 2P, ... with a simulated clock: the
/// frame on air at each instant is fully processed before the next sample is
/// taken. Wall-clock processing time is checked against the period.
pub fn run_stream(
    schedule: &Schedule,
    cfg: &PipelineConfig,
    model: &MlpModel,
) -> Result<Vec<StreamEvent>, PipelineError> {
    let Some(last) = schedule.entries.last() else {
        return Ok(Vec::new());
    };
    let mut events = Vec::new();
    let mut t = 0.0;
    while t <= last.t {
        // The frame currently on air: latest timestamp <= t.
        let current = schedule
            .entries
            .iter()
            .take_while(|e| e.t <= t)
            .last();
        if let Some(entry) = current {
            let frame = load_color_frame(&schedule.base_dir.join(&entry.path))?;
            let started = Instant::now();
            let detection = process_frame(&frame, cfg, model);
            let processing_time = started.elapsed().as_secs_f64();
            events.push(StreamEvent {
                t,
                detection,
                processing_time,
                deadline_met: processing_time < cfg.sampling_period,
            });
        }
        t += cfg.sampling_period;
    }
    Ok(events)
}

/// One row of the benchmark table.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub detector: Detector,
    pub class: Label,
    pub n: usize,
    pub mean_s: f64,
    pub std_s: f64,
    pub accuracy_pct: f64,
}

/// Runs the evaluation split through both detectors and tabulates per-class
/// detection times (pre-processing + circle detection) and accuracies.
pub fn run_benchmark(
    manifest: &CorpusManifest,
    corpus_dir: &Path,
    model: &MlpModel,
    base_cfg: &PipelineConfig,
) -> Result<Vec<BenchmarkRow>, PipelineError> {
    let entries: Vec<_> = manifest
        .split(Split::Eval)
        .filter(|e| e.label != Label::NotClassified)
        .collect();
    if entries.is_empty() {
        return Err(PipelineError::EmptySplit);
    }
    let mut rows = Vec::new();
    for detector in [Detector::Cht, Detector::Ce] {
        let cfg = PipelineConfig { detector, dump_dir: None, ..base_cfg.clone() };
        let mut per_class: std::collections::HashMap<Label, (Vec<f64>, usize)> =
            std::collections::HashMap::new();
        for entry in &entries {
            let frame = load_color_frame(&corpus_dir.join(&entry.path))?;
            let result = process_frame(&frame, &cfg, model);
            let slot = per_class.entry(entry.label).or_default();
            slot.0.push(result.detect_time());
            if result.label == entry.label {
                slot.1 += 1;
            }
        }
        for class in Label::SIGN_CLASSES {
            let Some((times, correct)) = per_class.get(&class) else {
                continue;
            };
            let n = times.len();
            let mean = times.iter().sum::<f64>() / n as f64;
            let variance = if n > 1 {
                times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            rows.push(BenchmarkRow {
                detector,
                class,
                n,
                mean_s: mean,
                std_s: variance.sqrt(),
                accuracy_pct: 100.0 * *correct as f64 / n as f64,
            });
        }
    }
    Ok(rows)
}

pub fn benchmark_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from("detector,class,n,mean_s,std_s,accuracy_pct\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.2}\n",
            row.detector, row.class, row.n, row.mean_s, row.std_s, row.accuracy_pct
        ));
    }
    out
}

/// Builds the training set from the corpus train split and fits the model.
/// Feature extraction runs with the configured detector on each entry's
/// labeled corner. Returns the model and the training error curve.
pub fn train_from_corpus(
    manifest: &CorpusManifest,
    corpus_dir: &Path,
    cfg: &PipelineConfig,
    train_cfg: &TrainConfig,
) -> Result<(MlpModel, Vec<f64>), PipelineError> {
    let mut dataset = Vec::new();
    for entry in manifest.split(Split::Train) {
        let frame = load_color_frame(&corpus_dir.join(&entry.path))?;
        if let Some((features, _)) = corner_feature_vector(&frame, cfg, entry.corner) {
            dataset.push((features, entry.label.one_hot()));
        }
    }
    if dataset.is_empty() {
        return Err(PipelineError::NoTrainingSamples);
    }
    Ok(crate::classify::mlp_train(&dataset, train_cfg)?)
}

const ANNOTATION_COLOR: [u8; 3] = [0, 220, 60];

/// Copies the frame and draws the detected circle, a center crosshair and the
/// label text. N/C detections return an unmodified copy. Drawing is a pure
/// overwrite, so re-annotating with the same detection changes nothing.
pub fn annotate_output(frame: &ColorImage, result: &FrameResult) -> ColorImage {
    let mut out = frame.clone();
    let (Some(circle), false) = (result.circle, result.label == Label::NotClassified) else {
        return out;
    };
    let (w, h) = (out.width() as i64, out.height() as i64);
    let mut plot = |x: i64, y: i64| {
        if x >= 0 && y >= 0 && x < w && y < h {
            out.set(x as usize, y as usize, ANNOTATION_COLOR);
        }
    };
    let (cx, cy, r) = (circle.a0.round() as i64, circle.b0.round() as i64, circle.r0.round() as i64);
    midpoint_circle(cx, cy, r.max(1), &mut plot);
    for d in -5i64..=5 {
        plot(cx + d, cy);
        plot(cx, cy + d);
    }
    let text = crate::synth::label_text_mask(result.label, 18);
    let tx0 = cx - text.width() as i64 / 2;
    let ty0 = cy + r + 6;
    for ty in 0..text.height() {
        for tx in 0..text.width() {
            if text.get(tx, ty) {
                plot(tx0 + tx as i64, ty0 + ty as i64);
            }
        }
    }
    out
}
