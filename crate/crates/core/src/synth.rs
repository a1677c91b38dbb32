//! Reproducible synthetic corpus generator: renders age-range badges into
//! broadcast-sized frames with ground-truth labels and circle geometry, plus
//! negative frames for the N/C class. Everything is a pure function of the
//! seed, so corpora are bit-identical across runs and machines.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circle::Circle;
use crate::classify::{Label, GLYPH_COLS, GLYPH_ROWS};
use crate::raster::{write_ppm, BinaryImage, ColorImage, Corner};

pub const FRAME_WIDTH: usize = 720;
pub const FRAME_HEIGHT: usize = 576;
pub const MIN_BADGE_RADIUS: usize = 12;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("badge radius {0} below the minimum {MIN_BADGE_RADIUS}")]
    BadgeTooSmall(usize),
    #[error("badge at ({x}, {y}) radius {r} does not fit the {corner} corner region")]
    BadgeOutOfCorner { x: usize, y: usize, r: usize, corner: Corner },
    #[error("sample counts must be at least 1")]
    ZeroCount,
    #[error("a sign badge cannot carry the N/C label")]
    NotASignClass,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest line {line}: {message}")]
    BadManifest { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn flipped(self) -> Polarity {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Background {
    Flat,
    Gradient,
    Noise,
    Checker,
}

impl Background {
    pub const ALL: [Background; 4] =
        [Background::Flat, Background::Gradient, Background::Noise, Background::Checker];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

/// Geometry and style of one rendered badge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BadgeSpec {
    pub class: Label,
    pub radius: usize,
    /// Center in frame coordinates.
    pub center: (usize, usize),
    pub polarity: Polarity,
    pub ring_thickness: usize,
    pub stroke_width: usize,
}

impl BadgeSpec {
    pub fn with_defaults(
        class: Label,
        radius: usize,
        center: (usize, usize),
        polarity: Polarity,
    ) -> Self {
        Self {
            class,
            radius,
            center,
            polarity,
            ring_thickness: (radius / 10).max(2),
            stroke_width: (radius / 7).max(3),
        }
    }
}

/// One frame of the synthetic corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub width: usize,
    pub height: usize,
    pub background: Background,
    pub badge: Option<BadgeSpec>,
    pub corner: Corner,
    /// Draws a filled non-circular shape into the corner (negative samples).
    pub distractor: bool,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl FrameSpec {
    pub fn broadcast(background: Background, corner: Corner, noise_sigma: f64, seed: u64) -> Self {
        Self {
            width: FRAME_WIDTH,
            height: FRAME_HEIGHT,
            background,
            badge: None,
            corner,
            distractor: false,
            noise_sigma,
            seed,
        }
    }
}

// Stroke glyphs on a unit box, x right, y down. Rasterized at render time so
// the corpus carries no font dependency.
type Segment = ((f64, f64), (f64, f64));

const GLYPH_SEVEN: &[Segment] = &[
    ((0.08, 0.06), (0.92, 0.06)),
    ((0.92, 0.06), (0.38, 0.94)),
];

const GLYPH_THREE: &[Segment] = &[
    ((0.12, 0.08), (0.84, 0.08)),
    ((0.84, 0.08), (0.84, 0.50)),
    ((0.34, 0.50), (0.84, 0.50)),
    ((0.84, 0.50), (0.84, 0.92)),
    ((0.12, 0.92), (0.84, 0.92)),
];

const GLYPH_EIGHT: &[Segment] = &[
    ((0.16, 0.08), (0.84, 0.08)),
    ((0.84, 0.08), (0.84, 0.92)),
    ((0.84, 0.92), (0.16, 0.92)),
    ((0.16, 0.92), (0.16, 0.08)),
    ((0.16, 0.50), (0.84, 0.50)),
];

const GLYPH_ONE: &[Segment] = &[
    ((0.50, 0.08), (0.50, 0.92)),
    ((0.28, 0.26), (0.50, 0.08)),
];

const GLYPH_PLUS: &[Segment] = &[
    ((0.10, 0.50), (0.90, 0.50)),
    ((0.50, 0.10), (0.50, 0.90)),
];

fn dominant_glyph(class: Label) -> &'static [Segment] {
    match class {
        Label::Seven => GLYPH_SEVEN,
        Label::Thirteen => GLYPH_THREE,
        Label::Eighteen => GLYPH_EIGHT,
        Label::NotClassified => &[],
    }
}

/// Glyph boxes in units of the badge radius, relative to the center. The
/// laterals sit outside ±r/2 so the classification crop removes them.
const DOMINANT_BOX: (f64, f64, f64, f64) = (-0.30, -0.55, 0.30, 0.55);
const LATERAL_ONE_BOX: (f64, f64, f64, f64) = (-0.85, -0.25, -0.63, 0.25);
const LATERAL_PLUS_BOX: (f64, f64, f64, f64) = (0.63, -0.25, 0.85, 0.25);

fn distance_to_segment(px: f64, py: f64, seg: &Segment) -> f64 {
    let ((x1, y1), (x2, y2)) = *seg;
    let (dx, dy) = (x2 - x1, y2 - y1);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((px - x1) * dx + (py - y1) * dy) / len_sq).clamp(0.0, 1.0)
    };
    let (cx, cy) = (x1 + t * dx, y1 + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

/// Paints glyph strokes as `value` pixels into `img`. The glyph's unit box is
/// mapped onto the pixel rectangle [bx0, bx1] x [by0, by1].
fn draw_glyph(
    img: &mut BinaryImage,
    glyph: &[Segment],
    bx0: f64,
    by0: f64,
    bx1: f64,
    by1: f64,
    stroke: f64,
    value: bool,
) {
    if glyph.is_empty() {
        return;
    }
    let (bw, bh) = (bx1 - bx0, by1 - by0);
    let x_lo = (bx0 - stroke).floor().max(0.0) as usize;
    let y_lo = (by0 - stroke).floor().max(0.0) as usize;
    let x_hi = ((bx1 + stroke).ceil() as usize).min(img.width().saturating_sub(1));
    let y_hi = ((by1 + stroke).ceil() as usize).min(img.height().saturating_sub(1));
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            // Segments are mapped into pixel space; stroke width is in pixels.
            let hit = glyph.iter().any(|seg| {
                let ((sx1, sy1), (sx2, sy2)) = *seg;
                let pix_seg = ((bx0 + sx1 * bw, by0 + sy1 * bh), (bx0 + sx2 * bw, by0 + sy2 * bh));
                distance_to_segment(x as f64, y as f64, &pix_seg) <= stroke / 2.0
            });
            if hit {
                img.set(x, y, value);
            }
        }
    }
}

/// Rasterizes one badge into a tile. Returns the tile (true = white) and the
/// ground-truth circle in tile coordinates. Outside the disc the tile is
/// false; polarity inverts everything inside the disc.
pub fn render_badge(spec: &BadgeSpec) -> Result<(BinaryImage, Circle), SynthError> {
    if spec.class == Label::NotClassified {
        return Err(SynthError::NotASignClass);
    }
    if spec.radius < MIN_BADGE_RADIUS {
        return Err(SynthError::BadgeTooSmall(spec.radius));
    }
    let r = spec.radius as f64;
    let margin = 2usize;
    let size = 2 * (spec.radius + margin) + 1;
    let c = (spec.radius + margin) as f64;
    let mut tile = BinaryImage::filled(size, size, false);
    // White disc with a black outer ring.
    let inner = r - spec.ring_thickness as f64;
    for y in 0..size {
        for x in 0..size {
            let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
            if d <= inner {
                tile.set(x, y, true);
            }
        }
    }
    let stroke = spec.stroke_width as f64;
    let boxed = |b: (f64, f64, f64, f64)| (c + b.0 * r, c + b.1 * r, c + b.2 * r, c + b.3 * r);
    let (dx0, dy0, dx1, dy1) = boxed(DOMINANT_BOX);
    draw_glyph(&mut tile, dominant_glyph(spec.class), dx0, dy0, dx1, dy1, stroke, false);
    let lateral_stroke = (stroke * 0.75).max(1.5);
    let (px0, py0, px1, py1) = boxed(LATERAL_PLUS_BOX);
    draw_glyph(&mut tile, GLYPH_PLUS, px0, py0, px1, py1, lateral_stroke, false);
    if matches!(spec.class, Label::Thirteen | Label::Eighteen) {
        let (ox0, oy0, ox1, oy1) = boxed(LATERAL_ONE_BOX);
        draw_glyph(&mut tile, GLYPH_ONE, ox0, oy0, ox1, oy1, lateral_stroke, false);
    }
    if spec.polarity == Polarity::Negative {
        for y in 0..size {
            for x in 0..size {
                let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
                if d <= r {
                    tile.set(x, y, !tile.get(x, y));
                }
            }
        }
    }
    Ok((tile, Circle { a0: c, b0: c, r0: r }))
}

/// The classification crop of a badge rendered directly at 80x40 (radius 40
/// makes the crop box exactly 80x40), polarity-normalized. Tests compare the
/// pipeline's crop against this reference.
pub fn reference_glyph(class: Label, polarity: Polarity) -> BinaryImage {
    let spec = BadgeSpec::with_defaults(class, 40, (0, 0), polarity);
    let (tile, circle) = render_badge(&spec).expect("radius 40 is valid");
    let cx = circle.a0 as usize;
    let cy = circle.b0 as usize;
    let in_disc = |tx: usize, ty: usize| {
        // Same disc mask as the pipeline crop: samples past the rim are
        // background and read as black in either polarity.
        let dx = tx as f64 + 0.5 - 20.0;
        let dy = ty as f64 + 0.5 - 40.0;
        dx * dx + dy * dy <= 40.0 * 40.0
    };
    let mut crop = BinaryImage::filled(GLYPH_COLS, GLYPH_ROWS, false);
    for ty in 0..GLYPH_ROWS {
        for tx in 0..GLYPH_COLS {
            if in_disc(tx, ty) {
                crop.set(tx, ty, tile.get(cx - 20 + tx, cy - 40 + ty));
            }
        }
    }
    let (mut normalized, _) = crate::classify::normalize_polarity(crop);
    for ty in 0..GLYPH_ROWS {
        for tx in 0..GLYPH_COLS {
            if !in_disc(tx, ty) {
                normalized.set(tx, ty, false);
            }
        }
    }
    normalized
}

/// Renders a label's text ("7+", "13+", "18+") as a binary mask of the given
/// glyph height, using the same stroke glyphs as the badges. Used by the
/// output annotator.
pub fn label_text_mask(label: Label, glyph_height: usize) -> BinaryImage {
    let glyphs: Vec<&[Segment]> = match label {
        Label::Seven => vec![GLYPH_SEVEN, GLYPH_PLUS],
        Label::Thirteen => vec![GLYPH_ONE, GLYPH_THREE, GLYPH_PLUS],
        Label::Eighteen => vec![GLYPH_ONE, GLYPH_EIGHT, GLYPH_PLUS],
        Label::NotClassified => vec![],
    };
    let glyph_width = glyph_height * 3 / 5;
    let gap = (glyph_width / 4).max(1);
    let width = (glyphs.len().max(1)) * (glyph_width + gap);
    let mut mask = BinaryImage::filled(width, glyph_height.max(2), false);
    let stroke = (glyph_height as f64 / 8.0).max(1.5);
    for (i, glyph) in glyphs.iter().enumerate() {
        let x0 = (i * (glyph_width + gap)) as f64;
        draw_glyph(
            &mut mask,
            glyph,
            x0,
            0.0,
            x0 + glyph_width as f64,
            glyph_height as f64,
            stroke,
            true,
        );
    }
    mask
}

const NOISE_SALT: u64 = 0x9e3779b97f4a7c15;
const DISTRACTOR_SALT: u64 = 0x6a09e667f3bcc908;

/// Renders a frame from its spec: seeded background, optional badge, optional
/// distractor shape and additive Gaussian noise. The noise field depends only
/// on the seed, never on the content, so polarity pairs share it exactly.
pub fn render_frame(spec: &FrameSpec) -> Result<ColorImage, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.width, spec.height);
    let mut gray = vec![0f64; w * h];
    match spec.background {
        Background::Flat => {
            let v = rng.gen_range(90.0..=166.0);
            gray.fill(v);
        }
        Background::Gradient => {
            let v0: f64 = rng.gen_range(60.0..=190.0);
            let v1: f64 = rng.gen_range(60.0..=190.0);
            let horizontal = rng.gen_bool(0.5);
            for y in 0..h {
                for x in 0..w {
                    let t = if horizontal { x as f64 / w as f64 } else { y as f64 / h as f64 };
                    gray[y * w + x] = v0 + (v1 - v0) * t;
                }
            }
        }
        Background::Noise => {
            // Low-frequency blotches: a coarse random grid, bilinearly
            // interpolated. Per-pixel grain is the separate noise_sigma axis.
            let base: f64 = rng.gen_range(100.0..=156.0);
            let cell: usize = rng.gen_range(28..=48);
            let (gw, gh) = (w / cell + 2, h / cell + 2);
            let grid: Vec<f64> =
                (0..gw * gh).map(|_| base + rng.gen_range(-14.0..=14.0)).collect();
            for y in 0..h {
                for x in 0..w {
                    let (fx, fy) = (x as f64 / cell as f64, y as f64 / cell as f64);
                    let (ix, iy) = (fx as usize, fy as usize);
                    let (tx, ty) = (fx - ix as f64, fy - iy as f64);
                    let v00 = grid[iy * gw + ix];
                    let v10 = grid[iy * gw + ix + 1];
                    let v01 = grid[(iy + 1) * gw + ix];
                    let v11 = grid[(iy + 1) * gw + ix + 1];
                    gray[y * w + x] = v00 * (1.0 - tx) * (1.0 - ty)
                        + v10 * tx * (1.0 - ty)
                        + v01 * (1.0 - tx) * ty
                        + v11 * tx * ty;
                }
            }
        }
        Background::Checker => {
            let base: f64 = rng.gen_range(100.0..=150.0);
            let delta: f64 = rng.gen_range(6.0..=11.0);
            let cell: usize = rng.gen_range(16..=48);
            for y in 0..h {
                for x in 0..w {
                    let parity = (x / cell + y / cell) % 2;
                    gray[y * w + x] = if parity == 0 { base } else { base + delta };
                }
            }
        }
    }
    if spec.distractor {
        draw_distractor(&mut gray, w, h, spec.corner, spec.seed);
    }
    if let Some(badge) = &spec.badge {
        let (left, right) = crate::raster::corner_regions(w, h, 0.25, 0.25)
            .expect("default fractions are valid");
        let region = match spec.corner {
            Corner::UpperLeft => left,
            Corner::UpperRight => right,
        };
        let (cx, cy) = badge.center;
        let r = badge.radius;
        let fits = cx >= region.x + r + 1
            && cx + r + 1 <= region.x + region.width
            && cy >= region.y + r + 1
            && cy + r + 1 <= region.y + region.height;
        if !fits {
            return Err(SynthError::BadgeOutOfCorner {
                x: cx,
                y: cy,
                r,
                corner: spec.corner,
            });
        }
        let (tile, circle) = render_badge(badge)?;
        let (tc_x, tc_y) = (circle.a0 as usize, circle.b0 as usize);
        for ty in 0..tile.height() {
            for tx in 0..tile.width() {
                let dx = tx as f64 - circle.a0;
                let dy = ty as f64 - circle.b0;
                if dx * dx + dy * dy > circle.r0 * circle.r0 {
                    continue; // only the disc is composited
                }
                let fx = cx + tx - tc_x;
                let fy = cy + ty - tc_y;
                gray[fy * w + fx] = if tile.get(tx, ty) { 255.0 } else { 0.0 };
            }
        }
    }
    if spec.noise_sigma > 0.0 {
        let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ NOISE_SALT);
        let normal = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
        for v in gray.iter_mut() {
            *v += normal.sample(&mut noise_rng);
        }
    }
    let mut data = Vec::with_capacity(w * h * 3);
    for v in gray {
        let byte = v.round().clamp(0.0, 255.0) as u8;
        data.extend_from_slice(&[byte, byte, byte]);
    }
    Ok(ColorImage::new(w, h, data).expect("buffer sized to dimensions"))
}

/// Filled rectangle or triangle in the corner region; gives the N/C class a
/// real candidate object to train against.
fn draw_distractor(gray: &mut [f64], w: usize, h: usize, corner: Corner, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ DISTRACTOR_SALT);
    let (left, right) = crate::raster::corner_regions(w, h, 0.25, 0.25).expect("valid fractions");
    let region = match corner {
        Corner::UpperLeft => left,
        Corner::UpperRight => right,
    };
    let sw: usize = rng.gen_range(50..=110);
    let sh: usize = rng.gen_range(50..=110);
    let x0 = region.x + rng.gen_range(8..=region.width - sw - 8);
    let y0 = region.y + rng.gen_range(8..=region.height - sh - 8);
    let value: f64 = if rng.gen_bool(0.5) { 15.0 } else { 240.0 };
    let triangle = rng.gen_bool(0.5);
    for y in y0..y0 + sh {
        for x in x0..x0 + sw {
            if triangle {
                // Right triangle: keep pixels under the diagonal.
                let fx = (x - x0) as f64 / sw as f64;
                let fy = (y - y0) as f64 / sh as f64;
                if fx > fy {
                    continue;
                }
            }
            gray[y * w + x] = value;
        }
    }
}

/// One record of `manifest.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: Label,
    pub a0: Option<f64>,
    pub b0: Option<f64>,
    pub r0: Option<f64>,
    pub corner: Corner,
    pub seed: u64,
    pub split: Split,
    pub spec: FrameSpec,
}

impl ManifestEntry {
    pub fn circle(&self) -> Option<Circle> {
        match (self.a0, self.b0, self.r0) {
            (Some(a0), Some(b0), Some(r0)) => Some(Circle { a0, b0, r0 }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn save(&self, path: &Path) -> Result<(), SynthError> {
        let mut file = std::fs::File::create(path)?;
        for entry in &self.entries {
            let line = serde_json::to_string(entry).expect("manifest entries serialize");
            writeln!(file, "{line}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(line).map_err(|e| SynthError::BadManifest {
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        Ok(Self { entries })
    }
}

/// Corpus generation parameters. Defaults mirror the evaluation scale the
/// benchmark harness expects: 18 training samples per class and 43/27/41
/// evaluation samples for 7+/13+/18+.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusConfig {
    pub train_per_class: usize,
    pub eval_counts: [usize; 3],
    pub train_negatives: usize,
    pub eval_negatives: usize,
    pub radius_min: usize,
    pub radius_max: usize,
    pub noise_sigma_max: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            train_per_class: 18,
            eval_counts: [43, 27, 41],
            train_negatives: 18,
            eval_negatives: 24,
            radius_min: 26,
            radius_max: 56,
            noise_sigma_max: 8.0,
            seed: 1,
        }
    }
}

fn mix_seed(seed: u64, index: u64) -> u64 {
    // SplitMix64 step over (seed, index).
    let mut z = seed ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Generates the corpus under `out_dir`: PPM frames in `frames/` plus
/// `manifest.jsonl`. Stratified over polarity, corner, background, radius and
/// noise level; the train/eval split is recorded per entry.
pub fn generate_corpus(cfg: &CorpusConfig, out_dir: &Path) -> Result<CorpusManifest, SynthError> {
    if cfg.train_per_class == 0 || cfg.eval_counts.iter().any(|&c| c == 0) {
        return Err(SynthError::ZeroCount);
    }
    let frames_dir = out_dir.join("frames");
    std::fs::create_dir_all(&frames_dir)?;
    let mut manifest = CorpusManifest::default();
    let mut counter = 0u64;
    let sigma_levels = [0.0, 0.35, 0.6, 1.0].map(|f| f * cfg.noise_sigma_max);

    let emit = |spec: FrameSpec,
                    label: Label,
                    circle: Option<Circle>,
                    split: Split,
                    name: String,
                    manifest: &mut CorpusManifest|
     -> Result<(), SynthError> {
        let frame = render_frame(&spec)?;
        let rel = format!("frames/{name}.ppm");
        std::fs::write(out_dir.join(&rel), write_ppm(&frame))?;
        manifest.entries.push(ManifestEntry {
            path: rel,
            label,
            a0: circle.map(|c| c.a0),
            b0: circle.map(|c| c.b0),
            r0: circle.map(|c| c.r0),
            corner: spec.corner,
            seed: spec.seed,
            split,
            spec,
        });
        Ok(())
    };

    for (split, per_class) in [
        (Split::Train, [cfg.train_per_class; 3]),
        (Split::Eval, cfg.eval_counts),
    ] {
        for (class_idx, class) in Label::SIGN_CLASSES.into_iter().enumerate() {
            let count = per_class[class_idx];
            for i in 0..count {
                counter += 1;
                let seed = mix_seed(cfg.seed, counter);
                let polarity = if i % 2 == 0 { Polarity::Positive } else { Polarity::Negative };
                let corner = if (i / 2) % 2 == 0 { Corner::UpperLeft } else { Corner::UpperRight };
                let background = Background::ALL[i % 4];
                let sigma = sigma_levels[(i / 4) % 4];
                let radius = cfg.radius_min
                    + (cfg.radius_max - cfg.radius_min) * i / count.max(2).saturating_sub(1);
                let (badge, circle) = place_badge(class, radius, corner, polarity, seed);
                let spec = FrameSpec {
                    badge: Some(badge),
                    distractor: false,
                    ..FrameSpec::broadcast(background, corner, sigma, seed)
                };
                let name = format!("{:?}_{}_{}", split, label_slug(class), i);
                emit(spec, class, Some(circle), split, name, &mut manifest)?;
            }
        }
        let negatives = match split {
            Split::Train => cfg.train_negatives,
            Split::Eval => cfg.eval_negatives,
        };
        for i in 0..negatives {
            counter += 1;
            let seed = mix_seed(cfg.seed, counter);
            let corner = if i % 2 == 0 { Corner::UpperLeft } else { Corner::UpperRight };
            let background = Background::ALL[i % 4];
            let sigma = sigma_levels[(i / 4) % 4];
            // Negatives alternate between distractor shapes and bare
            // background texture so the N/C class sees both kinds of
            // spurious candidate.
            let distractor = i % 2 == 0;
            let spec = FrameSpec {
                distractor,
                ..FrameSpec::broadcast(background, corner, sigma, seed)
            };
            let name = format!("{split:?}_nc_{i}");
            emit(spec, Label::NotClassified, None, split, name, &mut manifest)?;
        }
    }
    manifest.save(&out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}

fn label_slug(label: Label) -> &'static str {
    match label {
        Label::Seven => "7plus",
        Label::Thirteen => "13plus",
        Label::Eighteen => "18plus",
        Label::NotClassified => "nc",
    }
}

/// Places a badge of the given radius inside the corner region, jittering the
/// center deterministically from the seed.
pub fn place_badge(
    class: Label,
    radius: usize,
    corner: Corner,
    polarity: Polarity,
    seed: u64,
) -> (BadgeSpec, Circle) {
    let (left, right) = crate::raster::corner_regions(FRAME_WIDTH, FRAME_HEIGHT, 0.25, 0.25)
        .expect("default fractions");
    let region = match corner {
        Corner::UpperLeft => left,
        Corner::UpperRight => right,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bd1e995);
    let margin = radius + 2;
    let cx = region.x + rng.gen_range(margin..region.width - margin);
    let cy = region.y + rng.gen_range(margin..region.height - margin);
    let spec = BadgeSpec::with_defaults(class, radius, (cx, cy), polarity);
    (spec, Circle { a0: cx as f64, b0: cy as f64, r0: radius as f64 })
}

/// One sign window in a generated stream schedule.
#[derive(Debug, Clone, Copy)]
pub struct StreamWindow {
    pub start: f64,
    pub duration: f64,
    pub class: Label,
    pub corner: Corner,
}

/// Schedule record: at time `t` the source shows the frame at `path`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub t: f64,
    pub path: String,
}

/// Generates a frame schedule under `out_dir` (frames at `interval` spacing
/// plus `schedule.jsonl`) with sign badges visible during the given windows.
pub fn generate_stream_schedule(
    out_dir: &Path,
    seed: u64,
    duration: f64,
    interval: f64,
    noise_sigma: f64,
    windows: &[StreamWindow],
) -> Result<PathBuf, SynthError> {
    let frames_dir = out_dir.join("stream_frames");
    std::fs::create_dir_all(&frames_dir)?;
    let mut entries = Vec::new();
    let mut index = 0u64;
    let mut t = 0.0;
    while t <= duration {
        index += 1;
        let frame_seed = mix_seed(seed, 0xffff_0000 | index);
        let window = windows
            .iter()
            .find(|w| t >= w.start && t < w.start + w.duration);
        let spec = match window {
            Some(w) => {
                let (badge, _) =
                    place_badge(w.class, 36, w.corner, Polarity::Positive, frame_seed);
                FrameSpec {
                    badge: Some(badge),
                    ..FrameSpec::broadcast(Background::Flat, w.corner, noise_sigma, frame_seed)
                }
            }
            None => FrameSpec::broadcast(Background::Flat, Corner::UpperLeft, noise_sigma, frame_seed),
        };
        let frame = render_frame(&spec)?;
        let rel = format!("stream_frames/t{index:04}.ppm");
        std::fs::write(out_dir.join(&rel), write_ppm(&frame))?;
        entries.push(ScheduleEntry { t, path: rel });
        t += interval;
    }
    let schedule_path = out_dir.join("schedule.jsonl");
    let mut file = std::fs::File::create(&schedule_path)?;
    for entry in &entries {
        writeln!(file, "{}", serde_json::to_string(entry).expect("schedule serializes"))?;
    }
    Ok(schedule_path)
}
