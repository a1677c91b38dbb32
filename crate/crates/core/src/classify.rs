//! Glyph normalization, row-scan feature extraction, and the 80→15→4
//! perceptron trained by plain backpropagation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circle::Circle;
use crate::raster::BinaryImage;

pub const GLYPH_ROWS: usize = 80;
pub const GLYPH_COLS: usize = 40;
pub const INPUT_SIZE: usize = 80;
pub const HIDDEN_SIZE: usize = 15;
pub const OUTPUT_SIZE: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifyError {
    #[error("circle radius {0} too small to crop a glyph")]
    DegenerateCircle(f64),
    #[error("crop must be {GLYPH_ROWS}x{GLYPH_COLS}, got {rows}x{cols}")]
    BadCropSize { rows: usize, cols: usize },
    #[error("empty training dataset")]
    EmptyDataset,
    #[error("training loss became non-finite at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("invalid training config: {0}")]
    BadConfig(&'static str),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelIoError {
    #[error("bad magic")]
    BadMagic,
    #[error("shape mismatch: file has {input}->{hidden}->{output}")]
    ShapeMismatch { input: u32, hidden: u32, output: u32 },
    #[error("truncated model file")]
    Truncated,
}

/// Classification outcome for a glyph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "7+")]
    Seven,
    #[serde(rename = "13+")]
    Thirteen,
    #[serde(rename = "18+")]
    Eighteen,
    #[serde(rename = "N/C")]
    NotClassified,
}

impl Label {
    pub const SIGN_CLASSES: [Label; 3] = [Label::Seven, Label::Thirteen, Label::Eighteen];
    pub const ALL: [Label; 4] =
        [Label::Seven, Label::Thirteen, Label::Eighteen, Label::NotClassified];

    pub fn index(self) -> usize {
        match self {
            Label::Seven => 0,
            Label::Thirteen => 1,
            Label::Eighteen => 2,
            Label::NotClassified => 3,
        }
    }

    pub fn from_index(i: usize) -> Label {
        Label::ALL[i]
    }

    pub fn one_hot(self) -> [f64; OUTPUT_SIZE] {
        let mut t = [0.0; OUTPUT_SIZE];
        t[self.index()] = 1.0;
        t
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Label::Seven => "7+",
            Label::Thirteen => "13+",
            Label::Eighteen => "18+",
            Label::NotClassified => "N/C",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "7+" => Ok(Label::Seven),
            "13+" => Ok(Label::Thirteen),
            "18+" => Ok(Label::Eighteen),
            "N/C" | "NC" => Ok(Label::NotClassified),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Normalized 80x40 glyph crop; `true` is white.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphCrop {
    pub mask: BinaryImage,
    pub inverted: bool,
}

/// Per-row counts of leading black pixels, each in [0, 40].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector(pub [u8; INPUT_SIZE]);

impl FeatureVector {
    /// Counts scaled into [0, 1] for the network input.
    pub fn as_inputs(&self) -> [f64; INPUT_SIZE] {
        let mut out = [0.0; INPUT_SIZE];
        for (o, &c) in out.iter_mut().zip(self.0.iter()) {
            *o = f64::from(c) / GLYPH_COLS as f64;
        }
        out
    }
}

/// Crops the glyph box around the detected circle (±r0 vertically, ±r0/2
/// horizontally), resizes to 80x40 by nearest neighbor, normalizes polarity
/// and thins the result.
pub fn glyph_crop(mask: &BinaryImage, circle: &Circle) -> Result<GlyphCrop, ClassifyError> {
    if circle.r0 < 4.0 {
        return Err(ClassifyError::DegenerateCircle(circle.r0));
    }
    let x0 = circle.a0 - circle.r0 / 2.0;
    let y0 = circle.b0 - circle.r0;
    let src_w = circle.r0;
    let src_h = 2.0 * circle.r0;
    let mut crop = BinaryImage::filled(GLYPH_COLS, GLYPH_ROWS, false);
    let mut in_disc = BinaryImage::filled(GLYPH_COLS, GLYPH_ROWS, false);
    for ty in 0..GLYPH_ROWS {
        for tx in 0..GLYPH_COLS {
            let sx = x0 + (tx as f64 + 0.5) * src_w / GLYPH_COLS as f64;
            let sy = y0 + (ty as f64 + 0.5) * src_h / GLYPH_ROWS as f64;
            // Samples past the rim belong to the background, not the sign;
            // they read as black so the crop only depends on the disc.
            let dx = sx - circle.a0;
            let dy = sy - circle.b0;
            if dx * dx + dy * dy > circle.r0 * circle.r0 {
                continue;
            }
            in_disc.set(tx, ty, true);
            let (sx, sy) = (sx.floor(), sy.floor());
            // Out-of-bounds samples read as black (zero padding).
            if sx >= 0.0 && sy >= 0.0 && (sx as usize) < mask.width() && (sy as usize) < mask.height()
            {
                crop.set(tx, ty, mask.get(sx as usize, sy as usize));
            }
        }
    }
    let (mut normalized, inverted) = normalize_polarity(crop);
    if inverted {
        // Inversion flips the masked background back to white; re-mask so
        // both polarities land on the same crop.
        for ty in 0..GLYPH_ROWS {
            for tx in 0..GLYPH_COLS {
                if !in_disc.get(tx, ty) {
                    normalized.set(tx, ty, false);
                }
            }
        }
    }
    Ok(GlyphCrop { mask: zhang_suen_thin(&normalized), inverted })
}

/// If the leftmost column is majority-white the background reads white, so
/// every pixel is inverted; the flag records the choice.
pub fn normalize_polarity(crop: BinaryImage) -> (BinaryImage, bool) {
    let white = (0..crop.height()).filter(|&y| crop.get(0, y)).count();
    if white * 2 > crop.height() {
        let inverted = crop.inverted();
        (inverted, true)
    } else {
        (crop, false)
    }
}

/// Zhang-Suen thinning: erodes the white (true) region down to a one-pixel
/// wide skeleton. Two sub-iterations per pass until stable.
pub fn zhang_suen_thin(img: &BinaryImage) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    let mut out = img.clone();
    let mut to_clear: Vec<(usize, usize)> = Vec::new();
    loop {
        let mut changed = false;
        for step in 0..2 {
            to_clear.clear();
            for y in 1..h.saturating_sub(1) {
                for x in 1..w.saturating_sub(1) {
                    if !out.get(x, y) {
                        continue;
                    }
                    // Neighbors p2..p9 clockwise from north.
                    let p = [
                        out.get(x, y - 1),
                        out.get(x + 1, y - 1),
                        out.get(x + 1, y),
                        out.get(x + 1, y + 1),
                        out.get(x, y + 1),
                        out.get(x - 1, y + 1),
                        out.get(x - 1, y),
                        out.get(x - 1, y - 1),
                    ];
                    let b: usize = p.iter().filter(|&&v| v).count();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
                    if a != 1 {
                        continue;
                    }
                    let (c1, c2) = if step == 0 {
                        (p[0] && p[2] && p[4], p[2] && p[4] && p[6])
                    } else {
                        (p[0] && p[2] && p[6], p[0] && p[4] && p[6])
                    };
                    if !c1 && !c2 {
                        to_clear.push((x, y));
                    }
                }
            }
            for &(x, y) in &to_clear {
                out.set(x, y, false);
                changed = true;
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Per row: the column index of the first white pixel, or 40 when the row has
/// none.
pub fn extract_features(crop: &GlyphCrop) -> Result<FeatureVector, ClassifyError> {
    let mask = &crop.mask;
    if mask.height() != GLYPH_ROWS || mask.width() != GLYPH_COLS {
        return Err(ClassifyError::BadCropSize { rows: mask.height(), cols: mask.width() });
    }
    let mut counts = [0u8; INPUT_SIZE];
    for y in 0..GLYPH_ROWS {
        counts[y] = (0..GLYPH_COLS)
            .find(|&x| mask.get(x, y))
            .unwrap_or(GLYPH_COLS) as u8;
    }
    Ok(FeatureVector(counts))
}

/// Three-layer perceptron with logistic activations. The canonical
/// architecture is 80→15→4 but the dimensions stay general so small random
/// networks can be gradient-checked.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    /// Hidden weights, hidden x input row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Output weights, output x hidden row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl MlpModel {
    pub fn new_seeded(input: usize, hidden: usize, output: usize, seed: u64, init_range: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-init_range..=init_range)).collect()
        };
        Self {
            input,
            hidden,
            output,
            w1: draw(hidden * input),
            b1: draw(hidden),
            w2: draw(output * hidden),
            b2: draw(output),
        }
    }

    pub fn canonical(seed: u64, init_range: f64) -> Self {
        Self::new_seeded(INPUT_SIZE, HIDDEN_SIZE, OUTPUT_SIZE, seed, init_range)
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let hidden = self.hidden_activations(x);
        self.output_activations(&hidden)
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.input..(j + 1) * self.input];
                let sum: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
                logistic(sum + self.b1[j])
            })
            .collect()
    }

    fn output_activations(&self, hidden: &[f64]) -> Vec<f64> {
        (0..self.output)
            .map(|k| {
                let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
                let sum: f64 = row.iter().zip(hidden).map(|(w, v)| w * v).sum();
                logistic(sum + self.b2[k])
            })
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
            .collect()
    }
}

/// Mean squared error over all samples and output units.
pub fn mse(model: &MlpModel, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        let y = model.forward(x);
        total += y.iter().zip(t).map(|(yi, ti)| (yi - ti) * (yi - ti)).sum::<f64>();
    }
    total / (inputs.len() * model.output) as f64
}

/// Flat gradient of `mse` in the same parameter order as `MlpModel` fields:
/// w1, b1, w2, b2.
pub fn mse_gradient(model: &MlpModel, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Vec<f64> {
    let mut gw1 = vec![0.0; model.w1.len()];
    let mut gb1 = vec![0.0; model.b1.len()];
    let mut gw2 = vec![0.0; model.w2.len()];
    let mut gb2 = vec![0.0; model.b2.len()];
    let norm = 2.0 / (inputs.len() * model.output) as f64;
    for (x, t) in inputs.iter().zip(targets) {
        let hidden = model.hidden_activations(x);
        let y = model.output_activations(&hidden);
        // delta at the output: dE/dnet = (y - t) * y * (1 - y)
        let delta_out: Vec<f64> = y
            .iter()
            .zip(t)
            .map(|(yi, ti)| norm * (yi - ti) * yi * (1.0 - yi))
            .collect();
        for k in 0..model.output {
            for j in 0..model.hidden {
                gw2[k * model.hidden + j] += delta_out[k] * hidden[j];
            }
            gb2[k] += delta_out[k];
        }
        for j in 0..model.hidden {
            let back: f64 = (0..model.output)
                .map(|k| delta_out[k] * model.w2[k * model.hidden + j])
                .sum();
            let delta = back * hidden[j] * (1.0 - hidden[j]);
            for i in 0..model.input {
                gw1[j * model.input + i] += delta * x[i];
            }
            gb1[j] += delta;
        }
    }
    gw1.into_iter().chain(gb1).chain(gw2).chain(gb2).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub target_mse: f64,
    pub seed: u64,
    pub init_range: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.5, max_epochs: 5000, target_mse: 0.01, seed: 1, init_range: 0.5 }
    }
}

/// Full-batch gradient descent on the canonical 80→15→4 network. Returns the
/// trained model and the per-epoch error curve. Deterministic for a fixed
/// seed, config and dataset.
pub fn mlp_train(
    dataset: &[(FeatureVector, [f64; OUTPUT_SIZE])],
    cfg: &TrainConfig,
) -> Result<(MlpModel, Vec<f64>), ClassifyError> {
    let inputs: Vec<Vec<f64>> = dataset.iter().map(|(f, _)| f.as_inputs().to_vec()).collect();
    let targets: Vec<Vec<f64>> = dataset.iter().map(|(_, t)| t.to_vec()).collect();
    let model = MlpModel::canonical(cfg.seed, cfg.init_range);
    mlp_train_raw(model, &inputs, &targets, cfg)
}

pub fn mlp_train_raw(
    mut model: MlpModel,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<(MlpModel, Vec<f64>), ClassifyError> {
    if inputs.is_empty() {
        return Err(ClassifyError::EmptyDataset);
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(ClassifyError::BadConfig("learning rate must be positive"));
    }
    if !(cfg.target_mse > 0.0) {
        return Err(ClassifyError::BadConfig("target MSE must be positive"));
    }
    let mut curve = Vec::new();
    for epoch in 0..cfg.max_epochs {
        let gradient = mse_gradient(&model, inputs, targets);
        for (param, g) in model.params_mut().into_iter().zip(&gradient) {
            *param -= cfg.learning_rate * g;
        }
        let error = mse(&model, inputs, targets);
        if !error.is_finite() {
            return Err(ClassifyError::NonFiniteLoss(epoch));
        }
        curve.push(error);
        if error <= cfg.target_mse {
            break;
        }
    }
    Ok((model, curve))
}

/// Argmax over the 4 outputs; falls back to N/C when the winning activation
/// is below the rejection threshold.
pub fn classify_features(
    model: &MlpModel,
    features: &FeatureVector,
    reject_threshold: f64,
) -> (Label, [f64; OUTPUT_SIZE]) {
    let y = model.forward(&features.as_inputs());
    let mut activations = [0.0; OUTPUT_SIZE];
    activations.copy_from_slice(&y);
    (decide(&activations, reject_threshold), activations)
}

pub fn decide(activations: &[f64; OUTPUT_SIZE], reject_threshold: f64) -> Label {
    let (best, &max) = activations
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
        .unwrap();
    if max < reject_threshold {
        Label::NotClassified
    } else {
        Label::from_index(best)
    }
}

const MODEL_MAGIC: &[u8; 8] = b"AGSMLP\x01\x00";

/// Serializes the model: magic, layer shapes as little-endian u32, then all
/// weights and biases as little-endian f64 in w1, b1, w2, b2 order.
pub fn save_model(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    for dim in [model.input, model.hidden, model.output] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for v in model.w1.iter().chain(&model.b1).chain(&model.w2).chain(&model.b2) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Loads a model, enforcing the canonical 80→15→4 architecture.
pub fn load_model(bytes: &[u8]) -> Result<MlpModel, ModelIoError> {
    if bytes.len() < 8 || &bytes[..8] != MODEL_MAGIC {
        return Err(ModelIoError::BadMagic);
    }
    let mut cursor = 8usize;
    let read_u32 = |cursor: &mut usize| -> Result<u32, ModelIoError> {
        let slice = bytes.get(*cursor..*cursor + 4).ok_or(ModelIoError::Truncated)?;
        *cursor += 4;
        Ok(u32::from_le_bytes(slice.try_into().unwrap()))
    };
    let input = read_u32(&mut cursor)?;
    let hidden = read_u32(&mut cursor)?;
    let output = read_u32(&mut cursor)?;
    if (input, hidden, output) != (INPUT_SIZE as u32, HIDDEN_SIZE as u32, OUTPUT_SIZE as u32) {
        return Err(ModelIoError::ShapeMismatch { input, hidden, output });
    }
    let (input, hidden, output) = (input as usize, hidden as usize, output as usize);
    let counts = [hidden * input, hidden, output * hidden, output];
    let mut sections: Vec<Vec<f64>> = Vec::new();
    for count in counts {
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            let slice = bytes.get(cursor..cursor + 8).ok_or(ModelIoError::Truncated)?;
            cursor += 8;
            values.push(f64::from_le_bytes(slice.try_into().unwrap()));
        }
        sections.push(values);
    }
    let b2 = sections.pop().unwrap();
    let w2 = sections.pop().unwrap();
    let b1 = sections.pop().unwrap();
    let w1 = sections.pop().unwrap();
    Ok(MlpModel { input, hidden, output, w1, b1, w2, b2 })
}
