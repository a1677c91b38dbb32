//! Pre-processing chain that isolates the candidate sign in a corner crop:
//! Sobel edge binarization, closed-object filling, connected component
//! labeling and largest-object selection.

use thiserror::Error;

use crate::raster::{BinaryImage, GrayImage};

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("image {width}x{height} too small for a 3x3 filter")]
    ImageTooSmall { width: usize, height: usize },
    #[error("invalid edge threshold fraction {0} (must be in (0, 1])")]
    BadThresholdFraction(f64),
    #[error("no component reaches the minimum area {min_area}")]
    NoCandidate { min_area: usize },
    #[error("mask has no foreground pixels")]
    EmptyMask,
}

/// Relative edge threshold, applied to the maximum gradient magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeParams {
    pub threshold_fraction: f64,
}

impl EdgeParams {
    pub fn new(threshold_fraction: f64) -> Result<Self, PreprocessError> {
        if !(threshold_fraction > 0.0 && threshold_fraction <= 1.0) {
            return Err(PreprocessError::BadThresholdFraction(threshold_fraction));
        }
        Ok(Self { threshold_fraction })
    }
}

impl Default for EdgeParams {
    fn default() -> Self {
        Self { threshold_fraction: 0.2 }
    }
}

/// Connected components of a binary image, labeled 1..=count in row-major
/// first-encounter order; 0 is background.
#[derive(Debug, Clone)]
pub struct LabeledComponents {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    areas: Vec<usize>,
}

impl LabeledComponents {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.areas.len()
    }

    /// Pixel count of component `label` (1-based).
    pub fn area(&self, label: u32) -> usize {
        self.areas[label as usize - 1]
    }

    pub fn areas(&self) -> &[usize] {
        &self.areas
    }
}

/// The selected candidate sign object.
#[derive(Debug, Clone)]
pub struct CandidateObject {
    pub mask: BinaryImage,
    pub area: usize,
    /// (min_x, min_y, max_x, max_y), inclusive.
    pub bounding_box: (usize, usize, usize, usize),
    pub boundary: Vec<(usize, usize)>,
}

/// Squared gradient magnitudes with the standard 3x3 Sobel kernels, saturated
/// at u16::MAX, plus the maximum over the image. The 1-pixel border is set to
/// 0. The saturation loses nothing: every square at or above 64771 already
/// maps to magnitude 255, and the relative-threshold cut never exceeds that.
fn sobel_squared(img: &GrayImage) -> Result<(Vec<u16>, u16), PreprocessError> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(PreprocessError::ImageTooSmall { width: w, height: h });
    }
    let src = img.data();
    let mut data = vec![0u16; w * h];
    let mut max = 0u16;
    // Separable form: both kernels factor into a vertical and a horizontal
    // [1, 2, 1] / [-1, 0, 1] pass, and with the pairwise row sums
    // s[y][x] = p(y, x) + p(y+1, x) the vertical factors are
    // a = s[y-1] + s[y] (smooth) and b = s[y] - s[y-1] (difference).
    let mut s_prev: Vec<i32> = src[..w]
        .iter()
        .zip(&src[w..2 * w])
        .map(|(&u, &m)| i32::from(u) + i32::from(m))
        .collect();
    let mut s_cur = vec![0i32; w];
    let mut a = vec![0i32; w];
    let mut b = vec![0i32; w];
    for y in 1..h - 1 {
        let row = &src[y * w..(y + 1) * w];
        let below = &src[(y + 1) * w..(y + 2) * w];
        for x in 0..w {
            s_cur[x] = i32::from(row[x]) + i32::from(below[x]);
            a[x] = s_prev[x] + s_cur[x];
            b[x] = s_cur[x] - s_prev[x];
        }
        std::mem::swap(&mut s_prev, &mut s_cur);
        let out_row = &mut data[y * w + 1..(y + 1) * w - 1];
        for (x, out) in out_row.iter_mut().enumerate().map(|(i, o)| (i + 1, o)) {
            let gx = a[x + 1] - a[x - 1];
            let gy = b[x - 1] + 2 * b[x] + b[x + 1];
            let sq = (gx * gx + gy * gy).min(i32::from(u16::MAX)) as u16;
            max = max.max(sq);
            *out = sq;
        }
    }
    Ok((data, max))
}

/// Rounded square root of a squared magnitude, clamped to 255. Squares up to
/// 255.5^2 = 65280.25 stay exact in f32, and the rounded root is at least
/// half a unit from any representable midpoint.
fn magnitude_of_square(sq: u16) -> u8 {
    if sq >= 64771 {
        255
    } else {
        (f32::from(sq)).sqrt().round() as u8
    }
}

/// Gradient magnitude with the standard 3x3 Sobel kernels, clamped to 255.
/// The 1-pixel border is set to 0.
pub fn sobel_magnitude(img: &GrayImage) -> Result<GrayImage, PreprocessError> {
    let (sq, _) = sobel_squared(img)?;
    let data = sq.into_iter().map(magnitude_of_square).collect();
    Ok(GrayImage::new(img.width(), img.height(), data).expect("buffer sized to dimensions"))
}

/// Fused Sobel + relative threshold, equivalent to `threshold_edges` applied
/// to `sobel_magnitude`. Works on squared magnitudes: with byte threshold t,
/// round(sqrt(sq)) >= t exactly when sq >= t^2 - t + 1, so no per-pixel
/// square root is needed.
pub fn sobel_edges(img: &GrayImage, params: &EdgeParams) -> Result<BinaryImage, PreprocessError> {
    let (w, h) = (img.width(), img.height());
    let (sq, sq_max) = sobel_squared(img)?;
    let max = magnitude_of_square(sq_max);
    if max == 0 {
        return Ok(BinaryImage::filled(w, h, false));
    }
    let t = u32::from((params.threshold_fraction * f64::from(max)).ceil().min(255.0) as u8);
    let cut = (t * t - t + 1) as u16;
    let data: Vec<bool> = sq.into_iter().map(|v| v >= cut).collect();
    Ok(BinaryImage::new(w, h, data).expect("dimensions preserved"))
}

/// Row-major maximal runs of edge pixels: the run-based counterpart of a
/// binary edge map, shared by `sobel_edge_runs` and `edge_runs_of`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeRuns {
    pub width: usize,
    pub height: usize,
    /// (row, x_lo, x_hi), inclusive, sorted by row then x_lo.
    pub runs: Vec<(u32, u32, u32)>,
    /// Index of each row's first run in `runs`, plus a trailing total.
    pub row_starts: Vec<u32>,
}

impl EdgeRuns {
    pub fn to_image(&self) -> BinaryImage {
        let mut data = vec![false; self.width * self.height];
        for &(y, lo, hi) in &self.runs {
            let base = y as usize * self.width;
            data[base + lo as usize..=base + hi as usize].fill(true);
        }
        BinaryImage::new(self.width, self.height, data).expect("buffer sized to dimensions")
    }
}

/// Extracts the edge runs of a binary image; inverse of `EdgeRuns::to_image`.
pub fn edge_runs_of(edges: &BinaryImage) -> EdgeRuns {
    let (w, h) = (edges.width(), edges.height());
    let src = edges.data();
    let mut runs = Vec::with_capacity(w * h / 16);
    let mut row_starts = Vec::with_capacity(h + 1);
    for y in 0..h {
        row_starts.push(runs.len() as u32);
        let row = &src[y * w..(y + 1) * w];
        let mut x = 0;
        while x < w {
            if !row[x] {
                x += 1;
                continue;
            }
            let lo = x;
            while x < w && row[x] {
                x += 1;
            }
            runs.push((y as u32, lo as u32, (x - 1) as u32));
        }
    }
    row_starts.push(runs.len() as u32);
    EdgeRuns { width: w, height: h, runs, row_starts }
}

/// Like `sobel_edges` but emits the edge runs directly, skipping the binary
/// image round trip; this is the detection pipeline's hot path.
pub fn sobel_edge_runs(img: &GrayImage, params: &EdgeParams) -> Result<EdgeRuns, PreprocessError> {
    let (w, h) = (img.width(), img.height());
    let (sq, sq_max) = sobel_squared(img)?;
    let max = magnitude_of_square(sq_max);
    let mut runs = Vec::with_capacity(w * h / 16);
    let mut row_starts = Vec::with_capacity(h + 1);
    if max == 0 {
        row_starts.resize(h + 1, 0);
        return Ok(EdgeRuns { width: w, height: h, runs, row_starts });
    }
    let t = u32::from((params.threshold_fraction * f64::from(max)).ceil().min(255.0) as u8);
    let cut = (t * t - t + 1) as u16;
    // The threshold verdicts flip unpredictably from pixel to pixel on noisy
    // frames, so a pixel-at-a-time scan stalls on branch misses. The verdicts
    // are materialized as 0/1 bytes (a branch-free, vectorizable map), packed
    // into bit words, and the run extraction then only loops per transition.
    // The multiplier gathers the low bit of each of 8 bytes into the top
    // byte: byte k lands on bit 56 + k, and no two partial products collide.
    const GATHER: u64 = 0x0102_0408_1020_4080;
    let pack8 = |vals: &[u16]| {
        let mut chunk = [0u8; 8];
        for (b, &v) in chunk.iter_mut().zip(vals) {
            *b = u8::from(v >= cut);
        }
        u64::from_le_bytes(chunk).wrapping_mul(GATHER) >> 56
    };
    let n_words = w.div_ceil(64);
    let mut words = vec![0u64; n_words];
    let mut trans: Vec<u32> = Vec::with_capacity(w);
    for y in 0..h {
        row_starts.push(runs.len() as u32);
        let row = &sq[y * w..(y + 1) * w];
        words.fill(0);
        let mut groups = row.chunks_exact(8);
        for (g, chunk) in (&mut groups).enumerate() {
            words[g >> 3] |= pack8(chunk) << ((g & 7) * 8);
        }
        let tail = groups.remainder();
        if !tail.is_empty() {
            let g = w / 8;
            words[g >> 3] |= pack8(tail) << ((g & 7) * 8);
        }
        // Positions where the verdict flips, via XOR with the 1-shifted
        // bits; consecutive flips pair up into run [start, end) bounds.
        trans.clear();
        let mut carry = 0u64;
        for (wi, &bits) in words.iter().enumerate() {
            let mut flips = bits ^ ((bits << 1) | carry);
            carry = bits >> 63;
            while flips != 0 {
                trans.push(((wi as u32) << 6) | flips.trailing_zeros());
                flips &= flips - 1;
            }
        }
        if trans.len() % 2 == 1 {
            trans.push(w as u32);
        }
        for pair in trans.chunks_exact(2) {
            runs.push((y as u32, pair[0], pair[1] - 1));
        }
    }
    row_starts.push(runs.len() as u32);
    Ok(EdgeRuns { width: w, height: h, runs, row_starts })
}

/// Pixel is foreground iff magnitude >= fraction * max(magnitude).
/// All-false when the maximum is 0.
pub fn threshold_edges(mag: &GrayImage, params: &EdgeParams) -> BinaryImage {
    let max = mag.data().iter().copied().max().unwrap_or(0);
    if max == 0 {
        return BinaryImage::filled(mag.width(), mag.height(), false);
    }
    // v >= fraction * max over integers reduces to a byte comparison.
    let threshold = (params.threshold_fraction * f64::from(max)).ceil().min(255.0) as u8;
    let data: Vec<bool> = mag.data().iter().map(|&v| v >= threshold).collect();
    BinaryImage::new(mag.width(), mag.height(), data).expect("dimensions preserved")
}

/// Union-find root lookup with path halving; shared by the run-based fill
/// and labeling passes below.
fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        parent[i as usize] = parent[parent[i as usize] as usize];
        i = parent[i as usize];
    }
    i
}

/// Splits each row of `img` into maximal runs of pixels equal to `value` and
/// merges runs that touch across adjacent rows. Two runs touch when their
/// column ranges, widened by `slack` (0 for 4-connectivity, 1 for
/// 8-connectivity), overlap. Returns the runs as (row, x_lo, x_hi) inclusive
/// plus the union-find parent array over run indices.
fn merge_runs(img: &BinaryImage, value: bool, slack: usize) -> (Vec<(u32, u32, u32)>, Vec<u32>) {
    let (w, h) = (img.width(), img.height());
    let src = img.data();
    let mut runs: Vec<(u32, u32, u32)> = Vec::new();
    let mut parent: Vec<u32> = Vec::new();
    let mut prev = 0..0usize;
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let row_start = runs.len();
        let mut above = prev.start;
        let mut x = 0;
        while x < w {
            if row[x] != value {
                x += 1;
                continue;
            }
            let lo = x;
            while x < w && row[x] == value {
                x += 1;
            }
            let hi = x - 1;
            let run = runs.len() as u32;
            parent.push(run);
            runs.push((y as u32, lo as u32, hi as u32));
            // Runs within a row are ordered by x, so the overlap window in
            // the previous row only ever advances.
            while above < prev.end && (runs[above].2 as usize) + slack < lo {
                above += 1;
            }
            let mut probe = above;
            while probe < prev.end && (runs[probe].1 as usize) <= hi + slack {
                let a = find(&mut parent, run);
                let b = find(&mut parent, probe as u32);
                if a != b {
                    parent[a.max(b) as usize] = a.min(b);
                }
                probe += 1;
            }
        }
        prev = row_start..runs.len();
    }
    (runs, parent)
}

/// Fills enclosed background: background runs are merged 4-connected, and a
/// run stays background only when its component touches the image border.
pub fn fill_holes(edges: &BinaryImage) -> BinaryImage {
    let (w, h) = (edges.width(), edges.height());
    let (runs, mut parent) = merge_runs(edges, false, 0);
    let mut outside = vec![false; runs.len()];
    for (i, &(y, lo, hi)) in runs.iter().enumerate() {
        if y == 0 || y as usize == h - 1 || lo == 0 || hi as usize == w - 1 {
            let root = find(&mut parent, i as u32) as usize;
            outside[root] = true;
        }
    }
    let mut data = edges.data().to_vec();
    for (i, &(y, lo, hi)) in runs.iter().enumerate() {
        if !outside[find(&mut parent, i as u32) as usize] {
            let base = y as usize * w;
            data[base + lo as usize..=base + hi as usize].fill(true);
        }
    }
    BinaryImage::new(w, h, data).expect("dimensions preserved")
}

/// 8-connectivity labeling; label 1 goes to the first foreground pixel in
/// row-major scan order.
pub fn label_components(filled: &BinaryImage) -> LabeledComponents {
    // Foreground runs merged 8-connected; merged roots are then numbered in
    // row-major first-encounter order, which is the order of their first run.
    let (runs, parent) = merge_runs(filled, true, 1);
    label_runs(filled.width(), filled.height(), &runs, parent)
}

/// Numbers the merged run roots in row-major first-encounter order and paints
/// the per-pixel label buffer.
fn label_runs(w: usize, h: usize, runs: &[(u32, u32, u32)], mut parent: Vec<u32>) -> LabeledComponents {
    let mut labels = vec![0u32; w * h];
    let mut areas = Vec::new();
    let mut root_label = vec![0u32; runs.len()];
    for i in 0..runs.len() {
        let root = find(&mut parent, i as u32) as usize;
        if root_label[root] == 0 {
            areas.push(0usize);
            root_label[root] = areas.len() as u32;
        }
        let label = root_label[root];
        let (y, lo, hi) = runs[i];
        areas[label as usize - 1] += (hi - lo + 1) as usize;
        let base = y as usize * w;
        labels[base + lo as usize..=base + hi as usize].fill(label);
    }
    LabeledComponents { width: w, height: h, labels, areas }
}

/// Fused hole filling + labeling, equivalent to
/// `label_components(&fill_holes(edges))` with a single pass over the pixels:
/// the row scan collects foreground and background runs together, enclosed
/// background runs are spliced into the foreground, and the combined runs are
/// merged 8-connected.
pub fn fill_and_label(edges: &BinaryImage) -> LabeledComponents {
    fill_and_label_runs(&edge_runs_of(edges))
}

/// Run-based core of `fill_and_label`: background runs are the per-row gaps
/// between the edge runs, so no pixel buffer is touched until the final
/// label paint.
pub fn fill_and_label_runs(edges: &EdgeRuns) -> LabeledComponents {
    let (runs, parent, _) = filled_runs(edges);
    label_runs(edges.width, edges.height, &runs, parent)
}

/// Hole-filled, 8-connection-merged runs of an edge map: enclosed background
/// gaps are spliced into the foreground, adjacent runs coalesce, and the
/// returned union-find parent array ties runs of the same component together.
///
/// Both union passes copy the previous row's spans into a scratch buffer, so
/// the probe loops iterate over a plain slice while new runs are pushed.
fn filled_runs(edges: &EdgeRuns) -> (Vec<(u32, u32, u32)>, Vec<u32>, Vec<u32>) {
    let (w, h) = (edges.width, edges.height);
    let fg = &edges.runs;
    let fg_rows = &edges.row_starts;
    // Background gaps are the per-row spans between edge runs, merged
    // 4-connected with a union-find whose roots are flattened afterwards;
    // gaps whose component never touches the border are the holes.
    let mut bg: Vec<(u32, u32)> = Vec::with_capacity(fg.len() + h);
    let mut bg_parent: Vec<u32> = Vec::with_capacity(fg.len() + h);
    let mut bg_rows = vec![0u32; h + 1];
    let mut scratch: Vec<(u32, u32, u32)> = Vec::new();
    let mut row_base = 0usize;
    for y in 0..h {
        bg_rows[y] = bg.len() as u32;
        scratch.clear();
        scratch.extend(
            bg[row_base..].iter().enumerate().map(|(i, &(lo, hi))| ((row_base + i) as u32, lo, hi)),
        );
        row_base = bg.len();
        let mut above: &[(u32, u32, u32)] = &scratch;
        let mut push_bg = |lo: u32, hi: u32| {
            let run = bg.len() as u32;
            bg_parent.push(run);
            bg.push((lo, hi));
            while let Some((&(_, _, ahi), rest)) = above.split_first() {
                if ahi < lo {
                    above = rest;
                } else {
                    break;
                }
            }
            let mut root = run;
            for &(idx, _, _) in above.iter().take_while(|&&(_, alo, _)| alo <= hi) {
                let a = find(&mut bg_parent, root);
                let b = find(&mut bg_parent, idx);
                if a != b {
                    let (min, max) = (a.min(b), a.max(b));
                    bg_parent[max as usize] = min;
                    root = min;
                } else {
                    root = a;
                }
            }
        };
        let mut cursor = 0u32;
        for &(_, lo, hi) in &fg[fg_rows[y] as usize..fg_rows[y + 1] as usize] {
            if lo > cursor {
                push_bg(cursor, lo - 1);
            }
            cursor = hi + 1;
        }
        if (cursor as usize) < w {
            push_bg(cursor, w as u32 - 1);
        }
    }
    bg_rows[h] = bg.len() as u32;
    // Parents always precede children, so one ascending pass fully flattens
    // the forest; gap roots and then outside-ness become direct lookups.
    for i in 0..bg_parent.len() {
        bg_parent[i] = bg_parent[bg_parent[i] as usize];
    }
    let mut outside = vec![false; bg.len()];
    for y in [0, h - 1] {
        for i in bg_rows[y] as usize..bg_rows[y + 1] as usize {
            outside[bg_parent[i] as usize] = true;
        }
    }
    for y in 0..h {
        let (start, end) = (bg_rows[y] as usize, bg_rows[y + 1] as usize);
        if start == end {
            continue;
        }
        if bg[start].0 == 0 {
            outside[bg_parent[start] as usize] = true;
        }
        if bg[end - 1].1 as usize == w - 1 {
            outside[bg_parent[end - 1] as usize] = true;
        }
    }
    // Compact the holes; almost every row has none.
    let mut holes: Vec<(u32, u32)> = Vec::new();
    let mut hole_rows = vec![0u32; h + 1];
    for y in 0..h {
        hole_rows[y] = holes.len() as u32;
        for i in bg_rows[y] as usize..bg_rows[y + 1] as usize {
            if !outside[bg_parent[i] as usize] {
                holes.push(bg[i]);
            }
        }
    }
    hole_rows[h] = holes.len() as u32;
    // Splice holes into the foreground row by row, coalescing runs that end
    // up adjacent, and merge the combined runs 8-connected. Unions always
    // point the larger run index at the smaller, so a component's root is its
    // first run in row-major order, and areas can be summed at the root as
    // unions happen.
    let mut runs: Vec<(u32, u32, u32)> = Vec::with_capacity(fg.len());
    let mut parent: Vec<u32> = Vec::with_capacity(fg.len());
    let mut area: Vec<u32> = Vec::with_capacity(fg.len());
    let mut row_base = 0usize;
    for y in 0..h {
        scratch.clear();
        scratch.extend(runs[row_base..].iter().enumerate().map(|(i, &(_, lo, hi))| {
            ((row_base + i) as u32, lo, hi)
        }));
        row_base = runs.len();
        let mut above: &[(u32, u32, u32)] = &scratch;
        let mut flush = |lo: u32, hi: u32| {
            let run = runs.len() as u32;
            parent.push(run);
            area.push(hi - lo + 1);
            runs.push((y as u32, lo, hi));
            while let Some((&(_, _, ahi), rest)) = above.split_first() {
                if ahi + 1 < lo {
                    above = rest;
                } else {
                    break;
                }
            }
            let mut root = run;
            for &(idx, _, _) in above.iter().take_while(|&&(_, alo, _)| alo <= hi + 1) {
                let a = find(&mut parent, root);
                let b = find(&mut parent, idx);
                if a != b {
                    let (min, max) = (a.min(b), a.max(b));
                    parent[max as usize] = min;
                    area[min as usize] += area[max as usize];
                    root = min;
                } else {
                    root = a;
                }
            }
        };
        let mut fi = fg_rows[y] as usize;
        let mut bi = hole_rows[y] as usize;
        let (fg_end, hole_end) = (fg_rows[y + 1] as usize, hole_rows[y + 1] as usize);
        let mut pending: Option<(u32, u32)> = None;
        while fi < fg_end || bi < hole_end {
            let take_fg = bi >= hole_end || (fi < fg_end && fg[fi].1 < holes[bi].0);
            let (lo, hi) = if take_fg {
                let (_, lo, hi) = fg[fi];
                fi += 1;
                (lo, hi)
            } else {
                let span = holes[bi];
                bi += 1;
                span
            };
            pending = match pending {
                Some((plo, phi)) if phi + 1 == lo => Some((plo, hi)),
                Some((plo, phi)) => {
                    flush(plo, phi);
                    Some((lo, hi))
                }
                None => Some((lo, hi)),
            };
        }
        if let Some((plo, phi)) = pending {
            flush(plo, phi);
        }
    }
    (runs, parent, area)
}

/// `largest_object` computed straight from the run representation: component
/// areas come from run lengths and the winner's mask, bounding box and
/// boundary are built from its runs alone, so no full label image is painted.
/// Equivalent to `largest_object(&fill_and_label_runs(edges), min_area)`.
pub fn largest_component_runs(
    edges: &EdgeRuns,
    min_area: usize,
) -> Result<CandidateObject, PreprocessError> {
    let (w, h) = (edges.width, edges.height);
    let (winner, winner_rows, area) = winner_component(edges, min_area)?;
    let mut mask_data = vec![false; w * h];
    let mut bbox = (w, h, 0usize, 0usize);
    for &(y, lo, hi) in &winner {
        let base = y as usize * w;
        mask_data[base + lo as usize..=base + hi as usize].fill(true);
        bbox.0 = bbox.0.min(lo as usize);
        bbox.1 = bbox.1.min(y as usize);
        bbox.2 = bbox.2.max(hi as usize);
        bbox.3 = bbox.3.max(y as usize);
    }
    let boundary = boundary_of_winner(h, &winner, &winner_rows);
    if boundary.is_empty() {
        return Err(PreprocessError::EmptyMask);
    }
    let mask = BinaryImage::new(w, h, mask_data).expect("buffer sized to dimensions");
    Ok(CandidateObject { mask, area, bounding_box: bbox, boundary })
}

/// Boundary points of the largest component only, skipping the mask and
/// bounding-box construction of `largest_component_runs`. Same selection and
/// same row-major boundary order.
pub fn largest_component_boundary(
    edges: &EdgeRuns,
    min_area: usize,
) -> Result<Vec<(usize, usize)>, PreprocessError> {
    let (winner, winner_rows, _) = winner_component(edges, min_area)?;
    let boundary = boundary_of_winner(edges.height, &winner, &winner_rows);
    if boundary.is_empty() {
        return Err(PreprocessError::EmptyMask);
    }
    Ok(boundary)
}

/// Largest-component selection on the run representation: returns the
/// winner's runs, its per-row index, and its area.
fn winner_component(
    edges: &EdgeRuns,
    min_area: usize,
) -> Result<(Vec<(u32, u32, u32)>, Vec<u32>, usize), PreprocessError> {
    let h = edges.height;
    let (runs, mut parent, root_area) = filled_runs(edges);
    // Parents always precede children, so one ascending pass fully flattens
    // the forest and membership tests become direct lookups.
    for i in 0..parent.len() {
        parent[i] = parent[parent[i] as usize];
    }
    // A component's root is its lowest run index, so scanning roots in order
    // and replacing only on strictly larger area matches the label-based
    // tie-break (largest area, then earliest component in row-major order).
    let mut best: Option<(u32, u32)> = None;
    for i in 0..parent.len() {
        if parent[i] == i as u32 {
            let a = root_area[i];
            if best.is_none_or(|(_, best_area)| a > best_area) {
                best = Some((i as u32, a));
            }
        }
    }
    let (winner_root, area) =
        best.filter(|&(_, a)| a as usize >= min_area.max(1)).ok_or(PreprocessError::NoCandidate {
            min_area,
        })?;
    let area = area as usize;
    // Winner runs per row, in row-major order.
    let mut winner: Vec<(u32, u32, u32)> = Vec::new();
    let mut winner_rows = vec![0u32; h + 1];
    {
        let mut i = 0;
        for y in 0..h {
            winner_rows[y] = winner.len() as u32;
            while i < runs.len() && (runs[i].0 as usize) == y {
                if parent[i] == winner_root {
                    winner.push(runs[i]);
                }
                i += 1;
            }
        }
        winner_rows[h] = winner.len() as u32;
    }
    Ok((winner, winner_rows, area))
}

/// Boundary pixels in row-major order: run ends are always exposed, and an
/// interior pixel is exposed unless the rows above and below both cover
/// it. Covered stretches are skipped in whole-interval jumps.
fn boundary_of_winner(
    h: usize,
    winner: &[(u32, u32, u32)],
    winner_rows: &[u32],
) -> Vec<(usize, usize)> {
    let mut boundary = Vec::new();
    for y in 0..h {
        let above = &winner[winner_rows[y.saturating_sub(1)] as usize..winner_rows[y] as usize];
        let below = if y + 1 < h {
            &winner[winner_rows[y + 1] as usize..winner_rows[y + 2] as usize]
        } else {
            &winner[0..0]
        };
        let (mut pa, mut pb) = (0usize, 0usize);
        for &(_, lo, hi) in &winner[winner_rows[y] as usize..winner_rows[y + 1] as usize] {
            let (lo, hi) = (lo as usize, hi as usize);
            if y == 0 || y == h - 1 {
                boundary.extend((lo..=hi).map(|x| (x, y)));
                continue;
            }
            boundary.push((lo, y));
            let mut x = lo + 1;
            while x < hi {
                while pa < above.len() && (above[pa].2 as usize) < x {
                    pa += 1;
                }
                while pb < below.len() && (below[pb].2 as usize) < x {
                    pb += 1;
                }
                let covered_above = pa < above.len() && (above[pa].1 as usize) <= x;
                let covered_below = pb < below.len() && (below[pb].1 as usize) <= x;
                if covered_above && covered_below {
                    x = (above[pa].2 as usize).min(below[pb].2 as usize).min(hi - 1) + 1;
                } else {
                    boundary.push((x, y));
                    x += 1;
                }
            }
            if hi > lo {
                boundary.push((hi, y));
            }
        }
    }
    boundary
}

/// Selects the component with the largest area (ties: smallest label).
/// `NoCandidate` signals that this corner holds no sign.
pub fn largest_object(
    components: &LabeledComponents,
    min_area: usize,
) -> Result<CandidateObject, PreprocessError> {
    let best = components
        .areas
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .filter(|(_, &area)| area >= min_area.max(1));
    let (index, &area) = best.ok_or(PreprocessError::NoCandidate { min_area })?;
    let label = index as u32 + 1;
    let (w, h) = (components.width, components.height);
    let mut mask_data = vec![false; w * h];
    let mut bbox = (w, h, 0usize, 0usize);
    let mut boundary = Vec::new();
    let labels = &components.labels;
    for y in 0..h {
        let row = &labels[y * w..(y + 1) * w];
        let above = (y > 0).then(|| &labels[(y - 1) * w..y * w]);
        let below = (y + 1 < h).then(|| &labels[(y + 1) * w..(y + 2) * w]);
        let mask_row = &mut mask_data[y * w..(y + 1) * w];
        for x in 0..w {
            if row[x] != label {
                continue;
            }
            mask_row[x] = true;
            bbox.0 = bbox.0.min(x);
            bbox.1 = bbox.1.min(y);
            bbox.2 = bbox.2.max(x);
            bbox.3 = bbox.3.max(y);
            let exposed = x == 0
                || x == w - 1
                || row[x - 1] != label
                || row[x + 1] != label
                || above.is_none_or(|r| r[x] != label)
                || below.is_none_or(|r| r[x] != label);
            if exposed {
                boundary.push((x, y));
            }
        }
    }
    if boundary.is_empty() {
        return Err(PreprocessError::EmptyMask);
    }
    let mask = BinaryImage::new(w, h, mask_data).expect("buffer sized to dimensions");
    Ok(CandidateObject { mask, area, bounding_box: bbox, boundary })
}

/// Foreground pixels with at least one false 4-neighbor or on the image
/// border, in row-major order.
pub fn boundary_of(mask: &BinaryImage) -> Result<Vec<(usize, usize)>, PreprocessError> {
    let (w, h) = (mask.width(), mask.height());
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let on_border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            let exposed = on_border
                || !mask.get(x - 1, y)
                || !mask.get(x + 1, y)
                || !mask.get(x, y - 1)
                || !mask.get(x, y + 1);
            if exposed {
                out.push((x, y));
            }
        }
    }
    if out.is_empty() {
        return Err(PreprocessError::EmptyMask);
    }
    Ok(out)
}

/// Otsu's threshold over the gray histogram; used to binarize the glyph crop
/// before feature extraction.
pub fn otsu_threshold(img: &GrayImage) -> u8 {
    let mut hist = [0usize; 256];
    for &v in img.data() {
        hist[v as usize] += 1;
    }
    let total = img.data().len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum();
    let mut sum_b = 0.0;
    let mut weight_b = 0.0;
    let mut best = (0u8, -1.0f64);
    for t in 0..256 {
        weight_b += hist[t] as f64;
        if weight_b == 0.0 {
            continue;
        }
        let weight_f = total - weight_b;
        if weight_f == 0.0 {
            break;
        }
        sum_b += t as f64 * hist[t] as f64;
        let mean_b = sum_b / weight_b;
        let mean_f = (sum_all - sum_b) / weight_f;
        let between = weight_b * weight_f * (mean_b - mean_f) * (mean_b - mean_f);
        if between > best.1 {
            best = (t as u8, between);
        }
    }
    best.0
}

/// Binarizes a gray image: true (white) iff intensity > threshold.
pub fn binarize(img: &GrayImage, threshold: u8) -> BinaryImage {
    let data = img.data().iter().map(|&v| v > threshold).collect();
    BinaryImage::new(img.width(), img.height(), data).expect("dimensions preserved")
}

/// Rasterizes a solid disc; shared by tests and the synth renderer.
pub fn rasterize_disc(width: usize, height: usize, cx: f64, cy: f64, r: f64) -> BinaryImage {
    let mut img = BinaryImage::filled(width, height, false);
    for y in 0..height {
        for x in 0..width {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            if dx * dx + dy * dy <= r * r {
                img.set(x, y, true);
            }
        }
    }
    img
}
