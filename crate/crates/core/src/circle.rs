//! Circle detection: Hough-transform voting (known and unknown radius) and
//! the algebraic least-squares circle fit.
//!
//! The fit minimizes `E = sum_i [(x_i - a0)^2 + (y_i - b0)^2 - r0^2]^2`.
//! Substituting `z = a0^2 + b0^2 - r0^2` makes the objective linear in
//! `(a0, b0, z)`, so the 3x3 normal equations solve it exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CircleError {
    #[error("empty point set")]
    EmptyPointSet,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("empty radius range")]
    EmptyRadiusRange,
    #[error("invalid radius {0}")]
    BadRadius(f64),
    #[error("singular system (collinear or degenerate points)")]
    SingularSystem,
    #[error("negative radicand {0} recovering the radius")]
    NegativeRadicand(f64),
}

/// A circle: center (a0, b0) and radius r0, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub a0: f64,
    pub b0: f64,
    pub r0: f64,
}

/// Points feeding a detector. Pipeline code builds these from integer pixel
/// coordinates; the fit itself works on real-valued points.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePointSet {
    points: Vec<(f64, f64)>,
}

impl EdgePointSet {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, CircleError> {
        if points.is_empty() {
            return Err(CircleError::EmptyPointSet);
        }
        Ok(Self { points })
    }

    pub fn from_pixels(pixels: &[(usize, usize)]) -> Result<Self, CircleError> {
        Self::new(pixels.iter().map(|&(x, y)| (x as f64, y as f64)).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// Radius search range for the unknown-radius Hough transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HoughParams {
    pub r_min: usize,
    pub r_max: usize,
    pub r_step: usize,
}

impl HoughParams {
    pub fn new(r_min: usize, r_max: usize, r_step: usize) -> Result<Self, CircleError> {
        if r_min == 0 || r_min > r_max || r_step == 0 {
            return Err(CircleError::EmptyRadiusRange);
        }
        Ok(Self { r_min, r_max, r_step })
    }

    /// Default search range for a corner crop: radii below 8 px cannot hold a
    /// legible digit; above half the crop the circle cannot fit.
    pub fn for_crop(width: usize, height: usize) -> Self {
        let r_max = (width.min(height) / 2).max(8);
        Self { r_min: 8, r_max, r_step: 1 }
    }

    fn radii(&self) -> impl Iterator<Item = usize> + '_ {
        (self.r_min..=self.r_max).step_by(self.r_step)
    }
}

/// Result of the least-squares fit, with the Eq.-style intermediates kept for
/// inspection: the objective value at the solution and z = a0^2 + b0^2 - r0^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub circle: Circle,
    pub residual: f64,
    pub z: f64,
}

/// Integer midpoint-circle rasterization. Calls `plot` once per pixel of the
/// circle of radius `r` centered at `(cx, cy)`; no bounds handling.
pub fn midpoint_circle(cx: i64, cy: i64, r: i64, mut plot: impl FnMut(i64, i64)) {
    if r == 0 {
        plot(cx, cy);
        return;
    }
    let mut x = r;
    let mut y = 0i64;
    let mut err = 1 - r;
    while x >= y {
        plot(cx + x, cy + y);
        plot(cx + y, cy + x);
        plot(cx - y, cy + x);
        plot(cx - x, cy + y);
        plot(cx - x, cy - y);
        plot(cx - y, cy - x);
        plot(cx + y, cy - x);
        plot(cx + x, cy - y);
        y += 1;
        if err < 0 {
            err += 2 * y + 1;
        } else {
            x -= 1;
            err += 2 * (y - x) + 1;
        }
    }
}

/// Known-radius Hough transform: every point votes along the circle of radius
/// `r` centered on itself; the accumulator argmax is the center. Ties break
/// toward the smallest (b, a).
pub fn cht_known_radius(
    points: &EdgePointSet,
    r: usize,
    acc_width: usize,
    acc_height: usize,
) -> Result<Circle, CircleError> {
    if points.is_empty() {
        return Err(CircleError::EmptyPointSet);
    }
    if r == 0 {
        return Err(CircleError::BadRadius(0.0));
    }
    let mut acc = vec![0u32; acc_width * acc_height];
    vote_slice(&mut acc, acc_width, acc_height, points, r);
    let (best, _) = argmax_2d(&acc);
    let (a, b) = (best % acc_width, best / acc_width);
    Ok(Circle { a0: a as f64, b0: b as f64, r0: r as f64 })
}

/// Unknown-radius Hough transform: 3D accumulation over (a, b, r); the global
/// argmax wins. Ties break toward the smallest (r, b, a).
pub fn cht_unknown_radius(
    points: &EdgePointSet,
    params: &HoughParams,
    acc_width: usize,
    acc_height: usize,
) -> Result<Circle, CircleError> {
    if points.is_empty() {
        return Err(CircleError::EmptyPointSet);
    }
    if params.r_min == 0 || params.r_min > params.r_max || params.r_step == 0 {
        return Err(CircleError::EmptyRadiusRange);
    }
    let mut acc = vec![0u32; acc_width * acc_height];
    let mut best_votes = 0u32;
    let mut best = (params.r_min, 0usize, 0usize); // (r, b, a)
    for r in params.radii() {
        acc.fill(0);
        vote_slice(&mut acc, acc_width, acc_height, points, r);
        let (index, votes) = argmax_2d(&acc);
        if votes > best_votes {
            best_votes = votes;
            best = (r, index / acc_width, index % acc_width);
        }
    }
    let (r, b, a) = best;
    Ok(Circle { a0: a as f64, b0: b as f64, r0: r as f64 })
}

fn vote_slice(acc: &mut [u32], width: usize, height: usize, points: &EdgePointSet, r: usize) {
    for &(px, py) in points.points() {
        midpoint_circle(px.round() as i64, py.round() as i64, r as i64, |x, y| {
            if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height {
                acc[y as usize * width + x as usize] += 1;
            }
        });
    }
}

/// First (row-major) maximum: equivalent to the smallest (b, a) tie-break.
fn argmax_2d(acc: &[u32]) -> (usize, u32) {
    let mut best = (0usize, 0u32);
    for (i, &v) in acc.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Least-squares circle fit by solving the 3x3 normal equations of the
/// algebraic objective. The data is centered before assembling the moments
/// for conditioning; the solution is shifted back afterwards.
pub fn ce_fit(points: &EdgePointSet) -> Result<FitReport, CircleError> {
    let n = points.len();
    if n < 3 {
        return Err(CircleError::TooFewPoints { needed: 3, got: n });
    }
    let (mx, my) = centroid(points);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxz = 0.0; // sum x*(x^2+y^2)
    let mut syz = 0.0; // sum y*(x^2+y^2)
    let mut sz = 0.0; // sum (x^2+y^2)
    for &(px, py) in points.points() {
        let x = px - mx;
        let y = py - my;
        let q = x * x + y * y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sx += x;
        sy += y;
        sxz += x * q;
        syz += y * q;
        sz += q;
    }
    let matrix = [
        [2.0 * sxx, 2.0 * sxy, -sx],
        [2.0 * sxy, 2.0 * syy, -sy],
        [2.0 * sx, 2.0 * sy, -(n as f64)],
    ];
    let rhs = [sxz, syz, sz];
    let (a_c, b_c, z_c) = solve_3x3(matrix, rhs)?;
    let radicand = a_c * a_c + b_c * b_c - z_c;
    if radicand < 0.0 {
        return Err(CircleError::NegativeRadicand(radicand));
    }
    let r0 = radicand.sqrt();
    let a0 = a_c + mx;
    let b0 = b_c + my;
    let circle = Circle { a0, b0, r0 };
    Ok(FitReport {
        circle,
        residual: residual_energy(points, &circle),
        z: a0 * a0 + b0 * b0 - r0 * r0,
    })
}

/// The fit objective evaluated at a given circle.
pub fn residual_energy(points: &EdgePointSet, circle: &Circle) -> f64 {
    points
        .points()
        .iter()
        .map(|&(x, y)| {
            let term = (x - circle.a0).powi(2) + (y - circle.b0).powi(2) - circle.r0 * circle.r0;
            term * term
        })
        .sum()
}

/// Median absolute distance from the points to the circle's rim. Near zero
/// for genuine circular boundaries even when a minority of points are noise
/// warts; large for blobs and polygons, which makes it a cheap shape gate on
/// detection candidates.
pub fn median_radial_deviation(points: &EdgePointSet, circle: &Circle) -> f64 {
    let mut devs: Vec<f64> = points
        .points()
        .iter()
        .map(|&(x, y)| {
            let d = ((x - circle.a0).powi(2) + (y - circle.b0).powi(2)).sqrt();
            (d - circle.r0).abs()
        })
        .collect();
    devs.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let n = devs.len();
    if n % 2 == 1 {
        devs[n / 2]
    } else {
        0.5 * (devs[n / 2 - 1] + devs[n / 2])
    }
}

/// Arithmetic mean of the points. Feeding the fitter a filled (interior
/// inclusive) point set collapses it toward this centroid.
pub fn centroid(points: &EdgePointSet) -> (f64, f64) {
    let n = points.len() as f64;
    let (sx, sy) = points
        .points()
        .iter()
        .fold((0.0, 0.0), |(ax, ay), &(x, y)| (ax + x, ay + y));
    (sx / n, sy / n)
}

/// Gaussian elimination with partial pivoting. Singular when a pivot falls
/// below 1e-9 times the largest initial entry.
fn solve_3x3(matrix: [[f64; 3]; 3], rhs: [f64; 3]) -> Result<(f64, f64, f64), CircleError> {
    let mut a = matrix;
    let mut b = rhs;
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(1e-300);
    for col in 0..3 {
        let pivot_row = (col..3)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot_row][col].abs() < 1e-9 * scale {
            return Err(CircleError::SingularSystem);
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut sum = b[row];
        for k in row + 1..3 {
            sum -= a[row][k] * x[k];
        }
        x[row] = sum / a[row][row];
    }
    Ok((x[0], x[1], x[2]))
}
