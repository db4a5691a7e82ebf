//! Correlation-dimension (pairwise-distance scaling) estimator with a box-counting
//! cross-check.
//!
//! Scales below `resolution` are treated as numerical noise: a cloud whose
//! diameter is below it is a single point at every resolved scale.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    /// Smallest resolved length.
    pub resolution: f64,
    /// Number of log-spaced radii.
    pub radii: usize,
    /// Allowed relative spread of the local slopes inside the scaling range.
    pub slope_tolerance: f64,
    /// Required width of the scaling range in decades.
    pub min_decades: f64,
    /// Minimum number of pairs below the smallest fitted radius.
    pub min_pairs: usize,
    /// Upper cut on the correlation sum, avoids the saturation plateau.
    pub max_fraction: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            resolution: 1e-8,
            radii: 48,
            slope_tolerance: 0.05,
            min_decades: 1.0,
            min_pairs: 10,
            max_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub estimate: f64,
    /// A stable scaling range of the required width was found, or the cloud is degenerate.
    pub reliable: bool,
    /// Diameter at or below the resolution.
    pub degenerate: bool,
    pub range: Option<(f64, f64)>,
    pub box_counting: Option<f64>,
    pub diameter: f64,
    pub points: usize,
    /// `(r, C(r))` samples used for the fit.
    pub curve: Vec<(f64, f64)>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp())
        .collect()
}

/// Longest window of consecutive log-log points whose local slopes agree within
/// tolerance and that spans at least `min_decades`.
fn stable_window(lx: &[f64], ly: &[f64], opts: &EstimatorOptions) -> Option<(usize, usize)> {
    if lx.len() < 3 {
        return None;
    }
    let slopes: Vec<f64> = (1..lx.len())
        .map(|i| (ly[i] - ly[i - 1]) / (lx[i] - lx[i - 1]))
        .collect();
    let need = opts.min_decades * std::f64::consts::LN_10;
    let mut best: Option<(usize, usize, f64)> = None;
    for start in 0..slopes.len() {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut sum = 0.0;
        for end in start..slopes.len() {
            lo = lo.min(slopes[end]);
            hi = hi.max(slopes[end]);
            sum += slopes[end];
            let mean = sum / (end - start + 1) as f64;
            if hi - lo > opts.slope_tolerance * mean.abs().max(1.0) {
                break;
            }
            // points start..=end+1
            let span = lx[end + 1] - lx[start];
            if span >= need && best.is_none_or(|b| span > b.2) {
                best = Some((start, end + 1, span));
            }
        }
    }
    best.map(|(a, b, _)| (a, b))
}

/// Grassberger–Procaccia correlation dimension.
pub fn correlation_dimension(points: &[Vec<f64>], opts: &EstimatorOptions) -> DimensionEstimate {
    let n = points.len();
    let mut dists = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(distance(&points[i], &points[j]));
        }
    }
    dists.sort_by(f64::total_cmp);
    let diameter = dists.last().copied().unwrap_or(0.0);
    let mut out = DimensionEstimate {
        estimate: 0.0,
        reliable: true,
        degenerate: true,
        range: None,
        box_counting: None,
        diameter,
        points: n,
        curve: Vec::new(),
    };
    if n < 2 || diameter <= opts.resolution {
        return out;
    }
    out.degenerate = false;

    let smallest = dists
        .iter()
        .copied()
        .find(|&d| d > 0.0)
        .unwrap_or(diameter)
        .max(opts.resolution);
    let total = dists.len() as f64;
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for r in log_space(smallest, diameter, opts.radii) {
        let count = dists.partition_point(|&d| d < r);
        let c = count as f64 / total;
        if count >= opts.min_pairs && c <= opts.max_fraction {
            out.curve.push((r, c));
            lx.push(r.ln());
            ly.push(c.ln());
        }
    }
    match stable_window(&lx, &ly, opts) {
        Some((a, b)) => {
            out.estimate = ls_slope(&lx[a..=b], &ly[a..=b]);
            out.range = Some((lx[a].exp(), lx[b].exp()));
        }
        None => {
            out.reliable = false;
            if lx.len() >= 2 {
                out.estimate = ls_slope(&lx, &ly);
                out.range = Some((lx[0].exp(), lx[lx.len() - 1].exp()));
            }
        }
    }
    if let Some((lo, hi)) = out.range {
        out.box_counting = box_counting_dimension(points, lo, hi, 12);
    }
    out
}

/// Slope of `ln N(ε)` against `ln(1/ε)` over `[lo, hi]`.
pub fn box_counting_dimension(points: &[Vec<f64>], lo: f64, hi: f64, sizes: usize) -> Option<f64> {
    if points.is_empty() || !(hi > lo && lo > 0.0) || sizes < 2 {
        return None;
    }
    let mut lx = Vec::with_capacity(sizes);
    let mut ly = Vec::with_capacity(sizes);
    for eps in log_space(lo, hi, sizes) {
        let boxes: HashSet<Vec<i64>> = points
            .iter()
            .map(|p| p.iter().map(|v| (v / eps).floor() as i64).collect())
            .collect();
        lx.push(-eps.ln());
        ly.push((boxes.len() as f64).ln());
    }
    Some(ls_slope(&lx, &ly))
}
