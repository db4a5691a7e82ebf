//! Seeded band-limited random initial histories.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{Field, FieldEngine};
use crate::integrator::Segment;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryShape {
    /// Same field at every θ.
    #[default]
    Constant,
    /// Linear interpolation in θ between two independent fields.
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomSegmentSpec {
    pub shape: HistoryShape,
    /// Largest retained angular wavenumber.
    pub bandwidth: f64,
}

impl Default for RandomSegmentSpec {
    fn default() -> Self {
        RandomSegmentSpec {
            shape: HistoryShape::Constant,
            bandwidth: 4.0,
        }
    }
}

/// Independent stream `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Gaussian white noise low-pass filtered to `|k| <= bandwidth`, scaled to unit norm.
pub fn band_limited_field(
    engine: &FieldEngine,
    bandwidth: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Field> {
    let grid = engine.grid();
    let noise: Vec<f64> = (0..grid.len())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let noise = Field::from_values(grid, noise)?;
    let cut = bandwidth * bandwidth;
    let filtered = engine.apply(
        &noise,
        &engine.multiplier(|k2| if k2 <= cut { 1.0 } else { 0.0 }),
    )?;
    let n = filtered.norm_l2();
    let mut out = filtered;
    if n > 0.0 {
        out.scale(1.0 / n);
    }
    Ok(out)
}

/// A random history with `‖φ‖_C = norm`.
pub fn random_segment(
    engine: &FieldEngine,
    n_tau: usize,
    tau: f64,
    norm: f64,
    spec: &RandomSegmentSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Segment> {
    let a = band_limited_field(engine, spec.bandwidth, rng)?;
    let seg = match spec.shape {
        HistoryShape::Constant => Segment::constant(a, n_tau, tau)?,
        HistoryShape::Linear => {
            let b = band_limited_field(engine, spec.bandwidth, rng)?;
            let diff = b.sub(&a)?;
            Segment::from_fn(n_tau, tau, |theta| {
                let mut f = a.clone();
                f.axpy((theta + tau) / tau, &diff).expect("same grid");
                f
            })?
        }
    };
    let current = seg.norm();
    let scale = if current > 0.0 { norm / current } else { 0.0 };
    let samples = seg
        .samples()
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.scale(scale);
            s
        })
        .collect();
    Segment::new(samples, seg.dt())
}
