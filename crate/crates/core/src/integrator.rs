//! Method-of-steps integration of the mild (variation-of-constants) formulation.
//!
//! One step of size `Δt = τ/n_τ` advances
//!
//! ```text
//! u(t+Δt) = S(Δt)u(t) + ∫₀^Δt S(Δt−s) F(t+s) ds,   F(s) = σu(s−τ) + H(f(u(s−τ))) + g
//! ```
//!
//! with the trapezoidal rule in `s`. Both delayed arguments `u(t−τ)` and
//! `u(t+Δt−τ)` are stored history samples, so nothing is interpolated, and the
//! heat semigroup is applied exactly through its Fourier symbol.

use std::collections::VecDeque;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bounds::absorbing_radius;
use crate::error::{Error, Result};
use crate::field::{apply_mask, Field, FieldEngine, Grid, Mask, Multiplier};
use crate::model::{validate, ModelParams};

/// Guard multiplier applied to the absorbing radius.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// A history window `u_t(θ)`, `θ_j = −τ + jΔt`, `j = 0..=n_τ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    samples: Vec<Field>,
    dt: f64,
}

impl Segment {
    pub fn new(samples: Vec<Field>, dt: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Format("a segment needs at least two samples".into()));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("must be > 0, got {dt}")));
        }
        let grid = samples[0].grid();
        if samples.iter().any(|s| s.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Format("segment samples must be finite".into()));
        }
        Ok(Segment { samples, dt })
    }

    /// Constant-in-θ history.
    pub fn constant(field: Field, n_tau: usize, tau: f64) -> Result<Self> {
        Segment::new(vec![field; n_tau + 1], tau / n_tau as f64)
    }

    /// History built from `θ ↦ φ(θ)`.
    pub fn from_fn(n_tau: usize, tau: f64, f: impl Fn(f64) -> Field) -> Result<Self> {
        let dt = tau / n_tau as f64;
        let samples = (0..=n_tau).map(|j| f(-tau + j as f64 * dt)).collect();
        Segment::new(samples, dt)
    }

    pub fn samples(&self) -> &[Field] {
        &self.samples
    }

    pub fn grid(&self) -> Grid {
        self.samples[0].grid()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_tau(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn tau(&self) -> f64 {
        self.dt * self.n_tau() as f64
    }

    /// The sample at `θ = 0`.
    pub fn current(&self) -> &Field {
        self.samples.last().expect("segment is never empty")
    }

    /// `‖φ‖_C`, the largest sample norm.
    pub fn norm(&self) -> f64 {
        norm_segment(self)
    }

    pub fn sub(&self, other: &Segment) -> Result<Segment> {
        if self.samples.len() != other.samples.len() || self.dt != other.dt {
            return Err(Error::Format(
                "segments have different time sampling".into(),
            ));
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Segment {
            samples,
            dt: self.dt,
        })
    }

    /// `count: u64, dt: f64`, then `count` field records in the field binary format.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        for s in &self.samples {
            s.write_binary(&mut w)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Segment> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let count = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let dt = f64::from_le_bytes(word);
        if count > 1 << 24 {
            return Err(Error::Format(format!("implausible sample count {count}")));
        }
        let samples = (0..count)
            .map(|_| Field::read_binary(&mut r))
            .collect::<Result<Vec<_>>>()?;
        Segment::new(samples, dt)
    }
}

pub fn norm_l2(field: &Field) -> f64 {
    field.norm_l2()
}

pub fn norm_segment(segment: &Segment) -> f64 {
    segment
        .samples
        .iter()
        .map(Field::norm_l2)
        .fold(0.0, f64::max)
}

/// Per-step diagnostics of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub t: f64,
    /// `‖u_t‖_C`
    pub segment_norm: f64,
    /// `‖u(t)‖`
    pub state_norm: f64,
    /// `‖χ_{Ω_K} u(t)‖`
    pub near_norm: f64,
    /// `‖χ_{Ω_K^C} u(t)‖`
    pub far_norm: f64,
}

/// The running state `u_t` plus its norm history.
#[derive(Clone, Debug)]
pub struct Trajectory {
    initial: Segment,
    buffer: VecDeque<Field>,
    sample_norms: VecDeque<f64>,
    dt: f64,
    steps: u64,
    drive: Option<Field>,
    guard_limit: f64,
    history: Vec<NormRecord>,
}

impl Trajectory {
    pub fn initial(&self) -> &Segment {
        &self.initial
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn state(&self) -> &Field {
        self.buffer.back().expect("buffer is never empty")
    }

    pub fn segment(&self) -> Segment {
        Segment {
            samples: self.buffer.iter().cloned().collect(),
            dt: self.dt,
        }
    }

    pub fn segment_norm(&self) -> f64 {
        self.sample_norms.iter().copied().fold(0.0, f64::max)
    }

    pub fn history(&self) -> &[NormRecord] {
        &self.history
    }

    pub fn guard_limit(&self) -> f64 {
        self.guard_limit
    }

    /// `t, segment_norm, state_norm, near_norm, far_norm`
    pub fn write_norms_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,segment_norm,state_norm,near_norm,far_norm")?;
        for r in &self.history {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.t, r.segment_norm, r.state_norm, r.near_norm, r.far_norm
            )?;
        }
        Ok(())
    }
}

/// Per-sample component norms of a difference field, e.g. its projected parts.
pub trait SampleProbe {
    fn labels(&self) -> Vec<String>;
    fn component_norms(&self, sample: &Field) -> Result<Vec<f64>>;
}

/// Records only the full difference norm.
pub struct NoProbe;

impl SampleProbe for NoProbe {
    fn labels(&self) -> Vec<String> {
        Vec::new()
    }

    fn component_norms(&self, _sample: &Field) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferenceRecord {
    pub t: f64,
    /// `‖Φ(t)φ − Φ(t)ψ‖_C`
    pub r: f64,
    /// Window sup of each probe component.
    pub components: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferenceLog {
    pub labels: Vec<String>,
    pub records: Vec<DifferenceRecord>,
}

impl DifferenceLog {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t,r")?;
        for l in &self.labels {
            write!(w, ",{l}")?;
        }
        writeln!(w)?;
        for rec in &self.records {
            write!(w, "{},{}", rec.t, rec.r)?;
            for c in &rec.components {
                write!(w, ",{c}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// The solution semiflow `Φ(t)φ = u_t` on a fixed grid and step.
#[derive(Clone, Debug)]
pub struct Semiflow {
    params: ModelParams,
    engine: FieldEngine,
    n_tau: usize,
    dt: f64,
    step_heat: Multiplier,
    kernel: Multiplier,
    near: Mask,
    far: Mask,
    radius: Option<f64>,
}

impl Semiflow {
    pub fn new(params: ModelParams, n_tau: usize) -> Result<Self> {
        validate(&params)?;
        if n_tau == 0 {
            return Err(Error::param("integrator.n_tau", "must be >= 1"));
        }
        let grid = params.grid();
        let engine = FieldEngine::new(grid);
        let dt = params.tau / n_tau as f64;
        let step_heat = engine.heat_multiplier(dt, params.mu);
        let kernel = engine.gaussian_multiplier(params.iota);
        let near = Mask::ball(grid, params.trunc_radius);
        let far = near.complement();
        let radius = absorbing_radius(&params).ok();
        Ok(Semiflow {
            params,
            engine,
            n_tau,
            dt,
            step_heat,
            kernel,
            near,
            far,
            radius,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn engine(&self) -> &FieldEngine {
        &self.engine
    }

    pub fn grid(&self) -> Grid {
        self.engine.grid()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    pub fn near_mask(&self) -> &Mask {
        &self.near
    }

    /// `R_B` when the absorbing condition holds.
    pub fn absorbing_radius(&self) -> Option<f64> {
        self.radius
    }

    /// `F = σu_d + H(f(u_d)) + g` for a delayed sample `u_d`.
    fn drive(&self, delayed: &Field) -> Result<Field> {
        let p = &self.params;
        let mut out = self
            .engine
            .apply(&p.nonlinearity.apply(delayed), &self.kernel)?;
        out.axpy(p.sigma, delayed)?;
        out.axpy(1.0, &p.forcing)?;
        Ok(out)
    }

    fn record(&self, t: f64, segment_norm: f64, state: &Field) -> Result<NormRecord> {
        Ok(NormRecord {
            t,
            segment_norm,
            state_norm: state.norm_l2(),
            near_norm: apply_mask(state, &self.near)?.norm_l2(),
            far_norm: apply_mask(state, &self.far)?.norm_l2(),
        })
    }

    /// Wraps an initial segment in a trajectory at `t = 0`.
    pub fn start(&self, initial: Segment) -> Result<Trajectory> {
        if initial.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        if initial.n_tau() != self.n_tau || (initial.dt - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::Format(format!(
                "segment has {} intervals of {}, semiflow expects {} of {}",
                initial.n_tau(),
                initial.dt,
                self.n_tau,
                self.dt
            )));
        }
        let sample_norms: VecDeque<f64> = initial.samples.iter().map(Field::norm_l2).collect();
        let seg_norm = sample_norms.iter().copied().fold(0.0, f64::max);
        let scale = self
            .radius
            .unwrap_or(0.0)
            .max(seg_norm)
            .max(f64::MIN_POSITIVE);
        let first = self.record(0.0, seg_norm, initial.current())?;
        Ok(Trajectory {
            buffer: initial.samples.iter().cloned().collect(),
            sample_norms,
            dt: self.dt,
            steps: 0,
            drive: None,
            guard_limit: DIVERGENCE_FACTOR * scale,
            history: vec![first],
            initial,
        })
    }

    /// One trapezoidal step of the mild formulation; the trajectory is left
    /// untouched if the divergence guard trips.
    pub fn step(&self, traj: &mut Trajectory) -> Result<()> {
        let half = 0.5 * self.dt;
        let drive_now = match traj.drive.take() {
            Some(d) => d,
            None => self.drive(&traj.buffer[0])?,
        };
        let mut acc = traj.state().clone();
        acc.axpy(half, &drive_now)?;
        let mut next = self.engine.apply(&acc, &self.step_heat)?;
        let drive_next = self.drive(&traj.buffer[1])?;
        next.axpy(half, &drive_next)?;

        let norm = next.norm_l2();
        let time = (traj.steps + 1) as f64 * self.dt;
        if !norm.is_finite() || norm > traj.guard_limit {
            traj.drive = Some(drive_now);
            return Err(Error::Divergence {
                time,
                norm,
                limit: traj.guard_limit,
            });
        }

        traj.buffer.pop_front();
        traj.sample_norms.pop_front();
        traj.buffer.push_back(next);
        traj.sample_norms.push_back(norm);
        traj.drive = Some(drive_next);
        traj.steps += 1;
        let rec = self.record(time, traj.segment_norm(), traj.state())?;
        traj.history.push(rec);
        Ok(())
    }

    pub fn steps_for(&self, duration: f64) -> Result<u64> {
        if duration.is_nan() || duration < 0.0 {
            return Err(Error::NegativeTime(duration));
        }
        let steps = (duration / self.dt).round();
        if (steps * self.dt - duration).abs() > 1e-9 * duration.max(1.0) {
            return Err(Error::StepMismatch {
                time: duration,
                dt: self.dt,
            });
        }
        Ok(steps as u64)
    }

    /// Advances an existing trajectory by `duration`.
    pub fn advance(&self, traj: &mut Trajectory, duration: f64) -> Result<()> {
        for _ in 0..self.steps_for(duration)? {
            self.step(traj)?;
        }
        Ok(())
    }

    /// `Φ(T)φ` together with the per-step norm history.
    pub fn evolve(&self, initial: &Segment, t_final: f64) -> Result<Trajectory> {
        let mut traj = self.start(initial.clone())?;
        self.advance(&mut traj, t_final)?;
        Ok(traj)
    }

    /// Co-evolves two histories and logs `‖Φ(t)φ − Φ(t)ψ‖_C` and the window sup
    /// of each probe component at every step.
    pub fn difference_trajectories(
        &self,
        phi: &Segment,
        psi: &Segment,
        t_final: f64,
        probe: &dyn SampleProbe,
    ) -> Result<DifferenceLog> {
        let steps = self.steps_for(t_final)?;
        let mut a = self.start(phi.clone())?;
        let mut b = self.start(psi.clone())?;

        let sample_row = |x: &Field, y: &Field| -> Result<Vec<f64>> {
            let d = x.sub(y)?;
            let mut row = vec![d.norm_l2()];
            row.extend(probe.component_norms(&d)?);
            Ok(row)
        };
        let mut window: VecDeque<Vec<f64>> = a
            .buffer
            .iter()
            .zip(&b.buffer)
            .map(|(x, y)| sample_row(x, y))
            .collect::<Result<_>>()?;

        let summarize = |t: f64, window: &VecDeque<Vec<f64>>| {
            let width = window[0].len();
            let mut sup = vec![0.0f64; width];
            for row in window {
                for (s, v) in sup.iter_mut().zip(row) {
                    *s = s.max(*v);
                }
            }
            DifferenceRecord {
                t,
                r: sup[0],
                components: sup[1..].to_vec(),
            }
        };

        let mut records = vec![summarize(0.0, &window)];
        for _ in 0..steps {
            self.step(&mut a)?;
            self.step(&mut b)?;
            window.pop_front();
            window.push_back(sample_row(a.state(), b.state())?);
            records.push(summarize(a.time(), &window));
        }
        Ok(DifferenceLog {
            labels: probe.labels(),
            records,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NonlinKind, NonlinSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(1, 2.0 * PI, 64).unwrap()
    }

    fn linear(mu: f64) -> ModelParams {
        ModelParams::new(grid(), mu, 0.0, 1.0, NonlinSpec::new(NonlinKind::Zero, 0.0))
    }

    #[test]
    fn segment_norm_is_sup() {
        let g = grid();
        let unit = 1.0 / (2.0 * g.half_length).sqrt();
        let seg = Segment::new(
            vec![
                Field::constant(g, unit),
                Field::constant(g, 3.0 * unit),
                Field::constant(g, 2.0 * unit),
            ],
            0.5,
        )
        .unwrap();
        assert_relative_eq!(seg.norm(), 3.0, max_relative = 1e-14);
        assert_eq!(seg.tau(), 1.0);
    }

    #[test]
    fn constant_history_decays_exactly() {
        let flow = Semiflow::new(linear(1.3), 16).unwrap();
        let seg = Segment::constant(Field::constant(grid(), 2.0), 16, 1.0).unwrap();
        let traj = flow.evolve(&seg, 3.0).unwrap();
        let expected = 2.0 * (-1.3f64 * 3.0).exp();
        for &v in traj.state().values() {
            assert_relative_eq!(v, expected, max_relative = 1e-8);
        }
        assert_eq!(traj.steps(), 48);
        assert_eq!(traj.history().len(), 49);
    }

    #[test]
    fn zero_time_is_identity() {
        let flow = Semiflow::new(linear(1.0), 8).unwrap();
        let seg =
            Segment::from_fn(8, 1.0, |th| Field::from_fn(grid(), |x| (x[0] + th).sin())).unwrap();
        assert_eq!(flow.evolve(&seg, 0.0).unwrap().segment(), seg);
    }

    #[test]
    fn rejects_misaligned_time() {
        let flow = Semiflow::new(linear(1.0), 8).unwrap();
        let seg = Segment::constant(Field::constant(grid(), 1.0), 8, 1.0).unwrap();
        assert!(matches!(
            flow.evolve(&seg, 0.3),
            Err(Error::StepMismatch { .. })
        ));
        assert!(matches!(
            flow.evolve(&seg, -1.0),
            Err(Error::NegativeTime(_))
        ));
        let wrong = Segment::constant(Field::constant(grid(), 1.0), 4, 1.0).unwrap();
        assert!(flow.start(wrong).is_err());
    }

    #[test]
    fn divergence_guard_trips() {
        // strongly unstable linear feedback
        let mut p = linear(0.1);
        p.sigma = 50.0;
        let flow = Semiflow::new(p, 8).unwrap();
        let seg = Segment::constant(Field::constant(grid(), 1.0), 8, 1.0).unwrap();
        match flow.evolve(&seg, 50.0) {
            Err(Error::Divergence { norm, limit, .. }) => assert!(norm > limit),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn equal_histories_give_zero_log() {
        let p = ModelParams::new(
            grid(),
            1.0,
            0.2,
            1.0,
            NonlinSpec::new(NonlinKind::Ricker, 1.0),
        );
        let flow = Semiflow::new(p, 8).unwrap();
        let seg = Segment::constant(Field::from_fn(grid(), |x| x[0].cos()), 8, 1.0).unwrap();
        let log = flow
            .difference_trajectories(&seg, &seg, 2.0, &NoProbe)
            .unwrap();
        assert_eq!(log.records.len(), 17);
        assert!(log.records.iter().all(|r| r.r == 0.0));
    }

    #[test]
    fn segment_binary_round_trip() {
        let seg = Segment::from_fn(4, 2.0, |th| Field::from_fn(grid(), |x| x[0] * th)).unwrap();
        let mut bytes = Vec::new();
        seg.write_binary(&mut bytes).unwrap();
        assert_eq!(Segment::read_binary(&bytes[..]).unwrap(), seg);
    }
}
