//! Desk-scale experiments: absorbing-ball entry, difference contraction against the
//! squeezing envelopes, and attractor dimension estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dimension::{correlation_dimension, DimensionEstimate, EstimatorOptions};
use super::init::{random_segment, stream_rng, RandomSegmentSpec};
use super::projectors::ProjectorSet;
use crate::bounds::{BoundReport, SqueezeRates};
use crate::error::{Error, Result};
use crate::integrator::{DifferenceLog, NormRecord, Semiflow};
use crate::model::effective_bound_m;
use crate::spectral::SpectralData;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingOptions {
    pub ensemble: usize,
    pub t_final: f64,
    /// Initial norms are spread evenly up to this multiple of `R_B`.
    pub max_norm_factor: f64,
    /// Relative overshoot of `R_B` tolerated for discretization.
    pub overshoot: f64,
    /// Absolute slack added to the ball, so `R_B = 0` is reachable.
    pub floor: f64,
    /// Relative slack on the discrete Grönwall envelope.
    pub gronwall_tolerance: f64,
    pub seed: u64,
    pub init: RandomSegmentSpec,
}

impl Default for AbsorbingOptions {
    fn default() -> Self {
        AbsorbingOptions {
            ensemble: 20,
            t_final: 100.0,
            max_norm_factor: 10.0,
            overshoot: 0.01,
            floor: 1e-8,
            gronwall_tolerance: 1e-3,
            seed: 0,
            init: RandomSegmentSpec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberOutcome {
    pub index: usize,
    pub initial_norm: f64,
    pub entry_time: Option<f64>,
    pub exit_time: Option<f64>,
    pub max_norm_after_entry: f64,
    pub final_norm: f64,
    /// Largest `‖u_t‖_C / envelope` with `M = B_f|Ω|^{1/2} + ‖g‖`.
    pub gronwall_ratio: f64,
    /// Same ratio with `M = B_f + ‖g‖`; informational.
    pub gronwall_ratio_pointwise: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AbsorbingReport {
    pub radius: f64,
    pub ball: f64,
    pub m_bound: f64,
    pub m_box: f64,
    pub max_entry_time: Option<f64>,
    pub all_entered: bool,
    pub none_exited: bool,
    pub gronwall_ok: bool,
    pub passed: bool,
    pub members: Vec<MemberOutcome>,
    #[serde(skip)]
    pub histories: Vec<Vec<NormRecord>>,
}

/// Right-hand side of the integrated Grönwall chain for a recorded norm history:
/// `e^{μτ}e^{−μt}‖φ‖_C + σe^{μτ}∫₀ᵗ e^{−μ(t−s)}‖u_s‖_C ds + M/μ`, trapezoidal in `s`.
pub fn gronwall_envelope(
    history: &[NormRecord],
    mu: f64,
    sigma: f64,
    tau: f64,
    m_bound: f64,
) -> Vec<f64> {
    let Some(first) = history.first() else {
        return Vec::new();
    };
    let growth = (mu * tau).exp();
    let mut integral = 0.0;
    let mut out = Vec::with_capacity(history.len());
    out.push(growth * first.segment_norm + m_bound / mu);
    for w in history.windows(2) {
        let dt = w[1].t - w[0].t;
        let decay = (-mu * dt).exp();
        integral = decay * integral + 0.5 * dt * (decay * w[0].segment_norm + w[1].segment_norm);
        out.push(
            growth * (-mu * w[1].t).exp() * first.segment_norm
                + sigma * growth * integral
                + m_bound / mu,
        );
    }
    out
}

fn max_ratio(history: &[NormRecord], envelope: &[f64]) -> f64 {
    history
        .iter()
        .zip(envelope)
        .map(|(h, e)| {
            if *e > 0.0 {
                h.segment_norm / e
            } else if h.segment_norm > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Evolves an ensemble of random histories with norms up to `max_norm_factor·R_B`
/// and checks that every member enters the absorbing ball and stays there.
pub fn absorbing_experiment(flow: &Semiflow, opts: &AbsorbingOptions) -> Result<AbsorbingReport> {
    let params = flow.params();
    let radius = flow.absorbing_radius().ok_or_else(|| {
        Error::Infeasible("sigma*exp(mu*tau) >= mu: no absorbing ball to test".into())
    })?;
    if opts.ensemble == 0 {
        return Err(Error::param("verify.ensemble", "must be >= 1"));
    }
    let ball = radius * (1.0 + opts.overshoot) + opts.floor;
    let scale = if radius > 0.0 { radius } else { 1.0 };
    let m_bound = effective_bound_m(params);
    let grid = params.grid();
    let volume = (2.0 * grid.half_length).powi(grid.dim as i32);
    let m_box = params.nonlinearity.bound * volume.sqrt() + params.forcing.norm_l2();

    let runs: Vec<(MemberOutcome, Vec<NormRecord>)> = (0..opts.ensemble)
        .into_par_iter()
        .map(|i| {
            let norm = opts.max_norm_factor * scale * (i + 1) as f64 / opts.ensemble as f64;
            let mut rng = stream_rng(opts.seed, i as u64);
            let phi = random_segment(
                flow.engine(),
                flow.n_tau(),
                params.tau,
                norm,
                &opts.init,
                &mut rng,
            )?;
            let traj = flow.evolve(&phi, opts.t_final)?;
            let hist = traj.history().to_vec();

            let entry = hist.iter().position(|r| r.segment_norm <= ball);
            let exit = entry.and_then(|e| {
                hist[e..]
                    .iter()
                    .find(|r| r.segment_norm > ball)
                    .map(|r| r.t)
            });
            let max_after = entry
                .map(|e| hist[e..].iter().map(|r| r.segment_norm).fold(0.0, f64::max))
                .unwrap_or(f64::NAN);
            let env = gronwall_envelope(&hist, params.mu, params.sigma, params.tau, m_box);
            let env_pointwise =
                gronwall_envelope(&hist, params.mu, params.sigma, params.tau, m_bound);
            let outcome = MemberOutcome {
                index: i,
                initial_norm: phi.norm(),
                entry_time: entry.map(|e| hist[e].t),
                exit_time: exit,
                max_norm_after_entry: max_after,
                final_norm: traj.segment_norm(),
                gronwall_ratio: max_ratio(&hist, &env),
                gronwall_ratio_pointwise: max_ratio(&hist, &env_pointwise),
            };
            Ok((outcome, hist))
        })
        .collect::<Result<Vec<_>>>()?;

    let (members, histories): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let all_entered = members.iter().all(|m| m.entry_time.is_some());
    let none_exited = members.iter().all(|m| m.exit_time.is_none());
    let gronwall_ok = members
        .iter()
        .all(|m| m.gronwall_ratio <= 1.0 + opts.gronwall_tolerance);
    let max_entry_time = if all_entered {
        members.iter().filter_map(|m| m.entry_time).reduce(f64::max)
    } else {
        None
    };
    Ok(AbsorbingReport {
        radius,
        ball,
        m_bound,
        m_box,
        max_entry_time,
        all_entered,
        none_exited,
        gronwall_ok,
        passed: all_entered && none_exited && gronwall_ok,
        members,
        histories,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionOptions {
    pub pairs: usize,
    /// Settling time applied to both members of a pair before measuring.
    pub pre_run: f64,
    /// Length of the logged difference run.
    pub horizon: f64,
    /// `‖Φ(0)φ‖_C` of the first member before settling.
    pub init_norm: f64,
    /// Relative size of the initial perturbation.
    pub perturbation: f64,
    /// Largest fitted envelope prefactor accepted.
    pub prefactor_limit: f64,
    pub seed: u64,
    pub init: RandomSegmentSpec,
}

impl Default for ContractionOptions {
    fn default() -> Self {
        ContractionOptions {
            pairs: 10,
            pre_run: 5.0,
            horizon: 3.0,
            init_norm: 1.0,
            perturbation: 1e-3,
            prefactor_limit: 2.0,
            seed: 1,
            init: RandomSegmentSpec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub index: usize,
    pub r0: f64,
    /// `r(t*)/r(0)`
    pub zeta_eff: f64,
    /// Fitted prefactors over `t ∈ [0, t*]`.
    pub c_p: f64,
    pub c_q: f64,
    pub c_r: f64,
    /// Same ratios over the whole logged horizon; informational.
    pub c_p_horizon: f64,
    pub c_q_horizon: f64,
    pub c_r_horizon: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractionReport {
    pub m: usize,
    pub alpha: f64,
    pub t_star: f64,
    pub zeta_theory: f64,
    pub rates: SqueezeRates,
    pub max_zeta_eff: f64,
    pub max_c: [f64; 3],
    pub zeta_ok: bool,
    pub envelopes_ok: bool,
    pub passed: bool,
    pub pairs: Vec<PairOutcome>,
    #[serde(skip)]
    pub logs: Vec<DifferenceLog>,
}

/// Measures one-step contraction and fits the prefactors of the three squeezing
/// envelopes on pairs of settled trajectories.
pub fn contraction_experiment(
    flow: &Semiflow,
    spectral: &SpectralData,
    bound: &BoundReport,
    opts: &ContractionOptions,
) -> Result<ContractionReport> {
    let params = flow.params();
    let rates = bound
        .rates
        .ok_or_else(|| Error::Infeasible("bound report carries no squeezing rates".into()))?;
    let spec = spectral.with_cut(bound.m)?;
    let proj = ProjectorSet::new(params.grid(), params.trunc_radius, spec.k_m)?;
    let t_star = bound.t_star;
    if opts.horizon < t_star {
        return Err(Error::param("verify.horizon", "must cover one step t_star"));
    }
    let star_step = flow.steps_for(t_star)? as usize;

    let runs: Vec<(PairOutcome, DifferenceLog)> = (0..opts.pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(opts.seed, i as u64);
            let phi = random_segment(
                flow.engine(),
                flow.n_tau(),
                params.tau,
                opts.init_norm,
                &opts.init,
                &mut rng,
            )?;
            let bump = random_segment(
                flow.engine(),
                flow.n_tau(),
                params.tau,
                opts.perturbation * opts.init_norm,
                &opts.init,
                &mut rng,
            )?;
            let psi_samples = phi
                .samples()
                .iter()
                .zip(bump.samples())
                .map(|(a, b)| a.add(b))
                .collect::<Result<Vec<_>>>()?;
            let psi = crate::integrator::Segment::new(psi_samples, phi.dt())?;
            let a = flow.evolve(&phi, opts.pre_run)?.segment();
            let b = flow.evolve(&psi, opts.pre_run)?.segment();
            let log = flow.difference_trajectories(&a, &b, opts.horizon, &proj)?;
            let r0 = log.records[0].r;
            if r0 == 0.0 {
                return Err(Error::param("pair", "identical members after settling"));
            }
            let envelope = |rec: &crate::integrator::DifferenceRecord| {
                let t = rec.t;
                [
                    rec.components[0] / (rates.envelope_p(t) * r0),
                    rec.components[1] / (rates.envelope_q(t) * r0),
                    rec.components[2] / (rates.envelope_r(t) * r0),
                ]
            };
            let mut fit = [0.0f64; 3];
            let mut full = [0.0f64; 3];
            for (k, rec) in log.records.iter().enumerate() {
                let c = envelope(rec);
                for j in 0..3 {
                    full[j] = full[j].max(c[j]);
                    if k <= star_step {
                        fit[j] = fit[j].max(c[j]);
                    }
                }
            }
            let outcome = PairOutcome {
                index: i,
                r0,
                zeta_eff: log.records[star_step].r / r0,
                c_p: fit[0],
                c_q: fit[1],
                c_r: fit[2],
                c_p_horizon: full[0],
                c_q_horizon: full[1],
                c_r_horizon: full[2],
            };
            Ok((outcome, log))
        })
        .collect::<Result<Vec<_>>>()?;

    let (pairs, logs): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let max_zeta_eff = pairs.iter().map(|p| p.zeta_eff).fold(0.0, f64::max);
    let max_c = [
        pairs.iter().map(|p| p.c_p).fold(0.0, f64::max),
        pairs.iter().map(|p| p.c_q).fold(0.0, f64::max),
        pairs.iter().map(|p| p.c_r).fold(0.0, f64::max),
    ];
    let zeta_ok = max_zeta_eff <= bound.zeta;
    let envelopes_ok = max_c.iter().all(|&c| c <= opts.prefactor_limit);
    Ok(ContractionReport {
        m: bound.m,
        alpha: bound.alpha,
        t_star,
        zeta_theory: bound.zeta,
        rates,
        max_zeta_eff,
        max_c,
        zeta_ok,
        envelopes_ok,
        passed: zeta_ok && envelopes_ok,
        pairs,
        logs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionOptions {
    pub trajectories: usize,
    pub burn_in: f64,
    pub sample_interval: f64,
    pub points_per_trajectory: usize,
    pub embed_k: usize,
    pub init_norm: f64,
    pub seed: u64,
    pub init: RandomSegmentSpec,
    pub estimator: EstimatorOptions,
}

impl Default for DimensionOptions {
    fn default() -> Self {
        DimensionOptions {
            trajectories: 4,
            burn_in: 60.0,
            sample_interval: 0.25,
            points_per_trajectory: 100,
            embed_k: 4,
            init_norm: 1.0,
            seed: 2,
            init: RandomSegmentSpec::default(),
            estimator: EstimatorOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DimensionReport {
    pub estimate: DimensionEstimate,
    pub dim_bound: Option<f64>,
    /// `estimate <= dim_bound`, when a bound is available.
    pub within_bound: Option<bool>,
    pub passed: bool,
    #[serde(skip)]
    pub points: Vec<Vec<f64>>,
}

/// Samples post-transient states as Dirichlet-mode coefficient vectors and
/// estimates their correlation dimension.
pub fn dimension_estimate(
    flow: &Semiflow,
    opts: &DimensionOptions,
    dim_bound: Option<f64>,
) -> Result<DimensionReport> {
    let params = flow.params();
    let proj = ProjectorSet::new(params.grid(), params.trunc_radius, opts.embed_k)?;
    let per = opts.points_per_trajectory;
    let chunks: Vec<Vec<Vec<f64>>> = (0..opts.trajectories)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(opts.seed, i as u64);
            let phi = random_segment(
                flow.engine(),
                flow.n_tau(),
                params.tau,
                opts.init_norm,
                &opts.init,
                &mut rng,
            )?;
            let mut traj = flow.evolve(&phi, opts.burn_in)?;
            let mut pts = Vec::with_capacity(per);
            for k in 0..per {
                if k > 0 {
                    flow.advance(&mut traj, opts.sample_interval)?;
                }
                pts.push(proj.coefficients(traj.state())?);
            }
            Ok(pts)
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<Vec<f64>> = chunks.into_iter().flatten().collect();
    let estimate = correlation_dimension(&points, &opts.estimator);
    let within_bound = dim_bound.map(|b| estimate.estimate <= b);
    Ok(DimensionReport {
        passed: within_bound.unwrap_or(true),
        estimate,
        dim_bound,
        within_bound,
        points,
    })
}
