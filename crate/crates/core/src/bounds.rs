//! Closed-form theoretical quantities: the absorbing radius, the three squeezing
//! envelopes, the one-step contraction factor ζ, the fractal-dimension bound and
//! a grid search over the cut index `m` and covering slack `α`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{effective_bound_m, ModelParams};
use crate::spectral::{build_spectral_data, CharEquation, SpectralData};

/// `2(M/μ + Mβ/(μ(μ−β)))` with `β = σe^{μτ}`.
pub fn absorbing_radius_from(m_bound: f64, mu: f64, sigma: f64, tau: f64) -> Result<f64> {
    let beta = sigma * (mu * tau).exp();
    if beta >= mu {
        return Err(Error::Infeasible(format!(
            "sigma*exp(mu*tau) = {beta} is not below mu = {mu}"
        )));
    }
    Ok(2.0 * (m_bound / mu + m_bound * beta / (mu * (mu - beta))))
}

/// Radius `R_B` of the absorbing ball for the model's `M = B_f + ‖g‖`.
pub fn absorbing_radius(params: &ModelParams) -> Result<f64> {
    absorbing_radius_from(
        effective_bound_m(params),
        params.mu,
        params.sigma,
        params.tau,
    )
}

/// Exponential envelopes of the three projected difference components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezeRates {
    /// `L_f + ϱ₁`
    pub rate_p: f64,
    /// `K_m`
    pub amp_q: f64,
    /// `ϱ_m`
    pub rate_q1: f64,
    /// `K_m L_f / (ϱ₁ + L_f − ϱ_m)`
    pub coef_q2: f64,
    /// `L_f + ϱ₁`
    pub rate_q2: f64,
    /// `√c₂`
    pub amp_r: f64,
    /// `½[c₂(σ + L_f²) − (μ − σ − 1)]`
    pub rate_r: f64,
    pub c2: f64,
    /// `rate_r < 0`
    pub tail_contracts: bool,
}

impl SqueezeRates {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        lip_f: f64,
        rho_1: f64,
        rho_m: f64,
        k_m_const: f64,
        c2: f64,
        sigma: f64,
        mu: f64,
    ) -> Result<Self> {
        let denominator = rho_1 + lip_f - rho_m;
        let coef_q2 = if lip_f == 0.0 {
            0.0
        } else if denominator > 0.0 {
            k_m_const * lip_f / denominator
        } else {
            return Err(Error::Infeasible(format!(
                "rho_1 + L_f - rho_m = {denominator} must be positive"
            )));
        };
        let rate_r = 0.5 * (c2 * (sigma + lip_f * lip_f) - (mu - sigma - 1.0));
        Ok(SqueezeRates {
            rate_p: lip_f + rho_1,
            amp_q: k_m_const,
            rate_q1: rho_m,
            coef_q2,
            rate_q2: lip_f + rho_1,
            amp_r: c2.sqrt(),
            rate_r,
            c2,
            tail_contracts: rate_r < 0.0,
        })
    }

    /// `e^{rate_p t}`
    pub fn envelope_p(&self, t: f64) -> f64 {
        (self.rate_p * t).exp()
    }

    /// `K_m e^{ϱ_m t} + coef_q2 e^{(L_f+ϱ₁)t}`
    pub fn envelope_q(&self, t: f64) -> f64 {
        self.amp_q * (self.rate_q1 * t).exp() + self.coef_q2 * (self.rate_q2 * t).exp()
    }

    /// `√c₂ e^{rate_r t}`
    pub fn envelope_r(&self, t: f64) -> f64 {
        self.amp_r * (self.rate_r * t).exp()
    }
}

pub fn squeeze_rates(params: &ModelParams, spectral: &SpectralData) -> Result<SqueezeRates> {
    SqueezeRates::from_parts(
        params.lip_f(),
        spectral.rho_1,
        spectral.rho_m,
        spectral.k_m_const,
        params.c2,
        params.sigma,
        params.mu,
    )
}

/// The four summands of ζ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaTerms {
    pub covering: f64,
    pub stable_linear: f64,
    pub stable_coupling: f64,
    pub tail: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaTerm {
    Covering,
    StableLinear,
    StableCoupling,
    Tail,
}

impl ZetaTerms {
    pub fn total(&self) -> f64 {
        self.covering + self.stable_linear + self.stable_coupling + self.tail
    }

    pub fn dominant(&self) -> ZetaTerm {
        let all = [
            (ZetaTerm::Covering, self.covering),
            (ZetaTerm::StableLinear, self.stable_linear),
            (ZetaTerm::StableCoupling, self.stable_coupling),
            (ZetaTerm::Tail, self.tail),
        ];
        all.iter()
            .fold(all[0], |best, &c| if c.1 > best.1 { c } else { best })
            .0
    }
}

/// Summands of ζ for a step of length `t_star`.
pub fn zeta_terms(alpha: f64, rates: &SqueezeRates, t_star: f64) -> ZetaTerms {
    ZetaTerms {
        covering: alpha * rates.envelope_p(t_star),
        stable_linear: rates.amp_q * (rates.rate_q1 * t_star).exp(),
        stable_coupling: rates.coef_q2 * (rates.rate_q2 * t_star).exp(),
        tail: rates.envelope_r(t_star),
    }
}

/// ζ of the time-one map.
pub fn zeta(alpha: f64, rates: &SqueezeRates) -> f64 {
    zeta_terms(alpha, rates, 1.0).total()
}

/// `ln(k_m·2^{k_m}(1+1/α)^{k_m}) = ln k_m + k_m ln(2+2/α)`.
pub fn ln_covering_count(k_m: usize, alpha: f64) -> f64 {
    let k = k_m as f64;
    k.ln() + k * (2.0 + 2.0 / alpha).ln()
}

/// Number of balls `⌈k_m 2^{k_m}(1+1/α)^{k_m}⌉` used per covering step (may be `inf`).
pub fn covering_count_per_step(k_m: usize, alpha: f64) -> f64 {
    ln_covering_count(k_m, alpha).exp().ceil()
}

/// `(ln k_m + k_m ln(2+2/α)) / (−ln ζ)`.
pub fn dim_bound(k_m: usize, alpha: f64, zeta: f64) -> Result<f64> {
    if k_m == 0 {
        return Err(Error::param("k_m", "must be >= 1"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("must be > 0, got {alpha}")));
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::Infeasible(format!("zeta = {zeta} is not in (0, 1)")));
    }
    let k = k_m as f64;
    Ok((k.ln() + k * (2.0 + 2.0 / alpha).ln()) / (-zeta.ln()))
}

/// Log-spaced search grid for α.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        AlphaGrid {
            min: 1e-3,
            max: 10.0,
            points: 200,
        }
    }
}

impl AlphaGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points <= 1 {
            return vec![self.min];
        }
        let (a, b) = (self.min.ln(), self.max.ln());
        (0..self.points)
            .map(|i| (a + (b - a) * i as f64 / (self.points - 1) as f64).exp())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundOptions {
    pub alpha_grid: AlphaGrid,
    /// Values of α scanned in addition to the grid.
    pub extra_alphas: Vec<f64>,
    /// Length of the discrete time step the covering argument iterates.
    pub t_star: f64,
    pub form: CharEquation,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            alpha_grid: AlphaGrid::default(),
            extra_alphas: Vec::new(),
            t_star: 1.0,
            form: CharEquation::Corrected,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub m: usize,
    pub alpha: f64,
    pub zeta: f64,
    pub k_m: usize,
    /// Present when feasible.
    pub dim_bound: Option<f64>,
    pub feasible: bool,
    pub covering_count_per_step: f64,
    pub t_star: f64,
    /// `−ln ζ / t*`, the exponential attraction rate of the covering construction.
    pub attraction_rate: Option<f64>,
    pub terms: ZetaTerms,
    pub dominant_term: ZetaTerm,
    pub rho_1: f64,
    pub rho_m: f64,
    pub rates: Option<SqueezeRates>,
    pub absorbing_ok: bool,
    pub tail_contracts: bool,
    /// Why the point (or the whole scan) is infeasible.
    pub notes: Vec<String>,
}

/// Evaluates ζ and the dimension bound at one `(m, α)`.
pub fn bound_at(
    params: &ModelParams,
    table: &SpectralData,
    m: usize,
    alpha: f64,
    t_star: f64,
) -> Result<BoundReport> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param(
            "bounds.alpha",
            format!("must be > 0, got {alpha}"),
        ));
    }
    if !(t_star > 0.0 && t_star.is_finite()) {
        return Err(Error::param(
            "bounds.t_star",
            format!("must be > 0, got {t_star}"),
        ));
    }
    let spec = table.with_cut(m)?;
    let rates = squeeze_rates(params, &spec)?;
    let terms = zeta_terms(alpha, &rates, t_star);
    let z = terms.total();
    let mut notes = Vec::new();
    if !spec.rho_m_negative {
        notes.push(format!("rho_{m} = {} is not negative", spec.rho_m));
    }
    if !rates.tail_contracts {
        notes.push(format!("tail rate {} is not negative", rates.rate_r));
    }
    if !params.absorbing_ok() {
        notes.push("sigma*exp(mu*tau) >= mu: absorbing-set hypothesis fails".into());
    }
    let feasible = z > 0.0 && z < 1.0;
    if !feasible {
        notes.push(format!("zeta = {z} >= 1"));
    }
    let dim = if feasible {
        Some(dim_bound(spec.k_m, alpha, z)?)
    } else {
        None
    };
    Ok(BoundReport {
        m,
        alpha,
        zeta: z,
        k_m: spec.k_m,
        dim_bound: dim,
        feasible,
        covering_count_per_step: covering_count_per_step(spec.k_m, alpha),
        t_star,
        attraction_rate: feasible.then(|| -z.ln() / t_star),
        terms,
        dominant_term: terms.dominant(),
        rho_1: spec.rho_1,
        rho_m: spec.rho_m,
        rates: Some(rates),
        absorbing_ok: params.absorbing_ok(),
        tail_contracts: params.tail_contracts(),
        notes,
    })
}

fn golden_refine(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    // golden-section in ln α
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c.exp()), f(d.exp()));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d.exp());
        }
    }
    if fc < fd {
        (c.exp(), fc)
    } else {
        (d.exp(), fd)
    }
}

/// Scans `m ∈ 1..=m_max` and α over the grid, returning the feasible point with
/// the smallest dimension bound, or the smallest-ζ point with notes when none is feasible.
pub fn optimize_bound(
    params: &ModelParams,
    m_max: usize,
    options: &BoundOptions,
) -> Result<BoundReport> {
    let table = build_spectral_data(params, 1, m_max, options.form)?;
    optimize_bound_with(params, &table, options)
}

/// As [`optimize_bound`], reusing an existing spectral table.
pub fn optimize_bound_with(
    params: &ModelParams,
    table: &SpectralData,
    options: &BoundOptions,
) -> Result<BoundReport> {
    let mut alphas = options.alpha_grid.values();
    alphas.extend(options.extra_alphas.iter().copied().filter(|a| *a > 0.0));
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();

    let mut best: Option<BoundReport> = None;
    let mut least_zeta: Option<BoundReport> = None;
    let mut skipped = Vec::new();
    for m in 1..=table.modes.len() {
        let spec = table.with_cut(m)?;
        if squeeze_rates(params, &spec).is_err() {
            skipped.push(format!("m = {m}: rho_1 + L_f - rho_m is not positive"));
            continue;
        }
        let mut best_idx_for_m: Option<usize> = None;
        let mut best_for_m = f64::INFINITY;
        for (i, &alpha) in alphas.iter().enumerate() {
            let report = bound_at(params, table, m, alpha, options.t_star)?;
            if least_zeta.as_ref().is_none_or(|r| report.zeta < r.zeta) {
                least_zeta = Some(report.clone());
            }
            if let Some(d) = report.dim_bound {
                if d < best_for_m {
                    best_for_m = d;
                    best_idx_for_m = Some(i);
                }
                if best
                    .as_ref()
                    .and_then(|b| b.dim_bound)
                    .is_none_or(|b| d < b)
                {
                    best = Some(report);
                }
            }
        }
        // polish α between the neighbours of this m's grid minimum
        if let Some(i) = best_idx_for_m {
            let lo = alphas[i.saturating_sub(1)];
            let hi = alphas[(i + 1).min(alphas.len() - 1)];
            if hi > lo {
                let objective = |a: f64| {
                    bound_at(params, table, m, a, options.t_star)
                        .ok()
                        .and_then(|r| r.dim_bound)
                        .unwrap_or(f64::INFINITY)
                };
                let (a, d) = golden_refine(lo, hi, objective);
                if best
                    .as_ref()
                    .and_then(|b| b.dim_bound)
                    .is_none_or(|b| d < b)
                {
                    best = Some(bound_at(params, table, m, a, options.t_star)?);
                }
            }
        }
    }
    match best {
        Some(mut r) => {
            r.notes.extend(skipped);
            Ok(r)
        }
        None => {
            let mut r = least_zeta.ok_or_else(|| {
                Error::Infeasible("no cut index admits finite squeezing rates".into())
            })?;
            r.notes.push(format!(
                "no feasible (m, alpha) in the scan; dominant term at the least-zeta point: {:?}",
                r.dominant_term
            ));
            r.notes.extend(skipped);
            Ok(r)
        }
    }
}
