//! Model coefficients, the nonlinearity catalogue and the standing-hypothesis checks.
//!
//! The reaction term is `f = ε·b` throughout: the Lipschitz constant `L_f` and the
//! global bound `B_f` both carry the ε factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Grid};

/// Built-in bounded, globally Lipschitz nonlinearities `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinKind {
    /// `b(u) = u·exp(-u²)`
    Ricker,
    /// `b(u) = u / (1 + u²)`
    Saturating,
    /// `b ≡ 0`
    Zero,
}

impl NonlinKind {
    /// `sup |b|` over the real line.
    pub fn sup_abs(self) -> f64 {
        match self {
            NonlinKind::Ricker => (2.0 * std::f64::consts::E).sqrt().recip(),
            NonlinKind::Saturating => 0.5,
            NonlinKind::Zero => 0.0,
        }
    }

    /// Global Lipschitz constant of `b`; both non-trivial shapes attain `|b'| = 1` at the origin.
    pub fn lipschitz(self) -> f64 {
        match self {
            NonlinKind::Ricker | NonlinKind::Saturating => 1.0,
            NonlinKind::Zero => 0.0,
        }
    }

    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            NonlinKind::Ricker => u * (-u * u).exp(),
            NonlinKind::Saturating => u / (1.0 + u * u),
            NonlinKind::Zero => 0.0,
        }
    }
}

/// The reaction term `f = ε·b` with its derived constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinSpec {
    pub kind: NonlinKind,
    pub epsilon: f64,
    /// `L_f = ε·Lip(b)`
    pub lip: f64,
    /// `B_f = ε·sup|b|`
    pub bound: f64,
}

impl NonlinSpec {
    pub fn new(kind: NonlinKind, epsilon: f64) -> Self {
        NonlinSpec {
            kind,
            epsilon,
            lip: epsilon * kind.lipschitz(),
            bound: epsilon * kind.sup_abs(),
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.epsilon * self.kind.eval(u)
    }

    /// Pointwise `ε·b` applied to every node.
    pub fn apply(&self, field: &Field) -> Field {
        field.map(|u| self.eval(u))
    }
}

/// Applies the reaction term pointwise.
pub fn nonlinearity_apply(spec: &NonlinSpec, field: &Field) -> Field {
    spec.apply(field)
}

/// Every scalar coefficient of the model plus the forcing field.
#[derive(Clone, Debug)]
pub struct ModelParams {
    /// Decay coefficient μ.
    pub mu: f64,
    /// Delayed linear feedback σ.
    pub sigma: f64,
    /// Delay τ.
    pub tau: f64,
    /// Kernel width ι of the nonlocal Gaussian.
    pub iota: f64,
    pub forcing: Field,
    pub nonlinearity: NonlinSpec,
    /// Radius K of the ball Ω_K used in the near/far split.
    pub trunc_radius: f64,
    /// Constant of the far-field tail estimate.
    pub c2: f64,
    /// Decay constant K_m of the stable spectral projection.
    pub k_m_const: f64,
}

impl ModelParams {
    /// Parameters with zero forcing and the documented defaults `K = L/4`, `c₂ = 1`, `K_m = 1`.
    pub fn new(grid: Grid, mu: f64, sigma: f64, tau: f64, nonlinearity: NonlinSpec) -> Self {
        ModelParams {
            mu,
            sigma,
            tau,
            iota: 1.0,
            forcing: Field::zeros(grid),
            nonlinearity,
            trunc_radius: grid.half_length / 4.0,
            c2: 1.0,
            k_m_const: 1.0,
        }
    }

    pub fn grid(&self) -> Grid {
        self.forcing.grid()
    }

    pub fn epsilon(&self) -> f64 {
        self.nonlinearity.epsilon
    }

    pub fn lip_f(&self) -> f64 {
        self.nonlinearity.lip
    }

    /// `β = σ·exp(μτ)`
    pub fn beta(&self) -> f64 {
        self.sigma * (self.mu * self.tau).exp()
    }

    /// `σ·exp(μτ) − μ < 0`
    pub fn absorbing_ok(&self) -> bool {
        self.beta() - self.mu < 0.0
    }

    /// Exponent of the far-field estimate, `c₂(σ + L_f²) − (μ − σ − 1)`.
    pub fn tail_exponent(&self) -> f64 {
        let lf = self.lip_f();
        self.c2 * (self.sigma + lf * lf) - (self.mu - self.sigma - 1.0)
    }

    pub fn tail_contracts(&self) -> bool {
        self.tail_exponent() < 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<HypothesisCheck>,
    pub absorbing_ok: bool,
    pub tail_contracts: bool,
    pub beta: f64,
    pub lip_f: f64,
    pub bound_f: f64,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn require_positive(field: &str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::param(field, format!("must be finite, got {value}")));
    }
    if value <= 0.0 {
        return Err(Error::param(field, format!("must be > 0, got {value}")));
    }
    Ok(())
}

fn require_non_negative(field: &str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::param(field, format!("must be finite, got {value}")));
    }
    if value < 0.0 {
        return Err(Error::param(field, format!("must be >= 0, got {value}")));
    }
    Ok(())
}

/// Checks the standing hypotheses. Structural violations are errors; the two
/// dynamical conditions are reported as flags.
pub fn validate(params: &ModelParams) -> Result<ValidationReport> {
    require_positive("model.mu", params.mu)?;
    require_non_negative("model.sigma", params.sigma)?;
    require_non_negative("model.epsilon", params.epsilon())?;
    require_positive("model.tau", params.tau)?;
    require_positive("model.iota", params.iota)?;
    require_positive("model.trunc_radius", params.trunc_radius)?;
    require_positive("model.c2", params.c2)?;
    if !params.k_m_const.is_finite() || params.k_m_const < 1.0 {
        return Err(Error::param(
            "model.k_m_const",
            format!("must be finite and >= 1, got {}", params.k_m_const),
        ));
    }
    if !params.forcing.is_finite() {
        return Err(Error::param("model.forcing", "contains non-finite values"));
    }

    let beta = params.beta();
    let absorbing_ok = params.absorbing_ok();
    let tail = params.tail_exponent();
    let tail_contracts = tail < 0.0;

    let checks = vec![
        HypothesisCheck {
            name: "positivity".into(),
            passed: true,
            detail: "mu, tau, iota, K, c2 > 0; sigma, epsilon >= 0; K_m >= 1".into(),
        },
        HypothesisCheck {
            name: "absorbing_ok".into(),
            passed: absorbing_ok,
            detail: format!("sigma*exp(mu*tau) - mu = {:.6e}", beta - params.mu),
        },
        HypothesisCheck {
            name: "tail_contracts".into(),
            passed: tail_contracts,
            detail: format!("c2*(sigma + L_f^2) - (mu - sigma - 1) = {tail:.6e}"),
        },
    ];

    Ok(ValidationReport {
        checks,
        absorbing_ok,
        tail_contracts,
        beta,
        lip_f: params.lip_f(),
        bound_f: params.nonlinearity.bound,
    })
}

/// `M = B_f + ‖g‖`.
pub fn effective_bound_m(params: &ModelParams) -> f64 {
    params.nonlinearity.bound + params.forcing.norm_l2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> Grid {
        Grid::new(1, 2.0 * std::f64::consts::PI, 64).unwrap()
    }

    fn params(mu: f64, sigma: f64, tau: f64) -> ModelParams {
        ModelParams::new(
            grid(),
            mu,
            sigma,
            tau,
            NonlinSpec::new(NonlinKind::Ricker, 1.0),
        )
    }

    #[test]
    fn absorbing_flag_examples() {
        let r = validate(&params(1.0, 0.2, 1.0)).unwrap();
        assert!(r.absorbing_ok);
        assert_relative_eq!(r.beta, 0.2 * std::f64::consts::E, max_relative = 1e-15);
        assert!(!validate(&params(1.0, 1.0, 1.0)).unwrap().absorbing_ok);
        for &(mu, tau) in &[(0.1, 5.0), (3.0, 0.01), (10.0, 10.0)] {
            assert!(validate(&params(mu, 0.0, tau)).unwrap().absorbing_ok);
        }
    }

    #[test]
    fn validation_rejects_named_fields() {
        let mut p = params(1.0, 0.2, 1.0);
        p.tau = f64::NAN;
        match validate(&p) {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "model.tau"),
            other => panic!("unexpected {other:?}"),
        }
        let mut p = params(-1.0, 0.2, 1.0);
        p.mu = -1.0;
        assert!(
            matches!(validate(&p), Err(Error::InvalidParameter { field, .. }) if field == "model.mu")
        );
        let mut p = params(1.0, 0.2, 1.0);
        p.k_m_const = 0.5;
        assert!(validate(&p).is_err());
    }

    #[test]
    fn validate_is_pure() {
        let p = params(1.0, 0.2, 1.0);
        assert_eq!(validate(&p).unwrap(), validate(&p).unwrap());
    }

    #[test]
    fn tail_flag() {
        let mut p = params(3.0, 0.2, 1.0);
        p.nonlinearity = NonlinSpec::new(NonlinKind::Ricker, 0.1);
        assert!(p.tail_contracts());
        p.c2 = 1000.0;
        assert!(!p.tail_contracts());
    }

    #[test]
    fn nonlinearity_values() {
        let g = grid();
        let zero = NonlinSpec::new(NonlinKind::Zero, 3.0);
        let f = Field::from_fn(g, |x| x[0].sin() * 5.0);
        assert!(zero.apply(&f).values().iter().all(|&v| v == 0.0));

        let ricker = NonlinSpec::new(NonlinKind::Ricker, 1.0);
        assert!(ricker
            .apply(&Field::constant(g, 0.0))
            .values()
            .iter()
            .all(|&v| v == 0.0));
        let one = ricker.apply(&Field::constant(g, 1.0));
        for &v in one.values() {
            assert_relative_eq!(v, (-1.0f64).exp(), max_relative = 1e-15);
        }
    }

    #[test]
    fn sup_bounds_match_maximisers() {
        assert_relative_eq!(
            NonlinKind::Ricker.sup_abs(),
            NonlinKind::Ricker.eval(0.5f64.sqrt()),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            NonlinKind::Saturating.sup_abs(),
            NonlinKind::Saturating.eval(1.0)
        );
        assert_relative_eq!(NonlinKind::Ricker.sup_abs(), 0.428_881, epsilon = 1e-6);
    }

    #[test]
    fn effective_bound_examples() {
        let g = grid();
        let mut p = params(1.0, 0.2, 1.0);
        p.nonlinearity = NonlinSpec::new(NonlinKind::Zero, 1.0);
        assert_eq!(effective_bound_m(&p), 0.0);
        p.nonlinearity = NonlinSpec::new(NonlinKind::Ricker, 1.0);
        assert_relative_eq!(
            effective_bound_m(&p),
            1.0 / (2.0 * std::f64::consts::E).sqrt()
        );
        // constant c over [-L, L) has norm c·sqrt(2L)
        let c = 0.5 / (2.0 * g.half_length).sqrt();
        p.forcing = Field::constant(g, c);
        p.nonlinearity = NonlinSpec::new(NonlinKind::Saturating, 2.0);
        assert_relative_eq!(effective_bound_m(&p), 1.5, max_relative = 1e-12);
    }
}
