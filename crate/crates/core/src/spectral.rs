//! Dirichlet spectrum of `Ω_K` and dominant real roots of the delayed
//! characteristic equation `λ + μ + μ_{m,K} = σ·exp(−λτ)`.
//!
//! The map `λ ↦ λ + c − σ·exp(−λτ)` is strictly increasing, so each mode has
//! exactly one real root. For `σ > 0` that root is also the spectral abscissa of
//! the mode: any complex root `a + ib` with `a ≥ λ` would need
//! `|a + ib + c| = σ·exp(−aτ) ≤ λ + c`, impossible once `b ≠ 0`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Residual target for stored roots.
pub const ROOT_TOLERANCE: f64 = 1e-12;

/// Which reading of the characteristic equation to solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharEquation {
    /// `λ + μ + μ_{m,K} − σe^{−λτ} = 0`
    #[default]
    Corrected,
    /// `μ_{m,K}² − (λ + μ − σe^{−λτ}) = 0`, as printed.
    RawPower2,
}

impl CharEquation {
    /// The constant `c` in `λ + c − σe^{−λτ} = 0`.
    fn shift(self, mu: f64, eigenvalue: f64) -> f64 {
        match self {
            CharEquation::Corrected => mu + eigenvalue,
            CharEquation::RawPower2 => mu - eigenvalue * eigenvalue,
        }
    }
}

/// `(mπ/(2K))²` with multiplicity one, for `m = 1..=m_max` on `(−K, K)`.
pub fn dirichlet_eigenvalues(radius: f64, dim: usize, m_max: usize) -> Result<Vec<(f64, usize)>> {
    if dim != 1 {
        return Err(Error::Unsupported(format!(
            "Dirichlet eigenvalues of the {dim}-dimensional ball are not implemented"
        )));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::param(
            "model.trunc_radius",
            format!("must be > 0, got {radius}"),
        ));
    }
    if m_max == 0 {
        return Err(Error::param("spectral.m_max", "must be >= 1"));
    }
    let base = std::f64::consts::PI / (2.0 * radius);
    Ok((1..=m_max)
        .map(|m| ((m as f64 * base).powi(2), 1))
        .collect())
}

/// `λ + shift − σ·exp(−λτ)`
#[inline]
fn char_residual(lambda: f64, shift: f64, sigma: f64, tau: f64) -> f64 {
    lambda + shift - sigma * (-lambda * tau).exp()
}

/// The unique real root of `λ + shift = σ·exp(−λτ)`.
pub fn solve_char_root(shift: f64, sigma: f64, tau: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::param(
            "model.sigma",
            format!("must be >= 0, got {sigma}"),
        ));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::param("model.tau", format!("must be > 0, got {tau}")));
    }
    if sigma == 0.0 {
        return Ok(-shift);
    }
    // h(−shift) = −σe^{shift·τ} < 0; march upward to a sign change.
    let mut lo = -shift;
    let mut width = 1.0f64.max(shift.abs() * 1e-3);
    let mut hi = lo + width;
    while char_residual(hi, shift, sigma, tau) <= 0.0 {
        lo = hi;
        width *= 2.0;
        hi = lo + width;
        if !hi.is_finite() {
            return Err(Error::Infeasible(
                "characteristic root bracket overflowed".into(),
            ));
        }
    }
    // Newton with bisection fallback.
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let h = char_residual(x, shift, sigma, tau);
        if h == 0.0 {
            return Ok(x);
        }
        if h < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dh = 1.0 + sigma * tau * (-x * tau).exp();
        let newton = x - h / dh;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == x || hi - lo <= f64::EPSILON * x.abs().max(1.0) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

/// Dominant real root for one spatial eigenvalue, using the model's `μ, σ, τ`.
pub fn dominant_root(eigenvalue: f64, params: &ModelParams, form: CharEquation) -> Result<f64> {
    solve_char_root(form.shift(params.mu, eigenvalue), params.sigma, params.tau)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeRoot {
    /// Index `m` of the Dirichlet eigenvalue.
    pub index: usize,
    pub eigenvalue: f64,
    pub multiplicity: usize,
    pub root: f64,
    pub residual: f64,
}

/// Ordered roots `ϱ₁ > ϱ₂ > …` with the cut `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    /// Sorted by decreasing root.
    pub modes: Vec<ModeRoot>,
    pub form: CharEquation,
    pub cut: usize,
    pub rho_1: f64,
    pub rho_m: f64,
    /// `k_m = n₁ + … + n_m`
    pub k_m: usize,
    /// `K_m`, copied from the model.
    pub k_m_const: f64,
    pub rho_m_negative: bool,
}

impl SpectralData {
    pub fn rho(&self, j: usize) -> Option<f64> {
        j.checked_sub(1)
            .and_then(|i| self.modes.get(i))
            .map(|m| m.root)
    }

    /// Same table with a different cut index.
    pub fn with_cut(&self, cut: usize) -> Result<SpectralData> {
        if cut == 0 || cut > self.modes.len() {
            return Err(Error::OutOfRange {
                index: cut,
                max: self.modes.len(),
            });
        }
        let rho_m = self.modes[cut - 1].root;
        Ok(SpectralData {
            cut,
            rho_m,
            k_m: self.modes[..cut].iter().map(|m| m.multiplicity).sum(),
            rho_m_negative: rho_m < 0.0,
            ..self.clone()
        })
    }

    /// `m, mu_mK, rho_m, k_m, residual`
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "m,mu_mK,rho_m,k_m,residual")?;
        let mut k = 0;
        for (j, mode) in self.modes.iter().enumerate() {
            k += mode.multiplicity;
            writeln!(
                w,
                "{},{},{},{},{:e}",
                j + 1,
                mode.eigenvalue,
                mode.root,
                k,
                mode.residual
            )?;
        }
        Ok(())
    }
}

/// Solves every mode up to `m_max` and orders the roots.
pub fn build_spectral_data(
    params: &ModelParams,
    cut: usize,
    m_max: usize,
    form: CharEquation,
) -> Result<SpectralData> {
    if cut == 0 || cut > m_max {
        return Err(Error::OutOfRange {
            index: cut,
            max: m_max,
        });
    }
    let eig = dirichlet_eigenvalues(params.trunc_radius, params.grid().dim, m_max)?;
    let mut modes = eig
        .iter()
        .enumerate()
        .map(|(i, &(value, mult))| {
            let shift = form.shift(params.mu, value);
            let root = solve_char_root(shift, params.sigma, params.tau)?;
            Ok(ModeRoot {
                index: i + 1,
                eigenvalue: value,
                multiplicity: mult,
                root,
                residual: char_residual(root, shift, params.sigma, params.tau).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    modes.sort_by(|a, b| b.root.total_cmp(&a.root));
    let rho_1 = modes[0].root;
    let table = SpectralData {
        modes,
        form,
        cut,
        rho_1,
        rho_m: rho_1,
        k_m: 0,
        k_m_const: params.k_m_const,
        rho_m_negative: false,
    };
    table.with_cut(cut)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::model::{NonlinKind, NonlinSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn params(mu: f64, sigma: f64, tau: f64) -> ModelParams {
        let g = Grid::new(1, 2.0 * PI, 64).unwrap();
        let mut p = ModelParams::new(g, mu, sigma, tau, NonlinSpec::new(NonlinKind::Zero, 0.0));
        p.trunc_radius = PI / 2.0;
        p
    }

    #[test]
    fn eigenvalue_examples() {
        let e = dirichlet_eigenvalues(PI / 2.0, 1, 3).unwrap();
        assert_relative_eq!(e[0].0, 1.0, max_relative = 1e-15);
        assert_relative_eq!(e[1].0, 4.0, max_relative = 1e-15);
        let wide = dirichlet_eigenvalues(PI, 1, 3).unwrap();
        for (a, b) in e.iter().zip(&wide) {
            assert_relative_eq!(b.0, a.0 / 4.0, max_relative = 1e-15);
            assert_eq!(a.1, 1);
        }
        assert!(matches!(
            dirichlet_eigenvalues(1.0, 2, 3),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn closed_forms() {
        let p = params(1.0, 0.0, 1.0);
        assert_eq!(
            dominant_root(3.0, &p, CharEquation::Corrected).unwrap(),
            -4.0
        );
        let p = params(1.0, 0.5, 1e-12);
        assert_relative_eq!(
            dominant_root(0.0, &p, CharEquation::Corrected).unwrap(),
            -0.5,
            epsilon = 1e-10
        );
    }

    #[test]
    fn worked_root() {
        let p = params(1.0, 0.5, 1.0);
        let r = dominant_root(1.0, &p, CharEquation::Corrected).unwrap();
        assert!((r + 0.840).abs() < 1e-3, "{r}");
        assert!(char_residual(r, 2.0, 0.5, 1.0).abs() < ROOT_TOLERANCE);
    }

    #[test]
    fn table_is_ordered_and_accurate() {
        let p = params(3.0, 0.2, 1.0);
        let s = build_spectral_data(&p, 2, 20, CharEquation::Corrected).unwrap();
        assert_eq!(s.k_m, 2);
        assert!(s.rho_m_negative);
        for w in s.modes.windows(2) {
            assert!(w[1].root < w[0].root);
            assert!(w[1].eigenvalue > w[0].eigenvalue);
        }
        assert!(s.modes.iter().all(|m| m.residual < ROOT_TOLERANCE));
        assert!(build_spectral_data(&p, 0, 5, CharEquation::Corrected).is_err());
        assert!(build_spectral_data(&p, 6, 5, CharEquation::Corrected).is_err());
    }

    #[test]
    fn raw_form_has_growing_roots() {
        let p = params(3.0, 0.2, 1.0);
        let s = build_spectral_data(&p, 1, 6, CharEquation::RawPower2).unwrap();
        // under the printed reading the leading root belongs to the highest mode
        assert_eq!(s.modes[0].index, 6);
        assert!(s.rho_1 > 0.0);
    }

    #[test]
    fn csv_lists_cumulative_multiplicity() {
        let p = params(3.0, 0.2, 1.0);
        let s = build_spectral_data(&p, 2, 3, CharEquation::Corrected).unwrap();
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let last = text.lines().last().unwrap();
        assert!(last.starts_with("3,"));
        assert_eq!(last.split(',').nth(3), Some("3"));
    }
}
