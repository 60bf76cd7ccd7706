//! A priori error budgets for the truncated chaos expansion and for the full
//! filter. The constants in these bounds exist but are not computable from
//! the model, so every constant is supplied by the caller and the results are
//! diagnostics rather than guarantees.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Inputs to the error bounds. `c`, `c_nu_t`, `c_nu_t_w`, `c_f` and `eps_b`
/// are user-supplied constants; `eps_b` is zero when the `B_l` commute
/// (in particular for a single observation channel).
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorBudget<T> {
    pub delta: T,
    pub max_length: u32,
    pub max_order: u32,
    pub k: usize,
    pub r: u32,
    pub d: usize,
    pub nu: T,
    pub w: T,
    pub c_rho: T,
    pub c: T,
    pub c_nu_t: T,
    pub c_nu_t_w: T,
    pub c_f: T,
    pub horizon: T,
    pub eps_b: T,
    /// `E|U_0|²` for the one-window bound.
    pub initial_second_moment: T,
}

impl<T: Real> ErrorBudget<T> {
    fn check(&self) -> Result<()> {
        let values = [
            ("delta", self.delta),
            ("nu", self.nu),
            ("w", self.w),
            ("c_rho", self.c_rho),
            ("c", self.c),
            ("c_nu_t", self.c_nu_t),
            ("c_nu_t_w", self.c_nu_t_w),
            ("c_f", self.c_f),
            ("horizon", self.horizon),
            ("eps_b", self.eps_b),
            ("initial_second_moment", self.initial_second_moment),
        ];
        for (name, v) in values {
            if !(v >= T::zero() && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("budget.{name} must be finite and nonnegative, got {v}")));
            }
        }
        if self.max_order == 0 || self.k == 0 || self.d == 0 {
            return Err(Error::InvalidArgument("budget needs n >= 1, K >= 1, d >= 1".into()));
        }
        Ok(())
    }
}

fn factorial<T: Real>(n: u32) -> T {
    (2..=n).fold(T::one(), |acc, j| acc * T::count(j as usize))
}

/// Terms of the one-window chaos truncation bound
/// `e^{CΔ} ((CΔ)^{N+1}/(N+1)! + Δ²/n (ε(B) + CΔ)) E|U_0|²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChaosBound<T> {
    pub length_term: T,
    pub order_term: T,
    pub total: T,
}

pub fn chaos_error_bound<T: Real>(budget: &ErrorBudget<T>) -> Result<ChaosBound<T>> {
    budget.check()?;
    let cd = budget.c * budget.delta;
    let scale = cd.exp() * budget.initial_second_moment;
    let length_term = scale * cd.powi(budget.max_length as i32 + 1) / factorial::<T>(budget.max_length + 1);
    let order_term =
        scale * budget.delta * budget.delta / T::count(budget.max_order as usize) * (budget.eps_b + cd);
    Ok(ChaosBound { length_term, order_term, total: length_term + order_term })
}

/// Terms of the multi-step bounds for the density and for a functional
/// `φ[f]`, with `κ = K^{1/d}` and `C_κ = 1 + C_ρ κ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterBound<T> {
    pub kappa: T,
    pub c_kappa: T,
    /// `e^{C C_κ T}`, the amplification shared by the time-discretization terms.
    pub growth: T,
    pub density_galerkin_term: T,
    pub order_term: T,
    pub length_term: T,
    pub density_total: T,
    /// `None` when `ν <= d + 1 + w`, where the functional bound does not apply.
    pub functional_galerkin_term: Option<T>,
    pub functional_total: Option<T>,
}

pub fn filter_error_bound<T: Real>(budget: &ErrorBudget<T>) -> Result<FilterBound<T>> {
    budget.check()?;
    let d = T::count(budget.d);
    if budget.nu <= d + T::one() {
        return Err(Error::InvalidArgument(format!("bound needs nu > d + 1, got nu={} with d={}", budget.nu, budget.d)));
    }
    let kf = T::count(budget.k);
    let kappa = kf.powf(T::one() / d);
    let c_kappa = T::one() + budget.c_rho * kappa;
    let growth = (budget.c * c_kappa * budget.horizon).exp();
    let delta = budget.delta;
    let galerkin = budget.c_nu_t / kf.powf(T::lit(2.0) * (budget.nu - d - T::one()) / d);
    let order_term = budget.c
        * (c_kappa * delta + (kappa * kappa + budget.c_rho * kappa * kappa * kappa) * delta * delta)
        / T::count(budget.max_order as usize)
        * growth;
    let length_term = (budget.c * c_kappa).powi(budget.max_length as i32 + 1) * delta.powi(budget.max_length as i32)
        / factorial::<T>(budget.max_length + 1)
        * growth;
    let (functional_galerkin_term, functional_total) = if budget.nu > d + T::one() + budget.w {
        let g = budget.c_nu_t_w * budget.c_f / kf.powf(T::lit(2.0) * (budget.nu - budget.w - d - T::one()) / d);
        (Some(g), Some(g + budget.c_f * (order_term + length_term)))
    } else {
        (None, None)
    };
    Ok(FilterBound {
        kappa,
        c_kappa,
        growth,
        density_galerkin_term: galerkin,
        order_term,
        length_term,
        density_total: galerkin + order_term + length_term,
        functional_galerkin_term,
        functional_total,
    })
}
