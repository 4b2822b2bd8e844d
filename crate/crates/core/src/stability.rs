//! Riccati-type information operator, contraction constant and the
//! per-node lower bound used by stability-based node selection.

use nalgebra::{DMatrix, DVector};

use crate::dkf::{info_predict, Predictor};
use crate::error::{Error, Result};
use crate::linalg::{self, SINGULAR_TOL};
use crate::model::LtvSystem;

pub const DEFAULT_K_BAR: usize = 20;
pub const DEFAULT_ALPHA: f64 = 1e-6;

/// Tolerance on the smallest eigenvalue when checking `ψ(I₂) − ψ(I₁) ⪰ 0`.
pub const MONOTONE_TOL: f64 = 1e-9;

/// `ψ(I) = (A I⁻¹ Aᵀ + Q)⁻¹`: the information one step ahead of `I` under
/// `A` and process noise `Q`. Singular `I` goes through the `A⁻¹`/`Q⁻¹`
/// form, which stays finite as `I → 0`.
pub fn psi(info: &DMatrix<f64>, a_k: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let out = if linalg::is_effectively_singular(info, SINGULAR_TOL) {
        psi_general(info, a_k, q)?
    } else {
        let cov = info.clone().try_inverse().ok_or_else(|| numeric("information matrix"))?;
        let pred = a_k * cov * a_k.transpose() + q;
        linalg::symmetrize(&pred.try_inverse().ok_or_else(|| numeric("predicted covariance"))?)
    };
    if !linalg::all_finite(&out) {
        return Err(numeric("psi"));
    }
    Ok(out)
}

/// `ψ` through `M = A⁻ᵀ I A⁻¹`, `C = M (M + Q⁻¹)⁻¹`,
/// `ψ(I) = (I − C) M (I − C)ᵀ + C Q⁻¹ Cᵀ`. Valid for any PSD `I`.
pub fn psi_general(info: &DMatrix<f64>, a_k: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let a_inv = a_k.clone().try_inverse().ok_or_else(|| numeric("transition matrix"))?;
    let q_inv = q.clone().try_inverse().ok_or_else(|| numeric("process noise covariance"))?;
    let zero = DVector::zeros(info.nrows());
    Ok(info_predict(info, &zero, &a_inv, &q_inv, 0)?.0)
}

fn numeric(what: &str) -> Error {
    Error::Numeric { step: 0, what: format!("{what} is singular or non-finite") }
}

/// True iff `ψ(i2) ⪰ ψ(i1)` up to [`MONOTONE_TOL`]. Requires `i1 ⪯ i2`.
pub fn psi_monotone_check(
    i1: &DMatrix<f64>,
    i2: &DMatrix<f64>,
    a_k: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<bool> {
    if i1.shape() != i2.shape() {
        return Err(Error::Dimension("information matrices differ in size".into()));
    }
    if !linalg::is_psd(&(i2 - i1), 1e-12) {
        return Err(Error::Ordering("i1 is not below i2 in the PSD order".into()));
    }
    let diff = psi(i2, a_k, q)? - psi(i1, a_k, q)?;
    Ok(linalg::min_eigenvalue(&diff) >= -MONOTONE_TOL)
}

/// Smallest `γ` with `A⁻¹ Q A⁻ᵀ ⪯ γ (I + αI)⁻¹`, i.e. the largest eigenvalue
/// of `(I + αI)^{1/2} A⁻¹ Q A⁻ᵀ (I + αI)^{1/2}`.
pub fn gamma_hat(a_k: &DMatrix<f64>, q: &DMatrix<f64>, info: &DMatrix<f64>, alpha: f64) -> Result<f64> {
    let (a_inv, _) = linalg::inverse_or_pinv(a_k, SINGULAR_TOL);
    gamma_with_inverse(&a_inv, q, info, alpha)
}

fn gamma_with_inverse(a_inv: &DMatrix<f64>, q: &DMatrix<f64>, info: &DMatrix<f64>, alpha: f64) -> Result<f64> {
    let m = info.nrows();
    let root = linalg::psd_sqrt(&(info + DMatrix::identity(m, m) * alpha));
    let g = linalg::symmetrize(&(&root * a_inv * q * a_inv.transpose() * &root));
    let gamma = linalg::max_eigenvalue(&g).max(0.0);
    if !gamma.is_finite() {
        return Err(numeric("gamma"));
    }
    Ok(gamma)
}

/// `β̂ = min_k 1/(1 + γ̂(k))` over `k ∈ [0, horizon)`.
pub fn beta_hat(sys: &LtvSystem, horizon: usize, i_bound: &DMatrix<f64>, alpha: f64) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::Parameter("beta_hat needs a horizon of at least one step".into()));
    }
    check_alpha(alpha)?;
    let predictor = Predictor::new(sys, horizon)?;
    beta_from_predictor(&predictor, sys.process_noise(), i_bound, alpha)
}

fn beta_from_predictor(predictor: &Predictor, q: &DMatrix<f64>, i_bound: &DMatrix<f64>, alpha: f64) -> Result<f64> {
    let mut beta = 1.0f64;
    for k in 0..predictor.horizon() {
        let g = gamma_with_inverse(predictor.a_inv(k), q, i_bound, alpha)?;
        beta = beta.min(1.0 / (1.0 + g));
    }
    Ok(beta)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("alpha must be positive, got {alpha}")))
    }
}

/// Inverse transition products `(A(k−1)·…·A(k−τ+1))⁻¹` for `τ = 1..=k_bar`,
/// built incrementally. The flag is set if any factor needed the
/// pseudo-inverse.
#[derive(Debug, Clone)]
pub struct BoundKernel {
    inv_products: Vec<DMatrix<f64>>,
    pinv_fallback: bool,
}

impl BoundKernel {
    pub fn new(sys: &LtvSystem, k: usize, k_bar: usize) -> Result<Self> {
        if k_bar == 0 {
            return Err(Error::Parameter("k_bar must be at least 1".into()));
        }
        if k < k_bar {
            return Err(Error::Parameter(format!("bound at step {k} needs k >= k_bar = {k_bar}")));
        }
        let m = sys.state_dim();
        let mut inv_products = Vec::with_capacity(k_bar);
        let mut current = DMatrix::<f64>::identity(m, m);
        let mut pinv_fallback = false;
        inv_products.push(current.clone());
        for j in 1..k_bar {
            let (a_inv, flagged) = linalg::inverse_or_pinv(&sys.transition_matrix(k - j)?, SINGULAR_TOL);
            pinv_fallback |= flagged;
            current = a_inv * current;
            inv_products.push(current.clone());
        }
        Ok(BoundKernel { inv_products, pinv_fallback })
    }

    pub fn pinv_fallback(&self) -> bool {
        self.pinv_fallback
    }

    /// `Ĩ = Σ_τ β̂^{τ−1} P_τ⁻ᵀ l P_τ⁻¹`.
    pub fn apply(&self, beta_hat: f64, l_node: &DMatrix<f64>) -> DMatrix<f64> {
        let m = l_node.nrows();
        let mut acc = DMatrix::zeros(m, m);
        let mut weight = 1.0;
        for p_inv in &self.inv_products {
            acc += p_inv.transpose() * l_node * p_inv * weight;
            weight *= beta_hat;
        }
        linalg::symmetrize(&acc)
    }

    /// `tr Ĩ`, cheaper than forming the matrix.
    pub fn trace(&self, beta_hat: f64, l_node: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        let mut weight = 1.0;
        for p_inv in &self.inv_products {
            acc += weight * (l_node * p_inv * p_inv.transpose()).trace();
            weight *= beta_hat;
        }
        acc
    }
}

/// Lower bound `Ĩ(k)` on a node's information under stable operation, with
/// a flag if some `A(k−j)` needed the pseudo-inverse.
pub fn i_tilde(
    k: usize,
    k_bar: usize,
    beta_hat: f64,
    sys: &LtvSystem,
    l_node: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, bool)> {
    let kernel = BoundKernel::new(sys, k, k_bar)?;
    Ok((kernel.apply(beta_hat, l_node), kernel.pinv_fallback()))
}

/// `tr(info_delayed) > tr(Ĩ(k))`.
pub fn check_bound(info_delayed: &DMatrix<f64>, i_tilde_k: &DMatrix<f64>) -> bool {
    info_delayed.trace() > i_tilde_k.trace()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityParams {
    pub k_bar: usize,
    pub alpha: f64,
    pub beta_hat: f64,
    pub i_bound: DMatrix<f64>,
}

impl StabilityParams {
    pub fn new(k_bar: usize, alpha: f64, beta_hat: f64, i_bound: DMatrix<f64>) -> Result<Self> {
        if k_bar == 0 {
            return Err(Error::Parameter("k_bar must be at least 1".into()));
        }
        check_alpha(alpha)?;
        if !(beta_hat > 0.0 && beta_hat <= 1.0) {
            return Err(Error::Parameter(format!("beta_hat must lie in (0, 1], got {beta_hat}")));
        }
        Ok(StabilityParams { k_bar, alpha, beta_hat, i_bound })
    }

    /// `i_bound` from a delay-free pilot pass of the estimator fed by every
    /// node (total measurement information `total_info`), then `β̂` from it
    /// unless `beta_override` is given.
    pub fn estimate(
        sys: &LtvSystem,
        total_info: &DMatrix<f64>,
        horizon: usize,
        k_bar: usize,
        alpha: f64,
        beta_override: Option<f64>,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let predictor = Predictor::new(sys, horizon)?;
        let i_bound = pilot_info_bound(&predictor, total_info)?;
        let beta = match beta_override {
            Some(b) => b,
            None => beta_from_predictor(&predictor, sys.process_noise(), &i_bound, alpha)?,
        };
        StabilityParams::new(k_bar, alpha, beta, i_bound)
    }
}

/// Largest-trace `I(k|k)` of the information recursion
/// `I(k|k) = I(k|k−1) + total_info` from `I(0|−1) = 0`, symmetrized.
pub fn pilot_info_bound(predictor: &Predictor, total_info: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = total_info.nrows();
    let zero = DVector::zeros(m);
    let mut prior = DMatrix::zeros(m, m);
    let mut best = DMatrix::zeros(m, m);
    for k in 0..=predictor.horizon() {
        let post = linalg::symmetrize(&(&prior + total_info));
        if post.trace() > best.trace() {
            best = post.clone();
        }
        if k < predictor.horizon() {
            prior = predictor.predict(k, &post, &zero)?.0;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Transition;

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn eye(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n)
    }

    fn const_system(a: DMatrix<f64>, q: DMatrix<f64>, n: usize) -> LtvSystem {
        let m = a.nrows();
        LtvSystem::new(Transition::Table(vec![a; n]), q, DVector::zeros(m), 1.0).unwrap()
    }

    #[test]
    fn psi_identity_and_scalar() {
        assert!((psi(&eye(2), &eye(2), &eye(2)).unwrap() - eye(2) * 0.5).amax() < 1e-15);
        assert!((psi(&m1(1.0), &m1(2.0), &m1(1.0)).unwrap()[(0, 0)] - 0.2).abs() < 1e-15);
        assert_eq!(psi(&DMatrix::zeros(2, 2), &eye(2), &eye(2)).unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn monotone_cases() {
        assert!(psi_monotone_check(&DMatrix::zeros(2, 2), &eye(2), &eye(2), &eye(2)).unwrap());
        assert!(psi_monotone_check(&eye(2), &eye(2), &eye(2), &eye(2)).unwrap());
        assert!(matches!(
            psi_monotone_check(&(eye(2) * 2.0), &eye(2), &eye(2), &eye(2)),
            Err(Error::Ordering(_))
        ));
    }

    #[test]
    fn gamma_cases() {
        assert!((gamma_hat(&m1(1.0), &m1(1.0), &m1(0.0), 1.0).unwrap() - 1.0).abs() < 1e-15);
        let g = gamma_hat(&eye(2), &(eye(2) * 0.1), &eye(2), 0.5).unwrap();
        let g4 = gamma_hat(&eye(2), &(eye(2) * 0.4), &eye(2), 0.5).unwrap();
        assert!((g4 - 4.0 * g).abs() < 1e-12);
        assert!(gamma_hat(&eye(2), &(eye(2) * 1e-14), &eye(2), 1e-6).unwrap() < 1e-13);
    }

    #[test]
    fn beta_cases() {
        let sys = const_system(m1(1.0), m1(1.0), 5);
        assert!((beta_hat(&sys, 5, &m1(0.0), 1.0).unwrap() - 0.5).abs() < 1e-15);
        let quiet = const_system(m1(1.0), m1(1e-14), 5);
        assert!(beta_hat(&quiet, 5, &m1(1.0), 1e-6).unwrap() > 1.0 - 1e-12);
        assert!(matches!(beta_hat(&sys, 0, &m1(0.0), 1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn tilde_cases() {
        let sys = LtvSystem::reference();
        let h = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let l = h.transpose() * m1(4.0) * &h;
        let (t, flagged) = i_tilde(30, 1, 0.3, &sys, &l).unwrap();
        assert!(!flagged);
        assert_eq!(t, l);
        assert_eq!(t[(1, 1)], 4.0);
        assert_eq!(t.rank(1e-12), 1);
        let ident = const_system(eye(2), eye(2), 10);
        let (t2, _) = i_tilde(5, 2, 0.5, &ident, &l).unwrap();
        assert!((t2 - &l * 1.5).amax() < 1e-15);
        assert!(matches!(i_tilde(3, 5, 0.5, &sys, &l), Err(Error::Parameter(_))));
    }

    #[test]
    fn kernel_trace_matches_matrix() {
        let sys = LtvSystem::reference();
        let l = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.0]);
        let kernel = BoundKernel::new(&sys, 100, 20).unwrap();
        let full = kernel.apply(0.4, &l);
        assert!((kernel.trace(0.4, &l) - full.trace()).abs() < 1e-9 * full.trace());
    }

    #[test]
    fn bound_check_is_strict() {
        assert!(check_bound(&(eye(2) * 2.0), &eye(2)));
        assert!(!check_bound(&eye(2), &eye(2)));
        let l = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(!check_bound(&DMatrix::zeros(2, 2), &l));
    }

    #[test]
    fn reference_system_beta_in_range() {
        let sys = LtvSystem::reference();
        let total = eye(2) * 1000.0;
        let p = StabilityParams::estimate(&sys, &total, 500, DEFAULT_K_BAR, DEFAULT_ALPHA, None).unwrap();
        assert!(p.beta_hat > 0.0 && p.beta_hat <= 1.0);
        assert!(p.i_bound.trace() >= total.trace());
    }

    #[test]
    fn params_validate() {
        assert!(StabilityParams::new(0, 1e-6, 0.5, eye(2)).is_err());
        assert!(StabilityParams::new(1, 0.0, 0.5, eye(2)).is_err());
        assert!(StabilityParams::new(1, 1e-6, 1.5, eye(2)).is_err());
        assert!(StabilityParams::new(1, 1e-6, 1.0, eye(2)).is_ok());
    }
}
