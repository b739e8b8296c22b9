//! The five block updates of the alternating optimization.
//!
//! X^f, S, and H_v use KKT-derived multiplicative rules (with an ε guard in
//! every denominator); W uses simplex-projected gradient descent with
//! Armijo backtracking; the view weights solve a small non-negative
//! quadratic program by projected gradient with a Lipschitz-safe step.

use ndarray::{Array1, Array2, Zip};

use super::{frob_inner, frob_sq, Hyperparams, ModelState, Problem, Weights};
use crate::error::{Error, Result};
use crate::structural_entropy::{se_grad_raw, se_value_raw};

const MAX_ARMIJO_HALVINGS: usize = 50;
const ALPHA_QP_TOL: f64 = 1e-10;
const ALPHA_QP_MAX_ITERS: usize = 200_000;

fn ensure_finite(m: &Array2<f64>, iteration: usize, context: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical { iteration, context: context.to_string() })
    }
}

/// X^f ← X^f ⊙ [YWᵀ + Σ_v(β α_v S X_v P_v + γ X_v H_v P_v)]
///            ⊘ [X^f W Wᵀ + (β + γ) X^f + ε],
/// using Σ_v X^f P_vᵀ P_v = X^f for the γ part of the denominator.
pub(super) fn update_xf(
    p: &Problem,
    st: &mut ModelState,
    wts: &Weights,
    iteration: usize,
) -> Result<()> {
    let mut num = p.y.dot(&st.w.t());
    for (v, x) in p.views.iter().enumerate() {
        let off = p.placement.offset(v);
        let cols = ndarray::s![.., off..off + x.ncols()];
        if wts.beta > 0.0 {
            let sx = st.s.dot(x);
            num.slice_mut(cols).scaled_add(wts.beta * st.alpha_view[v], &sx);
        }
        if wts.gamma > 0.0 {
            let xh = x.dot(&st.h[v]);
            num.slice_mut(cols).scaled_add(wts.gamma, &xh);
        }
    }
    let mut den = st.xf.dot(&st.w).dot(&st.w.t());
    den.scaled_add(wts.beta + wts.gamma, &st.xf);
    den += wts.eps;

    Zip::from(&mut st.xf).and(&num).and(&den).for_each(|x, &n, &d| *x *= n / d);
    ensure_finite(&st.xf, iteration, "update_xf")
}

fn w_objective(p: &Problem, xf: &Array2<f64>, w: &Array2<f64>, alpha: f64) -> f64 {
    let fit = frob_sq(&(&xf.dot(w) - &p.y));
    if alpha > 0.0 {
        fit + alpha * se_value_raw(p.graph.adjacency(), w)
    } else {
        fit
    }
}

/// Projected gradient descent on J(W) = ‖X^f W − Y‖² + α·L_SE(W) with
/// Armijo backtracking: accept Π(W − ηG) once J drops by c·η·‖G‖²_F,
/// halving η up to 50 times. An exhausted line search keeps W and reports
/// a stall. The inner loop stops on its own relative-decrease tolerance.
pub(super) fn update_w(
    p: &Problem,
    st: &mut ModelState,
    hp: &Hyperparams,
    wts: &Weights,
    iteration: usize,
) -> Result<bool> {
    let a = p.graph.adjacency();
    let mut w = st.w.clone();
    let mut j_cur = w_objective(p, &st.xf, &w, wts.alpha);
    let mut stalled = false;

    for _ in 0..hp.max_inner_iters {
        let resid = st.xf.dot(&w) - &p.y;
        let mut grad = st.xf.t().dot(&resid) * 2.0;
        if wts.alpha > 0.0 {
            grad.scaled_add(wts.alpha, &se_grad_raw(a, &w));
        }
        ensure_finite(&grad, iteration, "update_w gradient")?;
        let gnorm2 = frob_sq(&grad);
        if gnorm2 == 0.0 {
            break;
        }

        let mut eta = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_ARMIJO_HALVINGS {
            let mut cand = &w - &(&grad * eta);
            super::simplex::project_rows(&mut cand);
            let j_cand = w_objective(p, &st.xf, &cand, wts.alpha);
            if j_cand <= j_cur - hp.armijo_c * eta * gnorm2 {
                accepted = Some((cand, j_cand));
                break;
            }
            eta *= hp.armijo_shrink;
        }
        let Some((cand, j_new)) = accepted else {
            stalled = true;
            break;
        };
        let rel = (j_cur - j_new).abs() / (j_cur + hp.eps);
        w = cand;
        j_cur = j_new;
        if rel < hp.w_tol || hp.w_single_step {
            break;
        }
    }
    st.w = w;
    Ok(stalled)
}

/// S ← S ⊙ [β X^f Kᵀ + β Σ_v α_v S_v + B⁻ S]
///        ⊘ [β S (Σ_v α_v² X_v X_vᵀ) + B⁺ S + β S + ε]
/// with K = Σ_v α_v X_v P_v and B⁺/B⁻ the element-wise sign split of
/// λ L_Y L_Yᵀ. The split keeps both sides non-negative; with λ = 0 this is
/// exactly the plain multiplicative rule.
pub(super) fn update_s(
    p: &Problem,
    st: &mut ModelState,
    wts: &Weights,
    iteration: usize,
) -> Result<()> {
    let n = p.samples();
    let k = p.weighted_concat(&st.alpha_view);
    let mixed = p.weighted_semantic(&st.alpha_view);

    let mut num = st.xf.dot(&k.t()) * wts.beta;
    num.scaled_add(wts.beta, &mixed);
    if wts.lambda > 0.0 {
        num.scaled_add(wts.lambda, &p.b0_neg.dot(&st.s));
    }

    let mut den = Array2::zeros((n, n));
    for (v, x) in p.views.iter().enumerate() {
        let sx = st.s.dot(x);
        den.scaled_add(wts.beta * st.alpha_view[v] * st.alpha_view[v], &sx.dot(&x.t()));
    }
    if wts.lambda > 0.0 {
        den.scaled_add(wts.lambda, &p.b0_pos.dot(&st.s));
    }
    den.scaled_add(wts.beta, &st.s);
    den += wts.eps;

    Zip::from(&mut st.s).and(&num).and(&den).for_each(|s, &n, &d| *s *= n / d);
    ensure_finite(&st.s, iteration, "update_s")
}

/// H_v ← H_v ⊙ (X_vᵀ X^f P_vᵀ) ⊘ (X_vᵀ X_v H_v + ε).
pub(super) fn update_h(
    p: &Problem,
    st: &mut ModelState,
    wts: &Weights,
    iteration: usize,
    v: usize,
) -> Result<()> {
    let target = p.placement.extract(st.xf.view(), v)?;
    let num = p.views[v].t().dot(&target);
    let mut den = p.xtx[v].dot(&st.h[v]);
    den += wts.eps;
    Zip::from(&mut st.h[v]).and(&num).and(&den).for_each(|h, &n, &d| *h *= n / d);
    ensure_finite(&st.h[v], iteration, "update_h")
}

/// Builds M and h of the view-weight subproblem min αᵀMα − αᵀh, α ≥ 0,
/// from Frobenius inner products (placed matrices have disjoint column
/// support, so the placed Gram block is diagonal), then solves it by
/// projected gradient.
pub(super) fn update_alpha(p: &Problem, st: &mut ModelState, iteration: usize) -> Result<()> {
    let v_count = p.view_count();
    let mut m = p.gram_semantic.clone();
    let mut h = Array1::zeros(v_count);
    for (v, x) in p.views.iter().enumerate() {
        let sx = st.s.dot(x);
        m[[v, v]] += frob_sq(&sx);
        let xf_block = p.placement.extract(st.xf.view(), v)?;
        h[v] = 2.0 * (frob_inner(&sx, &xf_block) + frob_inner(&p.semantic[v], &st.s));
    }
    let alpha = nonneg_quadratic_min(&m, &h, &st.alpha_view);
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::Numerical { iteration, context: "update_alpha".into() });
    }
    st.alpha_view = alpha;
    Ok(())
}

/// Projected gradient for min αᵀMα − αᵀh over α ≥ 0 with M PSD. The step
/// 1/(2‖M‖_F) is at most the inverse gradient Lipschitz constant, so each
/// iteration is non-increasing.
pub(super) fn nonneg_quadratic_min(
    m: &Array2<f64>,
    h: &Array1<f64>,
    start: &Array1<f64>,
) -> Array1<f64> {
    let norm = frob_sq(m).sqrt();
    if norm == 0.0 {
        return start.clone();
    }
    let step = 1.0 / (2.0 * norm);
    let mut alpha = start.mapv(|a| a.max(0.0));
    for _ in 0..ALPHA_QP_MAX_ITERS {
        let grad = &m.dot(&alpha) * 2.0 - h;
        let next = (&alpha - &(&grad * step)).mapv(|a| a.max(0.0));
        let delta = next
            .iter()
            .zip(alpha.iter())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        alpha = next;
        if delta < ALPHA_QP_TOL {
            break;
        }
    }
    alpha
}
