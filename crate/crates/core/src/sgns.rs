//! The skip-gram negative-sampling objective and its gradient step.
//!
//! For a center input vector `x`, a positive context vector `c` and negative
//! context vectors `n_1 .. n_k`, the per-pair objective (to be maximized) is
//!
//! ```text
//! L = log σ(x·c) + Σ_i log σ(-x·n_i)
//! ```
//!
//! Everything here is generic over the float type so the training loop
//! (32-bit) and the gradient checks (64-bit) run the same code.

use num_traits::Float;

/// `log σ(x)` without overflow for large `|x|`.
#[inline]
pub fn log_sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

#[inline]
pub fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
fn axpy<F: Float>(alpha: F, x: &[F], y: &mut [F]) {
    for (y, &x) in y.iter_mut().zip(x) {
        *y = *y + alpha * x;
    }
}

pub fn sgns_loss<F: Float>(center: &[F], context: &[F], negatives: &[&[F]]) -> F {
    negatives
        .iter()
        .fold(log_sigmoid(dot(center, context)), |acc, n| acc + log_sigmoid(-dot(center, n)))
}

/// Gradient of [`sgns_loss`] with respect to each participating vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SgnsGradients<F> {
    pub center: Vec<F>,
    pub context: Vec<F>,
    pub negatives: Vec<Vec<F>>,
}

pub fn sgns_gradients<F: Float>(center: &[F], context: &[F], negatives: &[&[F]]) -> SgnsGradients<F> {
    let g_pos = F::one() - sigmoid(dot(center, context));
    let mut grad_center: Vec<F> = context.iter().map(|&c| g_pos * c).collect();
    let grad_context = center.iter().map(|&x| g_pos * x).collect();
    let mut grad_negatives = Vec::with_capacity(negatives.len());
    for n in negatives {
        let g = -sigmoid(dot(center, n));
        axpy(g, n, &mut grad_center);
        grad_negatives.push(center.iter().map(|&x| g * x).collect());
    }
    SgnsGradients {
        center: grad_center,
        context: grad_context,
        negatives: grad_negatives,
    }
}

/// Access to the context (output) rows an update touches.
///
/// `row_mut` returns `None` for frozen rows: they take part in the forward
/// computation and in the center gradient but are never written.
pub trait OutputRows<F> {
    type Slot: Copy;

    fn row(&self, slot: Self::Slot) -> &[F];

    fn row_mut(&mut self, slot: Self::Slot) -> Option<&mut [F]>;
}

/// Reusable buffers for [`sgns_update`].
#[derive(Clone, Debug, Default)]
pub struct Scratch<F> {
    center: Vec<F>,
    delta: Vec<F>,
    coeffs: Vec<F>,
}

/// One gradient-ascent step on `L` for a center row and a list of
/// `(slot, is_positive)` context rows.
///
/// All coefficients are computed from the pre-step vectors, so the update
/// is exactly `θ ← θ + lr·∇L` even when a slot occurs more than once.
/// Returns the pre-step objective value.
pub fn sgns_update<F, O>(
    center: &mut [F],
    targets: &[(O::Slot, bool)],
    outputs: &mut O,
    lr: F,
    scratch: &mut Scratch<F>,
) -> F
where
    F: Float,
    O: OutputRows<F>,
{
    let dim = center.len();
    scratch.center.clear();
    scratch.center.extend_from_slice(center);
    scratch.delta.clear();
    scratch.delta.resize(dim, F::zero());
    scratch.coeffs.clear();

    let mut loss = F::zero();
    for &(slot, positive) in targets {
        let row = outputs.row(slot);
        let score = dot(&scratch.center, row);
        let (label, signed) = if positive {
            (F::one(), score)
        } else {
            (F::zero(), -score)
        };
        loss = loss + log_sigmoid(signed);
        let g = label - sigmoid(score);
        axpy(g, row, &mut scratch.delta);
        scratch.coeffs.push(g);
    }

    for (&(slot, _), &g) in targets.iter().zip(&scratch.coeffs) {
        if let Some(row) = outputs.row_mut(slot) {
            axpy(lr * g, &scratch.center, row);
        }
    }
    axpy(lr, &scratch.delta, center);
    loss
}
