// Shared arithmetic for parameter and tangent updates. The algorithms and the
// pathwise oracle must evaluate these in the same order to agree bit for bit.

use crate::models::ParamVector;

/// `θ + k·d`
#[inline]
pub(crate) fn ascend(theta: &ParamVector, direction: &ParamVector, k: f64) -> ParamVector {
    theta + direction * k
}

/// `(h + k·(∂²ℓ·h)) + k·∂ℓ`
#[inline]
pub(crate) fn tangent(h: &ParamVector, hess_h: &ParamVector, grad: &ParamVector, k: f64) -> ParamVector {
    h + hess_h * k + grad * k
}

#[inline]
pub(crate) fn finite(v: &ParamVector) -> bool {
    v.iter().all(|x| x.is_finite())
}
