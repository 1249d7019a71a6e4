//! Small numerically careful scalar helpers shared by the graph ops and the
//! plain (non-graph) evaluation paths.
//!
//! The margin code evaluates activations both inside the autodiff graph and
//! directly (for logs and reports); routing both through these functions keeps
//! the two paths bit-identical.

/// `ln(1 + e^x)` evaluated without overflow for large `|x|`.
pub(crate) fn softplus(x: f64) -> f64 {
    // max(x, 0) + ln(1 + e^{-|x|}) is exact in both tails.
    let shoulder = if x > 0.0 { x } else { 0.0 };
    shoulder + libm::log1p(libm::exp(-libm::fabs(x)))
}

/// Logistic sigmoid, the derivative of [`softplus`].
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Inverse of [`softplus`] on `y > 0`: the raw value whose softplus is `y`.
pub(crate) fn softplus_inv(y: f64) -> f64 {
    debug_assert!(y > 0.0);
    libm::log(libm::expm1(y))
}

/// Rectifier used by the demonstration-only ReLU margin activation.
pub(crate) fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_at_zero_is_ln_two() {
        assert!((softplus(0.0) - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn softplus_tails_are_stable() {
        // Large positive: softplus(x) ~ x. Large negative: ~ 0, not NaN.
        assert!((softplus(700.0) - 700.0).abs() < 1e-9);
        assert!(softplus(-700.0) >= 0.0);
        assert!(softplus(-700.0) < 1e-300);
    }

    #[test]
    fn softplus_inverse_roundtrips() {
        for &y in &[1e-6, 0.1, 0.7, 3.0, 40.0] {
            let x = softplus_inv(y);
            assert!((softplus(x) - y).abs() < 1e-12 * y.max(1.0), "y={y}");
        }
    }

    #[test]
    fn sigmoid_is_softplus_slope() {
        for &x in &[-3.0, -0.5, 0.0, 0.5, 3.0] {
            let h = 1e-6;
            let slope = (softplus(x + h) - softplus(x - h)) / (2.0 * h);
            assert!((sigmoid(x) - slope).abs() < 1e-9, "x={x}");
        }
    }
}
