//! The four activation functions and their first derivatives.
//!
//! At the kink of relu and leakyrelu the derivative takes the right limit.

use crate::model::ActivationKind;

const LEAKY_SLOPE: f64 = 0.01;

pub fn act_eval(kind: ActivationKind, z: f64) -> f64 {
    match kind {
        ActivationKind::LeakyRelu => {
            if z < 0.0 {
                LEAKY_SLOPE * z
            } else {
                z
            }
        }
        ActivationKind::Sigmoid => sigmoid(z),
        ActivationKind::Relu => z.max(0.0),
        ActivationKind::Tanh => tanh(z),
    }
}

pub fn act_grad(kind: ActivationKind, z: f64) -> f64 {
    match kind {
        ActivationKind::LeakyRelu => {
            if z < 0.0 {
                LEAKY_SLOPE
            } else {
                1.0
            }
        }
        ActivationKind::Sigmoid => {
            let s = sigmoid(z);
            s * (1.0 - s)
        }
        ActivationKind::Relu => {
            if z < 0.0 {
                0.0
            } else {
                1.0
            }
        }
        ActivationKind::Tanh => {
            let t = tanh(z);
            1.0 - t * t
        }
    }
}

/// Supremum of `h'(z)²` over all `z`.
pub fn max_grad_sq(kind: ActivationKind) -> f64 {
    match kind {
        ActivationKind::Sigmoid => 1.0 / 16.0,
        _ => 1.0,
    }
}

/// Value and derivative in one pass.
#[inline]
pub fn act_eval_grad(kind: ActivationKind, z: f64) -> (f64, f64) {
    match kind {
        ActivationKind::Sigmoid => {
            let s = sigmoid(z);
            (s, s * (1.0 - s))
        }
        ActivationKind::Tanh => {
            let t = tanh(z);
            (t, 1.0 - t * t)
        }
        _ => (act_eval(kind, z), act_grad(kind, z)),
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn tanh(z: f64) -> f64 {
    // exp(-2|z|) never overflows
    let e = (-2.0 * z.abs()).exp();
    let t = (1.0 - e) / (1.0 + e);
    if z >= 0.0 {
        t
    } else {
        -t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use ActivationKind::*;

    fn fd(kind: ActivationKind, z: f64, h: f64) -> f64 {
        (act_eval(kind, z + h) - act_eval(kind, z - h)) / (2.0 * h)
    }

    #[test]
    fn table_values() {
        assert_eq!(act_eval(Sigmoid, 0.0), 0.5);
        assert_eq!(act_eval(Relu, -2.0), 0.0);
        assert!((act_eval(LeakyRelu, -2.0) + 0.02).abs() < 1e-15);
        assert_eq!(act_eval(Tanh, 0.0), 0.0);
        assert_eq!(act_eval(LeakyRelu, 3.0), 3.0);
        assert_eq!(act_eval(Relu, 3.0), 3.0);
    }

    #[test]
    fn extreme_inputs_stay_bounded() {
        for z in [1e6, -1e6, 700.0, -700.0] {
            let t = act_eval(Tanh, z);
            assert!((-1.0..=1.0).contains(&t));
            let s = act_eval(Sigmoid, z);
            assert!((0.0..=1.0).contains(&s) && s.is_finite());
            assert!(act_grad(Sigmoid, z).is_finite());
            assert!(act_grad(Tanh, z).is_finite());
        }
    }

    #[test]
    fn gradient_bound_holds_on_grid() {
        for kind in ActivationKind::ALL {
            let mut z: f64 = -20.0;
            while z <= 20.0 {
                assert!(act_grad(kind, z).powi(2) <= max_grad_sq(kind) + 1e-15);
                z += 0.01;
            }
        }
    }

    #[test]
    fn derivatives_at_zero() {
        assert_eq!(act_grad(Tanh, 0.0), 1.0);
        assert_eq!(act_grad(Sigmoid, 0.0), 0.25);
        assert_eq!(act_grad(Relu, 0.0), 1.0);
        assert_eq!(act_grad(LeakyRelu, 0.0), 1.0);
    }

    #[test]
    fn derivative_matches_finite_difference_at_half() {
        for kind in ActivationKind::ALL {
            for z in [-0.5, 0.5] {
                assert!((act_grad(kind, z) - fd(kind, z, 1e-6)).abs() < 1e-6, "{kind} at {z}");
            }
        }
    }

    #[test]
    fn derivative_grid_away_from_kinks() {
        let h = 1e-6;
        let mut z: f64 = -30.0;
        while z <= 30.0 {
            for kind in ActivationKind::ALL {
                let kinked = matches!(kind, Relu | LeakyRelu);
                if kinked && z.abs() < 1e-3 {
                    continue;
                }
                assert!((act_grad(kind, z) - fd(kind, z, h)).abs() <= 1e-5, "{kind} at {z}");
            }
            z += 0.0137;
        }
    }

    proptest! {
        #[test]
        fn ranges_and_monotonicity(a in -700.0f64..700.0, b in -700.0f64..700.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for kind in ActivationKind::ALL {
                prop_assert!(act_eval(kind, lo) <= act_eval(kind, hi));
            }
            let s = act_eval(Sigmoid, a);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!((-1.0..=1.0).contains(&act_eval(Tanh, a)));
            prop_assert!(act_eval(Relu, a) >= 0.0);
        }
    }

    #[test]
    fn open_ranges_for_moderate_inputs() {
        for z in [-10.0, -1.0, 0.0, 1.0, 10.0] {
            let s = act_eval(Sigmoid, z);
            assert!(s > 0.0 && s < 1.0);
            let t = act_eval(Tanh, z);
            assert!(t > -1.0 && t < 1.0);
        }
    }
}
