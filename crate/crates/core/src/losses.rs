//! Classification losses `V(y, a)` with labels `y` in {-1, +1}.
//!
//! Besides values and left-hand derivatives, each loss reports the constants the excess
//! risk bounds need: `a0` bounds `|V'_-|`, `v0 = sup_y V(y, 0)`, and `L` is the Lipschitz
//! constant of `V'` for smooth losses.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("label {0} is not -1 or +1")]
    InvalidLabel(f64),
    #[error("unknown loss {0:?} (expected \"hinge\" or \"logistic\")")]
    UnknownLoss(String),
}

/// Binary label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    /// `sign(margin)` with `sign(0) = +1`.
    #[inline]
    pub fn from_margin(margin: f64) -> Self {
        if margin >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

impl TryFrom<f64> for Label {
    type Error = LossError;

    fn try_from(y: f64) -> Result<Self, Self::Error> {
        if y == 1.0 {
            Ok(Label::Positive)
        } else if y == -1.0 {
            Ok(Label::Negative)
        } else {
            Err(LossError::InvalidLabel(y))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConstants {
    pub a0: f64,
    pub v0: f64,
    pub smoothness: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Loss {
    /// `max(0, 1 - y a)`
    Hinge,
    /// `log(1 + exp(-y a))`
    Logistic,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::Hinge => "hinge",
            Loss::Logistic => "logistic",
        }
    }

    #[inline]
    pub fn value(self, y: Label, a: f64) -> f64 {
        let z = y.sign() * a;
        match self {
            Loss::Hinge => (1.0 - z).max(0.0),
            Loss::Logistic => {
                let nz = -z;
                if nz > 35.0 {
                    nz + (-nz).exp().ln_1p()
                } else {
                    nz.exp().ln_1p()
                }
            }
        }
    }

    /// Left-hand derivative in `a`. At the hinge kink `y a = 1` this is the exact
    /// left limit: `-y` for `y = +1` and `0` for `y = -1`.
    #[inline]
    pub fn left_derivative(self, y: Label, a: f64) -> f64 {
        let s = y.sign();
        let z = s * a;
        match self {
            Loss::Hinge => {
                if z < 1.0 || (z == 1.0 && s > 0.0) {
                    -s
                } else {
                    0.0
                }
            }
            Loss::Logistic => -s / (1.0 + z.exp()),
        }
    }

    /// Value with a raw label, rejecting anything other than -1 and +1.
    pub fn value_checked(self, y: f64, a: f64) -> Result<f64, LossError> {
        Ok(self.value(Label::try_from(y)?, a))
    }

    pub fn left_derivative_checked(self, y: f64, a: f64) -> Result<f64, LossError> {
        Ok(self.left_derivative(Label::try_from(y)?, a))
    }

    pub fn constants(self) -> LossConstants {
        match self {
            Loss::Hinge => LossConstants { a0: 1.0, v0: 1.0, smoothness: None },
            Loss::Logistic => LossConstants {
                a0: 1.0,
                v0: std::f64::consts::LN_2,
                smoothness: Some(0.25),
            },
        }
    }

    pub fn is_smooth(self) -> bool {
        self.constants().smoothness.is_some()
    }

    /// Largest step compatible with smoothness, `2 / (kappa^2 L)`; `None` for non-smooth losses.
    pub fn max_smooth_step(self, kappa: f64) -> Option<f64> {
        self.constants().smoothness.map(|l| 2.0 / (kappa * kappa * l))
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Loss {
    type Err = LossError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hinge" => Ok(Loss::Hinge),
            "logistic" => Ok(Loss::Logistic),
            other => Err(LossError::UnknownLoss(other.to_owned())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const P: Label = Label::Positive;
    const N: Label = Label::Negative;

    /// One-sided difference quotient `(V(a) - V(a - eps)) / eps`.
    fn left_quotient(loss: Loss, y: Label, a: f64, eps: f64) -> f64 {
        (loss.value(y, a) - loss.value(y, a - eps)) / eps
    }

    #[test]
    fn values() {
        assert_eq!(Loss::Hinge.value(P, 0.0), 1.0);
        assert_eq!(Loss::Hinge.value(P, 2.0), 0.0);
        assert!((Loss::Logistic.value(P, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(Loss::Hinge.value(P, 50.0), 0.0);
        assert!(Loss::Logistic.value(P, 50.0) < 1e-20);
        // no overflow deep in the wrong side
        assert!((Loss::Logistic.value(N, 800.0) - 800.0).abs() < 1e-12);
    }

    #[test]
    fn hinge_kink_matches_one_sided_quotient() {
        let eps = 1e-8;
        let d = Loss::Hinge.left_derivative(P, 1.0);
        assert_eq!(d, -1.0);
        assert!((left_quotient(Loss::Hinge, P, 1.0, eps) - d).abs() < 1e-6);
        let d = Loss::Hinge.left_derivative(N, -1.0);
        assert_eq!(d, 0.0);
        assert!((left_quotient(Loss::Hinge, N, -1.0, eps) - d).abs() < 1e-6);
    }

    #[test]
    fn logistic_derivative_at_zero() {
        assert_eq!(Loss::Logistic.left_derivative(P, 0.0), -0.5);
    }

    #[test]
    fn rejects_non_binary_labels() {
        assert_eq!(Loss::Hinge.value_checked(0.5, 0.0), Err(LossError::InvalidLabel(0.5)));
        assert!(Loss::Logistic.left_derivative_checked(2.0, 0.0).is_err());
        assert_eq!(Loss::Hinge.value_checked(-1.0, 0.0), Ok(1.0));
    }

    #[test]
    fn constants_and_step_ceiling() {
        assert_eq!(Loss::Hinge.constants(), LossConstants { a0: 1.0, v0: 1.0, smoothness: None });
        assert_eq!(Loss::Logistic.constants().v0, std::f64::consts::LN_2);
        assert_eq!(Loss::Logistic.max_smooth_step(1.0), Some(8.0));
        assert_eq!(Loss::Logistic.max_smooth_step(2.0), Some(2.0));
        assert_eq!(Loss::Hinge.max_smooth_step(1.0), None);
    }

    #[test]
    fn a0_is_sup_of_derivative_on_grid() {
        for loss in [Loss::Hinge, Loss::Logistic] {
            let sup = (-4000..=4000)
                .map(|i| i as f64 * 0.01)
                .flat_map(|a| [loss.left_derivative(P, a).abs(), loss.left_derivative(N, a).abs()])
                .fold(0.0, f64::max);
            let a0 = loss.constants().a0;
            match loss {
                Loss::Hinge => assert_eq!(sup, a0),
                Loss::Logistic => assert!(sup <= a0 && sup > 0.999_999),
            }
        }
    }

    #[test]
    fn logistic_smoothness_is_quarter() {
        // V'' = e^{ya} / (1 + e^{ya})^2, maximized at a = 0
        let h = 1e-5;
        let max = (-2000..=2000)
            .map(|i| i as f64 * 0.005)
            .map(|a| (Loss::Logistic.left_derivative(P, a + h) - Loss::Logistic.left_derivative(P, a - h)) / (2.0 * h))
            .fold(0.0, f64::max);
        assert!((max - 0.25).abs() < 1e-8, "{max}");
    }

    #[test]
    fn parses_names() {
        assert_eq!("hinge".parse::<Loss>().unwrap(), Loss::Hinge);
        assert_eq!("Logistic".parse::<Loss>().unwrap(), Loss::Logistic);
        assert!("squared".parse::<Loss>().is_err());
    }

    fn label() -> impl Strategy<Value = Label> {
        prop_oneof![Just(P), Just(N)]
    }

    proptest! {
        #[test]
        fn derivative_is_non_decreasing(y in label(), a in -50.0..50.0f64, d in 0.0..10.0f64) {
            for loss in [Loss::Hinge, Loss::Logistic] {
                prop_assert!(loss.left_derivative(y, a) <= loss.left_derivative(y, a + d));
            }
        }

        #[test]
        fn values_are_nonnegative(y in label(), a in -1e6..1e6f64) {
            prop_assert!(Loss::Hinge.value(y, a) >= 0.0);
            prop_assert!(Loss::Logistic.value(y, a) >= 0.0);
        }

        #[test]
        fn logistic_derivative_matches_central_difference(y in label(), a in -20.0..20.0f64) {
            let h = 1e-6;
            let fd = (Loss::Logistic.value(y, a + h) - Loss::Logistic.value(y, a - h)) / (2.0 * h);
            prop_assert!((Loss::Logistic.left_derivative(y, a) - fd).abs() < 1e-6);
        }
    }
}
