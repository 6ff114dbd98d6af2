//! Proximal operators of the separable regularizers.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Regularizer {
    #[default]
    Zero,
    L1(f64),
    SquaredL2(f64),
}

impl Regularizer {
    pub fn new(kind: &str, weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "regularizer weight {weight} must be a finite non-negative number"
            )));
        }
        match kind {
            "zero" | "none" => {
                if weight != 0.0 {
                    return Err(Error::InvalidParameter(
                        "the zero regularizer takes no weight".into(),
                    ));
                }
                Ok(Self::Zero)
            }
            "l1" => Ok(Self::L1(weight)),
            "squared_l2" | "l2sq" => Ok(Self::SquaredL2(weight)),
            other => Err(Error::InvalidParameter(format!("unknown regularizer kind `{other}`"))),
        }
    }

    pub fn weight(&self) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::L1(w) | Self::SquaredL2(w) => w,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::L1(_) => "l1",
            Self::SquaredL2(_) => "squared_l2",
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weight() == 0.0
    }

    pub fn value<T: Scalar>(&self, x: &[T]) -> T {
        match *self {
            Self::Zero => T::zero(),
            Self::L1(w) => T::lit(w) * x.iter().map(|v| v.abs()).sum::<T>(),
            Self::SquaredL2(w) => T::lit(0.5 * w) * x.iter().map(|v| *v * *v).sum::<T>(),
        }
    }

    pub fn prox<T: Scalar>(&self, gamma: T, x: &[T]) -> Result<Vec<T>> {
        let mut out = x.to_vec();
        self.prox_in_place(gamma, &mut out)?;
        Ok(out)
    }

    pub fn prox_in_place<T: Scalar>(&self, gamma: T, x: &mut [T]) -> Result<()> {
        if !(gamma > T::zero()) {
            return Err(Error::InvalidParameter(format!("prox stepsize {gamma} must be positive")));
        }
        match *self {
            Self::Zero => {}
            Self::L1(w) => {
                let thr = gamma * T::lit(w);
                for v in x.iter_mut() {
                    let a = v.abs() - thr;
                    *v = if a > T::zero() { v.signum() * a } else { T::zero() };
                }
            }
            Self::SquaredL2(w) => {
                let s = T::one() / (T::one() + gamma * T::lit(w));
                for v in x.iter_mut() {
                    *v *= s;
                }
            }
        }
        Ok(())
    }
}
