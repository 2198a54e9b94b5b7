//! Finite witness families standing in for "all smooth f" and "all test
//! densities φ".

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarMap = dyn Fn(&[f64]) -> f64 + Send + Sync;
type DensityFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A smooth f: Y → ℝ, with the Lipschitz bound on the range of interest
/// when one is known.
#[derive(Clone)]
pub struct TestFunction {
    pub label: String,
    f: Arc<ScalarMap>,
    pub lipschitz: Option<f64>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").field("label", &self.label).field("lipschitz", &self.lipschitz).finish()
    }
}

impl TestFunction {
    pub fn new(label: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { label: label.into(), f: Arc::new(f), lipschitz: None }
    }

    pub fn with_lipschitz(mut self, bound: f64) -> Self {
        self.lipschitz = Some(bound);
        self
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        (self.f)(y)
    }

    /// y ↦ y_k
    pub fn component(k: usize) -> Self {
        Self::new(format!("y{k}"), move |y| y[k]).with_lipschitz(1.0)
    }

    /// f(y) = y on scalar targets; Lipschitz 1.
    pub fn identity() -> Self {
        Self::new("x", |y| y[0]).with_lipschitz(1.0)
    }

    /// f(y) = y²; Lipschitz 2 on [0, 1].
    pub fn square() -> Self {
        Self::new("x^2", |y| y[0] * y[0]).with_lipschitz(2.0)
    }

    /// f(y) = sin y; Lipschitz 1.
    pub fn sine() -> Self {
        Self::new("sin", |y| y[0].sin()).with_lipschitz(1.0)
    }

    /// The family {x, x², sin}.
    pub fn standard_family() -> Vec<Self> {
        vec![Self::identity(), Self::square(), Self::sine()]
    }
}

/// A compactly supported test density on ℝ.
#[derive(Clone)]
pub struct Density {
    pub label: String,
    phi: Arc<DensityFn>,
    pub support: (f64, f64),
    pub sup_norm: f64,
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Density")
            .field("label", &self.label)
            .field("support", &self.support)
            .field("sup_norm", &self.sup_norm)
            .finish()
    }
}

impl Density {
    pub fn new(
        label: impl Into<String>,
        support: (f64, f64),
        sup_norm: f64,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(support.1 > support.0) || !(sup_norm >= 0.0) {
            return Err(Error::Config("a density needs a nonempty support and a sup-norm".into()));
        }
        Ok(Self { label: label.into(), phi: Arc::new(phi), support, sup_norm })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.support.0 || x >= self.support.1 {
            0.0
        } else {
            (self.phi)(x)
        }
    }

    /// exp(-1/(1 - (x - c)²)) on (c - 1, c + 1); sup-norm e⁻¹.
    pub fn bump_at(center: f64) -> Self {
        let label = if center == 0.0 { "bump".to_string() } else { format!("bump@{center}") };
        Self {
            label,
            phi: Arc::new(move |x| {
                let y = x - center;
                let q = 1.0 - y * y;
                if q <= 0.0 {
                    0.0
                } else {
                    (-1.0 / q).exp()
                }
            }),
            support: (center - 1.0, center + 1.0),
            sup_norm: (-1.0f64).exp(),
        }
    }

    pub fn bump() -> Self {
        Self::bump_at(0.0)
    }
}
