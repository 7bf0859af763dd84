use serde::Serialize;

/// How a transform value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Phi01Ratio,
    Phi11Ratio,
    ContinuedFraction,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Phi01Ratio => "phi01_ratio",
            Method::Phi11Ratio => "phi11_ratio",
            Method::ContinuedFraction => "continued_fraction",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

/// A computed Laplace-transform value with provenance and an absolute error
/// estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceValue {
    pub value: f64,
    pub method: Method,
    pub error_estimate: f64,
}

impl LaplaceValue {
    pub fn new(value: f64, method: Method, error_estimate: f64) -> Self {
        LaplaceValue {
            value,
            method,
            error_estimate: error_estimate.abs(),
        }
    }

    /// Product of two independent transform factors; relative errors add.
    pub fn times(self, other: LaplaceValue) -> LaplaceValue {
        let value = self.value * other.value;
        let rel = rel_err(self) + rel_err(other);
        LaplaceValue::new(value, self.method, rel * value.abs())
    }
}

fn rel_err(v: LaplaceValue) -> f64 {
    if v.value == 0.0 {
        0.0
    } else {
        v.error_estimate / v.value.abs()
    }
}
