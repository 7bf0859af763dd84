//! The q-Poisson law `P{N = k} = q^{-k} / ((p; p)_k e_p(1/q))`, `p = q^{-2}`.

use crate::error::{Error, Result};

/// Probability mass below which the upper tail is dropped.
const TAIL_MASS: f64 = 1e-17;

/// Precomputed pmf and cdf tables; read-only after construction.
#[derive(Debug, Clone)]
pub struct QPoisson {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl QPoisson {
    pub fn new(q: f64) -> Result<Self> {
        if !(q > 1.0 && q.is_finite()) {
            return Err(Error::domain(format!("q must exceed 1, got {q}")));
        }
        let p = q.powi(-2);
        let lq = q.ln();
        // log of (1/q; p)_inf = -log e_p(1/q)
        let mut log_norm = 0.0;
        let mut pk = 1.0;
        let mut k = 0usize;
        loop {
            let x = pk / q;
            log_norm += (-x).ln_1p();
            if x < 1e-18 {
                break;
            }
            pk *= p;
            k += 1;
            if k > 10_000_000 {
                return Err(Error::no_convergence("q-Poisson normaliser", k));
            }
        }
        let mut pmf = Vec::new();
        let mut log_pp = 0.0; // log (p; p)_k
        let mut pk = 1.0; // p^k
        let mut passed_mode = false;
        for k in 0.. {
            if k > 0 {
                pk *= p;
                log_pp += (-pk).ln_1p();
            }
            let w = (-(k as f64) * lq - log_pp + log_norm).exp();
            if let Some(&last) = pmf.last() {
                passed_mode |= w < last;
            }
            pmf.push(w);
            // Past the mode successive weights shrink by a factor tending to
            // 1/q, so the neglected tail is roughly w/(q - 1).
            if passed_mode && w * q / (q - 1.0) < TAIL_MASS {
                break;
            }
        }
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for &w in &pmf {
            acc += w;
            cdf.push(acc);
        }
        Ok(QPoisson { pmf, cdf })
    }

    pub fn pmf(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    pub fn weights(&self) -> &[f64] {
        &self.pmf
    }

    pub fn cdf(&self, k: usize) -> f64 {
        self.cdf.get(k).copied().unwrap_or(1.0)
    }

    /// Inverse-cdf draw for `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> usize {
        let total = *self.cdf.last().unwrap_or(&1.0);
        let target = u * total;
        self.cdf.partition_point(|&c| c <= target).min(self.cdf.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.pmf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pmf.is_empty()
    }
}
