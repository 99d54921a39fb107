//! Gradient vector primitives: dense real vectors, one-bit sign vectors,
//! integer sign sums, and the threshold consensus mapping.
//!
//! All operations here are pure functions on immutable values and may be
//! called from any number of threads.

use crate::error::{Error, Result};

/// Sign assigned to exactly-zero entries. Every sign in this crate lives in
/// {-1, +1}; zero is mapped to a fixed convention so sign sums of n clients
/// always have the parity of n.
#[cfg(not(feature = "sign-zero-negative"))]
pub const SIGN_AT_ZERO: i8 = 1;
#[cfg(feature = "sign-zero-negative")]
pub const SIGN_AT_ZERO: i8 = -1;

/// Element-wise sign with the crate's zero convention.
#[inline]
pub fn sign_of(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        SIGN_AT_ZERO
    }
}

/// Dense d-dimensional real gradient vector. Entries are always finite;
/// construction rejects NaN and infinities.
#[derive(Debug, Clone, PartialEq)]
pub struct GradVec {
    values: Vec<f64>,
}

impl GradVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
        }
        Ok(GradVec { values })
    }

    /// All-zeros vector of dimension `d`.
    pub fn zeros(d: usize) -> Self {
        GradVec { values: vec![0.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    #[cfg(test)]
    pub(crate) fn scale(&self, c: f64) -> GradVec {
        GradVec {
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn norm2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn sub(&self, other: &GradVec) -> GradVec {
        debug_assert_eq!(self.dim(), other.dim());
        GradVec {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Squared Euclidean distance to `other`.
    pub fn dist2(&self, other: &GradVec) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| {
                let diff = a - b;
                diff * diff
            })
            .sum()
    }

    /// Build without the finiteness scan. Callers guarantee every entry is
    /// the result of finite arithmetic on finite inputs.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        GradVec { values }
    }
}

/// Vector over {-1, +1}; the one-bit quantized form of a gradient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignVec {
    values: Vec<i8>,
}

impl SignVec {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if value != 1 && value != -1 {
                return Err(Error::InvalidSignSum {
                    index,
                    value: i32::from(value),
                    n: 1,
                });
            }
        }
        Ok(SignVec { values })
    }

    pub(crate) fn from_raw(values: Vec<i8>) -> Self {
        debug_assert!(values.iter().all(|&v| v == 1 || v == -1));
        SignVec { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.values
    }

    #[inline]
    pub fn get(&self, k: usize) -> i8 {
        self.values[k]
    }

    /// View as a real gradient vector (entries ±1.0).
    pub fn to_grad(&self) -> GradVec {
        GradVec::from_raw(self.values.iter().map(|&s| f64::from(s)).collect())
    }
}

/// Vector of per-dimension sign sums over `n` clients. Entries lie in
/// [-n, n] and share the parity of n, being sums of n odd terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SumVec {
    values: Vec<i32>,
    n: usize,
}

impl SumVec {
    pub fn new(values: Vec<i32>, n: usize) -> Result<Self> {
        let bound = i32::try_from(n).expect("client count fits i32");
        for (index, &value) in values.iter().enumerate() {
            if value.abs() > bound || (value - bound).rem_euclid(2) != 0 {
                return Err(Error::InvalidSignSum { index, value, n });
            }
        }
        Ok(SumVec { values, n })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn client_count(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.values
    }
}

/// One-bit quantization: the element-wise sign of a gradient.
pub fn sign_quantize(g: &GradVec) -> SignVec {
    SignVec::from_raw(g.as_slice().iter().map(|&x| sign_of(x)).collect())
}

/// Per-dimension sum of the clients' sign vectors.
pub fn sign_sum(signs: &[SignVec]) -> Result<SumVec> {
    let n = signs.len();
    if n == 0 {
        return Err(Error::EmptyInput("sign_sum needs at least one vector"));
    }
    let d = signs[0].dim();
    let mut totals = vec![0i32; d];
    for s in signs {
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.dim(),
            });
        }
        for (t, &v) in totals.iter_mut().zip(s.as_slice()) {
            *t += i32::from(v);
        }
    }
    SumVec::new(totals, n)
}

/// Threshold consensus over sign sums: +1 where the sum strictly exceeds
/// `lambda`, -1 everywhere else.
pub fn consensus_map(s: &SumVec, lambda: i32) -> SignVec {
    SignVec::from_raw(
        s.as_slice()
            .iter()
            .map(|&v| if v > lambda { 1 } else { -1 })
            .collect(),
    )
}

/// Simulation hyper-parameters shared across modules.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Client count.
    pub n: usize,
    /// Assumed Byzantine client count.
    pub f: usize,
    /// Model dimension.
    pub d: usize,
    /// Bits per raw gradient entry on the wire.
    pub m: u32,
    /// Consensus threshold.
    pub lambda: i32,
    /// Learning rate.
    pub eta: f64,
    /// Total training rounds.
    pub rounds: usize,
    /// Non-IID degree in [0, 1].
    pub q: f64,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::config("params.n", "client count must be at least 1"));
        }
        if 2 * self.f >= self.n {
            return Err(Error::config(
                "params.f",
                format!("Byzantine count must satisfy f < n/2 (n={}, f={})", self.n, self.f),
            ));
        }
        if self.m < 1 {
            return Err(Error::config("params.m", "entry width must be at least 1 bit"));
        }
        let bound = self.n as i64;
        if i64::from(self.lambda) < -bound || i64::from(self.lambda) > bound {
            return Err(Error::config(
                "params.lambda",
                format!("threshold must lie in [-{}, {}]", self.n, self.n),
            ));
        }
        if !(self.eta > 0.0) {
            return Err(Error::config("params.eta", "learning rate must be positive"));
        }
        if self.rounds < 1 {
            return Err(Error::config("params.rounds", "round count must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::config("params.q", "non-IID degree must lie in [0, 1]"));
        }
        Ok(())
    }
}
