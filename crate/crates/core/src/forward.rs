//! Closed-form forward noising process with the uniform token rate
//! `Q_tok = (1/S)·11ᵀ − I`, applied independently to every position.

use serde::Serialize;

use crate::analysis::kl;
use crate::error::{Error, Result};
use crate::state::{DenseDistribution, Distribution, FactorizedDistribution, SequenceState, StateSpace};

/// Single-token transition matrix over an elapsed time `Δ`:
/// `(1/S)(1 − e^{−Δ})·11ᵀ + e^{−Δ}·I`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenKernel {
    alphabet: usize,
    elapsed: f64,
    matrix: Vec<f64>,
}

pub fn token_kernel(alphabet: usize, elapsed: f64) -> Result<TokenKernel> {
    if alphabet < 2 {
        return Err(Error::param("alphabet", "must be >= 2"));
    }
    if !(elapsed >= 0.0) || !elapsed.is_finite() {
        return Err(Error::InvalidTime(elapsed));
    }
    let stay = (-elapsed).exp();
    // 1 − e^{−Δ} via expm1 keeps small-Δ kernels accurate.
    let off = -(-elapsed).exp_m1() / alphabet as f64;
    let mut matrix = vec![off; alphabet * alphabet];
    for i in 0..alphabet {
        matrix[i * alphabet + i] = off + stay;
    }
    Ok(TokenKernel {
        alphabet,
        elapsed,
        matrix,
    })
}

impl TokenKernel {
    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.matrix[from * self.alphabet + to]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// Propagates a single-token law: returns `Kᵀ p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        (0..self.alphabet)
            .map(|to| (0..self.alphabet).map(|from| self.get(from, to) * p[from]).sum())
            .collect()
    }
}

/// Applies `Kᵀ` along every position of a dense tensor in place,
/// i.e. multiplies by `(Kᵀ)^{⊗d}` without forming it. Cost `O(N·d·S)`.
pub fn propagate_axes(mass: &mut [f64], space: StateSpace, kernel: &TokenKernel) {
    let s = space.alphabet();
    debug_assert_eq!(kernel.alphabet(), s);
    let n = space.num_states();
    let mut fiber = vec![0.0; s];
    for dim in 0..space.dims() {
        let stride = space.stride(dim);
        let block = stride * s;
        for outer in (0..n).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, slot) in fiber.iter_mut().enumerate() {
                    *slot = mass[base + k * stride];
                }
                for to in 0..s {
                    let mut acc = 0.0;
                    for (from, &v) in fiber.iter().enumerate() {
                        acc += kernel.get(from, to) * v;
                    }
                    mass[base + to * stride] = acc;
                }
            }
        }
    }
}

/// Forward marginal `q_t = (P_{0,t})^{⊗d} · p0` as a dense vector.
pub fn forward_marginal(p0: &Distribution, t: f64) -> Result<DenseDistribution> {
    match p0 {
        Distribution::Dense(p) => forward_marginal_dense(p, t),
        Distribution::Product(f) => forward_marginal_dense(&crate::state::expand_product(f, f.space()?)?, t),
    }
}

pub fn forward_marginal_dense(p0: &DenseDistribution, t: f64) -> Result<DenseDistribution> {
    let space = p0.space();
    let kernel = token_kernel(space.alphabet(), t)?;
    let mut mass = p0.mass().to_vec();
    propagate_axes(&mut mass, space, &kernel);
    Ok(DenseDistribution::from_weights(space, mass))
}

/// Propagates each marginal of a product law separately.
pub fn forward_marginal_factorized(
    p0: &FactorizedDistribution,
    t: f64,
) -> Result<FactorizedDistribution> {
    let kernel = token_kernel(p0.alphabet(), t)?;
    FactorizedDistribution::new(p0.marginals().iter().map(|m| kernel.apply(m)).collect())
}

/// Entry `Q(x, y)` of the full forward generator.
pub fn forward_rate(space: StateSpace, x: &SequenceState, y: &SequenceState) -> Result<f64> {
    space.validate(x)?;
    space.validate(y)?;
    let inv_s = 1.0 / space.alphabet() as f64;
    Ok(match x.hamming(y) {
        0 => (inv_s - 1.0) * space.dims() as f64,
        1 => inv_s,
        _ => 0.0,
    })
}

/// `KL(p ‖ π^d)`.
pub fn kl_to_uniform(p: &DenseDistribution) -> f64 {
    let log_n = (p.space().num_states() as f64).ln();
    p.mass()
        .iter()
        .filter(|&&m| m > 0.0)
        .map(|&m| m * (m.ln() + log_n))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingRow {
    pub t: f64,
    pub kl_to_uniform: f64,
    /// `e^{−t}·KL(p0 ‖ π^d)`
    pub bound: f64,
    /// `e^{−t}·d·log S`
    pub bound_cap: f64,
    pub holds: bool,
}

// Relative slack for the `kl <= bound` verdict; at t = 0 both sides are
// the same number computed along two paths.
const MIXING_SLACK: f64 = 1e-12;

pub fn mixing_report(p0: &Distribution, times: &[f64]) -> Result<Vec<MixingRow>> {
    let dense = p0.to_dense()?;
    let space = dense.space();
    let uniform = DenseDistribution::uniform(space);
    let kl0 = kl(&dense, &uniform)?;
    let cap = space.dims() as f64 * (space.alphabet() as f64).ln();
    times
        .iter()
        .map(|&t| {
            let qt = forward_marginal_dense(&dense, t)?;
            let value = kl(&qt, &uniform)?;
            let decay = (-t).exp();
            let bound = decay * kl0;
            Ok(MixingRow {
                t,
                kl_to_uniform: value,
                bound,
                bound_cap: decay * cap,
                holds: value <= bound * (1.0 + MIXING_SLACK) + f64::EPSILON,
            })
        })
        .collect()
}
