//! Reference computations for the integration tests. They work on full
//! dense matrices and closed forms, sharing no code path with the library
//! beyond its public types.
#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Gamma};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random probability vector with i.i.d. `Gamma(alpha)` weights.
pub fn dirichlet(rng: &mut impl Rng, n: usize, alpha: f64) -> Vec<f64> {
    let g = Gamma::new(alpha, 1.0).unwrap();
    let mut w: Vec<f64> = (0..n).map(|_| g.sample(rng)).collect();
    if w.iter().all(|&v| v == 0.0) {
        w[0] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Like [`dirichlet`] but with every entry at least `floor / n`.
pub fn full_support(rng: &mut impl Rng, n: usize, alpha: f64, floor: f64) -> Vec<f64> {
    let p = dirichlet(rng, n, alpha);
    p.iter().map(|v| (1.0 - floor) * v + floor / n as f64).collect()
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| if b == 0.0 { f64::INFINITY } else { a * (a / b).ln() })
        .sum()
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Row-major `n × n` generator of the full forward chain on `[S]^d`,
/// built entry by entry from Hamming distances of decoded digits.
pub fn forward_generator(s: usize, d: usize) -> Vec<f64> {
    let n = s.pow(d as u32);
    let digits = |mut x: usize| {
        (0..d)
            .map(|_| {
                let t = x % s;
                x /= s;
                t
            })
            .collect::<Vec<_>>()
    };
    let mut q = vec![0.0; n * n];
    for x in 0..n {
        let dx = digits(x);
        for y in 0..n {
            let dy = digits(y);
            let ham = dx.iter().zip(&dy).filter(|(a, b)| a != b).count();
            q[x * n + y] = match ham {
                0 => (1.0 / s as f64 - 1.0) * d as f64,
                1 => 1.0 / s as f64,
                _ => 0.0,
            };
        }
    }
    q
}

fn mat_vec_t(q: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|y| (0..n).map(|x| v[x] * q[x * n + y]).sum()).collect()
}

/// `exp(t·Qᵀ) p` by the uniformization series on a dense generator,
/// stopped once the Poisson tail mass is below `1e-14`.
pub fn series_propagate(q: &[f64], p: &[f64], t: f64) -> Vec<f64> {
    let n = p.len();
    let lambda = (0..n).map(|x| -q[x * n + x]).fold(0.0, f64::max).max(1e-300);
    // Split long spans so e^{-λt} stays representable.
    let pieces = ((lambda * t) / 20.0).ceil().max(1.0) as usize;
    let tau = t / pieces as f64;
    let mut cur = p.to_vec();
    for _ in 0..pieces {
        let mean = lambda * tau;
        let mut term = cur.clone();
        let mut w = (-mean).exp();
        let mut cum = w;
        let mut acc: Vec<f64> = term.iter().map(|v| w * v).collect();
        let mut m = 0;
        while 1.0 - cum >= 1e-14 && m < 5000 {
            let qt = mat_vec_t(q, &term);
            for (a, b) in term.iter_mut().zip(&qt) {
                *a += b / lambda;
            }
            m += 1;
            w *= mean / m as f64;
            cum += w;
            for (a, b) in acc.iter_mut().zip(&term) {
                *a += w * b;
            }
        }
        cur = acc;
    }
    cur
}

/// The matrix `exp(t·Q)` itself, column by column from [`series_propagate`].
pub fn series_expm(q: &[f64], n: usize, t: f64) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for x in 0..n {
        let mut e = vec![0.0; n];
        e[x] = 1.0;
        // Row x of exp(tQ) is (exp(tQᵀ) e_x)ᵀ.
        let row = series_propagate(q, &e, t);
        out[x * n..(x + 1) * n].copy_from_slice(&row);
    }
    out
}

/// Explicit Euler for `dp/dt = Qᵀp` with a fixed step.
pub fn euler(q: &[f64], p: &[f64], t: f64, step: f64) -> Vec<f64> {
    let steps = (t / step).round() as usize;
    let dt = t / steps as f64;
    let mut cur = p.to_vec();
    for _ in 0..steps {
        let d = mat_vec_t(q, &cur);
        for (a, b) in cur.iter_mut().zip(&d) {
            *a += dt * b;
        }
    }
    cur
}

/// Richardson extrapolation of Euler: `2·E(step/2) − E(step)`, second order.
pub fn euler_extrapolated(q: &[f64], p: &[f64], t: f64, step: f64) -> Vec<f64> {
    let coarse = euler(q, p, t, step);
    let fine = euler(q, p, t, step / 2.0);
    fine.iter().zip(&coarse).map(|(f, c)| 2.0 * f - c).collect()
}

/// Forward marginal by brute-force matrix exponential of the full generator.
pub fn forward_oracle(s: usize, d: usize, p0: &[f64], t: f64) -> Vec<f64> {
    series_propagate(&forward_generator(s, d), p0, t)
}

/// Reverse generator with off-diagonal rates `q(y)/q(x)/S · scale` on
/// Hamming-1 pairs, built from a forward marginal `q`.
pub fn reverse_generator_from_marginal(s: usize, d: usize, q: &[f64], scale: f64) -> Vec<f64> {
    let fwd = forward_generator(s, d);
    let n = q.len();
    let mut r = vec![0.0; n * n];
    for x in 0..n {
        let mut out = 0.0;
        for y in 0..n {
            if y != x && fwd[x * n + y] > 0.0 {
                let rate = q[y] / q[x] * fwd[x * n + y] * scale;
                r[x * n + y] = rate;
                out += rate;
            }
        }
        r[x * n + x] = -out;
    }
    r
}

/// Product of per-dimension vectors in encode order (dimension 0 fastest).
pub fn outer(marginals: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![1.0];
    for m in marginals {
        let mut next = Vec::with_capacity(out.len() * m.len());
        for &b in m {
            for &a in &out {
                next.push(a * b);
            }
        }
        out = next;
    }
    out
}
