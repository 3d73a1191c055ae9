//! Deterministic direction sets on the unit sphere.
//!
//! d = 1 uses the two-point sphere, d = 2 equally spaced angles starting at
//! angle 0, d = 3 a Fibonacci spiral and d >= 4 a Halton sequence pushed
//! through the Gaussian quantile function. For d >= 3 the set is rotated by a
//! seeded Haar-random orthogonal matrix.

use std::f64::consts::PI;

use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Result};
use crate::points::{dot, norm, Points};

pub fn sphere_directions(d: usize, n: usize, seed: u64) -> Result<Points> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if n == 0 {
        return Err(invalid("need at least one direction"));
    }
    let mut out = Points::empty(d);
    match d {
        1 => {
            if n > 2 {
                return Err(invalid(format!("the 0-sphere has two points; {n} directions requested")));
            }
            out.push(&[1.0]);
            if n == 2 {
                out.push(&[-1.0]);
            }
        }
        2 => {
            for k in 0..n {
                let t = 2.0 * PI * k as f64 / n as f64;
                out.push(&[t.cos(), t.sin()]);
            }
        }
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            let rot = random_rotation(3, seed);
            for k in 0..n {
                let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
                let rho = (1.0 - z * z).max(0.0).sqrt();
                let t = golden * k as f64;
                out.push(&apply(&rot, &normalize(&[rho * t.cos(), rho * t.sin(), z])));
            }
        }
        _ => {
            let primes = first_primes(d);
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            let rot = random_rotation(d, seed);
            for k in 0..n {
                let g: Vec<f64> = primes
                    .iter()
                    .map(|&p| normal.inverse_cdf(radical_inverse(k as u64 + 1, p)))
                    .collect();
                out.push(&apply(&rot, &normalize(&g)));
            }
        }
    }
    Ok(out)
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let r = norm(v);
    v.iter().map(|c| c / r).collect()
}

fn apply(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    normalize(&m.iter().map(|row| dot(row, v)).collect::<Vec<_>>())
}

/// Haar-distributed orthogonal matrix from Gram-Schmidt on a Gaussian matrix.
fn random_rotation(d: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng as _;
    let mut rng = crate::rng::rng(seed);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    while rows.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for r in &rows {
            let c = dot(&v, r);
            for (vi, ri) in v.iter_mut().zip(r) {
                *vi -= c * ri;
            }
        }
        let n = norm(&v);
        if n > 1e-8 {
            rows.push(v.into_iter().map(|c| c / n).collect());
        }
    }
    rows
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut x = 0.0;
    while k > 0 {
        x += f * (k % base) as f64;
        k /= base;
        f *= inv;
    }
    x
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut c = 2u64;
    while primes.len() < n {
        if primes.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}
