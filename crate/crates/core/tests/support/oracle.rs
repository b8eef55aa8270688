//! Brute-force enumeration oracle and random model generator.
//!
//! Everything here works from raw probability vectors and statistic values
//! with straight double loops, independently of the crate's partition logic.

#![allow(dead_code)]

use discretep::model::{ModelParts, Parameter};
use discretep::rational::{int, one, ratio, zero};
use discretep::{DiscreteModel, Rational};

/// `a(x) = Pr0{T > T(x)}`, `b(x) = Pr0{T = T(x)}`.
pub fn statistic_ab(p0: &[Rational], t: &[Rational]) -> (Vec<Rational>, Vec<Rational>) {
    let n = p0.len();
    let mut a = vec![zero(); n];
    let mut b = vec![zero(); n];
    for x in 0..n {
        for y in 0..n {
            if t[y] > t[x] {
                a[x] += &p0[y];
            } else if t[y] == t[x] {
                b[x] += &p0[y];
            }
        }
    }
    (a, b)
}

/// `a(x) = Pr0{R < R(x)}`, `b(x) = p0(x)`.
pub fn rank_ab(p0: &[Rational], ranks: &[usize]) -> (Vec<Rational>, Vec<Rational>) {
    let n = p0.len();
    let mut a = vec![zero(); n];
    for x in 0..n {
        for y in 0..n {
            if ranks[y] < ranks[x] {
                a[x] += &p0[y];
            }
        }
    }
    (a, p0.to_vec())
}

fn clamp01(q: Rational) -> Rational {
    if q < zero() {
        zero()
    } else if q > one() {
        one()
    } else {
        q
    }
}

/// `φ_α(x) = clamp((α − a)/b, 0, 1)`.
pub fn phi(a: &[Rational], b: &[Rational], alpha: &Rational) -> Vec<Rational> {
    a.iter().zip(b).map(|(a, b)| clamp01((alpha - a) / b)).collect()
}

pub fn expect(p: &[Rational], g: &[Rational]) -> Rational {
    p.iter().zip(g).fold(zero(), |acc, (p, g)| acc + p * g)
}

/// `Pr{φ = 1}`.
pub fn natural_power(p: &[Rational], phi: &[Rational]) -> Rational {
    p.iter().zip(phi).filter(|(_, f)| **f == one()).fold(zero(), |acc, (p, _)| acc + p)
}

pub fn pvalues(a: &[Rational], b: &[Rational], u: &Rational) -> Vec<Rational> {
    a.iter().zip(b).map(|(a, b)| a + u * b).collect()
}

/// `Pr{P ≤ t}`.
pub fn cdf(p: &[Rational], pv: &[Rational], t: &Rational) -> Rational {
    p.iter().zip(pv).filter(|(_, v)| *v <= t).fold(zero(), |acc, (p, _)| acc + p)
}

/// `∫₀^s Pr{P ≤ r} dr = E[(s − P)+]`.
pub fn integrated_cdf(p: &[Rational], pv: &[Rational], s: &Rational) -> Rational {
    p.iter().zip(pv).filter(|(_, v)| *v < s).fold(zero(), |acc, (p, v)| acc + p * (s - v))
}

/// `Pr{a + U·b ≤ t}`.
pub fn randomized_cdf(p: &[Rational], a: &[Rational], b: &[Rational], t: &Rational) -> Rational {
    p.iter().zip(a.iter().zip(b)).fold(zero(), |acc, (p, (a, b))| acc + p * clamp01((t - a) / b))
}

/// Deterministic splitmix64 stream for building random models.
pub struct Gen(u64);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(seed)
    }

    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `lo..=hi`.
    pub fn range(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.next() % (hi - lo + 1)
    }
}

fn normalize(w: &[u64]) -> Vec<Rational> {
    let total: u64 = w.iter().sum();
    w.iter().map(|&x| ratio(x as i64, total as i64)).collect()
}

/// A random finite model with `2..=max_support` points, 2 to 4 parameters
/// and a cached statistic `t` with ties. When `sufficient` is set every
/// parameter shares the within-class weights, so `t` is sufficient.
pub fn random_model(seed: u64, max_support: usize, sufficient: bool) -> DiscreteModel {
    let mut g = Gen::new(seed);
    let n = g.range(2, max_support as u64) as usize;
    let levels = g.range(1, n.min(8) as u64);
    let t: Vec<u64> = (0..n).map(|_| g.range(0, levels - 1)).collect();
    let k = g.range(2, 4) as usize;
    let within: Vec<u64> = (0..n).map(|_| g.range(1, 9)).collect();
    let pmf: Vec<Vec<Rational>> = (0..k)
        .map(|_| {
            let w: Vec<u64> = if sufficient {
                let class: Vec<u64> = (0..levels).map(|_| g.range(1, 9)).collect();
                (0..n).map(|x| within[x] * class[t[x] as usize]).collect()
            } else {
                (0..n).map(|_| g.range(1, 12)).collect()
            };
            normalize(&w)
        })
        .collect();
    let labels = (0..n).map(|x| format!("x{x:02}")).collect();
    let params = (0..k).map(|j| Parameter { name: format!("p{j}"), value: int(j as i64) }).collect();
    DiscreteModel::new(ModelParts {
        labels,
        params,
        pmf,
        statistics: vec![("t".into(), t.iter().map(|&v| int(v as i64)).collect())],
        ..Default::default()
    })
    .expect("generated model is valid")
}
