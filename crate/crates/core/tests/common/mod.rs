//! Independent oracles shared by the integration tests. They work directly on
//! Cayley tables, coordinate vectors and dense matrices and avoid the library
//! code paths they are used to check.
#![allow(dead_code)]

use cokerwalk::group::FiniteGroup;
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

/// Membership mask of the subgroup generated by `gens`.
pub fn closure(g: &FiniteGroup, gens: &[usize]) -> Vec<bool> {
    let n = g.order();
    let mut inside = vec![false; n];
    inside[0] = true;
    let mut members = vec![0usize];
    let mut i = 0;
    while i < members.len() {
        let x = members[i];
        for &s in gens {
            let y = g.mul(x, s);
            if !inside[y] {
                inside[y] = true;
                members.push(y);
            }
        }
        i += 1;
    }
    inside
}

pub fn mask_of(n: usize, elements: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &x in elements {
        m[x] = true;
    }
    m
}

pub fn elements(mask: &[bool]) -> Vec<usize> {
    (0..mask.len()).filter(|&x| mask[x]).collect()
}

/// Every subgroup, as joins of cyclic subgroups.
pub fn all_subgroups(g: &FiniteGroup) -> Vec<Vec<bool>> {
    let n = g.order();
    let mut subs: Vec<Vec<bool>> = vec![closure(g, &[])];
    let mut i = 0;
    while i < subs.len() {
        let base = elements(&subs[i]);
        for x in 0..n {
            if subs[i][x] {
                continue;
            }
            let mut gens = base.clone();
            gens.push(x);
            let s = closure(g, &gens);
            if !subs.contains(&s) {
                subs.push(s);
            }
        }
        i += 1;
    }
    subs
}

/// Second singular value (with multiplicity) of a dense real matrix; 0 for 1×1.
pub fn second_singular(m: DMatrix<f64>) -> f64 {
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv.get(1).copied().unwrap_or(0.0)
}

/// Second singular value of convolution by the image of μ on H/K, for K ⊆ H
/// with K normal in G. With K trivial this is the operator on L²(H).
pub fn quotient_sigma(g: &FiniteGroup, mu: &[f64], h: &[bool], k: &[bool]) -> f64 {
    let n = g.order();
    let kel = elements(k);
    let coset = |x: usize| kel.iter().map(|&y| g.mul(x, y)).min().unwrap();
    let reps: Vec<usize> = {
        let mut r: Vec<usize> = (0..n).filter(|&x| h[x]).map(coset).collect();
        r.sort_unstable();
        r.dedup();
        r
    };
    let mut bar = vec![0.0; n];
    for x in 0..n {
        bar[coset(x)] += mu[x];
    }
    let m = reps.len();
    let mat = DMatrix::from_fn(m, m, |i, j| bar[coset(g.mul(g.inv(reps[j]), reps[i]))]);
    second_singular(mat)
}

/// Law of X₁X₂…X_k for independent steps.
pub fn walk_law(g: &FiniteGroup, steps: &[Vec<f64>]) -> Vec<f64> {
    let n = g.order();
    let mut nu = vec![0.0; n];
    nu[0] = 1.0;
    for mu in steps {
        let mut next = vec![0.0; n];
        for x in 0..n {
            if nu[x] == 0.0 {
                continue;
            }
            for y in 0..n {
                next[g.mul(x, y)] += nu[x] * mu[y];
            }
        }
        nu = next;
    }
    nu
}

pub fn dist2_to_uniform(nu: &[f64]) -> f64 {
    let u = 1.0 / nu.len() as f64;
    nu.iter().map(|x| (x - u) * (x - u)).sum()
}

/// Fraction-free Gaussian elimination determinant.
pub fn bareiss_det(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(i, k);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
        }
        prev = a[k][k].clone();
    }
    sign * a[n - 1][n - 1].clone()
}

pub fn is_unit(d: &BigInt) -> bool {
    d.abs().is_one()
}

/// Coordinate vectors of ⊕ ℤ/dᵢ.
pub fn all_elements(factors: &[u64]) -> Vec<Vec<u64>> {
    let mut out = vec![vec![]];
    for &d in factors {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..d).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

pub fn add(factors: &[u64], x: &[u64], y: &[u64]) -> Vec<u64> {
    x.iter().zip(y).zip(factors).map(|((a, b), d)| (a + b) % d).collect()
}

pub fn scale(factors: &[u64], k: u64, x: &[u64]) -> Vec<u64> {
    x.iter().zip(factors).map(|(a, d)| (a * (k % d)) % d).collect()
}

pub fn order_of(factors: &[u64]) -> u64 {
    factors.iter().product()
}

/// Size of the subgroup of ⊕ ℤ/dᵢ spanned by `gens`.
pub fn span_size(factors: &[u64], gens: &[Vec<u64>]) -> u64 {
    let mut seen = std::collections::HashSet::new();
    let zero = vec![0u64; factors.len()];
    seen.insert(zero.clone());
    let mut stack = vec![zero];
    while let Some(x) = stack.pop() {
        for s in gens {
            let y = add(factors, &x, s);
            if seen.insert(y.clone()) {
                stack.push(y);
            }
        }
    }
    seen.len() as u64
}

/// #Sur(⊕ ℤ/aᵢ, ⊕ ℤ/bⱼ) by listing every choice of generator images.
pub fn count_surjections(a: &[u64], b: &[u64]) -> u64 {
    let elems = all_elements(b);
    let target = order_of(b);
    let choices: Vec<Vec<&Vec<u64>>> = a
        .iter()
        .map(|&ai| {
            elems
                .iter()
                .filter(|x| scale(b, ai, x).iter().all(|&c| c == 0))
                .collect()
        })
        .collect();
    let mut count = 0;
    let mut idx = vec![0usize; a.len()];
    loop {
        let gens: Vec<Vec<u64>> = idx.iter().zip(&choices).map(|(&i, c)| c[i].clone()).collect();
        if span_size(b, &gens) == target {
            count += 1;
        }
        let mut k = 0;
        while k < a.len() {
            idx[k] += 1;
            if idx[k] < choices[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == a.len() {
            return count;
        }
    }
}

/// Invariant-factor lists of every abelian group of order `n` (empty for n = 1).
pub fn abelian_groups_of_order(n: u64) -> Vec<Vec<u64>> {
    // largest factor first, each dividing the one before
    fn rec(n: u64, acc: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if n == 1 {
            out.push(acc.iter().rev().copied().collect());
            return;
        }
        for d in 2..=n {
            if n.is_multiple_of(d) && acc.last().is_none_or(|&p| p % d == 0) {
                acc.push(d);
                rec(n / d, acc, out);
                acc.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(n, &mut Vec::new(), &mut out);
    out
}
