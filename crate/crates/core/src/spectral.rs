//! Convolution-operator matrices, singular values, ε-balancedness and the
//! singular-value bounds for balanced measures.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{generated_subgroup, left_cosets, subgroup_lattice, Subgroup};
use crate::measure::SignedMeasure;

/// Largest matrix dimension accepted by [`singular_values`].
pub const MAX_DIM: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> DenseMatrix {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> DenseMatrix {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m.data[i * d.len() + i] = x;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<DenseMatrix> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::InvalidArgument("ragged matrix rows".into()));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(DenseMatrix { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn rank_one_all(n: usize, value: f64) -> DenseMatrix {
        DenseMatrix {
            rows: n,
            cols: n,
            data: vec![value; n * n],
        }
    }
}

/// Matrix of ν ↦ ν∗μ in the Dirac basis: entry (g, h) = μ(h⁻¹g).
pub fn convolution_matrix(mu: &SignedMeasure) -> DenseMatrix {
    let g = mu.group();
    let n = g.order();
    let mut m = DenseMatrix::zeros(n, n);
    for h in 0..n {
        let hi = g.inv(h);
        for x in 0..n {
            m.data[x * n + h] = mu.weight(g.mul(hi, x));
        }
    }
    m
}

/// Singular values in descending order, by one-sided Jacobi orthogonalization
/// of the columns.
pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    let big = m.rows.max(m.cols);
    if big > MAX_DIM {
        return Err(Error::DimensionCap {
            size: big,
            cap: MAX_DIM,
        });
    }
    // Work on whichever of M, Mᵀ has fewer columns; singular values agree.
    let mut cols: Vec<Vec<f64>> = if m.cols <= m.rows {
        (0..m.cols)
            .map(|j| (0..m.rows).map(|i| m.get(i, j)).collect())
            .collect()
    } else {
        (0..m.rows)
            .map(|i| m.data[i * m.cols..(i + 1) * m.cols].to_vec())
            .collect()
    };
    let c = cols.len();
    const EPS: f64 = 1e-15;
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..c {
            for j in i + 1..c {
                let (a, b) = split_pair(&mut cols, i, j);
                let alpha: f64 = a.iter().map(|x| x * x).sum();
                let beta: f64 = b.iter().map(|x| x * x).sum();
                let gamma: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= EPS * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                    let (u, v) = (*x, *y);
                    *x = cs * u - sn * v;
                    *y = sn * u + cs * v;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

fn split_pair(cols: &mut [Vec<f64>], i: usize, j: usize) -> (&mut Vec<f64>, &mut Vec<f64>) {
    debug_assert!(i < j);
    let (lo, hi) = cols.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}

#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub singular_values: Vec<f64>,
    pub second_largest: f64,
    pub subgroup_used: Subgroup,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReportJson {
    pub singular_values: Vec<f64>,
    pub second_largest: f64,
    pub subgroup_used: Vec<usize>,
}

impl SpectralReport {
    pub fn to_json(&self) -> SpectralReportJson {
        SpectralReportJson {
            singular_values: self.singular_values.clone(),
            second_largest: self.second_largest,
            subgroup_used: self.subgroup_used.elements().to_vec(),
        }
    }
}

/// Second singular value of ∗μ on L²(⟨supp μ⟩), counted with multiplicity.
/// A 1×1 operator reports 0.
pub fn second_singular_value(mu: &SignedMeasure) -> Result<SpectralReport> {
    mu.require_probability()?;
    let h = generated_subgroup(mu.group(), &mu.support())?;
    let (restricted, _) = mu.restrict(&h)?;
    let sv = singular_values(&convolution_matrix(&restricted))?;
    let second = sv.get(1).copied().unwrap_or(0.0);
    Ok(SpectralReport {
        singular_values: sv,
        second_largest: second,
        subgroup_used: h,
    })
}

/// Second singular value of ∗μ on all of L²(G).
pub fn second_singular_value_on_group(mu: &SignedMeasure) -> Result<f64> {
    let sv = singular_values(&convolution_matrix(mu))?;
    Ok(sv.get(1).copied().unwrap_or(0.0))
}

/// ε = 1 − max μ(gH) over proper subgroups H and g ∈ G.
///
/// Coset mass only grows when H grows, so the maximum is attained on a maximal
/// subgroup; only those are scanned. The trivial group has no proper subgroup
/// and reports ε = 1.
pub fn epsilon_balanced(mu: &SignedMeasure) -> Result<f64> {
    let g = mu.group();
    if g.order() == 1 {
        return Ok(1.0);
    }
    let lat = subgroup_lattice(g)?;
    let best = lat
        .maximal_subgroups()
        .into_iter()
        .map(|h| max_coset_mass(mu, h))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((1.0 - best).clamp(0.0, 1.0))
}

/// Same quantity scanning every proper subgroup.
pub fn epsilon_balanced_exhaustive(mu: &SignedMeasure) -> Result<f64> {
    let g = mu.group();
    if g.order() == 1 {
        return Ok(1.0);
    }
    let lat = subgroup_lattice(g)?;
    let best = lat
        .subgroups()
        .iter()
        .filter(|h| !h.is_whole())
        .map(|h| max_coset_mass(mu, h))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((1.0 - best).clamp(0.0, 1.0))
}

fn max_coset_mass(mu: &SignedMeasure, h: &Subgroup) -> f64 {
    left_cosets(mu.group(), h)
        .iter()
        .map(|c| c.iter().map(|&x| mu.weight(x)).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// ε for a distribution on ⊕ ℤ/dᵢ given as (coordinates, probability) pairs.
///
/// Maximal subgroups of a finite abelian group are the kernels of nonzero maps
/// to ℤ/p, so the scan runs over functionals x ↦ Σ cᵢxᵢ mod p with cᵢ = 0
/// whenever p ∤ dᵢ, one per kernel (first nonzero coefficient is 1).
pub fn epsilon_balanced_abelian(factors: &[u64], dist: &[(Vec<u64>, f64)]) -> Result<f64> {
    if factors.iter().all(|&d| d == 1) {
        return Ok(1.0);
    }
    let mut primes: Vec<u64> = factors.iter().flat_map(|&d| prime_factors(d)).collect();
    primes.sort_unstable();
    primes.dedup();
    let mut best = f64::NEG_INFINITY;
    for p in primes {
        let slots: Vec<usize> = (0..factors.len()).filter(|&i| factors[i].is_multiple_of(p)).collect();
        let k = slots.len() as u32;
        let total = (p as u128).pow(k);
        if total > 1 << 24 {
            return Err(Error::CapExceeded {
                what: "functionals in abelian balance scan",
                size: total,
                cap: 1 << 24,
            });
        }
        let mut coeffs = vec![0u64; slots.len()];
        let mut hist = vec![0.0f64; p as usize];
        for code in 1..total {
            let mut c = code;
            for x in coeffs.iter_mut() {
                *x = (c % p as u128) as u64;
                c /= p as u128;
            }
            // one representative per kernel
            if coeffs.iter().find(|&&x| x != 0) != Some(&1) {
                continue;
            }
            hist.fill(0.0);
            for (v, w) in dist {
                let mut t = 0u64;
                for (&slot, &ci) in slots.iter().zip(&coeffs) {
                    t += ci * (v[slot] % p);
                }
                hist[(t % p) as usize] += w;
            }
            best = hist.iter().copied().fold(best, f64::max);
        }
    }
    Ok((1.0 - best).clamp(0.0, 1.0))
}

pub(crate) fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// exp(−ε / (2|G|³))
pub fn sigma_bound_general(epsilon: f64, group_order: usize) -> f64 {
    let g = group_order as f64;
    (-epsilon / (2.0 * g * g * g)).exp()
}

/// exp(−ε / a²)
pub fn sigma_bound_abelian(epsilon: f64, a: u64) -> f64 {
    let a = a as f64;
    (-epsilon / (a * a)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::*;
    use crate::measure::{convolve, l2_distance};
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, Signed, Zero};
    use proptest::prelude::*;

    // ---- exact oracle: eigenvalues of MᵀM from its characteristic polynomial

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::new(BigInt::from(n), BigInt::from(d))
    }

    /// Characteristic polynomial coefficients (monic, highest degree first)
    /// by Faddeev–LeVerrier.
    fn charpoly(a: &[Vec<Q>]) -> Vec<Q> {
        let n = a.len();
        let mul = |x: &[Vec<Q>], y: &[Vec<Q>]| -> Vec<Vec<Q>> {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (0..n).fold(Q::zero(), |s, k| s + &x[i][k] * &y[k][j]))
                        .collect()
                })
                .collect()
        };
        let mut coeffs = vec![Q::one()];
        let mut m: Vec<Vec<Q>> = vec![vec![Q::zero(); n]; n];
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{n-k+1} I
            let mut mk = mul(a, &m);
            let prev = coeffs.last().unwrap().clone();
            for (i, row) in mk.iter_mut().enumerate() {
                row[i] += &prev;
            }
            let am = mul(a, &mk);
            let tr = (0..n).fold(Q::zero(), |s, i| s + &am[i][i]);
            coeffs.push(-tr / Q::from_integer(BigInt::from(k as i64)));
            m = mk;
        }
        coeffs
    }

    fn eval(p: &[Q], x: &Q) -> Q {
        p.iter().fold(Q::zero(), |acc, c| acc * x + c)
    }

    fn derivative(p: &[Q]) -> Vec<Q> {
        let d = p.len() - 1;
        p[..d]
            .iter()
            .enumerate()
            .map(|(i, c)| c * Q::from_integer(BigInt::from((d - i) as i64)))
            .collect()
    }

    fn rem(a: &[Q], b: &[Q]) -> Vec<Q> {
        let mut r = a.to_vec();
        while r.len() >= b.len() && !r.is_empty() {
            let f = &r[0] / &b[0];
            for i in 0..b.len() {
                r[i] = &r[i] - &f * &b[i];
            }
            r.remove(0);
        }
        while r.len() > 1 && r[0].is_zero() {
            r.remove(0);
        }
        r
    }

    fn sturm(p: &[Q]) -> Vec<Vec<Q>> {
        let mut seq = vec![p.to_vec(), derivative(p)];
        loop {
            let n = seq.len();
            let r = rem(&seq[n - 2], &seq[n - 1]);
            if r.iter().all(|c| c.is_zero()) {
                break;
            }
            seq.push(r.into_iter().map(|c| -c).collect());
            if seq.last().unwrap().len() == 1 {
                break;
            }
        }
        seq
    }

    fn sign_changes(seq: &[Vec<Q>], x: &Q) -> usize {
        let signs: Vec<i32> = seq
            .iter()
            .map(|p| eval(p, x))
            .filter(|v| !v.is_zero())
            .map(|v| if v.is_positive() { 1 } else { -1 })
            .collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Distinct real roots of p in (lo, hi], each isolated to width `tol`.
    fn roots(p: &[Q], lo: Q, hi: Q, tol: &Q) -> Vec<Q> {
        let seq = sturm(p);
        let mut out = Vec::new();
        let mut stack = vec![(lo, hi)];
        while let Some((a, b)) = stack.pop() {
            let count = sign_changes(&seq, &a) - sign_changes(&seq, &b);
            if count == 0 {
                continue;
            }
            if &b - &a < *tol && count == 1 {
                out.push((&a + &b) / q(2, 1));
                continue;
            }
            let mid = (&a + &b) / q(2, 1);
            stack.push((a, mid.clone()));
            stack.push((mid, b));
        }
        out.sort();
        out.reverse();
        out
    }

    fn oracle_singular_values(m: &[Vec<i64>], denom: i64) -> Vec<f64> {
        use num_traits::ToPrimitive;
        let n = m.len();
        let a: Vec<Vec<Q>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).fold(Q::zero(), |s, k| s + q(m[k][i] * m[k][j], denom * denom)))
                    .collect()
            })
            .collect();
        let p = charpoly(&a);
        // eigenvalues of MᵀM lie in [0, n·max²]
        let r = roots(&p, q(-1, 1_000_000), q(10_000, 1), &q(1, 1_000_000_000_000_000_000));
        r.iter().map(|x| x.to_f64().unwrap().max(0.0).sqrt()).collect()
    }

    #[test]
    fn identity_and_diagonal() {
        let sv = singular_values(&DenseMatrix::identity(5)).unwrap();
        assert!(sv.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        let sv = singular_values(&DenseMatrix::from_diag(&[3.0, -4.0])).unwrap();
        assert_eq!(sv, vec![4.0, 3.0]);
    }

    #[test]
    fn dimension_cap() {
        let m = DenseMatrix::zeros(1, MAX_DIM + 1);
        assert!(matches!(singular_values(&m).unwrap_err(), Error::DimensionCap { .. }));
    }

    #[test]
    fn random_6x6_against_exact_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let m: Vec<Vec<i64>> = (0..6)
                .map(|_| (0..6).map(|_| rng.random_range(-100..=100)).collect())
                .collect();
            let dm = DenseMatrix::from_rows(
                &m.iter()
                    .map(|r| r.iter().map(|&x| x as f64 / 100.0).collect())
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            let got = singular_values(&dm).unwrap();
            let want = oracle_singular_values(&m, 100);
            assert_eq!(want.len(), 6, "oracle expects distinct eigenvalues");
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-8, "{got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn convolution_matrix_basics() {
        let g = dihedral_group(4);
        assert_eq!(
            convolution_matrix(&SignedMeasure::dirac(&g, 0).unwrap()),
            DenseMatrix::identity(8)
        );
        assert_eq!(
            convolution_matrix(&SignedMeasure::uniform(&g)),
            DenseMatrix::rank_one_all(8, 1.0 / 8.0)
        );
    }

    #[test]
    fn known_second_values() {
        let z2 = cyclic_group(2);
        for p in [0.0, 0.1, 0.3, 0.5, 0.9] {
            let m = SignedMeasure::probability(&z2, vec![1.0 - p, p]).unwrap();
            let r = second_singular_value(&m).unwrap();
            if p == 0.0 {
                assert_eq!(r.second_largest, 0.0);
                assert!(r.subgroup_used.is_trivial());
            } else {
                assert!((r.second_largest - (1.0f64 - 2.0 * p).abs()).abs() < 1e-12);
            }
        }
        let a5 = alternating_group_5();
        let h = generated_subgroup(a5.group(), &[a5.element_from_cycles(&[&[1, 2, 3]]).unwrap()]).unwrap();
        let r = second_singular_value(&SignedMeasure::uniform_on(&h)).unwrap();
        assert!(r.second_largest.abs() < 1e-10);
        assert_eq!(r.subgroup_used, h);
        assert_eq!(
            second_singular_value(&SignedMeasure::dirac(&a5.group().clone(), 0).unwrap())
                .unwrap()
                .second_largest,
            0.0
        );
    }

    #[test]
    fn proper_support_gives_sigma_one_on_whole_group() {
        let d8 = dihedral_group(4);
        let m = SignedMeasure::from_pairs(&d8, &[(0, 0.5), (1, 0.5)]).unwrap();
        assert!((second_singular_value_on_group(&m).unwrap() - 1.0).abs() < 1e-12);
        assert!(second_singular_value(&m).unwrap().second_largest < 1.0 - 1e-3);
    }

    #[test]
    fn epsilon_examples() {
        for p in [2usize, 3, 5, 7] {
            let g = cyclic_group(p);
            let e = epsilon_balanced(&SignedMeasure::uniform(&g)).unwrap();
            assert!((e - (1.0 - 1.0 / p as f64)).abs() < 1e-12);
        }
        let d8 = dihedral_group(4);
        let inside = SignedMeasure::from_pairs(&d8, &[(4, 0.5), (5, 0.5)]).unwrap();
        assert_eq!(epsilon_balanced(&inside).unwrap(), 0.0);
        // support = generating set with identity, min mass 0.2
        let m = SignedMeasure::from_pairs(&d8, &[(0, 0.2), (1, 0.5), (4, 0.3)]).unwrap();
        assert!(epsilon_balanced(&m).unwrap() >= 0.2 - 1e-12);
        assert_eq!(
            epsilon_balanced(&SignedMeasure::uniform(&trivial_group())).unwrap(),
            1.0
        );
    }

    #[test]
    fn bound_formulas() {
        assert_eq!(sigma_bound_general(0.0, 7), 1.0);
        assert!((sigma_bound_general(1.0, 2) - 0.939413062813476).abs() < 1e-12);
        assert_eq!(sigma_bound_abelian(0.0, 5), 1.0);
        assert!((sigma_bound_abelian(0.5, 2) - 0.8824969025845955).abs() < 1e-12);
    }

    fn decode(index: usize, factors: &[u64]) -> Vec<u64> {
        let mut v = vec![0; factors.len()];
        let mut x = index as u64;
        for i in (0..factors.len()).rev() {
            v[i] = x % factors[i];
            x /= factors[i];
        }
        v
    }

    fn prob(g: &GroupRef, raw: &[f64], keep: u32) -> SignedMeasure {
        let w: Vec<f64> = (0..g.order())
            .map(|i| {
                if keep >> (i % 32) & 1 == 1 {
                    raw[i % raw.len()]
                } else {
                    0.0
                }
            })
            .collect();
        let s: f64 = w.iter().sum();
        if s == 0.0 {
            return SignedMeasure::uniform(g);
        }
        SignedMeasure::probability(g, w.iter().map(|x| x / s).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn abelian_fast_path_matches_lattice(fi in 0usize..6, raw in prop::collection::vec(0.0f64..1.0, 24), keep in any::<u32>()) {
            let factors: &[u64] = [&[2u64, 2][..], &[6], &[2, 4], &[3, 3], &[2, 6], &[12]][fi];
            let g = abelian_group_from_factors(factors);
            let mu = prob(&g, &raw, keep);
            let dist: Vec<(Vec<u64>, f64)> = (0..g.order()).map(|i| (decode(i, factors), mu.weight(i))).collect();
            let fast = epsilon_balanced_abelian(factors, &dist).unwrap();
            let slow = epsilon_balanced_exhaustive(&mu).unwrap();
            prop_assert!((fast - slow).abs() < 1e-12);
            prop_assert!((epsilon_balanced(&mu).unwrap() - slow).abs() < 1e-12);
        }

        #[test]
        fn operator_spectrum_properties(gi in 0usize..4, raw in prop::collection::vec(0.0f64..1.0, 24), keep in any::<u32>(), a in prop::collection::vec(-1.0f64..1.0, 24), b in prop::collection::vec(-1.0f64..1.0, 24)) {
            let g = [dihedral_group(4), quaternion_group(), alternating_group(4).group().clone(), abelian_group_from_factors(&[2, 6])][gi].clone();
            let mu = prob(&g, &raw, keep);
            let m = convolution_matrix(&mu);
            let sv = singular_values(&m).unwrap();
            prop_assert!((sv[0] - 1.0).abs() < 1e-8);
            prop_assert!(sv.windows(2).all(|w| w[0] >= w[1]));
            let pi = SignedMeasure::uniform(&g);
            let mpi = m.mul_vec(pi.weights());
            prop_assert!(mpi.iter().zip(pi.weights()).all(|(x, y)| (x - y).abs() < 1e-12));
            // matrix agrees with convolution
            let nu = SignedMeasure::new(&g, a[..g.order()].to_vec()).unwrap();
            let direct = convolve(&nu, &mu).unwrap();
            prop_assert!(m.mul_vec(nu.weights()).iter().zip(direct.weights()).all(|(x, y)| (x - y).abs() < 1e-12));
            // contraction on equal-mass pairs inside H = ⟨supp μ⟩
            let rep = second_singular_value(&mu).unwrap();
            let h = &rep.subgroup_used;
            let mut v1 = vec![0.0; g.order()];
            let mut v2 = vec![0.0; g.order()];
            for &x in h.elements() { v1[x] = a[x]; v2[x] = b[x]; }
            let shift = (v1.iter().sum::<f64>() - v2.iter().sum::<f64>()) / h.order() as f64;
            for &x in h.elements() { v2[x] += shift; }
            let n1 = SignedMeasure::new(&g, v1).unwrap();
            let n2 = SignedMeasure::new(&g, v2).unwrap();
            let lhs = l2_distance(&convolve(&n1, &mu).unwrap(), &convolve(&n2, &mu).unwrap()).unwrap();
            prop_assert!(lhs <= rep.second_largest * l2_distance(&n1, &n2).unwrap() + 1e-8);
        }

        #[test]
        fn quotients_do_not_increase_sigma(gi in 0usize..4, raw in prop::collection::vec(0.0f64..1.0, 24), keep in any::<u32>()) {
            let g = [dihedral_group(4), quaternion_group(), alternating_group(4).group().clone(), dihedral_group(6)][gi].clone();
            let mu = prob(&g, &raw, keep);
            let s = second_singular_value(&mu).unwrap().second_largest;
            for n in subgroup_lattice(&g).unwrap().subgroups().iter().filter(|h| is_normal(&g, h)) {
                let (_, p) = quotient(&g, n).unwrap();
                let pushed = crate::measure::pushforward(&p, &mu).unwrap();
                prop_assert!(second_singular_value(&pushed).unwrap().second_largest <= s + 1e-8);
            }
        }
    }
}
