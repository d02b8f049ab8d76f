//! Finitely generated abelian groups: hom/surjection/automorphism counts and
//! the λ_u masses on finite abelian groups.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{abelian_group_from_factors, subgroup_lattice_capped, DEFAULT_LATTICE_CAP};
use crate::spectral::prime_factors;

/// ℤ^r ⊕ ℤ/d₁ ⊕ … ⊕ ℤ/d_k with d₁ | d₂ | … and every d_i ≥ 2.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AbelianGroup {
    free_rank: usize,
    invariant_factors: Vec<BigUint>,
}

impl AbelianGroup {
    /// Any list of cyclic orders; 0 stands for ℤ and 1 is dropped.
    pub fn new(free_rank: usize, cyclic_orders: Vec<BigUint>) -> AbelianGroup {
        let mut free_rank = free_rank;
        let mut d: Vec<BigUint> = Vec::with_capacity(cyclic_orders.len());
        for x in cyclic_orders {
            if x.is_zero() {
                free_rank += 1;
            } else if !x.is_one() {
                d.push(x);
            }
        }
        // pairwise (gcd, lcm) sweeps give a divisibility chain without factoring
        for i in 0..d.len() {
            for j in i + 1..d.len() {
                let g = d[i].gcd(&d[j]);
                let l = &d[i] / &g * &d[j];
                d[i] = g;
                d[j] = l;
            }
        }
        d.retain(|x| !x.is_one());
        AbelianGroup {
            free_rank,
            invariant_factors: d,
        }
    }

    pub fn from_factors(free_rank: usize, cyclic_orders: &[u64]) -> AbelianGroup {
        Self::new(free_rank, cyclic_orders.iter().map(|&x| BigUint::from(x)).collect())
    }

    pub fn trivial() -> AbelianGroup {
        Self::new(0, vec![])
    }

    pub fn cyclic(n: u64) -> AbelianGroup {
        Self::from_factors(0, &[n])
    }

    pub fn free(rank: usize) -> AbelianGroup {
        Self::new(rank, vec![])
    }

    pub fn free_rank(&self) -> usize {
        self.free_rank
    }

    pub fn invariant_factors(&self) -> &[BigUint] {
        &self.invariant_factors
    }

    pub fn is_finite(&self) -> bool {
        self.free_rank == 0
    }

    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.invariant_factors.is_empty()
    }

    /// |A|, or None when A is infinite.
    pub fn order(&self) -> Option<BigUint> {
        self.is_finite().then(|| self.invariant_factors.iter().product())
    }

    pub fn order_u64(&self) -> Option<u64> {
        self.order()?.to_u64()
    }

    /// Largest invariant factor (1 for the trivial group); None when infinite.
    pub fn exponent(&self) -> Option<BigUint> {
        self.is_finite()
            .then(|| self.invariant_factors.last().cloned().unwrap_or_else(BigUint::one))
    }

    pub fn exponent_u64(&self) -> Option<u64> {
        self.exponent()?.to_u64()
    }

    pub fn factors_u64(&self) -> Option<Vec<u64>> {
        self.invariant_factors.iter().map(|d| d.to_u64()).collect()
    }

    /// Torsion subgroup.
    pub fn torsion(&self) -> AbelianGroup {
        AbelianGroup {
            free_rank: 0,
            invariant_factors: self.invariant_factors.clone(),
        }
    }

    pub fn direct_sum(&self, other: &AbelianGroup) -> AbelianGroup {
        let mut f = self.invariant_factors.clone();
        f.extend(other.invariant_factors.iter().cloned());
        Self::new(self.free_rank + other.free_rank, f)
    }

    /// Primes dividing the torsion order. Factors must fit in 64 bits.
    pub fn primes(&self) -> Result<Vec<u64>> {
        let e = match self.invariant_factors.last() {
            None => return Ok(vec![]),
            Some(e) => e
                .to_u64()
                .ok_or_else(|| Error::InvalidArgument("invariant factor exceeds 64 bits".into()))?,
        };
        Ok(prime_factors(e))
    }

    /// The p-primary part of the torsion as a partition.
    pub fn p_part(&self, p: u64) -> PartitionType {
        let pb = BigUint::from(p);
        let parts = self
            .invariant_factors
            .iter()
            .map(|d| {
                let mut d = d.clone();
                let mut v = 0u32;
                while (&d % &pb).is_zero() {
                    d /= &pb;
                    v += 1;
                }
                v
            })
            .collect();
        PartitionType::from_parts_unchecked(p, parts)
    }

    /// Canonical key, e.g. "0", "Z/2", "Z^2 x Z/2 x Z/6".
    pub fn canonical_string(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for AbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_trivial() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        match self.free_rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        parts.extend(self.invariant_factors.iter().map(|d| format!("Z/{d}")));
        write!(f, "{}", parts.join(" x "))
    }
}

impl FromStr for AbelianGroup {
    type Err = Error;

    /// Accepts the canonical form and loose variants such as "Z/2xZ/2",
    /// "Z/2 + Z/4", "1" or "trivial".
    fn from_str(s: &str) -> Result<AbelianGroup> {
        let t = s.trim();
        if t.is_empty() || t == "0" || t == "1" || t.eq_ignore_ascii_case("trivial") {
            return Ok(Self::trivial());
        }
        let bad = || Error::InvalidArgument(format!("cannot parse abelian group {s:?}"));
        let mut rank = 0usize;
        let mut orders = Vec::new();
        for tok in t.split(['x', '+', '*', '⊕', '×']).map(str::trim) {
            if tok == "Z" {
                rank += 1;
            } else if let Some(r) = tok.strip_prefix("Z^") {
                rank += r.trim().parse::<usize>().map_err(|_| bad())?;
            } else if let Some(d) = tok.strip_prefix("Z/") {
                orders.push(d.trim().parse::<BigUint>().map_err(|_| bad())?);
            } else {
                return Err(bad());
            }
        }
        if orders.iter().any(|d| d.is_zero()) {
            return Err(bad());
        }
        Ok(Self::new(rank, orders))
    }
}

#[derive(Serialize, Deserialize)]
struct AbelianGroupJson {
    free_rank: usize,
    invariant_factors: Vec<serde_json::Value>,
}

impl Serialize for AbelianGroup {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        AbelianGroupJson {
            free_rank: self.free_rank,
            invariant_factors: self.invariant_factors.iter().map(big_to_json).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AbelianGroup {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = AbelianGroupJson::deserialize(d)?;
        let f = j
            .invariant_factors
            .iter()
            .map(|v| json_to_big(v).map_err(D::Error::custom))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(AbelianGroup::new(j.free_rank, f))
    }
}

/// Numbers that fit in u64 become JSON numbers, larger ones strings.
pub(crate) fn big_to_json(x: &BigUint) -> serde_json::Value {
    match x.to_u64() {
        Some(v) => v.into(),
        None => x.to_string().into(),
    }
}

pub(crate) fn json_to_big(v: &serde_json::Value) -> std::result::Result<BigUint, String> {
    match v {
        serde_json::Value::Number(n) => n.as_u64().map(BigUint::from).ok_or_else(|| format!("bad integer {n}")),
        serde_json::Value::String(s) => s.parse().map_err(|_| format!("bad integer {s:?}")),
        other => Err(format!("expected integer, got {other}")),
    }
}

/// The p-group ⊕ ℤ/p^{λ_i} for λ₁ ≥ λ₂ ≥ … > 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartitionType {
    prime: u64,
    parts: Vec<u32>,
}

impl PartitionType {
    pub fn new(prime: u64, parts: Vec<u32>) -> Result<PartitionType> {
        if prime < 2 || prime_factors(prime) != [prime] {
            return Err(Error::InvalidArgument(format!("{prime} is not prime")));
        }
        Ok(Self::from_parts_unchecked(prime, parts))
    }

    fn from_parts_unchecked(prime: u64, mut parts: Vec<u32>) -> PartitionType {
        parts.retain(|&x| x > 0);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        PartitionType { prime, parts }
    }

    pub fn trivial(prime: u64) -> Result<PartitionType> {
        Self::new(prime, vec![])
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// Σ λ_i, so |B| = p^size.
    pub fn size(&self) -> u32 {
        self.parts.iter().sum()
    }

    pub fn order(&self) -> BigUint {
        BigUint::from(self.prime).pow(self.size())
    }

    pub fn to_group(&self) -> AbelianGroup {
        let p = BigUint::from(self.prime);
        AbelianGroup::new(0, self.parts.iter().map(|&e| p.pow(e)).collect())
    }

    /// |Aut B| by the closed form for abelian p-groups: with parts sorted
    /// e₁ ≤ … ≤ e_n, d_k = max{l : e_l = e_k}, c_k = min{l : e_l = e_k},
    /// |Aut| = Π_k (p^{d_k} − p^{k−1}) · Π_j p^{e_j (n − d_j)} · Π_i p^{(e_i − 1)(n − c_i + 1)}.
    pub fn aut_order(&self) -> BigUint {
        let p = BigUint::from(self.prime);
        let mut total = BigUint::one();
        let mut exp = 0u64;
        for (k, d, c, e) in self.aut_terms() {
            total *= p.pow(d) - p.pow(k - 1);
            exp += e as u64 * (self.parts.len() as u64 - d as u64);
            exp += (e as u64 - 1) * (self.parts.len() as u64 - c as u64 + 1);
        }
        total * p.pow(exp as u32)
    }

    /// ln |Aut B| from the same closed form, in floating point.
    pub fn log_aut_order(&self) -> f64 {
        let lp = (self.prime as f64).ln();
        let n = self.parts.len() as f64;
        let mut total = 0.0;
        for (k, d, c, e) in self.aut_terms() {
            total += d as f64 * lp + (-(self.prime as f64).powi(k as i32 - 1 - d as i32)).ln_1p();
            total += e as f64 * (n - d as f64) * lp;
            total += (e as f64 - 1.0) * (n - c as f64 + 1.0) * lp;
        }
        total
    }

    /// (k, d_k, c_k, e_k), 1-based, parts ascending.
    fn aut_terms(&self) -> Vec<(u32, u32, u32, u32)> {
        let asc: Vec<u32> = self.parts.iter().rev().copied().collect();
        let n = asc.len();
        (0..n)
            .map(|k| {
                let e = asc[k];
                let d = (0..n).rev().find(|&l| asc[l] == e).unwrap() + 1;
                let c = (0..n).find(|&l| asc[l] == e).unwrap() + 1;
                (k as u32 + 1, d as u32, c as u32, e)
            })
            .collect()
    }
}

/// All partitions of n in weakly decreasing order.
pub fn partitions(n: u32) -> Vec<Vec<u32>> {
    fn rec(rem: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if rem == 0 {
            out.push(cur.clone());
            return;
        }
        for part in (1..=max.min(rem)).rev() {
            cur.push(part);
            rec(rem - part, part, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

/// Every abelian group of order n up to isomorphism.
pub fn groups_of_order(n: u64) -> Vec<AbelianGroup> {
    let mut out = vec![AbelianGroup::trivial()];
    if n == 0 {
        return vec![];
    }
    let mut m = n;
    for p in prime_factors(n) {
        let mut v = 0;
        while m.is_multiple_of(p) {
            m /= p;
            v += 1;
        }
        let mut next = Vec::new();
        for g in &out {
            for lam in partitions(v) {
                next.push(g.direct_sum(&PartitionType::from_parts_unchecked(p, lam).to_group()));
            }
        }
        out = next;
    }
    out
}

/// #Hom(A, B) = |B|^{rank A} · Π_{i,j} gcd(d_i, e_j). B must be finite.
pub fn hom_count(a: &AbelianGroup, b: &AbelianGroup) -> Result<BigUint> {
    let bo = b.order().ok_or(Error::BInfinite)?;
    let mut total = bo.pow(a.free_rank as u32);
    for d in &a.invariant_factors {
        for e in &b.invariant_factors {
            total *= d.gcd(e);
        }
    }
    Ok(total)
}

/// ℤ/d ↦ ℤ/gcd(d, a), ℤ ↦ ℤ/a.
pub fn tensor_mod(a: &AbelianGroup, modulus: u64) -> AbelianGroup {
    let m = BigUint::from(modulus);
    let mut f: Vec<BigUint> = a.invariant_factors.iter().map(|d| d.gcd(&m)).collect();
    f.extend(std::iter::repeat_n(m, a.free_rank));
    AbelianGroup::new(0, f)
}

// ---------------------------------------------------------------------------
// Surjection counts through the subgroup lattice of B

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SurTable {
    /// Per subgroup H ≤ B: Möbius value μ̂(H, B).
    mobius: Vec<i64>,
    /// Per subgroup: (element order, count) histogram.
    order_hist: Vec<Vec<(u64, u64)>>,
}

type TableSlot = Arc<OnceLock<Arc<SurTable>>>;

fn sur_tables() -> &'static Mutex<HashMap<Vec<u64>, TableSlot>> {
    static TABLES: OnceLock<Mutex<HashMap<Vec<u64>, TableSlot>>> = OnceLock::new();
    TABLES.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cache_dir() -> Option<PathBuf> {
    std::env::var_os("COKERWALK_CACHE_DIR").map(PathBuf::from)
}

/// Compute-once table for B; the slot is filled outside the map lock so
/// different B do not serialize, and a given B is built at most once.
fn sur_table(factors: &[u64]) -> Result<Arc<SurTable>> {
    let slot = {
        let mut map = sur_tables().lock().unwrap_or_else(|e| e.into_inner());
        map.entry(factors.to_vec()).or_default().clone()
    };
    if let Some(t) = slot.get() {
        return Ok(t.clone());
    }
    let built = load_or_build_table(factors)?;
    Ok(slot.get_or_init(|| built).clone())
}

fn load_or_build_table(factors: &[u64]) -> Result<Arc<SurTable>> {
    let key: Vec<String> = factors.iter().map(|d| d.to_string()).collect();
    let path = cache_dir().map(|d| {
        d.join(format!(
            "sur-table-{}.json",
            if key.is_empty() { "1".into() } else { key.join("x") }
        ))
    });
    if let Some(p) = &path {
        if let Ok(text) = std::fs::read_to_string(p) {
            if let Ok(t) = serde_json::from_str::<SurTable>(&text) {
                return Ok(Arc::new(t));
            }
        }
    }
    let order: u128 = factors.iter().map(|&d| d as u128).product();
    if order > DEFAULT_LATTICE_CAP as u128 {
        return Err(Error::CapExceeded {
            what: "subgroup lattice",
            size: order,
            cap: DEFAULT_LATTICE_CAP as u128,
        });
    }
    let g = abelian_group_from_factors(factors);
    let lat = subgroup_lattice_capped(&g, DEFAULT_LATTICE_CAP)?;
    let mobius = lat.mobius_to_top();
    let order_hist = lat
        .subgroups()
        .iter()
        .map(|h| {
            let mut hist: HashMap<u64, u64> = HashMap::new();
            for &x in h.elements() {
                *hist.entry(g.element_order(x) as u64).or_default() += 1;
            }
            let mut v: Vec<(u64, u64)> = hist.into_iter().collect();
            v.sort_unstable();
            v
        })
        .collect();
    let t = SurTable { mobius, order_hist };
    if let Some(p) = &path {
        if let Ok(s) = serde_json::to_string(&t) {
            let _ = std::fs::create_dir_all(p.parent().unwrap());
            let _ = std::fs::write(p, s);
        }
    }
    Ok(Arc::new(t))
}

/// #Hom(A, H) for H given by its element-order histogram.
fn hom_count_into(a: &AbelianGroup, hist: &[(u64, u64)]) -> BigUint {
    let h_order: u64 = hist.iter().map(|&(_, c)| c).sum();
    let mut total = BigUint::from(h_order).pow(a.free_rank as u32);
    for d in &a.invariant_factors {
        let killed: u64 = hist
            .iter()
            .filter(|&&(o, _)| (d % BigUint::from(o)).is_zero())
            .map(|&(_, c)| c)
            .sum();
        total *= killed;
    }
    total
}

/// #Sur(A, B) = Σ_{H ≤ B} μ̂(H, B) #Hom(A, H).
pub fn sur_count(a: &AbelianGroup, b: &AbelianGroup) -> Result<BigUint> {
    if !b.is_finite() {
        return Err(Error::BInfinite);
    }
    let factors = b.factors_u64().ok_or(Error::CapExceeded {
        what: "subgroup lattice",
        size: u128::MAX,
        cap: DEFAULT_LATTICE_CAP as u128,
    })?;
    let table = sur_table(&factors)?;
    let mut total = BigInt::zero();
    for (mu, hist) in table.mobius.iter().zip(&table.order_hist) {
        if *mu != 0 {
            total += BigInt::from(*mu) * BigInt::from(hom_count_into(a, hist));
        }
    }
    total
        .to_biguint()
        .ok_or_else(|| Error::InvalidArgument("negative surjection count".into()))
}

/// |Aut B| from the per-prime closed form.
pub fn aut_order(b: &AbelianGroup) -> Result<BigUint> {
    if !b.is_finite() {
        return Err(Error::BInfinite);
    }
    Ok(b.primes()?.into_iter().map(|p| b.p_part(p).aut_order()).product())
}

/// |Aut B| by enumerating endomorphisms and keeping the surjective ones.
/// Errors when #End(B) exceeds `cap`.
pub fn aut_order_exhaustive(b: &AbelianGroup, cap: u64) -> Result<u64> {
    if !b.is_finite() {
        return Err(Error::BInfinite);
    }
    let ends = hom_count(b, b)?;
    let cap_b = BigUint::from(cap);
    if ends > cap_b {
        return Err(Error::CapExceeded {
            what: "endomorphism enumeration",
            size: ends.to_u128().unwrap_or(u128::MAX),
            cap: cap as u128,
        });
    }
    let factors = b.factors_u64().expect("finite group within cap has small factors");
    Ok(count_surjections_exhaustive(&factors, 0, &factors))
}

/// Enumerates Hom(ℤ^free ⊕ ⊕ℤ/a_i, ⊕ℤ/b_j) by generator images and counts
/// surjective ones. Test oracle; exponential.
pub fn count_surjections_exhaustive(a_factors: &[u64], a_free: usize, b_factors: &[u64]) -> u64 {
    let g = abelian_group_from_factors(b_factors);
    let n = g.order();
    // admissible images for each generator of A
    let mut choices: Vec<Vec<usize>> = Vec::new();
    for &d in a_factors {
        choices.push((0..n).filter(|&x| d % g.element_order(x) as u64 == 0).collect());
    }
    for _ in 0..a_free {
        choices.push((0..n).collect());
    }
    let mut count = 0;
    let mut idx = vec![0usize; choices.len()];
    loop {
        let images: Vec<usize> = idx.iter().zip(&choices).map(|(&i, c)| c[i]).collect();
        if crate::group::generated_subgroup(&g, &images)
            .map(|h| h.is_whole())
            .unwrap_or(false)
        {
            count += 1;
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return count;
            }
            idx[k] += 1;
            if idx[k] < choices[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// λ masses

/// Products over k are truncated here; the omitted factor differs from 1 by
/// less than Σ_{k>64} 2^{−k} = 2^{−64}.
pub const PRODUCT_CUTOFF: u32 = 64;

/// Π_{k=from}^{64} (1 − p^{−k}).
pub fn euler_factor(p: u64, from: u32) -> f64 {
    (from.max(1)..=PRODUCT_CUTOFF)
        .map(|k| 1.0 - (p as f64).powi(-(k as i32)))
        .product()
}

/// ζ(k) for k ≥ 2: Σ_{n ≤ 1000} n^{−k} summed smallest-first, plus the
/// Euler–Maclaurin tail through the B₄ term,
/// N^{1−k}/(k−1) − N^{−k}/2 + k N^{−k−1}/12 − k(k+1)(k+2) N^{−k−3}/720.
/// The neglected remainder is below 1e−30 for every k ≥ 2.
pub fn zeta(k: u32) -> f64 {
    assert!(k >= 2, "zeta diverges at k = {k}");
    const N: u32 = 1000;
    let kf = k as f64;
    let ki = k as i32;
    let n = N as f64;
    let mut s = 0.0;
    for m in (1..=N).rev() {
        s += (m as f64).powi(-ki);
    }
    let tail = n.powf(1.0 - kf) / (kf - 1.0) - n.powi(-ki) / 2.0 + kf * n.powi(-ki - 1) / 12.0
        - kf * (kf + 1.0) * (kf + 2.0) * n.powi(-ki - 3) / 720.0;
    s + tail
}

fn zeta_table() -> &'static [f64] {
    static Z: OnceLock<Vec<f64>> = OnceLock::new();
    Z.get_or_init(|| {
        (0..=PRODUCT_CUTOFF)
            .map(|k| if k < 2 { f64::NAN } else { zeta(k) })
            .collect()
    })
}

/// Π_{k=from}^{64} ζ(k)^{−1}, from ≥ 2.
pub fn inverse_zeta_product(from: u32) -> f64 {
    let z = zeta_table();
    (from.max(2)..=PRODUCT_CUTOFF).map(|k| 1.0 / z[k as usize]).product()
}

/// P[A_p ≅ B] = Π_{k>u} (1 − p^{−k}) / (|B|^u |Aut B|).
pub fn lambda_p_mass(b: &PartitionType, u: u32) -> f64 {
    let lp = (b.prime as f64).ln();
    let log_mass = euler_factor(b.prime, u + 1).ln() - u as f64 * b.size() as f64 * lp - b.log_aut_order();
    log_mass.exp()
}

/// λ_u(B) = Π_{k>u} ζ(k)^{−1} / (|B|^u |Aut B|) for finite B and u ≥ 1.
pub fn lambda_u_finite_mass(b: &AbelianGroup, u: u32) -> Result<f64> {
    if u == 0 {
        return Err(Error::InvalidArgument("lambda_u_finite_mass needs u >= 1".into()));
    }
    if !b.is_finite() {
        return Err(Error::BInfinite);
    }
    let mut log_denom = 0.0;
    for p in b.primes()? {
        let part = b.p_part(p);
        log_denom += u as f64 * part.size() as f64 * (p as f64).ln() + part.log_aut_order();
    }
    Ok(inverse_zeta_product(u + 1) * (-log_denom).exp())
}

/// Value and certified truncation error of λ_u(U_{a,H}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TensorMass {
    pub value: f64,
    pub error_bound: f64,
}

/// Absolute slack added for floating-point summation.
const SUM_SLACK: f64 = 1e-13;

/// λ_u(U_{a,H}) = Π_{p | a} Σ_{B_p ⊗ ℤ/p^{v_p(a)} ≅ H_p} λ_p(B_p).
///
/// B ⊗ ℤ/p^v ≅ H_p exactly when the parts of B below v are the parts of H_p
/// below v and B has as many parts ≥ v as H_p has parts equal to v. Partitions
/// are enumerated by increasing size. Since λ_p is a probability measure on
/// finite p-groups, everything not yet enumerated carries mass at most
/// 1 − (sum of all enumerated masses); enumeration stops once that remainder
/// is below tol / #primes. Each per-prime factor lies in [0, 1], so the
/// product's error is at most the sum of the per-prime errors.
pub fn lambda_u_tensor_mass_certified(a: u64, h: &AbelianGroup, u: u32, tol: f64) -> Result<TensorMass> {
    if a == 0 {
        return Err(Error::InvalidArgument("modulus must be positive".into()));
    }
    if tol.is_nan() || tol <= 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "tolerance {tol} is below certifiable precision"
        )));
    }
    let exp = h.exponent_u64().ok_or(Error::ExponentMismatch {
        exponent: 0,
        modulus: a,
    })?;
    if !a.is_multiple_of(exp) {
        return Err(Error::ExponentMismatch {
            exponent: exp,
            modulus: a,
        });
    }
    let primes = prime_factors(a);
    let tol_p = tol / primes.len().max(1) as f64;
    let mut value = 1.0;
    let mut err = 0.0;
    for &p in &primes {
        let mut v = 0u32;
        let mut m = a;
        while m.is_multiple_of(p) {
            m /= p;
            v += 1;
        }
        let hp = h.p_part(p);
        let small: Vec<u32> = hp.parts.iter().copied().filter(|&x| x < v).collect();
        let big = hp.parts.iter().filter(|&&x| x == v).count();
        let mut seen = 0.0;
        let mut target = 0.0;
        let mut size = 0u32;
        loop {
            for lam in partitions(size) {
                let mass = lambda_p_mass(
                    &PartitionType {
                        prime: p,
                        parts: lam.clone(),
                    },
                    u,
                );
                seen += mass;
                let lam_small: Vec<u32> = lam.iter().copied().filter(|&x| x < v).collect();
                let lam_big = lam.len() - lam_small.len();
                if lam_small == small && lam_big == big {
                    target += mass;
                }
            }
            let remainder = (1.0 - seen).max(0.0);
            if remainder < tol_p {
                value *= target;
                err += remainder + SUM_SLACK;
                break;
            }
            size += 1;
            if size > 80 {
                return Err(Error::CapExceeded {
                    what: "partition enumeration",
                    size: size as u128,
                    cap: 80,
                });
            }
        }
    }
    Ok(TensorMass {
        value,
        error_bound: err,
    })
}

pub fn lambda_u_tensor_mass(a: u64, h: &AbelianGroup, u: u32, tol: f64) -> Result<f64> {
    Ok(lambda_u_tensor_mass_certified(a, h, u, tol)?.value)
}

/// All groups H with exponent dividing a and at most `max_rank` cyclic
/// factors per prime.
pub fn groups_of_exponent_dividing(a: u64, max_rank: usize) -> Vec<AbelianGroup> {
    let mut out = vec![AbelianGroup::trivial()];
    let mut m = a;
    for p in prime_factors(a) {
        let mut v = 0;
        while m.is_multiple_of(p) {
            m /= p;
            v += 1;
        }
        // weakly increasing exponent lists in 1..=v with at most max_rank entries
        let mut per_prime: Vec<Vec<u32>> = vec![vec![]];
        let mut frontier: Vec<Vec<u32>> = vec![vec![]];
        for _ in 0..max_rank {
            frontier = frontier
                .iter()
                .flat_map(|s| {
                    let lo = s.last().copied().unwrap_or(1);
                    (lo..=v).map(move |e| {
                        let mut t = s.clone();
                        t.push(e);
                        t
                    })
                })
                .collect();
            per_prime.extend(frontier.iter().cloned());
        }
        let mut next = Vec::new();
        for g in &out {
            for s in &per_prime {
                next.push(g.direct_sum(&PartitionType::from_parts_unchecked(p, s.clone()).to_group()));
            }
        }
        out = next;
    }
    out.sort();
    out.dedup();
    out
}
