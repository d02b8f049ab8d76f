//! Finite groups as validated Cayley tables, with subgroups, quotients and
//! cosets.
//!
//! Element 0 is always the identity. Every constructor relabels to keep that
//! convention.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default order cap for subgroup enumeration.
pub const DEFAULT_LATTICE_CAP: usize = 256;

pub type GroupRef = Arc<FiniteGroup>;

/// A finite group stored as a row-major Cayley table.
#[derive(Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    order: usize,
    table: Vec<usize>,
    inverse: Vec<usize>,
    labels: Option<Vec<String>>,
}

impl fmt::Debug for FiniteGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteGroup")
            .field("order", &self.order)
            .field("abelian", &self.is_abelian())
            .finish()
    }
}

/// Serialized form: `{order, table, labels}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupJson {
    pub order: usize,
    pub table: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl FiniteGroup {
    /// Validates a Cayley table and relabels so that the identity is index 0.
    pub fn from_cayley_table(table: Vec<Vec<usize>>, labels: Option<Vec<String>>) -> Result<GroupRef> {
        let n = table.len();
        if n == 0 {
            return Err(Error::InvalidTable("empty table".into()));
        }
        for (i, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidTable(format!(
                    "row {i} has length {} (expected {n})",
                    row.len()
                )));
            }
            if let Some(&bad) = row.iter().find(|&&x| x >= n) {
                return Err(Error::InvalidTable(format!(
                    "row {i} contains out-of-range entry {bad}"
                )));
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::InvalidTable(format!("{} labels for {n} elements", l.len())));
            }
        }
        let flat: Vec<usize> = table.into_iter().flatten().collect();
        Self::from_flat(n, flat, labels).map(Arc::new)
    }

    pub(crate) fn from_flat(n: usize, flat: Vec<usize>, labels: Option<Vec<String>>) -> Result<FiniteGroup> {
        check_latin(n, &flat)?;
        let e = (0..n)
            .find(|&e| (0..n).all(|x| flat[e * n + x] == x && flat[x * n + e] == x))
            .ok_or(Error::NoIdentity)?;
        check_associative(n, &flat)?;

        // Relabel so the identity sits at index 0 (swap e and 0).
        let (flat, labels) = if e == 0 {
            (flat, labels)
        } else {
            let perm = |x: usize| {
                if x == e {
                    0
                } else if x == 0 {
                    e
                } else {
                    x
                }
            };
            let mut t = vec![0; n * n];
            for a in 0..n {
                for b in 0..n {
                    t[perm(a) * n + perm(b)] = perm(flat[a * n + b]);
                }
            }
            let labels = labels.map(|mut l| {
                l.swap(0, e);
                l
            });
            (t, labels)
        };
        let mut inverse = vec![0; n];
        for g in 0..n {
            inverse[g] = (0..n)
                .find(|&h| flat[g * n + h] == 0)
                .expect("latin square has an inverse");
        }
        Ok(FiniteGroup {
            order: n,
            table: flat,
            inverse,
            labels,
        })
    }

    /// Builds a group whose multiplication is already known to satisfy the axioms
    /// with identity at 0. Used by constructors that derive tables from formulas.
    fn trusted(n: usize, flat: Vec<usize>, labels: Option<Vec<String>>) -> FiniteGroup {
        debug_assert!((0..n).all(|x| flat[x] == x && flat[x * n] == x));
        let mut inverse = vec![0; n];
        for g in 0..n {
            let row = &flat[g * n..(g + 1) * n];
            inverse[g] = row.iter().position(|&x| x == 0).expect("group row contains identity");
        }
        FiniteGroup {
            order: n,
            table: flat,
            inverse,
            labels,
        }
    }

    pub fn from_json(json: &GroupJson) -> Result<GroupRef> {
        if json.table.len() != json.order {
            return Err(Error::InvalidTable(format!(
                "declared order {} but table has {} rows",
                json.order,
                json.table.len()
            )));
        }
        Self::from_cayley_table(json.table.clone(), json.labels.clone())
    }

    pub fn to_json(&self) -> GroupJson {
        GroupJson {
            order: self.order,
            table: (0..self.order)
                .map(|g| self.table[g * self.order..(g + 1) * self.order].to_vec())
                .collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        0
    }

    #[inline]
    pub fn mul(&self, g: usize, h: usize) -> usize {
        self.table[g * self.order + h]
    }

    #[inline]
    pub fn inv(&self, g: usize) -> usize {
        self.inverse[g]
    }

    pub fn inverses(&self) -> &[usize] {
        &self.inverse
    }

    pub fn table_row(&self, g: usize) -> &[usize] {
        &self.table[g * self.order..(g + 1) * self.order]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, g: usize) -> String {
        match &self.labels {
            Some(l) => l[g].clone(),
            None => g.to_string(),
        }
    }

    /// Index of the element with the given label.
    pub fn element_by_label(&self, label: &str) -> Option<usize> {
        self.labels.as_ref()?.iter().position(|l| l == label)
    }

    pub fn is_abelian(&self) -> bool {
        (0..self.order).all(|a| (a + 1..self.order).all(|b| self.mul(a, b) == self.mul(b, a)))
    }

    pub fn element_order(&self, g: usize) -> usize {
        let mut x = g;
        let mut k = 1;
        while x != 0 {
            x = self.mul(x, g);
            k += 1;
        }
        k
    }

    pub fn exponent(&self) -> usize {
        (0..self.order).map(|g| self.element_order(g)).fold(1, num_integer::lcm)
    }

    /// g h g⁻¹
    pub fn conjugate(&self, g: usize, h: usize) -> usize {
        self.mul(self.mul(g, h), self.inv(g))
    }

    pub fn check_element(&self, g: usize) -> Result<()> {
        if g < self.order {
            Ok(())
        } else {
            Err(Error::InvalidElement(g))
        }
    }

    /// Re-runs the full axiom check (Latin square, identity at 0, associativity).
    pub fn validate(&self) -> Result<()> {
        let n = self.order;
        check_latin(n, &self.table)?;
        if !(0..n).all(|x| self.mul(0, x) == x && self.mul(x, 0) == x) {
            return Err(Error::NoIdentity);
        }
        check_associative(n, &self.table)?;
        for g in 0..n {
            if self.mul(g, self.inv(g)) != 0 {
                return Err(Error::InvalidTable(format!("inverse of {g} is wrong")));
            }
        }
        Ok(())
    }
}

fn check_latin(n: usize, flat: &[usize]) -> Result<()> {
    let mut seen = vec![usize::MAX; n];
    for r in 0..n {
        for c in 0..n {
            let x = flat[r * n + c];
            if seen[x] == r {
                return Err(Error::NotLatinSquare {
                    kind: "row",
                    index: r,
                    element: x,
                });
            }
            seen[x] = r;
        }
    }
    seen.fill(usize::MAX);
    for c in 0..n {
        for r in 0..n {
            let x = flat[r * n + c];
            if seen[x] == c {
                return Err(Error::NotLatinSquare {
                    kind: "column",
                    index: c,
                    element: x,
                });
            }
            seen[x] = c;
        }
    }
    Ok(())
}

fn check_associative(n: usize, flat: &[usize]) -> Result<()> {
    for a in 0..n {
        for b in 0..n {
            let ab = flat[a * n + b];
            for c in 0..n {
                if flat[ab * n + c] != flat[a * n + flat[b * n + c]] {
                    return Err(Error::NotAssociative { a, b, c });
                }
            }
        }
    }
    Ok(())
}

pub fn same_group(a: &FiniteGroup, b: &FiniteGroup) -> bool {
    std::ptr::eq(a, b) || (a.order == b.order && a.table == b.table)
}

// ---------------------------------------------------------------------------
// Constructors

pub fn trivial_group() -> GroupRef {
    cyclic_group(1)
}

/// ℤ/n with element k ↦ k.
pub fn cyclic_group(n: usize) -> GroupRef {
    assert!(n >= 1, "cyclic group order must be positive");
    let flat = (0..n * n).map(|i| (i / n + i % n) % n).collect();
    Arc::new(FiniteGroup::trusted(n, flat, None))
}

/// G × H with element index g·|H| + h.
pub fn direct_product(g: &FiniteGroup, h: &FiniteGroup) -> GroupRef {
    let (m, k) = (g.order, h.order);
    let n = m * k;
    let mut flat = vec![0; n * n];
    for x in 0..n {
        let (x1, x2) = (x / k, x % k);
        for y in 0..n {
            let (y1, y2) = (y / k, y % k);
            flat[x * n + y] = g.mul(x1, y1) * k + h.mul(x2, y2);
        }
    }
    let labels = match (&g.labels, &h.labels) {
        (None, None) => None,
        _ => Some(
            (0..n)
                .map(|x| format!("({},{})", g.label(x / k), h.label(x % k)))
                .collect(),
        ),
    };
    Arc::new(FiniteGroup::trusted(n, flat, labels))
}

/// ℤ/d₁ × ℤ/d₂ × … with mixed-radix indexing (first factor most significant).
pub fn abelian_group_from_factors(factors: &[u64]) -> GroupRef {
    let mut g = trivial_group();
    for &d in factors {
        g = direct_product(&g, &cyclic_group(d as usize));
    }
    g
}

/// D_{2n}: element r^k s^f has index f·n + k, so r = 1 and s = n.
pub fn dihedral_group(n: usize) -> GroupRef {
    assert!(n >= 3, "dihedral group needs n >= 3");
    let size = 2 * n;
    let mut flat = vec![0; size * size];
    for x in 0..size {
        let (f, a) = (x / n, x % n);
        for y in 0..size {
            let (g, b) = (y / n, y % n);
            // r^a s^f r^b s^g = r^{a ± b} s^{f+g}
            let k = if f == 0 { (a + b) % n } else { (a + n - b) % n };
            flat[x * size + y] = ((f + g) % 2) * n + k;
        }
    }
    let labels = (0..size)
        .map(|x| {
            let (f, k) = (x / n, x % n);
            let r = match k {
                0 => String::new(),
                1 => "r".to_string(),
                _ => format!("r^{k}"),
            };
            match (f, r.is_empty()) {
                (0, true) => "e".to_string(),
                (0, false) => r,
                (_, true) => "s".to_string(),
                (_, false) => format!("{r} s"),
            }
        })
        .collect();
    Arc::new(FiniteGroup::trusted(size, flat, Some(labels)))
}

/// Quaternion group Q₈ with elements 1, −1, i, −i, j, −j, k, −k (in that order).
pub fn quaternion_group() -> GroupRef {
    // unit u ∈ {1,i,j,k} as 0..4, sign bit s; index = 2u + s.
    // u·v = sign · w for the standard quaternion rules.
    fn unit_mul(u: usize, v: usize) -> (usize, usize) {
        match (u, v) {
            (0, v) => (v, 0),
            (u, 0) => (u, 0),
            (u, v) if u == v => (0, 1),
            (1, 2) => (3, 0),
            (2, 3) => (1, 0),
            (3, 1) => (2, 0),
            (2, 1) => (3, 1),
            (3, 2) => (1, 1),
            (1, 3) => (2, 1),
            _ => unreachable!(),
        }
    }
    let mut flat = vec![0; 64];
    for x in 0..8 {
        for y in 0..8 {
            let (w, s) = unit_mul(x / 2, y / 2);
            flat[x * 8 + y] = 2 * w + ((s + x % 2 + y % 2) % 2);
        }
    }
    let names = ["1", "-1", "i", "-i", "j", "-j", "k", "-k"];
    Arc::new(FiniteGroup::trusted(
        8,
        flat,
        Some(names.iter().map(|s| s.to_string()).collect()),
    ))
}

// ---------------------------------------------------------------------------
// Permutation groups

/// A group of permutations of {1..degree} together with its Cayley table.
///
/// Products compose as functions: `(σ·τ)(x) = σ(τ(x))`, so in a product
/// X₁X₂X₃ the rightmost factor acts on a point first.
#[derive(Debug, Clone)]
pub struct PermutationGroup {
    group: GroupRef,
    degree: usize,
    perms: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

impl PermutationGroup {
    /// Closure of the given generators (0-based image arrays).
    pub fn generated_by(degree: usize, generators: &[Vec<u8>]) -> Result<PermutationGroup> {
        let id: Vec<u8> = (0..degree as u8).collect();
        for g in generators {
            let mut sorted = g.clone();
            sorted.sort_unstable();
            if g.len() != degree || sorted != id {
                return Err(Error::InvalidArgument(format!(
                    "{g:?} is not a permutation of degree {degree}"
                )));
            }
        }
        let mut seen: HashSet<Vec<u8>> = HashSet::from([id.clone()]);
        let mut queue = VecDeque::from([id]);
        while let Some(p) = queue.pop_front() {
            for g in generators {
                let q = compose(&p, g);
                if seen.insert(q.clone()) {
                    queue.push_back(q);
                    if seen.len() > 1 << 16 {
                        return Err(Error::CapExceeded {
                            what: "permutation group",
                            size: seen.len() as u128,
                            cap: 1 << 16,
                        });
                    }
                }
            }
        }
        let mut perms: Vec<Vec<u8>> = seen.into_iter().collect();
        // identity is lexicographically smallest, so it lands at index 0
        perms.sort();
        let index: HashMap<Vec<u8>, usize> = perms.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let n = perms.len();
        let mut flat = vec![0; n * n];
        for a in 0..n {
            for b in 0..n {
                flat[a * n + b] = index[&compose(&perms[a], &perms[b])];
            }
        }
        let labels = perms.iter().map(|p| cycle_notation(p)).collect();
        let group = Arc::new(FiniteGroup::trusted(n, flat, Some(labels)));
        Ok(PermutationGroup {
            group,
            degree,
            perms,
            index,
        })
    }

    pub fn group(&self) -> &GroupRef {
        &self.group
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Image of point `x` (1-based) under element `g`.
    pub fn act(&self, g: usize, x: usize) -> usize {
        self.perms[g][x - 1] as usize + 1
    }

    /// 0-based image array of element `g`.
    pub fn permutation(&self, g: usize) -> &[u8] {
        &self.perms[g]
    }

    /// Element given as a product of 1-based cycles, e.g. `&[&[1, 2, 3]]`.
    pub fn element_from_cycles(&self, cycles: &[&[usize]]) -> Option<usize> {
        let p = perm_from_cycles(self.degree, cycles)?;
        self.index.get(&p).copied()
    }
}

/// (p∘q)(x) = p(q(x))
fn compose(p: &[u8], q: &[u8]) -> Vec<u8> {
    q.iter().map(|&x| p[x as usize]).collect()
}

fn perm_from_cycles(degree: usize, cycles: &[&[usize]]) -> Option<Vec<u8>> {
    let mut p: Vec<u8> = (0..degree as u8).collect();
    // apply cycles right to left, matching functional composition
    for cyc in cycles.iter().rev() {
        if cyc.iter().any(|&x| x == 0 || x > degree) {
            return None;
        }
        let mut c: Vec<u8> = (0..degree as u8).collect();
        for i in 0..cyc.len() {
            c[cyc[i] - 1] = (cyc[(i + 1) % cyc.len()] - 1) as u8;
        }
        p = compose(&c, &p);
    }
    Some(p)
}

fn cycle_notation(p: &[u8]) -> String {
    let mut seen = vec![false; p.len()];
    let mut out = String::new();
    for start in 0..p.len() {
        if seen[start] || p[start] as usize == start {
            continue;
        }
        let mut cyc = vec![start + 1];
        seen[start] = true;
        let mut x = p[start] as usize;
        while x != start {
            seen[x] = true;
            cyc.push(x + 1);
            x = p[x] as usize;
        }
        out.push('(');
        out.push_str(&cyc.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "));
        out.push(')');
    }
    if out.is_empty() {
        "()".into()
    } else {
        out
    }
}

pub fn symmetric_group(degree: usize) -> PermutationGroup {
    assert!(degree >= 1);
    let mut gens = Vec::new();
    if degree >= 2 {
        let mut t: Vec<u8> = (0..degree as u8).collect();
        t.swap(0, 1);
        gens.push(t);
        gens.push((0..degree as u8).map(|x| (x + 1) % degree as u8).collect());
    }
    PermutationGroup::generated_by(degree, &gens).expect("valid generators")
}

pub fn alternating_group(degree: usize) -> PermutationGroup {
    assert!(degree >= 1);
    // 3-cycles (1 2 k) generate A_n
    let gens: Vec<Vec<u8>> = (3..=degree)
        .map(|k| perm_from_cycles(degree, &[&[1, 2, k]]).expect("valid cycle"))
        .collect();
    PermutationGroup::generated_by(degree, &gens).expect("valid generators")
}

pub fn alternating_group_5() -> PermutationGroup {
    alternating_group(5)
}

// ---------------------------------------------------------------------------
// Subgroups

/// A subgroup, stored as a sorted element list plus a membership bitset.
#[derive(Clone)]
pub struct Subgroup {
    parent: GroupRef,
    elements: Vec<usize>,
    bits: Vec<u64>,
}

impl fmt::Debug for Subgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Subgroup{:?}", self.elements)
    }
}

impl PartialEq for Subgroup {
    fn eq(&self, other: &Self) -> bool {
        self.elements == other.elements && same_group(&self.parent, &other.parent)
    }
}

impl Eq for Subgroup {}

fn bitset(n: usize, elements: &[usize]) -> Vec<u64> {
    let mut bits = vec![0u64; n.div_ceil(64)];
    for &x in elements {
        bits[x / 64] |= 1 << (x % 64);
    }
    bits
}

impl Subgroup {
    /// Wraps an element set after checking closure.
    pub fn new(parent: &GroupRef, mut elements: Vec<usize>) -> Result<Subgroup> {
        elements.sort_unstable();
        elements.dedup();
        for &x in &elements {
            parent.check_element(x)?;
        }
        let s = Self::from_sorted(parent, elements);
        if !s.contains(0) {
            return Err(Error::InvalidArgument("subgroup must contain the identity".into()));
        }
        for &a in &s.elements {
            if !s.contains(parent.inv(a)) {
                return Err(Error::InvalidArgument(
                    "element set is not closed under inverses".into(),
                ));
            }
            for &b in &s.elements {
                if !s.contains(parent.mul(a, b)) {
                    return Err(Error::InvalidArgument(
                        "element set is not closed under multiplication".into(),
                    ));
                }
            }
        }
        Ok(s)
    }

    fn from_sorted(parent: &GroupRef, elements: Vec<usize>) -> Subgroup {
        let bits = bitset(parent.order(), &elements);
        Subgroup {
            parent: parent.clone(),
            elements,
            bits,
        }
    }

    pub fn whole(parent: &GroupRef) -> Subgroup {
        Self::from_sorted(parent, (0..parent.order()).collect())
    }

    pub fn trivial(parent: &GroupRef) -> Subgroup {
        Self::from_sorted(parent, vec![0])
    }

    pub fn parent(&self) -> &GroupRef {
        &self.parent
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn index(&self) -> usize {
        self.parent.order() / self.order()
    }

    #[inline]
    pub fn contains(&self, g: usize) -> bool {
        g < self.parent.order() && self.bits[g / 64] >> (g % 64) & 1 == 1
    }

    pub fn is_subgroup_of(&self, other: &Subgroup) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    pub fn is_trivial(&self) -> bool {
        self.elements.len() == 1
    }

    pub fn is_whole(&self) -> bool {
        self.elements.len() == self.parent.order()
    }

    pub fn intersection(&self, other: &Subgroup) -> Subgroup {
        let elements = self.elements.iter().copied().filter(|&x| other.contains(x)).collect();
        Self::from_sorted(&self.parent, elements)
    }

    /// Builds this subgroup as a standalone group together with the inclusion
    /// map (local index ↦ parent index, local index order = sorted elements).
    pub fn as_group(&self) -> (GroupRef, Vec<usize>) {
        let m = self.order();
        let local: HashMap<usize, usize> = self.elements.iter().enumerate().map(|(i, &g)| (g, i)).collect();
        let mut flat = vec![0; m * m];
        for i in 0..m {
            for j in 0..m {
                flat[i * m + j] = local[&self.parent.mul(self.elements[i], self.elements[j])];
            }
        }
        let labels = self
            .parent
            .labels
            .as_ref()
            .map(|l| self.elements.iter().map(|&g| l[g].clone()).collect());
        (Arc::new(FiniteGroup::trusted(m, flat, labels)), self.elements.clone())
    }
}

/// Smallest subgroup containing `gens`, by breadth-first closure.
pub fn generated_subgroup(g: &GroupRef, gens: &[usize]) -> Result<Subgroup> {
    for &x in gens {
        g.check_element(x)?;
    }
    Ok(closure(g, gens))
}

fn closure(g: &GroupRef, gens: &[usize]) -> Subgroup {
    let n = g.order();
    let gens: Vec<usize> = gens.iter().copied().filter(|&x| x != 0).collect();
    let mut mark = vec![false; n];
    mark[0] = true;
    let mut out = vec![0];
    let mut i = 0;
    while i < out.len() {
        let x = out[i];
        for &s in &gens {
            let y = g.mul(x, s);
            if !mark[y] {
                mark[y] = true;
                out.push(y);
            }
        }
        i += 1;
    }
    out.sort_unstable();
    Subgroup::from_sorted(g, out)
}

/// All subgroups of a group with inclusion relation.
#[derive(Debug, Clone)]
pub struct SubgroupLattice {
    group: GroupRef,
    subgroups: Vec<Subgroup>,
}

impl SubgroupLattice {
    pub fn group(&self) -> &GroupRef {
        &self.group
    }

    /// Subgroups sorted by order, then by element list. Index 0 is trivial and
    /// the last entry is the whole group.
    pub fn subgroups(&self) -> &[Subgroup] {
        &self.subgroups
    }

    pub fn len(&self) -> usize {
        self.subgroups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subgroups.is_empty()
    }

    pub fn position(&self, h: &Subgroup) -> Option<usize> {
        self.subgroups.iter().position(|s| s.elements == h.elements)
    }

    /// Whether subgroup `i` is contained in subgroup `j`.
    pub fn includes(&self, i: usize, j: usize) -> bool {
        self.subgroups[i].is_subgroup_of(&self.subgroups[j])
    }

    /// Proper subgroups contained in no other proper subgroup.
    pub fn maximal_subgroups(&self) -> Vec<&Subgroup> {
        let top = self.subgroups.len() - 1;
        (0..top)
            .filter(|&i| (0..top).all(|j| j == i || !self.includes(i, j)))
            .map(|i| &self.subgroups[i])
            .collect()
    }

    pub fn count_of_index(&self, index: usize) -> usize {
        self.subgroups.iter().filter(|s| s.index() == index).count()
    }

    /// Möbius function μ(H, G) of the lattice against the top element, for every H.
    pub fn mobius_to_top(&self) -> Vec<i64> {
        let k = self.subgroups.len();
        let mut mu = vec![0i64; k];
        mu[k - 1] = 1;
        for i in (0..k - 1).rev() {
            let s: i64 = (i + 1..k)
                .filter(|&j| mu[j] != 0 && self.includes(i, j))
                .map(|j| mu[j])
                .sum();
            mu[i] = -s;
        }
        mu
    }
}

/// Enumerates all subgroups with the default order cap.
pub fn subgroup_lattice(g: &GroupRef) -> Result<SubgroupLattice> {
    subgroup_lattice_capped(g, DEFAULT_LATTICE_CAP)
}

/// Cyclic-extension closure: repeatedly adjoin one element to every known
/// subgroup until no new subgroup appears.
pub fn subgroup_lattice_capped(g: &GroupRef, cap: usize) -> Result<SubgroupLattice> {
    let n = g.order();
    if n > cap {
        return Err(Error::CapExceeded {
            what: "group order for subgroup enumeration",
            size: n as u128,
            cap: cap as u128,
        });
    }
    // Generators of each known subgroup, kept small to make closure cheap.
    let trivial = Subgroup::trivial(g);
    let mut known: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut subs: Vec<(Subgroup, Vec<usize>)> = Vec::new();
    known.insert(trivial.bits.clone(), 0);
    subs.push((trivial, Vec::new()));
    // cyclic subgroups, used to skip redundant extensions
    let cyclic: Vec<Subgroup> = (0..n).map(|x| closure(g, &[x])).collect();
    let mut next = 0;
    while next < subs.len() {
        let (s, gens) = subs[next].clone();
        next += 1;
        let mut tried: HashSet<usize> = HashSet::new();
        for x in 0..n {
            if s.contains(x) {
                continue;
            }
            // ⟨s, x⟩ depends only on ⟨x⟩; pick one representative per cyclic subgroup
            let cx = &cyclic[x];
            let rep = cx
                .elements
                .iter()
                .copied()
                .find(|&y| cyclic[y].bits == cx.bits)
                .unwrap_or(x);
            if !tried.insert(rep) {
                continue;
            }
            let mut ng = gens.clone();
            ng.push(x);
            let t = closure(g, &ng);
            if !known.contains_key(&t.bits) {
                known.insert(t.bits.clone(), subs.len());
                subs.push((t, ng));
            }
        }
    }
    let mut subgroups: Vec<Subgroup> = subs.into_iter().map(|(s, _)| s).collect();
    subgroups.sort_by(|a, b| a.order().cmp(&b.order()).then_with(|| a.elements.cmp(&b.elements)));
    Ok(SubgroupLattice {
        group: g.clone(),
        subgroups,
    })
}

pub fn is_normal(g: &GroupRef, h: &Subgroup) -> bool {
    (0..g.order()).all(|x| h.elements.iter().all(|&y| h.contains(g.conjugate(x, y))))
}

/// Left cosets gH, each sorted, ordered by their least element.
pub fn left_cosets(g: &GroupRef, h: &Subgroup) -> Vec<Vec<usize>> {
    let n = g.order();
    let mut assigned = vec![false; n];
    let mut out = Vec::new();
    for x in 0..n {
        if assigned[x] {
            continue;
        }
        let mut coset: Vec<usize> = h.elements.iter().map(|&y| g.mul(x, y)).collect();
        coset.sort_unstable();
        for &y in &coset {
            assigned[y] = true;
        }
        out.push(coset);
    }
    out
}

/// Coset index of every element: `coset_of[g]` is the position of gH in
/// [`left_cosets`].
pub fn left_coset_map(g: &GroupRef, h: &Subgroup) -> Vec<usize> {
    let mut map = vec![0; g.order()];
    for (i, c) in left_cosets(g, h).iter().enumerate() {
        for &x in c {
            map[x] = i;
        }
    }
    map
}

/// G/N on cosets indexed by increasing least representative, with the
/// canonical surjection.
pub fn quotient(g: &GroupRef, n: &Subgroup) -> Result<(GroupRef, Homomorphism)> {
    if !same_group(g, &n.parent) {
        return Err(Error::GroupMismatch);
    }
    if !is_normal(g, n) {
        return Err(Error::NotNormal);
    }
    let cosets = left_cosets(g, n);
    let map = left_coset_map(g, n);
    let reps: Vec<usize> = cosets.iter().map(|c| c[0]).collect();
    let m = reps.len();
    let mut flat = vec![0; m * m];
    for i in 0..m {
        for j in 0..m {
            flat[i * m + j] = map[g.mul(reps[i], reps[j])];
        }
    }
    let labels = g
        .labels
        .as_ref()
        .map(|l| reps.iter().map(|&r| format!("[{}]", l[r])).collect());
    let q = Arc::new(FiniteGroup::trusted(m, flat, labels));
    let hom = Homomorphism {
        source: g.clone(),
        target: q.clone(),
        map,
    };
    Ok((q, hom))
}

// ---------------------------------------------------------------------------
// Homomorphisms

#[derive(Debug, Clone)]
pub struct Homomorphism {
    source: GroupRef,
    target: GroupRef,
    map: Vec<usize>,
}

impl Homomorphism {
    pub fn new(source: &GroupRef, target: &GroupRef, map: Vec<usize>) -> Result<Homomorphism> {
        if map.len() != source.order() {
            return Err(Error::NotHomomorphism(format!(
                "map has {} entries for a source of order {}",
                map.len(),
                source.order()
            )));
        }
        for &t in &map {
            target.check_element(t)?;
        }
        if map[0] != 0 {
            return Err(Error::NotHomomorphism("identity is not sent to identity".into()));
        }
        for a in 0..source.order() {
            for b in 0..source.order() {
                if map[source.mul(a, b)] != target.mul(map[a], map[b]) {
                    return Err(Error::NotHomomorphism(format!("fails on pair ({a}, {b})")));
                }
            }
        }
        Ok(Homomorphism {
            source: source.clone(),
            target: target.clone(),
            map,
        })
    }

    pub fn identity(g: &GroupRef) -> Homomorphism {
        Homomorphism {
            source: g.clone(),
            target: g.clone(),
            map: (0..g.order()).collect(),
        }
    }

    pub fn source(&self) -> &GroupRef {
        &self.source
    }

    pub fn target(&self) -> &GroupRef {
        &self.target
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    #[inline]
    pub fn apply(&self, g: usize) -> usize {
        self.map[g]
    }

    pub fn is_surjective(&self) -> bool {
        let mut hit = vec![false; self.target.order()];
        for &t in &self.map {
            hit[t] = true;
        }
        hit.into_iter().all(|b| b)
    }

    pub fn kernel(&self) -> Subgroup {
        let elements = (0..self.source.order()).filter(|&g| self.map[g] == 0).collect();
        Subgroup::from_sorted(&self.source, elements)
    }

    pub fn image(&self) -> Subgroup {
        let mut e = self.map.clone();
        e.sort_unstable();
        e.dedup();
        Subgroup::from_sorted(&self.target, e)
    }

    /// Image of a subgroup of the source, as a subgroup of the target.
    pub fn image_of(&self, h: &Subgroup) -> Subgroup {
        let mut e: Vec<usize> = h.elements.iter().map(|&x| self.map[x]).collect();
        e.sort_unstable();
        e.dedup();
        Subgroup::from_sorted(&self.target, e)
    }

    /// `next ∘ self`
    pub fn then(&self, next: &Homomorphism) -> Result<Homomorphism> {
        if !same_group(&self.target, &next.source) {
            return Err(Error::GroupMismatch);
        }
        Ok(Homomorphism {
            source: self.source.clone(),
            target: next.target.clone(),
            map: self.map.iter().map(|&x| next.map[x]).collect(),
        })
    }
}
