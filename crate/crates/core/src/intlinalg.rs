//! Smith normal form over ℤ with accumulated unimodular transforms, and
//! cokernels over ℤ and ℤ/aℤ.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::abelian::AbelianGroup;
use crate::error::{Error, Result};
use crate::spectral::prime_factors;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<BigInt>) -> Result<IntMatrix> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(IntMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> IntMatrix {
        IntMatrix {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> IntMatrix {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    pub fn from_diag(rows: usize, cols: usize, diag: &[BigInt]) -> IntMatrix {
        let mut m = Self::zeros(rows, cols);
        for (i, d) in diag.iter().enumerate().take(rows.min(cols)) {
            m.data[i * cols + i] = d.clone();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<IntMatrix> {
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != c) {
            return Err(Error::InvalidArgument("ragged matrix rows".into()));
        }
        Ok(IntMatrix {
            rows: rows.len(),
            cols: c,
            data: rows.iter().flatten().map(|&x| BigInt::from(x)).collect(),
        })
    }

    pub fn from_i64(rows: usize, cols: usize, data: &[i64]) -> Result<IntMatrix> {
        Self::new(rows, cols, data.iter().map(|&x| BigInt::from(x)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[BigInt] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j).clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != other.rows {
            return Err(Error::InvalidArgument(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// [self | other]
    pub fn hstack(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.rows != other.rows {
            return Err(Error::InvalidArgument("row counts differ".into()));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(IntMatrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    pub fn scaled(&self, k: &BigInt) -> IntMatrix {
        IntMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * k).collect(),
        }
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    pub fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for i in 0..self.rows {
                self.data.swap(i * self.cols + a, i * self.cols + b);
            }
        }
    }

    pub fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let x = &mut self.data[i * self.cols + j];
            *x = -std::mem::take(x);
        }
    }

    /// row_dst += k · row_src
    fn add_row_multiple(&mut self, dst: usize, src: usize, k: &BigInt) {
        for j in 0..self.cols {
            let v = &self.data[src * self.cols + j] * k;
            if !v.is_zero() {
                self.data[dst * self.cols + j] += v;
            }
        }
    }

    /// col_dst += k · col_src
    fn add_col_multiple(&mut self, dst: usize, src: usize, k: &BigInt) {
        for i in 0..self.rows {
            let v = &self.data[i * self.cols + src] * k;
            if !v.is_zero() {
                self.data[i * self.cols + dst] += v;
            }
        }
    }

    /// Rows of whitespace-separated integers; blank lines and lines starting
    /// with '#' are skipped.
    pub fn parse_text(text: &str) -> Result<IntMatrix> {
        let mut rows: Vec<Vec<BigInt>> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let row = t
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<BigInt>()
                        .map_err(|_| Error::InvalidArgument(format!("line {}: bad integer {tok:?}", ln + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != c) {
            return Err(Error::InvalidArgument("ragged matrix rows".into()));
        }
        Ok(IntMatrix {
            rows: rows.len(),
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    /// {"rows": r, "cols": c, "entries": [[…], …]}; entries outside i64 are
    /// written as strings.
    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<serde_json::Value> = (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .map(|x| match x.to_i64() {
                        Some(v) => v.into(),
                        None => x.to_string().into(),
                    })
                    .collect::<Vec<serde_json::Value>>()
                    .into()
            })
            .collect();
        serde_json::json!({ "rows": self.rows, "cols": self.cols, "entries": entries })
    }

    /// Accepts the object form above or a bare array of rows.
    pub fn from_json(v: &serde_json::Value) -> Result<IntMatrix> {
        let bad = |m: &str| Error::InvalidArgument(format!("matrix json: {m}"));
        let (entries, dims) = match v {
            serde_json::Value::Array(_) => (v, None),
            serde_json::Value::Object(o) => {
                let e = o.get("entries").ok_or_else(|| bad("missing entries"))?;
                let r = o.get("rows").and_then(|x| x.as_u64());
                let c = o.get("cols").and_then(|x| x.as_u64());
                (e, r.zip(c))
            }
            _ => return Err(bad("expected object or array")),
        };
        let rows = entries.as_array().ok_or_else(|| bad("entries must be an array"))?;
        let mut data = Vec::new();
        let mut c = None;
        for r in rows {
            let r = r.as_array().ok_or_else(|| bad("row must be an array"))?;
            if *c.get_or_insert(r.len()) != r.len() {
                return Err(bad("ragged rows"));
            }
            for x in r {
                data.push(match x {
                    serde_json::Value::Number(n) => {
                        n.as_i64().map(BigInt::from).ok_or_else(|| bad("non-integer entry"))?
                    }
                    serde_json::Value::String(s) => s.parse().map_err(|_| bad("bad integer string"))?,
                    _ => return Err(bad("entry must be an integer")),
                });
            }
        }
        let (nr, nc) = (rows.len(), c.unwrap_or(0));
        if let Some((r, cc)) = dims {
            let empty_ok = nr == 0 && r as usize == 0;
            if r as usize != nr || (!empty_ok && cc as usize != nc) {
                return Err(bad("declared dimensions do not match entries"));
            }
            if nr == 0 {
                return Ok(IntMatrix::zeros(0, cc as usize));
            }
        }
        IntMatrix::new(nr, nc, data)
    }
}

/// L · A · R = diag(d₁, d₂, …) padded with zeros; L, R unimodular;
/// d₁ | d₂ | … and every d_i ≥ 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmithDecomposition {
    pub left: IntMatrix,
    pub diag: Vec<BigInt>,
    pub right: IntMatrix,
}

impl SmithDecomposition {
    pub fn diagonal_matrix(&self) -> IntMatrix {
        IntMatrix::from_diag(self.left.rows, self.right.rows, &self.diag)
    }
}

/// Smallest-magnitude nonzero entry in the block rows ≥ t, cols ≥ t.
fn min_entry(a: &IntMatrix, t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, BigInt)> = None;
    for i in t..a.rows {
        for j in t..a.cols {
            let x = a.get(i, j);
            if x.is_zero() {
                continue;
            }
            let m = x.abs();
            if best.as_ref().is_none_or(|(_, _, b)| m < *b) {
                let one = m.is_one();
                best = Some((i, j, m));
                if one {
                    return best.map(|(i, j, _)| (i, j));
                }
            }
        }
    }
    best.map(|(i, j, _)| (i, j))
}

pub fn smith_normal_form(a: &IntMatrix) -> SmithDecomposition {
    let (r, c) = (a.rows, a.cols);
    let mut m = a.clone();
    let mut left = IntMatrix::identity(r);
    let mut right = IntMatrix::identity(c);
    let k = r.min(c);
    for t in 0..k {
        let Some((pi, pj)) = min_entry(&m, t) else { break };
        m.swap_rows(t, pi);
        left.swap_rows(t, pi);
        m.swap_cols(t, pj);
        right.swap_cols(t, pj);
        loop {
            let pivot = m.get(t, t).clone();
            let mut dirty = false;
            for i in t + 1..r {
                if m.get(i, t).is_zero() {
                    continue;
                }
                let q = -(m.get(i, t) / &pivot);
                m.add_row_multiple(i, t, &q);
                left.add_row_multiple(i, t, &q);
                dirty |= !m.get(i, t).is_zero();
            }
            for j in t + 1..c {
                if m.get(t, j).is_zero() {
                    continue;
                }
                let q = -(m.get(t, j) / &pivot);
                m.add_col_multiple(j, t, &q);
                right.add_col_multiple(j, t, &q);
                dirty |= !m.get(t, j).is_zero();
            }
            if dirty {
                // a remainder smaller than the pivot survived; move it to (t, t)
                let mut best = (t, t, pivot.abs());
                for i in t + 1..r {
                    let x = m.get(i, t).abs();
                    if !x.is_zero() && x < best.2 {
                        best = (i, t, x);
                    }
                }
                for j in t + 1..c {
                    let x = m.get(t, j).abs();
                    if !x.is_zero() && x < best.2 {
                        best = (t, j, x);
                    }
                }
                m.swap_rows(t, best.0);
                left.swap_rows(t, best.0);
                m.swap_cols(t, best.1);
                right.swap_cols(t, best.1);
                continue;
            }
            // pivot must divide the remaining block
            let bad_row = (t + 1..r).find(|&i| (t + 1..c).any(|j| !(m.get(i, j) % &pivot).is_zero()));
            match bad_row {
                Some(i) => {
                    let one = BigInt::one();
                    m.add_row_multiple(t, i, &one);
                    left.add_row_multiple(t, i, &one);
                }
                None => break,
            }
        }
        if m.get(t, t).sign() == Sign::Minus {
            m.negate_row(t);
            left.negate_row(t);
        }
    }
    let diag = (0..k).map(|t| m.get(t, t).clone()).collect();
    SmithDecomposition { left, diag, right }
}

/// ℤ^rows / A(ℤ^cols).
pub fn cokernel(a: &IntMatrix) -> AbelianGroup {
    let snf = smith_normal_form(a);
    let zeros = snf.diag.iter().filter(|d| d.is_zero()).count() + (a.rows - snf.diag.len());
    let factors: Vec<BigUint> = snf
        .diag
        .iter()
        .filter_map(|d| d.to_biguint())
        .filter(|d| !d.is_zero())
        .collect();
    AbelianGroup::new(zeros, factors)
}

/// coker(A) ⊗ ℤ/aℤ through the SNF of [A | aI].
pub fn cokernel_mod(a: &IntMatrix, modulus: u64) -> Result<AbelianGroup> {
    if modulus == 0 {
        return Err(Error::InvalidArgument("modulus must be positive".into()));
    }
    let ai = IntMatrix::identity(a.rows).scaled(&BigInt::from(modulus));
    Ok(cokernel(&a.hstack(&ai)?))
}

/// Same group as [`cokernel_mod`], by elimination over each ℤ/p^k with
/// p^k ‖ a and recombination of the primary parts.
pub fn cokernel_mod_fast(a: &IntMatrix, modulus: u64) -> Result<AbelianGroup> {
    if modulus == 0 {
        return Err(Error::InvalidArgument("modulus must be positive".into()));
    }
    let m = BigInt::from(modulus);
    let entries: Vec<u64> = a
        .data
        .iter()
        .map(|x| x.mod_floor(&m).to_u64().expect("reduced entry fits"))
        .collect();
    cokernel_mod_reduced(a.rows, a.cols, &entries, modulus)
}

/// [`cokernel_mod_fast`] for a row-major matrix of machine integers.
pub fn cokernel_mod_small(rows: usize, cols: usize, entries: &[i64], modulus: u64) -> Result<AbelianGroup> {
    if modulus == 0 {
        return Err(Error::InvalidArgument("modulus must be positive".into()));
    }
    if entries.len() != rows * cols {
        return Err(Error::InvalidArgument("entry count does not match shape".into()));
    }
    if modulus > 1 << 62 {
        return Err(Error::InvalidArgument(
            "modulus too large for the word-size path".into(),
        ));
    }
    let m = modulus as i64;
    let reduced: Vec<u64> = if modulus.is_power_of_two() {
        // two's complement masking is the Euclidean residue
        entries.iter().map(|&x| (x & (m - 1)) as u64).collect()
    } else {
        entries
            .iter()
            .map(|&x| {
                if (0..m).contains(&x) {
                    x as u64
                } else {
                    x.rem_euclid(m) as u64
                }
            })
            .collect()
    };
    cokernel_mod_reduced(rows, cols, &reduced, modulus)
}

fn cokernel_mod_reduced(rows: usize, cols: usize, entries: &[u64], modulus: u64) -> Result<AbelianGroup> {
    if modulus > 1 << 62 {
        return Err(Error::InvalidArgument(
            "modulus too large for the word-size path".into(),
        ));
    }
    let mut factors: Vec<BigUint> = Vec::new();
    for p in prime_factors(modulus) {
        let mut k = 0u32;
        let mut q = 1u64;
        let mut m = modulus;
        while m.is_multiple_of(p) {
            m /= p;
            k += 1;
            q *= p;
        }
        let vals = if q == 2 {
            local_valuations_mod2(rows, cols, entries)
        } else {
            let local: Vec<u64> = if q == modulus {
                entries.to_vec()
            } else {
                entries.iter().map(|&x| x % q).collect()
            };
            local_valuations(rows, cols, local, p, k)
        };
        // rows without a unit-or-better pivot contribute ℤ/p^k
        let mut exps: Vec<u32> = vals;
        exps.resize(rows, k);
        exps.sort_unstable_by(|a, b| b.cmp(a));
        exps.retain(|&e| e > 0);
        let pb = BigUint::from(p);
        // align primary parts largest-first so that factors stay a chain
        for (i, &e) in exps.iter().enumerate() {
            if i == factors.len() {
                factors.push(BigUint::one());
            }
            factors[i] *= pb.pow(e);
        }
    }
    Ok(AbelianGroup::new(0, factors))
}

/// SNF valuations over ℤ/p^k (k ≥ 1): one entry per pivot with valuation < k.
fn local_valuations(rows: usize, cols: usize, mut a: Vec<u64>, p: u64, k: u32) -> Vec<u32> {
    let q = p.pow(k);
    let val = |x: u64| -> u32 {
        if x == 0 {
            return k;
        }
        let mut v = 0;
        let mut y = x;
        while y.is_multiple_of(p) {
            y /= p;
            v += 1;
        }
        v
    };
    let mulmod = |x: u64, y: u64| ((x as u128 * y as u128) % q as u128) as u64;
    // every cell takes at most min(rows, cols) unreduced updates
    let lazy = (q as u128) * (q as u128) * (rows.min(cols) as u128 + 1) < 1u128 << 63;
    let mut out = Vec::new();
    for t in 0..rows.min(cols) {
        // pivot of least valuation in the remaining block
        let mut best: Option<(usize, usize, u32)> = None;
        'search: for i in t..rows {
            for j in t..cols {
                let cell = &mut a[i * cols + j];
                *cell %= q;
                let v = val(*cell);
                if v < k && best.is_none_or(|b| v < b.2) {
                    best = Some((i, j, v));
                    if v == 0 {
                        break 'search;
                    }
                }
            }
        }
        let Some((pi, pj, v)) = best else { break };
        // physical swaps keep the update loop contiguous
        if pi != t {
            for j in 0..cols {
                a.swap(t * cols + j, pi * cols + j);
            }
        }
        if pj != t {
            for i in 0..rows {
                a.swap(i * cols + t, i * cols + pj);
            }
        }
        out.push(v);
        let pv = a[t * cols + t] % q;
        let pk = p.pow(v);
        let unit_inv = mod_inverse((pv / pk) % q, q);
        let pivot_row: Vec<u64> = a[t * cols + t..(t + 1) * cols].iter().map(|&x| x % q).collect();
        for i in t + 1..rows {
            let x = a[i * cols + t] % q;
            if x == 0 {
                continue;
            }
            // x = p^v · y, and f · pivot ≡ x
            let f = mulmod(x / pk, unit_inv);
            let neg = q - f;
            let row = &mut a[i * cols + t..(i + 1) * cols];
            if lazy {
                // entries are reduced on read; each step adds less than q²
                for (c, &pj) in row.iter_mut().zip(&pivot_row) {
                    *c += neg * pj;
                }
            } else {
                for (c, &pj) in row.iter_mut().zip(&pivot_row) {
                    if pj != 0 {
                        *c = ((*c as u128 + neg as u128 * pj as u128) % q as u128) as u64;
                    }
                }
            }
        }
        // column operations only touch the pivot row, which is now done
    }
    out
}

fn mod_inverse(x: u64, q: u64) -> u64 {
    let (g, s, _) = egcd(x as i128, q as i128);
    debug_assert_eq!(g, 1);
    s.rem_euclid(q as i128) as u64
}

fn egcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = egcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}

/// Rank over 𝔽₂ with bit-packed rows, reported as that many zero valuations.
fn local_valuations_mod2(rows: usize, cols: usize, entries: &[u64]) -> Vec<u32> {
    let words = cols.div_ceil(64);
    let mut m: Vec<u64> = vec![0; rows * words];
    for i in 0..rows {
        for j in 0..cols {
            if entries[i * cols + j] & 1 == 1 {
                m[i * words + j / 64] |= 1 << (j % 64);
            }
        }
    }
    let mut rank = 0;
    for j in 0..cols {
        if rank == rows {
            break;
        }
        let (w, bit) = (j / 64, 1u64 << (j % 64));
        let Some(piv) = (rank..rows).find(|&i| m[i * words + w] & bit != 0) else {
            continue;
        };
        for x in 0..words {
            m.swap(rank * words + x, piv * words + x);
        }
        for i in rank + 1..rows {
            if m[i * words + w] & bit != 0 {
                for x in w..words {
                    m[i * words + x] ^= m[rank * words + x];
                }
            }
        }
        rank += 1;
    }
    vec![0; rank]
}
