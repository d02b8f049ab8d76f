//! Block-structured random matrix models, code/depth combinatorics, and the
//! Monte-Carlo moment and class-distribution experiments.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abelian::{lambda_u_tensor_mass_certified, sur_count, AbelianGroup};
use crate::error::{Error, Result};
use crate::group::{abelian_group_from_factors, subgroup_lattice, GroupRef};
use crate::intlinalg::{cokernel_mod_small, IntMatrix};
use crate::measure::{convolve, SignedMeasure};
use crate::spectral::{epsilon_balanced_abelian, prime_factors};

// ---------------------------------------------------------------------------
// Deterministic streams

/// Stable 64-bit key for an experiment name (FNV-1a).
pub fn experiment_key(name: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Generator for sample `index` of experiment `experiment` under `seed`.
/// The key depends on (seed, experiment) and the ChaCha stream on `index`, so
/// every sample is reproducible on its own.
pub fn stream_rng(seed: u64, experiment: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&experiment.to_le_bytes());
    key[16..24].copy_from_slice(b"cokerwlk");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

// ---------------------------------------------------------------------------
// Partitions

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    ground_size: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(ground_size: usize, blocks: Vec<Vec<usize>>) -> Result<Partition> {
        let mut seen = vec![false; ground_size];
        for b in &blocks {
            if b.is_empty() {
                return Err(Error::InvalidArgument("partition blocks must be nonempty".into()));
            }
            for &x in b {
                if x >= ground_size || seen[x] {
                    return Err(Error::InvalidArgument(format!("index {x} out of range or repeated")));
                }
                seen[x] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("partition does not cover the ground set".into()));
        }
        let mut blocks = blocks;
        for b in &mut blocks {
            b.sort_unstable();
        }
        Ok(Partition { ground_size, blocks })
    }

    pub fn singletons(n: usize) -> Partition {
        Partition {
            ground_size: n,
            blocks: (0..n).map(|i| vec![i]).collect(),
        }
    }

    /// Consecutive blocks of `size`; the last one may be shorter.
    pub fn contiguous(n: usize, size: usize) -> Result<Partition> {
        if size == 0 && n > 0 {
            return Err(Error::InvalidArgument("block size must be positive".into()));
        }
        let blocks = (0..n)
            .step_by(size.max(1))
            .map(|s| (s..(s + size).min(n)).collect())
            .collect();
        Ok(Partition { ground_size: n, blocks })
    }

    pub fn ground_size(&self) -> usize {
        self.ground_size
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// |𝒫|: largest block size.
    pub fn max_block_size(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// #𝒫: number of blocks.
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }
}

// ---------------------------------------------------------------------------
// Block samplers

/// Distribution families for a single block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BlockSampler {
    /// Independent entries from a finite distribution. Balanced with the ε of
    /// a single entry: for a functional with a nonzero coefficient at some
    /// entry, conditioning on the other entries leaves one entry's residue.
    Iid { values: Vec<i64>, probs: Vec<f64> },
    /// Iid entries plus one uniform offset in 0..shift_modulus shared by the
    /// whole block. Conditioning on the offset reduces to the iid case, so the
    /// iid ε is a lower bound.
    SharedShift {
        values: Vec<i64>,
        probs: Vec<f64>,
        shift_modulus: u64,
    },
    /// One iid row copied to every row of the block, then iid noise added to
    /// each entry. Conditioning on the base row leaves the noise, so the
    /// noise's ε is a lower bound.
    RowDuplicate {
        values: Vec<i64>,
        probs: Vec<f64>,
        noise_values: Vec<i64>,
        noise_probs: Vec<f64>,
    },
    /// Every entry equal to `value`; balanced for no ε > 0.
    Constant { value: i64 },
}

fn check_dist(values: &[i64], probs: &[f64]) -> Result<()> {
    if values.is_empty() || values.len() != probs.len() {
        return Err(Error::InvalidArgument(
            "values and probs must be nonempty and equal length".into(),
        ));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::NotProbability(
            "entry probabilities must be nonnegative and sum to 1".into(),
        ));
    }
    Ok(())
}

fn draw(values: &[i64], cum: &[u64], rng: &mut impl Rng) -> i64 {
    let x = rng.next_u64();
    let k = cum.iter().position(|&c| x < c).unwrap_or(values.len() - 1);
    values[k]
}

#[derive(Default)]
struct CumTables {
    cum: Vec<u64>,
    noise: Vec<u64>,
}

/// Cumulative probabilities as thresholds on a uniform u64.
fn cumulative(probs: &[f64]) -> Vec<u64> {
    const SCALE: f64 = 18446744073709551616.0; // 2^64
    probs
        .iter()
        .scan(0.0, |s, p| {
            *s += p;
            // the float-to-int cast saturates at u64::MAX
            Some((*s * SCALE) as u64)
        })
        .collect()
}

/// ε of a single entry distribution in ℤ/a: 1 − max over p | a and residues r
/// of P[X ≡ r mod p].
fn entry_epsilon(values: &[i64], probs: &[f64], a: u64) -> f64 {
    if a == 1 {
        return 1.0;
    }
    let mut worst: f64 = 0.0;
    for p in prime_factors(a) {
        let mut hist = vec![0.0; p as usize];
        for (v, w) in values.iter().zip(probs) {
            hist[v.rem_euclid(p as i64) as usize] += w;
        }
        worst = hist.into_iter().fold(worst, f64::max);
    }
    (1.0 - worst).clamp(0.0, 1.0)
}

impl BlockSampler {
    pub fn validate(&self) -> Result<()> {
        match self {
            BlockSampler::Iid { values, probs } => check_dist(values, probs),
            BlockSampler::SharedShift {
                values,
                probs,
                shift_modulus,
            } => {
                if *shift_modulus == 0 {
                    return Err(Error::InvalidArgument("shift_modulus must be positive".into()));
                }
                check_dist(values, probs)
            }
            BlockSampler::RowDuplicate {
                values,
                probs,
                noise_values,
                noise_probs,
            } => {
                check_dist(values, probs)?;
                check_dist(noise_values, noise_probs)
            }
            BlockSampler::Constant { .. } => Ok(()),
        }
    }

    /// The documented lower bound on ε in ((ℤ/a)^rows)^cols.
    pub fn declared_epsilon(&self, a: u64) -> f64 {
        match self {
            BlockSampler::Iid { values, probs } | BlockSampler::SharedShift { values, probs, .. } => {
                entry_epsilon(values, probs, a)
            }
            BlockSampler::RowDuplicate {
                noise_values,
                noise_probs,
                ..
            } => entry_epsilon(noise_values, noise_probs, a),
            BlockSampler::Constant { .. } => {
                if a == 1 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn tables(&self) -> CumTables {
        match self {
            BlockSampler::Iid { probs, .. } | BlockSampler::SharedShift { probs, .. } => CumTables {
                cum: cumulative(probs),
                noise: Vec::new(),
            },
            BlockSampler::RowDuplicate { probs, noise_probs, .. } => CumTables {
                cum: cumulative(probs),
                noise: cumulative(noise_probs),
            },
            BlockSampler::Constant { .. } => CumTables::default(),
        }
    }

    /// Writes a rows × cols block into `out` (row-major with stride `stride`).
    pub fn sample_into(&self, rows: &[usize], cols: &[usize], stride: usize, out: &mut [i64], rng: &mut impl Rng) {
        self.sample_with(&self.tables(), rows, cols, stride, out, rng)
    }

    fn sample_with(
        &self,
        t: &CumTables,
        rows: &[usize],
        cols: &[usize],
        stride: usize,
        out: &mut [i64],
        rng: &mut impl Rng,
    ) {
        let (cum, ncum) = (&t.cum, &t.noise);
        match self {
            BlockSampler::Iid { values, .. } => {
                for &i in rows {
                    for &j in cols {
                        out[i * stride + j] = draw(values, cum, rng);
                    }
                }
            }
            BlockSampler::SharedShift {
                values, shift_modulus, ..
            } => {
                let c = rng.random_range(0..*shift_modulus) as i64;
                for &i in rows {
                    for &j in cols {
                        out[i * stride + j] = draw(values, cum, rng) + c;
                    }
                }
            }
            BlockSampler::RowDuplicate {
                values, noise_values, ..
            } => {
                let base: Vec<i64> = cols.iter().map(|_| draw(values, cum, rng)).collect();
                for &i in rows {
                    for (k, &j) in cols.iter().enumerate() {
                        out[i * stride + j] = base[k] + draw(noise_values, ncum, rng);
                    }
                }
            }
            BlockSampler::Constant { value } => {
                for &i in rows {
                    for &j in cols {
                        out[i * stride + j] = *value;
                    }
                }
            }
        }
    }

    /// Exact law of a rows × cols block reduced mod a, as a dense vector over
    /// (ℤ/a)^{rows·cols} indexed in row-major mixed radix (first entry most
    /// significant).
    pub fn block_distribution(&self, rows: usize, cols: usize, a: u64) -> Result<Vec<f64>> {
        const CAP: u128 = 10_000_000;
        let cells = rows * cols;
        let size = (a as u128).checked_pow(cells as u32).unwrap_or(u128::MAX);
        if a == 0 || size > CAP {
            return Err(Error::CapExceeded {
                what: "block distribution",
                size,
                cap: CAP,
            });
        }
        let size = size as usize;
        let entry = |values: &[i64], probs: &[f64]| -> Vec<f64> {
            let mut d = vec![0.0; a as usize];
            for (v, p) in values.iter().zip(probs) {
                d[v.rem_euclid(a as i64) as usize] += p;
            }
            d
        };
        let iid = |d: &[f64], k: usize| -> Vec<f64> {
            let mut out = vec![1.0];
            for _ in 0..k {
                let mut next = vec![0.0; out.len() * a as usize];
                for (x, &px) in out.iter().enumerate() {
                    if px == 0.0 {
                        continue;
                    }
                    for (y, &py) in d.iter().enumerate() {
                        next[x * a as usize + y] += px * py;
                    }
                }
                out = next;
            }
            out
        };
        let digits = |mut x: usize, k: usize| -> Vec<u64> {
            let mut v = vec![0u64; k];
            for slot in v.iter_mut().rev() {
                *slot = (x % a as usize) as u64;
                x /= a as usize;
            }
            v
        };
        let encode = |v: &[u64]| v.iter().fold(0usize, |acc, &d| acc * a as usize + d as usize);
        Ok(match self {
            BlockSampler::Iid { values, probs } => iid(&entry(values, probs), cells),
            BlockSampler::SharedShift {
                values,
                probs,
                shift_modulus,
            } => {
                let base = iid(&entry(values, probs), cells);
                let mut out = vec![0.0; size];
                let m = *shift_modulus;
                for c in 0..m {
                    for (x, &px) in base.iter().enumerate() {
                        if px == 0.0 {
                            continue;
                        }
                        let shifted: Vec<u64> = digits(x, cells).into_iter().map(|d| (d + c) % a).collect();
                        out[encode(&shifted)] += px / m as f64;
                    }
                }
                out
            }
            BlockSampler::RowDuplicate {
                values,
                probs,
                noise_values,
                noise_probs,
            } => {
                let row = iid(&entry(values, probs), cols);
                let noise = iid(&entry(noise_values, noise_probs), cells);
                let mut out = vec![0.0; size];
                for (r, &pr) in row.iter().enumerate() {
                    if pr == 0.0 {
                        continue;
                    }
                    let rd = digits(r, cols);
                    for (z, &pz) in noise.iter().enumerate() {
                        if pz == 0.0 {
                            continue;
                        }
                        let zd = digits(z, cells);
                        let v: Vec<u64> = (0..cells).map(|k| (rd[k % cols] + zd[k]) % a).collect();
                        out[encode(&v)] += pr * pz;
                    }
                }
                out
            }
            BlockSampler::Constant { value } => {
                let mut out = vec![0.0; size];
                let d = value.rem_euclid(a as i64) as u64;
                out[encode(&vec![d; cells])] = 1.0;
                out
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BalanceMode {
    Exhaustive,
    MonteCarlo,
}

#[derive(Debug, Clone, Serialize)]
pub struct BalanceReport {
    pub mode: BalanceMode,
    /// Exact ε (exhaustive) or the estimate over the sampled subgroups.
    pub measured_epsilon: f64,
    pub declared_epsilon: f64,
    pub passes: bool,
    /// Monte-Carlo mode only checks sampled index-p subgroups, so a pass there
    /// is evidence rather than proof.
    pub caveat: Option<String>,
}

/// Checks max_{gH} P[X ∈ gH] ≤ 1 − ε over maximal subgroups H of
/// ((ℤ/a)^rows)^cols. Maximal subgroups of a finite abelian group have prime
/// index, so they are the kernels of nonzero functionals to ℤ/p, p | a.
pub fn verify_block_balanced(
    sampler: &BlockSampler,
    shape: (usize, usize),
    a: u64,
    eps: f64,
    mode: BalanceMode,
    rng: &mut impl Rng,
) -> Result<BalanceReport> {
    sampler.validate()?;
    let cells = shape.0 * shape.1;
    let measured = match mode {
        BalanceMode::Exhaustive => {
            let size = (a as u128).checked_pow(cells as u32).unwrap_or(u128::MAX);
            if size > 4096 {
                return Err(Error::CapExceeded {
                    what: "exhaustive block balance",
                    size,
                    cap: 4096,
                });
            }
            let dense = sampler.block_distribution(shape.0, shape.1, a)?;
            let dist = dense_to_pairs(&dense, a, cells);
            epsilon_balanced_abelian(&vec![a; cells], &dist)?
        }
        BalanceMode::MonteCarlo => {
            const SAMPLES: usize = 20_000;
            const FUNCTIONALS: usize = 200;
            let rows: Vec<usize> = (0..shape.0).collect();
            let cols: Vec<usize> = (0..shape.1).collect();
            let mut draws = vec![vec![0i64; cells]; SAMPLES];
            for d in draws.iter_mut() {
                sampler.sample_into(&rows, &cols, shape.1, d, rng);
            }
            let mut worst: f64 = 0.0;
            for p in prime_factors(a) {
                for _ in 0..FUNCTIONALS {
                    let coeffs: Vec<i64> = loop {
                        let c: Vec<i64> = (0..cells).map(|_| rng.random_range(0..p as i64)).collect();
                        if c.iter().any(|&x| x != 0) {
                            break c;
                        }
                    };
                    let mut hist = vec![0usize; p as usize];
                    for d in &draws {
                        let t: i64 = d.iter().zip(&coeffs).map(|(x, c)| x.rem_euclid(p as i64) * c).sum();
                        hist[t.rem_euclid(p as i64) as usize] += 1;
                    }
                    let m = *hist.iter().max().unwrap() as f64 / SAMPLES as f64;
                    worst = worst.max(m);
                }
            }
            (1.0 - worst).clamp(0.0, 1.0)
        }
    };
    let passes = match mode {
        BalanceMode::Exhaustive => measured + 1e-12 >= eps,
        // 3σ allowance for a coset-mass estimate
        BalanceMode::MonteCarlo => measured + 3.0 * (0.25f64 / 20_000.0).sqrt() >= eps,
    };
    Ok(BalanceReport {
        mode,
        measured_epsilon: measured,
        declared_epsilon: sampler.declared_epsilon(a),
        passes,
        caveat: (mode == BalanceMode::MonteCarlo)
            .then(|| "only sampled index-p subgroups were checked; a pass is not a proof".to_string()),
    })
}

fn dense_to_pairs(dense: &[f64], a: u64, cells: usize) -> Vec<(Vec<u64>, f64)> {
    dense
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(mut x, &w)| {
            let mut v = vec![0u64; cells];
            for slot in v.iter_mut().rev() {
                *slot = (x % a as usize) as u64;
                x /= a as usize;
            }
            (v, w)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Matrix models

/// Block matrix model: rows split by 𝒫, columns by 𝒬, independent blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancedMatrixModel {
    n_rows: usize,
    n_cols: usize,
    row_partition: Partition,
    col_partition: Partition,
    /// 0 keeps integer entries; otherwise entries are reduced mod this.
    modulus: u64,
    /// One sampler for every block, or one per (row block, column block) in
    /// row-major order.
    samplers: Vec<BlockSampler>,
}

impl BalancedMatrixModel {
    pub fn new(
        row_partition: Partition,
        col_partition: Partition,
        modulus: u64,
        samplers: Vec<BlockSampler>,
    ) -> Result<BalancedMatrixModel> {
        let blocks = row_partition.block_count() * col_partition.block_count();
        if samplers.len() != 1 && samplers.len() != blocks {
            return Err(Error::InvalidArgument(format!(
                "{} samplers for {blocks} blocks",
                samplers.len()
            )));
        }
        for s in &samplers {
            s.validate()?;
        }
        Ok(BalancedMatrixModel {
            n_rows: row_partition.ground_size(),
            n_cols: col_partition.ground_size(),
            row_partition,
            col_partition,
            modulus,
            samplers,
        })
    }

    /// n × (n+u) with singleton blocks and iid entries.
    pub fn iid(n: usize, u: usize, values: Vec<i64>, probs: Vec<f64>) -> Result<BalancedMatrixModel> {
        Self::new(
            Partition::singletons(n),
            Partition::singletons(n + u),
            0,
            vec![BlockSampler::Iid { values, probs }],
        )
    }

    /// n × (n+u) with contiguous h × w blocks all drawn from `sampler`.
    pub fn blocked(n: usize, u: usize, h: usize, w: usize, sampler: BlockSampler) -> Result<BalancedMatrixModel> {
        Self::new(
            Partition::contiguous(n, h)?,
            Partition::contiguous(n + u, w)?,
            0,
            vec![sampler],
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row_partition(&self) -> &Partition {
        &self.row_partition
    }

    pub fn col_partition(&self) -> &Partition {
        &self.col_partition
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn sampler(&self, row_block: usize, col_block: usize) -> &BlockSampler {
        if self.samplers.len() == 1 {
            &self.samplers[0]
        } else {
            &self.samplers[row_block * self.col_partition.block_count() + col_block]
        }
    }

    /// (w, h, ε): w = |𝒬|, h = |𝒫|, ε the least declared block ε over ℤ/a.
    pub fn declared(&self, a: u64) -> (usize, usize, f64) {
        let eps = self.samplers.iter().map(|s| s.declared_epsilon(a)).fold(1.0, f64::min);
        (
            self.col_partition.max_block_size(),
            self.row_partition.max_block_size(),
            eps,
        )
    }

    /// Row-major entries of one draw.
    pub fn sample_entries(&self, rng: &mut impl Rng) -> Vec<i64> {
        let mut out = vec![0i64; self.n_rows * self.n_cols];
        let tables: Vec<CumTables> = self.samplers.iter().map(BlockSampler::tables).collect();
        let ncb = self.col_partition.block_count();
        for (i, rb) in self.row_partition.blocks().iter().enumerate() {
            for (j, cb) in self.col_partition.blocks().iter().enumerate() {
                let k = if self.samplers.len() == 1 { 0 } else { i * ncb + j };
                self.samplers[k].sample_with(&tables[k], rb, cb, self.n_cols, &mut out, rng);
            }
        }
        if self.modulus > 0 {
            let m = self.modulus as i64;
            for x in out.iter_mut() {
                *x = x.rem_euclid(m);
            }
        }
        out
    }
}

pub fn sample_matrix(model: &BalancedMatrixModel, rng: &mut impl Rng) -> IntMatrix {
    IntMatrix::from_i64(model.n_rows, model.n_cols, &model.sample_entries(rng)).expect("shape matches")
}

// ---------------------------------------------------------------------------
// Homomorphisms (ℤ/a)^n → G

/// f ∈ Hom((ℤ/a)^n, G) for finite abelian G = ⊕ ℤ/d_k, stored by the images
/// of the standard generators.
#[derive(Debug, Clone)]
pub struct AbelianHom {
    modulus: u64,
    target_factors: Vec<u64>,
    target: GroupRef,
    images: Vec<usize>,
}

impl AbelianHom {
    /// `images[i]` is the coordinate vector of f(e_i) in ⊕ ℤ/d_k.
    pub fn new(modulus: u64, target_factors: &[u64], images: &[Vec<u64>]) -> Result<AbelianHom> {
        let target = abelian_group_from_factors(target_factors);
        let mut idx = Vec::with_capacity(images.len());
        for v in images {
            if v.len() != target_factors.len() || v.iter().zip(target_factors).any(|(x, d)| x >= d) {
                return Err(Error::InvalidArgument(format!(
                    "image {v:?} is not an element of the target"
                )));
            }
            idx.push(
                v.iter()
                    .zip(target_factors)
                    .fold(0usize, |acc, (&x, &d)| acc * d as usize + x as usize),
            );
        }
        Self::from_indices(modulus, target_factors, target, idx)
    }

    fn from_indices(modulus: u64, target_factors: &[u64], target: GroupRef, images: Vec<usize>) -> Result<AbelianHom> {
        for &g in &images {
            if !modulus.is_multiple_of(target.element_order(g) as u64) {
                return Err(Error::NotHomomorphism(format!(
                    "image of order {} does not divide the modulus {modulus}",
                    target.element_order(g)
                )));
            }
        }
        Ok(AbelianHom {
            modulus,
            target_factors: target_factors.to_vec(),
            target,
            images,
        })
    }

    pub fn n(&self) -> usize {
        self.images.len()
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn target(&self) -> &GroupRef {
        &self.target
    }

    pub fn target_factors(&self) -> &[u64] {
        &self.target_factors
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// f(x) for x ∈ (ℤ/a)^n given by coordinates.
    pub fn apply(&self, x: &[u64]) -> usize {
        let g = &self.target;
        let mut acc = 0;
        for (&xi, &img) in x.iter().zip(&self.images) {
            for _ in 0..xi {
                acc = g.mul(acc, img);
            }
        }
        acc
    }

    /// |f(V_{∖S})| where `removed[i]` marks coordinates in S.
    pub fn span_order_without(&self, removed: &[bool]) -> usize {
        let g = &self.target;
        let n = g.order();
        let mut inside = vec![false; n];
        inside[0] = true;
        let mut elems = vec![0usize];
        for (i, &img) in self.images.iter().enumerate() {
            if removed[i] || inside[img] {
                continue;
            }
            // elems ← elems + ⟨img⟩
            let mut k = 0;
            while k < elems.len() {
                let y = g.mul(elems[k], img);
                if !inside[y] {
                    inside[y] = true;
                    elems.push(y);
                }
                k += 1;
            }
        }
        elems.len()
    }

    /// [G : f(V_{∖S})]
    pub fn index_without(&self, removed: &[bool]) -> u64 {
        (self.target.order() / self.span_order_without(removed)) as u64
    }
}

fn union_mask(part: &Partition, sigma: u64) -> (Vec<bool>, usize) {
    let mut mask = vec![false; part.ground_size()];
    let mut size = 0;
    for (b, block) in part.blocks().iter().enumerate() {
        if sigma >> b & 1 == 1 {
            for &x in block {
                mask[x] = true;
            }
            size += block.len();
        }
    }
    (mask, size)
}

const MAX_SCAN_BLOCKS: usize = 20;

fn check_scan(f: &AbelianHom, part: &Partition) -> Result<()> {
    if part.ground_size() != f.n() {
        return Err(Error::InvalidArgument("partition size does not match the map".into()));
    }
    if part.block_count() > MAX_SCAN_BLOCKS {
        return Err(Error::CapExceeded {
            what: "partition subsets",
            size: 1u128 << part.block_count().min(127),
            cap: 1 << MAX_SCAN_BLOCKS,
        });
    }
    Ok(())
}

/// f is a 𝒫-code of distance w when f(V_{∖∪σ}) = G for every σ ⊆ 𝒫 with
/// |∪σ| < w. Images only shrink as σ grows, so only σ to which no further
/// block can be added under the size limit are checked. For w ≤ 0 no σ
/// qualifies and the answer is vacuously true.
pub fn is_code(f: &AbelianHom, part: &Partition, w: f64) -> Result<bool> {
    check_scan(f, part)?;
    let g_order = f.target.order();
    let sizes: Vec<usize> = part.blocks().iter().map(Vec::len).collect();
    for sigma in 0u64..(1 << part.block_count()) {
        let (mask, size) = union_mask(part, sigma);
        if (size as f64) >= w {
            continue;
        }
        let maximal = (0..sizes.len()).all(|b| sigma >> b & 1 == 1 || (size + sizes[b]) as f64 >= w);
        if maximal && f.span_order_without(&mask) != g_order {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Largest w for which f is a 𝒫-code: the least |∪σ| with f(V_{∖∪σ}) ≠ G.
/// 0 when f is not surjective.
pub fn code_distance(f: &AbelianHom, part: &Partition) -> Result<usize> {
    check_scan(f, part)?;
    let g_order = f.target.order();
    let mut best = usize::MAX;
    for sigma in 0u64..(1 << part.block_count()) {
        let (mask, size) = union_mask(part, sigma);
        if size < best && f.span_order_without(&mask) != g_order {
            best = size;
        }
    }
    // G trivial: every σ keeps f surjective
    Ok(if best == usize::MAX { part.ground_size() } else { best })
}

/// ℓ(D): prime factors of D with multiplicity.
pub fn ell(mut d: u64) -> u32 {
    let mut count = 0;
    for p in prime_factors(d) {
        while d.is_multiple_of(p) {
            d /= p;
            count += 1;
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthReport {
    pub map_id: u64,
    pub depth: u64,
    /// Block indices of a witness σ (empty when depth is 1).
    pub witness: Vec<usize>,
    /// [G : f(V_{∖∪σ})] for the witness.
    pub index: u64,
    pub ell_d: u32,
}

/// (𝒫, δ)-depth: the largest D with a σ ⊆ 𝒫, |∪σ| < ℓ(D)δn and
/// [G : f(V_{∖∪σ})] = D; 1 if there is none. Ties between witnesses go to the
/// first σ in bitmask order.
pub fn depth(f: &AbelianHom, part: &Partition, delta: f64, map_id: u64) -> Result<DepthReport> {
    check_scan(f, part)?;
    let n = f.n() as f64;
    let mut best = DepthReport {
        map_id,
        depth: 1,
        witness: vec![],
        index: 1,
        ell_d: 0,
    };
    for sigma in 0u64..(1 << part.block_count()) {
        let (mask, size) = union_mask(part, sigma);
        let d = f.index_without(&mask);
        let l = ell(d);
        if d > best.depth && (size as f64) < l as f64 * delta * n {
            best = DepthReport {
                map_id,
                depth: d,
                witness: (0..part.block_count()).filter(|&b| sigma >> b & 1 == 1).collect(),
                index: d,
                ell_d: l,
            };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct DepthCensus {
    pub total_maps: u64,
    /// depth D ↦ number of maps
    pub counts: BTreeMap<u64, u64>,
    /// D ↦ K·C(n, ⌈ℓ(D)δn⌉−1)·2^{ℓ(D)δn}·|G|^n·D^{−n+ℓ(D)δn} for every D > 1
    /// dividing |G|
    pub bounds: BTreeMap<u64, f64>,
    /// D ↦ K, the number of index-D subgroups
    pub index_counts: BTreeMap<u64, u64>,
    pub violations: Vec<u64>,
}

fn binomial(n: u64, k: i64) -> f64 {
    if k < 0 || k as u64 > n {
        return 0.0;
    }
    let k = k as u64;
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Enumerates Hom((ℤ/a)^n, G), tallies depths and compares with the count bound.
pub fn depth_census(n: usize, a: u64, target_factors: &[u64], part: &Partition, delta: f64) -> Result<DepthCensus> {
    let g = abelian_group_from_factors(target_factors);
    let go = g.order();
    let allowed: Vec<usize> = (0..go)
        .filter(|&x| a.is_multiple_of(g.element_order(x) as u64))
        .collect();
    let total = (allowed.len() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > 10_000_000 {
        return Err(Error::CapExceeded {
            what: "depth census maps",
            size: total,
            cap: 10_000_000,
        });
    }
    let lat = subgroup_lattice(&g)?;
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut idx = vec![0usize; n];
    let mut id = 0u64;
    loop {
        let images: Vec<usize> = idx.iter().map(|&k| allowed[k]).collect();
        let f = AbelianHom::from_indices(a, target_factors, g.clone(), images)?;
        *counts.entry(depth(&f, part, delta, id)?.depth).or_default() += 1;
        id += 1;
        let mut k = 0;
        while k < n {
            idx[k] += 1;
            if idx[k] < allowed.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    let nf = n as f64;
    let mut bounds = BTreeMap::new();
    let mut index_counts = BTreeMap::new();
    let mut violations = Vec::new();
    for d in (2..=go as u64).filter(|d| (go as u64).is_multiple_of(*d)) {
        let k = lat.count_of_index(d as usize) as u64;
        let l = ell(d) as f64;
        let t = l * delta * nf;
        let bound = k as f64
            * binomial(n as u64, t.ceil() as i64 - 1)
            * 2f64.powf(t)
            * (go as f64).powi(n as i32)
            * (d as f64).powf(-nf + t);
        if counts.get(&d).copied().unwrap_or(0) as f64 > bound {
            violations.push(d);
        }
        bounds.insert(d, bound);
        index_counts.insert(d, k);
    }
    Ok(DepthCensus {
        total_maps: id,
        counts,
        bounds,
        index_counts,
        violations,
    })
}

// ---------------------------------------------------------------------------
// Exact equidistribution of f(M) in G^r

#[derive(Debug, Clone, Serialize)]
pub struct EquidistributionReport {
    /// max over the requested targets of |P[f(M) = g] − |G|^{−r}|
    pub gap: f64,
    /// max over all of G^r
    pub max_gap: f64,
    pub bound: f64,
    pub epsilon: f64,
    pub code_distance: f64,
    /// ℓ, the largest block size
    pub ell: usize,
    /// number of subgroups of G
    pub subgroup_count: usize,
    pub r: usize,
    pub holds: bool,
}

/// Law of (f(M_{:,c}))_c ∈ G^r for the given row blocks and column block,
/// as the convolution of the per-row-block pushforwards. Returns the measure
/// on G^r and the least exact block ε.
fn pushforward_law(
    f: &AbelianHom,
    model: &BalancedMatrixModel,
    col_block: usize,
) -> Result<(SignedMeasure, f64, usize)> {
    let a = model.modulus();
    if a == 0 || !a.is_multiple_of(f.target.exponent() as u64) {
        return Err(Error::PreconditionViolated(
            "model modulus must be a positive multiple of the exponent of G".into(),
        ));
    }
    if a != f.modulus {
        return Err(Error::PreconditionViolated("map and model use different moduli".into()));
    }
    if model.n_rows() != f.n() {
        return Err(Error::PreconditionViolated("model rows do not match the map".into()));
    }
    let cols = model
        .col_partition()
        .blocks()
        .get(col_block)
        .ok_or_else(|| Error::InvalidArgument("column block out of range".into()))?;
    let r = cols.len();
    let mut gr_factors = Vec::new();
    for _ in 0..r {
        gr_factors.extend_from_slice(&f.target_factors);
    }
    let gr = abelian_group_from_factors(&gr_factors);
    let go = f.target.order();
    let mut law = SignedMeasure::dirac(&gr, 0)?;
    let mut eps: f64 = 1.0;
    for (bi, rows) in model.row_partition().blocks().iter().enumerate() {
        let sampler = model.sampler(bi, col_block);
        let dense = sampler.block_distribution(rows.len(), r, a)?;
        let cells = rows.len() * r;
        let pairs = dense_to_pairs(&dense, a, cells);
        eps = eps.min(epsilon_balanced_abelian(&vec![a; cells], &pairs)?);
        let mut w = vec![0.0; gr.order()];
        for (v, p) in &pairs {
            // v is row-major over (rows × r); column c gives f(M_{P,c})
            let mut idx = 0usize;
            for c in 0..r {
                let mut x = vec![0u64; f.n()];
                for (k, &row) in rows.iter().enumerate() {
                    x[row] = v[k * r + c];
                }
                idx = idx * go + f.apply(&x);
            }
            w[idx] += p;
        }
        law = convolve(&law, &SignedMeasure::new(&gr, w)?)?;
    }
    Ok((law, eps, r))
}

/// Exact |P[f(M) = (g₁…g_r)] − |G|^{−r}| against N·exp(−εw/(ℓNa²)), where ε is
/// the least measured block ε, w the code distance of f, ℓ the largest block
/// size and N the number of subgroups of G. With ℓ at least the largest block,
/// any w/ℓ blocks cover at most w coordinates, which the walk argument needs.
/// `targets` are element indices in G^r (empty means all).
pub fn equidistribution_gap(
    f: &AbelianHom,
    model: &BalancedMatrixModel,
    col_block: usize,
    targets: &[usize],
    w: Option<f64>,
) -> Result<EquidistributionReport> {
    let part = model.row_partition();
    let dist = code_distance(f, part)?;
    let w = match w {
        Some(w) => {
            if !is_code(f, part, w)? {
                return Err(Error::PreconditionViolated(format!(
                    "map is not a code of distance {w}"
                )));
            }
            w
        }
        None => dist as f64,
    };
    if w <= 0.0 || dist == 0 {
        return Err(Error::PreconditionViolated(
            "map is not a code of positive distance".into(),
        ));
    }
    let (law, eps, r) = pushforward_law(f, model, col_block)?;
    let u = 1.0 / law.group().order() as f64;
    let gaps: Vec<f64> = law.weights().iter().map(|x| (x - u).abs()).collect();
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    let gap = if targets.is_empty() {
        max_gap
    } else {
        targets
            .iter()
            .map(|&t| gaps.get(t).copied().ok_or(Error::InvalidElement(t)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max)
    };
    let nsub = subgroup_lattice(&f.target)?.len();
    let ell = part.max_block_size();
    let a = model.modulus() as f64;
    let bound = nsub as f64 * (-eps * w / (ell as f64 * nsub as f64 * a * a)).exp();
    Ok(EquidistributionReport {
        gap,
        max_gap,
        bound,
        epsilon: eps,
        code_distance: w,
        ell,
        subgroup_count: nsub,
        r,
        holds: max_gap <= bound + 1e-12,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionDepthReport {
    pub probability_zero: f64,
    pub bound: f64,
    pub depth: u64,
    pub epsilon: f64,
    pub holds: bool,
}

/// Exact P[f(M) = 0] ≤ (1−ε)(D^r|G|^{−r} + N·exp(−εδn/(2Nℓa²))) for f of
/// depth D > 1 with [G : f(V)] < D.
pub fn partition_depth_check(
    f: &AbelianHom,
    model: &BalancedMatrixModel,
    col_block: usize,
    delta: f64,
) -> Result<PartitionDepthReport> {
    let part = model.row_partition();
    let rep = depth(f, part, delta, 0)?;
    let full_index = f.index_without(&vec![false; f.n()]);
    if rep.depth <= 1 || full_index >= rep.depth {
        return Err(Error::PreconditionViolated(format!(
            "needs depth > 1 above the image index (depth {}, index {full_index})",
            rep.depth
        )));
    }
    let (law, eps, r) = pushforward_law(f, model, col_block)?;
    let go = f.target.order() as f64;
    let nsub = subgroup_lattice(&f.target)?.len() as f64;
    let ell = part.max_block_size() as f64;
    let a = model.modulus() as f64;
    let n = f.n() as f64;
    let bound = (1.0 - eps)
        * ((rep.depth as f64 / go).powi(r as i32) + nsub * (-eps * delta * n / (2.0 * nsub * ell * a * a)).exp());
    let p0 = law.weight(0);
    Ok(PartitionDepthReport {
        probability_zero: p0,
        bound,
        depth: rep.depth,
        epsilon: eps,
        holds: p0 <= bound + 1e-12,
    })
}

// ---------------------------------------------------------------------------
// Error combination

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorCombination {
    /// Π(1 + x_i) − 1
    pub product_minus_one: f64,
    /// |Π(1 + x_i) − 1|
    pub product_gap: f64,
    /// Σ min(0, x_i)
    pub lower: f64,
    /// 2 Σ max(0, x_i)
    pub upper: f64,
    /// 2 Σ |x_i|
    pub abs_bound: f64,
    pub holds: bool,
}

pub fn error_combination(xs: &[f64]) -> Result<ErrorCombination> {
    if xs.iter().any(|&x| !x.is_finite() || x < -1.0) {
        return Err(Error::HypothesisViolated("every x_i must be a real number ≥ −1".into()));
    }
    let pos: f64 = xs.iter().map(|&x| x.max(0.0)).sum();
    if pos > std::f64::consts::LN_2 {
        return Err(Error::HypothesisViolated(format!(
            "Σ max(0, x_i) = {pos} exceeds log 2"
        )));
    }
    let prod = xs.iter().map(|&x| 1.0 + x).product::<f64>() - 1.0;
    let lower: f64 = xs.iter().map(|&x| x.min(0.0)).sum();
    let upper = 2.0 * pos;
    let abs_bound = 2.0 * xs.iter().map(|x| x.abs()).sum::<f64>();
    let slack = 1e-12;
    Ok(ErrorCombination {
        product_minus_one: prod,
        product_gap: prod.abs(),
        lower,
        upper,
        abs_bound,
        holds: lower <= prod + slack && prod <= upper + slack && prod.abs() <= abs_bound + slack,
    })
}

// ---------------------------------------------------------------------------
// Monte-Carlo experiments

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples_used: u64,
    /// |G|^{−u}
    pub reference: f64,
}

fn biguint_ratio(num: &BigInt, den: &BigInt) -> f64 {
    BigRational::new(num.clone(), den.clone()).to_f64().unwrap_or(f64::NAN)
}

/// Sample mean and standard error of #Sur(coker M, G), computing coker M ⊗
/// ℤ/a for a = exponent of G. Sample i uses stream (seed, experiment, i) and
/// the reduction runs in index order, so the result is independent of the
/// thread count. Sums are kept exact.
pub fn moment_estimate(
    model: &BalancedMatrixModel,
    g: &AbelianGroup,
    num_samples: u64,
    seed: u64,
    experiment: u64,
) -> Result<MomentEstimate> {
    let a = g
        .exponent_u64()
        .ok_or_else(|| Error::InvalidArgument("moment target must be finite".into()))?;
    if model.n_cols() < model.n_rows() {
        return Err(Error::InvalidArgument(
            "model must have at least as many columns as rows".into(),
        ));
    }
    let u = model.n_cols() - model.n_rows();
    let (rows, cols) = (model.n_rows(), model.n_cols());
    // warm the surjection table once before the parallel section
    sur_count(&AbelianGroup::trivial(), g)?;
    let values: Vec<BigUint> = (0..num_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, experiment, i);
            let entries = model.sample_entries(&mut rng);
            let coker = cokernel_mod_small(rows, cols, &entries, a)?;
            sur_count(&coker, g)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut s1 = BigUint::zero();
    let mut s2 = BigUint::zero();
    for v in &values {
        s1 += v;
        s2 += v * v;
    }
    let n = BigInt::from(num_samples);
    let s1 = BigInt::from(s1);
    let s2 = BigInt::from(s2);
    let mean = if num_samples > 0 {
        biguint_ratio(&s1, &n)
    } else {
        f64::NAN
    };
    // unbiased variance (s2 − s1²/n)/(n−1), exactly
    let stderr = if num_samples > 1 {
        let num = &s2 * &n - &s1 * &s1;
        let den = &n * (&n - 1) * &n;
        biguint_ratio(&num, &den).max(0.0).sqrt()
    } else {
        f64::NAN
    };
    let order = g.order_u64().unwrap_or(u64::MAX) as f64;
    Ok(MomentEstimate {
        mean,
        stderr,
        samples_used: num_samples,
        reference: order.powi(-(u as i32)),
    })
}

/// E #Sur(coker M, G) for M with independent uniform entries mod a, where
/// exp(G) | a: every surjection ℤ^n → G sends M to a uniform element of
/// G^{n+u}, so the moment is #Sur(ℤ^n, G) / |G|^{n+u}.
pub fn uniform_entry_moment(n: usize, u: usize, g: &AbelianGroup) -> Result<f64> {
    let s = sur_count(&AbelianGroup::free(n), g)?;
    let order = g.order().ok_or(Error::BInfinite)?;
    Ok(biguint_ratio(
        &BigInt::from(s),
        &BigInt::from(order.pow((n + u) as u32)),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassRow {
    /// canonical key of coker ⊗ ℤ/a
    pub class: String,
    pub count: u64,
    pub frequency: f64,
    pub stderr: f64,
    /// λ_u(U_{a,H})
    pub reference: f64,
    pub reference_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassDistribution {
    pub samples: u64,
    pub rows: Vec<ClassRow>,
}

impl ClassDistribution {
    pub fn row(&self, class: &str) -> Option<&ClassRow> {
        self.rows.iter().find(|r| r.class == class)
    }
}

/// Empirical law of coker M ⊗ ℤ/a with the λ_u(U_{a,H}) reference per class.
/// `extra_classes` are reported even when never observed.
pub fn cokernel_class_distribution(
    model: &BalancedMatrixModel,
    a: u64,
    samples: u64,
    seed: u64,
    experiment: u64,
    extra_classes: &[AbelianGroup],
) -> Result<ClassDistribution> {
    if a < 2 {
        return Err(Error::InvalidArgument("class distribution needs a ≥ 2".into()));
    }
    if model.n_cols() < model.n_rows() {
        return Err(Error::InvalidArgument(
            "model must have at least as many columns as rows".into(),
        ));
    }
    let u = (model.n_cols() - model.n_rows()) as u32;
    let (rows, cols) = (model.n_rows(), model.n_cols());
    let classes: Vec<AbelianGroup> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, experiment, i);
            cokernel_mod_small(rows, cols, &model.sample_entries(&mut rng), a)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts: BTreeMap<AbelianGroup, u64> = BTreeMap::new();
    for c in classes {
        *counts.entry(c).or_default() += 1;
    }
    for h in extra_classes {
        counts.entry(h.clone()).or_default();
    }
    let n = samples as f64;
    let mut out = Vec::new();
    for (h, c) in counts {
        let freq = c as f64 / n;
        let reference = lambda_u_tensor_mass_certified(a, &h, u, 1e-10)?;
        // binomial standard error under the reference law
        let stderr = (reference.value * (1.0 - reference.value) / n).sqrt();
        out.push(ClassRow {
            class: h.canonical_string(),
            count: c,
            frequency: freq,
            stderr,
            reference: reference.value,
            reference_error: reference.error_bound,
        });
    }
    Ok(ClassDistribution { samples, rows: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iid01() -> BlockSampler {
        BlockSampler::Iid {
            values: vec![0, 1],
            probs: vec![0.6, 0.4],
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = (0..4).map(|_| stream_rng(7, 1, 3).random()).collect();
        let b: Vec<u64> = (0..4).map(|_| stream_rng(7, 1, 3).random()).collect();
        assert_eq!(a, b);
        assert_ne!(stream_rng(7, 1, 3).random::<u64>(), stream_rng(7, 1, 4).random::<u64>());
        assert_ne!(stream_rng(7, 1, 3).random::<u64>(), stream_rng(7, 2, 3).random::<u64>());
    }

    #[test]
    fn partitions() {
        let p = Partition::contiguous(7, 3).unwrap();
        assert_eq!(p.block_count(), 3);
        assert_eq!(p.max_block_size(), 3);
        assert!(Partition::new(3, vec![vec![0, 1]]).is_err());
        assert!(Partition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
    }

    #[test]
    fn zero_model() {
        let m = BalancedMatrixModel::blocked(4, 1, 2, 2, BlockSampler::Constant { value: 0 }).unwrap();
        let x = sample_matrix(&m, &mut stream_rng(0, 0, 0));
        assert_eq!(x, IntMatrix::zeros(4, 5));
    }

    #[test]
    fn iid_entry_mean() {
        let m = BalancedMatrixModel::iid(10, 0, vec![0, 1], vec![0.6, 0.4]).unwrap();
        let mut rng = stream_rng(1, 0, 0);
        let mut sum = 0.0;
        let draws = 1000;
        for _ in 0..draws {
            sum += m.sample_entries(&mut rng).iter().sum::<i64>() as f64;
        }
        let n = (draws * 100) as f64;
        let mean = sum / n;
        assert!((mean - 0.4).abs() < 3.0 * (0.24f64 / n).sqrt());
    }

    #[test]
    fn shared_shift_correlation() {
        let s = BlockSampler::SharedShift {
            values: vec![0, 1],
            probs: vec![0.5, 0.5],
            shift_modulus: 3,
        };
        let m = BalancedMatrixModel::blocked(4, 0, 2, 2, s).unwrap();
        let mut rng = stream_rng(2, 0, 0);
        let draws = 20_000;
        let (mut sx, mut sy, mut sz, mut sxy, mut sxz, mut sxx) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..draws {
            let e = m.sample_entries(&mut rng);
            // (0,0) and (0,1) share a block; (0,0) and (0,2) do not
            let (x, y, z) = (e[0] as f64, e[1] as f64, e[2] as f64);
            sx += x;
            sy += y;
            sz += z;
            sxy += x * y;
            sxz += x * z;
            sxx += x * x;
        }
        let n = draws as f64;
        let var = sxx / n - (sx / n).powi(2);
        let within = sxy / n - sx * sy / (n * n);
        let across = sxz / n - sx * sz / (n * n);
        assert!(within > 0.3);
        assert!(across.abs() < 3.0 * var / n.sqrt());
    }

    #[test]
    fn balance_examples() {
        let mut rng = stream_rng(3, 0, 0);
        let uni = BlockSampler::Iid {
            values: vec![0, 1],
            probs: vec![0.5, 0.5],
        };
        let r = verify_block_balanced(&uni, (1, 1), 2, 0.5, BalanceMode::Exhaustive, &mut rng).unwrap();
        assert!((r.measured_epsilon - 0.5).abs() < 1e-12 && r.passes);
        let zero = BlockSampler::Constant { value: 0 };
        for eps in [1e-6, 0.1, 0.5] {
            let r = verify_block_balanced(&zero, (2, 1), 3, eps, BalanceMode::Exhaustive, &mut rng).unwrap();
            assert!(!r.passes);
        }
        let shift = BlockSampler::SharedShift {
            values: vec![0, 1, 2],
            probs: vec![1.0 / 3.0; 3],
            shift_modulus: 3,
        };
        let r = verify_block_balanced(&shift, (2, 1), 3, 2.0 / 3.0, BalanceMode::Exhaustive, &mut rng).unwrap();
        assert!(r.measured_epsilon >= 2.0 / 3.0 - 1e-12 && r.passes);
        let r = verify_block_balanced(&iid01(), (2, 2), 2, 0.4, BalanceMode::MonteCarlo, &mut rng).unwrap();
        assert!(r.passes && r.caveat.is_some());
        assert!(matches!(
            verify_block_balanced(&uni, (4, 4), 2, 0.1, BalanceMode::Exhaustive, &mut rng).unwrap_err(),
            Error::CapExceeded { .. }
        ));
    }

    #[test]
    fn declared_epsilon_is_a_lower_bound() {
        let mut rng = stream_rng(4, 0, 0);
        let samplers = [
            iid01(),
            BlockSampler::SharedShift {
                values: vec![0, 1],
                probs: vec![0.7, 0.3],
                shift_modulus: 2,
            },
            BlockSampler::RowDuplicate {
                values: vec![0, 1, 2],
                probs: vec![0.2, 0.3, 0.5],
                noise_values: vec![0, 1],
                noise_probs: vec![0.8, 0.2],
            },
        ];
        for s in &samplers {
            for a in [2u64, 3, 4, 6] {
                for shape in [(1, 1), (2, 1), (2, 2), (1, 3)] {
                    if (a as u128).pow((shape.0 * shape.1) as u32) > 4096 {
                        continue;
                    }
                    let r =
                        verify_block_balanced(s, shape, a, s.declared_epsilon(a), BalanceMode::Exhaustive, &mut rng)
                            .unwrap();
                    assert!(
                        r.measured_epsilon + 1e-12 >= r.declared_epsilon,
                        "{s:?} a={a} {shape:?}"
                    );
                }
            }
        }
    }

    fn hom(a: u64, g: &[u64], images: &[&[u64]]) -> AbelianHom {
        AbelianHom::new(a, g, &images.iter().map(|v| v.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn code_examples() {
        let f = hom(2, &[2], &[&[1], &[1], &[0], &[0]]);
        let p = Partition::singletons(4);
        assert!(is_code(&f, &p, 2.0).unwrap());
        assert!(!is_code(&f, &p, 3.0).unwrap());
        assert!(is_code(&f, &p, 0.0).unwrap());
        assert_eq!(code_distance(&f, &p).unwrap(), 2);
        let z = hom(2, &[2], &[&[0], &[0]]);
        assert!(is_code(&z, &Partition::singletons(2), -1.0).unwrap());
        assert!(!is_code(&z, &Partition::singletons(2), 0.5).unwrap());
        // zero block of size ≥ w: the other blocks must still generate
        let g = hom(2, &[2], &[&[0], &[0], &[1], &[1]]);
        let bp = Partition::new(4, vec![vec![0, 1], vec![2], vec![3]]).unwrap();
        assert!(is_code(&g, &bp, 2.0).unwrap());
        assert!(AbelianHom::new(2, &[4], &[vec![1]]).is_err());
    }

    #[test]
    fn depth_examples() {
        let p = Partition::singletons(4);
        let f = hom(4, &[4], &[&[2], &[2], &[2], &[2]]);
        for delta in [0.05, 0.2, 0.5] {
            assert_eq!(depth(&f, &p, delta, 0).unwrap().depth, 2);
        }
        let z = hom(4, &[4], &[&[0], &[0], &[0], &[0]]);
        assert_eq!(depth(&z, &p, 0.1, 0).unwrap().depth, 4);
        let code = hom(2, &[2], &[&[1], &[1], &[1], &[1]]);
        // distance 4 = ℓ(2)·δ·n at δ = 1
        assert_eq!(depth(&code, &p, 1.0, 0).unwrap().depth, 1);
        let r = depth(&code, &p, 1.01, 0).unwrap();
        assert_eq!((r.depth, r.witness.len()), (2, 4));
        assert_eq!(ell(12), 3);
        assert_eq!(ell(1), 0);
    }

    #[test]
    fn census_small() {
        let p = Partition::singletons(6);
        let c = depth_census(6, 2, &[2], &p, 0.3).unwrap();
        assert_eq!(c.total_maps, 64);
        assert!(c.violations.is_empty());
        let c = depth_census(6, 2, &[2, 2], &p, 0.3).unwrap();
        assert_eq!(c.total_maps, 4096);
        assert!(c.violations.is_empty());
        // ℤ/3 has no index-2 subgroup
        let c = depth_census(4, 6, &[3], &Partition::singletons(4), 0.3).unwrap();
        assert_eq!(c.counts.get(&2), None);
    }

    #[test]
    fn equidistribution_examples() {
        let n = 8;
        let f = hom(2, &[2], &vec![&[1u64][..]; n]);
        let biased =
            BalancedMatrixModel::new(Partition::singletons(n), Partition::singletons(1), 2, vec![iid01()]).unwrap();
        let r = equidistribution_gap(&f, &biased, 0, &[0], None).unwrap();
        assert!((r.gap - 0.2f64.powi(8) / 2.0).abs() < 1e-15);
        assert!(r.holds);
        let uni = BalancedMatrixModel::new(
            Partition::singletons(n),
            Partition::singletons(1),
            2,
            vec![BlockSampler::Iid {
                values: vec![0, 1],
                probs: vec![0.5, 0.5],
            }],
        )
        .unwrap();
        assert!(equidistribution_gap(&f, &uni, 0, &[], None).unwrap().max_gap < 1e-15);
        let non = hom(2, &[2], &vec![&[0u64][..]; n]);
        assert!(matches!(
            equidistribution_gap(&non, &biased, 0, &[], None).unwrap_err(),
            Error::PreconditionViolated(_)
        ));
        assert!(matches!(
            equidistribution_gap(&f, &biased, 0, &[], Some(9.0)).unwrap_err(),
            Error::PreconditionViolated(_)
        ));
    }

    #[test]
    fn error_combination_examples() {
        let z = error_combination(&[0.0, 0.0]).unwrap();
        assert_eq!(z.product_gap, 0.0);
        let a = error_combination(&[0.1, 0.1]).unwrap();
        assert!((a.product_minus_one - 0.21).abs() < 1e-15 && (a.upper - 0.4).abs() < 1e-15 && a.holds);
        let b = error_combination(&[-0.5, 0.5]).unwrap();
        assert!((b.product_minus_one + 0.25).abs() < 1e-15 && b.lower == -0.5 && b.holds);
        assert!(matches!(
            error_combination(&[-1.5]).unwrap_err(),
            Error::HypothesisViolated(_)
        ));
        assert!(matches!(
            error_combination(&[0.5, 0.5]).unwrap_err(),
            Error::HypothesisViolated(_)
        ));
    }

    #[test]
    fn trivial_moment() {
        let m = BalancedMatrixModel::iid(6, 0, vec![0, 1], vec![0.6, 0.4]).unwrap();
        let e = moment_estimate(&m, &AbelianGroup::trivial(), 50, 1, 2).unwrap();
        assert_eq!((e.mean, e.stderr, e.reference), (1.0, 0.0, 1.0));
    }

    #[test]
    fn uniform_moment_matches_closed_form() {
        let g = AbelianGroup::cyclic(2);
        for u in 0..2 {
            let m = BalancedMatrixModel::iid(20, u, vec![0, 1], vec![0.5, 0.5]).unwrap();
            let e = moment_estimate(&m, &g, 4000, 5, 0).unwrap();
            let exact = uniform_entry_moment(20, u, &g).unwrap();
            assert!(
                (e.mean - exact).abs() <= 3.0 * e.stderr,
                "u={u} mean={} exact={exact}",
                e.mean
            );
        }
    }

    #[test]
    fn class_frequencies_sum_to_one() {
        let m = BalancedMatrixModel::iid(12, 0, vec![0, 1], vec![0.6, 0.4]).unwrap();
        let d = cokernel_class_distribution(&m, 2, 500, 3, 0, &[AbelianGroup::trivial()]).unwrap();
        let s: f64 = d.rows.iter().map(|r| r.frequency).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(d.row("0").is_some());
    }
}
