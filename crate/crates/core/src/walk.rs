//! Mixing bounds for time-inhomogeneous random walks along a chain of
//! quotients, compared against the exact walk distribution.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{convolve_exact, ExactMeasure};
use crate::group::{
    alternating_group_5, generated_subgroup, is_normal, quotient, same_group, subgroup_lattice, GroupRef, Homomorphism,
    PermutationGroup, Subgroup,
};
use crate::measure::{convolve_all, l2_distance, pushforward, SignedMeasure};
use crate::spectral::second_singular_value;

/// G = G₀ → G₁ → … → G_k = {e} with kernels H_j = ker Q_j ≤ G_{j−1}.
#[derive(Debug, Clone)]
pub struct QuotientChain {
    groups: Vec<GroupRef>,
    maps: Vec<Homomorphism>,
    composed: Vec<Homomorphism>,
    kernels: Vec<Subgroup>,
}

impl QuotientChain {
    /// Chain from explicit surjections Q₁, …, Q_k.
    pub fn from_maps(group: &GroupRef, maps: Vec<Homomorphism>) -> Result<QuotientChain> {
        let mut groups = vec![group.clone()];
        let mut composed = vec![Homomorphism::identity(group)];
        let mut kernels = Vec::new();
        for (j, q) in maps.iter().enumerate() {
            if !same_group(q.source(), groups.last().unwrap()) {
                return Err(Error::InvalidChain(format!(
                    "map {} does not start at the previous group",
                    j + 1
                )));
            }
            if !q.is_surjective() {
                return Err(Error::InvalidChain(format!("map {} is not surjective", j + 1)));
            }
            kernels.push(q.kernel());
            composed.push(composed.last().unwrap().then(q)?);
            groups.push(q.target().clone());
        }
        if groups.last().unwrap().order() != 1 {
            return Err(Error::InvalidChain("chain does not end at the trivial group".into()));
        }
        Ok(QuotientChain {
            groups,
            maps,
            composed,
            kernels,
        })
    }

    /// Chain G → G/N₁ → G/N₂ → … for an ascending tower of normal subgroups
    /// N₁ ⊊ N₂ ⊊ … ⊊ N_k = G.
    pub fn from_normal_tower(group: &GroupRef, tower: &[Subgroup]) -> Result<QuotientChain> {
        if tower.is_empty() {
            if group.order() == 1 {
                return Self::from_maps(group, Vec::new());
            }
            return Err(Error::InvalidChain("empty tower for a nontrivial group".into()));
        }
        let mut prev_group = group.clone();
        let mut prev_proj = Homomorphism::identity(group);
        let mut prev_sub = Subgroup::trivial(group);
        let mut maps = Vec::new();
        for (j, n) in tower.iter().enumerate() {
            if !same_group(n.parent(), group) {
                return Err(Error::GroupMismatch);
            }
            if !is_normal(group, n) {
                return Err(Error::InvalidChain(format!("tower member {} is not normal", j + 1)));
            }
            if !prev_sub.is_subgroup_of(n) || prev_sub.order() == n.order() {
                return Err(Error::InvalidChain(format!(
                    "tower member {} does not strictly contain the previous one",
                    j + 1
                )));
            }
            let (gj, pj) = quotient(group, n)?;
            // Q_j(p_{j−1}(g)) = p_j(g)
            let mut map = vec![usize::MAX; prev_group.order()];
            for g in 0..group.order() {
                map[prev_proj.apply(g)] = pj.apply(g);
            }
            maps.push(Homomorphism::new(&prev_group, &gj, map)?);
            prev_group = gj;
            prev_proj = pj;
            prev_sub = n.clone();
        }
        if !prev_sub.is_whole() {
            return Err(Error::InvalidChain("tower does not end at the whole group".into()));
        }
        Self::from_maps(group, maps)
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn groups(&self) -> &[GroupRef] {
        &self.groups
    }

    pub fn maps(&self) -> &[Homomorphism] {
        &self.maps
    }

    /// Q̃_j = Q_j ∘ … ∘ Q₁ for j = 0..k.
    pub fn composed(&self) -> &[Homomorphism] {
        &self.composed
    }

    /// H_j for j = 1..k (index j−1).
    pub fn kernels(&self) -> &[Subgroup] {
        &self.kernels
    }
}

/// Normal subgroups of G strictly between N and G, plus G itself.
fn normal_supergroups(group: &GroupRef, n: &Subgroup) -> Result<Vec<Subgroup>> {
    Ok(subgroup_lattice(group)?
        .subgroups()
        .iter()
        .filter(|h| n.is_subgroup_of(h) && h.order() > n.order() && is_normal(group, h))
        .cloned()
        .collect())
}

/// Greedy tower: at each stage take the largest proper normal subgroup above
/// the current one, or G when none is left. This is one of several valid
/// choices and has no canonical status.
pub fn greedy_normal_tower(group: &GroupRef) -> Result<Vec<Subgroup>> {
    let mut tower = Vec::new();
    let mut cur = Subgroup::trivial(group);
    while !cur.is_whole() {
        let cands = normal_supergroups(group, &cur)?;
        let next = cands
            .iter()
            .filter(|h| !h.is_whole())
            .max_by_key(|h| h.order())
            .cloned()
            .unwrap_or_else(|| Subgroup::whole(group));
        tower.push(next.clone());
        cur = next;
    }
    Ok(tower)
}

pub fn greedy_chain(group: &GroupRef) -> Result<QuotientChain> {
    QuotientChain::from_normal_tower(group, &greedy_normal_tower(group)?)
}

/// A random ascending normal tower ending at G.
pub fn random_normal_tower<R: Rng + ?Sized>(group: &GroupRef, rng: &mut R) -> Result<Vec<Subgroup>> {
    let mut tower = Vec::new();
    let mut cur = Subgroup::trivial(group);
    while !cur.is_whole() {
        let cands = normal_supergroups(group, &cur)?;
        let next = cands[rng.random_range(0..cands.len())].clone();
        tower.push(next.clone());
        cur = next;
    }
    Ok(tower)
}

#[derive(Debug, Clone)]
pub struct WalkInstance {
    group: GroupRef,
    steps: Vec<SignedMeasure>,
}

impl WalkInstance {
    pub fn new(group: &GroupRef, steps: Vec<SignedMeasure>) -> Result<WalkInstance> {
        for s in &steps {
            if !same_group(s.group(), group) {
                return Err(Error::GroupMismatch);
            }
            s.require_probability()?;
        }
        Ok(WalkInstance {
            group: group.clone(),
            steps,
        })
    }

    pub fn group(&self) -> &GroupRef {
        &self.group
    }

    pub fn steps(&self) -> &[SignedMeasure] {
        &self.steps
    }

    pub fn push(&mut self, step: SignedMeasure) -> Result<()> {
        if !same_group(step.group(), &self.group) {
            return Err(Error::GroupMismatch);
        }
        step.require_probability()?;
        self.steps.push(step);
        Ok(())
    }

    /// ν_n = μ₁ ∗ … ∗ μ_n
    pub fn distribution(&self) -> Result<SignedMeasure> {
        convolve_all(&self.group, &self.steps)
    }
}

/// ||ν_n − π||² for the exact walk distribution.
pub fn exact_walk_distance(w: &WalkInstance) -> Result<f64> {
    let nu = w.distribution()?;
    Ok(l2_distance(&nu, &SignedMeasure::uniform(&w.group))?.powi(2))
}

/// I_j = { i : ⟨supp (Q̃_{j−1})_* μ_i⟩ = H_j } for j = 1..k, as 0-based step
/// indices (entry j−1 of the result).
pub fn classify_steps(w: &WalkInstance, chain: &QuotientChain) -> Result<Vec<Vec<usize>>> {
    check_chain(w, chain)?;
    let mut out = Vec::with_capacity(chain.len());
    for j in 0..chain.len() {
        let q = &chain.composed[j];
        let hj = &chain.kernels[j];
        let mut ij = Vec::new();
        for (i, mu) in w.steps.iter().enumerate() {
            let pushed = pushforward(q, mu)?;
            if generated_subgroup(pushed.group(), &pushed.support())? == *hj {
                ij.push(i);
            }
        }
        out.push(ij);
    }
    Ok(out)
}

fn check_chain(w: &WalkInstance, chain: &QuotientChain) -> Result<()> {
    if !same_group(&chain.groups[0], &w.group) {
        return Err(Error::ChainMismatch("chain does not start at the walk's group".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelReport {
    /// 1-based level j.
    pub level: usize,
    /// |G_{j−1}|
    pub group_order: usize,
    /// |H_j|
    pub kernel_order: usize,
    /// I_j as 0-based step indices.
    pub steps: Vec<usize>,
    /// σ_i for i ∈ I_j, same order as `steps`.
    pub sigmas: Vec<f64>,
    /// Π_{i∈I_j} σ_i²
    pub sigma_sq_product: f64,
    /// ((|G_{j−1}|−1)/|G|) · Π σ_i²
    pub contribution: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub lhs: f64,
    /// +∞ when some I_j is empty.
    pub rhs: f64,
    pub feasible: bool,
    pub levels: Vec<LevelReport>,
    /// (Σ_j Π_{i ∈ I_{H_j}} σ_i)² for the subgroup-family form, when computed.
    pub family_bound: Option<f64>,
}

impl BoundReport {
    /// Level j ↦ I_j.
    pub fn step_classification(&self) -> Vec<Vec<usize>> {
        self.levels.iter().map(|l| l.steps.clone()).collect()
    }

    /// (level, step, σ) triples.
    pub fn per_step_sigma(&self) -> Vec<(usize, usize, f64)> {
        self.levels
            .iter()
            .flat_map(|l| l.steps.iter().zip(&l.sigmas).map(move |(&i, &s)| (l.level, i, s)))
            .collect()
    }

    pub fn holds(&self, tol: f64) -> bool {
        !self.feasible || self.lhs <= self.rhs + tol
    }
}

/// Evaluates Σ_j ((|G_{j−1}|−1)/|G|) Π_{i∈I_j} σ_i² against the exact distance.
pub fn strong_walk_bound(w: &WalkInstance, chain: &QuotientChain) -> Result<BoundReport> {
    let classes = classify_steps(w, chain)?;
    let g_order = w.group.order() as f64;
    let mut levels = Vec::with_capacity(chain.len());
    let mut rhs = 0.0;
    let mut feasible = true;
    for (j, ij) in classes.into_iter().enumerate() {
        let q = &chain.composed[j];
        let mut sigmas = Vec::with_capacity(ij.len());
        for &i in &ij {
            let pushed = pushforward(q, &w.steps[i])?;
            // ⟨supp⟩ = H_j here, so this is the operator on L²(H_j)
            sigmas.push(second_singular_value(&pushed)?.second_largest);
        }
        let prod: f64 = sigmas.iter().map(|s| s * s).product();
        let gj = chain.groups[j].order();
        let contribution = (gj as f64 - 1.0) / g_order * prod;
        if ij.is_empty() {
            feasible = false;
        }
        rhs += contribution;
        levels.push(LevelReport {
            level: j + 1,
            group_order: gj,
            kernel_order: chain.kernels[j].order(),
            steps: ij,
            sigmas,
            sigma_sq_product: prod,
            contribution,
        });
    }
    Ok(BoundReport {
        lhs: exact_walk_distance(w)?,
        rhs: if feasible { rhs } else { f64::INFINITY },
        feasible,
        levels,
        family_bound: None,
    })
}

/// Bound for an ordered family H₁, …, H_k whose running products are normal.
///
/// Builds G → G/H₁ → G/H₁H₂ → … and evaluates the chain bound there, and also
/// reports (Σ_j Π_{i∈I_{H_j}} σ_i)² where I_{H_j} = { i : ⟨supp μ_i⟩ = H_j } and
/// σ_i is taken on ⟨supp μ_i⟩ in G.
pub fn normal_family_bound(w: &WalkInstance, family: &[Subgroup]) -> Result<BoundReport> {
    let g = &w.group;
    for h in family {
        if !same_group(h.parent(), g) {
            return Err(Error::GroupMismatch);
        }
    }
    let union: Vec<usize> = family.iter().flat_map(|h| h.elements().iter().copied()).collect();
    if !generated_subgroup(g, &union)?.is_whole() {
        return Err(Error::NotGenerating);
    }
    // Running products P_j = H₁⋯H_j; P_j normal in G ⇔ image of H_j normal in G/P_{j−1}.
    let mut tower: Vec<Subgroup> = Vec::new();
    let mut cur = Subgroup::trivial(g);
    for (index, h) in family.iter().enumerate() {
        let mut gens = cur.elements().to_vec();
        gens.extend_from_slice(h.elements());
        let next = generated_subgroup(g, &gens)?;
        if !is_normal(g, &next) {
            return Err(Error::NotNormalInQuotient { index });
        }
        if next.order() > cur.order() {
            tower.push(next.clone());
        }
        cur = next;
    }
    let chain = QuotientChain::from_normal_tower(g, &tower)?;
    let mut report = strong_walk_bound(w, &chain)?;

    let supports: Vec<Subgroup> = w
        .steps
        .iter()
        .map(|m| generated_subgroup(g, &m.support()))
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut all_nonempty = true;
    for h in family {
        let members: Vec<usize> = (0..w.steps.len()).filter(|&i| supports[i] == *h).collect();
        if members.is_empty() {
            all_nonempty = false;
        }
        let mut prod = 1.0;
        for i in members {
            prod *= second_singular_value(&w.steps[i])?.second_largest;
        }
        total += prod;
    }
    report.family_bound = Some(if all_nonempty { total * total } else { f64::INFINITY });
    Ok(report)
}

/// Random steps for a tower N₁ ⊊ … ⊊ N_k = G: for every level, `per_level`
/// steps supported in N_j whose supports together with N_{j−1} generate N_j,
/// plus `noise` unrestricted steps, in shuffled order.
pub fn random_feasible_instance<R: Rng + ?Sized>(
    group: &GroupRef,
    tower: &[Subgroup],
    per_level: usize,
    noise: usize,
    rng: &mut R,
) -> Result<WalkInstance> {
    let mut steps = Vec::new();
    let mut below = Subgroup::trivial(group);
    for n in tower {
        for _ in 0..per_level.max(1) {
            steps.push(random_step_generating(group, &below, n, rng)?);
        }
        below = n.clone();
    }
    for _ in 0..noise {
        let k = rng.random_range(1..=3.min(group.order()));
        let support: Vec<usize> = (0..k).map(|_| rng.random_range(0..group.order())).collect();
        steps.push(random_weights(group, &support, rng)?);
    }
    steps.shuffle(rng);
    WalkInstance::new(group, steps)
}

/// A probability measure supported in `top` whose support together with
/// `below` generates `top`.
fn random_step_generating<R: Rng + ?Sized>(
    group: &GroupRef,
    below: &Subgroup,
    top: &Subgroup,
    rng: &mut R,
) -> Result<SignedMeasure> {
    let elems = top.elements();
    let mut support: Vec<usize> = Vec::new();
    loop {
        let mut gens = below.elements().to_vec();
        gens.extend_from_slice(&support);
        if generated_subgroup(group, &gens)?.order() == top.order() && !support.is_empty() {
            break;
        }
        let x = elems[rng.random_range(0..elems.len())];
        if !below.contains(x) || rng.random_bool(0.3) {
            support.push(x);
        }
    }
    if rng.random_bool(0.5) {
        support.push(0);
    }
    for _ in 0..rng.random_range(0..3) {
        support.push(elems[rng.random_range(0..elems.len())]);
    }
    random_weights(group, &support, rng)
}

fn random_weights<R: Rng + ?Sized>(group: &GroupRef, support: &[usize], rng: &mut R) -> Result<SignedMeasure> {
    let raw: Vec<f64> = support.iter().map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let pairs: Vec<(usize, f64)> = support.iter().zip(&raw).map(|(&g, &w)| (g, w / s)).collect();
    SignedMeasure::from_pairs(group, &pairs)
}

// ---------------------------------------------------------------------------
// Named instances

/// The dihedral walk: odd steps μ on ⟨r⟩, even steps {e: 1−p, s: p}; `k`
/// pairs of steps. Returns the walk and the chain D_{2n} → ℤ/2 → 1.
pub fn dihedral_instance(n: usize, mu_rot: &[(usize, f64)], p: f64, k: usize) -> Result<(WalkInstance, QuotientChain)> {
    let g = crate::group::dihedral_group(n);
    let rot = SignedMeasure::from_pairs(&g, mu_rot)?;
    if rot.support().iter().any(|&x| x >= n) {
        return Err(Error::InvalidArgument("rotation step must be supported on ⟨r⟩".into()));
    }
    let flip = SignedMeasure::from_pairs(&g, &[(0, 1.0 - p), (n, p)])?;
    let mut steps = Vec::with_capacity(2 * k);
    for _ in 0..k {
        steps.push(rot.clone());
        steps.push(flip.clone());
    }
    let r = generated_subgroup(&g, &[1])?;
    let chain = QuotientChain::from_normal_tower(&g, &[r, Subgroup::whole(&g)])?;
    Ok((WalkInstance::new(&g, steps)?, chain))
}

/// A₅ with the three steps uniform on ⟨(1 2 3)⟩, ⟨(1 2 4)⟩, ⟨(1 2 5)⟩.
pub fn a5_instance() -> Result<(PermutationGroup, WalkInstance, Vec<Subgroup>)> {
    let a5 = alternating_group_5();
    let g = a5.group().clone();
    let subs: Vec<Subgroup> = [[1usize, 2, 3], [1, 2, 4], [1, 2, 5]]
        .iter()
        .map(|c| {
            let x = a5.element_from_cycles(&[c]).expect("3-cycle lies in A5");
            generated_subgroup(&g, &[x])
        })
        .collect::<Result<_>>()?;
    let steps = subs.iter().map(SignedMeasure::uniform_on).collect();
    let w = WalkInstance::new(&g, steps)?;
    Ok((a5, w, subs))
}

/// Exact P[X₁X₂X₃ sends 3 to 4] for the A₅ instance.
pub fn a5_counterexample_exact() -> Result<BigRational> {
    let (a5, _, subs) = a5_instance()?;
    let g = a5.group();
    let mut nu = ExactMeasure::dirac(g, 0)?;
    for h in &subs {
        nu = convolve_exact(&nu, &ExactMeasure::uniform_on(h))?;
    }
    Ok(nu.mass_of((0..g.order()).filter(|&x| a5.act(x, 3) == 4)))
}

pub fn a5_counterexample_probability() -> Result<f64> {
    Ok(a5_counterexample_exact()?.to_f64().unwrap_or(f64::NAN))
}

/// Σ_{g(3)=4} π(g) on A₅.
pub fn a5_uniform_reference() -> f64 {
    let a5 = alternating_group_5();
    let n = a5.group().order();
    (0..n).filter(|&x| a5.act(x, 3) == 4).count() as f64 / n as f64
}
