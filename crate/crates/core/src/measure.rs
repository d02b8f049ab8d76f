//! Signed measures on a finite group: convolution, pushforward, L² geometry and
//! projection onto measures uniform on left cosets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{left_coset_map, left_cosets, same_group, GroupRef, Homomorphism, Subgroup};

/// Tolerance for measure identities.
pub const TOL: f64 = 1e-9;
/// Negative weights above this threshold are clamped to zero for probability measures.
pub const NEG_CLAMP: f64 = 1e-12;

/// A real-valued function on the elements of a group.
#[derive(Debug, Clone)]
pub struct SignedMeasure {
    group: GroupRef,
    weights: Vec<f64>,
}

/// Serialized form. `group_ref` names a group known to the caller.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureJson {
    pub group_ref: String,
    pub weights: Vec<f64>,
}

impl SignedMeasure {
    pub fn new(group: &GroupRef, weights: Vec<f64>) -> Result<SignedMeasure> {
        if weights.len() != group.order() {
            return Err(Error::InvalidMeasure(format!(
                "{} weights for a group of order {}",
                weights.len(),
                group.order()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!("weight {i} is not finite")));
        }
        Ok(SignedMeasure {
            group: group.clone(),
            weights,
        })
    }

    /// Validates a probability measure, clamping tiny negative weights.
    pub fn probability(group: &GroupRef, weights: Vec<f64>) -> Result<SignedMeasure> {
        let mut m = Self::new(group, weights)?;
        m.normalize_probability()?;
        Ok(m)
    }

    fn normalize_probability(&mut self) -> Result<()> {
        for (i, w) in self.weights.iter_mut().enumerate() {
            if *w < 0.0 {
                if *w < -NEG_CLAMP {
                    return Err(Error::NotProbability(format!("weight {i} is {w}")));
                }
                *w = 0.0;
            }
        }
        let mass = self.mass();
        if (mass - 1.0).abs() > TOL {
            return Err(Error::NotProbability(format!("total mass {mass}")));
        }
        Ok(())
    }

    /// Probability measure from (element, weight) pairs; repeated elements add.
    pub fn from_pairs(group: &GroupRef, pairs: &[(usize, f64)]) -> Result<SignedMeasure> {
        let mut w = vec![0.0; group.order()];
        for &(g, p) in pairs {
            group.check_element(g)?;
            w[g] += p;
        }
        Self::probability(group, w)
    }

    pub fn dirac(group: &GroupRef, g: usize) -> Result<SignedMeasure> {
        group.check_element(g)?;
        let mut w = vec![0.0; group.order()];
        w[g] = 1.0;
        Ok(SignedMeasure {
            group: group.clone(),
            weights: w,
        })
    }

    pub fn uniform(group: &GroupRef) -> SignedMeasure {
        let n = group.order();
        SignedMeasure {
            group: group.clone(),
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Uniform probability on a subgroup, as a measure on the parent group.
    pub fn uniform_on(h: &Subgroup) -> SignedMeasure {
        let mut w = vec![0.0; h.parent().order()];
        let p = 1.0 / h.order() as f64;
        for &x in h.elements() {
            w[x] = p;
        }
        SignedMeasure {
            group: h.parent().clone(),
            weights: w,
        }
    }

    pub fn zero(group: &GroupRef) -> SignedMeasure {
        SignedMeasure {
            group: group.clone(),
            weights: vec![0.0; group.order()],
        }
    }

    pub fn group(&self) -> &GroupRef {
        &self.group
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, g: usize) -> f64 {
        self.weights[g]
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Elements with nonzero weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&g| self.weights[g] != 0.0).collect()
    }

    pub fn is_probability(&self) -> bool {
        self.weights.iter().all(|&w| w >= -NEG_CLAMP) && (self.mass() - 1.0).abs() <= TOL
    }

    pub fn require_probability(&self) -> Result<()> {
        if self.is_probability() {
            Ok(())
        } else {
            Err(Error::NotProbability(format!(
                "mass {} or negative weight",
                self.mass()
            )))
        }
    }

    fn check_same(&self, other: &SignedMeasure) -> Result<()> {
        if same_group(&self.group, &other.group) {
            Ok(())
        } else {
            Err(Error::GroupMismatch)
        }
    }

    pub fn add(&self, other: &SignedMeasure) -> Result<SignedMeasure> {
        self.check_same(other)?;
        Ok(self.zip(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &SignedMeasure) -> Result<SignedMeasure> {
        self.check_same(other)?;
        Ok(self.zip(other, |a, b| a - b))
    }

    pub fn scale(&self, c: f64) -> SignedMeasure {
        SignedMeasure {
            group: self.group.clone(),
            weights: self.weights.iter().map(|w| w * c).collect(),
        }
    }

    fn zip(&self, other: &SignedMeasure, f: impl Fn(f64, f64) -> f64) -> SignedMeasure {
        SignedMeasure {
            group: self.group.clone(),
            weights: self
                .weights
                .iter()
                .zip(&other.weights)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn to_json(&self, group_ref: &str) -> MeasureJson {
        MeasureJson {
            group_ref: group_ref.to_string(),
            weights: self.weights.clone(),
        }
    }

    /// Restriction to a subgroup, as a measure on the subgroup realized as its
    /// own group (element order = sorted parent indices).
    pub fn restrict(&self, h: &Subgroup) -> Result<(SignedMeasure, GroupRef)> {
        if !same_group(&self.group, h.parent()) {
            return Err(Error::GroupMismatch);
        }
        let (hg, incl) = h.as_group();
        let w = incl.iter().map(|&g| self.weights[g]).collect();
        Ok((
            SignedMeasure {
                group: hg.clone(),
                weights: w,
            },
            hg,
        ))
    }
}

/// (μ∗ν)(g) = Σ_h μ(h) ν(h⁻¹g)
pub fn convolve(mu: &SignedMeasure, nu: &SignedMeasure) -> Result<SignedMeasure> {
    mu.check_same(nu)?;
    let g = &mu.group;
    let n = g.order();
    let mut out = vec![0.0; n];
    let nu_support: Vec<usize> = nu.support();
    for h in 0..n {
        let a = mu.weights[h];
        if a == 0.0 {
            continue;
        }
        let row = g.table_row(h);
        for &k in &nu_support {
            out[row[k]] += a * nu.weights[k];
        }
    }
    Ok(SignedMeasure {
        group: g.clone(),
        weights: out,
    })
}

/// μ₁ ∗ μ₂ ∗ … ∗ μ_n folded left to right from δ_e.
pub fn convolve_all(group: &GroupRef, steps: &[SignedMeasure]) -> Result<SignedMeasure> {
    let mut nu = SignedMeasure::dirac(group, 0)?;
    for s in steps {
        nu = convolve(&nu, s)?;
    }
    Ok(nu)
}

/// f_*μ(t) = μ(f⁻¹(t))
pub fn pushforward(f: &Homomorphism, mu: &SignedMeasure) -> Result<SignedMeasure> {
    if !same_group(f.source(), &mu.group) {
        return Err(Error::GroupMismatch);
    }
    let mut w = vec![0.0; f.target().order()];
    for (g, &x) in mu.weights.iter().enumerate() {
        w[f.apply(g)] += x;
    }
    Ok(SignedMeasure {
        group: f.target().clone(),
        weights: w,
    })
}

/// Pushforward along the set map G → G/H onto left cosets, indexed as in
/// [`left_cosets`].
pub fn pushforward_to_cosets(mu: &SignedMeasure, h: &Subgroup) -> Result<Vec<f64>> {
    if !same_group(&mu.group, h.parent()) {
        return Err(Error::GroupMismatch);
    }
    let map = left_coset_map(&mu.group, h);
    let mut w = vec![0.0; mu.group.order() / h.order()];
    for (g, &x) in mu.weights.iter().enumerate() {
        w[map[g]] += x;
    }
    Ok(w)
}

pub fn l2_distance(mu: &SignedMeasure, nu: &SignedMeasure) -> Result<f64> {
    mu.check_same(nu)?;
    Ok(mu
        .weights
        .iter()
        .zip(&nu.weights)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

pub fn l2_norm(mu: &SignedMeasure) -> f64 {
    mu.l2_norm()
}

/// Orthogonal projection onto measures uniform on each left coset of H.
#[derive(Debug, Clone)]
pub struct SubspaceProjection {
    pub subgroup: Subgroup,
    pub projected: SignedMeasure,
    pub residual_norm: f64,
}

pub fn project_coset_uniform(mu: &SignedMeasure, h: &Subgroup) -> Result<SubspaceProjection> {
    if !same_group(&mu.group, h.parent()) {
        return Err(Error::GroupMismatch);
    }
    let mut w = vec![0.0; mu.group.order()];
    let k = h.order() as f64;
    for coset in left_cosets(&mu.group, h) {
        let m: f64 = coset.iter().map(|&g| mu.weights[g]).sum::<f64>() / k;
        for &g in &coset {
            w[g] = m;
        }
    }
    let projected = SignedMeasure {
        group: mu.group.clone(),
        weights: w,
    };
    let residual_norm = l2_distance(mu, &projected)?;
    Ok(SubspaceProjection {
        subgroup: h.clone(),
        projected,
        residual_norm,
    })
}

/// Whether ν is constant on every left coset of H, to tolerance `tol`.
pub fn is_coset_uniform(nu: &SignedMeasure, h: &Subgroup, tol: f64) -> bool {
    left_cosets(&nu.group, h).iter().all(|c| {
        let v = nu.weights[c[0]];
        c.iter().all(|&g| (nu.weights[g] - v).abs() <= tol)
    })
}

/// The two summands of ||μ−π||² = (1/|H|)||P_*μ − P_*π||² + d(μ, 𝓜_H)².
pub fn l2_decomposition_check(mu: &SignedMeasure, h: &Subgroup) -> Result<(f64, f64)> {
    let pi = SignedMeasure::uniform(&mu.group);
    let pm = pushforward_to_cosets(mu, h)?;
    let pp = pushforward_to_cosets(&pi, h)?;
    let quotient_part = pm.iter().zip(&pp).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / h.order() as f64;
    let residual = project_coset_uniform(mu, h)?.residual_norm;
    let total = l2_distance(mu, &pi)?.powi(2);
    let residual_part = residual * residual;
    let scale = total.abs().max(1.0);
    if (quotient_part + residual_part - total).abs() > TOL * scale {
        return Err(Error::InvalidMeasure(format!(
            "decomposition mismatch: {quotient_part} + {residual_part} != {total}"
        )));
    }
    Ok((quotient_part, residual_part))
}
