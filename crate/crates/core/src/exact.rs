//! Exact rational measures for checks that must not depend on rounding.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::group::{same_group, GroupRef, Subgroup};

#[derive(Debug, Clone, PartialEq)]
pub struct ExactMeasure {
    group: GroupRef,
    weights: Vec<BigRational>,
}

impl ExactMeasure {
    pub fn new(group: &GroupRef, weights: Vec<BigRational>) -> Result<ExactMeasure> {
        if weights.len() != group.order() {
            return Err(Error::InvalidMeasure(format!(
                "{} weights for a group of order {}",
                weights.len(),
                group.order()
            )));
        }
        Ok(ExactMeasure {
            group: group.clone(),
            weights,
        })
    }

    pub fn dirac(group: &GroupRef, g: usize) -> Result<ExactMeasure> {
        group.check_element(g)?;
        let mut w = vec![BigRational::zero(); group.order()];
        w[g] = BigRational::one();
        Ok(ExactMeasure {
            group: group.clone(),
            weights: w,
        })
    }

    pub fn uniform(group: &GroupRef) -> ExactMeasure {
        let p = BigRational::new(BigInt::one(), BigInt::from(group.order()));
        ExactMeasure {
            group: group.clone(),
            weights: vec![p; group.order()],
        }
    }

    pub fn uniform_on(h: &Subgroup) -> ExactMeasure {
        let p = BigRational::new(BigInt::one(), BigInt::from(h.order()));
        let mut w = vec![BigRational::zero(); h.parent().order()];
        for &x in h.elements() {
            w[x] = p.clone();
        }
        ExactMeasure {
            group: h.parent().clone(),
            weights: w,
        }
    }

    pub fn group(&self) -> &GroupRef {
        &self.group
    }

    pub fn weights(&self) -> &[BigRational] {
        &self.weights
    }

    pub fn mass(&self) -> BigRational {
        self.weights.iter().fold(BigRational::zero(), |a, b| a + b)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        use num_traits::ToPrimitive;
        self.weights.iter().map(|w| w.to_f64().unwrap_or(f64::NAN)).collect()
    }

    /// Σ_{g ∈ set} μ(g)
    pub fn mass_of(&self, set: impl IntoIterator<Item = usize>) -> BigRational {
        set.into_iter().fold(BigRational::zero(), |a, g| a + &self.weights[g])
    }
}

/// (μ∗ν)(g) = Σ_h μ(h) ν(h⁻¹g), exactly.
pub fn convolve_exact(mu: &ExactMeasure, nu: &ExactMeasure) -> Result<ExactMeasure> {
    if !same_group(&mu.group, &nu.group) {
        return Err(Error::GroupMismatch);
    }
    let g = &mu.group;
    let n = g.order();
    let mut out = vec![BigRational::zero(); n];
    for h in 0..n {
        if mu.weights[h].is_zero() {
            continue;
        }
        for k in 0..n {
            if nu.weights[k].is_zero() {
                continue;
            }
            out[g.mul(h, k)] += &mu.weights[h] * &nu.weights[k];
        }
    }
    Ok(ExactMeasure {
        group: g.clone(),
        weights: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{cyclic_group, dihedral_group, generated_subgroup};
    use crate::measure::{convolve, SignedMeasure};

    #[test]
    fn exact_matches_float() {
        let g = dihedral_group(5);
        let h = generated_subgroup(&g, &[1, 5]).unwrap();
        let k = generated_subgroup(&g, &[5]).unwrap();
        let e = convolve_exact(&ExactMeasure::uniform_on(&h), &ExactMeasure::uniform_on(&k)).unwrap();
        let f = convolve(&SignedMeasure::uniform_on(&h), &SignedMeasure::uniform_on(&k)).unwrap();
        for (a, b) in e.to_f64().iter().zip(f.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(e.mass(), BigRational::one());
    }

    #[test]
    fn uniform_absorbs() {
        let g = cyclic_group(7);
        let u = ExactMeasure::uniform(&g);
        let d = ExactMeasure::dirac(&g, 3).unwrap();
        assert_eq!(convolve_exact(&d, &u).unwrap(), u);
    }
}
