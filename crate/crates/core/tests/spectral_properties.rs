use cokerwalk::group::{
    abelian_group_from_factors, alternating_group, cyclic_group, dihedral_group, generated_subgroup, is_normal,
    quaternion_group, quotient, subgroup_lattice, symmetric_group, GroupRef,
};
use cokerwalk::measure::{convolve, pushforward, SignedMeasure};
use cokerwalk::spectral::{convolution_matrix, second_singular_value, second_singular_value_on_group, singular_values};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn groups() -> Vec<GroupRef> {
    vec![
        cyclic_group(6),
        cyclic_group(9),
        abelian_group_from_factors(&[2, 4]),
        abelian_group_from_factors(&[3, 3]),
        dihedral_group(4),
        dihedral_group(5),
        quaternion_group(),
        alternating_group(4).group().clone(),
        symmetric_group(4).group().clone(),
    ]
}

fn probability() -> impl Strategy<Value = (GroupRef, Vec<f64>)> {
    (
        0..groups().len(),
        prop::collection::vec(0.0f64..1.0, 24),
        prop::collection::vec(prop::bool::weighted(0.4), 24),
    )
        .prop_map(|(gi, raw, keep)| {
            let g = groups()[gi].clone();
            let mut p: Vec<f64> = (0..g.order())
                .map(|i| if keep[i] { raw[i] + 0.01 } else { 0.0 })
                .collect();
            if p.iter().all(|&x| x == 0.0) {
                p[1 % g.order()] = 1.0;
            }
            let t: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= t);
            (g, p)
        })
}

proptest! {
    #[test]
    fn top_singular_value_is_one_and_uniform_is_fixed((g, p) in probability()) {
        let mu = SignedMeasure::probability(&g, p).unwrap();
        let m = convolution_matrix(&mu);
        let sv = singular_values(&m).unwrap();
        prop_assert!((sv[0] - 1.0).abs() <= 1e-8);
        let n = g.order();
        let oracle = DMatrix::from_fn(n, n, |i, j| m.get(i, j));
        let mut expect: Vec<f64> = oracle.singular_values().iter().copied().collect();
        expect.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in sv.iter().zip(&expect) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        let pi = SignedMeasure::uniform(&g);
        let out = convolve(&pi, &mu).unwrap();
        for w in out.weights() {
            prop_assert!((w - 1.0 / n as f64).abs() <= 1e-12);
        }
    }

    #[test]
    fn operator_contracts_mass_zero_differences(
        (g, p) in probability(),
        a in prop::collection::vec(-1.0f64..1.0, 24),
        b in prop::collection::vec(-1.0f64..1.0, 24),
    ) {
        let mu = SignedMeasure::probability(&g, p).unwrap();
        let rep = second_singular_value(&mu).unwrap();
        let h = rep.subgroup_used.clone();
        // ν, ν′ supported on H with equal total mass
        let mut nu = vec![0.0; g.order()];
        let mut nu2 = vec![0.0; g.order()];
        for (k, &x) in h.elements().iter().enumerate() {
            nu[x] = a[k];
            nu2[x] = b[k];
        }
        let shift = (nu.iter().sum::<f64>() - nu2.iter().sum::<f64>()) / h.order() as f64;
        for &x in h.elements() {
            nu2[x] += shift;
        }
        let nu = SignedMeasure::new(&g, nu).unwrap();
        let nu2 = SignedMeasure::new(&g, nu2).unwrap();
        let lhs = convolve(&nu, &mu).unwrap().sub(&convolve(&nu2, &mu).unwrap()).unwrap().l2_norm();
        prop_assert!(lhs <= rep.second_largest * nu.sub(&nu2).unwrap().l2_norm() + 1e-8);
    }

    #[test]
    fn quotients_do_not_increase_sigma((g, p) in probability(), ni in any::<prop::sample::Index>()) {
        let lat = subgroup_lattice(&g).unwrap();
        let normals: Vec<_> = lat.subgroups().iter().filter(|h| is_normal(&g, h)).cloned().collect();
        let n = &normals[ni.index(normals.len())];
        let (_, proj) = quotient(&g, n).unwrap();
        let mu = SignedMeasure::probability(&g, p).unwrap();
        let pushed = pushforward(&proj, &mu).unwrap();
        let s = second_singular_value(&mu).unwrap().second_largest;
        let sq = second_singular_value(&pushed).unwrap().second_largest;
        prop_assert!(sq <= s + 1e-8);
    }

    #[test]
    fn support_in_a_proper_subgroup_gives_sigma_one((g, p) in probability()) {
        let mu = SignedMeasure::probability(&g, p).unwrap();
        let h = generated_subgroup(&g, &mu.support()).unwrap();
        let s = second_singular_value_on_group(&mu).unwrap();
        if !h.is_whole() {
            prop_assert!((s - 1.0).abs() <= 1e-8);
        } else {
            prop_assert!(s <= 1.0 + 1e-8);
        }
    }
}
