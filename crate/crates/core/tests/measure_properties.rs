use cokerwalk::group::{
    abelian_group_from_factors, alternating_group, cyclic_group, dihedral_group, is_normal, quaternion_group, quotient,
    subgroup_lattice, symmetric_group, GroupRef, Subgroup,
};
use cokerwalk::measure::{convolve, is_coset_uniform, project_coset_uniform, pushforward, SignedMeasure};
use proptest::prelude::*;

fn groups() -> Vec<GroupRef> {
    vec![
        cyclic_group(5),
        cyclic_group(12),
        abelian_group_from_factors(&[2, 2, 2]),
        abelian_group_from_factors(&[2, 6]),
        dihedral_group(3),
        dihedral_group(4),
        dihedral_group(6),
        dihedral_group(12),
        quaternion_group(),
        alternating_group(4).group().clone(),
        symmetric_group(4).group().clone(),
    ]
}

/// (group, probability weights, signed weights, signed weights); all |G| ≤ 24.
fn instance() -> impl Strategy<Value = (GroupRef, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (
        0..groups().len(),
        prop::collection::vec(0.0f64..1.0, 24),
        prop::collection::vec(prop::bool::weighted(0.6), 24),
        prop::collection::vec(-1.0f64..1.0, 24),
        prop::collection::vec(-1.0f64..1.0, 24),
    )
        .prop_map(|(gi, raw, keep, s1, s2)| {
            let g = groups()[gi].clone();
            let n = g.order();
            let mut p: Vec<f64> = (0..n).map(|i| if keep[i] { raw[i] } else { 0.0 }).collect();
            if p.iter().sum::<f64>() == 0.0 {
                p[0] = 1.0;
            }
            let t: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= t);
            (g, p, s1[..n].to_vec(), s2[..n].to_vec())
        })
}

fn subgroups(g: &GroupRef, normal_only: bool) -> Vec<Subgroup> {
    subgroup_lattice(g)
        .unwrap()
        .subgroups()
        .iter()
        .filter(|h| !normal_only || is_normal(g, h))
        .cloned()
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn convolution_by_a_probability_is_non_expansive((g, p, s, _) in instance()) {
        let mu = SignedMeasure::probability(&g, p).unwrap();
        let nu = SignedMeasure::new(&g, s).unwrap();
        prop_assert!(convolve(&nu, &mu).unwrap().l2_norm() <= nu.l2_norm() + 1e-9);
    }
}

proptest! {
    #[test]
    fn normal_subgroups_preserve_coset_uniform_measures((g, p, s, _) in instance(), hi in any::<prop::sample::Index>()) {
        let normals = subgroups(&g, true);
        let h = &normals[hi.index(normals.len())];
        let mu = SignedMeasure::probability(&g, p).unwrap();
        let nu = project_coset_uniform(&SignedMeasure::new(&g, s).unwrap(), h).unwrap().projected;
        prop_assert!(is_coset_uniform(&nu, h, 1e-12));
        prop_assert!(is_coset_uniform(&convolve(&nu, &mu).unwrap(), h, 1e-9));
    }

    #[test]
    fn pushforward_to_a_quotient_is_multiplicative((g, p, _, _) in instance(), q in prop::collection::vec(0.0f64..1.0, 24), hi in any::<prop::sample::Index>()) {
        let normals = subgroups(&g, true);
        let h = &normals[hi.index(normals.len())];
        let (_, proj) = quotient(&g, h).unwrap();
        let mu = SignedMeasure::probability(&g, p).unwrap();
        let qn: Vec<f64> = q[..g.order()].iter().map(|x| x + 0.01).collect();
        let t: f64 = qn.iter().sum();
        let nu = SignedMeasure::probability(&g, qn.iter().map(|x| x / t).collect()).unwrap();
        let lhs = pushforward(&proj, &convolve(&mu, &nu).unwrap()).unwrap();
        let rhs = convolve(&pushforward(&proj, &mu).unwrap(), &pushforward(&proj, &nu).unwrap()).unwrap();
        for (a, b) in lhs.weights().iter().zip(rhs.weights()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn scaled_pushforward_is_an_isometry_on_coset_uniform_measures((g, _, s, _) in instance(), hi in any::<prop::sample::Index>()) {
        let normals = subgroups(&g, true);
        let h = &normals[hi.index(normals.len())];
        let (_, proj) = quotient(&g, h).unwrap();
        let nu = project_coset_uniform(&SignedMeasure::new(&g, s).unwrap(), h).unwrap().projected;
        let pushed = pushforward(&proj, &nu).unwrap().l2_norm() / (h.order() as f64).sqrt();
        prop_assert!((nu.l2_norm() - pushed).abs() <= 1e-9);
    }

    #[test]
    fn projection_is_the_nearest_coset_uniform_measure((g, p, _, _) in instance(), hi in any::<prop::sample::Index>(), seeds in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 24), 100)) {
        let subs = subgroups(&g, false);
        let h = &subs[hi.index(subs.len())];
        let mu = SignedMeasure::probability(&g, p).unwrap();
        let proj = project_coset_uniform(&mu, h).unwrap();
        for w in seeds {
            let w = project_coset_uniform(&SignedMeasure::new(&g, w[..g.order()].to_vec()).unwrap(), h).unwrap().projected;
            prop_assert!(proj.residual_norm <= mu.sub(&w).unwrap().l2_norm() + 1e-12);
        }
    }
}
