mod common;

use cokerwalk::abelian::{hom_count, lambda_p_mass, partitions, sur_count, tensor_mod, PartitionType};
use cokerwalk::group::{abelian_group_from_factors, subgroup_lattice};
use cokerwalk::intlinalg::{cokernel, smith_normal_form};
use cokerwalk::{AbelianGroup, IntMatrix};
use num_bigint::BigUint;
use num_integer::gcd;
use proptest::prelude::*;

/// Sorted element orders, which determine a finite abelian group.
fn order_profile(g: &cokerwalk::group::FiniteGroup, elements: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = elements.iter().map(|&x| g.element_order(x)).collect();
    v.sort_unstable();
    v
}

fn small_abelian() -> impl Strategy<Value = (usize, Vec<u64>)> {
    (0usize..3, prop::collection::vec(2u64..13, 0..4))
}

proptest! {
    #[test]
    fn surjections_onto_subgroups_partition_homs((free, a) in small_abelian(), order in 1u64..=24, pick in any::<prop::sample::Index>()) {
        let candidates = common::abelian_groups_of_order(order);
        let b = &candidates[pick.index(candidates.len())];
        let ag = AbelianGroup::from_factors(free, &a);
        let bg = abelian_group_from_factors(b);
        // image of a hom decides its subgroup; sum #Sur over subgroups by type
        let mut total = BigUint::from(0u32);
        for h in subgroup_lattice(&bg).unwrap().subgroups() {
            let profile = order_profile(&bg, h.elements());
            let ty = common::abelian_groups_of_order(h.order() as u64)
                .into_iter()
                .find(|t| {
                    let tg = abelian_group_from_factors(t);
                    order_profile(&tg, &(0..tg.order()).collect::<Vec<_>>()) == profile
                })
                .expect("subgroup type");
            total += sur_count(&ag, &AbelianGroup::from_factors(0, &ty)).unwrap();
        }
        let homs = hom_count(&ag, &AbelianGroup::from_factors(0, b)).unwrap();
        prop_assert_eq!(&total, &homs);
        // Hom(⊕ℤ/aᵢ ⊕ ℤ^r, ⊕ℤ/bⱼ) = Π gcd(aᵢ, bⱼ) · |B|^r
        let mut closed = BigUint::from(common::order_of(b)).pow(free as u32);
        for &ai in &a {
            for &bj in b {
                closed *= gcd(ai, bj);
            }
        }
        prop_assert_eq!(homs, closed);
    }

    #[test]
    fn tensor_mod_is_idempotent((free, f) in small_abelian(), a in 1u64..40) {
        let g = AbelianGroup::from_factors(free, &f);
        let once = tensor_mod(&g, a);
        prop_assert_eq!(tensor_mod(&once, a), once.clone());
        if let Some(e) = once.exponent_u64() {
            prop_assert_eq!(a % e, 0);
        }
    }

    #[test]
    fn cokernel_ignores_row_and_column_order_and_signs(
        rows in 1usize..7,
        cols in 1usize..7,
        entries in prop::collection::vec(-30i64..=30, 36),
        row_perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
        col_perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
        negate in prop::collection::vec(any::<bool>(), 6),
    ) {
        let m: Vec<Vec<i64>> = (0..rows).map(|i| entries[i * 6..i * 6 + cols].to_vec()).collect();
        let rp: Vec<usize> = row_perm.into_iter().filter(|&i| i < rows).collect();
        let cp: Vec<usize> = col_perm.into_iter().filter(|&j| j < cols).collect();
        let shuffled: Vec<Vec<i64>> = rp
            .iter()
            .map(|&i| cp.iter().map(|&j| if negate[i] { -m[i][j] } else { m[i][j] }).collect())
            .collect();
        let a = IntMatrix::from_rows(&m).unwrap();
        let b = IntMatrix::from_rows(&shuffled).unwrap();
        prop_assert_eq!(cokernel(&a), cokernel(&b));
        prop_assert_eq!(smith_normal_form(&a).diag, smith_normal_form(&b).diag);
    }
}

#[test]
fn lambda_p_masses_are_positive_and_sum_to_at_most_one() {
    for p in [2u64, 3, 5, 7] {
        for u in 0..3 {
            let mut total = 0.0;
            for size in 0..=8 {
                for parts in partitions(size) {
                    let m = lambda_p_mass(&PartitionType::new(p, parts).unwrap(), u);
                    assert!(m > 0.0);
                    total += m;
                }
            }
            assert!(total <= 1.0 + 1e-9, "p={p} u={u}: {total}");
            // the rest of the mass sits on groups of order above p^8
            assert!(total > 0.99, "p={p} u={u}: {total}");
        }
    }
}
