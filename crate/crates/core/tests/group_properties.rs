mod common;

use cokerwalk::group::{
    abelian_group_from_factors, alternating_group, cyclic_group, dihedral_group, direct_product, generated_subgroup,
    is_normal, quaternion_group, quotient, subgroup_lattice, symmetric_group, FiniteGroup, GroupRef,
};
use cokerwalk::walk::{random_normal_tower, QuotientChain};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn zoo() -> Vec<(&'static str, GroupRef)> {
    vec![
        ("Z/1", cyclic_group(1)),
        ("Z/7", cyclic_group(7)),
        ("Z/2xZ/4", abelian_group_from_factors(&[2, 4])),
        ("Z/2^3", abelian_group_from_factors(&[2, 2, 2])),
        ("Z/3xZ/3", abelian_group_from_factors(&[3, 3])),
        ("D6", dihedral_group(3)),
        ("D8", dihedral_group(4)),
        ("D12", dihedral_group(6)),
        ("D24", dihedral_group(12)),
        ("Q8", quaternion_group()),
        ("A4", alternating_group(4).group().clone()),
        ("S4", symmetric_group(4).group().clone()),
        ("A5", alternating_group(5).group().clone()),
        ("S3xZ/4", direct_product(&dihedral_group(3), &cyclic_group(4))),
        ("Q8xZ/3", direct_product(&quaternion_group(), &cyclic_group(3))),
    ]
}

fn check_axioms(name: &str, g: &FiniteGroup) {
    let n = g.order();
    for x in 0..n {
        let mut row = vec![false; n];
        let mut col = vec![false; n];
        for y in 0..n {
            row[g.mul(x, y)] = true;
            col[g.mul(y, x)] = true;
        }
        assert!(
            row.iter().all(|&b| b) && col.iter().all(|&b| b),
            "{name}: not a Latin square at {x}"
        );
        assert_eq!(g.mul(0, x), x, "{name}: left identity");
        assert_eq!(g.mul(x, 0), x, "{name}: right identity");
        assert_eq!(g.mul(x, g.inv(x)), 0, "{name}: inverse");
        for y in 0..n {
            let xy = g.mul(x, y);
            for z in 0..n {
                assert_eq!(g.mul(xy, z), g.mul(x, g.mul(y, z)), "{name}: associativity");
            }
        }
    }
}

#[test]
fn constructed_groups_satisfy_the_axioms() {
    for (name, g) in zoo() {
        check_axioms(name, &g);
    }
    check_axioms("S5", symmetric_group(5).group());
    check_axioms("Z/4xZ/4xZ/4x2x2", &abelian_group_from_factors(&[4, 4, 4, 2, 2]));
}

#[test]
fn lattices_are_closed_under_intersection_and_complete() {
    for (name, g) in zoo() {
        let lat = subgroup_lattice(&g).unwrap();
        let subs = lat.subgroups();
        for a in subs {
            for b in subs {
                let meet = a.intersection(b);
                assert!(lat.position(&meet).is_some(), "{name}: intersection missing");
            }
        }
        assert_eq!(subs.len(), common::all_subgroups(&g).len(), "{name}: subgroup count");
    }
}

#[test]
fn quotient_orders_and_composed_chain_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (name, g) in zoo() {
        let lat = subgroup_lattice(&g).unwrap();
        for n in lat.subgroups().iter().filter(|h| is_normal(&g, h)) {
            let (q, p) = quotient(&g, n).unwrap();
            assert_eq!(q.order() * n.order(), g.order(), "{name}: |G/N|");
            assert_eq!(p.kernel(), *n, "{name}: kernel of the projection");
        }
        for _ in 0..5 {
            let tower = random_normal_tower(&g, &mut rng).unwrap();
            let chain = QuotientChain::from_normal_tower(&g, &tower).unwrap();
            for (j, nj) in tower.iter().enumerate() {
                let (_, p) = quotient(&g, nj).unwrap();
                let qj = &chain.composed()[j + 1];
                for x in 0..g.order() {
                    for y in 0..g.order() {
                        assert_eq!(
                            qj.apply(x) == qj.apply(y),
                            p.apply(x) == p.apply(y),
                            "{name}: composed map {} has the wrong fibers",
                            j + 1
                        );
                    }
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn generated_subgroup_is_idempotent_and_monotone(
        gi in 0usize..15,
        gens in prop::collection::vec(any::<prop::sample::Index>(), 0..4),
        extra in any::<prop::sample::Index>(),
    ) {
        let (_, g) = &zoo()[gi];
        let gens: Vec<usize> = gens.iter().map(|i| i.index(g.order())).collect();
        let h = generated_subgroup(g, &gens).unwrap();
        prop_assert_eq!(&generated_subgroup(g, h.elements()).unwrap(), &h);
        let mut more = gens.clone();
        more.push(extra.index(g.order()));
        let bigger = generated_subgroup(g, &more).unwrap();
        prop_assert!(h.is_subgroup_of(&bigger));
        let expect = common::elements(&common::closure(g, &gens));
        prop_assert_eq!(h.elements(), expect.as_slice());
    }
}
