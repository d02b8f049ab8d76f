"""Smoke test for the cokerwalk Python extension.

Build and install it with `pip install --no-build-isolation crates/python`,
then run `python3 python/smoke_test.py`.
"""

import math

import cokerwalk as cw


def matmul(a, b):
    return [[sum(a[i][k] * b[k][j] for k in range(len(b))) for j in range(len(b[0]))] for i in range(len(a))]


def test_groups():
    z6 = cw.Group.parse("Z/6")
    assert z6.order == 6 and z6.is_abelian()
    d8 = cw.Group.dihedral(4)
    assert len(d8) == 8 and not d8.is_abelian()
    assert len(d8.subgroups()) == 10
    for g in range(8):
        assert d8.mul(g, d8.inv(g)) == 0
    assert cw.Group.alternating(5).order == 60
    assert z6.generated([2]) == [0, 2, 4]


def test_measures_and_walks():
    z5 = cw.Group.cyclic(5)
    mu = cw.Measure.from_pairs(z5, [(0, 0.5), (1, 0.3), (2, 0.2)])
    assert abs(mu.mass - 1.0) < 1e-12
    assert cw.Measure.uniform(z5).l2_distance_to_uniform() == 0.0
    sigma, sub = mu.second_singular_value()
    assert sub == list(range(5))
    eps = mu.epsilon_balanced()
    assert 0.0 < sigma <= cw.sigma_bound_abelian(eps, 5) + 1e-9

    walk = cw.Walk(z5, [mu] * 6)
    rep = walk.bound()
    assert rep["holds"] and rep["lhs"] <= rep["rhs"] + 1e-9
    dist = walk.distribution().l2_distance_to_uniform()
    assert abs(walk.squared_distance() - dist**2) < 1e-12
    assert rep["lhs"] == walk.squared_distance()
    assert dist <= sigma**6 * math.sqrt(4 / 5) + 1e-12

    try:
        cw.Measure.probability(z5, [0.5, 0.6, 0, 0, 0])
    except ValueError:
        pass
    else:
        raise AssertionError("non-probability weights accepted")

    assert cw.a5_counterexample_probability() == 0.0


def test_integer_linear_algebra():
    a = [[2, 4, 4], [-6, 6, 12], [10, -4, -16]]
    left, diag, right = cw.smith_normal_form(a)
    assert diag == [2, 6, 12]
    d = matmul(matmul(left, a), right)
    assert d == [[2, 0, 0], [0, 6, 0], [0, 0, 12]]
    assert str(cw.cokernel([[2, 0], [0, 3]])) == str(cw.AbelianGroup([6]))
    assert cw.cokernel([[1, 2]]).free_rank == 0
    assert cw.cokernel([[0, 0]]).free_rank == 1
    assert cw.cokernel_mod(a, 4).invariant_factors == [2, 2, 4]


def test_abelian_counts():
    z = cw.AbelianGroup([], free_rank=2)
    assert cw.sur_count(z, cw.AbelianGroup([2])) == 3
    assert cw.hom_count(cw.AbelianGroup([4]), cw.AbelianGroup([6])) == 2
    assert cw.AbelianGroup.parse("Z/2 x Z/4").order == 8
    assert cw.AbelianGroup([12]).tensor_mod(8) == cw.AbelianGroup([4])
    m = cw.cokernel_mass(cw.AbelianGroup([]), 1)
    assert 0.43 < m < 0.44


def test_matrix_models():
    model = cw.MatrixModel.iid(20, [0, 1], [0.6, 0.4])
    assert model.shape == (20, 20)
    assert model.sample(7, 3) == model.sample(7, 3)
    # the reference is the large-n limit, so n must not be tiny
    est = model.moment(cw.AbelianGroup([2]), 2000, 5)
    assert abs(est["mean"] - est["reference"]) <= 4 * est["stderr"]
    blocked = cw.MatrixModel.blocked(
        4, 2, 2, '{"family": "shared-shift", "values": [0, 1], "probs": [0.7, 0.3], "shift_modulus": 2}'
    )
    assert len(blocked.sample(1)) == 4
    assert cw.depth(2, [2], [[1], [1], [1], [1]], 0.5) >= 1


def test_harness():
    names = [n for n, _ in cw.builtin_experiments()]
    assert "a5-counterexample" in names and "dihedral-golden" in names
    rows = cw.run_experiment("builtin:dihedral-golden")
    assert rows and all(r["pass"] for r in rows)


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok {name}")
    print("smoke test passed")
