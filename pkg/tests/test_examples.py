import math

import numpy as np
import pytest
from scipy.integrate import quad

from diraclab.evolution import validate_path
from diraclab.examples import (FAMILIES, build_family, cylinder_family, even_block,
                               even_solution, hyperbolic_even_model, hyperbolic_odd_model,
                               mu_model, odd_energy, odd_solution, partner_path, random_path,
                               shipped_paths, validate_all)
from diraclab.spectral_core import chiral_index


@pytest.mark.parametrize("K", range(2, 9))
def test_even_model_count(K):
    _, rep = hyperbolic_even_model(K)
    assert rep["count"] == K - 1
    assert rep["mirrored_count"] == K - 1


@pytest.mark.parametrize("k", [2, 3, -2, 5])
def test_even_solution_solves_block(k):
    blk = even_block(k, math.log(abs(k)) + 2)
    h = 1e-5
    for t in (0.0, 0.4, 1.3):
        deriv = (even_solution(k, t + h) - even_solution(k, t - h)) / (2 * h)
        assert np.linalg.norm(deriv + blk.A(t) @ even_solution(k, t)) < 1e-7


def test_even_block_tail_is_positive_definite_on_half():
    blk = even_block(4, math.log(4) + 2)
    B = blk.A(blk.r)[:2, :2]
    assert np.all(np.linalg.eigvalsh(B) > 0)


def test_even_model_rejects_small_K():
    with pytest.raises(ValueError):
        hyperbolic_even_model(1)


def test_odd_model():
    _, rep = hyperbolic_odd_model(3)
    assert abs(rep["growth_slope"] - 1.0) <= 0.05
    by_k = {m["k"]: m for m in rep["modes"]}
    assert np.allclose(by_k[1]["initial_value"], [0, math.exp(-1)])
    assert by_k[0]["in_kernel"]
    for k in (1, 2, 3):
        assert by_k[k]["bounded"]
        assert by_k[k]["integration_error"] < 1e-9
        assert by_k[k]["nonnegative_part_at_0"] < 1e-14


@pytest.mark.parametrize("k, T", [(1, 3.0), (2, 10.0), (0, 4.0)])
def test_odd_energy_quadrature(k, T):
    val, _ = quad(lambda t: abs(odd_solution(k, t)[1]) ** 2, 0, T, limit=200)
    assert np.isclose(odd_energy(k, T), val, rtol=1e-10)


def test_mu_model_cases():
    one = mu_model(1)
    assert one["branch_t_minus_mu"]["in_L2"] and not one["branch_t_mu"]["in_L2"]
    assert one["dim_c_max"] == one["dim_c_ext"] == 1
    assert one["argument"] == "refined"
    zero = mu_model(0)
    assert zero["dim_c_max"] == 0 and zero["dim_c_ext"] == 2
    q = mu_model(0.75)
    assert q["dim_c_ext"] == 1 and q["c_max"] == [[1, 0]]
    assert mu_model(-2)["c_max"] == [[0, 1]] and mu_model(-2)["argument"] == "hardy"
    assert mu_model(0.25)["c_ext"] is None
    # ∫_1^∞ t^{-2} = 1
    assert np.isclose(one["branch_t_minus_mu"]["norm_sq"], 1.0)


def test_cylinder_structure():
    path = cylinder_family(5, 0.5)
    validate_path(path)
    gV = path.gamma.conj().T @ path.V(0.0)
    # positive mode 2 (index 1) couples to negative modes 1 and 3
    row = np.abs(gV[5:10, 1])
    assert np.flatnonzero(row > 0).tolist() == [0, 2]
    assert np.allclose(path.V(path.r), 0)


def test_shipped_paths_validate():
    assert all(validate_all().values())
    assert set(shipped_paths()) >= {"coupled-2d", "cylinder-64", "random-8-alpha"}


@pytest.mark.parametrize("seed", range(5))
def test_random_and_partner_paths(seed):
    p = random_path(6, seed % 3, True, 1.0, seed=seed, alpha=seed % 2 == 1)
    validate_path(p)
    q = partner_path(p, seed=seed + 1)
    validate_path(q)
    assert np.allclose(q.d.a0, -p.d.a0) and np.allclose(q.gamma, -p.gamma)
    assert chiral_index(p.d) == 0


def test_random_path_rejects_odd_dim():
    with pytest.raises(ValueError):
        random_path(5)


def test_build_family():
    assert set(FAMILIES) == {"cylinder", "coupled-2d", "random", "even-block", "odd-block"}
    assert build_family("cylinder", K=3).dim == 6
    assert np.isclose(build_family("even-block", k=3).r, math.log(3) + 2)
    assert build_family("odd-block").r == 10.0
    with pytest.raises(ValueError):
        build_family("torus")
