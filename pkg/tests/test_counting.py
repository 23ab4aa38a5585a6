import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mdpart.counting import (CountTable, count_exact_parts, count_mdp, count_mdp_by_k, count_mdp_total, eta,
                             gen_fn_fixed_k, grand_weights, k_gamma, k_star)
from mdpart.errors import DomainError
from mdpart.gapseq import Constant, GapSequence


def _all_partitions(n, largest=None):
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in _all_partitions(n - first, first):
            yield (first,) + rest


def _is_mdp_oracle(p, g):
    k = len(p)
    ext = list(p) + [0]
    return all(ext[i] - ext[i + 1] >= g.gap(k - 1 - i) for i in range(k))


def test_exact_parts_examples():
    assert count_exact_parts(5, 2) == 2
    assert count_exact_parts(7, 3) == 4
    assert count_exact_parts(0, 0) == 1
    assert count_exact_parts(3, 5) == 0
    assert count_exact_parts(4, 0) == 0


def test_exact_parts_vs_enumeration():
    for r in range(31):
        by_k = [0] * (r + 1)
        for p in _all_partitions(r):
            by_k[len(p)] += 1
        for k in range(r + 2):
            assert count_exact_parts(r, k) == (by_k[k] if k <= r else 0)


def test_count_mdp_examples(strict, alt, plain):
    assert count_mdp(strict, 6, 2) == 2
    assert count_mdp(strict, 6, 3) == 1
    assert count_mdp(alt, 35, 9) == count_exact_parts(19, 9) == 41
    assert count_mdp_total(plain, 4) == 5
    assert count_mdp_total(strict, 6) == 4
    for g in (plain, strict, alt):
        assert count_mdp_total(g, 0) == 1
    assert count_mdp(strict, 0, 0) == 1
    assert count_mdp(strict, 5, 0) == 0
    assert count_mdp(GapSequence(Constant(2)), 1, 1) == 0


@pytest.mark.parametrize("name", ["const:0", "const:1", "const:2", "periodic:1,0"])
def test_count_mdp_vs_filtered_enumeration(four_specs, name):
    g = four_specs[name]
    for n in range(26):
        per_k = {}
        for p in _all_partitions(n):
            if _is_mdp_oracle(p, g):
                per_k[len(p)] = per_k.get(len(p), 0) + 1
        by_k = count_mdp_by_k(g, n)
        assert count_mdp_total(g, n) == sum(per_k.values())
        for k in range(n + 2):
            assert count_mdp(g, n, k) == per_k.get(k, 0)
            assert (by_k[k] if k < len(by_k) else 0) == per_k.get(k, 0)


def test_distinct_parts_generating_function(strict):
    coeffs = np.zeros(41, dtype=object)
    coeffs[0] = 1
    for j in range(1, 41):                  # multiply by (1 + x^j)
        coeffs[j:] = coeffs[j:] + coeffs[:-j].copy()
    for n in range(41):
        assert count_mdp_total(strict, n) == coeffs[n]
    assert coeffs[40] == 1113


def test_count_table_recurrence_and_values():
    t = CountTable(25, 12)
    assert t(0, 0) == 1 and t(5, 0) == 0 and t(3, 5) == 0
    for r in range(1, 30):
        for k in range(1, 13):
            if r - k <= 25:
                assert t(r, k) == count_exact_parts(r, k)
                assert t(r, k) == t(r - 1, k - 1) + (t(r - k, k) if r >= k else 0)
    with pytest.raises(IndexError):
        t(100, 5)


@pytest.mark.parametrize("r,k", [(10, 3), (15, 5), (20, 1), (12, 12), (18, 7)])
def test_unrank_is_a_bijection(r, k):
    t = CountTable(r - k, k)
    got = [t.unrank(r, k, u).parts for u in range(t(r, k))]
    assert set(got) == {p for p in _all_partitions(r) if len(p) == k}
    assert len(set(got)) == len(got)


def test_gen_fn_values(strict):
    z = 0.7
    assert gen_fn_fixed_k(strict, z, 0) == 0.0
    assert gen_fn_fixed_k(strict, z, 1) == pytest.approx(math.log(math.exp(-z) / (1 - math.exp(-z))), rel=1e-14)
    for k in range(1, 30):
        ratio = math.exp(gen_fn_fixed_k(strict, z, k) - gen_fn_fixed_k(strict, z, k - 1))
        assert abs(ratio - eta(strict, z, k)) <= 1e-12 * ratio
    with pytest.raises(DomainError):
        gen_fn_fixed_k(strict, 0.0, 3)


@pytest.mark.parametrize("name", ["const:0", "const:1", "const:2", "periodic:1,0"])
@pytest.mark.parametrize("z", [0.5, 1.0])
def test_laplace_identity(four_specs, name, z):
    g = four_specs[name]
    N = 160
    for k in range(1, 7):
        F = math.exp(gen_fn_fixed_k(g, z, k))
        partial = sum(count_mdp(g, n, k) * math.exp(-z * n) for n in range(N + 1))
        assert abs(F - partial) <= math.exp(-z * N) * F * 1e3 + 1e-15


def test_eta_examples(strict, alt):
    assert eta(strict, 1, 1) == pytest.approx(math.exp(-1) / (1 - math.exp(-1)), rel=1e-15)
    assert round(eta(strict, 1, 1), 4) == 0.5820
    for g in (strict, alt, GapSequence(Constant(0))):
        e = [eta(g, 0.01, k) for k in range(1, 500)]
        assert all(a >= b for a, b in zip(e, e[1:]))
    with pytest.raises(DomainError):
        eta(strict, -1, 1)


def test_k_star(strict, plain):
    assert k_star(strict, 1.0) == 1
    z = 1e-3
    assert abs(z * k_star(strict, z) - math.log(2)) <= 0.01
    z = 1e-4
    assert abs(z * k_star(plain, z) / math.log(1 / z) - 1) <= 0.1
    for g in (strict, plain):
        for z in (0.3, 0.01, 0.002):
            k = k_star(g, z)
            assert eta(g, z, k + 1) < 1
            assert k == 1 or eta(g, z, k) >= 1
    with pytest.raises(DomainError):
        k_star(strict, 0)


def test_k_gamma(strict, alt, plain):
    assert k_gamma(strict, 0.1, 0.5) == 4
    # gamma near 1: the threshold drops to just above 1, reached at k = 1 once s_1 >= 2
    assert k_gamma(GapSequence(Constant(2)), 0.1, 0.999999) == 1
    assert k_gamma(strict, 0.1, 0.999999) == 2
    for g in (strict, alt, plain):
        for z in (0.5, 0.1, 0.01, 1e-3):
            for gam in (0.1, 0.5, 0.9):
                thr = z ** (-2 * (1 - gam))
                k = k_gamma(g, z, gam)
                assert g.weighted_sum(k) >= thr > g.weighted_sum(k - 1)
                assert k <= math.ceil(thr)
    with pytest.raises(DomainError):
        k_gamma(strict, 1.5, 0.5)
    with pytest.raises(DomainError):
        k_gamma(strict, 0.5, 1.0)


def test_grand_weights_large_z(strict):
    w = grand_weights(strict, 5.0)
    assert w.probabilities()[0] == pytest.approx(1 - math.exp(-5), abs=1e-6)


@pytest.mark.parametrize("name", ["const:0", "const:1", "const:2", "periodic:1,0"])
@pytest.mark.parametrize("z", [2.0, 0.3, 0.02, 1e-3])
def test_grand_weights_structure(four_specs, name, z):
    g = four_specs[name]
    w = grand_weights(g, z, 1e-10)
    p = w.probabilities()
    assert w.log_F[0] == 0.0
    assert abs(p.sum() - 1) < 1e-12
    assert w.rel_tail < 1e-10
    ks = w.k_star
    tail = p[ks:-1]
    assert np.all(np.diff(tail) < 0)
    # the mode sits at k_star, or at 0 when eta_1 < 1
    mode = ks if eta(g, z, 1) >= 1 else 0
    assert p[mode] >= p.max() * (1 - 1e-12)
    top = min(8, w.K_max + 1)
    np.testing.assert_allclose(w.log_F[1:top], [gen_fn_fixed_k(g, z, k) for k in range(1, top)],
                               rtol=1e-12, atol=1e-12)


def test_grand_weights_tail_bound_is_honest(strict):
    z = 0.05
    w = grand_weights(strict, z, 1e-6)
    extra = np.array([gen_fn_fixed_k(strict, z, k) for k in range(w.K_max + 1, w.K_max + 400)])
    true_tail = np.exp(extra).sum()
    assert true_tail <= math.exp(w.log_tail) * (1 + 1e-9)


def test_grand_weights_domain(strict):
    with pytest.raises(DomainError):
        grand_weights(strict, 0.0)
    with pytest.raises(DomainError):
        grand_weights(strict, 1.0, rel_tail=1.5)


@given(st.integers(1, 6), st.integers(1, 400))
def test_weighted_sum_quadratic_growth(q, k):
    g = GapSequence(Constant(q))
    assert abs(g.weighted_sum(k) - q * k * k / 2) <= (q + 1) * k
