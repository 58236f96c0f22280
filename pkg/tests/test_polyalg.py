import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dagsobol.polyalg import Poly, family_coefficients, family_inverse, to_orthonormal


def test_hermite_coefficients_known_values():
    C = family_coefficients("hermite", 3)
    # He2 = z^2 - 1, normalized by sqrt(2)
    assert np.allclose(C[2], [-1 / np.sqrt(2), 0, 1 / np.sqrt(2), 0])
    # He3 = z^3 - 3z, normalized by sqrt(6)
    assert np.allclose(C[3], [0, -3 / np.sqrt(6), 0, 1 / np.sqrt(6)])


def test_legendre_coefficients_known_values():
    C = family_coefficients("legendre", 2)
    # P2 = (3z^2 - 1)/2 with norm^2 = 1/5 under the uniform density on [-1, 1]
    assert np.allclose(C[2], np.sqrt(5) * np.array([-0.5, 0, 1.5]))
    assert np.allclose(C[1], [0, np.sqrt(3), 0])


@pytest.mark.parametrize("family", ["hermite", "legendre"])
@pytest.mark.parametrize("p", [0, 1, 4, 7])
def test_inverse_is_inverse(family, p):
    C = family_coefficients(family, p)
    T = family_inverse(family, p)
    # z^n = sum_k T[n, k] psi_k(z) = sum_k T[n, k] sum_j C[k, j] z^j
    assert np.allclose(T @ C, np.eye(p + 1), atol=1e-9)


def test_poly_arithmetic_and_evaluate():
    x, y = Poly.variable("x"), Poly.variable("y")
    p = (x + y) * (x - y) + Poly.constant(2.0)
    vals = {"x": np.array([1.0, 2.0, -3.0]), "y": np.array([0.5, 1.0, 2.0])}
    assert np.allclose(p.evaluate(vals), vals["x"] ** 2 - vals["y"] ** 2 + 2)
    assert p.degree == 2
    assert p.constant_term() == pytest.approx(2.0)
    assert set(p.used_vars()) == {"x", "y"}


def test_poly_substitute():
    x, u = Poly.variable("x"), Poly.variable("u")
    p = x * x + x.scale(3.0)
    q = p.substitute({"x": u.shift(1.0)})
    uu = np.linspace(-2, 2, 7)
    assert np.allclose(q.evaluate({"u": uu}), (uu + 1) ** 2 + 3 * (uu + 1))


def test_powers():
    x = Poly.variable("x").shift(1.0)
    pw = x.powers(3)
    z = np.array([0.0, 1.0, 2.5])
    for n, pn in enumerate(pw):
        assert np.allclose(pn.evaluate({"x": z}), (z + 1) ** n)


def test_to_orthonormal_hermite_square():
    # z^2 = sqrt(2) He2_normalized + 1
    p = Poly.univariate("z", [0, 0, 1])
    idx, c = to_orthonormal(p, {"z": family_inverse("hermite", 2)})
    got = {int(i[0]): v for i, v in zip(idx, c)}
    assert got[0] == pytest.approx(1.0)
    assert got[2] == pytest.approx(np.sqrt(2))
    assert abs(got.get(1, 0.0)) < 1e-14


coef_lists = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=5)


@settings(max_examples=50, deadline=None)
@given(coef_lists, coef_lists, st.floats(-2, 2))
def test_substitution_commutes_with_evaluation(a, b, t):
    p = Poly.univariate("x", a)
    q = Poly.univariate("u", b)
    comp = p.substitute({"x": q})
    u = np.array([t])
    inner = q.evaluate({"u": u})
    assert np.allclose(comp.evaluate({"u": u}), p.evaluate({"x": inner}), rtol=1e-9, atol=1e-8)


@settings(max_examples=50, deadline=None)
@given(coef_lists, st.sampled_from(["hermite", "legendre"]))
def test_orthonormal_roundtrip(a, family):
    deg = len(a) - 1
    p = Poly.univariate("z", a)
    idx, c = to_orthonormal(p, {"z": family_inverse(family, deg)})
    C = family_coefficients(family, deg)
    z = np.linspace(-1.5, 1.5, 9)
    V = np.vander(z, deg + 1, increasing=True)
    back = sum(ci * (V @ C[int(i[0])]) for i, ci in zip(idx, c)) if len(c) else np.zeros_like(z)
    assert np.allclose(back, np.polynomial.polynomial.polyval(z, a), atol=1e-8)
