import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from closure_lab.errors import ValidationError
from closure_lab.jets import (Jet, NormSpec, VFJet, cnorm, compose, difference_field, dumps, invert,
                              lie_bracket, loads, monomials, norm_equivalence_constant)


def random_jet(rng, n, d, scale=0.3, near_id=True, cls=Jet):
    M = len(monomials(n, d))
    c = scale * rng.standard_normal((n, M))
    if near_id:
        c += Jet.identity(n, d).coeffs
    return cls(n, d, c)


def jet_from_seed(seed, n, d, **kw):
    return random_jet(np.random.default_rng(seed), n, d, **kw)


seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 3)
degs = st.integers(1, 4)


def test_monomials_graded():
    mons = monomials(2, 2)
    assert mons[0] == (0, 0)
    assert [sum(a) for a in mons] == sorted(sum(a) for a in mons)
    assert len(mons) == 6


# composition


def test_compose_identity_left():
    g = jet_from_seed(1, 2, 3)
    assert compose(Jet.identity(2, 3), g).equals(g, 1e-15)


def test_compose_hand_expansion():
    f = Jet.from_terms(1, 2, {(0, (1,)): 2.0})
    g = Jet.from_terms(1, 2, {(0, (1,)): 0.5, (0, (2,)): 0.25})
    expected = Jet.from_terms(1, 2, {(0, (1,)): 1.0, (0, (2,)): 0.5})
    assert compose(f, g).equals(expected, 0.0)


def test_compose_matches_pointwise_on_grid():
    rng = np.random.default_rng(7)
    n, d = 2, 3
    f = random_jet(rng, n, d, near_id=False)
    g = random_jet(rng, n, d, near_id=False, scale=0.5)
    # exact composite, truncated only at the end, as oracle: evaluate with g untruncated
    x = rng.uniform(-0.1, 0.1, (100, n))
    fg = compose(f, g)
    full = f(g(x))
    # truncation error: terms of order > d in the exact composite; bound by the
    # discarded high-order part computed at twice the degree
    exact = compose(f.with_degree(3 * d), g.with_degree(3 * d))
    assert np.allclose(exact(x), full, atol=1e-12, rtol=0)
    tail = exact.coeffs.copy()
    orders = np.array([sum(a) for a in monomials(n, 3 * d)])
    tail[:, orders <= d] = 0
    bound = np.abs(tail).sum() * 0.1 ** (d + 1)
    assert np.max(np.abs(fg(x) - full)) <= bound + 1e-12


@given(seeds, dims, degs)
def test_compose_associative(seed, n, d):
    # truncated composition is associative on jets fixing the origin
    rng = np.random.default_rng(seed)
    f, g, h = (random_jet(rng, n, d) for _ in range(3))
    f, g, h = (Jet(n, d, np.where(np.arange(j.coeffs.shape[1]) == 0, 0.0, j.coeffs)) for j in (f, g, h))
    a = compose(compose(f, g), h)
    b = compose(f, compose(g, h))
    assert a.equals(b, 1e-12 * max(1, np.abs(a.coeffs).max()))


# inversion


def test_invert_identity():
    assert invert(Jet.identity(3, 2)).equals(Jet.identity(3, 2), 0.0)


def test_invert_hand_series():
    f = Jet.from_terms(1, 2, {(0, (1,)): 1.0, (0, (2,)): 1.0})
    expected = Jet.from_terms(1, 2, {(0, (1,)): 1.0, (0, (2,)): -1.0})
    assert invert(f).equals(expected, 1e-15)


@given(seeds, dims, degs)
def test_invert_round_trip(seed, n, d):
    f = jet_from_seed(seed, n, d, scale=0.2)
    if abs(np.linalg.det(f.coeffs[:, 1:n + 1])) < 1e-3:
        return
    ident = Jet.identity(n, d)
    assert compose(invert(f), f).equals(ident, 1e-12)
    # two-sided on jets fixing the origin
    f0 = Jet(n, d, np.where(np.arange(f.coeffs.shape[1]) == 0, 0.0, f.coeffs))
    assert compose(f0, invert(f0)).equals(ident, 1e-12)


def test_invert_singular_linear_part():
    f = Jet.from_terms(1, 2, {(0, (2,)): 1.0})
    with pytest.raises(ValidationError):
        invert(f)


# norms


def test_cnorm_identity_minus_id_zero():
    assert cnorm(Jet.identity(2, 3), minus_id=True) == 0.0


@pytest.mark.parametrize("a", [0.3, -1.7])
def test_cnorm_quadratic(a):
    f = Jet.from_terms(1, 2, {(0, (1,)): 1.0, (0, (2,)): a})
    assert cnorm(f, True, NormSpec(0)) == pytest.approx(abs(a), abs=1e-15)
    assert cnorm(f, True, NormSpec(1)) == pytest.approx(2 * abs(a), abs=1e-15)


@given(seeds, st.floats(-3, 3))
def test_cnorm_seminorm(seed, s):
    rng = np.random.default_rng(seed)
    X = random_jet(rng, 2, 3, near_id=False, cls=VFJet)
    Y = random_jet(rng, 2, 3, near_id=False, cls=VFJet)
    for r in (0, 1, 2):
        spec = NormSpec(r, grid_per_axis=9)
        assert cnorm(X + Y, spec=spec) <= cnorm(X, spec=spec) + cnorm(Y, spec=spec) + 1e-12
        assert cnorm(X * s, spec=spec) == pytest.approx(abs(s) * cnorm(X, spec=spec), rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("bad", [-5, 0, 1, 4])
def test_normspec_validation(bad):
    with pytest.raises(ValidationError):
        NormSpec(grid_per_axis=bad)


# Lie bracket


def test_bracket_constant_and_linear():
    X = VFJet.from_terms(2, 1, {(0, (0, 0)): 1.0})
    Y = VFJet.from_terms(2, 1, {(1, (1, 0)): 1.0})
    assert lie_bracket(X, Y).equals(VFJet.from_terms(2, 1, {(1, (0, 0)): 1.0}), 0.0)


def test_bracket_hand_computation():
    X = VFJet.from_terms(2, 1, {(0, (1, 0)): 1.0})
    Y = VFJet.from_terms(2, 2, {(1, (2, 0)): 1.0})
    Z = lie_bracket(X, Y)
    assert Z.equals(VFJet.from_terms(2, Z.degree, {(1, (2, 0)): 2.0}), 0.0)


@given(seeds, dims, degs)
def test_bracket_antisymmetric(seed, n, d):
    rng = np.random.default_rng(seed)
    X = random_jet(rng, n, d, near_id=False, cls=VFJet)
    Y = random_jet(rng, n, d, near_id=False, cls=VFJet)
    assert lie_bracket(X, Y).equals(-lie_bracket(Y, X), 0.0)


@given(seeds, st.integers(1, 2), st.integers(1, 3))
def test_bracket_jacobi(seed, n, d):
    rng = np.random.default_rng(seed)
    X, Y, Z = (random_jet(rng, n, d, near_id=False, cls=VFJet) for _ in range(3))
    D = 3 * d
    X, Y, Z = (V.with_degree(D) for V in (X, Y, Z))
    total = (lie_bracket(X, lie_bracket(Y, Z, D), D) + lie_bracket(Y, lie_bracket(Z, X, D), D)
             + lie_bracket(Z, lie_bracket(X, Y, D), D))
    assert np.abs(total.coeffs).max() <= 1e-11 * max(1.0, np.abs(X.coeffs).max()) ** 3 * 100


def test_bracket_matches_pointwise_derivatives():
    rng = np.random.default_rng(3)
    X = random_jet(rng, 2, 2, near_id=False, cls=VFJet)
    Y = random_jet(rng, 2, 2, near_id=False, cls=VFJet)
    Z = lie_bracket(X, Y)
    x = rng.uniform(-1, 1, (20, 2))
    h = 1e-6

    def jac(V, p):
        return np.stack([(V(p + h * e) - V(p - h * e)) / (2 * h) for e in np.eye(2)], axis=-1)

    # [X, Y] = DY X - DX Y
    for p in x:
        ref = jac(Y, p[None])[0] @ X(p[None])[0] - jac(X, p[None])[0] @ Y(p[None])[0]
        assert np.allclose(Z(p[None])[0], ref, atol=1e-7)


# norm equivalence


def lp_oracle(d, grid=1001):
    """max |p'(x*)| subject to |p| <= 1 on a grid, maximized over x* on the grid (LP per x*)."""
    xs = np.linspace(-1, 1, grid)
    V = np.vander(xs, d + 1, increasing=True)
    dV = np.hstack([np.zeros((grid, 1)), V[:, :-1] * np.arange(1, d + 1)])
    A = np.vstack([V, -V])
    b = np.ones(2 * grid)
    best = 0.0
    for x_star in (xs[-1], xs[0], xs[grid // 2]):
        row = np.hstack([0.0, x_star ** np.arange(d) * np.arange(1, d + 1)])
        res = linprog(-row, A_ub=A, b_ub=b, bounds=[(None, None)] * (d + 1), method="highs")
        best = max(best, -res.fun)
    # max over derivative and value itself (C^1 norm includes C^0 part <= 1)
    return max(best, 1.0)


def test_norm_equivalence_linear():
    ne = norm_equivalence_constant(1, 1, 1)
    assert ne.constant == pytest.approx(1.0, abs=1e-12)


def test_norm_equivalence_quadratic_witness():
    ne = norm_equivalence_constant(2, 1, 1)
    assert ne.constant >= 2.0 - 1e-12
    x2 = Jet.from_terms(1, 2, {(0, (2,)): 1.0})
    spec = NormSpec()
    assert cnorm(x2, spec=spec.with_order(1)) / cnorm(x2, spec=spec) == pytest.approx(2.0)


def test_norm_equivalence_degree5_against_lp():
    ne = norm_equivalence_constant(5, 1, 1)
    lp = lp_oracle(5)
    assert 0.8 * 25 <= ne.constant <= lp + 1e-9
    assert ne.witness_ratio == ne.constant
    spec = NormSpec()
    w = ne.witness
    assert cnorm(w, spec=spec.with_order(1)) / cnorm(w, spec=spec) == pytest.approx(ne.constant, rel=1e-12)


# difference fields


def test_difference_field_constant():
    h = Jet.from_terms(2, 1, {(0, (1, 0)): 1.0, (1, (0, 1)): 1.0, (0, (0, 0)): 0.3})
    assert difference_field(h).equals(VFJet.from_terms(2, 1, {(0, (0, 0)): 1.0}), 1e-15)


def test_difference_field_quadratic():
    c = 1e-3
    h = Jet.from_terms(1, 2, {(0, (1,)): 1.0, (0, (2,)): c})
    assert difference_field(h).equals(VFJet.from_terms(1, 2, {(0, (2,)): 1.0}), 1e-12)


def test_difference_field_limit_kills_linear_part():
    coeffs = []
    for c in (1e-2, 1e-4, 1e-6):
        h = Jet.from_terms(1, 2, {(0, (1,)): 1.0 + c * c, (0, (2,)): c})
        coeffs.append(difference_field(h).coefficient(0, (1,)))
    assert coeffs[0] > coeffs[1] > coeffs[2] and coeffs[2] < 1e-5


def test_difference_field_identity_rejected():
    with pytest.raises(ValidationError):
        difference_field(Jet.identity(1, 2))


# text form


@given(seeds, dims, degs, st.booleans())
def test_text_round_trip(seed, n, d, vf):
    f = jet_from_seed(seed, n, d, cls=VFJet if vf else Jet)
    g = loads(dumps(f))
    assert type(g) is type(f)
    assert np.array_equal(g.coeffs, f.coeffs)
