import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from closure_lab.errors import TowerBlowup, ValidationError
from closure_lab.groups import (INF, Contraction, Mobius, SphereMetric, SpherePoint, Word, chordal, commutator,
                                ghys_tower, local_model, loxodromic, orbit_accumulation, parse_generators,
                                pseudo_solvable_verdict, random_mobius, rotation, to_complex, to_vectors,
                                word_evaluate)
from closure_lab.jets import Jet

seeds = st.integers(0, 2**32 - 1)
P5, P7 = 2 * math.pi / 5, 2 * math.pi / 7


# points and the action


def test_identity_fixes_point():
    assert Mobius.identity().apply_z(3 + 1j) == 3 + 1j


def test_inversion_sends_infinity_to_zero():
    g = Mobius(0, 1, 1, 0)
    assert g.apply_z(INF) == 0
    assert not np.isfinite(g.apply_z(0))


def test_stereographic_round_trip(rng):
    z = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    v = to_vectors(z)
    assert np.allclose(np.linalg.norm(v, axis=-1), 1)
    assert np.allclose(to_complex(v), z, rtol=1e-12)
    assert np.allclose(to_vectors(np.array([0j])), [[0, 0, -1]])
    assert np.allclose(to_vectors(np.array([INF])), [[0, 0, 1]])


def test_rotation_is_right_handed():
    g = rotation([0, 0, 1], math.pi / 2)
    assert np.allclose(g.apply_vec(np.array([1.0, 0, 0])), [0, 1, 0], atol=1e-15)


@given(seeds)
def test_compose_with_inverse(seed):
    g = random_mobius(np.random.default_rng(seed), 1.0)
    assert (g @ g.inverse()).equals(Mobius.identity(), 1e-14 * max(1, np.abs(g.matrix).max() ** 2))


@given(seeds)
def test_action_is_a_homomorphism(seed):
    rng = np.random.default_rng(seed)
    g, h = random_mobius(rng, 0.5), random_mobius(rng, 0.5)
    v = to_vectors(rng.standard_normal(10) + 1j * rng.standard_normal(10))
    assert np.allclose((g @ h).apply_vec(v), g.apply_vec(h.apply_vec(v)), atol=1e-10)


@given(seeds)
def test_rotations_preserve_chordal_distance(seed):
    rng = np.random.default_rng(seed)
    g = rotation(rng.standard_normal(3), rng.uniform(0, 2 * math.pi))
    u, v = (to_vectors(rng.standard_normal(5) + 1j * rng.standard_normal(5)) for _ in range(2))
    assert np.allclose(chordal(g.apply_vec(u), g.apply_vec(v)), chordal(u, v), atol=1e-12)


# words


def test_empty_word_is_identity():
    gens = [rotation([0, 0, 1], 0.3)]
    assert word_evaluate(Word(), gens).equals(Mobius.identity(), 0)


def test_free_reduction():
    assert len(Word(((0, 1), (0, -1)))) == 0
    gens = [rotation([1, 0, 0], 0.3)]
    assert word_evaluate(Word(((0, 1), (0, -1))), gens).is_identity


def test_random_word_matches_matrix_product():
    rng = np.random.default_rng(5)
    gens = [rotation([0, 0, 1], P5), rotation([1, 0, 0], P7)]
    for _ in range(20):
        w = Word.random(rng, 2, 20)
        M = np.eye(2, dtype=complex)
        for i, e in w.letters:
            M = M @ (gens[i].matrix if e > 0 else np.linalg.inv(gens[i].matrix))
        assert word_evaluate(w, gens).equals(Mobius.from_matrix(M), 1e-12)


def test_word_inverse():
    rng = np.random.default_rng(2)
    gens = [random_mobius(rng, 0.3), random_mobius(rng, 0.3)]
    w = Word.random(rng, 2, 10)
    assert word_evaluate(w + w.inverse(), gens).is_identity


def test_words_act_on_jets():
    f = Jet.from_terms(1, 2, {(0, (1,)): 0.5, (0, (2,)): 0.1})
    assert word_evaluate(Word(((0, 1), (0, -1))), [f]).equals(Jet.identity(1, 2), 0)


# towers


def test_tower_level0_verbatim():
    S = [rotation([0, 0, 1], P5), rotation([1, 0, 0], P7)]
    tower = ghys_tower(S, 0)
    assert tower.levels[0] is not S and tower.levels[0] == S


def test_commuting_pair_collapses():
    S = [rotation([0, 0, 1], P5), rotation([0, 0, 1], P7)]
    tower = ghys_tower(S, 2)
    assert tower.sizes()[1] == 1
    assert tower.levels[1][0].equals(Mobius.identity(), 1e-12)
    v = pseudo_solvable_verdict(tower, 1e-9)
    assert str(v) == "pseudo_solvable_at_level 1" and v.certified


def test_identity_set_is_level_zero():
    v = pseudo_solvable_verdict(ghys_tower([Mobius.identity()], 1), 1e-9)
    assert str(v) == "pseudo_solvable_at_level 0"


def test_generic_pair_depth3_nonzero_displacements():
    S = [rotation([0, 0, 1], P5), rotation([1, 0, 0], P7)]
    tower = ghys_tower(S, 3, max_level_size=40)
    assert np.all(tower.displacements[3] > 0)
    # exact matrix arithmetic oracle: no member of S(3) is the identity
    assert all(not g.equals(Mobius.identity(), 1e-12) for g in tower.levels[3])


def test_batched_and_generic_paths_agree():
    S = [rotation([0, 0, 1], P5), rotation([1, 0, 0], P7)]
    a = ghys_tower(S, 2, batched=True)
    b = ghys_tower(S, 2, batched=False)
    assert a.sizes() == b.sizes() == [2, 9, 81]
    assert np.allclose(np.sort(a.displacements[2]), np.sort(b.displacements[2]), atol=1e-12)


def test_tower_blowup_guard():
    S = [rotation([0, 0, 1], P5), rotation([1, 0, 0], P7)]
    with pytest.raises(TowerBlowup) as exc:
        ghys_tower(S, 3, cap=1000)
    assert exc.value.diagnostics["level"] == 3


def test_commutator_definition():
    rng = np.random.default_rng(0)
    a, b = random_mobius(rng), random_mobius(rng)
    assert commutator(a, b).equals(a @ b @ a.inverse() @ b.inverse(), 1e-10)


def test_displacement_rotation_invariant():
    metric = SphereMetric(3)
    g = rotation([0.3, 0.2, 1.0], 0.7)
    R = rotation([1, 2, 3], 1.1)
    d1 = metric.displacement(g, refine=True)
    d2 = metric.displacement(R @ g @ R.inverse(), refine=True)
    assert d1 == pytest.approx(d2, abs=1e-12)
    assert d1 == pytest.approx(2 * math.sin(0.35), abs=1e-12)


# fixed points


def test_local_model_dilation():
    fp = local_model(Mobius(math.sqrt(0.5), 0, 0, 1 / math.sqrt(0.5)))
    assert fp.classification == "loxodromic"
    pts = {str(p.z): k for p, k in zip(fp.fixed_points, fp.multipliers)}
    assert pts["0j"] == pytest.approx(0.5)
    assert fp.attracting.z == 0
    assert fp.repelling.at_infinity
    assert [k for p, k in zip(fp.fixed_points, fp.multipliers) if p.at_infinity][0] == pytest.approx(2)


def test_local_model_translation_parabolic():
    fp = local_model(Mobius(1, 1, 0, 1))
    assert fp.classification == "parabolic" and fp.fixed_points[0].at_infinity


def test_local_model_rotation_elliptic():
    assert local_model(rotation([0, 1, 0], 0.4)).classification == "elliptic"


@given(seeds)
def test_random_loxodromic_fixes_its_attractor(seed):
    rng = np.random.default_rng(seed)
    p, q = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    k = 0.5 * np.exp(1j * rng.uniform(0, 2 * np.pi))
    g = loxodromic(p, q, k)
    fp = local_model(g)
    assert fp.classification == "loxodromic"
    a = fp.attracting
    assert abs(g.apply_z(a.z) - a.z) <= 1e-12 * max(1, abs(a.z))
    assert abs(a.z - p) <= 1e-9 * max(1, abs(p))
    assert fp.rate == pytest.approx(0.5, rel=1e-9)


def test_identity_has_no_model():
    with pytest.raises(ValidationError):
        local_model(Mobius.identity())


# orbit accumulation


def test_contraction_orbit_hits_zero():
    g = Mobius(math.sqrt(0.5), 0, 0, 1 / math.sqrt(0.5))
    eps = 1e-3
    rep = orbit_accumulation([g], SpherePoint(1), targets=[SpherePoint(0)], eps=eps,
                             budget=math.ceil(math.log2(1 / eps)) * 20, max_prefix=0)
    assert rep.hit == [True]
    assert rep.min_distance[0] < eps


def test_rotation_only_rejected():
    with pytest.raises(ValidationError, match="loxodromic"):
        orbit_accumulation([rotation([0, 0, 1], 0.3)], SpherePoint(1))


def test_dense_pair_hits_both_fixed_points():
    g = Mobius(math.sqrt(2), 0, 0, 1 / math.sqrt(2))
    r = rotation([1, 0, 0], P7)
    rep = orbit_accumulation([g, r], SpherePoint(0.3 + 0.2j), eps=1e-3, budget=10_000, seed=1)
    assert all(rep.hit)
    assert {p.at_infinity for p in rep.targets} == {True, False}


# generator files and contractions


def test_parse_generators():
    gens = parse_generators("# c\nrotation 0 0 1 0.5\nmobius 2 0 0 0 0 0 0.5 0\n")
    assert gens[0].equals(rotation([0, 0, 1], 0.5))
    assert gens[1].apply_z(1) == pytest.approx(4)
    with pytest.raises(ValidationError):
        parse_generators("rotation 0 0 1")
    with pytest.raises(ValidationError):
        parse_generators("")


def test_contraction_validation_and_resonance():
    with pytest.raises(ValidationError):
        Contraction((0.5, 0.2))
    assert not Contraction((0.25, 0.5)).resonance_free  # 0.25 = 0.5^2
    assert Contraction((0.2, 0.5)).resonance_free
    F = Contraction((0.2, 0.5))
    assert F.multiplier(1, (2, 0)) == pytest.approx(0.08)
