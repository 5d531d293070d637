import numpy as np
import pytest

from entroflux.cptp import KrausMap, apply, to_superoperator, validate
from entroflux.errors import AssumptionNotSatisfied, NotAProjectorSet, NotInvariant, NotPositiveDefinite
from entroflux.qubit_thermal import thermal_kraus
from entroflux.reversal import (
    build_potential,
    check_assumptions,
    check_observable_compatibility,
    check_projector_set,
    classify_kraus,
    dual_map,
    match_eigenindices,
    outcome_potentials,
    time_reverse,
    verify_commutation,
)
from entroflux.testing import random_conforming_map, random_unitary

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)
Z_PROJ = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
X_PROJ = [0.5 * np.array([[1, 1], [1, 1]]), 0.5 * np.array([[1, -1], [-1, 1]])]


def dephasing():
    return KrausMap([np.sqrt(0.5) * np.eye(2), np.sqrt(0.5) * SZ])


def thermal(bw, gamma, wt=0.3):
    return thermal_kraus(-np.tanh(bw / 2), gamma, wt), np.diag([1, np.exp(bw)]) / (1 + np.exp(bw))


def test_time_reverse_examples():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(time_reverse(a), a)
    assert np.array_equal(time_reverse(1j * SY), 1j * SY)
    assert np.array_equal(time_reverse(SY), -SY)
    th = 0.7
    d = np.diag([np.exp(1j * th), np.exp(-1j * th)])
    assert np.allclose(time_reverse(d), np.diag([np.exp(-1j * th), np.exp(1j * th)]))


def test_time_reverse_involution_and_trace():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert np.array_equal(time_reverse(time_reverse(a)), a)
    assert np.trace(time_reverse(a)) == pytest.approx(np.conj(np.trace(a)))


def test_dual_of_dephasing_is_itself():
    d = dual_map(dephasing(), np.eye(2) / 2)
    assert np.allclose(to_superoperator(d), to_superoperator(dephasing()))


def test_dual_of_thermal_is_cptp_and_fixes_conj_pi():
    k, pi = thermal(1.0, 0.7)
    d = dual_map(k, pi)
    assert validate(d).cptp
    assert np.max(np.abs(apply(d, time_reverse(pi)) - time_reverse(pi))) <= 1e-8


def test_dual_of_unitary():
    rng = np.random.default_rng(1)
    u = random_unitary(rng, 3)
    d = dual_map(KrausMap([u]), np.eye(3) / 3)
    assert np.allclose(d.operators[0], np.conj(u.conj().T))


def test_dual_map_errors():
    k, pi = thermal(1.0, 0.7)
    with pytest.raises(NotInvariant):
        dual_map(k, np.eye(2) / 2)
    with pytest.raises(NotPositiveDefinite):
        dual_map(k, np.diag([1.0, 0.0]))


def test_build_potential_examples():
    p = build_potential(np.eye(2) / 2)
    assert np.allclose(p.phi, [np.log(2)] * 2)
    p = build_potential(np.diag([1 / 3, 2 / 3]))
    assert np.allclose(p.phi, [np.log(3), np.log(1.5)])
    assert p.phi[0] - p.phi[1] == pytest.approx(np.log(2))
    p = build_potential(np.diag([0.25, 0.25, 0.5]))
    assert np.allclose(p.phi, [np.log(4), np.log(4), np.log(2)])
    with pytest.raises(NotPositiveDefinite):
        build_potential(np.diag([1.0, 0.0]))


def test_classify_dephasing():
    cls = classify_kraus(dephasing(), build_potential(np.eye(2) / 2))
    assert cls.satisfies_assumption_i and cls.delta_phi == (0.0, 0.0)


@pytest.mark.parametrize("bw", [0.0, 0.5, 1.0, np.log(2), 3.0])
def test_classify_thermal(bw):
    k, pi = thermal(bw, 0.4)
    cls = classify_kraus(k, build_potential(pi))
    assert cls.satisfies_assumption_i
    assert np.allclose(cls.delta_phi, [bw, -bw, 0, 0], atol=1e-9)


def test_classify_unclassifiable():
    pot = build_potential(np.diag([1 / 3, 2 / 3]))
    mixer = KrausMap([SX])  # |0><1| + |1><0|
    cls = classify_kraus(mixer, pot)
    assert cls.delta_phi == (None,) and not cls.satisfies_assumption_i


def test_classify_zero_operator():
    pot = build_potential(np.diag([1 / 3, 2 / 3]))
    cls = classify_kraus(KrausMap([np.eye(2), np.zeros((2, 2))]), pot)
    assert cls.delta_phi == (0.0, 0.0)


def test_degenerate_block_never_splits():
    pot = build_potential(np.diag([0.25, 0.25, 0.5]))
    e = np.zeros((3, 3))
    e[0, 1] = e[1, 0] = 1.0  # moves inside the degenerate block
    cls = classify_kraus(KrausMap([e]), pot)
    assert cls.delta_phi == (0.0,)


def test_verify_commutation():
    pot = build_potential(np.eye(2) / 2)
    dep = dephasing()
    assert verify_commutation(dep, pot, classify_kraus(dep, pot)) == 0
    for bw in (1.0, 0.0):
        k, pi = thermal(bw, 0.4)
        pot = build_potential(pi)
        cls = classify_kraus(k, pot)
        assert verify_commutation(k, pot, cls) <= 1e-10
    pot = build_potential(np.diag([1 / 3, 2 / 3]))
    mixer = KrausMap([SX])
    with pytest.raises(AssumptionNotSatisfied):
        verify_commutation(mixer, pot, classify_kraus(mixer, pot))


def test_verify_commutation_random_conforming():
    rng = np.random.default_rng(2)
    for d in (2, 3, 4):
        for _ in range(10):
            k, pi, _ = random_conforming_map(rng, d)
            pot = build_potential(pi)
            cls = classify_kraus(k, pot)
            assert cls.satisfies_assumption_i
            assert verify_commutation(k, pot, cls) <= 1e-8


def test_observable_compatibility():
    thermal_pot = build_potential(np.diag([1 / 3, 2 / 3]))
    assert check_observable_compatibility(Z_PROJ, thermal_pot)
    assert not check_observable_compatibility(X_PROJ, thermal_pot)
    assert check_observable_compatibility(X_PROJ, build_potential(np.eye(2) / 2))


def test_projector_set_validation():
    with pytest.raises(NotAProjectorSet):
        check_projector_set([np.eye(2)])
    with pytest.raises(NotAProjectorSet):
        check_projector_set([Z_PROJ[0], Z_PROJ[0]])
    with pytest.raises(NotAProjectorSet):
        check_projector_set([Z_PROJ[0], X_PROJ[0]])


def test_outcome_potentials_and_indices():
    pot = build_potential(np.diag([2 / 3, 1 / 3]))
    assert np.allclose(outcome_potentials(Z_PROJ, pot), [np.log(1.5), np.log(3)])
    assert list(match_eigenindices(Z_PROJ, pot)) == [1, 0]
    with pytest.raises(AssumptionNotSatisfied):
        outcome_potentials(X_PROJ, pot)
    assert np.allclose(outcome_potentials(X_PROJ, pot, strict=False), [np.log(2)] * 2)


def test_check_assumptions():
    k, pi = thermal(1.0, 0.4)
    pot = build_potential(pi)
    i, ii, _ = check_assumptions(k, pot, Z_PROJ, Z_PROJ)
    assert i and ii
    i, ii, _ = check_assumptions(k, pot, X_PROJ, Z_PROJ)
    assert i and not ii
