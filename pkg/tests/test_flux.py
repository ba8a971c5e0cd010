import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nonlocal_limit.flux import (BUILTIN_FLUXES, Convexity, SplitMode, builtin_flux, eval_split, make_split,
                                 polynomial_flux, shift_model, split_gradient_bound, velocity_bound)


def all_splits(q_min=0.0, q_max=1.0):
    for name in BUILTIN_FLUXES:
        for mode in SplitMode:
            try:
                yield name, mode, make_split(builtin_flux(name, q_min, q_max), mode)
            except ValueError:
                assert name in ("burgers", "cubic") and mode is SplitMode.DOWNSTREAM


def test_builtin_values():
    assert builtin_flux("burgers").f(2.0) == 2.0
    assert builtin_flux("lwr").vtilde(0.5) == 0.5
    assert builtin_flux("burgers").vtilde(0.0) == 0.0


def test_convexity_tags():
    assert builtin_flux("burgers").convexity is Convexity.CONVEX
    assert builtin_flux("lwr").convexity is Convexity.CONCAVE
    assert builtin_flux("cubic", 0.0, 1.0).convexity is Convexity.CONVEX
    assert builtin_flux("cubic", -1.0, 1.0).convexity is Convexity.NEITHER


def test_unknown_flux_and_constant_term():
    with pytest.raises((ValueError, KeyError)):
        builtin_flux("greenberg")
    with pytest.raises(ValueError):
        polynomial_flux([0.1, 1.0])


@pytest.mark.parametrize("name", list(BUILTIN_FLUXES))
def test_flux_model_invariants(name):
    fm = builtin_flux(name, 0.0, 1.0)
    s = np.linspace(0.0, 1.0, 1000)
    nz = s[s != 0]
    assert np.max(np.abs(nz * fm.vtilde(nz) - fm.f(nz))) <= 1e-12
    assert fm.vtilde(0.0) == pytest.approx(fm.fprime(0.0), abs=1e-15)
    h = 1e-6
    fd = (fm.f(s + h) - fm.f(s - h)) / (2 * h)
    assert np.max(np.abs(fd - fm.fprime(s))) <= 1e-6


def test_split_worked_values():
    lwr = builtin_flux("lwr")
    mid = make_split(lwr, "midpoint", 1.0)
    assert eval_split(mid, 0.5, 0.5) == pytest.approx(0.5, abs=1e-15)
    # hand formula: V~(0.5) + 1 * (0.6 - 0.4)
    assert eval_split(mid, 0.6, 0.4) == pytest.approx((1 - 0.5) + 0.2, abs=1e-15)
    eo = make_split(builtin_flux("burgers"), "eo")
    assert abs(1.0 * eval_split(eo, 1.0, 1.0) - 0.5) <= 1e-8


def test_eo_against_simpson_oracle():
    # composite Simpson on 512 panels of max(V~',0) and min(V~',0)
    fm = builtin_flux("cubic", -1.0, 1.0)
    eo = make_split(fm, "eo")

    def simpson(g, b, n=512):
        x = np.linspace(0.0, b, n + 1)
        w = np.ones(n + 1)
        w[1:-1:2], w[2:-1:2] = 4, 2
        return (b / n) / 3 * np.sum(w * g(x))

    for a, b in [(0.7, -0.3), (-0.9, 0.4), (0.2, 0.9)]:
        ref = (fm.vtilde(0.0) + simpson(lambda s: np.maximum(fm.vtilde_prime(s), 0.0), a)
               + simpson(lambda s: np.minimum(fm.vtilde_prime(s), 0.0), b))
        assert eval_split(eo, a, b) == pytest.approx(ref, abs=1e-6)


def test_compatibility_identity_every_split():
    s = np.linspace(0.0, 1.0, 101)
    for _, _, sp in all_splits():
        assert np.max(np.abs(s * sp(s, s) - sp.base.f(s))) <= 1e-8


def test_split_monotone_on_grid():
    s = np.linspace(0.0, 1.0, 50)
    A, B = np.meshgrid(s, s, indexing="ij")
    for _, _, sp in all_splits():
        V = sp(A, B)
        assert np.all(np.diff(V, axis=0) >= -1e-13)
        assert np.all(np.diff(V, axis=1) <= 1e-13)


@given(st.sampled_from(list(BUILTIN_FLUXES)), st.sampled_from(list(SplitMode)),
       st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_split_monotone_pairwise(name, mode, a1, a2, b1, b2):
    try:
        sp = make_split(builtin_flux(name, 0.0, 1.0), mode)
    except ValueError:
        return
    a1, a2 = sorted((a1, a2))
    b1, b2 = sorted((b1, b2))
    assert eval_split(sp, a2, b1) >= eval_split(sp, a1, b1) - 1e-13
    assert eval_split(sp, a1, b2) <= eval_split(sp, a1, b1) + 1e-13


def test_midpoint_minimal_kappa_is_admissible():
    fm = builtin_flux("cubic", 0.0, 1.0)
    sp = make_split(fm, "midpoint", fm.vtilde_lipschitz)
    s = np.linspace(0, 1, 50)
    A, B = np.meshgrid(s, s, indexing="ij")
    assert np.all(np.diff(sp(A, B), axis=0) >= -1e-13)
    with pytest.raises(ValueError):
        make_split(fm, "midpoint", 0.5 * fm.vtilde_lipschitz)


def test_gradient_bound_examples():
    assert 1.5 <= split_gradient_bound(make_split(builtin_flux("lwr"), "midpoint", 1.0)) <= 1.6
    assert split_gradient_bound(make_split(builtin_flux("lwr"), "downstream")) == pytest.approx(1.0, abs=0.06)
    with pytest.raises(ValueError):
        make_split(builtin_flux("burgers"), "downstream")


def test_velocity_bound_covers_samples():
    sp = make_split(builtin_flux("burgers", 0.0, 0.8), "midpoint")
    s = np.random.default_rng(3).uniform(0, 0.8, (2, 500))
    assert np.max(np.abs(sp(s[0], s[1]))) <= velocity_bound(sp)


def test_shift_examples():
    sh = shift_model(builtin_flux("burgers", -1.0, 1.0), -1.0)
    s = np.linspace(0, 2, 21)
    assert np.allclose(sh.f_shift(s), s ** 2 / 2 - s, atol=1e-14)
    assert sh.f_shift(0.0) == 0.0
    base = builtin_flux("lwr")
    ident = shift_model(base, 0.0)
    assert np.allclose(ident.f_shift(s), base.f(s), atol=0)
    lwr = shift_model(builtin_flux("lwr"), 0.2)
    assert lwr.vtilde_shift(0.0) == pytest.approx(0.6, abs=1e-14)
    small = np.array([1e-4, 1e-5, 1e-6])
    assert np.allclose((base.f(small + 0.2) - base.f(0.2)) / small, 0.6, atol=2e-4)


@given(st.sampled_from(list(BUILTIN_FLUXES)), st.floats(-2.0, 2.0))
def test_shift_invariants(name, m):
    sh = shift_model(builtin_flux(name, -3.0, 3.0), m)
    assert sh.f_shift(0.0) == 0.0
    s = np.concatenate([np.linspace(-1, -1e-4, 40), np.linspace(1e-4, 1, 40)])
    b = sh.base
    assert np.max(np.abs(sh.vtilde_shift(s) - (b.f(s + m) - b.f(m)) / s)) <= 1e-10
    assert np.max(np.abs(s * sh.vtilde_shift(s) - sh.f_shift(s))) <= 1e-12


def test_split_serialization():
    assert make_split(builtin_flux("lwr"), "midpoint", 1.5).to_dict() == {"mode": "midpoint", "kappa": 1.5}
