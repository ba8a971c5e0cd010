import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from nonlocal_limit.kernels import (KernelFamily, ScaledKernel, Shape, Side, antiderivative, eval_kernel,
                                    moments, stencil, tail_mass, truncated_first_moment)


def kern(shape, side=Side.LEFT, param=1.0, k=1.0):
    return ScaledKernel(KernelFamily(side, Shape(shape), param), k)


# --- worked values -----------------------------------------------------------

def test_eval_kernel_values():
    assert eval_kernel(kern("box"), 0.5) == 1.0
    assert eval_kernel(kern("box", k=2), 0.25) == 2.0
    assert eval_kernel(kern("exponential"), 1.0) == pytest.approx(math.exp(-1), abs=1e-12)


def test_eval_kernel_zero_on_wrong_side():
    assert eval_kernel(kern("box"), -0.5) == 0.0
    assert eval_kernel(kern("box", Side.RIGHT), 0.5) == 0.0
    assert eval_kernel(kern("box", Side.RIGHT), -0.5) == 1.0


def test_antiderivative_values():
    assert antiderivative(kern("box"), 0.5) == 0.5
    assert antiderivative(kern("box"), 2.0) == 1.0
    closed = antiderivative(kern("exponential", k=3), 1.0)
    oracle, _ = quad(lambda x: eval_kernel(kern("exponential", k=3), x), 0, 1, epsabs=1e-14)
    assert closed == pytest.approx(1 - math.exp(-3), abs=1e-12)
    assert closed == pytest.approx(oracle, abs=1e-12)


def test_truncated_first_moment_values():
    assert truncated_first_moment(kern("box")) == pytest.approx(0.5, abs=1e-15)
    assert truncated_first_moment(kern("box", k=10)) == pytest.approx(0.05, abs=1e-15)
    k10 = kern("box", k=10)
    oracle, _ = quad(lambda x: min(1.0, x) * eval_kernel(k10, x), 0, 0.1, epsabs=1e-14)
    assert truncated_first_moment(k10) == pytest.approx(oracle, abs=1e-12)


def test_tail_mass_values():
    assert tail_mass(kern("box"), 0.5) == 0.5
    assert tail_mass(kern("box", k=4), 0.5) == 0.0
    e = kern("exponential", k=2)
    oracle, _ = quad(lambda x: eval_kernel(e, x), 1, np.inf)
    assert tail_mass(e, 1.0) == pytest.approx(math.exp(-2), abs=1e-12)
    assert tail_mass(e, 1.0) == pytest.approx(oracle, abs=1e-10)


def test_tail_mass_rejects_nonpositive():
    with pytest.raises(ValueError):
        tail_mass(kern("box"), 0.0)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        KernelFamily(Side.LEFT, Shape.BOX, 0.0)
    with pytest.raises(ValueError):
        ScaledKernel(KernelFamily(Side.LEFT, Shape.BOX, 1.0), -1.0)


# --- invariants ----------------------------------------------------------------

shapes = st.sampled_from(list(Shape))
sides = st.sampled_from(list(Side))
params = st.floats(0.2, 5.0)
scales = st.floats(1.0, 300.0)


@given(shapes, sides, params, scales)
def test_unit_mass_by_quadrature(shape, side, p, k):
    kk = ScaledKernel(KernelFamily(side, shape, p), k)
    sgn = 1 if side is Side.LEFT else -1
    L = kk.support_length()
    pts = None if shape is Shape.EXPONENTIAL else [L]
    mass, _ = quad(lambda d: eval_kernel(kk, sgn * d), 0, np.inf if pts is None else L, epsabs=1e-13,
                   limit=200)
    assert abs(mass - 1.0) <= 1e-10
    assert abs(moments(kk).total_mass - 1.0) <= 1e-12


@given(shapes, sides, params, scales)
def test_monotone_profile(shape, side, p, k):
    kk = ScaledKernel(KernelFamily(side, shape, p), k)
    d = np.linspace(1e-9, kk.support_length(), 1000)
    vals = eval_kernel(kk, d if side is Side.LEFT else -d)
    assert np.all(vals >= 0)
    assert np.all(np.diff(vals) <= 1e-12 * vals.max())


@given(shapes, params, scales, st.floats(0.0, 3.0))
def test_antiderivative_within_unit_interval_and_monotone(shape, p, k, x):
    kk = ScaledKernel(KernelFamily(Side.LEFT, shape, p), k)
    a = antiderivative(kk, x)
    assert 0.0 <= a <= 1.0
    assert antiderivative(kk, x + 0.01) >= a


@pytest.mark.parametrize("shape", list(Shape))
def test_moment_and_tail_decrease_with_k(shape):
    ks = [2.0 ** j for j in range(9)]
    m = [truncated_first_moment(kern(shape, k=k)) for k in ks]
    tails = [tail_mass(kern(shape, k=k), 0.1) for k in ks]
    assert all(b < a for a, b in zip(m, m[1:]))
    for a, b in zip(tails, tails[1:]):
        assert b < a or (a == 0.0 and b == 0.0)


@pytest.mark.parametrize("shape", [Shape.BOX, Shape.TRIANGLE])
@given(p=st.floats(0.1, 0.99), k=st.floats(1.0, 500.0))
def test_scaling_law_compact_shapes(shape, p, k):
    # support (0, p/k) sits inside (0, 1), so M(k) * k is scale free
    base = truncated_first_moment(ScaledKernel(KernelFamily(Side.LEFT, shape, p), 1.0))
    scaled = truncated_first_moment(ScaledKernel(KernelFamily(Side.LEFT, shape, p), k))
    assert scaled * k == pytest.approx(base, rel=1e-12)


def test_moments_fields_consistent():
    m = moments(kern("triangle", k=4))
    assert 0 <= m.truncated_first_moment <= m.total_mass
    xs = np.linspace(0.01, 1, 50)
    t = [m.tail_mass(x) for x in xs]
    assert all(b <= a for a, b in zip(t, t[1:]))


@given(shapes, params, st.floats(1.0, 100.0), st.sampled_from([1 / 64, 1 / 256, 1 / 1000]), st.booleans())
def test_stencil_weights_sum_to_one(shape, p, k, dx, centered):
    w = stencil(ScaledKernel(KernelFamily(Side.LEFT, shape, p), k), dx, centered)
    assert np.all(w >= 0)
    assert abs(w.sum() - 1.0) <= 1e-13


def test_stencil_dirac():
    assert stencil(None, 0.1, True).tolist() == [1.0]


def test_serialization():
    d = kern("triangle", Side.RIGHT, 0.5, 3.0).to_dict()
    assert d == {"side": "right", "shape": "triangle", "param": 0.5, "k": 3.0}
