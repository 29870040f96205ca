import math

import numpy as np
import pytest
import torch
from hypothesis import assume, given
from hypothesis import strategies as st

from gancodec.codec import (
    LatentCode,
    QuantizerSpec,
    dequantize,
    quantize_hard,
    quantize_soft,
    quantize_soft_grad,
    quantize_training,
)
from gancodec.errors import ConfigurationError, FormatError


def soft_oracle(r, levels):
    """Direct scalar evaluation with plain math.exp loops."""
    num = sum(c * math.exp(-abs(c - r)) for c in levels)
    den = sum(math.exp(-abs(c - r)) for c in levels)
    return num / den


def fd(f, r, h=1e-4):
    return (f(r + h) - f(r - h)) / (2 * h)


levels_strategy = st.lists(st.floats(-1, 1, allow_nan=False), min_size=2, max_size=8, unique=True).map(sorted).filter(
    lambda c: min(np.diff(c)) > 1e-3)


# -- QuantizerSpec validation --------------------------------------------------------

def test_uniform_levels():
    np.testing.assert_allclose(QuantizerSpec.uniform(4).levels, [-1, -1 / 3, 1 / 3, 1])


@pytest.mark.parametrize("levels", [[0.0], [0.5, 0.2], [0.0, 0.0], [-2.0, 0.0]])
def test_invalid_levels(levels):
    with pytest.raises(ConfigurationError):
        QuantizerSpec(levels)


def test_invalid_mode():
    with pytest.raises(ConfigurationError):
        QuantizerSpec([0.0, 1.0], "round")


# -- soft quantiser ---------------------------------------------------------

def test_soft_midpoint():
    assert quantize_soft(0.5, QuantizerSpec([0.0, 1.0])) == pytest.approx(0.5, abs=1e-15)


def test_soft_hand_value():
    want = math.exp(-1) / (1 + math.exp(-1))
    assert quantize_soft(0.0, QuantizerSpec([0.0, 1.0])) == pytest.approx(want, abs=1e-12)
    assert want == pytest.approx(0.26894, abs=1e-5)


def test_soft_l4_at_top_level():
    q = QuantizerSpec.uniform(4)
    got = quantize_soft(1.0, q)
    assert got == pytest.approx(soft_oracle(1.0, q.levels.tolist()), abs=1e-12)
    assert 1 / 3 < got < 1


@given(levels_strategy, st.floats(-3, 3, allow_nan=False))
def test_soft_matches_oracle_and_is_convex(levels, r):
    q = QuantizerSpec(levels)
    got = quantize_soft(r, q)
    assert got == pytest.approx(soft_oracle(r, levels), abs=1e-9)
    assert min(levels) - 1e-12 <= got <= max(levels) + 1e-12


@given(st.floats(-1, 0.99), st.floats(0.005, 1))
def test_soft_l2_symmetry(a, gap):
    b = a + gap
    assume(b <= 1)
    q = QuantizerSpec([a, b])
    assert quantize_soft(0.5 * (a + b), q) == pytest.approx(0.5 * (a + b), abs=1e-12)


def test_soft_vectorised_matches_scalar(rng):
    q = QuantizerSpec.uniform(8)
    r = rng.uniform(-1.5, 1.5, (3, 4))
    np.testing.assert_allclose(quantize_soft(r, q), [[quantize_soft(v, q) for v in row] for row in r])


@given(levels_strategy, st.floats(-2, 2, allow_nan=False))
def test_gradient_matches_finite_differences(levels, r):
    # the surrogate is non-smooth only where r crosses a level
    assume(min(abs(r - c) for c in levels) > 1e-3)
    q = QuantizerSpec(levels)
    g = quantize_soft_grad(r, q)
    num = fd(lambda t: soft_oracle(t, levels), r)
    assert g == pytest.approx(num, rel=1e-4, abs=1e-8)


def test_gradient_kink_convention():
    # at r == c_j the |.| term contributes sign(0) = 0
    q = QuantizerSpec([0.0, 1.0])
    p1 = math.exp(-1) / (1 + math.exp(-1))
    r_hat = p1
    want = -(p1 * -1 * (1 - r_hat))
    assert quantize_soft_grad(0.0, q) == pytest.approx(want, abs=1e-12)


# -- hard quantiser ---------------------------------------------------------

def test_hard_examples():
    q2 = QuantizerSpec([-1.0, 1.0])
    assert quantize_hard(np.full((1, 1, 1), 0.9), q2).indices.item() == 1
    assert quantize_hard(np.zeros((1, 1, 1)), q2).indices.item() == 0  # tie -> lower
    q4 = QuantizerSpec.uniform(4)
    code = quantize_hard(q4.levels.reshape(1, 1, 4), q4)
    assert code.indices.ravel().tolist() == [0, 1, 2, 3]


def test_hard_tie_every_midpoint():
    q = QuantizerSpec.uniform(8)
    code = quantize_hard(q.midpoints.reshape(1, 1, -1), q)
    assert code.indices.ravel().tolist() == list(range(7))


@given(st.integers(2, 64), st.integers(0, 2**31))
def test_hard_nearest_and_idempotent(L, seed):
    q = QuantizerSpec.uniform(L)
    x = np.random.default_rng(seed).uniform(-1.5, 1.5, (3, 4, 2))
    code = quantize_hard(x, q)
    dist = np.abs(x[..., None] - q.levels)
    np.testing.assert_allclose(dist.min(-1), np.take_along_axis(dist, code.indices[..., None], -1)[..., 0])
    assert quantize_hard(dequantize(code, q), q) == code


def test_dequantize():
    q = QuantizerSpec([-1.0, 1.0])
    assert dequantize(LatentCode(np.zeros((1, 1, 1), int), 2), q).item() == -1.0
    code = LatentCode(np.random.default_rng(0).integers(0, 2, (4, 4, 3)), 2)
    assert set(np.unique(dequantize(code, q))) <= {-1.0, 1.0}
    with pytest.raises(FormatError):
        dequantize(LatentCode(np.full((1, 1, 1), 2), 2), q)
    with pytest.raises(FormatError):
        dequantize(code, QuantizerSpec.uniform(4))


# -- training-graph quantiser -------------------------------------------------

def test_training_soft_forward():
    q = QuantizerSpec([0.0, 1.0], "soft")
    out = quantize_training(torch.zeros(1, dtype=torch.float64), q)
    assert out.item() == pytest.approx(0.26894142136999510, abs=1e-12)


def test_straight_through_forward_and_slope():
    q = QuantizerSpec([0.0, 1.0])
    r = torch.tensor([0.4], dtype=torch.float64, requires_grad=True)
    out = quantize_training(r, q, "straight-through")
    assert out.item() == 0.0
    out.sum().backward()
    slope = fd(lambda t: soft_oracle(t, [0.0, 1.0]), 0.4)
    assert r.grad.item() == pytest.approx(slope, rel=1e-4)


def test_hard_mode_blocks_gradient():
    q = QuantizerSpec.uniform(4)
    r = torch.linspace(-1, 1, 9, dtype=torch.float64, requires_grad=True)
    out = quantize_training(r, q, "hard")
    assert not out.requires_grad
    want = q.levels[quantize_hard(r.detach().numpy().reshape(1, 1, -1), q).indices.ravel()]
    np.testing.assert_array_equal(out.numpy(), want)


def test_torch_hard_matches_numpy(rng):
    q = QuantizerSpec.uniform(16)
    x = np.concatenate([rng.uniform(-1.2, 1.2, 500), q.midpoints])
    t = quantize_training(torch.from_numpy(x), q, "hard").numpy()
    np.testing.assert_array_equal(t, dequantize(quantize_hard(x.reshape(1, 1, -1), q), q).ravel())
