import math

import numpy as np
import pytest
import torch

from csi_supcon.objective import (
    LossInputs,
    anchor_loss,
    dm_loss,
    dm_loss_torch,
    supcon_grad_anchor,
    supcon_loss,
    supcon_loss_torch,
)

from oracles import central_diff_grad, supcon_anchor_literal


def random_inputs(rng, R=4, P=3, N=5, tau=1.5, scale=1.0):
    return LossInputs(scale * rng.standard_normal(R), scale * rng.standard_normal((P, R)), scale * rng.standard_normal((N, R)), tau)


@pytest.mark.parametrize("P, N, expected", [(1, 1, math.log(2)), (2, 2, 2 * math.log(4))])
def test_identical_embeddings_closed_form(P, N, expected):
    z = np.array([0.3, -0.2, 0.5])
    inp = LossInputs(z, np.tile(z, (P, 1)), np.tile(z, (N, 1)), 1.5)
    assert supcon_loss([inp]) == pytest.approx(expected, rel=1e-12)


def test_matches_literal_oracle():
    rng = np.random.default_rng(0)
    batch = [random_inputs(rng) for _ in range(4)]
    literal = np.mean([supcon_anchor_literal(b.anchor, b.positives, b.negatives, b.tau) for b in batch])
    assert supcon_loss(batch) == pytest.approx(literal, rel=1e-12)


def test_large_logits_stay_finite():
    rng = np.random.default_rng(1)
    inp = random_inputs(rng, scale=40.0, tau=0.1)
    assert math.isfinite(anchor_loss(inp))


def test_invalid_inputs():
    with pytest.raises(ValueError):
        LossInputs(np.ones(3), np.ones((1, 3)), np.ones((1, 3)), 0.0)
    with pytest.raises(ValueError):
        LossInputs(np.ones(3), np.ones((1, 4)), np.ones((1, 3)))


def test_gradient_zero_at_symmetric_point():
    z = np.array([1.0, 2.0, -0.5])
    inp = LossInputs(z, np.tile(z, (3, 1)), np.tile(z, (3, 1)), 1.5)
    np.testing.assert_allclose(supcon_grad_anchor(inp), 0.0, atol=1e-14)


def test_gradient_one_positive_one_negative():
    rng = np.random.default_rng(2)
    za, zp, zn = rng.standard_normal((3, 4))
    # L = -za.zp + log(e^{za.zp} + e^{za.zn}), so dL/dza = -(1 - x_p) zp + x_n zn
    x_p = math.exp(za @ zp) / (math.exp(za @ zp) + math.exp(za @ zn))
    expected = -(1 - x_p) * zp + (1 - x_p) * zn
    np.testing.assert_allclose(supcon_grad_anchor(LossInputs(za, [zp], [zn], 1.0)), expected, rtol=1e-12)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    for _ in range(10):
        inp = random_inputs(rng)
        f = lambda za: anchor_loss(LossInputs(za, inp.positives, inp.negatives, inp.tau))  # noqa: E731
        fd = central_diff_grad(f, inp.anchor)
        g = supcon_grad_anchor(inp)
        assert np.linalg.norm(g - fd) <= 1e-4 * np.linalg.norm(fd)


def test_torch_loss_and_autograd_agree_with_reference():
    rng = np.random.default_rng(4)
    A, P, N, R = 6, 3, 5, 8
    za = torch.tensor(rng.standard_normal((A, R)), requires_grad=True)
    zp = torch.tensor(rng.standard_normal((A, P, R)))
    zn = torch.tensor(rng.standard_normal((A, N, R)))
    loss = supcon_loss_torch(za, zp, zn, 1.5)
    loss.backward()
    batch = [LossInputs(za[a].detach().numpy(), zp[a].numpy(), zn[a].numpy(), 1.5) for a in range(A)]
    assert loss.item() == pytest.approx(supcon_loss(batch), rel=1e-12)
    for a in range(A):
        # batch mean divides each anchor's gradient by A
        np.testing.assert_allclose(A * za.grad[a].numpy(), supcon_grad_anchor(batch[a]), rtol=1e-5)


def test_temperature_limit():
    rng = np.random.default_rng(5)
    inp = random_inputs(rng, P=3, N=5, tau=1e6)
    assert anchor_loss(inp) == pytest.approx(3 * math.log(8), rel=1e-3)


def test_attraction_towards_positives_statistically():
    rng = np.random.default_rng(6)
    hits = 0
    for _ in range(200):
        inp = random_inputs(rng, R=16, P=4, N=64, scale=0.25)
        x = np.exp(inp.positives @ inp.anchor / inp.tau)
        x_all = x.sum() + np.exp(inp.negatives @ inp.anchor / inp.tau).sum()
        assert np.mean(x / x_all < 1 / 4) > 0.5
        descent = -supcon_grad_anchor(inp)
        hits += descent @ inp.positives.mean(axis=0) > 0
    assert hits / 200 > 0.9


def test_dm_loss():
    assert dm_loss([[1.0, 2.0]], [[1.0, 2.0]]) == 0.0
    assert dm_loss([[3.0, 4.0]], [[0.0, 0.0]]) == pytest.approx(5.0)
    rng = np.random.default_rng(7)
    z, p = rng.standard_normal((9, 2)), rng.standard_normal((9, 2))
    oracle = sum(math.hypot(*(z[i] - p[i])) for i in range(9)) / 9
    assert dm_loss(z, p) == pytest.approx(oracle, rel=1e-14)
    assert dm_loss_torch(torch.tensor(z), torch.tensor(p)).item() == pytest.approx(oracle, rel=1e-14)
    with pytest.raises(ValueError):
        dm_loss(np.zeros((2, 3)), np.zeros((2, 3)))
