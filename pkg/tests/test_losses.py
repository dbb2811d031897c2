import math

import numpy as np
import pytest

from oracles import (brute_force_infonce, brute_force_text_contrast,
                     finite_difference_grad, max_rel_err)
from tenet import autodiff as ad
from tenet import losses
from tenet.errors import ConfigError, ShapeError

LN_CLOSED_FORM = math.log1p(math.exp(-20.0))  # B=2, cosine +-1, temperature 0.1


def test_action_mse_zero_when_exact():
    pred = ad.Node(np.ones((2, 3, 2)))
    assert losses.action_mse(pred, np.ones((2, 3, 2))).value == 0.0


def test_action_mse_constant_zero_policy():
    # constant-zero prediction against all-ones expert actions: mean of
    # squared per-dimension errors is 1
    pred = ad.Node(np.zeros((4, 2)))
    assert losses.action_mse(pred, np.ones((4, 2))).value == pytest.approx(1.0)


def test_alignment_zero_iff_identical():
    z = np.random.default_rng(0).normal(size=(3, 5))
    assert losses.embedding_alignment(ad.Node(z), ad.Node(z.copy())).value == 0.0


def test_alignment_unit_basis_distance():
    a = ad.Node(np.zeros((1, 6)))
    b = np.zeros((1, 6))
    b[0, 2] = 1.0
    assert losses.embedding_alignment(a, ad.Node(b)).value == pytest.approx(1.0)


def test_alignment_is_mean_of_squared_l2():
    rng = np.random.default_rng(9)
    a, b = rng.normal(size=(4, 8)), rng.normal(size=(4, 8))
    expected = np.mean(np.sum((a - b) ** 2, axis=1))
    got = losses.embedding_alignment(ad.Node(a), ad.Node(b)).value
    assert got == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("b", [2, 4, 8])
def test_identical_embeddings_give_log_batch(b):
    u = np.random.default_rng(1).normal(size=6)
    z = np.tile(u, (b, 1))
    assert losses.symmetric_infonce(ad.Node(z), ad.Node(z.copy()), 0.1).value == \
        pytest.approx(math.log(b), abs=1e-6)
    assert losses.text_contrast(ad.Node(z), 0.1).value == \
        pytest.approx(math.log(b), abs=1e-6)


def test_opposed_pair_closed_form_full_precision():
    u = np.random.default_rng(2).normal(size=7)
    pair = np.stack([u, -u])
    got = losses.symmetric_infonce(ad.Node(pair), ad.Node(pair.copy()), 0.1).value
    assert abs(got - LN_CLOSED_FORM) / LN_CLOSED_FORM < 1e-12
    got_tt = losses.text_contrast(ad.Node(pair), 0.1).value
    assert abs(got_tt - LN_CLOSED_FORM) / LN_CLOSED_FORM < 1e-12


def test_infonce_matches_brute_force_seed13():
    rng = np.random.default_rng(13)
    text, traj = rng.normal(size=(3, 10)), rng.normal(size=(3, 10))
    got = losses.symmetric_infonce(ad.Node(text), ad.Node(traj), 0.1).value
    assert got == pytest.approx(brute_force_infonce(text, traj, 0.1), rel=1e-10)


def test_text_contrast_matches_brute_force_seed17():
    rng = np.random.default_rng(17)
    text = rng.normal(size=(4, 10))
    got = losses.text_contrast(ad.Node(text), 0.1).value
    assert got == pytest.approx(brute_force_text_contrast(text, 0.1), rel=1e-10)


def test_contrastive_losses_scale_invariant():
    rng = np.random.default_rng(3)
    text, traj = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
    base = losses.symmetric_infonce(ad.Node(text), ad.Node(traj), 0.2).value
    scaled = losses.symmetric_infonce(ad.Node(37.0 * text), ad.Node(0.01 * traj), 0.2).value
    assert abs(base - scaled) < 1e-12
    base_tt = losses.text_contrast(ad.Node(text), 0.2).value
    scaled_tt = losses.text_contrast(ad.Node(5.5 * text), 0.2).value
    assert abs(base_tt - scaled_tt) < 1e-12


def test_infonce_permutation_invariant():
    rng = np.random.default_rng(4)
    text, traj = rng.normal(size=(5, 6)), rng.normal(size=(5, 6))
    perm = rng.permutation(5)
    a = losses.symmetric_infonce(ad.Node(text), ad.Node(traj), 0.1).value
    b = losses.symmetric_infonce(ad.Node(text[perm]), ad.Node(traj[perm]), 0.1).value
    assert a == pytest.approx(b, rel=1e-12)


def test_batch_of_one_rejected():
    z = np.ones((1, 4))
    with pytest.raises(ConfigError):
        losses.symmetric_infonce(ad.Node(z), ad.Node(z.copy()), 0.1)
    with pytest.raises(ConfigError):
        losses.text_contrast(ad.Node(z), 0.1)


def test_mismatched_batches_rejected():
    with pytest.raises(ShapeError):
        losses.embedding_alignment(ad.Node(np.ones((2, 4))), ad.Node(np.ones((3, 4))))


def test_paraphrase_positive_uses_second_embedding():
    rng = np.random.default_rng(5)
    text = rng.normal(size=(3, 6))
    same = losses.text_contrast(ad.Node(text), 0.1, paraphrase_emb=ad.Node(text.copy()))
    plain = losses.text_contrast(ad.Node(text), 0.1)
    assert same.value == pytest.approx(plain.value, rel=1e-12)
    other = losses.text_contrast(ad.Node(text), 0.1,
                                 paraphrase_emb=ad.Node(rng.normal(size=(3, 6))))
    assert other.value != pytest.approx(plain.value)


@pytest.mark.parametrize("loss_name", ["infonce", "text_contrast", "alignment"])
def test_loss_gradients_match_finite_differences(loss_name):
    rng = np.random.default_rng(11)
    b, d = 3, 5
    flat = rng.normal(size=2 * b * d)

    def build(node):
        text = ad.reshape(ad.take(node, (slice(0, b * d),)), (b, d))
        traj = ad.reshape(ad.take(node, (slice(b * d, 2 * b * d),)), (b, d))
        if loss_name == "infonce":
            return losses.symmetric_infonce(text, traj, 0.1)
        if loss_name == "text_contrast":
            return losses.text_contrast(text, 0.1)
        return losses.embedding_alignment(text, traj)

    _, g = ad.value_and_grad(build, flat)
    fd = finite_difference_grad(lambda p: float(build(ad.Node(p)).value.item()), flat)
    assert max_rel_err(g, fd) < 1e-4
