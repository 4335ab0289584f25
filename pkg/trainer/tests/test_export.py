import json

import numpy as np
import pytest
import torch

import chsim
from chsim.data_io import load_policy_weights
from chsim.errors import WeightsFormatError

from chtrainer.export import ExportError, actor_to_weights_doc, forward_doc, save_weights
from chtrainer.networks import Actor


@pytest.fixture()
def warmed_actor():
    torch.set_default_dtype(torch.float64)
    torch.manual_seed(11)
    actor = Actor()
    actor.train()
    for _ in range(8):  # populate batch-norm running statistics
        actor(torch.randn(64, 3))
    actor.eval()
    return actor


def random_states(n=100, seed=2):
    rng = np.random.default_rng(seed)
    return np.column_stack([rng.uniform(0, 100, n), rng.uniform(60, 150, n),
                            rng.integers(1, 31, n).astype(float)])


def test_fresh_actor_exports_valid_file(tmp_path, warmed_actor):
    doc = actor_to_weights_doc(warmed_actor, state_scale=(100.0, 100.0, 30.0))
    path = tmp_path / "w.json"
    save_weights(doc, path)
    weights = load_policy_weights(path)  # evaluator-side validation passes
    out = forward_doc(doc, random_states())
    assert np.all(out >= 0.0) and np.all(out <= 100.0)
    state = chsim.HedgingEpisodeState(holding=10.0, price=100.0, ttm_days=15,
                                      step_index=15)
    assert 0.0 <= chsim.policy_forward(weights, state) <= 100.0


def test_round_trip_agreement_with_evaluator(tmp_path, warmed_actor):
    doc = actor_to_weights_doc(warmed_actor, state_scale=(100.0, 100.0, 30.0))
    path = tmp_path / "w.json"
    save_weights(doc, path)
    weights = load_policy_weights(path)
    states = random_states(100)
    norm = np.column_stack([states[:, 0] / 100.0, states[:, 1] / 100.0,
                            states[:, 2] / 30.0])
    with torch.no_grad():
        torch_out = warmed_actor(torch.from_numpy(norm)).numpy()
    worst = 0.0
    for i in range(100):
        st = chsim.HedgingEpisodeState(holding=states[i, 0], price=states[i, 1],
                                       ttm_days=int(states[i, 2]), step_index=0)
        worst = max(worst, abs(chsim.policy_forward(weights, st) - torch_out[i]))
    assert worst <= 1e-5


def test_mutated_dimension_rejected_by_evaluator(tmp_path, warmed_actor):
    doc = actor_to_weights_doc(warmed_actor, state_scale=(100.0, 100.0, 30.0))
    doc["layers"][1]["weight"] = [row[:-1] for row in doc["layers"][1]["weight"]]
    path = tmp_path / "broken.json"
    save_weights(doc, path)
    with pytest.raises(WeightsFormatError):
        load_policy_weights(path)


def test_nonfinite_weights_rejected(warmed_actor):
    with torch.no_grad():
        warmed_actor.head.bias.fill_(float("nan"))
    with pytest.raises(ExportError):
        actor_to_weights_doc(warmed_actor, state_scale=(100.0, 100.0, 30.0))
