"""Fold a trained actor into the portable inference-weights document.

The evaluator's contract: per-input affine normalization, then
(affine -> batch-norm affine -> ReLU) x 3, then affine -> sigmoid scaled to
[0, 100].  The actor's input batch-norm composes with the fixed state scaling
into the normalization entry; hidden batch-norms are exported as running
statistics.
"""

from __future__ import annotations

import json

import numpy as np
import torch.nn as nn


class ExportError(ValueError):
    pass


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise ExportError(f"non-finite values in {name}")
    return arr


def actor_to_weights_doc(actor, state_scale) -> dict:
    """Serialize an eval-mode actor; ``state_scale`` is the fixed per-input
    divisor (holding, price, ttm) applied before the network."""
    modules = list(actor.trunk) + [actor.head]
    bn_in = modules[0]
    if not isinstance(bn_in, nn.BatchNorm1d):
        raise ExportError("expected an input batch-norm layer")
    gamma = bn_in.weight.detach().numpy().astype(float)
    beta = bn_in.bias.detach().numpy().astype(float)
    mean = bn_in.running_mean.detach().numpy().astype(float)
    var = bn_in.running_var.detach().numpy().astype(float)
    denom = np.sqrt(var + bn_in.eps)
    scale_fix = np.asarray(state_scale, dtype=float)
    # y_i = gamma_i (x_i / s_i - mu_i) / denom_i + beta_i  ==  (x_i - off_i) / sc_i
    a = gamma / (scale_fix * denom)
    if np.any(np.abs(a) < 1e-300):
        raise ExportError("input batch-norm collapsed a dimension")
    b = beta - gamma * mean / denom
    input_scale = 1.0 / a
    input_offset = -b / a
    _check_finite("input normalization", input_scale)
    _check_finite("input normalization", input_offset)

    layers = []
    i = 1
    while i < len(modules):
        linear = modules[i]
        if not isinstance(linear, nn.Linear):
            raise ExportError(f"expected Linear at position {i}")
        entry = {
            "weight": _check_finite(
                "weight", linear.weight.detach().numpy().astype(float)).tolist(),
            "bias": _check_finite(
                "bias", linear.bias.detach().numpy().astype(float)).tolist(),
            "activation": "none",
            "batch_norm": None,
        }
        i += 1
        if i < len(modules) and isinstance(modules[i], nn.BatchNorm1d):
            bn = modules[i]
            entry["batch_norm"] = {
                "mean": _check_finite("bn mean", bn.running_mean.detach().numpy().astype(float)).tolist(),
                "var": _check_finite("bn var", bn.running_var.detach().numpy().astype(float)).tolist(),
                "scale": _check_finite("bn scale", bn.weight.detach().numpy().astype(float)).tolist(),
                "shift": _check_finite("bn shift", bn.bias.detach().numpy().astype(float)).tolist(),
                "epsilon": float(bn.eps),
            }
            i += 1
        if i < len(modules) and isinstance(modules[i], nn.ReLU):
            entry["activation"] = "relu"
            i += 1
        layers.append(entry)
    layers[-1]["activation"] = "sigmoid"

    return {
        "schema_version": 1,
        "input_offset": input_offset.tolist(),
        "input_scale": input_scale.tolist(),
        "output_scale": 100.0,
        "layers": layers,
    }


def save_weights(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def forward_doc(doc: dict, states) -> np.ndarray:
    """Reference forward pass over the serialized document (n, 3) -> (n,)."""
    x = np.asarray(states, dtype=float)
    h = (x - np.array(doc["input_offset"])) / np.array(doc["input_scale"])
    for layer in doc["layers"]:
        h = h @ np.array(layer["weight"]).T + np.array(layer["bias"])
        bn = layer.get("batch_norm")
        if bn is not None:
            h = (h - np.array(bn["mean"])) / np.sqrt(np.array(bn["var"]) + bn["epsilon"])
            h = h * np.array(bn["scale"]) + np.array(bn["shift"])
        if layer["activation"] == "relu":
            h = np.maximum(h, 0.0)
        elif layer["activation"] == "sigmoid":
            h = 1.0 / (1.0 + np.exp(-h))
    return doc["output_scale"] * h[:, 0]
