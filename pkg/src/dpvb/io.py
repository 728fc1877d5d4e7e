"""JSON file formats for datasets, released tables and fitted posteriors.

Dataset (``kind: "true"``)::

    {"format": "dpvb", "version": 1, "kind": "true",
     "shape": {"I": 2, "K": 3, "levels": [2, 2, 3], "N": 100},
     "params": {"class_probs": [...], "cond_probs": [[[...], ...], ...]},   # optional
     "counts": [[[n_11, n_12], [n_21, n_22]], ...],                          # one I x J_k table per feature
     "class_counts": [n_1, n_2]}

Released tables (``kind: "noisy"``) carry real-valued ``counts`` plus
``epsilon_per_query``, ``scale`` and ``total_epsilon``; they never carry the
true tables or class counts. Posterior files (``kind: "posterior"``) are
written by :func:`write_posterior`.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from .dpmech import NoisyMarginals, PrivacySpec
from .nbmodel import ModelParams, ModelShape, TrueMarginals

FORMAT = "dpvb"
VERSION = 1


class FormatError(ValueError):
    """A file parsed as JSON but does not follow the expected layout."""


def _shape_to_dict(shape: ModelShape) -> dict:
    return {"I": shape.num_classes, "K": shape.num_features,
            "levels": list(shape.levels), "N": shape.n_total}


def _shape_from_dict(d: dict) -> ModelShape:
    try:
        shape = ModelShape(d["I"], tuple(d["levels"]), d["N"])
    except KeyError as exc:
        raise FormatError(f"shape is missing field {exc}") from None
    if "K" in d and int(d["K"]) != shape.num_features:
        raise FormatError("shape.K does not match the number of levels")
    return shape


def params_to_dict(params: ModelParams) -> dict:
    return {"class_probs": params.class_probs.tolist(),
            "cond_probs": [t.tolist() for t in params.cond_probs]}


def params_from_dict(d: dict) -> ModelParams:
    return ModelParams(np.asarray(d["class_probs"], float),
                       tuple(np.asarray(t, float) for t in d["cond_probs"]))


def _write(path, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=False, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _read(path, kind: Optional[str] = None) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(payload, dict) or payload.get("format") != FORMAT:
        raise FormatError(f"{path}: not a {FORMAT} file")
    if kind is not None and payload.get("kind") != kind:
        raise FormatError(f"{path}: expected a {kind!r} file, found {payload.get('kind')!r}")
    return payload


def write_dataset(path, marginals: TrueMarginals, params: Optional[ModelParams] = None) -> None:
    payload = {"format": FORMAT, "version": VERSION, "kind": "true",
               "shape": _shape_to_dict(marginals.shape)}
    if params is not None:
        payload["params"] = params_to_dict(params)
    payload["counts"] = [t.tolist() for t in marginals.counts]
    payload["class_counts"] = marginals.class_counts.tolist()
    _write(path, payload)


def read_dataset(path):
    """Return ``(TrueMarginals, ModelParams or None)``."""
    d = _read(path, "true")
    shape = _shape_from_dict(d["shape"])
    marginals = TrueMarginals(tuple(np.asarray(t, dtype=np.int64) for t in d["counts"]),
                              np.asarray(d["class_counts"], dtype=np.int64), shape)
    params = params_from_dict(d["params"]) if "params" in d else None
    return marginals, params


def write_noisy(path, noisy: NoisyMarginals) -> None:
    _write(path, {"format": FORMAT, "version": VERSION, "kind": "noisy",
                  "shape": _shape_to_dict(noisy.shape),
                  "epsilon_per_query": noisy.spec.epsilon_per_query,
                  "sensitivity": noisy.spec.sensitivity,
                  "scale": noisy.scale,
                  "total_epsilon": noisy.total_epsilon,
                  "counts": [t.tolist() for t in noisy.values]})


def read_noisy(path) -> NoisyMarginals:
    d = _read(path, "noisy")
    spec = PrivacySpec(float(d["epsilon_per_query"]), float(d.get("sensitivity", 2.0)))
    if "scale" in d and not np.isclose(d["scale"], spec.scale, rtol=1e-12):
        raise FormatError("scale does not equal sensitivity / epsilon_per_query")
    return NoisyMarginals(tuple(np.asarray(t, float) for t in d["counts"]), spec,
                          _shape_from_dict(d["shape"]))


def posterior_to_dict(estimate, config: Optional[dict] = None, sq_error: Optional[float] = None) -> dict:
    payload = {"format": FORMAT, "version": VERSION, "kind": "posterior",
               "method": estimate.method,
               "point": params_to_dict(estimate.point)}
    if estimate.class_posterior is not None:
        payload["gamma_class"] = np.asarray(estimate.class_posterior, float).tolist()
        payload["gamma_cond"] = [np.asarray(g, float).tolist() for g in estimate.cond_posterior]
    state = estimate.meta.get("state")
    if state is not None:
        payload["theta_class"] = state.theta_class.tolist()
        payload["theta_cond"] = [t.tolist() for t in state.theta_cond]
        payload["bound_trace"] = [float(v) for v in estimate.meta["bound_trace"]]
        payload["converged"] = bool(estimate.meta["converged"])
        payload["iterations"] = int(estimate.meta["iterations"])
    if config is not None:
        payload["config"] = config
    if sq_error is not None:
        payload["sq_error"] = sq_error
    return payload


def write_posterior(path, estimate, config: Optional[dict] = None, sq_error: Optional[float] = None) -> None:
    _write(path, posterior_to_dict(estimate, config, sq_error))


def read_posterior(path) -> dict:
    return _read(path, "posterior")
