"""JSON description files for metrics, diffeomorphisms and scalar functions.

A metric file looks like::

    {"dim": 2, "R": 3.0, "T": 1.0, "family": "conformal_bump",
     "params": {"amplitude": 0.1, "center": [0.0, 0.0], "width": 1.0, "time_width": 0.5}}

Tabulated metrics keep their grid in an ``.npz`` file named by ``params.data``
(relative paths resolve against the JSON file's directory).
"""

from __future__ import annotations

import json
import os

import numpy as np

from ..errors import SpecError
from .diffeo import ComposedDiffeo, DiffeoField, FlowDiffeo, IdentityDiffeo, SwirlDiffeo
from .fields import ConformalBump, FlatMetric, MetricField, PullbackMetric, RankOneBump, TabulatedMetric
from .scalar import LinearFunction, QuadraticFunction, ScalarField

_BUMP_KEYS = {"amplitude", "center", "width", "time_width", "support_radius"}


def _header(spec, need_R=True):
    try:
        dim = int(spec["dim"])
        if not need_R:
            return dim, None, None
        return dim, float(spec["R"]), float(spec["T"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"spec is missing dim/R/T: {exc}") from exc


def _check_keys(params, allowed, family):
    extra = set(params) - set(allowed)
    if extra:
        raise SpecError(f"unknown parameters for {family}: {sorted(extra)}")


def metric_from_spec(spec: dict, base_dir: str | None = None) -> MetricField:
    if not isinstance(spec, dict):
        raise SpecError("metric spec must be a JSON object")
    family = spec.get("family")
    params = dict(spec.get("params") or {})
    if family == "pullback":
        base = metric_from_spec(params.get("metric"), base_dir)
        psi = diffeo_from_spec(params.get("diffeo"), base_dir)
        return PullbackMetric(base.dim, base.R, base.T, base=base, diffeo=psi)
    dim, R, T = _header(spec)
    try:
        if family == "flat":
            return FlatMetric(dim, R, T)
        if family == "conformal_bump":
            _check_keys(params, _BUMP_KEYS, family)
            return ConformalBump(dim, R, T, **params)
        if family == "rank_one_bump":
            _check_keys(params, _BUMP_KEYS | {"direction"}, family)
            return RankOneBump(dim, R, T, **params)
        if family == "tabulated":
            path = params.get("data")
            if not path:
                raise SpecError("tabulated metric needs params.data")
            if base_dir and not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            with np.load(path) as data:
                return TabulatedMetric(dim, R, T, times=data["times"], coords=data["coords"],
                                       values=data["values"], source=params["data"],
                                       order=int(params.get("order", 5)))
    except (TypeError, OSError, KeyError) as exc:
        raise SpecError(f"invalid {family} metric spec: {exc}") from exc
    raise SpecError(f"unknown metric family {family!r}")


def diffeo_from_spec(spec: dict, base_dir: str | None = None) -> DiffeoField:
    if not isinstance(spec, dict):
        raise SpecError("diffeo spec must be a JSON object")
    family = spec.get("family")
    params = dict(spec.get("params") or {})
    if family == "compose":
        outer = diffeo_from_spec(params.get("outer"), base_dir)
        inner = diffeo_from_spec(params.get("inner"), base_dir)
        return ComposedDiffeo(outer.dim, outer.R, outer.T, outer=outer, inner=inner)
    dim, R, T = _header(spec)
    classes = {"swirl": SwirlDiffeo, "flow": FlowDiffeo}
    try:
        if family == "identity":
            return IdentityDiffeo(dim, R, T)
        if family == "shear":
            return FlowDiffeo(dim, R, T, field="shear", **params)
        if family in classes:
            return classes[family](dim, R, T, **params)
    except TypeError as exc:
        raise SpecError(f"invalid {family} diffeo spec: {exc}") from exc
    raise SpecError(f"unknown diffeo family {family!r}")


def function_from_spec(spec: dict) -> ScalarField:
    if not isinstance(spec, dict):
        raise SpecError("function spec must be a JSON object")
    family = spec.get("family")
    dim, _, _ = _header(spec, need_R=False)
    params = dict(spec.get("params") or {})
    try:
        if family == "quadratic":
            return QuadraticFunction(dim, **params)
        if family == "linear":
            return LinearFunction(dim, **params)
    except TypeError as exc:
        raise SpecError(f"invalid {family} function spec: {exc}") from exc
    raise SpecError(f"unknown function family {family!r}")


def _read(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read {path}: {exc}") from exc


def load_metric(path) -> MetricField:
    return metric_from_spec(_read(path), os.path.dirname(os.path.abspath(path)))


def load_diffeo(path) -> DiffeoField:
    return diffeo_from_spec(_read(path), os.path.dirname(os.path.abspath(path)))


def load_function(path) -> ScalarField:
    return function_from_spec(_read(path))


def save_tabulated(field: TabulatedMetric, path) -> TabulatedMetric:
    """Write ``field`` to ``path`` (JSON) plus a sibling ``.npz`` holding the grid.

    Returns the field re-labelled with the data file name it now refers to.
    """
    path = os.fspath(path)
    stem = os.path.splitext(os.path.basename(path))[0]
    data_name = stem + ".npz"
    np.savez_compressed(os.path.join(os.path.dirname(os.path.abspath(path)), data_name),
                        times=field.times, coords=field.coords, values=field.values)
    out = TabulatedMetric(field.dim, field.R, field.T, times=field.times,
                          coords=field.coords, values=field.values, source=data_name,
                          order=field.order)
    with open(path, "w") as fh:
        json.dump(out.describe(), fh, indent=2)
    return out
