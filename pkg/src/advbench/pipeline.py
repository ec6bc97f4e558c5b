"""Experiment orchestration shared by the CLI and the demo scripts."""

import itertools
import logging
from pathlib import Path

import numpy as np

from .attack import attack_all
from .errors import AlignmentError, FitError
from .runio import SweepRecord, SweepResult, load_checkpoint
from .trainer import count_correct
from .trend import (
    FAMILIES,
    AccuracySeries,
    SlopeLine,
    constant_fit,
    correlation_matrix,
    fit_all,
    intersect_slopes,
    poly_derivative,
    quadratic_minimum,
)
from .zoo import CATALOG, get_spec

log = logging.getLogger(__name__)

DEFAULT_EPS_MAX = (2.0, 16.0)
VERTEX_WINDOW = (1.0, 1.5)


def checkpoint_path(directory, model_id, seed):
    return Path(directory) / f"{model_id}-s{seed}.advg"


def sweep_model(model, test_set, epsilons, seed=None, model_id=None, batch_size=500):
    """SweepRecords for one model over ``epsilons`` (0 gives benign accuracy)."""
    model_id = model_id or model.arch_id
    seed = model.seed if seed is None else seed
    records = []
    for eps, adv in zip(epsilons, attack_all(model, test_set, epsilons, batch_size)):
        n_correct = count_correct(model, adv, batch_size)
        records.append(SweepRecord.make(model_id, seed, eps, len(adv), n_correct))
        log.info("%s seed %d eps %g: %d/%d", model_id, seed, eps, n_correct, len(adv))
    return records


def sweep(model_ids, checkpoint_dir, test_set, epsilons, seeds=(0,)):
    records = []
    for model_id, seed in itertools.product(model_ids, seeds):
        get_spec(model_id)
        model, _ = load_checkpoint(_existing(checkpoint_path(checkpoint_dir, model_id, seed)))
        records += sweep_model(model, test_set, epsilons, seed, model_id)
    return SweepResult(tuple(records))


def _existing(path):
    if not Path(path).exists():
        raise FileNotFoundError(f"missing checkpoint {path}")
    return path


def is_cnn(model_id):
    spec = CATALOG.get(model_id)
    return spec.is_cnn if spec is not None else model_id.startswith("cnn")


def _vertex(fit):
    try:
        return quadratic_minimum(fit)
    except FitError:
        return None


def analyze_window(series, eps_max):
    """All fits and quadratic-derived quantities for one fit domain."""
    fits = {s.model_id: fit_all(s, eps_max) for s in series}
    doc = {"fits": {}, "quadratic": {}, "intersections": [], "deceleration_ratio": None}
    for model_id, by_family in fits.items():
        doc["fits"][model_id] = {
            fam: ({"error": str(r)} if isinstance(r, Exception) else r.to_dict())
            for fam, r in by_family.items()
        }
        quad = by_family.get("quadratic")
        if isinstance(quad, Exception):
            continue
        line, decel = poly_derivative(quad)
        vertex = _vertex(quad)
        doc["quadratic"][model_id] = {
            "derivative": {"intercept": line.intercept, "slope": line.slope},
            "deceleration": decel,
            "minimum": vertex,
            "minimum_in_window": vertex is not None and VERTEX_WINDOW[0] < vertex < VERTEX_WINDOW[1],
        }
    cnns = [m for m in doc["quadratic"] if is_cnn(m)]
    for a, b in itertools.combinations(cnns, 2):
        qa, qb = doc["quadratic"][a]["derivative"], doc["quadratic"][b]["derivative"]
        entry = {"models": [a, b]}
        try:
            entry["epsilon"] = intersect_slopes(SlopeLine(**qa), SlopeLine(**qb))
        except FitError as exc:
            entry["error"] = str(exc)
        doc["intersections"].append(entry)
    if len(cnns) >= 2:
        deepest = cnns[-1]
        others = [doc["quadratic"][m]["deceleration"] for m in cnns[:-1]]
        doc["deceleration_ratio"] = {
            "model": deepest,
            "versus": cnns[:-1],
            "ratio": doc["quadratic"][deepest]["deceleration"] / float(np.mean(others)),
        }
    return doc, fits


def analyze(result, eps_max_list=DEFAULT_EPS_MAX):
    """The full analysis document written by ``advbench analyze``."""
    model_ids = result.model_ids
    series = [result.series(m) for m in model_ids]
    grid = series[0].epsilons if series else ()
    for s in series:
        if s.epsilons != grid:
            raise AlignmentError(f"{s.model_id} does not cover the same epsilon grid as "
                                 f"{series[0].model_id}")
    percent = [AccuracySeries(s.model_id, s.epsilons, [100 * v for v in s.accuracies], "percent")
               for s in series]
    doc = {
        "models": model_ids,
        "epsilons": list(grid),
        "families": list(FAMILIES),
        "benign": {m: result.benign(m) for m in model_ids},
        "constant_fit_percent": {s.model_id: constant_fit(s) for s in percent},
        "correlation": correlation_matrix(series).to_dict(),
        "correlation_r2": correlation_matrix(series, "r2").to_dict(),
        "windows": {},
    }
    for eps_max in eps_max_list:
        doc["windows"][format(float(eps_max), "g")] = analyze_window(series, eps_max)[0]
    return doc
