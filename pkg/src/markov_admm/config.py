"""Experiment configuration: JSON schema, validation, and resolution.

A config file fully determines an experiment.  Validation resolves the
graph, chain, and problem instance eagerly so cross-field errors (a chain
supported outside the graph, an initial state off the graph) surface here
with their field path, and fills documented defaults into the echo that
accompanies every result.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import MarkovAdmmError, ParseError, SchemaError
from .graph import Graph, build_graph, complete_graph, load_graph, path_graph, star_graph
from .markov import MarkovChain, closed_form_stationary, metropolis_hastings, random_walk_chain
from .objective import ProblemInstance, Quadratic

__all__ = ["ExperimentConfig", "validate_config"]

_DEFAULTS = {
    "rho": 1.0,
    "trials": 1,
    "engines": ["async"],
    "master_seed": 0,
    "i0": 0,
    "emit_constants": False,
    "noise_std": 1.0,
    "x_true": 0.0,
}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Fully resolved experiment description."""

    graph: Graph
    chain: MarkovChain | None
    problem: ProblemInstance
    rho: float
    engines: tuple[str, ...]
    iterations: int
    trials: int
    master_seed: int
    i0: int
    emit_constants: bool
    out_dir: str | None
    chain_alpha: float | None       # set when the chain came with an alpha
    echo: dict                      # raw config with every default recorded


def _require(data, key, field):
    if key not in data:
        raise SchemaError(field, "missing required field")
    return data[key]


def _as_int(value, field, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(field, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise SchemaError(field, f"must be >= {minimum}, got {value}")
    return value


def _as_number(value, field):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(field, f"expected a number, got {value!r}")
    return float(value)


def _resolve_graph(spec) -> Graph:
    if not isinstance(spec, dict):
        raise SchemaError("graph", "expected an object")
    gtype = _require(spec, "type", "graph.type")
    try:
        if gtype in ("path", "complete", "star"):
            n = _as_int(_require(spec, "num_nodes", "graph.num_nodes"),
                        "graph.num_nodes", minimum=1)
            return {"path": path_graph, "complete": complete_graph,
                    "star": star_graph}[gtype](n)
        if gtype == "file":
            path = _require(spec, "path", "graph.path")
            if not os.path.exists(path):
                raise SchemaError("graph.path", f"file not found: {path}")
            return load_graph(path)
        if gtype == "inline":
            return build_graph(_require(spec, "num_nodes", "graph.num_nodes"),
                               _require(spec, "edges", "graph.edges"))
    except SchemaError:
        raise
    except MarkovAdmmError as exc:
        raise SchemaError("graph", str(exc)) from exc
    raise SchemaError("graph.type", f"unknown type {gtype!r}")


def _resolve_chain(spec, g: Graph):
    """Returns (chain bound to the experiment graph, alpha or None)."""
    if spec is None:
        return None, None
    if not isinstance(spec, dict):
        raise SchemaError("chain", "expected an object")
    ctype = _require(spec, "type", "chain.type")
    try:
        if ctype == "random_walk":
            alpha = _as_number(_require(spec, "alpha", "chain.alpha"), "chain.alpha")
            walk = random_walk_chain(g.num_nodes, alpha)
            # rebind to the experiment graph so the support condition is
            # checked against it (the walk lives on the path edges)
            return MarkovChain(walk.P, g), alpha
        if ctype == "metropolis":
            target = spec.get("target", "uniform")
            alpha = None
            if target == "geometric":
                alpha = _as_number(_require(spec, "alpha", "chain.alpha"), "chain.alpha")
                target = closed_form_stationary(g.num_nodes, alpha)
            elif isinstance(target, list):
                target = np.asarray(target, dtype=np.float64)
            return metropolis_hastings(g, target), alpha
        if ctype == "explicit":
            P = _require(spec, "P", "chain.P")
            return MarkovChain(np.asarray(P, dtype=np.float64), g), None
    except SchemaError:
        raise
    except MarkovAdmmError as exc:
        raise SchemaError("chain", str(exc)) from exc
    raise SchemaError("chain.type", f"unknown type {ctype!r}")


def _resolve_problem(spec, g: Graph, master_seed: int):
    """Returns (instance, echo fragment with defaults filled)."""
    if not isinstance(spec, dict):
        raise SchemaError("problem", "expected an object")
    kind = _require(spec, "kind", "problem.kind")
    n = g.num_nodes
    if kind == "quadratic":
        dim = _as_int(_require(spec, "dim", "problem.dim"), "problem.dim", minimum=1)
        targets = np.asarray(_require(spec, "targets", "problem.targets"),
                             dtype=np.float64)
        if targets.ndim == 1:
            targets = targets[:, None]
        if targets.shape != (n, dim):
            raise SchemaError("problem.targets",
                              f"shape {targets.shape}, expected ({n}, {dim})")
        objs = tuple(Quadratic(targets[i]) for i in range(n))
        echo = {"kind": kind, "dim": dim, "targets": targets.tolist()}
        return ProblemInstance(g, objs), echo
    if kind == "estimation":
        dim = _as_int(_require(spec, "dim", "problem.dim"), "problem.dim", minimum=1)
        noise_std = _as_number(spec.get("noise_std", _DEFAULTS["noise_std"]),
                               "problem.noise_std")
        data_seed = spec.get("data_seed", master_seed)
        data_seed = _as_int(data_seed, "problem.data_seed", minimum=0)
        x_true = spec.get("x_true", _DEFAULTS["x_true"])
        if isinstance(x_true, (int, float)) and not isinstance(x_true, bool):
            x_true_vec = np.full(dim, float(x_true))
        else:
            x_true_vec = np.asarray(x_true, dtype=np.float64)
            if x_true_vec.shape != (dim,):
                raise SchemaError("problem.x_true",
                                  f"shape {x_true_vec.shape}, expected ({dim},)")
        rng = np.random.default_rng(data_seed)
        targets = x_true_vec[None, :] + noise_std * rng.standard_normal((n, dim))
        objs = tuple(Quadratic(targets[i]) for i in range(n))
        echo = {"kind": kind, "dim": dim, "noise_std": noise_std,
                "data_seed": int(data_seed), "x_true": x_true_vec.tolist()}
        return ProblemInstance(g, objs), echo
    raise SchemaError("problem.kind", f"unknown kind {kind!r}")


def validate_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Load, validate, and resolve a config file.

    ``overrides`` replace top-level fields before validation (used by the
    CLI for --seed/--trials).  Every defaulted value is recorded in the
    returned echo.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise SchemaError("config", f"file not found: {path}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise SchemaError("config", "top-level JSON value must be an object")
    data = dict(data)
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})

    graph = _resolve_graph(_require(data, "graph", "graph"))

    master_seed = _as_int(data.get("master_seed", _DEFAULTS["master_seed"]),
                          "master_seed", minimum=0)
    iterations = _as_int(_require(data, "iterations", "iterations"),
                         "iterations", minimum=0)
    trials = _as_int(data.get("trials", _DEFAULTS["trials"]), "trials", minimum=1)
    rho = _as_number(data.get("rho", _DEFAULTS["rho"]), "rho")
    if rho <= 0:
        raise SchemaError("rho", f"must be positive, got {rho}")

    engines = data.get("engines", data.get("engine", list(_DEFAULTS["engines"])))
    if isinstance(engines, str):
        engines = [engines]
    if not isinstance(engines, list) or not engines:
        raise SchemaError("engines", "expected an engine name or nonempty list")
    for e in engines:
        if e not in ("sync", "async"):
            raise SchemaError("engines", f"unknown engine {e!r}")
    engines = tuple(dict.fromkeys(engines))  # dedupe, keep order

    chain, chain_alpha = _resolve_chain(data.get("chain"), graph)
    if "async" in engines and chain is None:
        raise SchemaError("chain", "async engine requires a chain")

    i0 = _as_int(data.get("i0", _DEFAULTS["i0"]), "i0", minimum=0)
    if i0 >= graph.num_nodes:
        raise SchemaError("i0", f"{i0} outside [0, {graph.num_nodes})")

    emit_constants = data.get("emit_constants", _DEFAULTS["emit_constants"])
    if not isinstance(emit_constants, bool):
        raise SchemaError("emit_constants", "expected a boolean")
    if emit_constants and chain is None:
        raise SchemaError("emit_constants", "constants need a chain")

    out_dir = data.get("out_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise SchemaError("out_dir", "expected a string path")

    problem, problem_echo = _resolve_problem(
        _require(data, "problem", "problem"), graph, master_seed)

    echo = {
        "graph": data["graph"],
        "chain": data.get("chain"),
        "problem": problem_echo,
        "rho": rho,
        "engines": list(engines),
        "iterations": iterations,
        "trials": trials,
        "master_seed": master_seed,
        "i0": i0,
        "emit_constants": emit_constants,
        "out_dir": out_dir,
    }
    return ExperimentConfig(
        graph=graph, chain=chain, problem=problem, rho=rho, engines=engines,
        iterations=iterations, trials=trials, master_seed=master_seed, i0=i0,
        emit_constants=emit_constants, out_dir=out_dir,
        chain_alpha=chain_alpha, echo=echo)
