"""Instance definition files and CSV writers.

Instance files are INI documents::

    [meta]
    name = mab
    T = 10000
    delta = auto            ; or a number in (0, 1]

    [contexts]
    p = 1.0                 ; one probability per context

    [onehot]                ; phi(c, j) = e_j, d = J ...
    J = 4
    ; ... or an explicit table, one key per context, rows of d numbers:
    ; [features]
    ; c0 = 1 0 0 0; 0 1 0 0; 0 0 1 0; 0 0 0 1

    [reward]
    theta_star = 0.1 0.2 0.4 0.7
    noise = bernoulli       ; or gaussian (with sigma = ...)
    m = 0.84                ; optional, defaults to ||theta_star||

    [cost.1]                ; tabular constraint k = 1 .. K, rows = contexts
    kind = shifted-bernoulli
    prob = 0 0.4 0.5 0.2
    shift = 0.5
    ; kind = deterministic  -> mean = ...
    ; kind = two-point      -> low = ..., high = ..., prob = ...

Linear costs replace the ``[cost.k]`` sections with ``[cost]`` (``variant =
linear``, ``mu_star`` with one row per constraint, ``noise``, ``sigma``) and a
``[cost_features]`` table laid out like ``[features]``.
"""

from __future__ import annotations

import configparser
import csv
import io as _io
from pathlib import Path
from typing import Optional

import numpy as np

from .algorithm import Trajectory
from .instances import (
    ContextDistribution,
    FeatureMap,
    Instance,
    InstanceError,
    LinearCost,
    RewardModel,
    TabularCost,
    _auto_delta,
)
from .metrics import AggregateCurves

FLOAT_FMT = "%.17g"


def parse_vector(text: str) -> np.ndarray:
    return np.array([float(x) for x in text.replace(",", " ").split()], dtype=float)


def parse_matrix(text: str) -> np.ndarray:
    rows = [parse_vector(r) for r in text.split(";") if r.strip()]
    if not rows or len({r.size for r in rows}) != 1:
        raise InstanceError(f"ragged or empty matrix: {text!r}")
    return np.vstack(rows)


def format_vector(v) -> str:
    return " ".join(repr(float(x)) for x in np.asarray(v).reshape(-1))


def format_matrix(a) -> str:
    return "; ".join(format_vector(r) for r in np.atleast_2d(a))


def _table(section: configparser.SectionProxy, C: int) -> np.ndarray:
    try:
        rows = [parse_matrix(section[f"c{c}"]) for c in range(C)]
    except KeyError as exc:
        raise InstanceError(f"[{section.name}] lacks a row table for context {exc.args[0]}") from exc
    if len({r.shape for r in rows}) != 1:
        raise InstanceError(f"[{section.name}] tables differ in shape across contexts")
    return np.stack(rows)


def _per_context(sec: configparser.SectionProxy, key: str, C: int, J: int) -> np.ndarray:
    a = parse_matrix(sec[key])
    if a.shape == (1, J) and C > 1:
        a = np.repeat(a, C, axis=0)
    if a.shape != (C, J):
        raise InstanceError(f"[{sec.name}] {key} must have {C} rows of {J} values, got shape {a.shape}")
    return a


def instance_from_string(text: str, T: Optional[int] = None) -> Instance:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise InstanceError(f"malformed instance file: {exc}") from exc
    for required in ("meta", "contexts", "reward"):
        if required not in cp:
            raise InstanceError(f"missing [{required}] section")
    meta = cp["meta"]
    p = parse_vector(cp["contexts"]["p"])
    C = p.size

    if "onehot" in cp:
        J = cp["onehot"].getint("J")
        features = FeatureMap.onehot(C, J)
    elif "features" in cp:
        features = FeatureMap(_table(cp["features"], C))
    else:
        raise InstanceError("need a [features] or [onehot] section")
    J = features.phi.shape[1]

    rsec = cp["reward"]
    reward = RewardModel(
        parse_vector(rsec["theta_star"]),
        m=rsec.getfloat("m") if "m" in rsec else None,
        noise=rsec.get("noise", "bernoulli"),
        sigma=rsec.getfloat("sigma", 1.0),
    )

    if "cost" in cp and cp["cost"].get("variant", "linear") == "linear":
        csec = cp["cost"]
        if "cost_features" not in cp:
            raise InstanceError("linear cost needs a [cost_features] section")
        cost = LinearCost(
            parse_matrix(csec["mu_star"]),
            FeatureMap(_table(cp["cost_features"], C)),
            noise=csec.get("noise", "gaussian"),
            sigma=csec.getfloat("sigma", 1.0),
        )
    else:
        ks = sorted(int(s.split(".", 1)[1]) for s in cp.sections() if s.startswith("cost."))
        if not ks or ks != list(range(1, len(ks) + 1)):
            raise InstanceError("tabular costs need sections [cost.1] .. [cost.K]")
        lows, highs, probs = [], [], []
        for k in ks:
            sec = cp[f"cost.{k}"]
            kind = sec.get("kind", "deterministic")
            if kind == "deterministic":
                mean = _per_context(sec, "mean", C, J)
                lo, hi, pr = mean, mean, np.zeros_like(mean)
            elif kind == "shifted-bernoulli":
                pr = _per_context(sec, "prob", C, J)
                shift = sec.getfloat("shift")
                lo, hi = np.full_like(pr, -shift), np.full_like(pr, 1.0 - shift)
            elif kind == "two-point":
                lo, hi, pr = (_per_context(sec, key, C, J) for key in ("low", "high", "prob"))
            else:
                raise InstanceError(f"[cost.{k}] unknown kind {kind!r}")
            lows.append(lo), highs.append(hi), probs.append(pr)
        cost = TabularCost(np.stack(lows), np.stack(highs), np.stack(probs))

    horizon = T if T is not None else meta.getint("T", 10_000)
    inst = Instance(ContextDistribution(p), features, reward, cost, horizon, None, meta.get("name", "custom"))
    for key, actual in (("K", inst.K), ("J", inst.J), ("d", inst.d)):
        if key in meta and meta.getint(key) != actual:
            raise InstanceError(f"[meta] {key} = {meta.getint(key)} but the tables give {actual}")
    delta = meta.get("delta", "auto").strip()
    return _auto_delta(inst, None if delta == "auto" else float(delta))


def load_instance(path, T: Optional[int] = None) -> Instance:
    return instance_from_string(Path(path).read_text(), T=T)


def instance_to_string(inst: Instance) -> str:
    C, J, d = inst.features.phi.shape
    lines = [
        "[meta]", f"name = {inst.name}", f"K = {inst.K}", f"J = {J}", f"d = {d}", f"T = {inst.T}",
        f"delta = {'auto' if inst.delta is None else repr(float(inst.delta))}", "",
        "[contexts]", f"p = {format_vector(inst.contexts.p)}", "",
        "[features]",
    ]
    lines += [f"c{c} = {format_matrix(inst.features.phi[c])}" for c in range(C)]
    r = inst.reward
    lines += ["", "[reward]", f"theta_star = {format_vector(r.theta_star)}", f"m = {r.m!r}", f"noise = {r.noise}", f"sigma = {r.sigma!r}", ""]
    if isinstance(inst.cost, LinearCost):
        cst = inst.cost
        lines += ["[cost]", "variant = linear", f"mu_star = {format_matrix(cst.mu_star)}", f"noise = {cst.noise}", f"sigma = {cst.sigma!r}", "", "[cost_features]"]
        lines += [f"c{c} = {format_matrix(cst.psi.phi[c])}" for c in range(C)]
    else:
        for k in range(inst.K):
            cst = inst.cost
            lines += [f"[cost.{k + 1}]", "kind = two-point", f"low = {format_matrix(cst.low[k])}", f"high = {format_matrix(cst.high[k])}", f"prob = {format_matrix(cst.prob[k])}", ""]
    return "\n".join(lines) + "\n"


def trajectory_rows(tr: Trajectory):
    K = tr.K
    header = ["t", "context", "action", "reward"] + [f"cost_{k + 1}" for k in range(K)] + [f"q_{k + 1}" for k in range(K)]
    header += ["cum_reward"] + [f"cum_cost_{k + 1}" for k in range(K)]
    cols = [tr.reward[:, None], tr.cost, tr.q, np.cumsum(tr.reward)[:, None], np.cumsum(tr.cost, axis=0)]
    if "beta_sqrt" in tr.trace:
        header += ["beta_sqrt", "theta_err"]
        cols += [tr.trace["beta_sqrt"][:, None], tr.trace["theta_err"][:, None]]
    return header, np.hstack(cols)


def write_trajectory_csv(tr: Trajectory, path) -> None:
    header, floats = trajectory_rows(tr)
    ints = np.column_stack([np.arange(1, tr.T + 1), tr.context, tr.action])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        buf = _io.StringIO()
        np.savetxt(buf, np.hstack([ints.astype(float), floats]), delimiter=",",
                   fmt=["%d"] * 3 + [FLOAT_FMT] * floats.shape[1])
        fh.write(buf.getvalue())


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    return {name: body[:, i] for i, name in enumerate(header)}


def write_aggregate_csv(agg: AggregateCurves, path) -> None:
    K = agg.pathwise_violation_freq.shape[0]
    header = ["tau", "regret", "regret_stderr", "violation"] + [f"viol_freq_{k + 1}" for k in range(K)]
    T = agg.regret.size
    data = np.column_stack([np.arange(1, T + 1), agg.regret, agg.regret_stderr, agg.violation, agg.pathwise_violation_freq.T])
    buf = _io.StringIO()
    np.savetxt(buf, data, delimiter=",", fmt=["%d"] + [FLOAT_FMT] * (data.shape[1] - 1))
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        fh.write(buf.getvalue())
