"""Scenario configs: build a model or estimator, evaluate its MSDs, check the bounds.

A scenario is a JSON document (``version`` 1)::

    {
      "version": 1,
      "name": "loss-covariant",
      "cutoff": 40,
      "lambda": 1.0,
      "gain": {"G": 0.5, "s": 1.0},
      "method": "all",
      "seed": 0,
      "model": {
        "channel": {"name": "loss", "eta": 0.5},
        "M": {"quadrature": "x"},
        "N": {"quadrature": "p"}
      },
      "checks": ["channel-B1-upper", "lemma"],
      "expect": {"values": "closed-form", "tol": 1e-4, "saturated": ["channel-B1-upper"]}
    }

``gain`` takes ``{"G", "s"}``, ``{"G", "R"}`` or ``{"eta_x", "eta_p"}``.
Instead of ``model`` a scenario may carry an ``estimator``, either
``{"builtin": "scaled-heterodyne", ...}`` or an explicit
``{"povm": [...], "x_values": [...], "p_values": [...]}`` with matrices as
``{"re": [[...]], "im": [[...]]}``.
"""

from __future__ import annotations

import copy
import json
import math
import os

import numpy as np

from . import analytic
from . import bounds as bd
from .channels import (
    KrausChannel,
    PhaseSpaceGrid,
    amplifier_channel,
    half_bs_channel,
    heterodyne_mp_channel,
    identity_channel,
    loss_channel,
)
from .estimation import (
    Estimator,
    estimator_from_dict,
    estimator_to_model,
    heterodyne_povm,
    matrix_from_json,
    scaled_heterodyne_estimator,
)
from .fock import FockSpace, TruncationError, quadratures
from .msd import (
    GainSpec,
    GaussianPrior,
    MeasurementModel,
    MsdResult,
    commutator_expectation,
    msd_choi,
    msd_monte_carlo,
    msd_quadrature,
    mse_pair,
)

CONFIG_VERSION = 1
ROUTE_TOL = 1e-4
EXIT_OK, EXIT_VIOLATION, EXIT_MISMATCH, EXIT_INPUT = 0, 2, 3, 4
METHODS = {"quad": ("quad",), "mc": ("mc",), "choi": ("choi",), "all": ("quad", "mc", "choi")}


class ConfigError(ValueError):
    """The scenario or device description cannot be used."""


def _halfbs_model_config():
    return {
        "channel": {"name": "half-bs"},
        "M": {"quadrature": "x", "mode": 0, "scale": "halfbs-optimal"},
        "N": {"quadrature": "p", "mode": 1, "scale": "halfbs-optimal"},
    }


BUILTINS = {
    "halfbs-saturation": {
        "cutoff": 40, "lambda": 1.0, "gain": {"G": 1.0, "s": 1.0},
        "model": _halfbs_model_config(),
        "checks": ["joint-B3", "sur2", "tangent", "lemma"],
        "expect": {"values": "closed-form", "tol": 1e-4, "saturated": ["sur2", "tangent", "lemma"]},
    },
    "heterodyne-mp": {
        "cutoff": 40, "lambda": 1.0, "gain": {"G": 1.0, "s": 1.0},
        "model": {
            "channel": {"name": "heterodyne-mp", "g": "bayes", "spacing": 0.15, "extent": 6.0},
            "M": {"quadrature": "x"}, "N": {"quadrature": "p"},
        },
        "checks": ["eb-B2", "channel-B1-upper", "lemma"],
        "expect": {"values": "closed-form", "tol": 1e-4, "saturated": ["eb-B2"]},
        "uniform_limit": {"G": 1.0, "g": 1.0, "checks": ["eb-B2"], "saturated": ["eb-B2"]},
    },
    "loss-covariant": {
        "cutoff": 40, "lambda": 1.0, "gain": {"G": 0.5, "s": 1.0},
        "model": {"channel": {"name": "loss", "eta": 0.5}, "M": {"quadrature": "x"}, "N": {"quadrature": "p"}},
        "checks": ["channel-B1-upper", "lemma"],
        "expect": {"values": "closed-form", "tol": 1e-4, "saturated": ["channel-B1-upper", "lemma"]},
    },
    "identity": {
        "cutoff": 40, "lambda": 1.0, "gain": {"G": 1.0, "s": 1.0},
        "model": {"channel": {"name": "identity"}, "M": {"quadrature": "x"}, "N": {"quadrature": "p"}},
        "checks": ["channel-B1-upper", "lemma"],
        "expect": {"values": "closed-form", "tol": 1e-4, "saturated": ["channel-B1-upper", "lemma"]},
    },
    "amplifier": {
        "cutoff": 40, "lambda": 1.0, "gain": {"G": 1.5, "s": 1.0},
        "model": {"channel": {"name": "amplifier", "gain": 1.5, "out_cutoff": 80},
                  "M": {"quadrature": "x"}, "N": {"quadrature": "p"}},
        "checks": ["channel-B1-upper", "lemma"],
        "expect": {"values": "closed-form", "tol": 1e-4},
    },
    "heterodyne-conjugate-mp": {
        "cutoff": 40, "lambda": 1.0, "gain": {"G": 1.0, "s": 1.0},
        "model": {
            "channel": {"name": "heterodyne-conjugate-mp", "g": "bayes", "spacing": 0.15, "extent": 6.0},
            "M": {"quadrature": "x"}, "N": {"quadrature": "p", "scale": -1.0},
        },
        "checks": ["channel-B1-lower", "eb-B2"],
        "expect": {"values": "closed-form", "tol": 1e-4, "saturated": ["channel-B1-lower", "eb-B2"]},
    },
    "scaled-heterodyne": {
        "cutoff": 40, "lambda": 1.0, "gain": {"G": 1.0, "s": 1.0},
        "estimator": {"builtin": "scaled-heterodyne", "spacing": 0.15, "extent": 6.0},
        "checks": ["joint-B3", "corollary", "sur2", "tangent", "lemma"],
        "expect": {"values": "closed-form", "tol": 1e-3, "saturated": ["joint-B3", "corollary", "sur2"]},
    },
}

DEFAULTS = {"version": CONFIG_VERSION, "cutoff": 40, "lambda": 1.0, "gain": {"G": 1.0, "s": 1.0},
            "method": "all", "seed": 0, "n_samples": 10_000}


def builtin_names() -> list[str]:
    return sorted(BUILTINS)


def load_config(source: str) -> dict:
    """Config from a builtin name or a JSON file path."""
    if source in BUILTINS:
        config = {**copy.deepcopy(DEFAULTS), "name": source, **copy.deepcopy(BUILTINS[source])}
        return config
    if not os.path.exists(source):
        raise ConfigError(f"no builtin scenario or file named {source!r}; builtins: {', '.join(builtin_names())}")
    try:
        with open(source) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {source}: {exc}") from None
    return normalize_config(raw, default_name=os.path.splitext(os.path.basename(source))[0])


def normalize_config(raw: dict, default_name: str = "scenario") -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("scenario must be a JSON object")
    version = raw.get("version")
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported or missing config version {version!r}; expected {CONFIG_VERSION}")
    if ("model" in raw) == ("estimator" in raw):
        raise ConfigError("scenario needs exactly one of 'model' or 'estimator'")
    config = copy.deepcopy(DEFAULTS)
    config["name"] = default_name
    config.update(copy.deepcopy(raw))
    return config


def apply_overrides(config: dict, *, G=None, lam=None, s=None, t=None, method=None, seed=None,
                    cutoff=None) -> dict:
    config = copy.deepcopy(config)
    if G is not None or s is not None:
        gain = config.get("gain", {})
        base = resolve_gain(gain)
        config["gain"] = {"G": base.G if G is None else G, "s": base.s if s is None else s}
    if lam is not None:
        config["lambda"] = lam
    if t is not None:
        config["t"] = t
    if method is not None:
        config["method"] = method
    if seed is not None:
        config["seed"] = seed
    if cutoff is not None:
        config["cutoff"] = cutoff
    return config


def resolve_gain(gain: dict) -> GainSpec:
    try:
        if "eta_x" in gain or "eta_p" in gain:
            return GainSpec(float(gain["eta_x"]), float(gain["eta_p"]))
        G = float(gain.get("G", 1.0))
        if "R" in gain:
            return GainSpec.from_gr(G, float(gain["R"]))
        return GainSpec.from_gs(G, float(gain.get("s", 1.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad gain specification {gain!r}: {exc}") from None


def _grid(spec: dict) -> PhaseSpaceGrid:
    return PhaseSpaceGrid(float(spec.get("spacing", 0.2)), float(spec.get("extent", 6.0)))


def _bayes_g(value, gain: GainSpec, lam: float) -> float:
    if value == "bayes":
        return analytic.optimal_shrinkage(gain.G, lam)
    return float(value)


def build_channel(spec: dict, cutoff: int, gain: GainSpec, lam: float) -> KrausChannel:
    name = spec.get("name")
    if name == "identity":
        return identity_channel(cutoff)
    if name == "loss":
        return loss_channel(float(spec["eta"]), cutoff)
    if name == "amplifier":
        return amplifier_channel(float(spec["gain"]), cutoff, spec.get("out_cutoff"))
    if name in ("heterodyne-mp", "heterodyne-conjugate-mp"):
        g = _bayes_g(spec.get("g", 1.0), gain, lam)
        return heterodyne_mp_channel(g, _grid(spec), cutoff, spec.get("out_cutoff"),
                                     conjugate=(name == "heterodyne-conjugate-mp"))
    if name == "half-bs":
        return half_bs_channel(cutoff, spec.get("out_cutoff"), float(spec.get("transmittance", 0.5)))
    if name == "kraus":
        kraus = np.stack([matrix_from_json(k) for k in spec["kraus"]])
        return KrausChannel(kraus, label=spec.get("label", "kraus"), out_dims=spec.get("out_dims"))
    raise ConfigError(f"unknown channel {name!r}")


def _observable_scale(spec: dict, which: str, gain: GainSpec, lam: float) -> float:
    scale = spec.get("scale", 1.0)
    if scale == "halfbs-optimal":
        # (M, N) = c (sqrt(s) x (x) 1, 1 (x) p / sqrt(s)) with c = sqrt(2 eta)/(1+lam)
        c = analytic.halfbs_saturating_scale(gain.G, lam)
        return c * math.sqrt(gain.s) if which == "M" else c / math.sqrt(gain.s)
    return float(scale)


def build_observable(spec, which: str, channel: KrausChannel, gain: GainSpec, lam: float) -> np.ndarray:
    if isinstance(spec, dict) and "re" in spec:
        return matrix_from_json(spec)
    if spec == 0 or spec == "0":
        return np.zeros(channel.out_dim)
    if not isinstance(spec, dict) or spec.get("quadrature") not in ("x", "p"):
        raise ConfigError(f"observable {which} must be a matrix or {{'quadrature': 'x'|'p', ...}}")
    dims = channel.out_dims
    if len(set(dims)) != 1:
        raise ConfigError("quadrature observables need equal per-mode output cutoffs")
    space = FockSpace(dims[0], len(dims))
    x, p = quadratures(space, int(spec.get("mode", 0)))
    op = x if spec["quadrature"] == "x" else p
    return _observable_scale(spec, which, gain, lam) * op


def build_subject(config: dict):
    """``("model", MeasurementModel)`` or ``("estimator", Estimator)`` for a config."""
    cutoff = int(config["cutoff"])
    gain = resolve_gain(config["gain"])
    lam = float(config["lambda"])
    if "estimator" in config:
        spec = config["estimator"]
        if spec.get("builtin") == "scaled-heterodyne":
            c = spec.get("c", "bayes")
            grid = _grid(spec)
            if c == "bayes":
                return "estimator", scaled_heterodyne_estimator(gain.G, lam, grid, cutoff, gain.R)
            povm = heterodyne_povm(grid, cutoff)
            beta = grid.points
            return "estimator", Estimator(povm, float(c) * math.sqrt(2) * beta.real,
                                          float(c) * math.sqrt(2) * beta.imag)
        if "builtin" in spec:
            raise ConfigError(f"unknown builtin estimator {spec['builtin']!r}")
        return "estimator", estimator_from_dict(spec)
    spec = config["model"]
    channel = build_channel(spec["channel"], cutoff, gain, lam)
    M = build_observable(spec["M"], "M", channel, gain, lam)
    N = build_observable(spec["N"], "N", channel, gain, lam)
    return "model", MeasurementModel(channel, M, N)


def _response(channel_spec: dict, obs: dict, gain: GainSpec, lam: float, which: str):
    """Closed-form response of a quadrature readout on a covariant channel, or None."""
    if not isinstance(obs, dict) or obs.get("quadrature") not in ("x", "p"):
        return None
    a = _observable_scale(obs, which, gain, lam)
    name = channel_spec.get("name")
    mode = int(obs.get("mode", 0))
    if name == "half-bs":
        T = float(channel_spec.get("transmittance", 0.5))
        k = math.sqrt(T) if mode == 0 else math.sqrt(1.0 - T)
        base = analytic.CovariantResponse(k, 0.5)
    elif mode != 0:
        return None
    elif name == "identity":
        base = analytic.identity()
    elif name == "loss":
        base = analytic.loss(float(channel_spec["eta"]))
    elif name == "amplifier":
        base = analytic.amplifier(float(channel_spec["gain"]))
    elif name in ("heterodyne-mp", "heterodyne-conjugate-mp"):
        base = analytic.heterodyne_mp(_bayes_g(channel_spec.get("g", 1.0), gain, lam))
        if name == "heterodyne-conjugate-mp" and obs["quadrature"] == "p":
            a = -a
    else:
        return None
    return analytic.CovariantResponse(a * base.k, a * a * base.sigma2)


def closed_form_pair(config: dict) -> tuple[float, float] | None:
    """Analytic ``(V_M, V_N)`` when the scenario is a covariant Gaussian readout, else None."""
    gain = resolve_gain(config["gain"])
    lam = float(config["lambda"])
    if "estimator" in config:
        spec = config["estimator"]
        if spec.get("builtin") != "scaled-heterodyne":
            return None
        c = spec.get("c", "bayes")
        c = analytic.optimal_shrinkage(gain.G, lam) if c == "bayes" else float(c)
        cx, cp = c * math.exp(-gain.R), c * math.exp(gain.R)
        if spec.get("c", "bayes") != "bayes":
            cx = cp = c
        return (analytic.scaled_heterodyne(cx).msd(gain.eta_x, lam),
                analytic.scaled_heterodyne(cp).msd(gain.eta_p, lam))
    spec = config["model"]
    rx = _response(spec["channel"], spec["M"], gain, lam, "M")
    rp = _response(spec["channel"], spec["N"], gain, lam, "N")
    if rx is None or rp is None or (spec["M"].get("quadrature"), spec["N"].get("quadrature")) != ("x", "p"):
        return None
    return rx.msd(gain.eta_x, lam), rp.msd(gain.eta_p, lam)


def default_checks(kind: str, model: MeasurementModel) -> list[str]:
    if kind == "estimator":
        return ["joint-B3", "corollary", "sur2", "tangent", "lemma"]
    if model.commutator_norm < 1e-8:
        return ["joint-B3", "sur2", "tangent", "lemma"]
    return ["channel-B1-upper", "lemma"]


def run_checks(msd: MsdResult, checks, commutator: complex, t: float | None) -> list[bd.BoundReport]:
    out = []
    for kind in checks:
        if kind == "channel-B1-upper":
            out.append(bd.channel_check(msd, bd.UPPER))
        elif kind == "channel-B1-lower":
            out.append(bd.channel_check(msd, bd.LOWER))
        elif kind == "eb-B2":
            out.append(bd.eb_check(msd))
        elif kind == "joint-B3":
            out.append(bd.joint_check(msd))
        elif kind == "corollary":
            out.append(bd.corollary_check(msd, rescaled=True))
        elif kind == "lemma":
            out.append(bd.lemma_check(msd, commutator))
        elif kind == "sur2":
            out.append(bd.sur2_check(msd))
        elif kind == "tangent":
            out.append(bd.tangent_check(msd, 1.0 / msd.gain.s if t is None else t))
        else:
            raise ConfigError(f"unknown check {kind!r}")
    return out


def _finite(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def evaluate(config: dict) -> dict:
    """Run every requested route and check; returns the machine-readable report."""
    lam = float(config["lambda"])
    prior = GaussianPrior(lam)
    if lam <= 0:
        raise ConfigError("numeric routes need lambda > 0; use --curves for the uniform-prior limit")
    gain = resolve_gain(config["gain"])
    method = config.get("method", "all")
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}")
    kind, subject = build_subject(config)
    if kind == "estimator":
        estimator = subject
        model = estimator_to_model(estimator)
    else:
        estimator, model = None, subject

    results: dict[str, MsdResult] = {}
    for route in METHODS[method]:
        if route == "quad":
            if estimator is not None:
                results[route] = mse_pair(estimator, gain.G, gain.R, prior)
            else:
                results[route] = msd_quadrature(model, gain, prior)
        elif route == "mc":
            results[route] = msd_monte_carlo(model, gain, prior, int(config.get("n_samples", 10_000)),
                                             seed=int(config.get("seed", 0)))
        else:
            results[route] = msd_choi(model, gain, prior)

    checks = config.get("checks") or default_checks(kind, model)
    needs_comm = "lemma" in checks
    comm = commutator_expectation(model, prior) if needs_comm else 0j
    t = config.get("t")
    check_rows = []
    for route, res in results.items():
        for rep in run_checks(res, checks, comm, t):
            check_rows.append({"method": res.method, **rep.as_dict()})

    mismatches = []
    agreement = None
    if "quad" in results and "choi" in results:
        q, c = results["quad"], results["choi"]
        diff = max(abs(q.v_m_x - c.v_m_x), abs(q.v_n_p - c.v_n_p))
        tol = ROUTE_TOL + q.trunc_error + c.trunc_error
        agreement = {"max_abs_diff": diff, "tol": tol, "ok": bool(diff < tol)}
        if not agreement["ok"]:
            mismatches.append("route agreement")

    expectations = []
    expect = config.get("expect") or {}
    values = expect.get("values")
    if values == "closed-form":
        values = closed_form_pair(config)
        if values is None:
            raise ConfigError("closed-form expectation requested for a non-covariant scenario")
    if values is not None:
        base_tol = float(expect.get("tol", 1e-4))
        for route, res in results.items():
            tol = base_tol + res.trunc_error + 3.0 * res.stat_error
            for name, got, want in (("v_m_x", res.v_m_x, values[0]), ("v_n_p", res.v_n_p, values[1])):
                ok = abs(got - want) <= tol
                expectations.append({"method": res.method, "quantity": name, "value": got, "target": want,
                                     "tol": tol, "ok": bool(ok)})
                if not ok:
                    mismatches.append(f"{res.method} {name}")
    for kind_name in expect.get("saturated", []):
        for row in check_rows:
            if row["kind"].startswith(kind_name) and row["method"] != "monte-carlo" and not row["saturated"]:
                mismatches.append(f"{row['method']} {row['kind']} not saturated")

    limit = None
    if "uniform_limit" in config:
        limit = _uniform_limit(config["uniform_limit"], check_rows, mismatches)

    violated = any(row["violated"] for row in check_rows)
    if violated:
        verdict, code = "violation", EXIT_VIOLATION
    elif mismatches:
        verdict, code = "mismatch", EXIT_MISMATCH
    else:
        verdict, code = "pass", EXIT_OK
    report = {
        "version": CONFIG_VERSION,
        "scenario": config.get("name", "scenario"),
        "subject": kind,
        "parameters": {"lambda": lam, "eta_x": gain.eta_x, "eta_p": gain.eta_p, "G": gain.G, "s": gain.s,
                       "cutoff": int(config["cutoff"]), "seed": config.get("seed"), "method": method},
        "results": [r.as_dict() for r in results.values()],
        "commutator_expectation": [comm.real, comm.imag] if needs_comm else None,
        "route_agreement": agreement,
        "checks": check_rows,
        "expectations": expectations,
        "uniform_limit": limit,
        "mismatches": mismatches,
        "verdict": verdict,
        "exit_code": code,
    }
    return report


def _uniform_limit(spec: dict, check_rows: list, mismatches: list) -> dict:
    """Closed-form heterodyne measure-and-prepare values at ``lam = 0``."""
    G = float(spec.get("G", 1.0))
    g = float(spec.get("g", math.sqrt(G)))
    v = analytic.heterodyne_mp(g).msd(G, 0.0)
    res = MsdResult(v, v, "analytic", GaussianPrior(0.0), GainSpec(G, G))
    out = {"lambda": 0.0, "G": G, "g": g, "v_m_x": v, "v_n_p": v, "product": v * v, "checks": []}
    for rep in run_checks(res, spec.get("checks", ["eb-B2"]), 0j, None):
        row = {"method": "analytic", **rep.as_dict()}
        out["checks"].append(row)
        check_rows.append(row)
        if rep.kind in spec.get("saturated", []) and not rep.saturated:
            mismatches.append(f"analytic {rep.kind} not saturated")
    out["bound_eb"] = bd.bound_eb(G, 0.0)
    return out


def certify(path: str, G: float | None, lam: float | None, s: float | None = None, **overrides) -> dict:
    """Check a device description (model or estimator JSON) against every applicable bound."""
    config = load_config(path)
    config.pop("checks", None)
    config.pop("expect", None)
    config = apply_overrides(config, G=G, lam=lam, s=s, **overrides)
    return evaluate(config)


def dumps(report) -> str:
    """Deterministic JSON: sorted keys, non-finite floats as null."""
    def clean(obj):
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        if isinstance(obj, (np.floating, np.integer, np.bool_)):
            obj = obj.item()
        return _finite(obj)
    return json.dumps(clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


INPUT_ERRORS = (ConfigError, TruncationError, ValueError, KeyError, TypeError)
