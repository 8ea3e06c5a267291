"""Command-line entry point: ``concurv <command> ...`` writes one JSON report.

Exit status is 0 when every certificate passes, 1 when one fails and 2 for
usage or input errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Hashable, Sequence

import numpy as np

from . import __version__
from . import acceptance
from . import concentration as conc
from . import geodesics as geo
from . import hypercube as hc
from . import isoperimetry as iso
from . import lipschitz as lip
from . import transport as tr
from .errors import ConcurvError
from .metric import FiniteMetricSpace, find_hairs, parse_space

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


# ---------------------------------------------------------------- report


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types; Fractions become ``"p/q"`` strings, sets become sorted lists."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Fraction):
        return str(obj) if obj.denominator != 1 else f"{obj.numerator}/1"
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return repr(x)
        return x
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [to_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, (frozenset, set)):
        items = [to_jsonable(x) for x in obj]
        return sorted(items, key=lambda x: json.dumps(x, sort_keys=True))
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    if isinstance(obj, dict):
        return {_key(k): to_jsonable(v) for k, v in obj.items()}
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    if hasattr(obj, "__dataclass_fields__"):
        return to_jsonable({k: getattr(obj, k) for k in obj.__dataclass_fields__ if k not in ("space", "curve")})
    return str(obj)


def _key(k: Any) -> str:
    if isinstance(k, str):
        return k
    if isinstance(k, frozenset):
        return "{" + ",".join(str(x) for x in sorted(k)) + "}"
    if isinstance(k, Fraction):
        return str(k)
    return str(to_jsonable(k))


@dataclass
class ExperimentReport:
    command: list[str]
    seed: int
    inputs: dict[str, str] = field(default_factory=dict)
    quantities: dict[str, Any] = field(default_factory=dict)
    certificates: dict[str, Any] = field(default_factory=dict)
    wall_time: Any = 0.0

    def digest(self, name: str, data: str | bytes) -> None:
        raw = data.encode() if isinstance(data, str) else data
        self.inputs[name] = hashlib.sha256(raw).hexdigest()

    def put(self, name: str, value: Any, kind: str | None = None) -> None:
        if kind is None:
            kind = "exact" if isinstance(value, (int, Fraction)) and not isinstance(value, bool) else "computed"
        self.quantities[name] = {"value": value, "kind": kind}

    def certify(self, name: str, passed: bool, anchor: str, witness: Any = None) -> None:
        self.certificates[name] = {"passed": bool(passed), "anchor": anchor, "witness": witness}

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.certificates.values())

    def as_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "version": __version__,
            "seed": self.seed,
            "inputs": self.inputs,
            "quantities": self.quantities,
            "certificates": self.certificates,
            "passed": self.passed,
            "wall_time": self.wall_time,
        }

    def to_json(self) -> str:
        return json.dumps(to_jsonable(self.as_dict()), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> ExperimentReport:
        data = json.loads(text)
        return cls(
            command=data["command"],
            seed=data["seed"],
            inputs=data["inputs"],
            quantities=data["quantities"],
            certificates=data["certificates"],
            wall_time=data["wall_time"],
        )


def _split_timing(obj: Any, path: str = "") -> tuple[Any, dict[str, float]]:
    """Remove every ``seconds`` entry so the rest of a report is reproducible."""
    times: dict[str, float] = {}
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            if k == "seconds":
                times[path or "."] = float(v)
                continue
            out[k], sub = _split_timing(v, f"{path}/{k}")
            times.update(sub)
        return out, times
    return obj, times


# ---------------------------------------------------------------- input helpers


def _space(rep: ExperimentReport, text: str) -> FiniteMetricSpace:
    rep.digest("space", Path(text).read_bytes() if text.endswith(".json") and Path(text).exists() else text)
    return parse_space(text)


def _label_index(space: FiniteMetricSpace, key: Any) -> int:
    """Resolve a point given as an index, a label, or ``{1,2}`` set notation for cube points."""
    if isinstance(key, int):
        if 0 <= key < space.n:
            return key
        raise ConcurvError("unknown-point", str(key))
    text = str(key).strip()
    for i, p in enumerate(space.points):
        if isinstance(p, str) and p == text:
            return i
    if text.startswith("{") and text.endswith("}"):
        inner = text[1:-1].strip()
        lab = frozenset(int(x) for x in inner.split(",")) if inner else frozenset()
        return space.index(lab)
    if text.lstrip("-").isdigit():
        return _label_index(space, int(text))
    return space.index(text)


def _read_json(rep: ExperimentReport, name: str, text: str) -> Any:
    """Inline JSON, or ``@file`` / a path to a JSON file."""
    src = text[1:] if text.startswith("@") else text
    p = Path(src)
    if not src.lstrip().startswith(("{", "[")) and p.suffix == ".json":
        try:
            raw = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConcurvError("bad-file", str(exc)) from None
    else:
        raw = src
    rep.digest(name, raw)
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConcurvError("bad-json", f"{name}: {exc}") from None


def _points(rep: ExperimentReport, space: FiniteMetricSpace, name: str, text: str) -> list[int]:
    """``0,3,5`` (indices), or a JSON list of indices/labels."""
    t = text.strip()
    if t.startswith("[") or t.endswith(".json") or t.startswith("@"):
        items = _read_json(rep, name, t)
        if not isinstance(items, list):
            raise ConcurvError("bad-set", f"{name} must be a list")
    else:
        rep.digest(name, t)
        items = [x for x in t.split(";" if "{" in t else ",") if x.strip()]
    return sorted({_label_index(space, x) for x in items})


def _distribution(rep: ExperimentReport, space: FiniteMetricSpace, name: str, text: str) -> tr.Distribution:
    data = _read_json(rep, name, text)
    if not isinstance(data, dict):
        raise ConcurvError("bad-distribution", f"{name} must map labels to masses")
    try:
        mass = {_label_index(space, k): Fraction(str(v)) for k, v in data.items()}
    except (ValueError, ZeroDivisionError) as exc:
        raise ConcurvError("bad-distribution", str(exc)) from None
    return tr.Distribution(space, mass)


def _field(rep: ExperimentReport, space: FiniteMetricSpace, text: str) -> lip.ScalarField:
    data = _read_json(rep, "field", text)
    anchor = 0
    if isinstance(data, dict) and "values" in data:
        if data.get("anchor") is not None:
            anchor = _label_index(space, data["anchor"])
        data = data["values"]
    vals: list[Any] = [None] * space.n
    items = data.items() if isinstance(data, dict) else enumerate(data)
    for k, v in items:
        vals[_label_index(space, k)] = Fraction(str(v))
    if any(v is None for v in vals):
        raise ConcurvError("bad-field", "every point needs a value")
    return lip.ScalarField(space, tuple(int(v) if v.denominator == 1 else v for v in vals), anchor)


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ConcurvError("bad-parameter", f"not a rational: {text}") from None


def _labels(space: FiniteMetricSpace, idx: Sequence[int]) -> list[Hashable]:
    return [space.points[i] for i in idx]


def _derived_seed(seed: int, k: int = 0) -> int:
    return int(np.random.SeedSequence(seed).spawn(k + 1)[k].generate_state(1)[0])


# ---------------------------------------------------------------- commands


def cmd_sigma(a: argparse.Namespace, rep: ExperimentReport) -> None:
    space = _space(rep, a.space)
    est = lip.subgaussian_constant(space, a.tmin, a.tmax, a.tpoints, cap=a.cap)
    rep.put("points", space.n)
    rep.put("sigma2", est.sigma2_grid_sup, "grid-sup" if est.exhaustive else "lower-estimate")
    rep.put("sigma2_curve_max", est.sigma2_lower)
    rep.put("limit_variance", est.limit_variance)
    rep.put("t_star", est.t_star)
    rep.put("exhaustive", est.exhaustive)
    rep.put("witness", est.witness.as_dict())
    rep.put("witness_log_moment", lip.log_moment(est.witness, est.t_star) if est.t_star else 0.0)
    # recompute the envelope at its largest ratio from the witness field itself
    curve = est.curve
    i = int(np.argmax(curve.ratio()))
    direct = lip.log_moment(curve.witnesses(i)[0], float(curve.t[i]))
    rep.certify(
        "envelope_matches_witness",
        abs(direct - float(curve.values[i])) <= 1e-9 * max(1.0, abs(direct)),
        "log-moment envelope L_G(t)",
        {"t": float(curve.t[i]), "envelope": float(curve.values[i]), "witness": direct},
    )
    ok, pair = lip.is_lipschitz(est.witness)
    rep.certify("witness_lipschitz", ok, "1-Lipschitz extremal fields", pair)
    rep.certify(
        "variance_below_sigma2",
        float(lip.variance(est.witness)) <= est.sigma2_grid_sup + 1e-12,
        "claim var(X) <= sigma^2",
        {"variance": lip.variance(est.witness)},
    )


def cmd_cvar(a: argparse.Namespace, rep: ExperimentReport) -> None:
    space = _space(rep, a.space)
    c2, fields = lip.max_variance(space, cap=a.cap)
    rep.put("c2", c2)
    rep.put("witness_count", len(fields))
    rep.put("witnesses", [f.as_dict() for f in fields[: a.show]])
    if space.n <= 12:
        rep.put("extremal_field_count", len(lip.enumerate_extremal_fields(space, cap=a.cap)))
    bad = [f.as_dict() for f in fields if not lip.is_lipschitz(f)[0] or lip.variance(f) != c2]
    rep.certify("witnesses_lipschitz_and_optimal", not bad, "spread c^2 attained by 1-Lipschitz fields", bad[:1] or None)


def cmd_structure(a: argparse.Namespace, rep: ExperimentReport) -> None:
    space = _space(rep, a.space)
    if a.field or a.field_file:
        f = _field(rep, space, a.field or a.field_file)
    else:
        f = lip.max_variance(space, cap=a.cap)[1][0]
    ok, pair = lip.is_lipschitz(f)
    rep.put("field", f.as_dict())
    rep.put("variance", lip.variance(f))
    rep.put("hairs", [_labels(space, h) for h in find_hairs(space.graph)])
    for t in a.t:
        rep.put(f"log_moment_t={t}", lip.log_moment(f, t))
    s = lip.structure_checks(f)
    rep.put("structure", s.as_dict())
    rep.certify("field_lipschitz", ok, "1-Lipschitz input field", pair)
    c2, _ = lip.max_variance(space, cap=a.cap)
    optimal = ok and lip.variance(f) == c2
    rep.put("variance_optimal", optimal)
    if optimal:
        rep.certify("unimodal_hairs", s.unimodal_hairs, "hairs go one way", s.witnesses.get("unimodal_hairs"))
        rep.certify("descent", s.descent, "go away from average", s.witnesses.get("descent"))
        rep.certify("origin_below_mean", s.origin_below_mean, "half-origin corollary", s.witnesses.get("origin_below_mean"))


def cmd_iso(a: argparse.Namespace, rep: ExperimentReport) -> None:
    space = _space(rep, a.space)
    value, S = iso.iso_function(space, a.d)
    rep.put("i_G_d", value)
    rep.put("argmin", S.labels())
    rep.certify("argmin_ball_size", len(iso.ball(S, a.d)) == value and 2 * len(S) >= space.n, "isoperimetric function", None)
    if a.set:
        T = iso.VertexSet.from_indices(space, _points(rep, space, "set", a.set))
        rep.put("ball", iso.ball(T, a.radius).labels())
    if a.field is not None:
        f = _field(rep, space, a.field)
        L = iso.level_set(f, _rational(a.r))
        rep.put("level_set", L.labels())


def cmd_counterexample(a: argparse.Namespace, rep: ExperimentReport) -> None:
    rep.digest("which", a.which)
    if a.which == "caterpillar":
        r = iso.caterpillar_counterexample(a.k, a.n)
        keep = ("median", "c2", "X_variance_optimal", "containment_all", "containment_failures", "strict_pairs", "strict_matches_prediction", "Y_lipschitz", "Y_violation")
        for k in keep:
            rep.put(k, r[k])
        rep.certify("containment_above_median", r["containment_above_median"], "caterpillar counterexample theorem")
        rep.certify("X_variance_optimal", r["X_variance_optimal"], "caterpillar counterexample theorem")
    elif a.which == "tripod":
        r = iso.tripod_examples(a.k, a.variant)
        for k, v in r.items():
            if k not in ("containment", "X_variance_optimal"):
                rep.put(k, v)
        rep.certify("containment", r["containment"], f"tripod example ({a.variant})")
        rep.certify("X_variance_optimal", r["X_variance_optimal"], f"tripod example ({a.variant})")
    else:
        r = hc.iterated_midpoint_counterexample()
        for k, v in r.items():
            rep.put(k, v)
        rep.certify("zeta_in_iterated", r["zeta_in_iterated"], "two convex sets example")
        rep.certify("zeta_not_in_quarter", not r["zeta_in_quarter"], "two convex sets example")


def cmd_midpoints(a: argparse.Namespace, rep: ExperimentReport) -> None:
    space = _space(rep, a.space)
    rho = _rational(a.rho)
    if a.S is not None or a.T is not None:
        if a.S is None or a.T is None:
            raise ConcurvError("bad-parameter", "--S and --T go together")
        S, T = _points(rep, space, "S", a.S), _points(rep, space, "T", a.T)
        m = hc.midpoints_hat_sets(space, S, T, rho)
        back = hc.midpoints_hat_sets(space, T, S, rho)
        rep.put("hat", _labels(space, m))
        rep.put("rho_one_sided", _labels(space, hc.midpoints_rho_sets(space, S, T, rho)))
        rep.certify("hat_symmetric", sorted(m) == sorted(back), "symmetric discrete midpoints")
        return
    x, y = _label_index(space, a.a), _label_index(space, a.b)
    rep.digest("pair", f"{a.a}|{a.b}")
    m = hc.midpoints_hat(space, x, y, rho)
    rep.put("hat", _labels(space, m))
    rep.put("rho_one_sided", _labels(space, hc.midpoints_rho(space, x, y, rho)))
    rep.put("tilde", [_labels(space, at) if isinstance(at, tuple) else space.points[at] for at in hc.midpoints_tilde(space, x, y)])
    rep.certify("hat_symmetric", sorted(m) == sorted(hc.midpoints_hat(space, y, x, rho)), "symmetric discrete midpoints")


def cmd_closure(a: argparse.Namespace, rep: ExperimentReport) -> None:
    space = _space(rep, a.space)
    S = _points(rep, space, "S", a.S)
    C = hc.convex_closure(space, S)
    rep.put("convex", hc.is_convex(space, S))
    rep.put("closure", _labels(space, C))
    rep.certify("closure_convex", hc.is_convex(space, C) and set(S) <= set(C), "convex closure")
    if hc.hypercube_dim(space) is not None:
        rep.certify("closure_is_interval", hc.is_interval(C), "convex sets of H_d are intervals")


def cmd_bm_scan(a: argparse.Namespace, rep: ExperimentReport) -> None:
    space = _space(rep, a.space)
    if a.S is not None and a.T is not None:
        est = hc.bm_curvature(space, _points(rep, space, "S", a.S), _points(rep, space, "T", a.T))
        rep.put("curvature", est)
    r = hc.bm_scan(space, a.samples, _derived_seed(a.seed), a.min_dstar, a.max_size)
    for k, v in r.items():
        if k != "holds":
            rep.put(k, v)
    rep.certify("K_hat_at_least_1_over_2dim", r["holds"], "Brunn-Minkowski curvature bound", r["violations"][:1] or None)


def cmd_phi(a: argparse.Namespace, rep: ExperimentReport) -> None:
    space = _space(rep, a.space)
    S, T = _points(rep, space, "S", a.S), _points(rep, space, "T", a.T)
    r = hc.phi_injection_check(space, S, T, _rational(a.rho), a.r)
    rep.put("radii", r["radii"])
    rep.certify("phi_properties", r["holds"], "weighted-midpoint bound (the map phi)")


def cmd_ot(a: argparse.Namespace, rep: ExperimentReport) -> None:
    space = _space(rep, a.space)
    mu_a, mu_b = _distribution(rep, space, "muA", a.muA), _distribution(rep, space, "muB", a.muB)
    cost, plan = tr.wasserstein(mu_a, mu_b, a.order)
    rep.put(f"W{a.order}", cost)
    rep.put("plan", plan)
    mono, cyc = tr.is_cyclically_monotone(plan)
    rep.certify("optimal_plan_monotone", mono, "cyclical monotonicity", cyc)
    if a.order == 2:
        parts = tr.partition(plan)
        rep.put("partition_eta", parts.eta)
        rep.certify("partition_recombines", bool(np.all(tr.recombine(plan, parts) == plan.tau)), "partition of a plan")
        if len(parts.eta) == 1:
            big = tr.everybody_is_large_check(plan)
            rep.put("everybody_is_large", big)
            rep.certify("everybody_is_large", big["holds"], "everybody is large lemma")
    if a.max_entropy:
        me = tr.max_entropy_optimal_plan(mu_a, mu_b, a.order)
        rep.put("max_entropy_plan", me)
        rep.put("max_entropy", me.entropy())
        prod = tr.product_structure_check(me)
        rep.certify("max_entropy_cost", abs(float(me.cost(a.order)) - float(cost)) <= 1e-9, "max-entropy optimal plan")
        rep.certify("product_structure", prod["holds"], "uniform across a midpoint lemma", prod.get("failures"))
    if a.forest:
        start = None
        if a.max_entropy:
            try:
                start = tr.acyclic_optimal_transport(mu_a, mu_b, a.order, start=me)
            except ConcurvError:
                start = None
        forest = start if start is not None else tr.acyclic_optimal_transport(mu_a, mu_b, a.order)
        rep.put("forest_plan", forest)
        rep.certify(
            "forest",
            tr.is_forest(forest) and forest.cost(a.order) == cost and tr.forest_bound_holds(forest),
            "forest of transportation claim",
        )


def cmd_convexity(a: argparse.Namespace, rep: ExperimentReport) -> None:
    space = _space(rep, a.space)
    mu_a, mu_b = _distribution(rep, space, "muA", a.muA), _distribution(rep, space, "muB", a.muB)
    t = _rational(a.t)
    r = tr.convexity_check(mu_a, mu_b, t, a.K, a.flavor, _derived_seed(a.seed))
    me = tr.max_entropy_optimal_plan(mu_a, mu_b)
    mu_t = tr.interpolate(me, t)
    rep.put("H_A", tr.entropy(mu_a))
    rep.put("H_B", tr.entropy(mu_b))
    rep.put("H_t_max_entropy_plan", tr.entropy(mu_t))
    rep.put("slack_max_entropy_plan", tr.displacement_convexity_slack(mu_a, mu_b, me, t, a.K))
    for k, v in r.items():
        if k != "holds":
            rep.put(k, v)
    rep.certify(f"convexity_{a.flavor}", r["holds"], f"entropy displacement convexity ({a.flavor})")


def cmd_strong(a: argparse.Namespace, rep: ExperimentReport) -> None:
    space = _space(rep, a.space)
    r = tr.strong_convexity_characterization(space)
    for k, v in r.items():
        if k != "agree":
            rep.put(k, v)
    rep.certify("recognizer_agrees_with_obstruction", r["agree"], "strong displacement convexity characterization")


def cmd_weak(a: argparse.Namespace, rep: ExperimentReport) -> None:
    space = _space(rep, a.space)
    mu_a, mu_b = _distribution(rep, space, "muA", a.muA), _distribution(rep, space, "muB", a.muB)
    r = tr.weak_curvature_bounds(mu_a, mu_b)
    for k, v in r.items():
        if k not in ("weak_holds", "almost_curved_holds"):
            rep.put(k, v)
    rep.certify("weak_bound", r["weak_holds"], "weak curvature of the hypercube")
    rep.certify("almost_curved", r["almost_curved_holds"], "almost curved theorem")
    ids = [c["identities"] for c in r["components"] if c["identities"] is not None]
    core = ("third", "fourth", "summed")
    ok = all(i[k]["holds"] for i in ids for k in core) and all(i["mu_C_matches_projection"] and i["phi_tilde_injective"] for i in ids)
    rep.certify("entropy_identities", ok, "weird entropy claim (identities)")


def cmd_bounds(a: argparse.Namespace, rep: ExperimentReport) -> None:
    rep.digest("kind", a.kind)
    if a.kind == "tail":
        params = {k: v for k, v in (("n", a.n), ("k", a.k), ("r", a.r), ("R", a.R), ("c", a.c)) if v is not None}
        est = None
        if a.space:
            est = lip.subgaussian_constant(_space(rep, a.space))
        sigma2 = a.sigma2 if a.sigma2 is not None or est is None else est.sigma2
        for h in a.h:
            rep.put(f"bound_h={h}", conc.tail_bound(sigma2, h, a.variant, **params))
        if est is not None:
            chk = conc.tail_check(est.witness, est.sigma2, a.h)
            rep.put("sigma2", est.sigma2)
            rep.put("empirical_tails", {str(h): conc.empirical_tail(est.witness, h) for h in a.h})
            rep.put("tail_rows", chk["rows"])
            rep.put("median_chain", chk["median_chain"])
            rep.certify("empirical_below_bound", chk["holds"], "subgaussian tail inequality chain")
    elif a.kind == "sn":
        r = conc.sn_bounds_report(a.n)
        for k, v in r.items():
            rep.put(k, v)
        rep.certify("upper", r["upper_holds"], "sigma^2(S_n) <= n - 1")
        if a.n >= 3:
            rep.certify("lower", r["lower_holds"], "sigma^2(S_n) > n/4")
    elif a.kind == "levels":
        r = conc.level_set_bounds(a.n, a.r or 0, a.k, a.t)
        for k, v in r.items():
            rep.put(k, v)
        if "below_bound" in r:
            rep.certify("below_bound", r["below_bound"], "sigma^2 of two level sets < n - 1 + r^2/4")
        if a.k is not None:
            adv = conc.adversarial_level_search(a.k, a.r or 0)
            rep.put("adversarial", adv)
            rep.certify("concentration_on_levels", adv["holds"], "concentration on levels")
    elif a.kind == "perm":
        exact, formula = conc.permutation_variance(a.n)
        corrected = conc.permutation_variance_corrected(a.n)
        rep.put("exhaustive", exact)
        rep.put("formula", formula)
        rep.put("corrected_formula", corrected)
        rep.certify("formula_matches", formula is not None and exact == formula, "permutation variance computation")
        rep.certify("above_n_over_4", exact > Fraction(a.n, 4), "sigma^2(S_n) > n/4 via one field")
    else:
        levels = [int(x) for x in a.levels.split(",")]
        r = conc.linear_far_check(a.n, a.R, a.c, levels, a.h, _derived_seed(a.seed))
        for k, v in r.items():
            if k != "holds":
                rep.put(k, v)
        rep.certify("linear_far_tail", r["holds"], "linearly far level sets (c >= 2)")


def cmd_expander(a: argparse.Namespace, rep: ExperimentReport) -> None:
    space = _space(rep, a.space)
    lam = conc.spectral_lambdas(space)
    rep.put("lambda2", lam["lambda2"])
    rep.put("lambda_abs", lam["lambda_abs"])
    if a.S is not None and a.T is not None:
        r = conc.expander_midpoints(space, _points(rep, space, "S", a.S), _points(rep, space, "T", a.T))
        rep.put("midpoints", r)
        rep.certify("mixing_lemma_pair", r["mixing"]["holds"], "expander mixing lemma")
    if a.mixing:
        scan = conc.mixing_scan(space, a.pairs, _derived_seed(a.seed))
        rep.put("mixing_scan", scan)
        rep.certify("mixing_lemma", scan["holds"], "expander mixing lemma")


def _geodesic_space(rep: ExperimentReport, text: str, seed: int) -> FiniteMetricSpace:
    if text.startswith("power_law:"):
        parts = text.split(":")
        if len(parts) not in (3, 4):
            raise ConcurvError("bad-space", "power_law:n:exponent[:seed]")
        rep.digest("space", text)
        s = int(parts[3]) if len(parts) == 4 else seed
        return geo.power_law_graph(int(parts[1]), float(parts[2]), s)
    return _space(rep, text)


def cmd_geodesic(a: argparse.Namespace, rep: ExperimentReport) -> None:
    space = _geodesic_space(rep, a.space, a.seed)
    r = geo.exact_midpoint_law(space, a.variant)
    for k, v in r.items():
        if k != "proportional":
            rep.put(k, v)
    if r["no_even_geodesics"]:
        rep.certify("degree_proportional", True, "random geodesic midpoints (vacuous: no even geodesics)")
    else:
        rep.certify("degree_proportional", bool(r["proportional"]), "random geodesic midpoints are degree-proportional")
    if a.mc:
        mc = geo.mc_teleport_walk(space, a.c, a.steps, _derived_seed(a.seed), a.variant)
        rep.put("mc", mc)
        if "within_3sigma" in mc:
            rep.certify("mc_within_3sigma", mc["within_3sigma"], "teleport walk midpoint law")


def cmd_odd_cycle(a: argparse.Namespace, rep: ExperimentReport) -> None:
    rep.digest("n", str(a.n))
    r = lip.odd_cycle_optimality(a.n, lip.geometric_grid(a.tmin, a.tmax, a.tpoints))
    for k, v in r.items():
        if k != "holds":
            rep.put(k, v)
    rep.certify("witnesses_are_distance_functions" if a.n % 2 else "witnesses_up_down", r["holds"], "odd-cycle optimality theorem")


def cmd_tree_search(a: argparse.Namespace, rep: ExperimentReport) -> None:
    r = lip.tree_conjecture_search(a.trials, a.max_n, _derived_seed(a.seed))
    rep.put("counterexamples", r["counterexamples"])
    rep.put("trials", r["trials"])
    rep.put("all_rooted", r["holds"])
    rep.put("high_degree_root_fraction", _fraction_true([x["high_degree_root"] for x in r["results"]]))


def _fraction_true(flags: list[Any]) -> Fraction | None:
    vals = [bool(f) for f in flags if f is not None]
    return Fraction(sum(vals), len(vals)) if vals else None


def cmd_root_search(a: argparse.Namespace, rep: ExperimentReport) -> None:
    space = _space(rep, a.space)
    if space.graph is None or not space.graph.is_tree():
        raise ConcurvError("not-a-tree", "root search needs a tree")
    r = lip.root_search(space)
    for k, v in r.items():
        rep.put(k, v)


def cmd_suite(a: argparse.Namespace, rep: ExperimentReport) -> None:
    rep.digest("suite", a.name)
    numbers = acceptance.GROUPS[a.name]
    if a.only:
        numbers = [k for k in numbers if k in set(a.only)]
    children = np.random.SeedSequence(a.seed).spawn(max(acceptance.CRITERIA))

    def one(k: int) -> dict[str, Any]:
        sub = int(children[k - 1].generate_state(1)[0]) if a.seed else 0
        t0 = time.perf_counter()
        ok, details = acceptance.CRITERIA[k](sub)
        return {"k": k, "ok": ok, "details": details, "seconds": time.perf_counter() - t0}

    if a.threads > 1:
        with ThreadPoolExecutor(max_workers=a.threads) as pool:
            results = list(pool.map(one, numbers))
    else:
        results = [one(k) for k in numbers]
    timing: dict[str, Any] = {}
    for res in results:
        k = res["k"]
        details, inner = _split_timing(to_jsonable(res["details"]))
        timing[f"criterion_{k:02d}"] = {"total": res["seconds"], **inner}
        rep.certify(f"criterion_{k:02d}", res["ok"], acceptance.ANCHORS[k], details)
    rep.put("criteria", numbers)
    rep.put("passed_count", sum(1 for r in results if r["ok"]))
    rep.wall_time = {"criteria": timing}


# ---------------------------------------------------------------- parser

# every command with the library operations it exercises
COMMANDS: dict[str, tuple[Callable[[argparse.Namespace, ExperimentReport], None], tuple[str, ...]]] = {
    "sigma": (cmd_sigma, ("parse_space", "family", "product", "build_graph", "shortest_path_metric", "subgaussian_constant", "log_moment_envelope", "log_moment", "is_lipschitz", "variance")),
    "cvar": (cmd_cvar, ("max_variance", "enumerate_extremal_fields", "is_lipschitz", "variance")),
    "structure": (cmd_structure, ("structure_checks", "find_hairs", "log_moment", "max_variance")),
    "iso": (cmd_iso, ("iso_function", "ball", "level_set")),
    "counterexample": (cmd_counterexample, ("caterpillar_counterexample", "tripod_examples", "iterated_midpoint_counterexample")),
    "midpoints": (cmd_midpoints, ("midpoints_hat", "midpoints_tilde")),
    "closure": (cmd_closure, ("is_convex", "convex_closure")),
    "bm-scan": (cmd_bm_scan, ("bm_curvature", "bm_scan")),
    "phi": (cmd_phi, ("phi_injection_check",)),
    "ot": (cmd_ot, ("wasserstein", "is_cyclically_monotone", "max_entropy_optimal_plan", "partition", "everybody_is_large_check", "acyclic_optimal_transport")),
    "convexity-check": (cmd_convexity, ("interpolate", "entropy", "displacement_convexity_slack")),
    "strong-convexity": (cmd_strong, ("strong_convexity_characterization",)),
    "weak-curvature": (cmd_weak, ("weak_curvature_bounds",)),
    "bounds": (cmd_bounds, ("tail_bound", "empirical_tail", "permutation_variance", "level_set_bounds", "sn_bounds_report")),
    "expander": (cmd_expander, ("expander_midpoints",)),
    "geodesic-law": (cmd_geodesic, ("exact_midpoint_law", "mc_teleport_walk", "power_law_graph")),
    "odd-cycle": (cmd_odd_cycle, ("odd_cycle_optimality",)),
    "tree-search": (cmd_tree_search, ("tree_conjecture_search",)),
    "root-search": (cmd_root_search, ("root_search",)),
    "suite": (cmd_suite, ("suite",)),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # usage errors exit with 2 without a traceback
        self.print_usage(sys.stderr)
        raise ConcurvError("usage", message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--format", choices=["json"], default="json")

    p = _Parser(prog="concurv", description="Concentration, isoperimetry and discrete curvature on finite graphs.")
    p.add_argument("--version", action="version", version=f"concurv {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, help: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, help=help, parents=[common])

    s = add("sigma", "subgaussian constant by log-moment envelope")
    s.add_argument("space")
    s.add_argument("--tmin", type=float, default=1e-3)
    s.add_argument("--tmax", type=float, default=50.0)
    s.add_argument("--tpoints", type=int, default=400)
    s.add_argument("--cap", type=int, default=None)

    s = add("cvar", "maximum variance of a 1-Lipschitz field")
    s.add_argument("space")
    s.add_argument("--cap", type=int, default=None)
    s.add_argument("--show", type=int, default=5)

    s = add("structure", "structural checks for a field (default: a variance-optimal one)")
    s.add_argument("space")
    s.add_argument("field_file", nargs="?", help="field JSON (same as --field)")
    s.add_argument("--field", help='{"anchor": label, "values": {label: value}} or {label: value}')
    s.add_argument("--t", type=float, nargs="*", default=[])
    s.add_argument("--cap", type=int, default=None)

    s = add("iso", "isoperimetric function, balls and level sets")
    s.add_argument("space")
    s.add_argument("--d", type=int, default=1)
    s.add_argument("--set")
    s.add_argument("--radius", type=int, default=1)
    s.add_argument("--field")
    s.add_argument("--r", default="0")

    s = add("counterexample", "caterpillar, tripod and iterated-midpoint constructions")
    s.add_argument("which", choices=["caterpillar", "tripod", "iterated"])
    s.add_argument("--k", type=int, default=4)
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--variant", choices=["plain", "star"], default="plain")
    s.add_argument("--star", action="store_const", const="star", dest="variant")

    s = add("midpoints", "discrete midpoints of two points or two sets")
    s.add_argument("space")
    s.add_argument("--a", default="0")
    s.add_argument("--b", default="0")
    s.add_argument("--S")
    s.add_argument("--T")
    s.add_argument("--rho", default="1/2")

    s = add("closure", "convexity and convex closure")
    s.add_argument("space")
    s.add_argument("--S", "--set", dest="S", required=True)

    s = add("bm-scan", "random search against the Brunn-Minkowski curvature bound")
    s.add_argument("space")
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--min-dstar", type=int, default=2)
    s.add_argument("--max-size", type=int, default=4)
    s.add_argument("--S")
    s.add_argument("--T")

    s = add("phi", "injection check for the map phi")
    s.add_argument("space")
    s.add_argument("--S", required=True)
    s.add_argument("--T", required=True)
    s.add_argument("--rho", default="1/2")
    s.add_argument("--r", type=int, default=None)

    s = add("ot", "optimal transport between two distributions")
    s.add_argument("space")
    s.add_argument("--muA", required=True)
    s.add_argument("--muB", required=True)
    s.add_argument("--order", type=int, choices=[1, 2], default=2)
    s.add_argument("--max-entropy", action="store_true")
    s.add_argument("--forest", action="store_true")

    s = add("convexity-check", "entropy displacement convexity under one plan quantifier")
    s.add_argument("space")
    s.add_argument("--muA", required=True)
    s.add_argument("--muB", required=True)
    s.add_argument("--t", default="1/2")
    s.add_argument("--K", type=float, default=0.0)
    s.add_argument("--flavor", choices=["strong", "sos", "sow", "weak"], default="weak")

    s = add("strong-convexity", "family recognizer versus local obstruction")
    s.add_argument("space")

    s = add("weak-curvature", "hypercube entropy bounds on the max-entropy plan")
    s.add_argument("space")
    s.add_argument("--muA", required=True)
    s.add_argument("--muB", required=True)

    s = add("bounds", "tail, symmetric-group, level-set, permutation and linear-far bounds")
    s.add_argument("kind", choices=["tail", "sn", "levels", "perm", "linear-far"])
    s.add_argument("--space")
    s.add_argument("--sigma2", type=float, default=None)
    s.add_argument("--h", type=float, nargs="*", default=[1.0])
    s.add_argument("--variant", choices=list(conc.TAIL_VARIANTS), default="plain")
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--k", type=int, default=None)
    s.add_argument("--r", type=int, default=None)
    s.add_argument("--R", type=int, default=None)
    s.add_argument("--c", type=float, default=None)
    s.add_argument("--t", type=float, default=None)
    s.add_argument("--levels", default="")

    s = add("expander", "spectral gap, mixing lemma and expander midpoints")
    s.add_argument("space")
    s.add_argument("--S")
    s.add_argument("--T")
    s.add_argument("--mixing", action="store_true")
    s.add_argument("--pairs", type=int, default=1000)

    s = add("geodesic-law", "midpoint law of weighted random geodesics")
    s.add_argument("space", help="a space, or power_law:n:exponent[:seed]")
    s.add_argument("--variant", type=int, choices=[1, 2], default=1)
    s.add_argument("--mc", action="store_true")
    s.add_argument("--c", type=float, default=0.9)
    s.add_argument("--steps", type=int, default=10**6)

    s = add("odd-cycle", "log-moment witnesses on C_n")
    s.add_argument("--n", type=int, default=5)
    s.add_argument("--tmin", type=float, default=1e-3)
    s.add_argument("--tmax", type=float, default=50.0)
    s.add_argument("--tpoints", type=int, default=400)

    s = add("tree-search", "random trees against the root conjecture")
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--max-n", type=int, default=12)

    s = add("root-search", "roots of variance-optimal fields on one tree")
    s.add_argument("space")

    s = add("suite", "run the acceptance battery")
    s.add_argument("name", choices=sorted(acceptance.GROUPS))
    s.add_argument("--only", type=int, nargs="*", default=None)
    return p


def _checks(a: argparse.Namespace) -> None:
    if a.command == "bounds":
        need = {"sn": ("n",), "levels": ("n",), "perm": ("n",), "linear-far": ("n", "R", "c")}.get(a.kind, ())
        missing = [k for k in need if getattr(a, k) is None]
        if missing:
            raise ConcurvError("usage", f"bounds {a.kind} needs --{' --'.join(missing)}")
    if a.threads < 1:
        raise ConcurvError("usage", "--threads >= 1")


def run(argv: Sequence[str]) -> tuple[ExperimentReport | None, int]:
    """Parse ``argv``, run the command and return the report with its exit status."""
    argv = list(argv)
    try:
        a = build_parser().parse_args(argv)
        _checks(a)
    except ConcurvError as exc:
        print(f"concurv: {exc}", file=sys.stderr)
        return None, EXIT_USAGE
    rep = ExperimentReport(command=argv, seed=a.seed)
    t0 = time.perf_counter()
    try:
        COMMANDS[a.command][0](a, rep)
    except (ValueError, OSError) as exc:  # ConcurvError is a ValueError
        print(f"concurv: {exc}", file=sys.stderr)
        return None, EXIT_USAGE
    total = time.perf_counter() - t0
    if isinstance(rep.wall_time, dict):
        rep.wall_time["total"] = total
    else:
        rep.wall_time = total
    text = rep.to_json()
    if a.out:
        Path(a.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return rep, EXIT_OK if rep.passed else EXIT_FAIL


def main(argv: Sequence[str] | None = None) -> int:
    _, code = run(sys.argv[1:] if argv is None else argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
