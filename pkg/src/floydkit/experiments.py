"""Experiment drivers with deterministic CSV/JSON output, and the thin-triangle scan."""

from __future__ import annotations

import csv
import io
import json
import random
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import combinations, product
from math import comb
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .floyd import floyd_metric
from .functions import as_fraction, fraction_str, parse_distortion, parse_scaling
from .groups import DEFAULT_VERTEX_BUDGET, CayleyBall, build_ball, load_group
from .karlsson import empirical_scan
from .maps import (
    EquivalenceRelation,
    check_condition_6,
    check_condition_13,
    lipschitz_constant,
    lipschitz_constant_alpha,
    map_from_dict,
    quasiconvexity_scan,
    shortcut_pseudometric,
    verify_lipschitz,
)
from .paths import count_geodesics, hull, iter_geodesics, lex_least_geodesic

DRIVERS = ("floyd-dist", "karlsson-scan", "hull", "qi-check", "shortcut", "triangles", "quasiconvexity")
DEFAULT_COMBO_CAP = 5000


class UsageError(ValueError):
    """The experiment configuration is missing or malformed."""


class ExperimentError(RuntimeError):
    """A module call failed; the message names the failing stage."""


# -- triangles -------------------------------------------------------------------

@dataclass
class TriangleWitness:
    triangle: tuple  # three vertex indices
    sides: tuple  # three index paths: v0->v1, v1->v2, v2->v0
    side: int
    point: int
    thinness: int

    def describe(self, ball: CayleyBall) -> dict:
        name = lambda i: str(ball.vertices[i])
        return {
            "triangle": [name(i) for i in self.triangle],
            "sides": [[name(i) for i in s] for s in self.sides],
            "side": self.side,
            "point": name(self.point),
            "thinness": self.thinness,
        }


@dataclass
class TriangleReport:
    choice: str
    max_thinness: int
    witness: TriangleWitness | None
    triangles_checked: int
    skipped: int
    exhaustive: bool

    def to_dict(self, ball: CayleyBall) -> dict:
        return {
            "choice": self.choice, "max_thinness": self.max_thinness,
            "witness": self.witness.describe(ball) if self.witness else None,
            "triangles_checked": self.triangles_checked, "skipped": self.skipped,
            "exhaustive": self.exhaustive,
        }


def _side_thinness(D: np.ndarray, sides) -> tuple[int, int, int]:
    """(thinness, side, point) for one choice of three sides."""
    best = (-1, 0, 0)
    for s in range(3):
        here = np.asarray(sides[s])
        others = np.asarray(sides[(s + 1) % 3] + sides[(s + 2) % 3])
        gaps = D[np.ix_(here, others)].min(axis=1)
        k = int(np.argmax(gaps))
        if int(gaps[k]) > best[0]:
            best = (int(gaps[k]), s, int(here[k]))
    return best


def triangle_thinness(ball: CayleyBall, tri: Sequence, choice: str = "lex",
                      combo_cap: int = DEFAULT_COMBO_CAP) -> TriangleWitness | None:
    """Thinness of a geodesic triangle; None when the side choices exceed ``combo_cap``.

    With ``choice='lex'`` each side is the lexicographically least geodesic;
    with ``choice='exhaustive'`` the maximum over all geodesic choices is taken.
    """
    idx = tuple(ball.idx(t) for t in tri)
    ends = [(idx[0], idx[1]), (idx[1], idx[2]), (idx[2], idx[0])]
    D = ball.exact_distance_matrix()
    for a, b in ends:
        if not ball.ball_distance_certified(a, b, int(ball.bfs(a)[b])):
            raise ValueError(f"side {ball.vertices[a]} - {ball.vertices[b]} has no geodesic inside the ball")
    if choice == "lex":
        options = [[lex_least_geodesic(ball, a, b)] for a, b in ends]
    elif choice == "exhaustive":
        total = 1
        for a, b in ends:
            total *= count_geodesics(ball, a, b)
        if total > combo_cap:
            return None
        options = [list(iter_geodesics(ball, a, b)) for a, b in ends]
    else:
        raise ValueError(f"unknown geodesic choice {choice!r}")
    best = None
    for sides in product(*options):
        t, s, x = _side_thinness(D, sides)
        if best is None or t > best.thinness:
            best = TriangleWitness(idx, tuple(tuple(p) for p in sides), s, x, t)
    return best


def _triangles(n: int, budget: int, seed: int):
    if comb(n, 3) <= budget:
        return list(combinations(range(n), 3)), True
    rng = random.Random(seed)
    seen = set()
    while len(seen) < budget:
        seen.add(tuple(sorted(rng.sample(range(n), 3))))
    return sorted(seen), False


def triangle_thinness_scan(ball: CayleyBall, sample_budget: int = 20_000, seed: int = 0,
                           choice: str = "lex", triangles: Sequence | None = None,
                           combo_cap: int = DEFAULT_COMBO_CAP) -> TriangleReport:
    """Max thinness over geodesic triangles whose sides stay inside the ball.

    Triangles are all vertex triples when there are at most ``sample_budget``
    of them, otherwise a seeded sample; explicit ``triangles`` override both.
    Triples whose sides leave the ball are skipped, as are those exceeding
    ``combo_cap`` side combinations.
    """
    if triangles is not None:
        tris, exhaustive = [tuple(ball.idx(v) for v in t) for t in triangles], False
    else:
        tris, exhaustive = _triangles(len(ball), sample_budget, seed)
    best, checked, skipped = None, 0, 0
    for tri in tris:
        try:
            w = triangle_thinness(ball, tri, choice, combo_cap)
        except ValueError:
            skipped += 1
            continue
        if w is None:
            skipped += 1
            continue
        checked += 1
        if best is None or w.thinness > best.thinness:
            best = w
    return TriangleReport(choice, best.thinness if best else 0, best, checked, skipped,
                          exhaustive and skipped == 0)


@dataclass
class TranslatedSide:
    point: Any
    endpoints: tuple
    lower: Fraction
    upper: Fraction
    ball_radius: int


def translated_side_distance(group, witness: TriangleWitness, ball: CayleyBall, f, margin: int = 6) -> TranslatedSide:
    """Translate the witness side so its far point sits at the identity and
    bracket the Floyd distance between the translated side endpoints."""
    x = ball.vertices[witness.point]
    side = witness.sides[witness.side]
    xinv = group.inverse(x)
    ends = tuple(group.multiply(xinv, ball.vertices[v]) for v in (side[0], side[-1]))
    R = max(e.length for e in ends) + margin
    big = build_ball(group, R)
    br = floyd_metric(big, f).bracket(big.idx(ends[0]), big.idx(ends[1]))
    return TranslatedSide(x, ends, br.lower, br.upper, R)


# -- configuration ---------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    driver: str
    group: str = "F2"
    f: str = "exp:1/2"
    alpha: str | None = None
    c: str | None = None
    radius: int = 4
    epsilon: str = "1/10"
    seed: int = 0
    samples: int = 1000
    budget: int = DEFAULT_VERTEX_BUDGET
    out: str = "results"
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not doc:
            raise UsageError("empty experiment configuration")
        if "driver" not in doc:
            raise UsageError("configuration needs a 'driver'")
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise UsageError(f"unknown configuration keys {sorted(extra)}")
        cfg = cls(**doc)
        if cfg.driver not in DRIVERS:
            raise UsageError(f"unknown driver {cfg.driver!r}; choose from {', '.join(DRIVERS)}")
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)


def _fs(q):
    if q is None:
        return ""
    if isinstance(q, Fraction):
        return fraction_str(q)
    return q


def _words(seq) -> str:
    return ";".join(str(v) for v in seq)


class _Stage:
    def __init__(self, driver):
        self.driver = driver
        self.name = "setup"

    def __call__(self, name):
        self.name = name
        return self


def _driver_floyd_dist(cfg, ball, f, stage):
    p = cfg.params
    if "pairs" in p:
        pairs = [(ball.idx(a), ball.idx(b)) for a, b in p["pairs"]]
    else:
        pr = int(p.get("pair_radius", 1))
        pts = [i for i, s in enumerate(ball.sphere_index) if s <= pr]
        pairs = list(combinations(pts, 2))
    stage("floyd brackets")
    metric = floyd_metric(ball, f)
    tol = as_fraction(p.get("tolerance", "1/1000000"))
    rows = []
    for i, j in pairs:
        br = metric.bracket(i, j, tol)
        rows.append({"a": str(ball.vertices[i]), "b": str(ball.vertices[j]), "lower": br.lower,
                     "upper": br.upper, "gap": br.gap, "converged": br.converged})
    return ["a", "b", "lower", "upper", "gap", "converged"], rows, {"pairs": len(rows)}


def _driver_karlsson(cfg, ball, f, stage):
    p = cfg.params
    rs = p.get("r") or list(range(1, max(2, cfg.radius - 1)))
    alpha = parse_distortion(cfg.alpha) if cfg.alpha else None
    stage("empirical scan")
    rep = empirical_scan(ball, f, c=cfg.c, alpha=alpha, r=[int(x) for x in rs],
                         samples=cfg.samples, seed=cfg.seed, max_length=p.get("max_length"))
    rows = [{"r": row.r, "analytic_bound": row.analytic_bound, "empirical_max": row.empirical_max,
             "paths": row.n_paths, "violations": len(row.violations),
             "witness": _words(row.witness or ())} for row in rep.rows]
    return (["r", "analytic_bound", "empirical_max", "paths", "violations", "witness"], rows,
            {"mode": rep.mode, "passed": rep.passed})


def _driver_hull(cfg, ball, f, stage):
    p = cfg.params
    if "M" not in p:
        raise UsageError("hull driver needs params.M (list of words)")
    alpha = parse_distortion(cfg.alpha) if cfg.alpha else None
    stage("hull")
    h = hull(ball, p["M"], c=cfg.c, alpha=alpha, mode=p.get("mode", "exhaustive"),
             samples=cfg.samples, seed=cfg.seed)
    by_member = {}
    for w in h.witness_paths:
        for v in w.vertices:
            by_member.setdefault(v, w)
    rows = [{"member": str(m), "witness_path": _words(by_member[m].vertices) if m in by_member else str(m)}
            for m in h.members]
    return ["member", "witness_path"], rows, {"members": len(h.members), "paths": h.path_count}


def _driver_qi(cfg, ball, f, stage):
    p = cfg.params
    if "map" not in p:
        raise UsageError("qi-check driver needs params.map")
    stage("map")
    phi = map_from_dict(p["map"])
    f1 = f
    f2 = parse_scaling(p["f2"]) if "f2" in p else f
    stage("compatibility condition")
    if phi.c is not None:
        cond = check_condition_6(f1, f2, phi.c)
    else:
        cond = check_condition_13(f1, f2, phi.alpha)
    if not cond.passed:
        raise ValueError(f"compatibility condition {cond.verdict}: {cond.note}")
    K, E = f2.ratio_constant(), f1.ratio_constant()
    if phi.c is not None:
        eps = lipschitz_constant(phi.c, cond.D, K, E, phi.basepoint_shift)
    else:
        eps = lipschitz_constant_alpha(phi.alpha1, cond.D, K, phi.basepoint_shift)
    stage("balls")
    pr = int(p.get("pair_radius", cfg.radius))
    src = build_ball(phi.source, pr + int(p.get("margin", 8)), budget=cfg.budget)
    longest = max((len(w) for w in (phi.images or {}).values()), default=1) or 1
    tgt = build_ball(phi.target, pr * longest + phi.basepoint_shift + 2, budget=cfg.budget)
    stage("verify")
    rep = verify_lipschitz(phi, src, tgt, f1, f2, eps, pair_radius=pr)
    row = {"source": json.dumps(phi.source.to_dict(), sort_keys=True),
           "target": json.dumps(phi.target.to_dict(), sort_keys=True),
           "D": cond.D, "epsilon": eps, "min_ratio": rep.min_certified_ratio,
           "min_upper_ratio": rep.min_upper_ratio,
           "witness": _words(rep.certified_witness or ()), "pairs": rep.pairs_checked,
           "undetermined": rep.undetermined, "pass": rep.passed}
    cols = ["source", "target", "D", "epsilon", "min_ratio", "min_upper_ratio", "witness", "pairs",
            "undetermined", "pass"]
    return cols, [row], {"passed": rep.passed}


def _driver_shortcut(cfg, ball, f, stage):
    p = cfg.params
    if "classes" not in p:
        raise UsageError("shortcut driver needs params.classes (one label per point)")
    if "delta" in p:
        delta = [[as_fraction(x) for x in row] for row in p["delta"]]
        names = [str(x) for x in p.get("points", range(len(delta)))]
    else:
        if "points" not in p:
            raise UsageError("shortcut driver needs params.points or params.delta")
        stage("floyd distances")
        idx = [ball.idx(w) for w in p["points"]]
        metric = floyd_metric(ball, f)
        delta = [[metric.upper(i, j) for j in idx] for i in idx]
        names = [str(ball.vertices[i]) for i in idx]
    stage("shortcut")
    out = shortcut_pseudometric(names, delta, EquivalenceRelation.from_labels(p["classes"]))
    rows = [{"i": i, "j": j, "point_i": names[i], "point_j": names[j], "delta": delta[i][j],
             "shortcut": out[i][j]} for i in range(len(names)) for j in range(i + 1, len(names))]
    return ["i", "j", "point_i", "point_j", "delta", "shortcut"], rows, {"points": len(names)}


def _driver_triangles(cfg, ball, f, stage):
    p = cfg.params
    stage("thinness scan")
    rep = triangle_thinness_scan(ball, int(p.get("sample_budget", 20_000)), cfg.seed,
                                 p.get("choice", "lex"), p.get("triangles"),
                                 int(p.get("combo_cap", DEFAULT_COMBO_CAP)))
    row = {"thinness": rep.max_thinness, "triangle": "", "side": "", "point": "",
           "translated_endpoints": "", "delta_lower": None, "delta_upper": None,
           "checked": rep.triangles_checked, "skipped": rep.skipped}
    if rep.witness is not None and rep.witness.thinness > 0:
        w = rep.witness
        stage("translation")
        tr = translated_side_distance(ball.group, w, ball, f, int(p.get("margin", 6)))
        row.update(triangle=_words(ball.vertices[i] for i in w.triangle),
                   side=_words(ball.vertices[i] for i in w.sides[w.side]),
                   point=str(ball.vertices[w.point]), translated_endpoints=_words(tr.endpoints),
                   delta_lower=tr.lower, delta_upper=tr.upper)
    elif rep.witness is not None:
        w = rep.witness
        row.update(triangle=_words(ball.vertices[i] for i in w.triangle))
    cols = ["thinness", "triangle", "side", "point", "translated_endpoints", "delta_lower",
            "delta_upper", "checked", "skipped"]
    return cols, [row], {"max_thinness": rep.max_thinness}


def _driver_quasiconvexity(cfg, ball, f, stage):
    p = cfg.params
    if "map" not in p:
        raise UsageError("quasiconvexity driver needs params.map (a subgroup inclusion)")
    stage("map")
    phi = map_from_dict(p["map"])
    stage("scan")
    rep = quasiconvexity_scan(ball, phi, int(p.get("C", 0)), p.get("source_radius"))
    w = rep.witness or {}
    row = {"C": rep.C, "max_deviation": rep.max_deviation, "witness_vertex": w.get("vertex", ""),
           "witness_endpoints": _words(w.get("endpoints", ())), "subgroup_points": rep.subgroup_points,
           "pairs": rep.pairs, "skipped": rep.skipped_pairs, "violations": rep.violations}
    return list(row), [row], {"passed": rep.passed}


_DRIVERS = {
    "floyd-dist": _driver_floyd_dist,
    "karlsson-scan": _driver_karlsson,
    "hull": _driver_hull,
    "qi-check": _driver_qi,
    "shortcut": _driver_shortcut,
    "triangles": _driver_triangles,
    "quasiconvexity": _driver_quasiconvexity,
}


def _render_csv(config: dict, cols, rows) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fs(r.get(c)) for c in cols])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, Fraction):
        return fraction_str(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def run_experiment(config: ExperimentConfig | dict) -> dict:
    """Run one driver; writes ``<out>/<driver>.csv`` and ``<out>/<driver>.json``
    and returns the JSON document."""
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_dict(config or {})
    stage = _Stage(config.driver)
    try:
        stage("parse")
        f = parse_scaling(config.f)
        ball = None
        if config.driver not in ("qi-check",) and not (
                config.driver == "shortcut" and "delta" in config.params):
            stage("load group")
            group = load_group(config.group)
            stage("build ball")
            ball = build_ball(group, config.radius, budget=config.budget)
        cols, rows, summary = _DRIVERS[config.driver](config, ball, f, stage)
    except UsageError:
        raise
    except Exception as exc:
        raise ExperimentError(f"{config.driver}: stage '{stage.name}' failed: {exc}") from exc
    cfg = config.to_dict()
    doc = {"config": cfg, "columns": cols, "rows": _jsonable(rows), "summary": _jsonable(summary)}
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{config.driver}.csv").write_text(_render_csv(cfg, cols, rows), encoding="utf-8")
    (out / f"{config.driver}.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n",
                                               encoding="utf-8")
    return doc
