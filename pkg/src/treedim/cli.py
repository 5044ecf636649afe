"""Command-line front end.

Subcommands map one-to-one onto the analysis reports: ``dim`` for growth
against the enveloping wreath tower, ``abel`` for abelianization indices
plus the bounded-abelianization scan, ``orbits`` for orbit classification,
``rist`` for rigid stabilizers, ``verify-gk`` for the rooted-times-diagonal
construction report, ``quotient`` for raw orders, and ``check`` for the
bundled invariant suite over the fixture catalog.

Group spec files are UTF-8 JSON::

    {
      "schema_version": 1,
      "name": "odometer",
      "m": 2,
      "top": ["(1 2)"],
      "states": {"a": {"root": "(1 2)", "sections": ["1", "a"]}},
      "generators": ["a"],
      "construction": {"kind": "plain"}
    }

Cycle notation is 1-based; "()" is the identity.  Generator words multiply
state names left to right, e.g. "a*b^-1*a"; "1" is the identity word.
``construction.kind`` is one of plain, rooted, diagonal, GK, wreath_full;
rooted/GK/wreath_full carry "h" (top-group generators in cycle notation) and
diagonal/GK carry "inner" (a nested spec object).  ``--spec`` accepts either
a fixture name from the catalog or a path to such a file.

Machine-readable output is deterministic: fixed key order, floats printed
with 12 significant digits, big integers as decimal strings, CSV with plain
newlines.  Reports are written atomically; on a resource limit the partial
report carries ``"truncated": true`` and the exit code is 2.  Exit codes:
0 success, 1 a verification failed, 2 parse/validation/resource errors.
Every flag has a TREEDIM_<NAME> environment default; flags win over the
environment.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .analysis import (
    DEFAULT_TOLERANCE,
    DEFAULT_WINDOW,
    QuotientStore,
    abelianization_index,
    dimension_sequence,
    envelope_order,
    level_transitivity,
    local_rigid,
    orbit_stats,
    perfectness_scan,
    quotient,
    rigid_level,
    stabilizer_index,
    verify_GK,
)
from .constructions import (
    CONSTRUCTION_KINDS,
    Construction,
    GroupSpec,
    fixtures,
)
from .errors import (
    NotTransitive,
    ParseError,
    ResourceLimit,
    TreedimError,
    ValidationError,
)
from .permgroup import MAX_CHAIN_POINTS, Permutation, build_chain, compose, orbits
from .treeauto import IDENTITY_STATE, Element, Machine, State, evaluate, multiply, word_text

SCHEMA_VERSION = 1

_ENV_PREFIX = "TREEDIM_"


# -- notation ---------------------------------------------------------------

def parse_cycles(text: str, m: int) -> Permutation:
    """Permutation of m points from 1-based cycle notation like "(1 2)(3 4)"."""
    try:
        return Permutation.from_cycles(text, m)
    except ValueError as e:
        raise ParseError(str(e)) from e


def cycles_text(p: Permutation) -> str:
    return p.to_cycles()


def parse_word(text: str) -> tuple[tuple[str, int], ...]:
    """Letters of a generator word like "a*b^-1*a"; "1" is the identity."""
    s = text.strip()
    if not s:
        raise ParseError("empty generator word")
    letters: list[tuple[str, int]] = []
    for tok in s.split("*"):
        tok = tok.strip()
        if not tok:
            raise ParseError(f"empty letter in word {text!r}")
        base, sep, expt = tok.rpartition("^")
        if sep:
            try:
                k = int(expt)
            except ValueError:
                raise ParseError(f"bad exponent {expt!r} in word {text!r}")
        else:
            base, k = tok, 1
        if not base:
            raise ParseError(f"bad letter {tok!r} in word {text!r}")
        letters.extend([(base, 1 if k > 0 else -1)] * abs(k))
    return tuple(letters)


# -- spec files -------------------------------------------------------------

def spec_to_obj(spec: GroupSpec) -> dict:
    """JSON-ready dict for a spec; inverse of the parsing in parse_spec."""
    states: dict[str, dict] = {}
    if spec.machine is not None:
        for name, st in spec.machine.states.items():
            states[name] = {"root": cycles_text(st.root),
                            "sections": list(st.sections)}
    obj: dict = {
        "schema_version": SCHEMA_VERSION,
        "name": spec.name,
        "m": spec.m,
        "top": [cycles_text(g) for g in spec.top_generators],
        "states": states,
        "generators": [word_text(e.word) for e in spec.generators],
    }
    cons: dict = {"kind": spec.construction.kind}
    if spec.construction.h_generators:
        cons["h"] = [cycles_text(g) for g in spec.construction.h_generators]
    if spec.construction.inner is not None:
        inner = spec_to_obj(spec.construction.inner)
        del inner["schema_version"]
        cons["inner"] = inner
    obj["construction"] = cons
    return obj


def emit_spec(spec: GroupSpec) -> str:
    return render_json(spec_to_obj(spec)) + "\n"


def _need(obj: dict, field: str, kind, where: str):
    if field not in obj:
        raise ParseError(f"{where}: missing field {field!r}")
    val = obj[field]
    if not isinstance(val, kind):
        raise ParseError(
            f"{where}: field {field!r} must be {kind.__name__}, "
            f"got {type(val).__name__}")
    return val


def _spec_from_obj(obj: dict, where: str) -> GroupSpec:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: spec must be a JSON object")
    name = _need(obj, "name", str, where)
    m = _need(obj, "m", int, where)
    if m < 2:
        raise ValidationError(f"{where}: m must be at least 2, got {m}")
    tops = [parse_cycles(t, m)
            for t in _need(obj, "top", list, where)]
    states_obj = _need(obj, "states", dict, where)
    states: dict[str, State] = {}
    for sname, sobj in states_obj.items():
        here = f"{where}: states.{sname}"
        if not isinstance(sobj, dict):
            raise ParseError(f"{here}: must be an object")
        root = parse_cycles(_need(sobj, "root", str, here), m)
        sections = _need(sobj, "sections", list, here)
        if not all(isinstance(s, str) for s in sections):
            raise ParseError(f"{here}: sections must be state names")
        states[sname] = State(root, tuple(sections))
    machine = Machine(m, tops, states) if states else None
    words = [parse_word(w) for w in _need(obj, "generators", list, where)]
    if words and machine is None:
        raise ValidationError(
            f"{where}: generators given but no states declared")
    if machine is not None:
        known = set(machine.states) | {IDENTITY_STATE}
        for w, text in zip(words, obj["generators"]):
            for lname, _ in w:
                if lname not in known:
                    raise ValidationError(
                        f"{where}: generator {text!r} uses unknown state {lname!r}")
    gens = tuple(Element(machine, w) for w in words) if machine else ()

    cobj = _need(obj, "construction", dict, where)
    kind = _need(cobj, "kind", str, f"{where}: construction")
    if kind not in CONSTRUCTION_KINDS:
        raise ValidationError(
            f"{where}: unknown construction kind {kind!r}; expected one of "
            f"{CONSTRUCTION_KINDS}")
    h: tuple[Permutation, ...] = ()
    if kind in ("rooted", "GK", "wreath_full"):
        h = tuple(parse_cycles(t, m)
                  for t in _need(cobj, "h", list, f"{where}: construction"))
    inner = None
    if kind in ("diagonal", "GK"):
        inner = _spec_from_obj(
            _need(cobj, "inner", dict, f"{where}: construction"),
            f"{where}: construction.inner")
        if inner.m != m:
            raise ValidationError(
                f"{where}: construction.inner has m = {inner.m}, expected {m}")
    if kind == "GK":
        if len(orbits(m, list(h))) != 1:
            raise ValidationError(
                f"{where}: H not transitive on {m} points for GK")
    try:
        cons = Construction(kind, h_generators=h, inner=inner)
        return GroupSpec(name, m, tuple(tops), machine, gens, cons)
    except NotTransitive as e:
        raise ValidationError(f"{where}: {e}") from e


def parse_spec(path: str | Path) -> GroupSpec:
    """Load and validate a group spec file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read spec {p}: {e}") from e
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{p}:{e.lineno}:{e.colno}: {e.msg}") from e
    return _spec_from_obj(obj, str(p))


def load_spec(value: str) -> GroupSpec:
    """Resolve --spec values: a fixture name, else a spec file path."""
    cat = fixtures()
    if value in cat:
        return cat[value]
    if Path(value).exists():
        return parse_spec(value)
    raise ParseError(
        f"unknown spec {value!r}: not a fixture "
        f"({', '.join(sorted(cat))}) and not a file")


# -- deterministic rendering ------------------------------------------------


def big_str(x: int) -> str:
    """Decimal string of a possibly huge integer, raising the int-to-str
    conversion guard as needed."""
    try:
        return str(x)
    except ValueError:
        sys.set_int_max_str_digits(max(40000, x.bit_length() // 3 + 16))
        return str(x)

def fmt_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError(f"non-finite value {x!r} in report")
    return format(float(x), ".12g")


def fmt_exact(fr: Fraction | None, fallback: float) -> str:
    """Exact "p/q" when available, else the 12-digit float."""
    if fr is None:
        return fmt_float(fallback)
    if fr.denominator == 1:
        return str(fr.numerator)
    return f"{fr.numerator}/{fr.denominator}"


def render_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = ",\n".join(
            f"{pad}  {json.dumps(str(k))}: {render_json(v, indent + 1)}"
            for k, v in obj.items())
        return "{\n" + inner + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        inner = ",\n".join(
            f"{pad}  {render_json(v, indent + 1)}" for v in obj)
        return "[\n" + inner + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot render {type(obj).__name__} in a report")


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _kv_lines(pairs: list[tuple[str, object]]) -> str:
    width = max(len(k) for k, _ in pairs)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in pairs)


def _text_table(header: list[str], rows: list[list]) -> str:
    cells = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
             for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_out(text: str, out: str | None) -> None:
    """Print to stdout, or write the file atomically."""
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    path = Path(out)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text(text if text.endswith("\n") else text + "\n",
                   encoding="utf-8")
    os.replace(tmp, path)


# -- configuration ----------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    specs: tuple[str, ...]
    levels: int
    window: int
    cap_points: int
    tolerance: float
    cache_dir: str | None
    fmt: str
    out: str | None

    def validate_cap(self, m: int) -> None:
        if m ** self.levels > self.cap_points:
            top = 0
            while m ** (top + 1) <= self.cap_points:
                top += 1
            raise ValidationError(
                f"levels {self.levels} exceeds the point cap: {m}^{self.levels} "
                f"= {m ** self.levels} > {self.cap_points}; the largest level "
                f"under this cap is {top}")


def _env(name: str, default):
    raw = os.environ.get(_ENV_PREFIX + name)
    if raw is None:
        return default
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treedim",
        description="Exact finite-level reports for groups acting on "
                    "regular rooted trees.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--levels", type=int,
                        default=_env("LEVELS", 6),
                        help="maximum tree level N (default 6)")
    common.add_argument("--window", type=int,
                        default=_env("WINDOW", DEFAULT_WINDOW),
                        help="trailing window / ancestor gap k (default "
                             f"{DEFAULT_WINDOW})")
    common.add_argument("--cap-points", type=int, dest="cap_points",
                        default=_env("CAP_POINTS", MAX_CHAIN_POINTS),
                        help="largest permitted m^N "
                             f"(default {MAX_CHAIN_POINTS})")
    common.add_argument("--tol", type=float,
                        default=_env("TOL", DEFAULT_TOLERANCE),
                        help="oscillation tolerance for the convergence "
                             f"diagnostic (default {DEFAULT_TOLERANCE})")
    common.add_argument("--cache-dir", dest="cache_dir",
                        default=_env("CACHE_DIR", None),
                        help="directory for the on-disk quotient cache")
    common.add_argument("--format", dest="fmt",
                        choices=("json", "csv", "text"),
                        default=_env("FORMAT", "text"),
                        help="output format (default text)")
    common.add_argument("--out", default=_env("OUT", None),
                        help="write the report to this file atomically "
                             "(default stdout)")

    withspec = argparse.ArgumentParser(add_help=False, parents=[common])
    withspec.add_argument("--spec", required=_env("SPEC", None) is None,
                          default=_env("SPEC", None),
                          help="fixture name or spec file path")

    sub.add_parser("dim", parents=[withspec],
                   help="orders and density ratios against the wreath tower")
    sub.add_parser("abel", parents=[withspec],
                   help="abelianization indices and the bounded scan")
    sub.add_parser("orbits", parents=[withspec],
                   help="orbit classification relative to an ancestor level")
    rist = sub.add_parser("rist", parents=[withspec],
                          help="rigid stabilizers at a vertex or a level")
    rist.add_argument("--vertex", default=_env("VERTEX", None),
                      help="tree vertex like '12' (default: whole level "
                           "--window)")
    vgk = sub.add_parser("verify-gk", parents=[common],
                         help="verify the rooted-times-diagonal construction")
    vgk.add_argument("--H", action="append", dest="h_gens",
                     default=None, metavar="CYCLES",
                     help="top-group generator in cycle notation; repeatable")
    vgk.add_argument("--K", required=_env("K", None) is None,
                     default=_env("K", None),
                     help="inner group: fixture name or spec file path")
    sub.add_parser("quotient", parents=[withspec],
                   help="quotient orders only")
    sub.add_parser("check", parents=[common],
                   help="run the invariant suite over the fixture catalog")
    return parser


# -- subcommands ------------------------------------------------------------

def _store(cfg: RunConfig) -> QuotientStore | None:
    return QuotientStore(cfg.cache_dir) if cfg.cache_dir else None


def _dim_rows(seq) -> list[dict]:
    rows = []
    for lv in seq.levels:
        if lv.logm_index_exact is not None:
            num = lv.logm_index_exact.numerator
            den_note: object = lv.logm_index_exact.denominator
        else:
            num = fmt_float(lv.logm_index)
            den_note = "approx"
        rows.append({
            "level": lv.level,
            "order": big_str(lv.order),
            "envelope_order": big_str(lv.envelope),
            "logm_index_num": num,
            "logm_index_den_note": den_note,
            "logm_wreath": fmt_exact(lv.logm_wreath_exact, lv.logm_wreath),
            "ratio": lv.ratio,
            "ratio_exact": (fmt_exact(lv.ratio_exact, lv.ratio)
                            if lv.ratio_exact is not None else None),
        })
    return rows


def _cmd_dim(spec: GroupSpec, cfg: RunConfig) -> tuple[dict, int]:
    store = _store(cfg)
    window = max(2, min(cfg.window, cfg.levels)) if cfg.levels >= 2 else 2
    seq = None
    err: ResourceLimit | None = None
    for n in range(cfg.levels, 0, -1):
        try:
            seq = dimension_sequence(spec, n, window=window,
                                     tolerance=cfg.tolerance, store=store)
            break
        except ResourceLimit as e:
            err = err or e
    payload: dict = {
        "schema_version": SCHEMA_VERSION,
        "command": "dim",
        "group": spec.name,
        "m": spec.m,
        "levels": cfg.levels,
        "window": window,
        "tolerance": cfg.tolerance,
        "rows": _dim_rows(seq) if seq else [],
        "max_oscillation": seq.max_oscillation if seq else None,
        "strong_looking": seq.strong_looking if seq else None,
    }
    if err is not None:
        payload["truncated"] = True
        payload["error"] = str(err)
        return payload, 2
    return payload, 0


def _dim_csv(payload: dict) -> str:
    rows = [[r["level"], r["logm_index_num"], r["logm_index_den_note"],
             r["logm_wreath"], fmt_float(r["ratio"])]
            for r in payload["rows"]]
    return _csv_text(
        ["level", "logm_index_num", "logm_index_den_note", "logm_wreath",
         "ratio"], rows)


def _dim_text(payload: dict) -> str:
    head = _kv_lines([
        ("group", payload["group"]),
        ("m", payload["m"]),
        ("max oscillation", "-" if payload["max_oscillation"] is None
         else fmt_float(payload["max_oscillation"])),
        ("strong looking", payload["strong_looking"]),
    ])
    rows = [[r["level"], r["order"] if len(r["order"]) <= 24
             else f'{r["order"][0]}.{r["order"][1:4]}e{len(r["order"]) - 1}',
             f'{r["logm_index_num"]}/{r["logm_index_den_note"]}',
             r["logm_wreath"], fmt_float(r["ratio"])]
            for r in payload["rows"]]
    return head + "\n\n" + _text_table(
        ["level", "order", "logm_index", "logm_wreath", "ratio"], rows)


def _cmd_abel(spec: GroupSpec, cfg: RunConfig) -> tuple[dict, int]:
    store = _store(cfg)
    rows = []
    err: ResourceLimit | None = None
    for n in range(1, cfg.levels + 1):
        try:
            row = abelianization_index(spec, n, store=store)
        except ResourceLimit as e:
            err = e
            break
        rows.append({
            "level": row.level,
            "index": big_str(row.index),
            "logm_index": fmt_exact(row.logm_index_exact, row.logm_index),
            "log2_slack": fmt_float(row.log2_slack),
            "easy_bound_ok": row.easy_bound_ok,
        })
    scan_obj = None
    k = max(1, min(cfg.window, cfg.levels))
    if err is None:
        try:
            scan = perfectness_scan(spec, cfg.levels, k, store=store)
            scan_obj = {
                "k": scan.k,
                "rows": [{
                    "level": r.level,
                    "index": big_str(r.index),
                    "value": r.value,
                    "value_exact": fmt_exact(r.value_exact, r.value),
                    "bound": r.bound,
                    "bound_exact": fmt_exact(r.bound_exact, r.bound),
                    "bound_ok": r.bound_ok,
                    "b_count": r.b_count,
                } for r in scan.rows],
                "all_bounded": scan.all_bounded,
                "decreasing_from": scan.decreasing_from,
            }
        except ResourceLimit as e:
            err = e
    payload: dict = {
        "schema_version": SCHEMA_VERSION,
        "command": "abel",
        "group": spec.name,
        "m": spec.m,
        "levels": cfg.levels,
        "rows": rows,
        "scan": scan_obj,
    }
    if err is not None:
        payload["truncated"] = True
        payload["error"] = str(err)
        return payload, 2
    ok = (all(r["easy_bound_ok"] for r in rows)
          and (scan_obj is None or scan_obj["all_bounded"]))
    return payload, 0 if ok else 1


def _cmd_orbits(spec: GroupSpec, cfg: RunConfig) -> tuple[dict, int]:
    store = _store(cfg)
    k = max(1, min(cfg.window, cfg.levels))
    rows = []
    err: ResourceLimit | None = None
    for n in range(k, cfg.levels + 1):
        try:
            st = orbit_stats(spec, n, k, store=store)
        except ResourceLimit as e:
            err = e
            break
        rows.append({
            "level": st.level,
            "k": st.k,
            "orbit_count": st.orbit_count,
            "density": st.orbit_count / spec.m ** st.level,
            "a_count": st.a_count,
            "b_count": st.b_count,
            "predecessor_count": st.predecessor_count,
            "value": st.value,
            "value_exact": fmt_exact(st.value_exact, st.value),
            "bound": st.bound,
            "bound_exact": fmt_exact(st.bound_exact, st.bound),
            "bound_ok": st.bound_ok,
            "counting_ok": st.counting_ok,
            "gaps": [list(g) for g in st.gaps],
        })
    payload: dict = {
        "schema_version": SCHEMA_VERSION,
        "command": "orbits",
        "group": spec.name,
        "m": spec.m,
        "levels": cfg.levels,
        "k": k,
        "rows": rows,
    }
    if err is not None:
        payload["truncated"] = True
        payload["error"] = str(err)
        return payload, 2
    ok = all(r["bound_ok"] and r["counting_ok"] for r in rows)
    return payload, 0 if ok else 1


def _cmd_rist(spec: GroupSpec, cfg: RunConfig, vertex: str | None
              ) -> tuple[dict, int]:
    store = _store(cfg)
    try:
        if vertex is not None:
            rep = local_rigid(spec, vertex, cfg.levels, store=store)
        else:
            k = max(0, min(cfg.window, cfg.levels))
            rep = rigid_level(spec, k, cfg.levels, store=store)
    except ResourceLimit as e:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "command": "rist",
            "group": spec.name,
            "m": spec.m,
            "levels": cfg.levels,
            "truncated": True,
            "error": str(e),
        }
        return payload, 2
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "rist",
        "group": spec.name,
        "m": spec.m,
        "levels": cfg.levels,
        "vertex": rep.vertex,
        "inner_level": rep.inner_level,
        "order": big_str(rep.order),
        "rows": [{"vertex": v, "order": big_str(o)}
                 for v, o in rep.vertex_orders],
        "product_ok": rep.product_ok,
        "ratio": rep.ratio,
        "ratio_exact": (fmt_exact(rep.ratio_exact, rep.ratio)
                        if rep.ratio is not None else None),
    }
    return payload, 0 if rep.product_ok else 1


def _cmd_verify_gk(h_texts: list[str] | None, k_value: str,
                   cfg: RunConfig) -> tuple[dict, int]:
    k_spec = load_spec(k_value)
    cfg.validate_cap(k_spec.m)
    if not h_texts:
        env = os.environ.get(_ENV_PREFIX + "H")
        if env is None:
            raise ValidationError("verify-gk needs at least one --H generator")
        h_texts = [env]
    h_gens = [parse_cycles(t, k_spec.m) for t in h_texts]
    store = _store(cfg)
    try:
        rep = verify_GK(h_gens, k_spec, cfg.levels, store=store)
    except ResourceLimit as e:
        return {
            "schema_version": SCHEMA_VERSION,
            "command": "verify-gk",
            "group": f"gk-{k_spec.name}",
            "m": k_spec.m,
            "levels": cfg.levels,
            "truncated": True,
            "error": str(e),
        }, 2
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "verify-gk",
        "group": rep.name,
        "m": rep.m,
        "levels": rep.max_level,
        "checks": [{
            "level": c.level,
            "name": c.name,
            "ok": c.ok,
            "witness": c.witness,
        } for c in rep.checks],
        "passed": rep.passed,
    }
    return payload, 0 if rep.passed else 1


def _cmd_quotient(spec: GroupSpec, cfg: RunConfig) -> tuple[dict, int]:
    store = _store(cfg)
    rows = []
    err: ResourceLimit | None = None
    for n in range(1, cfg.levels + 1):
        try:
            order = quotient(spec, n, store=store).order
        except ResourceLimit as e:
            err = e
            break
        rows.append({
            "level": n,
            "order": big_str(order),
            "envelope_order": big_str(envelope_order(spec, n)),
        })
    payload: dict = {
        "schema_version": SCHEMA_VERSION,
        "command": "quotient",
        "group": spec.name,
        "m": spec.m,
        "levels": cfg.levels,
        "rows": rows,
    }
    if err is not None:
        payload["truncated"] = True
        payload["error"] = str(err)
        return payload, 2
    return payload, 0


# -- the bundled invariant suite ---------------------------------------------

def _suite_checks(cfg: RunConfig) -> list[tuple[str, bool, str]]:
    cat = fixtures()
    store = _store(cfg)
    N = max(2, min(cfg.levels, 5))
    results: list[tuple[str, bool, str]] = []

    def add(name: str, fn) -> None:
        try:
            fn()
            results.append((name, True, ""))
        except AssertionError as e:
            results.append((name, False, str(e)))
        except TreedimError as e:
            results.append((name, False, f"{type(e).__name__}: {e}"))

    def chain_levels(spec):
        top = N
        while spec.m ** top > cfg.cap_points:
            top -= 1
        return range(1, top + 1)

    def check_wreath(name):
        spec = cat[name]
        h = build_chain(spec.m, list(spec.construction.h_generators)).order
        for n in chain_levels(spec):
            want = h ** ((spec.m ** n - 1) // (spec.m - 1))
            got = quotient(spec, n, store=store).order
            assert got == want, f"{name} level {n}: order {got} != {want}"

    for name in ("w2", "w3c", "w3s"):
        add(f"wreath_order:{name}", lambda name=name: check_wreath(name))

    def check_gk_law(name):
        spec = cat[name]
        inner = spec.construction.inner
        h = build_chain(spec.m, list(spec.construction.h_generators)).order
        for n in chain_levels(spec):
            got = quotient(spec, n, store=store).order
            want = h * quotient(inner, n - 1, store=store).order
            assert got == want, f"{name} level {n}: order {got} != {want}"

    for name in sorted(cat):
        if cat[name].construction.kind == "GK":
            add(f"gk_order_law:{name}", lambda name=name: check_gk_law(name))

    def check_index_consistency(name):
        spec = cat[name]
        top = max(chain_levels(spec))
        if top < 2:
            return
        whole, part, stab = stabilizer_index(spec, top // 2, top, store=store)
        assert whole == part * stab, \
            f"{name}: {whole} != {part} * {stab}"

    def check_easy_bound(name):
        spec = cat[name]
        for n in chain_levels(spec):
            row = abelianization_index(spec, n, store=store)
            assert row.easy_bound_ok, f"{name} level {n}"

    def check_orbits(name):
        # a counting failure is legitimate only when the engine recorded the
        # ancestor orbits whose branching landed in the classification gap
        spec = cat[name]
        prev = Fraction(1)
        for n in chain_levels(spec):
            st = orbit_stats(spec, n, 1, store=store)
            dens = Fraction(st.orbit_count, spec.m ** n)
            assert dens <= prev, f"{name} level {n}: density rose"
            prev = dens
            assert st.counting_ok or st.gaps, \
                f"{name} level {n}: counting inequality with no gap witness"
            assert st.bound_ok, f"{name} level {n}: bound"

    def check_rist(name):
        spec = cat[name]
        top = max(chain_levels(spec))
        rep = rigid_level(spec, min(1, top), top, store=store)
        assert rep.product_ok, f"{name}: rigid product mismatch"

    def check_roundtrip(name):
        spec = cat[name]
        tmp = Path(os.environ.get("TMPDIR", "/tmp")) / f"treedim-rt-{os.getpid()}.json"
        tmp.write_text(emit_spec(spec), encoding="utf-8")
        try:
            back = parse_spec(tmp)
        finally:
            tmp.unlink(missing_ok=True)
        assert back.name == spec.name and \
            back.content_key() == spec.content_key(), f"{name}: round trip drifted"

    for name in sorted(cat):
        add(f"index_consistency:{name}",
            lambda name=name: check_index_consistency(name))
        add(f"easy_bound:{name}", lambda name=name: check_easy_bound(name))
        add(f"orbit_bookkeeping:{name}", lambda name=name: check_orbits(name))
        add(f"rigid_product:{name}", lambda name=name: check_rist(name))
        add(f"spec_roundtrip:{name}", lambda name=name: check_roundtrip(name))

    def check_homomorphism(name):
        spec = cat[name]
        gens = spec.generators
        if len(gens) < 2:
            gens = gens + gens
        e, f = gens[0], gens[1]
        n = min(5, max(chain_levels(spec)))
        lhs = evaluate(multiply(e, f), n)
        rhs = compose(evaluate(e, n), evaluate(f, n))
        assert lhs == rhs, f"{name}: product evaluation mismatch at level {n}"

    for name in ("odometer", "odometer3", "grigorchuk"):
        add(f"evaluation_homomorphism:{name}",
            lambda name=name: check_homomorphism(name))

    def check_gk_verify():
        rep = verify_GK([Permutation([1, 0])], cat["w2"], min(N, 4),
                        store=store)
        assert rep.passed, "; ".join(
            f"{c.level}:{c.name}" for c in rep.failures())

    add("verify_gk:gk-w2", check_gk_verify)

    def check_transitive():
        flags = level_transitivity(cat["odometer"], N)
        assert all(flags), "odometer should be transitive on every level"
        flags = level_transitivity(cat["intransitive"], N)
        assert not all(flags), "intransitive fixture looks transitive"

    add("level_transitivity", check_transitive)
    return results


def _cmd_check(cfg: RunConfig) -> tuple[dict, int]:
    results = _suite_checks(cfg)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "check",
        "levels": max(2, min(cfg.levels, 5)),
        "checks": [{"name": n, "ok": ok, "detail": detail}
                   for n, ok, detail in results],
        "passed": all(ok for _, ok, _ in results),
    }
    return payload, 0 if payload["passed"] else 1


# -- generic rendering of payloads -------------------------------------------

def _generic_csv(payload: dict) -> str:
    rows = payload.get("rows") or payload.get("checks") or []
    if not rows:
        return _csv_text(["field", "value"],
                         [[k, v] for k, v in payload.items()
                          if not isinstance(v, (dict, list))])
    header = list(rows[0].keys())
    out = []
    for r in rows:
        cells = []
        for k in header:
            v = r.get(k)
            if isinstance(v, float):
                cells.append(fmt_float(v))
            elif isinstance(v, list):
                cells.append(json.dumps(v))
            elif v is None:
                cells.append("")
            else:
                cells.append(v)
        out.append(cells)
    return _csv_text(header, out)


def _generic_text(payload: dict) -> str:
    pairs = [(k, v) for k, v in payload.items()
             if not isinstance(v, (dict, list))]
    blocks = [_kv_lines([
        (k, "-" if v is None else fmt_float(v) if isinstance(v, float) else v)
        for k, v in pairs])]
    rows = payload.get("rows")
    if rows:
        header = list(rows[0].keys())
        drop = {"order", "envelope_order"} if len(header) > 6 else set()
        header = [h for h in header if h not in drop]
        body = []
        for r in rows:
            cells = []
            for k in header:
                v = r.get(k)
                if isinstance(v, float):
                    cells.append(fmt_float(v))
                elif isinstance(v, list):
                    cells.append(json.dumps(v))
                else:
                    cells.append("-" if v is None else v)
            body.append(cells)
        blocks.append(_text_table(header, body))
    checks = payload.get("checks")
    if checks:
        lines = []
        for c in checks:
            mark = "ok  " if c["ok"] else "FAIL"
            tail = ""
            if not c["ok"]:
                tail = ": " + (c.get("witness") or c.get("detail") or "")
            where = f"level {c['level']} " if "level" in c else ""
            lines.append(f"{mark} {where}{c['name']}{tail}")
        blocks.append("\n".join(lines))
    scan = payload.get("scan")
    if scan:
        body = [[r["level"], r["index"] if len(r["index"]) <= 20 else "...",
                 fmt_float(r["value"]), r["value_exact"],
                 fmt_float(r["bound"]), r["bound_ok"]]
                for r in scan["rows"]]
        blocks.append(
            f"bounded-abelianization scan, k = {scan['k']} "
            f"(all bounded: {scan['all_bounded']}, "
            f"decreasing from level {scan['decreasing_from']})\n"
            + _text_table(
                ["level", "index", "value", "exact", "bound", "ok"], body))
    return "\n\n".join(blocks)


def _render(payload: dict, command: str, fmt: str) -> str:
    if fmt == "json":
        return render_json(payload) + "\n"
    if fmt == "csv":
        if command == "dim":
            return _dim_csv(payload)
        return _generic_csv(payload)
    if command == "dim":
        return _dim_text(payload)
    return _generic_text(payload)


# -- entry point -------------------------------------------------------------

def _run(args: argparse.Namespace) -> int:
    cfg = RunConfig(
        command=args.command,
        specs=tuple(s for s in (getattr(args, "spec", None),
                                getattr(args, "K", None)) if s),
        levels=args.levels,
        window=args.window,
        cap_points=args.cap_points,
        tolerance=args.tol,
        cache_dir=args.cache_dir,
        fmt=args.fmt,
        out=args.out,
    )
    if cfg.levels < 1:
        raise ValidationError(f"levels must be at least 1, got {cfg.levels}")
    if cfg.cap_points < 2:
        raise ValidationError(
            f"cap-points must be at least 2, got {cfg.cap_points}")

    lock = None
    if cfg.cache_dir:
        from filelock import FileLock
        Path(cfg.cache_dir).mkdir(parents=True, exist_ok=True)
        lock = FileLock(str(Path(cfg.cache_dir) / "run.lock"))
        lock.acquire(timeout=30)
    try:
        if args.command == "check":
            payload, code = _cmd_check(cfg)
        elif args.command == "verify-gk":
            payload, code = _cmd_verify_gk(args.h_gens, args.K, cfg)
        else:
            spec = load_spec(args.spec)
            cfg.validate_cap(spec.m)
            if args.command == "dim":
                payload, code = _cmd_dim(spec, cfg)
            elif args.command == "abel":
                payload, code = _cmd_abel(spec, cfg)
            elif args.command == "orbits":
                payload, code = _cmd_orbits(spec, cfg)
            elif args.command == "rist":
                payload, code = _cmd_rist(spec, cfg, args.vertex)
            elif args.command == "quotient":
                payload, code = _cmd_quotient(spec, cfg)
            else:
                raise ValidationError(f"unknown command {args.command!r}")
    finally:
        if lock is not None:
            lock.release()
    write_out(_render(payload, args.command, cfg.fmt), cfg.out)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "vertex", None) is None and hasattr(args, "vertex"):
        args.vertex = _env("VERTEX", None)
    try:
        return _run(args)
    except ResourceLimit as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except TreedimError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
