"""Command-line harness: PET traces, norm evaluation and experiment scenarios.

Every scenario reads a JSON config (see README), echoes its full parameter
set in each CSV row, and is deterministic given (config, seed).

Exit codes: 0 success, 1 assertion failure, 2 config error, 3 cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import re
import sys
from fractions import Fraction
from importlib import resources
from typing import Any, Mapping, Sequence

import numpy as np

from . import equidist, lattice, norms, pet, polyalg
from .lattice import CapExceeded, GenArithProgression, IntMultiset, gap_expand
from .norms import LatticeFunction
from .polyalg import VectorPolynomial, evaluate, parse_family, parse_polynomial, render

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_CAP = 0, 1, 2, 3
DELTA_SLACK = 1e-9


class ConfigError(ValueError):
    pass


class CheckFailed(AssertionError):
    pass


def load_fixtures() -> dict:
    text = resources.files("petbox").joinpath("data/fixtures.json").read_text(encoding="utf-8")
    return json.loads(text)


# ---------------------------------------------------------------------------
# config helpers


def _require(cfg: Mapping, key: str, kind=int, positive: bool = True):
    if key not in cfg:
        raise ConfigError(f"missing config key {key!r}")
    val = cfg[key]
    try:
        val = kind(val)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from None
    if positive and isinstance(val, (int, Fraction)) and val <= 0:
        raise ConfigError(f"config key {key!r} must be positive")
    return val


def _family(cfg: Mapping, dim: int) -> list[VectorPolynomial]:
    fam = cfg.get("family")
    if fam is None:
        raise ConfigError("missing config key 'family'")
    return parse_family(fam, dim)


_SPEC_RE = re.compile(r"^\s*([a-z_0-9]+)\s*(?:\(\s*(-?\d+)\s*\))?\s*$")


def _function_spec(spec: Any) -> dict:
    if isinstance(spec, str):
        m = _SPEC_RE.match(spec)
        if not m:
            raise ConfigError(f"bad function constructor {spec!r}")
        out = {"kind": m.group(1)}
        if m.group(2) is not None:
            out["seed"] = int(m.group(2))
        return out
    if isinstance(spec, Mapping) and "kind" in spec:
        return dict(spec)
    raise ConfigError(f"bad function constructor {spec!r}")


def build_function(spec: Any, N: int, dim: int, seed: int, stream: int, P: VectorPolynomial | None = None, K: int = 1) -> LatticeFunction:
    """Construct a function on Z^dim from a named constructor.

    Stochastic constructors draw from the stream (seed, stream) unless the
    spec pins its own seed.
    """
    spec = _function_spec(spec)
    kind = spec["kind"]
    rng = np.random.default_rng([int(spec.get("seed", seed)) & (2**64 - 1), stream])
    size = int(spec.get("N", N))
    if kind == "indicator_box":
        return LatticeFunction.indicator_box(size, dim, spec.get("lo"))
    if kind == "progression_hull":
        pts = set()
        shifts = {tuple([0] * dim)} if P is None else {evaluate(P, z) for z in range(1, K + 1)}
        box = LatticeFunction.indicator_box(size, dim).support()
        for v in shifts:
            pts.update(tuple(a + b for a, b in zip(x, v)) for x in box)
        return LatticeFunction.indicator_of(sorted(pts), dim)
    if kind == "random_pm1":
        return LatticeFunction.random_pm1(rng, size, dim)
    if kind == "random_unimodular":
        return LatticeFunction.random_unimodular(rng, size, dim)
    if kind == "random_bounded":
        return LatticeFunction.random_bounded(rng, size, dim)
    if kind == "zero":
        return LatticeFunction.zero(dim)
    if kind == "points":
        return LatticeFunction.from_json(spec)
    raise ConfigError(f"unknown function constructor {kind!r}")


def _functions(cfg: Mapping, count: int, N: int, dim: int, seed: int, Ps: Sequence[VectorPolynomial], K: int) -> list[LatticeFunction]:
    spec = cfg.get("functions", "indicator_box")
    specs = spec if isinstance(spec, list) else [spec] * count
    if len(specs) != count:
        raise ConfigError(f"need {count} function constructors, got {len(specs)}")
    polys: list[VectorPolynomial | None] = [None] + list(Ps)
    return [build_function(s, N, dim, seed, j, polys[j] if j < len(polys) else None, K) for j, s in enumerate(specs)]


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, sort_keys=True, separators=(",", ":"))
    return str(v)


def write_csv(rows: list[dict], columns: list[str], out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c, "")) for c in columns])


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    write_csv(rows, columns, buf)
    return buf.getvalue()


def _params_echo(cfg: Mapping, seed: int) -> str:
    echo = {k: v for k, v in cfg.items() if k not in ("out",)}
    echo["seed"] = seed
    return json.dumps(echo, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# scenarios


def run_pet(
    family: Sequence[str] | str, dim: int, target: int = 1, member_cap: int = pet.DEFAULT_MEMBER_CAP
) -> tuple[pet.PetTrace, pet.DescendenceReport, list[VectorPolynomial]]:
    P = parse_family(family, dim)
    trace = pet.pet_run(P, target=target, member_cap=member_cap)
    return trace, pet.verify_descendence(trace, P), P


def cmd_pet(args, cfg: Mapping) -> int:
    family = args.family if args.family is not None else cfg.get("family")
    if family is None:
        raise ConfigError("give --family or a config with 'family'")
    dim = args.dim if args.dim is not None else int(cfg.get("dim", 1))
    target = args.target if args.target is not None else int(cfg.get("target", 1))
    trace, report, _ = run_pet(family, dim, target, args.max_states or pet.DEFAULT_MEMBER_CAP)
    lines = [f"normalized family: {trace.initial.render()}"]
    lines.append(f"function order: {list(trace.normalization.labels)} (base {trace.normalization.base})")
    lines += trace.log()
    lines.append(f"shift variables: {trace.num_h_final}")
    for j, c in enumerate(trace.directions, start=1):
        lines.append(f"C_{j} = {render(c)}")
    lines.append(f"descendence: {'ok' if report.ok else 'FAILED'} ({report.families_checked} families, {report.directions_checked} directions)")
    lines += [f"  violation: {v}" for v in report.violations]
    print("\n".join(lines))
    if args.out:
        data = trace.to_json()
        data["descendence_violations"] = report.violations
        _emit(json.dumps(data, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK if report.ok else EXIT_ASSERT


def _boxes(cfg: Mapping, dim: int, N: int, cap: int) -> list[IntMultiset]:
    if "boxes" in cfg:
        return [gap_expand(GenArithProgression.from_json(b), cap) for b in cfg["boxes"]]
    s = int(cfg.get("s", 2))
    H = int(cfg.get("H", N))
    return [gap_expand(lattice.cube(dim, H), cap)] * s


def norm_rows(cfg: Mapping, seed: int, cap: int) -> list[dict]:
    dim = _require(cfg, "dim")
    N = _require(cfg, "N")
    f = build_function(cfg.get("function", "indicator_box"), N, dim, seed, 0)
    E = _boxes(cfg, dim, N, cap)
    rep = norms.box_norm_power(f, E)
    row = {"params": _params_echo(cfg, seed), "s": rep.s, "power": rep.power, "normalized": rep.power / N**dim}
    if cfg.get("check_direct", False):
        direct = norms.box_norm_power_direct(f, E)
        scale = max(1.0, abs(direct.power))
        row["direct"] = direct.power
        row["agree"] = abs(rep.power - direct.power) <= 1e-9 * scale
    return [row]


def cmd_norm(args, cfg: Mapping, seed: int) -> int:
    rows = norm_rows(cfg, seed, args.max_states)
    cols = ["params", "s", "power", "normalized"]
    if cfg.get("check_direct", False):
        cols += ["direct", "agree"]
    _emit(_csv_text(rows, cols), args.out)
    return EXIT_OK if all(r.get("agree", True) for r in rows) else EXIT_ASSERT


def count_op_rows(cfg: Mapping, seed: int) -> list[dict]:
    dim = _require(cfg, "dim")
    N = _require(cfg, "N")
    K = _require(cfg, "K")
    Ps = _family(cfg, dim)
    fs = _functions(cfg, len(Ps) + 1, N, dim, seed, Ps, K)
    val = norms.counting_operator(fs, Ps, K)
    return [{"params": _params_echo(cfg, seed), "value_re": val.real, "value_im": val.imag, "delta": abs(val) / N**dim}]


def cmd_count_op(args, cfg: Mapping, seed: int) -> int:
    _emit(_csv_text(count_op_rows(cfg, seed), ["params", "value_re", "value_im", "delta"]), args.out)
    return EXIT_OK


def theorem15_rows(cfg: Mapping, seed: int, cap: int) -> tuple[list[dict], bool]:
    dim = _require(cfg, "dim")
    N = _require(cfg, "N")
    K = _require(cfg, "K")
    t = int(cfg.get("t", 1))
    if N > 64 or dim > 2:
        raise ConfigError("theorem check runs at N ≤ 64 and D ≤ 2")
    Ps = _family(cfg, dim)
    if len(Ps) > 2 or max(polyalg.deg_z(p) for p in Ps) > 2:
        raise ConfigError("theorem check runs at ℓ ≤ 2 and degree ≤ 2")
    threshold = float(cfg.get("threshold", load_fixtures()["theorem15"]["threshold"]))
    fs = _functions(cfg, len(Ps) + 1, N, dim, seed, Ps, K)
    for f in fs:
        if not f.is_one_bounded():
            raise ConfigError("functions must be 1-bounded")
    delta = abs(norms.counting_operator(fs, Ps, K)) / N**dim
    if not delta <= 1 + DELTA_SLACK:
        raise CheckFailed(f"δ = {delta} exceeds 1")
    rows, ok = [], True
    for j in range(len(Ps) + 1):
        boxes = pet.theorem_target_boxes(Ps, j, K)
        E = [gap_expand(b, cap) for b in boxes] * t
        power = norms.box_norm_power(fs[j], E).power
        normalized = power / N**dim
        if 0 < delta < 1 and normalized > 0:
            exponent = math.log(normalized) / math.log(delta)
        else:
            exponent = float("nan")
        passed = delta < 0.5 or normalized >= threshold
        ok &= passed
        rows.append(
            {
                "params": _params_echo(cfg, seed),
                "j": j,
                "boxes": "; ".join(b.describe() for b in boxes),
                "delta": delta,
                "norm_power": power,
                "normalized": normalized,
                "exponent": exponent,
                "threshold": threshold,
                "pass": passed,
            }
        )
    return rows, ok


THEOREM15_COLUMNS = ["params", "j", "boxes", "delta", "norm_power", "normalized", "exponent", "threshold", "pass"]


def cmd_theorem15(args, cfg: Mapping, seed: int) -> int:
    rows, ok = theorem15_rows(cfg, seed, args.max_states)
    _emit(_csv_text(rows, THEOREM15_COLUMNS), args.out)
    return EXIT_OK if ok else EXIT_ASSERT


def concat_rows(cfg: Mapping, seed: int, cap: int) -> list[dict]:
    dim = _require(cfg, "dim")
    N = _require(cfg, "N")
    H = _require(cfg, "H")
    M = int(cfg.get("M", H))
    if N > 64 or dim > 2:
        raise ConfigError("concatenation check runs at N ≤ 64 and D ≤ 2")
    if "C" not in cfg:
        raise ConfigError("missing config key 'C'")
    C = parse_polynomial(cfg["C"], dim)
    r = C.num_h
    f = build_function(cfg.get("function", "indicator_box"), N, dim, seed, 0)
    lhs = 0.0
    hs = list(itertools.product(range(-H, H + 1), repeat=r))
    for h in hs:
        d = evaluate(C, 0, h)
        lhs += norms.box_norm_power(f, [lattice.progression(d, M)]).power
    lhs /= len(hs)
    E = pet.concatenation_target_boxes(C, H, M)
    rhs = norms.box_norm_power(f, [gap_expand(lattice.cube(dim, N), cap), gap_expand(E, cap)]).power
    return [
        {
            "params": _params_echo(cfg, seed),
            "target_box": E.describe(),
            "lhs": lhs,
            "rhs": rhs,
            "lhs_normalized": lhs / N**dim,
            "rhs_normalized": rhs / N**dim,
        }
    ]


def cmd_concat(args, cfg: Mapping, seed: int) -> int:
    rows = concat_rows(cfg, seed, args.max_states)
    _emit(_csv_text(rows, ["params", "target_box", "lhs", "rhs", "lhs_normalized", "rhs_normalized"]), args.out)
    return EXIT_OK


def equidist_rows(cfg: Mapping, seed: int, mode: str, cap: int) -> tuple[list[str], list[dict], dict]:
    kind = cfg.get("kind", "linear")
    echo = _params_echo(cfg, seed)
    if kind == "linear":
        rows = equidist.linear_sweep(cfg.get("ells", []), int(cfg.get("hmax", 1)), cfg.get("Ms", []), bool(cfg.get("positive_only", False)))
        out = [{"params": echo, "ell": len(r.h), "h": list(r.h), "M": r.M, "count": r.count, "bound": r.bound, "ratio": r.ratio} for r in rows]
        consts: dict = {}
        for r in rows:
            key = str(len(r.h))
            consts[key] = max(consts.get(key, Fraction(0)), r.ratio)
        return ["params", "ell", "h", "M", "count", "bound", "ratio"], out, {"linear_C": {k: str(v) for k, v in sorted(consts.items())}}
    if kind == "density":
        out = []
        worst = Fraction(0)
        for eta in cfg.get("etas", []):
            est = equidist.calH_density(int(cfg["l"]), int(cfg["t"]), Fraction(str(eta)), int(cfg["H"]), mode=mode, seed=seed, n=int(cfg.get("samples", 100_000)), max_states=cap)
            val = est.exact if est.exact is not None else est.value
            ratio = Fraction(val) / Fraction(str(eta))
            worst = max(worst, ratio)
            out.append({"params": echo, "eta": str(eta), "fraction": val, "std_error": est.std_error, "ratio": ratio})
        return ["params", "eta", "fraction", "std_error", "ratio"], out, {"density_C": str(worst)}
    if kind == "multilinear":
        out = []
        E = int(cfg.get("E", 2))
        worst = Fraction(0)
        for pt in cfg.get("points", []):
            sys_ = equidist.MultilinearSystem(int(pt["t"]), int(pt["ell"]), int(pt.get("r", 1)), int(pt.get("s", 1)), int(pt["H"]), int(pt["M"]), Fraction(str(pt["eta"])))
            res = equidist.max_normalized_count(sys_, mode=mode, seed=seed, max_states=cap)
            bound = equidist.prop74_bound(sys_)
            ratio = Fraction(res.value) / bound * sys_.eta**E
            worst = max(worst, ratio)
            out.append({"params": echo, "system": sys_.to_json(), "count": res.value, "bound": bound, "ratio": ratio})
        return ["params", "system", "count", "bound", "ratio"], out, {"multilinear_C": str(worst), "E": E}
    raise ConfigError(f"unknown sweep kind {kind!r}")


def cmd_equidist(args, cfg: Mapping, seed: int, mode: str) -> int:
    cols, rows, consts = equidist_rows(cfg, seed, mode, args.max_states)
    _emit(_csv_text(rows, cols), args.out)
    if cfg.get("fixtures_out"):
        with open(cfg["fixtures_out"], "w", encoding="utf-8") as fh:
            json.dump(consts, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="64-bit seed (overrides the config)")
    common.add_argument("--out", help="output path (default: stdout)")
    grp = common.add_mutually_exclusive_group()
    grp.add_argument("--exact", dest="mode", action="store_const", const="exact")
    grp.add_argument("--sample", dest="mode", action="store_const", const="sample")
    common.add_argument("--max-states", type=int, help="state-space cap (PET: family size cap)")

    parser = argparse.ArgumentParser(prog="petbox", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("pet", parents=[common], help="run PET on a polynomial family")
    p.add_argument("--family", help="polynomials separated by ';'")
    p.add_argument("--dim", type=int)
    p.add_argument("--target", type=int, help="function index to control (0..ℓ)")
    for name, text in [
        ("norm", "evaluate box norms of a constructed function"),
        ("count-op", "evaluate a counting operator"),
        ("theorem15-check", "box-norm control of a progression count"),
        ("concat-check", "averaged degree-1 norms against the concatenated norm"),
        ("equidist-sweep", "solution-count sweeps"),
    ]:
        sub.add_parser(name, parents=[common], help=text)
    return parser


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        mode = args.mode or cfg.get("mode", "exact")
        if args.out is None and cfg.get("out"):
            args.out = cfg["out"]
        if args.command == "pet":
            return cmd_pet(args, cfg)
        if args.max_states is None:
            args.max_states = int(cfg.get("max_states", lattice.DEFAULT_EXPANSION_CAP))
        if args.command == "norm":
            return cmd_norm(args, cfg, seed)
        if args.command == "count-op":
            return cmd_count_op(args, cfg, seed)
        if args.command == "theorem15-check":
            return cmd_theorem15(args, cfg, seed)
        if args.command == "concat-check":
            return cmd_concat(args, cfg, seed)
        return cmd_equidist(args, cfg, seed, mode)
    except (CapExceeded, OverflowError) as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (CheckFailed, RuntimeError) as exc:
        # a bare RuntimeError is a broken internal assertion, e.g. a PET step that did not reduce the type
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except polyalg.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, ValueError, KeyError, IndexError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
