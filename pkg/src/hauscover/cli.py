"""Command-line front end.

Exit codes: 0 success, 1 a certificate failed, 2 configuration error,
3 resource cap reached.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
import zipfile
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import coarea, content, coverkit
from .cliques import FamilyBlowup
from .gauge import DomainError, Exponent
from .metricspace import (FiniteMetricSpace, LipschitzMapping, MetricAxiomError, PointSubset,
                          SizeLimit, parse_space_spec, projection, validate)
from .serialize import csv_text, dumps, frac_from_json

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_CAP = 0, 1, 2, 3
_ZIP_TIME = (1980, 1, 1, 0, 0, 0)


class ConfigError(ValueError):
    pass


class CertificateFailure(AssertionError):
    def __init__(self, message: str, payload=None):
        super().__init__(message)
        self.payload = payload


# ------------------------------------------------------------------ inputs

def _load_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc


def _space_from(obj) -> FiniteMetricSpace:
    if isinstance(obj, str):
        if obj.startswith("dyadic:"):
            parts = obj.split(":")
            return coarea.dyadic_grid(int(parts[1]), int(parts[2]) if len(parts) > 2 else 2)
        return parse_space_spec(obj)
    if isinstance(obj, dict):
        if "spec" in obj:
            return _space_from(obj["spec"])
        if "dist" not in obj or "points" not in obj:
            raise ConfigError("space JSON needs 'points' and 'dist'")
        data = dict(obj)
        data["dist"] = [[frac_from_json(v) for v in row] for row in obj["dist"]]
        data["eps"] = frac_from_json(obj.get("eps", 0))
        return FiniteMetricSpace.from_json(data)
    raise ConfigError("space must be a spec string or a JSON object")


def _space(args) -> FiniteMetricSpace:
    if args.space:
        sp = _space_from(args.space)
    elif args.input:
        data = _load_json(args.input)
        sp = _space_from(data.get("space", data) if isinstance(data, dict) else data)
    else:
        raise ConfigError("give --space SPEC or --input FILE")
    return _apply_mode(sp, args.mode)


def _apply_mode(sp: FiniteMetricSpace, mode: Optional[str]) -> FiniteMetricSpace:
    if mode == "point":
        return sp.with_resolution(0)
    if mode == "cell" and not sp.cell_mode:
        raise ConfigError("cell mode requested but the space has eps = 0 (set eps= in the spec)")
    return sp


def _exponent(text, name: str) -> Exponent:
    if text is None:
        raise ConfigError(f"--{name} is required")
    try:
        return Exponent.parse(text)
    except (ValueError, SyntaxError, DomainError) as exc:
        raise ConfigError(f"bad exponent --{name} {text!r}: {exc}") from exc


def _delta(text) -> Optional[Fraction]:
    if text is None or str(text).strip().lower() in ("inf", "infinity", "none"):
        return None
    try:
        d = Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad scale {text!r}") from exc
    if d <= 0:
        raise ConfigError("scales must be > 0")
    return d


def _delta_grid(args) -> list:
    if args.delta_grid:
        grid = [_delta(v) for v in args.delta_grid.split(",") if v.strip()]
        keyed = [float("inf") if d is None else d for d in grid]
        if any(a <= b for a, b in zip(keyed, keyed[1:])):
            raise ConfigError("--delta-grid must be strictly decreasing")
        return grid
    return [_delta(args.delta)]


def _subset(args, sp: FiniteMetricSpace) -> int:
    if not getattr(args, "subset", None):
        return (1 << sp.n) - 1
    try:
        idx = [int(v) for v in args.subset.split(",") if v.strip()]
        return PointSubset.from_indices(idx, sp.n).mask
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad --subset: {exc}") from exc


def _mapping(args, sp: FiniteMetricSpace) -> LipschitzMapping:
    spec = args.map or "projection:1"
    kind, _, arg = spec.partition(":")
    if kind == "projection":
        if sp.factors is None:
            if sp.coords is not None and sp.name.startswith("dyadic"):
                return _dyadic_projection(sp, int(arg or 1))
            raise ConfigError("projection maps need a product space such as 'cantor:3*grid:8'")
        return projection(sp, int(arg or 1))
    if kind == "identity":
        return LipschitzMapping(sp, sp, tuple(range(sp.n)))
    if kind == "constant":
        one = FiniteMetricSpace.from_matrix([0], [[0]], sp.eps, name="point")
        return LipschitzMapping(sp, one, (0,) * sp.n)
    raise ConfigError(f"unknown map {spec!r}")


def _dyadic_projection(X: FiniteMetricSpace, n: int) -> LipschitzMapping:
    K = round(X.n ** (1 / len(X.coords[0]))).bit_length() - 1
    Y = coarea.dyadic_grid(K, n)
    index = {c: i for i, c in enumerate(Y.coords)}
    return LipschitzMapping(X, Y, tuple(index[c[:n]] for c in X.coords))


# ---------------------------------------------------------------- commands

def cmd_validate_space(args):
    sp = _space(args)
    rep = validate(sp)
    payload = {"space": sp.name, "n": sp.n, "eps": sp.eps, "report": rep}
    if not rep.ok:
        raise CertificateFailure("metric axiom violated", payload)
    return payload, None


def cmd_generate(args):
    sp = _space(args)
    return sp.to_json(), None


def _ladder(args, weighted: bool):
    sp = _space(args)
    s = _exponent(args.s, "s")
    E = _subset(args, sp)
    grid = _delta_grid(args)
    rows, results = [], []
    for d in grid:
        if args.delta_grid:
            ch = content.certified_bounds(sp, E, s, d, exact_cap=args.exact_cap)
            results.append(ch)
            rows.append(["inf" if d is None else d, ch.lower, ch.weighted, ch.upper, ch.upper_mode,
                         ch.rounded_cost, ch.ok])
        elif weighted:
            results.append(content.weighted_content(sp, E, s, d))
        else:
            results.append(content.hausdorff_content(sp, E, s, d, exact_cap=args.exact_cap))
    if args.delta_grid:
        table = csv_text(["delta", "lower", "weighted", "content", "content_mode", "rounded_6delta", "ok"], rows)
        payload = {"space": sp.name, "s": str(s), "ladder": results}
        if not all(r.ok for r in results):
            raise CertificateFailure("bound chain failed", payload)
        return payload, table
    r = results[0]
    payload = {"space": sp.name, "s": str(s), "delta": "inf" if grid[0] is None else grid[0], "result": r}
    table = csv_text(["delta", "value", "mode"], [[payload["delta"], r.value, r.mode]])
    return payload, table


def cmd_content(args):
    return _ladder(args, False)


def cmd_weighted_content(args):
    return _ladder(args, True)


def cmd_certified_bounds(args):
    sp = _space(args)
    s = _exponent(args.s, "s")
    E = _subset(args, sp)
    rows, chains = [], []
    for d in _delta_grid(args):
        ch = content.certified_bounds(sp, E, s, d, exact_cap=args.exact_cap)
        chains.append(ch)
        rows.append(["inf" if d is None else d, ch.lower, ch.weighted, ch.upper, ch.upper_6delta,
                     ch.rounded_cost, ch.factor, ch.ok])
    payload = {"space": sp.name, "s": str(s), "chains": chains}
    table = csv_text(["delta", "lower", "weighted", "content", "content_6delta", "rounded_cost",
                      "factor", "ok"], rows)
    if not all(c.ok for c in chains):
        raise CertificateFailure("bound chain failed", payload)
    return payload, table


def cmd_cover_select(args):
    if not args.input:
        raise ConfigError("cover-select needs --input inst.json")
    data = _load_json(args.input)
    try:
        sp = _apply_mode(_space_from(data["space"]), args.mode)
        E = PointSubset.from_indices(data.get("E", range(sp.n)), sp.n).mask
        balls = [(int(bl["center"]), frac_from_json(bl["r"])) for bl in data["balls"]]
        a = [frac_from_json(v) for v in data["a"]]
        b = [frac_from_json(v) for v in data["b"]]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"instance JSON is missing a field: {exc}") from exc
    cover = coverkit.WeightedCover.from_balls(sp, E, balls, a)
    mode = data.get("mode", "nazarov")
    if mode == "block":
        res = coverkit.block_select(cover, b)
    elif mode == "nazarov":
        res = coverkit.nazarov_select(cover, b)
    else:
        raise ConfigError(f"unknown selection mode {mode!r}")
    payload = {"selected": res.selected, "achieved": res.achieved, "bound": res.bound,
               "certificates": res.certificates, "approximate": res.approximate,
               "mode": "estimate" if res.approximate else "exact", "levels": res.levels,
               "blocks": res.blocks}
    table = csv_text(["index", "center", "radius"], [[i, balls[i][0], balls[i][1]] for i in res.selected])
    return payload, table


def cmd_coarea_report(args):
    sp = _space(args)
    f = _mapping(args, sp)
    s = _exponent(args.s, "s")
    t = _exponent(args.t, "t")
    E = _subset(args, sp)
    d = _delta(args.delta)
    chain = coarea.eilenberg_chain(f, E, s, t, d, exact_cap=args.exact_cap)
    payload = {"space": sp.name, "map": args.map or "projection:1", "lip": f.lip, "eilenberg": chain}
    if args.theorem30:
        payload["theorem30"] = coarea.theorem30_report(f, E, s, t)
    rows = [[fr.y, len(fr.fiber), fr.content, fr.mode, fr.cover_weight, fr.dominated]
            for fr in chain["fibers"]]
    table = csv_text(["y", "fiber_size", "fiber_content", "mode", "cover_weight", "dominated"], rows)
    if not chain["ok"]:
        raise CertificateFailure("fiber domination failed", payload)
    return payload, table


def cmd_mapping_content(args):
    if args.space is None and args.input is None:
        args.space = f"dyadic:{args.level}:{args.n + args.m}"
    sp = _space(args)
    f = _mapping(args, sp) if args.map else _dyadic_projection(sp, args.n)
    E = _subset(args, sp)
    H = coarea.mapping_content_dyadic(f, E, args.n, args.m)
    T = coarea.tilde_content(f, E, args.n, args.m, None, exact_cap=args.exact_cap)
    P = T.meta["phi"]
    ok = P <= T.value <= H.value
    payload = {"space": sp.name, "n": args.n, "m": args.m, "phi": P, "tilde": T.value,
               "dyadic": H, "order_ok": ok}
    table = csv_text(["phi", "tilde", "dyadic", "order_ok"], [[P, T.value, H.value, ok]])
    if not ok:
        raise CertificateFailure("mapping content ordering failed", payload)
    return payload, table


def random_grid_maps(level: int, count: int, seed: int, n: int = 1, m: int = 1) -> list:
    """Seeded random maps from the level-k grid of [0,1]^{n+m} to that of [0,1]^n."""
    rng = np.random.default_rng(seed)
    X = coarea.dyadic_grid(level, n + m)
    Y = coarea.dyadic_grid(level, n)
    out = []
    for _ in range(count):
        img = tuple(int(v) for v in rng.integers(0, Y.n, size=X.n))
        out.append((LipschitzMapping(X, Y, img), None, n, m))
    return out


def cmd_davids_ratio(args):
    insts = random_grid_maps(args.level, args.count, args.seed, args.n, args.m)
    res = coarea.davids_ratio_probe(insts)
    rows = [[r["instance"], r["phi"], r["tilde"], r["dyadic"], r["ratio"], r["order_ok"]] for r in res["rows"]]
    table = csv_text(["instance", "phi", "tilde", "dyadic", "ratio", "order_ok"], rows)
    payload = {"level": args.level, "seed": args.seed, "probe": res}
    if not res["ok"]:
        raise CertificateFailure("ratio probe ordering failed", payload)
    return payload, table


def cmd_density_profile(args):
    sp = _space(args)
    f = _mapping(args, sp)
    t = _exponent(args.t, "t")
    E = _subset(args, sp)
    radii = [_delta(r) for r in args.radii.split(",")] if args.radii else None
    points = [int(v) for v in args.point.split(",")] if args.point else [next(iter(PointSubset(E, sp.n)))]
    profs = [coarea.lower_density_profile(f, E, x, radii, t) for x in points]
    rows = [[p.x, r, c, ratio, bd] for p in profs
            for r, c, ratio, bd in zip(p.radii, p.contents, p.ratios, p.bounds)]
    table = csv_text(["x", "r", "image_content", "ratio", "bound"], rows)
    payload = {"space": sp.name, "t": str(t), "profiles": profs}
    if not all(p.holds for p in profs):
        raise CertificateFailure("density profile exceeded its Lipschitz bound", payload)
    return payload, table


COMMANDS = {
    "validate-space": cmd_validate_space,
    "generate": cmd_generate,
    "content": cmd_content,
    "weighted-content": cmd_weighted_content,
    "certified-bounds": cmd_certified_bounds,
    "cover-select": cmd_cover_select,
    "coarea-report": cmd_coarea_report,
    "mapping-content": cmd_mapping_content,
    "davids-ratio": cmd_davids_ratio,
    "density-profile": cmd_density_profile,
}


# ------------------------------------------------------------------ parser

def _common(p: argparse.ArgumentParser):
    p.add_argument("--space", help="generator spec, e.g. cantor:3 or cantor:3*grid:8:spacing=1/8")
    p.add_argument("--input", help="JSON input file")
    p.add_argument("--s", help="dimension exponent; accepts expressions like log(2)/log(3)")
    p.add_argument("--t", help="second exponent for mapping contents")
    p.add_argument("--delta", help="scale (default inf)")
    p.add_argument("--delta-grid", help="comma-separated strictly decreasing scales")
    p.add_argument("--mode", choices=["point", "cell"], help="force point mode or require cell mode")
    p.add_argument("--exact-cap", type=int, default=content.DEFAULT_EXACT_CAP)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--subset", help="comma-separated point indices of E (default: all)")
    p.add_argument("--map", help="projection:AXIS, identity or constant")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hauscover", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        _common(p)
        if name in ("mapping-content", "davids-ratio"):
            p.add_argument("--level", type=int, default=2)
            p.add_argument("--n", type=int, default=1)
            p.add_argument("--m", type=int, default=1)
        if name == "davids-ratio":
            p.add_argument("--count", type=int, default=5)
        if name == "density-profile":
            p.add_argument("--point", help="comma-separated centers (default: first point of E)")
            p.add_argument("--radii", help="comma-separated radii")
        if name == "coarea-report":
            p.add_argument("--theorem30", action="store_true", help="add the Ahlfors-regular estimate")
    b = sub.add_parser("bundle", help="run a command and archive config, outputs and certificates")
    b.add_argument("--out", help="archive path to write")
    b.add_argument("--verify", help="re-run an archive and compare outputs byte for byte")
    b.add_argument("rest", nargs=argparse.REMAINDER, help="-- COMMAND ARGS...")
    return parser


def _execute(argv: Sequence[str]) -> tuple[int, str, str]:
    """Run one command; returns (exit code, json text, csv text)."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        return (EXIT_OK if exc.code == 0 else EXIT_CONFIG), "", ""
    if args.command == "bundle":
        raise ConfigError("bundles cannot be nested")
    if args.exact_cap < 1:
        raise ConfigError("--exact-cap must be >= 1")
    code = EXIT_OK
    try:
        payload, table = COMMANDS[args.command](args)
    except CertificateFailure as exc:
        payload, table, code = {"error": str(exc), "certificate": exc.payload}, None, EXIT_ASSERT
    except (content.CertificateError, AssertionError) as exc:
        payload, table, code = {"error": f"certificate failed: {exc}"}, None, EXIT_ASSERT
    except (SizeLimit, content.TooLarge, FamilyBlowup, coarea.TooDeep) as exc:
        payload, table, code = {"error": f"resource cap: {exc}"}, None, EXIT_CAP
    except (ConfigError, MetricAxiomError, content.Uncoverable, coverkit.InfeasibleCover,
            DomainError, ValueError, IndexError, KeyError) as exc:
        payload, table, code = {"error": f"configuration: {exc}"}, None, EXIT_CONFIG
    doc = {"command": args.command, "version": __version__, "exit": code, "output": payload}
    return code, dumps(doc), table or ""


def _emit(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _zip_bytes(files: dict) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for name in sorted(files):
            info = zipfile.ZipInfo(name, _ZIP_TIME)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            zf.writestr(info, files[name])
    return buf.getvalue()


def _inline_inputs(argv: list) -> tuple[list, dict]:
    files = {}
    out = list(argv)
    for k, a in enumerate(out):
        if a == "--input" and k + 1 < len(out):
            src = Path(out[k + 1])
            if not src.exists():
                raise ConfigError(f"no such file: {src}")
            name = f"inputs/{src.name}"
            files[name] = src.read_text()
            out[k + 1] = name
        if a == "--out":
            raise ConfigError("bundled commands write into the archive; drop --out")
    return out, files


def _run_in_bundle(argv: list, inputs: dict) -> tuple[int, str, str]:
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        for name, text in inputs.items():
            p = Path(tmp) / name
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(text)
        real = [str(Path(tmp) / a) if a in inputs else a for a in argv]
        return _execute(real)


def bundle(argv: list, out: str) -> int:
    """Run ``argv`` and write a deterministic archive of config, inputs and outputs."""
    argv = argv[1:] if argv and argv[0] == "--" else argv
    if not argv:
        raise ConfigError("bundle needs a command after --")
    argv, inputs = _inline_inputs(argv)
    code, js, table = _run_in_bundle(argv, inputs)
    files = dict(inputs)
    files["config.json"] = dumps({"argv": argv, "version": __version__})
    files["output.json"] = js
    if table:
        files["output.csv"] = table
    files["MANIFEST.txt"] = "".join(f"{n}\n" for n in sorted(files) if n != "MANIFEST.txt")
    Path(out).write_bytes(_zip_bytes(files))
    return code


def verify_bundle(path: str) -> tuple[bool, dict]:
    """Re-run a bundle's command and compare every output byte for byte."""
    with zipfile.ZipFile(path) as zf:
        files = {n: zf.read(n).decode() for n in zf.namelist()}
    cfg = json.loads(files["config.json"])
    inputs = {n: v for n, v in files.items() if n.startswith("inputs/")}
    _, js, table = _run_in_bundle(cfg["argv"], inputs)
    same = {"output.json": js == files.get("output.json")}
    if "output.csv" in files or table:
        same["output.csv"] = table == files.get("output.csv", "")
    return all(same.values()), {"argv": cfg["argv"], "identical": same,
                                "recorded_version": cfg.get("version"), "version": __version__}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "bundle":
        parser = build_parser()
        args = parser.parse_args(argv)
        try:
            if args.verify:
                ok, rep = verify_bundle(args.verify)
                sys.stdout.write(dumps(rep))
                return EXIT_OK if ok else EXIT_ASSERT
            if not args.out:
                raise ConfigError("bundle needs --out ARCHIVE or --verify ARCHIVE")
            return bundle(args.rest, args.out)
        except ConfigError as exc:
            sys.stderr.write(f"error: {exc}\n")
            return EXIT_CONFIG
        except (OSError, zipfile.BadZipFile, KeyError) as exc:
            sys.stderr.write(f"error: {exc}\n")
            return EXIT_CONFIG
    try:
        code, js, table = _execute(argv)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    if not js:
        return code
    fmt_csv = "--format" in argv and argv[argv.index("--format") + 1] == "csv"
    out = argv[argv.index("--out") + 1] if "--out" in argv else None
    text = table if fmt_csv and table and code == EXIT_OK else js
    _emit(text, out)
    if code != EXIT_OK:
        sys.stderr.write(json.loads(js)["output"].get("error", "failed") + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
