"""Command-line front end.

Exit codes: 0 success, 2 a checked property failed, 3 configuration error,
4 numerical non-convergence.  Output is deterministic for a fixed command
line and seed, whatever ``KOBALAB_THREADS`` says.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, KobalabError, NumericalError, OutOfChartError
from .parallel import pmap

EXIT_OK = 0
EXIT_ASSERT = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4

SANDWICH_COLUMNS = ["pair_id", "x", "y", "delta_x", "delta_y", "M", "g", "K_lo", "K_up",
                    "resid_lo", "resid_hi", "case_tag", "depth"]
HYP_COLUMNS = ["kind", "sample_id", "depth", "defect_lo", "defect_hi"]
VISUAL_COLUMNS = ["pair_id", "xi", "eta", "product_lo", "product_hi", "M", "ratio",
                  "ratio_literal", "stable", "max_difference"]


# ---------------------------------------------------------------------------
# formatting


def fmt(v):
    """Shortest round-trip text for a float (locale independent)."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def fmt_point(z):
    from .domain import to_real

    return " ".join(fmt(t) for t in to_real(np.asarray(z, dtype=complex)))


def write_csv(rows, columns, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    _emit(buf.getvalue(), path)


def _emit(text, path):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _clean(v):
    """JSON-safe copy: non-finite floats become null, numpy scalars become Python numbers."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    return v


def dump_json(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _write_summary(summary, output, summary_path):
    text = dump_json(summary)
    if summary_path:
        Path(summary_path).write_text(text, encoding="utf-8")
    elif output and output != "-":
        Path(output).with_suffix(".summary.json").write_text(text, encoding="utf-8")
    else:
        sys.stderr.write(text)


# ---------------------------------------------------------------------------
# argument parsing


def parse_point(text, n=None):
    """Flat real list ``"re1,im1,re2,im2,..."`` to a complex point."""
    from .domain import to_complex

    try:
        vals = [float(t) for t in text.replace(" ", ",").split(",") if t]
    except ValueError:
        raise ConfigurationError(f"cannot parse coordinates {text!r}") from None
    if len(vals) % 2 or not vals:
        raise ConfigurationError("coordinates are re/im interleaved: an even count of reals")
    z = to_complex(np.array(vals))
    if n is not None and z.size != n:
        raise ConfigurationError(f"expected {2 * n} reals for a point in C^{n}")
    return z


def parse_depth_grid(text, h_max=None):
    """Depth grid from ``"a:b:geometric"`` (decades from ``a`` to ``b``), ``"a:b:geometric:k"``
    (``k`` log-spaced values) or a comma list."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            a, b = float(parts[0]), float(parts[1])
            kind = parts[2] if len(parts) > 2 else "geometric"
            if kind != "geometric":
                raise ConfigurationError(f"unknown grid spacing {kind!r}")
            if len(parts) > 3:
                k = int(parts[3])
            else:
                k = int(round(abs(math.log10(a / b)))) + 1
            if k < 1:
                raise ConfigurationError("a depth grid needs at least one value")
            grid = [a] if k == 1 else list(np.geomspace(a, b, k))
        else:
            grid = [float(t) for t in text.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError):
        raise ConfigurationError(f"cannot parse depth grid {text!r}") from None
    if not grid or any(not (h > 0) for h in grid):
        raise ConfigurationError("depth grid values must be positive")
    if h_max is not None and max(grid) > h_max * (1 + 1e-12):
        raise ConfigurationError(f"depth grid exceeds the chart depth h_max={h_max}")
    return tuple(float(h) for h in grid)


def _seed(text):
    try:
        s = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("seed must be an integer") from None
    if not 0 <= s < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return s


def _count(text):
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("counts must be integers") from None


def _require_positive(name, value):
    if value < 1:
        raise ConfigurationError(f"{name} must be at least 1")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def build_parser():
    p = _Parser(prog="kobalab", description="Kobayashi distance laboratory for convex domains of finite type.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, domain=True):
        if domain:
            sp.add_argument("--domain", required=True, help="domain spec (JSON)")
        sp.add_argument("--seed", type=_seed, default=42)
        sp.add_argument("--output", "-o", default=None, help="output file (default: stdout)")

    d = sub.add_parser("domain", help="domain utilities")
    dsub = d.add_subparsers(dest="action", required=True, parser_class=_Parser)
    v = dsub.add_parser("validate", help="structural checks of a domain spec")
    common(v)

    t = sub.add_parser("tau", help="minimal basis and radii at (q, eps)")
    common(t)
    t.add_argument("--q", required=True)
    t.add_argument("--eps", type=float, required=True)
    t.add_argument("--method", choices=("projection", "multistart"), default="projection")

    ps = sub.add_parser("pseudo", help="pseudodistance M(x, y)")
    common(ps)
    ps.add_argument("--x", required=True)
    ps.add_argument("--y", required=True)
    ps.add_argument("--method", choices=("inf", "taylor", "both"), default="both")

    c = sub.add_parser("calibrate", help="quasi-metric constant of M")
    common(c)
    c.add_argument("--samples", type=_count, default=1000)
    c.add_argument("--h-max", type=float, default=None)
    c.add_argument("--patch-radius", type=float, default=None)

    s = sub.add_parser("sandwich", help="certified distance bounds for depth-stratified pairs")
    common(s)
    s.add_argument("--pairs", type=_count, required=True)
    s.add_argument("--depth-grid", default="1e-4:1e-7:geometric")
    s.add_argument("--summary", default=None, help="summary JSON path")

    h = sub.add_parser("hyp", help="four-point and thin-triangle defects")
    common(h)
    h.add_argument("--quadruples", type=_count, default=1000)
    h.add_argument("--triangles", type=_count, default=200)
    h.add_argument("--depth-grid", default="1e-4:1e-7:geometric")
    h.add_argument("--summary", default=None)

    vi = sub.add_parser("visual", help="visual-metric ratio band on a boundary patch")
    common(vi)
    vi.add_argument("--omega", default=None, help="base point (default: over the patch center at depth 0.1)")
    vi.add_argument("--patch-center", default=None, help="boundary point (default: first-axis boundary point)")
    vi.add_argument("--patch-radius", type=float, default=0.1)
    vi.add_argument("--min-separation", type=float, default=None,
                    help="smallest pair separation as a fraction of the patch radius (default 0.5)")
    vi.add_argument("--pairs", type=_count, default=100)
    vi.add_argument("--summary", default=None)

    r = sub.add_parser("report", help="JSON summary of CSV outputs")
    r.add_argument("inputs", nargs="+")
    r.add_argument("--output", "-o", default=None)
    return p


# ---------------------------------------------------------------------------
# subcommands


def _load_domain(path):
    from .domain import ConvexDomainSpec

    return ConvexDomainSpec.from_json(path)


def cmd_domain_validate(args):
    from .domain import validate_domain

    dom = _load_domain(args.domain)
    report = validate_domain(dom, seed=args.seed)
    report["spec"] = dom.to_dict()
    _emit(dump_json(report), args.output)
    return EXIT_OK if report["ok"] else EXIT_ASSERT


def cmd_tau(args):
    from .frames import build_minimal_frame

    dom = _load_domain(args.domain)
    q = parse_point(args.q, dom.n)
    fr = build_minimal_frame(dom, q, args.eps, method=args.method, seed=args.seed)
    n = dom.n
    cols = [f"q{k}" for k in range(2 * n)] + ["eps"] + [f"tau_{i + 1}" for i in range(n)]
    cols += [f"e{i + 1}_{part}{k + 1}" for i in range(n) for k in range(n) for part in ("re", "im")]
    vals = fr.as_row()
    write_csv([dict(zip(cols, vals))], cols, args.output)
    return EXIT_OK


def cmd_pseudo(args):
    from .pseudo import pseudo_M_inf, pseudo_M_taylor

    dom = _load_domain(args.domain)
    x = parse_point(args.x, dom.n)
    y = parse_point(args.y, dom.n)
    row = {"x": fmt_point(x), "y": fmt_point(y), "M_inf": float("nan"), "M_taylor": float("nan"),
           "ratio": float("nan")}
    if args.method in ("inf", "both"):
        row["M_inf"] = pseudo_M_inf(dom, x, y)
    if args.method in ("taylor", "both"):
        row["M_taylor"] = pseudo_M_taylor(dom, x, y)
    if args.method == "both" and row["M_inf"] > 0:
        row["ratio"] = row["M_taylor"] / row["M_inf"]
    write_csv([row], ["x", "y", "M_inf", "M_taylor", "ratio"], args.output)
    return EXIT_OK


def cmd_calibrate(args):
    from .pseudo import calibrate

    _require_positive("samples", args.samples)
    dom = _load_domain(args.domain)
    cal = calibrate(dom, h_max=args.h_max, sample_count=args.samples, seed=args.seed,
                    patch_radius=args.patch_radius)
    cols = ["C_quasi", "eps0", "sample_count", "excluded", "symmetry_max", "triangle_max", "seed"]
    row = {"C_quasi": cal.C_quasi, "eps0": cal.eps0, "sample_count": cal.sample_count,
           "excluded": cal.excluded, "symmetry_max": cal.symmetry_max,
           "triangle_max": cal.triangle_max, "seed": args.seed}
    write_csv([row], cols, args.output)
    return EXIT_OK


def _sandwich_row(item):
    from .domain import ConvexDomainSpec
    from .kobayashi import distance_sandwich
    from .sampling import ShellPairSampler

    spec, seed, index, pair_id, hb = item
    dom = ConvexDomainSpec.from_dict(spec)
    x, y = ShellPairSampler(dom).pair(seed, index, hb)
    s = distance_sandwich(dom, x, y)
    return {"pair_id": pair_id, "x": fmt_point(x), "y": fmt_point(y), "delta_x": s.deltas[0],
            "delta_y": s.deltas[1], "M": s.M, "g": s.g, "K_lo": s.K_lo, "K_up": s.K_up,
            "resid_lo": s.K_lo - s.g, "resid_hi": s.K_up - s.g, "case_tag": s.case_tag, "depth": hb}


def sandwich_rows(dom, pairs, grid, seed):
    """Pair ``k`` sits in bucket ``grid[k % B]`` with sample index ``k // B``."""
    spec = dom.to_dict()
    B = len(grid)
    items = [(spec, seed, k // B, k, grid[k % B]) for k in range(pairs)]
    return pmap(_sandwich_row, items)


def cmd_sandwich(args):
    _require_positive("pairs", args.pairs)
    dom = _load_domain(args.domain)
    grid = parse_depth_grid(args.depth_grid, dom.h_max)
    rows = sandwich_rows(dom, args.pairs, grid, args.seed)
    write_csv(rows, SANDWICH_COLUMNS, args.output)
    _write_summary(summarize_sandwich(rows), args.output, args.summary)
    return EXIT_OK


def cmd_hyp(args):
    from .hyperbolicity import ScanConfig, four_point_scan, triangle_scan

    _require_positive("quadruples", args.quadruples)
    _require_positive("triangles", args.triangles)
    dom = _load_domain(args.domain)
    grid = parse_depth_grid(args.depth_grid, dom.h_max)
    fp = four_point_scan(dom, ScanConfig(quadruples=args.quadruples, buckets=grid), seed=args.seed)
    tr = triangle_scan(dom, triangles=args.triangles, seed=args.seed, buckets=grid)
    rows = [{"kind": "four_point", "sample_id": i, "depth": s.depth, "defect_lo": s.defect[0],
             "defect_hi": s.defect[1]} for i, s in enumerate(fp.samples)]
    rows += [{"kind": "triangle", "sample_id": i, "depth": h, "defect_lo": float("nan"),
              "defect_hi": d} for i, (h, d) in enumerate(tr.defects)]
    write_csv(rows, HYP_COLUMNS, args.output)
    summary = {
        "four_point": {"sample_count": fp.sample_count, "seed": fp.seed,
                       "defect_upper_quantiles": fp.defect_upper_quantiles,
                       "interval_width_stats": fp.interval_width_stats,
                       "depth_stratification": fp.depth_stratification, "slope": fp.slope,
                       "excluded": fp.excluded},
        "triangle": {"sample_count": tr.sample_count, "seed": tr.seed,
                     "defect_quantiles": tr.defect_quantiles,
                     "depth_stratification": tr.depth_stratification, "slope": tr.slope,
                     "width_max": tr.width_max, "excluded": tr.excluded},
    }
    _write_summary(summary, args.output, args.summary)
    return EXIT_OK


def cmd_visual(args):
    from .domain import radial_boundary_point
    from .hyperbolicity import (VISUAL_MIN_SEPARATION, VISUAL_OMEGA_DEPTH, boundary_pairs,
                                omega_over, visual_band, visual_metric_ratio)
    from .sampling import PatchSampler

    _require_positive("pairs", args.pairs)
    dom = _load_domain(args.domain)
    center = None
    if args.patch_center is not None:
        center = radial_boundary_point(dom, parse_point(args.patch_center, dom.n) - np.asarray(dom.center))
    if not args.patch_radius > 0:
        raise ConfigurationError("patch radius must be positive")
    patch = PatchSampler(dom, center_point=center, radius=args.patch_radius)
    omega = (parse_point(args.omega, dom.n) if args.omega is not None
             else omega_over(dom, patch.p0, VISUAL_OMEGA_DEPTH))
    sep = VISUAL_MIN_SEPARATION if args.min_separation is None else args.min_separation
    if not 0 <= sep < 2:
        raise ConfigurationError("min separation must lie in [0, 2)")
    pairs = boundary_pairs(dom, patch, args.pairs, args.seed, min_sep=sep)
    table = visual_metric_ratio(dom, omega, pairs)
    rows = [{"pair_id": r.index, "xi": fmt_point(pairs[r.index][0]), "eta": fmt_point(pairs[r.index][1]),
             "product_lo": r.product_lo, "product_hi": r.product_hi, "M": r.M, "ratio": r.ratio,
             "ratio_literal": r.ratio_literal, "stable": r.stable,
             "max_difference": max(r.differences) if r.differences else 0.0} for r in table]
    write_csv(rows, VISUAL_COLUMNS, args.output)
    (lo, hi, K), flagged = visual_band(table)
    lit = [r.ratio_literal for r in table if r.stable]
    summary = {"band": {"min": lo, "max": hi, "K": K}, "flagged": flagged, "pairs": len(table),
               "literal_band": {"min": min(lit) if lit else None, "max": max(lit) if lit else None}}
    _write_summary(summary, args.output, args.summary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def _read_table(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            rows = list(reader)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from None
    return header, rows


def _floats(rows, key):
    out = []
    for r in rows:
        try:
            out.append(float(r[key]))
        except (TypeError, ValueError):
            raise ConfigurationError(f"column {key!r} holds a non-numeric value") from None
    return np.array(out)


def _by_depth(h, values, stat):
    out = {}
    for hb in sorted(set(h.tolist()), reverse=True):
        v = values[(h == hb) & np.isfinite(values)]
        out[hb] = float(stat(v)) if v.size else None
    return out


def _strat_slope(strat):
    from .stats import log_inverse, ols_slope

    hs = [h for h, v in strat.items() if v is not None]
    return ols_slope(log_inverse(hs), [strat[h] for h in hs]) if hs else None


def summarize_sandwich(rows):
    """Residual bands per depth and the slope of the band width against ``log(1/h)``."""
    h = np.array([float(r["depth"]) for r in rows])
    lo = np.array([float(r["resid_lo"]) for r in rows])
    hi = np.array([float(r["resid_hi"]) for r in rows])
    width = {}
    bands = {}
    for hb in sorted(set(h.tolist()), reverse=True):
        sel = (h == hb) & np.isfinite(lo) & np.isfinite(hi)
        if np.any(sel):
            bands[hb] = [float(lo[sel].min()), float(hi[sel].max())]
            width[hb] = bands[hb][1] - bands[hb][0]
        else:
            bands[hb] = None
            width[hb] = None
    ok = np.isfinite(lo) & np.isfinite(hi)
    return {"pairs": len(rows), "out_of_chart": int((~ok).sum()),
            "band": [float(lo[ok].min()), float(hi[ok].max())] if np.any(ok) else None,
            "bands_by_depth": bands, "width_by_depth": width, "width_slope": _strat_slope(width)}


def report_summary(paths):
    """JSON-ready summary of one or more CSV outputs of this tool.

    Recognized schemas: ``sandwich``, ``hyp``, ``visual`` and the generic
    two-column ``h,statistic`` table (OLS slope of ``statistic`` against
    ``log(1/h)``).
    """
    from .stats import log_inverse, ols_slope, quantiles, ratio_band

    out = {}
    for path in paths:
        header, rows = _read_table(path)
        cols = set(header)
        if set(SANDWICH_COLUMNS) <= cols:
            for key in ("depth", "resid_lo", "resid_hi"):
                _floats(rows, key)
            out[str(path)] = {"schema": "sandwich", **summarize_sandwich(rows)}
        elif set(HYP_COLUMNS) <= cols:
            entry = {"schema": "hyp"}
            for kind in ("four_point", "triangle"):
                sel = [r for r in rows if r["kind"] == kind]
                if not sel:
                    continue
                h = _floats(sel, "depth")
                v = _floats(sel, "defect_hi")
                strat = _by_depth(h, v, np.max)
                entry[kind] = {"sample_count": len(sel), "defect_upper_quantiles": quantiles(v),
                               "depth_stratification": strat, "slope": _strat_slope(strat)}
            out[str(path)] = entry
        elif set(VISUAL_COLUMNS) <= cols:
            ratio = _floats(rows, "ratio")
            stable = np.array([r["stable"] in ("1", "True", "true") for r in rows])
            lo, hi, K = ratio_band(ratio[stable])
            out[str(path)] = {"schema": "visual", "pairs": len(rows), "flagged": int((~stable).sum()),
                              "band": {"min": lo, "max": hi, "K": K}}
        elif {"h", "statistic"} <= cols:
            h = _floats(rows, "h")
            v = _floats(rows, "statistic")
            if np.any(h <= 0):
                raise ConfigurationError("depths must be positive")
            out[str(path)] = {"schema": "generic", "rows": len(rows),
                              "quantiles": quantiles(v), "slope": ols_slope(log_inverse(h), v)}
        else:
            raise ConfigurationError(f"{path}: unrecognized CSV schema {header}")
    return out


def cmd_report(args):
    _emit(dump_json(report_summary(args.inputs)), args.output)
    return EXIT_OK


COMMANDS = {
    "tau": cmd_tau, "pseudo": cmd_pseudo, "calibrate": cmd_calibrate, "sandwich": cmd_sandwich,
    "hyp": cmd_hyp, "visual": cmd_visual, "report": cmd_report,
}


def run(argv=None):
    """Parse ``argv`` and run one subcommand; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        if args.command == "domain":
            return cmd_domain_validate(args)
        return COMMANDS[args.command](args)
    except (ConfigurationError, OutOfChartError) as exc:
        sys.stderr.write(f"kobalab: configuration error: {exc}\n")
        return EXIT_CONFIG
    except NumericalError as exc:
        sys.stderr.write(f"kobalab: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except KobalabError as exc:
        sys.stderr.write(f"kobalab: {exc}\n")
        return EXIT_CONFIG
    except ValueError as exc:
        sys.stderr.write(f"kobalab: invalid input: {exc}\n")
        return EXIT_CONFIG


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
