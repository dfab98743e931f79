"""``gvc`` command-line entry point.

Exit status: 0 success, 1 validation or computation failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from gvc import icio, network, panel, social, tiva
from gvc._fmt import jnum, records, write_csv, write_json
from gvc.errors import GvcError, TableFormatError, UnknownCountry, UnknownTemplate

SCHEMAS = """\
input file schemas (long CSV, one header row):
  Z    year,origin_country,origin_sector,dest_country,dest_sector,value
  F    year,origin_country,origin_sector,dest_country,fd_category,value
  VA   year,country,sector,value
  SEA  year,country,sector,variable,value
       variable in EMP_LOW|EMP_MED|EMP_HIGH|COMP_LOW|COMP_MED|COMP_HIGH|CAP
  order file (optional)        kind,code   with kind in country|sector
  gross trade records          year,reporter,partner,product,flow,value   flow in X|M
  product category map         product,category   category in intermediate|final|capital
  regression panel (wide)      unit,time,<var>...

outputs:
  decompose  country,sector,exgr,ddc,idc,rim,fva,dva,dvx
  indices    country,exgr,fva,dvx,backward,forward,participation,position,stages,upstreamness
  network    node,in_strength,out_strength,closeness_in,closeness_out,bonacich,eigenvector,clustering
  jobs       country,sector,skill,jobs_in_exports,jobs_foreign_final_demand,wage_dva,labor_share_dva
  CSV numbers carry 10 significant digits; absent values are empty. JSON mirrors use the
  same field names. Every run updates manifest.json in the output directory.

config file (--config): flat key=value lines using the long flag names; flags override it.
"""

METRICS = ("strength", "closeness", "bonacich", "eigenvector", "clustering")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------

def _common(p, table=True):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--out-dir", default="gvc_out", help="output directory (default: gvc_out)")
    p.add_argument("--format", default="csv", help="comma list of csv,json (default: csv)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads across years")
    if table:
        p.add_argument("--data-dir", default=".", help="directory holding z.csv, f.csv, va.csv, sea.csv")
        p.add_argument("--z", help="Z long CSV (default: DATA_DIR/z.csv)")
        p.add_argument("--f", help="F long CSV (default: DATA_DIR/f.csv)")
        p.add_argument("--va", help="VA long CSV (default: DATA_DIR/va.csv)")
        p.add_argument("--order", help="explicit country/sector order file")
        p.add_argument("--year", action="append", help="year(s); repeat or comma-separate (default: all)")
        p.add_argument("--tol", type=float, default=icio.DEFAULT_TOL, help="relative balance tolerance")
        p.add_argument("--sparse-zeros", action="store_true", help="treat missing cells as 0")
        p.add_argument("--raw", action="store_true", help="table is raw: negative value added allowed")


def build_parser():
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="gvc", description="Global value chain metrics from ICIO tables.",
                                     epilog=SCHEMAS, formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("validate", help="check balance identities", epilog=SCHEMAS, formatter_class=fmt)
    _common(p)

    p = sub.add_parser("coeffs", help="coefficients, inverses, stages, upstreamness", epilog=SCHEMAS,
                       formatter_class=fmt)
    _common(p)
    p.add_argument("--matrices", action="store_true", help="also write the long A/B/L/Gh matrix file")

    p = sub.add_parser("decompose", help="value-added decomposition of gross exports", epilog=SCHEMAS,
                       formatter_class=fmt)
    _common(p)
    p.add_argument("--country", action="append", help="country code(s) (default: all)")
    p.add_argument("--out", help="csv, json, or an output file path")

    p = sub.add_parser("indices", help="participation, position and length indices", epilog=SCHEMAS,
                       formatter_class=fmt)
    _common(p)
    p.add_argument("--out", help="csv, json, or an output file path")
    p.add_argument("--trade", help="gross trade records CSV for intermediate shares")
    p.add_argument("--category-map", help="product category map CSV")

    p = sub.add_parser("network", help="value-added trade network metrics", epilog=SCHEMAS, formatter_class=fmt)
    _common(p)
    p.add_argument("--level", choices=network.LEVELS, default="country")
    p.add_argument("--flow", choices=network.FLOWS, default="dva_in_exports")
    p.add_argument("--metrics", default="all", help="all or comma list of " + ",".join(METRICS))
    p.add_argument("--out", help="csv, json, or an output file path")
    p.add_argument("--dot", help="write the network in DOT format to this path")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, help="Bonacich attenuation (default: 0.5/lambda_max)")
    p.add_argument("--orientation", choices=("seller", "buyer"), default="seller")
    p.add_argument("--unnormalized", action="store_true", help="keep raw link weights")

    p = sub.add_parser("regress", help="fixed-effects regression from a template", epilog=SCHEMAS,
                       formatter_class=fmt)
    _common(p, table=False)
    p.add_argument("--panel", required=False, help="wide panel CSV: unit,time,<var>...")
    p.add_argument("--template", choices=panel.TEMPLATE_IDS)
    p.add_argument("--bind", default="", help="PLACEHOLDER=column pairs, comma separated")
    p.add_argument("--cluster", help="cluster column for robust standard errors")
    p.add_argument("--unit-col", default="unit")
    p.add_argument("--time-col", default="time")
    p.add_argument("--out", help="result JSON path (default: OUT_DIR/regress_<template>.json)")

    p = sub.add_parser("jobs", help="labour content of exports", epilog=SCHEMAS, formatter_class=fmt)
    _common(p)
    p.add_argument("--sea", help="SEA long CSV (default: DATA_DIR/sea.csv)")
    p.add_argument("--country", action="append", help="country code(s) (default: all)")
    p.add_argument("--out", help="csv, json, or an output file path")

    p = sub.add_parser("synth", help="write a synthetic balanced table", epilog=SCHEMAS, formatter_class=fmt)
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--data-dir", default=".", help="where to write z.csv, f.csv, va.csv, sea.csv")
    p.add_argument("--countries", type=int, required=False, default=2)
    p.add_argument("--sectors", type=int, required=False, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--import-share", type=float, default=0.2)
    p.add_argument("--fd-categories", type=int, default=1)
    p.add_argument("--year", type=int, action="append")
    p.add_argument("--no-sea", action="store_true", help="skip the synthetic SEA file")
    return parser


def read_config(path):
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key.lstrip("-").replace("-", "_")] = value
    return cfg


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            cfg = read_config(args.config)
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        unknown = sorted(set(cfg) - set(known))
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        for key, raw in cfg.items():
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                val = raw.lower() in ("1", "true", "yes", "on")
            elif isinstance(action, argparse._AppendAction):
                val = [raw]
            else:
                val = action.type(raw) if action.type else raw
            sub.set_defaults(**{key: val})
        args = parser.parse_args(argv)
    return args


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Tracks inputs and artifacts of one command for the manifest."""

    def __init__(self, command, out_dir, formats):
        self.command = command
        self.out_dir = Path(out_dir)
        self.formats = formats
        self.inputs = {}
        self.artifacts = []

    def use(self, path):
        path = Path(path)
        if not path.exists():
            raise UsageError(f"input file not found: {path}")
        self.inputs[str(path)] = _sha256(path)
        return path

    def target(self, name):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        self.artifacts.append(path)
        return path

    def emit(self, stem, columns, rows, out=None, meta=None):
        """Write a table as CSV and/or JSON according to ``--format``/``--out``."""
        targets = []
        if out and out not in ("csv", "json"):
            path = Path(out)
            kind = "json" if path.suffix == ".json" else "csv"
            path.parent.mkdir(parents=True, exist_ok=True)
            self.artifacts.append(path)
            targets.append((kind, path))
        else:
            formats = [out] if out else self.formats
            targets = [(f, self.target(f"{stem}.{f}")) for f in formats]
        for kind, path in targets:
            if kind == "csv":
                write_csv(path, columns, rows)
            else:
                payload = {"columns": list(columns), "rows": records(columns, rows)}
                if meta is not None:
                    payload["meta"] = meta
                write_json(path, payload)

    def write_manifest(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / "manifest.json"
        manifest = {"artifacts": {}}
        if path.exists():
            try:
                manifest = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                pass
        entries = manifest.setdefault("artifacts", {})
        for art in self.artifacts:
            try:
                key = str(Path(art).resolve().relative_to(self.out_dir.resolve()))
            except ValueError:
                key = str(art)
            entries[key] = {"command": self.command, "sha256": _sha256(art), "inputs": dict(sorted(self.inputs.items()))}
        manifest["artifacts"] = dict(sorted(entries.items()))
        write_json(path, manifest)


def _formats(text):
    fmts = [f.strip() for f in str(text).split(",") if f.strip()]
    bad = set(fmts) - {"csv", "json", "dot"}
    if bad or not fmts:
        raise UsageError(f"unknown output format(s): {sorted(bad) or text}")
    return [f for f in fmts if f != "dot"] or ["csv"]


def _years(values):
    if not values:
        return None
    out = []
    for v in values:
        for part in str(v).split(","):
            if part.strip():
                try:
                    out.append(int(part))
                except ValueError:
                    raise UsageError(f"bad year: {part!r}") from None
    return sorted(set(out))


def _table_paths(args, run):
    d = Path(args.data_dir)
    paths = [Path(args.z) if args.z else d / "z.csv", Path(args.f) if args.f else d / "f.csv",
             Path(args.va) if args.va else d / "va.csv"]
    return [run.use(p) for p in paths]


def _load_tables(args, run):
    z, f, va = _table_paths(args, run)
    countries = sectors = None
    if args.order:
        countries, sectors = icio.read_order_file(run.use(args.order))
    years = _years(args.year)
    if years is None:
        years = sorted(pd.read_csv(z, usecols=["year"])["year"].astype(int).unique())
    kw = dict(sparse_zeros=args.sparse_zeros, countries=countries, sectors=sectors, raw=args.raw)

    def load(y):
        return icio.load_table(z, f, va, y, **kw)

    return _map(args, load, years)


def _map(args, fn, items):
    if getattr(args, "jobs", 1) > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _countries(args, table):
    codes = args.country or list(table.countries)
    for code in codes:
        if code not in table.countries:
            raise UsageError(f"unknown country code: {code!r} (known: {', '.join(table.countries)})")
    return codes


def _suffixed(out, tag, many):
    if not out or out in ("csv", "json") or not many:
        return out
    p = Path(out)
    return str(p.with_name(f"{p.stem}_{tag}{p.suffix}"))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_validate(args, run):
    tables = _load_tables(args, run)
    ok = True
    for t in tables:
        report = icio.validate(t, args.tol)
        ok = ok and report.passed
        payload = {"year": t.year, **report.to_dict()}
        write_json(run.target(f"validate_{t.year}.json"), payload)
        status = "pass" if report.passed else "FAIL"
        print(f"{t.year}: {status} (worst row {report.worst_row:.3g}, worst column {report.worst_col:.3g}, "
              f"{len(report.negatives)} negative, {len(report.zero_output)} zero-output)", file=sys.stderr)
    return 0 if ok else 1


def cmd_coeffs(args, run):
    tables = _load_tables(args, run)
    results = _map(args, lambda t: (t, icio.coefficients(t, args.tol)), tables)
    for t, cs in results:
        N_ = tiva.production_stages(cs)
        U = tiva.upstreamness(cs)
        cols = ("country", "sector", "x", "va", "vc", "stages", "upstreamness")
        rows = [(c, s, t.x[k], t.va[k], cs.vc[k], N_[k], U[k]) for k, (c, s) in enumerate(t.labels())]
        run.emit(f"coeffs_{t.year}", cols, rows, meta={"year": t.year, "rho": jnum(cs.rho), "rho_B": jnum(cs.rho_B)})
        if args.matrices:
            labels = t.labels()
            mcols = ("row_country", "row_sector", "col_country", "col_sector", "A", "B", "L", "Gh")
            mrows = [(*labels[i], *labels[j], cs.A[i, j], cs.B[i, j], cs.L[i, j], cs.Gh[i, j])
                     for i in range(t.n) for j in range(t.n)]
            run.emit(f"matrices_{t.year}", mcols, mrows)
    return 0


def cmd_decompose(args, run):
    tables = _load_tables(args, run)
    for t in tables:
        _countries(args, t)

    def work(t):
        cs = icio.coefficients(t, args.tol)
        flows = tiva.gross_exports(t)
        return t, [tiva.decompose_exports(t, c, cs, flows) for c in _countries(args, t)]

    results = _map(args, work, tables)
    many = len(results) > 1 or len(results[0][1]) > 1
    for t, decs in results:
        for dec in decs:
            tag = f"{dec.country}_{t.year}"
            run.emit(f"decompose_{tag}", dec.COLUMNS, dec.rows(), _suffixed(args.out, tag, many))
    return 0


def cmd_indices(args, run):
    tables = _load_tables(args, run)
    results = _map(args, lambda t: (t, tiva.gvc_indices(t, icio.coefficients(t, args.tol))), tables)
    many = len(results) > 1
    for t, ind in results:
        meta = {"year": t.year, "apl_mean": jnum(ind.apl_mean), "apl_defined_share": jnum(ind.apl_defined_share)}
        run.emit(f"indices_{t.year}", ind.COUNTRY_COLUMNS, ind.country_rows(), _suffixed(args.out, t.year, many), meta)
        run.emit(f"indices_sectors_{t.year}", ind.SECTOR_COLUMNS, ind.sector_rows())
    if args.trade or args.category_map:
        if not (args.trade and args.category_map):
            raise UsageError("--trade and --category-map must be given together")
        shares = tiva.intermediate_shares(tiva.read_trade_records(run.use(args.trade)),
                                          tiva.read_category_map(run.use(args.category_map)))
        run.emit("intermediate_shares", list(shares.columns), shares.itertuples(index=False, name=None))
    return 0


def cmd_network(args, run):
    wanted = METRICS if args.metrics == "all" else tuple(m.strip() for m in args.metrics.split(","))
    bad = set(wanted) - set(METRICS)
    if bad:
        raise UsageError(f"unknown metrics: {sorted(bad)}")
    tables = _load_tables(args, run)

    def work(t):
        net = network.build_network(t, args.level, args.flow, normalize=not args.unnormalized)
        return t, net, network.network_metrics(net, args.alpha, args.beta, args.orientation)

    results = _map(args, work, tables)
    many = len(results) > 1
    column_map = {"strength": ("in_strength", "out_strength"), "closeness": ("closeness_in", "closeness_out"),
                  "bonacich": ("bonacich",), "eigenvector": ("eigenvector",), "clustering": ("clustering",)}
    keep = ["node"] + [c for m in wanted for c in column_map[m]]
    for t, net, met in results:
        idx = [met.COLUMNS.index(c) for c in keep]
        rows = [tuple(r[i] for i in idx) for r in met.rows()]
        meta = {k: (jnum(v) if isinstance(v, float) else v) for k, v in met.meta.items()}
        meta["eigenvector"] = {k: (jnum(v) if isinstance(v, float) else v) for k, v in met.meta["eigenvector"].items()}
        meta["year"] = t.year
        run.emit(f"network_{args.level}_{t.year}", keep, rows, _suffixed(args.out, t.year, many), meta)
        if args.dot:
            path = Path(_suffixed(args.dot, t.year, many))
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(net.to_dot(), encoding="utf-8")
            run.artifacts.append(path)
    return 0


def cmd_regress(args, run):
    if not args.panel or not args.template:
        raise UsageError("regress needs --panel and --template")
    mapping = {}
    for pair in filter(None, (s.strip() for s in args.bind.split(","))):
        if "=" not in pair:
            raise UsageError(f"bad --bind entry {pair!r}; expected PLACEHOLDER=column")
        k, v = pair.split("=", 1)
        mapping[k.strip()] = v.strip()
    pnl = panel.PanelDataset.from_csv(run.use(args.panel), args.unit_col, args.time_col, args.cluster)
    spec = panel.template(args.template).bind(mapping)
    spec, dropped = panel.adapt_fixed_effects(spec, pnl)
    missing = [v for v in spec.variables() if v not in pnl.data.columns]
    if missing:
        raise UsageError(f"panel lacks variables {missing}; bind them with --bind PLACEHOLDER=column")
    fitter = panel.fit_lpm_binary if args.template in panel.BINARY_TEMPLATES else panel.fit
    res = fitter(pnl, spec)
    payload = res.to_dict()
    payload["template"] = args.template
    payload["dropped_fixed_effects"] = dropped
    payload = json.loads(json.dumps(payload), parse_float=lambda s: jnum(float(s)))
    out = Path(args.out) if args.out else run.target(f"regress_{args.template}.json")
    if args.out:
        out.parent.mkdir(parents=True, exist_ok=True)
        run.artifacts.append(out)
    write_json(out, payload)
    return 0


def cmd_jobs(args, run):
    tables = _load_tables(args, run)
    sea_path = run.use(Path(args.sea) if args.sea else Path(args.data_dir) / "sea.csv")
    for t in tables:
        _countries(args, t)

    def work(t):
        sea = social.load_sea(sea_path, t, sparse_zeros=args.sparse_zeros)
        cs = icio.coefficients(t, args.tol)
        flows = tiva.gross_exports(t)
        return t, [social.labor_content(t, sea, c, cs, flows) for c in _countries(args, t)]

    results = _map(args, work, tables)
    many = len(results) > 1 or len(results[0][1]) > 1
    for t, contents in results:
        for lc in contents:
            tag = f"{lc.country}_{t.year}"
            run.emit(f"jobs_{tag}", lc.COLUMNS, lc.rows(), _suffixed(args.out, tag, many), {"unit": lc.unit})
    return 0


def cmd_synth(args, run):
    years = args.year or [2000]
    tables = [icio.synth_table(args.countries, args.sectors, args.seed + k, args.import_share,
                               n_fd=args.fd_categories, year=y) for k, y in enumerate(years)]
    frames = [icio.table_frames(t) for t in tables]
    for k, name in enumerate(icio.TABLE_FILES):
        pd.concat([f[k] for f in frames]).to_csv(run.target(name), index=False, lineterminator="\n")
    if not args.no_sea:
        seas = [social.sea_long_frame(social.synth_sea(t, args.seed + k), t) for k, t in enumerate(tables)]
        pd.concat(seas).to_csv(run.target("sea.csv"), index=False, lineterminator="\n")
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "coeffs": cmd_coeffs,
    "decompose": cmd_decompose,
    "indices": cmd_indices,
    "network": cmd_network,
    "regress": cmd_regress,
    "jobs": cmd_jobs,
    "synth": cmd_synth,
}


def run(argv=None):
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"gvc: error: {exc}", file=sys.stderr)
        return 2
    out_dir = args.data_dir if args.command == "synth" else args.out_dir
    try:
        formats = _formats(getattr(args, "format", "csv"))
        job = Run(args.command, out_dir, formats)
        status = COMMANDS[args.command](args, job)
        job.write_manifest()
        return status
    except (UsageError, UnknownCountry, UnknownTemplate, FileNotFoundError) as exc:
        print(f"gvc: error: {exc}", file=sys.stderr)
        return 2
    except icio.Unbalanced as exc:
        print(f"gvc: validation failed: {exc}", file=sys.stderr)
        return 1
    except (GvcError, TableFormatError, np.linalg.LinAlgError) as exc:
        print(f"gvc: error: {exc}", file=sys.stderr)
        return 1


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
