"""Acceptance criteria 1-9.

Each test records one ``criterion N: PASS|FAIL|SKIP`` line, shown in the
terminal summary. Criterion 9 needs an external data extract and is skipped
unless ``GVC_TIVA_INDIA_DIR`` points at a directory with z.csv, f.csv and va.csv.
"""
import filecmp
import os
import resource
import time
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from conftest import ACCEPTANCE_LINES, make_closed2, make_open2
from gvc.cli import run
from gvc.icio import coefficients, load_table, synth_table, va_embodied
from gvc.network import (
    FlowNetwork,
    bonacich,
    build_network,
    clustering,
    eigenvector_centrality,
    network_metrics,
)
from gvc.panel import PanelDataset, RegressionSpec, Term, fit, template
from gvc.social import jobs_by_destination, synth_sea
from gvc.tiva import decompose_all, decompose_exports, gross_exports, gvc_indices
from oracles import dummy_ols, power_series

N_TABLES = 100


def _record(n, checks, detail=""):
    failed = [name for name, ok in checks if not ok]
    status = "PASS" if not failed else "FAIL"
    line = f"criterion {n}: {status}"
    if detail:
        line += f" ({detail})"
    if failed:
        line += " failed: " + ", ".join(failed)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert not failed, line


def _synth_grid():
    """Seeded tables from 1x1 up to 10 countries x 20 sectors."""
    for seed in range(N_TABLES):
        M = 1 + seed % 10
        N = 1 + (seed * 7) % 20
        if seed == N_TABLES - 1:
            M, N = 10, 20
        yield synth_table(M, N, seed, 0.1 + 0.3 * (seed % 4) / 3, n_fd=1 + seed % 3, year=2000 + seed)


def test_criterion_1_open2_fixture():
    t = make_open2()
    dec = decompose_exports(t, "A")
    ind = gvc_indices(t).for_country("A")
    tol = 1e-4
    checks = [
        ("DDC", abs(dec.ddc[0] - 16.25) <= tol),
        ("IDC", abs(dec.idc[0]) <= tol),
        ("RIM", abs(dec.rim[0] - 0.44725) <= tol),
        ("FVA", abs(dec.fva[0] - 3.30275) <= tol),
        ("sum=EXGR", abs(dec.ddc[0] + dec.idc[0] + dec.rim[0] + dec.fva[0] - 20.0) <= tol),
        ("backward", abs(ind["backward"] - 0.16514) <= tol),
        ("forward", abs(ind["forward"] - 0.11927) <= tol),
        ("participation", abs(ind["participation"] - 0.28441) <= tol),
        ("position", abs(ind["position"] - (-0.04019)) <= tol),
    ]
    _record(1, checks, f"position {ind['position']:.6f}")


def test_criterion_2_closed2_fixture():
    t = make_closed2()
    cs = coefficients(t)
    G = va_embodied(t, cs)
    checks = [
        ("L", np.abs(cs.L - [[1.3333, 0.6667], [0.2222, 1.7778]]).max() <= 1e-4),
        ("vcL column sums", np.abs(cs.vcL.sum(axis=0) - 1.0).max() <= 1e-9),
        ("G row sums", np.abs(G.sum(axis=1) - t.va).max() <= 1e-9),
    ]
    _record(2, checks)


def test_criterion_3_and_4_property_suite():
    start = time.perf_counter()
    worst = dict(identity=0.0, leontief=0.0, exhaustion=0.0, jobs=0.0, series=0.0)
    series_tables = 0
    count = 0
    largest = (0, 0)
    for t in _synth_grid():
        count += 1
        largest = max(largest, (t.M, t.N))
        cs = coefficients(t)
        flows = gross_exports(t)
        for dec in decompose_all(t, cs, flows):
            total = dec.ddc + dec.idc + dec.rim + dec.fva
            scale = np.maximum(np.abs(dec.exgr), 1e-300)
            rel = np.where(dec.exgr != 0, np.abs(total - dec.exgr) / scale, np.abs(total))
            worst["identity"] = max(worst["identity"], rel.max(initial=0.0))
        f_total = t.F.sum(axis=1)
        worst["leontief"] = max(worst["leontief"], (np.abs(cs.L @ f_total - t.x) / t.x).max())
        G = va_embodied(t, cs)
        fd = t.F.sum(axis=0)
        worst["exhaustion"] = max(worst["exhaustion"], np.abs(cs.vcL.sum(axis=0) - 1.0).max(),
                                  (np.abs(G.sum(axis=0) - fd) / fd).max())
        sea = synth_sea(t, count)
        jobs = jobs_by_destination(t, sea)
        worst["jobs"] = max(worst["jobs"], abs(jobs.sum() - sea.emp.sum()) / sea.emp.sum())
        if cs.rho <= 0.9:
            series_tables += 1
            worst["series"] = max(worst["series"], np.abs(cs.L - power_series(np.asarray(cs.A), 200)).max())
    elapsed = time.perf_counter() - start
    checks3 = [
        (">=100 tables", count >= 100),
        ("10x20 covered", largest == (10, 20)),
        ("decomposition identity 1e-8", worst["identity"] <= 1e-8),
        ("L f = x 1e-9", worst["leontief"] <= 1e-9),
        ("multiplier exhaustion 1e-9", worst["exhaustion"] <= 1e-9),
        ("world jobs 1e-9", worst["jobs"] <= 1e-9),
        ("< 60 s", elapsed < 60.0),
    ]
    detail = (f"{count} tables in {elapsed:.1f} s; worst identity {worst['identity']:.1e}, "
              f"Lf=x {worst['leontief']:.1e}, exhaustion {worst['exhaustion']:.1e}, jobs {worst['jobs']:.1e}")
    try:
        _record(3, checks3, detail)
    finally:
        _record(4, [("power series 1e-8", worst["series"] <= 1e-8), ("tables checked", series_tables == count)],
                f"{series_tables} tables, worst {worst['series']:.1e}")


def test_criterion_5_network_suite():
    triad = FlowNetwork("abc", np.ones((3, 3)) - np.eye(3))
    chain = FlowNetwork("abc", np.array([[0, 1, 0], [0, 0, 1], [0, 0, 0]], dtype=float))
    rng = np.random.default_rng(5)
    checks = [
        ("triad clustering 1", np.abs(clustering(triad) - 1.0).max() <= 1e-12),
        ("chain clustering 0", (clustering(chain) == 0).all()),
    ]
    worst_resid = 0.0
    for k in range(20):
        W = rng.uniform(0, 1, (6, 6)) * (rng.random((6, 6)) < 0.7)
        np.fill_diagonal(W, 0.0)
        net = FlowNetwork([f"n{i}" for i in range(6)], W)
        alpha = float(rng.uniform(0.5, 3))
        b0 = bonacich(net, alpha, 0.0)
        out = W.sum(axis=1)
        checks.append((f"bonacich beta=0 #{k}", np.array_equal(b0, alpha * out)))
        if W.any():
            eig = eigenvector_centrality(net)
            worst_resid = max(worst_resid, np.abs(W.T @ eig.scores - eig.eigenvalue * eig.scores).max())
        perm = rng.permutation(6)
        beta = 0.3 / max(np.abs(np.linalg.eigvals(W)).max(), 1e-9)
        a = network_metrics(net, beta=beta)
        b = network_metrics(net.permuted(perm), beta=beta)
        same = all(np.allclose(getattr(b, f), getattr(a, f)[perm], rtol=1e-9, atol=1e-12, equal_nan=True)
                   for f in ("in_strength", "out_strength", "closeness_in", "closeness_out", "bonacich",
                             "eigenvector", "clustering"))
        checks.append((f"relabeling #{k}", same))
    checks.append(("eigen residual < 1e-9", worst_resid < 1e-9))
    _record(5, checks, f"worst eigen residual {worst_resid:.1e}")


def _fe_panel(units, periods, seed, noise):
    rng = np.random.default_rng(seed)
    rows = []
    fx = rng.normal(0, 3, units)
    tx = rng.normal(0, 1, periods)
    for u in range(units):
        for t in range(periods):
            x0, x1 = rng.normal(size=2)
            rows.append((u, t, 3.0 * x0 - 1.0 * x1 + fx[u] + tx[t] + noise * rng.normal(), x0, x1))
    return PanelDataset(pd.DataFrame(rows, columns=["unit", "time", "y", "x0", "x1"]))


def test_criterion_6_regression_suite():
    checks = []
    for units, periods in ((3, 4), (10, 6)):
        for fe in (("unit",), ("unit", "time")):
            p = _fe_panel(units, periods, units, 1.0)
            res = fit(p, RegressionSpec("y", ("x0", "x1"), fixed_effects=fe))
            beta, se = dummy_ols(p.data["y"].to_numpy(), p.data[["x0", "x1"]].to_numpy(),
                                 [p.data[f].to_numpy() for f in fe])
            tag = f"{units}x{periods} {'+'.join(fe)}"
            checks.append((f"FWL coef {tag}", np.abs(res.coef - beta).max() <= 1e-8))
            checks.append((f"FWL se {tag}", np.abs(res.se - se).max() <= 1e-8))

    rows = [(u, t, 3.0 * x + e, x) for u, e in enumerate((1.0, 5.0, 9.0))
            for t, x in enumerate(np.random.default_rng(u).normal(size=4))]
    p = PanelDataset(pd.DataFrame(rows, columns=["unit", "time", "y", "x"]))
    res = fit(p, RegressionSpec("y", ("x",), fixed_effects=("unit",)))
    checks.append(("beta = 3 known-coefficient", abs(res.coef[0] - 3.0) <= 1e-9))
    noiseless = fit(_fe_panel(6, 5, 1, 0.0), RegressionSpec("y", ("x0", "x1"), fixed_effects=("unit", "time")))
    checks.append(("two-way noiseless recovery", np.abs(noiseless.coef - [3.0, -1.0]).max() <= 1e-9))

    p = _fe_panel(8, 5, 2, 1.0)
    spec = RegressionSpec("y", ("x0", "x1"), fixed_effects=("unit", "time"))
    base = fit(p, spec)
    df = p.data.copy()
    df["x0"] = 7.5 * df["x0"] - 4.0
    moved = fit(PanelDataset(df), spec)
    checks.append(("scale invariance", abs(moved.coef[0] - base.coef[0] / 7.5) <= 1e-10 * abs(base.coef[0])))
    checks.append(("location invariance", abs(moved.coef[1] - base.coef[1]) <= 1e-10 * abs(base.coef[1])))

    t = template("exgr_growth")
    checks.append(("template exgr_growth", (
        t.dependent == Term("EXGR", "dlog")
        and t.regressors == tuple(Term(v, "dlog") for v in ("EXGR_DDC", "EXGR_IDC", "EXGR_RIM", "EXGR_FVA"))
        and t.interactions == ()
        and set(t.fixed_effects) == {"sector", "year"}
    )))
    _record(6, checks)


def test_criterion_7_performance():
    t = synth_table(40, 35, 2024, 0.2)
    start = time.perf_counter()
    cs = coefficients(t)
    flows = gross_exports(t)
    decs = decompose_all(t, cs, flows)
    gvc_indices(t, cs, flows, decs)
    net = build_network(t, "country", "dva_in_exports", cs, normalize=True)
    network_metrics(net)
    elapsed = time.perf_counter() - start
    # whole-process peak, which bounds the pipeline's own footprint from above
    peak_gb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024 ** 2
    _record(7, [("1400x1400", t.n == 1400), ("< 10 s", elapsed < 10.0), ("< 2 GB", peak_gb < 2.0)],
            f"{elapsed:.2f} s, process peak RSS {peak_gb:.2f} GB")


def _pipeline(data, out, jobs):
    common = ["--data-dir", str(data), "--out-dir", str(out), "--format", "csv,json", "--jobs", str(jobs)]
    codes = [
        run(["validate", *common]),
        run(["coeffs", "--matrices", *common]),
        run(["decompose", *common]),
        run(["indices", *common]),
        run(["network", "--dot", str(out / "net.dot"), *common]),
        run(["network", "--level", "country-sector", "--flow", "gross_exports", *common]),
        run(["jobs", *common]),
    ]
    return codes


def _tree(root):
    return sorted(str(p.relative_to(root)) for p in Path(root).rglob("*") if p.is_file())


def test_criterion_8_determinism(tmp_path):
    data = tmp_path / "data"
    assert run(["synth", "--countries", "4", "--sectors", "3", "--seed", "8", "--year", "2010",
                "--year", "2011", "--data-dir", str(data)]) == 0
    a, b = tmp_path / "run_a", tmp_path / "run_b"
    codes_a = _pipeline(data, a, 1)
    codes_b = _pipeline(data, b, 3)
    files_a, files_b = _tree(a), _tree(b)
    identical = files_a == files_b and all(filecmp.cmp(a / f, b / f, shallow=False) for f in files_a)
    _record(8, [("exit codes 0", codes_a == codes_b == [0] * len(codes_a)), ("byte-identical trees", identical),
                ("manifest present", "manifest.json" in files_a)], f"{len(files_a)} files")


def test_criterion_9_external_india_extract():
    root = os.environ.get("GVC_TIVA_INDIA_DIR")
    if not root:
        ACCEPTANCE_LINES.append("criterion 9: SKIP (optional; set GVC_TIVA_INDIA_DIR to run)")
        pytest.skip("no external extract")
    d = Path(root)
    t = load_table(d / "z.csv", d / "f.csv", d / "va.csv", 2011, sparse_zeros=True)
    back = gvc_indices(t, coefficients(t, 1e-3)).for_country("IND")["backward"]
    _record(9, [("backward in [0.20, 0.28]", 0.20 <= back <= 0.28)], f"backward {back:.4f}")
