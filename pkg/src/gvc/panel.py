"""Fixed-effects panel regressions for GVC drivers and outcomes."""
from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import scipy.linalg as sla
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from gvc import kernels
from gvc.errors import EmptyAfterTransform, GvcError, NonBinaryDependent, RankDeficient, UnknownTemplate

TRANSFORMS = ("none", "log", "dlog")
DEMEAN_TOL = 1e-10
MAX_SWEEPS = 100
RANK_TOL = 1e-10


@dataclass(frozen=True)
class Term:
    """A panel variable with an optional log or log-difference transform."""

    name: str
    transform: str = "none"

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValueError(f"transform must be one of {TRANSFORMS}")

    def __str__(self):
        return self.name if self.transform == "none" else f"{self.transform}({self.name})"

    @classmethod
    def parse(cls, text):
        if isinstance(text, Term):
            return text
        m = re.fullmatch(r"\s*(log|dlog)\((.+)\)\s*", text)
        return cls(m.group(2).strip(), m.group(1)) if m else cls(text.strip())

    def renamed(self, mapping):
        return Term(mapping.get(self.name, self.name), self.transform)


@dataclass(frozen=True)
class RegressionSpec:
    dependent: Term
    regressors: tuple = ()
    interactions: tuple = ()
    fixed_effects: tuple = ()
    cluster: str | None = None
    intercept: bool = True
    name: str = ""

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "dependent", Term.parse(self.dependent))
        set_(self, "regressors", tuple(Term.parse(t) for t in self.regressors))
        set_(self, "interactions", tuple((Term.parse(a), Term.parse(b)) for a, b in self.interactions))
        set_(self, "fixed_effects", tuple(self.fixed_effects))
        if self.dependent.name in {t.name for t in self.regressors}:
            raise ValueError(f"dependent variable {self.dependent.name!r} is also a regressor")
        if not self.regressors and not self.interactions:
            raise ValueError("a regression needs at least one regressor")

    def column_names(self):
        return [str(t) for t in self.regressors] + [f"{a}:{b}" for a, b in self.interactions]

    def variables(self):
        names = [self.dependent.name] + [t.name for t in self.regressors]
        for a, b in self.interactions:
            names += [a.name, b.name]
        return list(dict.fromkeys(names))

    def bind(self, mapping):
        """Rename placeholder variables (and fixed-effect/cluster columns) to panel columns."""
        return RegressionSpec(
            dependent=self.dependent.renamed(mapping),
            regressors=tuple(t.renamed(mapping) for t in self.regressors),
            interactions=tuple((a.renamed(mapping), b.renamed(mapping)) for a, b in self.interactions),
            fixed_effects=tuple(mapping.get(f, f) for f in self.fixed_effects),
            cluster=mapping.get(self.cluster, self.cluster) if self.cluster else None,
            intercept=self.intercept,
            name=self.name,
        )

    def to_dict(self):
        return {
            "name": self.name,
            "dependent": str(self.dependent),
            "regressors": [str(t) for t in self.regressors],
            "interactions": [[str(a), str(b)] for a, b in self.interactions],
            "fixed_effects": list(self.fixed_effects),
            "cluster": self.cluster,
        }


# ---------------------------------------------------------------------------
# Panels
# ---------------------------------------------------------------------------

@dataclass
class PanelDataset:
    """Long panel: one row per (unit, time)."""

    data: pd.DataFrame
    unit: str = "unit"
    time: str = "time"
    cluster: str | None = None
    log: dict = field(default_factory=dict)

    def __post_init__(self):
        for col in (self.unit, self.time):
            if col not in self.data.columns:
                raise GvcError(f"panel has no {col!r} column")
        dup = self.data.duplicated(subset=[self.unit, self.time])
        if dup.any():
            first = self.data.loc[dup, [self.unit, self.time]].iloc[0].tolist()
            raise GvcError(f"duplicate (unit, time) pair in panel: {first}")
        self.data = self.data.sort_values([self.unit, self.time], kind="mergesort").reset_index(drop=True)

    @property
    def variables(self):
        return [c for c in self.data.columns if c not in (self.unit, self.time)]

    def __len__(self):
        return len(self.data)

    @classmethod
    def from_csv(cls, path, unit="unit", time="time", cluster=None):
        df = pd.read_csv(path, dtype={unit: str})
        return cls(df, unit, time, cluster)


def _as_frame(source):
    if isinstance(source, PanelDataset):
        return source.data
    if isinstance(source, (str, Path)):
        return pd.read_csv(source)
    return pd.DataFrame(source)


def assemble_panel(sources, keys=("unit", "time")):
    """Inner-join sources on ``keys``; clashing variable names get a ``_<k>`` suffix."""
    keys = list(keys)
    frames = [_as_frame(s) for s in sources]
    if not frames:
        raise GvcError("no sources to assemble")
    merged = None
    taken = set(keys)
    for k, df in enumerate(frames, start=1):
        missing = [c for c in keys if c not in df.columns]
        if missing:
            raise GvcError(f"source {k} lacks key columns {missing}")
        rename = {}
        for col in df.columns:
            if col in keys:
                continue
            new, j = col, k
            while new in taken:
                new = f"{col}_{j}"
                j += 1
            rename[col] = new
            taken.add(new)
        df = df.rename(columns=rename)
        merged = df if merged is None else merged.merge(df, on=keys, how="inner")
    log = {
        "source_rows": [len(f) for f in frames],
        "retained": len(merged),
        "dropped": [len(f) - len(merged) for f in frames],
    }
    return PanelDataset(merged.reset_index(drop=True), keys[0], keys[1], log=log)


def decomposition_frame(decompositions):
    """Long frame (unit = sector, time = year) from ``{year: ExportDecomposition}``."""
    rows = []
    for year, dec in sorted(decompositions.items()):
        dva = dec.dva
        for k, s in enumerate(dec.sectors):
            rows.append({
                "unit": s, "time": year, "EXGR": dec.exgr[k], "EXGR_DDC": dec.ddc[k],
                "EXGR_IDC": dec.idc[k], "EXGR_RIM": dec.rim[k], "EXGR_FVA": dec.fva[k],
                "EXGR_DVA": dva[k], "DVX": dec.dvx[k],
            })
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RegressionResult:
    names: list
    coef: np.ndarray
    se: np.ndarray
    se_robust: np.ndarray
    se_cluster: np.ndarray | None
    r2_within: float
    nobs: int
    n_dropped: int
    dof: int
    absorbed: int
    spec: RegressionSpec
    fitted: np.ndarray = dataclasses.field(repr=False)
    residuals: np.ndarray = dataclasses.field(repr=False)
    drop_reasons: dict = dataclasses.field(default_factory=dict)
    diagnostics: dict = dataclasses.field(default_factory=dict)

    def params(self):
        return dict(zip(self.names, self.coef))

    def to_dict(self):
        out = {
            "spec": self.spec.to_dict(),
            "coefficients": {n: float(b) for n, b in zip(self.names, self.coef)},
            "se": {n: float(s) for n, s in zip(self.names, self.se)},
            "se_robust": {n: float(s) for n, s in zip(self.names, self.se_robust)},
            "r2_within": self.r2_within,
            "nobs": self.nobs,
            "dropped": self.n_dropped,
            "drop_reasons": dict(self.drop_reasons),
            "dof": self.dof,
            "absorbed_effects": self.absorbed,
            "diagnostics": dict(self.diagnostics),
        }
        if self.se_cluster is not None:
            out["se_cluster"] = {n: float(s) for n, s in zip(self.names, self.se_cluster)}
        return out


def _transform(df, term, unit, reasons):
    if term.name not in df.columns:
        raise GvcError(f"panel has no column {term.name!r}")
    v = pd.to_numeric(df[term.name], errors="coerce").to_numpy(float)
    if term.transform == "none":
        return v
    bad = ~(v > 0) & ~np.isnan(v)
    reasons["nonpositive"] |= bad
    with np.errstate(divide="ignore", invalid="ignore"):
        lv = np.where(v > 0, np.log(np.where(v > 0, v, 1.0)), np.nan)
    if term.transform == "log":
        return lv
    first = ~df[unit].duplicated(keep="first").to_numpy()
    reasons["dlog_first"] |= first
    prev = np.concatenate([[np.nan], lv[:-1]])
    return np.where(first, np.nan, lv - prev)


def _absorbed_count(codes, n_groups, n):
    if not codes:
        return 0
    if len(codes) == 1:
        return int(n_groups[0])
    if len(codes) == 2:
        g1, g2 = n_groups
        adj = coo_matrix((np.ones(n), (codes[0], codes[1] + g1)), shape=(g1 + g2, g1 + g2))
        ncomp, _ = connected_components(adj, directed=False)
        return int(g1 + g2 - ncomp)
    total = int(sum(n_groups))
    if n * total <= 20_000_000:
        D = np.zeros((n, total))
        off = 0
        for c, g in zip(codes, n_groups):
            D[np.arange(n), c + off] = 1.0
            off += g
        return int(np.linalg.matrix_rank(D))
    return total - (len(codes) - 1)


def _check_rank(X, names, raw_norms):
    norms = np.sqrt((X ** 2).sum(axis=0))
    constant = [names[k] for k in range(X.shape[1]) if norms[k] <= RANK_TOL * max(raw_norms[k], 1.0)]
    if constant:
        raise RankDeficient(constant)
    _, R, piv = sla.qr(X / norms, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int((d > RANK_TOL * 1e3 * d[0]).sum()) if d.size else 0
    if rank < X.shape[1]:
        raise RankDeficient([names[k] for k in piv[rank:]])


def fit(panel, spec):
    """OLS after absorbing the fixed effects by alternating within-demeaning."""
    df = panel.data
    unit = panel.unit
    reasons = {
        "missing": np.zeros(len(df), dtype=bool),
        "nonpositive": np.zeros(len(df), dtype=bool),
        "dlog_first": np.zeros(len(df), dtype=bool),
    }
    y = _transform(df, spec.dependent, unit, reasons)
    cols = [_transform(df, t, unit, reasons) for t in spec.regressors]
    for a, b in spec.interactions:
        cols.append(_transform(df, a, unit, reasons) * _transform(df, b, unit, reasons))
    names = spec.column_names()
    X = np.column_stack(cols) if cols else np.empty((len(df), 0))

    for fe in spec.fixed_effects:
        if fe not in df.columns:
            raise GvcError(f"panel has no fixed-effect column {fe!r}")
    cluster_col = spec.cluster or panel.cluster
    if cluster_col and cluster_col not in df.columns:
        raise GvcError(f"panel has no cluster column {cluster_col!r}")

    finite = np.isfinite(y) & np.isfinite(X).all(axis=1)
    reasons["missing"] = ~finite & ~reasons["nonpositive"] & ~reasons["dlog_first"]
    keep = finite
    counts = {k: int((v & ~keep).sum()) for k, v in reasons.items()}
    n_dropped = int((~keep).sum())
    if not keep.any():
        raise EmptyAfterTransform(f"no observations left for {spec.name or spec.dependent}")
    y, X = y[keep], X[keep]
    kept = df.loc[keep]
    n = len(y)

    codes, n_groups = [], []
    for fe in spec.fixed_effects:
        c, uniq = pd.factorize(kept[fe], sort=True)
        codes.append(c.astype(np.int_))
        n_groups.append(len(uniq))

    data = np.column_stack([y, X])
    demeaned, sweeps, change = kernels.demean(data, codes, n_groups, DEMEAN_TOL, MAX_SWEEPS)
    y_t, X_t = demeaned[:, 0], demeaned[:, 1:]
    absorbed = _absorbed_count(codes, n_groups, n)
    if not codes and spec.intercept:
        X_t = np.column_stack([np.ones(n), X_t])
        names = ["const"] + names

    raw = np.column_stack([np.ones(n), X]) if (not codes and spec.intercept) else X
    if np.abs(y_t).max(initial=0.0) <= RANK_TOL * max(np.abs(y).max(initial=0.0), 1.0):
        raise RankDeficient([f"{spec.dependent} (zero variance)"])
    _check_rank(X_t, names, np.sqrt((raw ** 2).sum(axis=0)))

    k = X_t.shape[1]
    dof = n - k - absorbed
    if dof <= 0:
        raise GvcError(f"no residual degrees of freedom (n={n}, k={k}, absorbed={absorbed})")
    beta, *_ = np.linalg.lstsq(X_t, y_t, rcond=None)
    resid = y_t - X_t @ beta
    XtX_inv = np.linalg.inv(X_t.T @ X_t)
    sigma2 = resid @ resid / dof
    se = np.sqrt(np.diag(XtX_inv) * sigma2)

    total_params = n - dof
    meat = (X_t * resid[:, None]).T @ (X_t * resid[:, None])
    se_robust = np.sqrt(np.diag(XtX_inv @ meat @ XtX_inv) * n / (n - total_params))

    se_cluster = None
    if cluster_col:
        g, uniq = pd.factorize(kept[cluster_col], sort=True)
        G = len(uniq)
        scores = np.zeros((G, k))
        np.add.at(scores, g, X_t * resid[:, None])
        V = XtX_inv @ (scores.T @ scores) @ XtX_inv
        factor = G / (G - 1) * (n - 1) / (n - total_params) if G > 1 else np.nan
        se_cluster = np.sqrt(np.diag(V) * factor)

    if codes:
        tss = y_t @ y_t
    elif spec.intercept:
        tss = ((y - y.mean()) ** 2).sum()
    else:
        tss = y @ y
    r2 = float(np.clip(1.0 - (resid @ resid) / tss, 0.0, 1.0)) if tss > 0 else 1.0

    return RegressionResult(
        names=names,
        coef=beta,
        se=se,
        se_robust=se_robust,
        se_cluster=se_cluster,
        r2_within=r2,
        nobs=n,
        n_dropped=n_dropped,
        dof=int(dof),
        absorbed=absorbed,
        spec=spec,
        fitted=y - resid,
        residuals=resid,
        drop_reasons=counts,
        diagnostics={"demean_sweeps": int(sweeps), "demean_max_change": float(change),
                     "backend": kernels.BACKEND},
    )


def fit_lpm_binary(panel, spec):
    """Linear probability model for a 0/1 dependent variable."""
    if spec.dependent.transform != "none":
        raise NonBinaryDependent("a binary dependent variable cannot be transformed")
    y = pd.to_numeric(panel.data[spec.dependent.name], errors="coerce").dropna()
    if not y.isin([0, 1]).all():
        raise NonBinaryDependent(f"{spec.dependent.name} takes values outside {{0, 1}}")
    res = fit(panel, spec)
    outside = float(((res.fitted < 0) | (res.fitted > 1)).mean())
    return dataclasses.replace(res, diagnostics={**res.diagnostics, "outside_unit_share": outside})


# ---------------------------------------------------------------------------
# Templates
# ---------------------------------------------------------------------------

SECTOR_FE = ("sector", "year")
FIRM_FE = ("firm", "sector", "year")

_TEMPLATES = {
    "exgr_growth": dict(
        dependent="dlog(EXGR)",
        regressors=("dlog(EXGR_DDC)", "dlog(EXGR_IDC)", "dlog(EXGR_RIM)", "dlog(EXGR_FVA)"),
        fixed_effects=SECTOR_FE,
    ),
    "sector_determinants": dict(
        dependent="log(gvcpart)",
        regressors=("epz", "open", "connect", "competitive", "invest", "domest"),
        fixed_effects=SECTOR_FE,
    ),
    "firm_entry": dict(
        dependent="gvc",
        regressors=("size", "age", "foreign", "skills", "productivity", "policy"),
        fixed_effects=FIRM_FE,
    ),
    "dva_backfwd": dict(
        dependent="dlog(EXGR_DVA)",
        regressors=("dlog(backward)", "dlog(forward)"),
        fixed_effects=SECTOR_FE,
    ),
    "dva_policy": dict(
        dependent="log(DVA)",
        regressors=("log(GVC)", "log(trade)", "log(capital)", "emp"),
        interactions=(("log(GVC)", "policy"),),
        fixed_effects=SECTOR_FE,
    ),
    "productivity_spillover": dict(
        dependent="log(LP)",
        regressors=("GVC", "log(capint)"),
        interactions=(("GVC", "MF"),),
        fixed_effects=FIRM_FE,
    ),
    "social_indirect": dict(
        dependent="labor_indicator",
        regressors=("GVC", "log(gdp)"),
        fixed_effects=("sector",),
    ),
}

TEMPLATE_IDS = tuple(_TEMPLATES)
BINARY_TEMPLATES = ("firm_entry",)


def template(template_id):
    try:
        kw = _TEMPLATES[template_id]
    except KeyError:
        raise UnknownTemplate(template_id) from None
    return RegressionSpec(name=template_id, **kw)


def adapt_fixed_effects(spec, panel):
    """Map placeholder fixed effects onto the panel's columns.

    ``year``/``time`` become the panel's time column and the template's entity
    dimension (its first fixed effect) the unit column; other dimensions the
    panel lacks are dropped. Returns the adapted spec and the dropped names.
    """
    cols = set(panel.data.columns)
    out, dropped = [], []
    for k, fe in enumerate(spec.fixed_effects):
        if fe in cols:
            target = fe
        elif fe in ("year", "time"):
            target = panel.time
        elif k == 0:
            target = panel.unit
        else:
            dropped.append(fe)
            continue
        if target not in out:
            out.append(target)
    return dataclasses.replace(spec, fixed_effects=tuple(out)), dropped
