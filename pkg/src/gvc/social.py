"""Labour content of trade and social-upgrading descriptives."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from gvc.errors import TableFormatError
from gvc.icio import coefficients
from gvc.tiva import gross_exports

SKILLS = ("low", "med", "high")
SEA_COLUMNS = ["year", "country", "sector", "variable", "value"]
EMP_VARS = ("EMP_LOW", "EMP_MED", "EMP_HIGH")
COMP_VARS = ("COMP_LOW", "COMP_MED", "COMP_HIGH")
SEA_VARS = EMP_VARS + COMP_VARS + ("CAP",)


@dataclass(frozen=True, eq=False)
class SocioEconomicAccounts:
    """Employment and compensation by skill for every producer of a table.

    ``emp`` and ``comp`` are (n, 3) in low/med/high order; ``unit`` records
    whether employment is persons or hours.
    """

    emp: np.ndarray
    comp: np.ndarray
    cap: np.ndarray
    unit: str = "persons"

    def __post_init__(self):
        for name in ("emp", "comp", "cap"):
            a = np.array(getattr(self, name), dtype=np.float64, copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.emp.shape != self.comp.shape or self.emp.shape[1:] != (3,) or self.cap.shape != self.emp.shape[:1]:
            raise ValueError("emp and comp must be (n, 3) and cap length n")

    def check(self, table, tol=1e-6):
        """Producers whose compensation exceeds value added (beyond ``tol`` relative)."""
        total = self.comp.sum(axis=1) + self.cap
        scale = np.maximum(np.abs(table.va), 1.0)
        return [table.labels()[i] for i in np.nonzero(total - table.va > tol * scale)[0]]


def load_sea(path, table, *, sparse_zeros=False, unit="persons"):
    """Read the long SEA CSV for ``table.year`` aligned to the table's ordering."""
    df = pd.read_csv(path, dtype={"country": str, "sector": str, "variable": str}, keep_default_na=False,
                     na_values={"value": [""]}, float_precision="round_trip")
    missing = [c for c in SEA_COLUMNS if c not in df.columns]
    if missing:
        raise TableFormatError(f"{path}: missing columns {missing}")
    df = df[df["year"].astype(int) == table.year]
    bad = set(df["variable"]) - set(SEA_VARS)
    if bad:
        raise TableFormatError(f"{path}: unknown SEA variables {sorted(bad)}")
    if df.duplicated(subset=["country", "sector", "variable"]).any():
        raise TableFormatError(f"{path}: duplicate (country, sector, variable) rows")
    idx = {lab: k for k, lab in enumerate(table.labels())}
    var = {v: k for k, v in enumerate(SEA_VARS)}
    out = np.full((table.n, len(SEA_VARS)), np.nan)
    for c, s, v, val in df[["country", "sector", "variable", "value"]].itertuples(index=False):
        try:
            out[idx[(c, s)], var[v]] = float(val)
        except KeyError:
            raise TableFormatError(f"{path}: {c}/{s} is not a producer of the table") from None
    if np.isnan(out).any():
        if not sparse_zeros:
            raise TableFormatError(f"{path}: {int(np.isnan(out).sum())} missing SEA cell(s) for {table.year}")
        out = np.nan_to_num(out)
    if (out < 0).any():
        raise TableFormatError(f"{path}: negative SEA values")
    return SocioEconomicAccounts(out[:, :3], out[:, 3:6], out[:, 6], unit)


def sea_long_frame(sea, table):
    rows = []
    for k, (c, s) in enumerate(table.labels()):
        vals = list(sea.emp[k]) + list(sea.comp[k]) + [sea.cap[k]]
        rows += [(table.year, c, s, v, float(val)) for v, val in zip(SEA_VARS, vals)]
    return pd.DataFrame(rows, columns=SEA_COLUMNS)


def write_sea(sea, table, path):
    sea_long_frame(sea, table).to_csv(Path(path), index=False, lineterminator="\n")


def synth_sea(table, seed=0):
    """Plausible SEA for a table: jobs proportional to output, compensation a share of value added."""
    rng = np.random.default_rng(seed)
    jobs_per_output = rng.uniform(0.005, 0.05, table.n)
    skill = rng.dirichlet(np.ones(3), table.n)
    emp = (jobs_per_output * table.x)[:, None] * skill
    labor_share = rng.uniform(0.3, 0.7, table.n)
    comp_skill = rng.dirichlet(np.ones(3), table.n)
    comp = (labor_share * table.va)[:, None] * comp_skill
    cap = table.va - comp.sum(axis=1)
    return SocioEconomicAccounts(emp, comp, cap)


# ---------------------------------------------------------------------------
# Direct measures
# ---------------------------------------------------------------------------

def labor_coefficients(table, sea):
    """Jobs per unit of output by skill, and the zero-output flag (coefficient 0 there)."""
    zero = table.x == 0
    safe = np.where(zero, 1.0, table.x)
    e = np.where(zero[:, None], 0.0, sea.emp / safe[:, None])
    return e, zero


def _setup(table, cs, flows):
    return (cs if cs is not None else coefficients(table),
            flows if flows is not None else gross_exports(table))


def jobs_in_exports(table, sea, country, cs=None, flows=None):
    """(N, 3) jobs in each sector of ``country`` sustained by the country's own gross exports."""
    cs, flows = _setup(table, cs, flows)
    d = table.rows(country)
    e, _ = labor_coefficients(table, sea)
    output = cs.L[d, d] @ flows.E[d]
    return e[d] * output[:, None]


def jobs_foreign_final_demand(table, sea, country, cs=None):
    """(N, 3) jobs in each sector of ``country`` sustained by final demand of all other countries."""
    cs = cs if cs is not None else coefficients(table)
    d = table.rows(country)
    foreign_cols = np.ones(table.M * table.K, dtype=bool)
    foreign_cols[table.fd_columns(country)] = False
    f_foreign = table.F[:, foreign_cols].sum(axis=1)
    e, _ = labor_coefficients(table, sea)
    return e[d] * (cs.L[d] @ f_foreign)[:, None]


def jobs_by_destination(table, sea, cs=None):
    """(n, M) jobs at each producer sustained by each destination's final demand (all skills)."""
    cs = cs if cs is not None else coefficients(table)
    e, _ = labor_coefficients(table, sea)
    return e.sum(axis=1)[:, None] * (cs.L @ table.final_demand_by_country())


def wage_component_of_dva(table, sea, country, cs=None, flows=None):
    """Labour compensation embodied in each exporting sector's domestic value added."""
    cs, flows = _setup(table, cs, flows)
    d = table.rows(country)
    zero = table.x == 0
    lc = np.where(zero, 0.0, sea.comp.sum(axis=1) / np.where(zero, 1.0, table.x))
    return (lc[d] @ cs.L[d, d]) * flows.E[d]


@dataclass(frozen=True, eq=False)
class LaborContent:
    country: str
    sectors: tuple
    jobs_exports: np.ndarray
    jobs_foreign_fd: np.ndarray
    wage_dva: np.ndarray
    dva: np.ndarray
    unit: str

    @property
    def labor_share(self):
        out = np.full(self.dva.shape, np.nan)
        np.divide(self.wage_dva, self.dva, out=out, where=self.dva != 0)
        return out

    COLUMNS = ("country", "sector", "skill", "jobs_in_exports", "jobs_foreign_final_demand",
               "wage_dva", "labor_share_dva")

    def rows(self):
        out = []
        share = self.labor_share
        for k, s in enumerate(self.sectors):
            for j, skill in enumerate(SKILLS):
                out.append((self.country, s, skill, self.jobs_exports[k, j], self.jobs_foreign_fd[k, j], None, None))
            out.append((self.country, s, "total", self.jobs_exports[k].sum(), self.jobs_foreign_fd[k].sum(),
                        self.wage_dva[k], share[k]))
        return out


def labor_content(table, sea, country, cs=None, flows=None):
    cs, flows = _setup(table, cs, flows)
    d = table.rows(country)
    dva = cs.vcL[d, d].sum(axis=0) * flows.E[d]
    return LaborContent(
        country=country,
        sectors=table.sectors,
        jobs_exports=jobs_in_exports(table, sea, country, cs, flows),
        jobs_foreign_fd=jobs_foreign_final_demand(table, sea, country, cs),
        wage_dva=wage_component_of_dva(table, sea, country, cs, flows),
        dva=dva,
        unit=sea.unit,
    )


# ---------------------------------------------------------------------------
# Descriptives
# ---------------------------------------------------------------------------

def sea_frame(tables, seas, country):
    """Long frame ``year, sector, employees, wages, va`` for one country."""
    rows = []
    for table, sea in zip(tables, seas):
        d = table.rows(country)
        for k, s in enumerate(table.sectors):
            rows.append({
                "year": table.year, "sector": s,
                "employees": sea.emp[d][k].sum(), "wages": sea.comp[d][k].sum(), "va": table.va[d][k],
            })
    return pd.DataFrame(rows)


def _growth(series):
    prev = series.shift(1)
    return np.where(prev != 0, series / prev - 1.0, np.nan)


def upgrading_descriptives(frame, groups):
    """Employees, wage bill, wage rate and labour share per sector group and year.

    ``groups`` maps a group name to its sectors (a plain list is one group
    named ``all``). Growth columns compare each year with the previous one.
    """
    if not isinstance(groups, dict):
        groups = {"all": list(groups)}
    out = []
    for name, sectors in groups.items():
        sub = frame[frame["sector"].isin(sectors)]
        agg = sub.groupby("year", sort=True)[["employees", "wages", "va"]].sum().reset_index()
        agg = agg.rename(columns={"wages": "wage_bill"})
        agg["wage_rate"] = np.where(agg["employees"] != 0, agg["wage_bill"] / agg["employees"].where(agg["employees"] != 0, 1), np.nan)
        agg["labor_share"] = np.where(agg["va"] != 0, agg["wage_bill"] / agg["va"].where(agg["va"] != 0, 1), np.nan)
        for col in ("employees", "wage_bill", "wage_rate", "labor_share"):
            agg[f"{col}_growth"] = _growth(agg[col])
        agg.insert(0, "group", name)
        out.append(agg)
    return pd.concat(out, ignore_index=True) if out else pd.DataFrame()
