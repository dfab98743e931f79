"""Trade in value added: export decomposition and GVC indices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from gvc.errors import GvcError, NonProductive
from gvc.icio import coefficients
from gvc.linalg import inverse_of_identity_minus

APL_THRESHOLD = 1e-12
UPSTREAMNESS_RESIDUAL = 1e-9


@dataclass(frozen=True, eq=False)
class ExportFlows:
    """Gross exports per producer.

    ``bilateral[i, d]`` is what producer i sells to country d (zero for its own
    country); ``E`` is its row sum, split into ``intermediate`` and ``final``.
    """

    E: np.ndarray
    intermediate: np.ndarray
    final: np.ndarray
    bilateral: np.ndarray

    def by_country(self, table):
        """(M, M) matrix of country-to-country gross exports."""
        return self.bilateral.reshape(table.M, table.N, table.M).sum(axis=1)


def gross_exports(table):
    owner = table.country_of()
    M, N = table.M, table.N
    Zc = table.Z.reshape(table.n, M, N).sum(axis=2)
    Fc = table.final_demand_by_country()
    own = owner[:, None] == np.arange(M)[None, :]
    Zc = np.where(own, 0.0, Zc)
    Fc = np.where(own, 0.0, Fc)
    return ExportFlows(
        E=Zc.sum(axis=1) + Fc.sum(axis=1),
        intermediate=Zc.sum(axis=1),
        final=Fc.sum(axis=1),
        bilateral=Zc + Fc,
    )


@dataclass(frozen=True, eq=False)
class ExportDecomposition:
    """Value-added split of one country's gross exports, per exporting sector.

    ``dvx`` is indexed by the originating domestic sector: its value added
    embodied in other countries' gross exports.
    """

    country: str
    sectors: tuple
    exgr: np.ndarray
    ddc: np.ndarray
    idc: np.ndarray
    rim: np.ndarray
    fva: np.ndarray
    dvx: np.ndarray

    @property
    def dva(self):
        return self.ddc + self.idc + self.rim

    COLUMNS = ("country", "sector", "exgr", "ddc", "idc", "rim", "fva", "dva", "dvx")

    def rows(self):
        dva = self.dva
        return [
            (self.country, s, self.exgr[k], self.ddc[k], self.idc[k], self.rim[k], self.fva[k], dva[k], self.dvx[k])
            for k, s in enumerate(self.sectors)
        ]

    def totals(self):
        return {
            "exgr": float(self.exgr.sum()),
            "ddc": float(self.ddc.sum()),
            "idc": float(self.idc.sum()),
            "rim": float(self.rim.sum()),
            "fva": float(self.fva.sum()),
            "dva": float(self.dva.sum()),
            "dvx": float(self.dvx.sum()),
        }


def _context(table, cs, flows):
    cs = cs if cs is not None else coefficients(table)
    flows = flows if flows is not None else gross_exports(table)
    return cs, flows


def dvx(table, country, cs=None, flows=None):
    """Domestic value added of each sector of ``country`` in foreign gross exports."""
    cs, flows = _context(table, cs, flows)
    d = table.rows(country)
    E = flows.E
    through_all = cs.L[d] @ E
    through_home = cs.L[d, d] @ E[d]
    return cs.vc[d] * (through_all - through_home)


def decompose_exports(table, country, cs=None, flows=None):
    """Split each sector's gross exports into DDC, IDC, RIM and FVA.

    DDC and IDC come from the domestic-only Leontief inverse of the country's
    own block (own sector vs other domestic sectors), RIM is the gap between
    the global and the domestic inverse on domestic rows, FVA is the foreign
    rows of the global value-added multipliers.
    """
    cs, flows = _context(table, cs, flows)
    d = table.rows(country)
    E = flows.E[d]
    vc = cs.vc[d]
    L_dd = inverse_of_identity_minus(cs.A[d, d], f"I - A_dd ({country})")
    local = vc[:, None] * L_dd
    own = np.diag(local).copy()
    domestic_global = cs.vcL[d, d].sum(axis=0)
    total = cs.vcL[:, d].sum(axis=0)
    return ExportDecomposition(
        country=country,
        sectors=table.sectors,
        exgr=E.copy(),
        ddc=own * E,
        idc=(local.sum(axis=0) - own) * E,
        rim=(domestic_global - local.sum(axis=0)) * E,
        fva=(total - domestic_global) * E,
        dvx=dvx(table, country, cs, flows),
    )


def decompose_all(table, cs=None, flows=None):
    cs, flows = _context(table, cs, flows)
    return [decompose_exports(table, c, cs, flows) for c in table.countries]


# ---------------------------------------------------------------------------
# Chain length and position
# ---------------------------------------------------------------------------

def production_stages(cs):
    """Backward stages embodied in each producer's output: column sums of L."""
    if cs.rho >= 1.0:
        raise NonProductive(cs.rho, "A")
    return cs.L.sum(axis=0)


def upstreamness(cs):
    """Distance to final demand: U solving U = 1 + B U, i.e. row sums of the Ghosh inverse."""
    if cs.rho_B >= 1.0:
        raise NonProductive(cs.rho_B, "B")
    U = cs.Gh.sum(axis=1)
    resid = np.abs(U - 1.0 - cs.B @ U).max(initial=0.0)
    if resid > UPSTREAMNESS_RESIDUAL * max(1.0, U.max(initial=1.0)):
        raise GvcError(f"upstreamness fixed-point residual {resid:.3g} exceeds tolerance")
    return U


def average_propagation_length(cs):
    """Average number of stages between producers i and j; NaN where no indirect link."""
    L = cs.L
    n = L.shape[0]
    num = L @ (L - np.eye(n))
    den = L - np.eye(n)
    out = np.full((n, n), np.nan)
    ok = np.abs(den) >= APL_THRESHOLD
    out[ok] = num[ok] / den[ok]
    return out


# ---------------------------------------------------------------------------
# Indices
# ---------------------------------------------------------------------------

def _ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.full(np.broadcast(num, den).shape, np.nan)
    ok = den != 0
    np.divide(num, den, out=out, where=ok)
    return out


def _position(forward, backward):
    return np.log1p(forward) - np.log1p(backward)


@dataclass(frozen=True, eq=False)
class GvcIndices:
    """Participation, position and length indices.

    Country-level arrays have length M, sector-level arrays length M*N.
    Shares are NaN where gross exports are zero. ``stages`` and
    ``upstreamness`` at country level are output-weighted averages.
    """

    countries: tuple
    labels: list
    exgr: np.ndarray
    fva: np.ndarray
    dvx: np.ndarray
    backward: np.ndarray
    forward: np.ndarray
    participation: np.ndarray
    position: np.ndarray
    stages: np.ndarray
    upstreamness: np.ndarray
    sector_exgr: np.ndarray
    sector_backward: np.ndarray
    sector_forward: np.ndarray
    sector_participation: np.ndarray
    sector_position: np.ndarray
    sector_stages: np.ndarray
    sector_upstreamness: np.ndarray
    apl_mean: float
    apl_defined_share: float

    COUNTRY_COLUMNS = ("country", "exgr", "fva", "dvx", "backward", "forward", "participation",
                       "position", "stages", "upstreamness")
    SECTOR_COLUMNS = ("country", "sector", "exgr", "backward", "forward", "participation", "position",
                      "stages", "upstreamness")

    def country_rows(self):
        return [
            (c, self.exgr[k], self.fva[k], self.dvx[k], self.backward[k], self.forward[k],
             self.participation[k], self.position[k], self.stages[k], self.upstreamness[k])
            for k, c in enumerate(self.countries)
        ]

    def sector_rows(self):
        return [
            (c, s, self.sector_exgr[k], self.sector_backward[k], self.sector_forward[k],
             self.sector_participation[k], self.sector_position[k], self.sector_stages[k],
             self.sector_upstreamness[k])
            for k, (c, s) in enumerate(self.labels)
        ]

    def for_country(self, code):
        k = self.countries.index(code)
        row = self.country_rows()[k]
        return {name: (float(v) if isinstance(v, np.floating) else v) for name, v in zip(self.COUNTRY_COLUMNS, row)}


def gvc_indices(table, cs=None, flows=None, decompositions=None):
    cs, flows = _context(table, cs, flows)
    decs = decompositions if decompositions is not None else decompose_all(table, cs, flows)
    s_exgr = np.concatenate([d.exgr for d in decs])
    s_fva = np.concatenate([d.fva for d in decs])
    s_dvx = np.concatenate([d.dvx for d in decs])
    exgr = np.array([d.exgr.sum() for d in decs])
    fva = np.array([d.fva.sum() for d in decs])
    dvx_c = np.array([d.dvx.sum() for d in decs])

    back, fwd = _ratio(fva, exgr), _ratio(dvx_c, exgr)
    s_back, s_fwd = _ratio(s_fva, s_exgr), _ratio(s_dvx, s_exgr)

    N_ = production_stages(cs)
    U = upstreamness(cs)
    x = table.x.reshape(table.M, table.N)
    w = x.sum(axis=1)
    stages_c = _ratio((N_.reshape(table.M, table.N) * x).sum(axis=1), w)
    ups_c = _ratio((U.reshape(table.M, table.N) * x).sum(axis=1), w)

    apl = average_propagation_length(cs)
    defined = np.isfinite(apl)
    return GvcIndices(
        countries=table.countries,
        labels=table.labels(),
        exgr=exgr,
        fva=fva,
        dvx=dvx_c,
        backward=back,
        forward=fwd,
        participation=back + fwd,
        position=_position(fwd, back),
        stages=stages_c,
        upstreamness=ups_c,
        sector_exgr=s_exgr,
        sector_backward=s_back,
        sector_forward=s_fwd,
        sector_participation=s_back + s_fwd,
        sector_position=_position(s_fwd, s_back),
        sector_stages=N_,
        sector_upstreamness=U,
        apl_mean=float(apl[defined].mean()) if defined.any() else float("nan"),
        apl_defined_share=float(defined.mean()) if apl.size else 0.0,
    )


# ---------------------------------------------------------------------------
# Gross trade records
# ---------------------------------------------------------------------------

TRADE_COLUMNS = ["year", "reporter", "partner", "product", "flow", "value"]
CATEGORIES = ("intermediate", "final", "capital")


class UnmappedProducts(GvcError):
    def __init__(self, codes):
        self.codes = sorted(codes)
        super().__init__("products without a category: " + ", ".join(self.codes))


def read_trade_records(path):
    df = pd.read_csv(path, dtype={"reporter": str, "partner": str, "product": str, "flow": str},
                     keep_default_na=False)
    missing = [c for c in TRADE_COLUMNS if c not in df.columns]
    if missing:
        raise GvcError(f"{path}: missing columns {missing}")
    bad = set(df["flow"]) - {"X", "M"}
    if bad:
        raise GvcError(f"{path}: flow must be X or M, got {sorted(bad)}")
    return df[TRADE_COLUMNS]


def read_category_map(path):
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    if list(df.columns[:2]) != ["product", "category"]:
        raise GvcError(f"{path}: expected header product,category")
    bad = set(df["category"]) - set(CATEGORIES)
    if bad:
        raise GvcError(f"{path}: unknown categories {sorted(bad)}")
    return dict(zip(df["product"], df["category"]))


def intermediate_shares(records, category_map):
    """Share of intermediates in gross trade by reporter, partner and flow.

    Rows with ``partner == "ALL"`` aggregate over partners. Shares are NaN
    where total trade is zero.
    """
    df = pd.DataFrame(records)[TRADE_COLUMNS].copy()
    unmapped = set(df["product"]) - set(category_map)
    if unmapped:
        raise UnmappedProducts(unmapped)
    df["inter"] = np.where(df["product"].map(category_map) == "intermediate", df["value"], 0.0)
    keys = ["year", "reporter", "partner", "flow"]
    by_partner = df.groupby(keys, sort=True)[["inter", "value"]].sum().reset_index()
    total = df.groupby(["year", "reporter", "flow"], sort=True)[["inter", "value"]].sum().reset_index()
    total["partner"] = "ALL"
    out = pd.concat([by_partner, total[keys + ["inter", "value"]]], ignore_index=True)
    out["share"] = _ratio(out["inter"].to_numpy(float), out["value"].to_numpy(float))
    out = out.rename(columns={"inter": "intermediate_value", "value": "total_value"})
    return out.sort_values(keys, kind="mergesort").reset_index(drop=True)[
        keys + ["intermediate_value", "total_value", "share"]
    ]
