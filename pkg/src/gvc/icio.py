"""Inter-country input-output tables: loading, balance checks and inverses.

All matrices use a country-major flat index: ``country_index * N + sector_index``.
Final-demand columns are laid out the same way with ``K`` categories per
destination country.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from gvc.errors import GvcError, NonProductive, TableFormatError, UnknownCountry
from gvc.linalg import inverse_of_identity_minus, perron_root

DEFAULT_TOL = 1e-6

Z_COLUMNS = ["year", "origin_country", "origin_sector", "dest_country", "dest_sector", "value"]
F_COLUMNS = ["year", "origin_country", "origin_sector", "dest_country", "fd_category", "value"]
VA_COLUMNS = ["year", "country", "sector", "value"]


class Unbalanced(GvcError):
    """Table fails its balance identities at the requested tolerance."""

    def __init__(self, report):
        super().__init__(
            f"table not balanced at tol={report.tol:g}: worst row {report.worst_row:.3g}, "
            f"worst column {report.worst_col:.3g}"
        )
        self.report = report


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class IcioTable:
    """A world input-output table for one year.

    ``Z`` is (n, n), ``F`` is (n, M*K), ``va`` and ``x`` have length n = M*N.
    Arrays are copied and made read-only on construction.
    """

    year: int
    countries: tuple
    sectors: tuple
    Z: np.ndarray
    F: np.ndarray
    va: np.ndarray
    x: np.ndarray
    fd_categories: tuple = ("FD",)
    raw: bool = False

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "countries", tuple(self.countries))
        set_(self, "sectors", tuple(self.sectors))
        set_(self, "fd_categories", tuple(self.fd_categories))
        for name in ("Z", "F", "va", "x"):
            set_(self, name, _frozen(getattr(self, name)))
        n = len(self.countries) * len(self.sectors)
        K = len(self.fd_categories)
        if self.Z.shape != (n, n):
            raise TableFormatError(f"Z has shape {self.Z.shape}, expected {(n, n)}")
        if self.F.shape != (n, len(self.countries) * K):
            raise TableFormatError(f"F has shape {self.F.shape}, expected {(n, len(self.countries) * K)}")
        if self.va.shape != (n,) or self.x.shape != (n,):
            raise TableFormatError("va and x must be vectors of length M*N")
        if len(set(self.countries)) != len(self.countries) or len(set(self.sectors)) != len(self.sectors):
            raise TableFormatError("duplicate country or sector codes")

    @property
    def M(self):
        return len(self.countries)

    @property
    def N(self):
        return len(self.sectors)

    @property
    def K(self):
        return len(self.fd_categories)

    @property
    def n(self):
        return self.M * self.N

    def country_index(self, code):
        try:
            return self.countries.index(code)
        except ValueError:
            raise UnknownCountry(code) from None

    def rows(self, country):
        """Slice of producer indices belonging to ``country``."""
        c = self.country_index(country)
        return slice(c * self.N, (c + 1) * self.N)

    def fd_columns(self, country):
        c = self.country_index(country)
        return slice(c * self.K, (c + 1) * self.K)

    def country_of(self):
        """Country index of every producer index."""
        return np.repeat(np.arange(self.M), self.N)

    def labels(self):
        return [(c, s) for c in self.countries for s in self.sectors]

    def final_demand_by_country(self):
        """(n, M) final demand with the K categories of each destination summed."""
        return self.F.reshape(self.n, self.M, self.K).sum(axis=2)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, eq=False)
class BalanceReport:
    tol: float
    row_discrepancy: np.ndarray
    col_discrepancy: np.ndarray
    negatives: list = field(default_factory=list)
    zero_output: list = field(default_factory=list)
    passed: bool = True

    @property
    def worst_row(self):
        return float(self.row_discrepancy.max(initial=0.0))

    @property
    def worst_col(self):
        return float(self.col_discrepancy.max(initial=0.0))

    def to_dict(self):
        return {
            "tol": self.tol,
            "passed": self.passed,
            "worst_row_discrepancy": self.worst_row,
            "worst_row_index": int(np.argmax(self.row_discrepancy)) if self.row_discrepancy.size else None,
            "worst_col_discrepancy": self.worst_col,
            "worst_col_index": int(np.argmax(self.col_discrepancy)) if self.col_discrepancy.size else None,
            "negatives": [
                {"matrix": m, "row": r, "col": c, "value": v} for m, r, c, v in self.negatives
            ],
            "zero_output": [{"country": c, "sector": s} for c, s in self.zero_output],
        }


def validate(table, tol=DEFAULT_TOL):
    """Check row and column balance identities; never raises."""
    x = table.x
    denom = np.where(np.abs(x) > 0, np.abs(x), 1.0)
    row = np.abs(x - table.Z.sum(axis=1) - table.F.sum(axis=1)) / denom
    col = np.abs(x - table.Z.sum(axis=0) - table.va) / denom

    labels = table.labels()
    fd_labels = [(c, k) for c in table.countries for k in table.fd_categories]
    negatives = []
    for i, j in zip(*np.nonzero(table.Z < 0)):
        negatives.append(("Z", "/".join(labels[i]), "/".join(labels[j]), float(table.Z[i, j])))
    for i, j in zip(*np.nonzero(table.F < 0)):
        negatives.append(("F", "/".join(labels[i]), "/".join(fd_labels[j]), float(table.F[i, j])))
    for name in ("va", "x"):
        vec = getattr(table, name)
        for i in np.nonzero(vec < 0)[0]:
            negatives.append((name, "/".join(labels[i]), "", float(vec[i])))

    zero_output = [labels[i] for i in np.nonzero(x == 0)[0]]
    passed = bool(row.max(initial=0.0) <= tol and col.max(initial=0.0) <= tol)
    passed = passed and not (x < 0).any()
    if not table.raw:
        passed = passed and not (table.va < 0).any()
    return BalanceReport(tol, row, col, negatives, zero_output, passed)


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    """Input and output coefficients with their inverses.

    ``vcL`` is ``diag(vc) @ L``: the value-added multipliers, whose columns sum
    to one on a balanced table.
    """

    A: np.ndarray
    B: np.ndarray
    L: np.ndarray
    Gh: np.ndarray
    vc: np.ndarray
    rho: float
    rho_B: float
    zero_output: np.ndarray
    vcL: np.ndarray


def coefficients(table, tol=DEFAULT_TOL, check=True):
    """Technical and allocation coefficients, Leontief and Ghosh inverses.

    Zero-output producers get zero A columns, zero B rows and ``vc = 0``.
    Raises :class:`Unbalanced` when ``check`` is set and validation fails,
    :class:`NonProductive` when the spectral radius of A is >= 1.
    """
    if check:
        report = validate(table, tol)
        if not report.passed:
            raise Unbalanced(report)
    x = table.x
    zero = x == 0
    safe = np.where(zero, 1.0, x)
    A = table.Z / safe[None, :]
    A[:, zero] = 0.0
    B = table.Z / safe[:, None]
    B[zero, :] = 0.0
    vc = np.where(zero, 0.0, table.va / safe)

    rho = perron_root(A)
    if rho >= 1.0:
        raise NonProductive(rho, "A")
    rho_B = perron_root(B)
    L = inverse_of_identity_minus(A, "I - A")
    if rho_B >= 1.0:
        raise NonProductive(rho_B, "B")
    Gh = inverse_of_identity_minus(B, "I - B")
    vcL = vc[:, None] * L
    return CoefficientSet(
        A=_frozen(A),
        B=_frozen(B),
        L=_frozen(L),
        Gh=_frozen(Gh),
        vc=_frozen(vc),
        rho=rho,
        rho_B=rho_B,
        zero_output=np.nonzero(zero)[0],
        vcL=_frozen(vcL),
    )


def va_embodied(table, cs=None):
    """Value added by producer embodied in each final-demand column: diag(vc) L F."""
    cs = cs if cs is not None else coefficients(table)
    return cs.vc[:, None] * (cs.L @ table.F)


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def _read_long(path, columns, codes):
    try:
        df = pd.read_csv(
            path,
            dtype={c: str for c in codes},
            keep_default_na=False,
            na_values={"value": [""]},
            float_precision="round_trip",
        )
    except FileNotFoundError:
        raise
    except Exception as exc:  # noqa: BLE001 - pandas raises a zoo of parser errors
        raise TableFormatError(f"{path}: cannot parse CSV ({exc})") from exc
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise TableFormatError(f"{path}: missing columns {missing}; expected header {','.join(columns)}")
    df = df[columns]
    try:
        df = df.astype({"year": int})
    except (TypeError, ValueError) as exc:
        raise TableFormatError(f"{path}: non-integer year") from exc
    try:
        df["value"] = pd.to_numeric(df["value"])
    except ValueError as exc:
        raise TableFormatError(f"{path}: non-numeric value ({exc})") from exc
    return df


def _select_year(df, year, path):
    if year is None:
        years = sorted(df["year"].unique())
        if len(years) != 1:
            raise TableFormatError(f"{path}: contains years {years}; pass year explicitly")
        year = years[0]
    return df[df["year"] == year], int(year)


def _check_duplicates(df, keys, path):
    dup = df.duplicated(subset=keys, keep=False)
    if dup.any():
        first = df.loc[dup, keys].iloc[0].tolist()
        raise TableFormatError(f"{path}: duplicate key {first}")


def _positions(values, order, what, path):
    lookup = {code: i for i, code in enumerate(order)}
    try:
        return np.fromiter((lookup[v] for v in values), dtype=np.int64, count=len(values))
    except KeyError as exc:
        raise TableFormatError(f"{path}: {what} code {exc.args[0]!r} not in the code set") from None


def _fill(shape, rows, cols, values, sparse_zeros, path):
    out = np.zeros(shape)
    seen = np.zeros(shape, dtype=bool)
    out[rows, cols] = values
    seen[rows, cols] = True
    nan = np.isnan(out)
    if nan.any():
        if not sparse_zeros:
            raise TableFormatError(f"{path}: {int(nan.sum())} empty value cell(s); use sparse zeros to treat as 0")
        out[nan] = 0.0
    if not seen.all() and not sparse_zeros:
        raise TableFormatError(
            f"{path}: {int((~seen).sum())} missing cell(s); use sparse zeros to treat missing cells as 0"
        )
    return out


def read_order_file(path):
    """Explicit ordering from a CSV with header ``kind,code`` (kind is country|sector)."""
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    if list(df.columns[:2]) != ["kind", "code"]:
        raise TableFormatError(f"{path}: expected header kind,code")
    countries = df.loc[df["kind"] == "country", "code"].tolist()
    sectors = df.loc[df["kind"] == "sector", "code"].tolist()
    return countries or None, sectors or None


def load_table(z_file, f_file, va_file, year=None, *, sparse_zeros=False, countries=None,
               sectors=None, fd_categories=None, raw=False):
    """Assemble an :class:`IcioTable` from the three long-format CSV files.

    Gross output is computed as the row sums of Z and F. Codes are ordered
    lexicographically unless ``countries``/``sectors``/``fd_categories`` give
    an explicit order.
    """
    zdf = _read_long(z_file, Z_COLUMNS, ["origin_country", "origin_sector", "dest_country", "dest_sector"])
    zdf, year = _select_year(zdf, year, z_file)
    fdf = _read_long(f_file, F_COLUMNS, ["origin_country", "origin_sector", "dest_country", "fd_category"])
    fdf = fdf[fdf["year"] == year]
    vdf = _read_long(va_file, VA_COLUMNS, ["country", "sector"])
    vdf = vdf[vdf["year"] == year]
    for df, path in ((zdf, z_file), (fdf, f_file), (vdf, va_file)):
        if df.empty:
            raise TableFormatError(f"{path}: no rows for year {year}")

    _check_duplicates(zdf, Z_COLUMNS[1:5], z_file)
    _check_duplicates(fdf, F_COLUMNS[1:5], f_file)
    _check_duplicates(vdf, VA_COLUMNS[1:3], va_file)

    country_sets = {
        "Z origin": set(zdf["origin_country"]),
        "Z destination": set(zdf["dest_country"]),
        "F origin": set(fdf["origin_country"]),
        "VA": set(vdf["country"]),
    }
    sector_sets = {
        "Z origin": set(zdf["origin_sector"]),
        "Z destination": set(zdf["dest_sector"]),
        "F origin": set(fdf["origin_sector"]),
        "VA": set(vdf["sector"]),
    }
    if not sparse_zeros:
        country_sets["F destination"] = set(fdf["dest_country"])
    for what, sets in (("country", country_sets), ("sector", sector_sets)):
        ref = next(iter(sets.values()))
        bad = {k: sorted(v ^ ref) for k, v in sets.items() if v != ref}
        if bad:
            raise TableFormatError(f"inconsistent {what} code sets across files: {bad}")
    all_countries = set().union(*country_sets.values(), set(fdf["dest_country"]))
    all_sectors = set().union(*sector_sets.values())

    countries = list(countries) if countries else sorted(all_countries)
    sectors = list(sectors) if sectors else sorted(all_sectors)
    if set(countries) != all_countries:
        raise TableFormatError(f"country order does not match file codes: {sorted(set(countries) ^ all_countries)}")
    if set(sectors) != all_sectors:
        raise TableFormatError(f"sector order does not match file codes: {sorted(set(sectors) ^ all_sectors)}")
    cats = list(fd_categories) if fd_categories else sorted(set(fdf["fd_category"]))
    if set(cats) != set(fdf["fd_category"]):
        raise TableFormatError("final-demand category order does not match file codes")

    M, N, K = len(countries), len(sectors), len(cats)
    n = M * N
    zr = _positions(zdf["origin_country"].tolist(), countries, "country", z_file) * N + _positions(
        zdf["origin_sector"].tolist(), sectors, "sector", z_file)
    zc = _positions(zdf["dest_country"].tolist(), countries, "country", z_file) * N + _positions(
        zdf["dest_sector"].tolist(), sectors, "sector", z_file)
    Z = _fill((n, n), zr, zc, zdf["value"].to_numpy(float), sparse_zeros, z_file)

    fr = _positions(fdf["origin_country"].tolist(), countries, "country", f_file) * N + _positions(
        fdf["origin_sector"].tolist(), sectors, "sector", f_file)
    fc = _positions(fdf["dest_country"].tolist(), countries, "country", f_file) * K + _positions(
        fdf["fd_category"].tolist(), cats, "final-demand category", f_file)
    F = _fill((n, M * K), fr, fc, fdf["value"].to_numpy(float), sparse_zeros, f_file)

    vr = _positions(vdf["country"].tolist(), countries, "country", va_file) * N + _positions(
        vdf["sector"].tolist(), sectors, "sector", va_file)
    va = _fill((n, 1), vr, np.zeros_like(vr), vdf["value"].to_numpy(float), sparse_zeros, va_file)[:, 0]

    x = Z.sum(axis=1) + F.sum(axis=1)
    return IcioTable(year, countries, sectors, Z, F, va, x, tuple(cats), raw)


TABLE_FILES = ("z.csv", "f.csv", "va.csv")


def table_frames(table):
    """The Z, F and VA long frames of a table (dense)."""
    M, N, K, n = table.M, table.N, table.K, table.n
    cc = np.repeat(np.array(table.countries, dtype=object), N)
    ss = np.tile(np.array(table.sectors, dtype=object), M)

    z = pd.DataFrame({
        "year": table.year,
        "origin_country": np.repeat(cc, n),
        "origin_sector": np.repeat(ss, n),
        "dest_country": np.tile(cc, n),
        "dest_sector": np.tile(ss, n),
        "value": table.Z.ravel(),
    })
    fcc = np.repeat(np.array(table.countries, dtype=object), K)
    fkk = np.tile(np.array(table.fd_categories, dtype=object), M)
    f = pd.DataFrame({
        "year": table.year,
        "origin_country": np.repeat(cc, M * K),
        "origin_sector": np.repeat(ss, M * K),
        "dest_country": np.tile(fcc, n),
        "fd_category": np.tile(fkk, n),
        "value": table.F.ravel(),
    })
    v = pd.DataFrame({"year": table.year, "country": cc, "sector": ss, "value": table.va})
    return z, f, v


def write_table(table, directory, names=TABLE_FILES):
    """Write the three long CSV files (dense, full round-trip precision)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [directory / name for name in names]
    for df, path in zip(table_frames(table), paths):
        df.to_csv(path, index=False, lineterminator="\n")
    return paths


def load_dir(directory, year=None, names=TABLE_FILES, **kwargs):
    directory = Path(directory)
    return load_table(*(directory / name for name in names), year=year, **kwargs)


# ---------------------------------------------------------------------------
# Synthetic tables
# ---------------------------------------------------------------------------

def _codes(prefix, count):
    width = max(2, len(str(count)))
    return [f"{prefix}{i + 1:0{width}d}" for i in range(count)]


def synth_table(M, N, seed=0, import_share=0.2, *, n_fd=1, year=2000):
    """Random balanced table with spectral radius below 0.9.

    Off-diagonal country blocks of Z and F are scaled by ``import_share``.
    Every column of A sums to at most 0.75, which bounds the spectral radius.
    """
    if M < 1 or N < 1:
        raise ValueError("synth_table needs M >= 1 and N >= 1")
    rng = np.random.default_rng(seed)
    n = M * N
    owner = np.repeat(np.arange(M), N)
    foreign = owner[:, None] != owner[None, :]

    A = rng.uniform(0.0, 1.0, (n, n))
    A[foreign] *= import_share
    colsum = A.sum(axis=0)
    target = rng.uniform(0.15, 0.75, n)
    A *= target / colsum

    fd_owner = np.repeat(np.arange(M), n_fd)
    F = rng.uniform(10.0, 100.0, (n, M * n_fd))
    F[owner[:, None] != fd_owner[None, :]] *= import_share

    x = np.linalg.solve(np.eye(n) - A, F.sum(axis=1))
    Z = A * x[None, :]
    x = Z.sum(axis=1) + F.sum(axis=1)
    va = x - Z.sum(axis=0)
    return IcioTable(
        year=year,
        countries=_codes("C", M),
        sectors=_codes("S", N),
        Z=Z,
        F=F,
        va=va,
        x=x,
        fd_categories=tuple(f"FD{k + 1}" for k in range(n_fd)) if n_fd > 1 else ("FD",),
    )
