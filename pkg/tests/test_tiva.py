import numpy as np
import pandas as pd
import pytest

from conftest import make_no_linkage
from gvc.errors import UnknownCountry
from gvc.icio import IcioTable, coefficients, synth_table
from gvc.tiva import (
    UnmappedProducts,
    average_propagation_length,
    decompose_all,
    decompose_exports,
    dvx,
    gross_exports,
    gvc_indices,
    intermediate_shares,
    production_stages,
    upstreamness,
)
from oracles import power_series, weighted_power_series


# --- gross exports ----------------------------------------------------------

def test_open2_gross_exports(open2):
    flows = gross_exports(open2)
    np.testing.assert_array_equal(flows.E, [20.0, 20.0])
    np.testing.assert_array_equal(flows.intermediate, [10.0, 15.0])
    np.testing.assert_array_equal(flows.final, [10.0, 5.0])
    np.testing.assert_array_equal(flows.by_country(open2), [[0.0, 20.0], [20.0, 0.0]])


def test_closed_economy_has_no_exports(closed2):
    assert (gross_exports(closed2).E == 0).all()


def test_world_exports_equal_world_imports():
    t = synth_table(3, 2, 9, 0.2)
    C = gross_exports(t).by_country(t)
    assert C.sum(axis=1).sum() == pytest.approx(C.sum(axis=0).sum(), rel=1e-12)
    # summation oracle over raw cells
    owner = t.country_of()
    foreign_z = sum(t.Z[i, j] for i in range(t.n) for j in range(t.n) if owner[i] != owner[j])
    foreign_f = sum(t.F[i, c] for i in range(t.n) for c in range(t.M) if owner[i] != c)
    assert C.sum() == pytest.approx(foreign_z + foreign_f, rel=1e-12)


# --- decomposition ----------------------------------------------------------

def test_open2_decomposition(open2):
    dec = decompose_exports(open2, "A")
    assert dec.ddc[0] == pytest.approx(16.25, abs=1e-9)
    assert dec.idc[0] == 0.0
    assert dec.rim[0] == pytest.approx(0.44725, abs=1e-5)
    assert dec.fva[0] == pytest.approx(3.30275, abs=1e-5)
    assert dec.ddc[0] + dec.idc[0] + dec.rim[0] + dec.fva[0] == pytest.approx(20.0, abs=1e-12)
    assert dec.dvx[0] == pytest.approx(2.38532, abs=1e-5)


def test_open2_decomposition_against_power_series(open2):
    A = np.asarray(coefficients(open2).A)
    L = power_series(A, 200)
    L_dd = 1.0 / (1.0 - A[0, 0])
    vc = open2.va / open2.x
    dec = decompose_exports(open2, "A")
    assert dec.rim[0] == pytest.approx(vc[0] * (L[0, 0] - L_dd) * 20, abs=1e-10)
    assert dec.fva[0] == pytest.approx(vc[1] * L[1, 0] * 20, abs=1e-10)
    assert dec.dvx[0] == pytest.approx(vc[0] * L[0, 1] * 20, abs=1e-10)


def test_unknown_country(open2):
    with pytest.raises(UnknownCountry):
        decompose_exports(open2, "ZZ")
    with pytest.raises(UnknownCountry):
        dvx(open2, "ZZ")


def test_no_linkage_decomposition_is_direct_only():
    t = make_no_linkage(3, 2)
    for dec in decompose_all(t):
        np.testing.assert_array_equal(dec.fva, 0.0)
        np.testing.assert_array_equal(dec.rim, 0.0)
        np.testing.assert_allclose(dec.ddc, dec.exgr, rtol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_decomposition_identity_and_signs(seed):
    t = synth_table(4, 3, seed + 11, 0.25)
    for dec in decompose_all(t):
        total = dec.ddc + dec.idc + dec.rim + dec.fva
        np.testing.assert_allclose(total, dec.exgr, rtol=1e-8)
        for part in (dec.ddc, dec.idc, dec.rim, dec.fva, dec.dvx):
            assert (part >= -1e-10).all()


def test_multisector_decomposition_matches_brute_force():
    t = synth_table(3, 3, 4, 0.3)
    cs = coefficients(t)
    E = gross_exports(t).E
    L = power_series(np.asarray(cs.A), 400)
    vc = t.va / t.x
    d = t.rows("C02")
    Add = np.asarray(cs.A)[d, d]
    Ldd = power_series(Add, 400)
    dec = decompose_exports(t, "C02")
    for k in range(t.N):
        j = d.start + k
        own = vc[j] * Ldd[k, k] * E[j]
        other = sum(vc[d.start + i] * Ldd[i, k] for i in range(t.N) if i != k) * E[j]
        dom = sum(vc[d.start + i] * L[d.start + i, j] for i in range(t.N)) * E[j]
        foreign = sum(vc[i] * L[i, j] for i in range(t.n) if not d.start <= i < d.stop) * E[j]
        assert dec.ddc[k] == pytest.approx(own, rel=1e-9)
        assert dec.idc[k] == pytest.approx(other, rel=1e-9)
        assert dec.rim[k] == pytest.approx(dom - own - other, rel=1e-7, abs=1e-10)
        assert dec.fva[k] == pytest.approx(foreign, rel=1e-9)
        i = d.start + k
        via_foreign = sum(L[i, j2] * E[j2] for j2 in range(t.n) if not d.start <= j2 < d.stop)
        assert dec.dvx[k] == pytest.approx(vc[i] * via_foreign, rel=1e-9)


def test_closed_economy_dvx_is_zero(closed2):
    np.testing.assert_array_equal(dvx(closed2, "H"), 0.0)


def test_world_value_added_in_trade_reconciles():
    # Every unit of exported value added is either DVA of the exporter or FVA of some origin.
    t = synth_table(4, 2, 3, 0.3)
    decs = decompose_all(t)
    dva = sum(d.dva.sum() for d in decs)
    fva = sum(d.fva.sum() for d in decs)
    exgr = sum(d.exgr.sum() for d in decs)
    assert dva + fva == pytest.approx(exgr, rel=1e-10)
    # FVA of the world is someone's DVX: foreign value added in exports, counted by origin.
    assert fva == pytest.approx(sum(d.dvx.sum() for d in decs), rel=1e-9)


# --- indices ----------------------------------------------------------------

def test_open2_indices(open2):
    ind = gvc_indices(open2).for_country("A")
    assert ind["backward"] == pytest.approx(0.16514, abs=1e-4)
    assert ind["forward"] == pytest.approx(0.11927, abs=1e-4)
    assert ind["participation"] == pytest.approx(0.28441, abs=1e-4)
    assert ind["position"] == pytest.approx(-0.04019, abs=1e-4)
    assert ind["position"] == pytest.approx(np.log(1 + 0.65 * 0.18348624) - np.log(1 + 0.6 * 0.27522936),
                                            abs=1e-8)


def test_no_linkage_indices_are_zero():
    ind = gvc_indices(make_no_linkage(2, 2))
    np.testing.assert_array_equal(ind.participation, 0.0)
    np.testing.assert_array_equal(ind.position, 0.0)


def test_zero_exports_give_absent_shares(closed2):
    ind = gvc_indices(closed2)
    assert np.isnan(ind.backward[0]) and np.isnan(ind.position[0])
    assert ind.country_rows()[0][0] == "H"


@pytest.mark.parametrize("seed", range(3))
def test_index_ranges(seed):
    ind = gvc_indices(synth_table(5, 3, seed, 0.3))
    assert ((ind.backward >= 0) & (ind.backward <= 1)).all()
    assert (ind.forward >= 0).all() and (ind.participation >= 0).all()
    assert (ind.sector_stages >= 1 - 1e-12).all() and (ind.sector_upstreamness >= 1 - 1e-12).all()
    assert 0 < ind.apl_defined_share <= 1


# --- chain length -----------------------------------------------------------

def test_stages(open2, closed2):
    np.testing.assert_allclose(production_stages(coefficients(open2)), [1.55963, 1.65138], atol=1e-5)
    np.testing.assert_allclose(production_stages(coefficients(closed2)), [1.5556, 2.4444], atol=1e-4)
    np.testing.assert_array_equal(production_stages(coefficients(make_no_linkage())), 1.0)


def test_upstreamness(open2):
    np.testing.assert_allclose(upstreamness(coefficients(open2)), [1.46789, 1.74312], atol=1e-5)
    np.testing.assert_array_equal(upstreamness(coefficients(make_no_linkage())), 1.0)


def test_upstreamness_decreases_along_a_chain():
    # sector 1 sells only to 2, 2 sells half to 3, 3 sells only to final demand
    Z = [[0, 50, 0], [0, 0, 40], [0, 0, 0]]
    F = [[0], [40], [100]]
    x = [50, 80, 100]
    va = [50, 30, 60]
    t = IcioTable(2000, ["H"], ["S1", "S2", "S3"], Z, F, va, x)
    U = upstreamness(coefficients(t))
    assert U[0] > U[1] > U[2] == 1.0


def test_apl_single_sector_collapses_to_l():
    t = IcioTable(2000, ["H"], ["S"], [[30.0]], [[70.0]], [70.0], [100.0])
    apl = average_propagation_length(coefficients(t))
    assert apl[0, 0] == pytest.approx(1 / 0.7, rel=1e-12)


def test_apl_matches_weighted_series(closed2):
    cs = coefficients(closed2)
    num, den = weighted_power_series(np.asarray(cs.A), 200)
    np.testing.assert_allclose(average_propagation_length(cs), num / den, rtol=1e-10)
    np.testing.assert_allclose(average_propagation_length(cs),
                               [[1.77777778, 2.11111111], [2.11111111, 1.96825397]], atol=1e-8)


def test_apl_undefined_without_linkages():
    assert np.isnan(average_propagation_length(coefficients(make_no_linkage()))).all()


# --- intermediate shares ----------------------------------------------------

def _records():
    return pd.DataFrame(
        [(2011, "IND", "CHN", "p1", "M", 30.0), (2011, "IND", "CHN", "p2", "M", 70.0),
         (2011, "IND", "USA", "p1", "M", 10.0), (2011, "IND", "USA", "p3", "X", 5.0)],
        columns=["year", "reporter", "partner", "product", "flow", "value"],
    )


CATEGORY = {"p1": "intermediate", "p2": "final", "p3": "capital"}


def test_intermediate_share_arithmetic():
    out = intermediate_shares(_records(), CATEGORY)
    row = out[(out.partner == "CHN") & (out.flow == "M")].iloc[0]
    assert row.share == pytest.approx(0.3)
    total = out[(out.partner == "ALL") & (out.flow == "M")].iloc[0]
    assert total.share == pytest.approx(40 / 110)
    assert out[(out.flow == "X")].share.tolist() == [0.0, 0.0]


def test_all_intermediate_gives_share_one():
    out = intermediate_shares(_records(), {k: "intermediate" for k in CATEGORY})
    assert (out.share == 1.0).all()


def test_shares_are_order_invariant():
    rec = _records()
    shuffled = rec.sample(frac=1.0, random_state=3).reset_index(drop=True)
    pd.testing.assert_frame_equal(intermediate_shares(rec, CATEGORY), intermediate_shares(shuffled, CATEGORY))


def test_unmapped_products_are_listed():
    with pytest.raises(UnmappedProducts) as err:
        intermediate_shares(_records(), {"p1": "intermediate"})
    assert err.value.codes == ["p2", "p3"]
