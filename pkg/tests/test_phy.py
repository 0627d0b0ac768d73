import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dcf_analyzer import phy
from dcf_analyzer.phy import BerRangeError, BerTable


def closed_form(g):
    return 0.5 * (1 - math.sqrt(g / (1 + g)))


@pytest.mark.parametrize("mod", ["DBPSK", "DQPSK"])
@pytest.mark.parametrize("snr_db", [-5, 0, 10, 20, 30, 45])
def test_ber_closed_form(mod, snr_db):
    g = phy.db_to_linear(snr_db)
    assert phy.ber(mod, g) == pytest.approx(closed_form(g), abs=1e-12)


def test_ber_limits():
    assert phy.ber("DBPSK", 0.0) == pytest.approx(0.5)
    assert phy.ber("DBPSK", math.inf) == 0.0
    with pytest.raises(ValueError):
        phy.ber("DBPSK", -1.0)
    with pytest.raises(ValueError):
        phy.ber("16QAM", 1.0)


def test_fer_at_45db(cfg):
    # b = (1 - sqrt(g/(1+g)))/2 at g = 10**4.5; 128 PLCP bits, 8*(1024+24) data bits
    r = phy.fer(cfg, phy.db_to_linear(45))
    assert r.p_e_plcp == pytest.approx(0.0010113970445967402, rel=1e-9)
    assert r.p_e_data == pytest.approx(0.06413124353421795, rel=1e-9)
    assert r.p_e_total == pytest.approx(0.06507777842863782, rel=1e-9)


def test_fer_at_20db_is_nearly_total(cfg):
    b = closed_form(100.0)
    survive = (1 - b) ** 128 * (1 - b) ** (8 * 1048)
    assert survive == pytest.approx(6.5397e-10, rel=1e-4)
    assert 1 - phy.fer(cfg, 100.0).p_e_total == pytest.approx(survive, rel=1e-6)


def test_frame_error_tiny_ber():
    # 1 - (1-b)^n ~ n b for n b << 1; naive pow loses every digit here
    assert phy.frame_error(1e-18, 1000) == pytest.approx(1e-15, rel=1e-9)
    assert phy.frame_error(0.0, 100) == 0.0
    assert phy.frame_error(1.0, 3) == 1.0


def test_ber_table(tmp_path):
    path = tmp_path / "ber.txt"
    path.write_text("# snr_db ber\n0 0.1\n10 0.01\n20 0.001\n")
    table = phy.load_ber_table(str(path))
    assert table(phy.db_to_linear(5)) == pytest.approx(0.055)
    with pytest.raises(BerRangeError):
        table(phy.db_to_linear(25))
    with pytest.raises(ValueError):
        BerTable((0.0, 0.0), (0.1, 0.1))


def test_table_modulation_used_for_data_only(cfg, tmp_path):
    path = tmp_path / "ber.txt"
    path.write_text("0 0.0\n50 0.0\n")
    c = cfg.replace(modulation="TABLE", ber_table=str(path))
    r = phy.fer(c, phy.db_to_linear(45))
    assert r.p_e_data == 0.0
    assert r.p_e_total == pytest.approx(r.p_e_plcp)


def test_capture_conditional():
    zg = 10 ** 0.6 * 2 / 33
    assert phy.capture_prob_conditional(0, 10 ** 0.6, 11) == 1.0
    assert phy.capture_prob_conditional(1, 10 ** 0.6, 11) == pytest.approx(1 / (1 + zg))
    assert zg == pytest.approx(0.24127707306272558)


def test_capture_prob_by_enumeration():
    # enumerate the 2^3 transmit patterns of three stations
    z0, Sf, tau = 10 ** 0.6, 11, 0.2
    zg = z0 * 2 / (3 * Sf)
    want = 0.0
    for pattern in itertools.product((0, 1), repeat=3):
        n = sum(pattern)
        if n >= 2:
            want += tau ** n * (1 - tau) ** (3 - n) * (1 + zg) ** -(n - 1)
    assert want == pytest.approx(0.08253191609003278)
    assert phy.capture_prob(tau, 3, z0, Sf) == pytest.approx(want, rel=1e-14)


def test_capture_prob_edges():
    assert phy.capture_prob(0.3, 1, 4.0, 11) == 0.0
    assert phy.capture_prob(0.0, 10, 4.0, 11) == 0.0
    with pytest.raises(ValueError):
        phy.capture_prob(1.5, 3, 4.0, 11)


@given(tau=st.floats(0, 1), N=st.integers(1, 40), z0_db=st.floats(-10, 30))
def test_capture_bounded_by_collision_probability(tau, N, z0_db):
    coll = 1 - (1 - tau) ** N - N * tau * (1 - tau) ** (N - 1)
    p = phy.capture_prob(tau, N, phy.db_to_linear(z0_db), 11)
    assert -1e-15 <= p <= coll + 1e-12


@given(g=st.floats(1e-3, 1e5))
def test_ber_decreasing(g):
    assert phy.ber("DBPSK", g * 1.5) < phy.ber("DBPSK", g)
