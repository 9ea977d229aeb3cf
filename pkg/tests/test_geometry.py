import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spmimo import table1_config
from spmimo.geometry import (NetworkRealization, RejectionCapExceeded, cross_moment_bound,
                             expected_d_alpha, expected_ratio_moment, rayleigh_cdf,
                             sample_network, sample_network_retry, side_length_for,
                             torus_distance, write_network_csv)
from spmimo.kernels import nearest_index_torus

coord = st.floats(0.0, 1.0, allow_nan=False, exclude_max=True)
point = st.tuples(coord, coord)


@given(point, point, point)
def test_torus_metric(a, b, c):
    a, b, c = (np.array(x) for x in (a, b, c))
    dab = torus_distance(a, b, 1.0)
    assert dab == pytest.approx(torus_distance(b, a, 1.0))
    assert 0.0 <= dab <= math.sqrt(0.5) + 1e-12
    assert torus_distance(a, c, 1.0) <= dab + torus_distance(b, c, 1.0) + 1e-12


def test_side_length():
    assert side_length_for(50, 100.0) ** 2 * 100.0 == pytest.approx(50)


def test_sample_network_structure():
    cfg = table1_config()
    net = sample_network(cfg, seed=3, n_av=20)
    n, K = net.n_bs, cfg.K
    assert net.ue_xy.shape == (n, K, 2) and net.beta.shape == (n, n, K)
    # every UE is served by its nearest BS
    owner = nearest_index_torus(net.ue_xy.reshape(-1, 2), net.bs_xy, net.side_length)
    assert np.array_equal(owner, np.repeat(np.arange(n), K))
    d = net.d
    assert np.all(d[np.arange(n), np.arange(n)][:, None, :] <= d.transpose(1, 0, 2) + 1e-15)
    assert np.allclose(net.beta, 1.0 / (cfg.omega * d ** cfg.alpha))


def test_sample_network_reproducible_and_distinct():
    cfg = table1_config()
    a = sample_network(cfg, seed=1, n_av=10)
    b = sample_network(cfg, seed=1, n_av=10)
    c = sample_network(cfg, seed=2, n_av=10)
    assert np.array_equal(a.bs_xy, b.bs_xy) and np.array_equal(a.ue_xy, b.ue_xy)
    assert a.bs_xy.shape != c.bs_xy.shape or not np.array_equal(a.bs_xy, c.bs_xy)


def test_rejection_cap():
    cfg = table1_config(K=10)
    with pytest.raises(RejectionCapExceeded):
        sample_network(cfg, seed=0, n_bs=30, n_av=30, max_proposals=50)
    net = sample_network_retry(cfg, seed=0, index=0, n_av=10)
    assert net.n_bs >= 2


def test_from_positions_and_csv(tmp_path):
    cfg = table1_config(K=1)
    bs = np.array([[0.1, 0.1], [0.6, 0.6]])
    ue = np.array([[[0.2, 0.1]], [[0.6, 0.9]]])
    net = NetworkRealization.from_positions(bs, ue, 1.0, cfg.alpha, cfg.omega)
    assert net.d[0, 0, 0] == pytest.approx(0.1)
    assert net.d[0, 1, 0] == pytest.approx(math.hypot(0.5, 0.2))  # wraps in y
    write_network_csv(net, tmp_path / "n.csv")
    assert (tmp_path / "n.csv").read_text().count("\n") > 4


def test_moment_formulas():
    assert expected_ratio_moment(3.76, 1) == pytest.approx(2 / 1.76)
    assert expected_ratio_moment(3.76, 1) == pytest.approx(1.1364, abs=1e-4)
    assert cross_moment_bound(3.76) == pytest.approx(1 / 2.76)
    # E{d^alpha} for alpha = 2 is the Rayleigh second moment 1/(pi D)
    assert expected_d_alpha(2.0, 100.0) == pytest.approx(1 / (math.pi * 100))
    assert rayleigh_cdf(0.0, 100.0) == 0.0
    assert rayleigh_cdf(10.0, 100.0) == pytest.approx(1.0)
