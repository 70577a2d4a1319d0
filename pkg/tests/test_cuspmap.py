import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import R, T
from lenscat import (
    BoundaryRay,
    CuspBoundaryPoint,
    CuspSampling,
    MissesBall,
    classical_scattering_map,
    cusp_to_entry,
    cusp_to_exit,
    lens_equivalent,
    ray_to_cusp,
    scattering_relation,
    sojourn_closed,
    truncated_map_via_infinity,
)
from lenscat.cuspmap import graph_batch, graph_sweep
from lenscat.metric import ConformalBump, FlatMetric, FlowDiffeo, pullback
from lenscat.sampling import random_inward_entries

unit2 = st.floats(0, 2 * np.pi).map(lambda a: np.array([np.cos(a), np.sin(a)]))


def bump(dim=2, amplitude=0.1):
    return ConformalBump(dim, R, T, amplitude=amplitude, center=(0.3, -0.2, 0.1)[:dim], width=1.0)


def test_point_validation_and_twist():
    p = CuspBoundaryPoint([0.0, 1.0], 0.4, [0.5, 0.0])
    assert p.t == -0.2
    q = p.twisted()
    assert q.xi1c == -0.4 and np.array_equal(q.eta1c, [-0.5, -0.0])
    assert np.array_equal(q.twisted().eta1c, p.eta1c)
    with pytest.raises(ValueError):
        CuspBoundaryPoint([0.0, 2.0], 0.0, [0.0, 0.0])
    with pytest.raises(ValueError):
        CuspBoundaryPoint([0.0, 1.0], 0.0, [0.0, 0.5])


@settings(max_examples=50, deadline=None)
@given(y=unit2, s=st.floats(-50, 50), x=st.floats(-2, 2), b=st.floats(-2.9, 2.9), t=st.floats(-1, 1))
def test_cusp_datum_is_constant_along_the_line(y, s, x, b, t):
    perp = np.array([-y[1], y[0]])
    z0 = x * y + b * perp
    p = ray_to_cusp(t, z0, y)
    q = ray_to_cusp(t, z0 + s * y, y)
    assert np.allclose(p.eta1c, q.eta1c, atol=1e-12) and p.xi1c == q.xi1c == 0.0 - 2.0 * t
    assert np.allclose(p.eta1c, -b * perp, atol=1e-12)
    entry = cusp_to_entry(p, R)
    assert entry.orientation == "inward"
    back = ray_to_cusp(entry.t, entry.z, entry.v)
    assert np.allclose(back.eta1c, p.eta1c, atol=1e-12) and back.t == p.t
    out = cusp_to_exit(p, R)
    assert out.orientation == "outward"
    assert np.allclose(out.z - entry.z, 2 * np.sqrt(R * R - b * b) * y, atol=1e-10)


def test_lines_missing_the_ball():
    p = CuspBoundaryPoint([1.0, 0.0, 0.0], 0.3, [0.0, 3.0, 0.0])
    with pytest.raises(MissesBall):
        cusp_to_entry(p, R)
    with pytest.raises(MissesBall):
        cusp_to_exit(p, R)
    out = classical_scattering_map(bump(3, amplitude=1.0), p)
    assert out.outgoing is p and out.n1 == 0.0


@pytest.mark.parametrize("dim", [2, 3])
def test_flat_scattering_map_is_the_identity(dim):
    y, xi, eta = CuspSampling(4, 3, 4).points(dim, R, T)
    tab = graph_batch(FlatMetric(dim, R, T), y, xi, eta)
    assert np.allclose(tab.y_out, y, atol=1e-15)
    assert np.array_equal(tab.xi_out, xi)
    assert np.allclose(tab.eta_out, eta, atol=1e-14)
    assert np.max(np.abs(tab.n1)) < 1e-14


def test_graph_batch_matches_single_points():
    g = bump(3)
    y, xi, eta = CuspSampling(3, 2, 3, mode="random", seed=4).points(3, R, T)
    tab = graph_batch(g, y, xi, eta)
    for k in range(len(xi)):
        one = classical_scattering_map(g, CuspBoundaryPoint(y[k], xi[k], eta[k]))
        got = tab.point(k)
        assert np.allclose(one.outgoing.y, got.outgoing.y, atol=1e-13)
        assert np.allclose(one.outgoing.eta1c, got.outgoing.eta1c, atol=1e-12)
        assert abs(one.n1 - got.n1) < 1e-12 and one.outgoing.xi1c == got.outgoing.xi1c


def test_n1_is_minus_sojourn_and_radius_independent():
    g = bump(2, amplitude=0.2)
    p = CuspBoundaryPoint([1.0, 0.0], 0.2, [0.0, -1.0])
    near = classical_scattering_map(g, p)
    far = classical_scattering_map(g, p, radius=5.0)
    assert abs(near.n1 + sojourn_closed(g, cusp_to_entry(p, R))) < 1e-14
    assert abs(near.n1 - far.n1) < 1e-10
    assert np.allclose(near.outgoing.eta1c, far.outgoing.eta1c, atol=1e-10)
    assert np.allclose(near.outgoing.y, far.outgoing.y, atol=1e-10)
    assert near.n1 != 0.0


@pytest.mark.parametrize("dim", [2, 3])
def test_scattering_relation_through_infinity(dim):
    g = bump(dim, amplitude=0.2)
    t, z, v = random_inward_entries(np.random.default_rng(dim), 15, dim, R, T)
    for k in range(15):
        e = BoundaryRay(t[k], z[k], v[k], R=R)
        a = scattering_relation(g, e)
        b = truncated_map_via_infinity(g, e)
        assert np.allclose(a.z, b.z, atol=1e-9) and np.allclose(a.v, b.v, atol=1e-12)


def test_cusp_sampling():
    s = CuspSampling()
    assert s.count == 576
    for dim in (2, 3):
        for mode in ("lattice", "random"):
            y, xi, eta = CuspSampling(mode=mode).points(dim, R, T)
            assert len(xi) == 576
            assert np.allclose(np.linalg.norm(y, axis=1), 1.0)
            assert np.max(np.abs(np.sum(y * eta, axis=1))) < 1e-12
            assert np.max(np.linalg.norm(eta, axis=1)) <= 0.95 * R + 1e-12
            assert np.max(np.abs(xi)) <= 2 * T + 1
    with pytest.raises(ValueError):
        CuspSampling(mode="grid").points(2, R, T)


def test_lens_equivalent_decisions():
    small = CuspSampling(4, 3, 4)
    g = bump(2)
    same = lens_equivalent(g, g, small)
    assert same.equivalent and same.max_normalized == 0.0 and same.n_samples == 48
    diff = lens_equivalent(FlatMetric(2, R, T), g, small)
    assert not diff.equivalent and diff.max_n1 > 1e-3
    assert diff.worst_sample is not None
    psi = FlowDiffeo(2, R, T, amplitude=0.3, center=(0.2, -0.1), radius=1.5, steps=8)
    pb = lens_equivalent(g, pullback(g, psi), CuspSampling(3, 2, 3))
    assert pb.equivalent and pb.max_length < 1e-8
    with pytest.raises(ValueError):
        lens_equivalent(g, bump(3), small)


def test_lens_equivalent_reports_trapped_rays():
    trap = ConformalBump(2, R, T, amplitude=6.0, width=1.0)
    rep, t1, t2 = lens_equivalent(trap, trap, CuspSampling(2, 1, 6), graphs=True)
    assert rep.n_failed > 0 and not rep.equivalent
    assert rep.failed[0]["status_1"] == 1
    assert '"equivalent": false' in rep.to_json()


def test_graph_sweep_and_csv():
    g = bump(2)
    y, xi, eta = CuspSampling(2, 3, 3).points(2, R, T)
    a = graph_sweep(g, y, xi, eta, chunk=5, workers=1)
    b = graph_batch(g, y, xi, eta)
    assert np.allclose(a.n1, b.n1, atol=1e-14)
    buf = io.StringIO()
    a.to_csv(buf, header_comment="x")
    lines = buf.getvalue().splitlines()
    assert lines[1] == "y_in_1,y_in_2,xi1c_in,eta1c_in_1,eta1c_in_2,y_out_1,y_out_2,xi1c_out,eta1c_out_1,eta1c_out_2,n1"
    assert len(lines) == 2 + len(a)
