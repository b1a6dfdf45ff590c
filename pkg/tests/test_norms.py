import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvsheet.grid import Grid, GridFunction
from cvsheet.norms import (HARNESS_KINDS, MultiIndex, conormal_derivative,
                           enumerate_indices, hm_star_norm,
                           inequality_harness, lift, random_smooth_field,
                           trace, triple_norm, w_star_norm)
from cvsheet.profiles import SigmaWeight


@pytest.fixture
def grid():
    return Grid(n1=40, n2=32, L1=2.0, L2=2 * np.pi)


mi = st.integers(0, 3)


@given(a=st.tuples(mi, mi, mi, mi), b=st.tuples(mi, mi, mi, mi))
@settings(max_examples=50, deadline=None)
def test_weight_additivity(a, b):
    ma, mb = MultiIndex(*a), MultiIndex(*b)
    assert (ma + mb).weight == ma.weight + mb.weight


def test_weight_counts_normal_twice():
    assert MultiIndex(0, 1, 0, 1).weight == 3


def test_sigma_profile():
    sig = SigmaWeight()
    x = np.linspace(0, 2, 2001)
    v = sig.value(x)
    assert np.allclose(v[x <= 0.5], x[x <= 0.5])
    assert np.allclose(v[x >= 1.0], 1.0)
    assert np.all(np.diff(v) >= -1e-14)


def test_identity_and_weighted_derivative(grid):
    x1, x2 = grid.mesh()
    u = GridFunction(values=x1.copy(), grid=grid)
    ident = conormal_derivative(u, MultiIndex())
    assert np.array_equal(ident.values, u.values)
    d = conormal_derivative(u, MultiIndex(0, 1, 0, 0))
    inner = grid.x1 <= 0.5
    assert np.allclose(d.values[inner, :], x1[inner, :], atol=1e-10)


def test_time_derivative_requires_history(grid):
    u = GridFunction(values=np.zeros((grid.n1, grid.n2)), grid=grid)
    with pytest.raises(ValueError):
        conormal_derivative(u, MultiIndex(1, 0, 0, 0))


def test_norm_m0_is_l2_and_constant(grid):
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(grid.n1, grid.n2))
    u = GridFunction(values=vals, grid=grid)
    rep = hm_star_norm(u, 0, "omega")
    assert rep.total == pytest.approx(grid.l2_norm(vals))
    c = GridFunction(values=np.full((grid.n1, grid.n2), 3.0), grid=grid)
    rep1 = hm_star_norm(c, 1, "omega")
    assert rep1.total == pytest.approx(3.0 * np.sqrt(grid.L1 * grid.L2))


def test_norm_monotone_in_order(grid):
    u = random_smooth_field(grid, nt=7, T=1.0, rng=np.random.default_rng(4))
    prev = 0.0
    for m in range(4):
        tot = hm_star_norm(u, m, "omega_t").total
        assert tot >= prev - 1e-13
        prev = tot


def test_spacetime_norm_equals_time_integral_of_triple(grid):
    # || u ||_{m,*,T}^2 = integral of ||| u(s) |||_{m,*}^2 ds discretely
    nt, T, m = 9, 1.0, 2
    u = random_smooth_field(grid, nt=nt, T=T, rng=np.random.default_rng(8))
    total = hm_star_norm(u, m, "omega_t").total
    # independent summation order: triple norm per slice, trapezoid in time
    acc = 0.0
    wt = np.full(nt, u.dt)
    wt[0] *= 0.5
    wt[-1] *= 0.5
    for alpha in enumerate_indices(m):
        d = conormal_derivative(u, alpha)
        space = np.einsum("tij,i->t", d.values ** 2, grid.w1) * grid.h2
        acc += float(np.sum(space * wt))
    assert total == pytest.approx(np.sqrt(acc), rel=1e-12)


def test_w_star_norm_orders(grid):
    u = random_smooth_field(grid, nt=7, T=1.0, rng=np.random.default_rng(5))
    w1 = w_star_norm(u, 1)
    w2 = w_star_norm(u, 2)
    assert 0 < w1 < w2
    with pytest.raises(ValueError):
        w_star_norm(u, 3)


def test_triple_norm_order_zero_is_slice_l2(grid):
    u = random_smooth_field(grid, nt=7, T=1.0, rng=np.random.default_rng(12))
    rep = triple_norm(u, 0)
    assert rep.total == pytest.approx(grid.l2_norm(u.values[-1]))


def test_norm_report_json_roundtrip(grid):
    import json
    u = random_smooth_field(grid, nt=7, T=1.0, rng=np.random.default_rng(13))
    rep = hm_star_norm(u, 1, "omega_t")
    payload = json.loads(rep.to_json())
    assert payload["order"] == 1
    assert payload["total"] == pytest.approx(rep.total)
    assert len(payload["contributions"]) == len(rep.contributions)


def test_harness_csv(tmp_path, grid):
    from cvsheet.norms import harness_to_csv
    rep = inequality_harness("trace_in", samples=2, grid=grid, nt=7,
                             rng=np.random.default_rng(0))
    out = tmp_path / "harness.csv"
    harness_to_csv([rep], out)
    lines = out.read_text().splitlines()
    assert lines[0] == "kind,nt,n1,n2,max_ratio"
    assert lines[1].startswith("trace_in,")


def test_trace_lift_roundtrip(grid):
    rng = np.random.default_rng(9)
    v0 = rng.normal(size=grid.n2)
    v1 = rng.normal(size=grid.n2)
    R = lift([v0, v1], grid)
    assert np.allclose(trace(R), v0)
    d1R = grid.d1(R.values)
    assert np.allclose(d1R[0, :], v1, atol=1e-10)
    # lift of (v0, 0) has vanishing normal derivative at the wall
    R0 = lift([v0, np.zeros_like(v0)], grid)
    assert np.allclose(grid.d1(R0.values)[0, :], 0.0, atol=1e-10)


def test_trace_norm_constant_refinement_stable():
    # same random functions, three grids: the fitted constant may not drift
    from cvsheet.norms import evaluate_field_params, sample_field_params
    rng = np.random.default_rng(3)
    draws = [sample_field_params(rng) for _ in range(8)]
    consts = []
    for n in (24, 48, 96):
        grid = Grid(n1=n, n2=32, L1=2.0, L2=2 * np.pi)
        ratios = []
        for params in draws:
            u = evaluate_field_params(params, grid, nt=9, T=1.0)
            tr = u.values[:, 0, :]
            wt = np.full(u.values.shape[0], u.dt)
            wt[0] *= 0.5
            wt[-1] *= 0.5
            num = np.sqrt(np.sum(np.sum(tr ** 2, axis=-1) * grid.h2 * wt))
            den = hm_star_norm(u, 1, "omega_t").total
            ratios.append(num / den)
        consts.append(max(ratios))
    cmax, cmin = max(consts), min(consts)
    assert cmax / cmin <= 2.0


def test_trace_inequality_unit_constant():
    grid = Grid(n1=64, n2=32, L1=2.0, L2=2 * np.pi)
    rep = inequality_harness("trace_in", samples=12, grid=grid, nt=9,
                             rng=np.random.default_rng(0))
    # squared-trace over squared-RHS stays below 1 + O(h)
    assert rep.max_ratio <= 1.1


def test_harness_all_kinds_run_and_stay_bounded():
    grid = Grid(n1=28, n2=24, L1=2.0, L2=2 * np.pi)
    rng = np.random.default_rng(1)
    for kind in HARNESS_KINDS:
        rep = inequality_harness(kind, samples=4, grid=grid, nt=7, m=2,
                                 rng=rng)
        assert np.all(np.isfinite(rep.ratios))
        assert rep.max_ratio < 1e3


def test_moser4_refinement_stability():
    # identical draws across resolutions: rebuild the rng per level
    maxima = []
    for n in (24, 48):
        grid = Grid(n1=n, n2=n, L1=2.0, L2=2 * np.pi)
        rep = inequality_harness("moser4", samples=6, grid=grid, nt=7, m=2,
                                 rng=np.random.default_rng(6))
        maxima.append(rep.max_ratio)
    assert max(maxima) / min(maxima) <= 2.0


def test_zero_field_all_ratios_zero(grid):
    from cvsheet.norms import _harness_ratio
    z = GridFunction(np.zeros((5, grid.n1, grid.n2)), grid, dt=0.25)
    assert _harness_ratio("moser4", z, z, 2, np.random.default_rng(0)) == 0.0


def test_gridfunction_binary_roundtrip(tmp_path, grid):
    u = random_smooth_field(grid, nt=5, T=0.5, rng=np.random.default_rng(2))
    p = tmp_path / "field.cvsg"
    u.save(p)
    v = GridFunction.load(p)
    assert np.array_equal(u.values, v.values)
    assert v.dt == pytest.approx(u.dt)
    assert (v.grid.n1, v.grid.n2) == (grid.n1, grid.n2)


def test_gridfunction_csv(tmp_path, grid):
    u = GridFunction(np.ones((grid.n1, grid.n2)), grid)
    p = tmp_path / "field.csv"
    u.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "x1,x2,value"
    assert len(lines) == 1 + grid.n1 * grid.n2
