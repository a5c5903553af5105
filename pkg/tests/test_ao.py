import dataclasses

import numpy as np
import pytest

from conftest import desk_channels, desk_config
from irs_wpcn.ao import Variant, initial_phases, run_ao, run_benchmark_suite, time_allocation
from irs_wpcn.channel import sample_channels
from irs_wpcn.errors import ScenarioInfeasible, TimeInfeasible
from irs_wpcn.robust import EhParams, UncertaintyRadii, eh_inverse

EH = EhParams()


def gains_instance(xi_values):
    """Diagonal ``phi_k`` and ``S = I`` with ``Xi(c_k)`` equal to the given harvested powers."""
    k = len(xi_values)
    c = [eh_inverse(x, EH) for x in xi_values]
    phi = [np.diag(np.eye(k)[i] * c[i]).astype(complex) for i in range(k)]
    return np.eye(k, dtype=complex), phi


def test_time_allocation_example():
    s, phi = gains_instance([9e-3, 4e-3])
    tau = time_allocation(s, [1e-3, 1e-3], phi, UncertaintyRadii.zeros(2), EH)
    assert tau == pytest.approx(0.2, abs=1e-12)


def test_time_allocation_lp_matches_closed_form():
    rng = np.random.default_rng(4)
    for _ in range(100):
        k = int(rng.integers(1, 6))
        s, phi = gains_instance(rng.uniform(1e-4, 0.9 * EH.xi, k))
        p = rng.uniform(0, 2e-2, k)
        closed = time_allocation(s, p, phi, UncertaintyRadii.zeros(k), EH)
        lp = time_allocation(s, p, phi, UncertaintyRadii.zeros(k), EH, method="lp")
        assert lp == pytest.approx(closed, abs=1e-9)


def test_time_allocation_edges():
    s, phi = gains_instance([5e-3, 5e-3])
    assert time_allocation(s, [0.0, 0.0], phi, UncertaintyRadii.zeros(2), EH, tau_min=1e-4) == 1e-4
    with pytest.raises(TimeInfeasible):
        time_allocation(np.zeros((2, 2)), [1e-3, 0.0], phi, UncertaintyRadii.zeros(2), EH)


def test_initial_phases():
    e, q = initial_phases(20, 3)
    assert np.allclose(np.abs(e), 1) and np.allclose(np.abs(q), 1)
    e2, _ = initial_phases(20, 3)
    assert np.array_equal(e, e2)
    assert not np.allclose(e, q)


def test_run_ao_trace_and_audit():
    cfg = desk_config()
    state, trace = run_ao(desk_channels(0), cfg.system, Variant.PROPOSED, 0)
    obj = trace.objectives
    assert np.all(np.diff(obj) <= 1e-6 * obj[:-1])
    assert trace.converged and trace.iterations <= 30
    assert state.objective == pytest.approx(obj[-1])
    assert state.objective == pytest.approx(state.tau * np.real(np.trace(state.energy_matrix)))
    assert all(v <= 1e-6 for v in trace.audit.values())
    assert trace.wall_time > 0


def test_without_irs_ignores_element_count():
    cfg = desk_config()
    seed = 2
    geom = cfg.geometry.realise(cfg.channel.users, seed)
    objs = []
    for m in (20, 40, 60):
        ch = sample_channels(dataclasses.replace(cfg.channel, elements=m), geom, seed)
        state, _ = run_ao(ch, cfg.system, Variant.WITHOUT_IRS, seed)
        objs.append(state.objective)
    assert np.ptp(objs) <= 1e-9 * objs[0]


def test_perfect_csi_dominates_proposed():
    cfg = desk_config()
    for seed in range(5):
        ch = desk_channels(seed)
        try:
            prop, _ = run_ao(ch, cfg.system, Variant.PROPOSED, seed)
        except ScenarioInfeasible:
            continue
        perf, _ = run_ao(ch, cfg.system, Variant.PERFECT_CSI, seed)
        assert perf.objective <= prop.objective + 1e-6


def test_full_scale_scenario_reports_failing_stage():
    cfg = desk_config("full")
    with pytest.raises(ScenarioInfeasible) as info:
        run_ao(desk_channels(0, "full"), cfg.system, Variant.PROPOSED, 0)
    assert info.value.stage in ("energy_matrix", "receive_beams")


def test_suite_single_row():
    cfg = desk_config()
    res = run_benchmark_suite(desk_channels(0), cfg.system, [0], variants=[Variant.WITHOUT_IRS])
    assert len(res.rows) == 1
    assert res.counts == {"WithoutIrs": 1}
    assert res.means["WithoutIrs"] == pytest.approx(res.rows[0]["objective"], abs=0)


def test_suite_means_recomputed_from_rows():
    cfg = desk_config()
    res = run_benchmark_suite(desk_channels, cfg.system, [0, 1, 2], variants=[Variant.WITHOUT_IRS, Variant.RANDOM_PHASE])
    for v in ("WithoutIrs", "RandomPhase"):
        vals = [r["objective"] for r in res.rows if r["variant"] == v and not r["infeasible_stage"]]
        assert abs(np.mean(vals) - res.means[v]) <= 1e-12 * abs(res.means[v])
        assert res.counts[v] == len(vals)
    assert res.paired_means["RandomPhase"] <= res.paired_means["WithoutIrs"]
