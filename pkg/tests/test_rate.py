"""Rate model and its oracles."""

from __future__ import annotations

import numpy as np
import pytest

from fusionroute.rate import (
    channel_rate,
    classic_path_rate,
    exhaustive_rate,
    flow_graph_rate,
    is_series_parallel,
    make_path,
    monte_carlo_rate,
    path_rate,
    sample_outcome,
)

from support import (
    bridge_flow_graph,
    build_net,
    chain_net,
    chain_nodes,
    flow_graph_from,
    random_sp_flow_graph,
    relay_net,
    two_lane_net,
)

GRID = [round(0.1 * k, 1) for k in range(1, 10)]


# ---------------------------------------------------------------------------
# channel_rate


def test_channel_rate_single_link_identity():
    for p in GRID:
        assert abs(channel_rate(p, 1) - p) < 1e-15


def test_channel_rate_width_two_closed_form():
    for p in GRID:
        assert abs(channel_rate(p, 2) - (1 - (1 - p) ** 2)) < 1e-12
    assert abs(channel_rate(0.1, 2) - 0.19) < 1e-12


def test_channel_rate_rejects_zero_width():
    with pytest.raises(ValueError):
        channel_rate(0.5, 0)


def test_channel_rate_monotone():
    last = 0.0
    for p in GRID:
        value = channel_rate(p, 3)
        assert value >= last
        last = value
    for w in range(1, 8):
        assert channel_rate(0.3, w + 1) >= channel_rate(0.3, w)


# ---------------------------------------------------------------------------
# path_rate


def test_path_rate_single_hop_is_link_probability():
    net = build_net(2, 0, [(0, 1, 0.37)])
    assert abs(path_rate(net, (0, 1), 1) - 0.37) < 1e-15


def test_path_rate_two_hop_mixed_widths():
    # relay fuses a width-2 channel with a width-1 channel
    for p in GRID:
        for q in GRID:
            net = relay_net(p, q)
            got = path_rate(net, (0, 2, 1), widths=[2, 1])
            want = (1 - (1 - p) ** 2) * p * q
            assert abs(got - want) < 1e-12


def test_path_rate_uniform_closed_form():
    for w, z in [(1, 2), (2, 3), (3, 4)]:
        p, q = 0.35, 0.8
        net = chain_net(z, p, q)
        got = path_rate(net, chain_nodes(z), w)
        want = (1 - (1 - p) ** w) ** z * q ** (z - 1)
        assert abs(got - want) < 1e-12


def test_path_rate_rejects_non_adjacent():
    net = relay_net(0.5, 0.9)
    with pytest.raises(ValueError, match="not adjacent"):
        path_rate(net, (0, 1), 1)


def test_make_path_metric_matches_rate():
    net = chain_net(3, 0.4, 0.85)
    path = make_path(net, chain_nodes(3), 2)
    assert path.metric == path_rate(net, path)


# ---------------------------------------------------------------------------
# classic_path_rate


def test_classic_two_disjoint_lanes():
    for p in GRID:
        for q in GRID:
            net = two_lane_net(p, q)
            total = classic_path_rate(net, (0, 2, 1), 1) + classic_path_rate(net, (0, 3, 1), 1)
            assert abs(total - 2 * p * p * q) < 1e-12


def test_classic_single_lane():
    net = chain_net(3, 0.3, 0.7)
    assert abs(classic_path_rate(net, chain_nodes(3), 1) - 0.3**3 * 0.7**2) < 1e-12


def test_classic_vs_fusion_ratio_at_small_p():
    p = 1e-3
    net = chain_net(4, p, 0.9)
    nodes = chain_nodes(4)
    ratio = path_rate(net, nodes, 3) / classic_path_rate(net, nodes, 3)
    assert abs(ratio - 27.0) / 27.0 < 0.01


def test_classic_bounded_by_width_times_fusion():
    rng = np.random.default_rng(5)
    for _ in range(50):
        p = float(rng.uniform(0.05, 0.95))
        q = float(rng.uniform(0.3, 1.0))
        w = int(rng.integers(1, 5))
        z = int(rng.integers(1, 5))
        net = chain_net(z, p, q) if z > 1 else build_net(2, 0, [(0, 1, p)])
        nodes = chain_nodes(z) if z > 1 else (0, 1)
        assert classic_path_rate(net, nodes, w) <= w * path_rate(net, nodes, w) + 1e-12


# ---------------------------------------------------------------------------
# flow_graph_rate


def test_flow_graph_single_path_equals_path_rate():
    net = chain_net(3, 0.45, 0.8)
    fg = flow_graph_from(net, 0, [(chain_nodes(3), 2)])
    assert abs(flow_graph_rate(net, fg) - path_rate(net, chain_nodes(3), 2)) < 1e-12


def test_flow_graph_double_width_relay():
    # width-2 channels both sides of one relay performing a four-link fusion
    for p in GRID:
        for q in GRID:
            net = relay_net(p, q)
            fg = flow_graph_from(net, 0, [((0, 2, 1), 2)])
            want = q * (1 - (1 - p) ** 2) ** 2
            assert abs(flow_graph_rate(net, fg) - want) < 1e-12


def test_flow_graph_matches_exhaustive_on_random_sp():
    rng = np.random.default_rng(1234)
    for _ in range(120):
        net, fg = random_sp_flow_graph(rng)
        assert abs(flow_graph_rate(net, fg) - exhaustive_rate(net, fg)) <= 1e-12


def test_flow_graph_rejects_disconnected():
    net = two_lane_net(0.5, 0.9)
    fg = flow_graph_from(net, 0, [((0, 2, 1), 1)])
    del fg.channels[(0, 2)]
    fg.channels[(1, 3)] = 1
    fg.orientation[(1, 3)] = (3, 1)
    with pytest.raises(ValueError):
        flow_graph_rate(net, fg)


def test_flow_graph_rejects_cycle():
    net = build_net(2, 2, [(0, 2, 0.5), (2, 3, 0.5), (3, 1, 0.5)])
    fg = flow_graph_from(net, 0, [((0, 2, 3, 1), 1)])
    fg.orientation[(2, 3)] = (3, 2)
    fg.orientation[(3, 1)] = (1, 3)
    with pytest.raises(ValueError):
        flow_graph_rate(net, fg)


def test_flow_graph_merge_beats_members():
    net = two_lane_net(0.4, 0.8)
    fg = flow_graph_from(net, 0, [((0, 2, 1), 1), ((0, 3, 1), 1)])
    merged = flow_graph_rate(net, fg)
    for m in fg.members:
        assert merged >= m.metric - 1e-12


def test_bridge_graph_is_not_series_parallel():
    net, fg = bridge_flow_graph(0.6, 0.85)
    assert not is_series_parallel(fg)
    # fallback recursion still returns a probability
    value = flow_graph_rate(net, fg)
    assert 0.0 <= value <= 1.0


def test_rate_monotone_in_p_q_and_width():
    rng = np.random.default_rng(77)
    for _ in range(20):
        net, fg = random_sp_flow_graph(rng)
        base = flow_graph_rate(net, fg)
        # widen one channel
        wider = fg.copy()
        key = sorted(wider.channels)[0]
        wider.channels[key] += 1
        assert flow_graph_rate(net, wider) >= base - 1e-12
        # raise one link probability
        boosted_edges = [
            e if e.key != key else type(e)(e.u, e.v, e.length, min(1.0, e.link_prob + 0.05))
            for e in net.edges
        ]
        net2 = type(net)(net.nodes, boosted_edges)
        assert flow_graph_rate(net2, fg) >= base - 1e-12
        # raise one swap probability
        switches = fg.interior_switches(net)
        if switches:
            target = switches[0]
            boosted_nodes = [
                n if n.id != target else type(n)(
                    n.id, n.kind, n.x, n.y, n.capacity, min(1.0, n.swap_prob + 0.05)
                )
                for n in net.nodes
            ]
            net3 = type(net)(boosted_nodes, net.edges)
            assert flow_graph_rate(net3, fg) >= base - 1e-12


# ---------------------------------------------------------------------------
# exhaustive_rate


def test_exhaustive_single_channel():
    net = build_net(2, 0, [(0, 1, 0.42)])
    fg = flow_graph_from(net, 0, [((0, 1), 1)])
    assert abs(exhaustive_rate(net, fg) - 0.42) < 1e-12


def test_exhaustive_series_chain():
    net = build_net(2, 1, [(0, 2, 0.5), (2, 1, 0.6)], q=0.7)
    fg = flow_graph_from(net, 0, [((0, 2, 1), 1)])
    assert abs(exhaustive_rate(net, fg) - 0.5 * 0.6 * 0.7) < 1e-12


def test_exhaustive_double_width_relay():
    p, q = 0.3, 0.8
    net = relay_net(p, q)
    fg = flow_graph_from(net, 0, [((0, 2, 1), 2)])
    want = q * (1 - (1 - p) ** 2) ** 2
    assert abs(exhaustive_rate(net, fg) - want) < 1e-12


def test_exhaustive_respects_element_bound():
    net = chain_net(3, 0.5, 0.9)
    fg = flow_graph_from(net, 0, [(chain_nodes(3), 4)])
    with pytest.raises(ValueError, match="monte_carlo_rate"):
        exhaustive_rate(net, fg, max_elements=8)


def test_exhaustive_matches_fallback_truth_on_bridge():
    # the analytic fallback approximates; enumeration stays the ground truth
    net, fg = bridge_flow_graph(0.5, 0.8)
    exact = exhaustive_rate(net, fg)
    est, err = monte_carlo_rate(net, fg, 200_000, seed=99)
    assert abs(est - exact) <= 4 * err


# ---------------------------------------------------------------------------
# monte_carlo_rate


def test_monte_carlo_certain_success():
    net = relay_net(1.0, 1.0)
    fg = flow_graph_from(net, 0, [((0, 2, 1), 1)])
    est, err = monte_carlo_rate(net, fg, 1000, seed=1)
    assert est == 1.0 and err == 0.0


def test_monte_carlo_certain_failure():
    net = build_net(2, 1, [(0, 2, 0.0), (2, 1, 0.9)], q=1.0)
    fg = flow_graph_from(net, 0, [((0, 2, 1), 1)])
    est, err = monte_carlo_rate(net, fg, 1000, seed=1)
    assert est == 0.0 and err == 0.0


def test_monte_carlo_is_deterministic_per_seed():
    net = chain_net(3, 0.6, 0.85)
    fg = flow_graph_from(net, 0, [(chain_nodes(3), 2)])
    assert monte_carlo_rate(net, fg, 5000, seed=7) == monte_carlo_rate(net, fg, 5000, seed=7)
    est_a = monte_carlo_rate(net, fg, 5000, seed=7)[0]
    est_b = monte_carlo_rate(net, fg, 5000, seed=8)[0]
    assert est_a != est_b  # different stream, almost surely different estimate


def test_monte_carlo_close_to_analytic_mixed_width_path():
    p, q = 0.2, 0.9
    net = relay_net(p, q)
    fg = flow_graph_from(net, 0, [((0, 2, 1), 1)])
    fg.channels[(0, 2)] = 2
    analytic = (1 - (1 - p) ** 2) * p * q
    est, err = monte_carlo_rate(net, fg, 1_000_000, seed=5)
    assert abs(est - analytic) <= 4 * err


def test_sample_outcome_shape():
    net = chain_net(3, 0.5, 0.9)
    fg = flow_graph_from(net, 0, [(chain_nodes(3), 3)])
    sample = sample_outcome(net, fg, np.random.default_rng(3))
    assert set(sample.link_counts) == set(fg.channels)
    for key, count in sample.link_counts.items():
        assert 0 <= count <= fg.channels[key]
    assert set(sample.fusion_up) == set(fg.interior_switches(net))
