import math
import random

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from churnskip.phase_delete import (
    MessageShapeViolation,
    _merge_pairs,
    bridge_chain,
    delete_phase,
    expected_bridges,
    tree_formation,
)
from churnskip.skiplist import LS, RS, oracle_build, oracle_delete, sample_height


def build_random(n, seed):
    rng = random.Random(seed)
    keys = sorted(rng.sample(range(10 * n), n))
    heights = [sample_height(rng) for _ in keys]
    return oracle_build(keys, heights), keys, heights, rng


def test_minimal_black_red_red_black():
    net = oracle_build([10, 20, 30, 40], [0, 0, 0, 0])
    summary, _ = delete_phase(net, {20, 30})
    assert summary.reds_removed == 2
    assert summary.bridge_edges_created == 1
    assert net.level_list(0) == [10, 40]
    assert net.validate().ok


def test_no_reds_is_free():
    net = oracle_build([1, 2, 3], [0, 1, 0])
    summary, profile = delete_phase(net, set())
    assert summary.reds_removed == 0
    assert profile.work == 0
    assert profile.rounds == 0


def test_single_red_tower_bridges_every_level():
    net = oracle_build([10, 20, 30], [3, 2, 3])
    summary, profile = delete_phase(net, {20})
    # one bridge per level of the removed tower
    assert summary.bridge_edges_created == 3
    assert net.validate().ok
    n = 3
    assert summary.messages_used <= 40 * (2 + 1) * math.log2(8)


@pytest.mark.parametrize("n", [64, 512])
def test_oracle_equivalence_seeded(n):
    for seed in range(100):
        net, keys, heights, rng = build_random(n, seed)
        reds = set(rng.sample(keys, n // 5))
        reference = oracle_build(keys, heights)
        oracle_delete(reference, reds)
        summary, profile = delete_phase(net, reds)
        assert net.same_structure(reference), f"seed {seed}"
        assert net.validate().ok
        assert summary.reds_removed == len(reds)


def test_bridges_connect_level_consecutive_blacks_only():
    net, keys, heights, rng = build_random(256, 77)
    reds = set(rng.sample(keys, 60))
    blacks = {k: h for k, h in zip(keys, heights) if k not in reds}
    # capture adjacency expectations per level before mutation
    expect = {}
    for lvl in range(net.height + 1):
        chain = [LS, *net.iter_level(lvl), RS]
        expect[lvl] = expected_bridges(chain, reds)
    delete_phase(net, reds)
    for lvl, pairs in expect.items():
        level_blacks = [LS] + [k for k in sorted(blacks) if blacks[k] >= lvl] + [RS]
        rank = {k: i for i, k in enumerate(level_blacks)}
        for a, b in pairs:
            assert rank[b] == rank[a] + 1


def test_tree_shape_and_leaves():
    net, keys, heights, rng = build_random(512, 5)
    reds = set(rng.sample(keys, 100))
    lvl = 0
    tree = tree_formation(net, lvl, reds)
    chain = [LS, *net.iter_level(lvl), RS]
    leaves = set()
    for i, key in enumerate(chain):
        if key in reds:
            continue
        if (i and chain[i - 1] in reds) or (i + 1 < len(chain) and chain[i + 1] in reds):
            leaves.add(key)
    assert set(tree.leaves) == leaves
    assert tree.root == (LS, net.height)
    assert tree.depth <= 8 * math.log2(512)
    # every recorded parent chain terminates at the root
    for node in tree.parents:
        cur, hops = node, 0
        while cur != tree.root:
            cur = tree.parents[cur]
            hops += 1
            assert hops < 10_000


def test_work_proportional_to_reds():
    net, keys, heights, rng = build_random(512, 31)
    reds = set(rng.sample(keys, 20))
    summary, profile = delete_phase(net, reds)
    polylog = math.log2(512) ** 3
    assert profile.work <= polylog * len(reds)
    assert summary.rounds_used <= 8 * math.log2(512)


def test_merge_pairs_shape_violation():
    with pytest.raises(MessageShapeViolation):
        _merge_pairs((1, False, 2, True), (3, False, 4, False), [], 0)


def test_bridge_chain_matches_scan():
    rng = random.Random(4)
    for _ in range(50):
        keys = sorted(rng.sample(range(1000), rng.randint(2, 60)))
        reds = {k for k in keys if rng.random() < 0.4}
        chain = [LS, *keys, RS]
        bridges, profile = bridge_chain(chain, reds)
        assert bridges == expected_bridges(chain, reds)
        if bridges:
            assert profile.rounds <= math.ceil(math.log2(len(chain))) + 2


@settings(max_examples=60, deadline=None,
          suppress_health_check=[HealthCheck.large_base_example])
@given(
    st.sets(st.integers(0, 2000), min_size=1, max_size=50),
    st.randoms(use_true_random=False),
)
def test_delete_matches_oracle_property(keyset, rnd):
    keys = sorted(keyset)
    heights = [sample_height(rnd) for _ in keys]
    reds = {k for k in keys if rnd.random() < 0.5}
    net = oracle_build(keys, heights)
    reference = oracle_build(keys, heights)
    oracle_delete(reference, reds)
    delete_phase(net, reds)
    assert net.same_structure(reference)
    assert net.validate().ok


def test_worked_instance_tree_shape():
    # backtracking tree of the worked deletion instance at level 0: each
    # leaf climbs its own tower while it is the tallest and hops left
    # through shorter nodes, meeting at the left-topmost sentinel
    from churnskip.fixtures import delete_instance

    net, reds = delete_instance()
    tree = tree_formation(net, 0, reds)
    assert sorted(tree.leaves) == [LS, 13, 26, 50, 60, RS]
    expected = {
        (LS, 0): (LS, 1), (LS, 1): (LS, 2), (LS, 2): (LS, 3),
        (13, 0): (13, 1), (13, 1): (13, 2), (13, 2): (13, 3),
        (13, 3): (LS, 3),
        (26, 0): (26, 1), (26, 1): (13, 1),
        (35, 1): (35, 2), (35, 2): (13, 2),
        (50, 0): (50, 1), (50, 1): (35, 1),
        (60, 0): (50, 0),
        (RS, 0): (RS, 1), (RS, 1): (RS, 2), (RS, 2): (RS, 3),
        (RS, 3): (13, 3),
    }
    assert tree.parents == expected
    assert tree.root == (LS, 3)


def test_delete_everything_leaves_sentinel_pair():
    net = oracle_build([1, 2, 3, 4], [0, 2, 1, 0])
    delete_phase(net, {1, 2, 3, 4})
    assert net.level_list(0) == []
    assert net.validate().ok
