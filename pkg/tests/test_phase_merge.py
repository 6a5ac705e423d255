import math
import random

from hypothesis import given, settings, strategies as st

from churnskip.fixtures import MERGE_NARRATIVE, merge_instance
from churnskip.phase_buffer import raise_levels
from churnskip.phase_merge import WaveEngine, preprocess, wave_merge
from churnskip.skiplist import (
    BUF_LS,
    BUF_RS,
    key_name,
    oracle_build,
    oracle_merge,
    sample_height,
    search,
)


def make_buffer(keys, heights):
    buf, _ = raise_levels(sorted(keys), heights)
    return buf


def random_pair(nc, nb, seed):
    rng = random.Random(seed)
    pool = rng.sample(range(10 * (nc + nb)), nc + nb)
    c_keys, b_keys = sorted(pool[:nc]), sorted(pool[nc:])
    heights = {k: sample_height(rng) for k in pool}
    clean = oracle_build(c_keys, [heights[k] for k in c_keys])
    buf = make_buffer(b_keys, {k: heights[k] for k in b_keys})
    return clean, buf, c_keys, b_keys, heights


def test_singleton_buffer_acts_like_insertion():
    clean, buf, c_keys, b_keys, heights = random_pair(40, 1, 0)
    summary, profile, events = wave_merge(clean, buf)
    ref = oracle_merge(oracle_build(c_keys, [heights[k] for k in c_keys]),
                       b_keys, heights)
    assert clean.same_structure(ref)
    assert clean.validate().ok


def test_preprocess_groups_match_run_scan():
    rng = random.Random(3)
    keys = sorted(rng.sample(range(5000), 256))
    heights = {k: sample_height(rng) for k in keys}
    buf = make_buffer(keys, heights)
    pre = preprocess(buf)
    # oracle: maximal equal-height runs per level, sentinels included
    expected = 0
    hs = {BUF_LS: buf.height, BUF_RS: buf.height, **heights}
    for lvl in range(buf.height + 1):
        prev_tall = True
        level = [k for k in [BUF_LS, *keys, BUF_RS] if hs[k] >= lvl]
        run = 0
        for k in level:
            if hs[k] == lvl:
                run += 1
            else:
                expected += 1 if run else 0
                run = 0
        expected += 1 if run else 0
    assert len(pre.groups) == expected
    assert max(len(g) for g in pre.groups) <= 4 * math.log2(256)
    assert pre.top_members == buf.level_list(buf.height)


def test_oracle_equivalence_seeded_small():
    for seed in range(40):
        clean, buf, c_keys, b_keys, heights = random_pair(64, 64, seed)
        ref = oracle_merge(oracle_build(c_keys, [heights[k] for k in c_keys]),
                           b_keys, heights)
        summary, profile, events = wave_merge(clean, buf)
        assert clean.same_structure(ref), f"seed {seed}"
        assert clean.validate().ok
        assert BUF_LS not in clean.heights and BUF_RS not in clean.heights


def test_merge_work_proportional_to_buffer():
    clean, buf, c_keys, b_keys, heights = random_pair(512, 128, 9)
    summary, profile, events = wave_merge(clean, buf)
    assert profile.work <= math.log2(512) ** 3 * (len(b_keys) + 2)
    assert summary.rounds_used <= 12 * math.log2(512)


def test_empty_levels_and_tall_buffer():
    # buffer taller than the clean list forces sentinel growth
    clean = oracle_build([10, 20], [0, 1])
    buf = make_buffer([5, 15], {5: 6, 15: 0})
    summary, profile, events = wave_merge(clean, buf)
    ref = oracle_merge(oracle_build([10, 20], [0, 1]), [5, 15], {5: 6, 15: 0})
    assert clean.same_structure(ref)


def test_wave_monotone_activation():
    clean, buf, c_keys, b_keys, heights = random_pair(128, 128, 21)
    engine = WaveEngine(clean, buf)
    parents = dict(engine.parents)
    walks = engine.walks
    engine.run()
    merged_round: dict[tuple[int, int], int] = {}
    activated_round: dict[int, int] = {}
    for ev in engine.events:
        if ev["event"] == "merged_at_level":
            pass
    # replay activation order from group spans: every group activated only
    # after its members' parents merged at or below the member height, or
    # with the independence flag set
    for group, born, done in engine.group_spans:
        for m in group.members:
            lp, rp = parents.get(m, (None, None))
            walk = walks[m]
            for parent, indep in ((lp, walk.indep_lp), (rp, walk.indep_rp)):
                if parent is None or indep:
                    continue
                assert engine.merged_level.get(parent, 99) <= walk.height


def test_split_events_record_dichotomy():
    clean, buf, c_keys, b_keys, heights = random_pair(256, 256, 5)
    summary, profile, events = wave_merge(clean, buf)
    assert summary.splits == sum(1 for e in events if e["event"] == "split")
    assert summary.splits > 0


def test_group_time_bound_against_classic_insertion():
    # groups with no pipeline dependency finish within twice the classic
    # insertion rounds of their largest member, plus the split handoffs
    for seed in (2, 7, 11):
        clean, buf, c_keys, b_keys, heights = random_pair(256, 256, seed)
        base = oracle_build(c_keys, [heights[k] for k in c_keys])
        engine = WaveEngine(clean, buf)
        engine.run()
        for group, born, done in engine.group_spans:
            biggest = max((m for m in group.members if m not in (BUF_LS, BUF_RS)),
                          default=None)
            if biggest is None:
                continue
            probe = search(base, biggest)
            classic = probe.path_rounds + 1
            span = done - born
            allowance = 2 * classic + 2 * group.splits + 2 * (buf.height + 2)
            assert span <= allowance, (group.members, span, classic)


def test_merge_time_shape():
    clean, buf, c_keys, b_keys, heights = random_pair(512, 512, 13)
    engine = WaveEngine(clean, buf)
    engine.run()
    top = buf.height
    for group, born, done in engine.group_spans:
        h = engine.walks[group.members[0]].height
        assert done <= 8 * (math.log2(512) + top - h + 2)


def test_golden_merge_narrative():
    clean, heights = merge_instance()
    buf = make_buffer(sorted(heights), heights)
    summary, profile, events = wave_merge(clean, buf)
    seq = [(e["event"], key_name(e["group_leader"]), e["level"]) for e in events]
    idx = 0
    for want in MERGE_NARRATIVE:
        while idx < len(seq) and seq[idx] != want:
            idx += 1
        assert idx < len(seq), f"narrative event {want} missing or out of order"
        idx += 1
    assert clean.level_list(0) == sorted([*heights] + [4, 13, 26, 50, 60, 75])
    assert clean.validate().ok


def test_golden_event_details():
    clean, heights = merge_instance()
    buf = make_buffer(sorted(heights), heights)
    summary, profile, events = wave_merge(clean, buf)
    splits = [e for e in events if e["event"] == "split"]
    assert splits[0]["level"] == 3 and splits[0]["z"] == 13
    assert splits[0]["new_leader"] == 23
    assert splits[1]["level"] == 1 and splits[1]["z"] == 50
    assert splits[1]["new_leader"] == 98
    top_merge = next(e for e in events
                     if e["event"] == "merged_at_level" and e["group_leader"] == 23
                     and e["level"] == 3)
    assert top_merge["left"] == 13
    m25 = next(e for e in events
               if e["event"] == "merged_at_level" and e["group_leader"] == 25
               and e["level"] == 0)
    assert m25["left"] == 23 and m25["right"] == 26
    m55 = next(e for e in events
               if e["event"] == "merged_at_level" and e["group_leader"] == 55)
    assert m55["level"] == 0 and m55["left"] == 50 and m55["right"] == 60
    m1 = next(e for e in events
              if e["event"] == "merged_at_level" and e["group_leader"] == 1)
    assert m1["level"] == 0 and m1["left"] == BUF_LS


@settings(max_examples=50, deadline=None)
@given(
    st.sets(st.integers(0, 4000), min_size=2, max_size=60),
    st.randoms(use_true_random=False),
)
def test_wave_matches_oracle_property(keyset, rnd):
    keys = sorted(keyset)
    cut = rnd.randrange(1, len(keys))
    c_keys, b_keys = keys[:cut], keys[cut:]
    rnd.shuffle(c_keys := list(c_keys))
    c_keys.sort()
    heights = {k: sample_height(rnd) for k in keys}
    clean = oracle_build(c_keys, [heights[k] for k in c_keys])
    buf = make_buffer(b_keys, {k: heights[k] for k in b_keys})
    wave_merge(clean, buf)
    reference = oracle_merge(
        oracle_build(c_keys, [heights[k] for k in c_keys]), b_keys, heights)
    assert clean.same_structure(reference)
    assert clean.validate().ok


def test_merge_into_empty_clean():
    clean = oracle_build([], [])
    buf = make_buffer([5, 9], {5: 1, 9: 0})
    wave_merge(clean, buf)
    assert clean.same_structure(oracle_build([5, 9], [1, 0]))
