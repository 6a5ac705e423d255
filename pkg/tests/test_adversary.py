import math

import pytest

from churnskip.adversary import ChurnSchedule, gen_queries, gen_schedule
from churnskip.errors import HorizonTooShort, RateTooHigh


def test_zero_rate_schedule_is_empty():
    sched = gen_schedule(1, 64, 0, horizon=120)
    assert all(not rc.leaves and not rc.joins for rc in sched.rounds)
    assert sched.validate() == "OK"


def test_uniform_schedule_properties():
    n = 1024
    rate = n // (10 * math.ceil(math.log2(n)))  # 10 per round
    sched = gen_schedule(7, n, rate, horizon=400, strategy="uniform_random")
    assert sched.validate() == "OK"
    maintenance = [rc for i, rc in enumerate(sched.rounds) if i >= sched.bootstrap]
    assert all(len(rc.leaves) == 10 and len(rc.joins) == 10 for rc in maintenance)
    for rc in maintenance:
        hosts = [h for _, h in rc.joins]
        assert len(set(hosts)) == 10


def test_rate_cap_enforced():
    with pytest.raises(RateTooHigh):
        gen_schedule(1, 64, 64, horizon=200)
    with pytest.raises(HorizonTooShort):
        gen_schedule(1, 64, 1, horizon=3)


def test_targeted_respects_rate():
    n = 1024
    sched = gen_schedule(3, n, 10, horizon=300, strategy="targeted_committee")
    assert sched.validate() == "OK"
    for rc in sched.rounds[sched.bootstrap:]:
        assert len(rc.leaves) <= 10


def test_burst_alternates_blocks():
    n = 256
    sched = gen_schedule(5, n, 8, horizon=400, strategy="burst")
    assert sched.validate() == "OK"
    tail = sched.rounds[sched.bootstrap:]
    amounts = {len(rc.leaves) for rc in tail}
    assert amounts == {0, 8}


def test_schedule_serialization_roundtrip():
    sched = gen_schedule(11, 128, 4, horizon=200, strategy="uniform_random")
    text = sched.serialize()
    again = ChurnSchedule.deserialize(text)
    assert again.serialize() == text
    assert again.validate() == "OK"
    assert again.rounds == sched.rounds


def test_schedule_frozen_after_replay():
    sched = gen_schedule(2, 128, 4, horizon=200)
    before = sched.serialize()
    for rnd in range(sched.horizon):
        sched.churn_for(rnd)
    assert sched.serialize() == before


def test_queries_density_zero_empty():
    sched = gen_schedule(1, 64, 1, horizon=150)
    assert gen_queries(1, sched, 0.0) == []


def test_queries_sources_alive_and_after_bootstrap():
    sched = gen_schedule(9, 256, 4, horizon=300)
    queries = gen_queries(9, sched, 0.02)
    assert queries
    alive = set(range(256))
    by_round = {}
    for i, rc in enumerate(sched.rounds):
        alive -= set(rc.leaves)
        alive |= {n for n, _ in rc.joins}
        by_round[i] = set(alive)
    for q in queries:
        assert q.r >= sched.bootstrap
        assert q.s in by_round[q.r]


def test_queries_cover_ground_truth_classes():
    sched = gen_schedule(13, 256, 4, horizon=400)
    queries = gen_queries(13, sched, 0.05)
    ghosts = 0
    gone_at_issue = 0
    alive_at_issue = 0
    for q in queries:
        if not sched.ever_known(q.x):
            ghosts += 1
            continue
        start, end = sched.lifetime(q.x)
        if end is not None and end <= q.r:
            gone_at_issue += 1
        elif start <= q.r:
            alive_at_issue += 1
    assert ghosts and gone_at_issue and alive_at_issue


def test_schedule_oblivious_to_algorithm_seed():
    # pure function of (seed_adv, config): the algorithm stream never leaks in
    a = gen_schedule(21, 128, 4, horizon=240)
    b = gen_schedule(21, 128, 4, horizon=240)
    assert a.serialize() == b.serialize()
    from churnskip.maintenance import Simulation
    from churnskip.params import SimParams
    s1 = Simulation(SimParams(n=64, seed_adv=5, seed_alg=1, churn_rate=1,
                              horizon_cycles=2))
    s2 = Simulation(SimParams(n=64, seed_adv=5, seed_alg=999, churn_rate=1,
                              horizon_cycles=2))
    assert s1.schedule.serialize() == s2.schedule.serialize()
