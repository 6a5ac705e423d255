import pytest

from churnskip import metrics
from churnskip.errors import EmptyWindow
from churnskip.maintenance import Simulation
from churnskip.params import SimParams
from churnskip.simcore import LedgerRow, WorkLedger
from churnskip.skiplist import oracle_build, sample_height
import random


def ledger_from(rows):
    ledger = WorkLedger()
    ledger.rows = rows
    return ledger


def test_zero_window_ratio():
    ledger = ledger_from([LedgerRow(i) for i in range(10)])
    report = metrics.competitiveness(ledger, 2, 5, alpha=2, beta_bound=8.0)
    assert report.work == 0
    assert report.ratio == 0.0
    assert not report.flagged


def test_empty_window_rejected():
    ledger = ledger_from([LedgerRow(0)])
    with pytest.raises(EmptyWindow):
        metrics.competitiveness(ledger, 5, 5, 1, 1.0)


def test_backshift_captures_prior_spike():
    # churn spike at rounds 2-3, work during 6-9: alpha=0 flags, alpha=4 passes
    rows = []
    for i in range(12):
        row = LedgerRow(i)
        if i in (2, 3):
            row.churn_in = row.churn_out = 5
        if 6 <= i <= 9:
            row.messages_sent = 40
        rows.append(row)
    ledger = ledger_from(rows)
    flat = metrics.competitiveness(ledger, 6, 9, alpha=0, beta_bound=10.0)
    assert flat.flagged
    shifted = metrics.competitiveness(ledger, 6, 9, alpha=4, beta_bound=10.0)
    assert not shifted.flagged
    assert shifted.churn_shifted == 20


def test_cycle_window_reports():
    params = SimParams(n=128, seed_adv=2, seed_alg=3, churn_rate=2,
                       horizon_cycles=4)
    sim = Simulation(params)
    sim.run()
    reports = metrics.cycle_windows(sim)
    assert len(reports) == len(sim.cycles)
    for rep in reports:
        assert rep.ratio <= params.beta_bound


def test_height_and_run_length_checks():
    rng = random.Random(0)
    keys = list(range(4096))
    net = oracle_build(keys, [sample_height(rng) for _ in keys])
    assert metrics.max_height_ok(net, 4096)
    m = metrics.mean_run_length(net)
    assert 1.8 <= m <= 2.2


def test_occupancy_chi_square_accepts_uniform_and_rejects_skew():
    rng = random.Random(1)
    uniform = [sum(1 for _ in range(40)) + rng.randrange(-5, 6) for _ in range(24)]
    stat, crit, ok = metrics.occupancy_chi_square([max(1, u) for u in uniform])
    assert ok
    skew = [5] * 23 + [900]
    stat, crit, ok = metrics.occupancy_chi_square(skew)
    assert not ok


def test_whp_report_and_csv():
    sims = []
    for seed in (1, 2):
        params = SimParams(n=128, seed_adv=seed, seed_alg=seed + 50,
                           churn_rate=2, horizon_cycles=3, query_density=0.005)
        sim = Simulation(params)
        sim.run()
        sims.append(sim)
    report = metrics.whp_report(sims, search_probe=50)
    assert report.seeds == 2
    assert report.failures == 0
    assert report.height_violations == 0
    assert report.search_tail_violations == 0
    assert report.searches == 100
    rows = metrics.csv_rows(sims)
    assert rows[0] == "n,seed,cycle,rounds,ratio"
    assert len(rows) == 1 + sum(len(s.cycles) for s in sims)
