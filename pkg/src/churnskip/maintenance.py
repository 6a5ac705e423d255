"""Continuous maintenance: bootstrap, the four-phase cycle, and query
service over the live view.

One Simulation owns the world clock, the committee overlay, and the clean
structure (whose "11"-labeled ports and live flags are the live network).
Phases compute structural outcomes through their engines and charge their
work round by round while churn keeps arriving; covering keeps every
departed node answerable throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

from .adversary import ChurnSchedule, Query, gen_queries, gen_schedule
from .errors import COMMITTEE_DESTROYED, InconsistentWorld, QUERY_TIMEOUT, STALLED
from .params import SimParams, ceil_log2
from .phase_buffer import create_buffer
from .phase_delete import delete_phase
from .phase_merge import WaveEngine
from .phase_update import live_equals_clean, update_phase
from .simcore import MAINTENANCE, World
from .skiplist import BUF_LS, BUF_RS, SkipNet, search
from .overlay import bootstrap_overlay, route_hops
from .work import WorkProfile

PHASES = ("Delete", "BufferCreate", "Merge", "Update")


@dataclass
class CycleSummary:
    cycle: int
    start_round: int
    end_round: int
    phase_rounds: list[int]
    reds: int
    joiners: int
    failures: int
    queries_served: int
    q_violations: int

    def as_record(self) -> dict:
        return {"cycle": self.cycle, "phase_rounds": self.phase_rounds,
                "reds": self.reds, "joiners": self.joiners,
                "failures": self.failures,
                "queries_served": self.queries_served,
                "q_violations": self.q_violations}


@dataclass
class QueryOutcome:
    x: int
    r: int
    s: int
    answer: bool
    answered_round: int
    stalled: bool = False

    @property
    def latency(self) -> int:
        return self.answered_round - self.r


@dataclass
class CoveringAudit:
    round: int
    node: int
    neighbor_count: int
    verified_round: int | None = None
    ok: bool | None = None


class Simulation:
    def __init__(self, params: SimParams, schedule: ChurnSchedule | None = None,
                 queries: list[Query] | None = None):
        self.params = params
        self.world = World(params)
        horizon = params.bootstrap_rounds + \
            max(1, params.horizon_cycles) * params.cycle_budget + 8
        self.schedule = schedule if schedule is not None else gen_schedule(
            params.seed_adv, params.n, params.churn_rate, horizon,
            params.strategy, params.bootstrap_rounds, params)
        if queries is None and params.query_density > 0:
            queries = gen_queries(params.seed_adv, self.schedule,
                                  params.query_density)
        self.queries_by_round: dict[int, list[Query]] = {}
        for q in queries or []:
            self.queries_by_round.setdefault(q.r, []).append(q)
        self.clean = SkipNet("C")
        self.overlay = None
        self.joiner_backlog: list[int] = []
        self.entered_live: dict[int, int] = {}
        self.removed_clean: dict[int, int] = {}
        self.cycles: list[CycleSummary] = []
        self.query_log: list[QueryOutcome] = []
        self.covering_log: list[CoveringAudit] = []
        self.phase_work: dict[int, dict[str, int]] = {}
        self.phase_records: list[dict] = []
        self.merge_events: list[dict] = []
        self._pending_audits: list[CoveringAudit] = []
        self.world.on_depart = self._on_depart
        self.world.on_join = self._on_join

    # -- churn hooks --------------------------------------------------------------

    def _on_depart(self, node: int) -> None:
        neighbors = []
        if node in self.clean.heights:
            neighbors = [("C", lvl, l, r)
                         for lvl, l, r in self.clean.neighbors_of(node)]
        record, edges = self.overlay.cover_node(node, neighbors, self.world.round)
        if record is None:
            self.world.fail(COMMITTEE_DESTROYED, f"covering node {node}")
            return
        self.world.charge_edges(formed=edges, category="covering")
        audit = CoveringAudit(self.world.round, node, len(neighbors))
        self.covering_log.append(audit)
        self._pending_audits.append(audit)

    def _on_join(self, node: int, host: int) -> None:
        # provisional committee (the host's) until the next reassignment tick
        addr = self.overlay.assignment.get(host)
        if addr is None:
            addrs = self.overlay.addresses(self.overlay.k)
            addr = addrs[self.world.rng_alg.randrange(len(addrs))]
        self.overlay.place(node, addr)
        self.world.charge_msgs(node, 1, category="covering")
        self.joiner_backlog.append(node)

    # -- the round pump --------------------------------------------------------------

    def _advance(self, phase: str) -> None:
        world = self.world
        world.cycle_phase = phase
        for q in self.queries_by_round.pop(world.round, ()):
            self._serve_query(q)
        world.run_round(self.schedule)
        if world.phase_tag == MAINTENANCE and \
                world.round % self.params.tick_period == 0:
            self.overlay.maintenance_tick(world.alive, world.rng_alg, world.round)
        for audit in self._pending_audits:
            if audit.round < world.round:
                speaker = self.overlay.covering_speaker(audit.node)
                audit.ok = speaker is not None and world.is_alive(speaker)
                audit.verified_round = world.round
        self._pending_audits = [a for a in self._pending_audits if a.ok is None]

    def _play(self, profile: WorkProfile, category: str, phase: str) -> int:
        for row in profile.rows:
            self.world.play_row(row, category)
            self._advance(phase)
        return profile.rounds

    # -- bootstrap --------------------------------------------------------------------

    def bootstrap_all(self) -> None:
        params = self.params
        for node in range(params.n):
            self.world.spawn(node)
        self.overlay, overlay_profile = bootstrap_overlay(
            range(params.n), params, self.world.rng_alg, allow_degenerate=True)
        self._play(overlay_profile, "bootstrap", "-")
        keys = list(range(params.n))
        buf, summary, profile = create_buffer(keys, self.world.heights, params.n)
        self._play(profile, "bootstrap", "-")
        if buf is not None:
            for key in (BUF_LS, BUF_RS):
                buf.unlink_tower(key)
            buf.tag = "C"
            self.clean = buf
        update_phase(self.clean)
        self._advance("-")
        for key in keys:
            self.entered_live[key] = self.world.round
        if self.world.round > params.bootstrap_rounds:
            raise InconsistentWorld(
                f"bootstrap took {self.world.round} rounds; raise beta "
                f"(budget {params.bootstrap_rounds})")
        while self.world.round < params.bootstrap_rounds:
            self._advance("-")

    # -- one cycle ----------------------------------------------------------------------

    def run_cycle(self) -> CycleSummary:
        world = self.world
        cycle_no = len(self.cycles)
        start_round = world.round
        fail_mark = len(world.failures)
        query_mark = len(self.query_log)
        work_mark = dict(world.ledger.category_totals)
        phase_rounds = []

        # Phase 1: deletion of covered keys present in the clean structure
        reds = sorted(k for k in self.overlay.covered_index if k in self.clean.heights)
        dsummary, profile = delete_phase(self.clean, reds)
        phase_rounds.append(self._play(profile, "delete", "Delete"))
        for key in reds:
            self.overlay.uncover(key)
            self.removed_clean[key] = world.round
        self.phase_records.append({
            "phase": "delete", "cycle": cycle_no,
            "reds_removed": dsummary.reds_removed,
            "bridge_edges_created": dsummary.bridge_edges_created,
            "rounds_used": dsummary.rounds_used,
            "messages_used": dsummary.messages_used})

        # Phase 2: buffer creation from the joiner backlog (cutoff now)
        joiners, self.joiner_backlog = self.joiner_backlog, []
        joiners = [j for j in joiners if j not in self.clean.heights]
        buf, bsummary, bprofile = create_buffer(joiners, world.heights, self.params.n)
        phase_rounds.append(self._play(bprofile, "buffer", "BufferCreate"))
        self.phase_records.append({
            "phase": "buffer", "cycle": cycle_no,
            "joiners": bsummary.joiners, "padded_width": bsummary.padded_width,
            "sort_depth": bsummary.sort_depth,
            "rounds_used": bsummary.rounds_used,
            "messages_used": bsummary.messages_used,
            "edges_formed": bsummary.edges_formed})

        # Phase 3: merge wave, stepped one engine round per world round
        if buf is not None:
            engine = WaveEngine(self.clean, buf, cycle_no)
            rounds = self._play(engine.pre.profile, "merge", "Merge")
            guard = 400 * (buf.height + ceil_log2(self.params.n) + 4)
            while not engine.done:
                engine.step()
                self.world.play_row(engine.profile.rows[-1], "merge")
                self._advance("Merge")
                rounds += 1
                if engine.round > guard:
                    raise InconsistentWorld("merge failed to converge")
            self.merge_events.extend(engine.events)
            phase_rounds.append(rounds)
            self.phase_records.append({
                "phase": "merge", "cycle": cycle_no,
                "groups": engine.summary.groups_formed,
                "splits": engine.summary.splits,
                "preprocess_rounds": engine.pre.rounds,
                "rounds_used": rounds})
        else:
            phase_rounds.append(0)

        # Phase 4: label flips only
        usummary = update_phase(self.clean)
        self.phase_records.append({
            "phase": "update", "cycle": cycle_no,
            "labels_flipped": usummary.labels_flipped})
        assert live_equals_clean(self.clean)
        for key in self.clean.heights:
            if key not in self.entered_live:
                self.entered_live[key] = world.round
        self._advance("Update")
        phase_rounds.append(1)

        served = self.query_log[query_mark:]
        summary = CycleSummary(
            cycle=cycle_no, start_round=start_round, end_round=world.round,
            phase_rounds=phase_rounds, reds=len(reds), joiners=len(joiners),
            failures=len(world.failures) - fail_mark,
            queries_served=len(served),
            q_violations=sum(1 for q in served if q.stalled),
        )
        self.cycles.append(summary)
        self.phase_work[cycle_no] = {
            cat: world.ledger.category_totals[cat] - work_mark.get(cat, 0)
            for cat in world.ledger.category_totals
        }
        return summary

    def run(self) -> None:
        self.bootstrap_all()
        for _ in range(self.params.horizon_cycles):
            self.run_cycle()
        self.finalize()

    def finalize(self) -> None:
        """Recompute per-cycle q_violations against the final Q budget."""
        bad_rounds = {}
        for out in self.query_violations():
            bad_rounds[out.r] = bad_rounds.get(out.r, 0) + 1
        for summary in self.cycles:
            summary.q_violations = sum(
                count for rnd, count in bad_rounds.items()
                if summary.start_round <= rnd < summary.end_round)

    # -- queries ------------------------------------------------------------------------

    def _representable(self, key: int) -> bool:
        return self.world.is_alive(key) or self.overlay.is_covered(key)

    def _serve_query(self, q: Query) -> QueryOutcome:
        world = self.world
        addr = self.overlay.assignment.get(q.s, (0, 0))
        hops = route_hops(addr, (0, 0), self.overlay.k) + 1
        result = search(self.clean, q.x, representable=self._representable,
                        live_view=True)
        if result.stalled:
            world.fail(STALLED, f"query {q.x} from {q.s}")
        answer = result.found and q.x in self.clean.live and not result.stalled
        latency = hops + result.path_rounds + 1
        answered = q.r + latency
        world.charge_msgs(q.s, 2, category="queries")
        world.charge_msgs(q.s, hops - 1 + result.path_rounds, category="queries")
        if latency > self.params.cycle_budget:
            world.fail(QUERY_TIMEOUT, f"query {q.x} took {latency}")
        outcome = QueryOutcome(q.x, q.r, q.s, answer, answered, result.stalled)
        self.query_log.append(outcome)
        return outcome

    def answer_query(self, q: Query) -> QueryOutcome:
        """Serve one ad-hoc query immediately (spec surface)."""
        return self._serve_query(q)

    # -- ground truth -------------------------------------------------------------------

    def q_budget(self) -> int:
        """One cycle's worth of rounds; degenerate quiet cycles fall back to
        the nominal cycle budget (the bitonic-regime cycle scale)."""
        longest = max((c.end_round - c.start_round for c in self.cycles),
                      default=0)
        return max(longest, self.params.cycle_budget)

    def classify_query(self, q: QueryOutcome | Query) -> str:
        """present / absent / mixed over [r, r+Q], from effective lifetimes."""
        budget = self.q_budget()
        window_end = q.r + budget
        start, end = self.schedule.lifetime(q.x)
        if not self.schedule.ever_known(q.x):
            return "absent"
        live_from = self.entered_live.get(q.x)
        if live_from is not None and live_from <= q.r and \
                (end is None or end > window_end):
            return "present"
        removed = self.removed_clean.get(q.x)
        if end is not None and end <= q.r and removed is not None and removed <= q.r:
            return "absent"
        if live_from is None and start > window_end:
            return "absent"
        return "mixed"

    def query_violations(self) -> list[QueryOutcome]:
        bad = []
        budget = self.q_budget()
        for out in self.query_log:
            cls = self.classify_query(out)
            if out.latency > budget:
                bad.append(out)
            elif cls == "present" and not out.answer:
                bad.append(out)
            elif cls == "absent" and out.answer:
                bad.append(out)
        return bad
