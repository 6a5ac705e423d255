"""Deterministic round-synchronous execution core.

The world owns the global clock, the alive set, the message queue, and the
append-only work ledger. Protocol phases charge work either message by
message (send/form_edge/delete_edge) or by playing back a per-round work
profile, under the same per-node budget either way. Node step functions run
once per round for every alive node that registered one; phase engines act
through the per-round hook, which is the bulk-at-the-barrier form the
execution model allows.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .errors import (
    FailureEvent,
    InconsistentWorld,
    MessageBudgetExceeded,
    PayloadTooLarge,
    PeerDeparted,
)
from .params import SimParams
from .work import RoundWork

BOOTSTRAP = "Bootstrap"
MAINTENANCE = "Maintenance"

WORK_CATEGORIES = ("bootstrap", "delete", "buffer", "merge", "update",
                   "covering", "queries", "other")


@dataclass
class Envelope:
    src: int
    dst: int
    payload: object
    size_bits: int = 64
    sent_round: int = 0


@dataclass
class LedgerRow:
    round: int
    messages_sent: int = 0
    edges_formed: int = 0
    edges_deleted: int = 0
    churn_in: int = 0
    churn_out: int = 0
    phase_tag: str = BOOTSTRAP
    cycle_phase: str = "-"

    def as_record(self) -> dict:
        return {
            "round": self.round,
            "churn_in": self.churn_in,
            "churn_out": self.churn_out,
            "messages_sent": self.messages_sent,
            "edges_formed": self.edges_formed,
            "edges_deleted": self.edges_deleted,
            "phase_tag": self.phase_tag,
            "cycle_phase": self.cycle_phase,
        }


class WorkLedger:
    """One sealed row per round; every charge lands in the current row."""

    def __init__(self):
        self.rows: list[LedgerRow] = []
        self.category_totals: dict[str, int] = {c: 0 for c in WORK_CATEGORIES}

    def row(self, round_no: int) -> LedgerRow:
        return self.rows[round_no]

    def totals(self) -> dict[str, int]:
        return {
            "messages_sent": sum(r.messages_sent for r in self.rows),
            "edges_formed": sum(r.edges_formed for r in self.rows),
            "edges_deleted": sum(r.edges_deleted for r in self.rows),
            "churn_in": sum(r.churn_in for r in self.rows),
            "churn_out": sum(r.churn_out for r in self.rows),
        }

    def work_total(self) -> int:
        t = self.totals()
        return t["messages_sent"] + t["edges_formed"] + t["edges_deleted"]


class World:
    def __init__(self, params: SimParams):
        self.params = params
        self.round = 0
        self.phase_tag = BOOTSTRAP
        self.cycle_phase = "-"
        self.rng_alg = random.Random(params.seed_alg)
        self.alive: set[int] = set()
        self.joined_round: dict[int, int] = {}
        self.departed_round: dict[int, int] = {}
        self.heights: dict[int, int] = {}
        self.ledger = WorkLedger()
        self.failures: list[FailureEvent] = []
        self.queue: list[Envelope] = []
        self.inbox: dict[int, list[Envelope]] = {}
        self.attach_edges: set[frozenset] = set()
        self._attach_adj: dict[int, set[int]] = {}
        self.steps: dict[int, object] = {}
        self.phase_hook = None
        self.on_depart = None
        self.on_join = None
        self.drop_log: list[tuple[int, Envelope]] = []
        self._row = LedgerRow(0)
        self._sent_this_round: dict[int, int] = {}
        self._recv_this_round: dict[int, int] = {}

    # -- population -------------------------------------------------------------

    def spawn(self, node: int, height: int | None = None) -> None:
        if node in self.alive:
            raise InconsistentWorld(f"node {node} already alive")
        self.alive.add(node)
        self.joined_round[node] = self.round
        if height is None:
            from .skiplist import sample_height
            height = sample_height(self.rng_alg, self.params.p)
        self.heights[node] = height

    def is_alive(self, node: int) -> bool:
        return node in self.alive

    # -- charging -----------------------------------------------------------------

    @property
    def message_cap(self) -> int:
        return self.params.message_cap

    def fail(self, kind: str, detail: str = "") -> None:
        self.failures.append(FailureEvent(self.round, kind, detail))

    def charge_msgs(self, node: int, n: int = 1, category: str = "other") -> None:
        if n <= 0:
            return
        count = self._sent_this_round.get(node, 0) + n
        if count > self.message_cap:
            raise MessageBudgetExceeded(node, count, self.message_cap)
        self._sent_this_round[node] = count
        self._row.messages_sent += n
        self.ledger.category_totals[category] += n

    def charge_edges(self, formed: int = 0, deleted: int = 0,
                     category: str = "other") -> None:
        self._row.edges_formed += formed
        self._row.edges_deleted += deleted
        self.ledger.category_totals[category] += formed + deleted

    def play_row(self, row: RoundWork, category: str) -> None:
        """Charge one profile round of bulk phase work."""
        if row.max_node_messages > self.message_cap:
            raise MessageBudgetExceeded(row.busiest, row.max_node_messages,
                                        self.message_cap)
        self._row.messages_sent += row.messages
        self._row.edges_formed += row.edges_formed
        self._row.edges_deleted += row.edges_deleted
        self.ledger.category_totals[category] += (
            row.messages + row.edges_formed + row.edges_deleted)

    # -- messaging ----------------------------------------------------------------

    def send(self, src: int, dst: int, payload, size_bits: int = 64,
             category: str = "other") -> None:
        if src not in self.alive:
            raise PeerDeparted(f"sender {src} not alive")
        if size_bits > self.message_cap:
            raise PayloadTooLarge(f"{size_bits} bits > {self.message_cap}")
        self.charge_msgs(src, 1, category)
        self.queue.append(Envelope(src, dst, payload, size_bits, self.round))

    def form_edge(self, a: int, b: int, category: str = "other") -> None:
        """Idempotent bidirectional attachment; a no-op edge is free."""
        if a not in self.alive or b not in self.alive:
            raise PeerDeparted(f"edge ({a},{b}) needs both endpoints alive")
        edge = frozenset((a, b))
        if edge in self.attach_edges:
            return
        self.attach_edges.add(edge)
        self._attach_adj.setdefault(a, set()).add(b)
        self._attach_adj.setdefault(b, set()).add(a)
        self.charge_edges(formed=1, category=category)

    def delete_edge(self, a: int, b: int, category: str = "other") -> None:
        edge = frozenset((a, b))
        if edge in self.attach_edges:
            self.attach_edges.discard(edge)
            self._attach_adj.get(a, set()).discard(b)
            self._attach_adj.get(b, set()).discard(a)
            self.charge_edges(deleted=1, category=category)

    def register_step(self, node: int, fn) -> None:
        self.steps[node] = fn

    # -- the round loop --------------------------------------------------------------

    def validate_world(self) -> None:
        if self.alive & set(self.departed_round):
            raise InconsistentWorld("departed node still alive")
        for node in self.alive:
            if node not in self.joined_round:
                raise InconsistentWorld(f"alive node {node} never joined")

    def run_round(self, adversary=None) -> "World":
        # the full O(n) sweep is periodic; churn plumbing cannot break it
        # between audits without also tripping one of them
        if self.round % 64 == 0 or self.round < 4:
            self.validate_world()

        # (1) churn
        leaves, joins = ((), ())
        if adversary is not None:
            leaves, joins = adversary.churn_for(self.round)
        for node in leaves:
            if node not in self.alive:
                continue
            self.alive.discard(node)
            self.departed_round[node] = self.round
            self._row.churn_out += 1
            self.steps.pop(node, None)
            for peer in self._attach_adj.pop(node, ()):
                self._attach_adj.get(peer, set()).discard(node)
                self.attach_edges.discard(frozenset((node, peer)))
                self._row.edges_deleted += 1
                self.ledger.category_totals["other"] += 1
            if self.on_depart is not None:
                self.on_depart(node)
        for node, host in joins:
            self.spawn(node)
            self._row.churn_in += 1
            if host in self.alive:
                self.form_edge(node, host, category="covering")
            if self.on_join is not None:
                self.on_join(node, host)

        # (2) deliveries of earlier rounds' sends
        pending = [e for e in self.queue if e.sent_round < self.round]
        self.queue = [e for e in self.queue if e.sent_round >= self.round]
        for env in pending:
            if env.dst not in self.alive:
                self.drop_log.append((self.round, env))
                continue
            got = self._recv_this_round.get(env.dst, 0) + 1
            if got > self.message_cap:
                raise MessageBudgetExceeded(env.dst, got, self.message_cap)
            self._recv_this_round[env.dst] = got
            self.inbox.setdefault(env.dst, []).append(env)

        # (3) node steps, then the phase hook's bulk work
        for node in sorted(self.steps):
            if node in self.alive:
                self.steps[node](self, node)
        if self.phase_hook is not None:
            self.phase_hook(self)

        # (4)+(5) seal row, advance
        self._row.phase_tag = self.phase_tag
        self._row.cycle_phase = self.cycle_phase
        self.ledger.rows.append(self._row)
        self.round += 1
        self.phase_tag = (BOOTSTRAP if self.round < self.params.bootstrap_rounds
                          else MAINTENANCE)
        self._row = LedgerRow(self.round, phase_tag=self.phase_tag,
                              cycle_phase=self.cycle_phase)
        self._sent_this_round = {}
        self._recv_this_round = {}
        return self

    def take_inbox(self, node: int) -> list[Envelope]:
        return self.inbox.pop(node, [])

    # -- trace --------------------------------------------------------------------

    def trace_lines(self):
        for row in self.ledger.rows:
            yield json.dumps(row.as_record(), separators=(",", ":"))
