"""Committee overlay: a wrapped butterfly of Theta(log n)-sized random
cliques that absorbs churn by covering departed members, reassigns everyone
every few rounds, and can grow or shrink its dimensionality.

Committee addresses are (row, level) with level' = level+1 (mod k) edges;
(r, k) is the same committee as (r, 0). k = 0 is the degenerate
single-committee overlay used below the smallest viable network size.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .errors import NoAgreement, TooFewNodes
from .params import SimParams, butterfly_k, ceil_log2, log2n
from .work import RoundAcc, WorkProfile

Address = tuple[int, int]


def butterfly_edge_set(k: int) -> set[frozenset]:
    """Inter-committee edges required by the wrapped-butterfly rule."""
    edges: set[frozenset] = set()
    if k < 1:
        return edges
    for r in range(2 ** k):
        for lvl in range(k):
            nxt = (lvl + 1) % k
            a = (r, lvl)
            for r2 in (r, r ^ (1 << nxt)):
                b = (r2, nxt)
                if a != b:
                    edges.add(frozenset((a, b)))
    return edges


def route_hops(src: Address, dst: Address, k: int) -> int:
    """Greedy wrapped-butterfly routing distance (at most 2k hops)."""
    if k < 1 or src == dst:
        return 0
    r, lvl = src
    hops = 0
    while (r, lvl) != dst and hops <= 2 * k + 1:
        lvl = (lvl + 1) % k
        if (r ^ dst[0]) & (1 << lvl):
            r ^= 1 << lvl
        hops += 1
    return hops


@dataclass
class CoverRecord:
    key: int
    committee: Address
    neighbors: list[tuple[str, int, int, int]]  # (net, level, left, right)
    since_round: int
    speaker: int


@dataclass
class Committee:
    address: Address
    members: set[int] = field(default_factory=set)
    covered: dict[int, CoverRecord] = field(default_factory=dict)

    def speaker(self) -> int | None:
        return min(self.members) if self.members else None


@dataclass
class Census:
    round: int
    k: int
    committee_count: int
    min_size: int
    max_size: int
    mean_size: float

    def as_record(self) -> dict:
        return {"round": self.round, "k": self.k,
                "committee_count": self.committee_count,
                "min_size": self.min_size, "max_size": self.max_size,
                "mean_size": round(self.mean_size, 2)}


class CommitteeOverlay:
    def __init__(self, k: int):
        self.k = k
        self.committees: dict[Address, Committee] = {
            addr: Committee(addr) for addr in self.addresses(k)
        }
        self.assignment: dict[int, Address] = {}
        self.edges: set[frozenset] = butterfly_edge_set(k)
        self.covered_index: dict[int, Address] = {}
        self.census_log: list[Census] = []

    @staticmethod
    def addresses(k: int) -> list[Address]:
        if k < 1:
            return [(0, 0)]
        return [(r, lvl) for r in range(2 ** k) for lvl in range(k)]

    # -- membership ----------------------------------------------------------

    def committee_of(self, node: int) -> Committee:
        return self.committees[self.assignment[node]]

    def place(self, node: int, addr: Address) -> None:
        self.assignment[node] = addr
        self.committees[addr].members.add(node)

    def remove_member(self, node: int) -> Committee | None:
        addr = self.assignment.pop(node, None)
        if addr is None:
            return None
        committee = self.committees[addr]
        committee.members.discard(node)
        return committee

    def sizes(self) -> list[int]:
        return [len(c.members) for c in self.committees.values()]

    # -- covering -------------------------------------------------------------

    def cover_node(self, node: int, neighbors, round_no: int
                   ) -> tuple[CoverRecord | None, int]:
        """Committee takes over a departed member's data-structure links.

        Returns (record, edges_formed); record is None when the committee
        was wiped out (a counted protocol failure, not an exception).
        """
        committee = self.remove_member(node)
        if committee is None or not committee.members:
            return None, 0
        speaker = committee.speaker()
        record = CoverRecord(node, committee.address, list(neighbors),
                             round_no, speaker)
        committee.covered[node] = record
        self.covered_index[node] = committee.address
        edges = len(committee.members) * max(1, len(record.neighbors))
        return record, edges

    def uncover(self, node: int) -> None:
        addr = self.covered_index.pop(node, None)
        if addr is not None:
            self.committees[addr].covered.pop(node, None)

    def covering_speaker(self, node: int) -> int | None:
        addr = self.covered_index.get(node)
        if addr is None:
            return None
        return self.committees[addr].speaker()

    def is_covered(self, node: int) -> bool:
        return node in self.covered_index

    # -- periodic maintenance ----------------------------------------------------

    def maintenance_tick(self, alive, rng: random.Random, round_no: int) -> Census:
        """Uniform reassignment of every alive node; covered state stays
        with the committee identity."""
        addrs = self.addresses(self.k)
        for c in self.committees.values():
            c.members.clear()
        self.assignment.clear()
        nodes = sorted(alive)
        picks = rng.choices(addrs, k=len(nodes))
        for node, addr in zip(nodes, picks):
            self.assignment[node] = addr
            self.committees[addr].members.add(node)
        sizes = self.sizes()
        census = Census(round_no, self.k, len(addrs),
                        min(sizes), max(sizes), sum(sizes) / len(addrs))
        self.census_log.append(census)
        return census

    # -- validators -----------------------------------------------------------

    def validate_shape(self) -> str:
        expect = butterfly_edge_set(self.k)
        if self.edges != expect:
            missing = expect - self.edges
            extra = self.edges - expect
            return f"butterfly-shape: missing={len(missing)} extra={len(extra)}"
        if set(self.committees) != set(self.addresses(self.k)):
            return "butterfly-shape: committee address set mismatch"
        return "OK"

    def validate_cliques(self) -> str:
        for addr, committee in self.committees.items():
            for node in committee.members:
                if self.assignment.get(node) != addr:
                    return f"clique: stale assignment for node {node}"
        return "OK"

    def size_band(self, params: SimParams) -> tuple[int, int]:
        return params.committee_lo, params.committee_hi

    def sizes_within_band(self, params: SimParams) -> bool:
        lo, hi = self.size_band(params)
        return all(lo <= s <= hi for s in self.sizes())


def bootstrap_overlay(nodes, params: SimParams, rng: random.Random,
                      allow_degenerate: bool = False
                      ) -> tuple[CommitteeOverlay, WorkProfile]:
    """Six-step construction: leader, tree, leader cycle, butterfly,
    random fill, bipartite wiring. Charged as bootstrap work."""
    nodes = sorted(nodes)
    n = len(nodes)
    k = butterfly_k(n, params.c_comm)
    if k < 1:
        if not allow_degenerate:
            raise TooFewNodes(f"n={n} cannot host a k=1 wrapped butterfly")
        state = CommitteeOverlay(0)
        for node in nodes:
            state.place(node, (0, 0))
        return state, WorkProfile()
    state = CommitteeOverlay(k)
    addrs = state.addresses(k)
    leaders = nodes[: len(addrs)]
    for node, addr in zip(leaders, addrs):
        state.place(node, addr)
    for node in nodes[len(addrs):]:
        state.place(node, addrs[rng.randrange(len(addrs))])

    profile = WorkProfile()
    lg = ceil_log2(n)
    for _ in range(2 * lg):          # leader election + tree construction
        acc = RoundAcc()
        acc.counts = {node: 1 for node in nodes}
        profile.add(acc)
    wiring = RoundAcc()
    clique_edges = sum(len(c.members) * (len(c.members) - 1) // 2
                       for c in state.committees.values())
    bip_edges = 0
    for edge in state.edges:
        a, b = tuple(edge)
        bip_edges += len(state.committees[a].members) * len(state.committees[b].members)
    wiring.edges(formed=clique_edges + bip_edges)
    for node in nodes:
        wiring.msg(node, 2)
    profile.add(wiring)
    profile.pad_to(2 * lg + 4)
    return state, profile


# -- reshaping -------------------------------------------------------------------


def committee_opinions(state: CommitteeOverlay, params: SimParams, n_ref: int
                       ) -> dict[Address, str]:
    grow_at = params.alpha_reshape * params.c_comm * log2n(n_ref)
    shrink_at = params.beta_reshape * params.c_comm * log2n(n_ref)
    out = {}
    for addr, c in state.committees.items():
        if len(c.members) > grow_at:
            out[addr] = "grow"
        elif len(c.members) < shrink_at:
            out[addr] = "shrink"
        else:
            out[addr] = "stay"
    return out


def _recruit(state: CommitteeOverlay, needy: list[Address], pool: list[int],
             target: int, rng: random.Random, hi_cap: int) -> int:
    """Round-by-round recruitment from a donor pool; returns rounds used."""
    rounds = 0
    pool = list(pool)
    rng.shuffle(pool)
    needy = [a for a in needy if len(state.committees[a].members) < target]
    while needy and pool:
        rounds += 1
        still = []
        for addr in needy:
            committee = state.committees[addr]
            if pool and len(committee.members) < target:
                state.place(pool.pop(), addr)
            if len(committee.members) < target:
                still.append(addr)
        needy = still
    addrs = state.addresses(state.k)
    while pool:
        rounds += 1
        leftovers = []
        for node in pool:
            for _ in range(4):
                addr = addrs[rng.randrange(len(addrs))]
                if len(state.committees[addr].members) < hi_cap:
                    state.place(node, addr)
                    break
            else:
                leftovers.append(node)
        if len(leftovers) == len(pool):  # all probes bounced; force-balance
            for node in leftovers:
                addr = min(state.committees,
                           key=lambda a: len(state.committees[a].members))
                state.place(node, addr)
            leftovers = []
        pool = leftovers
    return rounds


def reshape(state: CommitteeOverlay, opinions: dict[Address, str],
            params: SimParams, rng: random.Random, n_new: int
            ) -> tuple[CommitteeOverlay, int, WorkProfile]:
    """Agreement at C(0,0), then grow (k+1) or shrink (k-1).

    Returns (new state, rounds used, work profile). Mixed opinions raise
    NoAgreement; an all-stay vote costs only the agreement routing.
    """
    votes = set(opinions.values())
    profile = WorkProfile()
    agree_rounds = ceil_log2(max(2, len(state.committees))) + 1
    acc = RoundAcc()
    for c in state.committees.values():
        speaker = c.speaker()
        if speaker is not None:
            acc.msg(speaker, 1)
    profile.add(acc)
    profile.pad_to(agree_rounds)
    if votes == {"stay"}:
        return state, agree_rounds, profile
    if len(votes) != 1:
        raise NoAgreement(f"mixed opinions: {sorted(votes)}")
    mode = votes.pop()
    target = max(2, math.ceil(0.75 * log2n(max(2, n_new))))

    if mode == "grow":
        new = CommitteeOverlay(max(1, state.k + 1))
        carried: set[Address] = set()
        for (r, lvl), committee in state.committees.items():
            dest = (r, lvl + 1) if state.k >= 1 else (0, 0)
            for node in sorted(committee.members):
                new.place(node, dest)
            new.committees[dest].covered.update(committee.covered)
            for key in committee.covered:
                new.covered_index[key] = dest
            carried.add(dest)
        # copy rows and the fresh level 0 start from promoted leaders
        for addr in new.addresses(new.k):
            if addr in carried:
                continue
            donor_addr = max(carried,
                             key=lambda a: len(new.committees[a].members))
            donor = new.committees[donor_addr]
            members = sorted(donor.members)
            leader = members[rng.randrange(len(members))]
            donor.members.discard(leader)
            del new.assignment[leader]
            new.place(leader, addr)
        pool: list[int] = []
        for addr in carried:
            committee = new.committees[addr]
            spare = sorted(committee.members)[target:]
            for node in spare:
                committee.members.discard(node)
                del new.assignment[node]
                pool.append(node)
        needy = list(new.addresses(new.k))
    else:
        if state.k <= 1:
            raise NoAgreement("cannot shrink below k=1")
        new = CommitteeOverlay(state.k - 1)
        half = 2 ** (state.k - 1)
        pool = []
        for (r, lvl), committee in state.committees.items():
            vacates = lvl == 0 or r >= half
            dest = (r % half, max(0, lvl - 1))
            if vacates:
                pool.extend(sorted(committee.members))
            else:
                for node in sorted(committee.members):
                    new.place(node, dest)
            new.committees[dest].covered.update(committee.covered)
            for key in committee.covered:
                new.covered_index[key] = dest
        needy = list(new.addresses(new.k))

    hi_cap = max(target + 1, math.ceil(2 * n_new / len(new.committees)))
    rounds = _recruit(new, needy, pool, target, rng, hi_cap)
    new.census_log = state.census_log
    acc = RoundAcc()
    clique_edges = sum(len(c.members) * (len(c.members) - 1) // 2
                       for c in new.committees.values())
    acc.edges(formed=clique_edges + len(new.edges))
    profile.add(acc)
    profile.pad_to(agree_rounds + rounds + 1)
    return new, agree_rounds + rounds + 1, profile
