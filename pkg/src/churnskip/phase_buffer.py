"""Buffer creation: sort the cycle's joiners on a comparator network laid
over a butterfly-style overlay, then raise skip-list levels and rewire away
fill-in entries.

The comparator network is Batcher's bitonic sort in its normalized form:
the first sublayer of every merge stage pairs mirrored wires inside each
block, after which all comparators can point the same way (minimum to the
lower wire index). Depth is exactly log2(m)(log2(m)+1)/2 for the padded
width, the same as the classic construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NoJoiners
from .phase_delete import bridge_chain
from .skiplist import BUF_LS, BUF_RS, LS, RS, SkipNet
from .work import RoundAcc, WorkProfile

PAD = RS  # padding values sort to the top and fall off the real outputs


@dataclass
class ComparatorNetwork:
    width: int                       # requested width m
    padded_width: int                # next power of two
    layers: list[list[tuple[int, int]]]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def comparator_count(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def apply(self, values) -> list:
        """Run the network; returns the first `width` outputs, sorted."""
        if len(values) != self.width:
            raise ValueError(f"expected {self.width} values")
        wires = list(values) + [PAD] * (self.padded_width - self.width)
        for layer in self.layers:
            for i, j in layer:
                if wires[i] > wires[j]:
                    wires[i], wires[j] = wires[j], wires[i]
        return wires[: self.width]


def build_bitonic(m: int) -> ComparatorNetwork:
    if m < 1:
        raise ValueError("width must be >= 1")
    padded = 1 << (m - 1).bit_length() if m > 1 else 1
    layers: list[list[tuple[int, int]]] = []
    size = 2
    while size <= padded:
        mirror = []
        for start in range(0, padded, size):
            for i in range(size // 2):
                mirror.append((start + i, start + size - 1 - i))
        layers.append(mirror)
        d = size // 4
        while d >= 1:
            layers.append([(i, i + d) for i in range(padded) if not i & d])
            d //= 2
        size *= 2
    for layer in layers:
        wires = [w for pair in layer for w in pair]
        assert len(wires) == len(set(wires)), "wire reused within a layer"
    q = padded.bit_length() - 1
    assert len(layers) == q * (q + 1) // 2
    return ComparatorNetwork(m, padded, layers)


@dataclass
class SortingOverlay:
    network: ComparatorNetwork
    joiners: list[int]               # arrival order, unsorted
    wire_host: list[int | None]      # wire index -> hosting joiner (None = virtual)
    build_profile: WorkProfile


def build_sorting_overlay(joiners: list[int], n: int) -> SortingOverlay:
    """Lay one overlay position per wire over the joiners, O(log n) rounds.

    Construction follows the leader/tree/cycle recipe used for the main
    overlay; costs are charged per round to the participating joiners.
    Padding wires are simulator-virtual and free.
    """
    if not joiners:
        raise NoJoiners("buffer phase has nothing to sort")
    net = build_bitonic(len(joiners))
    hosts: list[int | None] = list(joiners) + [None] * (net.padded_width - len(joiners))
    profile = WorkProfile()
    rounds = max(1, math.ceil(math.log2(max(2, net.padded_width)))) + 3
    wiring = net.padded_width * net.depth  # one overlay edge per wire per layer hop
    per_round_edges = [wiring // rounds] * rounds
    per_round_edges[-1] += wiring - sum(per_round_edges)
    for r in range(rounds):
        acc = RoundAcc()
        for j in joiners:
            acc.msg(j)
        acc.edges(formed=per_round_edges[r])
        profile.add(acc)
    return SortingOverlay(net, list(joiners), hosts, profile)


def run_network_sort(overlay: SortingOverlay) -> tuple[list[int], WorkProfile]:
    """One round per layer; each comparator exchanges two messages."""
    net = overlay.network
    wires = list(overlay.joiners) + [PAD] * (net.padded_width - len(overlay.joiners))
    host = list(overlay.wire_host)
    profile = WorkProfile()
    for layer in net.layers:
        acc = RoundAcc()
        for i, j in layer:
            for h in (host[i], host[j]):
                if h is not None:
                    acc.msg(h)
            if wires[i] > wires[j]:
                wires[i], wires[j] = wires[j], wires[i]
        profile.add(acc)
    return [w for w in wires if w != PAD], profile


def raise_levels(sorted_keys: list[int], heights: dict[int, int]
                 ) -> tuple[SkipNet, WorkProfile]:
    """Copy the base chain level by level and rewire fill-ins away.

    Fill-in entries at level l (height < l) play the red role of the
    deletion routine; all levels rewire in parallel. The buffer's own
    sentinels are ordinary members spanning every level, ready to ride
    through the merge.
    """
    top = max((heights[k] for k in sorted_keys), default=0)
    buf = SkipNet("B")
    buf.ensure_height(top)
    buf.add_key(BUF_LS, top)
    buf.add_key(BUF_RS, top)
    profile = WorkProfile()

    copy_acc = RoundAcc()
    for key in sorted_keys:
        buf.add_key(key, heights[key])
    chain = [BUF_LS, *sorted_keys, BUF_RS]
    for a, b in zip(chain, chain[1:]):
        buf.set_link(a, b, 0)
    buf.set_link(LS, BUF_LS, 0)
    buf.set_link(BUF_RS, RS, 0)
    copy_acc.edges(formed=len(chain) - 1)

    rewire = WorkProfile()
    for lvl in range(1, top + 1):
        # level copy: every key participates, fill-ins included
        copy_acc.edges(formed=len(chain) - 1)
        fill_in = {k for k in sorted_keys if heights[k] < lvl}
        bridges, prof = bridge_chain(chain, fill_in, lvl)
        rewire.merge(prof)
        effectives = [k for k in chain if k not in fill_in]
        for a, b in zip(effectives, effectives[1:]):
            buf.set_link(a, b, lvl)
        buf.set_link(LS, effectives[0], lvl)
        buf.set_link(effectives[-1], RS, lvl)
        # fill-in entries drop both their ports once bridged around
        run = 0
        deleted = 0
        for key in chain:
            if key in fill_in:
                run += 1
            elif run:
                deleted += run + 1
                run = 0
        if rewire.rows:
            rewire.rows[-1].edges_deleted += deleted
    profile.add(copy_acc)
    profile.append(rewire)
    return buf, profile


@dataclass
class BufferSummary:
    joiners: int = 0
    padded_width: int = 0
    sort_depth: int = 0
    rounds_used: int = 0
    messages_used: int = 0
    edges_formed: int = 0


def create_buffer(joiners: list[int], heights: dict[int, int], n: int
                  ) -> tuple[SkipNet | None, BufferSummary, WorkProfile]:
    """Full phase: overlay, network sort, level raising."""
    summary = BufferSummary(joiners=len(joiners))
    if not joiners:
        return None, summary, WorkProfile()
    overlay = build_sorting_overlay(joiners, n)
    profile = WorkProfile()
    profile.append(overlay.build_profile)
    sorted_keys, sort_prof = run_network_sort(overlay)
    profile.append(sort_prof)
    buf, raise_prof = raise_levels(sorted_keys, heights)
    profile.append(raise_prof)
    summary.padded_width = overlay.network.padded_width
    summary.sort_depth = overlay.network.depth
    summary.rounds_used = profile.rounds
    summary.messages_used = profile.messages
    summary.edges_formed = profile.edges_formed
    return buf, summary, profile
