"""Skip-list substrate shared by the live, clean, and buffer networks.

Keys are integer node ids. Sentinels are simulator-owned virtual anchors
encoded as integers outside the id space so that plain ``<`` ordering works
everywhere:

    LS < BUF_LS < real keys < BUF_RS < RS

The buffer's own sentinels (BUF_LS / BUF_RS) ride through a merge as
ordinary members and are unlinked at the end, per the merge protocol.

``SkipNet`` is the linked structure the distributed phases mutate; the
``oracle_*`` functions are the independent sequential implementations every
equivalence test compares against.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .errors import UnsortedInput

LS = -2
BUF_LS = -1
BUF_RS = 10 ** 18
RS = 10 ** 18 + 1

_SENTINELS = (LS, BUF_LS, BUF_RS, RS)
_NAMES = {LS: "-inf", BUF_LS: "b-inf", BUF_RS: "b+inf", RS: "+inf"}


def key_name(key: int) -> str:
    return _NAMES.get(key, str(key))


def is_sentinel(key: int) -> bool:
    return key in _SENTINELS


def sample_height(rng: random.Random, p: float = 0.5) -> int:
    """Tower height: number of successful promotions before the first miss."""
    h = 0
    while rng.random() < p:
        h += 1
    return h


@dataclass
class ValidationReport:
    ok: bool
    code: str = "OK"
    key: int | None = None
    level: int | None = None

    def __str__(self):
        if self.ok:
            return "OK"
        where = f" key={key_name(self.key)}" if self.key is not None else ""
        where += f" level={self.level}" if self.level is not None else ""
        return f"{self.code}{where}"


class SkipNet:
    """Doubly linked skip list with per-port labels and live-membership flags.

    ``links[key][lvl] == [left, right]``. An edge label is "11" unless its
    canonical id is in ``pending`` ("10": present in the clean network but
    not yet promoted to live). "01" and "00" are unrepresentable by design.
    """

    __slots__ = ("tag", "heights", "links", "pending", "live")

    def __init__(self, tag: str = "C"):
        self.tag = tag
        self.heights: dict[int, int] = {}
        self.links: dict[int, list[list[int]]] = {
            LS: [[LS, RS]],
            RS: [[LS, RS]],
        }
        self.pending: set[tuple[int, int, int]] = set()
        self.live: set[int] = set()

    # -- construction ------------------------------------------------------

    @property
    def height(self) -> int:
        return len(self.links[LS]) - 1

    def ensure_height(self, h: int) -> None:
        while self.height < h:
            self.links[LS].append([LS, RS])
            self.links[RS].append([LS, RS])

    def add_key(self, key: int, height: int) -> None:
        self.heights[key] = height
        self.links[key] = [[None, None] for _ in range(height + 1)]

    def keys(self):
        return self.heights.keys()

    def __contains__(self, key: int) -> bool:
        return key in self.heights

    def __len__(self) -> int:
        return len(self.heights)

    # -- link access ---------------------------------------------------------

    def right(self, key: int, lvl: int) -> int:
        return self.links[key][lvl][1]

    def left(self, key: int, lvl: int) -> int:
        return self.links[key][lvl][0]

    def height_of(self, key: int) -> int:
        if key in (LS, RS):
            return self.height
        if key in (BUF_LS, BUF_RS):
            return self.heights.get(key, self.height)
        return self.heights[key]

    def set_link(self, a: int, b: int, lvl: int, pending: bool = False) -> None:
        """Make b the right neighbor of a at lvl (both port copies)."""
        self.links[a][lvl][1] = b
        self.links[b][lvl][0] = a
        if pending and not (is_sentinel(a) and is_sentinel(b)):
            self.pending.add((lvl, a, b))

    def edge_pending(self, a: int, b: int, lvl: int) -> bool:
        if a > b:
            a, b = b, a
        return (lvl, a, b) in self.pending

    def _drop_pending(self, a: int, b: int, lvl: int) -> None:
        if a > b:
            a, b = b, a
        self.pending.discard((lvl, a, b))

    def splice_run(self, v: int, members: list[int], z: int, lvl: int,
                   pending: bool = True) -> int:
        """Insert sorted members between adjacent v and z; returns new links."""
        if self.links[v][lvl][1] != z:
            raise ValueError(f"splice target not adjacent: {v}..{z} at {lvl}")
        self._drop_pending(v, z, lvl)
        chain = [v, *members, z]
        for a, b in zip(chain, chain[1:]):
            self.set_link(a, b, lvl, pending=pending)
        return len(chain) - 1

    def unlink_tower(self, key: int) -> int:
        """Remove key from every level, reconnecting its neighbors."""
        removed = 0
        for lvl, (left, right) in enumerate(self.links[key]):
            self._drop_pending(left, key, lvl)
            self._drop_pending(key, right, lvl)
            self.links[left][lvl][1] = right
            self.links[right][lvl][0] = left
            removed += 2
        del self.links[key]
        del self.heights[key]
        self.live.discard(key)
        return removed

    def iter_level(self, lvl: int):
        key = self.right(LS, lvl)
        while key != RS:
            yield key
            key = self.right(key, lvl)

    def level_list(self, lvl: int) -> list[int]:
        return list(self.iter_level(lvl))

    def neighbors_of(self, key: int) -> list[tuple[int, int, int]]:
        """(level, left, right) per level of key's tower."""
        return [(lvl, lr[0], lr[1]) for lvl, lr in enumerate(self.links[key])]

    # -- comparisons and checks -----------------------------------------------

    def structure(self) -> list[list[int]]:
        return [self.level_list(lvl) for lvl in range(self.height + 1)]

    def same_structure(self, other: "SkipNet") -> bool:
        if self.heights != other.heights:
            return False
        hi = max(self.height, other.height)
        for lvl in range(hi + 1):
            a = self.level_list(lvl) if lvl <= self.height else []
            b = other.level_list(lvl) if lvl <= other.height else []
            if a != b:
                return False
        return True

    def validate(self) -> ValidationReport:
        keys_by_height = sorted(self.heights)
        for lvl in range(self.height + 1):
            expect = [k for k in keys_by_height if self.height_of(k) >= lvl]
            pos, seen = LS, []
            while True:
                nxt = self.links[pos][lvl][1]
                if nxt is None:
                    return ValidationReport(False, "missing-link", pos, lvl)
                if self.links[nxt][lvl][0] != pos:
                    return ValidationReport(False, "doubly-linked-violation", nxt, lvl)
                if nxt == RS:
                    break
                if seen and nxt <= seen[-1]:
                    return ValidationReport(False, "order-violation", nxt, lvl)
                seen.append(nxt)
                pos = nxt
            if seen != expect:
                bad = next((k for k in seen if k not in expect), seen[0] if seen else None)
                return ValidationReport(False, "membership-violation", bad, lvl)
        for lvl, a, b in self.pending:
            if lvl >= len(self.links.get(a, ())) or self.links[a][lvl][1] != b:
                return ValidationReport(False, "stale-label", a, lvl)
        return ValidationReport(True)

    def dump_lines(self):
        yield json.dumps({"net": self.tag, "height": self.height})
        for key in sorted(self.heights):
            rec = {
                "key": key_name(key),
                "height": self.heights[key],
                "levels": [
                    {
                        "left": key_name(l),
                        "right": key_name(r),
                        "label": "10" if self.edge_pending(key, r, lvl) else "11",
                    }
                    for lvl, (l, r) in enumerate(self.links[key])
                ],
                "live": key in self.live,
            }
            yield json.dumps(rec, separators=(",", ":"))


@dataclass
class SearchResult:
    found: bool
    h_moves: int
    v_moves: int
    path: list[tuple[int, int]]
    stalled: bool = False

    @property
    def path_rounds(self) -> int:
        return self.h_moves + self.v_moves


def search(net: SkipNet, target: int, representable=None,
           live_view: bool = False) -> SearchResult:
    """Top-down search from the left-topmost sentinel.

    One round per horizontal or vertical move. ``representable`` maps a key
    to False when nobody (node or covering committee) can answer for it; the
    search then stalls, which callers count as a protocol failure.

    With ``live_view`` the walk only stands on live members, relaying
    through not-yet-promoted keys at the same level (mid-merge buffer
    residents have complete links at every level they have merged, so the
    relay chain is always walkable); relay hops cost rounds like any other.
    """
    pos, lvl = LS, net.height
    h_moves = v_moves = 0
    path = [(pos, lvl)]
    stalled = [False]

    def reachable(key):
        if representable is not None and not is_sentinel(key) \
                and not representable(key):
            stalled[0] = True
            return False
        return True

    def next_member(p, l):
        z = net.right(p, l)
        hops = 1
        while live_view and z != RS and z not in net.live:
            if not reachable(z):
                return z, hops
            z = net.right(z, l)
            hops += 1
        return z, hops

    while True:
        z, hops = next_member(pos, lvl)
        if stalled[0]:
            return SearchResult(False, h_moves, v_moves, path, stalled=True)
        if z < target and z != RS:
            if not reachable(z):
                return SearchResult(False, h_moves, v_moves, path, stalled=True)
            pos = z
            h_moves += hops
            path.append((pos, lvl))
        elif lvl > 0:
            lvl -= 1
            v_moves += 1
            path.append((pos, lvl))
        else:
            z, _ = next_member(pos, 0)
            found = pos == target or z == target
            if found and z == target and not reachable(z):
                return SearchResult(False, h_moves, v_moves, path, stalled=True)
            return SearchResult(found, h_moves, v_moves, path, stalled=stalled[0])


# -- sequential oracles ------------------------------------------------------


def oracle_build(keys: list[int], heights: list[int], tag: str = "oracle") -> SkipNet:
    """Reference construction: level l holds exactly the keys of height >= l."""
    if list(keys) != sorted(set(keys)):
        raise UnsortedInput("keys must be strictly increasing")
    if len(keys) != len(heights):
        raise UnsortedInput("heights length mismatch")
    net = SkipNet(tag)
    top = max(heights, default=0)
    net.ensure_height(top)
    for k, h in zip(keys, heights):
        net.add_key(k, h)
    for lvl in range(top + 1):
        chain = [LS] + [k for k, h in zip(keys, heights) if h >= lvl] + [RS]
        for a, b in zip(chain, chain[1:]):
            net.set_link(a, b, lvl)
    return net


def oracle_insert(net: SkipNet, key: int, height: int) -> None:
    """Classic skip-list insertion with a preset tower height."""
    net.ensure_height(height)
    net.add_key(key, height)
    pos, lvl = LS, net.height
    while True:
        z = net.right(pos, lvl)
        if z < key and z != RS:
            pos = z
        else:
            if lvl <= height:
                net.set_link(key, z, lvl)
                net.set_link(pos, key, lvl)
            if lvl == 0:
                return
            lvl -= 1


def oracle_delete(net: SkipNet, keys) -> None:
    """Classic unlink of each key, in sorted order."""
    for key in sorted(keys):
        if key in net.heights:
            net.unlink_tower(key)


def oracle_merge(clean: SkipNet, keys: list[int], heights: dict[int, int],
                 tag: str = "oracle") -> SkipNet:
    """One-by-one fixed-height insertion of keys into a copy of clean."""
    out = oracle_build(sorted(clean.heights),
                       [clean.heights[k] for k in sorted(clean.heights)], tag)
    for key in keys:
        oracle_insert(out, key, heights[key])
    return out
