"""Wave merge: a pipelined top-down traversal that splices the buffer
skip list into the clean one, cohesive group by cohesive group.

Preprocessing identifies maximal equal-height runs (cohesive groups), elects
their minimum-key leaders, and wires the parent/children relation (nearest
taller neighbor on each side). The single top-level group then descends the
clean list; groups split cleanly at key thresholds, idle nodes track their
parents' traces ("virtual walking") and activate once each parent has either
merged down to the node's own level or provably diverged from its key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import SPLICE_CONFLICT, ChurnSkipError, MalformedBuffer
from .skiplist import BUF_LS, BUF_RS, LS, RS, SkipNet, is_sentinel
from .work import RoundAcc, WorkProfile


class SpliceConflict(ChurnSkipError):
    kind = SPLICE_CONFLICT


@dataclass
class CohesiveGroup:
    members: list[int]            # sorted; leader is members[0]
    level: int                    # current working level in C
    pos: int                      # C key the group stands at (height >= level)
    top: int = 0                  # members' height; no splicing above it
    state: str = "traverse"       # traverse | merge | wait | done
    delay: int = 0                # rounds to sit out (leader handoff)
    born: int = 0                 # engine round of activation
    splits: int = 0               # lineage split count (for the time audit)

    @property
    def leader(self) -> int:
        return self.members[0]


@dataclass
class _Walk:
    key: int
    height: int
    lp: int | None
    rp: int | None
    vpos: int = LS
    vlevel: int = 0
    indep_lp: bool = False
    indep_rp: bool = False
    activated: bool = False

    def advance(self, key: int, level: int) -> None:
        if level < self.height:
            return  # below our own splice entry level; the walk stops at it
        if key > self.vpos or (key == self.vpos and level < self.vlevel):
            self.vpos = key
            self.vlevel = level


@dataclass
class Preprocessed:
    groups: list[list[int]]                 # all maximal runs, every level
    parents: dict[int, tuple[int | None, int | None]]
    children: dict[int, list[int]]
    top_members: list[int]
    profile: WorkProfile
    rounds: int


def preprocess(buf: SkipNet) -> Preprocessed:
    """Group identification, leader election, parent discovery, state init."""
    if not buf.heights or BUF_LS not in buf.heights:
        raise MalformedBuffer("buffer lacks its sentinels")
    top = buf.height
    groups: list[list[int]] = []
    parents: dict[int, tuple[int | None, int | None]] = {}
    for lvl in range(top + 1):
        run: list[int] = []
        for key in buf.iter_level(lvl):
            if buf.height_of(key) == lvl:
                run.append(key)
            elif run:
                groups.append(run)
                run = []
        if run:
            groups.append(run)
    for g in groups:
        h = buf.height_of(g[0])
        lp = buf.left(g[0], h)
        rp = buf.right(g[-1], h)
        lp = None if lp == LS else lp
        rp = None if rp == RS else rp
        for key in g:
            parents[key] = (lp, rp)
    children: dict[int, list[int]] = {}
    for key, (lp, rp) in parents.items():
        if lp is not None:
            children.setdefault(lp, []).append(key)
        if rp is not None:
            children.setdefault(rp, []).append(key)
    top_members = buf.level_list(top)

    profile = WorkProfile()
    longest = max(len(g) for g in groups)
    for r in range(max(1, longest - 1)):
        acc = RoundAcc()
        for g in groups:
            for member in g[r + 1:]:
                acc.msg(member)   # ID stream hops one step leftward
        profile.add(acc)
    shortcut = RoundAcc()
    for g in groups:
        shortcut.edges(formed=len(g) * (len(g) - 1) // 2)
        for member in g[1:]:
            shortcut.msg(g[0])   # leader announcement
    profile.add(shortcut)
    discovery = RoundAcc()
    for key in parents:
        discovery.msg(key, 2)
    profile.add(discovery)
    init = RoundAcc()
    for member in top_members:
        init.msg(member)
    profile.add(init)
    return Preprocessed(groups, parents, children, top_members, profile, profile.rounds)


@dataclass
class MergeSummary:
    groups_formed: int = 0
    splits: int = 0
    preprocess_rounds: int = 0
    wave_rounds: int = 0
    rounds_used: int = 0
    messages_used: int = 0
    edges_formed: int = 0


class WaveEngine:
    """Round-stepped execution of the merge wave over (clean, buffer)."""

    def __init__(self, clean: SkipNet, buf: SkipNet, cycle: int = 0):
        self.clean = clean
        self.buf = buf
        self.cycle = cycle
        self.pre = preprocess(buf)
        self.parents = self.pre.parents
        self.children = self.pre.children
        clean.ensure_height(buf.height)
        self.walks: dict[int, _Walk] = {}
        for key, h in buf.heights.items():
            lp, rp = self.parents.get(key, (None, None))
            self.walks[key] = _Walk(key, buf.height_of(key), lp, rp,
                                    vpos=LS, vlevel=buf.height_of(key))
        top_group = CohesiveGroup(list(self.pre.top_members), buf.height, LS,
                                  top=buf.height)
        for key in top_group.members:
            self.walks[key].activated = True
        self.active: list[CohesiveGroup] = [top_group]
        self.merged_level: dict[int, int] = {}
        self.round = 0
        self.events: list[dict] = []
        self.profile = WorkProfile()
        self.group_spans: list[tuple[CohesiveGroup, int, int]] = []
        self.summary = MergeSummary(groups_formed=1,
                                    preprocess_rounds=self.pre.rounds)
        self.absorbed = False
        self._ready: set[int] = set()

    # -- events --------------------------------------------------------------

    def _emit(self, leader: int, event: str, level: int, **detail) -> None:
        rec = {"cycle": self.cycle, "round": self.round, "group_leader": leader,
               "event": event, "level": level}
        rec.update(detail)
        self.events.append(rec)

    # -- virtual walking -------------------------------------------------------

    def _notify(self, members, v, z, kind, level, acc) -> None:
        for u in members:
            kids = self.children.get(u)
            if not kids:
                continue
            if not is_sentinel(u):
                acc.msg(u, len(kids))
            for c in kids:
                walk = self.walks[c]
                if walk.activated:
                    continue
                if kind == "right":
                    if z < c:
                        walk.advance(z, level)
                    elif v < c:
                        walk.advance(v, level)
                    if z > c:
                        if u == walk.lp:
                            walk.indep_lp = True
                        if u == walk.rp:
                            walk.indep_rp = True
                else:  # down: sender's remaining corridor is left of z
                    if z < c:
                        walk.advance(z, level)
                    elif v < c:
                        walk.advance(v, level)
                    if z < c:
                        if u == walk.lp:
                            walk.indep_lp = True
                        if u == walk.rp:
                            walk.indep_rp = True
                self._maybe_ready(c)

    def _notify_merged(self, members, level, acc) -> None:
        for u in members:
            self.merged_level[u] = level
            kids = self.children.get(u)
            if not kids:
                continue
            if not is_sentinel(u):
                acc.msg(u, len(kids))
        for u in members:
            for c in self.children.get(u, ()):
                if not self.walks[c].activated:
                    self._maybe_ready(c)

    def _parent_ok(self, walk: _Walk, parent: int | None, indep: bool) -> bool:
        if parent is None:
            return True
        if indep:
            return True
        merged = self.merged_level.get(parent)
        return merged is not None and merged <= walk.height

    def _maybe_ready(self, key: int) -> None:
        walk = self.walks[key]
        if self._parent_ok(walk, walk.lp, walk.indep_lp) and \
                self._parent_ok(walk, walk.rp, walk.indep_rp):
            self._ready.add(key)

    def _activate_ready(self) -> None:
        if not self._ready:
            return
        ready = {k for k in self._ready if not self.walks[k].activated}
        self._ready.clear()
        used: set[int] = set()
        for key in sorted(ready):
            if key in used:
                continue
            walk = self.walks[key]
            members = [key]
            used.add(key)
            cur = key
            h = walk.height
            while True:
                nxt = self.buf.right(cur, h)
                if nxt in used or nxt not in self.walks:
                    break
                other = self.walks[nxt]
                if other.height != h or nxt not in ready:
                    break
                if (other.vpos, other.vlevel) != (walk.vpos, walk.vlevel):
                    break
                members.append(nxt)
                used.add(nxt)
                cur = nxt
            group = CohesiveGroup(members, walk.vlevel, walk.vpos, top=h,
                                  born=self.round)
            for m in members:
                self.walks[m].activated = True
            self.active.append(group)
            self.summary.groups_formed += 1

    # -- group actions ---------------------------------------------------------

    def _do_traverse(self, g: CohesiveGroup, acc: RoundAcc) -> None:
        v = g.pos
        z = self.clean.right(v, g.level)
        movers = [m for m in g.members if m > z]
        if movers:
            # split dichotomy: a single key threshold cuts prefix from suffix
            assert movers == g.members[len(g.members) - len(movers):]
        if not is_sentinel(g.leader):
            acc.msg(g.leader, len(g.members))  # leader broadcasts z
        if movers and len(movers) == len(g.members):
            self._emit(g.leader, "move_right", g.level, to=z)
            self._notify(g.members, v, z, "right", g.level, acc)
            g.pos = z
        elif movers:
            stay = [m for m in g.members if m < z]
            right = CohesiveGroup(movers, g.level, z, top=g.top, delay=2,
                                  born=self.round, splits=g.splits + 1)
            self._emit(g.leader, "split", g.level,
                       new_leader=right.leader, at=v, z=z)
            self._notify(stay, v, z, "down", g.level, acc)
            self._notify(movers, v, z, "right", g.level, acc)
            g.members = stay
            g.splits += 1
            g.state = "merge" if g.level <= g.top else "descend"
            self.active.append(right)
            self.summary.groups_formed += 1
            self.summary.splits += 1
        else:
            self._notify(g.members, v, z, "down", g.level, acc)
            g.state = "merge" if g.level <= g.top else "descend"
        if g.state == "descend":
            # above the members' own height there is nothing to splice;
            # the group just rides the search path downward
            g.level -= 1
            g.state = "traverse"
            self._emit(g.leader, "move_down", g.level)

    def _do_merge(self, g: CohesiveGroup, acc: RoundAcc) -> None:
        v, lvl = g.pos, g.level
        z = self.clean.right(v, lvl)
        if any(m > z for m in g.members):
            # a faster group spliced into our gap since the traversal
            # decision; re-read and re-decide, as the leader would
            g.state = "traverse"
            self._do_traverse(g, acc)
            return
        for m in g.members:
            if m not in self.clean.heights:
                self.clean.add_key(m, self.buf.height_of(m)
                                   if m in (BUF_LS, BUF_RS) else self.buf.heights[m])
        formed = self.clean.splice_run(v, g.members, z, lvl, pending=True)
        acc.edges(formed=formed, deleted=1)
        self._emit(g.leader, "merged_at_level", lvl, left=v, right=z)
        for m in g.members:
            y = self.clean.right(m, lvl)
            self._notify([m], m, y, "down", lvl, acc)
        self._notify_merged(g.members, lvl, acc)
        if lvl == 0:
            g.state = "done"
            self._emit(g.leader, "done", 0)
            self.group_spans.append((g, g.born, self.round))
        else:
            g.state = "wait"
            self._try_descend(g)

    def _try_descend(self, g: CohesiveGroup) -> None:
        v = self.clean.left(g.leader, g.level)
        blocked = (v in self.walks
                   and self.merged_level.get(v, g.level) > g.level - 1)
        if not blocked:
            g.level -= 1
            g.pos = v
            g.state = "traverse"
            self._emit(g.leader, "move_down", g.level)

    # -- rounds -----------------------------------------------------------------

    @property
    def done(self) -> bool:
        return self.absorbed

    def step(self) -> None:
        acc = RoundAcc()
        self.round += 1
        for g in sorted(self.active, key=lambda g: g.leader):
            if g.state == "done":
                continue
            if g.delay:
                g.delay -= 1
                continue
            if g.state == "wait":
                self._try_descend(g)
                if g.state != "traverse":
                    continue
                # fall through to traverse in the next round
            elif g.state == "merge":
                self._do_merge(g, acc)
            elif g.state == "traverse":
                self._do_traverse(g, acc)
        self.active = [g for g in self.active if g.state != "done"]
        self._activate_ready()
        if not self.active and all(w.activated for w in self.walks.values()):
            removed = 0
            for key in (BUF_LS, BUF_RS):
                if key in self.clean.heights:
                    removed += self.clean.unlink_tower(key)
            acc.edges(formed=2 * (self.buf.height + 1), deleted=removed)
            self.absorbed = True
        self.profile.add(acc)

    def run(self, guard: int | None = None) -> MergeSummary:
        guard = guard or 200 * (self.buf.height + math.ceil(math.log2(len(self.clean) + 4)) + 4)
        while not self.done:
            if self.round > guard:
                raise SpliceConflict("wave failed to converge")
            self.step()
        self.summary.wave_rounds = self.round
        self.summary.rounds_used = self.pre.rounds + self.round
        full = WorkProfile()
        full.append(self.pre.profile)
        full.append(self.profile)
        self.profile = full
        self.summary.messages_used = full.messages
        self.summary.edges_formed = full.edges_formed
        return self.summary


def wave_merge(clean: SkipNet, buf: SkipNet, cycle: int = 0
               ) -> tuple[MergeSummary, WorkProfile, list[dict]]:
    """Run the whole merge phase; clean is mutated into the union."""
    engine = WaveEngine(clean, buf, cycle)
    summary = engine.run()
    return summary, engine.profile, engine.events
