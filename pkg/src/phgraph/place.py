"""Co-location groups on a tile grid: feasibility checks and greedy placement.

A group in block mode needs one tile per member, and those tiles must form a
rectangle of exactly ``len(members)`` tiles.  Column mode uses an n x 1 block;
tile mode puts every member on one tile.  Routes are assumed to run over a
routed fabric, so route pairs only need distinct tiles, not adjacent ones.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Optional, Sequence

from .errors import PlacementFailed
from .phg import EdgeKind, Phg

Tile = tuple[int, int]


@dataclass(frozen=True)
class TargetModel:
    name: str
    rows: int
    cols: int
    tile_kb: int = 32
    dma_channels: int = 2

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"target {self.name!r}: grid must be at least 1x1")
        if self.tile_kb <= 0 or self.dma_channels <= 0:
            raise ValueError(f"target {self.name!r}: budgets must be positive")

    @classmethod
    def from_dict(cls, data: Mapping) -> "TargetModel":
        return cls(str(data.get("name", "target")), int(data["rows"]), int(data["cols"]), int(data.get("tile_kb", 32)), int(data.get("dma_channels", 2)))

    def to_dict(self) -> dict:
        return {"name": self.name, "rows": self.rows, "cols": self.cols, "tile_kb": self.tile_kb, "dma_channels": self.dma_channels}


class PlacementMode(str, enum.Enum):
    BLOCK = "block"
    COLUMN = "column"
    TILE = "tile"


@dataclass(frozen=True)
class CoLocationAnnotation:
    name: str
    members: tuple[int, ...]
    routes: tuple[tuple[int, int], ...] = ()
    dma: tuple[tuple[int, int], ...] = ()
    sync: tuple[int, ...] = ()
    footprint: tuple[tuple[int, int], ...] = ()
    mode: PlacementMode = PlacementMode.BLOCK
    edge: Optional[int] = None

    def __post_init__(self):
        ms = set(self.members)
        if len(ms) != len(self.members):
            raise ValueError(f"group {self.name!r} lists a member twice")
        for a, b in self.routes + self.dma:
            if a not in ms or b not in ms:
                raise ValueError(f"group {self.name!r}: pair ({a}, {b}) references a non-member")
        for m in self.sync:
            if m not in ms:
                raise ValueError(f"group {self.name!r}: sync member {m} is not in the group")
        for m, _ in self.footprint:
            if m not in ms:
                raise ValueError(f"group {self.name!r}: footprint for non-member {m}")

    def footprint_of(self, m: int) -> int:
        return dict(self.footprint).get(m, 0)

    def schedule(self) -> Optional[list[int]]:
        """Members in route-topological order, ties broken by member order; None if routes cycle."""
        pos = {m: i for i, m in enumerate(self.members)}
        indeg = {m: 0 for m in self.members}
        succ: dict[int, list[int]] = {m: [] for m in self.members}
        for a, b in self.routes:
            succ[a].append(b)
            indeg[b] += 1
        ready = sorted((m for m in self.members if indeg[m] == 0), key=pos.__getitem__)
        out = []
        while ready:
            m = ready.pop(0)
            out.append(m)
            for s in succ[m]:
                indeg[s] -= 1
                if indeg[s] == 0:
                    ready.append(s)
                    ready.sort(key=pos.__getitem__)
        return out if len(out) == len(self.members) else None

    def predecessors(self, m: int) -> tuple[int, ...]:
        return tuple(a for a, b in self.routes if b == m)


def _ids(phg: Phg, refs) -> tuple[int, ...]:
    return tuple(phg.resolve(r) for r in refs)


def annotation_from_edge(phg: Phg, eid: int) -> CoLocationAnnotation:
    e = phg.edges[eid]
    if e.kind is not EdgeKind.COLOCATION:
        raise ValueError(f"edge {eid} is not a co-location edge")
    p = e.payload
    return CoLocationAnnotation(
        name=p.get("name", phg.nodes[e.target].name),
        members=e.sources,
        routes=tuple(_ids(phg, pair) for pair in p.get("routes", ())),
        dma=tuple(_ids(phg, pair) for pair in p.get("dma", ())),
        sync=_ids(phg, p.get("sync", ())),
        footprint=tuple((phg.resolve(k), int(v)) for k, v in dict(p.get("footprint", {})).items()),
        mode=PlacementMode(p.get("mode", "block")),
        edge=eid,
    )


def groups_of(phg: Phg) -> list[CoLocationAnnotation]:
    return [annotation_from_edge(phg, e.id) for e in phg.edges if e.kind is EdgeKind.COLOCATION]


class Reason(str, enum.Enum):
    BLOCK_TOO_LARGE = "BlockTooLarge"
    MEMORY_EXCEEDED = "MemoryExceeded"
    CHANNELS_EXCEEDED = "ChannelsExceeded"
    ROUTE_UNROUTABLE = "RouteUnroutable"
    MIXED_REACHABILITY = "MixedReachability"
    UNREACHABLE = "Unreachable"


@dataclass(frozen=True)
class Feasibility:
    reason: Optional[Reason] = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.reason is None

    def __str__(self) -> str:
        return "Feasible" if self.ok else f"Infeasible({self.reason.value}: {self.detail})"


FEASIBLE = Feasibility()


@dataclass(frozen=True)
class FeasibilityMatrix:
    groups: tuple[str, ...]
    targets: tuple[str, ...]
    cells: tuple[tuple[Feasibility, ...], ...]

    def cell(self, group: str, target: str) -> Feasibility:
        return self.cells[self.groups.index(group)][self.targets.index(target)]

    def to_dict(self) -> dict:
        return {
            g: {t: ("Feasible" if c.ok else {"reason": c.reason.value, "detail": c.detail}) for t, c in zip(self.targets, row)}
            for g, row in zip(self.groups, self.cells)
        }


def block_shapes(n: int, target: TargetModel, mode: PlacementMode = PlacementMode.BLOCK) -> list[tuple[int, int]]:
    """(height, width) blocks holding the group that fit the grid, most square first."""
    if mode is PlacementMode.TILE:
        return [(1, 1)]
    if mode is PlacementMode.COLUMN:
        return [(n, 1)] if n <= target.rows else []
    shapes = [(h, n // h) for h in range(1, n + 1) if n % h == 0]
    shapes = [(h, w) for h, w in shapes if h <= target.rows and w <= target.cols]
    return sorted(shapes, key=lambda s: (abs(s[0] - s[1]), s[0]))


def _member_reach(phg: Phg, m: int) -> int:
    full = (1 << len(phg.targets)) - 1
    r = full
    for e in phg.incoming(m, inference_only=False):
        r &= e.reach
    return r


def _channel_load(group: CoLocationAnnotation, tiles: Mapping[int, Tile]) -> dict[Tile, int]:
    load: dict[Tile, int] = {}
    for a, b in group.dma:
        for t in {tiles[a], tiles[b]}:
            load[t] = load.get(t, 0) + 1
    return load


def _layout(group: CoLocationAnnotation, anchor: Tile, shape: tuple[int, int]) -> dict[int, Tile]:
    order = group.schedule() or list(group.members)
    r0, c0 = anchor
    h, w = shape
    if group.mode is PlacementMode.TILE:
        return {m: anchor for m in order}
    return {m: (r0 + i // w, c0 + i % w) for i, m in enumerate(order)}


def group_feasibility(phg: Optional[Phg], group: CoLocationAnnotation, target: TargetModel) -> Feasibility:
    n = len(group.members)
    if phg is not None and target.name in phg.targets:
        bit = 1 << phg.targets.index(target.name)
        flags = {bool(_member_reach(phg, m) & bit) for m in group.members}
        if flags == {True, False}:
            return Feasibility(Reason.MIXED_REACHABILITY, f"some members of {group.name} cannot reach {target.name}")
        if flags == {False}:
            return Feasibility(Reason.UNREACHABLE, f"no member of {group.name} can reach {target.name}")
    shapes = block_shapes(n, target, group.mode)
    if not shapes:
        return Feasibility(Reason.BLOCK_TOO_LARGE, f"no {n}-tile {group.mode.value} placement fits a {target.rows}x{target.cols} grid")
    if group.mode is PlacementMode.TILE:
        total = sum(group.footprint_of(m) for m in group.members)
        if total > target.tile_kb:
            return Feasibility(Reason.MEMORY_EXCEEDED, f"{total} KB on one {target.tile_kb} KB tile")
    else:
        for m in group.members:
            kb = group.footprint_of(m)
            if kb > target.tile_kb:
                return Feasibility(Reason.MEMORY_EXCEEDED, f"member {m} needs {kb} KB, tiles hold {target.tile_kb} KB")
    if group.schedule() is None:
        return Feasibility(Reason.ROUTE_UNROUTABLE, "route relation is cyclic")
    tiles = _layout(group, (0, 0), shapes[0])
    if group.mode is not PlacementMode.TILE:
        for a, b in group.routes:
            if tiles[a] == tiles[b]:
                return Feasibility(Reason.ROUTE_UNROUTABLE, f"route {a}->{b} maps to a single tile")
    worst = max(_channel_load(group, tiles).values(), default=0)
    if worst > target.dma_channels:
        return Feasibility(Reason.CHANNELS_EXCEEDED, f"{worst} DMA pairs on one tile, {target.dma_channels} channels")
    return FEASIBLE


def check_feasibility(phg: Phg, targets: Sequence[TargetModel]) -> FeasibilityMatrix:
    groups = groups_of(phg)
    cells = tuple(tuple(group_feasibility(phg, g, t) for t in targets) for g in groups)
    return FeasibilityMatrix(tuple(g.name for g in groups), tuple(t.name for t in targets), cells)


@dataclass(frozen=True)
class GroupPlan:
    group: str
    mode: PlacementMode
    block: tuple[int, int, int, int]  # row, col, height, width
    tiles: tuple[tuple[int, Tile], ...]
    channels: tuple[tuple[tuple[int, int], int], ...]
    schedule: tuple[int, ...]
    barriers: tuple[tuple[int, tuple[int, ...]], ...]

    @property
    def assignment(self) -> dict[int, Tile]:
        return dict(self.tiles)


@dataclass(frozen=True)
class TilePlan:
    target: TargetModel
    groups: tuple[GroupPlan, ...] = field(default_factory=tuple)

    @property
    def assignment(self) -> dict[int, Tile]:
        out = {}
        for g in self.groups:
            out.update(g.assignment)
        return out

    def to_dict(self, phg: Optional[Phg] = None) -> dict:
        nm = (lambda i: phg.nodes[i].name) if phg is not None else (lambda i: i)
        return {
            "target": self.target.to_dict(),
            "groups": [
                {
                    "group": g.group,
                    "mode": g.mode.value,
                    "block": {"row": g.block[0], "col": g.block[1], "rows": g.block[2], "cols": g.block[3]},
                    "tiles": {nm(m): list(t) for m, t in g.tiles},
                    "dma": [{"pair": [nm(a), nm(b)], "channel": ch} for (a, b), ch in g.channels],
                    "schedule": [nm(m) for m in g.schedule],
                    "barriers": {nm(m): [nm(p) for p in preds] for m, preds in g.barriers},
                }
                for g in self.groups
            ],
        }

    def to_text(self, phg: Optional[Phg] = None) -> str:
        nm = (lambda i: phg.nodes[i].name) if phg is not None else str
        lines = [f"target {self.target.name} {self.target.rows}x{self.target.cols} tile_kb={self.target.tile_kb} dma={self.target.dma_channels}"]
        for g in self.groups:
            r, c, h, w = g.block
            lines.append(f"group {g.group} {g.mode.value} block=({r},{c}) {h}x{w}")
            for m, (tr, tc) in g.tiles:
                lines.append(f"  {nm(m)} -> tile ({tr},{tc})")
            for (a, b), ch in g.channels:
                lines.append(f"  dma {nm(a)}<->{nm(b)} channel {ch}")
            lines.append("  schedule " + " ".join(nm(m) for m in g.schedule))
            for m, preds in g.barriers:
                lines.append(f"  barrier {nm(m)} waits for " + ", ".join(nm(p) for p in preds))
        return "\n".join(lines) + "\n"


def _assign_channels(group: CoLocationAnnotation, tiles: Mapping[int, Tile], budget: int) -> Optional[tuple]:
    used: dict[Tile, set[int]] = {}
    out = []
    for a, b in group.dma:
        ends = {tiles[a], tiles[b]}
        ch = next((c for c in range(budget) if all(c not in used.get(t, ()) for t in ends)), None)
        if ch is None:
            return None
        for t in ends:
            used.setdefault(t, set()).add(ch)
        out.append(((a, b), ch))
    return tuple(out)


def assign(phg: Phg, target: TargetModel, groups: Optional[Sequence[CoLocationAnnotation]] = None) -> TilePlan:
    """Greedy first fit over groups in edge order; block shapes go most-square first with row-major anchors."""
    groups = groups_of(phg) if groups is None else list(groups)
    free = {(r, c) for r in range(target.rows) for c in range(target.cols)}
    plans = []
    for g in groups:
        feas = group_feasibility(phg, g, target)
        if not feas.ok:
            raise PlacementFailed(f"group {g.name!r} is infeasible on {target.name}: {feas}", group=g.name, reason=feas.reason)
        placed = None
        for h, w in block_shapes(len(g.members), target, g.mode):
            for r in range(target.rows - h + 1):
                for c in range(target.cols - w + 1):
                    block = {(r + i, c + j) for i in range(h) for j in range(w)}
                    if block <= free:
                        placed = (r, c, h, w), block
                        break
                if placed:
                    break
            if placed:
                break
        if placed is None:
            raise PlacementFailed(f"no free block left for group {g.name!r} on {target.name}", group=g.name)
        (r, c, h, w), block = placed
        tiles = _layout(g, (r, c), (h, w))
        channels = _assign_channels(g, tiles, target.dma_channels)
        if channels is None:
            raise PlacementFailed(f"DMA channels exhausted for group {g.name!r}", group=g.name)
        free -= block
        order = g.schedule()
        plans.append(
            GroupPlan(
                group=g.name,
                mode=g.mode,
                block=(r, c, h, w),
                tiles=tuple((m, tiles[m]) for m in order),
                channels=channels,
                schedule=tuple(order),
                barriers=tuple((m, g.predecessors(m)) for m in g.sync),
            )
        )
    return TilePlan(target, tuple(plans))


def _is_rectangle(tiles: set[Tile]) -> Optional[tuple[int, int, int, int]]:
    rows = [t[0] for t in tiles]
    cols = [t[1] for t in tiles]
    r, c = min(rows), min(cols)
    h, w = max(rows) - r + 1, max(cols) - c + 1
    return (r, c, h, w) if h * w == len(tiles) else None


def validate_plan(phg: Phg, plan: TilePlan, groups: Optional[Sequence[CoLocationAnnotation]] = None) -> list[str]:
    """Problems found re-checking a plan against grid bounds and group geometry."""
    groups = {g.name: g for g in (groups_of(phg) if groups is None else groups)}
    t = plan.target
    problems = []
    seen: dict[Tile, str] = {}
    for gp in plan.groups:
        g = groups[gp.group]
        tiles = gp.assignment
        if set(tiles) != set(g.members):
            problems.append(f"{gp.group}: plan does not cover exactly the members")
            continue
        for m, (r, c) in tiles.items():
            if not (0 <= r < t.rows and 0 <= c < t.cols):
                problems.append(f"{gp.group}: member {m} off grid")
        used = set(tiles.values())
        for tile in used:
            if tile in seen and seen[tile] != gp.group:
                problems.append(f"{gp.group}: tile {tile} also used by {seen[tile]}")
            seen[tile] = gp.group
        if g.mode is PlacementMode.TILE:
            if len(used) != 1:
                problems.append(f"{gp.group}: tile-mode group spread over {len(used)} tiles")
            if sum(g.footprint_of(m) for m in g.members) > t.tile_kb:
                problems.append(f"{gp.group}: memory budget exceeded")
        else:
            if len(used) != len(g.members) or _is_rectangle(used) is None:
                problems.append(f"{gp.group}: tiles do not form a {len(g.members)}-tile rectangle")
            if g.mode is PlacementMode.COLUMN and len({c for _, c in used}) != 1:
                problems.append(f"{gp.group}: column-mode group spans several columns")
            for m in g.members:
                if g.footprint_of(m) > t.tile_kb:
                    problems.append(f"{gp.group}: member {m} exceeds tile memory")
        chans: dict[Tile, set[int]] = {}
        for (a, b), ch in gp.channels:
            if ch >= t.dma_channels:
                problems.append(f"{gp.group}: channel {ch} beyond budget")
            for tile in {tiles[a], tiles[b]}:
                if ch in chans.setdefault(tile, set()):
                    problems.append(f"{gp.group}: channel {ch} double-booked on tile {tile}")
                chans[tile].add(ch)
        pos = {m: i for i, m in enumerate(gp.schedule)}
        for a, b in g.routes:
            if pos[a] > pos[b]:
                problems.append(f"{gp.group}: schedule runs {b} before its route predecessor {a}")
    return problems


# -- strictness demonstration ---------------------------------------------------


@dataclass(frozen=True)
class PairConstraint:
    a: int
    b: int
    size: int


def clique_relaxation(group: CoLocationAnnotation) -> list[PairConstraint]:
    """All unordered member pairs, each carrying the group size for the pairwise check."""
    if len(group.members) < 3:
        raise ValueError("the clique relaxation is defined for groups of 3 or more")
    n = len(group.members)
    return [PairConstraint(a, b, n) for a, b in combinations(group.members, 2)]


def pair_check(pc: PairConstraint, tiles: Mapping[int, Tile], target: TargetModel) -> bool:
    """Weaker pairwise test: same tile, or both tiles fit inside one grid-fitting block of the group's size."""
    (ra, ca), (rb, cb) = tiles[pc.a], tiles[pc.b]
    if (ra, ca) == (rb, cb):
        return True
    dr, dc = abs(ra - rb), abs(ca - cb)
    return any(dr < h and dc < w for h, w in block_shapes(pc.size, target))


def group_check(group: CoLocationAnnotation, tiles: Mapping[int, Tile], target: TargetModel) -> bool:
    """Block-mode group test: one distinct tile per member and together exactly a rectangle."""
    used = {tiles[m] for m in group.members}
    if len(used) != len(group.members):
        return False
    if any(not (0 <= r < target.rows and 0 <= c < target.cols) for r, c in used):
        return False
    return _is_rectangle(used) is not None
