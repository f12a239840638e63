import itertools
import json
from pathlib import Path

import pytest

from phgraph.errors import PlacementFailed
from phgraph.phg import Phg
from phgraph.place import (
    CoLocationAnnotation,
    PlacementMode,
    Reason,
    TargetModel,
    assign,
    block_shapes,
    check_feasibility,
    clique_relaxation,
    group_check,
    group_feasibility,
    groups_of,
    pair_check,
    validate_plan,
)
from phgraph.program import load_program

FIX = Path(__file__).parent / "fixtures"


def target(name):
    return TargetModel.from_dict(json.loads((FIX / f"{name}.json").read_text()))


def pipeline():
    return load_program((FIX / "pipeline.phg").read_text())[1]


def test_target_model_round_trip_and_validation():
    t = target("npu_2x2")
    assert TargetModel.from_dict(t.to_dict()) == t
    with pytest.raises(ValueError):
        TargetModel("bad", 0, 2)
    with pytest.raises(ValueError):
        TargetModel("bad", 2, 2, tile_kb=0)


def test_block_shapes():
    t = TargetModel("g", 3, 4)
    assert block_shapes(4, t) == [(2, 2), (1, 4)]
    assert block_shapes(6, t) == [(2, 3), (3, 2)]
    assert block_shapes(5, t) == []
    assert block_shapes(3, t, PlacementMode.COLUMN) == [(3, 1)]
    assert block_shapes(9, t, PlacementMode.TILE) == [(1, 1)]


def test_annotation_validation():
    with pytest.raises(ValueError):
        CoLocationAnnotation("g", (0, 0))
    with pytest.raises(ValueError):
        CoLocationAnnotation("g", (0, 1), routes=((0, 2),))
    with pytest.raises(ValueError):
        CoLocationAnnotation("g", (0, 1), sync=(3,))


def test_schedule_and_cycles():
    g = CoLocationAnnotation("g", (3, 1, 2), routes=((1, 2), (3, 1)))
    assert g.schedule() == [3, 1, 2]
    assert CoLocationAnnotation("g", (1, 2), routes=((1, 2), (2, 1))).schedule() is None


def test_pipeline_places_on_a_2x2_grid():
    phg = pipeline()
    [grp] = groups_of(phg)
    plan = assign(phg, target("npu_2x2"))
    tiles = {phg.nodes[m].name: t for m, t in plan.assignment.items()}
    assert tiles == {"load_A": (0, 0), "compute_B": (0, 1), "compute_C": (1, 0), "reduce_D": (1, 1)}
    [gp] = plan.groups
    assert [(phg.nodes[m].name, [phg.nodes[p].name for p in ps]) for m, ps in gp.barriers] == [("reduce_D", ["compute_B", "compute_C"])]
    assert len(gp.channels) == 1
    assert validate_plan(phg, plan) == []
    assert "barrier reduce_D waits for compute_B, compute_C" in plan.to_text(phg)
    assert plan.to_dict(phg)["groups"][0]["block"] == {"row": 0, "col": 0, "rows": 2, "cols": 2}


def test_pipeline_on_a_strip_is_block_too_large():
    phg = pipeline()
    m = check_feasibility(phg, [target("npu_2x2"), target("strip_1x3")])
    assert m.cell("tile", "npu_2x2").ok
    assert m.cell("tile", "strip_1x3").reason is Reason.BLOCK_TOO_LARGE
    with pytest.raises(PlacementFailed):
        assign(phg, target("strip_1x3"))


def test_budgets():
    t = TargetModel("t", 2, 2, tile_kb=20, dma_channels=1)
    big = CoLocationAnnotation("g", (0, 1), footprint=((0, 24),))
    assert group_feasibility(None, big, t).reason is Reason.MEMORY_EXCEEDED
    packed = CoLocationAnnotation("g", (0, 1), footprint=((0, 12), (1, 12)), mode=PlacementMode.TILE)
    assert group_feasibility(None, packed, t).reason is Reason.MEMORY_EXCEEDED
    busy = CoLocationAnnotation("g", (0, 1, 2), dma=((0, 1), (0, 2)))
    assert group_feasibility(None, busy, TargetModel("t", 1, 3, dma_channels=1)).reason is Reason.CHANNELS_EXCEEDED
    loop = CoLocationAnnotation("g", (0, 1), routes=((0, 1), (1, 0)))
    assert group_feasibility(None, loop, t).reason is Reason.ROUTE_UNROUTABLE


def test_tile_mode_puts_everything_on_one_tile():
    t = TargetModel("t", 2, 2)
    g = CoLocationAnnotation("g", (0, 1, 2), mode=PlacementMode.TILE)
    assert group_feasibility(None, g, t).ok


def reach_graph(reaches):
    phg = Phg(targets=("cpu", "npu"))
    src = phg.add_node("src", "scalar")
    members = []
    for i, r in enumerate(reaches):
        m = phg.add_node(f"m{i}", "scalar")
        phg.add_hyperedge("transfer", [src], m, reach=r)
        members.append(m)
    out = phg.add_node("out", "scalar")
    phg.add_hyperedge("colocate", members, out)
    return phg


def test_mixed_reachability():
    npu = TargetModel("npu", 2, 2)
    assert check_feasibility(reach_graph([0b11, 0b01]), [npu]).cell("out", "npu").reason is Reason.MIXED_REACHABILITY
    assert check_feasibility(reach_graph([0b01, 0b01]), [npu]).cell("out", "npu").reason is Reason.UNREACHABLE
    assert check_feasibility(reach_graph([0b10, 0b11]), [npu]).cell("out", "npu").ok


def test_two_groups_do_not_overlap():
    phg = Phg()
    ids = [phg.add_node(f"n{i}", "scalar") for i in range(6)]
    a, b = phg.add_node("a", "scalar"), phg.add_node("b", "scalar")
    phg.add_hyperedge("colocate", ids[:2], a)
    phg.add_hyperedge("colocate", ids[2:4], b)
    plan = assign(phg, TargetModel("t", 2, 2))
    assert len(set(plan.assignment.values())) == 4
    assert validate_plan(phg, plan) == []
    with pytest.raises(PlacementFailed):
        c = phg.add_node("c", "scalar")
        phg.add_hyperedge("colocate", ids[4:6], c)
        assign(phg, TargetModel("t", 2, 2))


def test_validate_plan_catches_tampering():
    phg = pipeline()
    plan = assign(phg, target("npu_2x2"))
    gp = plan.groups[0]
    bad_tiles = tuple((m, (0, 0)) for m, _ in gp.tiles)
    bad = type(plan)(plan.target, (type(gp)(gp.group, gp.mode, gp.block, bad_tiles, gp.channels, gp.schedule, gp.barriers),))
    assert validate_plan(phg, bad)


def test_clique_relaxation_requires_three():
    with pytest.raises(ValueError):
        clique_relaxation(CoLocationAnnotation("g", (0, 1)))
    assert len(clique_relaxation(CoLocationAnnotation("g", (0, 1, 2, 3)))) == 6


def test_group_check_implies_pairwise_on_small_grid():
    t = TargetModel("t", 3, 3)
    for n in (3, 4):
        g = CoLocationAnnotation("g", tuple(range(n)))
        pcs = clique_relaxation(g)
        grid = [(r, c) for r in range(3) for c in range(3)]
        gaps = 0
        for combo in itertools.product(grid, repeat=n):
            tiles = dict(enumerate(combo))
            pw = all(pair_check(pc, tiles, t) for pc in pcs)
            grp = group_check(g, tiles, t)
            assert pw or not grp
            gaps += pw and not grp
        assert gaps > 0


def test_fifth_square_group_does_not_fit_a_4x4_grid():
    phg = Phg()
    for g in range(5):
        ms = [phg.add_node(f"g{g}_{i}", "scalar") for i in range(4)]
        phg.add_hyperedge("colocate", ms, phg.add_node(f"out{g}", "scalar"))
    grid = TargetModel("grid", 4, 4)
    groups = groups_of(phg)
    assert len(assign(phg, grid, groups[:4]).groups) == 4
    with pytest.raises(PlacementFailed) as info:
        assign(phg, grid)
    assert "out4" in str(info.value)
