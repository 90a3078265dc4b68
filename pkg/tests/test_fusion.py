import io

import pytest

from dcomp.fusion import (
    DUPLICATES,
    OWN_FALLBACK,
    RANDOM_FALLBACK,
    AnnouncementRound,
    duplicate_indices,
    fuse_broadcast,
    fuse_neighborhood,
    round_rng,
    write_announcements,
)


def rnd(*values):
    return AnnouncementRound.from_indices(values)


@pytest.mark.parametrize("values, expected", [
    ((5, 5, 9, 2), {5}),
    ((7, 7, 3, 3, 3), {3, 7}),
    ((1, 2, 3, 4), set()),
])
def test_duplicate_indices(values, expected):
    assert duplicate_indices(rnd(*values)) == expected


def test_broadcast_duplicates():
    out = fuse_broadcast(rnd(5, 5, 9, 2))
    assert out.as_set == {5} and out.mode == DUPLICATES


def test_broadcast_fallback_lowest_node():
    out = fuse_broadcast(rnd(1, 2, 3, 4))
    assert out.fused == (1,) and out.mode == RANDOM_FALLBACK


def test_broadcast_fallback_shared_rng_agrees():
    r = rnd(10, 20, 30, 40)
    picks = {fuse_broadcast(r, round_rng(99, t)).fused for t in range(1, 40)}
    assert len(picks) > 1  # varies across rounds
    assert fuse_broadcast(r, round_rng(99, 3)) == fuse_broadcast(r, round_rng(99, 3))


def test_broadcast_multi_index_deterministic():
    a = fuse_broadcast(rnd(7, 7, 3, 3))
    b = fuse_broadcast(rnd(7, 7, 3, 3))
    assert a == b and a.as_set == {3, 7}


def test_broadcast_orders_by_multiplicity():
    assert fuse_broadcast(rnd(4, 9, 9, 9, 4, 1)).fused == (9, 4)


def test_neighborhood_plurality():
    assert fuse_neighborhood(rnd(4, 4, 8), own_index=8).as_set == {4}


def test_neighborhood_swaps_held_index():
    out = fuse_neighborhood(rnd(4, 4, 8), own_index=8, own_prev={4})
    assert out.as_set == {8}


def test_neighborhood_all_distinct_keeps_own():
    out = fuse_neighborhood(rnd(1, 2, 3), own_index=2)
    assert out.as_set == {2} and out.mode == OWN_FALLBACK


def test_neighborhood_plurality_ties_fuse_all():
    out = fuse_neighborhood(rnd(4, 4, 6, 6, 1), own_index=1)
    assert out.as_set == {4, 6}


def test_neighborhood_can_be_empty():
    out = fuse_neighborhood(rnd(4, 4, 8), own_index=8, own_prev={4, 8})
    assert out.fused == ()


def test_announcement_csv():
    buf = io.StringIO()
    write_announcements([AnnouncementRound(2, ((0, 5), (1, 7)))], buf, trial=3)
    assert buf.getvalue().splitlines() == ["trial,round,node,index", "3,2,0,5", "3,2,1,7"]
