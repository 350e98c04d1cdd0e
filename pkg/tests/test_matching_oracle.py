import pytest

from oracles import PRICE_GRID, greedy_vs_oracle, max_crossing_matching, unit_instances


def test_oracle_itself():
    assert max_crossing_matching([10, 20], [15, 25]) == 2
    assert max_crossing_matching([10, 20], [30, 15]) == 2
    assert max_crossing_matching([30], [20]) == 0
    assert max_crossing_matching([10, 10, 10], [20]) == 1


@pytest.mark.parametrize("use_numba", [True, False])
def test_greedy_is_maximal_on_unit_instances(use_numba):
    bad = []
    count = 0
    for ap, bp in unit_instances(6, PRICE_GRID):
        got, want = greedy_vs_oracle(ap, bp, use_numba)
        count += 1
        if got != want:
            bad.append((ap, bp, got, want))
    assert count > 1000
    assert bad == []
