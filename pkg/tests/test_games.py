import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qcollusion.games import (ActionGrid, GameSpec, benchmark_profits, check_assumptions,
                              game_from_dict, game_from_json, make_bertrand, make_game,
                              make_mixed_auction, make_prisoners_dilemma, valid_perturbations)


def brute_force_violations(game):
    """Independent check written against grid indices and the rank map."""
    K = game.K
    by_rank = {r: i for i, r in enumerate(game.rank)}
    u = lambda k, kp: float(game.payoff[by_rank[k], by_rank[kp]])  # noqa: E731
    floor = float(game.payoff.min())
    ids = set()
    diag = [u(k, k) for k in range(1, K + 1)]
    if not (floor < diag[0] and all(x < y for x, y in zip(diag, diag[1:]))):
        ids.add("1.1")
    if any(u(k, kp) != floor for k in range(1, K + 1) for kp in range(1, k)):
        ids.add("1.2")
    if any(not any(u(kp, k) >= u(k, k) for kp in range(1, k)) for k in range(2, K + 1)):
        ids.add("1.3")
    if any(u(k, kp) > u(k, kp + 1) for k in range(1, K + 1) for kp in range(1, K)):
        ids.add("1.4")
    return ids


class TestBertrand:
    def test_tie_splits_demand(self, bertrand):
        assert bertrand.u(0.5, 0.5) == 0.25

    def test_winner_and_loser(self, bertrand):
        assert bertrand.u(0.3, 0.5) == 0.3
        assert bertrand.u(0.7, 0.5) == 0.0

    def test_two_point_grid(self):
        g = make_bertrand(2, 0.1, 0.2)
        assert g.u(0.1, 0.1) == 0.05
        assert g.u(0.1, 0.2) == 0.1
        assert g.u(0.2, 0.1) == 0.0
        assert g.u(0.2, 0.2) == 0.1

    def test_grid_is_evenly_spaced_and_exact(self, bertrand):
        assert bertrand.values.tolist() == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
        assert bertrand.rank[0] == 1 and bertrand.nash_index == 0

    def test_demand_times_margin_is_payoff(self, bertrand):
        margin = bertrand.values[:, None] - bertrand.cost
        assert np.array_equal(margin * bertrand.demand, bertrand.payoff)

    @pytest.mark.parametrize("args", [(10, 0.1, 1.0, 0.1), (10, 1.0, 0.5, 0.0), (1, 0.1, 1.0, 0.0)])
    def test_invalid_parameters(self, args):
        with pytest.raises(ValueError):
            make_bertrand(*args)

    def test_passes_assumptions(self, bertrand):
        report = check_assumptions(bertrand)
        assert report.passed and bool(report)
        assert brute_force_violations(bertrand) == set()

    def test_spaced_grid_that_breaks_condition_three(self):
        # 0.2 against 0.6 earns 0.2 < u(0.6, 0.6) = 0.3
        g = make_bertrand(3, 0.2, 1.0)
        ids = {v[0] for v in check_assumptions(g).violations}
        assert ids == {"1.3"} == brute_force_violations(g)


class TestPrisonersDilemma:
    def test_valid_spec(self, pd):
        assert pd.floor_payoff == 0
        assert pd.grid.labels == ("D", "C")
        assert pd.rank_order().tolist() == [0, 1]

    def test_tie_is_rejected(self):
        with pytest.raises(ValueError):
            make_prisoners_dilemma(0, 1, 2, 2)

    def test_passes_assumptions(self, pd):
        assert check_assumptions(pd).passed

    def test_swapped_temptation_fails_condition_three(self):
        # u_DC below u_CC: a custom table bypassing the constructor's guard
        payoff = np.array([[1.0, 1.5], [0.0, 2.0]])
        g = GameSpec(ActionGrid((0.0, 1.0), ("D", "C")), payoff, (1, 2), "pd")
        ids = {v[0] for v in check_assumptions(g).violations}
        assert "1.3" in ids
        assert brute_force_violations(g) == ids

    def test_benchmarks(self, pd):
        assert benchmark_profits(pd) == (2.0, 4.0)


class TestMixedAuction:
    def test_first_price(self):
        g = make_mixed_auction(10, 1.0, 1.0)
        assert g.u(0.3, 0.1) == 0.7

    def test_second_price(self):
        g = make_mixed_auction(10, 1.0, 0.0)
        assert g.u(0.3, 0.1) == 0.9

    @pytest.mark.parametrize("omega", [0.0, 0.3, 0.5, 1.0])
    def test_tie(self, omega):
        assert make_mixed_auction(10, 1.0, omega).u(0.4, 0.4) == 0.3

    def test_grid_and_rank(self):
        g = make_mixed_auction(10, 1.0, 0.5)
        assert g.values[0] == 0.0 and g.values[-1] == 0.9
        assert g.nash_index == 9

    def test_omega_range(self):
        with pytest.raises(ValueError):
            make_mixed_auction(10, 1.0, 1.5)

    @pytest.mark.parametrize("omega", [0.0, 0.25, 0.5, 0.75, 1.0])
    def test_passes_assumptions(self, omega):
        g = make_mixed_auction(10, 1.0, omega)
        assert check_assumptions(g).passed
        assert brute_force_violations(g) == set()

    def test_first_price_matches_bertrand_relabelled(self, bertrand):
        # bid b <-> price 1 - b: the winner keeps v - b = p in both games
        fpa = make_mixed_auction(10, 1.0, 1.0)
        assert np.array_equal(fpa.payoff[::-1, ::-1], bertrand.payoff)


class TestBenchmarksAndPerturbations:
    def test_bertrand_benchmarks(self, bertrand):
        r_n, r_m = benchmark_profits(bertrand)
        assert r_n == pytest.approx(0.1) and r_m == 1.0

    def test_valid_perturbations_bertrand(self, bertrand):
        # rank k price p_k: undercutting to p' < p_k wins p' >= p_k / 2
        for k in range(2, 11):
            p = bertrand.values[k - 1]
            expected = [kp for kp in range(1, k) if bertrand.values[kp - 1] >= p / 2 - 1e-12]
            assert valid_perturbations(bertrand, k) == expected


class TestSerialization:
    @pytest.mark.parametrize("game", [make_bertrand(), make_prisoners_dilemma(),
                                      make_mixed_auction(5, 2.0, 0.4)])
    def test_round_trip(self, game):
        back = game_from_json(game.to_json())
        assert np.array_equal(back.payoff, game.payoff)
        assert back.rank == game.rank and back.values.tolist() == game.values.tolist()
        assert json.loads(back.to_json()) == json.loads(game.to_json())

    def test_custom_table(self):
        doc = {"label": "custom", "grid": [0, 1], "payoff": [[1, 3], [0, 2]], "rank": [1, 2]}
        g = game_from_dict(doc)
        assert check_assumptions(g).passed

    def test_payoff_is_read_only(self, bertrand):
        with pytest.raises(ValueError):
            bertrand.payoff[0, 0] = 1.0

    def test_make_game_by_label(self):
        assert make_game({"label": "pd"}).K == 2
        assert make_game({"label": "mixed_auction", "K": 4}).K == 4
        with pytest.raises(ValueError):
            make_game({"label": "cournot"})


@given(K=st.integers(2, 12), lo_num=st.integers(1, 9), cost_num=st.integers(0, 8))
def test_bertrand_family_satisfies_assumptions_when_grid_is_fine(K, lo_num, cost_num):
    cost_tenths = min(cost_num, lo_num - 1)
    g = make_bertrand(K, lo_num / 10, 1.0, cost_tenths / 10)
    ids = {v[0] for v in check_assumptions(g).violations}
    assert ids == brute_force_violations(g)
    # condition 1.3 holds exactly when undercutting by one step pays at least half
    lo, c = Fraction(lo_num, 10), Fraction(cost_tenths, 10)
    step = (1 - lo) / (K - 1)
    prices = [lo + k * step for k in range(1, K)]
    margin_ok = all(p - step - c >= (p - c) / 2 for p in prices)
    assert ("1.3" not in ids) == margin_ok


@given(K=st.integers(2, 10), v=st.sampled_from([1.0, 2.0, 3.0]),
       omega=st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0]))
def test_auction_family_assumptions(K, v, omega):
    g = make_mixed_auction(K, v, omega)
    ids = {x[0] for x in check_assumptions(g).violations}
    assert ids == brute_force_violations(g) == set()


@given(st.lists(st.integers(-5, 5), min_size=4, max_size=4, unique=True))
def test_pd_ordering_contract(vals):
    a, b, c, d = sorted(vals)
    g = make_prisoners_dilemma(a, b, c, d)
    assert check_assumptions(g).passed
    r_n, r_m = benchmark_profits(g)
    assert r_m >= r_n
    assert g.floor_payoff == Fraction(a)
