import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from approachability.corpus import COUNTEREXAMPLE_TARGET, counterexample, partial_corpus
from approachability.geometry import Box
from approachability.simulator import run, run_batch
from approachability.strategies import (BestResponseExcluder, BlackwellStrategy, BlockStrategy, CalibratedStrategy,
                                        DoublingStrategy, FixedMixed, Stacked, Stationary, ThresholdExcluder,
                                        WeakApproachStrategy, alternating, block_lengths, exploration_rate, signals_action_free,
                                        stationary_distribution, type_grid)


def invariant_by_eig(Q):
    w, v = np.linalg.eig(Q.T)
    p = np.real(v[:, np.argmin(np.abs(w - 1))])
    return p / p.sum()


@given(st.integers(2, 6), st.integers(0, 10_000))
def test_stationary_distribution_matches_eigenvector(L, seed):
    rng = np.random.default_rng(seed)
    Rpos = np.maximum(rng.normal(size=(3, L, L)), 0)
    Rpos[:, np.arange(L), np.arange(L)] = 0
    Rpos[0] += 0.01 * (1 - np.eye(L))  # one chain surely irreducible
    pi = stationary_distribution(Rpos, np.full((3, L), 1 / L))
    rows = Rpos.sum(axis=2)
    for r in range(3):
        if rows[r].max() == 0:
            continue
        Q = Rpos[r] / rows[r].max()
        Q[np.arange(L), np.arange(L)] = 1 - rows[r] / rows[r].max()
        assert np.allclose(pi[r] @ Q, pi[r], atol=1e-9)
    Q0 = Rpos[0] / rows[0].max()
    Q0[np.arange(L), np.arange(L)] = 1 - rows[0] / rows[0].max()
    assert np.allclose(pi[0], invariant_by_eig(Q0), atol=1e-8)


def test_stationary_distribution_uniform_without_regret():
    pi = stationary_distribution(np.zeros((2, 4, 4)), np.full((2, 4), 0.25))
    assert np.allclose(pi, 0.25)


def test_stationary_distribution_reducible_chain():
    # two absorbing blocks: the answer must still be invariant
    Rpos = np.zeros((1, 4, 4))
    Rpos[0, 0, 1] = Rpos[0, 1, 0] = 1.0
    Rpos[0, 2, 3] = Rpos[0, 3, 2] = 1.0
    pi = stationary_distribution(Rpos, np.array([[0.7, 0.1, 0.1, 0.1]]))
    Q = Rpos[0].copy()
    assert np.allclose(pi[0] @ Q, pi[0], atol=1e-9)
    assert pi[0].sum() == pytest.approx(1.0)


def test_exploration_rate():
    assert exploration_rate(1) == 1.0
    assert exploration_rate(1000) == pytest.approx(0.1)


def test_blackwell_first_stage_uniform_then_projection():
    g = counterexample("full")
    s = BlackwellStrategy(g, COUNTEREXAMPLE_TARGET)
    s.reset([0, 1])
    assert np.allclose(s.next_mixed(), 0.5)
    s.observe(np.array([0, 0]), np.array([1, 1]), np.array([[1.0], [0.3]]))
    x = s.next_mixed()
    assert np.allclose(x[0], [0, 1])  # average 1: play B
    assert np.allclose(x[1], 0.5)  # inside C: uniform


def test_naive_blackwell_ignores_realized_payoffs():
    g = counterexample("none")
    s = BlackwellStrategy(g, COUNTEREXAMPLE_TARGET, assumed_opponent=[0.5, 0.5])
    s.reset([0])
    s.next_mixed()
    s.observe(np.array([0]), np.array([0]), np.array([[123.0]]))
    assert np.allclose(s.sum.mean(), [0.5])


@pytest.fixture(scope="module")
def noisy_calibrated():
    inst = partial_corpus()[0]
    return inst, CalibratedStrategy.from_game(inst.game, inst.target, 0.1)


def test_type_grid_deduplicates(noisy_calibrated):
    inst, s = noisy_calibrated
    flags, reps, cells = type_grid(inst.game, 10)
    assert len(flags) == 11 == s.n_types
    blind = counterexample("none")
    assert len(type_grid(blind, 10)[0]) == 1


def test_calibrated_play_mixes_witness_and_uniform():
    inst = partial_corpus()[1]  # only T reveals the column, so play must explore
    s = CalibratedStrategy.from_game(inst.game, inst.target, 0.25)
    assert not signals_action_free(inst.game)
    s.reset(range(4))
    for t in range(1, 30):
        x = s.next_mixed()
        g = exploration_rate(t)
        assert np.allclose(x, (1 - g) * s.witnesses[s.current_types] + g / 2)
        s.observe(np.zeros(4, int), np.zeros(4, int))
    assert np.all(s.counts.sum(axis=1) == s.t)


def test_no_exploration_when_signals_ignore_the_action(noisy_calibrated):
    inst, s = noisy_calibrated
    assert signals_action_free(inst.game)
    s.reset(range(3))
    for _ in range(5):
        x = s.next_mixed()
        assert np.allclose(x, s.witnesses[s.current_types])
        s.observe(np.zeros(3, int), np.zeros(3, int))


@pytest.mark.parametrize("estimator", ["min-norm", "importance"])
def test_flag_estimators_are_unbiased(noisy_calibrated, estimator):
    inst, s = noisy_calibrated
    s2 = CalibratedStrategy(s.type_flags, s.witnesses, s.F.T.reshape(-1, 2, 2), estimator=estimator)
    g = inst.game
    x = np.array([[0.3, 0.7]])
    y = np.array([0.4, 0.6])
    true = np.einsum("j,ijs->is", y, g.signals).reshape(-1)
    # exact expectation over (i, j, s)
    mean = np.zeros(4)
    for i in range(2):
        for j in range(2):
            for sig in range(2):
                p = x[0, i] * y[j] * g.signals[i, j, sig]
                mean += p * s2.estimate_flags(x, np.array([i]), np.array([sig]))[0]
    assert np.allclose(mean, true, atol=1e-12)


def test_per_type_decomposition_is_exact(noisy_calibrated):
    inst, s = noisy_calibrated
    tr = run(inst.game, s, Stationary([0.3, 0.7]), 500, seed=3, target=inst.target)
    n = tr.horizon
    recon = np.zeros(1)
    for l in np.unique(tr.types):
        sel = tr.types == l
        recon += sel.sum() / n * tr.payoffs[sel].mean(axis=0)
    assert np.abs(recon - tr.averages[-1]).max() <= 1e-12


def test_dominant_type_drives_distance_to_zero():
    g = counterexample("none")
    C = Box([0.0], [1.0])  # T alone keeps payoffs in C
    s = CalibratedStrategy.from_game(g, C, 0.1)
    assert np.allclose(s.witnesses[:, 0], 1.0, atol=1e-6)
    res = run_batch(g, s, Stationary([0.5, 0.5]), 3000, range(5), target=C)
    assert res.distances[:, -1].max() < 0.05


def test_calibrated_flags_lack_of_guarantee():
    g = counterexample("none")
    s = CalibratedStrategy.from_game(g, COUNTEREXAMPLE_TARGET, 0.5)
    assert not s.guarantee
    with pytest.raises(ValueError):
        CalibratedStrategy.from_game(g, COUNTEREXAMPLE_TARGET, 0.0)


def test_doubling_block_bookkeeping():
    made = []

    def factory(eps):
        made.append(eps)
        return FixedMixed([1 - eps / 2, eps / 2])

    s = DoublingStrategy(factory, 2)
    assert s.block_bounds(0) == (0, 64) and s.block_bounds(1) == (64, 320)
    s.reset([0])
    for t in range(65):
        x = s.next_mixed()
        s.observe(np.array([0]), np.array([0]), np.zeros((1, 1)))
    assert made == [1.0, 0.5]
    assert s.block == 1 and s.inner.t == 1  # fresh at stage L0 + 1
    assert np.allclose(x, [0.75, 0.25])


def test_doubling_an_exact_strategy_changes_nothing():
    g = counterexample("full")
    wrapped = DoublingStrategy(lambda eps: FixedMixed([0.3, 0.7]), 2)
    a = run(g, wrapped, Stationary([0.5, 0.5]), 400, seed=9)
    b = run(g, FixedMixed([0.3, 0.7]), Stationary([0.5, 0.5]), 400, seed=9)
    assert np.array_equal(a.actions_p1, b.actions_p1)


def test_block_lengths_and_guards():
    assert block_lengths(4) == [1, 32, 2187, 262144]
    for bad in (0, 6):
        with pytest.raises(ValueError):
            BlockStrategy(bad)
    s = BlockStrategy(3)
    assert [s.action_at(t) for t in (0, 1, 32, 33, 2219, 10**6)] == [0, 1, 1, 0, 0, 0]


def test_block_play_ignores_the_opponent():
    g = counterexample("none")
    a = run(g, BlockStrategy(3), Stationary([1, 0]), 3000, seed=0)
    b = run(g, BlockStrategy(3), alternating(2), 3000, seed=1)
    assert np.array_equal(a.actions_p1, b.actions_p1)
    avg = a.averages
    assert avg[2219] >= -1 / 3  # end of the third (T) block


def test_weak_strategy_guards():
    for kw in ({"k": 4}, {"M": 1}, {"horizon_block": 500}):
        with pytest.raises(ValueError):
            WeakApproachStrategy(**kw)


def test_weak_strategy_k2_M2_against_L():
    g = counterexample("none")
    s = WeakApproachStrategy(2, 2, 1000)
    res = run_batch(g, s, Stationary([1, 0]), s.horizon, range(400), target=Box([0.0], [0.5]),
                    checkpoints=[1000])
    assert np.all(res.averages[:, 0, 0] == 0.0)  # phase one: T against L
    assert (res.distances[:, -1] <= 2 / 2).mean() >= 0.5


def test_stationary_is_seed_deterministic():
    g = counterexample("full")
    a = run(g, FixedMixed([0.5, 0.5]), Stationary([0.2, 0.8]), 300, seed=4)
    b = run(g, FixedMixed([0.5, 0.5]), Stationary([0.2, 0.8]), 300, seed=4)
    assert np.array_equal(a.actions_p2, b.actions_p2)
    pure = run(g, FixedMixed([0.5, 0.5]), Stationary([0, 1]), 50, seed=4)
    assert np.all(pure.actions_p2 == 1)


def test_stacked_runs_match_solo_runs():
    g = counterexample("full")
    both = run_batch(g, FixedMixed([0.5, 0.5]), Stacked([Stationary([1, 0]), Stationary([0, 1])]), 100, [0, 1])
    solo = run_batch(g, FixedMixed([0.5, 0.5]), Stationary([0, 1]), 100, [1])
    assert np.array_equal(both.averages[1], solo.averages[0])


@pytest.mark.parametrize("x_T, column", [(0.1, 0), (0.5, 0), (0.75, 1), (1.0, 1)])
def test_threshold_excluder_choice(x_T, column):
    y = ThresholdExcluder().choose(x_T)
    assert y[column] == 1.0
    # the chosen column is the worse one for Player 1 at that frequency
    d = [COUNTEREXAMPLE_TARGET.distance(np.array([[x_T * 0 - (1 - x_T)], [x_T]]))[k] for k in range(2)]
    assert d[column] >= min(d) - 1e-12


def test_threshold_excluder_needs_preparation():
    tau = ThresholdExcluder()
    tau.reset([0])
    with pytest.raises(RuntimeError):
        tau.next_mixed()


def test_best_response_excluder():
    g = counterexample("none")
    tau = BestResponseExcluder(g, COUNTEREXAMPLE_TARGET)
    assert tau.delta == pytest.approx(0.25, abs=1e-6)
    assert np.allclose(tau.choose(g, [1.0, 0.0]), [0, 1])  # always T: play R, d = 1/2
    assert np.allclose(tau.choose(g, [0.0, 1.0]), [1, 0])  # always B: play L, d = 1
    assert np.allclose(tau.choose(g, [0.75, 0.25]), tau.verts[0])  # tie: first vertex
    res = run_batch(g, FixedMixed([1.0, 0.0]), tau, 500, range(20), target=COUNTEREXAMPLE_TARGET)
    assert res.distances[:, -1].mean() == pytest.approx(0.5)
    with pytest.raises(ValueError):
        BestResponseExcluder(counterexample("full"), COUNTEREXAMPLE_TARGET)
