import itertools

import numpy as np
import pytest

from ehcrn.config import Config, build_model
from ehcrn.detection import DetectorConfig
from ehcrn.network import EnergyModel, FrameTiming, NetworkModel, PuChannel
from ehcrn.optimizers import (
    CeParams,
    ce_optimize,
    elite_count,
    exhaustive_search,
    greedy_assign,
    random_assign,
    subsets_to_rows,
)
from ehcrn.throughput import SchedulingProblem, ThroughputParams


def small_problem(seed, M=3, K=3, delta=0.007, **changes):
    cfg = Config().replace(M=M, K=K, lambda0=Config().lambda0[:K], lambda1=Config().lambda1[:K],
                           delta=delta, **changes)
    return SchedulingProblem(build_model(cfg, seed), cfg.throughput_params())


def tiny_model(snr, delta=0.007):
    snr = np.asarray(snr, float)
    M, K = snr.shape
    return NetworkModel([PuChannel(0.6, 0.4)] * K, snr, FrameTiming(),
                        EnergyModel(1.1e-4, [delta] * M), DetectorConfig())


def test_elite_count():
    assert elite_count(0.6, 50) == 30
    assert elite_count(0.1, 5) == 1
    assert elite_count(1.0, 7) == 7
    assert elite_count(0.7, 10) == 7  # 0.7 * 10 is 7.000000000000001 in floats


def test_subsets_to_rows():
    assert subsets_to_rows(np.array([0, 5]), 3).tolist() == [[0, 0, 0], [1, 0, 1]]


@pytest.mark.parametrize("rep,beta", [("categorical", 0.9), ("bernoulli", 0.3)])
def test_single_entry_converges(rep, beta):
    prob = SchedulingProblem(tiny_model([[1.0]]), ThroughputParams())
    assert prob.objective(np.ones((1, 1))) > prob.objective(np.zeros((1, 1)))
    res = ce_optimize(prob, CeParams(50, 0.6, 20, 1e-3, beta, rep), seed=0)
    mass = res.pmf[0, 1] if rep == "categorical" else res.pmf[0, 0]
    assert mass >= 0.99
    assert res.best_assignment.tolist() == [[1]]


@pytest.mark.parametrize("rep", ["bernoulli", "categorical"])
def test_ce_close_to_exhaustive_small(rep):
    hits = 0
    for seed in range(20):
        prob = small_problem(seed)
        opt = exhaustive_search(prob).best_value
        res = ce_optimize(prob, CeParams(representation=rep), seed=seed)
        hits += res.best_value >= 0.99 * opt - 1e-12
    assert hits >= 19


def test_ce_iteration_invariants():
    prob = small_problem(2, M=4, K=3, delta=0.0025)
    seen = []

    def check(it, samples, scores, elite, eta, pmf):
        assert np.allclose(pmf.sum(axis=1), 1.0, atol=1e-9)
        assert np.all((pmf >= 0) & (pmf <= 1))
        assert len(elite) == elite_count(0.6, 40)
        assert np.all(scores[elite] >= eta)
        assert np.sum(scores > eta) < len(elite) <= np.sum(scores >= eta)
        seen.append(it)

    res = ce_optimize(prob, CeParams(40, 0.6, 30, 1e-3, 0.9, "categorical"), seed=1, callback=check)
    assert seen == list(range(1, res.iterations + 1))
    assert res.objective_evaluations == 40 * res.iterations
    bests = [r.best_value for r in res.trace]
    assert all(a <= b for a, b in zip(bests, bests[1:]))
    assert res.best_value == pytest.approx(float(prob.objective(res.best_assignment)), abs=0)
    assert prob.feasible(res.best_assignment)


def test_rho_one_beta_one_is_empirical_distribution():
    prob = small_problem(0, M=2, K=2)
    for rep in ("categorical", "bernoulli"):
        captured = {}

        def grab(it, samples, scores, elite, eta, pmf):
            if it == 1:
                captured["samples"], captured["pmf"] = samples.copy(), pmf.copy()

        ce_optimize(prob, CeParams(16, 1.0, 1, 1e-3, 1.0, rep), seed=5, callback=grab)
        samples = captured["samples"]
        if rep == "bernoulli":
            expected = samples.mean(axis=0)
        else:
            codes = (samples * (1 << np.arange(2))).sum(axis=2)
            expected = np.stack([np.bincount(codes[:, m], minlength=4) / 16 for m in range(2)])
        assert np.allclose(captured["pmf"], expected, atol=0)


def test_ce_deterministic_and_final_mode():
    prob = small_problem(3)
    a = ce_optimize(prob, CeParams(), seed=11)
    b = ce_optimize(prob, CeParams(), seed=11)
    assert np.array_equal(a.best_assignment, b.best_assignment) and a.trace == b.trace
    final = ce_optimize(prob, CeParams(return_mode="final"), seed=11)
    assert final.best_value <= a.best_value
    assert "iteration,best_value,eta,pmf_max_change,evaluations_cumulative" in a.trace_csv()


def test_ce_guards():
    with pytest.raises(ValueError):
        CeParams(sample_size=1)
    with pytest.raises(ValueError):
        CeParams(elite_fraction=0.0)
    with pytest.raises(ValueError):
        CeParams(smoothing=1.5)

    class Wide:
        shape = (1, 21)
    with pytest.raises(ValueError, match="guard"):
        ce_optimize(Wide(), CeParams(representation="categorical"))


def enumerate_best(prob):
    M, K = prob.shape
    best, best_J = -np.inf, None
    for bits in itertools.product((0, 1), repeat=M * K):
        J = np.array(bits).reshape(M, K)
        if not prob.feasible(J):
            continue
        v = float(prob.throughput(J))
        if v > best:
            best, best_J = v, J
    return best, best_J


@pytest.mark.parametrize("seed", range(5))
def test_exhaustive_matches_reenumeration(seed):
    prob = small_problem(seed, M=2, K=2, delta=0.0012)
    res = exhaustive_search(prob)
    best, J = enumerate_best(prob)
    assert res.best_value == pytest.approx(best, abs=0)
    assert np.array_equal(res.best_assignment, J)
    assert res.objective_evaluations == 16


def test_exhaustive_trivial_and_guard():
    prob = SchedulingProblem(tiny_model([[1.0]]), ThroughputParams())
    res = exhaustive_search(prob)
    assert res.objective_evaluations == 2 and res.best_assignment.tolist() == [[1]]
    with pytest.raises(ValueError, match="guard"):
        exhaustive_search(small_problem(0, M=5, K=5))


def test_exhaustive_tie_break_is_lexicographic():
    # Useless sensors everywhere: every matrix scores 0, the zero matrix wins.
    prob = SchedulingProblem(tiny_model(np.zeros((2, 2))), ThroughputParams())
    assert exhaustive_search(prob).best_assignment.tolist() == [[0, 0], [0, 0]]


def test_greedy_first_flip_is_best_single_assignment():
    prob = small_problem(4, M=4, K=3)
    M, K = prob.shape
    singles = {}
    for m, k in itertools.product(range(M), range(K)):
        J = np.zeros((M, K), int)
        J[m, k] = 1
        singles[(m, k)] = float(prob.objective(J))
    best = max(singles.values())
    first = min(mk for mk, v in singles.items() if v == best)
    res = greedy_assign(prob)
    if best > 0:
        J1 = np.zeros((M, K), int)
        J1[first] = 1
        assert res.trace[0].best_value == pytest.approx(best)
        assert res.iterations >= 1
        assert res.best_assignment[first] == 1


def test_greedy_zero_budget():
    prob = small_problem(0, delta=0.001)
    res = greedy_assign(prob)
    assert res.best_value == 0.0 and not res.best_assignment.any()


@pytest.mark.parametrize("seed", range(8))
def test_greedy_and_random_below_exhaustive(seed):
    prob = small_problem(seed, M=3, K=3, delta=0.0025)
    opt = exhaustive_search(prob).best_value
    g = greedy_assign(prob)
    assert g.best_value <= opt + 1e-12 and prob.feasible(g.best_assignment)
    r = random_assign(prob, seed=seed)
    assert r.best_value <= opt + 1e-12 and prob.feasible(r.best_assignment)


def test_random_assign_deterministic_feasible_and_bounded():
    prob = small_problem(1, M=3, K=3, delta=0.0025)
    a, b = random_assign(prob, seed=9), random_assign(prob, seed=9)
    assert np.array_equal(a.best_assignment, b.best_assignment)
    values = [random_assign(prob, seed=s).best_value for s in range(1000)]
    assert all(prob.feasible(random_assign(prob, seed=s).best_assignment) for s in range(50))
    assert np.mean(values) <= exhaustive_search(prob).best_value
