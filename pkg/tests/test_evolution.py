import numpy as np
import pytest

from fairgp.data import build_simple_groups, train_test_split
from fairgp.evolution import (METHODS, EvolutionConfig, init_population, run,
                              step_generation)
from fairgp.model import predict_proba
from fairgp.selection import build_fitness_table, flex_select, nsga2_survive

from conftest import make_dataset


def toy_dataset(m=60, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(m, 4))
    X[:, 0] = rng.integers(0, 2, m)
    y = ((X[:, 1] + 0.7 * X[:, 2] + 0.3 * X[:, 0]) > 0).astype(int)
    return make_dataset(X, y, ["c0"])


def small_cfg(method, **kw):
    base = dict(method=method, generations=3, population_size=8, max_depth=4,
                max_dim=4, gradient_iters=5, seed=42)
    base.update(kw)
    return EvolutionConfig(**base)


@pytest.mark.parametrize("method", METHODS)
def test_population_size_invariant(method):
    ds = toy_dataset()
    groups = build_simple_groups(ds, 5)
    pop = run(small_cfg(method), ds, groups)
    assert len(pop) == 8


def test_random_method_returns_initial_population():
    ds = toy_dataset(seed=1)
    groups = build_simple_groups(ds, 5)
    cfg = small_cfg("Random", generations=50)
    pop = run(cfg, ds, groups)
    init = init_population(cfg, ds, np.random.default_rng(cfg.seed))
    assert [str(i.features) for i in pop.individuals] == \
        [str(i.features) for i in init.individuals]


def test_zero_generations_is_initialization_only():
    ds = toy_dataset(seed=2)
    groups = build_simple_groups(ds, 5)
    cfg = small_cfg("Tourn", generations=0)
    pop = run(cfg, ds, groups)
    init = init_population(cfg, ds, np.random.default_rng(cfg.seed))
    assert [str(i.features) for i in pop.individuals] == \
        [str(i.features) for i in init.individuals]


@pytest.mark.parametrize("method", ["Tourn", "FLEX", "NSGA2", "FLEX-NSGA2"])
def test_run_deterministic_per_seed(method):
    ds = toy_dataset(seed=3)
    groups = build_simple_groups(ds, 5)
    a = run(small_cfg(method), ds, groups)
    b = run(small_cfg(method), ds, groups)
    for x, y in zip(a.individuals, b.individuals):
        assert [str(p) for p in x.features] == [str(p) for p in y.features]
        assert np.array_equal(x.weights, y.weights)


def test_different_seeds_differ():
    ds = toy_dataset(seed=4)
    groups = build_simple_groups(ds, 5)
    a = run(small_cfg("Tourn", seed=1), ds, groups)
    b = run(small_cfg("Tourn", seed=2), ds, groups)
    assert [str(i.features) for i in a.individuals] != \
        [str(i.features) for i in b.individuals]


def test_structural_invariants_hold_throughout():
    ds = toy_dataset(seed=5)
    groups = build_simple_groups(ds, 5)
    cfg = small_cfg("NSGA2", generations=5)
    rng = np.random.default_rng(cfg.seed)
    pop = init_population(cfg, ds, rng)
    for _ in range(cfg.generations):
        pop = step_generation(pop, cfg, ds, groups, rng)
        for ind in pop.individuals:
            assert 1 <= ind.k <= cfg.max_dim
            assert all(p.depth() <= cfg.max_depth for p in ind.features)
            assert len(ind.weights) == ind.k + 1
            assert np.isfinite(ind.weights).all()
            assert np.isfinite(predict_proba(ind, ds)).all()


def test_hall_of_fame_monotone_and_consistent():
    ds = toy_dataset(seed=6)
    groups = build_simple_groups(ds, 5)
    cfg = small_cfg("Tourn", generations=6)
    rng = np.random.default_rng(cfg.seed)
    pop = init_population(cfg, ds, rng)
    best = pop.best_loss_seen
    assert best == min(i.train_loss for i in pop.individuals)
    for _ in range(cfg.generations):
        pop = step_generation(pop, cfg, ds, groups, rng)
        assert pop.best_loss_seen <= best + 1e-15
        best = pop.best_loss_seen
        assert pop.best_individual.train_loss == best


def test_nsga2_survival_is_elitist_on_loss():
    """With parents pooled in, the surviving minimum loss never regresses."""
    ds = toy_dataset(seed=7)
    groups = build_simple_groups(ds, 5)
    cfg = small_cfg("NSGA2", generations=4, population_size=10)
    rng = np.random.default_rng(cfg.seed)
    pop = init_population(cfg, ds, rng)
    prev = min(i.train_loss for i in pop.individuals)
    for _ in range(cfg.generations):
        pop = step_generation(pop, cfg, ds, groups, rng)
        cur = min(i.train_loss for i in pop.individuals)
        assert cur <= prev + 1e-12
        prev = cur


def test_constant_individuals_never_survive_when_avoidable():
    """An all-constant feature set must rank behind every real front."""
    rng = np.random.default_rng(8)
    objectives = rng.uniform(0, 1, (12, 3))
    objectives[3] = 0.0   # would dominate everyone if eligible
    mask = np.zeros(12, bool)
    mask[3] = True
    survivors = nsga2_survive(objectives, 6, rng, constant_mask=mask)
    assert 3 not in survivors


def test_constant_individuals_never_picked_as_flex_parents():
    ds = toy_dataset(seed=9)
    groups = build_simple_groups(ds, 5)
    cfg = small_cfg("FLEX")
    pop = init_population(cfg, ds, np.random.default_rng(cfg.seed))
    table = build_fitness_table(pop.individuals, ds, groups)
    if not table.constant_mask.any():
        table = build_fitness_table(pop.individuals, ds, groups)
        mask = table.constant_mask.copy()
        mask[0] = True
        object.__setattr__(table, "constant_mask", mask)
    rng = np.random.default_rng(10)
    banned = set(np.flatnonzero(table.constant_mask))
    assert all(flex_select(table, rng) not in banned for _ in range(300))


def test_flex_nsga2_alternate_parent_scheme_runs():
    ds = toy_dataset(seed=11)
    groups = build_simple_groups(ds, 5)
    pop = run(small_cfg("FLEX-NSGA2", flex_nsga2_table2=True), ds, groups)
    assert len(pop) == 8


def test_generation_log_written(tmp_path):
    ds = toy_dataset(seed=12)
    groups = build_simple_groups(ds, 5)
    log = tmp_path / "log.csv"
    run(small_cfg("Tourn", generations=2), ds, groups, log_path=str(log))
    lines = log.read_text().strip().splitlines()
    assert lines[0].startswith("generation,")
    assert len(lines) == 3


def test_evolution_works_on_split_data():
    ds = toy_dataset(m=80, seed=13)
    train, test = train_test_split(ds, 0.5, seed=0)
    groups = build_simple_groups(train, 5)
    pop = run(small_cfg("LEX"), train, groups)
    for ind in pop.individuals:
        p = predict_proba(ind, test)
        assert p.shape == (test.m,)
        assert np.isfinite(p).all()
