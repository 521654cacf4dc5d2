"""Generational loop tying programs, models, and selection together.

Six method configurations: Tourn, LEX, FLEX, NSGA2, FLEX-NSGA2, and Random
(which returns the initial population untouched). Replacement methods let
offspring replace parents; the NSGA2 variants pool parents with offspring
and apply non-dominated survival.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import Dataset, GroupSet
from .model import Individual, fit_weights, new_individual
from .program import crossover, mutate, random_program
from .selection import (FitnessTable, build_fitness_table, crowding_distance,
                        epsilon_lexicase_select, flex_select, nondominated_sort,
                        nsga2_survive, tournament_select)

METHODS = ("Tourn", "LEX", "FLEX", "NSGA2", "FLEX-NSGA2", "Random")
REPLACEMENT_METHODS = ("Tourn", "LEX", "FLEX")
SURVIVAL_METHODS = ("NSGA2", "FLEX-NSGA2")


@dataclass(frozen=True)
class EvolutionConfig:
    method: str = "Tourn"
    generations: int = 100
    population_size: int = 100
    max_depth: int = 6
    max_dim: int = 20
    crossover_rate: float = 0.5
    dim_change_rate: float = 0.25
    gradient_iters: int = 10
    learning_rate: float = 0.1
    tournament_size: int = 2
    include_complexity: bool = True
    flex_nsga2_table2: bool = False   # alternate reading: LEX parents, NSGA2 survival
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        assert self.generations >= 0 and self.population_size >= 2
        assert 0.0 <= self.crossover_rate <= 1.0 and 0.0 <= self.dim_change_rate <= 1.0


@dataclass
class Population:
    individuals: list[Individual]
    table: FitnessTable | None = None
    best_loss_seen: float = float("inf")     # one-slot hall of fame, reporting only
    best_individual: Individual | None = None

    def __len__(self) -> int:
        return len(self.individuals)


def _fitness(pop: Population, ds: Dataset, groups: GroupSet,
             cfg: EvolutionConfig) -> FitnessTable:
    if pop.table is None:
        pop.table = build_fitness_table(pop.individuals, ds, groups,
                                        include_complexity=cfg.include_complexity)
    return pop.table


def init_population(cfg: EvolutionConfig, ds: Dataset,
                    rng: np.random.Generator) -> Population:
    """Random individuals with 1..max_dim feature programs each, fitted."""
    individuals = []
    for _ in range(cfg.population_size):
        dim = int(rng.integers(1, cfg.max_dim + 1))
        programs = [random_program(ds.d, cfg.max_depth, rng) for _ in range(dim)]
        ind = fit_weights(new_individual(programs), ds,
                          iters=cfg.gradient_iters, lr=cfg.learning_rate)
        individuals.append(ind)
    pop = Population(individuals)
    _update_hall_of_fame(pop)
    return pop


def _update_hall_of_fame(pop: Population) -> None:
    for ind in pop.individuals:
        if ind.train_loss < pop.best_loss_seen:
            pop.best_loss_seen = ind.train_loss
            pop.best_individual = ind


def _vary(parent: Individual, partner: Individual, cfg: EvolutionConfig,
          d: int, rng: np.random.Generator) -> Individual:
    """One offspring: dimension change, crossover, or mutation on one feature."""
    programs = list(parent.features)
    weights = parent.weights.copy()        # warm start for the refit

    roll = rng.random()
    can_add = len(programs) < cfg.max_dim
    can_delete = len(programs) > 1
    if roll < cfg.dim_change_rate and (can_add or can_delete):
        add = can_add and (not can_delete or rng.random() < 0.5)
        if add:
            programs.append(random_program(d, cfg.max_depth, rng))
            weights = np.insert(weights, -1, 0.0)
        else:
            victim = int(rng.integers(len(programs)))
            del programs[victim]
            weights = np.delete(weights, victim)
    else:
        slot = int(rng.integers(len(programs)))
        if rng.random() < cfg.crossover_rate:
            donor = partner.features[int(rng.integers(partner.k))]
            programs[slot] = crossover(programs[slot], donor, cfg.max_depth, rng)
        else:
            programs[slot] = mutate(programs[slot], d, cfg.max_depth, rng)
    return Individual(features=tuple(programs), weights=weights)


def _select_parents(table: FitnessTable, cfg: EvolutionConfig, method: str,
                    rngs: list[np.random.Generator]) -> list[int]:
    if method == "Tourn":
        return [tournament_select(table, cfg.tournament_size, r) for r in rngs]
    if method == "LEX":
        return [epsilon_lexicase_select(table, r) for r in rngs]
    if method == "FLEX":
        return [flex_select(table, r) for r in rngs]
    if method == "NSGA2":
        return _crowded_tournament(table, rngs)
    raise ValueError(f"no parent selection for method {method!r}")


def _crowded_tournament(table: FitnessTable,
                        rngs: list[np.random.Generator]) -> list[int]:
    """Binary tournament on (front rank, crowding distance); constant-output
    individuals rank behind everyone."""
    pool = table.eligible()
    rank = np.full(table.n, np.inf)
    crowd = np.zeros(table.n)
    fronts = nondominated_sort(table.objectives[pool])
    for r, front in enumerate(fronts):
        idx = pool[front]
        rank[idx] = r
        crowd[idx] = crowding_distance(table.objectives[idx])
    parents = []
    for rng in rngs:
        i, j = pool[rng.integers(len(pool), size=2)]
        if (rank[i], -crowd[i]) < (rank[j], -crowd[j]):
            parents.append(int(i))
        elif (rank[j], -crowd[j]) < (rank[i], -crowd[i]):
            parents.append(int(j))
        else:
            parents.append(int(i if rng.random() < 0.5 else j))
    return parents


def step_generation(pop: Population, cfg: EvolutionConfig, ds: Dataset,
                    groups: GroupSet, rng: np.random.Generator) -> Population:
    """One generation of the configured method; Random is the identity."""
    if cfg.method == "Random":
        return pop
    n = len(pop)
    table = _fitness(pop, ds, groups, cfg)

    parent_method = cfg.method
    if cfg.method == "FLEX-NSGA2":
        parent_method = "LEX" if cfg.flex_nsga2_table2 else "FLEX"
    select_rngs = rng.spawn(n)
    parents = _select_parents(table, cfg, parent_method, select_rngs)

    vary_rngs = rng.spawn(n)
    offspring = []
    for i, pi in enumerate(parents):
        partner = pop.individuals[parents[int(vary_rngs[i].integers(n))]]
        child = _vary(pop.individuals[pi], partner, cfg, ds.d, vary_rngs[i])
        offspring.append(fit_weights(child, ds, iters=cfg.gradient_iters,
                                     lr=cfg.learning_rate))

    if cfg.method in REPLACEMENT_METHODS:
        new_pop = Population(offspring,
                             best_loss_seen=pop.best_loss_seen,
                             best_individual=pop.best_individual)
    else:
        combined = pop.individuals + offspring
        combined_table = build_fitness_table(combined, ds, groups,
                                             include_complexity=cfg.include_complexity)
        survivors = nsga2_survive(combined_table.objectives, n, rng,
                                  constant_mask=combined_table.constant_mask)
        new_pop = Population([combined[i] for i in survivors],
                             best_loss_seen=pop.best_loss_seen,
                             best_individual=pop.best_individual)
    _update_hall_of_fame(new_pop)
    return new_pop


def run(cfg: EvolutionConfig, train: Dataset, groups: GroupSet,
        log_path: str | None = None) -> Population:
    """Full evolutionary run; returns the final population as the solution set."""
    rng = np.random.default_rng(cfg.seed)
    pop = init_population(cfg, train, rng)
    log_rows = []
    generations = 0 if cfg.method == "Random" else cfg.generations
    for gen in range(generations):
        pop = step_generation(pop, cfg, train, groups, rng)
        if log_path is not None:
            table = _fitness(pop, train, groups, cfg)
            log_rows.append({
                "generation": gen + 1,
                "best_loss": float(table.overall.min()),
                "median_loss": float(np.median(table.overall)),
                "best_marginal_fairness": float(table.objectives[:, 1].min()),
                "mean_program_size": float(np.mean(
                    [ind.complexity() for ind in pop.individuals])),
            })
    if log_path is not None:
        with open(log_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=[
                "generation", "best_loss", "median_loss",
                "best_marginal_fairness", "mean_program_size"])
            writer.writeheader()
            writer.writerows(log_rows)
    return pop
