"""Seeded random tasks for identity checks and the inverse-rl harness."""
import numpy as np

from erl.core.mdp import PolicyTable, RewardTable, TabularDynamics, Task, uniform_prior
from erl.shaping.potential import Potential


def random_dynamics(
    rng: np.random.Generator, num_states: int, num_actions: int, concentration: float = 1.0
) -> TabularDynamics:
    transition = rng.dirichlet(np.full(num_states, concentration), size=(num_states, num_actions))
    return TabularDynamics(transition=transition)


def random_reward(
    rng: np.random.Generator,
    num_states: int,
    num_actions: int,
    low: float = -1.0,
    high: float = 1.0,
) -> RewardTable:
    return RewardTable(values=rng.uniform(low, high, size=(num_states, num_actions, num_states)))


def random_policy(
    rng: np.random.Generator, num_states: int, num_actions: int, concentration: float = 1.0
) -> PolicyTable:
    probs = rng.dirichlet(np.full(num_actions, concentration), size=num_states)
    # keep every entry bounded away from zero so log-ratios stay moderate
    probs = 0.9 * probs + 0.1 / num_actions
    return PolicyTable(probs=probs / probs.sum(axis=1, keepdims=True))


def random_potential(rng: np.random.Generator, num_states: int, scale: float = 1.0) -> Potential:
    return Potential(phi=rng.uniform(-scale, scale, size=num_states))


def random_task(
    rng: np.random.Generator,
    num_states: int,
    num_actions: int,
    gamma: float = 0.9,
    beta: float = 1.0,
    random_prior: bool = False,
    reward_low: float = -1.0,
    reward_high: float = 1.0,
) -> Task:
    prior = (
        random_policy(rng, num_states, num_actions)
        if random_prior
        else uniform_prior(num_states, num_actions)
    )
    return Task(
        dynamics=random_dynamics(rng, num_states, num_actions),
        reward=random_reward(rng, num_states, num_actions, reward_low, reward_high),
        gamma=gamma,
        beta=beta,
        prior=prior,
    )
