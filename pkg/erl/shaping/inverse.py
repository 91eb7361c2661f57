"""Inverse rewards and the identifiability condition."""
from typing import Union

import numpy as np

from erl.core.errors import ShapeMismatchError
from erl.core.mdp import PolicyTable, RewardTable, TabularDynamics, TaskEnvironment
from erl.shaping.potential import Potential


def inverse_reward(
    target_policy: PolicyTable,
    target_value: Union[Potential, np.ndarray],
    environment: TaskEnvironment,
) -> RewardTable:
    """Reward under which ``target_policy`` is soft-optimal with value ``target_value``.

    R(s,a,s') = (1/beta) log(pi(a|s) / pi0(a|s)) + v(s) - gamma v(s'), unique up to a
    constant shift of v.
    """
    if not isinstance(target_value, Potential):
        target_value = Potential(phi=target_value)
    probs = target_policy.probs
    if probs.shape != environment.prior.shape:
        raise ShapeMismatchError(
            f"policy shape {probs.shape} != prior shape {environment.prior.shape}"
        )
    if target_value.num_states != environment.num_states:
        raise ShapeMismatchError(
            f"value has {target_value.num_states} entries, environment has "
            f"{environment.num_states} states"
        )
    if not target_policy.is_strictly_positive():
        raise ValueError("target policy must be strictly positive")

    v = target_value.phi
    log_ratio = np.log(probs / environment.prior.probs) / environment.beta
    values = log_ratio[:, :, None] + v[:, None, None] - environment.gamma * v[None, None, :]
    return RewardTable(values=values)


def identifiability_residual(
    p: TabularDynamics,
    gamma: float,
    phi: Union[Potential, np.ndarray],
    q: TabularDynamics,
    gamma_tilde: float,
    psi: Union[Potential, np.ndarray],
    literal: bool = False,
) -> np.ndarray:
    """Difference of the two shaping terms, indexed (s, a).

    Default reading: [gamma E_p phi(s') - phi(s)] - [gamma~ E_q psi(s') - psi(s)].
    ``literal=True`` takes the expectation over the condition exactly as printed,
    [gamma phi(s) - E_p phi(s')] - [gamma~ psi(s) - E_q psi(s')].
    """
    phi = phi.phi if isinstance(phi, Potential) else np.asarray(phi, dtype=float)
    psi = psi.phi if isinstance(psi, Potential) else np.asarray(psi, dtype=float)
    if p.transition.shape != q.transition.shape:
        raise ShapeMismatchError(
            f"dynamics shapes differ: {p.transition.shape} vs {q.transition.shape}"
        )
    if phi.shape != (p.num_states,) or psi.shape != (p.num_states,):
        raise ShapeMismatchError(
            f"potentials must have {p.num_states} entries, got {phi.shape} and {psi.shape}"
        )

    if literal:
        first = gamma * phi[:, None] - p.expectation(phi)
        second = gamma_tilde * psi[:, None] - q.expectation(psi)
    else:
        first = gamma * p.expectation(phi) - phi[:, None]
        second = gamma_tilde * q.expectation(psi) - psi[:, None]
    return first - second


def defeats_identifiability(
    residual: np.ndarray,
    phi: Union[Potential, np.ndarray],
    psi: Union[Potential, np.ndarray],
    atol: float = 1e-10,
) -> bool:
    phi = phi.phi if isinstance(phi, Potential) else np.asarray(phi, dtype=float)
    psi = psi.phi if isinstance(psi, Potential) else np.asarray(psi, dtype=float)
    trivial = np.ptp(phi) <= atol and np.ptp(psi) <= atol
    return bool(np.max(np.abs(residual)) <= atol and not trivial)
