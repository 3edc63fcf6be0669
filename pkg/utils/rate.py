"""
Zero-forcing precoding and Shannon-rate estimation for users sharing one RB.
"""

from dataclasses import dataclass
from typing import Dict, Mapping, Sequence

import numpy as np

from utils.channel import ChannelTensor, UndefinedCorrelationError

DEFAULT_REG_EPS = 1e-6
CONDITION_CAP = 1e12


class OverSubscriptionError(ValueError):
    """More co-scheduled users than antennas."""


class SingularChannelError(ValueError):
    """Unregularized ZF asked to invert an ill-conditioned Gram matrix."""


@dataclass(frozen=True)
class LinkBudget:
    """
    Radio parameters for the rate model.

    Defaults: 1 W transmit, 10 mW noise, a 20 MHz carrier split into 52 RBs,
    1 ms TTIs.
    """

    transmit_power: float = 1.0
    noise_power: float = 0.01
    rb_bandwidth: float = 20e6 / 52
    tti_duration: float = 1e-3

    def __post_init__(self):
        for name in ("transmit_power", "noise_power", "rb_bandwidth", "tti_duration"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"LinkBudget.{name} must be > 0, got {value}")

    @property
    def bits_per_unit(self) -> float:
        """Bits carried per TTI for 1 bit/s/Hz of spectral efficiency."""
        return self.rb_bandwidth * self.tti_duration

    def mbps_to_bits(self, mbps: float) -> float:
        return mbps * 1e6 * self.tti_duration

    def bits_to_mbps(self, bits: float) -> float:
        return bits / self.tti_duration / 1e6


@dataclass(frozen=True)
class PrecodingMatrix:
    weights: np.ndarray

    @property
    def column_norms_sq(self) -> np.ndarray:
        w = self.weights
        return np.sum(w.real**2 + w.imag**2, axis=-2)

    @property
    def effective_gains(self) -> np.ndarray:
        """Per-stream ZF gain 1/||w_k||^2."""
        return 1.0 / self.column_norms_sq


def _zf_weights(h: np.ndarray, reg_eps: float) -> np.ndarray:
    """W = H (H^H H + eps I)^{-1} for a single matrix or a stack (..., M, U)."""
    num_users = h.shape[-1]
    gram = np.matmul(np.conj(np.swapaxes(h, -1, -2)), h)
    if reg_eps > 0:
        gram = gram + reg_eps * np.eye(num_users)
    else:
        cond = np.linalg.cond(gram)
        if np.any(~np.isfinite(cond)) or np.any(cond > CONDITION_CAP):
            raise SingularChannelError(
                f"Gram matrix condition number {np.max(cond):.3g} exceeds "
                f"{CONDITION_CAP:.0e}; use reg_eps > 0 for correlated users"
            )
    eye = np.broadcast_to(np.eye(num_users, dtype=gram.dtype), gram.shape)
    return np.matmul(h, np.linalg.solve(gram, eye))


def zf_precoder(h_sub: np.ndarray, reg_eps: float = DEFAULT_REG_EPS) -> PrecodingMatrix:
    """
    Regularized zero-forcing precoder for the columns of ``h_sub``.

    Args:
        h_sub: Complex M x |U| channel matrix
        reg_eps: Diagonal loading; 0 gives exact ZF

    Returns:
        PrecodingMatrix: W = H (H^H H + reg_eps I)^{-1}

    Raises:
        OverSubscriptionError: If |U| > M
        SingularChannelError: If reg_eps == 0 and the Gram matrix is ill-conditioned
    """
    h_sub = np.asarray(h_sub, dtype=np.complex128)
    if h_sub.ndim == 1:
        h_sub = h_sub[:, None]
    if reg_eps < 0:
        raise ValueError(f"reg_eps must be >= 0, got {reg_eps}")
    m, u = h_sub.shape
    if u > m:
        raise OverSubscriptionError(f"{u} users cannot be zero-forced with {m} antennas")
    return PrecodingMatrix(_zf_weights(h_sub, reg_eps))


def sinr_batch(h: np.ndarray, budget: LinkBudget, reg_eps: float) -> np.ndarray:
    """
    Per-user SINR for a stack of candidate sets.

    Each set gets equal power P/|U| on the normalized ZF beams. Interference
    left over by regularization is charged against the user; under exact ZF
    this reduces to (P/|U|) / (N0 ||w_k||^2).

    Args:
        h: (..., M, U) channel stacks
        budget: Link parameters
        reg_eps: Diagonal loading

    Returns:
        np.ndarray: (..., U) SINR values

    Raises:
        OverSubscriptionError: If U > M
        UndefinedCorrelationError: If a user has a zero channel vector
    """
    num_users = h.shape[-1]
    if num_users > h.shape[-2]:
        raise OverSubscriptionError(
            f"{num_users} users cannot be zero-forced with {h.shape[-2]} antennas"
        )
    if np.any(np.linalg.norm(h, axis=-2) == 0.0):
        raise UndefinedCorrelationError(
            "Zero-forcing undefined: at least one user has a zero channel vector"
        )
    w = _zf_weights(h, reg_eps)
    beams = w / np.linalg.norm(w, axis=-2, keepdims=True)
    # coupling[..., k, j] = |h_k^H v_j|^2
    coupling = np.abs(np.matmul(np.conj(np.swapaxes(h, -1, -2)), beams)) ** 2
    power = budget.transmit_power / num_users
    signal = power * np.diagonal(coupling, axis1=-2, axis2=-1)
    leak = power * (np.sum(coupling, axis=-1)) - signal
    return signal / (budget.noise_power + np.maximum(leak, 0.0))


def rates_from_sinr(sinr: np.ndarray, budget: LinkBudget) -> np.ndarray:
    return budget.bits_per_unit * np.log2(1.0 + np.maximum(sinr, 0.0))


def achieved_rates(
    channel: ChannelTensor,
    b: int,
    t: int,
    users: Sequence[int],
    budget: LinkBudget,
    reg_eps: float = DEFAULT_REG_EPS,
) -> np.ndarray:
    """
    Shannon rate of every user in ``users`` when co-scheduled on (b, t).

    Returns:
        np.ndarray: bits per TTI, aligned with ``users``

    Raises:
        OverSubscriptionError: If len(users) > M
        SingularChannelError: From the unregularized precoder
    """
    users = list(users)
    if not users:
        return np.zeros(0)
    if len(set(users)) != len(users):
        raise ValueError(f"Duplicate users in set {users}")
    h = channel.matrix(b, t)[:, users]
    return rates_from_sinr(sinr_batch(h, budget, reg_eps), budget)


def slice_rate(user_rates: Mapping[int, float], slice_users) -> float:
    """Sum of the rates of scheduled users that belong to a slice."""
    members = set(slice_users)
    return float(sum(r for k, r in user_rates.items() if k in members))


def rates_by_user(users: Sequence[int], rates: Sequence[float]) -> Dict[int, float]:
    return {int(k): float(r) for k, r in zip(users, rates)}
