"""
Channel coefficients for the scheduler: trace files, a clustered synthetic
generator, and the gain / correlation primitives the schedulers rely on.

Tensors are indexed (b, t, m, k): RB, TTI, antenna, user.
"""

import hashlib
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional, Sequence, Union

import numpy as np

TRACE_MAGIC = b"MMCH"
TRACE_VERSION = 1
TRACE_HEADER = struct.Struct("<4sIIIII8s")

# NLoS clusters are this much weaker in average power.
NLOS_POWER = 0.5


class ChannelLoadError(ValueError):
    """Base class for trace loading failures."""


class TraceFormatError(ChannelLoadError):
    """Header is missing, has the wrong magic, or an unsupported version."""


class TraceTruncatedError(ChannelLoadError):
    """Payload size does not match the dimensions in the header."""


class NonFiniteChannelError(ChannelLoadError):
    """Trace contains NaN or Inf coefficients."""


class UndefinedCorrelationError(ValueError):
    """Correlation asked for a user with a zero channel vector."""


class ClusterSpecError(ValueError):
    """Invalid synthetic cluster description."""


class ChannelTensor:
    """
    Immutable complex channel tensor.

    ``first_tti`` lets a window of a longer run be addressed with global TTI
    indices, so the harness can stream one TTI at a time.
    """

    def __init__(self, data: np.ndarray, first_tti: int = 0):
        arr = np.array(data, dtype=np.complex128)
        if arr.ndim != 4:
            raise ValueError(
                f"Channel data must be 4-D (b, t, m, k), got shape {arr.shape}"
            )
        if min(arr.shape) < 1:
            raise ValueError(f"Every channel dimension must be >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteChannelError("Channel data contains NaN or Inf values")
        arr.setflags(write=False)
        self._data = arr
        self.first_tti = int(first_tti)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def num_rbs(self) -> int:
        return self._data.shape[0]

    @property
    def num_ttis(self) -> int:
        return self._data.shape[1]

    @property
    def num_antennas(self) -> int:
        return self._data.shape[2]

    @property
    def num_users(self) -> int:
        return self._data.shape[3]

    def _tti_index(self, t: int) -> int:
        local = t - self.first_tti
        if not 0 <= local < self.num_ttis:
            raise IndexError(
                f"TTI {t} outside tensor window "
                f"[{self.first_tti}, {self.first_tti + self.num_ttis})"
            )
        return local

    def _check_rb(self, b: int) -> None:
        if not 0 <= b < self.num_rbs:
            raise IndexError(f"RB {b} out of range [0, {self.num_rbs})")

    def _check_user(self, k: int) -> None:
        if not 0 <= k < self.num_users:
            raise IndexError(f"User {k} out of range [0, {self.num_users})")

    def at(self, t: int) -> np.ndarray:
        """All RBs at TTI ``t`` as a (B, M, N) view."""
        return self._data[:, self._tti_index(t)]

    def matrix(self, b: int, t: int) -> np.ndarray:
        """The M x N channel matrix on (b, t)."""
        self._check_rb(b)
        return self._data[b, self._tti_index(t)]

    def vector(self, b: int, t: int, k: int) -> np.ndarray:
        self._check_user(k)
        return self.matrix(b, t)[:, k]

    def gains(self, t: int) -> np.ndarray:
        """Channel gains ||h_k^{b,t}||^2 for every (b, k) at TTI ``t``."""
        h = self.at(t)
        return np.sum(h.real**2 + h.imag**2, axis=1)

    def digest(self) -> str:
        return hashlib.sha256(self._data.tobytes()).hexdigest()

    def __repr__(self) -> str:
        return (
            f"ChannelTensor(B={self.num_rbs}, T={self.num_ttis}, "
            f"M={self.num_antennas}, N={self.num_users}, first_tti={self.first_tti})"
        )


class MobilityKind(str, Enum):
    STATIC = "static"
    SLOW = "slow"
    FAST = "fast"


@dataclass(frozen=True)
class MobilityMode:
    """
    How channels evolve across TTIs.

    Static and Slow evolve each user's own fading with a Gauss-Markov step of
    weight ``innovation`` (zero keeps the channel fixed). Fast reassigns each
    user to a uniformly drawn cluster with probability ``hop_probability``.
    """

    kind: MobilityKind = MobilityKind.STATIC
    innovation: float = 0.0
    hop_probability: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", MobilityKind(self.kind))
        for name in ("innovation", "hop_probability"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ClusterSpecError(f"{name} must lie in [0, 1], got {value}")

    @classmethod
    def static(cls) -> "MobilityMode":
        return cls(MobilityKind.STATIC)

    @classmethod
    def slow(cls, innovation: float = 0.1) -> "MobilityMode":
        return cls(MobilityKind.SLOW, innovation=innovation)

    @classmethod
    def fast(cls, hop_probability: float = 0.5) -> "MobilityMode":
        return cls(MobilityKind.FAST, hop_probability=hop_probability)


@dataclass(frozen=True)
class ClusterSpec:
    """
    Clustered user layout for the synthetic generator.

    Users are assigned to clusters in contiguous index blocks following
    ``users_per_cluster``.
    """

    num_users: int
    users_per_cluster: Sequence[int]
    intra_cluster_corr: float = 0.9
    inter_cluster_corr: float = 0.1
    los_flags: Optional[Sequence[bool]] = None
    seed: int = 0
    frequency_flat: bool = False

    @property
    def num_clusters(self) -> int:
        return len(self.users_per_cluster)

    def validate(self) -> None:
        """
        Raises:
            ClusterSpecError: describing the first problem found
        """
        if self.num_users < 1:
            raise ClusterSpecError(f"num_users must be >= 1, got {self.num_users}")
        if not self.users_per_cluster or any(c < 1 for c in self.users_per_cluster):
            raise ClusterSpecError(
                f"users_per_cluster needs positive counts, got {list(self.users_per_cluster)}"
            )
        if sum(self.users_per_cluster) != self.num_users:
            raise ClusterSpecError(
                f"users_per_cluster sums to {sum(self.users_per_cluster)} "
                f"but num_users is {self.num_users}"
            )
        for name in ("intra_cluster_corr", "inter_cluster_corr"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ClusterSpecError(f"{name} must lie in [0, 1], got {value}")
        if self.num_clusters > 1 and not self.inter_cluster_corr < self.intra_cluster_corr:
            raise ClusterSpecError(
                "inter_cluster_corr must be below intra_cluster_corr "
                f"({self.inter_cluster_corr} >= {self.intra_cluster_corr})"
            )
        if self.inter_cluster_corr > self.intra_cluster_corr:
            raise ClusterSpecError("inter_cluster_corr cannot exceed intra_cluster_corr")
        if self.los_flags is not None and len(self.los_flags) != self.num_clusters:
            raise ClusterSpecError(
                f"los_flags has {len(self.los_flags)} entries for "
                f"{self.num_clusters} clusters"
            )

    def membership(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_clusters), self.users_per_cluster)


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


class SyntheticChannelGenerator:
    """
    Streams channel snapshots one TTI at a time.

    A user's channel on RB b is

        h = a * (sqrt(rho) * s_c + sqrt(1 - rho) * n_k)

    where s_c is the cluster steering vector, n_k the user's own fading and
    a the cluster amplitude. Steering vectors share a common component of
    weight inter/intra so that cross-cluster pairs land near inter_cluster_corr.
    """

    def __init__(
        self,
        spec: ClusterSpec,
        num_antennas: int,
        num_rbs: int,
        mobility: Optional[MobilityMode] = None,
    ):
        spec.validate()
        if num_antennas < 1 or num_rbs < 1:
            raise ClusterSpecError(
                f"num_antennas and num_rbs must be >= 1, got {num_antennas}, {num_rbs}"
            )
        self.spec = spec
        self.num_antennas = num_antennas
        self.num_rbs = num_rbs
        self.mobility = mobility or MobilityMode.static()

        self._rng = np.random.default_rng(spec.seed)
        draws = 1 if spec.frequency_flat else num_rbs
        rho = spec.intra_cluster_corr
        shared = spec.inter_cluster_corr / rho if rho > 0 else 0.0

        common = _cn(self._rng, (draws, num_antennas))
        own = _cn(self._rng, (spec.num_clusters, draws, num_antennas))
        self._steering = np.sqrt(shared) * common[None] + np.sqrt(1.0 - shared) * own

        los = spec.los_flags if spec.los_flags is not None else [True] * spec.num_clusters
        self._amplitude = np.where(np.asarray(los, dtype=bool), 1.0, np.sqrt(NLOS_POWER))
        self._cluster_of = spec.membership()
        self._fading = _cn(self._rng, (spec.num_users, draws, num_antennas))
        self._started = False

    @property
    def cluster_of(self) -> np.ndarray:
        """Current cluster of every user (changes under fast mobility)."""
        return self._cluster_of.copy()

    def _advance(self) -> None:
        mode = self.mobility
        if mode.kind is MobilityKind.FAST:
            hops = self._rng.random(self.spec.num_users) < mode.hop_probability
            if np.any(hops):
                self._cluster_of = self._cluster_of.copy()
                self._cluster_of[hops] = self._rng.integers(
                    0, self.spec.num_clusters, size=int(hops.sum())
                )
                self._fading[hops] = _cn(self._rng, self._fading[hops].shape)
        elif mode.innovation > 0:
            fresh = _cn(self._rng, self._fading.shape)
            self._fading = (
                np.sqrt(1.0 - mode.innovation) * self._fading
                + np.sqrt(mode.innovation) * fresh
            )

    def _snapshot(self) -> np.ndarray:
        rho = self.spec.intra_cluster_corr
        steer = self._steering[self._cluster_of]  # (N, draws, M)
        amp = self._amplitude[self._cluster_of][:, None, None]
        h = amp * (np.sqrt(rho) * steer + np.sqrt(1.0 - rho) * self._fading)
        if self.spec.frequency_flat:
            h = np.broadcast_to(h, (h.shape[0], self.num_rbs, h.shape[2]))
        # (N, B, M) -> (B, M, N), rounded to trace precision so files round-trip
        out = np.transpose(h, (1, 2, 0)).astype(np.complex64)
        return out.astype(np.complex128)

    def next_tti(self) -> np.ndarray:
        """The next (B, M, N) snapshot."""
        if self._started:
            self._advance()
        self._started = True
        return self._snapshot()

    def stream(self, num_ttis: int) -> Iterator[ChannelTensor]:
        """Yield single-TTI tensors for TTIs 0..num_ttis-1."""
        for t in range(num_ttis):
            yield ChannelTensor(self.next_tti()[:, None], first_tti=t)


def generate_synthetic(
    spec: ClusterSpec,
    num_antennas: int,
    num_rbs: int,
    num_ttis: int,
    mobility: Optional[MobilityMode] = None,
) -> ChannelTensor:
    """
    Generate a full (B, T, M, N) clustered channel tensor.

    Args:
        spec: Cluster layout and seed
        num_antennas: Base-station antennas M
        num_rbs: Resource blocks B
        num_ttis: TTIs T
        mobility: Evolution across TTIs (static by default)

    Returns:
        ChannelTensor: deterministic for a fixed ``spec.seed``

    Raises:
        ClusterSpecError: If the spec is inconsistent
    """
    if num_ttis < 1:
        raise ClusterSpecError(f"num_ttis must be >= 1, got {num_ttis}")
    gen = SyntheticChannelGenerator(spec, num_antennas, num_rbs, mobility)
    snaps = [gen.next_tti() for _ in range(num_ttis)]
    return ChannelTensor(np.stack(snaps, axis=1))


def save_trace(channel: ChannelTensor, path: Union[str, Path]) -> Path:
    """
    Write ``channel`` in the MMCH trace layout.

    Raises:
        OSError: If the path is not writable
    """
    path = Path(path)
    header = TRACE_HEADER.pack(
        TRACE_MAGIC,
        TRACE_VERSION,
        channel.num_antennas,
        channel.num_users,
        channel.num_rbs,
        channel.num_ttis,
        b"\x00" * 8,
    )
    payload = np.ascontiguousarray(channel.data, dtype="<c8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    return path


def load_trace(path: Union[str, Path]) -> ChannelTensor:
    """
    Load an MMCH trace file.

    Raises:
        FileNotFoundError: If ``path`` does not exist
        TraceFormatError: Bad magic, version, or short header
        TraceTruncatedError: Payload size disagrees with the header
        NonFiniteChannelError: NaN/Inf coefficients
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Trace file not found: {path}")

    raw = path.read_bytes()
    if len(raw) < TRACE_HEADER.size:
        raise TraceFormatError(
            f"{path}: file has {len(raw)} bytes, header needs {TRACE_HEADER.size}"
        )
    magic, version, m, n, b, t, _ = TRACE_HEADER.unpack_from(raw)
    if magic != TRACE_MAGIC:
        raise TraceFormatError(f"{path}: bad magic {magic!r}, expected {TRACE_MAGIC!r}")
    if version != TRACE_VERSION:
        raise TraceFormatError(f"{path}: unsupported trace version {version}")
    if min(m, n, b, t) < 1:
        raise TraceFormatError(f"{path}: zero dimension in header (M={m}, N={n}, B={b}, T={t})")

    expected = b * t * m * n * 8
    payload = raw[TRACE_HEADER.size:]
    if len(payload) != expected:
        raise TraceTruncatedError(
            f"{path}: payload has {len(payload)} bytes, header (M={m}, N={n}, "
            f"B={b}, T={t}) requires {expected}"
        )
    data = np.frombuffer(payload, dtype="<c8").reshape(b, t, m, n)
    if not np.all(np.isfinite(data)):
        raise NonFiniteChannelError(f"{path}: trace contains NaN or Inf values")
    return ChannelTensor(data)


def trace_size(num_antennas: int, num_users: int, num_rbs: int, num_ttis: int) -> int:
    """File size in bytes of a trace with these dimensions."""
    return TRACE_HEADER.size + num_antennas * num_users * num_rbs * num_ttis * 8


def channel_gain(channel: ChannelTensor, b: int, t: int, k: int) -> float:
    """||h_k^{b,t}||^2."""
    h = channel.vector(b, t, k)
    return float(np.sum(h.real**2 + h.imag**2))


def vector_correlation(h_i: np.ndarray, h_j: np.ndarray) -> float:
    """|h_i^H h_j| / (||h_i|| ||h_j||)."""
    norm = np.linalg.norm(h_i) * np.linalg.norm(h_j)
    if norm == 0.0:
        raise UndefinedCorrelationError("Correlation undefined for a zero channel vector")
    return float(min(1.0, abs(np.vdot(h_i, h_j)) / norm))


def inter_user_correlation(channel: ChannelTensor, b: int, t: int, i: int, j: int) -> float:
    """
    Normalized absolute inner product between users ``i`` and ``j`` on (b, t).

    Raises:
        IndexError: For out-of-range indices
        UndefinedCorrelationError: If either user has zero gain
    """
    return vector_correlation(channel.vector(b, t, i), channel.vector(b, t, j))


def correlation_matrix(h: np.ndarray) -> np.ndarray:
    """
    Pairwise correlations between the columns of ``h``.

    Accepts an (M, N) matrix or a stack (..., M, N); returns (..., N, N).
    """
    gram = np.matmul(np.conj(np.swapaxes(h, -1, -2)), h)
    norms = np.sqrt(np.real(np.diagonal(gram, axis1=-2, axis2=-1)))
    if np.any(norms == 0.0):
        raise UndefinedCorrelationError(
            "Correlation undefined: at least one user has a zero channel vector"
        )
    corr = np.abs(gram) / (norms[..., :, None] * norms[..., None, :])
    return np.minimum(corr, 1.0)
