"""
User grouping: threshold the inter-user correlation matrix into a graph and
color it so that every color class holds mutually low-correlated users.
"""

import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Hashable, Optional, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd

from utils.channel import ChannelTensor, correlation_matrix

DEFAULT_THRESHOLD = 0.5


class GroupingScope(str, Enum):
    PER_RB = "per-rb"
    PER_TTI = "per-tti"
    ONCE = "once"


@dataclass(frozen=True)
class CorrelationGraph:
    adjacency: np.ndarray
    threshold: float

    @property
    def num_users(self) -> int:
        return self.adjacency.shape[0]

    @property
    def max_degree(self) -> int:
        if self.num_users == 0:
            return 0
        return int(self.adjacency.sum(axis=1).max())

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.num_users))
        rows, cols = np.nonzero(np.triu(self.adjacency, k=1))
        graph.add_edges_from(zip(rows.tolist(), cols.tolist()))
        return graph


@dataclass(frozen=True)
class UserGrouping:
    """
    Disjoint low-correlation user groups.

    ``valid_from``/``valid_until`` bound the TTIs the grouping was issued for;
    ``rb`` is None when it applies to every RB.
    """

    groups: Tuple[Tuple[int, ...], ...]
    group_of: np.ndarray
    valid_from: int = 0
    valid_until: Optional[int] = None
    rb: Optional[int] = None

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    def members(self, g: int) -> Tuple[int, ...]:
        return self.groups[g]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"user_id": np.arange(len(self.group_of)), "group_id": self.group_of}
        )


def graph_from_correlation(corr: np.ndarray, c_th: float = DEFAULT_THRESHOLD) -> CorrelationGraph:
    """Edge iff correlation is strictly above ``c_th``; no self loops."""
    if not 0.0 < c_th < 1.0:
        raise ValueError(f"Correlation threshold must lie in (0, 1), got {c_th}")
    adj = np.asarray(corr) > c_th
    adj = adj | adj.T
    np.fill_diagonal(adj, False)
    adj.setflags(write=False)
    return CorrelationGraph(adj, c_th)


def build_correlation_graph(
    channel: ChannelTensor, b: int, t: int, c_th: float = DEFAULT_THRESHOLD
) -> CorrelationGraph:
    """
    Correlation graph of all users on (b, t).

    Raises:
        UndefinedCorrelationError: If a user has a zero channel vector
    """
    return graph_from_correlation(correlation_matrix(channel.matrix(b, t)), c_th)


def build_mean_correlation_graph(
    channel: ChannelTensor, t: int, c_th: float = DEFAULT_THRESHOLD
) -> CorrelationGraph:
    """Correlation graph from correlations averaged over every RB of TTI ``t``."""
    corr = correlation_matrix(channel.at(t)).mean(axis=0)
    return graph_from_correlation(corr, c_th)


def color_graph(graph: CorrelationGraph) -> UserGrouping:
    """
    Greedy largest-degree-first coloring.

    Ties in degree keep ascending user order, so the result depends only on
    the graph.
    """
    n = graph.num_users
    colors = nx.greedy_color(graph.to_networkx(), strategy="largest_first")
    group_of = np.array([colors[k] for k in range(n)], dtype=int)
    num_groups = int(group_of.max()) + 1 if n else 0
    groups = tuple(
        tuple(int(k) for k in np.flatnonzero(group_of == g)) for g in range(num_groups)
    )
    group_of.setflags(write=False)
    return UserGrouping(groups, group_of)


class GroupingProvider:
    """
    Caches groupings and refreshes them every ``update_period`` TTIs.

    Reads are lock-free; refreshes are serialized so concurrent RB fills
    never compute the same grouping twice.
    """

    def __init__(
        self,
        update_period: int = 1,
        scope: Union[GroupingScope, str] = GroupingScope.PER_TTI,
        threshold: float = DEFAULT_THRESHOLD,
    ):
        if update_period < 1:
            raise ValueError(f"update_period must be >= 1, got {update_period}")
        self.update_period = int(update_period)
        self.scope = GroupingScope(scope)
        self.threshold = threshold
        self.refresh_count = 0
        self._cache: Dict[Hashable, UserGrouping] = {}
        self._lock = threading.Lock()

    def _key(self, b: int, t: int) -> Hashable:
        if self.scope is GroupingScope.ONCE:
            return "once"
        epoch = t // self.update_period
        if self.scope is GroupingScope.PER_RB:
            return (b, epoch)
        return epoch

    def _compute(self, channel: ChannelTensor, b: int, t: int) -> UserGrouping:
        if self.scope is GroupingScope.PER_RB:
            graph = build_correlation_graph(channel, b, t, self.threshold)
            rb = b
        else:
            graph = build_mean_correlation_graph(channel, t, self.threshold)
            rb = None
        colored = color_graph(graph)
        until = None
        if self.scope is not GroupingScope.ONCE:
            start = (t // self.update_period) * self.update_period
            until = start + self.update_period
        else:
            start = t
        return UserGrouping(colored.groups, colored.group_of, start, until, rb)

    def get(self, channel: ChannelTensor, b: int, t: int) -> UserGrouping:
        key = self._key(b, t)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        with self._lock:
            cached = self._cache.get(key)
            if cached is None:
                cached = self._compute(channel, b, t)
                if self.scope is GroupingScope.PER_TTI:
                    self._cache.clear()
                elif self.scope is GroupingScope.PER_RB:
                    epoch = key[1]
                    for stale in [k for k in self._cache if k[1] != epoch]:
                        del self._cache[stale]
                self._cache[key] = cached
                self.refresh_count += 1
        return cached

    def prefetch(self, channel: ChannelTensor, t: int) -> None:
        """Warm the cache for TTI ``t`` when one grouping covers all RBs."""
        if self.scope is not GroupingScope.PER_RB:
            self.get(channel, 0, t)


def grouping_schedule(
    update_period: int = 1,
    scope: Union[GroupingScope, str] = GroupingScope.PER_TTI,
    threshold: float = DEFAULT_THRESHOLD,
) -> GroupingProvider:
    """Build a cached grouping provider."""
    return GroupingProvider(update_period, scope, threshold)


def export_grouping_csv(grouping: UserGrouping, path: Union[str, Path]) -> Path:
    path = Path(path)
    grouping.to_frame().to_csv(path, index=False)
    return path
