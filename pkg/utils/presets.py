"""
Network, scenario and SLA presets.

Preset names read ``<network>-<scenario>-<sla>``, e.g. ``small-hc-loose`` or
``real-world-lc-tight``.
"""

from typing import Dict, List, Tuple

NETWORKS: Dict[str, Dict] = {
    "small": {
        "num_antennas": 64,
        "num_rbs": 52,
        "num_users": 16,
        "slice_sizes": [4, 4, 4, 4],
        "k_max": 8,
        "users_per_cluster": [4, 4, 4, 4],
        "los_flags": [True, True, True, True],
    },
    "medium": {
        "num_antennas": 64,
        "num_rbs": 52,
        "num_users": 80,
        "slice_sizes": [10] * 8,
        "k_max": 16,
        "users_per_cluster": [20, 20, 20, 20],
        "los_flags": [True, True, True, True],
    },
    "real-world": {
        "num_antennas": 64,
        "num_rbs": 52,
        "num_users": 200,
        "slice_sizes": [10, 12, 18, 20, 25, 33, 45, 37],
        "k_max": 16,
        "users_per_cluster": [10, 12, 18, 20, 25, 33, 45, 37],
        "los_flags": [True, True, True, True, False, False, False, False],
    },
}

# Mbps per slice, keyed by (number of slices, SLA level)
SLA_PRESETS: Dict[Tuple[int, str], List[float]] = {
    (4, "loose"): [51.9, 46.2, 50.0, 53.8],
    (4, "tight"): [90.4, 84.6, 88.5, 92.3],
    (8, "loose"): [16.7, 46.4, 42.3, 51.7, 19.2, 50.5, 48.1, 53.6],
    (8, "tight"): [55.8, 84.2, 80.8, 91.2, 57.7, 88.3, 86.5, 92.4],
}

# membership: "spread" deals users round-robin over slices so a slice spans
# clusters; "blocks" keeps a slice inside as few clusters as possible.
SCENARIOS: Dict[str, Dict] = {
    "LC": {"membership": "spread", "mobility": "static", "innovation": 0.0, "hop_probability": 0.0},
    "HC": {"membership": "blocks", "mobility": "static", "innovation": 0.0, "hop_probability": 0.0},
    "SM": {"membership": "blocks", "mobility": "slow", "innovation": 0.05, "hop_probability": 0.0},
    "FM": {"membership": "blocks", "mobility": "fast", "innovation": 0.0, "hop_probability": 0.3},
}

SLA_LEVELS = ("loose", "tight")


def parse_preset(name: str) -> Tuple[str, str, str]:
    """
    Split a preset name into (network, scenario, sla).

    Raises:
        ValueError: If any part is unknown
    """
    parts = name.strip().lower().rsplit("-", 2)
    if len(parts) != 3:
        raise ValueError(
            f"Preset '{name}' should look like <network>-<scenario>-<sla>, "
            "e.g. small-hc-loose"
        )
    network, scenario, sla = parts[0], parts[1].upper(), parts[2]
    if network not in NETWORKS:
        raise ValueError(f"Unknown network '{network}' in preset; use one of {list(NETWORKS)}")
    if scenario not in SCENARIOS:
        raise ValueError(f"Unknown scenario '{scenario}' in preset; use one of {list(SCENARIOS)}")
    if sla not in SLA_LEVELS:
        raise ValueError(f"Unknown SLA level '{sla}' in preset; use loose or tight")
    return network, scenario, sla


def preset_names() -> List[str]:
    return [
        f"{net}-{scen.lower()}-{sla}"
        for net in NETWORKS
        for scen in SCENARIOS
        for sla in SLA_LEVELS
    ]


def sla_for(num_slices: int, level: str) -> List[float]:
    """
    Raises:
        KeyError: If no table exists for this slice count
    """
    return list(SLA_PRESETS[(num_slices, level)])


def slice_membership(slice_sizes: List[int], membership: str) -> List[List[int]]:
    """
    User indices of every slice.

    ``blocks`` gives contiguous index ranges; ``spread`` deals users
    round-robin over the slices that still have room.
    """
    if membership == "blocks":
        out, start = [], 0
        for size in slice_sizes:
            out.append(list(range(start, start + size)))
            start += size
        return out
    if membership == "spread":
        out = [[] for _ in slice_sizes]
        user, s = 0, 0
        total = sum(slice_sizes)
        while user < total:
            if len(out[s]) < slice_sizes[s]:
                out[s].append(user)
                user += 1
            s = (s + 1) % len(slice_sizes)
        return out
    raise ValueError(f"Unknown membership '{membership}'; use blocks or spread")
