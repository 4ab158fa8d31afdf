"""Counter-based seed derivation.

Every stream is a child of ``SeedSequence(seed, spawn_key=(purpose, *counters))``,
so trajectory ``i`` or step ``k`` always receives the same stream whatever
the number of workers or the evaluation order.
"""
import numpy as np

from core.errors import ConfigurationError

# Purpose tags keep streams for different jobs disjoint
TRAJECTORY = 0
INITIAL_STATE = 1
STEP_SCORE = 2
OBSERVATION = 3
SYSTEM = 4
ESTIMATOR = 5
PROCESS_NOISE = 6


def child_sequence(seed: int, purpose: int, *counters: int) -> np.random.SeedSequence:
    """Return the seed sequence for ``(seed, purpose, counters)``."""
    if seed < 0:
        raise ConfigurationError(f"seed must be non-negative, got {seed}")
    key = (int(purpose),) + tuple(int(c) for c in counters)
    return np.random.SeedSequence(entropy=int(seed), spawn_key=key)


def child_rng(seed: int, purpose: int, *counters: int) -> np.random.Generator:
    """Generator for a derived stream."""
    return np.random.default_rng(child_sequence(seed, purpose, *counters))


def child_seed(seed: int, purpose: int, *counters: int) -> int:
    """Derive a 64-bit integer seed, used as the recorded seed of a trajectory."""
    state = child_sequence(seed, purpose, *counters).generate_state(1, dtype=np.uint64)
    return int(state[0])


def trajectory_seed(seed: int, index: int) -> int:
    """Seed of trajectory ``index`` in an experiment seeded with ``seed``."""
    return child_seed(seed, TRAJECTORY, index)
