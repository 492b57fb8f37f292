"""Counter-based random streams for reproducible multi-agent simulation.

Every stochastic draw in a run is attributed to a tuple
(master_seed, trial, agent, round, local_step).  Each tuple owns an
independent Philox stream whose 256-bit counter encodes the tuple, so
trajectories are identical no matter in which order agents or trials are
executed, serially or in parallel.
"""

from __future__ import annotations

import numpy as np

# purpose tags, packed into the high bits of the local-step word so that
# gradient draws and state-initialization draws never share a stream
_PURPOSE_GRADIENT = 0
_PURPOSE_INIT = 1

_KEY_SALT = 0x9E3779B97F4A7C15  # fixed second key word


def _counter(agent: int, rnd: int, step: int, purpose: int) -> np.ndarray:
    # counter[0] is the free-running word consumed by the generator itself;
    # the identifying words live above it so streams can never collide.
    # uint64 arrays avoid the silent float64 round trip numpy applies to
    # plain int lists with values above 2**63.
    return np.array([0, step | (purpose << 48), agent | (rnd << 32), 0],
                    dtype=np.uint64)


def _key(master_seed: int, trial: int) -> np.ndarray:
    return np.array([master_seed & 0xFFFFFFFFFFFFFFFF,
                     (trial ^ _KEY_SALT) & 0xFFFFFFFFFFFFFFFF],
                    dtype=np.uint64)


def fresh_stream(master_seed: int, trial: int, agent: int, rnd: int, step: int,
                 purpose: int = _PURPOSE_GRADIENT) -> np.random.Generator:
    """Construct a new, independent generator for one draw site."""
    bg = np.random.Philox(counter=_counter(agent, rnd, step, purpose),
                          key=_key(master_seed, trial))
    return np.random.Generator(bg)


class TrialStreams:
    """All random streams of one (master_seed, trial) pair.

    ``gradient`` and ``init_state`` return a *borrowed* generator that is
    only valid until the next call on the same ``TrialStreams``.  The
    borrowed generator produces exactly the same draws as
    ``fresh_stream`` with the same coordinates; reusing one underlying
    Philox object merely avoids per-call construction cost.
    """

    def __init__(self, master_seed: int, trial: int):
        self.master_seed = int(master_seed)
        self.trial = int(trial)
        self._bg = np.random.Philox(counter=np.zeros(4, dtype=np.uint64),
                                    key=_key(self.master_seed, self.trial))
        self._gen = np.random.Generator(self._bg)
        self._state = self._bg.state

    def _reseat(self, agent: int, rnd: int, step: int, purpose: int) -> np.random.Generator:
        st = self._state
        st["state"]["counter"][:] = _counter(agent, rnd, step, purpose)
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bg.state = st
        return self._gen

    def gradient(self, agent: int, rnd: int, step: int) -> np.random.Generator:
        """Stream feeding the stochastic-gradient draw of one local step."""
        return self._reseat(agent, rnd, step, _PURPOSE_GRADIENT)

    def init_state(self, agent: int) -> np.random.Generator:
        """Stream feeding the optional random initialization of one agent."""
        return self._reseat(agent, 0, 0, _PURPOSE_INIT)


def gradient_rng_factory(streams: TrialStreams | None, rnd: int, step: int):
    """Per-agent generator lookup for one (round, local step) draw site;
    yields None everywhere when no streams are supplied (deterministic mode)."""
    if streams is None:
        return lambda i: None
    return lambda i: streams.gradient(i, rnd, step)
