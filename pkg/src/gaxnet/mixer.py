"""Monotonic value mixing for centralized training.

A hypernetwork conditioned on the global state produces the weights of
a two-layer mixing net; taking absolute values of those weights makes
the mixed team value monotone nondecreasing in every agent's utility,
so per-agent greedy action selection stays consistent with the joint
greedy choice. Training-only: execution code never imports this
module.
"""

from __future__ import annotations

import numpy as np

from . import nn

__all__ = ["MixingNetwork", "monotonicity_probe"]


class MixingNetwork:
    """Maps per-agent chosen-action utilities plus the state to one value."""

    def __init__(self, n_agents: int, state_len: int,
                 rng: np.random.Generator, mixing_dim: int = 32):
        if n_agents < 1 or state_len < 1 or mixing_dim < 1:
            raise ValueError("all sizes must be positive")
        self.n_agents = n_agents
        self.state_len = state_len
        self.mixing_dim = mixing_dim
        store = nn.ParamStore()
        store.add("w1.w", (state_len, n_agents * mixing_dim), rng)
        store.add("w1.b", (n_agents * mixing_dim,), rng, fan_in=state_len)
        store.add("b1.w", (state_len, mixing_dim), rng)
        store.add("b1.b", (mixing_dim,), rng, fan_in=state_len)
        store.add("w2.w", (state_len, mixing_dim), rng)
        store.add("w2.b", (mixing_dim,), rng, fan_in=state_len)
        store.add("b2_in.w", (state_len, mixing_dim), rng)
        store.add("b2_in.b", (mixing_dim,), rng, fan_in=state_len)
        store.add("b2_out.w", (mixing_dim, 1), rng)
        store.add("b2_out.b", (1,), rng, fan_in=mixing_dim)
        self.store = store

    def mix(self, utilities: nn.Tensor, state: np.ndarray) -> nn.Tensor:
        """utilities:(B, n_agents), state:(B, state_len) -> values (B,)."""
        if utilities.data.ndim != 2 or utilities.data.shape[1] != self.n_agents:
            raise nn.ShapeError(
                f"utilities must be (B, {self.n_agents}), "
                f"got {utilities.data.shape}")
        s = np.asarray(state, dtype=np.float64)
        if s.ndim != 2 or s.shape != (utilities.data.shape[0], self.state_len):
            raise nn.ShapeError(
                f"state must be ({utilities.data.shape[0]}, "
                f"{self.state_len}), got {s.shape}")
        batch = s.shape[0]
        p = self.store
        st = nn.tensor(s)
        w1 = nn.reshape(nn.absolute(nn.affine(st, p["w1.w"], p["w1.b"])),
                        (batch, self.n_agents, self.mixing_dim))
        b1 = nn.affine(st, p["b1.w"], p["b1.b"])
        hidden = nn.elu(nn.add(nn.weighted_sum(utilities, w1), b1))
        w2 = nn.absolute(nn.affine(st, p["w2.w"], p["w2.b"]))
        b2 = nn.affine(nn.elu(nn.affine(st, p["b2_in.w"], p["b2_in.b"])),
                       p["b2_out.w"], p["b2_out.b"])
        return nn.add(nn.dot_rows(hidden, w2), nn.reshape(b2, (batch,)))

    # -- parameter plumbing ------------------------------------------------

    def state_dict(self) -> dict:
        return self.store.state_dict()

    def load_state_dict(self, state: dict) -> None:
        self.store.load_state_dict(state)

    def clone(self) -> "MixingNetwork":
        twin = MixingNetwork(self.n_agents, self.state_len,
                             np.random.default_rng(0), self.mixing_dim)
        twin.store.copy_from(self.store)
        return twin


def monotonicity_probe(mixer: MixingNetwork, rng: np.random.Generator,
                       trials: int = 100, bump: float = 1e-3) -> int:
    """Count violations of the nondecreasing-in-each-utility guarantee.

    Each trial draws a random state and utility vector, bumps one
    utility coordinate up by `bump`, and checks the mixed value did not
    drop. Returns the number of (trial, coordinate) violations; a
    correct mixer returns 0.
    """
    violations = 0
    with nn.no_grad():
        for _ in range(trials):
            state = rng.normal(size=(1, mixer.state_len))
            u = rng.normal(size=(1, mixer.n_agents))
            base = mixer.mix(nn.tensor(u), state).data[0]
            for n in range(mixer.n_agents):
                bumped = u.copy()
                bumped[0, n] += bump
                if mixer.mix(nn.tensor(bumped), state).data[0] < base:
                    violations += 1
    return violations
