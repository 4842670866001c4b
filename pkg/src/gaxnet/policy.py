"""Per-agent actor networks with attention-weight message exchange.

Each agent encodes its own observation and one feature row per
neighbor, scores the neighbors with scaled-dot attention, and feeds a
tiny per-pair recurrent cell with (own attention weight toward the
neighbor, the value received from that neighbor last slot). The cell's
squashed readout is the message broadcast this slot. The utility head
consumes the own encoding, the outgoing messages, and the
attention-weighted neighbor value rows, runs them through a recurrent
layer that carries the agent's history, and emits one Q-value per
action.

Agents never share parameters. For speed the team's layers are stored
stacked along a leading agent axis and training steps the whole team
with batched matmuls; each agent's slice is still an independent set of
weights. Decentralized execution goes through Actor, a per-agent view
over one slice: its act() reads nothing but the agent's own
observation, its own parameters, and its message inbox.

Modes:
  - baseline: utility head fed the own encoding alone (no attention,
    no messages), the conventional mixer-based learner
  - exchange=False: full architecture, but inboxes stay zero
  - exchange_raw: broadcast raw attention weights instead of the
    recurrent readout
  - attention_softmax=False: skip score normalization (ablation)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import nn
from .env import Observation

__all__ = [
    "PolicyConfig",
    "Actor",
    "ActorTeam",
    "ActorHidden",
    "TeamState",
    "neighbor_ids",
    "route_messages",
]

_GRU_KEYS = ("wz", "uz", "bz", "wr", "ur", "br", "wc", "uc", "bc")


@dataclass(frozen=True)
class PolicyConfig:
    n_agents: int = 4
    n_actions: int = 8
    obs_len: int = 22
    row_len: int = 9
    feature_dim: int = 64     # own/neighbor encoding width
    attn_dim: int = 32        # query/key/value width
    baseline: bool = False
    exchange: bool = True
    exchange_raw: bool = False
    attention_softmax: bool = True

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError("need at least two agents")
        if min(self.n_actions, self.obs_len, self.row_len,
               self.feature_dim, self.attn_dim) < 1:
            raise ValueError("all widths must be positive")

    @property
    def n_neighbors(self) -> int:
        return self.n_agents - 1

    @property
    def utility_input_len(self) -> int:
        if self.baseline:
            return self.feature_dim
        return self.feature_dim + self.n_neighbors * (1 + self.attn_dim)


@dataclass
class ActorHidden:
    """Recurrent state one agent carries across slots (execution side)."""

    head: nn.Tensor       # (1, feature_dim)
    pair: nn.Tensor       # (n_neighbors, 1)


@dataclass
class TeamState:
    """Recurrent team state between slots (training side, batched).

    head: (A, B, feature_dim); pair: (A, B*n_neighbors, 1);
    inbox: (A, B, n_neighbors) messages produced last slot, already
    routed to their receivers.
    """

    head: nn.Tensor
    pair: nn.Tensor
    inbox: nn.Tensor


def neighbor_ids(n_agents: int, agent: int) -> tuple[int, ...]:
    return tuple(m for m in range(n_agents) if m != agent)


def route_messages(outgoing: np.ndarray, e_flags: np.ndarray) -> np.ndarray:
    """Numpy message routing used at execution time.

    outgoing[n, j] is agent n's message to its j-th neighbor; the
    result holds each agent's inbox in the same indexing, zeroed where
    the receiver's visibility flag is 0.
    """
    n_agents = outgoing.shape[0]
    inbox = np.zeros_like(outgoing)
    for n in range(n_agents):
        for j, m in enumerate(neighbor_ids(n_agents, n)):
            back = neighbor_ids(n_agents, m).index(n)
            inbox[n, j] = outgoing[m, back] * e_flags[n, j]
    return inbox


def _route_index(n_agents: int) -> np.ndarray:
    """Flat permutation: receiver slot (n, j) reads sender slot (m, k)."""
    k_n = n_agents - 1
    idx = np.empty(n_agents * k_n, dtype=np.intp)
    for n in range(n_agents):
        for j, m in enumerate(neighbor_ids(n_agents, n)):
            back = neighbor_ids(n_agents, m).index(n)
            idx[n * k_n + j] = m * k_n + back
    return idx


class Actor:
    """Read-only per-agent view used for decentralized execution."""

    def __init__(self, cfg: PolicyConfig, params: Mapping[str, nn.Tensor]):
        self.cfg = cfg
        self.params = params

    def _gru(self, prefix: str) -> dict[str, nn.Tensor]:
        return {k: self.params[f"{prefix}.{k}"] for k in _GRU_KEYS}

    # -- building blocks -------------------------------------------------

    def encode(self, x_obs: nn.Tensor, rows: nn.Tensor
               ) -> tuple[nn.Tensor, nn.Tensor]:
        """(B, obs_len), (B, K, row_len) -> own (B, F), neighbors (B, K, F)."""
        cfg = self.cfg
        p = self.params
        h_own = nn.affine(x_obs, p["enc_own.w"], p["enc_own.b"])
        batch = x_obs.data.shape[0]
        flat = nn.reshape(rows, (batch * cfg.n_neighbors, cfg.row_len))
        h_oth = nn.affine(flat, p["enc_oth.w"], p["enc_oth.b"])
        return h_own, nn.reshape(h_oth, (batch, cfg.n_neighbors, cfg.feature_dim))

    def attention_graph(self, h_own: nn.Tensor, h_oth: nn.Tensor
                        ) -> tuple[nn.Tensor, nn.Tensor]:
        """Edge weights (B, K) and weighted value rows (B, K, attn_dim)."""
        cfg = self.cfg
        p = self.params
        batch, k, f = h_oth.data.shape
        flat = nn.reshape(h_oth, (batch * k, f))
        q = nn.affine(h_own, p["attn_q.w"], p["attn_q.b"])
        keys = nn.reshape(nn.affine(flat, p["attn_k.w"], p["attn_k.b"]),
                          (batch, k, cfg.attn_dim))
        values = nn.reshape(nn.affine(flat, p["attn_v.w"], p["attn_v.b"]),
                            (batch, k, cfg.attn_dim))
        scores = nn.row_dot(q, keys, scale=math.sqrt(cfg.attn_dim))
        weights = nn.softmax(scores) if cfg.attention_softmax else scores
        return weights, nn.scale_rows(values, weights)

    def sr_encode(self, w_now: nn.Tensor, sr_in: nn.Tensor,
                  pair_hidden: nn.Tensor) -> tuple[nn.Tensor, nn.Tensor]:
        """One message-cell step over all of this agent's pairs.

        w_now, sr_in: (B, K); pair_hidden: (B*K, 1). Returns squashed
        outgoing messages (B, K) and the new hidden.
        """
        cfg = self.cfg
        batch = w_now.data.shape[0]
        flat_w = nn.reshape(w_now, (batch * cfg.n_neighbors, 1))
        flat_in = nn.reshape(sr_in, (batch * cfg.n_neighbors, 1))
        x = nn.concat([flat_w, flat_in])
        hidden = nn.gru_cell(x, pair_hidden, self._gru("pair_cell"))
        out = nn.sigmoid(nn.affine(hidden, self.params["pair_out.w"],
                                   self.params["pair_out.b"]))
        return nn.reshape(out, (batch, cfg.n_neighbors)), hidden

    def utility(self, h_own: nn.Tensor, outgoing: nn.Tensor | None,
                mixed_rows: nn.Tensor | None, head_hidden: nn.Tensor
                ) -> tuple[nn.Tensor, nn.Tensor]:
        """Q-values (B, n_actions) and the new head hidden state."""
        cfg = self.cfg
        p = self.params
        if cfg.baseline:
            joined = h_own
        else:
            batch = h_own.data.shape[0]
            flat_rows = nn.reshape(mixed_rows,
                                   (batch, cfg.n_neighbors * cfg.attn_dim))
            joined = nn.concat([h_own, outgoing, flat_rows])
        u = nn.tanh(nn.affine(joined, p["util_in.w"], p["util_in.b"]))
        head = nn.gru_cell(u, head_hidden, self._gru("util_cell"))
        q = nn.affine(head, p["util_out.w"], p["util_out.b"])
        return q, head

    def step(self, x_obs: nn.Tensor, rows: nn.Tensor | None,
             inbox: nn.Tensor | None, head_hidden: nn.Tensor,
             pair_hidden: nn.Tensor | None,
             e_flags: np.ndarray | None = None
             ) -> tuple[nn.Tensor, nn.Tensor | None, nn.Tensor | None,
                        nn.Tensor, nn.Tensor | None]:
        """Full per-agent slot: returns (q, weights, outgoing, head', pair')."""
        cfg = self.cfg
        if cfg.baseline:
            h_own = nn.affine(x_obs, self.params["enc_own.w"],
                              self.params["enc_own.b"])
            q, head = self.utility(h_own, None, None, head_hidden)
            return q, None, None, head, pair_hidden
        h_own, h_oth = self.encode(x_obs, rows)
        weights, mixed_rows = self.attention_graph(h_own, h_oth)
        sr_in = inbox
        if e_flags is not None and not np.all(e_flags == 1.0):
            # unobservable neighbors contribute a zero in place of
            # their last message
            sr_in = nn.mul(inbox, nn.tensor(e_flags))
        outgoing, pair = self.sr_encode(weights, sr_in, pair_hidden)
        q, head = self.utility(h_own, outgoing, mixed_rows, head_hidden)
        return q, weights, outgoing, head, pair

    # -- decentralized execution -----------------------------------------

    def act(self, obs: Observation, inbox: np.ndarray, hidden: ActorHidden,
            epsilon: float, rng: np.random.Generator
            ) -> tuple[int, np.ndarray, ActorHidden]:
        """Epsilon-greedy action plus this slot's outgoing messages.

        `inbox` holds the values received from each neighbor last slot
        (zeros at episode start). Ties in the greedy branch resolve to
        the lowest action index.
        """
        cfg = self.cfg
        with nn.no_grad():
            x = nn.tensor(obs.vector()[None, :])
            rows = None if cfg.baseline else nn.tensor(obs.other_rows()[None])
            box = None if cfg.baseline else nn.tensor(
                np.asarray(inbox, dtype=float)[None, :])
            e = None if cfg.baseline else obs.other_blocks[None, :, 3]
            q, weights, outgoing, head, pair = self.step(
                x, rows, box, hidden.head, hidden.pair, e_flags=e)
        if rng.uniform() < epsilon:
            action = int(rng.integers(cfg.n_actions))
        else:
            action = int(np.argmax(q.data[0]))
        if cfg.baseline:
            sent = np.zeros(cfg.n_neighbors)
        elif cfg.exchange_raw:
            sent = weights.data[0].copy()
        else:
            sent = outgoing.data[0].copy()
        new_hidden = ActorHidden(head=head,
                                 pair=hidden.pair if cfg.baseline else pair)
        return action, sent, new_hidden

    def init_hidden(self) -> ActorHidden:
        cfg = self.cfg
        return ActorHidden(
            head=nn.tensor(np.zeros((1, cfg.feature_dim))),
            pair=nn.tensor(np.zeros((cfg.n_neighbors, 1))),
        )


class ActorTeam:
    """All agents' parameters (stacked) plus the slot-boundary wiring."""

    def __init__(self, cfg: PolicyConfig, rng: np.random.Generator):
        self.cfg = cfg
        a = cfg.n_agents
        f, v = cfg.feature_dim, cfg.attn_dim
        store = nn.ParamStore()

        def lin(prefix, n_in, n_out):
            store.add(f"{prefix}.w", (a, n_in, n_out), rng, fan_in=n_in)
            store.add(f"{prefix}.b", (a, n_out), rng, fan_in=n_in)

        def gru(prefix, n_in, n_h):
            for gate in ("z", "r", "c"):
                store.add(f"{prefix}.w{gate}", (a, n_in, n_h), rng, fan_in=n_in)
                store.add(f"{prefix}.u{gate}", (a, n_h, n_h), rng, fan_in=n_h)
                store.add(f"{prefix}.b{gate}", (a, n_h,), rng, fan_in=n_in + n_h)

        lin("enc_own", cfg.obs_len, f)
        if not cfg.baseline:
            lin("enc_oth", cfg.row_len, f)
            lin("attn_q", f, v)
            lin("attn_k", f, v)
            lin("attn_v", f, v)
            gru("pair_cell", 2, 1)
            lin("pair_out", 1, 1)
        lin("util_in", cfg.utility_input_len, f)
        gru("util_cell", f, f)
        lin("util_out", f, cfg.n_actions)
        self.store = store
        self._route = _route_index(a)

    def _gru(self, prefix: str) -> dict[str, nn.Tensor]:
        return {k: self.store[f"{prefix}.{k}"] for k in _GRU_KEYS}

    def actor(self, agent: int) -> Actor:
        """Per-agent view; slices share storage with the stacked params."""
        views = {
            name: nn.Tensor(p.data[agent])
            for name, p in self.store.items()
        }
        return Actor(self.cfg, views)

    def init_state(self, batch: int) -> TeamState:
        cfg = self.cfg
        a, k = cfg.n_agents, cfg.n_neighbors
        return TeamState(
            head=nn.tensor(np.zeros((a, batch, cfg.feature_dim))),
            pair=nn.tensor(np.zeros((a, batch * k, 1))),
            inbox=nn.tensor(np.zeros((a, batch, k))),
        )

    def step(self, obs: np.ndarray, rows: np.ndarray | None,
             e_flags: np.ndarray | None, state: TeamState
             ) -> tuple[nn.Tensor, nn.Tensor | None, nn.Tensor | None, TeamState]:
        """One slot for the whole team, then route messages.

        obs: (A, B, obs_len); rows: (A, B, K, row_len); e_flags:
        (A, B, K) or None for full visibility. Returns (q values
        (A, B, n_actions), attention weights (A, B, K), outgoing
        messages (A, B, K), next state).
        """
        cfg = self.cfg
        p = self.store
        a, b = obs.shape[0], obs.shape[1]
        k, f, v = cfg.n_neighbors, cfg.feature_dim, cfg.attn_dim
        x = nn.tensor(obs)
        h_own = nn.affine_stack(x, p["enc_own.w"], p["enc_own.b"])

        if cfg.baseline:
            u = nn.tanh(nn.affine_stack(h_own, p["util_in.w"], p["util_in.b"]))
            head = nn.gru_cell_stack(u, state.head, self._gru("util_cell"))
            q = nn.affine_stack(head, p["util_out.w"], p["util_out.b"])
            inbox = nn.tensor(np.zeros((a, b, k)))
            return q, None, None, TeamState(head, state.pair, inbox)

        flat_rows = nn.reshape(nn.tensor(rows), (a, b * k, cfg.row_len))
        h_oth = nn.affine_stack(flat_rows, p["enc_oth.w"], p["enc_oth.b"])
        q_vec = nn.affine_stack(h_own, p["attn_q.w"], p["attn_q.b"])
        keys = nn.affine_stack(h_oth, p["attn_k.w"], p["attn_k.b"])
        values = nn.affine_stack(h_oth, p["attn_v.w"], p["attn_v.b"])

        # merge the agent and batch axes for the parameter-free ops
        scores = nn.row_dot(nn.reshape(q_vec, (a * b, v)),
                            nn.reshape(keys, (a * b, k, v)),
                            scale=math.sqrt(v))
        flat_w = nn.softmax(scores) if cfg.attention_softmax else scores
        mixed = nn.scale_rows(nn.reshape(values, (a * b, k, v)), flat_w)
        weights = nn.reshape(flat_w, (a, b, k))

        inbox = state.inbox
        if e_flags is not None and not np.all(e_flags == 1.0):
            inbox = nn.mul(inbox, nn.tensor(e_flags))
        pair_x = nn.concat([nn.reshape(weights, (a, b * k, 1)),
                            nn.reshape(inbox, (a, b * k, 1))])
        pair = nn.gru_cell_stack(pair_x, state.pair, self._gru("pair_cell"))
        sends = nn.reshape(
            nn.sigmoid(nn.affine_stack(pair, p["pair_out.w"], p["pair_out.b"])),
            (a, b, k))

        joined = nn.concat([h_own, sends, nn.reshape(mixed, (a, b, k * v))])
        u = nn.tanh(nn.affine_stack(joined, p["util_in.w"], p["util_in.b"]))
        head = nn.gru_cell_stack(u, state.head, self._gru("util_cell"))
        q = nn.affine_stack(head, p["util_out.w"], p["util_out.b"])

        if not cfg.exchange:
            next_inbox = nn.tensor(np.zeros((a, b, k)))
        else:
            payload = weights if cfg.exchange_raw else sends
            flat = nn.reshape(nn.transpose_01(payload), (b, a * k))
            routed = nn.gather_columns(flat, self._route)
            next_inbox = nn.transpose_01(nn.reshape(routed, (b, a, k)))
        return q, weights, sends, TeamState(head, pair, next_inbox)

    # -- parameter plumbing ----------------------------------------------

    def n_scalars(self) -> int:
        return self.store.n_scalars()

    def state_dict(self) -> dict:
        return self.store.state_dict()

    def load_state_dict(self, state: dict) -> None:
        self.store.load_state_dict(state)

    def clone(self) -> "ActorTeam":
        twin = ActorTeam(self.cfg, np.random.default_rng(0))
        twin.store.copy_from(self.store)
        return twin
