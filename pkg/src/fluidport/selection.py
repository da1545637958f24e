"""Port observation placement and selection policies.

Three policies rank ports by true SINR over different permitted sets:

    ideal      -- all N ports (upper bound; full channel knowledge),
    reference  -- only the observed set M,
    model      -- M plus the top-J ports indicated by a predictor, whose true
                  SINR is then looked up (J is the lookup budget).

Ties always break toward the lowest port index so runs are reproducible.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_int

__all__ = [
    "POLICY_KINDS",
    "PortSets",
    "Policy",
    "observed_indices",
    "select_port",
    "select_topk_mrc",
    "permitted_mask_batch",
    "top_k_indices",
]

POLICY_KINDS = ("ideal", "reference", "model_assisted")


def observed_indices(n_ports, m_observed):
    """Indices of ``m_observed`` ports spread uniformly over the aperture.

    index_i = round_half_up(i * (N - 1) / (m - 1)); both endpoints included.
    Collisions (impossible for m <= N, kept for safety) shift upward to the
    next free index.
    """
    n_ports = check_int("n_ports", n_ports, minimum=2)
    m_observed = check_int("m_observed", m_observed, minimum=2, maximum=n_ports)
    taken = set()
    out = []
    for i in range(m_observed):
        idx = math.floor(i * (n_ports - 1) / (m_observed - 1) + 0.5)
        while idx in taken:
            idx += 1
        taken.add(idx)
        out.append(idx)
    return out


@dataclass(frozen=True)
class PortSets:
    """Observed / unobserved split of the port index set, plus a selection."""

    observed: np.ndarray
    unobserved: np.ndarray
    selected: np.ndarray = None
    k: int = 1

    def __post_init__(self):
        observed = np.asarray(self.observed, dtype=int)
        unobserved = np.asarray(self.unobserved, dtype=int)
        n = observed.size + unobserved.size
        union = np.union1d(observed, unobserved)
        if union.size != n or union[0] != 0 or union[-1] != n - 1:
            raise ValueError("observed and unobserved must partition 0..N-1")
        object.__setattr__(self, "observed", np.sort(observed))
        object.__setattr__(self, "unobserved", np.sort(unobserved))

    @property
    def n_ports(self):
        return self.observed.size + self.unobserved.size

    @classmethod
    def uniform(cls, n_ports, m_observed):
        obs = np.asarray(observed_indices(n_ports, m_observed), dtype=int)
        unobs = np.setdiff1d(np.arange(n_ports), obs)
        return cls(observed=obs, unobserved=unobs)


@dataclass(frozen=True)
class Policy:
    """Selection policy: kind, lookup budget J, and combine count K.

    ``predictor`` maps observed SINR values to N per-port probabilities; the
    model-assisted kind needs one attached by selection time (it may also be
    supplied per call to the select functions).
    """

    kind: str
    lookup_budget: int = 1
    k: int = 1
    predictor: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"kind must be one of {POLICY_KINDS}, got {self.kind!r}")
        check_int("lookup_budget", self.lookup_budget, minimum=1)
        check_int("k", self.k, minimum=1)


def top_k_indices(values, k):
    """Indices of the k largest entries, descending, ties to lower index.

    Accepts a vector or a (B, N) batch; returns (k,) or (B, k).
    """
    values = np.asarray(values)
    order = np.argsort(-values, axis=-1, kind="stable")
    return order[..., :k]


def permitted_mask_batch(policy, sinr, ports, scores=None):
    """Boolean (B, N) mask of the ports each policy may rank, per realization.

    ``scores`` may carry precomputed predictor probabilities for the batch so
    several lookup budgets can reuse one forward pass.
    """
    sinr = np.atleast_2d(np.asarray(sinr, dtype=float))
    batch, n_ports = sinr.shape
    if policy.kind == "ideal":
        return np.ones((batch, n_ports), dtype=bool)
    if ports is None:
        raise ValueError(f"{policy.kind} policy requires a PortSets instance")
    mask = np.zeros((batch, n_ports), dtype=bool)
    mask[:, ports.observed] = True
    if policy.kind == "model_assisted":
        if scores is None:
            if policy.predictor is None:
                raise ValueError("model_assisted policy requires a predictor")
            scores = policy.predictor.port_scores(sinr[:, ports.observed])
        indicated = top_k_indices(np.atleast_2d(scores), policy.lookup_budget)
        np.put_along_axis(mask, indicated, True, axis=1)
    return mask


def select_port(policy, sinr, ports=None, predictor=None):
    """Best single port under ``policy`` (K = 1 case); returns the port index."""
    if predictor is not None and policy.predictor is None:
        policy = Policy(policy.kind, policy.lookup_budget, policy.k, predictor)
    values = sinr.values if hasattr(sinr, "values") else np.asarray(sinr, dtype=float)
    mask = permitted_mask_batch(policy, values[np.newaxis], ports)[0]
    ranked = np.where(mask, values, -np.inf)
    return int(np.argmax(ranked))


def select_topk_mrc(policy, sinr, ports=None, predictor=None, k=None):
    """The k highest-SINR ports among the policy's permitted set."""
    if predictor is not None and policy.predictor is None:
        policy = Policy(policy.kind, policy.lookup_budget, policy.k, predictor)
    k = policy.k if k is None else check_int("k", k, minimum=1)
    values = sinr.values if hasattr(sinr, "values") else np.asarray(sinr, dtype=float)
    mask = permitted_mask_batch(policy, values[np.newaxis], ports)[0]
    permitted = int(np.count_nonzero(mask))
    if k > permitted:
        raise ValueError(f"k = {k} exceeds permitted-set size {permitted}")
    ranked = np.where(mask, values, -np.inf)
    return top_k_indices(ranked, k)
