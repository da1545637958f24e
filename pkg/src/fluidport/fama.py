"""Per-port SINR, MRC combining, and Monte Carlo outage estimation.

The served user is row 0 of a realization by convention.  Per-port SINR:

    gamma_n = s2 * |g_n|^2 / (s2 * sum_{u != 0} |g_n^{(u)}|^2 + n2)

with s2 the symbol power and n2 the noise power.  For a selected port set K
the combined SINR supports two interference conventions:

    as_written:  s2 * (sum_K |g_n|^2)^2 /
                 (s2 * sum_K |sum_{u != 0} conj(g_n) g_n^{(u)}|^2 + n2 * sum_K |g_n|^2)
    incoherent:  same numerator and noise term, interference
                 s2 * sum_{u != 0} |sum_K conj(g_n) g_n^{(u)}|^2

``as_written`` sums interferers coherently inside each port term and is the
default; ``incoherent`` is the standard MRC form that reduces to the per-port
SINR at |K| = 1 for any number of users.  With two users (one interferer) both
forms agree at |K| = 1.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_positive, rng_from
from .channel import build_correlation_matrix, factorize_correlation, generate_gain_batch
from .selection import permitted_mask_batch, top_k_indices

__all__ = [
    "SystemConfig",
    "SinrVector",
    "OutageEstimate",
    "PolicyJob",
    "wilson_interval",
    "sinr_per_port",
    "sinr_per_port_batch",
    "sinr_mrc",
    "estimate_outage",
    "estimate_outage_paired",
]

INTERFERENCE_MODES = ("as_written", "incoherent")

# Trials per seed block; fixed so results do not depend on the worker count.
_BLOCK = 8192

# Two-sided 95 % normal quantile for the Wilson interval.
_Z95 = 1.959963984540054


@dataclass(frozen=True)
class SystemConfig:
    """Downlink multi-user parameters (powers linear, threshold in dB)."""

    n_users: int = 2
    signal_power: float = 1.0
    noise_power: float = 1e-4
    gamma_th_db: float = -2.0
    interference_mode: str = "as_written"

    def __post_init__(self):
        check_int("n_users", self.n_users, minimum=1)
        check_positive("signal_power", self.signal_power)
        check_positive("noise_power", self.noise_power)
        if self.interference_mode not in INTERFERENCE_MODES:
            raise ValueError(
                f"interference_mode must be one of {INTERFERENCE_MODES}, "
                f"got {self.interference_mode!r}"
            )

    @property
    def gamma_th(self):
        """Outage threshold in linear scale; -inf/+inf map to 0/inf."""
        return 10.0 ** (self.gamma_th_db / 10.0) if np.isfinite(self.gamma_th_db) else (
            0.0 if self.gamma_th_db < 0 else np.inf
        )


@dataclass(frozen=True)
class SinrVector:
    """Linear per-port SINR of one user for one realization."""

    values: np.ndarray
    user_index: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("SINR values must be finite and non-negative")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class OutageEstimate:
    """Outage probability with a 95 % Wilson confidence interval."""

    probability: float
    ci_low: float
    ci_high: float
    trials: int

    def __post_init__(self):
        if not self.ci_low <= self.probability <= self.ci_high:
            raise ValueError("Wilson interval must bracket the point estimate")


@dataclass(frozen=True)
class PolicyJob:
    """One (policy, observation layout) pair for a paired evaluation pass.

    ``ports`` may be None for the ideal policy, which observes everything.
    """

    label: str
    policy: object
    ports: object = None


def wilson_interval(successes, trials, z=_Z95):
    """95 % Wilson score interval for a binomial proportion.

    The interval always contains the point estimate; the bracket is enforced
    explicitly because the closed form can round past it at p = 0 or 1.
    """
    trials = check_int("trials", trials, minimum=1)
    p_hat = successes / trials
    denom = 1.0 + z**2 / trials
    center = (p_hat + z**2 / (2.0 * trials)) / denom
    half = (z / denom) * float(np.sqrt(p_hat * (1.0 - p_hat) / trials + z**2 / (4.0 * trials**2)))
    return float(min(max(0.0, center - half), p_hat)), float(max(min(1.0, center + half), p_hat))


def sinr_per_port(realization, system, user_index=0):
    """Per-port SINR of the served user (row ``user_index`` is the desired link)."""
    gains = realization.gains
    if gains.shape[0] != system.n_users:
        raise ValueError(
            f"realization has {gains.shape[0]} users, system expects {system.n_users}"
        )
    values = sinr_per_port_batch(gains[np.newaxis], system, user_index)[0]
    return SinrVector(values=values, user_index=user_index)


def sinr_per_port_batch(gains, system, user_index=0):
    """Vectorized per-port SINR for a (B, U, N) gain batch; returns (B, N)."""
    power = np.abs(gains) ** 2
    desired = power[:, user_index, :]
    interference = power.sum(axis=1) - desired
    s2, n2 = system.signal_power, system.noise_power
    return s2 * desired / (s2 * interference + n2)


def _mrc_terms(gains, selected, user_index):
    desired = gains[..., user_index, selected]
    others = np.delete(gains[..., :, selected], user_index, axis=-2)
    desired_power = np.abs(desired) ** 2
    cross = np.conj(desired)[..., np.newaxis, :] * others
    return desired_power, cross


def sinr_mrc(realization, system, selected, user_index=0):
    """Combined SINR of the ports in ``selected`` under the configured mode."""
    selected = np.asarray(selected, dtype=int)
    if selected.size == 0:
        raise ValueError("selected port set must not be empty")
    if len(np.unique(selected)) != selected.size:
        raise ValueError("selected port set contains duplicate indices")
    n_ports = realization.gains.shape[1]
    if np.any(selected < 0) or np.any(selected >= n_ports):
        raise ValueError("selected port index out of range")

    desired_power, cross = _mrc_terms(realization.gains, selected, user_index)
    s2, n2 = system.signal_power, system.noise_power
    signal = s2 * desired_power.sum() ** 2
    noise = n2 * desired_power.sum()
    if system.interference_mode == "as_written":
        # |sum over interferers|^2 per port, then summed over ports.
        interference = s2 * np.sum(np.abs(cross.sum(axis=-2)) ** 2)
    else:
        # |sum over ports|^2 per interferer, then summed over interferers.
        interference = s2 * np.sum(np.abs(cross.sum(axis=-1)) ** 2)
    return float(signal / (interference + noise))


def _mrc_sinr_rows(gains, system, selected_rows, user_index=0):
    """Row-wise MRC SINR: gains (B, U, N) against per-row index sets (B, K)."""
    batch = np.arange(gains.shape[0])[:, np.newaxis]
    desired = gains[batch, user_index, selected_rows]
    desired_power = np.abs(desired) ** 2
    others = np.delete(gains, user_index, axis=1)
    cross = np.conj(desired)[:, np.newaxis, :] * others[batch, :, selected_rows].swapaxes(1, 2)
    s2, n2 = system.signal_power, system.noise_power
    signal = s2 * desired_power.sum(axis=1) ** 2
    noise = n2 * desired_power.sum(axis=1)
    if system.interference_mode == "as_written":
        interference = s2 * np.sum(np.abs(cross.sum(axis=1)) ** 2, axis=-1)
    else:
        interference = s2 * np.sum(np.abs(cross.sum(axis=2)) ** 2, axis=-1)
    return signal / (interference + noise)


def _job_sinr(job, gains, sinr, system, scores_cache=None):
    """Policy-selected (possibly combined) SINR for every row of a chunk."""
    policy = job.policy
    scores = None
    if policy.kind == "model_assisted" and scores_cache is not None:
        key = (id(policy.predictor), id(job.ports))
        if key not in scores_cache:
            scores_cache[key] = policy.predictor.port_scores(sinr[:, job.ports.observed])
        scores = scores_cache[key]
    mask = permitted_mask_batch(policy, sinr, job.ports, scores=scores)
    ranked = np.where(mask, sinr, -np.inf)
    if policy.k == 1:
        return np.take_along_axis(sinr, np.argmax(ranked, axis=1)[:, np.newaxis], 1)[:, 0]
    smallest_permitted = int(np.count_nonzero(mask, axis=1).min())
    if policy.k > smallest_permitted:
        raise ValueError(
            f"k = {policy.k} exceeds the permitted-set size {smallest_permitted} "
            f"of job {job.label!r}"
        )
    selected = top_k_indices(ranked, policy.k)
    return _mrc_sinr_rows(gains, system, selected)


def estimate_outage_paired(jobs, system, antenna, params, trials, master_seed, factor=None, workers=1):
    """Outage probability for several policies on one shared realization stream.

    All jobs see identical channel draws, so orderings between policies are
    exact paired comparisons rather than independent estimates.  Trials are
    consumed in fixed-size seed blocks derived from ``master_seed`` and fanned
    over ``workers`` threads; outage counts are integers summed per block, so
    the result is bit-identical however the blocks are scheduled.
    """
    trials = check_int("trials", trials, minimum=1)
    if factor is None:
        factor = factorize_correlation(build_correlation_matrix(antenna))
    threshold = system.gamma_th

    blocks = []
    done = 0
    while done < trials:
        blocks.append((len(blocks), min(_BLOCK, trials - done)))
        done += blocks[-1][1]

    def run_block(block):
        block_idx, batch = block
        rng = rng_from(master_seed, block_idx)
        gains = generate_gain_batch(system, antenna, params, factor, rng, batch)
        sinr = sinr_per_port_batch(gains, system)
        cache = {}
        return np.array(
            [
                np.count_nonzero(_job_sinr(job, gains, sinr, system, cache) < threshold)
                for job in jobs
            ],
            dtype=np.int64,
        )

    outages = np.zeros(len(jobs), dtype=np.int64)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            for counts in pool.map(run_block, blocks):
                outages += counts
    else:
        for block in blocks:
            outages += run_block(block)

    estimates = []
    for count in outages:
        low, high = wilson_interval(int(count), trials)
        estimates.append(OutageEstimate(float(count) / trials, low, high, trials))
    return estimates


def estimate_outage(policy, system, antenna, params, trials, master_seed, ports=None):
    """Monte Carlo outage probability of a single selection policy."""
    job = PolicyJob(label=policy.kind, policy=policy, ports=ports)
    return estimate_outage_paired([job], system, antenna, params, trials, master_seed)[0]
