"""Random-search hyperparameter optimization and the class-count sweep.

Architectures are scored by the validation-split outage probability of the
model-assisted policy (J = 1, K = 1), i.e. by how often the port picked from
the observed set plus the model's best suggestion still falls below the
threshold.  Training-loss scoring is available as a cheap fallback for smoke
runs.  Trials are seeded independently from the study master seed, so a study
is reproducible and individual trials can be re-run in isolation.
"""

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import check_int, rng_from
from .dataset import FeatureNormalizer
from .nn import LiquidPortClassifier, PortPredictor
from .selection import Policy, PortSets, permitted_mask_batch

__all__ = [
    "SearchSpace",
    "TrialConfig",
    "Trial",
    "StudyResult",
    "SweepTable",
    "sample_trial",
    "run_study",
    "class_count_sweep",
    "policy_outage_on_split",
]


@dataclass(frozen=True)
class SearchSpace:
    """Axis ranges; integer and learning-rate axes are sampled log-uniformly."""

    ltc_units: tuple = (8, 128)
    dense_depth: tuple = (1, 3)
    dense_width: tuple = (16, 256)
    learning_rate: tuple = (1e-4, 1e-2)
    loss: tuple = ("bce", "soft_f1")
    preprocessing: tuple = ("standardize", "standardize_pca")
    m_labels: tuple = (1, 2, 3, 4, 5, 10)


@dataclass(frozen=True)
class TrialConfig:
    ltc_units: int
    dense_layers: tuple
    learning_rate: float
    loss: str
    preprocessing: str
    m_labels: int

    def to_dict(self):
        d = asdict(self)
        d["dense_layers"] = list(self.dense_layers)
        return d


@dataclass
class Trial:
    config: TrialConfig
    objective: float
    seed: int
    elapsed: float = 0.0
    history: dict = field(default_factory=dict, repr=False)
    weights: dict = field(default=None, repr=False)
    spec: object = field(default=None, repr=False)
    normalizers: list = field(default_factory=list, repr=False)
    error: str = None


@dataclass
class StudyResult:
    trials: list
    best_index: int
    master_seed: int

    @property
    def best(self):
        return self.trials[self.best_index]


def _log_uniform_int(rng, lo, hi):
    return int(round(math.exp(rng.uniform(math.log(lo), math.log(hi)))))


def sample_trial(space, seed):
    """Draw one configuration, each axis independent per its distribution.

    The PCA preprocessing implies the dense baseline (no recurrent stage), so
    that axis overrides ``ltc_units`` to zero.
    """
    rng = rng_from(seed)
    ltc_units = _log_uniform_int(rng, *space.ltc_units)
    depth = int(rng.integers(space.dense_depth[0], space.dense_depth[1] + 1))
    widths = tuple(_log_uniform_int(rng, *space.dense_width) for _ in range(depth))
    learning_rate = float(np.exp(rng.uniform(*np.log(space.learning_rate))))
    loss = str(rng.choice(space.loss))
    preprocessing = str(rng.choice(space.preprocessing))
    m_labels = int(rng.choice(space.m_labels))
    if preprocessing == "standardize_pca":
        ltc_units = 0
    return TrialConfig(ltc_units, widths, learning_rate, loss, preprocessing, m_labels)


def policy_outage_on_split(dataset, predictor, split="validation", j_budget=1):
    """Outage fraction of the model-assisted policy on a stored split.

    Uses the ground-truth SINR vectors carried by the dataset, so no channels
    are regenerated; K = 1 selection per the class-sweep protocol.
    """
    part = dataset.split(split)
    sinr = part.sinr.astype(float)
    ports = PortSets.uniform(dataset.meta["n_ports"], dataset.meta["m_observed"])
    policy = Policy("model_assisted", lookup_budget=j_budget, k=1, predictor=predictor)
    mask = permitted_mask_batch(policy, sinr, ports)
    best = np.max(np.where(mask, sinr, -np.inf), axis=1)
    threshold = 10.0 ** (dataset.meta["gamma_th_db"] / 10.0)
    return float(np.mean(best < threshold))


def fit_trial(dataset, config, seed, epochs=40, batch_size=64, patience=6):
    """Train one sampled configuration on a dataset; returns (clf, predictor)."""
    extra = []
    x_train = dataset.train.features.astype(float)
    x_val = dataset.validation.features.astype(float)
    if config.preprocessing == "standardize_pca":
        norm = FeatureNormalizer(with_pca=True).fit(x_train)
        x_train, x_val = norm.transform(x_train), norm.transform(x_val)
        extra.append(norm)
    clf = LiquidPortClassifier(
        ltc_units=config.ltc_units,
        dense_layers=config.dense_layers,
        learning_rate=config.learning_rate,
        loss=config.loss,
        m_labels=config.m_labels,
        epochs=epochs,
        batch_size=batch_size,
        patience=patience,
        seed=seed,
    )
    clf.fit(
        x_train,
        dataset.train.labels.astype(float),
        x_val,
        dataset.validation.labels.astype(float),
    )
    predictor = PortPredictor.from_classifier(
        clf, [dataset.normalizer] + extra, dataset.observed, dataset.meta["n_ports"]
    )
    return clf, predictor


def run_study(
    space,
    dataset_factory,
    budget,
    master_seed,
    objective="outage",
    epochs=40,
    batch_size=64,
    patience=6,
):
    """Random search over ``budget`` trials; lowest objective wins.

    ``dataset_factory(m_labels)`` supplies the dataset labeled for a trial's
    class count.  A diverging trial is recorded with an infinite objective and
    the study continues.
    """
    check_int("budget", budget, minimum=1)
    trials = []
    for index in range(budget):
        seed = int(np.random.SeedSequence([int(master_seed), index]).generate_state(1)[0])
        config = sample_trial(space, seed)
        dataset = dataset_factory(config.m_labels)
        started = time.time()
        try:
            clf, predictor = fit_trial(
                dataset, config, seed, epochs=epochs, batch_size=batch_size, patience=patience
            )
            if objective == "outage":
                score = policy_outage_on_split(dataset, predictor)
            else:
                score = float(clf.history_["best_val_loss"])
            if clf.history_.get("diverged"):
                score = float("inf")
            trials.append(
                Trial(
                    config=config,
                    objective=score,
                    seed=seed,
                    elapsed=time.time() - started,
                    history=clf.history_,
                    weights=clf.weights_,
                    spec=clf.spec_,
                    normalizers=predictor.normalizers,
                )
            )
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            trials.append(
                Trial(
                    config=config,
                    objective=float("inf"),
                    seed=seed,
                    elapsed=time.time() - started,
                    error=str(exc),
                )
            )
    # Ties on the outage objective (common when outages are rare on the
    # validation split) fall back to the validation loss.
    ranked = [
        (t.objective, t.history.get("best_val_loss", float("inf")), i)
        for i, t in enumerate(trials)
    ]
    best_index = min(ranked)[2]
    return StudyResult(trials=trials, best_index=best_index, master_seed=int(master_seed))


@dataclass
class SweepTable:
    """Class-count sweep results in the table layout (rows: observed ports)."""

    observed_port_counts: list
    m_values: list
    outage: np.ndarray
    best_m: list

    def rows_as_dicts(self):
        for i, m_obs in enumerate(self.observed_port_counts):
            row = {"m_observed": m_obs}
            for j, m in enumerate(self.m_values):
                row[f"M={m}"] = self.outage[i, j]
            row["best_m"] = self.best_m[i]
            yield row


def class_count_sweep(
    observed_port_counts,
    m_values,
    budget_per_cell,
    seed,
    dataset_factory_for,
    epochs=40,
    batch_size=64,
    patience=6,
):
    """Test-set outage of the best architecture per (observed ports, M) cell.

    ``dataset_factory_for(m_observed)`` returns a ``dataset_factory`` usable by
    ``run_study`` for that observation count.  Each cell runs its own study
    restricted to a single class count; failed cells are marked NaN.
    """
    if not observed_port_counts or not m_values:
        raise ValueError("sweep axes must be non-empty")
    outage = np.full((len(observed_port_counts), len(m_values)), np.nan)
    for i, m_obs in enumerate(observed_port_counts):
        factory = dataset_factory_for(m_obs)
        for j, m in enumerate(m_values):
            space = SearchSpace(m_labels=(m,))
            study = run_study(
                space,
                factory,
                budget_per_cell,
                master_seed=int(np.random.SeedSequence([int(seed), i, j]).generate_state(1)[0]),
                epochs=epochs,
                batch_size=batch_size,
                patience=patience,
            )
            best = study.best
            if best.error is not None or not np.isfinite(best.objective):
                continue
            predictor = PortPredictor(
                best.spec,
                best.weights,
                best.normalizers,
                observed=factory(m).observed,
                n_ports=factory(m).meta["n_ports"],
                m_labels=m,
            )
            outage[i, j] = policy_outage_on_split(factory(m), predictor, split="test")
    best_m = []
    for i in range(len(observed_port_counts)):
        row = outage[i]
        best_m.append(int(np.asarray(m_values)[np.nanargmin(row)]) if np.any(np.isfinite(row)) else None)
    return SweepTable(list(observed_port_counts), list(m_values), outage, best_m)
