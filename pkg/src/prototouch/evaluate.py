"""Localization metrics, threshold sweeps, and the model-comparison harness.

Accuracy at threshold epsilon counts predictions whose Euclidean distance from
ground truth is <= epsilon (boundary inclusive); distances are reported in
centimeters throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from prototouch.baselines import KnnClassifier, KnnRegressor
from prototouch.dataset import Dataset, decode_class, split
from prototouch.kinematics import KinematicChain, reference_points
from prototouch.model import REGRESSION, CLASSIFICATION, MlpModel, TrainConfig, predict, train

DEFAULT_EPSILON_CM = 12.0
DEFAULT_SWEEP_CM = tuple(float(e) for e in range(0, 31))

METHOD_MLP_REGRESSION = "mlp-regression"
METHOD_MLP_CLASSIFICATION = "mlp-classification"
METHOD_KNN_REGRESSOR = "knn-regressor"
METHOD_KNN_CLASSIFIER = "knn-classifier"
ALL_METHODS = (
    METHOD_MLP_REGRESSION,
    METHOD_MLP_CLASSIFICATION,
    METHOD_KNN_REGRESSOR,
    METHOD_KNN_CLASSIFIER,
)


@dataclass
class EvalReport:
    method: str
    n: int
    epsilon_cm: float
    acc: float
    mean_l2_cm: float
    distances_cm: np.ndarray
    sweep: list[tuple[float, float]] | None = None

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "n": self.n,
            "epsilon_cm": self.epsilon_cm,
            "acc": self.acc,
            "mean_l2_cm": self.mean_l2_cm,
        }
        if self.sweep is not None:
            out["sweep"] = [[e, a] for e, a in self.sweep]
        return out


def save_report(report: EvalReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh)
        fh.write("\n")


def l2_error(p_hat, p) -> float:
    """Euclidean distance between prediction and ground truth, centimeters."""
    return 100.0 * float(np.linalg.norm(np.asarray(p_hat, float) - np.asarray(p, float)))


def accuracy(distances_cm, epsilon_cm: float) -> float:
    """Fraction of distances <= epsilon; the boundary counts as success."""
    d = np.asarray(distances_cm, dtype=float)
    if d.size == 0:
        raise ValueError("empty distance list")
    if epsilon_cm < 0:
        raise ValueError("epsilon must be >= 0")
    return float(np.mean(d <= epsilon_cm))


def threshold_sweep(distances_cm, epsilons_cm) -> list[tuple[float, float]]:
    """Accuracy at each threshold of an ascending grid."""
    eps = [float(e) for e in epsilons_cm]
    if not eps:
        raise ValueError("empty threshold grid")
    if any(b < a for a, b in zip(eps, eps[1:])):
        raise ValueError("threshold grid must be ascending")
    return [(e, accuracy(distances_cm, e)) for e in eps]


def _method_predictor(method: str, *, model=None, knn=None, chain=None, points=None):
    """Returns sample -> predicted 3-vector for one of the four methods.

    A regression prediction that declares no contact is scored as its encoded
    representation, the point (0,0,0), mirroring how a class-n prediction
    decodes to the origin.
    """
    if method == METHOD_MLP_REGRESSION:

        def run_regression(s):
            pred = predict(model, s.q, s.tau)
            return pred.location if pred.contact else np.zeros(3)

        return run_regression
    if method == METHOD_MLP_CLASSIFICATION:
        coords = reference_points(chain, points)
        return lambda s: predict(model, s.q, s.tau, points_world=coords).location
    if method == METHOD_KNN_REGRESSOR:
        return lambda s: knn.predict_location(s.q, s.tau)
    if method == METHOD_KNN_CLASSIFIER:
        return lambda s: decode_class(knn.predict_label(s.q, s.tau), chain, points)
    raise ValueError(f"unknown method {method!r}")


def evaluate(
    method: str,
    predictor,
    val: Dataset,
    epsilon_cm: float = DEFAULT_EPSILON_CM,
    sweep_cm=DEFAULT_SWEEP_CM,
) -> EvalReport:
    """Score a predictor (sample -> 3-vector) on a validation set.

    Classification predictors must decode to coordinates before this point;
    no-contact samples are scored against their (0,0,0) encoding.
    """
    if len(val) == 0:
        raise ValueError("empty validation set")
    distances = np.array([l2_error(predictor(s), s.p) for s in val.samples])
    return EvalReport(
        method=method,
        n=len(val),
        epsilon_cm=epsilon_cm,
        acc=accuracy(distances, epsilon_cm),
        mean_l2_cm=float(distances.mean()),
        distances_cm=distances,
        sweep=threshold_sweep(distances, sweep_cm) if sweep_cm is not None else None,
    )


def evaluate_model(
    model: MlpModel,
    val: Dataset,
    chain: KinematicChain,
    epsilon_cm: float = DEFAULT_EPSILON_CM,
    sweep_cm=DEFAULT_SWEEP_CM,
) -> EvalReport:
    if model.dof != val.dof:
        raise ValueError(f"model dof {model.dof} does not match dataset dof {val.dof}")
    method = METHOD_MLP_REGRESSION if model.head == REGRESSION else METHOD_MLP_CLASSIFICATION
    predictor = _method_predictor(method, model=model, chain=chain, points=val.points)
    return evaluate(method, predictor, val, epsilon_cm, sweep_cm)


def comparison_table(
    dataset: Dataset,
    chain: KinematicChain,
    config: TrainConfig | None = None,
    epsilon_cm: float = DEFAULT_EPSILON_CM,
    k: int = 3,
    methods=ALL_METHODS,
) -> dict[str, EvalReport]:
    """Train/fit every requested method on the train split, score on validation.

    This is the four-row comparison harness; all methods share the same split
    and the same normalization statistics.
    """
    if config is None:
        config = TrainConfig()
    train_ds, val_ds = split(dataset, config.split_ratio, config.seed)
    reports = {}
    for method in methods:
        if method == METHOD_MLP_REGRESSION:
            model, _ = train(dataset, REGRESSION, config)
            predictor = _method_predictor(method, model=model)
        elif method == METHOD_MLP_CLASSIFICATION:
            model, _ = train(dataset, CLASSIFICATION, config)
            predictor = _method_predictor(method, model=model, chain=chain, points=dataset.points)
        elif method == METHOD_KNN_REGRESSOR:
            knn = KnnRegressor(k).fit(train_ds)
            predictor = _method_predictor(method, knn=knn)
        elif method == METHOD_KNN_CLASSIFIER:
            knn = KnnClassifier(k).fit(train_ds)
            predictor = _method_predictor(method, knn=knn, chain=chain, points=dataset.points)
        else:
            raise ValueError(f"unknown method {method!r}")
        reports[method] = evaluate(method, predictor, val_ds, epsilon_cm)
    return reports


def evaluate_cross_instance(
    model: MlpModel,
    chain: KinematicChain,
    val_seen: Dataset,
    val_unseen: Dataset,
    epsilon_cm: float = DEFAULT_EPSILON_CM,
) -> tuple[EvalReport, EvalReport]:
    """Score one trained model on data from the seen and an unseen robot unit."""
    if val_seen.dof != val_unseen.dof:
        raise ValueError("instances do not share dof")
    seen = evaluate_model(model, val_seen, chain, epsilon_cm)
    unseen = evaluate_model(model, val_unseen, chain, epsilon_cm)
    unseen.method = seen.method + " (unseen instance)"
    return seen, unseen
