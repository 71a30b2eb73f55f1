"""
Accuracy Predictor

Perceptron surrogate (input -> 400 -> 400 -> 1, ReLU hidden, identity output)
fitted with scikit-learn's MLPRegressor on one-hot encodings, L2-penalised and
early-stopped on an internal validation split, plus the predictor variants the
search can plug in: oracle, perceptron, lookup table.
"""

import copy
import logging
import os
import warnings
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import joblib
import numpy as np
import pandas as pd
from scipy.stats import spearmanr
from sklearn.exceptions import ConvergenceWarning
from sklearn.model_selection import train_test_split
from sklearn.neural_network import MLPRegressor

from cimsearch.exceptions import (
    CheckpointError,
    CimSearchError,
    InconsistentEncodingLength,
    InvalidGenome,
    SchemaVersionMismatch,
    ShapeMismatch,
)
from cimsearch.ml.encoding import FeatureEncoder
from cimsearch.ml.oracle import AccuracyOracle
from cimsearch.models.schemas import (
    DesignPoint,
    GeneGroup,
    PredictorHyper,
    PredictorModel,
    SearchSpaceSpec,
)
from cimsearch.services.space import (
    canonical,
    decode,
    gene_slices,
    median_indices,
    sample_indices,
)
from cimsearch.services.streams import PREDICTOR, stream

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = "cimsearch-predictor/2"
MIN_SAMPLES = 100


# ============================================
# Perceptron
# ============================================

def build_estimator(hyper: PredictorHyper) -> MLPRegressor:
    """Unfitted regressor configured from the training knobs"""
    return MLPRegressor(
        hidden_layer_sizes=tuple(hyper.hidden_sizes),
        activation="relu",
        solver=hyper.optimizer,
        alpha=hyper.alpha,
        batch_size=hyper.batch_size,
        learning_rate_init=hyper.learning_rate,
        max_iter=hyper.epochs,
        momentum=0.0,
        nesterovs_momentum=False,
        early_stopping=hyper.early_stopping,
        validation_fraction=hyper.stopping_fraction,
        n_iter_no_change=hyper.patience,
        random_state=hyper.seed,
    )


def _warm_estimator(init: PredictorModel, hyper: PredictorHyper) -> MLPRegressor:
    """Copy of a fitted regressor that continues from its current weights"""
    if tuple(init.estimator.hidden_layer_sizes) != tuple(hyper.hidden_sizes):
        raise ShapeMismatch(
            f"model has hidden sizes {tuple(init.estimator.hidden_layer_sizes)}, "
            f"training asks for {tuple(hyper.hidden_sizes)}"
        )
    estimator = copy.deepcopy(init.estimator)
    params = build_estimator(hyper).get_params()
    params["warm_start"] = True
    estimator.set_params(**params)
    # a warm fit keeps the previous stopping state; start the curves afresh
    estimator.n_iter_ = 0
    estimator.loss_curve_ = []
    estimator._no_improvement_count = 0
    if hyper.early_stopping:
        estimator.validation_scores_ = []
        estimator.best_validation_score_ = -np.inf
        estimator.best_loss_ = None
    else:
        estimator.validation_scores_ = None
        estimator.best_validation_score_ = None
        estimator.best_loss_ = np.inf
    return estimator


def _as_arrays(samples) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(samples, tuple) and len(samples) == 2 and isinstance(samples[0], np.ndarray):
        X, y = samples
    else:
        vectors = [np.asarray(v, dtype=np.float64) for v, _ in samples]
        lengths = {v.shape[0] for v in vectors}
        if len(lengths) > 1:
            raise InconsistentEncodingLength(f"samples have encoding lengths {sorted(lengths)}")
        X = np.stack(vectors) if vectors else np.zeros((0, 0))
        y = np.array([t for _, t in samples], dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise InconsistentEncodingLength(f"features {X.shape} do not match targets {y.shape}")
    return X, y


def train_predictor(
    samples,
    hyper: Optional[PredictorHyper] = None,
    init: Optional[PredictorModel] = None,
) -> PredictorModel:
    """
    Fit the perceptron by minimising mean squared error.

    samples is either (X, y) arrays or a list of (encoding, accuracy) pairs.
    Targets are standardised internally; init continues training an existing
    model (its target scaling is kept). With early stopping the weights of the
    best validation epoch are kept.
    """
    hyper = hyper or PredictorHyper()
    X, y = _as_arrays(samples)
    if X.shape[0] < MIN_SAMPLES:
        raise CimSearchError(f"At least {MIN_SAMPLES} samples needed, got {X.shape[0]}")

    if init is None:
        estimator = build_estimator(hyper)
        offset = float(np.mean(y))
        spread = float(np.std(y))
        scale = spread if spread > 1e-12 else 1.0
    else:
        if init.input_dim != X.shape[1]:
            raise ShapeMismatch(f"model expects {init.input_dim} inputs, samples have {X.shape[1]}")
        estimator = _warm_estimator(init, hyper)
        offset, scale = init.target_offset, init.target_scale

    target = (y - offset) / scale
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        estimator.fit(X, target)

    # sklearn's squared loss is half the mean squared error
    history = [2.0 * float(loss) * scale ** 2 for loss in estimator.loss_curve_]
    final_loss = float(np.mean((estimator.predict(X) - target) ** 2)) * scale ** 2
    if hyper.early_stopping:
        logger.debug(
            f"stopped after {estimator.n_iter_} epochs | best validation R²: "
            f"{estimator.best_validation_score_:.4f}"
        )
    logger.info(f"✓ Predictor trained on {X.shape[0]} samples | final MSE: {final_loss:.4f}")
    return PredictorModel(
        estimator=estimator,
        hyper=hyper,
        target_offset=offset,
        target_scale=scale,
        final_loss=final_loss,
        history=history,
    )


def predict_batch(model: PredictorModel, X: np.ndarray) -> np.ndarray:
    """Accuracy in percent for each row, clamped to [0, 100]"""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.input_dim:
        raise ShapeMismatch(f"model expects {model.input_dim} inputs, got {X.shape[1]}")
    out = np.ravel(model.estimator.predict(X))
    return np.clip(out * model.target_scale + model.target_offset, 0.0, 100.0)


def predict(model: PredictorModel, encoding) -> float:
    """Single forward pass"""
    return float(predict_batch(model, np.asarray(encoding, dtype=np.float64)[None, :])[0])


def widen_input_layer(model: PredictorModel, extra_inputs: int) -> PredictorModel:
    """Append zero rows to the first weight matrix for new input slots"""
    estimator = copy.deepcopy(model.estimator)
    first = estimator.coefs_[0]
    estimator.coefs_[0] = np.vstack([first, np.zeros((extra_inputs, first.shape[1]))])
    estimator.n_features_in_ = first.shape[0] + extra_inputs
    return PredictorModel(
        estimator=estimator,
        hyper=model.hyper,
        target_offset=model.target_offset,
        target_scale=model.target_scale,
        final_loss=model.final_loss,
    )


# ============================================
# Training data
# ============================================

def generate_training_set(
    spec: SearchSpaceSpec,
    oracle: AccuracyOracle,
    n: int,
    rng: np.random.Generator,
    full_precision: bool = False,
) -> Tuple[List[DesignPoint], np.ndarray]:
    """
    n uniformly sampled designs labelled by the oracle.

    full_precision pins every quantization gene to its largest choice.
    Hardware genes stay at the median since accuracy ignores them.
    """
    slices = gene_slices(spec)
    quant_top = tuple(g.size - 1 for g in spec.genes[slices[GeneGroup.QUANT]])
    hardware = median_indices(spec)
    designs = []
    for _ in range(n):
        idx = sample_indices(spec, rng)
        quant = quant_top if full_precision else idx[slices[GeneGroup.QUANT]]
        designs.append(decode(spec, idx[slices[GeneGroup.MODEL]] + tuple(quant) + hardware))
    return designs, oracle.predict_designs(designs)


def held_out_report(model: PredictorModel, X: np.ndarray, y: np.ndarray) -> Dict[str, float]:
    """MSE and Spearman rank correlation on unseen samples"""
    predicted = predict_batch(model, X)
    rho = spearmanr(predicted, y).correlation
    return {
        "mse": round(float(np.mean((predicted - y) ** 2)), 5),
        "spearman": round(float(rho), 4),
        "samples": int(len(y)),
    }


def train_two_phase(
    spec: SearchSpaceSpec,
    oracle: AccuracyOracle,
    n: int,
    hyper: Optional[PredictorHyper] = None,
) -> Tuple[PredictorModel, Dict]:
    """
    Full-precision predictor on model genes first, then the input layer is
    widened with zero weights for the quantization slots and fine-tuned on
    mixed-precision samples. Returns the model and held-out metrics.
    """
    hyper = hyper or PredictorHyper()
    rng = stream(hyper.seed, PREDICTOR, "samples")

    model_only = FeatureEncoder(spec, groups=(GeneGroup.MODEL,))
    joint = FeatureEncoder(spec)

    designs, acc = generate_training_set(spec, oracle, max(MIN_SAMPLES, n // 2), rng, full_precision=True)
    base = train_predictor((model_only.transform_designs(designs), acc), hyper)
    logger.info(f"✓ Phase 1 (full precision): MSE {base.final_loss:.4f}")

    designs, acc = generate_training_set(spec, oracle, n, rng)
    X = joint.transform_designs(designs)
    X_train, X_test, y_train, y_test = train_test_split(
        X, acc, test_size=hyper.validation_fraction, random_state=hyper.seed
    )
    widened = widen_input_layer(base, joint.length - model_only.length)
    model = train_predictor((X_train, y_train), hyper, init=widened)
    metrics = held_out_report(model, X_test, y_test)
    metrics["train_mse"] = round(model.final_loss, 5)
    metrics["train_samples"] = int(len(y_train))
    logger.info(f"✓ Phase 2 (mixed precision): test MSE {metrics['mse']} | Spearman {metrics['spearman']}")
    return model, metrics


# ============================================
# Checkpoints
# ============================================

def save_checkpoint(model: PredictorModel, path: Union[str, Path], spec_name: str = "") -> None:
    """Persist weights, scaling and hyperparameters"""
    path = Path(path)
    if path.parent and not path.parent.exists():
        os.makedirs(path.parent, exist_ok=True)
    payload = {
        "version": CHECKPOINT_VERSION,
        "spec_name": spec_name,
        "shapes": [w.shape for w in model.weights],
        "estimator": model.estimator,
        "hyper": model.hyper.model_dump(),
        "target_offset": model.target_offset,
        "target_scale": model.target_scale,
        "final_loss": model.final_loss,
        "history": model.history,
    }
    joblib.dump(payload, path)
    logger.info(f"✓ Predictor saved: {path}")


def load_checkpoint(path: Union[str, Path]) -> PredictorModel:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = joblib.load(path)
    except Exception as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if not isinstance(payload, dict) or "version" not in payload:
        raise CheckpointError(f"{path} is not a predictor checkpoint")
    if payload["version"] != CHECKPOINT_VERSION:
        raise SchemaVersionMismatch(
            f"checkpoint version {payload['version']}, expected {CHECKPOINT_VERSION}"
        )
    estimator = payload.get("estimator")
    if not isinstance(estimator, MLPRegressor) or not hasattr(estimator, "coefs_"):
        raise CheckpointError(f"{path} holds no fitted regressor")
    model = PredictorModel(
        estimator=estimator,
        hyper=PredictorHyper(**payload["hyper"]),
        target_offset=float(payload["target_offset"]),
        target_scale=float(payload["target_scale"]),
        final_loss=float(payload["final_loss"]),
        history=list(payload.get("history", [])),
    )
    if not all(np.all(np.isfinite(w)) for w in model.weights + model.biases):
        raise CheckpointError(f"{path} holds non-finite parameters")
    logger.info(f"✓ Predictor loaded: {path} ({payload['version']})")
    return model


# ============================================
# Pluggable predictors
# ============================================

class MLPPredictor:
    """Trained perceptron behind the common predict_designs interface"""

    name = "mlp"

    def __init__(self, model: PredictorModel, encoder: FeatureEncoder):
        if encoder.length != model.input_dim:
            raise ShapeMismatch(
                f"model expects {model.input_dim} inputs, encoder produces {encoder.length}"
            )
        self.model = model
        self.encoder = encoder

    def predict_designs(self, designs: Sequence[DesignPoint]) -> np.ndarray:
        if not designs:
            return np.zeros(0)
        return predict_batch(self.model, self.encoder.transform_designs(designs))


class TablePredictor:
    """Measured accuracies looked up by the design's network encoding"""

    name = "table"

    def __init__(self, spec: SearchSpaceSpec, table: Dict[str, float]):
        self.spec = spec
        self.table = dict(table)
        self._hw_start = gene_slices(spec)[GeneGroup.HARDWARE].start

    def key(self, design: DesignPoint) -> str:
        return network_key(self.spec, design.encoding, self._hw_start)

    def predict_designs(self, designs: Sequence[DesignPoint]) -> np.ndarray:
        values = []
        for design in designs:
            key = self.key(design)
            if key not in self.table:
                raise InvalidGenome(f"no accuracy recorded for network {key}")
            values.append(self.table[key])
        return np.array(values, dtype=np.float64)

    @classmethod
    def from_csv(cls, spec: SearchSpaceSpec, path: Union[str, Path]) -> "TablePredictor":
        """CSV with columns network, accuracy"""
        path = Path(path)
        if not path.exists():
            raise CheckpointError(f"accuracy table not found: {path}")
        frame = pd.read_csv(path, comment="#", dtype={"network": str})
        return cls(spec, dict(zip(frame["network"], frame["accuracy"].astype(float))))

    @classmethod
    def tabulate(cls, spec: SearchSpaceSpec, designs: Sequence[DesignPoint], source) -> "TablePredictor":
        accuracies = source.predict_designs(designs)
        hw_start = gene_slices(spec)[GeneGroup.HARDWARE].start
        return cls(spec, {network_key(spec, d.encoding, hw_start): float(a) for d, a in zip(designs, accuracies)})


def network_key(spec: SearchSpaceSpec, encoding: Sequence[int], hw_start: int) -> str:
    """Model and quantization indices with padded blocks zeroed"""
    return "-".join(str(i) for i in canonical(spec, encoding)[:hw_start])
