"""
Versioned JSON documents for trained models.

Every document carries {"format": "permrank-model", "version": 1, "kind": ...,
"feature_names": [...]}; trees are nested objects, forests a list of trees and
SVMs their support vectors, coefficients and parameters.
"""

import json
import logging

import numpy as np

from src.data.matrix import AppCategory
from src.models.forest import ForestModel
from src.models.svm import KernelType, SvmModel
from src.models.tree import Leaf, Split
from src.utils.errors import IoError, ModelFormatError
from src.utils.helpers import open_output

MODEL_FORMAT = "permrank-model"
MODEL_VERSION = 1


def node_to_dict(node):
    if isinstance(node, Leaf):
        return {"label": node.label.label, "counts": list(node.class_counts)}
    return {"feature": node.feature, "left": node_to_dict(node.left), "right": node_to_dict(node.right)}


def node_from_dict(data):
    if "label" in data:
        return Leaf(AppCategory.parse(data["label"]), tuple(int(c) for c in data["counts"]))
    return Split(int(data["feature"]), node_from_dict(data["left"]), node_from_dict(data["right"]))


def model_to_dict(model, feature_names):
    """
    Describe a tree, forest or SVM as plain JSON types.

    Args:
        model (Leaf, Split, ForestModel or SvmModel): Trained model.
        feature_names (sequence): Column names the model was trained on.

    Returns:
        dict: The document.
    """
    document = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "feature_names": list(feature_names)}
    if isinstance(model, (Leaf, Split)):
        document.update(kind="tree", tree=node_to_dict(model))
    elif isinstance(model, ForestModel):
        document.update(kind="forest", n_trees=model.n_trees, mtry=model.mtry, seed=model.seed,
                        bootstrap=model.bootstrap, trees=[node_to_dict(tree) for tree in model.trees])
    elif isinstance(model, SvmModel):
        document.update(
            kind="svm", kernel=model.kernel.value, gamma=model.gamma, cost=model.cost,
            bias=model.bias, n_features=model.n_features, converged=model.converged,
            iterations=model.iterations,
            support_vectors=model.support_vectors.astype(int).tolist(),
            alphas=model.alphas.tolist(), sv_labels=model.sv_labels.astype(int).tolist(),
        )
    else:
        raise ModelFormatError(f"cannot serialize {type(model).__name__}")
    return document


def model_from_dict(document):
    """
    Rebuild a model from its document.

    Returns:
        tuple: (model, feature names)

    Raises:
        ModelFormatError: If the format tag, version or kind is not recognised, or a field is missing.
    """
    if not isinstance(document, dict) or document.get("format") != MODEL_FORMAT:
        raise ModelFormatError("document is not a permrank model")
    if document.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"model version {document.get('version')} is not supported, expected {MODEL_VERSION}")
    kind = document.get("kind")
    try:
        names = tuple(document["feature_names"])
        if kind == "tree":
            return node_from_dict(document["tree"]), names
        if kind == "forest":
            trees = tuple(node_from_dict(tree) for tree in document["trees"])
            return ForestModel(trees, int(document["n_trees"]), int(document["mtry"]),
                               document["seed"], bool(document["bootstrap"])), names
        if kind == "svm":
            n_features = int(document["n_features"])
            vectors = np.asarray(document["support_vectors"], dtype=np.uint8).reshape(-1, n_features)
            return SvmModel(
                KernelType(document["kernel"]), document["gamma"], float(document["cost"]),
                vectors, np.asarray(document["alphas"], dtype=float),
                np.asarray(document["sv_labels"], dtype=float), float(document["bias"]),
                n_features, bool(document.get("converged", True)), int(document.get("iterations", 0)),
            ), names
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"malformed {kind} model: {e}") from e
    raise ModelFormatError(f"unknown model kind {kind!r}")


def save_model(model, feature_names, path):
    """Write a model document; "-" writes to standard output."""
    try:
        with open_output(path) as handle:
            json.dump(model_to_dict(model, feature_names), handle)
            handle.write("\n")
    except OSError as e:
        logging.error("Error writing model %s: %s", path, e)
        raise IoError(f"cannot write {path}: {e}") from e
    logging.info("Saved model to %s", path)


def load_model(path):
    """
    Read a model document.

    Returns:
        tuple: (model, feature names)

    Raises:
        IoError: If the file cannot be read.
        ModelFormatError: If the content is not a supported model.
    """
    try:
        with open(path, encoding="utf-8") as handle:
            document = json.load(handle)
    except OSError as e:
        logging.error("Error reading model %s: %s", path, e)
        raise IoError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path} is not JSON: {e}") from e
    model, names = model_from_dict(document)
    logging.info("Loaded %s model from %s", document["kind"], path)
    return model, names
