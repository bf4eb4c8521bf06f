"""
Synthetic permission corpora: independent Bernoulli draws per class and
feature. Used as a desk-scale stand-in for a real labeled app corpus and as
ground truth for ranking and classifier checks.
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.data.matrix import AppCategory, FeatureMatrix
from src.utils.errors import BadParameter, BadProbability


@dataclass(frozen=True)
class SynthSpec:
    """
    Per-class, per-feature probabilities that a permission is requested.

    Attributes:
        feature_names (tuple): Column names.
        benign_probs (tuple): P(feature = 1 | benign) per column.
        malware_probs (tuple): P(feature = 1 | malware) per column.
        families (tuple): Malware family names drawn for malware rows; empty means no family.
        family_weights (tuple): Relative family frequencies; uniform when omitted.
    """

    feature_names: tuple
    benign_probs: tuple
    malware_probs: tuple
    families: tuple = ()
    family_weights: tuple = None


def _checked(probs, width, which):
    probs = np.asarray(probs, dtype=float).reshape(-1)
    if probs.shape[0] != width:
        raise BadParameter(f"{which} probabilities have {probs.shape[0]} entries for {width} features")
    if np.any(~np.isfinite(probs)) or np.any(probs < 0) or np.any(probs > 1):
        raise BadProbability(f"{which} probabilities must lie in [0, 1]")
    return probs


def synth_generate(spec, counts, seed):
    """
    Draw a labeled matrix: benign rows first, then malware rows.

    Args:
        spec (SynthSpec): Generator probabilities.
        counts (tuple): (benign rows, malware rows).
        seed (int or numpy.random.SeedSequence): Generator seed.

    Returns:
        FeatureMatrix: The drawn matrix; identical for identical seeds.

    Raises:
        BadProbability: If any probability lies outside [0, 1].
    """
    width = len(spec.feature_names)
    benign_probs = _checked(spec.benign_probs, width, "benign")
    malware_probs = _checked(spec.malware_probs, width, "malware")
    n_benign, n_malware = (int(c) for c in counts)
    if n_benign < 0 or n_malware < 0:
        raise BadParameter("row counts must be non-negative")

    rng = np.random.default_rng(seed)
    benign = (rng.random((n_benign, width)) < benign_probs).astype(np.uint8)
    malware = (rng.random((n_malware, width)) < malware_probs).astype(np.uint8)

    families = [None] * n_benign
    if spec.families:
        weights = np.asarray(spec.family_weights or [1.0] * len(spec.families), dtype=float)
        picks = rng.choice(len(spec.families), size=n_malware, p=weights / weights.sum())
        families.extend(spec.families[i] for i in picks)
    else:
        families.extend([None] * n_malware)

    matrix = FeatureMatrix(
        tuple(spec.feature_names),
        np.vstack([benign, malware]),
        np.concatenate([np.full(n_benign, int(AppCategory.BENIGN), dtype=np.uint8),
                        np.full(n_malware, int(AppCategory.MALWARE), dtype=np.uint8)]),
        tuple(families),
        tuple(f"synth-{i:06d}" for i in range(n_benign + n_malware)),
    )
    logging.info("Generated synthetic matrix: %d benign, %d malware, %d features", n_benign, n_malware, width)
    return matrix


def planted_signal_spec(n_signal=5, n_noise=45, n_zero=0, names=None, families=()):
    """
    Spec with a known set of informative columns.

    Signal columns are requested by malware only, with probability fading
    from 0.95 to 0.85; an app requesting any of them is malware. Noise
    columns share one probability across classes; zero columns are never
    requested.

    Args:
        n_signal (int): Informative columns, placed first.
        n_noise (int): Class-independent columns.
        n_zero (int): All-zero columns, placed last.
        names (sequence, optional): Column names; SIGNAL_i / NOISE_i / ZERO_i when omitted.
        families (tuple): Malware families for the generated malware rows.

    Returns:
        SynthSpec: The generator spec.
    """
    width = n_signal + n_noise + n_zero
    if names is None:
        names = ([f"SIGNAL_{i}" for i in range(n_signal)] + [f"NOISE_{i}" for i in range(n_noise)]
                 + [f"ZERO_{i}" for i in range(n_zero)])
    names = tuple(names)[:width]
    if len(names) != width:
        raise BadParameter(f"{len(names)} names for {width} planted columns")

    benign, malware = [], []
    for i in range(n_signal):
        benign.append(0.0)
        malware.append(0.95 - 0.025 * (i % 5))
    for i in range(n_noise):
        p = 0.05 + 0.4 * i / max(n_noise - 1, 1)
        benign.append(p)
        malware.append(p)
    benign.extend([0.0] * n_zero)
    malware.extend([0.0] * n_zero)
    return SynthSpec(names, tuple(benign), tuple(malware), tuple(families))
