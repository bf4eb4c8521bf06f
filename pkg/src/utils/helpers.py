"""
Small shared helpers: environment lookup, seed substreams, rounding and
output streams.
"""

import contextlib
import hashlib
import logging
import os
import sys
from decimal import ROUND_HALF_UP, Decimal

import numpy as np


def get_env_variable(key, required=True):
    """
    Retrieve an environment variable and ensure it is not empty if required.

    Args:
        key (str): The key of the environment variable.
        required (bool): Whether the environment variable is required.

    Returns:
        str: The value of the environment variable or None if not required and missing.

    Raises:
        ValueError: If the environment variable is required and missing or empty.
    """
    logging.debug("Retrieving environment variable: %s", key)
    value = os.getenv(key)
    if required and not value:
        logging.error("Missing required environment variable: %s", key)
        raise ValueError(f"Missing required environment variable: {key}")
    return value


def substream_seed(seed, *keys):
    """
    Derive an independent, reproducible RNG seed sequence for a named stage.

    The same (seed, keys) pair always yields the same stream, and different
    keys yield statistically independent streams.

    Args:
        seed (int): The run seed.
        *keys: Names identifying the stage, e.g. ("split", "dataset1").

    Returns:
        numpy.random.SeedSequence: Seed sequence for numpy.random.default_rng.
    """
    digest = hashlib.sha256("/".join(str(k) for k in keys).encode("utf-8")).digest()
    return np.random.SeedSequence([int(seed), int.from_bytes(digest[:8], "little")])


def round_half_up(value, places=2):
    """Round a float half-up to a fixed number of decimals, returned as float."""
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


def format_fixed(value, places=2):
    """Half-up rounded fixed-point text, e.g. 92.17."""
    quantum = Decimal(1).scaleb(-places)
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


def format_p_value(p_value):
    """Scientific notation with three significant digits, e.g. 1.68E-37."""
    return f"{p_value:.2E}"


@contextlib.contextmanager
def open_output(path):
    """
    Open a text output target; "-" means standard output.

    Args:
        path (str): Destination path or "-".

    Yields:
        file object: Writable text stream using "\\n" line endings.
    """
    if str(path) == "-":
        yield sys.stdout
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        yield handle


def substream_int(seed, *keys):
    """Unsigned 32-bit integer seed for the named stage, see substream_seed."""
    return int(substream_seed(seed, *keys).generate_state(1)[0])
