"""Observer-based state recovery: simulation, lifting, PCA and diagnostics."""

import json

from ._core import (
    DegenerateDataError,
    Error,
    IoError,
    NumericalError,
    Observer,
    ParseError,
    PcaModel,
    ValidationError,
    __version__,
    align_affine,
    decode_ppm,
    encode_ppm,
    estimate_period,
    fit_pca,
    lift,
    make_observer,
    oregonator_equilibrium,
    oregonator_rhs,
    recurrence_error,
    simulate,
    solve_sylvester,
    sym_eig,
)
from . import _core


def default_config():
    """Default pipeline configuration as a dict."""
    return json.loads(_core.default_config())


def run_pipeline(config=None, output_dir=None):
    """Run the full chain. With `output_dir`, artifacts are written there.

    Returns a dict with times, components, truth (synthetic source only),
    spectrum, the fit window and the parsed report.
    """
    result = _core.run_pipeline(json.dumps(config or {}), None if output_dir is None else str(output_dir))
    result["report"] = json.loads(result["report"])
    return result


__all__ = [
    "DegenerateDataError",
    "Error",
    "IoError",
    "NumericalError",
    "Observer",
    "ParseError",
    "PcaModel",
    "ValidationError",
    "__version__",
    "align_affine",
    "decode_ppm",
    "default_config",
    "encode_ppm",
    "estimate_period",
    "fit_pca",
    "lift",
    "make_observer",
    "oregonator_equilibrium",
    "oregonator_rhs",
    "recurrence_error",
    "run_pipeline",
    "simulate",
    "solve_sylvester",
    "sym_eig",
]
