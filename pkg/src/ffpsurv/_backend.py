"""Kernel backend selection.

The hot likelihood/gradient loops have two interchangeable implementations:
JIT-compiled scalar loops (numba) and a vectorized pure-numpy fallback.
``FFPSURV_BACKEND`` picks one explicitly:

    FFPSURV_BACKEND=numba   require numba, fail if unavailable
    FFPSURV_BACKEND=numpy   force the fallback
    FFPSURV_BACKEND=auto    numba when importable, else numpy (default)

``benchmarks/bench_loglik.py`` compares the two.
"""

import os

from . import _kernels_numpy

_MODE = os.environ.get("FFPSURV_BACKEND", "auto").lower()
if _MODE not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"FFPSURV_BACKEND must be one of auto/numba/numpy, got {_MODE!r}")

_numba_kernels = None
if _MODE in ("auto", "numba"):
    try:
        from . import _kernels_numba as _numba_kernels
    except ImportError:
        if _MODE == "numba":
            raise
        _numba_kernels = None

BACKEND = "numba" if _numba_kernels is not None else "numpy"


def backend_name():
    return BACKEND


def panel_loglik(packed, phi, cum, alpha, kappa):
    """Per-subject log-likelihoods and the clamp count."""
    if _numba_kernels is not None:
        return _numba_kernels.panel_loglik_csr(
            packed.offsets, packed.s0_idx, packed.s1_idx,
            packed.tail0, packed.tail1, packed.d,
            phi, cum, alpha, kappa)
    return _kernels_numpy.panel_loglik_padded(packed, phi, cum, alpha, kappa)


def panel_loglik_grad(packed, phi, cum, alpha, kappa):
    """Per-subject log-likelihoods plus adjoints of phi, the hazard prefix
    sums, and the prior shape/rate."""
    if _numba_kernels is not None:
        return _numba_kernels.panel_loglik_grad_csr(
            packed.offsets, packed.s0_idx, packed.s1_idx,
            packed.tail0, packed.tail1, packed.d,
            phi, cum, alpha, kappa, packed.max_spells)
    return _kernels_numpy.panel_loglik_grad_padded(packed, phi, cum, alpha, kappa)
