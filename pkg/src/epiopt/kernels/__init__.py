"""Kernel backend selection.

The hot loops (SSA event loop, RK4 forward/adjoint sweeps) exist twice:
as Cython extensions and as pure-Python twins.  The compiled backend is
used when its modules import; set ``EPIOPT_KERNEL=python`` to force the
fallback.  Both backends are bit-identical, so the choice never affects
results, only speed (see ``benchmarks/bench_kernels.py``).
"""
from __future__ import annotations

import os

from . import _ode_py, _ssa_py

try:
    from . import _ode_cy, _ssa_cy

    HAVE_COMPILED = True
except ImportError:  # extension not built; pure-Python fallback
    _ode_cy = None
    _ssa_cy = None
    HAVE_COMPILED = False

_FORCED = os.environ.get("EPIOPT_KERNEL", "").strip().lower()
if _FORCED == "python" or not HAVE_COMPILED:
    BACKEND = "python"
elif _FORCED in ("", "cython"):
    BACKEND = "cython"
else:
    raise ValueError(f"EPIOPT_KERNEL must be 'python' or 'cython', got {_FORCED!r}")

if BACKEND == "cython":
    ssa_objective = _ssa_cy.ssa_objective
    ssa_events = _ssa_cy.ssa_events
    rk4_forward = _ode_cy.rk4_forward
    rk4_adjoint = _ode_cy.rk4_adjoint
else:
    ssa_objective = _ssa_py.ssa_objective
    ssa_events = _ssa_py.ssa_events
    rk4_forward = _ode_py.rk4_forward
    rk4_adjoint = _ode_py.rk4_adjoint


def get_backend(name: str):
    """Explicit backend lookup, used by the benchmark and equivalence tests."""
    if name == "python":
        return _ssa_py, _ode_py
    if name == "cython":
        if not HAVE_COMPILED:
            raise ImportError("compiled kernels are not available")
        return _ssa_cy, _ode_cy
    raise ValueError(f"unknown backend {name!r}")
