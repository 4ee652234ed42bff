"""Kernel backend selection.

The compiled Cython backend is used when available; the NumPy reference
backend is the fallback and the ground truth. Environment overrides:

* ``HELIMAG_KERNELS=python`` forces the NumPy backend.
* ``HELIMAG_THREADS=<n>`` caps kernel parallelism (Cython cellwise maps);
  default is the available core count.
"""

import os

from . import reference

_BACKEND = reference
_BACKEND_NAME = "numpy"

if os.environ.get("HELIMAG_KERNELS", "").lower() not in ("python", "numpy"):
    try:
        from . import _cyops  # noqa: F401

        _BACKEND = _cyops
        _BACKEND_NAME = "cython"
    except ImportError:
        pass


def thread_count() -> int:
    raw = os.environ.get("HELIMAG_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise ValueError(
                f"HELIMAG_THREADS must be a positive integer, got {raw!r}"
            ) from exc
        if n < 1:
            raise ValueError(f"HELIMAG_THREADS must be a positive integer, got {n}")
        return n
    return os.cpu_count() or 1


class _Dispatch:
    """Thin dispatcher so the backend stays swappable for tests."""

    def __init__(self, module, name):
        self.module = module
        self.name = name

    def exchange_dmi_field(self, m, lex, kappa, spacing):
        return self.module.exchange_dmi_field(
            m, lex, kappa, spacing, nthreads=thread_count()
        )

    def llg_rhs(self, m, heff, alpha):
        return self.module.llg_rhs(m, heff, alpha, nthreads=thread_count())

    def midpoint_velocity(self, m_mid, heff, alpha):
        return self.module.midpoint_velocity(
            m_mid, heff, alpha, nthreads=thread_count()
        )


_DISPATCH = _Dispatch(_BACKEND, _BACKEND_NAME)


def get_backend() -> _Dispatch:
    return _DISPATCH


def backend_name() -> str:
    return _DISPATCH.name
