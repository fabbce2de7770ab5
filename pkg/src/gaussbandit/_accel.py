"""JIT selection for the hot kernels.

Set ``GAUSSBANDIT_PURE_NUMPY=1`` to run every kernel as plain numpy code
(no numba compilation). Both paths execute the same function bodies.
"""

import os

PURE_NUMPY = os.environ.get("GAUSSBANDIT_PURE_NUMPY", "").strip().lower() in {"1", "true", "yes", "on"}

if PURE_NUMPY:
    USING_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn

else:
    try:
        import numba

        USING_NUMBA = True

        def njit(*args, **kwargs):
            kwargs.setdefault("cache", True)
            if len(args) == 1 and callable(args[0]):
                return numba.njit(**kwargs)(args[0])
            return numba.njit(*args, **kwargs)

    except ImportError:  # pragma: no cover
        USING_NUMBA = False

        def njit(*args, **kwargs):
            if len(args) == 1 and callable(args[0]) and not kwargs:
                return args[0]
            return lambda fn: fn
