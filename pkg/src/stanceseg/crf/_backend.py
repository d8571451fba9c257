"""Kernel backend selection.

The compiled extension is preferred; set ``STANCESEG_PURE_PYTHON=1`` to
force the numpy fallback.  The compiled sum-product kernels call scalar
``exp`` once per (tag, tag) pair, which loses to numpy's vectorized exp
for large tag sets, so above ``EXP_KERNEL_MAX_TAGS`` tags those three
kernels are routed to numpy.  Viterbi stays compiled at every size.
"""

import os

from . import _pykernels

EXP_KERNEL_MAX_TAGS = 64


class _SizeDispatch:
    def __init__(self, compiled, fallback, max_tags=EXP_KERNEL_MAX_TAGS):
        self.compiled = compiled
        self.fallback = fallback
        self.max_tags = max_tags
        self.viterbi = compiled.viterbi

    def _pick(self, em):
        return self.compiled if em.shape[1] <= self.max_tags else self.fallback

    def forward(self, em, trans, start, end):
        return self._pick(em).forward(em, trans, start, end)

    def backward(self, em, trans, end):
        return self._pick(em).backward(em, trans, end)

    def pair_marginal_sum(self, em, trans, alpha, beta, log_z):
        return self._pick(em).pair_marginal_sum(em, trans, alpha, beta, log_z)


def available_backends():
    names = {"python": _pykernels}
    try:
        from . import _ckernels

        names["cython"] = _ckernels
    except ImportError:
        pass
    return names


try:
    if os.environ.get("STANCESEG_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend requested")
    from . import _ckernels

    kernels = _SizeDispatch(_ckernels, _pykernels)
    BACKEND = "cython"
except ImportError:
    kernels = _pykernels
    BACKEND = "python"
