"""Kernel backend selection.

The compiled extension (``ssaltplan._core``) and the pure-numpy module
(``ssaltplan._pycore``) expose the same three entry points:

* ``loglik_grad_natural``  - likelihood value and gradient,
* ``logpost_grad_z``       - log posterior in log-phi coordinates,
* ``run_nuts_chain``       - one full HMC chain.

The extension is preferred when importable; set ``SSALTPLAN_PURE=1`` to
force the fallback (used by the backend benchmark and parity tests).
"""

import os

from . import _pycore

if os.environ.get("SSALTPLAN_PURE", "").strip() not in ("", "0"):
    _impl = _pycore
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _pycore

BACKEND = _impl.BACKEND_NAME

loglik_grad_natural = _impl.loglik_grad_natural
logpost_grad_z = _impl.logpost_grad_z
run_nuts_chain = _impl.run_nuts_chain
