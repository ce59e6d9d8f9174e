"""Pure numpy versions of the kernels in ``_recursion.pyx``.

Same signatures and return conventions. The scheduling-weighted matrices
are formed per block of samples so that the Python loop only does one
matrix-vector product per step.
"""

import numpy as np

_BLOCK = 8192


def _run(A, B, K, C, D, u, mu, w, limit, feedback):
    T = u.shape[0]
    n = A.shape[1]
    ny = C.shape[0]
    out = np.zeros((T, ny))
    x = np.zeros(n)
    for start in range(0, T, _BLOCK):
        stop = min(start + _BLOCK, T)
        m = mu[start:stop]
        At = np.einsum("ti,ijk->tjk", m, A)
        Kt = np.einsum("ti,ijk->tjk", m, K)
        drive = np.einsum("ti,ijk,tk->tj", m, B, u[start:stop])
        direct = u[start:stop] @ D.T
        if not feedback:
            drive += np.einsum("tjk,tk->tj", Kt, w[start:stop])
            direct += w[start:stop]
        for j, t in enumerate(range(start, stop)):
            out[t] = C @ x + direct[j]
            if feedback:
                x = At[j] @ x + drive[j] + Kt[j] @ (w[t] - out[t])
            else:
                x = At[j] @ x + drive[j]
            if not np.all(np.abs(x) <= limit):
                return out, t
    return out, -1


def simulate(A, B, K, C, D, u, mu, v, limit):
    return _run(A, B, K, C, D, u, mu, v, limit, feedback=False)


def predict(A, B, K, C, D, u, mu, y, limit):
    return _run(A, B, K, C, D, u, mu, y, limit, feedback=True)
