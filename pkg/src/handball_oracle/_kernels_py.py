"""Pure numpy implementations of the numerical kernels.

Used when the compiled ``_kernels`` extension is unavailable, or when
``HANDBALL_ORACLE_PURE=1`` is set.  Every function here has the same
signature and semantics as its Cython twin in ``_kernels.pyx``.
"""
import numpy as np

EARTH_RADIUS_KM = 6371.0


def embed_gather(embedding, tokens):
    """Look up embedding rows for a (n, L) token matrix, flattened to (n, L*m)."""
    tokens = np.asarray(tokens, dtype=np.int64)
    n, length = tokens.shape
    return embedding[tokens].reshape(n, length * embedding.shape[1])


def embed_scatter_add(grad_flat, tokens, n_rows):
    """Accumulate (n, L*m) gradients back onto a (n_rows, m) embedding gradient.

    Rows are summed in sample-major, slot-minor order so the result is
    bit-identical to the compiled kernel.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    n, length = tokens.shape
    if length == 0:
        raise ValueError("tokens must have at least one slot")
    m = grad_flat.shape[1] // length
    out = np.zeros((n_rows, m), dtype=np.float64)
    np.add.at(out, tokens.ravel(), grad_flat.reshape(n * length, m))
    return out


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, step):
    """In-place Adam step on ``param`` with bias-corrected moments."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    param -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def haversine_many(lat1, lon1, lat2, lon2):
    """Great-circle distance in km between paired coordinate arrays (degrees)."""
    lat1 = np.radians(np.asarray(lat1, dtype=np.float64))
    lat2 = np.radians(np.asarray(lat2, dtype=np.float64))
    dlat = lat2 - lat1
    dlon = np.radians(np.asarray(lon2, dtype=np.float64) - np.asarray(lon1, dtype=np.float64))
    a = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    a = np.clip(a, 0.0, 1.0)
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(a))
