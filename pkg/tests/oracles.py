"""Slow, obviously-correct reference implementations used by the tests."""
import numpy as np


def circulant(kernel: np.ndarray) -> np.ndarray:
    """Matrix C with C @ m.ravel() == (m circularly convolved with kernel).ravel()."""
    H, W = kernel.shape
    i, j = np.divmod(np.arange(H * W), W)  # output index (i, j) per row, input index per column
    return kernel[(i[:, None] - i[None, :]) % H, (j[:, None] - j[None, :]) % W]


def dense_ridge(kernel: np.ndarray, target: np.ndarray, lam: float) -> np.ndarray:
    """argmin_m ||m (*) kernel - target||^2 + lam ||m||^2 via the dense system."""
    C = circulant(kernel)
    if lam == 0:
        return np.linalg.solve(C, target.ravel()).reshape(kernel.shape)
    A = C.T @ C + lam * np.eye(C.shape[1])
    return np.linalg.solve(A, C.T @ target.ravel()).reshape(kernel.shape)


def direct_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    H, W = a.shape
    out = np.zeros((H, W))
    for i in range(H):
        for j in range(W):
            for p in range(H):
                for q in range(W):
                    out[i, j] += a[p, q] * b[(i - p) % H, (j - q) % W]
    return out


def direct_correlate(template: np.ndarray, search: np.ndarray) -> np.ndarray:
    """Sliding-window correlation, zero shift at (H//2, W//2), circular indexing."""
    if template.ndim == 2:
        template = template[..., None]
        search = search[..., None]
    h, w, _ = template.shape
    H, W, _ = search.shape
    top, left = (H - h) // 2, (W - w) // 2
    rows = (top + np.arange(h))
    cols = (left + np.arange(w))
    out = np.zeros((H, W))
    for r in range(H):
        for c in range(W):
            dr, dc = r - H // 2, c - W // 2
            window = search[np.ix_((rows + dr) % H, (cols + dc) % W)]
            out[r, c] = np.sum(template * window)
    return out


def ridge_pinv(D: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Ridge solution through the pseudo-inverse of the augmented system [D; sqrt(lam) I]."""
    V = D.shape[1]
    A = np.vstack([D, np.sqrt(lam) * np.eye(V)])
    b = np.concatenate([y, np.zeros(V)])
    return np.linalg.pinv(A) @ b
