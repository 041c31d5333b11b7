"""Dense tensor and tensor-train algebra.

Every flattening in this package uses one convention: the first index runs
fastest (column-major). ``vectorize`` maps element (i1, ..., id) of a tensor
with extents (k1, ..., kd) to linear position i1 + i2*k1 + i3*k1*k2 + ...
(0-based). The Kronecker-structured matrices built elsewhere rely on exactly
this ordering, so reshapes of tensor-train cores are column-major throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Dense reconstruction is an oracle/debug path; anything larger than this
# defeats the purpose of the train format.
DENSE_CAP = 10_000_000


def vectorize(a: np.ndarray) -> np.ndarray:
    """Flatten a tensor into a vector, first index fastest."""
    return np.asarray(a, dtype=float).reshape(-1, order="F")


def contract(a: np.ndarray, b: np.ndarray, axis_a: int, axis_b: int) -> np.ndarray:
    """Contract axis ``axis_a`` of ``a`` with axis ``axis_b`` of ``b``.

    The result carries a's remaining axes followed by b's remaining axes.
    Contracting singleton axes realizes the outer product.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not 0 <= axis_a < a.ndim:
        raise ValueError(f"axis {axis_a} out of range for tensor of order {a.ndim}")
    if not 0 <= axis_b < b.ndim:
        raise ValueError(f"axis {axis_b} out of range for tensor of order {b.ndim}")
    if a.shape[axis_a] != b.shape[axis_b]:
        raise ValueError(
            f"cannot contract extent {a.shape[axis_a]} (axis {axis_a}) "
            f"with extent {b.shape[axis_b]} (axis {axis_b})"
        )
    return np.tensordot(a, b, axes=(axis_a, axis_b))


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Sum of entry-wise products of two equal-shaped tensors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a.reshape(-1), b.reshape(-1)))


@dataclass(frozen=True, eq=False)
class TensorTrain:
    """Chain of third-order cores; core p has shape (r_{p-1}, k_p, r_p).

    Boundary ranks are one. ``canonical_site``, when set to s, asserts that
    cores left of s are left-orthogonal and cores right of s are
    right-orthogonal (the mixed-canonical form), so the represented tensor's
    norm sits entirely in core s.
    """

    cores: tuple[np.ndarray, ...]
    canonical_site: int | None = None

    def __post_init__(self):
        # Canonical memory layout so numerically identical trains evaluate
        # bit-identically regardless of how their cores were produced.
        cores = tuple(np.ascontiguousarray(c, dtype=float) for c in self.cores)
        object.__setattr__(self, "cores", cores)
        if not cores:
            raise ValueError("a tensor train needs at least one core")
        for p, core in enumerate(cores):
            if core.ndim != 3:
                raise ValueError(f"core {p} must be third-order, got shape {core.shape}")
        if cores[0].shape[0] != 1:
            raise ValueError(f"first rank must be 1, got {cores[0].shape[0]}")
        if cores[-1].shape[2] != 1:
            raise ValueError(f"last rank must be 1, got {cores[-1].shape[2]}")
        for p in range(len(cores) - 1):
            if cores[p].shape[2] != cores[p + 1].shape[0]:
                raise ValueError(
                    f"rank mismatch between cores {p} and {p + 1}: "
                    f"{cores[p].shape[2]} vs {cores[p + 1].shape[0]}"
                )
        if self.canonical_site is not None and not 0 <= self.canonical_site < len(cores):
            raise ValueError(f"canonical site {self.canonical_site} out of range")

    @property
    def order(self) -> int:
        return len(self.cores)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(core.shape[1] for core in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return (self.cores[0].shape[0],) + tuple(core.shape[2] for core in self.cores)

    @property
    def n_parameters(self) -> int:
        return int(sum(core.size for core in self.cores))


def tt_to_full(tt: TensorTrain, max_elements: int = DENSE_CAP) -> np.ndarray:
    """Contract all cores into the dense tensor the train represents."""
    n_elements = int(np.prod([float(k) for k in tt.shape]))
    if n_elements > max_elements:
        raise ValueError(
            f"dense tensor would hold {n_elements} elements, above the cap of {max_elements}"
        )
    out = tt.cores[0][0]  # (k1, r1)
    for core in tt.cores[1:]:
        out = np.tensordot(out, core, axes=(out.ndim - 1, 0))
    return out[..., 0]


def _normalize_rank_caps(max_ranks, d: int):
    if max_ranks is None:
        return None
    if np.isscalar(max_ranks):
        caps = [int(max_ranks)] * (d - 1)
    else:
        caps = [int(r) for r in max_ranks]
        if len(caps) != d - 1:
            raise ValueError(
                f"rank vector must list the {d - 1} interior ranks, got {len(caps)}"
            )
    if any(r < 1 for r in caps):
        raise ValueError("requested ranks must be positive")
    return caps


def tt_svd(
    a: np.ndarray,
    max_ranks=None,
    rel_tolerance: float | None = None,
) -> TensorTrain:
    """Decompose a dense tensor into a tensor train by successive SVDs.

    ``max_ranks`` caps the interior ranks (scalar broadcasts); alternatively
    ``rel_tolerance`` picks the minimal ranks meeting a relative Frobenius
    accuracy, distributing the budget as tol/sqrt(d-1) per unfolding. With
    neither, the decomposition is exact up to rounding. The returned train is
    canonical at the last core.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim < 1:
        raise ValueError("input must have at least one mode")
    d = a.ndim
    shape = a.shape
    if d == 1:
        return TensorTrain((a.reshape(1, -1, 1),), canonical_site=0)
    caps = _normalize_rank_caps(max_ranks, d)
    delta = None
    if rel_tolerance is not None:
        delta = float(rel_tolerance) * np.linalg.norm(a) / np.sqrt(d - 1)

    cores = []
    rem = a.reshape(-1, order="F")
    r_prev = 1
    for p in range(d - 1):
        k = shape[p]
        rem = rem.reshape(r_prev * k, -1, order="F")
        u, s, vt = np.linalg.svd(rem, full_matrices=False)
        # Numerical rank: exact decompositions do not carry zero directions.
        r = int(np.count_nonzero(s > s[0] * max(rem.shape) * np.finfo(float).eps)) if s.size else 1
        if delta is not None:
            tail = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]
            keep = np.nonzero(tail > delta)[0]
            r = int(keep[-1]) + 1 if keep.size else 1
        if caps is not None:
            r = min(r, caps[p])
        r = max(r, 1)
        cores.append(u[:, :r].reshape(r_prev, k, r, order="F"))
        rem = s[:r, None] * vt[:r, :]
        r_prev = r
    cores.append(rem.reshape(r_prev, shape[-1], 1, order="F"))
    return TensorTrain(tuple(cores), canonical_site=d - 1)


def _qr_fixed(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """QR with non-negative diagonal of R; factor shapes preserve m's width.

    For a wide input (rows < cols) the reduced factors are zero-padded so Q is
    (rows, cols) and R is (cols, cols). The pad columns of Q are zero: a wide
    unfolding cannot be an isometry, and the padding keeps the nominal bond
    size of the train intact while the dead directions carry exactly zero.
    """
    q, r = np.linalg.qr(m)
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    q = q * signs
    r = signs[:, None] * r
    rows, cols = m.shape
    t = q.shape[1]
    if t < cols:
        q = np.hstack([q, np.zeros((rows, cols - t))])
        r = np.vstack([r, np.zeros((cols - t, cols))])
    return q, r


def _split_core_right(core: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Factor a core into a left-orthogonal core and the matrix to push right."""
    r1, k, r2 = core.shape
    q, r = _qr_fixed(core.reshape(r1 * k, r2, order="F"))
    return q.reshape(r1, k, r2, order="F"), r


def _split_core_left(core: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Factor a core into a right-orthogonal core and the matrix to push left."""
    r1, k, r2 = core.shape
    q, r = _qr_fixed(core.reshape(r1, k * r2, order="F").T)
    return q.T.reshape(r1, k, r2, order="F"), r.T


def orthogonalize_to_site(tt: TensorTrain, site: int) -> TensorTrain:
    """Return an equal train in mixed-canonical form at ``site``."""
    if not 0 <= site < tt.order:
        raise ValueError(f"site {site} out of range for order {tt.order}")
    cores = list(tt.cores)
    for p in range(site):
        cores[p], r = _split_core_right(cores[p])
        cores[p + 1] = np.tensordot(r, cores[p + 1], axes=(1, 0))
    for p in range(tt.order - 1, site, -1):
        cores[p], l = _split_core_left(cores[p])
        cores[p - 1] = np.tensordot(cores[p - 1], l, axes=(2, 0))
    return TensorTrain(tuple(cores), canonical_site=site)


def shift_core(tt: TensorTrain, p: int, direction: str) -> TensorTrain:
    """Move the canonical site from core p to a neighbour via one QR step."""
    if tt.canonical_site != p:
        raise ValueError(
            f"train is canonical at {tt.canonical_site}, cannot shift from core {p}"
        )
    cores = list(tt.cores)
    if direction == "right":
        if p >= tt.order - 1:
            raise ValueError("cannot shift right past the last core")
        cores[p], r = _split_core_right(cores[p])
        cores[p + 1] = np.tensordot(r, cores[p + 1], axes=(1, 0))
        return TensorTrain(tuple(cores), canonical_site=p + 1)
    if direction == "left":
        if p <= 0:
            raise ValueError("cannot shift left past the first core")
        cores[p], l = _split_core_left(cores[p])
        cores[p - 1] = np.tensordot(cores[p - 1], l, axes=(2, 0))
        return TensorTrain(tuple(cores), canonical_site=p - 1)
    raise ValueError(f"direction must be 'left' or 'right', got {direction!r}")
