"""Galerkin matrices on the truncated basis and their semigroups.

The advection matrix is the exact Galerkin truncation of u . grad: entries
are computed by convolving the finite velocity series with the basis in the
complex exponential basis (no collocation, no aliasing) and then rotated to
the real trigonometric basis by the unitary change of basis.  Because the
Galerkin compression of a skew-adjoint operator is skew-adjoint, B + B^T = 0
to machine precision, which is the backbone of every energy identity in this
package.

Dissipation is diagonal, -(|k|^2)^s per coefficient, and the generator of
the viscous dynamics  f' = -u.grad f + nu Delta^s f  is  A = -B + nu D.

Semigroup evaluation is dense (scaling-and-squaring ``expm``) up to
``DENSE_CAP`` rows and switches to Krylov-type action (``expm_multiply``)
above.  Norms and exponentials additionally exploit the invariant-subspace
block structure of A (connected components of the sparsity pattern): shear
generators decouple by x-wavenumber, the sin(x)sin(y) cellular generator by
the parity of k1 + k2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import LinearOperator, eigsh, expm_multiply

from .fields import FourierField, mode_table
from .flows import Flow

__all__ = [
    "OperatorMatrix",
    "DENSE_CAP",
    "advection_matrix",
    "dissipation_matrix",
    "generator",
    "semigroup_apply",
    "semigroup_norm",
    "invariant_blocks",
    "write_operator_triplets",
]

# Dense linear algebra (expm, Schur, SVD) is used up to this dimension;
# above it, matrix functions are evaluated by Krylov-type actions.
DENSE_CAP = 4000


@dataclass(frozen=True)
class OperatorMatrix:
    """Matrix of a linear operator on the canonical coefficient ordering.

    ``matrix`` is a dense ndarray for dimensions up to DENSE_CAP and a CSR
    sparse matrix above.  ``nu`` and ``s`` are populated for generators
    (and ``s`` for dissipation matrices).
    """

    N: int
    kind: str                       # 'advection' | 'dissipation' | 'generator'
    matrix: object = field(repr=False)
    nu: float | None = None
    s: float | None = None

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else self.matrix

    def sparse(self) -> sp.csr_matrix:
        return self.matrix if self.is_sparse else sp.csr_matrix(self.matrix)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ vec


def _pack(N: int, kind: str, coo: sp.coo_matrix, **meta) -> OperatorMatrix:
    n = coo.shape[0]
    matrix = coo.toarray() if n <= DENSE_CAP else coo.tocsr()
    return OperatorMatrix(N=N, kind=kind, matrix=matrix, **meta)


@lru_cache(maxsize=None)
def _complex_index(N: int) -> dict:
    """Enumerate the full nonzero lattice |k|_inf <= N (internal)."""
    modes = [(k1, k2) for k1 in range(-N, N + 1) for k2 in range(-N, N + 1)
             if (k1, k2) != (0, 0)]
    return {m: i for i, m in enumerate(modes)}


@lru_cache(maxsize=None)
def _real_to_complex(N: int) -> sp.csc_matrix:
    """Unitary map V: real canonical coefficients -> complex lattice coefficients."""
    table = mode_table(N)
    cidx = _complex_index(N)
    n = table.size
    rows, cols, vals = [], [], []
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for i in range(n):
        k = (int(table.k1[i]), int(table.k2[i]))
        mk = (-k[0], -k[1])
        if table.parity[i] == 0:  # cosine: z_k = a/sqrt2 on both k and -k
            rows += [cidx[k], cidx[mk]]
            cols += [i, i]
            vals += [inv_sqrt2, inv_sqrt2]
        else:  # sine: z_k = -i b/sqrt2, z_{-k} = +i b/sqrt2
            rows += [cidx[k], cidx[mk]]
            cols += [i, i]
            vals += [-1j * inv_sqrt2, 1j * inv_sqrt2]
    return sp.csc_matrix(
        sp.coo_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex)
    )


def advection_matrix(flow: Flow | None, N: int) -> OperatorMatrix:
    """Exact Galerkin matrix B of u . grad on the truncated real basis.

    ``flow=None`` means u = 0 and yields the zero matrix.  Velocity support
    must satisfy max wavenumber <= 2 N; modes advected beyond the truncation
    are dropped (pure Galerkin projection), which preserves skew-symmetry.
    """
    table = mode_table(N)
    n = table.size
    if flow is None:
        return _pack(N, "advection", sp.coo_matrix((n, n)))
    if flow.max_wavenumber > 2 * N:
        raise ValueError(
            f"velocity support {flow.max_wavenumber} exceeds 2N = {2 * N}"
        )
    cidx = _complex_index(N)
    rows, cols, vals = [], [], []
    for (m1, m2), (a1, a2) in flow.velocity.items():
        for (k1, k2), j in cidx.items():
            t1, t2 = k1 + m1, k2 + m2
            if (t1, t2) == (0, 0) or abs(t1) > N or abs(t2) > N:
                continue
            # u . grad e_k = i (k . uhat_m) e_{k+m}
            vals.append(1j * (k1 * a1 + k2 * a2))
            rows.append(cidx[(t1, t2)])
            cols.append(j)
    Bc = sp.coo_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex).tocsr()
    V = _real_to_complex(N)
    Br = (V.getH() @ (Bc @ V)).tocoo()
    imag_max = np.max(np.abs(Br.data.imag)) if Br.nnz else 0.0
    if imag_max > 1e-12:
        raise AssertionError(f"advection matrix not real: max imag {imag_max}")
    Br = sp.coo_matrix((Br.data.real, (Br.row, Br.col)), shape=(n, n))
    # exact zeros can survive as stored entries after the basis rotation
    Br.eliminate_zeros()
    return _pack(N, "advection", Br)


def dissipation_matrix(N: int, s: float = 1.0) -> OperatorMatrix:
    """Diagonal dissipation: entry -(k1^2 + k2^2)^s per coefficient."""
    if s <= 0:
        raise ValueError("fractional order s must be positive")
    lam = mode_table(N).lam.astype(float)
    diag = -(lam**s)
    return _pack(N, "dissipation", sp.coo_matrix(sp.diags(diag)), s=float(s))


def generator(flow: Flow | None, nu: float, N: int, s: float = 1.0) -> OperatorMatrix:
    """Generator A = -B + nu * D of f' = -u.grad f - nu (-Delta)^s f."""
    if nu < 0:
        raise ValueError("diffusivity nu must be >= 0")
    B = advection_matrix(flow, N)
    D = dissipation_matrix(N, s)
    A = -B.sparse() + float(nu) * D.sparse()
    return _pack(N, "generator", A.tocoo(), nu=float(nu), s=float(s))


# ---------------------------------------------------------------------------
# Block structure
# ---------------------------------------------------------------------------


def invariant_blocks(op: OperatorMatrix) -> list[np.ndarray]:
    """Index sets of the invariant coordinate subspaces of ``op``.

    Connected components of the symmetrized sparsity pattern.  The matrix is
    block-diagonal with respect to the returned index sets (each sorted
    ascending); isolated coordinates appear as singleton blocks.
    """
    A = op.sparse()
    pattern = (abs(A) + abs(A.T)) > 0
    ncomp, labels = connected_components(pattern, directed=False)
    blocks = [np.flatnonzero(labels == c) for c in range(ncomp)]
    blocks.sort(key=lambda b: (len(b), int(b[0])))
    return blocks


def _check_semigroup_time(op: OperatorMatrix, t: float) -> None:
    if op.kind == "generator" and (op.nu or 0.0) > 0.0 and t < 0:
        raise ValueError("negative time requires nu = 0 (dissipation is irreversible)")


def semigroup_apply(op: OperatorMatrix, t: float, f: FourierField) -> FourierField:
    """Evaluate exp(t A) f.

    Negative times are allowed only for time-reversible dynamics (advection
    matrices, or generators with nu = 0).
    """
    if f.N != op.N:
        raise ValueError("field truncation does not match operator truncation")
    _check_semigroup_time(op, t)
    if t == 0.0:
        return f
    if not op.is_sparse:
        out = sla.expm(t * op.matrix) @ f.coeffs
    else:
        out = expm_multiply(op.matrix * t, f.coeffs)
    return FourierField(f.N, out)


def propagator(op: OperatorMatrix, t: float) -> np.ndarray:
    """Dense exp(t A); dimension-capped (used by exact samplers and oracles)."""
    _check_semigroup_time(op, t)
    n = op.shape[0]
    if n > DENSE_CAP:
        raise ValueError(f"dense propagator limited to dimension {DENSE_CAP}, got {n}")
    return sla.expm(t * op.dense())


def _dense_norm(A: np.ndarray, t: float) -> float:
    return float(sla.svdvals(sla.expm(t * A))[0])


def _krylov_norm(A: sp.csr_matrix, t: float, tol: float = 1e-8) -> float:
    """Largest singular value of exp(tA) via Lanczos on exp(tA) exp(tA)^T."""
    n = A.shape[0]
    At = (A * t).tocsr()
    AtT = At.T.tocsr()

    def matvec(v):
        w = expm_multiply(AtT, v)
        return expm_multiply(At, w)

    M = LinearOperator((n, n), matvec=matvec, dtype=float)
    lam = eigsh(M, k=1, which="LA", tol=tol * 1e-1, return_eigenvectors=False)
    return float(math.sqrt(max(lam[0], 0.0)))


def semigroup_norm(op: OperatorMatrix, t: float) -> float:
    """Operator norm ||exp(t A)||_{L2 -> L2} at relative accuracy ~1e-8.

    Decomposes into invariant blocks first; each block uses a dense SVD when
    it fits under DENSE_CAP and a Lanczos iteration on exp(tA) exp(tA)^T
    otherwise.
    """
    if t < 0:
        raise ValueError("semigroup norm defined for t >= 0")
    if t == 0.0:
        return 1.0
    blocks = invariant_blocks(op)
    A = op.sparse()
    best = 0.0
    for idx in blocks:
        if len(idx) == 1:
            a = A[idx[0], idx[0]]
            best = max(best, math.exp(t * a))
            continue
        sub = A[np.ix_(idx, idx)]
        if len(idx) <= DENSE_CAP:
            best = max(best, _dense_norm(sub.toarray(), t))
        else:
            best = max(best, _krylov_norm(sub.tocsr(), t))
    return best


def write_operator_triplets(op: OperatorMatrix, path_or_file) -> None:
    """Plain 'i j value' triplet dump (debugging aid)."""
    coo = sp.coo_matrix(op.sparse())
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w") if own else path_or_file
    try:
        fh.write(f"# torusmix operator v1 kind={op.kind} N={op.N} shape={coo.shape[0]}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")
    finally:
        if own:
            fh.close()
