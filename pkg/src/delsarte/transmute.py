"""Triangular dressing operators on a grid.

Given a finite family of right solutions psi_1..psi_m and left solutions
phi_1..phi_m sampled on the nodes, the plus-side dressing operator is the
unit lower-triangular matrix

    (Omega_+ f)(x_i) = f(x_i) + sum_{j < i} K(x_i, x_j) f(x_j),
    K(x_i, x_j)      = - psi(x_i) W_i^{-1} phi(x_j)^* h rho_j,

where W_i = Omega_0 + h sum_{k < i} rho_k phi(x_k)^* psi(x_k) is the running
normalization accumulated strictly below the evaluation row.  The inverse
carries the same profile with the normalization taken inclusively at the
source column, V_j = W_{j+1}; the mismatch between the two cumulants
telescopes exactly, so Omega_+^{-1} is available in closed form with no
matrix inversion.  The minus-side operator mirrors the construction from the
right end of the grid.

A second constructor accepts a kernel Phi commuting with the operator and
routes through the chain factorization, which realizes both signs at once
with the diagonal normalizer D carried outside the Volterra kernels.

Independent of any family data, :func:`pair_intertwiner` builds the unique
strictly lower kernel intertwining two given tridiagonal operators by
marching the discrete characteristic recursion row by row; the defect of
that construction is confined to the last row, so the conjugated operator
reproduces the target's interior rows at roundoff level.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import (ConditionNumberError, DiscretizationError, GridError,
                     SingularKernelError)
from .factorize import ProjectorChain, TriangularPair, gk_factorize
from .grid_ops import Grid1D, OperatorMatrix
from .ioutil import load_matrix_csv, save_matrix_csv
from .spectral import SpectralKernel

__all__ = [
    "TransmutationData",
    "DelsarteOp",
    "build_kernel_Omega",
    "delsarte_apply",
    "delsarte_operator",
    "delsarte_inverse",
    "adjoint_operator",
    "pair_intertwiner",
    "transform_operator",
    "transform_family",
    "locality_check",
    "independence_check",
    "adjoint_compat_check",
    "save_transmutation",
    "load_transmutation",
]


def _as_matrix(A) -> np.ndarray:
    return A.A if isinstance(A, OperatorMatrix) else np.asarray(A)


# ---------------------------------------------------------------------------
# data container
# ---------------------------------------------------------------------------

@dataclass
class TransmutationData:
    """Everything needed to build the dressing operators.

    ``kind == "family"`` holds sampled solution families (rows = nodes);
    ``kind == "kernel"`` holds a commuting kernel Phi to be factorized.
    """

    kind: str
    L: np.ndarray
    grid: Grid1D | None = None
    right: np.ndarray | None = None
    left: np.ndarray | None = None
    weights: np.ndarray | None = None
    omega0: np.ndarray | None = None
    x0: float | None = None
    Phi: np.ndarray | None = None
    chain: ProjectorChain | None = None
    _prefix: np.ndarray | None = field(default=None, repr=False)
    _pair: TriangularPair | None = field(default=None, repr=False)

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_family(cls, grid: Grid1D, L, right, left, weights=None,
                    omega0=1.0, x0: float | None = None) -> "TransmutationData":
        right = np.atleast_2d(np.asarray(right, dtype=complex))
        left = np.atleast_2d(np.asarray(left, dtype=complex))
        if right.shape[0] == 1 and right.shape[1] == grid.n:
            right = right.T
        if left.shape[0] == 1 and left.shape[1] == grid.n:
            left = left.T
        if right.shape[0] != grid.n or left.shape != right.shape:
            raise DiscretizationError("family arrays must be (n_nodes, m)")
        m = right.shape[1]
        om = np.asarray(omega0, dtype=complex)
        if om.ndim == 0:
            om = np.eye(m, dtype=complex) * om
        if om.shape != (m, m):
            raise DiscretizationError("omega0 must be scalar or (m, m)")
        w = np.ones(grid.n) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (grid.n,):
            raise DiscretizationError("weights must be one value per node")
        if x0 is None:
            x0 = grid.a
        data = cls("family", _as_matrix(L), grid=grid, right=right, left=left,
                   weights=w, omega0=om, x0=float(x0))
        data._build_prefix()
        return data

    @classmethod
    def from_kernel(cls, L, Phi, chain: ProjectorChain | None = None,
                    grid: Grid1D | None = None) -> "TransmutationData":
        Lm = _as_matrix(L)
        Phi = np.asarray(Phi, dtype=complex)
        if Phi.shape != Lm.shape:
            raise DiscretizationError("kernel and operator dimensions differ")
        if chain is not None and tuple(chain.order) != tuple(range(Phi.shape[0])):
            raise DiscretizationError(
                "grid-ordered dressing uses the natural chain; run gk_factorize "
                "directly for a reordered chain")
        return cls("kernel", Lm, grid=grid, Phi=Phi, chain=chain)

    # -- family-side prefix cumulants ----------------------------------------

    def _build_prefix(self) -> None:
        """P[i] = Omega_0 + h sum_{k<i} rho_k phi_k^* psi_k, i = 0..n."""
        n, m = self.right.shape
        h = self.grid.h
        g = h * self.weights[:, None, None] * (
            np.conj(self.left)[:, :, None] * self.right[:, None, :])
        P = np.empty((n + 1, m, m), dtype=complex)
        P[0] = self.omega0
        np.cumsum(g, axis=0, out=P[1:])
        P[1:] += self.omega0
        smax = 0.0
        for i in range(n + 1):
            s = np.linalg.svd(P[i], compute_uv=False)
            smax = max(smax, s[0])
            if s[-1] <= 1e-12 * max(smax, 1.0):
                raise SingularKernelError(
                    f"running normalization W is singular at prefix length {i}")
        self._prefix = P

    def _reversed(self) -> "TransmutationData":
        """The same family walked from the right end (minus-side helper)."""
        return TransmutationData.from_family(
            self.grid, self.L[::-1, ::-1], self.right[::-1], self.left[::-1],
            self.weights[::-1], self.omega0, x0=self.grid.a)

    def factorization(self) -> TriangularPair:
        if self.kind != "kernel":
            raise DiscretizationError("no kernel to factorize on family data")
        if self._pair is None:
            self._pair = gk_factorize(self.Phi, self.chain)
        return self._pair


# ---------------------------------------------------------------------------
# the operators
# ---------------------------------------------------------------------------

@dataclass
class DelsarteOp:
    """1 + K with K strictly triangular, optionally led by a diagonal.

    ``kernel`` is strictly lower for sign "+" and strictly upper for "-";
    the full matrix is diag * (1 + kernel) when a diagonal normalizer is
    present (kernel-kind minus side), else 1 + kernel.  Because the kernel
    is exactly triangular its spectrum is its diagonal: identically zero.
    """

    sign: str
    kernel: np.ndarray
    grid: Grid1D | None = None
    x0: float | None = None
    diag: np.ndarray | None = None
    side: str = "direct"

    def matrix(self) -> np.ndarray:
        M = np.eye(self.kernel.shape[0], dtype=complex) + self.kernel
        if self.diag is not None:
            M = self.diag[:, None] * M
        return M

    def volterra_defect(self) -> float:
        """Largest eigenvalue modulus of the kernel.

        For an exactly triangular kernel the eigenvalues are the diagonal
        entries, so the defect is computed structurally; a kernel violating
        the triangular support falls back to a dense eigensolve.
        """
        K = self.kernel
        off = np.triu(K, 0) if self.sign == "+" else np.tril(K, 0)
        if np.count_nonzero(off) == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(K))))

    def cond(self) -> float:
        return float(np.linalg.cond(self.matrix()))


def build_kernel_Omega(data: TransmutationData, x: float,
                       x0: float | None = None) -> SpectralKernel:
    """Accumulated spectral kernel Omega_x = Omega_0 + h sum_{x0 < y <= x} ...

    The sum runs over grid nodes in the half-open window; when x < x0 the
    orientation flips sign through the cumulant difference.  At x = x0 the
    result is exactly Omega_0.
    """
    if data.kind != "family":
        raise DiscretizationError("spectral kernels need family data")
    g = data.grid
    if x0 is None:
        x0 = data.x0
    for t in (x, x0):
        if not (g.a - 1e-12 <= t <= g.b + 1e-12):
            raise GridError(f"evaluation point {t} outside [{g.a}, {g.b}]")
    cx = int(np.searchsorted(g.x, x, side="right"))
    c0 = int(np.searchsorted(g.x, x0, side="right"))
    P = data._prefix
    return SpectralKernel("SpectrumBySpectrum", data.omega0 + (P[cx] - P[c0]),
                          note=f"accumulated over ({x0}, {x}]")


def _family_dressed_rows(data: TransmutationData) -> np.ndarray:
    """u_i with u_i^T = psi(x_i) W_i^{-1}; rows of the dressed right family."""
    P = data._prefix
    n, m = data.right.shape
    U = np.empty((n, m), dtype=complex)
    for i in range(n):
        U[i] = np.linalg.solve(P[i].T, data.right[i])
    return U


def delsarte_apply(data: TransmutationData, f: np.ndarray, sign: str = "+") -> np.ndarray:
    """Apply 1 + K by streaming prefix sums (no dense kernel is formed)."""
    if data.kind != "family":
        M = delsarte_operator(data, sign).matrix()
        return M @ np.asarray(f, dtype=complex)
    if sign == "-":
        rev = data._reversed()
        return delsarte_apply(rev, np.asarray(f)[::-1], "+")[::-1]
    f = np.asarray(f, dtype=complex)
    h = data.grid.h
    U = _family_dressed_rows(data)
    moments = (h * data.weights * f)[:, None] * np.conj(data.left)  # (n, m)
    S = np.zeros_like(moments)
    np.cumsum(moments[:-1], axis=0, out=S[1:])  # strict prefix
    return f - np.einsum("im,im->i", U, S)


def delsarte_operator(data: TransmutationData, sign: str = "+") -> DelsarteOp:
    """Dense triangular dressing operator for the requested sign."""
    if data.kind == "kernel":
        pair = data.factorization()
        if sign == "+":
            return DelsarteOp("+", pair.K_plus, data.grid)
        return DelsarteOp("-", pair.K_minus, data.grid, diag=pair.D)
    if sign == "-":
        rev = data._reversed()
        op = delsarte_operator(rev, "+")
        return DelsarteOp("-", op.kernel[::-1, ::-1], data.grid, data.x0)
    h = data.grid.h
    U = _family_dressed_rows(data)
    C = np.conj(data.left) * (h * data.weights)[:, None]
    K = -np.tril(U @ C.T, -1)
    return DelsarteOp("+", K, data.grid, data.x0)


def delsarte_inverse(data: TransmutationData, sign: str = "+") -> DelsarteOp:
    """Closed-form inverse operator.

    Family data: the inverse kernel uses the inclusive cumulant V_j = W_{j+1}
    at the source column,  Khat(x_i, x_j) = + psi(x_i) V_j^{-1} phi(x_j)^* h rho_j,
    and (1+K)(1+Khat) = 1 telescopes exactly.  Kernel data: triangular solve.
    """
    if data.kind == "kernel":
        pair = data.factorization()
        n = pair.K_plus.shape[0]
        if sign == "+":
            Minv = scipy.linalg.solve_triangular(
                np.eye(n) + pair.K_plus, np.eye(n), lower=True, unit_diagonal=True)
            return DelsarteOp("+", Minv - np.eye(n), data.grid)
        B = scipy.linalg.solve_triangular(
            np.eye(n) + pair.K_minus, np.eye(n), lower=False, unit_diagonal=True)
        kern = (pair.D[:, None] * B) / pair.D[None, :] - np.eye(n)
        return DelsarteOp("-", kern, data.grid, diag=1.0 / pair.D)
    if sign == "-":
        rev = data._reversed()
        op = delsarte_inverse(rev, "+")
        return DelsarteOp("-", op.kernel[::-1, ::-1], data.grid, data.x0)
    P = data._prefix
    n, m = data.right.shape
    h = data.grid.h
    Wc = np.empty((n, m), dtype=complex)
    for j in range(n):
        Wc[j] = h * data.weights[j] * np.linalg.solve(P[j + 1], np.conj(data.left[j]))
    Khat = np.tril(data.right @ Wc.T, -1)
    return DelsarteOp("+", Khat, data.grid, data.x0)


def adjoint_operator(data: TransmutationData, sign: str = "+") -> DelsarteOp:
    """The dressing operator acting on the dual side.

    Built independently from the left family (or the adjoint kernel), it
    satisfies  Omega_adj = (Omega^{-1})^dagger,  so conjugating the adjoint
    operator with it reproduces the adjoint of the dressed operator.
    """
    if data.kind == "kernel":
        pair_adj = gk_factorize(data.Phi.conj().T, data.chain)
        if sign == "+":
            # (1+K_plus)^{-dagger} equals the unit-upper factor of Phi^dagger
            return DelsarteOp("-", pair_adj.K_minus, data.grid, side="adjoint")
        raise DiscretizationError("adjoint side is built for the plus factor")
    if sign != "+":
        raise DiscretizationError("adjoint side is built for the plus factor")
    P = data._prefix
    n, m = data.right.shape
    h = data.grid.h
    A = np.empty((n, m), dtype=complex)
    for i in range(n):
        A[i] = h * data.weights[i] * np.linalg.solve(np.conj(P[i + 1]), data.left[i])
    Kadj = np.triu(A @ np.conj(data.right).T, 1)
    return DelsarteOp("-", Kadj, data.grid, data.x0, side="adjoint")


# ---------------------------------------------------------------------------
# pair intertwiner: discrete characteristic marching
# ---------------------------------------------------------------------------

def _extract_tridiag(M: np.ndarray):
    n = M.shape[0]
    scale = float(np.max(np.abs(M)))
    band = float(np.abs(np.triu(M, 2)).max()) if n > 2 else 0.0
    band = max(band, float(np.abs(np.tril(M, -2)).max()) if n > 2 else 0.0)
    if band > 1e-12 * scale:
        raise DiscretizationError("pair intertwiner needs tridiagonal operators")
    sup = np.diagonal(M, 1)
    sub = np.diagonal(M, -1)
    c = -sup[0]
    if np.max(np.abs(sup + c)) > 1e-10 * abs(c) or np.max(np.abs(sub + c)) > 1e-10 * abs(c):
        raise DiscretizationError("pair intertwiner needs constant equal off-diagonals")
    return np.real(np.diagonal(M).copy()), complex(c)


def pair_intertwiner(L, Ltil, sign: str = "+", grid: Grid1D | None = None) -> DelsarteOp:
    """Strictly triangular K with (1 + K) L = Ltil (1 + K) on interior rows.

    Both operators must be tridiagonal with the same constant off-diagonal
    (the standard second-difference shape); they may differ in their
    diagonals, i.e. in the potential.  The kernel is marched row by row from
    the zero first row; each new row cancels one row of the intertwining
    defect, leaving all of it in the final row (first row for sign "-").
    """
    Lm = np.real(_as_matrix(L))
    Tm = np.real(_as_matrix(Ltil))
    if Lm.shape != Tm.shape:
        raise DiscretizationError("operator shapes differ")
    if sign == "-":
        op = pair_intertwiner(Lm[::-1, ::-1], Tm[::-1, ::-1], "+", grid)
        return DelsarteOp("-", op.kernel[::-1, ::-1], grid)
    dL, cL = _extract_tridiag(Lm)
    dT, cT = _extract_tridiag(Tm)
    if abs(cL - cT) > 1e-10 * abs(cL):
        raise DiscretizationError("off-diagonal scales differ between the pair")
    c = float(np.real(cL))
    n = Lm.shape[0]
    K = np.zeros((n, n))
    # K[i+1,j] = -K[i-1,j] + K[i,j-1] + K[i,j+1] + (dT_i - dL_j)/c K[i,j]
    #            + delta_{ij} (dT_i - dL_i)/c
    for i in range(n - 1):
        prev = K[i - 1] if i > 0 else np.zeros(n)
        cur = K[i]
        nxt = K[i + 1]
        if i > 0:
            j = np.arange(i)
            shift_left = np.zeros(i)
            shift_left[1:] = cur[:i - 1]
            nxt[:i] = -prev[:i] + shift_left + cur[1:i + 1] \
                + (dT[i] - dL[j]) / c * cur[:i]
        nxt[i] = cur[i - 1] if i > 0 else 0.0
        nxt[i] += (dT[i] - dL[i]) / c
    return DelsarteOp("+", K, grid)


# ---------------------------------------------------------------------------
# conjugation and diagnostics
# ---------------------------------------------------------------------------

def transform_operator(L, om: DelsarteOp, cond_guard: float = 1e10) -> OperatorMatrix:
    """Ltil = Omega L Omega^{-1}, computed by linear solves.

    Refuses (with :class:`ConditionNumberError`) factors whose condition
    number would erase more than the guard allows.
    """
    Lm = _as_matrix(L)
    M = om.matrix()
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > cond_guard:
        raise ConditionNumberError(
            f"conjugation by the {om.sign} factor rejected: cond = {cond:.3e} "
            f"exceeds guard {cond_guard:.1e}")
    Ltil = np.linalg.solve(M.T, (M @ Lm).T).T
    if isinstance(L, OperatorMatrix):
        return OperatorMatrix(Ltil, L.grid, None, L.boundary)
    return OperatorMatrix(Ltil)


def transform_family(ops: list, om: DelsarteOp, cond_guard: float = 1e10):
    """Conjugate a commuting family; returns (transformed list, worst ratio).

    The ratio is max over pairs of ||[Lt_i, Lt_j]||_F / (||Lt_i|| ||Lt_j||),
    which stays at the original family's level because conjugation is an
    algebra map.
    """
    outs = [transform_operator(Lk, om, cond_guard) for Lk in ops]
    worst = 0.0
    for i in range(len(outs)):
        for j in range(i + 1, len(outs)):
            Ai, Aj = outs[i].A, outs[j].A
            denom = np.linalg.norm(Ai) * np.linalg.norm(Aj)
            if denom > 0:
                worst = max(worst, float(np.linalg.norm(Ai @ Aj - Aj @ Ai) / denom))
    return outs, worst


def locality_check(Ltil, bandwidth: int, boundary_rows: int | None = None) -> float:
    """Relative off-band mass of the interior rows.

    Rows within ``boundary_rows`` of either end are excluded: the dressing
    necessarily dumps its defect there (last or first row) and the
    discretization truncates stencils there anyway.
    """
    A = _as_matrix(Ltil)
    n = A.shape[0]
    if boundary_rows is None:
        boundary_rows = bandwidth + 2
    rows = slice(boundary_rows, n - boundary_rows)
    sub = A[rows]
    mask = np.ones_like(sub, dtype=bool)
    r0 = boundary_rows
    for k, i in enumerate(range(r0, n - boundary_rows)):
        lo = max(0, i - bandwidth)
        hi = min(n, i + bandwidth + 1)
        mask[k, lo:hi] = False
    off = np.linalg.norm(sub[mask])
    return float(off / max(np.linalg.norm(sub), 1e-300))


def independence_check(data: TransmutationData):
    """(operator gap, commutation residual) between the two signs.

    The conjugations by Omega_plus and by Omega_minus agree exactly when
    Omega_plus^{-1} Omega_minus commutes with L; both deviations are
    returned so valid dressing data can be certified and generic data
    flagged.
    """
    Mp = delsarte_operator(data, "+").matrix()
    Mm = delsarte_operator(data, "-").matrix()
    L = data.L
    Ltp = np.linalg.solve(Mp.T, (Mp @ L).T).T
    Ltm = np.linalg.solve(Mm.T, (Mm @ L).T).T
    gap = float(np.linalg.norm(Ltp - Ltm) / max(np.linalg.norm(Ltp), 1e-300))
    X = np.linalg.solve(Mp, Mm)
    comm = float(np.linalg.norm(X @ L - L @ X)
                 / max(np.linalg.norm(X) * np.linalg.norm(L), 1e-300))
    return gap, comm


def adjoint_compat_check(data: TransmutationData) -> float:
    """|| (Omega L Omega^{-1})^dagger - Omega_adj L^dagger Omega_adj^{-1} ||_F / ||L||_F.

    Omega_adj is constructed independently from the swapped family (or the
    adjoint kernel), so agreement certifies that dressing and taking
    adjoints commute for this data.
    """
    L = data.L
    M = delsarte_operator(data, "+").matrix()
    Madj = adjoint_operator(data, "+").matrix()
    A = np.linalg.solve(M.T, (M @ L).T).T.conj().T
    B = np.linalg.solve(Madj.T, (Madj @ L.conj().T).T).T
    return float(np.linalg.norm(A - B) / max(np.linalg.norm(L), 1e-300))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_transmutation(data: TransmutationData, directory: str | Path,
                       name: str = "transmutation") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"kind": data.kind}
    if data.kind == "family":
        g = data.grid
        manifest["grid"] = {"a": g.a, "b": g.b, "n": g.n, "boundary": g.boundary}
        manifest["x0"] = data.x0
        for key, arr in (("right", data.right), ("left", data.left),
                         ("weights", data.weights), ("omega0", data.omega0),
                         ("L", data.L)):
            save_matrix_csv(directory / f"{name}_{key}.csv", arr)
            manifest[key] = f"{name}_{key}.csv"
        omega_at_base = build_kernel_Omega(data, data.x0)
        save_matrix_csv(directory / f"{name}_omega_x0.csv", omega_at_base.values)
        manifest["omega_x0"] = f"{name}_omega_x0.csv"
    else:
        for key, arr in (("Phi", data.Phi), ("L", data.L)):
            save_matrix_csv(directory / f"{name}_{key}.csv", arr)
            manifest[key] = f"{name}_{key}.csv"
    path = directory / f"{name}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_transmutation(manifest_path: str | Path) -> TransmutationData:
    manifest_path = Path(manifest_path)
    spec = json.loads(manifest_path.read_text(encoding="utf-8"))
    base = manifest_path.parent
    L = load_matrix_csv(base / spec["L"])
    if spec["kind"] == "family":
        gd = spec["grid"]
        grid = Grid1D(gd["a"], gd["b"], gd["n"], gd["boundary"])
        return TransmutationData.from_family(
            grid, L,
            load_matrix_csv(base / spec["right"]),
            load_matrix_csv(base / spec["left"]),
            np.real(load_matrix_csv(base / spec["weights"]).ravel()),
            load_matrix_csv(base / spec["omega0"]),
            x0=spec["x0"])
    return TransmutationData.from_kernel(L, load_matrix_csv(base / spec["Phi"]))
