"""Acceptance suite: one function per shipped guarantee.

Each criterion returns a list of result rows; a row is a dict with the
measured value, the threshold it is held against, the comparison direction,
and the verdict.  ``run_all`` concatenates every criterion; the CLI verify
command runs the same suite (minus the determinism criterion, which itself
invokes the CLI twice and compares report digests).
"""

from __future__ import annotations

import math
import tempfile
from pathlib import Path

import numpy as np
import scipy.linalg

from .darboux import DressingSeed, SchrodingerOp, darboux_once
from .derham import (d_L, expected_betti, flat_complex, flat_dimension,
                     harmonic_space, hodge_decompose, plain_complex,
                     skrypnik_map)
from .errors import SingularMinorError
from .factorize import (break_relation_defect, gk_factorize, glm_residual,
                        glm_solve, random_unit_minor)
from .grid_ops import DiffOp, Grid1D, ProductGrid
from .lagrange import FormField, SurfaceRegion, divergence_residual
from .spectral import (congruence_residual, eigensolve, elementary_kernel,
                       kernel_from_measure, projection_measure)
from .transmute import (TransmutationData, adjoint_operator, delsarte_inverse,
                        delsarte_operator, locality_check, pair_intertwiner,
                        transform_operator)

__all__ = ["run_all"] + [f"criterion_{k}" for k in range(1, 10)]


def _row(name: str, value: float, threshold: float, direction: str = "max") -> dict:
    value = float(value)
    if direction == "max":
        passed = value <= threshold
    elif direction == "min":
        passed = value >= threshold
    else:  # "eq": integer-valued checks
        passed = value == threshold
    return {"name": name, "value": value, "threshold": float(threshold),
            "direction": direction, "passed": bool(passed)}


# ---------------------------------------------------------------------------
# 1. divergence identity convergence
# ---------------------------------------------------------------------------

def criterion_1() -> list:
    """Interior residual of the divergence identity decays at order >= 1.8."""
    ns = (100, 200, 400)
    res = []
    for n in ns:
        g = Grid1D.periodic(0.0, 2.0 * math.pi, n)
        pg = ProductGrid.line(g)
        x = g.x
        op = DiffOp(pg, {(2,): -1.0, (0,): np.cos(x).astype(complex)})
        phi = np.exp(0.3 * np.sin(x)) + 0.2j * np.cos(2.0 * x)
        psi = np.cos(x) + 0.5 * np.sin(2.0 * x) + 0.1j * np.exp(np.cos(x))
        rep = divergence_residual(op, phi, psi, scheme_order=2)
        res.append(rep["interior_max"])
    slope = np.polyfit(np.log(np.asarray(ns, dtype=float)), np.log(res), 1)[0]
    return [_row("lagrange_identity_order", -slope, 1.8, "min")]


# ---------------------------------------------------------------------------
# 2. one-soliton dressing end to end
# ---------------------------------------------------------------------------

def _soliton_pair(n: int, half_width: float = 20.0):
    g = Grid1D.dirichlet(-half_width, half_width, n)
    base = SchrodingerOp.free(g)
    seed = DressingSeed.hyperbolic(g, 1.0, "even")
    dressed = darboux_once(base, seed)
    L = np.real(base.matrix().A)
    T = np.real(dressed.operator.matrix().A)
    return g, L, T


def criterion_2() -> list:
    g, L, T = _soliton_pair(400)
    om = pair_intertwiner(L, T, "+", grid=g)
    M = om.matrix()
    # the dressing kernel's dynamic range puts cond(M) near 8e10 on this
    # domain; the conjugation stays accurate because M is unit triangular
    Ltil = transform_operator(L, om, cond_guard=1e12).A
    n = g.n
    # the marching closure dumps its whole defect into the final row
    err_rows = float(np.max(np.abs(Ltil[: n - 1] - T[: n - 1])))
    loc = locality_check(Ltil, bandwidth=1)
    E = M @ L - T @ M
    inter = float(np.linalg.norm(E[: n - 1])
                  / (np.linalg.norm(M) * np.linalg.norm(L)))
    return [
        _row("soliton_interior_rows_match", err_rows, 1e-6),
        _row("soliton_offband_ratio", loc, 1e-6),
        _row("soliton_intertwining_residual", inter, 1e-9),
    ]


# ---------------------------------------------------------------------------
# 3. spectral bookkeeping of the dressing
# ---------------------------------------------------------------------------

def _tridiag_eigs(A: np.ndarray) -> np.ndarray:
    return scipy.linalg.eigh_tridiagonal(np.diag(A).copy(),
                                         np.diag(A, 1).copy(),
                                         eigvals_only=True)


def criterion_3() -> list:
    # preservation is checked where the conjugation is well conditioned;
    # the seed grows like e^{|x|}, so a narrower box keeps cond(M) ~ 1e5
    g, L, T = _soliton_pair(800, half_width=8.0)
    om = pair_intertwiner(L, T, "+", grid=g)
    Ltil = transform_operator(L, om).A
    ev_L = np.sort(_tridiag_eigs(L))
    ev_c = np.asarray(sorted(scipy.linalg.eigvals(Ltil), key=lambda z: z.real))
    radius = float(np.max(np.abs(ev_L)))
    preserve = float(np.max(np.abs(ev_c - ev_L)) / radius)

    ev_T = np.sort(_tridiag_eigs(T))
    negatives = ev_T[ev_T < -2.5e-3]
    n_new = float(len(negatives))
    # finite sentinel: report JSON forbids inf/nan
    bound_err = float(abs(negatives[0] + 1.0)) if len(negatives) else 1e300

    # positive-band drift: same spacing, doubled domain
    drifts = []
    for n, w in ((400, 20.0), (800, 40.0)):
        _, Lb, Tb = _soliton_pair(n, w)
        pb = _tridiag_eigs(Lb)
        pa = _tridiag_eigs(Tb)
        pb = np.sort(pb[pb > 0.0])[:8]
        pa = np.sort(pa[pa > 0.0])[:8]
        m = min(len(pa), len(pb))
        drifts.append(float(np.mean(np.abs(pa[:m] - pb[:m]))))
    shrink = drifts[1] / max(drifts[0], 1e-300)
    return [
        _row("conjugation_spectrum_preserved", preserve, 1e-10),
        _row("dressing_new_negative_count", n_new, 1.0, "eq"),
        _row("dressing_bound_state_error", bound_err, 5e-3),
        _row("band_drift_domain_doubling", shrink, 0.75),
    ]


# ---------------------------------------------------------------------------
# 4. triangular factorization at scale
# ---------------------------------------------------------------------------

def criterion_4(seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    worst_resid = 0.0
    worst_diag = 0.0
    structural = 0.0
    for _ in range(200):
        Phi = random_unit_minor(50, rng)
        pair = gk_factorize(Phi)
        worst_resid = max(worst_resid, pair.residual)
        if np.count_nonzero(np.triu(pair.K_plus, 0)) \
                or np.count_nonzero(np.tril(pair.K_minus, 0)):
            structural = 1.0
        worst_diag = max(worst_diag,
                         break_relation_defect(pair.K_plus),
                         break_relation_defect(pair.K_minus))
    # negative controls: first bad minor must be named exactly
    control = 0.0
    try:
        gk_factorize(np.array([[-1.0, 0.0], [0.0, 0.0]]))
        control = 1.0
    except SingularMinorError as exc:
        if exc.index != 1:
            control = 1.0
    Lr = np.eye(6) + np.tril(rng.normal(size=(6, 6)), -1)
    Ur = np.eye(6) + np.triu(rng.normal(size=(6, 6)), 1)
    d = np.ones(6)
    d[3] = 0.0
    M_bad = Lr @ np.diag(d) @ Ur
    try:
        gk_factorize(M_bad - np.eye(6))
        control = 1.0
    except SingularMinorError as exc:
        if exc.index != 4:
            control = 1.0
    return [
        _row("gk_reconstruction_residual", worst_resid, 1e-10),
        _row("gk_structural_zeros_exact", structural, 0.0),
        _row("gk_break_relation_exact", worst_diag, 0.0),
        _row("gk_singular_minor_index", control, 0.0),
    ]


# ---------------------------------------------------------------------------
# 5. GLM equation against the elimination route
# ---------------------------------------------------------------------------

def criterion_5(seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    worst_res = 0.0
    worst_gap = 0.0
    for _ in range(200):
        Phi = random_unit_minor(50, rng)
        K_plus, K_minus = glm_solve(Phi)
        worst_res = max(worst_res, glm_residual(Phi, K_plus, K_minus))
        pair = gk_factorize(Phi)
        worst_gap = max(worst_gap, float(np.max(np.abs(K_plus - pair.K_plus))))
    Phi0 = np.array([[0.0, 1.0], [1.0, 1.0]])
    Kp0, Km0 = glm_solve(Phi0)
    exact = 0.0
    if not np.array_equal(Kp0, np.array([[0.0, 0.0], [-1.0, 0.0]])):
        exact = 1.0
    if not np.array_equal(Km0, np.array([[0.0, 1.0], [0.0, 0.0]])):
        exact = 1.0
    pair0 = gk_factorize(Phi0)
    if not (np.array_equal(pair0.K_plus, Kp0) and np.array_equal(pair0.D, np.ones(2))):
        exact = 1.0
    return [
        _row("glm_residual", worst_res, 1e-10),
        _row("glm_vs_gk_agreement", worst_gap, 1e-9),
        _row("glm_2x2_example_bitwise", exact, 0.0),
    ]


# ---------------------------------------------------------------------------
# 6. congruence / spectral-kernel layer
# ---------------------------------------------------------------------------

def criterion_6() -> list:
    g = Grid1D.dirichlet(0.0, math.pi, 200)
    A = np.real(SchrodingerOp.free(g).matrix().A)
    fam = eigensolve(A, hermitian=True)
    E1 = projection_measure(fam, lambda lam: lam.real < 1e4)
    E2 = projection_measure(fam, lambda lam: lam.real > 3e3)
    E12 = projection_measure(fam, lambda lam: 3e3 < lam.real < 1e4)
    mult = float(np.linalg.norm(E1 @ E2 - E12) / max(np.linalg.norm(E12), 1e-300))

    lam5 = complex(fam.lambdas[5])
    Z = elementary_kernel(fam, lam5)
    cong = float(np.linalg.norm(A @ Z - lam5 * Z)
                 / (np.linalg.norm(Z) * np.linalg.norm(A, 2)))
    comm = congruence_residual(Z, A, A)

    K = kernel_from_measure(fam, lambda lam: 1.0 / (1.0 + lam))
    kfm_comm = congruence_residual(K, A, A)

    t = 1e-3
    Kt = kernel_from_measure(fam, lambda lam: np.exp(-t * lam)).values
    Et = scipy.linalg.expm(-t * A)
    heat = float(np.linalg.norm(Kt - Et) / np.linalg.norm(Et))
    return [
        _row("measure_multiplicativity", mult, 1e-10),
        _row("elementary_kernel_congruence", cong, 1e-10),
        _row("elementary_kernel_commutation", comm, 1e-10),
        _row("kernel_from_measure_commutation", kfm_comm, 1e-10),
        _row("heat_kernel_vs_expm", heat, 1e-9),
    ]


# ---------------------------------------------------------------------------
# 7. de Rham / Hodge / period layer
# ---------------------------------------------------------------------------

def criterion_7(seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    T1, T2 = 2.0 * math.pi, 1.0
    pg = ProductGrid((Grid1D.periodic(0.0, T1, 12), Grid1D.periodic(0.0, T2, 12)))
    c = plain_complex(pg)
    d0, d1 = c.d_matrix(0), c.d_matrix(1)
    nil = float(np.linalg.norm(d1 @ d0)
                / max(np.linalg.norm(d1) * np.linalg.norm(d0), 1e-300))

    dims = []
    gaps = []
    for k in range(3):
        rep = harmonic_space(c, k)
        dims.append(rep.dim)
        gaps.append(min(rep.gap, 1e300))  # report JSON forbids inf
    dims_ok = 0.0 if tuple(dims) == (1, 2, 1) else 1.0

    shp = pg.shape + (1,)
    beta = FormField(pg, 1, {(0,): rng.normal(size=shp), (1,): rng.normal(size=shp)})
    h, e, co = hodge_decompose(c, beta)
    vols = pg.vol
    parts = [h.stack(), e.stack(), co.stack()]
    scale = vols * float(np.vdot(beta.stack(), beta.stack()).real)
    orth = max(abs(vols * np.vdot(parts[0], parts[1])),
               abs(vols * np.vdot(parts[0], parts[2])),
               abs(vols * np.vdot(parts[1], parts[2]))) / scale
    recon = float(np.linalg.norm(beta.stack() - (parts[0] + parts[1] + parts[2]))
                  / np.linalg.norm(beta.stack()))

    ones = np.ones(shp, dtype=complex)
    psi1 = FormField(pg, 1, {(0,): np.ones(shp)})
    psi2 = FormField(pg, 1, {(1,): np.ones(shp)})
    loops = [SurfaceRegion.axis_loop(pg, 0, (0, 0)),
             SurfaceRegion.axis_loop(pg, 1, (0, 0))]
    P = skrypnik_map(c, ones, [psi1, psi2], loops)
    per = float(np.max(np.abs(P - np.diag([T1, T2]))))

    f0 = FormField(pg, 0, {(): rng.normal(size=shp)})
    psi_mixed = psi1 + d_L(c, f0)
    loop_a = SurfaceRegion.axis_loop(pg, 0, (0, 0))
    loop_b = SurfaceRegion.axis_loop(pg, 0, (0, 5))
    Ph = skrypnik_map(c, ones, [psi_mixed], [loop_a, loop_b])
    homol = float(abs(Ph[0, 0] - Ph[1, 0]) / T1)

    # flat family: harmonic dims = (joint kernel dim) x (Betti numbers)
    pg2 = ProductGrid((Grid1D.periodic(0.0, T1, 8), Grid1D.periodic(0.0, T2, 8)),
                      fiber_dim=2)
    gens = [np.diag([0.0, 0.7]), np.diag([0.0, 0.31])]
    c2 = flat_complex(pg2, gens)
    nflat = flat_dimension(gens)
    betti = expected_betti(pg2)
    theorem = 0.0
    for k in range(3):
        rep = harmonic_space(c2, k)
        Dk = c2.d_matrix(k) if k < 2 else None
        Dm = c2.d_matrix(k - 1) if k > 0 else None
        blocks = [B for B in
                  (Dk, None if Dm is None else Dm.conj().T) if B is not None]
        stacked = np.vstack(blocks)
        s = np.linalg.svd(stacked, compute_uv=False)
        ncols = stacked.shape[1]
        brute = int(np.sum(s <= 1e-8 * s[0])) + max(0, ncols - len(s))
        if not rep.dim == brute == nflat * betti[k]:
            theorem = 1.0
    return [
        _row("dL_squared_zero", nil, 1e-12),
        _row("torus_harmonic_dims", dims_ok, 0.0),
        _row("torus_harmonic_gap", min(gaps), 1e4, "min"),
        _row("hodge_orthogonality", orth, 1e-10),
        _row("hodge_reconstruction", recon, 1e-10),
        _row("torus_period_matrix", per, 1e-10),
        _row("homologous_cycle_invariance", homol, 1e-10),
        _row("flat_dimension_theorem", theorem, 0.0),
    ]


# ---------------------------------------------------------------------------
# 8. Volterra property of every constructed kernel
# ---------------------------------------------------------------------------

def criterion_8(seed: int = 0) -> list:
    g = Grid1D.dirichlet(0.0, math.pi, 60)
    A = np.real(SchrodingerOp.free(g).matrix().A)
    fam = eigensolve(A, count=3, hermitian=True)
    data = TransmutationData.from_family(
        g, A, fam.right, fam.left, omega0=1.0)
    ops = [
        delsarte_operator(data, "+"), delsarte_operator(data, "-"),
        delsarte_inverse(data, "+"), delsarte_inverse(data, "-"),
        adjoint_operator(data, "+"),
    ]
    full = eigensolve(A, hermitian=True)
    Phi = kernel_from_measure(full, lambda lam: 0.4 / (1.0 + abs(lam))).values
    datak = TransmutationData.from_kernel(A, Phi)
    ops += [
        delsarte_operator(datak, "+"), delsarte_operator(datak, "-"),
        delsarte_inverse(datak, "+"), delsarte_inverse(datak, "-"),
    ]
    _, L2, T2 = _soliton_pair(200)
    ops.append(pair_intertwiner(L2, T2, "+"))
    ops.append(pair_intertwiner(L2, T2, "-"))
    worst = 0.0
    for op in ops:
        scale = max(float(np.linalg.norm(op.kernel)), 1e-300)
        worst = max(worst, op.volterra_defect() / scale)
    return [_row("volterra_eigenvalue_bound", worst, 1e-10)]


# ---------------------------------------------------------------------------
# 9. determinism of the verify pipeline
# ---------------------------------------------------------------------------

def criterion_9(seed: int = 0) -> list:
    from .cli import cmd_verify  # deferred: cli imports this module
    digests = []
    for _ in range(2):
        with tempfile.TemporaryDirectory() as tmp:
            report = cmd_verify({"command": "verify", "tolerance_scale": 1.0},
                                Path(tmp), seed=seed)
            digests.append(report["digest"])
    same = 0.0 if digests[0] == digests[1] else 1.0
    return [_row("verify_report_determinism", same, 0.0)]


# ---------------------------------------------------------------------------

def run_all(seed: int = 0, include_determinism: bool = True) -> dict:
    rows = []
    rows += criterion_1()
    rows += criterion_2()
    rows += criterion_3()
    rows += criterion_4(seed)
    rows += criterion_5(seed)
    rows += criterion_6()
    rows += criterion_7(seed)
    rows += criterion_8(seed)
    if include_determinism:
        rows += criterion_9(seed)
    return {"rows": rows, "all_passed": all(r["passed"] for r in rows),
            "seed": int(seed)}
