"""Volume integral equation for the field gradient inside the scatterer.

Collocation on the voxel grid: piecewise-constant vector densities, midpoint
off-diagonal blocks hess_phi(x_i - x_j) h^3 and closed-form self blocks from
cell_self_term.  The singular equation T h = (At - A) grad u is solved in the
normalized variables eta = A^{-1/2} h,

    (I - Q R_kappa) eta = 2 Q A^{1/2} grad u,      R_kappa = I + 2 A^{1/2} gradW A^{1/2},

which is the conditioning-friendly form; h = A^{1/2} eta.  Vectors of length
3N are voxel-major: x.reshape(N, 3).

The assembled gradW is complex symmetric (blocks are even in x_i - x_j and
each block is a symmetric Hessian), which makes R_kappa and the sigma-split
system complex symmetric as well; reciprocity of scattered fields is exact
for this discretization up to roundoff.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import LinearOperator, gmres

from .greens import cell_self_term, grad_phi, hess_phi
from .materials import AnisoContrast, IsoContrast

__all__ = [
    "VieSystem",
    "DensityField",
    "assemble",
    "solve_density",
    "born_density",
    "scattered_field",
    "radiation_matrix",
    "apply_MB",
    "resolvent_solve",
    "operator_norm",
]

VOXEL_CAP = 20000
DIRECT_CAP = 3000


@dataclass
class DensityField:
    """Complex 3-vector per voxel (units of A grad u); residual diagnostic."""

    values: np.ndarray
    grid: object = None
    residual: float = None


def _block_left(mat, C):
    """Multiply every 3x3 block of mat (3N x 3N) by C from the left."""
    n3 = mat.shape[0]
    return np.matmul(C, mat.reshape(n3 // 3, 3, n3)).reshape(n3, n3)


def _block_right(mat, C):
    n3 = mat.shape[1]
    return np.matmul(mat.reshape(-1, n3 // 3, 3), C).reshape(mat.shape[0], n3)


def _per_voxel(C, v):
    """Apply a 3x3 matrix to each voxel 3-vector of v ((N,3) or (3N,) or (3N,K))."""
    if v.ndim == 1:
        return (v.reshape(-1, 3) @ C.T).reshape(v.shape)
    if v.ndim == 2 and v.shape[1] == 3:
        return v @ C.T
    # (3N, K): apply blockwise on the first axis
    n3, k = v.shape
    return np.einsum("ab,nbk->nak", C, v.reshape(n3 // 3, 3, k)).reshape(n3, k)


def _contrast_parts(contrast, bg):
    """(Q, sqrtA, dA) as 3x3 arrays: contrast factor, A^{1/2}, and At - A."""
    if isinstance(contrast, IsoContrast):
        a = contrast.a
        if bg.iso_a is None or abs(bg.iso_a - a) > 1e-12 * max(a, 1.0):
            raise ValueError("isotropic contrast requires background A = a I")
        eye = np.eye(3)
        return contrast.q * eye, np.sqrt(a) * eye, a * contrast.beta * eye
    Q = contrast.Q
    dA = contrast.A_tilde.matrix - contrast.A.matrix
    if not np.allclose(contrast.A.matrix, bg.A.matrix, rtol=0.0, atol=1e-12):
        raise ValueError("contrast.A must match the background tensor")
    return Q, bg.sqrt_A, dA


def _sigma_parts(contrast):
    """(sigma, q_mat) of the sign-split factorization Q = q^T sigma^2 q."""
    if isinstance(contrast, IsoContrast):
        q = contrast.q
        sigma = np.eye(3, dtype=complex) * (1.0 if q >= 0.0 else 1j)
        q_mat = np.sqrt(abs(q)) * np.eye(3)
        return sigma, q_mat
    return contrast.sigma, contrast.q_mat


def _contrast_key(contrast):
    if isinstance(contrast, IsoContrast):
        return ("iso", contrast.a, contrast.beta)
    return ("aniso", contrast.A.packed, contrast.A_tilde.packed)


@dataclass
class VieSystem:
    """Assembled discretization of grad W_kappa plus cached factorizations."""

    grid: object
    bg: object
    gradW: np.ndarray
    direct_cap: int = DIRECT_CAP
    _factor_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_cells(self):
        return self.grid.n_cells

    def gradw_apply(self, v):
        """gradW v for v of shape (3N,), (N,3) or (3N,K)."""
        if v.ndim == 2 and v.shape[1] == 3 and v.shape[0] == self.n_cells:
            return (self.gradW @ v.reshape(-1)).reshape(-1, 3)
        return self.gradW @ v

    def r_apply(self, v):
        """R_kappa v = v + 2 A^{1/2} gradW A^{1/2} v (flat (3N,) or (3N,K))."""
        a = self.bg.iso_a
        if a is not None:
            return v + (2.0 * a) * (self.gradW @ v)
        Ah = self.bg.sqrt_A
        return v + 2.0 * _per_voxel(Ah, self.gradW @ _per_voxel(Ah, v))

    def system_matrix(self, contrast, form="direct"):
        """Dense (I - Q R_kappa) or, for form='sigma', (I - sigma q R q^T sigma)."""
        Q, Ah, _ = _contrast_parts(contrast, self.bg)
        n3 = self.gradW.shape[0]
        if form == "direct":
            L, Rm, D = -2.0 * Q @ Ah, Ah, np.eye(3) - Q
        elif form == "sigma":
            sig, qm = _sigma_parts(contrast)
            L, Rm = -2.0 * sig @ qm @ Ah, Ah @ qm.T @ sig
            D = np.eye(3) - sig @ qm @ qm.T @ sig
        else:
            raise ValueError(f"unknown system form {form!r}")
        eye3 = np.eye(3)
        if np.allclose(L, L[0, 0] * eye3) and np.allclose(Rm, Rm[0, 0] * eye3):
            # scalar blocks: one scaling instead of blockwise products
            mat = (L[0, 0] * Rm[0, 0]) * self.gradW
        else:
            mat = _block_right(_block_left(self.gradW, L), Rm)
        idx = np.arange(n3)
        for a in range(3):
            for b in range(3):
                if D[a, b] != 0.0:
                    mat[idx[a::3], idx[b::3]] += D[a, b]
        return mat

    def _factorization(self, contrast, form):
        key = (_contrast_key(contrast), form)
        if key not in self._factor_cache:
            mat = self.system_matrix(contrast, form)
            self._factor_cache[key] = lu_factor(mat, overwrite_a=True, check_finite=False)
        return self._factor_cache[key]


def assemble(grid, bg, voxel_cap=VOXEL_CAP, direct_cap=DIRECT_CAP, row_chunk=64,
             near_subdiv=4):
    """Dense collocation matrix of grad W_kappa on the voxel grid.

    Midpoint blocks hess_phi(x_i - x_j) h^3 off the diagonal, cell_self_term
    on it.  Blocks of touching cells (first neighbor ring) are replaced by
    subcell-averaged integrals (near_subdiv^3 midpoints): the plain midpoint
    rule there inflates the discrete spectrum of R_0 well above its continuum
    norm 1.  Set near_subdiv=0 to disable.
    """
    n = grid.n_cells
    if n == 0:
        raise ValueError("grid is empty")
    if n > voxel_cap:
        raise MemoryError(f"{n} voxels exceed the cap {voxel_cap}; coarsen the grid")
    centers = grid.centers
    h3 = grid.cell_volume
    gw = np.empty((3 * n, 3 * n), dtype=complex)
    self_block = cell_self_term(bg, grid.h)
    for i0 in range(0, n, row_chunk):
        i1 = min(i0 + row_chunk, n)
        diff = centers[i0:i1, None, :] - centers[None, :, :]
        # placeholder on the diagonal; overwritten by the self block below
        for i in range(i0, i1):
            diff[i - i0, i, 0] = 1.0
        blocks = hess_phi(bg, diff) * h3
        for i in range(i0, i1):
            blocks[i - i0, i] = self_block
        gw[3 * i0 : 3 * i1] = blocks.transpose(0, 2, 1, 3).reshape(3 * (i1 - i0), 3 * n)
    if near_subdiv:
        _correct_near_blocks(gw, grid, bg, near_subdiv)
    return VieSystem(grid=grid, bg=bg, gradW=gw, direct_cap=direct_cap)


def _correct_near_blocks(gw, grid, bg, nsub):
    """Subcell-averaged blocks for touching cells (symmetric, kernel is even)."""
    c = grid.centers
    h = grid.h
    t = (np.arange(nsub) + 0.5) / nsub - 0.5
    off = np.array(list(itertools.product(t, t, t))) * h
    key = np.round((c - c.min(axis=0)) / h).astype(int)
    lut = {tuple(k): i for i, k in enumerate(key)}
    shifts = [s for s in itertools.product((-1, 0, 1), repeat=3) if s != (0, 0, 0)]
    pairs = []
    for i, k in enumerate(key):
        for s in shifts:
            j = lut.get((k[0] + s[0], k[1] + s[1], k[2] + s[2]))
            if j is not None and j > i:
                pairs.append((i, j))
    if not pairs:
        return
    pairs = np.array(pairs)
    ar3 = np.arange(3)
    for p0 in range(0, len(pairs), 8192):
        pp = pairs[p0 : p0 + 8192]
        pts = (c[pp[:, 0]] - c[pp[:, 1]])[:, None, :] - off[None, :, :]
        blocks = hess_phi(bg, pts).mean(axis=1) * h**3
        ri = 3 * pp[:, 0][:, None, None] + ar3[None, :, None]
        cj = 3 * pp[:, 1][:, None, None] + ar3[None, None, :]
        gw[ri, cj] = blocks
        gw[cj.transpose(0, 2, 1), ri.transpose(0, 2, 1)] = blocks


def _system_matvec(sys, contrast, form):
    """Matrix-free application of the chosen system matrix."""
    Q, Ah, _ = _contrast_parts(contrast, sys.bg)
    if form == "sigma":
        sig, qm = _sigma_parts(contrast)
        left = sig @ qm @ Ah
        right = Ah @ qm.T @ sig
        diag = np.eye(3) - sig @ qm @ qm.T @ sig
    else:
        left = Q @ Ah
        right = Ah
        diag = np.eye(3) - Q

    def matvec(v):
        w = sys.gradW @ _per_voxel(right, v)
        return _per_voxel(diag, v) - 2.0 * _per_voxel(left, w)

    return matvec


def resolvent_solve(sys, contrast, rhs, form="direct"):
    """Solve (I - Q R_kappa) X = rhs (form='direct') or the sigma-split system.

    rhs: (3N,) or (3N, K).  Dense LU below the direct cap (cached per
    contrast), residual-controlled GMRES above it.
    """
    rhs = np.asarray(rhs, dtype=complex)
    if sys.n_cells <= sys.direct_cap:
        return lu_solve(sys._factorization(contrast, form), rhs, check_finite=False)
    matvec = _system_matvec(sys, contrast, form)
    n3 = sys.gradW.shape[0]
    op = LinearOperator((n3, n3), matvec=matvec, dtype=complex)
    cols = rhs.reshape(n3, -1)
    out = np.empty_like(cols)
    for k in range(cols.shape[1]):
        x, info = gmres(op, cols[:, k], rtol=1e-10, atol=0.0, restart=200, maxiter=100)
        if info != 0:
            res = np.linalg.norm(matvec(x) - cols[:, k]) / np.linalg.norm(cols[:, k])
            raise RuntimeError(f"GMRES stalled (info={info}, residual {res:.3e})")
        out[:, k] = x
    return out.reshape(rhs.shape)


def born_density(contrast, incident_grad, grid=None):
    """Born approximation h = (At - A) grad u; no solve."""
    g = np.asarray(incident_grad, dtype=complex)
    if isinstance(contrast, IsoContrast):
        vals = (contrast.a * contrast.beta) * g
    else:
        vals = g @ (contrast.A_tilde.matrix - contrast.A.matrix).T
    return DensityField(values=vals, grid=grid, residual=None)


def solve_density(sys, contrast, incident_grad):
    """Solve T h = (At - A) grad u on the grid; returns h with its residual."""
    g = np.asarray(incident_grad, dtype=complex)
    if g.shape != (sys.n_cells, 3):
        raise ValueError("incident_grad must have shape (n_cells, 3)")
    if not np.all(np.isfinite(g)):
        raise ValueError("incident_grad must be finite")
    Q, Ah, dA = _contrast_parts(contrast, sys.bg)
    if not np.any(dA):
        return DensityField(values=np.zeros_like(g), grid=sys.grid, residual=0.0)
    rhs = 2.0 * (g @ (Q @ Ah).T).reshape(-1)
    eta = resolvent_solve(sys, contrast, rhs)
    h = _per_voxel(Ah, eta).reshape(-1, 3)
    # residual of the unnormalized equation T h = (At - A) g
    target = g @ dA.T
    Th = h - (sys.gradw_apply(h)) @ dA.T
    num = np.linalg.norm(Th - target)
    den = np.linalg.norm(target)
    res = float(num / den) if den > 0.0 else 0.0
    tol = 1e-10 if sys.n_cells <= sys.direct_cap else 1e-8
    if res > tol:
        raise RuntimeError(f"VIE residual {res:.3e} exceeds {tol:.0e}")
    return DensityField(values=h, grid=sys.grid, residual=res)


def apply_MB(sys, contrast, g, path="direct"):
    """Solution operator h = M_B g.

    path='direct':    M_B = 2 A^{1/2} (I - Q R)^{-1} Q A^{1/2}
    path='symmetric': M_B = 2 (A^{1/2} q^T) sigma (I - sigma q R q^T sigma)^{-1}
                      sigma (q A^{1/2}),
    two algebraically equal routes through different assembled systems.
    """
    g = np.asarray(g, dtype=complex)
    if g.shape != (sys.n_cells, 3):
        raise ValueError("g must have shape (n_cells, 3)")
    Q, Ah, dA = _contrast_parts(contrast, sys.bg)
    if not np.any(dA):
        return DensityField(values=np.zeros_like(g), grid=sys.grid, residual=0.0)
    if path == "direct":
        rhs = 2.0 * (g @ (Q @ Ah).T).reshape(-1)
        eta = resolvent_solve(sys, contrast, rhs, form="direct")
        h = _per_voxel(Ah, eta).reshape(-1, 3)
    elif path == "symmetric":
        sig, qm = _sigma_parts(contrast)
        rhs = 2.0 * (g @ (sig @ qm @ Ah).T).reshape(-1)
        x = resolvent_solve(sys, contrast, rhs, form="sigma")
        h = _per_voxel(Ah @ qm.T @ sig, x).reshape(-1, 3)
    else:
        raise ValueError(f"unknown path {path!r}")
    return DensityField(values=h, grid=sys.grid, residual=None)


def radiation_matrix(sys, points):
    """Evaluation operator (M, 3N): row p maps h to W_kappa[h](x_p).

    Points must lie outside every voxel (Chebyshev distance >= h/2).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    centers = sys.grid.centers
    h3 = sys.grid.cell_volume
    half = 0.5 * sys.grid.h
    out = np.empty((pts.shape[0], 3 * sys.n_cells), dtype=complex)
    chunk = max(1, int(2e6) // max(sys.n_cells, 1))
    for p0 in range(0, pts.shape[0], chunk):
        p1 = min(p0 + chunk, pts.shape[0])
        diff = pts[p0:p1, None, :] - centers[None, :, :]
        if np.any(np.all(np.abs(diff) < half, axis=-1)):
            raise ValueError("evaluation point inside the scatterer grid")
        out[p0:p1] = (grad_phi(sys.bg, diff) * h3).reshape(p1 - p0, -1)
    return out


def scattered_field(sys, h, x):
    """u^s(x) = sum_j grad Phi_kappa(x - y_j) . h_j h^3 for x outside B."""
    vals = h.values if isinstance(h, DensityField) else np.asarray(h)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    u = radiation_matrix(sys, x) @ vals.reshape(-1)
    return complex(u[0]) if single else u


def operator_norm(sys, which="R_kappa", contrast=None, tol=1e-4, maxiter=1000, seed=0):
    """Largest singular value of the selected operator by power iteration.

    which: 'R_kappa' | 'qR_kappa' | 'qRq'.  The grid is uniform, so the
    volume-weighted spectral norm coincides with the Euclidean one.
    """
    eye = np.eye(3)
    if which == "R_kappa":
        left, right = eye, eye
    elif which == "qR_kappa":
        if contrast is None:
            raise ValueError("qR_kappa needs a contrast")
        Q, _, _ = _contrast_parts(contrast, sys.bg)
        left, right = Q, eye
    elif which == "qRq":
        if contrast is None:
            raise ValueError("qRq needs a contrast")
        _, qm = _sigma_parts(contrast)
        left, right = qm, qm.T
    else:
        raise ValueError(f"unknown operator {which!r}")

    def mv(v):
        return _per_voxel(left, sys.r_apply(_per_voxel(right, v)))

    def rmv(v):
        # adjoint factors; R_kappa is complex symmetric so R^H w = conj(R conj(w))
        w = _per_voxel(left.conj().T, v)
        w = np.conj(sys.r_apply(np.conj(w)))
        return _per_voxel(right.conj().T, w)

    rng = np.random.default_rng(seed)
    n3 = sys.gradW.shape[0]
    v = rng.standard_normal(n3) + 1j * rng.standard_normal(n3)
    v /= np.linalg.norm(v)
    sig_prev = 0.0
    for _ in range(maxiter):
        w = mv(v)
        sig = np.linalg.norm(w)
        if sig == 0.0:
            return 0.0
        v_new = rmv(w)
        nv = np.linalg.norm(v_new)
        if nv == 0.0:
            return float(sig)
        v = v_new / nv
        if abs(sig - sig_prev) <= tol * sig:
            return float(sig)
        sig_prev = sig
    raise RuntimeError(f"power iteration did not converge in {maxiter} iterations")
