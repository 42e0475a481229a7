"""Structured Q1 meshes, quadrature and assembly for the condensed problem.

Conventions used throughout:

* node ``(i, j)`` has index ``i + j (nx + 1)``;
* vector dof ``2 node + comp``;
* quadrature point ``4 cell + g`` for the 2x2 Gauss rule;
* strains and stresses at quadrature points are Mandel vectors
  ``[xx, yy, sqrt(2) xy]``, plastic strains deviatoric coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .local_return import constitutive_update
from .material import MaterialLaw
from .tensor import SQRT2, dev_basis

DIRICHLET = "DIRICHLET"
NEUMANN = "NEUMANN"
FREE = "FREE"
TAGS = (DIRICHLET, NEUMANN, FREE)

SIDES = ("left", "right", "bottom", "top")

_GP = np.array([-1.0, 1.0]) / np.sqrt(3.0)
# reference corners in counterclockwise order
_REF = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
_GAUSS = np.array([[xi, eta] for eta in _GP for xi in _GP])

DIRECT_SOLVE_LIMIT = 200_000


@dataclass(frozen=True)
class TagRule:
    """Tag the facets of one side whose midpoint coordinate lies in ``[lo, hi]``.

    The coordinate is ``y`` for the left and right sides and ``x`` for the
    bottom and top sides.  ``lo``/``hi`` of ``None`` mean unbounded.
    """

    side: str
    tag: str
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"unknown side {self.side!r}; expected one of {SIDES}")
        if self.tag not in TAGS:
            raise ValueError(f"unknown tag {self.tag!r}; expected one of {TAGS}")

    @classmethod
    def from_dict(cls, d: dict) -> "TagRule":
        return cls(d["side"], d["tag"].upper(), d.get("lo"), d.get("hi"))

    def to_dict(self) -> dict:
        return {"side": self.side, "tag": self.tag, "lo": self.lo, "hi": self.hi}


def _ref_shape(xi, eta):
    N = 0.25 * (1 + _REF[:, 0] * xi) * (1 + _REF[:, 1] * eta)
    dN = np.stack([0.25 * _REF[:, 0] * (1 + _REF[:, 1] * eta),
                   0.25 * _REF[:, 1] * (1 + _REF[:, 0] * xi)], axis=1)
    return N, dN


@dataclass
class Mesh:
    """Structured quadrilateral mesh of ``[0, Lx] x [0, Ly]``.

    Attributes
    ----------
    nodes : (Nn, 2) coordinates
    cells : (Nc, 4) counterclockwise connectivity
    facets : (Nf, 2) boundary edges
    facet_side : (Nf,) side name of each facet
    facet_tags : (Nf,) one of DIRICHLET, NEUMANN, FREE
    """

    nx: int
    ny: int
    Lx: float
    Ly: float
    nodes: np.ndarray
    cells: np.ndarray
    facets: np.ndarray
    facet_side: np.ndarray
    facet_tags: np.ndarray
    rules: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_nodes

    @property
    def n_quad(self) -> int:
        return 4 * self.n_cells

    @property
    def facet_lengths(self) -> np.ndarray:
        d = self.nodes[self.facets[:, 1]] - self.nodes[self.facets[:, 0]]
        return np.linalg.norm(d, axis=1)

    @property
    def area(self) -> float:
        return float(self.quadrature()["w"].sum())

    def facets_tagged(self, tag: str) -> np.ndarray:
        return self.facets[self.facet_tags == tag]

    def dirichlet_nodes(self) -> np.ndarray:
        return np.unique(self.facets_tagged(DIRICHLET).ravel())

    def dirichlet_dofs(self) -> np.ndarray:
        nodes = self.dirichlet_nodes()
        return np.sort(np.concatenate([2 * nodes, 2 * nodes + 1]))

    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.dirichlet_dofs()] = False
        return np.flatnonzero(mask)

    def cell_dofs(self) -> np.ndarray:
        c = self.cells
        return np.stack([2 * c, 2 * c + 1], axis=2).reshape(self.n_cells, 8)

    def quadrature(self) -> dict:
        """Cached 2x2 Gauss data.

        ``w`` (Nq,) weights times Jacobian, ``N`` (4,) shape values per
        Gauss point (shape (4, 4)), ``dN`` (Nq, 4, 2) physical gradients,
        ``x`` (Nq, 2) points, ``B`` (Nq, 3, 8) Mandel strain operator.
        """
        if "quad" in self._cache:
            return self._cache["quad"]
        X = self.nodes[self.cells]  # (Nc, 4, 2)
        Ns, dNs = zip(*(_ref_shape(xi, eta) for xi, eta in _GAUSS))
        Nref = np.array(Ns)            # (4g, 4a)
        dNref = np.array(dNs)          # (4g, 4a, 2)
        Jac = np.einsum("cax,gak->cgxk", X, dNref)
        det = np.linalg.det(Jac)
        if np.any(det <= 0.0):
            raise ValueError("inverted cell in mesh")
        invJ = np.linalg.inv(Jac)
        dN = np.einsum("gak,cgkx->cgax", dNref, invJ).reshape(-1, 4, 2)
        x = np.einsum("ga,cax->cgx", Nref, X).reshape(-1, 2)
        w = det.reshape(-1)  # unit Gauss weights
        nq = w.shape[0]
        B = np.zeros((nq, 3, 8))
        B[:, 0, 0::2] = dN[:, :, 0]
        B[:, 1, 1::2] = dN[:, :, 1]
        B[:, 2, 0::2] = dN[:, :, 1] / SQRT2
        B[:, 2, 1::2] = dN[:, :, 0] / SQRT2
        q = {"w": w, "N": Nref, "dN": dN, "x": x, "B": B}
        self._cache["quad"] = q
        return q

    def qp_cell(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_cells), 4)

    def interpolate(self, z: np.ndarray) -> np.ndarray:
        """Nodal scalar to quadrature points."""
        q = self.quadrature()
        return np.einsum("ga,ca->cg", q["N"], z[self.cells]).reshape(-1)

    def grad(self, z: np.ndarray) -> np.ndarray:
        q = self.quadrature()
        zc = np.repeat(z[self.cells], 4, axis=0)
        return np.einsum("qa,qax->qx", zc, q["dN"])

    def interpolate_vector(self, u: np.ndarray) -> np.ndarray:
        """Nodal vector (flat dof array) to quadrature points, shape (Nq, 2)."""
        q = self.quadrature()
        uc = u.reshape(-1, 2)[self.cells]  # (Nc, 4, 2)
        return np.einsum("ga,cax->cgx", q["N"], uc).reshape(-1, 2)

    def strain(self, u: np.ndarray) -> np.ndarray:
        """Mandel symmetric gradient at quadrature points, (Nq, 3)."""
        q = self.quadrature()
        ue = np.repeat(u[self.cell_dofs()], 4, axis=0)
        return np.einsum("qsi,qi->qs", q["B"], ue)


def build_rect_mesh(nx: int, ny: int, Lx: float = 1.0, Ly: float = 1.0,
                    tag_rules: Sequence[TagRule] = ()) -> Mesh:
    """Structured ``nx x ny`` Q1 mesh with boundary tags.

    Later rules override earlier ones.  A rule that matches no facet raises.
    """
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be at least 1")
    if not (Lx > 0 and Ly > 0):
        raise ValueError("domain lengths must be positive")
    xs = np.linspace(0.0, Lx, nx + 1)
    ys = np.linspace(0.0, Ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return i + j * (nx + 1)

    I, J = np.meshgrid(np.arange(nx), np.arange(ny))
    I, J = I.ravel(), J.ravel()
    cells = np.column_stack([nid(I, J), nid(I + 1, J), nid(I + 1, J + 1), nid(I, J + 1)])

    facets, sides = [], []
    for i in range(nx):
        facets.append((nid(i, 0), nid(i + 1, 0)))
        sides.append("bottom")
    for j in range(ny):
        facets.append((nid(nx, j), nid(nx, j + 1)))
        sides.append("right")
    for i in range(nx - 1, -1, -1):
        facets.append((nid(i + 1, ny), nid(i, ny)))
        sides.append("top")
    for j in range(ny - 1, -1, -1):
        facets.append((nid(0, j + 1), nid(0, j)))
        sides.append("left")
    facets = np.array(facets, dtype=np.int64)
    sides = np.array(sides)
    tags = np.full(len(facets), FREE, dtype=object)
    mid = 0.5 * (nodes[facets[:, 0]] + nodes[facets[:, 1]])
    tol = 1e-12 * max(Lx, Ly)
    rules = tuple(r if isinstance(r, TagRule) else TagRule.from_dict(r) for r in tag_rules)
    for rule in rules:
        coord = mid[:, 1] if rule.side in ("left", "right") else mid[:, 0]
        hit = sides == rule.side
        if rule.lo is not None:
            hit &= coord >= rule.lo - tol
        if rule.hi is not None:
            hit &= coord <= rule.hi + tol
        if not hit.any():
            raise ValueError(f"tag rule {rule} covers no facet")
        tags[hit] = rule.tag
    tags = tags.astype(str)
    return Mesh(nx, ny, float(Lx), float(Ly), nodes, cells, facets, sides, tags, rules)


def check_mesh(mesh: Mesh) -> list[str]:
    """Invariant violations of ``mesh`` (empty when valid)."""
    out = []
    if not np.any(mesh.facet_tags == DIRICHLET):
        out.append("Dirichlet boundary has no facet (needs positive surface measure)")
    if set(mesh.facet_tags) - set(TAGS):
        out.append("unknown facet tag")
    return out


# ---------------------------------------------------------------- assembly

def _scatter_matrix(mesh: Mesh, Ke: np.ndarray) -> sp.csr_matrix:
    dofs = mesh.cell_dofs()
    rows = np.repeat(dofs, 8, axis=1).ravel()
    cols = np.tile(dofs, (1, 8)).ravel()
    n = mesh.n_dofs
    return sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _scatter_vector(mesh: Mesh, fe: np.ndarray) -> np.ndarray:
    out = np.zeros(mesh.n_dofs)
    np.add.at(out, mesh.cell_dofs().ravel(), fe.ravel())
    return out


def integrate_stress(mesh: Mesh, S: np.ndarray) -> np.ndarray:
    """``int B^T S`` for a Mandel field ``S`` (Nq, 3) as a dof vector."""
    q = mesh.quadrature()
    fe = np.einsum("q,qsi,qs->qi", q["w"], q["B"], S).reshape(mesh.n_cells, 4, 8).sum(axis=1)
    return _scatter_vector(mesh, fe)


def assemble_tangent(mesh: Mesh, Ct: np.ndarray) -> sp.csr_matrix:
    q = mesh.quadrature()
    Ke = np.einsum("q,qsi,qst,qtj->qij", q["w"], q["B"], Ct, q["B"])
    Ke = Ke.reshape(mesh.n_cells, 4, 8, 8).sum(axis=1)
    return _scatter_matrix(mesh, Ke)


def body_force_vector(mesh: Mesh, fq: np.ndarray, weight_q: np.ndarray | None = None) -> np.ndarray:
    """``int weight f . v`` with ``f`` given at quadrature points (Nq, 2)."""
    q = mesh.quadrature()
    wq = q["w"] if weight_q is None else q["w"] * weight_q
    N = np.tile(q["N"], (mesh.n_cells, 1))  # (Nq, 4)
    fe = np.einsum("q,qa,qx->qax", wq, N, fq).reshape(mesh.n_cells, 4, 8).sum(axis=1)
    return _scatter_vector(mesh, fe)


def facet_quadrature(mesh: Mesh, tag: str = NEUMANN):
    """Two-point Gauss rule on the facets with ``tag``.

    Returns ``(x (M, 2), w (M,), nodes (M, 2), N (M, 2))`` where ``N`` holds
    the two linear shape values at each point.
    """
    F = mesh.facets_tagged(tag)
    if F.size == 0:
        return np.zeros((0, 2)), np.zeros(0), np.zeros((0, 2), dtype=int), np.zeros((0, 2))
    a, b = mesh.nodes[F[:, 0]], mesh.nodes[F[:, 1]]
    L = np.linalg.norm(b - a, axis=1)
    s = 0.5 * (1.0 + _GP)  # (2,)
    x = (a[:, None, :] * (1 - s)[None, :, None] + b[:, None, :] * s[None, :, None]).reshape(-1, 2)
    w = np.repeat(0.5 * L, 2)
    nodes = np.repeat(F, 2, axis=0)
    N = np.tile(np.column_stack([1 - s, s]), (len(F), 1))
    return x, w, nodes, N


def traction_vector(mesh: Mesh, g_fn: Callable, t: float) -> np.ndarray:
    """``int_{Gamma_N} g(t) . v`` as a dof vector."""
    x, w, nodes, N = facet_quadrature(mesh, NEUMANN)
    out = np.zeros(mesh.n_dofs)
    if w.size == 0:
        return out
    g = np.asarray(g_fn(x[:, 0], x[:, 1], t), dtype=float).reshape(-1, 2)
    for comp in range(2):
        np.add.at(out, 2 * nodes[:, 0] + comp, w * N[:, 0] * g[:, comp])
        np.add.at(out, 2 * nodes[:, 1] + comp, w * N[:, 1] * g[:, comp])
    return out


def qp_coefficients(mesh: Mesh, law: MaterialLaw, z: np.ndarray) -> dict:
    """Material coefficients and derivatives at quadrature points."""
    return law.evaluate(mesh.interpolate(z))


class StateAssembly:
    """Residual, tangent and energy of one incremental step.

    Parameters
    ----------
    mesh, law, z : problem data, ``z`` nodal
    P : (Nq, 2) plastic strain of the previous step
    gamma : regularisation, may be ``inf``
    F_ext : dof vector ``int ell(z) f_i . v + int g_i . v``
    """

    def __init__(self, mesh: Mesh, law: MaterialLaw, z: np.ndarray, P: np.ndarray,
                 gamma: float, F_ext: np.ndarray, coeffs: dict | None = None):
        self.mesh, self.law, self.z, self.P = mesh, law, z, P
        self.gamma = gamma
        self.F_ext = F_ext
        self.coeffs = qp_coefficients(mesh, law, z) if coeffs is None else coeffs

    def local(self, u: np.ndarray, tangent: bool = True):
        E = self.mesh.strain(u)
        return constitutive_update(E, self.coeffs, self.P, self.gamma, tangent=tangent)

    def residual(self, u: np.ndarray, jacobian: bool = True):
        res = self.local(u, tangent=jacobian)
        r = integrate_stress(self.mesh, res.sigma) - self.F_ext
        K = assemble_tangent(self.mesh, res.tangent) if jacobian else None
        return r, K, res

    def energy(self, u: np.ndarray, res=None) -> float:
        """Incremental energy ``sum w psi - F_ext . u`` (objective of the step)."""
        if res is None:
            res = self.local(u, tangent=False)
        w = self.mesh.quadrature()["w"]
        return float(np.dot(w, res.psi) - np.dot(self.F_ext, u))


def assemble_state_residual(mesh: Mesh, z: np.ndarray, p_prev: np.ndarray, gamma: float,
                            law: MaterialLaw, F_ext: np.ndarray, w_i: np.ndarray,
                            u: np.ndarray, jacobian: bool = True):
    """Residual on free dofs and (optionally) the free-free Jacobian.

    ``u`` must already equal ``w_i`` on Dirichlet dofs.
    """
    dd = mesh.dirichlet_dofs()
    if not np.allclose(u[dd], w_i[dd], rtol=0.0, atol=1e-14 * (1.0 + np.abs(w_i).max(initial=0.0))):
        raise ValueError("u does not match the Dirichlet data")
    asm = StateAssembly(mesh, law, z, p_prev, gamma, F_ext)
    r, K, _ = asm.residual(u, jacobian)
    free = mesh.free_dofs()
    if K is None:
        return r[free], None
    return r[free], K[free][:, free]


def solve_spd(K: sp.spmatrix, b: np.ndarray, rtol: float = 1e-13) -> np.ndarray:
    """Sparse direct below the size limit, Jacobi-preconditioned CG above."""
    if K.shape[0] <= DIRECT_SOLVE_LIMIT:
        return spla.spsolve(K.tocsc(), b)
    diag = K.diagonal()
    M = spla.LinearOperator(K.shape, matvec=lambda x: x / diag)
    x, info = spla.cg(K, b, rtol=rtol, M=M, maxiter=10 * K.shape[0])
    if info != 0:
        raise RuntimeError(f"conjugate gradient did not converge (info={info})")
    return x


def factorize(K: sp.spmatrix):
    """Reusable solver for repeated right-hand sides."""
    if K.shape[0] <= DIRECT_SOLVE_LIMIT:
        lu = spla.splu(K.tocsc())
        return lu.solve
    return lambda b: solve_spd(K, b)


# ------------------------------------------------------- adjoint-type pieces

def hessian_blocks(X: np.ndarray, d: np.ndarray, gamma: float) -> np.ndarray:
    """``d hess h_gamma(X)`` as dense (Nq, m, m) blocks."""
    c2 = 1.0 / (gamma * gamma)
    s2 = np.einsum("qi,qi->q", X, X) + c2
    s = np.sqrt(s2)
    m = X.shape[1]
    H = np.eye(m)[None] - X[:, :, None] * X[:, None, :] / s2[:, None, None]
    return (d / s)[:, None, None] * H


def assemble_adjoint_system(mesh: Mesh, z: np.ndarray, p_i: np.ndarray, p_prev: np.ndarray,
                            u_i: np.ndarray, gamma: float, law: MaterialLaw,
                            Lambda: np.ndarray, pbar_next: np.ndarray):
    """Condensed system of one backward adjoint step.

    Minimizes over ``(ubar, pbar)`` with ``ubar = 0`` on the Dirichlet part

        1/2 int C (E ubar - pbar).(E ubar - pbar) + 1/2 int h |pbar|^2
        + 1/2 int D (pbar - pbar_next).(pbar - pbar_next) - Lambda(ubar)

    where ``D = d hess h_gamma(p_i - p_prev)``.  Eliminating ``pbar`` at the
    quadrature points gives ``K ubar = rhs`` with ``K`` the forward tangent.

    Returns
    -------
    K_free, rhs_free : the reduced system on free dofs
    recover : callable mapping the full ``ubar`` to ``pbar``
    """
    if np.isinf(gamma):
        raise ValueError("the adjoint system needs a finite gamma")
    co = qp_coefficients(mesh, law, z)
    E = mesh.strain(u_i)
    res = constitutive_update(E, co, p_prev, gamma)
    mu, d = co["mu"], co["d"]
    Bd = dev_basis(2)
    D = hessian_blocks(res.X, d, gamma)
    Dpn = np.einsum("qij,qj->qi", D, pbar_next)
    coupling = 2.0 * mu[:, None] * np.einsum("qij,qj->qi", res.J, Dpn) @ Bd.T
    K = assemble_tangent(mesh, res.tangent)
    rhs = Lambda + integrate_stress(mesh, coupling)
    free = mesh.free_dofs()

    def recover(ubar):
        e = mesh.strain(ubar) @ Bd
        return np.einsum("qij,qj->qi", res.J, 2.0 * mu[:, None] * e + Dpn)

    return K[free][:, free], rhs[free], recover


# --------------------------------------------------------- scalar Q1 pieces

def scalar_matrices(mesh: Mesh):
    """Q1 mass and stiffness matrices (cached)."""
    if "scalar" in mesh._cache:
        return mesh._cache["scalar"]
    q = mesh.quadrature()
    N = np.tile(q["N"], (mesh.n_cells, 1))
    Me = np.einsum("q,qa,qb->qab", q["w"], N, N).reshape(mesh.n_cells, 4, 4, 4).sum(axis=1)
    Ke = np.einsum("q,qax,qbx->qab", q["w"], q["dN"], q["dN"]).reshape(mesh.n_cells, 4, 4, 4).sum(axis=1)
    rows = np.repeat(mesh.cells, 4, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, 4)).ravel()
    n = mesh.n_nodes
    M = sp.coo_matrix((Me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    S = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mesh._cache["scalar"] = (M, S)
    return M, S


def nodal_functional(mesh: Mesh, density_q: np.ndarray, flux_q: np.ndarray | None = None) -> np.ndarray:
    """Coefficients of ``phi -> int density phi + flux . grad phi``."""
    q = mesh.quadrature()
    N = np.tile(q["N"], (mesh.n_cells, 1))
    ge = np.einsum("q,q,qa->qa", q["w"], density_q, N)
    if flux_q is not None:
        ge = ge + np.einsum("q,qx,qax->qa", q["w"], flux_q, q["dN"])
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.cells.ravel(), ge.reshape(mesh.n_cells, 4, 4).sum(axis=1).ravel())
    return out


def h1_riesz_solve(mesh: Mesh, delta: float, G: np.ndarray) -> np.ndarray:
    """Solve ``delta (grad phi, grad psi) + (phi, psi) = G(psi)`` for ``phi``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    M, S = scalar_matrices(mesh)
    return solve_spd(delta * S + M, G)


def h1_norm(mesh: Mesh, delta: float, phi: np.ndarray) -> float:
    M, S = scalar_matrices(mesh)
    return float(np.sqrt(phi @ (delta * (S @ phi) + M @ phi)))


def modica_mortola(mesh: Mesh, z: np.ndarray, delta: float) -> float:
    """``int delta/2 |grad z|^2 + z^2 (1 - z)^2 / (2 delta)``."""
    q = mesh.quadrature()
    zq, gq = mesh.interpolate(z), mesh.grad(z)
    dens = 0.5 * delta * np.einsum("qx,qx->q", gq, gq) + (zq * (1 - zq)) ** 2 / (2.0 * delta)
    return float(np.dot(q["w"], dens))


def modica_mortola_gradient(mesh: Mesh, z: np.ndarray, delta: float) -> np.ndarray:
    zq, gq = mesh.interpolate(z), mesh.grad(z)
    dw = (zq * (1 - zq) ** 2 - zq * zq * (1 - zq)) / delta
    return nodal_functional(mesh, dw, delta * gq)


def modica_mortola_hessian(mesh: Mesh, z: np.ndarray, delta: float) -> sp.csr_matrix:
    q = mesh.quadrature()
    zq = mesh.interpolate(z)
    ddw = (1.0 - 6.0 * zq + 6.0 * zq * zq) / delta
    N = np.tile(q["N"], (mesh.n_cells, 1))
    Me = np.einsum("q,q,qa,qb->qab", q["w"], ddw, N, N).reshape(mesh.n_cells, 4, 4, 4).sum(axis=1)
    rows = np.repeat(mesh.cells, 4, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, 4)).ravel()
    n = mesh.n_nodes
    _, S = scalar_matrices(mesh)
    return delta * S + sp.coo_matrix((Me.ravel(), (rows, cols)), shape=(n, n)).tocsr()


# ---------------------------------------------------------------- norms

def h1_vector_norm(mesh: Mesh, u: np.ndarray) -> float:
    """Full H1 norm of a vector field (flat dofs)."""
    M, S = scalar_matrices(mesh)
    U = u.reshape(-1, 2)
    val = sum(U[:, c] @ (M @ U[:, c]) + U[:, c] @ (S @ U[:, c]) for c in range(2))
    return float(np.sqrt(max(val, 0.0)))


def l2_qp_norm(mesh: Mesh, A: np.ndarray) -> float:
    """L2 norm of a quadrature field of Mandel or deviatoric coordinates."""
    w = mesh.quadrature()["w"]
    A = A.reshape(A.shape[0], -1)
    return float(np.sqrt(np.dot(w, np.einsum("qi,qi->q", A, A))))
