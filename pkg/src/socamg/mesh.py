"""Structured tensor-product meshes and linear finite-element Poisson assembly.

Vertices are numbered lexicographically with x fastest. Elements are
quadrilaterals (2D) or hexahedra (3D) with local vertices ordered
counter-clockwise from the (-1, -1[, -1]) reference corner, lower z-layer
first.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .sparse import csr

__all__ = [
    "FACES",
    "MeshSpec",
    "Mesh",
    "AssembledSystem",
    "graded_block",
    "graded_axis",
    "uniform_spec",
    "stretched_spec",
    "tensor_spec",
    "build_mesh",
    "element_stiffness",
    "element_stiffness_2d",
    "element_stiffness_3d",
    "assemble",
    "manufactured_solution",
    "interior_stencil",
    "stencil_classes",
    "criterion_curves",
    "write_coordinates",
]

FACES = ("xlo", "xhi", "ylo", "yhi", "zlo", "zhi")
DIRICHLET, NEUMANN = "dirichlet", "neumann"


def graded_block(length: float, first: float, last: float) -> np.ndarray:
    """Cell widths for a graded block of total ``length``.

    The cell count is the smallest ``n`` for which the geometric progression
    running from ``first`` to ``last`` in ``n`` cells covers ``length`` (one
    fewer for a shrinking block). The last cell is pinned to ``last`` and the
    common ratio of the remaining ``n - 1`` cells is refit so the widths sum
    to ``length`` exactly; widths stay monotone either way.
    """
    if min(length, first, last) <= 0:
        raise ValueError("graded block sizes must be positive")
    if first >= length or last >= length:
        raise ValueError(f"degenerate grading: first={first}, last={last}, length={length}")

    def progression_sum(n):
        if n == 1:
            return first
        r = (last / first) ** (1.0 / (n - 1))
        if abs(r - 1.0) < 1e-14:
            return first * n
        return first * (r**n - 1.0) / (r - 1.0)

    n = 2
    while progression_sum(n) < length * (1.0 - 1e-12):
        n += 1
    if abs(last / first - 1.0) < 1e-14:
        return np.full(n, length / n)
    if last < first and n > 2:
        # a shrinking block undershoots instead, so the refit ratio stays monotone
        n -= 1

    # remaining n-1 cells: first * q**k, k = 0..n-2, summing to length - last
    target = length - last

    def head_sum(q):
        k = np.arange(n - 1)
        return float(np.sum(first * q**k))

    lo, hi = 1e-3, 1e3
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        if head_sum(mid) < target:
            lo = mid
        else:
            hi = mid
    q = np.sqrt(lo * hi)
    widths = np.append(first * q ** np.arange(n - 1), last)
    widths[-2] += length - widths.sum()  # absorb rounding
    return widths


def graded_axis(gamma: float) -> np.ndarray:
    """Three-block graded axis: isotropic, graded, uniformly stretched."""
    return np.concatenate([
        np.full(10, 0.1),
        graded_block(3.0 * (gamma + 1.0), 0.1, gamma / 10.0),
        np.full(10, gamma / 10.0),
    ])


@dataclass
class MeshSpec:
    """Cell widths per axis plus a boundary condition for each face."""

    widths: list
    bc: dict = field(default_factory=dict)

    def __post_init__(self):
        self.widths = [np.asarray(w, dtype=np.float64) for w in self.widths]
        if not 1 <= len(self.widths) <= 3:
            raise ValueError("dimension must be 1, 2 or 3")
        for w in self.widths:
            if len(w) < 2:
                raise ValueError("each axis needs at least 2 cells")
            if np.any(w <= 0):
                raise ValueError("cell widths must be positive")
        faces = FACES[: 2 * self.dim]
        bc = {f: NEUMANN for f in faces}
        for face, kind in self.bc.items():
            if face not in faces:
                raise ValueError(f"unknown face {face!r} for a {self.dim}D mesh")
            if kind not in (DIRICHLET, NEUMANN):
                raise ValueError(f"unknown boundary condition {kind!r}")
            bc[face] = kind
        self.bc = bc

    @property
    def dim(self) -> int:
        return len(self.widths)


def _bc(dim, dirichlet):
    return {f: DIRICHLET for f in dirichlet if f in FACES[: 2 * dim]}


def uniform_spec(dim: int, cells: int, h: float = 1.0, dirichlet=FACES) -> MeshSpec:
    return MeshSpec([np.full(cells, h)] * dim, _bc(dim, dirichlet))


def stretched_spec(dim: int, cells: int, alpha: float, h: float = 1.0,
                   dirichlet=FACES) -> MeshSpec:
    """Uniform mesh whose last axis has spacing ``alpha * h``."""
    widths = [np.full(cells, h)] * (dim - 1) + [np.full(cells, alpha * h)]
    return MeshSpec(widths, _bc(dim, dirichlet))


def tensor_spec(dim: int, gamma1: float, gamma2: float, zcells: int = 80,
                zlength: float = 8.0) -> MeshSpec:
    """Graded tensor mesh with a Dirichlet face at y = 0, Neumann elsewhere."""
    widths = [graded_axis(gamma1), graded_axis(gamma2)]
    if dim == 3:
        widths.append(np.full(zcells, zlength / zcells))
    elif dim != 2:
        raise ValueError("tensor meshes are 2D or 3D")
    return MeshSpec(widths, {"ylo": DIRICHLET})


@dataclass
class Mesh:
    """Structured mesh: per-axis vertex coordinates plus derived arrays."""

    axes: list
    elements: np.ndarray
    coords: np.ndarray
    dirichlet: np.ndarray
    spec: MeshSpec

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    @property
    def n_vertices(self) -> int:
        return int(np.prod(self.shape))

    def vertex(self, *ijk) -> int:
        idx, stride = 0, 1
        for i, n in zip(ijk, self.shape):
            idx += i * stride
            stride *= n
        return idx

    def lattice(self, v: int) -> tuple:
        out = []
        for n in self.shape:
            out.append(v % n)
            v //= n
        return tuple(out)


def _local_offsets(dim):
    """Lattice offsets of the local element vertices in reference ordering."""
    square = [(0, 0), (1, 0), (1, 1), (0, 1)]
    if dim == 1:
        return [(0,), (1,)]
    if dim == 2:
        return square
    return [s + (0,) for s in square] + [s + (1,) for s in square]


def _lattice_points(shape):
    """All lattice points of ``shape`` as rows, x varying fastest."""
    grids = np.meshgrid(*[np.arange(n) for n in shape], indexing="ij")
    return np.stack([g.ravel(order="F") for g in grids], -1)


def build_mesh(spec: MeshSpec) -> Mesh:
    dim = spec.dim
    axes = [np.concatenate([[0.0], np.cumsum(w)]) for w in spec.widths]
    shape = tuple(len(a) for a in axes)
    grids = np.meshgrid(*axes, indexing="ij")
    # lexicographic with x fastest: flatten in Fortran order
    coords = np.zeros((int(np.prod(shape)), 3))
    for d in range(dim):
        coords[:, d] = grids[d].ravel(order="F")

    strides = np.cumprod((1,) + shape[:-1])
    cell_idx = _lattice_points(tuple(n - 1 for n in shape))
    base = cell_idx @ strides
    offs = np.array(_local_offsets(dim)) @ strides
    elements = base[:, None] + offs[None, :]

    mask = np.zeros(shape, dtype=bool)
    for d in range(dim):
        lo, hi = FACES[2 * d], FACES[2 * d + 1]
        sl = [slice(None)] * dim
        if spec.bc[lo] == DIRICHLET:
            sl[d] = 0
            mask[tuple(sl)] = True
        if spec.bc[hi] == DIRICHLET:
            sl[d] = shape[d] - 1
            mask[tuple(sl)] = True
    dirichlet = np.flatnonzero(mask.ravel(order="F"))
    return Mesh(axes, elements.astype(np.int64), coords, dirichlet, spec)


_GAUSS = np.array([-1.0, 1.0]) / np.sqrt(3.0)


def _reference_gradients(dim):
    """Per-axis reference matrices R_d[a, b] = int dphi_a/dxi_d * dphi_b/dxi_d."""
    signs = np.array(_local_offsets(dim)) * 2 - 1  # vertex corners in {-1, 1}
    R = np.zeros((dim, 2**dim, 2**dim))
    for point in itertools.product(_GAUSS, repeat=dim):
        point = np.array(point)
        # phi_a = prod_d (1 + s_ad xi_d) / 2
        factors = (1.0 + signs * point) / 2.0
        grads = np.empty((dim, 2**dim))
        for d in range(dim):
            others = np.prod(np.delete(factors, d, axis=1), axis=1)
            grads[d] = signs[:, d] / 2.0 * others
        for d in range(dim):
            R[d] += np.outer(grads[d], grads[d])  # unit Gauss weights
    return R


_REF = {d: _reference_gradients(d) for d in (1, 2, 3)}


def _axis_coefficients(h):
    """Scale factors c_d = (prod h) / (2^(dim-2) h_d^2) mapping R_d to physical space."""
    h = np.atleast_2d(np.asarray(h, dtype=np.float64))
    dim = h.shape[1]
    vol = np.prod(h, axis=1, keepdims=True)
    # d/dx = (2/h) d/dxi and dV = vol / 2^dim dxi
    return vol / 2.0**dim * 4.0 / h**2


def element_stiffness(*h) -> np.ndarray:
    """Element matrix of the Laplacian on an axis-aligned box with widths ``h``."""
    h = np.asarray(h, dtype=np.float64)
    if np.any(h <= 0):
        raise ValueError("element spacings must be positive")
    c = _axis_coefficients(h)[0]
    return np.einsum("d,dab->ab", c, _REF[len(h)])


def element_stiffness_2d(hx: float, hy: float) -> np.ndarray:
    return element_stiffness(hx, hy)


def element_stiffness_3d(hx: float, hy: float, hz: float) -> np.ndarray:
    return element_stiffness(hx, hy, hz)


def manufactured_solution(coords: np.ndarray, dim: int) -> np.ndarray:
    """prod_d (1 + x_d): 1+x+y+xy in 2D, the trilinear analogue in 3D."""
    return np.prod(1.0 + coords[:, :dim], axis=1)


@dataclass
class AssembledSystem:
    """Condensed system on the free (non-Dirichlet) vertices."""

    A: sp.csr_matrix
    f: np.ndarray
    u0: np.ndarray
    coords: np.ndarray
    free: np.ndarray
    exact: np.ndarray

    def dof_of_vertex(self, n_vertices: int) -> np.ndarray:
        out = np.full(n_vertices, -1, dtype=np.int64)
        out[self.free] = np.arange(len(self.free))
        return out


def _assemble_full(mesh: Mesh) -> sp.csr_matrix:
    """Scatter-add element matrices, keyed by (vertex, lattice offset)."""
    dim, shape = mesh.dim, mesh.shape
    nv = mesh.n_vertices
    strides = np.cumprod((1,) + shape[:-1])
    cells = _lattice_points(tuple(n - 1 for n in shape))
    h = np.stack([w[cells[:, d]] for d, w in enumerate(mesh.spec.widths)], -1)
    coef = _axis_coefficients(h)  # (n_elements, dim)
    local = np.array(_local_offsets(dim))
    noff = 3**dim
    acc = np.zeros(nv * noff)
    for a in range(2**dim):
        rows = mesh.elements[:, a]
        for b in range(2**dim):
            vals = coef @ _REF[dim][:, a, b]
            off = local[b] - local[a] + 1  # each component in {0, 1, 2}
            code = int(off @ (3 ** np.arange(dim)))
            acc += np.bincount(rows * noff + code, weights=vals, minlength=nv * noff)
    acc = acc.reshape(nv, noff)

    lattice = _lattice_points(shape)
    rows_out, cols_out, vals_out = [], [], []
    for off in itertools.product((-1, 0, 1), repeat=dim):
        off = np.array(off)
        code = int((off + 1) @ (3 ** np.arange(dim)))
        nb = lattice + off
        ok = np.all((nb >= 0) & (nb < np.array(shape)), axis=1)
        v = np.flatnonzero(ok)
        rows_out.append(v)
        cols_out.append(v + int(off @ strides))
        vals_out.append(acc[v, code])
    rows = np.concatenate(rows_out)
    cols = np.concatenate(cols_out)
    vals = np.concatenate(vals_out)
    return csr((vals, (rows, cols)), shape=(nv, nv))


def assemble(mesh: Mesh) -> AssembledSystem:
    """Assemble -Laplace with the polynomial manufactured solution.

    Dirichlet vertices are eliminated; the right-hand side is
    ``f_I - A_ID g`` with ``f = A u*`` so ``u*`` restricted to the free
    vertices solves the condensed system exactly.
    """
    A = _assemble_full(mesh)
    nv = mesh.n_vertices
    is_dir = np.zeros(nv, dtype=bool)
    is_dir[mesh.dirichlet] = True
    free = np.flatnonzero(~is_dir)
    if len(free) == 0:
        raise ValueError("mesh has no free degrees of freedom")
    exact = manufactured_solution(mesh.coords, mesh.dim)
    f_full = A @ exact
    g = np.zeros(nv)
    g[is_dir] = exact[is_dir]
    A_II = csr(A[free][:, free])
    f = f_full[free] - (A[free] @ g)
    return AssembledSystem(A_II, f, np.zeros(len(free)), mesh.coords[free], free, exact[free])


def interior_stencil(A: sp.csr_matrix, mesh: Mesh, vertex: int,
                     dofs: np.ndarray | None = None) -> dict:
    """Row of ``A`` at ``vertex`` keyed by lattice offset (dx, dy[, dz]).

    ``dofs`` maps vertex ids to matrix rows (-1 for eliminated vertices);
    identity when omitted.
    """
    shape = mesh.shape
    ijk = np.array(mesh.lattice(vertex))
    if np.any(ijk < 1) or np.any(ijk > np.array(shape) - 2):
        raise ValueError(f"vertex {vertex} is on the boundary")
    dofs = np.arange(mesh.n_vertices) if dofs is None else dofs
    row = dofs[vertex]
    out = {}
    for off in itertools.product((-1, 0, 1), repeat=mesh.dim):
        nb = mesh.vertex(*(ijk + np.array(off)))
        col = dofs[nb]
        if row < 0 or col < 0:
            raise ValueError(f"vertex {vertex} touches an eliminated vertex")
        out[off] = A[row, col]
    return out


def stencil_classes(dim: int) -> dict:
    """Offset classes for a stencil stretched along the last axis."""
    if dim == 2:
        return {"x": (1, 0), "y": (0, 1), "xy": (1, 1)}
    return {"x": (1, 0, 0), "z": (0, 0, 1), "xy": (1, 1, 0), "xz": (1, 0, 1), "xyz": (1, 1, 1)}


def criterion_curves(dim: int, alphas, soc: str = "system", scaling: str = "sa") -> list:
    """Scaled interior-stencil values per offset class for each stretch factor.

    Returns rows ``(alpha, class, value)`` for a uniaxially stretched mesh.
    """
    from .strength import scaled_entries, soc_matrix

    rows = []
    for alpha in alphas:
        mesh = build_mesh(stretched_spec(dim, 4, alpha, dirichlet=()))
        system = assemble(mesh)
        S = soc_matrix(system.A, system.coords, soc)
        V = scaled_entries(S, scaling)
        center = mesh.vertex(*([2] * dim))
        for name, off in stencil_classes(dim).items():
            col = mesh.vertex(*(2 + np.array(off)))
            rows.append((float(alpha), name, float(V[center, col])))
    return rows


def write_coordinates(path, coords: np.ndarray) -> None:
    np.savetxt(path, coords, fmt="%.17g")
