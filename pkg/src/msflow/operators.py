"""P1 finite-element kernels for the weak form of the flow.

The weak form reads: integral(u_t phi) + integral((1/v) Du . Dphi)
= boundary integral(cos(alpha) phi ds) - integral(H(x, Du) phi), with
v = sqrt(1 + |Du|^2).  The contact-angle condition enters as the natural
flux cos(alpha) on the boundary.  Mass is lumped everywhere; combined with
the Delaunay M-matrix structure of the stiffness this gives the discrete
comparison principle that the maximum-principle audits rely on.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import BadSpec, NonFiniteField
from .geometry import AngleProfile
from .meshing import TriMesh


class P1Operators:
    """Precomputed per-mesh assembly data with a fixed sparsity pattern.

    Re-assembling the v-weighted stiffness each time step only rescales the
    per-triangle local matrices and re-accumulates them into the cached CSR
    pattern, which keeps long flows cheap and byte-deterministic.
    """

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        tri = mesh.triangles
        p = mesh.nodes[tri]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        two_a = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(two_a <= 0):
            raise BadSpec("mesh contains non-positively-oriented triangles")
        self.areas = 0.5 * two_a
        # gradients of the barycentric basis functions
        g = np.empty((tri.shape[0], 3, 2))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            g[:, i, 0] = p[:, j, 1] - p[:, k, 1]
            g[:, i, 1] = p[:, k, 0] - p[:, j, 0]
        g /= two_a[:, None, None]
        self.grads = g
        # local stiffness blocks: area * (grad_i . grad_j)
        self.local_stiffness = self.areas[:, None, None] * np.einsum(
            "tid,tjd->tij", g, g)

        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        n = mesh.n_nodes
        # canonical CSR pattern shared by every assembly
        pattern = sp.coo_matrix(
            (np.ones(rows.size), (rows, cols)), shape=(n, n)).tocsr()
        pattern.sum_duplicates()
        pattern.sort_indices()
        self._indices = pattern.indices
        self._indptr = pattern.indptr
        self._nnz = pattern.nnz
        # map each local entry to its position in the CSR data array
        flat_keys = rows.astype(np.int64) * n + cols.astype(np.int64)
        csr_rows = np.repeat(np.arange(n), np.diff(self._indptr))
        csr_keys = csr_rows.astype(np.int64) * n + self._indices.astype(np.int64)
        self._entry_pos = np.searchsorted(csr_keys, flat_keys)
        diag_keys = np.arange(n, dtype=np.int64) * n + np.arange(n, dtype=np.int64)
        self._diag_pos = np.searchsorted(csr_keys, diag_keys)

        self.lumped_mass = np.bincount(
            tri.ravel(), weights=np.repeat(self.areas / 3.0, 3), minlength=n)

    def stiffness(self, tri_weights: np.ndarray | None = None,
                  diag_shift: np.ndarray | None = None) -> sp.csr_matrix:
        """CSR matrix sum_K w_K * local_K, optionally plus a diagonal."""
        local = self.local_stiffness
        if tri_weights is not None:
            local = local * np.asarray(tri_weights)[:, None, None]
        data = np.bincount(self._entry_pos, weights=local.ravel(),
                           minlength=self._nnz)
        if diag_shift is not None:
            data[self._diag_pos] += diag_shift
        return sp.csr_matrix((data, self._indices, self._indptr),
                             shape=(self.mesh.n_nodes, self.mesh.n_nodes))

    def gradient_of(self, values: np.ndarray) -> np.ndarray:
        """Exact per-triangle P1 gradient of a nodal field."""
        return np.einsum("ti,tid->td", values[self.mesh.triangles], self.grads)


_OPS_CACHE: "weakref.WeakKeyDictionary[TriMesh, P1Operators]" = weakref.WeakKeyDictionary()


def operators_for(mesh: TriMesh) -> P1Operators:
    ops = _OPS_CACHE.get(mesh)
    if ops is None:
        ops = P1Operators(mesh)
        _OPS_CACHE[mesh] = ops
    return ops


class ScalarField:
    """Nodal values of a function on a mesh.

    Values are frozen at construction so the cached gradient diagnostics
    can never go stale; build modified fields with :meth:`replaced`.
    """

    def __init__(self, mesh: TriMesh, values):
        self.mesh = mesh
        v = np.array(values, dtype=float)
        if v.shape != (mesh.n_nodes,):
            raise BadSpec(
                f"field has {v.shape} values for a mesh with {mesh.n_nodes} nodes")
        v.setflags(write=False)
        self.values = v
        self._diag = None

    @classmethod
    def zeros(cls, mesh: TriMesh) -> "ScalarField":
        return cls(mesh, np.zeros(mesh.n_nodes))

    @classmethod
    def from_function(cls, mesh: TriMesh, func) -> "ScalarField":
        return cls(mesh, func(mesh.nodes))

    def replaced(self, values) -> "ScalarField":
        return ScalarField(self.mesh, values)

    def integral(self) -> float:
        """integral of u dx (exact for P1 via the lumped mass vector)."""
        return float(operators_for(self.mesh).lumped_mass @ self.values)

    def lumped_mean(self) -> float:
        ops = operators_for(self.mesh)
        return float(ops.lumped_mass @ self.values / ops.lumped_mass.sum())

    def diagnostics(self) -> "GradientDiagnostics":
        if self._diag is None:
            self._diag = gradient_diagnostics(self)
        return self._diag


class GradientDiagnostics:
    """Per-triangle Du, v = sqrt(1+|Du|^2), a^ij, and derived reports."""

    def __init__(self, field: ScalarField):
        self.field = field
        self.mesh = field.mesh
        ops = operators_for(field.mesh)
        self.du = ops.gradient_of(field.values)
        if not np.all(np.isfinite(self.du)):
            raise NonFiniteField("field gradient contains non-finite entries")
        self.v = np.sqrt(1.0 + np.sum(self.du * self.du, axis=1))
        self.sup_v = float(self.v.max()) if self.v.size else 1.0

    @cached_property
    def a_matrices(self) -> np.ndarray:
        """a^ij = delta_ij - D_i u D_j u / (1 + |Du|^2), per triangle."""
        outer = self.du[:, :, None] * self.du[:, None, :]
        a = -outer / (self.v ** 2)[:, None, None]
        a[:, 0, 0] += 1.0
        a[:, 1, 1] += 1.0
        return a

    @cached_property
    def nodal_v(self) -> np.ndarray:
        """Area-weighted nodal average of v (reporting only)."""
        ops = operators_for(self.mesh)
        idx = self.mesh.triangles.ravel()
        w = np.repeat(ops.areas, 3)
        num = np.bincount(idx, weights=w * np.repeat(self.v, 3),
                          minlength=self.mesh.n_nodes)
        den = np.bincount(idx, weights=w, minlength=self.mesh.n_nodes)
        return num / den

    def mean_curvature(self, flux: np.ndarray | None = None) -> np.ndarray:
        """Lumped nodal div(Du/v).

        With `flux` (the cos-alpha boundary vector) the natural-boundary
        weak divergence is returned; without it boundary values only see
        the interior part and are unreliable.
        """
        ops = operators_for(self.mesh)
        r = -(ops.stiffness(1.0 / self.v) @ self.field.values)
        if flux is not None:
            r = r + flux
        return r / ops.lumped_mass

    @cached_property
    def curvature_norm_proxy(self) -> np.ndarray:
        """Patch-recovery estimate of |A|^2 per triangle (reporting only).

        P1 has no second derivatives; the Hessian is approximated by the
        gradient of the area-averaged nodal gradient, so no estimate-audit
        uses this quantity.
        """
        ops = operators_for(self.mesh)
        idx = self.mesh.triangles.ravel()
        w = np.repeat(ops.areas, 3)
        den = np.bincount(idx, weights=w, minlength=self.mesh.n_nodes)
        nodal_grad = np.stack([
            np.bincount(idx, weights=w * np.repeat(self.du[:, d], 3),
                        minlength=self.mesh.n_nodes) / den
            for d in range(2)
        ], axis=1)
        hess = np.empty((self.mesh.n_triangles, 2, 2))
        hess[:, 0, :] = ops.gradient_of(nodal_grad[:, 0])
        hess[:, 1, :] = ops.gradient_of(nodal_grad[:, 1])
        hess = 0.5 * (hess + np.transpose(hess, (0, 2, 1)))
        a = self.a_matrices
        ah = np.einsum("tij,tjk->tik", a, hess)
        return np.einsum("tik,tki->t", ah, ah) / self.v ** 2


class ForcingModel:
    """Forcing H(x, p) = polynomial(x) + d . p with declared bounds.

    `terms` is a list of (i, j, c) monomials c * x1^i * x2^j; `p_linear`
    is the optional constant 2-vector d.  The structure tag
    `depends_on_gradient` is True iff d != 0, matching the H(x) versus
    H(x, p) distinction the estimates care about.
    """

    def __init__(self, terms=(), p_linear=None, name: str | None = None):
        self.terms = [(int(i), int(j), float(c)) for i, j, c in terms]
        self.p_linear = (np.zeros(2) if p_linear is None
                         else np.asarray(p_linear, dtype=float))
        if self.p_linear.shape != (2,):
            raise BadSpec("p_linear must be a 2-vector")
        self.depends_on_gradient = bool(np.any(self.p_linear != 0.0))
        self.name = name or self._default_name()

    def _default_name(self):
        if not self.terms and not self.depends_on_gradient:
            return "zero"
        bits = [f"{c:g}*x1^{i}*x2^{j}" for i, j, c in self.terms]
        if self.depends_on_gradient:
            bits.append(f"({self.p_linear[0]:g},{self.p_linear[1]:g}).p")
        return " + ".join(bits) or "0"

    @classmethod
    def zero(cls) -> "ForcingModel":
        return cls((), None, "zero")

    @classmethod
    def constant(cls, c: float) -> "ForcingModel":
        return cls([(0, 0, c)], None, f"const {c:g}")

    @classmethod
    def linear_x1(cls, c: float = 1.0) -> "ForcingModel":
        return cls([(1, 0, c)], None, f"{c:g}*x1")

    def __call__(self, points: np.ndarray, grads: np.ndarray | None = None) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        out = np.zeros(points.shape[0])
        for i, j, c in self.terms:
            out += c * points[:, 0] ** i * points[:, 1] ** j
        if self.depends_on_gradient:
            if grads is None:
                raise BadSpec("gradient-dependent forcing evaluated without gradients")
            out += grads @ self.p_linear
        return out

    def grad_x(self, points: np.ndarray) -> np.ndarray:
        """H_x, analytic from the monomial terms."""
        points = np.asarray(points, dtype=float)
        out = np.zeros_like(points)
        for i, j, c in self.terms:
            if i > 0:
                out[:, 0] += c * i * points[:, 0] ** (i - 1) * points[:, 1] ** j
            if j > 0:
                out[:, 1] += c * j * points[:, 0] ** i * points[:, 1] ** (j - 1)
        return out

    def grad_p(self, points: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.p_linear, (np.asarray(points).shape[0], 2)).copy()

    def sup_abs(self, points: np.ndarray, p_max: float = 0.0) -> float:
        """Sampled bound c_H = sup |H| over the points and |p| <= p_max."""
        base = float(np.max(np.abs(self(points, np.zeros((len(points), 2))))))
        return base + float(np.linalg.norm(self.p_linear)) * p_max


def assemble_mass(mesh: TriMesh) -> np.ndarray:
    """Lumped (diagonal) mass operator: entry i = sum of adjacent areas / 3."""
    return operators_for(mesh).lumped_mass.copy()


def assemble_stiffness(mesh: TriMesh, diag: GradientDiagnostics) -> sp.csr_matrix:
    """v-weighted stiffness K(u)_ij = sum_K (1/v_K) int_K Dphi_i . Dphi_j."""
    return operators_for(mesh).stiffness(1.0 / diag.v)


def boundary_flux_vector(mesh: TriMesh, alpha_profile: AngleProfile) -> np.ndarray:
    """Natural flux b_i = sum over adjacent boundary edges of len/2 * cos(alpha).

    Midpoint quadrature of the boundary term in the weak form; second
    order, consistent with P1.
    """
    cos_a = mesh.edge_cos_alpha(alpha_profile)
    contrib = 0.5 * mesh.boundary_edge_length * cos_a
    return (np.bincount(mesh.boundary_edges[:, 0], weights=contrib,
                        minlength=mesh.n_nodes)
            + np.bincount(mesh.boundary_edges[:, 1], weights=contrib,
                          minlength=mesh.n_nodes))


def forcing_vector(mesh: TriMesh, field: ScalarField | None,
                   model: ForcingModel) -> np.ndarray:
    """f_i = integral H(x, Du) phi_i by one-point (centroid) quadrature."""
    ops = operators_for(mesh)
    centroids = mesh.nodes[mesh.triangles].mean(axis=1)
    grads = None
    if model.depends_on_gradient:
        if field is None:
            raise BadSpec("gradient-dependent forcing needs a field")
        grads = field.diagnostics().du
    h_vals = model(centroids, grads)
    return np.bincount(mesh.triangles.ravel(),
                       weights=np.repeat(ops.areas * h_vals / 3.0, 3),
                       minlength=mesh.n_nodes)


def gradient_diagnostics(field: ScalarField) -> GradientDiagnostics:
    """Exact P1 per-triangle gradients with v, a^ij and sup v."""
    return GradientDiagnostics(field)
