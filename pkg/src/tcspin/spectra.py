"""Ground states and low-lying spectra: dense oracle, Lanczos workhorse, GHZ diagnostics."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, ModelError
from .models import build_ghz
from .pauli import Operator, StateVector, to_dense

# Eigenvalues closer than this are treated as one degenerate cluster; dense
# solvers return an arbitrary basis inside such a cluster, so GHZ overlaps
# are measured against the cluster projector.
CLUSTER_TOL = 1e-9


@dataclass
class SpectrumResult:
    """Eigenvalues in ascending order with matching (row-wise) eigenvectors.

    ``residuals[i]`` is ||H v_i - E_i v_i|| recomputed with the matrix-free
    matvec; ``n_converged`` counts the pairs meeting the solver tolerance
    (always all of them for the dense path).
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray  # shape (n_pairs, 2**n_sites), row i is eigenvector i
    method: str
    residuals: np.ndarray
    n_converged: int
    n_sites: int
    n_requested: int | None = None

    @property
    def n_pairs(self) -> int:
        return len(self.eigenvalues)

    def state(self, i: int) -> StateVector:
        return StateVector(self.n_sites, self.vectors[i].copy())

    def clusters(self, tol: float = CLUSTER_TOL) -> list[list[int]]:
        """Indices grouped into degenerate clusters (consecutive gap < tol)."""
        groups: list[list[int]] = []
        for i, e in enumerate(self.eigenvalues):
            if groups and e - self.eigenvalues[groups[-1][-1]] < tol:
                groups[-1].append(i)
            else:
                groups.append([i])
        return groups

    def to_json(self, include_vectors: bool = False) -> str:
        doc: dict = {
            "method": self.method,
            "n_sites": self.n_sites,
            "n_converged": self.n_converged,
            "n_requested": self.n_requested,
            "eigenvalues": [float(e) for e in self.eigenvalues],
            "residuals": [float(r) for r in self.residuals],
        }
        if include_vectors:
            doc["vectors"] = [
                [[float(a.real), float(a.imag)] for a in row] for row in self.vectors
            ]
        return json.dumps(doc)


def _residuals(op: Operator, eigenvalues: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    out = np.empty(len(eigenvalues))
    for i, (e, v) in enumerate(zip(eigenvalues, vectors)):
        out[i] = np.linalg.norm(op.matvec(v) - e * v)
    return out


def dense_spectrum(op: Operator, hermiticity_tol: float = 1e-12) -> SpectrumResult:
    """Full Hermitian eigendecomposition via a dense matrix.

    Oracle path: subject to the dense site cap. Raises ModelError for a
    non-Hermitian operator.
    """
    if not op.is_hermitian(hermiticity_tol):
        raise ModelError("dense_spectrum requires a Hermitian operator")
    mat = to_dense(op)
    eigenvalues, columns = np.linalg.eigh(mat)
    vectors = np.ascontiguousarray(columns.T)
    residuals = _residuals(op, eigenvalues, vectors)
    return SpectrumResult(
        eigenvalues=eigenvalues,
        vectors=vectors,
        method="dense",
        residuals=residuals,
        n_converged=len(eigenvalues),
        n_sites=op.n_sites,
        n_requested=len(eigenvalues),
    )


def _orthogonalize(w: np.ndarray, basis: np.ndarray, n: int) -> np.ndarray:
    """Two rounds of classical Gram-Schmidt against the first n basis rows."""
    for _ in range(2):
        coeffs = basis[:n].conj() @ w
        w = w - basis[:n].T @ coeffs
    return w


def _orthogonalize_joint(
    w: np.ndarray, deflate: np.ndarray, n_deflate: int, basis: np.ndarray, n_basis: int
) -> np.ndarray:
    """Gram-Schmidt against locked eigenvectors and the Krylov basis together.

    Both sets must be cleaned inside the same round: projecting out the
    locked vectors first and the basis separately lets the basis pass
    reintroduce locked components, which then amplify by ||H||/beta at every
    Lanczos step with a small beta.
    """
    for _ in range(2):
        if n_deflate:
            w = w - deflate[:n_deflate].T @ (deflate[:n_deflate].conj() @ w)
        w = w - basis[:n_basis].T @ (basis[:n_basis].conj() @ w)
    return w


def _lowest_deflated_eigenpair(
    op: Operator,
    v0: np.ndarray,
    tol: float,
    budget: int,
    m_cap: int,
    keep: int,
    deflate: np.ndarray,
    breakdown_tol: float,
) -> tuple[float, np.ndarray, float, int, bool]:
    """Lowest eigenpair orthogonal to ``deflate`` by thick-restart Lanczos.

    At every restart the ``keep`` lowest Ritz vectors are retained together
    with the next Lanczos vector, so convergence inside quasi-degenerate
    manifolds is not thrown away (a plain restart stalls there). The small
    projected matrix is diagonal on the kept block with an arrow coupling to
    the first continuation vector, then tridiagonal.

    Returns (value, vector, residual, matvecs_used, converged).
    """
    dim = v0.shape[0]
    m_cap = min(m_cap, dim)
    basis = np.empty((m_cap + 1, dim), dtype=np.complex128)
    basis[0] = v0
    kept = 0
    theta_kept = np.empty(0)
    arrow = np.empty(0)
    matvecs = 0
    best_val, best_vec, best_resid = np.inf, v0, np.inf
    n_deflate = len(deflate)

    while matvecs < budget:
        alphas: list[float] = []
        betas: list[float] = []
        j = kept
        beta_last = 0.0
        while j < m_cap and matvecs < budget:
            w = op.matvec(basis[j])
            matvecs += 1
            alpha = float(np.vdot(basis[j], w).real)
            alphas.append(alpha)
            w = _orthogonalize_joint(w, deflate, n_deflate, basis, j + 1)
            beta_last = float(np.linalg.norm(w))
            j += 1
            if beta_last < breakdown_tol:
                beta_last = 0.0
                break
            basis[j] = w / beta_last
            if j == m_cap:
                break
            betas.append(beta_last)

        n_small = j
        q = len(alphas)
        betas = betas[: q - 1]  # the final beta couples to the next vector, outside the block
        small = np.zeros((n_small, n_small))
        if kept:
            small[:kept, :kept] = np.diag(theta_kept)
            small[:kept, kept] = arrow
            small[kept, :kept] = arrow
        for i in range(q):
            small[kept + i, kept + i] = alphas[i]
        for i in range(len(betas)):
            small[kept + i, kept + i + 1] = betas[i]
            small[kept + i + 1, kept + i] = betas[i]
        theta, u = scipy.linalg.eigh(small)

        ritz = basis[:n_small].T @ u[:, 0]
        nrm = float(np.linalg.norm(ritz))
        if nrm == 0.0:
            break
        ritz /= nrm
        resid = float(np.linalg.norm(op.matvec(ritz) - theta[0] * ritz))
        matvecs += 1
        if resid < best_resid:
            best_val, best_vec, best_resid = float(theta[0]), ritz, resid
        if resid <= tol:
            return float(theta[0]), ritz, resid, matvecs, True
        if beta_last == 0.0:
            # invariant subspace exhausted; the Ritz pair is as exact as the
            # arithmetic allows
            return best_val, best_vec, best_resid, matvecs, best_resid <= tol

        p = min(keep, n_small - 1)
        kept_block = u[:, :p].T @ basis[:n_small]
        theta_kept = theta[:p].copy()
        arrow = beta_last * u[n_small - 1, :p].copy()
        next_vec = w / beta_last
        basis[:p] = kept_block
        basis[p] = next_vec
        kept = p
    return best_val, best_vec, best_resid, matvecs, False


def lanczos_extremal(
    op: Operator,
    k: int,
    tol: float = 1e-10,
    max_iter: int = 5000,
    seed: int = 0,
) -> SpectrumResult:
    """The k lowest eigenpairs by thick-restart Lanczos with explicit deflation.

    Uses only the matrix-free matvec. Eigenpairs are converged one at a time,
    each fully reorthogonalized against the current Krylov basis and all
    previously accepted eigenvectors; the deflation makes repeated
    (degenerate) eigenvalues reachable, which plain Lanczos misses.
    Deterministic for a fixed seed. ``max_iter`` caps the total matvec count;
    on exhaustion a partial result is returned with ``n_converged < k``
    rather than failing silently.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    dim = 1 << op.n_sites
    if k > dim:
        raise ValueError(f"k={k} exceeds the Hilbert-space dimension {dim}")
    if not op.is_hermitian():
        raise ModelError("lanczos_extremal requires a Hermitian operator")

    rng = np.random.default_rng(seed)
    m_cap = min(dim, max(60, 3 * k + 10))
    keep = max(8, min(m_cap // 3, 20))
    found_vals: list[float] = []
    found_vecs: list[np.ndarray] = []
    matvecs = 0
    breakdown_tol = 1e-13 * max(1.0, op.one_norm())

    def next_start() -> np.ndarray | None:
        for _ in range(8):
            v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            if found_vecs:
                v = _orthogonalize(v, np.asarray(found_vecs), len(found_vecs))
            nrm = np.linalg.norm(v)
            if nrm > 1e-8:
                return v / nrm
        return None

    while len(found_vals) < k and matvecs < max_iter:
        v0 = next_start()
        if v0 is None:
            break
        deflate = np.asarray(found_vecs) if found_vecs else np.empty((0, dim), np.complex128)
        val, vec, _, used, converged = _lowest_deflated_eigenpair(
            op, v0, tol, max_iter - matvecs, m_cap, keep, deflate, breakdown_tol
        )
        matvecs += used
        if not converged:
            break
        found_vals.append(val)
        found_vecs.append(vec)

    order = np.argsort(found_vals)
    eigenvalues = np.array([found_vals[i] for i in order])
    vectors = (
        np.array([found_vecs[i] for i in order])
        if found_vals
        else np.empty((0, dim), np.complex128)
    )
    residuals = _residuals(op, eigenvalues, vectors)
    return SpectrumResult(
        eigenvalues=eigenvalues,
        vectors=vectors,
        method="lanczos",
        residuals=residuals,
        n_converged=int(np.sum(residuals <= tol)),
        n_sites=op.n_sites,
        n_requested=k,
    )


@dataclass
class GHZEntry:
    index: int
    energy: float
    overlap_plus: float
    overlap_minus: float


@dataclass
class GHZReport:
    """Per-eigenstate GHZ overlaps and the energy gap of the best +/- pair.

    Overlaps are squared norms of the GHZ state projected onto the degenerate
    cluster containing each eigenstate, so every member of a cluster reports
    the cluster total. The best-overlap state on equal overlaps is the one
    with the lowest energy; ``ghz_gap`` is reported as an absolute value.
    """

    entries: list[GHZEntry]
    clusters: list[list[int]]
    best_plus_index: int
    best_minus_index: int
    ghz_gap: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "entries": [
                    {
                        "index": e.index,
                        "energy": e.energy,
                        "overlap_plus": e.overlap_plus,
                        "overlap_minus": e.overlap_minus,
                    }
                    for e in self.entries
                ],
                "clusters": self.clusters,
                "best_plus_index": self.best_plus_index,
                "best_minus_index": self.best_minus_index,
                "ghz_gap": self.ghz_gap,
            }
        )


def ghz_overlap_report(spec: SpectrumResult, n: int, cluster_tol: float = CLUSTER_TOL) -> GHZReport:
    """GHZ+/- overlaps for every computed eigenstate, cluster-resolved."""
    if spec.n_pairs == 0:
        raise ValueError("spectrum carries no eigenvectors")
    if spec.n_sites != n:
        raise DimensionError(f"spectrum on {spec.n_sites} sites, requested {n}")
    plus = build_ghz(n, "plus").amplitudes
    minus = build_ghz(n, "minus").amplitudes
    # <GHZ|v_i> for all i at once; only two basis amplitudes are nonzero.
    amp_plus = spec.vectors @ plus.conj()
    amp_minus = spec.vectors @ minus.conj()
    clusters = spec.clusters(cluster_tol)
    overlap_plus = np.empty(spec.n_pairs)
    overlap_minus = np.empty(spec.n_pairs)
    for group in clusters:
        total_p = float(np.sum(np.abs(amp_plus[group]) ** 2))
        total_m = float(np.sum(np.abs(amp_minus[group]) ** 2))
        overlap_plus[group] = total_p
        overlap_minus[group] = total_m
    entries = [
        GHZEntry(
            index=i,
            energy=float(spec.eigenvalues[i]),
            overlap_plus=float(overlap_plus[i]),
            overlap_minus=float(overlap_minus[i]),
        )
        for i in range(spec.n_pairs)
    ]
    # max overlap wins; ties resolved toward the lowest energy, which is the
    # first index since eigenvalues are ascending.
    best_plus = int(np.argmax(overlap_plus))
    best_minus = int(np.argmax(overlap_minus))
    gap = abs(float(spec.eigenvalues[best_plus] - spec.eigenvalues[best_minus]))
    return GHZReport(
        entries=entries,
        clusters=clusters,
        best_plus_index=best_plus,
        best_minus_index=best_minus,
        ghz_gap=gap,
    )


def parity_expectation(v: StateVector, norm_tol: float = 1e-10) -> float:
    """<v| product of all sigma_x |v| for a normalized state.

    The all-X string sends basis index i to its bitwise complement, which is
    exactly index reversal of the amplitude array.
    """
    if abs(v.norm - 1.0) > norm_tol:
        raise ValueError(f"state is not normalized (norm {v.norm})")
    val = np.vdot(v.amplitudes, v.amplitudes[::-1])
    return float(val.real)
