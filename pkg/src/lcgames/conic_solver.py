"""Block SDP/LP solver in standard form.

    minimize (or maximize)  sum_b <C_b, X_b> + c_lp . x_lp
    subject to              sum_b <A_kb, X_b> + a_klp . x_lp = b_k
                            X_b PSD (real symmetric or complex Hermitian), x_lp >= 0

The method is a primal-dual interior-point iteration on the homogeneous
self-dual embedding (so infeasibility shows up as tau -> 0), using the HKM
search direction with a Mehrotra predictor-corrector.  Hermitian blocks are
mapped to real symmetric blocks of twice the size, [[Re, -Im], [Im, Re]].
Everything is dense except the constraint operator, which is a scipy sparse
matrix over the concatenated row-major vectorisations of the blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

GAP_TOL = 1e-8
FEAS_TOL = 1e-8
MAX_ITER = 100
STEP_FRACTION = 0.98
DENSE_SCHUR_MAX_BLOCK = 40
PAIR_CHUNK = 1500
REFINE_STEPS = 2
# Large blocks whose constraints touch few entries use per-constraint Schur columns.
SPARSE_ROW_FACTOR = 4
SCHUR_COLUMN_BUDGET = 2 ** 24


class SolverError(RuntimeError):
    pass


def random_density(dim, seed=None):
    """Density matrix from a Haar-random pure state on dim x dim with one factor traced out."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    psi = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = psi @ psi.conj().T
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


def min_eigenvalue(matrix, tol=1e-12):
    matrix = np.asarray(matrix)
    if not np.allclose(matrix, matrix.conj().T, atol=tol * max(1.0, np.abs(matrix).max(initial=0.0))):
        raise ValueError("matrix is not Hermitian")
    return float(sla.eigvalsh(matrix, subset_by_index=[0, 0])[0]) if matrix.shape[0] > 1 \
        else float(np.real(matrix[0, 0]))


def realify(matrix):
    """Real symmetric embedding [[Re, -Im], [Im, Re]] of a Hermitian matrix."""
    re, im = matrix.real, matrix.imag
    return np.block([[re, -im], [im, re]])


def complexify(matrix):
    """Inverse of realify, averaging the redundant copies."""
    n = matrix.shape[0] // 2
    re = (matrix[:n, :n] + matrix[n:, n:]) / 2
    im = (matrix[n:, :n] - matrix[:n, n:]) / 2
    return re + 1j * im


class ConicProblem:
    """Standard-form conic program assembled term by term.

    ``block_sizes[b]`` is the order of block ``b``; ``hermitian[b]`` marks a
    complex Hermitian block.  Constraint and objective coefficients are
    given as matrices in the block's own field and as vectors for the LP
    block, keyed by block index or ``"lp"``.
    """

    def __init__(self, block_sizes, hermitian=None, lp_size=0, sense="min"):
        if sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        self.block_sizes = [int(k) for k in block_sizes]
        self.hermitian = [False] * len(self.block_sizes) if hermitian is None else [bool(h) for h in hermitian]
        if len(self.hermitian) != len(self.block_sizes):
            raise ValueError("hermitian flags must match block count")
        self.lp_size = int(lp_size)
        self.sense = sense
        self.real_sizes = [2 * k if h else k for k, h in zip(self.block_sizes, self.hermitian)]
        self.offsets = np.cumsum([0] + [k * k for k in self.real_sizes]).tolist()
        self.n_coords = self.offsets[-1] + self.lp_size
        self._rows, self._cols, self._vals, self._rhs = [], [], [], []
        self.c = np.zeros(self.n_coords)
        self._cache = None

    @property
    def n_constraints(self):
        return len(self._rhs)

    def _embed(self, block, matrix):
        matrix = np.asarray(matrix)
        size = self.block_sizes[block]
        if matrix.shape != (size, size):
            raise ValueError(f"block {block} expects a {size}x{size} coefficient")
        if not np.allclose(matrix, matrix.conj().T, atol=1e-12 * max(1.0, np.abs(matrix).max(initial=0))):
            raise ValueError(f"coefficient for block {block} is not Hermitian")
        if self.hermitian[block]:
            return realify(matrix) / 2
        if np.iscomplexobj(matrix):
            if np.abs(matrix.imag).max(initial=0) > 1e-12:
                raise ValueError(f"block {block} is real but got a complex coefficient")
            matrix = matrix.real
        return (matrix + matrix.T) / 2

    def _flatten_terms(self, terms):
        cols, vals = [], []
        for key, coef in terms.items():
            if key == "lp":
                coef = np.asarray(coef, dtype=float).ravel()
                if coef.size != self.lp_size:
                    raise ValueError("lp coefficient has the wrong length")
                nz = np.flatnonzero(coef)
                cols.append(self.offsets[-1] + nz)
                vals.append(coef[nz])
            else:
                flat = self._embed(key, coef).ravel()
                nz = np.flatnonzero(flat)
                cols.append(self.offsets[key] + nz)
                vals.append(flat[nz])
        if not cols:
            return np.zeros(0, dtype=int), np.zeros(0)
        return np.concatenate(cols), np.concatenate(vals)

    def add_constraint(self, terms, rhs):
        cols, vals = self._flatten_terms(terms)
        row = len(self._rhs)
        self._rows.append(np.full(cols.size, row))
        self._cols.append(cols)
        self._vals.append(vals)
        self._rhs.append(float(rhs))
        self._cache = None

    def add_entry_constraints(self, rows, blocks, i, j, values, rhs):
        """Bulk constraints on entries of real symmetric blocks.

        Row ``rows[k]`` (numbered from 0 within this call) gets the term
        ``values[k] * X_blocks[k][i[k], j[k]]``.  ``rhs`` has one entry per
        new row.
        """
        rows, blocks = np.asarray(rows, dtype=int), np.asarray(blocks, dtype=int)
        i, j = np.asarray(i, dtype=int), np.asarray(j, dtype=int)
        values = np.asarray(values, dtype=float)
        if any(self.hermitian[b] for b in set(blocks.tolist())):
            raise ValueError("entry constraints are only supported on real blocks")
        sizes = np.asarray(self.real_sizes)[blocks]
        offs = np.asarray(self.offsets[:-1])[blocks]
        base = len(self._rhs)
        diag = i == j
        half = np.where(diag, 1.0, 0.5) * values
        self._rows += [base + rows, base + rows[~diag]]
        self._cols += [offs + i * sizes + j, (offs + j * sizes + i)[~diag]]
        self._vals += [half, half[~diag]]
        self._rhs.extend(float(v) for v in np.ravel(rhs))
        self._cache = None

    def add_lp_constraints(self, matrix, rhs):
        """Bulk rows acting on the LP block only; ``matrix`` is (k, lp_size)."""
        coo = sp.coo_matrix(matrix)
        if coo.shape[1] != self.lp_size:
            raise ValueError("lp constraint matrix has the wrong width")
        base = len(self._rhs)
        self._rows.append(base + coo.row)
        self._cols.append(self.offsets[-1] + coo.col)
        self._vals.append(coo.data.astype(float))
        self._rhs.extend(float(v) for v in np.ravel(rhs))
        self._cache = None

    def set_objective(self, terms):
        self.c = np.zeros(self.n_coords)
        cols, vals = self._flatten_terms(terms)
        np.add.at(self.c, cols, vals)

    def operator(self):
        if self._cache is None:
            rows = np.concatenate(self._rows) if self._rows else np.zeros(0, dtype=int)
            cols = np.concatenate(self._cols) if self._cols else np.zeros(0, dtype=int)
            vals = np.concatenate(self._vals) if self._vals else np.zeros(0)
            a = sp.csr_matrix((vals, (rows, cols)), shape=(len(self._rhs), self.n_coords))
            a.sum_duplicates()
            self._cache = _reduce_rows(a, np.array(self._rhs))
        return self._cache

    def unpack(self, vec):
        """Split a coordinate vector into user-facing blocks and the LP part."""
        blocks = []
        for b, size in enumerate(self.real_sizes):
            mat = vec[self.offsets[b]:self.offsets[b + 1]].reshape(size, size)
            mat = (mat + mat.T) / 2
            blocks.append(complexify(mat) if self.hermitian[b] else mat)
        return blocks, vec[self.offsets[-1]:]


def _reduce_rows(a, b):
    """Drop linearly dependent constraint rows; refuse inconsistent ones."""
    m = a.shape[0]
    if m == 0 or m * a.shape[1] > 4e7:
        return a, b, np.arange(m)
    dense = a.toarray()
    q, r, piv = sla.qr(dense.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(dense.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0) * 10
    rank = int(np.sum(diag > tol))
    if rank == m:
        return a, b, np.arange(m)
    keep = np.sort(piv[:rank])
    sol, *_ = np.linalg.lstsq(dense[keep].T, dense.T, rcond=None)
    resid = b - sol.T @ b[keep]
    if np.max(np.abs(resid)) > 1e-9 * (1 + np.abs(b).max()):
        raise SolverError("equality constraints are inconsistent")
    return a[keep], b[keep], keep


@dataclass
class ConicSolution:
    blocks: list
    lp: np.ndarray
    dual: np.ndarray
    primal_value: float
    dual_value: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    status: str
    info: dict = field(default_factory=dict)

    @property
    def value(self):
        return self.primal_value


class _Cones:
    """Block bookkeeping for the real symmetric blocks and the orthant."""

    def __init__(self, sizes, offsets, lp_size):
        self.sizes = sizes
        self.offsets = offsets
        self.lp = slice(offsets[-1], offsets[-1] + lp_size)
        self.lp_size = lp_size
        self.degree = sum(sizes) + lp_size

    def mats(self, vec):
        return [vec[self.offsets[b]:self.offsets[b + 1]].reshape(k, k) for b, k in enumerate(self.sizes)]

    def identity(self):
        vec = np.zeros(self.offsets[-1] + self.lp_size)
        for b, k in enumerate(self.sizes):
            vec[self.offsets[b]:self.offsets[b + 1]] = np.eye(k).ravel()
        vec[self.lp] = 1.0
        return vec

    def max_step(self, vec, dvec):
        """Largest alpha with vec + alpha * dvec in the cone (inf if unbounded)."""
        alpha = np.inf
        for x, dx in zip(self.mats(vec), self.mats(dvec)):
            try:
                low = np.linalg.cholesky(x)
            except np.linalg.LinAlgError:
                return 0.0
            t = sla.solve_triangular(low, dx, lower=True)
            t = sla.solve_triangular(low, t.T, lower=True)
            lam = sla.eigvalsh((t + t.T) / 2, subset_by_index=[0, 0])[0]
            if lam < 0:
                alpha = min(alpha, -1.0 / lam)
        dl = dvec[self.lp]
        neg = dl < 0
        if np.any(neg):
            alpha = min(alpha, float(np.min(-vec[self.lp][neg] / dl[neg])))
        return alpha


def solve(problem, gap_tol=GAP_TOL, feas_tol=FEAS_TOL, max_iter=MAX_ITER):
    a, b, _ = problem.operator()
    sign = -1.0 if problem.sense == "max" else 1.0
    c = sign * problem.c
    cones = _Cones(problem.real_sizes, problem.offsets, problem.lp_size)
    res = _hsd(a, b, c, cones, gap_tol, feas_tol, max_iter)
    x, y, status, it, info = res
    blocks, lp = problem.unpack(x)
    pobj, dobj = float(c @ x), float(b @ y)
    pres = float(np.linalg.norm(a @ x - b) / (1 + np.linalg.norm(b)))
    dres = info.get("dual_residual", np.nan)
    return ConicSolution(blocks=blocks, lp=lp, dual=sign * y,
                         primal_value=sign * pobj, dual_value=sign * dobj,
                         gap=abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj)),
                         primal_residual=pres, dual_residual=dres,
                         iterations=it, status=status, info=info)


def _schur(a_blocks, a_lp, xs, zinvs, x_lp, z_lp, m, pair_data):
    schur = np.zeros((m, m))
    for bi, (x, zinv) in enumerate(zip(xs, zinvs)):
        a_b = a_blocks[bi]
        if a_b is None:
            continue
        if x.shape[0] <= DENSE_SCHUR_MAX_BLOCK:
            dense = a_b if isinstance(a_b, np.ndarray) else a_b.toarray()
            schur += dense @ np.kron(x, zinv) @ dense.T
        elif pair_data[bi][0] == "rows":
            _, sub, groups, chunk = pair_data[bi]
            for start in range(0, m, chunk):
                stop = min(m, start + chunk)
                cols = np.zeros((x.shape[0] * x.shape[0], stop - start))
                for col, row in enumerate(range(start, stop)):
                    ri, si, vals = groups[row]
                    if ri.size:
                        prod = (zinv[:, si] * vals) @ x[ri, :]
                        cols[:, col] = prod.ravel()
                schur[:, start:stop] += sub @ cols
        else:
            _, rows, ri, si, vals = pair_data[bi]
            nnz = rows.size
            owner = sp.csr_matrix((np.ones(nnz), (np.arange(nnz), rows)), shape=(nnz, m))
            for start in range(0, nnz, PAIR_CHUNK):
                sl = slice(start, min(nnz, start + PAIR_CHUNK))
                pair = x[np.ix_(ri[sl], ri)] * zinv[np.ix_(si[sl], si)]
                pair *= vals[sl, None] * vals[None, :]
                schur += owner[sl].T @ (owner.T @ pair.T).T
    if a_lp is not None:
        schur += (a_lp.multiply(x_lp / z_lp) @ a_lp.T).toarray()
    return (schur + schur.T) / 2


def _row_groups(sub, k, m):
    """Per-constraint entry lists for Schur columns computed as Z^-1 A_l X."""
    groups = []
    for row in range(m):
        lo, hi = sub.indptr[row], sub.indptr[row + 1]
        cols = sub.indices[lo:hi]
        groups.append((cols // k, cols % k, sub.data[lo:hi]))
    chunk = max(1, min(m, SCHUR_COLUMN_BUDGET // (k * k)))
    return "rows", sub, groups, chunk


def _hsd(a, b, c, cones, gap_tol, feas_tol, max_iter):
    m, n = a.shape
    at = a.T.tocsr()
    a_blocks, pair_data = [], []
    for bi, k in enumerate(cones.sizes):
        sub = a[:, cones.offsets[bi]:cones.offsets[bi + 1]].tocoo()
        if sub.nnz == 0:
            a_blocks.append(None)
            pair_data.append(None)
            continue
        if k <= DENSE_SCHUR_MAX_BLOCK:
            a_blocks.append(sub.toarray())
            pair_data.append(None)
        else:
            a_blocks.append(sub)
            if sub.nnz <= SPARSE_ROW_FACTOR * k * k:
                pair_data.append(_row_groups(sub.tocsr(), k, m))
            else:
                pair_data.append(("pairs", sub.row, sub.col // k, sub.col % k, sub.data))
    a_lp = a[:, cones.lp] if cones.lp_size else None
    if a_lp is not None and a_lp.nnz == 0:
        a_lp = None

    x = cones.identity()
    z = cones.identity()
    y = np.zeros(m)
    tau, kappa = 1.0, 1.0
    nb, nc = np.linalg.norm(b), np.linalg.norm(c)
    status, info = "max_iter", {}
    it = 0
    best = None

    def apply_h(xs, zinvs, x_lp, z_lp, vec):
        out = np.empty_like(vec)
        for bi, (xm, zi) in enumerate(zip(xs, zinvs)):
            k = cones.sizes[bi]
            v = vec[cones.offsets[bi]:cones.offsets[bi + 1]].reshape(k, k)
            t = xm @ v @ zi
            out[cones.offsets[bi]:cones.offsets[bi + 1]] = ((t + t.T) / 2).ravel()
        out[cones.lp] = x_lp / z_lp * vec[cones.lp]
        return out

    for it in range(max_iter + 1):
        rp = b * tau - a @ x
        rd = c * tau - at @ y - z
        rg = kappa + c @ x - b @ y
        mu = (x @ z + tau * kappa) / (cones.degree + 1)

        pres = np.linalg.norm(rp) / tau / (1 + nb)
        dres = np.linalg.norm(rd) / tau / (1 + nc)
        pobj, dobj = c @ x / tau, b @ y / tau
        gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        info = {"tau": tau, "kappa": kappa, "mu": mu, "dual_residual": float(dres)}
        if pres <= feas_tol and dres <= feas_tol and gap <= gap_tol:
            status = "optimal"
            break
        # late steps on a degenerate face can lose accuracy; keep the best point seen
        score = max(pres / feas_tol, dres / feas_tol, gap / gap_tol)
        if best is None or score < best[0]:
            best = (score, x / tau, y / tau, dict(info))
        if tau < 1e-9 * max(1.0, kappa):
            by, cx = b @ y, c @ x
            if by > 0 and np.linalg.norm(at @ y + z) <= 1e-7 * by:
                status = "infeasible"
                break
            if cx < 0 and np.linalg.norm(a @ x) <= 1e-7 * -cx:
                status = "unbounded"
                break
        if it == max_iter:
            break

        xs = [mat for mat in cones.mats(x)]
        zinvs = []
        for zm in cones.mats(z):
            low = sla.cho_factor(zm, lower=True)
            zinvs.append(sla.cho_solve(low, np.eye(zm.shape[0])))
        x_lp, z_lp = x[cones.lp], z[cones.lp]

        schur = _schur(a_blocks, a_lp, xs, zinvs, x_lp, z_lp, m, pair_data)
        try:
            factor = sla.cho_factor(schur, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            schur[np.diag_indices(m)] += 1e-12 * max(1.0, np.trace(schur) / max(m, 1))
            try:
                factor = sla.cho_factor(schur, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                status = "numerical_error"
                break

        def msolve(rhs):
            # refinement keeps the Newton equations accurate as the Schur matrix degenerates
            sol = sla.cho_solve(factor, rhs, check_finite=False)
            for _ in range(REFINE_STEPS):
                sol = sol + sla.cho_solve(factor, rhs - schur @ sol, check_finite=False)
            return sol

        hc = apply_h(xs, zinvs, x_lp, z_lp, c)
        u = a @ hc
        q = c @ hc
        v2 = msolve(u + b)
        hrd = apply_h(xs, zinvs, x_lp, z_lp, rd)
        bu = b - u

        def direction(sigma, corr, corr_tk):
            eta = 1.0 - sigma
            rc = np.empty_like(x)
            for bi, (xm, zi) in enumerate(zip(xs, zinvs)):
                sl = slice(cones.offsets[bi], cones.offsets[bi + 1])
                rc[sl] = (sigma * mu * zi - xm).ravel()
            rc[cones.lp] = sigma * mu / z_lp - x_lp
            if corr is not None:
                rc -= corr
            rtk = sigma * mu - tau * kappa - corr_tk
            h1 = eta * rp - a @ rc + eta * (a @ hrd)
            h2 = eta * rg + c @ rc - eta * (c @ hrd) + rtk / tau
            v1 = msolve(h1)
            dtau = (h2 - bu @ v1) / (bu @ v2 + q + kappa / tau)
            dy = v1 + v2 * dtau
            dz = eta * rd - at @ dy + c * dtau
            dx = rc - apply_h(xs, zinvs, x_lp, z_lp, dz)
            dkappa = (rtk - kappa * dtau) / tau
            return dx, dy, dz, dtau, dkappa

        def step_length(dx, dz, dtau, dkappa):
            alpha = min(cones.max_step(x, dx), cones.max_step(z, dz))
            if dtau < 0:
                alpha = min(alpha, -tau / dtau)
            if dkappa < 0:
                alpha = min(alpha, -kappa / dkappa)
            return alpha

        dx, dy, dz, dtau, dkappa = direction(0.0, None, 0.0)
        alpha = min(1.0, step_length(dx, dz, dtau, dkappa))
        mu_aff = ((x + alpha * dx) @ (z + alpha * dz) + (tau + alpha * dtau) * (kappa + alpha * dkappa)) \
            / (cones.degree + 1)
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3

        corr = np.empty_like(x)
        for bi, zi in enumerate(zinvs):
            sl = slice(cones.offsets[bi], cones.offsets[bi + 1])
            k = cones.sizes[bi]
            t = dx[sl].reshape(k, k) @ dz[sl].reshape(k, k) @ zi
            corr[sl] = ((t + t.T) / 2).ravel()
        corr[cones.lp] = dx[cones.lp] * dz[cones.lp] / z_lp
        dx, dy, dz, dtau, dkappa = direction(sigma, corr, dtau * dkappa)
        alpha = min(1.0, STEP_FRACTION * step_length(dx, dz, dtau, dkappa))

        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa
        # keep iterates exactly symmetric
        for bi, k in enumerate(cones.sizes):
            sl = slice(cones.offsets[bi], cones.offsets[bi + 1])
            for vec in (x, z):
                mat = vec[sl].reshape(k, k)
                vec[sl] = ((mat + mat.T) / 2).ravel()
    if status in ("max_iter", "numerical_error") and best is not None:
        _, x_best, y_best, info = best
        return x_best, y_best, status, it, info
    return x / tau, y / tau, status, it, info
