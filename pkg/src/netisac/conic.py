"""Small dense conic programs: nonnegative, second-order and PSD cones.

Problems are stated as *maximize* ``c @ x`` over a real variable vector with

* ``A_eq @ x == b_eq``
* ``G_lin @ x <= h_lin``
* second-order cones ``F @ x + f0 = (t, u)`` with ``||u|| <= t``
* linear matrix inequalities ``mat(F @ x + f0) >= 0`` (column-major, symmetric)

Hermitian matrix variables enter through their real embedding
``[[Re W, -Im W], [Im W, Re W]]``; :class:`ProblemBuilder` keeps the
parametrisation so callers can state constraints in complex terms.

The numerical work is delegated to the primal-dual interior-point method with
Nesterov-Todd scaling in :func:`cvxopt.solvers.conelp`, which is deterministic
for a fixed input.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TextIO

import cvxopt
import numpy as np

STATUSES = ("optimal", "infeasible", "unbounded", "max_iters")


@dataclass
class ConicProblem:
    n_vars: int
    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    G_lin: np.ndarray
    h_lin: np.ndarray
    soc: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    psd: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    # sizes of the matrix blocks declared through the builder (informational)
    psd_blocks: list[int] = field(default_factory=list)

    def __post_init__(self):
        V = self.n_vars
        self.c = np.asarray(self.c, dtype=float).reshape(V)
        self.A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, V)
        self.b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        self.G_lin = np.asarray(self.G_lin, dtype=float).reshape(-1, V)
        self.h_lin = np.asarray(self.h_lin, dtype=float).reshape(-1)
        if self.A_eq.shape[0] != self.b_eq.size or self.G_lin.shape[0] != self.h_lin.size:
            raise ValueError("constraint rows and right-hand sides disagree in length")
        for F, f0 in self.soc:
            if F.shape != (f0.size, V) or f0.size < 1:
                raise ValueError("malformed second-order cone constraint")
        for F, f0 in self.psd:
            n = int(round(np.sqrt(f0.size)))
            if n * n != f0.size or F.shape != (f0.size, V):
                raise ValueError("malformed PSD constraint")
        arrays = [self.c, self.A_eq, self.b_eq, self.G_lin, self.h_lin]
        arrays += [a for pair in self.soc + self.psd for a in pair]
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValueError("problem data must be finite")

    def psd_sizes(self) -> list[int]:
        return [int(round(np.sqrt(f0.size))) for _, f0 in self.psd]

    def residuals(self, x: np.ndarray) -> float:
        """Largest absolute constraint violation at ``x``."""
        viol = [0.0]
        if self.b_eq.size:
            viol.append(np.max(np.abs(self.A_eq @ x - self.b_eq)))
        if self.h_lin.size:
            viol.append(np.max(self.G_lin @ x - self.h_lin))
        for F, f0 in self.soc:
            s = F @ x + f0
            viol.append(np.linalg.norm(s[1:]) - s[0])
        for F, f0 in self.psd:
            n = int(round(np.sqrt(f0.size)))
            S = (F @ x + f0).reshape(n, n)
            viol.append(-np.linalg.eigvalsh(0.5 * (S + S.T))[0])
        return float(max(viol))


@dataclass
class ConicSolution:
    status: str
    x: np.ndarray
    objective: float
    dual_bound: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int

    @property
    def kkt_residuals(self) -> tuple[float, float, float]:
        return (self.primal_residual, self.dual_residual, self.gap)


def solve(problem: ConicProblem, tol: float = 1e-8, max_iters: int = 100) -> ConicSolution:
    """Solve ``problem`` to relative accuracy ``tol``.

    Infeasibility and iteration exhaustion are reported through ``status``,
    never raised, so callers can probe feasibility.
    """
    if not 1e-10 <= tol <= 1e-4:
        raise ValueError(f"tol must lie in [1e-10, 1e-4], got {tol}")
    p = problem
    V = p.n_vars
    G_blocks = [p.G_lin] + [-F for F, _ in p.soc] + [-F for F, _ in p.psd]
    h_blocks = [p.h_lin] + [f0 for _, f0 in p.soc] + [f0 for _, f0 in p.psd]
    G = np.vstack(G_blocks) if G_blocks else np.zeros((0, V))
    h = np.concatenate(h_blocks) if h_blocks else np.zeros(0)
    dims = {"l": p.h_lin.size, "q": [f0.size for _, f0 in p.soc], "s": p.psd_sizes()}

    kwargs = {}
    if p.b_eq.size:
        kwargs["A"] = cvxopt.matrix(p.A_eq)
        kwargs["b"] = cvxopt.matrix(p.b_eq)
    options = {
        "show_progress": False,
        "maxiters": int(max_iters),
        "abstol": tol,
        "reltol": tol,
        "feastol": tol,
        "refinement": 1,
    }
    try:
        res = cvxopt.solvers.conelp(
            cvxopt.matrix(-p.c), cvxopt.matrix(G), cvxopt.matrix(h), dims, options=options, **kwargs
        )
    except (ValueError, ArithmeticError):
        # rank-deficient KKT system; no usable iterate
        nan = float("nan")
        return ConicSolution("max_iters", np.zeros(V), nan, nan, nan, nan, nan, 0)

    x = np.array(res["x"]).reshape(-1) if res["x"] is not None else np.zeros(V)
    status = {
        "optimal": "optimal",
        "primal infeasible": "infeasible",
        "dual infeasible": "unbounded",
    }.get(res["status"], "max_iters")

    objective = float(p.c @ x)
    dual_obj = res.get("dual objective")
    dual_bound = -float(dual_obj) if dual_obj is not None else float("nan")
    pres = p.residuals(x) if status != "infeasible" else float("nan")
    dres = res.get("dual infeasibility")
    gap = res.get("gap")
    return ConicSolution(
        status=status,
        x=x,
        objective=objective,
        dual_bound=dual_bound,
        primal_residual=pres,
        dual_residual=float(dres) if dres is not None else float("nan"),
        gap=float(gap) if gap is not None else float("nan"),
        iterations=int(res.get("iterations", 0)),
    )


def embed_hermitian(H: np.ndarray) -> np.ndarray:
    """Real symmetric embedding ``[[Re H, -Im H], [Im H, Re H]]``."""
    H = np.asarray(H)
    scale = max(1.0, float(np.abs(H).max())) if H.size else 1.0
    if H.shape[0] != H.shape[1] or np.abs(H - H.conj().T).max(initial=0.0) > 1e-10 * scale:
        raise ValueError("embed_hermitian expects a square Hermitian matrix")
    re, im = H.real, H.imag
    return np.block([[re, -im], [im, re]])


@lru_cache(maxsize=None)
def hermitian_basis(n: int) -> np.ndarray:
    """Real basis of n x n Hermitian matrices, shape (n*n, n, n).

    Order: diagonal entries, then for every p < q the real and imaginary part
    of entry (p, q).
    """
    basis = []
    for r in range(n):
        E = np.zeros((n, n), dtype=complex)
        E[r, r] = 1.0
        basis.append(E)
    for p in range(n):
        for q in range(p + 1, n):
            E = np.zeros((n, n), dtype=complex)
            E[p, q] = E[q, p] = 1.0
            basis.append(E)
            E = np.zeros((n, n), dtype=complex)
            E[p, q] = 1j
            E[q, p] = -1j
            basis.append(E)
    out = np.array(basis)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _embedded_basis(n: int) -> np.ndarray:
    B = hermitian_basis(n)
    cols = [np.block([[E.real, -E.imag], [E.imag, E.real]]).reshape(-1) for E in B]
    out = np.array(cols).T
    out.setflags(write=False)
    return out


def hermitian_from_params(x: np.ndarray, n: int) -> np.ndarray:
    return np.tensordot(np.asarray(x, dtype=float), hermitian_basis(n), axes=1)


def hermitian_to_params(W: np.ndarray) -> np.ndarray:
    n = W.shape[0]
    out = [W[r, r].real for r in range(n)]
    for p in range(n):
        for q in range(p + 1, n):
            out += [W[p, q].real, W[p, q].imag]
    return np.array(out)


def trace_form(C: np.ndarray) -> np.ndarray:
    """Coefficients ``g`` with ``Re tr(C W) = g @ params(W)`` for Hermitian W."""
    n = C.shape[0]
    return np.einsum("ij,kji->k", C, hermitian_basis(n)).real


class ProblemBuilder:
    """Incremental assembly of a :class:`ConicProblem`."""

    def __init__(self):
        self.n_vars = 0
        self._c: dict[int, float] = {}
        self._eq: list[tuple[dict, float]] = []
        self._lin: list[tuple[dict, float]] = []
        self._soc: list[tuple[list, np.ndarray]] = []
        self._psd: list[tuple[slice, np.ndarray, np.ndarray]] = []
        self._blocks: list[int] = []

    def add_vars(self, n: int) -> slice:
        s = slice(self.n_vars, self.n_vars + n)
        self.n_vars += n
        return s

    def add_hermitian_block(self, n: int) -> slice:
        """Hermitian PSD matrix variable; returns the slice of its n*n params."""
        s = self.add_vars(n * n)
        self._psd.append((s, _embedded_basis(n), np.zeros(4 * n * n)))
        self._blocks.append(2 * n)
        return s

    def add_psd_block(self, n: int) -> slice:
        """Real symmetric PSD matrix variable in lower-triangular packing."""
        m = n * (n + 1) // 2
        s = self.add_vars(m)
        F = np.zeros((n * n, m))
        k = 0
        for j in range(n):
            for i in range(j, n):
                F[i + j * n, k] = 1.0
                F[j + i * n, k] = 1.0
                k += 1
        self._psd.append((s, F, np.zeros(n * n)))
        self._blocks.append(n)
        return s

    @staticmethod
    def _row(terms) -> dict:
        row: dict[int, float] = {}
        for idx, coef in terms:
            if isinstance(idx, slice):
                for j, v in zip(range(idx.start, idx.stop), np.atleast_1d(coef)):
                    row[j] = row.get(j, 0.0) + float(v)
            else:
                row[idx] = row.get(idx, 0.0) + float(coef)
        return row

    def maximize(self, terms):
        for j, v in self._row(terms).items():
            self._c[j] = self._c.get(j, 0.0) + v

    def add_le(self, terms, rhs: float):
        """``sum(coef . x[idx]) <= rhs``; ``terms`` is a list of (index|slice, coef)."""
        self._lin.append((self._row(terms), float(rhs)))

    def add_ge(self, terms, rhs: float):
        self.add_le([(i, -np.asarray(c)) for i, c in terms], -rhs)

    def add_eq(self, terms, rhs: float):
        self._eq.append((self._row(terms), float(rhs)))

    def add_soc(self, rows: list, offsets) -> None:
        """Cone ``(r_0 + o_0, ..., r_d + o_d)`` with each ``r_i`` given as terms."""
        self._soc.append(([self._row(r) for r in rows], np.asarray(offsets, dtype=float)))

    def build(self) -> ConicProblem:
        V = self.n_vars

        def dense(rows):
            M = np.zeros((len(rows), V))
            for i, row in enumerate(rows):
                for j, v in row.items():
                    M[i, j] = v
            return M

        c = np.zeros(V)
        for j, v in self._c.items():
            c[j] = v
        soc = [(dense(rows), off) for rows, off in self._soc]
        psd = []
        for s, Fb, f0 in self._psd:
            F = np.zeros((Fb.shape[0], V))
            F[:, s] = Fb
            psd.append((F, f0.copy()))
        return ConicProblem(
            n_vars=V,
            c=c,
            A_eq=dense([r for r, _ in self._eq]),
            b_eq=np.array([b for _, b in self._eq]),
            G_lin=dense([r for r, _ in self._lin]),
            h_lin=np.array([b for _, b in self._lin]),
            soc=soc,
            psd=psd,
            psd_blocks=list(self._blocks),
        )


def dump_problem(problem: ConicProblem, fh: TextIO) -> None:
    """Write a self-describing text dump, one section per cone, dense row-major."""
    p = problem

    def mat(name, M, extra=""):
        fh.write(f"[{name}] rows={M.shape[0]} cols={M.shape[1]}{extra}\n")
        for row in M:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")

    fh.write("# netisac conic problem: maximize c.x\n")
    fh.write(f"vars {p.n_vars}\n")
    mat("objective", p.c.reshape(1, -1))
    mat("eq", np.column_stack([p.A_eq, p.b_eq]) if p.b_eq.size else np.zeros((0, p.n_vars + 1)),
        " layout=A|b")
    mat("nonneg", np.column_stack([p.G_lin, p.h_lin]) if p.h_lin.size else np.zeros((0, p.n_vars + 1)),
        " layout=G|h meaning G.x<=h")
    for F, f0 in p.soc:
        mat("soc", np.column_stack([F, f0]), " layout=F|f0 meaning F.x+f0 in SOC")
    for F, f0 in p.psd:
        n = int(round(np.sqrt(f0.size)))
        mat("psd", np.column_stack([F, f0]), f" n={n} layout=F|f0 meaning mat(F.x+f0) PSD")


def load_problem(fh: TextIO) -> ConicProblem:
    """Inverse of :func:`dump_problem`."""
    lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    V = int(lines[0].split()[1])
    sections: list[tuple[str, np.ndarray]] = []
    i = 1
    while i < len(lines):
        head = lines[i].split()
        name = head[0].strip("[]")
        nrows = int(head[1].split("=")[1])
        ncols = int(head[2].split("=")[1])
        rows = [np.array([float(v) for v in lines[i + 1 + r].split()]) for r in range(nrows)]
        sections.append((name, np.array(rows).reshape(nrows, ncols)))
        i += 1 + nrows
    c = np.zeros(V)
    A = np.zeros((0, V)); b = np.zeros(0)
    G = np.zeros((0, V)); h = np.zeros(0)
    soc, psd = [], []
    for name, M in sections:
        if name == "objective":
            c = M[0]
        elif name == "eq":
            A, b = M[:, :V], M[:, V]
        elif name == "nonneg":
            G, h = M[:, :V], M[:, V]
        elif name == "soc":
            soc.append((M[:, :V].copy(), M[:, V].copy()))
        elif name == "psd":
            psd.append((M[:, :V].copy(), M[:, V].copy()))
    return ConicProblem(V, c, A, b, G, h, soc, psd)


def dumps_problem(problem: ConicProblem) -> str:
    buf = io.StringIO()
    dump_problem(problem, buf)
    return buf.getvalue()
