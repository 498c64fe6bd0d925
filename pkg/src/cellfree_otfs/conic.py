"""Standard-form cone programs and pluggable solver backends.

A :class:`ConeProgram` is

    minimize    c^T x
    subject to  s = b - A x,   s in K

with ``K`` the product, in this order, of a zero cone of size ``zero``, a
nonnegative orthant of size ``nonneg`` and second-order cones of sizes
``soc`` (each ``(t, u)`` with ``||u|| <= t``).  ``A`` is any scipy sparse
matrix (triplet/COO input is fine).  This is the convention shared by SCS
and Clarabel, so a backend only needs to translate cone descriptors.

Backends return a :class:`ConeResult` whose ``status`` is one of
``"optimal"``, ``"infeasible"`` or ``"failed"``; the primal residual is
recomputed here rather than taken from the solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import scipy.sparse as sp

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
FAILED = "failed"


@dataclass
class ConeProgram:
    c: np.ndarray
    A: sp.spmatrix
    b: np.ndarray
    zero: int = 0
    nonneg: int = 0
    soc: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.A = sp.csc_matrix(self.A)
        m = self.zero + self.nonneg + sum(self.soc)
        if self.A.shape != (m, self.c.size) or self.b.size != m:
            raise ValueError(f"inconsistent cone program: A {self.A.shape}, b {self.b.size}, cones {m}")

    @property
    def sizes(self) -> dict[str, int]:
        return {"n_vars": self.c.size, "n_lin": self.zero + self.nonneg,
                "n_soc": len(self.soc), "n_rows": self.b.size}

    def residual(self, x: np.ndarray) -> float:
        """Largest violation of s = b - A x in K."""
        s = self.b - self.A @ x
        viol = 0.0
        i = 0
        if self.zero:
            viol = max(viol, float(np.abs(s[: self.zero]).max()))
            i = self.zero
        if self.nonneg:
            viol = max(viol, float(max(0.0, -s[i : i + self.nonneg].min())))
            i += self.nonneg
        for d in self.soc:
            blk = s[i : i + d]
            viol = max(viol, float(np.linalg.norm(blk[1:]) - blk[0]))
            i += d
        return max(viol, 0.0)


@dataclass
class ConeResult:
    status: str
    x: np.ndarray | None
    residual: float = np.inf
    objective: float = np.nan
    raw_status: str = ""
    iterations: int = 0


class ConeBackend(Protocol):
    def solve(self, prog: ConeProgram) -> ConeResult: ...


class ClarabelBackend:
    """Interior-point backend (default)."""

    def __init__(self, tol: float = 1e-10, max_iter: int = 200):
        import clarabel

        self._clarabel = clarabel
        self.tol = tol
        self.max_iter = max_iter

    def _settings(self):
        s = self._clarabel.DefaultSettings()
        s.verbose = False
        s.max_iter = self.max_iter
        s.tol_feas = self.tol
        s.tol_gap_abs = self.tol
        s.tol_gap_rel = self.tol
        return s

    def solve(self, prog: ConeProgram) -> ConeResult:
        cl = self._clarabel
        cones = []
        if prog.zero:
            cones.append(cl.ZeroConeT(prog.zero))
        if prog.nonneg:
            cones.append(cl.NonnegativeConeT(prog.nonneg))
        cones.extend(cl.SecondOrderConeT(d) for d in prog.soc)
        n = prog.c.size
        P = sp.csc_matrix((n, n))
        sol = cl.DefaultSolver(P, prog.c, prog.A, prog.b, cones, self._settings()).solve()
        raw = str(sol.status)
        if raw.endswith("PrimalInfeasible") and "Almost" not in raw:
            return ConeResult(INFEASIBLE, None, raw_status=raw, iterations=sol.iterations)
        x = np.asarray(sol.x, dtype=float)
        if raw.endswith("Solved"):
            res = prog.residual(x)
            status = OPTIMAL if "Almost" not in raw or res < 1e-8 else FAILED
            return ConeResult(status, x, res, float(sol.obj_val), raw, sol.iterations)
        return ConeResult(FAILED, x, prog.residual(x), np.nan, raw, sol.iterations)


class ScsBackend:
    """First-order backend; lower accuracy, useful as an independent check."""

    def __init__(self, eps: float = 1e-9, max_iters: int = 100_000):
        import scs

        self._scs = scs
        self.eps = eps
        self.max_iters = max_iters

    def solve(self, prog: ConeProgram) -> ConeResult:
        data = {"A": prog.A, "b": prog.b, "c": prog.c}
        cone = {"z": prog.zero, "l": prog.nonneg, "q": list(prog.soc)}
        solver = self._scs.SCS(data, cone, verbose=False, eps_abs=self.eps, eps_rel=self.eps,
                               max_iters=self.max_iters)
        sol = solver.solve()
        raw = sol["info"]["status"]
        if raw.startswith("infeasible"):
            return ConeResult(INFEASIBLE, None, raw_status=raw)
        x = np.asarray(sol["x"], dtype=float)
        res = prog.residual(x)
        status = OPTIMAL if raw.startswith("solved") else FAILED
        return ConeResult(status, x, res, float(sol["info"]["pobj"]), raw, sol["info"]["iter"])


_default: ConeBackend | None = None


def default_backend() -> ConeBackend:
    global _default
    if _default is None:
        _default = ClarabelBackend()
    return _default


class Builder:
    """Incremental row builder for cone programs.

    Rows are added block by block (zero, then nonnegative, then SOC) and
    stacked at the end; each row is ``b_row - A_row x``.
    """

    def __init__(self, n_vars: int):
        self.n = n_vars
        self._blocks: dict[str, list[tuple[sp.spmatrix, np.ndarray]]] = {"z": [], "l": [], "q": []}
        self._soc: list[int] = []

    def _add(self, kind: str, A, b) -> None:
        A = sp.csr_matrix(A)
        if A.shape[1] != self.n:
            raise ValueError("row width mismatch")
        self._blocks[kind].append((A, np.atleast_1d(np.asarray(b, dtype=float))))

    def eq(self, A, b) -> None:
        """A x == b."""
        self._add("z", A, b)

    def leq(self, A, b) -> None:
        """A x <= b."""
        self._add("l", A, b)

    def soc(self, A, b) -> None:
        """(b - A x) in SOC; first row is the cone's scalar part."""
        A = sp.csr_matrix(A)
        self._add("q", A, b)
        self._soc.append(A.shape[0])

    def build(self, c) -> ConeProgram:
        mats, vecs = [], []
        for kind in ("z", "l", "q"):
            for A, b in self._blocks[kind]:
                mats.append(A)
                vecs.append(b)
        A = sp.vstack(mats, format="csc") if mats else sp.csc_matrix((0, self.n))
        b = np.concatenate(vecs) if vecs else np.zeros(0)
        zero = sum(A.shape[0] for A, _ in self._blocks["z"])
        nonneg = sum(A.shape[0] for A, _ in self._blocks["l"])
        return ConeProgram(c, A, b, zero, nonneg, list(self._soc))
