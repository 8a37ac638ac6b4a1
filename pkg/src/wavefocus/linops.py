"""Matrix-free linear operators, Krylov solvers, and localizer sequences.

Operators carry their domain/codomain inner products explicitly; nothing
here assumes the Euclidean product.  The Krylov core is a conjugate
residual iteration (same Krylov space as plain CG for SPD systems) chosen
because it makes the residual norms non-increasing per iteration, a
property downstream monotonicity checks rely on.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    InvalidInputError,
    MaxIterationsWarning,
    NotPositiveDefiniteError,
    NumericalBreakdownError,
    ShapeError,
)


class InnerProduct:
    """Euclidean inner product; base class for weighted products."""

    def dot(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.dot(u, v))

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(max(self.dot(u, u), 0.0)))


class WeightedInner(InnerProduct):
    """Diagonally weighted product <u, v> = sum_i w_i u_i v_i."""

    def __init__(self, weights):
        self.weights = weights if np.isscalar(weights) else np.asarray(weights, float)

    def dot(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.dot(u, self.weights * v))


EUCLIDEAN = InnerProduct()


@dataclass
class LinearMap:
    """Matrix-free linear operator between inner-product spaces.

    ``adjoint_apply`` must be the exact algebraic adjoint of ``apply`` with
    respect to ``inner_in`` / ``inner_out``; ``dot_test`` verifies this.
    """

    apply: Callable[[np.ndarray], np.ndarray]
    adjoint_apply: Callable[[np.ndarray], np.ndarray]
    dim_in: int
    dim_out: int
    inner_in: InnerProduct = field(default_factory=InnerProduct)
    inner_out: InnerProduct = field(default_factory=InnerProduct)
    name: str = ""

    @property
    def H(self) -> "LinearMap":
        """The adjoint as a LinearMap (swaps apply and adjoint_apply)."""
        return LinearMap(
            apply=self.adjoint_apply,
            adjoint_apply=self.apply,
            dim_in=self.dim_out,
            dim_out=self.dim_in,
            inner_in=self.inner_out,
            inner_out=self.inner_in,
            name=f"{self.name}*" if self.name else "adjoint",
        )

    def _check_in(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim_in:
            raise ShapeError(f"{self.name or 'map'}: expected {self.dim_in}, got {x.size}")
        return x

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.apply(self._check_in(x))


def from_matrix(A: np.ndarray, name: str = "") -> LinearMap:
    """Dense matrix as a LinearMap with Euclidean products (test helper)."""
    A = np.asarray(A, dtype=float)
    return LinearMap(
        apply=lambda x: A @ x,
        adjoint_apply=lambda y: A.T @ y,
        dim_in=A.shape[1],
        dim_out=A.shape[0],
        name=name,
    )


def dot_test(A: LinearMap, trials: int = 20, rng_seed: int = 0) -> float:
    """Max relative adjoint defect over random pairs.

    defect = |<Af, g>_out - <f, A*g>_in| / (|f| |g| scale), with
    scale = max over trials of |Af|/|f| (floored to avoid 0/0).
    """
    rng = np.random.default_rng(rng_seed)
    raw = []
    scale = 0.0
    for _ in range(trials):
        f = rng.standard_normal(A.dim_in)
        g = rng.standard_normal(A.dim_out)
        Af = A.apply(f)
        if np.asarray(Af).size != A.dim_out:
            raise ShapeError(f"apply returned size {np.asarray(Af).size}, expected {A.dim_out}")
        Ag = A.adjoint_apply(g)
        if np.asarray(Ag).size != A.dim_in:
            raise ShapeError(f"adjoint_apply returned size {np.asarray(Ag).size}, expected {A.dim_in}")
        lhs = A.inner_out.dot(Af, g)
        rhs = A.inner_in.dot(f, Ag)
        nf = A.inner_in.norm(f)
        ng = A.inner_out.norm(g)
        raw.append((abs(lhs - rhs), nf * ng))
        if nf > 0:
            scale = max(scale, A.inner_out.norm(Af) / nf)
    scale = max(scale, 1e-300)
    return max(num / (den * scale) if den > 0 else 0.0 for num, den in raw)


# ---------------------------------------------------------------------------
# Krylov core
# ---------------------------------------------------------------------------


@dataclass
class KrylovResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    residual_history: list[float]


def conjugate_residual(
    op: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    inner: InnerProduct,
    tol: float,
    maxit: int,
    name: str = "cr",
) -> KrylovResult:
    """Solve op(x) = b for self-adjoint positive (semi)definite op.

    Stops when |r| <= tol * |b| in the given inner product.  Residual norms
    are non-increasing.  Raises NotPositiveDefiniteError on negative
    curvature, which signals a broken adjoint pair.
    """
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b)
    r = b.copy()
    norm_b = inner.norm(b)
    history = [inner.norm(r)]
    if norm_b == 0.0:
        return KrylovResult(x, 0.0, 0, True, history)
    target = tol * norm_b
    p = r.copy()
    Ar = op(r)
    Ap = Ar.copy()
    rAr = inner.dot(r, Ar)
    for it in range(1, maxit + 1):
        if rAr <= 0.0:
            if history[-1] <= target or abs(rAr) <= 1e-28 * norm_b**2:
                break
            raise NotPositiveDefiniteError(
                f"{name}: negative curvature <r, Ar> = {rAr:.3e} at iteration {it}"
            )
        ApAp = inner.dot(Ap, Ap)
        if ApAp == 0.0:
            break
        alpha = rAr / ApAp
        x += alpha * p
        r -= alpha * Ap
        res = inner.norm(r)
        history.append(res)
        if res <= target:
            return KrylovResult(x, res, it, True, history)
        Ar = op(r)
        rAr_new = inner.dot(r, Ar)
        beta = rAr_new / rAr
        rAr = rAr_new
        p = r + beta * p
        Ap = Ar + beta * Ap
    res = inner.norm(r)
    converged = res <= target
    if not converged:
        warnings.warn(
            f"{name}: hit {maxit} iterations, residual {res:.3e} > target {target:.3e}",
            MaxIterationsWarning,
        )
    return KrylovResult(x, res, maxit, converged, history)


def cg_gram_solve(
    A: LinearMap,
    alpha: float,
    xi: np.ndarray,
    tol: float = 1e-10,
    maxit: int | None = None,
) -> KrylovResult:
    """Solve (A A* + alpha I) eta = xi in the codomain of A."""
    if alpha <= 0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    xi = np.asarray(xi, dtype=float).ravel()
    if xi.size != A.dim_out:
        raise ShapeError(f"xi has size {xi.size}, expected {A.dim_out}")
    if maxit is None:
        maxit = 10 * A.dim_out

    def gram(y: np.ndarray) -> np.ndarray:
        return A.apply(A.adjoint_apply(y)) + alpha * y

    return conjugate_residual(gram, xi, A.inner_out, tol, maxit, name="gram")


def tikhonov_solve(
    A: LinearMap,
    beta: float,
    target: np.ndarray,
    tol: float = 1e-10,
    maxit: int | None = None,
) -> KrylovResult:
    """Minimize |A x - target|^2 + beta |x|^2 via the normal equations."""
    if beta <= 0:
        raise InvalidInputError(f"beta must be positive, got {beta}")
    target = np.asarray(target, dtype=float).ravel()
    if target.size != A.dim_out:
        raise ShapeError(f"target has size {target.size}, expected {A.dim_out}")
    if maxit is None:
        maxit = 10 * A.dim_in

    def normal(x: np.ndarray) -> np.ndarray:
        return A.adjoint_apply(A.apply(x)) + beta * x

    b = A.adjoint_apply(target)
    return conjugate_residual(normal, b, A.inner_in, tol, maxit, name="tikhonov")


# ---------------------------------------------------------------------------
# Localizer sequences (regularized range tests)
# ---------------------------------------------------------------------------


@dataclass
class LocalizerConfig:
    """Regularization schedule for the localizer construction.

    Either ``alphas`` (strictly decreasing positive reals) or ``k_schedule``
    (strictly increasing positive reals, alpha = 1/k) must be given.
    """

    alphas: Sequence[float] | None = None
    k_schedule: Sequence[float] | None = None
    cg_tol: float = 1e-10
    cg_maxit: int | None = None

    def __post_init__(self):
        if self.alphas is None and self.k_schedule is None:
            self.k_schedule = [10.0**j for j in range(5)]
        if self.alphas is None:
            ks = [float(k) for k in self.k_schedule]
            if any(k <= 0 for k in ks) or any(b <= a for a, b in zip(ks, ks[1:])):
                raise InvalidInputError("k_schedule must be strictly increasing and positive")
            self.alphas = [1.0 / k for k in ks]
        else:
            self.alphas = [float(a) for a in self.alphas]
            if self.k_schedule is None:
                self.k_schedule = [1.0 / a for a in self.alphas]
        al = list(self.alphas)
        if any(a <= 0 for a in al) or any(b >= a for a, b in zip(al, al[1:])):
            raise InvalidInputError("alpha schedule must be strictly decreasing and positive")
        if self.cg_tol <= 0:
            raise InvalidInputError("cg_tol must be positive")


@dataclass
class LocalizerOutput:
    """Per-alpha record of the localizer sequence."""

    alphas: list[float]
    xi_alphas: list[np.ndarray]
    norms_a1: list[float]  # |A1* xi_alpha|
    norms_a2: list[float]  # |A2* xi_alpha|
    pairings: list[float]  # <xi, eta_alpha>
    pairing_identity_defect: list[float]  # vs |A2* eta|^2 + alpha |eta|^2
    cg_converged: list[bool]


def localizer_sequence(
    A1: LinearMap,
    A2: LinearMap,
    xi: np.ndarray,
    cfg: LocalizerConfig | None = None,
) -> LocalizerOutput:
    """Regularized sequence xi_alpha = eta_alpha / <xi, eta_alpha>^{3/4},
    eta_alpha = (A2 A2* + alpha I)^{-1} xi.

    When xi lies in ran A1 but not in ran A2, |A1* xi_alpha| blows up while
    |A2* xi_alpha| vanishes as alpha -> 0.  The normalization uses the
    identity |sqrt(J) xi|^{3/2} = <xi, J xi>^{3/4}, so no operator square
    root is ever formed.
    """
    cfg = cfg or LocalizerConfig()
    xi = np.asarray(xi, dtype=float).ravel()
    if A1.dim_out != A2.dim_out:
        raise ShapeError("A1 and A2 must share their codomain")
    if xi.size != A2.dim_out:
        raise ShapeError(f"xi has size {xi.size}, expected {A2.dim_out}")
    inner = A2.inner_out
    if inner.norm(xi) == 0.0:
        raise InvalidInputError("xi must be nonzero")

    out = LocalizerOutput([], [], [], [], [], [], [])
    for alpha in cfg.alphas:
        res = cg_gram_solve(A2, alpha, xi, tol=cfg.cg_tol, maxit=cfg.cg_maxit)
        eta = res.x
        pairing = inner.dot(xi, eta)
        if pairing <= 0.0:
            raise NumericalBreakdownError(
                f"<xi, eta_alpha> = {pairing:.3e} <= 0 at alpha = {alpha:g}"
            )
        a2_eta = A2.adjoint_apply(eta)
        check = A2.inner_in.dot(a2_eta, a2_eta) + alpha * inner.dot(eta, eta)
        defect = abs(pairing - check) / max(abs(pairing), 1e-300)
        xi_alpha = eta / pairing**0.75
        out.alphas.append(alpha)
        out.xi_alphas.append(xi_alpha)
        out.norms_a1.append(A1.inner_in.norm(A1.adjoint_apply(xi_alpha)))
        out.norms_a2.append(A2.inner_in.norm(a2_eta) / pairing**0.75)
        out.pairings.append(pairing)
        out.pairing_identity_defect.append(defect)
        out.cg_converged.append(res.converged)
    return out


@dataclass
class RangeProbeResult:
    max_ratio: float
    argmax_xi: np.ndarray
    ratios: list[float]


def range_inclusion_probe(
    A1: LinearMap,
    A2: LinearMap,
    trials: int = 50,
    rng_seed: int = 0,
) -> RangeProbeResult:
    """Empirical sup of |A1* xi| / |A2* xi| over random xi (diagnostic).

    A bounded ratio over all xi is equivalent to ran A1 within ran A2;
    growth with trials suggests non-inclusion.
    """
    if A1.dim_out != A2.dim_out:
        raise ShapeError("A1 and A2 must share their codomain")
    rng = np.random.default_rng(rng_seed)
    best = -np.inf
    best_xi = None
    ratios = []
    for _ in range(trials):
        xi = rng.standard_normal(A2.dim_out)
        n1 = A1.inner_in.norm(A1.adjoint_apply(xi))
        n2 = A2.inner_in.norm(A2.adjoint_apply(xi))
        ratio = np.inf if n2 == 0.0 and n1 > 0.0 else (0.0 if n1 == 0.0 else n1 / n2)
        ratios.append(ratio)
        if ratio > best:
            best = ratio
            best_xi = xi
    return RangeProbeResult(max_ratio=float(best), argmax_xi=best_xi, ratios=ratios)
