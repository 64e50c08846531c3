"""Strictly convex QP solver for box and pairwise-gap constraints.

Solves

    minimize    0.5 * y' Q y + c' y + constant
    subject to  lo_i <= y_i <= hi_i          (boxes)
                y_i - y_j >= gap             (pair constraints)

with a first-order operator-splitting iteration (over-relaxed ADMM) plus an
active-set polish step that solves the KKT equality system on the detected
active constraints, bringing the iterate to near machine precision.
Feasibility is pre-checked by longest-path propagation of the pairwise gaps
through the constraint graph, so infeasible inputs fail fast instead of
iterating.

``brute_force_minimize`` is an independent oracle for small problems: grid
search over the feasible box lattice followed by projected-gradient
refinement (projections computed by Dykstra's alternating method). It shares
no iteration machinery with ``solve`` and exists for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(Exception):
    pass


class InfeasibleProblem(SolverError):
    """The constraint set is empty; ``chain`` is the variable chain proving it."""

    def __init__(self, message: str, chain: list[int] | None = None):
        super().__init__(message)
        self.chain = chain or []


class ConstraintCycle(SolverError):
    """Pair constraints with positive total gap form a cycle."""

    def __init__(self, cycle: list[int]):
        super().__init__(f"pair constraints form a positive-gap cycle through variables {cycle}")
        self.cycle = cycle


class MaxIterationsExceeded(SolverError):
    def __init__(self, iterations: int, residuals: tuple[float, float]):
        super().__init__(
            f"no solution at requested tolerances after {iterations} iterations "
            f"(primal {residuals[0]:.2e}, stationarity {residuals[1]:.2e})"
        )
        self.iterations = iterations
        self.residuals = residuals


class DimensionTooLarge(SolverError):
    pass


@dataclass(frozen=True)
class QPProblem:
    """Data of one QP instance. ``quadratic`` is the Hessian of the objective,
    i.e. the objective is 0.5*y'Qy + c'y + constant (the factor-of-2 bookkeeping
    lives with whoever assembles Q, not here)."""

    n: int
    quadratic: sp.csc_matrix
    linear: np.ndarray
    pair_constraints: tuple[tuple[int, int, float], ...]
    box_lower: np.ndarray
    box_upper: np.ndarray
    constant: float = 0.0

    @classmethod
    def build(cls, quadratic, linear, pair_constraints, box_lower, box_upper, constant=0.0):
        quadratic = sp.csc_matrix(quadratic)
        linear = np.asarray(linear, dtype=float)
        box_lower = np.asarray(box_lower, dtype=float)
        box_upper = np.asarray(box_upper, dtype=float)
        n = linear.shape[0]
        if quadratic.shape != (n, n):
            raise ValueError(f"quadratic is {quadratic.shape}, expected {(n, n)}")
        asym = abs(quadratic - quadratic.T)
        if asym.nnz and asym.max() > 1e-10 * max(1.0, abs(quadratic).max()):
            raise ValueError("quadratic matrix must be symmetric")
        if box_lower.shape != (n,) or box_upper.shape != (n,):
            raise ValueError("box bounds must have one entry per variable")
        if np.any(box_lower > box_upper):
            bad = int(np.argmax(box_lower > box_upper))
            raise ValueError(f"empty box for variable {bad}")
        pairs = []
        for i, j, gap in pair_constraints:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValueError(f"bad pair constraint indices ({i}, {j}) for n={n}")
            pairs.append((int(i), int(j), float(gap)))
        return cls(
            n=n,
            quadratic=quadratic,
            linear=linear,
            pair_constraints=tuple(pairs),
            box_lower=box_lower,
            box_upper=box_upper,
            constant=float(constant),
        )

    def objective(self, y: np.ndarray) -> float:
        y = np.asarray(y, dtype=float)
        return float(0.5 * y @ (self.quadratic @ y) + self.linear @ y + self.constant)

    def constraint_violation(self, y: np.ndarray) -> float:
        """Largest violation over boxes and pair constraints (0 if feasible)."""
        viol = max(
            float(np.max(self.box_lower - y, initial=0.0)),
            float(np.max(y - self.box_upper, initial=0.0)),
        )
        for i, j, gap in self.pair_constraints:
            viol = max(viol, gap - (y[i] - y[j]))
        return max(viol, 0.0)


@dataclass(frozen=True)
class SolverSettings:
    """Termination controls.

    ``optimality_tolerance`` bounds the scaled stationarity residual
    ||Qy + c + A'w||_inf / max(1, ||Qy||_inf, ||c||_inf, ||A'w||_inf),
    where w are the constraint multipliers; the scaling keeps the criterion
    meaningful when the fit weight (and hence Q) spans several orders of
    magnitude.
    """

    feasibility_tolerance: float = 1e-6
    optimality_tolerance: float = 1e-8
    max_iterations: int = 50_000

    def __post_init__(self) -> None:
        if min(self.feasibility_tolerance, self.optimality_tolerance) <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")


@dataclass(frozen=True)
class Solution:
    values: np.ndarray
    objective_value: float
    iterations: int
    residuals: tuple[float, float]  # (primal infeasibility, scaled stationarity)


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    witness: tuple[int, ...] | None
    tightened_lower: np.ndarray | None = field(repr=False, default=None)
    tightened_upper: np.ndarray | None = field(repr=False, default=None)


def check_feasibility(problem: QPProblem) -> FeasibilityResult:
    """Propagate pairwise gaps through the constraint graph and test the boxes.

    Lower bounds travel upward along each constraint y_i >= y_j + gap
    (longest-path relaxation); the system is feasible iff every tightened
    lower bound stays below its box upper bound. A positive-gap cycle raises
    ``ConstraintCycle``; an empty interval yields the chain of variables
    whose accumulated gaps overflow the box as witness.
    """
    n = problem.n
    lo = problem.box_lower.copy()
    hi = problem.box_upper.copy()
    pred: list[int | None] = [None] * n

    changed = True
    rounds = 0
    last_changed: int | None = None
    while changed:
        changed = False
        for i, j, gap in problem.pair_constraints:
            cand = lo[j] + gap
            if cand > lo[i] + 1e-15:
                lo[i] = cand
                pred[i] = j
                changed = True
                last_changed = i
        rounds += 1
        if changed and rounds > n:
            cycle = _walk_cycle(pred, last_changed, n)
            raise ConstraintCycle(cycle)

    # mirror pass so callers get usable upper bounds too
    changed = True
    rounds = 0
    while changed and rounds <= n:
        changed = False
        for i, j, gap in problem.pair_constraints:
            cand = hi[i] - gap
            if cand < hi[j] - 1e-15:
                hi[j] = cand
                changed = True
        rounds += 1

    bad = np.nonzero(lo > problem.box_upper + 1e-12)[0]
    if bad.size:
        start = int(bad[0])
        chain = [start]
        node = start
        while pred[node] is not None and len(chain) <= n:
            node = pred[node]
            chain.append(node)
        return FeasibilityResult(False, tuple(chain), lo, hi)
    return FeasibilityResult(True, None, lo, np.maximum(hi, lo))


def _walk_cycle(pred: list[int | None], start: int, n: int) -> list[int]:
    seen: dict[int, int] = {}
    path: list[int] = []
    node: int | None = start
    while node is not None and node not in seen:
        seen[node] = len(path)
        path.append(node)
        node = pred[node]
    if node is None:
        return path
    cycle = path[seen[node]:]
    cycle.reverse()
    return cycle


def _constraint_matrix(problem: QPProblem):
    """Stack boxes (identity rows) and pair rows into l <= A y <= u."""
    n = problem.n
    m = len(problem.pair_constraints)
    blocks = [sp.identity(n, format="csc")]
    l = [problem.box_lower]
    u = [problem.box_upper]
    if m:
        rows = np.repeat(np.arange(m), 2)
        cols = np.empty(2 * m, dtype=int)
        vals = np.empty(2 * m)
        gaps = np.empty(m)
        for k, (i, j, gap) in enumerate(problem.pair_constraints):
            cols[2 * k] = i
            cols[2 * k + 1] = j
            vals[2 * k] = 1.0
            vals[2 * k + 1] = -1.0
            gaps[k] = gap
        blocks.append(sp.csc_matrix((vals, (rows, cols)), shape=(m, n)))
        l.append(gaps)
        u.append(np.full(m, np.inf))
    A = sp.vstack(blocks, format="csc")
    return A, np.concatenate(l), np.concatenate(u)


def _polish(Q, c, A, l, u, act_lower, act_upper):
    """Solve the KKT equality system on the guessed active set.

    Returns (x, w_full) or None when the regularized system cannot be solved.
    Verification against the full problem is the caller's job.
    """
    n = Q.shape[0]
    rows = np.concatenate([np.nonzero(act_lower)[0], np.nonzero(act_upper)[0]])
    if rows.size == 0:
        try:
            x = spla.spsolve(Q.tocsc() + 1e-12 * sp.identity(n, format="csc"), -c)
        except RuntimeError:
            return None
        return x, np.zeros(A.shape[0])
    b = np.concatenate([l[np.nonzero(act_lower)[0]], u[np.nonzero(act_upper)[0]]])
    A_act = A[rows]
    k = rows.size
    delta = 1e-9
    kkt = sp.bmat(
        [
            [Q + delta * sp.identity(n), A_act.T],
            [A_act, -delta * sp.identity(k)],
        ],
        format="csc",
    )
    rhs = np.concatenate([-c, b])
    try:
        lu = spla.splu(kkt)
    except RuntimeError:
        return None
    sol = lu.solve(rhs)
    # a couple of refinement sweeps against the unregularized system
    kkt0 = sp.bmat([[Q, A_act.T], [A_act, None]], format="csc")
    for _ in range(2):
        resid = rhs - kkt0 @ sol
        if np.max(np.abs(resid)) < 1e-14:
            break
        sol = sol + lu.solve(resid)
    x = sol[:n]
    w_full = np.zeros(A.shape[0])
    w_full[rows] = sol[n:]
    return x, w_full


def _residuals(Q, c, A, l, u, x, w, z=None):
    """(primal infeasibility, scaled stationarity) of a primal-dual pair.

    When ``z`` (the projected constraint copy) is given, the primal residual
    also counts the splitting gap ||Ax - z||; w is complementary to z by
    construction, so small residuals then certify optimality. Without ``z``
    (polished candidates, where w is nonzero only on rows pinned to their
    bound) the true constraint violation alone is the right measure.
    """
    Ax = A @ x
    primal = max(
        float(np.max(l - Ax, initial=0.0)),
        float(np.max(Ax - u, initial=0.0)),
        0.0,
    )
    if z is not None:
        primal = max(primal, float(np.max(np.abs(Ax - z))))
    Qx = Q @ x
    Atw = A.T @ w
    stat_num = float(np.max(np.abs(Qx + c + Atw)))
    stat_den = max(
        1.0,
        float(np.max(np.abs(Qx))),
        float(np.max(np.abs(c))),
        float(np.max(np.abs(Atw))),
    )
    return primal, stat_num / stat_den


def solve(
    problem: QPProblem,
    settings: SolverSettings = SolverSettings(),
    start: np.ndarray | None = None,
) -> Solution:
    """Return the unique minimizer of a strictly convex instance.

    ``start`` warm-starts the splitting iteration (the result is the same
    minimizer either way; a good start only saves iterations). Raises
    ``InfeasibleProblem``/``ConstraintCycle`` when the constraint set is
    empty and ``MaxIterationsExceeded`` when tolerances are not met.
    """
    feas = check_feasibility(problem)
    if not feas.feasible:
        raise InfeasibleProblem(
            "pair-constraint gaps overflow the boxes along chain "
            f"{list(feas.witness)}", list(feas.witness),
        )

    n = problem.n
    A, l, u = _constraint_matrix(problem)

    # normalize the objective so rho has a consistent meaning across fit weights
    scale = max(1.0, float(problem.quadratic.diagonal().max()) / 2.0)
    Q = (problem.quadratic / scale).tocsc()
    c = problem.linear / scale

    sigma = 1e-6
    alpha = 1.6
    rho = 1.0
    eye = sp.identity(n, format="csc")
    AtA = (A.T @ A).tocsc()
    lu = spla.splu((Q + sigma * eye + rho * AtA).tocsc())

    x = np.asarray(start, dtype=float).copy() if start is not None else feas.tightened_lower.copy()
    z = np.clip(A @ x, l, u)
    w = np.zeros_like(z)

    feastol = settings.feasibility_tolerance
    opttol = settings.optimality_tolerance
    check_every = 25
    polish_every = 100
    best: tuple[float, np.ndarray, np.ndarray, np.ndarray] | None = None

    it = 0
    while it < settings.max_iterations:
        it += 1
        rhs = sigma * x - c + A.T @ (rho * z - w)
        x_tilde = lu.solve(rhs)
        z_tilde = A @ x_tilde
        x = alpha * x_tilde + (1.0 - alpha) * x
        v = alpha * z_tilde + (1.0 - alpha) * z + w / rho
        z_new = np.clip(v, l, u)
        w = w + rho * (alpha * z_tilde + (1.0 - alpha) * z - z_new)
        z = z_new

        if it % check_every:
            continue
        primal, stat = _residuals(Q, c, A, l, u, x, w, z)
        if best is None or primal + stat < best[0]:
            best = (primal + stat, x.copy(), w.copy(), z.copy())
        converged = primal <= feastol and stat <= opttol
        if converged or it % polish_every == 0:
            act_lower = w < -1e-12
            act_upper = w > 1e-12
            polished = _polish(Q, c, A, l, u, act_lower, act_upper)
            if polished is not None:
                xp, wp = polished
                good_signs = np.all(wp[act_lower] <= 1e-9) and np.all(wp[act_upper] >= -1e-9)
                pp, ps = _residuals(Q, c, A, l, u, xp, wp)
                if good_signs and pp <= feastol and ps <= opttol:
                    return Solution(xp, problem.objective(xp), it, (pp, ps))
        if converged:
            return Solution(x.copy(), problem.objective(x), it, (primal, stat))
        if it % 2000 == 0:
            # slow progress: re-balance the penalty between primal and dual work
            ratio = (primal + 1e-16) / (stat + 1e-16)
            if ratio > 100.0 or ratio < 0.01:
                rho = float(np.clip(rho * np.sqrt(ratio), 1e-4, 1e4))
                lu = spla.splu((Q + sigma * eye + rho * AtA).tocsc())

    primal, stat = _residuals(Q, c, A, l, u, x, w, z)
    if best is not None and best[0] < primal + stat:
        x, w, z = best[1], best[2], best[3]
        primal, stat = _residuals(Q, c, A, l, u, x, w, z)
    if primal <= feastol and stat <= opttol:
        return Solution(x.copy(), problem.objective(x), it, (primal, stat))
    raise MaxIterationsExceeded(it, (primal, stat))


def _dykstra_project(y, lo, hi, pairs, max_cycles=400):
    """Euclidean projection onto {box} intersect {pair halfspaces}."""
    if not pairs:
        return np.clip(y, lo, hi)
    x = y.copy()
    corrections = np.zeros((len(pairs) + 1, y.shape[0]))
    for _ in range(max_cycles):
        delta = 0.0
        v = x + corrections[0]
        px = np.clip(v, lo, hi)
        corrections[0] = v - px
        delta = max(delta, float(np.max(np.abs(px - x))))
        x = px
        for k, (i, j, gap) in enumerate(pairs, start=1):
            v = x + corrections[k]
            shortfall = gap - (v[i] - v[j])
            px = v.copy()
            if shortfall > 0:
                px[i] += shortfall / 2.0
                px[j] -= shortfall / 2.0
            corrections[k] = v - px
            delta = max(delta, float(np.max(np.abs(px - x))))
            x = px
        if delta < 1e-14:
            break
    return x


def brute_force_minimize(problem: QPProblem, grid_step: float = 1e-3) -> Solution:
    """Oracle minimization for tiny instances (n <= 6), used only in tests.

    Enumerates the feasible box lattice (coarsening the step when the full
    lattice would exceed a fixed evaluation budget, then zooming back in
    around the incumbent until the requested step is reached) and finishes
    with projected-gradient refinement from the best lattice point.
    """
    if problem.n > 6:
        raise DimensionTooLarge(f"brute force limited to n <= 6, got n={problem.n}")
    feas = check_feasibility(problem)
    if not feas.feasible:
        raise InfeasibleProblem(
            f"pair-constraint gaps overflow the boxes along chain {list(feas.witness)}",
            list(feas.witness),
        )
    n = problem.n
    lo = feas.tightened_lower
    hi = feas.tightened_upper
    pairs = problem.pair_constraints
    Q = problem.quadratic.toarray()
    c = problem.linear
    budget = 300_000

    def lattice_axes(center_lo, center_hi, step):
        axes = []
        for d in range(n):
            pts = np.arange(center_lo[d], center_hi[d] + 1e-12, step)
            if pts.size == 0:
                pts = np.array([center_lo[d]])
            if pts[-1] < center_hi[d] - 1e-12:
                pts = np.append(pts, center_hi[d])
            axes.append(pts)
        return axes

    def evaluate(points):
        vals = 0.5 * np.einsum("kd,dj,kj->k", points, Q, points) + points @ c
        return vals

    def feasible_mask(points):
        mask = np.ones(points.shape[0], dtype=bool)
        for i, j, gap in pairs:
            mask &= points[:, i] - points[:, j] >= gap - 1e-9
        return mask

    widths = np.maximum(hi - lo, 1e-12)
    step = float(max(widths.max(), grid_step))
    while True:
        count = 1.0
        for d in range(n):
            count *= np.floor(widths[d] / step) + 2
        if count > budget or step <= grid_step:
            break
        step /= 2.0
    step = max(step, grid_step)

    incumbent = feas.tightened_lower.copy()
    incumbent_val = problem.objective(incumbent)
    window_lo, window_hi = lo.copy(), hi.copy()
    while True:
        axes = lattice_axes(window_lo, window_hi, step)
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.stack([m.ravel() for m in mesh], axis=1)
        mask = feasible_mask(points)
        if mask.any():
            pts = points[mask]
            vals = evaluate(pts)
            k = int(np.argmin(vals))
            if vals[k] + problem.constant < incumbent_val:
                incumbent = pts[k]
                incumbent_val = float(vals[k]) + problem.constant
        if step <= grid_step:
            break
        new_step = max(step / 4.0, grid_step)
        window_lo = np.maximum(lo, incumbent - 2.0 * step)
        window_hi = np.minimum(hi, incumbent + 2.0 * step)
        step = new_step

    # projected-gradient refinement; the objective is strongly convex so a
    # fixed 1/L step converges linearly from the lattice incumbent
    L = float(np.linalg.eigvalsh(Q).max())
    t = 1.0 / max(L, 1e-12)
    y = _dykstra_project(incumbent, problem.box_lower, problem.box_upper, pairs)
    for iteration in range(20_000):
        g = Q @ y + c
        y_new = _dykstra_project(y - t * g, problem.box_lower, problem.box_upper, pairs)
        if float(np.max(np.abs(y_new - y))) < 1e-13:
            y = y_new
            break
        y = y_new
    value = problem.objective(y)
    if value > incumbent_val:
        y, value = incumbent, incumbent_val
    return Solution(y, value, iteration + 1, (problem.constraint_violation(y), float("nan")))
