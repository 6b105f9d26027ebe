"""Posynomial algebra and geometric-programming solvers.

A geometric program in standard form minimizes a posynomial subject to
posynomial <= 1 and monomial == 1 constraints over strictly positive
variables.  Under the change of variables x = exp(y) every posynomial turns
into a log-sum-exp of affine functions of y, the program becomes convex, and
a damped-Newton barrier method solves it to a verified KKT residual.

On top of the generic solver sit the three power-control problems used by
the allocation schemes:

* ``high_sinr_power``   full-budget power optimization of the
  interference-to-signal product over all allocated links;
* ``general_sinr_power`` successive single-condensation refinement of the
  exact rate objective (a posynomial ratio), monotone in the true objective;
* ``subcarrier_gp``     the reduced per-subcarrier problem with per-cell
  power caps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Allocation, ChannelSet, NetworkConfig, PowerMatrix

__all__ = [
    "Monomial",
    "Posynomial",
    "GpProblem",
    "GpSolution",
    "posy_eval",
    "condense",
    "solve_gp",
    "high_sinr_power",
    "general_sinr_power",
    "subcarrier_gp",
]


# ---------------------------------------------------------------------------
# posynomial algebra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Monomial:
    """coeff * prod(x_v ** e_v) with a strictly positive coefficient."""

    coeff: float
    exponents: dict

    def __post_init__(self):
        if not self.coeff > 0:
            raise ValueError("monomial coefficient must be > 0")
        object.__setattr__(self, "exponents",
                           {v: float(e) for v, e in self.exponents.items() if e != 0})

    def __mul__(self, other: "Monomial") -> "Monomial":
        exps = dict(self.exponents)
        for v, e in other.exponents.items():
            exps[v] = exps.get(v, 0.0) + e
        return Monomial(self.coeff * other.coeff, exps)

    def inv(self) -> "Monomial":
        return Monomial(1.0 / self.coeff, {v: -e for v, e in self.exponents.items()})

    def as_posynomial(self) -> "Posynomial":
        return Posynomial((self,))


@dataclass(frozen=True)
class Posynomial:
    """A non-empty sum of monomials."""

    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("a posynomial needs at least one term")
        object.__setattr__(self, "terms", terms)

    def __mul__(self, mono: Monomial) -> "Posynomial":
        return Posynomial(tuple(t * mono for t in self.terms))

    def variables(self):
        out = set()
        for t in self.terms:
            out.update(t.exponents)
        return out


def posy_eval(p: Posynomial, x: dict) -> float:
    """Evaluate a posynomial at a strictly positive assignment."""
    total = 0.0
    for term in p.terms:
        v = np.log(term.coeff)
        for var, e in term.exponents.items():
            if var not in x:
                raise KeyError(f"assignment missing variable {var!r}")
            xv = x[var]
            if xv <= 0:
                raise ValueError(f"variable {var!r} must be > 0")
            v += e * np.log(xv)
        total += np.exp(v)
    return float(total)


def condense(f: Posynomial, x0: dict) -> Monomial:
    """Best local monomial under-estimator of ``f`` at ``x0``.

    Weights each term by its share of the posynomial value at ``x0``; the
    arithmetic/geometric mean inequality makes the result a global lower
    bound on ``f`` that is exact at ``x0``.
    """
    logs = []
    for term in f.terms:
        v = np.log(term.coeff)
        for var, e in term.exponents.items():
            v += e * np.log(x0[var])
        logs.append(v)
    logs = np.array(logs)
    shift = logs.max()
    weights = np.exp(logs - shift)
    weights /= weights.sum()

    log_coeff = 0.0
    exps: dict = {}
    for w, term in zip(weights, f.terms):
        if w == 0.0:
            continue
        log_coeff += w * (np.log(term.coeff) - np.log(w))
        for var, e in term.exponents.items():
            exps[var] = exps.get(var, 0.0) + w * e
    return Monomial(float(np.exp(log_coeff)), exps)


# ---------------------------------------------------------------------------
# generic solver
# ---------------------------------------------------------------------------

@dataclass
class GpProblem:
    """Standard-form GP: minimize a posynomial subject to posynomial <= 1
    and monomial == 1 constraints over the declared positive variables."""

    objective: Posynomial
    ineq_constraints: list = field(default_factory=list)
    eq_constraints: list = field(default_factory=list)
    variables: tuple = ()

    def __post_init__(self):
        declared = set(self.variables)
        used = set(self.objective.variables())
        for c in self.ineq_constraints:
            used |= c.variables()
        for m in self.eq_constraints:
            used |= set(m.exponents)
        missing = used - declared
        if missing:
            raise ValueError(f"undeclared variables referenced: {sorted(missing)}")
        self.variables = tuple(self.variables)


@dataclass
class GpSolution:
    values: dict
    objective_value: float
    kkt_residual: float
    iterations: int
    status: str  # optimal | max_iters | infeasible


class _LogSumExp:
    """F(y) = log sum_t exp(A_t . y + b_t); value, gradient and Hessian."""

    def __init__(self, A, b):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)

    @classmethod
    def from_posynomial(cls, p: Posynomial, index: dict, n_extra: int = 0):
        n = len(index) + n_extra
        A = np.zeros((len(p.terms), n))
        b = np.zeros(len(p.terms))
        for t, term in enumerate(p.terms):
            b[t] = np.log(term.coeff)
            for var, e in term.exponents.items():
                A[t, index[var]] = e
        return cls(A, b)

    def value(self, y):
        z = self.A @ y + self.b
        m = z.max()
        return m + np.log(np.exp(z - m).sum())

    def value_grad_hess(self, y):
        z = self.A @ y + self.b
        m = z.max()
        w = np.exp(z - m)
        s = w.sum()
        val = m + np.log(s)
        w /= s
        g = self.A.T @ w
        H = (self.A.T * w) @ self.A - np.outer(g, g)
        return val, g, H


def _newton_step(H, g, Aeq):
    """Solve the (equality-constrained) Newton system, with graded damping
    when the Hessian block is numerically singular."""
    n = H.shape[0]
    damping = 0.0
    for _ in range(16):
        Hd = H + damping * np.eye(n) if damping else H
        try:
            if Aeq is None:
                dy = np.linalg.solve(Hd, -g)
                return dy
            p = Aeq.shape[0]
            kkt = np.block([[Hd, Aeq.T], [Aeq, np.zeros((p, p))]])
            rhs = np.concatenate([-g, np.zeros(p)])
            sol = np.linalg.solve(kkt, rhs)
            return sol[:n]
        except np.linalg.LinAlgError:
            damping = max(damping * 10.0, 1e-12 * max(1.0, np.trace(H) / n))
    raise np.linalg.LinAlgError("Newton system unsolvable even with damping")


def _center(objective, constraints, y, t, Aeq, budget, trace=None, early_stop=None):
    """Damped Newton on t*F0(y) + barrier, staying on the equality manifold.

    Returns (y, newton_steps_used, converged).  ``early_stop`` aborts the
    loop as soon as the predicate holds for the current iterate (used by the
    phase-1 feasibility search).
    """
    steps = 0
    slow = 0
    phi_prev = None
    while steps < budget:
        if early_stop is not None and early_stop(y):
            return y, steps, True
        f0, g0, H0 = objective.value_grad_hess(y)
        g = t * g0
        H = t * H0
        ok = True
        fvals = []
        for c in constraints:
            fc, gc, Hc = c.value_grad_hess(y)
            if fc >= 0:
                ok = False
                break
            fvals.append(fc)
            g += gc / (-fc)
            H += Hc / (-fc) + np.outer(gc, gc) / fc**2
        if not ok:
            raise RuntimeError("barrier iterate left the feasible region")
        dy = _newton_step(H, g, Aeq)
        lam2 = float(-g @ dy)
        if trace is not None:
            trace.append({"t": t, "objective": float(f0), "decrement2": lam2})
        if lam2 / 2.0 <= 1e-11:
            return y, steps, True
        # backtracking line search on the barrier objective
        alpha, beta = 0.25, 0.5
        step = 1.0
        phi0 = t * f0 - sum(np.log(-fv) for fv in fvals)
        while True:
            y_new = y + step * dy
            vals = [c.value(y_new) for c in constraints]
            if all(v < 0 for v in vals):
                phi = t * objective.value(y_new) - sum(np.log(-v) for v in vals)
                if phi <= phi0 + alpha * step * (-lam2):
                    break
            step *= beta
            if step < 1e-14:
                return y, steps + 1, True  # stalled at numerical precision
        y = y_new
        steps += 1
        # a step that no longer moves the barrier objective is at the
        # numerical floor; treat the point as centered after two strikes
        if phi_prev is not None and phi_prev - phi < 1e-12 * (1.0 + abs(phi)):
            slow += 1
            if slow >= 2:
                return y, steps, True
        else:
            slow = 0
        phi_prev = phi
    return y, steps, False


def _kkt_residual(objective, constraints, y, t, Aeq):
    f0, g0, _ = objective.value_grad_hess(y)
    r = g0.copy()
    comp = 0.0
    for c in constraints:
        fc, gc, _ = c.value_grad_hess(y)
        lam = 1.0 / (t * (-fc))
        r += lam * gc
        comp = max(comp, 1.0 / t)
    if Aeq is not None and Aeq.size:
        nu, *_ = np.linalg.lstsq(Aeq.T, -r, rcond=None)
        r = r + Aeq.T @ nu
    stat = np.linalg.norm(r, np.inf) / max(1.0, np.linalg.norm(g0, np.inf))
    return max(stat, comp)


def solve_gp(prob: GpProblem, x0: dict | None = None, tol: float = 1e-6,
             max_iters: int = 500, trace: list | None = None) -> GpSolution:
    """Solve a standard-form GP via a barrier method on the log-transformed
    convex program.

    ``x0`` optionally supplies a strictly positive starting point; points
    violating a constraint are replaced through a phase-1 solve.  On success
    the relative KKT residual of the returned point is at most ``tol``.
    Hitting ``max_iters`` Newton steps returns the best iterate with status
    ``max_iters``; an empty feasible set returns status ``infeasible``.
    """
    index = {v: i for i, v in enumerate(prob.variables)}
    n = len(index)
    objective = _LogSumExp.from_posynomial(prob.objective, index)
    constraints = [_LogSumExp.from_posynomial(c, index) for c in prob.ineq_constraints]

    Aeq = None
    if prob.eq_constraints:
        Aeq = np.zeros((len(prob.eq_constraints), n))
        beq = np.zeros(len(prob.eq_constraints))
        for i, m in enumerate(prob.eq_constraints):
            beq[i] = np.log(m.coeff)
            for var, e in m.exponents.items():
                Aeq[i, index[var]] = e

    if x0 is not None:
        y = np.array([np.log(x0[v]) for v in prob.variables], dtype=float)
    else:
        y = np.zeros(n)
    if Aeq is not None:
        # project the start onto the equality manifold: Aeq y = -beq
        correction, *_ = np.linalg.lstsq(Aeq, -beq - Aeq @ y, rcond=None)
        y = y + correction

    iterations = 0
    if constraints and any(c.value(y) >= 0 for c in constraints):
        y, used, feasible = _phase1(constraints, y, Aeq, max_iters, trace)
        iterations += used
        if not feasible:
            return GpSolution({v: float(np.exp(y[index[v]])) for v in prob.variables},
                              float(np.exp(objective.value(y))), np.inf, iterations,
                              "infeasible")

    m = max(len(constraints), 1)
    t = 1.0
    mu = 20.0
    status = "max_iters"
    residual = np.inf
    stalls = 0
    while iterations < max_iters:
        y_prev = y.copy()
        y, used, converged = _center(objective, constraints, y, t, Aeq,
                                     max_iters - iterations, trace)
        iterations += used
        if not converged:
            break
        residual = _kkt_residual(objective, constraints, y, t, Aeq) if constraints else 0.0
        if (not constraints) or (m / t <= 0.5 * tol and residual <= tol):
            status = "optimal"
            residual = residual if constraints else 0.0
            break
        # centering that no longer moves the iterate has hit the numerical
        # floor; raising t further cannot improve the point
        stalls = stalls + 1 if np.linalg.norm(y - y_prev) <= 1e-14 * (1 + np.linalg.norm(y)) else 0
        if stalls >= 2:
            break
        t *= mu

    values = {v: float(np.exp(y[index[v]])) for v in prob.variables}
    return GpSolution(values, posy_eval(prob.objective, values), float(residual),
                      iterations, status)


def _phase1(constraints, y0, Aeq, max_iters, trace):
    """Find a strictly feasible point by minimizing the worst violation.

    Works on the extended variable (y, s) where every constraint gains an
    exp(-s) factor; stops as soon as the slack goes negative.
    """
    n = len(y0)
    ext = []
    for c in constraints:
        A = np.hstack([c.A, -np.ones((c.A.shape[0], 1))])
        ext.append(_LogSumExp(A, c.b))
    obj = _LogSumExp(np.concatenate([np.zeros(n), [1.0]])[None, :], np.zeros(1))
    s0 = max(c.value(y0) for c in constraints) + 1.0
    y = np.concatenate([y0, [s0]])
    Aeq_ext = None
    if Aeq is not None and Aeq.size:
        Aeq_ext = np.hstack([Aeq, np.zeros((Aeq.shape[0], 1))])

    def strictly_feasible(z):
        return max(c.value(z[:n]) for c in constraints) < -1e-9

    iterations = 0
    t = 1.0
    while iterations < max_iters:
        y, used, converged = _center(obj, ext, y, t, Aeq_ext,
                                     max_iters - iterations, trace,
                                     early_stop=strictly_feasible)
        iterations += used
        if strictly_feasible(y):
            return y[:n], iterations, True
        if not converged or len(ext) / t < 1e-9:
            break
        t *= 20.0
    feasible = max(c.value(y[:n]) for c in constraints) < 0
    return y[:n], iterations, feasible


# ---------------------------------------------------------------------------
# power-control problems
# ---------------------------------------------------------------------------

def _accept_power_solution(sol: GpSolution, what: str) -> GpSolution:
    """Power solves may stall at the float64 centering floor slightly above
    the requested certificate; accept such iterates when the measured KKT
    residual is still far inside every downstream tolerance."""
    if sol.status == "optimal":
        return sol
    if sol.status == "max_iters" and sol.kkt_residual <= 1e-4:
        return sol
    raise RuntimeError(f"{what} failed: status={sol.status}, "
                       f"kkt_residual={sol.kkt_residual:.3e}")


def _allocated_links(alloc: Allocation):
    L, N, _ = alloc.A.shape
    links = []
    for l in range(L):
        for n in range(N):
            k = alloc.user_at(l, n)
            if k is not None:
                links.append((l, n, k))
    return links


def _pvar(l, n):
    return f"p[{l},{n}]"


def _interference_terms(alloc, ch, l, n, extra_mono=None):
    """Monomial terms of the received interference at (n, l) as functions of
    the other cells' power variables, optionally multiplied by ``extra_mono``."""
    L = ch.shape[0]
    terms = []
    for j in range(L):
        if j == l:
            continue
        kj = alloc.user_at(j, n)
        if kj is None:
            continue
        g = ch.G[j, l, n, kj]
        if g <= 0:
            continue
        mono = Monomial(g, {_pvar(j, n): 1.0})
        terms.append(mono * extra_mono if extra_mono else mono)
    return terms


def _budget_constraints(alloc, cfg, links):
    """One posynomial per (cell, user) holding subcarriers: sum p / p_max <= 1."""
    by_user = {}
    for l, n, k in links:
        by_user.setdefault((l, k), []).append(n)
    out = []
    for (l, k), ns in sorted(by_user.items()):
        terms = tuple(Monomial(1.0 / cfg.p_max[k], {_pvar(l, n): 1.0}) for n in ns)
        out.append(Posynomial(terms))
    return out


def _solution_to_powers(alloc, values):
    P = np.zeros(alloc.A.shape, dtype=float)
    for l, n, k in _allocated_links(alloc):
        P[l, n, k] = values[_pvar(l, n)]
    return PowerMatrix(P)


def high_sinr_power(alloc: Allocation, ch: ChannelSet, cfg: NetworkConfig,
                    tol: float = 1e-6) -> PowerMatrix:
    """Optimal powers of the interference-to-signal product objective under
    per-user budget constraints, for a fixed complete allocation.

    Each allocated link contributes a factor (noise + interference) / (p h);
    an auxiliary bound variable per link keeps the problem in standard
    form.  Unallocated entries of the result are zero.
    """
    if not alloc.complete:
        raise ValueError("allocation must be complete")
    links = _allocated_links(alloc)
    for l, n, k in links:
        if ch.H[l, n, k] <= 0:
            raise ValueError(f"allocated link ({l},{n}) has zero direct gain")

    variables = [_pvar(l, n) for l, n, _ in links]
    tvars = [f"t[{l},{n}]" for l, n, _ in links]
    objective = Posynomial((Monomial(1.0, {tv: 1.0 for tv in tvars}),))

    constraints = []
    for (l, n, k), tv in zip(links, tvars):
        inv = Monomial(1.0 / ch.H[l, n, k], {_pvar(l, n): -1.0, tv: -1.0})
        terms = [Monomial(cfg.noise_power, {}) * inv]
        terms += _interference_terms(alloc, ch, l, n, extra_mono=inv)
        constraints.append(Posynomial(tuple(terms)))
    constraints += _budget_constraints(alloc, cfg, links)

    prob = GpProblem(objective, constraints, [], tuple(variables) + tuple(tvars))
    x0 = _interior_power_start(alloc, ch, cfg, links, constraints, variables, tvars)
    sol = solve_gp(prob, x0=x0, tol=tol)
    if sol.status != "optimal":
        raise RuntimeError(f"power optimization failed with status {sol.status}")
    return _solution_to_powers(alloc, sol.values)


def _interior_power_start(alloc, ch, cfg, links, link_constraints, variables, tvars):
    """Strictly feasible start: backed-off equal split plus loose link bounds."""
    from .model import equal_split_powers

    eq = equal_split_powers(alloc, cfg)
    x0 = {}
    for (l, n, k), v in zip(links, variables):
        x0[v] = 0.999 * float(eq.P[l, n, k])
    for c, tv in zip(link_constraints, tvars):
        x0[tv] = 1.0
        x0[tv] = 2.0 * posy_eval(c, {**x0, tv: 1.0})
    return x0


def general_sinr_power(alloc: Allocation, ch: ChannelSet, cfg: NetworkConfig,
                       x0: PowerMatrix, tol: float = 1e-6,
                       max_rounds: int = 100) -> PowerMatrix:
    """Successive single-condensation refinement of the exact rate objective.

    Starting from feasible, strictly positive powers on the allocated
    entries, each round condenses the denominator (p h + noise + I) of every
    link at the current point and solves the resulting GP.  The exact
    objective (log2 of the product of interference ratios, i.e. minus the
    network sum rate) is monotone non-increasing across rounds; iteration
    stops when it changes by less than ``tol`` or after ``max_rounds``.
    """
    if not alloc.complete:
        raise ValueError("allocation must be complete")
    links = _allocated_links(alloc)
    variables = [_pvar(l, n) for l, n, _ in links]
    tvars = [f"t[{l},{n}]" for l, n, _ in links]
    budget = _budget_constraints(alloc, cfg, links)

    current = {}
    for (l, n, k), v in zip(links, variables):
        p = float(x0.P[l, n, k])
        if p <= 0:
            p = 1e-12 * float(cfg.p_max[k])
        current[v] = p

    def exact_objective(assign):
        total = 0.0
        for (l, n, k), v in zip(links, variables):
            inter = sum(posy_eval(Posynomial((t,)), assign)
                        for t in _interference_terms(alloc, ch, l, n))
            s = assign[v] * ch.H[l, n, k]
            total += np.log2((cfg.noise_power + inter) / (s + cfg.noise_power + inter))
        return total

    prev = exact_objective(current)
    for _ in range(max_rounds):
        constraints = []
        for (l, n, k), v, tv in zip(links, variables, tvars):
            numer = [Monomial(cfg.noise_power, {})]
            numer += _interference_terms(alloc, ch, l, n)
            denom_terms = [Monomial(ch.H[l, n, k], {v: 1.0})] + list(numer)
            denom_mono = condense(Posynomial(tuple(denom_terms)), current)
            shift = denom_mono.inv() * Monomial(1.0, {tv: -1.0})
            constraints.append(Posynomial(tuple(t * shift for t in numer)))
        constraints_all = constraints + budget

        objective = Posynomial((Monomial(1.0, {tv: 1.0 for tv in tvars}),))
        start = dict(current)
        for v in variables:
            start[v] = 0.999 * start[v]
        for c, tv in zip(constraints, tvars):
            start[tv] = 1.0
            start[tv] = 2.0 * posy_eval(c, {**start, tv: 1.0})
        prob = GpProblem(objective, constraints_all, [],
                         tuple(variables) + tuple(tvars))
        sol = solve_gp(prob, x0=start, tol=1e-7)
        if sol.status != "optimal":
            raise RuntimeError(f"condensation round failed with status {sol.status}")
        candidate = {v: sol.values[v] for v in variables}
        value = exact_objective(candidate)
        if value > prev + 1e-6:
            raise AssertionError(
                f"condensation step increased the objective: {prev} -> {value}")
        if value >= prev - tol:
            # fixed point reached (up to solver precision); keep the better point
            if value < prev:
                current = candidate
            break
        current = candidate
        prev = value
    return _solution_to_powers(alloc, current)


def subcarrier_gp(n: int, alloc: Allocation, ch: ChannelSet, cfg: NetworkConfig,
                  p_eq: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Per-cell powers at subcarrier ``n`` minimizing the interference-to-
    signal product of that subcarrier under per-cell caps ``p_eq``.

    ``p_eq[l]`` caps the power of the user allocated at (n, l); the return
    value is the optimal per-cell power vector, elementwise <= ``p_eq``.
    """
    L = ch.shape[0]
    p_eq = np.asarray(p_eq, dtype=float)
    if p_eq.shape != (L,):
        raise ValueError("p_eq must hold one cap per cell")
    if (p_eq <= 0).any():
        raise ValueError("caps must be > 0")
    users = [alloc.user_at(l, n) for l in range(L)]
    if any(k is None for k in users):
        raise ValueError(f"subcarrier {n} must be allocated in every cell")

    variables = [_pvar(l, n) for l in range(L)]
    tvars = [f"t[{l},{n}]" for l in range(L)]
    objective = Posynomial((Monomial(1.0, {tv: 1.0 for tv in tvars}),))
    constraints = []
    for l, (k, tv) in enumerate(zip(users, tvars)):
        inv = Monomial(1.0 / ch.H[l, n, k], {variables[l]: -1.0, tv: -1.0})
        terms = [Monomial(cfg.noise_power, {}) * inv]
        terms += _interference_terms(alloc, ch, l, n, extra_mono=inv)
        constraints.append(Posynomial(tuple(terms)))
    for l in range(L):
        constraints.append(Posynomial((Monomial(1.0 / p_eq[l], {variables[l]: 1.0}),)))

    x0 = {v: 0.7 * c for v, c in zip(variables, p_eq)}
    for cpos, tv in zip(constraints[:L], tvars):
        x0[tv] = 1.0
        x0[tv] = 2.0 * posy_eval(cpos, {**x0, tv: 1.0})
    prob = GpProblem(objective, constraints, [], tuple(variables) + tuple(tvars))
    sol = solve_gp(prob, x0=x0, tol=tol)
    if sol.status != "optimal":
        raise RuntimeError(f"per-subcarrier power solve failed: {sol.status}")
    out = np.array([sol.values[v] for v in variables])
    return np.minimum(out, p_eq)
