"""Exact distributions for the self-repelling walk on a segment {0..n}.

Everything here rests on one reduction: conditioned on its past, each
departure from a site is a weighted coin between the two adjacent edges, so
the successive edge crossing counts form Markov chains. With the imbalance
u between the two local times, the probability that the next departure
continues through the lower edge is

    p(u) = exp(-beta*(2u+1)) / (1 + exp(-beta*(2u+1))),   q(u) = 1 - p(u).

A block of consecutive continues followed by one stop moves the imbalance
chain by kernel P(u, v) = q(v+1) * prod_{r=u..v} p(r) for v >= u-1. Powers
of P assemble the two crossing-count chains:

  * backward chain Y (crossings toward 0 recorded walking down from the far
    end before the walk first hits n):  Q(z, y) = P^{z+1}(0, y-z-1), and the
    ruin probability r_n = P(hit n before returning to 0) = P_0(Y_{n-1}=0);
  * forward chain Z (crossings away from 0 before the walk first returns
    to 0): P(Z_{k+1}=y | Z_k=z) = P^{z}(-1, y-z-1), absorbed at 0, with
    P(Z_n >= 1) = r_n.

All laws are carried on finite integer windows with explicit leaked-mass
accounting; reported probabilities are lower bounds with error <= leak.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit

__all__ = [
    "LeakBudgetExceeded",
    "TruncatedDistribution",
    "BlockPowerRows",
    "StationaryLaw",
    "PathCrossingRecords",
    "continue_prob",
    "stop_prob",
    "default_height",
    "block_power_rows",
    "eta_power_rows",
    "backward_kernel",
    "forward_kernel",
    "ruin_series",
    "y_evolve",
    "z_evolve",
    "forward_survival_series",
    "forward_moment_series",
    "survival_series",
    "killed_interval_table",
    "gen_ruin",
    "gen_ruin_table",
    "harmonic_profile",
    "stationary_data",
    "tv_distance",
    "step_law_checks",
    "mc_path_tsaw",
    "mc_ruin_frequency",
]

DEFAULT_LEAK_BUDGET = 1e-10


class LeakBudgetExceeded(RuntimeError):
    """Raised when truncation leak exceeds the configured budget."""

    def __init__(self, message: str, leak: float, hint: str = ""):
        super().__init__(message + (f" ({hint})" if hint else ""))
        self.leak = leak
        self.hint = hint


def continue_prob(u, beta: float):
    """p(u): chance the next departure continues through the lower edge."""
    return expit(-beta * (2.0 * np.asarray(u, dtype=float) + 1.0))


def stop_prob(u, beta: float):
    """q(u) = 1 - p(u)."""
    return expit(beta * (2.0 * np.asarray(u, dtype=float) + 1.0))


def default_height(n: int) -> int:
    """Window height for chain evolutions of length n.

    The chains are diffusive with jump tails decaying like exp(-beta*j^2),
    so eight standard-deviation widths plus a constant margin keeps the
    leak far below any budget used here.
    """
    return int(np.ceil(8.0 * np.sqrt(max(n, 1)))) + 64


@dataclass
class TruncatedDistribution:
    """Probability mass on an integer window plus leaked (outside) mass."""

    lo: int
    hi: int
    mass: np.ndarray
    leak: float

    def __post_init__(self):
        if len(self.mass) != self.hi - self.lo + 1:
            raise ValueError("mass vector does not match window")

    def prob(self, v: int) -> float:
        if self.lo <= v <= self.hi:
            return float(self.mass[v - self.lo])
        return 0.0

    def cdf_upto(self, v: int) -> float:
        """Mass on states <= v (a lower bound, short by at most leak)."""
        if v < self.lo:
            return 0.0
        return float(self.mass[:min(v, self.hi) - self.lo + 1].sum())

    def total(self) -> float:
        return float(self.mass.sum()) + self.leak

    def support(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def mean(self) -> float:
        return float(np.dot(self.support(), self.mass))


def _default_halfwidth(beta: float) -> int:
    # Row mass sits within O(sqrt(1/beta)) of -1 with Gaussian tails;
    # exp(-beta*w^2) < 1e-22 at the edge keeps single-row leak < 1e-15.
    return max(16, int(np.ceil(np.sqrt(52.0 / beta))) + 2)


def _block_transition_matrix(beta: float, lo: int, hi: int) -> np.ndarray:
    """Dense kernel P(u, v) = q(v+1) prod_{r=u..v} p(r) on [lo, hi]^2.

    Products are taken in log space per row; p(r) underflows quickly for
    large r at moderate beta.
    """
    states = np.arange(lo, hi + 1)
    logp = log_expit(-beta * (2.0 * states + 1.0))
    q_next = expit(beta * (2.0 * states + 3.0))  # q(v+1)
    n = len(states)
    P = np.zeros((n, n))
    for i in range(n):
        cs = np.cumsum(logp[i:])
        P[i, i:] = q_next[i:] * np.exp(cs)
        if i > 0:
            P[i, i - 1] = expit(beta * (2.0 * states[i] + 1.0))  # q(u)
    return P


@dataclass
class BlockPowerRows:
    """Rows P^m(start, .) of the imbalance-block kernel, m = 0..m_max."""

    beta: float
    start: int
    lo: int
    hi: int
    rows: np.ndarray   # shape (m_max + 1, hi - lo + 1)
    leak: np.ndarray   # cumulative leak per row

    @property
    def m_max(self) -> int:
        return self.rows.shape[0] - 1

    def value(self, m: int, v: int) -> float:
        if self.lo <= v <= self.hi:
            return float(self.rows[m, v - self.lo])
        return 0.0

    def row(self, m: int) -> TruncatedDistribution:
        return TruncatedDistribution(self.lo, self.hi, self.rows[m].copy(),
                                     float(self.leak[m]))

    def slice_args(self, m: int, args: np.ndarray) -> np.ndarray:
        """Row-m values at integer arguments, zero outside the window."""
        out = np.zeros(len(args))
        ok = (args >= self.lo) & (args <= self.hi)
        out[ok] = self.rows[m, args[ok] - self.lo]
        return out


def block_power_rows(beta: float, m_max: int, start: int = 0,
                     halfwidth: int | None = None,
                     single_row_leak: float = 1e-15) -> BlockPowerRows:
    """Iterate the block kernel from a point mass at ``start``.

    Raises LeakBudgetExceeded when the window is too narrow for any single
    application to leak less than ``single_row_leak``.
    """
    w = halfwidth if halfwidth is not None else _default_halfwidth(beta)
    lo, hi = start - w, start + w
    P = _block_transition_matrix(beta, lo, hi)
    n = hi - lo + 1
    rows = np.zeros((m_max + 1, n))
    rows[0, start - lo] = 1.0
    leak = np.zeros(m_max + 1)
    for m in range(1, m_max + 1):
        rows[m] = rows[m - 1] @ P
        leak[m] = 1.0 - rows[m].sum()
        if leak[m] - leak[m - 1] > single_row_leak:
            raise LeakBudgetExceeded(
                f"single-row leak {leak[m] - leak[m - 1]:.3e} at power {m}",
                leak=float(leak[m]),
                hint=f"increase halfwidth beyond {w}, e.g. {2 * w}")
    return BlockPowerRows(beta=beta, start=start, lo=lo, hi=hi, rows=rows, leak=leak)


def eta_power_rows(beta: float, m_max: int,
                   halfwidth: int | None = None) -> list[TruncatedDistribution]:
    """Rows P^m(0, .) for m = 1..m_max, as truncated distributions."""
    rows = block_power_rows(beta, m_max, start=0, halfwidth=halfwidth)
    return [rows.row(m) for m in range(1, m_max + 1)]


def backward_kernel(beta: float, height: int,
                    rows: BlockPowerRows | None = None) -> np.ndarray:
    """Kernel of the backward crossing chain on {0..height}.

    Q[z, y] = P^{z+1}(0, y - z - 1). Rows sum to one minus truncation leak;
    mass that would land above ``height`` shows up as row deficit and is
    charged to the evolution's leak.
    """
    if rows is None or rows.start != 0 or rows.m_max < height + 1:
        rows = block_power_rows(beta, height + 1, start=0)
    L = height
    Q = np.zeros((L + 1, L + 1))
    y = np.arange(L + 1)
    for z in range(L + 1):
        Q[z] = rows.slice_args(z + 1, y - z - 1)
    return Q


def forward_kernel(beta: float, height: int,
                   rows_m1: BlockPowerRows | None = None) -> np.ndarray:
    """Kernel of the forward crossing chain on {0..height}, absorbing at 0.

    Rows for z >= 1 are P^{z}(-1, y - z - 1); state 0 is absorbing.
    """
    if rows_m1 is None or rows_m1.start != -1 or rows_m1.m_max < height:
        rows_m1 = block_power_rows(beta, height, start=-1)
    L = height
    Q = np.zeros((L + 1, L + 1))
    Q[0, 0] = 1.0
    y = np.arange(L + 1)
    for z in range(1, L + 1):
        Q[z] = rows_m1.slice_args(z, y - z - 1)
    return Q


def _check_budget(leak: float, budget: float, where: str):
    if leak > budget:
        raise LeakBudgetExceeded(f"{where}: leak {leak:.3e} exceeds budget {budget:.1e}",
                                 leak=leak, hint="increase the window height")


def ruin_series(n_max: int, beta: float, height: int | None = None,
                leak_budget: float = DEFAULT_LEAK_BUDGET,
                kernel: np.ndarray | None = None,
                cdf_checkpoints: tuple[int, ...] = ()) -> dict:
    """r_n for n = 1..n_max from one backward-chain evolution.

    Returns {"r": array indexed by n (r[0] unused), "leak": per-n leak,
    "cdf": {n: cumulative law of Y_{n-1}}} for requested checkpoints.
    """
    L = height if height is not None else default_height(n_max)
    Q = kernel if kernel is not None else backward_kernel(beta, L)
    d = np.zeros(L + 1)
    d[0] = 1.0
    r = np.zeros(n_max + 1)
    leak = np.zeros(n_max + 1)
    r[1] = 1.0
    cdf: dict[int, np.ndarray] = {}
    if 1 in cdf_checkpoints:
        cdf[1] = np.cumsum(d)
    running_leak = 0.0
    for n in range(2, n_max + 1):
        before = d.sum()
        d = d @ Q
        running_leak += before - d.sum()
        _check_budget(running_leak, leak_budget, f"backward evolution at n={n}")
        r[n] = d[0]
        leak[n] = running_leak
        if n in cdf_checkpoints:
            cdf[n] = np.cumsum(d)
    return {"r": r, "leak": leak, "cdf": cdf, "height": L}


def y_evolve(n: int, beta: float, height: int | None = None,
             leak_budget: float = DEFAULT_LEAK_BUDGET) -> TruncatedDistribution:
    """Law of Y_{n-1} started from 0; its mass at 0 is r_n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    L = height if height is not None else default_height(n)
    Q = backward_kernel(beta, L)
    d = np.zeros(L + 1)
    d[0] = 1.0
    running_leak = 0.0
    for k in range(n - 1):
        before = d.sum()
        d = d @ Q
        running_leak += before - d.sum()
        _check_budget(running_leak, leak_budget, f"backward evolution at step {k + 1}")
    return TruncatedDistribution(0, L, d, running_leak)


def z_evolve(n: int, beta: float, height: int | None = None,
             leak_budget: float = DEFAULT_LEAK_BUDGET) -> TruncatedDistribution:
    """Law of Z_n started from Z_1 = 1 (forward chain, absorbed at 0)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    L = height if height is not None else default_height(n)
    Q = forward_kernel(beta, L)
    d = np.zeros(L + 1)
    d[1] = 1.0
    running_leak = 0.0
    for k in range(n - 1):
        before = d.sum()
        d = d @ Q
        running_leak += before - d.sum()
        _check_budget(running_leak, leak_budget, f"forward evolution at step {k + 1}")
    return TruncatedDistribution(0, L, d, running_leak)


def forward_survival_series(n_max: int, beta: float, height: int | None = None,
                            leak_budget: float = DEFAULT_LEAK_BUDGET) -> np.ndarray:
    """P(Z_n >= 1) for n = 1..n_max (index 0 unused). Equals r_n exactly."""
    L = height if height is not None else default_height(n_max)
    Q = forward_kernel(beta, L)
    d = np.zeros(L + 1)
    d[1] = 1.0
    out = np.zeros(n_max + 1)
    out[1] = 1.0
    running_leak = 0.0
    for n in range(2, n_max + 1):
        before = d.sum()
        d = d @ Q
        running_leak += before - d.sum()
        _check_budget(running_leak, leak_budget, f"forward evolution at n={n}")
        out[n] = d[1:].sum()
    return out


def forward_moment_series(n_max: int, beta: float, height: int | None = None,
                          leak_budget: float = DEFAULT_LEAK_BUDGET) -> dict:
    """E[Z_n] and E[Z_n^2] for n = 1..n_max from the exact law."""
    L = height if height is not None else default_height(n_max)
    Q = forward_kernel(beta, L)
    states = np.arange(L + 1, dtype=float)
    d = np.zeros(L + 1)
    d[1] = 1.0
    m1 = np.zeros(n_max + 1)
    m2 = np.zeros(n_max + 1)
    m1[1], m2[1] = 1.0, 1.0
    running_leak = 0.0
    for n in range(2, n_max + 1):
        before = d.sum()
        d = d @ Q
        running_leak += before - d.sum()
        _check_budget(running_leak, leak_budget, f"forward evolution at n={n}")
        m1[n] = float(np.dot(states, d))
        m2[n] = float(np.dot(states ** 2, d))
    return {"m1": m1, "m2": m2, "leak": running_leak}


def survival_series(m_max: int, beta: float, height: int | None = None,
                    leak_budget: float = DEFAULT_LEAK_BUDGET,
                    alive_checkpoints: tuple[int, ...] = ()) -> dict:
    """P_0(sigma_0^+ > m) for m = 0..m_max via the 0-absorbed backward chain.

    Also returns the alive sub-probability vectors (Y_m = y, sigma_0^+ > m)
    at requested checkpoints; these feed the interval estimates.
    """
    L = height if height is not None else default_height(m_max)
    Q = backward_kernel(beta, L)
    alive = np.zeros(L + 1)
    alive[0] = 1.0
    surv = np.zeros(m_max + 1)
    surv[0] = 1.0
    snapshots: dict[int, np.ndarray] = {}
    running_leak = 0.0
    for m in range(1, m_max + 1):
        before = alive.sum()
        alive = alive @ Q
        absorbed = alive[0]
        alive[0] = 0.0
        running_leak += before - alive.sum() - absorbed
        _check_budget(running_leak, leak_budget, f"absorbed evolution at m={m}")
        surv[m] = alive.sum()
        if m in alive_checkpoints:
            snapshots[m] = alive.copy()
    return {"survival": surv, "alive": snapshots, "leak": running_leak, "height": L}


def killed_interval_table(n_list: list[int], beta: float,
                          height: int | None = None,
                          leak_budget: float = DEFAULT_LEAK_BUDGET) -> dict:
    """P_0(Y_n in {1..j-1}, sigma_0^+ > n) for each n in n_list, all j.

    Returns {n: cumulative array c where c[j] = mass of {1..j-1}}.
    """
    res = survival_series(max(n_list), beta, height=height, leak_budget=leak_budget,
                          alive_checkpoints=tuple(n_list))
    out = {}
    for n in n_list:
        alive = res["alive"][n]
        c = np.zeros(len(alive) + 1)
        c[1:] = np.cumsum(alive)
        # c[j] = sum over states 0..j-1; state 0 carries no alive mass.
        out[n] = c
    return {"interval": out, "survival": res["survival"], "leak": res["leak"]}


def gen_ruin(n: int, j: int, beta: float, height: int | None = None,
             leak_budget: float = DEFAULT_LEAK_BUDGET) -> float:
    """P(the walk hits n before its j-th return to 0) = P_0(Y_{n-1} <= j-1)."""
    if j < 1:
        raise ValueError("j must be >= 1")
    law = y_evolve(n, beta, height=height, leak_budget=leak_budget)
    return law.cdf_upto(j - 1)


def gen_ruin_table(n_list: list[int], beta: float, height: int | None = None,
                   leak_budget: float = DEFAULT_LEAK_BUDGET) -> dict[int, np.ndarray]:
    """Cumulative laws of Y_{n-1} at the requested n; entry[j] = r_n^{(j)}."""
    res = ruin_series(max(n_list), beta, height=height, leak_budget=leak_budget,
                      cdf_checkpoints=tuple(n_list))
    out = {}
    for n in n_list:
        cdf = res["cdf"][n]
        table = np.zeros(len(cdf) + 1)
        table[1:] = cdf
        out[n] = table
    return out


def harmonic_profile(N: int, beta: float,
                     rows: BlockPowerRows | None = None) -> np.ndarray:
    """h_N(x) = N * P_x(reach level >= N before hitting 0), x = 0..N-1.

    Solves the interior harmonic system phi(x) = sum_{0<y<N} Q(x,y) phi(y)
    + P_x(Y_1 >= N); overshoot above N counts as success. The profile
    tracks the identity within O(1), which is what the tests pin down.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    Q = backward_kernel(beta, N, rows=rows)
    interior = Q[1:N, 1:N]
    b = 1.0 - Q[1:N, :N].sum(axis=1)
    phi = np.linalg.solve(np.eye(N - 1) - interior, b)
    residual = np.max(np.abs((np.eye(N - 1) - interior) @ phi - b))
    if residual > 1e-9:
        raise RuntimeError(f"harmonic solve ill-conditioned: residual {residual:.2e}")
    h = np.zeros(N)
    h[1:] = N * phi
    return h


@dataclass
class StationaryLaw:
    """Gaussian-weight stationary data of the imbalance-block chain."""

    beta: float
    lo: int
    hi: int
    nu: np.ndarray       # nu(j) = exp(-beta j^2)/Z on [lo..hi], symmetric
    rho: np.ndarray      # rho(x) = nu(x+1) on [lo..hi]
    varsigma2: float     # variance of nu
    leak: float


def stationary_data(beta: float, halfwidth: int | None = None) -> StationaryLaw:
    w = halfwidth if halfwidth is not None else _default_halfwidth(beta)
    wide = np.arange(-4 * w, 4 * w + 1)
    weights = np.exp(-beta * wide.astype(float) ** 2)
    Z = weights.sum()
    varsigma2 = float(np.dot(wide.astype(float) ** 2, weights) / Z)
    j = np.arange(-w, w + 1)
    nu = np.exp(-beta * j.astype(float) ** 2) / Z
    rho = np.exp(-beta * (j.astype(float) + 1.0) ** 2) / Z
    leak = 1.0 - nu.sum()
    return StationaryLaw(beta=beta, lo=-w, hi=w, nu=nu, rho=rho,
                         varsigma2=varsigma2, leak=leak)


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def step_law_checks(beta: float, z_grid: list[int],
                    rows: BlockPowerRows | None = None) -> dict:
    """Jump-law diagnostics of the backward chain across starting states.

    For each z: the jump law mu_z(j) = P^{z+1}(0, j-1), its first two
    moments, total variation to the limiting law nu, and the exponential
    tail profile P(|jump| >= m).
    """
    m_needed = max(z_grid) + 1
    if rows is None or rows.start != 0 or rows.m_max < m_needed:
        rows = block_power_rows(beta, m_needed, start=0)
    stat = stationary_data(beta, halfwidth=rows.hi)
    j = np.arange(stat.lo, stat.hi + 1)
    report = {"z": [], "tv_to_nu": [], "m1": [], "m2": [], "tails": {},
              "varsigma2": stat.varsigma2}
    for z in z_grid:
        mu = rows.slice_args(z + 1, j - 1)        # mu_z(j) on the nu window
        report["z"].append(z)
        report["tv_to_nu"].append(float(np.abs(mu - stat.nu).sum()))
        report["m1"].append(float(np.dot(j.astype(float), mu)))
        report["m2"].append(float(np.dot(j.astype(float) ** 2, mu)))
        tails = np.array([mu[np.abs(j) >= m].sum() for m in range(0, rows.hi)])
        report["tails"][z] = tails  # tails[m] = P(|jump| >= m)
    return report


@dataclass
class PathCrossingRecords:
    """Per-replica crossing records of the segment walk.

    backward[r, x-1] = crossings x -> x-1 before the walk first hits n;
    forward[r, x-1] = crossings x-1 -> x before the walk first returns
    to 0; ruin[r] says whether it hit n before that return.
    """

    n: int
    backward: np.ndarray
    forward: np.ndarray
    ruin: np.ndarray
    discarded_backward: int = 0
    discarded_forward: int = 0


def _segment_lockstep(n: int, beta: float, reps: int, rng: np.random.Generator,
                      stop_at_far_end: bool, max_steps: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Run ``reps`` independent segment walks in lockstep.

    Returns (edge crossing totals [reps, n], reached-far-end flags,
    number of replicas discarded at the step cap). Walks stop on first
    arrival at n (stop_at_far_end) or on first return to 0 (otherwise,
    with the deterministic reflection at n).
    """
    lt = np.zeros((reps, n), dtype=np.int64)   # edge {x, x+1} at column x
    pos = np.zeros(reps, dtype=np.int64)
    reached = np.zeros(reps, dtype=bool)
    active = np.arange(reps)
    first = True
    steps = 0
    discarded = np.zeros(reps, dtype=bool)
    while len(active):
        steps += 1
        if steps > max_steps:
            discarded[active] = True
            break
        p = pos[active]
        go_right = np.ones(len(active), dtype=bool)
        interior = (p > 0) & (p < n)
        if interior.any():
            ai = active[interior]
            pi = p[interior]
            diff = lt[ai, pi - 1] - lt[ai, pi]   # left minus right local time
            pr = expit(beta * diff.astype(float))
            go_right[interior] = rng.random(len(ai)) < pr
        go_right[p == n] = False
        edge = np.where(go_right, p, p - 1)
        lt[active, edge] += 1
        pos[active] = p + np.where(go_right, 1, -1)
        reached[active] |= pos[active] == n
        if first:
            first = False
        if stop_at_far_end:
            keep = pos[active] != n
        else:
            keep = pos[active] != 0
        active = active[keep]
    return lt, reached, int(discarded.sum())


def mc_path_tsaw(n: int, beta: float, reps: int, rng: np.random.Generator,
                 max_steps: int | None = None) -> PathCrossingRecords:
    """Monte Carlo crossing records for the segment walk on {0..n}.

    Two lockstep batches: one runs to the first hit of n (backward
    records), one to the first return to 0 (forward records and the ruin
    indicator). Replicas hitting the step cap are discarded and counted.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cap = max_steps if max_steps is not None else max(200_000, 2_000 * n)
    lt_b, _, disc_b = _segment_lockstep(n, beta, reps, rng,
                                        stop_at_far_end=True, max_steps=cap)
    # At tau_n the edge {x-1,x} was crossed 2*B(x,n)+1 times.
    backward = (lt_b - 1) // 2
    lt_f, reached, disc_f = _segment_lockstep(n, beta, reps, rng,
                                              stop_at_far_end=False, max_steps=cap)
    forward = lt_f // 2
    return PathCrossingRecords(n=n, backward=backward, forward=forward,
                               ruin=reached, discarded_backward=disc_b,
                               discarded_forward=disc_f)


def mc_ruin_frequency(n: int, beta: float, reps: int, rng: np.random.Generator,
                      batch: int = 20_000, max_steps: int | None = None) -> dict:
    """Empirical r_n with binomial standard error, batched for memory."""
    cap = max_steps if max_steps is not None else max(200_000, 2_000 * n)
    hits = 0
    done = 0
    discarded = 0
    while done < reps:
        b = min(batch, reps - done)
        _, reached, disc = _segment_lockstep(n, beta, b, rng,
                                             stop_at_far_end=False, max_steps=cap)
        hits += int(reached.sum())
        discarded += disc
        done += b
    p_hat = hits / reps
    se = float(np.sqrt(max(p_hat * (1 - p_hat), 1e-12) / reps))
    return {"estimate": p_hat, "se": se, "reps": reps, "discarded": discarded}
