"""The master: clustering, round generation, decoding, and rate accounting."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from rpm3.errors import ConfigurationError, CorruptionError, InfeasibleClusterError, RPM3Error
from rpm3.fountain import CoefVector, PeelingDecoder, ProductSymbol, draw_coef, encode_block, measured_overhead
from rpm3.lagrange import (
    EvalPointSet,
    MatrixPolynomial,
    ResultShare,
    RoundPolynomialPair,
    TaskShare,
    build_pair,
    compute,
    eval_task,
    extract_products,
    extract_shared,
    interpolate_h,
)
from rpm3.matgf import MatrixFq, assemble_C, load_matrix, split_operands
from rpm3.scenario import Scenario
from rpm3.simnet import WorkerPool


# --- clustering -----------------------------------------------------------

def compute_d(n_u: int, u: int, z: int) -> int:
    """Coded blocks per polynomial for a cluster of ``n_u`` workers (``u`` is 1-based)."""
    d = (n_u - 2 * z + 1) // 2 if u == 1 else (n_u - z + 1) // 2
    if d < 1:
        raise InfeasibleClusterError(f"cluster {u} with {n_u} workers and z={z} carries no data")
    return d


def quota(d: int, u: int, z: int) -> int:
    """Worker responses needed to interpolate the cluster's ``h``."""
    return 2 * d + 2 * z - 1 if u == 1 else 2 * d + z - 1


@dataclass(frozen=True)
class Cluster:
    members: tuple[int, ...]
    d: int
    quota: int

    @property
    def n(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class ClusterPlan:
    clusters: tuple[Cluster, ...]
    z: int

    @property
    def c(self) -> int:
        return len(self.clusters)

    @property
    def d_max(self) -> int:
        return max(cl.d for cl in self.clusters)

    def cluster_of(self, worker: int) -> int:
        for u, cl in enumerate(self.clusters):
            if worker in cl.members:
                return u
        raise KeyError(f"worker {worker} is not in the plan")

    def describe(self) -> list[dict]:
        return [{"u": u + 1, "members": list(cl.members), "n_u": cl.n, "d_u": cl.d, "quota": cl.quota}
                for u, cl in enumerate(self.clusters)]


def make_plan(groups: Sequence[Sequence[int]], z: int, max_d: int | None = None) -> ClusterPlan:
    """Build a plan from explicit member lists, fastest cluster first."""
    clusters = []
    for u, members in enumerate(groups, start=1):
        need = 2 * z + 1 if u == 1 else z + 1
        if len(members) < need:
            raise InfeasibleClusterError(f"cluster {u} has {len(members)} workers, needs at least {need}")
        d = compute_d(len(members), u, z)
        if max_d:
            d = min(d, max_d)
        clusters.append(Cluster(tuple(members), d, quota(d, u, z)))
    return ClusterPlan(tuple(clusters), z)


def cluster_workers(times: Mapping[int, float], delta: float, z: int, max_d: int | None = None) -> ClusterPlan:
    """Group workers with similar response times, fastest group first.

    A cluster opens at the fastest unassigned worker (time ``eta``) and takes
    everyone answering within ``[eta, eta + delta]``.  The window is widened
    when the cluster would be too small (``2z+1`` for the first, ``z+1`` for
    the others); a tail too small for its own cluster joins the previous one.
    Parity is then fixed by pushing the slowest member of a cluster down one
    cluster, so every cluster but the last has exactly its quota of workers.
    Unknown times may be given as ``inf``.
    """
    if not delta > 0:
        raise ConfigurationError("delta must be positive")
    order = sorted(times, key=lambda w: (times[w], w))
    n = len(order)
    if n < 2 * z + 1:
        raise InfeasibleClusterError(f"{n} workers cannot support z={z}")
    ts = [times[w] for w in order]
    groups: list[list[int]] = []
    i = 0
    while i < n:
        need = 2 * z + 1 if not groups else z + 1
        if n - i < need:
            groups[-1].extend(order[i:])
            break
        limit = ts[i] + delta
        limit = max(limit, ts[i + need - 1])
        j = i
        while j < n and ts[j] <= limit:
            j += 1
        groups.append(order[i:j])
        i = j
    for u in range(len(groups) - 1):
        base = 2 * z - 1 if u == 0 else z - 1
        if (len(groups[u]) - base) % 2:
            groups[u + 1].insert(0, groups[u].pop())
    return make_plan(groups, z, max_d)


# --- rate formulas --------------------------------------------------------

class ProportionalityWarning(UserWarning):
    """The per-cluster round counts are not integer multiples of each other."""


def _gammas(tau: Sequence[int]) -> list[Fraction]:
    if not tau or any(t <= 0 for t in tau):
        raise ValueError(f"every cluster needs at least one round, got tau={list(tau)}")
    return [Fraction(t, tau[-1]) for t in tau]


def lemma1_responses(m: int, k: int, eps, z: int, tau: Sequence[int], gamma: Sequence | None = None) -> Fraction:
    """Total responses ``2mk(1+eps) + (z-1) tau_c sum_u gamma_uc + z tau_c gamma_1c``."""
    g = [Fraction(x) for x in gamma] if gamma is not None else _gammas(tau)
    if any(x.denominator != 1 for x in g):
        warnings.warn(f"non-integer cluster ratios {[str(x) for x in g]}", ProportionalityWarning, stacklevel=2)
    tau_c = tau[-1]
    return 2 * m * k * (1 + Fraction(eps)) + (z - 1) * tau_c * sum(g) + z * tau_c * g[0]


def lemma1_rate(m: int, k: int, eps, z: int, tau: Sequence[int], gamma: Sequence | None = None) -> Fraction:
    """Download rate under proportional clusters, ``mk / lemma1_responses``."""
    return Fraction(m * k) / lemma1_responses(m, k, eps, z, tau, gamma)


def improved_scheme_rate(m: int, k: int, m_i: int, k_i: int, z: int) -> Fraction:
    """Rate of the fixed-threshold comparator; reported as is, never clamped."""
    if min(m, k, m_i, k_i, z) < 1:
        raise ValueError("all arguments must be positive")
    tasks = math.ceil(Fraction(m * k, m_i * k_i))
    return tasks * Fraction(m_i * k_i, (m_i + z) * (k_i + 1) - 1)


def rate_ratio(rho_i: Fraction, rho: Fraction) -> Fraction:
    return Fraction(rho_i) / Fraction(rho)


# --- protocol -------------------------------------------------------------

@dataclass
class RoundState:
    t: int
    plan: ClusterPlan
    points: EvalPointSet
    R: list[MatrixFq]
    S: list[MatrixFq]
    pairs: dict[int, RoundPolynomialPair] = field(default_factory=dict)
    tasks: dict[int, list[TaskShare]] = field(default_factory=dict)
    results: dict[int, list[ResultShare]] = field(default_factory=dict)
    h: dict[int, MatrixPolynomial] = field(default_factory=dict)
    shared: list[MatrixFq] | None = None
    waiting: set[int] = field(default_factory=set)


@dataclass
class RunMetrics:
    scenario: str
    seed: int
    params: dict
    N: int
    mk: int
    tau: list[int]
    epsilon: Fraction
    rho: Fraction
    rho_lemma1: Fraction | None
    lemma1_proportional: bool
    rho_I: Fraction
    sim_time: float
    decoded_ok: bool
    clusters: int
    peel_steps: int
    ge_solves: int
    interpolations: list[dict]
    rounds: list[dict]
    checks: dict

    def to_dict(self) -> dict:
        def frac(x):
            return None if x is None else {"exact": f"{x.numerator}/{x.denominator}", "value": float(x)}
        return {
            "scenario": self.scenario, "seed": self.seed, "params": self.params,
            "N": self.N, "mk": self.mk, "tau": self.tau, "c": self.clusters,
            "epsilon": frac(self.epsilon), "rho": frac(self.rho),
            "rho_lemma1": frac(self.rho_lemma1), "lemma1_proportional": self.lemma1_proportional,
            "rho_I": frac(self.rho_I),
            "rho_I_over_rho": frac(rate_ratio(self.rho_I, self.rho)),
            "sim_time": self.sim_time, "decoded_ok": self.decoded_ok,
            "peel_steps": self.peel_steps, "ge_solves": self.ge_solves,
            "interpolations": self.interpolations, "rounds": self.rounds, "checks": self.checks,
        }


@dataclass
class RunResult:
    metrics: RunMetrics
    A: MatrixFq
    B: MatrixFq
    C: MatrixFq
    rounds: dict[int, RoundState]
    trace: list[dict] | None


class Master:
    """Drives one simulated protocol run.  Deterministic given (scenario, seed)."""

    def __init__(self, scenario: Scenario, seed: int | None = None, trace: bool = False, record_shares: bool = False):
        self.sc = scenario
        self.seed = scenario.seed if seed is None else seed
        self.record_shares = record_shares
        data_ss, rand_ss, coef_ss, lat_ss = np.random.SeedSequence(self.seed).spawn(4)
        self.rand_rng = np.random.default_rng(rand_ss)
        self.coef_rng = np.random.default_rng(coef_ss)
        sc = scenario
        q = sc.q
        if sc.matrix_a is not None:
            self.A = load_matrix(sc.matrix_a, q)
            self.B = load_matrix(sc.matrix_b, q)
        else:
            data_rng = np.random.default_rng(data_ss)
            self.A = MatrixFq.random(sc.r, sc.s, q, data_rng)
            self.B = MatrixFq.random(sc.s, sc.l, q, data_rng)
        self.a_blocks, self.b_blocks, self.part = split_operands(self.A, self.B, sc.m, sc.k)
        self.decoder = PeelingDecoder(sc.m, sc.k, q)
        self.pool = WorkerPool(sc.workers, np.random.default_rng(lat_ss), trace=trace)
        self.completed = {w.id: 0 for w in sc.workers}
        self.last_duration: dict[int, float] = {}
        self.dispatched_at: dict[int, float] = {}
        self.rounds: dict[int, RoundState] = {}
        self.N = 0
        self._sys_counter = 0
        self.interp_log: list[dict] = []
        self.checks = {"shared_identity": 0, "shared_identity_failures": 0,
                       "product_checks": 0, "product_failures": 0,
                       "extra_consistency": 0}

    # plans and rounds

    def _initial_plan(self) -> ClusterPlan:
        sc = self.sc
        if sc.initial_clusters:
            return make_plan(sc.initial_clusters, sc.z, sc.max_d)
        return self._single_cluster()

    def _single_cluster(self) -> ClusterPlan:
        sc = self.sc
        members = tuple(w.id for w in sc.workers)
        d = compute_d(len(members), 1, sc.z)
        if sc.max_d:
            d = min(d, sc.max_d)
        return ClusterPlan((Cluster(members, d, quota(d, 1, sc.z)),), sc.z)

    def _estimate(self, w: int) -> float:
        now = self.pool.now
        est = self.last_duration.get(w, math.inf)
        if w in self.pool.busy and math.isfinite(est):
            est = max(est, now - self.dispatched_at[w])
        return est

    def round_state(self, t: int) -> RoundState:
        if t in self.rounds:
            return self.rounds[t]
        sc = self.sc
        if t == 1:
            plan = self._initial_plan()
        elif sc.recluster:
            plan = cluster_workers({w.id: self._estimate(w.id) for w in sc.workers}, sc.delta, sc.z, sc.max_d)
        else:
            plan = self.rounds[1].plan if 1 in self.rounds else self._initial_plan()
        points = EvalPointSet.standard(plan.d_max, sc.z, sc.n, sc.q)
        a_shape = self.a_blocks[0].shape
        b_shape = self.b_blocks[0].shape
        R = [MatrixFq.random(*a_shape, sc.q, self.rand_rng) for _ in range(sc.z)]
        S = [MatrixFq.random(*b_shape, sc.q, self.rand_rng) for _ in range(sc.z)]
        rs = RoundState(t, plan, points, R, S)
        self.rounds[t] = rs
        return rs

    def _coefficients(self, t: int, u: int, d: int) -> list[tuple[CoefVector, CoefVector]]:
        sc = self.sc
        fixed = sc.coefficients.get((t, u + 1))
        if fixed is not None:
            if len(fixed) != d:
                raise ConfigurationError(f"round {t} cluster {u + 1} needs {d} coefficient pairs, got {len(fixed)}")
            return list(fixed)
        out = []
        mk = sc.m * sc.k
        for _ in range(d):
            if t <= sc.systematic_rounds:
                idx = self._sys_counter % mk
                self._sys_counter += 1
                out.append((CoefVector.unit(sc.m, idx // sc.k), CoefVector.unit(sc.k, idx % sc.k)))
            else:
                out.append((draw_coef(sc.m, sc.soliton, self.coef_rng), draw_coef(sc.k, sc.soliton, self.coef_rng)))
        return out

    def pair(self, rs: RoundState, u: int) -> RoundPolynomialPair:
        if u not in rs.pairs:
            d = rs.plan.clusters[u].d
            coefs = self._coefficients(rs.t, u, d)
            coded_a = [encode_block(self.a_blocks, a) for a, _ in coefs]
            coded_b = [encode_block(self.b_blocks, b) for _, b in coefs]
            rs.pairs[u] = build_pair(rs.t, u + 1, d, coded_a, coded_b, rs.R, rs.S, rs.points)
        return rs.pairs[u]

    def dispatch_next(self, w: int) -> None:
        t = self.completed[w] + 1
        rs = self.round_state(t)
        u = rs.plan.cluster_of(w)
        task = eval_task(self.pair(rs, u), w)
        if self.record_shares:
            rs.tasks.setdefault(u, []).append(task)
        self.dispatched_at[w] = self.pool.now
        self.pool.dispatch(w, task, {"t": t, "u": u + 1})

    # decoding

    def on_result(self, res: ResultShare) -> None:
        rs = self.rounds[res.t]
        u = res.u - 1
        results = rs.results.setdefault(u, [])
        results.append(res)
        if u in rs.h:
            if self.sc.checks:
                self.checks["extra_consistency"] += 1
                if rs.h[u](res.x) != res.H:
                    raise CorruptionError(f"late result from worker {res.worker} is off the interpolant")
            return
        if len(results) < rs.plan.clusters[u].quota:
            return
        if u == 0:
            self._interpolate(rs, 0)
            for v in sorted(rs.waiting):
                self._interpolate(rs, v)
            rs.waiting.clear()
        elif rs.shared is None:
            rs.waiting.add(u)
        else:
            self._interpolate(rs, u)

    def _interpolate(self, rs: RoundState, u: int) -> None:
        sc = self.sc
        cl = rs.plan.clusters[u]
        z = sc.z
        alphas = rs.points.alphas
        shares = rs.results[u][: cl.quota]
        borrowed = [] if u == 0 else list(zip(alphas[:z], rs.shared))
        h = interpolate_h(shares, borrowed, cl.d, z)
        rs.h[u] = h
        pair = rs.pairs[u]
        if u == 0:
            rs.shared = extract_shared(h, z, rs.points)
        if sc.checks:
            for zeta in range(z):
                self.checks["shared_identity"] += 1
                direct = pair.f(alphas[zeta]) @ pair.g(alphas[zeta])
                if not (h(alphas[zeta]) == rs.shared[zeta] == direct == rs.R[zeta] @ rs.S[zeta]):
                    self.checks["shared_identity_failures"] += 1
        products = extract_products(h, cl.d, z, rs.points)
        for kappa, value in enumerate(products):
            ca, cb = pair.coded_a[kappa], pair.coded_b[kappa]
            if sc.checks:
                self.checks["product_checks"] += 1
                if value != ca.data @ cb.data:
                    self.checks["product_failures"] += 1
            self.decoder.push(ProductSymbol(ca.coef, cb.coef, value))
        self.interp_log.append({"t": rs.t, "u": u + 1, "time": self.pool.now, "responses_used": len(shares),
                                "shared_used": len(borrowed), "d_u": cl.d})

    # main loop

    def run(self) -> RunResult:
        sc = self.sc
        self.round_state(1)
        for w in sorted(self.completed):
            self.dispatch_next(w)
        events = 0
        while not self.decoder.complete:
            batch = self.pool.next_batch()
            for ev in batch:
                events += 1
                task: TaskShare = ev.payload
                w = ev.worker
                self.last_duration[w] = ev.time - self.dispatched_at[w]
                self.completed[w] += 1
                self.N += 1
                self.pool.log_ready(ev, {"t": task.t, "u": task.u})
                self.on_result(compute(task))
                if self.decoder.complete:
                    break
            if self.decoder.complete:
                break
            if events >= sc.max_events:
                raise RPM3Error(f"no decode after {events} responses")
            for ev in batch:
                self.dispatch_next(ev.worker)
        return self._finish()

    def _finish(self) -> RunResult:
        sc = self.sc
        C = assemble_C(self.decoder.blocks(), self.part)
        ok = C == self.A @ self.B
        if not ok:
            raise CorruptionError("decoded C differs from A @ B")
        mk = sc.m * sc.k
        measured_overhead(self.decoder)
        eps = Fraction(self.decoder.consumed, mk) - 1
        c = max(e["u"] for e in self.interp_log)
        tau = [sum(1 for e in self.interp_log if e["u"] == u) for u in range(1, c + 1)]
        rho_l1 = None
        proportional = False
        if all(tau):
            gam = _gammas(tau)
            proportional = all(g.denominator == 1 for g in gam)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ProportionalityWarning)
                rho_l1 = lemma1_rate(sc.m, sc.k, eps, sc.z, tau)
        m_i = sc.m_I or sc.m
        k_i = sc.k_I or sc.k
        rounds = [{"t": t, "clusters": rs.plan.describe()} for t, rs in sorted(self.rounds.items())]
        metrics = RunMetrics(
            scenario=sc.name, seed=self.seed,
            params={**sc.to_dict(), "delta": sc.delta, "m_I": m_i, "k_I": k_i},
            N=self.N, mk=mk, tau=tau, epsilon=eps, rho=Fraction(mk, self.N),
            rho_lemma1=rho_l1, lemma1_proportional=proportional,
            rho_I=improved_scheme_rate(sc.m, sc.k, m_i, k_i, sc.z),
            sim_time=self.pool.now, decoded_ok=ok, clusters=c,
            peel_steps=self.decoder.peel_steps, ge_solves=self.decoder.ge_solves,
            interpolations=self.interp_log, rounds=rounds, checks=dict(self.checks),
        )
        return RunResult(metrics, self.A, self.B, C, self.rounds, self.pool.trace)


def run_protocol(scenario: Scenario, seed: int | None = None, trace: bool = False, record_shares: bool = False) -> RunResult:
    return Master(scenario, seed, trace=trace, record_shares=record_shares).run()
