"""Executable checks of double-sided z-privacy, one round at a time.

Two independent checks:

* :func:`recover_randomness` -- given the data, any z shares of a round pin
  down the round's random matrices exactly.  Since those matrices are
  uniform and independent of the data, the shares are uniform too.
* :func:`uniformity_audit` -- on a toy field, enumerate every input and every
  random draw and compare the colluders' share distributions directly.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from rpm3.errors import ConfigurationError, InvalidEvaluationSetError, NeedMoreSymbols, RPM3Error
from rpm3.fountain import CodedBlock, solve_system
from rpm3.gf import PrimeField
from rpm3.lagrange import EvalPointSet, TaskShare
from rpm3.master import RunResult, compute_d
from rpm3.matgf import MatrixFq, linear_combination

MAX_ENUMERATION = 5_000_000


@dataclass(frozen=True)
class CollusionView:
    t: int
    u: int
    shares: tuple[TaskShare, ...]

    def __post_init__(self):
        xs = [s.x for s in self.shares]
        if len(set(xs)) != len(xs):
            raise InvalidEvaluationSetError("colluding shares must come from distinct points")
        if any(s.t != self.t or s.u != self.u for s in self.shares):
            raise ValueError("all shares of a view must belong to one round and cluster")

    @property
    def workers(self) -> tuple[int, ...]:
        return tuple(s.worker for s in self.shares)


def _solve_side(xs, values, data, z, nodes, field_: PrimeField) -> list[MatrixFq]:
    rows, rhs = [], []
    for x, v in zip(xs, values):
        w = field_.basis_weights(nodes, x)
        known = linear_combination(w[z:], data) if data else None
        rows.append(w[:z])
        rhs.append(v - known if known is not None else v)
    try:
        sol = solve_system(rows, rhs, z, field_.q)
    except NeedMoreSymbols:
        raise RPM3Error("randomness system is singular; evaluation points are misconfigured") from None
    # with more than z shares the system is over-determined; all must agree
    for row, r in zip(rows, rhs):
        if linear_combination(row, sol) != r:
            raise InvalidEvaluationSetError("shares disagree on the recovered randomness")
    return sol


def recover_randomness(view: CollusionView, coded_a: Sequence[CodedBlock], coded_b: Sequence[CodedBlock],
                       points: EvalPointSet, z: int) -> tuple[list[MatrixFq], list[MatrixFq]]:
    """Solve for ``R_1..R_z`` and ``S_1..S_z`` from ``>= z`` shares and the data.

    Subtract the data part of each share, then solve the z x z Lagrange
    system.  That system is a scaled Cauchy matrix, so it is invertible
    whenever the betas avoid the alphas.
    """
    if len(view.shares) < z:
        raise ValueError(f"need at least z={z} shares, got {len(view.shares)}")
    d = len(coded_a)
    nodes = points.alphas[: d + z]
    f = points.field
    xs = [s.x for s in view.shares]
    R = _solve_side(xs, [s.F for s in view.shares], [c.data for c in coded_a], z, nodes, f)
    S = _solve_side(xs, [s.G for s in view.shares], [c.data for c in coded_b], z, nodes, f)
    return R, S


@dataclass
class RecoveryReport:
    checked: int = 0
    failures: list[dict] = field(default_factory=list)
    subsets: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.checked > 0 and not self.failures


def audit_run(result: RunResult, z: int, keep_subsets: bool = True) -> RecoveryReport:
    """Try every z-subset of every cluster's shares in every round of a run.

    ``result`` must come from ``run_protocol(..., record_shares=True)``.
    """
    report = RecoveryReport()
    for t, rs in sorted(result.rounds.items()):
        for u, tasks in sorted(rs.tasks.items()):
            pair = rs.pairs[u]
            for subset in itertools.combinations(tasks, z):
                view = CollusionView(t, u + 1, tuple(subset))
                try:
                    R, S = recover_randomness(view, pair.coded_a, pair.coded_b, rs.points, z)
                    ok = R == rs.R and S == rs.S
                except RPM3Error as exc:
                    ok = False
                    report.failures.append({"t": t, "u": u + 1, "workers": list(view.workers), "error": str(exc)})
                else:
                    if not ok:
                        report.failures.append({"t": t, "u": u + 1, "workers": list(view.workers), "error": "mismatch"})
                report.checked += 1
                if keep_subsets:
                    report.subsets.append({"t": t, "u": u + 1, "workers": list(view.workers), "recovered": ok})
    return report


@dataclass
class AuditReport:
    q: int
    z: int
    n: int
    d: int
    alphas: list[int]
    candidate_betas: list[int]
    subsets: int
    max_tv: Fraction
    leak: bool

    def to_dict(self) -> dict:
        return {"q": self.q, "z": self.z, "n": self.n, "d": self.d, "alphas": self.alphas,
                "candidate_betas": self.candidate_betas, "subsets": self.subsets,
                "max_tv": {"exact": f"{self.max_tv.numerator}/{self.max_tv.denominator}", "value": float(self.max_tv)},
                "leak": self.leak}


def total_variation(p: Counter, p2: Counter) -> Fraction:
    tot1, tot2 = sum(p.values()), sum(p2.values())
    keys = set(p) | set(p2)
    return sum((abs(Fraction(p[k], tot1) - Fraction(p2[k], tot2)) for k in keys), Fraction(0)) / 2


def uniformity_audit(q: int, z: int, n: int, leak: bool = False) -> AuditReport:
    """Exact share-distribution audit for scalar A, B with m = k = 1.

    The polynomial carries ``d = compute_d(n, 1, z)`` copies of A (resp. B).
    Colluding sets range over every z-subset of the field points outside the
    alphas, which covers every admissible choice of betas.  For each subset
    and each input pair, the joint distribution of the z (F, G) shares over
    all ``q**(2z)`` random draws is tabulated; the result is the largest
    total-variation distance between two inputs.  ``leak=True`` pins R_1 to
    zero as a sensitivity control.
    """
    fq = PrimeField(q)
    d = compute_d(n, 1, z)
    nodes = list(range(d + z))
    if d + z >= q:
        raise ConfigurationError(f"F_{q} has no room for {d + z} alphas plus a beta")
    candidates = [x for x in range(q) if x not in nodes]
    if len(candidates) < z:
        raise ConfigurationError(f"only {len(candidates)} admissible betas for z={z}")
    subsets = list(itertools.combinations(candidates, z))
    work = len(subsets) * q**2 * q ** (2 * z)
    if work > MAX_ENUMERATION:
        raise ConfigurationError(f"audit needs {work} evaluations, refusing (limit {MAX_ENUMERATION})")

    draws = list(itertools.product(range(q), repeat=z))
    if leak:
        draws_r = [(0,) + r[1:] for r in draws]
    else:
        draws_r = draws
    max_tv = Fraction(0)
    for betas in subsets:
        weights = [fq.basis_weights(nodes, b) for b in betas]
        rand_w = [w[:z] for w in weights]
        data_w = [sum(w[z:]) % q for w in weights]

        def share(secret, rand):
            return tuple((sum(a * b for a, b in zip(rw, rand)) + dw * secret) % q for rw, dw in zip(rand_w, data_w))

        dists = []
        for a_val, b_val in itertools.product(range(q), repeat=2):
            f_vals = [share(a_val, r) for r in draws_r]
            g_vals = [share(b_val, s) for s in draws]
            dists.append(Counter((fv, gv) for fv in f_vals for gv in g_vals))
        for p1, p2 in itertools.combinations(dists, 2):
            tv = total_variation(p1, p2)
            if tv > max_tv:
                max_tv = tv
    return AuditReport(q, z, n, d, nodes, candidates, len(subsets), max_tv, leak)
