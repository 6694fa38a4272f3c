"""ELECTRE III outranking core: pseudo-criterion thresholds, concordance,
discordance, credibility, and ranked tiers with ties.

Criterion values are stored in maximize convention (larger is better); the
service-selection entry point `select` takes minimize-convention rows and
negates them, so all indices below follow the classical maximize-form
definitions. Thresholds are computed over value magnitudes so they stay
positive after negation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

DEFAULT_DISCRIMINATION = 0.15

DEFAULT_Q_PERCENTILE = 10.0
DEFAULT_P_PERCENTILE = 20.0
DEFAULT_V_PERCENTILE = 100.0
DEFAULT_Q_DIVISOR = 3.0


class ElectreError(ValueError):
    pass


@dataclass(frozen=True)
class DecisionMatrix:
    """Alternatives scored on K criteria (maximize convention) with weights."""

    alternatives: tuple[int, ...]
    values: tuple[tuple[float, ...], ...]  # K rows x len(alternatives)
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        k = len(self.values)
        if len(self.weights) != k:
            raise ElectreError("one weight per criterion required")
        if any(w <= 0 for w in self.weights):
            raise ElectreError("weights must be positive")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ElectreError("weights must sum to 1")
        for row in self.values:
            if len(row) != len(self.alternatives):
                raise ElectreError("every alternative needs a value on every criterion")


@dataclass(frozen=True)
class Thresholds:
    """Per-criterion indifference (q), preference (p) and veto (v) bands."""

    indifference: tuple[float, ...]
    preference: tuple[float, ...]
    veto: tuple[float, ...]

    def __post_init__(self) -> None:
        for q, p, v in zip(self.indifference, self.preference, self.veto):
            if q < 0 or p < q or v < p:
                raise ElectreError("thresholds must satisfy 0 <= q <= p <= v")


def percentile(values: list[float], pct: float) -> float:
    """Linear-interpolation percentile: rank = pct/100 * (n-1) on sorted values."""
    if not values:
        raise ElectreError("percentile of empty list")
    ordered = sorted(values)
    if len(ordered) == 1:
        return ordered[0]
    rank = pct / 100.0 * (len(ordered) - 1)
    lo = math.floor(rank)
    hi = math.ceil(rank)
    if lo == hi:
        return ordered[lo]
    return ordered[lo] + (rank - lo) * (ordered[hi] - ordered[lo])


def compute_thresholds(
    matrix: DecisionMatrix,
    q_percentile: float = DEFAULT_Q_PERCENTILE,
    p_percentile: float = DEFAULT_P_PERCENTILE,
    v_percentile: float = DEFAULT_V_PERCENTILE,
    q_divisor: float = DEFAULT_Q_DIVISOR,
) -> Thresholds:
    """Per-criterion thresholds from percentiles of the value magnitudes,
    recomputed for the candidates of each decision epoch."""
    if len(matrix.alternatives) < 2:
        raise ElectreError("thresholds need at least 2 alternatives")
    qs, ps, vs = [], [], []
    for row in matrix.values:
        magnitudes = [abs(x) for x in row]
        q = percentile(magnitudes, q_percentile) / q_divisor
        p = percentile(magnitudes, p_percentile)
        v = percentile(magnitudes, v_percentile)
        if p < q:
            p = q
        if v < p:
            v = p
        qs.append(q)
        ps.append(p)
        vs.append(v)
    return Thresholds(tuple(qs), tuple(ps), tuple(vs))


def concordance_index(g_a: float, g_b: float, q: float, p: float) -> float:
    """Per-criterion support for "a at least as good as b" (maximize form)."""
    if g_b <= g_a + q:
        return 1.0
    if g_b >= g_a + p:
        return 0.0
    return (g_a - g_b + p) / (p - q)


def discordance_index(g_a: float, g_b: float, p: float, v: float) -> float:
    """Per-criterion opposition to "a at least as good as b" (maximize form)."""
    if g_b <= g_a + p:
        return 0.0
    if g_b > g_a + v:
        return 1.0
    return (g_b - g_a - p) / (v - p)


def credibility(
    matrix: DecisionMatrix, thresholds: Thresholds
) -> tuple[list[list[float]], list[list[float]]]:
    """Concordance and credibility matrices for all ordered pairs.

    sigma(aSb) = c(aSb) * prod over criteria with d_i > c of (1-d_i)/(1-c);
    diagonal entries are 1 by convention.
    """
    n = len(matrix.alternatives)
    values = matrix.values
    weights = matrix.weights
    qs, ps, vs = thresholds.indifference, thresholds.preference, thresholds.veto
    k = len(values)
    conc = [[1.0] * n for _ in range(n)]
    sigma = [[1.0] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            c = 0.0
            for i in range(k):
                c += weights[i] * concordance_index(values[i][a], values[i][b], qs[i], ps[i])
            conc[a][b] = c
            s = c
            if c < 1.0:
                for i in range(k):
                    d = discordance_index(values[i][a], values[i][b], ps[i], vs[i])
                    if d > c:
                        s *= (1.0 - d) / (1.0 - c)
            sigma[a][b] = s
    return conc, sigma


def rank(
    sigma: list[list[float]],
    alternatives: tuple[int, ...],
    discrimination: float = DEFAULT_DISCRIMINATION,
) -> list[list[int]]:
    """Iterative qualification distillation into best-first tiers.

    Each step cuts at (max remaining off-diagonal sigma - discrimination),
    declares a strictly-above b when sigma(aSb) clears the cut while
    sigma(bSa) does not, and peels off the alternatives with the highest
    net qualification. Ties stay together in one tier.
    """
    if not alternatives:
        raise ElectreError("rank needs at least one alternative")
    remaining = list(range(len(alternatives)))
    tiers: list[list[int]] = []
    while remaining:
        if len(remaining) == 1:
            tiers.append([alternatives[remaining[0]]])
            break
        cut = max(sigma[a][b] for a in remaining for b in remaining if a != b) - discrimination
        qualification = {a: 0 for a in remaining}
        for a in remaining:
            for b in remaining:
                if a == b:
                    continue
                if sigma[a][b] >= cut and sigma[b][a] < cut:
                    qualification[a] += 1
                    qualification[b] -= 1
        best = max(qualification.values())
        tier = [a for a in remaining if qualification[a] == best]
        tiers.append(sorted(alternatives[a] for a in tier))
        remaining = [a for a in remaining if qualification[a] != best]
    return tiers


@dataclass
class SelectionDecision:
    """Full trace of one service-selection decision (for dumps and audits)."""

    candidates: tuple[int, ...]
    criteria: tuple[tuple[float, ...], ...]  # minimize convention, K x n
    thresholds: Thresholds
    concordance: list[list[float]]
    credibility: list[list[float]]
    tiers: list[list[int]]
    chosen: int
    tie: bool

    def to_dict(self) -> dict:
        return {
            "candidates": list(self.candidates),
            "criteria": [list(row) for row in self.criteria],
            "thresholds": {
                "q": list(self.thresholds.indifference),
                "p": list(self.thresholds.preference),
                "v": list(self.thresholds.veto),
            },
            "concordance": self.concordance,
            "credibility": self.credibility,
            "tiers": self.tiers,
            "chosen": self.chosen,
            "tie": self.tie,
        }


def select_detailed(
    candidates: list[int] | tuple[int, ...],
    criteria: list[list[float]] | tuple[tuple[float, ...], ...],
    weights: tuple[float, ...],
    tie_keys: dict[int, tuple],
    thresholds: Thresholds | None = None,
    discrimination: float = DEFAULT_DISCRIMINATION,
    q_percentile: float = DEFAULT_Q_PERCENTILE,
    p_percentile: float = DEFAULT_P_PERCENTILE,
    v_percentile: float = DEFAULT_V_PERCENTILE,
    q_divisor: float = DEFAULT_Q_DIVISOR,
) -> SelectionDecision:
    """Rank candidates on minimize-convention criteria rows and pick the top
    tier's nearest member (tie_keys orders by hop count, then propagation
    delay, then node id)."""
    if not candidates:
        raise ElectreError("no candidates to select from")
    cands = tuple(candidates)
    rows = tuple(tuple(row) for row in criteria)
    if len(cands) == 1:
        only = cands[0]
        return SelectionDecision(
            candidates=cands,
            criteria=rows,
            thresholds=Thresholds((0.0,) * len(rows), (0.0,) * len(rows), (0.0,) * len(rows)),
            concordance=[[1.0]],
            credibility=[[1.0]],
            tiers=[[only]],
            chosen=only,
            tie=False,
        )
    matrix = DecisionMatrix(
        alternatives=cands,
        values=tuple(tuple(-x for x in row) for row in rows),
        weights=weights,
    )
    if thresholds is None:
        thresholds = compute_thresholds(matrix, q_percentile, p_percentile, v_percentile, q_divisor)
    conc, sigma = credibility(matrix, thresholds)
    tiers = rank(sigma, cands, discrimination)
    top = tiers[0]
    chosen = min(top, key=lambda nid: tie_keys[nid] + (nid,))
    return SelectionDecision(
        candidates=cands,
        criteria=rows,
        thresholds=thresholds,
        concordance=conc,
        credibility=sigma,
        tiers=tiers,
        chosen=chosen,
        tie=len(top) > 1,
    )


def select(
    candidates: list[int] | tuple[int, ...],
    criteria: list[list[float]] | tuple[tuple[float, ...], ...],
    weights: tuple[float, ...],
    tie_keys: dict[int, tuple],
    thresholds: Thresholds | None = None,
    discrimination: float = DEFAULT_DISCRIMINATION,
) -> int:
    return select_detailed(candidates, criteria, weights, tie_keys, thresholds, discrimination).chosen
