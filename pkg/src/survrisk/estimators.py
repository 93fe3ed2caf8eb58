"""Nonparametric survival estimators and the two-group log-rank statistic.

All three routines take right-censored samples as parallel arrays:
``times`` (positive observation times) and ``events`` (1 = event observed,
0 = censored).
"""

from __future__ import annotations

import numpy as np

from .stepfun import StepFunction


def _event_table(times, events):
    """Distinct observation times with event and at-risk counts, ascending."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=np.int64)
    if times.size == 0:
        raise ValueError("empty input")
    if times.shape != events.shape:
        raise ValueError("times and events must have equal length")
    order = np.argsort(times, kind="stable")
    t = times[order]
    e = events[order]
    distinct, first = np.unique(t, return_index=True)
    d = np.add.reduceat(e, first)
    n_at_risk = t.size - first
    return distinct, d, n_at_risk


def kaplan_meier(times, events) -> StepFunction:
    """Product-limit survival estimate over the distinct event times.

    Censored-only input yields the constant function 1.
    """
    distinct, d, n = _event_table(times, events)
    has_event = d > 0
    grid = distinct[has_event]
    factors = 1.0 - d[has_event] / n[has_event]
    return StepFunction(grid, np.cumprod(factors), initial=1.0)


def nelson_aalen(times, events) -> StepFunction:
    """Cumulative hazard estimate: sum of d/n over event times."""
    distinct, d, n = _event_table(times, events)
    has_event = d > 0
    grid = distinct[has_event]
    increments = d[has_event] / n[has_event]
    return StepFunction(grid, np.cumsum(increments), initial=0.0)


def logrank_statistic(times, events, group) -> float:
    """Chi-square-form log-rank statistic comparing two groups.

    ``group`` flags the left-group members.  At each distinct event time the
    observed-minus-expected left-group event count and its hypergeometric
    variance are accumulated; the statistic is ``(sum(O-E))^2 / sum(V)``,
    or 0 when the total variance is 0.
    """
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=np.int64)
    group = np.asarray(group, dtype=bool)
    if not (group.any() and (~group).any()):
        raise ValueError("degenerate grouping: both groups must be nonempty")

    order = np.argsort(times, kind="stable")
    t = times[order]
    e = events[order]
    g = group[order].astype(np.int64)

    _, first = np.unique(t, return_index=True)
    d = np.add.reduceat(e, first)
    d_left = np.add.reduceat(e * g, first)
    n = t.size - first
    # left-group at-risk = total left members minus those with earlier times
    cum_g = np.concatenate([[0], np.cumsum(g)])
    n_left = g.sum() - cum_g[first]

    mask = (d > 0) & (n > 0)
    d, d_left, n, n_left = d[mask], d_left[mask], n[mask], n_left[mask]
    frac = n_left / n
    o_minus_e = float(np.sum(d_left - d * frac))
    with np.errstate(divide="ignore", invalid="ignore"):
        var_terms = np.where(n > 1, d * frac * (1.0 - frac) * (n - d) / (n - 1), 0.0)
    variance = float(np.sum(var_terms))
    if variance <= 0.0:
        return 0.0
    return o_minus_e * o_minus_e / variance
