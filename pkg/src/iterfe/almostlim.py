"""A numerical stand-in for Banach limits on bounded sequences.

A bounded sequence is almost convergent to L when its shifted Cesaro means
(1/n) sum_{m<n} x_{k+m} tend to L uniformly in k; on such sequences every
Banach limit takes the value L.  :func:`almost_limit` returns a value only
when that criterion is met numerically on the available data and reports
``undecided`` otherwise.

Finite-data semantics: a burn-in prefix of at most ``burn_in_fraction`` of
the sequence is discarded (Banach limits are shift invariant, so prefixes do
not matter), and the Cesaro means of every window length are compared over
*all* remaining shifts.  At least ``shift_max + 1`` shifts are always
examined.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InsufficientLengthError
from .transfer import iterate_table

__all__ = [
    "AlmostLimitParams", "AlmostLimitResult", "WindowDiagnostic",
    "cesaro_table", "almost_limit", "almost_limit_rows", "almost_limit_of_iterates", "CERTIFIED",
]

CERTIFIED = ("convergent", "almost_convergent")


@dataclass(frozen=True)
class AlmostLimitParams:
    n_values: tuple[int, ...] = (64, 128, 256, 512)
    shift_max: int = 256
    tol: float = 1e-6
    m_max: int = 2048
    cap: float = 1e12
    burn_in_fraction: float = 0.25

    def __post_init__(self):
        n_values = tuple(sorted(set(int(n) for n in self.n_values)))
        object.__setattr__(self, "n_values", n_values)
        if not n_values or n_values[0] < 1:
            raise DomainError("window lengths must be positive")
        if self.shift_max < 0 or self.tol <= 0:
            raise DomainError("shift_max must be >= 0 and tol > 0")
        if n_values[-1] + self.shift_max > self.m_max:
            raise DomainError("max(n_values) + shift_max must not exceed m_max")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise DomainError("burn_in_fraction must lie in [0, 1)")

    @property
    def min_length(self) -> int:
        return self.n_values[-1] + self.shift_max


@dataclass(frozen=True)
class WindowDiagnostic:
    n: int
    value: float
    spread: float
    shifts: int


@dataclass(frozen=True)
class AlmostLimitResult:
    status: str
    value: float
    spread: float
    tol: float
    diagnostics: tuple[WindowDiagnostic, ...] = field(default=())

    @property
    def certified(self) -> bool:
        return self.status in CERTIFIED

    def to_dict(self) -> dict:
        return {
            "status": self.status, "value": self.value, "spread": self.spread,
            "tol": self.tol,
            "windows": [vars(d) for d in self.diagnostics],
        }


def cesaro_table(seq, params: AlmostLimitParams, offset: int = 0) -> dict[int, np.ndarray]:
    """C(n, offset + k) = (1/n) sum_{m<n} seq[offset + k + m] for k = 0..shift_max."""
    s = np.asarray(seq, dtype=float)
    need = offset + params.min_length
    if len(s) < need:
        raise InsufficientLengthError(f"sequence of length {len(s)} needs at least {need} terms")
    K = params.shift_max
    out = {}
    for n in params.n_values:
        window = np.lib.stride_tricks.sliding_window_view(s[offset:offset + K + n], n)
        out[n] = window.mean(axis=1)
    return out


def almost_limit(seq, params: AlmostLimitParams = AlmostLimitParams(),
                 half_width=None) -> AlmostLimitResult:
    """Certify (or refuse to certify) the almost-limit of a finite sequence.

    ``half_width`` (scalar or per-term array) inflates the tolerance to
    ``tol + max(half_width)`` for statistically estimated sequences.
    """
    hw = None if half_width is None else np.asarray(half_width, dtype=float).reshape(1, -1)
    return almost_limit_rows(np.asarray(seq, dtype=float).reshape(1, -1), params, hw)[0]


def almost_limit_rows(rows, params: AlmostLimitParams = AlmostLimitParams(),
                      half_width=None) -> list[AlmostLimitResult]:
    """:func:`almost_limit` applied to every row of a 2-D array at once.

    ``half_width`` is a scalar or a 2-D array whose row maxima inflate each row's tolerance.
    """
    s = np.asarray(rows, dtype=float)
    if s.ndim != 2:
        raise DomainError("rows must be a 2-D array")
    R, length = s.shape
    if length < params.min_length:
        raise InsufficientLengthError(
            f"sequence of length {length} needs at least {params.min_length} terms")
    tol = np.full(R, params.tol)
    if half_width is not None:
        hw = np.asarray(half_width, dtype=float)
        tol = tol + (hw.reshape(R, -1).max(axis=1) if hw.ndim == 2 else float(hw))
    bad = ~np.all(np.isfinite(s), axis=1)
    bad[~bad] = np.max(np.abs(s[~bad]), axis=1) > params.cap
    s = np.where(bad[:, None], 0.0, s)

    burn = min(int(length * params.burn_in_fraction), length - params.min_length)
    ref = s[:, burn]
    ptp = np.ptp(s[:, burn:], axis=1)
    # a constant tail makes every window mean equal to it; scan only the rest
    live = np.flatnonzero(ptp > 0)
    sl = s[live]
    # sums of deviations from a reference keep nearly constant tails accurate
    dev = np.concatenate([np.zeros((len(live), 1)), np.cumsum(sl - ref[live, None], axis=1)], axis=1)
    values, spreads, counts = [], [], []
    for n in params.n_values:
        val, spr = ref.copy(), np.zeros(R)
        means = dev[:, burn + n:] - dev[:, burn:length - n + 1]
        means /= n
        first = means[:, 0].copy()
        means -= first[:, None]
        spr[live] = np.max(np.abs(means), axis=1) if len(live) else 0.0
        val[live] += first
        values.append(val)
        spreads.append(spr)
        counts.append(length - n + 1 - burn)

    out = []
    for r in range(R):
        t = float(tol[r])
        if bad[r]:
            out.append(AlmostLimitResult("unbounded", float("nan"), float("inf"), t))
            continue
        diags = tuple(WindowDiagnostic(n, float(values[i][r]), float(spreads[i][r]), counts[i])
                      for i, n in enumerate(params.n_values))
        top = diags[-1]
        gap = abs(top.value - diags[-2].value) if len(diags) > 1 else 0.0
        if top.spread <= t and gap <= t:
            status = "convergent" if ptp[r] <= t else "almost_convergent"
            out.append(AlmostLimitResult(status, top.value, top.spread, t, diags))
        else:
            out.append(AlmostLimitResult("undecided", float("nan"), max(top.spread, gap), t, diags))
    return out


def almost_limit_of_iterates(sys, h, x: float, params: AlmostLimitParams = AlmostLimitParams(),
                             method: str = "auto", **iterate_kw) -> AlmostLimitResult:
    """Surrogate Banach limit of (T^m h(x))_{m=0..m_max}."""
    table = iterate_table(sys, h, [x], params.m_max, method, **iterate_kw)
    return almost_limit(table.values[0], params, table.half_width[0])
