"""Closed-form diversity-multiplexing tradeoff bounds for the relay protocol.

All curves are piecewise linear in the multiplexing gain r on [0, 1]; (x)+
means max(x, 0) exactly. ``d_lower`` is the composite bound: the better of
no-cooperation (1 - r) and the rate-corrected transmit-diversity curve, with
the branch switch at r = R^2/((R+1)^2 - R).
"""

from __future__ import annotations

import csv
import io


def _check_r(r: float) -> float:
    r = float(r)
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"multiplexing gain must be in [0, 1], got {r}")
    return r


def d_naf(r: float, n_relays: int) -> float:
    """Non-orthogonal amplify-and-forward bound R(1-2r)+ + (1-r)+."""
    r = _check_r(r)
    return n_relays * max(1.0 - 2.0 * r, 0.0) + max(1.0 - r, 0.0)


def d_star(r: float, n_relays: int) -> float:
    """Transmit diversity bound (R+1)(1-r) of the two-product channel."""
    r = _check_r(r)
    return (n_relays + 1) * (1.0 - r)


def d_code(r: float, n_relays: int) -> float:
    """Rate-corrected bound d*(r/R_stc) = (R+1)(1 - r(R+1)/R)+.

    The space-time code occupies T1 of T1+T2 uses; with T2 = R*T1/1 the
    code rate R_stc = R/(R+1) stretches the curve, zeroing at r = R/(R+1).
    """
    r = _check_r(r)
    return (n_relays + 1) * max(1.0 - r * (n_relays + 1) / n_relays, 0.0)


def d_lower(r: float, n_relays: int) -> float:
    """Composite lower bound max(1 - r, d_code(r))."""
    return max(1.0 - _check_r(r), d_code(r, n_relays))


def lower_branch(r: float, n_relays: int) -> str:
    """Which branch of the composite bound is active ('code' or 'no_coop')."""
    return "code" if d_code(r, n_relays) >= 1.0 - _check_r(r) else "no_coop"


def crossover(n_relays: int) -> float:
    """Multiplexing gain where no-cooperation overtakes the coded bound."""
    if n_relays < 1:
        raise ValueError("need at least one relay")
    return n_relays ** 2 / ((n_relays + 1) ** 2 - n_relays)


def emit_curves(n_relays: int, n_samples: int) -> str:
    """CSV of all bounds on a uniform r-grid over [0, 1]."""
    if n_samples < 2:
        raise ValueError("need at least two samples")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "d_naf", "d_star", "d_code", "d_lower", "no_coop"])
    for i in range(n_samples):
        r = i / (n_samples - 1)
        w.writerow([f"{r:.10g}",
                    f"{d_naf(r, n_relays):.10g}",
                    f"{d_star(r, n_relays):.10g}",
                    f"{d_code(r, n_relays):.10g}",
                    f"{d_lower(r, n_relays):.10g}",
                    f"{1.0 - r:.10g}"])
    return buf.getvalue()
