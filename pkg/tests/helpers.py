"""Independent oracles used across the test modules.

Everything here recomputes what the package computes, by a different route:
set membership by exhaustive enumeration, moments by adaptive quadrature, and
the order-1 integral terms by an event walk over raw gap-level data that never
uses the package's lookahead bookkeeping or aggregation identities.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import integrate

from levystep import LinearCoefficients, Multiindex, Region, in_hierarchical_set
from levystep.path import IntervalSlice, SliceJump
from levystep.schemes import I32Compensator


# -- brute-force index sets ---------------------------------------------------

def all_words(max_len: int):
    for length in range(max_len + 1):
        for digits in itertools.product(range(4), repeat=length):
            yield Multiindex(digits)


def brute_hierarchical(gamma, max_len: int) -> set[Multiindex]:
    return {a for a in all_words(max_len) if in_hierarchical_set(a, gamma)}


def brute_remainder(members: set[Multiindex], max_len: int) -> set[Multiindex]:
    return {a for a in all_words(max_len + 1)
            if a not in members and not a.is_empty and a.drop_first() in members}


# -- quadrature moments -------------------------------------------------------

def quad_power_law_moment(c: float, a: float, amp, power: int,
                          lo: float, hi: float) -> float:
    """integral over lo < |x| < hi of amp(x)**power c|x|^(-1-a) dx."""
    def f(x, sign):
        return amp(sign * x) ** power * c * x ** (-1.0 - a)
    pos, _ = integrate.quad(f, lo, hi, args=(1.0,), epsrel=1e-11, limit=300)
    neg, _ = integrate.quad(f, lo, hi, args=(-1.0,), epsrel=1e-11, limit=300)
    return pos + neg


# -- synthetic slices ---------------------------------------------------------

class RawSlice:
    """Gap-level description of one interval: event times ev[0..n], per-gap
    Wiener increments and local time integrals, jumps at the interior events.
    The slice aggregates are derived exactly as the production code defines
    them; the walker below uses only the raw arrays."""

    def __init__(self, left, delta, jump_data, dws, zlocs, w_left):
        # jump_data: sequence of (fraction in (0,1), mark, region), sorted
        self.left = left
        self.delta = delta
        self.jump_data = list(jump_data)
        self.dws = list(dws)
        self.zlocs = list(zlocs)
        self.times = [left + f * delta for f, _, _ in jump_data]
        self.ev = [left] + self.times + [left + delta]
        self.w = [w_left]
        for d in dws:
            self.w.append(self.w[-1] + d)

    def to_slice(self) -> IntervalSlice:
        dw_tot = sum(self.dws)
        dz = sum((self.w[j] - self.w[0]) * (self.ev[j + 1] - self.ev[j]) + self.zlocs[j]
                 for j in range(len(self.dws)))
        right, w_right = self.ev[-1], self.w[-1]
        nxt_s, nxt_t = (right, w_right), (right, w_right)
        out = []
        for i in range(len(self.times) - 1, -1, -1):
            _, mark, reg = self.jump_data[i]
            t, wj = self.times[i], self.w[i + 1]
            out.append(SliceJump(time=t, mark=mark, region=reg, w_value=wj,
                                 next_small_time=nxt_s[0], next_tail_time=nxt_t[0],
                                 w_next_small=nxt_s[1], w_next_tail=nxt_t[1]))
            if reg is Region.SMALL:
                nxt_s = (t, wj)
            else:
                nxt_t = (t, wj)
        out.reverse()
        return IntervalSlice(left=self.left, right=right, delta=self.delta,
                             delta_w=dw_tot, delta_z=dz, w_left=self.w[0],
                             jumps=tuple(out))


def random_raw_slice(rng: np.random.Generator, max_jumps: int = 6) -> RawSlice:
    k = int(rng.integers(0, max_jumps + 1))
    fracs = np.sort(rng.random(k))
    regions = [Region.SMALL if rng.random() < 0.5 else Region.TAIL for _ in range(k)]
    marks = [float(rng.uniform(-0.9, 0.9)) if r is Region.SMALL
             else float(rng.uniform(1.0, 3.0)) * (1.0 if rng.random() < 0.5 else -1.0)
             for r in regions]
    n_g = k + 1
    return RawSlice(left=float(rng.uniform(0.0, 2.0)),
                    delta=float(rng.uniform(0.05, 1.0)),
                    jump_data=list(zip(fracs, marks, regions)),
                    dws=list(rng.normal(0.0, 0.3, n_g)),
                    zlocs=list(rng.normal(0.0, 0.05, n_g)),
                    w_left=float(rng.normal()))


# -- event-walk evaluation of the thirteen order-1 terms ----------------------

def walk_terms(y: float, raw: RawSlice, coef: LinearCoefficients,
               i32_variant: I32Compensator = I32Compensator.TAIL_RUNNING_SUM) -> dict:
    """Evaluate every integral by walking the ordered event sequence.

    Piecewise-constant integrands are integrated gap by gap against time or
    the per-gap Wiener increments; inner compensated integrals are evaluated
    at each outer jump; the time-against-Wiener integral uses per-gap
    integration by parts with the raw local time integrals.
    """
    b, s = coef.drift, coef.diffusion
    F, G, m1 = coef.small_jump, coef.tail_jump, coef.p_integral
    tau, delta = raw.left, raw.delta
    ev, w, dws, zlocs = raw.ev, raw.w, raw.dws, raw.zlocs
    jumps = raw.jump_data
    n_g = len(dws)

    # running sums *after* event i (event i = i-th jump for 1 <= i <= K)
    jp = [0.0] * (n_g + 1)
    jq = [0.0] * (n_g + 1)
    jq_small = [0.0] * (n_g + 1)
    for i in range(1, n_g + 1):
        jp[i], jq[i], jq_small[i] = jp[i - 1], jq[i - 1], jq_small[i - 1]
        if i <= len(jumps):
            _, mark, reg = jumps[i - 1]
            if reg is Region.SMALL:
                jp[i] += coef.p(mark)
                jq_small[i] += coef.q(mark)
            else:
                jq[i] += coef.q(mark)

    h = [ev[i + 1] - ev[i] for i in range(n_g)]
    dw_tot = sum(dws)
    # integral of (s - tau) dW: per-gap parts, (s-t_i) dW over a gap = h dw - zloc
    int_s_dw = sum((ev[i] - tau) * dws[i] + h[i] * dws[i] - zlocs[i] for i in range(n_g))
    dz = sum((w[i] - w[0]) * h[i] + zlocs[i] for i in range(n_g))
    int_jp_ds = sum(jp[i] * h[i] for i in range(n_g))
    int_jq_ds = sum(jq[i] * h[i] for i in range(n_g))
    int_jqs_ds = sum(jq_small[i] * h[i] for i in range(n_g))
    int_jp_dw = sum(jp[i] * dws[i] for i in range(n_g))
    int_jq_dw = sum(jq[i] * dws[i] for i in range(n_g))

    sum_p = sum(coef.p(m) for _, m, r in jumps if r is Region.SMALL)
    sum_q = sum(coef.q(m) for _, m, r in jumps if r is Region.TAIL)
    sum_p_w = sum(coef.p(m) * (w[i + 1] - w[0])
                  for i, (_, m, r) in enumerate(jumps) if r is Region.SMALL)
    sum_q_w = sum(coef.q(m) * (w[i + 1] - w[0])
                  for i, (_, m, r) in enumerate(jumps) if r is Region.TAIL)

    i22 = i33 = i32_lead = i23 = 0.0
    for i, (_, m, r) in enumerate(jumps):
        t = raw.times[i]
        if r is Region.SMALL:
            i22 += coef.p(m) * (jp[i] - m1 * (t - tau))
            i32_lead += jq[i] * coef.p(m)
        else:
            i33 += jq[i] * coef.q(m)
            i23 += coef.q(m) * (jp[i] - m1 * (t - tau))

    i32_comp = int_jq_ds if i32_variant is I32Compensator.TAIL_RUNNING_SUM else int_jqs_ds
    return {
        "0": b * y * delta,
        "1": s * y * dw_tot,
        "2": F * y * (sum_p - delta * m1),
        "3": G * y * sum_q,
        "11": 0.5 * s * s * y * (dw_tot * dw_tot - delta),
        "12": F * s * y * (sum_p_w - m1 * dz),
        "13": G * s * y * sum_q_w,
        "21": F * s * y * (int_jp_dw - m1 * int_s_dw),
        "31": G * s * y * int_jq_dw,
        "22": F * F * y * (i22 - m1 * (int_jp_ds - 0.5 * m1 * delta * delta)),
        "23": F * G * y * i23,
        "32": F * G * y * (i32_lead - m1 * i32_comp),
        "33": G * G * y * i33,
    }


def assert_term_match(got: dict, want: dict, tol: float = 1e-12) -> None:
    for key, expect in want.items():
        scale = max(1.0, abs(expect))
        assert abs(got[key] - expect) <= tol * scale, \
            f"term {key}: got {got[key]!r}, walk value {expect!r}"
