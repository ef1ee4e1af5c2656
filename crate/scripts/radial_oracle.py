#!/usr/bin/env python3
"""Reference values for the radial model profiles, computed independently
with mpmath and frozen into crates/beltrami-lab/tests/data/radial_oracle.json.

The Rust code evaluates the same profiles with f64 arithmetic and adaptive
Simpson quadrature; this script uses 40-digit arithmetic and tanh-sinh
quadrature so that any agreement is evidence, not tautology.

Profiles, written in the log coordinate t = log(1/r):

  g_eps(p, eps):   L = t + log(1 + e^(1-t)),  M = log L
                   log phi = -(p/2) log(L/L0) - (eps/2) log(M/M0)
                   ratio   = r phi' / phi = (p M + eps) / (2 L M (1 + e^(1-t)))

  alpha_sharp(a):  gamma = 1 - 1/a
                   log phi = (2/gamma) (L0^gamma - L^gamma)
                   ratio   = 2 L^(gamma-1) / (1 + e^(1-t))

Both are normalized so phi(1) = 1. The map is f = (z/|z|) phi(|z|), so
|df| = (phi/r)(1+ratio)/2, |dbar f| = (phi/r)|1-ratio|/2, |Df| = (phi/r)
max(1, ratio), J = ratio (phi/r)^2, |mu| = |1-ratio|/(1+ratio) and the area
element is 2 pi e^(-2t) dt.

Run from the repository root:  python3 scripts/radial_oracle.py
"""

import json
import os

from mpmath import mp, mpf, exp, log, log1p, pi, quad

mp.dps = 40

E = exp(1)
L0 = log1p(E)
M0 = log(L0)


class GEps:
    def __init__(self, p, eps):
        self.p = mpf(p)
        self.eps = mpf(eps)

    def log_phi(self, t):
        L = t + log1p(exp(1 - t))
        M = log(L)
        return -(self.p / 2) * log(L / L0) - (self.eps / 2) * log(M / M0)

    def ratio(self, t):
        L = t + log1p(exp(1 - t))
        M = log(L)
        er = exp(1 - t)
        return (self.p * M + self.eps) / (2 * L * M * (1 + er))


class AlphaSharp:
    def __init__(self, alpha):
        self.alpha = mpf(alpha)
        self.gamma = 1 - 1 / self.alpha

    def log_phi(self, t):
        L = t + log1p(exp(1 - t))
        return (2 / self.gamma) * (L0**self.gamma - L**self.gamma)

    def ratio(self, t):
        L = t + log1p(exp(1 - t))
        er = exp(1 - t)
        return 2 * L ** (self.gamma - 1) / (1 + er)


def mu_abs(prof, t):
    rho = prof.ratio(t)
    return abs(1 - rho) / (1 + rho)


def t_integral(integrand, t_max, points=None):
    """2 pi * integral of `integrand(t)` over (0, t_max)."""
    if points is None:
        points = [mpf(0), mpf(1), mpf(4)]
    pts = [p for p in points if p < t_max] + [t_max]
    return 2 * pi * quad(integrand, pts)


def inv_log_weight_integrand(prof, a):
    # |Df|^2 / log^a(e + K) against the area element: ratio < 1 for these
    # profiles, so |Df| = phi/r and the e^{2t} factors cancel.
    def f(t):
        phi2 = exp(2 * prof.log_phi(t))
        K = 1 / prof.ratio(t)
        return phi2 / log(E + K) ** a

    return f


def exp_log_power_integrand(prof, beta):
    # |Df|^2 exp(log^beta(e + |Df|)) against the area element.
    def f(t):
        lphi = prof.log_phi(t)
        ldf = lphi + t  # log(phi/r), ratio < 1
        le = ldf + log1p(E * exp(-ldf)) if ldf < 500 else ldf  # log(e+|Df|)
        return exp(2 * lphi + le**beta)

    return f


def eps_power_integrand(prof, eps):
    # (1 - |mu|)^eps |df|^2 against the area element.
    def f(t):
        rho = prof.ratio(t)
        phi2 = exp(2 * prof.log_phi(t))
        one_minus_mu = 2 * min(1, rho) / (1 + rho)
        return one_minus_mu**eps * phi2 * (1 + rho) ** 2 / 4

    return f


def exp_distortion_integrand(prof, p, alpha):
    def f(t):
        K = max(prof.ratio(t), 1 / prof.ratio(t))
        return exp(p * K**alpha - 2 * t)

    return f


def tail_in_log(f, T):
    """integral of f over (T, inf) via u = log t, for slow power-law decay."""
    return quad(lambda u: f(exp(u)) * exp(u), [log(T), log(T) + 400])


def main():
    out = {}

    # ----- g_eps(1, 1/2) -------------------------------------------------
    g = GEps(1, mpf(1) / 2)
    ge = {"p": 1.0, "eps": 0.5}

    ge["phi_at"] = [
        [float(r), float(exp(g.log_phi(log(1 / mpf(r)))))]
        for r in ("0.9", "0.5", "0.1", "0.01", "0.0001")
    ]
    ge["ratio_at"] = [
        [float(r), float(g.ratio(log(1 / mpf(r))))]
        for r in ("0.9", "0.5", "0.1", "0.01", "0.0001")
    ]

    ks = list(range(2, 41, 2))
    for a, key in ((mpf(1) / 2, "inv_log_weight_a05"), (mpf(3) / 2, "inv_log_weight_a15")):
        f = inv_log_weight_integrand(g, a)
        vals = []
        for k in ks:
            t_max = k * log(2)
            vals.append([k, float(t_integral(f, t_max))])
        ge[key] = vals

    cond = quad(
        lambda t: (exp(g.ratio(t)) + exp(1 / g.ratio(t))) * exp(-2 * t),
        [0, 2, 10, 50, 200, 1000],
    )
    ge["condition_integral_p1"] = float(cond)

    fexp = exp_distortion_integrand(g, 1, 1)
    ge["exp_distortion_p1_alpha1"] = float(
        2 * pi * quad(fexp, [0, 2, 10, 50, 200, 1000])
    )

    eps_rows = []
    for j in range(8):
        eps = mpf("0.4") * mpf(2) ** (-mpf(j) / 3)
        f = eps_power_integrand(g, eps)
        head = 2 * pi * quad(f, [0, 1, 10, 100])
        tail = 2 * pi * tail_in_log(f, mpf(100))
        eps_rows.append([float(eps), float(head + tail)])
    ge["eps_power"] = eps_rows

    thr_rows = []
    for thr in ("0.5", "0.684210526315789474", "0.8", "0.828571428571428571"):
        thr = mpf(thr)
        target = (1 - thr) / (1 + thr)
        # ratio is decreasing on t >= 0 for this profile; plain bisection.
        lo, hi = mpf(0), mpf(64)
        for _ in range(200):
            mid = (lo + hi) / 2
            if g.ratio(mid) > target:
                lo = mid
            else:
                hi = mid
        thr_rows.append([float(thr), float(exp(-(lo + hi) / 2))])
    ge["mu_abs_radius"] = thr_rows

    ge["image_disk_areas"] = [
        [k, float(pi * exp(2 * g.log_phi(k * log(2))))] for k in range(1, 13)
    ]

    out["g_eps"] = ge

    # ----- alpha_sharp(2) -------------------------------------------------
    a = AlphaSharp(2)
    ash = {"alpha": 2.0}
    ash["phi_at"] = [
        [float(r), float(exp(a.log_phi(log(1 / mpf(r)))))]
        for r in ("0.9", "0.5", "0.1", "0.01", "0.0001")
    ]

    f04 = exp_log_power_integrand(a, mpf("0.4"))
    rows = []
    for j in range(1, 15):
        t_max = mpf(2) ** j
        rows.append([j, float(t_integral(f04, t_max, [0, 1, 16, 256, 4096]))])
    ash["exp_log_power_b04"] = rows

    f2 = exp_distortion_integrand(a, 2, 2)
    ash["exp_distortion_p2_alpha2"] = float(2 * pi * quad(f2, [0, 2, 10, 50, 200]))

    out["alpha_sharp"] = ash

    dest = os.path.join(
        os.path.dirname(__file__), "..", "crates", "beltrami-lab", "tests", "data"
    )
    os.makedirs(dest, exist_ok=True)
    path = os.path.join(dest, "radial_oracle.json")
    with open(path, "w") as fh:
        json.dump(out, fh, indent=1)
    print("wrote", os.path.normpath(path))


if __name__ == "__main__":
    main()
