"""Independent cycle oracle: scipy DOP853 on the planar (m, lambda) system.

Prints the amplitude/period of the beta=2, h=0 cycle and brackets the
saddle-node beta_star(h) as the root in beta of max_y [P(y) - y], where P is
the first-return map on {lambda = 0, upward}. Below beta_star every orbit
spirals in, so the maximum displacement is negative; above it the window
between the two cycles has positive displacement.
"""
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

RTOL, ATOL = 1e-12, 1e-14


def field(beta, h):
    def f(_t, s):
        m, lam = s
        dm = -2 * m + np.tanh(lam + h) + np.tanh(lam - h)
        return [dm, -lam + beta * dm]
    return f


def up_crossing(_t, s):
    return s[1]
up_crossing.direction = 1
up_crossing.terminal = True


def section_start(beta, y):
    # Lienard (y, 0) -> planar m = -y / (2 beta), lambda = 0
    return [-y / (2 * beta), 0.0]


def ret(beta, h, y, dense=False):
    """One revolution from (y, 0); returns (P(y), period, sol)."""
    f = field(beta, h)
    s0 = section_start(beta, y)
    # leave the section before arming the event
    first = solve_ivp(f, (0, 1e-3), s0, method="DOP853", rtol=RTOL, atol=ATOL)
    s1 = first.y[:, -1]
    sol = solve_ivp(f, (1e-3, 1e4), s1, method="DOP853", rtol=RTOL, atol=ATOL,
                    events=up_crossing, dense_output=dense, max_step=0.5)
    t1 = sol.t_events[0][0]
    m1, _ = sol.y_events[0][0]
    return 2 * (0.0 - beta * m1), t1, sol


def fixed_point(beta, h, y0):
    y = y0
    for _ in range(200):
        y1 = ret(beta, h, y)[0]
        if abs(y1 - y) < 1e-13:
            break
        y = y1
    return brentq(lambda v: ret(beta, h, v)[0] - v, y * (1 - 1e-6), y * (1 + 1e-6), xtol=1e-15)


def stable_cycle(beta, h):
    y = fixed_point(beta, h, 2 * beta / 3 + 1)
    _, per, sol = ret(beta, h, y, dense=True)
    ts = np.linspace(1e-3, per, 400001)
    amp = np.max(np.abs(sol.sol(ts)[1]))
    return y, amp, per


def max_displacement(beta, h, ymax):
    ys = np.linspace(0.05, ymax, 40)
    d = np.array([ret(beta, h, y)[0] - y for y in ys])
    k = int(np.argmax(d))
    lo, hi = ys[max(k - 1, 0)], ys[min(k + 1, len(ys) - 1)]
    r = minimize_scalar(lambda y: -(ret(beta, h, y)[0] - y), bounds=(lo, hi),
                        method="bounded", options={"xatol": 1e-6})
    return -r.fun


def beta_t(h):
    sech2 = lambda x: 1 / np.cosh(x) ** 2
    bt = lambda l: 3 / (sech2(l + h) + sech2(l - h))
    li = 0.5 * np.arccosh((np.cosh(4 * h) - 3) / (2 * np.cosh(2 * h)))
    res = lambda l: bt(l) / 3 * (np.tanh(l + h) + np.tanh(l - h)) - l
    return bt(brentq(res, li, li + 20, xtol=1e-15))


def beta_star(h):
    lo, hi = beta_t(h), 1.5 * np.cosh(h) ** 2
    ymax = 2 * hi / 3 + 1
    f = lambda b: max_displacement(b, h, ymax)
    # the root lies where f turns positive; bracket it on a coarse grid first
    grid = np.linspace(lo, hi - 1e-3, 25)
    vals = [f(b) for b in grid]
    k = next(i for i, v in enumerate(vals) if v > 0)
    return brentq(f, grid[k - 1], grid[k], xtol=1e-8)


if __name__ == "__main__":
    y, amp, per = stable_cycle(2.0, 0.0)
    print(f"beta=2 h=0: y*={y:.13f} amplitude={amp:.12f} period={per:.12f}", flush=True)
    for h in (1.0, 0.8):
        print(f"h={h}: beta_T={beta_t(h):.10f} beta_c={1.5*np.cosh(h)**2:.10f} "
              f"beta_star={beta_star(h):.8f}", flush=True)
