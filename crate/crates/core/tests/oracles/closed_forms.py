"""Arbitrary-precision reference values frozen into the Rust test suite.

Run with `python3 closed_forms.py`; every printed constant appears verbatim
in tests/model_oracles.rs or tests/stability_oracles.rs.
"""
from mpmath import mp, mpf, tanh, sech, log, sqrt, findroot, cosh, acosh

mp.dps = 60

H_TC = log(2 + sqrt(3)) / 2


def field3d(m, mse, lam, beta, h):
    tp, tm = tanh(lam + h), tanh(lam - h)
    dm = -2 * m + tp + tm
    return dm, -2 * mse + tp - tm, -lam + beta * dm


def g(lam, beta, h):
    return 3 * lam - beta * (tanh(lam + h) + tanh(lam - h))


def beta_of(lam, h):
    return 3 / (sech(lam + h) ** 2 + sech(lam - h) ** 2)


def tangency(lam, h):
    return beta_of(lam, h) / 3 * (tanh(lam + h) + tanh(lam - h)) - lam


def beta_t(h):
    # dense grid scan for the sign change, then refinement
    c = (cosh(4 * h) - 3) / (2 * cosh(2 * h))
    lam_i = acosh(c) / 2
    grid = [lam_i + mpf(k) / 1000 for k in range(1, 20000)]
    prev = tangency(lam_i, h)
    for lam in grid:
        cur = tangency(lam, h)
        if prev < 0 <= cur:
            root = findroot(lambda x: tangency(x, h), (lam - mpf(1) / 1000, lam), solver="anderson")
            return beta_of(root, h), root
        prev = cur
    raise RuntimeError("no tangency")


print("field3d(0.1,0,0.2; beta=1,h=1) =", [mp.nstr(v, 25) for v in field3d(mpf("0.1"), 0, mpf("0.2"), 1, 1)])
p = field3d(mpf("0.3"), 0, mpf("-0.5"), 2, mpf("0.5"))
print("planar(0.3,-0.5; beta=2,h=0.5) =", mp.nstr(p[0], 25), mp.nstr(p[2], 25))
print("g(1; 9/4, h_tc) =", mp.nstr(g(1, mpf(9) / 4, H_TC), 25))
print("h_tc =", mp.nstr(H_TC, 25))
for h in ["0.8", "1.0", "1.5"]:
    bt, lam = beta_t(mpf(h))
    print(f"beta_T({h}) =", mp.nstr(bt, 25), " lambda* =", mp.nstr(lam, 25), " beta_c =", mp.nstr(mpf(3) / 2 * cosh(mpf(h)) ** 2, 25))
