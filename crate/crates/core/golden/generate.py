"""Regenerates the golden tables with mpmath at 40 digits.

Each line is `name key=value ... value`, values printed with 17
significant digits. Run from this directory: `python3 generate.py`.
"""
from mpmath import mp, mpf, mpc, sqrt, pi, sin, cos, exp, quad, legendre

mp.dps = 40


def fmt(x):
    return mp.nstr(mpf(x), 17, min_fixed=1, max_fixed=0, strip_zeros=False)


def sj(l, x):
    return sqrt(pi / (2 * x)) * mp.besselj(l + mpf(1) / 2, x)


def sy(l, x):
    return sqrt(pi / (2 * x)) * mp.bessely(l + mpf(1) / 2, x)


def h1(l, x):
    return mpc(sj(l, x), sy(l, x))


def dh1(l, x):
    # h_l' = l h_l / x - h_{l+1}
    return l * h1(l, x) / x - h1(l + 1, x)


def dsj(l, x):
    return l * sj(l, x) / x - sj(l + 1, x)


ARGS = [(0, "0.5"), (1, "1"), (2, "2.5"), (3, "5"), (5, "0.1"), (8, "10"), (10, "3"), (15, "20"), (20, "1"), (20, "30")]
LEG = [(0, "0.3"), (1, "-0.7"), (2, "0.5"), (3, "0.25"), (5, "-0.3"), (7, "0.99"), (10, "0.9"), (12, "-0.55"), (20, "0.1"), (30, "0.8")]

with open("special_functions.txt", "w") as f:
    f.write("# spherical Bessel/Hankel functions and Legendre polynomials, mpmath 40 digits\n")
    for l, xs in ARGS:
        x = mpf(xs)
        f.write(f"spherical_bessel_j l={l} x={xs} {fmt(sj(l, x))}\n")
    for l, xs in ARGS:
        x = mpf(xs)
        f.write(f"spherical_bessel_y l={l} x={xs} {fmt(sy(l, x))}\n")
    for l, ts in LEG:
        f.write(f"legendre_p l={l} t={ts} {fmt(legendre(l, mpf(ts)))}\n")


def mie_far_field(kappa, theta, hard=False, lmax=40):
    s = mpc(0)
    for l in range(lmax + 1):
        a = -dsj(l, kappa) / dh1(l, kappa) if hard else -sj(l, kappa) / h1(l, kappa)
        s += (2 * l + 1) * a * legendre(l, cos(theta))
    return s * mpc(0, -1) / kappa


with open("mie_soft_k1.txt", "w") as f:
    f.write("# sound-soft unit sphere, kappa=1: far field at angle theta (degrees) from the incident direction\n")
    for deg in range(0, 181, 10):
        u = mie_far_field(mpf(1), pi * deg / 180)
        f.write(f"mie_soft_far_field_re theta={deg} {fmt(u.real)}\n")
        f.write(f"mie_soft_far_field_im theta={deg} {fmt(u.imag)}\n")
        f.write(f"mie_soft_far_field_abs theta={deg} {fmt(abs(u))}\n")


def v_symbol_quadrature(l, kappa):
    # Funk-Hecke: lambda_l = 2 pi int_{-1}^{1} G(sqrt(2 - 2t)) P_l(t) dt
    def g(t):
        r = sqrt(2 - 2 * t)
        return exp(mpc(0, kappa * r)) / (4 * pi * r) * legendre(l, t)

    return 2 * pi * quad(g, [-1, 0, 1])


with open("symbols.txt", "w") as f:
    f.write("# single-layer eigenvalue on degree-l harmonics of the unit sphere (Funk-Hecke quadrature)\n")
    for l, kappa in [(1, 1)]:
        v = v_symbol_quadrature(l, mpf(kappa))
        closed = mpc(0, kappa) * sj(l, mpf(kappa)) * h1(l, mpf(kappa))
        assert abs(v - closed) < mpf(10) ** -20, (v, closed)
        f.write(f"single_layer_symbol_re l={l} kappa={kappa} {fmt(v.real)}\n")
        f.write(f"single_layer_symbol_im l={l} kappa={kappa} {fmt(v.imag)}\n")
