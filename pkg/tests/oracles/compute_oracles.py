"""Independent high-precision evaluation of the reference values frozen in ``frozen.py``.

Uses mpmath only (no package code). Run ``python tests/oracles/compute_oracles.py``.
"""
from mpmath import mp, mpf, log, pi, quad, diff

mp.dps = 30
R, RS, F = mpf(1), mpf("0.5"), mpf(1)
G2 = F / (R * log(R / RS))


def u_d(rho, r):
    return F * log(rho / r) / log(R / r)


def u_n(rho, r):
    return G2 * R * log(rho / r)


def values():
    out = {}
    out["g_2d"] = G2
    out["u_d_075"] = u_d(mpf("0.75"), RS)
    out["u_star_3d_075"] = F * R / (R - RS) * (1 - RS / mpf("0.75"))
    r = mpf("0.9")
    # energy gap by 1D quadrature of the radial difference field
    out["J_09"] = 2 * pi * quad(lambda s: diff(lambda t: u_d(t, r) - u_n(t, r), s) ** 2 * s, [r, R])
    out["flux_gamma_05"] = diff(lambda t: u_d(t, RS), RS)
    out["vn_2d_09"] = -(diff(lambda t: u_d(t, r), r) - diff(lambda t: u_n(t, r), r))
    g3 = F * RS / (R * (R - RS))
    ud3 = lambda t: F * R / (R - r) * (1 - r / t)  # noqa: E731
    un3 = lambda t: g3 * R**2 * (1 / r - 1 / t)  # noqa: E731
    out["vn_3d_09"] = -(diff(ud3, r) - diff(un3, r))
    out["K0"] = F / (RS * log(R / r))
    out["T0"] = (R - RS) / out["K0"]
    c_d, c_n = F / log(R / r), G2 * R
    out["C_D_09"] = c_d
    q = (R / r) ** 2
    det_d, det_n = q - 1 / q, q + 1 / q
    out["det_d_k2"], out["det_n_k2"] = det_d, det_n
    q16 = (R / r) ** 16
    out["det_ratio_k16"] = (q16 + 1 / q16) / (q16 - 1 / q16)
    out["lambda_2"] = -(2 / r**2) * (c_d * det_n / det_d + G2 * det_d / det_n) + (c_d - c_n) / r**2
    # a_D from the 2x2 system: a R^2 + b R^-2 = 0, a r^2 + b r^-2 = -C_D / r
    m = mp.matrix([[R**2, R**-2], [r**2, r**-2]])
    out["a_D_k2"] = mp.lu_solve(m, mp.matrix([0, -c_d / r]))[0]
    return out


if __name__ == "__main__":
    for k, v in values().items():
        print(f"{k} = {mp.nstr(v, 17)}")
