#!/usr/bin/env python3
"""Assemble the shipped fused-silica optical-constant band (n_min, n_max, k_min, k_max).

The band is a reconstruction. Each wavelength region is modelled from
published literature values for type III/IV fused silica and the
envelope widths reflect the scatter between sources:

  uv       30-200 nm   anchor points after Philipp (1985) / Kitamura et al. (2007)
  edge     150-250 nm  Urbach tail of the absorption edge
  transp   0.2-4 um    Malitson (1965) dispersion, bulk loss floor, OH bands (wet vs dry glass)
  mphonon  3.5-7.5 um  multiphonon absorption edge
  lorentz  7-50 um     Lorentz-oscillator fit to the Si-O stretching/bending bands
  thz      50 um-2 mm  THz / mm-wave data (Grischkowsky 1990, Naftaly 2007, Afsar 1984)

Output columns: wavelength_m,n_min,n_max,k_min,k_max,source
"""
import numpy as np

LAMBDA_LO = 30e-9
LAMBDA_HI = 2e-3
PER_DECADE = 64

UV_ANCHORS = [
    # nm, n, k
    (30, 0.72, 0.28), (40, 0.70, 0.45), (50, 0.72, 0.62), (60, 0.78, 0.85),
    (70, 0.90, 1.05), (80, 1.10, 1.25), (90, 1.45, 1.35), (100, 1.85, 1.25),
    (105, 2.05, 1.05), (110, 2.15, 0.75), (115, 2.10, 0.70), (120, 2.05, 0.80),
    (125, 2.25, 0.45), (130, 2.10, 0.12), (140, 1.85, 1.0e-2), (150, 1.74, 1.0e-3),
    (160, 1.67, 1.0e-5), (170, 1.62, 1.0e-6), (180, 1.59, 2.0e-7), (190, 1.57, 5.0e-8),
    (200, 1.5505, 2.0e-8),
]

# (wavenumber [1/cm], strength, damping [1/cm])
OSCILLATORS = [
    (457.0, 0.90, 60.0),
    (800.0, 0.12, 80.0),
    (1065.0, 0.67, 65.0),
    (1200.0, 0.04, 100.0),
]


def eps_model(lam):
    """UV Sellmeier poles (Malitson) plus IR Lorentz oscillators."""
    lum = lam * 1e6
    l2 = lum * lum
    eps = 1.0 + 0.6961663 * l2 / (l2 - 0.0684043**2) + 0.4079426 * l2 / (l2 - 0.1162414**2)
    eps = complex(eps)
    w = 1e4 / lum
    for w0, s, g in OSCILLATORS:
        eps += s * w0 * w0 / (w0 * w0 - w * w - 1j * g * w)
    return eps


def nk_model(lam):
    n = np.sqrt(eps_model(lam))
    return n.real, n.imag


def loglerp(x, xs, ys):
    return np.exp(np.interp(np.log(x), np.log(xs), np.log(ys)))


def gauss(lum, c, w):
    return np.exp(-0.5 * ((lum - c) / w) ** 2)


def transparent_k(lam):
    """Extra k on top of the oscillator model in the transparent window (min, max)."""
    lum = lam * 1e6
    floor_min = 1.0e-8
    floor_max = 1.0e-7
    # OH overtones and fundamental (wet type III glass gives the upper bound)
    oh_max = 1.2e-3 * gauss(lum, 2.73, 0.045) + 9.0e-6 * gauss(lum, 2.21, 0.03) + 3.3e-6 * gauss(lum, 1.38, 0.015)
    oh_min = 2.0e-7 * gauss(lum, 2.73, 0.045)
    # multiphonon edge, log-linear in wavelength between 3.5 and 7.5 um
    return floor_min + oh_min, floor_max + oh_max


MP_UM = [3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0, 6.5, 7.0, 7.5]
MP_K = [1.0e-7, 3.0e-6, 3.0e-5, 1.5e-4, 5.0e-4, 1.2e-3, 3.0e-3, 8.0e-3, 2.5e-2, 0.143]


def multiphonon_k(lam):
    lum = lam * 1e6
    if lum <= MP_UM[0]:
        return 0.0
    return loglerp(lum, MP_UM, MP_K)


def thz_k(lam):
    pts_lam = [50e-6, 100e-6, 300e-6, 1e-3, 2e-3]
    pts_k = [2.25e-2, 9.0e-3, 2.5e-3, 4.0e-4, 1.2e-4]
    return loglerp(lam, pts_lam, pts_k)


def row(lam):
    lnm = lam * 1e9
    if lnm <= 200.0:
        lams = [a[0] for a in UV_ANCHORS]
        n = np.interp(np.log(lnm), np.log(lams), [a[1] for a in UV_ANCHORS])
        k = loglerp(lnm, lams, [a[2] for a in UV_ANCHORS])
        if lnm < 140.0:
            return n * 0.96, n * 1.04, k / 1.3, k * 1.3, "uv"
        return n * 0.995, n * 1.005, k / 3.0, k * 3.0, "edge"
    n, k_osc = nk_model(lam)
    lum = lam * 1e6
    if lum < 7.5:
        # oscillator wings overestimate the loss far from resonance; k comes
        # from the loss floor, OH bands and the multiphonon edge instead
        kmin, kmax = transparent_k(lam)
        edge = 2.0e-8 * np.exp(-(lnm - 200.0) / 12.0)
        mp = multiphonon_k(lam)
        src = "transp" if lum < 3.5 else "mphonon"
        dn = 1.0e-3 if lum < 3.5 else 0.01
        return n - dn, n + dn, kmin + edge / 3.0 + mp * 0.7, kmax + edge * 3.0 + mp * 1.4, src
    if lum <= 50.0:
        dn = 0.03 * n
        return n - dn, n + dn, k_osc * 0.85, k_osc * 1.15, "lorentz"
    k = thz_k(lam)
    return n - 0.01, n + 0.01, k * 0.6, k * 1.6, "thz"


def main():
    decades = np.log10(LAMBDA_HI / LAMBDA_LO)
    count = int(round(decades * PER_DECADE)) + 1
    lams = np.logspace(np.log10(LAMBDA_LO), np.log10(LAMBDA_HI), count)
    print("wavelength_m,n_min,n_max,k_min,k_max,source")
    for lam in lams:
        nmin, nmax, kmin, kmax, src = row(lam)
        print(f"{lam:.6e},{nmin:.6f},{nmax:.6f},{kmin:.6e},{kmax:.6e},{src}")


if __name__ == "__main__":
    main()
