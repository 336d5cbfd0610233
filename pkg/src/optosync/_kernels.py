"""Compiled fixed-step RK4 kernels for batches of independent systems.

State rows are real 8-vectors ``(ReA1, ImA1, ReA2, ImA2, ReB1, ImB1, ReB2, ImB2)``;
parameter rows follow the field order of :class:`optosync.model.SystemParams`.
Every row is advanced by the same scalar code path, so results do not depend
on how rows are grouped into batches.
"""

import numba
import numpy as np

# column indices into a parameter row
OMEGA1, OMEGA2, DELTA1, DELTA2, G, E, KAPPA, GAMMA, MU, LAM, NB = range(11)


@numba.njit(cache=True)
def mean_rhs(P, y, out):
    a1r, a1i, a2r, a2i, b1r, b1i, b2r, b2i = y[0], y[1], y[2], y[3], y[4], y[5], y[6], y[7]
    k = P[KAPPA]
    gam = P[GAMMA]
    g = P[G]
    mu = P[MU]
    lam = P[LAM]
    d1 = P[DELTA1] + 2.0 * g * b1r
    d2 = P[DELTA2] + 2.0 * g * b2r
    out[0] = -k * a1r - d1 * a1i + P[E] + lam * a2i
    out[1] = d1 * a1r - k * a1i - lam * a2r
    out[2] = -k * a2r - d2 * a2i + P[E] + lam * a1i
    out[3] = d2 * a2r - k * a2i - lam * a1r
    out[4] = -gam * b1r + P[OMEGA1] * b1i - mu * b2i
    out[5] = -P[OMEGA1] * b1r - gam * b1i + g * (a1r * a1r + a1i * a1i) + mu * b2r
    out[6] = -gam * b2r + P[OMEGA2] * b2i - mu * b1i
    out[7] = -P[OMEGA2] * b2r - gam * b2i + g * (a2r * a2r + a2i * a2i) + mu * b1r


@numba.njit(cache=True)
def drift(P, y, S):
    g = P[G]
    mu = P[MU]
    lam = P[LAM]
    k = P[KAPPA]
    gam = P[GAMMA]
    d1 = P[DELTA1] + 2.0 * g * y[4]
    d2 = P[DELTA2] + 2.0 * g * y[6]
    S[:, :] = 0.0
    S[0, 0] = -k
    S[0, 1] = -d1
    S[0, 3] = lam
    S[0, 4] = -2.0 * g * y[1]
    S[1, 0] = d1
    S[1, 1] = -k
    S[1, 2] = -lam
    S[1, 4] = 2.0 * g * y[0]
    S[2, 1] = lam
    S[2, 2] = -k
    S[2, 3] = -d2
    S[2, 6] = -2.0 * g * y[3]
    S[3, 0] = -lam
    S[3, 2] = d2
    S[3, 3] = -k
    S[3, 6] = 2.0 * g * y[2]
    S[4, 4] = -gam
    S[4, 5] = P[OMEGA1]
    S[4, 7] = -mu
    S[5, 0] = 2.0 * g * y[0]
    S[5, 1] = 2.0 * g * y[1]
    S[5, 4] = -P[OMEGA1]
    S[5, 5] = -gam
    S[5, 6] = mu
    S[6, 5] = -mu
    S[6, 6] = -gam
    S[6, 7] = P[OMEGA2]
    S[7, 2] = 2.0 * g * y[2]
    S[7, 3] = 2.0 * g * y[3]
    S[7, 4] = mu
    S[7, 6] = -P[OMEGA2]
    S[7, 7] = -gam


@numba.njit(cache=True)
def cov_rhs(P, y, C, S, out):
    drift(P, y, S)
    for i in range(8):
        for j in range(i, 8):
            acc = 0.0
            for m in range(8):
                acc += S[i, m] * C[m, j] + C[i, m] * S[j, m]
            out[i, j] = acc
            out[j, i] = acc
    nopt = P[KAPPA]
    nmech = P[GAMMA] * (2.0 * P[NB] + 1.0)
    for i in range(4):
        out[i, i] += nopt
    for i in range(4, 8):
        out[i, i] += nmech


@numba.njit(cache=True)
def _bad(y, C, with_cov, guard):
    for i in range(8):
        v = y[i]
        if not np.isfinite(v) or abs(v) > guard:
            return True
    if with_cov:
        for i in range(8):
            for j in range(8):
                v = C[i, j]
                if not np.isfinite(v) or abs(v) > guard:
                    return True
    return False


@numba.njit(cache=True)
def advance(P, Y, C, with_cov, nsteps, h, t0, guard, diverged_at):
    """Advance every live row of ``Y`` (and ``C``) by ``nsteps`` RK4 steps in place.

    Rows with a finite ``diverged_at`` are skipped.  A row whose new state is
    non-finite or exceeds ``guard`` keeps its previous state and gets its
    divergence time recorded.
    """
    n = Y.shape[0]
    k1 = np.empty(8)
    k2 = np.empty(8)
    k3 = np.empty(8)
    k4 = np.empty(8)
    tmp = np.empty(8)
    ynew = np.empty(8)
    S = np.empty((8, 8))
    c1 = np.empty((8, 8))
    c2 = np.empty((8, 8))
    c3 = np.empty((8, 8))
    c4 = np.empty((8, 8))
    ctmp = np.empty((8, 8))
    cnew = np.empty((8, 8))
    for r in range(n):
        if np.isfinite(diverged_at[r]):
            continue
        p = P[r]
        y = Y[r]
        c = C[r]
        for s in range(nsteps):
            mean_rhs(p, y, k1)
            if with_cov:
                cov_rhs(p, y, c, S, c1)
            for i in range(8):
                tmp[i] = y[i] + 0.5 * h * k1[i]
            if with_cov:
                for i in range(8):
                    for j in range(8):
                        ctmp[i, j] = c[i, j] + 0.5 * h * c1[i, j]
                cov_rhs(p, tmp, ctmp, S, c2)
            mean_rhs(p, tmp, k2)
            for i in range(8):
                tmp[i] = y[i] + 0.5 * h * k2[i]
            if with_cov:
                for i in range(8):
                    for j in range(8):
                        ctmp[i, j] = c[i, j] + 0.5 * h * c2[i, j]
                cov_rhs(p, tmp, ctmp, S, c3)
            mean_rhs(p, tmp, k3)
            for i in range(8):
                tmp[i] = y[i] + h * k3[i]
            if with_cov:
                for i in range(8):
                    for j in range(8):
                        ctmp[i, j] = c[i, j] + h * c3[i, j]
                cov_rhs(p, tmp, ctmp, S, c4)
            mean_rhs(p, tmp, k4)
            for i in range(8):
                ynew[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if with_cov:
                for i in range(8):
                    for j in range(8):
                        cnew[i, j] = c[i, j] + (h / 6.0) * (c1[i, j] + 2.0 * c2[i, j] + 2.0 * c3[i, j] + c4[i, j])
            if _bad(ynew, cnew, with_cov, guard):
                diverged_at[r] = t0 + (s + 1) * h
                break
            for i in range(8):
                y[i] = ynew[i]
            if with_cov:
                for i in range(8):
                    for j in range(8):
                        c[i, j] = cnew[i, j]


@numba.njit(cache=True)
def phase_momentum_variance(z, C, floor, out):
    """Half the variance of p1' - p2' in the frame of each mechanical mean phase.

    ``z`` holds complex amplitude rows (A1, A2, B1, B2); rows with a mechanical
    amplitude at or below ``floor`` get NaN.
    """
    for r in range(z.shape[0]):
        b1 = z[r, 2]
        b2 = z[r, 3]
        a1 = abs(b1)
        a2 = abs(b2)
        if not (a1 > floor and a2 > floor):
            out[r] = np.nan
            continue
        # p' = -sin(phi) q + cos(phi) p
        u0, u1 = -b1.imag / a1, b1.real / a1
        w0, w1 = -b2.imag / a2, b2.real / a2
        c11 = u0 * u0 * C[r, 4, 4] + 2.0 * u0 * u1 * C[r, 4, 5] + u1 * u1 * C[r, 5, 5]
        c22 = w0 * w0 * C[r, 6, 6] + 2.0 * w0 * w1 * C[r, 6, 7] + w1 * w1 * C[r, 7, 7]
        c12 = (u0 * w0 * C[r, 4, 6] + u0 * w1 * C[r, 4, 7]
               + u1 * w0 * C[r, 5, 6] + u1 * w1 * C[r, 5, 7])
        out[r] = 0.5 * (c11 + c22 - 2.0 * c12)


def to_real(z: np.ndarray) -> np.ndarray:
    """(n, 4) complex amplitudes -> (n, 8) interleaved real rows."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (8,))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def to_complex(y: np.ndarray) -> np.ndarray:
    return y[..., 0::2] + 1j * y[..., 1::2]
