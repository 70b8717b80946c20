"""Numba-jitted hot kernels: tensor contraction cascades and chain stepping.

Same call signatures and semantics as the pure-numpy backend in _numpy.py.
All kernels are nopython and release the GIL so independent chains can run
under a thread pool.  No fastmath: results must be reproducible bit-for-bit
for a fixed backend.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NAME = "numba"


@njit(cache=True, nogil=True)
def _cascade(jf, n, p, s):
    t = jf
    while t.size > n * n * n:
        t = np.dot(t.reshape(t.size // n, n), s)
    t3 = t
    mat = np.dot(t3.reshape(n * n, n), s)
    vec = np.dot(mat.reshape(n, n), s)
    e = np.dot(vec, s)
    return t3, mat, vec, e


def cascade(jf, n, p, s):
    return _cascade(jf, n, p, np.ascontiguousarray(s))


@njit(cache=True, nogil=True)
def _grad_energy(jf, n, p, s):
    t = jf
    while t.size > n * n:
        t = np.dot(t.reshape(t.size // n, n), s)
    vec = np.dot(t.reshape(n, n), s)
    e = np.dot(vec, s)
    scale = float(n) ** (-(p - 1) / 2.0)
    g = np.empty(n)
    for i in range(n):
        g[i] = scale * p * vec[i]
    return g, scale * e


def grad_energy(jf, n, p, s):
    return _grad_energy(jf, n, p, np.ascontiguousarray(s))


@njit(cache=True, nogil=True)
def _energy_many(jf, n, p, sigmas):
    m = sigmas.shape[0]
    out = np.empty(m)
    scale = float(n) ** (-(p - 1) / 2.0)
    for r in range(m):
        s = np.ascontiguousarray(sigmas[r])
        t = jf
        while t.size > n:
            t = np.dot(t.reshape(t.size // n, n), s)
        out[r] = scale * np.dot(t, s)
    return out


def energy_many(jf, n, p, sigmas):
    return _energy_many(jf, n, p, np.ascontiguousarray(sigmas))


@njit(cache=True, nogil=True)
def _vv_grad(t3, n, v):
    out = np.empty(n)
    for c in range(n):
        acc = 0.0
        for a in range(n):
            va = v[a]
            b0 = a * n * n
            for b in range(n):
                acc += t3[b0 + b * n + c] * va * v[b]
        out[c] = acc
    return out


def vv_grad(t3, n, v):
    return _vv_grad(np.ascontiguousarray(t3), n, np.ascontiguousarray(v))


@njit(cache=True, nogil=True, inline="always")
def _dot(a, b, n):
    acc = 0.0
    for i in range(n):
        acc += a[i] * b[i]
    return acc


@njit(cache=True, nogil=True)
def _mala_block(jf, n, p, beta, dt, x0, normals, logu, center, q_low, q_high, use_region):
    steps = normals.shape[0]
    nf = float(n)
    sqrtn = np.sqrt(nf)
    sqrt_dt = np.sqrt(dt)
    pos = np.empty((steps, n))
    energies = np.empty(steps)
    accepted = np.zeros(steps, np.bool_)

    x = x0.copy()
    g, e = _grad_energy(jf, n, p, x)
    mu = np.empty(n)
    u = np.empty(n)
    z = np.empty(n)
    y = np.empty(n)
    ur = np.empty(n)
    mur = np.empty(n)
    for t in range(steps):
        gx = _dot(g, x, n) / nf
        xi = normals[t]
        xix = _dot(xi, x, n) / nf
        uu = 0.0
        for i in range(n):
            mu[i] = -0.5 * beta * dt * (g[i] - gx * x[i])
            u[i] = mu[i] + sqrt_dt * (xi[i] - xix * x[i])
            z[i] = x[i] + u[i]
            uu += u[i] * u[i]
        zn = np.sqrt(_dot(z, z, n))
        for i in range(n):
            y[i] = z[i] * (sqrtn / zn)

        ok = True
        if use_region:
            ry = _dot(y, center, n) / nf
            ok = (q_low <= ry) and (ry <= q_high)
        sxy = 0.0
        if ok:
            sxy = _dot(x, y, n)
            ok = sxy > 0.0
        if ok:
            gy, ey = _grad_energy(jf, n, p, y)
            gyy = _dot(gy, y, n) / nf
            c = nf / sxy
            dr = 0.0
            urr = 0.0
            for i in range(n):
                ur[i] = c * x[i] - y[i]
                mur[i] = -0.5 * beta * dt * (gy[i] - gyy * y[i])
                d = ur[i] - mur[i]
                dr += d * d
                urr += ur[i] * ur[i]
            df = 0.0
            for i in range(n):
                d = u[i] - mu[i]
                df += d * d
            lqf = -df / (2.0 * dt) + 0.5 * nf * np.log1p(uu / nf)
            lqr = -dr / (2.0 * dt) + 0.5 * nf * np.log1p(urr / nf)
            la = -beta * (ey - e) + lqr - lqf
            if logu[t] < la:
                for i in range(n):
                    x[i] = y[i]
                g = gy
                e = ey
                accepted[t] = True
        for i in range(n):
            pos[t, i] = x[i]
        energies[t] = e
    return pos, energies, accepted, g, e


def mala_block(jf, n, p, beta, dt, x0, normals, logu, center, q_low, q_high, use_region):
    return _mala_block(jf, n, p, float(beta), float(dt),
                       np.ascontiguousarray(x0), np.ascontiguousarray(normals),
                       np.ascontiguousarray(logu), np.ascontiguousarray(center),
                       float(q_low), float(q_high), bool(use_region))


@njit(cache=True, nogil=True)
def _langevin_block(jf, n, p, beta, dt, x0, normals):
    steps = normals.shape[0]
    nf = float(n)
    sqrtn = np.sqrt(nf)
    sqrt_dt = np.sqrt(dt)
    pos = np.empty((steps, n))
    energies = np.empty(steps)

    x = x0.copy()
    g, e = _grad_energy(jf, n, p, x)
    z = np.empty(n)
    for t in range(steps):
        gx = _dot(g, x, n) / nf
        xi = normals[t]
        xix = _dot(xi, x, n) / nf
        for i in range(n):
            gs = g[i] - gx * x[i]
            eta = xi[i] - xix * x[i]
            z[i] = x[i] - 0.5 * beta * dt * gs + sqrt_dt * eta
        zn = np.sqrt(_dot(z, z, n))
        for i in range(n):
            x[i] = z[i] * (sqrtn / zn)
        g, e = _grad_energy(jf, n, p, x)
        for i in range(n):
            pos[t, i] = x[i]
        energies[t] = e
    return pos, energies


def langevin_block(jf, n, p, beta, dt, x0, normals):
    return _langevin_block(jf, n, p, float(beta), float(dt),
                           np.ascontiguousarray(x0), np.ascontiguousarray(normals))
