"""Pure-numpy reference implementations of the hot kernels.

Selected via PSPIN_BACKEND=numpy (or automatically when numba is missing).
Semantics match the numba backend; floating-point results can differ at the
rounding level because BLAS reductions sum in a different order.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"

# intermediates in energy_many are capped around this many float64 values
_CHUNK_BUDGET = 1 << 22


def cascade(jf, n, p, s):
    """Contract the flat order-p tensor with s down through orders 3, 2, 1, 0.

    Returns (t3, mat, vec, e): flat arrays of sizes n^3, n^2, n and the scalar
    full contraction.  All values are unscaled (no N^{-(p-1)/2}, no p! factors).
    For p = 3, t3 aliases jf.
    """
    t = jf
    while t.size > n * n * n:
        t = t.reshape(-1, n) @ s
    t3 = t
    mat = t3.reshape(-1, n) @ s
    vec = mat.reshape(n, n) @ s
    e = float(vec @ s)
    return t3, mat, vec, e


def grad_energy(jf, n, p, s):
    """Scaled Euclidean gradient and energy: (grad, H) of the extension to R^N."""
    _, _, vec, e = cascade(jf, n, p, s)
    scale = float(n) ** (-(p - 1) / 2.0)
    return scale * p * vec, scale * e


def energy_many(jf, n, p, sigmas):
    """Scaled energies for a batch of configurations, shape (M, N) -> (M,)."""
    m = sigmas.shape[0]
    out = np.empty(m)
    rows = max(1, _CHUNK_BUDGET // max(n ** (p - 1), 1))
    scale = float(n) ** (-(p - 1) / 2.0)
    for a in range(0, m, rows):
        sc = np.ascontiguousarray(sigmas[a:a + rows])
        t = jf.reshape(-1, n) @ sc.T          # (n^{p-1}, c)
        while t.shape[0] > 1:
            c = t.shape[1]
            t = np.einsum("anc,cn->ac", t.reshape(-1, n, c), sc, optimize=True)
        out[a:a + rows] = scale * t.reshape(-1)
    return out


def vv_grad(t3, n, v):
    """out_c = sum_{a,b} T3[a,b,c] v_a v_b for the flat order-3 tensor T3."""
    return np.einsum("abc,a,b->c", t3.reshape(n, n, n), v, v, optimize=True)


def _spherical_grad(g, x, n):
    return g - (float(g @ x) / n) * x


def _mala_logq(u, mu, dt, n):
    d = u - mu
    return -float(d @ d) / (2.0 * dt) + 0.5 * n * np.log1p(float(u @ u) / n)


def mala_block(jf, n, p, beta, dt, x0, normals, logu, center, q_low, q_high, use_region):
    """Run len(logu) MALA steps from x0, consuming pre-drawn noise.

    Returns (pos, energies, accepted, grad, energy) where pos[t] is the state
    after step t and (grad, energy) are the Euclidean gradient and energy at
    the final state (for chaining blocks without recomputation).
    """
    steps = normals.shape[0]
    nf = float(n)
    sqrtn = np.sqrt(nf)
    sqrt_dt = np.sqrt(dt)
    pos = np.empty((steps, n))
    energies = np.empty(steps)
    accepted = np.zeros(steps, dtype=bool)

    x = x0.copy()
    g, e = grad_energy(jf, n, p, x)
    for t in range(steps):
        gs = _spherical_grad(g, x, nf)
        mu = -0.5 * beta * dt * gs
        xi = normals[t]
        eta = xi - (float(xi @ x) / nf) * x
        u = mu + sqrt_dt * eta
        z = x + u
        y = z * (sqrtn / np.linalg.norm(z))

        ok = True
        if use_region:
            ry = float(y @ center) / nf
            ok = q_low <= ry <= q_high
        if ok:
            sxy = float(x @ y)
            ok = sxy > 0.0
        if ok:
            gy, ey = grad_energy(jf, n, p, y)
            ur = (nf / sxy) * x - y
            mur = -0.5 * beta * dt * _spherical_grad(gy, y, nf)
            la = (-beta * (ey - e)
                  + _mala_logq(ur, mur, dt, nf)
                  - _mala_logq(u, mu, dt, nf))
            if logu[t] < la:
                x, g, e = y, gy, ey
                accepted[t] = True
        pos[t] = x
        energies[t] = e
    return pos, energies, accepted, g, e


def langevin_block(jf, n, p, beta, dt, x0, normals):
    """Unadjusted projected Euler-Maruyama steps; returns (pos, energies)."""
    steps = normals.shape[0]
    nf = float(n)
    sqrtn = np.sqrt(nf)
    sqrt_dt = np.sqrt(dt)
    pos = np.empty((steps, n))
    energies = np.empty(steps)

    x = x0.copy()
    g, e = grad_energy(jf, n, p, x)
    for t in range(steps):
        gs = _spherical_grad(g, x, nf)
        xi = normals[t]
        eta = xi - (float(xi @ x) / nf) * x
        z = x - 0.5 * beta * dt * gs + sqrt_dt * eta
        x = z * (sqrtn / np.linalg.norm(z))
        g, e = grad_energy(jf, n, p, x)
        pos[t] = x
        energies[t] = e
    return pos, energies
