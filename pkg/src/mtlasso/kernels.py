"""Hot numeric kernels for the block-regularized solvers.

Everything here works on plain float64 arrays in task-major layout:
XT is (K, p, n) with contiguous feature columns, Y is (K, n), and
coefficients are (K, p) so that per-task slices stay contiguous.  The
functions are written to compile under numba's nopython mode and to run
unchanged as vectorized numpy (see backend.py).
"""

import numpy as np

from .backend import jit


@jit
def row_minimizer(c, d, lam, u):
    """Minimize sum_k [0.5*d_k*u_k^2 - c_k*u_k] + lam*||u||_2 over u.

    Fills u in place and returns t = ||u||_2.  The minimizer is zero iff
    ||c||_2 <= lam; otherwise u_k = c_k*t/(d_k*t + lam) where t solves
    sum_k c_k^2/(d_k*t + lam)^2 = 1, found by safeguarded Newton.
    """
    K = c.shape[0]
    cn = np.sqrt(np.dot(c, c))
    if cn <= lam:
        for k in range(K):
            u[k] = 0.0
        return 0.0
    dmin = np.inf
    dmax = 0.0
    for k in range(K):
        if d[k] > dmax:
            dmax = d[k]
        if d[k] < dmin:
            dmin = d[k]
    if dmax <= 0.0:
        # all-zero design columns imply c == 0, handled above; guard anyway
        for k in range(K):
            u[k] = 0.0
        return 0.0
    if dmax - dmin <= 1e-14 * dmax:
        coef = (1.0 - lam / cn) / dmax
        for k in range(K):
            u[k] = coef * c[k]
        return coef * cn
    # curvature differs across tasks: 1-D root find in t = ||u||_2
    lo = (cn - lam) / dmax
    hi = (cn - lam) / dmin if dmin > 0.0 else np.inf
    if not np.isfinite(hi):
        # zero-curvature tasks carry c_k == 0 and drop out of the sum
        hi = lo
        g = 0.0
        while True:
            hi = 2.0 * hi + 1e-12
            g = -1.0
            for k in range(K):
                if c[k] != 0.0:
                    w = c[k] / (d[k] * hi + lam)
                    g += w * w
            if g <= 0.0:
                break
    t = lo
    for _ in range(200):
        g = -1.0
        gp = 0.0
        for k in range(K):
            if c[k] != 0.0:
                den = d[k] * t + lam
                w = c[k] / den
                g += w * w
                gp -= 2.0 * w * w * d[k] / den
        if g > 0.0:
            if t > lo:
                lo = t
        else:
            if t < hi:
                hi = t
        tn = t - g / gp
        if tn <= lo or tn >= hi:
            tn = 0.5 * (lo + hi)
        if abs(tn - t) <= 1e-12 * (1.0 + abs(t)):
            t = tn
            break
        t = tn
    for k in range(K):
        u[k] = c[k] * t / (d[k] * t + lam)
    return t


@jit
def objective_value(R, BT, lam, n):
    """Objective from maintained residuals: rss/(2n) + lam*sum_j ||B_j||."""
    K = R.shape[0]
    p = BT.shape[1]
    rss = 0.0
    for k in range(K):
        rss += np.dot(R[k], R[k])
    pen = 0.0
    for j in range(p):
        t = 0.0
        for k in range(K):
            t += BT[k, j] * BT[k, j]
        pen += np.sqrt(t)
    return rss / (2.0 * n) + lam * pen


@jit
def kkt_max_violation(XT, R, BT, lam):
    """Max row-wise l2 violation of stationarity, from residuals."""
    K, p, n = XT.shape
    worst = 0.0
    for j in range(p):
        bn = 0.0
        for k in range(K):
            bn += BT[k, j] * BT[k, j]
        bn = np.sqrt(bn)
        acc = 0.0
        if bn > 0.0:
            for k in range(K):
                g = -np.dot(XT[k, j], R[k]) / n
                v = g + lam * BT[k, j] / bn
                acc += v * v
            viol = np.sqrt(acc)
        else:
            for k in range(K):
                g = -np.dot(XT[k, j], R[k]) / n
                acc += g * g
            gn = np.sqrt(acc)
            viol = gn - lam if gn > lam else 0.0
        if viol > worst:
            worst = viol
    return worst


@jit
def _sweep(XT, R, BT, d, lam, active, c, u, full):
    """One coordinate-descent pass; rows outside the active set are
    skipped unless full.  Returns the max pre-update KKT violation over
    the rows visited and refreshes their active flags."""
    K, p, n = XT.shape
    worst = 0.0
    for j in range(p):
        if not full and not active[j]:
            continue
        bn = 0.0
        for k in range(K):
            c[k] = np.dot(XT[k, j], R[k]) / n + d[k, j] * BT[k, j]
            bn += BT[k, j] * BT[k, j]
        bn = np.sqrt(bn)
        if bn > 0.0:
            acc = 0.0
            for k in range(K):
                g = d[k, j] * BT[k, j] - c[k]
                v = g + lam * BT[k, j] / bn
                acc += v * v
            viol = np.sqrt(acc)
        else:
            acc = 0.0
            for k in range(K):
                acc += c[k] * c[k]
            cn = np.sqrt(acc)
            viol = cn - lam if cn > lam else 0.0
        if viol > worst:
            worst = viol
        row_minimizer(c, d[:, j], lam, u)
        nz = False
        for k in range(K):
            diff = BT[k, j] - u[k]
            if diff != 0.0:
                R[k] += XT[k, j] * diff
                BT[k, j] = u[k]
            if u[k] != 0.0:
                nz = True
        active[j] = nz
    return worst


@jit
def bcd_solve(XT, Y, BT0, lam, tol, max_sweeps):
    """Block coordinate descent with an active-set schedule.

    Cycles rows 0..p-1; between full passes it iterates on the currently
    nonzero rows only.  Convergence is declared when the exact KKT
    residual (recomputed from residuals) is <= tol.  Returns
    (BT, sweeps, kkt, converged, objective_trace, trace_len) where the
    trace holds the objective after each pass (index 0 = initial point).
    """
    K, p, n = XT.shape
    BT = BT0.copy()
    d = np.empty((K, p))
    for k in range(K):
        for j in range(p):
            d[k, j] = np.dot(XT[k, j], XT[k, j]) / n
    R = Y.copy()
    active = np.zeros(p, np.bool_)
    for j in range(p):
        nz = False
        for k in range(K):
            if BT[k, j] != 0.0:
                R[k] -= XT[k, j] * BT[k, j]
                nz = True
        active[j] = nz
    c = np.empty(K)
    u = np.empty(K)
    trace = np.empty(max_sweeps + 1)
    trace[0] = objective_value(R, BT, lam, n)
    sweeps = 0
    converged = False
    kkt = np.inf
    while sweeps < max_sweeps:
        stag = _sweep(XT, R, BT, d, lam, active, c, u, True)
        sweeps += 1
        trace[sweeps] = objective_value(R, BT, lam, n)
        if stag <= tol:
            kkt = kkt_max_violation(XT, R, BT, lam)
            if kkt <= tol:
                converged = True
                break
        while sweeps < max_sweeps:
            stag = _sweep(XT, R, BT, d, lam, active, c, u, False)
            sweeps += 1
            trace[sweeps] = objective_value(R, BT, lam, n)
            if stag <= tol:
                break
    if not converged:
        kkt = kkt_max_violation(XT, R, BT, lam)
        if kkt <= tol:
            converged = True
    return BT, sweeps, kkt, converged, trace, sweeps + 1


@jit
def pg_solve(XT, Y, BT0, lam, tol, max_iters, step):
    """Proximal gradient: full gradient step then row-wise block soft
    threshold with threshold lam*step.  Returns the same tuple layout as
    bcd_solve with iterations = number of proximal steps taken."""
    K, p, n = XT.shape
    BT = BT0.copy()
    R = np.empty_like(Y)
    G = np.empty((K, p))
    v = np.empty(K)
    trace = np.empty(max_iters + 1)
    iters = 0
    converged = False
    kkt = np.inf
    thr = lam * step
    while True:
        for k in range(K):
            R[k] = Y[k] - np.dot(BT[k], XT[k])
            G[k] = -np.dot(XT[k], R[k]) / n
        trace[iters] = objective_value(R, BT, lam, n)
        worst = 0.0
        for j in range(p):
            bn = 0.0
            for k in range(K):
                bn += BT[k, j] * BT[k, j]
            bn = np.sqrt(bn)
            acc = 0.0
            if bn > 0.0:
                for k in range(K):
                    w = G[k, j] + lam * BT[k, j] / bn
                    acc += w * w
                viol = np.sqrt(acc)
            else:
                for k in range(K):
                    acc += G[k, j] * G[k, j]
                gn = np.sqrt(acc)
                viol = gn - lam if gn > lam else 0.0
            if viol > worst:
                worst = viol
        kkt = worst
        if kkt <= tol:
            converged = True
            break
        if iters >= max_iters:
            break
        for j in range(p):
            vn = 0.0
            for k in range(K):
                v[k] = BT[k, j] - step * G[k, j]
                vn += v[k] * v[k]
            vn = np.sqrt(vn)
            if vn <= thr:
                for k in range(K):
                    BT[k, j] = 0.0
            else:
                coef = 1.0 - thr / vn
                for k in range(K):
                    BT[k, j] = coef * v[k]
        iters += 1
    return BT, iters, kkt, converged, trace, iters + 1
