"""Compiled inner loops for Bellman sweeps over (grid knot, atom) pairs.

The kernels exploit the sell-down structure of the example models: the
feasible set is [0, x], the stage cost is quadratic in the decision with an
atom-dependent linear price term, and the continuation value is piecewise
linear in the decision. Each segment's minimum is then a clamped quadratic
vertex, and the minimum over [0, x_k] is a prefix minimum over segments, so
one left-to-right walk prices every knot for one atom in O(K).

Determinism: atom contributions are reduced in atom-insertion order with
Neumaier compensation, and parallelism only splits independent outputs
(atoms for the value table, exogenous knots for the 2-d sweep), so results
are bit-identical regardless of thread count.
"""

import math

import numpy as np

try:
    import numba
    from numba import njit, prange

    # workqueue is always present and keeps thread startup quiet; kernel
    # results are thread-count independent by construction either way
    numba.config.THREADING_LAYER = "workqueue"

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap

    prange = range


@njit(cache=True, parallel=True)
def sell_down_bvalues_1d(knots, vvals, beta, q2, q1, prices, out_val):
    """Fill out_val[i, k] with min_{0<=y<=x_k} {q2 y^2 + q1 y + p_i y + beta V(y)} - p_i x_k.

    Requires knots[0] == 0 so the prefix over segments covers [0, x_k]
    exactly; the caller checks this. Segment slopes and constants are shared
    across atoms, so the per-atom walk costs a handful of flops per segment.
    """
    n_knots = knots.shape[0]
    n_atoms = prices.shape[0]
    g_knot = np.empty(n_knots)
    lin0 = np.empty(n_knots - 1)
    const = np.empty(n_knots - 1)
    for k in range(n_knots):
        g_knot[k] = q2 * knots[k] * knots[k] + q1 * knots[k] + beta * vvals[k]
    for s in range(n_knots - 1):
        m = (vvals[s + 1] - vvals[s]) / (knots[s + 1] - knots[s])
        lin0[s] = q1 + beta * m
        const[s] = beta * (vvals[s] - m * knots[s])
    inv2q2 = 0.5 / q2 if q2 > 0.0 else 0.0
    for i in prange(n_atoms):
        p = prices[i]
        pref = g_knot[0] + p * knots[0]
        out_val[i, 0] = pref - p * knots[0]
        for s in range(n_knots - 1):
            b = knots[s + 1]
            segmin = g_knot[s + 1] + p * b
            if q2 > 0.0:
                lin = lin0[s] + p
                yv = -lin * inv2q2
                if knots[s] < yv < b:
                    gv = (q2 * yv + lin) * yv + const[s]
                    if gv < segmin:
                        segmin = gv
            if segmin < pref:
                pref = segmin
            out_val[i, s + 1] = pref - p * b


@njit(cache=True, parallel=True)
def reduce_weighted_columns(val, weights, out):
    """out[k] = sum_i weights[i] * val[i, k], compensated, in atom order."""
    n_atoms, n_knots = val.shape
    for k in prange(n_knots):
        total = 0.0
        comp = 0.0
        for i in range(n_atoms):
            term = weights[i] * val[i, k]
            t = total + term
            if abs(total) >= abs(term):
                comp += (total - t) + term
            else:
                comp += (term - t) + total
            total = t
        out[k] = total + comp


@njit(cache=True, parallel=True)
def sell_down_bellman_1d(knots, vvals, beta, q2, q1, prices, weights, out):
    """Fused sweep: out[k] = sum_i w_i b(x_k, p_i), compensated, atom order.

    Atoms are processed in fixed chunks whose value block stays cache
    resident; within a chunk the fill parallelizes over atoms and the
    reduction over knots, with per-knot accumulators carried across chunks so
    every output consumes atoms in exact insertion order (bit-identical to
    the two-pass kernels and independent of thread count).
    """
    n_knots = knots.shape[0]
    n_atoms = prices.shape[0]
    g_knot = np.empty(n_knots)
    lin0 = np.empty(n_knots - 1)
    const = np.empty(n_knots - 1)
    for k in range(n_knots):
        g_knot[k] = q2 * knots[k] * knots[k] + q1 * knots[k] + beta * vvals[k]
    for s in range(n_knots - 1):
        m = (vvals[s + 1] - vvals[s]) / (knots[s + 1] - knots[s])
        lin0[s] = q1 + beta * m
        const[s] = beta * (vvals[s] - m * knots[s])
    inv2q2 = 0.5 / q2 if q2 > 0.0 else 0.0

    chunk = 512
    block = np.empty((chunk, n_knots))
    acc = np.zeros(n_knots)
    comp = np.zeros(n_knots)
    for start in range(0, n_atoms, chunk):
        n_here = min(chunk, n_atoms - start)
        for ii in prange(n_here):
            p = prices[start + ii]
            pref = g_knot[0] + p * knots[0]
            block[ii, 0] = pref - p * knots[0]
            for s in range(n_knots - 1):
                b = knots[s + 1]
                segmin = g_knot[s + 1] + p * b
                if q2 > 0.0:
                    lin = lin0[s] + p
                    yv = -lin * inv2q2
                    if knots[s] < yv < b:
                        gv = (q2 * yv + lin) * yv + const[s]
                        if gv < segmin:
                            segmin = gv
                if segmin < pref:
                    pref = segmin
                block[ii, s + 1] = pref - p * b
        for k in prange(n_knots):
            total = acc[k]
            cp = comp[k]
            for ii in range(n_here):
                term = weights[start + ii] * block[ii, k]
                t = total + term
                if abs(total) >= abs(term):
                    cp += (total - t) + term
                else:
                    cp += (term - t) + total
                total = t
            acc[k] = total
            comp[k] = cp
    for k in range(n_knots):
        out[k] = acc[k] + comp[k]


@njit(cache=True, parallel=True)
def sell_down_bellman_1d_convex(knots, vvals, beta, q2, q1, prices, weights, out):
    """Bucketed sweep for convex continuation values: O(N log K + K).

    With V convex the objective g_p(y) = q2 y^2 + q1 y + p y + beta V(y) is
    convex, so min over [0, x_k] equals g_p(x_k) while x_k sits left of the
    unconstrained minimizer y*(p) and g_p(y*(p)) after it. Since
    g_p(x_k) - p x_k is atom-independent, each atom contributes only its
    threshold knot index, its minimum value, and its price; per-knot results
    assemble from compensated bucket prefix/suffix sums. Deterministic and
    thread-count independent (atoms fill independent slots in parallel, the
    bucket reduction is serial in atom order). Caller must verify convexity
    of ``vvals`` (exactly nondecreasing segment slopes) before using this.
    """
    n_knots = knots.shape[0]
    n_atoms = prices.shape[0]
    n_seg = n_knots - 1
    g_knot = np.empty(n_knots)
    lin0 = np.empty(n_seg)
    const = np.empty(n_seg)
    for k in range(n_knots):
        g_knot[k] = q2 * knots[k] * knots[k] + q1 * knots[k] + beta * vvals[k]
    for s in range(n_seg):
        m = (vvals[s + 1] - vvals[s]) / (knots[s + 1] - knots[s])
        lin0[s] = q1 + beta * m
        const[s] = beta * (vvals[s] - m * knots[s])
    inv2q2 = 0.5 / q2 if q2 > 0.0 else 0.0

    t_idx = np.empty(n_atoms, dtype=np.int64)
    vmin = np.empty(n_atoms)
    for i in prange(n_atoms):
        p = prices[i]
        # first segment whose right-end derivative is nonnegative
        lo = 0
        hi = n_seg  # n_seg means: decreasing across every segment
        while lo < hi:
            mid = (lo + hi) // 2
            if 2.0 * q2 * knots[mid + 1] + lin0[mid] + p >= 0.0:
                hi = mid
            else:
                lo = mid + 1
        if lo == n_seg:
            t_idx[i] = n_knots  # never flattens: b(x_k) = g_knot[k] everywhere
            vmin[i] = 0.0
        else:
            lin = lin0[lo] + p
            if q2 > 0.0:
                yv = -lin * inv2q2
                if yv < knots[lo]:
                    yv = knots[lo]
                elif yv > knots[lo + 1]:
                    yv = knots[lo + 1]
                vm = (q2 * yv + lin) * yv + const[lo]
            else:
                yv = knots[lo]
                vm = g_knot[lo] + p * knots[lo]
            # knots strictly left of y* keep the atom-independent value
            tl = 0
            th = n_knots
            while tl < th:
                mid = (tl + th) // 2
                if knots[mid] <= yv:
                    tl = mid + 1
                else:
                    th = mid
            t_idx[i] = tl
            vmin[i] = vm

    bw = np.zeros(n_knots + 1)
    bwc = np.zeros(n_knots + 1)
    bv = np.zeros(n_knots + 1)
    bvc = np.zeros(n_knots + 1)
    bp = np.zeros(n_knots + 1)
    bpc = np.zeros(n_knots + 1)
    for i in range(n_atoms):
        t = t_idx[i]
        w = weights[i]
        term = w
        tt = bw[t] + term
        if abs(bw[t]) >= abs(term):
            bwc[t] += (bw[t] - tt) + term
        else:
            bwc[t] += (term - tt) + bw[t]
        bw[t] = tt
        term = w * vmin[i]
        tt = bv[t] + term
        if abs(bv[t]) >= abs(term):
            bvc[t] += (bv[t] - tt) + term
        else:
            bvc[t] += (term - tt) + bv[t]
        bv[t] = tt
        term = w * prices[i]
        tt = bp[t] + term
        if abs(bp[t]) >= abs(term):
            bpc[t] += (bp[t] - tt) + term
        else:
            bpc[t] += (term - tt) + bp[t]
        bp[t] = tt

    # suffix weight of atoms still in their decreasing region at knot k,
    # prefix sums of settled minima and prices
    w_after = 0.0
    w_after_c = 0.0
    suffix_w = np.empty(n_knots + 1)
    for t in range(n_knots, -1, -1):
        term = bw[t] + bwc[t]
        tt = w_after + term
        if abs(w_after) >= abs(term):
            w_after_c += (w_after - tt) + term
        else:
            w_after_c += (term - tt) + w_after
        w_after = tt
        suffix_w[t] = w_after + w_after_c
    v_done = 0.0
    v_done_c = 0.0
    p_done = 0.0
    p_done_c = 0.0
    for k in range(n_knots):
        term = bv[k] + bvc[k]
        tt = v_done + term
        if abs(v_done) >= abs(term):
            v_done_c += (v_done - tt) + term
        else:
            v_done_c += (term - tt) + v_done
        v_done = tt
        term = bp[k] + bpc[k]
        tt = p_done + term
        if abs(p_done) >= abs(term):
            p_done_c += (p_done - tt) + term
        else:
            p_done_c += (term - tt) + p_done
        p_done = tt
        out[k] = (
            g_knot[k] * suffix_w[k + 1]
            + (v_done + v_done_c)
            - (p_done + p_done_c) * knots[k]
        )


@njit(cache=True)
def _cell_index(knots, value):
    """Index j with knots[j] <= value <= knots[j+1] (value already clipped)."""
    lo = 0
    hi = knots.shape[0] - 2
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if knots[mid] <= value:
            lo = mid
        else:
            hi = mid - 1
    return lo


@njit(cache=True, parallel=True)
def sell_down_bellman_2d(
    x_knots, ell_knots, vt, beta, q2, q1, alpha, xi, weights, out, clips
):
    """One Bellman sweep for the log-price model on a 2-d grid.

    vt is the value table transposed to (ell, x) so decision-axis walks are
    contiguous. For each (ell_j, atom_i): next log price eta = alpha*ell + xi,
    price exp(eta) uses the raw eta while the continuation slice interpolates
    at eta clipped to the grid (clips counts the excursions). Parallel over
    ell knots; atoms accumulate in order with Neumaier compensation.
    """
    n_x = x_knots.shape[0]
    n_ell = ell_knots.shape[0]
    n_atoms = xi.shape[0]
    lmin = ell_knots[0]
    lmax = ell_knots[n_ell - 1]
    for j in prange(n_ell):
        ell = ell_knots[j]
        acc = np.zeros(n_x)
        comp = np.zeros(n_x)
        nclip = 0
        for i in range(n_atoms):
            eta = alpha * ell + xi[i]
            price = math.exp(eta)
            etac = eta
            if etac < lmin:
                etac = lmin
                nclip += 1
            elif etac > lmax:
                etac = lmax
                nclip += 1
            jc = _cell_index(ell_knots, etac)
            th = (etac - ell_knots[jc]) / (ell_knots[jc + 1] - ell_knots[jc])
            c1 = q1 + price
            w = weights[i]

            va = (1.0 - th) * vt[jc, 0] + th * vt[jc + 1, 0]
            y0 = x_knots[0]
            pref = q2 * y0 * y0 + c1 * y0 + beta * va
            term = w * (pref - price * y0)
            t = acc[0] + term
            if abs(acc[0]) >= abs(term):
                comp[0] += (acc[0] - t) + term
            else:
                comp[0] += (term - t) + acc[0]
            acc[0] = t
            for s in range(n_x - 1):
                a = x_knots[s]
                b = x_knots[s + 1]
                vb = (1.0 - th) * vt[jc, s + 1] + th * vt[jc + 1, s + 1]
                m = (vb - va) / (b - a)
                lin = c1 + beta * m
                const = beta * (va - m * a)
                ga = q2 * a * a + lin * a + const
                gb = q2 * b * b + lin * b + const
                segmin = ga if ga < gb else gb
                if q2 > 0.0:
                    yv = -lin / (2.0 * q2)
                    if a < yv < b:
                        gv = q2 * yv * yv + lin * yv + const
                        if gv < segmin:
                            segmin = gv
                if segmin < pref:
                    pref = segmin
                term = w * (pref - price * b)
                t = acc[s + 1] + term
                if abs(acc[s + 1]) >= abs(term):
                    comp[s + 1] += (acc[s + 1] - t) + term
                else:
                    comp[s + 1] += (term - t) + acc[s + 1]
                acc[s + 1] = t
                va = vb
        for k in range(n_x):
            out[k, j] = acc[k] + comp[k]
        clips[j] = nclip
