"""Compiled batch kernels for candidate evaluation during rule refinement.

Each kernel scores a batch of candidates given their accumulated statistics
(rows of gradient vectors and packed Hessians) together with the totals over
the currently covered examples; the complement candidate of every row is
evaluated from the totals in the same pass.  Systems are solved by an
in-place Cholesky factorization: the Hessian of a convex loss plus a positive
L2 diagonal is positive definite, and rows where the factorization breaks
down are flagged with NaN so the caller can fall back to the pivoting solver.

The binning logic mirrors `mlrules.binning` and must stay in lockstep with
it; the test suite cross-checks both paths on random batches.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def grouped_prefix(data, row_order, group_starts):
    """Running sums of `data` rows, visited in `row_order`, emitted per group.

    Row `g` of the result is the sum of all data rows belonging to groups
    0..g; groups are the index ranges [group_starts[g], group_starts[g+1]).
    """
    n_groups = group_starts.shape[0]
    total_rows = row_order.shape[0]
    width = data.shape[1]
    out = np.empty((n_groups, width))
    acc = np.zeros(width)
    for g in range(n_groups):
        start = group_starts[g]
        end = group_starts[g + 1] if g + 1 < n_groups else total_rows
        for j in range(start, end):
            row = row_order[j]
            for p in range(width):
                acc[p] += data[row, p]
        for p in range(width):
            out[g, p] = acc[p]
    return out


@njit(cache=True, nogil=True)
def _cholesky_solve(mat, rhs, out, order):
    """Factor `mat[:order,:order]` (lower) in place and solve into `out`.

    Returns False if a pivot is not strictly positive.
    """
    for k in range(order):
        s = mat[k, k]
        for j in range(k):
            s -= mat[k, j] * mat[k, j]
        if s <= 0.0:
            return False
        d = np.sqrt(s)
        mat[k, k] = d
        for r in range(k + 1, order):
            t = mat[r, k]
            for j in range(k):
                t -= mat[r, j] * mat[k, j]
            mat[r, k] = t / d
    for i in range(order):
        s = rhs[i]
        for j in range(i):
            s -= mat[i, j] * out[j]
        out[i] = s / mat[i, i]
    for i in range(order - 1, -1, -1):
        s = out[i]
        for j in range(i + 1, order):
            s -= mat[j, i] * out[j]
        out[i] = s / mat[i, i]
    return True


@njit(cache=True, nogil=True)
def eval_pairs_full(g_rows, h_rows, g_total, h_total, rows, cols, l2_weight):
    """Quality of every candidate row and of its complement, unbinned.

    For each row i the candidate statistics are (g_rows[i], h_rows[i]) and the
    complement statistics are the totals minus the row.  Returns two arrays of
    quality scores; NaN marks a failed factorization.
    """
    n, label_count = g_rows.shape
    packed = h_rows.shape[1]
    quality_in = np.empty(n)
    quality_out = np.empty(n)
    mat = np.empty((label_count, label_count))
    g = np.empty(label_count)
    h = np.empty(packed)
    phat = np.empty(label_count)
    hp = np.empty(label_count)
    for i in range(n):
        for side in range(2):
            if side == 0:
                for l in range(label_count):
                    g[l] = g_rows[i, l]
                for p in range(packed):
                    h[p] = h_rows[i, p]
            else:
                for l in range(label_count):
                    g[l] = g_total[l] - g_rows[i, l]
                for p in range(packed):
                    h[p] = h_total[p] - h_rows[i, p]
            for p in range(packed):
                r = rows[p]
                c = cols[p]
                mat[r, c] = h[p]
            for l in range(label_count):
                mat[l, l] += l2_weight
                g[l] = -g[l]
            solved = _cholesky_solve(mat, g, phat, label_count)
            for l in range(label_count):
                g[l] = -g[l]
            if not solved:
                q = np.nan
            else:
                for l in range(label_count):
                    hp[l] = 0.0
                for p in range(packed):
                    r = rows[p]
                    c = cols[p]
                    hp[r] += h[p] * phat[c]
                    if r != c:
                        hp[c] += h[p] * phat[r]
                q = 0.0
                for l in range(label_count):
                    q += phat[l] * g[l] + 0.5 * phat[l] * hp[l]
            if side == 0:
                quality_in[i] = q
            else:
                quality_out[i] = q
    return quality_in, quality_out


@njit(cache=True, nogil=True)
def _binned_quality(g, h_diag, h, rows, cols, l2_weight, total_bins, singleton,
                    crit, assignment, values, sizes, agg_g, agg_h, solution):
    """Criteria, equal-width sign-separated mapping, aggregation and reduced solve
    for one candidate; scratch arrays are supplied by the caller."""
    label_count = g.shape[0]
    packed = h.shape[0]
    n_neg = 0
    n_pos = 0
    for l in range(label_count):
        c = -g[l] / (h_diag[l] + l2_weight)
        crit[l] = c
        if c < 0.0:
            n_neg += 1
        elif c > 0.0:
            n_pos += 1
    if n_neg + n_pos == 0:
        return 0.0
    if singleton:
        # one bin per non-zero label, in ascending criterion order
        k = 0
        for l in range(label_count):
            if crit[l] != 0.0:
                values[k] = crit[l]
                assignment[l] = k  # provisional: position among non-zero labels
                k += 1
            else:
                assignment[l] = -1
        order = np.argsort(values[:k], kind="mergesort")
        rank = np.empty(k, dtype=np.int64)
        for r in range(k):
            rank[order[r]] = r
        for l in range(label_count):
            if assignment[l] >= 0:
                assignment[l] = rank[assignment[l]]
        m_used = k
        for b in range(m_used):
            sizes[b] = 1
    else:
        # split the budget across signs, each occurring sign getting >= 1 bin
        if n_neg == 0:
            m_neg = 0
            m_pos = total_bins
        elif n_pos == 0:
            m_neg = total_bins
            m_pos = 0
        else:
            total = total_bins if total_bins >= 2 else 2
            m_neg = int(np.round(total * n_neg / (n_neg + n_pos)))
            if m_neg < 1:
                m_neg = 1
            if m_neg > total - 1:
                m_neg = total - 1
            m_pos = total - m_neg
        neg_min = 0.0
        neg_width = 0.0
        if n_neg > 0:
            k = 0
            for l in range(label_count):
                if crit[l] < 0.0:
                    values[k] = crit[l]
                    k += 1
            sub = np.sort(values[:n_neg])
            distinct = 1
            for j in range(1, n_neg):
                if sub[j] != sub[j - 1]:
                    distinct += 1
            if m_neg > distinct:
                m_neg = distinct
            neg_min = sub[0]
            neg_width = (sub[n_neg - 1] - sub[0]) / m_neg
        pos_min = 0.0
        pos_width = 0.0
        if n_pos > 0:
            k = 0
            for l in range(label_count):
                if crit[l] > 0.0:
                    values[k] = crit[l]
                    k += 1
            sub = np.sort(values[:n_pos])
            distinct = 1
            for j in range(1, n_pos):
                if sub[j] != sub[j - 1]:
                    distinct += 1
            if m_pos > distinct:
                m_pos = distinct
            pos_min = sub[0]
            pos_width = (sub[n_pos - 1] - sub[0]) / m_pos
        m = m_neg + m_pos
        for k in range(m):
            sizes[k] = 0
        for l in range(label_count):
            c = crit[l]
            if c < 0.0:
                if neg_width > 0.0:
                    b = int(np.floor((c - neg_min) / neg_width)) + 1
                    if b > m_neg:
                        b = m_neg
                else:
                    b = 1
                assignment[l] = b - 1
            elif c > 0.0:
                if pos_width > 0.0:
                    b = int(np.floor((c - pos_min) / pos_width)) + 1
                    if b > m_pos:
                        b = m_pos
                else:
                    b = 1
                assignment[l] = m_neg + b - 1
            else:
                assignment[l] = -1
        for l in range(label_count):
            if assignment[l] >= 0:
                sizes[assignment[l]] += 1
        # drop empty bins, remapping assignments to compact indices
        m_used = 0
        for k in range(m):
            if sizes[k] > 0:
                sizes[m_used] = sizes[k]
                for l in range(label_count):
                    if assignment[l] == k:
                        assignment[l] = m_used
                m_used += 1
    # aggregate gradients and Hessian blocks
    for k in range(m_used):
        agg_g[k] = 0.0
        for q in range(m_used):
            agg_h[k, q] = 0.0
    for l in range(label_count):
        b = assignment[l]
        if b >= 0:
            agg_g[b] += g[l]
    for p in range(packed):
        br = assignment[rows[p]]
        bc = assignment[cols[p]]
        if br < 0 or bc < 0:
            continue
        v = h[p]
        if rows[p] == cols[p]:
            agg_h[br, br] += v
        elif br == bc:
            agg_h[br, br] += 2.0 * v
        else:
            agg_h[br, bc] += v
            agg_h[bc, br] += v
    mat = np.empty((m_used, m_used))
    rhs = np.empty(m_used)
    for k in range(m_used):
        for q in range(m_used):
            mat[k, q] = agg_h[k, q]
        mat[k, k] += l2_weight * sizes[k]
        rhs[k] = -agg_g[k]
    if not _cholesky_solve(mat, rhs, solution, m_used):
        return np.nan
    quality = 0.0
    for k in range(m_used):
        s = 0.0
        for q in range(m_used):
            s += agg_h[k, q] * solution[q]
        quality += solution[k] * agg_g[k] + 0.5 * solution[k] * s
    return quality


@njit(cache=True, nogil=True)
def eval_pairs_binned(g_rows, h_rows, g_total, h_total, rows, cols, diag,
                      l2_weight, total_bins, singleton):
    """Binned counterpart of eval_pairs_full: per-candidate label binning,
    aggregation, and reduced solve for every row and its complement."""
    n, label_count = g_rows.shape
    packed = h_rows.shape[1]
    quality_in = np.empty(n)
    quality_out = np.empty(n)
    g = np.empty(label_count)
    h = np.empty(packed)
    h_diag = np.empty(label_count)
    crit = np.empty(label_count)
    assignment = np.empty(label_count, dtype=np.int64)
    values = np.empty(label_count)
    bin_cap = max(total_bins, 2)
    sizes = np.empty(bin_cap, dtype=np.int64)
    agg_g = np.empty(bin_cap)
    agg_h = np.empty((bin_cap, bin_cap))
    solution = np.empty(bin_cap)
    for i in range(n):
        for side in range(2):
            if side == 0:
                for l in range(label_count):
                    g[l] = g_rows[i, l]
                for p in range(packed):
                    h[p] = h_rows[i, p]
            else:
                for l in range(label_count):
                    g[l] = g_total[l] - g_rows[i, l]
                for p in range(packed):
                    h[p] = h_total[p] - h_rows[i, p]
            for l in range(label_count):
                h_diag[l] = h[diag[l]]
            q = _binned_quality(g, h_diag, h, rows, cols, l2_weight, total_bins,
                                singleton, crit, assignment, values, sizes,
                                agg_g, agg_h, solution)
            if side == 0:
                quality_in[i] = q
            else:
                quality_out[i] = q
    return quality_in, quality_out


def warm_up():
    """Trigger compilation of the kernels on a tiny problem."""
    rows = np.array([0, 1, 1], dtype=np.int64)
    cols = np.array([0, 0, 1], dtype=np.int64)
    diag = np.array([0, 2], dtype=np.int64)
    g = np.array([[-0.3, 0.2]])
    h = np.array([[0.2, 0.05, 0.2]])
    eval_pairs_full(g, h, g[0] * 2, h[0] * 2, rows, cols, 1.0)
    eval_pairs_binned(g, h, g[0] * 2, h[0] * 2, rows, cols, diag, 1.0, 2, False)
    eval_pairs_binned(g, h, g[0] * 2, h[0] * 2, rows, cols, diag, 1.0, 2, True)
    grouped_prefix(h, np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64))
