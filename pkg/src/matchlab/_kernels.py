"""Compiled inner loops.

Each kernel mirrors a numpy reference elsewhere in the package
(``switching.run_episode``, ``oracle._exhaustive_py``) operation for
operation; tests hold the two paths to the same traces.
"""

import numpy as np

from ._accel import njit

SKIP = -1

# proposer modes
MODE_POLICY = 0
MODE_ADVERSARIAL = 1
MODE_SCRIPT = 2
MODE_RANDOM = 3

EXPERT_GREEDY = 0
EXPERT_OSM = 1


@njit
def _mlp_out(x, params, dims):
    """Network output per row of ``x``; layer ``l`` weights are stored (in, out) row-major."""
    a = x
    k = 0
    n_layers = dims.shape[0] - 1
    for l in range(n_layers):
        fi = dims[l]
        fo = dims[l + 1]
        wt = params[k:k + fi * fo].reshape((fi, fo))
        k += fi * fo
        b = params[k:k + fo]
        k += fo
        z = np.dot(a, wt) + b
        if l < n_layers - 1:
            z = np.maximum(z, 0.0)
        a = np.ascontiguousarray(z)
    return a[:, 0]


@njit
def _insert_top(tops, u, c, w):
    """Push ``w`` into the sorted top set of ``u`` (first ``c`` slots); returns the gain."""
    g = w - tops[u, 0]
    if g <= 0.0:
        return 0.0
    j = 0
    while j + 1 < c and tops[u, j + 1] < w:
        tops[u, j] = tops[u, j + 1]
        j += 1
    tops[u, j] = w
    return g


@njit
def _prefix_hedge(a, e, c):
    s = 0.0
    best = 0.0
    for j in range(c):
        s += a[j] - e[j]
        if s > best:
            best = s
    return best


@njit
def _prefix_hedge_tilde(a, e, c, w):
    """Prefix hedge of ``a`` with ``w`` inserted (dropping the smallest), against ``e``."""
    if w <= a[0]:
        return _prefix_hedge(a, e, c)
    tmp = np.empty(c)
    j = 0
    placed = False
    for i in range(1, c):
        if not placed and w <= a[i]:
            tmp[j] = w
            j += 1
            placed = True
        tmp[j] = a[i]
        j += 1
    if not placed:
        tmp[j] = w
    return _prefix_hedge(tmp, e, c)


@njit
def _nfd_hedge(counts, e_counts, caps_w, proposal):
    total = 0.0
    for u in range(counts.shape[0]):
        ex = counts[u] - e_counts[u]
        if u == proposal:
            ex += 1
        if ex > 0:
            total += ex * caps_w[u]
    return total


@njit
def _fd_hedge(tops, e_tops, caps, proposal, w):
    total = 0.0
    for u in range(caps.shape[0]):
        c = caps[u]
        if u == proposal:
            total += _prefix_hedge_tilde(tops[u], e_tops[u], c, w)
        else:
            total += _prefix_hedge(tops[u], e_tops[u], c)
    return total


@njit
def _rhs(r_pi, hedge, rho, b):
    if rho == 0.0:
        return -b
    return rho * (r_pi + hedge) - b


@njit
def episode_kernel(weights, caps, caps_w, fd, rho, b, expert_kind, mode, params, dims, script, uniforms):
    n_on = weights.shape[0]
    n_off = weights.shape[1]
    cmax = 1
    for u in range(n_off):
        if caps[u] > cmax:
            cmax = caps[u]

    counts = np.zeros(n_off, dtype=np.int64)
    e_counts = np.zeros(n_off, dtype=np.int64)
    tops = np.zeros((n_off, cmax))
    e_tops = np.zeros((n_off, cmax))
    reward = 0.0
    e_reward = 0.0
    phase = int(np.floor(n_on / np.e))
    threshold = 0.0

    # feature statistics
    seen_mean = np.zeros(n_off)
    seen_m2 = np.zeros(n_off)
    seen_pos = np.zeros(n_off)
    m_count = np.zeros(n_off)
    m_mean = np.zeros(n_off)
    m_m2 = np.zeros(n_off)
    m_max = np.zeros(n_off)
    m_min = np.zeros(n_off)
    skips = 0
    feats = np.empty((n_off, 14))

    proposals = np.empty(n_on, dtype=np.int64)
    expert_dec = np.empty(n_on, dtype=np.int64)
    decisions = np.empty(n_on, dtype=np.int64)
    conds = np.empty(n_on, dtype=np.bool_)
    rewards = np.empty(n_on)
    e_rewards = np.empty(n_on)
    hedges = np.empty(n_on)
    slacks = np.empty(n_on)
    counts_hist = np.empty((n_on, n_off), dtype=np.int64)
    e_counts_hist = np.empty((n_on, n_off), dtype=np.int64)

    for v in range(n_on):
        row = weights[v]

        # expert on its shadow ledger
        x_pi = SKIP
        if expert_kind == EXPERT_GREEDY:
            if not fd:
                best = -np.inf
                for u in range(n_off):
                    if e_counts[u] < caps[u] and row[u] > best:
                        best = row[u]
                        x_pi = u
                if x_pi != SKIP and not best > 0.0:
                    x_pi = SKIP
            else:
                best_g = -1.0
                best_w = -1.0
                for u in range(n_off):
                    g = row[u] - e_tops[u, 0]
                    if g < 0.0:
                        g = 0.0
                    if g > best_g or (g == best_g and row[u] > best_w):
                        x_pi = u
                        best_g = g
                        best_w = row[u]
                if best_g <= 0.0 and best_w <= 0.0:
                    x_pi = SKIP
        else:
            if v + 1 <= phase:
                for u in range(n_off):
                    if row[u] > threshold:
                        threshold = row[u]
            else:
                best = -np.inf
                for u in range(n_off):
                    if (fd or e_counts[u] < caps[u]) and row[u] > best:
                        best = row[u]
                        x_pi = u
                if x_pi != SKIP and not best > threshold:
                    x_pi = SKIP
        if x_pi != SKIP:
            if fd:
                e_reward += _insert_top(e_tops, x_pi, caps[x_pi], row[x_pi])
            else:
                e_reward += row[x_pi]
            e_counts[x_pi] += 1

        # proposal
        prop = SKIP
        if mode == MODE_POLICY:
            past = v
            npos = 0
            nfull = 0
            for u in range(n_off):
                if row[u] > 0.0:
                    npos += 1
                if counts[u] >= caps[u]:
                    nfull += 1
            for u in range(n_off):
                feats[u, 0] = row[u]
                rem = caps[u] - counts[u]
                feats[u, 1] = (rem if rem > 0 else 0) / caps[u]
                feats[u, 2] = seen_mean[u]
                feats[u, 3] = seen_m2[u] / past if past else 0.0
                feats[u, 4] = seen_pos[u] / past if past else 0.0
                feats[u, 5] = (past + 1) / n_on
                feats[u, 6] = npos / n_off
                feats[u, 7] = m_max[u]
                feats[u, 8] = m_min[u]
                feats[u, 9] = m_mean[u]
                feats[u, 10] = m_m2[u] / m_count[u] if m_count[u] > 0 else 0.0
                feats[u, 11] = nfull / n_off
                feats[u, 12] = skips / past if past else 0.0
                feats[u, 13] = reward / n_off
            h = _mlp_out(feats, params, dims)
            best = -np.inf
            for u in range(n_off):
                if fd or counts[u] < caps[u]:
                    s = row[u] - h[u]
                    if not np.isfinite(s):
                        raise ArithmeticError("non-finite score")
                    if s > best:
                        best = s
                        prop = u
            if prop != SKIP and not best > 0.0:
                prop = SKIP
        elif mode == MODE_ADVERSARIAL:
            best = np.inf
            for u in range(n_off):
                if (fd or counts[u] < caps[u]) and row[u] > 0.0 and row[u] < best:
                    best = row[u]
                    prop = u
        elif mode == MODE_SCRIPT:
            if v < script.shape[0]:
                prop = script[v]
        else:
            m = 0
            for u in range(n_off):
                if fd or counts[u] < caps[u]:
                    m += 1
            k = int(uniforms[v] * (m + 1))
            if k > m:
                k = m
            if k < m:
                for u in range(n_off):
                    if fd or counts[u] < caps[u]:
                        if k == 0:
                            prop = u
                            break
                        k -= 1
        if prop != SKIP and not fd and counts[prop] >= caps[prop]:
            prop = SKIP

        # switching test
        if fd:
            gain = 0.0
            if prop != SKIP:
                gain = row[prop] - tops[prop, 0]
                if gain < 0.0:
                    gain = 0.0
            hedge = _fd_hedge(tops, e_tops, caps, prop, row[prop] if prop != SKIP else 0.0)
        else:
            gain = row[prop] if prop != SKIP else 0.0
            hedge = _nfd_hedge(counts, e_counts, caps_w, prop)
        ok = True
        if rho != 0.0:
            ok = reward + gain - _rhs(e_reward, hedge, rho, b) >= -1e-9
        if ok:
            x = prop
        elif fd or x_pi == SKIP or counts[x_pi] < caps[x_pi]:
            x = x_pi
        else:
            x = SKIP

        # apply to the actual ledger and the feature statistics
        if x != SKIP:
            if fd:
                reward += _insert_top(tops, x, caps[x], row[x])
            else:
                reward += row[x]
            counts[x] += 1
        k1 = v + 1
        for u in range(n_off):
            d = row[u] - seen_mean[u]
            seen_mean[u] += d / k1
            seen_m2[u] += d * (row[u] - seen_mean[u])
            if row[u] > 0.0:
                seen_pos[u] += 1.0
        if x == SKIP:
            skips += 1
        else:
            w = row[x]
            c = m_count[x] + 1
            if c == 1:
                m_max[x] = w
                m_min[x] = w
            else:
                m_max[x] = max(m_max[x], w)
                m_min[x] = min(m_min[x], w)
            d = w - m_mean[x]
            m_mean[x] += d / c
            m_m2[x] += d * (w - m_mean[x])
            m_count[x] = c

        if fd:
            rest = _fd_hedge(tops, e_tops, caps, SKIP, 0.0)
        else:
            rest = _nfd_hedge(counts, e_counts, caps_w, SKIP)

        proposals[v] = prop
        expert_dec[v] = x_pi
        decisions[v] = x
        conds[v] = ok
        rewards[v] = reward
        e_rewards[v] = e_reward
        hedges[v] = hedge
        slacks[v] = reward - _rhs(e_reward, rest, rho, b)
        counts_hist[v] = counts
        e_counts_hist[v] = e_counts

    return (proposals, expert_dec, decisions, conds, rewards, e_rewards, hedges, slacks,
            counts_hist, e_counts_hist, reward, e_reward)


@njit
def exhaustive_kernel(weights, caps):
    """Best total weight over all capacity-feasible assignments (DFS with bound)."""
    n_on = weights.shape[0]
    n_off = weights.shape[1]
    # suffix bound: sum of row maxima of the remaining arrivals
    row_max = np.zeros(n_on + 1)
    for v in range(n_on - 1, -1, -1):
        m = 0.0
        for u in range(n_off):
            if weights[v, u] > m:
                m = weights[v, u]
        row_max[v] = row_max[v + 1] + m

    remaining = caps.copy()
    choice = np.full(n_on, -1, dtype=np.int64)
    best_choice = np.full(n_on, -1, dtype=np.int64)
    best = 0.0
    value = 0.0
    # explicit stack: next option to try at each depth (0..n_off-1, n_off = skip, n_off+1 = done)
    nxt = np.zeros(n_on + 1, dtype=np.int64)
    depth = 0
    while depth >= 0:
        if depth == n_on:
            if value > best:
                best = value
                best_choice[:] = choice
            depth -= 1
            if depth >= 0:
                u = choice[depth]
                if u >= 0:
                    value -= weights[depth, u]
                    remaining[u] += 1
            continue
        opt = nxt[depth]
        if opt == 0 and value + row_max[depth] <= best:
            opt = n_off + 1  # cannot beat the incumbent
        if opt > n_off:
            nxt[depth] = 0
            depth -= 1
            if depth >= 0:
                u = choice[depth]
                if u >= 0:
                    value -= weights[depth, u]
                    remaining[u] += 1
            continue
        nxt[depth] = opt + 1
        if opt < n_off:
            if remaining[opt] == 0 or weights[depth, opt] <= 0.0:
                continue
            choice[depth] = opt
            remaining[opt] -= 1
            value += weights[depth, opt]
        else:
            choice[depth] = -1
        depth += 1
        nxt[depth] = 0
    return best, best_choice
