"""Compiled inner loops: union-find labelling, Monte Carlo sweeps, enumeration.

Graphs reach these kernels as flat arrays.  ``eu[e] -> ev[e]`` is edge ``e``;
``eaxis[e]`` is the lattice axis it steps along (+1 in that coordinate), or -1
for edges without a displacement (edges to the ghost vertex).  ``frozen`` lists
vertices permanently linked to the ghost (wired boundary).  ``ghost`` is the
ghost's index or -1.
"""
import numba as nb
import numpy as np

# observable codes understood by ``measure``
OBS_CONNECT = 0
OBS_TWO_POINT_SPIN = 1
OBS_WRAPPING = 2
OBS_MAGNETIZATION = 3
OBS_TRUNCATED = 4
OBS_CLUSTER_FRACTION = 5
OBS_CONFIGURATION = 6

ALG_SW = 0
ALG_CM = 1
ALG_HB = 2


@nb.njit(cache=True)
def find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@nb.njit(cache=True)
def union(parent, size, a, b):
    ra = find(parent, a)
    rb = find(parent, b)
    if ra == rb:
        return ra
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]
    return ra


@nb.njit(cache=True)
def find_offset(parent, off, x, acc):
    # acc <- pos(x) - pos(root), halving the path as we go
    d = off.shape[1]
    for j in range(d):
        acc[j] = 0
    while parent[x] != x:
        p = parent[x]
        gp = parent[p]
        if gp != p:
            for j in range(d):
                off[x, j] += off[p, j]
            parent[x] = gp
        for j in range(d):
            acc[j] += off[x, j]
        x = parent[x]
    return x


@nb.njit(cache=True)
def label(n_total, eu, ev, eaxis, omega, frozen, ghost, track, parent, size, off, wrap, acc_u, acc_v):
    """Union-find over open edges; with ``track`` also record winding per root."""
    d = off.shape[1]
    for i in range(n_total):
        parent[i] = i
        size[i] = 1
    if track:
        for i in range(n_total):
            for j in range(d):
                off[i, j] = 0
                wrap[i, j] = False
    if ghost >= 0:
        for f in frozen:
            union(parent, size, ghost, f)
    for e in range(eu.shape[0]):
        if not omega[e]:
            continue
        u = eu[e]
        v = ev[e]
        if not track:
            union(parent, size, u, v)
            continue
        a = eaxis[e]
        ru = find_offset(parent, off, u, acc_u)
        rv = find_offset(parent, off, v, acc_v)
        if a >= 0:
            acc_u[a] += 1
        if ru == rv:
            for j in range(d):
                if acc_u[j] != acc_v[j]:
                    wrap[ru, j] = True
            continue
        # pos(v) = pos(u) + delta, acc_u already includes delta
        if size[ru] >= size[rv]:
            parent[rv] = ru
            size[ru] += size[rv]
            for j in range(d):
                off[rv, j] = acc_u[j] - acc_v[j]
                wrap[ru, j] = wrap[ru, j] or wrap[rv, j]
        else:
            parent[ru] = rv
            size[rv] += size[ru]
            for j in range(d):
                off[ru, j] = acc_v[j] - acc_u[j]
                wrap[rv, j] = wrap[rv, j] or wrap[ru, j]


@nb.njit(cache=True)
def roots_of(n_total, parent, roots):
    for x in range(n_total):
        roots[x] = find(parent, x)


@nb.njit(cache=True)
def sw_bond_phase(rng, eu, ev, spins, p, omega):
    for e in range(eu.shape[0]):
        omega[e] = spins[eu[e]] == spins[ev[e]] and rng.random() < p


@nb.njit(cache=True)
def sw_recolor(rng, n_total, ghost, b, q, parent, roots, newcol, spins):
    roots_of(n_total, parent, roots)
    for x in range(n_total):
        newcol[x] = -1
    if ghost >= 0:
        newcol[roots[ghost]] = b
    for x in range(n_total):
        r = roots[x]
        if newcol[r] < 0:
            c = int(rng.random() * q)
            if c >= q:
                c = q - 1
            newcol[r] = c
        spins[x] = newcol[r]


@nb.njit(cache=True)
def cm_update(rng, n_total, eu, ev, q, p, parent, roots, active, omega):
    roots_of(n_total, parent, roots)
    for x in range(n_total):
        active[x] = -1
    inv_q = 1.0 / q
    for x in range(n_total):
        r = roots[x]
        if active[r] < 0:
            active[r] = 1 if rng.random() < inv_q else 0
    for e in range(eu.shape[0]):
        if active[roots[eu[e]]] == 1 and active[roots[ev[e]]] == 1:
            omega[e] = rng.random() < p


@nb.njit(cache=True)
def connected_without(u, v, indptr, nbr, eid, omega, stamp, mark, queue):
    """Is ``v`` reachable from ``u`` through open edges (eid < 0 means always open)?"""
    if u == v:
        return True
    mark[u] = stamp
    head = 0
    tail = 0
    queue[tail] = u
    tail += 1
    while head < tail:
        x = queue[head]
        head += 1
        for k in range(indptr[x], indptr[x + 1]):
            e = eid[k]
            if e >= 0 and not omega[e]:
                continue
            y = nbr[k]
            if mark[y] == stamp:
                continue
            if y == v:
                return True
            mark[y] = stamp
            queue[tail] = y
            tail += 1
    return False


@nb.njit(cache=True)
def hb_update(rng, e, eu, ev, q, p, indptr, nbr, eid, omega, mark, queue, stamp):
    omega[e] = False
    if connected_without(eu[e], ev[e], indptr, nbr, eid, omega, stamp, mark, queue):
        prob = p
    else:
        prob = p / (p + q * (1.0 - p))
    omega[e] = rng.random() < prob


@nb.njit(cache=True)
def measure(codes, args, n, n_total, ghost, parent, roots, cnt, off, wrap, track,
            spins, has_spins, q, b, omega, out):
    roots_of(n_total, parent, roots)
    d = off.shape[1]
    for x in range(n_total):
        cnt[x] = 0
    for x in range(n):
        cnt[roots[x]] += 1
    dot_other = -1.0 / (q - 1.0) if q != 1.0 else 0.0
    for i in range(codes.shape[0]):
        c = codes[i]
        a0 = args[i, 0]
        a1 = args[i, 1]
        val = 0.0
        if c == OBS_CONNECT:
            val = 1.0 if roots[a0] == roots[a1] else 0.0
        elif c == OBS_TWO_POINT_SPIN:
            val = 1.0 if spins[a0] == spins[a1] else dot_other
        elif c == OBS_WRAPPING:
            for x in range(n):
                if roots[x] == x and wrap[x, a0]:
                    val = 1.0
                    break
        elif c == OBS_MAGNETIZATION:
            if ghost >= 0:
                if has_spins:
                    s = 0.0
                    for x in range(n):
                        s += 1.0 if spins[x] == b else dot_other
                    val = s / n
                else:
                    val = cnt[roots[ghost]] / n
            else:
                if has_spins:
                    qi = int(q)
                    counts = np.zeros(qi, dtype=np.int64)
                    for x in range(n):
                        counts[spins[x]] += 1
                    val = (q * counts.max() / n - 1.0) / (q - 1.0)
                else:
                    val = cnt.max() / n
        elif c == OBS_TRUNCATED:
            r = roots[a1]
            if roots[a0] == r:
                infinite = ghost >= 0 and roots[ghost] == r
                if track:
                    for j in range(d):
                        if wrap[r, j]:
                            infinite = True
                val = 0.0 if infinite else 1.0
        elif c == OBS_CLUSTER_FRACTION:
            s = 0.0
            for x in range(n_total):
                s += float(cnt[x]) * float(cnt[x])
            val = s / (float(n) * float(n))
        elif c == OBS_CONFIGURATION:
            idx = 0
            for e in range(omega.shape[0]):
                if omega[e]:
                    idx |= 1 << e
            val = float(idx)
        out[i] = val


@nb.njit(cache=True)
def run_chain_kernel(alg, rng, n, n_total, eu, ev, eaxis, frozen, ghost, b, q, p, d,
                     spins, omega, indptr, nbr, eid, n_burn, n_meas, stride, track,
                     codes, args, out):
    m = eu.shape[0]
    parent = np.empty(n_total, dtype=np.int64)
    size = np.empty(n_total, dtype=np.int64)
    roots = np.empty(n_total, dtype=np.int64)
    cnt = np.empty(n_total, dtype=np.int64)
    work = np.empty(n_total, dtype=np.int64)
    off = np.zeros((n_total, d), dtype=np.int64)
    wrap = np.zeros((n_total, d), dtype=np.bool_)
    acc_u = np.zeros(d, dtype=np.int64)
    acc_v = np.zeros(d, dtype=np.int64)
    queue = np.empty(n_total, dtype=np.int64)
    mark = np.zeros(n_total, dtype=np.int64)
    stamp = 0
    qi = int(q)
    has_spins = alg == ALG_SW
    total = n_burn + n_meas * stride
    k = 0
    for t in range(total):
        measuring = t >= n_burn and (t - n_burn + 1) % stride == 0
        tr = track and measuring
        if alg == ALG_SW:
            sw_bond_phase(rng, eu, ev, spins, p, omega)
            label(n_total, eu, ev, eaxis, omega, frozen, ghost, tr, parent, size, off, wrap, acc_u, acc_v)
            sw_recolor(rng, n_total, ghost, b, qi, parent, roots, work, spins)
        elif alg == ALG_CM:
            label(n_total, eu, ev, eaxis, omega, frozen, ghost, False, parent, size, off, wrap, acc_u, acc_v)
            cm_update(rng, n_total, eu, ev, q, p, parent, roots, work, omega)
            if measuring:
                label(n_total, eu, ev, eaxis, omega, frozen, ghost, tr, parent, size, off, wrap, acc_u, acc_v)
        else:
            for e in range(m):
                stamp += 1
                hb_update(rng, e, eu, ev, q, p, indptr, nbr, eid, omega, mark, queue, stamp)
            if measuring:
                label(n_total, eu, ev, eaxis, omega, frozen, ghost, tr, parent, size, off, wrap, acc_u, acc_v)
        if measuring:
            measure(codes, args, n, n_total, ghost, parent, roots, cnt, off, wrap, tr,
                    spins, has_spins, q, b, omega, out[k])
            k += 1


@nb.njit(cache=True)
def sw_correlation_chain(rng, n, eu, ev, q, p, spins, shift, n_burn, n_meas, stride, out):
    """SW on a torus recording translation-averaged ``<s_x . s_{x+D}>`` for every ``D``.

    ``shift[x, D]`` is the vertex ``x + D``.
    """
    parent = np.empty(n, dtype=np.int64)
    size = np.empty(n, dtype=np.int64)
    roots = np.empty(n, dtype=np.int64)
    work = np.empty(n, dtype=np.int64)
    omega = np.zeros(eu.shape[0], dtype=np.bool_)
    off = np.zeros((n, 1), dtype=np.int64)
    wrap = np.zeros((n, 1), dtype=np.bool_)
    acc = np.zeros(1, dtype=np.int64)
    frozen = np.zeros(0, dtype=np.int64)
    eaxis = np.full(eu.shape[0], -1, dtype=np.int64)
    qi = int(q)
    other = -1.0 / (q - 1.0)
    k = 0
    for t in range(n_burn + n_meas * stride):
        sw_bond_phase(rng, eu, ev, spins, p, omega)
        label(n, eu, ev, eaxis, omega, frozen, -1, False, parent, size, off, wrap, acc, acc)
        sw_recolor(rng, n, -1, 0, qi, parent, roots, work, spins)
        if t >= n_burn and (t - n_burn + 1) % stride == 0:
            for D in range(n):
                s = 0.0
                for x in range(n):
                    s += 1.0 if spins[x] == spins[shift[x, D]] else other
                out[k, D] = s / n
            k += 1


# ---------------------------------------------------------------- enumeration

@nb.njit(cache=True)
def enumerate_rc(n, eu, ev, boundary, nopen, ncl):
    """For every configuration (bit e of the index = edge e) store |w| and k(w).

    A nonempty ``boundary`` is wired through a ghost, so boundary-touching
    components count once.
    """
    m = eu.shape[0]
    wired = boundary.shape[0] > 0
    n_total = n + 1 if wired else n
    parent = np.empty(n_total, dtype=np.int64)
    size = np.empty(n_total, dtype=np.int64)
    for c in range(1 << m):
        for i in range(n_total):
            parent[i] = i
            size[i] = 1
        if wired:
            for f in boundary:
                union(parent, size, n, f)
        k = 0
        for e in range(m):
            if (c >> e) & 1:
                union(parent, size, eu[e], ev[e])
                k += 1
        nopen[c] = k
        roots = 0
        for i in range(n_total):
            if parent[i] == i:
                roots += 1
        ncl[c] = roots


@nb.njit(cache=True)
def enumerate_connected(n, eu, ev, boundary, x, y, out):
    m = eu.shape[0]
    wired = boundary.shape[0] > 0
    n_total = n + 1 if wired else n
    parent = np.empty(n_total, dtype=np.int64)
    size = np.empty(n_total, dtype=np.int64)
    for c in range(1 << m):
        for i in range(n_total):
            parent[i] = i
            size[i] = 1
        if wired:
            for f in boundary:
                union(parent, size, n, f)
        for e in range(m):
            if (c >> e) & 1:
                union(parent, size, eu[e], ev[e])
        out[c] = find(parent, x) == find(parent, y)


@nb.njit(cache=True)
def enumerate_potts(n, eu, ev, ext, q, beta, b, rows, corr, mag):
    """Sum over all ``q**n`` colourings.

    Fills ``corr[i, y] = P[s_rows[i] == s_y]`` and ``mag[x] = P[s_x == b]``;
    returns log Z relative to the all-aligned energy.
    """
    m = eu.shape[0]
    other = -1.0 / (q - 1.0)
    smax = float(m)
    for x in range(n):
        smax += ext[x]
    state = np.zeros(n, dtype=np.int64)
    total = 1
    for _ in range(n):
        total *= q
    z = 0.0
    corr[:, :] = 0.0
    mag[:] = 0.0
    for _ in range(total):
        s = 0.0
        for e in range(m):
            s += 1.0 if state[eu[e]] == state[ev[e]] else other
        for x in range(n):
            if ext[x] > 0:
                s += ext[x] * (1.0 if state[x] == b else other)
        w = np.exp(beta * (s - smax))
        z += w
        for i in range(rows.shape[0]):
            sr = state[rows[i]]
            for y in range(n):
                if state[y] == sr:
                    corr[i, y] += w
        for x in range(n):
            if state[x] == b:
                mag[x] += w
        # odometer, last vertex fastest
        j = n - 1
        while j >= 0:
            state[j] += 1
            if state[j] < q:
                break
            state[j] = 0
            j -= 1
    for i in range(rows.shape[0]):
        for y in range(n):
            corr[i, y] /= z
    for x in range(n):
        mag[x] /= z
    return np.log(z)
