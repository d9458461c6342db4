"""Causal-graph layout: circle detection, hierarchy depths, circularly
constrained 1-D stress majorization, and row overlap removal.

Rows follow the causal hierarchy: pure causes at the top (depth 0),
effects below, with every causality circle contracted to one unit so the
traversal terminates and its members share the entrance depth.  The
horizontal coordinates minimize a stress objective over graph-theoretic
distances plus, per circle, a weighted mismatch against a regular
reference polygon under a best-fit similarity transform; members of a
circle are the only nodes whose vertical coordinate may leave the row.
Re-layouts can pass the previous positions, which enter as a quadratic
stabilization pull on the shared nodes.
"""

import math
from dataclasses import dataclass

import numpy as np

EDGE_LEN_FACTOR = 3.0  # ideal edge length in node radii
STAB_WEIGHT = 1.0
MAX_ITERS = 300
DISP_TOL = 1e-10


@dataclass
class LayoutInput:
    graph: object  # CausalGraph; only non-removed edges are laid out
    canvas: tuple = (1200.0, 800.0)
    previous_positions: dict = None
    node_radius: float = 20.0

    def __post_init__(self):
        w, h = self.canvas
        if w <= 0 or h <= 0:
            raise ValueError("canvas dimensions must be positive")


@dataclass
class LayoutResult:
    positions: dict
    depths: dict
    circles: list
    stress: float
    crowded: bool = False
    canvas: tuple = None
    traces: list = None  # per-component objective values per accepted sweep

    def to_json(self):
        return {
            "positions": {n: [float(x), float(y)] for n, (x, y) in self.positions.items()},
            "depths": {n: int(d) for n, d in self.depths.items()},
            "circles": [sorted(c) for c in self.circles],
            "stress": self.stress,
            "crowded": self.crowded,
        }


def _adjacency(graph):
    adj = {n: [] for n in graph.nodes}
    for e in graph.visible_edges():
        adj[e.cause].append(e.effect)
    return adj


def detect_circles(graph):
    """Causality circles: strongly connected components with at least two
    nodes, plus self-loop singletons.  Iterative Tarjan DFS."""
    adj = _adjacency(graph)
    index = {}
    low = {}
    on_stack = set()
    stack = []
    counter = [0]
    sccs = []

    for root in graph.nodes:
        if root in index:
            continue
        work = [(root, iter(adj[root]))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for child in it:
                if child not in index:
                    index[child] = low[child] = counter[0]
                    counter[0] += 1
                    stack.append(child)
                    on_stack.add(child)
                    work.append((child, iter(adj[child])))
                    advanced = True
                    break
                if child in on_stack:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                sccs.append(comp)

    self_loops = {e.cause for e in graph.visible_edges() if e.cause == e.effect}
    return [frozenset(c) for c in sccs if len(c) > 1 or c[0] in self_loops]


def _units(graph, circles):
    """Contract each circle to one unit; returns (unit_of_node, unit_members)."""
    unit_of = {}
    members = []
    for c in circles:
        uid = len(members)
        members.append(sorted(c))
        for n in c:
            unit_of[n] = uid
    for n in graph.nodes:
        if n not in unit_of:
            unit_of[n] = len(members)
            members.append([n])
    return unit_of, members


def assign_depths(graph, circles):
    """Hierarchy levels after circle contraction.

    Roots are the in-degree-0 units of each weakly connected component
    (after contraction every component has one; if a raw component were
    all-cyclic its single contracted unit is the root, matching the
    convention of rooting at the strongest edge's cause).  A unit's
    depth is the longest unit-path length from a root, so every
    non-circle edge points downward.
    """
    unit_of, members = _units(graph, circles)
    n_units = len(members)
    out = [set() for _ in range(n_units)]
    indeg = [0] * n_units
    for e in graph.visible_edges():
        u, w = unit_of[e.cause], unit_of[e.effect]
        if u != w and w not in out[u]:
            out[u].add(w)
            indeg[w] += 1

    depth = [0] * n_units
    order = [u for u in range(n_units) if indeg[u] == 0]
    remaining = list(indeg)
    queue = list(order)
    while queue:
        u = queue.pop(0)
        for w in out[u]:
            depth[w] = max(depth[w], depth[u] + 1)
            remaining[w] -= 1
            if remaining[w] == 0:
                queue.append(w)

    return {n: depth[unit_of[n]] for n in graph.nodes}


def _undirected_components(graph):
    neigh = {n: set() for n in graph.nodes}
    for e in graph.visible_edges():
        if e.cause != e.effect:
            neigh[e.cause].add(e.effect)
            neigh[e.effect].add(e.cause)
    seen = set()
    comps = []
    for n in graph.nodes:
        if n in seen:
            continue
        comp = []
        frontier = [n]
        seen.add(n)
        while frontier:
            cur = frontier.pop()
            comp.append(cur)
            for nb in neigh[cur]:
                if nb not in seen:
                    seen.add(nb)
                    frontier.append(nb)
        comps.append(comp)
    return comps


def _hop_distances(nodes, graph):
    idx = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)
    dist = np.full((n, n), np.inf)
    neigh = [[] for _ in range(n)]
    for e in graph.visible_edges():
        if e.cause in idx and e.effect in idx and e.cause != e.effect:
            neigh[idx[e.cause]].append(idx[e.effect])
            neigh[idx[e.effect]].append(idx[e.cause])
    for s in range(n):
        dist[s, s] = 0
        queue = [s]
        head = 0
        while head < len(queue):
            cur = queue[head]
            head += 1
            for nb in neigh[cur]:
                if not np.isfinite(dist[s, nb]):
                    dist[s, nb] = dist[s, cur] + 1
                    queue.append(nb)
    return dist


def _polygon_reference(members, radius):
    """Regular polygon with vertices assigned to members in name order
    and a fixed phase.  The assignment must not depend on the current
    positions: the best-fit similarity transform absorbs rotation and
    scale, and a position-dependent matching would change the objective
    between sweeps and between stabilized re-layouts."""
    q = {}
    for k, m in enumerate(sorted(members)):
        th = -math.pi / 2 + 2 * math.pi * k / len(members)
        q[m] = radius * np.asarray([math.cos(th), math.sin(th)])
    return q


def _edge_similarity_fit(terms, positions):
    """Weighted Procrustes on edge vectors: the scale * rotation exactly
    minimizing sum_k w_k ||M dp_k - dq_k||^2.

    Being the exact minimizer makes the transform a deterministic
    function of the positions and guarantees a re-fit never increases
    the circle energy, so the alternating sweep is a true coordinate
    descent."""
    dps = np.asarray([np.asarray(positions[a], dtype=float)
                      - np.asarray(positions[b], dtype=float)
                      for a, b, _, _ in terms])
    dqs = np.asarray([dq for _, _, dq, _ in terms], dtype=float)
    w = np.asarray([wt for _, _, _, wt in terms], dtype=float)
    cov = (w[:, None] * dqs).T @ dps
    u, s, vt = np.linalg.svd(cov)
    d = np.sign(np.linalg.det(u @ vt)) or 1.0
    rot = u @ np.diag([1.0, d]) @ vt
    denom = float((w * (dps**2).sum(axis=1)).sum())
    scale = float((s * np.asarray([1.0, d])).sum()) / denom if denom > 0 else 1.0
    return scale * rot


def _circle_terms(graph, circles, positions, node_radius):
    """Per-circle data for one sweep: (members, M, terms).

    The reference polygon is a fixed function of the member set; edge
    weights come from the reference distances (adjacent polygon vertices
    weigh more than chords) so neither chases the layout.  Only the
    similarity transform follows the moving positions."""
    edges_by_circle = []
    emap = {}
    for e in graph.visible_edges():
        emap.setdefault((e.cause, e.effect), e)
    for c in circles:
        members = sorted(c)
        if len(members) < 2:
            continue
        inner = [(a, b) for (a, b) in emap if a in c and b in c and a != b]
        if not inner:
            continue
        q = _polygon_reference(members, node_radius * len(members))
        terms = []
        for a, b in inner:
            dq = q[a] - q[b]
            w = 1.0 / max(float((dq ** 2).sum()), 1e-9)
            terms.append((a, b, dq, w))
        m_fit = _edge_similarity_fit(terms, positions)
        edges_by_circle.append((members, m_fit, terms))
    return edges_by_circle


def _stress_value(x, dist):
    n = len(x)
    iu, ju = np.triu_indices(n, k=1)
    d = dist[iu, ju]
    ok = np.isfinite(d) & (d > 0)
    diff = np.abs(x[iu] - x[ju])[ok]
    dd = d[ok]
    return float(((diff - dd) ** 2 / dd**2).sum())


def stress_objective(graph, positions, circles, node_radius):
    """The layout objective at given positions: stress over x plus the
    circular-constraint energy (similarity transform re-fit here)."""
    total = 0.0
    for comp in _undirected_components(graph):
        dist = _hop_distances(comp, graph) * EDGE_LEN_FACTOR * node_radius
        x = np.asarray([positions[n][0] for n in comp])
        total += _stress_value(x, dist)
    for members, m_fit, terms in _circle_terms(graph, circles, positions, node_radius):
        for a, b, dq, w in terms:
            dp = np.asarray(positions[a]) - np.asarray(positions[b])
            total += w * float(((m_fit @ dp - dq) ** 2).sum())
    return total


def _degrees(graph):
    deg = {n: 0 for n in graph.nodes}
    for e in graph.visible_edges():
        deg[e.cause] += 1
        if e.effect != e.cause:
            deg[e.effect] += 1
    return deg


def _solve_component(comp, graph, depths, circles, node_radius, row_y, prev, init_x,
                     height):
    """Majorize-minimize the component's free coordinates.

    Free variables: x of every node, y of circle members (the polygon
    cannot live on one row).  Each sweep re-fits the per-circle
    similarity transforms (keeping a re-fit only when it lowers the
    energy), freezes stress signs, and solves the resulting quadratic
    exactly, so the objective never increases and the loop runs to a
    movement fixed point.
    """
    nodes = list(comp)
    idx = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)
    dist = _hop_distances(nodes, graph) * EDGE_LEN_FACTOR * node_radius
    comp_circles = [c for c in circles if set(c) <= set(nodes) and len(c) >= 2]
    cm = sorted({m for c in comp_circles for m in c})
    y_var = {m: n + i for i, m in enumerate(cm)}
    nv = n + len(cm)

    positions = {}
    for node in nodes:
        x0 = prev[node][0] if prev and node in prev else init_x[node]
        y0 = prev[node][1] if prev and node in prev and node in y_var else row_y[node]
        positions[node] = np.asarray([x0, y0], dtype=float)

    # static per-circle data: reference polygon, inner edges, weights
    emap = {}
    for e in graph.visible_edges():
        emap.setdefault((e.cause, e.effect), e)
    circle_data = []
    for c in comp_circles:
        members = sorted(c)
        inner = [(a, b) for (a, b) in emap if a in c and b in c and a != b]
        if not inner:
            continue
        q = _polygon_reference(members, node_radius * len(members))
        terms = []
        for a, b in inner:
            dq = q[a] - q[b]
            terms.append((a, b, dq, 1.0 / max(float((dq ** 2).sum()), 1e-9)))
        circle_data.append((members, q, terms))

    def circle_energy(m_fit, terms):
        total = 0.0
        for a, b, dq, w in terms:
            dp = positions[a] - positions[b]
            total += w * float(((m_fit @ dp - dq) ** 2).sum())
        return total

    m_cur = [None] * len(circle_data)

    def refit_transforms():
        # the exact edge-energy minimizer: deterministic in the positions
        for ci, (members, q, terms) in enumerate(circle_data):
            m_cur[ci] = _edge_similarity_fit(terms, positions)

    def current_objective():
        stab = 0.0
        if prev:
            stab = STAB_WEIGHT * sum(
                (positions[m][0] - prev[m][0]) ** 2 for m in nodes if m in prev
            )
            # circle members' y is free, so it is stabilized as well
            stab += STAB_WEIGHT * sum(
                (positions[m][1] - prev[m][1]) ** 2 for m in cm if m in prev
            )
        x = np.asarray([positions[m][0] for m in nodes])
        total = _stress_value(x, dist) + stab
        for ci, (members, q, terms) in enumerate(circle_data):
            total += circle_energy(m_cur[ci], terms)
        return total

    refit_transforms()
    obj = current_objective()
    trace = [obj]
    for _ in range(MAX_ITERS):
        refit_transforms()
        A = np.zeros((nv, nv))
        b = np.zeros(nv)

        xs = np.asarray([positions[m][0] for m in nodes])
        iu, ju = np.triu_indices(n, k=1)
        for i, j in zip(iu, ju):
            d = dist[i, j]
            if not np.isfinite(d) or d <= 0:
                continue
            w = 1.0 / d**2
            s = 1.0 if xs[i] > xs[j] else (-1.0 if xs[i] < xs[j] else (1.0 if i < j else -1.0))
            A[i, i] += w
            A[j, j] += w
            A[i, j] -= w
            A[j, i] -= w
            b[i] += w * s * d
            b[j] -= w * s * d

        for ci, (members, q, terms) in enumerate(circle_data):
            (m11, m12), (m21, m22) = m_cur[ci]
            for a_n, b_n, dq, w in terms:
                ia, ib = idx[a_n], idx[b_n]
                ya, yb = y_var[a_n], y_var[b_n]
                qxx = w * (m11 * m11 + m21 * m21)
                qyy = w * (m12 * m12 + m22 * m22)
                qxy = w * (m11 * m12 + m21 * m22)
                lx = w * (m11 * dq[0] + m21 * dq[1])
                ly = w * (m12 * dq[0] + m22 * dq[1])
                for p, q_, coef in ((ia, ib, qxx), (ya, yb, qyy)):
                    A[p, p] += coef
                    A[q_, q_] += coef
                    A[p, q_] -= coef
                    A[q_, p] -= coef
                A[ia, ya] += qxy
                A[ya, ia] += qxy
                A[ib, yb] += qxy
                A[yb, ib] += qxy
                A[ia, yb] -= qxy
                A[yb, ia] -= qxy
                A[ib, ya] -= qxy
                A[ya, ib] -= qxy
                b[ia] += lx
                b[ib] -= lx
                b[ya] += ly
                b[yb] -= ly

        if prev:
            for m in nodes:
                if m in prev:
                    A[idx[m], idx[m]] += STAB_WEIGHT
                    b[idx[m]] += STAB_WEIGHT * prev[m][0]
            for m in cm:
                if m in prev:
                    A[y_var[m], y_var[m]] += STAB_WEIGHT
                    b[y_var[m]] += STAB_WEIGHT * prev[m][1]

        u = np.linalg.lstsq(A, b, rcond=None)[0]

        old = {m: positions[m].copy() for m in nodes}
        for m in nodes:
            positions[m][0] = u[idx[m]]
        for m in cm:
            positions[m][1] = u[y_var[m]]
        if not prev:
            shift = np.mean([positions[m][0] for m in nodes]) - np.mean(
                [old[m][0] for m in nodes])
            for m in nodes:
                positions[m][0] -= shift
        for c in comp_circles:
            mean_y = np.mean([positions[m][1] for m in c])
            target = np.mean([row_y[m] for m in c])
            # keep the whole circle inside the canvas by translating it
            # (objective-neutral), never by clamping single members
            extent_lo = mean_y - min(positions[m][1] for m in c)
            extent_hi = max(positions[m][1] for m in c) - mean_y
            if extent_lo + extent_hi <= height:
                target = min(max(target, extent_lo), height - extent_hi)
            else:
                target = height / 2
            for m in c:
                positions[m][1] += target - mean_y

        new_obj = current_objective()
        disp = max(float(np.abs(positions[m] - old[m]).max()) for m in nodes)
        if new_obj > obj:  # safety net; every stage above is descent-safe
            for m in nodes:
                positions[m] = old[m]
            break
        progress = obj - new_obj
        obj = new_obj
        trace.append(obj)
        # movement is the primary convergence signal: progress alone goes
        # flat long before low-curvature (large-polygon) directions settle
        if disp < DISP_TOL * node_radius or progress <= 1e-16 * max(1.0, abs(obj)):
            break

    return positions, obj, trace


def solve_positions(layout_input, depths, circles):
    """Positions per the layered + circularly constrained stress scheme.

    y is fixed by depth (canvas height split over the hierarchy); x
    minimizes the stress-plus-circle objective; with previous positions
    supplied a stabilization pull keeps shared nodes near where they
    were.  Disconnected components are laid out independently and packed
    left to right with one-radius gaps.
    """
    graph = layout_input.graph
    width, height = layout_input.canvas
    r = layout_input.node_radius
    prev = layout_input.previous_positions

    if not graph.nodes:
        return LayoutResult({}, {}, [], 0.0, canvas=layout_input.canvas)

    max_depth = max(depths.values()) if depths else 0
    row_y = {n: (height / max_depth) * depths[n] if max_depth else height / 2
             for n in graph.nodes}

    # deterministic initial spread within each row
    init_x = {}
    by_row = {}
    for node in graph.nodes:
        by_row.setdefault(depths[node], []).append(node)
    for d, row in by_row.items():
        for k, node in enumerate(row):
            init_x[node] = (k - (len(row) - 1) / 2) * EDGE_LEN_FACTOR * r + d * 0.013 * r

    comps = _undirected_components(graph)
    placed = {}
    traces = []
    cursor = 0.0
    for ci, comp in enumerate(comps):
        pos, obj, trace = _solve_component(comp, graph, depths, circles, r, row_y,
                                           prev, init_x, height)
        traces.append(trace)
        lo = min(p[0] for p in pos.values()) - r
        hi = max(p[0] for p in pos.values()) + r
        offset = cursor - lo
        for m, p in pos.items():
            placed[m] = np.asarray([p[0] + offset, p[1]])
        cursor += (hi - lo) + r

    # center horizontally, then force canvas bounds
    lo = min(p[0] for p in placed.values())
    hi = max(p[0] for p in placed.values())
    shift = width / 2 - (lo + hi) / 2
    for p in placed.values():
        p[0] += shift
    placed = _clamp_to_canvas(placed, width, height, r)

    positions = {m: (float(p[0]), float(p[1])) for m, p in placed.items()}
    stress = stress_objective(graph, positions, circles, r)
    return LayoutResult(positions=positions, depths=dict(depths), circles=list(circles),
                        stress=stress, canvas=layout_input.canvas, traces=traces)


def _clamp_to_canvas(placed, width, height, r):
    xs = np.asarray([p[0] for p in placed.values()])
    lo, hi = xs.min(), xs.max()
    margin = min(r, width / 2)
    if lo < 0 or hi > width:
        span = hi - lo
        scale = (width - 2 * margin) / span if span > 0 else 1.0
        for p in placed.values():
            p[0] = margin + (p[0] - lo) * scale
    for p in placed.values():
        p[1] = min(max(p[1], 0.0), height)
    return placed


def remove_overlaps(result, node_radius):
    """Separate same-depth nodes to at least 2 * node_radius apart in x.

    Within each row the relative order is preserved and the total squared
    displacement is minimal (pool-adjacent-violators on the gap-shifted
    coordinates).  A row wider than the canvas is scaled into it and the
    result flagged crowded.
    """
    positions = {n: [x, y] for n, (x, y) in result.positions.items()}
    rows = {}
    for node, d in result.depths.items():
        rows.setdefault(d, []).append(node)

    crowded = result.crowded
    width = result.canvas[0] if result.canvas else None
    for row_nodes in rows.values():
        order = sorted(row_nodes, key=lambda m: (positions[m][0], result.positions[m][0], m))
        x = np.asarray([positions[m][0] for m in order])
        z = x - 2 * node_radius * np.arange(len(order))
        fitted = _pava(z)
        new_x = fitted + 2 * node_radius * np.arange(len(order))
        if width is not None:
            margin = min(node_radius, width / 2)
            if (new_x[-1] - new_x[0]) + 2 * node_radius > width:
                crowded = True
                scale = (width - 2 * margin) / (new_x[-1] - new_x[0])
                new_x = margin + (new_x - new_x[0]) * scale
            elif new_x[0] < margin:
                new_x = new_x + (margin - new_x[0])
            elif new_x[-1] > width - margin:
                new_x = new_x + (width - margin - new_x[-1])
        for m, nx in zip(order, new_x):
            positions[m][0] = float(nx)

    return LayoutResult(
        positions={m: (p[0], p[1]) for m, p in positions.items()},
        depths=dict(result.depths),
        circles=list(result.circles),
        stress=result.stress,
        crowded=crowded,
        canvas=result.canvas,
        traces=result.traces,
    )


def _pava(z):
    """Isotonic (non-decreasing) L2 fit by pool-adjacent-violators."""
    blocks = [[float(v), 1.0] for v in z]  # (mean, weight)
    merged = []
    for mean, wt in blocks:
        merged.append([mean, wt])
        while len(merged) > 1 and merged[-2][0] > merged[-1][0]:
            m2, w2 = merged.pop()
            m1, w1 = merged.pop()
            merged.append([(m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2])
    out = []
    for mean, wt in merged:
        out.extend([mean] * int(wt))
    return np.asarray(out)


def compute_layout(layout_input):
    """Full pipeline: circles, depths, positions, overlap removal."""
    circles = detect_circles(layout_input.graph)
    depths = assign_depths(layout_input.graph, circles)
    result = solve_positions(layout_input, depths, circles)
    return remove_overlaps(result, layout_input.node_radius)
