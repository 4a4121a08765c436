"""Independent reference implementations used as test oracles.

Everything here is deliberately written from the definitions, without
importing the production predicate code paths: plain loops over pairs and
subsets, naive arithmetic, no shared helpers beyond the data types.
"""

import math
from itertools import combinations

import numpy as np

from sgnet.relations import Edge, RelationType


# ---------------------------------------------------------------------------
# Geometry, re-derived
# ---------------------------------------------------------------------------

def _fp(o):
    x, y, _ = o.position
    sx, sy, _ = o.size
    return x - sx / 2, x + sx / 2, y - sy / 2, y + sy / 2


def _top(o):
    return o.position[2] + o.size[2] / 2


def _bottom(o):
    return o.position[2] - o.size[2] / 2


def _overlap_area(a, b):
    ax0, ax1, ay0, ay1 = _fp(a)
    bx0, bx1, by0, by1 = _fp(b)
    w = min(ax1, bx1) - max(ax0, bx0)
    h = min(ay1, by1) - max(ay0, by0)
    return w * h if (w > 0 and h > 0) else 0.0


def _horizontal_gap(a, b):
    ax0, ax1, ay0, ay1 = _fp(a)
    bx0, bx1, by0, by1 = _fp(b)
    dx = max(0.0, max(ax0, bx0) - min(ax1, bx1))
    dy = max(0.0, max(ay0, by0) - min(ay1, by1))
    return math.sqrt(dx * dx + dy * dy)


def rests_on(a, b, eps=0.05):
    d = _bottom(a) - _top(b)
    return 0.0 <= d <= eps and _overlap_area(a, b) > 0.0


def parent_of(obj, objects, floor_id):
    if obj.id == floor_id:
        return None
    best = None
    for b in objects:
        if b.id == obj.id:
            continue
        if rests_on(obj, b):
            if best is None or _top(b) > _top(best) or (_top(b) == _top(best) and b.id < best.id):
                best = b
    return best.id if best is not None else floor_id


# ---------------------------------------------------------------------------
# Brute-force edge extraction
# ---------------------------------------------------------------------------

def _similar_sizes(a, b, factor=1.2):
    return all(max(p, q) / min(p, q) < factor for p, q in zip(a.size, b.size))


def _matches_some(point, members, tol):
    return any(math.dist(point, m.position) <= tol for m in members)


def _set_symmetric(center, members, tol=0.2):
    cx, cy = center.position[0], center.position[1]
    refl_ok = all(
        _matches_some((2 * cx - m.position[0], 2 * cy - m.position[1], m.position[2]),
                      members, tol)
        for m in members
    )
    if refl_ok:
        return True
    n = len(members)
    for direction in (1.0, -1.0):
        ang = direction * 2.0 * math.pi / n
        c, s = math.cos(ang), math.sin(ang)
        ok = True
        for m in members:
            dx, dy = m.position[0] - cx, m.position[1] - cy
            p = (cx + c * dx - s * dy, cy + s * dx + c * dy, m.position[2])
            if not _matches_some(p, members, tol):
                ok = False
                break
        if ok:
            return True
    return False


def brute_force_edges(scene, next_to_gap=0.5):
    """All six relation types by direct pairwise/subset evaluation."""
    objs = list(scene.objects)
    floor_id = scene.floor.id
    parents = {o.id: parent_of(o, objs, floor_id) for o in objs}
    edges = set()

    for a in objs:
        for b in objs:
            if a.id == b.id:
                continue
            if rests_on(a, b):
                edges.add(Edge(b.id, a.id, RelationType.SUPPORTING))
                edges.add(Edge(a.id, b.id, RelationType.SUPPORTED_BY))

    for center in objs:
        pool = [o for o in objs if o.id != center.id and parents[o.id] is not None]
        for k in range(2, 7):
            for subset in combinations(pool, k):
                ps = {parents[o.id] for o in subset}
                if len(ps) != 1:
                    continue
                if not all(_similar_sizes(a, b) for a, b in combinations(subset, 2)):
                    continue
                if _set_symmetric(center, subset):
                    for o in subset:
                        edges.add(Edge(o.id, center.id, RelationType.SURROUNDING))
                        edges.add(Edge(center.id, o.id, RelationType.SURROUNDED_BY))

    for a in objs:
        for b in objs:
            if a.id >= b.id:
                continue
            pa, pb = parents[a.id], parents[b.id]
            if pa is not None and pa == pb and _horizontal_gap(a, b) <= next_to_gap:
                edges.add(Edge(a.id, b.id, RelationType.NEXT_TO))
                edges.add(Edge(b.id, a.id, RelationType.NEXT_TO))
            edges.add(Edge(a.id, b.id, RelationType.CO_OCCURRING))
            edges.add(Edge(b.id, a.id, RelationType.CO_OCCURRING))
    return edges


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def central_difference(f, values: np.ndarray, index: int, h: float = 1e-6) -> float:
    flat = values.reshape(-1)
    orig = flat[index]
    flat[index] = orig + h
    up = f()
    flat[index] = orig - h
    down = f()
    flat[index] = orig
    return (up - down) / (2.0 * h)


def gradcheck_entry(analytic: float, numeric: float, guard: float = 1e-4) -> float:
    """Relative error with a floor for below-noise gradients."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), guard)


def reference_adam_scalar(grad_fn, theta0: float, steps: int, lr=0.001, beta1=0.9,
                          beta2=0.999, eps=1e-8) -> list:
    """Plain-loop Adam on one scalar (no weight decay); returns the iterates."""
    theta, m, v = theta0, 0.0, 0.0
    out = []
    for t in range(1, steps + 1):
        g = grad_fn(theta)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mh = m / (1 - beta1 ** t)
        vh = v / (1 - beta2 ** t)
        theta -= lr * mh / (math.sqrt(vh) + eps)
        out.append(theta)
    return out


# ---------------------------------------------------------------------------
# Generator rule checkers
# ---------------------------------------------------------------------------

def _within_bounds(scene, o):
    (xmin, xmax), (ymin, ymax) = scene.bounds
    x0, x1, y0, y1 = _fp(o)
    return x0 >= xmin - 1e-6 and x1 <= xmax + 1e-6 and y0 >= ymin - 1e-6 and y1 <= ymax + 1e-6


def _names(scene):
    return {o.id: scene.vocab.name(o.category) for o in scene.objects}


def _of_category(scene, name):
    return [o for o in scene.objects if scene.vocab.name(o.category) == name]


def check_bedroom(scene) -> list:
    """Violated bedroom-rule descriptions (empty list = scene passes)."""
    problems = []
    walls = _of_category(scene, "wall")
    beds = _of_category(scene, "bed")
    if len(beds) != 1:
        return [f"expected exactly one bed, got {len(beds)}"]
    bed = beds[0]
    if min(_horizontal_gap(bed, w) for w in walls) > 0.05:
        problems.append("bed is not against a wall")
    nightstands = _of_category(scene, "nightstand")
    if nightstands:
        if len(nightstands) != 2:
            problems.append(f"expected 0 or 2 nightstands, got {len(nightstands)}")
        else:
            a, b = nightstands
            mirrored = (2 * bed.position[0] - a.position[0], 2 * bed.position[1] - a.position[1])
            if math.hypot(mirrored[0] - b.position[0], mirrored[1] - b.position[1]) > 0.05:
                problems.append("nightstands are not mirror-placed about the bed")
    for lamp in _of_category(scene, "lamp"):
        if not nightstands:
            problems.append("lamp without a nightstand")
        elif not any(rests_on(lamp, ns) for ns in nightstands):
            problems.append("lamp is not resting on a nightstand")
    tvs = _of_category(scene, "tv")
    sofas = _of_category(scene, "sofa")
    if tvs and not sofas:
        problems.append("tv present but no sofa")
    if tvs and sofas:
        (xmin, xmax), (ymin, ymax) = scene.bounds
        cx, cy = (xmin + xmax) / 2, (ymin + ymax) / 2
        tv, sofa = tvs[0], sofas[0]
        dot = ((tv.position[0] - cx) * (sofa.position[0] - cx)
               + (tv.position[1] - cy) * (sofa.position[1] - cy))
        if dot >= 0:
            problems.append("sofa is not across the room centre from the tv")
    if not tvs and sofas:
        problems.append("sofa present without a tv")
    problems += check_common(scene)
    return problems


PAIRINGS = {"nightstand": "lamp", "desk": "vase", "dresser": "clock", "shelf": "book"}


def check_rule_task(scene) -> list:
    problems = check_common(scene)
    names = _names(scene)
    removable = [o for o in scene.objects if names[o.id] not in ("floor", "wall")]
    if len(removable) != 4:
        problems.append(f"expected 4 task objects, got {len(removable)}")
        return problems
    bases = [o for o in removable if names[o.id] in PAIRINGS]
    tops = [o for o in removable if names[o.id] in PAIRINGS.values()]
    if len(bases) != 2 or len(tops) != 2:
        problems.append("expected two pedestal/top pairs")
        return problems
    for base in bases:
        partner = PAIRINGS[names[base.id]]
        matching = [t for t in tops if names[t.id] == partner and rests_on(t, base)]
        if len(matching) != 1:
            problems.append(f"{names[base.id]} lacks exactly one {partner} on top")
    group1 = {names[b.id] for b in bases} & {"nightstand", "desk"}
    group2 = {names[b.id] for b in bases} & {"dresser", "shelf"}
    if len(group1) != 1 or len(group2) != 1:
        problems.append("pedestals must be one of {nightstand, desk} and one of {dresser, shelf}")
    return problems


def check_long_range(scene) -> list:
    problems = check_common(scene)
    names = _names(scene)
    tvs = _of_category(scene, "tv")
    sofas = _of_category(scene, "sofa")
    benches = _of_category(scene, "bench")
    if len(tvs) > 1:
        problems.append("more than one tv")
    if tvs and (len(sofas) != 1 or benches):
        problems.append("tv present: expected exactly one sofa and no bench")
    if not tvs and (len(benches) != 1 or sofas):
        problems.append("tv absent: expected exactly one bench and no sofa")
    for tv in tvs:
        others = [o for o in scene.objects if o.id != tv.id and names[o.id] != "floor"]
        gap = min(_horizontal_gap(tv, o) for o in others)
        if gap <= 0.5:
            problems.append(f"tv horizontal gap {gap:.3f} <= 0.5: not isolated")
        if _bottom(tv) <= 1.0:
            problems.append("tv is not floating")
        (xmin, xmax), (ymin, ymax) = scene.bounds
        if math.hypot(tv.position[0] - (xmin + xmax) / 2,
                      tv.position[1] - (ymin + ymax) / 2) < 0.3:
            problems.append("tv too close to the room centre")
    return problems


def check_common(scene) -> list:
    """Placement sanity shared by every preset: in bounds, floor objects
    pairwise disjoint horizontally unless stacked."""
    problems = []
    names = _names(scene)
    for o in scene.objects:
        if names[o.id] != "floor" and not _within_bounds(scene, o):
            problems.append(f"{o.id} outside bounds")
    solid = [o for o in scene.objects if names[o.id] not in ("floor",)]
    for a, b in combinations(solid, 2):
        if rests_on(a, b) or rests_on(b, a):
            continue
        za = (_bottom(a), _top(a))
        zb = (_bottom(b), _top(b))
        if min(za[1], zb[1]) - max(za[0], zb[0]) <= 0:
            continue  # no vertical overlap
        if _overlap_area(a, b) > 0 and names[a.id] != "wall" and names[b.id] != "wall":
            problems.append(f"{a.id} and {b.id} interpenetrate")
    return problems
