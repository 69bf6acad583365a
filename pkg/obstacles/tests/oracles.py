"""
Slow, obviously-correct reference implementations used by the tests.
"""
import colorsys
import math

import numpy as np


def point_in_polygon(x, y, vertices):
    inside = False
    n = len(vertices)
    for k in range(n):
        xa, ya = vertices[k]
        xb, yb = vertices[(k + 1) % n]
        if ya == yb:
            continue
        if (ya > y) != (yb > y) and x < xa + (y - ya) * (xb - xa) / (yb - ya):
            inside = not inside
    return inside


def rasterize_polygon(vertices, width, height):
    mask = np.zeros((height, width), dtype=bool)
    for y in range(height):
        for x in range(width):
            mask[y, x] = point_in_polygon(x + 0.5, y + 0.5, vertices)
    return mask


def median(raster, kernel):
    raster = np.asarray(raster)
    r = kernel // 2
    pad = [(r, r), (r, r)] + [(0, 0)] * (raster.ndim - 2)
    padded = np.pad(raster, pad, mode='edge')
    out = np.empty_like(raster)
    height, width = raster.shape[:2]
    for y in range(height):
        for x in range(width):
            window = padded[y:y + kernel, x:x + kernel]
            out[y, x] = np.median(window.reshape(kernel * kernel, -1), axis=0).reshape(raster.shape[2:])
    return out


def hsv(pixels):
    pixels = np.asarray(pixels, dtype=np.float64)
    out = np.empty_like(pixels)
    for y in range(pixels.shape[0]):
        for x in range(pixels.shape[1]):
            r, g, b = pixels[y, x]
            h, s, v = colorsys.rgb_to_hsv(r, g, b)
            out[y, x] = (360.0 * h, s, v)
    return out


def pegtop(value):
    a = value / 255.0
    b = 1.0 - a
    return math.floor(255.0 * ((1 - 2 * b) * a * a + 2 * b * a) + 0.5)


def _neighbours(y, x, height, width):
    for dy, dx in ((0, 1), (1, -1), (1, 0), (1, 1)):
        ny, nx = y + dy, x + dx
        if 0 <= ny < height and 0 <= nx < width:
            yield ny, nx


def felzenszwalb(raster, k, min_size):
    """Graph segmentation without smoothing, tracking components as plain label lists."""
    features = np.asarray(raster, dtype=np.float64)
    if features.ndim == 2:
        features = features[..., None]
    height, width = features.shape[:2]
    edges = []
    for y in range(height):
        for x in range(width):
            for ny, nx in _neighbours(y, x, height, width):
                diff = features[y, x] - features[ny, nx]
                weight = math.sqrt(float(np.sum(diff * diff)))
                edges.append((weight, y * width + x, ny * width + nx))
    edges.sort()

    n = height * width
    component = list(range(n))
    members = {v: [v] for v in range(n)}
    threshold = {v: float(k) for v in range(n)}

    def merge(a, b):
        keep, gone = (a, b) if len(members[a]) >= len(members[b]) else (b, a)
        for v in members[gone]:
            component[v] = keep
        members[keep].extend(members.pop(gone))
        threshold.pop(gone, None)
        return keep

    for weight, p, q in edges:
        a, b = component[p], component[q]
        if a != b and weight <= threshold[a] and weight <= threshold[b]:
            keep = merge(a, b)
            threshold[keep] = weight + k / len(members[keep])

    for weight, p, q in edges:
        a, b = component[p], component[q]
        if a != b and (len(members[a]) < min_size or len(members[b]) < min_size):
            merge(a, b)

    return np.array(component).reshape(height, width)


def canonical_partition(labels):
    """Relabel a raster by order of first appearance so equal partitions compare equal."""
    mapping = {}
    flat = [mapping.setdefault(int(v), len(mapping)) for v in np.asarray(labels).ravel()]
    return np.array(flat).reshape(np.asarray(labels).shape)


def dbscan(points, eps, min_pts):
    """Quadratic DBSCAN returning clusters as sorted index lists, canonically ordered."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    near = [np.flatnonzero(np.linalg.norm(points - points[i], axis=1) <= eps).tolist() for i in range(n)]
    core = [len(near[i]) >= min_pts for i in range(n)]

    seen = [False] * n
    groups = []
    for i in range(n):
        if not core[i] or seen[i]:
            continue
        group, stack = [], [i]
        seen[i] = True
        while stack:
            p = stack.pop()
            group.append(p)
            for q in near[p]:
                if core[q] and not seen[q]:
                    seen[q] = True
                    stack.append(q)
        groups.append(group)

    groups.sort(key=lambda g: min(tuple(points[p]) for p in g))
    label = [-1] * n
    for c, group in enumerate(groups):
        for p in group:
            label[p] = c
    for i in range(n):
        if core[i]:
            continue
        reachable = [label[j] for j in near[i] if core[j]]
        if reachable:
            label[i] = min(reachable)
    return [sorted(i for i in range(n) if label[i] == c) for c in range(len(groups))]
