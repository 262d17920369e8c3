"""Vectorised kernels for polylines and triangle meshes.

Polyline kernels accept arrays of shape ``(..., n, d)`` so that whole
families of curves can be evaluated in one call. Mesh kernels work on a
single ``(vertices, faces)`` pair. The conformal factor argument ``phi`` is
any object with ``value(points)`` and ``gradient(points)`` methods, or
``None`` for the Euclidean metric.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy import sparse

_LOGGER = logging.getLogger(__name__)

_TINY = 1e-300

# three-point Gauss-Legendre rule on [0, 1]
_GAUSS_NODES = np.array([0.5 - np.sqrt(15.0) / 10.0, 0.5, 0.5 + np.sqrt(15.0) / 10.0])
_GAUSS_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0


def _close(vertices: np.ndarray) -> np.ndarray:
    """Append the first vertex to close a polyline."""
    return np.concatenate([vertices, vertices[..., :1, :]], axis=-2)


def _fold(grad: np.ndarray) -> np.ndarray:
    """Merge the gradient of the duplicated closing vertex into the first one."""
    out = grad[..., :-1, :].copy()
    out[..., 0, :] += grad[..., -1, :]
    return out


def _gauss_points(start: np.ndarray, seg: np.ndarray) -> np.ndarray:
    """Return the quadrature points of every segment, shape (..., m, 3, d)."""
    return start[..., None, :] + _GAUSS_NODES[:, None] * seg[..., None, :]


def polyline_segment_masses(
    vertices: np.ndarray, phi=None, closed: bool = False
) -> np.ndarray:
    """Return the e^{phi}-weighted length of every segment.

    The weight is integrated with a three-point Gauss-Legendre rule, so the
    tangential part of the mass gradient stays at quadrature-error level
    instead of growing with the square of the segment length.
    """
    if closed:
        vertices = _close(vertices)
    seg = vertices[..., 1:, :] - vertices[..., :-1, :]
    lengths = np.linalg.norm(seg, axis=-1)
    if phi is None:
        return lengths
    weight = np.exp(phi.value(_gauss_points(vertices[..., :-1, :], seg)))
    return (weight @ _GAUSS_WEIGHTS) * lengths


def polyline_mass_gradient(
    vertices: np.ndarray, phi=None, closed: bool = False
) -> np.ndarray:
    """Return the exact gradient of the quadrature polyline mass."""
    work = _close(vertices) if closed else vertices
    seg = work[..., 1:, :] - work[..., :-1, :]
    lengths = np.linalg.norm(seg, axis=-1)
    unit = seg / np.maximum(lengths, _TINY)[..., None]
    if phi is None:
        d_end = unit
        d_start = -unit
    else:
        points = _gauss_points(work[..., :-1, :], seg)
        weighted = np.exp(phi.value(points)) * _GAUSS_WEIGHTS
        mean = np.sum(weighted, axis=-1)
        pulled = (weighted * lengths[..., None])[..., None] * phi.gradient(points)
        d_end = mean[..., None] * unit + np.sum(pulled * _GAUSS_NODES[:, None], axis=-2)
        d_start = -mean[..., None] * unit + np.sum(pulled * (1.0 - _GAUSS_NODES)[:, None], axis=-2)
    grad = np.zeros_like(work, dtype=float)
    grad[..., 1:, :] += d_end
    grad[..., :-1, :] += d_start
    return _fold(grad) if closed else grad


def polyline_tangents(vertices: np.ndarray) -> np.ndarray:
    """Return unit vertex tangents (one-sided at the ends)."""
    diff = np.gradient(vertices, axis=-2)
    norm = np.linalg.norm(diff, axis=-1, keepdims=True)
    return diff / np.maximum(norm, _TINY)


def polyline_normals(vertices: np.ndarray) -> np.ndarray:
    """Return unit vertex normals of a planar polyline (tangent rotated by +90 degrees)."""
    tangent = polyline_tangents(vertices)
    return np.stack([-tangent[..., 1], tangent[..., 0]], axis=-1)


def polyline_dual_lengths(vertices: np.ndarray, closed: bool = False) -> np.ndarray:
    """Return half the summed length of the segments adjacent to each vertex."""
    lengths = polyline_segment_masses(vertices, closed=closed)
    dual = np.zeros(vertices.shape[:-1])
    if closed:
        dual += 0.5 * lengths
        dual += 0.5 * np.roll(lengths, 1, axis=-1)
        return dual
    dual[..., :-1] += 0.5 * lengths
    dual[..., 1:] += 0.5 * lengths
    return dual


def polyline_abs_curvature(vertices: np.ndarray) -> np.ndarray:
    """Return turning angle over dual length at interior vertices (zero at the ends)."""
    seg = np.diff(vertices, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    curvature = np.zeros(len(vertices))
    if len(vertices) < 3:
        return curvature
    first = seg[:-1] / np.maximum(lengths[:-1], _TINY)[:, None]
    second = seg[1:] / np.maximum(lengths[1:], _TINY)[:, None]
    cross = first[:, 0] * second[:, 1] - first[:, 1] * second[:, 0]
    dot = np.sum(first * second, axis=1)
    turning = np.abs(np.arctan2(cross, dot))
    dual = 0.5 * (lengths[:-1] + lengths[1:])
    curvature[1:-1] = turning / np.maximum(dual, _TINY)
    return curvature


def resample_polyline(vertices: np.ndarray, n: int, segment_lengths: np.ndarray | None = None) -> np.ndarray:
    """Resample a polyline to n vertices equally spaced in arclength.

    ``segment_lengths`` replaces the Euclidean segment lengths, e.g. by the
    metric masses of the segments; the new vertices stay on the old polyline.
    """
    seg = np.linalg.norm(np.diff(vertices, axis=0), axis=1) if segment_lengths is None else np.asarray(segment_lengths)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    if arc[-1] <= _TINY:
        return np.repeat(vertices[:1], n, axis=0)
    target = np.linspace(0.0, arc[-1], n)
    out = np.column_stack(
        [np.interp(target, arc, vertices[:, k]) for k in range(vertices.shape[1])]
    )
    out[0] = vertices[0]
    out[-1] = vertices[-1]
    return out


def max_edge_length(vertices: np.ndarray, faces: np.ndarray | None = None) -> float:
    """Return the longest segment or mesh edge."""
    if faces is None:
        if len(vertices) < 2:
            return 0.0
        return float(np.max(np.linalg.norm(np.diff(vertices, axis=0), axis=1)))
    edges = mesh_edges(faces)
    if len(edges) == 0:
        return 0.0
    return float(np.max(np.linalg.norm(vertices[edges[:, 1]] - vertices[edges[:, 0]], axis=1)))


def _scatter_add(n: int, index: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Sum rows of values into n buckets given by index."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return np.bincount(index, weights=values, minlength=n)
    return np.column_stack(
        [np.bincount(index, weights=values[:, k], minlength=n) for k in range(values.shape[1])]
    )


def face_cross(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Return (b - a) x (c - a) for every face."""
    a = vertices[faces[:, 0]]
    return np.cross(vertices[faces[:, 1]] - a, vertices[faces[:, 2]] - a)


def triangle_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Return the area of every face."""
    if len(faces) == 0:
        return np.zeros(0)
    return 0.5 * np.linalg.norm(face_cross(vertices, faces), axis=1)


def mesh_area_gradient(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Return the gradient of total mesh area with respect to every vertex."""
    grad = np.zeros_like(vertices, dtype=float)
    if len(faces) == 0:
        return grad
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    cross = np.cross(b - a, c - a)
    norm = np.linalg.norm(cross, axis=1)
    n_hat = cross / np.maximum(norm, _TINY)[:, None]
    n = len(vertices)
    grad += _scatter_add(n, faces[:, 0], 0.5 * np.cross(n_hat, c - b))
    grad += _scatter_add(n, faces[:, 1], 0.5 * np.cross(n_hat, a - c))
    grad += _scatter_add(n, faces[:, 2], 0.5 * np.cross(n_hat, b - a))
    return grad


def vertex_normals(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Return area-weighted unit vertex normals (zero for isolated vertices)."""
    n = len(vertices)
    if len(faces) == 0:
        return np.zeros((n, 3))
    cross = face_cross(vertices, faces)
    acc = (
        _scatter_add(n, faces[:, 0], cross)
        + _scatter_add(n, faces[:, 1], cross)
        + _scatter_add(n, faces[:, 2], cross)
    )
    norm = np.linalg.norm(acc, axis=1, keepdims=True)
    return np.where(norm > _TINY, acc / np.maximum(norm, _TINY), 0.0)


def dual_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Return barycentric dual areas (a third of every adjacent face)."""
    n = len(vertices)
    if len(faces) == 0:
        return np.zeros(n)
    third = triangle_areas(vertices, faces) / 3.0
    return (
        _scatter_add(n, faces[:, 0], third)
        + _scatter_add(n, faces[:, 1], third)
        + _scatter_add(n, faces[:, 2], third)
    )


def mesh_edges(faces: np.ndarray) -> np.ndarray:
    """Return unique undirected edges as sorted index pairs."""
    if len(faces) == 0:
        return np.zeros((0, 2), dtype=int)
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    return np.unique(np.sort(edges, axis=1), axis=0)


def boundary_edges(faces: np.ndarray) -> np.ndarray:
    """Return edges used by exactly one face, oriented as in that face."""
    if len(faces) == 0:
        return np.zeros((0, 2), dtype=int)
    directed = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    keys = np.sort(directed, axis=1)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = np.asarray(inverse).reshape(-1)
    return directed[counts[inverse] == 1]


def boundary_loops(faces: np.ndarray) -> list[np.ndarray]:
    """Chain boundary edges into ordered vertex loops."""
    edges = boundary_edges(faces)
    successor = {int(a): int(b) for a, b in edges}
    loops: list[np.ndarray] = []
    seen: set[int] = set()
    for start in sorted(successor):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        current = successor[start]
        while current != start and current in successor and current not in seen:
            loop.append(current)
            seen.add(current)
            current = successor[current]
        loops.append(np.array(loop, dtype=int))
    return loops


def boundary_vertex_mask(n_vertices: int, faces: np.ndarray) -> np.ndarray:
    """Return a mask of vertices lying on a boundary edge."""
    mask = np.zeros(n_vertices, dtype=bool)
    edges = boundary_edges(faces)
    mask[edges.ravel()] = True
    return mask


def cotangent_laplacian(vertices: np.ndarray, faces: np.ndarray) -> sparse.csr_matrix:
    """Assemble the cotangent Laplacian W with (W x)_i = sum_j w_ij (x_j - x_i)."""
    n = len(vertices)
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    area2 = np.maximum(np.linalg.norm(np.cross(b - a, c - a), axis=1), _TINY)

    def cot(p, q, r):
        return np.sum((q - p) * (r - p), axis=1) / area2

    # the weight of edge (j, k) is half the cotangent of the opposite angle
    cot_a = 0.5 * cot(a, b, c)
    cot_b = 0.5 * cot(b, c, a)
    cot_c = 0.5 * cot(c, a, b)
    rows = np.concatenate([faces[:, 1], faces[:, 2], faces[:, 2], faces[:, 0], faces[:, 0], faces[:, 1]])
    cols = np.concatenate([faces[:, 2], faces[:, 1], faces[:, 0], faces[:, 2], faces[:, 1], faces[:, 0]])
    vals = np.concatenate([cot_a, cot_a, cot_b, cot_b, cot_c, cot_c])
    weights = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    diagonal = sparse.diags(np.asarray(weights.sum(axis=1)).ravel())
    return (weights - diagonal).tocsr()


def angle_defects(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Return 2*pi minus the sum of corner angles at every vertex."""
    n = len(vertices)
    angles_total = np.zeros(n)
    for k in range(3):
        p = vertices[faces[:, k]]
        q = vertices[faces[:, (k + 1) % 3]]
        r = vertices[faces[:, (k + 2) % 3]]
        u = q - p
        v = r - p
        angle = np.arctan2(np.linalg.norm(np.cross(u, v), axis=1), np.sum(u * v, axis=1))
        angles_total += _scatter_add(n, faces[:, k], angle)
    return 2.0 * np.pi - angles_total


def mesh_abs_curvature(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Return a per-vertex estimate of the second fundamental form norm |A|."""
    areas = np.maximum(dual_areas(vertices, faces), _TINY)
    laplace = cotangent_laplacian(vertices, faces) @ vertices
    mean = 0.5 * np.linalg.norm(laplace, axis=1) / areas
    gauss = angle_defects(vertices, faces) / areas
    boundary = boundary_vertex_mask(len(vertices), faces)
    # |A|^2 = 4H^2 - 2K in the interior; boundary defects are not curvature
    squared = 4.0 * mean**2 - 2.0 * np.where(boundary, 0.0, gauss)
    return np.sqrt(np.maximum(squared, 0.0))


def revolve_profile(
    profile: np.ndarray, n_theta: int, pole_tol: float = 1e-12
) -> tuple[np.ndarray, np.ndarray]:
    """Revolve an (r, z) profile around the z axis into a triangle mesh.

    Profile points with r below ``pole_tol`` become single pole vertices.
    Zero-area faces are dropped.
    """
    profile = np.asarray(profile, dtype=float)
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    rings: list[np.ndarray] = []
    blocks: list[np.ndarray] = []
    count = 0
    for r, z in profile:
        if r <= pole_tol:
            blocks.append(np.array([[0.0, 0.0, z]]))
            rings.append(np.array([count]))
            count += 1
        else:
            blocks.append(np.column_stack([r * cos_t, r * sin_t, np.full(n_theta, z)]))
            rings.append(np.arange(count, count + n_theta))
            count += n_theta
    vertices = np.concatenate(blocks) if blocks else np.zeros((0, 3))
    k = np.arange(n_theta)
    k_next = (k + 1) % n_theta
    faces: list[np.ndarray] = []
    for lower, upper in zip(rings[:-1], rings[1:]):
        if len(lower) == 1 and len(upper) == 1:
            continue
        if len(lower) == 1:
            faces.append(np.column_stack([np.full(n_theta, lower[0]), upper[k_next], upper[k]]))
        elif len(upper) == 1:
            faces.append(np.column_stack([lower[k], lower[k_next], np.full(n_theta, upper[0])]))
        else:
            faces.append(np.column_stack([lower[k], lower[k_next], upper[k_next]]))
            faces.append(np.column_stack([lower[k], upper[k_next], upper[k]]))
    face_array = np.concatenate(faces).astype(int) if faces else np.zeros((0, 3), dtype=int)
    if len(face_array):
        scale = max(float(np.max(np.abs(profile))), 1.0)
        keep = triangle_areas(vertices, face_array) > 1e-12 * scale**2
        face_array = face_array[keep]
    return vertices, face_array


def disk_mesh(
    radius: float, height: float, n_rings: int, n_theta: int
) -> tuple[np.ndarray, np.ndarray]:
    """Return a flat polar disk mesh at z = height."""
    radii = np.linspace(0.0, radius, n_rings + 1)
    return revolve_profile(np.column_stack([radii, np.full_like(radii, height)]), n_theta)
