"""Two-scale periodic meshes on the unit circle.

A mesh is a strictly increasing list of nodes in (-1/2, 1/2] together with an
open atomistic window (l_a, r_a) around the origin.  Elements are the spans
between consecutive nodes; element 0 wraps around the period, running from
nodes[-1] - 1 to nodes[0].  Inside the atomistic window the mesh resolves
every lattice site and contains no other nodes; outside, elements are at
least two lattice spacings long and may end anywhere.  Those two rules keep
every bond on the atomistic side fully resolved while the coarse side stays
genuinely coarse, which is what the error identities downstream rely on.
"""

from dataclasses import dataclass

import hashlib
import numpy as np

__all__ = [
    "Mesh",
    "MeshFunction",
    "BisectResult",
    "validate",
    "interpolate_to_mesh",
    "fully_resolved_mesh",
    "generate_apriori",
    "initial_adaptive_mesh",
    "bisect",
]

# node/site coincidence tolerance, relative to the lattice spacing
_TOL = 1e-9


class Mesh:
    def __init__(self, n_half, nodes, atom_interval):
        self.n_half = int(n_half)
        self.epsilon = 1.0 / (2 * self.n_half)
        nodes = np.asarray(nodes, dtype=float)
        self.nodes = np.sort(nodes)
        self.atom_interval = (float(atom_interval[0]), float(atom_interval[1]))
        if self.nodes.size < 2:
            raise ValueError("a mesh needs at least two nodes")
        l_a, r_a = self.atom_interval
        tol = _TOL * self.epsilon
        full = abs(l_a + 0.5) <= tol and abs(r_a - 0.5) <= tol
        if not full and not (-0.5 < l_a < 0.0 < r_a < 0.5):
            raise ValueError(f"atomistic window ({l_a}, {r_a}) must surround 0 inside the period")
        self._build()

    def _build(self):
        nodes = self.nodes
        self.dof = nodes.size
        # element k = [left[k], right[k]], element 0 wraps
        self.elem_left = np.concatenate(([nodes[-1] - 1.0], nodes[:-1]))
        self.elem_right = nodes
        self.lengths = self.elem_right - self.elem_left
        self.midpoints = 0.5 * (self.elem_left + self.elem_right)
        l_a, r_a = self.atom_interval
        self.is_atomistic = (self.midpoints > l_a) & (self.midpoints < r_a)
        tol = _TOL * self.epsilon
        zero = np.flatnonzero(np.abs(nodes) <= tol)
        self.zero_index = int(zero[0]) if zero.size else None

    # -- basic queries ---------------------------------------------------

    @property
    def interfaces(self):
        return self.atom_interval

    def node_index(self, x, tol=None):
        """Index of the node at x, or None."""
        tol = _TOL * self.epsilon if tol is None else tol
        i = int(np.searchsorted(self.nodes, x))
        for j in (i - 1, i, i + 1):
            if 0 <= j < self.dof and abs(self.nodes[j] - x) <= tol:
                return j
        return None

    def node_weights(self):
        """Trapezoid weight per node: half the two adjacent element lengths."""
        nxt = np.concatenate((self.lengths[1:], self.lengths[:1]))
        return 0.5 * (self.lengths + nxt)

    def locate(self, x):
        """Element indices containing x (periodic); a node belongs to the element it ends."""
        x = np.asarray(x, dtype=float)
        shift = np.ceil(x - self.nodes[-1])
        t = x - shift
        idx = np.searchsorted(self.nodes, t, side="left")
        out = np.where(idx >= self.dof, 0, idx)
        return out if out.ndim else int(out)

    def element_slopes(self, values, macroscopic_slope):
        prev = np.concatenate(([values[-1] - macroscopic_slope], values[:-1]))
        return (values - prev) / self.lengths

    def extended_continuum_elements(self):
        """Flags for elements inside the continuum region widened to whole cells.

        The widened region replaces each interface by its lattice rounding
        toward the origin, so a mesh with off-lattice interfaces contributes
        its interface-touching atomistic elements as well.
        """
        eps = self.epsilon
        l_a, r_a = self.atom_interval
        l_in = eps * np.ceil(l_a / eps - _TOL)
        r_in = eps * np.floor(r_a / eps + _TOL)
        tol = _TOL * eps
        flags = ~self.is_atomistic
        for k in np.flatnonzero(self.is_atomistic):
            if self.elem_right[k] <= l_in + tol or self.elem_left[k] >= r_in - tol:
                flags[k] = True
        return flags

    def content_hash(self):
        h = hashlib.sha1()
        h.update(np.int64(self.n_half).tobytes())
        h.update(self.nodes.tobytes())
        h.update(np.float64(self.atom_interval).tobytes())
        return h.hexdigest()

    def to_dict(self):
        return {
            "n_half": self.n_half,
            "nodes": self.nodes.tolist(),
            "atom_interval": list(self.atom_interval),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["n_half"], np.asarray(d["nodes"]), tuple(d["atom_interval"]))

    def __repr__(self):
        l_a, r_a = self.atom_interval
        return (
            f"Mesh(n_half={self.n_half}, dof={self.dof}, "
            f"atom=({l_a:.6g}, {r_a:.6g}))"
        )


def validate(mesh):
    """Return a list of rule violations (empty when the mesh is admissible)."""
    problems = []
    eps = mesh.epsilon
    tol = _TOL * eps
    nodes = mesh.nodes
    l_a, r_a = mesh.atom_interval

    if np.any(np.diff(nodes) <= tol):
        problems.append("nodes are not strictly increasing")
    if nodes[0] <= -0.5 + tol or nodes[-1] > 0.5 + tol:
        problems.append("nodes leave the canonical window (-1/2, 1/2]")

    # interfaces are points on the circle, so the lookup wraps (a window
    # covering the whole period has its left interface at the node x = 1/2)
    if mesh.node_index(l_a) is None and mesh.node_index(l_a + 1.0) is None:
        problems.append(f"left interface {l_a} is not a node")
    if mesh.node_index(r_a) is None and mesh.node_index(r_a - 1.0) is None:
        problems.append(f"right interface {r_a} is not a node")
    if mesh.zero_index is None:
        problems.append("no node at the pinned point x = 0")

    # every site strictly inside the window is a node, and nothing else is
    lo = int(np.floor(l_a / eps)) + 1
    hi = int(np.ceil(r_a / eps)) - 1
    for ell in range(lo, hi + 1):
        x = ell * eps
        if l_a + tol < x < r_a - tol and mesh.node_index(x) is None:
            problems.append(f"lattice site {x} inside the atomistic window is missing")
    inside = (nodes > l_a + tol) & (nodes < r_a - tol)
    for x in nodes[inside]:
        if abs(x - eps * np.round(x / eps)) > tol:
            problems.append(f"off-lattice node {x} inside the atomistic window")

    # interfaces must be element boundaries: no element may straddle them
    for k in range(mesh.dof):
        a, b = mesh.elem_left[k], mesh.elem_right[k]
        for p in (l_a, r_a, l_a - 1.0, r_a - 1.0):
            if a + tol < p < b - tol:
                problems.append(f"element {k} straddles the interface at {p}")

    # coarse elements keep at least two lattice spacings
    for k in np.flatnonzero(~mesh.is_atomistic):
        if mesh.lengths[k] < 2 * eps - tol:
            problems.append(
                f"continuum element {k} has length {mesh.lengths[k]:.3e} < 2*eps"
            )
    return problems


class MeshFunction:
    """Piecewise affine function on a mesh, periodic up to a macroscopic slope."""

    def __init__(self, mesh, values, macroscopic_slope=0.0):
        self.mesh = mesh
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != mesh.nodes.shape:
            raise ValueError("one value per node required")
        self.macroscopic_slope = float(macroscopic_slope)
        if mesh.zero_index is None:
            raise ValueError("mesh lacks a node at the pinned point x = 0")

    @classmethod
    def homogeneous(cls, mesh, stretch):
        return cls(mesh, stretch * mesh.nodes, macroscopic_slope=stretch)

    def copy(self, values=None):
        vals = self.values.copy() if values is None else values
        return MeshFunction(self.mesh, vals, self.macroscopic_slope)

    def assert_pinned(self):
        if abs(self.values[self.mesh.zero_index]) > 1e-12:
            raise ValueError("mesh function does not vanish at x = 0")

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        nodes = self.mesh.nodes
        slope = self.macroscopic_slope
        shift = np.ceil(x - nodes[-1])
        t = x - shift
        idx = np.searchsorted(nodes, t, side="left")
        idx = np.minimum(idx, nodes.size - 1)
        left_x = np.where(idx == 0, nodes[-1] - 1.0, nodes[idx - 1])
        left_v = np.where(idx == 0, self.values[-1] - slope, self.values[idx - 1])
        right_x = nodes[idx]
        right_v = self.values[idx]
        frac = (t - left_x) / (right_x - left_x)
        out = left_v + frac * (right_v - left_v) + shift * slope
        return out if out.ndim else float(out)

    def element_slopes(self):
        return self.mesh.element_slopes(self.values, self.macroscopic_slope)

    def displacement_values(self, stretch=None):
        s = self.macroscopic_slope if stretch is None else stretch
        return self.values - s * self.mesh.nodes


def interpolate_to_mesh(source, mesh, macroscopic_slope=None):
    """Nodal interpolation I_h onto the mesh.

    Works for lattice functions, mesh functions on other meshes, or plain
    callables (with an explicit slope in the latter case).
    """
    if macroscopic_slope is None:
        macroscopic_slope = getattr(source, "macroscopic_slope", None)
        if macroscopic_slope is None:
            raise ValueError("macroscopic_slope required for bare callables")
    fn = source.eval if hasattr(source, "eval") else source
    return MeshFunction(mesh, np.asarray(fn(mesh.nodes), dtype=float), macroscopic_slope)


def fully_resolved_mesh(n_half):
    """Mesh whose atomistic window covers the whole period.

    Every lattice site is a node and no continuum elements remain, so the
    coarse-grained model on this mesh coincides with the atomistic chain and
    every estimator component vanishes identically.
    """
    n_half = int(n_half)
    eps = 1.0 / (2 * n_half)
    nodes = eps * np.arange(-n_half + 1, n_half + 1)
    return Mesh(n_half, nodes, (-0.5, 0.5))


def generate_apriori(n_half, atom_radius, load):
    """Graded mesh matched to the load: atomistic core plus growing elements.

    The coarse element size follows h(x) = 2 eps |f(M eps)/f(x) * x/(M eps)|^(2/3),
    which equilibrates the leading coupling and quadrature error contributions
    for a load decaying like the benchmark one.  Nodes march greedily from the
    core until the next step would overshoot the period boundary; a terminal
    sliver shorter than 2 eps is merged into its neighbour.
    """
    n_half = int(n_half)
    m = int(atom_radius)
    eps = 1.0 / (2 * n_half)
    if m < 3:
        raise ValueError("atom_radius must be at least 3")
    if m > n_half - 2:
        raise ValueError("atomistic core would leave less than one coarse element")
    if load.is_zero:
        raise ValueError("a graded mesh needs a nonzero load")

    x_m = m * eps
    f_m = abs(load.eval(x_m))
    if f_m == 0.0:
        raise ValueError("load vanishes at the interface; grading undefined")

    def hstar(x):
        fx = abs(load.eval(x))
        if fx == 0.0:
            return np.inf
        return 2.0 * eps * (f_m / fx * abs(x) / x_m) ** (2.0 / 3.0)

    right = [ell * eps for ell in range(0, m + 1)]
    x = x_m
    while True:
        h = hstar(x)
        if x + h > 0.5:
            break
        x = x + h
        right.append(x)

    if 0.5 - right[-1] < 2.0 * eps - _TOL * eps and right[-1] > x_m:
        right.pop()
    right.append(0.5)

    nodes = np.array(sorted(set(right) | {-v for v in right if 0.0 < v < 0.5}))
    return Mesh(n_half, nodes, (-x_m, x_m))


def initial_adaptive_mesh(n_half, atom_radius=3, continuum_nodes_per_half=0):
    """Coarsest admissible start: a small atomistic core and a few big elements.

    Seed nodes sit on lattice sites, graded geometrically away from the core
    (log-uniform offsets between 2 eps and the half-period).  Node-lumped
    forcing then stays bounded per node even for loads growing like 1/|x|
    toward the pinned site, where an equispaced layout would need O(N) seeds
    to keep the first coarse solve away from the breakdown strain.
    """
    n_half = int(n_half)
    a = int(atom_radius)
    c = int(continuum_nodes_per_half)
    eps = 1.0 / (2 * n_half)
    if a < 1 or a > n_half - 2:
        raise ValueError("atom_radius out of range")
    if c < 0:
        raise ValueError("continuum_nodes_per_half must be nonnegative")
    span = 0.5 - a * eps
    if span / (c + 1) < 2.0 * eps:
        raise ValueError("too many continuum seed nodes for the period")
    right = [ell * eps for ell in range(0, a + 1)]
    ratio = span / (2.0 * eps)
    prev = a
    for j in range(c):
        raw = a + 2.0 * ratio ** (j / c)
        site = max(int(round(raw)), prev + 2)
        site = min(site, n_half - 2 * (c - j) )
        right.append(site * eps)
        prev = site
    right.append(0.5)
    nodes = np.array(sorted(set(right) | {-v for v in right if 0.0 < v < 0.5}))
    return Mesh(n_half, nodes, (-a * eps, a * eps))


@dataclass
class BisectResult:
    mesh: "Mesh"
    action: str  # 'bisected' | 'absorbed' | 'unrefined'
    added_nodes: tuple = ()
    removed_nodes: tuple = ()
    detail: str = ""


def _to_window(x):
    t = x - np.floor(x + 0.5)
    return t + 1.0 if t <= -0.5 else t


def _snap_indices(lo, hi, eps):
    """Integers ell with lo <= ell*eps <= hi, with float slack."""
    tol = _TOL
    first = int(np.ceil(lo / eps - tol))
    last = int(np.floor(hi / eps + tol))
    return range(first, last + 1)


def bisect(mesh, k):
    """Refine element k.

    Plain midpoint insertion when both children keep the 2 eps minimum.
    Shorter elements adjacent to the atomistic window are absorbed into it,
    with the new interface snapped outward to a lattice site and the gained
    span filled with sites; any off-lattice node swallowed in the process is
    dropped, and the absorption keeps extending while it would leave a sliver
    shorter than 2 eps next to the new interface.  A short element away from
    the window is only split if some lattice site yields two legal children;
    otherwise it is left alone and reported.
    """
    k = int(k)
    if not 0 <= k < mesh.dof:
        raise ValueError(f"element index {k} out of range")
    if mesh.is_atomistic[k]:
        raise ValueError(f"element {k} lies in the atomistic window")

    eps = mesh.epsilon
    tol = _TOL * eps
    a, b = float(mesh.elem_left[k]), float(mesh.elem_right[k])
    h = b - a
    l_a, r_a = mesh.atom_interval

    if h >= 4.0 * eps - tol:
        midpoint = 0.5 * (a + b)
        new = _to_window(midpoint)
        nodes = np.sort(np.append(mesh.nodes, new))
        return BisectResult(
            Mesh(mesh.n_half, nodes, mesh.atom_interval),
            "bisected",
            added_nodes=(new,),
        )

    right_adjacent = abs(_to_window(a) - r_a) <= tol
    left_adjacent = abs(_to_window(b) - l_a) <= tol

    if right_adjacent and left_adjacent:
        raise ValueError("continuum region is a single short element; cannot refine")

    if right_adjacent or left_adjacent:
        return _absorb(mesh, k, side="right" if right_adjacent else "left")

    # short element away from the window: try a lattice-site split point
    candidates = [
        ell * eps
        for ell in _snap_indices(a + 2 * eps - tol, b - 2 * eps + tol, eps)
        if a + 2 * eps - tol <= ell * eps <= b - 2 * eps + tol
    ]
    if candidates:
        midpoint = 0.5 * (a + b)
        new = min(candidates, key=lambda c: (abs(c - midpoint), c))
        new = _to_window(new)
        nodes = np.sort(np.append(mesh.nodes, new))
        return BisectResult(
            Mesh(mesh.n_half, nodes, mesh.atom_interval),
            "bisected",
            added_nodes=(new,),
            detail="lattice-snapped split",
        )
    return BisectResult(
        mesh,
        "unrefined",
        detail=f"element {k} of length {h / eps:.3f}*eps cannot be split legally",
    )


def _absorb(mesh, k, side):
    """Grow the atomistic window over element k (and onward if needed)."""
    eps = mesh.epsilon
    tol = _TOL * eps
    l_a, r_a = mesh.atom_interval
    nodes = mesh.nodes

    if side == "right":
        # continuum nodes marching right from r_a, ending at the far interface
        arc = np.concatenate((nodes[nodes > r_a + tol], nodes[nodes <= l_a + tol] + 1.0))
        origin = r_a
    else:
        # mirror: march left from l_a, coordinates negated so the loop is shared
        arc = np.concatenate((-nodes[nodes < l_a - tol][::-1], -(nodes[nodes >= r_a - tol] - 1.0)[::-1]))
        origin = -l_a

    target = arc[0]
    j = 0
    while True:
        ell = int(np.ceil(target / eps - _TOL))
        new_iface = ell * eps
        nxt = j + 1
        while nxt < arc.size and arc[nxt] <= new_iface + tol:
            nxt += 1
        if nxt >= arc.size:
            raise ValueError("absorption would consume the whole continuum region")
        if arc[nxt] - new_iface >= 2.0 * eps - tol or abs(arc[nxt] - new_iface) <= tol:
            swallowed = [x for x in arc[:nxt] if x < new_iface - tol]
            break
        target = arc[nxt]
        j = nxt

    if new_iface >= 0.5 - tol:
        raise ValueError("absorption would push the interface to the period boundary")

    first = int(np.floor(origin / eps + _TOL)) + 1
    last = int(np.floor(new_iface / eps + _TOL))
    fill = [ell * eps for ell in range(first, last + 1)]
    if side == "right":
        removed = [_to_window(x) for x in swallowed]
        added = fill
        interval = (l_a, new_iface)
    else:
        removed = [_to_window(-x) for x in swallowed]
        added = [-x for x in fill]
        interval = (-new_iface, r_a)

    keep = np.ones(nodes.size, dtype=bool)
    for x in removed:
        idx = mesh.node_index(x)
        if idx is not None:
            keep[idx] = False
    kept = nodes[keep]
    fresh = [x for x in added if np.min(np.abs(kept - x)) > tol]
    new_mesh = Mesh(mesh.n_half, np.concatenate((kept, fresh)), interval)
    return BisectResult(
        new_mesh,
        "absorbed",
        added_nodes=tuple(sorted(fresh)),
        removed_nodes=tuple(sorted(removed)),
        detail=f"interface moved to {interval}",
    )
