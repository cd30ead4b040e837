"""Slow reference computations used to cross-check the fast paths.

Everything here recomputes package quantities by the most direct route
available: explicit bond loops, full lattice sweeps, dense interval
clipping.  Test code is the intended consumer, but the routines also back
the self-check command of the CLI.
"""

import numpy as np

from .estimators import curvature_sum, microcell_slopes
from .forces import wrap_to_period
from .lattice import bonds, interpolate_to_lattice, sites
from .linsolve import solve_pinned
from .mesh import Mesh, validate

__all__ = [
    "naive_lattice_energy",
    "naive_qc_energy",
    "brute_stability",
    "riesz_dual_norm",
    "lattice_load_pairing",
    "mesh_load_pairing",
    "fd_gradient",
    "random_mesh",
    "random_state",
    "oracle_suite",
    "format_suite_report",
]

_TOL = 1e-9


def naive_lattice_energy(potential, y):
    """Stored chain energy by a site-by-site loop over both neighbour shells."""
    n = y.n_half
    eps = y.epsilon
    total = 0.0
    for ell in range(-n + 1, n + 1):
        total += potential.eval((y.value(ell) - y.value(ell - 1)) / eps)
        total += potential.eval((y.value(ell) - y.value(ell - 2)) / eps)
    return eps * total


def naive_qc_energy(model, yh):
    """Coarse stored energy by clipping every bond against window and elements."""
    mesh = model.mesh
    pot = model.potential
    eps = model.epsilon
    tol = _TOL * eps
    l_a, r_a = mesh.atom_interval
    slopes = yh.element_slopes()
    total = 0.0
    for bond in bonds(model.n_half):
        left, right = bond.interval
        blen = bond.length
        r = bond.neighbor_range
        atoms = []
        for m in (-1.0, 0.0, 1.0):
            lo, hi = max(left, l_a + m), min(right, r_a + m)
            if hi - lo > tol:
                # window images touching across the period seam form one
                # contiguous atomistic portion of the bond
                if atoms and lo - atoms[-1][1] <= tol:
                    atoms[-1][1] = hi
                else:
                    atoms.append([lo, hi])
        for lo, hi in atoms:
            d = (yh.eval(hi) - yh.eval(lo)) / (hi - lo)
            total += eps * (hi - lo) / blen * pot.eval(r * d)
        for k in range(mesh.dof):
            for m in (-1.0, 0.0, 1.0):
                lo = max(left, float(mesh.elem_left[k]) + m)
                hi = min(right, float(mesh.elem_right[k]) + m)
                if hi - lo <= tol:
                    continue
                pieces = [(lo, hi)]
                for a0, a1 in atoms:
                    pieces = [
                        (p, min(q, a0)) if side == 0 else (max(p, a1), q)
                        for p, q in pieces
                        for side in (0, 1)
                    ]
                for p, q in pieces:
                    if q - p > tol:
                        total += eps * (q - p) / blen * pot.eval(r * slopes[k])
    return total


def brute_stability(model, yh):
    """Minimum site curvature by sweeping every lattice site."""
    d = microcell_slopes(yh)
    a_all = curvature_sum(model.potential, d, np.roll(d, 1) + d, d + np.roll(d, -1))
    return float(np.min(a_all)), float(np.min(d))


def riesz_dual_norm(a_model, qc_model, yh):
    """Dual norm of the internal residual functional over the pinned chain.

    The functional pairs each lattice hat against the difference between the
    stored-energy gradients of the full chain at the lattice interpolant and
    the coarse model at the given state.
    """
    n = a_model.n_half
    eps = a_model.epsilon
    n2 = 2 * n
    iy = interpolate_to_lattice(yh, n)
    g_a = a_model.stored_gradient(iy)
    g_qc = qc_model.stored_gradient(yh)
    xs = sites(n)
    r = np.array(g_a, dtype=float)
    for j, x_node in enumerate(qc_model.mesh.nodes):
        hat = np.maximum(0.0, 1.0 - np.abs(wrap_to_period(x_node - xs)) / eps)
        r -= g_qc[j] * hat
    i = np.arange(n2)
    rows = np.concatenate((i, i, (i - 1) % n2))
    cols = np.concatenate((i, (i - 1) % n2, i))
    vals = np.concatenate((np.full(n2, 2.0 / eps), np.full(n2, -1.0 / eps),
                           np.full(n2, -1.0 / eps)))
    z = solve_pinned(n2, a_model.pinned, rows, cols, vals, r)
    return float(np.sqrt(max(np.dot(r, z), 0.0)))


def lattice_load_pairing(load, lat_fn):
    """<f, v> on the chain: eps times the sum of pointwise products."""
    xs = sites(lat_fn.n_half)
    return lat_fn.epsilon * float(np.dot(load.eval(xs), lat_fn.values))


def mesh_load_pairing(load, mesh_fn):
    """<f, v> under nodal lumping with trapezoid weights."""
    mesh = mesh_fn.mesh
    f = np.asarray(load.eval(mesh.nodes), dtype=float)
    return float(np.dot(mesh.node_weights() * f, mesh_fn.values))


def fd_gradient(energy, values, h=1e-6):
    """Central finite differences of a scalar function of a vector."""
    g = np.zeros_like(values, dtype=float)
    for i in range(values.size):
        up = np.array(values, dtype=float)
        dn = np.array(values, dtype=float)
        up[i] += h
        dn[i] -= h
        g[i] = (energy(up) - energy(dn)) / (2.0 * h)
    return g


def random_mesh(rng, n_half, off_lattice=True, attempts=200):
    """A valid random mesh: random window, random admissible coarse nodes."""
    eps = 0.5 / n_half
    for _ in range(attempts):
        a_r = int(rng.integers(2, n_half - 2))
        a_l = int(rng.integers(2, n_half - 2))
        r_a = a_r * eps
        l_a = -a_l * eps
        if off_lattice and a_r <= n_half - 4 and rng.random() < 0.3:
            r_a = (a_r + float(rng.uniform(0.25, 0.75))) * eps
        if off_lattice and a_l <= n_half - 4 and rng.random() < 0.3:
            l_a = -(a_l + float(rng.uniform(0.25, 0.75))) * eps

        first = int(np.floor(l_a / eps)) + 1
        last = int(np.ceil(r_a / eps)) - 1
        nodes = [ell * eps for ell in range(first, last + 1)]
        nodes += [l_a, r_a, 0.5]

        def arc(start, stop):
            x = start
            out = []
            while stop - x >= 4.0 * eps:
                step = float(rng.uniform(2.0 * eps, 0.5 * (stop - x)))
                y = x + step
                if rng.random() < 0.5:
                    snapped = float(np.round(y / eps) * eps)
                    if snapped - x >= 2.0 * eps and stop - snapped >= 2.0 * eps:
                        y = snapped
                out.append(y)
                x = y
            return out

        nodes += arc(r_a, 0.5)
        nodes += arc(-0.5, l_a)

        mesh = Mesh(n_half, np.array(sorted(set(nodes))), (l_a, r_a))
        if not validate(mesh):
            return mesh
    raise RuntimeError("failed to draw a valid random mesh")


def random_state(rng, model, scale=0.03, slope_floor=None):
    """Random admissible state for an atomistic or coarse model.

    Displacements are a low trig combination on top of the homogeneous
    state, with the amplitude halved until every strain clears the floor.
    """
    if slope_floor is None:
        slope_floor = 0.55 * model.potential.inflection_point()
    x = model.mesh.nodes if hasattr(model, "mesh") else sites(model.n_half)
    u = np.zeros_like(x)
    for j in (1, 2, 3):
        c, d = rng.normal(), rng.normal()
        u += c * np.sin(2.0 * np.pi * j * x) + d * (np.cos(2.0 * np.pi * j * x) - 1.0)
    for _ in range(60):
        state = model.wrap(model.stretch * x + scale * u)
        slopes = (state.element_slopes() if hasattr(model, "mesh")
                  else state.first_differences())
        if np.min(slopes) >= slope_floor:
            return state
        scale *= 0.5
    raise RuntimeError("could not scale the perturbation into admissibility")


def _tiled_mesh(n_half, radius=4):
    """Adversarial mesh: a small window, then wall-to-wall minimal 2eps elements."""
    eps = 0.5 / n_half
    if (n_half - radius) % 2:
        radius += 1
    inner = [ell * eps for ell in range(-radius, radius + 1)]
    right = [(radius + 2 * j) * eps for j in range(1, (n_half - radius) // 2 + 1)]
    left = [-(radius + 2 * j) * eps for j in range(1, (n_half - radius) // 2)]
    nodes = np.array(sorted(inner + right + left))
    return Mesh(n_half, nodes, (-radius * eps, radius * eps))


def _suite_loads(amplitude=0.4, smooth_scale=0.3):
    from .forces import PeriodicLoad, SingularLoad

    w = 2.0 * np.pi
    smooth = PeriodicLoad(
        lambda x: smooth_scale * np.sin(w * x),
        lambda x: smooth_scale * w * np.cos(w * x),
        lambda x: -smooth_scale * w**2 * np.sin(w * x),
    )
    return (SingularLoad(amplitude), smooth)


def oracle_suite(seed=0, sizes=(8, 12, 16), cases=210, test_vectors=100):
    """Randomized cross-check of the fast paths against the brute oracles.

    Each case draws a random admissible mesh and state at one of the given
    chain sizes (plus, per size, one fully resolved mesh and one adversarial
    mesh tiled with minimal coarse elements) and runs six checks:

      energy_bondsum     assembled stored energy == per-bond sum, 1e-12 rel
      energy_clipping    assembled stored energy == dense clipping sum
      stability          fast minimum curvature == full lattice sweep, exact
      dual_norm          internal residual dominates the exact Riesz dual norm
      energy_gap         |stored-energy gap to the chain| <= mu
      load_gap           |load-pairing gap to the chain| <= mu_f + mu_q
      functional_bound   |load mismatch on random v| <= (eta_f+eta_q)*|v'|

    Returns a dict report; report["passed"] is False as soon as any check is
    violated beyond floating-point slack.
    """
    from .atomistic import AtomisticModel
    from .estimators import energy_estimators, external_residual, internal_residual
    from .estimators import stability as fast_stability
    from .lattice import LatticeFunction, sobolev_norms
    from .mesh import MeshFunction, fully_resolved_mesh
    from .qc import QcModel

    rng = np.random.default_rng(seed)
    loads = _suite_loads()
    checks = {}
    violations = []

    def record(name, case_id, excess, tol=0.0):
        slot = checks.setdefault(name, {"cases": 0, "violations": 0, "worst": -np.inf})
        slot["cases"] += 1
        slot["worst"] = max(slot["worst"], excess)
        if excess > tol:
            slot["violations"] += 1
            violations.append(f"{name} at {case_id}: excess {excess:.3e}")

    def run_case(case_id, model, yh):
        mesh = model.mesh
        n = model.n_half
        load = model.load
        energy = model.stored_energy(yh)
        scale = max(1.0, abs(energy))
        record("energy_bondsum", case_id,
               abs(model.stored_energy_bondsum(yh) - energy) - 1e-12 * scale)
        record("energy_clipping", case_id,
               abs(naive_qc_energy(model, yh) - energy) - 1e-12 * scale)

        fast = fast_stability(model, yh)
        a_ref, strain_ref = brute_stability(model, yh)
        exact = (fast.a_star == a_ref) and (fast.min_strain == strain_ref)
        record("stability", case_id, 0.0 if exact else 1.0)

        a_model = AtomisticModel(n, model.potential, load)
        _, eta = internal_residual(model, yh)
        dual = riesz_dual_norm(a_model, model, yh)
        # the absolute slack covers the roundoff floor of the Riesz solve on
        # meshes whose residual vanishes identically
        record("dual_norm", case_id, dual - eta - 1e-10 * eta - 1e-11)

        terms = energy_estimators(model, yh)
        iy = interpolate_to_lattice(yh, n)
        gap = a_model.stored_energy(iy) - energy
        record("energy_gap", case_id, abs(gap) - terms.mu - 1e-12)

        disp = MeshFunction(mesh, yh.values - model.stretch * mesh.nodes, 0.0)
        iu = interpolate_to_lattice(disp, n)
        pair_gap = lattice_load_pairing(load, iu) - mesh_load_pairing(load, disp)
        record("load_gap", case_id, abs(pair_gap) - (terms.mu_f + terms.mu_q) - 1e-12)

        ext = external_residual(model)
        budget = ext.eta_f + ext.eta_q
        worst = -np.inf
        for _ in range(test_vectors):
            vals = rng.normal(size=2 * n)
            vals[n - 1] = 0.0
            v = LatticeFunction(n, vals, 0.0)
            ihv = MeshFunction(mesh, v.eval(mesh.nodes), 0.0)
            r_ext = lattice_load_pairing(load, v) - mesh_load_pairing(load, ihv)
            worst = max(worst, abs(r_ext) - budget * sobolev_norms(v)[0] - 1e-12)
        record("functional_bound", case_id, worst)

    count = 0
    for i in range(cases):
        n = sizes[i % len(sizes)]
        load = loads[(i // len(sizes)) % len(loads)]
        mesh = random_mesh(rng, n)
        model = QcModel(mesh, load=load)
        yh = random_state(rng, model)
        run_case(f"case {i} (n={n})", model, yh)
        count += 1

    for n in sizes:
        for tag, mesh in (("resolved", fully_resolved_mesh(n)),
                          ("tiled", _tiled_mesh(n))):
            for j, load in enumerate(loads):
                model = QcModel(mesh, load=load)
                yh = random_state(rng, model)
                case_id = f"{tag} mesh (n={n}, load {j})"
                run_case(case_id, model, yh)
                count += 1
                if tag == "resolved":
                    _, eta = internal_residual(model, yh)
                    ext = external_residual(model)
                    terms = energy_estimators(model, yh)
                    total = (eta + ext.eta_f + ext.eta_q + ext.eta_q_weighted
                             + terms.mu + terms.mu_f + terms.mu_q)
                    record("resolved_zero", case_id, total)

    for slot in checks.values():
        if not np.isfinite(slot["worst"]):
            slot["worst"] = 0.0
    return {
        "seed": int(seed),
        "sizes": [int(n) for n in sizes],
        "cases": count,
        "test_vectors": int(test_vectors),
        "checks": checks,
        "violations": violations,
        "passed": not violations,
    }


def format_suite_report(report):
    """Plain-text rendering of an oracle_suite report, one line per check."""
    lines = [
        f"oracle suite: seed {report['seed']}, sizes {report['sizes']}, "
        f"{report['cases']} cases, {report['test_vectors']} test vectors each"
    ]
    width = max(len(name) for name in report["checks"])
    for name in sorted(report["checks"]):
        slot = report["checks"][name]
        status = "FAIL" if slot["violations"] else "pass"
        lines.append(
            f"  {status}  {name.ljust(width)}  cases {slot['cases']:4d}  "
            f"violations {slot['violations']}  worst excess {slot['worst']:.3e}"
        )
    lines.append("PASSED" if report["passed"] else
                 f"FAILED ({len(report['violations'])} violations)")
    return "\n".join(lines)
