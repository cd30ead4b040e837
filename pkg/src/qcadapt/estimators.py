"""A posteriori error control for the coarse-grained chain.

Everything here is computable from the coarse solution alone.  The pieces:

* internal residual: per node, how much the split bond forces around that
  node disagree with the full-bond forces of the mesh interpolant;
* external residual: per element, how much nodal load lumping can deviate
  from the exact load pairing, in a plain and a weighted variant (the weight
  compensates loads that blow up toward the pinned point);
* stability: the smallest site curvature sum of the lattice interpolant,
  evaluated in O(mesh) work but bit-identical to the full lattice sweep;
* energy estimators: per node and element, first-order energy discrepancies
  whose signed sum reproduces the energy mismatch exactly;
* refinement indicators combining the above per element;
* build_report: one call bundling estimates, constants, and bounds.
"""

from dataclasses import dataclass, field

import numpy as np

from .forces import wrap_to_period
from .lattice import Bond, bond_difference, interpolate_to_lattice
from .mesh import MeshFunction

__all__ = [
    "curvature_sum",
    "microcell_slopes",
    "internal_residual",
    "external_residual",
    "ExternalResidual",
    "stability",
    "StabilityResult",
    "hessian_constant",
    "lipschitz_constant",
    "energy_estimators",
    "EnergyTerms",
    "indicators",
    "build_report",
    "EstimateReport",
]

_TOL = 1e-9
_LN2 = float(np.log(2.0))


def curvature_sum(potential, d1, d2_left, d2_right):
    """Site curvature A = phi''(d1) + 2 phi''(d2_left) + 2 phi''(d2_right)."""
    return (
        potential.eval(d1, order=2)
        + 2.0 * potential.eval(d2_left, order=2)
        + 2.0 * potential.eval(d2_right, order=2)
    )


def microcell_slopes(yh, cell_indices=None):
    """Slopes of the lattice interpolant of yh, one per lattice cell.

    Cells are indexed by their right site.  A cell contained in a single
    element returns that element's slope float unchanged, so downstream
    comparisons against element-based shortcuts are exact.
    """
    mesh = yh.mesh
    n = mesh.n_half
    eps = mesh.epsilon
    if cell_indices is None:
        ell = np.arange(-n + 1, n + 1)
    else:
        ell = np.asarray(cell_indices, dtype=np.int64)
    left = (ell - 1.0) * eps
    right = ell * eps
    mid = (ell - 0.5) * eps
    k = np.atleast_1d(mesh.locate(mid))
    shift = np.ceil(mid - mesh.nodes[-1])
    lo = mesh.elem_left[k] + shift
    hi = mesh.elem_right[k] + shift
    tol = _TOL * eps
    inside = (lo <= left + tol) & (right <= hi + tol)
    out = np.where(inside, yh.element_slopes()[k], 0.0)
    if not np.all(inside):
        idx = np.flatnonzero(~inside)
        out[idx] = (yh.eval(right[idx]) - yh.eval(left[idx])) / eps
    return out


def _canonical_site(ell, n):
    return (ell + n - 1) % (2 * n) - (n - 1)


def continuum_nodes(mesh):
    """Indices of nodes in the closed coarse region, interfaces included."""
    l_a, r_a = mesh.atom_interval
    tol = _TOL * mesh.epsilon
    outside = (mesh.nodes <= l_a + tol) | (mesh.nodes >= r_a - tol)
    return np.flatnonzero(outside)


def bonds_through(mesh, x):
    """Bonds whose open interval contains x: at most one first plus two second."""
    eps = mesh.epsilon
    t = x / eps
    j = int(np.round(t))
    out = []
    if abs(t - j) <= _TOL:
        out.append(Bond(j - 1, 2, eps))
    else:
        f = int(np.floor(t))
        out.append(Bond(f, 1, eps))
        out.append(Bond(f - 1, 2, eps))
        out.append(Bond(f, 2, eps))
    return out


def internal_residual(model, yh):
    """Per-node squared force mismatch and the accumulated residual norm."""
    mesh = model.mesh
    pot = model.potential
    slopes = yh.element_slopes()
    eta_sq = np.zeros(mesh.dof)
    for k in continuum_nodes(mesh):
        total = 0.0
        for bond in bonds_through(mesh, mesh.nodes[k]):
            split = model.split_bond(bond)
            r = bond.neighbor_range
            full = pot.eval(r * bond_difference(yh, bond), order=1)
            if split.atom_part is not None:
                part = pot.eval(r * model._atom_quotient(yh, split.atom_part), order=1)
                total += split.atom_length * (full - part) ** 2
            for ke, length in split.pieces:
                part = pot.eval(r * slopes[ke], order=1)
                total += length * (full - part) ** 2
        eta_sq[k] = total
    return eta_sq, float(np.sqrt(3.0 * np.sum(eta_sq)))


@dataclass
class ExternalResidual:
    """Element-wise load-consistency terms and their accumulated norms."""

    eta_f_sq: np.ndarray
    eta_q_sq: np.ndarray
    eta_q_weighted_sq: np.ndarray
    eta_f: float
    eta_q: float
    eta_q_weighted: float


def _singular_weight(load, x):
    t = np.abs(wrap_to_period(x))
    safe = np.where(t > 0.0, t, 1.0)
    return np.where(t > 0.0, t * np.log(safe) ** 2, 0.0)


def _covered_elements(mesh):
    """Extended continuum elements plus the atomistic elements at the interfaces."""
    flags = mesh.extended_continuum_elements()
    if not flags.any():
        # no coarse region at all, hence no interface flanks either
        return flags
    l_a, r_a = mesh.atom_interval
    r_node = mesh.node_index(r_a)
    l_node = mesh.node_index(l_a)
    if r_node is not None:
        flags[r_node] = True  # element ending at the right interface
    if l_node is not None:
        flags[(l_node + 1) % mesh.dof] = True  # element starting at the left interface
    return flags


def external_residual(model):
    """Load-dependent residual terms; zero state-independence makes them cacheable."""
    mesh = model.mesh
    load = model.load
    eps = model.epsilon
    dof = mesh.dof
    eta_f_sq = np.zeros(dof)
    eta_q_sq = np.zeros(dof)
    eta_qw_sq = np.zeros(dof)
    if not load.is_zero:
        pi_sq = np.pi**2
        compute = _covered_elements(mesh)
        for k in np.flatnonzero(compute):
            a, b = float(mesh.elem_left[k]), float(mesh.elem_right[k])
            h = b - a
            c4 = eps**4 + h**4
            f_sq = load.l2_norm(a, b) ** 2
            d1_sq = load.l2_norm(a, b, order=1) ** 2
            d2_sq = load.l2_norm(a, b, order=2) ** 2
            eta_f_sq[k] = h**2 / pi_sq * f_sq
            eta_q_sq[k] = c4 * d1_sq + c4 / (4.0 * pi_sq) * d2_sq
            wd2_sq = load.integrate(
                lambda x: (_singular_weight(load, x) * load.eval(x, order=2)) ** 2, a, b
            )
            eta_qw_sq[k] = c4 * d1_sq + c4 / _LN2**2 * wd2_sq
    extended = mesh.extended_continuum_elements()
    return ExternalResidual(
        eta_f_sq,
        eta_q_sq,
        eta_qw_sq,
        float(np.sqrt(np.sum(eta_f_sq[extended]))),
        float(np.sqrt(np.sum(eta_q_sq[extended]))),
        float(np.sqrt(np.sum(eta_qw_sq[extended]))),
    )


@dataclass
class StabilityResult:
    a_star: float
    min_strain: float
    assumptions_ok: bool

    @property
    def stable(self):
        return self.a_star > 0.0


def stability(model, yh):
    """Smallest site curvature of the lattice interpolant, in O(mesh) work.

    Sites whose three surrounding cells avoid every node see one element
    slope only, so each such element contributes a single candidate; the
    remaining sites cluster around nodes and are evaluated directly.  Both
    branches draw their cell slopes from microcell_slopes, which keeps the
    minimum bit-identical to a full per-site sweep.
    """
    mesh = model.mesh
    pot = model.potential
    n = model.n_half
    eps = model.epsilon
    s = yh.element_slopes()

    # elements containing at least one fully interior site plus margins
    lo = np.ceil(mesh.elem_left / eps - _TOL).astype(np.int64) + 2
    hi = np.floor(mesh.elem_right / eps + _TOL).astype(np.int64) - 1
    bulk = lo <= hi
    candidates = curvature_sum(pot, s[bulk], s[bulk] + s[bulk], s[bulk] + s[bulk])
    a_star = float(np.min(candidates)) if candidates.size else np.inf

    # sites within reach of a node
    near = set()
    for x in mesh.nodes:
        t = x / eps
        j = int(np.round(t))
        if abs(t - j) <= _TOL:
            near.update((j, j + 1))
        else:
            f = int(np.floor(t))
            near.update((f, f + 1, f + 2))
    sites = np.array(sorted({_canonical_site(ell, n) for ell in near}), dtype=np.int64)
    cells = np.unique(
        _canonical_site(np.concatenate((sites - 1, sites, sites + 1)), n)
    )
    cell_slope = dict(zip(cells.tolist(), microcell_slopes(yh, cells)))
    d_m = np.array([cell_slope[_canonical_site(ell - 1, n)] for ell in sites])
    d_0 = np.array([cell_slope[int(ell)] for ell in sites])
    d_p = np.array([cell_slope[_canonical_site(ell + 1, n)] for ell in sites])
    if sites.size:
        a_near = curvature_sum(pot, d_0, d_m + d_0, d_0 + d_p)
        a_star = min(a_star, float(np.min(a_near)))

    # smallest strain over cells: bulk element slopes plus the near-node cells
    full_cell = (np.ceil(mesh.elem_left / eps - _TOL).astype(np.int64) + 1
                 <= np.floor(mesh.elem_right / eps + _TOL).astype(np.int64))
    strain_candidates = [s[full_cell]] if np.any(full_cell) else []
    if cells.size:
        strain_candidates.append(np.array([cell_slope[int(c)] for c in cells]))
    min_strain = float(np.min(np.concatenate(strain_candidates)))

    floor = 0.5 * pot.inflection_point()
    return StabilityResult(a_star, min_strain, bool(min_strain >= floor))


def hessian_constant(potential, t):
    """Curvature envelope of the cell energy density for strains above t."""
    return potential.derivative_bound(2, t) + 4.0 * potential.derivative_bound(2, 2.0 * t)


def lipschitz_constant(potential, t):
    """Third-derivative envelope of the cell energy density above t."""
    return potential.derivative_bound(3, t) + 8.0 * potential.derivative_bound(3, 2.0 * t)


@dataclass
class EnergyTerms:
    """First-order energy discrepancy estimators."""

    mu_nodes: np.ndarray
    mu_signed_nodes: np.ndarray
    mu_f_nodes: np.ndarray
    mu_q_elems: np.ndarray
    mu: float
    mu_f: float
    mu_q: float


def _element_site_range(eps, a, b):
    first = int(np.ceil(a / eps - _TOL))
    last = int(np.floor(b / eps + _TOL))
    return first, last


def energy_estimators(model, yh):
    mesh = model.mesh
    pot = model.potential
    load = model.load
    eps = model.epsilon
    dof = mesh.dof
    slopes = yh.element_slopes()

    # bondwise energy mismatch, one owner node per bond
    mu_signed = np.zeros(dof)
    for k in continuum_nodes(mesh):
        total = 0.0
        for bond in bonds_through(mesh, mesh.nodes[k]):
            split = model.split_bond(bond)
            r = bond.neighbor_range
            full = pot.eval(r * bond_difference(yh, bond))
            if split.atom_part is not None:
                part = pot.eval(r * model._atom_quotient(yh, split.atom_part))
                total += split.atom_length / r * (full - part)
            for ke, length in split.pieces:
                total += length / r * (full - pot.eval(r * slopes[ke]))
        mu_signed[k] = total
    mu_nodes = np.abs(mu_signed)

    mu_f = np.zeros(dof)
    mu_q = np.zeros(dof)
    if not load.is_zero:
        disp = MeshFunction(mesh, yh.values - model.stretch * mesh.nodes, 0.0)
        iu = interpolate_to_lattice(disp, model.n_half)
        u_slopes = slopes - model.stretch
        tol = _TOL * eps

        # jump terms at off-lattice nodes
        for k in continuum_nodes(mesh):
            x = mesh.nodes[k]
            t = x / eps
            if abs(t - np.round(t)) <= _TOL:
                continue
            f = np.floor(t)
            jump = u_slopes[(k + 1) % dof] - u_slopes[k]
            mu_f[k] = 0.5 * eps * load.l1_norm(f * eps, (f + 1.0) * eps) * abs(jump)

        # element quadrature terms
        def lumped(v_at, v_slope, a, b):
            return load.integrate(
                lambda x: np.abs(
                    load.eval(x, order=2) * v_at(x) + 2.0 * load.eval(x, order=1) * v_slope
                ),
                a,
                b,
                subdiv=8,
            )

        for k in np.flatnonzero(_covered_elements(mesh)):
            a, b = float(mesh.elem_left[k]), float(mesh.elem_right[k])
            h = b - a
            su = u_slopes[k]
            term_u = lumped(disp.eval, su, a, b)
            first, last = _element_site_range(eps, a, b)
            left_sliver = first * eps - a > tol
            right_sliver = b - last * eps > tol
            if not (left_sliver or right_sliver):
                term_i = term_u
            else:
                term_i = 0.0
                lo = a
                if left_sliver:
                    cell_slope = (iu.value(first) - iu.value(first - 1)) / eps
                    term_i += lumped(iu.eval, cell_slope, a, first * eps)
                    lo = first * eps
                hi = b
                if right_sliver:
                    cell_slope = (iu.value(last + 1) - iu.value(last)) / eps
                    term_i += lumped(iu.eval, cell_slope, last * eps, b)
                    hi = last * eps
                if hi - lo > tol:
                    term_i += lumped(disp.eval, su, lo, hi)
            mu_q[k] = 0.25 * eps**2 * term_i + 0.25 * h**2 * term_u

    kc = continuum_nodes(mesh)
    extended = mesh.extended_continuum_elements()
    return EnergyTerms(
        mu_nodes,
        mu_signed,
        mu_f,
        mu_q,
        float(np.sum(mu_nodes[kc])),
        float(np.sum(mu_f[kc])),
        float(np.sum(mu_q[extended])),
    )


def indicators(mesh, eta_sq, eta_f_sq, terms, a_star, c_h):
    """Per-element refinement indicators for the two error notions.

    Gradient indicators return as plain values (square roots of the grouped
    residual masses scaled by 4/a_star); energy indicators add the grouped
    first-order terms.  Elements inside the atomistic window stay zero.
    """
    dof = mesh.dof
    l_a, r_a = mesh.atom_interval
    r_node = mesh.node_index(r_a)
    l_node = mesh.node_index(l_a)
    mu_n, mu_f, mu_q = terms.mu_nodes, terms.mu_f_nodes, terms.mu_q_elems
    rho_grad = np.zeros(dof)
    rho_energy = np.zeros(dof)
    for k in np.flatnonzero(~mesh.is_atomistic):
        km = (k - 1) % dof
        kp = (k + 1) % dof
        if km == r_node:
            core = 3.0 * eta_sq[km] + 1.5 * eta_sq[k] + eta_f_sq[k] + eta_f_sq[km]
            extra = (mu_n[km] + 0.5 * mu_n[k] + mu_f[km] + 0.5 * mu_f[k]
                     + mu_q[km] + mu_q[k])
        elif k == l_node:
            core = 1.5 * eta_sq[km] + 3.0 * eta_sq[k] + eta_f_sq[k] + eta_f_sq[kp]
            extra = (0.5 * mu_n[km] + mu_n[k] + 0.5 * mu_f[km] + mu_f[k]
                     + mu_q[k] + mu_q[kp])
        else:
            core = 1.5 * (eta_sq[km] + eta_sq[k]) + eta_f_sq[k]
            extra = 0.5 * (mu_n[km] + mu_n[k] + mu_f[km] + mu_f[k]) + mu_q[k]
        rho_grad[k] = np.sqrt(4.0 / a_star * core)
        rho_energy[k] = 4.0 * c_h / a_star**2 * core + extra
    return rho_grad, rho_energy


@dataclass
class EstimateReport:
    eta_sq_nodes: np.ndarray
    eta: float
    external: ExternalResidual
    stability: StabilityResult
    terms: EnergyTerms
    strain_parameter: float
    c_h: float
    c_lip: float
    use_weighted: bool
    gradient_bound: float = None
    energy_bound: float = None
    grad_indicator: np.ndarray = None
    energy_indicator: np.ndarray = None
    flags: list = field(default_factory=list)

    @property
    def eta_q_selected(self):
        return self.external.eta_q_weighted if self.use_weighted else self.external.eta_q

    def to_dict(self):
        return {
            "eta": self.eta,
            "eta_f": self.external.eta_f,
            "eta_q": self.external.eta_q,
            "eta_q_weighted": self.external.eta_q_weighted,
            "a_star": self.stability.a_star,
            "min_strain": self.stability.min_strain,
            "assumptions_ok": self.stability.assumptions_ok,
            "strain_parameter": self.strain_parameter,
            "c_h": self.c_h,
            "c_lip": self.c_lip,
            "mu": self.terms.mu,
            "mu_f": self.terms.mu_f,
            "mu_q": self.terms.mu_q,
            "use_weighted": self.use_weighted,
            "gradient_bound": self.gradient_bound,
            "energy_bound": self.energy_bound,
            "flags": list(self.flags),
        }


def build_report(model, yh, use_weighted=True, external=None):
    """Assemble every estimator and, when stability allows, the two bounds.

    `external` accepts a precomputed ExternalResidual for the same mesh and
    load, since those terms do not depend on the state.
    """
    eta_sq, eta = internal_residual(model, yh)
    if external is None:
        external = external_residual(model)
    stab = stability(model, yh)
    terms = energy_estimators(model, yh)

    floor = 0.5 * model.potential.inflection_point()
    t = min(stab.min_strain, floor)
    c_h = hessian_constant(model.potential, t)
    c_lip = lipschitz_constant(model.potential, t)

    report = EstimateReport(
        eta_sq_nodes=eta_sq,
        eta=eta,
        external=external,
        stability=stab,
        terms=terms,
        strain_parameter=t,
        c_h=c_h,
        c_lip=c_lip,
        use_weighted=use_weighted,
    )
    if not stab.assumptions_ok:
        report.flags.append(
            f"strain floor violated: min cell strain {stab.min_strain:.6g} "
            f"below half the inflection point"
        )
    if stab.a_star > 0.0:
        eta_q_sel = report.eta_q_selected
        report.gradient_bound = 2.0 / stab.a_star * (eta + external.eta_f + eta_q_sel)
        report.energy_bound = (
            4.0 * c_h / stab.a_star**2 * (eta**2 + external.eta_f**2 + eta_q_sel**2)
            + terms.mu + terms.mu_f + terms.mu_q
        )
        report.grad_indicator, report.energy_indicator = indicators(
            model.mesh, eta_sq, external.eta_f_sq, terms, stab.a_star, c_h
        )
    else:
        report.flags.append(
            f"nonpositive stability constant {stab.a_star:.6g}; bounds unavailable"
        )
    return report
