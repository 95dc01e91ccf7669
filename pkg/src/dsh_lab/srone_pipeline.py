"""Invertible approximation of a non-invertible element along a model chain.

The pipeline mirrors the constructive argument that simple diagonal limits
of these algebra models have dense invertibles: rotate a singular value onto
a zero cross, push the element deep enough along the chain that every point
sees the cross periodically, open the block points with a soft threshold,
condense the periodic crosses into an initial segment, right-multiply by
the triangulating unitary, and perturb the resulting nilpotent by a scalar.
Every stage verifies its structural predicates on every spectrum point and
logs the distance it consumed from the epsilon budget.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dsh_model import (
    DiagonalMap,
    Element,
    FiniteDshModel,
    PointRef,
    apply_diagonal_map,
    block_starts,
    build_indicator,
    chain_models,
    check_simplicity_condition,
    compose_chain,
    eval_element,
    min_singular_over_points,
    norm_dist,
    scalar_element,
    soft_threshold,
    unit_element,
)
from .matrixkit import (
    DEFAULT_ATOL,
    PATH_ATOL,
    Permutation,
    _frozen,
    diagonal_radius,
    has_block_point,
    has_zero_cross,
    is_strictly_lower_triangular,
    min_singular_value,
    perm_matrix,
)
from .unitary_paths import _rmul_transposition, condense_path, v_n

INVERTIBLE_TOL = 1e-9


class PipelineError(RuntimeError):
    pass


class NotCloseToSingularError(PipelineError):
    pass


class SimplicityError(PipelineError):
    pass


class ChainTooShortError(PipelineError):
    def __init__(self, required_n1: int, message: str):
        self.required_n1 = required_n1
        super().__init__(message)


Predicate = tuple[str, bool, str | None]


def _require(preds: list[Predicate], name: str, ok: bool, witness: str | None = None) -> None:
    preds.append((name, ok, None if ok else witness))
    if not ok:
        raise PipelineError(f"predicate '{name}' failed: {witness}")


@dataclass
class StageRecord:
    name: str
    distance: float
    unitary_ids: tuple[str, ...]
    predicates: list[Predicate] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "unitary_ids": list(self.unitary_ids),
            "distance": self.distance,
            "predicates": {
                name: {"pass": ok, "witness": witness} for name, ok, witness in self.predicates
            },
        }


@dataclass
class PipelineCertificate:
    input_id: str
    epsilon: float
    stages: list[StageRecord]
    output: Element
    output_stage: int
    total_distance: float
    min_singular_value: float
    runtime_ms: float

    @property
    def budget_consumed(self) -> float:
        return sum(s.distance for s in self.stages)

    def to_json(self) -> dict:
        return {
            "input_element": self.input_id,
            "output_stage": self.output_stage,
            "stages": [s.to_json() for s in self.stages],
            "summary": {
                "epsilon": self.epsilon,
                "total_distance": self.total_distance,
                "stage_distance_sum": self.budget_consumed,
                "min_singular_value": self.min_singular_value,
                "runtime_ms": self.runtime_ms,
            },
        }


def find_singular_point(e: Element, tol: float) -> PointRef | None:
    """A free point with min singular value <= tol, preferring the highest
    level (then the first point in order); None when there is no such point."""
    best: PointRef | None = None
    for ref in sorted(e.model.free_refs()):
        if min_singular_value(e.values[ref]) <= tol:
            if best is None or ref.level > best.level:
                best = ref
    return best


@dataclass
class ZeroCrossStage:
    element: Element          # the perturbed element e'
    left: Element             # vL
    right: Element            # vR
    delta: Element            # diagonal gate: (1,1) entry 1 on U
    points: frozenset[PointRef]
    singular_point: PointRef
    distance: float
    predicates: list[Predicate] = field(default_factory=list)


def make_zero_cross(e: Element, eps: float) -> ZeroCrossStage:
    """Perturb within eps and rotate so row/column 1 vanishes at one point.

    The smallest singular value at the located point is replaced by zero
    (that is the whole distance), and the unitaries carry the corresponding
    singular bases so that vL e' vR has a zero cross in position 1 there.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    svs = {ref: min_singular_value(e.values[ref]) for ref in sorted(e.model.free_refs())}
    global_min = min(svs.values())
    if global_min > INVERTIBLE_TOL:
        raise NotCloseToSingularError(
            f"element is invertible (min singular value {global_min:.3g})"
        )
    if global_min >= eps:
        raise NotCloseToSingularError(
            f"not eps-close to singular: min singular value {global_min:.3g} >= eps={eps:.3g}"
        )
    candidates = [r for r, sv in svs.items() if sv < eps]
    p_star = max(candidates, key=lambda r: r.level)  # first point of the highest level
    n = e.model.dim(p_star.level)
    a = e.values[p_star]

    preds: list[Predicate] = []
    if not np.any(a):
        e_prime, v_mat, w_mat = e, np.eye(n, dtype=np.complex128), np.eye(n, dtype=np.complex128)
        distance = 0.0
    else:
        u_svd, s, vh = np.linalg.svd(a)
        distance = float(s[-1])
        s_cut = s.copy()
        s_cut[-1] = 0.0
        a_prime = u_svd @ np.diag(s_cut).astype(np.complex128) @ vh
        vals = dict(e.values)
        vals[p_star] = a_prime
        e_prime = Element(e.model, vals)
        p_swap = perm_matrix(Permutation.transposition(n, 1, n)) if n > 1 else np.eye(1)
        v_mat = p_swap @ u_svd.conj().T
        w_mat = vh.conj().T @ p_swap

    unit = unit_element(e.model)
    left_vals = dict(unit.values)
    right_vals = dict(unit.values)
    left_vals[p_star] = v_mat
    right_vals[p_star] = w_mat
    v_left = Element(e.model, left_vals)
    v_right = Element(e.model, right_vals)

    delta_vals = {}
    for ref in e.model.free_refs():
        d = np.zeros((e.model.dim(ref.level),) * 2, dtype=np.complex128)
        if ref == p_star:
            d[0, 0] = 1.0
        delta_vals[ref] = d
    delta = Element(e.model, delta_vals)

    rotated = (v_left * e_prime * v_right).values[p_star]
    _require(preds, "distance_within_eps", distance < eps, f"{distance} >= {eps}")
    _require(preds, "zero_cross_at_1", has_zero_cross(rotated, 1, PATH_ATOL),
             f"no zero cross at {p_star}")
    return ZeroCrossStage(
        element=e_prime, left=v_left, right=v_right, delta=delta,
        points=frozenset([p_star]), singular_point=p_star, distance=distance,
        predicates=preds,
    )


@dataclass
class PropagationStage:
    stage_index: int          # j'
    witness_index: int        # the simplicity witness stage
    left: Element             # V1
    right: Element            # V2
    image: Element            # G = V1 phi(e') V2
    M: int
    N: int
    R: int
    predicates: list[Predicate] = field(default_factory=list)


def propagate_crosses(chain: list[DiagonalMap], j: int, zc: ZeroCrossStage,
                      N: int | None = None) -> PropagationStage:
    """Push the zero cross down the chain until it recurs every M entries.

    Finds the simplicity witness stage for U (every point there sees the
    cross through its eigenvalue list), sets M to twice that stage's largest
    dimension, and picks the first later stage whose smallest dimension is
    at least NM+1. The gathering unitaries are transposition paths driven by
    the indicator (1s at k+aM over each block start k) times the mapped
    cross gate, exactly the windowed product construction.
    """
    models = chain_models(chain)
    if not (1 <= j <= len(models)) or zc.element.model != models[j - 1]:
        raise ValueError("stage data does not sit at chain position j")
    holds, j_witness = check_simplicity_condition(chain, j, zc.points)
    if not holds:
        raise SimplicityError(
            f"simplicity condition fails: no chain stage meets U={sorted(zc.points)}"
        )
    M = 2 * models[j_witness - 1].largest_dim
    R = models[j - 1].largest_dim
    if N is None:
        N = R + M + 3
    required = N * M + 1
    jp = None
    for idx in range(j_witness + 1, len(models) + 1):
        if models[idx - 1].smallest_dim >= required:
            jp = idx
            break
    if jp is None:
        raise ChainTooShortError(
            required,
            f"chain exhausted: need a stage with smallest dimension >= {required} "
            f"(N={N}, M={M}); deepen the chain",
        )
    model_jp = models[jp - 1]
    phi = compose_chain(chain, j, jp)
    delta_p = apply_diagonal_map(phi, zc.delta)
    g = apply_diagonal_map(phi, zc.left * zc.element * zc.right)
    theta = build_indicator(model_jp, M, tuple(a * M for a in range(N)))

    preds: list[Predicate] = []
    starts = block_starts(model_jp)
    v_vals: dict[PointRef, np.ndarray] = {}
    for ref in model_jp.free_refs():
        n = model_jp.dim(ref.level)
        th = np.real(np.diag(theta.values[ref]))
        dl = np.real(np.diag(delta_p.values[ref]))
        g_val = g.values[ref]
        for i in range(1, n + 1):
            if dl[i - 1] > 0.0:
                _require(preds, "gate_marks_zero_crosses",
                         has_zero_cross(g_val, i, PATH_ATOL),
                         f"{ref}: gate positive at {i} without a zero cross")
        v = np.eye(n, dtype=np.complex128)
        for k in range(1, n - (M - 1) + 1):
            if th[k - 1] == 0.0:
                continue
            _require(preds, "gathering_window_has_full_gate",
                     any(dl[k + a - 1] == 1.0 for a in range(M)),
                     f"{ref}: no gate value 1 in window [{k}, {k + M - 1}]")
            for a in range(1, M):
                _rmul_transposition(v, k, k + a, th[k - 1] * dl[k + a - 1])
        v_vals[ref] = _frozen(v)
    gather = Element(model_jp, v_vals)
    v1 = gather * apply_diagonal_map(phi, zc.left)
    v2 = apply_diagonal_map(phi, zc.right) * gather.adjoint()
    image = gather * g * gather.adjoint()

    for ref in model_jp.all_refs():
        val = eval_element(image, ref)
        for k in starts[ref]:
            for a in range(N):
                _require(preds, "periodic_zero_crosses",
                         has_zero_cross(val, k + a * M, PATH_ATOL),
                         f"{ref}: missing zero cross at {k + a * M}")
        _require(preds, "radius_bound",
                 diagonal_radius(val, PATH_ATOL) <= R + M - 1,
                 f"{ref}: radius {diagonal_radius(val, PATH_ATOL)} > {R + M - 1}")
    return PropagationStage(
        stage_index=jp, witness_index=j_witness, left=v1, right=v2, image=image,
        M=M, N=N, R=R, predicates=preds,
    )


def open_block_points(g: Element, eps: float) -> tuple[Element, float, float]:
    """Soft-threshold with the largest delta whose distance stays under eps.

    Returns (thresholded element, delta, measured distance). The bracket
    comes from the per-point bound distance <= delta * n_l, so delta at
    least eps/n_l is always available; the binary search pushes it up to
    where the measured distance would reach eps (or everything is zeroed).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    n_l = g.model.largest_dim

    def dist_at(delta: float) -> float:
        return norm_dist(g, soft_threshold(g, delta))

    lo = eps / n_l
    while dist_at(lo) >= eps:
        lo /= 2.0
    max_mod = max((float(np.max(np.abs(v))) if v.size else 0.0) for v in g.values.values())
    hi = max_mod + eps / n_l
    if dist_at(hi) < eps:
        lo = hi
    else:
        for _ in range(60):
            mid = (lo + hi) / 2
            if dist_at(mid) < eps:
                lo = mid
            else:
                hi = mid
    delta = lo
    out = soft_threshold(g, delta)
    return out, delta, dist_at(delta)


def condense_crosses(g_prime: Element, M: int, N: int) -> tuple[Element, Element]:
    """Walk the crosses at k, k+M, ..., k+(N-1)M into k, k+1, ..., k+N-1.

    Requires a block point at every block start, so the condensation path
    acts inside one diagonal block per start; the diagonal radius grows by
    at most 2 at every point.
    """
    v3, out, _ = _condense_crosses_impl(g_prime, M, N)
    return v3, out


def _condense_crosses_impl(g_prime: Element, M: int, N: int,
                           ) -> tuple[Element, Element, list[Predicate]]:
    model = g_prime.model
    nm = N * M
    if model.smallest_dim <= nm:
        raise ValueError(f"need n_1 > NM = {nm}, got n_1 = {model.smallest_dim}")
    theta = build_indicator(model, nm, (0,))
    path = condense_path(nm, tuple(1 + a * M for a in range(N)))
    starts = block_starts(model)

    preds: list[Predicate] = []
    for ref in model.all_refs():
        val = eval_element(g_prime, ref)
        for k in starts[ref]:
            for a in range(N):
                _require(preds, "input_periodic_crosses",
                         has_zero_cross(val, k + a * M, DEFAULT_ATOL),
                         f"{ref}: missing zero cross at {k + a * M}")
            _require(preds, "input_block_points",
                     has_block_point(val, k, DEFAULT_ATOL),
                     f"{ref}: no block point at {k}")

    blocks: dict[float, np.ndarray] = {}
    v_vals: dict[PointRef, np.ndarray] = {}
    for ref in model.free_refs():
        n = model.dim(ref.level)
        th = np.real(np.diag(theta.values[ref]))
        v = np.eye(n, dtype=np.complex128)
        for k in range(1, n + 1):
            t = float(th[k - 1])
            if t == 0.0:
                continue
            if k > n - nm:
                raise PipelineError(f"active window at {k} does not fit below dimension {n}")
            if t not in blocks:
                blocks[t] = path(t)
            v[k - 1:k - 1 + nm, k - 1:k - 1 + nm] = blocks[t]
        v_vals[ref] = _frozen(v)
    v3 = Element(model, v_vals)
    out = v3 * g_prime * v3.adjoint()

    for ref in model.all_refs():
        before = eval_element(g_prime, ref)
        after = eval_element(out, ref)
        for k in starts[ref]:
            for z in range(k, k + N):
                _require(preds, "consecutive_crosses",
                         has_zero_cross(after, z, PATH_ATOL),
                         f"{ref}: missing zero cross at {z}")
        _require(preds, "radius_growth_at_most_2",
                 diagonal_radius(after, PATH_ATOL) <= diagonal_radius(before, PATH_ATOL) + 2,
                 f"{ref}: radius grew by more than 2")
    return v3, out, preds


def triangulate(g_second: Element, N: int) -> tuple[Element, Element]:
    """Right-multiply by the per-point triangulating unitary.

    Requires consecutive crosses k..k+N-1 at every block start and diagonal
    radius < N everywhere; the product is strictly lower triangular at every
    point.
    """
    v4, out, _ = _triangulate_impl(g_second, N)
    return v4, out


def _triangulate_impl(g_second: Element, N: int,
                      ) -> tuple[Element, Element, list[Predicate]]:
    model = g_second.model
    if model.smallest_dim <= N:
        raise ValueError(f"need n_1 > N = {N}, got n_1 = {model.smallest_dim}")
    theta = build_indicator(model, N, (0,))
    starts = block_starts(model)

    preds: list[Predicate] = []
    for ref in model.all_refs():
        val = eval_element(g_second, ref)
        for k in starts[ref]:
            for z in range(k, k + N):
                _require(preds, "input_consecutive_crosses",
                         has_zero_cross(val, z, DEFAULT_ATOL),
                         f"{ref}: missing zero cross at {z}")
        _require(preds, "input_radius_below_N",
                 diagonal_radius(val, DEFAULT_ATOL) < N,
                 f"{ref}: radius {diagonal_radius(val, DEFAULT_ATOL)} >= N={N}")

    v_vals = {
        ref: v_n(tuple(np.real(np.diag(theta.values[ref]))), N)
        for ref in model.free_refs()
    }
    v4 = Element(model, v_vals)
    out = g_second * v4
    for ref in model.all_refs():
        val = eval_element(out, ref)
        _require(preds, "strictly_lower_triangular",
                 is_strictly_lower_triangular(val, PATH_ATOL),
                 f"{ref}: product is not strictly lower triangular")
    return v4, out, preds


def rordam_invert(t: Element, delta: float) -> Element:
    """Add delta times the unit to a pointwise-nilpotent element.

    A strictly lower triangular value is nilpotent, so the sum is invertible
    at every point (determinant delta^n); the caller reads the measured
    minimum singular value off the certificate.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    for ref in t.model.all_refs():
        if not is_strictly_lower_triangular(eval_element(t, ref), PATH_ATOL):
            raise ValueError(f"value at {ref} is not strictly lower triangular")
    out = t + scalar_element(t.model, delta)
    if min_singular_over_points(out) <= 0.0:
        raise PipelineError("perturbed element is numerically singular")
    return out


def approximate_by_invertible(chain: list[DiagonalMap], a: Element, eps: float,
                              j: int = 1, input_id: str = "input",
                              ) -> tuple[Element, PipelineCertificate]:
    """Produce an invertible element within eps of the image of ``a``.

    Budget: eps/4 for the singular-value cut, eps/4 for the soft threshold,
    eps/8 for the scalar perturbation (half the final quarter, leaving slack
    for the triangulation tolerance). The certificate logs each stage's
    unitaries, verified predicates, and consumed distance, plus the measured
    total distance and minimum singular value.
    """
    t0 = time.perf_counter()
    if eps <= 0:
        raise ValueError("eps must be positive")
    models = chain_models(chain)
    if not (1 <= j <= len(models)) or a.model != models[j - 1]:
        raise ValueError("element does not live at chain position j")

    if find_singular_point(a, INVERTIBLE_TOL) is None:
        minsv = min_singular_over_points(a)
        cert = PipelineCertificate(
            input_id=input_id, epsilon=eps,
            stages=[StageRecord("already_invertible", 0.0, (),
                                [("invertible", True, None)])],
            output=a, output_stage=j, total_distance=0.0,
            min_singular_value=minsv,
            runtime_ms=1000 * (time.perf_counter() - t0),
        )
        return a, cert

    zc = make_zero_cross(a, eps / 4)
    prop = propagate_crosses(chain, j, zc)
    if not prop.N > prop.R + prop.M + 2:
        raise PipelineError(f"parameter discipline violated: N={prop.N} <= R+M+2")

    g_prime, delta_thresh, d_thresh = open_block_points(prop.image, eps / 4)
    thresh_preds: list[Predicate] = []
    starts = block_starts(g_prime.model)
    for ref in g_prime.model.all_refs():
        val = eval_element(g_prime, ref)
        before = eval_element(prop.image, ref)
        for k in starts[ref]:
            for step in range(prop.N):
                _require(thresh_preds, "crosses_retained",
                         has_zero_cross(val, k + step * prop.M, DEFAULT_ATOL),
                         f"{ref}: lost zero cross at {k + step * prop.M}")
            _require(thresh_preds, "block_points_open",
                     has_block_point(val, k, DEFAULT_ATOL),
                     f"{ref}: no exact block point at {k}")
        _require(thresh_preds, "radius_not_increased",
                 diagonal_radius(val) <= diagonal_radius(before, PATH_ATOL),
                 f"{ref}: radius increased")

    v3, g_second, condense_preds = _condense_crosses_impl(g_prime, prop.M, prop.N)
    v4, t_el, triangulate_preds = _triangulate_impl(g_second, prop.N)
    delta_r = eps / 8
    core = rordam_invert(t_el, delta_r)
    a_prime = (v3.adjoint() * core * v4.adjoint() * v3)
    a_prime = prop.left.adjoint() * a_prime * prop.right.adjoint()

    phi = compose_chain(chain, j, prop.stage_index)
    total = norm_dist(apply_diagonal_map(phi, a), a_prime)
    minsv = min_singular_over_points(a_prime)
    core_minsv = min_singular_over_points(core)

    final_preds: list[Predicate] = []
    _require(final_preds, "total_distance_below_eps", total < eps, f"{total} >= {eps}")
    stage_sum = zc.distance + d_thresh + delta_r
    _require(final_preds, "stage_sum_below_eps", stage_sum < eps,
             f"stage distances sum to {stage_sum} >= {eps}")
    _require(final_preds, "budget_soundness", total <= stage_sum + 1e-9,
             f"measured {total} exceeds stage sum {stage_sum}")
    _require(final_preds, "invertible_output", minsv > 0.0, "zero singular value")
    _require(final_preds, "unitary_sandwich_exactness",
             abs(minsv - core_minsv) <= 1e-10 * max(1.0, core_minsv),
             f"min singular value drifted: {minsv} vs {core_minsv}")

    stages = [
        StageRecord("make_zero_cross", zc.distance, ("vL", "vR"), zc.predicates),
        StageRecord("propagate_crosses", 0.0, ("V1", "V2"), prop.predicates),
        StageRecord("open_block_points", d_thresh, (),
                    thresh_preds + [("threshold_delta_positive", delta_thresh > 0,
                                     str(delta_thresh))]),
        StageRecord("condense_crosses", 0.0, ("V3",), condense_preds),
        StageRecord("triangulate", 0.0, ("V4",), triangulate_preds),
        StageRecord("rordam_invert", delta_r, (), final_preds),
    ]
    cert = PipelineCertificate(
        input_id=input_id, epsilon=eps, stages=stages, output=a_prime,
        output_stage=prop.stage_index, total_distance=total,
        min_singular_value=minsv, runtime_ms=1000 * (time.perf_counter() - t0),
    )
    return a_prime, cert


def plant_singular_element(model: FiniteDshModel, rng: np.random.Generator,
                           scale: float = 0.02) -> Element:
    """A random small-norm element with one exactly rank-deficient value.

    The deficiency is planted at the first point of the highest level by
    zeroing the smallest singular value; every other point stays generically
    invertible at this scale.
    """
    vals = {}
    refs = sorted(model.free_refs())
    target = max(refs, key=lambda r: (r.level, r.point))
    for ref in refs:
        n = model.dim(ref.level)
        m = scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) \
            + scale * np.eye(n)
        if ref == target:
            u, s, vh = np.linalg.svd(m)
            s[-1] = 0.0
            m = u @ np.diag(s).astype(np.complex128) @ vh
        vals[ref] = m
    return Element(model, vals)
