"""Measured quantities of the evolving field.

Average-position trajectories and ray fits for the boundary shift, interior
and transmitted fractions, the emission Husimi projection with its centroid
and strength, the tunneling-direction extraction, the per-mode image-distance
average, and the back-extrapolated emission origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import DomainError, FitQualityError, RangeError, UndefinedCentroidError
from .packet import FieldFrame, PacketSpec
from .potential import PotentialSpec
from .spectrum import TUNNELING, delta_j

#: exterior-lobe mask starts this far outside the boundary, past the
#: evanescent skirt that would otherwise bias centroids
EXTERIOR_SKIRT = 0.05


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    position: tuple
    mask: str = "all"


def _mask_weights(frame: FieldFrame, mask: str, radius: float):
    """Radial Jacobian weights restricted to a named region.

    The mask edge is anti-aliased over one radial cell, which keeps the
    split second-order accurate in the grid spacing.
    """
    r = frame.r
    w = np.abs(frame.values) ** 2 * r[:, None]
    if mask == "all":
        sel = np.ones(len(r))
    elif mask in ("interior", "exterior"):
        edge = radius if mask == "interior" else radius + EXTERIOR_SKIRT
        sel = np.clip((edge - r) / frame.dr + 0.5, 0.0, 1.0)
        if mask == "exterior":
            sel = 1.0 - sel
    else:
        raise DomainError(f"unknown mask {mask!r}")
    return w * sel[:, None]


def _integrate(frame: FieldFrame, integrand):
    # theta is periodic and uniform: exact trapezoid = plain sum * dtheta;
    # the Jacobian integrand vanishes at r = 0, which closes the grid's core
    per_r = np.concatenate([[0.0], integrand.sum(axis=1) * frame.dtheta])
    return simpson(per_r, x=np.concatenate([[0.0], frame.r]))


def total_probability(frame: FieldFrame, mask: str = "all",
                      radius: float | None = None) -> float:
    w = _mask_weights(frame, mask, radius if radius is not None else np.inf)
    return float(_integrate(frame, w))


def average_position(frame: FieldFrame, mask: str = "all",
                     radius: float | None = None,
                     min_probability: float = 1.0e-6):
    """Probability centroid over the masked region, polar-Jacobian weighted."""
    w = _mask_weights(frame, mask, radius if radius is not None else np.inf)
    total_all = _integrate(frame, np.abs(frame.values) ** 2 * frame.r[:, None])
    prob = _integrate(frame, w)
    if prob < min_probability * total_all:
        raise UndefinedCentroidError(
            f"mask {mask!r} carries {prob:.3e} of {total_all:.3e} total")
    x = _integrate(frame, w * np.cos(frame.theta)[None, :] * frame.r[:, None])
    y = _integrate(frame, w * np.sin(frame.theta)[None, :] * frame.r[:, None])
    return np.array([x / prob, y / prob])


def interior_fraction(frame: FieldFrame, radius: float) -> float:
    """Probability inside r < R relative to the whole analysis disk."""
    inner = total_probability(frame, "interior", radius)
    total = total_probability(frame, "all")
    return float(inner / total)


@dataclass(frozen=True)
class GHFit:
    l_gh: float
    chi_r_factor: float
    delay: float
    reflection_point: tuple
    chi_r: float
    residual_pre: float
    residual_post: float


def _ray_time_fit(samples):
    """Least-squares linear motion through timed samples: p(t) = p0 + v (t - t_ref)."""
    ts = np.array([s.t for s in samples])
    ps = np.array([s.position for s in samples], dtype=float)
    t_ref = float(ts.mean())
    A = np.vstack([np.ones_like(ts), ts - t_ref]).T
    sol, *_ = np.linalg.lstsq(A, ps, rcond=None)
    fit = A @ sol
    resid = float(np.max(np.hypot(fit[:, 0] - ps[:, 0], fit[:, 1] - ps[:, 1])))
    return sol[0], sol[1], t_ref, resid


def _circle_crossing(p0, v, t_ref, radius, before):
    """Time the ray |p0 + v (t - t_ref)| = radius, latest crossing before ``before``."""
    a = v @ v
    b = 2.0 * (p0 @ v)
    c = p0 @ p0 - radius**2
    disc = b * b - 4.0 * a * c
    if disc <= 0.0:
        raise FitQualityError("fitted outgoing ray does not cross the boundary")
    roots = t_ref + np.array([(-b - math.sqrt(disc)) / (2 * a),
                              (-b + math.sqrt(disc)) / (2 * a)])
    roots = roots[roots < before]
    if len(roots) == 0:
        raise FitQualityError("no boundary crossing before the outgoing samples")
    return float(roots.max())


def _to_canonical(spec: PacketSpec, p):
    """Rotate/mirror a point into the frame with impact at (0, R), motion +x."""
    impact = np.asarray(spec.impact, dtype=float)
    beta = math.atan2(impact[1], impact[0]) - math.pi / 2.0
    cb, sb = math.cos(-beta), math.sin(-beta)
    q = np.array([cb * p[0] - sb * p[1], sb * p[0] + cb * p[1]])
    if spec.handedness < 0:
        q[0] = -q[0]
    return q


def gh_fit(pre: list, post: list, spec: PacketSpec,
           pot: PotentialSpec | None = None) -> GHFit:
    """Boundary shift and reflection angle of the bounced packet.

    The incident ray is prescribed by the packet geometry; pre-bounce samples
    only validate collinearity.  The post-bounce samples are fit by the
    delayed-bounce model: the packet emerges from the boundary point arc-
    shifted by l_GH (sweeping there at the tangential velocity, so the
    delay is l_GH/v_theta) with a free reflection angle chi_R to the local
    normal, and unit speed per paper-time unit afterwards.  The timing
    information is what separates the shift from the angle change.
    """
    if len(pre) < 3 or len(post) < 3:
        raise FitQualityError("need at least 3 samples on each side of the bounce")
    R = spec.boundary_radius
    chi = spec.chi
    min_dist = 3.0 / math.sqrt(spec.sigma)
    impact = np.asarray(spec.impact, dtype=float)
    for s in pre + post:
        if np.hypot(*(np.asarray(s.position) - impact)) < min_dist:
            raise FitQualityError(f"sample at t={s.t} too close to the impact point")

    # incident ray: through the launch point along spec.direction, unit speed
    # per paper-time unit; residual is the worst perpendicular distance
    d_in = spec.direction
    launch = spec.launch_point
    resid_pre = 0.0
    for s in pre:
        rel = np.asarray(s.position) - launch
        resid_pre = max(resid_pre, abs(rel[0] * d_in[1] - rel[1] * d_in[0]))
    if resid_pre > 1.0e-2 * R:
        raise FitQualityError(f"incoming samples off the incident ray by {resid_pre:.3g}")

    _, _, _, resid_post = _ray_time_fit(post)
    if resid_post > 1.0e-2 * R:
        raise FitQualityError(f"outgoing samples not collinear: residual {resid_post:.3g}")

    ts = np.array([s.t for s in post])
    ps = np.array([_to_canonical(spec, np.asarray(s.position)) for s in post])

    sin_chi = math.sin(chi) if chi > 0 else 1.0

    def model(params):
        shift, factor = params
        psi = shift / R
        t_b = 1.0 + shift / sin_chi if chi > 0 else 1.0
        normal = np.array([math.sin(psi), math.cos(psi)])
        tangent = np.array([math.cos(psi), -math.sin(psi)])
        d_out = math.sin(factor * chi) * tangent - math.cos(factor * chi) * normal
        return normal * R + (ts[:, None] - t_b) * d_out[None, :]

    from scipy.optimize import least_squares
    sol = least_squares(lambda p: (model(p) - ps).ravel(), x0=[0.0, 1.0],
                        method="lm")
    shift, factor = sol.x
    if chi == 0.0:
        factor = 1.0
    psi = shift / R
    b_star = _from_canonical(spec, np.array([R * math.sin(psi), R * math.cos(psi)]))
    v_theta = abs(spec.m0) / R
    delay = shift / v_theta if spec.m0 != 0 else 0.0
    return GHFit(l_gh=float(shift), chi_r_factor=float(factor),
                 delay=float(delay),
                 reflection_point=(float(b_star[0]), float(b_star[1])),
                 chi_r=float(factor * chi),
                 residual_pre=float(resid_pre), residual_post=float(resid_post))


def _from_canonical(spec: PacketSpec, q):
    impact = np.asarray(spec.impact, dtype=float)
    beta = math.atan2(impact[1], impact[0]) - math.pi / 2.0
    q = np.array(q, dtype=float)
    if spec.handedness < 0:
        q[0] = -q[0]
    cb, sb = math.cos(beta), math.sin(beta)
    return np.array([cb * q[0] - sb * q[1], sb * q[0] + cb * q[1]])


@dataclass
class HusimiFrame:
    """Gaussian-windowed line projection H(D, h) at one rotation angle."""

    alpha: float
    mu: float
    d: np.ndarray
    h: np.ndarray
    values: np.ndarray      # (len(d), len(h)), >= 0
    centroid: tuple
    strength: float
    gap: float


def emission_husimi(field_at, alpha: float, d_grid, h_grid, mu: float,
                    boundary_radius: float, check_range: bool = True) -> HusimiFrame:
    """Emission Husimi function on the rotated projection line.

    ``field_at`` maps an (N, 2) array of Cartesian points to complex
    amplitudes.  For each line offset D the field is sampled along the line
    coordinate h' (step <= sqrt(mu)/6) and convolved with the normalized
    Gaussian window of variance mu; the squared magnitude is H(D, h).
    """
    if mu <= 0:
        raise DomainError("window variance mu must be positive")
    d_grid = np.asarray(d_grid, dtype=float)
    h_grid = np.asarray(h_grid, dtype=float)
    step = math.sqrt(mu) / 6.0
    pad = 6.0 * math.sqrt(mu)
    hp = np.arange(h_grid[0] - pad, h_grid[-1] + pad + step, step)

    ca, sa = math.cos(alpha), math.sin(alpha)
    xs = d_grid[:, None] * ca - hp[None, :] * sa
    ys = d_grid[:, None] * sa + hp[None, :] * ca
    pts = np.stack([xs.ravel(), ys.ravel()], axis=-1)
    line = field_at(pts).reshape(len(d_grid), len(hp))

    window = ((mu * math.pi) ** -0.25
              * np.exp(-((hp[None, :] - h_grid[:, None]) ** 2) / (2.0 * mu)))
    amp = line @ (window.T * step)
    values = np.abs(amp) ** 2

    if check_range:
        peak = values.max()
        if peak > 0:
            edge = max(values[0].max(), values[-1].max(),
                       values[:, 0].max(), values[:, -1].max())
            if edge > 0.01 * peak:
                raise RangeError(
                    f"lobe leaks outside the Husimi window: edge/peak = {edge/peak:.3f}")

    strength = float(np.trapezoid(np.trapezoid(values, h_grid, axis=1), d_grid))
    if strength > 0:
        d0 = float(np.trapezoid(np.trapezoid(values * d_grid[:, None], h_grid, axis=1),
                                d_grid) / strength)
        h0 = float(np.trapezoid(np.trapezoid(values * h_grid[None, :], h_grid, axis=1),
                                d_grid) / strength)
    else:
        d0 = h0 = np.nan
    return HusimiFrame(alpha=float(alpha), mu=float(mu), d=d_grid, h=h_grid,
                       values=values, centroid=(d0, h0), strength=strength,
                       gap=h0 - boundary_radius)


@dataclass
class TunnelingDirection:
    alpha_t: float            # crossing of the two gap curves (primary)
    alpha_t_strength: float   # argmax of the strength curve
    delta: float              # gap at the crossing
    alphas: np.ndarray
    f_curve: np.ndarray
    gap_curves: dict          # time -> gap(alpha) array


def _parabolic_argmax(x, y):
    i = int(np.argmax(y))
    if 0 < i < len(x) - 1:
        denom = y[i - 1] - 2 * y[i] + y[i + 1]
        if denom != 0:
            return float(x[i] - 0.5 * (x[i + 1] - x[i]) * (y[i + 1] - y[i - 1]) / denom)
    return float(x[i])


def tunneling_direction(field_at_by_time: dict, times, alphas, d_grid, h_grid,
                        mu: float, boundary_radius: float) -> TunnelingDirection:
    """Most probable tunneling direction and time-independent gap.

    Scans the rotation angle: the strength f(alpha) at the first time gives
    one estimate (its maximum); the crossing of the gap curves at the two
    times gives the primary, time-independent one.
    """
    t1, t2 = times
    alphas = np.asarray(alphas, dtype=float)
    f_curve = np.empty(len(alphas))
    gaps = {t: np.empty(len(alphas)) for t in (t1, t2)}
    for i, a in enumerate(alphas):
        for t in (t1, t2):
            hf = emission_husimi(field_at_by_time[t], a, d_grid, h_grid, mu,
                                 boundary_radius, check_range=False)
            gaps[t][i] = hf.gap
            if t == t1:
                f_curve[i] = hf.strength

    alpha_f = _parabolic_argmax(alphas, f_curve)

    diff = gaps[t1] - gaps[t2]
    crossing = None
    for i in range(len(alphas) - 1):
        if diff[i] == 0.0:
            crossing = float(alphas[i])
            break
        if diff[i] * diff[i + 1] < 0.0:
            frac = diff[i] / (diff[i] - diff[i + 1])
            crossing = float(alphas[i] + frac * (alphas[i + 1] - alphas[i]))
            break
    if crossing is None:
        raise FitQualityError(
            "gap curves do not cross on the alpha grid; inspect gap_curves")
    gap_at = {t: float(np.interp(crossing, alphas, gaps[t])) for t in (t1, t2)}
    delta = 0.5 * (gap_at[t1] + gap_at[t2])
    return TunnelingDirection(alpha_t=crossing, alpha_t_strength=alpha_f,
                              delta=delta, alphas=alphas, f_curve=f_curve,
                              gap_curves={t1: gaps[t1], t2: gaps[t2]})


def delta_predicted(expansion, table, pot: PotentialSpec) -> float:
    """Decay-weighted average of the per-mode image distances.

    Delta = sum |b|^2 gamma Delta_j / sum |b|^2 gamma over tunneling modes.
    """
    by_id = {(mo.m, mo.n): mo for mo in table.modes}
    num = den = 0.0
    for e in expansion.entries():
        if e.klass != TUNNELING:
            continue
        mo = by_id[(e.m, e.n)]
        if mo.energy.real <= pot.v0:
            continue
        w = abs(e.coeff) ** 2 * mo.gamma
        num += w * delta_j(mo, pot)
        den += w
    if den == 0.0:
        raise DomainError("no decaying tunneling weight in the expansion")
    return num / den


@dataclass
class EmissionOrigin:
    t_star: float
    delay: float
    back_position: tuple
    speed_consistent: bool


def emission_origin(samples: list, spec: PacketSpec, alpha_t: float,
                    delta: float) -> EmissionOrigin:
    """Back-extrapolate the exterior centroid track to the emission point.

    The track is linear in paper time; t* is when it passes the apparent
    source ((R+Delta) sin|alpha_T|, (R+Delta) cos alpha_T) and the delay is
    t* - 1 in s0 units.  Mirrored launches flip the source x-coordinate.
    """
    if len(samples) < 2:
        raise FitQualityError("need at least two exterior centroid samples")
    p0, v, t_ref, _ = _ray_time_fit(samples)
    speeds = []
    ordered = sorted(samples, key=lambda s: s.t)
    for a, b in zip(ordered, ordered[1:]):
        dtv = b.t - a.t
        speeds.append(np.hypot(*(np.asarray(b.position) - np.asarray(a.position))) / dtv)
    consistent = (max(speeds) - min(speeds)) <= 0.10 * max(speeds)

    R = spec.boundary_radius
    target = np.array([spec.handedness * (R + delta) * abs(math.sin(alpha_t)),
                       (R + delta) * math.cos(alpha_t)])
    back = p0 + v * (1.0 - t_ref)
    speed = np.linalg.norm(v)
    t_star = t_ref + float((target - p0) @ v) / speed**2
    return EmissionOrigin(t_star=float(t_star), delay=float(t_star - 1.0),
                          back_position=(float(back[0]), float(back[1])),
                          speed_consistent=bool(consistent))


def transmission_direction(samples: list, spec: PacketSpec) -> float:
    """Angle (degrees) between the transmitted track and the local outward
    radial direction at its back-extrapolated boundary crossing."""
    p0, v, t_ref, _ = _ray_time_fit(samples)
    t_cross = _circle_crossing(p0, v, t_ref, spec.boundary_radius,
                               before=min(s.t for s in samples))
    b_star = p0 + v * (t_cross - t_ref)
    v_hat = v / np.linalg.norm(v)
    outward = b_star / np.linalg.norm(b_star)
    return math.degrees(math.acos(float(np.clip(v_hat @ outward, -1.0, 1.0))))
