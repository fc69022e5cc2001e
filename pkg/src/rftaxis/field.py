"""Noise-free signal strength fields.

A field is the sum of three terms, all in dB:

* log-distance path loss around a single transmitter,
* shadowing by thin walls crossed by the line of sight,
* a deterministic multipath fading pattern made of plane waves.

Positions are numpy arrays of shape ``(p,)`` or batches of shape ``(n, p)``
with ``p`` in {1, 2, 3}. Every ``eval_*`` function accepts either form and
returns a float or an ``(n,)`` array accordingly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .errors import DistanceTooSmall, NotSmoothlyDifferentiable

LN10 = math.log(10.0)
DEFAULT_EPSILON_FLOOR = 0.5
DEFAULT_WAVELENGTH = 0.125
DEFAULT_NUM_WAVES = 32


def as_position(x, dim: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.shape[0] not in (1, 2, 3):
        raise ValueError(f"position must have 1-3 components, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"position has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("position components must be finite")
    return arr


def _batch(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    return arr, False


@dataclass(frozen=True)
class PathLossParams:
    gamma_pl: float = 3.0
    d0: float = 1.0
    source: np.ndarray = dc_field(default_factory=lambda: np.zeros(2))
    # vertical separation between transmitter and the robot's antenna plane
    height: float = 0.0

    def __post_init__(self):
        if not self.height >= 0:
            raise ValueError("height must be >= 0")
        if not self.gamma_pl > 0:
            raise ValueError("gamma_pl must be positive")
        if not self.d0 > 0:
            raise ValueError("d0 must be positive")
        object.__setattr__(self, "source", as_position(self.source))

    @property
    def dim(self) -> int:
        return self.source.shape[0]


@dataclass(frozen=True)
class Wall:
    """Thin obstruction with a fixed attenuation.

    ``vertices`` holds one point in 1-D, the two endpoints of a segment in
    2-D, or the corners of a convex planar polygon (in order) in 3-D.
    """

    vertices: np.ndarray
    attenuation_db: float

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if self.attenuation_db < 0:
            raise ValueError("wall attenuation must be >= 0 dB")
        p = v.shape[1]
        need = {1: 1, 2: 2, 3: 3}[p]
        if (p == 3 and v.shape[0] < 3) or (p != 3 and v.shape[0] != need):
            raise ValueError(f"a {p}-D wall needs {'>= 3' if p == 3 else need} vertices")
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def crossed(self, source: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Boolean mask: does the open segment (source, point) cross the wall."""
        if self.dim == 1:
            w = self.vertices[0, 0]
            s = source[0]
            q = points[:, 0]
            return ((s < w) & (w < q)) | ((q < w) & (w < s))
        if self.dim == 2:
            return _crosses_segment(source, points, self.vertices[0], self.vertices[1])
        return _crosses_polygon(source, points, self.vertices)


def _cross2(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _crosses_segment(s, pts, a, b):
    d = pts - s
    e = b - a
    denom = _cross2(d, e)
    w = a - s
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross2(w, e) / denom
        u = _cross2(w, d) / denom
    ok = denom != 0.0
    return ok & (t > 0.0) & (t < 1.0) & (u >= 0.0) & (u <= 1.0)


def _crosses_polygon(s, pts, verts):
    normal = np.cross(verts[1] - verts[0], verts[2] - verts[0])
    d = pts - s
    denom = d @ normal
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((verts[0] - s) @ normal) / denom
    hit = (denom != 0.0) & (t > 0.0) & (t < 1.0)
    q = s + np.where(hit, t, 0.0)[:, None] * d
    signs = []
    for i in range(len(verts)):
        edge = verts[(i + 1) % len(verts)] - verts[i]
        signs.append(np.cross(edge, q - verts[i]) @ normal)
    signs = np.array(signs)
    inside = np.all(signs >= 0.0, axis=0) | np.all(signs <= 0.0, axis=0)
    return hit & inside


@dataclass(frozen=True)
class FadingParams:
    """Deterministic multipath interference pattern.

    The pattern is a sum of ``num_waves`` plane waves with wavenumber
    ``2*pi/wavelength``, random directions and random phases drawn from
    ``seed``. Amplitudes are scaled so the spatial standard deviation of the
    pattern is ``amplitude_db``.
    """

    wavelength: float = DEFAULT_WAVELENGTH
    amplitude_db: float = 6.0
    num_waves: int = DEFAULT_NUM_WAVES
    seed: int = 0
    dim: int = 2

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if self.amplitude_db < 0:
            raise ValueError("amplitude_db must be >= 0")
        if self.num_waves < 1:
            raise ValueError("num_waves must be >= 1")
        rng = np.random.default_rng(self.seed)
        if self.dim == 1:
            dirs = rng.choice([-1.0, 1.0], size=(self.num_waves, 1))
        else:
            dirs = rng.standard_normal((self.num_waves, self.dim))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        phases = rng.uniform(0.0, 2.0 * math.pi, self.num_waves)
        k = 2.0 * math.pi / self.wavelength
        object.__setattr__(self, "_wavevectors", k * dirs)
        object.__setattr__(self, "_phases", phases)
        object.__setattr__(self, "_scale", self.amplitude_db * math.sqrt(2.0 / self.num_waves))


@dataclass(frozen=True)
class FieldModel:
    path_loss: PathLossParams
    walls: Sequence[Wall] = ()
    fading: Optional[FadingParams] = None
    epsilon_floor: float = DEFAULT_EPSILON_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "walls", tuple(self.walls))
        p = self.path_loss.dim
        for w in self.walls:
            if w.dim != p:
                raise ValueError("wall dimension does not match source dimension")
        if self.fading is not None and self.fading.dim != p:
            raise ValueError("fading dimension does not match source dimension")
        if not self.epsilon_floor >= 0:
            raise ValueError("epsilon_floor must be >= 0")

    @property
    def dim(self) -> int:
        return self.path_loss.dim

    @property
    def source(self) -> np.ndarray:
        return self.path_loss.source

    @property
    def is_pure(self) -> bool:
        fading_off = self.fading is None or self.fading.amplitude_db == 0.0
        return fading_off and not any(w.attenuation_db > 0 for w in self.walls)

    def __call__(self, x):
        return eval_field(self, x)


def _distances(params, pts):
    diff = pts - params.source
    return np.sqrt(np.einsum("ij,ij->i", diff, diff) + params.height**2)


def source_distance(params: PathLossParams, x):
    """Transmitter distance, including any height offset."""
    pts, single = _batch(x)
    dist = _distances(params, pts)
    return float(dist[0]) if single else dist


def _check_floor(dist, floor):
    if np.any(dist < floor):
        raise DistanceTooSmall(
            f"distance {float(np.min(dist)):.6g} m to source is below the floor of {floor:g} m"
        )


def eval_path_loss(params: PathLossParams, x, epsilon_floor: float = DEFAULT_EPSILON_FLOOR):
    """Log-distance path loss ``-10*gamma*log10(d/d0)`` in dB."""
    pts, single = _batch(x)
    dist = _distances(params, pts)
    _check_floor(dist, epsilon_floor)
    out = -10.0 * params.gamma_pl * np.log10(dist / params.d0)
    return float(out[0]) if single else out


def path_loss_derivatives(params: PathLossParams, distance: float,
                          epsilon_floor: float = DEFAULT_EPSILON_FLOOR):
    """First three derivatives of the path loss with respect to distance."""
    if distance < epsilon_floor:
        raise DistanceTooSmall(f"distance {distance:g} m is below the floor of {epsilon_floor:g} m")
    c = 10.0 * params.gamma_pl / LN10
    return -c / distance, c / distance**2, -2.0 * c / distance**3


def eval_shadowing(walls: Sequence[Wall], source, x):
    pts, single = _batch(x)
    src = np.asarray(source, dtype=float)
    out = np.zeros(pts.shape[0])
    for wall in walls:
        out -= wall.attenuation_db * wall.crossed(src, pts)
    return float(out[0]) if single else out


def eval_fading(fading: Optional[FadingParams], x):
    pts, single = _batch(x)
    if fading is None or fading.amplitude_db == 0.0:
        out = np.zeros(pts.shape[0])
    else:
        out = fading._scale * np.cos(pts @ fading._wavevectors.T + fading._phases).sum(axis=1)
    return float(out[0]) if single else out


def eval_smooth(model: FieldModel, x):
    """Path loss plus shadowing, i.e. the field without the fading term."""
    pts, single = _batch(x)
    out = eval_path_loss(model.path_loss, pts, model.epsilon_floor)
    if model.walls:
        out = out + eval_shadowing(model.walls, model.source, pts)
    return float(out[0]) if single else out


def eval_field(model: FieldModel, x):
    pts, single = _batch(x)
    out = eval_smooth(model, pts)
    if model.fading is not None:
        out = out + eval_fading(model.fading, pts)
    return float(out[0]) if single else out


def path_loss_gradient(params: PathLossParams, x, epsilon_floor: float = DEFAULT_EPSILON_FLOOR):
    """Gradient of the pure path loss term; ignores walls and fading."""
    pts, single = _batch(x)
    diff = pts - params.source
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff) + params.height**2)
    _check_floor(dist, epsilon_floor)
    c = 10.0 * params.gamma_pl / LN10
    out = -c * diff / dist[:, None] ** 2
    return out[0] if single else out


def analytic_gradient(model: FieldModel, x):
    """Exact gradient of a field that has no walls and no fading."""
    if not model.is_pure:
        raise NotSmoothlyDifferentiable("analytic gradient is only defined for the pure path-loss field")
    return path_loss_gradient(model.path_loss, x, model.epsilon_floor)


def free_space(source=(0.0, 0.0), gamma_pl: float = 3.0, d0: float = 1.0,
               epsilon_floor: float = DEFAULT_EPSILON_FLOOR, height: float = 0.0,
               **kwargs) -> FieldModel:
    """Convenience constructor for a field with path loss only (plus optional extras)."""
    return FieldModel(PathLossParams(gamma_pl, d0, as_position(source), height),
                      epsilon_floor=epsilon_floor, **kwargs)
