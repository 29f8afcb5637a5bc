"""Deterministic location encoders.

Every encoder maps points on the sphere to a fixed-length real feature
vector and is exposed two ways: as a scikit-learn style transformer
(``fit``/``transform``/``get_params``) operating on ``(n, 2)`` arrays of
``[lat_deg, lon_deg]``, and as single-point functions returning an
:class:`EncodingVector`. Encoders are stateless and deterministic:
identical inputs produce bit-identical outputs.

Encoder families:

* ``spherical_harmonic`` - real orthonormal harmonics up to degree L,
  embedding length (L+1)^2, built on the stable Legendre recurrence.
* ``spherical_wavelet`` - rotations of a dilated spherical mother wavelet
  (Morlet by default, Mexican hat available), centers on a Fibonacci
  lattice, dyadic scales 2^(i/Q); length N*M (real part) or 2*N*M.
* baselines ``direct``, ``cartesian3d``, ``theory``, ``sphere_c_plus``,
  ``sphere_m_plus`` - coordinate and sinusoidal grid encodings. The two
  sphere variants use integer per-revolution frequencies so their features
  stay continuous across the date line.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .legendre import assoc_legendre_naive, normalized_legendre_table
from .sphere import (
    EulerRotation,
    PoleSingularityError,
    SpherePoint,
    fibonacci_lattice_arrays,
    unit_vectors,
)

ENCODING_KINDS = (
    "direct",
    "cartesian3d",
    "theory",
    "sphere_c_plus",
    "sphere_m_plus",
    "spherical_harmonic",
    "spherical_wavelet",
)
WAVELET_FILTERS = ("morlet", "mexican_hat")
COMPLEX_MODES = ("real_only", "real_imag")

_KIND_ALIASES = {
    "sh": "spherical_harmonic",
    "sw": "spherical_wavelet",
    "spherec": "sphere_c_plus",
    "spherec+": "sphere_c_plus",
    "spherem": "sphere_m_plus",
    "spherem+": "sphere_m_plus",
}

_SINGULARITY_EPS = 1e-9
_BATCH = 8192


@dataclass(frozen=True)
class EncodingSpec:
    """Declarative encoder configuration.

    Only the fields relevant to ``kind`` matter; the rest keep their
    defaults and are ignored. Defaults mirror the reference training
    setup (wave number 6, scale factor 1, dyadic denominator 6).
    """

    kind: str
    sh_lmax: int = 20
    sw_rotations: int = 130
    sw_scales: int = 4
    sw_q: int = 6
    sw_wavenumber: float = 6.0
    sw_scale_factor: float = 1.0
    sw_filter: str = "morlet"
    sw_complex_mode: str = "real_only"
    theory_min_radius_deg: float = 45.0
    theory_num_freqs: int = 16

    def __post_init__(self):
        kind = _KIND_ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in ENCODING_KINDS:
            raise ValueError(f"unknown encoding kind {self.kind!r}")
        if self.sh_lmax < 0:
            raise ValueError(f"sh_lmax must be nonnegative, got {self.sh_lmax!r}")
        if self.sw_rotations < 1 or self.sw_scales < 1:
            raise ValueError("sw_rotations and sw_scales must be positive")
        if not 1 <= self.sw_q <= 8:
            raise ValueError(f"sw_q must lie in [1, 8], got {self.sw_q!r}")
        if not (self.sw_wavenumber > 0 and self.sw_scale_factor > 0):
            raise ValueError("sw_wavenumber and sw_scale_factor must be positive")
        if self.sw_filter not in WAVELET_FILTERS:
            raise ValueError(f"unknown wavelet filter {self.sw_filter!r}")
        if self.sw_complex_mode not in COMPLEX_MODES:
            raise ValueError(f"unknown complex mode {self.sw_complex_mode!r}")
        if not self.theory_min_radius_deg > 0:
            raise ValueError("theory_min_radius_deg must be positive")
        if self.theory_num_freqs < 1:
            raise ValueError("theory_num_freqs must be positive")

    @property
    def length(self) -> int:
        """Embedding length implied by the configuration."""
        if self.kind == "direct":
            return 2
        if self.kind == "cartesian3d":
            return 3
        if self.kind == "theory":
            return 6 * self.theory_num_freqs
        if self.kind == "sphere_c_plus":
            return 7 * self.theory_num_freqs
        if self.kind == "sphere_m_plus":
            return 9 * self.theory_num_freqs
        if self.kind == "spherical_harmonic":
            return (self.sh_lmax + 1) ** 2
        per = 2 if self.sw_complex_mode == "real_imag" else 1
        return per * self.sw_rotations * self.sw_scales

    def to_string(self) -> str:
        """Canonical spec string; parses back to an equal spec."""
        if self.kind == "spherical_harmonic":
            return f"sh:L={self.sh_lmax}"
        if self.kind == "spherical_wavelet":
            return (
                f"sw:N={self.sw_rotations},M={self.sw_scales},Q={self.sw_q},"
                f"k={_fmt(self.sw_wavenumber)},w={_fmt(self.sw_scale_factor)},"
                f"filter={self.sw_filter},mode={self.sw_complex_mode}"
            )
        if self.kind in ("theory", "sphere_c_plus", "sphere_m_plus"):
            return (
                f"{self.kind}:S={self.theory_num_freqs},"
                f"rmin={_fmt(self.theory_min_radius_deg)}"
            )
        return self.kind

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_string().encode("ascii")).hexdigest()


def _fmt(x: float) -> str:
    return f"{x:g}"


def parse_encoding_spec(text: str) -> EncodingSpec:
    """Parse a spec string such as ``sh:L=20`` or
    ``sw:N=130,M=4,Q=6,k=6,w=1,filter=morlet,mode=real_only``."""
    text = text.strip()
    kind, _, rest = text.partition(":")
    kind = _KIND_ALIASES.get(kind.strip().lower(), kind.strip().lower())
    if kind not in ENCODING_KINDS:
        raise ValueError(f"unknown encoding kind in {text!r}")
    kwargs = {}
    if rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"malformed parameter {item!r} in {text!r}")
            key = key.strip().lower()
            value = value.strip()
            try:
                if key == "l":
                    kwargs["sh_lmax"] = int(value)
                elif key == "n":
                    kwargs["sw_rotations"] = int(value)
                elif key == "m":
                    kwargs["sw_scales"] = int(value)
                elif key == "q":
                    kwargs["sw_q"] = int(value)
                elif key == "k":
                    kwargs["sw_wavenumber"] = float(value)
                elif key == "w":
                    kwargs["sw_scale_factor"] = float(value)
                elif key == "filter":
                    kwargs["sw_filter"] = value
                elif key == "mode":
                    kwargs["sw_complex_mode"] = value
                elif key in ("s", "freqs"):
                    kwargs["theory_num_freqs"] = int(value)
                elif key in ("rmin", "min_radius"):
                    kwargs["theory_min_radius_deg"] = float(value)
                else:
                    raise ValueError(f"unknown parameter {key!r} in {text!r}")
            except ValueError as exc:
                raise ValueError(f"bad value for {key!r} in {text!r}: {exc}") from exc
    return EncodingSpec(kind=kind, **kwargs)


@dataclass(frozen=True)
class EncodingVector:
    """A fixed-length real feature vector plus the hash of its spec."""

    values: tuple
    spec_fingerprint: str

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("encoding values must all be finite")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


# ---------------------------------------------------------------------------
# input validation
# ---------------------------------------------------------------------------


def check_latlon(X) -> tuple[np.ndarray, np.ndarray]:
    """Validate point input and return (theta, phi) arrays in radians.

    Accepts an (n, 2) array-like of [lat_deg, lon_deg] or a sequence of
    :class:`SpherePoint`.
    """
    if isinstance(X, SpherePoint):
        X = [X]
    if isinstance(X, (list, tuple)) and len(X) > 0 and isinstance(X[0], SpherePoint):
        theta = np.array([p.theta for p in X], dtype=float)
        phi = np.array([p.phi for p in X], dtype=float)
        return theta, phi
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (n, 2) [lat_deg, lon_deg] input, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("coordinates must be finite")
    lat, lon = arr[:, 0], arr[:, 1]
    if np.any(np.abs(lat) > 90.0):
        raise ValueError("latitude out of range [-90, 90]")
    theta = np.radians(90.0 - lat)
    phi = np.radians(lon) % (2.0 * math.pi)
    return theta, phi


# ---------------------------------------------------------------------------
# mother wavelets
# ---------------------------------------------------------------------------


def mother_wavelet(
    theta: float,
    phi: float,
    wavenumber: float = 1.0,
    scale_factor: float = 1.0,
    filter_kind: str = "morlet",
) -> complex:
    """Spherical mother wavelet at colatitude ``theta``, longitude ``phi``.

    Morlet: exp(i*k*tan(theta/2)*cos(phi)) * exp(-tan^2(theta/2)/(2 w^2))
    / (1 + cos(theta)); the printed unit-parameter form is recovered at
    k = w = 1. Mexican hat: inverse-projected Laplacian-of-Gaussian with
    planar radius r = 2*tan(theta/2); purely real. Undefined at theta = pi.
    """
    if theta >= math.pi or theta < 0.0:
        raise PoleSingularityError(
            f"mother wavelet undefined outside [0, pi), got theta={theta!r}"
        )
    re, im = _mother_from_tan(
        np.asarray(math.tan(theta / 2.0)),
        np.asarray(float(phi)),
        wavenumber,
        scale_factor,
        filter_kind,
    )
    return complex(float(re), float(im))


def _mother_from_tan(t, phi, wavenumber, scale_factor, filter_kind):
    """Wavelet value from t = tan(theta/2); 1/(1+cos(theta)) == (1+t^2)/2."""
    amp = (1.0 + t * t) / 2.0
    if filter_kind == "morlet":
        envelope = amp * np.exp(-(t * t) / (2.0 * scale_factor * scale_factor))
        phase = wavenumber * t * np.cos(phi)
        return envelope * np.cos(phase), envelope * np.sin(phase)
    if filter_kind == "mexican_hat":
        r2 = 4.0 * t * t
        w2 = scale_factor * scale_factor
        value = amp * (2.0 - r2 / w2) * np.exp(-r2 / (2.0 * w2))
        return value, np.zeros_like(value)
    raise ValueError(f"unknown wavelet filter {filter_kind!r}")


# ---------------------------------------------------------------------------
# basis builders (vectorized over points)
# ---------------------------------------------------------------------------


def _sh_basis(theta: np.ndarray, phi: np.ndarray, lmax: int) -> np.ndarray:
    """Real spherical-harmonic design matrix, shape (n, (lmax+1)^2).

    Ordering: degree ascending, order m from -l to l. The m = 0 column of
    each degree is the normalized Legendre value; m != 0 columns carry
    sqrt(2) * cos(m*phi) / sqrt(2) * sin(|m|*phi) factors.
    """
    n = theta.shape[0]
    out = np.empty((n, (lmax + 1) ** 2))
    sqrt2 = math.sqrt(2.0)
    for start in range(0, n, _BATCH):
        sl = slice(start, min(start + _BATCH, n))
        tab = normalized_legendre_table(lmax, np.cos(theta[sl]))
        ph = phi[sl]
        idx = 0
        for l in range(lmax + 1):
            for m in range(-l, l + 1):
                am = abs(m)
                if m == 0:
                    out[sl, idx] = tab[l, 0]
                elif m > 0:
                    out[sl, idx] = sqrt2 * tab[l, am] * np.cos(m * ph)
                else:
                    out[sl, idx] = sqrt2 * tab[l, am] * np.sin(am * ph)
                idx += 1
    return out


def _sh_basis_naive(theta: np.ndarray, phi: np.ndarray, lmax: int) -> np.ndarray:
    """Benchmark-only spherical harmonics via the single-precision factorial
    closed form. Produces non-finite values at high degree by design."""
    x = np.cos(theta).astype(np.float32)
    ph = phi.astype(np.float32)
    out = np.empty((theta.shape[0], (lmax + 1) ** 2), dtype=np.float32)
    sqrt2 = np.float32(math.sqrt(2.0))
    idx = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for l in range(lmax + 1):
            for m in range(-l, l + 1):
                am = abs(m)
                p = assoc_legendre_naive(l, am, x, dtype=np.float32)
                if m == 0:
                    out[:, idx] = p
                elif m > 0:
                    out[:, idx] = sqrt2 * p * np.cos(m * ph)
                else:
                    out[:, idx] = sqrt2 * p * np.sin(am * ph)
                idx += 1
    return out


def _center_rotations(
    rotations: int, frame_rotation: EulerRotation | None
) -> np.ndarray:
    """Z-Y-Z matrices (with zero in-plane angle) for the lattice centers."""
    lat_theta, lat_phi = fibonacci_lattice_arrays(rotations)
    ca, sa = np.cos(lat_phi), np.sin(lat_phi)
    cb, sb = np.cos(lat_theta), np.sin(lat_theta)
    mats = np.empty((rotations, 3, 3))
    # Rz(alpha) @ Ry(beta) with alpha = lattice phi, beta = lattice theta
    mats[:, 0, 0] = ca * cb
    mats[:, 0, 1] = -sa
    mats[:, 0, 2] = ca * sb
    mats[:, 1, 0] = sa * cb
    mats[:, 1, 1] = ca
    mats[:, 1, 2] = sa * sb
    mats[:, 2, 0] = -sb
    mats[:, 2, 1] = 0.0
    mats[:, 2, 2] = cb
    if frame_rotation is not None:
        mats = frame_rotation.matrix() @ mats
    return mats


def _sw_basis(
    theta: np.ndarray,
    phi: np.ndarray,
    spec: EncodingSpec,
    frame_rotation: EulerRotation | None = None,
) -> np.ndarray:
    """Spherical-wavelet design matrix.

    For each lattice center rho_j and scale a_i = 2^(i/Q), the point is
    rotated into the wavelet frame, dilated by 1/a_i through the
    stereographic plane, weighted by the square-root cocycle, and fed to
    the mother wavelet. Entries within 1e-9 of the projection singularity
    (the center's antipode) are clamped to exactly 0. Ordering is
    rotation-major, scale-minor; ``real_imag`` interleaves (Re, Im) pairs.
    """
    n = theta.shape[0]
    n_rot, n_scale = spec.sw_rotations, spec.sw_scales
    pairs = spec.sw_complex_mode == "real_imag"
    out = np.empty((n, spec.length))
    mats = _center_rotations(n_rot, frame_rotation)
    scales = 2.0 ** (np.arange(1, n_scale + 1) / spec.sw_q)
    k, w, filt = spec.sw_wavenumber, spec.sw_scale_factor, spec.sw_filter

    rot_idx = np.arange(n_rot)
    for start in range(0, n, _BATCH):
        sl = slice(start, min(start + _BATCH, n))
        v = unit_vectors(theta[sl], phi[sl])
        # rotated[j, c, :] = R_j^T v_c (point expressed in frame of center j)
        rotated = np.einsum("jba,cb->jca", mats, v)
        cos_tp = np.clip(rotated[..., 2], -1.0, 1.0)
        phi_p = np.arctan2(rotated[..., 1], rotated[..., 0])
        singular = np.arccos(cos_tp) >= math.pi - _SINGULARITY_EPS
        # tan(theta'/2) = sqrt((1 - c)/(1 + c)); finite off the singularity
        tan_half = np.sqrt((1.0 - cos_tp) / np.maximum(1.0 + cos_tp, _SINGULARITY_EPS))
        cols = out[sl]
        for i, a in enumerate(scales):
            s = 1.0 / a
            # sqrt of the cocycle; the denominator is positive on [-1, 1]
            coc = 2.0 * s / ((s * s - 1.0) * cos_tp + (s * s + 1.0))
            re, im = _mother_from_tan(s * tan_half, phi_p, k, w, filt)
            re = np.where(singular, 0.0, coc * re)
            if pairs:
                cols[:, 2 * (rot_idx * n_scale + i)] = re.T
                im = np.where(singular, 0.0, coc * im)
                cols[:, 2 * (rot_idx * n_scale + i) + 1] = im.T
            else:
                cols[:, rot_idx * n_scale + i] = re.T
    return out


def _theory_scales(min_radius_deg: float, num_freqs: int) -> np.ndarray:
    """Geometric wavelength ladder from min_radius up to 360 degrees."""
    r_max = 360.0
    if num_freqs == 1:
        return np.array([min_radius_deg])
    s = np.arange(num_freqs, dtype=float)
    return min_radius_deg * (r_max / min_radius_deg) ** (s / (num_freqs - 1))


def _integer_freqs(scales_deg: np.ndarray) -> np.ndarray:
    """Whole cycles per revolution for each wavelength; keeps the sphere
    encodings continuous across the date line."""
    return np.maximum(1, np.rint(360.0 / scales_deg)).astype(int)


def _baseline_basis(theta: np.ndarray, phi: np.ndarray, spec: EncodingSpec) -> np.ndarray:
    lat = math.pi / 2.0 - theta
    lon = (phi + math.pi) % (2.0 * math.pi) - math.pi
    if spec.kind == "direct":
        return np.stack([lat, lon], axis=1)
    if spec.kind == "cartesian3d":
        return unit_vectors(theta, phi)

    scales = _theory_scales(spec.theory_min_radius_deg, spec.theory_num_freqs)
    if spec.kind == "theory":
        lon_deg, lat_deg = np.degrees(lon), np.degrees(lat)
        dirs = [(1.0, 0.0), (-0.5, math.sqrt(3.0) / 2.0), (-0.5, -math.sqrt(3.0) / 2.0)]
        cols = []
        for alpha in scales:
            for dx, dy in dirs:
                u = (dx * lon_deg + dy * lat_deg) / alpha
                cols.append(np.sin(u))
                cols.append(np.cos(u))
        return np.stack(cols, axis=1)

    freqs = _integer_freqs(scales)
    base = freqs[-1]  # coarsest scale: one cycle per revolution
    cols = []
    for nf in freqs:
        la, lo = nf * lat, nf * lon
        if spec.kind == "sphere_c_plus":
            cols += [
                np.sin(la),
                np.cos(la) * np.cos(lo),
                np.cos(la) * np.sin(lo),
                np.sin(la),
                np.cos(la),
                np.sin(lo),
                np.cos(lo),
            ]
        else:  # sphere_m_plus: mix each scale with the coarsest
            la0, lo0 = base * lat, base * lon
            cols += [
                np.sin(la),
                np.cos(la) * np.cos(lo0),
                np.cos(la) * np.sin(lo0),
                np.cos(la0) * np.cos(lo),
                np.cos(la0) * np.sin(lo),
                np.sin(la),
                np.cos(la),
                np.sin(lo),
                np.cos(lo),
            ]
    return np.stack(cols, axis=1)


def _encode_arrays(
    theta: np.ndarray,
    phi: np.ndarray,
    spec: EncodingSpec,
    frame_rotation: EulerRotation | None = None,
) -> np.ndarray:
    if spec.kind == "spherical_harmonic":
        return _sh_basis(theta, phi, spec.sh_lmax)
    if spec.kind == "spherical_wavelet":
        return _sw_basis(theta, phi, spec, frame_rotation)
    return _baseline_basis(theta, phi, spec)


# ---------------------------------------------------------------------------
# scikit-learn style transformers
# ---------------------------------------------------------------------------


class LocationEncoder(TransformerMixin, BaseEstimator):
    """Base class: stateless transformer from [lat_deg, lon_deg] rows to
    feature vectors. ``fit`` only validates; all state lives in params."""

    def _spec(self) -> EncodingSpec:
        raise NotImplementedError

    @property
    def spec(self) -> EncodingSpec:
        return self._spec()

    @property
    def n_features_out(self) -> int:
        return self._spec().length

    def fit(self, X, y=None):
        check_latlon(X)
        self.n_features_in_ = 2
        return self

    def transform(self, X) -> np.ndarray:
        theta, phi = check_latlon(X)
        return _encode_arrays(theta, phi, self._spec(), getattr(self, "frame_rotation", None))


class DirectEncoder(LocationEncoder):
    """(lat, lon) in radians, length 2."""

    def _spec(self):
        return EncodingSpec(kind="direct")


class Cartesian3DEncoder(LocationEncoder):
    """Unit vector (x, y, z), length 3."""

    def _spec(self):
        return EncodingSpec(kind="cartesian3d")


class TheoryEncoder(LocationEncoder):
    """Three-direction sinusoidal grid over a geometric scale ladder, 6S."""

    def __init__(self, min_radius_deg=45.0, num_freqs=16):
        self.min_radius_deg = min_radius_deg
        self.num_freqs = num_freqs

    def _spec(self):
        return EncodingSpec(
            kind="theory",
            theory_min_radius_deg=self.min_radius_deg,
            theory_num_freqs=self.num_freqs,
        )


class SphereCPlusEncoder(LocationEncoder):
    """Sphere interaction terms plus grid terms per scale, 7S."""

    def __init__(self, min_radius_deg=45.0, num_freqs=16):
        self.min_radius_deg = min_radius_deg
        self.num_freqs = num_freqs

    def _spec(self):
        return EncodingSpec(
            kind="sphere_c_plus",
            theory_min_radius_deg=self.min_radius_deg,
            theory_num_freqs=self.num_freqs,
        )


class SphereMPlusEncoder(LocationEncoder):
    """Multi-scale mixture sphere terms plus grid terms per scale, 9S."""

    def __init__(self, min_radius_deg=45.0, num_freqs=16):
        self.min_radius_deg = min_radius_deg
        self.num_freqs = num_freqs

    def _spec(self):
        return EncodingSpec(
            kind="sphere_m_plus",
            theory_min_radius_deg=self.min_radius_deg,
            theory_num_freqs=self.num_freqs,
        )


class SphericalHarmonicEncoder(LocationEncoder):
    """Real spherical harmonics up to degree ``lmax``, length (lmax+1)^2."""

    def __init__(self, lmax=20):
        self.lmax = lmax

    def _spec(self):
        return EncodingSpec(kind="spherical_harmonic", sh_lmax=self.lmax)


class SphericalWaveletEncoder(LocationEncoder):
    """Rotated/dilated spherical wavelet filter bank.

    ``frame_rotation`` rigidly rotates the whole filter bank; it exists to
    express the rotation-covariance property and is not part of the spec
    string.
    """

    def __init__(
        self,
        rotations=130,
        scales=4,
        q=6,
        wavenumber=6.0,
        scale_factor=1.0,
        filter="morlet",
        complex_mode="real_only",
        frame_rotation=None,
    ):
        self.rotations = rotations
        self.scales = scales
        self.q = q
        self.wavenumber = wavenumber
        self.scale_factor = scale_factor
        self.filter = filter
        self.complex_mode = complex_mode
        self.frame_rotation = frame_rotation

    def _spec(self):
        return EncodingSpec(
            kind="spherical_wavelet",
            sw_rotations=self.rotations,
            sw_scales=self.scales,
            sw_q=self.q,
            sw_wavenumber=self.wavenumber,
            sw_scale_factor=self.scale_factor,
            sw_filter=self.filter,
            sw_complex_mode=self.complex_mode,
        )


def make_encoder(spec: EncodingSpec | str) -> LocationEncoder:
    """Instantiate the transformer for a spec or spec string."""
    if isinstance(spec, str):
        spec = parse_encoding_spec(spec)
    if spec.kind == "direct":
        return DirectEncoder()
    if spec.kind == "cartesian3d":
        return Cartesian3DEncoder()
    if spec.kind == "theory":
        return TheoryEncoder(spec.theory_min_radius_deg, spec.theory_num_freqs)
    if spec.kind == "sphere_c_plus":
        return SphereCPlusEncoder(spec.theory_min_radius_deg, spec.theory_num_freqs)
    if spec.kind == "sphere_m_plus":
        return SphereMPlusEncoder(spec.theory_min_radius_deg, spec.theory_num_freqs)
    if spec.kind == "spherical_harmonic":
        return SphericalHarmonicEncoder(spec.sh_lmax)
    return SphericalWaveletEncoder(
        rotations=spec.sw_rotations,
        scales=spec.sw_scales,
        q=spec.sw_q,
        wavenumber=spec.sw_wavenumber,
        scale_factor=spec.sw_scale_factor,
        filter=spec.sw_filter,
        complex_mode=spec.sw_complex_mode,
    )


# ---------------------------------------------------------------------------
# single-point operations
# ---------------------------------------------------------------------------


def _encode_point(p: SpherePoint, spec: EncodingSpec) -> EncodingVector:
    row = _encode_arrays(np.array([p.theta]), np.array([p.phi]), spec)[0]
    return EncodingVector(values=tuple(row.tolist()), spec_fingerprint=spec.fingerprint())


def encode_spherical_harmonic(p: SpherePoint, lmax: int) -> EncodingVector:
    """Spherical-harmonic feature vector of a single point."""
    if lmax < 0:
        raise ValueError(f"degree bound must be nonnegative, got {lmax!r}")
    return _encode_point(p, EncodingSpec(kind="spherical_harmonic", sh_lmax=lmax))


def encode_spherical_wavelet(p: SpherePoint, spec: EncodingSpec) -> EncodingVector:
    """Spherical-wavelet feature vector of a single point."""
    if spec.kind != "spherical_wavelet":
        raise ValueError(f"spec kind must be spherical_wavelet, got {spec.kind!r}")
    return _encode_point(p, spec)


def encode_baseline(p: SpherePoint, spec: EncodingSpec) -> EncodingVector:
    """Baseline feature vector (direct/cartesian3d/theory/sphere variants)."""
    if spec.kind in ("spherical_harmonic", "spherical_wavelet"):
        raise ValueError(f"{spec.kind!r} is not a baseline encoding")
    return _encode_point(p, spec)


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkRow:
    label: str
    length: int
    mean_ms: float
    std_ms: float


def encoding_benchmark(
    specs, n_points: int, repetitions: int = 5, include_naive_sh: bool = True
) -> list[BenchmarkRow]:
    """Time batch encoding of ``n_points`` lattice points per spec.

    For every spherical-harmonic spec an extra row times the naive
    single-precision factorial closed form, the path the stable recurrence
    replaces. Each timing is the mean over >= 5 repetitions after one
    untimed warm-up; timings run in-process and are machine-dependent.
    """
    if n_points < 1:
        raise ValueError(f"n_points must be positive, got {n_points!r}")
    if repetitions < 5:
        repetitions = 5
    theta, phi = fibonacci_lattice_arrays(n_points)
    rows = []

    def _time(label, length, fn):
        fn()  # warm-up
        samples = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            fn()
            samples.append((time.perf_counter() - t0) * 1e3)
        samples = np.asarray(samples)
        rows.append(BenchmarkRow(label, length, float(samples.mean()), float(samples.std())))

    for spec in specs:
        if isinstance(spec, str):
            spec = parse_encoding_spec(spec)
        _time(spec.to_string(), spec.length, lambda s=spec: _encode_arrays(theta, phi, s))
        if include_naive_sh and spec.kind == "spherical_harmonic":
            _time(
                f"naive-sh:L={spec.sh_lmax}",
                spec.length,
                lambda L=spec.sh_lmax: _sh_basis_naive(theta, phi, L),
            )
    return rows
