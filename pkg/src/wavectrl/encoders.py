"""Trainable encoders mapping observations and designs into latent space.

Two small networks with explicit parameters and hand-written reverse rules
(no autodiff dependency):

* ``WaveEncoder``: three stride-2 convolution stages over the stacked
  3-frame observation, a fixed mean-pool, and two dense layers whose output
  splits into four latent-field coefficient vectors, a source-shape
  coefficient vector, and the raw latent-PML parameters.
* ``DesignEncoder``: a two-hidden-layer dense network from one radii vector
  to one speed-frame coefficient vector; realized frames are the ambient
  speed plus an embedded perturbation, smoothly clipped to a stable range.

Every forward returns a cache consumed by the matching ``backward``, which
accumulates parameter gradients and returns input gradients.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .grid import Field, Grid1D
from .latent import LatentConditions, LatentSpeedInterp, LatentState, embed_matrix
from .pml import LatentPmlParams, realize_latent_pml, realize_latent_pml_vjp


class ParamStore:
    """Named parameter tensors plus matching gradient buffers.

    Insertion order is the canonical serialization order; construction from
    the same seed reproduces identical values bit for bit.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._rng = np.random.default_rng(self.seed)
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def add(self, name: str, shape: tuple[int, ...], std: float) -> np.ndarray:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        if std > 0.0:
            arr = std * self._rng.standard_normal(shape)
        else:
            arr = np.zeros(shape)
        self.params[name] = arr
        self.grads[name] = np.zeros(shape)
        return arr

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0.0

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def check_finite(self) -> None:
        for name, p in self.params.items():
            if not np.isfinite(p).all():
                raise FloatingPointError(f"non-finite parameter tensor {name!r}")

    def manifest(self) -> list[dict]:
        return [{"name": k, "shape": list(v.shape)} for k, v in self.params.items()]

    def grads_to_vector(self) -> np.ndarray:
        return np.concatenate([g.ravel() for g in self.grads.values()])

    def grads_from_vector(self, vec: np.ndarray) -> None:
        ofs = 0
        for g in self.grads.values():
            g[...] = vec[ofs : ofs + g.size].reshape(g.shape)
            ofs += g.size

    def to_blob(self) -> bytes:
        flat = np.concatenate([p.ravel() for p in self.params.values()])
        return flat.astype("<f4").tobytes()

    def from_blob(self, blob: bytes) -> None:
        flat = np.frombuffer(blob, dtype="<f4").astype(np.float64)
        if flat.size != sum(p.size for p in self.params.values()):
            raise DimensionError("parameter blob size does not match store")
        ofs = 0
        for p in self.params.values():
            p[...] = flat[ofs : ofs + p.size].reshape(p.shape)
            ofs += p.size


# ---------------------------------------------------------------------------
# Layer primitives (forward + explicit reverse rules)
# ---------------------------------------------------------------------------


def _dense_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ w.T + b


def _dense_bwd(x, w, gout, gw, gb):
    gw += gout.T @ x
    gb += gout.sum(axis=0)
    return gout @ w


def _tanh_fwd(z: np.ndarray) -> np.ndarray:
    return np.tanh(z)


def _tanh_bwd(out: np.ndarray, gout: np.ndarray) -> np.ndarray:
    return gout * (1.0 - out * out)


def _conv_windows(xp: np.ndarray, stride: int = 2, k: int = 3) -> np.ndarray:
    """View of all kxk patches of a padded (B, C, Hp, Wp) array."""
    b, c, hp, wp = xp.shape
    ho = (hp - k) // stride + 1
    wo = (wp - k) // stride + 1
    sb, sc, sh, sw = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp, (b, c, ho, wo, k, k), (sb, sc, sh * stride, sw * stride, sh, sw)
    )


def _conv_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 stride-2 pad-1 convolution; x (B, C, H, W), w (K, C, 3, 3)."""
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = _conv_windows(xp)
    out = np.einsum("bcijpq,ocpq->boij", win, w, optimize=True)
    out += b[None, :, None, None]
    return out, xp


def _conv_bwd(xp, w, gout, gw, gb):
    win = _conv_windows(xp)
    gw += np.einsum("bcijpq,boij->ocpq", win, gout, optimize=True)
    gb += gout.sum(axis=(0, 2, 3))
    gxp = np.zeros_like(xp)
    ho, wo = gout.shape[2], gout.shape[3]
    for p in range(3):
        for q in range(3):
            # each padded input cell x[2i+p, 2j+q] fed output cell (i, j)
            gxp[:, :, p : p + 2 * ho : 2, q : q + 2 * wo : 2] += np.einsum(
                "boij,oc->bcij", gout, w[:, :, p, q], optimize=True
            )
    return gxp[:, :, 1:-1, 1:-1]


def _pool_fwd(x: np.ndarray, p: int) -> np.ndarray:
    b, c, h, w = x.shape
    if h % p or w % p:
        raise DimensionError(f"pool size {p} does not divide feature map {h}x{w}")
    return x.reshape(b, c, h // p, p, w // p, p).mean(axis=(3, 5))


def _pool_bwd(gout: np.ndarray, p: int) -> np.ndarray:
    g = np.repeat(np.repeat(gout, p, axis=2), p, axis=3)
    return g / (p * p)


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


def smooth_clip(c: np.ndarray, lo: float, hi: float, beta: float) -> np.ndarray:
    """Smooth clamp of ``c`` into (lo, hi); identity away from the edges."""
    c1 = lo + beta * _softplus((c - lo) / beta)
    return hi - beta * _softplus((hi - c1) / beta)


def smooth_clip_deriv(c: np.ndarray, lo: float, hi: float, beta: float) -> np.ndarray:
    c1 = lo + beta * _softplus((c - lo) / beta)
    return _sigmoid((hi - c1) / beta) * _sigmoid((c - lo) / beta)


# ---------------------------------------------------------------------------
# Wave encoder
# ---------------------------------------------------------------------------


class WaveEncoder:
    """Observation frames -> latent initial conditions, source shape and PML.

    The three observation frames enter as channels. Output layout of the
    final dense head: [u_tot | v_tot | u_inc | v_inc | f_z] coefficient
    blocks of ``n_coeffs`` each, then ``n_pml`` raw PML parameters. The two
    velocity blocks are multiplied by ``v_scale``: traveling waves satisfy
    u ~ c*v, so 1/c keeps all four heads on one loss-space scale. The source
    block is multiplied by ``f_scale``: off-resonant forcing needs amplitudes
    well above the head's unit output range to sustain fields against damping.
    """

    def __init__(
        self,
        store: ParamStore,
        obs_shape: tuple[int, int],
        latent_grid: Grid1D,
        omega: float,
        n_coeffs: int = 64,
        n_pml: int = 64,
        conv_channels: tuple[int, ...] = (4, 6, 8),
        dense_width: int = 8,
        pool: int = 4,
        pml_scale: float = 1.0,
        v_scale: float = 1.0,
        f_scale: float = 1.0,
    ):
        self.store = store
        self.obs_shape = tuple(obs_shape)
        self.grid = latent_grid
        self.omega = float(omega)
        self.n_coeffs = int(n_coeffs)
        self.n_pml = int(n_pml)
        self.conv_channels = tuple(conv_channels)
        self.dense_width = int(dense_width)
        self.pool = int(pool)
        self.pml_scale = float(pml_scale)
        self.v_scale = float(v_scale)
        self.f_scale = float(f_scale)

        h, w = self.obs_shape
        c_in = 3
        for i, c_out in enumerate(self.conv_channels):
            std = 1.0 / np.sqrt(c_in * 9)
            store.add(f"wave_conv{i}_w", (c_out, c_in, 3, 3), std)
            store.add(f"wave_conv{i}_b", (c_out,), 0.0)
            c_in = c_out
            h, w = h // 2, w // 2
        if h % self.pool or w % self.pool:
            raise DimensionError(
                f"feature map {h}x{w} after convolutions not divisible by pool {self.pool}"
            )
        self.n_feat = c_in * (h // self.pool) * (w // self.pool)
        store.add("wave_dense_w", (self.dense_width, self.n_feat), 1.0 / np.sqrt(self.n_feat))
        store.add("wave_dense_b", (self.dense_width,), 0.0)
        n_out = 5 * self.n_coeffs + self.n_pml
        # small head: latent fields and source start near zero
        store.add("wave_head_w", (n_out, self.dense_width), 0.01 / np.sqrt(self.dense_width))
        store.add("wave_head_b", (n_out,), 0.0)
        self._embed = embed_matrix(self.grid, self.n_coeffs)

    def _split(self, vec: np.ndarray) -> list[np.ndarray]:
        n = self.n_coeffs
        return [vec[i * n : (i + 1) * n] for i in range(5)] + [vec[5 * n :]]

    def encode(self, frames: np.ndarray, t: float = 0.0) -> tuple[LatentConditions, dict]:
        """Map one (3, H, W) frame stack to latent conditions."""
        if frames.shape != (3,) + self.obs_shape:
            raise DimensionError(
                f"observation frames {frames.shape} do not match encoder {(3,) + self.obs_shape}"
            )
        p = self.store.params
        cache: dict = {"acts": []}
        x = frames[None, :, :, :].astype(np.float64)
        for i in range(len(self.conv_channels)):
            z, xp = _conv_fwd(x, p[f"wave_conv{i}_w"], p[f"wave_conv{i}_b"])
            a = _tanh_fwd(z)
            cache["acts"].append((xp, a))
            x = a
        pooled = _pool_fwd(x, self.pool)
        cache["pooled_shape"] = pooled.shape
        flat = pooled.reshape(1, -1)
        cache["flat"] = flat
        hid = _tanh_fwd(_dense_fwd(flat, p["wave_dense_w"], p["wave_dense_b"]))
        cache["hid"] = hid
        out = _dense_fwd(hid, p["wave_head_w"], p["wave_head_b"])[0]
        cache["head_out"] = out

        blocks = self._split(out)
        scales = (1.0, self.v_scale, 1.0, self.v_scale)
        fields = [scales[i] * (self._embed @ blocks[i]) for i in range(4)]
        f_z = self.f_scale * (self._embed @ blocks[4])
        raw = blocks[5]
        pml_params = LatentPmlParams(raw, self.grid, self.pml_scale)
        cache["pml_params"] = pml_params
        sigma_z = realize_latent_pml(pml_params)
        state = LatentState(self.grid, np.stack(fields), t=t)
        conds = LatentConditions(
            initial=state,
            f_z=Field(self.grid, f_z),
            sigma_z=sigma_z,
            omega=self.omega,
        )
        return conds, cache

    def backward(
        self,
        cache: dict,
        g_initial: np.ndarray,
        g_fz: np.ndarray,
        g_sigma: np.ndarray,
    ) -> np.ndarray:
        """Accumulate parameter grads; returns the gradient w.r.t. pixels.

        ``g_initial`` is (4, n) w.r.t. the embedded initial fields, ``g_fz``
        and ``g_sigma`` are (n,) w.r.t. the realized source shape and PML.
        """
        p, g = self.store.params, self.store.grads
        n_out = 5 * self.n_coeffs + self.n_pml
        gout = np.empty(n_out)
        n = self.n_coeffs
        scales = (1.0, self.v_scale, 1.0, self.v_scale)
        for i in range(4):
            gout[i * n : (i + 1) * n] = scales[i] * (self._embed.T @ g_initial[i])
        gout[4 * n : 5 * n] = self.f_scale * (self._embed.T @ g_fz)
        gout[5 * n :] = realize_latent_pml_vjp(cache["pml_params"], g_sigma)

        ghid = _dense_bwd(
            cache["hid"], p["wave_head_w"], gout[None, :], g["wave_head_w"], g["wave_head_b"]
        )
        ghid = _tanh_bwd(cache["hid"], ghid)
        gflat = _dense_bwd(
            cache["flat"], p["wave_dense_w"], ghid, g["wave_dense_w"], g["wave_dense_b"]
        )
        gx = _pool_bwd(gflat.reshape(cache["pooled_shape"]), self.pool)
        for i in range(len(self.conv_channels) - 1, -1, -1):
            xp, a = cache["acts"][i]
            gz = _tanh_bwd(a, gx)
            gx = _conv_bwd(xp, p[f"wave_conv{i}_w"], gz, g[f"wave_conv{i}_w"], g[f"wave_conv{i}_b"])
        return gx[0]


def encode_wave(obs, enc: WaveEncoder, t: float = 0.0) -> LatentConditions:
    """Encode an Observation (its three frames) into latent conditions."""
    conds, _ = enc.encode(np.asarray(obs.frames), t=t)
    return conds


# ---------------------------------------------------------------------------
# Design encoder
# ---------------------------------------------------------------------------


class DesignEncoder:
    """Radii vector -> one latent speed frame, batched over design states.

    Realized frame: c_ambient + embedded coefficient perturbation, smoothly
    clipped into [c_min, c_max]; c_min keeps the latent medium propagating,
    c_max keeps every frame inside the integrator's stability limit.
    """

    def __init__(
        self,
        store: ParamStore,
        n_radii: int,
        latent_grid: Grid1D,
        c_ambient: float,
        c_max: float,
        n_coeffs: int = 64,
        hidden: int = 24,
        clip_beta: float | None = None,
    ):
        self.store = store
        self.n_radii = int(n_radii)
        self.grid = latent_grid
        self.c_ambient = float(c_ambient)
        self.c_min = 0.2 * self.c_ambient
        self.c_max = float(c_max)
        if not self.c_min < self.c_ambient < self.c_max:
            raise DimensionError(
                f"ambient speed {c_ambient} outside realizable range "
                f"({self.c_min}, {self.c_max})"
            )
        self.n_coeffs = int(n_coeffs)
        self.hidden = int(hidden)
        self.clip_beta = 0.02 * self.c_ambient if clip_beta is None else float(clip_beta)

        store.add("design_w1", (self.hidden, self.n_radii), 1.0 / np.sqrt(max(self.n_radii, 1)))
        store.add("design_b1", (self.hidden,), 0.0)
        store.add("design_w2", (self.hidden, self.hidden), 1.0 / np.sqrt(self.hidden))
        store.add("design_b2", (self.hidden,), 0.0)
        # small head: frames start near the ambient speed
        store.add("design_head_w", (self.n_coeffs, self.hidden), 0.01 / np.sqrt(self.hidden))
        store.add("design_head_b", (self.n_coeffs,), 0.0)
        self._embed = embed_matrix(self.grid, self.n_coeffs)

    def frames(self, radii: np.ndarray) -> tuple[np.ndarray, dict]:
        """Map (K, M) radii rows to (K, n) speed frames."""
        radii = np.atleast_2d(np.asarray(radii, dtype=np.float64))
        if radii.shape[1] != self.n_radii:
            raise DimensionError(
                f"radii rows have {radii.shape[1]} entries, encoder expects {self.n_radii}"
            )
        p = self.store.params
        h1 = _tanh_fwd(_dense_fwd(radii, p["design_w1"], p["design_b1"]))
        h2 = _tanh_fwd(_dense_fwd(h1, p["design_w2"], p["design_b2"]))
        coeffs = _dense_fwd(h2, p["design_head_w"], p["design_head_b"])
        raw = self.c_ambient + coeffs @ self._embed.T
        out = smooth_clip(raw, self.c_min, self.c_max, self.clip_beta)
        cache = {"radii": radii, "h1": h1, "h2": h2, "raw": raw}
        return out, cache

    def backward(self, cache: dict, gframes: np.ndarray) -> np.ndarray:
        """Accumulate parameter grads; returns (K, M) gradient w.r.t. radii."""
        p, g = self.store.params, self.store.grads
        graw = gframes * smooth_clip_deriv(cache["raw"], self.c_min, self.c_max, self.clip_beta)
        gcoeffs = graw @ self._embed
        gh2 = _dense_bwd(cache["h2"], p["design_head_w"], gcoeffs, g["design_head_w"], g["design_head_b"])
        gh2 = _tanh_bwd(cache["h2"], gh2)
        gh1 = _dense_bwd(cache["h1"], p["design_w2"], gh2, g["design_w2"], g["design_b2"])
        gh1 = _tanh_bwd(cache["h1"], gh1)
        return _dense_bwd(cache["radii"], p["design_w1"], gh1, g["design_w1"], g["design_b1"])


def encode_design_window(
    radii_seq: np.ndarray, enc: DesignEncoder, t_knots: np.ndarray
) -> LatentSpeedInterp:
    """One speed frame per design state, knotted at action boundaries."""
    radii_seq = np.atleast_2d(np.asarray(radii_seq, dtype=np.float64))
    t_knots = np.asarray(t_knots, dtype=np.float64)
    if radii_seq.shape[0] != t_knots.shape[0]:
        raise DimensionError(
            f"{radii_seq.shape[0]} design states but {t_knots.shape[0]} knots"
        )
    if radii_seq.shape[0] < 2:
        raise DimensionError("need at least two design states to interpolate")
    frames, _ = enc.frames(radii_seq)
    return LatentSpeedInterp(frames, t_knots, enc.grid)
