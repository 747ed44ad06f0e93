"""Layer descriptors, the autoencoder model and its file format."""

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import FormatError, InvalidInputError
from . import ops

MAGIC = b"GRCAE1"
KINDS = ("conv", "conv_transpose", "dense", "relu", "sigmoid", "flatten", "reshape")
PARAM_KINDS = ("conv", "conv_transpose", "dense")


@dataclass(frozen=True)
class LayerSpec:
    """One layer. ``kernel`` is ``(out_ch, in_ch, kh, kw)`` for both conv kinds."""

    kind: str
    kernel: tuple = ()
    stride: int = 1
    padding: int = 0
    output_padding: int = 0
    width: int = 0  # dense: output width
    in_width: int = 0  # dense: input width
    shape: tuple = ()  # reshape: target (C, H, W)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown layer kind {self.kind!r}")
        if self.stride < 1:
            raise InvalidInputError("stride must be >= 1")
        if self.kind in ("conv", "conv_transpose"):
            if len(self.kernel) != 4 or min(self.kernel) < 1:
                raise InvalidInputError(f"bad kernel {self.kernel!r}")
        if self.kind == "dense" and (self.width < 1 or self.in_width < 1):
            raise InvalidInputError("dense layer needs positive width and in_width")

    def param_shapes(self):
        if self.kind == "conv":
            return [tuple(self.kernel), (self.kernel[0],)]
        if self.kind == "conv_transpose":
            out_ch, in_ch, kh, kw = self.kernel
            return [(in_ch, out_ch, kh, kw), (out_ch,)]
        if self.kind == "dense":
            return [(self.width, self.in_width), (self.width,)]
        return []

    def fan_in(self):
        if self.kind in ("conv", "conv_transpose"):
            _, in_ch, kh, kw = self.kernel
            return in_ch * kh * kw
        return self.in_width

    def output_shape(self, shape):
        """Shape map on per-sample shapes ``(C, H, W)`` or ``(width,)``."""
        if self.kind == "conv":
            c, h, w = shape
            if c != self.kernel[1]:
                raise InvalidInputError(f"conv expects {self.kernel[1]} channels, got {c}")
            _, _, kh, kw = self.kernel
            return (self.kernel[0], ops.conv_output_size(h, kh, self.stride, self.padding),
                    ops.conv_output_size(w, kw, self.stride, self.padding))
        if self.kind == "conv_transpose":
            c, h, w = shape
            if c != self.kernel[1]:
                raise InvalidInputError(f"conv_transpose expects {self.kernel[1]} channels, got {c}")
            _, _, kh, kw = self.kernel
            args = (self.stride, self.padding, self.output_padding)
            return (self.kernel[0], ops.conv_transpose_output_size(h, kh, *args),
                    ops.conv_transpose_output_size(w, kw, *args))
        if self.kind == "dense":
            if shape != (self.in_width,):
                raise InvalidInputError(f"dense expects ({self.in_width},), got {shape}")
            return (self.width,)
        if self.kind == "flatten":
            return (int(np.prod(shape)),)
        if self.kind == "reshape":
            if int(np.prod(shape)) != int(np.prod(self.shape)):
                raise InvalidInputError(f"cannot reshape {shape} to {self.shape}")
            return tuple(self.shape)
        return tuple(shape)

    def to_dict(self):
        d = {"kind": self.kind}
        for key, value in asdict(self).items():
            if key != "kind" and value != LayerSpec.__dataclass_fields__[key].default:
                d[key] = list(value) if isinstance(value, tuple) else value
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("kernel", "shape"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def forward_layer(spec, params, x):
    """Run one layer on a batch; returns ``(y, cache)``."""
    if spec.kind == "conv":
        return ops.conv2d(x, params[0], params[1], spec.stride, spec.padding)
    if spec.kind == "conv_transpose":
        return ops.conv_transpose2d(x, params[0], params[1], spec.stride, spec.padding,
                                    spec.output_padding)
    if spec.kind == "dense":
        return x @ params[0].T + params[1], x
    if spec.kind == "relu":
        return np.maximum(x, 0.0), x > 0
    if spec.kind == "sigmoid":
        y = ops.sigmoid(x)
        return y, y
    if spec.kind == "flatten":
        return x.reshape(x.shape[0], -1), x.shape
    return x.reshape((x.shape[0],) + tuple(spec.shape)), x.shape


def backward_layer(spec, params, cache, dout):
    """Reverse pass of one layer; returns ``(dx, [dparam, ...])``."""
    if spec.kind == "conv":
        dx, dw, db = ops.conv2d_backward(dout, cache)
        return dx, [dw, db]
    if spec.kind == "conv_transpose":
        dx, dw, db = ops.conv_transpose2d_backward(dout, cache)
        return dx, [dw, db]
    if spec.kind == "dense":
        return dout @ params[0], [dout.T @ cache, dout.sum(axis=0)]
    if spec.kind == "relu":
        return dout * cache, []
    if spec.kind == "sigmoid":
        return dout * cache * (1.0 - cache), []
    return dout.reshape(cache), []


@dataclass
class CaeModel:
    """Encoder/decoder layer stacks plus one parameter list per layer."""

    input_shape: tuple  # (C, H, W)
    encoder: list
    decoder: list
    params: list = field(default_factory=list)  # parallel to encoder + decoder

    @property
    def layers(self):
        return list(self.encoder) + list(self.decoder)

    @property
    def latent_dim(self):
        return self.encoder[-1].width

    def encoder_params(self):
        return self.params[:len(self.encoder)]

    def decoder_params(self):
        return self.params[len(self.encoder):]

    def n_parameters(self):
        return sum(p.size for group in self.params for p in group)

    def copy(self):
        return CaeModel(self.input_shape, list(self.encoder), list(self.decoder),
                        [[p.copy() for p in group] for group in self.params])

    def descriptor(self):
        return json.dumps({
            "input_shape": list(self.input_shape),
            "encoder": [s.to_dict() for s in self.encoder],
            "decoder": [s.to_dict() for s in self.decoder],
        }, sort_keys=True, separators=(",", ":"))


def validate_architecture(model):
    if not model.encoder or model.encoder[-1].kind != "dense":
        raise InvalidInputError("encoder must end in a dense latent layer")
    if not model.decoder or model.decoder[-1].kind != "sigmoid":
        raise InvalidInputError("decoder must end in a sigmoid")
    shape = tuple(model.input_shape)
    for spec in model.layers:
        shape = spec.output_shape(shape)
    if shape != tuple(model.input_shape):
        raise InvalidInputError(f"decoder output {shape} does not match input {model.input_shape}")


def build_architecture(resolution, latent_dim, in_channels=1, base_channels=16, min_spatial=8,
                       kernel=4):
    """Stride-2 conv/ReLU blocks (channels doubling) down to ``min_spatial``, then dense.

    A ``kernel=4, padding=1`` stride-2 convolution halves even sizes exactly
    and its transpose doubles them back. The decoder mirrors the encoder
    and finishes with a sigmoid.
    """
    if resolution <= min_spatial or resolution % min_spatial:
        raise InvalidInputError(f"resolution {resolution} is not {min_spatial}*2^m")
    blocks = 0
    size = resolution
    while size > min_spatial:
        if size % 2:
            raise InvalidInputError(f"resolution {resolution} is not {min_spatial}*2^m")
        size //= 2
        blocks += 1
    if size != min_spatial:
        raise InvalidInputError(f"resolution {resolution} is not {min_spatial}*2^m")
    channels = [in_channels] + [base_channels * 2 ** i for i in range(blocks)]
    enc = []
    for i in range(blocks):
        enc.append(LayerSpec("conv", (channels[i + 1], channels[i], kernel, kernel), 2, 1))
        enc.append(LayerSpec("relu"))
    top = channels[-1]
    flat = top * size * size
    enc.append(LayerSpec("flatten"))
    enc.append(LayerSpec("dense", width=latent_dim, in_width=flat))
    dec = [LayerSpec("dense", width=flat, in_width=latent_dim), LayerSpec("relu"),
           LayerSpec("reshape", shape=(top, size, size))]
    for i in range(blocks, 0, -1):
        dec.append(LayerSpec("conv_transpose", (channels[i - 1], channels[i], kernel, kernel), 2, 1))
        if i > 1:
            dec.append(LayerSpec("relu"))
    dec.append(LayerSpec("sigmoid"))
    model = CaeModel((in_channels, resolution, resolution), enc, dec)
    validate_architecture(model)
    return model


def init_params(model, rng):
    """He-style uniform fan-in init: weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)), biases 0."""
    params = []
    for i, spec in enumerate(model.layers):
        shapes = spec.param_shapes()
        if not shapes:
            params.append([])
            continue
        stream = rng.child(i)
        bound = np.sqrt(6.0 / spec.fan_in())
        params.append([stream.uniform(-bound, bound, shapes[0]), np.zeros(shapes[1])])
    model.params = params
    return model


def zero_params(model):
    model.params = [[np.zeros(s) for s in spec.param_shapes()] for spec in model.layers]
    return model


def run_layers(specs, params, x, keep_caches=False):
    caches = []
    for spec, p in zip(specs, params):
        x, cache = forward_layer(spec, p, x)
        if keep_caches:
            caches.append(cache)
    return x, caches


def backprop_layers(specs, params, caches, dout):
    grads = [None] * len(specs)
    for i in range(len(specs) - 1, -1, -1):
        dout, grads[i] = backward_layer(specs[i], params[i], caches[i], dout)
    return dout, grads


def _as_batch(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        x = x[:, None]
    if x.ndim != 4 or tuple(x.shape[1:]) != tuple(model.input_shape):
        raise InvalidInputError(
            f"input shape {x.shape} does not match model resolution {model.input_shape}")
    return x


def encode(model, x):
    """Latent vectors ``(batch, d)`` for a batch of images."""
    z, _ = run_layers(model.encoder, model.encoder_params(), _as_batch(model, x))
    return z


def decode(model, z):
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != model.latent_dim:
        raise InvalidInputError(f"latent width {z.shape} does not match d={model.latent_dim}")
    out, _ = run_layers(model.decoder, model.decoder_params(), z)
    return out


def reconstruct(model, x):
    return decode(model, encode(model, x))


def loss_and_grads(model, x):
    """RMSE of the reconstruction and gradients for every parameter group."""
    x = _as_batch(model, x)
    layers = model.layers
    xhat, caches = run_layers(layers, model.params, x, keep_caches=True)
    loss, dout = ops.rmse_loss(xhat, x)
    _, grads = backprop_layers(layers, model.params, caches, dout)
    return loss, grads


def to_bytes(model):
    text = model.descriptor().encode("utf-8")
    flat = [np.ascontiguousarray(p, dtype="<f8").tobytes() for group in model.params for p in group]
    return MAGIC + struct.pack("<Q", len(text)) + text + b"".join(flat)


def from_bytes(blob, source="<bytes>"):
    if blob[:6] != MAGIC:
        raise FormatError(f"{source}: bad magic {blob[:6]!r}, expected {MAGIC!r}")
    if len(blob) < 14:
        raise FormatError(f"{source}: truncated header")
    (length,) = struct.unpack_from("<Q", blob, 6)
    if 14 + length > len(blob):
        raise FormatError(f"{source}: truncated architecture block")
    try:
        desc = json.loads(blob[14:14 + length].decode("utf-8"))
        model = CaeModel(tuple(desc["input_shape"]),
                         [LayerSpec.from_dict(d) for d in desc["encoder"]],
                         [LayerSpec.from_dict(d) for d in desc["decoder"]])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{source}: unreadable architecture block: {exc}") from exc
    validate_architecture(model)
    offset = 14 + length
    params = []
    for spec in model.layers:
        group = []
        for shape in spec.param_shapes():
            count = int(np.prod(shape))
            if offset + 8 * count > len(blob):
                raise FormatError(f"{source}: truncated parameter payload")
            group.append(np.frombuffer(blob, "<f8", count, offset).astype(np.float64).reshape(shape))
            offset += 8 * count
        params.append(group)
    if offset != len(blob):
        raise FormatError(f"{source}: {len(blob) - offset} trailing bytes")
    model.params = params
    return model


def save(model, path):
    with open(path, "wb") as fh:
        fh.write(to_bytes(model))


def load(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read(), str(path))
