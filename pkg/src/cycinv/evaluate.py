"""Measurement of a trained model from both directions.

Invariance probes are fixed-capacity MLPs trained on frozen latents and
scored on a held-out split (CCR for the class factor against chance, MAE
for position/scale/brightness against the training-median predictor).
Generator label scores turn the question around: estimators pretrained on
real images predict the factors of class-swapped syntheses; a generator
that obeys its class code and preserves the other factors scores high
categorically and low quantitatively. Probe and estimator capacity is fixed
here so that metric differences between runs reflect the representations,
not probe tuning.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import model as model_mod
from . import nn, rng

PROBE_HIDDEN = (64, 64)
PROBE_EPOCHS = 60
PROBE_LR = 1e-3
PROBE_BETA1 = 0.9
PROBE_BETA2 = 0.999
PROBE_BATCH = 128

QUANT_FACTORS = ("cx", "cy", "scale", "brightness")
PROBE_KINDS = ("categorical", "quantitative")

_SEED_PROBE = 0x9E0B
_SEED_CODES = 0x615


def extract_latents(models, images):
    """Deterministic-mode encodings (z = mu) of flat images."""
    latent = model_mod.encode(models, np.ascontiguousarray(images, dtype=np.float32),
                              "deterministic")
    return latent.mu.value.copy()


@dataclass
class Probe:
    mlp: nn.Mlp
    kind: str

    def logits(self, inputs):
        x = ad.constant(np.ascontiguousarray(inputs, dtype=np.float32))
        return nn.forward_mlp(self.mlp, x).value

    def predict_proba(self, inputs):
        z = self.logits(inputs)
        e = np.exp(z - z.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, inputs):
        if self.kind == "categorical":
            return self.logits(inputs).argmax(axis=1)
        return self.logits(inputs)


@dataclass
class MedianPredictor:
    """Constant predictor emitting the training median per target dimension."""

    medians: np.ndarray

    def predict(self, inputs):
        return np.tile(self.medians, (inputs.shape[0], 1))


def _as_targets(targets, kind):
    if kind == "categorical":
        return np.asarray(targets, dtype=np.int64).reshape(-1)
    t = np.asarray(targets, dtype=np.float32)
    return t.reshape(-1, 1) if t.ndim == 1 else t


def train_probe(inputs, targets, kind, seed, epochs=PROBE_EPOCHS, n_classes=None):
    """Train one estimator (64, 64 hidden, Adam 1e-3) on inputs -> targets.

    The same routine serves latent-space probes and the image-space
    estimators used for generator label scores; `kind` picks a softmax
    cross-entropy head or a linear head with squared loss.
    """
    if kind not in PROBE_KINDS:
        raise ValueError(f"kind must be one of {PROBE_KINDS}")
    inputs = np.ascontiguousarray(inputs, dtype=np.float32)
    targets = _as_targets(targets, kind)
    if inputs.shape[0] != targets.shape[0]:
        raise ValueError(
            f"{inputs.shape[0]} inputs vs {targets.shape[0]} targets"
        )
    if kind == "categorical":
        out_dim = int(targets.max()) + 1 if n_classes is None else int(n_classes)
    else:
        out_dim = targets.shape[1]
    spec = nn.MlpSpec((inputs.shape[1], *PROBE_HIDDEN, out_dim))
    mlp = nn.init_mlp(spec, rng.stream(seed, 0), name="probe")
    opt = nn.Adam(mlp.parameters(), lr=PROBE_LR, beta1=PROBE_BETA1, beta2=PROBE_BETA2)
    shuffle = rng.stream(seed, 1)
    n = inputs.shape[0]
    for _ in range(epochs):
        perm = shuffle.permutation(n)
        for start in range(0, n, PROBE_BATCH):
            idx = perm[start : start + PROBE_BATCH]
            pred = nn.forward_mlp(mlp, ad.constant(inputs[idx]))
            if kind == "categorical":
                loss = ad.softmax_cross_entropy(pred, targets[idx])
            else:
                loss = ad.mse(pred, ad.constant(targets[idx]))
            ad.backward(loss, wrt=mlp.parameters())
            opt.step()
    return Probe(mlp=mlp, kind=kind)


def eval_ccr(probe, inputs, labels):
    """Correct classification rate in percent."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size == 0:
        raise ValueError("cannot score an empty evaluation set")
    return 100.0 * float((probe.predict(inputs) == labels).mean())


def eval_mae(predictor, inputs, targets):
    """Per-dimension mean absolute error and population std of |errors|."""
    targets = _as_targets(targets, "quantitative")
    if targets.size == 0:
        raise ValueError("cannot score an empty evaluation set")
    err = np.abs(predictor.predict(inputs).astype(np.float64) - targets)
    return err.mean(axis=0), err.std(axis=0)


def chance_baseline(n_s):
    return 100.0 / n_s


def median_baseline(train_targets):
    t = _as_targets(train_targets, "quantitative")
    return MedianPredictor(medians=np.median(t, axis=0).astype(np.float32))


def _synthesize(models, images, codes):
    """Deterministic class-swapped syntheses for a batch of flat images."""
    out = model_mod.generate(models, np.ascontiguousarray(images, dtype=np.float32),
                             codes, "deterministic")
    return out.value


def gls_categorical(estimator, models, images, labels, role, gen, codes=None):
    """Mean estimator probability of the target label on syntheses G(x, c(y')).

    role "specified": the target is the drawn code y' itself (did the
    generator obey the code?). role "unspecified": the target is the image's
    true factor label (was the factor preserved?). codes, when given,
    replaces the per-image uniform draw.
    """
    n = images.shape[0]
    drawn = gen.integers(models.n_s, size=n) if codes is None else np.asarray(codes)
    probs = estimator.predict_proba(_synthesize(models, images, drawn))
    if role == "specified":
        target = drawn
    elif role == "unspecified":
        target = np.asarray(labels, dtype=np.int64).reshape(-1)
    else:
        raise ValueError(f"unknown role {role!r}")
    return float(probs[np.arange(n), target].astype(np.float64).mean())


def gls_quantitative(estimator, models, images, targets, role, gen, p=1, codes=None):
    """Mean |estimate - target|^p on syntheses, averaged over dimensions."""
    n = images.shape[0]
    drawn = gen.integers(models.n_s, size=n) if codes is None else np.asarray(codes)
    preds = estimator.predict(_synthesize(models, images, drawn)).astype(np.float64)
    if role == "specified":
        target = drawn.astype(np.float64).reshape(-1, 1)
    elif role == "unspecified":
        target = _as_targets(targets, "quantitative").astype(np.float64)
    else:
        raise ValueError(f"unknown role {role!r}")
    return float((np.abs(preds - target) ** p).mean())


def _lerp(a, b, t):
    """Convex combination with exact endpoints at t = 0 and t = 1."""
    if t == 0.0:
        return a.copy()
    if t == 1.0:
        return b.copy()
    return ((1.0 - t) * a + t * b).astype(np.float32)


def interpolate(models, x_initial, x_final, y_initial, y_final, steps_c, steps_z):
    """Grid of decodings over interpolated latents and class codes.

    The class code is constant within each column and the latent constant
    within each row; codes interpolate as raw convex combinations (no
    re-projection to one-hot). Every cell is decoded at batch size 1 so the
    corner cells match direct single-image generation bitwise.
    """
    if steps_c < 2 or steps_z < 2:
        raise ValueError("interpolation needs at least 2 steps per axis")
    x0 = np.ascontiguousarray(x_initial, dtype=np.float32).reshape(1, -1)
    x1 = np.ascontiguousarray(x_final, dtype=np.float32).reshape(1, -1)
    z0 = model_mod.encode(models, x0, "deterministic").mu.value
    z1 = model_mod.encode(models, x1, "deterministic").mu.value
    c0 = model_mod.one_hot(y_initial, models.n_s)[None, :]
    c1 = model_mod.one_hot(y_final, models.n_s)[None, :]
    side = models.side
    grid = np.empty((steps_z, steps_c, side, side), dtype=np.float32)
    for r in range(steps_z):
        z = _lerp(z0, z1, r / (steps_z - 1))
        for c in range(steps_c):
            code = _lerp(c0, c1, c / (steps_c - 1))
            cell = model_mod.decode(models, ad.constant(z), ad.constant(code))
            grid[r, c] = cell.value.reshape(side, side)
    return grid


def sample_prior(models, y, n, seed):
    """Decode n latents drawn from N(0, I) under the class code for y."""
    z = rng.stream(seed).standard_normal((n, models.d_z), dtype=np.float32)
    codes = model_mod.codes_matrix(np.full(n, int(y), dtype=np.int64), models.n_s)
    return model_mod.decode(models, ad.constant(z), ad.constant(codes)).value


def export_pgm(image, path):
    """Binary PGM (P5, maxval 255); pixel byte = round(255 * value)."""
    img = np.asarray(image, dtype=np.float32)
    if img.ndim != 2:
        raise ValueError("export_pgm expects a 2-D image")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("pixels must lie in [0, 1]")
    h, w = img.shape
    payload = np.rint(img.astype(np.float64) * 255.0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(payload.tobytes())


def export_grid_pgm(images, rows, cols, path):
    """Tile images row-major into a grid with 1-pixel white separators."""
    images = np.asarray(images, dtype=np.float32)
    if images.ndim != 3 or images.shape[0] != rows * cols:
        raise ValueError(f"expected {rows * cols} images, got {images.shape}")
    h, w = images.shape[1:]
    canvas = np.ones((rows * h + rows - 1, cols * w + cols - 1), dtype=np.float32)
    for k in range(rows * cols):
        r, c = divmod(k, cols)
        canvas[r * (h + 1) : r * (h + 1) + h, c * (w + 1) : c * (w + 1) + w] = images[k]
    export_pgm(canvas, path)


def read_pgm(path):
    """Parse our own P5 output back into a float32 image in [0, 1]."""
    with open(path, "rb") as f:
        data = f.read()
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5" or parts[2] != b"255":
        raise ValueError("not a cycinv P5 file")
    w, h = (int(v) for v in parts[1].split())
    img = np.frombuffer(parts[3], dtype=np.uint8)
    if img.size != w * h:
        raise ValueError("PGM payload size mismatch")
    return img.reshape(h, w).astype(np.float32) / 255.0


@dataclass
class ReportRow:
    factor: str
    kind: str
    role: str
    metric: str
    value: float
    std: float = None
    baseline: float = None


@dataclass
class EstimatorSet:
    """Image-space estimators for generator label scores, one per factor,
    trained on real training images and frozen before any GLS pass."""

    shape: Probe
    quantitative: dict  # factor name -> Probe


def _probe_seed(base, index):
    return int(rng.stream(base, _SEED_PROBE, index).integers(2**62))


def train_estimators(train_ds, seed, epochs=PROBE_EPOCHS):
    images = train_ds.flat_images()
    shape_probe = train_probe(
        images, train_ds.labels, "categorical", _probe_seed(seed, 0),
        epochs=epochs, n_classes=train_ds.n_s,
    )
    quant = {}
    for i, name in enumerate(QUANT_FACTORS):
        quant[name] = train_probe(
            images, train_ds.factor(name), "quantitative",
            _probe_seed(seed, 1 + i), epochs=epochs,
        )
    return EstimatorSet(shape=shape_probe, quantitative=quant)


def probe_report(models, train_ds, test_ds, seed, epochs=PROBE_EPOCHS):
    """Latent-invariance table: shape CCR vs chance, factor MAEs vs median."""
    z_train = extract_latents(models, train_ds.flat_images())
    z_test = extract_latents(models, test_ds.flat_images())
    rows = []
    shape_probe = train_probe(
        z_train, train_ds.labels, "categorical", _probe_seed(seed, 100),
        epochs=epochs, n_classes=train_ds.n_s,
    )
    rows.append(
        ReportRow(
            factor="shape", kind="categorical", role="specified", metric="ccr",
            value=eval_ccr(shape_probe, z_test, test_ds.labels),
            baseline=chance_baseline(train_ds.n_s),
        )
    )
    for i, name in enumerate(QUANT_FACTORS):
        probe = train_probe(
            z_train, train_ds.factor(name), "quantitative",
            _probe_seed(seed, 101 + i), epochs=epochs,
        )
        mae, std = eval_mae(probe, z_test, test_ds.factor(name))
        base_mae, _ = eval_mae(
            median_baseline(train_ds.factor(name)), z_test, test_ds.factor(name)
        )
        rows.append(
            ReportRow(
                factor=name, kind="quantitative", role="unspecified", metric="mae",
                value=float(mae[0]), std=float(std[0]), baseline=float(base_mae[0]),
            )
        )
    return rows


def gls_report(models, estimators, test_ds, seed):
    """Generator-label-score table from frozen estimators; one code draw per
    test image is shared by every factor, as one synthesis pass serves all."""
    rows = [
        ReportRow(
            factor="shape", kind="categorical", role="specified", metric="gls",
            value=gls_categorical(
                estimators.shape, models, test_ds.flat_images(), None,
                "specified", rng.stream(seed, _SEED_CODES),
            ),
            baseline=1.0 / test_ds.n_s,
        )
    ]
    for name in QUANT_FACTORS:
        rows.append(
            ReportRow(
                factor=name, kind="quantitative", role="unspecified", metric="gls_p1",
                value=gls_quantitative(
                    estimators.quantitative[name], models, test_ds.flat_images(),
                    test_ds.factor(name), "unspecified", rng.stream(seed, _SEED_CODES),
                ),
            )
        )
    return rows


REPORT_HEADER = "factor,kind,role,metric,value,std,baseline"


def _fmt(value):
    return "" if value is None else format(float(value), ".6g")


def write_report_csv(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(REPORT_HEADER + "\n")
        for r in rows:
            f.write(
                f"{r.factor},{r.kind},{r.role},{r.metric},"
                f"{_fmt(r.value)},{_fmt(r.std)},{_fmt(r.baseline)}\n"
            )


def format_report_table(rows):
    header = ("factor", "kind", "role", "metric", "value", "std", "baseline")
    table = [header] + [
        (r.factor, r.kind, r.role, r.metric, _fmt(r.value), _fmt(r.std), _fmt(r.baseline))
        for r in rows
    ]
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
             for row in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
