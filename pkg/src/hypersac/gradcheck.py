"""Central finite-difference verification of the tape gradients.

Relative error is ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``;
the floor keeps entries whose true derivative is zero (dead relu units)
from dividing rounding noise by zero. A probe whose +/- stencil flips a
relu unit straddles a kink where no derivative exists; such probes are
counted as ``skipped`` and replaced by another entry of the same array.
"""
from dataclasses import dataclass
import time

import numpy as np

from . import autodiff as ad
from .nn import LstmCellParams, MlpNetwork

FD_STEP = 1e-5
REL_TOL = 1e-4
ABS_FLOOR = 1e-7

# actor, twin critic and state-value shapes of the reference agent
REFERENCE_SHAPES = {
    "actor": (8, 256, 256, 10),
    "critic": (13, 256, 256, 1),
    "value": (8, 256, 256, 1),
}


def relative_error(analytic, numeric, floor=ABS_FLOOR):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def numeric_gradient(loss_fn, params, entries=None, step=FD_STEP, pattern_fn=None,
                     want=None):
    """Central differences of ``loss_fn(params) -> float``.

    ``entries`` maps parameter index to candidate flat positions, probed in
    order; ``None`` probes everything. With ``pattern_fn`` (params -> bytes
    describing the relu activation pattern), probes whose stencil changes
    the pattern are skipped; ``want`` caps the number of accepted probes per
    array. Returns ``({index: (positions, values)}, skipped)``. Parameters
    are perturbed in place and restored.
    """
    out, skipped = {}, 0
    for k, p in enumerate(params):
        flat = p.reshape(-1)
        candidates = np.arange(flat.size) if entries is None else np.asarray(entries[k])
        positions, values = [], []
        for pos in candidates:
            if want is not None and len(positions) == want:
                break
            orig = flat[pos]
            flat[pos] = orig + step
            plus = loss_fn(params)
            pat_plus = pattern_fn(params) if pattern_fn else None
            flat[pos] = orig - step
            minus = loss_fn(params)
            pat_minus = pattern_fn(params) if pattern_fn else None
            flat[pos] = orig
            if pat_plus != pat_minus:
                skipped += 1
                continue
            positions.append(pos)
            values.append((plus - minus) / (2.0 * step))
        out[k] = (np.asarray(positions, dtype=np.intp), np.asarray(values))
    return out, skipped


@dataclass
class CheckResult:
    name: str
    seed: int
    checked: int
    max_rel_error: float
    skipped: int = 0

    @property
    def passed(self):
        return self.max_rel_error < REL_TOL


def compare(name, seed, loss_t, params, rng, per_param=None, pattern_fn=None):
    """Compare tape and finite-difference gradients of ``loss_t(leaves) -> Tensor``."""
    _, analytic = ad.grad_scalar(loss_t, params)

    def loss_value(arrays):
        return float(loss_t(arrays).value)

    entries = None
    if per_param is not None:
        entries = [rng.permutation(p.size) for p in params]
    numeric, skipped = numeric_gradient(loss_value, params, entries, pattern_fn=pattern_fn,
                                        want=per_param)
    worst, checked = 0.0, 0
    for k, (positions, values) in numeric.items():
        errs = relative_error(analytic[k].reshape(-1)[positions], values)
        worst = max(worst, float(errs.max(initial=0.0)))
        checked += len(positions)
    return CheckResult(name, seed, checked, worst, skipped)


def check_mlp(sizes, seed, batch=4, per_param=16):
    rng = np.random.default_rng(seed)
    net = MlpNetwork.init(sizes, rng)
    x = rng.normal(size=(batch, sizes[0]))
    y = rng.normal(size=(batch, sizes[-1]))

    def loss(params):
        return ad.mul(ad.mean(ad.square(ad.sub(net.apply(x, params), y))), 0.5)

    def pattern(params):
        h = x
        bits = []
        for k in range(len(net.layers) - 1):
            h = h @ params[2 * k].T + params[2 * k + 1]
            bits.append(h > 0.0)
            h = np.maximum(h, 0.0)
        return np.packbits(np.concatenate([b.ravel() for b in bits])).tobytes()

    return compare(f"mlp{'-'.join(map(str, sizes))}", seed, loss, net.parameters(), rng,
                   per_param, pattern_fn=pattern)


def check_lstm(seed, input_dim=5, hidden_dim=4, batch=3):
    rng = np.random.default_rng(seed)
    cell = LstmCellParams.init(input_dim, hidden_dim, rng)
    x = rng.normal(size=(batch, input_dim))
    h = rng.normal(size=(batch, hidden_dim))
    c = rng.normal(size=(batch, hidden_dim))
    weights = rng.normal(size=(batch, 2 * hidden_dim))
    params = cell.parameters() + [x, h, c]

    def loss(leaves):
        out = ad.lstm_step(leaves[3], leaves[4], leaves[5], *leaves[:3])
        return ad.sum(ad.mul(out, weights))

    return compare(f"lstm{input_dim}x{hidden_dim}", seed, loss, params, rng)


def run_suite(seeds=20, per_param=16, shapes=None, log=print):
    """Run every reference check over ``seeds`` seeds; returns the list of results."""
    shapes = REFERENCE_SHAPES if shapes is None else shapes
    results = []
    start = time.perf_counter()
    for seed in range(seeds):
        for name, sizes in shapes.items():
            res = check_mlp(sizes, seed, per_param=per_param)
            res.name = name
            results.append(res)
        results.append(check_lstm(seed))
    if log is not None:
        for name in list(shapes) + ["lstm5x4"]:
            rows = [r for r in results if r.name == name]
            worst = max(r.max_rel_error for r in rows)
            status = "PASS" if all(r.passed for r in rows) else "FAIL"
            log(f"{status} {name}: {len(rows)} seeds, {sum(r.checked for r in rows)} entries "
                f"({sum(r.skipped for r in rows)} kink probes skipped), max rel err {worst:.2e}")
        log(f"grad-check finished in {time.perf_counter() - start:.1f}s")
    return results
