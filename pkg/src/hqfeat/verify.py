"""Registry of runnable property checks behind the ``verify`` command.

Each check raises AssertionError (or any exception) to fail. The quick
subset covers the sub-second sanity properties; the full suite adds the
gradient checks, oracles, stitching, and permutation invariance.
"""

from __future__ import annotations

import numpy as np

from . import ndgrad as nd
from .adapters import (
    AggregatorConfig,
    AttentionAggregator,
    DownsampleSpec,
    Downsampler,
    FilmGenerator,
    ProbeHead,
    bce_multilabel,
    film_apply,
    token_out,
)
from .audio import AudioBuffer
from .extract import ExtractionConfig, segment_and_stitch, segment_plan, stitch_boundary_error, tokenize
from .harness.metrics import average_precision, roc_auc, sdr
from .ndgrad import Tensor, grad_check
from .priors import PriorModel, default_prior_configs
from .sqvae2 import Sqvae2, Sqvae2Config, deterministic_quantize, stochastic_quantize

CHECKS: list[tuple[str, bool, object]] = []  # (name, quick, fn)


def check(name: str, quick: bool):
    def wrap(fn):
        CHECKS.append((name, quick, fn))
        return fn

    return wrap


def _micro_stage1(seed: int = 0) -> Sqvae2:
    cfg = Sqvae2Config(widths=(8, 6, 6), codebook_sizes=(4, 5, 6), codebook_dim=3,
                       residual_blocks=1)
    return Sqvae2(cfg, np.random.default_rng(np.random.PCG64(seed)))


def _micro_priors(seed: int = 0, **kw) -> dict[int, PriorModel]:
    cfgs = default_prior_configs(codebook_sizes=(4, 5, 6), context_length=kw.pop("context", 32),
                                 depth=2, widths=(12, 12, 12), heads=(2, 2, 2), **kw)
    return {l: PriorModel(cfgs[l], np.random.default_rng(np.random.PCG64(seed + l))) for l in cfgs}


@check("softmax-normalization", quick=True)
def _softmax_sums():
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = Tensor(rng.normal(size=(4, 9)) * 3)
        s = nd.softmax(x).value.sum(axis=-1)
        assert np.abs(s - 1.0).max() < 1e-12


@check("conv-roundtrip-length", quick=True)
def _conv_lengths():
    rng = np.random.default_rng(1)
    for stride in (2, 4, 8):
        x = Tensor(rng.normal(size=(1, 32, 3)))
        w = Tensor(rng.normal(size=(stride, 3, 5)))
        wt = Tensor(rng.normal(size=(stride, 5, 3)))
        y = nd.conv1d(x, w, stride=stride)
        z = nd.conv1d_transpose(y, wt, stride=stride)
        assert z.shape[1] == 32


@check("causal-attention-isolation", quick=True)
def _attention_causal():
    rng = np.random.default_rng(2)
    q, k, v = (rng.normal(size=(1, 8, 6)) for _ in range(3))
    base = nd.scaled_dot_attention(Tensor(q), Tensor(k), Tensor(v), mask=nd.causal_mask(8)).value
    q2, k2, v2 = q.copy(), k.copy(), v.copy()
    for arr in (q2, k2, v2):
        arr[0, 5:] += 1.0
    pert = nd.scaled_dot_attention(Tensor(q2), Tensor(k2), Tensor(v2), mask=nd.causal_mask(8)).value
    assert np.abs(base[0, :5] - pert[0, :5]).max() < 1e-12


@check("quantizer-oracles", quick=True)
def _quantizer_oracles():
    model = _micro_stage1()
    rng = np.random.default_rng(3)
    for _ in range(50):
        level = int(rng.integers(1, 4))
        cb = model.codebooks[level]
        z = rng.normal(size=cb.d)
        probs = stochastic_quantize(z, cb)
        d2 = ((z - cb.entries.value) ** 2).sum(axis=1)
        brute = np.exp(-d2 / (2 * float(cb.s2().value)))
        brute /= brute.sum()
        assert np.abs(probs - brute).max() < 1e-12
        assert deterministic_quantize(z, cb) == int(d2.argmin())


@check("temperature-limit-one-hot", quick=True)
def _one_hot_limit():
    model = _micro_stage1()
    cb = model.codebooks[2]
    cb.log_s2.value = np.log(1e-8)
    rng = np.random.default_rng(4)
    for _ in range(20):
        z = rng.normal(size=cb.d)
        d2 = np.sort(((z - cb.entries.value) ** 2).sum(axis=1))
        if d2[1] - d2[0] <= 0.1:
            continue
        probs = stochastic_quantize(z, cb)
        one_hot = np.zeros_like(probs)
        one_hot[deterministic_quantize(z, cb)] = 1.0
        assert np.abs(probs - one_hot).max() < 1e-6


@check("elbo-decomposition", quick=True)
def _elbo_decomposition():
    model = _micro_stage1()
    rng = np.random.default_rng(5)
    x = rng.normal(size=(1, 256)) * 0.3
    total, parts, _, _ = model.elbo(x, np.random.default_rng(6))
    assert abs(total.item() - sum(p.item() for p in parts.values())) < 1e-10


@check("elbo-entropy-uniform", quick=True)
def _elbo_uniform_entropy():
    model = _micro_stage1()
    cb = model.codebooks[1]
    cb.entries.value = np.stack([v / np.linalg.norm(v) for v in
                                 np.random.default_rng(7).normal(size=(cb.K, cb.d))])
    # put the query at the centroid-symmetric point: all-equidistant rows
    probs = stochastic_quantize(np.zeros(cb.d), cb)
    entropy = -(probs * np.log(probs)).sum()
    assert abs(entropy - np.log(cb.K)) < 1e-12


@check("prior-causality", quick=True)
def _prior_causality():
    priors = _micro_priors(seed=10)
    p = priors[1]
    p.head.w.value = np.random.default_rng(8).normal(size=p.head.w.value.shape)
    tokens = np.random.default_rng(9).integers(0, 4, size=12)
    base, _ = p.forward_logits(p.build_input_sequence(tokens[None, :]))
    for t in range(1, 12):
        mod = tokens.copy()
        mod[t] = (mod[t] + 1) % 4
        pert, _ = p.forward_logits(p.build_input_sequence(mod[None, :]))
        diff = np.abs(base.value - pert.value).max(axis=(0, 2))
        assert diff[: t + 1].max() < 1e-10, f"position {t} leaked backward"


@check("upsampler-alignment", quick=True)
def _upsampler_alignment():
    priors = _micro_priors(seed=11)
    p = priors[2]
    upper = np.random.default_rng(12).integers(0, 4, size=8)
    base = p.upsampled_conditioning([upper[None, :]]).value
    ratio = p.cfg.upsample_ratios[0]
    for j in range(len(upper)):
        mod = upper.copy()
        mod[j] = (mod[j] + 1) % 4
        pert = p.upsampled_conditioning([mod[None, :]]).value
        diff = np.abs(base - pert).max(axis=(0, 2))
        affected = np.flatnonzero(diff > 1e-12)
        if affected.size:
            bound = int(np.ceil((affected[0] + 1) / ratio)) + 2 - 1
            assert j <= bound, f"upper token {j} influenced frame {affected[0]}"


@check("aggregator-permutation-invariance", quick=True)
def _aggregator_invariance():
    rng = np.random.default_rng(13)
    agg = AttentionAggregator(rng, AggregatorConfig(width=12, heads=1))
    tokens = [Tensor(rng.normal(size=12)) for _ in range(6)]
    base = agg(tokens).value
    perm = [tokens[i] for i in (4, 2, 0, 5, 1, 3)]
    assert np.abs(agg(perm).value - base).max() < 1e-10


@check("token-out-identity", quick=True)
def _token_out_identity():
    rng = np.random.default_rng(14)
    seq = Tensor(rng.normal(size=(7, 5)))
    out = token_out(seq, np.random.default_rng(15), ratio=0.0)
    assert np.array_equal(out.value, seq.value)


@check("downsampler-oracles", quick=True)
def _downsampler_oracles():
    rng = np.random.default_rng(16)
    feats = rng.normal(size=(32, 6))
    for kind in ("maxpool", "avgpool"):
        spec = DownsampleSpec(kind, window=64, hop=32, feature_hop=8)
        out = Downsampler(rng, spec, 6)(feats).value
        for t in range(out.shape[0]):
            chunk = feats[t * 4 : t * 4 + 8]
            ref = chunk.max(axis=0) if kind == "maxpool" else chunk.mean(axis=0)
            assert np.abs(out[t] - ref).max() < 1e-12


@check("film-identity", quick=True)
def _film_identity():
    rng = np.random.default_rng(17)
    gen = FilmGenerator(rng, 8, 5)
    act = Tensor(rng.normal(size=(3, 5)))
    out = film_apply(act, gen(Tensor(rng.normal(size=8))))
    assert np.abs(out.value - act.value).max() < 1e-12


@check("metric-oracles", quick=True)
def _metric_oracles():
    rng = np.random.default_rng(18)
    scores = rng.normal(size=40)
    labels = rng.random(40) < 0.4
    auc = roc_auc(scores, labels)
    pos, neg = scores[labels], scores[~labels]
    brute = np.mean([(p > n) + 0.5 * (p == n) for p in pos for n in neg])
    assert abs(auc - brute) < 1e-12
    x = np.sin(np.arange(2048) * 0.3)
    assert sdr(x, x) == 80.0


@check("gradients-core-ops", quick=False)
def _grad_core_ops():
    rng = np.random.default_rng(19)
    for seed in range(20):
        r = np.random.default_rng(np.random.PCG64(seed))
        x = Tensor(r.normal(size=(2, 6, 3)) + 0.1)
        w = Tensor(r.normal(size=(2, 3, 4)))

        def f():
            y = nd.conv1d(x, w, stride=2)
            y = nd.gelu(y)
            return nd.sum_(nd.mul(y, y))

        assert grad_check(f, [x, w]) < 1e-4


@check("gradients-stage1-loss", quick=False)
def _grad_stage1():
    model = _micro_stage1(seed=21)
    x = np.random.default_rng(22).normal(size=(1, 256)) * 0.3
    params = list(model.parameters().values())

    def f():
        total, _, _, _ = model.elbo(x, np.random.default_rng(np.random.PCG64(23)))
        return total

    err = grad_check(f, params, max_coords_per_param=3,
                     rng=np.random.default_rng(24))
    assert err < 1e-4, f"stage-1 gradient error {err}"


@check("gradients-prior-nll", quick=False)
def _grad_prior():
    priors = _micro_priors(seed=25, context=16)
    p = priors[2]
    z1 = np.random.default_rng(26).integers(0, 4, size=4)
    z2 = np.random.default_rng(27).integers(0, 5, size=16)
    params = list(p.parameters().values())

    def f():
        return p.nll(z2[None, :], None, [z1[None, :]])

    err = grad_check(f, params, max_coords_per_param=3,
                     rng=np.random.default_rng(28))
    assert err < 1e-4, f"prior gradient error {err}"


@check("gradients-aggregator-probe", quick=False)
def _grad_aggregator():
    rng = np.random.default_rng(29)
    agg = AttentionAggregator(rng, AggregatorConfig(width=8, heads=1))
    head = ProbeHead(rng, 8, 3, link="sigmoid", hidden=8)
    tokens = [rng.normal(size=8) for _ in range(4)]
    targets = np.array([1.0, 0.0, 1.0])
    params = list(agg.parameters().values()) + list(head.parameters().values())

    def f():
        vec = agg([Tensor(t) for t in tokens])
        return bce_multilabel(head.logits(vec), targets)

    err = grad_check(f, params, max_coords_per_param=4,
                     rng=np.random.default_rng(30))
    assert err < 1e-4, f"aggregator gradient error {err}"


@check("extraction-stitching", quick=False)
def _stitching():
    stage1 = _micro_stage1(seed=31)
    priors = _micro_priors(seed=32, context=32, attention_pattern="local:3",
                           position_mode="none")
    for level in (1, 2):
        rf = priors[level].receptive_field()
        assert rf is not None and rf <= 24, f"level {level} receptive field {rf} too wide"
    T = 32 * stage1.cfg.rates[1] * 4
    x = np.sin(np.arange(T) * 0.07) * 0.5
    audio = AudioBuffer(x, stage1.cfg.sample_rate)
    errs = stitch_boundary_error(audio, stage1, priors,
                                 ExtractionConfig(levels=("top", "middle")),
                                 overlaps=(0.75, 0.875))
    for level, err in errs.items():
        assert err < 1e-8, f"level {level} segmentation disagreement {err}"
    plans = segment_plan(64, 16, 8)
    covered = sorted((p.keep_start, p.keep_end) for p in plans)
    assert covered[0][0] == 0 and covered[-1][1] == 64


@check("stitch-worker-determinism", quick=False)
def _stitch_workers():
    stage1 = _micro_stage1(seed=33)
    priors = _micro_priors(seed=34, context=16)
    T = 16 * stage1.cfg.rates[1] * 3
    audio = AudioBuffer(np.sin(np.arange(T) * 0.05), stage1.cfg.sample_rate)
    cfg = ExtractionConfig(levels=("top", "middle"))
    a = segment_and_stitch(audio, stage1, priors, cfg, workers=1)
    b = segment_and_stitch(audio, stage1, priors, cfg, workers=8)
    for level in a:
        assert np.array_equal(a[level].data, b[level].data)


def run_verify(quick: bool = True) -> tuple[dict, bool]:
    """Run the selected checks; returns ({name: "pass"|"fail: ..."}, all_ok)."""
    results = {}
    ok = True
    for name, is_quick, fn in CHECKS:
        if quick and not is_quick:
            continue
        try:
            fn()
            results[name] = "pass"
        except Exception as exc:  # report and continue; the caller sets exit code
            results[name] = f"fail: {exc}"
            ok = False
    return results, ok
