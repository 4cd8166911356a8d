"""Patchmatch flow engine: propagation, inverse propagation, local search.

One iteration offers every pixel a small set of flow candidates, scores each
candidate by feature correlation, and keeps the per-pixel winner
(winner-take-all with first-index tie breaking). Candidates come from two
stages per iteration: a propagation stage (neighbors' flows, via seed
offsets) and a search stage (local window around the current flow, or the
traditional exponentially shrinking random search).

Propagation scores seed dp by shifting the flow and warping the target:

    score(x) = F1(x) . F2(x + flow(x - dp))

Inverse propagation precomputes seed-shifted copies of the target features
once, so each iteration needs a single warp of the stacked targets instead
of one flow shift plus one warp per seed. Under the shift convention of
:mod:`patchflow.tensor_core`, the channel for seed dp is built from the
stack shifted by -dp; applying a final shift by +dp reproduces the
propagation score exactly (mode "exact"). Omitting the final shift
(mode "approximate") produces the same score map offset by one pixel:
approximate(x) equals exact(x + dp). The approximate path pre-shifts the
source features alongside the targets, so its per-iteration cost is one
warp of the stacks and the dot products, nothing else.

Random number generation uses numpy's PCG64 (``np.random.default_rng``);
the algorithm identifier is recorded in run manifests.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.ndimage import median_filter

from .tensor_core import (
    DimensionError,
    FlowField,
    ParameterError,
    SeedSet,
    as_feature_map,
    correlate,
    shift,
    warp_bilinear,
)

RNG_ALGORITHM = "numpy-PCG64"

MODE_PROPAGATE = "propagate"
MODE_INVERSE_EXACT = "inverse-exact"
MODE_INVERSE_APPROX = "inverse-approx"
PROPAGATION_MODES = (MODE_PROPAGATE, MODE_INVERSE_EXACT, MODE_INVERSE_APPROX)

SEARCH_FLOW2D = "flow2d"
SEARCH_STEREO1D = "stereo1d"


@dataclass
class OpCounters:
    """Instrumented counts of the heavy tensor operations.

    ``flow_shifts``/``feature_warps`` are the per-seed costs of forward
    propagation; ``target_shifts`` (one-time) and ``stack_warps``/
    ``stack_warp_calls`` are the inverse-path equivalents. Candidate-flow
    bookkeeping for the winner-take-all update uses index gathers and is
    not counted; the counters measure the scoring pipeline.
    """

    flow_shifts: int = 0          # per-seed flow shifts (propagate mode)
    feature_warps: int = 0        # per-seed warps of F2 (propagate mode)
    current_flow_warps: int = 0   # warps of F2 by the current flow (candidate 0)
    target_shifts: int = 0        # one-time seed shifts of F2 (inverse init)
    source_shifts: int = 0        # one-time seed shifts of F1 (approximate mode)
    stack_warps: int = 0          # per-stack warps (inverse mode), n per iteration
    stack_warp_calls: int = 0     # fused warp calls (inverse mode), 1 per iteration
    post_warp_shifts: int = 0     # per-seed shifts of warped stacks (exact mode)
    search_samples: int = 0       # candidate gathers performed by local search
    random_search_warps: int = 0  # warps performed by random search

    def as_dict(self) -> dict:
        return asdict(self)

    def add(self, other: "OpCounters") -> None:
        for k, v in other.as_dict().items():
            setattr(self, k, getattr(self, k) + v)


@dataclass
class EngineConfig:
    """Everything the engine needs to run one scale or a full pyramid."""

    seeds: SeedSet = field(default_factory=SeedSet)
    radius: int = 2
    iterations: int = 6
    mode: str = MODE_INVERSE_APPROX
    search: str = SEARCH_FLOW2D
    median_filter: bool = False
    random_search: bool = False
    rs_initial_radius: float = 8.0
    rs_decay: float = 0.5
    rs_steps: int = 4
    d_max: float = 8.0
    rng_seed: int = 0
    normalize: bool = True
    schedule: tuple[int, ...] = (4, 1)

    def __post_init__(self):
        if self.radius < 1:
            raise ParameterError("radius must be >= 1")
        if self.iterations < 1:
            raise ParameterError("iterations must be >= 1")
        if self.mode not in PROPAGATION_MODES:
            raise ParameterError(f"unknown mode: {self.mode!r}")
        if self.search not in (SEARCH_FLOW2D, SEARCH_STEREO1D):
            raise ParameterError(f"unknown search mode: {self.search!r}")
        if self.d_max <= 0:
            raise ParameterError("d_max must be > 0")


@dataclass
class CandidateStack:
    """Scores and generating flows for K flow candidates per pixel."""

    scores: np.ndarray  # (H, W, K) float64
    flows: np.ndarray   # (H, W, K, 2) float32, [..., 0] = u, [..., 1] = v

    @property
    def k(self) -> int:
        return self.scores.shape[2]

    @property
    def height(self) -> int:
        return self.scores.shape[0]

    @property
    def width(self) -> int:
        return self.scores.shape[1]


@dataclass
class StackedTargets:
    """Seed-shifted target features, built once and reused every iteration.

    ``stacks[i] = shift(F2, offsets[i])``. When the source features are
    supplied at build time, ``source_stacks[i] = shift(F1, -offsets[i])``
    is cached as well, which is what the approximate inverse mode
    correlates against.
    """

    seed_set: SeedSet
    stacks: list
    source_stacks: list | None = None
    target: np.ndarray | None = None  # the unshifted F2, for candidate 0


@dataclass
class PmState:
    """Current flow plus the per-pixel score of that flow."""

    flow: FlowField
    best_score: np.ndarray  # (H, W) float64
    iteration: int = 0


@dataclass
class TraceEntry:
    """Snapshot of the flow and its per-pixel score after a half-round."""

    flow: FlowField
    best_score: np.ndarray  # (H, W) float64


def random_init(h: int, w: int, d_max: float, rng_seed: int) -> FlowField:
    """Uniform i.i.d. flow in [-d_max, d_max]^2, deterministic per seed."""
    if d_max <= 0:
        raise ParameterError("d_max must be > 0")
    rng = np.random.default_rng(rng_seed)
    u = rng.uniform(-d_max, d_max, size=(h, w)).astype(np.float32)
    v = rng.uniform(-d_max, d_max, size=(h, w)).astype(np.float32)
    return FlowField(u, v)


def _shift_flow_uv(flow: FlowField, dp: tuple[int, int]) -> np.ndarray:
    """Gather the neighbor flow values S(flow, dp) as an (H, W, 2) array
    without going through the counted shift primitive."""
    dx, dy = dp
    h, w = flow.shape
    ys = np.clip(np.arange(h) - dy, 0, h - 1)
    xs = np.clip(np.arange(w) - dx, 0, w - 1)
    uv = np.stack([flow.u, flow.v], axis=-1)
    return uv[ys][:, xs]


def _score_current(f1, f2, flow, normalize, counters) -> np.ndarray:
    warped = warp_bilinear(f2, flow)
    if counters is not None:
        counters.current_flow_warps += 1
    return correlate(f1, warped, normalize=normalize)


def propagate(f1, f2, flow: FlowField, seeds: SeedSet,
              normalize: bool = True, counters: OpCounters | None = None) -> CandidateStack:
    """Forward propagation: candidate 0 is the current flow, candidate i+1
    the flow shifted by seeds[i], each scored against the warped target."""
    f1 = as_feature_map(f1)
    f2 = as_feature_map(f2)
    if f1.shape != f2.shape:
        raise DimensionError(f"shape mismatch: {f1.shape} vs {f2.shape}")
    if flow.shape != f1.shape[:2]:
        raise DimensionError("flow/feature shape mismatch")
    h, w = flow.shape
    n = len(seeds)
    scores = np.empty((h, w, n + 1), dtype=np.float64)
    flows = np.empty((h, w, n + 1, 2), dtype=np.float32)
    scores[:, :, 0] = _score_current(f1, f2, flow, normalize, counters)
    flows[:, :, 0, 0] = flow.u
    flows[:, :, 0, 1] = flow.v
    for i, dp in enumerate(seeds.offsets):
        shifted = shift(flow, dp)
        if counters is not None:
            counters.flow_shifts += 1
        warped = warp_bilinear(f2, shifted)
        if counters is not None:
            counters.feature_warps += 1
        scores[:, :, i + 1] = correlate(f1, warped, normalize=normalize)
        flows[:, :, i + 1, 0] = shifted.u
        flows[:, :, i + 1, 1] = shifted.v
    return CandidateStack(scores=scores, flows=flows)


def inverse_prop_init(f2, seeds: SeedSet, f1=None,
                      counters: OpCounters | None = None) -> StackedTargets:
    """Build the reusable seed-shifted target stacks (and, when the source
    features are supplied, the matching pre-shifted source stacks)."""
    f2 = as_feature_map(f2)
    stacks = []
    for dp in seeds.offsets:
        stacks.append(shift(f2, dp))
        if counters is not None:
            counters.target_shifts += 1
    source_stacks = None
    if f1 is not None:
        f1 = as_feature_map(f1)
        source_stacks = []
        for dx, dy in seeds.offsets:
            source_stacks.append(shift(f1, (-dx, -dy)))
            if counters is not None:
                counters.source_shifts += 1
    return StackedTargets(seed_set=seeds, stacks=stacks,
                          source_stacks=source_stacks, target=f2)


def inverse_propagate(f1, st: StackedTargets, flow: FlowField, mode: str = MODE_INVERSE_EXACT,
                      normalize: bool = True, counters: OpCounters | None = None) -> CandidateStack:
    """Inverse propagation over prebuilt stacks, one shared warp per call.

    Candidate ordering and flow attribution match :func:`propagate`:
    candidate i+1 carries the flow of the seeds[i] neighbor. Exact mode
    reproduces propagation scores bit-for-bit away from borders; the
    approximate mode's score maps are the exact maps read one seed offset
    away (approximate(x) = exact(x + dp)).
    """
    if mode not in (MODE_INVERSE_EXACT, MODE_INVERSE_APPROX):
        raise ParameterError(f"unknown inverse mode: {mode!r}")
    f1 = as_feature_map(f1)
    seeds = st.seed_set
    neg = seeds.negated_index()  # raises if the seed set is not symmetric
    h, w, c = f1.shape
    if st.stacks[0].shape != f1.shape:
        raise DimensionError("stacked targets do not match source feature shape")
    if flow.shape != (h, w):
        raise DimensionError("flow/feature shape mismatch")
    n = len(seeds)

    # One fused warp of all stacks: the flow is shared, so interpolation
    # weights are computed once for the whole (H, W, n*C) block.
    fused = np.concatenate(st.stacks, axis=2)
    warped_all = warp_bilinear(fused, flow)
    if counters is not None:
        counters.stack_warp_calls += 1
        counters.stack_warps += n

    scores = np.empty((h, w, n + 1), dtype=np.float64)
    flows = np.empty((h, w, n + 1, 2), dtype=np.float32)

    # Candidate 0: re-score the current flow against the unshifted target.
    scores[:, :, 0] = _score_current(f1, st.target, flow, normalize, counters)
    flows[:, :, 0, 0] = flow.u
    flows[:, :, 0, 1] = flow.v

    for i, dp in enumerate(seeds.offsets):
        j = neg[i]  # stack shifted by -dp
        warped = warped_all[:, :, j * c:(j + 1) * c]
        if mode == MODE_INVERSE_EXACT:
            aligned = shift(warped, dp)
            if counters is not None:
                counters.post_warp_shifts += 1
            scores[:, :, i + 1] = correlate(f1, aligned, normalize=normalize)
        else:
            if st.source_stacks is not None:
                src = st.source_stacks[i]
            else:
                src = shift(f1, (-dp[0], -dp[1]))
                if counters is not None:
                    counters.source_shifts += 1
            scores[:, :, i + 1] = correlate(src, warped, normalize=normalize)
        flows[:, :, i + 1] = _shift_flow_uv(flow, dp)
    return CandidateStack(scores=scores, flows=flows)


def local_search(f1, f2, flow: FlowField, radius: int, mode: str = SEARCH_FLOW2D,
                 normalize: bool = True, counters: OpCounters | None = None) -> CandidateStack:
    """Score every increment df around the current flow.

    Candidate flow + df is scored per pixel as F1(x) . F2(x + flow(x) + df);
    because the increments are integers, all candidates share the bilinear
    weights of the base position, so each one costs a corner gather and a
    dot product. flow2d enumerates df in [-radius, radius]^2 (dy outer,
    dx inner), stereo1d restricts df to the x axis.

    (Scoring every candidate at its own pixel, rather than reading a shifted
    copy of the once-warped target, keeps score and adopted flow consistent;
    a shifted-map read attributes the neighbor's flow sample to the
    candidate, which poisons winner-take-all updates on non-smooth fields.)
    """
    if radius < 1:
        raise ParameterError("radius must be >= 1")
    f1 = as_feature_map(f1)
    f2 = as_feature_map(f2)
    if f1.shape != f2.shape:
        raise DimensionError(f"shape mismatch: {f1.shape} vs {f2.shape}")
    if mode == SEARCH_FLOW2D:
        offsets = [(dx, dy)
                   for dy in range(-radius, radius + 1)
                   for dx in range(-radius, radius + 1)]
    elif mode == SEARCH_STEREO1D:
        offsets = [(dx, 0) for dx in range(-radius, radius + 1)]
    else:
        raise ParameterError(f"unknown search mode: {mode!r}")
    h, w = flow.shape
    if flow.shape != f1.shape[:2]:
        raise DimensionError("flow/feature shape mismatch")
    gx = np.arange(w, dtype=np.float32)[None, :] + flow.u
    gy = np.arange(h, dtype=np.float32)[:, None] + flow.v
    k = len(offsets)
    c = f1.shape[2]
    scores = np.empty((h, w, k), dtype=np.float64)
    flows = np.empty((h, w, k, 2), dtype=np.float32)
    from .tensor_core import l2_normalize, sample_bilinear
    # The reference map is fixed across candidates, so normalize it once;
    # each sampled candidate is normalized after interpolation, matching the
    # scoring used by the propagation stages.  Candidates are scored in
    # batches with a float64-accumulating einsum, chunked to bound the
    # sample buffer at a few tens of MB.
    ref = l2_normalize(f1) if normalize else f1
    chunk = max(1, int(32e6 / max(h * w * c * 4, 1)))
    for start in range(0, k, chunk):
        batch = offsets[start:start + chunk]
        sampled = np.empty((len(batch), h, w, c), dtype=np.float32)
        for j, (dx, dy) in enumerate(batch):
            sampled[j] = sample_bilinear(f2, gx + np.float32(dx), gy + np.float32(dy))
            if counters is not None:
                counters.search_samples += 1
            i = start + j
            flows[:, :, i, 0] = flow.u + np.float32(dx)
            flows[:, :, i, 1] = flow.v + np.float32(dy)
        if normalize:
            # Normalize exactly as correlate() does (float32-rounded unit
            # vectors) so search scores are bit-comparable with the scores
            # of the propagation stages; clamp-boundary ties then stay ties.
            for j in range(len(batch)):
                sampled[j] = l2_normalize(sampled[j])
        dots = np.einsum("kijc,ijc->kij", sampled, ref, dtype=np.float64)
        scores[:, :, start:start + len(batch)] = np.moveaxis(dots, 0, -1)
    return CandidateStack(scores=scores, flows=flows)


def argmax_update(state: PmState, cands: CandidateStack) -> PmState:
    """Winner-take-all: adopt the best candidate per pixel when it strictly
    beats the current score; ties go to the lowest candidate index."""
    if cands.scores.shape[:2] != state.flow.shape:
        raise DimensionError("candidate stack / state shape mismatch")
    best_idx = np.argmax(cands.scores, axis=2)
    h, w = state.flow.shape
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    best_sc = cands.scores[yy, xx, best_idx]
    take = best_sc > state.best_score
    new_flow = state.flow.copy()
    win = cands.flows[yy, xx, best_idx]
    new_flow.u[take] = win[:, :, 0][take]
    new_flow.v[take] = win[:, :, 1][take]
    new_score = np.where(take, best_sc, state.best_score)
    return PmState(flow=new_flow, best_score=new_score, iteration=state.iteration)


def random_search(f1, f2, state: PmState, initial_radius: float, decay: float,
                  steps: int, rng_seed: int, normalize: bool = True,
                  counters: OpCounters | None = None) -> PmState:
    """Traditional Patchmatch search: per pixel, draw one candidate uniformly
    in a square window around the current best flow, shrinking the window
    radius by ``decay`` each step, and accept only strict improvements."""
    if initial_radius < 1:
        raise ParameterError("initial_radius must be >= 1")
    if not (0.0 < decay < 1.0):
        raise ParameterError("decay must lie in (0, 1)")
    if steps < 1:
        raise ParameterError("steps must be >= 1")
    f1 = as_feature_map(f1)
    f2 = as_feature_map(f2)
    rng = np.random.default_rng(rng_seed)
    h, w = state.flow.shape
    cur = state
    for k in range(steps):
        radius = initial_radius * decay ** k
        du = rng.uniform(-radius, radius, size=(h, w)).astype(np.float32)
        dv = rng.uniform(-radius, radius, size=(h, w)).astype(np.float32)
        cand = FlowField(cur.flow.u + du, cur.flow.v + dv, cur.flow.valid.copy())
        warped = warp_bilinear(f2, cand)
        if counters is not None:
            counters.random_search_warps += 1
        sc = correlate(f1, warped, normalize=normalize)
        take = sc > cur.best_score
        new_flow = cur.flow.copy()
        new_flow.u[take] = cand.u[take]
        new_flow.v[take] = cand.v[take]
        cur = PmState(flow=new_flow,
                      best_score=np.where(take, sc, cur.best_score),
                      iteration=cur.iteration)
    return cur


def pm_iterate(f1, f2, init: FlowField, cfg: EngineConfig,
               counters: OpCounters | None = None) -> tuple[FlowField, list["TraceEntry"]]:
    """Run cfg.iterations rounds of (propagation -> update -> search ->
    update) from ``init``; returns the final flow and the trace of
    (flow, best_score) snapshots after each half-round (two per iteration)."""
    f1 = as_feature_map(f1)
    f2 = as_feature_map(f2)
    if f1.shape != f2.shape:
        raise DimensionError(f"shape mismatch: {f1.shape} vs {f2.shape}")
    if init.shape != f1.shape[:2]:
        raise DimensionError("init flow / feature shape mismatch")
    best = _score_current(f1, f2, init, cfg.normalize, counters)
    state = PmState(flow=init.copy(), best_score=best, iteration=0)
    st = None
    if cfg.mode in (MODE_INVERSE_EXACT, MODE_INVERSE_APPROX):
        st = inverse_prop_init(f2, cfg.seeds,
                               f1=f1 if cfg.mode == MODE_INVERSE_APPROX else None,
                               counters=counters)
    trace: list[TraceEntry] = []
    for it in range(cfg.iterations):
        state.iteration = it
        if cfg.mode == MODE_PROPAGATE:
            cands = propagate(f1, f2, state.flow, cfg.seeds,
                              normalize=cfg.normalize, counters=counters)
        else:
            cands = inverse_propagate(f1, st, state.flow, mode=cfg.mode,
                                      normalize=cfg.normalize, counters=counters)
        state = argmax_update(state, cands)
        trace.append(TraceEntry(flow=state.flow.copy(),
                                best_score=state.best_score.copy()))
        if cfg.random_search:
            state = random_search(f1, f2, state, cfg.rs_initial_radius,
                                  cfg.rs_decay, cfg.rs_steps,
                                  rng_seed=cfg.rng_seed + 7919 * (it + 1),
                                  normalize=cfg.normalize, counters=counters)
        else:
            cands = local_search(f1, f2, state.flow, cfg.radius, mode=cfg.search,
                                 normalize=cfg.normalize, counters=counters)
            state = argmax_update(state, cands)
        if cfg.median_filter:
            state.flow.u = median_filter(state.flow.u, size=3)
            state.flow.v = median_filter(state.flow.v, size=3)
            state.best_score = _score_current(f1, f2, state.flow,
                                              cfg.normalize, counters)
        trace.append(TraceEntry(flow=state.flow.copy(),
                                best_score=state.best_score.copy()))
    return state.flow, trace
