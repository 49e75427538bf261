"""Teacher-forced negative log-likelihood training for the priors."""

from __future__ import annotations

import numpy as np

from ..ndgrad import NumericalError
from ..nn import Adam
from .model import PriorModel

UPPER_LEVELS = {1: (), 2: (1,), 3: (1, 2)}
# tokens of this level per token of each upper level
RATIO_TO_UPPER = {2: {1: 4}, 3: {1: 16, 2: 4}}


def crop_window(tokens_by_level: dict[int, np.ndarray], level: int, context: int,
                rng: np.random.Generator):
    """Pick an aligned training window of at most ``context`` tokens."""
    seq = tokens_by_level[level]
    L = len(seq)
    uppers = UPPER_LEVELS[level]
    align = max([RATIO_TO_UPPER[level][u] for u in uppers], default=1)
    if L <= context:
        start, span = 0, L
    else:
        span = (context // align) * align
        max_start = (L - span) // align
        start = int(rng.integers(0, max_start + 1)) * align
    window = seq[start : start + span]
    upper = [
        tokens_by_level[u][start // RATIO_TO_UPPER[level][u] :
                           (start + span) // RATIO_TO_UPPER[level][u]]
        for u in uppers
    ]
    return window, upper


def train_prior(prior: PriorModel, dataset: list[dict], steps: int,
                batch_size: int = 4, lr: float = 1e-3, seed: int = 0,
                log_every: int = 10) -> list[dict]:
    """Train one prior on a list of {"tokens": {level: array}, "cond": vec|None}.

    Clips are equal length, so windows stack into a batch. Deterministic
    given (dataset, seed).
    """
    level = prior.cfg.level
    opt = Adam(prior.parameters(), lr=lr)
    rng = np.random.default_rng(np.random.PCG64(seed))
    history = []
    for step in range(steps):
        idx = rng.choice(len(dataset), size=min(batch_size, len(dataset)), replace=False)
        windows, uppers, conds = [], None, []
        for i in idx:
            w, u = crop_window(dataset[i]["tokens"], level, prior.cfg.context_length, rng)
            windows.append(w)
            if uppers is None:
                uppers = [[] for _ in u]
            for j, uw in enumerate(u):
                uppers[j].append(uw)
            conds.append(dataset[i].get("cond"))
        tokens = np.stack(windows)
        upper = [np.stack(u) for u in uppers] if uppers else None
        cond = None
        if conds[0] is not None:
            cond = np.stack([np.asarray(c, dtype=np.float64) for c in conds])
        opt.zero_grad()
        loss = prior.nll(tokens, cond, upper)
        val = float(loss.value)
        if not np.isfinite(val):
            raise NumericalError(
                f"prior level {level} training aborted at step {step}: nll is non-finite"
            )
        loss.backward()
        opt.step()
        if step % log_every == 0 or step == steps - 1:
            history.append({"step": step, "nll": val})
    return history
