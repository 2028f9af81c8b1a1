"""The prior hard-assignment EM method, kept as an honest comparison target.

Where the soft pipeline lets every point contribute fractionally to every
role, this baseline commits each agent to exactly one role per frame (a
Hungarian solve per frame) and refits each role's Gaussian from its assigned
points only.  The exclusive commitment is what makes it slow (one exact
assignment per frame per iteration) and what breaks the usual EM guarantee:
its likelihood sequence may oscillate, which the trace records rather than
hides.

The original method used nonparametric role heat maps; roles here are
Gaussians so the two pipelines differ only in the assignment rule, which is
the comparison the likelihood and speed claims need.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .alignment import AlignedDataset, Template
from .assignment import Assignment, hungarian
from .discovery import Formation, _component_log_pdfs, _e_step
from .geometry import Gaussian2D, differential_entropy
from .ingest import Dataset, flatten


@dataclass
class HardEmTrace:
    """Per-iteration totals; no monotonicity is promised, that is the point."""

    rows: list = field(default_factory=list)
    converged: bool = False
    oscillated: bool = False

    def append(self, iteration, total_cost, avg_loglik, changed_frames):
        self.rows.append((int(iteration), float(total_cost),
                          float(avg_loglik), int(changed_frames)))

    @property
    def logliks(self):
        return [r[2] for r in self.rows]

    def to_csv(self, path):
        own = not hasattr(path, "write")
        fh = open(path, "w") if own else path
        try:
            fh.write("iteration,total_cost,avg_loglik,changed_frames\n")
            for it, cost, ll, ch in self.rows:
                fh.write(f"{it},{cost!r},{ll!r},{ch}\n")
        finally:
            if own:
                fh.close()


def player_identity_template(ds: Dataset) -> Template:
    """One Gaussian per agent, fit to that agent's positions across the
    whole dataset: the "each player keeps one role all game" initializer.

    Agents are matched by id (sorted order), frames in frame_id order, same
    canonicalization as the player-mean initializer.
    """
    frames = sorted(ds.frames, key=lambda f: f.frame_id)
    ids = sorted(frames[0].agent_ids)
    n = len(ids)
    tracks = {a: [] for a in ids}
    for f in frames:
        index = {a: i for i, a in enumerate(f.agent_ids)}
        for a in ids:
            if a not in index:
                raise ValueError(f"agent {a!r} missing from frame {f.frame_id}")
            tracks[a].append(f.positions[index[a]])
    roles = []
    for a in ids:
        pts = np.stack(tracks[a])
        cov = np.cov(pts.T, bias=True) if len(pts) > 1 else np.eye(2)
        roles.append(Gaussian2D(mean=pts.mean(axis=0), cov=np.atleast_2d(cov),
                                weight=1.0 / n))
    return Template(roles=tuple(roles))


def _as_formation(roles, weights):
    total = float(np.sum(weights))
    comps = tuple(Gaussian2D(mean=r.mean, cov=r.cov, weight=float(w) / total)
                  for r, w in zip(roles, weights))
    return Formation(components=comps)


def hard_assignment_em(ds: Dataset, init: Template, max_iters: int = 500
                       ) -> tuple[Formation, AlignedDataset, HardEmTrace]:
    """Alternate exclusive per-frame assignment and per-role refits.

    Stops when no frame's assignment changes, when an assignment state
    repeats (oscillation, flagged on the trace), or after max_iters passes.
    max_iters=0 still performs the one mandatory assign-and-refit pass.  A
    role assigned zero points keeps its previous Gaussian.  Costs are plain
    negative log densities; the baseline has no mixture weight term.
    """
    s, n = ds.n_frames, ds.n_agents
    k = init.k
    if n > k:
        raise ValueError(f"{n} agents cannot fill {k} roles")
    pts = flatten(ds)
    roles = list(init.roles)
    weights = np.full(k, 1.0 / k)

    trace = HardEmTrace()
    prev_maps = None
    seen_states = set()
    passes = max(1, max_iters)
    mappings = None
    for it in range(1, passes + 1):
        dens = _component_log_pdfs(_as_formation(roles, weights), pts)
        cost_all = (-dens).reshape(s, n, k)
        mappings = np.empty((s, n), dtype=int)
        total_cost = 0.0
        for f in range(s):
            a = hungarian(cost_all[f])
            mappings[f] = a.mapping
            total_cost += a.total_cost
        changed = s if prev_maps is None else int(
            (mappings != prev_maps).any(axis=1).sum())

        flat_roles = mappings.reshape(-1)
        new_roles = []
        counts = np.zeros(k)
        for j in range(k):
            member = pts[flat_roles == j]
            counts[j] = len(member)
            if len(member) == 0:
                new_roles.append(roles[j])   # re-seed from previous state
            else:
                cov = np.cov(member.T, bias=True) if len(member) > 1 \
                    else np.eye(2)
                new_roles.append(Gaussian2D(mean=member.mean(axis=0),
                                            cov=np.atleast_2d(cov),
                                            weight=1.0 / k))
        roles = new_roles
        weights = np.where(counts > 0, counts, 1.0)
        weights = weights / weights.sum()

        _, avg_ll = _e_step(_as_formation(roles, weights), pts)
        trace.append(it, total_cost, avg_ll, changed)

        if changed == 0:
            trace.converged = True
            break
        key = mappings.tobytes()
        if key in seen_states:
            trace.oscillated = True
            break
        seen_states.add(key)
        prev_maps = mappings

    formation = _as_formation(roles, weights)
    rows = np.full((s, 2 * k), np.nan)
    perms = []
    for f, frame in enumerate(ds.frames):
        cost = cost_all[f]
        total = float(sum(cost[i, j] for i, j in enumerate(mappings[f])))
        for i, j in enumerate(mappings[f]):
            rows[f, 2 * j:2 * j + 2] = frame.positions[i]
        perms.append(Assignment(mapping=mappings[f], total_cost=total))
    aligned = AlignedDataset(
        matrix=rows, permutations=tuple(perms),
        frame_ids=tuple(fr.frame_id for fr in ds.frames),
        meta=tuple((fr.team, fr.game, fr.period) for fr in ds.frames))
    return formation, aligned, trace


@dataclass(frozen=True)
class OverlapPenalty:
    value: float
    std_error: float
    n_samples: int


def overlap_penalty(f: Formation, n_samples: int = 100_000,
                    seed: int = 0) -> OverlapPenalty:
    """V = -H(x) + (1/K) sum_n H(x|n), the negative mutual information
    between a point and the identity of the role that generated it.

    Treats the formation as an equal-weight mixture (the diagnostic's
    definition averages components uniformly).  The conditional entropies
    are closed form; the mixture entropy H(x) is Monte-Carlo estimated from
    at least 1e5 samples and the estimate's standard error is reported.
    V is 0 when the mixture collapses to a single component and approaches
    -ln K as the components pull apart.
    """
    if n_samples < 100_000:
        raise ValueError("need at least 1e5 samples for a stable estimate")
    k = f.k
    if k == 1:
        # conditional and mixture entropies coincide; no estimation needed
        return OverlapPenalty(value=0.0, std_error=0.0, n_samples=n_samples)
    rng = np.random.Generator(np.random.Philox(seed))
    means = f.means
    chols = np.stack([np.linalg.cholesky(c.cov) for c in f.components])
    idx = rng.integers(0, k, size=n_samples)
    z = rng.standard_normal((n_samples, 2))
    x = means[idx] + np.einsum("nij,nj->ni", chols[idx], z)

    uniform = _as_formation(f.components, np.ones(k))
    dens = _component_log_pdfs(uniform, x)
    m = dens.max(axis=1, keepdims=True)
    log_mix = (np.log(np.exp(dens - m).sum(axis=1)) + m[:, 0]) - np.log(k)
    h_mix = -float(log_mix.mean())
    se = float(log_mix.std(ddof=1) / np.sqrt(n_samples))
    h_cond = float(np.mean([differential_entropy(c) for c in f.components]))
    return OverlapPenalty(value=h_cond - h_mix, std_error=se,
                          n_samples=n_samples)
