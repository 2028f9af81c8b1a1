"""Template ordering and per-frame role assignment.

A Formation is an unordered bag of Gaussian roles.  Alignment gives it a
fixed order by matching its components one-to-one against a parent template
(minimum total Bhattacharyya distance), after which every frame's agents can
be assigned to role slots by solving a small linear assignment problem per
frame.  The aligned output is an S x (2K) matrix whose column blocks are
role slots, the representation all downstream clustering works on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .assignment import Assignment, hungarian
from .geometry import (Gaussian2D, bhattacharyya_distance,
                       mahalanobis_between_means)
from .ingest import Dataset, flatten
from . import discovery as _disc


@dataclass(frozen=True)
class Template:
    """An ordered vector of Gaussian roles; position in the tuple is the
    role index."""

    roles: tuple

    def __post_init__(self):
        roles = tuple(self.roles)
        if not roles:
            raise ValueError("Template needs at least one role")
        object.__setattr__(self, "roles", roles)

    @property
    def k(self):
        return len(self.roles)

    @property
    def weights(self) -> np.ndarray:
        return np.array([r.weight for r in self.roles])

    @property
    def means(self) -> np.ndarray:
        return np.stack([r.mean for r in self.roles])

    @classmethod
    def from_formation(cls, f: "_disc.Formation") -> "Template":
        """Adopt the formation's incidental component order as the role order."""
        return cls(roles=tuple(f.components))

    def to_dict(self):
        return {"roles": [r.to_dict() for r in self.roles]}

    @classmethod
    def from_dict(cls, d):
        return cls(roles=tuple(Gaussian2D.from_dict(r) for r in d["roles"]))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _alignment_cost(f, g, metric):
    k = f.k
    cost = np.empty((k, k))
    for i, comp in enumerate(f.components):
        for j, role in enumerate(g.roles):
            if metric == "bhattacharyya":
                cost[i, j] = bhattacharyya_distance(comp, role)
            else:
                cost[i, j] = mahalanobis_between_means(comp, role)
    return cost


def _align_with_mapping(f, g, metric="bhattacharyya"):
    if f.k != g.k:
        raise ValueError(f"formation has {f.k} components, template {g.k}")
    if metric not in ("bhattacharyya", "mahalanobis"):
        raise ValueError(f"unknown metric {metric!r}")
    mapping = hungarian(_alignment_cost(f, g, metric)).mapping
    roles = [None] * f.k
    for i, j in enumerate(mapping):
        roles[j] = f.components[i]
    return Template(roles=tuple(roles)), mapping


def align_template(f: "_disc.Formation", g: Template,
                   metric: str = "bhattacharyya") -> Template:
    """Order f's components so role j is the component matched to g's
    role j, minimizing the total pairwise distance.

    metric "bhattacharyya" (default) uses the full distributional distance;
    "mahalanobis" matches on means scaled by the parent's covariances.
    """
    aligned, _ = _align_with_mapping(f, g, metric)
    return aligned


@dataclass(frozen=True)
class AlignedDataset:
    """Role-ordered positions: row s holds frame s's agents rearranged into
    role slots (x then y per role).

    ``permutations[s].mapping[i]`` is the role slot of agent i in frame s.
    When a frame has fewer agents than roles the unfilled slots are NaN.
    """

    matrix: np.ndarray
    permutations: tuple
    frame_ids: tuple
    meta: tuple   # per-frame (team, game, period)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "permutations", tuple(self.permutations))
        object.__setattr__(self, "frame_ids", tuple(self.frame_ids))
        object.__setattr__(self, "meta", tuple(self.meta))

    @property
    def n_frames(self):
        return self.matrix.shape[0]

    @property
    def k(self):
        return self.matrix.shape[1] // 2

    def role_positions(self, s: int) -> np.ndarray:
        """Frame s as a (K, 2) array in role order."""
        return self.matrix[s].reshape(-1, 2)

    def to_csv(self, path):
        own = not hasattr(path, "write")
        fh = open(path, "w") if own else path
        try:
            cols = ",".join(f"role_{j}_x,role_{j}_y" for j in range(self.k))
            fh.write(f"frame_id,{cols}\n")
            for fid, row in zip(self.frame_ids, self.matrix):
                fh.write(str(fid) + "," +
                         ",".join(repr(float(v)) for v in row) + "\n")
        finally:
            if own:
                fh.close()

    def to_jsonl(self, path):
        own = not hasattr(path, "write")
        fh = open(path, "w") if own else path
        try:
            for fid, row, perm in zip(self.frame_ids, self.matrix,
                                      self.permutations):
                obj = {"frame_id": fid,
                       "permutation": [int(j) for j in perm.mapping],
                       "positions": [[float(x), float(y)]
                                     for x, y in row.reshape(-1, 2)]}
                fh.write(json.dumps(obj) + "\n")
        finally:
            if own:
                fh.close()


def assign_roles(ds: Dataset, t: Template, include_weights: bool = True,
                 cache: np.ndarray | None = None) -> AlignedDataset:
    """Assign each frame's agents to role slots by minimum total negative
    log-likelihood.

    The per-frame cost of putting agent i in role j is -(log pdf of the
    agent's position under role j + log role weight); with
    include_weights=False the weight term is dropped.  ``cache`` may supply
    precomputed per-point component log densities, shaped (S*N, K) in
    flatten order, as produced during discovery on the same data.
    """
    n = ds.n_agents
    k = t.k
    if n > k:
        raise ValueError(f"{n} agents cannot fill {k} roles injectively")
    if cache is not None:
        dens = np.asarray(cache, dtype=float)
        if dens.shape != (ds.n_frames * n, k):
            raise ValueError("cache shape does not match dataset/template")
    else:
        helper = _disc.Formation(
            components=tuple(Gaussian2D(mean=r.mean, cov=r.cov, weight=1.0 / k)
                             for r in t.roles))
        dens = _disc._component_log_pdfs(helper, flatten(ds))
    cost_all = -dens
    if include_weights:
        cost_all = cost_all - np.log(t.weights)
    cost_all = cost_all.reshape(ds.n_frames, n, k)

    rows = np.full((ds.n_frames, 2 * k), np.nan)
    perms = []
    fids = []
    meta = []
    for s, frame in enumerate(ds.frames):
        a = hungarian(cost_all[s])
        for i, j in enumerate(a.mapping):
            rows[s, 2 * j:2 * j + 2] = frame.positions[i]
        perms.append(a)
        fids.append(frame.frame_id)
        meta.append((frame.team, frame.game, frame.period))
    return AlignedDataset(matrix=rows, permutations=tuple(perms),
                          frame_ids=tuple(fids), meta=tuple(meta))


def average_log_likelihood(ds: Dataset, f: "_disc.Formation") -> float:
    """Mean over all points of the log mixture density under f."""
    _, loglik = _disc._e_step(f, flatten(ds))
    return loglik


@dataclass(frozen=True)
class PipelineResult:
    formation: "_disc.Formation"
    template: Template
    trace: "_disc.EmTrace"
    aligned: AlignedDataset
    avg_loglik: float
    dataset: Dataset       # normalized, centered, unfiltered
    training: Dataset      # what discovery actually saw


def run_pipeline(ds: Dataset, cfg: "_disc.DiscoveryConfig" = None,
                 parent: Template | None = None,
                 key_frames_only: bool = False,
                 include_weights: bool = True) -> PipelineResult:
    """Normalize, discover, align, assign: the full end-to-end chain.

    Order is fixed: attack-direction normalization, per-frame centering,
    optional key-frame filtering for the discovery stage only.  Role
    assignment always covers the full (unfiltered) dataset.  When discovery
    ran on the full dataset its cached log densities are reused for
    assignment; a filtered training set forces recomputation.
    """
    from .ingest import center_normalize, filter_key_frames, \
        normalize_attack_direction

    if cfg is None:
        cfg = _disc.DiscoveryConfig(k=ds.n_agents)
    full = center_normalize(normalize_attack_direction(ds))
    training = filter_key_frames(full) if key_frames_only else full
    formation, trace = _disc.discover_formation(training, cfg)
    if parent is not None:
        template, mapping = _align_with_mapping(formation, parent)
        cache = None
        if not key_frames_only and trace.cache is not None:
            # reorder cached density columns into template role order
            cache = np.empty_like(trace.cache)
            for i, j in enumerate(mapping):
                cache[:, j] = trace.cache[:, i]
    else:
        template = Template.from_formation(formation)
        cache = None if key_frames_only else trace.cache
    aligned = assign_roles(full, template, include_weights=include_weights,
                           cache=cache)
    return PipelineResult(formation=formation, template=template, trace=trace,
                          aligned=aligned,
                          avg_loglik=average_log_likelihood(full, formation),
                          dataset=full, training=training)
