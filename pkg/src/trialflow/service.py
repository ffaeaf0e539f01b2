"""HTTP JSON service over one loaded cohort and its analysis artifacts.

The session computes cluster assignments, importance vectors, progression
graphs, and statistics on demand, memoizing each under its parameter key
with single-flight semantics. Responses are rendered through the
canonical JSON writer, so identical GETs return byte-identical bodies.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .agglomeration import ProgressionGraph, build_progression
from .artifacts import canonical_json
from .autoencoder import GTParams, latent_embed, load_params
from .clustering import ClusterAssignment, Method, kmeans, ward_cluster
from .cohort import Cohort, CohortConfig, parse_cohort
from .errors import InvalidK, TrialflowError, UntrainedPipeline, ValidationError
from .explain import MLPModel, cluster_importance, patient_importance, train_mlp
from .patient_graph import PatientGraph, graph_from_cohort
from .statuses import STATUS_ORDER
from .stats import box_summary, incidence_summary, km_estimate, survival_records

DEFAULT_K = 4
DEFAULT_DELTA = 0.5
DEFAULT_SIGMA = 0.1
DEFAULT_KNN_K = 10

_METHODS = {"ward": Method.WARD_KNOWLEDGE, "graph": Method.GRAPH_AI}


class ServiceError(TrialflowError):
    """Maps engine failures onto HTTP status + machine-readable code."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class ServiceConfig:
    baseline_path: str
    events_path: str
    checkpoint_path: str | None = None
    config_path: str | None = None
    default_k: int = DEFAULT_K
    default_delta: float = DEFAULT_DELTA
    default_sigma: float = DEFAULT_SIGMA
    knn_k: int = DEFAULT_KNN_K
    seed: int = 7
    host: str = "127.0.0.1"
    port: int = 8000


class _KeyedCache:
    """Memoizes factory results per key; concurrent misses compute once."""

    def __init__(self):
        self._global = threading.Lock()
        self._locks: dict[Any, threading.Lock] = {}
        self._values: dict[Any, Any] = {}

    def get(self, key: Any, factory: Callable[[], Any]) -> Any:
        with self._global:
            if key in self._values:
                return self._values[key]
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            with self._global:
                if key in self._values:
                    return self._values[key]
            value = factory()
            with self._global:
                self._values[key] = value
            return value


@dataclass
class AnalysisSession:
    """One cohort plus lazily computed, memoized analysis artifacts."""

    cohort: Cohort
    checkpoint: tuple[GTParams, dict] | None = None
    default_k: int = DEFAULT_K
    default_delta: float = DEFAULT_DELTA
    default_sigma: float = DEFAULT_SIGMA
    knn_k: int = DEFAULT_KNN_K
    seed: int = 7
    _cache: _KeyedCache = field(default_factory=_KeyedCache)

    @classmethod
    def from_config(cls, config: ServiceConfig) -> "AnalysisSession":
        cohort_config = (CohortConfig.from_json(config.config_path)
                         if config.config_path else CohortConfig())
        cohort = parse_cohort(config.baseline_path, config.events_path, cohort_config)
        checkpoint = None
        if config.checkpoint_path:
            checkpoint = load_params(config.checkpoint_path)
        return cls(cohort, checkpoint, config.default_k, config.default_delta,
                   config.default_sigma, config.knn_k, config.seed)

    # ---- computed artifacts -------------------------------------------------

    def graph(self) -> PatientGraph:
        return self._cache.get(("graph", self.knn_k),
                               lambda: graph_from_cohort(self.cohort, self.knn_k))

    def latents(self) -> np.ndarray:
        if self.checkpoint is None:
            raise ServiceError(422, "MODEL_NOT_LOADED",
                               "no model checkpoint is loaded; train one first")
        params, _ = self.checkpoint

        def compute():
            return latent_embed(self.graph(), params)

        return self._cache.get("latents", compute)

    def clusters(self, method: str, k: int) -> ClusterAssignment:
        self._check_method(method)
        n = len(self.cohort)
        if not 1 <= k <= n:
            raise ServiceError(422, "INVALID_PARAMETER",
                               f"k must be in [1, {n}], got {k}")

        def compute():
            if method == "ward":
                assignment, _ = ward_cluster(self.cohort.coded_matrix(), k)
                return assignment
            return kmeans(self.latents(), k, self.seed)

        return self._cache.get(("clusters", method, k), compute)

    def mlp(self, method: str, k: int) -> MLPModel:
        assignment = self.clusters(method, k)
        latents = self.latents()
        return self._cache.get(
            ("mlp", method, k),
            lambda: train_mlp(latents, assignment, seed=self.seed))

    def progression(self, method: str, k: int, cluster: int,
                    delta: float, sigma: float) -> ProgressionGraph:
        assignment = self.clusters(method, k)
        members = assignment.members(cluster)
        if members.size == 0:
            raise ServiceError(404, "CLUSTER_NOT_FOUND",
                               f"cluster {cluster} has no members")
        sequences = self.cohort.status_array()[members]
        return self._cache.get(
            ("progression", method, k, cluster, delta, sigma),
            lambda: build_progression(sequences, delta, sigma))

    def _check_method(self, method: str):
        if method not in _METHODS:
            raise ServiceError(422, "INVALID_PARAMETER",
                               f"method must be one of {sorted(_METHODS)}, got {method!r}")

    def resolve_cluster(self, assignment: ClusterAssignment, name: str) -> int:
        try:
            return assignment.index_by_name(name)
        except KeyError:
            raise ServiceError(404, "CLUSTER_NOT_FOUND",
                               f"no cluster named {name!r}; valid names: "
                               f"{list(assignment.cluster_names)}")


# ---- payload builders -------------------------------------------------------


def _patients_payload(session: AnalysisSession) -> dict:
    return {"patients": [{"id": p.patient_id, "arm": p.arm}
                         for p in session.cohort.patients]}


def _segments(statuses) -> list[dict]:
    out = []
    start = 0
    for day in range(1, len(statuses) + 1):
        if day == len(statuses) or statuses[day] is not statuses[start]:
            out.append({"status": statuses[start].value, "start": start,
                        "end": day - 1})
            start = day
    return out


def _patient_payload(session: AnalysisSession, patient_id: str) -> dict:
    cohort = session.cohort
    try:
        patient = cohort[patient_id]
    except KeyError:
        raise ServiceError(404, "PATIENT_NOT_FOUND",
                           f"no patient with id {patient_id!r}")
    baseline = []
    for spec in cohort.config.features:
        value = patient.baseline[spec.name]
        entry: dict[str, Any] = {
            "name": spec.name,
            "kind": spec.kind,
            "value": value,
            "units": spec.units,
            "abnormal": spec.is_abnormal(value),
        }
        entry["reference_range"] = ([spec.ref_lo, spec.ref_hi]
                                    if spec.ref_lo is not None else None)
        baseline.append(entry)
    record = next(r for r in survival_records(cohort)
                  if r.patient_id == patient_id)
    return {
        "id": patient.patient_id,
        "arm": patient.arm,
        "baseline": baseline,
        "timeline": {
            "days": [s.value for s in patient.statuses],
            "segments": _segments(patient.statuses),
        },
        "raw_events": [
            {"kind": r.event.value, "start_day": r.start_day, "end_day": r.end_day}
            for r in cohort.events_of(patient_id)
        ],
        "survival": {"time": record.time, "event": record.event},
    }


def _clusters_payload(session: AnalysisSession, method: str, k: int) -> dict:
    assignment = session.clusters(method, k)
    status_rows = session.cohort.status_array()
    ids = session.cohort.ids
    clusters = []
    for c in range(assignment.k):
        members = assignment.members(c)
        clusters.append({
            "index": c,
            "name": assignment.cluster_names[c],
            "size": int(members.size),
            "patients": [ids[i] for i in members],
            "status_matrix": status_rows[members].tolist(),
        })
    clusters.sort(key=lambda entry: entry["name"])
    return {
        "method": method,
        "k": k,
        "labels": {ids[i]: int(assignment.labels[i]) for i in range(len(ids))},
        "cluster_names": list(assignment.cluster_names),
        "clusters": clusters,
    }


def _importance_payload(session: AnalysisSession, method: str, k: int,
                        name: str) -> dict:
    assignment = session.clusters(method, k)
    cluster = session.resolve_cluster(assignment, name)
    graph = session.graph()
    mlp = session.mlp(method, k)  # raises MODEL_NOT_LOADED without a checkpoint
    params, _ = session.checkpoint  # type: ignore[misc]
    ids = session.cohort.ids
    members = assignment.members(cluster)
    if members.size == 0:
        raise ServiceError(404, "CLUSTER_NOT_FOUND", f"cluster {name} is empty")
    vectors = [patient_importance(graph, params, mlp, int(i), cluster, ids[i])
               for i in members]
    agg = cluster_importance(vectors, graph.n)
    return {
        "method": method, "k": k,
        "cluster": {"index": cluster, "name": name},
        "features": list(agg.feature_names),
        "scores": agg.scores.tolist(),
        "members": [
            {"id": v.patient_id, "scores": v.scores.tolist()} for v in vectors
        ],
    }


def _progression_payload(session: AnalysisSession, method: str, k: int,
                         name: str, delta: float, sigma: float) -> dict:
    if not 0.0 <= delta <= 1.0:
        raise ServiceError(422, "INVALID_PARAMETER",
                           f"delta must be in [0, 1], got {delta}")
    if sigma < 0:
        raise ServiceError(422, "INVALID_PARAMETER",
                           f"sigma must be non-negative, got {sigma}")
    assignment = session.clusters(method, k)
    cluster = session.resolve_cluster(assignment, name)
    graph = session.progression(method, k, cluster, delta, sigma)
    return {
        "method": method, "k": k,
        "cluster": {"index": cluster, "name": name},
        "delta": delta, "sigma": sigma,
        "blocks": [
            {"id": i, "status": b.status_name, "first_day": b.first_day,
             "last_day": b.last_day, "num": b.num}
            for i, b in enumerate(graph.blocks)
        ],
        "transitions": [
            {"source": t.source, "target": t.target, "flow": t.flow,
             "strength": t.strength}
            for t in graph.transitions
        ],
    }


def _group_stats(session: AnalysisSession, member_idx: np.ndarray,
                 label: str) -> dict:
    cohort = session.cohort
    members = [cohort.patients[i] for i in member_idx]
    sub_records = [r for r in survival_records(cohort)
                   if r.patient_id in {p.patient_id for p in members}]
    km = km_estimate(sub_records, group=label)
    boxes = []
    for spec in cohort.config.features:
        if spec.kind != "numeric":
            continue
        values = [float(p.baseline[spec.name]) for p in members]
        boxes.append(box_summary(values, feature=spec.name, group=label).as_dict())
    incidence = incidence_summary(cohort.status_array()[member_idx], group=label)
    return {"survival": km.as_dict(), "boxes": boxes,
            "incidence": incidence.as_dict()}


def _cluster_stats_payload(session: AnalysisSession, method: str, k: int,
                           name: str) -> dict:
    assignment = session.clusters(method, k)
    cluster = session.resolve_cluster(assignment, name)
    members = assignment.members(cluster)
    if members.size == 0:
        raise ServiceError(404, "CLUSTER_NOT_FOUND", f"cluster {name} is empty")
    payload = _group_stats(session, members, name)
    payload.update({"method": method, "k": k,
                    "cluster": {"index": cluster, "name": name}})
    return payload


def _survival_payload(session: AnalysisSession, groupby: str, method: str,
                      k: int) -> dict:
    cohort = session.cohort
    records = {r.patient_id: r for r in survival_records(cohort)}
    curves = []
    if groupby == "arm":
        arms = sorted(set(cohort.arms))
        for arm in arms:
            group = [records[p.patient_id] for p in cohort.patients if p.arm == arm]
            curves.append(km_estimate(group, group=arm).as_dict())
    elif groupby == "cluster":
        assignment = session.clusters(method, k)
        ids = cohort.ids
        for c in sorted(range(assignment.k),
                        key=lambda c: assignment.cluster_names[c]):
            group = [records[ids[i]] for i in assignment.members(c)]
            if group:
                curves.append(
                    km_estimate(group, group=assignment.cluster_names[c]).as_dict())
    else:
        raise ServiceError(422, "INVALID_PARAMETER",
                           f"groupby must be 'cluster' or 'arm', got {groupby!r}")
    return {"groupby": groupby, "curves": curves}


def _meta_payload(session: AnalysisSession) -> dict:
    cohort = session.cohort
    config = cohort.config
    methods = ["ward"] + (["graph"] if session.checkpoint is not None else [])
    return {
        "n_patients": len(cohort),
        "horizon_days": config.horizon_days,
        "arms": sorted(set(cohort.arms)),
        "statuses": [
            {"name": s.value, "rank": s.rank,
             "severity_code": config.coding[s]}
            for s in STATUS_ORDER
        ],
        "features": [
            {"name": spec.name, "kind": spec.kind, "units": spec.units,
             "categories": list(spec.categories) or None,
             "reference_range": ([spec.ref_lo, spec.ref_hi]
                                 if spec.ref_lo is not None else None)}
            for spec in config.features
        ],
        "methods": methods,
        "defaults": {
            "k": session.default_k,
            "delta": session.default_delta,
            "sigma": session.default_sigma,
            "knn_k": session.knn_k,
            "seed": session.seed,
        },
        "imputed": [{"patient_id": pid, "feature": feat}
                    for pid, feat in session.cohort.imputed],
    }


# ---- FastAPI wiring ---------------------------------------------------------


def create_app(session: AnalysisSession):
    from fastapi import FastAPI, Request
    from fastapi.exceptions import RequestValidationError
    from fastapi.responses import Response

    app = FastAPI(title="trialflow service", docs_url=None, redoc_url=None)

    def respond(payload: dict) -> Response:
        return Response(content=canonical_json(payload) + "\n",
                        media_type="application/json")

    def error_response(status: int, code: str, message: str) -> Response:
        body = {"error": {"code": code, "message": message}}
        return Response(content=canonical_json(body) + "\n", status_code=status,
                        media_type="application/json")

    @app.exception_handler(ServiceError)
    async def _service_error(_req: Request, exc: ServiceError):
        return error_response(exc.status, exc.code, exc.message)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError):
        return error_response(422, "INVALID_PARAMETER", str(exc.errors()[:1]))

    @app.exception_handler(TrialflowError)
    async def _engine_error(_req: Request, exc: TrialflowError):
        if isinstance(exc, (InvalidK, ValidationError)):
            return error_response(422, "INVALID_PARAMETER", str(exc))
        if isinstance(exc, UntrainedPipeline):
            return error_response(422, "MODEL_NOT_LOADED", str(exc))
        return error_response(500, "ENGINE_ERROR", str(exc))

    @app.get("/api/patients")
    def patients():
        return respond(_patients_payload(session))

    @app.get("/api/patients/{patient_id}")
    def patient(patient_id: str):
        return respond(_patient_payload(session, patient_id))

    @app.get("/api/clusters")
    def clusters(method: str = "ward", k: int | None = None):
        return respond(_clusters_payload(session, method,
                                         session.default_k if k is None else k))

    @app.get("/api/clusters/{name}/importance")
    def importance(name: str, method: str = "ward", k: int | None = None):
        return respond(_importance_payload(session, method,
                                           session.default_k if k is None else k, name))

    @app.get("/api/clusters/{name}/progression")
    def progression(name: str, method: str = "ward", k: int | None = None,
                    delta: float | None = None, sigma: float | None = None):
        return respond(_progression_payload(
            session, method, session.default_k if k is None else k, name,
            session.default_delta if delta is None else delta,
            session.default_sigma if sigma is None else sigma))

    @app.get("/api/clusters/{name}/stats")
    def cluster_stats(name: str, method: str = "ward", k: int | None = None):
        return respond(_cluster_stats_payload(session, method,
                                              session.default_k if k is None else k, name))

    @app.get("/api/survival")
    def survival(groupby: str = "cluster", method: str = "ward",
                 k: int | None = None):
        return respond(_survival_payload(session, groupby, method,
                                         session.default_k if k is None else k))

    @app.get("/api/meta")
    def meta():
        return respond(_meta_payload(session))

    return app


def serve(config: ServiceConfig) -> None:
    """Blocking entry point: load artifacts, listen until interrupted."""
    import uvicorn

    session = AnalysisSession.from_config(config)
    app = create_app(session)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
