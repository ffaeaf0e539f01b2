"""Command-line front door for the analysis engine.

Every subcommand is deterministic for fixed arguments and inputs: a seed
drives all randomness, artifacts embed their version/seed/parameter
header, and no output carries a timestamp. Exit codes: 2 usage, 3 input
validation, 4 numeric divergence.
"""
from __future__ import annotations

import contextlib
import json
import sys
from pathlib import Path

import click

from .agglomeration import build_progression, to_dot
from .artifacts import artifact_header, write_json_artifact
from .autoencoder import latent_embed, load_params
from .clustering import ClusterAssignment, kmeans, ward_cluster
from .cohort import Cohort, CohortConfig, parse_cohort
from .errors import DivergenceError, NonFiniteError, TrialflowError, ValidationError
from .explain import cluster_importance, patient_importance, train_mlp
from .patient_graph import graph_from_cohort
from .service import (
    DEFAULT_DELTA,
    DEFAULT_K,
    DEFAULT_KNN_K,
    DEFAULT_SIGMA,
    ServiceConfig,
    serve as run_service,
)
from .stats import incidence_summary, km_estimate, survival_records
from .synth import SynthConfig, write_synthetic_cohort
from .training import (
    TrainConfig,
    save_checkpoint,
    train_autoencoder,
    write_history_csv,
)

EXIT_VALIDATION = 3
EXIT_DIVERGENCE = 4


@contextlib.contextmanager
def _exit_codes():
    try:
        yield
    except ValidationError as e:
        click.echo(f"validation error: {e}", err=True)
        sys.exit(EXIT_VALIDATION)
    except (DivergenceError, NonFiniteError) as e:
        click.echo(f"numeric divergence: {e}", err=True)
        sys.exit(EXIT_DIVERGENCE)
    except TrialflowError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)


def _load_defaults(config_path: str | None) -> dict:
    """Numeric defaults from the optional config file's `defaults` block.

    Precedence: explicit flags beat the config file, which beats built-in
    defaults.
    """
    if not config_path:
        return {}
    try:
        raw = json.loads(Path(config_path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read config: {e}", source=config_path)
    block = raw.get("defaults", {})
    if not isinstance(block, dict):
        raise ValidationError("config `defaults` must be an object",
                              source=config_path)
    return block


def _pick(flag_value, defaults: dict, key: str, fallback):
    if flag_value is not None:
        return flag_value
    if key in defaults:
        return type(fallback)(defaults[key])
    return fallback


def _cohort_config(config_path: str | None) -> CohortConfig:
    return CohortConfig.from_json(config_path) if config_path else CohortConfig()


def _load_cohort(baseline: str, events: str, config_path: str | None) -> Cohort:
    return parse_cohort(baseline, events, _cohort_config(config_path))


@click.group()
def main():
    """Temporal event analytics for randomized-trial cohorts."""


@main.command()
@click.option("--out", "outdir", required=True, type=click.Path(file_okay=False))
@click.option("--n", "n_patients", default=147, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--weights", default=None,
              help="archetype weights, e.g. 'treatment_success:0.4,death_transplant:0.2'")
def synth(outdir: str, n_patients: int, seed: int, weights: str | None):
    """Generate a synthetic cohort (baseline, events, archetype labels)."""
    with _exit_codes():
        kwargs = {}
        if weights:
            parsed = {}
            for part in weights.split(","):
                name, _, value = part.partition(":")
                try:
                    parsed[name.strip()] = float(value)
                except ValueError:
                    raise ValidationError(f"bad weight entry {part!r}")
            kwargs["weights"] = parsed
        config = SynthConfig(n_patients=n_patients, seed=seed, **kwargs)
        paths = write_synthetic_cohort(outdir, config)
        for name, path in sorted(paths.items()):
            click.echo(f"{name}: {path}")


@main.command()
@click.option("--baseline", required=True, type=click.Path(exists=True))
@click.option("--events", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def validate(baseline: str, events: str, config_path: str | None):
    """Parse and validate cohort files; exit 3 with a located message on failure."""
    with _exit_codes():
        cohort = _load_cohort(baseline, events, config_path)
        click.echo(f"patients: {len(cohort)}")
        click.echo(f"events: {len(cohort.raw_events)}")
        click.echo(f"imputed cells: {len(cohort.imputed)}")
        for pid, feature in cohort.imputed[:10]:
            click.echo(f"  imputed {feature} for {pid}")


def _write_assignment_csv(path: Path, assignment: ClusterAssignment,
                          ids: list[str], seed: int, params: dict) -> None:
    lines = [artifact_header("cluster-assignment", seed, params).rstrip("\n")]
    lines.append("patient_id,cluster,cluster_name")
    for i, pid in enumerate(ids):
        c = int(assignment.labels[i])
        lines.append(f"{pid},{c},{assignment.cluster_names[c]}")
    path.write_text("\n".join(lines) + "\n")


def _compute_assignment(cohort: Cohort, method: str, k: int, seed: int,
                        checkpoint: str | None, knn_k: int) -> ClusterAssignment:
    if method == "ward":
        assignment, _ = ward_cluster(cohort.coded_matrix(), k)
        return assignment
    if method == "graph":
        if not checkpoint:
            raise ValidationError("--checkpoint is required for method=graph")
        params, _meta = load_params(checkpoint)
        graph = graph_from_cohort(cohort, knn_k)
        latents = latent_embed(graph, params)
        return kmeans(latents, k, seed)
    raise ValidationError(f"unknown method {method!r} (expected ward or graph)")


@main.command()
@click.option("--baseline", required=True, type=click.Path(exists=True))
@click.option("--events", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--method", type=click.Choice(["ward", "graph"]), default="ward",
              show_default=True)
@click.option("--k", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--knn-k", type=int, default=None)
@click.option("--checkpoint", default=None, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cluster(baseline, events, config_path, method, k, seed, knn_k, checkpoint, out):
    """Cluster patients and write the assignment CSV."""
    with _exit_codes():
        defaults = _load_defaults(config_path)
        k = _pick(k, defaults, "k", DEFAULT_K)
        seed = _pick(seed, defaults, "seed", 7)
        knn_k = _pick(knn_k, defaults, "knn_k", DEFAULT_KNN_K)
        cohort = _load_cohort(baseline, events, config_path)
        assignment = _compute_assignment(cohort, method, k, seed, checkpoint, knn_k)
        _write_assignment_csv(Path(out), assignment, cohort.ids, seed,
                              {"method": method, "k": k})
        click.echo(f"wrote {out}")


@main.command()
@click.option("--baseline", required=True, type=click.Path(exists=True))
@click.option("--events", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--epochs", type=int, default=None)
@click.option("--batch", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--knn-k", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--history", "history_path", default=None, type=click.Path(dir_okay=False))
def train(baseline, events, config_path, epochs, batch, lr, knn_k, seed, out,
          history_path):
    """Train the autoencoder and write a checkpoint (plus optional loss log)."""
    with _exit_codes():
        defaults = _load_defaults(config_path)
        epochs = _pick(epochs, defaults, "epochs", 300)
        batch = _pick(batch, defaults, "batch", 512)
        lr = _pick(lr, defaults, "lr", 1e-5)
        knn_k = _pick(knn_k, defaults, "knn_k", DEFAULT_KNN_K)
        seed = _pick(seed, defaults, "seed", 7)
        cohort = _load_cohort(baseline, events, config_path)
        graph = graph_from_cohort(cohort, knn_k)
        config = TrainConfig(epochs=epochs, batch_size=batch, lr=lr)
        state = train_autoencoder(graph, config, seed)
        save_checkpoint(state, out, knn_k=knn_k, config=config)
        first = state.history[0][1]
        last = state.history[-1][1]
        click.echo(f"train mse: {first:.6g} -> {last:.6g} over {epochs} epochs")
        if history_path:
            write_history_csv(state.history, history_path)
            header = artifact_header("training-history", seed,
                                     {"epochs": epochs, "batch": batch, "lr": lr})
            body = Path(history_path).read_text()
            Path(history_path).write_text(header + body)
        click.echo(f"wrote {out}")


@main.command()
@click.option("--baseline", required=True, type=click.Path(exists=True))
@click.option("--events", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--method", type=click.Choice(["ward", "graph"]), default="ward",
              show_default=True)
@click.option("--k", type=int, default=None)
@click.option("--knn-k", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def explain(baseline, events, config_path, checkpoint, method, k, knn_k, seed, out):
    """Write the cluster-by-feature importance heatmap CSV."""
    with _exit_codes():
        defaults = _load_defaults(config_path)
        k = _pick(k, defaults, "k", DEFAULT_K)
        knn_k = _pick(knn_k, defaults, "knn_k", DEFAULT_KNN_K)
        seed = _pick(seed, defaults, "seed", 7)
        cohort = _load_cohort(baseline, events, config_path)
        assignment = _compute_assignment(cohort, method, k, seed, checkpoint, knn_k)
        params, _meta = load_params(checkpoint)
        graph = graph_from_cohort(cohort, knn_k)
        latents = latent_embed(graph, params)
        mlp = train_mlp(latents, assignment, seed=seed)

        rows = []
        for c in sorted(range(assignment.k),
                        key=lambda c: assignment.cluster_names[c]):
            members = assignment.members(c)
            vectors = [patient_importance(graph, params, mlp, int(i), c,
                                          cohort.ids[i]) for i in members]
            agg = cluster_importance(vectors, graph.n)
            rows.append((assignment.cluster_names[c], agg.scores))
        names = graph.layout.baseline_names
        lines = [artifact_header("importance-heatmap", seed,
                                 {"method": method, "k": k}).rstrip("\n")]
        lines.append("cluster," + ",".join(names))
        for label, scores in rows:
            lines.append(label + "," + ",".join("%.6g" % s for s in scores))
        Path(out).write_text("\n".join(lines) + "\n")
        click.echo(f"wrote {out}")


@main.command()
@click.option("--baseline", required=True, type=click.Path(exists=True))
@click.option("--events", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--delta", type=float, default=None)
@click.option("--sigma", type=float, default=None)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--dot", "dot_path", default=None, type=click.Path(dir_okay=False))
def agglomerate(baseline, events, config_path, delta, sigma, out, dot_path):
    """Condense the cohort's trajectories into a progression graph JSON."""
    with _exit_codes():
        defaults = _load_defaults(config_path)
        delta = _pick(delta, defaults, "delta", DEFAULT_DELTA)
        sigma = _pick(sigma, defaults, "sigma", DEFAULT_SIGMA)
        cohort = _load_cohort(baseline, events, config_path)
        graph = build_progression(cohort.status_array(), delta, sigma)
        payload = {
            "delta": delta,
            "sigma": sigma,
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
        write_json_artifact(out, payload, kind="progression",
                            params={"delta": delta, "sigma": sigma})
        if dot_path:
            Path(dot_path).write_text(to_dot(graph))
        click.echo(f"wrote {out} ({len(graph.blocks)} blocks, "
                   f"{len(graph.transitions)} transitions)")


@main.command()
@click.option("--baseline", required=True, type=click.Path(exists=True))
@click.option("--events", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--groupby", type=click.Choice(["cluster", "arm"]), default="arm",
              show_default=True)
@click.option("--method", type=click.Choice(["ward", "graph"]), default="ward",
              show_default=True)
@click.option("--k", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--knn-k", type=int, default=None)
@click.option("--checkpoint", default=None, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def stats(baseline, events, config_path, groupby, method, k, seed, knn_k,
          checkpoint, out):
    """Export survival curves and incidence summaries per group."""
    with _exit_codes():
        defaults = _load_defaults(config_path)
        k = _pick(k, defaults, "k", DEFAULT_K)
        seed = _pick(seed, defaults, "seed", 7)
        knn_k = _pick(knn_k, defaults, "knn_k", DEFAULT_KNN_K)
        cohort = _load_cohort(baseline, events, config_path)
        records = {r.patient_id: r for r in survival_records(cohort)}
        status_rows = cohort.status_array()

        groups: list[tuple[str, list[int]]] = []
        if groupby == "arm":
            for arm in sorted(set(cohort.arms)):
                groups.append((arm, [i for i, p in enumerate(cohort.patients)
                                     if p.arm == arm]))
        else:
            assignment = _compute_assignment(cohort, method, k, seed,
                                             checkpoint, knn_k)
            for c in sorted(range(assignment.k),
                            key=lambda c: assignment.cluster_names[c]):
                groups.append((assignment.cluster_names[c],
                               [int(i) for i in assignment.members(c)]))

        payload_groups = []
        for label, idx in groups:
            if not idx:
                continue
            group_records = [records[cohort.ids[i]] for i in idx]
            payload_groups.append({
                "label": label,
                "survival": km_estimate(group_records, group=label).as_dict(),
                "incidence": incidence_summary(status_rows[idx], group=label).as_dict(),
            })
        write_json_artifact(out, {"groupby": groupby, "groups": payload_groups},
                            kind="stats", seed=seed,
                            params={"groupby": groupby, "method": method, "k": k})
        click.echo(f"wrote {out}")


@main.command()
@click.option("--baseline", required=True, type=click.Path(exists=True))
@click.option("--events", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--checkpoint", default=None, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--k", type=int, default=None)
@click.option("--delta", type=float, default=None)
@click.option("--sigma", type=float, default=None)
@click.option("--knn-k", type=int, default=None)
@click.option("--seed", type=int, default=None)
def serve(baseline, events, config_path, checkpoint, host, port, k, delta,
          sigma, knn_k, seed):
    """Run the HTTP JSON service until interrupted."""
    with _exit_codes():
        defaults = _load_defaults(config_path)
        service_config = ServiceConfig(
            baseline_path=baseline,
            events_path=events,
            checkpoint_path=checkpoint,
            config_path=config_path,
            default_k=_pick(k, defaults, "k", DEFAULT_K),
            default_delta=_pick(delta, defaults, "delta", DEFAULT_DELTA),
            default_sigma=_pick(sigma, defaults, "sigma", DEFAULT_SIGMA),
            knn_k=_pick(knn_k, defaults, "knn_k", DEFAULT_KNN_K),
            seed=_pick(seed, defaults, "seed", 7),
            host=host,
            port=port,
        )
        run_service(service_config)


@main.command()
@click.option("--out", "outdir", required=True, type=click.Path(file_okay=False))
@click.option("--baseline", default=None, type=click.Path(exists=True),
              help="existing cohort; omitted -> synthesize into OUT")
@click.option("--events", default=None, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--n", "n_patients", default=147, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--k", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--batch", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--knn-k", type=int, default=None)
@click.option("--delta", type=float, default=None)
@click.option("--sigma", type=float, default=None)
@click.pass_context
def pipeline(ctx, outdir, baseline, events, config_path, n_patients, seed, k,
             epochs, batch, lr, knn_k, delta, sigma):
    """Full chain: data -> train -> cluster -> explain -> agglomerate -> stats."""
    with _exit_codes():
        defaults = _load_defaults(config_path)
        seed = _pick(seed, defaults, "seed", 7)
        k = _pick(k, defaults, "k", DEFAULT_K)
        epochs = _pick(epochs, defaults, "epochs", 300)
        batch = _pick(batch, defaults, "batch", 512)
        lr = _pick(lr, defaults, "lr", 1e-5)
        knn_k = _pick(knn_k, defaults, "knn_k", DEFAULT_KNN_K)
        delta = _pick(delta, defaults, "delta", DEFAULT_DELTA)
        sigma = _pick(sigma, defaults, "sigma", DEFAULT_SIGMA)

        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        if baseline is None or events is None:
            paths = write_synthetic_cohort(
                out, SynthConfig(n_patients=n_patients, seed=seed))
            baseline = str(paths["baseline"])
            events = str(paths["events"])
            click.echo(f"synthesized cohort in {out}")

        checkpoint_path = out / "checkpoint.npz"
        history_path = out / "history.csv"
        ctx.invoke(train, baseline=baseline, events=events,
                   config_path=config_path, epochs=epochs, batch=batch, lr=lr,
                   knn_k=knn_k, seed=seed, out=str(checkpoint_path),
                   history_path=str(history_path))
        for method in ("ward", "graph"):
            ctx.invoke(cluster, baseline=baseline, events=events,
                       config_path=config_path, method=method, k=k, seed=seed,
                       knn_k=knn_k, checkpoint=str(checkpoint_path),
                       out=str(out / f"clusters_{method}.csv"))
            ctx.invoke(explain, baseline=baseline, events=events,
                       config_path=config_path, checkpoint=str(checkpoint_path),
                       method=method, k=k, knn_k=knn_k, seed=seed,
                       out=str(out / f"importance_{method}.csv"))
        ctx.invoke(agglomerate, baseline=baseline, events=events,
                   config_path=config_path, delta=delta, sigma=sigma,
                   out=str(out / "progression.json"),
                   dot_path=str(out / "progression.dot"))
        for groupby in ("arm", "cluster"):
            ctx.invoke(stats, baseline=baseline, events=events,
                       config_path=config_path, groupby=groupby, method="ward",
                       k=k, seed=seed, knn_k=knn_k,
                       checkpoint=str(checkpoint_path),
                       out=str(out / f"stats_{groupby}.json"))
        click.echo(f"pipeline artifacts in {out}")


if __name__ == "__main__":
    main()
