"""Command-line client for the gateway plus local simulation commands.

Every HTTP endpoint has a mirror subcommand; ``sim`` and ``scenario`` run
locally with no server. The target server comes from ``--url`` or the
``DECLAB_URL`` environment variable.
"""
from __future__ import annotations

import json
import os
import sys

import click
import httpx
import numpy as np

from . import rl, simlab, tuning

DEFAULT_URL = "http://127.0.0.1:8000"


def _client(ctx) -> httpx.Client:
    return httpx.Client(base_url=ctx.obj["url"], timeout=600.0)


def _emit(resp: httpx.Response) -> None:
    try:
        click.echo(json.dumps(resp.json(), indent=2, default=str))
    except ValueError:
        click.echo(resp.text)
    if resp.status_code >= 400:
        sys.exit(1)


@click.group()
@click.option("--url", default=None, help="Gateway base URL.")
@click.pass_context
def main(ctx, url):
    ctx.ensure_object(dict)
    ctx.obj["url"] = url or os.environ.get("DECLAB_URL", DEFAULT_URL)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
@click.option("--data-dir", default=None,
              help="Event-log directory (defaults to PLATFORM_DATA_DIR).")
def serve(host, port, data_dir):
    """Run the HTTP gateway."""
    import uvicorn

    from .gateway import create_app
    uvicorn.run(create_app(data_dir=data_dir), host=host, port=port)


@main.command()
@click.argument("spec_file", type=click.File("r"))
@click.pass_context
def onboard(ctx, spec_file):
    """POST /v1/usecases with a JSON spec document."""
    with _client(ctx) as c:
        _emit(c.post("/v1/usecases", json=json.load(spec_file)))


@main.command()
@click.argument("use_case")
@click.pass_context
def describe(ctx, use_case):
    """GET /v1/usecases/{id}."""
    with _client(ctx) as c:
        _emit(c.get(f"/v1/usecases/{use_case}"))


@main.command()
@click.argument("use_case")
@click.option("--unit-id", required=True)
@click.option("--features", default="{}", help="JSON feature map.")
@click.option("--seed", default=0, type=int)
@click.pass_context
def decide(ctx, use_case, unit_id, features, seed):
    """POST /v1/usecases/{id}/decide."""
    with _client(ctx) as c:
        _emit(c.post(f"/v1/usecases/{use_case}/decide", json={
            "unit_id": unit_id, "features": json.loads(features),
            "seed": seed}))


@main.command()
@click.argument("use_case")
@click.option("--decision-id", required=True)
@click.option("--metrics", required=True, help="JSON metric-value map.")
@click.pass_context
def observe(ctx, use_case, decision_id, metrics):
    """POST /v1/usecases/{id}/observe."""
    with _client(ctx) as c:
        _emit(c.post(f"/v1/usecases/{use_case}/observe", json={
            "decision_id": decision_id,
            "metric_values": json.loads(metrics)}))


@main.group()
def jobs():
    """Submit and inspect jobs."""


@jobs.command("submit")
@click.argument("use_case")
@click.option("--kind", required=True,
              type=click.Choice(["train", "tune_reward", "tune_policy"]))
@click.option("--params", default="{}", help="JSON job parameters.")
@click.option("--wait", is_flag=True, help="Run synchronously.")
@click.pass_context
def jobs_submit(ctx, use_case, kind, params, wait):
    with _client(ctx) as c:
        _emit(c.post(f"/v1/usecases/{use_case}/jobs", json={
            "kind": kind, "params": json.loads(params),
            "synchronous": wait}))


@jobs.command("get")
@click.argument("job_id")
@click.pass_context
def jobs_get(ctx, job_id):
    with _client(ctx) as c:
        _emit(c.get(f"/v1/jobs/{job_id}"))


@main.command()
@click.argument("use_case")
@click.pass_context
def candidates(ctx, use_case):
    """GET /v1/usecases/{id}/candidates."""
    with _client(ctx) as c:
        _emit(c.get(f"/v1/usecases/{use_case}/candidates"))


@main.command()
@click.argument("use_case")
@click.option("--candidate-id", required=True)
@click.option("--override", is_flag=True)
@click.option("--reason", default="")
@click.pass_context
def deploy(ctx, use_case, candidate_id, override, reason):
    """POST /v1/usecases/{id}/deploy."""
    with _client(ctx) as c:
        _emit(c.post(f"/v1/usecases/{use_case}/deploy", json={
            "candidate_id": candidate_id, "override": override,
            "reason": reason}))


@main.command()
@click.argument("use_case")
@click.pass_context
def health(ctx, use_case):
    """GET /v1/usecases/{id}/health."""
    with _client(ctx) as c:
        _emit(c.get(f"/v1/usecases/{use_case}/health"))


# --- local simulation ------------------------------------------------------

@main.group()
def sim():
    """Run synthetic environments locally."""


@sim.command("list")
def sim_list():
    for name, env in sorted(simlab.catalog().items()):
        click.echo(f"{name}: {env.kind}, actions={list(env.actions)}, "
                   f"metrics={list(env.metrics)}")


@sim.command("run")
@click.option("--env", "env_name", required=True)
@click.option("--seed", default=0, type=int)
@click.option("--n", default=1000, type=int)
def sim_run(env_name, seed, n):
    """Simulate one cohort under a uniform-random agent and print stats."""
    presets = simlab.catalog()
    if env_name not in presets:
        raise click.ClickException(
            f"unknown env {env_name!r}; try: {', '.join(sorted(presets))}")
    env = presets[env_name]
    k = len(env.actions)

    def agent(x, rng):
        return env.actions[rng.randint(k)], 1.0 / k

    rows = simlab.simulate_cohort(env, agent, n, seed=seed)
    summary = {"env": env_name, "seed": seed, "rows": len(rows)}
    for metric in env.metrics:
        vals = np.array([r.metrics[metric] for r in rows])
        summary[metric] = {"mean": round(float(vals.mean()), 6),
                           "std": round(float(vals.std()), 6)}
    actions = {}
    for r in rows:
        actions[r.action] = actions.get(r.action, 0) + 1
    summary["actions"] = actions
    click.echo(json.dumps(summary, indent=2))


@main.command()
@click.argument("name", type=click.Choice(["reward-tuning", "policy-sweep"]))
@click.option("--seed", default=0, type=int)
def scenario(name, seed):
    """Run a named end-to-end scenario locally and print its findings."""
    if name == "reward-tuning":
        _scenario_reward_tuning(seed)
    else:
        _scenario_policy_sweep(seed)


def _scenario_reward_tuning(seed: int) -> None:
    env = simlab.catalog()["chain-mdp-2metric"]
    k = len(env.actions)

    def behavior(s, rng):
        return env.actions[rng.randint(k)], 1.0 / k

    rows = simlab.simulate_cohort(env, behavior, 400, seed=seed)
    transitions = _rows_to_transitions(rows)
    front = tuning.tune_reward(transitions, env.metrics, budget=12, seed=seed)
    click.echo(f"trials: {len(front.all_trials)}, "
               f"nondominated: {len(front.candidates)}, "
               f"hypervolume: {front.hypervolume:.4f}")
    for cand in front.candidates:
        est = {m: round(v, 4) for m, v in cand.evaluation.estimates.items()}
        weights = {m: round(w, 3) for m, w in cand.reward_weights.items()}
        click.echo(f"  weights={weights} -> {est}")


def _scenario_policy_sweep(seed: int) -> None:
    env = simlab.catalog()["bandit-imbalanced"]
    rng = np.random.RandomState(seed)
    for theta in np.linspace(0.0, 1.0, 6):
        def agent(x, rng_, th=theta):
            send = 0.15 * x[0] + 0.2 >= th
            return ("send", 1.0) if send else ("keep", 1.0)
        rows = simlab.simulate_cohort(env, agent, 4000,
                                      seed=int(rng.randint(1 << 30)))
        mean = float(np.mean([r.metrics["success"] for r in rows]))
        click.echo(f"theta={theta:.2f}: success={mean:.4f}")


def _rows_to_transitions(rows):
    from .eventlog import JoinedExample
    from .core import FeatureVector
    examples = [JoinedExample(
        decision_id=f"d{i}", unit_id=r.unit_id, timestamp=r.timestamp,
        features=FeatureVector(values=dict(r.features)), action=r.action,
        propensity=r.propensity, policy_version="sim",
        metric_values=dict(r.metrics), joined_at=r.timestamp, late=False)
        for i, r in enumerate(rows)]
    examples.sort(key=lambda e: (e.unit_id, e.timestamp))
    return rl.build_transitions(examples,
                                state_fn=lambda ex: ex.features.get("state"))


if __name__ == "__main__":
    main()
