import numpy as np
import pytest

from declab import core, eventlog


def make_spec(uc_id="uc", actions=("reject", "accept"),
              metrics=("conversion",), kind=core.DecisionKind.BINARY,
              columns=(("age", "numeric"), ("plan", "categorical")),
              join_window=3600.0, **kwargs):
    return core.UseCaseSpec(
        id=uc_id,
        decision_space=core.DecisionSpace(actions=tuple(actions), kind=kind),
        metrics=tuple(core.ProductMetricSpec(name=m) for m in metrics),
        features=core.FeatureSchema(
            columns=tuple(core.FeatureColumn(name=n, type=t)
                          for n, t in columns)),
        join_window=join_window,
        **kwargs)


@pytest.fixture
def spec():
    return make_spec()


@pytest.fixture
def log(spec):
    lg = eventlog.EventLog()
    lg.register(core.validate_spec(spec))
    return lg


def fill_log(lg, uc_id="uc", n=600, seed=0, join=True):
    """Log n prediction/observation pairs; returns the decision ids."""
    rng = np.random.RandomState(seed)
    ids = []
    for i in range(n):
        fv = core.FeatureVector(values={"age": float(rng.normal(40, 10)),
                                        "plan": ["free", "pro"][i % 2]})
        did = f"d{i:05d}"
        lg.log_prediction(eventlog.PredictionEvent(
            decision_id=did, use_case=uc_id, unit_id=f"u{i:05d}",
            timestamp=1000.0 + i, features=fv,
            action=("accept" if rng.random_sample() < 0.5 else "reject"),
            propensity=0.5, policy_version="v1"))
        if join:
            lg.log_observation(uc_id, eventlog.ObservationEvent(
                decision_id=did, timestamp=1000.0 + i + 60.0,
                metric_values={"conversion": float(rng.random_sample() < 0.3)}))
        ids.append(did)
    return ids
