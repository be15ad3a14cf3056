"""Exercises the nie extension end to end on small graphs."""

import math
import os
import tempfile

import nie


def check_oracle():
    g = nie.Graph(3, [(0, 1, 1.0), (0, 2, 0.5), (1, 2, 0.5)])
    assert g.node_count == 3 and g.edge_count == 3
    assert abs(nie.exact_blocked(g, [0], [1]) - 1.25) < 1e-12
    mean, se = nie.estimate_blocked(g, [0], [1], replications=20000, seed=7)
    assert abs(mean - 1.25) <= 4 * se + 1e-9, (mean, se)
    assert nie.estimate_blocked(g, [0], [], replications=100, seed=1) == (0.0, 0.0)


def check_pipeline():
    g = nie.Graph.power_law(120, 300, seed=3)
    stats = nie.NodeStats.compute(g)
    assert len(stats.closeness) == g.node_count

    s_f, s_t = nie.sample_problem(g, seed=11)
    x = nie.featurize(g, stats, s_f, s_t)
    assert len(x) == 7 and all(math.isfinite(v) for v in x)

    records = nie.generate(g, stats, 300, label_replications=200, seed=5)
    assert len(records) == 300
    feats = [r[3] for r in records]
    labels = [r[2] for r in records]
    model, train_mse, val_mse = nie.Model.train(feats, labels, g, seed=9, max_epochs=30)
    assert len(train_mse) == len(val_mse) > 0

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.json")
        model.save(path)
        again = nie.Model.load(path, g)
        assert again.predict(x) == model.predict(x)
        other = nie.Graph.power_law(120, 300, seed=4)
        try:
            nie.Model.load(path, other)
        except ValueError:
            pass
        else:
            raise AssertionError("model loaded against the wrong graph")

    k = len(s_f)
    out = nie.solve(g, s_f, k, estimator="nie", model=model, stats=stats)
    assert len(out["s_t"]) <= k and not set(out["s_t"]) & set(s_f)
    lazy = nie.solve(g, s_f, 3, estimator="mcs", replications=200, seed=1)
    plain = nie.solve(g, s_f, 3, estimator="mcs", replications=200, seed=1, lazy=False)
    assert lazy["completed"] and plain["completed"]
    mean, _ = nie.estimate_blocked(g, s_f, out["s_t"], replications=2000, seed=2)
    print(f"nie solution k={k}: blocked {mean:.2f}, {out['evaluations_used']} evaluations")


def check_errors():
    g = nie.Graph(2, [(0, 1, 1.0)])
    for bad in (lambda: nie.exact_blocked(g, [5], []),
                lambda: nie.exact_blocked(g, [0], [0]),
                lambda: nie.Graph(2, [(0, 1, 1.5)]),
                lambda: nie.solve(g, [0], 1, estimator="nie")):
        try:
            bad()
        except ValueError:
            continue
        raise AssertionError("expected ValueError")


if __name__ == "__main__":
    check_oracle()
    check_pipeline()
    check_errors()
    print("smoke test ok")
