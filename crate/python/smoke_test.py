"""Smoke test for the mpsvqc_py extension.

Build and install first:
    pip install --no-build-isolation ./crates/py
"""

import math
import os
import tempfile

import mpsvqc_py as m


def main():
    data = m.Dataset.synthetic(n=800, seed=1)
    assert len(data) == 800 and data.width == 24
    train, test = data.split(seed=1)
    assert len(train) + len(test) == 800

    chain = m.MpsProjector.random(8, 4, 3, center=2, seed=0)
    assert chain.canonical_residual() < 1e-10
    feat = chain.contract([0.1] * 8)
    assert len(feat) == 3 and abs(math.hypot(*feat) - 1.0) < 1e-5
    small, discarded = chain.truncate(2)
    assert small.max_bond <= 2 and discarded >= 0.0

    cfg = m.TrainConfig(mode="activated", epochs=4, batch_size=32, n_qubits=3, eta_max=2e-2)
    assert cfg.to_dict()["n_qubits"] == 3
    try:
        m.TrainConfig(no_such_key=1)
        raise AssertionError("unknown key accepted")
    except ValueError:
        pass

    s1 = m.StageOne.train(train, cfg)
    assert s1.losses[-1] < s1.losses[0]
    s2 = m.StageTwo.train(s1, train, cfg)
    scores = s2.scores(s1, test)
    report = m.metrics(scores, test.labels)
    print(f"stage two: {s2.param_count} params, test ACER {report['acer']:.4f}, AUC {report['auc']:.4f}")
    assert report["acer"] < 0.1

    with tempfile.TemporaryDirectory() as tmp:
        p1, p2 = os.path.join(tmp, "s1.ckpt"), os.path.join(tmp, "s2.ckpt")
        s1.save(p1)
        s2.save(p2)
        r1 = m.StageOne.load(p1)
        r2 = m.StageTwo.load(p2, r1)
        assert r2.scores(r1, test) == scores

    circuit = m.Circuit(3, "brickwall", "heisenberg")
    z = circuit.expectations([0.0, 0.0, 0.0], [0.0] * circuit.param_count)
    assert all(abs(v - 1.0) < 1e-12 for v in z)

    checks = m.verify("vqc", seed=0)
    assert checks and all(c["passed"] for c in checks)
    print(f"{len(checks)} vqc checks passed")
    print("smoke test ok")


if __name__ == "__main__":
    main()
