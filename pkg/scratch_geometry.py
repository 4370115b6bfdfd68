"""Probe moon-offset geometry effect on the regime ordering. Not shipped."""
import sys
import numpy as np
import ups_lab as ul
from ups_lab import data as dmod
from ups_lab.pipeline import PipelineConfig, run_ssl
from ups_lab.selection import SelectionConfig
from ups_lab.uncertainty import EstimatorConfig
from ups_lab.model import TemperatureConfig


def make_moons_offset(n, noise_sigma, seed, offset, n_test=None):
    if n_test is None:
        n_test = n // 2
    rng = np.random.default_rng(seed)

    def arcs(count):
        half = count // 2
        t0 = np.linspace(0.0, np.pi, half)
        t1 = np.linspace(0.0, np.pi, count - half)
        upper = np.column_stack([np.cos(t0), np.sin(t0)])
        lower = np.column_stack([1.0 - np.cos(t1), offset - np.sin(t1)])
        pts = np.vstack([upper, lower])
        cls = np.concatenate([np.zeros(half, dtype=int), np.ones(count - half, dtype=int)])
        return pts + rng.normal(0.0, noise_sigma, size=pts.shape), cls

    tx, tc = arcs(n)
    sx, sc = arcs(n_test)
    oh = np.zeros((n, 2), dtype=np.int8); oh[np.arange(n), tc] = 1
    th = np.zeros((n_test, 2), dtype=np.int8); th[np.arange(n_test), sc] = 1
    return dmod.SslDataset(features=tx, labels=oh, labeled_idx=np.arange(n),
                           unlabeled_idx=np.arange(0), test_features=sx,
                           test_labels=th, mode="single_label")


def bench(seed, regime, offset, *, nl=True, balance=10, max_iter=10, epochs=300,
          batch=32, rate=0.15, tau_p=0.8, tau_n=0.3, kp=0.05, kn=0.08, T=2.0):
    ds = make_moons_offset(500, 0.1, seed, offset)
    ds = ul.split_labeled(ds, 10, seed=seed)
    cfg = PipelineConfig(
        hidden_dims=(32, 32), dropout_rate=rate,
        max_iterations=max_iter, epochs_per_iteration=epochs, batch_size=batch,
        convergence_delta=0.0,
        selection=SelectionConfig(tau_p=tau_p, tau_n=tau_n, kappa_p=kp, kappa_n=kn,
                                  regime=regime, balance_iters=balance),
        estimator=EstimatorConfig(),
        temperature=TemperatureConfig(T=T),
        master_seed=seed, use_negative_learning=nl,
    )
    return run_ssl(ds, cfg)


if __name__ == "__main__":
    offset = float(sys.argv[1]) if len(sys.argv) > 1 else 0.35
    seeds = [1, 2, 3]
    for label, kw in [("sup", dict(regime="vanilla", max_iter=1)),
                      ("van", dict(regime="vanilla")),
                      ("conf", dict(regime="confidence")),
                      ("ups", dict(regime="ups"))]:
        errs, accs1, pos1, posF = [], [], [], []
        for seed in seeds:
            res = bench(seed, offset=offset, **kw)
            errs.append(1 - res.records[-1].test_metric)
            if len(res.records) > 1:
                accs1.append(res.records[1].sel_accuracy)
                pos1.append(res.records[1].pos_selected)
                posF.append(res.records[-1].pos_selected)
        extra = f" acc1={np.mean(accs1):.3f} pos1={pos1} posF={posF}" if accs1 else ""
        print(f"offset={offset} {label:5s} mean={np.mean(errs):.4f} "
              f"errs={[round(e, 3) for e in errs]}{extra}", flush=True)
