"""Per-iteration probe of one pipeline run. Not shipped."""
import sys
import numpy as np
import ups_lab as ul
from ups_lab.pipeline import PipelineConfig, run_ssl, _assemble_single, _fit, evaluate
from ups_lab.selection import SelectionConfig
from ups_lab.uncertainty import EstimatorConfig
from ups_lab.model import TemperatureConfig


def probe(seed=1, regime="ups", rate=0.15, tau_p=0.8, tau_n=0.3, kp=0.05, kn=0.08,
          T=2.0, epochs=400, batch=32, iters=12, balance=10, nl=True,
          estimator="mc_dropout", jitter=0.0, delta=0.0):
    ds = ul.make_two_moons(500, 0.1, seed=seed)
    ds = ul.split_labeled(ds, 10, seed=seed)
    cfg = PipelineConfig(
        hidden_dims=(32, 32), dropout_rate=rate,
        max_iterations=iters, epochs_per_iteration=epochs, batch_size=batch,
        convergence_delta=delta,
        selection=SelectionConfig(tau_p=tau_p, tau_n=tau_n, kappa_p=kp, kappa_n=kn,
                                  regime=regime, balance_iters=balance),
        estimator=EstimatorConfig(estimator=estimator, jitter_sigma=jitter),
        temperature=TemperatureConfig(T=T),
        master_seed=seed, use_negative_learning=nl,
    )
    res = run_ssl(ds, cfg)
    print(f"--- {regime} seed={seed} rate={rate} tau_p={tau_p} kp={kp} kn={kn} "
          f"T={T} epochs={epochs} balance={balance}")
    for r, rep in zip(res.records, res.selection_reports):
        extra = ""
        if rep is not None:
            pa = None if rep.pos_accuracy is None else round(rep.pos_accuracy, 3)
            extra = (f" pos={r.pos_selected}({pa}) neg={r.neg_selected} "
                     f"negonly={rep.samples_neg_only}")
        print(f"  it={r.iteration:2d} err={1 - r.test_metric:.3f}{extra}")
    return res


if __name__ == "__main__":
    kw = {}
    for arg in sys.argv[1:]:
        k, v = arg.split("=")
        try:
            kw[k] = int(v)
        except ValueError:
            try:
                kw[k] = float(v)
            except ValueError:
                kw[k] = v
    probe(**kw)
