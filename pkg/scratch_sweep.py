"""Scratch harness for tuning the acceptance benchmark config. Not shipped."""
import sys
import time
import numpy as np
import ups_lab as ul
from ups_lab.pipeline import PipelineConfig, run_ssl
from ups_lab.selection import SelectionConfig
from ups_lab.uncertainty import EstimatorConfig


def bench(seed, regime, *, nl=True, balance=10, max_iter=10, epochs=200, batch=32,
          rate=0.3, tau_p=0.7, tau_n=0.3, kappa_p=0.1, kappa_n=0.12,
          estimator="mc_dropout", jitter=0.0, T=2.0, hidden=(32, 32)):
    from ups_lab.model import TemperatureConfig
    ds = ul.make_two_moons(500, 0.1, seed=seed)
    ds = ul.split_labeled(ds, 10, seed=seed)
    cfg = PipelineConfig(
        hidden_dims=hidden, dropout_rate=rate,
        max_iterations=max_iter, epochs_per_iteration=epochs, batch_size=batch,
        convergence_delta=0.0,
        selection=SelectionConfig(tau_p=tau_p, tau_n=tau_n, kappa_p=kappa_p,
                                  kappa_n=kappa_n, regime=regime, balance_iters=balance),
        estimator=EstimatorConfig(estimator=estimator, jitter_sigma=jitter),
        temperature=TemperatureConfig(T=T),
        master_seed=seed, use_negative_learning=nl,
    )
    return run_ssl(ds, cfg)


def run_matrix(name, seeds, **kw):
    t0 = time.perf_counter()
    out = {}
    for label, extra in [("sup", dict(regime="vanilla", max_iter=1)),
                         ("van", dict(regime="vanilla")),
                         ("conf", dict(regime="confidence")),
                         ("ups", dict(regime="ups")),
                         ("ups_nonl", dict(regime="ups", nl=False))]:
        errs, acc1, pos1, posF, negonly = [], [], [], [], []
        for seed in seeds:
            res = bench(seed, **{**kw, **extra})
            errs.append(1 - res.records[-1].test_metric)
            if len(res.records) > 1:
                acc1.append(res.records[1].sel_accuracy)
                pos1.append(res.records[1].pos_selected)
                posF.append(res.records[-1].pos_selected)
                negonly.append(res.selection_reports[1].samples_neg_only)
        out[label] = errs
        msg = f"  {label:9s} mean={np.mean(errs):.4f} errs={[round(e, 3) for e in errs]}"
        if acc1:
            msg += f" acc1={np.mean(acc1):.3f} pos1={pos1} posF={posF} negonly1={negonly}"
        print(msg, flush=True)
    sup, van, conf, ups = (np.mean(out[k]) for k in ("sup", "van", "conf", "ups"))
    nonl = np.mean(out["ups_nonl"])
    ok_chain = sup >= van >= conf >= ups
    ok_margin = (van - ups) >= 0.02
    ok_nl = (ups - nonl) <= 0.005
    print(f"{name}: chain={ok_chain} margin={van - ups:+.4f} (need>=+0.02) "
          f"nl_gap={nonl - ups:+.4f} elapsed={time.perf_counter() - t0:.0f}s")
    return out


if __name__ == "__main__":
    which = sys.argv[1] if len(sys.argv) > 1 else "A"
    seeds = [1, 2, 3]
    if which == "A":
        run_matrix("A rate.3 k.1/.12", seeds)
    elif which == "B":
        run_matrix("B rate.1 tau.8", seeds, rate=0.1, tau_p=0.8, kappa_p=0.05, kappa_n=0.08)
    elif which == "C":
        run_matrix("C jitter.15", seeds, estimator="input_jitter", jitter=0.15,
                   kappa_p=0.05, kappa_n=0.08)
    elif which == "D":
        run_matrix("D rate.3 k.08/.1 iters14", seeds, kappa_p=0.08, kappa_n=0.1,
                   max_iter=14, epochs=150)
