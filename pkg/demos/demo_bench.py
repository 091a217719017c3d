"""Small benchmark run: suite metrics, SPL, significance testing, exports."""

import pathlib

from planarpush.bench import aggregate_metrics, export_results, paired_t_test, run_suite

out_dir = pathlib.Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)

print("== free-space suite, baseline vs greedy (25 episodes each) ==")
baseline = run_suite("free_space", "baseline", episodes=25, seed=900, max_steps=500)
greedy = run_suite("free_space", "greedy", episodes=25, seed=900, max_steps=500)

for name, records in (("baseline", baseline), ("greedy", greedy)):
    t = aggregate_metrics(records)
    print(f"  {name:9s} success={t.success_rate:.3f} contact={t.contact_rate_mean:.3f}"
          f"+-{t.contact_rate_sd:.3f} spl={t.spl:.3f} "
          f"path={t.path_length_mean:.3f}+-{t.path_length_sd:.3f} m")

solved_both = [a.success and b.success for a, b in zip(baseline, greedy)]
a_vals = [r.contact_rate for r, keep in zip(baseline, solved_both) if keep]
b_vals = [r.contact_rate for r, keep in zip(greedy, solved_both) if keep]
if len(a_vals) >= 2:
    res = paired_t_test(a_vals, b_vals, alpha=0.05)
    verdict = "degenerate" if res.degenerate else (
        "significant" if res.significant else "not significant")
    print(f"\n  contact-rate paired t-test on {len(a_vals)} jointly solved episodes: "
          f"t={res.t:.3f} p={res.p_value:.4g} -> {verdict}")

paths = export_results(baseline, aggregate_metrics(baseline), out_dir / "baseline_run")
print(f"\n  exports: {', '.join(paths)}  (under {out_dir}/baseline_run)")
print("  replay them with: planarpush replay --trace "
      f"{paths['traces']}")
