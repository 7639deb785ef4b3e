"""
Noise robustness and map-element ablations
==========================================

A compact evaluation: the same scenario batch solved with corrupted
observations (dropout, additive noise, occlusions) and with one map channel
switched off at a time.  Uses reduced frame counts and K so it finishes in
about a minute; the acceptance suite runs the full-scale version.
"""
import numpy as np

import bevloc as bl

FRAMES = 12
city = bl.generate_map(seed=7)
config = bl.SolverConfig(k_rotations=64, backend="fft")


def evaluate(noise=None, channels="both"):
    children = np.random.SeedSequence(99).spawn(FRAMES)
    results = []
    for i in range(FRAMES):
        scenario_seed, corrupt_seed = (int(v) for v in children[i].generate_state(2))
        scenario = bl.sample_scenario(city, scenario_seed, max_offset=32.0)
        obs = bl.render_observation(city, scenario.gt_pose, sd_width=10.0)
        if noise is not None and not noise.is_noop:
            obs = bl.corrupt(obs, noise, corrupt_seed)
        if channels != "both":
            obs = bl.mask_channels(obs, channels)
        estimate = bl.localize_frame(obs, city, scenario.prior, config, sd_width=10.0)
        results.append(bl.make_frame_result(scenario.gt_pose, estimate.pose,
                                            seed=scenario_seed))
    return bl.aggregate(results)


print(f"{'setting':>28} {'R@1m':>6} {'R@2m':>6} {'R@5deg':>7} {'APE_m':>7}")
for label, noise in [
    ("clean", bl.NoiseParams()),
    ("dropout 0.2", bl.NoiseParams(dropout_prob=0.2)),
    ("dropout 0.2 + sigma 0.3", bl.NoiseParams(dropout_prob=0.2, logit_noise_sigma=0.3)),
    ("+ 4 occlusion blocks", bl.NoiseParams(dropout_prob=0.2, logit_noise_sigma=0.3,
                                            occlusion_blocks=4, occlusion_block_size=16)),
]:
    r = evaluate(noise=noise)
    print(f"{label:>28} {r.recall_at_m[1.0]:>6.2f} {r.recall_at_m[2.0]:>6.2f} "
          f"{r.recall_at_deg[5.0]:>7.2f} {r.ape_mean:>7.2f}")

print("\nmap-element ablation (clean observations):")
for channels in ("both", "roads", "buildings"):
    r = evaluate(channels=channels)
    print(f"{channels:>28} {r.recall_at_m[1.0]:>6.2f} {r.recall_at_m[2.0]:>6.2f} "
          f"{r.recall_at_deg[5.0]:>7.2f} {r.ape_mean:>7.2f}")
