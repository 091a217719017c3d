"""One annotated environment episode: observation layout and reward anatomy."""

import numpy as np

from planarpush.baseline import BaselineController
from planarpush.env import (CONTACT_INDEX, EE_POSE_SLICE, GOAL_DISTANCE_INDEX,
                            LATENT_SLICE, SG_LAGGED_SLICE, SG_NOW_SLICE, EpisodeConfig,
                            PushEnv)
from planarpush.world import scenario_suite

env = PushEnv()
cfg = EpisodeConfig(scenario=scenario_suite("env_c")[0], seed=12, max_steps=500)
obs = env.reset(cfg)

print("== observation layout (49 values) ==")
print(f"  latent[32]      : first 8 = {np.round(obs[LATENT_SLICE][:8], 3)}")
print(f"  ee_pose_rel[5]  : {np.round(obs[EE_POSE_SLICE], 4)}")
print(f"  joints[6]       : zero-filled by default")
print(f"  sg_now[2]       : {np.round(obs[SG_NOW_SLICE], 4)}")
print(f"  sg_lagged[2]    : {np.round(obs[SG_LAGGED_SLICE], 4)}")
print(f"  contact[1]      : {obs[CONTACT_INDEX]}")
print(f"  goal_distance[1]: {obs[GOAL_DISTANCE_INDEX]:.4f} (normalized, 1.0 at reset)")

print("\n== closed-loop episode with the baseline controller ==")
ctrl = BaselineController()
ctrl.reset(env, obs)
done = False
totals = []
while not done:
    obs, reward, done, info = env.step(ctrl.act(env, obs))
    totals.append(reward.r_total)
    if env.steps % 25 == 0 or done:
        print(f"  step {env.steps:3d}: r_dist={reward.r_dist:+7.3f} "
              f"r_coll={reward.r_collision:+5.1f} r_touch={reward.r_touch:+5.3f} "
              f"total={reward.r_total:+7.3f} contact={info['contact']} "
              f"path={info['path_len']:.3f}")
print(f"\n  finished in {env.steps} steps, goal_reached={info['goal_reached']}, "
      f"return={sum(totals):.2f}")
