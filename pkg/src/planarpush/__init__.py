"""Deterministic planar-pushing simulation, planning and benchmarking toolkit."""

from .dynamics import (ActionDelta, LimitSurfaceParams, StepOutcome, check_out_of_bounds,
                       detect_contacts, resolve_push_contact, step_ee)
from .encoding import EncoderSpec, builtin_encoder, encode_window, load_encoder
from .env import (EpisodeConfig, PushEnv, RewardBreakdown, build_observation,
                  compute_reward, curriculum_advance)
from .geometry import Pose2D, ShapeSpec, box, convex_polygon, disk
from .perception import (DepthImage, LocalWindow, OccupancyGrid, egocentric_window,
                         inflate, occupancy_from_depth, render_depth)
from .planning import Path, SubgoalPair, path_length, plan_path, sample_subgoals
from .replay import ReplayBuffer, Transition, cosine_similarity, push_transition, sample_aer
from .world import (BodyState, Bounds, ScenarioSpec, WorldState, make_scenario,
                    sample_start_goal, scenario_suite)

__version__ = "0.1.0"
