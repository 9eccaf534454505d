import numpy as np

ALIVE_BONUS = {
    'loco2d': 1.0,
    'gap': 0.1,
}

CONTROL_WEIGHT = {
    'swimmer': 0.0001,
    'reward3d-test': 0.0001,
}

TIMESTEP = {
    'loco2d': 0.008,
    'gap': 0.008,
    'swimmer': 0.04,
    'reward3d-test': 0.04,
}


def reward_formula(env_kind, dx, dt, actions, num_joints, alive_bonus=None, control_weight=None):
    """Per-step reward: forward speed |dx|/dt, plus an alive bonus or minus a control penalty.

    The penalty is w * (1/J) * sum_u ||a_u||^2 over the applied motor actions. `alive_bonus` and
    `control_weight` default to the values of `env_kind`.
    """
    if env_kind not in TIMESTEP:
        raise KeyError("No reward defined for environment {}".format(env_kind))
    if num_joints < 1:
        raise ValueError("num_joints must be at least 1")

    if alive_bonus is None:
        alive_bonus = ALIVE_BONUS.get(env_kind, 0.0)
    if control_weight is None:
        control_weight = CONTROL_WEIGHT.get(env_kind, 0.0)

    reward = abs(dx) / dt + alive_bonus
    if control_weight:
        actions = np.asarray(actions, dtype=np.float64)
        reward -= control_weight * float(np.sum(actions ** 2)) / num_joints
    return reward
