"""Recover the heading dynamics of the robot from a step response.

Records the orientation response to a constant actuator input, adds
measurement noise, and fits the two plant constants back.  Then shows
how the closed loop settles with the identified values.

    python demos/plant_identification.py [--noise 0.05]
"""
import argparse

import numpy as np

from missionsynth.robot_sim import ActuatorCmd, PlantParams, Simulator, identify_plant, step_response

ap = argparse.ArgumentParser()
ap.add_argument("--noise", type=float, default=0.01, help="noise std as a fraction of peak")
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

true = PlantParams()
V = 1.0
resp = step_response(true, V, 3.0)
noisy = resp.copy()
rng = np.random.default_rng(args.seed)
noisy[:, 1] += rng.normal(0, args.noise * np.abs(resp[:, 1]).max(), len(resp))

K, D = identify_plant(noisy, V)
print(f"true      K={true.K:.4f}  D={true.D:.4f}")
print(f"estimate  K={K:.4f}  D={D:.4f}  (noise {args.noise:.0%})")

fitted = true.with_overrides({"K": K, "D": D})
print(f"damping ratio with the estimate: {fitted.damping_ratio:.3f}")

sim = Simulator(fitted)
print("\nclosed-loop turn to 1 rad:")
for k in range(1, int(3.0 / fitted.dt) + 1):
    s = sim.tick(ActuatorCmd(theta_ref=1.0))
    if k % int(0.5 / fitted.dt) == 0:
        print(f"  t={sim.t:4.1f} s  theta={s.theta:.4f}")
