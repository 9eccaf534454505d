"""
Planar articulated-body dynamics in reduced coordinates.

Generalized coordinates are q = (x, z, phi_0, theta_1, ..., theta_{J-1}): the root link's proximal
end point, the root link's orientation offset, and one hinge angle per non-root joint (joints in
breadth-first order, the order every per-joint array uses). Each joint owns one capsule link that
starts at its parent's distal end point.

Each control step runs `substeps` semi-implicit Euler substeps. Damping-like terms (joint damping,
contact damping, regularized friction, viscous drag) and stiffness-like terms (contact springs,
joint-limit springs) are treated implicitly:

    (M + h D + h^2 K) qd' = M qd + h Q,    q' = q + h qd'
"""
import logging
import math

import numpy as np

logger = logging.getLogger(__name__)

ARMATURE = 0.1
JOINT_DAMPING = 1.0
LIMIT_STIFFNESS = 2000.0
LIMIT_DAMPING = 20.0
CONTACT_STIFFNESS = 1.0e5
CONTACT_DAMPING = 2.0e3
FRICTION = 0.9
FRICTION_DAMPING = 1.0e4
# Points deeper than this are under the side of a terrain block, not on top of it.
MAX_PENETRATION = 0.2
NORMAL_DRAG = 1000.0
TANGENT_DRAG = 100.0
MAX_SPEED = 1.0e4
SPAWN_CLEARANCE = 0.05


def perp(v):
    """Rotate planar vectors by +90 degrees (last axis holds (x, z))."""
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


class Terrain(object):
    """Ground profile: `flat`, `gaps` (periodic holes) or `none` (no ground at all)."""

    def __init__(self, kind='flat', height=0.0, gap_width=0.96, gap_period=3.2):
        if kind not in ('flat', 'gaps', 'none'):
            raise ValueError("Unknown terrain kind: {}".format(kind))
        self.kind = kind
        self.height = height
        self.gap_width = gap_width
        self.gap_period = gap_period

    def in_gap(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind != 'gaps':
            return np.zeros(x.shape, dtype=bool)
        offset = np.mod(x, self.gap_period)
        return (x >= 0.0) & (offset >= self.gap_period - self.gap_width)

    def height_at(self, x):
        """Ground height under x, NaN where there is no ground."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == 'none':
            return np.full(x.shape, np.nan)
        heights = np.full(x.shape, float(self.height))
        heights[self.in_gap(x)] = np.nan
        return heights

    def phase(self, x):
        return np.mod(x, self.gap_period) / self.gap_period


class World(object):
    def __init__(self, terrain, gravity=9.81, viscosity=0.0, joint_range=math.radians(60.0)):
        self.terrain = terrain
        self.gravity = gravity
        self.viscosity = viscosity
        self.joint_range = joint_range

    @classmethod
    def from_config(cls, config):
        terrain = Terrain(config.terrain, config.terrain_height, config.gap_width, config.gap_period)
        return cls(terrain, gravity=config.gravity, viscosity=config.viscosity,
                   joint_range=math.radians(config.joint_range))


def denormalize_attrs(attrs, config):
    """Map normalized [-1, 1] attributes to bone length, rest angle, radius and motor gear."""
    attrs = np.asarray(attrs, dtype=np.float64).reshape(-1, 4)

    def linear(values, bounds):
        lo, hi = bounds
        return lo + (np.clip(values, -1.0, 1.0) + 1.0) * 0.5 * (hi - lo)

    bone = attrs[:, :2] * config.bone_scale
    length = np.clip(np.hypot(bone[:, 0], bone[:, 1]), *config.bone_length_range)
    rest_angle = np.arctan2(bone[:, 1], bone[:, 0])
    radius = linear(attrs[:, 2], config.bone_size_range)
    gear = linear(attrs[:, 3], config.gear_range)
    return length, rest_angle, radius, gear


class PlanarBodyState(object):
    """Pose and velocity of every link, derived from (q, qd)."""

    def __init__(self, q, qd, angles, starts, ends, coms, com_velocities, angular_velocities):
        self.q = q
        self.qd = qd
        self.angles = angles
        self.starts = starts
        self.ends = ends
        self.coms = coms
        self.com_velocities = com_velocities
        self.angular_velocities = angular_velocities

    @property
    def root_position(self):
        return self.q[:2]

    @property
    def root_velocity(self):
        return self.qd[:2]

    @property
    def joint_angles(self):
        return self.q[2:]

    @property
    def joint_velocities(self):
        return self.qd[2:]

    def is_finite(self):
        return bool(np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qd)))


class BodyModel(object):
    """Static mass/geometry description of a design, plus the dynamics on top of it."""

    def __init__(self, design, config):
        self.num_links = len(design)
        self.ndof = self.num_links + 2
        self.parents = design.parent_positions

        self.lengths, self.rest_angles, self.radii, self.gears = denormalize_attrs(design.attrs, config)
        volume = math.pi * self.radii ** 2 * self.lengths + 4.0 / 3.0 * math.pi * self.radii ** 3
        self.masses = config.density * volume
        self.inertias = self.masses * (self.lengths ** 2 + 3.0 * self.radii ** 2) / 12.0

        # ancestors[k, d] == 1 when rotating dof d (root orientation or hinge d) rotates link k.
        ancestors = np.eye(self.num_links)
        for k in range(1, self.num_links):
            ancestors[k] += ancestors[self.parents[k]]
        self.ancestors = ancestors
        self.strict_ancestors = ancestors - np.eye(self.num_links)
        self.rest_absolute = ancestors.dot(self.rest_angles)

        self.angular_jacobian = np.zeros((self.num_links, self.ndof))
        self.angular_jacobian[:, 2:] = ancestors

        armature = np.zeros(self.ndof)
        armature[3:] = ARMATURE
        self.armature = np.diag(armature)

    def rest_q(self, position):
        q = np.zeros(self.ndof)
        q[:2] = position
        return q

    def state(self, q, qd):
        angles = self.rest_absolute + self.ancestors.dot(q[2:])
        directions = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        segments = self.lengths[:, None] * directions

        starts = np.zeros((self.num_links, 2))
        ends = np.zeros((self.num_links, 2))
        for k in range(self.num_links):
            starts[k] = q[:2] if k == 0 else ends[self.parents[k]]
            ends[k] = starts[k] + segments[k]
        coms = starts + 0.5 * segments

        omega = self.ancestors.dot(qd[2:])
        com_jac = self.point_jacobians(coms, np.arange(self.num_links), starts)
        com_velocities = np.einsum('kad,d->ka', com_jac, qd)
        return PlanarBodyState(q, qd, angles, starts, ends, coms, com_velocities, omega)

    def point_jacobians(self, points, owners, starts):
        """d(point velocity)/d(qd) for points rigidly attached to links `owners`: shape [P, 2, ndof]."""
        points = np.asarray(points).reshape(-1, 2)
        jac = np.zeros((points.shape[0], 2, self.ndof))
        jac[:, 0, 0] = 1.0
        jac[:, 1, 1] = 1.0
        levers = perp(points[:, None, :] - starts[None, :, :])
        mask = self.ancestors[owners]
        jac[:, :, 2:] = np.transpose(levers * mask[:, :, None], (0, 2, 1))
        return jac

    def mass_matrix(self, com_jac):
        M = np.einsum('k,kai,kaj->ij', self.masses, com_jac, com_jac)
        M += np.einsum('k,ki,kj->ij', self.inertias, self.angular_jacobian, self.angular_jacobian)
        return M + self.armature

    def kinetic_energy(self, q, qd):
        state = self.state(q, qd)
        com_jac = self.point_jacobians(state.coms, np.arange(self.num_links), state.starts)
        return 0.5 * qd.dot(self.mass_matrix(com_jac)).dot(qd)

    def substep(self, q, qd, torques, world, h):
        state = self.state(q, qd)
        links = np.arange(self.num_links)
        segments = state.ends - state.starts
        com_jac = self.point_jacobians(state.coms, links, state.starts)

        M = self.mass_matrix(com_jac)
        D = np.zeros((self.ndof, self.ndof))
        K = np.zeros((self.ndof, self.ndof))
        Q = np.zeros(self.ndof)

        # velocity-product (centripetal) accelerations of each link's center of mass
        omega_sq = state.angular_velocities ** 2
        bias = -(self.strict_ancestors.dot(omega_sq[:, None] * segments)) - 0.5 * omega_sq[:, None] * segments
        Q -= np.einsum('k,kad,ka->d', self.masses, com_jac, bias)

        if world.gravity:
            Q -= world.gravity * np.einsum('k,kd->d', self.masses, com_jac[:, 1, :])

        # hinge actuation, damping and limits
        Q[3:] += torques
        hinge = np.arange(3, self.ndof)
        D[hinge, hinge] += JOINT_DAMPING
        angles = q[3:]
        over = np.abs(angles) > world.joint_range
        if np.any(over):
            excess = angles - np.sign(angles) * world.joint_range
            idx = hinge[over]
            Q[idx] -= LIMIT_STIFFNESS * excess[over]
            K[idx, idx] += LIMIT_STIFFNESS
            D[idx, idx] += LIMIT_DAMPING

        if world.terrain.kind != 'none':
            self._add_contacts(state, world, M, D, K, Q)

        if world.viscosity:
            self._add_drag(state, com_jac, world, D)

        lhs = M + h * D + h * h * K
        qd_next = np.linalg.solve(lhs, M.dot(qd) + h * Q)
        return q + h * qd_next, qd_next

    def _add_contacts(self, state, world, M, D, K, Q):
        points = np.concatenate([state.starts, state.ends])
        owners = np.concatenate([np.arange(self.num_links)] * 2)
        radii = self.radii[owners]
        ground = world.terrain.height_at(points[:, 0])
        depth = ground + radii - points[:, 1]
        touching = np.isfinite(depth) & (depth > 0.0) & (depth < MAX_PENETRATION)
        if not np.any(touching):
            return

        jac = self.point_jacobians(points[touching], owners[touching], state.starts)
        for point_jac, delta in zip(jac, depth[touching]):
            jx, jz = point_jac[0], point_jac[1]
            vx, vz = jx.dot(state.qd), jz.dot(state.qd)

            Q += jz * (CONTACT_STIFFNESS * delta)
            K += CONTACT_STIFFNESS * np.outer(jz, jz)
            D += CONTACT_DAMPING * np.outer(jz, jz)

            normal = max(CONTACT_STIFFNESS * delta - CONTACT_DAMPING * vz, 0.0)
            if FRICTION_DAMPING * abs(vx) <= FRICTION * normal:
                D += FRICTION_DAMPING * np.outer(jx, jx)
            else:
                Q -= jx * (FRICTION * normal * np.sign(vx))

    def _add_drag(self, state, com_jac, world, D):
        directions = np.stack([np.cos(state.angles), np.sin(state.angles)], axis=-1)
        normals = perp(directions)
        tangent_rows = np.einsum('ka,kad->kd', directions, com_jac)
        normal_rows = np.einsum('ka,kad->kd', normals, com_jac)
        c_t = world.viscosity * TANGENT_DRAG * self.lengths
        c_n = world.viscosity * NORMAL_DRAG * self.lengths
        c_rot = world.viscosity * NORMAL_DRAG * self.lengths ** 3 / 12.0

        D += np.einsum('k,ki,kj->ij', c_t, tangent_rows, tangent_rows)
        D += np.einsum('k,ki,kj->ij', c_n, normal_rows, normal_rows)
        D += np.einsum('k,ki,kj->ij', c_rot, self.angular_jacobian, self.angular_jacobian)

    def step(self, q, qd, torques, world, dt, substeps):
        """Advance one control step; returns (q, qd, failed)."""
        h = dt / substeps
        for _ in range(substeps):
            try:
                q, qd = self.substep(q, qd, torques, world, h)
            except np.linalg.LinAlgError:
                logger.warning("Singular dynamics matrix; truncating episode.")
                return q, qd, True
            if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))) or np.abs(qd).max() > MAX_SPEED:
                return q, qd, True
        return q, qd, False

    def spawn_position(self, world, x, height):
        """Root position for the rest pose at `height`, raised if any capsule would start in the ground."""
        q = self.rest_q((x, height))
        state = self.state(q, np.zeros(self.ndof))
        if world.terrain.kind == 'none':
            return q[:2]

        points = np.concatenate([state.starts, state.ends])
        radii = np.concatenate([self.radii, self.radii])
        lowest = (points[:, 1] - radii).min()
        floor = world.terrain.height + SPAWN_CLEARANCE
        if lowest < floor:
            q[1] += floor - lowest
        return q[:2]
