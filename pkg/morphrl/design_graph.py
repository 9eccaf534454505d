"""
Agent designs: a rooted joint tree with a per-joint attribute vector.

A design is an immutable value. Transform operations (`apply_skeleton_actions`,
`apply_attribute_actions`) return new designs, so the same object can be shared
read-only between rollout workers and stored in many transitions.
"""
import enum
import logging
import re
from collections import OrderedDict
from collections.abc import Mapping

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    'ATTR_DIM',
    'DEFAULT_MAX_JOINTS',
    'DEFAULT_MAX_CHILDREN',
    'DesignError',
    'UnknownJointError',
    'InvalidIndexError',
    'NonFiniteActionError',
    'DesignFileError',
    'SkeletonAction',
    'IndexString',
    'JointNode',
    'DesignGraph',
    'apply_skeleton_actions',
    'apply_attribute_actions',
    'compute_index',
    'index_to_int',
    'serialize',
    'deserialize',
    'load_design',
    'save_design',
    'chain_design',
    'star_design',
    'random_design',
]

# bone_dir_x, bone_dir_z, bone_size, motor_gear
ATTR_DIM = 4
DEFAULT_MAX_JOINTS = 20
DEFAULT_MAX_CHILDREN = 3

DESIGN_FILE_VERSION = 1


class DesignError(Exception):
    pass


class UnknownJointError(DesignError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InvalidIndexError(DesignError, ValueError):
    pass


class NonFiniteActionError(DesignError, ValueError):
    pass


class DesignFileError(DesignError):
    def __init__(self, message, line, column):
        self.message = message
        self.line = line
        self.column = column
        super(DesignFileError, self).__init__("{} (line {}, column {})".format(message, line, column))


class SkeletonAction(enum.IntEnum):
    ADD_JOINT = 0
    DEL_JOINT = 1
    NO_CHANGE = 2


def make_attr(values):
    attr = np.array(values, dtype=np.float64).reshape(-1)
    if attr.shape != (ATTR_DIM,):
        raise DesignError("Attribute vectors have {} entries, got {}.".format(ATTR_DIM, attr.shape[0]))
    if not np.all(np.isfinite(attr)):
        raise DesignError("Attribute vector has non-finite entries: {}".format(attr.tolist()))
    if np.any(np.abs(attr) > 1.0):
        raise DesignError("Attribute vector outside [-1, 1]: {}".format(attr.tolist()))

    attr.setflags(write=False)
    return attr


class IndexString(object):
    """Root-to-joint path encoding. Each step to the i-th child prepends digit i; the root is "0"."""
    __slots__ = ('digits',)

    def __init__(self, digits=()):
        self.digits = tuple(int(d) for d in digits)

    @classmethod
    def parse(cls, s):
        if s == "0":
            return cls()
        if not s.isdigit():
            raise InvalidIndexError("Invalid index string: {!r}".format(s))
        return cls(int(c) for c in s)

    def child(self, position):
        return IndexString((position,) + self.digits)

    def __str__(self):
        if not self.digits:
            return "0"
        return "".join(str(d) for d in self.digits)

    def __repr__(self):
        return "IndexString({!r})".format(str(self))

    def __eq__(self, other):
        if isinstance(other, str):
            return str(self) == other
        return isinstance(other, IndexString) and self.digits == other.digits

    def __hash__(self):
        return hash(self.digits)


class JointNode(object):
    __slots__ = ('id', 'attr', 'children', 'parent', 'index_string')

    def __init__(self, id, attr, children=(), parent=None, index_string=None):
        self.id = id
        self.attr = attr
        self.children = tuple(children)
        self.parent = parent
        self.index_string = index_string

    @property
    def is_root(self):
        return self.parent is None

    def __repr__(self):
        return "JointNode(id={}, index={}, children={})".format(self.id, self.index_string, list(self.children))


class DesignGraph(object):
    """An agent design: joint tree, bones (tree edges) and per-joint attributes.

    Joints are kept in breadth-first order (root first, children in insertion order). Every
    per-joint array in the package (features, actions, observations) follows this order.
    """

    def __init__(self, nodes, root_id, n_children_max=DEFAULT_MAX_CHILDREN, max_joints=DEFAULT_MAX_JOINTS,
                 generation_counter=None):
        """`nodes` maps joint id -> (attr, ordered child ids)."""
        if root_id not in nodes:
            raise DesignError("Root joint {} is not part of the design.".format(root_id))
        if len(nodes) > max_joints:
            raise DesignError("Design has {} joints, more than max_joints={}.".format(len(nodes), max_joints))

        self.root_id = root_id
        self.n_children_max = n_children_max
        self.max_joints = max_joints

        joints = OrderedDict()
        joints[root_id] = JointNode(root_id, make_attr(nodes[root_id][0]), nodes[root_id][1],
                                    index_string=IndexString())
        queue = [root_id]
        while queue:
            jid = queue.pop(0)
            node = joints[jid]
            if len(node.children) > n_children_max:
                raise DesignError("Joint {} has {} children, more than {}.".format(
                    jid, len(node.children), n_children_max))
            for position, child_id in enumerate(node.children, 1):
                if child_id not in nodes:
                    raise DesignError("Joint {} lists unknown child {}.".format(jid, child_id))
                if child_id in joints:
                    raise DesignError("Joint {} is reachable twice; edges must form a tree.".format(child_id))
                attr, children = nodes[child_id]
                joints[child_id] = JointNode(child_id, make_attr(attr), children, parent=jid,
                                             index_string=node.index_string.child(position))
                queue.append(child_id)

        if len(joints) != len(nodes):
            orphans = sorted(set(nodes) - set(joints), key=str)
            raise DesignError("Joints not connected to the root: {}".format(orphans))

        self._joints = joints
        self._order = tuple(joints)
        self._position = dict((jid, i) for i, jid in enumerate(self._order))

        if generation_counter is None:
            generation_counter = max(jid for jid in joints) + 1
        self.generation_counter = generation_counter

    # -- lookups --

    def joint(self, joint_id):
        try:
            return self._joints[joint_id]
        except KeyError:
            raise UnknownJointError("Unknown joint id: {}".format(joint_id))

    def parent_of(self, joint_id):
        return self.joint(joint_id).parent

    def position(self, joint_id):
        """Position of the joint in breadth-first order."""
        self.joint(joint_id)
        return self._position[joint_id]

    def __contains__(self, joint_id):
        return joint_id in self._joints

    def __len__(self):
        return len(self._joints)

    def __iter__(self):
        return iter(self._joints.values())

    @property
    def num_joints(self):
        return len(self._joints)

    @property
    def bfs_order(self):
        return self._order

    @property
    def parent_positions(self):
        """Parent position of each joint in breadth-first order (-1 for the root)."""
        return np.array([-1 if node.parent is None else self._position[node.parent] for node in self],
                        dtype=np.int64)

    @property
    def attrs(self):
        return np.stack([node.attr for node in self])

    @property
    def index_strings(self):
        return [node.index_string for node in self]

    def index_ints(self):
        return [index_to_int(node.index_string, self.n_children_max) for node in self]

    def depth(self):
        return max(len(node.index_string.digits) for node in self)

    def to_nodes(self):
        return dict((node.id, (node.attr, list(node.children))) for node in self)

    def __eq__(self, other):
        if not isinstance(other, DesignGraph):
            return NotImplemented
        if (self.root_id, self.n_children_max, self._order) != (other.root_id, other.n_children_max, other._order):
            return False
        for mine, theirs in zip(self, other):
            if mine.children != theirs.children or not np.array_equal(mine.attr, theirs.attr):
                return False
        return True

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    __hash__ = None

    def __repr__(self):
        return "DesignGraph(joints={}, depth={})".format(len(self), self.depth())


def _per_joint(design, actions, what):
    if isinstance(actions, Mapping):
        if set(actions) != set(design.bfs_order):
            raise DesignError("{} must be keyed by every joint of the design.".format(what))
        return [actions[jid] for jid in design.bfs_order]

    actions = list(actions)
    if len(actions) != len(design):
        raise DesignError("Expected {} {}, got {}.".format(len(design), what, len(actions)))
    return actions


def apply_skeleton_actions(design, actions):
    """Apply one AddJoint/DelJoint/NoChange per joint and return the new design.

    Feasibility is judged on the design before the step; infeasible actions (deleting the root or a
    joint with children, adding to a full joint or beyond max_joints) are no-ops.
    """
    actions = _per_joint(design, actions, "skeleton actions")
    nodes = dict((node.id, (node.attr, list(node.children))) for node in design)
    counter = design.generation_counter
    count = len(design)

    for node, action in zip(design, actions):
        action = SkeletonAction(int(action))
        if action == SkeletonAction.ADD_JOINT:
            if len(node.children) >= design.n_children_max or count >= design.max_joints:
                continue
            nodes[counter] = (node.attr, [])
            nodes[node.id][1].append(counter)
            counter += 1
            count += 1
        elif action == SkeletonAction.DEL_JOINT:
            if node.is_root or node.children:
                continue
            nodes[node.parent][1].remove(node.id)
            del nodes[node.id]
            count -= 1

    return DesignGraph(nodes, design.root_id, n_children_max=design.n_children_max,
                       max_joints=design.max_joints, generation_counter=counter)


def apply_attribute_actions(design, actions):
    """z <- clip(z + a, -1, 1) for every joint; the skeleton is untouched."""
    deltas = np.array(_per_joint(design, actions, "attribute deltas"), dtype=np.float64)
    if deltas.shape != (len(design), ATTR_DIM):
        raise DesignError("Attribute deltas must have shape ({}, {}), got {}.".format(
            len(design), ATTR_DIM, deltas.shape))
    if not np.all(np.isfinite(deltas)):
        raise NonFiniteActionError("Non-finite attribute delta.")

    nodes = {}
    for node, delta in zip(design, deltas):
        nodes[node.id] = (np.clip(node.attr + delta, -1.0, 1.0), node.children)

    return DesignGraph(nodes, design.root_id, n_children_max=design.n_children_max,
                       max_joints=design.max_joints, generation_counter=design.generation_counter)


def compute_index(design, joint_id):
    return design.joint(joint_id).index_string


def index_to_int(idx, n_children_max):
    """Positional value of an index string in base N_C + 1 ("0" -> 0)."""
    if isinstance(idx, str):
        idx = IndexString.parse(idx)

    base = n_children_max + 1
    value = 0
    for digit in idx.digits:
        if digit < 1 or digit > n_children_max:
            raise InvalidIndexError("Digit {} of index {} is outside 1..{}.".format(digit, idx, n_children_max))
        value = value * base + digit
    return value


# -- design files --

HEADER_RE = re.compile(r'^designfile v(\d+) nc=(\d+)$')
TOKEN_RE = re.compile(r'\S+')


def _format_float(x):
    return repr(float(x))


def serialize(design):
    lines = ["designfile v{} nc={}".format(DESIGN_FILE_VERSION, design.n_children_max)]
    for node in design:
        parent = 'none' if node.parent is None else str(node.parent)
        lines.append("joint {} parent={} attr={}".format(
            node.id, parent, ",".join(_format_float(x) for x in node.attr)))
    return "\n".join(lines) + "\n"


def _parse_joint_line(lineno, line):
    tokens = [(m.group(), m.start() + 1) for m in TOKEN_RE.finditer(line)]
    if tokens[0][0] != 'joint':
        raise DesignFileError("expected 'joint', found {!r}".format(tokens[0][0]), lineno, tokens[0][1])
    if len(tokens) != 4:
        column = tokens[4][1] if len(tokens) > 4 else len(line) + 1
        raise DesignFileError("expected 'joint <id> parent=<id|none> attr=<f,f,f,f>'", lineno, column)

    (id_text, id_col), (parent_text, parent_col), (attr_text, attr_col) = tokens[1:]
    if not id_text.isdigit():
        raise DesignFileError("joint id must be a non-negative integer, found {!r}".format(id_text), lineno, id_col)

    if not parent_text.startswith('parent='):
        raise DesignFileError("expected 'parent=', found {!r}".format(parent_text), lineno, parent_col)
    parent_value = parent_text[len('parent='):]
    if parent_value == 'none':
        parent = None
    elif parent_value.isdigit():
        parent = int(parent_value)
    else:
        raise DesignFileError("invalid parent {!r}".format(parent_value), lineno, parent_col + len('parent='))

    if not attr_text.startswith('attr='):
        raise DesignFileError("expected 'attr=', found {!r}".format(attr_text), lineno, attr_col)
    column = attr_col + len('attr=')
    values = []
    for part in attr_text[len('attr='):].split(','):
        try:
            value = float(part)
        except ValueError:
            raise DesignFileError("invalid attribute value {!r}".format(part), lineno, column)
        if not np.isfinite(value) or abs(value) > 1.0:
            raise DesignFileError("attribute value {!r} outside [-1, 1]".format(part), lineno, column)
        values.append(value)
        column += len(part) + 1
    if len(values) != ATTR_DIM:
        raise DesignFileError("expected {} attribute values, found {}".format(ATTR_DIM, len(values)),
                              lineno, attr_col)

    return int(id_text), id_col, parent, parent_col, values


def deserialize(text, max_joints=DEFAULT_MAX_JOINTS):
    header = None
    nodes = OrderedDict()
    root_id = None

    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith('#'):
            continue

        if header is None:
            match = HEADER_RE.match(line.strip())
            if match is None:
                raise DesignFileError("expected header 'designfile v1 nc=<N_C>'", lineno, 1)
            version, n_children_max = int(match.group(1)), int(match.group(2))
            if version != DESIGN_FILE_VERSION:
                raise DesignFileError("unsupported design file version {}".format(version), lineno, 1)
            if n_children_max < 1:
                raise DesignFileError("nc must be at least 1", lineno, 1)
            header = n_children_max
            continue

        joint_id, id_col, parent, parent_col, attr = _parse_joint_line(lineno, line)
        if joint_id in nodes:
            raise DesignFileError("duplicate joint id {}".format(joint_id), lineno, id_col)
        if parent is None:
            if root_id is not None:
                raise DesignFileError("second root joint {}".format(joint_id), lineno, parent_col)
            root_id = joint_id
        else:
            if parent not in nodes:
                raise DesignFileError("parent {} must be declared before its children".format(parent),
                                      lineno, parent_col)
            if len(nodes[parent][1]) >= header:
                raise DesignFileError("joint {} already has {} children".format(parent, header), lineno, parent_col)
            nodes[parent][1].append(joint_id)
        nodes[joint_id] = (attr, [])

    if header is None:
        raise DesignFileError("empty design file", 1, 1)
    if root_id is None:
        raise DesignFileError("design file declares no joints", lineno, 1)
    if len(nodes) > max_joints:
        raise DesignFileError("design has {} joints, more than {}".format(len(nodes), max_joints), lineno, 1)

    return DesignGraph(nodes, root_id, n_children_max=header, max_joints=max_joints)


def load_design(path, max_joints=DEFAULT_MAX_JOINTS):
    with open(path, 'rb') as f:
        data = f.read()
    try:
        text = data.decode('utf-8')
    except UnicodeDecodeError as e:
        line_start = data.rfind(b'\n', 0, e.start) + 1
        raise DesignFileError("invalid UTF-8", data.count(b'\n', 0, e.start) + 1, e.start - line_start + 1)
    return deserialize(text, max_joints=max_joints)


def save_design(design, path):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(serialize(design))


# -- constructors --

def chain_design(num_joints, attr, n_children_max=DEFAULT_MAX_CHILDREN, max_joints=DEFAULT_MAX_JOINTS):
    attrs = np.broadcast_to(np.asarray(attr, dtype=np.float64), (num_joints, ATTR_DIM))
    nodes = {}
    for i in range(num_joints):
        nodes[i] = (attrs[i], [i + 1] if i + 1 < num_joints else [])
    return DesignGraph(nodes, 0, n_children_max=n_children_max, max_joints=max_joints)


def star_design(num_children, root_attr, child_attr=None, n_children_max=DEFAULT_MAX_CHILDREN,
                max_joints=DEFAULT_MAX_JOINTS):
    if child_attr is None:
        child_attr = root_attr
    nodes = {0: (root_attr, list(range(1, num_children + 1)))}
    for i in range(1, num_children + 1):
        nodes[i] = (child_attr, [])
    return DesignGraph(nodes, 0, n_children_max=n_children_max, max_joints=max_joints)


def random_design(rng, n_children_max=DEFAULT_MAX_CHILDREN, max_joints=DEFAULT_MAX_JOINTS, min_joints=2,
                  size=None):
    """Grow a random tree by attaching joints to uniformly chosen non-full joints; attributes ~ U[-1, 1]."""
    if size is None:
        size = int(rng.integers(min(min_joints, max_joints), max_joints + 1))
    size = max(1, min(size, max_joints))

    nodes = {0: (rng.uniform(-1.0, 1.0, ATTR_DIM), [])}
    while len(nodes) < size:
        open_joints = [jid for jid in sorted(nodes) if len(nodes[jid][1]) < n_children_max]
        parent = open_joints[int(rng.integers(len(open_joints)))]
        child = len(nodes)
        nodes[child] = (rng.uniform(-1.0, 1.0, ATTR_DIM), [])
        nodes[parent][1].append(child)

    return DesignGraph(nodes, 0, n_children_max=n_children_max, max_joints=max_joints)
