"""
Graph networks shared by every policy head and the value function.

GraphConv layers pass messages along the (undirected) bones of a design; a joint-specialized MLP
(JSMLP) follows the GNN and keeps one parameter block per joint index, so "the same" joint in
different designs uses the same weights. All tensors are float64.
"""
import logging
import math
from collections import OrderedDict

import numpy as np
import torch
from torch import nn

from morphrl.utils import derive_seed

logger = logging.getLogger(__name__)

DTYPE = torch.float64
# Final policy layers start near zero so early actions stay close to "no change".
OUTPUT_INIT_SCALE = 0.01


class NetworkConfigurationError(Exception):
    pass


class BackwardStateError(Exception):
    pass


def make_generator(*seed_parts):
    generator = torch.Generator()
    generator.manual_seed(derive_seed(*seed_parts))
    return generator


def init_linear(linear, generator, scale=1.0, zero_bias=False):
    """Fan-in scaled uniform init drawn from `generator` (independent of the global torch RNG)."""
    bound = 1.0 / math.sqrt(linear.in_features)
    with torch.no_grad():
        linear.weight.uniform_(-bound, bound, generator=generator)
        linear.weight.mul_(scale)
        if linear.bias is not None:
            if zero_bias:
                linear.bias.zero_()
            else:
                linear.bias.uniform_(-bound, bound, generator=generator)
                linear.bias.mul_(scale)
    return linear


class NodeFeatureBatch(object):
    """Node features of one or more designs, stacked as a single disjoint graph.

    `edge_index` holds every bone in both directions; `graph_ids` maps nodes to their design and
    `root_positions` gives each design's root row (the first node of its breadth-first order).
    """

    def __init__(self, features, edge_index, index_ints, graph_ids, root_positions):
        self.features = features
        self.edge_index = edge_index
        self.index_ints = index_ints
        self.graph_ids = graph_ids
        self.root_positions = root_positions

        if edge_index.numel() and int(edge_index.max()) >= features.shape[0]:
            raise NetworkConfigurationError("Edge index refers to node {} but the batch has {} nodes.".format(
                int(edge_index.max()), features.shape[0]))

    @classmethod
    def from_designs(cls, designs, features):
        """`features` is a list of per-design [num_joints, width] arrays (same width for all)."""
        rows, src, dst, index_ints, graph_ids, roots = [], [], [], [], [], []
        offset = 0
        for graph_id, (design, feats) in enumerate(zip(designs, features)):
            feats = np.asarray(feats, dtype=np.float64)
            if feats.shape[0] != len(design):
                raise NetworkConfigurationError("Design has {} joints but {} feature rows were given.".format(
                    len(design), feats.shape[0]))
            rows.append(feats)
            for child, parent in enumerate(design.parent_positions):
                if parent < 0:
                    continue
                src.extend((offset + parent, offset + child))
                dst.extend((offset + child, offset + parent))
            index_ints.extend(design.index_ints())
            graph_ids.extend([graph_id] * len(design))
            roots.append(offset)
            offset += len(design)

        widths = set(r.shape[1] for r in rows)
        if len(widths) > 1:
            raise NetworkConfigurationError("Feature width differs across designs: {}".format(sorted(widths)))

        return cls(torch.as_tensor(np.concatenate(rows), dtype=DTYPE),
                   torch.tensor([src, dst], dtype=torch.long).reshape(2, -1),
                   index_ints,
                   torch.tensor(graph_ids, dtype=torch.long),
                   torch.tensor(roots, dtype=torch.long))

    @property
    def num_nodes(self):
        return self.features.shape[0]

    @property
    def num_graphs(self):
        return self.root_positions.shape[0]

    def with_features(self, features):
        return NodeFeatureBatch(features, self.edge_index, self.index_ints, self.graph_ids, self.root_positions)

    def sum_per_graph(self, values):
        """Sum per-node values (shape [N] or [N, d]) into one entry per design."""
        out = values.new_zeros((self.num_graphs,) + tuple(values.shape[1:]))
        return out.index_add(0, self.graph_ids, values)


class GraphConvLayer(nn.Module):
    """h_u' = act(W_self h_u + W_neigh sum_{v in N(u)} h_v + b)."""

    def __init__(self, in_dim, out_dim, generator, activation=True):
        super(GraphConvLayer, self).__init__()
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        self.lin_self = init_linear(nn.Linear(in_dim, out_dim, bias=True, dtype=DTYPE), generator)
        self.lin_neigh = init_linear(nn.Linear(in_dim, out_dim, bias=False, dtype=DTYPE), generator)

    def forward(self, h, edge_index):
        if h.dim() != 2 or h.shape[1] != self.in_dim:
            raise NetworkConfigurationError("GraphConv expects [N, {}] inputs, got {}.".format(
                self.in_dim, tuple(h.shape)))
        src, dst = edge_index
        messages = h.new_zeros(h.shape).index_add(0, dst, h[src])
        out = self.lin_self(h) + self.lin_neigh(messages)
        if self.activation:
            out = torch.tanh(out)
        return out


class GNN(nn.Module):
    """A stack of GraphConv layers; disabled, it passes node features through unchanged."""

    def __init__(self, in_dim, layer_sizes, generator, enabled=True):
        super(GNN, self).__init__()
        self.in_dim = in_dim
        self.enabled = enabled and len(layer_sizes) > 0
        layers = []
        if self.enabled:
            dims = [in_dim] + list(layer_sizes)
            for d_in, d_out in zip(dims[:-1], dims[1:]):
                layers.append(GraphConvLayer(d_in, d_out, generator))
        self.layers = nn.ModuleList(layers)

    @property
    def out_dim(self):
        if not self.enabled:
            return self.in_dim
        return self.layers[-1].out_dim

    def forward(self, batch):
        h = batch.features
        for layer in self.layers:
            h = layer(h, batch.edge_index)
        return h


class MLP(nn.Module):
    def __init__(self, in_dim, layer_sizes, generator):
        super(MLP, self).__init__()
        self.in_dim = in_dim
        dims = [in_dim] + list(layer_sizes)
        self.layers = nn.ModuleList([init_linear(nn.Linear(d_in, d_out, dtype=DTYPE), generator)
                                     for d_in, d_out in zip(dims[:-1], dims[1:])])

    @property
    def out_dim(self):
        if not self.layers:
            return self.in_dim
        return self.layers[-1].out_features

    def forward(self, x):
        for layer in self.layers:
            x = torch.tanh(layer(x))
        return x


class JsmlpHead(nn.Module):
    """Joint-specialized MLP: one lazily created MLP block per joint index integer.

    Blocks are initialized from a seed derived from (seed, name, index), so every process that
    creates block k for a given policy gets identical initial weights.
    """

    def __init__(self, name, in_dim, layer_sizes, seed, enabled=True):
        super(JsmlpHead, self).__init__()
        self.name = name
        self.in_dim = in_dim
        self.layer_sizes = list(layer_sizes)
        self.seed = seed
        self.enabled = enabled and len(self.layer_sizes) > 0
        self.blocks = nn.ModuleDict()

    @property
    def out_dim(self):
        if not self.enabled:
            return self.in_dim
        return self.layer_sizes[-1]

    def block(self, index_int):
        key = str(int(index_int))
        if key not in self.blocks:
            generator = make_generator(self.seed, self.name, key)
            self.blocks[key] = MLP(self.in_dim, self.layer_sizes, generator)
            logger.debug("Created JSMLP block %s for index %s.", self.name, key)
        return self.blocks[key]

    def ensure_blocks(self, index_ints):
        if not self.enabled:
            return
        for index_int in sorted(set(int(i) for i in index_ints)):
            self.block(index_int)

    def block_indices(self):
        return sorted(int(k) for k in self.blocks.keys())

    def forward(self, h, index_ints):
        if not self.enabled:
            return h

        groups = OrderedDict()
        for position, index_int in enumerate(index_ints):
            groups.setdefault(int(index_int), []).append(position)

        outputs, order = [], []
        for index_int in sorted(groups):
            positions = torch.tensor(groups[index_int], dtype=torch.long)
            outputs.append(self.block(index_int)(h.index_select(0, positions)))
            order.append(positions)

        order = torch.cat(order)
        inverse = torch.empty_like(order)
        inverse[order] = torch.arange(order.shape[0])
        return torch.cat(outputs).index_select(0, inverse)


class ParamStore(object):
    """All learnable parameters of a set of modules, each with exactly one gradient slot."""

    def __init__(self, modules):
        self.modules = OrderedDict(modules)

    def named_parameters(self, group=None):
        params = []
        for name, module in self.modules.items():
            if group is not None and name != group:
                continue
            for param_name, param in module.named_parameters():
                params.append(("{}.{}".format(name, param_name), param))
        return params

    def parameters(self, group=None):
        return [param for _, param in self.named_parameters(group)]

    def num_parameters(self, group=None):
        return sum(param.numel() for param in self.parameters(group))

    def zero_grad(self):
        for param in self.parameters():
            if param.grad is None:
                param.grad = torch.zeros_like(param)
            else:
                param.grad.zero_()

    def backward(self, loss):
        """Accumulate d(loss)/d(param) into every gradient slot; unreachable parameters get zeros."""
        if not isinstance(loss, torch.Tensor) or loss.grad_fn is None:
            raise BackwardStateError("backward() needs a loss computed by a recorded forward pass.")
        if loss.numel() != 1:
            raise BackwardStateError("backward() needs a scalar loss, got shape {}.".format(tuple(loss.shape)))

        loss.backward()
        for param in self.parameters():
            if param.grad is None:
                param.grad = torch.zeros_like(param)

    def gradients(self, group=None):
        return OrderedDict((name, param.grad) for name, param in self.named_parameters(group))

    def grads_finite(self, group=None):
        return all(param.grad is None or bool(torch.isfinite(param.grad).all()) for param in self.parameters(group))

    def state_dict(self):
        return OrderedDict((name, module.state_dict()) for name, module in self.modules.items())
