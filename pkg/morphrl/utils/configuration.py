import configparser
import copy
import io
import logging

import jsonschema
from jsonschema import ValidationError

from morphrl.design_graph import load_design
from morphrl.envs import get_env
from morphrl.optim import PpoConfig
from morphrl.policy import PolicyConfig
from morphrl.rollout import EpisodeConfig, default_initial_design
from morphrl.settings.helpers import array_from_string, parse_boolean

logger = logging.getLogger(__name__)

METHODS = ['transform2act', 'nge', 'ess', 'rgs']
ENV_KINDS = ['loco2d', 'swimmer', 'gap', 'reward3d-test']
GAP_GAMMA = 0.999


def _section(properties):
    return {
        'type': 'object',
        'properties': properties,
        'additionalProperties': False,
    }


def _int_array(default):
    return {'type': 'array', 'items': {'type': 'integer', 'minimum': 1}, 'default': default}


EXPERIMENT_SCHEMA = {
    'type': 'object',
    'additionalProperties': False,
    'required': ['experiment'],
    'properties': {
        'experiment': dict(_section({
            'method': {'type': 'string', 'enum': METHODS, 'default': 'transform2act'},
            'env': {'type': 'string', 'enum': ENV_KINDS},
            'name': {'type': 'string', 'default': ''},
            'seed': {'type': 'integer', 'minimum': 0, 'default': 0},
            'budget_scale': {'type': 'number', 'exclusiveMinimum': 0, 'default': 1.0},
            'output_dir': {'type': 'string', 'default': ''},
            'initial_design': {'type': 'string', 'default': ''},
            'finetune_design': {'type': 'string', 'default': ''},
            'eval_episodes': {'type': 'integer', 'minimum': 0, 'default': 1},
            'checkpoint_every': {'type': 'integer', 'minimum': 0, 'default': 0},
        }), required=['env']),
        'env': _section({
            'horizon': {'type': 'integer', 'minimum': 1, 'default': 1000},
            'max_joints': {'type': 'integer', 'minimum': 1, 'default': 20},
            'n_children_max': {'type': 'integer', 'minimum': 1},
            'substeps': {'type': 'integer', 'minimum': 1},
            'spawn_height': {'type': 'number'},
            'init_noise': {'type': 'number', 'minimum': 0},
            'alive_bonus': {'type': 'number'},
            'control_weight': {'type': 'number', 'minimum': 0},
        }),
        'episode': _section({
            'skeleton_transforms': {'type': 'integer', 'minimum': 0, 'default': 5},
            'attribute_transforms': {'type': 'integer', 'minimum': 0, 'default': 1},
            'skeleton_stage_enabled': {'type': 'boolean', 'default': True},
        }),
        'policy': _section({
            'gnn_sizes': _int_array([64, 64, 64]),
            'jsmlp_sizes': _int_array([128, 128]),
            'value_gnn_sizes': _int_array([64, 64, 64]),
            'value_mlp_sizes': _int_array([512, 256]),
            'attribute_init_std': {'type': 'number', 'exclusiveMinimum': 0, 'default': 0.1},
            'control_init_std': {'type': 'number', 'exclusiveMinimum': 0, 'default': 1.0},
            'use_gnn': {'type': 'boolean', 'default': True},
            'transform_jsmlp': {'type': 'boolean', 'default': True},
            'control_jsmlp': {'type': 'boolean', 'default': True},
            'normalize_observations': {'type': 'boolean', 'default': False},
        }),
        'ppo': _section({
            'clip_epsilon': {'type': 'number', 'exclusiveMinimum': 0, 'default': 0.2},
            'policy_lr': {'type': 'number', 'exclusiveMinimum': 0, 'default': 5e-5},
            'value_lr': {'type': 'number', 'exclusiveMinimum': 0, 'default': 3e-4},
            'gamma': {'type': 'number', 'exclusiveMinimum': 0, 'maximum': 1},
            'gae_lambda': {'type': 'number', 'minimum': 0, 'maximum': 1, 'default': 0.95},
            'batch_size': {'type': 'integer', 'minimum': 1, 'default': 50000},
            'minibatch_size': {'type': 'integer', 'minimum': 1, 'default': 2048},
            'iterations': {'type': 'integer', 'minimum': 0, 'default': 10},
            'epochs': {'type': 'integer', 'minimum': 1, 'default': 1000},
            'entropy_coef': {'type': 'number', 'minimum': 0, 'default': 0.0},
            'normalize_advantages': {'type': 'boolean', 'default': True},
            'max_grad_norm': {'type': 'number', 'minimum': 0, 'default': 40.0},
        }),
        'evolution': _section({
            'population_size': {'type': 'integer', 'minimum': 1, 'default': 20},
            'generations': {'type': 'integer', 'minimum': 1, 'default': 125},
            'elimination_rate': {'type': 'number', 'minimum': 0, 'maximum': 1, 'default': 0.15},
            'species_batch_size': {'type': 'integer', 'minimum': 1, 'default': 20000},
            'add_joint_prob': {'type': 'number', 'minimum': 0, 'maximum': 1, 'default': 0.3},
            'delete_joint_prob': {'type': 'number', 'minimum': 0, 'maximum': 1, 'default': 0.15},
            'attribute_sigma': {'type': 'number', 'minimum': 0, 'default': 0.1},
        }),
    }
}


class ConfigurationError(Exception):
    pass


def _coerce(section, key, text, schema):
    section_schema = schema['properties'].get(section)
    if section_schema is None:
        raise ConfigurationError("Unknown section [{}]".format(section))
    prop = section_schema['properties'].get(key)
    if prop is None:
        raise ConfigurationError("Unknown key '{}' in section [{}]".format(key, section))

    try:
        kind = prop['type']
        if kind == 'integer':
            return int(text)
        if kind == 'number':
            return float(text)
        if kind == 'boolean':
            return bool(parse_boolean(text))
        if kind == 'array':
            return [int(item) for item in array_from_string(text)]
        return text
    except ValueError:
        raise ConfigurationError("{}.{}: cannot read {!r} as {}".format(section, key, text, prop['type']))


def _format(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ExperimentConfig(object):
    """Sectioned experiment configuration validated against EXPERIMENT_SCHEMA, with defaults filled in."""

    def __init__(self, config, schema=EXPERIMENT_SCHEMA):
        self._schema = schema
        self._config = self._with_defaults(copy.deepcopy(config))
        self.validate()

    @property
    def schema(self):
        return self._schema

    def _with_defaults(self, config):
        for section, section_schema in self._schema['properties'].items():
            values = config.setdefault(section, {})
            if not isinstance(values, dict):
                continue
            for key, prop in section_schema['properties'].items():
                if key not in values and 'default' in prop:
                    values[key] = copy.deepcopy(prop['default'])
        return config

    def validate(self):
        try:
            jsonschema.validate(self._config, self._schema)
        except ValidationError as e:
            path = ".".join(str(p) for p in e.absolute_path) or "config"
            raise ConfigurationError("{}: {}".format(path, e.message))

    def to_dict(self):
        return copy.deepcopy(self._config)

    def section(self, name):
        return dict(self._config[name])

    def get(self, section, key, default=None):
        return self._config.get(section, {}).get(key, default)

    def __getitem__(self, item):
        if item in self._config:
            return self._config[item]
        raise KeyError(item)

    def __contains__(self, item):
        return item in self._config

    def update(self, section, key, value):
        """Set one value (e.g. a CLI override) and re-validate."""
        self._config.setdefault(section, {})[key] = value
        self.validate()

    def to_text(self):
        lines = []
        for section in self._schema['properties']:
            values = self._config.get(section, {})
            lines.append("[{}]".format(section))
            for key in self._schema['properties'][section]['properties']:
                if key in values:
                    lines.append("{} = {}".format(key, _format(values[key])))
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text, schema=EXPERIMENT_SCHEMA):
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_file(io.StringIO(text))
        except configparser.Error as e:
            raise ConfigurationError("Malformed config: {}".format(e))

        config = {}
        for section in parser.sections():
            config[section] = {}
            for key, text_value in parser.items(section):
                if text_value == '' and schema['properties'].get(section, {}).get('properties', {}).get(
                        key, {}).get('type') != 'string':
                    continue
                config[section][key] = _coerce(section, key, text_value, schema)
        return cls(config, schema)

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, encoding='utf-8') as f:
                return cls.from_text(f.read())
        except IOError as e:
            raise ConfigurationError("Cannot read config {}: {}".format(path, e))

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as f:
            f.write(self.to_text())

    # -- typed views --

    @property
    def method(self):
        return self._config['experiment']['method']

    @property
    def seed(self):
        return self._config['experiment']['seed']

    @property
    def budget_scale(self):
        return self._config['experiment']['budget_scale']

    def env_class(self):
        env_class = get_env(self._config['experiment']['env'])
        if env_class is None:
            raise ConfigurationError("experiment.env: environment '{}' is not enabled".format(
                self._config['experiment']['env']))
        return env_class

    def make_env(self):
        env_class = self.env_class()
        return env_class(env_class.configuration(**self.section('env')))

    def initial_design(self, env_config):
        experiment = self._config['experiment']
        path = experiment['finetune_design'] or experiment['initial_design']
        if path:
            return load_design(path, max_joints=env_config.max_joints)
        return default_initial_design(env_config.n_children_max, env_config.max_joints)

    def episode_config(self, env_config):
        episode = self.section('episode')
        if self._config['experiment']['finetune_design']:
            episode['skeleton_stage_enabled'] = False
        return EpisodeConfig(initial_design=self.initial_design(env_config), **episode)

    def policy_config(self):
        values = self.section('policy')
        for key in ('gnn_sizes', 'jsmlp_sizes', 'value_gnn_sizes', 'value_mlp_sizes'):
            values[key] = tuple(values[key])
        return PolicyConfig(seed=self.seed, **values)

    def ppo_config(self):
        values = self.section('ppo')
        if 'gamma' not in values:
            values['gamma'] = GAP_GAMMA if self._config['experiment']['env'] == 'gap' else PpoConfig.gamma
        values['batch_size'] = self.scaled(values['batch_size'])
        values['minibatch_size'] = min(values['minibatch_size'], values['batch_size'])
        return PpoConfig(**values)

    def evolution_section(self):
        values = self.section('evolution')
        values['species_batch_size'] = self.scaled(values['species_batch_size'])
        return values

    def scaled(self, batch_size):
        return max(1, int(round(batch_size * self.budget_scale)))
