"""
File: features/checkpoint.py
Location: aerobatic_rl/features/checkpoint.py
Purpose: Save / restore a complete SAC agent (networks, optimizers, temperature, RNG)
Reusable: YES - any numpy agent built from core.netopt blocks

File layout:
    b"AMRL1"                     magic
    uint32 little-endian         length of the JSON header
    JSON header (UTF-8)          layout version, configs, seeds, block sizes
    binary blocks                networks (Mlp.to_bytes), then Adam moments as <f8
"""

import json
import logging
import struct
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from config.clock import format_timestamp
from core.environment import OBS_LAYOUT_VERSION
from core.errors import CheckpointError, LayoutMismatchError, ShapeError
from core.netopt import Mlp
from core.sac_agent import SacAgent, SacConfig
from utils.helpers import atomic_write_bytes

logger = logging.getLogger(__name__)

MAGIC = b'AMRL1'
FORMAT_VERSION = 1

NETWORK_BLOCKS = ('policy', 'q1', 'q2', 'q1_target', 'q2_target')
OPTIMIZER_BLOCKS = ('policy_opt', 'q1_opt', 'q2_opt', 'alpha_opt')


@dataclass
class LoadedCheckpoint:
    agent: SacAgent
    header: dict

    @property
    def layout(self):
        return self.header.get('observation_layout')

    @property
    def maneuver(self):
        return self.header.get('maneuver')

    @property
    def episode_config(self):
        return self.header.get('episode_config', {})

    @property
    def metrics_cursor(self):
        return self.header.get('metrics_cursor', 0)


def _optimizer_bytes(state):
    arrays = list(state.first_moments) + list(state.second_moments)
    return b''.join(np.asarray(a, dtype='<f8').tobytes() for a in arrays)


def _optimizer_meta(state):
    return {
        'step': state.step,
        'learning_rate': float(state.learning_rate).hex(),
        'beta1': float(state.beta1).hex(),
        'beta2': float(state.beta2).hex(),
        'epsilon': float(state.epsilon).hex(),
    }


def save_checkpoint(agent, path, episode_config=None, metrics_cursor=0, maneuver=None,
                    layout=OBS_LAYOUT_VERSION):
    """
    Write agent to path (atomic)

    Args:
        agent: SacAgent
        episode_config: EpisodeConfig the agent was trained with (optional)
        metrics_cursor: number of metrics records already emitted
        maneuver: label; defaults to episode_config.maneuver.kind
    """
    if maneuver is None and episode_config is not None:
        maneuver = episode_config.maneuver.kind

    blocks = []
    for name in NETWORK_BLOCKS:
        blocks.append((name, getattr(agent, name).to_bytes()))
    for name in OPTIMIZER_BLOCKS:
        blocks.append((name, _optimizer_bytes(getattr(agent, name))))

    header = {
        'format_version': FORMAT_VERSION,
        'observation_layout': layout,
        'maneuver': maneuver,
        'obs_dim': agent.obs_dim,
        'action_dim': agent.action_dim,
        'sac_config': agent.config.as_dict(),
        'episode_config': episode_config.as_flat_dict() if episode_config is not None else None,
        'seeds': {
            'sac': agent.config.seed,
            'env': episode_config.seed if episode_config is not None else None,
        },
        'metrics_cursor': int(metrics_cursor),
        'log_alpha': float(agent.log_alpha[0]).hex(),
        'rng_state': agent.rng.bit_generator.state,
        'optimizers': {name: _optimizer_meta(getattr(agent, name)) for name in OPTIMIZER_BLOCKS},
        'blocks': [[name, len(payload)] for name, payload in blocks],
        'created_at': format_timestamp(),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode('utf-8')

    payload = MAGIC + struct.pack('<I', len(header_bytes)) + header_bytes + b''.join(p for _, p in blocks)
    atomic_write_bytes(path, payload)
    logger.info(f"💾 Checkpoint saved: {path} ({len(payload) / 1024:.1f} KB)")


def _restore_optimizer(state, meta, payload):
    arrays = list(state.first_moments) + list(state.second_moments)
    offset = 0
    restored = []
    for template in arrays:
        size = template.size
        values = np.frombuffer(payload, dtype='<f8', count=size, offset=offset).astype(np.float64)
        restored.append(values.reshape(template.shape))
        offset += 8 * size
    half = len(restored) // 2
    state.first_moments = restored[:half]
    state.second_moments = restored[half:]
    state.step = int(meta['step'])
    state.learning_rate = float.fromhex(meta['learning_rate'])
    state.beta1 = float.fromhex(meta['beta1'])
    state.beta2 = float.fromhex(meta['beta2'])
    state.epsilon = float.fromhex(meta['epsilon'])


@contextmanager
def _header_field(key):
    """Missing or ill-typed header entries become a CheckpointError naming the key"""
    try:
        yield
    except (KeyError, IndexError, TypeError, ValueError, AttributeError) as e:
        raise CheckpointError(key, f'missing or malformed ({type(e).__name__}: {e})')


def read_checkpoint(path, expected_layout=OBS_LAYOUT_VERSION):
    """
    Parse and validate a checkpoint file

    Raises:
        CheckpointError: bad magic, unsupported version or truncated data (names the field)
        LayoutMismatchError: observation layout differs from expected_layout
    """
    with open(path, 'rb') as f:
        data = f.read()

    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise CheckpointError('magic', 'bad magic')
    offset = len(MAGIC)

    if len(data) < offset + 4:
        raise CheckpointError('header_length', 'file truncated')
    (header_length,) = struct.unpack_from('<I', data, offset)
    offset += 4

    if len(data) < offset + header_length:
        raise CheckpointError('header', 'file truncated')
    try:
        header = json.loads(data[offset:offset + header_length].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError('header', f'unreadable JSON ({e})')
    if not isinstance(header, dict):
        raise CheckpointError('header', 'not a JSON object')
    offset += header_length

    if header.get('format_version') != FORMAT_VERSION:
        raise CheckpointError('format_version', f"unsupported version {header.get('format_version')!r}")
    if expected_layout is not None and header.get('observation_layout') != expected_layout:
        raise LayoutMismatchError(header.get('observation_layout'), expected_layout)

    with _header_field('sac_config'):
        sac_settings = dict(header['sac_config'])
        sac_settings['hidden_dims'] = tuple(sac_settings['hidden_dims'])
        sac_config = SacConfig.from_mapping(sac_settings)
    with _header_field('obs_dim'):
        obs_dim = int(header['obs_dim'])
    with _header_field('action_dim'):
        action_dim = int(header['action_dim'])
    with _header_field('blocks'):
        blocks = [(str(name), int(size)) for name, size in header['blocks']]
    agent = SacAgent(obs_dim, action_dim, sac_config)

    for name, size in blocks:
        if len(data) < offset + size:
            raise CheckpointError(name, 'file truncated')
        block = data[offset:offset + size]
        offset += size

        if name in NETWORK_BLOCKS:
            try:
                net, used = Mlp.from_bytes(block)
            except ShapeError as e:
                raise CheckpointError(name, str(e))
            if used != size or net.layer_dims != getattr(agent, name).layer_dims:
                raise CheckpointError(name, 'network shape does not match the SAC config')
            setattr(agent, name, net)
        elif name in OPTIMIZER_BLOCKS:
            state = getattr(agent, name)
            expected = 8 * sum(a.size for a in state.first_moments) * 2
            if size != expected:
                raise CheckpointError(name, f'expected {expected} bytes, found {size}')
            with _header_field(f'optimizers.{name}'):
                _restore_optimizer(state, header['optimizers'][name], block)
        else:
            raise CheckpointError(name, 'unknown block')

    if offset != len(data):
        raise CheckpointError('trailer', f'{len(data) - offset} unexpected trailing bytes')

    with _header_field('log_alpha'):
        agent.log_alpha = np.array([float.fromhex(header['log_alpha'])])
    with _header_field('rng_state'):
        agent.rng.bit_generator.state = header['rng_state']

    logger.info(f"📂 Checkpoint loaded: {path} (maneuver={header.get('maneuver')}, "
                f"layout={header.get('observation_layout')})")
    return LoadedCheckpoint(agent, header)


def load_checkpoint(path, expected_layout=OBS_LAYOUT_VERSION):
    """Restore just the agent"""
    return read_checkpoint(path, expected_layout).agent
