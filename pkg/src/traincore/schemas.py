"""
Training schemas - TrainConfig, AgentFlags, RunSummary
"""
import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from errors import ConfigError
from refinedqn import AGENT_KINDS, REWARD_TIMINGS, AgentId, all_agent_ids
from synthdomains import DEFAULT_SCENARIO, Domain


class RunMode(str, Enum):
    SOURCE_ONLY = "source_only"
    ADVERSARIAL_ONLY = "adversarial_only"
    ADVERSARIAL_IR = "adversarial_ir"
    SUPERVISED_TARGET = "supervised_target"


class AgentFlags(BaseModel):
    """Per-modality on/off switches for S-agents and T-agents (None = all on)"""
    model_config = ConfigDict(extra="forbid")
    
    source: Optional[List[bool]] = None
    target: Optional[List[bool]] = None
    
    def is_enabled(self, agent_id: AgentId) -> bool:
        flags = self.source if agent_id.domain == Domain.SOURCE else self.target
        if flags is None:
            return True
        if agent_id.modality >= len(flags):
            raise ConfigError(f"agent flags cover {len(flags)} modalities, agent {agent_id} is outside")
        return flags[agent_id.modality]
    
    def enabled_ids(self, num_modalities: int) -> List[AgentId]:
        return [agent_id for agent_id in all_agent_ids(num_modalities) if self.is_enabled(agent_id)]


class TrainConfig(BaseModel):
    """Hyperparameters of one training run; unknown keys are rejected"""
    model_config = ConfigDict(extra="forbid")
    
    # schedule
    stage1_steps: int = Field(400, ge=0)
    stage2_steps: int = Field(800, ge=0)
    step_scale: float = Field(1.0, gt=0.0)
    stage1_lr: float = Field(0.01, gt=0.0)
    stage2_lr: float = Field(0.001, gt=0.0)
    stage1_batch: int = Field(96, ge=1)
    stage2_batch: int = Field(80, ge=2)
    weight_decay: float = Field(1e-7, ge=0.0)
    adam_betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = Field(1e-8, gt=0.0)
    
    # model
    embed_dim: int = Field(64, ge=1)
    hidden_dim: int = Field(128, ge=1)
    disc_hidden_dim: int = Field(128, ge=1)
    dropout: float = Field(0.5, ge=0.0, lt=1.0)
    grl_scale: float = Field(1.0, ge=0.0)
    leaky_slope: float = Field(0.01, ge=0.0)
    
    # refinement agents
    gamma: float = Field(0.9, ge=0.0, le=1.0)
    epsilon: float = Field(0.5, ge=0.0, le=1.0)
    epsilon_final: Optional[float] = Field(None, ge=0.0, le=1.0)
    tau_s: float = Field(0.5, ge=0.0, le=1.0)
    tau_t: float = Field(0.5, ge=0.0, le=1.0)
    terminal_E: int = Field(1, ge=0)
    candidate_size: int = Field(5, ge=1)
    q_hidden_dim: int = Field(128, ge=1)
    replay_capacity: int = Field(2000, ge=1)
    dqn_batch_size: int = Field(32, ge=1)
    dqn_lr: Optional[float] = Field(None, gt=0.0)
    reward_timing: str = "before_update"
    agent_kind: str = "dqn"
    agents: AgentFlags = Field(default_factory=AgentFlags)
    refine_affects_cls: bool = False
    
    # run
    mode: RunMode = RunMode.ADVERSARIAL_IR
    seed: int = 0
    scenario: str = DEFAULT_SCENARIO
    eval_every: int = Field(50, ge=1)
    last_m: int = Field(9, ge=1)
    dump_masks: bool = False
    
    @model_validator(mode="after")
    def _check_consistency(self):
        if self.stage2_batch % 2:
            raise ValueError(f"stage2_batch must be even, got {self.stage2_batch}")
        if (self.stage2_batch // 2) % self.candidate_size:
            raise ValueError(
                f"stage2_batch/2 ({self.stage2_batch // 2}) must be divisible by candidate_size ({self.candidate_size})"
            )
        if self.terminal_E >= self.candidate_size:
            raise ValueError(f"terminal_E ({self.terminal_E}) must be < candidate_size ({self.candidate_size})")
        if self.reward_timing not in REWARD_TIMINGS:
            raise ValueError(f"reward_timing must be one of {REWARD_TIMINGS}")
        if self.agent_kind not in AGENT_KINDS:
            raise ValueError(f"agent_kind must be one of {AGENT_KINDS}")
        return self
    
    @property
    def scaled_stage1_steps(self) -> int:
        return int(round(self.stage1_steps * self.step_scale))
    
    @property
    def scaled_stage2_steps(self) -> int:
        return int(round(self.stage2_steps * self.step_scale))
    
    @property
    def effective_dqn_lr(self) -> float:
        return self.dqn_lr if self.dqn_lr is not None else self.stage2_lr
    
    def with_updates(self, **updates) -> "TrainConfig":
        """Validated copy with ``updates`` applied"""
        data = self.model_dump(mode="json")
        data.update(updates)
        return TrainConfig.model_validate(data)


class SelectionStats(BaseModel):
    removed: int
    removed_negative: int
    negative_seen: int
    precision: Optional[float] = None
    recall: Optional[float] = None


class RunSummary(BaseModel):
    """Final numbers of one run, written as summary.json"""
    variant: str
    mode: RunMode
    scenario: str
    seed: int
    final_accuracy: float
    last_accuracies: List[float]
    num_evaluations: int
    stage1_steps: int
    stage2_steps: int
    selection: Dict[str, SelectionStats] = Field(default_factory=dict)
    config_hash: str
    config: Dict


def config_hash(config: TrainConfig) -> str:
    """Stable short hash of every config field"""
    payload = json.dumps(config.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _validation_message(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"]) or "config"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def parse_config(data: Dict, **overrides) -> TrainConfig:
    """
    Build a TrainConfig from a mapping
    
    Raises:
        ConfigError: unknown keys or invalid values
    """
    merged = dict(data or {})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return TrainConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {_validation_message(e)}") from e


def load_config(path: Union[str, Path, None], **overrides) -> TrainConfig:
    """
    Read a flat key-value config file (YAML or JSON)
    
    Args:
        path: Config file; None gives the defaults
        overrides: Values taking precedence over the file (None is ignored)
    """
    if path is None:
        return parse_config({}, **overrides)
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold key-value pairs")
    return parse_config(data, **overrides)
